//! Training formulations and their dual-variable update rules.
//!
//! Five formulations share one loss-graph builder: a supervised regression
//! baseline, the composite PINN loss (optionally weighted), the augmented-
//! Lagrangian PECANN loss with its penalty/multiplier updates, and the
//! Lagrange-dual loss whose per-point multipliers ascend with an RMSprop-like
//! adaptive rate. An epoch is one optimizer step at frozen multipliers
//! followed by one ascent update at the new parameters.

use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::mlp::{GraphModel, MlpConfig, ParameterVector};
use crate::optim::{OptimizerState, StepReport};
use crate::problems::{Evaluator, Problem};
use crate::sampling::PointSet;
use crate::tensor::Tensor;

/// The fixed point sets of one training run.
pub struct TrainingPoints {
    pub interior: PointSet,
    pub boundary: PointSet,
    pub initial: Option<PointSet>,
}

/// Hyper-parameters of the adaptive dual ascent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualHyper {
    /// Decay of the running squared-residual average.
    pub beta: f64,
    /// Ascent rate.
    pub eta: f64,
    /// Smoothing term under the square root.
    pub eps_smooth: f64,
}

impl Default for DualHyper {
    fn default() -> Self {
        Self { beta: 0.9, eta: 1e-2, eps_smooth: 1e-10 }
    }
}

/// Per-point multipliers and running squared-residual averages for one
/// constraint family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDual {
    pub lambda: Vec<f64>,
    pub e_avg: Vec<f64>,
}

impl FamilyDual {
    pub fn new(n: usize) -> Self {
        Self { lambda: vec![0.0; n], e_avg: vec![0.0; n] }
    }

    /// E <- beta E + (1-beta) phi^2, then lambda += eta phi / sqrt(E + eps).
    /// Elementwise, order-independent across points.
    pub fn ascend(&mut self, phi: &[f64], hyper: &DualHyper) {
        debug_assert_eq!(phi.len(), self.lambda.len());
        for ((l, e), p) in self.lambda.iter_mut().zip(self.e_avg.iter_mut()).zip(phi) {
            *e = hyper.beta * *e + (1.0 - hyper.beta) * p * p;
            *l += hyper.eta * p / (*e + hyper.eps_smooth).sqrt();
        }
    }

    pub fn max_lambda(&self) -> f64 {
        self.lambda.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// Lagrange-dual multiplier state across the constraint families a problem
/// declares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierState {
    pub f: Option<FamilyDual>,
    pub c: Option<FamilyDual>,
    pub b: FamilyDual,
    pub i: Option<FamilyDual>,
    pub hyper: DualHyper,
}

impl MultiplierState {
    pub fn for_problem(problem: &dyn Problem, points: &TrainingPoints, hyper: DualHyper) -> Self {
        let fam = problem.families();
        let n_int = points.interior.len();
        Self {
            f: fam.f.then(|| FamilyDual::new(n_int)),
            c: fam.c.then(|| FamilyDual::new(n_int)),
            b: FamilyDual::new(points.boundary.len()),
            i: points.initial.as_ref().map(|ps| FamilyDual::new(ps.len())),
            hyper,
        }
    }
}

/// Augmented-Lagrangian state: per-point multipliers for the constrained
/// families (boundary, and initial when present) plus the shared penalty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlmState {
    pub lambda_b: Vec<f64>,
    pub lambda_i: Vec<f64>,
    pub mu: f64,
    pub mu_max: f64,
}

impl AlmState {
    pub fn new(n_boundary: usize, n_initial: usize, mu0: f64, mu_max: f64) -> Self {
        Self { lambda_b: vec![0.0; n_boundary], lambda_i: vec![0.0; n_initial], mu: mu0, mu_max }
    }
}

/// lambda_i += mu * phi_i with the pre-update mu, then mu <- min(2 mu, mu_max).
pub fn alm_update(state: &mut AlmState, phi_b: &[f64], phi_i: &[f64]) {
    let mu = state.mu;
    for (l, p) in state.lambda_b.iter_mut().zip(phi_b) {
        *l += mu * p;
    }
    for (l, p) in state.lambda_i.iter_mut().zip(phi_i) {
        *l += mu * p;
    }
    state.mu = (2.0 * state.mu).min(state.mu_max);
}

/// One ascent pass over every family present in the state.
pub fn dual_ascent_update(state: &mut MultiplierState, phi: &PhiValues) {
    let hyper = state.hyper;
    if let Some(fd) = state.f.as_mut() {
        fd.ascend(&phi.f, &hyper);
    }
    if let Some(fd) = state.c.as_mut() {
        fd.ascend(&phi.c, &hyper);
    }
    state.b.ascend(&phi.b, &hyper);
    if let Some(fd) = state.i.as_mut() {
        fd.ascend(&phi.i, &hyper);
    }
}

/// Per-point squared residual distances of the latest evaluation.
#[derive(Debug, Clone, Default)]
pub struct PhiValues {
    pub d: Vec<f64>,
    pub f: Vec<f64>,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub i: Vec<f64>,
}

/// Scalar loss decomposition. `total` always equals the sum of the five
/// terms; formulation-specific weights and penalties are folded into the
/// terms themselves.
#[derive(Debug, Clone, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub j_d: f64,
    pub j_f: f64,
    pub j_c: f64,
    pub j_b: f64,
    pub j_i: f64,
    /// Supervised runs with no boundary labels fall back to a zero boundary
    /// term; this flags that convention.
    pub boundary_term_absent: bool,
    #[serde(skip)]
    pub phi: PhiValues,
}

/// Formulation selector plus its mutable dual state.
#[derive(Debug, Clone)]
pub enum FormulationState {
    Supervised,
    /// Composite residual + boundary loss with multiplicative weights;
    /// (1, 1) is the plain unweighted composite.
    Pinn { w_domain: f64, w_boundary: f64 },
    PecannAlm(AlmState),
    LagrangeDual(MultiplierState),
}

impl FormulationState {
    pub fn name(&self) -> &'static str {
        match self {
            FormulationState::Supervised => "supervised",
            FormulationState::Pinn { w_domain, w_boundary } => {
                if *w_domain == 1.0 && *w_boundary == 1.0 {
                    "pinn"
                } else {
                    "weighted-pinn"
                }
            }
            FormulationState::PecannAlm(_) => "pecann-alm",
            FormulationState::LagrangeDual(_) => "lagrange-dual",
        }
    }

    pub fn max_lambda(&self) -> [f64; 4] {
        match self {
            FormulationState::LagrangeDual(s) => [
                s.f.as_ref().map(|f| f.max_lambda()).unwrap_or(0.0),
                s.c.as_ref().map(|f| f.max_lambda()).unwrap_or(0.0),
                s.b.max_lambda(),
                s.i.as_ref().map(|f| f.max_lambda()).unwrap_or(0.0),
            ],
            FormulationState::PecannAlm(s) => [
                0.0,
                0.0,
                s.lambda_b.iter().fold(0.0f64, |m, v| m.max(*v)),
                s.lambda_i.iter().fold(0.0f64, |m, v| m.max(*v)),
            ],
            _ => [0.0; 4],
        }
    }
}

/// Exact-solution labels for the supervised baseline, one column per field.
pub struct SupervisedTargets {
    pub interior: Vec<Tensor>,
    pub boundary: Vec<Tensor>,
}

pub fn supervised_targets(
    problem: &dyn Problem,
    points: &TrainingPoints,
) -> Result<SupervisedTargets, CoreError> {
    if !problem.has_exact() {
        return Err(CoreError::invalid(format!(
            "problem '{}' has no exact solution to supervise on",
            problem.name()
        )));
    }
    let label = |ps: &PointSet| -> Vec<Tensor> {
        let nf = problem.output_dim();
        let mut cols = vec![Vec::with_capacity(ps.len()); nf];
        for p in ps.iter_points() {
            let v = problem.exact(p);
            for (k, col) in cols.iter_mut().enumerate() {
                col.push(v[k]);
            }
        }
        cols.into_iter().map(|c| Tensor::column(&c)).collect()
    };
    Ok(SupervisedTargets { interior: label(&points.interior), boundary: label(&points.boundary) })
}

/// Interior/boundary/initial residual distances as graph nodes.
struct ResidualNodes {
    phi_d: NodeId,
    phi_f: Option<NodeId>,
    phi_c: Option<NodeId>,
    phi_b: NodeId,
    phi_i: Option<NodeId>,
}

fn residual_nodes<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    problem: &dyn Problem,
    points: &TrainingPoints,
) -> Result<ResidualNodes, CoreError> {
    let ev = Evaluator::new(g, model);
    let fe = ev.eval(&points.interior, problem.deriv_need())?;
    let phis = problem.interior_phis(g, &points.interior, &fe)?;
    let phi_b = problem.boundary_phi(&ev, &points.boundary)?;
    let phi_i = match points.initial.as_ref() {
        Some(ps) => problem.initial_phi(&ev, ps)?,
        None => None,
    };
    Ok(ResidualNodes { phi_d: phis.d, phi_f: phis.f, phi_c: phis.c, phi_b, phi_i })
}

fn column_values(g: &DiffGraph, id: NodeId) -> Vec<f64> {
    g.with_value(id, |t| t.data().to_vec())
}

/// Sum lambda_i * phi_i as a graph node; the multipliers enter as constants.
fn weighted_sum(g: &DiffGraph, lambda: &[f64], phi: NodeId) -> Result<NodeId, CoreError> {
    let l = g.constant(Tensor::column(lambda));
    Ok(g.sum(g.mul(l, phi)?))
}

fn check_len(
    family: &'static str,
    lambda: &[f64],
    phi_len: usize,
) -> Result<(), CoreError> {
    if lambda.len() != phi_len {
        return Err(CoreError::MultiplierLength { family, expected: phi_len, got: lambda.len() });
    }
    Ok(())
}

/// Build the loss graph for any formulation; returns the scalar total node
/// and the evaluated breakdown.
pub fn build_loss<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    problem: &dyn Problem,
    points: &TrainingPoints,
    form: &FormulationState,
    targets: Option<&SupervisedTargets>,
) -> Result<(NodeId, LossBreakdown), CoreError> {
    match form {
        FormulationState::Supervised => {
            let targets = targets
                .ok_or_else(|| CoreError::invalid("supervised formulation needs labels"))?;
            build_supervised(g, model, points, targets)
        }
        FormulationState::Pinn { w_domain, w_boundary } => {
            build_pinn(g, model, problem, points, *w_domain, *w_boundary)
        }
        FormulationState::PecannAlm(state) => build_alm(g, model, problem, points, state),
        FormulationState::LagrangeDual(state) => build_dual(g, model, problem, points, state),
    }
}

fn mse_node(
    g: &DiffGraph,
    model: &GraphModel,
    pts: &PointSet,
    targets: &[Tensor],
) -> Result<NodeId, CoreError> {
    let ev = Evaluator::new(g, model);
    let fields = ev.values_at(&pts.coords)?;
    let mut gaps = Vec::with_capacity(fields.len());
    for (f, t) in fields.iter().zip(targets) {
        gaps.push(g.sub(*f, g.constant(t.clone()))?);
    }
    let phi = crate::problems::sum_squares(g, &gaps)?;
    Ok(g.mean(phi))
}

fn build_supervised<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    points: &TrainingPoints,
    targets: &SupervisedTargets,
) -> Result<(NodeId, LossBreakdown), CoreError> {
    if points.interior.is_empty() {
        return Err(CoreError::invalid("supervised loss needs a non-empty labeled point set"));
    }
    let domain = mse_node(g, model, &points.interior, &targets.interior)?;
    let boundary_absent = points.boundary.is_empty();
    let total;
    let j_b;
    if boundary_absent {
        total = domain;
        j_b = 0.0;
    } else {
        let b = mse_node(g, model, &points.boundary, &targets.boundary)?;
        j_b = g.item(b);
        total = g.add(domain, b)?;
    }
    let j_d = g.item(domain);
    Ok((
        total,
        LossBreakdown {
            total: g.item(total),
            j_d,
            j_f: 0.0,
            j_c: 0.0,
            j_b,
            j_i: 0.0,
            boundary_term_absent: boundary_absent,
            phi: PhiValues::default(),
        },
    ))
}

/// Interior residual families aggregated into one per-point distance, the
/// composite-loss convention.
fn aggregate_interior(g: &DiffGraph, r: &ResidualNodes) -> Result<NodeId, CoreError> {
    let mut acc = r.phi_d;
    for extra in [r.phi_f, r.phi_c].into_iter().flatten() {
        acc = g.add(acc, extra)?;
    }
    Ok(acc)
}

fn build_pinn<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    problem: &dyn Problem,
    points: &TrainingPoints,
    w_domain: f64,
    w_boundary: f64,
) -> Result<(NodeId, LossBreakdown), CoreError> {
    if w_domain <= 0.0 || w_boundary <= 0.0 {
        return Err(CoreError::invalid("composite-loss weights must be positive"));
    }
    let r = residual_nodes(g, model, problem, points)?;
    let interior = aggregate_interior(g, &r)?;
    let domain = g.scale(g.mean(interior), w_domain);
    let boundary = g.scale(g.mean(r.phi_b), w_boundary);
    let mut total = g.add(domain, boundary)?;
    let mut j_i = 0.0;
    if let Some(phi_i) = r.phi_i {
        let init = g.scale(g.mean(phi_i), w_boundary);
        j_i = g.item(init);
        total = g.add(total, init)?;
    }
    let phi = collect_phis(g, &r);
    Ok((
        total,
        LossBreakdown {
            total: g.item(total),
            j_d: g.item(domain),
            j_f: 0.0,
            j_c: 0.0,
            j_b: g.item(boundary),
            j_i,
            boundary_term_absent: false,
            phi,
        },
    ))
}

fn collect_phis(g: &DiffGraph, r: &ResidualNodes) -> PhiValues {
    PhiValues {
        d: column_values(g, r.phi_d),
        f: r.phi_f.map(|n| column_values(g, n)).unwrap_or_default(),
        c: r.phi_c.map(|n| column_values(g, n)).unwrap_or_default(),
        b: column_values(g, r.phi_b),
        i: r.phi_i.map(|n| column_values(g, n)).unwrap_or_default(),
    }
}

/// Multiplier term plus quadratic penalty of one ALM-constrained family:
/// sum_i lambda_i phi_i + (mu/2) sum_i phi_i^2.
fn alm_family_node(
    g: &DiffGraph,
    lambda: &[f64],
    mu: f64,
    phi: NodeId,
) -> Result<NodeId, CoreError> {
    let mult = weighted_sum(g, lambda, phi)?;
    let penalty = g.scale(g.sum(g.powi(phi, 2)), mu / 2.0);
    g.add(mult, penalty)
}

fn build_alm<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    problem: &dyn Problem,
    points: &TrainingPoints,
    state: &AlmState,
) -> Result<(NodeId, LossBreakdown), CoreError> {
    let r = residual_nodes(g, model, problem, points)?;
    check_len("B", &state.lambda_b, points.boundary.len())?;
    let interior = aggregate_interior(g, &r)?;
    let domain = g.sum(interior);
    let b_term = alm_family_node(g, &state.lambda_b, state.mu, r.phi_b)?;
    let mut total = g.add(domain, b_term)?;
    let mut j_i = 0.0;
    if let Some(phi_i) = r.phi_i {
        check_len("I", &state.lambda_i, points.initial.as_ref().map_or(0, |p| p.len()))?;
        let i_term = alm_family_node(g, &state.lambda_i, state.mu, phi_i)?;
        j_i = g.item(i_term);
        total = g.add(total, i_term)?;
    }
    let phi = collect_phis(g, &r);
    Ok((
        total,
        LossBreakdown {
            total: g.item(total),
            j_d: g.item(domain),
            j_f: 0.0,
            j_c: 0.0,
            j_b: g.item(b_term),
            j_i,
            boundary_term_absent: false,
            phi,
        },
    ))
}

fn build_dual<'g>(
    g: &'g DiffGraph,
    model: &GraphModel<'g>,
    problem: &dyn Problem,
    points: &TrainingPoints,
    state: &MultiplierState,
) -> Result<(NodeId, LossBreakdown), CoreError> {
    let r = residual_nodes(g, model, problem, points)?;
    let mut total = g.sum(r.phi_d);
    let j_d = g.item(total);
    let mut j_f = 0.0;
    let mut j_c = 0.0;
    let mut j_i = 0.0;

    if let (Some(phi_f), Some(fd)) = (r.phi_f, state.f.as_ref()) {
        check_len("F", &fd.lambda, points.interior.len())?;
        let term = weighted_sum(g, &fd.lambda, phi_f)?;
        j_f = g.item(term);
        total = g.add(total, term)?;
    }
    if let (Some(phi_c), Some(fd)) = (r.phi_c, state.c.as_ref()) {
        check_len("C", &fd.lambda, points.interior.len())?;
        let term = weighted_sum(g, &fd.lambda, phi_c)?;
        j_c = g.item(term);
        total = g.add(total, term)?;
    }
    check_len("B", &state.b.lambda, points.boundary.len())?;
    let b_term = weighted_sum(g, &state.b.lambda, r.phi_b)?;
    let j_b = g.item(b_term);
    total = g.add(total, b_term)?;
    if let (Some(phi_i), Some(fd)) = (r.phi_i, state.i.as_ref()) {
        check_len("I", &fd.lambda, points.initial.as_ref().map_or(0, |p| p.len()))?;
        let term = weighted_sum(g, &fd.lambda, phi_i)?;
        j_i = g.item(term);
        total = g.add(total, term)?;
    }
    let phi = collect_phis(g, &r);
    Ok((
        total,
        LossBreakdown {
            total: g.item(total),
            j_d,
            j_f,
            j_c,
            j_b,
            j_i,
            boundary_term_absent: false,
            phi,
        },
    ))
}

/// Evaluate the loss and its breakdown at `params` without any gradient.
pub fn evaluate_loss(
    config: &MlpConfig,
    params: &ParameterVector,
    problem: &dyn Problem,
    points: &TrainingPoints,
    form: &FormulationState,
    targets: Option<&SupervisedTargets>,
) -> Result<LossBreakdown, CoreError> {
    let g = DiffGraph::new();
    let model = GraphModel::new(&g, config, params)?;
    let (_, breakdown) = build_loss(&g, &model, problem, points, form, targets)?;
    Ok(breakdown)
}

/// Loss and flat parameter gradient at `params`.
pub fn loss_and_grad(
    config: &MlpConfig,
    params: &ParameterVector,
    problem: &dyn Problem,
    points: &TrainingPoints,
    form: &FormulationState,
    targets: Option<&SupervisedTargets>,
) -> Result<(f64, Vec<f64>, LossBreakdown), CoreError> {
    let g = DiffGraph::new();
    let model = GraphModel::new(&g, config, params)?;
    let (total, breakdown) = build_loss(&g, &model, problem, points, form, targets)?;
    let grad = model.parameter_gradient(total, params)?;
    Ok((breakdown.total, grad, breakdown))
}

#[derive(Debug)]
pub struct EpochOutcome {
    pub breakdown: LossBreakdown,
    pub step: StepReport,
}

/// One training epoch: an optimizer step on the parameters at frozen
/// multipliers, then one dual update at the new parameters (a no-op for
/// formulations without dual variables). A non-finite post-step loss aborts
/// with a diagnostic.
pub fn run_epoch(
    config: &MlpConfig,
    problem: &dyn Problem,
    points: &TrainingPoints,
    targets: Option<&SupervisedTargets>,
    params: &mut ParameterVector,
    form: &mut FormulationState,
    opt: &mut OptimizerState,
) -> Result<EpochOutcome, CoreError> {
    let step = {
        let form_ref: &FormulationState = form;
        let params_ref: &ParameterVector = params;
        let mut closure = |theta: &[f64]| -> Result<(f64, Vec<f64>), CoreError> {
            let p = params_ref.with_values(theta.to_vec())?;
            let (loss, grad, _) = loss_and_grad(config, &p, problem, points, form_ref, targets)?;
            Ok((loss, grad))
        };
        let mut values = params.values().to_vec();
        let step = opt.step(&mut values, &mut closure)?;
        *params = params.with_values(values)?;
        step
    };

    let breakdown = evaluate_loss(config, params, problem, points, form, targets)?;
    if !breakdown.total.is_finite() {
        return Err(CoreError::NonFinite {
            what: "epoch loss",
            detail: format!(
                "total={} j_d={} j_f={} j_c={} j_b={} j_i={} grad_inf={}",
                breakdown.total,
                breakdown.j_d,
                breakdown.j_f,
                breakdown.j_c,
                breakdown.j_b,
                breakdown.j_i,
                step.grad_inf
            ),
        });
    }

    match form {
        FormulationState::LagrangeDual(state) => dual_ascent_update(state, &breakdown.phi),
        FormulationState::PecannAlm(state) => {
            alm_update(state, &breakdown.phi.b, &breakdown.phi.i)
        }
        _ => {}
    }
    Ok(EpochOutcome { breakdown, step })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alm_update_spec_fixtures() {
        // mu doubles under the cap
        let mut s = AlmState::new(1, 0, 1.0, 100.0);
        alm_update(&mut s, &[0.0], &[]);
        assert_eq!(s.mu, 2.0);
        // cap applies
        let mut s = AlmState::new(1, 0, 64.0, 100.0);
        alm_update(&mut s, &[0.0], &[]);
        assert_eq!(s.mu, 100.0);
        // lambda uses pre-update mu: lambda = 0, mu = 2, phi = 0.25 -> 0.5
        let mut s = AlmState::new(1, 0, 2.0, 100.0);
        alm_update(&mut s, &[0.25], &[]);
        assert_eq!(s.lambda_b[0], 0.5);
        assert_eq!(s.mu, 4.0);
    }

    #[test]
    fn dual_ascent_spec_fixture() {
        // lambda=0, E=0, phi=0.01, beta=0.9, eta=1e-2, eps=1e-10
        let mut fd = FamilyDual::new(1);
        let hyper = DualHyper::default();
        fd.ascend(&[0.01], &hyper);
        let e_expect: f64 = 0.1 * 0.01 * 0.01;
        let l_expect = 1e-2 * 0.01 / (e_expect + 1e-10).sqrt();
        assert!((fd.e_avg[0] - e_expect).abs() <= 1e-12 * e_expect);
        assert!((fd.lambda[0] - l_expect).abs() <= 1e-12 * l_expect);
        // matches the quoted 3.1623e-2 to the printed precision
        assert!((fd.lambda[0] - 3.1623e-2).abs() < 1e-6);
    }

    #[test]
    fn dual_ascent_zero_residual_fixed_point() {
        let mut fd = FamilyDual { lambda: vec![1.5], e_avg: vec![0.4] };
        fd.ascend(&[0.0], &DualHyper::default());
        assert_eq!(fd.lambda[0], 1.5);
        assert!((fd.e_avg[0] - 0.36).abs() < 1e-15);
    }

    #[test]
    fn dual_ascent_increment_shrinks_with_growing_average() {
        let mut fd = FamilyDual::new(1);
        let hyper = DualHyper::default();
        fd.ascend(&[0.05], &hyper);
        let first = fd.lambda[0];
        fd.ascend(&[0.05], &hyper);
        let second = fd.lambda[0] - first;
        assert!(first > 0.0 && second > 0.0);
        assert!(second < first, "increments: {first} then {second}");
        // closed-form check of the two-step values
        let e1 = 0.1 * 0.05f64 * 0.05;
        let l1 = 1e-2 * 0.05 / (e1 + 1e-10).sqrt();
        let e2 = 0.9 * e1 + 0.1 * 0.05 * 0.05;
        let l2 = l1 + 1e-2 * 0.05 / (e2 + 1e-10).sqrt();
        assert!((first - l1).abs() < 1e-15);
        assert!((fd.lambda[0] - l2).abs() < 1e-15);
    }

    #[test]
    fn multipliers_never_decrease_and_gate_on_residual_size() {
        let hyper = DualHyper::default();
        let mut fd = FamilyDual::new(2);
        let mut prev = fd.lambda.clone();
        for _ in 0..50 {
            fd.ascend(&[0.2, 0.01], &hyper);
            assert!(fd.lambda.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = fd.lambda.clone();
        }
        // persistently larger residual accumulates the larger multiplier
        assert!(fd.lambda[0] > fd.lambda[1]);
    }

    #[test]
    fn alm_multipliers_monotone() {
        let mut s = AlmState::new(3, 0, 1.0, 1e4);
        let mut prev = s.lambda_b.clone();
        for _ in 0..20 {
            alm_update(&mut s, &[0.3, 0.0, 0.07], &[]);
            assert!(s.lambda_b.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = s.lambda_b.clone();
        }
        assert_eq!(s.mu, 1e4);
    }
}
