//! The benchmark catalog: each problem is a first-order residual system with
//! constraint operators, exact solutions where available, and its sampling
//! conventions.
//!
//! Interior residuals are built from a [`FieldsEval`] (network outputs and
//! their input-derivatives as graph nodes), so the same operator code runs on
//! network predictions and, in tests, on analytic fields.

use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::mlp::GraphModel;
use crate::sampling::{
    boundary_points, sobol_points, AxisMode, BoxDomain, Face, PointSet, Role,
};
use crate::tensor::Tensor;

mod convection;
mod convection_diffusion;
mod heat_composite;
mod helmholtz;
mod lid_cavity;
mod stokes;

pub use convection::Convection;
pub use convection_diffusion::ConvectionDiffusion;
pub use heat_composite::HeatComposite;
pub use helmholtz::Helmholtz;
pub use lid_cavity::LidCavity;
pub use stokes::Stokes;

/// Highest input-derivative order a problem's residuals consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivNeed {
    Value,
    First,
    Second,
}

/// Which optional constraint families a problem declares (the boundary
/// family B is always present).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyPresence {
    pub f: bool,
    pub c: bool,
    pub i: bool,
}

/// Per-point squared residual distances for the interior operator families.
/// `d` is the domain objective; `f` and `c` are the compatibility and
/// divergence constraint families when the problem declares them.
pub struct InteriorPhis {
    pub d: NodeId,
    pub f: Option<NodeId>,
    pub c: Option<NodeId>,
}

/// Network outputs and input-derivatives at one point batch, as graph nodes.
/// All entries are `[n, 1]` columns; `d1[field][axis]`, `d2[field][axis]`
/// (pure second derivatives, present only when requested).
pub struct FieldsEval {
    pub value: Vec<NodeId>,
    pub d1: Vec<Vec<NodeId>>,
    pub d2: Vec<Vec<NodeId>>,
}

/// Evaluates a network on point batches, with derivatives taken by seeding
/// one forward-mode tangent pass per input axis (derivative nodes stay on the
/// graph, so losses built from them remain differentiable in the parameters).
pub struct Evaluator<'g> {
    pub graph: &'g DiffGraph,
    pub model: &'g GraphModel<'g>,
}

impl<'g> Evaluator<'g> {
    pub fn new(graph: &'g DiffGraph, model: &'g GraphModel<'g>) -> Self {
        Self { graph, model }
    }

    /// Forward only: per-field `[n, 1]` columns at the given points.
    pub fn values_at(&self, coords: &Tensor) -> Result<Vec<NodeId>, CoreError> {
        let x = self.graph.constant(coords.clone());
        self.model.fields(x)
    }

    pub fn eval(&self, pts: &PointSet, need: DerivNeed) -> Result<FieldsEval, CoreError> {
        self.eval_coords(&pts.coords, need)
    }

    pub fn eval_coords(&self, coords: &Tensor, need: DerivNeed) -> Result<FieldsEval, CoreError> {
        let g = self.graph;
        let n = coords.shape()[0];
        let dim = coords.shape()[1];
        let x = g.leaf(coords.clone());
        let fields = self.model.fields(x)?;
        let n_fields = fields.len();
        let mut fe = FieldsEval { value: fields, d1: vec![Vec::new(); n_fields], d2: vec![Vec::new(); n_fields] };
        if need == DerivNeed::Value {
            return Ok(fe);
        }
        for axis in 0..dim {
            let seed = g.constant(axis_seed(n, dim, axis));
            let tangents = g.jvp(&[(x, seed)], &fe.value)?;
            for (k, t) in tangents.iter().enumerate() {
                fe.d1[k].push(*t);
            }
            if need == DerivNeed::Second {
                let firsts: Vec<NodeId> = (0..n_fields).map(|k| fe.d1[k][axis]).collect();
                let seconds = g.jvp(&[(x, seed)], &firsts)?;
                for (k, t) in seconds.iter().enumerate() {
                    fe.d2[k].push(*t);
                }
            }
        }
        Ok(fe)
    }
}

fn axis_seed(n: usize, dim: usize, axis: usize) -> Tensor {
    let mut data = vec![0.0; n * dim];
    for i in 0..n {
        data[i * dim + axis] = 1.0;
    }
    Tensor::new(vec![n, dim], data).expect("sized")
}

/// Elementwise sum of squares of residual components: `[n,1]` per-point
/// squared distance.
pub fn sum_squares(g: &DiffGraph, comps: &[NodeId]) -> Result<NodeId, CoreError> {
    let mut acc: Option<NodeId> = None;
    for c in comps {
        let sq = g.powi(*c, 2);
        acc = Some(match acc {
            None => sq,
            Some(prev) => g.add(prev, sq)?,
        });
    }
    acc.ok_or_else(|| CoreError::invalid("no residual components"))
}

/// Column constant built by mapping each point through `f`.
pub fn point_constant(
    g: &DiffGraph,
    pts: &PointSet,
    f: impl Fn(&[f64]) -> f64,
) -> NodeId {
    let vals: Vec<f64> = pts.iter_points().map(f).collect();
    g.constant(Tensor::column(&vals))
}

/// A benchmark definition. All evaluators are pure; definitions are immutable
/// after construction.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn unknown_names(&self) -> Vec<&'static str>;
    /// Domain box, time axis appended last for unsteady problems.
    fn domain(&self) -> BoxDomain;
    /// Index of the time axis, when the problem is unsteady.
    fn time_axis(&self) -> Option<usize> {
        None
    }
    fn deriv_need(&self) -> DerivNeed;
    fn parameters(&self) -> Vec<(&'static str, f64)>;

    /// Which optional constraint families this problem declares.
    fn families(&self) -> FamilyPresence;

    fn has_exact(&self) -> bool;
    /// Exact values for every unknown. Only valid when `has_exact`.
    fn exact(&self, p: &[f64]) -> Vec<f64>;
    /// Analytic first derivatives `[field][axis]`.
    fn exact_d1(&self, p: &[f64]) -> Vec<Vec<f64>>;
    /// Analytic pure second derivatives `[field][axis]`; only for problems
    /// whose residuals need them.
    fn exact_d2(&self, _p: &[f64]) -> Vec<Vec<f64>> {
        Vec::new()
    }

    fn faces(&self) -> Vec<Face>;

    /// Interior operator families as per-point squared distances.
    fn interior_phis(
        &self,
        g: &DiffGraph,
        pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError>;

    /// Per-point squared boundary-constraint distance.
    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError>;

    /// Per-point squared initial-condition distance, for unsteady problems.
    fn initial_phi(&self, _ev: &Evaluator, _pts: &PointSet) -> Result<Option<NodeId>, CoreError> {
        Ok(None)
    }

    /// Boundary residual components of the exact solution at a tagged
    /// boundary point (oracle-test hook).
    fn boundary_residual_exact(&self, _p: &[f64], _tag: usize) -> Vec<f64> {
        Vec::new()
    }

    /// Interior collocation points. The default excludes the boundary on
    /// spatial axes and uses (0, tau] on the time axis.
    fn sample_interior(&self, n: usize, sampler: Sampler) -> Result<PointSet, CoreError> {
        let domain = self.domain();
        match sampler {
            Sampler::Uniform => {
                let counts = crate::sampling::balanced_axes(&domain, n);
                let modes: Vec<AxisMode> = (0..domain.dim())
                    .map(|k| {
                        if Some(k) == self.time_axis() {
                            AxisMode::HalfOpenLow
                        } else {
                            AxisMode::Open
                        }
                    })
                    .collect();
                crate::sampling::product_grid(&domain, &counts, &modes, Role::Interior)
            }
            Sampler::Sobol { skip } => sobol_points(&domain, n, domain.dim(), skip),
        }
    }

    /// Boundary constraint points, `n_per_face` on each declared face.
    fn sample_boundary(&self, n_per_face: usize) -> Result<PointSet, CoreError> {
        boundary_points(&self.domain(), &self.faces(), n_per_face)
    }

    /// Initial-condition points, for unsteady problems.
    fn sample_initial(&self, _n: usize) -> Result<Option<PointSet>, CoreError> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Uniform,
    Sobol { skip: usize },
}

/// Construct a problem by its registry name.
pub fn by_name(
    name: &str,
    alpha: Option<f64>,
    u_convect: Option<f64>,
    reynolds: Option<f64>,
    wavenumber: Option<f64>,
    second_order: bool,
) -> Result<Box<dyn Problem>, CoreError> {
    match name {
        "convection-diffusion" => Ok(Box::new(ConvectionDiffusion::new(
            alpha.unwrap_or(1e-6),
            second_order,
        )?)),
        "heat-composite" => Ok(Box::new(HeatComposite::new()?)),
        "convection" => Ok(Box::new(Convection::new(u_convect.unwrap_or(40.0))?)),
        "stokes" => Ok(Box::new(Stokes::new(reynolds.unwrap_or(1.0))?)),
        "lid-cavity" => Ok(Box::new(LidCavity::new(reynolds.unwrap_or(100.0))?)),
        "helmholtz" => Ok(Box::new(Helmholtz::new(wavenumber.unwrap_or(1.0), second_order)?)),
        other => Err(CoreError::invalid(format!(
            "unknown problem '{other}' (see `list-problems`)"
        ))),
    }
}

pub fn problem_names() -> &'static [&'static str] {
    &[
        "convection-diffusion",
        "heat-composite",
        "convection",
        "stokes",
        "lid-cavity",
        "helmholtz",
    ]
}

/// Analytic-field stand-in for a network evaluation: constants built from the
/// exact solution and its derivatives, used by the residual-annihilation
/// oracle tests.
pub fn analytic_fields(
    g: &DiffGraph,
    problem: &dyn Problem,
    pts: &PointSet,
) -> FieldsEval {
    let nf = problem.output_dim();
    let dim = problem.input_dim();
    let n = pts.len();
    let mut value = vec![Vec::with_capacity(n); nf];
    let mut d1 = vec![vec![Vec::with_capacity(n); dim]; nf];
    let want_d2 = problem.deriv_need() == DerivNeed::Second;
    let mut d2 = vec![vec![Vec::with_capacity(n); dim]; nf];
    for p in pts.iter_points() {
        let v = problem.exact(p);
        let dv = problem.exact_d1(p);
        for k in 0..nf {
            value[k].push(v[k]);
            for a in 0..dim {
                d1[k][a].push(dv[k][a]);
            }
        }
        if want_d2 {
            let sv = problem.exact_d2(p);
            for k in 0..nf {
                for a in 0..dim {
                    d2[k][a].push(sv[k][a]);
                }
            }
        }
    }
    let col = |vals: &Vec<f64>| g.constant(Tensor::column(vals));
    FieldsEval {
        value: value.iter().map(col).collect(),
        d1: d1.iter().map(|per| per.iter().map(col).collect()).collect(),
        d2: if want_d2 {
            d2.iter().map(|per| per.iter().map(col).collect()).collect()
        } else {
            vec![Vec::new(); nf]
        },
    }
}

/// Cross-check a coded source/body-force closure against a finite-difference
/// application of the strong operator to the exact solution. Called by
/// problem constructors so a typo in the hand-derived sources cannot survive
/// construction.
pub(crate) fn check_source(
    name: &str,
    points: &[Vec<f64>],
    coded: impl Fn(&[f64]) -> f64,
    fd_strong: impl Fn(&[f64]) -> f64,
    tol: f64,
) -> Result<(), CoreError> {
    for p in points {
        let a = coded(p);
        let b = fd_strong(p);
        if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
            return Err(CoreError::invalid(format!(
                "{name}: source term disagrees with finite-difference strong form at {p:?}: {a} vs {b}"
            )));
        }
    }
    Ok(())
}
