//! Configuration-driven training runs and their on-disk records.
//!
//! A run directory is self-describing: the resolved config echo plus the
//! snapshot files are enough to reproduce or re-analyze it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::metrics::{default_eval_grid, evaluate_on_grid, ErrorReport};
use crate::mlp::{init_xavier, layout_for, MlpConfig, ParameterVector};
use crate::objectives::{
    run_epoch, supervised_targets, AlmState, DualHyper, FormulationState, MultiplierState,
    SupervisedTargets, TrainingPoints,
};
use crate::optim::{AdamState, LbfgsState, OptimizerState};
use crate::problems::{by_name, Problem, Sampler};

fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    pub alpha: Option<f64>,
    pub u_convect: Option<f64>,
    pub reynolds: Option<f64>,
    pub k: Option<f64>,
    #[serde(default)]
    pub second_order: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_layers: Option<usize>,
    pub hidden_width: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormulationConfig {
    /// supervised | pinn | weighted-pinn | pecann-alm | lagrange-dual
    pub kind: String,
    /// weighted-pinn domain weight.
    pub w_domain: f64,
    /// weighted-pinn boundary/initial weight.
    pub w_boundary: f64,
    /// dual-ascent decay.
    pub beta: f64,
    /// dual-ascent rate.
    pub eta: f64,
    pub eps_smooth: f64,
    /// ALM initial penalty.
    pub mu0: f64,
    /// ALM penalty safeguard.
    pub mu_max: f64,
}

impl Default for FormulationConfig {
    fn default() -> Self {
        Self {
            kind: "lagrange-dual".into(),
            w_domain: 1.0,
            w_boundary: 1.0,
            beta: 0.9,
            eta: 1e-2,
            eps_smooth: 1e-10,
            mu0: 1.0,
            mu_max: 1e4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// adam | lbfgs
    pub kind: String,
    /// Default 1.0 for lbfgs, 1e-2 for adam.
    pub lr: Option<f64>,
    /// L-BFGS inner iterations per epoch.
    pub max_iter: usize,
    /// L-BFGS history size.
    pub history: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: "lbfgs".into(), lr: None, max_iter: 20, history: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PointsConfig {
    pub interior: Option<usize>,
    pub boundary_per_face: Option<usize>,
    pub initial: Option<usize>,
    /// uniform | sobol
    pub sampler: Option<String>,
    pub sobol_skip: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Evaluation grid points per axis (problem default when absent).
    pub grid: Option<usize>,
    /// Error-norm cadence in epochs.
    pub every: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { grid: None, every: 50 }
    }
}

/// Optional convergence stop: end the run once the named field's relative L2
/// error drops to the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub target_rel_l2: f64,
    pub field: Option<String>,
    #[serde(default = "StopConfig::default_every")]
    pub check_every: usize,
}

impl StopConfig {
    fn default_every() -> usize {
        50
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub formulation: FormulationConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub points: PointsConfig,
    pub epochs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub eval: EvalConfig,
    pub stop: Option<StopConfig>,
    /// Emit per-epoch progress on stderr.
    #[serde(default = "d_true")]
    pub quiet: bool,
}

struct ProblemDefaults {
    layers: usize,
    width: usize,
    interior: usize,
    boundary: usize,
    initial: usize,
    epochs: usize,
    sampler: &'static str,
}

fn defaults_for(name: &str) -> ProblemDefaults {
    match name {
        "heat-composite" => ProblemDefaults {
            layers: 4,
            width: 20,
            interior: 2048,
            boundary: 512,
            initial: 512,
            epochs: 10_000,
            sampler: "uniform",
        },
        "convection" => ProblemDefaults {
            layers: 4,
            width: 50,
            interior: 2048,
            boundary: 512,
            initial: 512,
            epochs: 10_000,
            sampler: "uniform",
        },
        "stokes" => ProblemDefaults {
            layers: 4,
            width: 50,
            interior: 2048,
            boundary: 512,
            initial: 0,
            epochs: 10_000,
            sampler: "uniform",
        },
        "lid-cavity" => ProblemDefaults {
            layers: 6,
            width: 20,
            interior: 2500,
            boundary: 128,
            initial: 0,
            epochs: 20_000,
            sampler: "uniform",
        },
        "helmholtz" => ProblemDefaults {
            layers: 3,
            width: 30,
            interior: 500,
            boundary: 64,
            initial: 0,
            epochs: 5_000,
            sampler: "sobol",
        },
        // convection-diffusion and anything else
        _ => ProblemDefaults {
            layers: 4,
            width: 20,
            interior: 2048,
            boundary: 1,
            initial: 0,
            epochs: 5_000,
            sampler: "uniform",
        },
    }
}

impl TrainConfig {
    /// The recommended (benchmark) configuration for a problem.
    pub fn recommended(problem: &str) -> Self {
        let mut c = Self {
            problem: ProblemConfig { name: problem.to_string(), ..Default::default() },
            model: ModelConfig::default(),
            formulation: FormulationConfig::default(),
            optimizer: OptimizerConfig::default(),
            points: PointsConfig::default(),
            epochs: None,
            seed: 0,
            output_dir: None,
            eval: EvalConfig::default(),
            stop: None,
            quiet: true,
        };
        c.resolve();
        c
    }

    /// Fill every absent field with its problem-specific default, in place.
    pub fn resolve(&mut self) {
        let d = defaults_for(&self.problem.name);
        let m = &mut self.model;
        m.hidden_layers.get_or_insert(d.layers);
        m.hidden_width.get_or_insert(d.width);
        let p = &mut self.points;
        p.interior.get_or_insert(d.interior);
        p.boundary_per_face.get_or_insert(d.boundary);
        p.initial.get_or_insert(d.initial);
        p.sampler.get_or_insert_with(|| d.sampler.to_string());
        p.sobol_skip.get_or_insert(1);
        self.epochs.get_or_insert(d.epochs);
        let lr = match self.optimizer.kind.as_str() {
            "adam" => 1e-2,
            _ => 1.0,
        };
        self.optimizer.lr.get_or_insert(lr);
    }

    pub fn from_toml(text: &str) -> Result<Self, CoreError> {
        let mut c: TrainConfig =
            toml::from_str(text).map_err(|e| CoreError::invalid(format!("config: {e}")))?;
        c.resolve();
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        match self.formulation.kind.as_str() {
            "supervised" | "pinn" | "weighted-pinn" | "pecann-alm" | "lagrange-dual" => {}
            other => {
                return Err(CoreError::invalid(format!("unknown formulation '{other}'")));
            }
        }
        match self.optimizer.kind.as_str() {
            "adam" | "lbfgs" => {}
            other => return Err(CoreError::invalid(format!("unknown optimizer '{other}'"))),
        }
        match self.points.sampler.as_deref() {
            None | Some("uniform") | Some("sobol") => {}
            Some(other) => return Err(CoreError::invalid(format!("unknown sampler '{other}'"))),
        }
        if self.formulation.kind == "weighted-pinn"
            && (self.formulation.w_domain <= 0.0 || self.formulation.w_boundary <= 0.0)
        {
            return Err(CoreError::invalid("weighted-pinn weights must be positive"));
        }
        Ok(())
    }
}

/// A fully constructed training run.
pub struct Session {
    pub config: TrainConfig,
    pub problem: Box<dyn Problem>,
    pub net: MlpConfig,
    pub points: TrainingPoints,
    pub targets: Option<SupervisedTargets>,
    pub params: ParameterVector,
    pub form: FormulationState,
    pub opt: OptimizerState,
    pub epoch: usize,
}

impl Session {
    pub fn new(mut config: TrainConfig) -> Result<Self, CoreError> {
        config.resolve();
        config.validate()?;
        let pc = &config.problem;
        let problem = by_name(&pc.name, pc.alpha, pc.u_convect, pc.reynolds, pc.k, pc.second_order)?;
        let net = MlpConfig::new(
            problem.input_dim(),
            problem.output_dim(),
            config.model.hidden_layers.unwrap(),
            config.model.hidden_width.unwrap(),
            config.seed,
        )?;
        let sampler = match config.points.sampler.as_deref() {
            Some("sobol") => Sampler::Sobol { skip: config.points.sobol_skip.unwrap_or(1) },
            _ => Sampler::Uniform,
        };
        let interior = problem.sample_interior(config.points.interior.unwrap(), sampler)?;
        let boundary = problem.sample_boundary(config.points.boundary_per_face.unwrap())?;
        let initial = match config.points.initial.unwrap() {
            0 => None,
            n => problem.sample_initial(n)?,
        };
        let points = TrainingPoints { interior, boundary, initial };

        let form = match config.formulation.kind.as_str() {
            "supervised" => FormulationState::Supervised,
            "pinn" => FormulationState::Pinn { w_domain: 1.0, w_boundary: 1.0 },
            "weighted-pinn" => FormulationState::Pinn {
                w_domain: config.formulation.w_domain,
                w_boundary: config.formulation.w_boundary,
            },
            "pecann-alm" => FormulationState::PecannAlm(AlmState::new(
                points.boundary.len(),
                points.initial.as_ref().map_or(0, |p| p.len()),
                config.formulation.mu0,
                config.formulation.mu_max,
            )),
            _ => FormulationState::LagrangeDual(MultiplierState::for_problem(
                problem.as_ref(),
                &points,
                DualHyper {
                    beta: config.formulation.beta,
                    eta: config.formulation.eta,
                    eps_smooth: config.formulation.eps_smooth,
                },
            )),
        };
        let targets = match form {
            FormulationState::Supervised => Some(supervised_targets(problem.as_ref(), &points)?),
            _ => None,
        };

        let params = init_xavier(&net);
        let opt = match config.optimizer.kind.as_str() {
            "adam" => OptimizerState::Adam(AdamState::new(
                params.len(),
                config.optimizer.lr.unwrap(),
            )),
            _ => {
                let mut s = LbfgsState::new(config.optimizer.max_iter, config.optimizer.history);
                s.lr = config.optimizer.lr.unwrap();
                OptimizerState::Lbfgs(s)
            }
        };
        Ok(Self { config, problem, net, points, targets, params, form, opt, epoch: 0 })
    }

    pub fn epoch_once(&mut self) -> Result<crate::objectives::EpochOutcome, CoreError> {
        self.epoch += 1;
        run_epoch(
            &self.net,
            self.problem.as_ref(),
            &self.points,
            self.targets.as_ref(),
            &mut self.params,
            &mut self.form,
            &mut self.opt,
        )
    }

    pub fn eval_grid_n(&self) -> usize {
        self.config.eval.grid.unwrap_or_else(|| default_eval_grid(self.problem.as_ref()))
    }

    /// Per-field error reports on the evaluation grid (exact problems only).
    pub fn error_reports(&self) -> Result<Vec<(String, ErrorReport)>, CoreError> {
        evaluate_on_grid(&self.net, &self.params, self.problem.as_ref(), self.eval_grid_n())
    }
}

/// One row of history.csv.
#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub epoch: usize,
    pub total: f64,
    pub j_d: f64,
    pub j_f: f64,
    pub j_c: f64,
    pub j_b: f64,
    pub j_i: f64,
    pub max_lambda: [f64; 4],
    pub mu: f64,
    /// (field, relative L2) on evaluation epochs.
    pub errors: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Serialize)]
pub struct RunMetrics {
    pub problem: String,
    pub formulation: String,
    pub optimizer: String,
    pub seed: u64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub final_loss: f64,
    pub error_norms: BTreeMap<String, ErrorReport>,
    pub wall_time_s: f64,
}

pub struct RunSummary {
    pub metrics: RunMetrics,
    pub out_dir: PathBuf,
}

/// Serialized dual state alongside the parameter snapshot, so diagnostics can
/// freeze the trained multipliers.
#[derive(Debug, Serialize, Deserialize)]
pub enum DualSnapshot {
    None,
    Alm(AlmState),
    Dual(MultiplierState),
}

pub fn dual_snapshot(form: &FormulationState) -> DualSnapshot {
    match form {
        FormulationState::PecannAlm(s) => DualSnapshot::Alm(s.clone()),
        FormulationState::LagrangeDual(s) => DualSnapshot::Dual(s.clone()),
        _ => DualSnapshot::None,
    }
}

/// Rebuild a formulation state from config + snapshot (for diagnostics).
pub fn form_from_snapshot(config: &TrainConfig, snap: DualSnapshot) -> FormulationState {
    match snap {
        DualSnapshot::Alm(s) => FormulationState::PecannAlm(s),
        DualSnapshot::Dual(s) => FormulationState::LagrangeDual(s),
        DualSnapshot::None => match config.formulation.kind.as_str() {
            "supervised" => FormulationState::Supervised,
            "weighted-pinn" => FormulationState::Pinn {
                w_domain: config.formulation.w_domain,
                w_boundary: config.formulation.w_boundary,
            },
            _ => FormulationState::Pinn { w_domain: 1.0, w_boundary: 1.0 },
        },
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.10e}")).unwrap_or_default()
}

fn history_csv(rows: &[HistoryRow], fields: &[&str]) -> String {
    let mut out = String::from("epoch,total,j_d,j_f,j_c,j_b,j_i,max_lambda_f,max_lambda_c,max_lambda_b,max_lambda_i,mu");
    for f in fields {
        out.push_str(&format!(",er_{f}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.6e},{:.6e},{:.6e},{:.6e},{:.3e}",
            r.epoch,
            r.total,
            r.j_d,
            r.j_f,
            r.j_c,
            r.j_b,
            r.j_i,
            r.max_lambda[0],
            r.max_lambda[1],
            r.max_lambda[2],
            r.max_lambda[3],
            r.mu
        ));
        for f in fields {
            let v = r
                .errors
                .as_ref()
                .and_then(|es| es.iter().find(|(name, _)| name == f).map(|(_, v)| *v));
            out.push(',');
            out.push_str(&fmt_opt(v));
        }
        out.push('\n');
    }
    out
}

fn mu_of(form: &FormulationState) -> f64 {
    match form {
        FormulationState::PecannAlm(s) => s.mu,
        _ => 0.0,
    }
}

/// Train per the config and write the full run record into `out_dir`.
pub fn run_train(config: TrainConfig, out_dir: &Path) -> Result<RunSummary, CoreError> {
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut session = Session::new(config)?;
    session.config.output_dir = Some(out_dir.to_path_buf());
    fs::write(out_dir.join("config.toml"), session.config.to_toml())?;

    let epochs = session.config.epochs.unwrap();
    let eval_every = session.config.eval.every.max(1);
    let has_exact = session.problem.has_exact();
    let stop = session.config.stop.clone();
    let quiet = session.config.quiet;

    let mut rows: Vec<HistoryRow> = Vec::with_capacity(epochs);
    let mut stopped_early = false;

    for epoch in 1..=epochs {
        let outcome = match session.epoch_once() {
            Ok(o) => o,
            Err(e) => {
                let dump = serde_json::json!({
                    "epoch": epoch,
                    "error": e.to_string(),
                    "last_rows": rows.iter().rev().take(5).map(|r| r.total).collect::<Vec<_>>(),
                });
                fs::write(out_dir.join("abort.json"), serde_json::to_string_pretty(&dump)?)?;
                return Err(e);
            }
        };
        let b = &outcome.breakdown;
        let want_eval = has_exact
            && (epoch % eval_every == 0
                || epoch == epochs
                || stop.as_ref().is_some_and(|s| epoch % s.check_every.max(1) == 0));
        let errors = if want_eval {
            let reports = session.error_reports()?;
            Some(
                reports
                    .into_iter()
                    .map(|(name, r)| (name, r.relative_l2.unwrap_or(f64::NAN)))
                    .collect::<Vec<_>>(),
            )
        } else {
            None
        };
        if !quiet && (epoch % eval_every == 0 || epoch == 1) {
            eprintln!(
                "epoch {epoch}: total={:.4e} evals={} ginf={:.2e} fb={} {}",
                b.total,
                outcome.step.evals,
                outcome.step.grad_inf,
                outcome.step.ls_fallback as u8,
                errors
                    .as_ref()
                    .map(|es| es
                        .iter()
                        .map(|(n, v)| format!("er_{n}={v:.3e}"))
                        .collect::<Vec<_>>()
                        .join(" "))
                    .unwrap_or_default()
            );
        }
        rows.push(HistoryRow {
            epoch,
            total: b.total,
            j_d: b.j_d,
            j_f: b.j_f,
            j_c: b.j_c,
            j_b: b.j_b,
            j_i: b.j_i,
            max_lambda: session.form.max_lambda(),
            mu: mu_of(&session.form),
            errors: errors.clone(),
        });
        if let (Some(stop), Some(errors)) = (stop.as_ref(), errors.as_ref()) {
            let field = stop
                .field
                .clone()
                .unwrap_or_else(|| session.problem.unknown_names()[0].to_string());
            if let Some((_, er)) = errors.iter().find(|(n, _)| *n == field) {
                if er.is_finite() && *er <= stop.target_rel_l2 {
                    stopped_early = true;
                }
            }
        }
        if stopped_early {
            break;
        }
    }

    write_artifacts(&session, out_dir, &rows)?;

    let mut error_map = BTreeMap::new();
    if has_exact {
        for (name, r) in session.error_reports()? {
            error_map.insert(name, r);
        }
    }
    let metrics = RunMetrics {
        problem: session.problem.name().to_string(),
        formulation: session.form.name().to_string(),
        optimizer: session.opt.name().to_string(),
        seed: session.config.seed,
        epochs_run: session.epoch,
        stopped_early,
        final_loss: rows.last().map(|r| r.total).unwrap_or(f64::NAN),
        error_norms: error_map,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    fs::write(out_dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    Ok(RunSummary { metrics, out_dir: out_dir.to_path_buf() })
}

fn write_artifacts(session: &Session, out_dir: &Path, rows: &[HistoryRow]) -> Result<(), CoreError> {
    // flat parameter snapshot + layout manifest
    let mut bytes = Vec::with_capacity(session.params.len() * 8);
    for v in session.params.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(out_dir.join("params.f64"), bytes)?;
    fs::write(
        out_dir.join("params.layout.json"),
        serde_json::to_string_pretty(session.params.layout())?,
    )?;
    fs::write(
        out_dir.join("multipliers.json"),
        serde_json::to_string_pretty(&dual_snapshot(&session.form))?,
    )?;

    let fields = session.problem.unknown_names();
    fs::write(out_dir.join("history.csv"), history_csv(rows, &fields))?;
    fs::write(out_dir.join("fields.csv"), fields_csv(session)?)?;
    Ok(())
}

/// Dense dump of predictions (and exact values when available) on the
/// evaluation grid.
pub fn fields_csv(session: &Session) -> Result<String, CoreError> {
    let problem = session.problem.as_ref();
    let (coords, preds) = crate::metrics::predict_on_grid(
        &session.net,
        &session.params,
        problem,
        session.eval_grid_n(),
    )?;
    let names = problem.unknown_names();
    let dim = problem.input_dim();
    let axis_names: Vec<&str> = match (dim, problem.time_axis()) {
        (1, _) => vec!["x"],
        (2, Some(_)) => vec!["x", "t"],
        _ => vec!["x", "y"],
    };
    let mut out = String::new();
    out.push_str(&axis_names.join(","));
    for n in &names {
        out.push_str(&format!(",{n}_pred"));
    }
    if problem.has_exact() {
        for n in &names {
            out.push_str(&format!(",{n}_exact"));
        }
    }
    out.push('\n');
    let n = coords.shape()[0];
    for i in 0..n {
        let p = &coords.data()[i * dim..(i + 1) * dim];
        out.push_str(
            &p.iter().map(|v| format!("{v:.10e}")).collect::<Vec<_>>().join(","),
        );
        for f in &preds {
            out.push_str(&format!(",{:.10e}", f[i]));
        }
        if problem.has_exact() {
            let ex = problem.exact(p);
            for v in ex {
                out.push_str(&format!(",{v:.10e}"));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Load a run directory's config, parameter snapshot, and dual state.
pub fn load_run(dir: &Path) -> Result<(TrainConfig, ParameterVector, DualSnapshot), CoreError> {
    let config = TrainConfig::from_toml(&fs::read_to_string(dir.join("config.toml"))?)?;
    let bytes = fs::read(dir.join("params.f64"))?;
    if bytes.len() % 8 != 0 {
        return Err(CoreError::invalid("params.f64 is not a flat f64 array"));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let layout: Vec<crate::mlp::LayoutEntry> =
        serde_json::from_str(&fs::read_to_string(dir.join("params.layout.json"))?)?;
    let params = ParameterVector::from_flat(values, layout)?;

    // architecture must match the config echo
    let pc = &config.problem;
    let problem = by_name(&pc.name, pc.alpha, pc.u_convect, pc.reynolds, pc.k, pc.second_order)?;
    let net = MlpConfig::new(
        problem.input_dim(),
        problem.output_dim(),
        config.model.hidden_layers.unwrap(),
        config.model.hidden_width.unwrap(),
        config.seed,
    )?;
    if params.layout() != layout_for(&net).as_slice() {
        return Err(CoreError::invalid(
            "snapshot layout does not match the architecture in config.toml",
        ));
    }
    let dual: DualSnapshot = match fs::read_to_string(dir.join("multipliers.json")) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => DualSnapshot::None,
    };
    Ok((config, params, dual))
}

/// Rebuild the full session context (problem, points, formulation) that a
/// snapshot was trained under, for diagnostics and evaluation.
pub struct SnapshotContext {
    pub config: TrainConfig,
    pub problem: Box<dyn Problem>,
    pub net: MlpConfig,
    pub points: TrainingPoints,
    pub targets: Option<SupervisedTargets>,
    pub params: ParameterVector,
    pub form: FormulationState,
}

pub fn load_snapshot_context(dir: &Path) -> Result<SnapshotContext, CoreError> {
    let (config, params, dual) = load_run(dir)?;
    let session = Session::new(config.clone())?;
    let form = form_from_snapshot(&config, dual);
    let targets = match form {
        FormulationState::Supervised => {
            Some(supervised_targets(session.problem.as_ref(), &session.points)?)
        }
        _ => None,
    };
    Ok(SnapshotContext {
        config,
        problem: session.problem,
        net: session.net,
        points: session.points,
        targets,
        params,
        form,
    })
}
