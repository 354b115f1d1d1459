//! Physics-constrained neural-network PDE laboratory.
//!
//! Trains small tanh networks to satisfy PDE residual systems at fixed
//! collocation points under five formulations (supervised regression, plain
//! and weighted composite losses, augmented-Lagrangian equality constraints,
//! and a Lagrange-dual max-min with per-point adaptive multipliers), and
//! ships the two diagnostics used to study why the composite formulations
//! fail: loss-landscape slices and gradient-sensitivity perturbations.

pub mod autodiff;
pub mod diagnostics;
pub mod error;
pub mod metrics;
pub mod mlp;
pub mod objectives;
pub mod optim;
pub mod problems;
pub mod run;
pub mod sampling;
pub mod tensor;

pub use autodiff::{DiffGraph, NodeId, Op, OpKind};
pub use error::CoreError;
pub use metrics::{error_norms, evaluate_on_grid, ErrorReport};
pub use mlp::{
    init_xavier, make_filter_normalized_directions, DirectionPair, GraphModel, MlpConfig,
    ParameterVector,
};
pub use objectives::{
    evaluate_loss, loss_and_grad, run_epoch, AlmState, DualHyper, FormulationState,
    LossBreakdown, MultiplierState, TrainingPoints,
};
pub use optim::{AdamState, LbfgsState, OptimizerState};
pub use problems::{by_name, problem_names, Problem, Sampler};
pub use run::{load_run, load_snapshot_context, run_train, Session, TrainConfig};
pub use sampling::{boundary_points, sobol_points, uniform_grid, BoxDomain, PointSet, Role};
pub use tensor::Tensor;
