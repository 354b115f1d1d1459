//! Full-batch optimizers over flat parameter buffers.

mod adam;
mod lbfgs;

pub use adam::AdamState;
pub use lbfgs::{LbfgsState, WolfeCheck};

use crate::error::CoreError;

/// Objective callback: loss and flat gradient at a parameter vector.
pub type LossGrad<'a> = dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>), CoreError> + 'a;

/// What one outer optimizer step did.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    /// Loss at the final accepted point.
    pub loss: f64,
    /// Max-abs of the gradient at the final accepted point.
    pub grad_inf: f64,
    pub evals: usize,
    /// Line search fell back to a steepest-descent Armijo step.
    pub ls_fallback: bool,
    /// Degenerate-direction restarts (history cleared, steepest descent).
    pub restarts: usize,
    /// Strong-Wolfe checks for each accepted inner step.
    pub wolfe: Vec<WolfeCheck>,
}

pub enum OptimizerState {
    Adam(AdamState),
    Lbfgs(LbfgsState),
}

impl OptimizerState {
    /// One outer step (one epoch): a single Adam update, or one L-BFGS outer
    /// iteration of up to the configured number of inner iterations.
    pub fn step(
        &mut self,
        params: &mut Vec<f64>,
        f: &mut LossGrad,
    ) -> Result<StepReport, CoreError> {
        match self {
            OptimizerState::Adam(s) => s.step(params, f),
            OptimizerState::Lbfgs(s) => s.step(params, f),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerState::Adam(_) => "adam",
            OptimizerState::Lbfgs(_) => "lbfgs",
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
