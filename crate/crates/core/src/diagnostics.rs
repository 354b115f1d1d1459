//! Failure-mode instruments: loss-landscape slices over two filter-normalized
//! directions, and the gradient-sensitivity probe that compares
//! backpropagated gradients before and after a small parameter perturbation.

use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::DiffGraph;
use crate::error::CoreError;
use crate::mlp::{DirectionPair, GraphModel, MlpConfig, ParameterVector};
use crate::objectives::{evaluate_loss, loss_and_grad, FormulationState, SupervisedTargets, TrainingPoints};
use crate::problems::{DerivNeed, Evaluator, Problem};
use crate::sampling::axis_points;
use crate::tensor::Tensor;

/// A 2-D slice of the loss over (eps1, eps2) steps along two directions.
/// Values are stored raw, row-major with eps1 as the slow index; log-scaling
/// is a presentation concern.
#[derive(Debug, Clone)]
pub struct LandscapeSlice {
    pub resolution: usize,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub values: Vec<f64>,
    pub direction_seed: u64,
    pub formulation: String,
}

impl LandscapeSlice {
    pub fn value_at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.resolution + i2]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps1,eps2,loss\n");
        for (i1, e1) in self.eps1.iter().enumerate() {
            for (i2, e2) in self.eps2.iter().enumerate() {
                out.push_str(&format!("{e1:.17e},{e2:.17e},{:.17e}\n", self.value_at(i1, i2)));
            }
        }
        out
    }
}

/// Evaluate the training loss on the perturbation grid
/// theta* + eps1 zeta + eps2 gamma with multipliers/weights frozen.
/// Non-finite vertices are recorded as +inf rather than aborting.
#[allow(clippy::too_many_arguments)]
pub fn landscape_slice(
    config: &MlpConfig,
    theta_star: &ParameterVector,
    dirs: &DirectionPair,
    problem: &dyn Problem,
    points: &TrainingPoints,
    form: &FormulationState,
    targets: Option<&SupervisedTargets>,
    resolution: usize,
    range1: (f64, f64),
    range2: (f64, f64),
    direction_seed: u64,
) -> Result<LandscapeSlice, CoreError> {
    if resolution < 2 {
        return Err(CoreError::invalid("landscape resolution must be >= 2"));
    }
    let eps1 = axis_points(range1.0, range1.1, resolution, crate::sampling::AxisMode::Closed);
    let eps2 = axis_points(range2.0, range2.1, resolution, crate::sampling::AxisMode::Closed);
    let vertices: Vec<(usize, usize)> = (0..resolution)
        .flat_map(|i1| (0..resolution).map(move |i2| (i1, i2)))
        .collect();
    let values: Vec<f64> = vertices
        .par_iter()
        .map(|(i1, i2)| {
            let theta = theta_star.perturbed(dirs, eps1[*i1], eps2[*i2]);
            match evaluate_loss(config, &theta, problem, points, form, targets) {
                Ok(b) if b.total.is_finite() => b.total,
                _ => f64::INFINITY,
            }
        })
        .collect();
    Ok(LandscapeSlice {
        resolution,
        eps1,
        eps2,
        values,
        direction_seed,
        formulation: form.name().to_string(),
    })
}

/// Shared-edge histogram pair (before/after) with 50 uniform bins over the
/// union of both value ranges.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramPair {
    pub edges: Vec<f64>,
    pub before: Vec<u64>,
    pub after: Vec<u64>,
}

pub fn histogram_pair(before: &[f64], after: &[f64], bins: usize) -> HistogramPair {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in before.iter().chain(after) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !(lo.is_finite() && hi.is_finite()) || lo == hi {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let count = |vals: &[f64]| {
        let mut c = vec![0u64; bins];
        for v in vals {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            c[idx] += 1;
        }
        c
    };
    HistogramPair { edges, before: count(before), after: count(after) }
}

/// Prediction and first-derivative curves of the first output field along
/// axis 0 (other axes held at the domain midpoint), before and after the
/// perturbation.
#[derive(Debug, Clone)]
pub struct SensitivityCurves {
    pub x: Vec<f64>,
    pub u_before: Vec<f64>,
    pub u_after: Vec<f64>,
    pub dudx_before: Vec<f64>,
    pub dudx_after: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    pub eps: f64,
    pub direction_seed: u64,
    pub grad_norm_before: f64,
    pub grad_norm_after: f64,
    /// ||grad L(theta~)|| / ||grad L(theta*)||; infinite and flagged when the
    /// baseline gradient vanishes.
    pub ratio: f64,
    pub ratio_undefined: bool,
    pub parameter_histogram: HistogramPair,
    pub gradient_histogram: HistogramPair,
    #[serde(skip)]
    pub curves: SensitivityCurves,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compare backpropagated gradients at theta* and at the perturbed state
/// theta* + eps (zeta + gamma).
#[allow(clippy::too_many_arguments)]
pub fn gradient_sensitivity(
    config: &MlpConfig,
    theta_star: &ParameterVector,
    dirs: &DirectionPair,
    problem: &dyn Problem,
    points: &TrainingPoints,
    form: &FormulationState,
    targets: Option<&SupervisedTargets>,
    eps: f64,
    direction_seed: u64,
    curve_n: usize,
) -> Result<SensitivityReport, CoreError> {
    let theta_tilde = theta_star.perturbed(dirs, eps, eps);
    let (_, g_before, _) = loss_and_grad(config, theta_star, problem, points, form, targets)?;
    let (_, g_after, _) = loss_and_grad(config, &theta_tilde, problem, points, form, targets)?;
    let norm_before = l2(&g_before);
    let norm_after = l2(&g_after);
    let ratio_undefined = norm_before == 0.0;
    let ratio = if ratio_undefined { f64::INFINITY } else { norm_after / norm_before };

    let parameter_histogram = histogram_pair(theta_star.values(), theta_tilde.values(), 50);
    let gradient_histogram = histogram_pair(&g_before, &g_after, 50);
    let curves = prediction_curves(config, theta_star, &theta_tilde, problem, curve_n)?;

    Ok(SensitivityReport {
        eps,
        direction_seed,
        grad_norm_before: norm_before,
        grad_norm_after: norm_after,
        ratio,
        ratio_undefined,
        parameter_histogram,
        gradient_histogram,
        curves,
    })
}

fn prediction_curves(
    config: &MlpConfig,
    before: &ParameterVector,
    after: &ParameterVector,
    problem: &dyn Problem,
    n: usize,
) -> Result<SensitivityCurves, CoreError> {
    let domain = problem.domain();
    let xs = axis_points(domain.lo[0], domain.hi[0], n, crate::sampling::AxisMode::Closed);
    let dim = domain.dim();
    let mut data = Vec::with_capacity(n * dim);
    for x in &xs {
        data.push(*x);
        for k in 1..dim {
            data.push(0.5 * (domain.lo[k] + domain.hi[k]));
        }
    }
    let coords = Tensor::new(vec![n, dim], data)?;
    let sample = |params: &ParameterVector| -> Result<(Vec<f64>, Vec<f64>), CoreError> {
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, config, params)?;
        let ev = Evaluator::new(&g, &model);
        let fe = ev.eval_coords(&coords, DerivNeed::First)?;
        let u = g.with_value(fe.value[0], |t| t.data().to_vec());
        let du = g.with_value(fe.d1[0][0], |t| t.data().to_vec());
        Ok((u, du))
    };
    let (u_before, dudx_before) = sample(before)?;
    let (u_after, dudx_after) = sample(after)?;
    Ok(SensitivityCurves { x: xs, u_before, u_after, dudx_before, dudx_after })
}

pub fn curves_csv(c: &SensitivityCurves) -> String {
    let mut out = String::from("x,u_before,u_after,dudx_before,dudx_after\n");
    for i in 0..c.x.len() {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            c.x[i], c.u_before[i], c.u_after[i], c.dudx_before[i], c.dudx_after[i]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_mass_is_conserved() {
        let before = vec![0.0, 0.5, 1.0, 2.0, -1.0];
        let after = vec![0.1, 0.2, 5.0];
        let h = histogram_pair(&before, &after, 50);
        assert_eq!(h.before.iter().sum::<u64>(), before.len() as u64);
        assert_eq!(h.after.iter().sum::<u64>(), after.len() as u64);
        assert_eq!(h.edges.len(), 51);
        assert_eq!(h.edges[0], -1.0);
        assert_eq!(*h.edges.last().unwrap(), 5.0);
    }
}
