//! Error norms against exact solutions or ingested benchmark data.

use serde::Serialize;

use crate::autodiff::DiffGraph;
use crate::error::CoreError;
use crate::mlp::{GraphModel, MlpConfig, ParameterVector};
use crate::problems::{Evaluator, Problem};
use crate::sampling::{uniform_grid, BoxDomain};
use crate::tensor::Tensor;

/// Norms of a prediction against a reference vector.
///
/// `paper_msq` is the mean of squared differences (the formula some tables
/// print under the label MAE); `mean_abs` is the conventional mean absolute
/// error. Both are logged.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    /// ||pred - exact||_2 / ||exact||_2, None when the reference norm is 0.
    pub relative_l2: Option<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub paper_msq: f64,
}

pub fn error_norms(pred: &[f64], exact: &[f64]) -> Result<ErrorReport, CoreError> {
    if pred.len() != exact.len() || pred.is_empty() {
        return Err(CoreError::ShapeMismatch {
            op: "error_norms",
            lhs: vec![pred.len()],
            rhs: vec![exact.len()],
        });
    }
    let n = pred.len() as f64;
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0;
    for (p, e) in pred.iter().zip(exact) {
        let d = p - e;
        diff_sq += d * d;
        ref_sq += e * e;
        max_abs = max_abs.max(d.abs());
        sum_abs += d.abs();
    }
    let relative_l2 = if ref_sq == 0.0 { None } else { Some((diff_sq / ref_sq).sqrt()) };
    Ok(ErrorReport { relative_l2, max_abs, mean_abs: sum_abs / n, paper_msq: diff_sq / n })
}

/// Dense uniform evaluation grid for a problem: 201 per axis for one- and
/// two-dimensional spatial domains, 101 per axis for space-time domains.
pub fn default_eval_grid(problem: &dyn Problem) -> usize {
    if problem.time_axis().is_some() {
        101
    } else {
        201
    }
}

/// Evaluate the network on the closed tensor grid and return per-unknown
/// error reports against the exact solution.
pub fn evaluate_on_grid(
    config: &MlpConfig,
    params: &ParameterVector,
    problem: &dyn Problem,
    per_axis: usize,
) -> Result<Vec<(String, ErrorReport)>, CoreError> {
    if !problem.has_exact() {
        return Err(CoreError::invalid(format!(
            "problem '{}' has no exact solution; compare against benchmark data instead",
            problem.name()
        )));
    }
    let (coords, preds) = predict_on_grid(config, params, problem, per_axis)?;
    let names = problem.unknown_names();
    let mut out = Vec::with_capacity(names.len());
    let n = coords.shape()[0];
    let dim = problem.input_dim();
    for (k, name) in names.iter().enumerate() {
        let exact: Vec<f64> = (0..n)
            .map(|i| problem.exact(&coords.data()[i * dim..(i + 1) * dim])[k])
            .collect();
        out.push((name.to_string(), error_norms(&preds[k], &exact)?));
    }
    Ok(out)
}

/// Grid coordinates and per-field predictions on the closed tensor grid.
pub fn predict_on_grid(
    config: &MlpConfig,
    params: &ParameterVector,
    problem: &dyn Problem,
    per_axis: usize,
) -> Result<(Tensor, Vec<Vec<f64>>), CoreError> {
    let domain = problem.domain();
    let grid = uniform_grid(&domain, per_axis, domain.dim())?;
    let preds = predict_at(config, params, &grid.coords)?;
    Ok((grid.coords, preds))
}

/// Per-field network values at arbitrary coordinates.
pub fn predict_at(
    config: &MlpConfig,
    params: &ParameterVector,
    coords: &Tensor,
) -> Result<Vec<Vec<f64>>, CoreError> {
    let g = DiffGraph::new();
    let model = GraphModel::new(&g, config, params)?;
    let ev = Evaluator::new(&g, &model);
    let fields = ev.values_at(coords)?;
    Ok(fields.iter().map(|f| g.with_value(*f, |t| t.data().to_vec())).collect())
}

/// Published cavity centerline stations: u on the vertical centerline
/// x = 1/2 (stations in y) and v on the horizontal centerline y = 1/2
/// (stations in x).
#[derive(Debug, Clone, Default)]
pub struct CenterlineData {
    pub vertical: Vec<(f64, f64)>,
    pub horizontal: Vec<(f64, f64)>,
}

/// Parse a centerline CSV with a header naming any of the column pairs
/// (y, u) and (x, v); blank cells are skipped.
pub fn parse_centerline_csv(text: &str) -> Result<CenterlineData, CoreError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CoreError::invalid("empty centerline CSV"))?;
    let cols: Vec<String> =
        header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let find = |name: &str| cols.iter().position(|c| c == name);
    let (iy, iu, ix, iv) = (find("y"), find("u"), find("x"), find("v"));
    if iy.is_some() != iu.is_some() || ix.is_some() != iv.is_some() {
        return Err(CoreError::invalid("centerline CSV needs paired columns y,u and/or x,v"));
    }
    let mut data = CenterlineData::default();
    for line in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: Option<usize>| -> Option<f64> {
            i.and_then(|i| cells.get(i)).and_then(|c| c.parse::<f64>().ok())
        };
        if let (Some(y), Some(u)) = (get(iy), get(iu)) {
            data.vertical.push((y, u));
        }
        if let (Some(x), Some(v)) = (get(ix), get(iv)) {
            data.horizontal.push((x, v));
        }
    }
    Ok(data)
}

/// Max deviation of predicted centerline velocities from benchmark stations.
/// The prediction is sampled on a dense centerline grid and linearly
/// interpolated to the stations.
pub fn centerline_deviation(
    config: &MlpConfig,
    params: &ParameterVector,
    domain: &BoxDomain,
    data: &CenterlineData,
    grid_n: usize,
) -> Result<(f64, f64), CoreError> {
    let mid_x = 0.5 * (domain.lo[0] + domain.hi[0]);
    let mid_y = 0.5 * (domain.lo[1] + domain.hi[1]);

    let line = |fixed_axis: usize, fixed: f64| -> Tensor {
        let (lo, hi) = if fixed_axis == 0 {
            (domain.lo[1], domain.hi[1])
        } else {
            (domain.lo[0], domain.hi[0])
        };
        let mut dat = Vec::with_capacity(2 * grid_n);
        for i in 0..grid_n {
            let s = lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
            if fixed_axis == 0 {
                dat.push(fixed);
                dat.push(s);
            } else {
                dat.push(s);
                dat.push(fixed);
            }
        }
        Tensor::new(vec![grid_n, 2], dat).expect("sized")
    };

    let interp = |xs: &[f64], ys: &[f64], x: f64| -> f64 {
        let i = xs.partition_point(|v| *v < x).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        ys[i - 1] * (1.0 - w) + ys[i] * w
    };

    // u along the vertical centerline
    let vert = line(0, mid_x);
    let preds = predict_at(config, params, &vert)?;
    let stations: Vec<f64> = (0..grid_n).map(|i| vert.data()[i * 2 + 1]).collect();
    let mut dev_u = 0.0f64;
    for (y, u_ref) in &data.vertical {
        dev_u = dev_u.max((interp(&stations, &preds[0], *y) - u_ref).abs());
    }
    // v along the horizontal centerline
    let horiz = line(1, mid_y);
    let preds = predict_at(config, params, &horiz)?;
    let stations: Vec<f64> = (0..grid_n).map(|i| horiz.data()[i * 2]).collect();
    let mut dev_v = 0.0f64;
    for (x, v_ref) in &data.horizontal {
        dev_v = dev_v.max((interp(&stations, &preds[1], *x) - v_ref).abs());
    }
    Ok((dev_u, dev_v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_are_zero_error() {
        let r = error_norms(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(r.relative_l2, Some(0.0));
        assert_eq!(r.max_abs, 0.0);
        assert_eq!(r.mean_abs, 0.0);
        assert_eq!(r.paper_msq, 0.0);
    }

    #[test]
    fn doubling_gives_unit_relative_error() {
        let u = [3.0, -4.0, 1.0];
        let pred: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let r = error_norms(&pred, &u).unwrap();
        assert!((r.relative_l2.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_example() {
        // pred - exact = [0.3, -0.4], exact = [3, 4]
        let r = error_norms(&[3.3, 3.6], &[3.0, 4.0]).unwrap();
        assert!((r.relative_l2.unwrap() - 0.1).abs() < 1e-15);
        assert!((r.max_abs - 0.4).abs() < 1e-15);
        assert!((r.paper_msq - 0.125).abs() < 1e-15);
        assert!((r.mean_abs - 0.35).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_flags_relative_error() {
        let r = error_norms(&[0.1, 0.2], &[0.0, 0.0]).unwrap();
        assert!(r.relative_l2.is_none());
        assert!((r.max_abs - 0.2).abs() < 1e-15);
    }

    #[test]
    fn scale_invariance_of_relative_error() {
        let u = [0.5, -1.5, 2.0];
        let pred = [0.6, -1.4, 2.2];
        let a = error_norms(&pred, &u).unwrap().relative_l2.unwrap();
        let su: Vec<f64> = u.iter().map(|v| -7.0 * v).collect();
        let sp: Vec<f64> = pred.iter().map(|v| -7.0 * v).collect();
        let b = error_norms(&sp, &su).unwrap().relative_l2.unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn triangle_sanity() {
        let u = [1.0, 2.0, -1.0, 0.5];
        let pred = [1.2, 1.7, -1.1, 0.9];
        let r = error_norms(&pred, &u).unwrap();
        let l2: f64 = pred.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(r.max_abs <= l2 + 1e-15);
        assert!(l2 <= (u.len() as f64).sqrt() * r.max_abs + 1e-15);
    }

    #[test]
    fn centerline_csv_roundtrip() {
        let text = "y,u,x,v\n0.0,0.0,0.0,0.0\n0.5,-0.2,0.5,0.1\n1.0,1.0,,\n";
        let d = parse_centerline_csv(text).unwrap();
        assert_eq!(d.vertical.len(), 3);
        assert_eq!(d.horizontal.len(), 2);
        assert_eq!(d.vertical[2], (1.0, 1.0));
    }
}
