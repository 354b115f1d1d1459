//! L-BFGS with strong-Wolfe line search (cubic-interpolation bracketing in
//! the minFunc lineage). One outer step runs up to `max_iter` quasi-Newton
//! iterations; curvature-unsafe pairs are skipped when updating the history.

use super::{dot, inf_norm, LossGrad, StepReport};
use crate::error::CoreError;

/// Strong-Wolfe conditions evaluated at an accepted step.
#[derive(Debug, Clone, Copy)]
pub struct WolfeCheck {
    /// f(x + t d) <= f(x) + c1 t g'd
    pub sufficient_decrease: bool,
    /// |g(x + t d)'d| <= c2 |g(x)'d|
    pub curvature: bool,
}

#[derive(Debug, Clone)]
pub struct LbfgsState {
    pub lr: f64,
    pub max_iter: usize,
    pub max_eval: usize,
    pub history_size: usize,
    pub c1: f64,
    pub c2: f64,
    pub tol_grad: f64,
    pub tol_change: f64,
    pub max_ls: usize,
    /// (s, y, 1/y's) pairs, oldest first.
    history: Vec<(Vec<f64>, Vec<f64>, f64)>,
    gamma: f64,
    total_iters: usize,
}

impl LbfgsState {
    pub fn new(max_iter: usize, history_size: usize) -> Self {
        Self {
            lr: 1.0,
            max_iter,
            max_eval: max_iter * 5 / 4,
            history_size,
            c1: 1e-4,
            c2: 0.9,
            tol_grad: 1e-7,
            tol_change: 1e-9,
            max_ls: 25,
            history: Vec::new(),
            gamma: 1.0,
            total_iters: 0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Two-loop recursion with the gamma = s'y / y'y initial scaling.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = grad.iter().map(|g| -g).collect();
        if self.history.is_empty() {
            return q;
        }
        let m = self.history.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let (s, y, rho) = &self.history[i];
            alpha[i] = rho * dot(s, &q);
            for (qk, yk) in q.iter_mut().zip(y) {
                *qk -= alpha[i] * yk;
            }
        }
        for qk in q.iter_mut() {
            *qk *= self.gamma;
        }
        for i in 0..m {
            let (s, y, rho) = &self.history[i];
            let beta = rho * dot(y, &q);
            for (qk, sk) in q.iter_mut().zip(s) {
                *qk += (alpha[i] - beta) * sk;
            }
        }
        q
    }

    fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let ys = dot(&y, &s);
        // curvature condition: keep only pairs with y's > 0 (within guard)
        if ys <= 1e-10 {
            return;
        }
        self.gamma = ys / dot(&y, &y);
        self.history.push((s, y, 1.0 / ys));
        if self.history.len() > self.history_size {
            self.history.remove(0);
        }
    }

    pub fn step(&mut self, params: &mut Vec<f64>, f: &mut LossGrad) -> Result<StepReport, CoreError> {
        let (mut loss, mut grad) = f(params)?;
        let mut report = StepReport { loss, grad_inf: inf_norm(&grad), evals: 1, ..Default::default() };
        if report.grad_inf <= self.tol_grad {
            return Ok(report);
        }

        let mut n_iter = 0;
        while n_iter < self.max_iter {
            n_iter += 1;
            self.total_iters += 1;

            let mut d = self.direction(&grad);
            let mut gtd = dot(&grad, &d);
            if gtd > -self.tol_change {
                // Degenerate quasi-Newton direction while the gradient is
                // still alive: restart from steepest descent with a cleared
                // history rather than freezing.
                if report.grad_inf <= self.tol_grad {
                    break;
                }
                self.history.clear();
                self.gamma = 1.0;
                report.restarts += 1;
                d = grad.iter().map(|g| -g).collect();
                gtd = dot(&grad, &d);
                if gtd > -self.tol_change {
                    break;
                }
            }
            let t0 = if self.total_iters == 1 {
                let g1: f64 = grad.iter().map(|g| g.abs()).sum();
                (1.0f64).min(1.0 / g1) * self.lr
            } else {
                self.lr
            };

            let prev_loss = loss;
            let ls = strong_wolfe(
                f, params, t0, &d, loss, &grad, gtd, self.c1, self.c2, self.tol_change,
                self.max_ls,
            )?;
            report.evals += ls.evals;

            let (t, f_new, g_new) = if ls.wolfe_ok {
                report.wolfe.push(WolfeCheck {
                    sufficient_decrease: ls.f <= loss + self.c1 * ls.t * gtd,
                    curvature: dot(&ls.g, &d).abs() <= self.c2 * gtd.abs(),
                });
                (ls.t, ls.f, ls.g)
            } else {
                // Line search exhausted its budget without a Wolfe point:
                // steepest-descent step with Armijo backtracking.
                report.ls_fallback = true;
                let sd: Vec<f64> = grad.iter().map(|g| -g).collect();
                let gtd_sd = dot(&grad, &sd);
                match armijo_backtrack(f, params, &sd, loss, gtd_sd, self.c1, &mut report.evals)? {
                    Some((t, f_new, g_new)) => {
                        // rebind the direction so the history pair uses it
                        let s: Vec<f64> = sd.iter().map(|v| t * v).collect();
                        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
                        for (p, si) in params.iter_mut().zip(&s) {
                            *p += si;
                        }
                        self.push_pair(s, y);
                        loss = f_new;
                        grad = g_new;
                        report.loss = loss;
                        report.grad_inf = inf_norm(&grad);
                        if report.evals >= self.max_eval
                            || report.grad_inf <= self.tol_grad
                            || (loss - prev_loss).abs() < self.tol_change
                        {
                            break;
                        }
                        continue;
                    }
                    None => break, // no descent possible from here
                }
            };

            let s: Vec<f64> = d.iter().map(|v| t * v).collect();
            for (p, si) in params.iter_mut().zip(&s) {
                *p += si;
            }
            let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
            self.push_pair(s.clone(), y);
            loss = f_new;
            grad = g_new;
            report.loss = loss;
            report.grad_inf = inf_norm(&grad);

            if report.evals >= self.max_eval {
                break;
            }
            if report.grad_inf <= self.tol_grad {
                break;
            }
            if inf_norm(&s) <= self.tol_change {
                break;
            }
            if (loss - prev_loss).abs() < self.tol_change {
                break;
            }
        }
        Ok(report)
    }
}

struct LineSearchResult {
    f: f64,
    g: Vec<f64>,
    t: f64,
    evals: usize,
    wolfe_ok: bool,
}

fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, lo: f64, hi: f64) -> f64 {
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_square = d1 * d1 - g1 * g2;
    if d2_square >= 0.0 {
        let d2 = d2_square.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        min_pos.clamp(lo, hi)
    } else {
        (lo + hi) / 2.0
    }
}

#[allow(clippy::too_many_arguments)]
fn strong_wolfe(
    f: &mut LossGrad,
    x: &[f64],
    mut t: f64,
    d: &[f64],
    f0: f64,
    g0: &[f64],
    gtd0: f64,
    c1: f64,
    c2: f64,
    tol_change: f64,
    max_ls: usize,
) -> Result<LineSearchResult, CoreError> {
    let d_norm = inf_norm(d);
    let mut eval_at = |t: f64, evals: &mut usize| -> Result<(f64, Vec<f64>, f64), CoreError> {
        let trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        let (fv, gv) = f(&trial)?;
        *evals += 1;
        let gtd = dot(&gv, d);
        Ok((fv, gv, gtd))
    };

    let mut evals = 0;
    let (mut f_new, mut g_new, mut gtd_new) = eval_at(t, &mut evals)?;

    // bracket phase
    let (mut t_prev, mut f_prev, mut g_prev, mut gtd_prev) = (0.0, f0, g0.to_vec(), gtd0);
    let mut bracket: [f64; 2];
    let mut bracket_f: [f64; 2];
    let mut bracket_g: [Vec<f64>; 2];
    let mut bracket_gtd: [f64; 2];
    let mut done = false;
    let mut ls_iter = 0;
    loop {
        if ls_iter >= max_ls {
            bracket = [0.0, t];
            bracket_f = [f0, f_new];
            bracket_g = [g0.to_vec(), g_new.clone()];
            bracket_gtd = [gtd0, gtd_new];
            break;
        }
        if !f_new.is_finite() || f_new > f0 + c1 * t * gtd0 || (ls_iter > 1 && f_new >= f_prev) {
            bracket = [t_prev, t];
            bracket_f = [f_prev, f_new];
            bracket_g = [g_prev.clone(), g_new.clone()];
            bracket_gtd = [gtd_prev, gtd_new];
            break;
        }
        if gtd_new.abs() <= -c2 * gtd0 {
            bracket = [t, t];
            bracket_f = [f_new, f_new];
            bracket_g = [g_new.clone(), g_new.clone()];
            bracket_gtd = [gtd_new, gtd_new];
            done = true;
            break;
        }
        if gtd_new >= 0.0 {
            bracket = [t_prev, t];
            bracket_f = [f_prev, f_new];
            bracket_g = [g_prev.clone(), g_new.clone()];
            bracket_gtd = [gtd_prev, gtd_new];
            break;
        }
        let min_step = t + 0.01 * (t - t_prev);
        let max_step = t * 10.0;
        let tmp = t;
        t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, min_step, max_step);
        t_prev = tmp;
        f_prev = f_new;
        g_prev = g_new.clone();
        gtd_prev = gtd_new;
        let r = eval_at(t, &mut evals)?;
        f_new = r.0;
        g_new = r.1;
        gtd_new = r.2;
        ls_iter += 1;
    }

    // zoom phase
    let (mut low, mut high) = if bracket_f[0] <= bracket_f[1] { (0, 1) } else { (1, 0) };
    let mut insuf_progress = false;
    while !done && ls_iter < max_ls {
        if (bracket[1] - bracket[0]).abs() * d_norm < tol_change {
            break;
        }
        let mut t_zoom = cubic_interpolate(
            bracket[0],
            bracket_f[0],
            bracket_gtd[0],
            bracket[1],
            bracket_f[1],
            bracket_gtd[1],
            bracket[0].min(bracket[1]),
            bracket[0].max(bracket[1]),
        );
        let b_hi = bracket[0].max(bracket[1]);
        let b_lo = bracket[0].min(bracket[1]);
        let eps = 0.1 * (b_hi - b_lo);
        if (b_hi - t_zoom).min(t_zoom - b_lo) < eps {
            if insuf_progress || t_zoom >= b_hi || t_zoom <= b_lo {
                t_zoom = if (t_zoom - b_hi).abs() < (t_zoom - b_lo).abs() {
                    b_hi - eps
                } else {
                    b_lo + eps
                };
                insuf_progress = false;
            } else {
                insuf_progress = true;
            }
        } else {
            insuf_progress = false;
        }

        let r = eval_at(t_zoom, &mut evals)?;
        f_new = r.0;
        g_new = r.1;
        gtd_new = r.2;
        ls_iter += 1;

        if !f_new.is_finite() || f_new > f0 + c1 * t_zoom * gtd0 || f_new >= bracket_f[low] {
            bracket[high] = t_zoom;
            bracket_f[high] = f_new;
            bracket_g[high] = g_new.clone();
            bracket_gtd[high] = gtd_new;
            (low, high) = if bracket_f[0] <= bracket_f[1] { (0, 1) } else { (1, 0) };
        } else {
            if gtd_new.abs() <= -c2 * gtd0 {
                done = true;
            } else if gtd_new * (bracket[high] - bracket[low]) >= 0.0 {
                bracket[high] = bracket[low];
                bracket_f[high] = bracket_f[low];
                bracket_g[high] = bracket_g[low].clone();
                bracket_gtd[high] = bracket_gtd[low];
            }
            bracket[low] = t_zoom;
            bracket_f[low] = f_new;
            bracket_g[low] = g_new.clone();
            bracket_gtd[low] = gtd_new;
        }
    }

    let t_acc = bracket[low];
    let f_acc = bracket_f[low];
    let g_acc = bracket_g[low].clone();
    // A zero step or a non-Wolfe endpoint counts as failure; the caller
    // decides on the fallback.
    let armijo_ok = f_acc.is_finite() && f_acc <= f0 + c1 * t_acc * gtd0 && t_acc > 0.0;
    let curvature_ok = bracket_gtd[low].abs() <= -c2 * gtd0;
    Ok(LineSearchResult { f: f_acc, g: g_acc, t: t_acc, evals, wolfe_ok: done || (armijo_ok && curvature_ok) })
}

/// Plain Armijo backtracking along `d` from the current point.
fn armijo_backtrack(
    f: &mut LossGrad,
    x: &[f64],
    d: &[f64],
    f0: f64,
    gtd: f64,
    c1: f64,
    evals: &mut usize,
) -> Result<Option<(f64, f64, Vec<f64>)>, CoreError> {
    let mut t = 1.0;
    for _ in 0..40 {
        let trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        let (fv, gv) = f(&trial)?;
        *evals += 1;
        if fv.is_finite() && fv <= f0 + c1 * t * gtd {
            return Ok(Some((t, fv, gv)));
        }
        t *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> Result<(f64, Vec<f64>), CoreError> {
        Ok((x[0] * x[0], vec![2.0 * x[0]]))
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>), CoreError> {
        let (a, b) = (1.0, 100.0);
        let f = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
        let g = vec![
            -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] * x[0]),
            2.0 * b * (x[1] - x[0] * x[0]),
        ];
        Ok((f, g))
    }

    #[test]
    fn quadratic_converges_in_one_outer_step() {
        let mut s = LbfgsState::new(20, 100);
        let mut x = vec![1.0];
        let r = s.step(&mut x, &mut quadratic).unwrap();
        assert!(x[0].abs() < 1e-6, "x = {}", x[0]);
        assert!(!r.ls_fallback);
    }

    #[test]
    fn rosenbrock_under_two_hundred_outer_steps() {
        let mut s = LbfgsState::new(20, 100);
        let mut x = vec![-1.2, 1.0];
        let mut steps = 0;
        for _ in 0..200 {
            steps += 1;
            let r = s.step(&mut x, &mut rosenbrock).unwrap();
            for w in &r.wolfe {
                assert!(w.sufficient_decrease, "Armijo violated at step {steps}");
                assert!(w.curvature, "curvature violated at step {steps}");
            }
            if r.loss < 1e-8 {
                break;
            }
        }
        let (f, _) = rosenbrock(&x).unwrap();
        assert!(f < 1e-8, "f = {f} after {steps} outer steps");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_descent_per_outer_step() {
        let mut s = LbfgsState::new(5, 10);
        let mut x = vec![-1.2, 1.0];
        let (mut prev, _) = rosenbrock(&x).unwrap();
        for _ in 0..30 {
            let r = s.step(&mut x, &mut rosenbrock).unwrap();
            assert!(r.loss <= prev + 1e-15, "ascent: {prev} -> {}", r.loss);
            prev = r.loss;
        }
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut s = LbfgsState::new(10, 50);
            let mut x = vec![-1.2, 1.0];
            for _ in 0..10 {
                s.step(&mut x, &mut rosenbrock).unwrap();
            }
            x
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stationary_start_is_a_fixed_point() {
        let mut s = LbfgsState::new(20, 100);
        let mut x = vec![0.0];
        let r = s.step(&mut x, &mut quadratic).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(r.evals, 1);
    }
}
