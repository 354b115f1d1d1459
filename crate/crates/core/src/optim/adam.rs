//! Bias-corrected Adam on the full batch.

use super::{inf_norm, LossGrad, StepReport};
use crate::error::CoreError;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Vec<f64>, f: &mut LossGrad) -> Result<StepReport, CoreError> {
        let (loss, grad) = f(params)?;
        self.apply(params, &grad)?;
        Ok(StepReport { loss, grad_inf: inf_norm(&grad), evals: 1, ..Default::default() })
    }

    /// One update from an externally computed gradient.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), CoreError> {
        if grad.len() != params.len() {
            return Err(CoreError::ShapeMismatch {
                op: "adam",
                lhs: vec![params.len()],
                rhs: vec![grad.len()],
            });
        }
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(CoreError::NonFinite { what: "adam gradient", detail: format!("{bad}") });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_bumps_counter() {
        let mut s = AdamState::new(3, 0.01);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        s.apply(&mut p, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        // For the first step m_hat = g, v_hat = g^2, so
        // delta = -lr * g / (|g| + eps) ~ -lr * sign(g).
        let mut s = AdamState::new(1, 0.01);
        let mut p = vec![5.0];
        s.apply(&mut p, &[1.0]).unwrap();
        let expect = 5.0 - 0.01 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn update_independent_of_parameter_values() {
        let mut s1 = AdamState::new(2, 0.01);
        let mut s2 = AdamState::new(2, 0.01);
        let mut a = vec![0.0, 0.0];
        let mut b = vec![100.0, -3.0];
        for g in [[0.5, -0.25], [0.1, 0.9], [-0.3, 0.3]] {
            s1.apply(&mut a, &g).unwrap();
            s2.apply(&mut b, &g).unwrap();
        }
        for i in 0..2 {
            let da = a[i] - 0.0;
            let db = b[i] - [100.0, -3.0][i];
            assert!((da - db).abs() < 1e-12);
        }
    }

    #[test]
    fn large_gradient_step_saturates_at_lr() {
        let mut s = AdamState::new(1, 0.01);
        let mut p = vec![0.0];
        s.apply(&mut p, &[1e9]).unwrap();
        assert!((p[0].abs() - 0.01).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut s = AdamState::new(1, 0.01);
        let mut p = vec![0.0];
        assert!(s.apply(&mut p, &[f64::NAN]).is_err());
    }
}
