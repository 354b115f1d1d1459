//! Linear convection of a scalar on [0, 2*pi] x [0, 1] with constant speed:
//! xi_t + u xi_x = 0, periodic in x, xi(x, 0) = sin(x).
//!
//! Already first order, so no auxiliary variable. The boundary constraint is
//! the periodicity gap xi(0, t) - xi(2*pi, t), one constraint per sampled t.

use std::f64::consts::PI;

use super::{DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{axis_points, AxisMode, BoxDomain, Face, PointSet, Role};
use crate::tensor::Tensor;

pub struct Convection {
    speed: f64,
}

impl Convection {
    pub fn new(speed: f64) -> Result<Self, CoreError> {
        Ok(Self { speed })
    }
}

impl Problem for Convection {
    fn name(&self) -> &'static str {
        "convection"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn unknown_names(&self) -> Vec<&'static str> {
        vec!["xi"]
    }

    fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![0.0, 0.0], vec![2.0 * PI, 1.0]).expect("static box")
    }

    fn time_axis(&self) -> Option<usize> {
        Some(1)
    }

    fn deriv_need(&self) -> DerivNeed {
        DerivNeed::First
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("u_convect", self.speed)]
    }

    fn families(&self) -> super::FamilyPresence {
        super::FamilyPresence { f: false, c: false, i: true }
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact(&self, p: &[f64]) -> Vec<f64> {
        vec![(p[0] - self.speed * p[1]).sin()]
    }

    fn exact_d1(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let c = (p[0] - self.speed * p[1]).cos();
        vec![vec![c, -self.speed * c]]
    }

    fn faces(&self) -> Vec<Face> {
        vec![Face { axis: 0, high: false, name: "periodic" }]
    }

    fn interior_phis(
        &self,
        g: &DiffGraph,
        _pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        let (xi_x, xi_t) = (fe.d1[0][0], fe.d1[0][1]);
        let d = g.add(xi_t, g.scale(xi_x, self.speed))?;
        Ok(InteriorPhis { d: g.powi(d, 2), f: None, c: None })
    }

    /// Periodicity gap: the network is evaluated at (0, t) and (2*pi, t)
    /// for the same t samples and the constraint is the difference.
    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let n = pts.len();
        let mut right = pts.coords.data().to_vec();
        for chunk in right.chunks_exact_mut(2) {
            chunk[0] = 2.0 * PI;
        }
        let left_fields = ev.values_at(&pts.coords)?;
        let right_fields = ev.values_at(&Tensor::new(vec![n, 2], right)?)?;
        let gap = ev.graph.sub(left_fields[0], right_fields[0])?;
        Ok(ev.graph.powi(gap, 2))
    }

    fn initial_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<Option<NodeId>, CoreError> {
        let fields = ev.values_at(&pts.coords)?;
        let target = super::point_constant(ev.graph, pts, |p| p[0].sin());
        let r = ev.graph.sub(fields[0], target)?;
        Ok(Some(ev.graph.powi(r, 2)))
    }

    fn boundary_residual_exact(&self, p: &[f64], _tag: usize) -> Vec<f64> {
        let t = p[1];
        vec![self.exact(&[0.0, t])[0] - self.exact(&[2.0 * PI, t])[0]]
    }

    /// Periodic "face": one constraint per t sample in (0, 1], stored at x=0.
    fn sample_boundary(&self, n_per_face: usize) -> Result<PointSet, CoreError> {
        let ts = axis_points(0.0, 1.0, n_per_face, AxisMode::HalfOpenLow);
        let mut data = Vec::with_capacity(2 * n_per_face);
        for t in ts {
            data.push(0.0);
            data.push(t);
        }
        let coords = Tensor::new(vec![n_per_face, 2], data)?;
        let mut ps = PointSet::new(Role::Boundary, coords);
        ps.tags = Some(vec![0; n_per_face]);
        Ok(ps)
    }

    fn sample_initial(&self, n: usize) -> Result<Option<PointSet>, CoreError> {
        let xs = axis_points(0.0, 2.0 * PI, n, AxisMode::Closed);
        let mut data = Vec::with_capacity(2 * n);
        for x in xs {
            data.push(x);
            data.push(0.0);
        }
        Ok(Some(PointSet::new(Role::Initial, Tensor::new(vec![n, 2], data)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::analytic_fields;

    #[test]
    fn initial_profile_peak() {
        let p = Convection::new(40.0).unwrap();
        assert!((p.exact(&[PI / 2.0, 0.0])[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_vanishes_on_exact_solution() {
        let p = Convection::new(40.0).unwrap();
        let g = DiffGraph::new();
        let pts = PointSet::new(
            Role::Interior,
            Tensor::new(vec![2, 2], vec![1.0, 0.5, 4.4, 0.21]).unwrap(),
        );
        let fe = analytic_fields(&g, &p, &pts);
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        assert!(g.with_value(phis.d, |t| t.data().iter().all(|v| v.abs() < 1e-18)));
    }

    /// The closed form sin(x - u t) must match the spectral construction
    /// F^{-1}(F(h) e^{-i u k t}) of the exact solution on a periodic grid.
    #[test]
    fn closed_form_matches_dft_construction() {
        let p = Convection::new(40.0).unwrap();
        let n = 256;
        let t = 0.37;
        // h on the periodic grid
        let h: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        // slow DFT
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for k in 0..n {
            for (j, hv) in h.iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                re[k] += hv * ang.cos();
                im[k] += hv * ang.sin();
            }
        }
        // multiply by e^{-i u k t} with integer frequencies k (wrapped)
        for k in 0..n {
            let freq = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let ang = -p.speed * freq * t;
            let (c, s) = (ang.cos(), ang.sin());
            let (a, b) = (re[k], im[k]);
            re[k] = a * c - b * s;
            im[k] = a * s + b * c;
        }
        // inverse DFT, real part
        for (i, _) in h.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                let ang = 2.0 * PI * (k * i) as f64 / n as f64;
                acc += re[k] * ang.cos() - im[k] * ang.sin();
            }
            acc /= n as f64;
            let x = 2.0 * PI * i as f64 / n as f64;
            let exact = p.exact(&[x, t])[0];
            assert!((acc - exact).abs() < 1e-10, "x={x}: dft {acc} vs exact {exact}");
        }
    }
}
