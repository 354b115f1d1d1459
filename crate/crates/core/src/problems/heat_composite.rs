//! Unsteady heat conduction in a composite medium on [-1, 1] x [0, 2].
//!
//! Conductivity jumps from 1 to 3*pi across the interface at x = 0 (the
//! interface itself counts as the right medium). The flux sigma = -a T_x
//! turns the equation into the first-order pair
//! D = T_t + sigma_x - f, F = sigma + a T_x; temperature and flux stay
//! continuous across the interface. Sources come from the manufactured
//! solution T = t sin(3 pi x) on the left and T = t x on the right.

use std::f64::consts::PI;

use super::{check_source, point_constant, DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{axis_points, AxisMode, BoxDomain, Face, PointSet, Role};
use crate::tensor::Tensor;

const TAU: f64 = 2.0;

pub struct HeatComposite;

impl HeatComposite {
    pub fn new() -> Result<Self, CoreError> {
        let p = Self;
        // Guard the hand-derived source against the strong form
        // T_t - (a T_x)_x, away from the interface where a is smooth.
        let mut pts = Vec::new();
        for i in 0..10 {
            let x = -0.95 + 0.08 * i as f64;
            if x.abs() < 0.1 {
                continue;
            }
            pts.push(vec![x, 0.35 + 0.15 * i as f64]);
        }
        let h = 1e-5;
        check_source(
            "heat-composite f",
            &pts,
            |q| p.source(q),
            |q| {
                let (x, t) = (q[0], q[1]);
                let t_t = (p.temp(x, t + h) - p.temp(x, t - h)) / (2.0 * h);
                let flux = |x: f64| p.conductivity(x) * (p.temp(x + h, t) - p.temp(x - h, t)) / (2.0 * h);
                let a_tx_x = (flux(x + h) - flux(x - h)) / (2.0 * h);
                t_t - a_tx_x
            },
            1e-4,
        )?;
        Ok(p)
    }

    pub fn conductivity(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            3.0 * PI
        }
    }

    fn temp(&self, x: f64, t: f64) -> f64 {
        if x < 0.0 {
            (3.0 * PI * x).sin() * t
        } else {
            t * x
        }
    }

    fn source(&self, p: &[f64]) -> f64 {
        let (x, t) = (p[0], p[1]);
        if x < 0.0 {
            (3.0 * PI * x).sin() + 9.0 * PI * PI * t * (3.0 * PI * x).sin()
        } else {
            x
        }
    }
}

impl Problem for HeatComposite {
    fn name(&self) -> &'static str {
        "heat-composite"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn unknown_names(&self) -> Vec<&'static str> {
        vec!["T", "sigma"]
    }

    fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![-1.0, 0.0], vec![1.0, TAU]).expect("static box")
    }

    fn time_axis(&self) -> Option<usize> {
        Some(1)
    }

    fn deriv_need(&self) -> DerivNeed {
        DerivNeed::First
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("a_left", 1.0), ("a_right", 3.0 * PI), ("tau", TAU)]
    }

    fn families(&self) -> super::FamilyPresence {
        super::FamilyPresence { f: true, c: false, i: true }
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact(&self, p: &[f64]) -> Vec<f64> {
        let (x, t) = (p[0], p[1]);
        let temp = self.temp(x, t);
        let sigma = if x < 0.0 { -3.0 * PI * t * (3.0 * PI * x).cos() } else { -3.0 * PI * t };
        vec![temp, sigma]
    }

    fn exact_d1(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let (x, t) = (p[0], p[1]);
        if x < 0.0 {
            let (s, c) = ((3.0 * PI * x).sin(), (3.0 * PI * x).cos());
            vec![
                vec![3.0 * PI * t * c, s],
                vec![9.0 * PI * PI * t * s, -3.0 * PI * c],
            ]
        } else {
            vec![vec![t, x], vec![0.0, -3.0 * PI]]
        }
    }

    fn faces(&self) -> Vec<Face> {
        vec![
            Face { axis: 0, high: false, name: "x_lo" },
            Face { axis: 0, high: true, name: "x_hi" },
        ]
    }

    fn interior_phis(
        &self,
        g: &DiffGraph,
        pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        let (t_x, t_t) = (fe.d1[0][0], fe.d1[0][1]);
        let (sigma, sigma_x) = (fe.value[1], fe.d1[1][0]);
        let f = point_constant(g, pts, |p| self.source(p));
        let a = point_constant(g, pts, |p| self.conductivity(p[0]));
        // D = T_t + sigma_x - f
        let d = g.sub(g.add(t_t, sigma_x)?, f)?;
        // F = sigma + a T_x
        let fr = g.add(sigma, g.mul(a, t_x)?)?;
        Ok(InteriorPhis { d: g.powi(d, 2), f: Some(g.powi(fr, 2)), c: None })
    }

    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let fields = ev.values_at(&pts.coords)?;
        let target = point_constant(ev.graph, pts, |p| self.temp(p[0], p[1]));
        let r = ev.graph.sub(fields[0], target)?;
        Ok(ev.graph.powi(r, 2))
    }

    fn initial_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<Option<NodeId>, CoreError> {
        // T(x, 0) = h(x) = 0
        let fields = ev.values_at(&pts.coords)?;
        Ok(Some(ev.graph.powi(fields[0], 2)))
    }

    fn boundary_residual_exact(&self, p: &[f64], _tag: usize) -> Vec<f64> {
        vec![self.exact(p)[0] - self.temp(p[0], p[1])]
    }

    /// Boundary points live on the two spatial faces over t in (0, tau].
    fn sample_boundary(&self, n_per_face: usize) -> Result<PointSet, CoreError> {
        let ts = axis_points(0.0, TAU, n_per_face, AxisMode::HalfOpenLow);
        let mut data = Vec::with_capacity(4 * n_per_face);
        let mut tags = Vec::with_capacity(2 * n_per_face);
        for (tag, x) in [(0usize, -1.0), (1, 1.0)] {
            for t in &ts {
                data.push(x);
                data.push(*t);
                tags.push(tag);
            }
        }
        let coords = Tensor::new(vec![2 * n_per_face, 2], data)?;
        let mut ps = PointSet::new(Role::Boundary, coords);
        ps.tags = Some(tags);
        Ok(ps)
    }

    fn sample_initial(&self, n: usize) -> Result<Option<PointSet>, CoreError> {
        let xs = axis_points(-1.0, 1.0, n, AxisMode::Closed);
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
    fn exact_values_at_reference_points() {
        let p = HeatComposite::new().unwrap();
        let v = p.exact(&[0.5, 1.0]);
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[1] + 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn flux_continuous_across_interface() {
        let p = HeatComposite::new().unwrap();
        for t in [0.3, 1.0, 1.9] {
            let left = p.exact(&[-1e-12, t])[1];
            let right = p.exact(&[1e-12, t])[1];
            assert!((left - right).abs() < 1e-9);
            assert!((left + 3.0 * PI * t).abs() < 1e-9);
        }
    }

    #[test]
    fn initial_condition_is_zero() {
        let p = HeatComposite::new().unwrap();
        for x in [-0.9, -0.2, 0.0, 0.4, 1.0] {
            assert_eq!(p.exact(&[x, 0.0])[0], 0.0);
        }
    }

    #[test]
    fn residuals_vanish_on_exact_fields() {
        let p = HeatComposite::new().unwrap();
        let g = DiffGraph::new();
        let mut data = Vec::new();
        for (x, t) in [(-0.7, 0.4), (-0.31, 1.7), (0.2, 0.9), (0.85, 1.3)] {
            data.push(x);
            data.push(t);
        }
        let pts = PointSet::new(Role::Interior, Tensor::new(vec![4, 2], data).unwrap());
        let fe = analytic_fields(&g, &p, &pts);
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        assert!(g.with_value(phis.d, |t| t.data().iter().all(|v| v.abs() < 1e-16)));
        assert!(g.with_value(phis.f.unwrap(), |t| t.data().iter().all(|v| v.abs() < 1e-16)));
    }
}
