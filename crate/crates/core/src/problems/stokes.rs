//! Stokes flow on the unit square in first-order
//! velocity-pressure-vorticity form (Re = 1):
//! D_x = p_x + (1/Re) w_y - f_x, D_y = p_y - (1/Re) w_x - f_y,
//! F = v_x - u_y - w, C = u_x + v_y.
//!
//! Manufactured fields: with A(s) = s^2 (1-s)^2,
//! u = A(x) A'(y), v = -A(y) A'(x), p = x^2 - y^2,
//! w = -A(x) A''(y) - A(y) A''(x).
//! No-slip on x=0, x=1, y=0; on y=1 the constraints are u = 0 and
//! p = x^2 - 1. The body force is derived from the exact fields and
//! finite-difference-checked at construction.

use super::{check_source, point_constant, DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{BoxDomain, Face, PointSet};
use crate::tensor::Tensor;

pub struct Stokes {
    reynolds: f64,
}

fn bump(s: f64) -> f64 {
    let t = s * (1.0 - s);
    t * t
}

fn bump_d1(s: f64) -> f64 {
    2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}

fn bump_d2(s: f64) -> f64 {
    2.0 - 12.0 * s + 12.0 * s * s
}

fn bump_d3(s: f64) -> f64 {
    -12.0 + 24.0 * s
}

impl Stokes {
    pub fn new(reynolds: f64) -> Result<Self, CoreError> {
        if reynolds <= 0.0 {
            return Err(CoreError::invalid("stokes needs Re > 0"));
        }
        let p = Self { reynolds };
        let pts: Vec<Vec<f64>> = (1..9)
            .flat_map(|i| (1..9).map(move |j| vec![i as f64 / 9.0, j as f64 / 9.0]))
            .collect();
        let h = 1e-5;
        let w = |x: f64, y: f64| -bump(x) * bump_d2(y) - bump(y) * bump_d2(x);
        check_source(
            "stokes f_x",
            &pts,
            |q| p.body_force(q).0,
            |q| {
                let (x, y) = (q[0], q[1]);
                let p_x = ((x + h) * (x + h) - (x - h) * (x - h)) / (2.0 * h);
                let w_y = (w(x, y + h) - w(x, y - h)) / (2.0 * h);
                p_x + w_y / p.reynolds
            },
            1e-6,
        )?;
        check_source(
            "stokes f_y",
            &pts,
            |q| p.body_force(q).1,
            |q| {
                let (x, y) = (q[0], q[1]);
                let p_y = -((y + h) * (y + h) - (y - h) * (y - h)) / (2.0 * h);
                let w_x = (w(x + h, y) - w(x - h, y)) / (2.0 * h);
                p_y - w_x / p.reynolds
            },
            1e-6,
        )?;
        Ok(p)
    }

    fn body_force(&self, q: &[f64]) -> (f64, f64) {
        let (x, y) = (q[0], q[1]);
        let w_x = -bump(y) * bump_d3(x) - bump_d1(x) * bump_d2(y);
        let w_y = -bump_d1(y) * bump_d2(x) - bump(x) * bump_d3(y);
        let fx = 2.0 * x + w_y / self.reynolds;
        let fy = -2.0 * y - w_x / self.reynolds;
        (fx, fy)
    }

    fn lid_pressure(x: f64) -> f64 {
        x * x - 1.0
    }
}

impl Problem for Stokes {
    fn name(&self) -> &'static str {
        "stokes"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        4
    }

    fn unknown_names(&self) -> Vec<&'static str> {
        vec!["u", "v", "p", "omega"]
    }

    fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("static box")
    }

    fn deriv_need(&self) -> DerivNeed {
        DerivNeed::First
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("reynolds", self.reynolds)]
    }

    fn families(&self) -> super::FamilyPresence {
        super::FamilyPresence { f: true, c: true, i: false }
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact(&self, q: &[f64]) -> Vec<f64> {
        let (x, y) = (q[0], q[1]);
        vec![
            bump(x) * bump_d1(y),
            -bump(y) * bump_d1(x),
            x * x - y * y,
            -bump(x) * bump_d2(y) - bump(y) * bump_d2(x),
        ]
    }

    fn exact_d1(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let (x, y) = (q[0], q[1]);
        vec![
            vec![bump_d1(x) * bump_d1(y), bump(x) * bump_d2(y)],
            vec![-bump(y) * bump_d2(x), -bump_d1(y) * bump_d1(x)],
            vec![2.0 * x, -2.0 * y],
            vec![
                -bump(y) * bump_d3(x) - bump_d1(x) * bump_d2(y),
                -bump_d1(y) * bump_d2(x) - bump(x) * bump_d3(y),
            ],
        ]
    }

    fn faces(&self) -> Vec<Face> {
        vec![
            Face { axis: 0, high: false, name: "x_lo" },
            Face { axis: 0, high: true, name: "x_hi" },
            Face { axis: 1, high: false, name: "y_lo" },
            Face { axis: 1, high: true, name: "lid" },
        ]
    }

    fn interior_phis(
        &self,
        g: &DiffGraph,
        pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        let (u_x, u_y) = (fe.d1[0][0], fe.d1[0][1]);
        let (v_x, v_y) = (fe.d1[1][0], fe.d1[1][1]);
        let (p_x, p_y) = (fe.d1[2][0], fe.d1[2][1]);
        let w = fe.value[3];
        let (w_x, w_y) = (fe.d1[3][0], fe.d1[3][1]);
        let inv_re = 1.0 / self.reynolds;

        let fx = point_constant(g, pts, |q| self.body_force(q).0);
        let fy = point_constant(g, pts, |q| self.body_force(q).1);
        let dx = g.sub(g.add(p_x, g.scale(w_y, inv_re))?, fx)?;
        let dy = g.sub(g.sub(p_y, g.scale(w_x, inv_re))?, fy)?;
        let d = super::sum_squares(g, &[dx, dy])?;

        let f = g.sub(g.sub(v_x, u_y)?, w)?;
        let c = g.add(u_x, v_y)?;
        Ok(InteriorPhis { d, f: Some(g.powi(f, 2)), c: Some(g.powi(c, 2)) })
    }

    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let g = ev.graph;
        let fields = ev.values_at(&pts.coords)?;
        let tags = pts.tags.as_ref().ok_or_else(|| CoreError::invalid("untagged boundary"))?;
        // Walls 0..2 pin (u, v); the lid pins u and the pressure profile.
        let wall = |t: &usize| if *t < 3 { 1.0 } else { 0.0 };
        let mask_wall = g.constant(Tensor::column(
            &tags.iter().map(wall).collect::<Vec<_>>(),
        ));
        let mask_lid = g.affine(mask_wall, -1.0, 1.0);
        let p_target = point_constant(g, pts, |q| Self::lid_pressure(q[0]));

        let u2 = g.powi(fields[0], 2);
        let v2 = g.powi(fields[1], 2);
        let p_gap = g.powi(g.sub(fields[2], p_target)?, 2);

        let wall_phi = g.mul(mask_wall, g.add(u2, v2)?)?;
        let lid_phi = g.mul(mask_lid, g.add(u2, p_gap)?)?;
        g.add(wall_phi, lid_phi)
    }

    fn boundary_residual_exact(&self, q: &[f64], tag: usize) -> Vec<f64> {
        let v = self.exact(q);
        if tag < 3 {
            vec![v[0], v[1]]
        } else {
            vec![v[0], v[2] - Self::lid_pressure(q[0])]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::analytic_fields;
    use crate::sampling::Role;

    #[test]
    fn exact_velocity_is_divergence_free() {
        let p = Stokes::new(1.0).unwrap();
        let d = p.exact_d1(&[0.3, 0.7]);
        let div = d[0][0] + d[1][1];
        assert!(div.abs() < 1e-15);
        // u_x = 2x(1-x)(1-2x) * 2y(1-y)(1-2y)
        let by_hand = 2.0 * 0.3 * 0.7 * 0.4 * (2.0 * 0.7 * 0.3 * (-0.4));
        assert!((d[0][0] - by_hand).abs() < 1e-15);
    }

    #[test]
    fn vorticity_value_at_center() {
        let p = Stokes::new(1.0).unwrap();
        let w = p.exact(&[0.5, 0.5])[3];
        assert!((w - 0.125).abs() < 1e-15);
    }

    #[test]
    fn residuals_vanish_on_exact_fields() {
        let p = Stokes::new(1.0).unwrap();
        let g = DiffGraph::new();
        let pts = PointSet::new(
            Role::Interior,
            Tensor::new(vec![3, 2], vec![0.3, 0.7, 0.11, 0.52, 0.91, 0.24]).unwrap(),
        );
        let fe = analytic_fields(&g, &p, &pts);
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        for phi in [phis.d, phis.f.unwrap(), phis.c.unwrap()] {
            assert!(g.with_value(phi, |t| t.data().iter().all(|v| v.abs() < 1e-16)));
        }
    }

    #[test]
    fn lid_constraints_vanish_on_exact_fields() {
        let p = Stokes::new(1.0).unwrap();
        for x in [0.0, 0.25, 0.8, 1.0] {
            let r = p.boundary_residual_exact(&[x, 1.0], 3);
            assert!(r.iter().all(|v| v.abs() < 1e-15), "{r:?}");
        }
    }
}
