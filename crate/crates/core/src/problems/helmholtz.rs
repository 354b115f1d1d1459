//! Helmholtz equation on [-1, 1]^2 with homogeneous Dirichlet walls:
//! Lap(u) + k^2 u = q, manufactured solution u = sin(pi x) sin(4 pi y),
//! q = (k^2 - 17 pi^2) sin(pi x) sin(4 pi y).
//!
//! Default form introduces the gradient pair (sx, sy) = grad u:
//! D = sx_x + sy_y + k^2 u - q, F = (sx - u_x, sy - u_y).
//! The `second_order` flag trains the strong form directly on a
//! single-output network with only the boundary family constrained.

use std::f64::consts::PI;

use super::{check_source, point_constant, DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{BoxDomain, Face, PointSet};

pub struct Helmholtz {
    k: f64,
    second_order: bool,
}

impl Helmholtz {
    pub fn new(k: f64, second_order: bool) -> Result<Self, CoreError> {
        let p = Self { k, second_order };
        let pts: Vec<Vec<f64>> = (1..7)
            .flat_map(|i| (1..7).map(move |j| vec![-0.9 + 0.3 * i as f64, -0.9 + 0.3 * j as f64]))
            .collect();
        let h = 1e-5;
        check_source(
            "helmholtz q",
            &pts,
            |q| p.forcing(q),
            |q| {
                let (x, y) = (q[0], q[1]);
                let u = |x: f64, y: f64| (PI * x).sin() * (4.0 * PI * y).sin();
                let u_xx = (u(x + h, y) - 2.0 * u(x, y) + u(x - h, y)) / (h * h);
                let u_yy = (u(x, y + h) - 2.0 * u(x, y) + u(x, y - h)) / (h * h);
                u_xx + u_yy + p.k * p.k * u(x, y)
            },
            1e-4,
        )?;
        Ok(p)
    }

    fn forcing(&self, q: &[f64]) -> f64 {
        (self.k * self.k - 17.0 * PI * PI) * (PI * q[0]).sin() * (4.0 * PI * q[1]).sin()
    }
}

impl Problem for Helmholtz {
    fn name(&self) -> &'static str {
        "helmholtz"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        if self.second_order {
            1
        } else {
            3
        }
    }

    fn unknown_names(&self) -> Vec<&'static str> {
        if self.second_order {
            vec!["u"]
        } else {
            vec!["u", "sx", "sy"]
        }
    }

    fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).expect("static box")
    }

    fn deriv_need(&self) -> DerivNeed {
        if self.second_order {
            DerivNeed::Second
        } else {
            DerivNeed::First
        }
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("k", self.k)]
    }

    fn families(&self) -> super::FamilyPresence {
        super::FamilyPresence { f: !self.second_order, c: false, i: false }
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact(&self, q: &[f64]) -> Vec<f64> {
        let (x, y) = (q[0], q[1]);
        let u = (PI * x).sin() * (4.0 * PI * y).sin();
        if self.second_order {
            vec![u]
        } else {
            vec![
                u,
                PI * (PI * x).cos() * (4.0 * PI * y).sin(),
                4.0 * PI * (PI * x).sin() * (4.0 * PI * y).cos(),
            ]
        }
    }

    fn exact_d1(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let (x, y) = (q[0], q[1]);
        let u_x = PI * (PI * x).cos() * (4.0 * PI * y).sin();
        let u_y = 4.0 * PI * (PI * x).sin() * (4.0 * PI * y).cos();
        if self.second_order {
            return vec![vec![u_x, u_y]];
        }
        let u = (PI * x).sin() * (4.0 * PI * y).sin();
        let sx_x = -PI * PI * u;
        let sx_y = 4.0 * PI * PI * (PI * x).cos() * (4.0 * PI * y).cos();
        let sy_x = sx_y;
        let sy_y = -16.0 * PI * PI * u;
        vec![vec![u_x, u_y], vec![sx_x, sx_y], vec![sy_x, sy_y]]
    }

    fn exact_d2(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let (x, y) = (q[0], q[1]);
        let u = (PI * x).sin() * (4.0 * PI * y).sin();
        if self.second_order {
            vec![vec![-PI * PI * u, -16.0 * PI * PI * u]]
        } else {
            Vec::new()
        }
    }

    fn faces(&self) -> Vec<Face> {
        vec![
            Face { axis: 0, high: false, name: "x_lo" },
            Face { axis: 0, high: true, name: "x_hi" },
            Face { axis: 1, high: false, name: "y_lo" },
            Face { axis: 1, high: true, name: "y_hi" },
        ]
    }

    fn interior_phis(
        &self,
        g: &DiffGraph,
        pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        let q = point_constant(g, pts, |p| self.forcing(p));
        let k2 = self.k * self.k;
        if self.second_order {
            let lap = g.add(fe.d2[0][0], fe.d2[0][1])?;
            let d = g.sub(g.add(lap, g.scale(fe.value[0], k2))?, q)?;
            return Ok(InteriorPhis { d: g.powi(d, 2), f: None, c: None });
        }
        let u = fe.value[0];
        let (u_x, u_y) = (fe.d1[0][0], fe.d1[0][1]);
        let (sx, sx_x) = (fe.value[1], fe.d1[1][0]);
        let (sy, sy_y) = (fe.value[2], fe.d1[2][1]);
        let div_s = g.add(sx_x, sy_y)?;
        let d = g.sub(g.add(div_s, g.scale(u, k2))?, q)?;
        let f_x = g.sub(sx, u_x)?;
        let f_y = g.sub(sy, u_y)?;
        let f = super::sum_squares(g, &[f_x, f_y])?;
        Ok(InteriorPhis { d: g.powi(d, 2), f: Some(f), c: None })
    }

    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let fields = ev.values_at(&pts.coords)?;
        Ok(ev.graph.powi(fields[0], 2))
    }

    fn boundary_residual_exact(&self, q: &[f64], _tag: usize) -> Vec<f64> {
        vec![self.exact(q)[0]]
    }
}
