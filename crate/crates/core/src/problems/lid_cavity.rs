//! Steady lid-driven cavity (incompressible Navier-Stokes, Re = 100) in
//! first-order velocity-pressure-vorticity form:
//! C = u_x + v_y,
//! D_x = u u_x + v u_y + p_x + (1/Re) w_y,
//! D_y = u v_x + v v_y + p_y - (1/Re) w_x,
//! F = v_x - u_y - w.
//!
//! The lid y=1 moves with u = 1; the other walls are no-slip. The pressure
//! level is anchored by the extra constraint point p(0,0) = 0, which joins
//! the boundary family with its own multiplier. No closed-form solution;
//! accuracy is judged against published centerline data.

use super::{point_constant, DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{boundary_points, BoxDomain, Face, PointSet};
use crate::tensor::Tensor;

pub struct LidCavity {
    reynolds: f64,
}

/// Tag of the pressure-anchor pseudo-face appended after the four walls.
pub const ANCHOR_TAG: usize = 4;

impl LidCavity {
    pub fn new(reynolds: f64) -> Result<Self, CoreError> {
        if reynolds <= 0.0 {
            return Err(CoreError::invalid("lid-cavity needs Re > 0"));
        }
        Ok(Self { reynolds })
    }
}

impl Problem for LidCavity {
    fn name(&self) -> &'static str {
        "lid-cavity"
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
        false
    }

    fn exact(&self, _p: &[f64]) -> Vec<f64> {
        panic!("lid-cavity has no closed-form solution; compare against benchmark data")
    }

    fn exact_d1(&self, _p: &[f64]) -> Vec<Vec<f64>> {
        panic!("lid-cavity has no closed-form solution")
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
        _pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        let (u, v) = (fe.value[0], fe.value[1]);
        let (u_x, u_y) = (fe.d1[0][0], fe.d1[0][1]);
        let (v_x, v_y) = (fe.d1[1][0], fe.d1[1][1]);
        let (p_x, p_y) = (fe.d1[2][0], fe.d1[2][1]);
        let w = fe.value[3];
        let (w_x, w_y) = (fe.d1[3][0], fe.d1[3][1]);
        let inv_re = 1.0 / self.reynolds;

        let conv_x = g.add(g.mul(u, u_x)?, g.mul(v, u_y)?)?;
        let dx = g.add(g.add(conv_x, p_x)?, g.scale(w_y, inv_re))?;
        let conv_y = g.add(g.mul(u, v_x)?, g.mul(v, v_y)?)?;
        let dy = g.sub(g.add(conv_y, p_y)?, g.scale(w_x, inv_re))?;
        let d = super::sum_squares(g, &[dx, dy])?;

        let f = g.sub(g.sub(v_x, u_y)?, w)?;
        let c = g.add(u_x, v_y)?;
        Ok(InteriorPhis { d, f: Some(g.powi(f, 2)), c: Some(g.powi(c, 2)) })
    }

    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let g = ev.graph;
        let fields = ev.values_at(&pts.coords)?;
        let tags = pts.tags.as_ref().ok_or_else(|| CoreError::invalid("untagged boundary"))?;
        let mask = |f: &dyn Fn(usize) -> bool| {
            g.constant(Tensor::column(
                &tags.iter().map(|t| if f(*t) { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
            ))
        };
        let mask_wall = mask(&|t| t != ANCHOR_TAG);
        let mask_anchor = mask(&|t| t == ANCHOR_TAG);
        // u target is 1 on the lid, 0 elsewhere
        let u_target = point_constant(g, pts, |_| 0.0);
        let u_target = {
            let lid: Vec<f64> = tags.iter().map(|t| if *t == 3 { 1.0 } else { 0.0 }).collect();
            let lid = g.constant(Tensor::column(&lid));
            g.add(u_target, lid)?
        };
        let u_gap = g.powi(g.sub(fields[0], u_target)?, 2);
        let v2 = g.powi(fields[1], 2);
        let p2 = g.powi(fields[2], 2);
        let walls = g.mul(mask_wall, g.add(u_gap, v2)?)?;
        let anchor = g.mul(mask_anchor, p2)?;
        g.add(walls, anchor)
    }

    /// Four walls plus the single pressure-anchor point at the origin.
    fn sample_boundary(&self, n_per_face: usize) -> Result<PointSet, CoreError> {
        let walls = boundary_points(&self.domain(), &self.faces(), n_per_face)?;
        let mut data = walls.coords.data().to_vec();
        let mut tags = walls.tags.clone().unwrap();
        data.extend_from_slice(&[0.0, 0.0]);
        tags.push(ANCHOR_TAG);
        let n = tags.len();
        let mut ps = PointSet::new(crate::sampling::Role::Boundary, Tensor::new(vec![n, 2], data)?);
        ps.tags = Some(tags);
        Ok(ps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Role;

    /// Analytic smoke fields: u=y, v=0, p=0, w=-1 satisfy D and F exactly.
    #[test]
    fn shear_flow_annihilates_momentum_and_vorticity() {
        let p = LidCavity::new(100.0).unwrap();
        let g = DiffGraph::new();
        let pts = PointSet::new(
            Role::Interior,
            Tensor::new(vec![2, 2], vec![0.5, 0.5, 0.2, 0.8]).unwrap(),
        );
        let col = |vals: &[f64]| g.constant(Tensor::column(vals));
        let n = pts.len();
        let fe = FieldsEval {
            value: vec![
                col(&pts.iter_points().map(|q| q[1]).collect::<Vec<_>>()), // u = y
                col(&vec![0.0; n]),                                        // v
                col(&vec![0.0; n]),                                        // p
                col(&vec![-1.0; n]),                                       // w = -1
            ],
            d1: vec![
                vec![col(&vec![0.0; n]), col(&vec![1.0; n])], // u_x, u_y
                vec![col(&vec![0.0; n]), col(&vec![0.0; n])],
                vec![col(&vec![0.0; n]), col(&vec![0.0; n])],
                vec![col(&vec![0.0; n]), col(&vec![0.0; n])],
            ],
            d2: vec![Vec::new(); 4],
        };
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        for phi in [phis.d, phis.f.unwrap(), phis.c.unwrap()] {
            assert!(g.with_value(phi, |t| t.data().iter().all(|v| v.abs() < 1e-18)));
        }
    }

    #[test]
    fn boundary_set_appends_anchor() {
        let p = LidCavity::new(100.0).unwrap();
        let ps = p.sample_boundary(8).unwrap();
        assert_eq!(ps.len(), 4 * 8 + 1);
        let tags = ps.tags.as_ref().unwrap();
        assert_eq!(*tags.last().unwrap(), ANCHOR_TAG);
        assert_eq!(ps.point(ps.len() - 1), &[0.0, 0.0]);
    }
}
