//! Convection-dominated convection-diffusion on (0, 1):
//! u' + alpha u'' = 0 with u(0) = 0.5, u(1) = -0.5.
//!
//! The first-order system introduces the flux sigma = -alpha u', giving
//! D = u' - sigma' and F = sigma + alpha u'. (Substituting the flux into the
//! strong form yields the minus sign in D; only that sign annihilates the
//! exact solution.) The `second_order` flag instead trains the strong form
//! directly on a single-output network.

use super::{DerivNeed, Evaluator, FieldsEval, InteriorPhis, Problem};
use crate::autodiff::{DiffGraph, NodeId};
use crate::error::CoreError;
use crate::sampling::{BoxDomain, Face, PointSet};
use crate::tensor::Tensor;

pub struct ConvectionDiffusion {
    alpha: f64,
    second_order: bool,
}

impl ConvectionDiffusion {
    pub fn new(alpha: f64, second_order: bool) -> Result<Self, CoreError> {
        if alpha <= 0.0 {
            return Err(CoreError::invalid("convection-diffusion needs alpha > 0"));
        }
        Ok(Self { alpha, second_order })
    }

    /// e^{-x/alpha} / (1 - e^{-1/alpha}); the exact u is this minus 1/2 and
    /// the exact flux sigma equals it directly.
    fn layer_term(&self, x: f64) -> f64 {
        (-x / self.alpha).exp() / (1.0 - (-1.0 / self.alpha).exp())
    }

    fn boundary_target(tag: usize) -> f64 {
        if tag == 0 {
            0.5
        } else {
            -0.5
        }
    }
}

impl Problem for ConvectionDiffusion {
    fn name(&self) -> &'static str {
        "convection-diffusion"
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        if self.second_order {
            1
        } else {
            2
        }
    }

    fn unknown_names(&self) -> Vec<&'static str> {
        if self.second_order {
            vec!["u"]
        } else {
            vec!["u", "sigma"]
        }
    }

    fn domain(&self) -> BoxDomain {
        BoxDomain::new(vec![0.0], vec![1.0]).expect("static box")
    }

    fn deriv_need(&self) -> DerivNeed {
        if self.second_order {
            DerivNeed::Second
        } else {
            DerivNeed::First
        }
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("alpha", self.alpha)]
    }

    fn families(&self) -> super::FamilyPresence {
        super::FamilyPresence { f: !self.second_order, c: false, i: false }
    }

    fn has_exact(&self) -> bool {
        true
    }

    fn exact(&self, p: &[f64]) -> Vec<f64> {
        let e = self.layer_term(p[0]);
        if self.second_order {
            vec![e - 0.5]
        } else {
            vec![e - 0.5, e]
        }
    }

    fn exact_d1(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let de = -self.layer_term(p[0]) / self.alpha;
        if self.second_order {
            vec![vec![de]]
        } else {
            vec![vec![de], vec![de]]
        }
    }

    fn exact_d2(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let d2 = self.layer_term(p[0]) / (self.alpha * self.alpha);
        if self.second_order {
            vec![vec![d2]]
        } else {
            vec![vec![d2], vec![d2]]
        }
    }

    fn faces(&self) -> Vec<Face> {
        vec![
            Face { axis: 0, high: false, name: "left" },
            Face { axis: 0, high: true, name: "right" },
        ]
    }

    fn interior_phis(
        &self,
        g: &DiffGraph,
        _pts: &PointSet,
        fe: &FieldsEval,
    ) -> Result<InteriorPhis, CoreError> {
        if self.second_order {
            // D = u' + alpha u''
            let d = g.add(fe.d1[0][0], g.scale(fe.d2[0][0], self.alpha))?;
            return Ok(InteriorPhis { d: g.powi(d, 2), f: None, c: None });
        }
        let (u_x, s, s_x) = (fe.d1[0][0], fe.value[1], fe.d1[1][0]);
        let d = g.sub(u_x, s_x)?;
        let f = g.add(s, g.scale(u_x, self.alpha))?;
        Ok(InteriorPhis { d: g.powi(d, 2), f: Some(g.powi(f, 2)), c: None })
    }

    fn boundary_phi(&self, ev: &Evaluator, pts: &PointSet) -> Result<NodeId, CoreError> {
        let fields = ev.values_at(&pts.coords)?;
        let tags = pts.tags.as_ref().ok_or_else(|| CoreError::invalid("untagged boundary"))?;
        let targets: Vec<f64> = tags.iter().map(|t| Self::boundary_target(*t)).collect();
        let target = ev.graph.constant(Tensor::column(&targets));
        let r = ev.graph.sub(fields[0], target)?;
        Ok(ev.graph.powi(r, 2))
    }

    fn boundary_residual_exact(&self, p: &[f64], tag: usize) -> Vec<f64> {
        vec![self.exact(p)[0] - Self::boundary_target(tag)]
    }

    /// Uniform collocation on the closed mesh, endpoints included. With the
    /// endpoints excluded the discrete system is degenerate: the mirrored
    /// profile (plateau +1/2, layer at x=1) satisfies every residual between
    /// mesh points, and training can lock onto it. A mesh point at each end
    /// makes the mirror layer pay an O(1/alpha) residual while the true
    /// layer stays representable through the flux pair.
    fn sample_interior(
        &self,
        n: usize,
        sampler: super::Sampler,
    ) -> Result<PointSet, CoreError> {
        match sampler {
            super::Sampler::Uniform => {
                crate::sampling::uniform_grid(&self.domain(), n, 1)
            }
            other => {
                let domain = self.domain();
                let dim = domain.dim();
                match other {
                    super::Sampler::Sobol { skip } => {
                        crate::sampling::sobol_points(&domain, n, dim, skip)
                    }
                    super::Sampler::Uniform => unreachable!(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::analytic_fields;

    #[test]
    fn exact_solution_hits_paper_boundary_values() {
        let p = ConvectionDiffusion::new(1e-6, false).unwrap();
        assert_eq!(p.exact(&[0.0])[0], 0.5);
        assert_eq!(p.exact(&[1.0])[0], -0.5);
    }

    #[test]
    fn closed_form_value_at_half_for_alpha_half() {
        let p = ConvectionDiffusion::new(0.5, false).unwrap();
        let expect = (-1.0f64).exp() / (1.0 - (-2.0f64).exp()) - 0.5;
        assert!((p.exact(&[0.5])[0] - expect).abs() < 1e-15);
        assert!((expect + 0.0746).abs() < 1e-4);
    }

    #[test]
    fn residuals_vanish_on_exact_fields() {
        let p = ConvectionDiffusion::new(0.1, false).unwrap();
        let g = DiffGraph::new();
        let pts = PointSet::new(
            crate::sampling::Role::Interior,
            Tensor::column(&[0.3, 0.5, 0.77]),
        );
        let fe = analytic_fields(&g, &p, &pts);
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        assert!(g.with_value(phis.d, |t| t.data().iter().all(|v| v.abs() < 1e-16)));
        assert!(g.with_value(phis.f.unwrap(), |t| t.data().iter().all(|v| v.abs() < 1e-16)));
    }

    #[test]
    fn second_order_strong_form_vanishes_too() {
        let p = ConvectionDiffusion::new(0.1, true).unwrap();
        let g = DiffGraph::new();
        let pts =
            PointSet::new(crate::sampling::Role::Interior, Tensor::column(&[0.25, 0.6]));
        let fe = analytic_fields(&g, &p, &pts);
        let phis = p.interior_phis(&g, &pts, &fe).unwrap();
        assert!(g.with_value(phis.d, |t| t.data().iter().all(|v| v.abs() < 1e-12)));
    }
}
