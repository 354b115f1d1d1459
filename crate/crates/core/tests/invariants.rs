//! Property tests for the spec-level invariants that hold across random
//! inputs: gradient linearity, layout round-trips, perturbation algebra,
//! Sobol containment, breakdown additivity, and norm scale properties.

use proptest::prelude::*;

use pdelab_core::autodiff::DiffGraph;
use pdelab_core::metrics::error_norms;
use pdelab_core::mlp::{
    init_xavier, make_filter_normalized_directions, GraphModel, MlpConfig, ParameterVector,
};
use pdelab_core::objectives::{
    build_loss, AlmState, DualHyper, FormulationState, MultiplierState, TrainingPoints,
};
use pdelab_core::problems::{by_name, Sampler};
use pdelab_core::sampling::{sobol_points, BoxDomain};
use pdelab_core::tensor::Tensor;

fn small_config(seed: u64) -> MlpConfig {
    MlpConfig::new(1, 2, 2, 6, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn parameter_gradient_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let config = small_config(seed);
        let params = init_xavier(&config);
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, &config, &params).unwrap();
        let x = g.constant(Tensor::column(&[0.1, 0.4, 0.9]));
        let out = model.forward(x).unwrap();
        let l1 = g.sum(g.powi(g.col(out, 0).unwrap(), 2));
        let l2 = g.mean(g.powi(g.col(out, 1).unwrap(), 2));
        let combo = g.add(g.scale(l1, a), g.scale(l2, b)).unwrap();
        let g1 = model.parameter_gradient(l1, &params).unwrap();
        let g2 = model.parameter_gradient(l2, &params).unwrap();
        let gc = model.parameter_gradient(combo, &params).unwrap();
        for i in 0..gc.len() {
            let manual = a * g1[i] + b * g2[i];
            prop_assert!((gc[i] - manual).abs() <= 1e-12 * manual.abs().max(1e-12) + 1e-15);
        }
    }

    #[test]
    fn flatten_round_trip(
        input_dim in 1usize..3,
        output_dim in 1usize..4,
        layers in 1usize..4,
        width in 1usize..9,
        seed in 0u64..500,
    ) {
        let config = MlpConfig::new(input_dim, output_dim, layers, width, seed).unwrap();
        let p = init_xavier(&config);
        let q = ParameterVector::from_flat(p.values().to_vec(), p.layout().to_vec()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn perturbation_algebra(seed in 0u64..500, e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
        let config = small_config(seed);
        let p = init_xavier(&config);
        let dirs = make_filter_normalized_directions(&p, seed ^ 0xabcd);
        // identity
        prop_assert_eq!(p.perturbed(&dirs, 0.0, 0.0), p.clone());
        // two half-steps along zeta equal one full step
        let two = p.perturbed(&dirs, e1 / 2.0, 0.0).perturbed(&dirs, e1 / 2.0, e2);
        let one = p.perturbed(&dirs, e1, e2);
        for (a, b) in two.values().iter().zip(one.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sobol_contained_and_offset_consistent(n in 1usize..200, skip in 0usize..64) {
        let domain = BoxDomain::new(vec![-2.0, 1.0], vec![3.0, 4.0]).unwrap();
        let ps = sobol_points(&domain, n, 2, skip).unwrap();
        prop_assert_eq!(ps.len(), n);
        for p in ps.iter_points() {
            prop_assert!(domain.contains(p));
        }
        // skipping k then taking 1 equals taking k+1 and reading the last
        let long = sobol_points(&domain, skip + 1, 2, 0).unwrap();
        let short = sobol_points(&domain, 1, 2, skip).unwrap();
        prop_assert_eq!(short.point(0), long.point(skip));
    }

    #[test]
    fn error_norm_scale_property(c in prop::sample::select(vec![-3.0f64, -0.5, 0.7, 2.0, 9.0])) {
        let u = [0.4, -1.1, 2.2, 0.05];
        let pred = [0.41, -1.0, 2.3, 0.02];
        let a = error_norms(&pred, &u).unwrap().relative_l2.unwrap();
        let su: Vec<f64> = u.iter().map(|v| c * v).collect();
        let sp: Vec<f64> = pred.iter().map(|v| c * v).collect();
        let b = error_norms(&sp, &su).unwrap().relative_l2.unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

/// Breakdown additivity across all formulations on a real problem: the total
/// must equal the sum of the five terms to 1e-12 relative.
#[test]
fn breakdown_additivity_all_formulations() {
    let problem = by_name("convection-diffusion", Some(0.5), None, None, None, false).unwrap();
    let config = MlpConfig::new(1, 2, 2, 8, 3).unwrap();
    let params = init_xavier(&config);
    let points = TrainingPoints {
        interior: problem.sample_interior(32, Sampler::Uniform).unwrap(),
        boundary: problem.sample_boundary(1).unwrap(),
        initial: None,
    };
    let targets = pdelab_core::objectives::supervised_targets(problem.as_ref(), &points).unwrap();

    let mut dual = MultiplierState::for_problem(problem.as_ref(), &points, DualHyper::default());
    // give the multipliers non-trivial values
    if let Some(f) = dual.f.as_mut() {
        for (i, l) in f.lambda.iter_mut().enumerate() {
            *l = 0.01 * i as f64;
        }
    }
    for (i, l) in dual.b.lambda.iter_mut().enumerate() {
        *l = 1.5 + i as f64;
    }
    let mut alm = AlmState::new(points.boundary.len(), 0, 4.0, 100.0);
    alm.lambda_b = vec![2.0, 0.5];

    let forms = vec![
        FormulationState::Supervised,
        FormulationState::Pinn { w_domain: 1.0, w_boundary: 1.0 },
        FormulationState::Pinn { w_domain: 2.5, w_boundary: 0.3 },
        FormulationState::PecannAlm(alm),
        FormulationState::LagrangeDual(dual),
    ];
    for form in forms {
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, &config, &params).unwrap();
        let (_, b) =
            build_loss(&g, &model, problem.as_ref(), &points, &form, Some(&targets)).unwrap();
        let sum = b.j_d + b.j_f + b.j_c + b.j_b + b.j_i;
        assert!(
            (b.total - sum).abs() <= 1e-12 * b.total.abs().max(1e-300),
            "{}: total {} vs parts {}",
            form.name(),
            b.total,
            sum
        );
    }
}

/// Weighted composite with weights (1, 1) is exactly the plain composite, and
/// (2, 1) doubles exactly the domain term.
#[test]
fn composite_weight_equivalences() {
    let problem = by_name("convection-diffusion", Some(0.5), None, None, None, false).unwrap();
    let config = MlpConfig::new(1, 2, 2, 8, 5).unwrap();
    let params = init_xavier(&config);
    let points = TrainingPoints {
        interior: problem.sample_interior(16, Sampler::Uniform).unwrap(),
        boundary: problem.sample_boundary(1).unwrap(),
        initial: None,
    };
    let eval = |w: (f64, f64)| {
        let g = DiffGraph::new();
        let model = GraphModel::new(&g, &config, &params).unwrap();
        let form = FormulationState::Pinn { w_domain: w.0, w_boundary: w.1 };
        let (_, b) = build_loss(&g, &model, problem.as_ref(), &points, &form, None).unwrap();
        b
    };
    let plain = eval((1.0, 1.0));
    let doubled = eval((2.0, 1.0));
    assert_eq!(plain.j_d * 2.0, doubled.j_d);
    assert_eq!(plain.j_b, doubled.j_b);
}

/// The dual loss with all multipliers at zero reduces to the domain
/// objective alone.
#[test]
fn dual_loss_gates_on_multipliers() {
    let problem = by_name("convection-diffusion", Some(0.5), None, None, None, false).unwrap();
    let config = MlpConfig::new(1, 2, 2, 8, 7).unwrap();
    let params = init_xavier(&config);
    let points = TrainingPoints {
        interior: problem.sample_interior(16, Sampler::Uniform).unwrap(),
        boundary: problem.sample_boundary(1).unwrap(),
        initial: None,
    };
    let state = MultiplierState::for_problem(problem.as_ref(), &points, DualHyper::default());
    let g = DiffGraph::new();
    let model = GraphModel::new(&g, &config, &params).unwrap();
    let form = FormulationState::LagrangeDual(state);
    let (_, b) = build_loss(&g, &model, problem.as_ref(), &points, &form, None).unwrap();
    assert_eq!(b.total, b.j_d);
    assert_eq!(b.j_f + b.j_c + b.j_b + b.j_i, 0.0);
}

/// Gradients of every formulation match central finite differences of the
/// loss on a two-layer toy network.
#[test]
fn formulation_gradients_match_finite_differences() {
    let problem = by_name("convection-diffusion", Some(0.3), None, None, None, false).unwrap();
    let config = MlpConfig::new(1, 2, 2, 5, 11).unwrap();
    let params = init_xavier(&config);
    let points = TrainingPoints {
        interior: problem.sample_interior(8, Sampler::Uniform).unwrap(),
        boundary: problem.sample_boundary(1).unwrap(),
        initial: None,
    };
    let targets = pdelab_core::objectives::supervised_targets(problem.as_ref(), &points).unwrap();
    let mut dual = MultiplierState::for_problem(problem.as_ref(), &points, DualHyper::default());
    for l in dual.b.lambda.iter_mut() {
        *l = 0.7;
    }
    if let Some(f) = dual.f.as_mut() {
        for l in f.lambda.iter_mut() {
            *l = 0.3;
        }
    }
    let mut alm = AlmState::new(points.boundary.len(), 0, 2.0, 100.0);
    alm.lambda_b = vec![0.4, 1.1];

    let forms = vec![
        FormulationState::Supervised,
        FormulationState::Pinn { w_domain: 1.3, w_boundary: 0.8 },
        FormulationState::PecannAlm(alm),
        FormulationState::LagrangeDual(dual),
    ];
    for form in forms {
        let loss_of = |theta: &ParameterVector| -> f64 {
            pdelab_core::objectives::evaluate_loss(
                &config,
                theta,
                problem.as_ref(),
                &points,
                &form,
                Some(&targets),
            )
            .unwrap()
            .total
        };
        let (_, grad, _) = pdelab_core::objectives::loss_and_grad(
            &config,
            &params,
            problem.as_ref(),
            &points,
            &form,
            Some(&targets),
        )
        .unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut vp = params.values().to_vec();
            vp[i] += h;
            let plus = loss_of(&params.with_values(vp.clone()).unwrap());
            vp[i] -= 2.0 * h;
            let minus = loss_of(&params.with_values(vp).unwrap());
            let fd = (plus - minus) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() <= 1e-5 * grad[i].abs().max(fd.abs()) + 1e-9,
                "{}: component {i}: {} vs {fd}",
                form.name(),
                grad[i]
            );
        }
    }
}
