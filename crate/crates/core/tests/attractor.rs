use nicholson_core::attractor::{compute_mesh, parameter_study, pullback_point, PullbackConfig, StudyAxis};
use nicholson_core::conditions::{compute_bounds, Sampling};
use nicholson_core::dde::{integrate, History, SolverConfig};
use nicholson_core::{CoeffValues, Nonlinearity, ParamSet, SystemSpec, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> SystemSpec {
    SystemSpec::two_patch(ParamSet::default())
}

fn scalar(d: f64, beta: f64, c: f64, r: f64) -> SystemSpec {
    SystemSpec::constant(
        CoeffValues {
            d: vec![d],
            a: vec![vec![0.0]],
            beta: vec![beta],
            c: vec![c],
        },
        vec![r],
        Nonlinearity::NicholsonExp,
    )
    .unwrap()
}

#[test]
fn reference_point_is_inside_the_box_and_stable_under_refinement() {
    let spec = reference();
    let phi = compute_bounds(&spec, &Sampling::ClosedForm).phi_bar;
    let cfg = PullbackConfig::default();
    let base = pullback_point(&spec, TorusPoint::ORIGIN, &cfg, &SolverConfig::default()).unwrap();
    assert!(base.t_final <= 200.0);
    for (v, b) in base.value.iter().zip(&phi) {
        assert!(*v > 0.0 && *v <= *b);
    }
    let fine = pullback_point(
        &spec,
        TorusPoint::ORIGIN,
        &cfg.clone().with_tol(5e-7),
        &SolverConfig::default().with_h(0.005),
    )
    .unwrap();
    for (a, b) in base.value.iter().zip(&fine.value) {
        assert!((a - b).abs() < 1e-5, "{:?} vs {:?}", base.value, fine.value);
    }
    assert!(base.segment_gap.unwrap() < 1e-5);
}

#[test]
fn autonomous_scalar_reaches_closed_form_equilibrium() {
    let e = std::f64::consts::E;
    for (d, beta, c, r) in [(1.0, e, 1.0, 1.0), (1.0, e, 0.5, 2.0), (2.0, 4.0, 1.0, 1.0)] {
        let p = pullback_point(
            &scalar(d, beta, c, r),
            TorusPoint::new(0.7, 3.0),
            &PullbackConfig::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        let y_star = (beta / d).ln() / c;
        assert!((p.value[0] - y_star).abs() < 1e-5, "{} vs {y_star}", p.value[0]);
    }
}

#[test]
fn non_persistent_system_has_trivial_pullback_limit() {
    let p = pullback_point(
        &scalar(2.0, 0.5, 1.0, 2.0),
        TorusPoint::ORIGIN,
        &PullbackConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(p.trivial);
    assert!(p.value[0].abs() < 1e-6);
}

#[test]
fn coarse_mesh_agrees_under_step_halving() {
    let spec = reference();
    let cfg = PullbackConfig::default();
    let a = compute_mesh(&spec, 4, &cfg, &SolverConfig::default(), 1).unwrap();
    let b = compute_mesh(&spec, 4, &cfg, &SolverConfig::default().with_h(0.005), 1).unwrap();
    for (x, y) in a.nodes.iter().zip(&b.nodes) {
        let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
        for (u, v) in x.value.iter().zip(&y.value) {
            assert!((u - v).abs() < 10.0 * cfg.tol, "{u} vs {v}");
        }
    }
}

#[test]
fn mesh_does_not_depend_on_worker_count() {
    let spec = reference();
    let cfg = PullbackConfig::default();
    let one = compute_mesh(&spec, 3, &cfg, &SolverConfig::default(), 1).unwrap();
    let three = compute_mesh(&spec, 3, &cfg, &SolverConfig::default(), 3).unwrap();
    assert_eq!(one, three);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    one.write_csv(&mut x).unwrap();
    three.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
    assert!(one.conditions_hold);
    let phi = compute_bounds(&spec, &Sampling::ClosedForm).phi_bar;
    assert!(one.invariants(&phi, 10.0 * cfg.tol).hold());
}

#[test]
fn forward_solutions_approach_the_pullback_section() {
    let spec = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t = 300.0;
    let target = pullback_point(
        &spec,
        TorusPoint::ORIGIN.advance(t),
        &PullbackConfig::default(),
        &SolverConfig::default(),
    )
    .unwrap();
    for _ in 0..5 {
        let (a0, a1, w) = (rng.gen_range(0.05..3.0), rng.gen_range(0.05..3.0), rng.gen_range(0.1..5.0));
        let history = History::function(2, move |s, i| {
            let base = if i == 0 { a0 } else { a1 };
            base * (1.0 + 0.5 * (w * s).sin())
        });
        let traj = integrate(&spec.at(TorusPoint::ORIGIN), history, t, &SolverConfig::default()).unwrap();
        for (u, v) in traj.last_state().iter().zip(&target.value) {
            assert!((u - v).abs() < 1e-4, "{u} vs {v}");
        }
    }
}

#[test]
fn small_study_reports_orders() {
    let report = parameter_study(
        &reference(),
        StudyAxis::Mortality,
        &[0.7, 0.85, 1.0],
        2,
        &PullbackConfig::default(),
        &SolverConfig::default(),
        1,
    )
    .unwrap();
    assert_eq!(report.entries.len(), 3);
    assert_eq!(report.pairs.len(), 2);
    assert!(report.to_string().contains("result: "));
    assert!(report.entries.iter().all(|e| e.mesh.conditions_hold));
}
