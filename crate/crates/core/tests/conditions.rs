use nicholson_core::conditions::{check_assumptions, check_invariant_zone, compute_bounds, Sampling};
use nicholson_core::{ParamSet, SystemSpec, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn study_parameters() -> Vec<ParamSet> {
    let mut out = Vec::new();
    for a in [0.8, 1.0, 1.2] {
        out.push(ParamSet::new(1.0, a, a).unwrap());
    }
    for a12 in [0.01, 0.5, 1.0] {
        out.push(ParamSet::new(1.0, a12, 1.0).unwrap());
    }
    for mu in [0.7, 0.85, 1.0, 3.0, 9.0, 27.0] {
        out.push(ParamSet::new(mu, 1.0, 1.0).unwrap());
    }
    out
}

#[test]
fn hypotheses_and_zone_hold_pointwise_at_random_orbit_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tau = 2.0 * std::f64::consts::PI;
    for params in study_parameters() {
        let spec = SystemSpec::two_patch(params);
        let bounds = compute_bounds(&spec, &Sampling::ClosedForm);
        for _ in 0..10_000 {
            let theta = TorusPoint::new(rng.gen_range(0.0..tau), rng.gen_range(0.0..tau));
            let t = rng.gen_range(-1e4..1e4);
            let cv = spec.coefficients(theta, t);
            for i in 0..2 {
                assert!(cv.c[i] > 0.0 && cv.d[i] > 0.0 && cv.beta[i] > 0.0);
                assert_eq!(cv.a[i][i], 0.0);
                let outflow: f64 = (0..2).map(|j| cv.a[j][i]).sum();
                assert!(cv.d[i] - outflow > 0.0, "{params:?} at {theta} t={t}");
                // pointwise values inside the closed-form bounds
                assert!(bounds.c_minus[i] <= cv.c[i] && cv.c[i] <= bounds.c_plus[i]);
                assert!(cv.beta[i] <= bounds.beta_plus[i]);
                // zone inequality pointwise
                let j = 1 - i;
                let denom = cv.d[i] - cv.a[i][j] * bounds.c_plus[i] / bounds.c_plus[j];
                assert!(denom > 0.0);
                let mid = cv.beta[i] / denom;
                assert!(mid > 0.0 && mid <= (bounds.c_minus[i] / bounds.c_plus[i]).exp());
            }
            assert!(cv.a[0][1] >= 0.0 && cv.a[1][0] >= 0.0);
            assert!(cv.a[0][1] <= bounds.a_plus[0][1] && cv.a[1][0] <= bounds.a_plus[1][0]);
        }
    }
}

#[test]
fn study_parameters_pass_both_checks_in_both_modes() {
    for params in study_parameters() {
        let spec = SystemSpec::two_patch(params);
        for sampling in [Sampling::ClosedForm, Sampling::Grid(Default::default())] {
            let report = check_assumptions(&spec, &sampling);
            assert!(report.all_hold(), "{params:?}\n{report}");
            let bounds = compute_bounds(&spec, &sampling);
            let zone = check_invariant_zone(&spec, &bounds, &sampling).unwrap();
            assert!(zone.holds(), "{params:?}\n{zone}");
        }
    }
}

#[test]
fn refinement_sequence_approaches_closed_form() {
    use nicholson_core::conditions::TimeGrid;
    let spec = SystemSpec::two_patch(ParamSet::default());
    let exact = compute_bounds(&spec, &Sampling::ClosedForm);
    let mut previous_gap = f64::INFINITY;
    for step in [0.04, 0.02, 0.01] {
        let b = compute_bounds(&spec, &Sampling::Grid(TimeGrid::with_step(step)));
        let gap = (b.c_plus[1] - exact.c_plus[1])
            .abs()
            .max((b.a_plus[1][0] - exact.a_plus[1][0]).abs())
            .max((b.c_minus[1] - exact.c_minus[1]).abs());
        // sampled extrema never leave the closed-form interval
        assert!(b.c_plus[1] <= exact.c_plus[1] && b.c_minus[1] >= exact.c_minus[1]);
        assert!(gap <= previous_gap + 1e-12, "step {step}: {gap} after {previous_gap}");
        previous_gap = gap;
    }
    assert!(previous_gap < 1e-3);
}
