use std::sync::Arc;

use nicholson_core::conditions::{compute_bounds, Sampling};
use nicholson_core::dde::{
    bogacki_shampine, gauss_legendre, integrate, integrate_explicit_rk23, History, LinearDelaySystem, Method,
    SolverConfig,
};
use nicholson_core::spectral::linearize_at_zero;
use nicholson_core::{ParamSet, SystemSpec, TorusPoint};
use proptest::prelude::*;

/// Polynomial with coefficients in increasing degree.
#[derive(Clone, Debug)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    fn antiderivative(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend(self.0.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
        Poly(out)
    }

    /// `p(t − 1)`
    fn shift_back(&self) -> Poly {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.0.iter().enumerate() {
            // c·(t − 1)^k
            let mut binom = 1.0;
            for j in 0..=k {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                out[j] += c * binom * sign;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Poly(out)
    }

    fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n)
            .map(|k| self.0.get(k).unwrap_or(&0.0) + other.0.get(k).unwrap_or(&0.0))
            .collect())
    }

    /// `R` with `(R e^t)' = p e^t`, i.e. `R = p − p' + p'' − …`
    fn exp_antiderivative(&self) -> Poly {
        let mut out = Poly(vec![0.0]);
        let mut d = self.clone();
        let mut sign = 1.0;
        while !d.0.is_empty() {
            out = out.add(&d.scale(sign));
            d = d.derivative();
            sign = -sign;
        }
        out
    }
}

/// Piecewise exact solution of `y' = −y + b·y(t − 1)`, `y ≡ 1` on `[−1, 0]`,
/// as `y = A(t) + B(t)·e^{−t}` on each unit interval.
fn method_of_steps(b: f64, t: f64) -> f64 {
    let e = std::f64::consts::E;
    let (mut a, mut bb) = (Poly(vec![1.0]), Poly(vec![0.0]));
    let mut y_k = 1.0;
    let mut k = 0.0;
    loop {
        // forcing b·y(s − 1) = b·A(s−1) + b·e·B(s−1)·e^{−s}
        let fa = a.shift_back().scale(b);
        let fb = bb.shift_back().scale(b * e);
        let r = fa.exp_antiderivative();
        let s = fb.antiderivative();
        let new_a = r.clone();
        let c0 = (y_k - r.eval(k)) * k.exp() - s.eval(k);
        let new_b = s.add(&Poly(vec![c0]));
        let end = k + 1.0;
        if t <= end {
            return new_a.eval(t) + new_b.eval(t) * (-t).exp();
        }
        y_k = new_a.eval(end) + new_b.eval(end) * (-end).exp();
        a = new_a;
        bb = new_b;
        k = end;
    }
}

#[test]
fn method_of_steps_oracle_matches_frozen_values() {
    // exact symbolic values of the same problem
    assert!((method_of_steps(0.5, 1.0) - 0.683_939_720_585_721_2).abs() < 1e-15);
    assert!((method_of_steps(0.5, 2.0) - 0.501_607_362_204_027_5).abs() < 1e-14);
    assert!((method_of_steps(0.5, 3.0) - 0.366_357_321_977_467_2).abs() < 1e-14);
}

fn slope(method: Method) -> f64 {
    let sys = LinearDelaySystem::scalar(-1.0, 0.5, 1.0);
    let exact = method_of_steps(0.5, 3.0);
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let cfg = SolverConfig::default().with_h(h).with_method(method);
            let traj = integrate(&sys, History::constant(1.0, 1), 3.0, &cfg).unwrap();
            (traj.last_state()[0] - exact).abs()
        })
        .collect();
    // least-squares slope of log err against log h
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn gauss_legendre_is_fourth_order_on_delay_problem() {
    let s = slope(Method::GaussLegendre2);
    assert!((s - 4.0).abs() <= 0.3, "slope {s}");
}

#[test]
fn bogacki_shampine_is_third_order_on_delay_problem() {
    let s = slope(Method::ExplicitRk23);
    assert!((s - 3.0).abs() <= 0.3, "slope {s}");
}

#[test]
fn explicit_decay_error_ratio_near_eight() {
    let sys = LinearDelaySystem::scalar(-1.0, 0.0, 1.0);
    let err = |h: f64| {
        let traj = integrate_explicit_rk23(&sys, History::constant(1.0, 1), 1.0, &SolverConfig::default().with_h(h))
            .unwrap();
        (traj.last_state()[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 8.0).abs() < 1.0, "ratio {ratio}");
}

fn iterates(method: Method, lambda: f64, h: f64, steps: usize) -> Vec<f64> {
    let sys = LinearDelaySystem::scalar(lambda, 0.0, 1.0);
    let cfg = SolverConfig::default().with_h(h).with_method(method);
    let traj = integrate(&sys, History::constant(1.0, 1), h * steps as f64, &cfg).unwrap();
    (0..traj.len()).map(|k| traj.state(k)[0]).collect()
}

#[test]
fn stiff_contrast_at_h_lambda_minus_ten() {
    let gl = iterates(Method::GaussLegendre2, -1000.0, 0.01, 10);
    let bs = iterates(Method::ExplicitRk23, -1000.0, 0.01, 10);
    for w in gl.windows(2) {
        assert!(w[1].abs() < w[0].abs());
        assert!((w[1] / w[0] - gauss_legendre::stability(-10.0)).abs() < 1e-9);
    }
    for w in bs.windows(2) {
        assert!(w[1].abs() > w[0].abs());
        assert!((w[1] / w[0] - bogacki_shampine::stability(-10.0)).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_contracts_on_left_half_line(z in -1e4f64..-1e-3) {
        let h = 0.01;
        let ys = iterates(Method::GaussLegendre2, z / h, h, 3);
        for w in ys.windows(2) {
            prop_assert!(w[1].abs() < w[0].abs());
        }
        prop_assert!(gauss_legendre::stability(z).abs() < 1.0);
    }

    #[test]
    fn explicit_grows_beyond_its_stability_interval(z in -50f64..-2.6) {
        prop_assert!(bogacki_shampine::stability(z).abs() > 1.0);
        let ys = iterates(Method::ExplicitRk23, z / 0.01, 0.01, 3);
        for w in ys.windows(2) {
            prop_assert!(w[1].abs() > w[0].abs());
        }
    }
}

fn reference_spec() -> SystemSpec {
    SystemSpec::two_patch(ParamSet::default())
}

#[test]
fn semicocycle_consistency() {
    let spec = reference_spec();
    let theta = TorusPoint::new(0.3, 2.0);
    let cfg = SolverConfig::default();
    let (s, u) = (3.7, 5.0);
    let whole = integrate(&spec.at(theta), History::constant(1.0, 2), s + u, &cfg).unwrap();
    let first = Arc::new(integrate(&spec.at(theta), History::constant(1.0, 2), s, &cfg).unwrap());
    let restart = History::Segment {
        trajectory: first.clone(),
        at: first.end_time(),
    };
    let second = integrate(&spec.at(theta.advance(s)), restart, u, &cfg).unwrap();
    for t in [0.5, 2.0, 5.0] {
        let a = whole.eval(s + t).unwrap();
        let b = second.eval(t).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-7, "t = {t}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn population_runs_stay_in_invariant_box() {
    let spec = reference_spec();
    let phi_bar = compute_bounds(&spec, &Sampling::ClosedForm).phi_bar;
    for h in [0.05, 0.01] {
        let traj = integrate(
            &spec.at(TorusPoint::ORIGIN),
            History::constant(1.0, 2),
            1000.0,
            &SolverConfig::default().with_h(h),
        )
        .unwrap();
        for k in 0..traj.len() {
            for (i, &v) in traj.state(k).iter().enumerate() {
                assert!(v >= 0.0, "negative state at node {k}");
                assert!(v <= phi_bar[i] + 1e-9, "component {i} = {v} above {}", phi_bar[i]);
            }
        }
    }
}

#[test]
fn integration_is_deterministic() {
    let spec = reference_spec();
    let run = || {
        integrate(
            &spec.at(TorusPoint::new(1.0, 5.0)),
            History::function(2, |s, i| 1.0 + 0.1 * (s + i as f64).sin()),
            50.0,
            &SolverConfig::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    for k in 0..a.len() {
        assert_eq!(a.state(k), b.state(k));
        assert_eq!(a.derivative(k), b.derivative(k));
    }
}

#[test]
fn linearized_system_from_shifted_start_is_bounded() {
    // the interval [−20, 2π] shifted to [0, 20 + 2π]
    let lin = linearize_at_zero(&reference_spec());
    let t0 = -20.0;
    let traj = integrate(
        &lin.at(TorusPoint::ORIGIN.advance(t0)),
        History::constant(1.0, 2),
        20.0 + 2.0 * std::f64::consts::PI,
        &SolverConfig::default(),
    )
    .unwrap();
    // growth stays within the exponent bound e^{(λ + 0.5) t}
    let bound = (1.1 * traj.end_time()).exp();
    for k in 0..traj.len() {
        for &v in traj.state(k) {
            assert!(v.is_finite() && v > 0.0 && v < bound);
        }
    }
}
