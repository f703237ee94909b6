//! Kronecker flow on the two-torus.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt;

/// Point `(theta1, theta2)` on the torus, both angles kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    theta1: f64,
    theta2: f64,
}

fn reduce(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint {
        theta1: 0.0,
        theta2: 0.0,
    };

    pub fn new(theta1: f64, theta2: f64) -> Self {
        TorusPoint {
            theta1: reduce(theta1),
            theta2: reduce(theta2),
        }
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// The flow `σ_t(θ) = (θ1 + t, θ2 + √2 t) mod 2π`. `t` may be negative.
    pub fn advance(&self, t: f64) -> Self {
        TorusPoint::new(self.theta1 + t, self.theta2 + SQRT_2 * t)
    }

    /// Uniform `n × n` grid, node `(i, j)` at `(2πi/n, 2πj/n)`, row-major in `i`.
    pub fn uniform_grid(n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(TorusPoint::new(
                    TAU * (i as f64) / (n as f64),
                    TAU * (j as f64) / (n as f64),
                ));
            }
        }
        out
    }

    /// Distance on the torus (sup over both angles of the wrapped difference).
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let wrap = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d)
        };
        wrap(self.theta1, other.theta1).max(wrap(self.theta2, other.theta2))
    }
}

impl Default for TorusPoint {
    fn default() -> Self {
        TorusPoint::ORIGIN
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.theta1, self.theta2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_time_is_identity() {
        let p = TorusPoint::ORIGIN.advance(0.0);
        assert_eq!(p, TorusPoint::ORIGIN);
    }

    #[test]
    fn full_turn_moves_second_angle_by_sqrt2_excess() {
        let p = TorusPoint::ORIGIN.advance(TAU);
        assert!(p.theta1() < 1e-12 || (TAU - p.theta1()) < 1e-12);
        let expected = TAU * (SQRT_2 - 1.0);
        assert!((p.theta2() - expected).abs() < 1e-12);
    }

    #[test]
    fn backward_then_forward_returns() {
        let p = TorusPoint::new(1.0, 1.0);
        let q = p.advance(-5.0).advance(5.0);
        assert!((q.theta1() - 1.0).abs() < 1e-12);
        assert!((q.theta2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_negative_angle_reduces_below_two_pi() {
        let p = TorusPoint::new(-1e-18, -0.0);
        assert!(p.theta1() < TAU && p.theta1() >= 0.0);
        assert!(p.theta2() < TAU && p.theta2() >= 0.0);
    }

    #[test]
    fn grid_layout() {
        let g = TorusPoint::uniform_grid(4);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], TorusPoint::ORIGIN);
        assert!((g[1].theta2() - TAU / 4.0).abs() < 1e-15);
        assert!((g[4].theta1() - TAU / 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn flow_property(a in 0.0..TAU, b in 0.0..TAU, s in -100.0..100.0f64, t in -100.0..100.0f64) {
            let p = TorusPoint::new(a, b);
            let lhs = p.advance(s).advance(t);
            let rhs = p.advance(s + t);
            prop_assert!(lhs.distance(&rhs) < 1e-9);
        }

        #[test]
        fn components_stay_reduced(a in -1e4..1e4f64, b in -1e4..1e4f64) {
            let p = TorusPoint::new(a, b);
            prop_assert!((0.0..TAU).contains(&p.theta1()));
            prop_assert!((0.0..TAU).contains(&p.theta2()));
        }
    }
}
