//! Structural hypotheses on the coefficients, their extrema, and the
//! invariant-zone inequality
//!
//! `0 < β_i / (d_i − Σ_{j≠i} a_ij c_i⁺/c_j⁺) ≤ exp(c_i⁻/c_i⁺)`.
//!
//! Two evaluation modes are offered. [`Sampling::ClosedForm`] evaluates at the
//! four corners of the range box of the shape values `(p, q)`. Every checked
//! quantity is affine (or a ratio of affine forms) in `(p, q)`, so the corner
//! values are its exact extrema; the orbit of the Kronecker flow is dense in
//! the torus, so those extrema are the sup/inf over time. [`Sampling::Grid`]
//! walks a time grid along one orbit and is only approximate.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::ModelError;
use crate::model::{CoeffValues, SystemSpec};
use crate::torus::TorusPoint;

/// Uniform time grid `t = 0, δ, 2δ, …, t_end` along the orbit of `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub theta: TorusPoint,
    pub t_end: f64,
    pub step: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            theta: TorusPoint::ORIGIN,
            t_end: 200.0 * TAU,
            step: 0.01,
        }
    }
}

impl TimeGrid {
    pub fn with_step(step: f64) -> Self {
        TimeGrid {
            step,
            ..TimeGrid::default()
        }
    }

    fn len(&self) -> usize {
        (self.t_end / self.step).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    ClosedForm,
    Grid(TimeGrid),
}

impl Sampling {
    pub fn is_approximate(&self) -> bool {
        matches!(self, Sampling::Grid(_))
    }
}

/// Where an extreme value was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Time along the sampled orbit.
    Time(f64),
    /// Corner of the `(p, q)` range box.
    Corner { p: f64, q: f64 },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Time(t) => write!(f, "t={t}"),
            Location::Corner { p, q } => write!(f, "(p,q)=({p},{q})"),
        }
    }
}

fn for_each_sample(spec: &SystemSpec, sampling: &Sampling, mut f: impl FnMut(Location, &CoeffValues)) {
    match sampling {
        Sampling::ClosedForm => {
            let (ps, qs) = spec.shapes();
            let corners = |(lo, hi): (f64, f64)| if lo == hi { vec![lo] } else { vec![lo, hi] };
            for p in corners(ps.range()) {
                for q in corners(qs.range()) {
                    f(Location::Corner { p, q }, &spec.affine().eval(p, q));
                }
            }
        }
        Sampling::Grid(grid) => {
            for k in 0..grid.len() {
                let t = k as f64 * grid.step;
                f(Location::Time(t), &spec.coefficients(grid.theta, t));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// coefficients almost periodic
    A1,
    /// `d_i ≥ d0 > 0`
    A2,
    /// `a_ij ≥ 0`, `a_ii ≡ 0`
    A3,
    /// `β_i > 0`
    A4,
    /// `c_i ≥ c0 > 0`
    A5,
    /// `d_i − Σ_j a_ji > 0`
    A6,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Hypothesis::A1 => 1,
            Hypothesis::A2 => 2,
            Hypothesis::A3 => 3,
            Hypothesis::A4 => 4,
            Hypothesis::A5 => 5,
            Hypothesis::A6 => 6,
        };
        write!(f, "(a{n})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub patch: usize,
    pub location: Location,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub holds: bool,
    /// Smallest value of the checked quantity and where it occurs; `None` for (a1).
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub approximate: bool,
    pub checks: Vec<HypothesisCheck>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failed(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn get(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }

    /// First violated hypothesis as an error.
    pub fn ensure(&self) -> Result<(), ModelError> {
        match self.failed().next() {
            None => Ok(()),
            Some(c) => {
                let w = c.witness.expect("only (a1) lacks a witness and it always holds");
                Err(ModelError::HypothesisViolated {
                    hypothesis: c.hypothesis,
                    patch: w.patch,
                    location: w.location,
                    value: w.value,
                })
            }
        }
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.approximate { "sampled" } else { "closed-form" };
        writeln!(f, "hypotheses ({mode}):")?;
        for c in &self.checks {
            let verdict = if c.holds { "ok" } else { "FAILED" };
            match (&c.hypothesis, &c.witness) {
                (Hypothesis::A1, _) | (_, None) => {
                    writeln!(f, "  {} {verdict}: holds by construction", c.hypothesis)?
                }
                (h, Some(w)) => writeln!(
                    f,
                    "  {h} {verdict}: min {} on patch {} at {}",
                    w.value,
                    w.patch + 1,
                    w.location
                )?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct MinTracker(Option<Witness>);

impl MinTracker {
    fn offer(&mut self, patch: usize, location: Location, value: f64) {
        // NaN must win so it cannot hide a violation
        let replace = match self.0 {
            None => true,
            Some(w) => value < w.value || value.is_nan(),
        };
        if replace {
            self.0 = Some(Witness {
                patch,
                location,
                value,
            });
        }
    }
}

/// Check (a1)–(a6).
pub fn check_assumptions(spec: &SystemSpec, sampling: &Sampling) -> AssumptionReport {
    let m = spec.dim();
    let mut d_min = MinTracker(None);
    let mut a_min = MinTracker(None);
    let mut diag = MinTracker(None);
    let mut beta_min = MinTracker(None);
    let mut c_min = MinTracker(None);
    let mut net_loss = MinTracker(None);
    let mut diag_nonzero: Option<Witness> = None;

    for_each_sample(spec, sampling, |loc, cv| {
        for i in 0..m {
            d_min.offer(i, loc, cv.d[i]);
            beta_min.offer(i, loc, cv.beta[i]);
            c_min.offer(i, loc, cv.c[i]);
            let outflow: f64 = (0..m).map(|j| cv.a[j][i]).sum();
            net_loss.offer(i, loc, cv.d[i] - outflow);
            for j in 0..m {
                if i == j {
                    diag.offer(i, loc, -cv.a[i][i].abs());
                    if cv.a[i][i] != 0.0 && diag_nonzero.is_none() {
                        diag_nonzero = Some(Witness {
                            patch: i,
                            location: loc,
                            value: cv.a[i][i],
                        });
                    }
                } else {
                    a_min.offer(i, loc, cv.a[i][j]);
                }
            }
        }
    });

    // the diagonal must vanish identically, not just at the sample points
    let structural_zero = (0..m).all(|i| spec.affine().a(i, i).is_zero());
    let a3_witness = diag_nonzero.or(a_min.0).or(diag.0);
    let a3_holds = structural_zero
        && diag_nonzero.is_none()
        && a_min.0.is_none_or(|w| w.value >= 0.0);

    let positive = |t: MinTracker| t.0.is_some_and(|w| w.value > 0.0);
    AssumptionReport {
        approximate: sampling.is_approximate(),
        checks: vec![
            HypothesisCheck {
                hypothesis: Hypothesis::A1,
                holds: true,
                witness: None,
            },
            HypothesisCheck {
                hypothesis: Hypothesis::A2,
                holds: positive(d_min),
                witness: d_min.0,
            },
            HypothesisCheck {
                hypothesis: Hypothesis::A3,
                holds: a3_holds,
                witness: a3_witness,
            },
            HypothesisCheck {
                hypothesis: Hypothesis::A4,
                holds: positive(beta_min),
                witness: beta_min.0,
            },
            HypothesisCheck {
                hypothesis: Hypothesis::A5,
                holds: positive(c_min),
                witness: c_min.0,
            },
            HypothesisCheck {
                hypothesis: Hypothesis::A6,
                holds: positive(net_loss),
                witness: net_loss.0,
            },
        ],
    }
}

/// Extrema of the coefficients over time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffBounds {
    pub c_minus: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub beta_plus: Vec<f64>,
    /// `a_plus[i][j] = sup a_ij`
    pub a_plus: Vec<Vec<f64>>,
    pub d_minus: Vec<f64>,
    /// `(1/c_1⁺, …, 1/c_m⁺)`, upper corner of the invariant box
    pub phi_bar: Vec<f64>,
    pub approximate: bool,
}

pub fn compute_bounds(spec: &SystemSpec, sampling: &Sampling) -> CoeffBounds {
    let m = spec.dim();
    let mut c_minus = vec![f64::INFINITY; m];
    let mut c_plus = vec![f64::NEG_INFINITY; m];
    let mut beta_plus = vec![f64::NEG_INFINITY; m];
    let mut d_minus = vec![f64::INFINITY; m];
    let mut a_plus = vec![vec![f64::NEG_INFINITY; m]; m];
    for_each_sample(spec, sampling, |_, cv| {
        for i in 0..m {
            c_minus[i] = c_minus[i].min(cv.c[i]);
            c_plus[i] = c_plus[i].max(cv.c[i]);
            beta_plus[i] = beta_plus[i].max(cv.beta[i]);
            d_minus[i] = d_minus[i].min(cv.d[i]);
            for j in 0..m {
                a_plus[i][j] = a_plus[i][j].max(cv.a[i][j]);
            }
        }
    });
    let phi_bar = c_plus.iter().map(|c| 1.0 / c).collect();
    CoeffBounds {
        c_minus,
        c_plus,
        beta_plus,
        a_plus,
        d_minus,
        phi_bar,
        approximate: sampling.is_approximate(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchZone {
    pub patch: usize,
    /// `exp(c_i⁻/c_i⁺)`
    pub upper: f64,
    pub min_middle: f64,
    pub max_middle: f64,
    /// where `max_middle` occurs
    pub worst: Location,
    /// `upper − max_middle`
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneReport {
    pub approximate: bool,
    pub patches: Vec<PatchZone>,
}

impl ZoneReport {
    pub fn holds(&self) -> bool {
        self.patches.iter().all(|p| p.holds)
    }

    pub fn min_margin(&self) -> f64 {
        self.patches.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn ensure(&self) -> Result<(), ModelError> {
        match self.patches.iter().find(|p| !p.holds) {
            None => Ok(()),
            Some(p) => Err(ModelError::ZoneViolated {
                patch: p.patch,
                margin: p.margin,
            }),
        }
    }
}

impl fmt::Display for ZoneReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.approximate { "sampled" } else { "closed-form" };
        writeln!(f, "invariant zone ({mode}):")?;
        for p in &self.patches {
            writeln!(
                f,
                "  patch {} {}: middle in [{}, {}], upper {}, margin {} (worst at {})",
                p.patch + 1,
                if p.holds { "ok" } else { "FAILED" },
                p.min_middle,
                p.max_middle,
                p.upper,
                p.margin,
                p.worst
            )?;
        }
        Ok(())
    }
}

/// Check the invariant-zone inequality for every patch.
pub fn check_invariant_zone(
    spec: &SystemSpec,
    bounds: &CoeffBounds,
    sampling: &Sampling,
) -> Result<ZoneReport, ModelError> {
    let m = spec.dim();
    let mut min_mid = vec![f64::INFINITY; m];
    let mut max_mid = vec![f64::NEG_INFINITY; m];
    let mut worst = vec![Location::Time(0.0); m];
    let mut bad_denominator: Option<ModelError> = None;
    for_each_sample(spec, sampling, |loc, cv| {
        if bad_denominator.is_some() {
            return;
        }
        for i in 0..m {
            let coupling: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| cv.a[i][j] * bounds.c_plus[i] / bounds.c_plus[j])
                .sum();
            let denom = cv.d[i] - coupling;
            if !(denom > 0.0) {
                bad_denominator = Some(ModelError::NonpositiveDenominator {
                    patch: i,
                    location: loc,
                    value: denom,
                });
                return;
            }
            let mid = cv.beta[i] / denom;
            min_mid[i] = min_mid[i].min(mid);
            if mid > max_mid[i] {
                max_mid[i] = mid;
                worst[i] = loc;
            }
        }
    });
    if let Some(e) = bad_denominator {
        return Err(e);
    }
    let patches = (0..m)
        .map(|i| {
            let upper = (bounds.c_minus[i] / bounds.c_plus[i]).exp();
            let margin = upper - max_mid[i];
            PatchZone {
                patch: i,
                upper,
                min_middle: min_mid[i],
                max_middle: max_mid[i],
                worst: worst[i],
                margin,
                holds: min_mid[i] > 0.0 && margin >= 0.0,
            }
        })
        .collect();
    Ok(ZoneReport {
        approximate: sampling.is_approximate(),
        patches,
    })
}
