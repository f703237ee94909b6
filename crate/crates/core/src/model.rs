//! Nicholson systems with patch structure whose coefficients are driven by the
//! Kronecker flow on the torus.
//!
//! Every coefficient is an affine function of two periodic shapes,
//! `p(θ1 + t)` and `q(θ2 + √2 t)`. That covers the two-patch family used in
//! the experiments as well as constant-coefficient systems of any size, and it
//! lets the condition checkers work in closed form over the range box of
//! `(p, q)`.

use std::fmt;
use std::f64::consts::SQRT_2;
use std::str::FromStr;

use crate::dde::DelaySystem;
use crate::error::ModelError;
use crate::torus::TorusPoint;

/// 2π-periodic scalar shape used to perturb the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Sin,
    Cos,
    Zero,
}

impl Shape {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Shape::Sin => x.sin(),
            Shape::Cos => x.cos(),
            Shape::Zero => 0.0,
        }
    }

    /// Closed range of the shape over one period.
    pub fn range(self) -> (f64, f64) {
        match self {
            Shape::Sin | Shape::Cos => (-1.0, 1.0),
            Shape::Zero => (0.0, 0.0),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Sin => "sin",
            Shape::Cos => "cos",
            Shape::Zero => "zero",
        })
    }
}

impl FromStr for Shape {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sin" => Ok(Shape::Sin),
            "cos" => Ok(Shape::Cos),
            "zero" => Ok(Shape::Zero),
            other => Err(ModelError::InvalidParameter(format!(
                "unknown shape `{other}` (expected sin, cos or zero)"
            ))),
        }
    }
}

/// Birth nonlinearity `g(c, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `v e^{-c v}`
    NicholsonExp,
    /// `v / (1 + c v^α)`, Mackey-Glass type, `α ≥ 1`
    Rational { alpha: f64 },
}

impl Nonlinearity {
    #[inline]
    pub fn eval(self, c: f64, v: f64) -> f64 {
        match self {
            Nonlinearity::NicholsonExp => v * (-c * v).exp(),
            Nonlinearity::Rational { alpha } => v / (1.0 + c * v.abs().powf(alpha)),
        }
    }

    /// Derivative of `g` at `v = 0`; both kinds have slope one there.
    pub fn slope_at_zero(self) -> f64 {
        1.0
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::NicholsonExp => f.write_str("nicholson"),
            Nonlinearity::Rational { alpha } => write!(f, "rational:{alpha}"),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "nicholson" {
            return Ok(Nonlinearity::NicholsonExp);
        }
        if let Some(rest) = s.strip_prefix("rational:") {
            let alpha: f64 = rest.trim().parse().map_err(|_| {
                ModelError::InvalidParameter(format!("bad rational exponent `{rest}`"))
            })?;
            if !(alpha >= 1.0) || !alpha.is_finite() {
                return Err(ModelError::InvalidParameter(format!(
                    "rational exponent must be >= 1, got {alpha}"
                )));
            }
            return Ok(Nonlinearity::Rational { alpha });
        }
        Err(ModelError::InvalidParameter(format!(
            "unknown nonlinearity `{s}` (expected nicholson or rational:<alpha>)"
        )))
    }
}

/// Mortality scale and migration scales of the two-patch family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    mu: f64,
    alpha12: f64,
    alpha21: f64,
}

impl ParamSet {
    pub fn new(mu: f64, alpha12: f64, alpha21: f64) -> Result<Self, ModelError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ModelError::InvalidParameter(format!("mu must be > 0, got {mu}")));
        }
        for (name, v) in [("alpha12", alpha12), ("alpha21", alpha21)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(ParamSet {
            mu,
            alpha12,
            alpha21,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha12(&self) -> f64 {
        self.alpha12
    }

    pub fn alpha21(&self) -> f64 {
        self.alpha21
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet {
            mu: 1.0,
            alpha12: 1.0,
            alpha21: 1.0,
        }
    }
}

/// `constant + p·P + q·Q` for the shape values `P`, `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub constant: f64,
    pub p: f64,
    pub q: f64,
}

impl Affine {
    pub const fn new(constant: f64, p: f64, q: f64) -> Self {
        Affine { constant, p, q }
    }

    pub const fn constant(value: f64) -> Self {
        Affine::new(value, 0.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, p: f64, q: f64) -> f64 {
        self.constant + self.p * p + self.q * q
    }

    pub fn scale(self, k: f64) -> Self {
        Affine::new(k * self.constant, k * self.p, k * self.q)
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.p == 0.0 && self.q == 0.0
    }
}

impl std::ops::Add for Affine {
    type Output = Affine;

    fn add(self, rhs: Affine) -> Affine {
        Affine::new(self.constant + rhs.constant, self.p + rhs.p, self.q + rhs.q)
    }
}

/// Coefficient values at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffValues {
    /// per-capita loss rates
    pub d: Vec<f64>,
    /// migration rates, `a[i][j]` from patch `j` into patch `i`
    pub a: Vec<Vec<f64>>,
    /// birth rates
    pub beta: Vec<f64>,
    /// crowding coefficients
    pub c: Vec<f64>,
}

impl CoeffValues {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    fn check_shape(&self) -> Result<(), ModelError> {
        let m = self.d.len();
        if m == 0 {
            return Err(ModelError::InvalidParameter("at least one patch required".into()));
        }
        if self.beta.len() != m || self.c.len() != m || self.a.len() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "coefficient vectors must all have length {m}"
            )));
        }
        if self.a.iter().any(|row| row.len() != m) {
            return Err(ModelError::DimensionMismatch(format!(
                "migration matrix must be {m}x{m}"
            )));
        }
        let all = self
            .d
            .iter()
            .chain(&self.beta)
            .chain(&self.c)
            .chain(self.a.iter().flatten());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Coefficients as affine forms in the shape values.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoefficients {
    m: usize,
    pub d: Vec<Affine>,
    /// row-major `m × m`
    pub a: Vec<Affine>,
    pub beta: Vec<Affine>,
    pub c: Vec<Affine>,
}

impl AffineCoefficients {
    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> &Affine {
        &self.a[i * self.m + j]
    }

    pub fn eval(&self, p: f64, q: f64) -> CoeffValues {
        let m = self.m;
        CoeffValues {
            d: self.d.iter().map(|f| f.eval(p, q)).collect(),
            a: (0..m)
                .map(|i| (0..m).map(|j| self.a(i, j).eval(p, q)).collect())
                .collect(),
            beta: self.beta.iter().map(|f| f.eval(p, q)).collect(),
            c: self.c.iter().map(|f| f.eval(p, q)).collect(),
        }
    }

    fn from_constant(values: &CoeffValues) -> Self {
        let m = values.dim();
        AffineCoefficients {
            m,
            d: values.d.iter().copied().map(Affine::constant).collect(),
            a: values.a.iter().flatten().copied().map(Affine::constant).collect(),
            beta: values.beta.iter().copied().map(Affine::constant).collect(),
            c: values.c.iter().copied().map(Affine::constant).collect(),
        }
    }

    /// The two-patch family of the experiments.
    fn two_patch(params: &ParamSet, beta_scale: [f64; 2]) -> Self {
        let a12 = Affine::new(0.1, 0.03, 0.01).scale(params.alpha12);
        let a21 = Affine::new(1.0, 0.03, 0.01).scale(params.alpha21);
        let m1 = Affine::constant(1.2);
        let m2 = Affine::new(1.9, 0.02, 0.0).scale(params.mu);
        AffineCoefficients {
            m: 2,
            d: vec![m1 + a21, m2 + a12],
            a: vec![Affine::default(), a12, a21, Affine::default()],
            beta: vec![
                Affine::new(5.0, 0.03, 0.01).scale(beta_scale[0]),
                Affine::new(1.0, 0.03, 0.01).scale(beta_scale[1]),
            ],
            c: vec![Affine::constant(1.0), Affine::new(0.5, 0.2, 0.01)],
        }
    }
}

/// Which coefficient family a system belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Two-patch family parameterized by `(μ, α12, α21)`; `beta_scale`
    /// multiplies each patch's birth rate (1 for the unmodified family).
    TwoPatch {
        params: ParamSet,
        beta_scale: [f64; 2],
    },
    /// Time-independent coefficients, any number of patches.
    Constant(CoeffValues),
}

/// A Nicholson system over the torus base flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    family: Family,
    delays: Vec<f64>,
    nonlinearity: Nonlinearity,
    p: Shape,
    q: Shape,
    coeffs: AffineCoefficients,
}

impl SystemSpec {
    pub fn new(
        family: Family,
        delays: Vec<f64>,
        nonlinearity: Nonlinearity,
        p: Shape,
        q: Shape,
    ) -> Result<Self, ModelError> {
        if delays.is_empty() {
            return Err(ModelError::InvalidParameter("at least one patch required".into()));
        }
        if let Some(r) = delays.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "delays must be positive and finite, got {r}"
            )));
        }
        let coeffs = match &family {
            Family::TwoPatch { params, beta_scale } => {
                if delays.len() != 2 {
                    return Err(ModelError::TwoPatchDimension(delays.len()));
                }
                if beta_scale.iter().any(|s| !s.is_finite()) {
                    return Err(ModelError::InvalidParameter("beta_scale must be finite".into()));
                }
                AffineCoefficients::two_patch(params, *beta_scale)
            }
            Family::Constant(values) => {
                values.check_shape()?;
                if values.dim() != delays.len() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "{} delays for {} patches",
                        delays.len(),
                        values.dim()
                    )));
                }
                AffineCoefficients::from_constant(values)
            }
        };
        Ok(SystemSpec {
            family,
            delays,
            nonlinearity,
            p,
            q,
            coeffs,
        })
    }

    /// The two-patch family with delays `(1, 2)`, `p = sin`, `q = cos` and the
    /// Nicholson nonlinearity.
    pub fn two_patch(params: ParamSet) -> Self {
        SystemSpec::new(
            Family::TwoPatch {
                params,
                beta_scale: [1.0, 1.0],
            },
            vec![1.0, 2.0],
            Nonlinearity::NicholsonExp,
            Shape::Sin,
            Shape::Cos,
        )
        .expect("two-patch family is well formed")
    }

    pub fn constant(
        values: CoeffValues,
        delays: Vec<f64>,
        nonlinearity: Nonlinearity,
    ) -> Result<Self, ModelError> {
        SystemSpec::new(
            Family::Constant(values),
            delays,
            nonlinearity,
            Shape::Zero,
            Shape::Zero,
        )
    }

    pub fn with_shapes(mut self, p: Shape, q: Shape) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn with_params(&self, params: ParamSet) -> Result<Self, ModelError> {
        match &self.family {
            Family::TwoPatch { beta_scale, .. } => SystemSpec::new(
                Family::TwoPatch {
                    params,
                    beta_scale: *beta_scale,
                },
                self.delays.clone(),
                self.nonlinearity,
                self.p,
                self.q,
            ),
            Family::Constant(_) => Err(ModelError::InvalidParameter(
                "parameters (mu, alpha12, alpha21) only apply to the two-patch family".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_delay(&self) -> f64 {
        self.delays.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn params(&self) -> Option<ParamSet> {
        match &self.family {
            Family::TwoPatch { params, .. } => Some(*params),
            Family::Constant(_) => None,
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn shapes(&self) -> (Shape, Shape) {
        (self.p, self.q)
    }

    pub fn affine(&self) -> &AffineCoefficients {
        &self.coeffs
    }

    /// Shape values `(p(θ1 + t), q(θ2 + √2 t))`.
    #[inline]
    pub fn shape_values(&self, theta: TorusPoint, t: f64) -> (f64, f64) {
        (
            self.p.eval(theta.theta1() + t),
            self.q.eval(theta.theta2() + SQRT_2 * t),
        )
    }

    /// All coefficients at the base point `θ·t`.
    pub fn coefficients(&self, theta: TorusPoint, t: f64) -> CoeffValues {
        let (p, q) = self.shape_values(theta, t);
        self.coeffs.eval(p, q)
    }

    /// Right-hand side `f_i = -d_i y_i + Σ_j a_ij y_j + β_i g(c_i, y_i(t - r_i))`.
    pub fn rhs(&self, coeffs: &CoeffValues, y_now: &[f64], y_delayed: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let migration: f64 = (0..m).map(|j| coeffs.a[i][j] * y_now[j]).sum();
                -coeffs.d[i] * y_now[i]
                    + migration
                    + coeffs.beta[i] * self.nonlinearity.eval(coeffs.c[i], y_delayed[i])
            })
            .collect()
    }
}

/// The system along the orbit of `theta`: coefficients read at `θ·t`.
#[derive(Debug, Clone, Copy)]
pub struct NicholsonField<'a> {
    spec: &'a SystemSpec,
    theta: TorusPoint,
}

impl SystemSpec {
    pub fn at(&self, theta: TorusPoint) -> NicholsonField<'_> {
        NicholsonField { spec: self, theta }
    }
}

impl NicholsonField<'_> {
    pub fn theta(&self) -> TorusPoint {
        self.theta
    }
}

impl DelaySystem for NicholsonField<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn delays(&self) -> &[f64] {
        &self.spec.delays
    }

    fn eval(&self, t: f64, y: &[f64], y_delayed: &[f64], out: &mut [f64]) {
        let (p, q) = self.spec.shape_values(self.theta, t);
        let cf = &self.spec.coeffs;
        let m = cf.m;
        let g = self.spec.nonlinearity;
        for i in 0..m {
            let mut acc = -cf.d[i].eval(p, q) * y[i];
            for j in 0..m {
                if j != i {
                    acc += cf.a(i, j).eval(p, q) * y[j];
                }
            }
            acc += cf.a(i, i).eval(p, q) * y[i];
            acc += cf.beta[i].eval(p, q) * g.eval(cf.c[i].eval(p, q), y_delayed[i]);
            out[i] = acc;
        }
    }
}
