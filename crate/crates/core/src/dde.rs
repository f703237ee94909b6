//! Fixed-step integration of delay systems with one constant delay per
//! component.
//!
//! The reference method is the two-stage Gauss-Legendre collocation method
//! (order 4, A-stable). An explicit third-order Bogacki-Shampine stepper is
//! kept for comparison. Both store node states and node derivatives so that
//! delayed arguments are read back through cubic Hermite interpolation.
//!
//! The step must not exceed the smallest delay, so delayed arguments of the
//! stages always fall on the already computed part of the solution.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::SolverError;
use crate::linalg;

/// A delay system `y_i'(t) = f_i(t, y(t), y_i(t − r_i))`.
pub trait DelaySystem {
    fn dim(&self) -> usize;

    /// `r_i` for each component.
    fn delays(&self) -> &[f64];

    /// `out = f(t, y, y_delayed)` with `y_delayed[i] = y_i(t − r_i)`.
    fn eval(&self, t: f64, y: &[f64], y_delayed: &[f64], out: &mut [f64]);

    fn max_delay(&self) -> f64 {
        self.delays().iter().copied().fold(0.0, f64::max)
    }

    fn min_delay(&self) -> f64 {
        self.delays().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl<S: DelaySystem + ?Sized> DelaySystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn delays(&self) -> &[f64] {
        (**self).delays()
    }

    fn eval(&self, t: f64, y: &[f64], y_delayed: &[f64], out: &mut [f64]) {
        (**self).eval(t, y, y_delayed, out)
    }
}

/// Butcher tableau of the two-stage Gauss-Legendre method.
pub mod gauss_legendre {
    /// `√3 / 6`
    pub const S3: f64 = 0.288_675_134_594_812_9;
    pub const C: [f64; 2] = [0.5 - S3, 0.5 + S3];
    pub const A: [[f64; 2]; 2] = [[0.25, 0.25 - S3], [0.25 + S3, 0.25]];
    pub const B: [f64; 2] = [0.5, 0.5];

    /// Stability function `R(z) = (1 + z/2 + z²/12) / (1 − z/2 + z²/12)`.
    pub fn stability(z: f64) -> f64 {
        (1.0 + z / 2.0 + z * z / 12.0) / (1.0 - z / 2.0 + z * z / 12.0)
    }
}

/// Bogacki-Shampine third-order formula (the propagating half of the 2(3) pair).
pub mod bogacki_shampine {
    pub const C: [f64; 3] = [0.0, 0.5, 0.75];
    pub const B: [f64; 3] = [2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0];

    /// `R(z) = 1 + z + z²/2 + z³/6`.
    pub fn stability(z: f64) -> f64 {
        1.0 + z + z * z / 2.0 + z * z * z / 6.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GaussLegendre2,
    ExplicitRk23,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::GaussLegendre2 => "gl2",
            Method::ExplicitRk23 => "rk23",
        })
    }
}

impl FromStr for Method {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gl2" | "gauss-legendre" => Ok(Method::GaussLegendre2),
            "rk23" | "bogacki-shampine" => Ok(Method::ExplicitRk23),
            other => Err(SolverError::InvalidConfig(format!(
                "unknown method `{other}` (expected gl2 or rk23)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    /// Stage residual tolerance, relative to `max(1, |K|∞)`.
    pub stage_tol: f64,
    pub max_stage_iters: usize,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            h: 0.01,
            stage_tol: 1e-12,
            max_stage_iters: 50,
            method: Method::GaussLegendre2,
        }
    }
}

impl SolverConfig {
    pub fn with_h(self, h: f64) -> Self {
        SolverConfig { h, ..self }
    }

    pub fn with_method(self, method: Method) -> Self {
        SolverConfig { method, ..self }
    }

    pub fn validate(&self, min_delay: f64) -> Result<(), SolverError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SolverError::InvalidConfig(format!("step must be > 0, got {}", self.h)));
        }
        if self.h > min_delay {
            return Err(SolverError::InvalidConfig(format!(
                "step {} exceeds the smallest delay {min_delay}",
                self.h
            )));
        }
        if !(self.stage_tol > 0.0) {
            return Err(SolverError::InvalidConfig("stage_tol must be > 0".into()));
        }
        if self.max_stage_iters == 0 {
            return Err(SolverError::InvalidConfig("max_stage_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Initial map on `[−r, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(Vec<f64>),
    /// `φ(s) = trajectory(at + s)`, the segment of an earlier solution.
    Segment { trajectory: Arc<Trajectory>, at: f64 },
    /// `φ_i(s) = f(s, i)`
    Function {
        dim: usize,
        f: Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>,
    },
}

impl History {
    pub fn constant(value: f64, dim: usize) -> Self {
        History::Constant(vec![value; dim])
    }

    pub fn function(dim: usize, f: impl Fn(f64, usize) -> f64 + Send + Sync + 'static) -> Self {
        History::Function { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            History::Constant(v) => v.len(),
            History::Segment { trajectory, .. } => trajectory.dim(),
            History::Function { dim, .. } => *dim,
        }
    }

    #[inline]
    pub(crate) fn component(&self, s: f64, i: usize) -> f64 {
        match self {
            History::Constant(v) => v[i],
            History::Segment { trajectory, at } => trajectory.component(at + s, i),
            History::Function { f, .. } => f(s, i),
        }
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            History::Segment { trajectory, at } => f
                .debug_struct("Segment")
                .field("at", at)
                .field("nodes", &trajectory.len())
                .finish(),
            History::Function { dim, .. } => f.debug_struct("Function").field("dim", dim).finish(),
        }
    }
}

/// Numerical solution on a uniform grid `t_k = k·h`, `k = 0..len`, starting at
/// `t = 0`, together with its initial map.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    h: f64,
    max_delay: f64,
    states: Vec<f64>,
    derivs: Vec<f64>,
    history: History,
    /// factor applied to the initial map after in-place rescaling
    history_scale: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    /// Value at `t ∈ [−r, end]`: the initial map before 0, stored states at
    /// nodes, cubic Hermite interpolation in between.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, SolverError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        let end = self.end_time();
        let slack = 1e-9 * self.h;
        if !(t >= -self.max_delay - slack && t <= end + slack) {
            return Err(SolverError::OutOfRange {
                t,
                start: -self.max_delay,
                end,
            });
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(t, i);
        }
        Ok(())
    }

    /// Unchecked single-component evaluation (clamped at the last node).
    #[inline]
    pub(crate) fn component(&self, t: f64, i: usize) -> f64 {
        if t < 0.0 {
            return self.history_scale * self.history.component(t, i);
        }
        let n = self.len();
        let mut x = t / self.h;
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        let mut k = x.floor() as usize;
        if k + 1 >= n {
            if n == 1 || x >= (n - 1) as f64 {
                return self.states[(n - 1) * self.dim + i];
            }
            k = n - 2;
        }
        let s = x - k as f64;
        if s == 0.0 {
            return self.states[k * self.dim + i];
        }
        let y0 = self.states[k * self.dim + i];
        let y1 = self.states[(k + 1) * self.dim + i];
        let m0 = self.derivs[k * self.dim + i] * self.h;
        let m1 = self.derivs[(k + 1) * self.dim + i] * self.h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    /// Multiply the whole solution, including the initial map, by `factor`.
    /// For linear systems the result is again a solution.
    pub fn rescale(&mut self, factor: f64) {
        self.states.iter_mut().for_each(|v| *v *= factor);
        self.derivs.iter_mut().for_each(|v| *v *= factor);
        self.history_scale *= factor;
    }

    /// Sup-norm of node `k` over all components.
    pub fn node_norm(&self, k: usize) -> f64 {
        self.state(k).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm over the nodes in `[t − r, t]` for node time `t = t_k`; parts
    /// of the window before 0 use the initial map sampled on the same grid.
    pub fn window_norm(&self, k: usize) -> f64 {
        let width = (self.max_delay / self.h).round() as isize;
        let mut norm = 0.0f64;
        for j in (k as isize - width)..=(k as isize) {
            if j >= 0 {
                norm = norm.max(self.node_norm(j as usize));
            } else {
                let s = j as f64 * self.h;
                for i in 0..self.dim {
                    norm = norm.max(self.component(s, i).abs());
                }
            }
        }
        norm
    }

    /// CSV with header `t,y1,...,ym`, one row per node, 17 significant
    /// digits; `time_offset` is added to the node times.
    pub fn write_csv<W: Write>(&self, mut w: W, time_offset: f64) -> io::Result<()> {
        write_csv_header(&mut w, self.dim)?;
        for k in 0..self.len() {
            write!(w, "{}", fmt_f64(time_offset + self.time(k)))?;
            for v in self.state(k) {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn write_csv_header<W: Write + ?Sized>(w: &mut W, dim: usize) -> io::Result<()> {
    write!(w, "t")?;
    for i in 1..=dim {
        write!(w, ",y{i}")?;
    }
    writeln!(w)
}

/// Decimal with 17 significant digits; parses back to the same binary64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Number of uniform steps covering `[0, t_end]` with step at most `h`.
pub fn step_count(t_end: f64, h: f64) -> usize {
    let x = t_end / h;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Stage derivatives of one Gauss-Legendre step.
#[derive(Debug, Clone, PartialEq)]
pub struct Stages {
    pub k: [Vec<f64>; 2],
    /// sup-norm of `K − F(K)` at the accepted iterate
    pub residual: f64,
    pub iterations: usize,
    pub newton: bool,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct StageProblem<'a, S: ?Sized> {
    system: &'a S,
    t: f64,
    h: f64,
    y: &'a [f64],
    yd: [&'a [f64]; 2],
}

impl<S: DelaySystem + ?Sized> StageProblem<'_, S> {
    /// `F(K)_s = f(t + c_s h, y + h Σ A_sσ K_σ, yd_s)` for stacked `K`.
    fn apply(&self, k: &[f64], out: &mut [f64], ytmp: &mut [f64]) {
        let m = self.y.len();
        for s in 0..2 {
            for i in 0..m {
                ytmp[i] = self.y[i]
                    + self.h * (gauss_legendre::A[s][0] * k[i] + gauss_legendre::A[s][1] * k[m + i]);
            }
            let tau = self.t + gauss_legendre::C[s] * self.h;
            self.system
                .eval(tau, ytmp, self.yd[s], &mut out[s * m..(s + 1) * m]);
        }
    }
}

fn solve_gl_stages<S: DelaySystem + ?Sized>(
    problem: &StageProblem<'_, S>,
    guess: &[f64],
    config: &SolverConfig,
    step: usize,
) -> Result<Stages, SolverError> {
    let m = problem.y.len();
    let n = 2 * m;
    let mut k = guess.to_vec();
    let mut g = vec![0.0; n];
    let mut ytmp = vec![0.0; m];
    let mut iterations = 0;

    // damped fixed point, damping 1 then 0.5 once the residual stops shrinking
    let mut damping = 1.0;
    let mut prev = f64::INFINITY;
    let mut res = f64::INFINITY;
    while iterations < config.max_stage_iters {
        problem.apply(&k, &mut g, &mut ytmp);
        iterations += 1;
        res = k.iter().zip(&g).fold(0.0, |r, (a, b)| r.max((a - b).abs()));
        if !res.is_finite() {
            break;
        }
        if res <= config.stage_tol * sup(&k).max(1.0) {
            return Ok(Stages {
                k: [k[..m].to_vec(), k[m..].to_vec()],
                residual: res,
                iterations,
                newton: false,
            });
        }
        if res >= prev {
            if damping == 1.0 {
                damping = 0.5;
            } else {
                break;
            }
        }
        prev = res;
        for (ki, gi) in k.iter_mut().zip(&g) {
            *ki += damping * (gi - *ki);
        }
    }

    // finite-difference Newton on G(K) = K − F(K), restarted from the guess
    // when the fixed point blew up
    if !k.iter().all(|v| v.is_finite()) || !(res < prev * 1e3) {
        k.copy_from_slice(guess);
    }
    let mut jac = vec![0.0; n * n];
    let mut gp = vec![0.0; n];
    let mut kp = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for _ in 0..config.max_stage_iters {
        problem.apply(&k, &mut g, &mut ytmp);
        for i in 0..n {
            rhs[i] = g[i] - k[i];
        }
        res = sup(&rhs);
        if !res.is_finite() {
            break;
        }
        let scale = sup(&k).max(1.0);
        if res <= config.stage_tol * scale {
            return Ok(Stages {
                k: [k[..m].to_vec(), k[m..].to_vec()],
                residual: res,
                iterations,
                newton: true,
            });
        }
        for col in 0..n {
            let eps = 1e-7 * k[col].abs().max(1.0);
            kp.copy_from_slice(&k);
            kp[col] += eps;
            problem.apply(&kp, &mut gp, &mut ytmp);
            for row in 0..n {
                let dfd = (gp[row] - g[row]) / eps;
                jac[row * n + col] = if row == col { 1.0 } else { 0.0 } - dfd;
            }
        }
        iterations += 1;
        let Some(delta) = linalg::solve(&mut jac, &mut rhs, n) else {
            break;
        };
        for (ki, di) in k.iter_mut().zip(delta) {
            *ki += di;
        }
        // stiff stages hit round-off in F before the residual test; accept
        // once the Newton correction itself is negligible
        if sup(delta) <= config.stage_tol * scale {
            problem.apply(&k, &mut g, &mut ytmp);
            let residual = k.iter().zip(&g).fold(0.0_f64, |r, (a, b)| r.max((a - b).abs()));
            return Ok(Stages {
                k: [k[..m].to_vec(), k[m..].to_vec()],
                residual,
                iterations,
                newton: true,
            });
        }
    }
    Err(SolverError::StageSolveDiverged { step, residual: res })
}

/// Solve the Gauss-Legendre stage equations for the step leaving the last
/// node of `trajectory`.
pub fn solve_stages<S: DelaySystem + ?Sized>(
    system: &S,
    trajectory: &Trajectory,
    config: &SolverConfig,
) -> Result<Stages, SolverError> {
    let n = trajectory.len() - 1;
    let h = trajectory.step();
    let t = trajectory.time(n);
    let yd: Vec<Vec<f64>> = gauss_legendre::C
        .iter()
        .map(|c| delayed(system, trajectory, t + c * h))
        .collect();
    let problem = StageProblem {
        system,
        t,
        h,
        y: trajectory.state(n),
        yd: [&yd[0], &yd[1]],
    };
    let f = trajectory.derivative(n);
    let guess: Vec<f64> = f.iter().chain(f).copied().collect();
    solve_gl_stages(&problem, &guess, config, n)
}

fn delayed<S: DelaySystem + ?Sized>(system: &S, traj: &Trajectory, t: f64) -> Vec<f64> {
    system
        .delays()
        .iter()
        .enumerate()
        .map(|(i, r)| traj.component(t - r, i))
        .collect()
}

/// Step-by-step driver that owns the growing trajectory.
pub struct Integrator<'s, S: DelaySystem + ?Sized> {
    system: &'s S,
    config: SolverConfig,
    traj: Trajectory,
    steps: usize,
    yd: [Vec<f64>; 3],
    ytmp: Vec<f64>,
    kbuf: [Vec<f64>; 3],
    guess: Vec<f64>,
}

impl<'s, S: DelaySystem + ?Sized> Integrator<'s, S> {
    /// Start at `t = 0` from `history`; the step is `config.h`.
    pub fn new(system: &'s S, history: History, config: SolverConfig) -> Result<Self, SolverError> {
        let m = system.dim();
        if history.dim() != m {
            return Err(SolverError::HistoryDimension {
                expected: m,
                got: history.dim(),
            });
        }
        if system.delays().len() != m {
            return Err(SolverError::InvalidConfig("one delay per component required".into()));
        }
        config.validate(system.min_delay())?;
        let mut traj = Trajectory {
            dim: m,
            h: config.h,
            max_delay: system.max_delay(),
            states: Vec::new(),
            derivs: Vec::new(),
            history,
            history_scale: 1.0,
        };
        let y0: Vec<f64> = (0..m).map(|i| traj.history.component(0.0, i)).collect();
        let yd0: Vec<f64> = system
            .delays()
            .iter()
            .enumerate()
            .map(|(i, r)| traj.history.component(-r, i))
            .collect();
        let mut f0 = vec![0.0; m];
        system.eval(0.0, &y0, &yd0, &mut f0);
        if y0.iter().chain(&f0).any(|v| !v.is_finite()) {
            return Err(SolverError::NonfiniteState { step: 0 });
        }
        traj.states = y0;
        traj.derivs = f0;
        Ok(Integrator {
            system,
            config,
            traj,
            steps: 0,
            yd: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            ytmp: vec![0.0; m],
            kbuf: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            guess: vec![0.0; 2 * m],
        })
    }

    pub fn time(&self) -> f64 {
        self.traj.end_time()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> &[f64] {
        self.traj.last_state()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }

    pub fn rescale(&mut self, factor: f64) {
        self.traj.rescale(factor);
    }

    fn fill_delayed(&mut self, slot: usize, t: f64) {
        for (i, r) in self.system.delays().iter().enumerate() {
            self.yd[slot][i] = self.traj.component(t - r, i);
        }
    }

    pub fn step(&mut self) -> Result<(), SolverError> {
        let m = self.traj.dim;
        let n = self.traj.len() - 1;
        let h = self.config.h;
        let t = self.traj.time(n);
        let mut y_next = vec![0.0; m];
        match self.config.method {
            Method::GaussLegendre2 => {
                for s in 0..2 {
                    self.fill_delayed(s, t + gauss_legendre::C[s] * h);
                }
                let f = self.traj.derivative(n);
                self.guess[..m].copy_from_slice(f);
                self.guess[m..].copy_from_slice(f);
                let problem = StageProblem {
                    system: self.system,
                    t,
                    h,
                    y: self.traj.state(n),
                    yd: [&self.yd[0], &self.yd[1]],
                };
                let stages = solve_gl_stages(&problem, &self.guess, &self.config, n)?;
                let y = self.traj.state(n);
                for i in 0..m {
                    y_next[i] = y[i]
                        + h * (gauss_legendre::B[0] * stages.k[0][i]
                            + gauss_legendre::B[1] * stages.k[1][i]);
                }
            }
            Method::ExplicitRk23 => {
                use bogacki_shampine::{B, C};
                self.kbuf[0].copy_from_slice(self.traj.derivative(n));
                for s in 1..3 {
                    self.fill_delayed(s, t + C[s] * h);
                    let y = self.traj.state(n);
                    for i in 0..m {
                        self.ytmp[i] = y[i] + C[s] * h * self.kbuf[s - 1][i];
                    }
                    self.system
                        .eval(t + C[s] * h, &self.ytmp, &self.yd[s], &mut self.kbuf[s]);
                }
                let y = self.traj.state(n);
                for i in 0..m {
                    y_next[i] = y[i]
                        + h * (B[0] * self.kbuf[0][i] + B[1] * self.kbuf[1][i] + B[2] * self.kbuf[2][i]);
                }
            }
        }
        let t_next = self.traj.time(n + 1);
        self.fill_delayed(2, t_next);
        let mut f_next = vec![0.0; m];
        self.system.eval(t_next, &y_next, &self.yd[2], &mut f_next);
        if y_next.iter().chain(&f_next).any(|v| !v.is_finite()) {
            return Err(SolverError::NonfiniteState { step: n + 1 });
        }
        self.traj.states.extend_from_slice(&y_next);
        self.traj.derivs.extend_from_slice(&f_next);
        self.steps += 1;
        Ok(())
    }
}

/// Integrate over `[0, t_end]` from `history`. The step is shrunk to
/// `t_end / ceil(t_end / h)` so the grid ends exactly at `t_end`.
pub fn integrate<S: DelaySystem + ?Sized>(
    system: &S,
    history: History,
    t_end: f64,
    config: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(SolverError::InvalidConfig(format!("t_end must be > 0, got {t_end}")));
    }
    let steps = step_count(t_end, config.h);
    let config = SolverConfig {
        h: t_end / steps as f64,
        ..*config
    };
    let mut integrator = Integrator::new(system, history, config)?;
    for _ in 0..steps {
        integrator.step()?;
    }
    Ok(integrator.into_trajectory())
}

/// Same as [`integrate`] with the explicit Bogacki-Shampine stepper.
pub fn integrate_explicit_rk23<S: DelaySystem + ?Sized>(
    system: &S,
    history: History,
    t_end: f64,
    config: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    integrate(system, history, t_end, &config.with_method(Method::ExplicitRk23))
}

/// Constant-coefficient linear system `y' = L y(t) + M y_i(t − r_i)` with
/// diagonal delayed coupling. Used by tests and as a building block.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDelaySystem {
    /// row-major `m × m`
    pub instantaneous: Vec<f64>,
    pub delayed: Vec<f64>,
    pub delays: Vec<f64>,
}

impl LinearDelaySystem {
    pub fn scalar(lambda: f64, delayed: f64, delay: f64) -> Self {
        LinearDelaySystem {
            instantaneous: vec![lambda],
            delayed: vec![delayed],
            delays: vec![delay],
        }
    }
}

impl DelaySystem for LinearDelaySystem {
    fn dim(&self) -> usize {
        self.delays.len()
    }

    fn delays(&self) -> &[f64] {
        &self.delays
    }

    fn eval(&self, _t: f64, y: &[f64], y_delayed: &[f64], out: &mut [f64]) {
        let m = self.delays.len();
        for i in 0..m {
            let row = &self.instantaneous[i * m..(i + 1) * m];
            out[i] = row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + self.delayed[i] * y_delayed[i];
        }
    }
}
