//! Pullback limits `b(θ) = lim_{T→∞} y(T, σ_{−T}θ, 1̄)` over a torus grid and
//! componentwise order comparisons between meshes.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::conditions::{check_assumptions, check_invariant_zone, compute_bounds, Sampling};
use crate::dde::{fmt_f64, integrate, History, SolverConfig, Trajectory};
use crate::error::{AttractorError, ModelError};
use crate::model::{ParamSet, SystemSpec};
use crate::torus::TorusPoint;

#[derive(Debug, Clone)]
pub struct PullbackConfig {
    pub tol: f64,
    pub lag: f64,
    pub t_step: f64,
    pub t_max: f64,
    /// initial map, `None` for the constant map 1
    pub history: Option<History>,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig {
            tol: 1e-6,
            lag: 10.0,
            t_step: 10.0,
            t_max: 2000.0,
            history: None,
        }
    }
}

impl PullbackConfig {
    pub fn with_tol(self, tol: f64) -> Self {
        PullbackConfig { tol, ..self }
    }

    pub fn validate(&self) -> Result<(), AttractorError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.tol) && ok(self.lag) && ok(self.t_step) && ok(self.t_max) {
            Ok(())
        } else {
            Err(AttractorError::InvalidConfig(format!(
                "tol, lag, t_step and t_max must be positive and finite (got {}, {}, {}, {})",
                self.tol, self.lag, self.t_step, self.t_max
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackPoint {
    pub value: Vec<f64>,
    pub t_final: f64,
    /// sup-norm gap that triggered the stop
    pub gap: f64,
    /// sup-norm distance between the final segments on `[−r, 0]`, when the
    /// previous integration was kept
    pub segment_gap: Option<f64>,
    /// converged to the null solution
    pub trivial: bool,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn segment_gap(a: &Trajectory, b: &Trajectory) -> Option<f64> {
    let r = a.max_delay();
    let width = (r / a.step()).round() as usize;
    let mut gap = 0.0_f64;
    let mut va = vec![0.0; a.dim()];
    let mut vb = vec![0.0; b.dim()];
    for k in 0..=width {
        let s = -(k as f64) * a.step();
        a.eval_into(a.end_time() + s, &mut va).ok()?;
        b.eval_into(b.end_time() + s, &mut vb).ok()?;
        gap = gap.max(sup_dist(&va, &vb));
    }
    Some(gap)
}

fn run(
    spec: &SystemSpec,
    theta: TorusPoint,
    horizon: f64,
    history: &History,
    solver: &SolverConfig,
) -> Result<Trajectory, AttractorError> {
    let field = spec.at(theta.advance(-horizon));
    Ok(integrate(&field, history.clone(), horizon, solver)?)
}

/// Pullback iteration at `theta`: `v(T)` for `T = lag, lag + t_step, …` until
/// `|v(T) − v(T − lag)|_∞ < tol`.
pub fn pullback_point(
    spec: &SystemSpec,
    theta: TorusPoint,
    config: &PullbackConfig,
    solver: &SolverConfig,
) -> Result<PullbackPoint, AttractorError> {
    config.validate()?;
    let m = spec.dim();
    let history = config.history.clone().unwrap_or_else(|| History::constant(1.0, m));
    if history.dim() != m {
        return Err(ModelError::DimensionMismatch(format!(
            "history has {} components, system has {m}",
            history.dim()
        ))
        .into());
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);

    let mut values: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut last: Option<(f64, Trajectory)> = None;
    let mut previous_value: Option<Vec<f64>> = None;
    let mut k = 0usize;
    loop {
        let t = config.lag + k as f64 * config.t_step;
        if t > config.t_max * (1.0 + 1e-12) {
            let (last_v, prev_v) = match (values.last(), previous_value) {
                (Some((_, v)), Some(p)) => (v.clone(), p),
                _ => (Vec::new(), Vec::new()),
            };
            return Err(AttractorError::NoConvergence {
                t_max: config.t_max,
                last: last_v,
                previous: prev_v,
            });
        }
        let traj = run(spec, theta, t, &history, solver)?;
        let v = traj.last_state().to_vec();

        let back = t - config.lag;
        let mut fresh = None;
        let (prev, prev_traj): (Vec<f64>, Option<&Trajectory>) = if back <= 0.0 {
            ((0..m).map(|i| history.component(0.0, i)).collect(), None)
        } else if let Some((_, cached)) = values.iter().find(|(s, _)| same(*s, back)) {
            let kept = match &last {
                Some((s, tr)) if same(*s, back) => Some(tr),
                _ => None,
            };
            (cached.clone(), kept)
        } else {
            let tr = fresh.insert(run(spec, theta, back, &history, solver)?);
            (tr.last_state().to_vec(), Some(&*tr))
        };

        let gap = sup_dist(&v, &prev);
        if gap < config.tol {
            let seg = prev_traj.and_then(|p| segment_gap(&traj, p));
            let trivial = v.iter().all(|x| x.abs() < config.tol);
            return Ok(PullbackPoint {
                value: v,
                t_final: t,
                gap,
                segment_gap: seg,
                trivial,
            });
        }
        previous_value = Some(prev);
        values.push((t, v));
        last = Some((t, traj));
        k += 1;
    }
}

/// `v(t)` at every `t` of a forward-in-`T` sweep, for plotting convergence.
pub fn pullback_trajectory(
    spec: &SystemSpec,
    theta: TorusPoint,
    horizons: &[f64],
    history: Option<History>,
    solver: &SolverConfig,
) -> Result<Vec<(f64, Vec<f64>)>, AttractorError> {
    let history = history.unwrap_or_else(|| History::constant(1.0, spec.dim()));
    horizons
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(AttractorError::InvalidConfig(format!(
                    "pullback horizon must be positive, got {t}"
                )));
            }
            Ok((t, run(spec, theta, t, &history, solver)?.last_state().to_vec()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshInvariants {
    pub phi_bar: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub positive: bool,
    /// every value within `φ̄ + slack`
    pub bounded: bool,
    pub slack: f64,
}

impl MeshInvariants {
    pub fn hold(&self) -> bool {
        self.positive && self.bounded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorMesh {
    pub n: usize,
    /// row-major: node `(i, j)` is at index `i·n + j`
    pub grid: Vec<TorusPoint>,
    pub nodes: Vec<Result<PullbackPoint, AttractorError>>,
    pub params: Option<ParamSet>,
    pub dim: usize,
    /// closed-form hypotheses and invariant zone hold
    pub conditions_hold: bool,
}

impl AttractorMesh {
    pub fn node(&self, i: usize, j: usize) -> Option<&PullbackPoint> {
        self.nodes[i * self.n + j].as_ref().ok()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<&[f64]> {
        self.node(i, j).map(|p| p.value.as_slice())
    }

    pub fn is_partial(&self) -> bool {
        self.nodes.iter().any(|r| r.is_err())
    }

    pub fn failures(&self) -> impl Iterator<Item = ((usize, usize), &AttractorError)> {
        let n = self.n;
        self.nodes
            .iter()
            .enumerate()
            .filter_map(move |(k, r)| r.as_ref().err().map(|e| ((k / n, k % n), e)))
    }

    pub fn max_t_final(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|p| p.t_final)
            .fold(0.0, f64::max)
    }

    /// Component `c` of every node, `None` where the node failed.
    pub fn component(&self, c: usize) -> Vec<Option<f64>> {
        self.nodes
            .iter()
            .map(|r| r.as_ref().ok().map(|p| p.value[c]))
            .collect()
    }

    pub fn invariants(&self, phi_bar: &[f64], slack: f64) -> MeshInvariants {
        let mut min = vec![f64::INFINITY; self.dim];
        let mut max = vec![f64::NEG_INFINITY; self.dim];
        for p in self.nodes.iter().filter_map(|r| r.as_ref().ok()) {
            for (c, &v) in p.value.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        MeshInvariants {
            phi_bar: phi_bar.to_vec(),
            positive: min.iter().all(|&v| v > 0.0),
            bounded: max.iter().zip(phi_bar).all(|(&v, &b)| v <= b + slack),
            min,
            max,
            slack,
        }
    }

    /// Rows `i,j,theta1,theta2,y1..ym,T_final`; failed nodes are omitted.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let ys: Vec<String> = (1..=self.dim).map(|c| format!("y{c}")).collect();
        writeln!(w, "i,j,theta1,theta2,{},T_final", ys.join(","))?;
        for i in 0..self.n {
            for j in 0..self.n {
                let Some(p) = self.node(i, j) else { continue };
                let th = self.grid[i * self.n + j];
                write!(w, "{i},{j},{},{}", fmt_f64(th.theta1()), fmt_f64(th.theta2()))?;
                for v in &p.value {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
                writeln!(w, ",{}", fmt_f64(p.t_final))?;
            }
        }
        Ok(())
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, AttractorError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AttractorError::InvalidConfig(format!("worker pool: {e}")))
}

fn conditions_hold(spec: &SystemSpec) -> bool {
    let sampling = Sampling::ClosedForm;
    if !check_assumptions(spec, &sampling).all_hold() {
        return false;
    }
    let bounds = compute_bounds(spec, &sampling);
    matches!(check_invariant_zone(spec, &bounds, &sampling), Ok(z) if z.holds())
}

/// Pullback limits at every node of the `n × n` uniform grid, computed on
/// `jobs` workers. The result does not depend on `jobs`.
pub fn compute_mesh(
    spec: &SystemSpec,
    n: usize,
    config: &PullbackConfig,
    solver: &SolverConfig,
    jobs: usize,
) -> Result<AttractorMesh, AttractorError> {
    if n == 0 {
        return Err(AttractorError::InvalidConfig("mesh resolution must be >= 1".into()));
    }
    config.validate()?;
    solver.validate(spec.min_delay())?;
    let grid = TorusPoint::uniform_grid(n);
    let nodes = pool(jobs)?.install(|| {
        grid.par_iter()
            .map(|&th| pullback_point(spec, th, config, solver))
            .collect()
    });
    Ok(AttractorMesh {
        n,
        grid,
        nodes,
        params: spec.params(),
        dim: spec.dim(),
        conditions_hold: conditions_hold(spec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    /// `α₁₂ = α₂₁ = v`
    BothMigrations,
    /// `α₁₂ = v`
    Alpha12Only,
    /// `μ = v`
    Mortality,
}

impl StudyAxis {
    pub fn apply(self, base: ParamSet, v: f64) -> Result<ParamSet, ModelError> {
        match self {
            StudyAxis::BothMigrations => ParamSet::new(base.mu(), v, v),
            StudyAxis::Alpha12Only => ParamSet::new(base.mu(), v, base.alpha21()),
            StudyAxis::Mortality => ParamSet::new(v, base.alpha12(), base.alpha21()),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            StudyAxis::BothMigrations => "alpha12=alpha21",
            StudyAxis::Alpha12Only => "alpha12",
            StudyAxis::Mortality => "mu",
        }
    }
}

impl fmt::Display for StudyAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyAxis::BothMigrations => "both-migrations",
            StudyAxis::Alpha12Only => "alpha12",
            StudyAxis::Mortality => "mortality",
        })
    }
}

impl FromStr for StudyAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "both-migrations" | "both" => Ok(StudyAxis::BothMigrations),
            "alpha12" | "alpha12-only" => Ok(StudyAxis::Alpha12Only),
            "mortality" | "mu" => Ok(StudyAxis::Mortality),
            other => Err(format!(
                "unknown study axis `{other}` (expected both-migrations, alpha12 or mortality)"
            )),
        }
    }
}

/// Componentwise order of `later − earlier` over a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// `≥ −slack` everywhere and `> slack` somewhere
    Increasing,
    Decreasing,
    /// `|diff| ≤ slack` everywhere
    Equal,
    Mixed,
}

impl Order {
    pub fn classify(diffs: impl IntoIterator<Item = f64>, slack: f64) -> Order {
        let (mut up, mut down) = (false, false);
        for d in diffs {
            up |= d > slack;
            down |= d < -slack;
        }
        match (up, down) {
            (true, true) => Order::Mixed,
            (true, false) => Order::Increasing,
            (false, true) => Order::Decreasing,
            (false, false) => Order::Equal,
        }
    }

    /// Order of a chain given the orders of its consecutive links.
    pub fn chain(self, next: Order) -> Order {
        match (self, next) {
            (a, Order::Equal) => a,
            (Order::Equal, b) => b,
            (a, b) if a == b => a,
            _ => Order::Mixed,
        }
    }

    pub fn is_ordered(self) -> bool {
        self != Order::Mixed
    }

    pub fn reversed(self) -> Order {
        match self {
            Order::Increasing => Order::Decreasing,
            Order::Decreasing => Order::Increasing,
            o => o,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::Increasing => "increasing",
            Order::Decreasing => "decreasing",
            Order::Equal => "equal",
            Order::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOrder {
    pub from: f64,
    pub to: f64,
    /// per component
    pub orders: Vec<Order>,
    /// per component, `(min, max)` of `to − from` over the common nodes
    pub diff_range: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyEntry {
    pub value: f64,
    pub params: ParamSet,
    pub mesh: AttractorMesh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub axis: StudyAxis,
    pub entries: Vec<StudyEntry>,
    pub pairs: Vec<PairOrder>,
    /// per component, the chained order across all values
    pub overall: Vec<Order>,
    pub slack: f64,
}

impl StudyReport {
    pub fn uniformly_ordered(&self) -> bool {
        self.overall.iter().all(|o| o.is_ordered())
    }
}

/// Compare two meshes on the nodes where both converged.
pub fn compare_meshes(earlier: &AttractorMesh, later: &AttractorMesh, slack: f64) -> (Vec<Order>, Vec<(f64, f64)>) {
    let dim = earlier.dim.min(later.dim);
    let mut orders = Vec::with_capacity(dim);
    let mut ranges = Vec::with_capacity(dim);
    for c in 0..dim {
        let diffs: Vec<f64> = earlier
            .nodes
            .iter()
            .zip(&later.nodes)
            .filter_map(|(a, b)| match (a, b) {
                (Ok(a), Ok(b)) => Some(b.value[c] - a.value[c]),
                _ => None,
            })
            .collect();
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        orders.push(Order::classify(diffs, slack));
        ranges.push((lo, hi));
    }
    (orders, ranges)
}

/// One mesh per parameter value along `axis`, plus componentwise order
/// comparisons between consecutive meshes (slack `config.tol`).
pub fn parameter_study(
    template: &SystemSpec,
    axis: StudyAxis,
    values: &[f64],
    n: usize,
    config: &PullbackConfig,
    solver: &SolverConfig,
    jobs: usize,
) -> Result<StudyReport, AttractorError> {
    let base = template.params().ok_or_else(|| {
        AttractorError::InvalidConfig("parameter studies need the two-patch family".into())
    })?;
    if values.is_empty() {
        return Err(AttractorError::InvalidConfig("no parameter values given".into()));
    }
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        let params = axis.apply(base, v)?;
        let spec = template.with_params(params)?;
        let mesh = compute_mesh(&spec, n, config, solver, jobs)?;
        entries.push(StudyEntry {
            value: v,
            params,
            mesh,
        });
    }
    let dim = template.dim();
    let slack = config.tol;
    let mut overall = vec![Order::Equal; dim];
    let pairs: Vec<PairOrder> = entries
        .windows(2)
        .map(|w| {
            let (orders, diff_range) = compare_meshes(&w[0].mesh, &w[1].mesh, slack);
            for (acc, o) in overall.iter_mut().zip(&orders) {
                *acc = acc.chain(*o);
            }
            PairOrder {
                from: w[0].value,
                to: w[1].value,
                orders,
                diff_range,
            }
        })
        .collect();
    Ok(StudyReport {
        axis,
        entries,
        pairs,
        overall,
        slack,
    })
}

impl fmt::Display for StudyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.entries.iter().map(|e| e.value.to_string()).collect();
        writeln!(f, "axis: {} ({})", self.axis, self.axis.symbol())?;
        writeln!(f, "values: {}", vals.join(", "))?;
        writeln!(f, "order slack: {:e}", self.slack)?;
        for e in &self.entries {
            let fail = e.mesh.failures().count();
            writeln!(
                f,
                "mesh {} = {}: n = {}, failed nodes = {}, conditions {}",
                self.axis.symbol(),
                e.value,
                e.mesh.n,
                fail,
                if e.mesh.conditions_hold { "hold" } else { "VIOLATED" }
            )?;
        }
        for p in &self.pairs {
            for (c, (o, (lo, hi))) in p.orders.iter().zip(&p.diff_range).enumerate() {
                writeln!(
                    f,
                    "y{} from {} to {}: {} (diff in [{:.3e}, {:.3e}])",
                    c + 1,
                    p.from,
                    p.to,
                    o,
                    lo,
                    hi
                )?;
            }
        }
        for (c, o) in self.overall.iter().enumerate() {
            writeln!(f, "y{} overall: {} in {}", c + 1, o, self.axis.symbol())?;
        }
        if self.uniformly_ordered() {
            writeln!(f, "result: uniformly ordered")
        } else {
            writeln!(f, "result: not uniformly ordered")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoeffValues, Nonlinearity};

    fn scalar(d: f64, beta: f64, c: f64) -> SystemSpec {
        SystemSpec::constant(
            CoeffValues {
                d: vec![d],
                a: vec![vec![0.0]],
                beta: vec![beta],
                c: vec![c],
            },
            vec![1.0],
            Nonlinearity::NicholsonExp,
        )
        .unwrap()
    }

    #[test]
    fn autonomous_equilibrium() {
        let p = pullback_point(
            &scalar(1.0, std::f64::consts::E, 1.0),
            TorusPoint::ORIGIN,
            &PullbackConfig::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((p.value[0] - 1.0).abs() < 1e-5, "{:?}", p);
        assert!(!p.trivial);
    }

    #[test]
    fn extinction_is_trivial() {
        let p = pullback_point(
            &scalar(1.0, 0.5, 1.0),
            TorusPoint::ORIGIN,
            &PullbackConfig::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(p.trivial, "{:?}", p);
    }

    #[test]
    fn no_convergence_reports_last_values() {
        let cfg = PullbackConfig {
            t_max: 20.0,
            tol: 1e-14,
            ..PullbackConfig::default()
        };
        let err = pullback_point(
            &SystemSpec::two_patch(ParamSet::default()),
            TorusPoint::ORIGIN,
            &cfg,
            &SolverConfig::default(),
        )
        .unwrap_err();
        match err {
            AttractorError::NoConvergence { t_max, last, previous } => {
                assert_eq!(t_max, 20.0);
                assert_eq!(last.len(), 2);
                assert_eq!(previous.len(), 2);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = PullbackConfig {
            lag: 0.0,
            ..PullbackConfig::default()
        };
        assert!(cfg.validate().is_err());
        let spec = scalar(1.0, 2.0, 1.0);
        assert!(compute_mesh(&spec, 0, &PullbackConfig::default(), &SolverConfig::default(), 1).is_err());
    }

    #[test]
    fn single_node_mesh_is_the_origin() {
        let spec = scalar(1.0, std::f64::consts::E, 1.0);
        let mesh = compute_mesh(&spec, 1, &PullbackConfig::default(), &SolverConfig::default(), 1).unwrap();
        assert_eq!(mesh.grid, vec![TorusPoint::ORIGIN]);
        let mut csv = Vec::new();
        mesh.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("i,j,theta1,theta2,y1,T_final\n0,0,"));
    }

    #[test]
    fn order_classification() {
        assert_eq!(Order::classify([0.1, 0.0, 2.0], 1e-6), Order::Increasing);
        assert_eq!(Order::classify([-0.1, -1e-7], 1e-6), Order::Decreasing);
        assert_eq!(Order::classify([1e-7, -1e-7], 1e-6), Order::Equal);
        assert_eq!(Order::classify([0.1, -0.1], 1e-6), Order::Mixed);
        assert_eq!(Order::Increasing.chain(Order::Equal), Order::Increasing);
        assert_eq!(Order::Increasing.chain(Order::Decreasing), Order::Mixed);
        assert_eq!(Order::Decreasing.reversed(), Order::Increasing);
    }

    #[test]
    fn axis_parsing_and_application() {
        let base = ParamSet::new(2.0, 0.3, 0.4).unwrap();
        let axis: StudyAxis = "mortality".parse().unwrap();
        assert_eq!(axis.apply(base, 5.0).unwrap(), ParamSet::new(5.0, 0.3, 0.4).unwrap());
        assert_eq!(
            StudyAxis::BothMigrations.apply(base, 0.8).unwrap(),
            ParamSet::new(2.0, 0.8, 0.8).unwrap()
        );
        assert_eq!(
            StudyAxis::Alpha12Only.apply(base, 0.01).unwrap(),
            ParamSet::new(2.0, 0.01, 0.4).unwrap()
        );
        for a in [StudyAxis::BothMigrations, StudyAxis::Alpha12Only, StudyAxis::Mortality] {
            assert_eq!(a.to_string().parse::<StudyAxis>().unwrap(), a);
        }
        assert!("sideways".parse::<StudyAxis>().is_err());
    }
}
