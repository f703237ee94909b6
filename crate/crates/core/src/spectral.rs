//! Persistence analysis through the linearization at the null solution.
//!
//! The migration bound matrix `Ā = [sup a_ij]` is brought to block lower
//! triangular form with irreducible diagonal blocks (strongly connected
//! components of its digraph). For every block whose row has no
//! off-diagonal coupling, the growth rate of the block's linear delay system
//! started from the constant map 1 is estimated; the system is uniformly
//! persistent at 0 iff all of those exponents are positive.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, Write};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::conditions::{compute_bounds, Sampling};
use crate::dde::{step_count, DelaySystem, History, Integrator, SolverConfig};
use crate::error::SpectralError;
use crate::model::{Affine, Shape, SystemSpec};
use crate::torus::TorusPoint;

/// `z_i' = −d_i z_i + Σ_{l∈I} a_il z_l + β_i z_i(t − r_i)` for `i ∈ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    /// patch indices (into the full system) covered by this system
    indices: Vec<usize>,
    delays: Vec<f64>,
    d: Vec<Affine>,
    /// row-major over `indices`
    a: Vec<Affine>,
    /// delayed coefficient `β_i g'(0)`
    delayed: Vec<Affine>,
    p: Shape,
    q: Shape,
}

/// Linearization of `spec` along the null solution, all patches.
pub fn linearize_at_zero(spec: &SystemSpec) -> LinearizedSystem {
    let m = spec.dim();
    let cf = spec.affine();
    let slope = spec.nonlinearity().slope_at_zero();
    let (p, q) = spec.shapes();
    LinearizedSystem {
        indices: (0..m).collect(),
        delays: spec.delays().to_vec(),
        d: cf.d.clone(),
        a: cf.a.clone(),
        delayed: cf.beta.iter().map(|b| b.scale(slope)).collect(),
        p,
        q,
    }
}

impl LinearizedSystem {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Subsystem on the patches `subset` (indices into the full system),
    /// dropping migration from patches outside it.
    pub fn restrict(&self, subset: &[usize]) -> LinearizedSystem {
        let pos = |g: usize| {
            self.indices
                .iter()
                .position(|&x| x == g)
                .unwrap_or_else(|| panic!("patch {g} not in this system"))
        };
        let local: Vec<usize> = subset.iter().map(|&g| pos(g)).collect();
        let n = self.dim();
        LinearizedSystem {
            indices: subset.to_vec(),
            delays: local.iter().map(|&l| self.delays[l]).collect(),
            d: local.iter().map(|&l| self.d[l]).collect(),
            a: local
                .iter()
                .flat_map(|&i| local.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.a[i * n + j])
                .collect(),
            delayed: local.iter().map(|&l| self.delayed[l]).collect(),
            p: self.p,
            q: self.q,
        }
    }

    pub fn at(&self, theta: TorusPoint) -> LinearizedField<'_> {
        LinearizedField { sys: self, theta }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearizedField<'a> {
    sys: &'a LinearizedSystem,
    theta: TorusPoint,
}

impl DelaySystem for LinearizedField<'_> {
    fn dim(&self) -> usize {
        self.sys.indices.len()
    }

    fn delays(&self) -> &[f64] {
        &self.sys.delays
    }

    fn eval(&self, t: f64, y: &[f64], y_delayed: &[f64], out: &mut [f64]) {
        let s = self.sys;
        let p = s.p.eval(self.theta.theta1() + t);
        let q = s.q.eval(self.theta.theta2() + std::f64::consts::SQRT_2 * t);
        let n = s.indices.len();
        for i in 0..n {
            let mut acc = -s.d[i].eval(p, q) * y[i] + s.delayed[i].eval(p, q) * y_delayed[i];
            for j in 0..n {
                acc += s.a[i * n + j].eval(p, q) * y[j];
            }
            out[i] = acc;
        }
    }
}

/// Block lower triangular structure of a nonnegative zero-diagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub a_plus: Vec<Vec<f64>>,
    /// `permutation[k]` is the original index placed at position `k`
    pub permutation: Vec<usize>,
    /// diagonal blocks in order, as sorted original indices
    pub blocks: Vec<Vec<usize>>,
    /// 0-based block indices whose row has only null off-diagonal blocks
    pub persistence_set: Vec<usize>,
}

impl BlockDecomposition {
    /// `Ā` with rows and columns reordered by the permutation.
    pub fn permuted(&self) -> Vec<Vec<f64>> {
        let p = &self.permutation;
        p.iter()
            .map(|&i| p.iter().map(|&j| self.a_plus[i][j]).collect())
            .collect()
    }

    pub fn block_of(&self, patch: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&patch))
            .expect("every patch belongs to a block")
    }
}

/// Strongly connected components of the digraph with an edge `j → i` when
/// `a_plus[i][j] > 0`, ordered so the permuted matrix is block lower
/// triangular. Ties in the topological order go to the block with the
/// smallest patch index.
pub fn block_decompose(a_plus: &[Vec<f64>]) -> BlockDecomposition {
    let m = a_plus.len();
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|j| (0..m).filter(|&i| i != j && a_plus[i][j] > 0.0).collect())
        .collect();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..m).map(|_| graph.add_node(())).collect();
    for (j, out) in adj.iter().enumerate() {
        for &i in out {
            graph.add_edge(nodes[j], nodes[i], ());
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| c.into_iter().map(|v| v.index()).collect())
        .collect();
    comps.iter_mut().for_each(|c| c.sort_unstable());
    let k = comps.len();
    let mut comp_of = vec![0; m];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut succ = vec![BTreeSet::new(); k];
    let mut indeg = vec![0usize; k];
    for j in 0..m {
        for &i in &adj[j] {
            let (cj, ci) = (comp_of[j], comp_of[i]);
            if cj != ci && succ[cj].insert(ci) {
                indeg[ci] += 1;
            }
        }
    }
    let has_incoming: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();

    // Kahn, smallest member first
    let mut ready: BTreeSet<(usize, usize)> = (0..k)
        .filter(|&c| indeg[c] == 0)
        .map(|c| (comps[c][0], c))
        .collect();
    let mut order = Vec::with_capacity(k);
    while let Some(&first) = ready.iter().next() {
        ready.remove(&first);
        let c = first.1;
        order.push(c);
        for &n in &succ[c] {
            indeg[n] -= 1;
            if indeg[n] == 0 {
                ready.insert((comps[n][0], n));
            }
        }
    }

    let blocks: Vec<Vec<usize>> = order.iter().map(|&c| comps[c].clone()).collect();
    let permutation = blocks.iter().flatten().copied().collect();
    let persistence_set = if k == 1 {
        vec![0]
    } else {
        order
            .iter()
            .enumerate()
            .filter(|(_, &c)| !has_incoming[c])
            .map(|(pos, _)| pos)
            .collect()
    };
    BlockDecomposition {
        a_plus: a_plus.to_vec(),
        permutation,
        blocks,
        persistence_set,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub horizon: f64,
    pub solver: SolverConfig,
    /// rescale when the window norm leaves `[1/threshold, threshold]`
    pub renorm_threshold: f64,
    pub checkpoints: usize,
    /// maximum gap between the estimates at `T/2` and `T`
    pub convergence_gap: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            horizon: 2000.0,
            solver: SolverConfig::default(),
            renorm_threshold: 1e6,
            checkpoints: 20,
            convergence_gap: 1e-3,
        }
    }
}

impl LyapunovConfig {
    pub fn with_horizon(self, horizon: f64) -> Self {
        LyapunovConfig { horizon, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovResult {
    pub lambda: f64,
    pub horizon: f64,
    /// `(t, running estimate)` at every checkpoint, the last one at `t = T`
    pub history: Vec<(f64, f64)>,
    /// running estimate at `T/2`
    pub half_estimate: f64,
    pub converged: bool,
    pub renormalizations: usize,
}

impl LyapunovResult {
    pub fn require_converged(self) -> Result<Self, SpectralError> {
        if self.converged {
            Ok(self)
        } else {
            Err(SpectralError::NotConverged {
                history: self.history,
            })
        }
    }
}

/// Sliding maximum of node norms over `[t − r, t]`.
struct WindowMax {
    width: usize,
    deque: VecDeque<usize>,
    /// sup of the initial map over its sampled nodes, before rescaling
    history_sup: f64,
}

impl WindowMax {
    fn push(&mut self, integ: &Integrator<'_, impl DelaySystem + ?Sized>, k: usize) {
        let traj = integ.trajectory();
        let v = traj.node_norm(k);
        while let Some(&back) = self.deque.back() {
            if traj.node_norm(back) <= v {
                self.deque.pop_back();
            } else {
                break;
            }
        }
        self.deque.push_back(k);
        while let Some(&front) = self.deque.front() {
            if front + self.width < k {
                self.deque.pop_front();
            } else {
                break;
            }
        }
    }

    fn norm(&self, integ: &Integrator<'_, impl DelaySystem + ?Sized>, k: usize, scale: f64) -> f64 {
        let traj = integ.trajectory();
        let mut n = self.deque.front().map_or(0.0, |&f| traj.node_norm(f));
        if k < self.width {
            n = n.max(self.history_sup * scale);
        }
        n
    }
}

/// Growth rate of the linear system from the constant initial map 1, with
/// renormalization of the whole solution whenever the window norm leaves
/// `[1/threshold, threshold]`.
pub fn lyapunov_exponent(
    block: &LinearizedSystem,
    theta: TorusPoint,
    config: &LyapunovConfig,
) -> Result<LyapunovResult, SpectralError> {
    if !(config.horizon >= 200.0) || !config.horizon.is_finite() {
        return Err(SpectralError::InvalidConfig(format!(
            "horizon must be >= 200, got {}",
            config.horizon
        )));
    }
    if !(config.renorm_threshold > 1.0) || config.checkpoints < 2 {
        return Err(SpectralError::InvalidConfig(
            "renorm_threshold must exceed 1 and at least 2 checkpoints are needed".into(),
        ));
    }
    let field = block.at(theta);
    let steps = step_count(config.horizon, config.solver.h);
    let h = config.horizon / steps as f64;
    let solver = SolverConfig { h, ..config.solver };
    let mut integ = Integrator::new(&field, History::constant(1.0, block.dim()), solver)?;

    let width = (field.max_delay() / h).round() as usize;
    let mut window = WindowMax {
        width,
        deque: VecDeque::new(),
        history_sup: 1.0,
    };
    window.push(&integ, 0);

    let checkpoint_nodes: Vec<usize> = (1..=config.checkpoints)
        .map(|c| ((c * steps) as f64 / config.checkpoints as f64).round() as usize)
        .collect();
    let half_node = steps / 2;
    let mut next_cp = 0;
    let mut log_acc = 0.0;
    let mut scale = 1.0;
    let mut renorms = 0;
    let mut history = Vec::with_capacity(config.checkpoints);
    let mut half_estimate = f64::NAN;
    let lo = 1.0 / config.renorm_threshold;

    for k in 1..=steps {
        integ.step()?;
        window.push(&integ, k);
        let mut norm = window.norm(&integ, k, scale);
        if norm > config.renorm_threshold || norm < lo {
            if !(norm > 0.0) {
                return Err(crate::SolverError::NonfiniteState { step: k }.into());
            }
            log_acc += norm.ln();
            integ.rescale(1.0 / norm);
            scale /= norm;
            renorms += 1;
            norm = window.norm(&integ, k, scale);
        }
        let t = k as f64 * h;
        if k == half_node {
            half_estimate = (log_acc + norm.ln()) / t;
        }
        if next_cp < checkpoint_nodes.len() && k == checkpoint_nodes[next_cp] {
            history.push((t, (log_acc + norm.ln()) / t));
            next_cp += 1;
        }
    }
    let lambda = history.last().expect("at least one checkpoint").1;
    Ok(LyapunovResult {
        lambda,
        horizon: config.horizon,
        history,
        half_estimate,
        converged: (lambda - half_estimate).abs() < config.convergence_gap,
        renormalizations: renorms,
    })
}

/// Estimates within this distance of zero cannot certify a sign.
pub const DECISION_BAND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Persistent,
    NotPersistent,
    Inconclusive(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Persistent => f.write_str("uniformly persistent at 0"),
            Verdict::NotPersistent => f.write_str("not persistent"),
            Verdict::Inconclusive(why) => write!(f, "inconclusive ({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockExponent {
    /// 0-based position of the block
    pub block: usize,
    pub indices: Vec<usize>,
    pub result: LyapunovResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    pub theta: TorusPoint,
    pub decomposition: BlockDecomposition,
    pub exponents: Vec<BlockExponent>,
    pub verdict: Verdict,
}

fn one_based(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(";")
}

impl PersistenceReport {
    /// Rows `block,indices,lambda,converged`, 1-based, indices `;`-separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "block,indices,lambda,converged")?;
        for e in &self.exponents {
            writeln!(
                w,
                "{},{},{},{}",
                e.block + 1,
                one_based(&e.indices),
                crate::dde::fmt_f64(e.result.lambda),
                e.result.converged
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for PersistenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dec = &self.decomposition;
        writeln!(f, "base point: {}", self.theta)?;
        writeln!(f, "migration bound matrix:")?;
        for row in &dec.a_plus {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        writeln!(f, "irreducible blocks: {}", dec.blocks.len())?;
        for (b, members) in dec.blocks.iter().enumerate() {
            writeln!(f, "  block {}: patches {}", b + 1, one_based(members))?;
        }
        let set: Vec<String> = dec.persistence_set.iter().map(|b| (b + 1).to_string()).collect();
        writeln!(f, "blocks deciding persistence: {{{}}}", set.join(", "))?;
        for e in &self.exponents {
            writeln!(
                f,
                "  lambda_{} = {:.6} (T = {}, T/2 estimate {:.6}, {})",
                e.block + 1,
                e.result.lambda,
                e.result.horizon,
                e.result.half_estimate,
                if e.result.converged { "converged" } else { "NOT converged" }
            )?;
        }
        writeln!(f, "verdict: {}", self.verdict)
    }
}

/// Decompose the migration bound matrix, estimate the exponents of the
/// deciding blocks at `theta`, and decide persistence.
pub fn persistence_verdict(
    spec: &SystemSpec,
    theta: TorusPoint,
    config: &LyapunovConfig,
) -> Result<PersistenceReport, SpectralError> {
    let bounds = compute_bounds(spec, &Sampling::ClosedForm);
    let decomposition = block_decompose(&bounds.a_plus);
    let full = linearize_at_zero(spec);
    let mut exponents = Vec::new();
    for &b in &decomposition.persistence_set {
        let indices = decomposition.blocks[b].clone();
        let result = lyapunov_exponent(&full.restrict(&indices), theta, config)?;
        exponents.push(BlockExponent {
            block: b,
            indices,
            result,
        });
    }
    let decided_negative = exponents
        .iter()
        .any(|e| e.result.converged && e.result.lambda <= -DECISION_BAND);
    let verdict = if decided_negative {
        Verdict::NotPersistent
    } else if let Some(e) = exponents.iter().find(|e| !e.result.converged) {
        Verdict::Inconclusive(format!("block {} not converged", e.block + 1))
    } else if exponents.iter().all(|e| e.result.lambda >= DECISION_BAND) {
        Verdict::Persistent
    } else {
        Verdict::Inconclusive("near-critical exponent".into())
    };
    Ok(PersistenceReport {
        theta,
        decomposition,
        exponents,
        verdict,
    })
}
