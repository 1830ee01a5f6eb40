//! Exact evaluation of decision trees and the brute-force search over them.

use super::tree::{fixed_first_count, strategy_count, terminators, Tree, MAX_DEPTH, MEASUREMENT_AXES};
use crate::action::{Action, Axis};
use crate::error::{QffError, Result};
use crate::linalg::{kron, pauli, re, reduce_to_qubit, trace_norm, CMat};
use crate::metrics::golden_section;
use crate::qmem::{build_generator, step_maps_with, CPBranch, LogicalFrame, NoiseGenerator, NoiseKind, SuperOp};
use crate::scenario::ScenarioConfig;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Branches lighter than this are dropped and the rest renormalized.
pub const MIN_PATH_PROBABILITY: f64 = 1e-12;

/// One data qubit (index 0) and up to two ancillas under collective dephasing.
#[derive(Clone, Debug)]
pub struct OracleModel {
    pub t_dec: f64,
    pub moments: Vec<f64>,
    generator: NoiseGenerator,
}

impl OracleModel {
    pub fn new(t_dec: f64, moments: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&moments.len()) {
            return Err(QffError::InvalidParameter(format!(
                "oracles support one data qubit and one or two ancillas, got {} qubits",
                moments.len()
            )));
        }
        if moments[0] == 0.0 {
            return Err(QffError::InvalidParameter("data-qubit coupling must be nonzero".into()));
        }
        let generator = build_generator(NoiseKind::CorrelatedDephasing, moments.len(), t_dec, moments)?;
        Ok(Self { t_dec, moments: moments.to_vec(), generator })
    }

    /// Couplings given relative to the data qubit, scaled to a trivial decay time.
    pub fn from_ratios(ratios: &[f64], t_triv: f64) -> Result<Self> {
        let s: f64 = ratios.iter().map(|m| m * m).sum();
        Self::new(t_triv * ratios[0] * ratios[0] / s, ratios)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.noise.kind != NoiseKind::CorrelatedDephasing {
            return Err(QffError::Unsupported("strategy oracles need correlated dephasing".into()));
        }
        let t_dec = cfg.noise.t_dec.ok_or_else(|| QffError::Config("oracles need a finite T_dec".into()))?;
        if cfg.qubits != cfg.noise.moments.len() {
            return Err(QffError::Config("one coupling per qubit required".into()));
        }
        Self::new(t_dec, &cfg.noise.moments)
    }

    pub fn n_qubits(&self) -> usize {
        self.moments.len()
    }

    pub fn ancillas(&self) -> Vec<usize> {
        (1..self.n_qubits()).collect()
    }

    /// Decay time of the unprotected data qubit.
    pub fn t_triv(&self) -> f64 {
        self.generator.t_single()
    }

    /// Data qubit carries the logical state, ancillas start in +x.
    pub fn initial_frame(&self) -> LogicalFrame {
        let n = self.n_qubits();
        let plus = (pauli(0) + pauli(1)) * re(0.5);
        let mut rest = CMat::identity(1, 1);
        for _ in 1..n {
            rest = kron(&rest, &plus);
        }
        let rho0 = kron(&(pauli(0) * re(0.5)), &rest);
        let delta = [1, 2, 3].map(|k| kron(&(pauli(k) * re(0.5)), &rest));
        LogicalFrame::from_parts(n, rho0, delta)
    }

    /// `e^{idle D}`; collective dephasing is diagonal in the product basis.
    fn propagator(&self, idle: f64) -> SuperOp {
        let g = &self.generator.superop;
        let n = g.nrows();
        let diagonal = (0..n).all(|r| (0..n).all(|c| r == c || g[(r, c)].norm() == 0.0));
        if !diagonal {
            return self.generator.propagator(idle);
        }
        let mut e = CMat::zeros(n, n);
        for i in 0..n {
            e[(i, i)] = (g[(i, i)] * re(idle)).exp();
        }
        SuperOp::from_dense(&e, self.generator.dim())
    }

    fn measure_maps(&self, idle: f64, qubit: usize, axis: Axis) -> Result<Vec<CPBranch>> {
        let n = self.n_qubits();
        if qubit == 0 || qubit >= n {
            return Err(QffError::InvalidParameter(format!("qubit {qubit} is not an ancilla")));
        }
        let mut maps = step_maps_with(&Action::Measure { qubit, axis }, n, &SuperOp::identity(1 << n), 0.0)?;
        if idle > 0.0 {
            let prop = self.propagator(idle);
            for b in maps.iter_mut() {
                b.map = b.map.compose(&prop);
            }
        }
        Ok(maps)
    }
}

/// R_Q of an oracle frame. Rotating the data qubit about z commutes with
/// collective dephasing and with ancilla measurements, so the trace norm is
/// the same for every equatorial direction and the x component suffices.
fn rq(frame: &LogicalFrame) -> Result<f64> {
    let v = trace_norm(&frame.delta[0]);
    if !v.is_finite() {
        return Err(QffError::NonFinite("trace norm".into()));
    }
    Ok(v)
}

/// The frame restricted to the data qubit, ancillas discarded.
fn data_only(frame: &LogicalFrame) -> LogicalFrame {
    let n = frame.n_qubits;
    let r = |m: &CMat| reduce_to_qubit(m, 0, n);
    LogicalFrame::from_parts(1, r(&frame.rho0), [0, 1, 2].map(|j| r(&frame.delta[j])))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchOutcome {
    pub probability: f64,
    pub time: f64,
    /// Ratio of final to initial R_Q.
    pub gain: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyEvaluation {
    pub branches: Vec<BranchOutcome>,
    pub mean_time: f64,
    pub mean_log_gain: f64,
    pub t_eff: f64,
    /// Probability mass dropped below the path threshold.
    pub dropped_mass: f64,
}

fn check_idle(idle: f64) -> Result<()> {
    if !(idle >= 0.0) || !idle.is_finite() {
        return Err(QffError::InvalidParameter(format!("idle time {idle}")));
    }
    Ok(())
}

fn t_eff_of(mean_time: f64, mean_log_gain: f64) -> Result<f64> {
    if !(mean_time > 0.0) {
        return Err(QffError::DecayUndefined("cycle has zero duration".into()));
    }
    Ok(if mean_log_gain < 0.0 { -2.0 * mean_time / mean_log_gain } else { f64::INFINITY })
}

/// Enumerate the branches of one cycle and its effective decay time
/// `-2 <T> / <ln G>`.
pub fn evaluate_strategy(model: &OracleModel, tree: &Tree) -> Result<StrategyEvaluation> {
    let start = model.initial_frame();
    let rq0 = rq(&start)?;
    let mut branches = Vec::new();
    let mut dropped = 0.0;
    walk(model, tree, &start, 1.0, 0.0, rq0, &mut branches, &mut dropped)?;
    let mass: f64 = branches.iter().map(|b| b.probability).sum();
    let mean_time = branches.iter().map(|b| b.probability * b.time).sum::<f64>() / mass;
    let mean_log_gain = branches.iter().map(|b| b.probability * b.gain.ln()).sum::<f64>() / mass;
    let t_eff = t_eff_of(mean_time, mean_log_gain)?;
    Ok(StrategyEvaluation { branches, mean_time, mean_log_gain, t_eff, dropped_mass: dropped })
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &OracleModel,
    tree: &Tree,
    frame: &LogicalFrame,
    p: f64,
    time: f64,
    rq0: f64,
    out: &mut Vec<BranchOutcome>,
    dropped: &mut f64,
) -> Result<()> {
    let (idle, qubit, axis, children) = match tree {
        Tree::End => {
            out.push(BranchOutcome { probability: p, time, gain: rq(frame)? / rq0 });
            return Ok(());
        }
        Tree::Wait { idle } => {
            check_idle(*idle)?;
            let f = frame.evolve(&CPBranch { outcome: None, label: "idle", map: model.propagator(*idle) })?;
            out.push(BranchOutcome { probability: p, time: time + idle, gain: rq(&data_only(&f))? / rq0 });
            return Ok(());
        }
        Tree::Terminate { qubit, axis } => (0.0, *qubit, *axis, None),
        Tree::Measure { idle, qubit, axis, children } => (*idle, *qubit, *axis, Some(children)),
    };
    check_idle(idle)?;
    let maps = model.measure_maps(idle, qubit, axis)?;
    for (o, b) in maps.iter().enumerate() {
        let po = b.probability(frame);
        if p * po < MIN_PATH_PROBABILITY {
            *dropped += (p * po).max(0.0);
            continue;
        }
        let f = frame.evolve(b)?;
        match children {
            Some(c) => walk(model, &c[o], &f, p * po, time + idle, rq0, out, dropped)?,
            None => out.push(BranchOutcome { probability: p * po, time: time + idle, gain: rq(&f)? / rq0 }),
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub depth: usize,
    /// Idle durations in units of the trivial decay time.
    pub grid: Vec<f64>,
    /// Fix the first measurement and mirror its second subtree.
    pub fixed_first: bool,
    pub top_k: usize,
    /// Refuse searches with more candidate trees than this.
    pub max_strategies: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { depth: 1, grid: default_idle_grid(12), fixed_first: false, top_k: 20, max_strategies: 100_000_000 }
    }
}

/// `n` log-spaced values in `[0.01, 1]`.
pub fn default_idle_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.1];
    }
    (0..n).map(|i| 10f64.powf(-2.0 + 2.0 * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RankedStrategy {
    pub rank: usize,
    pub tree: String,
    pub t_eff: f64,
    pub mean_time: f64,
    pub branches: usize,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: Tree,
    /// Exact evaluation of the best tree.
    pub evaluation: StrategyEvaluation,
    pub ranking: Vec<RankedStrategy>,
    pub candidates: BigUint,
    pub t_triv: f64,
}

pub const RANKING_HEADER: &str = "rank,tree,t_eff,mean_time,branches";

impl SearchResult {
    pub fn ranking_csv(&self) -> String {
        let mut s = String::from(RANKING_HEADER);
        s.push('\n');
        for r in &self.ranking {
            s.push_str(&format!("{},\"{}\",{:.12e},{:.12e},{}\n", r.rank, r.tree, r.t_eff, r.mean_time, r.branches));
        }
        s
    }
}

/// Additive cycle statistics of a subtree: `a = sum p T`, `b = sum p ln G`.
#[derive(Clone, Copy, Debug, Default)]
struct Value {
    a: f64,
    b: f64,
}

impl Value {
    fn score(self) -> f64 {
        t_eff_of(self.a, self.b).unwrap_or(f64::NAN)
    }
}

/// Best `k` entries ordered by score, ties broken by enumeration order.
struct TopK {
    k: usize,
    items: Vec<(f64, (usize, u64), Tree)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    fn better(a: &(f64, (usize, u64)), b: &(f64, (usize, u64))) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn admits(&self, score: f64, key: (usize, u64)) -> bool {
        !score.is_nan()
            && (self.items.len() < self.k || {
                let w = self.items.last().unwrap();
                Self::better(&(score, key), &(w.0, w.1))
            })
    }

    fn push(&mut self, score: f64, key: (usize, u64), tree: Tree) {
        let pos = self.items.iter().position(|e| Self::better(&(score, key), &(e.0, e.1))).unwrap_or(self.items.len());
        self.items.insert(pos, (score, key, tree));
        self.items.truncate(self.k);
    }

    fn merge(mut self, other: TopK) -> TopK {
        for (s, key, t) in other.items {
            if self.admits(s, key) {
                self.push(s, key, t);
            }
        }
        self
    }
}

struct Searcher {
    ancillas: Vec<usize>,
    idles: Vec<f64>,
    /// Branch maps per (idle index, ancilla index, axis index).
    node_maps: Vec<Vec<CPBranch>>,
    /// Immediate measurement maps per (ancilla index, axis index).
    term_maps: Vec<Vec<CPBranch>>,
    rq0: f64,
}

type Children = Vec<(Option<LogicalFrame>, f64)>;

impl Searcher {
    fn new(model: &OracleModel, idles: Vec<f64>) -> Result<Self> {
        let ancillas = model.ancillas();
        let mut node_maps = Vec::new();
        for &idle in &idles {
            for &q in &ancillas {
                for axis in MEASUREMENT_AXES {
                    node_maps.push(model.measure_maps(idle, q, axis)?);
                }
            }
        }
        let mut term_maps = Vec::new();
        for &q in &ancillas {
            for axis in MEASUREMENT_AXES {
                term_maps.push(model.measure_maps(0.0, q, axis)?);
            }
        }
        let rq0 = rq(&model.initial_frame())?;
        Ok(Self { ancillas, idles, node_maps, term_maps, rq0 })
    }

    fn choice(&self, c: usize) -> (usize, Axis) {
        (self.ancillas[c / 2], MEASUREMENT_AXES[c % 2])
    }

    fn n_choices(&self) -> usize {
        2 * self.ancillas.len()
    }

    /// Outcome frames and path probabilities; `None` marks a dropped branch.
    fn split(&self, maps: &[CPBranch], frame: Option<&LogicalFrame>, p: f64) -> Result<Children> {
        let Some(frame) = frame else { return Ok(vec![(None, 0.0); 2]) };
        maps.iter()
            .map(|b| {
                let pp = p * b.probability(frame);
                if pp < MIN_PATH_PROBABILITY { Ok((None, 0.0)) } else { Ok((Some(frame.evolve(b)?), pp)) }
            })
            .collect()
    }

    fn leaf(&self, frame: Option<&LogicalFrame>, p: f64) -> Result<Value> {
        Ok(match frame {
            Some(f) => Value { a: 0.0, b: p * (rq(f)? / self.rq0).ln() },
            None => Value::default(),
        })
    }

    fn terminators(&self, frame: Option<&LogicalFrame>, p: f64, last: usize) -> Result<Vec<(Tree, Value)>> {
        let trees = terminators(&self.ancillas, last);
        trees
            .into_iter()
            .map(|t| {
                let v = match &t {
                    Tree::Terminate { qubit, axis } => {
                        let qi = self.ancillas.iter().position(|q| q == qubit).unwrap();
                        let c = 2 * qi + usize::from(*axis == Axis::Y);
                        let mut v = Value::default();
                        for (f, pp) in self.split(&self.term_maps[c], frame, p)? {
                            v.b += self.leaf(f.as_ref(), pp)?.b;
                        }
                        v
                    }
                    _ => self.leaf(frame, p)?,
                };
                Ok((t, v))
            })
            .collect()
    }

    /// Terminators plus every node of depth `1..=r`, materialized.
    fn options(&self, frame: Option<&LogicalFrame>, p: f64, last: usize, r: usize) -> Result<Vec<(Tree, Value)>> {
        let mut out = self.terminators(frame, p, last)?;
        if r > 0 {
            self.for_each_node(frame, p, r, &mut |v, build| out.push((build(), v)))?;
        }
        Ok(out)
    }

    /// Visit every node of depth `1..=r` rooted at `frame` in enumeration order.
    fn for_each_node(
        &self,
        frame: Option<&LogicalFrame>,
        p: f64,
        r: usize,
        visit: &mut dyn FnMut(Value, &dyn Fn() -> Tree),
    ) -> Result<()> {
        for (ti, &idle) in self.idles.iter().enumerate() {
            for c in 0..self.n_choices() {
                self.for_each_under(frame, p, r, ti, c, idle, visit)?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn for_each_under(
        &self,
        frame: Option<&LogicalFrame>,
        p: f64,
        r: usize,
        ti: usize,
        c: usize,
        idle: f64,
        visit: &mut dyn FnMut(Value, &dyn Fn() -> Tree),
    ) -> Result<()> {
        let (q, axis) = self.choice(c);
        let kids = self.split(&self.node_maps[ti * self.n_choices() + c], frame, p)?;
        let o0 = self.options(kids[0].0.as_ref(), kids[0].1, q, r - 1)?;
        let o1 = self.options(kids[1].0.as_ref(), kids[1].1, q, r - 1)?;
        let a = if frame.is_some() { idle * p } else { 0.0 };
        for (t0, v0) in &o0 {
            for (t1, v1) in &o1 {
                let v = Value { a: a + v0.a + v1.a, b: v0.b + v1.b };
                visit(v, &|| Tree::measure(idle, q, axis, t0.clone(), t1.clone()));
            }
        }
        Ok(())
    }
}

/// Exhaustive search for the tree with the largest effective decay time.
///
/// The idle-only cycle for each grid value competes as a baseline, ranked
/// after every enumerated tree on ties.
pub fn brute_force_search(model: &OracleModel, opts: &SearchOptions) -> Result<SearchResult> {
    if opts.depth == 0 || opts.grid.is_empty() || opts.top_k == 0 {
        return Err(QffError::InvalidParameter("search needs depth >= 1, a nonempty grid and top_k >= 1".into()));
    }
    if opts.depth > MAX_DEPTH {
        return Err(QffError::SearchTooLarge(format!("depth {} exceeds the supported maximum {MAX_DEPTH}", opts.depth)));
    }
    if opts.grid.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(QffError::InvalidParameter("idle grid values must be positive".into()));
    }
    let na = model.ancillas().len();
    let candidates = if opts.fixed_first {
        fixed_first_count(opts.depth, opts.grid.len(), na)
    } else {
        strategy_count(opts.depth, opts.grid.len(), na)
    };
    if candidates > BigUint::from(opts.max_strategies) {
        return Err(QffError::SearchTooLarge(format!(
            "{candidates} candidate trees exceed the limit of {}; reduce the depth or the idle grid",
            opts.max_strategies
        )));
    }
    let t_triv = model.t_triv();
    let idles: Vec<f64> = opts.grid.iter().map(|g| g * t_triv).collect();
    let s = Searcher::new(model, idles.clone())?;
    let start = model.initial_frame();
    let k = opts.top_k;

    let top = if opts.fixed_first {
        // Strongest ancilla measured along y, orthogonal to its preparation.
        let qi = (0..na).fold(0, |best, i| if model.moments[i + 1] > model.moments[best + 1] { i } else { best });
        let q = s.ancillas[qi];
        let c = 2 * qi + 1;
        let parts: Vec<Result<TopK>> = (0..idles.len())
            .into_par_iter()
            .map(|ti| {
                let mut top = TopK::new(k);
                let kids = s.split(&s.node_maps[ti * s.n_choices() + c], Some(&start), 1.0)?;
                let (f0, p0) = (kids[0].0.as_ref(), kids[0].1);
                let idle = idles[ti];
                let mut seq = 0u64;
                let mut consider = |v: Value, build: &dyn Fn() -> Tree| {
                    let total = Value { a: idle + 2.0 * v.a, b: 2.0 * v.b };
                    let key = (ti, seq);
                    seq += 1;
                    let score = total.score();
                    if top.admits(score, key) {
                        let c0 = build();
                        let c1 = c0.mirror();
                        top.push(score, key, Tree::measure(idle, q, Axis::Y, c0, c1));
                    }
                };
                for (t, v) in s.terminators(f0, p0, q)? {
                    consider(v, &|| t.clone());
                }
                s.for_each_node(f0, p0, opts.depth, &mut consider)?;
                Ok(top)
            })
            .collect();
        merge_all(parts, k)?
    } else {
        let nc = s.n_choices();
        let parts: Vec<Result<TopK>> = (0..idles.len() * nc)
            .into_par_iter()
            .map(|slot| {
                let mut top = TopK::new(k);
                let mut seq = 0u64;
                s.for_each_under(Some(&start), 1.0, opts.depth, slot / nc, slot % nc, idles[slot / nc], &mut |v, build| {
                    let key = (slot, seq);
                    seq += 1;
                    let score = v.score();
                    if top.admits(score, key) {
                        top.push(score, key, build());
                    }
                })?;
                Ok(top)
            })
            .collect();
        merge_all(parts, k)?
    };

    let mut top = top;
    for (i, &idle) in idles.iter().enumerate() {
        let tree = Tree::Wait { idle };
        let t_eff = evaluate_strategy(model, &tree)?.t_eff;
        let key = (usize::MAX, i as u64);
        if top.admits(t_eff, key) {
            top.push(t_eff, key, tree);
        }
    }
    let best = top.items[0].2.clone();
    let evaluation = evaluate_strategy(model, &best)?;
    let ranking = top
        .items
        .into_iter()
        .enumerate()
        .map(|(i, (t_eff, _, tree))| {
            let e = evaluate_strategy(model, &tree)?;
            Ok(RankedStrategy { rank: i + 1, tree: tree.to_string(), t_eff, mean_time: e.mean_time, branches: e.branches.len() })
        })
        .collect::<Result<_>>()?;
    Ok(SearchResult { best, evaluation, ranking, candidates, t_triv })
}

fn merge_all(parts: Vec<Result<TopK>>, k: usize) -> Result<TopK> {
    let mut top = TopK::new(k);
    for p in parts {
        top = top.merge(p?);
    }
    Ok(top)
}

/// Coordinate-wise golden-section refinement of the idle durations, in log
/// space within a factor of three of the current values.
pub fn refine(model: &OracleModel, tree: &Tree, rounds: usize) -> Result<(Tree, StrategyEvaluation)> {
    let mut idles = tree.idles();
    let mut best = evaluate_strategy(model, tree)?;
    for _ in 0..rounds {
        for i in 0..idles.len() {
            if idles[i] <= 0.0 {
                continue;
            }
            let objective = |u: f64| {
                let mut trial = idles.clone();
                trial[i] = u.exp();
                evaluate_strategy(model, &tree.with_idles(&trial)).map(|e| -e.t_eff).unwrap_or(f64::INFINITY)
            };
            let u0 = idles[i].ln();
            let spread = 3f64.ln();
            let (u, v) = golden_section(objective, u0 - spread, u0 + spread, 1e-6);
            if -v > best.t_eff {
                idles[i] = u.exp();
                best = evaluate_strategy(model, &tree.with_idles(&idles))?;
            }
        }
    }
    Ok((tree.with_idles(&idles), best))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub mu2: f64,
    pub mu3: f64,
    pub strategy_id: usize,
    pub shape: String,
    pub t_eff_over_t_triv: f64,
    pub tree: String,
}

pub const SWEEP_HEADER: &str = "mu2_over_mu1,mu3_over_mu1,strategy_id,t_eff_over_t_triv,shape,tree";

/// Winning strategy family over a grid of ancilla couplings relative to the
/// data qubit. Families are numbered in order of first appearance.
pub fn sweep(mu2: &[f64], mu3: &[f64], t_triv: f64, opts: &SearchOptions) -> Result<Vec<SweepRow>> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    for &m2 in mu2 {
        for &m3 in mu3 {
            let model = OracleModel::from_ratios(&[1.0, m2, m3], t_triv)?;
            let res = brute_force_search(&model, opts)?;
            let shape = res.best.shape();
            let next = ids.len();
            let id = *ids.entry(shape.clone()).or_insert(next);
            rows.push(SweepRow {
                mu2: m2,
                mu3: m3,
                strategy_id: id,
                shape,
                t_eff_over_t_triv: res.evaluation.t_eff / t_triv,
                tree: res.best.to_string(),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.12e},\"{}\",\"{}\"\n",
            r.mu2, r.mu3, r.strategy_id, r.t_eff_over_t_triv, r.shape, r.tree
        ));
    }
    s
}
