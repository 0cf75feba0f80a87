//! Branch-and-cut over the relaxation built by [`crate::formulation`].
//!
//! Nodes are explored best-bound first (FIFO among equal bounds). At each
//! node the LP is re-solved while subtour or cone cuts are found; integral
//! points are decoded into incumbents, fractional ones are branched on the
//! most fractional visit variable, then edge variable.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::formulation::{self, ModelSpec, Solution, Variant, VarMap};
use crate::instance::Instance;
use crate::lp::{LpModel, LpStatus};
use crate::oa::{self, ConeCut};
use crate::separation::{self, SecCut};

/// Safety cap on cut rounds at integral points, where rounds are otherwise
/// unbounded.
const MAX_INTEGRAL_ROUNDS: usize = 100_000;
/// Cone violation that triggers a cut at fractional nodes.
const CONE_CUT_TOL: f64 = 1e-6;
/// Relative cone violation still worth cutting at an integral p-norm point
/// whose bound has not yet met the incumbent.
const CONE_POLISH_TOL: f64 = 1e-10;
/// Cut rows slack for this many consecutive LP solves are dropped at the
/// next node.
const PURGE_AGE: usize = 20;
/// Row slack above which a cut counts as inactive.
const SLACK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub time_limit_seconds: f64,
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub integrality_tol: f64,
    /// SEC rows added per round; `None` means `m`.
    pub max_sec_cuts: Option<usize>,
    /// Cone cuts added per round; `None` means `m`.
    pub max_oa_cuts: Option<usize>,
    /// Cut rounds per node before branching at fractional points.
    pub max_cut_rounds: usize,
    pub symmetry_breaking: bool,
    /// Keep every emitted cut in [`SolveOutcome::cuts`].
    pub record_cuts: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            time_limit_seconds: 3600.0,
            rel_gap: 1e-6,
            abs_gap: 1e-6,
            integrality_tol: 1e-6,
            max_sec_cuts: None,
            max_oa_cuts: None,
            max_cut_rounds: 50,
            symmetry_breaking: true,
            record_cuts: false,
        }
    }
}

impl SolveParams {
    fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("time_limit_seconds", self.time_limit_seconds),
            ("rel_gap", self.rel_gap),
            ("abs_gap", self.abs_gap),
            ("integrality_tol", self.integrality_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Internal(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_sec_cuts == Some(0) || self.max_oa_cuts == Some(0) || self.max_cut_rounds == 0 {
            return Err(Error::Internal("cut limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Optimal,
    TimeLimit,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub sec_cuts: usize,
    pub oa_cuts: usize,
    pub lp_solves: usize,
    pub lp_iterations: usize,
    pub seconds: f64,
    pub termination: Termination,
    /// Best proven lower bound on the objective.
    pub bound: f64,
}

/// Cuts emitted during a solve, in emission order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutLog {
    pub sec: Vec<SecCut>,
    pub cone: Vec<ConeCut>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    /// The incumbent; `None` when infeasible or when time ran out first.
    pub solution: Option<Solution>,
    pub stats: SolveStats,
    pub cuts: CutLog,
}

/// A branch-and-bound node: bound overrides relative to the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub overrides: Vec<(usize, f64, f64)>,
    /// LP bound of the parent.
    pub bound: f64,
    seq: u64,
}

impl Node {
    fn root() -> Self {
        Self {
            overrides: Vec::new(),
            bound: f64::NEG_INFINITY,
            seq: 0,
        }
    }

    fn child(&self, col: usize, lo: f64, hi: f64, bound: f64) -> Self {
        let mut overrides: Vec<(usize, f64, f64)> =
            self.overrides.iter().copied().filter(|o| o.0 != col).collect();
        overrides.push((col, lo, hi));
        Self {
            overrides,
            bound,
            seq: 0,
        }
    }
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // BinaryHeap is a max-heap: smallest bound, then smallest seq, is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

/// The branching column: most fractional `y`, else most fractional `x`,
/// lowest column id on ties. `None` if the point is integral.
pub fn branching_variable(vm: &VarMap, x: &[f64], tol: f64) -> Option<usize> {
    let pick = |cols: Vec<usize>| -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for c in cols {
            let f = x[c] - x[c].floor();
            let score = f.min(1.0 - f);
            if score > tol && best.map_or(true, |(s, _)| score > s) {
                best = Some((score, c));
            }
        }
        best.map(|b| b.1)
    };
    let sorted = |rows: &[Vec<usize>]| {
        let mut cols: Vec<usize> = rows.iter().flatten().copied().collect();
        cols.sort_unstable();
        cols
    };
    pick(sorted(&vm.y)).or_else(|| pick(sorted(&vm.x)))
}

/// Splits `node` on the branching column of `x`: the first child takes
/// `≤ floor`, the second `≥ ceil`. `bounds` are the node's effective bounds.
pub fn branch(
    node: &Node,
    x: &[f64],
    vm: &VarMap,
    bounds: impl Fn(usize) -> (f64, f64),
    tol: f64,
    bound: f64,
) -> Result<(Node, Node), Error> {
    let col = branching_variable(vm, x, tol)
        .ok_or_else(|| Error::Internal("branch called on an integral point".into()))?;
    let (lo, hi) = bounds(col);
    let down = node.child(col, lo, x[col].floor(), bound);
    let up = node.child(col, x[col].ceil(), hi, bound);
    Ok((down, up))
}

fn is_integral(vm: &VarMap, x: &[f64], tol: f64) -> bool {
    vm.integer_columns().all(|c| (x[c] - x[c].round()).abs() <= tol)
}

struct Search<'a> {
    inst: &'a Instance,
    spec: ModelSpec,
    params: &'a SolveParams,
    lp: LpModel,
    vm: VarMap,
    root_bounds: Vec<(f64, f64)>,
    applied: Vec<usize>,
    incumbent: Option<Solution>,
    seen_sec: HashSet<SecCut>,
    /// Rows of the base model; cut rows follow in `pool` order.
    base_rows: usize,
    pool: Vec<PooledCut>,
    stats: SolveStats,
    cuts: CutLog,
    started: Instant,
    node_id: usize,
}

struct PooledCut {
    sec: Option<SecCut>,
    idle: usize,
}

enum NodeResult {
    Pruned,
    Branched(Node, Node),
    TimedOut(f64),
}

impl<'a> Search<'a> {
    fn tolerance(&self, inc: f64) -> f64 {
        self.params.abs_gap.max(self.params.rel_gap * inc.abs())
    }

    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some(s) => bound >= s.objective - self.tolerance(s.objective),
            None => false,
        }
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed().as_secs_f64() >= self.params.time_limit_seconds
    }

    fn apply(&mut self, node: &Node) -> Result<(), Error> {
        let lp_err = |node: usize| move |e| Error::Lp { node, source: e };
        for c in std::mem::take(&mut self.applied) {
            let (lo, hi) = self.root_bounds[c];
            if self.lp.bounds(c) != (lo, hi) {
                self.lp.set_bounds(c, lo, hi).map_err(lp_err(self.node_id))?;
            }
        }
        for &(c, lo, hi) in &node.overrides {
            if self.lp.bounds(c) != (lo, hi) {
                self.lp.set_bounds(c, lo, hi).map_err(lp_err(self.node_id))?;
            }
            self.applied.push(c);
        }
        Ok(())
    }

    fn sec_cuts(&mut self, found: Vec<SecCut>, x: &[f64]) -> usize {
        let cap = self.params.max_sec_cuts.unwrap_or(self.vm.m);
        let mut fresh: Vec<(f64, SecCut)> = found
            .into_iter()
            .filter(|c| !self.seen_sec.contains(c))
            .map(|c| (c.violation(&self.vm, x), c))
            .collect();
        fresh.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut added = 0;
        for (_, c) in fresh.into_iter().take(cap) {
            self.lp.add_row(c.row(&self.vm)).expect("cut columns exist");
            self.seen_sec.insert(c.clone());
            self.pool.push(PooledCut {
                sec: Some(c.clone()),
                idle: 0,
            });
            if self.params.record_cuts {
                self.cuts.sec.push(c);
            }
            added += 1;
        }
        self.stats.sec_cuts += added;
        added
    }

    fn cone_cuts(&mut self, x: &[f64], min_violation: f64) -> usize {
        let cap = self.params.max_oa_cuts.unwrap_or(self.vm.m);
        let found = oa::separate(&self.spec, &self.vm, x, min_violation, cap);
        for c in &found {
            self.lp.add_row(c.row(&self.vm)).expect("cut columns exist");
            self.pool.push(PooledCut { sec: None, idle: 0 });
        }
        self.stats.oa_cuts += found.len();
        let n = found.len();
        if self.params.record_cuts {
            self.cuts.cone.extend(found);
        }
        n
    }

    /// Decodes an integral point and offers it as incumbent.
    fn offer(&mut self, x: &[f64]) -> Result<(), Error> {
        let tours = formulation::decode(&self.vm, x, self.params.integrality_tol)?;
        let sol = Solution::from_tours(self.inst, self.spec.variant, tours);
        if !self.spec.variant.admits(&sol.lengths) {
            return Ok(());
        }
        if self.incumbent.as_ref().map_or(true, |s| sol.objective < s.objective) {
            self.incumbent = Some(sol);
        }
        Ok(())
    }

    fn age_cuts(&mut self, x: &[f64]) {
        let rows = &self.lp.rows()[self.base_rows..];
        for (cut, row) in self.pool.iter_mut().zip(rows) {
            let slack = (row.activity(x) - row.rhs).abs() / (1.0 + row.rhs.abs());
            cut.idle = if slack > SLACK_TOL { cut.idle + 1 } else { 0 };
        }
    }

    fn purge(&mut self) -> Result<(), Error> {
        let stale: Vec<usize> = (0..self.pool.len()).filter(|&k| self.pool[k].idle >= PURGE_AGE).collect();
        if stale.is_empty() {
            return Ok(());
        }
        let rows: Vec<usize> = stale.iter().map(|k| self.base_rows + k).collect();
        self.lp.remove_rows(&rows).map_err(|e| Error::Lp {
            node: self.node_id,
            source: e,
        })?;
        let seen = &mut self.seen_sec;
        self.pool.retain(|cut| {
            let keep = cut.idle < PURGE_AGE;
            if !keep {
                if let Some(sec) = &cut.sec {
                    seen.remove(sec);
                }
            }
            keep
        });
        Ok(())
    }

    fn process(&mut self, node: &Node) -> Result<NodeResult, Error> {
        self.purge()?;
        self.apply(node)?;
        let mut rounds = 0usize;
        let mut integral_rounds = 0usize;
        loop {
            if self.out_of_time() {
                return Ok(NodeResult::TimedOut(node.bound));
            }
            let sol = self.lp.solve().map_err(|e| Error::Lp {
                node: self.node_id,
                source: e,
            })?;
            self.stats.lp_solves += 1;
            self.stats.lp_iterations += sol.iterations;
            match sol.status {
                LpStatus::Infeasible => return Ok(NodeResult::Pruned),
                LpStatus::Unbounded => {
                    return Err(Error::Internal(format!("unbounded relaxation at node {}", self.node_id)))
                }
                LpStatus::Optimal => {}
            }
            self.age_cuts(&sol.x);
            let bound = sol.objective.max(node.bound);
            if self.prunable(bound) {
                return Ok(NodeResult::Pruned);
            }
            let x = sol.x;
            if is_integral(&self.vm, &x, self.params.integrality_tol) {
                integral_rounds += 1;
                if integral_rounds > MAX_INTEGRAL_ROUNDS {
                    return Err(Error::Internal(format!(
                        "no convergence at integral point of node {}",
                        self.node_id
                    )));
                }
                let secs = separation::separate_integer(&self.vm, &x);
                if !secs.is_empty() && self.sec_cuts(secs, &x) > 0 {
                    continue;
                }
                self.offer(&x)?;
                if self.prunable(bound) {
                    return Ok(NodeResult::Pruned);
                }
                if self.cone_cuts(&x, CONE_CUT_TOL) > 0 {
                    continue;
                }
                if let (Variant::PNorm(_), Some(z)) = (self.spec.variant, self.vm.z) {
                    if self.cone_cuts(&x, CONE_POLISH_TOL * x[z].max(1.0)) > 0 {
                        continue;
                    }
                }
                // The point is feasible up to tolerance and optimal for the node.
                return Ok(NodeResult::Pruned);
            }
            if rounds < self.params.max_cut_rounds {
                rounds += 1;
                let secs = separation::separate_fractional(&self.vm, &x);
                let added = self.sec_cuts(secs, &x) + self.cone_cuts(&x, CONE_CUT_TOL);
                if added > 0 {
                    continue;
                }
            }
            let lp = &self.lp;
            let (down, up) = branch(node, &x, &self.vm, |c| lp.bounds(c), self.params.integrality_tol, bound)?;
            return Ok(NodeResult::Branched(down, up));
        }
    }
}

/// Solves `spec` on `inst` to optimality within the gap tolerances, or until
/// the time limit.
pub fn solve(inst: &Instance, spec: &ModelSpec, params: &SolveParams) -> Result<SolveOutcome, Error> {
    params.validate()?;
    let started = Instant::now();
    let (lp, vm) = formulation::build(inst, spec, params.symmetry_breaking)?;
    let root_bounds = (0..lp.num_cols()).map(|c| lp.bounds(c)).collect();
    let base_rows = lp.num_rows();
    let mut search = Search {
        inst,
        spec: *spec,
        params,
        lp,
        vm,
        root_bounds,
        applied: Vec::new(),
        incumbent: None,
        seen_sec: HashSet::new(),
        base_rows,
        pool: Vec::new(),
        stats: SolveStats {
            nodes: 0,
            sec_cuts: 0,
            oa_cuts: 0,
            lp_solves: 0,
            lp_iterations: 0,
            seconds: 0.0,
            termination: Termination::Optimal,
            bound: f64::NEG_INFINITY,
        },
        cuts: CutLog::default(),
        started,
        node_id: 0,
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Queued(Node::root()));
    let mut open_bound: Option<f64> = None;
    while let Some(Queued(node)) = heap.pop() {
        if search.prunable(node.bound) {
            continue;
        }
        search.stats.nodes += 1;
        match search.process(&node)? {
            NodeResult::Pruned => {}
            NodeResult::Branched(mut a, mut b) => {
                for child in [&mut a, &mut b] {
                    seq += 1;
                    child.seq = seq;
                }
                heap.push(Queued(a));
                heap.push(Queued(b));
            }
            NodeResult::TimedOut(bound) => {
                let rest = heap.iter().map(|q| q.0.bound).fold(bound, f64::min);
                open_bound = Some(rest);
                break;
            }
        }
        search.node_id += 1;
    }

    let mut stats = search.stats;
    stats.seconds = started.elapsed().as_secs_f64();
    let mut solution = search.incumbent;
    match open_bound {
        Some(b) => {
            stats.termination = Termination::TimeLimit;
            stats.bound = match &solution {
                Some(s) => b.min(s.objective),
                None => b,
            };
        }
        None => {
            stats.termination = if solution.is_some() {
                Termination::Optimal
            } else {
                Termination::Infeasible
            };
            stats.bound = solution.as_ref().map_or(f64::INFINITY, |s| s.objective);
        }
    }
    if let Some(s) = solution.as_mut() {
        s.set_bound(stats.bound);
    }
    Ok(SolveOutcome {
        solution,
        stats,
        cuts: search.cuts,
    })
}
