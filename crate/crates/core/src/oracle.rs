//! Brute-force ground truth for small instances.
//!
//! Every assignment of targets to salesmen is enumerated. Without a fairness
//! constraint each salesman's subset is routed optimally by a Held–Karp table
//! computed once over all subsets. With one, a longer walk can be the cheaper
//! way to balance lengths, so every closed walk the model admits is a
//! candidate: the subset is split into loops through the depot (the depot has
//! no degree limit) and each loop may follow any Hamiltonian cycle. Unused
//! salesmen get zero-length tours, as in the solver.

use thiserror::Error;

use crate::formulation::{ModelSpec, Variant};
use crate::instance::Instance;
use crate::pareto::{Family, FrontPoint};

pub const MAX_HELD_KARP: usize = 15;
pub const MAX_TARGETS: usize = 9;
pub const MAX_SALESMEN: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} = {got} exceeds the oracle limit {limit}")]
    TooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("instance has no depot")]
    NoDepot,
    #[error("vertex {0} is not a target")]
    NotATarget(usize),
    #[error("invalid model: {0}")]
    Spec(String),
}

/// Optimal closed tour from the depot through `subset`; returns the length
/// and the vertex sequence.
pub fn held_karp(inst: &Instance, subset: &[usize]) -> Result<(f64, Vec<usize>), OracleError> {
    let d = inst.depot().ok_or(OracleError::NoDepot)?;
    let k = subset.len();
    if k > MAX_HELD_KARP {
        return Err(OracleError::TooLarge {
            what: "subset size",
            got: k,
            limit: MAX_HELD_KARP,
        });
    }
    if let Some(&bad) = subset.iter().find(|&&t| t == d || t >= inst.n_vertices()) {
        return Err(OracleError::NotATarget(bad));
    }
    if k == 0 {
        return Ok((0.0, vec![d]));
    }
    let full = (1usize << k) - 1;
    let mut dp = vec![f64::INFINITY; (1 << k) * k];
    let mut parent = vec![usize::MAX; (1 << k) * k];
    for j in 0..k {
        dp[(1 << j) * k + j] = inst.cost(d, subset[j]);
    }
    for mask in 1..=full {
        for j in 0..k {
            let cur = dp[mask * k + j];
            if mask >> j & 1 == 0 || cur == f64::INFINITY {
                continue;
            }
            for t in 0..k {
                if mask >> t & 1 == 1 {
                    continue;
                }
                let next = mask | 1 << t;
                let cand = cur + inst.cost(subset[j], subset[t]);
                if cand < dp[next * k + t] {
                    dp[next * k + t] = cand;
                    parent[next * k + t] = j;
                }
            }
        }
    }
    let (mut best, mut last) = (f64::INFINITY, 0);
    for j in 0..k {
        let cand = dp[full * k + j] + inst.cost(subset[j], d);
        if cand < best {
            best = cand;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(k + 2);
    let mut mask = full;
    let mut j = last;
    while j != usize::MAX {
        order.push(subset[j]);
        let p = parent[mask * k + j];
        mask &= !(1 << j);
        j = p;
    }
    order.push(d);
    order.reverse();
    order.push(d);
    Ok((best, order))
}

/// Optimal tour length of every subset of the instance's targets, indexed by
/// bitmask over [`Instance::targets`].
pub fn subset_tour_lengths(inst: &Instance) -> Result<Vec<f64>, OracleError> {
    let d = inst.depot().ok_or(OracleError::NoDepot)?;
    let targets = inst.targets();
    let k = targets.len();
    if k > MAX_HELD_KARP {
        return Err(OracleError::TooLarge {
            what: "targets",
            got: k,
            limit: MAX_HELD_KARP,
        });
    }
    let mut dp = vec![f64::INFINITY; (1 << k) * k.max(1)];
    for j in 0..k {
        dp[(1 << j) * k + j] = inst.cost(d, targets[j]);
    }
    let mut tour = vec![0.0; 1 << k];
    for mask in 1usize..(1 << k) {
        let mut best = f64::INFINITY;
        for j in 0..k {
            let cur = dp[mask * k + j];
            if mask >> j & 1 == 0 || cur == f64::INFINITY {
                continue;
            }
            best = best.min(cur + inst.cost(targets[j], d));
            for t in 0..k {
                if mask >> t & 1 == 0 {
                    let next = mask | 1 << t;
                    let cand = cur + inst.cost(targets[j], targets[t]);
                    if cand < dp[next * k + t] {
                        dp[next * k + t] = cand;
                    }
                }
            }
        }
        tour[mask] = best;
    }
    Ok(tour)
}

/// Every distinct Hamiltonian cycle length through the depot and each subset
/// of targets, ascending, indexed by bitmask over [`Instance::targets`].
pub fn subset_cycle_lengths(inst: &Instance) -> Result<Vec<Vec<f64>>, OracleError> {
    let d = inst.depot().ok_or(OracleError::NoDepot)?;
    let targets = inst.targets();
    if targets.len() > MAX_TARGETS {
        return Err(OracleError::TooLarge {
            what: "targets",
            got: targets.len(),
            limit: MAX_TARGETS,
        });
    }
    let mut out = vec![Vec::new(); 1 << targets.len()];
    out[0].push(0.0);
    fn walk(inst: &Instance, d: usize, targets: &[usize], mask: usize, last: usize, len: f64, out: &mut [Vec<f64>]) {
        if mask != 0 {
            out[mask].push(len + inst.cost(last, d));
        }
        for (t, &v) in targets.iter().enumerate() {
            if mask >> t & 1 == 0 {
                walk(inst, d, targets, mask | 1 << t, v, len + inst.cost(last, v), out);
            }
        }
    }
    walk(inst, d, &targets, 0, d, 0.0, &mut out);
    for lens in &mut out {
        lens.sort_by(f64::total_cmp);
        lens.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
    Ok(out)
}

/// Every distinct length of a closed walk covering each subset of targets by
/// one or more loops through the depot, ascending, indexed by bitmask over
/// [`Instance::targets`].
pub fn subset_walk_lengths(inst: &Instance) -> Result<Vec<Vec<f64>>, OracleError> {
    let cycles = subset_cycle_lengths(inst)?;
    let mut walks: Vec<Vec<f64>> = vec![Vec::new(); cycles.len()];
    walks[0].push(0.0);
    for mask in 1..cycles.len() {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // Loops containing the lowest target: `low | sub` for every sub ⊆ rest.
        let mut out = Vec::new();
        let mut sub = rest;
        loop {
            let block = low | sub;
            for &a in &cycles[block] {
                out.extend(walks[mask ^ block].iter().map(|&b| a + b));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        walks[mask] = out;
    }
    Ok(walks)
}

fn matches(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

/// Loops through the depot covering `rest`, total length `len`.
fn find_loops(inst: &Instance, d: usize, rest: &[usize], len: f64, loops: &mut Vec<Vec<usize>>) -> bool {
    if rest.is_empty() {
        return matches(len, 0.0);
    }
    if len < -1e-9 {
        return false;
    }
    let first = rest[0];
    let others = &rest[1..];
    for sub in 0usize..(1 << others.len()) {
        let mut block = vec![first];
        let mut remain = Vec::new();
        for (k, &t) in others.iter().enumerate() {
            if sub >> k & 1 == 1 {
                block.push(t);
            } else {
                remain.push(t);
            }
        }
        let mut found = false;
        let mut path = vec![d];
        let mut used = vec![false; block.len()];
        cycles_through(inst, &block, &mut used, &mut path, 0.0, &mut |cycle, a| {
            if !found && find_loops(inst, d, &remain, len - a, loops) {
                loops.push(cycle.to_vec());
                found = true;
            }
            found
        });
        if found {
            return true;
        }
    }
    false
}

/// Calls `f(cycle, length)` for each closed cycle extending `path`; stops
/// when `f` returns true.
fn cycles_through(
    inst: &Instance,
    block: &[usize],
    used: &mut [bool],
    path: &mut Vec<usize>,
    acc: f64,
    f: &mut dyn FnMut(&[usize], f64) -> bool,
) -> bool {
    let last = *path.last().unwrap();
    if path.len() == block.len() + 1 {
        let d = path[0];
        path.push(d);
        let stop = f(path, acc + inst.cost(last, d));
        path.pop();
        return stop;
    }
    for k in 0..block.len() {
        if !used[k] {
            used[k] = true;
            path.push(block[k]);
            let stop = cycles_through(inst, block, used, path, acc + inst.cost(last, block[k]), f);
            path.pop();
            used[k] = false;
            if stop {
                return true;
            }
        }
    }
    false
}

/// A closed walk from the depot covering `subset`, as concatenated loops,
/// whose length is `len` within `1e-9` relative, if one exists.
pub fn walk_with_length(inst: &Instance, subset: &[usize], len: f64) -> Result<Option<Vec<usize>>, OracleError> {
    let d = inst.depot().ok_or(OracleError::NoDepot)?;
    if subset.len() > MAX_TARGETS {
        return Err(OracleError::TooLarge {
            what: "subset size",
            got: subset.len(),
            limit: MAX_TARGETS,
        });
    }
    if let Some(&bad) = subset.iter().find(|&&t| t == d || t >= inst.n_vertices()) {
        return Err(OracleError::NotATarget(bad));
    }
    let mut loops = Vec::new();
    if !find_loops(inst, d, subset, len, &mut loops) {
        return Ok(None);
    }
    let mut walk = vec![d];
    for lp in loops.iter().rev() {
        walk.extend_from_slice(&lp[1..]);
    }
    Ok(Some(walk))
}

/// An optimal assignment found by enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub objective: f64,
    pub lengths: Vec<f64>,
    /// Salesman of each target, in [`Instance::targets`] order.
    pub assignment: Vec<usize>,
}

impl OracleSolution {
    /// Walks realizing the assignment with exactly the reported lengths.
    pub fn tours(&self, inst: &Instance) -> Result<Vec<Vec<usize>>, OracleError> {
        let targets = inst.targets();
        let m = self.lengths.len();
        (0..m)
            .map(|v| {
                let subset: Vec<usize> = targets
                    .iter()
                    .zip(&self.assignment)
                    .filter(|(_, &a)| a == v)
                    .map(|(&t, _)| t)
                    .collect();
                walk_with_length(inst, &subset, self.lengths[v])?
                    .ok_or_else(|| OracleError::Spec(format!("no tour of length {} for salesman {v}", self.lengths[v])))
            })
            .collect()
    }
}

fn guard(inst: &Instance, m: usize) -> Result<(), OracleError> {
    let n = inst.n_targets();
    if n > MAX_TARGETS {
        return Err(OracleError::TooLarge {
            what: "targets",
            got: n,
            limit: MAX_TARGETS,
        });
    }
    if m > MAX_SALESMEN {
        return Err(OracleError::TooLarge {
            what: "salesmen",
            got: m,
            limit: MAX_SALESMEN,
        });
    }
    Ok(())
}

/// Calls `f(assignment, masks)` for all `m^n` assignments in lexicographic
/// order; `masks[v]` is salesman `v`'s subset over [`Instance::targets`].
fn enumerate(n: usize, m: usize, mut f: impl FnMut(&[usize], &[usize])) {
    let mut assignment = vec![0usize; n];
    let mut masks = vec![0usize; m];
    loop {
        masks.iter_mut().for_each(|x| *x = 0);
        for (t, &v) in assignment.iter().enumerate() {
            masks[v] |= 1 << t;
        }
        f(&assignment, &masks);
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < m {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

/// Cheapest admissible choice of one length per list, improving strictly on
/// `best`. Lists are ascending.
fn cheapest_admissible(lists: &[&[f64]], admits: &dyn Fn(&[f64]) -> bool, best: f64) -> Option<(f64, Vec<f64>)> {
    let m = lists.len();
    // tail[v] = Σ_{w ≥ v} min list w.
    let mut tail = vec![0.0; m + 1];
    for v in (0..m).rev() {
        tail[v] = tail[v + 1] + lists[v][0];
    }
    fn go(
        lists: &[&[f64]],
        tail: &[f64],
        admits: &dyn Fn(&[f64]) -> bool,
        cur: &mut Vec<f64>,
        sum: f64,
        best: &mut f64,
        found: &mut Option<Vec<f64>>,
    ) {
        let v = cur.len();
        if v == lists.len() {
            if sum < *best && admits(cur) {
                *best = sum;
                *found = Some(cur.clone());
            }
            return;
        }
        for &len in lists[v] {
            if sum + len + tail[v + 1] >= *best {
                break;
            }
            cur.push(len);
            go(lists, tail, admits, cur, sum + len, best, found);
            cur.pop();
        }
    }
    let mut best = best;
    let mut found = None;
    go(lists, &tail, admits, &mut Vec::with_capacity(m), 0.0, &mut best, &mut found);
    found.map(|l| (best, l))
}

/// Optimum of a variant by enumeration, or `None` when no assignment meets
/// its constraint. Ties go to the lexicographically smallest assignment.
pub fn brute_force(inst: &Instance, spec: &ModelSpec) -> Result<Option<OracleSolution>, OracleError> {
    spec.validate().map_err(|e| OracleError::Spec(e.to_string()))?;
    guard(inst, spec.m)?;
    let n = inst.n_targets();
    let mut best: Option<OracleSolution> = None;
    match spec.variant {
        Variant::EpsFair(_) | Variant::DeltaFair(_) => {
            let cycles = subset_walk_lengths(inst)?;
            let admits = |l: &[f64]| spec.variant.admits(l);
            enumerate(n, spec.m, |assignment, masks| {
                let lists: Vec<&[f64]> = masks.iter().map(|&k| cycles[k].as_slice()).collect();
                let bound = best.as_ref().map_or(f64::INFINITY, |b| b.objective);
                if let Some((objective, lengths)) = cheapest_admissible(&lists, &admits, bound) {
                    best = Some(OracleSolution {
                        objective,
                        lengths,
                        assignment: assignment.to_vec(),
                    });
                }
            });
        }
        _ => {
            let table = subset_tour_lengths(inst)?;
            let mut lengths = vec![0.0; spec.m];
            enumerate(n, spec.m, |assignment, masks| {
                for (l, &k) in lengths.iter_mut().zip(masks) {
                    *l = table[k];
                }
                let objective = spec.variant.objective(&lengths);
                if best.as_ref().map_or(true, |b| objective < b.objective) {
                    best = Some(OracleSolution {
                        objective,
                        lengths: lengths.clone(),
                        assignment: assignment.to_vec(),
                    });
                }
            });
        }
    }
    Ok(best)
}

/// Nondominated `(total length, fairness)` pairs over all assignments and
/// all closed walks of each subset.
///
/// For [`Family::EpsFair`] the fairness value is εFI (higher is better), for
/// [`Family::DeltaFair`] the Gini coefficient (lower is better). Length
/// vectors that are all zero have no fairness value and are skipped.
pub fn brute_force_pareto(inst: &Instance, m: usize, family: Family) -> Result<Vec<FrontPoint>, OracleError> {
    if m < 2 {
        return Err(OracleError::Spec(format!("need at least 2 salesmen, got {m}")));
    }
    guard(inst, m)?;
    let cycles = subset_walk_lengths(inst)?;
    let mut all: Vec<FrontPoint> = Vec::new();
    let mut lengths = vec![0.0; m];
    fn product(lists: &[&[f64]], lengths: &mut [f64], v: usize, f: &mut dyn FnMut(&[f64])) {
        if v == lists.len() {
            f(lengths);
            return;
        }
        for &len in lists[v] {
            lengths[v] = len;
            product(lists, lengths, v + 1, f);
        }
    }
    enumerate(inst.n_targets(), m, |_, masks| {
        let lists: Vec<&[f64]> = masks.iter().map(|&k| cycles[k].as_slice()).collect();
        product(&lists, &mut lengths, 0, &mut |l| {
            if let Ok(fairness) = family.fairness(l) {
                all.push(FrontPoint {
                    total: l.iter().sum(),
                    fairness,
                });
            }
        });
    });
    // A sorted pass discards most points before the exact filter.
    let better = |a: f64, b: f64| match family {
        Family::EpsFair => a > b,
        Family::DeltaFair => a < b,
    };
    all.sort_by(|a, b| {
        a.total.total_cmp(&b.total).then_with(|| match family {
            Family::EpsFair => b.fairness.total_cmp(&a.fairness),
            Family::DeltaFair => a.fairness.total_cmp(&b.fairness),
        })
    });
    let mut kept: Vec<FrontPoint> = Vec::new();
    for p in all {
        if kept.last().map_or(true, |q| better(p.fairness, q.fairness)) {
            kept.push(p);
        }
    }
    Ok(crate::pareto::front(&kept, family))
}
