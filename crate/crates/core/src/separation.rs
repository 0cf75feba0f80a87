//! Subtour-elimination separation.
//!
//! For salesman `v`, target set `S` and anchor `i ∈ S` the row is
//! `Σ_{e ∈ δ(S)} x_e^v ≥ 2 y_i^v`. Components of the support graph that miss
//! the depot give cuts directly; inside the depot component a global minimum
//! cut is tried first, then depot-to-target maximum flows.

use crate::formulation::VarMap;
use crate::lp::{Row, Sense};

/// Values at or below this are dropped from the support graph.
pub const SUPPORT_TOL: f64 = 1e-7;
/// Cuts are only emitted when violated by more than this.
pub const MIN_VIOLATION: f64 = 1e-6;

/// A subtour-elimination cut for one salesman.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SecCut {
    pub salesman: usize,
    /// Sorted target ids.
    pub set: Vec<usize>,
    pub anchor: usize,
}

impl SecCut {
    pub fn new(salesman: usize, mut set: Vec<usize>, anchor: usize) -> Self {
        set.sort_unstable();
        Self {
            salesman,
            set,
            anchor,
        }
    }

    /// Edge indices with exactly one endpoint in the set.
    pub fn boundary(&self, vm: &VarMap) -> Vec<usize> {
        let mut inside = vec![false; vm.n_vertices];
        for &i in &self.set {
            inside[i] = true;
        }
        vm.edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| inside[a] != inside[b])
            .map(|(e, _)| e)
            .collect()
    }

    pub fn row(&self, vm: &VarMap) -> Row {
        let v = self.salesman;
        let mut coeffs: Vec<(usize, f64)> =
            self.boundary(vm).into_iter().map(|e| (vm.x[v][e], 1.0)).collect();
        coeffs.push((vm.y[v][self.anchor], -2.0));
        Row::new(coeffs, Sense::Ge, 0.0)
    }

    /// `2 y_i - x(δ(S))` at `x`; positive means violated.
    pub fn violation(&self, vm: &VarMap, x: &[f64]) -> f64 {
        let v = self.salesman;
        let crossing: f64 = self.boundary(vm).into_iter().map(|e| x[vm.x[v][e]]).sum();
        2.0 * x[vm.y[v][self.anchor]] - crossing
    }
}

/// Positive-valued part of one salesman's point.
#[derive(Clone, Debug)]
pub struct SupportGraph {
    pub salesman: usize,
    pub depot: usize,
    /// Vertices with `y > tol`, endpoints of kept edges, and the depot.
    pub vertices: Vec<usize>,
    /// `(i, j, x_e)` for edges with `x_e > tol`.
    pub edges: Vec<(usize, usize, f64)>,
    /// `y` value of every vertex of the full graph.
    pub visit: Vec<f64>,
}

impl SupportGraph {
    pub fn new(vm: &VarMap, x: &[f64], salesman: usize) -> Self {
        let n = vm.n_vertices;
        let visit: Vec<f64> = (0..n).map(|i| x[vm.y[salesman][i]]).collect();
        let mut keep: Vec<bool> = visit.iter().map(|&y| y > SUPPORT_TOL).collect();
        keep[vm.depot] = true;
        let mut edges = Vec::new();
        for (e, &(i, j)) in vm.edges.iter().enumerate() {
            let w = x[vm.x[salesman][e]];
            if w > SUPPORT_TOL {
                edges.push((i, j, w));
                keep[i] = true;
                keep[j] = true;
            }
        }
        Self {
            salesman,
            depot: vm.depot,
            vertices: (0..n).filter(|&i| keep[i]).collect(),
            edges,
            visit,
        }
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.visit.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        for &(i, j, _) in &self.edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &i in &self.vertices {
            let r = find(&mut parent, i);
            groups[r].push(i);
        }
        groups.into_iter().filter(|g| !g.is_empty()).collect()
    }

    fn anchor(&self, set: &[usize]) -> usize {
        // Highest y, lowest id on ties.
        let mut best = set[0];
        for &i in &set[1..] {
            if self.visit[i] > self.visit[best] {
                best = i;
            }
        }
        best
    }

    /// Dense capacity matrix over `vertices` (local indices).
    fn capacities(&self, vertices: &[usize]) -> Vec<Vec<f64>> {
        let mut local = vec![usize::MAX; self.visit.len()];
        for (k, &i) in vertices.iter().enumerate() {
            local[i] = k;
        }
        let mut cap = vec![vec![0.0; vertices.len()]; vertices.len()];
        for &(i, j, w) in &self.edges {
            let (a, b) = (local[i], local[j]);
            if a != usize::MAX && b != usize::MAX {
                cap[a][b] += w;
                cap[b][a] += w;
            }
        }
        cap
    }
}

/// Stoer–Wagner global minimum cut of a symmetric capacity matrix.
///
/// Returns the cut value and one side of the cut. Graphs with fewer than two
/// vertices have no cut and return `(inf, [])`.
pub fn stoer_wagner(cap: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cap.len();
    if n < 2 {
        return (f64::INFINITY, Vec::new());
    }
    let mut w: Vec<Vec<f64>> = cap.to_vec();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, Vec::new());
    while active.len() > 1 {
        let mut added = vec![false; n];
        let mut key = vec![0.0; n];
        let mut prev = active[0];
        let mut last = active[0];
        for step in 0..active.len() {
            let next = if step == 0 {
                active[0]
            } else {
                let mut sel = usize::MAX;
                for &u in &active {
                    if !added[u] && (sel == usize::MAX || key[u] > key[sel]) {
                        sel = u;
                    }
                }
                sel
            };
            added[next] = true;
            prev = last;
            last = next;
            for &u in &active {
                if !added[u] {
                    key[u] += w[next][u];
                }
            }
        }
        let cut_of_phase = key[last];
        if cut_of_phase < best.0 {
            best = (cut_of_phase, members[last].clone());
        }
        let moved = std::mem::take(&mut members[last]);
        members[prev].extend(moved);
        for &u in &active {
            w[prev][u] += w[last][u];
            w[u][prev] = w[prev][u];
        }
        w[prev][prev] = 0.0;
        active.retain(|&u| u != last);
    }
    best.1.sort_unstable();
    best
}

/// Maximum `s`-`t` flow; returns the value and the sink side of a minimum cut.
pub fn max_flow(cap: &[Vec<f64>], s: usize, t: usize) -> (f64, Vec<usize>) {
    let n = cap.len();
    let mut residual: Vec<Vec<f64>> = cap.to_vec();
    let mut flow = 0.0;
    loop {
        let mut pred = vec![usize::MAX; n];
        pred[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if pred[v] == usize::MAX && residual[u][v] > 1e-12 {
                    pred[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if pred[t] == usize::MAX {
            let sink_side = (0..n).filter(|&v| pred[v] == usize::MAX).collect();
            return (flow, sink_side);
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            bottleneck = bottleneck.min(residual[pred[v]][v]);
            v = pred[v];
        }
        let mut v = t;
        while v != s {
            let u = pred[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
}

/// Cuts for components of the support graph that do not contain the depot.
fn detached(g: &SupportGraph, components: &[Vec<usize>]) -> Vec<SecCut> {
    components
        .iter()
        .filter(|c| !c.contains(&g.depot))
        .map(|c| SecCut::new(g.salesman, c.clone(), g.anchor(c)))
        .collect()
}

/// Separation at an integral point: one cut per component missing the depot.
pub fn separate_integer(vm: &VarMap, x: &[f64]) -> Vec<SecCut> {
    let mut cuts = Vec::new();
    for v in 0..vm.m {
        let g = SupportGraph::new(vm, x, v);
        cuts.extend(
            detached(&g, &g.components())
                .into_iter()
                .filter(|c| c.violation(vm, x) > MIN_VIOLATION),
        );
    }
    cuts
}

fn depot_component_cut(vm: &VarMap, x: &[f64], g: &SupportGraph, comp: &[usize]) -> Option<SecCut> {
    if comp.len() < 2 {
        return None;
    }
    let cap = g.capacities(comp);
    let root = comp.iter().position(|&i| i == g.depot).expect("depot component");
    let emit = |local: Vec<usize>| -> Option<SecCut> {
        let set: Vec<usize> = local.into_iter().map(|k| comp[k]).collect();
        if set.is_empty() || set.contains(&g.depot) {
            return None;
        }
        let cut = SecCut::new(g.salesman, set.clone(), g.anchor(&set));
        (cut.violation(vm, x) > MIN_VIOLATION).then_some(cut)
    };

    let (_, side) = stoer_wagner(&cap);
    let side = if side.contains(&root) {
        (0..comp.len()).filter(|k| !side.contains(k)).collect()
    } else {
        side
    };
    if let Some(cut) = emit(side) {
        return Some(cut);
    }
    // The global minimum cut may separate a weakly visited set; any violated
    // cut for anchor t shows up as a depot-t flow below 2 y_t.
    let mut order: Vec<usize> = (0..comp.len()).filter(|&k| k != root).collect();
    order.sort_by(|&a, &b| g.visit[comp[b]].total_cmp(&g.visit[comp[a]]).then(a.cmp(&b)));
    for t in order {
        let need = 2.0 * g.visit[comp[t]];
        if need <= MIN_VIOLATION {
            break;
        }
        let (value, sink_side) = max_flow(&cap, root, t);
        if value < need - MIN_VIOLATION {
            if let Some(cut) = emit(sink_side) {
                return Some(cut);
            }
        }
    }
    None
}

/// Separation at an arbitrary point.
///
/// Components missing the depot are handled as in [`separate_integer`]; the
/// depot component contributes at most one cut per salesman.
pub fn separate_fractional(vm: &VarMap, x: &[f64]) -> Vec<SecCut> {
    let mut cuts = Vec::new();
    for v in 0..vm.m {
        let g = SupportGraph::new(vm, x, v);
        let components = g.components();
        cuts.extend(
            detached(&g, &components)
                .into_iter()
                .filter(|c| c.violation(vm, x) > MIN_VIOLATION),
        );
        let comp = components.iter().find(|c| c.contains(&g.depot)).expect("depot is kept");
        cuts.extend(depot_component_cut(vm, x, &g, comp));
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::build_base;
    use crate::instance::{Instance, Metric};
    use proptest::prelude::*;

    fn model(n: usize, m: usize) -> (usize, VarMap) {
        let coords: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64, (i * i % 7) as f64]).collect();
        let inst = Instance::from_coords("t", coords, Metric::Euclidean, Some(0)).unwrap();
        let (lp, vm) = build_base(&inst, m).unwrap();
        (lp.num_cols(), vm)
    }

    fn set_cycle(vm: &VarMap, x: &mut [f64], v: usize, cycle: &[usize], w: f64) {
        for k in 0..cycle.len() {
            let (a, b) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            x[vm.x[v][vm.edge_index(a, b)]] += w;
        }
        for &i in cycle {
            if i != vm.depot {
                x[vm.y[v][i]] = w.max(x[vm.y[v][i]]);
            }
        }
    }

    #[test]
    fn disjoint_triangle_is_cut() {
        let (cols, vm) = model(5, 2);
        let mut x = vec![0.0; cols];
        set_cycle(&vm, &mut x, 0, &[0, 1, 2], 1.0);
        set_cycle(&vm, &mut x, 0, &[3, 4, 5], 1.0);
        let cuts = separate_integer(&vm, &x);
        assert_eq!(cuts, vec![SecCut::new(0, vec![3, 4, 5], 3)]);
        assert_eq!(separate_fractional(&vm, &x), cuts);
    }

    #[test]
    fn depot_cycles_need_no_cut() {
        let (cols, vm) = model(5, 2);
        let mut x = vec![0.0; cols];
        set_cycle(&vm, &mut x, 0, &[0, 1, 2, 3], 1.0);
        set_cycle(&vm, &mut x, 1, &[0, 4, 5], 1.0);
        assert!(separate_integer(&vm, &x).is_empty());
        assert!(separate_fractional(&vm, &x).is_empty());
    }

    #[test]
    fn fractional_disjoint_pair() {
        let (cols, vm) = model(3, 2);
        let mut x = vec![0.0; cols];
        // Depot-a out-and-back at 0.5 per edge use, {b, c} loop with y_b = 1.
        x[vm.x[0][vm.edge_index(0, 1)]] = 1.0;
        x[vm.y[0][1]] = 0.5;
        x[vm.x[0][vm.edge_index(2, 3)]] = 1.0;
        x[vm.y[0][2]] = 1.0;
        x[vm.y[0][3]] = 0.5;
        let cuts = separate_fractional(&vm, &x);
        assert_eq!(cuts, vec![SecCut::new(0, vec![2, 3], 2)]);
    }

    #[test]
    fn cut_row_shape() {
        let (_, vm) = model(3, 2);
        let cut = SecCut::new(1, vec![2, 3], 2);
        let row = cut.row(&vm);
        // Boundary of {2,3} in K4: edges 0-2, 0-3, 1-2, 1-3.
        assert_eq!(row.coeffs.len(), 5);
        assert!(row.coeffs.contains(&(vm.y[1][2], -2.0)));
    }

    #[test]
    fn stoer_wagner_small() {
        // Two triangles joined by one light edge.
        let mut cap = vec![vec![0.0; 6]; 6];
        let mut add = |a: usize, b: usize, w: f64| {
            cap[a][b] += w;
            cap[b][a] += w;
        };
        add(0, 1, 3.0);
        add(1, 2, 3.0);
        add(0, 2, 3.0);
        add(3, 4, 3.0);
        add(4, 5, 3.0);
        add(3, 5, 3.0);
        add(2, 3, 0.5);
        let (value, side) = stoer_wagner(&cap);
        assert!((value - 0.5).abs() < 1e-12);
        assert!(side == vec![0, 1, 2] || side == vec![3, 4, 5]);
    }

    fn brute_min_cut(cap: &[Vec<f64>]) -> f64 {
        let n = cap.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut v = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if mask >> a & 1 == 1 && mask >> b & 1 == 0 {
                        v += cap[a][b];
                    }
                }
            }
            best = f64::min(best, v);
        }
        best
    }

    fn capacity_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..=8).prop_flat_map(|n| {
            prop::collection::vec(prop::option::weighted(0.6, 0.0f64..3.0), n * (n - 1) / 2).prop_map(
                move |ws| {
                    let mut cap = vec![vec![0.0; n]; n];
                    let mut k = 0;
                    for a in 0..n {
                        for b in (a + 1)..n {
                            let w = ws[k].unwrap_or(0.0);
                            cap[a][b] = w;
                            cap[b][a] = w;
                            k += 1;
                        }
                    }
                    cap
                },
            )
        })
    }

    fn random_point(n: usize, m: usize) -> impl Strategy<Value = Vec<(usize, usize, usize, f64)>> {
        let edges = (n + 1) * n / 2;
        prop::collection::vec(
            (0..m, 0..edges, 0usize..=n, prop::option::weighted(0.4, 0.0f64..=1.0)),
            0..(3 * n),
        )
        .prop_map(|v| {
            v.into_iter()
                .filter_map(|(s, e, i, w)| w.map(|w| (s, e, i, w)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn global_min_cut_matches_all_sinks_max_flow(cap in capacity_matrix()) {
            let (value, side) = stoer_wagner(&cap);
            let n = cap.len();
            let flows = (1..n).map(|t| max_flow(&cap, 0, t).0).fold(f64::INFINITY, f64::min);
            prop_assert!((value - flows).abs() < 1e-9);
            prop_assert!((value - brute_min_cut(&cap)).abs() < 1e-9);
            let crossing: f64 = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .filter(|&(a, b)| side.contains(&a) && !side.contains(&b))
                .map(|(a, b)| cap[a][b])
                .sum();
            prop_assert!((crossing - value).abs() < 1e-9);
        }

        #[test]
        fn fractional_separation_is_exact(entries in random_point(5, 2)) {
            let (cols, vm) = model(5, 2);
            let mut x = vec![0.0; cols];
            for (v, e, i, w) in entries {
                x[vm.x[v][e]] = w;
                if i != vm.depot {
                    x[vm.y[v][i]] = w;
                }
            }
            let cuts = separate_fractional(&vm, &x);
            for c in &cuts {
                prop_assert!(c.violation(&vm, &x) > MIN_VIOLATION);
                prop_assert!(!c.set.contains(&vm.depot));
            }
            // Oracle: every (v, S) with anchor argmax y over S.
            for v in 0..vm.m {
                let g = SupportGraph::new(&vm, &x, v);
                let comps = g.components();
                let depot_comp = comps.iter().find(|c| c.contains(&vm.depot)).unwrap();
                let targets: Vec<usize> = vm.targets().collect();
                let mut detached_violated = false;
                let mut depot_violated = false;
                for mask in 1u32..(1 << targets.len()) {
                    let set: Vec<usize> = targets.iter().enumerate()
                        .filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &t)| t).collect();
                    let cut = SecCut::new(v, set.clone(), g.anchor(&set));
                    if cut.violation(&vm, &x) <= MIN_VIOLATION {
                        continue;
                    }
                    if set.iter().all(|i| depot_comp.contains(i)) {
                        depot_violated = true;
                    }
                    if comps.iter().any(|c| !c.contains(&vm.depot) && c == &set) {
                        detached_violated = true;
                    }
                }
                let found = cuts.iter().filter(|c| c.salesman == v).count();
                if depot_violated || detached_violated {
                    prop_assert!(found > 0, "salesman {v}: violated SEC missed");
                }
            }
        }
    }
}
