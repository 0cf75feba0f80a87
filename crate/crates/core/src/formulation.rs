//! The edge/visit/length model of the MTSP and its fairness variants.
//!
//! Per salesman `v` there is an edge-use column `x[v][e]` for every edge of
//! the complete graph (bounds `[0, 2]` on depot edges, `[0, 1]` otherwise), a
//! visit column `y[v][i]` for every vertex (the depot's is fixed to 1), and a
//! length column `l[v]`. Subtour rows are not emitted here; they come from
//! [`crate::separation`]. Conic constraints of the p-norm and ε-fair
//! variants are likewise left to [`crate::oa`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::lp::{LpError, LpModel, Row, Sense};
use crate::metrics;

/// Absolute tolerance under which a conic or Gini constraint counts as met.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("need at least 2 salesmen, got {0}")]
    TooFewSalesmen(usize),
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("instance has no depot")]
    NoDepot,
    #[error("column {col} = {value} is not integral")]
    NotIntegral { col: usize, value: f64 },
    #[error("salesman {salesman}: {reason}")]
    NotATour { salesman: usize, reason: String },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Objective and fairness constraint of a model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "kebab-case")]
pub enum Variant {
    MinSum,
    MinMax,
    PNorm(u32),
    EpsFair(f64),
    DeltaFair(f64),
}

impl Variant {
    pub fn validate(&self) -> Result<(), FormulationError> {
        match *self {
            Variant::PNorm(p) if p < 2 => Err(FormulationError::InvalidParameter {
                name: "p",
                value: f64::from(p),
            }),
            Variant::EpsFair(e) if !(0.0..=1.0).contains(&e) => {
                Err(FormulationError::InvalidParameter { name: "eps", value: e })
            }
            Variant::DeltaFair(d) if !(0.0..=1.0).contains(&d) => {
                Err(FormulationError::InvalidParameter { name: "delta", value: d })
            }
            _ => Ok(()),
        }
    }

    /// The variant's objective evaluated on a length vector.
    pub fn objective(&self, lengths: &[f64]) -> f64 {
        match *self {
            Variant::MinSum | Variant::EpsFair(_) | Variant::DeltaFair(_) => lengths.iter().sum(),
            Variant::MinMax => lengths.iter().copied().fold(0.0, f64::max),
            Variant::PNorm(p) => metrics::p_norm(lengths, p),
        }
    }

    /// Whether `lengths` meets the variant's fairness constraint within
    /// [`CONSTRAINT_TOL`]. Salesman order is irrelevant.
    pub fn admits(&self, lengths: &[f64]) -> bool {
        match *self {
            Variant::EpsFair(eps) => {
                let sum: f64 = lengths.iter().sum();
                let norm = lengths.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm - sum / metrics::eps_ratio(eps, lengths.len()) <= CONSTRAINT_TOL
            }
            Variant::DeltaFair(delta) => {
                let m = lengths.len();
                let mut sorted = lengths.to_vec();
                sorted.sort_by(|a, b| b.total_cmp(a));
                let lhs: f64 = sorted
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (m as f64 - 2.0 * i as f64 - 1.0) * v)
                    .sum();
                lhs - delta * (m as f64 - 1.0) * sorted.iter().sum::<f64>() <= CONSTRAINT_TOL
            }
            _ => true,
        }
    }
}

/// A variant together with the salesman count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub m: usize,
}

impl ModelSpec {
    pub fn new(variant: Variant, m: usize) -> Self {
        Self { variant, m }
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        if self.m < 2 {
            return Err(FormulationError::TooFewSalesmen(self.m));
        }
        self.variant.validate()
    }
}

/// Column ids of every model symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct VarMap {
    pub m: usize,
    pub n_vertices: usize,
    pub depot: usize,
    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub edges: Vec<(usize, usize)>,
    pub x: Vec<Vec<usize>>,
    pub y: Vec<Vec<usize>>,
    pub l: Vec<usize>,
    pub z: Option<usize>,
    /// Disaggregation columns `L[v]` of the p-norm cone.
    pub big_l: Vec<usize>,
}

impl VarMap {
    /// Index of edge `{i, j}` in [`VarMap::edges`].
    pub fn edge_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let n = self.n_vertices;
        // Rows a' < a contribute n - a' - 1 edges each.
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn is_depot_edge(&self, e: usize) -> bool {
        let (i, j) = self.edges[e];
        i == self.depot || j == self.depot
    }

    /// Columns that must be integral: all `x` and `y`.
    pub fn integer_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.x.iter().chain(self.y.iter()).flatten().copied()
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices).filter(move |&i| i != self.depot)
    }
}

/// A feasible solution: one closed walk per salesman.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Vertex sequences starting and ending at the depot; an unused salesman
    /// has the one-element tour `[depot]`.
    pub tours: Vec<Vec<usize>>,
    pub lengths: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
}

impl Solution {
    /// Builds a solution from tours, computing lengths and the objective.
    pub fn from_tours(inst: &Instance, variant: Variant, tours: Vec<Vec<usize>>) -> Self {
        let lengths: Vec<f64> = tours.iter().map(|t| tour_length(inst, t)).collect();
        let objective = variant.objective(&lengths);
        Self {
            tours,
            lengths,
            objective,
            bound: objective,
            gap: 0.0,
        }
    }

    pub fn set_bound(&mut self, bound: f64) {
        self.bound = bound.min(self.objective);
        self.gap = relative_gap(self.objective, self.bound);
    }
}

/// `(objective - bound) / |objective|`, zero when the objective is zero.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if objective.abs() < 1e-12 {
        0.0
    } else {
        ((objective - bound) / objective.abs()).max(0.0)
    }
}

pub fn tour_length(inst: &Instance, tour: &[usize]) -> f64 {
    tour.windows(2).fold(0.0, |acc, w| acc + inst.cost(w[0], w[1]))
}

/// Builds the continuous min-sum relaxation without subtour rows.
pub fn build_base(inst: &Instance, m: usize) -> Result<(LpModel, VarMap), FormulationError> {
    if m < 2 {
        return Err(FormulationError::TooFewSalesmen(m));
    }
    let depot = inst.depot().ok_or(FormulationError::NoDepot)?;
    let n = inst.n_vertices();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    let mut lp = LpModel::new();
    let mut x = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let xv = edges
            .iter()
            .map(|&(i, j)| {
                let hi = if i == depot || j == depot { 2.0 } else { 1.0 };
                lp.add_column(0.0, hi, 0.0)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let yv = (0..n)
            .map(|i| {
                let lo = if i == depot { 1.0 } else { 0.0 };
                lp.add_column(lo, 1.0, 0.0)
            })
            .collect::<Result<Vec<_>, _>>()?;
        x.push(xv);
        y.push(yv);
    }
    let l = (0..m)
        .map(|_| lp.add_column(0.0, f64::INFINITY, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    let vm = VarMap {
        m,
        n_vertices: n,
        depot,
        edges,
        x,
        y,
        l,
        z: None,
        big_l: Vec::new(),
    };

    for v in 0..m {
        let mut coeffs: Vec<(usize, f64)> = vm
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| inst.cost(i, j) != 0.0)
            .map(|(e, &(i, j))| (vm.x[v][e], inst.cost(i, j)))
            .collect();
        coeffs.push((vm.l[v], -1.0));
        lp.add_row(Row::new(coeffs, Sense::Eq, 0.0))?;
    }
    for v in 0..m {
        for i in vm.targets() {
            let mut coeffs: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (vm.x[v][vm.edge_index(i, j)], 1.0))
                .collect();
            coeffs.push((vm.y[v][i], -2.0));
            lp.add_row(Row::new(coeffs, Sense::Eq, 0.0))?;
        }
    }
    for i in vm.targets() {
        let coeffs = (0..m).map(|v| (vm.y[v][i], 1.0)).collect();
        lp.add_row(Row::new(coeffs, Sense::Eq, 1.0))?;
    }
    Ok((lp, vm))
}

fn ordering_rows(vm: &VarMap) -> Vec<Row> {
    vm.l
        .windows(2)
        .map(|w| Row::new(vec![(w[0], 1.0), (w[1], -1.0)], Sense::Ge, 0.0))
        .collect()
}

/// Coefficients of the ordered Gini row `Σ_i (m - 2i + 1) l_i - Δ (m - 1) Σ_i l_i ≤ 0`
/// for `i = 1..m`, before the Δ term.
pub fn gini_coefficients(m: usize) -> Vec<f64> {
    (1..=m).map(|i| m as f64 - 2.0 * i as f64 + 1.0).collect()
}

/// Adds the variant's columns, rows and objective to a base model.
pub fn attach_variant(
    lp: &mut LpModel,
    vm: &mut VarMap,
    spec: &ModelSpec,
) -> Result<(), FormulationError> {
    spec.validate()?;
    if spec.m != vm.m {
        return Err(FormulationError::InvalidParameter {
            name: "m",
            value: spec.m as f64,
        });
    }
    let m = vm.m;
    match spec.variant {
        Variant::MinSum => {}
        Variant::MinMax => {
            let z = lp.add_column(0.0, f64::INFINITY, 1.0)?;
            for &lv in &vm.l {
                lp.set_objective(lv, 0.0)?;
                lp.add_row(Row::new(vec![(z, 1.0), (lv, -1.0)], Sense::Ge, 0.0))?;
            }
            vm.z = Some(z);
        }
        Variant::PNorm(_) => {
            let z = lp.add_column(0.0, f64::INFINITY, 1.0)?;
            let big_l = (0..m)
                .map(|_| lp.add_column(0.0, f64::INFINITY, 0.0))
                .collect::<Result<Vec<_>, _>>()?;
            let mut coeffs = vec![(z, 1.0)];
            coeffs.extend(big_l.iter().map(|&c| (c, -1.0)));
            lp.add_row(Row::new(coeffs, Sense::Eq, 0.0))?;
            // ‖l‖_p ≥ l_v, so these rows are valid and keep z off the apex.
            for &lv in &vm.l {
                lp.set_objective(lv, 0.0)?;
                lp.add_row(Row::new(vec![(z, 1.0), (lv, -1.0)], Sense::Ge, 0.0))?;
            }
            vm.z = Some(z);
            vm.big_l = big_l;
        }
        Variant::EpsFair(eps) => {
            let z = lp.add_column(0.0, f64::INFINITY, 0.0)?;
            let mut coeffs = vec![(z, metrics::eps_ratio(eps, m))];
            coeffs.extend(vm.l.iter().map(|&c| (c, -1.0)));
            lp.add_row(Row::new(coeffs, Sense::Eq, 0.0))?;
            for &lv in &vm.l {
                lp.add_row(Row::new(vec![(z, 1.0), (lv, -1.0)], Sense::Ge, 0.0))?;
            }
            vm.z = Some(z);
        }
        Variant::DeltaFair(delta) => {
            lp.add_rows(ordering_rows(vm))?;
            let shift = delta * (m as f64 - 1.0);
            let coeffs = gini_coefficients(m)
                .into_iter()
                .zip(&vm.l)
                .map(|(a, &c)| (c, a - shift))
                .collect();
            lp.add_row(Row::new(coeffs, Sense::Le, 0.0))?;
        }
    }
    Ok(())
}

/// Adds `l_1 ≥ l_2 ≥ … ≥ l_m`. A no-op for DeltaFair, which already has them.
pub fn add_symmetry_rows(
    lp: &mut LpModel,
    vm: &VarMap,
    spec: &ModelSpec,
) -> Result<(), FormulationError> {
    if !matches!(spec.variant, Variant::DeltaFair(_)) {
        lp.add_rows(ordering_rows(vm))?;
    }
    Ok(())
}

/// Builds the full relaxation for a spec.
pub fn build(
    inst: &Instance,
    spec: &ModelSpec,
    symmetry_breaking: bool,
) -> Result<(LpModel, VarMap), FormulationError> {
    spec.validate()?;
    let (mut lp, mut vm) = build_base(inst, spec.m)?;
    attach_variant(&mut lp, &mut vm, spec)?;
    if symmetry_breaking {
        add_symmetry_rows(&mut lp, &vm, spec)?;
    }
    Ok((lp, vm))
}

fn round_integral(col: usize, value: f64, tol: f64) -> Result<usize, FormulationError> {
    let r = value.round();
    if (value - r).abs() > tol || r < 0.0 {
        return Err(FormulationError::NotIntegral { col, value });
    }
    Ok(r as usize)
}

/// Reconstructs each salesman's closed walk from integral primal values.
///
/// Targets have degree 2, so each salesman's edges split into cycles through
/// the depot; they are traced in order of the smallest unused depot
/// neighbour and concatenated.
pub fn decode(vm: &VarMap, x: &[f64], tol: f64) -> Result<Vec<Vec<usize>>, FormulationError> {
    let n = vm.n_vertices;
    let d = vm.depot;
    let mut tours = Vec::with_capacity(vm.m);
    for v in 0..vm.m {
        let mut count = vec![0usize; n * n];
        let mut degree = vec![0usize; n];
        let mut used = 0usize;
        for (e, &(i, j)) in vm.edges.iter().enumerate() {
            let k = round_integral(vm.x[v][e], x[vm.x[v][e]], tol)?;
            if k > 0 {
                count[i * n + j] = k;
                count[j * n + i] = k;
                degree[i] += k;
                degree[j] += k;
                used += k;
            }
        }
        let not_tour = |reason: String| FormulationError::NotATour { salesman: v, reason };
        for i in vm.targets() {
            let visit = round_integral(vm.y[v][i], x[vm.y[v][i]], tol)?;
            if degree[i] != 2 * visit {
                return Err(not_tour(format!("target {i} has degree {} but y = {visit}", degree[i])));
            }
        }
        let mut tour = vec![d];
        let mut traced = 0usize;
        while let Some(first) = (0..n).find(|&j| count[d * n + j] > 0) {
            let mut cur = first;
            count[d * n + first] -= 1;
            count[first * n + d] -= 1;
            traced += 1;
            tour.push(cur);
            while cur != d {
                // Targets have degree 2, so one edge use remains.
                let next = (0..n)
                    .find(|&j| count[cur * n + j] > 0)
                    .ok_or_else(|| not_tour(format!("walk stuck at {cur}")))?;
                count[cur * n + next] -= 1;
                count[next * n + cur] -= 1;
                traced += 1;
                cur = next;
                tour.push(cur);
            }
        }
        if traced != used {
            return Err(not_tour(format!(
                "{} edge uses are not connected to the depot",
                used - traced
            )));
        }
        tours.push(tour);
    }
    Ok(tours)
}

/// Independent feasibility audit of a set of tours for a spec.
///
/// Checks that every tour is a closed walk at the depot, every target is
/// visited exactly once overall, and the variant's fairness constraint holds.
/// Returns the tour lengths.
pub fn audit(inst: &Instance, spec: &ModelSpec, tours: &[Vec<usize>]) -> Result<Vec<f64>, String> {
    let d = inst.depot().ok_or("instance has no depot")?;
    if tours.len() != spec.m {
        return Err(format!("expected {} tours, got {}", spec.m, tours.len()));
    }
    let mut seen = vec![0usize; inst.n_vertices()];
    for (v, t) in tours.iter().enumerate() {
        if t.first() != Some(&d) || t.last() != Some(&d) {
            return Err(format!("tour {v} does not start and end at the depot"));
        }
        for &i in t {
            if i >= inst.n_vertices() {
                return Err(format!("tour {v} has unknown vertex {i}"));
            }
            if i != d {
                seen[i] += 1;
            }
        }
        if t.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("tour {v} repeats a vertex consecutively"));
        }
    }
    for i in inst.targets() {
        if seen[i] != 1 {
            return Err(format!("target {i} visited {} times", seen[i]));
        }
    }
    let lengths: Vec<f64> = tours.iter().map(|t| tour_length(inst, t)).collect();
    if !spec.variant.admits(&lengths) {
        return Err(format!("lengths {lengths:?} violate {:?}", spec.variant));
    }
    Ok(lengths)
}
