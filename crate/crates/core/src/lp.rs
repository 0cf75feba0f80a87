//! Bounded-variable revised simplex over doubles.
//!
//! Rows are stored as activities: `Σ a_ij x_j - s_i = 0` with the bounds of
//! `s_i` encoding the row sense. The engine keeps an explicit dense basis
//! inverse, so adding rows and changing bounds leave the last basis dual
//! feasible and re-solves run the dual simplex from where the previous solve
//! stopped. Dual-infeasible starts (negative costs on unbounded columns) are
//! boxed artificially, then finished with the primal simplex.

use thiserror::Error;

/// Primal feasibility tolerance on rows and bounds.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost (dual feasibility) tolerance.
pub const OPT_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-9;
const ARTIFICIAL_BOUND: f64 = 1e7;
const REINVERT_EVERY: usize = 100;
const DEGENERATE_BEFORE_BLAND: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("unknown row {0}")]
    UnknownRow(usize),
    #[error("unknown column {0}")]
    UnknownColumn(usize),
    #[error("invalid bounds [{lo}, {hi}] for column {col}")]
    InvalidBounds { col: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in row or objective")]
    NonFinite,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A sparse linear row `Σ coeffs · x (sense) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { coeffs, sense, rhs }
    }

    /// Row activity at `x`.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values of the structural columns (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic at the value stored in `x` (free columns, released
    /// artificial bounds).
    Free,
}

/// A linear program `min cᵀx` over bounded columns and sparse rows.
#[derive(Clone, Debug, Default)]
pub struct LpModel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    obj: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Row>,
    engine: Option<Engine>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lo[col], self.hi[col])
    }

    pub fn objective(&self) -> &[f64] {
        &self.obj
    }

    /// Adds a column and returns its id. Drops any warm-start state.
    pub fn add_column(&mut self, lo: f64, hi: f64, obj: f64) -> Result<usize, LpError> {
        let col = self.obj.len();
        check_bounds(col, lo, hi)?;
        if !obj.is_finite() {
            return Err(LpError::NonFinite);
        }
        self.lo.push(lo);
        self.hi.push(hi);
        self.obj.push(obj);
        self.cols.push(Vec::new());
        self.engine = None;
        Ok(col)
    }

    /// Replaces the objective coefficient of `col`. Drops warm-start state.
    pub fn set_objective(&mut self, col: usize, obj: f64) -> Result<(), LpError> {
        if col >= self.obj.len() {
            return Err(LpError::UnknownColumn(col));
        }
        if !obj.is_finite() {
            return Err(LpError::NonFinite);
        }
        self.obj[col] = obj;
        self.engine = None;
        Ok(())
    }

    /// Appends a row; duplicate column entries are summed.
    pub fn add_row(&mut self, row: Row) -> Result<usize, LpError> {
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        let mut merged = row.coeffs;
        merged.sort_by_key(|&(j, _)| j);
        for (j, a) in merged {
            if j >= self.obj.len() {
                return Err(LpError::UnknownColumn(j));
            }
            if !a.is_finite() {
                return Err(LpError::NonFinite);
            }
            match coeffs.last_mut() {
                Some((k, v)) if *k == j => *v += a,
                _ => coeffs.push((j, a)),
            }
        }
        coeffs.retain(|&(_, a)| a != 0.0);
        if !row.rhs.is_finite() {
            return Err(LpError::NonFinite);
        }
        let idx = self.rows.len();
        for &(j, a) in &coeffs {
            self.cols[j].push((idx, a));
        }
        let row = Row { coeffs, sense: row.sense, rhs: row.rhs };
        if let Some(engine) = self.engine.as_mut() {
            engine.push_row(&row);
        }
        self.rows.push(row);
        Ok(idx)
    }

    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = Row>) -> Result<(), LpError> {
        for r in rows {
            self.add_row(r)?;
        }
        Ok(())
    }

    /// Changes the bounds of a column; the next solve warm-starts.
    pub fn set_bounds(&mut self, col: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        if col >= self.obj.len() {
            return Err(LpError::UnknownColumn(col));
        }
        check_bounds(col, lo, hi)?;
        self.lo[col] = lo;
        self.hi[col] = hi;
        if let Some(engine) = self.engine.as_mut() {
            engine.bound_changed(col, lo, hi);
        }
        Ok(())
    }

    /// Deletes the given rows (any order, duplicates ignored). The warm start
    /// survives when every deleted row is slack in the current basis.
    pub fn remove_rows(&mut self, rows: &[usize]) -> Result<(), LpError> {
        let r = self.rows.len();
        let mut drop = vec![false; r];
        for &i in rows {
            if i >= r {
                return Err(LpError::UnknownRow(i));
            }
            drop[i] = true;
        }
        if !drop.iter().any(|&d| d) {
            return Ok(());
        }
        let mut new_idx = vec![usize::MAX; r];
        let mut next = 0;
        for i in 0..r {
            if !drop[i] {
                new_idx[i] = next;
                next += 1;
            }
        }
        let old = std::mem::take(&mut self.rows);
        self.rows = old.into_iter().zip(&drop).filter(|(_, &d)| !d).map(|(row, _)| row).collect();
        for col in self.cols.iter_mut() {
            col.retain(|&(i, _)| !drop[i]);
            for e in col.iter_mut() {
                e.0 = new_idx[e.0];
            }
        }
        if let Some(engine) = self.engine.as_mut() {
            if !engine.remove_rows(&drop) {
                self.engine = None;
            }
        }
        Ok(())
    }

    /// Solves the model, reusing the previous basis when there is one.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let mut engine = match self.engine.take() {
            Some(e) => e,
            None => Engine::new(self),
        };
        let out = engine.run(self);
        if out.is_ok() {
            self.engine = Some(engine);
        }
        out
    }

    /// Solves from a cold slack basis regardless of warm-start state.
    pub fn solve_cold(&mut self) -> Result<LpSolution, LpError> {
        self.engine = None;
        self.solve()
    }
}

fn check_bounds(col: usize, lo: f64, hi: f64) -> Result<(), LpError> {
    if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
        return Err(LpError::InvalidBounds { col, lo, hi });
    }
    Ok(())
}

fn row_bounds(row: &Row) -> (f64, f64) {
    match row.sense {
        Sense::Le => (f64::NEG_INFINITY, row.rhs),
        Sense::Ge => (row.rhs, f64::INFINITY),
        Sense::Eq => (row.rhs, row.rhs),
    }
}

#[derive(Clone, Debug)]
struct Engine {
    /// Structural column count.
    n: usize,
    /// Bounds over structurals then slacks, as given by the model.
    real_lo: Vec<f64>,
    real_hi: Vec<f64>,
    /// Working bounds: the real ones, or an artificial box for nonbasic
    /// columns whose preferred bound is infinite.
    lo: Vec<f64>,
    hi: Vec<f64>,
    boxed: Vec<bool>,
    cost: Vec<f64>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<Vec<f64>>,
    /// Squared row norms of `binv` (dual steepest-edge weights).
    weight: Vec<f64>,
    since_reinvert: usize,
}

const NOT_BASIC: usize = usize::MAX;

enum Phase {
    Optimal,
    Infeasible,
    Unbounded,
}

impl Engine {
    fn new(model: &LpModel) -> Self {
        let n = model.obj.len();
        let r = model.rows.len();
        let mut lo = model.lo.clone();
        let mut hi = model.hi.clone();
        let mut cost = model.obj.clone();
        for row in &model.rows {
            let (l, h) = row_bounds(row);
            lo.push(l);
            hi.push(h);
            cost.push(0.0);
        }
        let total = n + r;
        let mut binv = vec![vec![0.0; r]; r];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = -1.0;
        }
        let mut e = Engine {
            n,
            real_lo: lo.clone(),
            real_hi: hi.clone(),
            lo,
            hi,
            boxed: vec![false; total],
            cost,
            status: vec![VarStatus::AtLower; total],
            x: vec![0.0; total],
            d: vec![0.0; total],
            basis: (n..total).collect(),
            pos: vec![NOT_BASIC; total],
            binv,
            weight: vec![1.0; r],
            since_reinvert: 0,
        };
        for (k, &j) in e.basis.iter().enumerate() {
            e.pos[j] = k;
            e.status[j] = VarStatus::Basic;
        }
        for j in 0..n {
            e.d[j] = e.cost[j];
            e.place_nonbasic(j);
        }
        e
    }

    fn num_rows(&self) -> usize {
        self.basis.len()
    }

    fn num_vars(&self) -> usize {
        self.lo.len()
    }

    /// Column `j` of `[A | -I]` as sparse entries.
    fn column<'a>(&self, j: usize, cols: &'a [Vec<(usize, f64)>]) -> ColIter<'a> {
        if j < self.n {
            ColIter::Structural(cols[j].iter())
        } else {
            ColIter::Slack(Some(j - self.n))
        }
    }

    /// Puts a nonbasic variable at the bound its reduced cost prefers,
    /// boxing artificially when that bound is infinite.
    fn place_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.real_lo[j], self.real_hi[j]);
        self.lo[j] = lo;
        self.hi[j] = hi;
        self.boxed[j] = false;
        let dj = self.d[j];
        let want_upper = dj < 0.0 || (dj == 0.0 && lo == f64::NEG_INFINITY && hi.is_finite());
        if want_upper {
            if hi == f64::INFINITY {
                self.hi[j] = lo.max(0.0) + ARTIFICIAL_BOUND;
                self.boxed[j] = true;
            }
            self.status[j] = VarStatus::AtUpper;
            self.x[j] = self.hi[j];
        } else {
            if lo == f64::NEG_INFINITY {
                if dj == 0.0 && hi == f64::INFINITY {
                    self.status[j] = VarStatus::Free;
                    self.x[j] = 0.0;
                    return;
                }
                self.lo[j] = hi.min(0.0) - ARTIFICIAL_BOUND;
                self.boxed[j] = true;
            }
            self.status[j] = VarStatus::AtLower;
            self.x[j] = self.lo[j];
        }
    }

    fn bound_changed(&mut self, col: usize, lo: f64, hi: f64) {
        self.real_lo[col] = lo;
        self.real_hi[col] = hi;
        self.lo[col] = lo;
        self.hi[col] = hi;
        self.boxed[col] = false;
        if self.status[col] != VarStatus::Basic {
            self.place_nonbasic(col);
        }
    }

    fn push_row(&mut self, row: &Row) {
        let r = self.num_rows();
        let slack = self.num_vars();
        debug_assert_eq!(slack, self.n + r);
        // New inverse row: a_B B^{-1}, then -1 in the new column.
        let mut new_row = vec![0.0; r + 1];
        for &(j, a) in &row.coeffs {
            let k = self.pos[j];
            if k != NOT_BASIC {
                for (dst, s) in new_row.iter_mut().zip(&self.binv[k]) {
                    *dst += a * s;
                }
            }
        }
        new_row[r] = -1.0;
        for b in self.binv.iter_mut() {
            b.push(0.0);
        }
        self.weight.push(new_row.iter().map(|v| v * v).sum());
        self.binv.push(new_row);
        let (l, h) = row_bounds(row);
        self.real_lo.push(l);
        self.real_hi.push(h);
        self.lo.push(l);
        self.hi.push(h);
        self.cost.push(0.0);
        self.boxed.push(false);
        self.status.push(VarStatus::Basic);
        self.x.push(row.activity(&self.x[..self.n]));
        self.d.push(0.0);
        self.pos.push(r);
        self.basis.push(slack);
    }

    fn run(&mut self, model: &LpModel) -> Result<LpSolution, LpError> {
        let mut iterations = 0usize;
        let limit = 50_000 + 50 * self.num_vars();
        let mut rounds = 0;
        let status = loop {
            rounds += 1;
            if rounds > 20 {
                return Err(LpError::Numerical("simplex did not settle".into()));
            }
            if self.since_reinvert >= REINVERT_EVERY || rounds > 1 {
                self.reinvert(&model.cols)?;
            }
            self.compute_duals(&model.cols);
            self.restore_dual_feasibility();
            self.compute_primal(&model.cols);
            match self.dual_simplex(&model.cols, &mut iterations, limit)? {
                Phase::Infeasible => {
                    // Confirm on a fresh factorization before trusting the ray.
                    self.reinvert(&model.cols)?;
                    self.compute_duals(&model.cols);
                    self.restore_dual_feasibility();
                    self.compute_primal(&model.cols);
                    match self.dual_simplex(&model.cols, &mut iterations, limit)? {
                        Phase::Infeasible => break LpStatus::Infeasible,
                        _ => continue,
                    }
                }
                Phase::Unbounded => unreachable!("dual simplex never reports unbounded"),
                Phase::Optimal => {}
            }
            if self.release_artificial() {
                match self.primal_simplex(&model.cols, &mut iterations, limit)? {
                    Phase::Unbounded => break LpStatus::Unbounded,
                    Phase::Infeasible => continue,
                    Phase::Optimal => {}
                }
            }
            // Recompute from the current inverse; a failed check reinverts on
            // the next round.
            self.compute_primal(&model.cols);
            self.compute_duals(&model.cols);
            if self.max_primal_infeasibility() <= FEAS_TOL
                && self.max_dual_infeasibility() <= 1e3 * OPT_TOL
                && self.max_residual(model) <= 0.1 * FEAS_TOL
            {
                break LpStatus::Optimal;
            }
        };
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = x.iter().zip(&model.obj).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            status,
            x,
            objective,
            iterations,
        })
    }

    /// Restores real bounds everywhere; true if a nonbasic column was resting
    /// on an artificial box (the dual optimum is then not final).
    fn release_artificial(&mut self) -> bool {
        let mut any = false;
        for j in 0..self.num_vars() {
            if !self.boxed[j] {
                continue;
            }
            self.boxed[j] = false;
            self.lo[j] = self.real_lo[j];
            self.hi[j] = self.real_hi[j];
            if self.status[j] != VarStatus::Basic {
                self.status[j] = VarStatus::Free;
                any = true;
            }
        }
        any
    }

    /// Rebuilds `B^{-1}` from scratch.
    ///
    /// With basic slacks covering rows `R_s` and structural basic columns
    /// `T` over the remaining rows `R_t`, only the square block `A_t =
    /// A[R_t, T]` needs inverting: rows of `B^{-1}` for `T` are those of
    /// `A_t^{-1}`, and the row for the slack of `i ∈ R_s` is `A[i, T] A_t^{-1}`
    /// on `R_t` with `-1` at column `i`.
    fn reinvert(&mut self, cols: &[Vec<(usize, f64)>]) -> Result<(), LpError> {
        let r = self.num_rows();
        for attempt in 0..3 {
            let mut slack_pos = vec![NOT_BASIC; r];
            let mut structural = Vec::new();
            for (k, &j) in self.basis.iter().enumerate() {
                if j >= self.n {
                    slack_pos[j - self.n] = k;
                } else {
                    structural.push(k);
                }
            }
            let open: Vec<usize> = (0..r).filter(|&i| slack_pos[i] == NOT_BASIC).collect();
            let q = structural.len();
            debug_assert_eq!(open.len(), q);
            let mut local = vec![NOT_BASIC; r];
            for (a, &i) in open.iter().enumerate() {
                local[i] = a;
            }
            // Gauss-Jordan on [A_t | I].
            let mut b = vec![vec![0.0; q]; q];
            for (t, &k) in structural.iter().enumerate() {
                for &(i, a) in &cols[self.basis[k]] {
                    if local[i] != NOT_BASIC {
                        b[local[i]][t] = a;
                    }
                }
            }
            let mut inv = vec![vec![0.0; q]; q];
            for (a, row) in inv.iter_mut().enumerate() {
                row[a] = 1.0;
            }
            let mut row_used = vec![false; q];
            let mut pivot_row = vec![NOT_BASIC; q];
            let mut deficient = Vec::new();
            for t in 0..q {
                let mut best = NOT_BASIC;
                let mut best_abs = 1e-11;
                for (a, used) in row_used.iter().enumerate() {
                    if !used && b[a][t].abs() > best_abs {
                        best_abs = b[a][t].abs();
                        best = a;
                    }
                }
                if best == NOT_BASIC {
                    deficient.push(t);
                    continue;
                }
                row_used[best] = true;
                pivot_row[t] = best;
                let p = b[best][t];
                let brow: Vec<f64> = b[best].iter().map(|v| v / p).collect();
                let irow: Vec<f64> = inv[best].iter().map(|v| v / p).collect();
                for a in 0..q {
                    if a == best {
                        continue;
                    }
                    let f = b[a][t];
                    if f != 0.0 {
                        for (dst, s) in b[a].iter_mut().zip(&brow).skip(t) {
                            *dst -= f * s;
                        }
                        for (dst, s) in inv[a].iter_mut().zip(&irow) {
                            if *s != 0.0 {
                                *dst -= f * s;
                            }
                        }
                    }
                }
                b[best] = brow;
                inv[best] = irow;
            }
            if deficient.is_empty() {
                let mut binv = vec![vec![0.0; r]; r];
                for (t, &k) in structural.iter().enumerate() {
                    let src = &inv[pivot_row[t]];
                    for (a, &i) in open.iter().enumerate() {
                        binv[k][i] = src[a];
                    }
                }
                for i in 0..r {
                    if slack_pos[i] != NOT_BASIC {
                        binv[slack_pos[i]][i] = -1.0;
                    }
                }
                for (t, &k) in structural.iter().enumerate() {
                    let src = &inv[pivot_row[t]];
                    for &(i, a) in &cols[self.basis[k]] {
                        let kk = slack_pos[i];
                        if kk == NOT_BASIC {
                            continue;
                        }
                        let dst = &mut binv[kk];
                        for (c, &i2) in open.iter().enumerate() {
                            dst[i2] += a * src[c];
                        }
                    }
                }
                self.weight = binv.iter().map(|row| row.iter().map(|v| v * v).sum()).collect();
                self.binv = binv;
                self.since_reinvert = 0;
                return Ok(());
            }
            // Swap dependent columns for slacks of uncovered rows.
            let free_rows: Vec<usize> = (0..q).filter(|&a| !row_used[a]).map(|a| open[a]).collect();
            for (&t, &i) in deficient.iter().zip(&free_rows) {
                let k = structural[t];
                let out = self.basis[k];
                let slack = self.n + i;
                self.pos[out] = NOT_BASIC;
                self.status[out] = VarStatus::AtLower;
                self.d[out] = 0.0;
                self.place_nonbasic(out);
                self.basis[k] = slack;
                self.pos[slack] = k;
                self.status[slack] = VarStatus::Basic;
                self.boxed[slack] = false;
            }
            if attempt == 2 {
                break;
            }
        }
        Err(LpError::Numerical("singular basis could not be repaired".into()))
    }

    /// Deletes rows whose slacks are basic; `B^{-1}` loses the slack's row
    /// and the deleted row's column. Returns false if some slack is nonbasic.
    fn remove_rows(&mut self, drop: &[bool]) -> bool {
        let r = self.num_rows();
        if (0..r).any(|i| drop[i] && self.status[self.n + i] != VarStatus::Basic) {
            return false;
        }
        let drop_pos: Vec<bool> = self.basis.iter().map(|&j| j >= self.n && drop[j - self.n]).collect();
        let keep_var: Vec<bool> = (0..self.num_vars()).map(|j| j < self.n || !drop[j - self.n]).collect();
        // New ids of surviving variables.
        let mut new_id = vec![NOT_BASIC; self.num_vars()];
        let mut next = 0;
        for j in 0..self.num_vars() {
            if keep_var[j] {
                new_id[j] = next;
                next += 1;
            }
        }
        fn filter<T: Copy>(v: &[T], keep: &[bool]) -> Vec<T> {
            v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect()
        }
        self.binv = self
            .binv
            .iter()
            .zip(&drop_pos)
            .filter(|(_, &d)| !d)
            .map(|(row, _)| filter(row, &drop.iter().map(|d| !d).collect::<Vec<_>>()))
            .collect();
        self.weight = self.binv.iter().map(|row| row.iter().map(|v| v * v).sum()).collect();
        self.basis = filter(&self.basis, &drop_pos.iter().map(|d| !d).collect::<Vec<_>>())
            .into_iter()
            .map(|j| new_id[j])
            .collect();
        self.real_lo = filter(&self.real_lo, &keep_var);
        self.real_hi = filter(&self.real_hi, &keep_var);
        self.lo = filter(&self.lo, &keep_var);
        self.hi = filter(&self.hi, &keep_var);
        self.boxed = filter(&self.boxed, &keep_var);
        self.cost = filter(&self.cost, &keep_var);
        self.status = filter(&self.status, &keep_var);
        self.x = filter(&self.x, &keep_var);
        self.d = filter(&self.d, &keep_var);
        self.pos = vec![NOT_BASIC; self.num_vars()];
        for (k, &j) in self.basis.iter().enumerate() {
            self.pos[j] = k;
        }
        true
    }

    /// x_B = -B^{-1} N x_N.
    fn compute_primal(&mut self, cols: &[Vec<(usize, f64)>]) {
        let r = self.num_rows();
        let mut rhs = vec![0.0; r];
        for j in 0..self.num_vars() {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, a) in self.column(j, cols) {
                rhs[i] -= a * xj;
            }
        }
        for k in 0..r {
            let v: f64 = self.binv[k].iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[k]] = v;
        }
            }

    /// y = c_B B^{-1}; d_j = c_j - y a_j.
    fn compute_duals(&mut self, cols: &[Vec<(usize, f64)>]) {
        let r = self.num_rows();
        let mut y = vec![0.0; r];
        for k in 0..r {
            let c = self.cost[self.basis[k]];
            if c != 0.0 {
                for (dst, s) in y.iter_mut().zip(&self.binv[k]) {
                    *dst += c * s;
                }
            }
        }
        for j in 0..self.num_vars() {
            if self.status[j] == VarStatus::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let ya: f64 = self.column(j, cols).map(|(i, a)| y[i] * a).sum();
            self.d[j] = self.cost[j] - ya;
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lo[j] == self.hi[j]
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        if self.is_fixed(j) {
            return 0.0;
        }
        match self.status[j] {
            VarStatus::Basic => 0.0,
            VarStatus::AtLower => (-self.d[j]).max(0.0),
            VarStatus::AtUpper => self.d[j].max(0.0),
            VarStatus::Free => {
                let mut v = 0.0f64;
                if self.x[j] < self.hi[j] {
                    v = v.max(-self.d[j]);
                }
                if self.x[j] > self.lo[j] {
                    v = v.max(self.d[j]);
                }
                v
            }
        }
    }

    fn max_dual_infeasibility(&self) -> f64 {
        (0..self.num_vars()).map(|j| self.dual_infeasibility(j)).fold(0.0, f64::max)
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] {
            v - self.lo[j]
        } else if v > self.hi[j] {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    /// Largest `|a_i x - s_i|` over the model rows.
    fn max_residual(&self, model: &LpModel) -> f64 {
        model
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let s = self.x[self.n + i];
                (row.activity(&self.x) - s).abs() / (1.0 + s.abs())
            })
            .fold(0.0, f64::max)
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| self.primal_infeasibility(j).abs())
            .fold(0.0, f64::max)
    }

    /// Moves dual-infeasible nonbasic variables to the bound their reduced
    /// cost prefers.
    fn restore_dual_feasibility(&mut self) {
        for j in 0..self.num_vars() {
            if self.status[j] != VarStatus::Basic && self.dual_infeasibility(j) > OPT_TOL {
                self.place_nonbasic(j);
            }
        }
    }

    /// Row `r` of B^{-1}[A | -I] over nonbasic columns, as (col, alpha).
    fn pivot_row(&self, r: usize, cols: &[Vec<(usize, f64)>], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let rho = &self.binv[r];
        for j in 0..self.n {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let a: f64 = cols[j].iter().map(|&(i, v)| rho[i] * v).sum();
            if a != 0.0 {
                out.push((j, a));
            }
        }
        for (i, &v) in rho.iter().enumerate() {
            let j = self.n + i;
            if self.status[j] != VarStatus::Basic && v != 0.0 {
                out.push((j, -v));
            }
        }
    }

    /// B^{-1} a_q.
    fn pivot_column(&self, q: usize, cols: &[Vec<(usize, f64)>]) -> Vec<f64> {
        let r = self.num_rows();
        let mut out = vec![0.0; r];
        let entries: Vec<(usize, f64)> = self.column(q, cols).collect();
        for (k, row) in self.binv.iter().enumerate() {
            out[k] = entries.iter().map(|&(i, a)| row[i] * a).sum();
        }
        out
    }

    fn update_inverse(&mut self, r: usize, alpha_q: &[f64]) {
        let p = alpha_q[r];
        let pivot: Vec<f64> = self.binv[r].iter().map(|v| v / p).collect();
        for (k, row) in self.binv.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = alpha_q[k];
            if f != 0.0 {
                let mut w = 0.0;
                for (dst, s) in row.iter_mut().zip(&pivot) {
                    *dst -= f * s;
                    w += *dst * *dst;
                }
                self.weight[k] = w;
            }
        }
        self.weight[r] = pivot.iter().map(|v| v * v).sum();
        self.binv[r] = pivot;
        self.since_reinvert += 1;
    }

    fn swap_basis(&mut self, r: usize, q: usize, leaving_status: VarStatus) {
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.pos[q] = r;
        self.status[q] = VarStatus::Basic;
        self.pos[leaving] = NOT_BASIC;
        self.status[leaving] = leaving_status;
    }

    fn dual_simplex(
        &mut self,
        cols: &[Vec<(usize, f64)>],
        iterations: &mut usize,
        limit: usize,
    ) -> Result<Phase, LpError> {
        let mut row_buf = Vec::new();
        let mut degenerate = 0usize;
        loop {
            if *iterations > limit {
                return Err(LpError::Numerical("iteration limit in dual simplex".into()));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert(cols)?;
                self.compute_primal(cols);
                self.compute_duals(cols);
            }
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            // Leaving row.
            let mut leave = NOT_BASIC;
            let mut best = 0.0;
            for (k, &j) in self.basis.iter().enumerate() {
                let delta = self.primal_infeasibility(j);
                if delta.abs() <= FEAS_TOL {
                    continue;
                }
                if bland {
                    if leave == NOT_BASIC || j < self.basis[leave] {
                        leave = k;
                    }
                } else {
                    let score = delta * delta / self.weight[k].max(1e-12);
                    if score > best {
                        best = score;
                        leave = k;
                    }
                }
            }
            if leave == NOT_BASIC {
                return Ok(Phase::Optimal);
            }
            let r = leave;
            let jr = self.basis[r];
            let delta = self.primal_infeasibility(jr);
            self.pivot_row(r, cols, &mut row_buf);
            let sign = if delta < 0.0 { -1.0 } else { 1.0 };

            // Ratio test over eligible nonbasic columns.
            let eligible = |s: &Self, j: usize, at: f64| -> bool {
                if s.is_fixed(j) || at.abs() <= PIVOT_TOL {
                    return false;
                }
                match s.status[j] {
                    VarStatus::AtLower => at > 0.0,
                    VarStatus::AtUpper => at < 0.0,
                    VarStatus::Free => true,
                    VarStatus::Basic => false,
                }
            };
            let signed_d = |s: &Self, j: usize| -> f64 {
                match s.status[j] {
                    VarStatus::AtLower => s.d[j].max(0.0),
                    VarStatus::AtUpper => (-s.d[j]).max(0.0),
                    _ => 0.0,
                }
            };
            let mut q = NOT_BASIC;
            if bland {
                let mut min_ratio = f64::INFINITY;
                for &(j, a) in &row_buf {
                    let at = sign * a;
                    if !eligible(self, j, at) {
                        continue;
                    }
                    let ratio = signed_d(self, j) / at.abs();
                    if ratio < min_ratio - 1e-12 || (ratio <= min_ratio + 1e-12 && j < q) {
                        if ratio < min_ratio {
                            min_ratio = ratio;
                        }
                        q = j;
                    }
                }
            } else {
                let mut theta_max = f64::INFINITY;
                for &(j, a) in &row_buf {
                    let at = sign * a;
                    if !eligible(self, j, at) {
                        continue;
                    }
                    let ratio = (signed_d(self, j) + OPT_TOL) / at.abs();
                    theta_max = theta_max.min(ratio);
                }
                let mut best_alpha = 0.0;
                for &(j, a) in &row_buf {
                    let at = sign * a;
                    if !eligible(self, j, at) {
                        continue;
                    }
                    if signed_d(self, j) / at.abs() <= theta_max && at.abs() > best_alpha {
                        best_alpha = at.abs();
                        q = j;
                    }
                }
            }
            if q == NOT_BASIC {
                return Ok(Phase::Infeasible);
            }
            let alpha_rq = row_buf.iter().find(|&&(j, _)| j == q).map(|&(_, a)| a).unwrap();
            let theta_d = self.d[q] / alpha_rq;
            if theta_d.abs() < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for &(j, a) in &row_buf {
                self.d[j] -= theta_d * a;
            }
            self.d[q] = 0.0;
            self.d[jr] = -theta_d;

            let alpha_q = self.pivot_column(q, cols);
            let theta_p = delta / alpha_q[r];
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] -= theta_p * alpha_q[k];
            }
            self.x[q] += theta_p;
            let leaving_status = if delta < 0.0 {
                self.x[jr] = self.lo[jr];
                VarStatus::AtLower
            } else {
                self.x[jr] = self.hi[jr];
                VarStatus::AtUpper
            };
            self.update_inverse(r, &alpha_q);
            self.swap_basis(r, q, leaving_status);
            *iterations += 1;
        }
    }

    fn primal_simplex(
        &mut self,
        cols: &[Vec<(usize, f64)>],
        iterations: &mut usize,
        limit: usize,
    ) -> Result<Phase, LpError> {
        let mut row_buf = Vec::new();
        let mut degenerate = 0usize;
        self.reinvert(cols)?;
        self.compute_primal(cols);
        self.compute_duals(cols);
        loop {
            if *iterations > limit {
                return Err(LpError::Numerical("iteration limit in primal simplex".into()));
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert(cols)?;
                self.compute_primal(cols);
                self.compute_duals(cols);
            }
            if self.max_primal_infeasibility() > 1e3 * FEAS_TOL {
                return Ok(Phase::Infeasible);
            }
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            // Entering column and direction.
            let mut q = NOT_BASIC;
            let mut dir = 0.0;
            let mut best = OPT_TOL;
            for j in 0..self.num_vars() {
                if self.status[j] == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let dj = self.d[j];
                let can_up = self.x[j] < self.hi[j] && self.status[j] != VarStatus::AtUpper;
                let can_down = self.x[j] > self.lo[j] && self.status[j] != VarStatus::AtLower;
                let (gain, dj_dir) = if dj < -OPT_TOL && can_up {
                    (-dj, 1.0)
                } else if dj > OPT_TOL && can_down {
                    (dj, -1.0)
                } else {
                    continue;
                };
                if bland {
                    q = j;
                    dir = dj_dir;
                    break;
                }
                if gain > best {
                    best = gain;
                    q = j;
                    dir = dj_dir;
                }
            }
            if q == NOT_BASIC {
                return Ok(Phase::Optimal);
            }
            let alpha_q = self.pivot_column(q, cols);
            // Harris ratio test: x_B(t) = x_B - dir * t * alpha_q.
            let own = if dir > 0.0 { self.hi[q] - self.x[q] } else { self.x[q] - self.lo[q] };
            let mut theta_max = own;
            for (k, &j) in self.basis.iter().enumerate() {
                let rate = -dir * alpha_q[k];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let room = if rate < 0.0 {
                    self.x[j] - self.lo[j] + FEAS_TOL
                } else {
                    self.hi[j] - self.x[j] + FEAS_TOL
                };
                theta_max = theta_max.min(room.max(0.0) / rate.abs());
            }
            if theta_max == f64::INFINITY {
                return Ok(Phase::Unbounded);
            }
            let mut leave = NOT_BASIC;
            let mut best_alpha = 0.0;
            let mut step = own;
            if bland {
                // Textbook ratio test, smallest variable index on ties.
                for (k, &j) in self.basis.iter().enumerate() {
                    let rate = -dir * alpha_q[k];
                    if rate.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let room = if rate < 0.0 { self.x[j] - self.lo[j] } else { self.hi[j] - self.x[j] };
                    let ratio = room.max(0.0) / rate.abs();
                    if ratio < step - 1e-12
                        || (leave != NOT_BASIC && ratio <= step + 1e-12 && j < self.basis[leave])
                        || (leave == NOT_BASIC && ratio <= step)
                    {
                        step = step.min(ratio);
                        leave = k;
                    }
                }
            } else {
                for (k, &j) in self.basis.iter().enumerate() {
                    let rate = -dir * alpha_q[k];
                    if rate.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let room = if rate < 0.0 { self.x[j] - self.lo[j] } else { self.hi[j] - self.x[j] };
                    let ratio = room.max(0.0) / rate.abs();
                    if ratio <= theta_max && rate.abs() > best_alpha {
                        best_alpha = rate.abs();
                        leave = k;
                        step = ratio;
                    }
                }
            }
            if leave == NOT_BASIC || own <= step {
                // Bound flip of the entering column.
                let t = own;
                for (k, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= dir * t * alpha_q[k];
                }
                self.x[q] += dir * t;
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                *iterations += 1;
                continue;
            }
            let r = leave;
            let jr = self.basis[r];
            if step * self.d[q].abs() < 1e-9 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot_row(r, cols, &mut row_buf);
            let alpha_rq = alpha_q[r];
            let theta_d = self.d[q] / alpha_rq;
            for &(j, a) in &row_buf {
                self.d[j] -= theta_d * a;
            }
            self.d[q] = 0.0;
            self.d[jr] = -theta_d;
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] -= dir * step * alpha_q[k];
            }
            self.x[q] += dir * step;
            let rate = -dir * alpha_q[r];
            let leaving_status = if rate < 0.0 {
                self.x[jr] = self.lo[jr];
                VarStatus::AtLower
            } else {
                self.x[jr] = self.hi[jr];
                VarStatus::AtUpper
            };
            self.update_inverse(r, &alpha_q);
            self.swap_basis(r, q, leaving_status);
            *iterations += 1;
        }
    }
}

enum ColIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Slack(Option<usize>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Structural(it) => it.next().copied(),
            ColIter::Slack(i) => i.take().map(|i| (i, -1.0)),
        }
    }
}
