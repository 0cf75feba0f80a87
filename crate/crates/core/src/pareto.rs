//! Efficiency–fairness trade-off: parameter sweeps, feasibility boundaries
//! and nondominated filtering.
//!
//! A sweep over ε (or Δ) solves the constrained problem at each grid value.
//! Feasible ε values form a prefix `[0, ε^max]` of `[0, 1]`, feasible Δ values
//! a suffix `[Δ^min, 1]`; [`feasibility_boundary`] bisects on that structure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnc::{self, SolveParams, SolveStats, Termination};
use crate::error::Error;
use crate::formulation::{ModelSpec, Variant};
use crate::instance::Instance;
use crate::metrics::{self, MetricError};

/// Two values closer than this are treated as equal when filtering.
const SAME: f64 = 1e-9;

/// Which fairness constraint is swept, and which index measures it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// ε-fairness, measured by εFI (higher is fairer).
    EpsFair,
    /// Δ-fairness, measured by the Gini coefficient (lower is fairer).
    DeltaFair,
}

impl Family {
    pub fn variant(self, param: f64) -> Variant {
        match self {
            Family::EpsFair => Variant::EpsFair(param),
            Family::DeltaFair => Variant::DeltaFair(param),
        }
    }

    pub fn fairness(self, lengths: &[f64]) -> Result<f64, MetricError> {
        match self {
            Family::EpsFair => metrics::eps_fair_index(lengths),
            Family::DeltaFair => metrics::gini(lengths),
        }
    }

    /// Whether fairness value `a` is at least as fair as `b`.
    fn at_least_as_fair(self, a: f64, b: f64) -> bool {
        match self {
            Family::EpsFair => a >= b - SAME,
            Family::DeltaFair => a <= b + SAME,
        }
    }
}

/// A `(total length, fairness)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub total: f64,
    pub fairness: f64,
}

fn dominates(a: FrontPoint, b: FrontPoint, family: Family) -> bool {
    let weakly = a.total <= b.total + SAME && family.at_least_as_fair(a.fairness, b.fairness);
    let same = (a.total - b.total).abs() <= SAME && (a.fairness - b.fairness).abs() <= SAME;
    weakly && !same
}

fn same(a: FrontPoint, b: FrontPoint) -> bool {
    (a.total - b.total).abs() <= SAME && (a.fairness - b.fairness).abs() <= SAME
}

/// Indices of the nondominated points, keeping the first of duplicates.
fn nondominated(points: &[FrontPoint], family: Family) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, &q)| {
                dominates(q, points[i], family) || (j < i && same(q, points[i]))
            })
        })
        .collect()
}

/// The nondominated subset of `points`, sorted by total length.
pub fn front(points: &[FrontPoint], family: Family) -> Vec<FrontPoint> {
    let mut out: Vec<FrontPoint> = nondominated(points, family).into_iter().map(|i| points[i]).collect();
    out.sort_by(|a, b| a.total.total_cmp(&b.total).then(a.fairness.total_cmp(&b.fairness)));
    out
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub param: f64,
    pub status: Termination,
    /// `None` when the grid point is infeasible or timed out without a
    /// solution.
    pub total: Option<f64>,
    pub fairness: Option<f64>,
    pub cof: Option<f64>,
    pub lengths: Vec<f64>,
    pub stats: SolveStats,
}

impl ParetoPoint {
    pub fn front_point(&self) -> Option<FrontPoint> {
        Some(FrontPoint {
            total: self.total?,
            fairness: self.fairness?,
        })
    }
}

/// Drops points dominated in (total ↓, fairness per family) and points
/// without a solution. Survivors keep their order by parameter.
pub fn nondominated_filter(points: &[ParetoPoint], family: Family) -> Vec<ParetoPoint> {
    let solved: Vec<&ParetoPoint> = points.iter().filter(|p| p.front_point().is_some()).collect();
    let fp: Vec<FrontPoint> = solved.iter().map(|p| p.front_point().unwrap()).collect();
    let mut out: Vec<ParetoPoint> = nondominated(&fp, family).into_iter().map(|i| solved[i].clone()).collect();
    out.sort_by(|a, b| a.param.total_cmp(&b.param));
    out
}

/// `0, step, 2·step, …, 1`.
pub fn grid(step: f64) -> Vec<f64> {
    let k = (1.0 / step).round() as usize;
    (0..=k).map(|i| (i as f64 * step).min(1.0)).collect()
}

fn min_sum_total(inst: &Instance, m: usize, params: &SolveParams) -> Result<f64, Error> {
    let out = bnc::solve(inst, &ModelSpec::new(Variant::MinSum, m), params)?;
    out.solution
        .map(|s| s.objective)
        .ok_or_else(|| Error::Internal(format!("min-sum baseline ended {:?}", out.stats.termination)))
}

/// Solves the scalarized problem at every grid value, concurrently. The
/// min-sum baseline for the cost of fairness is solved once.
pub fn sweep(
    inst: &Instance,
    m: usize,
    family: Family,
    grid: &[f64],
    params: &SolveParams,
) -> Result<Vec<ParetoPoint>, Error> {
    for &g in grid {
        family.variant(g).validate()?;
    }
    let baseline = min_sum_total(inst, m, params)?;
    grid.par_iter()
        .map(|&param| {
            let out = bnc::solve(inst, &ModelSpec::new(family.variant(param), m), params)?;
            let (total, fairness, cof, lengths) = match &out.solution {
                Some(s) => {
                    let total: f64 = s.lengths.iter().sum();
                    (
                        Some(total),
                        Some(family.fairness(&s.lengths)?),
                        Some(metrics::cost_of_fairness(total, baseline)?),
                        s.lengths.clone(),
                    )
                }
                None => (None, None, None, Vec::new()),
            };
            Ok(ParetoPoint {
                param,
                status: out.stats.termination,
                total,
                fairness,
                cof,
                lengths,
                stats: out.stats,
            })
        })
        .collect()
}

fn feasible(inst: &Instance, m: usize, family: Family, param: f64, params: &SolveParams) -> Result<bool, Error> {
    let out = bnc::solve(inst, &ModelSpec::new(family.variant(param), m), params)?;
    match out.stats.termination {
        Termination::Optimal => Ok(true),
        Termination::Infeasible => Ok(false),
        Termination::TimeLimit => Ok(out.solution.is_some()),
    }
}

/// Largest feasible ε (EpsFair) or smallest feasible Δ (DeltaFair), within
/// `tol`, by bisection.
pub fn feasibility_boundary(
    inst: &Instance,
    m: usize,
    family: Family,
    tol: f64,
    params: &SolveParams,
) -> Result<f64, Error> {
    if !(tol > 0.0) {
        return Err(Error::Internal(format!("tolerance must be positive, got {tol}")));
    }
    // `open` is the unconstrained end, `closed` the strict one.
    let (open, closed) = match family {
        Family::EpsFair => (0.0, 1.0),
        Family::DeltaFair => (1.0, 0.0),
    };
    if !feasible(inst, m, family, open, params)? {
        return Err(Error::Internal(format!("{family:?} is infeasible even at {open}")));
    }
    if feasible(inst, m, family, closed, params)? {
        return Ok(closed);
    }
    let (mut good, mut bad) = (open, closed);
    while (good - bad).abs() > tol {
        let mid = 0.5 * (good + bad);
        if feasible(inst, m, family, mid, params)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}
