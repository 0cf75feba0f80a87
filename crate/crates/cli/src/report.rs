//! Serializable reports. Values are rounded to 6 decimals, seconds to 2, so
//! reports are stable across runs apart from timing fields.

use fair_mtsp::bnc::{SolveOutcome, SolveStats, Termination};
use fair_mtsp::metrics;
use fair_mtsp::{ModelSpec, Variant};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

pub fn r6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn r2(x: f64) -> f64 {
    (x * 1e2).round() / 1e2
}

fn opt6(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite()).map(r6)
}

pub fn status_name(t: Termination) -> &'static str {
    match t {
        Termination::Optimal => "optimal",
        Termination::TimeLimit => "time-limit",
        Termination::Infeasible => "infeasible",
    }
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::MinSum => "min-sum",
        Variant::MinMax => "min-max",
        Variant::PNorm(_) => "p-norm",
        Variant::EpsFair(_) => "eps-fair",
        Variant::DeltaFair(_) => "delta-fair",
    }
}

pub fn variant_param(v: Variant) -> Option<f64> {
    match v {
        Variant::PNorm(p) => Some(f64::from(p)),
        Variant::EpsFair(x) | Variant::DeltaFair(x) => Some(x),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub salesmen: usize,
    pub depot: usize,
    pub time_limit_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub gini: Option<f64>,
    pub jain: Option<f64>,
    pub epsfi: Option<f64>,
    pub cof: Option<f64>,
}

impl Metrics {
    /// Recomputed from the lengths; `min_sum_total` is the baseline of the
    /// cost of fairness.
    pub fn of(lengths: &[f64], min_sum_total: Option<f64>) -> Self {
        let total: f64 = lengths.iter().sum();
        Metrics {
            gini: metrics::gini(lengths).ok().map(r6),
            jain: metrics::jain(lengths).ok().map(r6),
            epsfi: metrics::eps_fair_index(lengths).ok().map(r6),
            cof: min_sum_total.and_then(|b| metrics::cost_of_fairness(total, b).ok()).map(r6),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub nodes: usize,
    pub sec_cuts: usize,
    pub oa_cuts: usize,
    pub seconds: f64,
}

impl From<&SolveStats> for Stats {
    fn from(s: &SolveStats) -> Self {
        Stats {
            nodes: s.nodes,
            sec_cuts: s.sec_cuts,
            oa_cuts: s.oa_cuts,
            seconds: r2(s.seconds),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub instance: String,
    pub variant: Variant,
    pub params: RunParams,
    pub tours: Vec<Vec<usize>>,
    pub lengths: Vec<f64>,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub metrics: Option<Metrics>,
    pub stats: Stats,
    pub status: String,
}

impl RunReport {
    pub fn new(instance: &str, spec: &ModelSpec, params: RunParams, out: &SolveOutcome, min_sum_total: Option<f64>) -> Self {
        let sol = out.solution.as_ref();
        RunReport {
            schema_version: SCHEMA_VERSION,
            instance: instance.to_string(),
            variant: spec.variant,
            params,
            tours: sol.map(|s| s.tours.clone()).unwrap_or_default(),
            lengths: sol.map(|s| s.lengths.iter().copied().map(r6).collect()).unwrap_or_default(),
            objective: opt6(sol.map(|s| s.objective)),
            bound: opt6(Some(out.stats.bound)),
            gap: opt6(sol.map(|s| s.gap)),
            metrics: sol.map(|s| Metrics::of(&s.lengths, min_sum_total)),
            stats: Stats::from(&out.stats),
            status: status_name(out.stats.termination).to_string(),
        }
    }

    pub fn csv_header() -> &'static str {
        "instance,variant,param,salesmen,status,objective,bound,gap,total,gini,jain,epsfi,cof,nodes,sec_cuts,oa_cuts,seconds,lengths"
    }

    pub fn csv_row(&self) -> String {
        let m = self.metrics.as_ref();
        let total = (!self.lengths.is_empty()).then(|| r6(self.lengths.iter().sum()));
        [
            self.instance.clone(),
            variant_name(self.variant).to_string(),
            cell(variant_param(self.variant)),
            self.params.salesmen.to_string(),
            self.status.clone(),
            cell(self.objective),
            cell(self.bound),
            cell(self.gap),
            cell(total),
            cell(m.and_then(|m| m.gini)),
            cell(m.and_then(|m| m.jain)),
            cell(m.and_then(|m| m.epsfi)),
            cell(m.and_then(|m| m.cof)),
            self.stats.nodes.to_string(),
            self.stats.sec_cuts.to_string(),
            self.stats.oa_cuts.to_string(),
            format!("{:.2}", self.stats.seconds),
            self.lengths.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(" "),
        ]
        .join(",")
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "instance  {}\nvariant   {}{}\nsalesmen  {}\nstatus    {}\n",
            self.instance,
            variant_name(self.variant),
            variant_param(self.variant).map(|p| format!(" {p}")).unwrap_or_default(),
            self.params.salesmen,
            self.status
        );
        if let Some(o) = self.objective {
            s += &format!(
                "objective {o:.6}\nbound     {}\ngap       {}\n",
                cell(self.bound),
                cell(self.gap)
            );
        }
        for (v, (t, l)) in self.tours.iter().zip(&self.lengths).enumerate() {
            let route: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            s += &format!("tour {v}    {l:.6}  {}\n", route.join(" "));
        }
        if let Some(m) = &self.metrics {
            s += &format!(
                "gini {}  jain {}  epsfi {}  cof {}\n",
                cell(m.gini),
                cell(m.jain),
                cell(m.epsfi),
                cell(m.cof)
            );
        }
        s += &format!(
            "nodes {}  sec cuts {}  oa cuts {}  seconds {:.2}\n",
            self.stats.nodes, self.stats.sec_cuts, self.stats.oa_cuts, self.stats.seconds
        );
        s
    }
}

pub fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// One row of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub total: Option<f64>,
    pub fairness: Option<f64>,
    pub cof: Option<f64>,
    pub status: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub instance: String,
    pub family: String,
    pub salesmen: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("param,total,fairness,cof,status,seconds\n");
        for r in &self.rows {
            s += &format!(
                "{:.6},{},{},{},{},{:.2}\n",
                r.param,
                cell(r.total),
                cell(r.fairness),
                cell(r.cof),
                r.status,
                r.seconds
            );
        }
        s
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "instance {}  family {}  salesmen {}\n{:>10} {:>14} {:>10} {:>10} {:>11} {:>8}\n",
            self.instance, self.family, self.salesmen, "param", "total", "fairness", "cof", "status", "seconds"
        );
        for r in &self.rows {
            s += &format!(
                "{:>10.6} {:>14} {:>10} {:>10} {:>11} {:>8.2}\n",
                r.param,
                cell(r.total),
                cell(r.fairness),
                cell(r.cof),
                r.status,
                r.seconds
            );
        }
        s
    }
}

/// One solved variant in a min-max comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub variant: Variant,
    pub status: String,
    pub total: Option<f64>,
    pub longest: Option<f64>,
    pub gini: Option<f64>,
    pub epsfi: Option<f64>,
    pub lengths: Vec<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub instance: String,
    pub salesmen: usize,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("variant,param,status,total,longest,gini,epsfi,seconds\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{},{:.2}\n",
                variant_name(r.variant),
                cell(variant_param(r.variant)),
                r.status,
                cell(r.total),
                cell(r.longest),
                cell(r.gini),
                cell(r.epsfi),
                r.seconds
            );
        }
        s
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "instance {}  salesmen {}\n{:>10} {:>10} {:>11} {:>14} {:>14} {:>10} {:>10}\n",
            self.instance, self.salesmen, "variant", "param", "status", "total", "longest", "gini", "epsfi"
        );
        for r in &self.rows {
            s += &format!(
                "{:>10} {:>10} {:>11} {:>14} {:>14} {:>10} {:>10}\n",
                variant_name(r.variant),
                cell(variant_param(r.variant)),
                r.status,
                cell(r.total),
                cell(r.longest),
                cell(r.gini),
                cell(r.epsfi)
            );
        }
        s
    }
}
