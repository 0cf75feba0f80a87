mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fair_mtsp::bnc::{SolveOutcome, Termination};
use fair_mtsp::pareto::{self, Family};
use fair_mtsp::{metrics, oracle, solve, Instance, ModelSpec, SolveParams, Variant};

use report::{r2, r6, status_name, CompareReport, CompareRow, Metrics, RunParams, RunReport, SweepReport, SweepRow};

#[derive(Parser)]
#[command(name = "fair-mtsp", version, about = "Exact branch-and-cut for the multiple traveling salesman problem with fairness constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one variant to optimality or the time limit.
    Solve(SolveArgs),
    /// Sweep the ε or Δ fairness level over a grid.
    Pareto(ParetoArgs),
    /// Solve min-max, then the ε- and Δ-fair variants at its fairness level.
    CompareMinmax(CompareArgs),
    /// Cross-check the solver against brute-force enumeration.
    Oracle(OracleArgs),
    /// Fairness indices of a length vector.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// TSPLIB (.tsp) or JSON (.json) instance.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    salesmen: usize,
    /// Add a depot at the centroid of the coordinates (it becomes vertex 0).
    #[arg(long, conflicts_with = "depot")]
    centroid_depot: bool,
    /// Use this existing vertex (0-based) as the depot.
    #[arg(long)]
    depot: Option<usize>,
    /// Per-solve time limit.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantKind {
    MinSum,
    MinMax,
    PNorm,
    EpsFair,
    DeltaFair,
}

#[derive(Args)]
struct VariantArgs {
    #[arg(long, value_enum)]
    variant: VariantKind,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    variant: VariantArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Eps,
    Delta,
}

#[derive(Args)]
struct ParetoArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 0.0, conflicts_with = "grid")]
    grid_start: f64,
    #[arg(long, default_value_t = 1.0, conflicts_with = "grid")]
    grid_end: f64,
    #[arg(long, default_value_t = 0.05, conflicts_with = "grid")]
    grid_step: f64,
    /// Explicit comma-separated grid values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Keep only nondominated rows.
    #[arg(long)]
    nondominated: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    variant: VariantArgs,
}

#[derive(Args)]
struct MetricsArgs {
    /// Comma-separated tour lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    lengths: Vec<f64>,
    /// Min-sum total used as the cost-of-fairness baseline.
    #[arg(long)]
    min_sum_total: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
}

const EXIT_TIME_LIMIT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

fn exit_code(t: Termination) -> u8 {
    match t {
        Termination::Optimal => 0,
        Termination::TimeLimit => EXIT_TIME_LIMIT,
        Termination::Infeasible => EXIT_INFEASIBLE,
    }
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        let inst = Instance::load(&self.instance).with_context(|| format!("loading {}", self.instance.display()))?;
        let inst = if self.centroid_depot {
            inst.add_centroid_depot()?
        } else if let Some(d) = self.depot {
            inst.with_depot(d)?
        } else {
            inst
        };
        if inst.depot().is_none() {
            bail!("instance has no depot; pass --centroid-depot or --depot");
        }
        Ok(inst)
    }

    fn params(&self) -> Result<SolveParams> {
        if !(self.time_limit > 0.0) {
            bail!("--time-limit must be positive");
        }
        Ok(SolveParams {
            time_limit_seconds: self.time_limit,
            ..SolveParams::default()
        })
    }

    fn run_params(&self, inst: &Instance) -> RunParams {
        RunParams {
            salesmen: self.salesmen,
            depot: inst.depot().unwrap_or(0),
            time_limit_seconds: self.time_limit,
        }
    }
}

impl VariantArgs {
    fn resolve(&self) -> Result<Variant> {
        let given = [("--p", self.p.is_some()), ("--eps", self.eps.is_some()), ("--delta", self.delta.is_some())];
        let allowed = match self.variant {
            VariantKind::MinSum | VariantKind::MinMax => "",
            VariantKind::PNorm => "--p",
            VariantKind::EpsFair => "--eps",
            VariantKind::DeltaFair => "--delta",
        };
        for (flag, set) in given {
            if set && flag != allowed {
                bail!("{flag} does not apply to this variant");
            }
        }
        let missing = || anyhow!("{allowed} is required for this variant");
        let v = match self.variant {
            VariantKind::MinSum => Variant::MinSum,
            VariantKind::MinMax => Variant::MinMax,
            VariantKind::PNorm => Variant::PNorm(self.p.ok_or_else(missing)?),
            VariantKind::EpsFair => Variant::EpsFair(self.eps.ok_or_else(missing)?),
            VariantKind::DeltaFair => Variant::DeltaFair(self.delta.ok_or_else(missing)?),
        };
        v.validate()?;
        Ok(v)
    }
}

impl OutputArgs {
    fn emit(&self, text: String) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn min_sum_baseline(inst: &Instance, m: usize, params: &SolveParams) -> Result<Option<f64>> {
    let out = solve(inst, &ModelSpec::new(Variant::MinSum, m), params)?;
    Ok((out.stats.termination == Termination::Optimal)
        .then(|| out.solution.map(|s| s.objective))
        .flatten())
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let variant = args.variant.resolve()?;
    let inst = args.instance.load()?;
    let params = args.instance.params()?;
    let spec = ModelSpec::new(variant, args.instance.salesmen);
    let out = solve(&inst, &spec, &params)?;
    let baseline = match (variant, &out.solution) {
        (_, None) => None,
        (Variant::MinSum, Some(s)) if out.stats.termination == Termination::Optimal => Some(s.objective),
        _ => min_sum_baseline(&inst, spec.m, &params)?,
    };
    let rep = RunReport::new(inst.name(), &spec, args.instance.run_params(&inst), &out, baseline);
    let text = match args.output.output {
        Format::Json => json(&rep),
        Format::Csv => format!("{}\n{}\n", RunReport::csv_header(), rep.csv_row()),
        Format::Text => rep.text(),
    };
    args.output.emit(text)?;
    Ok(exit_code(out.stats.termination))
}

fn grid(args: &ParetoArgs) -> Result<Vec<f64>> {
    if let Some(g) = &args.grid {
        return Ok(g.clone());
    }
    let (a, b, step) = (args.grid_start, args.grid_end, args.grid_step);
    if !(step > 0.0) || !(a <= b) {
        bail!("grid needs --grid-start <= --grid-end and a positive --grid-step");
    }
    let k = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=k).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn cmd_pareto(args: &ParetoArgs) -> Result<u8> {
    let grid = grid(args)?;
    let family = match args.family {
        FamilyArg::Eps => Family::EpsFair,
        FamilyArg::Delta => Family::DeltaFair,
    };
    for &g in &grid {
        family.variant(g).validate()?;
    }
    let inst = args.instance.load()?;
    let params = args.instance.params()?;
    let mut points = pareto::sweep(&inst, args.instance.salesmen, family, &grid, &params)?;
    if args.nondominated {
        points = pareto::nondominated_filter(&points, family);
    }
    let timed_out = points.iter().any(|p| p.status == Termination::TimeLimit);
    let rep = SweepReport {
        schema_version: report::SCHEMA_VERSION,
        instance: inst.name().to_string(),
        family: match family {
            Family::EpsFair => "eps".into(),
            Family::DeltaFair => "delta".into(),
        },
        salesmen: args.instance.salesmen,
        rows: points
            .iter()
            .map(|p| SweepRow {
                param: p.param,
                total: p.total.map(r6),
                fairness: p.fairness.map(r6),
                cof: p.cof.map(r6),
                status: status_name(p.status).to_string(),
                seconds: r2(p.stats.seconds),
            })
            .collect(),
    };
    let text = match args.output.output {
        Format::Json => json(&rep),
        Format::Csv => rep.csv(),
        Format::Text => rep.text(),
    };
    args.output.emit(text)?;
    Ok(if timed_out { EXIT_TIME_LIMIT } else { 0 })
}

fn compare_row(variant: Variant, out: &SolveOutcome) -> CompareRow {
    let lengths = out.solution.as_ref().map(|s| s.lengths.clone()).unwrap_or_default();
    let has = !lengths.is_empty();
    CompareRow {
        variant,
        status: status_name(out.stats.termination).to_string(),
        total: has.then(|| r6(lengths.iter().sum())),
        longest: has.then(|| r6(lengths.iter().copied().fold(0.0, f64::max))),
        gini: metrics::gini(&lengths).ok().map(r6),
        epsfi: metrics::eps_fair_index(&lengths).ok().map(r6),
        lengths: lengths.into_iter().map(r6).collect(),
        seconds: r2(out.stats.seconds),
    }
}

fn cmd_compare_minmax(args: &CompareArgs) -> Result<u8> {
    let inst = args.instance.load()?;
    let params = args.instance.params()?;
    let m = args.instance.salesmen;
    let mm = solve(&inst, &ModelSpec::new(Variant::MinMax, m), &params)?;
    let mut rows = vec![compare_row(Variant::MinMax, &mm)];
    let mut code = exit_code(mm.stats.termination);
    if let Some(s) = &mm.solution {
        let eps = metrics::eps_fair_index(&s.lengths).unwrap_or(1.0).clamp(0.0, 1.0);
        let delta = metrics::gini(&s.lengths).unwrap_or(0.0).clamp(0.0, 1.0);
        for v in [Variant::EpsFair(eps), Variant::DeltaFair(delta)] {
            let out = solve(&inst, &ModelSpec::new(v, m), &params)?;
            code = code.max(exit_code(out.stats.termination));
            rows.push(compare_row(v, &out));
        }
    }
    let rep = CompareReport {
        schema_version: report::SCHEMA_VERSION,
        instance: inst.name().to_string(),
        salesmen: m,
        rows,
    };
    let text = match args.output.output {
        Format::Json => json(&rep),
        Format::Csv => rep.csv(),
        Format::Text => rep.text(),
    };
    args.output.emit(text)?;
    Ok(code)
}

fn cmd_oracle(args: &OracleArgs) -> Result<u8> {
    let variant = args.variant.resolve()?;
    let inst = args.instance.load()?;
    let spec = ModelSpec::new(variant, args.instance.salesmen);
    let exact = oracle::brute_force(&inst, &spec)?;
    let params = SolveParams {
        rel_gap: 1e-9,
        abs_gap: 1e-7,
        ..args.instance.params()?
    };
    let out = solve(&inst, &spec, &params)?;
    let show = |x: Option<f64>| x.map_or("infeasible".to_string(), |v| format!("{v:.6}"));
    let solver = out.solution.as_ref().map(|s| s.objective);
    let agree = match (exact.as_ref().map(|e| e.objective), solver) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
        (None, None) => out.stats.termination == Termination::Infeasible,
        _ => false,
    };
    println!("oracle  {}", show(exact.map(|e| e.objective)));
    println!("solver  {} ({})", show(solver), status_name(out.stats.termination));
    println!("match   {}", if agree { "yes" } else { "no" });
    Ok(if agree { 0 } else { EXIT_MISMATCH })
}

fn cmd_metrics(args: &MetricsArgs) -> Result<u8> {
    if args.lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        bail!("lengths must be finite and nonnegative");
    }
    let m = Metrics::of(&args.lengths, args.min_sum_total);
    let text = match args.output {
        Format::Json => json(&m),
        Format::Csv => format!(
            "gini,jain,epsfi,cof\n{},{},{},{}\n",
            report::cell(m.gini),
            report::cell(m.jain),
            report::cell(m.epsfi),
            report::cell(m.cof)
        ),
        Format::Text => format!(
            "gini  {}\njain  {}\nepsfi {}\ncof   {}\n",
            report::cell(m.gini),
            report::cell(m.jain),
            report::cell(m.epsfi),
            report::cell(m.cof)
        ),
    };
    print!("{text}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Pareto(a) => cmd_pareto(a),
        Command::CompareMinmax(a) => cmd_compare_minmax(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Metrics(a) => cmd_metrics(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
