//! Command-line front end. Every subcommand writes its artifacts into the
//! output directory only after the whole run succeeded.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 day-ahead
//! non-convergence, 4 equivalence verification failure, 5 runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{load_scenario_with, ConfigError, MarketOverrides};
use crate::equivalence::{
    brute_force_oracle, transform_schedule, EquivalenceError, EquivalenceReport, PeriodEquivalence,
    ORACLE_MAX_PERIODS,
};
use crate::hub::{build_autonomous_lp, evaluate_cost, solve_autonomous, HubState};
use crate::market::{DayAheadResult, MarketError, MarketParams, Settlement};
use crate::oracle::{build_centralized, clairvoyant, dual_prices, rolling, OracleError};
use crate::output::{self, Artifacts};
use crate::scenario::{run_day, run_day_ahead, DayResult, Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

/// Absolute objective tolerance of the equivalence certificate.
const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ieh", version, about = "Transactive coordination of interconnected energy hubs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Forecast error seed, overriding the scenario file.
    #[arg(long, global = true, env = "IEH_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "IEH_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Aggregate imbalance tolerance, kW.
    #[arg(long, global = true, env = "IEH_TOL_BALANCE")]
    pub tol_balance: Option<f64>,
    /// Real-time price bracket tolerance, currency/kWh.
    #[arg(long, global = true, env = "IEH_TOL_PRICE")]
    pub tol_price: Option<f64>,
    /// Day-ahead round limit.
    #[arg(long, global = true, env = "IEH_MAX_ITERS")]
    pub max_iters: Option<usize>,
    /// Also run the centralized rolling benchmark and report the cost gap.
    #[arg(long, global = true, env = "IEH_COMPARE")]
    pub compare: bool,
    /// Replicate the fleet to this many hubs, scaling the transformer.
    #[arg(long, global = true, env = "IEH_HUBS")]
    pub hubs: Option<usize>,
    /// Write each hub's initial linear program under `lp/`.
    #[arg(long, global = true, env = "IEH_DUMP_LP")]
    pub dump_lp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterative day-ahead price forecast.
    DayAhead { scenario: PathBuf },
    /// Day-ahead forecast followed by one real-time clearing per period.
    RealTime { scenario: PathBuf },
    /// Full day with every artifact and a summary.
    SimulateDay { scenario: PathBuf },
    /// Centralized benchmark over the whole fleet.
    Centralized {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Rolling)]
        mode: Mode,
    },
    /// Certifies the storage relaxation against exhaustive mode enumeration.
    VerifyEquivalence { scenario: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rolling,
    Clairvoyant,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NON_CONVERGENCE,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid(m) => CliError::Usage(m),
            ScenarioError::DayAhead(MarketError::NonConvergence { .. }) => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Invalid(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("writing artifacts: {e}"))
    }
}

/// Parses `args` (program name first) and runs, returning the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, recorded) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, args: Vec<String>) -> Result<(), CliError> {
    match &cli.command {
        Command::DayAhead { scenario } => cmd_day_ahead(cli, scenario, args),
        Command::RealTime { scenario } => cmd_real_time(cli, scenario, args),
        Command::SimulateDay { scenario } => cmd_simulate_day(cli, scenario, args),
        Command::Centralized { scenario, mode } => cmd_centralized(cli, scenario, *mode, args),
        Command::VerifyEquivalence { scenario } => cmd_verify(cli, scenario, args),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::DayAhead { .. } => "day-ahead",
        Command::RealTime { .. } => "real-time",
        Command::SimulateDay { .. } => "simulate-day",
        Command::Centralized { .. } => "centralized",
        Command::VerifyEquivalence { .. } => "verify-equivalence",
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, CliError> {
    let overrides = MarketOverrides {
        balance_tol: cli.tol_balance,
        price_tol: cli.tol_price,
        max_iters: cli.max_iters,
        ..Default::default()
    };
    let mut s = load_scenario_with(path, cli.seed, &overrides)?;
    if let Some(n) = cli.hubs {
        if n == 0 {
            return Err(CliError::Usage("--hubs must be positive".into()));
        }
        s = s.replicate(n);
        if let Some(tol) = cli.tol_balance {
            s.market.balance_tol = tol;
        }
        s.validate()?;
    }
    Ok(s)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    schema_version: u32,
    subcommand: &'static str,
    args: &'a [String],
    scenario: String,
    scenario_name: &'a str,
    hubs: usize,
    periods: usize,
    seed: u64,
    market: &'a MarketParams,
    compare: bool,
    mode: Option<Mode>,
    status: &'a str,
    out: String,
    files: Vec<String>,
}

fn finish(
    cli: &Cli,
    path: &Path,
    s: &Scenario,
    args: &[String],
    status: &str,
    mut artifacts: Artifacts,
) -> Result<(), CliError> {
    if cli.dump_lp {
        dump_lps(s, &mut artifacts)?;
    }
    let mut files: Vec<String> = artifacts.names().iter().map(|n| n.to_string()).collect();
    files.push("manifest.json".into());
    files.sort();
    let mode = match &cli.command {
        Command::Centralized { mode, .. } => Some(*mode),
        _ => None,
    };
    let manifest = Manifest {
        tool: "ieh",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: output::SCHEMA_VERSION,
        subcommand: subcommand_name(&cli.command),
        args,
        scenario: path.display().to_string(),
        scenario_name: &s.name,
        hubs: s.fleet.len(),
        periods: s.periods(),
        seed: s.forecast.seed,
        market: &s.market,
        compare: cli.compare,
        mode,
        status,
        out: cli.out.display().to_string(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    artifacts.add("manifest.json", (text + "\n").into_bytes());
    artifacts.commit(&cli.out)?;
    Ok(())
}

fn dump_lps(s: &Scenario, artifacts: &mut Artifacts) -> Result<(), CliError> {
    let runtime = |e: String| CliError::Runtime(e);
    for (cfg, exo) in s.fleet.iter().zip(&s.truth) {
        let (lp, _) = build_autonomous_lp(cfg, exo, &exo.mu_e, 0, &HubState::initial(cfg))
            .map_err(|e| runtime(e.to_string()))?;
        let mut text = Vec::new();
        lp.write_text(&mut text)?;
        artifacts.add(&format!("lp/{}.txt", cfg.id), text);
    }
    let states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    let (lp, _, _) = build_centralized(&s.fleet, &s.truth, &s.transformer, 0, &states)?;
    let mut text = Vec::new();
    lp.write_text(&mut text)?;
    artifacts.add("lp/centralized.txt", text);
    Ok(())
}

fn add_day_ahead(a: &mut Artifacts, da: &DayAheadResult) -> Result<(), CliError> {
    let mut rows = output::trace_price_rows(&da.trace);
    rows.extend(output::final_price_rows(
        "forecast",
        da.iterations,
        0,
        &da.prices.values,
        &da.residual,
    ));
    a.add_csv("prices.csv", &output::price_header(), &rows)?;
    Ok(())
}

fn cmd_day_ahead(cli: &Cli, path: &Path, args: Vec<String>) -> Result<(), CliError> {
    let s = load(cli, path)?;
    let mut a = Artifacts::new();
    match run_day_ahead(&s) {
        Ok(da) => {
            add_day_ahead(&mut a, &da)?;
            a.add_csv(
                "schedules.csv",
                &output::plan_header(),
                &output::schedule_rows(&hub_ids(&s), &da.schedules),
            )?;
            a.add_csv(
                "transformer.csv",
                &output::transformer_header(),
                &output::transformer_rows(0, s.mu_e(), &da.prices.values, &da.transformer, &s.transformer),
            )?;
            println!(
                "day-ahead converged after {} rounds, final step {:.6}",
                da.iterations, da.final_step
            );
            finish(cli, path, &s, &args, "converged", a)
        }
        Err(e) => non_convergence(cli, path, &s, &args, e),
    }
}

/// On day-ahead non-convergence the price trace is still written so the
/// oscillation can be inspected.
fn non_convergence(cli: &Cli, path: &Path, s: &Scenario, args: &[String], e: ScenarioError) -> Result<(), CliError> {
    if let ScenarioError::DayAhead(MarketError::NonConvergence { trace, .. }) = &e {
        let mut a = Artifacts::new();
        a.add_csv("prices.csv", &output::price_header(), &output::trace_price_rows(trace))?;
        finish(cli, path, s, args, "non-convergence", a)?;
    }
    Err(e.into())
}

fn hub_ids(s: &Scenario) -> Vec<String> {
    s.fleet.iter().map(|c| c.id.clone()).collect()
}

fn local_prices(day: &DayResult) -> Vec<f64> {
    let periods = day.mu_e.len();
    (0..periods)
        .map(|t| day.committed.first().map_or(day.mu_e[t], |h| h[t].local_price))
        .collect()
}

fn add_day_tables(a: &mut Artifacts, s: &Scenario, day: &DayResult) -> Result<(), CliError> {
    a.add_csv(
        "day_result.csv",
        &output::day_header(),
        &output::day_rows(&day.hub_ids, &day.committed, &day.mu_e),
    )?;
    a.add_csv(
        "transformer.csv",
        &output::transformer_header(),
        &output::transformer_rows(0, &day.mu_e, &local_prices(day), &day.transformer, &s.transformer),
    )?;
    Ok(())
}

fn add_equivalence(a: &mut Artifacts, ids: &[String], reports: &[Vec<PeriodEquivalence>]) -> Result<(), CliError> {
    a.add_csv(
        "equivalence.csv",
        &output::equivalence_header(),
        &output::equivalence_rows(ids, reports),
    )?;
    Ok(())
}

fn day_equivalence(day: &DayResult) -> Vec<Vec<PeriodEquivalence>> {
    day.committed
        .iter()
        .map(|h| h.iter().map(|c| c.equivalence.clone()).collect())
        .collect()
}

fn cmd_real_time(cli: &Cli, path: &Path, args: Vec<String>) -> Result<(), CliError> {
    let s = load(cli, path)?;
    let day = match run_day(&s) {
        Ok(day) => day,
        Err(e @ ScenarioError::DayAhead(MarketError::NonConvergence { .. })) => {
            return non_convergence(cli, path, &s, &args, e)
        }
        Err(e) => return Err(e.into()),
    };
    let mut a = Artifacts::new();
    a.add_csv(
        "clearing.csv",
        &output::clearing_header(),
        &output::clearing_rows(&day.records, &day.mu_e),
    )?;
    add_day_tables(&mut a, &s, &day)?;
    for r in &day.records {
        println!(
            "period {:>2}: price {:.4}, transformer {:>9.2} kW, {} iterations, {:?}",
            r.period, r.price, r.transformer, r.iterations, r.settlement
        );
    }
    finish(cli, path, &s, &args, "completed", a)
}

fn cmd_simulate_day(cli: &Cli, path: &Path, args: Vec<String>) -> Result<(), CliError> {
    let s = load(cli, path)?;
    let day = match run_day(&s) {
        Ok(day) => day,
        Err(e @ ScenarioError::DayAhead(MarketError::NonConvergence { .. })) => {
            return non_convergence(cli, path, &s, &args, e)
        }
        Err(e) => return Err(e.into()),
    };
    let benchmark = if cli.compare { Some(rolling(&s)?) } else { None };
    let mut a = Artifacts::new();
    add_day_tables(&mut a, &s, &day)?;
    a.add_csv(
        "clearing.csv",
        &output::clearing_header(),
        &output::clearing_rows(&day.records, &day.mu_e),
    )?;
    if let Some(da) = &day.day_ahead {
        add_day_ahead(&mut a, da)?;
    }
    add_equivalence(&mut a, &day.hub_ids, &day_equivalence(&day))?;
    let committed: Vec<_> = (0..s.fleet.len()).map(|n| day.committed_schedule(n)).collect();
    a.add_csv(
        "hub_power.csv",
        &output::hub_power_header(),
        &output::hub_power_rows(&s.fleet, &s.truth, &committed),
    )?;
    let summary = summary_text(&s, &day, benchmark.as_ref());
    print!("{summary}");
    a.add("summary.txt", summary.into_bytes());
    finish(cli, path, &s, &args, "completed", a)
}

/// Plain-text report of one simulated day.
pub fn summary_text(s: &Scenario, day: &DayResult, benchmark: Option<&DayResult>) -> String {
    let mut out = String::new();
    let total = day.total_cost();
    let local: f64 = day.hub_costs().iter().map(|(_, l)| l).sum();
    let (ok, hub_periods) = day.condition_satisfied_count();
    let _ = writeln!(out, "scenario                {}", s.name);
    let _ = writeln!(out, "hubs                    {}", s.fleet.len());
    let _ = writeln!(out, "periods                 {}", s.periods());
    let _ = writeln!(out, "forecast seed           {}", s.forecast.seed);
    let _ = writeln!(out, "total cost (utility)    {total:.3}");
    let _ = writeln!(out, "total cost (local)      {local:.3}");
    if let Some(da) = &day.day_ahead {
        let _ = writeln!(out, "day-ahead rounds        {}", da.iterations);
        let _ = writeln!(out, "day-ahead final step    {:.6}", da.final_step);
    }
    if !day.records.is_empty() {
        let iters: Vec<usize> = day.records.iter().map(|r| r.iterations).collect();
        let min = iters.iter().min().copied().unwrap_or(0);
        let max = iters.iter().max().copied().unwrap_or(0);
        let mean = iters.iter().sum::<usize>() as f64 / iters.len() as f64;
        let _ = writeln!(out, "real-time iterations    min {min} max {max} mean {mean:.2}");
        for kind in [
            Settlement::UtilityPrice,
            Settlement::Congested,
            Settlement::Flat,
            Settlement::CeilingBound,
            Settlement::FloorBound,
        ] {
            let n = day.records.iter().filter(|r| r.settlement == kind).count();
            if n > 0 {
                let _ = writeln!(out, "settlement {:<12} {n}", format!("{kind:?}"));
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "EH number  RT iterations");
        let _ = writeln!(out, "{:<10} {}", s.fleet.len(), if min == max { min.to_string() } else { format!("{min}-{max}") });
        let _ = writeln!(out);
    }
    let over = day
        .transformer
        .iter()
        .filter(|&&p| p > s.transformer.p_in_max + s.market.balance_tol || p < -s.transformer.p_out_max - s.market.balance_tol)
        .count();
    let _ = writeln!(out, "transformer violations  {over}");
    let _ = writeln!(out, "exactness condition     {ok}/{hub_periods} hub-periods satisfied");
    let unserved: f64 = day
        .committed
        .iter()
        .flatten()
        .map(|c| c.reconciliation.unserved_e + c.reconciliation.unserved_th)
        .sum();
    let _ = writeln!(out, "unserved energy         {unserved:.3} kWh");
    if let Some(b) = benchmark {
        let base = b.total_cost();
        let _ = writeln!(out, "centralized cost        {base:.3}");
        let _ = writeln!(out, "gap vs centralized      {:.4} %", 100.0 * (total - base) / base.abs());
    }
    out
}

fn cmd_centralized(cli: &Cli, path: &Path, mode: Mode, args: Vec<String>) -> Result<(), CliError> {
    let s = load(cli, path)?;
    let ids = hub_ids(&s);
    let mut a = Artifacts::new();
    let mut summary = String::new();
    match mode {
        Mode::Rolling => {
            let day = rolling(&s)?;
            add_day_tables(&mut a, &s, &day)?;
            add_equivalence(&mut a, &ids, &day_equivalence(&day))?;
            let prices = local_prices(&day);
            a.add_csv(
                "prices.csv",
                &output::price_header(),
                &output::final_price_rows("dual", 0, 0, &prices, &[]),
            )?;
            let _ = writeln!(summary, "scenario                {}", s.name);
            let _ = writeln!(summary, "mode                    rolling");
            let _ = writeln!(summary, "total cost (utility)    {:.3}", day.total_cost());
        }
        Mode::Clairvoyant => {
            let res = clairvoyant(&s)?;
            let duals = dual_prices(&res, s.mu_e(), &s.transformer);
            let reports: Vec<Vec<PeriodEquivalence>> = res.equivalence.iter().map(|r| r.periods.clone()).collect();
            a.add_csv(
                "day_result.csv",
                &output::day_header(),
                &output::plan_day_rows(&ids, &res.schedules, &reports, &s.truth, &duals.local),
            )?;
            a.add_csv(
                "transformer.csv",
                &output::transformer_header(),
                &output::transformer_rows(0, s.mu_e(), &duals.local, &res.transformer, &s.transformer),
            )?;
            add_equivalence(&mut a, &ids, &reports)?;
            a.add_csv(
                "prices.csv",
                &output::price_header(),
                &output::final_price_rows("dual", 0, 0, &duals.local, &[]),
            )?;
            let degenerate: Vec<String> = duals
                .degenerate
                .iter()
                .enumerate()
                .filter(|(_, d)| **d)
                .map(|(t, _)| t.to_string())
                .collect();
            let _ = writeln!(summary, "scenario                {}", s.name);
            let _ = writeln!(summary, "mode                    clairvoyant");
            let _ = writeln!(summary, "objective               {:.3}", res.objective);
            let _ = writeln!(summary, "simplex iterations      {}", res.iterations);
            let _ = writeln!(summary, "degenerate duals        {}", if degenerate.is_empty() { "none".into() } else { degenerate.join(" ") });
        }
    }
    print!("{summary}");
    a.add("summary.txt", summary.into_bytes());
    finish(cli, path, &s, &args, "completed", a)
}

#[derive(Serialize)]
struct VerificationRow {
    hub: String,
    relaxed: f64,
    transformed: f64,
    oracle: f64,
    patterns: usize,
    condition_satisfied: bool,
    certified: bool,
}

fn condition_label(p: &PeriodEquivalence) -> &'static str {
    if !p.condition_satisfied {
        "VIOLATED"
    } else if p.condition_lhs.is_infinite() || p.condition_rhs <= 0.0 {
        "vacuous"
    } else {
        "holds"
    }
}

fn cmd_verify(cli: &Cli, path: &Path, args: Vec<String>) -> Result<(), CliError> {
    let s = load(cli, path)?;
    let periods = s.periods();
    if periods > ORACLE_MAX_PERIODS {
        return Err(CliError::Usage(format!(
            "verify-equivalence enumerates every storage mode pattern and accepts at most {ORACLE_MAX_PERIODS} periods, \
             but {} has {periods}; cut the series to a shorter window",
            path.display()
        )));
    }
    let runtime = |e: String| CliError::Runtime(e);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut table = String::new();
    for (cfg, exo) in s.fleet.iter().zip(&s.truth) {
        let state = HubState::initial(cfg);
        let (relaxed, relaxed_obj) =
            solve_autonomous(cfg, exo, &exo.mu_e, 0, &state).map_err(|e| runtime(e.to_string()))?;
        let (transformed, report) = match transform_schedule(&relaxed, cfg, exo) {
            Ok((t, r)) => (Some(t), r),
            Err(EquivalenceError::TransformInfeasible { report, .. }) => (None, *report),
            Err(e) => return Err(runtime(e.to_string())),
        };
        let transformed_obj = match &transformed {
            Some(t) => evaluate_cost(t, exo, &exo.mu_e).map_err(|e| runtime(e.to_string()))?.total,
            None => f64::NAN,
        };
        let oracle = brute_force_oracle(cfg, exo, &exo.mu_e, 0, &state).map_err(|e| runtime(e.to_string()))?;
        let satisfied = report.all_satisfied();
        let certified = satisfied && (transformed_obj - oracle.objective).abs() <= CERTIFY_TOL;
        write_table(&mut table, &cfg.id, &report, relaxed_obj, transformed_obj, oracle.objective, certified);
        rows.push(VerificationRow {
            hub: cfg.id.clone(),
            relaxed: relaxed_obj,
            transformed: transformed_obj,
            oracle: oracle.objective,
            patterns: oracle.patterns_solved,
            condition_satisfied: satisfied,
            certified,
        });
        reports.push(report.periods);
    }
    print!("{table}");
    let mut a = Artifacts::new();
    add_equivalence(&mut a, &hub_ids(&s), &reports)?;
    let header = output::fields(&VerificationRow {
        hub: String::new(),
        relaxed: 0.0,
        transformed: 0.0,
        oracle: 0.0,
        patterns: 0,
        condition_satisfied: false,
        certified: false,
    });
    a.add_csv("verification.csv", &header, &rows)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.certified).map(|r| r.hub.as_str()).collect();
    let status = if failed.is_empty() { "certified" } else { "failed" };
    finish(cli, path, &s, &args, status, a)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("equivalence not certified for {}", failed.join(", "))))
    }
}

fn write_table(
    out: &mut String,
    hub: &str,
    report: &EquivalenceReport,
    relaxed: f64,
    transformed: f64,
    oracle: f64,
    certified: bool,
) {
    let _ = writeln!(
        out,
        "{hub}: relaxed {relaxed:.6}  transformed {transformed:.6}  oracle {oracle:.6}  {}",
        if certified { "certified" } else { "NOT CERTIFIED" }
    );
    let _ = writeln!(
        out,
        "  {:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}  condition",
        "period", "delta_s", "p_ch", "p_dch", "p_ch_excl", "p_dch_excl", "lhs", "rhs"
    );
    for p in &report.periods {
        let _ = writeln!(
            out,
            "  {:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}  {}",
            p.period,
            p.ees_delta_s,
            p.p_ch_relaxed,
            p.p_dch_relaxed,
            p.p_ch,
            p.p_dch,
            p.condition_lhs,
            p.condition_rhs,
            condition_label(p)
        );
    }
}
