//! CSV and text artifacts, written all-or-nothing into an output directory.
//!
//! Column schemas (version 1):
//!
//! - `day_result.csv`: `hub,period,mu_e,local_price,p_e,g_chp,g_gf,p_ch,p_dch,h_ch,h_dch,
//!   p_curt,h_curt,l_e_sl,l_th_sl,soc_ees,soc_tes,cost_utility,cost_local,unserved_e,
//!   spilled_e,unserved_th,condition_satisfied`
//! - `clearing.csv`: `period,mu_e,price,transformer,residual,iterations,evaluations,
//!   converged,settlement,bracket_lo,bracket_hi`
//! - `prices.csv`: `kind,iteration,period,price,residual`; `kind` is `trace` for one
//!   day-ahead round, `forecast` for the final forecast prices, `dual` for prices
//!   implied by the centralized balance multipliers
//! - `equivalence.csv`: `hub` followed by the per-period equivalence audit fields
//! - `schedules.csv`: `hub,period` followed by the plan fields of `day_result.csv`
//! - `transformer.csv`: `period,mu_e,price,transformer,p_in_max,p_out_max`
//! - `hub_power.csv`: `hub,period,p_e,chp_e,p_res,p_curt,p_ch,p_dch,l_e,l_e_sl`

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::equivalence::PeriodEquivalence;
use crate::hub::{ExogenousSeries, HubConfig, PeriodAction, Schedule};
use crate::market::{ClearingRecord, DaIteration, TransformerConfig};
use crate::scenario::CommittedPeriod;

pub const SCHEMA_VERSION: u32 = 1;

/// Named files held in memory until [`Artifacts::commit`].
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), bytes));
    }

    /// CSV with an explicit header; rows may nest flat structs.
    pub fn add_csv<T: Serialize>(&mut self, name: &str, header: &[String], rows: &[T]) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.serialize(row).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into a scratch directory inside `dir`, then renames
    /// them into place. Nothing lands in `dir` if any write fails.
    pub fn commit(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let scratch = tempfile::Builder::new().prefix(".partial-").tempdir_in(dir)?;
        for (name, bytes) in &self.files {
            let path = scratch.path().join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, bytes)?;
        }
        for (name, _) in &self.files {
            let target = dir.join(name);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(scratch.path().join(name), target)?;
        }
        Ok(())
    }
}

/// Field names of a flat serializable struct.
pub fn fields<T: Serialize>(sample: &T) -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(sample).expect("flat struct");
    let bytes = w.into_inner().expect("in-memory writer");
    let text = String::from_utf8(bytes).expect("utf-8 header");
    text.lines().next().unwrap_or("").split(',').map(str::to_string).collect()
}

fn join(head: &[&str], nested: Vec<String>, tail: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    out.extend(nested);
    out.extend(tail.iter().map(|s| s.to_string()));
    out
}

pub fn plan_header() -> Vec<String> {
    join(&["hub", "period"], fields(&PeriodAction::default()), &[])
}

pub fn day_header() -> Vec<String> {
    join(
        &["hub", "period", "mu_e", "local_price"],
        fields(&PeriodAction::default()),
        &[
            "cost_utility",
            "cost_local",
            "unserved_e",
            "spilled_e",
            "unserved_th",
            "condition_satisfied",
        ],
    )
}

#[derive(Serialize)]
struct PlanRow<'a> {
    hub: &'a str,
    period: usize,
    action: PeriodAction,
}

#[derive(Serialize)]
pub struct DayRow<'a> {
    hub: &'a str,
    period: usize,
    mu_e: f64,
    local_price: f64,
    action: PeriodAction,
    cost_utility: f64,
    cost_local: f64,
    unserved_e: f64,
    spilled_e: f64,
    unserved_th: f64,
    condition_satisfied: bool,
}

pub fn day_rows<'a>(hub_ids: &'a [String], committed: &[Vec<CommittedPeriod>], mu_e: &[f64]) -> Vec<DayRow<'a>> {
    let mut rows = Vec::new();
    for (id, periods) in hub_ids.iter().zip(committed) {
        for (t, c) in periods.iter().enumerate() {
            rows.push(DayRow {
                hub: id,
                period: t,
                mu_e: mu_e[t],
                local_price: c.local_price,
                action: c.action,
                cost_utility: c.cost_utility,
                cost_local: c.cost_local,
                unserved_e: c.reconciliation.unserved_e,
                spilled_e: c.reconciliation.spilled_e,
                unserved_th: c.reconciliation.unserved_th,
                condition_satisfied: c.equivalence.condition_satisfied,
            });
        }
    }
    rows
}

/// Rows for plans that were never committed, such as a single centralized
/// solve. Costs are the plan's costs at the given prices.
pub fn plan_day_rows<'a>(
    hub_ids: &'a [String],
    schedules: &[Schedule],
    equivalence: &[Vec<PeriodEquivalence>],
    exo: &[ExogenousSeries],
    local_prices: &[f64],
) -> Vec<DayRow<'a>> {
    let mut rows = Vec::new();
    for (n, (id, sched)) in hub_ids.iter().zip(schedules).enumerate() {
        let e = &exo[n];
        for (k, a) in sched.periods.iter().enumerate() {
            let t = sched.start + k;
            let cost = |price: f64| (price * a.p_e + e.mu_g[t] * a.gas()) * e.dt;
            rows.push(DayRow {
                hub: id,
                period: t,
                mu_e: e.mu_e[t],
                local_price: local_prices[k],
                action: *a,
                cost_utility: cost(e.mu_e[t]),
                cost_local: cost(local_prices[k]),
                unserved_e: 0.0,
                spilled_e: 0.0,
                unserved_th: 0.0,
                condition_satisfied: equivalence[n].get(k).is_none_or(|p| p.condition_satisfied),
            });
        }
    }
    rows
}

pub fn schedule_rows<'a>(hub_ids: &'a [String], schedules: &[Schedule]) -> Vec<impl Serialize + 'a> {
    let mut rows = Vec::new();
    for (id, sched) in hub_ids.iter().zip(schedules) {
        for (k, a) in sched.periods.iter().enumerate() {
            rows.push(PlanRow {
                hub: id,
                period: sched.start + k,
                action: *a,
            });
        }
    }
    rows
}

pub fn clearing_header() -> Vec<String> {
    fields(&ClearingRow::default())
}

#[derive(Default, Serialize)]
struct ClearingRow {
    period: usize,
    mu_e: f64,
    price: f64,
    transformer: f64,
    residual: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    settlement: String,
    bracket_lo: f64,
    bracket_hi: f64,
}

pub fn clearing_rows(records: &[ClearingRecord], mu_e: &[f64]) -> Vec<impl Serialize> {
    records
        .iter()
        .map(|r| ClearingRow {
            period: r.period,
            mu_e: mu_e[r.period],
            price: r.price,
            transformer: r.transformer,
            residual: r.residual,
            iterations: r.iterations,
            evaluations: r.evaluations,
            converged: r.converged,
            settlement: format!("{:?}", r.settlement),
            bracket_lo: r.bracket.0,
            bracket_hi: r.bracket.1,
        })
        .collect()
}

pub fn price_header() -> Vec<String> {
    fields(&PriceRow::default())
}

#[derive(Default, Serialize)]
pub struct PriceRow {
    kind: &'static str,
    iteration: usize,
    period: usize,
    price: f64,
    residual: f64,
}

pub fn trace_price_rows(trace: &[DaIteration]) -> Vec<PriceRow> {
    let mut rows = Vec::new();
    for it in trace {
        for (t, (&price, &residual)) in it.prices.iter().zip(&it.residual).enumerate() {
            rows.push(PriceRow {
                kind: "trace",
                iteration: it.iteration,
                period: t,
                price,
                residual,
            });
        }
    }
    rows
}

/// Final prices of one kind, one row per period starting at `start`.
pub fn final_price_rows(
    kind: &'static str,
    iteration: usize,
    start: usize,
    prices: &[f64],
    residual: &[f64],
) -> Vec<PriceRow> {
    prices
        .iter()
        .enumerate()
        .map(|(k, &price)| PriceRow {
            kind,
            iteration,
            period: start + k,
            price,
            residual: residual.get(k).copied().unwrap_or(0.0),
        })
        .collect()
}

pub fn equivalence_header() -> Vec<String> {
    join(&["hub"], fields(&PeriodEquivalence::default()), &[])
}

#[derive(Serialize)]
struct EquivalenceRow<'a> {
    hub: &'a str,
    period: &'a PeriodEquivalence,
}

pub fn equivalence_rows<'a>(hub_ids: &'a [String], reports: &'a [Vec<PeriodEquivalence>]) -> Vec<impl Serialize + 'a> {
    let mut rows = Vec::new();
    for (id, periods) in hub_ids.iter().zip(reports) {
        for p in periods {
            rows.push(EquivalenceRow { hub: id, period: p });
        }
    }
    rows
}

pub fn transformer_header() -> Vec<String> {
    fields(&TransformerRow::default())
}

#[derive(Default, Serialize)]
struct TransformerRow {
    period: usize,
    mu_e: f64,
    price: f64,
    transformer: f64,
    p_in_max: f64,
    p_out_max: f64,
}

pub fn transformer_rows(
    start: usize,
    mu_e: &[f64],
    prices: &[f64],
    power: &[f64],
    tr: &TransformerConfig,
) -> Vec<impl Serialize> {
    power
        .iter()
        .enumerate()
        .map(|(k, &p)| TransformerRow {
            period: start + k,
            mu_e: mu_e[start + k],
            price: prices[k],
            transformer: p,
            p_in_max: tr.p_in_max,
            p_out_max: tr.p_out_max,
        })
        .collect()
}

pub fn hub_power_header() -> Vec<String> {
    fields(&HubPowerRow::default())
}

#[derive(Default, Serialize)]
struct HubPowerRow<'a> {
    hub: &'a str,
    period: usize,
    p_e: f64,
    chp_e: f64,
    p_res: f64,
    p_curt: f64,
    p_ch: f64,
    p_dch: f64,
    l_e: f64,
    l_e_sl: f64,
}

pub fn hub_power_rows<'a>(
    fleet: &'a [HubConfig],
    truth: &[ExogenousSeries],
    schedules: &[Schedule],
) -> Vec<impl Serialize + 'a> {
    let mut rows = Vec::new();
    for ((cfg, exo), sched) in fleet.iter().zip(truth).zip(schedules) {
        for (k, a) in sched.periods.iter().enumerate() {
            let t = sched.start + k;
            rows.push(HubPowerRow {
                hub: &cfg.id,
                period: t,
                p_e: a.p_e,
                chp_e: cfg.eta_ge_chp * a.g_chp,
                p_res: exo.p_res[t],
                p_curt: a.p_curt,
                p_ch: a.p_ch,
                p_dch: a.p_dch,
                l_e: exo.l_e[t],
                l_e_sl: a.l_e_sl,
            });
        }
    }
    rows
}
