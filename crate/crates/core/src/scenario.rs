//! Forecast generation and the rolling-horizon day driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::{transform_schedule, EquivalenceError, PeriodEquivalence};
use crate::hub::{ExogenousSeries, HubConfig, HubError, HubState, PeriodAction, Schedule};
use crate::market::{
    day_ahead_clear, real_time_clear, ClearingRecord, DayAheadResult, LpHub, MarketError,
    MarketParams, TransformerConfig,
};
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("day-ahead stage: {0}")]
    DayAhead(#[source] MarketError),
    #[error("real-time stage, period {period}: {source}")]
    RealTime {
        period: usize,
        #[source]
        source: MarketError,
    },
    #[error("hub {hub}, period {period}: {source}")]
    Equivalence {
        hub: String,
        period: usize,
        #[source]
        source: EquivalenceError,
    },
    #[error("centralized planner, period {period}: {source}")]
    Centralized {
        period: usize,
        #[source]
        source: OracleError,
    },
    #[error(transparent)]
    Hub(#[from] HubError),
}

/// Relative forecast error half-widths per stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModel {
    pub da_err_res: f64,
    pub id_err_res: f64,
    pub rt_err_res: f64,
    pub da_err_load: f64,
    pub id_err_load: f64,
    pub rt_err_load: f64,
    pub seed: u64,
}

impl ForecastModel {
    pub fn exact(seed: u64) -> Self {
        Self {
            da_err_res: 0.0,
            id_err_res: 0.0,
            rt_err_res: 0.0,
            da_err_load: 0.0,
            id_err_load: 0.0,
            rt_err_load: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let widths = [
            self.da_err_res,
            self.id_err_res,
            self.rt_err_res,
            self.da_err_load,
            self.id_err_load,
            self.rt_err_load,
        ];
        if widths.iter().all(|w| (0.0..1.0).contains(w)) {
            Ok(())
        } else {
            Err(ScenarioError::Invalid("forecast error widths must lie in [0, 1)".into()))
        }
    }

    /// `(renewable, load)` half-widths of a stage.
    pub fn widths(&self, stage: Stage) -> (f64, f64) {
        match stage {
            Stage::DayAhead => (self.da_err_res, self.da_err_load),
            Stage::IntraDay => (self.id_err_res, self.id_err_load),
            Stage::RealTime => (self.rt_err_res, self.rt_err_load),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    DayAhead,
    IntraDay,
    RealTime,
}

/// Independent random stream for one hub, stage and decision period, so
/// every planner sees identical forecasts for the same seed.
fn stream(model: &ForecastModel, hub: usize, stage: Stage, t_c: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(((hub as u64) << 34) | ((stage as u64) << 32) | t_c as u64);
    rng
}

fn perturb(rng: &mut ChaCha8Rng, truth: f64, width: f64) -> f64 {
    let u: f64 = rng.gen();
    (truth * (1.0 + width * (2.0 * u - 1.0))).max(0.0)
}

/// Forecast of every period at one stage's error band. Prices are exact.
pub fn generate_forecasts(
    truth: &ExogenousSeries,
    model: &ForecastModel,
    stage: Stage,
    hub: usize,
    t_c: usize,
) -> ExogenousSeries {
    let mut rng = stream(model, hub, stage, t_c);
    let (w_res, w_load) = model.widths(stage);
    let mut out = truth.clone();
    for t in 0..truth.len() {
        out.p_res[t] = perturb(&mut rng, truth.p_res[t], w_res);
        out.l_e[t] = perturb(&mut rng, truth.l_e[t], w_load);
        out.l_th[t] = perturb(&mut rng, truth.l_th[t], w_load);
    }
    out
}

/// Forecast used when re-planning at `t_c`: real-time band for `t_c`,
/// intra-day band for the later periods.
pub fn rolling_forecast(
    truth: &ExogenousSeries,
    model: &ForecastModel,
    hub: usize,
    t_c: usize,
) -> ExogenousSeries {
    let mut out = generate_forecasts(truth, model, Stage::IntraDay, hub, t_c);
    let rt = generate_forecasts(truth, model, Stage::RealTime, hub, t_c);
    out.p_res[t_c] = rt.p_res[t_c];
    out.l_e[t_c] = rt.l_e[t_c];
    out.l_th[t_c] = rt.l_th[t_c];
    for t in 0..t_c {
        out.p_res[t] = truth.p_res[t];
        out.l_e[t] = truth.l_e[t];
        out.l_th[t] = truth.l_th[t];
    }
    out
}

/// A fleet with its true exogenous data and market settings.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub fleet: Vec<HubConfig>,
    pub truth: Vec<ExogenousSeries>,
    pub transformer: TransformerConfig,
    pub forecast: ForecastModel,
    pub market: MarketParams,
}

impl Scenario {
    pub fn periods(&self) -> usize {
        self.truth.first().map_or(0, |s| s.len())
    }

    /// Utility price seen by the transformer.
    pub fn mu_e(&self) -> &[f64] {
        self.truth.first().map_or(&[], |s| &s.mu_e)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.fleet.len() != self.truth.len() {
            return Err(ScenarioError::Invalid(format!(
                "{} hubs but {} exogenous series",
                self.fleet.len(),
                self.truth.len()
            )));
        }
        let periods = self.periods();
        for (cfg, exo) in self.fleet.iter().zip(&self.truth) {
            cfg.validate()?;
            exo.validate()?;
            if exo.len() != periods || exo.mu_e != self.mu_e() {
                return Err(ScenarioError::Invalid(format!(
                    "hub {} must share the horizon and utility prices of the fleet",
                    cfg.id
                )));
            }
        }
        let mut ids: Vec<&str> = self.fleet.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScenarioError::Invalid("hub ids must be unique".into()));
        }
        self.forecast.validate()?;
        self.transformer
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.market
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// Fleet of `n` hubs built by cycling through the base hubs, with
    /// transformer limits and balance tolerance scaled in proportion.
    pub fn replicate(&self, n: usize) -> Scenario {
        let base = self.fleet.len().max(1);
        let scale = n as f64 / base as f64;
        let mut fleet = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let mut cfg = self.fleet[i % base].clone();
            if i >= base {
                cfg.id = format!("{}-r{}", cfg.id, i / base);
            }
            fleet.push(cfg);
            truth.push(self.truth[i % base].clone());
        }
        let transformer = TransformerConfig {
            p_in_max: self.transformer.p_in_max * scale,
            p_out_max: self.transformer.p_out_max * scale,
        };
        let mut market = self.market.clone();
        market.balance_tol *= scale;
        market.step0 /= scale;
        Scenario {
            name: format!("{}-x{n}", self.name),
            fleet,
            truth,
            transformer,
            forecast: self.forecast,
            market,
        }
    }
}

/// Adjustments applied when realized data replaces forecasts at commit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Reconciliation {
    pub curtailment: f64,
    pub grid: f64,
    pub chp: f64,
    pub ees: f64,
    pub furnace: f64,
    pub tes: f64,
    pub unserved_e: f64,
    pub spilled_e: f64,
    pub unserved_th: f64,
}

/// One committed hub-period.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommittedPeriod {
    pub action: PeriodAction,
    pub reconciliation: Reconciliation,
    pub equivalence: PeriodEquivalence,
    pub local_price: f64,
    pub cost_utility: f64,
    pub cost_local: f64,
}

#[derive(Clone, Debug)]
pub struct DayResult {
    pub hub_ids: Vec<String>,
    /// `committed[n][t]` is hub `n`'s realized action in period `t`.
    pub committed: Vec<Vec<CommittedPeriod>>,
    /// Real-time clearing records (empty for centralized planning).
    pub records: Vec<ClearingRecord>,
    pub day_ahead: Option<DayAheadResult>,
    pub transformer: Vec<f64>,
    pub mu_e: Vec<f64>,
    pub final_states: Vec<HubState>,
}

impl DayResult {
    /// IEH total cost at utility prices.
    pub fn total_cost(&self) -> f64 {
        self.committed
            .iter()
            .flat_map(|h| h.iter().map(|c| c.cost_utility))
            .sum()
    }

    pub fn hub_costs(&self) -> Vec<(f64, f64)> {
        self.committed
            .iter()
            .map(|h| {
                h.iter()
                    .fold((0.0, 0.0), |(u, l), c| (u + c.cost_utility, l + c.cost_local))
            })
            .collect()
    }

    pub fn condition_satisfied_count(&self) -> (usize, usize) {
        let all = self.committed.iter().flatten();
        let total = all.clone().count();
        let ok = all.filter(|c| c.equivalence.condition_satisfied).count();
        (ok, total)
    }

    pub fn committed_schedule(&self, hub: usize) -> Schedule {
        Schedule {
            start: 0,
            periods: self.committed[hub].iter().map(|c| c.action).collect(),
        }
    }
}

/// Produces each hub's plan for the remaining horizon at `t_c`.
pub trait Planner {
    /// Returns one plan per hub starting at `t_c`, the local price of `t_c`,
    /// and optionally the clearing record.
    fn plan(
        &mut self,
        t_c: usize,
        forecasts: &[ExogenousSeries],
        states: &[HubState],
    ) -> Result<(Vec<Schedule>, f64, Option<ClearingRecord>), ScenarioError>;
}

/// Real-time market planner driven by day-ahead forecast prices.
pub struct MarketPlanner<'a> {
    pub scenario: &'a Scenario,
    pub forecast_prices: Vec<f64>,
}

impl Planner for MarketPlanner<'_> {
    fn plan(
        &mut self,
        t_c: usize,
        forecasts: &[ExogenousSeries],
        states: &[HubState],
    ) -> Result<(Vec<Schedule>, f64, Option<ClearingRecord>), ScenarioError> {
        let s = self.scenario;
        let agents: Vec<LpHub> = s
            .fleet
            .iter()
            .zip(forecasts)
            .zip(states)
            .map(|((cfg, exo), state)| LpHub {
                cfg,
                exo,
                t_c,
                state: *state,
            })
            .collect();
        let out = real_time_clear(
            &agents,
            &self.forecast_prices[t_c..],
            s.mu_e()[t_c],
            &s.transformer,
            &s.market,
            t_c,
        )
        .map_err(|source| ScenarioError::RealTime { period: t_c, source })?;
        let price = out.record.price;
        Ok((out.plans, price, Some(out.record)))
    }
}

/// Runs the day-ahead stage on day-ahead forecasts.
pub fn run_day_ahead(s: &Scenario) -> Result<DayAheadResult, ScenarioError> {
    let forecasts: Vec<ExogenousSeries> = s
        .truth
        .iter()
        .enumerate()
        .map(|(n, truth)| generate_forecasts(truth, &s.forecast, Stage::DayAhead, n, 0))
        .collect();
    let agents: Vec<LpHub> = s
        .fleet
        .iter()
        .zip(&forecasts)
        .map(|(cfg, exo)| LpHub {
            cfg,
            exo,
            t_c: 0,
            state: HubState::initial(cfg),
        })
        .collect();
    day_ahead_clear(&agents, s.mu_e(), &s.transformer, &s.market).map_err(ScenarioError::DayAhead)
}

/// Full transactive day: day-ahead clearing, then one real-time clearing
/// per period with state carried forward on realized data.
pub fn run_day(s: &Scenario) -> Result<DayResult, ScenarioError> {
    s.validate()?;
    let da = run_day_ahead(s)?;
    let mut planner = MarketPlanner {
        scenario: s,
        forecast_prices: da.prices.values.clone(),
    };
    let mut result = roll_day(s, &mut planner)?;
    result.day_ahead = Some(da);
    Ok(result)
}

/// Rolling-horizon skeleton shared by every planner: forecast, plan,
/// transform, reconcile with truth, commit, advance.
pub fn roll_day<P: Planner>(s: &Scenario, planner: &mut P) -> Result<DayResult, ScenarioError> {
    s.validate()?;
    let periods = s.periods();
    let hubs = s.fleet.len();
    let mut states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    let mut committed: Vec<Vec<CommittedPeriod>> = vec![Vec::with_capacity(periods); hubs];
    let mut records = Vec::new();
    let mut transformer = Vec::with_capacity(periods);
    for t_c in 0..periods {
        let forecasts: Vec<ExogenousSeries> = s
            .truth
            .iter()
            .enumerate()
            .map(|(n, truth)| rolling_forecast(truth, &s.forecast, n, t_c))
            .collect();
        let (plans, price, record) = planner.plan(t_c, &forecasts, &states)?;
        if plans.len() != hubs {
            return Err(ScenarioError::Invalid(format!(
                "planner returned {} plans for {hubs} hubs",
                plans.len()
            )));
        }
        records.extend(record);
        let mut actions = Vec::with_capacity(hubs);
        for (n, plan) in plans.iter().enumerate() {
            let first = Schedule {
                start: t_c,
                periods: vec![plan.periods[0]],
            };
            let (exclusive, report) = transform_schedule(&first, &s.fleet[n], &forecasts[n])
                .map_err(|source| ScenarioError::Equivalence {
                    hub: s.fleet[n].id.clone(),
                    period: t_c,
                    source,
                })?;
            actions.push((exclusive.periods[0], report.periods[0].clone()));
        }
        let planned_total: f64 = actions.iter().map(|(a, _)| a.p_e).sum();
        let mut room = Headroom {
            import: s.transformer.p_in_max - planned_total,
            export: s.transformer.p_out_max + planned_total,
        };
        let mut total = 0.0;
        for (n, (mut action, equivalence)) in actions.into_iter().enumerate() {
            let cfg = &s.fleet[n];
            let truth = &s.truth[n];
            let reconciliation = reconcile(cfg, &states[n], &mut action, truth, t_c, &mut room);
            advance(cfg, &mut states[n], &mut action, truth.dt);
            let gas = truth.mu_g[t_c] * action.gas();
            let dt = truth.dt;
            total += action.p_e;
            committed[n].push(CommittedPeriod {
                action,
                reconciliation,
                equivalence,
                local_price: price,
                cost_utility: dt * (s.mu_e()[t_c] * action.p_e + gas),
                cost_local: dt * (price * action.p_e + gas),
            });
        }
        transformer.push(total);
    }
    Ok(DayResult {
        hub_ids: s.fleet.iter().map(|c| c.id.clone()).collect(),
        committed,
        records,
        day_ahead: None,
        transformer,
        mu_e: s.mu_e().to_vec(),
        final_states: states,
    })
}

/// Remaining transformer capacity shared by hubs during reconciliation.
struct Headroom {
    import: f64,
    export: f64,
}

/// Adjusts a planned action so both balances hold with realized data.
/// Electric deficits are covered by reduced curtailment, grid import within
/// the hub and transformer limits, CHP output, then storage; surpluses by
/// curtailment, export, reduced CHP output, then storage. Heat deficits use
/// reduced heat dumping, the furnace, then thermal storage.
fn reconcile(
    cfg: &HubConfig,
    state: &HubState,
    a: &mut PeriodAction,
    truth: &ExogenousSeries,
    t: usize,
    room: &mut Headroom,
) -> Reconciliation {
    let dt = truth.dt;
    let (p_res, l_e, l_th) = (truth.p_res[t], truth.l_e[t], truth.l_th[t]);
    let mut r = Reconciliation::default();
    let before = *a;
    a.p_curt = a.p_curt.min(p_res);
    // Planned exchange beyond the transformer limits is withdrawn first.
    if room.import < 0.0 && a.p_e > 0.0 {
        let cut = a.p_e.min(-room.import);
        a.p_e -= cut;
        room.import += cut;
        room.export -= cut;
    }
    if room.export < 0.0 && a.p_e < 0.0 {
        let cut = (-a.p_e).min(-room.export);
        a.p_e += cut;
        room.export += cut;
        room.import -= cut;
    }
    let ees_lo = cfg.ees_soc_min * cfg.ees_capacity;
    let ees_hi = cfg.ees_soc_max * cfg.ees_capacity;
    let ees_end =
        |a: &PeriodAction| state.ees_energy + dt * (cfg.eta_ch_ees * a.p_ch - a.p_dch / cfg.eta_dch_ees);
    let tes_lo = cfg.tes_soc_min * cfg.tes_capacity;
    let tes_end =
        |a: &PeriodAction| state.tes_energy + dt * (cfg.eta_ch_tes * a.h_ch - a.h_dch / cfg.eta_dch_tes);

    let e = a.electric_residual(cfg, p_res, l_e);
    if e < 0.0 {
        let mut need = -e;
        let cut = need.min(a.p_curt);
        a.p_curt -= cut;
        need -= cut;
        let grid = (need / cfg.eta_ee).min(cfg.p_import_max - a.p_e).min(room.import).max(0.0);
        a.p_e += grid;
        room.import -= grid;
        room.export += grid;
        need = (need - grid * cfg.eta_ee).max(0.0);
        let chp = (need / cfg.eta_ge_chp).min(cfg.g_chp_max - a.g_chp).max(0.0);
        a.g_chp += chp;
        need = (need - chp * cfg.eta_ge_chp).max(0.0);
        let less_charge = need.min(a.p_ch);
        a.p_ch -= less_charge;
        need -= less_charge;
        if a.p_ch == 0.0 {
            let energy = (ees_end(a) - ees_lo).max(0.0);
            let dch = need
                .min(cfg.p_dch_max - a.p_dch)
                .min(energy * cfg.eta_dch_ees / dt)
                .max(0.0);
            a.p_dch += dch;
            need -= dch;
        }
        r.unserved_e = need.max(0.0);
    } else if e > 0.0 {
        let mut extra = e;
        let curt = extra.min(p_res - a.p_curt).max(0.0);
        a.p_curt += curt;
        extra -= curt;
        let export = (extra / cfg.eta_ee)
            .min(a.p_e + cfg.p_import_max)
            .min(room.export)
            .max(0.0);
        a.p_e -= export;
        room.export -= export;
        room.import += export;
        extra = (extra - export * cfg.eta_ee).max(0.0);
        let chp = (extra / cfg.eta_ge_chp).min(a.g_chp).max(0.0);
        a.g_chp -= chp;
        extra = (extra - chp * cfg.eta_ge_chp).max(0.0);
        let less_discharge = extra.min(a.p_dch);
        a.p_dch -= less_discharge;
        extra -= less_discharge;
        if a.p_dch == 0.0 {
            let space = (ees_hi - ees_end(a)).max(0.0);
            let ch = extra
                .min(cfg.p_ch_max - a.p_ch)
                .min(space / (cfg.eta_ch_ees * dt))
                .max(0.0);
            a.p_ch += ch;
            extra -= ch;
        }
        r.spilled_e = extra.max(0.0);
    }

    let h = a.thermal_residual(cfg, l_th);
    if h < 0.0 {
        let mut need = -h;
        let dump = need.min(a.h_curt);
        a.h_curt -= dump;
        need -= dump;
        let gf = (need / cfg.eta_gth_gf).min(cfg.g_gf_max - a.g_gf).max(0.0);
        a.g_gf += gf;
        need = (need - gf * cfg.eta_gth_gf).max(0.0);
        let less_charge = need.min(a.h_ch);
        a.h_ch -= less_charge;
        need -= less_charge;
        if a.h_ch == 0.0 {
            let energy = (tes_end(a) - tes_lo).max(0.0);
            let dch = need
                .min(cfg.h_dch_max - a.h_dch)
                .min(energy * cfg.eta_dch_tes / dt)
                .max(0.0);
            a.h_dch += dch;
            need -= dch;
        }
        r.unserved_th = need.max(0.0);
    } else if h > 0.0 {
        a.h_curt += h;
    }

    r.curtailment = a.p_curt - before.p_curt;
    r.grid = a.p_e - before.p_e;
    r.chp = a.g_chp - before.g_chp;
    r.ees = (a.p_dch - a.p_ch) - (before.p_dch - before.p_ch);
    r.furnace = a.g_gf - before.g_gf;
    r.tes = (a.h_dch - a.h_ch) - (before.h_dch - before.h_ch);
    r
}

/// Applies a committed action to the hub state and records the resulting
/// state of charge on the action.
fn advance(cfg: &HubConfig, state: &mut HubState, a: &mut PeriodAction, dt: f64) {
    let ees = state.ees_energy + dt * (cfg.eta_ch_ees * a.p_ch - a.p_dch / cfg.eta_dch_ees);
    let tes = state.tes_energy + dt * (cfg.eta_ch_tes * a.h_ch - a.h_dch / cfg.eta_dch_tes);
    state.ees_energy = ees.clamp(cfg.ees_soc_min * cfg.ees_capacity, cfg.ees_soc_max * cfg.ees_capacity);
    state.tes_energy = tes.clamp(cfg.tes_soc_min * cfg.tes_capacity, cfg.tes_soc_max * cfg.tes_capacity);
    state.sl_e_remaining = (state.sl_e_remaining - dt * a.l_e_sl).max(0.0);
    state.sl_th_remaining = (state.sl_th_remaining - dt * a.l_th_sl).max(0.0);
    a.soc_ees = state.ees_energy;
    a.soc_tes = state.tes_energy;
}
