//! Energy-hub data model and the relaxed autonomous scheduling LP.
//!
//! Per period the hub balances
//!
//! ```text
//! eta_ee*p_e + eta_ge*g_chp + p_dch - p_ch + p_res - p_curt = l_e_sl + l_e
//! eta_gth*g_chp + eta_gf*g_gf + h_dch - h_ch - h_curt       = l_th_sl + l_th
//! ```
//!
//! with storage dynamics, device limits, shiftable-load totals and the
//! curtailment box. Charge/discharge mutual exclusivity is not imposed here;
//! see [`crate::equivalence`] for how it is restored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpError, LpSolution, LpStatus, Sense};

#[derive(Debug, Error)]
pub enum HubError {
    #[error("empty horizon: start period {t_c} with {periods} periods in the series")]
    EmptyHorizon { t_c: usize, periods: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid hub configuration: {0}")]
    InvalidConfig(String),
    #[error("hub problem not solved to optimality: {0:?}")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn default_rate_factor() -> f64 {
    3.0
}

/// Static parameters of one energy hub. State-of-charge bounds are fractions
/// of capacity; powers are kW, energies kWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubConfig {
    pub id: String,
    pub eta_ee: f64,
    pub eta_ge_chp: f64,
    pub eta_gth_chp: f64,
    pub eta_gth_gf: f64,
    pub eta_ch_ees: f64,
    pub eta_dch_ees: f64,
    pub eta_ch_tes: f64,
    pub eta_dch_tes: f64,
    pub ees_capacity: f64,
    pub tes_capacity: f64,
    pub ees_soc_min: f64,
    pub ees_soc_max: f64,
    pub ees_soc_init: f64,
    pub tes_soc_min: f64,
    pub tes_soc_max: f64,
    pub tes_soc_init: f64,
    pub p_ch_max: f64,
    pub p_dch_max: f64,
    pub h_ch_max: f64,
    pub h_dch_max: f64,
    pub g_chp_max: f64,
    pub g_gf_max: f64,
    pub p_import_max: f64,
    pub l_e_sl_total: f64,
    pub l_th_sl_total: f64,
    /// Per-period shiftable service cap as a multiple of the uniform rate.
    #[serde(default = "default_rate_factor")]
    pub sl_rate_factor: f64,
}

impl HubConfig {
    pub fn validate(&self) -> Result<(), HubError> {
        let bad = |msg: String| Err(HubError::InvalidConfig(format!("{}: {msg}", self.id)));
        let effs = [
            ("eta_ee", self.eta_ee),
            ("eta_ge_chp", self.eta_ge_chp),
            ("eta_gth_chp", self.eta_gth_chp),
            ("eta_gth_gf", self.eta_gth_gf),
            ("eta_ch_ees", self.eta_ch_ees),
            ("eta_dch_ees", self.eta_dch_ees),
            ("eta_ch_tes", self.eta_ch_tes),
            ("eta_dch_tes", self.eta_dch_tes),
        ];
        for (name, v) in effs {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} outside (0, 1]"));
            }
        }
        let nonneg = [
            ("ees_capacity", self.ees_capacity),
            ("tes_capacity", self.tes_capacity),
            ("p_ch_max", self.p_ch_max),
            ("p_dch_max", self.p_dch_max),
            ("h_ch_max", self.h_ch_max),
            ("h_dch_max", self.h_dch_max),
            ("g_chp_max", self.g_chp_max),
            ("g_gf_max", self.g_gf_max),
            ("p_import_max", self.p_import_max),
            ("l_e_sl_total", self.l_e_sl_total),
            ("l_th_sl_total", self.l_th_sl_total),
            ("sl_rate_factor", self.sl_rate_factor),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        for (name, lo, init, hi) in [
            ("ees", self.ees_soc_min, self.ees_soc_init, self.ees_soc_max),
            ("tes", self.tes_soc_min, self.tes_soc_init, self.tes_soc_max),
        ] {
            if !(0.0 <= lo && lo <= init && init <= hi && hi <= 1.0) {
                return bad(format!("{name} soc bounds must satisfy 0 <= min <= init <= max <= 1"));
            }
        }
        if self.sl_rate_factor < 1.0 && (self.l_e_sl_total > 0.0 || self.l_th_sl_total > 0.0) {
            return bad("sl_rate_factor below 1 cannot serve the shiftable totals".into());
        }
        Ok(())
    }

    pub fn ees_round_trip(&self) -> f64 {
        self.eta_ch_ees * self.eta_dch_ees
    }
}

/// Per-period exogenous data for one hub.
#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousSeries {
    pub p_res: Vec<f64>,
    pub l_e: Vec<f64>,
    pub l_th: Vec<f64>,
    /// Utility electricity price, currency/kWh.
    pub mu_e: Vec<f64>,
    /// Gas price, currency per kWh of gas.
    pub mu_g: Vec<f64>,
    /// Period length in hours.
    pub dt: f64,
}

impl ExogenousSeries {
    pub fn len(&self) -> usize {
        self.mu_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_e.is_empty()
    }

    pub fn validate(&self) -> Result<(), HubError> {
        let n = self.len();
        for (name, s) in [
            ("p_res", &self.p_res),
            ("l_e", &self.l_e),
            ("l_th", &self.l_th),
            ("mu_g", &self.mu_g),
        ] {
            if s.len() != n {
                return Err(HubError::LengthMismatch(format!(
                    "{name} has {} periods, mu_e has {n}",
                    s.len()
                )));
            }
        }
        for (name, s) in [("p_res", &self.p_res), ("l_e", &self.l_e), ("l_th", &self.l_th)] {
            if let Some(t) = s.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(HubError::InvalidConfig(format!("{name}[{t}] must be non-negative")));
            }
        }
        if let Some(t) = self.mu_g.iter().position(|v| !(*v > 0.0)) {
            return Err(HubError::InvalidConfig(format!("mu_g[{t}] must be positive")));
        }
        if !(self.dt > 0.0) {
            return Err(HubError::InvalidConfig("period length must be positive".into()));
        }
        Ok(())
    }
}

/// Converts a volumetric gas price into currency per kWh of gas energy.
pub fn gas_price_per_kwh(price_per_m3: f64, density_kg_m3: f64, calorific_mj_kg: f64) -> f64 {
    let kwh_per_m3 = density_kg_m3 * calorific_mj_kg / 3.6;
    price_per_m3 / kwh_per_m3
}

/// Dynamic state carried between periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HubState {
    /// Stored electric energy, kWh.
    pub ees_energy: f64,
    /// Stored thermal energy, kWh.
    pub tes_energy: f64,
    /// Shiftable electric energy still to be served, kWh.
    pub sl_e_remaining: f64,
    pub sl_th_remaining: f64,
}

impl HubState {
    pub fn initial(cfg: &HubConfig) -> Self {
        Self {
            ees_energy: cfg.ees_soc_init * cfg.ees_capacity,
            tes_energy: cfg.tes_soc_init * cfg.tes_capacity,
            sl_e_remaining: cfg.l_e_sl_total,
            sl_th_remaining: cfg.l_th_sl_total,
        }
    }
}

/// Decisions of one hub for one period.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodAction {
    pub p_e: f64,
    pub g_chp: f64,
    pub g_gf: f64,
    pub p_ch: f64,
    pub p_dch: f64,
    pub h_ch: f64,
    pub h_dch: f64,
    pub p_curt: f64,
    pub h_curt: f64,
    pub l_e_sl: f64,
    pub l_th_sl: f64,
    /// Stored energy at the end of the period, kWh.
    pub soc_ees: f64,
    pub soc_tes: f64,
}

impl PeriodAction {
    /// Electric balance residual (supply minus demand), kW.
    pub fn electric_residual(&self, cfg: &HubConfig, p_res: f64, l_e: f64) -> f64 {
        cfg.eta_ee * self.p_e + cfg.eta_ge_chp * self.g_chp + self.p_dch - self.p_ch + p_res
            - self.p_curt
            - self.l_e_sl
            - l_e
    }

    pub fn thermal_residual(&self, cfg: &HubConfig, l_th: f64) -> f64 {
        cfg.eta_gth_chp * self.g_chp + cfg.eta_gth_gf * self.g_gf + self.h_dch
            - self.h_ch
            - self.h_curt
            - self.l_th_sl
            - l_th
    }

    pub fn gas(&self) -> f64 {
        self.g_chp + self.g_gf
    }
}

/// One hub's decisions for periods `start..start + periods.len()`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub start: usize,
    pub periods: Vec<PeriodAction>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.periods.iter().map(|a| a.p_e).collect()
    }

    /// Convex combination `w * self + (1 - w) * other` of two plans over the
    /// same periods.
    pub fn blend(&self, other: &Schedule, w: f64) -> Schedule {
        let mix = |a: f64, b: f64| w * a + (1.0 - w) * b;
        let periods = self
            .periods
            .iter()
            .zip(&other.periods)
            .map(|(a, b)| PeriodAction {
                p_e: mix(a.p_e, b.p_e),
                g_chp: mix(a.g_chp, b.g_chp),
                g_gf: mix(a.g_gf, b.g_gf),
                p_ch: mix(a.p_ch, b.p_ch),
                p_dch: mix(a.p_dch, b.p_dch),
                h_ch: mix(a.h_ch, b.h_ch),
                h_dch: mix(a.h_dch, b.h_dch),
                p_curt: mix(a.p_curt, b.p_curt),
                h_curt: mix(a.h_curt, b.h_curt),
                l_e_sl: mix(a.l_e_sl, b.l_e_sl),
                l_th_sl: mix(a.l_th_sl, b.l_th_sl),
                soc_ees: mix(a.soc_ees, b.soc_ees),
                soc_tes: mix(a.soc_tes, b.soc_tes),
            })
            .collect();
        Schedule {
            start: self.start,
            periods,
        }
    }
}

/// Decision variables of one period, in column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    PE = 0,
    GChp,
    GGf,
    PCh,
    PDch,
    HCh,
    HDch,
    PCurt,
    HCurt,
    LeSl,
    LthSl,
    SocEes,
    SocTes,
}

const VARS_PER_PERIOD: usize = 13;

/// Where one hub's block lives inside a [`LinearProgram`].
#[derive(Clone, Debug, PartialEq)]
pub struct HubLayout {
    pub t_c: usize,
    pub horizon: usize,
    first_col: usize,
    first_row: usize,
}

impl HubLayout {
    pub fn col(&self, k: usize, var: Var) -> usize {
        self.first_col + k * VARS_PER_PERIOD + var as usize
    }

    pub fn electric_balance_row(&self, k: usize) -> usize {
        self.first_row + 4 * k
    }

    pub fn thermal_balance_row(&self, k: usize) -> usize {
        self.first_row + 4 * k + 1
    }

    pub fn columns(&self) -> std::ops::Range<usize> {
        self.first_col..self.first_col + self.horizon * VARS_PER_PERIOD
    }

    /// Writes a schedule into a full-length point vector of the program.
    pub fn encode(&self, sched: &Schedule, point: &mut [f64]) {
        for (k, a) in sched.periods.iter().enumerate() {
            let vals = [
                a.p_e, a.g_chp, a.g_gf, a.p_ch, a.p_dch, a.h_ch, a.h_dch, a.p_curt, a.h_curt,
                a.l_e_sl, a.l_th_sl, a.soc_ees, a.soc_tes,
            ];
            for (v, val) in vals.iter().enumerate() {
                point[self.first_col + k * VARS_PER_PERIOD + v] = *val;
            }
        }
    }

    /// Reads this hub's schedule out of a primal vector.
    pub fn extract(&self, x: &[f64]) -> Schedule {
        let periods = (0..self.horizon)
            .map(|k| {
                let g = |v: Var| x[self.col(k, v)];
                PeriodAction {
                    p_e: g(Var::PE),
                    g_chp: g(Var::GChp),
                    g_gf: g(Var::GGf),
                    p_ch: g(Var::PCh),
                    p_dch: g(Var::PDch),
                    h_ch: g(Var::HCh),
                    h_dch: g(Var::HDch),
                    p_curt: g(Var::PCurt),
                    h_curt: g(Var::HCurt),
                    l_e_sl: g(Var::LeSl),
                    l_th_sl: g(Var::LthSl),
                    soc_ees: g(Var::SocEes),
                    soc_tes: g(Var::SocTes),
                }
            })
            .collect();
        Schedule {
            start: self.t_c,
            periods,
        }
    }
}

/// Per-period shiftable service caps `(electric, thermal)` in kW.
pub fn shiftable_rate_caps(cfg: &HubConfig, periods: usize, dt: f64) -> (f64, f64) {
    let window = periods as f64 * dt;
    (
        cfg.sl_rate_factor * cfg.l_e_sl_total / window,
        cfg.sl_rate_factor * cfg.l_th_sl_total / window,
    )
}

/// Appends one hub's relaxed problem over periods `t_c..` to `lp`. The
/// electricity import of each period is priced at `prices[k]`.
pub fn append_hub(
    lp: &mut LinearProgram,
    cfg: &HubConfig,
    exo: &ExogenousSeries,
    prices: &[f64],
    t_c: usize,
    state: &HubState,
) -> Result<HubLayout, HubError> {
    let total = exo.len();
    if t_c >= total {
        return Err(HubError::EmptyHorizon {
            t_c,
            periods: total,
        });
    }
    let horizon = total - t_c;
    if prices.len() != horizon {
        return Err(HubError::LengthMismatch(format!(
            "{} prices for a {horizon}-period horizon",
            prices.len()
        )));
    }
    let dt = exo.dt;
    let (rate_e, rate_th) = shiftable_rate_caps(cfg, total, dt);
    let first_col = lp.num_vars();
    let first_row = lp.num_rows();
    let layout = HubLayout {
        t_c,
        horizon,
        first_col,
        first_row,
    };
    let ees_lo = cfg.ees_soc_min * cfg.ees_capacity;
    let ees_hi = cfg.ees_soc_max * cfg.ees_capacity;
    let tes_lo = cfg.tes_soc_min * cfg.tes_capacity;
    let tes_hi = cfg.tes_soc_max * cfg.tes_capacity;
    let span = horizon as f64 * dt;
    let ees_target = (cfg.ees_soc_init * cfg.ees_capacity)
        .min(state.ees_energy + span * cfg.eta_ch_ees * cfg.p_ch_max);
    let tes_target = (cfg.tes_soc_init * cfg.tes_capacity)
        .min(state.tes_energy + span * cfg.eta_ch_tes * cfg.h_ch_max);
    for k in 0..horizon {
        let t = t_c + k;
        let last = k + 1 == horizon;
        let gas = exo.mu_g[t] * dt;
        lp.add_var(prices[k] * dt, -cfg.p_import_max, cfg.p_import_max);
        lp.add_var(gas, 0.0, cfg.g_chp_max);
        lp.add_var(gas, 0.0, cfg.g_gf_max);
        lp.add_var(0.0, 0.0, cfg.p_ch_max);
        lp.add_var(0.0, 0.0, cfg.p_dch_max);
        lp.add_var(0.0, 0.0, cfg.h_ch_max);
        lp.add_var(0.0, 0.0, cfg.h_dch_max);
        lp.add_var(0.0, 0.0, exo.p_res[t]);
        lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_var(0.0, 0.0, rate_e);
        lp.add_var(0.0, 0.0, rate_th);
        // Terminal condition: storage ends no lower than it started the day,
        // relaxed to what is still reachable from the current state.
        let ees_end_lo = if last { ees_lo.max(ees_target) } else { ees_lo };
        let tes_end_lo = if last { tes_lo.max(tes_target) } else { tes_lo };
        lp.add_var(0.0, ees_end_lo, ees_hi);
        lp.add_var(0.0, tes_end_lo, tes_hi);
    }
    for k in 0..horizon {
        let t = t_c + k;
        let c = |v: Var| layout.col(k, v);
        lp.add_row(
            &[
                (c(Var::PE), cfg.eta_ee),
                (c(Var::GChp), cfg.eta_ge_chp),
                (c(Var::PDch), 1.0),
                (c(Var::PCh), -1.0),
                (c(Var::PCurt), -1.0),
                (c(Var::LeSl), -1.0),
            ],
            Sense::Eq,
            exo.l_e[t] - exo.p_res[t],
        );
        lp.add_row(
            &[
                (c(Var::GChp), cfg.eta_gth_chp),
                (c(Var::GGf), cfg.eta_gth_gf),
                (c(Var::HDch), 1.0),
                (c(Var::HCh), -1.0),
                (c(Var::HCurt), -1.0),
                (c(Var::LthSl), -1.0),
            ],
            Sense::Eq,
            exo.l_th[t],
        );
        let mut ees = vec![
            (c(Var::SocEes), 1.0),
            (c(Var::PCh), -dt * cfg.eta_ch_ees),
            (c(Var::PDch), dt / cfg.eta_dch_ees),
        ];
        let mut tes = vec![
            (c(Var::SocTes), 1.0),
            (c(Var::HCh), -dt * cfg.eta_ch_tes),
            (c(Var::HDch), dt / cfg.eta_dch_tes),
        ];
        let (ees_rhs, tes_rhs) = if k == 0 {
            (state.ees_energy, state.tes_energy)
        } else {
            ees.push((layout.col(k - 1, Var::SocEes), -1.0));
            tes.push((layout.col(k - 1, Var::SocTes), -1.0));
            (0.0, 0.0)
        };
        lp.add_row(&ees, Sense::Eq, ees_rhs);
        lp.add_row(&tes, Sense::Eq, tes_rhs);
    }
    let sl_e: Vec<(usize, f64)> = (0..horizon).map(|k| (layout.col(k, Var::LeSl), dt)).collect();
    let sl_th: Vec<(usize, f64)> = (0..horizon).map(|k| (layout.col(k, Var::LthSl), dt)).collect();
    lp.add_row(&sl_e, Sense::Eq, state.sl_e_remaining);
    lp.add_row(&sl_th, Sense::Eq, state.sl_th_remaining);
    Ok(layout)
}

/// Compiles the relaxed autonomous problem of one hub at local prices.
pub fn build_autonomous_lp(
    cfg: &HubConfig,
    exo: &ExogenousSeries,
    prices: &[f64],
    t_c: usize,
    state: &HubState,
) -> Result<(LinearProgram, HubLayout), HubError> {
    let mut lp = LinearProgram::new();
    let layout = append_hub(&mut lp, cfg, exo, prices, t_c, state)?;
    Ok((lp, layout))
}

pub fn decode_schedule(sol: &LpSolution, layout: &HubLayout) -> Result<Schedule, HubError> {
    if sol.status != LpStatus::Optimal {
        return Err(HubError::NotOptimal(sol.status));
    }
    Ok(layout.extract(&sol.x))
}

/// Solves the autonomous problem and decodes the optimal schedule.
pub fn solve_autonomous(
    cfg: &HubConfig,
    exo: &ExogenousSeries,
    prices: &[f64],
    t_c: usize,
    state: &HubState,
) -> Result<(Schedule, f64), HubError> {
    let (lp, layout) = build_autonomous_lp(cfg, exo, prices, t_c, state)?;
    let sol = lp.solve()?;
    let sched = decode_schedule(&sol, &layout)?;
    Ok((sched, sol.objective))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostBreakdown {
    pub per_period: Vec<f64>,
    pub total: f64,
}

/// Electricity plus gas cost of a schedule, with `prices` aligned to the
/// schedule's periods.
pub fn evaluate_cost(
    sched: &Schedule,
    exo: &ExogenousSeries,
    prices: &[f64],
) -> Result<CostBreakdown, HubError> {
    if prices.len() != sched.len() || sched.start + sched.len() > exo.len() {
        return Err(HubError::LengthMismatch(format!(
            "schedule of {} periods from {}, {} prices, {} series periods",
            sched.len(),
            sched.start,
            prices.len(),
            exo.len()
        )));
    }
    let per_period: Vec<f64> = sched
        .periods
        .iter()
        .zip(prices)
        .enumerate()
        .map(|(k, (a, price))| exo.dt * (price * a.p_e + exo.mu_g[sched.start + k] * a.gas()))
        .collect();
    let total = per_period.iter().sum();
    Ok(CostBreakdown { per_period, total })
}
