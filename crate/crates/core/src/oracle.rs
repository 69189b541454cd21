//! Centralized benchmark: every hub block plus the transformer in one LP.

use thiserror::Error;

use crate::equivalence::{transform_schedule, EquivalenceError, EquivalenceReport};
use crate::hub::{append_hub, ExogenousSeries, HubConfig, HubError, HubLayout, HubState, Schedule, Var};
use crate::lp::{LinearProgram, LpError, LpStatus, Sense};
use crate::market::{ClearingRecord, TransformerConfig};
use crate::scenario::{roll_day, DayResult, Planner, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("centralized problem infeasible: coupling row of period {period} short by {shortfall:.6} kW")]
    Infeasible { period: usize, shortfall: f64 },
    #[error("centralized problem infeasible inside a hub block")]
    HubInfeasible,
    #[error("centralized problem unbounded")]
    Unbounded,
    #[error("inconsistent input: {0}")]
    Invalid(String),
    #[error("hub {hub}: {source}")]
    Equivalence {
        hub: String,
        #[source]
        source: EquivalenceError,
    },
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Debug)]
pub struct CentralizedResult {
    pub t_c: usize,
    pub objective: f64,
    /// Cost of each hub at utility prices.
    pub hub_costs: Vec<f64>,
    pub transformer: Vec<f64>,
    /// Derivative of the objective with respect to the right-hand side of
    /// each period's balance row `sum(p_e) - p_tr = 0`.
    pub balance_duals: Vec<f64>,
    /// Reduced cost of each period's transformer power (non-zero only when
    /// a capacity limit binds).
    pub capacity_duals: Vec<f64>,
    /// Relaxed optimal plans as solved.
    pub relaxed: Vec<Schedule>,
    /// Plans after restoring storage exclusivity.
    pub schedules: Vec<Schedule>,
    pub equivalence: Vec<EquivalenceReport>,
    pub iterations: usize,
}

/// Builds the joint problem over periods `t_c..`. Returns the program, hub
/// layouts, and the first transformer column.
pub fn build_centralized(
    fleet: &[HubConfig],
    exo: &[ExogenousSeries],
    tr: &TransformerConfig,
    t_c: usize,
    states: &[HubState],
) -> Result<(LinearProgram, Vec<HubLayout>, usize), OracleError> {
    if fleet.len() != exo.len() || fleet.len() != states.len() {
        return Err(OracleError::Invalid(format!(
            "{} hubs, {} series, {} states",
            fleet.len(),
            exo.len(),
            states.len()
        )));
    }
    let periods = exo.first().map_or(0, |e| e.len());
    if t_c >= periods {
        return Err(OracleError::Invalid(format!("start period {t_c} beyond {periods} periods")));
    }
    let horizon = periods - t_c;
    let mut lp = LinearProgram::new();
    let mut layouts = Vec::with_capacity(fleet.len());
    for ((cfg, e), state) in fleet.iter().zip(exo).zip(states) {
        if e.len() != periods {
            return Err(OracleError::Invalid(format!("hub {} horizon differs", cfg.id)));
        }
        layouts.push(append_hub(&mut lp, cfg, e, &e.mu_e[t_c..], t_c, state)?);
    }
    let tr_col = lp.num_vars();
    for _ in 0..horizon {
        lp.add_var(0.0, -tr.p_out_max, tr.p_in_max);
    }
    for k in 0..horizon {
        let mut coeffs: Vec<(usize, f64)> = layouts.iter().map(|l| (l.col(k, Var::PE), 1.0)).collect();
        coeffs.push((tr_col + k, -1.0));
        lp.add_row(&coeffs, Sense::Eq, 0.0);
    }
    Ok((lp, layouts, tr_col))
}

/// Solves the joint problem at utility prices.
pub fn solve_centralized(
    fleet: &[HubConfig],
    exo: &[ExogenousSeries],
    tr: &TransformerConfig,
    t_c: usize,
    states: &[HubState],
) -> Result<CentralizedResult, OracleError> {
    let (lp, layouts, tr_col) = build_centralized(fleet, exo, tr, t_c, states)?;
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(OracleError::Unbounded),
        LpStatus::Infeasible => return Err(diagnose_infeasible(&lp, tr_col, t_c)?),
    }
    let horizon = exo[0].len() - t_c;
    let first_balance = lp.num_rows() - horizon;
    let relaxed: Vec<Schedule> = layouts.iter().map(|l| l.extract(&sol.x)).collect();
    let hub_costs = relaxed
        .iter()
        .zip(exo)
        .map(|(s, e)| {
            s.periods
                .iter()
                .enumerate()
                .map(|(k, a)| e.dt * (e.mu_e[t_c + k] * a.p_e + e.mu_g[t_c + k] * a.gas()))
                .sum()
        })
        .collect();
    let mut schedules = Vec::with_capacity(fleet.len());
    let mut equivalence = Vec::with_capacity(fleet.len());
    for ((s, cfg), e) in relaxed.iter().zip(fleet).zip(exo) {
        let (t, r) = transform_schedule(s, cfg, e).map_err(|source| OracleError::Equivalence {
            hub: cfg.id.clone(),
            source,
        })?;
        schedules.push(t);
        equivalence.push(r);
    }
    Ok(CentralizedResult {
        t_c,
        objective: sol.objective,
        hub_costs,
        transformer: sol.x[tr_col..tr_col + horizon].to_vec(),
        balance_duals: sol.duals[first_balance..].to_vec(),
        capacity_duals: sol.reduced_costs[tr_col..tr_col + horizon].to_vec(),
        relaxed,
        schedules,
        equivalence,
        iterations: sol.iterations,
    })
}

/// Locates the first coupling row that cannot be met by re-solving with
/// penalized slack on every coupling row and zero operating costs.
fn diagnose_infeasible(
    lp: &LinearProgram,
    tr_col: usize,
    t_c: usize,
) -> Result<OracleError, OracleError> {
    let horizon = lp.num_vars() - tr_col;
    let first_balance = lp.num_rows() - horizon;
    let mut elastic = LinearProgram::new();
    for j in 0..lp.num_vars() {
        elastic.add_var(0.0, lp.lower()[j], lp.upper()[j]);
    }
    let mut slack_cols = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        slack_cols.push((elastic.add_var(1.0, 0.0, f64::INFINITY), elastic.add_var(1.0, 0.0, f64::INFINITY)));
    }
    for i in 0..lp.num_rows() {
        let mut coeffs = lp.row(i).to_vec();
        if i >= first_balance {
            let (up, down) = slack_cols[i - first_balance];
            coeffs.push((up, 1.0));
            coeffs.push((down, -1.0));
        }
        elastic.add_row(&coeffs, lp.senses()[i], lp.rhs()[i]);
    }
    let sol = elastic.solve()?;
    if sol.status != LpStatus::Optimal {
        return Ok(OracleError::HubInfeasible);
    }
    for (k, (up, down)) in slack_cols.iter().enumerate() {
        let shortfall = sol.x[*up] - sol.x[*down];
        if shortfall.abs() > 1e-7 {
            return Ok(OracleError::Infeasible {
                period: t_c + k,
                shortfall,
            });
        }
    }
    Ok(OracleError::HubInfeasible)
}

/// Congestion component of the local price per period, with the implied
/// local price and a flag for periods where the multiplier is not unique.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPrices {
    pub congestion: Vec<f64>,
    pub local: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// Extracts the balance-row multipliers. The multiplier of
/// `sum(p_e) - p_tr = 0` in the Lagrangian equals minus the objective's
/// sensitivity to that row's right-hand side.
pub fn dual_prices(result: &CentralizedResult, mu_e: &[f64], tr: &TransformerConfig) -> DualPrices {
    let congestion: Vec<f64> = result.balance_duals.iter().map(|y| -y).collect();
    let local = congestion
        .iter()
        .zip(&mu_e[result.t_c..])
        .map(|(l, m)| m + l)
        .collect();
    let degenerate = result
        .transformer
        .iter()
        .zip(&congestion)
        .map(|(p, l)| {
            let at_limit = (p - tr.p_in_max).abs() <= 1e-7 || (p + tr.p_out_max).abs() <= 1e-7;
            at_limit && l.abs() <= 1e-9
        })
        .collect();
    DualPrices {
        congestion,
        local,
        degenerate,
    }
}

/// Re-solves with one balance row's right-hand side shifted by `eps` kW and
/// returns the objective change per kW.
pub fn perturbed_slope(
    fleet: &[HubConfig],
    exo: &[ExogenousSeries],
    tr: &TransformerConfig,
    t_c: usize,
    states: &[HubState],
    period: usize,
    eps: f64,
) -> Result<f64, OracleError> {
    let (mut lp, _, _) = build_centralized(fleet, exo, tr, t_c, states)?;
    let base = lp.solve()?;
    let horizon = exo[0].len() - t_c;
    let row = lp.num_rows() - horizon + (period - t_c);
    lp.set_rhs(row, eps);
    let shifted = lp.solve()?;
    if base.status != LpStatus::Optimal || shifted.status != LpStatus::Optimal {
        return Err(OracleError::Invalid("perturbed problem not optimal".into()));
    }
    Ok((shifted.objective - base.objective) / eps)
}

/// Single solve on true data from the initial state.
pub fn clairvoyant(s: &Scenario) -> Result<CentralizedResult, OracleError> {
    let states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    solve_centralized(&s.fleet, &s.truth, &s.transformer, 0, &states)
}

/// Re-solves the joint problem on rolling forecasts every period and
/// commits through the same reconciliation as the market.
pub struct CentralizedPlanner<'a> {
    pub scenario: &'a Scenario,
    pub solves: Vec<CentralizedResult>,
}

impl Planner for CentralizedPlanner<'_> {
    fn plan(
        &mut self,
        t_c: usize,
        forecasts: &[ExogenousSeries],
        states: &[HubState],
    ) -> Result<(Vec<Schedule>, f64, Option<ClearingRecord>), ScenarioError> {
        let s = self.scenario;
        let res = solve_centralized(&s.fleet, forecasts, &s.transformer, t_c, states)
            .map_err(|source| ScenarioError::Centralized { period: t_c, source })?;
        let price = s.mu_e()[t_c] - res.balance_duals[0];
        let plans = res.relaxed.clone();
        self.solves.push(res);
        Ok((plans, price, None))
    }
}

pub fn rolling(s: &Scenario) -> Result<DayResult, ScenarioError> {
    let mut planner = CentralizedPlanner {
        scenario: s,
        solves: Vec::new(),
    };
    roll_day(s, &mut planner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::solve_autonomous;
    use crate::hub::tests::{bare_hub, flat_series};

    fn storage_hub(id: &str) -> HubConfig {
        HubConfig {
            id: id.into(),
            ees_capacity: 50.0,
            ees_soc_init: 0.5,
            p_ch_max: 20.0,
            p_dch_max: 20.0,
            g_chp_max: 30.0,
            g_gf_max: 100.0,
            l_e_sl_total: 20.0,
            ..bare_hub()
        }
    }

    fn series() -> ExogenousSeries {
        let mut e = flat_series(4, 5.0, 20.0, 30.0, 0.5);
        e.mu_e = vec![0.3, 0.9, 1.0, 0.4];
        e.p_res = vec![0.0, 10.0, 15.0, 0.0];
        e
    }

    const WIDE: TransformerConfig = TransformerConfig {
        p_in_max: f64::INFINITY,
        p_out_max: f64::INFINITY,
    };

    #[test]
    fn single_hub_matches_standalone() {
        let cfg = storage_hub("a");
        let exo = series();
        let state = HubState::initial(&cfg);
        let res = solve_centralized(std::slice::from_ref(&cfg), std::slice::from_ref(&exo), &WIDE, 0, &[state]).unwrap();
        let (_, alone) = solve_autonomous(&cfg, &exo, &exo.mu_e, 0, &state).unwrap();
        assert!((res.objective - alone).abs() < 1e-6);
        assert!((res.hub_costs[0] - res.objective).abs() < 1e-6);
        let duals = dual_prices(&res, &exo.mu_e, &WIDE);
        assert!(duals.congestion.iter().all(|l| l.abs() < 1e-9));
    }

    #[test]
    fn identical_hubs_are_separable() {
        let (a, b) = (storage_hub("a"), storage_hub("b"));
        let exo = series();
        let states = [HubState::initial(&a), HubState::initial(&b)];
        let one = solve_centralized(std::slice::from_ref(&a), std::slice::from_ref(&exo), &WIDE, 0, &states[..1]).unwrap();
        let two = solve_centralized(&[a, b], &[exo.clone(), exo], &WIDE, 0, &states).unwrap();
        assert!((two.objective - 2.0 * one.objective).abs() < 1e-6);
    }

    #[test]
    fn congestion_yields_positive_multiplier() {
        let cfg = storage_hub("a");
        let exo = series();
        let tr = TransformerConfig {
            p_in_max: 22.0,
            p_out_max: 50.0,
        };
        let states = [HubState::initial(&cfg)];
        let res = solve_centralized(std::slice::from_ref(&cfg), std::slice::from_ref(&exo), &tr, 0, &states).unwrap();
        let duals = dual_prices(&res, &exo.mu_e, &tr);
        assert!(duals.congestion[0] > 0.0);
        assert!(res.transformer.iter().all(|p| *p <= 22.0 + 1e-9));
        let slope = perturbed_slope(&[cfg], &[exo], &tr, 0, &states, 0, 1e-3).unwrap();
        assert!((slope - res.balance_duals[0]).abs() <= 1e-3 * res.balance_duals[0].abs().max(1.0));
    }

    #[test]
    fn infeasible_coupling_is_named() {
        let cfg = HubConfig {
            g_chp_max: 0.0,
            ..storage_hub("a")
        };
        let mut exo = series();
        exo.p_res = vec![0.0; 4];
        let tr = TransformerConfig {
            p_in_max: 5.0,
            p_out_max: 5.0,
        };
        let states = [HubState::initial(&cfg)];
        match solve_centralized(&[cfg], &[exo], &tr, 0, &states) {
            Err(OracleError::Infeasible { period, shortfall }) => {
                assert!(period < 4);
                assert!(shortfall.abs() > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
