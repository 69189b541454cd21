//! Storage energy-equivalent transformation.
//!
//! The relaxed hub problem may charge and discharge a store in the same
//! period. The transformation replaces each such pair by the single-direction
//! flow with the same net energy change and moves the freed electric power
//! into curtailment, so balances and the state-of-charge trajectory are
//! untouched. It fails only when curtailment would exceed the available
//! renewable output, which is exactly when [`exactness_condition`] fails.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hub::{
    build_autonomous_lp, ExogenousSeries, HubConfig, HubError, HubState, Schedule, Var,
};
use crate::lp::LpStatus;

/// Tolerance used when comparing the two sides of the exactness condition
/// and when checking curtailment against renewable output.
pub const CONDITION_TOL: f64 = 1e-9;

/// Largest horizon accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_PERIODS: usize = 6;

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error("curtailment bound violated after transformation in period {period}")]
    TransformInfeasible {
        period: usize,
        report: Box<EquivalenceReport>,
    },
    #[error("brute-force oracle refuses {periods} periods (limit {ORACLE_MAX_PERIODS})")]
    HorizonTooLarge { periods: usize },
    #[error("no charge/discharge mode pattern is feasible")]
    NoFeasiblePattern,
    #[error(transparent)]
    Hub(#[from] HubError),
}

/// Simultaneous charge and discharge powers of one store.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StorageFlow {
    pub p_ch: f64,
    pub p_dch: f64,
    pub eta_ch: f64,
    pub eta_dch: f64,
}

/// Net stored-energy change over one period of length `dt`, kWh.
pub fn net_energy_change(f: &StorageFlow, dt: f64) -> f64 {
    dt * (f.p_ch * f.eta_ch - f.p_dch / f.eta_dch)
}

/// Single-direction `(charge, discharge)` pair producing the energy change
/// `delta_s` over a period of length `dt`. One side is always exactly zero.
pub fn equivalent_pair(delta_s: f64, eta_ch: f64, eta_dch: f64, dt: f64) -> (f64, f64) {
    if delta_s >= 0.0 {
        (delta_s / (eta_ch * dt), 0.0)
    } else {
        (0.0, -delta_s * eta_dch / dt)
    }
}

/// Audit record for one period of one hub.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PeriodEquivalence {
    pub period: usize,
    pub ees_delta_s: f64,
    pub p_ch_relaxed: f64,
    pub p_dch_relaxed: f64,
    pub p_ch: f64,
    pub p_dch: f64,
    pub delta_p_dch: f64,
    pub p_curt_before: f64,
    pub p_curt_after: f64,
    pub tes_delta_s: f64,
    pub h_ch: f64,
    pub h_dch: f64,
    pub delta_h_dch: f64,
    pub h_curt_after: f64,
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub condition_satisfied: bool,
    /// Largest charge-discharge product after transformation (EES or TES).
    pub exclusivity_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EquivalenceReport {
    pub periods: Vec<PeriodEquivalence>,
}

impl EquivalenceReport {
    pub fn all_satisfied(&self) -> bool {
        self.periods.iter().all(|p| p.condition_satisfied)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.periods.iter().find(|p| !p.condition_satisfied).map(|p| p.period)
    }
}

/// Both sides of the exactness condition for one period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionCheck {
    pub period: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Evaluates, per period, whether the curtailment headroom covers the
/// power freed by collapsing simultaneous EES flows:
/// `(p_res - p_curt) / (1 - eta_ch*eta_dch) >= min(p_ch, p_dch / (eta_ch*eta_dch))`.
/// With lossless storage the condition is vacuous and reported satisfied.
pub fn exactness_condition(
    sched: &Schedule,
    cfg: &HubConfig,
    exo: &ExogenousSeries,
) -> Vec<ConditionCheck> {
    let rt = cfg.ees_round_trip();
    sched
        .periods
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let t = sched.start + k;
            let rhs = a.p_ch.min(a.p_dch / rt);
            if rt >= 1.0 {
                return ConditionCheck {
                    period: t,
                    lhs: f64::INFINITY,
                    rhs,
                    satisfied: true,
                };
            }
            let lhs = (exo.p_res[t] - a.p_curt) / (1.0 - rt);
            ConditionCheck {
                period: t,
                lhs,
                rhs,
                satisfied: rhs <= 0.0 || lhs >= rhs - CONDITION_TOL,
            }
        })
        .collect()
}

/// Largest EES charge-discharge product over the schedule.
pub fn ees_exclusivity_residual(sched: &Schedule) -> f64 {
    sched.periods.iter().map(|a| a.p_ch * a.p_dch).fold(0.0, f64::max)
}

/// Whether any period curtails renewable output.
pub fn curtails(sched: &Schedule, tol: f64) -> bool {
    sched.periods.iter().any(|a| a.p_curt > tol)
}

/// Restores charge/discharge exclusivity on a relaxed optimum.
pub fn transform_schedule(
    sched: &Schedule,
    cfg: &HubConfig,
    exo: &ExogenousSeries,
) -> Result<(Schedule, EquivalenceReport), EquivalenceError> {
    let dt = exo.dt;
    let checks = exactness_condition(sched, cfg, exo);
    let mut out = sched.clone();
    let mut report = EquivalenceReport::default();
    let mut violation = None;
    for (k, a) in out.periods.iter_mut().enumerate() {
        let t = sched.start + k;
        let ees = StorageFlow {
            p_ch: a.p_ch,
            p_dch: a.p_dch,
            eta_ch: cfg.eta_ch_ees,
            eta_dch: cfg.eta_dch_ees,
        };
        let tes = StorageFlow {
            p_ch: a.h_ch,
            p_dch: a.h_dch,
            eta_ch: cfg.eta_ch_tes,
            eta_dch: cfg.eta_dch_tes,
        };
        let ees_ds = net_energy_change(&ees, dt);
        let tes_ds = net_energy_change(&tes, dt);
        let p_curt_before = a.p_curt;
        let mut delta_p = 0.0;
        let mut delta_h = 0.0;
        // Exclusive periods are left bit-for-bit as they are.
        if a.p_ch * a.p_dch != 0.0 {
            let (ch, dch) = equivalent_pair(ees_ds, ees.eta_ch, ees.eta_dch, dt);
            delta_p = (dch - ch) - (a.p_dch - a.p_ch);
            a.p_ch = ch;
            a.p_dch = dch;
            a.p_curt += delta_p;
            let p_res = exo.p_res[t];
            if a.p_curt > p_res {
                if a.p_curt - p_res <= CONDITION_TOL * p_res.max(1.0) {
                    a.p_curt = p_res;
                } else if violation.is_none() {
                    violation = Some(t);
                }
            }
            if a.p_curt < 0.0 {
                a.p_curt = 0.0;
            }
        }
        if a.h_ch * a.h_dch != 0.0 {
            let (ch, dch) = equivalent_pair(tes_ds, tes.eta_ch, tes.eta_dch, dt);
            delta_h = (dch - ch) - (a.h_dch - a.h_ch);
            a.h_ch = ch;
            a.h_dch = dch;
            a.h_curt = (a.h_curt + delta_h).max(0.0);
        }
        let check = checks[k];
        report.periods.push(PeriodEquivalence {
            period: t,
            ees_delta_s: ees_ds,
            p_ch_relaxed: ees.p_ch,
            p_dch_relaxed: ees.p_dch,
            p_ch: a.p_ch,
            p_dch: a.p_dch,
            delta_p_dch: delta_p,
            p_curt_before,
            p_curt_after: a.p_curt,
            tes_delta_s: tes_ds,
            h_ch: a.h_ch,
            h_dch: a.h_dch,
            delta_h_dch: delta_h,
            h_curt_after: a.h_curt,
            condition_lhs: check.lhs,
            condition_rhs: check.rhs,
            condition_satisfied: check.satisfied,
            exclusivity_residual: (a.p_ch * a.p_dch).max(a.h_ch * a.h_dch),
        });
    }
    match violation {
        Some(period) => Err(EquivalenceError::TransformInfeasible {
            period,
            report: Box::new(report),
        }),
        None => Ok((out, report)),
    }
}

/// Exact optimum of the problem with exclusivity enforced, found by solving
/// one LP per charge/discharge mode pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    /// Bit `k` set means the EES may charge (not discharge) in period `k`.
    pub ees_mask: u32,
    pub tes_mask: u32,
    pub patterns_solved: usize,
}

pub fn brute_force_oracle(
    cfg: &HubConfig,
    exo: &ExogenousSeries,
    prices: &[f64],
    t_c: usize,
    state: &HubState,
) -> Result<OracleResult, EquivalenceError> {
    let periods = exo.len().saturating_sub(t_c);
    if periods > ORACLE_MAX_PERIODS {
        return Err(EquivalenceError::HorizonTooLarge { periods });
    }
    let (base, layout) = build_autonomous_lp(cfg, exo, prices, t_c, state)?;
    let patterns = 1u64 << (2 * periods);
    let best = (0..patterns)
        .into_par_iter()
        .map(|pattern| -> Result<Option<(f64, u64)>, EquivalenceError> {
            let ees_mask = pattern & ((1 << periods) - 1);
            let tes_mask = pattern >> periods;
            let mut lp = base.clone();
            for k in 0..periods {
                // Fix the excluded direction of each store to zero.
                let ees_off = if ees_mask >> k & 1 == 1 { Var::PDch } else { Var::PCh };
                let tes_off = if tes_mask >> k & 1 == 1 { Var::HDch } else { Var::HCh };
                lp.set_bounds(layout.col(k, ees_off), 0.0, 0.0);
                lp.set_bounds(layout.col(k, tes_off), 0.0, 0.0);
            }
            let sol = lp.solve().map_err(HubError::from)?;
            Ok((sol.status == LpStatus::Optimal).then_some((sol.objective, pattern)))
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (Some(x), Some(y)) => Some(if (y.0, y.1) < (x.0, x.1) { y } else { x }),
                    (x, None) => x,
                    (None, y) => y,
                })
            },
        )?;
    let (objective, pattern) = best.ok_or(EquivalenceError::NoFeasiblePattern)?;
    Ok(OracleResult {
        objective,
        ees_mask: (pattern & ((1 << periods) - 1)) as u32,
        tes_mask: (pattern >> periods) as u32,
        patterns_solved: patterns as usize,
    })
}
