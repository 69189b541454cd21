//! Upper-level transactive coordination.
//!
//! Hubs respond to broadcast local prices with optimal import plans and the
//! transformer responds by maximizing `(lambda - mu) * p` within its
//! capacity. Day-ahead clearing runs projected subgradient ascent on the
//! whole price vector; real-time clearing bisects on the current-period
//! price with the remaining periods held at the day-ahead forecast.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hub::{
    append_hub, decode_schedule, solve_autonomous, ExogenousSeries, HubConfig, HubError,
    HubState, Schedule, Var,
};
use crate::lp::LinearProgram;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("no bid received from hub {0}")]
    MissingBid(String),
    #[error("hub {hub}: {source}")]
    Hub {
        hub: String,
        #[source]
        source: HubError,
    },
    #[error("invalid market input: {0}")]
    Invalid(String),
    #[error("day-ahead clearing did not converge in {iterations} iterations (max residual {residual:.4} kW)")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Box<Vec<DaIteration>>,
    },
    #[error(
        "residual not monotone in period {period}: {residual_a:.6} kW at price {price_a:.6} \
         vs {residual_b:.6} kW at price {price_b:.6}"
    )]
    NonMonotone {
        period: usize,
        price_a: f64,
        residual_a: f64,
        price_b: f64,
        residual_b: f64,
    },
}

/// Local electricity prices for the remaining periods, kept inside
/// `[min, max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceVector {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl PriceVector {
    pub fn new(values: Vec<f64>, min: f64, max: f64) -> Result<Self, MarketError> {
        if !(min <= max) {
            return Err(MarketError::Invalid(format!("price bounds [{min}, {max}]")));
        }
        if let Some(t) = values.iter().position(|v| !(min..=max).contains(v)) {
            return Err(MarketError::Invalid(format!(
                "price {} at index {t} outside [{min}, {max}]",
                values[t]
            )));
        }
        Ok(Self { values, min, max })
    }

    /// Clamps arbitrary values into the bounds.
    pub fn projected(values: Vec<f64>, min: f64, max: f64) -> Self {
        let values = values.into_iter().map(|v| v.clamp(min, max)).collect();
        Self { values, min, max }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub p_in_max: f64,
    pub p_out_max: f64,
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<(), MarketError> {
        if self.p_in_max > 0.0 && self.p_out_max > 0.0 {
            Ok(())
        } else {
            Err(MarketError::Invalid("transformer limits must be positive".into()))
        }
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(-self.p_out_max, self.p_in_max)
    }
}

/// Profit-maximizing transformer exchange at one price.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransformerResponse {
    Point(f64),
    /// Indifferent: any power in the range earns the same profit.
    Range(f64, f64),
}

impl TransformerResponse {
    /// Power the transformer delivers against an aggregate demand. On the
    /// indifference range the quantity follows demand within capacity.
    pub fn cleared(&self, demand: f64) -> f64 {
        match *self {
            TransformerResponse::Point(p) => p,
            TransformerResponse::Range(lo, hi) => demand.clamp(lo, hi),
        }
    }
}

/// Transformer response per period. Prices within `band` of the utility
/// price count as indifferent.
pub fn transformer_response(
    prices: &[f64],
    mu_e: &[f64],
    cfg: &TransformerConfig,
    band: f64,
) -> Vec<TransformerResponse> {
    prices
        .iter()
        .zip(mu_e)
        .map(|(&lambda, &mu)| {
            if lambda > mu + band {
                TransformerResponse::Point(cfg.p_in_max)
            } else if lambda < mu - band {
                TransformerResponse::Point(-cfg.p_out_max)
            } else {
                TransformerResponse::Range(-cfg.p_out_max, cfg.p_in_max)
            }
        })
        .collect()
}

/// Aggregate imbalance `sum(bids) - p_tr`. Every hub in `hubs` must have bid.
pub fn residual(hubs: &[&str], bids: &BTreeMap<String, f64>, p_tr: f64) -> Result<f64, MarketError> {
    let mut total = 0.0;
    for hub in hubs {
        total += bids
            .get(*hub)
            .ok_or_else(|| MarketError::MissingBid(hub.to_string()))?;
    }
    Ok(total - p_tr)
}

/// A price-responsive participant. Prices cover the agent's remaining
/// horizon; the returned plan starts at its first period.
pub trait HubAgent: Sync {
    fn id(&self) -> &str;

    fn respond(&self, prices: &[f64]) -> Result<Schedule, MarketError>;

    /// Optimal plan with the first-period grid exchange fixed to `import`.
    fn respond_fixed(&self, prices: &[f64], import: f64) -> Result<Schedule, MarketError>;
}

/// Hub agent backed by the autonomous scheduling LP.
#[derive(Clone, Debug)]
pub struct LpHub<'a> {
    pub cfg: &'a HubConfig,
    pub exo: &'a ExogenousSeries,
    pub t_c: usize,
    pub state: HubState,
}

impl LpHub<'_> {
    fn wrap(&self, source: HubError) -> MarketError {
        MarketError::Hub {
            hub: self.cfg.id.clone(),
            source,
        }
    }
}

impl HubAgent for LpHub<'_> {
    fn id(&self) -> &str {
        &self.cfg.id
    }

    fn respond(&self, prices: &[f64]) -> Result<Schedule, MarketError> {
        solve_autonomous(self.cfg, self.exo, prices, self.t_c, &self.state)
            .map(|(s, _)| s)
            .map_err(|e| self.wrap(e))
    }

    fn respond_fixed(&self, prices: &[f64], import: f64) -> Result<Schedule, MarketError> {
        let mut lp = LinearProgram::new();
        let layout = append_hub(&mut lp, self.cfg, self.exo, prices, self.t_c, &self.state)
            .map_err(|e| self.wrap(e))?;
        lp.set_bounds(layout.col(0, Var::PE), import, import);
        let sol = lp.solve().map_err(|e| self.wrap(e.into()))?;
        decode_schedule(&sol, &layout).map_err(|e| self.wrap(e))
    }
}

/// Tunables shared by both clearing stages.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarketParams {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Largest acceptable aggregate imbalance, kW.
    pub balance_tol: f64,
    /// Real-time bisection stops once the price bracket is this narrow.
    pub price_tol: f64,
    /// Initial day-ahead step, currency/kWh per kW of imbalance.
    pub step0: f64,
    /// Day-ahead step decay constant: step_k = step0 / (1 + k / step_decay).
    pub step_decay: f64,
    pub max_iters: usize,
    /// Day-ahead prices this close to the utility price leave the
    /// transformer indifferent.
    pub indifference_band: f64,
}

impl MarketParams {
    pub fn defaults_for(tr: &TransformerConfig) -> Self {
        let (lambda_min, lambda_max) = (0.0, 1.5);
        let width = lambda_max - lambda_min;
        Self {
            lambda_min,
            lambda_max,
            balance_tol: 0.005 * tr.p_in_max,
            price_tol: width / 512.0,
            step0: 0.1 * width / tr.p_in_max,
            step_decay: 50.0,
            max_iters: 5000,
            indifference_band: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let ok = self.lambda_min < self.lambda_max
            && self.balance_tol > 0.0
            && self.price_tol > 0.0
            && self.step0 > 0.0
            && self.step_decay > 0.0
            && self.indifference_band >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(MarketError::Invalid(format!("market parameters {self:?}")))
        }
    }

    pub fn step(&self, k: usize) -> f64 {
        self.step0 / (1.0 + k as f64 / self.step_decay)
    }
}

/// One day-ahead round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DaIteration {
    pub iteration: usize,
    pub prices: Vec<f64>,
    /// Raw imbalance of this round, kW per period.
    pub residual: Vec<f64>,
    /// Largest imbalance of the window-averaged bids, kW.
    pub averaged_residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct DayAheadResult {
    /// Forecast local prices: the average of prices broadcast over the
    /// final averaging window.
    pub prices: PriceVector,
    /// Window-averaged hub plans.
    pub schedules: Vec<Schedule>,
    pub transformer: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: usize,
    /// Largest per-round price change within the final window.
    pub final_step: f64,
    pub trace: Vec<DaIteration>,
}

fn gather<A: HubAgent>(agents: &[A], prices: &[f64]) -> Result<Vec<Schedule>, MarketError> {
    agents.par_iter().map(|a| a.respond(prices)).collect()
}

fn demand(plans: &[Schedule], horizon: usize) -> Vec<f64> {
    let mut total = vec![0.0; horizon];
    for plan in plans {
        for (t, a) in plan.periods.iter().enumerate() {
            total[t] += a.p_e;
        }
    }
    total
}

/// Running mean over a window that restarts whenever the round count
/// doubles, so it always spans at least the latter half of the rounds.
struct WindowAverage {
    next_reset: usize,
    count: usize,
    prices: Vec<f64>,
    transformer: Vec<f64>,
    schedules: Vec<Schedule>,
    max_update: f64,
}

impl WindowAverage {
    fn push(&mut self, k: usize, prices: &[f64], transformer: &[f64], plans: &[Schedule]) {
        if k == 0 || k == self.next_reset {
            if k > 0 {
                self.next_reset *= 2;
            }
            self.count = 0;
            self.max_update = 0.0;
        }
        self.count += 1;
        if self.count == 1 {
            self.prices = prices.to_vec();
            self.transformer = transformer.to_vec();
            self.schedules = plans.to_vec();
            return;
        }
        let w = 1.0 / self.count as f64;
        let mix = |avg: &mut [f64], new: &[f64]| {
            for (a, n) in avg.iter_mut().zip(new) {
                *a += w * (n - *a);
            }
        };
        mix(&mut self.prices, prices);
        mix(&mut self.transformer, transformer);
        for (avg, new) in self.schedules.iter_mut().zip(plans) {
            *avg = new.blend(avg, w);
        }
    }
}

/// Day-ahead clearing over the full price vector.
pub fn day_ahead_clear<A: HubAgent>(
    agents: &[A],
    mu_e: &[f64],
    tr: &TransformerConfig,
    params: &MarketParams,
) -> Result<DayAheadResult, MarketError> {
    params.validate()?;
    tr.validate()?;
    let horizon = mu_e.len();
    let mut prices: Vec<f64> = mu_e
        .iter()
        .map(|m| m.clamp(params.lambda_min, params.lambda_max))
        .collect();
    let mut window = WindowAverage {
        next_reset: 1,
        count: 0,
        prices: Vec::new(),
        transformer: Vec::new(),
        schedules: Vec::new(),
        max_update: 0.0,
    };
    let mut trace = Vec::new();
    for k in 0..params.max_iters {
        let plans = gather(agents, &prices)?;
        let load = demand(&plans, horizon);
        let response = transformer_response(&prices, mu_e, tr, params.indifference_band);
        let p_tr: Vec<f64> = response.iter().zip(&load).map(|(r, d)| r.cleared(*d)).collect();
        let dp: Vec<f64> = load.iter().zip(&p_tr).map(|(d, p)| d - p).collect();
        window.push(k, &prices, &p_tr, &plans);
        let avg_load = demand(&window.schedules, horizon);
        let avg_dp: Vec<f64> = avg_load
            .iter()
            .zip(&window.transformer)
            .map(|(d, p)| d - p)
            .collect();
        let avg_norm = avg_dp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let step = params.step(k);
        trace.push(DaIteration {
            iteration: k,
            prices: prices.clone(),
            residual: dp.clone(),
            averaged_residual: avg_norm,
            step,
        });
        if avg_norm <= params.balance_tol {
            return Ok(DayAheadResult {
                prices: PriceVector::projected(
                    window.prices.clone(),
                    params.lambda_min,
                    params.lambda_max,
                ),
                schedules: window.schedules,
                transformer: window.transformer,
                residual: avg_dp,
                iterations: k,
                final_step: window.max_update,
                trace,
            });
        }
        let mut update = 0.0f64;
        for (p, d) in prices.iter_mut().zip(&dp) {
            let next = (*p + step * d).clamp(params.lambda_min, params.lambda_max);
            update = update.max((next - *p).abs());
            *p = next;
        }
        window.max_update = window.max_update.max(update);
    }
    let residual = trace.last().map_or(0.0, |it| it.averaged_residual);
    Err(MarketError::NonConvergence {
        iterations: params.max_iters,
        residual,
        trace: Box::new(trace),
    })
}

/// How the real-time price was settled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Settlement {
    /// Demand fits the transformer at the utility price.
    UtilityPrice,
    /// Capacity binds; quantities allocated between the bracket ends.
    Congested,
    /// Residual is zero across the whole price range.
    Flat,
    /// Demand exceeds supply even at the price ceiling.
    CeilingBound,
    /// Supply exceeds demand even at the price floor.
    FloorBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClearingRecord {
    pub period: usize,
    pub price: f64,
    pub hub_power: Vec<f64>,
    pub transformer: f64,
    pub residual: f64,
    /// Bisection halvings of the price bracket.
    pub iterations: usize,
    /// Price broadcasts, including the two priming evaluations.
    pub evaluations: usize,
    pub converged: bool,
    pub settlement: Settlement,
    pub bracket: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct RealTimeOutcome {
    pub record: ClearingRecord,
    /// Committed plan of each hub over its remaining horizon.
    pub plans: Vec<Schedule>,
}

struct Evaluation {
    price: f64,
    plans: Vec<Schedule>,
    demand: f64,
    residual: f64,
}

/// Real-time clearing of period `period`. `tail` holds the day-ahead
/// forecast prices for the remaining horizon (its first entry is the
/// forecast for the current period and is replaced during bisection).
pub fn real_time_clear<A: HubAgent>(
    agents: &[A],
    tail: &[f64],
    mu: f64,
    tr: &TransformerConfig,
    params: &MarketParams,
    period: usize,
) -> Result<RealTimeOutcome, MarketError> {
    params.validate()?;
    tr.validate()?;
    if tail.is_empty() {
        return Err(MarketError::Invalid("empty price horizon".into()));
    }
    let tol = params.balance_tol;
    let evaluations = std::cell::Cell::new(0);
    let eval = |price: f64| -> Result<Evaluation, MarketError> {
        evaluations.set(evaluations.get() + 1);
        let mut prices = tail.to_vec();
        prices[0] = price;
        let plans = gather(agents, &prices)?;
        let demand: f64 = plans.iter().map(|p| p.periods[0].p_e).sum();
        let response = transformer_response(&[price], &[mu], tr, 1e-12)[0];
        let residual = demand - response.cleared(demand);
        Ok(Evaluation {
            price,
            plans,
            demand,
            residual,
        })
    };
    let non_monotone = |a: &Evaluation, b: &Evaluation| MarketError::NonMonotone {
        period,
        price_a: a.price,
        residual_a: a.residual,
        price_b: b.price,
        residual_b: b.residual,
    };

    let mut hi = eval(params.lambda_max)?;
    let mut lo = eval(params.lambda_min)?;
    if lo.residual < hi.residual - tol {
        return Err(non_monotone(&lo, &hi));
    }
    let bracket_of = |lo: &Evaluation, hi: &Evaluation| (lo.price, hi.price);
    let finish = |ev: Evaluation, settlement, iterations, evaluations, bracket| {
        let transformer = match settlement {
            Settlement::UtilityPrice | Settlement::Flat => tr.clamp(ev.demand),
            _ => transformer_response(&[ev.price], &[mu], tr, 1e-12)[0].cleared(ev.demand),
        };
        let residual = ev.demand - transformer;
        let record = ClearingRecord {
            period,
            price: ev.price,
            hub_power: ev.plans.iter().map(|p| p.periods[0].p_e).collect(),
            transformer,
            residual,
            iterations,
            evaluations,
            converged: residual.abs() <= tol
                && (params.lambda_min..=params.lambda_max).contains(&ev.price),
            settlement,
            bracket,
        };
        RealTimeOutcome {
            record,
            plans: ev.plans,
        }
    };

    if lo.residual.abs() <= tol && hi.residual.abs() <= tol {
        let ev = eval(tail[0].clamp(params.lambda_min, params.lambda_max))?;
        let b = bracket_of(&lo, &hi);
        return Ok(finish(ev, Settlement::Flat, 0, evaluations.get(), b));
    }
    if hi.residual > tol {
        let b = bracket_of(&lo, &hi);
        return Ok(finish(hi, Settlement::CeilingBound, 0, evaluations.get(), b));
    }
    if lo.residual < -tol {
        let b = bracket_of(&lo, &hi);
        return Ok(finish(lo, Settlement::FloorBound, 0, evaluations.get(), b));
    }

    let mut iterations = 0;
    while hi.price - lo.price > params.price_tol * (1.0 + 1e-12) {
        let mid = eval(0.5 * (lo.price + hi.price))?;
        if mid.residual > lo.residual + tol || mid.residual < hi.residual - tol {
            let other = if mid.residual > lo.residual + tol { &lo } else { &hi };
            return Err(non_monotone(other, &mid));
        }
        iterations += 1;
        if mid.residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bracket = bracket_of(&lo, &hi);

    // Settle quantity: at the utility price when demand fits, otherwise
    // interpolate between two evaluations straddling the binding limit.
    let (a, b, target) = if lo.price <= mu && mu <= hi.price {
        let at_mu = eval(mu)?;
        if at_mu.demand <= tr.p_in_max + tol && at_mu.demand >= -tr.p_out_max - tol {
            return Ok(finish(at_mu, Settlement::UtilityPrice, iterations, evaluations.get(), bracket));
        }
        if at_mu.demand > tr.p_in_max {
            (at_mu, hi, tr.p_in_max)
        } else {
            (lo, at_mu, -tr.p_out_max)
        }
    } else if mu < lo.price {
        (lo, hi, tr.p_in_max)
    } else {
        (lo, hi, -tr.p_out_max)
    };
    let price = 0.5 * (a.price + b.price);
    let theta = if a.demand - b.demand > 0.0 {
        ((target - b.demand) / (a.demand - b.demand)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let mut prices = tail.to_vec();
    prices[0] = price;
    let plans: Vec<Schedule> = agents
        .par_iter()
        .zip(a.plans.par_iter().zip(&b.plans))
        .map(|(agent, (pa, pb))| {
            let import = theta * pa.periods[0].p_e + (1.0 - theta) * pb.periods[0].p_e;
            agent
                .respond_fixed(&prices, import)
                .or_else(|_| Ok(pa.blend(pb, theta)))
        })
        .collect::<Result<_, MarketError>>()?;
    let demand = plans.iter().map(|p| p.periods[0].p_e).sum();
    let ev = Evaluation {
        price,
        plans,
        demand,
        residual: 0.0,
    };
    let mut outcome = finish(ev, Settlement::Congested, iterations, evaluations.get(), bracket);
    outcome.record.transformer = demand;
    outcome.record.residual = demand - target;
    outcome.record.converged = outcome.record.residual.abs() <= tol;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hub::PeriodAction;

    /// Price-responsive stand-in: demand per period is a step function of
    /// that period's price.
    struct StepHub {
        id: String,
        high: f64,
        low: f64,
        threshold: f64,
    }

    impl HubAgent for StepHub {
        fn id(&self) -> &str {
            &self.id
        }

        fn respond(&self, prices: &[f64]) -> Result<Schedule, MarketError> {
            let periods = prices
                .iter()
                .map(|&p| PeriodAction {
                    p_e: if p < self.threshold { self.high } else { self.low },
                    ..Default::default()
                })
                .collect();
            Ok(Schedule { start: 0, periods })
        }

        fn respond_fixed(&self, prices: &[f64], import: f64) -> Result<Schedule, MarketError> {
            let mut s = self.respond(prices)?;
            s.periods[0].p_e = import;
            Ok(s)
        }
    }

    fn fixed(id: &str, load: f64) -> StepHub {
        StepHub {
            id: id.into(),
            high: load,
            low: load,
            threshold: 0.0,
        }
    }

    fn tr() -> TransformerConfig {
        TransformerConfig {
            p_in_max: 100.0,
            p_out_max: 80.0,
        }
    }

    #[test]
    fn transformer_examples() {
        let cfg = tr();
        let r = transformer_response(&[1.0, 0.2, 0.5], &[0.5, 0.5, 0.5], &cfg, 1e-9);
        assert_eq!(r[0], TransformerResponse::Point(100.0));
        assert_eq!(r[1], TransformerResponse::Point(-80.0));
        assert_eq!(r[2], TransformerResponse::Range(-80.0, 100.0));
        assert_eq!(r[2].cleared(500.0), 100.0);
        assert_eq!(r[2].cleared(12.0), 12.0);
    }

    #[test]
    fn residual_examples() {
        let bids: BTreeMap<String, f64> = [("a".to_string(), 3.0), ("b".to_string(), -1.0)].into();
        assert_eq!(residual(&["a", "b"], &bids, 2.0).unwrap(), 0.0);
        let bids: BTreeMap<String, f64> = [("a".to_string(), 5.0)].into();
        assert_eq!(residual(&["a"], &bids, 2.0).unwrap(), 3.0);
        match residual(&["a", "ghost"], &bids, 2.0) {
            Err(MarketError::MissingBid(h)) => assert_eq!(h, "ghost"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn day_ahead_without_hubs() {
        let agents: Vec<StepHub> = Vec::new();
        let params = MarketParams::defaults_for(&tr());
        let res = day_ahead_clear(&agents, &[0.5, 0.7], &tr(), &params).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.residual.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn day_ahead_uncongested_keeps_utility_price() {
        let agents = vec![fixed("a", 40.0)];
        let mu = [0.3, 0.9];
        let params = MarketParams::defaults_for(&tr());
        let res = day_ahead_clear(&agents, &mu, &tr(), &params).unwrap();
        assert_eq!(res.prices.values, mu.to_vec());
    }

    #[test]
    fn day_ahead_congestion_raises_price() {
        // Cheap-hour demand of 150 kW drops to 60 kW above 0.8.
        let agents = vec![StepHub {
            id: "a".into(),
            high: 150.0,
            low: 60.0,
            threshold: 0.8,
        }];
        let params = MarketParams::defaults_for(&tr());
        let res = day_ahead_clear(&agents, &[0.3], &tr(), &params).unwrap();
        assert!(res.prices.values[0] > 0.3);
        assert!((res.prices.values[0] - 0.8).abs() < 0.01);
        assert!(res.transformer[0] <= 100.0 + params.balance_tol);
    }

    #[test]
    fn day_ahead_reports_nonconvergence() {
        let agents = vec![StepHub {
            id: "a".into(),
            high: 150.0,
            low: 60.0,
            threshold: 0.8,
        }];
        let mut params = MarketParams::defaults_for(&tr());
        params.max_iters = 1;
        match day_ahead_clear(&agents, &[0.3], &tr(), &params) {
            Err(MarketError::NonConvergence { trace, .. }) => assert_eq!(trace.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn real_time_fixed_demand() {
        let agents = vec![fixed("a", 10.0)];
        let params = MarketParams::defaults_for(&tr());
        let out = real_time_clear(&agents, &[0.5], 0.5, &tr(), &params, 0).unwrap();
        assert_eq!(out.record.settlement, Settlement::UtilityPrice);
        assert_eq!(out.record.price, 0.5);
        assert_eq!(out.record.hub_power, vec![10.0]);
        assert_eq!(out.record.iterations, 9);
        assert!(out.record.converged);
    }

    #[test]
    fn real_time_congested_allocation() {
        let agents = vec![
            StepHub {
                id: "a".into(),
                high: 90.0,
                low: 30.0,
                threshold: 0.7,
            },
            fixed("b", 40.0),
        ];
        let params = MarketParams::defaults_for(&tr());
        let out = real_time_clear(&agents, &[0.3], 0.3, &tr(), &params, 0).unwrap();
        let rec = &out.record;
        assert_eq!(rec.settlement, Settlement::Congested);
        assert!((rec.transformer - 100.0).abs() < 1e-9);
        assert!((rec.hub_power.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!(rec.price > 0.3 && (rec.price - 0.7).abs() < 0.003);
        assert_eq!(rec.iterations, 9);
        assert_eq!(rec.evaluations, 11);
    }

    #[test]
    fn real_time_detects_non_monotone_residual() {
        // Demand rising with price violates the bracket.
        let agents = vec![StepHub {
            id: "a".into(),
            high: 0.0,
            low: 90.0,
            threshold: 0.7,
        }];
        let params = MarketParams::defaults_for(&tr());
        let err = real_time_clear(&agents, &[0.3], 0.3, &tr(), &params, 4).unwrap_err();
        assert!(matches!(err, MarketError::NonMonotone { period: 4, .. }));
    }

    #[test]
    fn real_time_ceiling_bound() {
        let agents = vec![fixed("a", 150.0)];
        let params = MarketParams::defaults_for(&tr());
        let out = real_time_clear(&agents, &[0.3], 0.3, &tr(), &params, 0).unwrap();
        assert_eq!(out.record.settlement, Settlement::CeilingBound);
        assert_eq!(out.record.price, params.lambda_max);
        assert!(!out.record.converged);
    }

    #[test]
    fn price_vector_bounds() {
        assert!(PriceVector::new(vec![0.2, 1.6], 0.0, 1.5).is_err());
        let p = PriceVector::projected(vec![-1.0, 0.4, 9.0], 0.0, 1.5);
        assert_eq!(p.values, vec![0.0, 0.4, 1.5]);
    }
}
