mod common;

use std::sync::OnceLock;

use ieh::hub::ExogenousSeries;
use ieh::market::{MarketParams, TransformerConfig};
use ieh::oracle::clairvoyant;
use ieh::scenario::{generate_forecasts, rolling_forecast, run_day, DayResult, ForecastModel, Scenario, Stage};
use proptest::prelude::*;

fn default_day() -> &'static (Scenario, DayResult) {
    static DAY: OnceLock<(Scenario, DayResult)> = OnceLock::new();
    DAY.get_or_init(|| {
        let s = common::scenario("default");
        let day = run_day(&s).unwrap();
        (s, day)
    })
}

fn flat(value: f64, n: usize) -> ExogenousSeries {
    ExogenousSeries {
        p_res: vec![value; n],
        l_e: vec![value; n],
        l_th: vec![value; n],
        mu_e: vec![0.5; n],
        mu_g: vec![0.3; n],
        dt: 1.0,
    }
}

fn model(w_res: f64, w_load: f64, seed: u64) -> ForecastModel {
    ForecastModel {
        da_err_res: w_res,
        id_err_res: w_res / 3.0,
        rt_err_res: w_res / 6.0,
        da_err_load: w_load,
        id_err_load: w_load / 2.5,
        rt_err_load: w_load / 6.0,
        seed,
    }
}

proptest! {
    #[test]
    fn forecasts_stay_inside_their_bands(seed in any::<u64>(), hub in 0usize..20, t_c in 0usize..24) {
        let truth = flat(100.0, 24);
        let m = model(0.30, 0.20, seed);
        for stage in [Stage::DayAhead, Stage::IntraDay, Stage::RealTime] {
            let (w_res, w_load) = m.widths(stage);
            let f = generate_forecasts(&truth, &m, stage, hub, t_c);
            for t in 0..24 {
                prop_assert!(f.p_res[t] >= 100.0 * (1.0 - w_res) && f.p_res[t] <= 100.0 * (1.0 + w_res));
                prop_assert!(f.l_e[t] >= 100.0 * (1.0 - w_load) && f.l_e[t] <= 100.0 * (1.0 + w_load));
                prop_assert!(f.l_th[t] >= 100.0 * (1.0 - w_load) && f.l_th[t] <= 100.0 * (1.0 + w_load));
            }
            prop_assert_eq!(&f.mu_e, &truth.mu_e);
            prop_assert_eq!(&f, &generate_forecasts(&truth, &m, stage, hub, t_c));
        }
        let r = rolling_forecast(&truth, &m, hub, t_c);
        for t in 0..t_c {
            prop_assert_eq!(r.l_e[t], truth.l_e[t]);
        }
    }
}

#[test]
fn zero_width_forecasts_are_exact() {
    let truth = flat(42.0, 6);
    let f = generate_forecasts(&truth, &ForecastModel::exact(5), Stage::DayAhead, 0, 0);
    assert_eq!(f, truth);
}

#[test]
fn committed_day_balances_against_truth() {
    let (s, day) = default_day();
    for (n, (cfg, truth)) in s.fleet.iter().zip(&s.truth).enumerate() {
        let periods = &day.committed[n];
        assert_eq!(periods.len(), 24);
        let mut ees = cfg.ees_soc_init * cfg.ees_capacity;
        for (t, c) in periods.iter().enumerate() {
            let a = &c.action;
            let r = &c.reconciliation;
            let e = a.electric_residual(cfg, truth.p_res[t], truth.l_e[t]) + r.unserved_e - r.spilled_e;
            let h = a.thermal_residual(cfg, truth.l_th[t]) + r.unserved_th;
            assert!(e.abs() <= 1e-6 && h.abs() <= 1e-6, "hub {n} period {t}: {e} {h}");
            ees += truth.dt * (cfg.eta_ch_ees * a.p_ch - a.p_dch / cfg.eta_dch_ees);
            assert!((ees - a.soc_ees).abs() <= 1e-9, "hub {n} period {t}");
            assert_eq!(a.p_ch * a.p_dch, 0.0);
        }
        let served: f64 = periods.iter().map(|c| c.action.l_e_sl * truth.dt).sum();
        let served_th: f64 = periods.iter().map(|c| c.action.l_th_sl * truth.dt).sum();
        assert!((served - cfg.l_e_sl_total).abs() <= 1e-6, "hub {n}: {served}");
        assert!((served_th - cfg.l_th_sl_total).abs() <= 1e-6, "hub {n}: {served_th}");
    }
}

#[test]
fn default_day_respects_the_transformer_and_logs_conditions() {
    let (s, day) = default_day();
    for (t, p) in day.transformer.iter().enumerate() {
        assert!(*p <= s.transformer.p_in_max + s.market.balance_tol, "period {t}: {p}");
        assert!(*p >= -s.transformer.p_out_max - s.market.balance_tol, "period {t}: {p}");
    }
    assert_eq!(day.condition_satisfied_count(), (360, 360));
    assert_eq!(day.records.len(), 24);
}

#[test]
fn day_reruns_identically_and_seed_changes_forecasts() {
    let s = common::scenario("mini");
    let mut noisy = s.clone();
    noisy.forecast = model(0.30, 0.20, 42);
    let a = run_day(&noisy).unwrap();
    let b = run_day(&noisy).unwrap();
    assert_eq!(a.committed, b.committed);
    assert_eq!(a.records, b.records);
    noisy.forecast.seed = 43;
    let c = run_day(&noisy).unwrap();
    assert_ne!(a.committed, c.committed);
    assert!(c.committed.iter().flatten().all(|p| p.action.p_ch * p.action.p_dch == 0.0));
}

#[test]
fn exact_forecasts_without_congestion_track_the_clairvoyant_optimum() {
    let mut s = common::scenario("deterministic");
    s.transformer = TransformerConfig {
        p_in_max: 1.0e5,
        p_out_max: 1.0e5,
    };
    s.market = MarketParams::defaults_for(&s.transformer);
    let day = run_day(&s).unwrap();
    let oracle = clairvoyant(&s).unwrap();
    let gap = (day.total_cost() - oracle.objective) / oracle.objective.abs();
    assert!(gap.abs() <= 0.005, "gap {gap}");
}
