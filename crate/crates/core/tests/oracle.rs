mod common;

use ieh::hub::{solve_autonomous, HubState};
use ieh::market::TransformerConfig;
use ieh::oracle::{dual_prices, perturbed_slope, solve_centralized, OracleError};

fn roomy() -> TransformerConfig {
    TransformerConfig {
        p_in_max: 1.0e6,
        p_out_max: 1.0e6,
    }
}

#[test]
fn identical_hubs_cost_twice_one_hub() {
    let s = common::scenario("mini");
    let mut twin = s.fleet[0].clone();
    twin.id = format!("{}-twin", twin.id);
    let fleet = vec![s.fleet[0].clone(), twin];
    let exo = vec![s.truth[0].clone(), s.truth[0].clone()];
    let states: Vec<HubState> = fleet.iter().map(HubState::initial).collect();
    let one = solve_centralized(&fleet[..1], &exo[..1], &roomy(), 0, &states[..1]).unwrap();
    let two = solve_centralized(&fleet, &exo, &roomy(), 0, &states).unwrap();
    assert!((two.objective - 2.0 * one.objective).abs() <= 1e-6 * one.objective.abs().max(1.0));
}

#[test]
fn single_unconstrained_hub_matches_its_own_optimum() {
    let s = common::scenario("mini");
    for (cfg, exo) in s.fleet.iter().zip(&s.truth) {
        let state = HubState::initial(cfg);
        let (_, own) = solve_autonomous(cfg, exo, &exo.mu_e, 0, &state).unwrap();
        let joint = solve_centralized(std::slice::from_ref(cfg), std::slice::from_ref(exo), &roomy(), 0, &[state]).unwrap();
        assert!((joint.objective - own).abs() <= 1e-6, "{}: {} vs {own}", cfg.id, joint.objective);
        assert!(joint.balance_duals.iter().all(|y| y.abs() <= 1e-9));
    }
}

#[test]
fn hub_costs_add_up_to_the_objective() {
    let s = common::scenario("default");
    let states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    let res = solve_centralized(&s.fleet, &s.truth, &s.transformer, 0, &states).unwrap();
    let sum: f64 = res.hub_costs.iter().sum();
    assert!((sum - res.objective).abs() <= 1e-6 * res.objective.abs().max(1.0));
    for (t, p) in res.transformer.iter().enumerate() {
        let total: f64 = res.relaxed.iter().map(|r| r.periods[t].p_e).sum();
        assert!((total - p).abs() <= 1e-6);
        assert!(*p <= s.transformer.p_in_max + 1e-7 && *p >= -s.transformer.p_out_max - 1e-7);
    }
}

#[test]
fn balance_duals_match_finite_differences() {
    let mut s = common::scenario("mini");
    s.transformer = TransformerConfig {
        p_in_max: 120.0,
        p_out_max: 160.0,
    };
    let states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    let res = solve_centralized(&s.fleet, &s.truth, &s.transformer, 0, &states).unwrap();
    let duals = dual_prices(&res, s.mu_e(), &s.transformer);
    let congested: Vec<usize> = (0..s.periods()).filter(|t| duals.congestion[*t].abs() > 1e-6).collect();
    assert!(!congested.is_empty());
    for t in congested {
        for eps in [1e-3, -1e-3] {
            let slope = perturbed_slope(&s.fleet, &s.truth, &s.transformer, 0, &states, t, eps).unwrap();
            assert!((slope - res.balance_duals[t]).abs() <= 1e-3, "period {t}: {slope} vs {}", res.balance_duals[t]);
        }
        if res.transformer[t] > 0.0 {
            assert!(duals.local[t] > s.mu_e()[t]);
        } else {
            assert!(duals.local[t] < s.mu_e()[t]);
        }
    }
}

#[test]
fn closed_transformer_is_diagnosed() {
    let mut s = common::scenario("mini");
    for cfg in &mut s.fleet {
        cfg.g_chp_max = 0.0;
        cfg.p_ch_max = 0.0;
        cfg.p_dch_max = 0.0;
    }
    for exo in &mut s.truth {
        exo.p_res.iter_mut().for_each(|p| *p = 0.0);
    }
    let closed = TransformerConfig {
        p_in_max: 0.0,
        p_out_max: 0.0,
    };
    let states: Vec<HubState> = s.fleet.iter().map(HubState::initial).collect();
    match solve_centralized(&s.fleet, &s.truth, &closed, 0, &states) {
        Err(OracleError::Infeasible { period, shortfall }) => {
            assert_eq!(period, 0);
            assert!(shortfall.abs() > 0.0);
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
}
