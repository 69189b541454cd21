mod common;

use ieh::lp::{check_feasible, LpStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let lp = common::random_bounded_lp(&mut rng, 4, 6);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        let oracle = common::vertex_enumeration(&lp).expect("feasible by construction");
        assert!((sol.objective - oracle).abs() <= 1e-6, "case {case}: {} vs {}", sol.objective, oracle);
        assert!(check_feasible(&lp, &sol.x, 1e-7).unwrap().is_feasible());
    }
}

#[test]
fn weak_duality_and_complementary_slackness() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let lp = common::random_bounded_lp(&mut rng, 5, 7);
        let sol = lp.solve().unwrap();
        // Dual objective with bound multipliers folded into reduced costs.
        let mut dual_obj: f64 = lp.rhs().iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
        for j in 0..lp.num_vars() {
            let d = sol.reduced_costs[j];
            dual_obj += if d > 0.0 { d * lp.lower()[j] } else { d * lp.upper()[j] };
        }
        assert!(dual_obj <= sol.objective + 1e-6);
        assert!((dual_obj - sol.objective).abs() <= 1e-6);
        for i in 0..lp.num_rows() {
            let slack = lp.rhs()[i] - lp.row_activity(i, &sol.x);
            let scale = 1.0 + lp.row(i).iter().map(|(_, a)| a.abs()).sum::<f64>();
            assert!(sol.duals[i].abs() * slack.abs() / scale <= 1e-6);
        }
    }
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lp = common::random_bounded_lp(&mut rng, 6, 8);
    let a = lp.solve().unwrap();
    let b = lp.solve().unwrap();
    assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}
