mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ieh::equivalence::{brute_force_oracle, curtails, ees_exclusivity_residual, exactness_condition, transform_schedule};
use ieh::hub::{evaluate_cost, solve_autonomous, HubState};
use ieh::lp::LpStatus;
use ieh::market::Settlement;
use ieh::oracle::{clairvoyant, dual_prices, rolling};
use ieh::scenario::{run_day, run_day_ahead};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Verdict {
    criterion: u8,
    pass: bool,
    detail: String,
}

fn report(criterion: u8, pass: bool, started: Instant, detail: String) -> Verdict {
    let line = format!("criterion {criterion}: {} ({detail}; {:.1}s)", if pass { "PASS" } else { "FAIL" }, started.elapsed().as_secs_f64());
    println!("{line}");
    Verdict {
        criterion,
        pass,
        detail,
    }
}

fn relaxation_exactness() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut satisfied, mut exact, mut nontrivial, mut subset, mut subset_ok) = (0, 0, 0, 0, 0);
    let mut worst = 0.0f64;
    let mut attempts = 0;
    while satisfied < 240 && attempts < 5000 {
        attempts += 1;
        let (cfg, exo) = common::random_hub_instance(&mut rng);
        let state = HubState::initial(&cfg);
        let Ok((relaxed, _)) = solve_autonomous(&cfg, &exo, &exo.mu_e, 0, &state) else {
            continue;
        };
        if !curtails(&relaxed, 1e-9) {
            subset += 1;
            if ees_exclusivity_residual(&relaxed) <= 1e-9 {
                subset_ok += 1;
            }
        }
        if !exactness_condition(&relaxed, &cfg, &exo).iter().all(|c| c.satisfied) {
            continue;
        }
        satisfied += 1;
        if ees_exclusivity_residual(&relaxed) > 1e-9 {
            nontrivial += 1;
        }
        let (out, _) = transform_schedule(&relaxed, &cfg, &exo).expect("condition holds");
        let transformed = evaluate_cost(&out, &exo, &exo.mu_e).unwrap().total;
        let oracle = brute_force_oracle(&cfg, &exo, &exo.mu_e, 0, &state).unwrap();
        let gap = (transformed - oracle.objective).abs();
        worst = worst.max(gap);
        if gap <= 1e-6 {
            exact += 1;
        }
    }
    let in_time = started.elapsed() <= Duration::from_secs(120);
    let pass = satisfied >= 200 && exact == satisfied && subset_ok == subset && in_time;
    report(
        1,
        pass,
        started,
        format!("{exact}/{satisfied} instances exact, {nontrivial} with simultaneous flows, worst gap {worst:.2e}, exclusive without curtailment {subset_ok}/{subset}"),
    )
}

fn distributed_matches_centralized() -> Verdict {
    let started = Instant::now();
    let s = common::scenario("deterministic");
    let day = run_day(&s).unwrap();
    let central = rolling(&s).unwrap();
    let gap = (day.total_cost() - central.total_cost()) / central.total_cost().abs();
    let pass = gap.abs() <= 0.005 && started.elapsed() <= Duration::from_secs(300);
    report(
        2,
        pass,
        started,
        format!("distributed {:.2}, centralized {:.2}, gap {:.4}%", day.total_cost(), central.total_cost(), 100.0 * gap),
    )
}

fn real_time_iteration_count() -> Verdict {
    let started = Instant::now();
    let base = common::scenario("default");
    let mut counts = BTreeMap::new();
    for n in [5, 10, 20] {
        let day = run_day(&base.replicate(n)).unwrap();
        let seen: Vec<usize> = day.records.iter().map(|r| r.iterations).collect();
        counts.insert(n, (seen.iter().min().copied(), seen.iter().max().copied()));
    }
    let pass = counts.values().all(|c| *c == (Some(9), Some(9))) && started.elapsed() <= Duration::from_secs(180);
    report(3, pass, started, format!("min/max iterations by fleet size {counts:?}"))
}

fn congestion_containment_and_monitoring() -> (Verdict, Verdict) {
    let started = Instant::now();
    let s = common::scenario("default");
    let day = run_day(&s).unwrap();
    let tol = s.market.balance_tol;
    let within = day
        .transformer
        .iter()
        .filter(|p| **p <= s.transformer.p_in_max + tol && **p >= -s.transformer.p_out_max - tol)
        .count();
    let rent = day
        .records
        .iter()
        .filter(|r| r.settlement == Settlement::Congested && r.price > s.mu_e()[r.period])
        .count();
    let peak = day.transformer.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let containment = report(
        4,
        within == 24 && rent > 0,
        started,
        format!("{within}/24 periods within limits, peak {peak:.1} kW of {}, {rent} congested periods priced above utility", s.transformer.p_in_max),
    );

    let started = Instant::now();
    let (ok, total) = day.condition_satisfied_count();
    let adv = common::scenario("adversarial");
    let (cfg, exo) = (&adv.fleet[0], &adv.truth[0]);
    let (relaxed, _) = solve_autonomous(cfg, exo, &exo.mu_e, 0, &HubState::initial(cfg)).unwrap();
    let fired = exactness_condition(&relaxed, cfg, exo).iter().filter(|c| !c.satisfied).count();
    let rejected = transform_schedule(&relaxed, cfg, exo).is_err();
    let monitoring = report(
        5,
        ok == total && fired > 0 && rejected,
        started,
        format!("default {ok}/{total} hub-periods satisfied, adversarial {fired} violations, transform rejected {rejected}"),
    );
    (containment, monitoring)
}

fn lp_solver_correctness() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (mut matched, mut cases) = (0, 0);
    let (mut duals_ok, mut duals_checked) = (0, 0);
    for k in 0..600 {
        let (n, m) = (3 + k % 3, 4 + k % 4);
        let lp = common::random_bounded_lp(&mut rng, n, m);
        let sol = lp.solve().unwrap();
        let oracle = common::vertex_enumeration(&lp).expect("feasible by construction");
        cases += 1;
        if sol.status == LpStatus::Optimal && (sol.objective - oracle).abs() <= 1e-6 {
            matched += 1;
        }
        let eps = 1e-5;
        for i in 0..lp.num_rows() {
            let mut up = lp.clone();
            up.set_rhs(i, lp.rhs()[i] + eps);
            let mut down = lp.clone();
            down.set_rhs(i, lp.rhs()[i] - eps);
            let (Ok(u), Ok(d)) = (up.solve(), down.solve()) else { continue };
            if u.status != LpStatus::Optimal || d.status != LpStatus::Optimal {
                continue;
            }
            let right = (u.objective - sol.objective) / eps;
            let left = (sol.objective - d.objective) / eps;
            let y = sol.duals[i];
            let tol = 1e-3 * y.abs().max(1.0);
            duals_checked += 1;
            // At a kink any multiplier between the one-sided slopes is valid.
            let (lo, hi) = (left.min(right), left.max(right));
            if y >= lo - tol && y <= hi + tol {
                duals_ok += 1;
            }
        }
    }
    let pass = cases >= 500 && matched == cases && duals_ok == duals_checked && started.elapsed() <= Duration::from_secs(60);
    report(6, pass, started, format!("{matched}/{cases} objectives match, {duals_ok}/{duals_checked} duals agree with perturbation"))
}

fn csv_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Verdict {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let scenario = common::scenario_path("default");
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let run = Command::new(env!("CARGO_BIN_EXE_ieh"))
            .arg("simulate-day")
            .arg(&scenario)
            .args(["--seed", "42", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        runs.push(csv_outputs(&out));
    }
    let identical = runs[0] == runs[1] && !runs[0].is_empty();
    report(7, identical, started, format!("{} CSV files compared", runs[0].len()))
}

fn duality_consistency() -> Verdict {
    let started = Instant::now();
    let s = common::scenario("deterministic");
    let da = run_day_ahead(&s).unwrap();
    let central = clairvoyant(&s).unwrap();
    let duals = dual_prices(&central, s.mu_e(), &s.transformer);
    let bound = 2.0 * da.final_step;
    let (mut compared, mut within, mut skipped) = (0, 0, 0);
    let mut worst = 0.0f64;
    for t in 0..s.periods() {
        if duals.degenerate[t] {
            skipped += 1;
            continue;
        }
        compared += 1;
        let gap = (da.prices.values[t] - duals.local[t]).abs();
        worst = worst.max(gap);
        if gap <= bound + 1e-12 {
            within += 1;
        }
    }
    report(
        8,
        within == compared && compared > 0,
        started,
        format!("{within}/{compared} periods within {bound:.2e}, worst {worst:.2e}, {skipped} degenerate skipped"),
    )
}

#[test]
fn acceptance() {
    let mut verdicts = vec![relaxation_exactness(), distributed_matches_centralized(), real_time_iteration_count()];
    let (four, five) = congestion_containment_and_monitoring();
    verdicts.extend([four, five, lp_solver_correctness(), determinism(), duality_consistency()]);
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| format!("{}: {}", v.criterion, v.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
