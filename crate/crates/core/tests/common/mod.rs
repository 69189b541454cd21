#![allow(dead_code)]

use ieh::lp::{LinearProgram, Sense};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Solves a small square system by Gaussian elimination with partial pivoting.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for c in k..n {
                a[i][c] -= f * a[k][c];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all basic feasible solutions of a bounded LP, found by
/// activating every admissible subset of constraints.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Hyperplanes: rows, then lower and upper bounds.
    let mut planes: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for i in 0..lp.num_rows() {
        planes.push((lp.dense_row(i), lp.rhs()[i], lp.senses()[i] == Sense::Eq));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lp.lower()[j].is_finite() {
            planes.push((e.clone(), lp.lower()[j], false));
        }
        if lp.upper()[j].is_finite() {
            planes.push((e, lp.upper()[j], false));
        }
    }
    let forced: Vec<usize> = (0..planes.len()).filter(|&i| planes[i].2).collect();
    let free: Vec<usize> = (0..planes.len()).filter(|&i| !planes[i].2).collect();
    if forced.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for combo in combinations(free.len(), n - forced.len()) {
        let active: Vec<usize> = forced.iter().copied().chain(combo.iter().map(|&c| free[c])).collect();
        let a: Vec<Vec<f64>> = active.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = active.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = (0..lp.num_rows()).all(|i| {
            let act: f64 = lp.dense_row(i).iter().zip(&x).map(|(a, v)| a * v).sum();
            match lp.senses()[i] {
                Sense::Le => act <= lp.rhs()[i] + 1e-7,
                Sense::Ge => act >= lp.rhs()[i] - 1e-7,
                Sense::Eq => (act - lp.rhs()[i]).abs() <= 1e-7,
            }
        }) && (0..n).all(|j| x[j] >= lp.lower()[j] - 1e-7 && x[j] <= lp.upper()[j] + 1e-7);
        if feasible {
            let obj: f64 = lp.objective().iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

/// Random bounded LP with a known strictly feasible point.
pub fn random_bounded_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = rng.gen_range(1.0..6.0);
        lp.add_var(rng.gen_range(-3.0..3.0), lo, hi);
        x0.push(rng.gen_range(lo..hi));
    }
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3.0..3.0))).collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let roll: f64 = rng.gen();
        if roll < 0.1 {
            lp.add_row(&coeffs, Sense::Eq, act);
        } else if roll < 0.55 {
            lp.add_row(&coeffs, Sense::Le, act + rng.gen_range(0.0..2.0));
        } else {
            lp.add_row(&coeffs, Sense::Ge, act - rng.gen_range(0.0..2.0));
        }
    }
    lp
}

/// Loads a checked-in scenario by directory name.
pub fn scenario(name: &str) -> ieh::scenario::Scenario {
    ieh::config::load_scenario(&scenario_path(name)).expect("checked-in scenario loads")
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .join("scenario.json")
}

/// Random single-hub instance of one to six periods. Roughly a third of the
/// instances have negative prices and a tight exchange limit, which makes the
/// relaxed optimum charge and discharge at once.
pub fn random_hub_instance(rng: &mut ChaCha8Rng) -> (ieh::hub::HubConfig, ieh::hub::ExogenousSeries) {
    let periods = *[1usize, 2, 3, 3, 4, 4, 4, 5, 5, 6].get(rng.gen_range(0..10)).unwrap();
    let adverse = rng.gen_bool(0.35);
    let eta = |rng: &mut ChaCha8Rng| rng.gen_range(0.85..0.98);
    let p_ch = rng.gen_range(5.0..40.0);
    let cfg = ieh::hub::HubConfig {
        id: "rand".into(),
        eta_ee: rng.gen_range(0.95..1.0),
        eta_ge_chp: rng.gen_range(0.30..0.40),
        eta_gth_chp: rng.gen_range(0.40..0.50),
        eta_gth_gf: rng.gen_range(0.85..0.95),
        eta_ch_ees: eta(rng),
        eta_dch_ees: eta(rng),
        eta_ch_tes: eta(rng),
        eta_dch_tes: eta(rng),
        ees_capacity: rng.gen_range(20.0..120.0),
        tes_capacity: rng.gen_range(20.0..120.0),
        ees_soc_min: 0.1,
        ees_soc_max: 0.9,
        ees_soc_init: rng.gen_range(0.2..0.8),
        tes_soc_min: 0.1,
        tes_soc_max: 0.9,
        tes_soc_init: rng.gen_range(0.2..0.8),
        p_ch_max: p_ch,
        p_dch_max: rng.gen_range(5.0..40.0),
        h_ch_max: rng.gen_range(5.0..40.0),
        h_dch_max: rng.gen_range(5.0..40.0),
        g_chp_max: rng.gen_range(0.0..80.0),
        g_gf_max: 200.0,
        p_import_max: if adverse { rng.gen_range(5.0..30.0) } else { 500.0 },
        l_e_sl_total: rng.gen_range(0.0..20.0) * periods as f64,
        l_th_sl_total: rng.gen_range(0.0..20.0) * periods as f64,
        sl_rate_factor: 3.0,
    };
    let mut exo = ieh::hub::ExogenousSeries {
        p_res: Vec::new(),
        l_e: Vec::new(),
        l_th: Vec::new(),
        mu_e: Vec::new(),
        mu_g: Vec::new(),
        dt: 1.0,
    };
    for _ in 0..periods {
        exo.p_res.push(if rng.gen_bool(0.7) { rng.gen_range(0.0..60.0) } else { 0.0 });
        exo.l_e.push(rng.gen_range(2.0..40.0));
        exo.l_th.push(rng.gen_range(2.0..40.0));
        exo.mu_e.push(if adverse { rng.gen_range(-0.8..1.5) } else { rng.gen_range(0.05..1.5) });
        exo.mu_g.push(0.3342);
    }
    (cfg, exo)
}
