//! Regenerates the checked-in synthetic scenarios under `scenarios/`.
//!
//! ```text
//! cargo run -p ieh-core --example generate_scenarios -- scenarios
//! ```
//!
//! The fleet is synthetic: device parameters are drawn from fixed ranges
//! with a fixed seed, and load sizes are chosen so that aggregate demand in
//! the cheap night hours exceeds the transformer import limit.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ieh::config::{write_series, FleetFile};
use ieh::hub::{ExogenousSeries, HubConfig};

const PERIODS: usize = 24;

/// Time-of-use tariff, yuan/kWh. Index t covers hour t..t+1.
fn tariff(t: usize) -> f64 {
    match t {
        0..=6 | 23 => 0.30,
        9..=11 | 17..=20 => 1.05,
        _ => 0.68,
    }
}

const LOAD_SHAPE: [f64; PERIODS] = [
    0.55, 0.50, 0.50, 0.50, 0.55, 0.60, 0.75, 0.90, 1.00, 1.05, 1.05, 1.00, 0.95, 0.95, 1.00,
    1.05, 1.10, 1.20, 1.25, 1.20, 1.10, 0.95, 0.80, 0.65,
];

const HEAT_SHAPE: [f64; PERIODS] = [
    1.10, 1.15, 1.20, 1.20, 1.15, 1.10, 1.05, 1.00, 0.90, 0.80, 0.75, 0.70, 0.70, 0.70, 0.75,
    0.80, 0.85, 0.95, 1.00, 1.05, 1.10, 1.10, 1.10, 1.10,
];

fn solar_shape(t: usize) -> f64 {
    if (6..=18).contains(&t) {
        (std::f64::consts::PI * (t as f64 - 5.0) / 14.0).sin()
    } else {
        0.0
    }
}

fn round(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64, digits: i32) -> f64 {
    round(rng.gen_range(lo..hi), digits)
}

fn fleet(rng: &mut ChaCha8Rng, n: usize) -> (Vec<HubConfig>, Vec<ExogenousSeries>) {
    let mut hubs = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let base_e = draw(rng, 40.0, 120.0, 1);
        let base_th = draw(rng, 50.0, 150.0, 1);
        let solar = draw(rng, 0.0, 1.2 * base_e, 1);
        let eta_ge = draw(rng, 0.30, 0.40, 3);
        let eta_gf = draw(rng, 0.85, 0.95, 3);
        let p_ch = draw(rng, 50.0, 100.0, 1);
        let sl_e = draw(rng, 200.0, 400.0, 1);
        let cfg = HubConfig {
            id: format!("hub-{:02}", i + 1),
            eta_ee: draw(rng, 0.96, 0.99, 3),
            eta_ge_chp: eta_ge,
            eta_gth_chp: draw(rng, 0.40, 0.50, 3),
            eta_gth_gf: eta_gf,
            eta_ch_ees: draw(rng, 0.90, 0.98, 3),
            eta_dch_ees: draw(rng, 0.90, 0.98, 3),
            eta_ch_tes: draw(rng, 0.90, 0.98, 3),
            eta_dch_tes: draw(rng, 0.90, 0.98, 3),
            ees_capacity: draw(rng, 100.0, 300.0, 1),
            tes_capacity: draw(rng, 100.0, 300.0, 1),
            ees_soc_min: 0.1,
            ees_soc_max: 0.9,
            ees_soc_init: 0.5,
            tes_soc_min: 0.1,
            tes_soc_max: 0.9,
            tes_soc_init: 0.5,
            p_ch_max: p_ch,
            p_dch_max: p_ch,
            h_ch_max: draw(rng, 50.0, 100.0, 1),
            h_dch_max: draw(rng, 50.0, 100.0, 1),
            g_chp_max: round(draw(rng, 0.9, 1.4, 2) * base_e / eta_ge, 1),
            g_gf_max: round(1.3 * 1.2 * base_th / eta_gf, 1),
            p_import_max: round(1.25 * base_e + 3.0 * sl_e / PERIODS as f64 + p_ch + 20.0, 0),
            l_e_sl_total: sl_e,
            l_th_sl_total: draw(rng, 50.0, 150.0, 1),
            sl_rate_factor: 3.0,
        };
        let mut exo = ExogenousSeries {
            p_res: Vec::with_capacity(PERIODS),
            l_e: Vec::with_capacity(PERIODS),
            l_th: Vec::with_capacity(PERIODS),
            mu_e: Vec::with_capacity(PERIODS),
            mu_g: vec![0.0; PERIODS],
            dt: 1.0,
        };
        for t in 0..PERIODS {
            let noise = |rng: &mut ChaCha8Rng| 1.0 + rng.gen_range(-0.05..0.05);
            exo.p_res.push(round(solar * solar_shape(t) * noise(rng), 2));
            exo.l_e.push(round(base_e * LOAD_SHAPE[t] * noise(rng), 2));
            exo.l_th.push(round(base_th * HEAT_SHAPE[t] * noise(rng), 2));
            exo.mu_e.push(tariff(t));
        }
        hubs.push(cfg);
        series.push(exo);
    }
    (hubs, series)
}

fn write_json(path: &Path, value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").expect("write json");
}

fn write_fleet(dir: &Path, hubs: &[HubConfig], series: &[ExogenousSeries]) {
    fs::create_dir_all(dir.join("series")).expect("create series dir");
    let fleet = FleetFile { hubs: hubs.to_vec() };
    write_json(&dir.join("fleet.json"), &serde_json::to_value(fleet).expect("fleet"));
    for (cfg, exo) in hubs.iter().zip(series) {
        let f = fs::File::create(dir.join("series").join(format!("{}.csv", cfg.id))).expect("csv");
        write_series(exo, f).expect("write csv");
    }
}

fn gas() -> serde_json::Value {
    json!({ "price_per_m3": 3.3, "density_kg_m3": 0.79, "calorific_mj_kg": 45.0 })
}

fn bands(scale: f64, seed: u64) -> serde_json::Value {
    json!({
        "da_err_res": 0.30 * scale, "id_err_res": 0.10 * scale, "rt_err_res": 0.05 * scale,
        "da_err_load": 0.20 * scale, "id_err_load": 0.08 * scale, "rt_err_load": 0.03 * scale,
        "seed": seed
    })
}

fn scenario(name: &str, fleet: &str, series: &str, p_in: f64, p_out: f64, scale: f64) -> serde_json::Value {
    json!({
        "name": name,
        "fleet": fleet,
        "series_dir": series,
        "dt_hours": 1.0,
        "transformer": { "p_in_max": p_in, "p_out_max": p_out },
        "gas": gas(),
        "forecast": bands(scale, 42),
        "market": { "lambda_min": 0.0, "lambda_max": 1.5 }
    })
}

/// Cuts a fleet down to `periods` periods starting at `from`, scaling the
/// shiftable totals to the shorter window.
fn window(
    hubs: &[HubConfig],
    series: &[ExogenousSeries],
    from: usize,
    periods: usize,
) -> (Vec<HubConfig>, Vec<ExogenousSeries>) {
    let frac = periods as f64 / PERIODS as f64;
    let hubs = hubs
        .iter()
        .map(|h| HubConfig {
            l_e_sl_total: round(h.l_e_sl_total * frac, 2),
            l_th_sl_total: round(h.l_th_sl_total * frac, 2),
            ..h.clone()
        })
        .collect();
    let cut = |v: &Vec<f64>| v[from..from + periods].to_vec();
    let series = series
        .iter()
        .map(|s| ExogenousSeries {
            p_res: cut(&s.p_res),
            l_e: cut(&s.l_e),
            l_th: cut(&s.l_th),
            mu_e: cut(&s.mu_e),
            mu_g: cut(&s.mu_g),
            dt: s.dt,
        })
        .collect();
    (hubs, series)
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (hubs, series) = fleet(&mut rng, 15);

    let default = root.join("default");
    write_fleet(&default, &hubs, &series);
    write_json(
        &default.join("scenario.json"),
        &scenario("default", "fleet.json", "series", 1500.0, 800.0, 1.0),
    );
    let deterministic = root.join("deterministic");
    fs::create_dir_all(&deterministic).expect("create dir");
    write_json(
        &deterministic.join("scenario.json"),
        &scenario("deterministic", "../default/fleet.json", "../default/series", 1500.0, 800.0, 0.0),
    );

    let (mini_hubs, mini_series) = window(&hubs[..3], &series[..3], 5, 3);
    let mini = root.join("mini");
    write_fleet(&mini, &mini_hubs, &mini_series);
    write_json(&mini.join("scenario.json"), &scenario("mini", "fleet.json", "series", 300.0, 160.0, 0.0));

    let lossless_hubs: Vec<HubConfig> = mini_hubs
        .iter()
        .map(|h| HubConfig {
            eta_ch_ees: 1.0,
            eta_dch_ees: 1.0,
            eta_ch_tes: 1.0,
            eta_dch_tes: 1.0,
            ..h.clone()
        })
        .collect();
    let lossless = root.join("lossless");
    write_fleet(&lossless, &lossless_hubs, &mini_series);
    write_json(
        &lossless.join("scenario.json"),
        &scenario("lossless", "fleet.json", "series", 300.0, 160.0, 0.0),
    );

    // Negative utility price with almost no renewable output: the relaxed
    // optimum burns imported energy by charging and discharging at once.
    let adversarial_hub = HubConfig {
        id: "hub-adv".into(),
        eta_ee: 1.0,
        eta_ge_chp: 0.35,
        eta_gth_chp: 0.45,
        eta_gth_gf: 0.9,
        eta_ch_ees: 0.9,
        eta_dch_ees: 0.9,
        eta_ch_tes: 0.9,
        eta_dch_tes: 0.9,
        ees_capacity: 100.0,
        tes_capacity: 100.0,
        ees_soc_min: 0.1,
        ees_soc_max: 0.9,
        ees_soc_init: 0.5,
        tes_soc_min: 0.1,
        tes_soc_max: 0.9,
        tes_soc_init: 0.5,
        p_ch_max: 20.0,
        p_dch_max: 20.0,
        h_ch_max: 20.0,
        h_dch_max: 20.0,
        g_chp_max: 0.0,
        g_gf_max: 50.0,
        p_import_max: 100.0,
        l_e_sl_total: 0.0,
        l_th_sl_total: 0.0,
        sl_rate_factor: 3.0,
    };
    let adversarial_series = ExogenousSeries {
        p_res: vec![0.1; 3],
        l_e: vec![5.0; 3],
        l_th: vec![10.0; 3],
        mu_e: vec![-0.5; 3],
        mu_g: vec![0.0; 3],
        dt: 1.0,
    };
    let adversarial = root.join("adversarial");
    write_fleet(&adversarial, &[adversarial_hub], &[adversarial_series]);
    let mut adv = scenario("adversarial", "fleet.json", "series", 200.0, 200.0, 0.0);
    adv["market"] = json!({ "lambda_min": -1.0, "lambda_max": 1.5 });
    write_json(&adversarial.join("scenario.json"), &adv);
}
