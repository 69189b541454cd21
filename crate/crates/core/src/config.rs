//! Scenario, fleet and series files.
//!
//! A scenario file is JSON:
//!
//! ```json
//! {
//!   "name": "default",
//!   "fleet": "fleet.json",
//!   "series_dir": "series",
//!   "dt_hours": 1.0,
//!   "transformer": { "p_in_max": 1500, "p_out_max": 800 },
//!   "gas": { "price_per_m3": 3.3, "density_kg_m3": 0.79, "calorific_mj_kg": 45 },
//!   "forecast": { "da_err_res": 0.3, "...": "...", "seed": 42 },
//!   "market": { "lambda_min": 0.0, "lambda_max": 1.5 }
//! }
//! ```
//!
//! Paths are relative to the scenario file. The fleet file holds
//! `{"hubs": [...]}`. Each hub's series is read from `<series_dir>/<id>.csv`,
//! falling back to `<series_dir>/shared.csv`, with columns
//! `period,p_res,l_e,l_th,mu_e`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::hub::{gas_price_per_kwh, ExogenousSeries, HubConfig};
use crate::market::{MarketParams, TransformerConfig};
use crate::scenario::{ForecastModel, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {}", schema_message(.unknown, .missing))]
    Schema {
        path: PathBuf,
        unknown: Vec<String>,
        missing: Vec<String>,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn schema_message(unknown: &[String], missing: &[String]) -> String {
    let mut parts = Vec::new();
    if !unknown.is_empty() {
        parts.push(format!("unknown keys: {}", unknown.join(", ")));
    }
    if !missing.is_empty() {
        parts.push(format!("missing keys: {}", missing.join(", ")));
    }
    parts.join("; ")
}

const SCENARIO_REQUIRED: &[&str] = &["fleet", "series_dir", "transformer", "gas", "forecast"];
const SCENARIO_OPTIONAL: &[&str] = &["name", "dt_hours", "market"];
const TRANSFORMER_KEYS: &[&str] = &["p_in_max", "p_out_max"];
const GAS_KEYS: &[&str] = &["price_per_m3", "density_kg_m3", "calorific_mj_kg"];
const FORECAST_KEYS: &[&str] = &[
    "da_err_res",
    "id_err_res",
    "rt_err_res",
    "da_err_load",
    "id_err_load",
    "rt_err_load",
    "seed",
];
const MARKET_KEYS: &[&str] = &[
    "lambda_min",
    "lambda_max",
    "balance_tol",
    "price_tol",
    "step0",
    "step_decay",
    "max_iters",
    "indifference_band",
];
const HUB_REQUIRED: &[&str] = &[
    "id",
    "eta_ee",
    "eta_ge_chp",
    "eta_gth_chp",
    "eta_gth_gf",
    "eta_ch_ees",
    "eta_dch_ees",
    "eta_ch_tes",
    "eta_dch_tes",
    "ees_capacity",
    "tes_capacity",
    "ees_soc_min",
    "ees_soc_max",
    "ees_soc_init",
    "tes_soc_min",
    "tes_soc_max",
    "tes_soc_init",
    "p_ch_max",
    "p_dch_max",
    "h_ch_max",
    "h_dch_max",
    "g_chp_max",
    "g_gf_max",
    "p_import_max",
    "l_e_sl_total",
    "l_th_sl_total",
];
const HUB_OPTIONAL: &[&str] = &["sl_rate_factor"];

/// Collects unknown and missing keys of one JSON object.
fn check_keys(
    value: &Value,
    prefix: &str,
    required: &[&str],
    optional: &[&str],
    unknown: &mut Vec<String>,
    missing: &mut Vec<String>,
) {
    let Some(obj) = value.as_object() else {
        missing.push(format!("{prefix}(object)"));
        return;
    };
    for key in obj.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            unknown.push(format!("{prefix}{key}"));
        }
    }
    for key in required {
        if !obj.contains_key(*key) {
            missing.push(format!("{prefix}{key}"));
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json(path: &Path) -> Result<Value, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn from_value<T: for<'de> Deserialize<'de>>(path: &Path, v: Value) -> Result<T, ConfigError> {
    serde_json::from_value(v).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConstants {
    pub price_per_m3: f64,
    pub density_kg_m3: f64,
    pub calorific_mj_kg: f64,
}

impl GasConstants {
    pub fn price_per_kwh(&self) -> f64 {
        gas_price_per_kwh(self.price_per_m3, self.density_kg_m3, self.calorific_mj_kg)
    }
}

/// Optional overrides of the market defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketOverrides {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub balance_tol: Option<f64>,
    pub price_tol: Option<f64>,
    pub step0: Option<f64>,
    pub step_decay: Option<f64>,
    pub max_iters: Option<usize>,
    pub indifference_band: Option<f64>,
}

impl MarketOverrides {
    /// Field-wise `self`, falling back to `other`.
    pub fn or(&self, other: &MarketOverrides) -> MarketOverrides {
        MarketOverrides {
            lambda_min: self.lambda_min.or(other.lambda_min),
            lambda_max: self.lambda_max.or(other.lambda_max),
            balance_tol: self.balance_tol.or(other.balance_tol),
            price_tol: self.price_tol.or(other.price_tol),
            step0: self.step0.or(other.step0),
            step_decay: self.step_decay.or(other.step_decay),
            max_iters: self.max_iters.or(other.max_iters),
            indifference_band: self.indifference_band.or(other.indifference_band),
        }
    }

    /// Defaults derived from the transformer, with overrides applied. When
    /// only the price bounds change, the price tolerance follows them.
    pub fn resolve(&self, tr: &TransformerConfig) -> MarketParams {
        let mut p = MarketParams::defaults_for(tr);
        if let Some(v) = self.lambda_min {
            p.lambda_min = v;
        }
        if let Some(v) = self.lambda_max {
            p.lambda_max = v;
        }
        p.price_tol = (p.lambda_max - p.lambda_min) / 512.0;
        p.step0 = 0.1 * (p.lambda_max - p.lambda_min) / tr.p_in_max;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.balance_tol, self.balance_tol);
        set(&mut p.price_tol, self.price_tol);
        set(&mut p.step0, self.step0);
        set(&mut p.step_decay, self.step_decay);
        set(&mut p.indifference_band, self.indifference_band);
        if let Some(v) = self.max_iters {
            p.max_iters = v;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub fleet: PathBuf,
    pub series_dir: PathBuf,
    #[serde(default = "one_hour")]
    pub dt_hours: f64,
    pub transformer: TransformerConfig,
    pub gas: GasConstants,
    pub forecast: ForecastModel,
    #[serde(default)]
    pub market: MarketOverrides,
}

fn one_hour() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetFile {
    pub hubs: Vec<HubConfig>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SeriesRow {
    period: usize,
    p_res: f64,
    l_e: f64,
    l_th: f64,
    mu_e: f64,
}

/// Validates and parses a scenario file without touching referenced files.
pub fn parse_scenario_file(path: &Path) -> Result<ScenarioFile, ConfigError> {
    let value = parse_json(path)?;
    let (mut unknown, mut missing) = (Vec::new(), Vec::new());
    check_keys(&value, "", SCENARIO_REQUIRED, SCENARIO_OPTIONAL, &mut unknown, &mut missing);
    if let Some(obj) = value.as_object() {
        let nested: [(&str, &[&str], &[&str]); 4] = [
            ("transformer", TRANSFORMER_KEYS, &[]),
            ("gas", GAS_KEYS, &[]),
            ("forecast", FORECAST_KEYS, &[]),
            ("market", &[], MARKET_KEYS),
        ];
        for (key, required, optional) in nested {
            if let Some(v) = obj.get(key) {
                check_keys(v, &format!("{key}."), required, optional, &mut unknown, &mut missing);
            }
        }
    }
    if !unknown.is_empty() || !missing.is_empty() {
        return Err(ConfigError::Schema {
            path: path.to_path_buf(),
            unknown,
            missing,
        });
    }
    from_value(path, value)
}

pub fn load_fleet(path: &Path) -> Result<Vec<HubConfig>, ConfigError> {
    let value = parse_json(path)?;
    let (mut unknown, mut missing) = (Vec::new(), Vec::new());
    check_keys(&value, "", &["hubs"], &[], &mut unknown, &mut missing);
    if let Some(hubs) = value.get("hubs").and_then(Value::as_array) {
        for (i, hub) in hubs.iter().enumerate() {
            check_keys(hub, &format!("hubs[{i}]."), HUB_REQUIRED, HUB_OPTIONAL, &mut unknown, &mut missing);
        }
    }
    if !unknown.is_empty() || !missing.is_empty() {
        return Err(ConfigError::Schema {
            path: path.to_path_buf(),
            unknown,
            missing,
        });
    }
    let fleet: FleetFile = from_value(path, value)?;
    Ok(fleet.hubs)
}

/// Reads a `period,p_res,l_e,l_th,mu_e` file; periods must be `0..n` in order.
pub fn load_series(path: &Path, mu_g: f64, dt: f64) -> Result<ExogenousSeries, ConfigError> {
    let text = read(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut s = ExogenousSeries {
        p_res: Vec::new(),
        l_e: Vec::new(),
        l_th: Vec::new(),
        mu_e: Vec::new(),
        mu_g: Vec::new(),
        dt,
    };
    for (i, row) in reader.deserialize::<SeriesRow>().enumerate() {
        let row = row.map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if row.period != i {
            return Err(ConfigError::Invalid {
                path: path.to_path_buf(),
                message: format!("row {i} has period {}", row.period),
            });
        }
        s.p_res.push(row.p_res);
        s.l_e.push(row.l_e);
        s.l_th.push(row.l_th);
        s.mu_e.push(row.mu_e);
        s.mu_g.push(mu_g);
    }
    s.validate().map_err(|e| ConfigError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(s)
}

pub fn write_series<W: std::io::Write>(s: &ExogenousSeries, w: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    for t in 0..s.len() {
        writer.serialize(SeriesRow {
            period: t,
            p_res: s.p_res[t],
            l_e: s.l_e[t],
            l_th: s.l_th[t],
            mu_e: s.mu_e[t],
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads a scenario and everything it references.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    load_scenario_with(path, None, &MarketOverrides::default())
}

/// Loads a scenario with a forecast seed and market settings taking
/// precedence over the file.
pub fn load_scenario_with(
    path: &Path,
    seed: Option<u64>,
    market: &MarketOverrides,
) -> Result<Scenario, ConfigError> {
    let mut file = parse_scenario_file(path)?;
    if let Some(seed) = seed {
        file.forecast.seed = seed;
    }
    file.market = market.or(&file.market);
    let base = path.parent().unwrap_or(Path::new("."));
    let fleet = load_fleet(&base.join(&file.fleet))?;
    let series_dir = base.join(&file.series_dir);
    let mu_g = file.gas.price_per_kwh();
    let mut truth = Vec::with_capacity(fleet.len());
    for cfg in &fleet {
        let own = series_dir.join(format!("{}.csv", cfg.id));
        let shared = series_dir.join("shared.csv");
        let chosen = if own.exists() { own } else { shared };
        truth.push(load_series(&chosen, mu_g, file.dt_hours)?);
    }
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let scenario = Scenario {
        name,
        market: file.market.resolve(&file.transformer),
        fleet,
        truth,
        transformer: file.transformer,
        forecast: file.forecast,
    };
    scenario.validate().map_err(|e| ConfigError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(scenario)
}
