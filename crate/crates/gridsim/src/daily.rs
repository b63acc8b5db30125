//! The 24-hour scenario: hourly injections from the household load profile
//! and PV maximum-power outputs, one power-flow solve per hour.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::inverter::PowerReference;
use crate::powerflow::{
    solve_network, BusInjection, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::pv::{cell_temperature, mpp, PVArrayParams, WeatherSample};
use crate::sequence::SequenceLineParams;

/// Unit tag of an hourly profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileUnit {
    Kilowatts,
    WattsPerSquareMeter,
    Celsius,
}

/// 24 hourly values, indexed by hour 1..=24 (hour h covers (h-1, h]).
#[derive(Debug, Clone)]
pub struct HourlyProfile {
    pub values: [f64; 24],
    pub unit: ProfileUnit,
}

impl HourlyProfile {
    pub fn new(values: [f64; 24], unit: ProfileUnit) -> Result<Self> {
        if unit == ProfileUnit::WattsPerSquareMeter && values.iter().any(|&v| v < 0.0) {
            return Err(Error::Validation("negative irradiance entry".into()));
        }
        Ok(HourlyProfile { values, unit })
    }

    pub fn value(&self, hour: usize) -> Result<f64> {
        if !(1..=24).contains(&hour) {
            return Err(Error::Domain(format!("hour {hour} out of range 1-24")));
        }
        Ok(self.values[hour - 1])
    }
}

/// Parse an `hour,value` CSV (24 rows, optional header) into a profile.
pub fn load_profile_csv(path: &Path, unit: ProfileUnit) -> Result<HourlyProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut values = [f64::NAN; 24];
    let mut seen = [false; 24];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("hour")) {
            continue;
        }
        let mut parts = line.split(',');
        let err = |msg: &str| Error::Parse(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let hour: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad hour"))?;
        let value: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad value"))?;
        if !(1..=24).contains(&hour) {
            return Err(err("hour out of range 1-24"));
        }
        if seen[hour - 1] {
            return Err(err("duplicate hour"));
        }
        seen[hour - 1] = true;
        values[hour - 1] = value;
    }
    if let Some(h) = seen.iter().position(|&s| !s) {
        return Err(Error::Parse(format!(
            "{}: missing hour {}",
            path.display(),
            h + 1
        )));
    }
    HourlyProfile::new(values, unit)
}

/// Reactive-power policy for the PV sites.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QStarPolicy {
    #[default]
    FixedZero,
    FixedPowerFactor { power_factor: f64 },
}

fn default_households() -> u32 {
    20
}
fn default_q_fraction() -> f64 {
    0.5
}

/// Scenario: load scaling, reactive fraction and PV placement.
#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_households")]
    pub households_per_bus: u32,
    #[serde(default = "default_q_fraction")]
    pub q_fraction: f64,
    // TOML table keys are strings, so bus ids need an explicit parse
    #[serde(default, deserialize_with = "deserialize_bus_map")]
    pub pv_sites: BTreeMap<u32, u32>,
    #[serde(default)]
    pub q_star_policy: QStarPolicy,
}

fn deserialize_bus_map<'de, D>(deserializer: D) -> std::result::Result<BTreeMap<u32, u32>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    use serde::de::Error as _;
    let raw = BTreeMap::<String, u32>::deserialize(deserializer)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|bus| (bus, v))
                .map_err(|_| D::Error::custom(format!("bad bus id {k:?}")))
        })
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            households_per_bus: 20,
            q_fraction: 0.5,
            pv_sites: BTreeMap::new(),
            q_star_policy: QStarPolicy::FixedZero,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.households_per_bus < 1 {
            return Err(Error::Validation("households_per_bus must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.q_fraction) {
            return Err(Error::Validation(format!(
                "q_fraction must be in [0, 1], got {}",
                self.q_fraction
            )));
        }
        if let QStarPolicy::FixedPowerFactor { power_factor } = self.q_star_policy {
            if !(0.0 < power_factor && power_factor <= 1.0) {
                return Err(Error::Validation(format!(
                    "power factor must be in (0, 1], got {power_factor}"
                )));
            }
        }
        Ok(())
    }
}

/// Load and validate a scenario file (TOML).
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Busbar load at the given hour: households_per_bus times the household
/// profile, Q as a fixed fraction of P. Returns (p_kw, q_kvar).
pub fn bus_load(profile: &HourlyProfile, hour: usize, cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let p = cfg.households_per_bus as f64 * profile.value(hour)?;
    Ok((p, cfg.q_fraction * p))
}

/// PV power reference for one site: n arrays at their maximum power point,
/// lossless DC to AC, Q* per policy.
pub fn pv_site_output(
    params: &PVArrayParams,
    weather: &WeatherSample,
    n_arrays: u32,
    policy: QStarPolicy,
) -> Result<PowerReference> {
    if n_arrays == 0 || weather.g <= 0.0 {
        return Ok(PowerReference { p_star: 0.0, q_star: 0.0 });
    }
    let t_cell = cell_temperature(weather.t_air_c, weather.g, params.noct_c);
    let point = mpp(params, weather.g, t_cell)?;
    let p_star = n_arrays as f64 * point.p;
    let q_star = match policy {
        QStarPolicy::FixedZero => 0.0,
        QStarPolicy::FixedPowerFactor { power_factor } => {
            p_star * (power_factor.acos()).tan()
        }
    };
    Ok(PowerReference { p_star, q_star })
}

/// Element-wise mean of several 24-entry day series.
pub fn average_day(day_series: &[Vec<f64>]) -> Result<[f64; 24]> {
    if day_series.is_empty() {
        return Err(Error::Domain("at least one input day required".into()));
    }
    let mut out = [0.0; 24];
    for day in day_series {
        if day.len() != 24 {
            return Err(Error::Validation(format!(
                "ragged input: day with {} entries",
                day.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(day) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= day_series.len() as f64;
    }
    Ok(out)
}

/// The three bundled profiles of a daily scenario.
#[derive(Debug, Clone)]
pub struct DailyProfiles {
    pub load_kw: HourlyProfile,
    pub irradiance: HourlyProfile,
    pub temperature_c: HourlyProfile,
}

/// Results of one scenario hour.
#[derive(Debug, Clone)]
pub struct HourResult {
    pub hour: usize,
    pub solution: PowerFlowSolution,
    pub pv_outputs: BTreeMap<u32, PowerReference>,
    pub total_load_kw: f64,
    pub total_pv_kw: f64,
    /// Complex network loss [p.u.].
    pub loss: Complex64,
}

#[derive(Debug, Clone)]
pub struct DailyResult {
    pub hours: Vec<HourResult>,
}

/// Effective PV array count per bus: the scenario's pv_sites override the
/// counts carried by the network file.
pub fn effective_pv_sites(net: &NetworkModel, cfg: &ScenarioConfig) -> BTreeMap<u32, u32> {
    let mut sites: BTreeMap<u32, u32> = net
        .buses
        .iter()
        .filter(|b| b.has_pv())
        .map(|b| (b.id, b.pv_array_count))
        .collect();
    for (&bus, &n) in &cfg.pv_sites {
        sites.insert(bus, n);
    }
    sites.retain(|_, &mut n| n > 0);
    sites
}

/// Per-bus injections, PV outputs, and the total load / PV in kW.
pub type HourInjections = (Vec<BusInjection>, BTreeMap<u32, PowerReference>, f64, f64);

/// Injections for one hour: PV outputs minus bus loads, in p.u.
pub fn hourly_injections(
    net: &NetworkModel,
    params: &PVArrayParams,
    profiles: &DailyProfiles,
    cfg: &ScenarioConfig,
    hour: usize,
) -> Result<HourInjections> {
    let sites = effective_pv_sites(net, cfg);
    let weather = WeatherSample {
        g: profiles.irradiance.value(hour)?,
        t_air_c: profiles.temperature_c.value(hour)?,
    };
    let (load_p_kw, load_q_kvar) = bus_load(&profiles.load_kw, hour, cfg)?;
    let s_base = net.base.s_base;
    let mut injections = Vec::new();
    let mut pv_outputs = BTreeMap::new();
    let mut total_load_kw = 0.0;
    let mut total_pv_kw = 0.0;
    let slack = net.slack_bus();
    for bus in &net.buses {
        if bus.id == slack {
            continue;
        }
        let n = sites.get(&bus.id).copied().unwrap_or(0);
        let pv = pv_site_output(params, &weather, n, cfg.q_star_policy)?;
        if n > 0 {
            pv_outputs.insert(bus.id, pv);
        }
        total_pv_kw += pv.p_star / 1e3;
        total_load_kw += load_p_kw;
        injections.push(BusInjection {
            bus: bus.id,
            p: (pv.p_star - load_p_kw * 1e3) / s_base,
            q: (pv.q_star - load_q_kvar * 1e3) / s_base,
        });
    }
    Ok((injections, pv_outputs, total_load_kw, total_pv_kw))
}

/// Run the full 24-hour scenario, one Newton solve per hour.
pub fn run_day(
    net: &NetworkModel,
    seq: &BTreeMap<u32, SequenceLineParams>,
    params: &PVArrayParams,
    profiles: &DailyProfiles,
    cfg: &ScenarioConfig,
) -> Result<DailyResult> {
    cfg.validate()?;
    let slack_v = Complex64::new(1.0, 0.0);
    let mut hours = Vec::with_capacity(24);
    for hour in 1..=24 {
        let (injections, pv_outputs, total_load_kw, total_pv_kw) =
            hourly_injections(net, params, profiles, cfg, hour)?;
        let solution = solve_network(net, seq, &injections, slack_v, DEFAULT_TOL, DEFAULT_MAX_ITER)
            .map_err(|e| match e {
                Error::Convergence(msg) => Error::Convergence(format!("hour {hour}: {msg}")),
                Error::Numeric(msg) => Error::Numeric(format!("hour {hour}: {msg}")),
                other => other,
            })?;
        let loss = solution.total_loss;
        hours.push(HourResult {
            hour,
            solution,
            pv_outputs,
            total_load_kw,
            total_pv_kw,
            loss,
        });
    }
    Ok(DailyResult { hours })
}
