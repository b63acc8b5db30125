//! Single-diode PV array model.
//!
//! The array current solves the implicit equation
//!
//! ```text
//! I = Ipv_cell*Np - I0*Np*(exp((V + Rs*I)/(Vt*a)) - 1) - (V + Rs*I)/Rp
//! ```
//!
//! with irradiance- and temperature-dependent photo and saturation
//! currents. A damped Newton iteration extracts I; the maximum power
//! point is located by a coarse scan plus golden-section refinement.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{BOLTZMANN_K, ELECTRON_CHARGE_Q};

/// Single-diode array parameters plus STC references.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct PVArrayParams {
    pub i_pv_n: f64,
    pub i_sc_n: f64,
    pub v_oc_n: f64,
    pub k_i: f64,
    pub k_v: f64,
    pub a: f64,
    pub r_s: f64,
    pub r_p: f64,
    pub n_s: u32,
    pub n_p: u32,
    pub noct_c: f64,
    pub t_n_k: f64,
    pub g_n: f64,
}

impl PVArrayParams {
    /// Check structural invariants and the open-circuit consistency of the
    /// parameter set (solving the model at STC and V = v_oc_n must give a
    /// near-zero current).
    pub fn validate(&self) -> Result<()> {
        if self.r_s <= 0.0 || self.r_p <= 0.0 || self.a <= 0.0 {
            return Err(Error::Validation(
                "r_s, r_p and a must be positive".into(),
            ));
        }
        if self.n_s < 1 || self.n_p < 1 {
            return Err(Error::Validation("n_s and n_p must be >= 1".into()));
        }
        if self.g_n != 1000.0 || self.t_n_k != 298.0 {
            return Err(Error::Validation(
                "STC references must be g_n = 1000 W/m2, t_n = 298 K".into(),
            ));
        }
        let i_oc = solve_current(self, self.v_oc_n, self.g_n, self.t_n_k)?;
        if i_oc.abs() >= 0.02 * self.i_sc_n {
            return Err(Error::Validation(format!(
                "inconsistent parameter set: I({} V) = {i_oc:.4} A at STC",
                self.v_oc_n
            )));
        }
        Ok(())
    }
}

/// Load and validate array parameters from a TOML parameter file.
pub fn load_pv_params(path: &Path) -> Result<PVArrayParams> {
    let text = std::fs::read_to_string(path)?;
    let params: PVArrayParams = toml::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    params.validate()?;
    Ok(params)
}

/// One sample of an I-V curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v: f64,
    pub i: f64,
    pub p: f64,
}

impl OperatingPoint {
    pub fn new(v: f64, i: f64) -> Self {
        OperatingPoint { v, i, p: v * i }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeatherSample {
    /// Irradiance [W/m2].
    pub g: f64,
    /// Air temperature [degC].
    pub t_air_c: f64,
}

/// Cell temperature [K] from air temperature and irradiance.
///
/// The NOCT formula (NOCT-20)/80 expects irradiance in mW/cm2; applied to
/// G in W/m2 the divisor becomes 800.
pub fn cell_temperature(t_air_c: f64, g: f64, noct_c: f64) -> f64 {
    t_air_c + 273.15 + (noct_c - 20.0) / 800.0 * g
}

/// Thermal voltage Vt = Ns*k*T/q [V].
pub fn thermal_voltage(params: &PVArrayParams, t_cell_k: f64) -> f64 {
    params.n_s as f64 * BOLTZMANN_K * t_cell_k / ELECTRON_CHARGE_Q
}

/// Photo-current per cell at the given irradiance and cell temperature [A].
pub fn photo_current(params: &PVArrayParams, g: f64, t_cell_k: f64) -> f64 {
    (params.i_pv_n + params.k_i * (t_cell_k - params.t_n_k)) * g / params.g_n
}

/// Reverse saturation current at the given cell temperature [A].
pub fn saturation_current(params: &PVArrayParams, t_cell_k: f64) -> Result<f64> {
    let dt = t_cell_k - params.t_n_k;
    let vt = thermal_voltage(params, t_cell_k);
    let arg = (params.v_oc_n + params.k_v * dt) / (params.a * vt);
    let denom = checked_exp(arg)? - 1.0;
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "unphysical parameter set: exp({arg:.3}) - 1 <= 0 in saturation current"
        )));
    }
    Ok((params.i_sc_n + params.k_i * dt) / denom)
}

fn checked_exp(arg: f64) -> Result<f64> {
    if arg > 500.0 {
        return Err(Error::Numeric(format!(
            "exponential overflow guard tripped: exp argument {arg:.1}"
        )));
    }
    Ok(arg.exp())
}

/// Residual f(I) of the implicit current equation.
pub fn residual(params: &PVArrayParams, i: f64, v: f64, g: f64, t_cell_k: f64) -> Result<f64> {
    let np = params.n_p as f64;
    let vt_a = thermal_voltage(params, t_cell_k) * params.a;
    let i_pv = photo_current(params, g, t_cell_k);
    let i_0 = saturation_current(params, t_cell_k)?;
    let x = v + params.r_s * i;
    Ok(i_pv * np - i_0 * np * (checked_exp(x / vt_a)? - 1.0) - x / params.r_p - i)
}

/// Analytic derivative f'(I) of the residual.
pub fn residual_derivative(
    params: &PVArrayParams,
    i: f64,
    v: f64,
    t_cell_k: f64,
) -> Result<f64> {
    let np = params.n_p as f64;
    let vt_a = thermal_voltage(params, t_cell_k) * params.a;
    let i_0 = saturation_current(params, t_cell_k)?;
    let x = v + params.r_s * i;
    Ok(-i_0 * np * (params.r_s / vt_a) * checked_exp(x / vt_a)? - params.r_s / params.r_p - 1.0)
}

const CURRENT_TOL: f64 = 1e-9;
const MAX_NEWTON_ITER: usize = 100;

/// Solve the implicit equation for the array current at voltage `v` [A].
///
/// Damped Newton from the photo-current guess; the step is halved whenever
/// the residual magnitude fails to decrease. Currents beyond open circuit
/// come back negative, unmodified.
pub fn solve_current(params: &PVArrayParams, v: f64, g: f64, t_cell_k: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::Domain(format!("negative array voltage {v}")));
    }
    let np = params.n_p as f64;
    let mut i = photo_current(params, g, t_cell_k) * np;
    let mut f = residual(params, i, v, g, t_cell_k)?;
    for _ in 0..MAX_NEWTON_ITER {
        if f.abs() < CURRENT_TOL {
            return Ok(i);
        }
        let df = residual_derivative(params, i, v, t_cell_k)?;
        if df == 0.0 {
            return Err(Error::Numeric("zero derivative in current solve".into()));
        }
        let mut step = -f / df;
        let mut halvings = 0;
        loop {
            match residual(params, i + step, v, g, t_cell_k) {
                Ok(f_new) if f_new.abs() < f.abs() => {
                    i += step;
                    f = f_new;
                    break;
                }
                _ if halvings < 60 => {
                    step *= 0.5;
                    halvings += 1;
                }
                Ok(_) => {
                    return Err(Error::Numeric(format!(
                        "current solve stalled, residual {f:.3e} A"
                    )));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if f.abs() < CURRENT_TOL {
        Ok(i)
    } else {
        Err(Error::Numeric(format!(
            "current solve did not converge in {MAX_NEWTON_ITER} iterations, residual {f:.3e} A"
        )))
    }
}

/// Open-circuit voltage at the given conditions, located by bisection on
/// the solved current crossing zero.
pub fn open_circuit_voltage(params: &PVArrayParams, g: f64, t_cell_k: f64) -> Result<f64> {
    if g <= 0.0 {
        return Err(Error::Domain(
            "open-circuit voltage undefined at zero irradiance".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = params.v_oc_n + params.k_v * (t_cell_k - params.t_n_k).max(0.0) + 5.0;
    // ensure the bracket: expand upward until the current is negative
    for _ in 0..20 {
        if solve_current(params, hi, g, t_cell_k)? < 0.0 {
            break;
        }
        hi += 5.0;
    }
    if solve_current(params, hi, g, t_cell_k)? >= 0.0 {
        return Err(Error::Numeric("failed to bracket open circuit".into()));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if solve_current(params, mid, g, t_cell_k)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sample the I-V curve on a uniform voltage grid over [0, Voc].
pub fn iv_curve(
    params: &PVArrayParams,
    g: f64,
    t_cell_k: f64,
    n_points: usize,
) -> Result<Vec<OperatingPoint>> {
    if n_points < 2 {
        return Err(Error::Domain("n_points must be >= 2".into()));
    }
    let voc = open_circuit_voltage(params, g, t_cell_k)?;
    (0..n_points)
        .map(|k| {
            let v = voc * k as f64 / (n_points - 1) as f64;
            Ok(OperatingPoint::new(v, solve_current(params, v, g, t_cell_k)?))
        })
        .collect()
}

/// Maximum power point: coarse 200-point scan followed by golden-section
/// refinement to dV < 1e-4 V. Zero irradiance gives the zero point.
pub fn mpp(params: &PVArrayParams, g: f64, t_cell_k: f64) -> Result<OperatingPoint> {
    if g < 0.0 {
        return Err(Error::Domain(format!("negative irradiance {g}")));
    }
    if g == 0.0 {
        return Ok(OperatingPoint { v: 0.0, i: 0.0, p: 0.0 });
    }
    let voc = open_circuit_voltage(params, g, t_cell_k)?;
    let power = |v: f64| -> Result<f64> { Ok(v * solve_current(params, v, g, t_cell_k)?) };
    let n = 200;
    let mut best_k: usize = 0;
    let mut best_p = 0.0;
    for k in 0..=n {
        let p = power(voc * k as f64 / n as f64)?;
        if p > best_p {
            best_p = p;
            best_k = k;
        }
    }
    let mut lo = voc * best_k.saturating_sub(1) as f64 / n as f64;
    let mut hi = voc * (best_k + 1).min(n) as f64 / n as f64;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut p1 = power(x1)?;
    let mut p2 = power(x2)?;
    while hi - lo > 1e-4 {
        if p1 < p2 {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + phi * (hi - lo);
            p2 = power(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - phi * (hi - lo);
            p1 = power(x1)?;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok(OperatingPoint::new(v, solve_current(params, v, g, t_cell_k)?))
}
