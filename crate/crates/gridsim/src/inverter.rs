//! Inverter reference computation and the simplified RL circuit.
//!
//! The inverter injects `i_pv(t) = |i_pv| cos(wt + phi)` into the shunt
//! resistance R; the inductor current obeys `R(i_pv - i_L) = L di_L/dt + v_g`.
//! In phasor steady state `I_L = (R I_pv - V_g)/(R + jwL)`. References come
//! from the desired powers: `phi_L* = arctan(Q*/P*)` and
//! `I_L,MV* = P*/(|v_MV| cos phi_L*)`, scaled to the LV side by the
//! transformer ratio N.
//!
//! Phasor convention: rms phasors, grid voltage at angle 0, positive Q
//! means the current lags the voltage.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simplified circuit parameters.
///
/// Defaults: R = 1 Ω and ωL = 1 Ω at 50 Hz, chosen for hand-checkable
/// arithmetic; 220 V rms LV grid; N for the 4.8 kV feeder's line-to-neutral
/// voltage.
#[derive(Debug, Clone, Copy)]
pub struct InverterParams {
    pub r: f64,
    pub l: f64,
    pub omega: f64,
    pub v_lv_rms: f64,
    pub turns_ratio_n: f64,
}

impl Default for InverterParams {
    fn default() -> Self {
        let omega = 2.0 * PI * 50.0;
        InverterParams {
            r: 1.0,
            l: 1.0 / omega, // 3.183 mH, ωL = 1 Ω
            omega,
            v_lv_rms: 220.0,
            turns_ratio_n: 2771.2812921102035 / 220.0,
        }
    }
}

impl InverterParams {
    pub fn validate(&self) -> Result<()> {
        if self.r <= 0.0 || self.l <= 0.0 || self.omega <= 0.0 || self.turns_ratio_n <= 0.0 {
            return Err(Error::Validation(
                "inverter parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Series impedance R + jωL.
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.r, self.omega * self.l)
    }
}

/// Desired active/reactive power at the MV busbar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReference {
    pub p_star: f64,
    pub q_star: f64,
}

/// Current references derived from a power reference.
#[derive(Debug, Clone, Copy)]
pub struct CurrentReference {
    /// Power-factor angle arctan(Q*/P*) [rad].
    pub phi_l_star: f64,
    /// MV-side rms current magnitude [A].
    pub i_l_mv_star: f64,
    /// LV-side rms current magnitude [A].
    pub i_l_star: f64,
}

/// Compute current references from desired powers at MV voltage `v_mv_rms`.
pub fn compute_reference(
    reference: &PowerReference,
    v_mv_rms: f64,
    inv: &InverterParams,
) -> Result<CurrentReference> {
    if v_mv_rms <= 0.0 {
        return Err(Error::Domain(format!("nonpositive MV voltage {v_mv_rms}")));
    }
    if reference.p_star <= 0.0 {
        return Err(Error::Domain(format!(
            "P* must be positive (generating), got {}",
            reference.p_star
        )));
    }
    let phi = (reference.q_star / reference.p_star).atan();
    let i_mv = reference.p_star / (v_mv_rms * phi.cos());
    Ok(CurrentReference {
        phi_l_star: phi,
        i_l_mv_star: i_mv,
        i_l_star: inv.turns_ratio_n * i_mv,
    })
}

/// Steady-state inductor current phasor for a given injected current phasor.
pub fn phasor_solve_forward(
    i_pv: Complex64,
    inv: &InverterParams,
    v_g: Complex64,
) -> Complex64 {
    (inv.r * i_pv - v_g) / inv.z()
}

/// Injected-current phasor (|i_pv|, phi) that realizes a current reference,
/// with the grid voltage as the angle reference and lagging positive Q.
pub fn phasor_solve_inverse(
    target: &CurrentReference,
    inv: &InverterParams,
    v_g: Complex64,
) -> (f64, f64) {
    let i_l = Complex64::from_polar(target.i_l_star, -target.phi_l_star);
    let i_pv = (inv.z() * i_l + v_g) / inv.r;
    (i_pv.norm(), i_pv.arg())
}

/// Per-period P (magnitude) / PI (phase) controller gains.
///
/// The magnitude gain is loop-gain normalized (1.0 would cancel the error
/// in one period on the nominal plant). Defaults settle well within 20
/// grid periods for the default R, L.
#[derive(Debug, Clone, Copy)]
pub struct ControllerGains {
    pub k_p_mag: f64,
    pub k_p_phase: f64,
    /// Integral gain [1/s] on the phase error.
    pub k_i_phase: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k_p_mag: 0.5,
            k_p_phase: 0.5,
            k_i_phase: 25.0,
        }
    }
}

/// Where the tracking simulation starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStart {
    /// Zero inductor current and zero controller command.
    Zero,
    /// Inductor state and command at the phasor_solve_inverse equilibrium.
    Equilibrium,
}

/// Per-period measurement of the inductor current.
#[derive(Debug, Clone, Copy)]
pub struct PeriodSample {
    pub period: usize,
    pub i_l_rms: f64,
    pub i_l_phase: f64,
    /// Commanded |i_pv| (rms) at the end of the period.
    pub i_pv_mag_rms: f64,
    /// Commanded phi at the end of the period.
    pub i_pv_phase: f64,
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub periods: Vec<PeriodSample>,
    /// Final-period phasor error below 1% of the target.
    pub converged: bool,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

const TRACK_DT: f64 = 1e-5;

/// Time-domain tracking of a current reference with per-period discrete
/// P/PI control of the injected current's magnitude and phase.
///
/// The controller commands the residual drive `u = R i_pv - v_g` (grid
/// voltage feedforward); the actual injection is the single cosine
/// `i_pv(t) = |i_pv| cos(wt + phi)` recovered from `(v_g + u)/R`.
pub fn track_references(
    target: &CurrentReference,
    inv: &InverterParams,
    gains: &ControllerGains,
    duration: f64,
) -> Result<TrackResult> {
    track_references_from(target, inv, gains, duration, TrackStart::Zero)
}

pub fn track_references_from(
    target: &CurrentReference,
    inv: &InverterParams,
    gains: &ControllerGains,
    duration: f64,
    start: TrackStart,
) -> Result<TrackResult> {
    inv.validate()?;
    let period = 2.0 * PI / inv.omega;
    let n_periods = (duration / period).floor() as usize;
    if n_periods < 20 {
        return Err(Error::Domain(format!(
            "duration must cover >= 20 grid periods, got {n_periods}"
        )));
    }
    let v_g_rms = inv.v_lv_rms;
    let z = inv.z();
    // target inductor-current phasor (rms) and matching drive phasor
    let i_l_target = Complex64::from_polar(target.i_l_star, -target.phi_l_star);
    let theta_target = -target.phi_l_star;

    // controller command: drive phasor u (peak volts) at angle phi_u
    let (mut u_mag, mut u_phase, mut i_l_state) = match start {
        TrackStart::Zero => (0.0, 0.0, 0.0),
        TrackStart::Equilibrium => {
            let u = z * i_l_target; // rms
            let i_l0 = (i_l_target * 2f64.sqrt()).re; // value at t = 0
            (u.norm() * 2f64.sqrt(), u.arg(), i_l0)
        }
    };
    let mut phase_integral = match start {
        TrackStart::Zero => 0.0,
        TrackStart::Equilibrium => {
            if gains.k_i_phase != 0.0 {
                wrap_angle(z.arg() + theta_target) / gains.k_i_phase
            } else {
                0.0
            }
        }
    };

    let steps_per_period = (period / TRACK_DT).round() as usize;
    let dt = period / steps_per_period as f64;
    let mut samples = Vec::with_capacity(n_periods);
    let mut rms_history: Vec<f64> = Vec::with_capacity(n_periods);

    for p in 0..n_periods {
        // i_pv(t) = |i_pv| cos(wt + phi) from the feedforward + command
        let i_pv_phasor_peak =
            (Complex64::new(v_g_rms * 2f64.sqrt(), 0.0) + Complex64::from_polar(u_mag, u_phase))
                / inv.r;
        let (ipv_mag, ipv_phase) = (i_pv_phasor_peak.norm(), i_pv_phasor_peak.arg());

        let t0 = p as f64 * period;
        let deriv = |t: f64, il: f64| -> f64 {
            let i_pv = ipv_mag * (inv.omega * t + ipv_phase).cos();
            let v_g = v_g_rms * 2f64.sqrt() * (inv.omega * t).cos();
            (inv.r * (i_pv - il) - v_g) / inv.l
        };
        // RK4 over one period, accumulating the fundamental Fourier component
        let mut acc_cos = 0.0;
        let mut acc_sin = 0.0;
        for s in 0..steps_per_period {
            let t = t0 + s as f64 * dt;
            acc_cos += i_l_state * (inv.omega * t).cos();
            acc_sin += i_l_state * (inv.omega * t).sin();
            let k1 = deriv(t, i_l_state);
            let k2 = deriv(t + 0.5 * dt, i_l_state + 0.5 * dt * k1);
            let k3 = deriv(t + 0.5 * dt, i_l_state + 0.5 * dt * k2);
            let k4 = deriv(t + dt, i_l_state + dt * k3);
            i_l_state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let a = 2.0 * acc_cos / steps_per_period as f64;
        let b = -2.0 * acc_sin / steps_per_period as f64;
        let amp = (a * a + b * b).sqrt();
        let meas_rms = amp / 2f64.sqrt();
        let meas_phase = if meas_rms > 1e-9 * target.i_l_star.max(1.0) {
            b.atan2(a)
        } else {
            0.0
        };

        rms_history.push(meas_rms);
        if rms_history.len() > 5 {
            let old = rms_history[rms_history.len() - 6];
            if old > 1e-9 && meas_rms > 10.0 * old && meas_rms > 10.0 * target.i_l_star {
                return Err(Error::Convergence(format!(
                    "tracking diverged: rms grew from {old:.3e} to {meas_rms:.3e} A over 5 periods"
                )));
            }
        }

        // magnitude: incremental P law, loop-gain normalized
        let e_mag = target.i_l_star - meas_rms;
        u_mag = (u_mag + gains.k_p_mag * 2f64.sqrt() * z.norm() * e_mag).max(0.0);
        // phase: position-form PI on the measured phase error
        let e_phase = if meas_rms > 1e-6 * target.i_l_star.max(1.0) {
            wrap_angle(theta_target - meas_phase)
        } else {
            0.0
        };
        phase_integral += e_phase * period;
        u_phase = wrap_angle(gains.k_p_phase * e_phase + gains.k_i_phase * phase_integral);

        samples.push(PeriodSample {
            period: p + 1,
            i_l_rms: meas_rms,
            i_l_phase: meas_phase,
            i_pv_mag_rms: ipv_mag / 2f64.sqrt(),
            i_pv_phase: ipv_phase,
        });
    }

    let last = samples.last().unwrap();
    let meas = Complex64::from_polar(last.i_l_rms, last.i_l_phase);
    let converged = (meas - i_l_target).norm() <= 0.01 * i_l_target.norm();
    Ok(TrackResult {
        periods: samples,
        converged,
    })
}
