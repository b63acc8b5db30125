//! Simulation toolkit for single-phase distribution feeders with solar
//! generation: a balanced reduction of the IEEE 37 test feeder, a
//! single-diode PV array model with maximum-power-point search, a
//! simplified RL inverter with phasor and time-domain control, and a
//! Newton-Raphson power flow driven by a 24-hour load/weather scenario.
//!
//! # Quick start
//!
//! Reduce the three-phase line data and solve one scenario hour:
//!
//! ```
//! use gridsim::grid::load_network;
//! use gridsim::sequence::reduce_configs;
//! use gridsim::powerflow::{solve_network, BusInjection, DEFAULT_TOL, DEFAULT_MAX_ITER};
//! use num_complex::Complex64;
//!
//! let net = load_network(&gridsim::data_dir().join("ieee37.json"))?;
//! let seq = reduce_configs(&net.configs);
//! let load = BusInjection { bus: 738, p: -0.004, q: -0.002 }; // p.u.
//! let sol = solve_network(&net, &seq, &[load], Complex64::new(1.0, 0.0),
//!                         DEFAULT_TOL, DEFAULT_MAX_ITER)?;
//! assert!(sol.voltages[&738].norm() < 1.0);
//! # Ok::<(), gridsim::error::Error>(())
//! ```
//!
//! Evaluate a PV array at noon conditions:
//!
//! ```
//! use gridsim::pv::{load_pv_params, cell_temperature, mpp};
//!
//! let params = load_pv_params(&gridsim::data_dir().join("kc200gt.toml"))?;
//! let t_cell = cell_temperature(18.76, 565.96, params.noct_c);
//! let point = mpp(&params, 565.96, t_cell)?;
//! assert!(point.p > 100.0 && point.p < 110.0); // one array, ~104 W
//! # Ok::<(), gridsim::error::Error>(())
//! ```

pub mod daily;
pub mod error;
pub mod format;
pub mod grid;
pub mod inverter;
pub mod plot;
pub mod powerflow;
pub mod pv;
pub mod sequence;

use std::path::PathBuf;

/// Directory holding the bundled datasets. The `GRIDSIM_DATA` environment
/// variable overrides the crate's own `data/` directory.
pub fn data_dir() -> PathBuf {
    match std::env::var_os("GRIDSIM_DATA") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"),
    }
}
