//! Reduction of three-phase line matrices to positive-sequence single-phase
//! parameters, and assembly of the per-unit nodal admittance matrix.
//!
//! For a transposed line the phase matrix averages to a self impedance
//! `z_s` (mean diagonal) and a mutual impedance `z_m` (mean of the three
//! upper-triangle entries). Symmetrical components then give
//! `z1 = z_s - z_m` and `z0 = z_s + 2 z_m`; balanced operation only needs
//! the positive sequence.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{LineConfigMatrix, NetworkModel, LINK_IMPEDANCE_PU};

/// Positive-sequence parameters of one line configuration.
#[derive(Debug, Clone, Copy)]
pub struct SequenceLineParams {
    pub config_id: u32,
    /// Positive-sequence series impedance [Ω/mile].
    pub z_positive: Complex64,
    /// Positive-sequence shunt susceptance [µS/mile].
    pub b_positive: f64,
}

/// Mean diagonal and mean upper-triangle entry of a 3x3 phase matrix.
///
/// Published 723/724 matrices are not exactly symmetric in the
/// off-diagonal signs; the three entries (1,2), (1,3), (2,3) are averaged
/// exactly as tabulated.
pub fn transpose_average(z_phase: &[[Complex64; 3]; 3]) -> (Complex64, Complex64) {
    let z_self = (z_phase[0][0] + z_phase[1][1] + z_phase[2][2]) / 3.0;
    let z_mutual = (z_phase[0][1] + z_phase[0][2] + z_phase[1][2]) / 3.0;
    (z_self, z_mutual)
}

/// Positive-sequence impedance of a transposed line.
pub fn positive_sequence(z_self: Complex64, z_mutual: Complex64) -> Complex64 {
    z_self - z_mutual
}

/// Zero-sequence impedance; unused by the balanced solver but exposed.
pub fn zero_sequence(z_self: Complex64, z_mutual: Complex64) -> Complex64 {
    z_self + 2.0 * z_mutual
}

/// Positive-sequence shunt susceptance [µS/mile]. For the diagonal matrices
/// of the bundled configurations this is just the repeated diagonal value.
pub fn positive_sequence_shunt(b_shunt: &[[f64; 3]; 3]) -> f64 {
    let b_self = (b_shunt[0][0] + b_shunt[1][1] + b_shunt[2][2]) / 3.0;
    let b_mutual = (b_shunt[0][1] + b_shunt[0][2] + b_shunt[1][2]) / 3.0;
    b_self - b_mutual
}

/// Reduce every configuration of a network to its sequence parameters.
pub fn reduce_configs(
    configs: &BTreeMap<u32, LineConfigMatrix>,
) -> BTreeMap<u32, SequenceLineParams> {
    configs
        .iter()
        .map(|(&id, cfg)| {
            let (zs, zm) = transpose_average(&cfg.z_phase);
            (
                id,
                SequenceLineParams {
                    config_id: id,
                    z_positive: positive_sequence(zs, zm),
                    b_positive: positive_sequence_shunt(&cfg.b_shunt),
                },
            )
        })
        .collect()
}

/// One branch of the assembled network in per-unit: series admittance plus
/// half the total shunt admittance at each end (π-model).
#[derive(Debug, Clone, Copy)]
pub struct BranchAdmittance {
    pub from_bus: u32,
    pub to_bus: u32,
    pub y_series: Complex64,
    pub y_shunt_half: Complex64,
}

/// Dense nodal admittance matrix in per-unit.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix {
    pub order: usize,
    pub y: DMatrix<Complex64>,
    pub bus_index: BTreeMap<u32, usize>,
}

/// Per-unit branch list for every segment and transformer link.
pub fn branch_admittances(
    net: &NetworkModel,
    seq: &BTreeMap<u32, SequenceLineParams>,
) -> Result<Vec<BranchAdmittance>> {
    let mut branches = Vec::with_capacity(net.segments.len() + net.links.len());
    for s in &net.segments {
        let params = seq.get(&s.config_id).ok_or_else(|| {
            Error::Validation(format!(
                "no sequence parameters for config {}",
                s.config_id
            ))
        })?;
        let z_ohm = params.z_positive * s.length_miles;
        if z_ohm.norm() == 0.0 || s.length_miles <= 0.0 {
            return Err(Error::Numeric(format!(
                "singular branch {}-{}",
                s.from_bus, s.to_bus
            )));
        }
        let z_pu = z_ohm / net.base.z_base;
        // total shunt B in siemens, π-model half at each end
        let b_total_s = params.b_positive * 1e-6 * s.length_miles;
        let y_shunt_half = Complex64::new(0.0, b_total_s / 2.0) / net.base.y_base;
        branches.push(BranchAdmittance {
            from_bus: s.from_bus,
            to_bus: s.to_bus,
            y_series: z_pu.inv(),
            y_shunt_half,
        });
    }
    for l in &net.links {
        branches.push(BranchAdmittance {
            from_bus: l.from_bus,
            to_bus: l.to_bus,
            y_series: Complex64::new(1.0 / LINK_IMPEDANCE_PU, 0.0),
            y_shunt_half: Complex64::new(0.0, 0.0),
        });
    }
    Ok(branches)
}

/// Assemble the per-unit nodal admittance matrix of the reduced network.
pub fn assemble_ybus(
    net: &NetworkModel,
    seq: &BTreeMap<u32, SequenceLineParams>,
) -> Result<AdmittanceMatrix> {
    let branches = branch_admittances(net, seq)?;
    let bus_index: BTreeMap<u32, usize> = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let n = bus_index.len();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for b in &branches {
        let i = bus_index[&b.from_bus];
        let j = bus_index[&b.to_bus];
        y[(i, j)] -= b.y_series;
        y[(j, i)] -= b.y_series;
        y[(i, i)] += b.y_series + b.y_shunt_half;
        y[(j, j)] += b.y_series + b.y_shunt_half;
    }
    Ok(AdmittanceMatrix {
        order: n,
        y,
        bus_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_dir;
    use crate::grid::{load_network, standard_line_configs};
    use num_complex::Complex64;

    fn cfg(id: u32) -> LineConfigMatrix {
        standard_line_configs().remove(&id).unwrap()
    }

    // Independent oracle: plain loops over the matrix entries.
    fn oracle_z1(z: &[[Complex64; 3]; 3]) -> Complex64 {
        let diag = z[0][0] + z[1][1] + z[2][2];
        let off = z[0][1] + z[0][2] + z[1][2];
        diag / 3.0 - off / 3.0
    }

    #[test]
    fn transpose_average_config_721() {
        let (zs, zm) = transpose_average(&cfg(721).z_phase);
        assert!((zs - Complex64::new(0.283266666666667, 0.194866666666667)).norm() < 1e-12);
        assert!((zm - Complex64::new(0.0561, -0.0384333333333333)).norm() < 1e-12);
    }

    #[test]
    fn transpose_average_config_724() {
        let (zs, zm) = transpose_average(&cfg(724).z_phase);
        assert!((zs - Complex64::new(2.09906666666667, 0.7638)).norm() < 1e-12);
        assert!((zm - Complex64::new(0.511133333333333, 0.2533)).norm() < 1e-12);
    }

    #[test]
    fn transpose_average_identity_like() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let z = [[one, zero, zero], [zero, one, zero], [zero, zero, one]];
        let (zs, zm) = transpose_average(&z);
        assert_eq!(zs, Complex64::new(1.0, 0.0));
        assert_eq!(zm, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn positive_sequence_matches_oracle_all_configs() {
        for (id, c) in standard_line_configs() {
            let (zs, zm) = transpose_average(&c.z_phase);
            let z1 = positive_sequence(zs, zm);
            assert!((z1 - oracle_z1(&c.z_phase)).norm() < 1e-15, "config {id}");
            assert!(z1.re > 0.0, "config {id}");
        }
    }

    #[test]
    fn positive_sequence_frozen_values() {
        let (zs, zm) = transpose_average(&cfg(721).z_phase);
        let z1 = positive_sequence(zs, zm);
        assert!((z1 - Complex64::new(0.227166666666667, 0.2333)).norm() < 1e-12);
        let (zs, zm) = transpose_average(&cfg(724).z_phase);
        let z1 = positive_sequence(zs, zm);
        assert!((z1 - Complex64::new(1.58793333333333, 0.5105)).norm() < 1e-12);
    }

    #[test]
    fn zero_sequence_frozen_values() {
        let (zs, zm) = transpose_average(&cfg(721).z_phase);
        let z0 = zero_sequence(zs, zm);
        assert!((z0 - Complex64::new(0.395466666666667, 0.118)).norm() < 1e-12);
    }

    #[test]
    fn shunt_reduction() {
        assert!((positive_sequence_shunt(&cfg(721).b_shunt) - 159.7919).abs() < 1e-12);
        assert!((positive_sequence_shunt(&cfg(724).b_shunt) - 60.2483).abs() < 1e-12);
        assert_eq!(positive_sequence_shunt(&[[0.0; 3]; 3]), 0.0);
    }

    #[test]
    fn phase_permutation_invariance() {
        // simultaneous row/column permutation of the phases leaves z1 unchanged
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for c in standard_line_configs().values() {
            let (zs, zm) = transpose_average(&c.z_phase);
            let base = positive_sequence(zs, zm);
            assert!(base.re > 0.0);
            for p in perms {
                let mut zp = [[Complex64::new(0.0, 0.0); 3]; 3];
                for r in 0..3 {
                    for cc in 0..3 {
                        zp[r][cc] = c.z_phase[p[r]][p[cc]];
                    }
                }
                let (zs, zm) = transpose_average(&zp);
                assert!((positive_sequence(zs, zm) - base).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn two_bus_ybus() {
        use crate::grid::{BaseSystem, Bus, BusKind, NetworkModel, Segment};
        let net = NetworkModel {
            buses: vec![
                Bus { id: 1, kind: BusKind::Slack, pv_array_count: 0 },
                Bus { id: 2, kind: BusKind::Load, pv_array_count: 0 },
            ],
            segments: vec![Segment {
                from_bus: 1,
                to_bus: 2,
                length_miles: 1.0,
                config_id: 721,
            }],
            links: vec![],
            configs: standard_line_configs(),
            base: BaseSystem::new(2771.2812921102035, 2.5e6).unwrap(),
        };
        net.validate().unwrap();
        let seq = reduce_configs(&net.configs);
        let y = assemble_ybus(&net, &seq).unwrap();
        let z1_pu = Complex64::new(0.227166666666667, 0.2333) / net.base.z_base;
        let expected = -z1_pu.inv();
        assert!((y.y[(0, 1)] - expected).norm() < 1e-9);
        assert!((y.y[(1, 0)] - expected).norm() < 1e-9);
    }

    #[test]
    fn single_bus_empty_ybus() {
        use crate::grid::{BaseSystem, Bus, BusKind, NetworkModel};
        let net = NetworkModel {
            buses: vec![Bus { id: 1, kind: BusKind::Slack, pv_array_count: 0 }],
            segments: vec![],
            links: vec![],
            configs: standard_line_configs(),
            base: BaseSystem::new(1.0, 1.0).unwrap(),
        };
        let seq = reduce_configs(&net.configs);
        let y = assemble_ybus(&net, &seq).unwrap();
        assert_eq!(y.order, 1);
        assert_eq!(y.y[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn bundled_feeder_ybus_symmetry_and_row_sums() {
        let net = load_network(&data_dir().join("ieee37.json")).unwrap();
        let seq = reduce_configs(&net.configs);
        let branches = branch_admittances(&net, &seq).unwrap();
        let y = assemble_ybus(&net, &seq).unwrap();
        for i in 0..y.order {
            for j in 0..i {
                assert!((y.y[(i, j)] - y.y[(j, i)]).norm() < 1e-14);
            }
        }
        // row sums equal the total shunt admittance attached to each bus
        let mut shunt: BTreeMap<u32, Complex64> = BTreeMap::new();
        for b in &branches {
            *shunt.entry(b.from_bus).or_insert(Complex64::new(0.0, 0.0)) += b.y_shunt_half;
            *shunt.entry(b.to_bus).or_insert(Complex64::new(0.0, 0.0)) += b.y_shunt_half;
        }
        for (bus, &i) in &y.bus_index {
            let row_sum: Complex64 = (0..y.order).map(|j| y.y[(i, j)]).sum();
            let expected = shunt.get(bus).copied().unwrap_or(Complex64::new(0.0, 0.0));
            assert!((row_sum - expected).norm() < 1e-12, "bus {bus}");
        }
    }
}
