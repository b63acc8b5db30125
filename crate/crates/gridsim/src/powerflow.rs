//! Single-phase AC power flow on the reduced network.
//!
//! `solve_newton` is the production path: polar Newton-Raphson on the PQ
//! mismatch equations with an analytic Jacobian. `solve_sweep` is an
//! independent backward/forward sweep for radial cross-checking.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::sequence::{branch_admittances, AdmittanceMatrix, BranchAdmittance, SequenceLineParams};

/// Net complex power injection at a bus (generation minus load) [p.u.].
#[derive(Debug, Clone, Copy)]
pub struct BusInjection {
    pub bus: u32,
    pub p: f64,
    pub q: f64,
}

/// Complex power entering a branch from each end [p.u.].
#[derive(Debug, Clone, Copy)]
pub struct BranchFlow {
    pub from_bus: u32,
    pub to_bus: u32,
    pub s_from: Complex64,
    pub s_to: Complex64,
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub voltages: BTreeMap<u32, Complex64>,
    pub branch_flows: Vec<BranchFlow>,
    pub total_loss: Complex64,
    pub iterations: usize,
    pub max_mismatch: f64,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 30;

/// Power mismatch (P then Q for every non-slack bus) at the given state.
///
/// `theta` and `vmag` are indexed like the admittance matrix rows; the
/// slack entry is held at its fixed value and carries no mismatch row.
pub fn mismatch_vector(
    y: &AdmittanceMatrix,
    p_spec: &[f64],
    q_spec: &[f64],
    slack_idx: usize,
    theta: &[f64],
    vmag: &[f64],
) -> DVector<f64> {
    let n = y.order;
    let pq: Vec<usize> = (0..n).filter(|&i| i != slack_idx).collect();
    let mut m = DVector::zeros(2 * pq.len());
    for (r, &i) in pq.iter().enumerate() {
        let (p_calc, q_calc) = calc_power(y, theta, vmag, i);
        m[r] = p_spec[i] - p_calc;
        m[pq.len() + r] = q_spec[i] - q_calc;
    }
    m
}

fn calc_power(y: &AdmittanceMatrix, theta: &[f64], vmag: &[f64], i: usize) -> (f64, f64) {
    let mut p = 0.0;
    let mut q = 0.0;
    for k in 0..y.order {
        let g = y.y[(i, k)].re;
        let b = y.y[(i, k)].im;
        let t = theta[i] - theta[k];
        p += vmag[i] * vmag[k] * (g * t.cos() + b * t.sin());
        q += vmag[i] * vmag[k] * (g * t.sin() - b * t.cos());
    }
    (p, q)
}

/// Analytic Jacobian of the mismatch vector with respect to the non-slack
/// angles and magnitudes (same ordering as `mismatch_vector`). Sign
/// convention: J maps state increments to mismatch *decreases*, i.e.
/// J dx = m solves the Newton step.
pub fn jacobian(
    y: &AdmittanceMatrix,
    slack_idx: usize,
    theta: &[f64],
    vmag: &[f64],
) -> DMatrix<f64> {
    let n = y.order;
    let pq: Vec<usize> = (0..n).filter(|&i| i != slack_idx).collect();
    let m = pq.len();
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for (r, &i) in pq.iter().enumerate() {
        let (p_i, q_i) = calc_power(y, theta, vmag, i);
        let g_ii = y.y[(i, i)].re;
        let b_ii = y.y[(i, i)].im;
        for (cidx, &k) in pq.iter().enumerate() {
            if k == i {
                j[(r, cidx)] = -q_i - b_ii * vmag[i] * vmag[i];
                j[(r, m + cidx)] = p_i / vmag[i] + g_ii * vmag[i];
                j[(m + r, cidx)] = p_i - g_ii * vmag[i] * vmag[i];
                j[(m + r, m + cidx)] = q_i / vmag[i] - b_ii * vmag[i];
            } else {
                let g = y.y[(i, k)].re;
                let b = y.y[(i, k)].im;
                let t = theta[i] - theta[k];
                j[(r, cidx)] = vmag[i] * vmag[k] * (g * t.sin() - b * t.cos());
                j[(r, m + cidx)] = vmag[i] * (g * t.cos() + b * t.sin());
                j[(m + r, cidx)] = -vmag[i] * vmag[k] * (g * t.cos() + b * t.sin());
                j[(m + r, m + cidx)] = vmag[i] * (g * t.sin() - b * t.cos());
            }
        }
    }
    j
}

/// Polar Newton-Raphson power flow from a flat start.
pub fn solve_newton(
    y: &AdmittanceMatrix,
    injections: &[BusInjection],
    slack_bus: u32,
    slack_v: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    if tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let n = y.order;
    let slack_idx = *y
        .bus_index
        .get(&slack_bus)
        .ok_or_else(|| Error::Validation(format!("slack bus {slack_bus} not in matrix")))?;
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for inj in injections {
        let &i = y
            .bus_index
            .get(&inj.bus)
            .ok_or_else(|| Error::Validation(format!("injection at unknown bus {}", inj.bus)))?;
        if i == slack_idx {
            return Err(Error::Validation(
                "slack bus carries no specified injection".into(),
            ));
        }
        p_spec[i] += inj.p;
        q_spec[i] += inj.q;
    }

    // flat start at the slack magnitude and angle
    let mut theta = vec![slack_v.arg(); n];
    let mut vmag = vec![slack_v.norm(); n];

    let pq: Vec<usize> = (0..n).filter(|&i| i != slack_idx).collect();
    let mut history = Vec::new();
    for iter in 0..=max_iter {
        let m = mismatch_vector(y, &p_spec, &q_spec, slack_idx, &theta, &vmag);
        let max_mismatch = m.amax();
        history.push(max_mismatch);
        if max_mismatch < tol {
            return Ok(finish_solution(y, &theta, &vmag, iter, max_mismatch));
        }
        if iter == max_iter {
            break;
        }
        let j = jacobian(y, slack_idx, &theta, &vmag);
        let dx = j
            .lu()
            .solve(&m)
            .ok_or_else(|| Error::Numeric("singular Newton correction system".into()))?;
        for (r, &i) in pq.iter().enumerate() {
            theta[i] += dx[r];
            vmag[i] += dx[pq.len() + r];
        }
    }
    Err(Error::Convergence(format!(
        "Newton power flow: mismatch history {:?}",
        history
            .iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
    )))
}

fn finish_solution(
    y: &AdmittanceMatrix,
    theta: &[f64],
    vmag: &[f64],
    iterations: usize,
    max_mismatch: f64,
) -> PowerFlowSolution {
    let voltages = y
        .bus_index
        .iter()
        .map(|(&bus, &i)| (bus, Complex64::from_polar(vmag[i], theta[i])))
        .collect();
    PowerFlowSolution {
        voltages,
        branch_flows: Vec::new(),
        total_loss: Complex64::new(0.0, 0.0),
        iterations,
        max_mismatch,
    }
}

/// Per-branch complex flows and the total series+shunt loss.
pub fn branch_flows(
    branches: &[BranchAdmittance],
    voltages: &BTreeMap<u32, Complex64>,
) -> (Vec<BranchFlow>, Complex64) {
    let mut flows = Vec::with_capacity(branches.len());
    let mut total = Complex64::new(0.0, 0.0);
    for b in branches {
        let v_f = voltages[&b.from_bus];
        let v_t = voltages[&b.to_bus];
        let i_f = (v_f - v_t) * b.y_series + v_f * b.y_shunt_half;
        let i_t = (v_t - v_f) * b.y_series + v_t * b.y_shunt_half;
        let s_from = v_f * i_f.conj();
        let s_to = v_t * i_t.conj();
        total += s_from + s_to;
        flows.push(BranchFlow {
            from_bus: b.from_bus,
            to_bus: b.to_bus,
            s_from,
            s_to,
        });
    }
    (flows, total)
}

/// Newton solve plus branch flows on a validated network.
pub fn solve_network(
    net: &NetworkModel,
    seq: &BTreeMap<u32, SequenceLineParams>,
    injections: &[BusInjection],
    slack_v: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    let y = crate::sequence::assemble_ybus(net, seq)?;
    let mut sol = solve_newton(&y, injections, net.slack_bus(), slack_v, tol, max_iter)?;
    let branches = branch_admittances(net, seq)?;
    let (flows, loss) = branch_flows(&branches, &sol.voltages);
    sol.branch_flows = flows;
    sol.total_loss = loss;
    Ok(sol)
}

/// Backward/forward sweep power flow for radial networks.
///
/// Backward pass aggregates branch currents from the leaves (injection
/// currents plus nodal shunt currents at the present voltages); the forward
/// pass reapplies voltage drops from the slack. Iterates until the largest
/// voltage change falls below `tol`.
pub fn solve_sweep(
    net: &NetworkModel,
    seq: &BTreeMap<u32, SequenceLineParams>,
    injections: &[BusInjection],
    slack_v: Complex64,
    tol: f64,
) -> Result<PowerFlowSolution> {
    let branches = branch_admittances(net, seq)?;
    let slack = net.slack_bus();

    // orient the tree away from the slack
    let mut adj: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (k, b) in branches.iter().enumerate() {
        adj.entry(b.from_bus).or_default().push(k);
        adj.entry(b.to_bus).or_default().push(k);
    }
    let mut parent_branch: BTreeMap<u32, usize> = BTreeMap::new();
    let mut parent_of: BTreeMap<u32, u32> = BTreeMap::new();
    let mut children: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut order = vec![slack];
    let mut visited: BTreeMap<u32, bool> = net.buses.iter().map(|b| (b.id, false)).collect();
    visited.insert(slack, true);
    let mut head = 0;
    while head < order.len() {
        let bus = order[head];
        head += 1;
        for &k in adj.get(&bus).into_iter().flatten() {
            let b = &branches[k];
            let other = if b.from_bus == bus { b.to_bus } else { b.from_bus };
            match visited.get_mut(&other) {
                Some(v) if !*v => {
                    *v = true;
                    parent_branch.insert(other, k);
                    parent_of.insert(other, bus);
                    children.entry(bus).or_default().push(other);
                    order.push(other);
                }
                Some(_) => {
                    if parent_branch.get(&bus) != Some(&k) {
                        return Err(Error::Topology(format!(
                            "network is not radial: loop through branch {}-{}",
                            b.from_bus, b.to_bus
                        )));
                    }
                }
                None => unreachable!(),
            }
        }
    }
    if order.len() != net.buses.len() {
        return Err(Error::Topology("network is not connected".into()));
    }

    let mut s_inj: BTreeMap<u32, Complex64> =
        net.buses.iter().map(|b| (b.id, Complex64::new(0.0, 0.0))).collect();
    for inj in injections {
        *s_inj
            .get_mut(&inj.bus)
            .ok_or_else(|| Error::Validation(format!("injection at unknown bus {}", inj.bus)))? +=
            Complex64::new(inj.p, inj.q);
    }
    let mut y_shunt: BTreeMap<u32, Complex64> =
        net.buses.iter().map(|b| (b.id, Complex64::new(0.0, 0.0))).collect();
    for b in &branches {
        *y_shunt.get_mut(&b.from_bus).unwrap() += b.y_shunt_half;
        *y_shunt.get_mut(&b.to_bus).unwrap() += b.y_shunt_half;
    }

    let mut v: BTreeMap<u32, Complex64> =
        net.buses.iter().map(|b| (b.id, slack_v)).collect();
    let mut iterations = 0;
    let mut max_dv = f64::INFINITY;
    for _ in 0..200 {
        iterations += 1;
        // backward: current drawn through each bus's parent branch
        let mut draw: BTreeMap<u32, Complex64> = BTreeMap::new();
        for &bus in order.iter().rev() {
            let vb = v[&bus];
            let mut current = y_shunt[&bus] * vb - (s_inj[&bus] / vb).conj();
            for &child in children.get(&bus).into_iter().flatten() {
                current += draw[&child];
            }
            draw.insert(bus, current);
        }
        // forward: voltage drops from the slack
        max_dv = 0.0;
        for &bus in &order {
            if bus == slack {
                continue;
            }
            let z = branches[parent_branch[&bus]].y_series.inv();
            let new_v = v[&parent_of[&bus]] - z * draw[&bus];
            max_dv = max_dv.max((new_v - v[&bus]).norm());
            v.insert(bus, new_v);
        }
        if max_dv < tol {
            break;
        }
    }
    if max_dv >= tol {
        return Err(Error::Convergence(format!(
            "sweep did not converge, last dV = {max_dv:.3e}"
        )));
    }
    let (flows, loss) = branch_flows(&branches, &v);
    Ok(PowerFlowSolution {
        voltages: v,
        branch_flows: flows,
        total_loss: loss,
        iterations,
        max_mismatch: max_dv,
    })
}

/// Slack complex power from a solved case: the injection balancing the
/// network, i.e. sum of flows leaving the slack (in p.u.).
pub fn slack_power(sol: &PowerFlowSolution, slack_bus: u32) -> Complex64 {
    sol.branch_flows
        .iter()
        .filter_map(|f| {
            if f.from_bus == slack_bus {
                Some(f.s_from)
            } else if f.to_bus == slack_bus {
                Some(f.s_to)
            } else {
                None
            }
        })
        .sum()
}
