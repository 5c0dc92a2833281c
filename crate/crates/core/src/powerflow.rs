//! Backward/forward sweep power flow for radial configurations.
//!
//! Branch flows follow the DistFlow relations: the backward sweep aggregates
//! receiving-end demand plus downstream sending-end flows, adding `r |I|^2`
//! and `x |I|^2` on each line; the forward sweep updates squared voltage
//! magnitudes from the substation at 1.0 p.u. Phase angles are not computed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{DnrError, Result};
use crate::loss::total_loss;
use crate::network::{BusId, LineId, Network};
use crate::tree::{orient, RootedOrientation, TreeConfig};

#[derive(Debug, Clone, Copy)]
pub struct PfOptions {
    /// Largest voltage change (p.u.) between sweeps accepted as converged.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions { tol: 1e-8, max_sweeps: 100 }
    }
}

/// Voltage magnitude below which the solution is treated as collapsed.
pub const V_COLLAPSE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchFlow {
    /// Sending-end active power, kW.
    pub p_kw: f64,
    /// Sending-end reactive power, kvar.
    pub q_kvar: f64,
    /// Squared current magnitude, p.u.
    pub i_sq: f64,
    pub loss_kw: f64,
    pub q_loss_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution {
    /// Voltage magnitude by bus id.
    pub v_mag: BTreeMap<BusId, f64>,
    pub branch: BTreeMap<LineId, BranchFlow>,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerFlowSolution {
    pub fn total_loss_kw(&self) -> f64 {
        self.branch.values().map(|b| b.loss_kw).sum()
    }

    pub fn max_v_deviation(&self) -> f64 {
        self.v_mag.values().map(|v| (1.0 - v).abs()).fold(0.0, f64::max)
    }

    pub fn bus_csv(&self) -> String {
        let mut s = String::from("bus,v_pu\n");
        for (b, v) in &self.v_mag {
            let _ = writeln!(s, "{b},{v:.6}");
        }
        s
    }

    pub fn line_csv(&self) -> String {
        let mut s = String::from("line,p_kw,q_kvar,loss_kw\n");
        for (l, f) in &self.branch {
            let _ = writeln!(s, "{l},{:.6},{:.6},{:.6}", f.p_kw, f.q_kvar, f.loss_kw);
        }
        s
    }
}

struct Sweep {
    /// Sending-end flows and squared currents by line index.
    ps: Vec<f64>,
    qs: Vec<f64>,
    i_sq: Vec<f64>,
}

fn backward(net: &Network, o: &RootedOrientation, v: &[f64]) -> Sweep {
    let n = net.n_buses();
    let mut pr: Vec<f64> = (0..n).map(|b| net.p_pu(b)).collect();
    let mut qr: Vec<f64> = (0..n).map(|b| net.q_pu(b)).collect();
    let mut sw = Sweep {
        ps: vec![0.0; net.n_lines()],
        qs: vec![0.0; net.n_lines()],
        i_sq: vec![0.0; net.n_lines()],
    };
    for &bus in o.order.iter().rev() {
        let Some((parent, k)) = o.parent[bus] else { continue };
        let i_sq = (pr[bus] * pr[bus] + qr[bus] * qr[bus]) / (v[bus] * v[bus]);
        let ps = pr[bus] + net.r_pu(k) * i_sq;
        let qs = qr[bus] + net.x_pu(k) * i_sq;
        sw.ps[k] = ps;
        sw.qs[k] = qs;
        sw.i_sq[k] = i_sq;
        pr[parent] += ps;
        qr[parent] += qs;
    }
    sw
}

fn forward(net: &Network, o: &RootedOrientation, sw: &Sweep) -> Result<Vec<f64>> {
    let mut v = vec![1.0; net.n_buses()];
    for &bus in &o.order {
        let Some((parent, k)) = o.parent[bus] else { continue };
        let (r, x) = (net.r_pu(k), net.x_pu(k));
        let v_sq = v[parent] * v[parent] - 2.0 * (r * sw.ps[k] + x * sw.qs[k]) + (r * r + x * x) * sw.i_sq[k];
        if v_sq.is_nan() || v_sq < V_COLLAPSE * V_COLLAPSE {
            return Err(DnrError::VoltageCollapse { bus: net.bus_id(bus), v_pu: v_sq.max(0.0).sqrt() });
        }
        v[bus] = v_sq.sqrt();
    }
    Ok(v)
}

pub fn solve_radial(net: &Network, cfg: &TreeConfig, opts: &PfOptions) -> Result<PowerFlowSolution> {
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_sweeps == 0 {
        return Err(DnrError::InvalidParams("tol must be > 0 and max_sweeps >= 1".into()));
    }
    let o = orient(net, cfg)?;
    let mut v = vec![1.0; net.n_buses()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_sweeps {
        iterations += 1;
        let next = forward(net, &o, &backward(net, &o, &v))?;
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    // flows consistent with the final voltages
    let sw = backward(net, &o, &v);
    let kw = net.kw_per_pu();
    let branch = o
        .tree_lines()
        .map(|(k, _)| {
            let i_sq = sw.i_sq[k];
            let flow = BranchFlow {
                p_kw: sw.ps[k] * kw,
                q_kvar: sw.qs[k] * kw,
                i_sq,
                loss_kw: net.r_pu(k) * i_sq * kw,
                q_loss_kvar: net.x_pu(k) * i_sq * kw,
            };
            (net.line_id(k), flow)
        })
        .collect();
    let v_mag = v.iter().enumerate().map(|(b, &x)| (net.bus_id(b), x)).collect();
    Ok(PowerFlowSolution { v_mag, branch, iterations, converged })
}

/// Total resistive loss (kW) from a converged power flow with default options.
pub fn exact_loss(net: &Network, cfg: &TreeConfig) -> Result<f64> {
    let opts = PfOptions::default();
    let sol = solve_radial(net, cfg, &opts)?;
    if !sol.converged {
        return Err(DnrError::Diverged { sweeps: opts.max_sweeps });
    }
    Ok(sol.total_loss_kw())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Largest `|1 - v|` over buses, p.u.
    pub max_v_deviation: f64,
    /// Exact loss over total active demand.
    pub loss_to_demand_ratio: f64,
    /// `|approx - exact| / exact`; zero when both are zero.
    pub approx_vs_exact_gap: f64,
    pub approx_loss_kw: f64,
    pub exact_loss_kw: f64,
}

pub fn assumption_report(net: &Network, cfg: &TreeConfig) -> Result<AssumptionReport> {
    let opts = PfOptions::default();
    let sol = solve_radial(net, cfg, &opts)?;
    if !sol.converged {
        return Err(DnrError::Diverged { sweeps: opts.max_sweeps });
    }
    let exact = sol.total_loss_kw();
    let approx = total_loss(net, cfg)?.total;
    let demand = net.total_demand_kw();
    Ok(AssumptionReport {
        max_v_deviation: sol.max_v_deviation(),
        loss_to_demand_ratio: if demand > 0.0 { exact / demand } else { 0.0 },
        approx_vs_exact_gap: if exact > 0.0 { (approx - exact).abs() / exact } else { 0.0 },
        approx_loss_kw: approx,
        exact_loss_kw: exact,
    })
}
