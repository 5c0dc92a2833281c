//! Approximate loss model.
//!
//! With flat voltages and loss-free flows, a tree line carries the summed
//! demand of its successors and loses `R (P^2 + Q^2)`. [`f_super`] extends the
//! objective to arbitrary line subsets by counting simple paths instead of
//! tree paths; it agrees with [`total_loss`] on spanning trees and is
//! supermodular and monotone for nonnegative demands.

use std::collections::BTreeMap;

use crate::error::{DnrError, Result};
use crate::network::{LineId, Network};
use crate::tree::{orient, RootedOrientation, TreeConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_line: BTreeMap<LineId, f64>,
    pub total: f64,
}

pub fn line_loss(net: &Network, orientation: &RootedOrientation, line: LineId) -> Result<f64> {
    let k = net.line_index(line).ok_or(DnrError::UnknownLine(line))?;
    let child = orientation.child_of.get(k).copied().flatten().ok_or(DnrError::NotInTree(line))?;
    let (mut p, mut q) = (0.0, 0.0);
    for b in orientation.subtree(child) {
        p += net.p_pu(b);
        q += net.q_pu(b);
    }
    Ok(net.r_pu(k) * (p * p + q * q) * net.kw_per_pu())
}

/// Per-line approximate losses (kW) from one pass of subtree aggregation.
pub(crate) fn per_line_losses(net: &Network, o: &RootedOrientation) -> Vec<(usize, f64)> {
    let p = o.subtree_sums(|b| net.p_pu(b));
    let q = o.subtree_sums(|b| net.q_pu(b));
    let kw = net.kw_per_pu();
    o.tree_lines().map(|(k, v)| (k, net.r_pu(k) * (p[v] * p[v] + q[v] * q[v]) * kw)).collect()
}

pub(crate) fn approx_loss_of(net: &Network, o: &RootedOrientation) -> f64 {
    per_line_losses(net, o).into_iter().map(|(_, l)| l).sum()
}

pub fn total_loss(net: &Network, cfg: &TreeConfig) -> Result<LossBreakdown> {
    let o = orient(net, cfg)?;
    let per_line: BTreeMap<LineId, f64> =
        per_line_losses(net, &o).into_iter().map(|(k, l)| (net.line_id(k), l)).collect();
    let total = per_line.values().sum();
    Ok(LossBreakdown { per_line, total })
}

/// Sum over tree lines of the squared successor count.
pub fn unit_demand_cost(net: &Network, cfg: &TreeConfig) -> Result<u64> {
    let o = orient(net, cfg)?;
    let sizes = o.subtree_sizes();
    Ok(o.tree_lines().map(|(_, v)| sizes[v] * sizes[v]).sum())
}

/// Simple-path counts in a line subset.
///
/// `count(line, forward, k)` is the number of simple paths in the subset that
/// begin by traversing `line` (from its `from` end when `forward`, else from
/// its `to` end) and end at bus `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCounts {
    n_buses: usize,
    /// Row `2 * line_index + dir` (dir 0 = from->to), one column per bus.
    counts: Vec<Vec<u64>>,
}

impl PathCounts {
    pub fn get(&self, net: &Network, line: LineId, forward: bool, bus: u32) -> Option<u64> {
        let k = net.line_index(line)?;
        let b = net.bus_index(bus)?;
        Some(self.counts[2 * k + usize::from(!forward)][b])
    }

    pub(crate) fn row(&self, line: usize, dir: usize) -> &[u64] {
        &self.counts[2 * line + dir]
    }

    pub fn n_buses(&self) -> usize {
        self.n_buses
    }
}

pub fn path_counts(net: &Network, subset: &[LineId]) -> Result<PathCounts> {
    let mut mask = vec![false; net.n_lines()];
    for &id in subset {
        mask[net.line_index(id).ok_or(DnrError::UnknownLine(id))?] = true;
    }
    Ok(path_counts_mask(net, &mask))
}

pub(crate) fn path_counts_mask(net: &Network, mask: &[bool]) -> PathCounts {
    let n = net.n_buses();
    let mut counts = vec![vec![0u64; n]; 2 * net.n_lines()];
    let mut visited = vec![false; n];
    for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (a, b) = net.ends(k);
        for (dir, (start, next)) in [(a, b), (b, a)].into_iter().enumerate() {
            let row = &mut counts[2 * k + dir];
            visited[start] = true;
            count_from(net, mask, next, &mut visited, row);
            visited[start] = false;
        }
    }
    PathCounts { n_buses: n, counts }
}

/// Every simple path extension reaching `at` adds one path ending there.
fn count_from(net: &Network, mask: &[bool], at: usize, visited: &mut [bool], row: &mut [u64]) {
    row[at] += 1;
    visited[at] = true;
    for &(v, k) in net.adjacency(at) {
        if mask[k] && !visited[v] {
            count_from(net, mask, v, visited, row);
        }
    }
    visited[at] = false;
}

/// Supermodular extension of the total loss to any line subset, in kW.
///
/// Each line contributes once per direction `i -> j`: its resistance, times
/// the number of paths leaving `j` through `i` to the root, times the squared
/// path-weighted demand reachable from `i` through `j`.
pub fn f_super(net: &Network, subset: &[LineId]) -> Result<f64> {
    let counts = path_counts(net, subset)?;
    Ok(f_super_from_counts(net, &counts))
}

pub(crate) fn f_super_mask(net: &Network, mask: &[bool]) -> f64 {
    f_super_from_counts(net, &path_counts_mask(net, mask))
}

fn f_super_from_counts(net: &Network, counts: &PathCounts) -> f64 {
    let root = net.root();
    let mut total = 0.0;
    for k in 0..net.n_lines() {
        for dir in 0..2 {
            // dir 0 is from->to: downstream side is `to`; the reverse row says
            // how many paths start at `to`, cross the line and reach the root.
            let down = counts.row(k, dir);
            let to_root = counts.row(k, 1 - dir)[root];
            if to_root == 0 {
                continue;
            }
            let (mut p, mut q) = (0.0, 0.0);
            for (b, &c) in down.iter().enumerate() {
                if c > 0 {
                    p += c as f64 * net.p_pu(b);
                    q += c as f64 * net.q_pu(b);
                }
            }
            total += net.r_pu(k) * to_root as f64 * (p * p + q * q);
        }
    }
    total * net.kw_per_pu()
}
