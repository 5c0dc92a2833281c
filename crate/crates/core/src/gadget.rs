//! 3-Partition reduction gadget.
//!
//! A root feeds `m` middle buses; every middle bus connects to every item bus
//! `v_i`, and item `i` carries a star of `a_i - 1` leaves. With unit demands
//! and unit resistances, the optimal tree cost reaches
//! `m (B + 1)^2 + sum a_i^2 + (m B - 3 m)` exactly when the items split into
//! triplets of sum `B`.

use serde::{Deserialize, Serialize};

use crate::enumerate::{collect_index_trees, IndexTrees};
use crate::error::{DnrError, Result};
use crate::loss::unit_demand_cost;
use crate::network::{Base, Bus, BusId, Case, Line, LineId, Network};
use crate::par::Exec;
use crate::search::{branch_exchange, SearchParams};
use crate::tree::{default_tree, RootedOrientation, TreeConfig};

/// JSON form: `{"m": int, "a": [int]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub m: usize,
    pub a: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionInstance {
    a: Vec<u64>,
    m: usize,
    b: u64,
}

impl PartitionInstance {
    /// Checks `k = 3m`, `sum a = mB` and `B/4 < a_i < B/2`.
    pub fn new(m: usize, a: Vec<u64>) -> Result<Self> {
        let bad = |s: String| Err(DnrError::InvalidInstance(s));
        if m == 0 {
            return bad("m must be at least 1".into());
        }
        if a.len() != 3 * m {
            return bad(format!("expected k = 3m = {} numbers, got {}", 3 * m, a.len()));
        }
        let sum: u64 = a.iter().sum();
        if !sum.is_multiple_of(m as u64) {
            return bad(format!("sum {sum} is not a multiple of m = {m}"));
        }
        let b = sum / m as u64;
        if let Some(&x) = a.iter().find(|&&x| 4 * x <= b || 2 * x >= b) {
            return bad(format!("a_i = {x} violates B/4 < a_i < B/2 with B = {b}"));
        }
        Ok(PartitionInstance { a, m, b })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text).map_err(|e| DnrError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(f.m, f.a)
    }

    pub fn a(&self) -> &[u64] {
        &self.a
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn b(&self) -> u64 {
        self.b
    }
}

/// Optimal gadget cost when a balanced split exists.
pub fn c_min(inst: &PartitionInstance) -> u64 {
    let m = inst.m as u64;
    let sq: u64 = inst.a.iter().map(|x| x * x).sum();
    m * (inst.b + 1).pow(2) + sq + (m * inst.b - 3 * m)
}

#[derive(Debug, Clone)]
pub struct GadgetNetwork {
    pub network: Network,
    pub instance: PartitionInstance,
    pub root: BusId,
    pub middle: Vec<BusId>,
    pub items: Vec<BusId>,
    pub leaves: Vec<Vec<BusId>>,
    /// Line `(u_j, v_i)` at `[j][i]`.
    pub bipartite: Vec<Vec<LineId>>,
    pub root_lines: Vec<LineId>,
}

/// Unit demand (1 kW) and unit per-unit resistance: 1 kV and 1 kVA bases give
/// a 1000 Ω impedance base, so approximate loss in kW equals the unit cost.
pub fn build_gadget(inst: &PartitionInstance) -> Result<GadgetNetwork> {
    let (m, k) = (inst.m as u32, inst.a.len() as u32);
    let root = 0;
    let middle: Vec<BusId> = (1..=m).collect();
    let items: Vec<BusId> = (m + 1..=m + k).collect();
    let mut next_bus = m + k + 1;
    let mut leaves = Vec::new();
    for &a in &inst.a {
        let group: Vec<BusId> = (next_bus..next_bus + a as u32 - 1).collect();
        next_bus += a as u32 - 1;
        leaves.push(group);
    }

    let mut lines = Vec::new();
    let mut line = |from: BusId, to: BusId| {
        let id = lines.len() as LineId + 1;
        lines.push(Line { id, from, to, r_ohm: 1000.0, x_ohm: 0.0 });
        id
    };
    let root_lines: Vec<LineId> = middle.iter().map(|&u| line(root, u)).collect();
    let bipartite: Vec<Vec<LineId>> =
        middle.iter().map(|&u| items.iter().map(|&v| line(u, v)).collect()).collect();
    for (v, group) in items.iter().zip(&leaves) {
        for &leaf in group {
            line(*v, leaf);
        }
    }

    let buses = (0..next_bus)
        .map(|id| Bus { id, p_kw: if id == root { 0.0 } else { 1.0 }, q_kvar: 0.0 })
        .collect();
    let network = Network::from_case(Case {
        name: format!("gadget_m{}_b{}", inst.m, inst.b),
        source: None,
        root,
        base: Base { v_kv: 1.0, s_mva: 0.001 },
        buses,
        lines,
    })?;
    Ok(GadgetNetwork { network, instance: inst.clone(), root, middle, items, leaves, bipartite, root_lines })
}

impl GadgetNetwork {
    /// `S_j`: 0-based item indices whose `(u_j, v_i)` line is closed.
    pub fn groups(&self, tree: &TreeConfig) -> Vec<Vec<usize>> {
        self.bipartite
            .iter()
            .map(|row| (0..row.len()).filter(|&i| tree.contains(row[i])).collect())
            .collect()
    }

    pub fn has_all_root_lines(&self, tree: &TreeConfig) -> bool {
        self.root_lines.iter().all(|&l| tree.contains(l))
    }

    /// Root-line cost plus the fixed item and leaf terms, computed from `S_j`.
    pub fn decomposed_cost(&self, groups: &[Vec<usize>]) -> u64 {
        let a = &self.instance.a;
        let root_terms: u64 = groups.iter().map(|s| (1 + s.iter().map(|&i| a[i]).sum::<u64>()).pow(2)).sum();
        root_terms + a.iter().map(|x| x * x).sum::<u64>() + a.iter().map(|x| x - 1).sum::<u64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Answer {
    Yes,
    No,
    /// Local search missed `c_min`; no certificate either way.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub answer: Answer,
    /// Item values per triplet when the answer is yes.
    pub triplets: Option<Vec<Vec<u64>>>,
    /// 1-based item indices per group when the answer is yes.
    pub groups: Option<Vec<Vec<usize>>>,
    pub best_cost: u64,
    pub c_min: u64,
    pub exhaustive: bool,
}

fn unit_cost_idx(net: &Network, tree: &[usize]) -> u64 {
    let mut mask = vec![false; net.n_lines()];
    for &k in tree {
        mask[k] = true;
    }
    let o = RootedOrientation::from_mask(net, &mask).expect("enumerated tree");
    let sizes = o.subtree_sizes();
    o.tree_lines().map(|(_, v)| sizes[v] * sizes[v]).sum()
}

/// Minimum unit-demand cost over gadget trees, exhaustively when the tree
/// count is within `limit`, else by local search.
pub fn decide_partition(inst: &PartitionInstance, limit: usize, exec: Exec) -> Result<Decision> {
    let g = build_gadget(inst)?;
    let net = &g.network;
    let target = c_min(inst);
    let (best, exhaustive) = match collect_index_trees(net, limit) {
        Ok(trees) => {
            let costs = exec.map(&trees, |t| unit_cost_idx(net, t));
            let i = (0..trees.len()).min_by_key(|&i| (costs[i], i)).expect("gadget has a tree");
            (TreeConfig::from_indices(net, trees[i].iter().copied()), true)
        }
        Err(DnrError::LimitExceeded { .. }) => {
            let params = SearchParams { epsilon: 0.0, exec, ..Default::default() };
            (branch_exchange(net, &default_tree(net), &params)?.final_tree, false)
        }
        Err(e) => return Err(e),
    };
    let best_cost = unit_demand_cost(net, &best)?;
    let answer = match (best_cost == target, exhaustive) {
        (true, _) => Answer::Yes,
        (false, true) => Answer::No,
        (false, false) => Answer::Unknown,
    };
    let (triplets, groups) = if answer == Answer::Yes {
        let s = g.groups(&best);
        (
            Some(s.iter().map(|grp| grp.iter().map(|&i| inst.a[i]).collect()).collect()),
            Some(s.iter().map(|grp| grp.iter().map(|&i| i + 1).collect()).collect()),
        )
    } else {
        (None, None)
    };
    Ok(Decision { answer, triplets, groups, best_cost, c_min: target, exhaustive })
}

/// Trees of the gadget, for identity checks on small instances.
pub fn gadget_trees(g: &GadgetNetwork) -> impl Iterator<Item = TreeConfig> + '_ {
    IndexTrees::new(&g.network).map(|t| TreeConfig::from_indices(&g.network, t))
}
