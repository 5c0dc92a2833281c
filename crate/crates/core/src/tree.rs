//! Spanning trees of the network graph: feasibility, rooted orientation,
//! fundamental cycles and branch exchanges.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{DnrError, Result};
use crate::network::{BusId, LineId, Network};

/// A set of closed lines. Whether it is a spanning tree is checked separately.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeConfig {
    closed: BTreeSet<LineId>,
}

impl TreeConfig {
    pub fn new(closed: impl IntoIterator<Item = LineId>) -> Self {
        TreeConfig { closed: closed.into_iter().collect() }
    }

    /// All lines closed except `open`.
    pub fn from_open(net: &Network, open: &[LineId]) -> Result<Self> {
        for &id in open {
            net.line_index(id).ok_or(DnrError::UnknownLine(id))?;
        }
        let open: BTreeSet<LineId> = open.iter().copied().collect();
        Ok(TreeConfig::new(net.lines().iter().map(|l| l.id).filter(|id| !open.contains(id))))
    }

    pub(crate) fn from_indices(net: &Network, idx: impl IntoIterator<Item = usize>) -> Self {
        TreeConfig::new(idx.into_iter().map(|i| net.line_id(i)))
    }

    pub fn closed(&self) -> &BTreeSet<LineId> {
        &self.closed
    }

    pub fn contains(&self, line: LineId) -> bool {
        self.closed.contains(&line)
    }

    pub fn len(&self) -> usize {
        self.closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closed.is_empty()
    }

    /// Lines of the network not in this configuration, ascending.
    pub fn open_lines(&self, net: &Network) -> Vec<LineId> {
        let mut v: Vec<LineId> =
            net.lines().iter().map(|l| l.id).filter(|id| !self.closed.contains(id)).collect();
        v.sort_unstable();
        v
    }

    pub(crate) fn indices(&self, net: &Network) -> Result<Vec<usize>> {
        self.closed
            .iter()
            .map(|&id| net.line_index(id).ok_or(DnrError::UnknownLine(id)))
            .collect()
    }

    pub(crate) fn mask(&self, net: &Network) -> Result<Vec<bool>> {
        let mut m = vec![false; net.n_lines()];
        for i in self.indices(net)? {
            m[i] = true;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// False if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

pub(crate) fn is_tree_idx(net: &Network, lines: &[usize]) -> bool {
    if lines.len() + 1 != net.n_buses() {
        return false;
    }
    let mut uf = UnionFind::new(net.n_buses());
    lines.iter().all(|&k| {
        let (a, b) = net.ends(k);
        uf.union(a, b)
    })
}

pub fn is_spanning_tree(net: &Network, cfg: &TreeConfig) -> Result<bool> {
    Ok(is_tree_idx(net, &cfg.indices(net)?))
}

/// Kruskal over lines in the given index order; the first lines win.
pub(crate) fn kruskal(net: &Network, order: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut uf = UnionFind::new(net.n_buses());
    order
        .into_iter()
        .filter(|&k| {
            let (a, b) = net.ends(k);
            uf.union(a, b)
        })
        .collect()
}

/// Keeps the lowest-numbered lines, opening any line that would close a loop.
pub fn default_tree(net: &Network) -> TreeConfig {
    let mut order: Vec<usize> = (0..net.n_lines()).collect();
    order.sort_by_key(|&k| net.line_id(k));
    TreeConfig::from_indices(net, kruskal(net, order))
}

/// A spanning tree rooted at the substation.
#[derive(Debug, Clone)]
pub struct RootedOrientation {
    /// `(parent bus, line to parent)` by bus index; `None` at the root.
    pub(crate) parent: Vec<Option<(usize, usize)>>,
    /// Buses in BFS order from the root.
    pub(crate) order: Vec<usize>,
    pub(crate) depth: Vec<usize>,
    /// Child endpoint of each tree line, by line index.
    pub(crate) child_of: Vec<Option<usize>>,
    pub(crate) children: Vec<Vec<usize>>,
    bus_ids: Vec<BusId>,
    line_ids: Vec<LineId>,
}

impl RootedOrientation {
    pub(crate) fn from_mask(net: &Network, mask: &[bool]) -> Option<Self> {
        let n = net.n_buses();
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut child_of = vec![None; net.n_lines()];
        let mut children = vec![Vec::new(); n];
        let mut order = Vec::with_capacity(n);
        seen[net.root()] = true;
        order.push(net.root());
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, k) in net.adjacency(u) {
                if !mask[k] || parent[u].map(|(_, pk)| pk) == Some(k) {
                    continue;
                }
                if seen[v] {
                    return None; // cycle
                }
                seen[v] = true;
                parent[v] = Some((u, k));
                depth[v] = depth[u] + 1;
                child_of[k] = Some(v);
                children[u].push(v);
                order.push(v);
            }
        }
        let used = mask.iter().filter(|&&b| b).count();
        if order.len() != n || used + 1 != n {
            return None;
        }
        Some(RootedOrientation {
            parent,
            order,
            depth,
            child_of,
            children,
            bus_ids: net.buses().iter().map(|b| b.id).collect(),
            line_ids: net.lines().iter().map(|l| l.id).collect(),
        })
    }

    pub(crate) fn line_pos(&self, line: LineId) -> Option<usize> {
        self.line_ids.iter().position(|&l| l == line)
    }

    /// Parent bus and connecting line of `bus`; `None` at the root or for unknown ids.
    pub fn parent(&self, bus: BusId) -> Option<(BusId, LineId)> {
        let i = self.bus_ids.iter().position(|&b| b == bus)?;
        self.parent[i].map(|(p, k)| (self.bus_ids[p], self.line_ids[k]))
    }

    /// Buses downstream of a tree line (the side away from the root).
    pub fn successors(&self, line: LineId) -> Result<BTreeSet<BusId>> {
        let k = self.line_pos(line).ok_or(DnrError::UnknownLine(line))?;
        let child = self.child_of[k].ok_or(DnrError::NotInTree(line))?;
        Ok(self.subtree(child).into_iter().map(|b| self.bus_ids[b]).collect())
    }

    pub fn successor_map(&self) -> BTreeMap<LineId, BTreeSet<BusId>> {
        self.child_of
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|_| self.line_ids[k]))
            .map(|id| (id, self.successors(id).expect("tree line")))
            .collect()
    }

    pub(crate) fn subtree(&self, top: usize) -> Vec<usize> {
        let mut out = vec![top];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }

    /// Per-bus sum of `values` over each bus's subtree.
    pub(crate) fn subtree_sums(&self, values: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut acc: Vec<f64> = (0..self.parent.len()).map(&values).collect();
        for &v in self.order.iter().rev() {
            if let Some((p, _)) = self.parent[v] {
                acc[p] += acc[v];
            }
        }
        acc
    }

    pub(crate) fn subtree_sizes(&self) -> Vec<u64> {
        let mut acc = vec![1u64; self.parent.len()];
        for &v in self.order.iter().rev() {
            if let Some((p, _)) = self.parent[v] {
                acc[p] += acc[v];
            }
        }
        acc
    }

    /// Tree lines with their child bus index.
    pub(crate) fn tree_lines(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.child_of.iter().enumerate().filter_map(|(k, c)| c.map(|v| (k, v)))
    }

    /// Tree lines on the path between two buses, as two legs ending at their
    /// lowest common ancestor: `(a-side lines bottom-up, b-side lines bottom-up)`.
    pub(crate) fn path_legs(&self, mut a: usize, mut b: usize) -> (Vec<usize>, Vec<usize>) {
        let (mut la, mut lb) = (Vec::new(), Vec::new());
        while self.depth[a] > self.depth[b] {
            let (p, k) = self.parent[a].expect("non-root");
            la.push(k);
            a = p;
        }
        while self.depth[b] > self.depth[a] {
            let (p, k) = self.parent[b].expect("non-root");
            lb.push(k);
            b = p;
        }
        while a != b {
            let (pa, ka) = self.parent[a].expect("non-root");
            let (pb, kb) = self.parent[b].expect("non-root");
            la.push(ka);
            lb.push(kb);
            a = pa;
            b = pb;
        }
        (la, lb)
    }
}

pub fn orient(net: &Network, cfg: &TreeConfig) -> Result<RootedOrientation> {
    RootedOrientation::from_mask(net, &cfg.mask(net)?)
        .ok_or_else(|| DnrError::NotSpanningTree(format!("{} closed lines", cfg.len())))
}

/// The unique cycle closed by adding `e_in` to the tree: tree lines on it plus `e_in`.
pub fn fundamental_cycle(net: &Network, cfg: &TreeConfig, e_in: LineId) -> Result<BTreeSet<LineId>> {
    let k = net.line_index(e_in).ok_or(DnrError::UnknownLine(e_in))?;
    if cfg.contains(e_in) {
        return Err(DnrError::AlreadyClosed(e_in));
    }
    let o = orient(net, cfg)?;
    let (a, b) = net.ends(k);
    let (la, lb) = o.path_legs(a, b);
    Ok(la.into_iter().chain(lb).map(|i| net.line_id(i)).chain([e_in]).collect())
}

/// Exchanges `e_out` for `e_in`. The result is not checked for radiality.
pub fn swap(cfg: &TreeConfig, e_out: LineId, e_in: LineId) -> Result<TreeConfig> {
    if !cfg.contains(e_out) {
        return Err(DnrError::NotClosed(e_out));
    }
    if cfg.contains(e_in) {
        return Err(DnrError::AlreadyClosed(e_in));
    }
    let mut closed = cfg.closed.clone();
    closed.remove(&e_out);
    closed.insert(e_in);
    Ok(TreeConfig { closed })
}
