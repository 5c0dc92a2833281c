//! Exhaustive spanning-tree enumeration for small networks.
//!
//! Trees are generated by binary branching over lines in ascending id order:
//! a line is either included (if it closes no loop with the lines already
//! included) or excluded (if it is not a bridge of the lines still allowed).
//! Both guards keep every branch feasible, so each leaf is a distinct tree and
//! every tree is reached exactly once.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{DnrError, Result};
use crate::loss::approx_loss_of;
use crate::network::{LineId, Network};
use crate::par::Exec;
use crate::powerflow::exact_loss;
use crate::tree::{RootedOrientation, TreeConfig, UnionFind};

pub const DEFAULT_LIMIT: usize = 5_000_000;

#[derive(Clone)]
struct Frame {
    pos: usize,
    uf: UnionFind,
    excluded: Vec<bool>,
    included: Vec<usize>,
}

/// Line-index trees in deterministic order.
pub(crate) struct IndexTrees<'a> {
    net: &'a Network,
    order: Vec<usize>,
    stack: Vec<Frame>,
}

impl<'a> IndexTrees<'a> {
    pub(crate) fn new(net: &'a Network) -> Self {
        let mut order: Vec<usize> = (0..net.n_lines()).collect();
        order.sort_by_key(|&k| net.line_id(k));
        let root = Frame {
            pos: 0,
            uf: UnionFind::new(net.n_buses()),
            excluded: vec![false; net.n_lines()],
            included: Vec::new(),
        };
        IndexTrees { net, order, stack: vec![root] }
    }

    /// Whether `a` still reaches `b` using allowed lines other than `skip`.
    fn connected_without(&self, excluded: &[bool], skip: usize) -> bool {
        let (a, b) = self.net.ends(skip);
        let mut seen = vec![false; self.net.n_buses()];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(u) = stack.pop() {
            for &(v, k) in self.net.adjacency(u) {
                if k == skip || excluded[k] || seen[v] {
                    continue;
                }
                if v == b {
                    return true;
                }
                seen[v] = true;
                stack.push(v);
            }
        }
        false
    }
}

impl Iterator for IndexTrees<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        while let Some(mut f) = self.stack.pop() {
            if f.included.len() + 1 == self.net.n_buses() {
                f.included.sort_unstable();
                return Some(f.included);
            }
            let Some(&k) = self.order.get(f.pos) else { continue };
            let (a, b) = self.net.ends(k);
            let can_include = f.uf.find(a) != f.uf.find(b);
            let can_exclude = self.connected_without(&f.excluded, k);
            let exclude = can_exclude.then(|| {
                let mut g = f.clone();
                g.pos += 1;
                g.excluded[k] = true;
                g
            });
            // include branch is explored first
            if let Some(g) = exclude {
                self.stack.push(g);
            }
            if can_include {
                f.uf.union(a, b);
                f.included.push(k);
                f.pos += 1;
                self.stack.push(f);
            }
        }
        None
    }
}

/// Every spanning tree once, ending with [`DnrError::LimitExceeded`] if there
/// are more than `limit`.
pub struct TreeIter<'a> {
    inner: IndexTrees<'a>,
    limit: usize,
    yielded: usize,
    done: bool,
}

impl Iterator for TreeIter<'_> {
    type Item = Result<TreeConfig>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let tree = self.inner.next();
        match tree {
            None => {
                self.done = true;
                None
            }
            Some(_) if self.yielded == self.limit => {
                self.done = true;
                Some(Err(DnrError::LimitExceeded { limit: self.limit }))
            }
            Some(t) => {
                self.yielded += 1;
                Some(Ok(TreeConfig::from_indices(self.inner.net, t)))
            }
        }
    }
}

pub fn enumerate_trees(net: &Network, limit: usize) -> TreeIter<'_> {
    TreeIter { inner: IndexTrees::new(net), limit, yielded: 0, done: false }
}

pub(crate) fn collect_index_trees(net: &Network, limit: usize) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for t in IndexTrees::new(net) {
        if out.len() == limit {
            return Err(DnrError::LimitExceeded { limit });
        }
        out.push(t);
    }
    Ok(out)
}

/// Spanning-tree count as the determinant of the reduced Laplacian, by
/// fraction-free (Bareiss) elimination.
pub fn count_trees_kirchhoff(net: &Network) -> BigUint {
    let n = net.n_buses();
    if n <= 1 {
        return BigUint::one();
    }
    let root = net.root();
    let keep: Vec<usize> = (0..n).filter(|&b| b != root).collect();
    let pos = |b: usize| keep.iter().position(|&x| x == b);
    let m = keep.len();
    let mut a = vec![vec![BigInt::zero(); m]; m];
    for k in 0..net.n_lines() {
        let (u, v) = net.ends(k);
        let (pu, pv) = (pos(u), pos(v));
        if let Some(i) = pu {
            a[i][i] += 1;
        }
        if let Some(j) = pv {
            a[j][j] += 1;
        }
        if let (Some(i), Some(j)) = (pu, pv) {
            a[i][j] -= 1;
            a[j][i] -= 1;
        }
    }

    let mut sign = 1i32;
    let mut prev = BigInt::one();
    for k in 0..m {
        if a[k][k].is_zero() {
            match (k + 1..m).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigUint::zero(),
            }
        }
        for i in k + 1..m {
            for j in k + 1..m {
                let v = (&a[k][k] * &a[i][j] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let det: BigInt = &a[m - 1][m - 1] * sign;
    if det.is_negative() {
        BigUint::zero()
    } else {
        det.to_biguint().expect("nonnegative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeRow {
    pub open_lines: Vec<LineId>,
    pub approx_loss_kw: f64,
    pub exact_loss_kw: Option<f64>,
    pub rank_approx: Option<usize>,
    pub rank_exact: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TreeTable {
    pub rows: Vec<TreeRow>,
    pub sorted: bool,
}

impl TreeTable {
    pub fn sort_by_approx(&mut self) {
        self.rows.sort_by(|a, b| a.approx_loss_kw.total_cmp(&b.approx_loss_kw).then(a.open_lines.cmp(&b.open_lines)));
        self.sorted = true;
    }

    /// `open_lines,approx_loss_kw,exact_loss_kw,rank_approx,rank_exact`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("open_lines,approx_loss_kw,exact_loss_kw,rank_approx,rank_exact\n");
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let open: Vec<String> = r.open_lines.iter().map(|l| l.to_string()).collect();
            let exact = r.exact_loss_kw.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:.6},{},{},{}",
                open.join(";"),
                r.approx_loss_kw,
                exact,
                opt(r.rank_approx),
                opt(r.rank_exact)
            );
        }
        s
    }
}

fn open_of(net: &Network, tree: &[usize]) -> Vec<LineId> {
    let mut closed = vec![false; net.n_lines()];
    for &k in tree {
        closed[k] = true;
    }
    let mut open: Vec<LineId> = (0..net.n_lines()).filter(|&k| !closed[k]).map(|k| net.line_id(k)).collect();
    open.sort_unstable();
    open
}

fn approx_of(net: &Network, tree: &[usize]) -> f64 {
    let mut mask = vec![false; net.n_lines()];
    for &k in tree {
        mask[k] = true;
    }
    let o = RootedOrientation::from_mask(net, &mask).expect("enumerated tree");
    approx_loss_of(net, &o)
}

#[derive(Debug, Clone)]
pub struct GlobalOptimum {
    pub best: TreeConfig,
    pub best_loss_kw: f64,
    /// One row per tree in enumeration order.
    pub table: TreeTable,
}

/// Least approximate loss over all spanning trees; ties go to the earliest tree.
pub fn global_optimum(net: &Network, limit: usize, exec: Exec) -> Result<GlobalOptimum> {
    let trees = collect_index_trees(net, limit)?;
    let losses = exec.map(&trees, |t| approx_of(net, t));
    let (best_i, &best_loss_kw) = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("connected network has a tree");
    let rows = trees
        .iter()
        .zip(&losses)
        .map(|(t, &l)| TreeRow {
            open_lines: open_of(net, t),
            approx_loss_kw: l,
            exact_loss_kw: None,
            rank_approx: None,
            rank_exact: None,
        })
        .collect();
    Ok(GlobalOptimum {
        best: TreeConfig::from_indices(net, trees[best_i].iter().copied()),
        best_loss_kw,
        table: TreeTable { rows, sorted: false },
    })
}

/// Approximate and exact losses of every tree; trees whose power flow fails
/// get `None`.
pub fn loss_table(net: &Network, limit: usize, with_exact: bool, exec: Exec) -> Result<TreeTable> {
    let trees = collect_index_trees(net, limit)?;
    let rows = exec.map(&trees, |t| {
        let exact = with_exact
            .then(|| exact_loss(net, &TreeConfig::from_indices(net, t.iter().copied())).ok())
            .flatten();
        TreeRow {
            open_lines: open_of(net, t),
            approx_loss_kw: approx_of(net, t),
            exact_loss_kw: exact,
            rank_approx: None,
            rank_exact: None,
        }
    });
    let mut table = TreeTable { rows, sorted: false };
    if with_exact {
        assign_ranks(&mut table);
    }
    Ok(table)
}

/// 1-based ranks among rows with an exact loss; ties go by open-line order.
fn assign_ranks(table: &mut TreeTable) {
    let valid: Vec<usize> = (0..table.rows.len()).filter(|&i| table.rows[i].exact_loss_kw.is_some()).collect();
    let rank_by = |key: &dyn Fn(&TreeRow) -> f64, rows: &[TreeRow]| {
        let mut idx = valid.clone();
        idx.sort_by(|&a, &b| key(&rows[a]).total_cmp(&key(&rows[b])).then(rows[a].open_lines.cmp(&rows[b].open_lines)));
        idx
    };
    let by_approx = rank_by(&|r| r.approx_loss_kw, &table.rows);
    let by_exact = rank_by(&|r| r.exact_loss_kw.unwrap_or(f64::NAN), &table.rows);
    for (rank, &i) in by_approx.iter().enumerate() {
        table.rows[i].rank_approx = Some(rank + 1);
    }
    for (rank, &i) in by_exact.iter().enumerate() {
        table.rows[i].rank_exact = Some(rank + 1);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankPair {
    pub open_lines: Vec<LineId>,
    pub rank_exact: usize,
    pub rank_approx: usize,
    pub approx_loss_kw: f64,
    pub exact_loss_kw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankComparison {
    /// The `top_k` trees by exact loss, best first.
    pub pairs: Vec<RankPair>,
    /// Trees left out because their power flow failed.
    pub excluded: Vec<Vec<LineId>>,
    /// Spearman correlation of the two rankings over all ranked trees.
    pub spearman: f64,
    pub top1_agree: bool,
    pub max_displacement: usize,
    pub mean_displacement: f64,
    pub table: TreeTable,
}

pub fn rank_comparison(net: &Network, top_k: usize, limit: usize, exec: Exec) -> Result<RankComparison> {
    let table = loss_table(net, limit, true, exec)?;
    let excluded = table.rows.iter().filter(|r| r.exact_loss_kw.is_none()).map(|r| r.open_lines.clone()).collect();
    let ranked: Vec<&TreeRow> = table.rows.iter().filter(|r| r.exact_loss_kw.is_some()).collect();
    let n = ranked.len();
    let spearman = if n < 2 {
        1.0
    } else {
        let d2: f64 = ranked
            .iter()
            .map(|r| {
                let d = r.rank_exact.unwrap() as f64 - r.rank_approx.unwrap() as f64;
                d * d
            })
            .sum();
        let n = n as f64;
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    };
    let mut pairs: Vec<RankPair> = ranked
        .iter()
        .filter(|r| r.rank_exact.unwrap() <= top_k)
        .map(|r| RankPair {
            open_lines: r.open_lines.clone(),
            rank_exact: r.rank_exact.unwrap(),
            rank_approx: r.rank_approx.unwrap(),
            approx_loss_kw: r.approx_loss_kw,
            exact_loss_kw: r.exact_loss_kw.unwrap(),
        })
        .collect();
    pairs.sort_by_key(|p| p.rank_exact);
    let disp: Vec<usize> = pairs.iter().map(|p| p.rank_exact.abs_diff(p.rank_approx)).collect();
    let top1_agree = pairs.first().map(|p| p.rank_approx == 1).unwrap_or(false);
    Ok(RankComparison {
        max_displacement: disp.iter().copied().max().unwrap_or(0),
        mean_displacement: if disp.is_empty() { 0.0 } else { disp.iter().sum::<usize>() as f64 / disp.len() as f64 },
        pairs,
        excluded,
        spearman,
        top1_agree,
        table,
    })
}
