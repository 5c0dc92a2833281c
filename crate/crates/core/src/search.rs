//! Branch-exchange local search over spanning trees.
//!
//! Each step closes one open line and opens one line on the loop it creates,
//! accepting the exchange only when the approximate loss drops below
//! `(1 - epsilon)` times its current value. Candidate exchanges are scored
//! incrementally: only lines on the loop change flow.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{DnrError, Result};
use crate::loss::{approx_loss_of, f_super, f_super_mask};
use crate::network::{LineId, Network};
use crate::par::Exec;
use crate::tree::{is_tree_idx, kruskal, RootedOrientation, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PivotRule {
    /// Largest decrease; ties go to the smallest `(e_in, e_out)`.
    BestImprovement,
    /// First improving exchange in `(e_in, e_out)` order.
    FirstImprovement,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    pub epsilon: f64,
    pub pivot: PivotRule,
    /// `None` means `10 * |lines| * |buses|`.
    pub max_iters: Option<usize>,
    /// Recompute every accepted tree from scratch and assert it matches.
    pub verify: bool,
    pub exec: Exec,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            epsilon: 1e-6,
            pivot: PivotRule::BestImprovement,
            max_iters: None,
            verify: false,
            exec: Exec::default(),
        }
    }
}

impl SearchParams {
    fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(DnrError::InvalidParams(format!("epsilon {} not in [0, 1)", self.epsilon)));
        }
        if self.max_iters == Some(0) {
            return Err(DnrError::InvalidParams("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub iteration: usize,
    pub e_in: LineId,
    pub e_out: LineId,
    pub loss_before: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchTrace {
    pub steps: Vec<Step>,
    pub final_tree: TreeConfig,
    pub final_loss: f64,
    pub converged: bool,
}

impl SearchTrace {
    /// `iter,e_in,e_out,loss_before_kw,loss_after_kw`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,e_in,e_out,loss_before_kw,loss_after_kw\n");
        for st in &self.steps {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6}",
                st.iteration, st.e_in, st.e_out, st.loss_before, st.loss_after
            );
        }
        s
    }
}

/// Current tree with the flow each line would carry under the loss model.
struct State {
    mask: Vec<bool>,
    o: RootedOrientation,
    p: Vec<f64>,
    q: Vec<f64>,
    loss: f64,
}

impl State {
    fn new(net: &Network, mask: Vec<bool>) -> Option<Self> {
        let o = RootedOrientation::from_mask(net, &mask)?;
        let p = o.subtree_sums(|b| net.p_pu(b));
        let q = o.subtree_sums(|b| net.q_pu(b));
        let loss = approx_loss_of(net, &o);
        Some(State { mask, o, p, q, loss })
    }

    fn flow(&self, line: usize) -> (f64, f64) {
        let v = self.o.child_of[line].expect("tree line");
        (self.p[v], self.q[v])
    }

    /// Loss after closing `e_in` and opening each tree line on its loop.
    fn candidates(&self, net: &Network, e_in: usize) -> Vec<(usize, f64)> {
        let (a, b) = net.ends(e_in);
        let (la, lb) = self.o.path_legs(a, b);
        let mut out = Vec::with_capacity(la.len() + lb.len());
        for (near, far) in [(&la, &lb), (&lb, &la)] {
            for t in 0..near.len() {
                out.push((near[t], self.loss + self.delta(net, e_in, near, far, t)));
            }
        }
        out
    }

    /// Loss change (kW) for opening `near[t]`: the subtree below it re-hangs
    /// from the far endpoint of `e_in`, reversing the lines beneath it.
    fn delta(&self, net: &Network, e_in: usize, near: &[usize], far: &[usize], t: usize) -> f64 {
        let sq = |p: f64, q: f64| p * p + q * q;
        let (sp, sq_) = self.flow(near[t]);
        let mut d = net.r_pu(e_in) * sq(sp, sq_) - net.r_pu(near[t]) * sq(sp, sq_);
        for &k in &near[..t] {
            let (p, q) = self.flow(k);
            d += net.r_pu(k) * (sq(sp - p, sq_ - q) - sq(p, q));
        }
        for &k in &near[t + 1..] {
            let (p, q) = self.flow(k);
            d += net.r_pu(k) * (sq(p - sp, q - sq_) - sq(p, q));
        }
        for &k in far {
            let (p, q) = self.flow(k);
            d += net.r_pu(k) * (sq(p + sp, q + sq_) - sq(p, q));
        }
        d * net.kw_per_pu()
    }
}

pub fn default_max_iters(net: &Network) -> usize {
    10 * net.n_lines() * net.n_buses()
}

pub fn branch_exchange(net: &Network, init: &TreeConfig, params: &SearchParams) -> Result<SearchTrace> {
    params.check()?;
    let max_iters = params.max_iters.unwrap_or_else(|| default_max_iters(net));
    let mut state = State::new(net, init.mask(net)?)
        .ok_or_else(|| DnrError::NotSpanningTree("initial configuration".into()))?;

    let mut open: Vec<usize> = (0..net.n_lines()).collect();
    open.sort_by_key(|&k| net.line_id(k));
    let mut steps = Vec::new();
    let mut converged = false;

    for iteration in 1..=max_iters {
        let threshold = (1.0 - params.epsilon) * state.loss;
        let e_ins: Vec<usize> = open.iter().copied().filter(|&k| !state.mask[k]).collect();
        let scored = params.exec.map(&e_ins, |&k| {
            let mut c: Vec<(LineId, LineId, usize, usize, f64)> = state
                .candidates(net, k)
                .into_iter()
                .filter(|&(_, l)| l < threshold)
                .map(|(out, l)| (net.line_id(k), net.line_id(out), k, out, l))
                .collect();
            c.sort_by_key(|x| (x.0, x.1));
            c
        });
        let mut ranked: Vec<_> = scored.into_iter().flatten().collect();
        if params.pivot == PivotRule::BestImprovement {
            ranked.sort_by(|x, y| x.4.total_cmp(&y.4).then((x.0, x.1).cmp(&(y.0, y.1))));
        }

        let mut accepted = None;
        for &(id_in, id_out, k_in, k_out, estimate) in &ranked {
            let mut mask = state.mask.clone();
            mask[k_out] = false;
            mask[k_in] = true;
            let next = State::new(net, mask).expect("loop exchange keeps a spanning tree");
            if params.verify {
                let rel = (next.loss - estimate).abs() / next.loss.max(1e-300);
                assert!(rel < 1e-9, "incremental {estimate} vs full {}", next.loss);
            }
            // the guard is applied to the recomputed loss
            if next.loss < threshold {
                accepted = Some((id_in, id_out, next));
                break;
            }
        }
        match accepted {
            Some((e_in, e_out, next)) => {
                steps.push(Step { iteration, e_in, e_out, loss_before: state.loss, loss_after: next.loss });
                state = next;
            }
            None => {
                converged = true;
                break;
            }
        }
    }

    Ok(SearchTrace {
        steps,
        final_tree: TreeConfig::from_indices(net, (0..net.n_lines()).filter(|&k| state.mask[k])),
        final_loss: state.loss,
        converged,
    })
}

/// Exchanges that beat `(1 - epsilon)` times the current loss, found by full
/// recomputation of every neighbor.
pub fn improving_swaps(net: &Network, cfg: &TreeConfig, epsilon: f64) -> Result<Vec<(LineId, LineId, f64)>> {
    let mask = cfg.mask(net)?;
    let base = State::new(net, mask.clone())
        .ok_or_else(|| DnrError::NotSpanningTree("configuration".into()))?;
    let mut out = Vec::new();
    for e_in in (0..net.n_lines()).filter(|&k| !mask[k]) {
        for e_out in (0..net.n_lines()).filter(|&k| mask[k]) {
            let mut m = mask.clone();
            m[e_out] = false;
            m[e_in] = true;
            let lines: Vec<usize> = (0..m.len()).filter(|&k| m[k]).collect();
            if !is_tree_idx(net, &lines) {
                continue;
            }
            let loss = State::new(net, m).expect("tree").loss;
            if loss < (1.0 - epsilon) * base.loss {
                out.push((net.line_id(e_in), net.line_id(e_out), loss));
            }
        }
    }
    Ok(out)
}

/// Random line weights followed by Kruskal; deterministic per seed.
pub fn random_spanning_tree(net: &Network, seed: u64) -> TreeConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..net.n_lines()).collect();
    let weights: Vec<f64> = (0..net.n_lines()).map(|_| rng.gen()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
    TreeConfig::from_indices(net, kruskal(net, order))
}

/// Local search from one random tree per seed.
pub fn multistart(net: &Network, seeds: &[u64], params: &SearchParams) -> Result<Vec<SearchTrace>> {
    let inner = SearchParams { exec: Exec::Sequential, ..*params };
    params
        .exec
        .map(seeds, |&s| branch_exchange(net, &random_spanning_tree(net, s), &inner))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    /// `f` over all lines; upper bound on `f` of any subset.
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `M - f(result) >= (1/6 - epsilon) (M - f(optimum))` with `M = f(all lines)`.
pub fn check_bound(net: &Network, result: &TreeConfig, optimum: &TreeConfig, epsilon: f64) -> Result<BoundCheck> {
    for cfg in [result, optimum] {
        let lines = cfg.indices(net)?;
        if !is_tree_idx(net, &lines) {
            return Err(DnrError::NotSpanningTree("bound check input".into()));
        }
    }
    let m = f_super_mask(net, &vec![true; net.n_lines()]);
    let ids = |c: &TreeConfig| c.closed().iter().copied().collect::<Vec<_>>();
    let lhs = m - f_super(net, &ids(result))?;
    let rhs = (1.0 / 6.0 - epsilon) * (m - f_super(net, &ids(optimum))?);
    Ok(BoundCheck { m, lhs, rhs, holds: lhs >= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::tree::{fundamental_cycle, is_spanning_tree};
    use std::collections::BTreeSet;

    fn verify() -> SearchParams {
        SearchParams { verify: true, ..Default::default() }
    }

    #[test]
    fn case33_from_initial_configuration() {
        let net = cases::case33();
        let init = TreeConfig::from_open(&net, &cases::CASE33_TIE_LINES).unwrap();
        let trace = branch_exchange(&net, &init, &verify()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.final_tree.open_lines(&net), vec![7, 9, 14, 32, 37]);
        assert!(improving_swaps(&net, &trace.final_tree, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn trace_replays_as_loop_exchanges() {
        let net = cases::case33();
        let mut t = TreeConfig::from_open(&net, &cases::CASE33_TIE_LINES).unwrap();
        let trace = branch_exchange(&net, &t, &verify()).unwrap();
        assert!(!trace.steps.is_empty());
        let mut prev = f64::INFINITY;
        for st in &trace.steps {
            assert!(fundamental_cycle(&net, &t, st.e_in).unwrap().contains(&st.e_out));
            t = crate::tree::swap(&t, st.e_out, st.e_in).unwrap();
            assert!(is_spanning_tree(&net, &t).unwrap());
            assert!(st.loss_after < (1.0 - 1e-6) * st.loss_before);
            assert!(st.loss_after < prev);
            prev = st.loss_after;
        }
        assert_eq!(t, trace.final_tree);
    }

    #[test]
    fn first_improvement_also_reaches_local_optimum() {
        let net = cases::case33();
        let init = TreeConfig::from_open(&net, &cases::CASE33_TIE_LINES).unwrap();
        let p = SearchParams { pivot: PivotRule::FirstImprovement, ..verify() };
        let trace = branch_exchange(&net, &init, &p).unwrap();
        assert!(trace.converged);
        assert!(improving_swaps(&net, &trace.final_tree, p.epsilon).unwrap().is_empty());
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let net = cases::case33();
        let opt = TreeConfig::from_open(&net, &[7, 9, 14, 32, 37]).unwrap();
        let trace = branch_exchange(&net, &opt, &SearchParams::default()).unwrap();
        assert!(trace.converged && trace.steps.is_empty());
        assert_eq!(trace.final_tree, opt);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let net = cases::case33();
        let init = TreeConfig::from_open(&net, &cases::CASE33_TIE_LINES).unwrap();
        let p = SearchParams { max_iters: Some(1), ..Default::default() };
        let trace = branch_exchange(&net, &init, &p).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn bad_params_and_inputs() {
        let net = cases::triangle();
        let p = SearchParams { epsilon: 1.0, ..Default::default() };
        assert!(branch_exchange(&net, &TreeConfig::new([1, 2]), &p).is_err());
        let p = SearchParams { max_iters: Some(0), ..Default::default() };
        assert!(branch_exchange(&net, &TreeConfig::new([1, 2]), &p).is_err());
        let err = branch_exchange(&net, &TreeConfig::new([1, 2, 3]), &SearchParams::default());
        assert!(matches!(err, Err(DnrError::NotSpanningTree(_))));
    }

    #[test]
    fn sequential_and_parallel_traces_match() {
        let net = cases::case33();
        for seed in 0..20 {
            let init = random_spanning_tree(&net, seed);
            let a = branch_exchange(&net, &init, &SearchParams { exec: Exec::Sequential, ..Default::default() })
                .unwrap();
            let b = branch_exchange(&net, &init, &SearchParams { exec: Exec::Parallel, ..Default::default() })
                .unwrap();
            assert_eq!(a.steps, b.steps);
        }
    }

    #[test]
    fn random_tree_contracts() {
        let two = cases::two_bus();
        assert_eq!(random_spanning_tree(&two, 42), TreeConfig::new([1]));
        let net = cases::case33();
        assert_eq!(random_spanning_tree(&net, 7), random_spanning_tree(&net, 7));
        assert!(is_spanning_tree(&net, &random_spanning_tree(&net, 7)).unwrap());
        let tri = cases::triangle();
        let seen: BTreeSet<TreeConfig> = (0..1000).map(|s| random_spanning_tree(&tri, s)).collect();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn bound_holds_at_optimum() {
        let net = cases::triangle();
        let t = TreeConfig::new([1, 2]);
        let b = check_bound(&net, &t, &t, 1e-6).unwrap();
        assert!(b.holds && b.lhs >= 0.0);
        assert!(check_bound(&net, &TreeConfig::new([1, 2, 3]), &t, 0.0).is_err());
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let net = cases::case33();
        let init = TreeConfig::from_open(&net, &cases::CASE33_TIE_LINES).unwrap();
        let csv = branch_exchange(&net, &init, &SearchParams::default()).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iter,e_in,e_out,loss_before_kw,loss_after_kw"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[3].split('.').nth(1).unwrap().len(), 6);
    }
}
