use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use dnr_core::enumerate::{loss_table, TreeRow};
use dnr_core::gadget::{Answer, PartitionInstance};
use dnr_core::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::{CompareArgs, EnumerateArgs, GadgetArgs, OptimizeArgs, Outcome, Pivot, PowerflowArgs};

fn read_input(path: &Path) -> Result<(String, String)> {
    let bytes = std::fs::read(path).map_err(|source| DnrError::Io { path: path.to_path_buf(), source })?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| DnrError::Parse { line: 0, column: 0, message: format!("not UTF-8: {e}") })?;
    Ok((text, digest))
}

fn read_case(path: &Path) -> Result<(Network, String)> {
    let (text, digest) = read_input(path)?;
    Ok((Network::from_json(&text)?, digest))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn parse_lines(s: &str) -> std::result::Result<Vec<LineId>, DnrError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| DnrError::InvalidParams(format!("bad line id {t:?}"))))
        .collect()
}

fn join(ids: &[LineId]) -> String {
    if ids.is_empty() {
        return "none".into();
    }
    ids.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_init(net: &Network, spec: &str) -> std::result::Result<TreeConfig, DnrError> {
    if spec == "case-default" {
        return Ok(default_tree(net));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed = seed.parse().map_err(|_| DnrError::InvalidParams(format!("bad seed {seed:?}")))?;
        return Ok(random_spanning_tree(net, seed));
    }
    if let Some(list) = spec.strip_prefix("open:") {
        return TreeConfig::from_open(net, &parse_lines(list)?);
    }
    Err(DnrError::InvalidParams(format!("--init must be case-default, random:SEED or open:LIST, got {spec:?}")))
}

pub fn optimize(a: &OptimizeArgs) -> Result<Outcome> {
    let (net, digest) = read_case(&a.case)?;
    let init = parse_init(&net, &a.init)?;
    let params = SearchParams {
        epsilon: a.epsilon,
        pivot: match a.pivot {
            Pivot::Best => PivotRule::BestImprovement,
            Pivot::First => PivotRule::FirstImprovement,
        },
        max_iters: a.max_iters,
        ..Default::default()
    };
    let trace = branch_exchange(&net, &init, &params)?;
    if let Some(p) = &a.trace {
        write_file(p, &trace.to_csv())?;
    }
    let open = trace.final_tree.open_lines(&net);
    let exact = exact_loss(&net, &trace.final_tree);

    let mut text = String::new();
    writeln!(text, "case: {}", net.name())?;
    writeln!(text, "initial open lines: {}", join(&init.open_lines(&net)))?;
    writeln!(text, "final open lines: {}", join(&open))?;
    writeln!(text, "approx loss: {:.3} kW", trace.final_loss)?;
    match &exact {
        Ok(v) => writeln!(text, "exact loss: {v:.3} kW")?,
        Err(e) => writeln!(text, "exact loss: n/a ({e})")?,
    }
    writeln!(text, "steps: {}", trace.steps.len())?;
    writeln!(text, "converged: {}", trace.converged)?;

    let results = json!({
        "case": net.name(),
        "initial_open_lines": init.open_lines(&net),
        "final_open_lines": open,
        "approx_loss_kw": trace.final_loss,
        "exact_loss_kw": exact.as_ref().ok(),
        "steps": trace.steps,
        "converged": trace.converged,
    });
    Ok(Outcome { text, results, input_sha256: digest, code: if trace.converged { 0 } else { 3 } })
}

fn best_by(rows: &[TreeRow], key: impl Fn(&TreeRow) -> Option<f64>) -> Option<&TreeRow> {
    rows.iter()
        .filter(|r| key(r).is_some())
        .min_by(|a, b| key(a).unwrap().total_cmp(&key(b).unwrap()).then(a.open_lines.cmp(&b.open_lines)))
}

pub fn enumerate(a: &EnumerateArgs) -> Result<Outcome> {
    let (net, digest) = read_case(&a.case)?;
    let kirchhoff = count_trees_kirchhoff(&net).to_string();
    let mut text = String::new();

    if a.count_only {
        let mut count = 0usize;
        for t in enumerate_trees(&net, a.limit) {
            t?;
            count += 1;
        }
        writeln!(text, "{count}")?;
        let results = json!({ "case": net.name(), "count": count, "kirchhoff": kirchhoff });
        return Ok(Outcome { text, results, input_sha256: digest, code: 0 });
    }

    let path = a.table.as_ref().expect("clap requires --table without --count-only");
    let mut table = loss_table(&net, a.limit, a.with_exact, Exec::default())?;
    table.sort_by_approx();
    write_file(path, &table.to_csv())?;

    let best_approx = best_by(&table.rows, |r| Some(r.approx_loss_kw)).expect("at least one tree");
    let best_exact = best_by(&table.rows, |r| r.exact_loss_kw);
    let failed = if a.with_exact { table.rows.iter().filter(|r| r.exact_loss_kw.is_none()).count() } else { 0 };
    writeln!(text, "trees: {}", table.rows.len())?;
    writeln!(text, "best approx: {} ({:.3} kW)", join(&best_approx.open_lines), best_approx.approx_loss_kw)?;
    if let Some(r) = best_exact {
        writeln!(text, "best exact: {} ({:.3} kW)", join(&r.open_lines), r.exact_loss_kw.unwrap())?;
        writeln!(text, "power flow failed: {failed}")?;
    }
    writeln!(text, "table: {}", path.display())?;

    let results = json!({
        "case": net.name(),
        "count": table.rows.len(),
        "kirchhoff": kirchhoff,
        "best_approx_open_lines": best_approx.open_lines,
        "best_approx_loss_kw": best_approx.approx_loss_kw,
        "best_exact_open_lines": best_exact.map(|r| &r.open_lines),
        "best_exact_loss_kw": best_exact.and_then(|r| r.exact_loss_kw),
        "power_flow_failed": failed,
        "table": path,
    });
    Ok(Outcome { text, results, input_sha256: digest, code: 0 })
}

pub fn powerflow(a: &PowerflowArgs) -> Result<Outcome> {
    let (net, digest) = read_case(&a.case)?;
    let cfg = TreeConfig::from_open(&net, &parse_lines(&a.open)?)?;
    let sol = solve_radial(&net, &cfg, &PfOptions { tol: a.tol, max_sweeps: a.max_sweeps })?;
    if let Some(p) = &a.bus_csv {
        write_file(p, &sol.bus_csv())?;
    }
    if let Some(p) = &a.line_csv {
        write_file(p, &sol.line_csv())?;
    }
    let approx = total_loss(&net, &cfg)?.total;
    let (min_bus, min_v) = sol
        .v_mag
        .iter()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&b, &v)| (b, v))
        .expect("network has buses");

    let mut text = String::new();
    writeln!(text, "open lines: {}", join(&cfg.open_lines(&net)))?;
    writeln!(text, "exact loss: {:.3} kW", sol.total_loss_kw())?;
    writeln!(text, "approx loss: {approx:.3} kW")?;
    writeln!(text, "min voltage: {min_v:.4} p.u. at bus {min_bus}")?;
    writeln!(text, "sweeps: {}", sol.iterations)?;
    writeln!(text, "converged: {}", sol.converged)?;

    let results = json!({
        "case": net.name(),
        "open_lines": cfg.open_lines(&net),
        "exact_loss_kw": sol.total_loss_kw(),
        "approx_loss_kw": approx,
        "min_v_pu": min_v,
        "min_v_bus": min_bus,
        "sweeps": sol.iterations,
        "converged": sol.converged,
    });
    Ok(Outcome { text, results, input_sha256: digest, code: if sol.converged { 0 } else { 3 } })
}

pub fn gadget(a: &GadgetArgs) -> Result<Outcome> {
    let (text_in, digest) = read_input(&a.instance)?;
    let inst = PartitionInstance::from_json(&text_in)?;
    let mut text = String::new();

    if let Some(path) = &a.emit {
        let g = gadget::build_gadget(&inst)?;
        save_case(&g.network, path)?;
        writeln!(text, "wrote {} ({} buses, {} lines)", path.display(), g.network.n_buses(), g.network.n_lines())?;
        let results = json!({
            "case": path,
            "buses": g.network.n_buses(),
            "lines": g.network.n_lines(),
            "root_lines": g.root_lines,
            "c_min": c_min(&inst),
        });
        return Ok(Outcome { text, results, input_sha256: digest, code: 0 });
    }

    let d = decide_partition(&inst, a.limit, Exec::default())?;
    let answer = match d.answer {
        Answer::Yes => "yes",
        Answer::No => "no",
        Answer::Unknown => "unknown",
    };
    writeln!(text, "answer: {answer}")?;
    if let Some(ts) = &d.triplets {
        for t in ts {
            let items: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            writeln!(text, "triplet: {{{}}}", items.join(","))?;
        }
    }
    writeln!(text, "cost: {} (c_min {})", d.best_cost, d.c_min)?;
    writeln!(text, "exhaustive: {}", d.exhaustive)?;
    let results = serde_json::to_value(&d)?;
    Ok(Outcome { text, results, input_sha256: digest, code: 0 })
}

pub fn compare(a: &CompareArgs) -> Result<Outcome> {
    let (net, digest) = read_case(&a.case)?;
    let mut cmp = rank_comparison(&net, a.top_k, a.limit, Exec::default())?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    cmp.table.sort_by_approx();
    let scatter = a.out_dir.join("scatter.csv");
    write_file(&scatter, &cmp.table.to_csv())?;

    let mut ranks = String::from("rank_exact,rank_approx,open_lines,exact_loss_kw,approx_loss_kw\n");
    for p in &cmp.pairs {
        let open: Vec<String> = p.open_lines.iter().map(|l| l.to_string()).collect();
        writeln!(
            ranks,
            "{},{},{},{:.6},{:.6}",
            p.rank_exact,
            p.rank_approx,
            open.join(";"),
            p.exact_loss_kw,
            p.approx_loss_kw
        )?;
    }
    let ranks_path = a.out_dir.join("ranks.csv");
    write_file(&ranks_path, &ranks)?;

    let ranked = cmp.table.rows.len() - cmp.excluded.len();
    let top = cmp.pairs.first();
    let mut text = String::new();
    writeln!(text, "trees: {}", cmp.table.rows.len())?;
    writeln!(text, "ranked: {ranked}")?;
    writeln!(text, "excluded (power flow failed): {}", cmp.excluded.len())?;
    writeln!(text, "spearman: {:.6}", cmp.spearman)?;
    writeln!(text, "top-1 agree: {}", cmp.top1_agree)?;
    if let Some(p) = top {
        writeln!(text, "best exact: {} ({:.3} kW)", join(&p.open_lines), p.exact_loss_kw)?;
    }
    writeln!(text, "max displacement (top {}): {}", a.top_k, cmp.max_displacement)?;
    writeln!(text, "mean displacement (top {}): {:.3}", a.top_k, cmp.mean_displacement)?;
    writeln!(text, "wrote {} and {}", scatter.display(), ranks_path.display())?;

    let results = json!({
        "case": net.name(),
        "trees": cmp.table.rows.len(),
        "ranked": ranked,
        "excluded": cmp.excluded.len(),
        "spearman": cmp.spearman,
        "top1_agree": cmp.top1_agree,
        "best_exact_open_lines": top.map(|p| &p.open_lines),
        "max_displacement": cmp.max_displacement,
        "mean_displacement": cmp.mean_displacement,
        "scatter_csv": scatter,
        "ranks_csv": ranks_path,
    });
    Ok(Outcome { text, results, input_sha256: digest, code: 0 })
}
