//! The subcommands. Each returns summary lines for stdout; on a numerical failure
//! whatever could be computed has already been written.

use std::collections::BTreeMap;

use p2atlas::airy::SeedWeights;
use p2atlas::cubicmodel::{bridge_check, d_tau_exponent, d_tau_sides, t_to_z};
use p2atlas::exec::Exec;
use p2atlas::num::{rel_err, C64};
use p2atlas::phase::{self, AtlasOptions, PhaseLabel, RegionAtlas};
use p2atlas::quaddiff::{Endpoint, TraceOptions};
use p2atlas::suite::{CriterionResult, Suite};
use p2atlas::taufun::TauOptions;
use p2atlas::zerofind::{pole_map_with, LocateOptions, Window};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, LambdaValue, RunConfig};
use crate::emit::{self, num, Csv, Svg};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { message: String, details: serde_json::Value },
}

impl Failure {
    fn numerical(message: impl Into<String>, details: serde_json::Value) -> Self {
        Failure::Numerical { message: message.into(), details }
    }
}

type Outcome = Result<Vec<String>, Failure>;

pub fn dispatch(cfg: &RunConfig, exec: Exec) -> Outcome {
    match cfg.command {
        Command::Poles => poles(cfg, exec),
        Command::Phase => phase_map(cfg, exec),
        Command::Trajectories => trajectories(cfg, exec),
        Command::Bridge => bridge(cfg, exec),
        Command::Verify => verify(cfg, exec),
    }
}

fn save(path: &Option<std::path::PathBuf>, contents: impl FnOnce() -> String, lines: &mut Vec<String>) -> Result<(), Failure> {
    if let Some(p) = path {
        emit::write(p, &contents()).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        lines.push(format!("wrote {}", p.display()));
    }
    Ok(())
}

fn atlas(exec: Exec) -> Result<RegionAtlas, Failure> {
    phase::build_atlas(&AtlasOptions::default(), exec).map_err(|e| Failure::numerical(format!("atlas: {e}"), json!(null)))
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// O_1 outlines in the t-plane: the three two-cut regions and the triangle.
fn o1_outlines(a: &RegionAtlas) -> Vec<Vec<C64>> {
    let mut v: Vec<Vec<C64>> = a.two_cut.to_vec();
    v.push(a.triangle.clone());
    for p in &mut v {
        if let Some(&first) = p.first() {
            p.push(first);
        }
    }
    v
}

fn poles(cfg: &RunConfig, exec: Exec) -> Outcome {
    let (lo, hi) = cfg.window_corners();
    let w = Window::new(lo, hi).map_err(|e| Failure::Config(e.to_string()))?;
    let lopts = LocateOptions { exec, ..Default::default() };
    let topts = TauOptions { precision: cfg.precision.into(), ..Default::default() };
    let pm = pole_map_with(cfg.n, &SeedWeights::new(cfg.lambda()), &w, &lopts, &topts)
        .map_err(|e| Failure::numerical(format!("pole map: {e}"), json!(null)))?;
    let groups = [("pole+", sorted(pm.poles_plus.clone())), ("pole-", sorted(pm.poles_minus.clone())), ("zero", sorted(pm.zeros_q.clone()))];
    let mut lines = vec![format!(
        "n = {}, lambda = {}: {} poles (+1), {} poles (-1), {} zeros, min separation {:.3e}, complete {}",
        cfg.n,
        cfg.lambda,
        groups[0].1.len(),
        groups[1].1.len(),
        groups[2].1.len(),
        pm.min_separation(),
        pm.complete
    )];
    save(
        &cfg.outputs.csv,
        || {
            let mut csv = Csv::new(&["re", "im", "kind"]);
            for (kind, pts) in &groups {
                for z in pts {
                    csv.row(&[num(z.re), num(z.im), kind.to_string()]);
                }
            }
            csv.finish()
        },
        &mut lines,
    )?;
    save(
        &cfg.outputs.json,
        || {
            emit::json(
                "poles",
                &json!({
                    "n": cfg.n,
                    "lambda": cfg.lambda,
                    "window": cfg.window,
                    "complete": pm.complete,
                    "min_separation": pm.min_separation(),
                    "poles_plus": pm.poles_plus,
                    "residues_plus": pm.residues_plus,
                    "poles_minus": pm.poles_minus,
                    "residues_minus": pm.residues_minus,
                    "zeros": pm.zeros_q,
                    "unresolved": pm.unresolved,
                }),
            )
        },
        &mut lines,
    )?;
    if cfg.outputs.svg.is_some() {
        let a = atlas(exec)?;
        save(
            &cfg.outputs.svg,
            || {
                let mut s = Svg::new(lo, hi, 640.0);
                s.axes();
                // O_1 carried to the z-plane by z = -(sqrt 2 n)^{2/3} t
                for p in o1_outlines(&a) {
                    let z: Vec<C64> = p.iter().map(|t| t_to_z(*t, cfg.n as f64)).collect();
                    s.polyline(&z, "#000", 1.2, None);
                }
                // poles red (residue +1 lighter), zeros blue
                for z in &groups[0].1 {
                    s.dot(*z, 3.0, "#e03030");
                }
                for z in &groups[1].1 {
                    s.dot(*z, 3.0, "#901818");
                }
                for z in &groups[2].1 {
                    s.cross(*z, 3.0, "#2040d0");
                }
                s.text(lo + C64::new(0.02, 0.03) * (hi - lo).re, &format!("n = {}, lambda = {}", cfg.n, cfg.lambda));
                s.finish()
            },
            &mut lines,
        )?;
    }
    if !pm.complete {
        return Err(Failure::numerical("pole map incomplete: some zeros were counted but not resolved", json!({ "unresolved": pm.unresolved })));
    }
    Ok(lines)
}

fn label_colour(l: &PhaseLabel) -> &'static str {
    use p2atlas::phase::Tau;
    match l {
        PhaseLabel::OneCut(Tau::Zero) => "#fde7b0",
        PhaseLabel::OneCut(Tau::PlusI) => "#fbd38a",
        PhaseLabel::OneCut(Tau::MinusI) => "#f7c065",
        PhaseLabel::TwoCut(Tau::Zero) => "#b9dcf2",
        PhaseLabel::TwoCut(Tau::PlusI) => "#98c8ea",
        PhaseLabel::TwoCut(Tau::MinusI) => "#79b4e0",
        PhaseLabel::Trefoil => "#c6e5b3",
        PhaseLabel::BoundaryOneCut | PhaseLabel::Corner => "#333333",
    }
}

#[derive(Serialize)]
struct PhaseDoc<'a> {
    window: [f64; 4],
    resolution: usize,
    t_cr: f64,
    corners: [C64; 3],
    loop_crossing: f64,
    /// label name -> number of grid points
    counts: BTreeMap<String, usize>,
    boundary_o0: &'a [C64],
    side: &'a [C64],
    two_cut: &'a [Vec<C64>; 3],
    triangle: &'a [C64],
}

fn phase_map(cfg: &RunConfig, exec: Exec) -> Outcome {
    let a = atlas(exec)?;
    let (lo, hi) = cfg.window_corners();
    let r = cfg.resolution;
    let grid = a.classify_grid(lo, hi, r, r, exec);
    let mut counts = BTreeMap::new();
    for (_, l) in &grid {
        *counts.entry(l.name()).or_insert(0usize) += 1;
    }
    let mut lines = vec![format!(
        "{r}x{r} grid: {}",
        counts.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")
    )];
    save(
        &cfg.outputs.csv,
        || {
            let mut csv = Csv::new(&["t_re", "t_im", "label"]);
            for (t, l) in &grid {
                csv.row(&[num(t.re), num(t.im), l.name()]);
            }
            csv.finish()
        },
        &mut lines,
    )?;
    save(
        &cfg.outputs.json,
        || {
            emit::json(
                "phase",
                &PhaseDoc {
                    window: cfg.window,
                    resolution: r,
                    t_cr: a.t_cr,
                    corners: a.corners,
                    loop_crossing: a.loop_crossing,
                    counts: counts.clone(),
                    boundary_o0: &a.boundary_o0,
                    side: &a.side,
                    two_cut: &a.two_cut,
                    triangle: &a.triangle,
                },
            )
        },
        &mut lines,
    )?;
    save(
        &cfg.outputs.svg,
        || {
            let mut s = Svg::new(lo, hi, 640.0);
            let dx = (hi.re - lo.re) / (r - 1) as f64;
            let dy = (hi.im - lo.im) / (r - 1) as f64;
            let half = C64::new(0.5 * dx, 0.5 * dy);
            // one rectangle per run of equal labels along a row
            for row in grid.chunks(r) {
                let mut start = 0;
                for k in 1..=row.len() {
                    if k == row.len() || row[k].1 != row[start].1 {
                        s.rect(row[start].0 - half, row[k - 1].0 + half, label_colour(&row[start].1));
                        start = k;
                    }
                }
            }
            s.axes();
            for p in o1_outlines(&a) {
                s.polyline(&p, "#000", 1.0, None);
            }
            s.polyline(&a.boundary_o0, "#000", 1.0, Some("4 3"));
            for c in a.corners {
                s.dot(c, 3.0, "#c22");
            }
            s.finish()
        },
        &mut lines,
    )?;
    Ok(lines)
}

fn trajectories(cfg: &RunConfig, exec: Exec) -> Outcome {
    let a = atlas(exec)?;
    let t = cfg.t();
    let sc = phase::s_curve(t, &a, &TraceOptions::default(), exec)
        .map_err(|e| Failure::numerical(format!("s-curve at t = {t}: {e}"), json!({ "t": t, "label": a.classify(t).name() })))?;
    let g = &sc.graph;
    let mut lines = vec![format!(
        "t = {t}: {}, {} zeros, {} short trajectories, support {:?}, chain of {} arcs, admissible {}",
        sc.label.name(),
        g.zeros.len(),
        g.shorts.len(),
        g.short_list().iter().enumerate().filter(|(k, _)| g.support.contains(k)).map(|(_, p)| *p).collect::<Vec<_>>(),
        sc.chain.arcs.len(),
        g.admissible
    )];
    save(
        &cfg.outputs.csv,
        || {
            let mut csv = Csv::new(&["set", "index", "re", "im"]);
            for (k, z) in g.zeros.iter().enumerate() {
                csv.row(&["zero".into(), k.to_string(), num(z.re), num(z.im)]);
            }
            let sets = [("trajectory", &g.arcs), ("orthogonal", &g.orth)];
            for (name, arcs) in sets {
                for (k, arc) in arcs.iter().enumerate() {
                    for z in &arc.points {
                        csv.row(&[name.into(), k.to_string(), num(z.re), num(z.im)]);
                    }
                }
            }
            for (k, arc) in sc.chain.arcs.iter().enumerate() {
                for z in &arc.points {
                    csv.row(&["chain".into(), k.to_string(), num(z.re), num(z.im)]);
                }
            }
            csv.finish()
        },
        &mut lines,
    )?;
    save(&cfg.outputs.json, || emit::json("trajectories", &sc), &mut lines)?;
    save(
        &cfg.outputs.svg,
        || {
            let (lo, hi) = cfg.window_corners();
            let mut s = Svg::new(lo, hi, 640.0);
            s.axes();
            for arc in &g.orth {
                s.polyline(&arc.points, "#9bc", 0.6, Some("3 2"));
            }
            for arc in &g.arcs {
                s.polyline(&arc.points, "#777", 0.8, None);
            }
            for arc in sc.chain.arcs.iter().filter(|a| !a.support) {
                s.polyline(&arc.points, "#d73", 1.6, None);
            }
            for arc in sc.chain.arcs.iter().filter(|a| a.support) {
                s.polyline(&arc.points, "#111", 2.8, None);
            }
            for z in &g.zeros {
                s.dot(*z, 3.5, "#c22");
            }
            s.text(lo + C64::new(0.02, 0.03) * (hi - lo).re, &format!("t = {t}, {}", sc.label.name()));
            s.finish()
        },
        &mut lines,
    )?;
    if !g.admissible {
        let truncated = g.arcs.iter().filter(|a| matches!(a.end, Endpoint::Truncated)).count();
        return Err(Failure::numerical(
            format!("critical graph at t = {t} failed its consistency checks"),
            json!({ "diagnostics": g.diagnostics, "truncated_arcs": truncated }),
        ));
    }
    Ok(lines)
}

#[derive(Serialize)]
struct BridgeRow {
    n: usize,
    t: C64,
    beta_rel: f64,
    gamma2_rel: f64,
    p_sub_rel: f64,
    d_tau_rel: f64,
}

fn bridge(cfg: &RunConfig, exec: Exec) -> Outcome {
    let (lo, hi) = cfg.window_corners();
    let r = cfg.resolution;
    let mut jobs = vec![];
    for n in 1..=cfg.n {
        for i in 0..r {
            for j in 0..r {
                let fx = j as f64 / (r - 1) as f64;
                let fy = i as f64 / (r - 1) as f64;
                jobs.push((n, C64::new(lo.re + (hi.re - lo.re) * fx, lo.im + (hi.im - lo.im) * fy)));
            }
        }
    }
    let (big_n, lambda) = (cfg.big_n, cfg.lambda());
    let results = exec.map(&jobs, |&(n, t)| -> Result<BridgeRow, String> {
        let b = bridge_check(n, t, big_n, lambda).map_err(|e| e.to_string())?;
        let (l, rt) = d_tau_sides(n, t, big_n, lambda, d_tau_exponent(n)).map_err(|e| e.to_string())?;
        let rel = |(a, b): (C64, C64)| rel_err(a, b, 1e-300);
        Ok(BridgeRow { n, t, beta_rel: rel(b.beta), gamma2_rel: rel(b.gamma2), p_sub_rel: rel(b.p_sub), d_tau_rel: rel((l, rt)) })
    });
    let mut rows = vec![];
    let mut errors = vec![];
    for ((n, t), r) in jobs.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(json!({ "n": n, "t": t, "error": e })),
        }
    }
    let worst = rows.iter().map(|r| r.beta_rel.max(r.gamma2_rel).max(r.p_sub_rel).max(r.d_tau_rel)).fold(0.0, f64::max);
    let mut lines = vec![format!("{} rows, n = 1..={}, N = {}, lambda = {}: worst relative residual {worst:.3e}", rows.len(), cfg.n, big_n, cfg.lambda)];
    save(
        &cfg.outputs.csv,
        || {
            let mut csv = Csv::new(&["n", "t_re", "t_im", "bigN", "beta_rel", "gamma2_rel", "p_sub_rel", "d_tau_rel"]);
            for r in &rows {
                csv.row(&[r.n.to_string(), num(r.t.re), num(r.t.im), num(big_n), num(r.beta_rel), num(r.gamma2_rel), num(r.p_sub_rel), num(r.d_tau_rel)]);
            }
            csv.finish()
        },
        &mut lines,
    )?;
    save(
        &cfg.outputs.json,
        || emit::json("bridge", &json!({ "bigN": big_n, "lambda": LambdaValue(lambda), "worst": worst, "rows": rows })),
        &mut lines,
    )?;
    if !errors.is_empty() {
        return Err(Failure::numerical(format!("{} grid points failed", errors.len()), json!({ "errors": errors })));
    }
    Ok(lines)
}

fn verify(cfg: &RunConfig, exec: Exec) -> Outcome {
    let suite = Suite::new(exec, cfg.seed);
    let ids: Vec<usize> = if cfg.criteria.is_empty() { (1..=14).collect() } else { cfg.criteria.clone() };
    let results: Vec<CriterionResult> = ids.iter().map(|&id| suite.run(id)).collect();
    let mut lines: Vec<String> = results.iter().map(CriterionResult::line).collect();
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    lines.push(format!("{}/{} criteria pass", results.len() - failed.len(), results.len()));
    // timings vary run to run, so they stay out of the JSON
    let body: Vec<_> = results
        .iter()
        .map(|r| json!({ "id": r.id, "name": r.name, "passed": r.passed(), "checks": r.checks, "error": r.error, "budget": r.budget }))
        .collect();
    save(&cfg.outputs.json, || emit::json("verify", &json!({ "seed": cfg.seed, "criteria": body })), &mut lines)?;
    if !failed.is_empty() {
        for l in &lines {
            println!("{l}");
        }
        return Err(Failure::numerical(format!("criteria {failed:?} failed"), json!({ "results": results })));
    }
    Ok(lines)
}
