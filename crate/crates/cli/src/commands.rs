use crate::config::{parse_range, Command, RunConfig, StageArg};
use lane_emden::constructions::{build_supersolution, glue, smooth_c1, smooth_cinf, GluedProfile};
use lane_emden::diagnostics::{pohozaev, pohozaev_rate_identity};
use lane_emden::dirichlet::{
    branch_claims_report, branch_trace_with, bracket_for_radius, detect_nonuniqueness, dirichlet_solution_with,
};
use lane_emden::manifold::{check_hp4, classify_regime, critical_exponents, log_grid};
use lane_emden::shooting::{self, fmt, CauchyProblem, Event, ShootOptions};
use lane_emden::sobolev::{embedding_report, quotient_limit_scan, rayleigh_minimize, write_scan_csv};
use lane_emden::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Summary printed to stdout and stored in the manifest, plus the files written.
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn event_name(e: &Event) -> &'static str {
    match e {
        Event::FirstZero { .. } => "first_zero",
        Event::ReachedRMax { .. } => "reached_r_max",
        Event::BlowUp { .. } => "blow_up",
        Event::StepUnderflow { .. } => "step_underflow",
    }
}

fn glued(c: &RunConfig, stage: StageArg, eps: Option<f64>, width: Option<f64>) -> Result<GluedProfile> {
    let g = glue(c.n, c.alpha()?, c.q()?)?;
    if stage == StageArg::Lipschitz {
        return Ok(g);
    }
    let g = smooth_c1(&g, eps)?;
    if stage == StageArg::C1 {
        return Ok(g);
    }
    smooth_cinf(&g, width)
}

pub fn run(c: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&c.out)?;
    let mut w = Writer { dir: &c.out, files: Vec::new() };
    let summary = match &c.command {
        Command::Classify => classify(c, &mut w)?,
        Command::Shoot { a } => shoot(c, *a, &mut w)?,
        Command::Pohozaev { a } => pohozaev_cmd(c, *a, &mut w)?,
        Command::Branch { a_min, a_max, count, claims, mesh } => branch(c, *a_min, *a_max, *count, claims, *mesh, &mut w)?,
        Command::Dirichlet { radius, bracket } => dirichlet(c, *radius, bracket.as_deref(), &mut w)?,
        Command::Sobolev { radii, mesh } => sobolev(c, radii, *mesh, &mut w)?,
        Command::Embed { p } => embed(c, *p, &mut w)?,
        Command::Glue { stage, eps, width } => glue_cmd(c, *stage, *eps, *width, &mut w)?,
        Command::Supersol { eps, inflate } => supersol(c, *eps, *inflate, &mut w)?,
        Command::Sweep { alpha_range, q_range, a_range } => sweep(c, alpha_range.as_deref(), q_range, a_range, &mut w)?,
    };
    Ok(Outcome { summary, files: w.files })
}

fn classify(c: &RunConfig, w: &mut Writer) -> Result<Value> {
    let t = critical_exponents(c.n, c.alpha()?)?;
    let (tilde, crit, sob) = t.q_bounds();
    let mut v = json!({
        "n": c.n,
        "alpha": c.alpha,
        "tilde_2_alpha": t.tilde,
        "star_2_alpha": t.star_alpha,
        "star_2": if t.star.is_finite() { json!(t.star) } else { json!("infinity") },
        "q_thresholds": [tilde, crit, if sob.is_finite() { json!(sob) } else { json!("infinity") }],
    });
    if let Some(q) = c.q {
        let r = classify_regime(c.n, c.alpha()?, q)?;
        v["q"] = json!(q);
        v["regime"] = json!(r.label.name());
        v["verdict"] = json!(r.label.verdict());
    }
    w.json("classify.json", &v)?;
    Ok(v)
}

fn shoot(c: &RunConfig, a: f64, w: &mut Writer) -> Result<Value> {
    let p = CauchyProblem::new(c.model()?, c.n, c.q()?, a)?;
    let t = shooting::integrate(&p, &c.shoot_options(500.0))?;
    let path = w.path("trajectory.csv");
    t.export(&path)?;
    w.files.push(path.with_extension("json"));
    Ok(json!({
        "event": event_name(&t.event),
        "first_zero": t.event.first_zero(),
        "r_end": t.r_end(),
        "root_residual": t.root_residual(),
        "points": t.len(),
    }))
}

fn pohozaev_cmd(c: &RunConfig, a: f64, w: &mut Writer) -> Result<Value> {
    let p = CauchyProblem::new(c.model()?, c.n, c.q()?, a)?;
    let t = shooting::integrate(&p, &c.shoot_options(500.0))?;
    let tr = pohozaev(&t)?;
    let path = w.path("pohozaev.csv");
    tr.write_csv(&path)?;
    let v = json!({
        "event": event_name(&t.event),
        "first_zero": t.event.first_zero(),
        "nondecreasing": tr.is_nondecreasing(),
        "min_increment": tr.min_increment(),
        "max_abs_p": tr.max_abs_p(),
        "rate_identity_error": pohozaev_rate_identity(&tr)?,
    });
    w.json("pohozaev.json", &v)?;
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn branch(
    c: &RunConfig,
    a_min: Option<f64>,
    a_max: Option<f64>,
    count: usize,
    claims: &[f64],
    mesh: usize,
    w: &mut Writer,
) -> Result<Value> {
    let q = c.q()?;
    let (psi, center) = if c.profile.as_deref() == Some("glued") {
        let g = glued(c, StageArg::Smooth, None, None)?;
        (g.psi().clone(), g.u0)
    } else {
        (c.model()?, 1.0)
    };
    let (lo, hi) = (a_min.unwrap_or(1e-2 * center), a_max.unwrap_or(1e2 * center));
    let b = branch_trace_with(&psi, c.n, q, lo, hi, count, &c.shoot_options(200.0))?;
    b.write_csv(&w.path("branch.csv"))?;
    let d = detect_nonuniqueness(&b)?;
    w.json("nonuniqueness.json", &d)?;
    let mut v = json!({
        "a_range": [lo, hi],
        "present": b.rho.iter().filter(|r| r.is_some()).count(),
        "monotone_violations": b.monotone_violations,
        "triples": d.triples,
        "warnings": d.warnings,
    });
    if !claims.is_empty() {
        let rep = branch_claims_report(&b, claims, mesh)?;
        w.json("claims.json", &rep)?;
        v["claims"] = json!({
            "quotient_increases": rep.quotient_increases,
            "non_injective": rep.non_injective,
            "height_increases": rep.height_increases,
            "height_slope": rep.height_slope,
        });
    }
    Ok(v)
}

fn dirichlet(c: &RunConfig, radius: f64, bracket: Option<&str>, w: &mut Writer) -> Result<Value> {
    let psi = c.model()?;
    let q = c.q()?;
    let o = c.shoot_options((4.0 * radius).max(10.0));
    let br = match bracket {
        Some(s) => {
            let (lo, hi) = s
                .split_once(':')
                .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)))
                .ok_or_else(|| Error::InvalidParameter(format!("bracket '{s}' must be lo:hi")))?;
            (lo, hi)
        }
        None => bracket_for_radius(&psi, c.n, q, radius, &o)?,
    };
    let s = dirichlet_solution_with(&psi, c.n, q, radius, br, &o)?;
    s.trajectory.write_csv(&w.path("ball.csv"))?;
    let v = json!({
        "R": s.r,
        "a": s.a,
        "bracket": [br.0, br.1],
        "first_zero": s.trajectory.event.first_zero(),
        "root_residual": s.trajectory.root_residual(),
        "mass": s.mass,
        "sobolev_quotient": s.sobolev_quotient,
    });
    w.json("ball.json", &v)?;
    Ok(v)
}

fn sobolev(c: &RunConfig, radii: &[f64], mesh: usize, w: &mut Writer) -> Result<Value> {
    let psi = c.model()?;
    let q = c.q()?;
    if radii.len() == 1 {
        let res = rayleigh_minimize(&psi, c.n, q, radii[0], mesh)?;
        w.csv("minimizer.csv", &["r", "f"], res.mesh.iter().zip(&res.minimizer).map(|(r, f)| vec![fmt(*r), fmt(*f)]))?;
        let v = json!({
            "R": res.r,
            "I_R": res.i_r,
            "mass": res.mass,
            "el_residual": res.el_residual,
            "iterations": res.iterations,
            "converged": res.converged,
            "seed_profile": res.seed,
        });
        w.json("quotient.json", &v)?;
        return Ok(v);
    }
    let scan = quotient_limit_scan(&psi, c.n, q, radii, mesh)?;
    write_scan_csv(&w.path("quotient_scan.csv"), &scan)?;
    let v = json!({
        "last_doubling_change": scan.last_doubling_change,
        "decay_exponent": scan.decay_exponent,
        "rows": scan.rows.len(),
    });
    w.json("quotient_scan.json", &v)?;
    Ok(v)
}

fn embed(c: &RunConfig, p: f64, w: &mut Writer) -> Result<Value> {
    let rep = embedding_report(&c.model()?, c.n, p)?;
    w.csv("embedding.csv", &["r", "B"], rep.samples.iter().map(|(r, b)| vec![fmt(*r), fmt(*b)]))?;
    let inf = |x: f64| if x.is_infinite() { json!("infinity") } else { json!(x) };
    let v = json!({
        "p": rep.p,
        "verdict": rep.verdict.name(),
        "sup_B": rep.sup_b,
        "limit_0": inf(rep.limit_0),
        "limit_inf": inf(rep.limit_inf),
        "slope_0": rep.slope_0,
        "slope_inf": rep.slope_inf,
    });
    w.json("embedding.json", &v)?;
    Ok(v)
}

fn glue_cmd(c: &RunConfig, stage: StageArg, eps: Option<f64>, width: Option<f64>, w: &mut Writer) -> Result<Value> {
    let g = glued(c, stage, eps, width)?;
    let dir = c.out.join("glued");
    g.write_dir(&dir)?;
    w.files.extend(["psi.csv", "u.csv", "meta.json"].map(|f| dir.join(f)));
    let failures = g.final_checks.map(|f| f.failures(g.alpha, g.q));
    Ok(json!({
        "stage": g.stage,
        "r_tilde": g.r_tilde,
        "r_bar": g.r_bar,
        "u0": g.u0,
        "tangency": g.tangency,
        "eps": g.eps,
        "width": g.width,
        "final_check_failures": failures,
    }))
}

fn supersol(c: &RunConfig, eps: Option<f64>, inflate: Option<f64>, w: &mut Writer) -> Result<Value> {
    let psi = c.model()?;
    let s = build_supersolution(&psi, c.n, c.alpha()?, c.q()?, eps)?;
    let grid = log_grid(1e-4, 1e4, 801);
    w.csv(
        "supersolution.csv",
        &["r", "w", "scaled_residual"],
        grid.iter().map(|&r| vec![fmt(r), fmt(s.w(r)), fmt(s.scaled_residual(&psi, r))]),
    )?;
    let mut v = json!({ "supersolution": s });
    if let Some(k) = inflate {
        let (min, at) = s.with_amplitude(k).verify(&psi);
        v["inflated"] = json!({ "factor": k, "min_residual": min, "worst_r": at, "accepted": min >= 0.0 });
    }
    w.json("supersolution.json", &v)?;
    Ok(v)
}

#[derive(Serialize)]
struct Cell {
    alpha: f64,
    q: f64,
    a: f64,
    outcome: &'static str,
    rho: Option<f64>,
    pohozaev_monotone: Option<bool>,
    hp4: Option<bool>,
}

fn sweep(c: &RunConfig, alpha_range: Option<&str>, q_range: &str, a_range: &str, w: &mut Writer) -> Result<Value> {
    let alphas = match alpha_range {
        Some(s) => parse_range(s)?,
        None => vec![c.alpha()?],
    };
    let qs = parse_range(q_range)?;
    let heights = parse_range(a_range)?;
    let o = c.shoot_options(500.0);
    let models = alphas.iter().map(|&al| c.model_with_alpha(Some(al))).collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (i, &alpha) in alphas.iter().enumerate() {
        for &q in &qs {
            for &a in &heights {
                cells.push((i, alpha, q, a));
            }
        }
    }
    let hp4: Vec<Option<bool>> = models
        .par_iter()
        .flat_map_iter(|m| qs.iter().map(move |&q| check_hp4(m, c.n, q, o.r_max, 2000).ok().map(|r| r.holds)))
        .collect();
    let rows: Vec<Cell> = cells
        .par_iter()
        .map(|&(i, alpha, q, a)| {
            let qi = qs.iter().position(|&x| x == q).unwrap();
            let cell = |outcome, rho, mono| Cell { alpha, q, a, outcome, rho, pohozaev_monotone: mono, hp4: hp4[i * qs.len() + qi] };
            match run_cell(&models[i], c.n, q, a, &o) {
                Ok((event, mono)) => {
                    let outcome = match event {
                        Event::FirstZero { .. } => "zero_found",
                        Event::ReachedRMax { .. } => "global_positive",
                        Event::BlowUp { .. } => "blow_up",
                        Event::StepUnderflow { .. } => "step_underflow",
                    };
                    cell(outcome, event.first_zero(), mono)
                }
                Err(_) => cell("error", None, None),
            }
        })
        .collect();
    let opt = |b: Option<bool>| b.map_or(String::new(), |b| if b { "yes" } else { "no" }.to_string());
    w.csv(
        "sweep.csv",
        &["alpha", "q", "a", "outcome", "rho", "pohozaev_monotone", "hp4"],
        rows.iter().map(|r| {
            vec![
                fmt(r.alpha),
                fmt(r.q),
                fmt(r.a),
                r.outcome.to_string(),
                r.rho.map_or(String::new(), fmt),
                opt(r.pohozaev_monotone),
                opt(r.hp4),
            ]
        }),
    )?;
    let count = |o: &str| rows.iter().filter(|r| r.outcome == o).count();
    Ok(json!({
        "cells": rows.len(),
        "zero_found": count("zero_found"),
        "global_positive": count("global_positive"),
        "blow_up": count("blow_up"),
        "errors": count("error") + count("step_underflow"),
        "pohozaev_monotone": rows.iter().filter(|r| r.pohozaev_monotone == Some(true)).count(),
        "hp4_holds": rows.iter().filter(|r| r.hp4 == Some(true)).count(),
    }))
}

fn run_cell(psi: &lane_emden::ModelFunction, n: u32, q: f64, a: f64, o: &ShootOptions) -> Result<(Event, Option<bool>)> {
    let t = shooting::integrate(&CauchyProblem::new(psi.clone(), n, q, a)?, o)?;
    let mono = pohozaev(&t).ok().map(|tr| tr.is_nondecreasing());
    Ok((t.event, mono))
}
