//! Run orchestration for the command line: each subcommand maps to one
//! function that computes, writes artifacts under the output directory,
//! prints one summary line per unit of work, and returns overall pass/fail.
//! Artifacts are written as soon as they exist, so a failing step leaves the
//! earlier results on disk.

use crate::capacity::{ball_capacity_exact, capacity, closed_ball_set};
use crate::config::RunConfig;
use crate::domain::DomainSpec;
use crate::envelope::{envelope_berman, envelope_obstacle, tolerances, BermanTrace, EnvelopeResult};
use crate::error::{Error, Result};
use crate::experiments::convergence_study;
use crate::grid::GridFunction;
use crate::io::{
    write_csv, write_failure_record, write_grid_function, write_toml, FailureItem, FailureRecord,
};
use crate::verify::{self, Verdict};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Serialize)]
struct EnvelopeRunReport<'a> {
    pass: bool,
    method: &'a str,
    h: f64,
    seconds: f64,
    iterations: u64,
    converged: bool,
    residual_sup: f64,
    max_over_obstacle: f64,
    psh_ok: bool,
    density_ok: bool,
    contact_nodes: usize,
    active_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_bound: Option<f64>,
    config: RunConfig,
    constraint: &'a crate::envelope::ConstraintReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a BermanTrace>,
}

fn count(set: &crate::grid::GridSet) -> usize {
    set.mask.iter().filter(|&&m| m).count()
}

fn sup_error_vs_exact(cfg: &RunConfig, p: &GridFunction) -> Result<Option<(f64, f64)>> {
    let Some(exact) = cfg.exact_expr()? else {
        return Ok(None);
    };
    let reference = GridFunction::sample(&p.grid, &exact)?;
    let mut sup = 0.0f64;
    for &id in &p.grid.interior {
        sup = sup.max((p.vals[id as usize] - reference.vals[id as usize]).abs());
    }
    let bound = cfg.bound_factor_or_default() * p.grid.h;
    Ok(Some((sup, bound)))
}

/// `envelope` and `berman` subcommands (per config.method).
pub fn run_envelope(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let t0 = Instant::now();
    let grid = cfg.grid()?;
    let u = cfg.obstacle.grid_function(&grid)?;
    let f = cfg.f.density(&grid, cfg.p)?;
    let params = cfg.solve_params();

    let (result, trace): (EnvelopeResult, Option<BermanTrace>) = match cfg.method.as_str() {
        "berman" => {
            let pen = cfg.g.density(&grid, cfg.p)?;
            let opts = cfg.berman_options();
            let (r, t) = envelope_berman(&u, &f, &pen, &opts, &params)?;
            (r, Some(t))
        }
        _ => (envelope_obstacle(&u, &f, &params)?, None),
    };

    write_grid_function(&out.join("p.pshg"), &result.p)?;

    let (contact_tol, _) = tolerances(grid.h, params.tol);
    let exactness = sup_error_vs_exact(cfg, &result.p)?;
    let within_bound = exactness.map(|(s, b)| s <= b).unwrap_or(true);
    let pass = result.report.converged
        && result.constraint.psh_ok
        && result.constraint.density_ok
        && result.constraint.max_over_obstacle <= contact_tol
        && within_bound;

    let report = EnvelopeRunReport {
        pass,
        method: &cfg.method,
        h: grid.h,
        seconds: t0.elapsed().as_secs_f64(),
        iterations: result.report.iterations,
        converged: result.report.converged,
        residual_sup: result.report.residual_sup,
        max_over_obstacle: result.constraint.max_over_obstacle,
        psh_ok: result.constraint.psh_ok,
        density_ok: result.constraint.density_ok,
        contact_nodes: count(&result.contact),
        active_nodes: count(&result.active),
        sup_error: exactness.map(|(s, _)| s),
        error_bound: exactness.map(|(_, b)| b),
        config: cfg.effective(),
        constraint: &result.constraint,
        trace: trace.as_ref(),
    };
    write_toml(&out.join("report.toml"), &report)?;

    if let Some(t) = &trace {
        let rows: Vec<Vec<String>> = t
            .stages
            .iter()
            .map(|s| {
                vec![
                    format!("{}", s.j),
                    format!("{}", s.iterations),
                    format!("{:e}", s.residual_sup),
                    format!("{:e}", s.sup_over_obstacle),
                    format!("{:e}", s.min_rise),
                    format!("{:e}", s.sup_move),
                ]
            })
            .collect();
        write_csv(
            &out.join("stages.csv"),
            &["j", "iterations", "residual_sup", "sup_over_obstacle", "min_rise", "sup_move"],
            &rows,
        )?;
    }

    match exactness {
        Some((sup, bound)) => println!(
            "{}: {} iterations, sup error vs exact {:.4e} (bound {:.4e}) -> {}",
            cfg.method,
            result.report.iterations,
            sup,
            bound,
            status(pass)
        ),
        None => println!(
            "{}: {} iterations, residual {:.2e}, {} contact nodes -> {}",
            cfg.method,
            result.report.iterations,
            result.report.residual_sup,
            count(&result.contact),
            status(pass)
        ),
    }
    if !pass {
        write_failure_record(
            &out.join("failures.toml"),
            &FailureRecord {
                command: cfg.method.clone(),
                message: "envelope run failed its checks".into(),
                failures: vec![FailureItem {
                    name: "envelope".into(),
                    detail: format!(
                        "converged {}, max over obstacle {:.2e}, psh_ok {}, density_ok {}, sup_error {:?}",
                        result.report.converged,
                        result.constraint.max_over_obstacle,
                        result.constraint.psh_ok,
                        result.constraint.density_ok,
                        exactness.map(|(s, _)| s)
                    ),
                }],
            },
        )?;
    }
    Ok(pass)
}

#[derive(Debug, Serialize)]
struct CapacityRunReport {
    pass: bool,
    value: f64,
    seconds: f64,
    set_center: Vec<f64>,
    set_radius: f64,
    extremal_iterations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_error: Option<f64>,
    config: RunConfig,
}

/// `capacity` subcommand: relative extremal of the configured set plus its
/// total Monge–Ampère mass.
pub fn run_capacity(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let t0 = Instant::now();
    let set = cfg
        .set
        .as_ref()
        .ok_or_else(|| Error::Validation("capacity run needs a [set] table".into()))?;
    let grid = cfg.grid()?;
    let e = closed_ball_set(&grid, &set.center, set.radius);
    let params = cfg.solve_params();
    let cap = capacity(&e, &params)?;

    write_grid_function(&out.join("extremal.pshg"), &cap.extremal.p)?;

    // closed form available on concentric balls
    let exact = match cfg.spec()? {
        DomainSpec::Ball { n, center, radius }
            if center == set.center && set.radius < radius =>
        {
            let scaled = set.radius / radius;
            Some(ball_capacity_exact(n, scaled))
        }
        _ => None,
    };
    let rel = exact.map(|x| (cap.value - x).abs() / x);
    let pass = cap.extremal.report.converged && cap.value.is_finite() && cap.value >= 0.0;

    let report = CapacityRunReport {
        pass,
        value: cap.value,
        seconds: t0.elapsed().as_secs_f64(),
        set_center: set.center.clone(),
        set_radius: set.radius,
        extremal_iterations: cap.extremal.report.iterations,
        exact,
        rel_error: rel,
        config: cfg.effective(),
    };
    write_toml(&out.join("report.toml"), &report)?;

    match (exact, rel) {
        (Some(x), Some(r)) => println!(
            "capacity {:.6} (closed form {:.6}, rel error {:.3}) -> {}",
            cap.value,
            x,
            r,
            status(pass)
        ),
        _ => println!("capacity {:.6} -> {}", cap.value, status(pass)),
    }
    Ok(pass)
}

#[derive(Debug, Serialize)]
struct ConvergenceRunReport {
    pass: bool,
    nonincreasing: bool,
    seconds: f64,
    cases: Vec<crate::experiments::ConvergenceCase>,
    config: RunConfig,
}

/// `convergence` subcommand: envelope error against the configured closed
/// form over a refinement list.
pub fn run_convergence(cfg: &RunConfig, hs: &[f64], out: &Path) -> Result<bool> {
    let exact = cfg.exact_expr()?.ok_or_else(|| {
        Error::Validation("convergence run needs `exact` (closed-form expression)".into())
    })?;
    let spec = cfg.spec()?;
    let obstacle = cfg.obstacle.as_expr()?;
    let f = cfg.f.as_expr()?;
    let r = convergence_study(
        &spec,
        &obstacle,
        &f,
        &exact,
        hs,
        cfg.bound_factor_or_default(),
        &cfg.solve_params(),
    )?;

    let rows: Vec<Vec<String>> = r
        .cases
        .iter()
        .map(|c| {
            vec![
                format!("{}", c.h),
                format!("{}", c.interior_nodes),
                format!("{:e}", c.sup_error),
                format!("{:e}", c.bound),
            ]
        })
        .collect();
    write_csv(
        &out.join("convergence.csv"),
        &["h", "interior_nodes", "sup_error", "bound"],
        &rows,
    )?;
    for c in &r.cases {
        println!(
            "h = {:<10} sup error {:.4e} (bound {:.4e}) {}",
            c.h,
            c.sup_error,
            c.bound,
            status(c.sup_error <= c.bound)
        );
    }
    let report = ConvergenceRunReport {
        pass: r.pass,
        nonincreasing: r.nonincreasing,
        seconds: r.seconds,
        cases: r.cases,
        config: cfg.effective(),
    };
    write_toml(&out.join("report.toml"), &report)?;
    println!(
        "convergence: nonincreasing {} -> {}",
        report.nonincreasing,
        status(report.pass)
    );
    Ok(report.pass)
}

#[derive(Debug, Serialize)]
struct VerifyRunReport<'a> {
    pass: bool,
    verdicts: &'a [Verdict],
}

/// `verify` subcommand: the built-in criteria, written incrementally so an
/// interrupted run keeps the verdicts already reached.
pub fn run_verify(ids: &[usize], out: &Path) -> Result<bool> {
    let mut verdicts: Vec<Verdict> = Vec::new();
    for &id in ids {
        let v = verify::run_criterion(id);
        println!(
            "criterion {:2} {:<32} {} ({:.2}s) — {}",
            v.id,
            v.name,
            status(v.pass),
            v.seconds,
            v.detail
        );
        verdicts.push(v);
        persist_verdicts(&verdicts, out)?;
    }
    let pass = verdicts.iter().all(|v| v.pass);
    if !pass {
        let failures: Vec<FailureItem> = verdicts
            .iter()
            .filter(|v| !v.pass)
            .map(|v| FailureItem {
                name: format!("criterion {} {}", v.id, v.name),
                detail: v.detail.clone(),
            })
            .collect();
        write_failure_record(
            &out.join("failures.toml"),
            &FailureRecord {
                command: "verify".into(),
                message: format!(
                    "{} of {} criteria failed",
                    failures.len(),
                    verdicts.len()
                ),
                failures,
            },
        )?;
    }
    println!(
        "verify: {}/{} criteria pass -> {}",
        verdicts.iter().filter(|v| v.pass).count(),
        verdicts.len(),
        status(pass)
    );
    Ok(pass)
}

fn persist_verdicts(verdicts: &[Verdict], out: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = verdicts
        .iter()
        .map(|v| {
            vec![
                format!("{}", v.id),
                v.name.to_string(),
                format!("{}", v.pass),
                format!("{:.3}", v.seconds),
                v.detail.clone(),
            ]
        })
        .collect();
    write_csv(
        &out.join("verdicts.csv"),
        &["id", "name", "pass", "seconds", "detail"],
        &rows,
    )?;
    write_toml(
        &out.join("verdicts.toml"),
        &VerifyRunReport { pass: verdicts.iter().all(|v| v.pass), verdicts },
    )
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
