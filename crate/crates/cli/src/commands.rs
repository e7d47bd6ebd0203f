//! One function per subcommand. Each writes its artifacts through the
//! manifest and returns whether the run succeeded.

use anyhow::{bail, Context, Result};
use contact_kam::action::implicit_action;
use contact_kam::flow::{energy_deviation, integrate_orbit, omega_limit, State};
use contact_kam::grid::GridFunction;
use contact_kam::minimizer::{
    backtrack_minimizer, initial_momentum, land_precise, manifold_crossings, polish_p0,
    saddle_stable_manifold,
};
use contact_kam::real::Real;
use contact_kam::semigroup::{evolve_observed, Direction};
use contact_kam::verify::{all_passed, Verifier};
use contact_kam::weakkam::{
    conjugate_forward_limit, default_mane_epsilon, graph_lambda, mane_set, solve_stationary,
    verify_stationary, write_samples, WeakKamError,
};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::svg;

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub manifest: &'a mut Manifest,
}

pub fn check(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let report = model.check_conditions((c.check.u_min, c.check.u_max), c.check.n_scan);
    ctx.manifest.write_json("condition.json", &report)?;
    ctx.manifest.set_flat("condition", &json!({
        "h1_ok": report.h1_ok,
        "h3_ok": report.h3_ok,
        "a1_ok": report.a1_ok,
        "a2_ok": report.a2_ok,
        "b_ok": report.b_ok,
        "kappa0": report.kappa0,
    }))?;
    Ok(true)
}

pub fn solve(ctx: Ctx, expect_diverge: bool) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let grid = c.build_grid(&model)?;
    let settings = c.build_settings(&model)?;
    let phi0 = c.initial_data(grid)?;
    let t = &c.tolerances;
    let m = ctx.manifest;
    match solve_stationary(&model, &phi0, t.tol, t.t_max, &settings) {
        Ok((u_minus, trace)) => {
            m.write_with("trace.csv", |w| trace.write_csv(w))?;
            m.write_with("u_minus.csv", |w| u_minus.write_csv(w))?;
            let (u_plus, _) = conjugate_forward_limit(&model, &u_minus, t.tol, t.t_max, &settings)?;
            m.write_with("u_plus.csv", |w| u_plus.write_csv(w))?;
            let residual = verify_stationary(&model, &u_minus);
            m.set("diverged", false);
            m.set("converged", trace.converged);
            m.set("m_obs", trace.m_obs);
            m.set("residual", residual.residual);
            m.set("subsolution_excess", residual.subsolution_excess);
            m.set("u_minus_max", u_minus.max());
            m.set("u_minus_min", u_minus.min());
            if expect_diverge {
                log::error!("expected divergence, but the evolution converged");
            }
            Ok(!expect_diverge)
        }
        Err(WeakKamError::Diverged(trace)) => {
            m.write_with("trace.csv", |w| trace.write_csv(w))?;
            m.set("diverged", true);
            m.set("converged", false);
            if !expect_diverge {
                log::error!("the evolution diverged");
            }
            Ok(expect_diverge)
        }
        Err(WeakKamError::NotConverged(trace)) => {
            m.write_with("trace.csv", |w| trace.write_csv(w))?;
            m.set("diverged", false);
            m.set("converged", false);
            log::error!("no convergence by t_max = {}", t.t_max);
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn evolve(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let grid = c.build_grid(&model)?;
    let settings = c.build_settings(&model)?;
    let phi = c.initial_data(grid)?;
    let e = &c.evolve;
    let every = if e.snapshot_every > 0.0 {
        ((e.snapshot_every / settings.delta).round() as usize).max(1)
    } else {
        0
    };
    let mut snapshots: Vec<(f64, GridFunction)> = Vec::new();
    let last = evolve_observed(&model, &phi, e.t, &settings, e.direction, every, |t, w| {
        snapshots.push((t, w.clone()));
    })?;
    let m = ctx.manifest;
    if every > 0 {
        let mut buf = Vec::new();
        {
            use std::io::Write;
            writeln!(buf, "t,k,value")?;
            for (t, w) in &snapshots {
                for (k, v) in w.values.iter().enumerate() {
                    writeln!(buf, "{t},{k},{v}")?;
                }
            }
        }
        m.write("snapshots.csv", &buf)?;
        m.set("snapshots", snapshots.len());
    }
    m.write_with("final.csv", |w| last.write_csv(w))?;
    m.set("final_max", last.max());
    m.set("final_min", last.min());
    Ok(true)
}

pub fn orbit(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let o = &c.orbit;
    let orbit = integrate_orbit(&model, State::new(o.x, o.p, o.u), o.t_end, o.dt)?;
    let m = ctx.manifest;
    m.write_with("orbit.csv", |w| orbit.write_csv(&model, w))?;
    m.set("blown_up", orbit.blown_up);
    m.set("steps", orbit.states.len() - 1);
    m.set("energy_deviation", energy_deviation(&model, &orbit));
    let omega = omega_limit(&orbit, o.window_fraction, c.tolerances.cluster_eps)?;
    m.write_with("omega.csv", |w| write_samples(model.dim, &omega.points, w))?;
    m.set("omega_points", omega.points.len());
    Ok(true)
}

pub fn mane(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let grid = c.build_grid(&model)?;
    let settings = c.build_settings(&model)?;
    let phi0 = c.initial_data(grid)?;
    let t = &c.tolerances;
    let (u_minus, trace) = solve_stationary(&model, &phi0, t.tol, t.t_max, &settings)?;
    let (u_plus, _) = conjugate_forward_limit(&model, &u_minus, t.tol, t.t_max, &settings)?;
    let eps = t
        .epsilon_mane
        .unwrap_or_else(|| default_mane_epsilon(grid.spacing, t.tol));
    let mane = mane_set(&u_minus, &u_plus, eps)?;
    let lambda = graph_lambda(&u_minus);
    let m = ctx.manifest;
    m.write_with("u_minus.csv", |w| u_minus.write_csv(w))?;
    m.write_with("u_plus.csv", |w| u_plus.write_csv(w))?;
    m.write_with("mane.csv", |w| mane.write_csv(w))?;
    m.write_with("clusters.csv", |w| write_samples(model.dim, &mane.clusters, w))?;
    m.write_with("lambda.csv", |w| write_samples(model.dim, &lambda.points, w))?;
    m.set("epsilon_mane", eps);
    m.set("mane_points", mane.points.len());
    m.set("clusters", mane.clusters.len());
    m.set("lambda_points", lambda.points.len());
    m.set("lambda_kinks", lambda.nonsmooth.len());
    m.set("m_obs", trace.m_obs);
    Ok(true)
}

pub fn action(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let grid = c.build_grid(&model)?;
    let settings = c.build_settings(&model)?;
    let a = &c.action;
    let table = implicit_action(&model, grid, a.x0, a.u0, a.t_end, &settings, Direction::Backward)?;
    let m = ctx.manifest;
    m.write_with("action.csv", |w| table.write_csv(a.csv_every.max(1), w))?;
    m.write_with("argmin.bin", |w| table.write_argmin(w))?;
    m.set("layers", table.layers.len());
    m.set("nodes", grid.len());
    Ok(true)
}

pub fn minimize(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let grid = c.build_grid(&model)?;
    let settings = c.build_settings(&model)?;
    let mc = &c.minimize;
    let (p0, diag) = initial_momentum(&model, grid, mc.x0, mc.u0, &mc.horizons, &settings, mc.cauchy_tol)?;
    let t_last = *mc.horizons.last().context("no horizons")?;
    let table = implicit_action(&model, grid, mc.x0, mc.u0, t_last, &settings, Direction::Backward)?;
    let last = table.layers.last().context("empty action table")?;
    let k_min = (0..grid.len())
        .min_by(|&a, &b| last.values[a].total_cmp(&last.values[b]))
        .context("empty grid")?;
    let curve = backtrack_minimizer(&model, &table, &settings, &grid.node(k_min), table.t_end())?;
    let o = &c.orbit;
    let orbit = integrate_orbit(&model, State::new(mc.x0, p0, mc.u0), o.t_end, o.dt)?;
    let m = ctx.manifest;
    m.write_json("p0.json", &json!({ "p0": p0, "diagnostics": diag }))?;
    m.write_with("curve.csv", |w| curve.write_csv(w))?;
    m.write_with("orbit.csv", |w| orbit.write_csv(&model, w))?;
    m.set_flat("p0", &p0)?;
    m.set("cauchy_converged", diag.converged);
    m.set("blown_up", orbit.blown_up);
    if let Ok(omega) = omega_limit(&orbit, o.window_fraction, c.tolerances.cluster_eps) {
        m.write_with("omega.csv", |w| write_samples(model.dim, &omega.points, w))?;
        m.set("omega_points", omega.points.len());
    }
    Ok(true)
}

pub fn manifold(ctx: Ctx) -> Result<bool> {
    let c = ctx.config;
    let model = c.build_model()?;
    let mf = &c.manifold;
    let (plus, minus) = saddle_stable_manifold(&model, mf.eps_seed, mf.t_back)?;
    let crossings = manifold_crossings(&[&plus, &minus], mf.x0)?;
    let m = ctx.manifest;
    let mut csv = Vec::new();
    plus.write_csv(&mut csv)?;
    let mut rest = Vec::new();
    minus.write_csv(&mut rest)?;
    // Second header dropped so the file is one table.
    csv.extend(rest.splitn(2, |&b| b == b'\n').nth(1).unwrap_or(&[]));
    m.write("branches.csv", &csv)?;
    let pairs: Vec<(f64, f64)> = crossings.iter().map(|z| (z[0], z[1])).collect();
    m.write("figure1.svg", svg::figure(&[&plus, &minus], mf.x0, &pairs).as_bytes())?;
    let mut shots = Vec::new();
    for z in &crossings {
        let mut entry = json!({ "x_cover": z[0], "p0": z[1] });
        if mf.polish {
            let p = polish_p0(&model, mf.x0, z[1], 0.0)?;
            let land = land_precise(&model, mf.x0, p, 0.0, mf.t_land)?;
            let k = (land.x[0] / std::f64::consts::TAU).round();
            let dist = (land.x[0] - k * std::f64::consts::TAU).hypot(land.p[0]);
            entry["p0_polished"] = json!(p.to_f64());
            entry["p0_polished_lo"] = json!(p.lo);
            entry["landing_distance"] = json!(dist);
        }
        shots.push(entry);
    }
    m.write_json("p0.json", &json!({ "x0": mf.x0, "crossings": shots }))?;
    m.set("crossings", crossings.len());
    m.set("branch_points.plus", plus.points.len());
    m.set("branch_points.minus", minus.points.len());
    Ok(true)
}

pub fn verify(ctx: Ctx, criteria: &[u32]) -> Result<bool> {
    let c = ctx.config;
    let ids: Vec<u32> = if criteria.is_empty() { (1..=12).collect() } else { criteria.to_vec() };
    if let Some(bad) = ids.iter().find(|id| !(1..=12).contains(*id)) {
        bail!("unknown criterion {bad}; valid ids are 1 to 12");
    }
    let verifier = Verifier::new(c.verify.clone());
    let mut results = Vec::new();
    for id in ids {
        let r = verifier.run(id);
        println!("{}", r.line());
        results.push(r);
    }
    let passed = all_passed(&results);
    let m = ctx.manifest;
    m.write_json("report.json", &json!({ "passed": passed, "criteria": results }))?;
    for r in &results {
        m.set(&format!("criterion.{:02}", r.id), r.passed);
    }
    m.set("passed", passed);
    Ok(passed)
}
