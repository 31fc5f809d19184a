use crate::config::Params;
use crate::error::CliError;
use crate::output::{jnum, num, Outputs};
use crate::rules::{parse_density, parse_entropy, parse_omega2, DensitySource};
use rotstar::eos::{w_to_rho, EosParams, Regime};
use rotstar::field::{read_axifield, GridSpec, Parity, ScalarField};
use rotstar::gravity::{poisson_residual, potential_axisym, uniform_ball, uniform_ball_potential};
use rotstar::inverse::{boundary_pressure, curl_defect, momentum_residual, reconstruct, CheckMode, DensitySpec, H3Status};
use rotstar::monotone::{solve_fitted, MonotoneConfig};
use rotstar::radial::lane_emden_with_step;
use rotstar::variational::{domain_continuation, VariationalConfig, VariationalProblem, VariationalReport};
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::time::Instant;

pub const MONOTONE_KEYS: &[&str] = &[
    "out", "seed", "gamma", "entropy", "omega2", "nr", "tol", "max-iters", "shift", "radius", "slack",
];
pub const VARIATIONAL_KEYS: &[&str] = &[
    "out", "seed", "gamma", "entropy", "omega2", "nr", "radius", "p", "max-iters", "grad-tol", "step0",
];
pub const CONTINUATION_KEYS: &[&str] = &[
    "out", "seed", "gamma", "entropy", "omega2", "nr", "radius", "p", "max-iters", "grad-tol", "step0", "stages",
];
pub const INVERSE_KEYS: &[&str] = &["out", "seed", "density", "mode", "nr", "extent", "gamma", "entropy"];
pub const GRAVITY_KEYS: &[&str] = &["out", "seed", "nr", "extent", "radius"];
pub const LANE_EMDEN_KEYS: &[&str] = &["out", "seed", "n", "step"];

/// Output directory and seed; every command reads both so they land in the
/// resolved config.
fn common(p: &Params) -> Result<(PathBuf, u64), CliError> {
    Ok((PathBuf::from(p.string("out", "out")?), p.u64("seed", "0")?))
}

fn eos_in_regime(p: &Params, default: &str, regime: Regime, command: &str) -> Result<EosParams, CliError> {
    let gamma = p.f64("gamma", default)?;
    let eos = EosParams::new(gamma).map_err(|e| CliError::Config(e.to_string()))?;
    if eos.regime() != regime {
        let need = match regime {
            Regime::Monotone => "gamma > 2",
            _ => "4/3 < gamma < 2",
        };
        return Err(CliError::Config(format!("{command} requires {need}, got gamma = {gamma}")));
    }
    Ok(eos)
}

fn summary(command: &str, seed: u64, p: &Params, extra: Value) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), json!("summary"));
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(seed));
    m.insert("config".into(), json!(p.resolved()));
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

fn grid_json(g: &GridSpec) -> Value {
    json!({ "nr": g.nr(), "nz": g.nz(), "rmax": g.rmax(), "zmax": g.zmax(), "hr": g.hr(), "hz": g.hz() })
}

pub fn mask_field(grid: GridSpec, mask: &[bool]) -> Result<ScalarField, CliError> {
    Ok(ScalarField::from_values(
        grid,
        mask.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        Parity::Even,
    )?)
}

pub fn solve_monotone(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let eos = eos_in_regime(p, "3", Regime::Monotone, "solve-monotone")?;
    let entropy = p.parse("entropy", "constant:0", parse_entropy)?;
    let omega2 = p.parse("omega2", "rigid-squared:0.05", parse_omega2)?;
    let nr = p.usize("nr", "129")?;
    let cfg = MonotoneConfig {
        ball_radius_hint: p.auto_f64("radius")?,
        a1: None,
        a2: None,
        slack: p.f64("slack", "0.05")?,
        shift: p.f64("shift", "0")?,
        max_iters: p.usize("max-iters", "2000")?,
        tol: p.f64("tol", "1e-8")?,
    };
    let mut out = Outputs::create(&dir)?;
    let started = Instant::now();
    let o = solve_fitted(&eos, &entropy, &omega2, nr, &cfg)?;
    let rep = &o.report;
    for (k, (res, step)) in rep.residual_history.iter().zip(&rep.step_history).enumerate() {
        out.record(&json!({ "type": "iteration", "iter": k + 1, "residual": jnum(*res), "step": jnum(*step) }))?;
    }
    let w = &rep.solution;
    let rho = w_to_rho(w, &eos.physical_entropy(&o.entropy)?, &eos)?;
    out.field("w", w)?;
    out.field("rho", &rho)?;
    out.field("entropy", &o.entropy)?;
    out.field("forcing", &o.forcing)?;
    out.field("active", &mask_field(o.grid, &o.sub.active)?)?;
    out.field("subsolution", &o.sub.field)?;
    out.field("supersolution", &o.sup.field)?;
    out.profiles(&[("w", w), ("rho", &rho), ("entropy", &o.entropy), ("forcing", &o.forcing)])?;
    let data = json!({
        "gamma": eos.gamma,
        "q": eos.q,
        "tol": cfg.tol,
        "iterations": rep.iterations,
        "final_residual": rep.final_residual,
        "bracket_gap": rep.bracket_gap,
        "positive": rep.positive,
        "raw_z_asymmetry": rep.raw_z_asymmetry,
        "ball_radius": o.sub.radius,
        "a1": o.sub.a1,
        "a2": o.sub.a2,
        "u0": o.sub.profile.u0,
        "subsolution_min_residual": o.sub.min_residual,
        "supersolution_max_residual": o.sup.max_residual,
        "supersolution_picard_sweeps": o.sup.picard_sweeps,
        "grid": grid_json(&o.grid),
    });
    let mut s = summary("solve-monotone", seed, p, data.clone());
    s["elapsed_s"] = json!(started.elapsed().as_secs_f64());
    out.record(&s)?;
    out.finish("solve-monotone", seed, json!(p.resolved()), data)?;
    eprintln!(
        "solve-monotone: R = {:.6}, {} sweeps, residual {:.3e}, output in {}",
        o.sub.radius,
        rep.iterations,
        rep.final_residual,
        dir.display()
    );
    Ok(())
}

struct VariationalSetup {
    eos: EosParams,
    cfg: VariationalConfig,
    entropy: rotstar::eos::EntropyRule,
    omega2: rotstar::eos::Omega2Rule,
}

fn variational_setup(p: &Params, command: &str, nr_default: &str) -> Result<VariationalSetup, CliError> {
    let eos = eos_in_regime(p, "1.5", Regime::Variational, command)?;
    let entropy = p.parse("entropy", "constant:0", parse_entropy)?;
    let omega2 = p.parse("omega2", "rigid-squared:1", parse_omega2)?;
    let d = VariationalConfig::default();
    let cfg = VariationalConfig {
        ball_radius: p.parse("radius", "4", |s| {
            let v = crate::config::parse_f64(s)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err("radius must be positive".into())
            }
        })?,
        target_p: p.auto_f64("p")?,
        nr: p.usize("nr", nr_default)?,
        step0: p.f64("step0", &d.step0.to_string())?,
        max_iters: p.usize("max-iters", &d.max_iters.to_string())?,
        grad_tol: p.f64("grad-tol", &d.grad_tol.to_string())?,
        constraint_tol: d.constraint_tol,
    };
    Ok(VariationalSetup {
        eos,
        cfg,
        entropy,
        omega2,
    })
}

fn variational_json(r: &VariationalReport, radius: f64) -> Value {
    json!({
        "radius": radius,
        "iterations": r.iterations,
        "converged": r.converged,
        "target_p": r.target_p,
        "final_energy": jnum(r.final_energy),
        "kinetic": jnum(r.kinetic),
        "potential": jnum(r.potential),
        "lambda": jnum(r.lambda),
        "el_residual": jnum(r.el_residual),
        "kkt_residual": jnum(r.kkt_residual),
        "max_constraint_defect": jnum(r.max_constraint_defect),
        "constraint_value": r.constraint_value,
        "positive_set_fraction": r.positive_set_fraction,
        "positive_nodes": r.positive_nodes,
        "grid": grid_json(r.solution.grid()),
    })
}

fn write_variational(
    out: &mut Outputs,
    prefix: &str,
    prob: &VariationalProblem,
    report: &VariationalReport,
) -> Result<ScalarField, CliError> {
    let w = &report.solution;
    let rho = w_to_rho(w, &prob.eos.physical_entropy(&prob.s)?, &prob.eos)?;
    out.field(&format!("{prefix}w"), w)?;
    out.field(&format!("{prefix}rho"), &rho)?;
    out.field(&format!("{prefix}entropy"), &prob.s)?;
    out.field(&format!("{prefix}forcing"), &prob.f)?;
    out.field(&format!("{prefix}active"), &mask_field(*prob.grid(), prob.active())?)?;
    Ok(rho)
}

pub fn solve_variational(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let v = variational_setup(p, "solve-variational", "129")?;
    let mut out = Outputs::create(&dir)?;
    let started = Instant::now();
    let prob = VariationalProblem::fitted(v.eos, &v.entropy, &v.omega2, v.cfg.ball_radius, v.cfg.nr)?;
    let target = prob.resolve_p(&v.cfg)?;
    let report = prob.minimize(&v.cfg, target, None)?;
    for (k, e) in report.energy_history.iter().enumerate() {
        out.record(&json!({ "type": "iteration", "iter": k, "energy": jnum(*e) }))?;
    }
    let rho = write_variational(&mut out, "", &prob, &report)?;
    out.profiles(&[("w", &report.solution), ("rho", &rho), ("entropy", &prob.s), ("forcing", &prob.f)])?;
    let mut data = variational_json(&report, v.cfg.ball_radius);
    data["gamma"] = json!(v.eos.gamma);
    data["q"] = json!(v.eos.q);
    let mut s = summary("solve-variational", seed, p, data.clone());
    s["elapsed_s"] = json!(started.elapsed().as_secs_f64());
    out.record(&s)?;
    out.finish("solve-variational", seed, json!(p.resolved()), data)?;
    eprintln!(
        "solve-variational: P = {:.6e}, E = {:.6e}, lambda = {:.6e}, {} iterations, output in {}",
        target,
        report.final_energy,
        report.lambda,
        report.iterations,
        dir.display()
    );
    if !report.converged {
        return Err(CliError::Convergence(format!(
            "descent stopped after {} iterations with stationarity defect {:e}",
            report.iterations, report.kkt_residual
        )));
    }
    Ok(())
}

pub fn continuation(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let v = variational_setup(p, "continuation", "33")?;
    let stages = p.usize("stages", "3")?;
    if stages == 0 {
        return Err(CliError::Config("stages must be at least 1".into()));
    }
    let mut out = Outputs::create(&dir)?;
    let started = Instant::now();
    let result = domain_continuation(v.eos, &v.entropy, &v.omega2, &v.cfg, stages)?;
    let mut stage_data = Vec::new();
    for (k, st) in result.iter().enumerate() {
        let nr = st.report.solution.grid().nr();
        let prob = VariationalProblem::fitted(v.eos, &v.entropy, &v.omega2, st.radius, nr)?;
        write_variational(&mut out, &format!("stage{k}_"), &prob, &st.report)?;
        let mut d = variational_json(&st.report, st.radius);
        d["stage"] = json!(k);
        d["tail_fraction"] = jnum(st.tail_fraction);
        d["inner_difference"] = st.inner_difference.map(jnum).unwrap_or(Value::Null);
        let mut rec = d.clone();
        rec["type"] = json!("stage");
        out.record(&rec)?;
        stage_data.push(d);
    }
    let last = &result[result.len() - 1];
    let drift = (result.len() >= 2).then(|| {
        let prev = &result[result.len() - 2].report.final_energy;
        (last.report.final_energy - prev).abs() / prev.abs()
    });
    let data = json!({
        "gamma": v.eos.gamma,
        "q": v.eos.q,
        "stages": stage_data,
        "final_tail_fraction": jnum(last.tail_fraction),
        "final_energy_drift": drift.map(jnum).unwrap_or(Value::Null),
    });
    out.profiles(&[("w", &last.report.solution)])?;
    let mut s = summary("continuation", seed, p, data.clone());
    s["elapsed_s"] = json!(started.elapsed().as_secs_f64());
    out.record(&s)?;
    out.finish("continuation", seed, json!(p.resolved()), data)?;
    eprintln!(
        "continuation: {} stages, tail {:.3e}, output in {}",
        stages,
        last.tail_fraction,
        dir.display()
    );
    if let Some(st) = result.iter().find(|s| !s.report.converged) {
        return Err(CliError::Convergence(format!("stage at radius {} did not converge", st.radius)));
    }
    Ok(())
}

pub fn inverse(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let source = p.require("density", parse_density)?;
    let mode = p.parse("mode", "smooth", |s| match s {
        "smooth" => Ok(CheckMode::Smooth),
        "holder" => Ok(CheckMode::Holder),
        _ => Err("expected smooth or holder".into()),
    })?;
    let read = |path: &str| {
        read_axifield(std::path::Path::new(path)).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))
    };
    let (spec, grid) = match &source {
        DensitySource::Ellipsoid { a, b, power } => {
            let nr = p.usize("nr", "129")?;
            let extent = p.f64("extent", "1.5")?;
            (DensitySpec::ellipsoid(*a, *b, *power)?, GridSpec::square(nr, extent)?)
        }
        DensitySource::File(path) => {
            let rho = read(path)?;
            let g = *rho.grid();
            (DensitySpec::Gridded { rho }, g)
        }
        DensitySource::Solution(path) => {
            let w = read(path)?;
            let g = *w.grid();
            let gamma = p.require("gamma", crate::config::parse_f64)?;
            let eos = EosParams::new(gamma).map_err(|e| CliError::Config(e.to_string()))?;
            let s = p.parse("entropy", "constant:0", parse_entropy)?.sample(&g)?;
            (DensitySpec::from_solution(&w, &eos, &s)?, g)
        }
    };
    let mut out = Outputs::create(&dir)?;
    let started = Instant::now();
    let res = reconstruct(&spec, &grid, mode)?;
    let (er, ez) = momentum_residual(&res.rho, &res.pressure, &res.omega2, &res.potential, &res.domain)?;
    let curl = curl_defect(&res.rho, &res.pressure, &res.omega2, &res.domain)?;
    let bp = boundary_pressure(&res.pressure, &res.domain);
    let om_mask = mask_field(grid, &res.omega2.mask)?;
    out.field("rho", &res.rho)?;
    out.field("p", &res.pressure)?;
    out.field("omega2", &res.omega2.field)?;
    out.field("omega2_mask", &om_mask)?;
    out.field("potential", &res.potential.potential)?;
    out.json("hypotheses.json", &serde_json::to_value(&res.report)?)?;
    out.profiles(&[("rho", &res.rho), ("p", &res.pressure), ("omega2", &res.omega2.field)])?;
    let violated = !res.report.holds("h2") || !res.report.holds("h4") || res.report.h3_status == H3Status::Violated;
    let data = json!({
        "momentum_residual_r": er,
        "momentum_residual_z": ez,
        "curl_defect": curl,
        "boundary_pressure": bp,
        "max_pressure": res.pressure.max(),
        "max_omega2": res.omega2.max_abs(),
        "negative_omega2_nodes": res.negative_omega2.len(),
        "h3_status": res.report.h3_status,
        "verdict": res.report.verdict,
        "warnings": res.warnings,
        "hypotheses_hold": !violated,
        "grid": grid_json(&grid),
    });
    let mut s = summary("inverse", seed, p, data.clone());
    s["elapsed_s"] = json!(started.elapsed().as_secs_f64());
    out.record(&s)?;
    out.finish("inverse", seed, json!(p.resolved()), data)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("inverse: verdict {:?}, output in {}", res.report.verdict, dir.display());
    if violated {
        return Err(CliError::Hypothesis(format!(
            "density fails hypotheses (verdict {:?}, h3 {:?})",
            res.report.verdict, res.report.h3_status
        )));
    }
    Ok(())
}

pub fn gravity_test(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let nr = p.usize("nr", "129")?;
    let extent = p.f64("extent", "2")?;
    let a = p.f64("radius", "1")?;
    let grid = GridSpec::square(nr, extent)?;
    let mut out = Outputs::create(&dir)?;
    let started = Instant::now();
    let rho = uniform_ball(&grid, a)?;
    let res = potential_axisym(&rho)?;
    let exact = ScalarField::from_fn(grid, Parity::Even, |r, z| uniform_ball_potential(a, r.hypot(z)))?;
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.nr() {
        for j in 0..grid.nz() {
            let (r, z) = (grid.r(i), grid.z(j));
            let (b, e) = (res.potential.at(i, j), exact.at(i, j));
            let rel = (b - e).abs() / e.abs();
            if r.hypot(z) <= a {
                inside = inside.max(rel);
            } else {
                outside = outside.max(rel);
            }
            rows.push(vec![num(r), num(z), num(b), num(e), num(rel)]);
        }
    }
    let poisson = poisson_residual(&res, &rho)?;
    out.field("rho", &rho)?;
    out.field("potential", &res.potential)?;
    out.csv("gravity.csv", &["r", "z", "potential", "closed_form", "rel_error"], &rows)?;
    out.profiles(&[("rho", &rho), ("potential", &res.potential), ("closed_form", &exact)])?;
    let data = json!({
        "ball_radius": a,
        "max_rel_error_inside": inside,
        "max_rel_error_outside": outside,
        "poisson_residual": poisson,
        "source_mass": res.source_mass,
        "grid": grid_json(&grid),
    });
    let mut s = summary("gravity-test", seed, p, data.clone());
    s["elapsed_s"] = json!(started.elapsed().as_secs_f64());
    out.record(&s)?;
    out.finish("gravity-test", seed, json!(p.resolved()), data)?;
    eprintln!(
        "gravity-test: rel. error inside {inside:.3e}, outside {outside:.3e}, poisson {poisson:.3e}, output in {}",
        dir.display()
    );
    Ok(())
}

pub fn lane_emden(p: &Params) -> Result<(), CliError> {
    let (dir, seed) = common(p)?;
    let n = p.require("n", crate::config::parse_f64)?;
    let step = p.f64("step", "1e-4")?;
    let mut out = Outputs::create(&dir)?;
    let sol = lane_emden_with_step(n, step)?;
    let rows: Vec<Vec<String>> = sol.xi.iter().zip(&sol.theta).map(|(x, t)| vec![num(*x), num(*t)]).collect();
    out.csv("lane_emden.csv", &["xi", "theta"], &rows)?;
    let data = json!({
        "n": n,
        "xi1": sol.xi1,
        "slope": sol.dtheta_at_xi1,
        "mass_integral": sol.mass_integral,
    });
    out.json("lane_emden.json", &data)?;
    out.record(&summary("lane-emden", seed, p, data.clone()))?;
    out.finish("lane-emden", seed, json!(p.resolved()), data)?;
    println!("xi1 = {:.15}, theta'(xi1) = {:.15}", sol.xi1, sol.dtheta_at_xi1);
    Ok(())
}
