//! Re-check stored artifacts against the identities they must satisfy.

use crate::config::Params;
use crate::error::CliError;
use crate::output::MANIFEST;
use crate::rules::parse_omega2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotstar::eos::{bernoulli_residual, pressure_from_state, w_to_rho, EosParams, RotationProfile};
use rotstar::field::{gradient_rz, integrate_axisym, read_axifield, MaskedField, ScalarField, StarDomain};
use rotstar::gravity::{poisson_residual, potential_axisym, uniform_ball_potential, PotentialResult};
use rotstar::inverse::{boundary_pressure, curl_defect, momentum_residual};
use rotstar::linalg::DirichletOperator;
use rotstar::monotone::residual_field;
use rotstar::radial::lane_emden_with_step;
use rotstar::variational::{elementary_inequality_check, VariationalProblem};
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const VERIFY_KEYS: &[&str] = &["dir", "seed", "samples"];

const CURL_TOL: f64 = 0.05;
const MOMENTUM_TOL: f64 = 0.05;
const POISSON_TOL: f64 = 0.05;
const BERNOULLI_TOL: f64 = 1e-2;
const SYMMETRY_TOL: f64 = 1e-12;

enum Outcome {
    Value { value: f64, limit: String, pass: bool },
    NotApplicable(String),
}

struct Table {
    rows: Vec<(String, Outcome)>,
}

impl Table {
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.rows.push((
            name.into(),
            Outcome::Value {
                value,
                limit: format!("<= {limit:.1e}"),
                pass: value <= limit,
            },
        ));
    }

    fn holds(&mut self, name: &str, ok: bool, value: f64, what: &str) {
        self.rows.push((
            name.into(),
            Outcome::Value {
                value,
                limit: what.into(),
                pass: ok,
            },
        ));
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.rows.push((name.into(), Outcome::NotApplicable(why.into())));
    }

    fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|(_, o)| matches!(o, Outcome::Value { pass: false, .. }))
            .count()
    }

    fn print(&self) {
        println!("{:<34} {:>13}  {:<16} result", "check", "value", "limit");
        for (name, o) in &self.rows {
            match o {
                Outcome::Value { value, limit, pass } => println!(
                    "{name:<34} {value:>13.4e}  {limit:<16} {}",
                    if *pass { "PASS" } else { "FAIL" }
                ),
                Outcome::NotApplicable(why) => println!("{name:<34} {:>13}  {:<16} n/a ({why})", "-", "-"),
            }
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    manifest: Value,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .map_err(|_| CliError::Config(format!("missing {} in {}", MANIFEST, dir.display())))?;
        let manifest: Value = serde_json::from_str(&text)?;
        let files = manifest["files"]
            .as_array()
            .ok_or_else(|| CliError::Config("manifest has no file list".into()))?;
        let missing: Vec<&str> = files
            .iter()
            .filter_map(Value::as_str)
            .filter(|f| !dir.join(f).is_file())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!("missing files in {}: {}", dir.display(), missing.join(", "))));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn field(&self, name: &str) -> Result<ScalarField, CliError> {
        let path = self.dir.join(format!("{name}.axifield"));
        read_axifield(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
    }

    fn config(&self, key: &str) -> Result<&str, CliError> {
        self.manifest["config"][key]
            .as_str()
            .ok_or_else(|| CliError::Config(format!("manifest config lacks '{key}'")))
    }

    fn data(&self) -> &Value {
        &self.manifest["data"]
    }
}

fn num(v: &Value, key: &str) -> Result<f64, CliError> {
    v[key]
        .as_f64()
        .ok_or_else(|| CliError::Config(format!("manifest data lacks numeric '{key}'")))
}

fn eos_from(v: &Value) -> Result<EosParams, CliError> {
    EosParams::new(num(v, "gamma")?).map_err(|e| CliError::Config(e.to_string()))
}

fn is_constant(f: &ScalarField) -> bool {
    f.max() == f.min()
}

fn positive_mask(f: &ScalarField) -> Vec<bool> {
    f.values().iter().map(|&v| v > 0.5).collect()
}

fn relative_difference(a: &ScalarField, b: &ScalarField) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Checks shared by both solvers: symmetry, support, the stored density and
/// the gravity and momentum identities it implies.
fn solution_checks(
    t: &mut Table,
    art: &Artifacts,
    prefix: &str,
    eos: &EosParams,
    w: &ScalarField,
    s: &ScalarField,
    active: &[bool],
    spread: bool,
) -> Result<(), CliError> {
    let rule = parse_omega2(art.config("omega2")?).map_err(CliError::Config)?;
    t.at_most(&format!("{prefix}z-symmetry"), w.z_asymmetry() / w.max_abs().max(f64::MIN_POSITIVE), SYMMETRY_TOL);
    let support_ok = w
        .values()
        .iter()
        .zip(active)
        .all(|(&v, &a)| if a { v >= 0.0 } else { v == 0.0 });
    t.holds(&format!("{prefix}support"), support_ok, w.min(), "w>=0, 0 outside");

    let phys = eos.physical_entropy(s)?;
    let rho = w_to_rho(w, &phys, eos)?;
    let stored = art.field(&format!("{prefix}rho"))?;
    stored.grid().check_same(rho.grid())?;
    t.at_most(&format!("{prefix}density-consistency"), relative_difference(&rho, &stored), 1e-12);

    let pot = potential_axisym(&stored)?;
    t.at_most(&format!("{prefix}poisson-residual"), poisson_residual(&pot, &stored)?, POISSON_TOL);

    let isentropic = is_constant(s);
    if !spread {
        t.skip(&format!("{prefix}curl-identity"), "support below 10 nodes");
    } else if !isentropic {
        t.skip(&format!("{prefix}curl-identity"), "non-isentropic with z-independent Omega^2");
    } else {
        let p = pressure_from_state(&stored, &phys, eos)?;
        let om = RotationProfile::rule(rule).omega2_field(stored.grid())?;
        let om = MaskedField {
            mask: vec![true; om.values().len()],
            field: om,
        };
        let dom = StarDomain::from_density(&stored)?;
        t.at_most(&format!("{prefix}curl-identity"), curl_defect(&stored, &p, &om, &dom)?, CURL_TOL);
    }
    if spread && isentropic && rule.omega2(0.0) == 0.0 && rule.omega2(1.0) == 0.0 {
        let dom = StarDomain::from_density(&stored)?;
        let b = bernoulli_residual(&stored, &pot.potential, &RotationProfile::rule(rule), eos, phys.max(), &dom)?;
        t.at_most(
            &format!("{prefix}bernoulli"),
            b / (w.max_abs() * (phys.max() / eos.gamma).exp()),
            BERNOULLI_TOL,
        );
    } else {
        t.skip(&format!("{prefix}bernoulli"), "needs a spherical isentropic static star");
    }
    Ok(())
}

fn monotone_checks(t: &mut Table, art: &Artifacts) -> Result<(), CliError> {
    let data = art.data();
    let eos = eos_from(data)?;
    let w = art.field("w")?;
    let s = art.field("entropy")?;
    let f = art.field("forcing")?;
    let active = positive_mask(&art.field("active")?);
    let sub = art.field("subsolution")?;
    let sup = art.field("supersolution")?;
    for other in [&s, &f, &sub, &sup] {
        w.grid().check_same(other.grid())?;
    }
    let op = DirichletOperator::new(&s.map(f64::exp)?, active.clone())?;
    let res = residual_field(&op, w.values(), &s, &f, &eos);
    let worst = res
        .iter()
        .zip(&active)
        .filter(|(_, &a)| a)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let tol = num(data, "tol")?;
    t.at_most("pde-residual", worst, (10.0 * tol).max(1e-6));
    let bracketed = (0..w.values().len()).all(|k| {
        let v = w.values()[k];
        let slack = 1e-10 * (1.0 + v.abs());
        sub.values()[k] <= v + slack && v <= sup.values()[k] + slack
    });
    t.holds("bracketed", bracketed, 0.0, "sub <= w <= super");
    let inside = w.values().iter().zip(&active).all(|(&v, &a)| !a || v > 0.0);
    t.holds("positive-inside", inside, w.max(), "w > 0 on ball");
    solution_checks(t, art, "", &eos, &w, &s, &active, true)
}

fn variational_checks(
    t: &mut Table,
    art: &Artifacts,
    prefix: &str,
    data: &Value,
    gamma_src: &Value,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let eos = eos_from(gamma_src)?;
    let w = art.field(&format!("{prefix}w"))?;
    let s = art.field(&format!("{prefix}entropy"))?;
    let f = art.field(&format!("{prefix}forcing"))?;
    let radius = num(data, "radius")?;
    let target = num(data, "target_p")?;
    let prob = VariationalProblem::new(eos, s.clone(), f, radius)?;
    prob.grid().check_same(w.grid())?;
    let wv = w.values();
    t.at_most(
        &format!("{prefix}constraint"),
        (prob.constraint(wv) - target).abs() / target,
        1e-10,
    );
    let lambda = prob.multiplier(wv)?;
    t.holds(&format!("{prefix}lambda-positive"), lambda > 0.0, lambda, "> 0");
    let grad_tol: f64 = art
        .config("grad-tol")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1e-6);
    t.at_most(&format!("{prefix}kkt-residual"), prob.kkt_residual(wv, lambda), (10.0 * grad_tol).max(1e-5));
    let e = prob.energy(wv)?;
    t.holds(&format!("{prefix}energy-negative"), e.value < 0.0, e.value, "< 0");

    let mut thetas = vec![0.5, 2.0, 3.0];
    thetas.extend((0..3).map(|_| rng.gen_range(0.25..4.0)));
    let mut worst = 0.0f64;
    for th in thetas {
        let scaled: Vec<f64> = wv.iter().map(|v| th * v).collect();
        let es = prob.energy(&scaled)?;
        let a = th * th * e.t;
        let b = th.powf(eos.q + 1.0) * e.u;
        worst = worst.max((es.value - (a - b)).abs() / a.abs().max(b.abs()));
    }
    t.at_most(&format!("{prefix}scaling-identity"), worst, 1e-12);

    let active = prob.active().to_vec();
    let spread = data["positive_nodes"].as_u64().unwrap_or(0) >= 10;
    solution_checks(t, art, prefix, &eos, &w, &s, &active, spread)
}

fn inverse_checks(t: &mut Table, art: &Artifacts) -> Result<(), CliError> {
    let rho = art.field("rho")?;
    let p = art.field("p")?;
    let om = MaskedField {
        field: art.field("omega2")?,
        mask: positive_mask(&art.field("omega2_mask")?),
    };
    let stored_pot = art.field("potential")?;
    let dom = StarDomain::from_density(&rho)?;
    let pot = potential_axisym(&rho)?;
    t.at_most("potential-consistency", relative_difference(&pot.potential, &stored_pot), 1e-12);
    let (er, ez) = momentum_residual(&rho, &p, &om, &pot, &dom)?;
    t.at_most("momentum-residual-r", er, MOMENTUM_TOL);
    t.at_most("momentum-residual-z", ez, MOMENTUM_TOL);
    t.at_most("curl-identity", curl_defect(&rho, &p, &om, &dom)?, CURL_TOL);
    t.at_most("boundary-pressure", boundary_pressure(&p, &dom), 1e-3);
    t.at_most("z-symmetry-p", p.z_asymmetry() / p.max_abs().max(f64::MIN_POSITIVE), SYMMETRY_TOL);
    t.at_most(
        "z-symmetry-omega2",
        om.field.z_asymmetry() / om.max_abs().max(f64::MIN_POSITIVE),
        SYMMETRY_TOL,
    );
    if art.data()["hypotheses_hold"].as_bool() == Some(true) {
        let omax = om.max_abs();
        let min = om
            .field
            .values()
            .iter()
            .zip(&om.mask)
            .filter(|(_, &m)| m)
            .fold(0.0f64, |a, (v, _)| a.min(*v));
        t.at_most("omega2-nonnegative", -min / omax.max(f64::MIN_POSITIVE), 1e-6);
    } else {
        t.skip("omega2-nonnegative", "density violates the hypotheses");
    }
    Ok(())
}

fn gravity_checks(t: &mut Table, art: &Artifacts) -> Result<(), CliError> {
    let rho = art.field("rho")?;
    let potential = art.field("potential")?;
    rho.grid().check_same(potential.grid())?;
    let a = num(art.data(), "ball_radius")?;
    let g = *rho.grid();
    let res = PotentialResult {
        gradient: gradient_rz(&potential)?,
        source_mass: integrate_axisym(&rho, None)?,
        potential,
    };
    t.at_most("poisson-residual", poisson_residual(&res, &rho)?, POISSON_TOL);
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let d = g.r(i).hypot(g.z(j));
            let e = uniform_ball_potential(a, d);
            let rel = (res.potential.at(i, j) - e).abs() / e;
            if d <= a {
                inside = inside.max(rel);
            } else {
                outside = outside.max(rel);
            }
        }
    }
    t.at_most("closed-form-inside", inside, 1e-2);
    t.at_most("closed-form-outside", outside, 1e-2);
    Ok(())
}

fn lane_emden_checks(t: &mut Table, art: &Artifacts) -> Result<(), CliError> {
    let data = art.data();
    let n = num(data, "n")?;
    let step: f64 = art.config("step")?.parse().map_err(|_| CliError::Config("bad step".into()))?;
    let xi1 = num(data, "xi1")?;
    let fresh = lane_emden_with_step(n, step)?;
    t.at_most("xi1-reproducible", (fresh.xi1 - xi1).abs(), 1e-12);
    let mut rd = csv::Reader::from_path(art.dir.join("lane_emden.csv"))?;
    let mut last = None;
    for rec in rd.records() {
        let rec = rec?;
        last = rec.get(0).and_then(|v| v.parse::<f64>().ok());
    }
    let last = last.ok_or_else(|| CliError::Config("empty lane_emden.csv".into()))?;
    t.at_most("table-ends-at-xi1", (last - xi1).abs() / xi1, 1e-11);
    let rhs = -xi1 * xi1 * num(data, "slope")?;
    t.at_most("mass-identity", (num(data, "mass_integral")? - rhs).abs() / rhs, 1e-7);
    let closed = if n == 0.0 {
        Some(6f64.sqrt())
    } else if n == 1.0 {
        Some(std::f64::consts::PI)
    } else {
        None
    };
    match closed {
        Some(c) => t.at_most("closed-form-xi1", (xi1 - c).abs(), 1e-8),
        None => t.skip("closed-form-xi1", "no closed form for this n"),
    }
    Ok(())
}

fn elementary_sweep(t: &mut Table, rng: &mut ChaCha8Rng, samples: usize) -> Result<(), CliError> {
    let mut violations = 0usize;
    for _ in 0..samples {
        let l1: f64 = rng.gen_range(0.0..=1.0);
        let q: f64 = rng.gen_range(1.0..3.0);
        let q = if q > 1.0 { q } else { 1.0 + f64::EPSILON };
        if !elementary_inequality_check(l1, 1.0 - l1, q)? {
            violations += 1;
        }
    }
    t.at_most("elementary-inequality", violations as f64, 0.0);
    Ok(())
}

pub fn verify(p: &Params) -> Result<(), CliError> {
    let dir: PathBuf = p.require("dir", |s| Ok(PathBuf::from(s)))?;
    let seed = p.u64("seed", "0")?;
    let samples = p.usize("samples", "10000")?;
    let art = Artifacts::open(&dir)?;
    let command = art.manifest["command"].as_str().unwrap_or_default().to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table { rows: Vec::new() };
    match command.as_str() {
        "solve-monotone" => monotone_checks(&mut t, &art)?,
        "solve-variational" => {
            let data = art.data().clone();
            variational_checks(&mut t, &art, "", &data, &data, &mut rng)?
        }
        "continuation" => {
            let data = art.data().clone();
            let stages = data["stages"]
                .as_array()
                .ok_or_else(|| CliError::Config("manifest lists no stages".into()))?;
            for (k, st) in stages.iter().enumerate() {
                variational_checks(&mut t, &art, &format!("stage{k}_"), st, &data, &mut rng)?;
            }
        }
        "inverse" => inverse_checks(&mut t, &art)?,
        "gravity-test" => gravity_checks(&mut t, &art)?,
        "lane-emden" => lane_emden_checks(&mut t, &art)?,
        other => return Err(CliError::Config(format!("manifest names unknown command '{other}'"))),
    }
    elementary_sweep(&mut t, &mut rng, samples)?;
    println!("verify {} ({command}, seed {seed})", dir.display());
    t.print();
    match t.failures() {
        0 => Ok(()),
        n => Err(CliError::Verify(n)),
    }
}
