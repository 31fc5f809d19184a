//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs sequentially; exits non-zero if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotstar::eos::{pressure_from_state, EosParams, EntropyRule, Omega2Rule};
use rotstar::field::GridSpec;
use rotstar::gravity::{poisson_residual, potential_axisym, uniform_ball, uniform_ball_potential};
use rotstar::inverse::{
    boundary_pressure, curl_defect, momentum_residual, reconstruct, CheckMode, DensitySpec, H3Status, InverseResult,
};
use rotstar::monotone::{solve_fitted, MonotoneConfig};
use rotstar::radial::{compare_with_field, lane_emden_solve};
use rotstar::variational::{
    domain_continuation, elementary_inequality_check, VariationalConfig, VariationalProblem, VariationalReport,
};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

// ---------------------------------------------------------------- 1
fn gravity_oracle() -> Verdict {
    const REL_TOL: f64 = 1e-2;
    const POISSON_TOL: f64 = 0.05;
    let g = GridSpec::new(129, 257, 2.0, 2.0).unwrap();
    let rho = uniform_ball(&g, 1.0).unwrap();
    let res = potential_axisym(&rho).unwrap();
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let d = g.r(i).hypot(g.z(j));
            let e = uniform_ball_potential(1.0, d);
            let rel = (res.potential.at(i, j) - e).abs() / e;
            if d <= 1.0 {
                inside = inside.max(rel);
            } else {
                outside = outside.max(rel);
            }
        }
    }
    let poisson = poisson_residual(&res, &rho).unwrap();
    verdict(
        inside <= REL_TOL && outside <= REL_TOL && poisson <= POISSON_TOL,
        format!("rel err inside {inside:.3e}, outside {outside:.3e} (<= {REL_TOL:e}); poisson {poisson:.3e} (<= {POISSON_TOL})"),
    )
}

// ---------------------------------------------------------------- 2
fn lane_emden_closed_forms() -> Verdict {
    const TOL: f64 = 1e-8;
    let e0 = (lane_emden_solve(0.0).unwrap().xi1 - 6f64.sqrt()).abs();
    let e1 = (lane_emden_solve(1.0).unwrap().xi1 - std::f64::consts::PI).abs();
    verdict(
        e0 <= TOL && e1 <= TOL,
        format!("|xi1 - sqrt6| = {e0:.2e}, |xi1 - pi| = {e1:.2e} (<= {TOL:e})"),
    )
}

// ---------------------------------------------------------------- 3
fn monotone_solver() -> Verdict {
    const RES_TOL: f64 = 1e-6;
    const SYM_TOL: f64 = 1e-12;
    const LE_TOL: f64 = 0.02;
    let eos = EosParams::new(3.0).unwrap();
    // Every sweep asserts sub <= w_k <= w_{k+1} <= super; a violation is an error.
    let out = match solve_fitted(
        &eos,
        &EntropyRule::RadialQuadratic { a: 0.1 },
        &Omega2Rule::RigidSquared { value: 0.05 },
        129,
        &MonotoneConfig::default(),
    ) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("solve failed: {e}")),
    };
    let r = &out.report;
    let asym = r.raw_z_asymmetry.max(r.solution.z_asymmetry()) / r.solution.max_abs();
    let spherical = solve_fitted(
        &eos,
        &EntropyRule::Constant { value: 0.0 },
        &Omega2Rule::RigidSquared { value: 0.0 },
        129,
        &MonotoneConfig::default(),
    )
    .and_then(|o| compare_with_field(&lane_emden_solve(eos.q)?, &o.report.solution, &eos, 0.0));
    let le = spherical.as_ref().map(|v| *v).unwrap_or(f64::INFINITY);
    verdict(
        r.final_residual <= RES_TOL && r.positive && asym <= SYM_TOL && le < LE_TOL,
        format!(
            "R = {:.4}, {} monotone bracketed sweeps, residual {:.2e} (<= {RES_TOL:e}), positive inside/zero on boundary {}, z-asymmetry {:.1e} (<= {SYM_TOL:e}), Lane-Emden deviation {:.2e} (< {LE_TOL})",
            out.sub.radius, r.iterations, r.final_residual, r.positive, asym, le
        ),
    )
}

fn variational_run(gamma: f64, nr: usize, p: Option<f64>) -> (VariationalProblem, Result<VariationalReport, rotstar::Error>) {
    let eos = EosParams::new(gamma).unwrap();
    let prob = VariationalProblem::fitted(
        eos,
        &EntropyRule::Constant { value: 0.0 },
        &Omega2Rule::RigidSquared { value: 1.0 },
        4.0,
        nr,
    )
    .unwrap();
    let cfg = VariationalConfig {
        nr,
        target_p: p,
        ..Default::default()
    };
    let rep = prob.resolve_p(&cfg).and_then(|target| prob.minimize(&cfg, target, None));
    (prob, rep)
}

fn nonincreasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
}

/// A minimiser supported on a vanishing fraction of the ball is a collapse
/// onto single cells, not an approximation of a continuum minimiser.
const MIN_SUPPORT_FRACTION: f64 = 1e-2;

// ---------------------------------------------------------------- 4
fn variational_solver() -> Verdict {
    const DEFECT_TOL: f64 = 1e-10;
    const EL_TOL: f64 = 0.05;
    let (_, coarse) = variational_run(1.5, 129, None);
    let (_, fine) = variational_run(1.5, 257, None);
    let (c, f) = match (coarse, fine) {
        (Ok(c), Ok(f)) => (c, f),
        (c, f) => return verdict(false, format!("solve failed: {:?} / {:?}", c.err(), f.err())),
    };
    let literal = [
        c.max_constraint_defect <= DEFECT_TOL,
        nonincreasing(&c.energy_history),
        c.final_energy < 0.0,
        c.lambda > 0.0,
        c.el_residual <= EL_TOL,
        f.el_residual < c.el_residual,
    ];
    let resolved = c.positive_set_fraction >= MIN_SUPPORT_FRACTION && f.positive_set_fraction >= MIN_SUPPORT_FRACTION;
    verdict(
        literal.iter().all(|&b| b) && resolved,
        format!(
            "defect {:.1e} {}, energy nonincreasing {}, E = {:.3e} {}, lambda = {:.3e} {}, EL residual {:.2e} -> {:.2e} {} / decreasing {}; \
             minimiser support {} / {} nodes ({:.1e}, {:.1e} of ball; need >= {MIN_SUPPORT_FRACTION:e}) {}, E(257)/E(129) = {:.3e}",
            c.max_constraint_defect,
            mark(literal[0]),
            literal[1],
            c.final_energy,
            mark(literal[2]),
            c.lambda,
            mark(literal[3]),
            c.el_residual,
            f.el_residual,
            mark(literal[4]),
            literal[5],
            c.positive_nodes,
            f.positive_nodes,
            c.positive_set_fraction,
            f.positive_set_fraction,
            mark(resolved),
            f.final_energy / c.final_energy,
        ),
    )
}

// ---------------------------------------------------------------- 5
fn scaling_inequality() -> Verdict {
    const EPS_REL: f64 = 1e-6;
    const HOMOGENEITY_TOL: f64 = 1e-12;
    let nr = 65;
    let gamma = 1.8;
    let (prob, base) = variational_run(gamma, nr, None);
    let base = match base {
        Ok(b) => b,
        Err(e) => return verdict(false, format!("solve failed: {e}")),
    };
    let p = base.target_p;
    let q = prob.eos.q;
    let mut ok = true;
    let mut detail = format!("gamma = {gamma}, I_P = {:.5e}", base.final_energy);
    for k in [2.0, 4.0] {
        let rep = match variational_run(gamma, nr, Some(k * p)).1 {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("solve at {k}P failed: {e}")),
        };
        let bound = k.powf(q + 1.0) * base.final_energy;
        let eps = EPS_REL * bound.abs();
        let holds = rep.final_energy <= bound + eps;
        ok &= holds;
        detail += &format!(", I_{k}P = {:.5e} <= {:.5e} + {eps:.1e} {}", rep.final_energy, bound, mark(holds));
    }
    let w = base.solution.values();
    let e = prob.energy(w).unwrap();
    let mut worst = 0.0f64;
    for th in [0.5, 2.0, 3.0] {
        let scaled: Vec<f64> = w.iter().map(|v| th * v).collect();
        let es = prob.energy(&scaled).unwrap();
        let (a, b) = (th * th * e.t, th.powf(q + 1.0) * e.u);
        worst = worst.max((es.value - (a - b)).abs() / a.abs().max(b.abs()));
    }
    ok &= worst <= HOMOGENEITY_TOL;
    detail += &format!("; homogeneity defect {worst:.1e} (<= {HOMOGENEITY_TOL:e})");
    verdict(ok, detail)
}

// ---------------------------------------------------------------- 6
fn elementary_inequality() -> Verdict {
    const SAMPLES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut bad = 0;
    for _ in 0..SAMPLES {
        let l1: f64 = rng.gen_range(0.0..=1.0);
        let q: f64 = rng.gen_range(1.0..3.0f64).max(1.0 + f64::EPSILON);
        if !elementary_inequality_check(l1, 1.0 - l1, q).unwrap() {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("{SAMPLES} seeded samples, {bad} violations"))
}

// ---------------------------------------------------------------- 7
fn domain_continuation_study() -> Verdict {
    const TAIL_TOL: f64 = 1e-3;
    const DRIFT_TOL: f64 = 0.01;
    let eos = EosParams::new(1.5).unwrap();
    let cfg = VariationalConfig {
        ball_radius: 4.0,
        nr: 33,
        ..Default::default()
    };
    let stages = match domain_continuation(
        eos,
        &EntropyRule::Constant { value: 0.0 },
        &Omega2Rule::RigidSquared { value: 1.0 },
        &cfg,
        3,
    ) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("continuation failed: {e}")),
    };
    let tail = stages[2].tail_fraction;
    let (e2, e4) = (stages[1].report.final_energy, stages[2].report.final_energy);
    let drift = (e4 - e2).abs() / e2.abs();
    let support: Vec<usize> = stages.iter().map(|s| s.report.positive_nodes).collect();
    let resolved = stages
        .iter()
        .all(|s| s.report.positive_set_fraction * (s.radius / cfg.ball_radius).powi(3) >= MIN_SUPPORT_FRACTION);
    verdict(
        tail <= TAIL_TOL && drift <= DRIFT_TOL && resolved,
        format!(
            "radii 4/8/16: tail at 4R {tail:.2e} (<= {TAIL_TOL:e}) {}, energy drift 2R->4R {drift:.2e} (<= {DRIFT_TOL}) {}; \
             minimiser support {support:?} nodes, resolved {}",
            mark(tail <= TAIL_TOL),
            mark(drift <= DRIFT_TOL),
            mark(resolved)
        ),
    )
}

// ---------------------------------------------------------------- 8
fn inverse_construction() -> Verdict {
    const NEG_TOL: f64 = 1e-6;
    const BOUNDARY_TOL: f64 = 1e-3;
    const MOMENTUM_TOL: f64 = 0.05;
    const MIN_ORDER: f64 = 1.0;
    const CURL_TOL: f64 = 0.05;
    const SPHERE_TOL: f64 = 1e-6;
    let oblate = DensitySpec::ellipsoid(1.2, 0.8, 1.0).unwrap();
    let run = |spec: &DensitySpec, nr: usize| -> InverseResult {
        reconstruct(spec, &GridSpec::square(nr, 1.5).unwrap(), CheckMode::Smooth).unwrap()
    };
    let fine = run(&oblate, 129);
    let coarse = run(&oblate, 65);
    let hyp = ["h2", "h4", "a", "a'"].iter().all(|h| fine.report.holds(h));
    let om_max = fine.omega2.max_abs();
    let om_min = fine
        .omega2
        .field
        .values()
        .iter()
        .zip(&fine.omega2.mask)
        .filter(|(_, &m)| m)
        .fold(0.0f64, |a, (v, _)| a.min(*v));
    let nonneg = om_min >= -NEG_TOL * om_max;
    let bp = boundary_pressure(&fine.pressure, &fine.domain);
    let mres = |r: &InverseResult| {
        let (er, ez) = momentum_residual(&r.rho, &r.pressure, &r.omega2, &r.potential, &r.domain).unwrap();
        er.max(ez)
    };
    let (m1, m2) = (mres(&coarse), mres(&fine));
    let order = (m1 / m2).log2();
    let curl = |r: &InverseResult| curl_defect(&r.rho, &r.pressure, &r.omega2, &r.domain).unwrap();
    let (c1, c2) = (curl(&coarse), curl(&fine));
    let (h1, h2) = (coarse.rho.grid().hr(), fine.rho.grid().hr());
    let curl_ok = c2 <= CURL_TOL && c2 / h2 <= 1.25 * c1 / h1;

    let sphere = run(&DensitySpec::ellipsoid(1.0, 1.0, 0.0).unwrap(), 129);
    let scale = sphere_scale(&sphere);
    let sphere_om = sphere.omega2.max_abs() / scale;
    let sphere1 = run(&DensitySpec::ellipsoid(1.0, 1.0, 1.0).unwrap(), 129);
    let sphere1_om = sphere1.omega2.max_abs() / sphere_scale(&sphere1);
    let prolate = run(&DensitySpec::ellipsoid(0.8, 1.2, 1.0).unwrap(), 65);
    let prolate_flag = prolate.report.h3_status == H3Status::Violated;

    let pass = hyp
        && nonneg
        && bp <= BOUNDARY_TOL
        && m2 <= MOMENTUM_TOL
        && order >= MIN_ORDER
        && curl_ok
        && sphere_om <= SPHERE_TOL
        && prolate_flag;
    verdict(
        pass,
        format!(
            "verdict {:?} {}; min Omega^2 / max = {:.1e} {}; boundary p {bp:.1e} (<= {BOUNDARY_TOL:e}); momentum {m1:.2e} -> {m2:.2e} \
             (<= {MOMENTUM_TOL}), order {order:.2} (>= {MIN_ORDER}); curl {c1:.2e} -> {c2:.2e} {}; uniform ball Omega^2 {sphere_om:.1e} \
             (<= {SPHERE_TOL:e}; power-1 ball {sphere1_om:.1e}); prolate h3 {:?}",
            fine.report.verdict,
            mark(hyp),
            om_min / om_max,
            mark(nonneg),
            mark(curl_ok),
            prolate.report.h3_status
        ),
    )
}

/// `max |B_r / r|` over the support: the angular velocity squared that
/// would balance gravity, the natural scale of `Omega^2`.
fn sphere_scale(r: &InverseResult) -> f64 {
    let g = *r.rho.grid();
    let mut s = 0.0f64;
    for i in 1..g.nr() {
        for j in 0..g.nz() {
            if r.domain.contains(i, j) {
                s = s.max((r.potential.gradient.0.at(i, j) / g.r(i)).abs());
            }
        }
    }
    s
}

// ---------------------------------------------------------------- 9
fn round_trip() -> Verdict {
    const P_TOL: f64 = 0.05;
    const OMEGA_TOL: f64 = 0.10;
    let gamma = 1.8;
    let (prob, rep) = variational_run(gamma, 65, None);
    let rep = match rep {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("solve failed: {e}")),
    };
    let eos = prob.eos;
    let spec = DensitySpec::from_solution(&rep.solution, &eos, &prob.s).unwrap();
    let inv = reconstruct(&spec, rep.solution.grid(), CheckMode::Smooth).unwrap();
    let phys = eos.physical_entropy(&prob.s).unwrap();
    let p_state = pressure_from_state(&inv.rho, &phys, &eos).unwrap();
    let cut = 0.1 * inv.rho.max();
    let target_om = rep.lambda * 1.0;
    let (mut p_err, mut om_err, mut nodes) = (0.0f64, 0.0f64, 0);
    for k in 0..inv.rho.values().len() {
        if inv.rho.values()[k] > cut {
            let want = p_state.values()[k];
            p_err = p_err.max((inv.pressure.values()[k] - want).abs() / want);
            if inv.omega2.mask[k] {
                om_err = om_err.max((inv.omega2.field.values()[k] - target_om).abs() / target_om);
                nodes += 1;
            }
        }
    }
    verdict(
        p_err <= P_TOL && om_err <= OMEGA_TOL,
        format!(
            "gamma = {gamma}, s = 0, Omega^2 = lambda = {target_om:.4e}: pressure rel err {p_err:.3e} (<= {P_TOL}), \
             Omega^2 rel err {om_err:.3e} (<= {OMEGA_TOL}) over {nodes} nodes with rho > 0.1 max"
        ),
    )
}

// ---------------------------------------------------------------- 10
fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_rotstar");
    let root = std::env::temp_dir().join(format!("rotstar-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let runs: [&[&str]; 2] = [
        &["solve-monotone", "--gamma", "3", "--entropy", "radial-quadratic:0.1", "--nr", "65", "--seed", "7"],
        &["inverse", "--density", "ellipsoid:a=1.2,b=0.8,power=1", "--nr", "65", "--seed", "7"],
    ];
    let mut compared = 0;
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "2", "3"] {
            let dir = root.join(format!("run{k}-t{threads}"));
            let status = Command::new(bin)
                .args(*args)
                .arg("--out")
                .arg(&dir)
                .env("ROTSTAR_THREADS", threads)
                .output()
                .expect("run rotstar");
            if !status.status.success() {
                return verdict(false, format!("{args:?} with {threads} threads exited {:?}", status.status.code()));
            }
            outputs.push(dir);
        }
        for name in axifields(&outputs[0]) {
            let reference = std::fs::read(outputs[0].join(&name)).unwrap();
            for other in &outputs[1..] {
                if std::fs::read(other.join(&name)).ok().as_deref() != Some(&reference[..]) {
                    return verdict(false, format!("{name} differs between worker counts"));
                }
            }
            compared += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    verdict(
        compared > 0,
        format!("{compared} AXIFIELD files byte-identical across ROTSTAR_THREADS = 1, 2, 3"),
    )
}

fn axifields(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".axifield"))
        .collect();
    v.sort();
    v
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("gravity oracle", Duration::from_secs(60), gravity_oracle),
        ("Lane-Emden closed forms", Duration::from_secs(1), lane_emden_closed_forms),
        ("monotone solver", Duration::from_secs(300), monotone_solver),
        ("variational solver", Duration::from_secs(600), variational_solver),
        ("scaling inequality", Duration::from_secs(1800), scaling_inequality),
        ("elementary inequality", Duration::from_secs(1), elementary_inequality),
        ("domain continuation", Duration::from_secs(1800), domain_continuation_study),
        ("inverse construction", Duration::from_secs(300), inverse_construction),
        ("round trip", Duration::from_secs(900), round_trip),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        let el = t.elapsed();
        let pass = v.pass && el <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} C{} {name}: {} [{:.2} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            v.detail,
            el.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
