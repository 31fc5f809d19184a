use rotstar::eos::{EosParams, EntropyRule, Omega2Rule};
use rotstar::field::{GridSpec, Parity, ScalarField};
use rotstar::gravity::{potential_axisym, poisson_residual, uniform_ball, uniform_ball_potential};
use rotstar::inverse::{
    boundary_pressure, momentum_residual, pressure_from_density, reconstruct, CheckMode, DensitySpec, H3Status,
};
use rotstar::monotone::{solve_fitted, MonotoneConfig};
use rotstar::radial::{compare_with_field, lane_emden_solve};
use rotstar::variational::{VariationalConfig, VariationalProblem};
use rotstar::{par, Error};
use std::f64::consts::PI;

#[test]
fn ball_potential_outside_matches_point_mass() {
    let g = GridSpec::square(65, 2.0).unwrap();
    let rho = uniform_ball(&g, 1.0).unwrap();
    let res = potential_axisym(&rho).unwrap();
    // Far field depends on the sampled mass only.
    let d = 1.9;
    let exact = res.source_mass / d;
    let got = res.potential.interpolate(d, 0.0);
    assert!((got - exact).abs() < 2e-3 * exact, "{got} vs {exact}");
    assert!(poisson_residual(&res, &rho).unwrap() < 0.05);
}

#[test]
fn uniform_ball_axis_pressure_matches_hydrostatics() {
    // dp/dd = rho dB/dd = -(4 pi / 3) d  =>  p(0) = 2 pi / 3.
    let g = GridSpec::square(65, 1.5).unwrap();
    let spec = DensitySpec::ellipsoid(1.0, 1.0, 0.0).unwrap();
    let rho = spec.sample(&g).unwrap();
    let pot = potential_axisym(&rho).unwrap();
    let p = pressure_from_density(&spec, &pot).unwrap();
    let centre = p.at(0, g.center());
    assert!((centre - 2.0 * PI / 3.0).abs() < 1e-2 * 2.0 * PI / 3.0, "{centre}");
    // Along the axis against the closed form.
    for j in 0..g.nz() {
        let z = g.z(j);
        if z.abs() < 0.9 {
            let exact = 2.0 * PI / 3.0 * (1.0 - z * z);
            assert!((p.at(0, j) - exact).abs() < 1e-2 * 2.0 * PI / 3.0, "z={z}: {} vs {exact}", p.at(0, j));
        }
    }
    let _ = uniform_ball_potential;
}

#[test]
fn zero_density_gives_zero_pressure() {
    let g = GridSpec::square(17, 1.0).unwrap();
    let spec = DensitySpec::Gridded {
        rho: ScalarField::zeros(g, Parity::Even),
    };
    let pot = potential_axisym(&spec.sample(&g).unwrap()).unwrap();
    assert_eq!(pressure_from_density(&spec, &pot).unwrap().max_abs(), 0.0);
}

#[test]
fn oblate_reconstruction_is_consistent() {
    let g = GridSpec::square(65, 1.5).unwrap();
    let spec = DensitySpec::ellipsoid(1.2, 0.8, 1.0).unwrap();
    let res = reconstruct(&spec, &g, CheckMode::Smooth).unwrap();
    assert!(res.report.holds("h4") && res.report.holds("a'"));
    assert_ne!(res.report.h3_status, H3Status::Violated);
    let (er, ez) = momentum_residual(&res.rho, &res.pressure, &res.omega2, &res.potential, &res.domain).unwrap();
    assert!(er < 0.05 && ez < 0.05, "{er} {ez}");
    assert!(boundary_pressure(&res.pressure, &res.domain) < 1e-2);

    // Perturbing Omega^2 is detected by the radial equation.
    let mut bumped = res.omega2.clone();
    bumped.field = bumped.field.map(|v| v + 0.1).unwrap();
    let (er2, _) = momentum_residual(&res.rho, &res.pressure, &bumped, &res.potential, &res.domain).unwrap();
    assert!(er2 > er + 0.01, "{er2} vs {er}");
}

#[test]
fn gridded_ellipsoid_agrees_with_analytic_kind() {
    let g = GridSpec::square(65, 1.5).unwrap();
    let analytic = DensitySpec::ellipsoid(1.2, 0.8, 2.0).unwrap();
    let gridded = DensitySpec::Gridded {
        rho: analytic.sample(&g).unwrap(),
    };
    let a = reconstruct(&analytic, &g, CheckMode::Smooth).unwrap();
    let b = reconstruct(&gridded, &g, CheckMode::Smooth).unwrap();
    let pmax = a.pressure.max();
    let mut worst = 0.0f64;
    for k in 0..g.len() {
        worst = worst.max((a.pressure.values()[k] - b.pressure.values()[k]).abs());
    }
    assert!(worst < 2e-2 * pmax, "{worst} vs {pmax}");
}

#[test]
fn monotone_spherical_limit_matches_lane_emden() {
    let eos = EosParams::new(3.0).unwrap();
    let out = solve_fitted(
        &eos,
        &EntropyRule::Constant { value: 0.0 },
        &Omega2Rule::RigidSquared { value: 0.0 },
        65,
        &MonotoneConfig::default(),
    )
    .unwrap();
    let sol = lane_emden_solve(eos.q).unwrap();
    let dev = compare_with_field(&sol, &out.report.solution, &eos, 0.0).unwrap();
    assert!(dev < 0.02, "{dev}");
}

#[test]
fn monotone_rejects_wrong_regime() {
    let eos = EosParams::new(1.5).unwrap();
    let r = solve_fitted(
        &eos,
        &EntropyRule::Constant { value: 0.0 },
        &Omega2Rule::RigidSquared { value: 0.1 },
        17,
        &MonotoneConfig::default(),
    );
    assert!(r.is_err());
}

#[test]
fn monotone_result_is_independent_of_worker_count() {
    let eos = EosParams::new(3.0).unwrap();
    let run = || {
        solve_fitted(
            &eos,
            &EntropyRule::RadialQuadratic { a: 0.1 },
            &Omega2Rule::RigidSquared { value: 0.05 },
            33,
            &MonotoneConfig::default(),
        )
        .unwrap()
        .report
        .solution
    };
    let one = par::with_threads(1, run);
    let three = par::with_threads(3, run);
    assert_eq!(one.values(), three.values());
}

#[test]
fn variational_subcritical_minimizer_is_resolved() {
    // q = 1.25 < 5/3: the energy is bounded below and the minimiser spreads
    // over many cells; its energy is stable under refinement.
    let eos = EosParams::new(1.8).unwrap();
    let run = |nr| {
        let prob = VariationalProblem::fitted(
            eos,
            &EntropyRule::Constant { value: 0.0 },
            &Omega2Rule::RigidSquared { value: 1.0 },
            4.0,
            nr,
        )
        .unwrap();
        let cfg = VariationalConfig { nr, ..Default::default() };
        let p = prob.resolve_p(&cfg).unwrap();
        (p, prob.minimize(&cfg, p, None).unwrap())
    };
    let (_, coarse) = run(33);
    let (_, fine) = run(65);
    assert!(coarse.converged && fine.converged);
    assert!(coarse.lambda > 0.0 && fine.lambda > 0.0);
    assert!(fine.final_energy < 0.0);
    assert!(fine.positive_set_fraction > 0.05);
    assert!((fine.final_energy - coarse.final_energy).abs() < 0.05 * coarse.final_energy.abs());
    assert!(fine.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
}

#[test]
fn variational_supercritical_minimizer_collapses() {
    // q = 2 > 5/3: mass-preserving concentration lowers the energy without
    // bound, and the discrete minimiser is a single-node spike whose energy
    // grows as h^-6.
    let eos = EosParams::new(1.5).unwrap();
    let run = |nr| {
        let prob = VariationalProblem::fitted(
            eos,
            &EntropyRule::Constant { value: 0.0 },
            &Omega2Rule::RigidSquared { value: 1.0 },
            4.0,
            nr,
        )
        .unwrap();
        let cfg = VariationalConfig { nr, ..Default::default() };
        let p = prob.resolve_p(&cfg).unwrap();
        prob.minimize(&cfg, p, None).unwrap()
    };
    let coarse = run(19);
    let fine = run(35);
    assert_eq!(coarse.positive_nodes, 1);
    assert_eq!(fine.positive_nodes, 1);
    assert!(fine.final_energy < 30.0 * coarse.final_energy);
}

#[test]
fn errors_are_typed() {
    let g = GridSpec::square(9, 1.0).unwrap();
    let rho = ScalarField::constant(g, 1.0).unwrap();
    assert!(matches!(potential_axisym(&rho), Err(Error::SupportViolation { .. })));
}
