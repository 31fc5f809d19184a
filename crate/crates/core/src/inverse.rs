//! Pressure and angular velocity from a prescribed density.
//!
//! For a z-even density supported in `D = { |z| < psi(r) }` with potential
//! `B rho`, the momentum balance `grad p = rho grad B rho + rho r Omega^2 e_r`
//! is solved column by column:
//!
//! - `p(r, z) = int_{-psi(r)}^z rho B_xi dxi`,
//! - `Omega^2(r, z) = F / (r rho)` with
//!   `F = int_{-psi(r)}^z (rho_r B_xi - rho_xi B_r) dxi`.
//!
//! `F` is odd in `r`, so on the axis `Omega^2 = F_r / rho`, taken from the
//! difference quotient of the odd extension.

use crate::eos::{w_to_rho, EosParams, RotationProfile};
use crate::error::{Error, Result};
use crate::field::{curl_theta_residual, gradient_rz, GridSpec, MaskedField, Parity, ScalarField, StarDomain};
use crate::gravity::{potential_axisym, PotentialResult};

/// Densities accepted by the reconstruction.
#[derive(Debug, Clone)]
pub enum DensitySpec {
    /// `rho_c (1 - r^2/a^2 - z^2/b^2)_+^power`, with analytic derivatives.
    Ellipsoid { a: f64, b: f64, power: f64, rho_c: f64 },
    /// Samples; derivatives by finite differences, boundary from the zero
    /// level set.
    Gridded { rho: ScalarField },
}

impl DensitySpec {
    pub fn ellipsoid(a: f64, b: f64, power: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && power >= 0.0 && a.is_finite() && b.is_finite() && power.is_finite()) {
            return Err(Error::Domain(format!(
                "ellipsoid needs a, b > 0 and power >= 0, got a={a}, b={b}, power={power}"
            )));
        }
        Ok(DensitySpec::Ellipsoid { a, b, power, rho_c: 1.0 })
    }

    /// Density of a solver output `w` with effective entropy `s`.
    pub fn from_solution(w: &ScalarField, eos: &EosParams, s: &ScalarField) -> Result<Self> {
        let phys = eos.physical_entropy(s)?;
        let w = w.map(|v| v.max(0.0))?;
        Ok(DensitySpec::Gridded {
            rho: w_to_rho(&w, &phys, eos)?,
        })
    }

    fn ellipsoid_t(a: f64, b: f64, r: f64, z: f64) -> f64 {
        1.0 - r * r / (a * a) - z * z / (b * b)
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<ScalarField> {
        match self {
            DensitySpec::Ellipsoid { a, b, power, rho_c } => ScalarField::from_fn(*grid, Parity::Even, |r, z| {
                let t = Self::ellipsoid_t(*a, *b, r, z);
                if t > 0.0 {
                    rho_c * t.powf(*power)
                } else {
                    0.0
                }
            }),
            DensitySpec::Gridded { rho } => {
                grid.check_same(rho.grid())?;
                Ok(rho.clone())
            }
        }
    }

    pub fn domain(&self, grid: &GridSpec) -> Result<StarDomain> {
        match self {
            DensitySpec::Ellipsoid { a, b, .. } => StarDomain::from_fn(*grid, |r| {
                let t = 1.0 - r * r / (a * a);
                if t > 0.0 {
                    b * t.sqrt()
                } else {
                    0.0
                }
            }),
            DensitySpec::Gridded { rho } => StarDomain::from_density(rho),
        }
    }

    /// `(rho_r, rho_z, rho_zz)` at a point strictly inside the support
    /// (analytic kind only).
    fn analytic_derivatives(&self, r: f64, z: f64) -> Option<(f64, f64, f64)> {
        let DensitySpec::Ellipsoid { a, b, power, rho_c } = *self else {
            return None;
        };
        let t = Self::ellipsoid_t(a, b, r, z);
        if power == 0.0 {
            return Some((0.0, 0.0, 0.0));
        }
        if t <= 0.0 {
            return Some((0.0, 0.0, 0.0));
        }
        let d1 = rho_c * power * t.powf(power - 1.0);
        let d2 = if power == 1.0 {
            0.0
        } else {
            rho_c * power * (power - 1.0) * t.powf(power - 2.0)
        };
        let tz = -2.0 * z / (b * b);
        Some((d1 * (-2.0 * r / (a * a)), d1 * tz, d2 * tz * tz + d1 * (-2.0 / (b * b))))
    }

    /// Limit of `rho` at the lower boundary point of a column, from inside.
    fn boundary_density(&self) -> Option<f64> {
        match *self {
            DensitySpec::Ellipsoid { power, rho_c, .. } => Some(if power == 0.0 { rho_c } else { 0.0 }),
            DensitySpec::Gridded { .. } => None,
        }
    }

    /// Equatorial radius and polar half-height used for the neighbourhood
    /// strips of the boundary conditions.
    fn extents(&self, domain: &StarDomain) -> (f64, f64) {
        match *self {
            DensitySpec::Ellipsoid { a, b, .. } => (a, b),
            DensitySpec::Gridded { .. } => {
                let g = domain.grid();
                let mut r_eq = 0.0;
                for (i, &p) in domain.boundary().iter().enumerate() {
                    if p > 0.0 {
                        r_eq = g.r(i);
                    }
                }
                // Extend to the interpolated zero of psi past the last
                // positive column.
                (r_eq + 0.5 * g.hr(), domain.psi(0))
            }
        }
    }
}

/// Derivatives of the density on the grid: analytic where available.
struct DensityDerivs {
    rho: ScalarField,
    dr: ScalarField,
    dz: ScalarField,
    dzz: Option<ScalarField>,
}

fn derivatives(spec: &DensitySpec, grid: &GridSpec) -> Result<DensityDerivs> {
    let rho = spec.sample(grid)?;
    match spec {
        DensitySpec::Ellipsoid { .. } => {
            let g = *grid;
            let mut dr = vec![0.0; g.len()];
            let mut dz = vec![0.0; g.len()];
            let mut dzz = vec![0.0; g.len()];
            for i in 0..g.nr() {
                for j in 0..g.nz() {
                    let k = g.idx(i, j);
                    let (a, b, c) = spec.analytic_derivatives(g.r(i), g.z(j)).unwrap_or_default();
                    dr[k] = if i == 0 { 0.0 } else { a };
                    dz[k] = b;
                    dzz[k] = c;
                }
            }
            Ok(DensityDerivs {
                rho,
                dr: ScalarField::from_values(g, dr, Parity::Odd)?,
                dz: ScalarField::from_values(g, dz, Parity::Even)?,
                dzz: Some(ScalarField::from_values(g, dzz, Parity::Even)?),
            })
        }
        DensitySpec::Gridded { .. } => {
            let (dr, dz) = gradient_rz(&rho)?;
            Ok(DensityDerivs { rho, dr, dz, dzz: None })
        }
    }
}

/// Which boundary regularity checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    Smooth,
    Holder,
}

/// Outcome of the cross-term sign check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum H3Status {
    Holds,
    /// Negative only at the level of the O(h) quadrature error of the
    /// discrete gradients; not evidence either way.
    QuadratureAmbiguous,
    Violated,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HolderConstant {
    pub epsilon: f64,
    /// `max |rho_r| / |rho_z|` over domain nodes with `|z| >= epsilon`.
    pub c: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisReport {
    /// `max |rho(r, z) - rho(r, -z)|`.
    pub h2_asymmetry: f64,
    /// Min over domain nodes with `z < 0` of `rho_r B_z - rho_z B_r`.
    pub h3_min: f64,
    /// Location `(r, z)` of the most negative cross term.
    pub h3_argmin: (f64, f64),
    /// Normalisation of `h3_min`: max of `|rho_r B_z| + |rho_z B_r|`.
    pub h3_scale: f64,
    pub h3_status: H3Status,
    /// Min over domain nodes with `z < 0` of `rho_z`.
    pub h4_min: f64,
    /// Max of `rho_zz` near the equatorial boundary point.
    pub ha_equator: f64,
    /// `rho_r <= 0` throughout the equatorial strip.
    pub ha_prime: bool,
    /// Sup of `|z rho_r / rho_z|` over the equatorial strip (`z != 0`).
    pub ha_dprime_bound: f64,
    /// Strip `{ |z| < dz, |r - r_eq| < dr }` used for the boundary checks.
    pub strip: (f64, f64, f64),
    pub holder: Vec<HolderConstant>,
    pub verdict: Vec<String>,
}

impl HypothesisReport {
    pub fn holds(&self, name: &str) -> bool {
        self.verdict.iter().any(|v| v == name)
    }
}

/// Bound used for the `(a'')` ratio: beyond it we call the ratio unbounded.
pub const RATIO_CAP: f64 = 1e3;
/// Relative tolerance for the cross-term sign in `h3`.
pub const H3_TOL: f64 = 1e-6;
/// Negative cross terms above `-H3_AMBIGUOUS h h3_scale` are within the
/// first-order error of the difference quotients next to the axis.
pub const H3_AMBIGUOUS: f64 = 0.1;
/// Symmetry tolerance for `h2`, relative to `max rho`.
pub const H2_TOL: f64 = 1e-12;

/// Evaluate the density hypotheses on the grid.
pub fn check_hypotheses(spec: &DensitySpec, potential: &PotentialResult, mode: CheckMode) -> Result<HypothesisReport> {
    let g = *potential.potential.grid();
    let d = derivatives(spec, &g)?;
    let domain = spec.domain(&g)?;
    let (br, bz) = &potential.gradient;
    let rho_max = d.rho.max();

    let h2_asymmetry = d.rho.z_asymmetry();

    let mut h3_min = f64::INFINITY;
    let mut h3_argmin = (0.0, 0.0);
    let mut h3_scale = 0.0f64;
    let mut h4_min = f64::INFINITY;
    for i in 0..g.nr() {
        for j in 0..g.center() {
            if !domain.contains(i, j) {
                continue;
            }
            let k = g.idx(i, j);
            let a = d.dr.values()[k] * bz.values()[k];
            let b = d.dz.values()[k] * br.values()[k];
            h3_scale = h3_scale.max(a.abs() + b.abs());
            if a - b < h3_min {
                h3_min = a - b;
                h3_argmin = (g.r(i), g.z(j));
            }
            h4_min = h4_min.min(d.dz.values()[k]);
        }
    }

    let (ea, eb) = spec.extents(&domain);
    let strip = (0.1 * eb, 0.1 * ea, ea);
    let in_strip = |i: usize, j: usize| (g.z(j).abs() < strip.0) && (g.r(i) - ea).abs() < strip.1 && domain.contains(i, j);

    // Condition (a): rho_zz on the equatorial row near the boundary.
    let c = g.center();
    let mut ha_equator = f64::NEG_INFINITY;
    for i in 0..g.nr() {
        if !in_strip(i, c) {
            continue;
        }
        let v = match &d.dzz {
            Some(dzz) => dzz.at(i, c),
            None => {
                // Needs both vertical neighbours inside the support.
                if !(domain.contains(i, c + 1) && domain.contains(i, c - 1)) {
                    continue;
                }
                (d.rho.at(i, c + 1) - 2.0 * d.rho.at(i, c) + d.rho.at(i, c - 1)) / (g.hz() * g.hz())
            }
        };
        ha_equator = ha_equator.max(v);
    }

    let mut ha_prime = true;
    let mut ha_dprime_bound = 0.0f64;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            if !in_strip(i, j) {
                continue;
            }
            let k = g.idx(i, j);
            if d.dr.values()[k] > 0.0 {
                ha_prime = false;
            }
            if j != c {
                let rz = d.dz.values()[k];
                let ratio = if rz == 0.0 {
                    f64::INFINITY
                } else {
                    (g.z(j) * d.dr.values()[k] / rz).abs()
                };
                ha_dprime_bound = ha_dprime_bound.max(ratio);
            }
        }
    }

    let mut holder = Vec::new();
    if mode == CheckMode::Holder {
        for &eps in &[0.05, 0.1, 0.2] {
            let mut cmax = 0.0f64;
            for i in 0..g.nr() {
                for j in 0..g.nz() {
                    if !domain.contains(i, j) || g.z(j).abs() < eps {
                        continue;
                    }
                    let k = g.idx(i, j);
                    let rz = d.dz.values()[k].abs();
                    let rr = d.dr.values()[k].abs();
                    let ratio = if rz == 0.0 {
                        if rr == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        rr / rz
                    };
                    cmax = cmax.max(ratio);
                }
            }
            holder.push(HolderConstant { epsilon: eps, c: cmax });
        }
    }

    let mut verdict = Vec::new();
    if h2_asymmetry <= H2_TOL * rho_max {
        verdict.push("h2".to_string());
    }
    let h3_status = if h3_min >= -H3_TOL * h3_scale {
        H3Status::Holds
    } else if h3_min >= -H3_AMBIGUOUS * g.hr().max(g.hz()) * h3_scale {
        H3Status::QuadratureAmbiguous
    } else {
        H3Status::Violated
    };
    match h3_status {
        H3Status::Holds => verdict.push("h3".to_string()),
        H3Status::QuadratureAmbiguous => verdict.push("h3?".to_string()),
        H3Status::Violated => {}
    }
    if h4_min > 0.0 {
        verdict.push("h4".to_string());
    }
    if ha_equator.is_finite() && ha_equator < 0.0 {
        verdict.push("a".to_string());
    }
    if ha_prime {
        verdict.push("a'".to_string());
    }
    if ha_dprime_bound <= RATIO_CAP {
        verdict.push("a''".to_string());
    }
    if mode == CheckMode::Holder && holder.iter().all(|h| h.c.is_finite()) {
        verdict.push("h5".to_string());
    }
    Ok(HypothesisReport {
        h2_asymmetry,
        h3_min,
        h3_argmin,
        h3_scale,
        h3_status,
        h4_min,
        ha_equator,
        ha_prime,
        ha_dprime_bound,
        strip,
        holder,
        verdict,
    })
}

/// Interpolate column `i` of `f` at height `z` (linear in `z`).
fn column_at(f: &ScalarField, i: usize, z: f64) -> f64 {
    let g = f.grid();
    let y = ((z - g.zmin()) / g.hz()).clamp(0.0, (g.nz() - 1) as f64);
    let j = (y.floor() as usize).min(g.nz() - 2);
    let t = y - j as f64;
    (1.0 - t) * f.at(i, j) + t * f.at(i, j + 1)
}

/// Column quadrature `int_{-psi}^{z} I dxi` for `z <= 0`, mirrored to
/// `z > 0`. `lower(i)` is the integrand at `(r_i, -psi_i)`, `node(i, j)` the
/// integrand at a node.
fn column_integral<L, N>(domain: &StarDomain, lower: L, node: N) -> Vec<f64>
where
    L: Fn(usize) -> f64,
    N: Fn(usize, usize) -> f64,
{
    let g = *domain.grid();
    let c = g.center();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.nr() {
        let psi = domain.psi(i);
        if psi <= 0.0 {
            continue;
        }
        let Some(j0) = (0..=c).find(|&j| domain.contains(i, j)) else { continue };
        let mut acc = 0.5 * (g.z(j0) + psi) * (lower(i) + node(i, j0));
        out[g.idx(i, j0)] = acc;
        for j in j0 + 1..=c {
            acc += 0.5 * g.hz() * (node(i, j - 1) + node(i, j));
            out[g.idx(i, j)] = acc;
        }
        for j in 0..c {
            out[g.idx(i, g.mirror(j))] = out[g.idx(i, j)];
        }
    }
    out
}

/// `p(r, z) = int_{-psi}^{z} rho B_xi dxi`; zero outside the domain.
pub fn pressure_from_density(spec: &DensitySpec, potential: &PotentialResult) -> Result<ScalarField> {
    let g = *potential.potential.grid();
    let rho = spec.sample(&g)?;
    let domain = spec.domain(&g)?;
    let bz = &potential.gradient.1;
    let rho_b = spec.boundary_density();
    let lower = |i: usize| {
        let z = -domain.psi(i);
        let r0 = match rho_b {
            Some(v) => v,
            None => boundary_extrapolate(&rho, &domain, i),
        };
        r0 * column_at(bz, i, z)
    };
    let node = |i: usize, j: usize| rho.at(i, j) * bz.at(i, j);
    let vals = column_integral(&domain, lower, node);
    ScalarField::from_values(g, vals, Parity::Even)
}

/// `max |p|` over domain nodes with an outside neighbour, relative to
/// `max p`.
pub fn boundary_pressure(p: &ScalarField, domain: &StarDomain) -> f64 {
    let pmax = p.max();
    if pmax <= 0.0 {
        return 0.0;
    }
    let edge = domain.boundary_nodes();
    p.values()
        .iter()
        .zip(&edge)
        .filter(|(_, &e)| e)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
        / pmax
}

/// Linear extrapolation of a gridded density to the lower boundary point of
/// column `i`, clamped at zero.
fn boundary_extrapolate(rho: &ScalarField, domain: &StarDomain, i: usize) -> f64 {
    let g = domain.grid();
    let c = g.center();
    let Some(j0) = (0..=c).find(|&j| domain.contains(i, j)) else { return 0.0 };
    if j0 + 1 > c {
        return 0.0;
    }
    let (z0, z1) = (g.z(j0), g.z(j0 + 1));
    let z = -domain.psi(i);
    let v = rho.at(i, j0) + (rho.at(i, j0 + 1) - rho.at(i, j0)) * (z - z0) / (z1 - z0);
    v.max(0.0)
}

/// `Omega^2`, masked where `rho < 1e-9 max rho` or outside the domain.
pub fn omega2_from_density(spec: &DensitySpec, potential: &PotentialResult) -> Result<MaskedField> {
    let g = *potential.potential.grid();
    let d = derivatives(spec, &g)?;
    let domain = spec.domain(&g)?;
    let (br, bz) = &potential.gradient;
    let analytic = matches!(spec, DensitySpec::Ellipsoid { .. });

    let integrand = |i: usize, j: usize| d.dr.at(i, j) * bz.at(i, j) - d.dz.at(i, j) * br.at(i, j);
    let lower = |i: usize| {
        let z = -domain.psi(i);
        if analytic {
            let (rr, rz, _) = spec.analytic_derivatives(g.r(i), z * (1.0 - 1e-12)).unwrap_or_default();
            let rr = if i == 0 { 0.0 } else { rr };
            rr * column_at(bz, i, z) - rz * column_at(br, i, z)
        } else {
            // Linear extrapolation of the node integrand.
            let c = g.center();
            match (0..=c).find(|&j| domain.contains(i, j)) {
                Some(j0) if j0 < c => {
                    let (z0, z1) = (g.z(j0), g.z(j0 + 1));
                    let (a, b) = (integrand(i, j0), integrand(i, j0 + 1));
                    a + (b - a) * (z - z0) / (z1 - z0)
                }
                Some(j0) => integrand(i, j0),
                None => 0.0,
            }
        }
    };
    let f = column_integral(&domain, lower, integrand);

    let floor = 1e-9 * d.rho.max();
    let mut vals = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    let h = g.hr();
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let k = g.idx(i, j);
            let rho = d.rho.values()[k];
            if !domain.contains(i, j) || rho < floor || rho <= 0.0 {
                continue;
            }
            let ratio = if i == 0 {
                // F is odd in r: F_r(0) = (8 F(h) - F(2h)) / (6 h).
                let f1 = f[g.idx(1, j)];
                let f2 = f[g.idx(2, j)];
                (8.0 * f1 - f2) / (6.0 * h)
            } else {
                f[k] / g.r(i)
            };
            vals[k] = ratio / rho;
            mask[k] = true;
        }
    }
    Ok(MaskedField {
        field: ScalarField::from_values(g, vals, Parity::Even)?,
        mask,
    })
}

/// Normalised interior residuals of the two momentum equations,
/// `(|p_r - rho B_r - rho r Omega^2|, |p_z - rho B_z|) / max |rho grad B|`,
/// over nodes one cell inside the domain where `Omega^2` is defined.
pub fn momentum_residual(
    rho: &ScalarField,
    p: &ScalarField,
    omega2: &MaskedField,
    potential: &PotentialResult,
    domain: &StarDomain,
) -> Result<(f64, f64)> {
    let g = *rho.grid();
    g.check_same(p.grid())?;
    let (pr, pz) = gradient_rz(p)?;
    let (br, bz) = &potential.gradient;
    let inner = domain.interior(1);
    let mut scale = 0.0f64;
    for k in 0..g.len() {
        if domain.mask()[k] {
            scale = scale.max(rho.values()[k] * br.values()[k].hypot(bz.values()[k]));
        }
    }
    if scale == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (mut er, mut ez) = (0.0f64, 0.0f64);
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let k = g.idx(i, j);
            if !(inner[k] && omega2.mask[k]) {
                continue;
            }
            let d = rho.values()[k];
            let rr = pr.values()[k] - d * br.values()[k] - d * g.r(i) * omega2.field.values()[k];
            let zz = pz.values()[k] - d * bz.values()[k];
            er = er.max(rr.abs());
            ez = ez.max(zz.abs());
        }
    }
    Ok((er / scale, ez / scale))
}

/// Curl-identity defect of a reconstructed triple over
/// `{ rho >= 0.1 max rho }` one cell inside the domain, normalised by the
/// largest of the two cancelling terms.
pub fn curl_defect(rho: &ScalarField, p: &ScalarField, omega2: &MaskedField, domain: &StarDomain) -> Result<f64> {
    let g = *rho.grid();
    let prof = RotationProfile::Sampled {
        forcing: ScalarField::zeros(g, Parity::Even),
        omega2: omega2.field.clone(),
    };
    let res = curl_theta_residual(p, rho, &prof)?;
    let (pr, pz) = gradient_rz(p)?;
    let (rr, rz) = gradient_rz(rho)?;
    let inner = domain.interior(1);
    let cut = 0.1 * rho.max();
    // Difference quotients reaching a zero-density node see the boundary
    // singularity of rho (e.g. rho ~ dist^q with q < 1), not the identity.
    let positive = |i: usize, j: usize| rho.at(i, j) > 0.0;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..g.len() {
        let d = rho.values()[k];
        if !(inner[k] && d >= cut && res.mask[k] && omega2.mask[k]) {
            continue;
        }
        let (i, j) = (k / g.nz(), k % g.nz());
        if !(positive(i + 1, j) && positive(i.saturating_sub(1), j) && positive(i, j + 1) && positive(i, j - 1)) {
            continue;
        }
        let a = (pz.values()[k] * rr.values()[k]).abs() / (d * d);
        let b = (pr.values()[k] * rz.values()[k]).abs() / (d * d);
        scale = scale.max(a.max(b));
        worst = worst.max(res.field.values()[k].abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Everything produced by one reconstruction.
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub rho: ScalarField,
    pub domain: StarDomain,
    pub potential: PotentialResult,
    pub pressure: ScalarField,
    pub omega2: MaskedField,
    pub report: HypothesisReport,
    /// Nodes where the reconstructed `Omega^2` is negative beyond tolerance.
    pub negative_omega2: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Full reconstruction on `grid`. Constructions are emitted even when
/// hypotheses fail; failures appear in `report` and `warnings`.
pub fn reconstruct(spec: &DensitySpec, grid: &GridSpec, mode: CheckMode) -> Result<InverseResult> {
    let rho = spec.sample(grid)?;
    let domain = spec.domain(grid)?;
    let potential = potential_axisym(&rho)?;
    let report = check_hypotheses(spec, &potential, mode)?;
    let mut warnings = Vec::new();
    if !report.holds("h2") {
        warnings.push(format!("density is not z-even (asymmetry {:e})", report.h2_asymmetry));
    }
    if !report.holds("h4") {
        warnings.push(format!("rho_z is not positive below the equator (min {:e})", report.h4_min));
    }
    let pressure = pressure_from_density(spec, &potential)?;
    let omega2 = omega2_from_density(spec, &potential)?;
    let om_max = omega2.max_abs();
    let mut negative_omega2 = Vec::new();
    for i in 0..grid.nr() {
        for j in 0..grid.nz() {
            let k = grid.idx(i, j);
            if omega2.mask[k] && omega2.field.values()[k] < -1e-6 * om_max {
                negative_omega2.push((i, j));
            }
        }
    }
    if report.h3_status == H3Status::QuadratureAmbiguous {
        warnings.push(format!(
            "cross-gradient term slightly negative (min {:e} at r={:.4}, z={:.4}), within quadrature error",
            report.h3_min, report.h3_argmin.0, report.h3_argmin.1
        ));
    }
    if report.h3_status == H3Status::Violated {
        warnings.push(format!(
            "cross-gradient term is negative (min {:e} at r={:.4}, z={:.4}); {} nodes with Omega^2 < 0",
            report.h3_min,
            report.h3_argmin.0,
            report.h3_argmin.1,
            negative_omega2.len()
        ));
    }
    Ok(InverseResult {
        rho,
        domain,
        potential,
        pressure,
        omega2,
        report,
        negative_omega2,
        warnings,
    })
}
