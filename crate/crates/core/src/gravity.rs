//! Newtonian potential `B rho(x) = int rho(y) / |x - y| dy` of an axisymmetric
//! density (`G = 1`, attractive sign: `B rho >= 0`).
//!
//! Azimuthal integration reduces the kernel to rings:
//! `B rho(r, z) = int int rho(r', z') 4 r' K(m) / S dr' dz'` with
//! `S^2 = (r + r')^2 + (z - z')^2` and `m = 4 r r' / S^2`.

use crate::error::{Error, Result};
use crate::field::{gradient_rz, laplacian, GridSpec, Parity, ScalarField};
use crate::par;
use std::f64::consts::{FRAC_PI_2, PI};

/// Complete elliptic integral of the first kind in the parameter convention,
/// `K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt`.
pub fn complete_elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("K(m) needs 0 <= m < 1, got {m}")));
    }
    Ok(k_complementary(1.0 - m))
}

/// `K` as a function of the complementary parameter `mc = 1 - m`, which keeps
/// full relative precision near the logarithmic singularity.
#[inline]
fn k_complementary(mc: f64) -> f64 {
    let mut a = 1.0;
    let mut g = mc.sqrt();
    // Quadratic convergence: 1e-15 is reached in at most ~6 steps for
    // mc >= 1e-300.
    for _ in 0..40 {
        if (a - g).abs() <= 1e-15 * a {
            break;
        }
        let an = 0.5 * (a + g);
        g = (a * g).sqrt();
        a = an;
    }
    FRAC_PI_2 / a
}

/// Ring kernel `4 r' K(m) / S` for a target at radius `r` and a source ring at
/// radius `rs`, separated by `dz` along the axis.
#[inline]
fn ring_kernel(r: f64, rs: f64, dz: f64) -> f64 {
    let s2 = (r + rs) * (r + rs) + dz * dz;
    let mc = ((r - rs) * (r - rs) + dz * dz) / s2;
    4.0 * rs * k_complementary(mc) / s2.sqrt()
}

#[derive(Debug, Clone)]
pub struct PotentialResult {
    pub potential: ScalarField,
    /// `(d/dr, d/dz)` of the potential.
    pub gradient: (ScalarField, ScalarField),
    /// `int rho 2 pi r dr dz`.
    pub source_mass: f64,
}

/// Near-field reach, in cells, of the accurate cell integrals.
const NEAR: usize = 2;

/// `int int log(x^2 + y^2) dx dy` over `[0, a] x [0, b]`.
fn log_rect(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    a * b * (a * a + b * b).ln() - 3.0 * a * b + a * a * (b / a).atan() + b * b * (a / b).atan()
}

/// 4-point Gauss–Legendre on `[-1, 1]`.
const GL_X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// `int int_cell ring_kernel(r, r', z') dr' dz'` over `[r0, r1] x [z0, z1]`
/// (offsets relative to the target). When `singular`, the target sits at
/// the cell centre and `-2 log d` is integrated in closed form.
fn cell_integral(r: f64, r0: f64, r1: f64, z0: f64, z1: f64, singular: bool) -> f64 {
    const SUB: usize = 6;
    let (dr, dz) = ((r1 - r0) / SUB as f64, (z1 - z0) / SUB as f64);
    let mut acc = 0.0;
    for a in 0..SUB {
        let ca = r0 + (a as f64 + 0.5) * dr;
        for b in 0..SUB {
            let cb = z0 + (b as f64 + 0.5) * dz;
            for (xa, wa) in GL_X.iter().zip(&GL_W) {
                let rs = ca + 0.5 * dr * xa;
                for (xb, wb) in GL_X.iter().zip(&GL_W) {
                    let zz = cb + 0.5 * dz * xb;
                    let mut k = ring_kernel(r, rs, zz);
                    if singular {
                        let d2 = (rs - r) * (rs - r) + zz * zz;
                        k += d2.ln(); // + 2 log d
                    }
                    acc += wa * wb * k;
                }
            }
        }
    }
    acc *= 0.25 * dr * dz;
    if singular {
        let (a, b) = (0.5 * (r1 - r0), 0.5 * (z1 - z0));
        acc -= 4.0 * log_rect(a, b);
    }
    acc
}

/// Cell integrals of the ring kernel for sources within [`NEAR`] cells of
/// each target column, divided by the cell area so they replace point
/// values of the kernel. Indexed `[i][is - i + NEAR][|dj|]`.
fn near_field_table(g: &GridSpec) -> Vec<[[f64; NEAR + 1]; 2 * NEAR + 1]> {
    let (hr, hz) = (g.hr(), g.hz());
    let mut table = vec![[[0.0; NEAR + 1]; 2 * NEAR + 1]; g.nr()];
    for (i, row) in table.iter_mut().enumerate() {
        let r = g.r(i);
        for (off, col) in row.iter_mut().enumerate() {
            let is = i as isize + off as isize - NEAR as isize;
            if is < 0 || is >= g.nr() as isize {
                continue;
            }
            let rs = g.r(is as usize);
            let (r0, r1) = ((rs - 0.5 * hr).max(0.0), rs + 0.5 * hr);
            for (dj, v) in col.iter_mut().enumerate() {
                let zc = dj as f64 * hz;
                let singular = dj == 0 && is as usize == i && i > 0;
                *v = cell_integral(r, r0, r1, zc - 0.5 * hz, zc + 0.5 * hz, singular) / (hr * hz);
            }
        }
    }
    table
}

/// Potential of `rho` at every grid node by direct ring summation.
///
/// The source must vanish on the two outermost node layers. Far cells use
/// the midpoint rule; cells within two nodes of the target are integrated
/// accurately, with the logarithmic singularity of the self cell removed in
/// closed form and the half cell `[0, hr/2]` on the axis included.
pub fn potential_axisym(rho: &ScalarField) -> Result<PotentialResult> {
    let g = *rho.grid();
    let (nr, nz) = (g.nr(), g.nz());
    if let Some(k) = rho.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "density is negative at node ({}, {})",
            k / nz,
            k % nz
        )));
    }
    for i in 0..nr {
        for j in 0..nz {
            let edge = i + 2 >= nr || j < 2 || j + 2 >= nz;
            if edge && rho.at(i, j) != 0.0 {
                return Err(Error::SupportViolation { i, j });
            }
        }
    }

    let (hr, hz) = (g.hr(), g.hz());
    let cell = hr * hz;

    // Nonzero z-range of each source column.
    let ranges: Vec<Option<(usize, usize)>> = (0..nr)
        .map(|i| {
            let col = &rho.values()[i * nz..(i + 1) * nz];
            let lo = col.iter().position(|&v| v != 0.0)?;
            let hi = col.iter().rposition(|&v| v != 0.0)?;
            Some((lo, hi))
        })
        .collect();
    let near = near_field_table(&g);

    let even = rho.is_z_even();
    let jmax = if even { g.center() + 1 } else { nz };

    let mut out = vec![0.0; g.len()];
    par::fill_chunks(&mut out, nz, |i, col| {
        let r = g.r(i);
        // Point values of the kernel for every source column (the singular
        // self value is never read: its cell is in the near field).
        let mut point = vec![0.0; nr * nz];
        for is in 1..nr {
            let rs = g.r(is);
            for k in 0..nz {
                if !(is == i && k == 0) {
                    point[is * nz + k] = ring_kernel(r, rs, k as f64 * hz);
                }
            }
        }
        let pv = |is: usize, k: usize| point[is * nz + k];
        let mut kernel = vec![0.0; nz];
        for (is, range) in ranges.iter().enumerate() {
            let Some((lo, hi)) = *range else { continue };
            let close = is.abs_diff(i) <= NEAR;
            for (k, kv) in kernel.iter_mut().enumerate() {
                *kv = if close && k <= NEAR {
                    near[i][is + NEAR - i][k]
                } else if is == 0 {
                    // Half cell [0, hr/2] at its midpoint.
                    0.5 * ring_kernel(r, 0.25 * hr, k as f64 * hz)
                } else {
                    // Midpoint rule with its leading error term,
                    // (h^2/24)(k_rr + k_zz), from second differences.
                    let c = pv(is, k);
                    let dzz = if k + 1 < nz {
                        pv(is, k + 1) - 2.0 * c + pv(is, k.abs_diff(1))
                    } else {
                        0.0
                    };
                    let drr = if is + 1 < nr { pv(is + 1, k) - 2.0 * c + pv(is - 1, k) } else { 0.0 };
                    c + (dzz + drr) / 24.0
                };
            }
            let src = &rho.values()[is * nz..(is + 1) * nz];
            for (j, v) in col.iter_mut().enumerate().take(jmax) {
                let mut acc = 0.0;
                for (jj, &s) in src.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += s * kernel[j.abs_diff(jj)];
                }
                *v += acc * cell;
            }
        }
        if even {
            for j in 0..g.center() {
                col[nz - 1 - j] = col[j];
            }
        }
    });

    let mut mass = 0.0;
    for i in 0..nr {
        for j in 0..nz {
            mass += 2.0 * PI * g.r(i) * cell * rho.at(i, j);
        }
    }
    let potential = ScalarField::from_values(g, out, Parity::Even)?;
    let gradient = gradient_rz(&potential)?;
    Ok(PotentialResult {
        potential,
        gradient,
        source_mass: mass,
    })
}

/// Nodes whose `layers`-neighbourhood lies entirely inside, or entirely
/// outside, `{rho > 0}`, excluding the outer grid edges.
fn away_from_support_boundary(rho: &ScalarField, layers: usize) -> Vec<bool> {
    let g = *rho.grid();
    let l = layers as isize;
    let mut keep = vec![false; g.len()];
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            if i + 1 >= g.nr() || j == 0 || j + 1 >= g.nz() {
                continue;
            }
            let inside = rho.at(i, j) > 0.0;
            let mut ok = true;
            'scan: for di in -l..=l {
                for dj in -l..=l {
                    let ii = (i as isize + di).unsigned_abs();
                    let jj = j as isize + dj;
                    if ii >= g.nr() || jj < 0 || jj >= g.nz() as isize {
                        continue;
                    }
                    if (rho.at(ii, jj as usize) > 0.0) != inside {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            keep[g.idx(i, j)] = ok;
        }
    }
    keep
}

/// Max of `|Laplacian(B rho) + 4 pi rho| / (4 pi max rho)` over nodes at least
/// three cells from the support boundary.
pub fn poisson_residual(result: &PotentialResult, rho: &ScalarField) -> Result<f64> {
    result.potential.grid().check_same(rho.grid())?;
    let scale = 4.0 * PI * rho.max();
    if scale <= 0.0 {
        return Ok(result.potential.max_abs());
    }
    let lap = laplacian(&result.potential)?;
    let keep = away_from_support_boundary(rho, 3);
    let mut worst = 0.0f64;
    for (k, &ok) in keep.iter().enumerate() {
        if ok {
            worst = worst.max((lap.values()[k] + 4.0 * PI * rho.values()[k]).abs());
        }
    }
    Ok(worst / scale)
}

/// Closed-form potential of a uniform ball of unit density and radius `a`.
pub fn uniform_ball_potential(a: f64, dist: f64) -> f64 {
    if dist <= a {
        2.0 * PI * (a * a - dist * dist / 3.0)
    } else {
        4.0 * PI * a * a * a / (3.0 * dist)
    }
}

/// Uniform unit-density ball of radius `a` sampled on `grid`.
pub fn uniform_ball(grid: &GridSpec, a: f64) -> Result<ScalarField> {
    ScalarField::from_fn(*grid, Parity::Even, |r, z| if r * r + z * z <= a * a { 1.0 } else { 0.0 })
}
