//! Finite-difference operators and quadrature on axisymmetric grids.
//!
//! Conventions shared by every solver in the crate:
//! - gradients are second-order central in the interior and second-order
//!   one-sided on the outer edges; the axis uses the parity extension;
//! - the weighted divergence is written in flux form with arithmetic-mean face
//!   coefficients, so that after multiplication by [`cell_measure`] it is a
//!   symmetric matrix;
//! - reductions run sequentially in row-major order.

use super::{GridSpec, MaskedField, Parity, ScalarField, StarDomain};
use crate::eos::RotationProfile;
use crate::error::{Error, Result};
use crate::par;
use std::f64::consts::PI;

/// Partial derivatives `(d/dr, d/dz)`. The radial derivative flips parity.
pub fn gradient_rz(field: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let g = *field.grid();
    let (nr, nz) = (g.nr(), g.nz());
    let (hr, hz) = (g.hr(), g.hz());
    let v = field.values();
    let sign = field.parity().sign();
    let f = |i: usize, j: usize| v[i * nz + j];

    let mut dr = vec![0.0; g.len()];
    par::fill_indexed(&mut dr, |k| {
        let (i, j) = (k / nz, k % nz);
        if i == 0 {
            // f(-h) = sign * f(h)
            (f(1, j) - sign * f(1, j)) / (2.0 * hr)
        } else if i + 1 == nr {
            (3.0 * f(i, j) - 4.0 * f(i - 1, j) + f(i - 2, j)) / (2.0 * hr)
        } else {
            (f(i + 1, j) - f(i - 1, j)) / (2.0 * hr)
        }
    });

    let mut dz = vec![0.0; g.len()];
    par::fill_indexed(&mut dz, |k| {
        let (i, j) = (k / nz, k % nz);
        if j == 0 {
            (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) / (2.0 * hz)
        } else if j + 1 == nz {
            (3.0 * f(i, j) - 4.0 * f(i, j - 1) + f(i, j - 2)) / (2.0 * hz)
        } else {
            (f(i, j + 1) - f(i, j - 1)) / (2.0 * hz)
        }
    });

    Ok((
        ScalarField::from_values(g, dr, field.parity().flip())?,
        ScalarField::from_values(g, dz, field.parity())?,
    ))
}

/// Axisymmetric `div(weight * grad w)` in flux form:
/// `(1/r) d/dr (r a dw/dr) + d/dz (a dw/dz)`, with the axis row replaced by the
/// even-extension limit `2 a d2w/dr2`. Outer edge nodes use quadratically
/// extrapolated ghost values.
pub fn div_weighted_grad(w: &ScalarField, weight: &ScalarField) -> Result<ScalarField> {
    w.grid().check_same(weight.grid())?;
    if w.parity() != Parity::Even || weight.parity() != Parity::Even {
        return Err(Error::Domain(
            "the axisymmetric divergence needs even fields".into(),
        ));
    }
    if let Some(k) = weight.values().iter().position(|&a| a <= 0.0) {
        let g = weight.grid();
        return Err(Error::Domain(format!(
            "weight must be positive, found {} at node ({}, {})",
            weight.values()[k],
            k / g.nz(),
            k % g.nz()
        )));
    }
    let g = *w.grid();
    let (nr, nz) = (g.nr() as isize, g.nz() as isize);
    let (hr, hz) = (g.hr(), g.hz());
    let wv = w.values();
    let av = weight.values();

    // Values at (i, j) with ghost extrapolation past the outer edges and
    // even reflection across the axis.
    let ext = |v: &[f64], i: isize, j: isize| -> f64 {
        let at = |i: isize, j: isize| v[(i * nz + j) as usize];
        let i = i.abs();
        match (i >= nr, j < 0, j >= nz) {
            (false, false, false) => at(i, j),
            (true, false, false) => 3.0 * at(nr - 1, j) - 3.0 * at(nr - 2, j) + at(nr - 3, j),
            (false, true, false) => 3.0 * at(i, 0) - 3.0 * at(i, 1) + at(i, 2),
            (false, false, true) => 3.0 * at(i, nz - 1) - 3.0 * at(i, nz - 2) + at(i, nz - 3),
            _ => {
                // Corner ghost: extrapolate in r from z-ghosts.
                let jj = j.clamp(0, nz - 1);
                let sgn = if j < 0 { 1 } else { -1 };
                let col = |ii: isize| {
                    let a0 = at(ii, jj);
                    let a1 = at(ii, jj + sgn);
                    let a2 = at(ii, jj + 2 * sgn);
                    3.0 * a0 - 3.0 * a1 + a2
                };
                3.0 * col(nr - 1) - 3.0 * col(nr - 2) + col(nr - 3)
            }
        }
    };
    // Face coefficients stay positive: ghost weights copy the edge value.
    let coef = |i: isize, j: isize| -> f64 {
        let i = i.abs().min(nr - 1);
        let j = j.clamp(0, nz - 1);
        av[(i * nz + j) as usize]
    };

    let mut out = vec![0.0; g.len()];
    par::fill_indexed(&mut out, |k| {
        let i = (k / g.nz()) as isize;
        let j = (k % g.nz()) as isize;
        let w0 = ext(wv, i, j);
        let a0 = coef(i, j);
        let radial = if i == 0 {
            let a_half = 0.5 * (a0 + coef(1, j));
            4.0 * a_half * (ext(wv, 1, j) - w0) / (hr * hr)
        } else {
            let r = i as f64 * hr;
            let rp = r + 0.5 * hr;
            let rm = r - 0.5 * hr;
            let ap = 0.5 * (a0 + coef(i + 1, j));
            let am = 0.5 * (a0 + coef(i - 1, j));
            (rp * ap * (ext(wv, i + 1, j) - w0) - rm * am * (w0 - ext(wv, i - 1, j)))
                / (r * hr * hr)
        };
        let ap = 0.5 * (a0 + coef(i, j + 1));
        let am = 0.5 * (a0 + coef(i, j - 1));
        let axial = (ap * (ext(wv, i, j + 1) - w0) - am * (w0 - ext(wv, i, j - 1))) / (hz * hz);
        radial + axial
    });
    ScalarField::from_values(g, out, Parity::Even)
}

/// Axisymmetric Laplacian (unit weight).
pub fn laplacian(w: &ScalarField) -> Result<ScalarField> {
    let one = ScalarField::constant(*w.grid(), 1.0)?;
    div_weighted_grad(w, &one)
}

/// Finite-volume measure `2 pi * V_i * hz` of the control volume around each
/// node, with `V_0 = hr^2 / 8` on the axis and `V_i = r_i hr` elsewhere.
/// Multiplying [`div_weighted_grad`] rows by this measure yields a symmetric
/// operator; the discrete energies of the solvers use the same measure.
pub fn cell_measure(g: &GridSpec) -> Vec<f64> {
    let (hr, hz) = (g.hr(), g.hz());
    let mut m = Vec::with_capacity(g.len());
    for i in 0..g.nr() {
        let v = if i == 0 { hr * hr / 8.0 } else { g.r(i) * hr };
        m.extend(std::iter::repeat(2.0 * PI * v * hz).take(g.nz()));
    }
    m
}

/// Trapezoid weights for `int f 2 pi r dr dz`. The axis column has zero
/// weight.
fn trapezoid_weight(g: &GridSpec, i: usize, j: usize) -> f64 {
    let wr = if i + 1 == g.nr() { 0.5 } else { 1.0 } * 2.0 * PI * g.r(i) * g.hr();
    let wz = if j == 0 || j + 1 == g.nz() { 0.5 } else { 1.0 } * g.hz();
    wr * wz
}

/// `int field * 2 pi r dr dz` by tensor-product trapezoid weights, restricted
/// to the domain mask when one is given.
pub fn integrate_axisym(field: &ScalarField, mask: Option<&StarDomain>) -> Result<f64> {
    let g = *field.grid();
    if let Some(d) = mask {
        g.check_same(d.grid())?;
    }
    let mut acc = 0.0;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            if mask.map_or(true, |d| d.contains(i, j)) {
                acc += trapezoid_weight(&g, i, j) * field.at(i, j);
            }
        }
    }
    Ok(acc)
}

/// Trapezoid integral over the nodes flagged in `mask`.
pub fn integrate_masked(field: &ScalarField, mask: &[bool]) -> f64 {
    let g = *field.grid();
    let mut acc = 0.0;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            if mask[g.idx(i, j)] {
                acc += trapezoid_weight(&g, i, j) * field.at(i, j);
            }
        }
    }
    acc
}

/// Pointwise defect of the curl identity
/// `(p_z rho_r - p_r rho_z) / rho^2 - r dOmega2/dz`.
/// Nodes with `rho <= 0` are masked out.
pub fn curl_theta_residual(
    p: &ScalarField,
    rho: &ScalarField,
    omega2: &RotationProfile,
) -> Result<MaskedField> {
    p.grid().check_same(rho.grid())?;
    let g = *p.grid();
    let (pr, pz) = gradient_rz(p)?;
    let (rr, rz) = gradient_rz(rho)?;
    let om = omega2.omega2_field(&g)?;
    let (_, omz) = gradient_rz(&om)?;
    let mut vals = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let k = g.idx(i, j);
            let d = rho.values()[k];
            if d <= 0.0 {
                continue;
            }
            let lhs = (pz.values()[k] * rr.values()[k] - pr.values()[k] * rz.values()[k]) / (d * d);
            vals[k] = lhs - g.r(i) * omz.values()[k];
            mask[k] = true;
        }
    }
    Ok(MaskedField {
        field: ScalarField::from_values(g, vals, Parity::Even)?,
        mask,
    })
}
