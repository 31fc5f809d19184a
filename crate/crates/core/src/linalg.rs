//! The weighted elliptic operator with zero Dirichlet data, in symmetric
//! (measure-weighted) form, and a banded Cholesky solver for it.
//!
//! Unknowns are ordered with `r` varying fastest, so the stiffness matrix has
//! half-bandwidth `nr`. Nodes outside the active set carry identity rows.

use crate::error::{Error, Result};
use crate::field::{cell_measure, GridSpec, ScalarField};
use std::f64::consts::PI;

/// Lower-triangular band storage of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    b: usize,
    // Row i holds columns i-b ..= i; the diagonal sits at offset b.
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.b);
        i * (self.b + 1) + (j + self.b - i)
    }

    /// Add `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.b {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(b));
                // sum_k L[i][k] L[j][k] over k in k0..j
                let li = i * w + (k0 + b - i);
                let lj = j * w + (k0 + b - j);
                let len = j - k0;
                let dot: f64 = self.data[li..li + len]
                    .iter()
                    .zip(&self.data[lj..lj + len])
                    .map(|(a, c)| a * c)
                    .sum();
                let s = i * w + (j + b - i);
                let v = self.data[s] - dot;
                if i == j {
                    if !(v > 0.0) {
                        return Err(Error::Internal(format!(
                            "matrix is not positive definite at row {i} (pivot {v:e})"
                        )));
                    }
                    self.data[s] = v.sqrt();
                } else {
                    self.data[s] = v / self.data[j * w + b];
                }
            }
        }
        Ok(BandedCholesky {
            n,
            b,
            data: self.data,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (b, w) = (self.b, self.b + 1);
        for i in 0..self.n {
            let k0 = i.saturating_sub(b);
            let row = &self.data[i * w + (k0 + b - i)..i * w + b];
            let dot: f64 = row.iter().zip(&x[k0..i]).map(|(a, c)| a * c).sum();
            x[i] = (x[i] - dot) / self.data[i * w + b];
        }
        for i in (0..self.n).rev() {
            x[i] /= self.data[i * w + b];
            let xi = x[i];
            let k0 = i.saturating_sub(b);
            let row = &self.data[i * w + (k0 + b - i)..i * w + b];
            for (xk, l) in x[k0..i].iter_mut().zip(row) {
                *xk -= l * xi;
            }
        }
    }
}

/// `-div(a grad .)` on the active nodes, multiplied by the cell measure, with
/// `w = 0` imposed on every inactive node.
///
/// In this form the operator is the graph Laplacian with face conductances
/// `2 pi hz r_{i+1/2} a_{i+1/2} / hr` (radial faces) and
/// `2 pi V_i a_{j+1/2} / hz` (axial faces); it matches
/// [`crate::field::div_weighted_grad`] row by row on active nodes.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    grid: GridSpec,
    active: Vec<bool>,
    measure: Vec<f64>,
    cr: Vec<f64>,
    cz: Vec<f64>,
}

impl DirichletOperator {
    /// Active nodes must stay clear of the outer grid edges.
    pub fn new(weight: &ScalarField, active: Vec<bool>) -> Result<Self> {
        let g = *weight.grid();
        if active.len() != g.len() {
            return Err(Error::GridMismatch("active mask size".into()));
        }
        if weight.values().iter().any(|&a| a <= 0.0) {
            return Err(Error::Domain("operator weight must be positive".into()));
        }
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                if active[g.idx(i, j)] && (i + 1 == g.nr() || j == 0 || j + 1 == g.nz()) {
                    return Err(Error::Domain(format!(
                        "active node ({i}, {j}) lies on the grid edge"
                    )));
                }
            }
        }
        let (hr, hz) = (g.hr(), g.hz());
        let a = |i: usize, j: usize| weight.at(i, j);
        let mut cr = vec![0.0; g.len()];
        let mut cz = vec![0.0; g.len()];
        for i in 0..g.nr() {
            let vi = if i == 0 { hr * hr / 8.0 } else { g.r(i) * hr };
            for j in 0..g.nz() {
                let k = g.idx(i, j);
                if i + 1 < g.nr() {
                    let rf = (i as f64 + 0.5) * hr;
                    cr[k] = 2.0 * PI * hz * rf * 0.5 * (a(i, j) + a(i + 1, j)) / hr;
                }
                if j + 1 < g.nz() {
                    cz[k] = 2.0 * PI * vi * 0.5 * (a(i, j) + a(i, j + 1)) / hz;
                }
            }
        }
        Ok(Self {
            grid: g,
            measure: cell_measure(&g),
            active,
            cr,
            cz,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn active(&self) -> &[bool] {
        &self.active
    }
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// `out = A w`, where `A = -M L`; inactive entries of `w` are ignored and
    /// inactive entries of `out` are zero.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let nz = g.nz();
        let act = &self.active;
        let val = |k: usize| if act[k] { w[k] } else { 0.0 };
        crate::par::fill_indexed(out, |k| {
            if !act[k] {
                return 0.0;
            }
            let (i, j) = (k / nz, k % nz);
            let wk = w[k];
            let mut acc = self.cr[k] * (wk - val(k + nz)) + self.cz[k] * (wk - val(k + 1));
            acc += self.cz[k - 1] * (wk - val(k - 1));
            if i > 0 {
                acc += self.cr[k - nz] * (wk - val(k - nz));
            }
            let _ = j;
            acc
        });
    }

    /// `L w` on active nodes (zero elsewhere).
    pub fn apply_strong(&self, w: &[f64], out: &mut [f64]) {
        self.apply(w, out);
        for ((o, m), &a) in out.iter_mut().zip(&self.measure).zip(&self.active) {
            *o = if a { -*o / m } else { 0.0 };
        }
    }

    /// `1/2 w^T A w`, accumulated face by face in row-major order.
    pub fn dirichlet_energy(&self, w: &[f64]) -> f64 {
        let g = self.grid;
        let nz = g.nz();
        let val = |k: usize| if self.active[k] { w[k] } else { 0.0 };
        let mut acc = 0.0;
        for i in 0..g.nr() {
            for j in 0..nz {
                let k = g.idx(i, j);
                if i + 1 < g.nr() {
                    let d = val(k) - val(k + nz);
                    acc += self.cr[k] * d * d;
                }
                if j + 1 < nz {
                    let d = val(k) - val(k + 1);
                    acc += self.cz[k] * d * d;
                }
            }
        }
        0.5 * acc
    }

    /// Factor `A + diag(sigma * measure)` restricted to the active set.
    pub fn factor(&self, sigma: f64) -> Result<BandedCholesky> {
        let g = self.grid;
        let (nr, nz) = (g.nr(), g.nz());
        let n = g.len();
        // Position in r-fastest order.
        let pos = |i: usize, j: usize| j * nr + i;
        let mut m = BandedSpd::zeros(n, nr);
        for i in 0..nr {
            for j in 0..nz {
                let k = g.idx(i, j);
                let p = pos(i, j);
                if !self.active[k] {
                    m.add(p, p, 1.0);
                    continue;
                }
                let mut diag = sigma * self.measure[k] + self.cr[k] + self.cz[k] + self.cz[k - 1];
                if i > 0 {
                    diag += self.cr[k - nz];
                }
                m.add(p, p, diag);
                if self.active[k + nz] {
                    m.add(pos(i + 1, j), p, -self.cr[k]);
                }
                if self.active[k + 1] {
                    m.add(pos(i, j + 1), p, -self.cz[k]);
                }
            }
        }
        m.factor()
    }

    /// Solve `(A + sigma M) x = rhs` given a factor from [`Self::factor`];
    /// `rhs` and the result are in grid order, zero on inactive nodes.
    pub fn solve(&self, chol: &BandedCholesky, rhs: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (nr, nz) = (g.nr(), g.nz());
        let mut x = vec![0.0; g.len()];
        for i in 0..nr {
            for j in 0..nz {
                let k = g.idx(i, j);
                if self.active[k] {
                    x[j * nr + i] = rhs[k];
                }
            }
        }
        chol.solve_in_place(&mut x);
        let mut out = vec![0.0; g.len()];
        for i in 0..nr {
            for j in 0..nz {
                let k = g.idx(i, j);
                if self.active[k] {
                    out[k] = x[j * nr + i];
                }
            }
        }
        out
    }

    /// Solve the strong-form problem `-L u + sigma u = g` on the active set.
    pub fn solve_strong(&self, chol: &BandedCholesky, g: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = g
            .iter()
            .zip(&self.measure)
            .zip(&self.active)
            .map(|((v, m), &a)| if a { v * m } else { 0.0 })
            .collect();
        self.solve(chol, &rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{div_weighted_grad, Parity};

    #[test]
    fn banded_cholesky_matches_dense_solution() {
        // Tridiagonal-plus SPD matrix with bandwidth 2.
        let n = 12;
        let mut m = BandedSpd::zeros(n, 2);
        for i in 0..n {
            m.add(i, i, 6.0 + i as f64 * 0.1);
            if i >= 1 {
                m.add(i, i - 1, -1.5);
            }
            if i >= 2 {
                m.add(i, i - 2, 0.5);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += m.get(i, j) * x_true[j];
            }
        }
        let chol = m.factor().unwrap();
        chol.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut m = BandedSpd::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(1, 0, 2.0);
        m.add(2, 2, 1.0);
        assert!(m.factor().is_err());
    }

    fn ball_mask(g: &GridSpec, rad: f64) -> Vec<bool> {
        let mut act = vec![false; g.len()];
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                act[g.idx(i, j)] = g.r(i).hypot(g.z(j)) < rad;
            }
        }
        act
    }

    #[test]
    fn operator_matches_field_divergence() {
        let g = GridSpec::square(25, 1.5).unwrap();
        let a = ScalarField::from_fn(g, Parity::Even, |r, z| (0.2 * r - 0.3 * z * z).exp()).unwrap();
        let act = ball_mask(&g, 1.0);
        let w = ScalarField::from_fn(g, Parity::Even, |r, z| (1.0 - r * r - z * z).max(0.0).powi(2))
            .unwrap();
        let op = DirichletOperator::new(&a, act.clone()).unwrap();
        let mut lw = vec![0.0; g.len()];
        op.apply_strong(w.values(), &mut lw);
        // Zero the field off the active set, as the operator assumes.
        let masked = ScalarField::from_values(
            g,
            w.values().iter().zip(&act).map(|(&v, &m)| if m { v } else { 0.0 }).collect(),
            Parity::Even,
        )
        .unwrap();
        let d = div_weighted_grad(&masked, &a).unwrap();
        for k in 0..g.len() {
            if act[k] {
                assert!((lw[k] - d.values()[k]).abs() < 1e-10 * (1.0 + d.values()[k].abs()));
            }
        }
    }

    #[test]
    fn energy_is_half_quadratic_form() {
        let g = GridSpec::square(17, 1.2).unwrap();
        let a = ScalarField::from_fn(g, Parity::Even, |r, z| 1.0 + 0.5 * r * r + z * z).unwrap();
        let act = ball_mask(&g, 1.0);
        let op = DirichletOperator::new(&a, act).unwrap();
        let w: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 13) as f64 / 13.0).collect();
        let mut aw = vec![0.0; g.len()];
        op.apply(&w, &mut aw);
        let quad: f64 = w
            .iter()
            .zip(&aw)
            .zip(op.active())
            .map(|((x, y), &m)| if m { x * y } else { 0.0 })
            .sum();
        assert!((0.5 * quad - op.dirichlet_energy(&w)).abs() < 1e-12 * quad.abs());
    }

    #[test]
    fn direct_solve_inverts_apply() {
        let g = GridSpec::square(21, 1.2).unwrap();
        let a = ScalarField::from_fn(g, Parity::Even, |r, z| (-0.1 * (r * r + z * z)).exp()).unwrap();
        let op = DirichletOperator::new(&a, ball_mask(&g, 1.0)).unwrap();
        let chol = op.factor(0.0).unwrap();
        let src: Vec<f64> = (0..g.len()).map(|k| 1.0 + (k as f64).sin()).collect();
        let u = op.solve_strong(&chol, &src);
        let mut lu = vec![0.0; g.len()];
        op.apply_strong(&u, &mut lu);
        for k in 0..g.len() {
            if op.active()[k] {
                assert!((-lu[k] - src[k]).abs() < 1e-9, "{k}");
            } else {
                assert_eq!(u[k], 0.0);
            }
        }
    }

    #[test]
    fn edge_nodes_cannot_be_active() {
        let g = GridSpec::square(9, 1.0).unwrap();
        let a = ScalarField::constant(g, 1.0).unwrap();
        let mut act = vec![false; g.len()];
        act[g.idx(8, 8)] = true;
        assert!(DirichletOperator::new(&a, act).is_err());
    }
}
