//! Axisymmetric grids and sampled fields on the meridian half-plane `r >= 0`.

mod axifield;
mod ops;

pub use axifield::{format_axifield, parse_axifield, read_axifield, write_axifield, AXIFIELD_MAGIC};
pub use ops::{
    cell_measure, curl_theta_residual, div_weighted_grad, gradient_rz, integrate_axisym,
    integrate_masked, laplacian,
};

use crate::error::{Error, Result};

/// Uniform tensor grid in `(r, z)`. Radial nodes start at the axis and the
/// axial range is symmetric about `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    nr: usize,
    nz: usize,
    rmax: f64,
    zmax: f64,
}

impl GridSpec {
    pub const MIN_NODES: usize = 8;

    /// `nz` must be odd so that the equatorial plane is a grid row.
    pub fn new(nr: usize, nz: usize, rmax: f64, zmax: f64) -> Result<Self> {
        if nr < Self::MIN_NODES || nz < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} nodes per direction, got {nr}x{nz}",
                Self::MIN_NODES
            )));
        }
        if nz % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "nz must be odd so z = 0 is a node, got {nz}"
            )));
        }
        if !(rmax.is_finite() && rmax > 0.0 && zmax.is_finite() && zmax > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got rmax={rmax} zmax={zmax}"
            )));
        }
        Ok(Self { nr, nz, rmax, zmax })
    }

    /// Grid with equal spacing in both directions covering `[0, extent]` and
    /// `[-extent, extent]`.
    pub fn square(nr: usize, extent: f64) -> Result<Self> {
        Self::new(nr, 2 * nr - 1, extent, extent)
    }

    #[inline]
    pub fn nr(&self) -> usize {
        self.nr
    }
    #[inline]
    pub fn nz(&self) -> usize {
        self.nz
    }
    #[inline]
    pub fn rmax(&self) -> f64 {
        self.rmax
    }
    #[inline]
    pub fn zmax(&self) -> f64 {
        self.zmax
    }
    #[inline]
    pub fn zmin(&self) -> f64 {
        -self.zmax
    }
    #[inline]
    pub fn hr(&self) -> f64 {
        self.rmax / (self.nr - 1) as f64
    }
    #[inline]
    pub fn hz(&self) -> f64 {
        2.0 * self.zmax / (self.nz - 1) as f64
    }
    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.hr()
    }
    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        // Mirror-exact: z(nz-1-j) == -z(j) bit for bit.
        let c = (self.nz / 2) as f64;
        (j as f64 - c) * self.hz()
    }
    /// Index of the `z = 0` row.
    #[inline]
    pub fn center(&self) -> usize {
        self.nz / 2
    }
    #[inline]
    pub fn mirror(&self, j: usize) -> usize {
        self.nz - 1 - j
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Row-major index, `z` varying fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    /// Same extents, spacing halved in both directions.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.nr - 1, 2 * self.nz - 1, self.rmax, self.zmax)
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Behaviour of a field under `r -> -r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

/// A sampled axisymmetric scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    parity: Parity,
}

impl ScalarField {
    /// Validates finiteness and the odd-parity axis condition.
    pub fn from_values(grid: GridSpec, values: Vec<f64>, parity: Parity) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nr(),
                grid.nz()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                i: k / grid.nz(),
                j: k % grid.nz(),
            });
        }
        if parity == Parity::Odd {
            if let Some(j) = (0..grid.nz()).find(|&j| values[grid.idx(0, j)] != 0.0) {
                return Err(Error::Domain(format!(
                    "odd field is nonzero on the axis at row {j}"
                )));
            }
        }
        Ok(Self {
            grid,
            values,
            parity,
        })
    }

    /// Samples `f(r, z)` at every node. For odd parity the axis column is set
    /// to zero regardless of `f`.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: GridSpec, parity: Parity, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr() {
            let r = grid.r(i);
            for j in 0..grid.nz() {
                let v = if i == 0 && parity == Parity::Odd {
                    0.0
                } else {
                    f(r, grid.z(j))
                };
                values.push(v);
            }
        }
        Self::from_values(grid, values, parity)
    }

    pub fn zeros(grid: GridSpec, parity: Parity) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            parity,
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.len()], Parity::Even)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    pub fn parity(&self) -> Parity {
        self.parity
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Pointwise map; the result keeps this field's parity.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::from_values(
            self.grid,
            self.values.iter().map(|&v| f(v)).collect(),
            self.parity,
        )
    }

    /// Pointwise map with node coordinates.
    pub fn map_nodes<F: Fn(f64, f64, f64) -> f64>(&self, parity: Parity, f: F) -> Result<Self> {
        let g = self.grid;
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                out.push(f(g.r(i), g.z(j), self.values[g.idx(i, j)]));
            }
        }
        Self::from_values(g, out, parity)
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(
        &self,
        other: &ScalarField,
        parity: Parity,
        f: F,
    ) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Self::from_values(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            parity,
        )
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        if self.parity != other.parity {
            return Err(Error::Domain("adding fields of different parity".into()));
        }
        self.zip_with(other, self.parity, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Pointwise product; parities multiply.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        let parity = if self.parity == other.parity {
            Parity::Even
        } else {
            Parity::Odd
        };
        self.zip_with(other, parity, |a, b| a * b)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |f(r, z) - f(r, -z)|`.
    pub fn z_asymmetry(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for i in 0..g.nr() {
            for j in 0..g.center() {
                worst = worst.max((self.at(i, j) - self.at(i, g.mirror(j))).abs());
            }
        }
        worst
    }

    /// True when every node equals its mirror image bit for bit.
    pub fn is_z_even(&self) -> bool {
        self.z_asymmetry() == 0.0
    }

    /// Replace the field by its z-even part.
    pub fn symmetrize_z(&mut self) {
        let g = self.grid;
        for i in 0..g.nr() {
            for j in 0..g.center() {
                let a = self.values[g.idx(i, j)];
                let b = self.values[g.idx(i, g.mirror(j))];
                let m = 0.5 * (a + b);
                self.values[g.idx(i, j)] = m;
                self.values[g.idx(i, g.mirror(j))] = m;
            }
        }
    }

    /// Bilinear interpolation; points outside the grid clamp to the edge.
    pub fn interpolate(&self, r: f64, z: f64) -> f64 {
        let g = self.grid;
        let x = (r.abs() / g.hr()).clamp(0.0, (g.nr() - 1) as f64);
        let y = ((z - g.zmin()) / g.hz()).clamp(0.0, (g.nz() - 1) as f64);
        let i = (x.floor() as usize).min(g.nr() - 2);
        let j = (y.floor() as usize).min(g.nz() - 2);
        let tx = x - i as f64;
        let ty = y - j as f64;
        let v = (1.0 - tx) * ((1.0 - ty) * self.at(i, j) + ty * self.at(i, j + 1))
            + tx * ((1.0 - ty) * self.at(i + 1, j) + ty * self.at(i + 1, j + 1));
        if r < 0.0 {
            self.parity.sign() * v
        } else {
            v
        }
    }
}

/// A field together with a validity mask (nodes where the quantity is not
/// defined carry `false` and a stored value of zero).
#[derive(Debug, Clone)]
pub struct MaskedField {
    pub field: ScalarField,
    pub mask: Vec<bool>,
}

impl MaskedField {
    pub fn max_abs(&self) -> f64 {
        self.field
            .values()
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0, |a, (v, _)| a.max(v.abs()))
    }

    /// Maximum of `|value|` over nodes where both the mask and `keep` hold.
    pub fn max_abs_where(&self, keep: &[bool]) -> f64 {
        self.field
            .values()
            .iter()
            .zip(self.mask.iter().zip(keep))
            .filter(|(_, (&m, &k))| m && k)
            .fold(0.0, |a, (v, _)| a.max(v.abs()))
    }
}

/// Support region `{ |z| < psi(r) }` of a star, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDomain {
    grid: GridSpec,
    boundary: Vec<f64>,
    mask: Vec<bool>,
}

impl StarDomain {
    /// `psi[i]` is the half-thickness of the support at radial node `i`.
    pub fn from_boundary(grid: GridSpec, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != grid.nr() {
            return Err(Error::GridMismatch(format!(
                "{} boundary samples for {} radial nodes",
                psi.len(),
                grid.nr()
            )));
        }
        if psi.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("boundary function must be finite and >= 0".into()));
        }
        let mut mask = vec![false; grid.len()];
        for (i, &p) in psi.iter().enumerate() {
            for j in 0..grid.nz() {
                mask[grid.idx(i, j)] = grid.z(j).abs() < p;
            }
        }
        Ok(Self {
            grid,
            boundary: psi,
            mask,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: GridSpec, psi: F) -> Result<Self> {
        let b = (0..grid.nr()).map(|i| psi(grid.r(i)).max(0.0)).collect();
        Self::from_boundary(grid, b)
    }

    /// Extract `psi` from a z-even density by locating, per column, the first
    /// zero of the density below the equator.
    pub fn from_density(rho: &ScalarField) -> Result<Self> {
        let g = *rho.grid();
        let c = g.center();
        let mut psi = vec![0.0; g.nr()];
        for (i, p) in psi.iter_mut().enumerate() {
            if rho.at(i, c) <= 0.0 {
                continue;
            }
            let mut j = c;
            while j > 0 && rho.at(i, j - 1) > 0.0 {
                j -= 1;
            }
            if j == 0 {
                *p = g.zmax();
                continue;
            }
            // rho(j) > 0 >= rho(j-1). A strictly negative neighbour gives a
            // genuine sign change; a clipped zero does not, so extrapolate
            // the inner slope instead and keep the result inside the cell.
            let a = rho.at(i, j);
            let b = rho.at(i, j - 1);
            let t = if b < 0.0 {
                a / (a - b)
            } else if j < c && rho.at(i, j + 1) > a {
                (a / (rho.at(i, j + 1) - a)).min(1.0)
            } else {
                0.5
            };
            *p = -(g.z(j) - t * g.hz());
        }
        Self::from_boundary(g, psi)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    #[inline]
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }
    #[inline]
    pub fn psi(&self, i: usize) -> f64 {
        self.boundary[i]
    }
    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.idx(i, j)]
    }

    /// Radial intervals `[first, last]` of node indices with `psi > 0`.
    pub fn radial_intervals(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &p) in self.boundary.iter().enumerate() {
            match (p > 0.0, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.boundary.len() - 1));
        }
        out
    }

    /// Nodes inside the domain whose Chebyshev distance (in cells) to every
    /// outside node is at least `layers`.
    pub fn interior(&self, layers: usize) -> Vec<bool> {
        let g = self.grid;
        let mut out = vec![false; g.len()];
        let l = layers as isize;
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                if !self.contains(i, j) {
                    continue;
                }
                let mut ok = true;
                'scan: for di in -l..=l {
                    for dj in -l..=l {
                        // Reflect across the axis: the domain is a body of revolution.
                        let ii = (i as isize + di).unsigned_abs();
                        let jj = j as isize + dj;
                        if ii >= g.nr() || jj < 0 || jj >= g.nz() as isize {
                            ok = false;
                            break 'scan;
                        }
                        if !self.contains(ii, jj as usize) {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
                out[g.idx(i, j)] = ok;
            }
        }
        out
    }

    /// Inside nodes with at least one outside 4-neighbour.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let g = self.grid;
        let mut out = vec![false; g.len()];
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                if !self.contains(i, j) {
                    continue;
                }
                let outside = |ii: usize, jj: usize| !self.contains(ii, jj);
                let edge = (i + 1 < g.nr() && outside(i + 1, j))
                    || (i > 0 && outside(i - 1, j))
                    || (j + 1 < g.nz() && outside(i, j + 1))
                    || (j > 0 && outside(i, j - 1))
                    || i + 1 == g.nr()
                    || j == 0
                    || j + 1 == g.nz();
                out[g.idx(i, j)] = edge;
            }
        }
        out
    }
}
