//! Lane–Emden polytropes: `theta'' + (2/xi) theta' + theta^n = 0`,
//! `theta(0) = 1`, `theta'(0) = 0`.
//!
//! With constant effective entropy `s` and no rotation the equilibrium
//! equation becomes `Laplacian(w) + K e^{-2s} w^q = 0`, whose regular
//! solutions are `w = w_c theta(A |x|)` with `n = q` and
//! `A^2 = K e^{-2s} w_c^{q-1}`.

use crate::eos::EosParams;
use crate::error::{Error, Result};
use crate::field::ScalarField;

const XI_MAX: f64 = 50.0;
const XI_START: f64 = 1e-3;

#[derive(Debug, Clone, serde::Serialize)]
pub struct PolytropeSolution {
    pub n: f64,
    /// Nodes `0 = xi[0] < ... < xi[last] = xi1`.
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub xi1: f64,
    pub dtheta_at_xi1: f64,
    /// `int_0^xi1 theta^n xi^2 dxi`, integrated alongside the profile.
    pub mass_integral: f64,
}

#[inline]
fn pow_pos(t: f64, n: f64) -> f64 {
    if n == 0.0 {
        1.0
    } else {
        t.max(0.0).powf(n)
    }
}

/// State `(theta, theta', int theta^n xi^2)`.
type State = [f64; 3];

fn rhs(n: f64, xi: f64, y: &State) -> State {
    let tn = pow_pos(y[0], n);
    [y[1], -tn - 2.0 * y[1] / xi, tn * xi * xi]
}

fn rk4(n: f64, xi: f64, y: &State, h: f64) -> State {
    let add = |a: &State, b: &State, c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    let k1 = rhs(n, xi, y);
    let k2 = rhs(n, xi + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = rhs(n, xi + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = rhs(n, xi + h, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrate with step `h` (RK4) until the first zero, which is then located
/// by bisection on the length of the final step.
pub fn lane_emden_with_step(n: f64, h: f64) -> Result<PolytropeSolution> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::Domain(format!("polytropic index must be >= 0, got {n}")));
    }
    let x0 = XI_START;
    let mut y: State = [
        1.0 - x0 * x0 / 6.0 + n * x0.powi(4) / 120.0,
        -x0 / 3.0 + n * x0.powi(3) / 30.0,
        x0.powi(3) / 3.0 - n * x0.powi(5) / 30.0,
    ];
    let mut xi = vec![0.0, x0];
    let mut theta = vec![1.0, y[0]];
    let mut dtheta = vec![0.0, y[1]];
    let mut x = x0;
    loop {
        if x > XI_MAX {
            return Err(Error::RadiusNotFound(format!(
                "theta has no zero below xi = {XI_MAX} for n = {n}"
            )));
        }
        let next = rk4(n, x, &y, h);
        if next[0] <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > 1e-14 * (1.0 + x) {
                let mid = 0.5 * (lo + hi);
                if rk4(n, x, &y, mid)[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let d = 0.5 * (lo + hi);
            let end = rk4(n, x, &y, d);
            let xi1 = x + d;
            xi.push(xi1);
            theta.push(0.0);
            dtheta.push(end[1]);
            return Ok(PolytropeSolution {
                n,
                xi,
                theta,
                dtheta,
                xi1,
                dtheta_at_xi1: end[1],
                mass_integral: end[2],
            });
        }
        y = next;
        x += h;
        xi.push(x);
        theta.push(y[0]);
        dtheta.push(y[1]);
    }
}

pub fn lane_emden_solve(n: f64) -> Result<PolytropeSolution> {
    lane_emden_with_step(n, 1e-4)
}

impl PolytropeSolution {
    /// `theta(x)` by cubic Hermite interpolation; zero beyond `xi1`.
    pub fn theta_at(&self, x: f64) -> f64 {
        let x = x.abs();
        if x >= self.xi1 {
            return 0.0;
        }
        let k = match self.xi.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.theta[k],
            Err(k) => k - 1,
        };
        let (x0, x1) = (self.xi[k], self.xi[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.theta[k]
            + (t3 - 2.0 * t2 + t) * h * self.dtheta[k]
            + (-2.0 * t3 + 3.0 * t2) * self.theta[k + 1]
            + (t3 - t2) * h * self.dtheta[k + 1]
    }

    /// Radial scale `A` for a central value `w_c` at constant effective
    /// entropy `s`.
    pub fn scale_for(&self, eos: &EosParams, w_c: f64, s: f64) -> f64 {
        (eos.kconst * (-2.0 * s).exp() * w_c.powf(eos.q - 1.0)).sqrt()
    }
}

/// Largest deviation of `w` from the z-axis column versus the equatorial row,
/// relative to the central value, sampled at the equatorial radii.
pub fn spherical_deviation(w: &ScalarField) -> f64 {
    let g = w.grid();
    let wc = w.at(0, g.center());
    if wc == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..g.nr() {
        let d = g.r(i);
        if d > g.zmax() {
            break;
        }
        worst = worst.max((w.at(i, g.center()) - w.interpolate(0.0, d)).abs());
    }
    worst / wc.abs()
}

/// Maximum pointwise relative deviation between `w` and the scaled polytrope
/// `w_c theta(A |x|)` over nodes within half the polytrope radius. The field
/// must have constant effective entropy `s` and be spherical to 1%.
pub fn compare_with_field(sol: &PolytropeSolution, w: &ScalarField, eos: &EosParams, s: f64) -> Result<f64> {
    let dev = spherical_deviation(w);
    if dev > 0.01 {
        return Err(Error::NotSpherical(dev));
    }
    let g = w.grid();
    let wc = w.at(0, g.center());
    if wc <= 0.0 {
        return Err(Error::Degenerate("central value must be positive".into()));
    }
    let a = sol.scale_for(eos, wc, s);
    let half = 0.5 * sol.xi1 / a;
    let mut worst = 0.0f64;
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let d = g.r(i).hypot(g.z(j));
            if d <= half {
                let o = wc * sol.theta_at(a * d);
                worst = worst.max((w.at(i, j) - o).abs() / o);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridSpec, Parity};

    #[test]
    fn closed_forms() {
        let s0 = lane_emden_solve(0.0).unwrap();
        assert!((s0.xi1 - 6f64.sqrt()).abs() < 1e-8);
        for (x, t) in s0.xi.iter().zip(&s0.theta) {
            assert!((t - (1.0 - x * x / 6.0)).abs() < 1e-9);
        }
        let s1 = lane_emden_solve(1.0).unwrap();
        assert!((s1.xi1 - std::f64::consts::PI).abs() < 1e-8);
        for (x, t) in s1.xi.iter().zip(&s1.theta).skip(1) {
            assert!((t - x.sin() / x).abs() < 1e-9);
        }
    }

    #[test]
    fn n_three_halves() {
        let s = lane_emden_solve(1.5).unwrap();
        assert!((s.xi1 - 3.65375).abs() < 1e-5, "{}", s.xi1);
        let half = lane_emden_with_step(1.5, 5e-5).unwrap();
        assert!((s.xi1 - half.xi1).abs() < 1e-8);
    }

    #[test]
    fn mass_first_integral() {
        for &n in &[0.5, 1.0, 1.5, 3.0] {
            let s = lane_emden_solve(n).unwrap();
            let lhs = s.mass_integral;
            let rhs = -s.xi1 * s.xi1 * s.dtheta_at_xi1;
            assert!((lhs - rhs).abs() < 1e-8 * rhs, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn infinite_polytrope_has_no_zero() {
        assert!(matches!(lane_emden_solve(5.0), Err(Error::RadiusNotFound(_))));
        assert!(lane_emden_solve(-1.0).is_err());
    }

    #[test]
    fn self_comparison() {
        let eos = EosParams::new(3.0).unwrap();
        let sol = lane_emden_solve(eos.q).unwrap();
        let g = GridSpec::square(65, 2.0).unwrap();
        let wc = 1.7;
        let a = sol.scale_for(&eos, wc, 0.0);
        let w = ScalarField::from_fn(g, Parity::Even, |r, z| wc * sol.theta_at(a * r.hypot(z))).unwrap();
        assert!(compare_with_field(&sol, &w, &eos, 0.0).unwrap() < 1e-4);

        let squashed = ScalarField::from_fn(g, Parity::Even, |r, z| {
            wc * sol.theta_at(a * r.hypot(1.3 * z))
        })
        .unwrap();
        assert!(matches!(
            compare_with_field(&sol, &squashed, &eos, 0.0),
            Err(Error::NotSpherical(_))
        ));
    }
}
