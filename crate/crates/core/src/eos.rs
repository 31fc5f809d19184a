//! Polytropic equation of state, the enthalpy-like variable `w`, rotation
//! profiles and the isentropic Bernoulli diagnostic.
//!
//! Units: `G = 1`. Pressure is `p = e^s rho^gamma` with the physical entropy
//! `s`. The elliptic solvers work with the effective entropy `s / gamma`, for
//! which the equilibrium equation reads
//! `div(e^s grad w) + K e^{-s} w^q - f = 0`; use
//! [`EosParams::physical_entropy`] to convert back.

use crate::field::{gradient_rz, GridSpec, Parity, ScalarField, StarDomain};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Which existence argument applies to a given adiabatic index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `0 < q < 1` (`gamma > 2`): sub/supersolution iteration.
    Monotone,
    /// `1 < q < 3` (`4/3 < gamma < 2`): constrained minimisation.
    Variational,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EosParams {
    pub gamma: f64,
    pub q: f64,
    pub alpha: f64,
    pub kconst: f64,
}

impl EosParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        let q = 1.0 / (gamma - 1.0);
        Ok(Self {
            gamma,
            q,
            alpha: 1.0 / gamma,
            kconst: 4.0 * PI * ((gamma - 1.0) / gamma).powf(q),
        })
    }

    pub fn regime(&self) -> Regime {
        if self.q > 0.0 && self.q < 1.0 {
            Regime::Monotone
        } else if self.q > 1.0 && self.q < 3.0 {
            Regime::Variational
        } else {
            Regime::Unsupported
        }
    }

    /// Physical entropy from the effective one used by the solvers.
    pub fn physical_entropy(&self, s_eff: &ScalarField) -> Result<ScalarField> {
        s_eff.scale(self.gamma)
    }

    /// Effective entropy `alpha * s`.
    pub fn effective_entropy(&self, s: &ScalarField) -> Result<ScalarField> {
        s.scale(self.alpha)
    }
}

/// Constants `q`, `alpha`, `K` for the given adiabatic index.
pub fn derived_constants(gamma: f64) -> Result<EosParams> {
    EosParams::new(gamma)
}

fn check_nonnegative(f: &ScalarField, what: &str) -> Result<()> {
    if let Some(k) = f.values().iter().position(|&v| v < 0.0) {
        let nz = f.grid().nz();
        return Err(Error::Domain(format!(
            "{what} is negative ({:e}) at node ({}, {})",
            f.values()[k],
            k / nz,
            k % nz
        )));
    }
    Ok(())
}

/// `w = gamma/(gamma-1) e^{(gamma-1) s / gamma} rho^{gamma-1}` with physical
/// entropy `s`.
pub fn rho_to_w(rho: &ScalarField, s: &ScalarField, eos: &EosParams) -> Result<ScalarField> {
    check_nonnegative(rho, "density")?;
    let g = eos.gamma;
    let c = g / (g - 1.0);
    let e = (g - 1.0) / g;
    rho.zip_with(s, Parity::Even, |d, s| {
        if d == 0.0 {
            0.0
        } else {
            c * (e * s).exp() * d.powf(g - 1.0)
        }
    })
}

/// Inverse of [`rho_to_w`].
pub fn w_to_rho(w: &ScalarField, s: &ScalarField, eos: &EosParams) -> Result<ScalarField> {
    check_nonnegative(w, "w")?;
    let g = eos.gamma;
    let e = (g - 1.0) / g;
    w.zip_with(s, Parity::Even, |w, s| {
        if w == 0.0 {
            0.0
        } else {
            (e * (-e * s).exp() * w).powf(eos.q)
        }
    })
}

/// `p = e^s rho^gamma` with physical entropy `s`.
pub fn pressure_from_state(rho: &ScalarField, s: &ScalarField, eos: &EosParams) -> Result<ScalarField> {
    check_nonnegative(rho, "density")?;
    rho.zip_with(s, Parity::Even, |d, s| s.exp() * d.powf(eos.gamma))
}

/// Closed-form angular-velocity laws, all independent of `z`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Omega2Rule {
    /// Uniform angular velocity `Omega`; `Omega^2 = omega^2`.
    Constant { omega: f64 },
    /// `Omega^2 = value`.
    RigidSquared { value: f64 },
    /// `Omega^2 = a / (1 + b r^2)`.
    Rational { a: f64, b: f64 },
}

impl Omega2Rule {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Omega2Rule::Constant { omega } => omega.is_finite(),
            Omega2Rule::RigidSquared { value } => value.is_finite() && value >= 0.0,
            Omega2Rule::Rational { a, b } => a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid rotation law {self:?}")))
        }
    }

    pub fn omega2(&self, r: f64) -> f64 {
        match *self {
            Omega2Rule::Constant { omega } => omega * omega,
            Omega2Rule::RigidSquared { value } => value,
            Omega2Rule::Rational { a, b } => a / (1.0 + b * r * r),
        }
    }

    /// `f = 2 Omega^2 + r dOmega^2/dr`.
    pub fn forcing(&self, r: f64) -> f64 {
        match *self {
            Omega2Rule::Rational { a, b } => {
                let d = 1.0 + b * r * r;
                2.0 * a / (d * d)
            }
            _ => 2.0 * self.omega2(r),
        }
    }

    /// `J(r) = int_0^r t Omega^2(t) dt`.
    pub fn centrifugal_potential(&self, r: f64) -> f64 {
        match *self {
            Omega2Rule::Rational { a, b } if b > 0.0 => a / (2.0 * b) * (b * r * r).ln_1p(),
            Omega2Rule::Rational { a, .. } => 0.5 * a * r * r,
            _ => 0.5 * self.omega2(r) * r * r,
        }
    }
}

/// `Omega^2(r, z)` as an analytic law or as samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum RotationProfile {
    Rule(Omega2Rule),
    Sampled {
        omega2: ScalarField,
        /// Finite-difference forcing, computed once.
        forcing: ScalarField,
    },
}

impl RotationProfile {
    pub fn rule(rule: Omega2Rule) -> Self {
        RotationProfile::Rule(rule)
    }

    pub fn checked_rule(rule: Omega2Rule) -> Result<Self> {
        rule.validate()?;
        Ok(RotationProfile::Rule(rule))
    }

    pub fn none() -> Self {
        RotationProfile::Rule(Omega2Rule::RigidSquared { value: 0.0 })
    }

    pub fn sampled(omega2: ScalarField) -> Result<Self> {
        if omega2.parity() != Parity::Even {
            return Err(Error::Domain("Omega^2 must be an even field".into()));
        }
        if omega2.min() < 0.0 {
            return Err(Error::Domain(format!(
                "Omega^2 must be nonnegative, minimum is {:e}",
                omega2.min()
            )));
        }
        let forcing = sampled_forcing(&omega2)?;
        Ok(RotationProfile::Sampled { omega2, forcing })
    }

    /// True when `Omega^2` does not depend on `z` (exactly, for samples).
    pub fn is_radial(&self) -> bool {
        match self {
            RotationProfile::Rule(_) => true,
            RotationProfile::Sampled { omega2, .. } => {
                let g = omega2.grid();
                (0..g.nr()).all(|i| {
                    let c = omega2.at(i, g.center());
                    (0..g.nz()).all(|j| omega2.at(i, j) == c)
                })
            }
        }
    }

    pub fn omega2_field(&self, grid: &GridSpec) -> Result<ScalarField> {
        match self {
            RotationProfile::Rule(rule) => ScalarField::from_fn(*grid, Parity::Even, |r, _| rule.omega2(r)),
            RotationProfile::Sampled { omega2, .. } => {
                grid.check_same(omega2.grid())?;
                Ok(omega2.clone())
            }
        }
    }

    /// The forcing `f = 2 Omega^2 + r dOmega^2/dr` on `grid`.
    pub fn forcing(&self, grid: &GridSpec) -> Result<ScalarField> {
        match self {
            RotationProfile::Rule(rule) => ScalarField::from_fn(*grid, Parity::Even, |r, _| rule.forcing(r)),
            RotationProfile::Sampled { forcing, .. } => {
                grid.check_same(forcing.grid())?;
                Ok(forcing.clone())
            }
        }
    }
}

/// Forcing of an arbitrary sampled `Omega^2`.
pub fn forcing_from_rotation(profile: &RotationProfile, grid: &GridSpec) -> Result<ScalarField> {
    profile.forcing(grid)
}

fn sampled_forcing(omega2: &ScalarField) -> Result<ScalarField> {
    let (dr, _) = gradient_rz(omega2)?;
    let g = *omega2.grid();
    let mut v = Vec::with_capacity(g.len());
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            v.push(2.0 * omega2.at(i, j) + g.r(i) * dr.at(i, j));
        }
    }
    ScalarField::from_values(g, v, Parity::Even)
}

/// Spread of `A(rho) - B rho - J(r)` over the domain, where
/// `A(rho) = gamma/(gamma-1) e^s rho^{gamma-1}` for a constant physical
/// entropy `s`. A hydrostatic isentropic star makes this vanish up to
/// discretisation error. Returns the (unweighted) standard deviation over
/// domain nodes with `rho > 0`.
pub fn bernoulli_residual(
    rho: &ScalarField,
    potential: &ScalarField,
    profile: &RotationProfile,
    eos: &EosParams,
    s: f64,
    domain: &StarDomain,
) -> Result<f64> {
    rho.grid().check_same(potential.grid())?;
    rho.grid().check_same(domain.grid())?;
    if !profile.is_radial() {
        return Err(Error::Hypothesis(
            "a Bernoulli relation needs Omega^2 independent of z".into(),
        ));
    }
    let g = *rho.grid();
    let j_of_r: Vec<f64> = match profile {
        RotationProfile::Rule(rule) => (0..g.nr()).map(|i| rule.centrifugal_potential(g.r(i))).collect(),
        RotationProfile::Sampled { omega2, .. } => {
            // Trapezoid on the equatorial row.
            let mut acc = vec![0.0; g.nr()];
            for i in 1..g.nr() {
                let a = g.r(i - 1) * omega2.at(i - 1, g.center());
                let b = g.r(i) * omega2.at(i, g.center());
                acc[i] = acc[i - 1] + 0.5 * g.hr() * (a + b);
            }
            acc
        }
    };
    let c = eos.gamma / (eos.gamma - 1.0) * s.exp();
    let mut vals = Vec::new();
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            let d = rho.at(i, j);
            if domain.contains(i, j) && d > 0.0 {
                vals.push(c * d.powf(eos.gamma - 1.0) - potential.at(i, j) - j_of_r[i]);
            }
        }
    }
    if vals.is_empty() {
        return Err(Error::Degenerate("no positive-density nodes in the domain".into()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Entropy laws accepted by the command-line front end. Values are effective
/// entropies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntropyRule {
    Constant { value: f64 },
    /// `s = -a (r^2 + z^2)`.
    RadialQuadratic { a: f64 },
    /// `s = -(a r^2 + b z^2)`.
    Spheroidal { a: f64, b: f64 },
}

impl EntropyRule {
    pub fn eval(&self, r: f64, z: f64) -> f64 {
        match *self {
            EntropyRule::Constant { value } => value,
            EntropyRule::RadialQuadratic { a } => -a * (r * r + z * z),
            EntropyRule::Spheroidal { a, b } => -(a * r * r + b * z * z),
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<ScalarField> {
        ScalarField::from_fn(*grid, Parity::Even, |r, z| self.eval(r, z))
    }
}
