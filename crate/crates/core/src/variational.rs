//! Constrained minimisation of
//! `E(w) = int e^s |grad w|^2 / 2 - K/(q+1) int e^{-s} w^{q+1}`
//! over `w >= 0` vanishing outside a ball, subject to `N(w) = int f w = P`.
//!
//! The discrete energy uses the same face conductances and cell measure as
//! [`DirichletOperator`], so its gradient is exactly
//! `-M (L w + K e^{-s} w^q)` and stationary points satisfy the discrete
//! Euler–Lagrange equation `L w + K e^{-s} w^q = lambda f` on their positive
//! set.

use crate::eos::{EntropyRule, EosParams, Omega2Rule, Regime};
use crate::error::{Error, Result};
use crate::field::{GridSpec, Parity, ScalarField};
use crate::linalg::DirichletOperator;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VariationalConfig {
    pub ball_radius: f64,
    /// `None` selects `P` automatically (see [`VariationalProblem::auto_p`]).
    pub target_p: Option<f64>,
    /// Radial node count of the fitted grid; `nz = 2 nr - 1`.
    pub nr: usize,
    pub step0: f64,
    pub max_iters: usize,
    /// Stop when the normalised stationarity defect falls below this.
    pub grad_tol: f64,
    pub constraint_tol: f64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            ball_radius: 4.0,
            target_p: None,
            nr: 129,
            step0: 1.0,
            max_iters: 20_000,
            grad_tol: 1e-6,
            constraint_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Energy {
    /// `int e^s |grad w|^2 / 2`
    pub t: f64,
    /// `K/(q+1) int e^{-s} w^{q+1}`
    pub u: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct VariationalReport {
    pub iterations: usize,
    pub converged: bool,
    pub target_p: f64,
    pub energy_history: Vec<f64>,
    /// Largest `|N(w_k) - P| / P` over all recorded iterates.
    pub max_constraint_defect: f64,
    pub final_energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub lambda: f64,
    pub el_residual: f64,
    /// Stationarity defect used as the stopping criterion.
    pub kkt_residual: f64,
    pub positive_set_fraction: f64,
    /// Number of nodes in `{w > 1e-6 max w}`.
    pub positive_nodes: usize,
    pub constraint_value: f64,
    pub solution: ScalarField,
}

/// Grid, coefficients and discrete operators of one minimisation problem.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub eos: EosParams,
    pub radius: f64,
    pub s: ScalarField,
    pub f: ScalarField,
    op: DirichletOperator,
    /// `K e^{-s}` per node.
    ke: Vec<f64>,
}

fn ball_mask(g: &GridSpec, radius: f64) -> Vec<bool> {
    let mut act = vec![false; g.len()];
    for i in 0..g.nr() {
        for j in 0..g.nz() {
            act[g.idx(i, j)] = g.r(i).hypot(g.z(j)) < radius * (1.0 - 1e-9);
        }
    }
    act
}

/// Grid with spacing `radius / (nr - 3)` whose ball edge falls on node
/// `nr - 3`.
pub fn fitted_grid(radius: f64, nr: usize) -> Result<GridSpec> {
    if nr < 8 {
        return Err(Error::InvalidGrid(format!("need nr >= 8, got {nr}")));
    }
    let h = radius / (nr - 3) as f64;
    GridSpec::new(nr, 2 * nr - 1, h * (nr - 1) as f64, h * (nr - 1) as f64)
}

impl VariationalProblem {
    pub fn new(eos: EosParams, s: ScalarField, f: ScalarField, radius: f64) -> Result<Self> {
        if eos.regime() != Regime::Variational {
            return Err(Error::Domain(format!(
                "constrained minimisation needs 1 < q < 3 (4/3 < gamma < 2), got gamma = {}",
                eos.gamma
            )));
        }
        s.grid().check_same(f.grid())?;
        let g = *s.grid();
        if !(radius > 0.0) || radius > (g.rmax() - 2.0 * g.hr()) * (1.0 + 1e-12) || radius > (g.zmax() - 2.0 * g.hz()) * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("ball of radius {radius} does not fit the grid")));
        }
        let active = ball_mask(&g, radius);
        let fmin = f
            .values()
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .fold(f64::INFINITY, |m, (v, _)| m.min(*v));
        if !(fmin > 0.0) {
            return Err(Error::Hypothesis(format!(
                "forcing must be bounded below by a positive constant on the ball, min is {fmin:e}"
            )));
        }
        let weight = s.map(f64::exp)?;
        let op = DirichletOperator::new(&weight, active)?;
        let ke = s.values().iter().map(|v| eos.kconst * (-v).exp()).collect();
        Ok(Self {
            eos,
            radius,
            s,
            f,
            op,
            ke,
        })
    }

    /// Problem on the fitted grid for analytic data.
    pub fn fitted(eos: EosParams, entropy: &EntropyRule, rotation: &Omega2Rule, radius: f64, nr: usize) -> Result<Self> {
        let g = fitted_grid(radius, nr)?;
        let s = entropy.sample(&g)?;
        let f = ScalarField::from_fn(g, Parity::Even, |r, _| rotation.forcing(r))?;
        Self::new(eos, s, f, radius)
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }
    pub fn active(&self) -> &[bool] {
        self.op.active()
    }
    pub fn operator(&self) -> &DirichletOperator {
        &self.op
    }

    fn check_admissible(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.grid().len() {
            return Err(Error::GridMismatch("iterate size".into()));
        }
        if let Some(k) = w.iter().position(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "iterate must be finite and nonnegative, found {} at node ({}, {})",
                w[k],
                k / self.grid().nz(),
                k % self.grid().nz()
            )));
        }
        Ok(())
    }

    /// `E = T - U`, the two terms accumulated separately in row-major order.
    pub fn energy(&self, w: &[f64]) -> Result<Energy> {
        self.check_admissible(w)?;
        let t = self.op.dirichlet_energy(w);
        let qp1 = self.eos.q + 1.0;
        let m = self.op.measure();
        let act = self.active();
        let mut u = 0.0;
        for k in 0..w.len() {
            if act[k] {
                u += m[k] * self.ke[k] * w[k].powf(qp1);
            }
        }
        u /= qp1;
        Ok(Energy { t, u, value: t - u })
    }

    /// `N(w) = int f w` over the ball.
    pub fn constraint(&self, w: &[f64]) -> f64 {
        let m = self.op.measure();
        let act = self.active();
        let fv = self.f.values();
        let mut acc = 0.0;
        for k in 0..w.len() {
            if act[k] {
                acc += m[k] * fv[k] * w[k];
            }
        }
        acc
    }

    /// Constraint mass `int f w` outside the ball of radius `rad`.
    pub fn constraint_outside(&self, w: &[f64], rad: f64) -> f64 {
        let g = *self.grid();
        let m = self.op.measure();
        let act = self.active();
        let mut acc = 0.0;
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                let k = g.idx(i, j);
                if act[k] && g.r(i).hypot(g.z(j)) > rad {
                    acc += m[k] * self.f.values()[k] * w[k];
                }
            }
        }
        acc
    }

    /// `L w + K e^{-s} w^q` on active nodes.
    fn el_operator(&self, w: &[f64]) -> Vec<f64> {
        let mut lw = vec![0.0; w.len()];
        self.op.apply_strong(w, &mut lw);
        let act = self.active();
        for k in 0..w.len() {
            if act[k] {
                lw[k] += self.ke[k] * w[k].powf(self.eos.q);
            }
        }
        lw
    }

    /// `lambda = ((q+1) U - 2 T) / N`.
    pub fn multiplier(&self, w: &[f64]) -> Result<f64> {
        let n = self.constraint(w);
        if n == 0.0 {
            return Err(Error::Degenerate("constraint value is zero".into()));
        }
        let e = self.energy(w)?;
        Ok(((self.eos.q + 1.0) * e.u - 2.0 * e.t) / n)
    }

    /// Max over `{w > 1e-6 max w}` of `|L w + K e^{-s} w^q - lambda f|`,
    /// normalised by `lambda * max f`.
    pub fn el_residual(&self, w: &[f64], lambda: f64) -> Result<f64> {
        let wmax = w.iter().copied().fold(0.0f64, f64::max);
        if !(wmax > 0.0) {
            return Err(Error::Degenerate("empty positive set".into()));
        }
        let thr = 1e-6 * wmax;
        let el = self.el_operator(w);
        let act = self.active();
        let fmax = self.f.max();
        let mut worst = 0.0f64;
        for k in 0..w.len() {
            if act[k] && w[k] > thr {
                worst = worst.max((el[k] - lambda * self.f.values()[k]).abs());
            }
        }
        Ok(worst / (lambda.abs() * fmax))
    }

    /// First-order optimality defect: `|G|` on the positive set and
    /// `max(0, -G)` on the zero set, `G = lambda f - L w - K e^{-s} w^q`,
    /// normalised as [`Self::el_residual`].
    pub fn kkt_residual(&self, w: &[f64], lambda: f64) -> f64 {
        let wmax = w.iter().copied().fold(0.0f64, f64::max);
        let thr = 1e-6 * wmax;
        let el = self.el_operator(w);
        let act = self.active();
        let mut worst = 0.0f64;
        for k in 0..w.len() {
            if !act[k] {
                continue;
            }
            let gk = lambda * self.f.values()[k] - el[k];
            let v = if w[k] > thr { gk.abs() } else { (-gk).max(0.0) };
            worst = worst.max(v);
        }
        worst / (lambda.abs() * self.f.max()).max(f64::MIN_POSITIVE)
    }

    /// `(1 - |x|^2 / R^2)_+` on the active set.
    pub fn initial_bump(&self) -> Vec<f64> {
        let g = *self.grid();
        let mut w = vec![0.0; g.len()];
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                let k = g.idx(i, j);
                if self.active()[k] {
                    let d = g.r(i).hypot(g.z(j)) / self.radius;
                    w[k] = (1.0 - d * d).max(0.0);
                }
            }
        }
        w
    }

    /// Double `theta` from 1 until `E(theta w0) < 0` for the initial bump `w0`;
    /// returns `(theta, N(theta w0))`.
    pub fn auto_p(&self) -> Result<(f64, f64)> {
        let w0 = self.initial_bump();
        let mut theta = 1.0;
        for _ in 0..200 {
            let w: Vec<f64> = w0.iter().map(|v| theta * v).collect();
            if self.energy(&w)?.value < 0.0 {
                return Ok((theta, self.constraint(&w)));
            }
            theta *= 2.0;
        }
        Err(Error::Convergence("no scale makes the bump energy negative".into()))
    }

    fn rescale(&self, w: &mut [f64], p: f64) -> Result<()> {
        let n = self.constraint(w);
        if !(n > 0.0) {
            return Err(Error::Degenerate("iterate collapsed to zero".into()));
        }
        let c = p / n;
        for v in w.iter_mut() {
            *v *= c;
        }
        Ok(())
    }

    fn to_field(&self, w: Vec<f64>) -> Result<ScalarField> {
        ScalarField::from_values(*self.grid(), w, Parity::Even)
    }

    /// Embed a solution from another problem by interpolation; nodes outside
    /// the ball are zeroed and the result is rescaled to `N = p`.
    pub fn embed(&self, w: &ScalarField, p: f64) -> Result<Vec<f64>> {
        let g = *self.grid();
        let mut out = vec![0.0; g.len()];
        for i in 0..g.nr() {
            for j in 0..g.nz() {
                let k = g.idx(i, j);
                if self.active()[k] {
                    let (r, z) = (g.r(i), g.z(j));
                    let src = w.grid();
                    if r <= src.rmax() && z.abs() <= src.zmax() {
                        out[k] = w.interpolate(r, z).max(0.0);
                    }
                }
            }
        }
        self.rescale(&mut out, p)?;
        Ok(out)
    }

    /// Projected, preconditioned descent. `w0` defaults to the scaled bump.
    pub fn minimize(&self, config: &VariationalConfig, p: f64, w0: Option<Vec<f64>>) -> Result<VariationalReport> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!("target P must be positive, got {p}")));
        }
        let mut w = w0.unwrap_or_else(|| self.initial_bump());
        self.check_admissible(&w)?;
        for (v, &a) in w.iter_mut().zip(self.active()) {
            if !a {
                *v = 0.0;
            }
        }
        self.rescale(&mut w, p)?;
        let symmetric = self.s.is_z_even() && self.f.is_z_even();
        if symmetric {
            self.symmetrize(&mut w);
        }

        let m = self.op.measure().to_vec();
        let act = self.active().to_vec();
        let n_dual: Vec<f64> = (0..w.len())
            .map(|k| if act[k] { m[k] * self.f.values()[k] } else { 0.0 })
            .collect();
        let weight = self.s.map(f64::exp)?;
        // Preconditioner on the free set: active nodes minus those held at
        // zero by their outward Lagrangian gradient. A projected step with a
        // non-diagonal preconditioner is not a descent direction unless the
        // held nodes are removed; refactor only when that set changes.
        let mut held = vec![false; w.len()];
        let mut free_op = self.op.clone();
        let mut chol = free_op.factor(0.0)?;

        let mut e = self.energy(&w)?;
        let mut history = vec![e.value];
        let mut max_defect = ((self.constraint(&w) - p) / p).abs();
        let mut eta = config.step0;
        let mut converged = false;
        let mut iterations = 0;
        let mut lambda = self.multiplier(&w)?;
        let mut kkt = self.kkt_residual(&w, lambda);

        for it in 0..config.max_iters {
            if kkt <= config.grad_tol {
                converged = true;
                iterations = it;
                break;
            }
            iterations = it + 1;
            // Dual gradient of E.
            let el = self.el_operator(&w);
            let grad: Vec<f64> = (0..w.len()).map(|k| if act[k] { -m[k] * el[k] } else { 0.0 }).collect();
            let now_held: Vec<bool> = (0..w.len())
                .map(|k| act[k] && w[k] == 0.0 && lambda * self.f.values()[k] - el[k] >= 0.0)
                .collect();
            if now_held != held {
                held = now_held;
                let free: Vec<bool> = act.iter().zip(&held).map(|(&a, &h)| a && !h).collect();
                free_op = DirichletOperator::new(&weight, free)?;
                chol = free_op.factor(0.0)?;
            }
            let pn = free_op.solve(&chol, &n_dual);
            let n_pn: f64 = dot(&n_dual, &pn);
            let pg = free_op.solve(&chol, &grad);
            let mu = dot(&n_dual, &pg) / n_pn;
            let dir: Vec<f64> = pg.iter().zip(&pn).map(|(a, b)| -(a - mu * b)).collect();

            let slack = 1e-14 * e.value.abs().max(1.0);
            let mut accepted = None;
            let mut trial_eta = (2.0 * eta).min(1e6);
            for _ in 0..50 {
                let mut trial: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| (a + trial_eta * d).max(0.0)).collect();
                for (v, &a) in trial.iter_mut().zip(&act) {
                    if !a {
                        *v = 0.0;
                    }
                }
                if self.rescale(&mut trial, p).is_ok() {
                    if symmetric {
                        self.symmetrize(&mut trial);
                    }
                    let et = self.energy(&trial)?;
                    if et.value <= e.value + slack {
                        accepted = Some((trial, et));
                        break;
                    }
                }
                trial_eta *= 0.5;
            }
            let Some((nw, ne)) = accepted else {
                let report = self.report(w, p, history, max_defect, iterations, false)?;
                return Err(Error::Stagnation {
                    iterations,
                    report: Box::new(report),
                });
            };
            eta = trial_eta;
            let stalled = (e.value - ne.value).abs() <= slack;
            w = nw;
            e = ne;
            history.push(e.value);
            max_defect = max_defect.max(((self.constraint(&w) - p) / p).abs());
            lambda = self.multiplier(&w)?;
            kkt = self.kkt_residual(&w, lambda);
            if stalled && eta < 1e-12 {
                break;
            }
        }
        if kkt <= config.grad_tol {
            converged = true;
        }
        self.report(w, p, history, max_defect, iterations, converged)
    }

    fn symmetrize(&self, w: &mut [f64]) {
        let g = *self.grid();
        for i in 0..g.nr() {
            for j in 0..g.center() {
                let a = g.idx(i, j);
                let b = g.idx(i, g.mirror(j));
                let v = 0.5 * (w[a] + w[b]);
                w[a] = v;
                w[b] = v;
            }
        }
    }

    fn report(
        &self,
        w: Vec<f64>,
        p: f64,
        energy_history: Vec<f64>,
        max_constraint_defect: f64,
        iterations: usize,
        converged: bool,
    ) -> Result<VariationalReport> {
        let e = self.energy(&w)?;
        let lambda = self.multiplier(&w)?;
        let el_residual = self.el_residual(&w, lambda)?;
        let kkt_residual = self.kkt_residual(&w, lambda);
        let wmax = w.iter().copied().fold(0.0f64, f64::max);
        let nact = self.active().iter().filter(|&&a| a).count();
        let npos = w.iter().filter(|&&v| v > 1e-6 * wmax).count();
        let constraint_value = self.constraint(&w);
        Ok(VariationalReport {
            iterations,
            converged,
            target_p: p,
            energy_history,
            max_constraint_defect,
            final_energy: e.value,
            kinetic: e.t,
            potential: e.u,
            lambda,
            el_residual,
            kkt_residual,
            positive_set_fraction: npos as f64 / nact as f64,
            positive_nodes: npos,
            constraint_value,
            solution: self.to_field(w)?,
        })
    }

    /// Resolve the target constraint value from the config.
    pub fn resolve_p(&self, config: &VariationalConfig) -> Result<f64> {
        match config.target_p {
            Some(p) => Ok(p),
            None => Ok(self.auto_p()?.1),
        }
    }

    /// Scaled bump `theta w0` with `N = p`.
    pub fn bump_with_p(&self, p: f64) -> Result<Vec<f64>> {
        let mut w = self.initial_bump();
        self.rescale(&mut w, p)?;
        Ok(w)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - l1^{q+1} - l2^{q+1} >= 2 l1 l2` for `l1 + l2 = 1`, `l1, l2 in [0, 1]`,
/// `q > 1`.
pub fn elementary_inequality_check(l1: f64, l2: f64, q: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&l1) || !(0.0..=1.0).contains(&l2) || (l1 + l2 - 1.0).abs() > 1e-12 || !(q > 1.0) {
        return Err(Error::Domain(format!(
            "need l1, l2 in [0,1] with l1 + l2 = 1 and q > 1, got ({l1}, {l2}, {q})"
        )));
    }
    let lhs = 1.0 - l1.powf(q + 1.0) - l2.powf(q + 1.0);
    // Rounding in 1 - a - b is at most a few ulps of 1.
    Ok(lhs >= 2.0 * l1 * l2 - 4.0 * f64::EPSILON)
}

/// One stage of a growing-domain study.
#[derive(Debug, Clone)]
pub struct ContinuationStage {
    pub radius: f64,
    pub report: VariationalReport,
    /// `int f w` outside `|x| > radius / 2`, divided by `P`.
    pub tail_fraction: f64,
    /// Max difference to the previous stage's solution on the previous
    /// stage's half-radius ball, relative to the previous maximum.
    pub inner_difference: Option<f64>,
}

/// Solve on radii `radius * 2^k` with a fixed grid spacing and fixed `P`,
/// warm-starting each stage from the previous solution.
pub fn domain_continuation(
    eos: EosParams,
    entropy: &EntropyRule,
    rotation: &Omega2Rule,
    config: &VariationalConfig,
    stages: usize,
) -> Result<Vec<ContinuationStage>> {
    let base = VariationalProblem::fitted(eos, entropy, rotation, config.ball_radius, config.nr)?;
    let p = base.resolve_p(config)?;
    let mut out: Vec<ContinuationStage> = Vec::new();
    for k in 0..stages {
        let scale = 1usize << k;
        let radius = config.ball_radius * scale as f64;
        let nr = (config.nr - 3) * scale + 3;
        let prob = if k == 0 {
            base.clone()
        } else {
            VariationalProblem::fitted(eos, entropy, rotation, radius, nr)?
        };
        let w0 = match out.last() {
            Some(prev) => Some(prob.embed(&prev.report.solution, p)?),
            None => None,
        };
        let report = prob.minimize(config, p, w0)?;
        let tail_fraction = prob.constraint_outside(report.solution.values(), 0.5 * radius) / p;
        let inner_difference = out.last().map(|prev| {
            let pg = prev.report.solution.grid();
            let g = report.solution.grid();
            let half = 0.5 * prev.radius;
            let mut worst = 0.0f64;
            for i in 0..pg.nr() {
                for j in 0..pg.nz() {
                    let (r, z) = (pg.r(i), pg.z(j));
                    if r.hypot(z) <= half {
                        // Same spacing and centred grids: nodes coincide.
                        let ii = i;
                        let jj = j + g.center() - pg.center();
                        worst = worst.max((prev.report.solution.at(i, j) - report.solution.at(ii, jj)).abs());
                    }
                }
            }
            worst / prev.report.solution.max().max(f64::MIN_POSITIVE)
        });
        out.push(ContinuationStage {
            radius,
            report,
            tail_fraction,
            inner_difference,
        });
    }
    Ok(out)
}
