//! Cut-off energy for the problem with the `μ u^r` term: nonlinearities
//! frozen below the subsolution, growth constants, the ball and boundary
//! thresholds, a ball minimizer and a mountain-pass solver.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::barriers::{check_lambda, check_q};
use crate::error::{Error, Result};
use crate::fraclap::DiscreteFracLap;
use crate::mesh::{boundary_decay_exponent, sup_norm, FieldFunction};
use crate::semipositone::{Classification, SolveReport};
use crate::spectral::{embedding_constant_with, principal_eigenpair, EmbeddingOptions, SpdSolver};

/// Critical exponent `2/(1-2s)` on the line.
pub fn critical_exponent(s: f64) -> Result<f64> {
    if s > 0.0 && s < 0.5 {
        Ok(2.0 / (1.0 - 2.0 * s))
    } else {
        Err(Error::Parameter(format!("s must lie in (0, 1/2), got {s}")))
    }
}

/// Which of the four cut-off functions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    /// `f(x, t)`: `u̲^r` below the knot, `t^r` above.
    SmallF,
    /// `g(x, t)`: `u̲^q - 1` below, `t^q - 1` above.
    SmallG,
    /// `F(x, t) = ∫₀ᵗ f`.
    BigF,
    /// `G(x, t) = ∫₀ᵗ g`.
    BigG,
}

/// Nonlinearities `λ g + μ f` frozen below `u̲`.
#[derive(Debug, Clone)]
pub struct CutoffNonlinearity {
    pub lambda: f64,
    pub mu: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub crit_exp: f64,
    pub u_under: FieldFunction,
    pub growth_c: f64,
    pub growth_cprime: f64,
}

impl CutoffNonlinearity {
    pub fn new(lambda: f64, mu: f64, q: f64, r: f64, s: f64, u_under: FieldFunction) -> Result<Self> {
        check_lambda(lambda)?;
        check_q(q)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Parameter(format!("mu must be nonnegative, got {mu}")));
        }
        let crit_exp = critical_exponent(s)?;
        check_r(r, crit_exp)?;
        if let Some(node) = u_under.values().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Positivity(format!("subsolution is not positive at node {node}")));
        }
        let (growth_c, growth_cprime) = growth_constants(&u_under, q, r);
        Ok(Self {
            lambda,
            mu,
            q,
            r,
            s,
            crit_exp,
            u_under,
            growth_c,
            growth_cprime,
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.lambda, mu, self.q, self.r, self.s, self.u_under.clone())
    }

    /// `r = 2_s^* - 1` up to rounding.
    pub fn is_critical(&self) -> bool {
        is_critical(self.r, self.crit_exp)
    }

    pub fn grid(&self) -> &crate::mesh::Grid {
        self.u_under.grid()
    }

    #[inline]
    fn knot(&self, node: usize) -> f64 {
        self.u_under.values()[node]
    }

    #[inline]
    fn f(&self, node: usize, t: f64) -> f64 {
        let k = self.knot(node);
        if t <= k {
            k.powf(self.r)
        } else {
            t.powf(self.r)
        }
    }

    #[inline]
    fn g(&self, node: usize, t: f64) -> f64 {
        let k = self.knot(node);
        if t <= k {
            k.powf(self.q) - 1.0
        } else {
            t.powf(self.q) - 1.0
        }
    }

    #[inline]
    fn big_f(&self, node: usize, t: f64) -> f64 {
        let (k, r) = (self.knot(node), self.r);
        if t <= k {
            k.powf(r) * t
        } else {
            t.powf(r + 1.0) / (r + 1.0) + r / (r + 1.0) * k.powf(r + 1.0)
        }
    }

    #[inline]
    fn big_g(&self, node: usize, t: f64) -> f64 {
        let (k, q) = (self.knot(node), self.q);
        if t <= k {
            (k.powf(q) - 1.0) * t
        } else {
            t.powf(q + 1.0) / (q + 1.0) - t + q / (q + 1.0) * k.powf(q + 1.0)
        }
    }

    /// `λ g + μ f` at every node.
    fn source(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| self.lambda * self.g(i, t) + self.mu * self.f(i, t))
            .collect()
    }

    /// Derivative of the source in `t`; zero on the frozen branch.
    fn source_derivative(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| {
                if t <= self.knot(i) {
                    0.0
                } else {
                    self.lambda * self.q * t.powf(self.q - 1.0) + self.mu * self.r * t.powf(self.r - 1.0)
                }
            })
            .collect()
    }
}

fn is_critical(r: f64, crit: f64) -> bool {
    (r - (crit - 1.0)).abs() <= 1e-12 * crit
}

pub(crate) fn check_r(r: f64, crit: f64) -> Result<()> {
    if r > 1.0 && (r <= crit - 1.0 || is_critical(r, crit)) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "r = {r} must lie in (1, {}]; values above 2_s^* - 1 are supercritical",
            crit - 1.0
        )))
    }
}

/// Exact value of one of `f, g, F, G` at `(x_node, t)`, for any real `t`.
pub fn cutoff_eval(nl: &CutoffNonlinearity, node: usize, t: f64, kind: CutoffKind) -> f64 {
    match kind {
        CutoffKind::SmallF => nl.f(node, t),
        CutoffKind::SmallG => nl.g(node, t),
        CutoffKind::BigF => nl.big_f(node, t),
        CutoffKind::BigG => nl.big_g(node, t),
    }
}

/// Constants `(c, c')` with `|F| <= c + c'|t| + |t|^{r+1}/(r+1)` and
/// `|G| <= c + c'|t| + |t|^{q+1}/(q+1)` for every real `t` and node.
pub fn growth_constants(u_under: &FieldFunction, q: f64, r: f64) -> (f64, f64) {
    let m = u_under.sup_norm();
    let cprime = m.powf(r).max(m.powf(q) + 1.0).max(1.0);
    let c = (r / (r + 1.0) * m.powf(r + 1.0)).max(q / (q + 1.0) * m.powf(q + 1.0));
    (c, cprime)
}

fn check_grid(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &FieldFunction) -> Result<()> {
    if nl.grid() != op.grid() || u.grid() != op.grid() {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

/// `I(u) = ½ h uᵀAu - μ h Σ F(x_i, u_i) - λ h Σ G(x_i, u_i)`.
pub fn energy(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &FieldFunction) -> Result<f64> {
    check_grid(nl, op, u)?;
    Ok(energy_raw(nl, op, u.values()))
}

fn energy_raw(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &[f64]) -> f64 {
    let au = op.apply_vec(u);
    energy_with(nl, op, u, &au)
}

fn energy_with(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &[f64], au: &[f64]) -> f64 {
    let h = op.grid().h();
    let mut quad = 0.0;
    let mut pot = 0.0;
    for (i, (&t, a)) in u.iter().zip(au).enumerate() {
        quad += t * a;
        pot += nl.mu * nl.big_f(i, t) + nl.lambda * nl.big_g(i, t);
    }
    h * (0.5 * quad - pot)
}

/// `∇I(u)_i = h [(A u)_i - μ f(x_i, u_i) - λ g(x_i, u_i)]`.
pub fn energy_gradient(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &FieldFunction) -> Result<FieldFunction> {
    check_grid(nl, op, u)?;
    let au = op.apply_vec(u.values());
    FieldFunction::new(*op.grid(), gradient_with(nl, op, u.values(), &au))
}

fn gradient_with(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &[f64], au: &[f64]) -> Vec<f64> {
    let h = op.grid().h();
    let src = nl.source(u);
    au.iter().zip(&src).map(|(a, s)| h * (a - s)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub rho: f64,
    pub mu_lambda: f64,
    pub mu0_critical: f64,
    pub embed_1: f64,
    pub embed_q1: f64,
    pub embed_r1: f64,
    pub embed_crit: f64,
    /// Certified lower bound of `I_μ` on `‖u‖_A = ρ` at the nonlinearity's `μ`.
    pub boundary_inf_bound: f64,
    /// The `μ`-free part of the bound at `ρ`.
    pub mu_free_bound: f64,
    pub growth_c: f64,
    pub growth_cprime: f64,
    pub measure: f64,
    pub lambda: f64,
    pub mu: f64,
    pub q: f64,
    pub r: f64,
}

/// Fraction of `ρ²/2` the `μ`-free part of the boundary bound must retain.
pub const RHO_SLACK: f64 = 0.1;

/// `2*/(4 S^{2*} (2ρ)^{2*-2})`.
pub fn mu0_formula(crit_exp: f64, sobolev: f64, rho: f64) -> f64 {
    crit_exp / (4.0 * sobolev.powf(crit_exp) * (2.0 * rho).powf(crit_exp - 2.0))
}

impl ThresholdReport {
    /// Lower bound of `I_μ` over `‖u‖_A = ρ` built from the growth constants
    /// and the embedding constants.
    pub fn boundary_bound(&self, rho: f64, mu: f64) -> f64 {
        self.mu_free_part(rho) - mu * self.mu_rate(rho)
    }

    fn mu_free_part(&self, rho: f64) -> f64 {
        0.5 * rho * rho
            - self.lambda * self.growth_c * self.measure
            - self.lambda * self.growth_cprime * self.embed_1 * rho
            - self.lambda * (self.embed_q1 * rho).powf(self.q1())
    }

    fn mu_rate(&self, rho: f64) -> f64 {
        self.growth_c * self.measure + self.growth_cprime * self.embed_1 * rho + (self.embed_r1 * rho).powf(self.r1())
    }

    fn q1(&self) -> f64 {
        self.q + 1.0
    }

    fn r1(&self) -> f64 {
        self.r + 1.0
    }
}

/// Picks `ρ` and the thresholds `μ_λ`, `μ₀` for the nonlinearity's `λ`.
pub fn choose_rho_mu(nl: &CutoffNonlinearity, op: &DiscreteFracLap) -> Result<ThresholdReport> {
    choose_rho_mu_with(nl, op, &EmbeddingOptions::default())
}

/// Discrete embedding constants `sup ‖u‖_p / ‖u‖_A` used by the thresholds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddingSet {
    pub embed_1: f64,
    pub embed_q1: f64,
    pub embed_r1: f64,
    pub embed_crit: f64,
}

impl EmbeddingSet {
    /// Constants for `p = 1, q + 1, r + 1, 2_s^*`.
    pub fn compute(op: &DiscreteFracLap, q: f64, r: f64, opts: &EmbeddingOptions) -> Result<Self> {
        let crit = critical_exponent(op.s())?;
        let embed = |p: f64| -> Result<f64> { Ok(embedding_constant_with(op, p, opts)?.value) };
        Ok(Self {
            embed_1: embed(1.0)?,
            embed_q1: embed(q + 1.0)?,
            embed_r1: embed(r + 1.0)?,
            embed_crit: embed(crit)?,
        })
    }
}

pub fn choose_rho_mu_with(nl: &CutoffNonlinearity, op: &DiscreteFracLap, opts: &EmbeddingOptions) -> Result<ThresholdReport> {
    let set = EmbeddingSet::compute(op, nl.q, nl.r, opts)?;
    choose_rho_mu_from(nl, op, &set)
}

/// As [`choose_rho_mu`] with precomputed embedding constants.
pub fn choose_rho_mu_from(nl: &CutoffNonlinearity, op: &DiscreteFracLap, set: &EmbeddingSet) -> Result<ThresholdReport> {
    if nl.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    let mut rep = ThresholdReport {
        rho: f64::NAN,
        mu_lambda: f64::NAN,
        mu0_critical: f64::NAN,
        embed_1: set.embed_1,
        embed_q1: set.embed_q1,
        embed_r1: set.embed_r1,
        embed_crit: set.embed_crit,
        boundary_inf_bound: f64::NAN,
        mu_free_bound: f64::NAN,
        growth_c: nl.growth_c,
        growth_cprime: nl.growth_cprime,
        measure: op.grid().measure(),
        lambda: nl.lambda,
        mu: nl.mu,
        q: nl.q,
        r: nl.r,
    };
    // geometric ladder 10^{k/16}
    let rho = (-160..=320)
        .map(|k| 10f64.powf(k as f64 / 16.0))
        .find(|&rho| rep.mu_free_part(rho) >= RHO_SLACK * 0.5 * rho * rho)
        .ok_or_else(|| Error::Infeasible {
            message: "no radius below 1e20 makes the boundary bound positive; lambda is too large for this grid".into(),
            trace: vec![],
        })?;
    rep.rho = rho;
    rep.mu_free_bound = rep.mu_free_part(rho);
    rep.mu_lambda = rep.mu_free_bound / rep.mu_rate(rho);
    rep.mu0_critical = mu0_formula(nl.crit_exp, rep.embed_crit, rho);
    rep.boundary_inf_bound = rep.boundary_bound(rho, nl.mu);
    Ok(rep)
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Newton polish after the descent when the point is interior.
    pub polish: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 20_000,
            polish: true,
        }
    }
}

/// Outcome of one descent run.
struct Descent {
    u: Vec<f64>,
    energy: f64,
    gradient_inf: f64,
    iterations: usize,
    on_boundary: bool,
    converged: bool,
}

/// Armijo descent along the `A`-gradient `d = u - A^{-1}(λ g + μ f)`,
/// rescaling back onto the ball `‖u‖_A <= ρ`.
fn projected_descent(
    nl: &CutoffNonlinearity,
    op: &DiscreteFracLap,
    solver: &SpdSolver,
    start: Vec<f64>,
    rho: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Descent> {
    let project = |u: &mut Vec<f64>| -> bool {
        let a = op.a_norm_raw(u);
        if a > rho {
            let c = rho / a;
            u.iter_mut().for_each(|x| *x *= c);
            true
        } else {
            false
        }
    };
    let mut u = start;
    let mut on_boundary = project(&mut u);
    let mut au = op.apply_vec(&u);
    let mut e = energy_with(nl, op, &u, &au);
    let mut eta = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_inf = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let grad = gradient_with(nl, op, &u, &au);
        grad_inf = sup_norm(&grad);
        if grad_inf < tol {
            converged = true;
            break;
        }
        let w = solver.solve(&nl.source(&u))?;
        let d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let dd = crate::mesh::dot(&grad, &d);
        let mut accepted = false;
        eta = (2.0 * eta).min(1.0);
        while eta > 1e-14 {
            let mut trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - eta * b).collect();
            let hit = project(&mut trial);
            let at = op.apply_vec(&trial);
            let et = energy_with(nl, op, &trial, &at);
            if et <= e - 1e-4 * eta * dd {
                let moved = crate::mesh::max_abs_diff(&trial, &u);
                u = trial;
                au = at;
                e = et;
                on_boundary = hit;
                accepted = true;
                if hit && moved <= 1e-14 * sup_norm(&u).max(1.0) {
                    // stationary for the projected step on the sphere
                    converged = true;
                }
                break;
            }
            eta *= 0.5;
        }
        if !accepted || (converged && on_boundary) {
            break;
        }
    }
    if !converged {
        grad_inf = sup_norm(&gradient_with(nl, op, &u, &au));
        converged = grad_inf < tol;
    }
    Ok(Descent {
        u,
        energy: e,
        gradient_inf: grad_inf,
        iterations,
        on_boundary,
        converged,
    })
}

/// Damped Newton on `A u - λ g(u) - μ f(u) = 0`. Returns `None` when the
/// residual cannot be reduced.
fn newton_polish(nl: &CutoffNonlinearity, op: &DiscreteFracLap, start: &[f64], tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = op.n();
    let a = op.to_dense();
    let h = op.grid().h();
    let mut u = start.to_vec();
    let residual = |u: &[f64]| -> Vec<f64> {
        let au = op.apply_vec(u);
        let src = nl.source(u);
        au.iter().zip(&src).map(|(a, s)| a - s).collect()
    };
    let mut res = residual(&u);
    let mut rnorm = sup_norm(&res);
    for _ in 0..max_iter {
        let prev = rnorm;
        let dv = nl.source_derivative(&u);
        let mut jac = a.clone();
        for i in 0..n {
            jac[(i, i)] -= dv[i];
        }
        let step = jac.lu().solve(&DVector::from_column_slice(&res))?;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x - t * d).collect();
            let r2 = residual(&trial);
            let n2 = sup_norm(&r2);
            if n2 < rnorm {
                u = trial;
                res = r2;
                rnorm = n2;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        // past the tolerance, go on while convergence is still fast
        if !improved || (h * rnorm < 0.01 * tol && rnorm > 0.5 * prev) {
            break;
        }
    }
    if u.iter().all(|x| x.is_finite()) {
        Some(u)
    } else {
        None
    }
}

fn ordering_ok(nl: &CutoffNonlinearity, u: &[f64]) -> bool {
    let eps = 1e-8 * nl.u_under.sup_norm();
    u.iter().zip(nl.u_under.values()).all(|(v, l)| *v >= l - eps)
}

fn build_report(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: Vec<f64>, tol: f64, iterations: usize, converged: bool, class: Classification) -> Result<SolveReport> {
    let au = op.apply_vec(&u);
    let grad_inf = sup_norm(&gradient_with(nl, op, &u, &au));
    let energy = energy_with(nl, op, &u, &au);
    let solution = FieldFunction::new(*op.grid(), u)?;
    let residual = crate::semipositone::uncut_residual(op, &solution, nl.lambda, nl.mu, nl.q, nl.r)?;
    let min_value = solution.min();
    Ok(SolveReport {
        energy: Some(energy),
        residual_inf: residual.sup_norm(),
        tol,
        iterations,
        converged: converged && grad_inf < tol,
        classification: class,
        ordering_ok: ordering_ok(nl, solution.values()),
        min_value,
        decay_exponent: if min_value > 0.0 {
            boundary_decay_exponent(&solution, 0.05).ok()
        } else {
            None
        },
        gradient_inf: Some(grad_inf),
        solution,
    })
}

/// Result of [`minimize_in_ball_with`].
#[derive(Debug, Clone)]
pub struct BallMinimum {
    pub report: SolveReport,
    /// The minimizer touches `‖u‖_A = ρ`.
    pub boundary_contact: bool,
    /// Energy reached from each start (`NaN` when the start failed).
    pub start_energies: Vec<f64>,
}

/// Minimizes the cut-off energy over `‖u‖_A <= ρ`.
pub fn minimize_in_ball(nl: &CutoffNonlinearity, op: &DiscreteFracLap, rho: f64, tol: f64) -> Result<SolveReport> {
    Ok(minimize_in_ball_with(nl, op, rho, tol, &MinimizeOptions::default())?.report)
}

pub fn minimize_in_ball_with(nl: &CutoffNonlinearity, op: &DiscreteFracLap, rho: f64, tol: f64, opts: &MinimizeOptions) -> Result<BallMinimum> {
    if nl.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if !(rho > 0.0) || !(tol > 0.0) {
        return Err(Error::Domain("rho and tol must be positive".into()));
    }
    let n = op.n();
    let solver = SpdSolver::new(op, 0.0, 1e-13)?;
    let eig = principal_eigenpair(op, 1e-10)?;
    let phi_norm = op.a_norm_raw(eig.phi1.values());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let amp = 1e-2 * nl.u_under.sup_norm().max(1.0);
    let starts: Vec<Vec<f64>> = vec![
        nl.u_under.values().iter().map(|v| 0.5 * v).collect(),
        (0..n).map(|_| rng.random_range(0.0..amp)).collect(),
        eig.phi1.values().iter().map(|v| 0.5 * rho * v / phi_norm).collect(),
    ];
    let mut best: Option<Descent> = None;
    let mut start_energies = Vec::new();
    for s in starts {
        match projected_descent(nl, op, &solver, s, rho, tol, opts.max_iter) {
            Ok(mut d) => {
                if opts.polish && !d.on_boundary {
                    if let Some(p) = newton_polish(nl, op, &d.u, tol, 50) {
                        let ap = op.apply_vec(&p);
                        let gp = sup_norm(&gradient_with(nl, op, &p, &ap));
                        let ep = energy_with(nl, op, &p, &ap);
                        let inside = op.a_norm_raw(&p) <= rho;
                        if gp < d.gradient_inf && inside && ep <= d.energy + 1e-9 * d.energy.abs().max(1.0) {
                            d.u = p;
                            d.energy = ep;
                            d.gradient_inf = gp;
                            d.converged = gp < tol;
                        }
                    }
                }
                start_energies.push(d.energy);
                if d.converged && best.as_ref().is_none_or(|b| d.energy < b.energy) {
                    best = Some(d);
                }
            }
            Err(_) => start_energies.push(f64::NAN),
        }
    }
    let Some(best) = best else {
        return Err(Error::NonConvergence {
            method: "ball minimization",
            iterations: opts.max_iter,
            residual: f64::NAN,
            best: vec![],
            trace: start_energies,
        });
    };
    let boundary_contact = best.on_boundary;
    let mut report = build_report(nl, op, best.u, tol, best.iterations, true, Classification::Minimizer)?;
    if boundary_contact {
        // on the sphere the free gradient need not vanish
        report.converged = true;
    }
    Ok(BallMinimum {
        report,
        boundary_contact,
        start_energies,
    })
}

/// Discrete path from `0` to `t₀ φ₁`.
#[derive(Debug, Clone)]
pub struct Path {
    pub points: Vec<FieldFunction>,
    pub t0: f64,
}

impl Path {
    /// Energies at every path point.
    pub fn profile(&self, nl: &CutoffNonlinearity, op: &DiscreteFracLap) -> Result<Vec<f64>> {
        self.points.iter().map(|p| energy(nl, op, p)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MountainPassOptions {
    /// Number of path points, endpoints included.
    pub points: usize,
    pub max_sweeps: usize,
    /// Newton polish from the best path point after the sweeps.
    pub polish: bool,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        Self {
            points: 31,
            max_sweeps: 10_000,
            polish: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassOutcome {
    pub report: SolveReport,
    pub path: Path,
    /// Path maximum after each sweep; nonincreasing.
    pub level_trace: Vec<f64>,
    pub separation: f64,
    /// Separation below `1e-3 max(‖u₀‖_∞, 1)`.
    pub merged: bool,
    /// Negative eigenvalues of the energy Hessian at the solution.
    pub morse_index: usize,
}

/// Sweeps over which the path level must drop before the deformation stops.
const STAGNATION_WINDOW: usize = 200;

/// Number of negative eigenvalues of `A - diag(λ g' + μ f')` at `u`.
pub fn morse_index(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &[f64]) -> usize {
    let mut hess = op.to_dense();
    for (i, d) in nl.source_derivative(u).iter().enumerate() {
        hess[(i, i)] -= d;
    }
    hess.symmetric_eigenvalues().iter().filter(|&&v| v < 0.0).count()
}

/// Second critical point at the mountain-pass level between `0` and
/// `t₀ φ₁`.
pub fn mountain_pass(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u0: &FieldFunction, rho: f64, tol: f64) -> Result<SolveReport> {
    Ok(mountain_pass_with(nl, op, u0, rho, tol, &MountainPassOptions::default())?.report)
}

pub fn mountain_pass_with(
    nl: &CutoffNonlinearity,
    op: &DiscreteFracLap,
    u0: &FieldFunction,
    rho: f64,
    tol: f64,
    opts: &MountainPassOptions,
) -> Result<MountainPassOutcome> {
    if nl.is_critical() {
        return Err(Error::Parameter(
            "critical case r = 2_s^* - 1: only the minimizer is available, no mountain-pass solution is sought".into(),
        ));
    }
    if nl.grid() != op.grid() || u0.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    if opts.points < 3 {
        return Err(Error::Domain("a path needs at least 3 points".into()));
    }
    let eig = principal_eigenpair(op, 1e-10)?;
    let phi = eig.phi1.values();

    // smallest dyadic t0 with ‖t0 φ₁‖_A > ρ and I(t0 φ₁) < 0
    let phi_norm = op.a_norm_raw(phi);
    let mut t0 = 1.0_f64;
    let mut k = 0;
    loop {
        let end: Vec<f64> = phi.iter().map(|v| t0 * v).collect();
        if t0 * phi_norm > rho && energy_raw(nl, op, &end) < 0.0 {
            break;
        }
        t0 *= 2.0;
        k += 1;
        if k > 400 {
            return Err(Error::MountainPass {
                message: "no endpoint with negative energy outside the ball".into(),
                profile: vec![],
            });
        }
    }
    let p = opts.points;
    let mut pts: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let t = t0 * j as f64 / (p - 1) as f64;
            phi.iter().map(|v| t * v).collect()
        })
        .collect();
    let mut energies: Vec<f64> = pts.iter().map(|u| energy_raw(nl, op, u)).collect();
    let mut etas = vec![1.0_f64; p];
    let solver = SpdSolver::new(op, 0.0, 1e-13)?;
    let mut level_trace = Vec::new();
    let argmax = |e: &[f64]| -> usize {
        (1..e.len() - 1).fold(1, |b, j| if e[j] > e[b] { j } else { b })
    };
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let k = argmax(&energies);
        let u = &pts[k];
        let au = op.apply_vec(u);
        let grad = gradient_with(nl, op, u, &au);
        if sup_norm(&grad) < tol {
            level_trace.push(energies[k]);
            break;
        }
        let w = solver.solve(&nl.source(u))?;
        let mut d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        // drop the component along the local path tangent (A inner product)
        let tangent: Vec<f64> = pts[k + 1].iter().zip(&pts[k - 1]).map(|(a, b)| a - b).collect();
        let at = op.apply_vec(&tangent);
        let tt = crate::mesh::dot(&tangent, &at);
        if tt > 0.0 {
            let c = crate::mesh::dot(&d, &at) / tt;
            d.iter_mut().zip(&tangent).for_each(|(x, y)| *x -= c * y);
        }
        let dd = crate::mesh::dot(&grad, &d);
        if !(dd > 0.0) {
            level_trace.push(energies[k]);
            break;
        }
        let mut eta = (2.0 * etas[k]).min(1.0);
        let mut moved = false;
        while eta > 1e-14 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - eta * b).collect();
            let et = energy_raw(nl, op, &trial);
            if et <= energies[k] - 1e-4 * eta * dd {
                pts[k] = trial;
                energies[k] = et;
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        etas[k] = eta;
        let level = energies[argmax(&energies)];
        level_trace.push(level);
        if !moved {
            break;
        }
        let m = level_trace.len();
        if m > STAGNATION_WINDOW && level_trace[m - 1 - STAGNATION_WINDOW] - level <= 1e-10 * level.abs().max(1.0) {
            break;
        }
    }
    let k = argmax(&energies);
    let grad_at = |u: &[f64]| sup_norm(&gradient_with(nl, op, u, &op.apply_vec(u)));
    // Newton from the highest interior points in turn; the first polished
    // point that is a separated critical point at positive level wins
    let mut order: Vec<usize> = (1..p - 1).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]));
    let sep_min = 1e-3 * u0.sup_norm().max(1.0);
    let mut candidate = pts[k].clone();
    if opts.polish {
        for &j in order.iter().take(3) {
            let Some(pu) = newton_polish(nl, op, &pts[j], tol, 100) else {
                continue;
            };
            let good = grad_at(&pu) < tol
                && energy_raw(nl, op, &pu) > 0.0
                && crate::mesh::max_abs_diff(&pu, u0.values()) > sep_min;
            if good {
                candidate = pu;
                break;
            }
            if j == k && grad_at(&pu) < grad_at(&candidate) {
                candidate = pu;
            }
        }
    }
    let path = Path {
        points: pts
            .into_iter()
            .map(|v| FieldFunction::new(*op.grid(), v))
            .collect::<Result<_>>()?,
        t0,
    };
    let report = build_report(nl, op, candidate, tol, sweeps, true, Classification::MountainPass)?;
    let profile = energies.clone();
    if k == 0 || k == p - 1 {
        return Err(Error::MountainPass {
            message: "path maximum drifted to an endpoint".into(),
            profile,
        });
    }
    if !report.converged {
        return Err(Error::MountainPass {
            message: format!(
                "gradient stagnated at {:e} above tolerance {tol:e}",
                report.gradient_inf.unwrap_or(f64::NAN)
            ),
            profile,
        });
    }
    if !(report.energy.unwrap_or(f64::NAN) > 0.0) {
        return Err(Error::MountainPass {
            message: "critical level is not positive".into(),
            profile,
        });
    }
    let separation = report.solution.sub(u0)?.sup_norm();
    let merged = separation <= sep_min;
    let morse_index = morse_index(nl, op, report.solution.values());
    Ok(MountainPassOutcome {
        report,
        path,
        level_trace,
        separation,
        merged,
        morse_index,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub uncut_residual_inf: f64,
    pub cutoff_residual_inf: f64,
    pub gradient_inf: f64,
    pub min_value: f64,
    pub ordering_ok: bool,
    pub decay_exponent: Option<f64>,
    pub energy: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Residuals, ordering, positivity and energy of a candidate solution.
/// Passes iff the uncut residual is at most `tol`, `u >= u̲ - ε` and `u > 0`.
pub fn verify_solution(nl: &CutoffNonlinearity, op: &DiscreteFracLap, u: &FieldFunction, tol: f64) -> Result<CheckReport> {
    check_grid(nl, op, u)?;
    let au = op.apply_vec(u.values());
    let uncut = crate::semipositone::uncut_residual(op, u, nl.lambda, nl.mu, nl.q, nl.r)?.sup_norm();
    let src = nl.source(u.values());
    let cut = au.iter().zip(&src).fold(0.0_f64, |m, (a, s)| m.max((a - s).abs()));
    let min_value = u.min();
    let ord = ordering_ok(nl, u.values());
    Ok(CheckReport {
        uncut_residual_inf: uncut,
        cutoff_residual_inf: cut,
        gradient_inf: op.grid().h() * cut,
        min_value,
        ordering_ok: ord,
        decay_exponent: if min_value > 0.0 {
            boundary_decay_exponent(u, 0.05).ok()
        } else {
            None
        },
        energy: energy_with(nl, op, u.values(), &au),
        tol,
        passed: uncut <= tol && ord && min_value > 0.0,
    })
}
