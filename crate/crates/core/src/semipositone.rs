//! Monotone iteration between ordered barriers and the discrete existence
//! detector used to bracket `λ₀ = inf Λ`.

use serde::{Deserialize, Serialize};

use crate::barriers::{check_lambda, check_q, pos_pow, solve_sublinear};
use crate::error::{Error, Result};
use crate::fraclap::DiscreteFracLap;
use crate::mesh::{boundary_decay_exponent, sup_norm, FieldFunction};
use crate::spectral::SpdSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    MonotoneLimit,
    Minimizer,
    MountainPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Ascend,
    Descend,
}

/// A computed solution together with its certificates.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: FieldFunction,
    /// Cut-off energy, when a variational functional is in play.
    pub energy: Option<f64>,
    /// `‖A u - λ(u^q - 1) - μ u^r‖_∞` for the uncut equation.
    pub residual_inf: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub classification: Classification,
    pub ordering_ok: bool,
    pub min_value: f64,
    /// `None` when the solution is not positive in the fit window.
    pub decay_exponent: Option<f64>,
    /// Sup norm of the energy gradient (variational solutions only).
    pub gradient_inf: Option<f64>,
}

/// Pointwise residual of `A u = λ(u^q - 1) + μ u^r`, with `t^q` and `t^r`
/// read as zero for `t < 0`.
pub fn uncut_residual(op: &DiscreteFracLap, u: &FieldFunction, lambda: f64, mu: f64, q: f64, r: f64) -> Result<FieldFunction> {
    let au = op.apply(u)?;
    let res = residual_raw(au.values(), u.values(), lambda, mu, q, r);
    FieldFunction::new(*op.grid(), res)
}

fn residual_raw(au: &[f64], u: &[f64], lambda: f64, mu: f64, q: f64, r: f64) -> Vec<f64> {
    au.iter()
        .zip(u)
        .map(|(a, &v)| a - rhs_value(v, lambda, mu, q, r))
        .collect()
}

fn rhs_value(t: f64, lambda: f64, mu: f64, q: f64, r: f64) -> f64 {
    let mut v = lambda * (pos_pow(t, q) - 1.0);
    if mu != 0.0 {
        v += mu * pos_pow(t, r);
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub struct IterateOptions {
    /// Shift `M >= 0`: solves `(A + M) u_{k+1} = rhs(u_k) + M u_k`.
    pub shift: f64,
    pub max_iter: usize,
    /// Descend only: stop as soon as an iterate has a nonpositive entry.
    pub stop_at_nonpositive: bool,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self {
            shift: 0.0,
            max_iter: 100_000,
            stop_at_nonpositive: false,
        }
    }
}

/// Monotone iteration `u_{k+1} = A^{-1}(λ(u_k^q - 1) + μ u_k^r)` from
/// `lower` (ascend) or `upper` (descend).
#[allow(clippy::too_many_arguments)]
pub fn monotone_iterate(
    op: &DiscreteFracLap,
    lambda: f64,
    mu: f64,
    q: f64,
    r: f64,
    lower: &FieldFunction,
    upper: &FieldFunction,
    direction: Direction,
    tol: f64,
) -> Result<SolveReport> {
    monotone_iterate_with(op, lambda, mu, q, r, lower, upper, direction, tol, IterateOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn monotone_iterate_with(
    op: &DiscreteFracLap,
    lambda: f64,
    mu: f64,
    q: f64,
    r: f64,
    lower: &FieldFunction,
    upper: &FieldFunction,
    direction: Direction,
    tol: f64,
    opts: IterateOptions,
) -> Result<SolveReport> {
    check_lambda(lambda)?;
    check_q(q)?;
    if !(mu >= 0.0) {
        return Err(Error::Parameter(format!("mu must be nonnegative, got {mu}")));
    }
    if !(r > 1.0) {
        return Err(Error::Parameter(format!("r must exceed 1, got {r}")));
    }
    if !(tol > 0.0) || !(opts.shift >= 0.0) {
        return Err(Error::Domain("tolerance must be positive and shift nonnegative".into()));
    }
    lower.same_grid(upper)?;
    if *lower.grid() != *op.grid() {
        return Err(Error::GridMismatch);
    }
    let scale = upper.sup_norm().max(1.0);
    let eps = 1e-10 * scale;
    if direction == Direction::Ascend {
        if let Some(j) = (0..lower.len()).find(|&j| lower.values()[j] > upper.values()[j] + eps) {
            return Err(Error::Domain(format!("barriers are not ordered at node {j}")));
        }
    }

    let solver = SpdSolver::new(op, opts.shift, 1e-13)?;
    let mut u = match direction {
        Direction::Ascend => lower.values().to_vec(),
        Direction::Descend => upper.values().to_vec(),
    };
    let sign = match direction {
        Direction::Ascend => 1.0,
        Direction::Descend => -1.0,
    };
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let rhs: Vec<f64> = u
            .iter()
            .map(|&v| rhs_value(v, lambda, mu, q, r) + opts.shift * v)
            .collect();
        let next = solver.solve(&rhs)?;
        let slack = 1e-11 * sup_norm(&u).max(1.0);
        let mut step = 0.0_f64;
        for (j, (a, b)) in next.iter().zip(&u).enumerate() {
            let moved = sign * (a - b);
            if moved < -slack {
                return Err(Error::Monotonicity {
                    iteration: it,
                    node: j,
                    amount: -moved,
                });
            }
            step = step.max((a - b).abs());
        }
        u = next;
        if opts.stop_at_nonpositive && direction == Direction::Descend && u.iter().any(|&v| v <= 0.0) {
            let au = op.apply_vec(&u);
            residual = sup_norm(&residual_raw(&au, &u, lambda, mu, q, r));
            converged = true;
            break;
        }
        if step <= tol {
            let au = op.apply_vec(&u);
            residual = sup_norm(&residual_raw(&au, &u, lambda, mu, q, r));
            if residual <= tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let au = op.apply_vec(&u);
        let res = sup_norm(&residual_raw(&au, &u, lambda, mu, q, r));
        return Err(Error::NonConvergence {
            method: "monotone iteration",
            iterations,
            residual: res,
            best: u,
            trace: vec![],
        });
    }
    let solution = FieldFunction::new(*op.grid(), u)?;
    let min_value = solution.min();
    let inside = solution
        .values()
        .iter()
        .zip(lower.values().iter().zip(upper.values()))
        .all(|(&v, (&lo, &hi))| v >= lo - eps && v <= hi + eps);
    let decay_exponent = if min_value > 0.0 {
        boundary_decay_exponent(&solution, 0.05).ok()
    } else {
        None
    };
    Ok(SolveReport {
        solution,
        energy: None,
        residual_inf: residual,
        tol,
        iterations,
        converged,
        classification: Classification::MonotoneLimit,
        ordering_ok: inside && min_value > 0.0,
        min_value,
        decay_exponent,
        gradient_inf: None,
    })
}

fn check_alpha2(alpha2: f64, q: f64) -> Result<()> {
    if alpha2 > 1.0 / (1.0 - q) && alpha2.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "alpha2 = {alpha2} must exceed 1/(1-q) = {}",
            1.0 / (1.0 - q)
        )))
    }
}

/// `(A ū)_i - λ(ū_i^q - 1)` and `ū_i^r` for `ū = λ^{α₂} ψ`.
fn psi_margin_parts(op: &DiscreteFracLap, lambda: f64, q: f64, r: f64, alpha2: f64, psi: &FieldFunction) -> Result<(FieldFunction, Vec<f64>, Vec<f64>)> {
    check_lambda(lambda)?;
    check_q(q)?;
    check_alpha2(alpha2, q)?;
    let upper = psi.scaled(lambda.powf(alpha2));
    let au = op.apply(&upper)?;
    let base: Vec<f64> = au
        .values()
        .iter()
        .zip(upper.values())
        .map(|(a, &v)| a - lambda * (pos_pow(v, q) - 1.0))
        .collect();
    let growth: Vec<f64> = upper.values().iter().map(|&v| pos_pow(v, r)).collect();
    Ok((upper, base, growth))
}

/// The scaled torsion supersolution `ū = λ^{α₂} ψ` and its margin
/// `min_i [(A ū)_i - λ(ū_i^q - 1) - μ ū_i^r]`; certified iff the margin is
/// nonnegative.
pub fn supersolution_mu(
    op: &DiscreteFracLap,
    lambda: f64,
    mu: f64,
    q: f64,
    r: f64,
    alpha2: f64,
    psi: &FieldFunction,
) -> Result<(FieldFunction, f64)> {
    let (upper, base, growth) = psi_margin_parts(op, lambda, q, r, alpha2, psi)?;
    let margin = base
        .iter()
        .zip(&growth)
        .map(|(b, g)| b - mu * g)
        .fold(f64::INFINITY, f64::min);
    Ok((upper, margin))
}

/// Largest `μ` for which [`supersolution_mu`] certifies. The margin is
/// affine in `μ`, so this is `min_i base_i / ū_i^r`. Negative when the
/// certificate already fails at `μ = 0`.
pub fn max_certified_mu(op: &DiscreteFracLap, lambda: f64, q: f64, r: f64, alpha2: f64, psi: &FieldFunction) -> Result<f64> {
    let (_, base, growth) = psi_margin_parts(op, lambda, q, r, alpha2, psi)?;
    let min_base = base.iter().copied().fold(f64::INFINITY, f64::min);
    if min_base < 0.0 {
        return Ok(min_base);
    }
    Ok(base
        .iter()
        .zip(&growth)
        .map(|(b, g)| b / g)
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy)]
pub struct DetectorOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Lower end of the bracketing scan.
    pub lambda_start: f64,
    /// Upper end of the bracketing scan.
    pub lambda_cap: f64,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50_000,
            lambda_start: 1e-2,
            lambda_cap: 1e8,
        }
    }
}

/// Outcome of the descend iteration from `z_λ` used as existence detector.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectorOutcome {
    pub lambda: f64,
    pub exists: bool,
    pub min_value: f64,
    pub residual_inf: f64,
    pub iterations: usize,
}

/// `λ` is declared in the discrete existence set iff the descend iteration
/// from `z_λ = λ^{1/(1-q)} z₁` converges with a positive limit. Step and
/// residual tolerances are `opts.tol * max(1, ‖z_λ‖_∞)`.
/// `z1` is the sublinear solution at `λ = 1`.
pub fn existence_detector(op: &DiscreteFracLap, z1: &FieldFunction, lambda: f64, q: f64, opts: &DetectorOptions) -> Result<DetectorOutcome> {
    let upper = z1.scaled(lambda.powf(1.0 / (1.0 - q)));
    let lower = FieldFunction::zeros(*op.grid());
    let tol = opts.tol * upper.sup_norm().max(1.0);
    let iter_opts = IterateOptions {
        shift: 0.0,
        max_iter: opts.max_iter,
        stop_at_nonpositive: true,
    };
    match monotone_iterate_with(op, lambda, 0.0, q, 2.0, &lower, &upper, Direction::Descend, tol, iter_opts) {
        Ok(rep) => Ok(DetectorOutcome {
            lambda,
            exists: rep.min_value > 0.0 && rep.residual_inf <= tol,
            min_value: rep.min_value,
            residual_inf: rep.residual_inf,
            iterations: rep.iterations,
        }),
        Err(Error::NonConvergence { iterations, residual, best, .. }) => Ok(DetectorOutcome {
            lambda,
            exists: false,
            min_value: best.iter().copied().fold(f64::INFINITY, f64::min),
            residual_inf: residual,
            iterations,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lambda0Bracket {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Detector re-run at both ends.
    pub at_lo: DetectorOutcome,
    pub at_hi: DetectorOutcome,
    /// Every detector evaluation `(λ, exists)` in order.
    pub trace: Vec<(f64, bool)>,
}

/// Brackets `λ₀` by a doubling scan and geometric bisection on the
/// existence detector.
pub fn estimate_lambda0(op: &DiscreteFracLap, q: f64, rel_tol: f64) -> Result<Lambda0Bracket> {
    estimate_lambda0_with(op, q, rel_tol, &DetectorOptions::default())
}

pub fn estimate_lambda0_with(op: &DiscreteFracLap, q: f64, rel_tol: f64, opts: &DetectorOptions) -> Result<Lambda0Bracket> {
    check_q(q)?;
    if !(rel_tol > 0.0) {
        return Err(Error::Domain(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let z1 = solve_sublinear(op, 1.0, q, 1e-12)?;
    let mut trace = Vec::new();
    let detect = |lambda: f64, trace: &mut Vec<(f64, bool)>| -> Result<bool> {
        let d = existence_detector(op, &z1, lambda, q, opts)?;
        trace.push((lambda, d.exists));
        Ok(d.exists)
    };
    let mut lo = opts.lambda_start;
    if detect(lo, &mut trace)? {
        return Err(Error::Bracket {
            message: format!("detector already true at the lower end lambda = {lo:e}"),
            trace,
        });
    }
    let mut hi = 2.0 * lo;
    loop {
        if hi > opts.lambda_cap {
            return Err(Error::Bracket {
                message: format!("detector false up to lambda = {:e}", opts.lambda_cap),
                trace,
            });
        }
        if detect(hi, &mut trace)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo) / hi > rel_tol {
        let mid = (lo * hi).sqrt();
        if detect(mid, &mut trace)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let at_lo = existence_detector(op, &z1, lo, q, opts)?;
    let at_hi = existence_detector(op, &z1, hi, q, opts)?;
    if at_lo.exists || !at_hi.exists {
        return Err(Error::Consistency("detector changed its verdict on re-evaluation".into()));
    }
    Ok(Lambda0Bracket {
        lambda_lo: lo,
        lambda_hi: hi,
        at_lo,
        at_hi,
        trace,
    })
}
