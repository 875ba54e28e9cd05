//! Explicit barrier functions for the semipositone problem.
//!
//! * the torsion function `ψ` with `A ψ = 1`,
//! * the sublinear supersolution `z_λ` solving `A z = λ z^q`,
//! * the squared-eigenfunction profile `h` and the subsolution `λ^{α₁} φ₁²`,
//! * discrete certificates for all of them, checked node by node.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::DiscreteFracLap;
use crate::mesh::{gauss_legendre, sup_norm, FieldFunction};
use crate::spectral::{Eigenpair, SpdSolver};

/// Upper end of the subsolution threshold search.
pub const LAMBDA_CAP: f64 = 1e8;

/// Largest admissible disagreement between the two routes for `h` on the
/// inner 90% of the interval.
pub const H_ROUTE_TOLERANCE: f64 = 0.05;

/// `t^p` for `t > 0`, zero otherwise.
pub(crate) fn pos_pow(t: f64, p: f64) -> f64 {
    if t > 0.0 {
        t.powf(p)
    } else {
        0.0
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("q must lie in (0, 1), got {q}")))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("lambda must be positive, got {lambda}")))
    }
}

/// Default `α₁`: midpoint of `(1, 1/(1-q))`.
pub fn default_alpha1(q: f64) -> f64 {
    0.5 * (1.0 + 1.0 / (1.0 - q))
}

/// Torsion function: solves `A ψ = 1`.
pub fn torsion(op: &DiscreteFracLap, tol: f64) -> Result<FieldFunction> {
    let one = FieldFunction::constant(*op.grid(), 1.0);
    let psi = crate::spectral::solve_linear(op, 0.0, &one, tol)?;
    if let Some(node) = psi.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Positivity(format!("torsion function not positive at node {node}")));
    }
    Ok(psi)
}

/// Positive solution of `A z = λ z^q`, by monotone descent from the smallest
/// admissible multiple of the torsion function.
pub fn solve_sublinear(op: &DiscreteFracLap, lambda: f64, q: f64, tol: f64) -> Result<FieldFunction> {
    solve_sublinear_from(op, lambda, q, 1.0, tol)
}

/// As [`solve_sublinear`], starting from `factor` times the smallest `t`
/// with `t^{1-q} >= λ (max ψ)^q`; `factor` must be at least 1.
pub fn solve_sublinear_from(
    op: &DiscreteFracLap,
    lambda: f64,
    q: f64,
    factor: f64,
    tol: f64,
) -> Result<FieldFunction> {
    check_q(q)?;
    check_lambda(lambda)?;
    if !(factor >= 1.0) {
        return Err(Error::Parameter(format!(
            "start factor {factor} gives no supersolution; it must be at least 1"
        )));
    }
    let solver = SpdSolver::new(op, 0.0, 1e-13)?;
    let psi = solver.solve(&vec![1.0; op.n()])?;
    let t = factor * (lambda * sup_norm(&psi).powf(q)).powf(1.0 / (1.0 - q));
    let mut z: Vec<f64> = psi.iter().map(|v| t * v).collect();
    let max_iter = 10_000;
    for it in 1..=max_iter {
        let rhs: Vec<f64> = z.iter().map(|&v| lambda * pos_pow(v, q)).collect();
        let next = solver.solve(&rhs)?;
        let slack = 1e-12 * sup_norm(&z).max(1.0);
        let mut step = 0.0_f64;
        for (j, (a, b)) in next.iter().zip(&z).enumerate() {
            if !(*a > 0.0) {
                return Err(Error::Positivity(format!(
                    "sublinear iterate {it} is nonpositive at node {j}: the M-matrix property is broken"
                )));
            }
            if a - b > slack {
                return Err(Error::Monotonicity {
                    iteration: it,
                    node: j,
                    amount: a - b,
                });
            }
            step = step.max((a - b).abs());
        }
        z = next;
        if step <= tol {
            let az = op.apply_vec(&z);
            let res = az
                .iter()
                .zip(&z)
                .fold(0.0_f64, |m, (a, v)| m.max((a - lambda * v.powf(q)).abs()));
            if res <= tol {
                return FieldFunction::new(*op.grid(), z);
            }
        }
    }
    let az = op.apply_vec(&z);
    let residual = az
        .iter()
        .zip(&z)
        .fold(0.0_f64, |m, (a, v)| m.max((a - lambda * v.powf(q)).abs()));
    Err(Error::NonConvergence {
        method: "sublinear monotone descent",
        iterations: max_iter,
        residual,
        best: z,
        trace: vec![],
    })
}

/// The profile `h(x) = ∫ (φ₁(x) - φ₁(y))² |x - y|^{-1-2s} dy` from two
/// independent discretizations.
#[derive(Debug, Clone)]
pub struct HProfile {
    /// From the product identity: `(2 λ₁ φ₁² - A φ₁²) / C(1,s)`.
    pub h: FieldFunction,
    /// Direct quadrature of the defining integral against the
    /// piecewise-linear interpolant of `φ₁`, plus the exterior tail.
    pub direct: FieldFunction,
    /// Largest relative disagreement on the inner 90% of the interval.
    pub max_rel_dev: f64,
}

/// Computes `h` via the identity `A(φ₁²) = 2 λ₁ φ₁² - C(1,s) h` and checks it
/// against direct quadrature.
pub fn compute_h(op: &DiscreteFracLap, eig: &Eigenpair) -> Result<HProfile> {
    if *eig.phi1.grid() != *op.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *op.grid();
    let phi = eig.phi1.values();
    let phi2: Vec<f64> = phi.iter().map(|v| v * v).collect();
    let a_phi2 = op.apply_vec(&phi2);
    let h: Vec<f64> = phi2
        .iter()
        .zip(&a_phi2)
        .map(|(p2, a)| (2.0 * eig.lambda1 * p2 - a) / op.c_ns())
        .collect();
    let direct = h_direct(op, phi);

    let mut max_rel_dev = 0.0_f64;
    for j in 0..grid.n() {
        if (grid.node(j) - grid.midpoint()).abs() <= 0.9 * grid.half_width() {
            max_rel_dev = max_rel_dev.max(((h[j] - direct[j]) / direct[j]).abs());
        }
    }
    if let Some(node) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Consistency(format!("h is not positive at node {node}")));
    }
    if max_rel_dev > H_ROUTE_TOLERANCE {
        return Err(Error::Consistency(format!(
            "h routes disagree by {:.2}% on the inner interval",
            100.0 * max_rel_dev
        )));
    }
    Ok(HProfile {
        h: FieldFunction::new(grid, h)?,
        direct: FieldFunction::new(grid, direct)?,
        max_rel_dev,
    })
}

fn h_direct(op: &DiscreteFracLap, phi: &[f64]) -> Vec<f64> {
    let n = op.n();
    let s = op.s();
    let hh = op.grid().h();
    let e = -1.0 - 2.0 * s;
    let (gx, gw) = gauss_legendre(8);
    let ts: Vec<f64> = gx.iter().map(|x| 0.5 * (x + 1.0)).collect();
    // kernel at the Gauss points of the cell k..k+1 (in units of h), times h·weight
    let kernel: Vec<[f64; 8]> = (0..n)
        .map(|k| {
            let mut row = [0.0; 8];
            for m in 0..8 {
                row[m] = 0.5 * gw[m] * hh * ((k as f64 + ts[m]) * hh).powf(e);
            }
            row
        })
        .collect();
    let near = hh.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    // padded values: index 0 and n+1 are the boundary nodes
    let mut p = vec![0.0; n + 2];
    p[1..=n].copy_from_slice(phi);

    (1..=n)
        .map(|i| {
            let pi = p[i];
            let sl = (p[i] - p[i - 1]) / hh;
            let sr = (p[i + 1] - p[i]) / hh;
            let mut acc = (sl * sl + sr * sr) * near;
            for k in 1..=(n - i) {
                let (a, b) = (p[i + k], p[i + k + 1]);
                acc += cell_sum(&kernel[k], &ts, pi, a, b);
            }
            for k in 1..i {
                let (a, b) = (p[i - k], p[i - k - 1]);
                acc += cell_sum(&kernel[k], &ts, pi, a, b);
            }
            acc + pi * pi * op.exterior_tail(i - 1)
        })
        .collect()
}

fn cell_sum(kernel: &[f64; 8], ts: &[f64], pi: f64, a: f64, b: f64) -> f64 {
    kernel
        .iter()
        .zip(ts)
        .map(|(k, t)| {
            let d = pi - (a + t * (b - a));
            k * d * d
        })
        .sum()
}

fn check_alpha1(alpha1: f64, q: f64) -> Result<()> {
    let hi = 1.0 / (1.0 - q);
    if alpha1 > 1.0 && alpha1 < hi {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "alpha1 = {alpha1} outside the open interval (1, {hi})"
        )))
    }
}

/// Subsolution candidate `λ^{α₁} φ₁²`.
pub fn subsolution(eig: &Eigenpair, lambda: f64, alpha1: f64, q: f64) -> Result<FieldFunction> {
    check_q(q)?;
    check_lambda(lambda)?;
    check_alpha1(alpha1, q)?;
    let c = lambda.powf(alpha1);
    eig.phi1.map(|p| c * p * p)
}

/// `max_i [(A u)_i - λ (u_i^q - 1)]`; the subsolution inequality holds at
/// every node iff this is `<= 0`.
pub fn certify_subsolution(op: &DiscreteFracLap, u_under: &FieldFunction, lambda: f64, q: f64) -> Result<f64> {
    let au = op.apply(u_under)?;
    Ok(au
        .values()
        .iter()
        .zip(u_under.values())
        .map(|(a, &u)| a - lambda * (pos_pow(u, q) - 1.0))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsolutionThreshold {
    /// Least certified `λ` found; the certificate passes here.
    pub lambda_star: f64,
    /// Certificate fails here; `lambda_fail >= lambda_star (1 - tol)`.
    pub lambda_fail: f64,
    pub margin_at_star: f64,
    /// Least `λ >= λ*` with `λ^{α₁} φ₁² <= z_λ` at every node.
    pub lambda_ordered: f64,
    pub ordered_at_star: bool,
    /// `(λ, margin)` for every evaluation.
    pub trace: Vec<(f64, f64)>,
}

/// Least `λ` at which `λ^{α₁} φ₁²` is a certified discrete subsolution,
/// located by a doubling scan and a geometric bisection.
pub fn subsolution_threshold(
    op: &DiscreteFracLap,
    eig: &Eigenpair,
    q: f64,
    alpha1: f64,
    tol: f64,
) -> Result<SubsolutionThreshold> {
    check_q(q)?;
    check_alpha1(alpha1, q)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!("relative tolerance must lie in (0, 1), got {tol}")));
    }
    let mut trace = Vec::new();
    let mut margin = |lambda: f64| -> Result<f64> {
        let u = subsolution(eig, lambda, alpha1, q)?;
        let m = certify_subsolution(op, &u, lambda, q)?;
        trace.push((lambda, m));
        Ok(m)
    };

    let (mut lo, mut hi);
    let start = 1.0;
    if margin(start)? <= 0.0 {
        hi = start;
        lo = start / 2.0;
        while margin(lo)? <= 0.0 {
            hi = lo;
            lo /= 2.0;
            if lo < 1e-12 {
                return Err(Error::Infeasible {
                    message: "subsolution certificate holds for every tested lambda".into(),
                    trace,
                });
            }
        }
    } else {
        lo = start;
        hi = 2.0 * start;
        loop {
            if hi > LAMBDA_CAP {
                return Err(Error::Infeasible {
                    message: format!("no certified subsolution below lambda = {LAMBDA_CAP:e}"),
                    trace,
                });
            }
            if margin(hi)? <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
    }
    while (hi - lo) / hi > tol {
        let mid = (lo * hi).sqrt();
        if margin(mid)? <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let margin_at_star = trace
        .iter()
        .rev()
        .find(|(l, _)| *l == hi)
        .map(|(_, m)| *m)
        .unwrap_or(f64::NAN);

    let z1 = solve_sublinear(op, 1.0, q, 1e-12)?;
    let beta = 1.0 / (1.0 - q) - alpha1;
    let raw = eig
        .phi1
        .values()
        .iter()
        .zip(z1.values())
        .map(|(p, z)| (p * p / z).powf(1.0 / beta))
        .fold(0.0, f64::max);
    Ok(SubsolutionThreshold {
        lambda_star: hi,
        lambda_fail: lo,
        margin_at_star,
        lambda_ordered: raw.max(hi),
        ordered_at_star: raw <= hi,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierMargins {
    /// `max_i [(A u̲)_i - λ(u̲_i^q - 1)]`, must be `<= 0`.
    pub subsolution: f64,
    /// `min_i [(A z)_i - λ(z_i^q - 1)]`, must be `>= 0`.
    pub supersolution: f64,
    /// `min_i [(A ū)_i - λ(ū_i^q - 1)]` for `ū = λ^{α₂} ψ` at `μ = 0`.
    pub psi_supersolution: f64,
    /// `min_i (z_i - u̲_i)`, must be `>= 0`.
    pub ordering_gap: f64,
}

/// All barriers at one `λ`.
#[derive(Debug, Clone)]
pub struct BarrierSet {
    pub lambda: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub u_under: FieldFunction,
    pub z_super: FieldFunction,
    pub psi_super: FieldFunction,
    pub margins: BarrierMargins,
}

impl BarrierSet {
    /// `z1` is the sublinear solution at `λ = 1`; `z_λ` is obtained from it
    /// by the exact scaling `z_λ = λ^{1/(1-q)} z₁`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        op: &DiscreteFracLap,
        eig: &Eigenpair,
        psi: &FieldFunction,
        z1: &FieldFunction,
        lambda: f64,
        q: f64,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<Self> {
        if !(alpha2 > 1.0 / (1.0 - q)) {
            return Err(Error::Parameter(format!(
                "alpha2 = {alpha2} must exceed 1/(1-q) = {}",
                1.0 / (1.0 - q)
            )));
        }
        let u_under = subsolution(eig, lambda, alpha1, q)?;
        let z_super = z1.scaled(lambda.powf(1.0 / (1.0 - q)));
        let psi_super = psi.scaled(lambda.powf(alpha2));
        let sub = certify_subsolution(op, &u_under, lambda, q)?;
        let super_margin = |u: &FieldFunction| -> Result<f64> {
            let au = op.apply(u)?;
            Ok(au
                .values()
                .iter()
                .zip(u.values())
                .map(|(a, &v)| a - lambda * (pos_pow(v, q) - 1.0))
                .fold(f64::INFINITY, f64::min))
        };
        let margins = BarrierMargins {
            subsolution: sub,
            supersolution: super_margin(&z_super)?,
            psi_supersolution: super_margin(&psi_super)?,
            ordering_gap: z_super.sub(&u_under)?.min(),
        };
        Ok(Self {
            lambda,
            alpha1,
            alpha2,
            u_under,
            z_super,
            psi_super,
            margins,
        })
    }

    pub fn certified(&self) -> bool {
        self.margins.subsolution <= 0.0 && self.margins.supersolution >= 0.0 && self.margins.ordering_gap >= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_decay_exponent, Grid};
    use crate::spectral::principal_eigenpair;

    fn op(n: usize, s: f64) -> DiscreteFracLap {
        DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, n).unwrap(), s).unwrap()
    }

    #[test]
    fn torsion_is_positive_and_symmetric() {
        let a = op(300, 0.3);
        let psi = torsion(&a, 1e-12).unwrap();
        let v = psi.values();
        assert!(psi.min() > 0.0);
        assert!((0..300).all(|i| (v[i] - v[299 - i]).abs() < 1e-10));
    }

    #[test]
    fn sublinear_scaling_identity() {
        let a = op(64, 0.3);
        let tol = 1e-10;
        let z1 = solve_sublinear(&a, 1.0, 0.5, tol).unwrap();
        let z16 = solve_sublinear(&a, 16.0, 0.5, tol).unwrap();
        let dev = z16.sub(&z1.scaled(256.0)).unwrap().sup_norm() / z16.sup_norm();
        assert!(dev < 10.0 * tol, "{dev}");
    }

    #[test]
    fn sublinear_solution_is_unique() {
        // fixed point reached from two supersolutions and from a small subsolution
        let a = op(32, 0.4);
        let tol = 1e-11;
        let za = solve_sublinear_from(&a, 3.0, 0.6, 1.0, tol).unwrap();
        let zb = solve_sublinear_from(&a, 3.0, 0.6, 7.5, tol).unwrap();
        assert!(za.sub(&zb).unwrap().sup_norm() < 10.0 * tol);

        let inv = a.to_dense().try_inverse().unwrap();
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let mut u: Vec<f64> = eig.phi1.values().iter().map(|p| 1e-3 * p).collect();
        for _ in 0..2000 {
            let rhs = nalgebra::DVector::from_iterator(32, u.iter().map(|v| 3.0 * v.powf(0.6)));
            let next = &inv * rhs;
            assert!(next.iter().zip(&u).all(|(a, b)| a + 1e-12 >= *b));
            u = next.iter().copied().collect();
        }
        let dev = crate::mesh::max_abs_diff(&u, za.values());
        assert!(dev < 10.0 * tol, "{dev}");
    }

    #[test]
    fn sublinear_rejects_bad_parameters() {
        let a = op(16, 0.3);
        assert!(matches!(solve_sublinear(&a, 1.0, 1.0, 1e-8), Err(Error::Parameter(_))));
        assert!(matches!(solve_sublinear(&a, -1.0, 0.5, 1e-8), Err(Error::Parameter(_))));
        assert!(solve_sublinear_from(&a, 1.0, 0.5, 0.5, 1e-8).is_err());
    }

    #[test]
    fn sublinear_decays_like_distance_to_the_s() {
        let s = 0.25;
        let a = op(1024, s);
        let z = solve_sublinear(&a, 1.0, 0.5, 1e-10).unwrap();
        let e = boundary_decay_exponent(&z, 0.05).unwrap();
        assert!(e >= 0.7 * s && e <= 1.3 * s, "{e}");
    }

    #[test]
    fn h_routes_agree_and_h_is_positive() {
        for s in [0.1, 0.25, 0.4] {
            let a = op(256, s);
            let eig = principal_eigenpair(&a, 1e-12).unwrap();
            let hp = compute_h(&a, &eig).unwrap();
            assert!(hp.h.min() > 0.0);
            assert!(hp.max_rel_dev < 0.02, "s={s}: {}", hp.max_rel_dev);
        }
    }

    #[test]
    fn h_is_positive_on_a_fine_grid() {
        let a = op(1024, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let hp = compute_h(&a, &eig).unwrap();
        assert!(hp.h.min() > 0.0);
        assert!(hp.max_rel_dev < 0.02, "{}", hp.max_rel_dev);
    }

    #[test]
    fn subsolution_formula_and_range() {
        let a = op(64, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let u = subsolution(&eig, 4.0, 1.5, 0.5).unwrap();
        for (u, p) in u.values().iter().zip(eig.phi1.values()) {
            assert!((u - 8.0 * p * p).abs() < 1e-13 * 8.0);
            assert!(*u <= 8.0 * (1.0 + 1e-15));
        }
        assert!(matches!(subsolution(&eig, 4.0, 1.0, 0.5), Err(Error::Parameter(_))));
        assert!(matches!(subsolution(&eig, 4.0, 2.0, 0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn certificate_ladder_and_threshold() {
        let a = op(256, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let th = subsolution_threshold(&a, &eig, 0.5, 1.5, 1e-3).unwrap();
        let m = |l: f64| certify_subsolution(&a, &subsolution(&eig, l, 1.5, 0.5).unwrap(), l, 0.5).unwrap();
        assert!(m(th.lambda_star) <= 0.0);
        assert!(m(th.lambda_fail) > 0.0);
        assert!(th.lambda_fail >= th.lambda_star * (1.0 - 1e-3));
        assert!(m(0.5 * th.lambda_star) > 0.0);
        assert!(m(2.0 * th.lambda_star) <= 0.0);
        assert!(m(10.0 * th.lambda_star) <= 0.0);
        // ladder: finite everywhere
        let mut l = 1e-2;
        while l < 1e6 {
            assert!(m(l).is_finite());
            l *= 3.0;
        }
    }

    #[test]
    fn certificate_is_specific_to_the_formula() {
        let a = op(64, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let th = subsolution_threshold(&a, &eig, 0.5, 1.5, 1e-3).unwrap();
        let lambda = 1.5 * th.lambda_star;
        let u = subsolution(&eig, lambda, 1.5, 0.5).unwrap();
        assert!(certify_subsolution(&a, &u, lambda, 0.5).unwrap() <= 0.0);
        // a positive constant shift ruins the inequality near the boundary
        let broken = (1..40)
            .map(|k| 10f64.powi(k - 20))
            .any(|c| certify_subsolution(&a, &u.map(|v| v + c).unwrap(), lambda, 0.5).unwrap() > 0.0);
        assert!(broken);
    }

    #[test]
    fn threshold_grows_with_alpha1() {
        let a = op(128, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let ts: Vec<f64> = [1.5, 1.7, 1.9]
            .iter()
            .map(|&al| subsolution_threshold(&a, &eig, 0.5, al, 1e-3).unwrap().lambda_star)
            .collect();
        assert!(ts[0] < ts[1] && ts[1] < ts[2], "{ts:?}");
    }

    #[test]
    fn barrier_set_orders_at_the_ordering_threshold() {
        let a = op(128, 0.25);
        let eig = principal_eigenpair(&a, 1e-12).unwrap();
        let th = subsolution_threshold(&a, &eig, 0.5, 1.5, 1e-3).unwrap();
        let psi = torsion(&a, 1e-12).unwrap();
        let z1 = solve_sublinear(&a, 1.0, 0.5, 1e-12).unwrap();
        let b = BarrierSet::build(&a, &eig, &psi, &z1, th.lambda_ordered, 0.5, 1.5, 2.5).unwrap();
        assert!(b.certified(), "{:?}", b.margins);
        assert!(b.u_under.min() > 0.0 && b.z_super.min() > 0.0);
    }
}
