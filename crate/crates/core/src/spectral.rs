//! Linear solves, the principal eigenpair and discrete embedding constants.

use nalgebra::{DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::DiscreteFracLap;
use crate::mesh::{dot, lp_norm_raw, sup_norm, FieldFunction};

/// Grids up to this size are solved with a cached dense Cholesky factor;
/// larger ones use conjugate gradients on the FFT product.
pub const DENSE_LIMIT: usize = 1024;

enum Backend {
    Dense(nalgebra::linalg::Cholesky<f64, Dyn>),
    Cg { tol: f64, max_iter: usize },
}

/// Reusable solver for `(A + shift I) u = b`.
pub struct SpdSolver<'a> {
    op: &'a DiscreteFracLap,
    shift: f64,
    backend: Backend,
}

impl<'a> SpdSolver<'a> {
    /// Picks the backend by grid size; `cg_tol` is the relative residual
    /// target of the iterative backend.
    pub fn new(op: &'a DiscreteFracLap, shift: f64, cg_tol: f64) -> Result<Self> {
        if op.n() <= DENSE_LIMIT {
            Self::dense(op, shift)
        } else {
            Ok(Self::cg(op, shift, cg_tol))
        }
    }

    pub fn dense(op: &'a DiscreteFracLap, shift: f64) -> Result<Self> {
        if !(shift >= 0.0) {
            return Err(Error::Domain(format!("shift must be nonnegative, got {shift}")));
        }
        let n = op.n();
        let m = DMatrix::from_fn(n, n, |i, j| op.entry(i, j) + if i == j { shift } else { 0.0 });
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Consistency("operator is not positive definite".into()))?;
        Ok(Self {
            op,
            shift,
            backend: Backend::Dense(chol),
        })
    }

    pub fn cg(op: &'a DiscreteFracLap, shift: f64, tol: f64) -> Self {
        Self {
            op,
            shift,
            backend: Backend::Cg {
                tol,
                max_iter: 20 * op.n() + 100,
            },
        }
    }

    pub fn op(&self) -> &DiscreteFracLap {
        self.op
    }

    pub(crate) fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.op.apply_vec(u);
        if self.shift != 0.0 {
            for (o, v) in out.iter_mut().zip(u) {
                *o += self.shift * v;
            }
        }
        out
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Dense(chol) => {
                let mut x = chol.solve(&DVector::from_column_slice(rhs));
                // one refinement sweep brings the residual to rounding level
                let ax = self.apply(x.as_slice());
                let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                x += chol.solve(&DVector::from_vec(r));
                Ok(x.data.into())
            }
            Backend::Cg { tol, max_iter } => self.conjugate_gradient(rhs, *tol, *max_iter),
        }
    }

    fn conjugate_gradient(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = b.len();
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut trace = Vec::new();
        let (mut best, mut best_res) = (x.clone(), 1.0);
        for it in 0..max_iter {
            let ap = self.apply(&p);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            let rel = rr_new.sqrt() / bnorm;
            if rel < best_res {
                best_res = rel;
                best.copy_from_slice(&x);
            }
            if it % 16 == 0 {
                trace.push(rel);
            }
            if rel <= tol {
                // recursive residual drifts; confirm with a true one
                let ax = self.apply(&x);
                let true_rel = b.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt() / bnorm;
                if true_rel <= tol {
                    return Ok(x);
                }
                r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                p = r.clone();
                rr = dot(&r, &r);
                continue;
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(Error::NonConvergence {
            method: "conjugate gradients",
            iterations: max_iter,
            residual: best_res,
            best,
            trace,
        })
    }
}

/// Solves `(A + shift I) u = rhs` with `‖residual‖₂ <= tol ‖rhs‖₂`.
pub fn solve_linear(
    op: &DiscreteFracLap,
    shift: f64,
    rhs: &FieldFunction,
    tol: f64,
) -> Result<FieldFunction> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if *rhs.grid() != *op.grid() {
        return Err(Error::GridMismatch);
    }
    let solver = SpdSolver::new(op, shift, tol)?;
    let u = solver.solve(rhs.values())?;
    let au = solver.apply(&u);
    let res: f64 = rhs.values().iter().zip(&au).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let bnorm = dot(rhs.values(), rhs.values()).sqrt();
    if res > tol * bnorm {
        return Err(Error::NonConvergence {
            method: "linear solve",
            iterations: 1,
            residual: res / bnorm,
            best: u,
            trace: vec![],
        });
    }
    FieldFunction::new(*op.grid(), u)
}

/// Smallest eigenvalue of the discrete operator and its positive,
/// sup-normalized eigenvector.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda1: f64,
    pub phi1: FieldFunction,
    /// `‖A φ₁ - λ₁ φ₁‖_∞` at exit.
    pub residual: f64,
    pub iterations: usize,
}

pub fn principal_eigenpair(op: &DiscreteFracLap, rtol: f64) -> Result<Eigenpair> {
    principal_eigenpair_from(op, &FieldFunction::constant(*op.grid(), 1.0), rtol)
}

/// Inverse power iteration from `start` with Rayleigh-quotient stopping.
pub fn principal_eigenpair_from(
    op: &DiscreteFracLap,
    start: &FieldFunction,
    rtol: f64,
) -> Result<Eigenpair> {
    if !(rtol > 0.0) {
        return Err(Error::Domain(format!("rtol must be positive, got {rtol}")));
    }
    let solver = SpdSolver::new(op, 0.0, (rtol * 1e-3).clamp(1e-14, 1e-10))?;
    let mut v = start.values().to_vec();
    let norm = sup_norm(&v);
    if norm == 0.0 {
        return Err(Error::Domain("start vector is zero".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    let mut trace = Vec::new();
    let max_iter = 5000;
    let mut last_residual = f64::INFINITY;
    for it in 1..=max_iter {
        let w = solver.solve(&v)?;
        // sup-normalize by the entry of largest modulus so the sign is fixed
        let pivot = w.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        v = w.iter().map(|x| x / pivot).collect();
        let av = op.apply_vec(&v);
        let lambda = dot(&v, &av) / dot(&v, &v);
        let residual = av.iter().zip(&v).fold(0.0_f64, |m, (a, x)| m.max((a - lambda * x).abs()));
        trace.push(lambda);
        last_residual = residual;
        if residual <= rtol * lambda {
            if let Some(node) = v.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Consistency(format!(
                    "principal eigenvector not positive at node {node}"
                )));
            }
            return Ok(Eigenpair {
                lambda1: lambda,
                phi1: FieldFunction::new(*op.grid(), v)?,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        method: "inverse power iteration",
        iterations: max_iter,
        residual: last_residual,
        best: v,
        trace,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct EmbeddingOptions {
    pub starts: usize,
    pub seed: u64,
    /// Largest ascent step; halved whenever a step fails to increase the
    /// ratio and doubled back after a success. A unit step is the nonlinear
    /// power iteration `u <- A^{-1}(|u|^{p-1} sign u)`.
    pub step: f64,
    /// Stop when the relative A-gradient of the ratio falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 0,
            step: 1.0,
            tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingEstimate {
    pub p: f64,
    pub value: f64,
    pub per_start: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Discrete best constant `sup ‖u‖_{L^p} / ‖u‖_A` with default options.
///
/// The returned value is a lower bound on the discrete supremum; the gap is
/// of the order of `tol²` relative when the ascent converges.
pub fn embedding_constant(op: &DiscreteFracLap, p: f64, tol: f64) -> Result<f64> {
    let opts = EmbeddingOptions {
        tol,
        ..Default::default()
    };
    Ok(embedding_constant_with(op, p, &opts)?.value)
}

/// Normalized ascent on the ratio `‖u‖_p / ‖u‖_A` from seeded random
/// starts. Steps follow the gradient taken in the `A` inner product and each
/// iterate is rescaled back to the unit `A`-sphere.
pub fn embedding_constant_with(
    op: &DiscreteFracLap,
    p: f64,
    opts: &EmbeddingOptions,
) -> Result<EmbeddingEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("embedding exponent must be finite and >= 1, got {p}")));
    }
    let solver = SpdSolver::new(op, 0.0, 1e-12)?;
    let h = op.grid().h();
    let n = op.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut per_start = Vec::with_capacity(opts.starts);
    let mut iterations = Vec::with_capacity(opts.starts);

    let normalize = |u: &mut Vec<f64>| {
        let a = op.a_norm_raw(u);
        u.iter_mut().for_each(|x| *x /= a);
    };

    for _ in 0..opts.starts.max(1) {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        normalize(&mut u);
        let mut ratio = lp_norm_raw(&u, h, p);
        let mut iters = 0;
        let mut eta = opts.step;
        while iters < opts.max_iter {
            iters += 1;
            // Euclidean gradient of ‖u‖_p divided by h, then the Riesz map A^{-1}
            let scale = ratio.powf(p - 1.0);
            let dn: Vec<f64> = u.iter().map(|x| x.abs().powf(p - 1.0) * x.signum() / scale).collect();
            let mut g = solver.solve(&dn)?;
            for (gi, ui) in g.iter_mut().zip(&u) {
                *gi -= ratio * ui;
            }
            let gnorm = op.a_norm_raw(&g);
            if gnorm <= opts.tol * ratio {
                break;
            }
            let mut improved = false;
            while eta > 1e-14 {
                let mut trial: Vec<f64> = u.iter().zip(&g).map(|(x, d)| x + eta * d / ratio).collect();
                normalize(&mut trial);
                let r = lp_norm_raw(&trial, h, p);
                if r > ratio {
                    u = trial;
                    ratio = r;
                    improved = true;
                    eta = (2.0 * eta).min(opts.step);
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        per_start.push(ratio);
        iterations.push(iters);
    }
    let value = per_start.iter().copied().fold(0.0, f64::max);
    Ok(EmbeddingEstimate {
        p,
        value,
        per_start,
        iterations,
    })
}
