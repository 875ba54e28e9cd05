//! Discrete integral fractional Laplacian on a uniform interval grid.
//!
//! The operator is written in the symmetric form
//!
//! ```text
//! (-Δ)^s u(x) = C(1,s) ∫_0^∞ (2u(x) - u(x+z) - u(x-z)) z^{-1-2s} dz
//! ```
//!
//! and discretized as follows: on `|z| < h` the second difference is replaced
//! by its quadratic model, which leaves the analytically integrable
//! `z^{1-2s}` kernel; for `|z| > h` the kernel is integrated exactly against
//! the piecewise-linear interpolant of `u`, which is zero outside the
//! interval. The result is a symmetric Toeplitz-plus-diagonal M-matrix
//!
//! ```text
//! A_ii = diag_i,    A_ij = -w_{|i-j|}  (i != j)
//! ```
//!
//! where `diag_i` is the near-field coefficient plus the full far-field
//! kernel mass (the part inside the interval plus the closed-form exterior
//! tail). The missing exterior hat weights make every row strictly
//! diagonally dominant.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mesh::{gauss_legendre, FieldFunction, Grid};

/// Above this size [`DiscreteFracLap::apply`] switches to the FFT product.
pub const FFT_THRESHOLD: usize = 1024;

const HEADER: &[u8; 8] = b"FRACLAP1";
const GL_ORDER: usize = 16;

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("fractional order s must lie in (0, 1), got {s}")))
    }
}

/// One-dimensional normalization constant
/// `C(1,s) = 2^{2s} s Γ(s + 1/2) / (√π Γ(1 - s))`.
pub fn normalization_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(s * prefactor_without_s(s)?)
}

/// `2^{2s} Γ(s + 1/2) / (√π Γ(1 - s))`: the normalization constant with the
/// leading factor `s` dropped. Exceeds [`normalization_constant`] by exactly
/// `1/s`; the operator never uses it.
pub fn prefactor_without_s(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(2f64.powf(2.0 * s) * gamma(s + 0.5) / (PI.sqrt() * gamma(1.0 - s)))
}

/// Exact value of `(-Δ)^s (1 - x^2)_+^s` on `(-1, 1)`, namely `Γ(1 + 2s)`.
pub fn getoor_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(gamma(1.0 + 2.0 * s))
}

/// Unit-spacing kernel moments. Returns `(near, omega)` where `near` is
/// `∫_0^1 z^{1-2s} dz` and `omega[k-1] = ∫ hat_k(z) z^{-1-2s} dz` over
/// `z >= 1` (only the right half of the hat for `k = 1`).
fn unit_moments(s: f64, count: usize) -> (f64, Vec<f64>) {
    let (gx, gw) = gauss_legendre(GL_ORDER);
    let e = -1.0 - 2.0 * s;
    // ∫_a^{a+1} weight(z) z^e dz with weight given on the unit cell
    let cell = |a: f64, rising: bool| -> f64 {
        gx.iter()
            .zip(&gw)
            .map(|(&t, &w)| {
                let local = 0.5 * (t + 1.0);
                let z = a + local;
                let wt = if rising { local } else { 1.0 - local };
                0.5 * w * wt * z.powf(e)
            })
            .sum()
    };
    let omega = (1..=count)
        .map(|k| {
            let kf = k as f64;
            let right = cell(kf, false);
            if k == 1 {
                right
            } else {
                cell(kf - 1.0, true) + right
            }
        })
        .collect();
    (1.0 / (2.0 - 2.0 * s), omega)
}

struct ToeplitzFft {
    size: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ToeplitzFft {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len() + 1;
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut col = vec![Complex::new(0.0, 0.0); size];
        for (k, &w) in weights.iter().enumerate() {
            col[k + 1].re = w;
            col[size - k - 1].re = w;
        }
        forward.process(&mut col);
        Self {
            size,
            spectrum: col,
            forward,
            inverse,
        }
    }

    /// Toeplitz product `T u` with `T_ij = w_{|i-j|}`, `T_ii = 0`.
    fn product(&self, u: &[f64], out: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &v) in buf.iter_mut().zip(u) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, c) in buf.iter_mut().zip(&self.spectrum) {
            *b *= c;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }
}

/// Assembled discrete fractional Laplacian.
#[derive(Clone)]
pub struct DiscreteFracLap {
    grid: Grid,
    s: f64,
    c_ns: f64,
    weights: Vec<f64>,
    diag: Vec<f64>,
    fft: Arc<OnceLock<ToeplitzFft>>,
}

impl fmt::Debug for DiscreteFracLap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteFracLap")
            .field("grid", &self.grid)
            .field("s", &self.s)
            .field("c_ns", &self.c_ns)
            .field("weights", &self.weights.len())
            .finish()
    }
}

impl DiscreteFracLap {
    pub fn assemble(grid: Grid, s: f64) -> Result<Self> {
        let c_ns = normalization_constant(s)?;
        let n = grid.n();
        let h = grid.h();
        let scale = c_ns * h.powf(-2.0 * s);
        let (near, omega) = unit_moments(s, n - 1);
        let mut weights: Vec<f64> = omega.iter().map(|w| scale * w).collect();
        weights[0] += scale * near;

        let h2s = h.powf(-2.0 * s);
        let diag = (0..n)
            .map(|j| {
                let x = grid.node(j);
                let (dl, dr) = (x - grid.x_left(), grid.x_right() - x);
                // far-field mass inside the interval on each side, then the tail
                let inner = (2.0 * h2s - dl.powf(-2.0 * s) - dr.powf(-2.0 * s)) / (2.0 * s);
                2.0 * scale * near + c_ns * (inner + exterior_tail(dl, dr, s))
            })
            .collect();

        Ok(Self {
            grid,
            s,
            c_ns,
            weights,
            diag,
            fft: Arc::new(OnceLock::new()),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    /// Off-diagonal magnitudes `w_1..w_{n-1}` (all positive).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            -self.weights[i.abs_diff(j) - 1]
        }
    }

    /// Exterior kernel mass `∫_{Ω^c} |x_j - y|^{-1-2s} dy` at node `j`, without `C(1,s)`.
    pub fn exterior_tail(&self, j: usize) -> f64 {
        let x = self.grid.node(j);
        exterior_tail(x - self.grid.x_left(), self.grid.x_right() - x, self.s)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn apply(&self, u: &FieldFunction) -> Result<FieldFunction> {
        self.check(u)?;
        let mut out = vec![0.0; self.n()];
        self.apply_into(u.values(), &mut out);
        FieldFunction::new(self.grid, out)
    }

    pub fn apply_direct(&self, u: &FieldFunction) -> Result<FieldFunction> {
        self.check(u)?;
        let mut out = vec![0.0; self.n()];
        self.apply_direct_into(u.values(), &mut out);
        FieldFunction::new(self.grid, out)
    }

    pub fn apply_fft(&self, u: &FieldFunction) -> Result<FieldFunction> {
        self.check(u)?;
        let mut out = vec![0.0; self.n()];
        self.apply_fft_into(u.values(), &mut out);
        FieldFunction::new(self.grid, out)
    }

    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        if self.n() > FFT_THRESHOLD {
            self.apply_fft_into(u, out)
        } else {
            self.apply_direct_into(u, out)
        }
    }

    pub(crate) fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    fn apply_direct_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = 0.0;
            for (k, w) in self.weights[..i].iter().enumerate() {
                acc += w * u[i - k - 1];
            }
            for (k, w) in self.weights[..n - 1 - i].iter().enumerate() {
                acc += w * u[i + k + 1];
            }
            out[i] = self.diag[i] * u[i] - acc;
        }
    }

    fn apply_fft_into(&self, u: &[f64], out: &mut [f64]) {
        let fft = self.fft.get_or_init(|| ToeplitzFft::new(&self.weights));
        fft.product(u, out);
        for ((o, d), v) in out.iter_mut().zip(&self.diag).zip(u) {
            *o = d * v - *o;
        }
    }

    /// Discrete bilinear form `h vᵀ A u`.
    pub fn quadratic_form(&self, u: &FieldFunction, v: &FieldFunction) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.quadratic_form_raw(u.values(), v.values()))
    }

    pub(crate) fn quadratic_form_raw(&self, u: &[f64], v: &[f64]) -> f64 {
        self.grid.h() * crate::mesh::dot(&self.apply_vec(u), v)
    }

    /// Induced norm `sqrt(h uᵀ A u)`.
    pub fn a_norm(&self, u: &FieldFunction) -> Result<f64> {
        Ok(self.quadratic_form(u, u)?.max(0.0).sqrt())
    }

    pub(crate) fn a_norm_raw(&self, u: &[f64]) -> f64 {
        self.quadratic_form_raw(u, u).max(0.0).sqrt()
    }

    fn check(&self, u: &FieldFunction) -> Result<()> {
        if *u.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Writes the `FRACLAP1` dump: header, then little-endian `f64`s
    /// `s, x_left, x_right, h, n, weights, diag`.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(HEADER)?;
        let head = [
            self.s,
            self.grid.x_left(),
            self.grid.x_right(),
            self.grid.h(),
            self.n() as f64,
        ];
        for v in head.iter().chain(&self.weights).chain(&self.diag) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        if &header != HEADER {
            return Err(Error::Format("missing FRACLAP1 header".into()));
        }
        let mut next = || -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let (s, xl, xr, h) = (next()?, next()?, next()?, next()?);
        let nf = next()?;
        if !(nf >= 4.0 && nf.fract() == 0.0 && nf < 1e9) {
            return Err(Error::Format(format!("bad node count {nf}")));
        }
        let n = nf as usize;
        let grid = Grid::new(xl, xr, n)?;
        if grid.h().to_bits() != h.to_bits() {
            return Err(Error::Format("stored spacing does not match the stored interval".into()));
        }
        let c_ns = normalization_constant(s)?;
        let weights = (0..n - 1).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let diag = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            s,
            c_ns,
            weights,
            diag,
            fft: Arc::new(OnceLock::new()),
        })
    }
}

fn exterior_tail(dl: f64, dr: f64, s: f64) -> f64 {
    (dl.powf(-2.0 * s) + dr.powf(-2.0 * s)) / (2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> FieldFunction {
        FieldFunction::new(grid, (0..grid.n()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn normalization_constant_values() {
        assert!((normalization_constant(0.5).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(normalization_constant(1e-6).unwrap() < 1e-5);
        for s in [0.1, 0.25, 0.75, 0.9] {
            let c = normalization_constant(s).unwrap();
            assert!(c > 0.0);
            let ratio = prefactor_without_s(s).unwrap() / c;
            assert!((ratio - 1.0 / s).abs() < 1e-12);
        }
        assert!(normalization_constant(0.0).is_err());
        assert!(normalization_constant(1.0).is_err());
    }

    #[test]
    fn m_matrix_structure() {
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let g = Grid::new(-1.0, 1.0, 64).unwrap();
            let a = DiscreteFracLap::assemble(g, s).unwrap();
            assert!(a.weights().iter().all(|&w| w > 0.0));
            for i in 0..g.n() {
                let off: f64 = (0..g.n()).filter(|&j| j != i).map(|j| a.entry(i, j).abs()).sum();
                assert!(a.diag()[i] > off, "row {i} not dominant for s={s}");
            }
            let d = a.to_dense();
            assert_eq!(d, d.transpose());
        }
    }

    #[test]
    fn diagonal_is_row_independent() {
        let g = Grid::new(-1.0, 1.0, 200).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.3).unwrap();
        let d0 = a.diag()[0];
        assert!(a.diag().iter().all(|d| ((d - d0) / d0).abs() < 1e-13));
    }

    #[test]
    fn weights_decay_like_the_kernel() {
        let g = Grid::new(-1.0, 1.0, 4000).unwrap();
        let s = 0.35;
        let a = DiscreteFracLap::assemble(g, s).unwrap();
        let scale = a.c_ns() * g.h().powf(-2.0 * s);
        // far hats see an almost linear kernel: w_k ≈ scale k^{-1-2s}(1 + (1+2s)(2+2s)/(12k^2))
        let k = 3000.0_f64;
        let expect = scale * k.powf(-1.0 - 2.0 * s) * (1.0 + (1.0 + 2.0 * s) * (2.0 + 2.0 * s) / (12.0 * k * k));
        let got = a.weights()[2999];
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn zero_in_zero_out_and_linearity() {
        let g = Grid::new(-1.0, 1.0, 300).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.4).unwrap();
        assert!(a.apply(&FieldFunction::zeros(g)).unwrap().values().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(g, &mut rng);
        let v = random_field(g, &mut rng);
        let lhs = a.apply(&u.add(&v).unwrap()).unwrap();
        let rhs = a.apply(&u).unwrap().add(&a.apply(&v).unwrap()).unwrap();
        let scale = lhs.sup_norm();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-12 * scale);
    }

    #[test]
    fn fft_path_matches_direct() {
        let g = Grid::new(-1.0, 1.0, 1024).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_field(g, &mut rng);
            let d = a.apply_direct(&u).unwrap();
            let f = a.apply_fft(&u).unwrap();
            let dev = d.sub(&f).unwrap().sup_norm() / d.sup_norm();
            assert!(dev < 1e-12, "{dev}");
        }
    }

    #[test]
    fn quadratic_form_symmetric_and_positive() {
        let g = Grid::new(0.0, 3.0, 128).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = random_field(g, &mut rng);
            let v = random_field(g, &mut rng);
            let uv = a.quadratic_form(&u, &v).unwrap();
            let vu = a.quadratic_form(&v, &u).unwrap();
            assert!((uv - vu).abs() <= 1e-12 * (uv.abs() + 1.0));
            assert!(a.quadratic_form(&u, &u).unwrap() > 0.0);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        let g2 = Grid::new(0.0, 1.0, 17).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.5).unwrap();
        assert!(matches!(a.apply(&FieldFunction::zeros(g2)), Err(Error::GridMismatch)));
        assert!(matches!(
            a.quadratic_form(&FieldFunction::zeros(g), &FieldFunction::zeros(g2)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn assembly_is_deterministic() {
        let g = Grid::new(-1.0, 2.0, 257).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.45).unwrap();
        let b = DiscreteFracLap::assemble(g, 0.45).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.diag(), b.diag());
    }

    #[test]
    fn dilation_scales_by_power_of_length() {
        let s = 0.3;
        let l = 2.5;
        let a1 = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 100).unwrap(), s).unwrap();
        let al = DiscreteFracLap::assemble(Grid::new(-l, l, 100).unwrap(), s).unwrap();
        let f = l.powf(-2.0 * s);
        for (x, y) in a1.weights().iter().zip(al.weights()) {
            assert!((f * x - y).abs() <= 1e-13 * y);
        }
        for (x, y) in a1.diag().iter().zip(al.diag()) {
            assert!((f * x - y).abs() <= 1e-13 * y);
        }
    }

    #[test]
    fn binary_dump_round_trips() {
        let g = Grid::new(-1.0, 1.0, 40).unwrap();
        let a = DiscreteFracLap::assemble(g, 0.25).unwrap();
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"FRACLAP1");
        assert_eq!(buf.len(), 8 + 8 * (5 + 39 + 40));
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 0.25);
        let b = DiscreteFracLap::read_binary(&buf[..]).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.diag(), b.diag());
        assert_eq!(a.grid(), b.grid());

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(DiscreteFracLap::read_binary(&bad[..]), Err(Error::Format(_))));
        assert!(DiscreteFracLap::read_binary(&buf[..100]).is_err());
    }
}
