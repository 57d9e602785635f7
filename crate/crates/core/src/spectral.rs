//! Periodic fields on `[0, 2π]^d` and their Fourier-side operators.
//!
//! Convention: `f(x) = Σ_k f̂(k) e^{ik·x}`, so the forward transform carries
//! the `1/n^d` factor and Parseval reads `‖f‖²_{L²} = (2π)^d Σ_k |f̂(k)|²`.
//! Data is stored row-major with the first axis fastest.

use crate::error::{NpdError, Result};
use crate::{from_usize, lit, Real};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

pub type GridRef<T> = Arc<SpectralGrid<T>>;

/// Lines per rayon task when transforming along an axis.
const LINES_PER_TASK: usize = 64;

pub struct SpectralGrid<T: Real> {
    dim: usize,
    n: usize,
    cutoff: usize,
    len: usize,
    /// Integer wavenumber of each index along one axis; Nyquist maps to `-n/2`.
    axis_k: Vec<i64>,
    /// Wavenumber used by odd derivatives, per axis and flat index; zero at
    /// Nyquist.
    deriv_k: Vec<Vec<T>>,
    k2: Vec<T>,
    /// Flat index of `-k`.
    neg: Vec<usize>,
    dealias_mask: Vec<bool>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for SpectralGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

/// Builds the grid for `[0, 2π]^dim` with `n` points per axis.
pub fn make_grid<T: Real>(dim: usize, n: usize) -> Result<GridRef<T>> {
    SpectralGrid::new(dim, n).map(Arc::new)
}

impl<T: Real> SpectralGrid<T> {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(NpdError::InvalidGrid(format!(
                "dimension {dim} not in {{2, 3}}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(NpdError::InvalidGrid(format!(
                "{n} points per axis is not a power of two >= 8"
            )));
        }
        let half = (n / 2) as i64;
        let axis_k: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let deriv_1d: Vec<T> = axis_k
            .iter()
            .map(|&k| if k == -half { T::zero() } else { lit(k as f64) })
            .collect();
        let cutoff = n / 3;
        let len = n.pow(dim as u32);

        let mut k2 = Vec::with_capacity(len);
        let mut dealias_mask = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        let mut deriv_k = vec![Vec::with_capacity(len); dim];
        for idx in 0..len {
            let mut sum = 0i64;
            let mut keep = true;
            let mut rest = idx;
            let mut mirrored = 0;
            let mut stride = 1;
            for d in deriv_k.iter_mut() {
                let i = rest % n;
                let k = axis_k[i];
                rest /= n;
                sum += k * k;
                keep &= k.unsigned_abs() as usize <= cutoff;
                d.push(deriv_1d[i]);
                mirrored += ((n - i) % n) * stride;
                stride *= n;
            }
            k2.push(lit(sum as f64));
            dealias_mask.push(keep);
            neg.push(mirrored);
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self {
            dim,
            n,
            cutoff,
            len,
            axis_k,
            deriv_k,
            k2,
            neg,
            dealias_mask,
            fwd,
            inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points (and modes) per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest retained `|k_j|` under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.cutoff
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self) -> T {
        T::TAU() / from_usize(self.n)
    }

    /// `(2π)^d`, the torus volume.
    pub fn volume(&self) -> T {
        T::TAU().powi(self.dim as i32)
    }

    /// Quadrature weight `(2π/n)^d` of one collocation point.
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    pub fn k2(&self) -> &[T] {
        &self.k2
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// Integer wavevector of a flat mode index (unused axes are zero).
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for kj in k.iter_mut().take(self.dim) {
            *kj = self.axis_k[rest % self.n];
            rest /= self.n;
        }
        k
    }

    /// Flat index of an integer wavevector, if it is representable on the grid.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() < self.dim {
            return None;
        }
        let half = (self.n / 2) as i64;
        let mut idx = 0usize;
        for axis in (0..self.dim).rev() {
            let kj = k[axis];
            if kj < -half || kj >= half {
                return None;
            }
            let i = if kj < 0 { kj + self.n as i64 } else { kj } as usize;
            idx = idx * self.n + i;
        }
        if k[self.dim..].iter().any(|&kj| kj != 0) {
            return None;
        }
        Some(idx)
    }

    /// Physical coordinate of a grid point.
    pub fn point(&self, idx: usize) -> [T; 3] {
        let h = self.spacing();
        let mut x = [T::zero(); 3];
        let mut rest = idx;
        for xj in x.iter_mut().take(self.dim) {
            *xj = h * from_usize(rest % self.n);
            rest /= self.n;
        }
        x
    }

    /// Derivative wavenumber of mode `idx` along `axis`.
    #[inline]
    pub fn deriv_k(&self, idx: usize, axis: usize) -> T {
        self.deriv_k[axis][idx]
    }

    /// Derivative wavenumbers along `axis` for every flat index.
    pub fn deriv_k_axis(&self, axis: usize) -> &[T] {
        &self.deriv_k[axis]
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        let n = self.n;
        let parallel = self.len >= 1 << 14;
        let run = |buf: &mut [Complex<T>]| {
            if parallel {
                buf.par_chunks_mut(n * LINES_PER_TASK)
                    .for_each(|chunk| fft.process(chunk));
            } else {
                fft.process(buf);
            }
        };
        // axis 0 lines are contiguous; for the others each (n × stride)
        // block is transposed so that the lines become contiguous
        run(data);
        let mut tmp = vec![Complex::new(T::zero(), T::zero()); self.len];
        for axis in 1..self.dim {
            let stride = n.pow(axis as u32);
            let block = n * stride;
            for (src, dst) in data.chunks_exact(block).zip(tmp.chunks_exact_mut(block)) {
                transpose::transpose(src, dst, stride, n);
            }
            run(&mut tmp);
            for (src, dst) in tmp.chunks_exact(block).zip(data.chunks_exact_mut(block)) {
                transpose::transpose(src, dst, n, stride);
            }
        }
    }
}

/// Real values on the collocation grid.
#[derive(Clone)]
pub struct RealField<T: Real> {
    grid: GridRef<T>,
    values: Vec<T>,
}

/// Fourier coefficients `f̂(k)` on the grid's mode lattice.
#[derive(Clone)]
pub struct SpectralField<T: Real> {
    grid: GridRef<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> fmt::Debug for RealField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealField")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl<T: Real> fmt::Debug for SpectralField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

pub fn same_grid<T: Real>(a: &GridRef<T>, b: &GridRef<T>) -> bool {
    Arc::ptr_eq(a, b) || (a.dim == b.dim && a.n == b.n)
}

impl<T: Real> RealField<T> {
    pub fn zeros(grid: &GridRef<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &GridRef<T>, value: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len],
        }
    }

    pub fn from_values(grid: &GridRef<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(NpdError::ShapeMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &GridRef<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let values = (0..grid.len).map(|i| f(grid.point(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridRef<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn forward(&self) -> SpectralField<T> {
        let mut data: Vec<Complex<T>> = self
            .values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        self.grid.transform(&mut data, false);
        let scale = from_usize::<T>(self.grid.len).recip();
        for c in &mut data {
            *c = *c * scale;
        }
        SpectralField {
            grid: self.grid.clone(),
            coeffs: data,
        }
    }

    /// Grid-quadrature mean `(1/n^d) Σ f`.
    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / from_usize(self.grid.len)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `∫ f dx` by collocation quadrature.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    /// `‖f‖_{L^p}` by collocation quadrature.
    pub fn lp_norm(&self, p: T) -> T {
        let s: T = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(p.recip())
    }

    pub fn l2_norm(&self) -> T {
        let s: T = self.values.iter().map(|&v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(same_grid(&self.grid, &other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s = *s + a * v;
        }
    }
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &GridRef<T>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len],
        }
    }

    pub fn from_coeffs(grid: &GridRef<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len {
            return Err(NpdError::ShapeMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &GridRef<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient of an integer wavevector, zero if not on the grid.
    pub fn coeff(&self, k: &[i64]) -> Complex<T> {
        self.grid
            .mode_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Back to physical space, keeping the real part.
    pub fn inverse(&self) -> RealField<T> {
        let mut data = self.coeffs.clone();
        self.grid.transform(&mut data, true);
        RealField {
            grid: self.grid.clone(),
            values: data.into_iter().map(|c| c.re).collect(),
        }
    }

    /// The `k = 0` coefficient, i.e. the spatial mean.
    pub fn mean(&self) -> T {
        self.coeffs[0].re
    }

    pub fn l2_norm(&self) -> T {
        sobolev_norm(self, T::zero(), SobolevKind::Homogeneous)
    }

    pub fn map_modes(&self, f: impl Fn(usize, Complex<T>) -> Complex<T>) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(i, c))
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert!(same_grid(&self.grid, &other.grid));
        self.map_modes(|i, c| c + other.coeffs[i])
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(same_grid(&self.grid, &other.grid));
        self.map_modes(|i, c| c - other.coeffs[i])
    }

    pub fn scale(&self, a: T) -> Self {
        self.map_modes(|_, c| c * a)
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        for (s, &v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s = *s + v * a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// `∂_j f` for every axis: coefficients `i k_j f̂(k)`.
pub fn gradient<T: Real>(f: &SpectralField<T>) -> Vec<SpectralField<T>> {
    (0..f.grid.dim).map(|axis| partial(f, axis)).collect()
}

pub fn partial<T: Real>(f: &SpectralField<T>, axis: usize) -> SpectralField<T> {
    let k = f.grid.deriv_k_axis(axis);
    let coeffs = f
        .coeffs
        .iter()
        .zip(k)
        .map(|(c, &kj)| Complex::new(-c.im, c.re) * kj)
        .collect();
    SpectralField {
        grid: f.grid.clone(),
        coeffs,
    }
}

pub fn divergence<T: Real>(v: &[SpectralField<T>]) -> SpectralField<T> {
    let mut out = partial(&v[0], 0);
    for (axis, comp) in v.iter().enumerate().skip(1) {
        let k = comp.grid.deriv_k_axis(axis);
        for ((o, c), &kj) in out.coeffs.iter_mut().zip(&comp.coeffs).zip(k) {
            *o = *o + Complex::new(-c.im, c.re) * kj;
        }
    }
    out
}

pub fn laplacian<T: Real>(f: &SpectralField<T>) -> SpectralField<T> {
    let k2 = &f.grid.k2;
    f.map_modes(|i, c| c * (-k2[i]))
}

/// Relative tolerance on the mean of a Poisson right-hand side.
pub fn neutral_mean_tolerance<T: Real>() -> T {
    lit::<T>(1e-10).max(T::epsilon() * lit(100.0))
}

/// Solves `−Δu = f` with `û(0) = 0`. The source must be mean-free.
pub fn inverse_laplacian<T: Real>(f: &SpectralField<T>) -> Result<SpectralField<T>> {
    let mean = f.coeffs[0].norm();
    let tolerance = neutral_mean_tolerance::<T>() * f.l2_norm();
    if mean > tolerance {
        return Err(NpdError::NonNeutralSource {
            mean: mean.to_f64().unwrap_or(f64::NAN),
            tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(inverse_laplacian_unchecked(f))
}

/// Inverse Laplacian that silently drops the mean mode.
pub fn inverse_laplacian_unchecked<T: Real>(f: &SpectralField<T>) -> SpectralField<T> {
    let k2 = &f.grid.k2;
    f.map_modes(|i, c| {
        if i == 0 {
            Complex::new(T::zero(), T::zero())
        } else {
            c / k2[i]
        }
    })
}

/// Zeroes every mode with some `|k_j|` above the 2/3 cutoff.
pub fn dealias<T: Real>(f: &SpectralField<T>) -> SpectralField<T> {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place<T: Real>(f: &mut SpectralField<T>) {
    let grid = f.grid.clone();
    for (c, &keep) in f.coeffs.iter_mut().zip(&grid.dealias_mask) {
        if !keep {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
}

/// Pseudo-spectral product `dealias(F[a·b])`.
pub fn product<T: Real>(a: &RealField<T>, b: &RealField<T>) -> SpectralField<T> {
    let mut out = a.mul(b).forward();
    dealias_in_place(&mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevKind {
    /// Multiplier `|k|^{2s}`; the mean mode is excluded for `s > 0`.
    Homogeneous,
    /// Multiplier `(1 + |k|²)^s`.
    Full,
}

/// `((2π)^d Σ_k w_s(k) |f̂(k)|²)^{1/2}`.
pub fn sobolev_norm<T: Real>(f: &SpectralField<T>, s: T, kind: SobolevKind) -> T {
    let g = &f.grid;
    let sum: T = f
        .coeffs
        .iter()
        .zip(&g.k2)
        .map(|(c, &k2)| {
            let w = match kind {
                SobolevKind::Homogeneous if s == T::zero() => T::one(),
                SobolevKind::Homogeneous => k2.powf(s),
                SobolevKind::Full => (T::one() + k2).powf(s),
            };
            w * c.norm_sqr()
        })
        .sum();
    (sum * g.volume()).sqrt()
}

/// Inner product of the product space `H¹ × … × H¹`:
/// `(2π)^d Σ_i Σ_k (1 + |k|²) Re(â_i(k) conj(b̂_i(k)))`.
pub fn v_inner<T: Real>(a: &[SpectralField<T>], b: &[SpectralField<T>]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut total = T::zero();
    for (ai, bi) in a.iter().zip(b) {
        let g = &ai.grid;
        let s: T = ai
            .coeffs
            .iter()
            .zip(&bi.coeffs)
            .zip(&g.k2)
            .map(|((x, y), &k2)| (T::one() + k2) * (x.re * y.re + x.im * y.im))
            .sum();
        total = total + s;
    }
    total * a[0].grid.volume()
}

pub fn v_norm<T: Real>(a: &[SpectralField<T>]) -> T {
    v_inner(a, a).max(T::zero()).sqrt()
}

/// Copies the coefficients of `f` onto another grid of the same dimension,
/// zero-padding or truncating. Nyquist modes of either grid are dropped so
/// the result stays Hermitian.
pub fn resample<T: Real>(f: &SpectralField<T>, target: &GridRef<T>) -> Result<SpectralField<T>> {
    let src = &f.grid;
    if src.dim != target.dim {
        return Err(NpdError::ShapeMismatch);
    }
    let limit = (src.n.min(target.n) / 2) as i64;
    let mut out = SpectralField::zeros(target);
    for (i, &c) in f.coeffs.iter().enumerate() {
        let k = src.wavevector(i);
        if k.iter().any(|kj| kj.abs() >= limit) {
            continue;
        }
        if let Some(j) = target.mode_index(&k) {
            out.coeffs[j] = c;
        }
    }
    Ok(out)
}

/// Forward transform of two real fields with one complex FFT of `a + ib`.
pub fn forward_pair<T: Real>(
    a: &RealField<T>,
    b: &RealField<T>,
) -> (SpectralField<T>, SpectralField<T>) {
    debug_assert!(same_grid(&a.grid, &b.grid));
    let grid = &a.grid;
    let mut z: Vec<Complex<T>> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| Complex::new(x, y))
        .collect();
    grid.transform(&mut z, false);
    let half = lit::<T>(0.5) / from_usize::<T>(grid.len);
    let mut fa = Vec::with_capacity(grid.len);
    let mut fb = Vec::with_capacity(grid.len);
    for (i, &zk) in z.iter().enumerate() {
        let zm = z[grid.neg[i]].conj();
        let (p, q) = (zk + zm, zk - zm);
        fa.push(p * half);
        // (zk - conj z(-k)) / 2i
        fb.push(Complex::new(q.im, -q.re) * half);
    }
    (
        SpectralField {
            grid: grid.clone(),
            coeffs: fa,
        },
        SpectralField {
            grid: grid.clone(),
            coeffs: fb,
        },
    )
}

/// Inverse transform of two spectra with one complex FFT. Only the Hermitian
/// part of each input contributes, as with [`SpectralField::inverse`].
pub fn inverse_pair<T: Real>(
    a: &SpectralField<T>,
    b: &SpectralField<T>,
) -> (RealField<T>, RealField<T>) {
    debug_assert!(same_grid(&a.grid, &b.grid));
    let grid = &a.grid;
    let half = lit::<T>(0.5);
    let mut z: Vec<Complex<T>> = (0..grid.len)
        .map(|i| {
            let m = grid.neg[i];
            let ha = (a.coeffs[i] + a.coeffs[m].conj()) * half;
            let hb = (b.coeffs[i] + b.coeffs[m].conj()) * half;
            ha + Complex::new(-hb.im, hb.re)
        })
        .collect();
    grid.transform(&mut z, true);
    let re = z.iter().map(|c| c.re).collect();
    let im = z.iter().map(|c| c.im).collect();
    (
        RealField {
            grid: grid.clone(),
            values: re,
        },
        RealField {
            grid: grid.clone(),
            values: im,
        },
    )
}

/// Forward-transforms each component, two per FFT.
pub fn forward_all<T: Real>(fields: &[RealField<T>]) -> Vec<SpectralField<T>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = forward_pair(a, b);
                out.push(x);
                out.push(y);
            }
            [a] => out.push(a.forward()),
            _ => unreachable!(),
        }
    }
    out
}

/// Inverse-transforms each component, two per FFT.
pub fn inverse_all<T: Real>(fields: &[SpectralField<T>]) -> Vec<RealField<T>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = inverse_pair(a, b);
                out.push(x);
                out.push(y);
            }
            [a] => out.push(a.inverse()),
            _ => unreachable!(),
        }
    }
    out
}
