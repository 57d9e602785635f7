//! Exact arithmetic on 3D trigonometric polynomials, used as an FFT-free
//! reference for the spectral operators. A polynomial with band `b` stores
//! every coefficient with `max|k_j| <= b` densely; products widen the band,
//! derivatives and the Poisson/Leray solves act mode by mode, and values on
//! a grid come from direct summation.

#![allow(dead_code)]

use rand::Rng;
use rustfft::num_complex::Complex64 as C;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Trig {
    pub band: i64,
    pub c: Vec<C>,
}

impl Trig {
    pub fn zeros(band: i64) -> Self {
        let w = (2 * band + 1) as usize;
        Self {
            band,
            c: vec![C::new(0.0, 0.0); w * w * w],
        }
    }

    fn width(&self) -> i64 {
        2 * self.band + 1
    }

    fn index(&self, k: [i64; 3]) -> Option<usize> {
        if k.iter().any(|kj| kj.abs() > self.band) {
            return None;
        }
        let w = self.width();
        Some(((k[0] + self.band) + w * ((k[1] + self.band) + w * (k[2] + self.band))) as usize)
    }

    fn wavevector(&self, idx: usize) -> [i64; 3] {
        let w = self.width();
        let i = idx as i64;
        [
            i % w - self.band,
            (i / w) % w - self.band,
            i / (w * w) - self.band,
        ]
    }

    pub fn get(&self, k: [i64; 3]) -> C {
        self.index(k).map_or(C::new(0.0, 0.0), |i| self.c[i])
    }

    pub fn set(&mut self, k: [i64; 3], v: C) {
        let i = self.index(k).expect("mode inside band");
        self.c[i] = v;
    }

    pub fn constant(v: f64) -> Self {
        let mut t = Self::zeros(0);
        t.c[0] = C::new(v, 0.0);
        t
    }

    fn nonzero(&self) -> Vec<([i64; 3], C)> {
        self.c
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, &v)| (self.wavevector(i), v))
            .collect()
    }

    /// Random real, mean-free polynomial with `Σ|ĉ| = amplitude`, hence
    /// `sup|f| <= amplitude`.
    pub fn random_real(band: i64, amplitude: f64, rng: &mut impl Rng) -> Self {
        let mut t = Self::zeros(band);
        for idx in 0..t.c.len() {
            let k = t.wavevector(idx);
            let neg = [-k[0], -k[1], -k[2]];
            // fill one representative of each ±k pair
            if k <= neg {
                continue;
            }
            let v = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            t.set(k, v);
            t.set(neg, v.conj());
        }
        let total: f64 = t.c.iter().map(|v| v.norm()).sum();
        t.scale(amplitude / total)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            band: self.band,
            c: self.c.iter().map(|v| v * a).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let band = self.band.max(other.band);
        let mut out = Self::zeros(band);
        for src in [self, other] {
            for (k, v) in src.nonzero() {
                let i = out.index(k).unwrap();
                out.c[i] += v;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.band + other.band);
        let b = other.nonzero();
        for (ka, va) in self.nonzero() {
            for &(kb, vb) in &b {
                let i = out
                    .index([ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]])
                    .unwrap();
                out.c[i] += va * vb;
            }
        }
        out
    }

    pub fn deriv(&self, axis: usize) -> Self {
        let mut out = self.clone();
        for (i, v) in out.c.iter_mut().enumerate() {
            *v *= C::new(0.0, self.wavevector(i)[axis] as f64);
        }
        out
    }

    pub fn grad(&self) -> [Self; 3] {
        [self.deriv(0), self.deriv(1), self.deriv(2)]
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for (i, v) in out.c.iter_mut().enumerate() {
            let k = self.wavevector(i);
            *v *= -((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64);
        }
        out
    }

    /// Mean-free solution of `−Δu = f`; the mean of `f` is ignored.
    pub fn inv_neg_laplacian(&self) -> Self {
        let mut out = self.clone();
        for (i, v) in out.c.iter_mut().enumerate() {
            let k = self.wavevector(i);
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            *v = if k2 == 0.0 { C::new(0.0, 0.0) } else { *v / k2 };
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.get([0, 0, 0]).re
    }

    /// Values at the points of an `n³` grid, first axis fastest.
    pub fn eval(&self, n: usize) -> Vec<f64> {
        let w = self.width() as usize;
        let b = self.band;
        // e^{i k x_j} for every k in the band and grid index j
        let phase: Vec<Vec<C>> = (0..w)
            .map(|kk| {
                let k = kk as i64 - b;
                (0..n)
                    .map(|j| {
                        C::from_polar(
                            1.0,
                            2.0 * PI * ((k * j as i64).rem_euclid(n as i64)) as f64 / n as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        // sum over k0
        let mut s1 = vec![C::new(0.0, 0.0); n * w * w];
        for k2 in 0..w {
            for k1 in 0..w {
                for k0 in 0..w {
                    let v = self.c[k0 + w * (k1 + w * k2)];
                    if v.norm_sqr() == 0.0 {
                        continue;
                    }
                    let row = &mut s1[n * (k1 + w * k2)..n * (k1 + w * k2 + 1)];
                    for (x0, r) in row.iter_mut().enumerate() {
                        *r += v * phase[k0][x0];
                    }
                }
            }
        }
        // sum over k1
        let mut s2 = vec![C::new(0.0, 0.0); n * n * w];
        for k2 in 0..w {
            for x1 in 0..n {
                let dst = &mut s2[n * (x1 + n * k2)..n * (x1 + n * k2 + 1)];
                for k1 in 0..w {
                    let p = phase[k1][x1];
                    let src = &s1[n * (k1 + w * k2)..n * (k1 + w * k2 + 1)];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * p;
                    }
                }
            }
        }
        // sum over k2, keep the real part
        let mut out = vec![0.0; n * n * n];
        for x2 in 0..n {
            let dst = &mut out[n * n * x2..n * n * (x2 + 1)];
            for k2 in 0..w {
                let p = phase[k2][x2];
                let src = &s2[n * n * k2..n * n * (k2 + 1)];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += (s * p).re;
                }
            }
        }
        out
    }
}

/// `v − ∇(Δ⁻¹∇·v)`, mode by mode.
pub fn leray(v: &[Trig; 3]) -> [Trig; 3] {
    let band = v.iter().map(|f| f.band).max().unwrap();
    let mut out = [Trig::zeros(band), Trig::zeros(band), Trig::zeros(band)];
    let lifted: Vec<Trig> = v.iter().map(|f| f.add(&Trig::zeros(band))).collect();
    for idx in 0..out[0].c.len() {
        let k = out[0].wavevector(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let vk = [lifted[0].c[idx], lifted[1].c[idx], lifted[2].c[idx]];
        let kv = if k2 == 0.0 {
            C::new(0.0, 0.0)
        } else {
            (vk[0] * k[0] as f64 + vk[1] * k[1] as f64 + vk[2] * k[2] as f64) / k2
        };
        for a in 0..3 {
            out[a].c[idx] = vk[a] - kv * k[a] as f64;
        }
    }
    out
}

pub fn divergence(v: &[Trig; 3]) -> Trig {
    v[0].deriv(0).add(&v[1].deriv(1)).add(&v[2].deriv(2))
}
