//! Linearized dynamics along a trajectory and the volume growth of tangent
//! sets.
//!
//! A tangent vector `ξ = (ξ_1, …, ξ_N)` perturbs the concentrations. Its
//! charge `R = Σ z_i ξ_i` perturbs the potential by `Ψ = (−Δ)⁻¹R` and the
//! Darcy velocity by `δu = −P((ρ + ρ̃)∇Ψ + R∇Φ)`. The tendency used here is
//! the exact derivative of the discrete nonlinear term in [`crate::model`],
//! so it agrees with finite differences of the primal right-hand side up to
//! `O(ε²)`.
//!
//! Volumes `V_n = sqrt(det G)`, `G_jl = ⟨ξ^j, ξ^l⟩_V`, underflow quickly, so
//! [`volume_decay_experiment`] re-orthonormalizes every few steps and keeps
//! the logarithm of the discarded scale factors.

use crate::diagnostics::linear_fit;
use crate::error::{NpdError, Result};
use crate::linalg::{gram_sqrt_det, pivoted_cholesky};
use crate::model::{BodyCharge, NpdState, SpeciesParams};
use crate::scenarios::{band_limited_spectral, substream};
use crate::spectral::{
    self, dealias_in_place, divergence, forward_all, gradient, inverse_all, inverse_laplacian,
    same_grid, v_inner, v_norm, GridRef, RealField, SpectralField,
};
use crate::timestepper::{corrector, integrating_factor, predictor, Stepper};
use crate::{lit, Real};
use rayon::prelude::*;

/// Gram matrices with a larger condition number are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// A vector whose component orthogonal to its predecessors is smaller than
/// this fraction of its norm cannot be re-orthonormalized reliably.
const MIN_REORTH_RATIO: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TangentVector<T: Real> {
    pub xi: Vec<SpectralField<T>>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(xi: Vec<SpectralField<T>>) -> Result<Self> {
        let first = xi.first().ok_or(NpdError::ShapeMismatch)?;
        if xi.iter().any(|f| !same_grid(f.grid(), first.grid())) {
            return Err(NpdError::ShapeMismatch);
        }
        Ok(Self { xi })
    }

    pub fn zeros(grid: &GridRef<T>, n_species: usize) -> Self {
        Self {
            xi: vec![SpectralField::zeros(grid); n_species],
        }
    }

    pub fn grid(&self) -> &GridRef<T> {
        self.xi[0].grid()
    }

    pub fn n_species(&self) -> usize {
        self.xi.len()
    }

    /// `R = Σ z_i ξ_i`.
    pub fn charge(&self, valences: &[T]) -> SpectralField<T> {
        let mut r = SpectralField::zeros(self.grid());
        for (x, &z) in self.xi.iter().zip(valences) {
            r.axpy(z, x);
        }
        r
    }

    /// `Ψ = (−Δ)⁻¹R`; fails if `R` carries a mean.
    pub fn potential(&self, valences: &[T]) -> Result<SpectralField<T>> {
        inverse_laplacian(&self.charge(valences))
    }

    /// Removes the charge: `ξ_i ← ξ_i − z_i R / Σ z_j²`.
    pub fn project_uncharged(&mut self, valences: &[T]) {
        let r = self.charge(valences);
        let zz: T = valences.iter().map(|&z| z * z).sum();
        for (x, &z) in self.xi.iter_mut().zip(valences) {
            x.axpy(-z / zz, &r);
        }
    }

    pub fn inner(&self, other: &Self) -> T {
        v_inner(&self.xi, &other.xi)
    }

    pub fn norm(&self) -> T {
        v_norm(&self.xi)
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            xi: self.xi.iter().map(|x| x.scale(a)).collect(),
        }
    }

    pub fn axpy(&mut self, a: T, other: &Self) {
        for (x, y) in self.xi.iter_mut().zip(&other.xi) {
            x.axpy(a, y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xi.iter().all(SpectralField::is_finite)
    }

    pub fn to_physical(&self) -> Vec<RealField<T>> {
        inverse_all(&self.xi)
    }
}

#[derive(Debug, Clone)]
pub struct TangentSet<T: Real> {
    time: T,
    vectors: Vec<TangentVector<T>>,
}

impl<T: Real> TangentSet<T> {
    pub fn new(time: T, vectors: Vec<TangentVector<T>>) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| {
            NpdError::InvalidParams("a tangent set needs at least one vector".into())
        })?;
        let ok = vectors
            .iter()
            .all(|v| v.n_species() == first.n_species() && same_grid(v.grid(), first.grid()));
        if !ok {
            return Err(NpdError::ShapeMismatch);
        }
        Ok(Self { time, vectors })
    }

    /// `n` seeded, mean-free, band-limited vectors, orthonormal in `V`.
    /// With `uncharged` every vector is projected onto `R = 0` first.
    pub fn random(
        time: T,
        grid: &GridRef<T>,
        params: &SpeciesParams<T>,
        n: usize,
        k_max: usize,
        seed: u64,
        uncharged: bool,
    ) -> Result<Self> {
        let ns = params.n_species();
        let vectors = (0..n)
            .map(|j| {
                let xi = (0..ns)
                    .map(|i| {
                        band_limited_spectral(grid, k_max, substream(seed, (j * ns + i) as u64))
                    })
                    .collect();
                let mut v = TangentVector { xi };
                if uncharged {
                    v.project_uncharged(params.valences());
                }
                v
            })
            .collect();
        let mut set = Self::new(time, vectors)?;
        set.orthonormalize()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn vectors(&self) -> &[TangentVector<T>] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [TangentVector<T>] {
        &mut self.vectors
    }

    pub fn gram_matrix(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut g = vec![vec![T::zero(); n]; n];
        for j in 0..n {
            for l in 0..=j {
                let v = self.vectors[j].inner(&self.vectors[l]);
                g[j][l] = v;
                g[l][j] = v;
            }
        }
        g
    }

    /// Twice-iterated modified Gram-Schmidt in `V`. Returns the diagonal of
    /// the triangular factor, so `V_n` before the call is the product of its
    /// first `n` entries.
    pub fn orthonormalize(&mut self) -> Result<Vec<T>> {
        let mut diag = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let (done, rest) = self.vectors.split_at_mut(j);
            let v = &mut rest[0];
            let before = v.norm();
            for _ in 0..2 {
                for q in done.iter() {
                    let c = v.inner(q);
                    v.axpy(-c, q);
                }
            }
            let r = v.norm();
            if !(r > lit::<T>(MIN_REORTH_RATIO) * before) {
                let ratio = if before > T::zero() {
                    (r / before).to_f64().unwrap_or(0.0)
                } else {
                    0.0
                };
                return Err(NpdError::UnderResolved {
                    time: self.time.to_f64().unwrap_or(f64::NAN),
                    condition: if ratio > 0.0 {
                        1.0 / (ratio * ratio)
                    } else {
                        f64::INFINITY
                    },
                });
            }
            *v = v.scale(r.recip());
            diag.push(r);
        }
        Ok(diag)
    }
}

/// `sqrt(det G)` of the set; zero when `G` is numerically singular.
pub fn gram_volume<T: Real>(set: &TangentSet<T>) -> T {
    gram_sqrt_det(&set.gram_matrix(), lit(SINGULAR_CONDITION))
}

/// Linearization of the nonlinear (non-diffusive) tendency around `state`.
pub fn tangent_nonlinear_hat<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
    xi: &TangentVector<T>,
) -> Result<Vec<SpectralField<T>>> {
    if xi.n_species() != state.n_species() || !same_grid(xi.grid(), state.grid()) {
        return Err(NpdError::ShapeMismatch);
    }
    let d = state.derived(params, body)?;
    let r_hat = xi.charge(params.valences());
    let psi_hat = inverse_laplacian(&r_hat)?;
    let grad_psi = inverse_all(&gradient(&psi_hat));
    let r = r_hat.inverse();

    let force: Vec<RealField<T>> = d
        .grad_phi
        .iter()
        .zip(&grad_psi)
        .map(|(gphi, gpsi)| {
            let (r, q) = (r.values(), d.total_charge.values());
            let (gphi, gpsi) = (gphi.values(), gpsi.values());
            let vals = (0..r.len())
                .map(|p| -(r[p] * gphi[p] + q[p] * gpsi[p]))
                .collect();
            RealField::from_values(state.grid(), vals).expect("same grid")
        })
        .collect();
    let mut force = forward_all(&force);
    force.iter_mut().for_each(dealias_in_place);
    let du = inverse_all(&crate::model::leray_project(&force));
    let xi_phys = xi.to_physical();
    let diffusivity = params.diffusivity();

    Ok(state
        .concentrations()
        .par_iter()
        .zip(xi_phys.par_iter())
        .zip(params.valences().par_iter())
        .map(|((ci, x), &z)| {
            let dz = diffusivity * z;
            let flux: Vec<RealField<T>> = (0..d.u.len())
                .map(|j| {
                    let (u, gphi) = (d.u[j].values(), d.grad_phi[j].values());
                    let (du, gpsi) = (du[j].values(), grad_psi[j].values());
                    let (x, c) = (x.values(), ci.values());
                    let vals = (0..c.len())
                        .map(|p| x[p] * (dz * gphi[p] - u[p]) + c[p] * (dz * gpsi[p] - du[p]))
                        .collect();
                    RealField::from_values(ci.grid(), vals).expect("same grid")
                })
                .collect();
            let mut flux = forward_all(&flux);
            flux.iter_mut().for_each(dealias_in_place);
            divergence(&flux)
        })
        .collect())
}

/// Full tangent tendency `DΔξ_i + δN_i(ξ)`.
pub fn tangent_tendency<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
    xi: &TangentVector<T>,
) -> Result<TangentVector<T>> {
    let nl = tangent_nonlinear_hat(state, params, body, xi)?;
    let diffusivity = params.diffusivity();
    let out = nl
        .into_iter()
        .zip(&xi.xi)
        .map(|(n, x)| {
            let mut o = spectral::laplacian(x).scale(diffusivity);
            o.axpy(T::one(), &n);
            o
        })
        .collect();
    Ok(TangentVector { xi: out })
}

/// Advances every vector of `set` from `state.time()` to `next.time()` with
/// the integrating-factor Heun scheme of the primal solver, evaluating the
/// linearization at `state` for the first stage and at `next` for the second.
pub fn step_tangents<T: Real>(
    state: &NpdState<T>,
    next: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
    set: &TangentSet<T>,
    dt: T,
) -> Result<TangentSet<T>> {
    let e = integrating_factor(state.grid(), params.diffusivity(), dt);
    // make sure both caches are filled before the parallel section
    state.derived(params, body)?;
    next.derived(params, body)?;
    let vectors = set
        .vectors
        .par_iter()
        .map(|v| {
            let n0 = tangent_nonlinear_hat(state, params, body, v)?;
            let stage: Vec<_> =
                v.xi.iter()
                    .zip(&n0)
                    .map(|(x, n)| predictor(x, n, &e, dt))
                    .collect();
            let n1 = tangent_nonlinear_hat(next, params, body, &TangentVector { xi: stage })?;
            let xi: Vec<_> =
                v.xi.iter()
                    .zip(n0.iter().zip(&n1))
                    .map(|(x, (a, b))| corrector(x, a, b, &e, dt))
                    .collect();
            Ok(TangentVector { xi })
        })
        .collect::<Result<Vec<_>>>()?;
    let time = set.time + dt;
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(NpdError::NonFinite {
            time: time.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(TangentSet { time, vectors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDecayConfig<T> {
    /// Set sizes to report; the largest one is propagated and the others are
    /// its leading subsets.
    pub n_list: Vec<usize>,
    /// Fit window.
    pub t0: T,
    pub t1: T,
    pub dt: T,
    /// Re-orthonormalize after this many steps.
    pub reorth_every: usize,
    /// Record `log V_n` after this many steps.
    pub sample_every: usize,
    pub seed: u64,
    /// Band limit of the initial vectors; `n/4` when absent.
    pub k_max: Option<usize>,
    /// Restrict the initial vectors to `R = 0`.
    pub uncharged: bool,
}

impl<T: Real> VolumeDecayConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NpdError::InvalidParams(m.to_string()));
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must hold positive set sizes");
        }
        if !(self.dt > T::zero()) {
            return bad("dt must be positive");
        }
        if !(self.t0 >= T::zero() && self.t1 > self.t0) {
            return bad("fit window needs 0 <= t0 < t1");
        }
        if self.reorth_every == 0 || self.sample_every == 0 {
            return bad("reorth_every and sample_every must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow<T> {
    pub n: usize,
    pub rate: T,
    pub rate_over_n2: T,
    pub fit_r2: T,
    pub t0: T,
    pub t1: T,
}

impl<T: Real> RateRow<T> {
    pub const COLUMNS: [&'static str; 6] = ["n", "rate", "rate_over_n2", "fit_r2", "t0", "t1"];

    /// The decay exponent is positive.
    pub fn contracting(&self) -> bool {
        self.rate > T::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeDecayResult<T> {
    pub n_list: Vec<usize>,
    pub times: Vec<T>,
    /// `log V_n(t) − log V_n(0)` per sample, one entry per `n_list` element.
    pub log_volumes: Vec<Vec<T>>,
    pub rates: Vec<RateRow<T>>,
}

/// Propagates a random orthonormal tangent set along the trajectory from
/// `w0` up to `config.t1` with fixed steps and fits `log V_n ≈ a − rate_n t`
/// on `[t0, t1]`.
pub fn volume_decay_experiment<T: Real>(
    w0: &NpdState<T>,
    stepper: &Stepper<T>,
    config: &VolumeDecayConfig<T>,
) -> Result<VolumeDecayResult<T>> {
    config.validate()?;
    let (params, body) = (stepper.params(), stepper.body());
    let grid = w0.grid().clone();
    let n_max = *config.n_list.iter().max().expect("validated non-empty");
    let k_max = config.k_max.unwrap_or(grid.n() / 4).max(1);
    let mut set = TangentSet::random(
        w0.time(),
        &grid,
        params,
        n_max,
        k_max,
        config.seed,
        config.uncharged,
    )?;

    let span = config.t1 - w0.time();
    let steps = (span / config.dt - lit(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(0)
        .max(1);
    let dt = span / lit(steps as f64);

    let mut accumulated = vec![T::zero(); n_max];
    let mut times = vec![w0.time()];
    let mut log_volumes = vec![vec![T::zero(); config.n_list.len()]];
    let mut state = w0.clone();
    for k in 1..=steps {
        let next = stepper.step(&state, dt)?;
        set = step_tangents(&state, &next, params, body, &set, dt)?;
        state = next;
        if k % config.sample_every == 0 || k == steps {
            times.push(state.time());
            log_volumes.push(sample_log_volumes(&set, &accumulated, &config.n_list)?);
        }
        if k % config.reorth_every == 0 {
            for (acc, r) in accumulated.iter_mut().zip(set.orthonormalize()?) {
                *acc = *acc + r.ln();
            }
        }
    }

    let rates = fit_volume_rates(&times, &log_volumes, &config.n_list, (config.t0, config.t1));
    Ok(VolumeDecayResult {
        n_list: config.n_list.clone(),
        times,
        log_volumes,
        rates,
    })
}

/// Least-squares rates `log V_n ≈ a − rate_n t` over the samples in
/// `window`; `log_volumes[k][j]` belongs to `times[k]` and `n_list[j]`.
pub fn fit_volume_rates<T: Real>(
    times: &[T],
    log_volumes: &[Vec<T>],
    n_list: &[usize],
    window: (T, T),
) -> Vec<RateRow<T>> {
    n_list
        .iter()
        .enumerate()
        .map(|(col, &n)| {
            let pts: Vec<(T, T)> = times
                .iter()
                .zip(log_volumes)
                .filter(|(t, _)| **t >= window.0 && **t <= window.1)
                .map(|(&t, lv)| (t, lv[col]))
                .collect();
            let line = linear_fit(&pts);
            let rate = -line.slope;
            RateRow {
                n,
                rate,
                rate_over_n2: rate / lit((n * n) as f64),
                fit_r2: line.r2,
                t0: window.0,
                t1: window.1,
            }
        })
        .collect()
}

fn sample_log_volumes<T: Real>(
    set: &TangentSet<T>,
    accumulated: &[T],
    n_list: &[usize],
) -> Result<Vec<T>> {
    let g = set.gram_matrix();
    n_list
        .iter()
        .map(|&n| {
            let sub: Vec<Vec<T>> = g[..n].iter().map(|row| row[..n].to_vec()).collect();
            let f = pivoted_cholesky(&sub);
            if f.is_singular(lit(SINGULAR_CONDITION)) {
                return Err(NpdError::UnderResolved {
                    time: set.time.to_f64().unwrap_or(f64::NAN),
                    condition: f.condition.to_f64().unwrap_or(f64::INFINITY),
                });
            }
            let acc: T = accumulated[..n].iter().copied().sum();
            Ok(acc + f.log_det() * lit(0.5))
        })
        .collect()
}
