//! Admissible initial data: nonnegative concentrations with prescribed means
//! and a body charge that makes the system exactly neutral.

use crate::error::{NpdError, Result};
use crate::model::{charge_density, BodyCharge, NpdState, SpeciesParams};
use crate::spectral::{make_grid, GridRef, RealField, SpectralField};
use crate::{lit, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

#[derive(Debug, Clone, PartialEq)]
pub enum BodyChargeRecipe<T> {
    /// Only the constant needed for neutrality.
    None,
    /// Seeded band-limited field with the given sup-norm before the mean shift.
    BandLimited { amplitude: T, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec<T> {
    pub dim: usize,
    pub n: usize,
    pub diffusivity: T,
    pub valences: Vec<T>,
    pub means: Vec<T>,
    pub epsilon: T,
    /// Largest `|k_j|` of the random perturbations; `n/4` when unset.
    pub k_max: Option<usize>,
    pub seed: u64,
    pub body: BodyChargeRecipe<T>,
}

impl<T: Real> ScenarioSpec<T> {
    pub fn band_limit(&self) -> usize {
        self.k_max.unwrap_or(self.n / 4)
    }

    pub fn params(&self) -> Result<SpeciesParams<T>> {
        SpeciesParams::new(self.diffusivity, self.valences.clone())
    }

    pub fn grid(&self) -> Result<GridRef<T>> {
        make_grid(self.dim, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.means.len() != self.valences.len() {
            return Err(NpdError::InvalidScenario(format!(
                "{} means for {} species",
                self.means.len(),
                self.valences.len()
            )));
        }
        let min_mean = self.means.iter().copied().fold(T::infinity(), T::min);
        if !(min_mean > T::zero()) {
            return Err(NpdError::InvalidScenario(
                "species means must be > 0".into(),
            ));
        }
        if !(self.epsilon >= T::zero()) || self.epsilon >= min_mean {
            return Err(NpdError::InvalidScenario(format!(
                "perturbation amplitude {} must lie in [0, min mean = {min_mean})",
                self.epsilon
            )));
        }
        let k_max = self.band_limit();
        if k_max == 0 || k_max > self.n / 3 {
            return Err(NpdError::InvalidScenario(format!(
                "band limit {k_max} must lie in [1, n/3]"
            )));
        }
        if let BodyChargeRecipe::BandLimited { amplitude, .. } = self.body {
            if !(amplitude >= T::zero()) || !amplitude.is_finite() {
                return Err(NpdError::InvalidScenario(
                    "body charge amplitude must be >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Seed for the `index`-th independent stream derived from `seed`.
pub fn substream(seed: u64, index: u64) -> u64 {
    seed ^ (index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Seeded random spectral coefficients on `0 < max|k_j| <= k_max` with
/// amplitudes decaying like `1/|k|²`. Not yet Hermitian.
fn random_coefficients<T: Real>(grid: &GridRef<T>, k_max: usize, seed: u64) -> SpectralField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpectralField::zeros(grid);
    let k_max = k_max as i64;
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let k = grid.wavevector(i);
        if k.iter().any(|kj| kj.abs() > k_max) || k == [0, 0, 0] {
            continue;
        }
        let w = 1.0 / (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        *c = Complex::new(lit(re * w), lit(im * w));
    }
    out
}

/// Seeded, mean-free, band-limited real field with `‖g‖_∞ = 1` on the grid.
pub fn band_limited_field<T: Real>(grid: &GridRef<T>, k_max: usize, seed: u64) -> RealField<T> {
    let mut g = random_coefficients(grid, k_max, seed).inverse();
    // the real part keeps the band and the zero mean
    let shift = g.mean();
    let g0 = g.map(|v| v - shift);
    let sup = g0.max_abs();
    g = if sup > T::zero() {
        g0.scale(sup.recip())
    } else {
        g0
    };
    g
}

/// Same as [`band_limited_field`] but in spectral form with unit `v`-norm
/// scaling left to the caller.
pub fn band_limited_spectral<T: Real>(
    grid: &GridRef<T>,
    k_max: usize,
    seed: u64,
) -> SpectralField<T> {
    let mut f = band_limited_field(grid, k_max, seed).forward();
    f.coeffs_mut()[0] = Complex::new(T::zero(), T::zero());
    f
}

/// `c_i = c̄_i + ε g_i` with independent seeded perturbations `g_i`.
pub fn random_state<T: Real>(spec: &ScenarioSpec<T>) -> Result<NpdState<T>> {
    spec.validate()?;
    let grid = spec.grid()?;
    random_state_on(spec, &grid)
}

/// [`random_state`] on an existing grid handle.
pub fn random_state_on<T: Real>(spec: &ScenarioSpec<T>, grid: &GridRef<T>) -> Result<NpdState<T>> {
    spec.validate()?;
    let c = spec
        .means
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            if spec.epsilon == T::zero() {
                return RealField::constant(grid, mean);
            }
            let g = band_limited_field(grid, spec.band_limit(), substream(spec.seed, i as u64));
            g.map(|v| mean + spec.epsilon * v)
        })
        .collect();
    NpdState::new(T::zero(), c)
}

/// Body charge from the recipe, shifted so that `∫(ρ₀ + ρ̃) = 0`.
pub fn neutral_body_charge<T: Real>(
    spec: &ScenarioSpec<T>,
    state0: &NpdState<T>,
) -> Result<BodyCharge<T>> {
    let params = spec.params()?;
    let rho_mean = charge_density(state0, &params).mean();
    let grid = state0.grid();
    let field = match &spec.body {
        BodyChargeRecipe::None => RealField::constant(grid, -rho_mean),
        BodyChargeRecipe::BandLimited { amplitude, seed } => {
            band_limited_field(grid, spec.band_limit(), *seed).map(|v| *amplitude * v - rho_mean)
        }
    };
    BodyCharge::new(field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blob<T> {
    pub species: usize,
    pub center: [T; 3],
    pub width: T,
    pub amplitude: T,
}

/// Periodized Gaussian bumps `a exp(−|x − x₀|²/(2w²))` added on top of the
/// species means (images in the neighbouring cells are included).
pub fn gaussian_blob_state<T: Real>(
    spec: &ScenarioSpec<T>,
    blobs: &[Blob<T>],
) -> Result<NpdState<T>> {
    spec.validate()?;
    let grid = spec.grid()?;
    for b in blobs {
        if !(b.width > T::zero()) {
            return Err(NpdError::InvalidScenario("blob width must be > 0".into()));
        }
        if b.species >= spec.means.len() {
            return Err(NpdError::InvalidScenario(format!(
                "blob species {} out of range",
                b.species
            )));
        }
        if b.amplitude < T::zero() {
            return Err(NpdError::InvalidScenario(
                "blob amplitude must be >= 0".into(),
            ));
        }
    }
    let dim = grid.dim();
    let tau = T::TAU();
    let images: Vec<[i32; 3]> = {
        let r = |d: usize| if d < dim { -1..=1 } else { 0..=0 };
        let mut v = Vec::new();
        for a in r(0) {
            for b in r(1) {
                for c in r(2) {
                    v.push([a, b, c]);
                }
            }
        }
        v
    };
    let c = spec
        .means
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            let mine: Vec<&Blob<T>> = blobs.iter().filter(|b| b.species == i).collect();
            RealField::from_fn(&grid, |x| {
                let mut v = mean;
                for b in &mine {
                    let inv = (lit::<T>(2.0) * b.width * b.width).recip();
                    for m in &images {
                        let mut r2 = T::zero();
                        for d in 0..dim {
                            let dx = x[d] - b.center[d] + tau * lit(m[d] as f64);
                            r2 = r2 + dx * dx;
                        }
                        v = v + b.amplitude * (-r2 * inv).exp();
                    }
                }
                v
            })
        })
        .collect();
    NpdState::new(T::zero(), c)
}

/// `M = Σ_i ∫ c_i dx`, recorded as run metadata.
pub fn total_mass<T: Real>(state: &NpdState<T>) -> T {
    state.concentrations().iter().map(RealField::integral).sum()
}
