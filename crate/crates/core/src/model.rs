//! Right-hand side of the Nernst-Planck-Darcy system.
//!
//! Charge density, the periodic Poisson potential, Darcy velocity via the
//! Leray projection, and the per-species tendency. Both nonlinear fluxes
//! (advection and electromigration) are assembled in divergence form with
//! 2/3-rule dealiasing, so every tendency has an exactly vanishing mean mode.

use crate::error::{NpdError, Result};
use crate::spectral::{
    self, dealias_in_place, divergence, forward_all, gradient, inverse_all, inverse_laplacian,
    GridRef, RealField, SpectralField,
};
use crate::{from_usize, lit, Real};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use std::sync::OnceLock;

/// Relative neutrality tolerance on `∫(ρ + ρ̃)`.
pub const NEUTRALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams<T: Real> {
    diffusivity: T,
    valences: Vec<T>,
}

impl<T: Real> SpeciesParams<T> {
    /// Common diffusivity `D > 0` and valences with equal magnitudes.
    pub fn new(diffusivity: T, valences: Vec<T>) -> Result<Self> {
        if !(diffusivity > T::zero()) || !diffusivity.is_finite() {
            return Err(NpdError::InvalidParams(format!(
                "diffusivity {diffusivity} must be > 0"
            )));
        }
        let Some(&first) = valences.first() else {
            return Err(NpdError::InvalidParams(
                "at least one species is required".into(),
            ));
        };
        let mag = first.abs();
        if !(mag > T::zero()) || !mag.is_finite() {
            return Err(NpdError::InvalidParams(
                "valences must be nonzero and finite".into(),
            ));
        }
        if valences
            .iter()
            .any(|z| (z.abs() - mag).abs() > lit::<T>(1e-12) * mag)
        {
            return Err(NpdError::InvalidParams(
                "valences must all have the same magnitude".into(),
            ));
        }
        Ok(Self {
            diffusivity,
            valences,
        })
    }

    pub fn n_species(&self) -> usize {
        self.valences.len()
    }

    pub fn diffusivity(&self) -> T {
        self.diffusivity
    }

    pub fn valences(&self) -> &[T] {
        &self.valences
    }

    /// The common valence magnitude `z`.
    pub fn valence_magnitude(&self) -> T {
        self.valences[0].abs()
    }
}

/// Fixed background charge `ρ̃`.
#[derive(Debug, Clone)]
pub struct BodyCharge<T: Real> {
    rho_tilde: RealField<T>,
    rho_tilde_hat: SpectralField<T>,
    mean: T,
}

impl<T: Real> BodyCharge<T> {
    pub fn new(rho_tilde: RealField<T>) -> Result<Self> {
        if !rho_tilde.is_finite() {
            return Err(NpdError::InvalidScenario(
                "body charge has non-finite values".into(),
            ));
        }
        let rho_tilde_hat = rho_tilde.forward();
        let mean = rho_tilde_hat.mean();
        Ok(Self {
            rho_tilde,
            rho_tilde_hat,
            mean,
        })
    }

    pub fn zero(grid: &GridRef<T>) -> Self {
        Self::new(RealField::zeros(grid)).expect("zero field is finite")
    }

    pub fn field(&self) -> &RealField<T> {
        &self.rho_tilde
    }

    pub fn spectral(&self) -> &SpectralField<T> {
        &self.rho_tilde_hat
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn is_zero(&self) -> bool {
        self.rho_tilde.values().iter().all(|v| *v == T::zero())
    }
}

/// Fields derived from the concentrations: one Poisson solve and one
/// projection per state.
#[derive(Debug, Clone)]
pub struct Derived<T: Real> {
    pub c_hat: Vec<SpectralField<T>>,
    pub rho: RealField<T>,
    /// `ρ + ρ̃` in physical space.
    pub total_charge: RealField<T>,
    pub phi_hat: SpectralField<T>,
    pub phi: RealField<T>,
    pub grad_phi: Vec<RealField<T>>,
    pub u: Vec<RealField<T>>,
}

/// Concentrations at one instant, with a lazily filled cache of derived
/// fields. The cache assumes the state is always evaluated with the same
/// parameters and body charge; any mutable access to the concentrations
/// clears it.
#[derive(Debug, Clone)]
pub struct NpdState<T: Real> {
    time: T,
    c: Vec<RealField<T>>,
    cache: OnceLock<Derived<T>>,
}

impl<T: Real> NpdState<T> {
    pub fn new(time: T, c: Vec<RealField<T>>) -> Result<Self> {
        let Some(first) = c.first() else {
            return Err(NpdError::InvalidParams(
                "state needs at least one species".into(),
            ));
        };
        if c.iter()
            .any(|f| !spectral::same_grid(f.grid(), first.grid()))
        {
            return Err(NpdError::ShapeMismatch);
        }
        Ok(Self {
            time,
            c,
            cache: OnceLock::new(),
        })
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn set_time(&mut self, time: T) {
        self.time = time;
    }

    pub fn grid(&self) -> &GridRef<T> {
        self.c[0].grid()
    }

    pub fn n_species(&self) -> usize {
        self.c.len()
    }

    pub fn concentrations(&self) -> &[RealField<T>] {
        &self.c
    }

    /// Mutable access; invalidates the derived cache.
    pub fn concentrations_mut(&mut self) -> &mut [RealField<T>] {
        self.cache = OnceLock::new();
        &mut self.c
    }

    pub fn into_concentrations(self) -> Vec<RealField<T>> {
        self.c
    }

    /// `σ = Σ c_i`.
    pub fn total_concentration(&self) -> RealField<T> {
        let mut s = self.c[0].clone();
        for ci in &self.c[1..] {
            s.axpy(T::one(), ci);
        }
        s
    }

    pub fn is_cached(&self) -> bool {
        self.cache.get().is_some()
    }

    /// Derived fields, computed on first use.
    pub fn derived(&self, params: &SpeciesParams<T>, body: &BodyCharge<T>) -> Result<&Derived<T>> {
        if let Some(d) = self.cache.get() {
            return Ok(d);
        }
        check_species(self, params)?;
        let d = compute_derived(self, params, body)?;
        let _ = self.cache.set(d);
        Ok(self.cache.get().expect("cache was just filled"))
    }
}

fn check_species<T: Real>(state: &NpdState<T>, params: &SpeciesParams<T>) -> Result<()> {
    if state.n_species() != params.n_species() {
        return Err(NpdError::InvalidParams(format!(
            "state has {} species, parameters describe {}",
            state.n_species(),
            params.n_species()
        )));
    }
    Ok(())
}

/// `ρ = Σ z_i c_i`, pointwise.
pub fn charge_density<T: Real>(state: &NpdState<T>, params: &SpeciesParams<T>) -> RealField<T> {
    let mut rho = RealField::zeros(state.grid());
    for (ci, &z) in state.concentrations().iter().zip(params.valences()) {
        rho.axpy(z, ci);
    }
    rho
}

/// `|∫(ρ + ρ̃)|` and the tolerance it is held to.
///
/// `species_scale` is `Σ|z_i|‖c_i‖_{L²}` when `ρ` was assembled from
/// concentrations (zero otherwise). When the species cancel, `ρ` is rounding
/// noise of that size and its integral cannot be smaller than the noise,
/// so the tolerance gets a matching floor.
pub fn neutrality_residual<T: Real>(
    rho: &RealField<T>,
    body: &BodyCharge<T>,
    species_scale: T,
) -> (T, T) {
    let total = (rho.integral() + body.field().integral()).abs();
    let grid = rho.grid();
    let rounding =
        T::epsilon() * from_usize::<T>(grid.len()).sqrt() * grid.volume().sqrt() * species_scale;
    let tol = lit::<T>(NEUTRALITY_TOL) * (rho.l2_norm() + body.field().l2_norm() + T::epsilon())
        + rounding;
    (total, tol)
}

/// `Σ|z_i|‖c_i‖_{L²}`, the size of the rounding error in `ρ`.
pub fn species_charge_scale<T: Real>(state: &NpdState<T>, params: &SpeciesParams<T>) -> T {
    state
        .concentrations()
        .iter()
        .zip(params.valences())
        .map(|(c, z)| z.abs() * c.l2_norm())
        .sum()
}

fn check_neutral<T: Real>(
    rho: &RealField<T>,
    body: &BodyCharge<T>,
    species_scale: T,
) -> Result<()> {
    let (residual, tol) = neutrality_residual(rho, body, species_scale);
    if residual > tol {
        return Err(NpdError::NonNeutralSource {
            mean: residual.to_f64().unwrap_or(f64::NAN),
            tolerance: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

fn potential_from_hat<T: Real>(
    rho_hat: &SpectralField<T>,
    body: &BodyCharge<T>,
) -> Result<SpectralField<T>> {
    let mut source = rho_hat.add(body.spectral());
    source.coeffs_mut()[0] = Complex::new(T::zero(), T::zero());
    inverse_laplacian(&source)
}

fn solve_potential_hat<T: Real>(
    rho: &RealField<T>,
    body: &BodyCharge<T>,
) -> Result<SpectralField<T>> {
    check_neutral(rho, body, T::zero())?;
    potential_from_hat(&rho.forward(), body)
}

/// Solves `−ΔΦ = ρ + ρ̃` in the zero-mean gauge.
pub fn solve_potential<T: Real>(rho: &RealField<T>, body: &BodyCharge<T>) -> Result<RealField<T>> {
    Ok(solve_potential_hat(rho, body)?.inverse())
}

/// Leray-Hodge projection onto divergence-free fields; the mean mode passes
/// through.
pub fn leray_project<T: Real>(v: &[SpectralField<T>]) -> Vec<SpectralField<T>> {
    let grid = v[0].grid().clone();
    let ks: Vec<&[T]> = (0..grid.dim())
        .map(|axis| grid.deriv_k_axis(axis))
        .collect();
    let mut out: Vec<SpectralField<T>> = v.to_vec();
    let zero = Complex::new(T::zero(), T::zero());
    for i in 0..grid.len() {
        let mut kk = T::zero();
        let mut kv = zero;
        for (comp, k) in v.iter().zip(&ks) {
            kk = kk + k[i] * k[i];
            kv = kv + comp.coeffs()[i] * k[i];
        }
        if kk == T::zero() {
            continue;
        }
        let scale = kv / kk;
        for (o, k) in out.iter_mut().zip(&ks) {
            let c = &mut o.coeffs_mut()[i];
            *c = *c - scale * k[i];
        }
    }
    out
}

/// `u = −P(dealias((ρ + ρ̃) ∇Φ))`, spectral.
fn darcy_velocity_hat<T: Real>(
    total_charge: &RealField<T>,
    grad_phi: &[RealField<T>],
) -> Vec<SpectralField<T>> {
    let force: Vec<RealField<T>> = grid_products(total_charge, grad_phi, -T::one());
    let mut force = forward_all(&force);
    force.iter_mut().for_each(dealias_in_place);
    leray_project(&force)
}

/// `a · b_j · s` pointwise for every `b_j`.
fn grid_products<T: Real>(a: &RealField<T>, b: &[RealField<T>], s: T) -> Vec<RealField<T>> {
    b.iter().map(|bj| a.zip_map(bj, |x, y| s * x * y)).collect()
}

/// Darcy velocity `u = −P((ρ + ρ̃)∇Φ)` from a consistent `(ρ, ρ̃, Φ)`.
pub fn darcy_velocity<T: Real>(
    rho: &RealField<T>,
    body: &BodyCharge<T>,
    phi: &RealField<T>,
) -> Vec<RealField<T>> {
    let total = rho.add(body.field());
    let grad_phi = inverse_all(&gradient(&phi.forward()));
    inverse_all(&darcy_velocity_hat(&total, &grad_phi))
}

fn compute_derived<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> Result<Derived<T>> {
    let rho = charge_density(state, params);
    check_neutral(&rho, body, species_charge_scale(state, params))?;
    let mut fields = state.concentrations().to_vec();
    fields.push(rho);
    let mut c_hat = forward_all(&fields);
    let rho_hat = c_hat.pop().expect("charge was appended");
    let rho = fields.pop().expect("charge was appended");

    let phi_hat = potential_from_hat(&rho_hat, body)?;
    let mut spectral_fields = vec![phi_hat.clone()];
    spectral_fields.extend(gradient(&phi_hat));
    let mut physical = inverse_all(&spectral_fields);
    let grad_phi = physical.split_off(1);
    let phi = physical.pop().expect("potential is first");

    let total_charge = rho.add(body.field());
    let u = inverse_all(&darcy_velocity_hat(&total_charge, &grad_phi));
    Ok(Derived {
        c_hat,
        rho,
        total_charge,
        phi_hat,
        phi,
        grad_phi,
        u,
    })
}

/// Divergence-form nonlinear part of species `i`:
/// `∇·dealias(c_i (−u + D z_i ∇Φ))`.
fn species_drift<T: Real>(
    ci: &RealField<T>,
    z: T,
    diffusivity: T,
    u: &[RealField<T>],
    grad_phi: &[RealField<T>],
) -> SpectralField<T> {
    let dz = diffusivity * z;
    let flux: Vec<RealField<T>> = u
        .iter()
        .zip(grad_phi)
        .map(|(uj, gj)| {
            let vals = ci
                .values()
                .iter()
                .zip(uj.values().iter().zip(gj.values()))
                .map(|(&c, (&a, &b))| c * (dz * b - a))
                .collect();
            RealField::from_values(ci.grid(), vals).expect("same grid")
        })
        .collect();
    let mut flux = forward_all(&flux);
    flux.iter_mut().for_each(dealias_in_place);
    divergence(&flux)
}

/// Spectral nonlinear tendencies `N̂_i` (advection plus electromigration,
/// without diffusion).
pub fn nonlinear_tendency_hat<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> Result<Vec<SpectralField<T>>> {
    let d = state.derived(params, body)?;
    let diffusivity = params.diffusivity();
    Ok(state
        .concentrations()
        .par_iter()
        .zip(params.valences().par_iter())
        .map(|(ci, &z)| species_drift(ci, z, diffusivity, &d.u, &d.grad_phi))
        .collect())
}

/// Full spectral tendencies `D Δĉ_i + N̂_i`.
pub fn tendency_hat<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> Result<Vec<SpectralField<T>>> {
    let nl = nonlinear_tendency_hat(state, params, body)?;
    let d = state.derived(params, body)?;
    let diffusivity = params.diffusivity();
    Ok(nl
        .into_iter()
        .zip(&d.c_hat)
        .map(|(n, c)| {
            let mut out = spectral::laplacian(c).scale(diffusivity);
            out.axpy(T::one(), &n);
            out
        })
        .collect())
}

/// `F_i = −u·∇c_i + DΔc_i + D z_i ∇·(c_i ∇Φ)` in physical space.
pub fn tendency<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> Result<Vec<RealField<T>>> {
    Ok(inverse_all(&tendency_hat(state, params, body)?))
}

#[derive(Debug, Clone)]
pub struct ValidationReport<T: Real> {
    pub min_concentration: T,
    pub negativity_violation: bool,
    pub neutrality_residual: T,
    pub neutrality_tolerance: T,
    pub neutrality_violation: bool,
    /// `‖∇·u‖_{L²} / ‖u‖_{H¹}`; zero when `u` vanishes.
    pub divergence_residual: T,
    pub means: Vec<T>,
    pub rho_mean: T,
    pub sigma_mean: T,
}

impl<T: Real> ValidationReport<T> {
    pub fn is_valid(&self) -> bool {
        !self.negativity_violation && !self.neutrality_violation
    }
}

/// Reports the admissibility of a state without failing.
pub fn validate_state<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> ValidationReport<T> {
    let rho = charge_density(state, params);
    let (neutrality_residual, neutrality_tolerance) =
        neutrality_residual(&rho, body, species_charge_scale(state, params));
    let neutrality_violation = neutrality_residual > neutrality_tolerance;
    let min_concentration = state
        .concentrations()
        .iter()
        .map(RealField::min)
        .fold(T::infinity(), T::min);
    let divergence_residual = if neutrality_violation || state.n_species() != params.n_species() {
        T::nan()
    } else {
        match state.derived(params, body) {
            Ok(d) => divergence_residual(&d.u),
            Err(_) => T::nan(),
        }
    };
    ValidationReport {
        min_concentration,
        negativity_violation: min_concentration < T::zero(),
        neutrality_residual,
        neutrality_tolerance,
        neutrality_violation,
        divergence_residual,
        means: state.concentrations().iter().map(RealField::mean).collect(),
        rho_mean: rho.mean(),
        sigma_mean: state.total_concentration().mean(),
    }
}

/// `‖∇·u‖_{L²} / ‖u‖_{H¹}` (0 for `u ≡ 0`).
pub fn divergence_residual<T: Real>(u: &[RealField<T>]) -> T {
    let u_hat = forward_all(u);
    let div = divergence(&u_hat).l2_norm();
    let h1: T = u_hat
        .iter()
        .map(|c| spectral::sobolev_norm(c, T::one(), spectral::SobolevKind::Full).powi(2))
        .sum::<T>()
        .sqrt();
    if h1 == T::zero() {
        T::zero()
    } else {
        div / h1
    }
}
