//! Pseudo-spectral simulation of the periodic Nernst-Planck-Darcy system.
//!
//! `N` ionic species with a common diffusivity `D` and valences of equal
//! magnitude are transported by a Darcy flow driven by the electric body
//! force, on the torus `[0, 2π]^d` (`d` = 2 or 3):
//!
//! ```text
//! ∂t c_i + u·∇c_i − D Δc_i − z_i D ∇·(c_i ∇Φ) = 0
//! ρ = Σ z_i c_i,   −ΔΦ = ρ + ρ̃,   u = −P((ρ + ρ̃) ∇Φ)
//! ```
//!
//! The crate is generic over the floating point type ([`Real`]); the
//! aliases at the crate root fix it to `f64`, which is what the tolerances
//! in the test-suite assume.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod scenarios;
pub mod spectral;
pub mod tangent;
pub mod timestepper;

pub use error::NpdError;

use num_traits::{Float, FloatConst};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type the solver is generic over.
pub trait Real:
    rustfft::FftNum + Float + FloatConst + Display + Debug + Sum + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: rustfft::FftNum
        + Float
        + FloatConst
        + Display
        + Debug
        + Sum
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar type.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

pub type Grid = spectral::SpectralGrid<f64>;
pub type GridRef = spectral::GridRef<f64>;
pub type RealField = spectral::RealField<f64>;
pub type SpectralField = spectral::SpectralField<f64>;
pub type SpeciesParams = model::SpeciesParams<f64>;
pub type BodyCharge = model::BodyCharge<f64>;
pub type NpdState = model::NpdState<f64>;
pub type Stepper = timestepper::Stepper<f64>;
pub type StepperConfig = timestepper::StepperConfig<f64>;
pub type TangentVector = tangent::TangentVector<f64>;
pub type TangentSet = tangent::TangentSet<f64>;
pub type DiagnosticsRecord = diagnostics::DiagnosticsRecord<f64>;
pub type ScenarioSpec = scenarios::ScenarioSpec<f64>;
