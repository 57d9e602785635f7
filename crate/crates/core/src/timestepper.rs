//! Integrating-factor Heun scheme.
//!
//! Diffusion is applied exactly through `E(τ) = exp(−D|k|²τ)` per mode; the
//! advection and electromigration fluxes are treated explicitly with a
//! two-stage (RK2) update in integrating-factor variables:
//!
//! ```text
//! ĉ*      = E(dt) (ĉ + dt N̂(c))
//! ĉ(t+dt) = E(dt) ĉ + dt/2 (E(dt) N̂(c) + N̂(c*))
//! ```

use crate::error::{NpdError, Result};
use crate::model::{nonlinear_tendency_hat, BodyCharge, NpdState, SpeciesParams};
use crate::spectral::{inverse_all, GridRef, SpectralField};
use crate::{lit, Real};
use rayon::prelude::*;

/// Auto step size is recomputed after this many steps.
pub const DT_REFRESH_STEPS: usize = 10;

/// Runs abort when a concentration drops below `-NEGATIVITY_FRACTION` times
/// the largest initial sup-norm.
pub const NEGATIVITY_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtMode<T> {
    Fixed(T),
    /// CFL-limited by the drift speeds, never above `dt_max`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig<T> {
    pub dt: DtMode<T>,
    pub cfl: T,
    /// Cap for automatic steps (and the value used when the flow is at rest).
    pub dt_max: T,
    pub t_end: T,
    pub output_every: T,
    pub max_steps: usize,
}

impl<T: Real> StepperConfig<T> {
    pub fn auto(t_end: T, output_every: T) -> Self {
        Self {
            dt: DtMode::Auto,
            cfl: lit(0.4),
            dt_max: lit(0.01),
            t_end,
            output_every,
            max_steps: 10_000_000,
        }
    }

    pub fn fixed(dt: T, t_end: T, output_every: T) -> Self {
        Self {
            dt: DtMode::Fixed(dt),
            ..Self::auto(t_end, output_every)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NpdError::InvalidParams(msg.to_string()));
        if let DtMode::Fixed(dt) = self.dt {
            if !(dt > T::zero()) {
                return bad("dt must be > 0");
            }
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.dt_max > T::zero()) {
            return bad("dt_max must be > 0");
        }
        if !(self.t_end >= T::zero()) {
            return bad("t_end must be >= 0");
        }
        if !(self.output_every > T::zero()) {
            return bad("output_every must be > 0");
        }
        Ok(())
    }
}

/// `exp(−D|k|²dt)` for every mode.
pub fn integrating_factor<T: Real>(grid: &GridRef<T>, diffusivity: T, dt: T) -> Vec<T> {
    grid.k2()
        .iter()
        .map(|&k2| (-diffusivity * k2 * dt).exp())
        .collect()
}

/// Heun update in integrating-factor variables for one spectral component,
/// given the first-stage predictor and both stage tendencies.
pub(crate) fn predictor<T: Real>(
    c: &SpectralField<T>,
    n0: &SpectralField<T>,
    e: &[T],
    dt: T,
) -> SpectralField<T> {
    let mut out = c.clone();
    out.axpy(dt, n0);
    for (v, &f) in out.coeffs_mut().iter_mut().zip(e) {
        *v = *v * f;
    }
    out
}

pub(crate) fn corrector<T: Real>(
    c: &SpectralField<T>,
    n0: &SpectralField<T>,
    n1: &SpectralField<T>,
    e: &[T],
    dt: T,
) -> SpectralField<T> {
    let half = dt * lit(0.5);
    let mut out = c.clone();
    out.axpy(half, n0);
    for (v, &f) in out.coeffs_mut().iter_mut().zip(e) {
        *v = *v * f;
    }
    out.axpy(half, n1);
    out
}

#[derive(Debug, Clone)]
pub struct Stepper<T: Real> {
    params: SpeciesParams<T>,
    body: BodyCharge<T>,
    negativity_floor: Option<T>,
}

impl<T: Real> Stepper<T> {
    pub fn new(params: SpeciesParams<T>, body: BodyCharge<T>) -> Self {
        Self {
            params,
            body,
            negativity_floor: None,
        }
    }

    /// Aborts steps whose minimum concentration falls below `floor`.
    pub fn with_negativity_floor(mut self, floor: T) -> Self {
        self.negativity_floor = Some(floor);
        self
    }

    pub fn negativity_floor(&self) -> Option<T> {
        self.negativity_floor
    }

    pub fn params(&self) -> &SpeciesParams<T> {
        &self.params
    }

    pub fn body(&self) -> &BodyCharge<T> {
        &self.body
    }

    /// `-1e-6 · max_i ‖c_i‖_∞` of the given state.
    pub fn floor_for(state: &NpdState<T>) -> T {
        let sup = state
            .concentrations()
            .iter()
            .map(|c| c.max_abs())
            .fold(T::zero(), T::max);
        -lit::<T>(NEGATIVITY_FRACTION) * sup
    }

    /// Advances by one step of size `dt`.
    pub fn step(&self, state: &NpdState<T>, dt: T) -> Result<NpdState<T>> {
        if !(dt > T::zero()) {
            return Err(NpdError::InvalidParams(format!(
                "step size {dt} must be > 0"
            )));
        }
        let (params, body) = (&self.params, &self.body);
        let e = integrating_factor(state.grid(), params.diffusivity(), dt);
        let c_hat = &state.derived(params, body)?.c_hat;
        let n0 = nonlinear_tendency_hat(state, params, body)?;

        let stage: Vec<SpectralField<T>> = c_hat
            .par_iter()
            .zip(n0.par_iter())
            .map(|(c, n)| predictor(c, n, &e, dt))
            .collect();
        let stage = NpdState::new(state.time() + dt, inverse_all(&stage))?;
        let n1 = nonlinear_tendency_hat(&stage, params, body)?;

        let next: Vec<SpectralField<T>> = c_hat
            .par_iter()
            .zip(n0.par_iter().zip(n1.par_iter()))
            .map(|(c, (a, b))| corrector(c, a, b, &e, dt))
            .collect();
        let next = NpdState::new(state.time() + dt, inverse_all(&next))?;
        self.check(&next)?;
        Ok(next)
    }

    fn check(&self, state: &NpdState<T>) -> Result<()> {
        let time = state.time().to_f64().unwrap_or(f64::NAN);
        if state.concentrations().iter().any(|c| !c.is_finite()) {
            return Err(NpdError::NonFinite { time });
        }
        if let Some(floor) = self.negativity_floor {
            let min = state
                .concentrations()
                .iter()
                .map(|c| c.min())
                .fold(T::infinity(), T::min);
            if min < floor {
                return Err(NpdError::NegativityBreach {
                    time,
                    min: min.to_f64().unwrap_or(f64::NAN),
                    floor: floor.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// CFL step `cfl·Δx / V_max` with `V_max = max |u| + D max|z| |∇Φ|`,
    /// capped at `cap`.
    pub fn stable_dt(&self, state: &NpdState<T>, cfl: T, cap: T) -> Result<T> {
        let d = state.derived(&self.params, &self.body)?;
        let drift = self.params.diffusivity() * self.params.valence_magnitude();
        let grid = state.grid();
        let mut vmax = T::zero();
        for i in 0..grid.len() {
            let mut u2 = T::zero();
            let mut g2 = T::zero();
            for (uj, gj) in d.u.iter().zip(&d.grad_phi) {
                u2 = u2 + uj.values()[i] * uj.values()[i];
                g2 = g2 + gj.values()[i] * gj.values()[i];
            }
            vmax = vmax.max(u2.sqrt() + drift * g2.sqrt());
        }
        if vmax == T::zero() {
            return Ok(cap);
        }
        Ok((cfl * grid.spacing() / vmax).min(cap))
    }

    /// Integrates to `config.t_end`, calling `observer` on the initial state
    /// and then at every multiple of `output_every` (and at `t_end`).
    ///
    /// Output times are `k·output_every`, so a run restarted from a snapshot
    /// taken at an output time reproduces the same step sequence.
    pub fn integrate<F>(
        &self,
        state: NpdState<T>,
        config: &StepperConfig<T>,
        mut observer: F,
    ) -> Result<NpdState<T>>
    where
        F: FnMut(&NpdState<T>) -> Result<()>,
    {
        self.integrate_observed(state, config, |s, _| observer(s))
    }

    /// Like [`Stepper::integrate`], but the observer also receives the state
    /// one step before each output (absent for the initial call), which is
    /// what step-level diagnostics such as the energy balance need.
    pub fn integrate_observed<F>(
        &self,
        state: NpdState<T>,
        config: &StepperConfig<T>,
        mut observer: F,
    ) -> Result<NpdState<T>>
    where
        F: FnMut(&NpdState<T>, Option<&NpdState<T>>) -> Result<()>,
    {
        config.validate()?;
        let stepper = match self.negativity_floor {
            Some(_) => self.clone(),
            None => self.clone().with_negativity_floor(Self::floor_for(&state)),
        };
        let mut state = state;
        observer(&state, None)?;
        let mut steps = 0usize;
        let every = config.output_every;
        let slack = lit::<T>(1e-9);
        let mut k = (state.time() / every + slack)
            .floor()
            .to_usize()
            .unwrap_or(0);
        while state.time() < config.t_end * (T::one() - slack * lit(1e-3)) {
            k += 1;
            let target = (crate::from_usize::<T>(k) * every).min(config.t_end);
            if target <= state.time() {
                continue;
            }
            let prev = stepper.advance_to(&mut state, target, config, &mut steps)?;
            observer(&state, prev.as_ref())?;
        }
        Ok(state)
    }

    /// Steps `state` up to `target`; returns the state before the last step.
    fn advance_to(
        &self,
        state: &mut NpdState<T>,
        target: T,
        config: &StepperConfig<T>,
        steps: &mut usize,
    ) -> Result<Option<NpdState<T>>> {
        let slack = lit::<T>(1e-9);
        let mut prev = None;
        let mut local = 0usize;
        let mut dt = T::zero();
        while state.time() < target {
            if local % DT_REFRESH_STEPS == 0 {
                let nominal = match config.dt {
                    DtMode::Fixed(h) => h,
                    DtMode::Auto => self.stable_dt(state, config.cfl, config.dt_max)?,
                };
                let remaining = target - state.time();
                let n_sub = (remaining / nominal - slack).ceil().max(T::one());
                dt = remaining / n_sub;
            }
            if *steps >= config.max_steps {
                return Err(NpdError::TimeoutIncomplete {
                    steps: *steps,
                    time: state.time().to_f64().unwrap_or(f64::NAN),
                    t_end: config.t_end.to_f64().unwrap_or(f64::NAN),
                });
            }
            let remaining = target - state.time();
            let last = remaining <= dt * (T::one() + slack);
            let mut next = self.step(state, if last { remaining } else { dt })?;
            if last {
                next.set_time(target);
            }
            prev = Some(std::mem::replace(state, next));
            local += 1;
            *steps += 1;
        }
        Ok(prev)
    }
}
