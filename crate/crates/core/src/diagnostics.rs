//! Observables of a trajectory: species means, `L^p` deviations from the
//! means, Sobolev seminorms, the `(ρ, σ)` energy balance, decay-rate fits,
//! the weighted Poincaré ratio and twin-trajectory separations.

use crate::error::{NpdError, Result};
use crate::model::{charge_density, BodyCharge, NpdState, SpeciesParams};
use crate::spectral::{self, gradient, inverse_all, v_norm, RealField, SobolevKind};
use crate::{from_usize, lit, Real};

/// Exponents of the `L^p` deviations that are recorded.
pub const LP_EXPONENTS: [u32; 4] = [2, 3, 4, 6];

/// Fraction of `σ` mass that may be clamped away in `‖ρ√σ‖` before the
/// energy residual is reported as NaN.
pub const MAX_CLAMPED_FRACTION: f64 = 1e-3;

/// A tail whose spread is below this fraction of its median is treated as
/// having reached a plateau in [`fit_decay_rate`].
pub const FLAT_TAIL_REL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub time: T,
    pub means: Vec<T>,
    pub min_c: T,
    /// `‖∇c_i‖_{L²}`.
    pub grad_l2: Vec<T>,
    /// `‖c_i − c̄_i‖_{L^p}` for `p` in [`LP_EXPONENTS`].
    pub species_dev: Vec<[T; 4]>,
    pub rho_dev: [T; 4],
    pub sigma_dev: [T; 4],
    /// `Σ_i ‖(−Δ)^{k/2} c_i‖_{L²}` for `k = 1, 2, 3`.
    pub hk_norms: [T; 3],
    /// Energy-balance residual against the previous snapshot; NaN if absent
    /// or flagged.
    pub energy_residual: T,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// Column names, in the order of [`DiagnosticsRecord::values`].
    pub fn columns(n_species: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n_species).map(|i| format!("mean_c{i}")));
        cols.push("min_c".into());
        cols.extend((1..=n_species).map(|i| format!("gradL2_c{i}")));
        for p in LP_EXPONENTS {
            cols.push(format!("L{p}_rho_dev"));
        }
        cols.push("L2_sigma_dev".into());
        cols.extend(["H1", "H2", "H3", "energy_residual"].map(String::from));
        cols
    }

    pub fn values(&self) -> Vec<T> {
        let mut v = vec![self.time];
        v.extend(&self.means);
        v.push(self.min_c);
        v.extend(&self.grad_l2);
        v.extend(self.rho_dev);
        v.push(self.sigma_dev[0]);
        v.extend(self.hk_norms);
        v.push(self.energy_residual);
        v
    }
}

/// `‖f − f̄‖_{L^p}` by collocation quadrature.
pub fn lp_deviation<T: Real>(f: &RealField<T>, p: T) -> T {
    let mean = f.mean();
    f.map(|v| v - mean).lp_norm(p)
}

fn lp_deviations<T: Real>(f: &RealField<T>) -> [T; 4] {
    LP_EXPONENTS.map(|p| lp_deviation(f, lit(p as f64)))
}

/// All diagnostics of one snapshot; `prev` enables the energy residual.
pub fn observe<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
    prev: Option<&NpdState<T>>,
) -> Result<DiagnosticsRecord<T>> {
    let d = state.derived(params, body)?;
    let c = state.concentrations();
    let sigma = state.total_concentration();
    let mut hk_norms = [T::zero(); 3];
    for ch in &d.c_hat {
        for (k, h) in hk_norms.iter_mut().enumerate() {
            *h = *h + spectral::sobolev_norm(ch, from_usize(k + 1), SobolevKind::Homogeneous);
        }
    }
    let energy_residual = match prev {
        Some(p) => energy_balance_residual(p, state, params, body)?,
        None => T::nan(),
    };
    Ok(DiagnosticsRecord {
        time: state.time(),
        means: c.iter().map(RealField::mean).collect(),
        min_c: c.iter().map(RealField::min).fold(T::infinity(), T::min),
        grad_l2: d
            .c_hat
            .iter()
            .map(|ch| spectral::sobolev_norm(ch, T::one(), SobolevKind::Homogeneous))
            .collect(),
        species_dev: c.iter().map(lp_deviations).collect(),
        rho_dev: lp_deviations(&d.rho),
        sigma_dev: lp_deviations(&sigma),
        hk_norms,
        energy_residual,
    })
}

/// Terms of the `(ρ, σ)` energy identity
/// `d/dt ½(‖ρ‖² + z²‖σ‖²) + D(‖∇ρ‖² + z²‖∇σ‖² + z²‖ρ√σ‖²) = −Dz² ∫ρρ̃σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms<T> {
    /// `½(‖ρ‖² + z²‖σ − σ̄‖²)`; differs from the full energy by a conserved
    /// constant.
    pub energy: T,
    /// `½(‖ρ‖² + z²‖σ‖²)`.
    pub energy_full: T,
    pub dissipation: T,
    /// `−Dz² ∫ρρ̃σ`.
    pub forcing: T,
    /// Share of `Σ|σ|` removed by clamping `σ` at zero.
    pub clamped_fraction: T,
}

pub fn energy_terms<T: Real>(
    state: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> EnergyTerms<T> {
    let z2 = params.valence_magnitude().powi(2);
    let dif = params.diffusivity();
    let rho = charge_density(state, params);
    let sigma = state.total_concentration();
    let sigma_mean = sigma.mean();
    let rho_hat = rho.forward();
    let sigma_hat = sigma.forward();
    let grad_rho = spectral::sobolev_norm(&rho_hat, T::one(), SobolevKind::Homogeneous);
    let grad_sigma = spectral::sobolev_norm(&sigma_hat, T::one(), SobolevKind::Homogeneous);

    let cell = state.grid().cell_volume();
    let mut rho_sq_sigma = T::zero();
    let mut coupling = T::zero();
    let mut clamped = T::zero();
    let mut total = T::zero();
    for ((&r, &s), &rt) in rho
        .values()
        .iter()
        .zip(sigma.values())
        .zip(body.field().values())
    {
        rho_sq_sigma = rho_sq_sigma + r * r * s.max(T::zero());
        coupling = coupling + r * rt * s;
        clamped = clamped + (-s).max(T::zero());
        total = total + s.abs();
    }
    let half = lit::<T>(0.5);
    let rho_l2 = rho.l2_norm().powi(2);
    let sigma_dev_l2 = sigma.map(|v| v - sigma_mean).l2_norm().powi(2);
    EnergyTerms {
        energy: half * (rho_l2 + z2 * sigma_dev_l2),
        energy_full: half * (rho_l2 + z2 * sigma.l2_norm().powi(2)),
        dissipation: dif * (grad_rho.powi(2) + z2 * grad_sigma.powi(2) + z2 * rho_sq_sigma * cell),
        forcing: -dif * z2 * coupling * cell,
        clamped_fraction: if total > T::zero() {
            clamped / total
        } else {
            T::zero()
        },
    }
}

/// Discrete residual of the energy identity between two snapshots:
/// `|ΔE/Δt + ⟨dissipation⟩ − ⟨forcing⟩|`, endpoint averages, relative to
/// the mean energy `½(‖ρ‖² + z²‖σ − σ̄‖²)` of the pair (absolute when that
/// vanishes). NaN when clamping `σ ≥ 0` removed too much mass.
pub fn energy_balance_residual<T: Real>(
    a: &NpdState<T>,
    b: &NpdState<T>,
    params: &SpeciesParams<T>,
    body: &BodyCharge<T>,
) -> Result<T> {
    let dt = b.time() - a.time();
    if !(dt > T::zero()) {
        return Err(NpdError::MismatchedTrajectories);
    }
    let ea = energy_terms(a, params, body);
    let eb = energy_terms(b, params, body);
    let limit = lit::<T>(MAX_CLAMPED_FRACTION);
    if ea.clamped_fraction > limit || eb.clamped_fraction > limit {
        return Ok(T::nan());
    }
    let half = lit::<T>(0.5);
    let rate = (eb.energy - ea.energy) / dt;
    let balance =
        rate + half * (ea.dissipation + eb.dissipation) - half * (ea.forcing + eb.forcing);
    let scale = half * (ea.energy + eb.energy);
    Ok(if scale > T::zero() {
        balance.abs() / scale
    } else {
        balance.abs()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    /// Estimated additive plateau `C₂`.
    pub offset: T,
    pub r2: T,
    /// The window was flat; `rate` and `r2` are zero.
    pub degenerate: bool,
    pub points: usize,
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) * lit(0.5)
    }
}

/// Fits `y ≈ C₁ e^{−rt} + C₂` on `window = (t_start, t_end)`.
///
/// `C₂` is the median of the last fifth of the series when that tail has
/// flattened out (spread below [`FLAT_TAIL_REL`] of the median) and zero
/// otherwise; the rate then comes from least squares on `log(y − C₂)`.
pub fn fit_decay_rate<T: Real>(series: &[(T, T)], window: (T, T)) -> Result<DecayFit<T>> {
    if series.len() < 10 {
        return Err(NpdError::FitPrecondition(format!(
            "need at least 10 samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(NpdError::FitPrecondition(
            "series contains non-finite values".into(),
        ));
    }
    let tail_len = (series.len() / 5).max(3);
    let tail: Vec<T> = series[series.len() - tail_len..]
        .iter()
        .map(|p| p.1)
        .collect();
    let (lo, hi) = tail
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let med = median(tail);
    let offset = if hi - lo <= lit::<T>(FLAT_TAIL_REL) * med.abs() {
        med
    } else {
        T::zero()
    };

    let pts: Vec<(T, T)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|&(t, y)| (t, y - offset))
        .collect();
    let degenerate = DecayFit {
        rate: T::zero(),
        offset,
        r2: T::zero(),
        degenerate: true,
        points: pts.len(),
    };
    if pts.len() < 3 {
        return Err(NpdError::FitPrecondition(format!(
            "only {} samples in the window",
            pts.len()
        )));
    }
    let scale = series.iter().fold(T::zero(), |m, p| m.max(p.1.abs()));
    let tiny = T::epsilon() * lit(64.0) * scale;
    if pts.iter().all(|p| p.1.abs() <= tiny) {
        return Ok(degenerate);
    }
    if pts.iter().any(|p| !(p.1 > T::zero())) {
        return Err(NpdError::FitPrecondition(
            "y - offset is not positive on the window".into(),
        ));
    }
    let logs: Vec<(T, T)> = pts.iter().map(|&(t, y)| (t, y.ln())).collect();
    let line = linear_fit(&logs);
    if line.ss_tot <= T::epsilon() * T::epsilon() * lit(pts.len() as f64) {
        return Ok(degenerate);
    }
    Ok(DecayFit {
        rate: -line.slope,
        offset,
        r2: line.r2,
        degenerate: false,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub ss_tot: T,
}

/// Ordinary least squares `y ≈ a + b t`.
pub fn linear_fit<T: Real>(pts: &[(T, T)]) -> LineFit<T> {
    let n = from_usize::<T>(pts.len());
    let tm = pts.iter().map(|p| p.0).sum::<T>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<T>() / n;
    let mut stt = T::zero();
    let mut sty = T::zero();
    let mut ss_tot = T::zero();
    for &(t, y) in pts {
        stt = stt + (t - tm) * (t - tm);
        sty = sty + (t - tm) * (y - ym);
        ss_tot = ss_tot + (y - ym) * (y - ym);
    }
    let slope = if stt > T::zero() {
        sty / stt
    } else {
        T::zero()
    };
    let intercept = ym - slope * tm;
    let ss_res: T = pts
        .iter()
        .map(|&(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    let r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::zero()
    };
    LineFit {
        slope,
        intercept,
        r2,
        ss_tot,
    }
}

/// Pieces of the weighted Poincaré inequality
/// `‖g‖_p^p ≤ C p² ‖|g|^{(p−2)/2} ∇f‖² + (2/|T^d|) ‖g‖_{p/2}^p`, `g = f − f̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareTerms<T> {
    /// `‖g‖_{L^p}^p`.
    pub lp_term: T,
    /// `‖|g|^{(p−2)/2} ∇f‖²_{L²}` (without the `p²`).
    pub gradient_term: T,
    /// `(2/|T^d|) ‖g‖_{L^{p/2}}^p`.
    pub lower_term: T,
}

pub fn poincare_terms<T: Real>(f: &RealField<T>, p: T) -> Result<PoincareTerms<T>> {
    if !(p >= lit(2.0)) {
        return Err(NpdError::InvalidParams(format!(
            "Poincaré exponent {p} must be >= 2"
        )));
    }
    let grid = f.grid();
    let cell = grid.cell_volume();
    let mean = f.mean();
    let grad = inverse_all(&gradient(&f.forward()));
    let half_p = p * lit(0.5);
    let weight_exp = p - lit(2.0);
    let mut lp = T::zero();
    let mut lower = T::zero();
    let mut weighted = T::zero();
    for i in 0..grid.len() {
        let g = (f.values()[i] - mean).abs();
        lp = lp + g.powf(p);
        lower = lower + g.powf(half_p);
        let w = if weight_exp == T::zero() {
            T::one()
        } else {
            g.powf(weight_exp)
        };
        let gs: T = grad.iter().map(|c| c.values()[i] * c.values()[i]).sum();
        weighted = weighted + w * gs;
    }
    let lower_norm = lower * cell;
    Ok(PoincareTerms {
        lp_term: lp * cell,
        gradient_term: weighted * cell,
        lower_term: lit::<T>(2.0) / grid.volume() * lower_norm * lower_norm,
    })
}

/// Empirical constant `‖g‖_p^p / (p² ‖|g|^{(p−2)/2}∇f‖² + (2/|T^d|)‖g‖_{p/2}^p)`;
/// zero for (numerically) constant `f`.
pub fn poincare_ratio<T: Real>(f: &RealField<T>, p: T) -> Result<T> {
    let terms = poincare_terms(f, p)?;
    let den = p * p * terms.gradient_term + terms.lower_term;
    if den < lit(1e-30) {
        return Ok(T::zero());
    }
    Ok(terms.lp_term / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationSample<T> {
    pub time: T,
    /// Distance in the `H¹ × … × H¹` norm.
    pub distance: T,
    /// `distance / distance(t₀)`; zero when both start identical.
    pub ratio: T,
    pub log_distance: T,
}

/// `‖a − b‖_V` of two snapshots.
pub fn v_distance<T: Real>(a: &NpdState<T>, b: &NpdState<T>) -> Result<T> {
    if a.n_species() != b.n_species() || !spectral::same_grid(a.grid(), b.grid()) {
        return Err(NpdError::MismatchedTrajectories);
    }
    let diff: Vec<_> = a
        .concentrations()
        .iter()
        .zip(b.concentrations())
        .map(|(x, y)| x.sub(y).forward())
        .collect();
    Ok(v_norm(&diff))
}

/// Separation of two trajectories sampled at the same output times.
pub fn twin_separation<T: Real>(
    a: &[NpdState<T>],
    b: &[NpdState<T>],
) -> Result<Vec<SeparationSample<T>>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(NpdError::MismatchedTrajectories);
    }
    let mut out = Vec::with_capacity(a.len());
    let mut d0 = T::zero();
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let tol = lit::<T>(1e-12) * x.time().abs().max(T::one());
        if (x.time() - y.time()).abs() > tol {
            return Err(NpdError::MismatchedTrajectories);
        }
        let distance = v_distance(x, y)?;
        if k == 0 {
            d0 = distance;
        }
        out.push(SeparationSample {
            time: x.time(),
            distance,
            ratio: if d0 > T::zero() {
                distance / d0
            } else {
                T::zero()
            },
            log_distance: distance.ln(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{random_state, BodyChargeRecipe, ScenarioSpec};
    use crate::spectral::{make_grid, resample, GridRef};
    use crate::timestepper::Stepper;

    fn two_species() -> SpeciesParams<f64> {
        SpeciesParams::new(1.0, vec![1.0, -1.0]).unwrap()
    }

    fn spec(n: usize, eps: f64, seed: u64) -> ScenarioSpec<f64> {
        ScenarioSpec {
            dim: 3,
            n,
            diffusivity: 1.0,
            valences: vec![1.0, -1.0],
            means: vec![1.0, 1.0],
            epsilon: eps,
            k_max: None,
            seed,
            body: BodyChargeRecipe::None,
        }
    }

    #[test]
    fn equilibrium_record() {
        let g = make_grid::<f64>(3, 16).unwrap();
        let s = NpdState::new(
            0.0,
            vec![RealField::constant(&g, 1.5), RealField::constant(&g, 1.5)],
        )
        .unwrap();
        let body = BodyCharge::zero(&g);
        let r = observe(&s, &two_species(), &body, None).unwrap();
        assert_eq!(r.means, vec![1.5, 1.5]);
        assert!(r.grad_l2.iter().all(|&v| v < 1e-14));
        assert!(r.rho_dev.iter().chain(&r.sigma_dev).all(|&v| v < 1e-13));
        assert!(r.hk_norms.iter().all(|&v| v < 1e-13));
        assert!(r.energy_residual.is_nan());
        assert_eq!(r.values().len(), DiagnosticsRecord::<f64>::columns(2).len());

        let mut later = s.clone();
        later.set_time(0.1);
        assert!(energy_balance_residual(&s, &later, &two_species(), &body).unwrap() <= 1e-13);
    }

    #[test]
    fn single_mode_record() {
        let g = make_grid::<f64>(3, 16).unwrap();
        let c1 = RealField::from_fn(&g, |x| 2.0 + x[0].cos());
        let s = NpdState::new(0.0, vec![c1, RealField::constant(&g, 1.0)]).unwrap();
        let body = BodyCharge::new(RealField::constant(&g, -1.0)).unwrap();
        let r = observe(&s, &two_species(), &body, None).unwrap();
        let cos_l2 = RealField::from_fn(&g, |x| x[0].cos()).l2_norm();
        assert!((r.grad_l2[0] - cos_l2).abs() < 1e-12 * cos_l2);
        assert!((r.species_dev[0][0] - cos_l2).abs() < 1e-12 * cos_l2);
        assert!((r.rho_dev[0] - cos_l2).abs() < 1e-12 * cos_l2);
    }

    #[test]
    fn csv_columns() {
        let cols = DiagnosticsRecord::<f64>::columns(2);
        assert_eq!(
            cols.join(","),
            "t,mean_c1,mean_c2,min_c,gradL2_c1,gradL2_c2,L2_rho_dev,L3_rho_dev,L4_rho_dev,L6_rho_dev,L2_sigma_dev,H1,H2,H3,energy_residual"
        );
    }

    #[test]
    fn lp_quadrature_agrees_with_refined_grid() {
        // |g|^p is not band-limited, so the collocation sum carries an aliasing
        // error that shrinks quickly with n; 64² keeps every p below 1e-6.
        let fine: GridRef<f64> = make_grid(2, 128).unwrap();
        for seed in 0..3 {
            let mut s = spec(64, 0.3, seed);
            s.dim = 2;
            let state = random_state(&s).unwrap();
            for c in state.concentrations() {
                let refined = resample(&c.forward(), &fine).unwrap().inverse();
                for p in [2.0, 3.0, 4.0, 6.0] {
                    let coarse = lp_deviation(c, p);
                    let dense = lp_deviation(&refined, p);
                    assert!(
                        ((coarse - dense) / dense).abs() < 1e-6,
                        "p={p}: {coarse} vs {dense}"
                    );
                }
            }
        }
    }

    #[test]
    fn fit_exact_exponential() {
        let series: Vec<_> = (0..101)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 5.0 * (-2.0 * t).exp())
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-8);
        assert_eq!(fit.offset, 0.0);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn fit_constant_is_degenerate() {
        let series: Vec<_> = (0..50).map(|i| (i as f64 * 0.1, 3.0)).collect();
        let fit = fit_decay_rate(&series, (0.0, 5.0)).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.rate, 0.0);
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn fit_with_plateau_and_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let series: Vec<_> = (0..201)
            .map(|i| {
                let t = i as f64 * 0.05;
                let noise: f64 = rng.random_range(-1.0..1.0);
                (t, 5.0 * (-2.0 * t).exp() + 1.0 + 1e-6 * noise)
            })
            .collect();
        let fit = fit_decay_rate(&series, (0.0, 3.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-3, "rate {}", fit.rate);
        assert!((fit.offset - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fit_preconditions() {
        let short: Vec<_> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(
            fit_decay_rate(&short, (0.0, 5.0)),
            Err(NpdError::FitPrecondition(_))
        ));
    }

    #[test]
    fn poincare_examples() {
        let g = make_grid::<f64>(3, 16).unwrap();
        let f = RealField::from_fn(&g, |x| x[0].cos());
        let t = poincare_terms(&f, 2.0).unwrap();
        assert!((t.lp_term / t.gradient_term - 1.0).abs() < 1e-12);
        let f2 = RealField::from_fn(&g, |x| (2.0 * x[0]).cos());
        let t = poincare_terms(&f2, 2.0).unwrap();
        assert!((t.lp_term / t.gradient_term - 0.25).abs() < 1e-12);
        assert_eq!(
            poincare_ratio(&RealField::constant(&g, 4.0), 4.0).unwrap(),
            0.0
        );
        assert!(poincare_ratio(&f, 1.0).is_err());
    }

    #[test]
    fn p2_poincare_ratio_is_below_one() {
        let g = make_grid::<f64>(2, 32).unwrap();
        for seed in 0..50 {
            let f = crate::scenarios::band_limited_field(&g, 10, seed);
            assert!(poincare_ratio(&f, 2.0).unwrap() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn twin_separation_cases() {
        let g = make_grid::<f64>(2, 16).unwrap();
        let params = two_species();
        let s = spec(16, 0.2, 1);
        let mut s2 = s.clone();
        s2.dim = 2;
        let a = random_state(&s2).unwrap();
        let body = BodyCharge::zero(&g);
        let stepper = Stepper::new(params, body);
        let run = |init: NpdState<f64>| {
            let mut out = vec![init.clone()];
            let mut cur = init;
            for _ in 0..5 {
                cur = stepper.step(&cur, 0.05).unwrap();
                out.push(cur.clone());
            }
            out
        };
        let ta = run(a.clone());
        let same = twin_separation(&ta, &ta).unwrap();
        assert!(same.iter().all(|s| s.distance == 0.0 && s.ratio == 0.0));

        let tb = run(a.clone());
        assert_eq!(twin_separation(&ta, &tb).unwrap()[5].distance, 0.0);
        assert!(matches!(
            twin_separation(&ta, &tb[..3]),
            Err(NpdError::MismatchedTrajectories)
        ));
        let mut shifted = tb.clone();
        shifted[2].set_time(9.0);
        assert!(twin_separation(&ta, &shifted).is_err());
    }
}
