use crate::analysis::{
    self, attractor_report, decay_report, default_decay_window, fmt_f64, log_volume_columns, Table,
};
use crate::checkpoint;
use crate::config::{Experiment, RunConfig};
use crate::CliError;
use npd_core::diagnostics::{energy_balance_residual, observe, poincare_ratio, v_distance};
use npd_core::model::validate_state;
use npd_core::scenarios::{
    band_limited_field, neutral_body_charge, random_state, substream, total_mass,
};
use npd_core::spectral::v_norm;
use npd_core::tangent::volume_decay_experiment;
use npd_core::{DiagnosticsRecord, NpdState, RealField, SpectralField, Stepper};
use serde::Serialize;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const CHECKPOINT: &str = "checkpoint.bin";

/// Outcome of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: &'static str,
    pub lines: Vec<String>,
    /// False when an invariant-suite check failed.
    pub passed: bool,
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema_version: u32,
    experiment: &'a str,
    dim: usize,
    n: usize,
    n_species: usize,
    /// 2D runs fall outside the three-dimensional theory.
    extrapolation: bool,
    /// `Σ ∫ c_i(0) dx`, the mass bound of the initial data.
    total_mass: f64,
    crate_version: &'a str,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

/// The scenario's initial state and the stepper carrying its body charge.
pub fn prepare(config: &RunConfig) -> Result<(NpdState, Stepper), CliError> {
    let spec = config.scenario_spec();
    let w0 = random_state(&spec)?;
    let body = neutral_body_charge(&spec, &w0)?;
    let stepper = Stepper::new(spec.params()?, body).with_negativity_floor(Stepper::floor_for(&w0));
    Ok((w0, stepper))
}

fn write_metadata(config: &RunConfig, w0: &NpdState) -> Result<(), CliError> {
    let meta = Metadata {
        schema_version: crate::config::SCHEMA_VERSION,
        experiment: config.experiment.name(),
        dim: config.scenario.dim,
        n: config.scenario.n,
        n_species: config.scenario.valences.len(),
        extrapolation: config.scenario.dim == 2,
        total_mass: total_mass(w0),
        crate_version: env!("CARGO_PKG_VERSION"),
    };
    let text = toml::to_string(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(&config.output_dir.join("metadata.toml"), &text)?;
    let resolved = toml::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(&config.output_dir.join("config.toml"), &resolved)
}

fn record_row(rec: &DiagnosticsRecord) -> Vec<String> {
    rec.values().into_iter().map(fmt_f64).collect()
}

fn on_multiple(t: f64, every: f64) -> bool {
    every > 0.0 && t > 0.0 && ((t / every) - (t / every).round()).abs() < 1e-9
}

/// Integrates the scenario trajectory, appending one diagnostics row per
/// output time and checkpointing on the way. With `resume` the initial
/// row is already on disk and is not written again.
fn run_trajectory(
    config: &RunConfig,
    start: NpdState,
    stepper: &Stepper,
    table: &mut Table,
    resume: bool,
) -> Result<NpdState, CliError> {
    let csv_path = config.output_dir.join(DIAGNOSTICS_CSV);
    let file = if resume {
        OpenOptions::new()
            .append(true)
            .open(&csv_path)
            .map_err(|e| CliError::io(&csv_path, e))?
    } else {
        create(&csv_path)?
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    if !resume {
        writer.write_record(&table.columns).map_err(CliError::csv)?;
    }
    let (params, body) = (stepper.params().clone(), stepper.body().clone());
    let ckpt_path = config.output_dir.join(CHECKPOINT);
    let mut write_failure = None;
    let end = stepper.integrate_observed(start, &config.stepper_config(), |s, prev| {
        if resume && prev.is_none() {
            return Ok(());
        }
        let rec = observe(s, &params, &body, prev)?;
        let io = writer
            .write_record(record_row(&rec))
            .and_then(|_| writer.flush().map_err(csv::Error::from))
            .map_err(CliError::csv)
            .and_then(|_| {
                if on_multiple(s.time(), config.checkpoint_every) {
                    checkpoint::save(&ckpt_path, s, &params, &body)
                } else {
                    Ok(())
                }
            });
        if let Err(e) = io {
            // surface I/O failures after stopping the integration
            write_failure = Some(e);
            return Err(npd_core::NpdError::InvalidParams("output failure".into()));
        }
        table.rows.push(rec.values());
        Ok(())
    });
    if let Some(e) = write_failure {
        return Err(e);
    }
    Ok(end?)
}

fn write_trajectory_report(config: &RunConfig, table: &Table) -> Result<Vec<String>, CliError> {
    let path = config.output_dir.join(REPORT_CSV);
    match &config.experiment {
        Experiment::DecayNoBodyCharge { fit_window } => {
            let window =
                fit_window.map_or(default_decay_window(config.stepper.t_end), |[a, b]| (a, b));
            let rows = decay_report(table, window)?;
            analysis::write_decay_report(&rows, create(&path)?)?;
            Ok(rows
                .iter()
                .filter(|r| r.quantity.starts_with("gradL2"))
                .map(|r| {
                    format!(
                        "{}: rate {:.6} r2 {:.6} offset {:.3e}",
                        r.quantity, r.rate, r.r2, r.offset
                    )
                })
                .collect())
        }
        Experiment::AttractorWithBodyCharge { late_from } => {
            let from = late_from.unwrap_or(config.stepper.t_end / 2.0);
            let rows = attractor_report(table, from)?;
            analysis::write_attractor_report(&rows, create(&path)?)?;
            Ok(rows
                .iter()
                .filter(|r| r.quantity.starts_with('H'))
                .map(|r| format!("{}: sup over t >= {from} {:.6e}", r.quantity, r.sup_late))
                .collect())
        }
        _ => Ok(Vec::new()),
    }
}

/// Runs the configured experiment from scratch.
pub fn run(config: &RunConfig) -> Result<Summary, CliError> {
    let (w0, stepper) = prepare(config)?;
    fs::create_dir_all(&config.output_dir).map_err(|e| CliError::io(&config.output_dir, e))?;
    write_metadata(config, &w0)?;
    match &config.experiment {
        Experiment::DecayNoBodyCharge { .. } | Experiment::AttractorWithBodyCharge { .. } => {
            let mut table = Table::new(DiagnosticsRecord::columns(w0.n_species()));
            run_trajectory(config, w0, &stepper, &mut table, false)?;
            let lines = write_trajectory_report(config, &table)?;
            Ok(Summary {
                experiment: config.experiment.name(),
                lines,
                passed: true,
            })
        }
        Experiment::InvariantSuite {} => invariant_suite(config, w0, &stepper),
        Experiment::TwinLipschitz {
            perturbation,
            perturbation_seed,
        } => twin_lipschitz(config, w0, &stepper, *perturbation, *perturbation_seed),
        Experiment::BackwardUniquenessProbe {
            distance,
            perturbation_seed,
        } => backward_uniqueness(config, w0, &stepper, *distance, *perturbation_seed),
        Experiment::VolumeDecay { equilibrium, .. } => {
            volume_decay(config, w0, &stepper, *equilibrium)
        }
    }
}

/// Keeps the header and the rows with `t <= time` of a diagnostics CSV.
fn truncate_csv(path: &Path, time: f64) -> Result<Table, CliError> {
    let reader = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let mut kept = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let keep = match kept.len() {
            0 => true,
            _ => {
                let t: f64 = line
                    .split(',')
                    .next()
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| {
                        CliError::Schema(format!("{}: unreadable row {line:?}", path.display()))
                    })?;
                t <= time * (1.0 + 1e-12) + 1e-12
            }
        };
        if keep {
            kept.push(line);
        }
    }
    let mut text = kept.join("\n");
    text.push('\n');
    write_text(path, &text)?;
    let table = Table::read(path)?;
    analysis::check_diagnostics(&table)?;
    Ok(table)
}

/// Continues a single-trajectory run from its checkpoint.
pub fn resume(config: &RunConfig, checkpoint_path: Option<&Path>) -> Result<Summary, CliError> {
    if !config.experiment.single_trajectory() {
        return Err(CliError::Config(format!(
            "experiment.kind: {} cannot be resumed (only single-trajectory experiments can)",
            config.experiment.name()
        )));
    }
    let default_path: PathBuf = config.output_dir.join(CHECKPOINT);
    let path = checkpoint_path.unwrap_or(&default_path);
    let ckpt = checkpoint::load(path)?;
    let (w0, stepper) = prepare(config)?;
    let consistent = ckpt.state.grid().n() == w0.grid().n()
        && ckpt.state.grid().dim() == w0.grid().dim()
        && ckpt.params.valences() == stepper.params().valences()
        && ckpt.params.diffusivity() == stepper.params().diffusivity()
        && ckpt.body.field().values() == stepper.body().field().values();
    if !consistent {
        return Err(CliError::Checkpoint(format!(
            "{} does not belong to this configuration",
            path.display()
        )));
    }
    let mut table = truncate_csv(&config.output_dir.join(DIAGNOSTICS_CSV), ckpt.state.time())?;
    let end = run_trajectory(config, ckpt.state, &stepper, &mut table, true)?;
    if let Experiment::InvariantSuite {} = config.experiment {
        return finish_invariant_suite(config, &table, &w0, end, &stepper);
    }
    let lines = write_trajectory_report(config, &table)?;
    Ok(Summary {
        experiment: config.experiment.name(),
        lines,
        passed: true,
    })
}

/// Mean-free band-limited perturbation of every species with `‖δ‖_V = size`.
fn perturbation(w: &NpdState, size: f64, seed: u64) -> Vec<RealField> {
    let grid = w.grid();
    let k_max = (grid.n() / 4).max(1);
    let raw: Vec<RealField> = (0..w.n_species())
        .map(|i| band_limited_field(grid, k_max, substream(seed, i as u64)))
        .collect();
    let hat: Vec<SpectralField> = raw.iter().map(RealField::forward).collect();
    let s = size / v_norm(&hat);
    raw.iter().map(|f| f.scale(s)).collect()
}

fn shifted(w: &NpdState, delta: &[RealField], a: f64) -> Result<NpdState, CliError> {
    let c = w
        .concentrations()
        .iter()
        .zip(delta)
        .map(|(c, d)| c.zip_map(d, |x, y| x + a * y))
        .collect();
    Ok(NpdState::new(w.time(), c)?)
}

/// Advances every trajectory to `target` with identical steps of at most `dt`.
fn lockstep(
    states: &mut [NpdState],
    stepper: &Stepper,
    target: f64,
    dt: f64,
) -> Result<(), CliError> {
    let remaining = target - states[0].time();
    if remaining <= 0.0 {
        return Ok(());
    }
    let n = (remaining / dt - 1e-9).ceil().max(1.0) as usize;
    let h = remaining / n as f64;
    for k in 0..n {
        for s in states.iter_mut() {
            let mut next = stepper.step(s, h)?;
            if k + 1 == n {
                next.set_time(target);
            }
            *s = next;
        }
    }
    Ok(())
}

fn output_times(config: &RunConfig) -> Vec<f64> {
    let every = config.stepper.output_every;
    let t_end = config.stepper.t_end;
    let mut times = vec![0.0];
    let mut k = 1;
    while (k as f64) * every < t_end * (1.0 - 1e-12) {
        times.push(k as f64 * every);
        k += 1;
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    times
}

fn twin_lipschitz(
    config: &RunConfig,
    w0: NpdState,
    stepper: &Stepper,
    size: f64,
    seed: u64,
) -> Result<Summary, CliError> {
    let delta = perturbation(&w0, size, seed);
    let full = shifted(&w0, &delta, 1.0)?;
    let half = shifted(&w0, &delta, 0.5)?;
    let mut states = vec![w0, full, half];
    let mut sep = Table::new(
        ["t", "distance", "distance_half", "ratio", "growth"]
            .map(String::from)
            .to_vec(),
    );
    let d0 = v_distance(&states[1], &states[0])?;
    for t in output_times(config) {
        lockstep(&mut states, stepper, t, config.nominal_dt())?;
        let a = v_distance(&states[1], &states[0])?;
        let b = v_distance(&states[2], &states[0])?;
        sep.rows.push(vec![t, a, b, a / b, a / d0]);
    }
    sep.write(create(&config.output_dir.join("separation.csv"))?)?;
    let ratio = sep.column("ratio").expect("column");
    let growth = sep.column("growth").expect("column");
    let lo = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_growth = growth.iter().copied().fold(0.0, f64::max);
    let report = Table {
        columns: ["initial_distance", "min_ratio", "max_ratio", "max_growth"]
            .map(String::from)
            .to_vec(),
        rows: vec![vec![d0, lo, hi, max_growth]],
    };
    report.write(create(&config.output_dir.join(REPORT_CSV))?)?;
    Ok(Summary {
        experiment: "twin_lipschitz",
        lines: vec![
            format!("separation ratio (delta vs delta/2) in [{lo:.6}, {hi:.6}]"),
            format!("max separation growth {max_growth:.6e}"),
        ],
        passed: true,
    })
}

fn backward_uniqueness(
    config: &RunConfig,
    w0: NpdState,
    stepper: &Stepper,
    distance: f64,
    seed: u64,
) -> Result<Summary, CliError> {
    let delta = perturbation(&w0, distance, seed);
    let other = shifted(&w0, &delta, 1.0)?;
    let mut states = vec![w0, other];
    let mut sep = Table::new(["t", "distance", "log_distance"].map(String::from).to_vec());
    for t in output_times(config) {
        lockstep(&mut states, stepper, t, config.nominal_dt())?;
        let d = v_distance(&states[0], &states[1])?;
        sep.rows.push(vec![t, d, d.ln()]);
    }
    sep.write(create(&config.output_dir.join("separation.csv"))?)?;
    let d = sep.column("distance").expect("column");
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let positive = min > 0.0 && min.ln().is_finite();
    let report = Table {
        columns: [
            "initial_distance",
            "min_distance",
            "final_distance",
            "separated",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![vec![
            d[0],
            min,
            *d.last().expect("rows"),
            if positive { 1.0 } else { 0.0 },
        ]],
    };
    report.write(create(&config.output_dir.join(REPORT_CSV))?)?;
    Ok(Summary {
        experiment: "backward_uniqueness_probe",
        lines: vec![format!(
            "minimum V-distance {min:.6e} (log-separation finite: {positive})"
        )],
        passed: true,
    })
}

fn volume_decay(
    config: &RunConfig,
    w0: NpdState,
    stepper: &Stepper,
    equilibrium: bool,
) -> Result<Summary, CliError> {
    let vd = config
        .volume_decay_config()
        .expect("volume decay experiment");
    let start = if equilibrium {
        let grid = w0.grid();
        let c = config
            .scenario
            .means
            .iter()
            .map(|&m| RealField::constant(grid, m))
            .collect();
        NpdState::new(0.0, c)?
    } else {
        w0
    };
    let result = volume_decay_experiment(&start, stepper, &vd)?;
    let mut logs = Table::new(log_volume_columns(&result.n_list));
    for (t, lv) in result.times.iter().zip(&result.log_volumes) {
        logs.rows
            .push(std::iter::once(*t).chain(lv.iter().copied()).collect());
    }
    logs.write(create(&config.output_dir.join("log_volume.csv"))?)?;
    analysis::write_rate_table(
        &result.rates,
        create(&config.output_dir.join("rate_table.csv"))?,
    )?;
    Ok(Summary {
        experiment: "volume_decay",
        lines: result
            .rates
            .iter()
            .map(|r| {
                format!(
                    "n = {}: rate {:.6} (rate/n^2 {:.6}, r2 {:.6})",
                    r.n, r.rate, r.rate_over_n2, r.fit_r2
                )
            })
            .collect(),
        passed: true,
    })
}

fn invariant_suite(
    config: &RunConfig,
    w0: NpdState,
    stepper: &Stepper,
) -> Result<Summary, CliError> {
    let mut table = Table::new(DiagnosticsRecord::columns(w0.n_species()));
    let end = run_trajectory(config, w0.clone(), stepper, &mut table, false)?;
    finish_invariant_suite(config, &table, &w0, end, stepper)
}

/// Largest per-step energy residual over `steps` fixed steps from `start`.
fn energy_residual_over(
    start: &NpdState,
    stepper: &Stepper,
    dt: f64,
    steps: usize,
) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    let mut a = start.clone();
    for _ in 0..steps {
        let b = stepper.step(&a, dt)?;
        worst = worst.max(energy_balance_residual(
            &a,
            &b,
            stepper.params(),
            stepper.body(),
        )?);
        a = b;
    }
    Ok(worst)
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: String,
    pass: bool,
}

fn finish_invariant_suite(
    config: &RunConfig,
    table: &Table,
    w0: &NpdState,
    end: NpdState,
    stepper: &Stepper,
) -> Result<Summary, CliError> {
    let n = analysis::check_diagnostics(table)?;
    let (params, body) = (stepper.params(), stepper.body());
    let mut checks = Vec::new();

    let mut drift: f64 = 0.0;
    for i in 1..=n {
        let m = table.column(&format!("mean_c{i}")).expect("schema column");
        drift = drift.max(
            m.iter()
                .map(|v| ((v - m[0]) / m[0]).abs())
                .fold(0.0, f64::max),
        );
    }
    checks.push(Check {
        name: "mean_drift",
        value: drift,
        threshold: "<= 1e-11".into(),
        pass: drift <= 1e-11,
    });

    let min_c = table
        .column("min_c")
        .expect("schema column")
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let floor = stepper.negativity_floor().unwrap_or(0.0);
    checks.push(Check {
        name: "min_concentration",
        value: min_c,
        threshold: format!(">= {floor:e}"),
        pass: min_c >= floor,
    });

    let report = validate_state(&end, params, body);
    checks.push(Check {
        name: "neutrality_residual",
        value: report.neutrality_residual,
        threshold: format!("<= {:e}", report.neutrality_tolerance),
        pass: !report.neutrality_violation,
    });
    checks.push(Check {
        name: "divergence_residual",
        value: report.divergence_residual,
        threshold: "<= 1e-10".into(),
        pass: report.divergence_residual <= 1e-10,
    });

    let energy = table.column("energy_residual").expect("schema column");
    let flagged = energy.iter().skip(1).filter(|v| v.is_nan()).count();
    checks.push(Check {
        name: "energy_residual_flagged_rows",
        value: flagged as f64,
        threshold: "== 0".into(),
        pass: flagged == 0,
    });

    // second-order convergence of the energy residual from the initial data
    let dt = config.nominal_dt();
    let coarse = energy_residual_over(w0, stepper, dt, 10)?;
    let fine = energy_residual_over(w0, stepper, dt / 2.0, 20)?;
    let (value, pass) = if coarse < 1e-13 {
        (coarse, true)
    } else {
        (coarse / fine, (3.2..=4.8).contains(&(coarse / fine)))
    };
    checks.push(Check {
        name: "energy_residual_order",
        value,
        threshold: "ratio 4 +- 20% (or residual < 1e-13)".into(),
        pass,
    });

    let worst_p2 = end
        .concentrations()
        .iter()
        .map(|c| poincare_ratio(c, 2.0))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "poincare_p2",
        value: worst_p2,
        threshold: "<= 1 + 1e-10".into(),
        pass: worst_p2 <= 1.0 + 1e-10,
    });

    let path = config.output_dir.join("invariants.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["check", "value", "threshold", "status"])
        .map_err(CliError::csv)?;
    for c in &checks {
        w.write_record([
            c.name,
            &fmt_f64(c.value),
            &c.threshold,
            if c.pass { "PASS" } else { "FAIL" },
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let passed = checks.iter().all(|c| c.pass);
    let mut lines: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{} {} = {:.6e} ({})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            )
        })
        .collect();
    let n_pass = checks.iter().filter(|c| c.pass).count();
    lines.push(format!(
        "invariant_suite: {} ({n_pass}/{} checks)",
        if passed { "PASS" } else { "FAIL" },
        checks.len()
    ));
    Ok(Summary {
        experiment: "invariant_suite",
        lines,
        passed,
    })
}

/// Writes the machine-readable error record of a failed run.
pub fn write_error_record(dir: &Path, error: &CliError) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Record<'a> {
        kind: &'a str,
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        time: Option<f64>,
    }
    let record = Record {
        kind: error.kind(),
        message: error.to_string(),
        time: error.time(),
    };
    let text = toml::to_string(&record).map_err(|e| CliError::Io(e.to_string()))?;
    if dir.is_dir() {
        write_text(&dir.join("error.toml"), &text)?;
    }
    Ok(())
}
