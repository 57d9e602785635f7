//! CSV tables and the post-hoc reports computed from them. Inline reports
//! written by `run` and the `analyze` verb go through the same functions.

use crate::CliError;
use npd_core::diagnostics::fit_decay_rate;
use npd_core::tangent::{fit_volume_rates, RateRow};
use npd_core::DiagnosticsRecord;
use std::io::Write;
use std::path::Path;

/// Floats are written with 17 significant digits, which round-trips `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(CliError::Schema(format!(
                "{}: missing header",
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            let row = record
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Schema(format!("{}: row {}: {e}", path.display(), k + 1)))?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn write(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(CliError::csv)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| fmt_f64(v)))
                .map_err(CliError::csv)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Number of species implied by a diagnostics header, if it matches the
/// schema exactly.
pub fn diagnostics_species(columns: &[String]) -> Option<usize> {
    let n = columns.iter().filter(|c| c.starts_with("mean_c")).count();
    (n > 0 && columns == DiagnosticsRecord::columns(n).as_slice()).then_some(n)
}

pub fn check_diagnostics(table: &Table) -> Result<usize, CliError> {
    let n = diagnostics_species(&table.columns).ok_or_else(|| {
        CliError::Schema(format!(
            "columns {:?} do not match the diagnostics schema",
            table.columns
        ))
    })?;
    if table.rows.is_empty() {
        return Err(CliError::Schema("diagnostics table has no rows".into()));
    }
    Ok(n)
}

/// Series fitted by the decay report.
fn decay_quantities(n_species: usize) -> Vec<String> {
    let mut q: Vec<String> = (1..=n_species).map(|i| format!("gradL2_c{i}")).collect();
    q.extend(
        [
            "L2_rho_dev",
            "L3_rho_dev",
            "L4_rho_dev",
            "L6_rho_dev",
            "L2_sigma_dev",
        ]
        .map(String::from),
    );
    q.extend(["H1", "H2", "H3"].map(String::from));
    q
}

pub const DECAY_COLUMNS: [&str; 8] = [
    "quantity", "rate", "offset", "r2", "points", "t0", "t1", "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub quantity: String,
    pub rate: f64,
    pub offset: f64,
    pub r2: f64,
    pub points: usize,
    pub window: (f64, f64),
    pub status: String,
}

pub fn default_decay_window(t_end: f64) -> (f64, f64) {
    ((t_end / 5.0).min(1.0), t_end)
}

/// Exponential fits `y ≈ C₁e^{−rt} + C₂` of every decaying diagnostic.
pub fn decay_report(table: &Table, window: (f64, f64)) -> Result<Vec<DecayRow>, CliError> {
    let n = check_diagnostics(table)?;
    let t = table.column("t").expect("schema has t");
    Ok(decay_quantities(n)
        .into_iter()
        .map(|q| {
            let y = table.column(&q).expect("schema column");
            let series: Vec<(f64, f64)> = t.iter().copied().zip(y).collect();
            match fit_decay_rate(&series, window) {
                Ok(fit) => DecayRow {
                    quantity: q,
                    rate: fit.rate,
                    offset: fit.offset,
                    r2: fit.r2,
                    points: fit.points,
                    window,
                    status: if fit.degenerate {
                        "degenerate".into()
                    } else {
                        "ok".into()
                    },
                },
                Err(e) => DecayRow {
                    quantity: q,
                    rate: f64::NAN,
                    offset: f64::NAN,
                    r2: f64::NAN,
                    points: 0,
                    window,
                    status: e.to_string(),
                },
            }
        })
        .collect())
}

pub fn write_decay_report(rows: &[DecayRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECAY_COLUMNS).map_err(CliError::csv)?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            fmt_f64(r.rate),
            fmt_f64(r.offset),
            fmt_f64(r.r2),
            r.points.to_string(),
            fmt_f64(r.window.0),
            fmt_f64(r.window.1),
            r.status.clone(),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub const ATTRACTOR_COLUMNS: [&str; 5] =
    ["quantity", "sup_late", "mean_late", "final", "late_from"];

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorRow {
    pub quantity: String,
    pub sup_late: f64,
    pub mean_late: f64,
    pub last: f64,
    pub late_from: f64,
}

/// Late-time size of the norms that bound the absorbing ball.
pub fn attractor_report(table: &Table, late_from: f64) -> Result<Vec<AttractorRow>, CliError> {
    let n = check_diagnostics(table)?;
    let t = table.column("t").expect("schema has t");
    let late: Vec<usize> = (0..t.len())
        .filter(|&k| t[k] >= late_from - 1e-12)
        .collect();
    if late.is_empty() {
        return Err(CliError::Schema(format!(
            "no samples after t = {late_from}"
        )));
    }
    Ok(decay_quantities(n)
        .into_iter()
        .map(|q| {
            let y = table.column(&q).expect("schema column");
            let vals: Vec<f64> = late.iter().map(|&k| y[k]).collect();
            AttractorRow {
                sup_late: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_late: vals.iter().sum::<f64>() / vals.len() as f64,
                last: *y.last().expect("non-empty"),
                late_from,
                quantity: q,
            }
        })
        .collect())
}

pub fn write_attractor_report(rows: &[AttractorRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ATTRACTOR_COLUMNS).map_err(CliError::csv)?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            fmt_f64(r.sup_late),
            fmt_f64(r.mean_late),
            fmt_f64(r.last),
            fmt_f64(r.late_from),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn log_volume_columns(n_list: &[usize]) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(n_list.iter().map(|n| format!("log_V{n}")))
        .collect()
}

/// Rate table from a `log_volume.csv` table.
pub fn rate_table(table: &Table, window: (f64, f64)) -> Result<Vec<RateRow<f64>>, CliError> {
    let n_list = table
        .columns
        .iter()
        .skip(1)
        .map(|c| {
            c.strip_prefix("log_V")
                .and_then(|n| n.parse::<usize>().ok())
        })
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty() && table.columns[0] == "t")
        .ok_or_else(|| {
            CliError::Schema(format!(
                "columns {:?} are not t, log_V<n>...",
                table.columns
            ))
        })?;
    if table.rows.is_empty() {
        return Err(CliError::Schema("log-volume table has no rows".into()));
    }
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let logs: Vec<Vec<f64>> = table.rows.iter().map(|r| r[1..].to_vec()).collect();
    Ok(fit_volume_rates(&times, &logs, &n_list, window))
}

pub fn write_rate_table(rows: &[RateRow<f64>], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RateRow::<f64>::COLUMNS)
        .map_err(CliError::csv)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.rate),
            fmt_f64(r.rate_over_n2),
            fmt_f64(r.fit_r2),
            fmt_f64(r.t0),
            fmt_f64(r.t1),
        ])
        .map_err(CliError::csv)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
