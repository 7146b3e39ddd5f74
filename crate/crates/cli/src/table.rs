//! Sweep output tables. Numbers carry 17 significant digits in Rust's
//! locale-independent scientific notation, so they parse back exactly.

use std::io::Write;

use grbm_core::{SweepMode, SweepRow};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
}

pub const FREE_ENERGY_COLUMNS: [&str; 6] = ["sd", "f_exact_mean", "f1_mean", "f2_mean", "n_unconverged", "n_trials"];
pub const MSE_COLUMNS: [&str; 7] = ["sd", "mse1_h", "mse1_v", "mse2_h", "mse2_v", "n_unconverged", "n_trials"];

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_owned()
    } else {
        format!("{x:.16e}")
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Writes a header line and one line per row, LF-terminated.
pub fn write_rows<W: Write>(out: W, mode: SweepMode, rows: &[SweepRow], format: Format) -> Result<(), CliError> {
    let delimiter = match format {
        Format::Csv => b',',
        Format::Tsv => b'\t',
    };
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    match mode {
        SweepMode::FreeEnergy => {
            writer.write_record(FREE_ENERGY_COLUMNS)?;
            for r in rows {
                writer.write_record([
                    format_float(r.sd),
                    cell(r.f_exact_mean),
                    cell(r.f1_mean),
                    cell(r.f2_mean),
                    r.n_unconverged.to_string(),
                    r.n_trials.to_string(),
                ])?;
            }
        }
        SweepMode::Mse => {
            writer.write_record(MSE_COLUMNS)?;
            for r in rows {
                writer.write_record([
                    format_float(r.sd),
                    cell(r.mse1_h),
                    cell(r.mse1_v),
                    cell(r.mse2_h),
                    cell(r.mse2_v),
                    r.n_unconverged.to_string(),
                    r.n_trials.to_string(),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}
