//! Long-format `series,x,y` tables for plotting. Nothing is rendered.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::output;
use crate::CliError;

pub const PLOT_INPUTS: [&str; 3] = ["pressure.csv", "hyptimes_density.csv", "equilibrium.csv"];

/// Splits off the header comment and the column line.
fn table(text: &str) -> (String, Vec<Vec<&str>>) {
    let mut header = String::new();
    let mut rows = vec![];
    let mut seen_cols = false;
    for line in text.lines() {
        if line.starts_with('#') {
            header.push_str(line);
            header.push('\n');
        } else if !line.trim().is_empty() {
            if seen_cols {
                rows.push(line.split(',').collect());
            }
            seen_cols = true;
        }
    }
    (header, rows)
}

fn bad(path: &Path, msg: &str) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

fn num(path: &Path, s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| bad(path, &format!("bad number `{s}`")))
}

/// Mean over fibers of the pressure, one series per `eps`.
fn pressure_series(path: &Path, rows: &[Vec<&str>]) -> Result<String, CliError> {
    let mut acc: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.len() != 4 {
            return Err(bad(path, "expected fiber,n,eps,value"));
        }
        let n: usize = r[1].trim().parse().map_err(|_| bad(path, "bad n"))?;
        acc.entry((r[2].trim().to_string(), n)).or_default().push(num(path, r[3])?);
    }
    let mut s = String::from("series,x,y\n");
    for ((eps, n), v) in acc {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let _ = writeln!(s, "eps={eps},{n},{mean:?}");
    }
    Ok(s)
}

fn two_column(path: &Path, rows: &[Vec<&str>], series: &str, xcol: usize, ycol: usize) -> Result<String, CliError> {
    let mut s = String::from("series,x,y\n");
    for r in rows {
        if r.len() <= xcol.max(ycol) {
            return Err(bad(path, "short row"));
        }
        let _ = writeln!(s, "{series},{},{}", r[xcol].trim(), r[ycol].trim());
    }
    Ok(s)
}

/// Writes `plot_pressure.csv`, `plot_hyptimes.csv` and `plot_psi.csv` next to
/// their inputs, keeping each input's header line. Inputs that are missing
/// are reported on stderr; if none exists the call fails with the list.
pub fn emit_plot_data(results_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let missing: Vec<&str> = PLOT_INPUTS.iter().copied().filter(|f| !results_dir.join(f).is_file()).collect();
    if missing.len() == PLOT_INPUTS.len() {
        return Err(CliError::MissingInputs {
            dir: results_dir.to_path_buf(),
            files: missing.join(", "),
        });
    }
    for f in &missing {
        eprintln!("plot: missing input {}", results_dir.join(f).display());
    }
    let mut written = vec![];
    for (input, out) in PLOT_INPUTS.iter().zip(["plot_pressure.csv", "plot_hyptimes.csv", "plot_psi.csv"]) {
        let path = results_dir.join(input);
        if !path.is_file() {
            continue;
        }
        let text = output::read(&path)?;
        let (header, rows) = table(&text);
        let body = match *input {
            "pressure.csv" => pressure_series(&path, &rows)?,
            "hyptimes_density.csv" => two_column(&path, &rows, "density", 0, 1)?,
            _ => two_column(&path, &rows, "psi", 0, 3)?,
        };
        let dst = results_dir.join(out);
        fs::write(&dst, header + &body).map_err(|e| CliError::io(&dst, e))?;
        written.push(dst);
    }
    Ok(written)
}
