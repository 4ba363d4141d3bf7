//! CSV import/export shared by the library and the CLI. All floats print
//! with 17 significant digits so files re-parse bit-exactly.

use crate::diagnostics::{RatioTrace, SweepRow};
use crate::error::{Error, Result};
use crate::sampler::SampleBatch;
use crate::sde::ScheduleSpec;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// 17 significant digits: enough for f64 round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Point cloud: one row per point, columns are dimensions.
pub fn write_points<P: AsRef<Path>>(path: P, points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Usage("no points to write".into()));
    }
    let dim = points[0].len();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a point cloud; a non-numeric first row is treated as a header.
pub fn read_points<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<f64>>> {
    let reader = BufReader::new(std::fs::File::open(&path)?);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = points.first() {
                    if row.len() != first.len() {
                        return Err(Error::Format(format!(
                            "line {}: expected {} columns, got {}",
                            lineno + 1,
                            first.len(),
                            row.len()
                        )));
                    }
                }
                points.push(row);
            }
            Err(_) if lineno == 0 => continue, // header
            Err(e) => {
                return Err(Error::Format(format!("line {}: {e}", lineno + 1)));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(points)
}

/// Trajectories: `(chain_id, step, t, sigma, x_0..x_{D-1}[, log_ratio])`.
pub fn write_trajectories<P: AsRef<Path>>(
    path: P,
    batch: &SampleBatch,
    spec: &ScheduleSpec,
) -> Result<()> {
    let trajs = batch
        .trajectories
        .as_ref()
        .ok_or_else(|| Error::Usage("batch carries no trajectories".into()))?;
    if trajs.is_empty() {
        return Err(Error::Usage("no trajectories to write".into()));
    }
    let dim = trajs[0].points[0].x.len();
    let any_ratio = trajs
        .iter()
        .any(|tr| tr.points.iter().any(|p| p.log_ratio.is_some()));
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mut header = vec!["chain_id".to_string(), "step".into(), "t".into(), "sigma".into()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    if any_ratio {
        header.push("log_ratio".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for tr in trajs {
        for (step, p) in tr.points.iter().enumerate() {
            let sigma = spec.kernel_std(p.t)?;
            let mut row = vec![
                tr.chain_id.to_string(),
                step.to_string(),
                fmt_f64(p.t),
                fmt_f64(sigma),
            ];
            row.extend(p.x.iter().map(|&v| fmt_f64(v)));
            if any_ratio {
                row.push(p.log_ratio.map(fmt_f64).unwrap_or_default());
            }
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loss curve: `(step, loss)`.
pub fn write_loss_curve<P: AsRef<Path>>(path: P, curve: &[(usize, f64)]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,loss")?;
    for &(step, loss) in curve {
        writeln!(w, "{step},{}", fmt_f64(loss))?;
    }
    w.flush()?;
    Ok(())
}

/// NFE sweep table: `(nfe, w1_unguided, w1_guided)`.
pub fn write_sweep<P: AsRef<Path>>(path: P, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "nfe,w1_unguided,w1_guided")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.nfe, fmt_f64(r.w1_unguided), fmt_f64(r.w1_guided))?;
    }
    w.flush()?;
    Ok(())
}

/// Ratio traces, several processes per file:
/// `(process, sigma, mean, median, q10, q90, count)`.
pub fn write_traces<P: AsRef<Path>>(path: P, traces: &[RatioTrace]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "process,sigma,mean,median,q10,q90,count")?;
    for tr in traces {
        for i in 0..tr.sigma.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                tr.label,
                fmt_f64(tr.sigma[i]),
                fmt_f64(tr.mean[i]),
                fmt_f64(tr.median[i]),
                fmt_f64(tr.q10[i]),
                fmt_f64(tr.q90[i]),
                tr.count[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
