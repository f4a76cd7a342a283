//! CSV and JSON files written by chain runs and diagnostics.
//!
//! Numbers use Rust's shortest round-trip formatting, so files are
//! byte-identical across runs with the same inputs. Undefined statistics are
//! written as `NA`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ComponentMoments, Histogram1D, Histogram2D};
use crate::error::{invalid, Result};
use crate::field::RealComponentVector;
use crate::inference::{csv_err, SolveCounters};
use crate::samplers::KernelParams;

/// Shortest round-trip text of `x`, in exponent form for very large or small magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => num(v),
        _ => "NA".into(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

/// Write a file atomically (temporary file plus rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Header of a samples file: `step,v0,v1,…`.
pub fn samples_header(dim: usize) -> Vec<String> {
    std::iter::once("step".to_string()).chain((0..dim).map(|l| format!("v{l}"))).collect()
}

pub fn sample_row(step: u64, v: &[f64]) -> Vec<String> {
    std::iter::once(step.to_string()).chain(v.iter().map(|x| num(*x))).collect()
}

pub const TRACE_HEADER: [&str; 3] = ["step", "phi", "accept"];

pub fn trace_row(step: u64, phi: f64, accepted: bool) -> [String; 3] {
    [step.to_string(), num(phi), u8::from(accepted).to_string()]
}

/// Rows of a samples file: `(step, components)`.
pub fn read_samples_csv(path: &Path) -> Result<(Vec<u64>, Vec<RealComponentVector>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut steps = Vec::new();
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut it = rec.iter();
        let step = it
            .next()
            .ok_or_else(|| invalid("empty row in samples file"))?
            .parse::<u64>()
            .map_err(|e| invalid(format!("bad step in samples file: {e}")))?;
        let v = it
            .map(|s| s.parse::<f64>().map_err(|e| invalid(format!("bad value in samples file: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        steps.push(step);
        samples.push(RealComponentVector(v));
    }
    Ok((steps, samples))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub steps: Vec<u64>,
    pub phis: Vec<f64>,
    pub accepts: Vec<bool>,
}

pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut t = Trace::default();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).ok_or_else(|| invalid("short row in trace file"));
        t.steps.push(field(0)?.parse().map_err(|e| invalid(format!("bad step in trace file: {e}")))?);
        t.phis.push(field(1)?.parse().map_err(|e| invalid(format!("bad phi in trace file: {e}")))?);
        t.accepts.push(field(2)? == "1");
    }
    Ok(t)
}

/// Per-chain run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub chain: usize,
    pub seed: u64,
    pub kernel: KernelParams,
    pub scenario: String,
    pub steps: u64,
    pub thin: usize,
    pub checkpoint_every: u64,
    pub acceptance_rate: f64,
    /// Solves spent in transitions.
    pub counters: SolveCounters,
    /// Solves spent evaluating the initial state.
    pub init_counters: SolveCounters,
    pub failures: u64,
    pub wall_time_secs: f64,
}

pub fn write_acf_csv(path: &Path, acf: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["lag", "value"]).map_err(csv_err)?;
    for (lag, v) in acf.iter().enumerate() {
        w.write_record([lag.to_string(), num(*v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_moments_csv(path: &Path, moments: &[ComponentMoments]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["component", "mean", "var", "skew", "exkurt"]).map_err(csv_err)?;
    for (l, m) in moments.iter().enumerate() {
        w.write_record([l.to_string(), num(m.mean), num(m.variance), fmt_opt(m.skewness), fmt_opt(m.excess_kurtosis)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `lo,hi,density` per bin.
pub fn write_hist1d_csv(path: &Path, h: &Histogram1D) -> Result<()> {
    let p = h.normalized()?;
    let e = h.edges.edges();
    let mut w = writer(path)?;
    w.write_record(["lo", "hi", "density"]).map_err(csv_err)?;
    for (i, d) in p.iter().enumerate() {
        w.write_record([num(e[i]), num(e[i + 1]), num(*d)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `x_lo,x_hi,y_lo,y_hi,density` per bin, x-major.
pub fn write_hist2d_csv(path: &Path, h: &Histogram2D) -> Result<()> {
    let p = h.normalized()?;
    let ex = h.x_edges.edges();
    let ey = h.y_edges.edges();
    let ny = h.y_edges.bins;
    let mut w = writer(path)?;
    w.write_record(["x_lo", "x_hi", "y_lo", "y_hi", "density"]).map_err(csv_err)?;
    for (idx, d) in p.iter().enumerate() {
        let (i, j) = (idx / ny, idx % ny);
        w.write_record([num(ex[i]), num(ex[i + 1]), num(ey[j]), num(ey[j + 1]), num(*d)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `step,v<c>…` with one TV column per component.
pub fn write_tv_csv(path: &Path, components: &[usize], steps: &[usize], tv: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> =
        std::iter::once("step".to_string()).chain(components.iter().map(|c| format!("v{c}"))).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (s, row) in steps.iter().zip(tv) {
        let rec: Vec<String> = std::iter::once(s.to_string()).chain(row.iter().map(|x| num(*x))).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of `observables.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRow {
    pub step: u64,
    pub name: String,
    pub value: f64,
    pub cma: f64,
    pub rel_err: Option<f64>,
}

pub fn write_observables_csv(path: &Path, rows: &[ObservableRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "name", "value", "CMA", "rel_err"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.step.to_string(), r.name.clone(), num(r.value), num(r.cma), fmt_opt(r.rel_err)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::BinEdges;

    #[test]
    fn samples_round_trip_exactly() {
        let dir = std::env::temp_dir().join(format!("flowinfer-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.csv");
        let rows = [vec![0.1, -2.5e-17, 1.0 / 3.0], vec![f64::MAX, 0.0, -7.25]];
        let mut w = writer(&path).unwrap();
        w.write_record(samples_header(3)).unwrap();
        for (i, r) in rows.iter().enumerate() {
            w.write_record(sample_row(i as u64 + 1, r)).unwrap();
        }
        w.flush().unwrap();
        drop(w);
        let (steps, s) = read_samples_csv(&path).unwrap();
        assert_eq!(steps, vec![1, 2]);
        assert_eq!(s[0].0, rows[0]);
        assert_eq!(s[1].0, rows[1]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn hist_files_list_every_bin() {
        let dir = std::env::temp_dir().join(format!("flowinfer-hist-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let h = Histogram1D::from_samples(BinEdges::new(0.0, 1.0, 4).unwrap(), &[0.1, 0.2, 0.9]);
        write_hist1d_csv(&dir.join("h.csv"), &h).unwrap();
        let text = fs::read_to_string(dir.join("h.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().starts_with("0.0,0.25,0.666"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
