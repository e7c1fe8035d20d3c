//! Writes learning curves, the plant listing and a run manifest.
//!
//! Floats are printed with Rust's shortest round-trip formatting so that a
//! re-parse recovers the in-memory values exactly and identical runs give
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::PlantSchedule;

use super::config::ExperimentConfig;
use super::experiment::{to_db, AlgorithmSummary, CurveMeta, ExperimentOutput, LearningCurve};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLANTS_FILE: &str = "plants.csv";

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    experiment: &'a str,
    master_seed: u64,
    config_hash: &'a str,
    nominal_input_power: f64,
    measured_input_power: f64,
    stages: Vec<[usize; 2]>,
    algorithms: &'a [AlgorithmSummary],
    files: Vec<String>,
    config: ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct CurveJson<'a> {
    metadata: CurveJsonMeta<'a>,
    iter: Vec<usize>,
    msd_linear: &'a [f64],
    msd_db: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<&'a [f64]>,
}

#[derive(Debug, Serialize)]
struct CurveJsonMeta<'a> {
    name: &'a str,
    variable: bool,
    #[serde(flatten)]
    meta: &'a CurveMeta,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// CSV text of one curve: `iter,msd_linear,msd_db[,mu,lambda]`.
pub fn curve_csv(curve: &LearningCurve) -> Vec<u8> {
    let mut out = String::with_capacity(curve.len() * 48 + 32);
    out.push_str("iter,msd_linear,msd_db");
    let traces = curve.mu.as_ref().zip(curve.lambda.as_ref());
    if traces.is_some() {
        out.push_str(",mu,lambda");
    }
    out.push('\n');
    for (i, &m) in curve.msd.iter().enumerate() {
        out.push_str(&format!("{},{},{}", i + 1, m, to_db(m)));
        if let Some((mu, lambda)) = traces {
            out.push_str(&format!(",{},{}", mu[i], lambda[i]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn curve_json(curve: &LearningCurve) -> Result<Vec<u8>> {
    let doc = CurveJson {
        metadata: CurveJsonMeta {
            name: &curve.name,
            variable: curve.variable,
            meta: &curve.meta,
        },
        iter: (1..=curve.len()).collect(),
        msd_linear: &curve.msd,
        msd_db: curve.msd_db(),
        mu: curve.mu.as_deref(),
        lambda: curve.lambda.as_deref(),
    };
    serde_json::to_vec_pretty(&doc).map_err(|e| Error::Config(e.to_string()))
}

/// Plant listing: one row per tap, one column per segment.
pub fn plants_csv(schedule: &PlantSchedule) -> Vec<u8> {
    let segs = schedule.segments();
    let mut out = String::from("tap");
    for s in segs {
        out.push_str(&format!(",w_from_{}", s.start));
    }
    out.push('\n');
    for tap in 0..schedule.len() {
        out.push_str(&tap.to_string());
        for s in segs {
            out.push_str(&format!(",{}", s.weights[tap]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Writes every curve plus `plants.csv` and `manifest.json` into `dir`,
/// returning the written paths in a fixed order.
pub fn emit_curves(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    if output.curves.is_empty() {
        return Err(Error::Config("nothing to emit: no curves".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let format = output.config.format;
    let mut written = Vec::new();
    for curve in &output.curves {
        if format.csv() {
            let path = dir.join(format!("{}.csv", curve.name));
            write_file(&path, &curve_csv(curve))?;
            written.push(path);
        }
        if format.json() {
            let path = dir.join(format!("{}.json", curve.name));
            write_file(&path, &curve_json(curve)?)?;
            written.push(path);
        }
    }

    let plants = dir.join(PLANTS_FILE);
    write_file(&plants, &plants_csv(&output.config.schedule()?))?;
    written.push(plants);

    let manifest_path = dir.join(MANIFEST_FILE);
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: &output.config.name,
        master_seed: output.config.master_seed,
        config_hash: &output.config_hash,
        nominal_input_power: output.nominal_input_power,
        measured_input_power: output.measured_input_power,
        stages: output.stages.iter().map(|r| [r.start, r.end]).collect(),
        algorithms: &output.summaries,
        files,
        config: output.config.identity(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    write_file(&manifest_path, &bytes)?;
    written.push(manifest_path);
    Ok(written)
}

/// A curve file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRows {
    pub iter: Vec<usize>,
    pub msd_linear: Vec<f64>,
    pub msd_db: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
}

pub fn read_curve_csv(path: &Path) -> Result<CurveRows> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let variable = match names.as_slice() {
        ["iter", "msd_linear", "msd_db"] => false,
        ["iter", "msd_linear", "msd_db", "mu", "lambda"] => true,
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unexpected header {names:?}"),
            })
        }
    };
    let mut rows = CurveRows {
        iter: Vec::new(),
        msd_linear: Vec::new(),
        msd_db: Vec::new(),
        mu: variable.then(Vec::new),
        lambda: variable.then(Vec::new),
    };
    let bad = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        message: format!("row {line}: {msg}"),
    };
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let num = |k: usize| -> Result<f64> {
            record[k].parse::<f64>().map_err(|e| bad(line + 1, e.to_string()))
        };
        rows.iter.push(record[0].parse().map_err(|e: std::num::ParseIntError| bad(line + 1, e.to_string()))?);
        rows.msd_linear.push(num(1)?);
        rows.msd_db.push(num(2)?);
        if let (Some(mu), Some(lambda)) = (rows.mu.as_mut(), rows.lambda.as_mut()) {
            mu.push(num(3)?);
            lambda.push(num(4)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::AlgorithmKind;

    fn curve(variable: bool) -> LearningCurve {
        LearningCurve {
            name: "c".into(),
            kind: AlgorithmKind::Grza,
            variable,
            msd: vec![1.0, 0.123456789012345678, 1e-300],
            mu: variable.then(|| vec![0.01, 0.02, 1.0 / 3.0]),
            lambda: variable.then(|| vec![0.0, 1e-3, 2.5]),
            meta: CurveMeta {
                config_hash: "ab".into(),
                master_seed: 9,
                measured_input_power: 1.0,
                runs_used: 1,
                diverged_runs: 0,
            },
        }
    }

    #[test]
    fn csv_layout() {
        let text = String::from_utf8(curve_csv(&curve(false))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,msd_linear,msd_db"));
        assert_eq!(lines.next(), Some("1,1,0"));
        let text = String::from_utf8(curve_csv(&curve(true))).unwrap();
        assert!(text.starts_with("iter,msd_linear,msd_db,mu,lambda\n1,1,0,0.01,0\n"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for variable in [false, true] {
            let c = curve(variable);
            let path = dir.path().join("c.csv");
            fs::write(&path, curve_csv(&c)).unwrap();
            let rows = read_curve_csv(&path).unwrap();
            assert_eq!(rows.iter, vec![1, 2, 3]);
            assert_eq!(rows.msd_linear, c.msd);
            assert_eq!(rows.mu, c.mu);
            assert_eq!(rows.lambda, c.lambda);
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_curve_csv(&path), Err(Error::Format { .. })));
        assert!(matches!(read_curve_csv(&dir.path().join("none.csv")), Err(Error::Format { .. })));
    }

    #[test]
    fn json_has_metadata() {
        let v: serde_json::Value = serde_json::from_slice(&curve_json(&curve(true)).unwrap()).unwrap();
        assert_eq!(v["metadata"]["master_seed"], 9);
        assert_eq!(v["metadata"]["config_hash"], "ab");
        assert_eq!(v["iter"][2], 3);
        assert_eq!(v["mu"].as_array().unwrap().len(), 3);
    }
}
