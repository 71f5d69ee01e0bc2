//! Run artifacts: history CSV and summary JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bregman::{BregmanGeometry, DiameterReport};
use crate::error::{Error, Result};
use crate::solver::{BestPoint, BoundReport, Counters, RunResult, SolverConfig, Termination};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn history_header(dim: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((1..=dim).map(|i| format!("x{i}")));
    h.extend(["f", "g", "eps_feasible"].map(String::from));
    h.extend((1..=dim).map(|i| format!("E{i}")));
    h.extend(["E_norm", "t", "delta", "inv_norm", "boundary_truncated"].map(String::from));
    h
}

/// One row per iteration; `f` is empty where it was not evaluated.
pub fn history_csv(result: &RunResult, dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(history_header(dim))?;
    for r in &result.history {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.iter().map(|&v| fmt_float(v)));
        row.push(r.f_value.map(fmt_float).unwrap_or_default());
        row.push(fmt_float(r.g_value));
        row.push(r.eps_feasible.to_string());
        row.extend(r.e.iter().map(|&v| fmt_float(v)));
        for v in [r.e_norm, r.t, r.delta, r.inv_norm] {
            row.push(fmt_float(v));
        }
        row.push(r.boundary_truncated.to_string());
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary<'a> {
    pub problem: &'a str,
    pub config: &'a SolverConfig,
    pub best: &'a Option<BestPoint>,
    pub counters: &'a Counters,
    pub termination: Termination,
    pub failure: &'a Option<String>,
    pub iterations: usize,
    pub geometry: &'a BregmanGeometry,
    pub diameters: &'a DiameterReport,
    pub diagnostics: &'a Option<BoundReport>,
}

impl<'a> Summary<'a> {
    pub fn new(problem: &'a str, config: &'a SolverConfig, result: &'a RunResult) -> Self {
        Summary {
            problem,
            config,
            best: &result.best,
            counters: &result.counters,
            termination: result.termination,
            failure: &result.failure,
            iterations: result.history.len(),
            geometry: &result.geometry,
            diameters: &result.diameters,
            diagnostics: &result.diagnostics,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunArtifacts {
    pub summary: PathBuf,
    pub history: PathBuf,
}

/// Writes `<label>.summary.json` and `<label>.history.csv` into `dir`.
pub fn write_run_artifacts(
    dir: &Path,
    label: &str,
    problem: &str,
    config: &SolverConfig,
    result: &RunResult,
    dim: usize,
) -> Result<RunArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let summary = dir.join(format!("{label}.summary.json"));
    let history = dir.join(format!("{label}.history.csv"));
    write_atomic(&history, &history_csv(result, dim)?)?;
    write_atomic(&summary, &Summary::new(problem, config, result).to_json()?)?;
    Ok(RunArtifacts { summary, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::load_problem;
    use crate::solver::run;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            history_header(2).join(","),
            "k,x1,x2,f,g,eps_feasible,E1,E2,E_norm,t,delta,inv_norm,boundary_truncated"
        );
    }

    #[test]
    fn history_rows_match_records() {
        let p = load_problem("tp2").unwrap().spec;
        let cfg = SolverConfig::default();
        let r = run(&p, &cfg).unwrap();
        let bytes = history_csv(&r, 2).unwrap();
        let mut rd = csv::Reader::from_reader(bytes.as_slice());
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), r.history.len());
        for (row, rec) in rows.iter().zip(&r.history) {
            assert_eq!(row.len(), 13);
            assert_eq!(row[0].parse::<usize>().unwrap(), rec.k);
            assert_eq!(row[1].parse::<f64>().unwrap(), rec.x[0]);
            assert_eq!(row[3].is_empty(), rec.f_value.is_none());
            assert_eq!(row[10].parse::<f64>().unwrap(), rec.delta);
        }
    }

    #[test]
    fn artifacts_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = load_problem("tp1").unwrap().spec;
        let cfg = SolverConfig::default();
        let r = run(&p, &cfg).unwrap();
        let a = write_run_artifacts(dir.path(), "tp1", "tp1", &cfg, &r, 2).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&a.summary).unwrap()).unwrap();
        assert_eq!(v["problem"], "tp1");
        assert_eq!(v["config"]["M"], 10.0);
        assert!(v["best"]["f"].as_f64().is_some());
        let back: SolverConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(back, cfg);
        assert!(fs::read_dir(dir.path()).unwrap().all(|e| {
            !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")
        }));
    }
}
