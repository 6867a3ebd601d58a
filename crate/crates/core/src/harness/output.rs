//! Files written by the harness and validation against the published schema.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ensemble::EnsembleResult;
use super::sweep::{SummaryRow, SweepParameter, SweepPoint};
use super::trial::{StepRow, TrialRecord};
use crate::error::{Error, Result};
use crate::tree::{Ellipsoid, TreeSnapshot};

/// Column layout of every CSV the harness writes.
pub const OUTPUT_SCHEMA: &str = include_str!("../../schemas/outputs.json");

#[derive(Clone, Debug, Deserialize)]
pub struct TableSchema {
    /// Row-count expression, for documentation.
    pub rows: String,
    pub columns: Vec<ColumnSchema>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Integer,
    Number,
    Boolean,
    String,
}

pub fn output_schema() -> BTreeMap<String, TableSchema> {
    serde_json::from_str(OUTPUT_SCHEMA).expect("bundled schema is valid JSON")
}

/// Checks header and cell types of a CSV against the schema entry for its
/// file name. Returns the number of data rows.
pub fn validate_csv(path: &Path) -> Result<usize> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("bad path {}", path.display())))?;
    let schema = output_schema();
    let table = schema
        .get(name)
        .ok_or_else(|| Error::Config(format!("no schema for {name}")))?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::Config(format!(
            "{name}: header {header:?}, expected {expected:?}"
        )));
    }
    let mut n = 0;
    for record in reader.records() {
        let record = record?;
        n += 1;
        for (cell, col) in record.iter().zip(&table.columns) {
            let ok = match col.kind {
                ColumnType::Integer => cell.parse::<i64>().is_ok(),
                ColumnType::Number => cell.parse::<f64>().is_ok(),
                ColumnType::Boolean => matches!(cell, "true" | "false"),
                ColumnType::String => true,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "{name} row {n}: {:?} is not a valid {:?} for column {}",
                    cell, col.kind, col.name
                )));
            }
        }
    }
    Ok(n)
}

/// Serializes `rows`; an empty table still gets its schema header.
fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut empty = true;
    for r in rows {
        w.serialize(r)?;
        empty = false;
    }
    if empty {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(table) = output_schema().get(name) {
            w.write_record(table.columns.iter().map(|c| c.name.as_str()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

/// Contents of `region_<trial>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub trial: usize,
    pub alpha: f64,
    pub truth: Vec<f64>,
    pub ellipsoids: Vec<Ellipsoid>,
}

pub fn read_region(path: &Path) -> Result<RegionFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_snapshot(path: &Path) -> Result<TreeSnapshot> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `steps.csv`, the snapshots, the final tree and the region of one trial.
pub fn write_trial(dir: &Path, rec: &TrialRecord) -> Result<()> {
    write_steps(dir, &rec.rows)?;
    write_trial_artifacts(dir, rec)
}

/// `steps.csv` alone; used for the completed part of a failed trial.
pub fn write_steps(dir: &Path, rows: &[StepRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("steps.csv"), rows)
}

/// Snapshots, final tree (JSON and DOT) and region file of one trial.
pub fn write_trial_artifacts(dir: &Path, rec: &TrialRecord) -> Result<()> {
    let t = rec.trial;
    for snap in &rec.snapshots {
        let step = snap.step.unwrap_or(0);
        write_json(&dir.join(format!("tree_{t}_{step}.json")), snap)?;
    }
    let last = rec.rows.len();
    write_json(
        &dir.join(format!("tree_{t}_final.json")),
        &rec.tree.snapshot(Some(last), false),
    )?;
    fs::write(dir.join(format!("tree_{t}_final.dot")), rec.tree.to_dot())?;
    write_json(
        &dir.join(format!("region_{t}.json")),
        &RegionFile {
            trial: t,
            alpha: rec.region.alpha,
            truth: rec.truth.clone(),
            ellipsoids: rec.region.ellipsoids.clone(),
        },
    )
}

/// `losses.csv`, `aggregate.csv` and, for successful trials, the per-trial
/// artifacts.
pub fn write_ensemble(dir: &Path, result: &EnsembleResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("losses.csv"), &result.loss_rows)?;
    write_csv(&dir.join("aggregate.csv"), &result.aggregate)?;
    for rec in result.records() {
        write_trial_artifacts(dir, rec)?;
    }
    Ok(())
}

/// Directory of one sweep value, e.g. `w_floor=0.1`.
pub fn sweep_dir(root: &Path, parameter: SweepParameter, value: f64) -> PathBuf {
    root.join(format!("{}={}", parameter.name(), value))
}

pub fn write_sweep(dir: &Path, parameter: SweepParameter, points: &[SweepPoint], summary: &[SummaryRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for p in points {
        write_ensemble(&sweep_dir(dir, parameter, p.value), &p.result)?;
    }
    write_csv(&dir.join("summary.csv"), summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::TrialConfig;
    use crate::harness::ensemble::run_ensemble;
    use crate::harness::sweep::{run_sweep, summarize};
    use crate::harness::trial::run_trial;

    fn tiny() -> TrialConfig {
        let mut cfg = TrialConfig::rge_desk();
        cfg.tree.n_part = 100;
        cfg.tree.n_min_part = 30;
        cfg.n_experiments = 10;
        cfg.snapshot_every = Some(5);
        cfg
    }

    #[test]
    fn schema_parses() {
        let s = output_schema();
        for name in ["losses.csv", "aggregate.csv", "steps.csv", "summary.csv"] {
            assert!(s.contains_key(name));
        }
    }

    #[test]
    fn ensemble_outputs_validate() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_ensemble(&tiny(), 3, 2).unwrap();
        write_ensemble(dir.path(), &res).unwrap();
        assert_eq!(validate_csv(&dir.path().join("losses.csv")).unwrap(), 30);
        assert_eq!(validate_csv(&dir.path().join("aggregate.csv")).unwrap(), 10);
        for t in 0..3 {
            assert!(dir.path().join(format!("tree_{t}_5.json")).exists());
            assert!(dir.path().join(format!("tree_{t}_10.json")).exists());
            assert!(dir.path().join(format!("tree_{t}_final.dot")).exists());
            let region = read_region(&dir.path().join(format!("region_{t}.json"))).unwrap();
            assert_eq!(region.alpha, 0.95);
            assert!(!region.ellipsoids.is_empty());
        }
    }

    #[test]
    fn trial_and_sweep_outputs_validate() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run_trial(&tiny(), 0).unwrap();
        write_trial(dir.path(), &rec).unwrap();
        assert_eq!(validate_csv(&dir.path().join("steps.csv")).unwrap(), 10);
        let snap = read_snapshot(&dir.path().join("tree_0_final.json")).unwrap();
        assert_eq!(snap.to_dot(), rec.tree.to_dot());

        let points = run_sweep(&tiny(), SweepParameter::WFloor, &[0.05, 0.2], 2, 2).unwrap();
        let summary = summarize(SweepParameter::WFloor, &points);
        write_sweep(dir.path(), SweepParameter::WFloor, &points, &summary).unwrap();
        assert_eq!(validate_csv(&dir.path().join("summary.csv")).unwrap(), 2);
        assert!(dir.path().join("w_floor=0.05").join("aggregate.csv").exists());
    }

    #[test]
    fn empty_tables_keep_their_header() {
        let dir = tempfile::tempdir().unwrap();
        write_steps(dir.path(), &[]).unwrap();
        assert_eq!(validate_csv(&dir.path().join("steps.csv")).unwrap(), 0);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("aggregate.csv");
        fs::write(&p, "experiment_index,mean\n1,0.5\n").unwrap();
        assert!(validate_csv(&p).is_err());
        fs::write(&p, "experiment_index,mean_loss,median_loss\n1,x,0.5\n").unwrap();
        assert!(validate_csv(&p).is_err());
    }

    #[test]
    fn outputs_are_byte_identical_per_seed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_ensemble(a.path(), &run_ensemble(&tiny(), 2, 1).unwrap()).unwrap();
        write_ensemble(b.path(), &run_ensemble(&tiny(), 2, 2).unwrap()).unwrap();
        for name in ["losses.csv", "aggregate.csv", "tree_1_final.json", "region_0.json"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }
}
