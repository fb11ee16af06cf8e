//! Summary tables: mean and population standard deviation across
//! seeds, grouped by algorithm, noise factor and node count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::config::{Algorithm, ExperimentConfig};
use crate::pipeline::{write_atomic, AlgorithmRun, NodeSample, RunResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub nodes: usize,
    /// Lower edge of the x bin; `None` for per-run tables.
    pub bin_lo: Option<f64>,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

/// Key: algorithm, position of η in the config, node count, bin index.
type GroupKey = (Algorithm, usize, usize, i64);

fn stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn eta_index(cfg: &ExperimentConfig, eta: f64) -> usize {
    cfg.etas.iter().position(|&e| e == eta).unwrap_or(usize::MAX)
}

fn finish(cfg: &ExperimentConfig, groups: BTreeMap<GroupKey, Vec<f64>>, width: Option<f64>) -> Vec<SummaryRow> {
    groups
        .into_iter()
        .map(|((algorithm, e, nodes, bin), values)| {
            let (mean, std) = stats(&values);
            SummaryRow {
                algorithm,
                eta: cfg.etas[e],
                nodes,
                bin_lo: width.map(|w| bin as f64 * w),
                runs: values.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// One value per run and algorithm.
pub fn per_run_table(
    cfg: &ExperimentConfig,
    results: &[RunResult],
    value: impl Fn(&AlgorithmRun) -> Option<f64>,
) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in results {
        let e = eta_index(cfg, r.key.eta);
        for a in &r.algorithms {
            if let Some(v) = value(a) {
                groups.entry((a.algorithm, e, r.key.nodes, 0)).or_default().push(v);
            }
        }
    }
    finish(cfg, groups, None)
}

/// Node samples binned on `x`; each run contributes the mean of `y` per bin.
pub fn binned_table(
    cfg: &ExperimentConfig,
    results: &[RunResult],
    width: f64,
    x: impl Fn(&NodeSample) -> Option<f64>,
    y: impl Fn(&NodeSample) -> Option<f64>,
) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in results {
        let e = eta_index(cfg, r.key.eta);
        for a in &r.algorithms {
            let mut bins: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
            for s in &a.samples {
                if let (Some(xv), Some(yv)) = (x(s), y(s)) {
                    let slot = bins.entry((xv / width).floor() as i64).or_insert((0.0, 0));
                    slot.0 += yv;
                    slot.1 += 1;
                }
            }
            for (bin, (sum, n)) in bins {
                groups
                    .entry((a.algorithm, e, r.key.nodes, bin))
                    .or_default()
                    .push(sum / n as f64);
            }
        }
    }
    finish(cfg, groups, Some(width))
}

pub fn iterations_table(cfg: &ExperimentConfig, results: &[RunResult]) -> Vec<SummaryRow> {
    per_run_table(cfg, results, |a| Some(a.iterations))
}

fn table_bytes(rows: &[SummaryRow], x_name: Option<&str>, y_name: &str) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["algorithm".to_string(), "eta".into(), "nodes".into()];
    if let Some(x) = x_name {
        header.push(format!("{x}_bin_lo"));
    }
    header.extend(["runs".to_string(), format!("{y_name}_mean"), format!("{y_name}_std")]);
    w.write_record(&header)?;
    for r in rows {
        match (x_name, r.bin_lo) {
            (Some(_), Some(lo)) => w.serialize((r.algorithm.name(), r.eta, r.nodes, lo, r.runs, r.mean, r.std))?,
            _ => w.serialize((r.algorithm.name(), r.eta, r.nodes, r.runs, r.mean, r.std))?,
        }
    }
    Ok(w.into_inner()?)
}

/// Writes every summary table into `dir`; returns the written paths.
pub fn write_summaries(cfg: &ExperimentConfig, results: &[RunResult], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let rb = cfg.received_bin_db;
    let pb = cfg.power_bin_db;
    let tables: Vec<(&str, Vec<SummaryRow>, Option<&str>, &str)> = vec![
        (
            "iterations_vs_nodes",
            iterations_table(cfg, results),
            None,
            "iterations",
        ),
        (
            "range_vs_received",
            binned_table(cfg, results, rb, |s| s.received_dbm, |s| Some(s.range_m)),
            Some("received_dbm"),
            "range_m",
        ),
        (
            "energy_vs_power",
            binned_table(cfg, results, pb, |s| Some(s.power_dbm), |s| Some(s.remaining_mj)),
            Some("power_dbm"),
            "remaining_mj",
        ),
        (
            "error_vs_power",
            binned_table(cfg, results, pb, |s| Some(s.power_dbm), |s| s.phi),
            Some("power_dbm"),
            "phi",
        ),
        ("error_vs_nodes", per_run_table(cfg, results, |a| a.phi), None, "phi"),
        (
            "rate_vs_power",
            binned_table(cfg, results, pb, |s| Some(s.power_dbm), |s| s.rate),
            Some("power_dbm"),
            "rate_bits",
        ),
        (
            "rate_vs_nodes",
            per_run_table(cfg, results, |a| {
                let rates: Vec<f64> = a.samples.iter().filter_map(|s| s.rate).collect();
                (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
            }),
            None,
            "rate_bits",
        ),
    ];
    let mut written = Vec::new();
    for (name, rows, x, y) in tables {
        let path = dir.join(format!("{name}.csv"));
        write_atomic(&path, &table_bytes(&rows, x, y)?)?;
        written.push(path);
    }
    Ok(written)
}
