//! Improvement-ratio study on random monotone matrix games.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::games::{constants, random_monotone_game_stream, GameConstants, GameProblem};

/// `ημ / (ημ + (7/16)η²γ²)` with `η = 1/(4L)`.
pub fn improvement_ratio(p: &GameProblem) -> Result<f64> {
    ratio_from_constants(&constants(p)?)
}

pub fn ratio_from_constants(c: &GameConstants) -> Result<f64> {
    if c.lipschitz <= 0.0 || (c.mu <= 0.0 && c.gamma <= 0.0) {
        return Err(Error::Degenerate("ratio undefined when mu = gamma = 0".into()));
    }
    let eta = 0.25 / c.lipschitz;
    let a = eta * c.mu;
    let b = 7.0 / 16.0 * (eta * c.gamma).powi(2);
    Ok((a / (a + b)).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub d1: usize,
    pub d2: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub pairs: Vec<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl ExperimentSpec {
    /// Fixed total dimension, varying balance.
    pub fn balance_study(total: usize, trials: usize, seed: u64, output: impl Into<PathBuf>) -> Self {
        let pairs = [0.9, 0.7, 0.5].iter().map(|f| {
            let d1 = ((total as f64) * f).round() as usize;
            (d1, total - d1)
        });
        ExperimentSpec { name: "balance".into(), pairs: pairs.collect(), trials, seed, output: output.into() }
    }

    /// `d1` fixed, `d2` ranging over `d2s`.
    pub fn growth_study(d1: usize, d2s: &[usize], trials: usize, seed: u64, output: impl Into<PathBuf>) -> Self {
        let pairs = d2s.iter().map(|&d2| (d1, d2)).collect();
        ExperimentSpec { name: "growth".into(), pairs, trials, seed, output: output.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.pairs.is_empty() {
            return Err(Error::Config("at least one (d1, d2) pair is required".into()));
        }
        if self.pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::Config("player dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub label: String,
    pub d1: usize,
    pub d2: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub balanced: String,
    pub unbalanced: String,
    pub balanced_mean: f64,
    pub unbalanced_mean: f64,
    /// Mean ratio of the most balanced pair is at most that of the least balanced.
    pub expected_direction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub labels: Vec<String>,
    /// `columns[i][t]` is trial `t` of pair `i`.
    pub columns: Vec<Vec<f64>>,
    pub summaries: Vec<ColumnSummary>,
    pub balance: Option<BalanceReport>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

impl ExperimentResult {
    pub fn records(&self) -> Vec<RatioRecord> {
        self.summaries
            .iter()
            .zip(&self.columns)
            .flat_map(|(s, col)| col.iter().map(|&ratio| RatioRecord { d1: s.d1, d2: s.d2, ratio }))
            .collect()
    }
}

pub fn column_label(d1: usize, d2: usize) -> String {
    format!("{d1}vs{d2}")
}

fn trial_stream(pair: usize, trial: usize) -> u64 {
    ((pair as u64) << 32) | trial as u64
}

/// Ratios for every pair and trial; identical for serial and parallel schedules.
pub fn compute_ratios(spec: &ExperimentSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.pairs.len()).flat_map(|i| (0..spec.trials).map(move |t| (i, t))).collect();
    let flat: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let (d1, d2) = spec.pairs[i];
            let game = random_monotone_game_stream(d1, d2, spec.seed, trial_stream(i, t))?;
            improvement_ratio(&game)
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(spec.trials).map(<[f64]>::to_vec).collect())
}

fn summarize(label: String, d1: usize, d2: usize, col: &[f64]) -> ColumnSummary {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ColumnSummary { label, d1, d2, mean, std: var.sqrt(), min, max }
}

fn balance_report(summaries: &[ColumnSummary]) -> Option<BalanceReport> {
    let imbalance = |s: &ColumnSummary| (s.d1 as f64 - s.d2 as f64).abs() / (s.d1 + s.d2) as f64;
    let most = summaries.iter().min_by(|a, b| imbalance(a).total_cmp(&imbalance(b)))?;
    let least = summaries.iter().max_by(|a, b| imbalance(a).total_cmp(&imbalance(b)))?;
    if imbalance(most) == imbalance(least) {
        return None;
    }
    Some(BalanceReport {
        balanced: most.label.clone(),
        unbalanced: least.label.clone(),
        balanced_mean: most.mean,
        unbalanced_mean: least.mean,
        expected_direction: most.mean <= least.mean,
    })
}

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ratios_csv(labels: &[String], columns: &[Vec<f64>]) -> String {
    let mut out = labels.join(",");
    out.push('\n');
    let rows = columns.first().map_or(0, Vec::len);
    for t in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| format_value(c[t])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `gamma.csv` and `manifest.json` under `spec.output`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let columns = compute_ratios(spec)?;
    let labels: Vec<String> = spec.pairs.iter().map(|&(a, b)| column_label(a, b)).collect();
    let summaries: Vec<ColumnSummary> = spec
        .pairs
        .iter()
        .zip(&labels)
        .zip(&columns)
        .map(|((&(d1, d2), l), c)| summarize(l.clone(), d1, d2, c))
        .collect();
    let balance = balance_report(&summaries);

    let dir: &Path = &spec.output;
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("gamma.csv");
    fs::write(&csv_path, ratios_csv(&labels, &columns))?;
    let manifest = json!({
        "name": spec.name,
        "seed": spec.seed,
        "trials": spec.trials,
        "pairs": spec.pairs,
        "generator": {
            "name": "random_monotone",
            "chi2_dof": 1,
            "rng": "chacha20",
            "stream": "(pair_index << 32) | trial",
        },
        "eta": "1/(4L)",
        "summaries": summaries,
        "balance": balance,
    });
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)?;
    Ok(ExperimentResult { labels, columns, summaries, balance, csv_path, manifest_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{bilinear_game, Provenance};
    use crate::games::AffineVectorField;
    use crate::spectral::RealMatrix;

    fn quadratic(diag: &[f64]) -> GameProblem {
        let f = AffineVectorField::linear(RealMatrix::from_diagonal(diag)).unwrap();
        GameProblem::from_field(f, diag.len(), 0, Provenance::new("test", json!({}), None)).unwrap()
    }

    #[test]
    fn bilinear_ratio_is_zero() {
        let a = RealMatrix::from_rows(&[vec![2.0, 0.5], vec![0.1, 1.0]]).unwrap();
        let g = bilinear_game(&a, &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(improvement_ratio(&g).unwrap(), 0.0);
    }

    #[test]
    fn well_conditioned_quadratic_ratio_near_one() {
        // ημ / (ημ + (7/16)η²μ²) with η = 1/(4μ) is 64/71.
        let r = improvement_ratio(&quadratic(&[1.0, 1.0])).unwrap();
        assert!((r - 64.0 / 71.0).abs() < 1e-14);
        let c = GameConstants { mu: 1.0, gamma: 1e-6, lipschitz: 1.0, l_h_sq: 1.0 };
        assert!(ratio_from_constants(&c).unwrap() > 1.0 - 1e-11);
        let c = GameConstants { gamma: 0.0, ..c };
        assert_eq!(ratio_from_constants(&c).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_ratio() {
        let c = GameConstants { mu: 0.0, gamma: 0.0, lipschitz: 1.0, l_h_sq: 1.0 };
        assert!(matches!(ratio_from_constants(&c), Err(Error::Degenerate(_))));
        assert!(matches!(improvement_ratio(&quadratic(&[0.0, 0.0])), Err(Error::Degenerate(_))));
    }

    #[test]
    fn csv_layout() {
        let csv = ratios_csv(&["2vs1".into(), "1vs2".into()], &[vec![0.5, 0.25], vec![1.0, 0.0]]);
        assert_eq!(csv, "2vs1,1vs2\n5.0000000000000000e-1,1.0000000000000000e0\n2.5000000000000000e-1,0.0000000000000000e0\n");
        let x = 0.1f64 + 0.2;
        assert_eq!(format_value(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn serial_order_matches_parallel() {
        let spec = ExperimentSpec::balance_study(12, 3, 9, "unused");
        let par = compute_ratios(&spec).unwrap();
        for (i, &(d1, d2)) in spec.pairs.iter().enumerate() {
            for (t, x) in par[i].iter().enumerate() {
                let g = random_monotone_game_stream(d1, d2, 9, trial_stream(i, t)).unwrap();
                assert_eq!(x.to_bits(), improvement_ratio(&g).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::balance_study(10, 1, 0, "x");
        assert_eq!(spec.pairs, vec![(9, 1), (7, 3), (5, 5)]);
        let full = ExperimentSpec::balance_study(500, 500, 0, "x");
        let labels: Vec<String> = full.pairs.iter().map(|&(a, b)| column_label(a, b)).collect();
        assert_eq!(labels.join(","), "450vs50,350vs150,250vs250");
        spec.trials = 0;
        assert!(matches!(run_experiment(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn single_trial_smoke_run() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::balance_study(10, 1, 3, dir.path());
        let r = run_experiment(&spec).unwrap();
        let csv = fs::read_to_string(&r.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), "9vs1,7vs3,5vs5");
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r.manifest_path).unwrap()).unwrap();
        assert_eq!(m["seed"], 3);
        assert!(m["balance"]["expected_direction"].is_boolean());
    }

    #[test]
    fn unwritable_output_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("occupied");
        fs::write(&file, "").unwrap();
        let spec = ExperimentSpec::balance_study(10, 1, 3, file.join("sub"));
        assert!(matches!(run_experiment(&spec), Err(Error::Io(_))));
    }
}
