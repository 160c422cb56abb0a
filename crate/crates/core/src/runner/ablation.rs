use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::metrics::write_csv;
use super::trainer::{run, RunSummary};

/// Component combinations compared in the ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Pebble,
    PebbleSsl,
    PebbleTc,
    Surf,
    PebbleRas,
    PebbleGn,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Pebble,
        Variant::PebbleSsl,
        Variant::PebbleTc,
        Variant::Surf,
        Variant::PebbleRas,
        Variant::PebbleGn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Pebble => "PEBBLE",
            Variant::PebbleSsl => "PEBBLE+SSL",
            Variant::PebbleTc => "PEBBLE+TC",
            Variant::Surf => "PEBBLE+SSL+TC",
            Variant::PebbleRas => "PEBBLE+RAS",
            Variant::PebbleGn => "PEBBLE+GN",
        }
    }

    /// `(ssl, tda, ras, gn)`
    pub fn flags(self) -> (bool, bool, bool, bool) {
        match self {
            Variant::Pebble => (false, false, false, false),
            Variant::PebbleSsl => (true, false, false, false),
            Variant::PebbleTc => (false, true, false, false),
            Variant::Surf => (true, true, false, false),
            Variant::PebbleRas => (false, false, true, false),
            Variant::PebbleGn => (false, false, false, true),
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig) {
        (cfg.ssl_on, cfg.tda_on, cfg.ras_on, cfg.gn_on) = self.flags();
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '_'], "+");
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == norm || (norm == "SURF" && *v == Variant::Surf))
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

/// Hyperparameter swept with the other two at their configured values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Mu,
    Tau,
    Lambda,
}

impl SweepParam {
    pub fn grid(self) -> &'static [f64] {
        match self {
            SweepParam::Mu => &[1.0, 2.0, 4.0, 7.0],
            SweepParam::Tau => &[0.95, 0.97, 0.99, 0.999],
            SweepParam::Lambda => &[0.1, 0.5, 1.0, 2.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Mu => "mu",
            SweepParam::Tau => "tau",
            SweepParam::Lambda => "lambda",
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParam::Mu => cfg.ssl.mu = value as usize,
            SweepParam::Tau => cfg.ssl.tau = value,
            SweepParam::Lambda => cfg.ssl.lambda = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mu" => Ok(SweepParam::Mu),
            "tau" => Ok(SweepParam::Tau),
            "lambda" => Ok(SweepParam::Lambda),
            other => Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub seeds: Vec<u64>,
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub heldout_accuracy: Option<f64>,
}

impl AblationRow {
    fn from_runs(label: String, seeds: &[u64], runs: &[RunSummary]) -> Self {
        let returns: Vec<f64> = runs.iter().map(|r| r.final_return).collect();
        let (mean, std) = mean_std(&returns);
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.heldout_accuracy).collect();
        AblationRow {
            label,
            seeds: seeds.to_vec(),
            mean,
            std,
            returns,
            heldout_accuracy: (!accs.is_empty()).then(|| mean_std(&accs).0),
        }
    }
}

fn run_seeds(
    base: &ExperimentConfig,
    seeds: &[u64],
    tweak: impl Fn(&mut ExperimentConfig),
    mut progress: impl FnMut(u64, &RunSummary),
) -> Result<Vec<RunSummary>> {
    seeds
        .iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.out_dir = None;
            tweak(&mut cfg);
            let summary = run(cfg)?;
            progress(seed, &summary);
            Ok(summary)
        })
        .collect()
}

/// Runs every variant over the same seeds.
pub fn run_ablation(
    base: &ExperimentConfig,
    variants: &[Variant],
    seeds: &[u64],
    mut progress: impl FnMut(&str, u64, &RunSummary),
) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|&v| {
            let runs = run_seeds(base, seeds, |c| v.apply(c), |s, r| progress(v.label(), s, r))?;
            Ok(AblationRow::from_runs(v.label().to_string(), seeds, &runs))
        })
        .collect()
}

/// Full method with one hyperparameter varied over its grid.
pub fn run_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    seeds: &[u64],
    mut progress: impl FnMut(&str, u64, &RunSummary),
) -> Result<Vec<AblationRow>> {
    param
        .grid()
        .iter()
        .map(|&value| {
            let label = format!("{}={}", param.name(), value);
            let runs = run_seeds(
                base,
                seeds,
                |c| {
                    Variant::Surf.apply(c);
                    param.apply(c, value);
                },
                |s, r| progress(&label, s, r),
            )?;
            Ok(AblationRow::from_runs(label, seeds, &runs))
        })
        .collect()
}

pub fn format_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{:<width$}  {:>20}  {:>8}\n", "variant", "return (mean ± std)", "heldout");
    for r in rows {
        let acc = r.heldout_accuracy.map_or("-".to_string(), |a| format!("{a:.3}"));
        out += &format!("{:<width$}  {:>9.2} ± {:<8.2}  {:>8}\n", r.label, r.mean, r.std, acc);
    }
    out
}

pub fn write_table_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.seeds.len().to_string(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.std),
                r.heldout_accuracy.map_or(String::new(), |a| format!("{a:.6}")),
                r.returns.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    write_csv(path, &["variant", "seeds", "mean_return", "std_return", "heldout_accuracy", "returns"], &body)
}
