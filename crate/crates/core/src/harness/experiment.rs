//! Monte-Carlo experiment runner and CSV reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{cncml, fml, lsmi, rcml, smi, CovarianceEstimate, SampleSpectrum};
use crate::harness::config::{EstimatorSpec, ExperimentConfig};
use crate::harness::metrics::{estimate_sinr, sinr_db, TrueCovariance};
use crate::hermit::{sample_covariance, sqrt_factor, CMatrix, TrainingMatrix};
use crate::likelihood::{lr0_load, lr0_reference, lr0_store};
use crate::rng::{Purpose, StreamKey};
use crate::scenario::{generate_training_with_factor, jammer_covariance, steering_vector_with, CorruptionSpec};
use crate::selection::{select_kmax, select_loading, select_rank, select_rank_sigma};

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// One estimator applied to one training draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub k: usize,
    pub estimator: EstimatorSpec,
    pub rank: Option<usize>,
    pub sigma2: Option<f64>,
    pub kmax: Option<f64>,
    pub loading: Option<f64>,
    /// `10·log10` of the normalized SINR averaged over the steering grid.
    /// `None` when the estimator failed numerically.
    pub sinr_db: Option<f64>,
    pub error: Option<String>,
    /// Seconds spent selecting, estimating and scoring.
    pub wall_time: f64,
}

/// `(K, lr0)`
pub type Lr0Entry = (usize, f64);

/// Aggregate of the records of one `(K, estimator)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k: usize,
    pub estimator: EstimatorSpec,
    pub trials: usize,
    pub failures: usize,
    /// Mean of `sinr_db` over the successful trials, in trial order.
    pub mean_sinr_db: Option<f64>,
    pub mean_rank: Option<f64>,
    pub min_rank: Option<usize>,
    pub max_rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Ordered by K, then estimator, then trial.
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// Reference LR used for each K that needed one.
    pub lr0: Vec<Lr0Entry>,
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
}

fn needs_lr0(e: EstimatorSpec) -> bool {
    matches!(
        e,
        EstimatorSpec::RcmlEl | EstimatorSpec::RcmlElJoint | EstimatorSpec::CncmlEl | EstimatorSpec::LsmiEl
    )
}

/// Reference LR for `(N, K)`: from the table if present, otherwise computed
/// (and appended to the table when one is configured).
pub fn resolve_lr0(cfg: &ExperimentConfig, k: usize) -> Result<f64> {
    let n = cfg.scenario.n;
    if let Some(path) = &cfg.lr0_table_path {
        if let Some(r) = lr0_load(n, k, path)? {
            return Ok(r.lr0);
        }
    }
    if !cfg.autocompute_lr0 {
        return Err(Error::Config(format!(
            "no reference LR for N = {n}, K = {k} and automatic computation is disabled"
        )));
    }
    log::info!("computing reference LR for N = {n}, K = {k} with {} trials", cfg.lr0_trials);
    let reference = lr0_reference(n, k, cfg.lr0_trials, cfg.lr0_seed)?;
    if let Some(path) = &cfg.lr0_table_path {
        lr0_store(&reference, path)?;
    }
    Ok(reference.lr0)
}

/// Everything shared by the trials of one experiment.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    truth: TrueCovariance,
    factor: CMatrix,
    grid: Vec<Vec<Complex64>>,
    nmf_steering: Vec<Complex64>,
    corruption: Option<CorruptionSpec>,
    sigma2: f64,
    rank_init: usize,
}

struct Selected {
    est: CovarianceEstimate,
    rank: Option<usize>,
    sigma2: Option<f64>,
    kmax: Option<f64>,
    loading: Option<f64>,
}

impl Selected {
    fn plain(est: CovarianceEstimate) -> Self {
        Self {
            est,
            rank: None,
            sigma2: None,
            kmax: None,
            loading: None,
        }
    }
}

impl Setup<'_> {
    fn apply(
        &self,
        spec: EstimatorSpec,
        spectrum: &SampleSpectrum,
        z: &TrainingMatrix,
        lr0: Option<f64>,
    ) -> Result<Selected> {
        let lr0 = || lr0.ok_or_else(|| Error::Config(format!("{spec} needs a reference LR")));
        let stats = || spectrum.with_noise_power(self.sigma2);
        Ok(match spec {
            EstimatorSpec::Smi => Selected::plain(smi(spectrum)),
            EstimatorSpec::Fml => Selected {
                sigma2: Some(self.sigma2),
                ..Selected::plain(fml(&stats()?))
            },
            EstimatorSpec::RcmlFixed(r) => Selected {
                rank: Some(r),
                sigma2: Some(self.sigma2),
                ..Selected::plain(rcml(&stats()?, r)?)
            },
            EstimatorSpec::RcmlEl => {
                let stats = stats()?;
                let r = select_rank(&stats, self.rank_init, lr0()?)?.r_hat;
                Selected {
                    rank: Some(r),
                    sigma2: Some(self.sigma2),
                    ..Selected::plain(rcml(&stats, r)?)
                }
            }
            EstimatorSpec::RcmlElJoint => {
                let j = select_rank_sigma(spectrum, self.rank_init, lr0()?, z, &self.nmf_steering)?;
                let stats = spectrum.with_noise_power(j.sigma2_hat)?;
                Selected {
                    rank: Some(j.r_hat),
                    sigma2: Some(j.sigma2_hat),
                    ..Selected::plain(rcml(&stats, j.r_hat)?)
                }
            }
            EstimatorSpec::CncmlMl => {
                let stats = stats()?;
                let kmax = (spectrum.eigenvalues()[0] / self.sigma2).max(1.0);
                Selected {
                    sigma2: Some(self.sigma2),
                    kmax: Some(kmax),
                    ..Selected::plain(cncml(&stats, kmax)?)
                }
            }
            EstimatorSpec::CncmlEl => {
                let stats = stats()?;
                let kmax = select_kmax(&stats, lr0()?)?.kmax_hat;
                Selected {
                    sigma2: Some(self.sigma2),
                    kmax: Some(kmax),
                    ..Selected::plain(cncml(&stats, kmax)?)
                }
            }
            EstimatorSpec::LsmiEl => {
                let beta = select_loading(spectrum, lr0()?)?.beta;
                Selected {
                    loading: Some(beta),
                    ..Selected::plain(lsmi(spectrum, beta)?)
                }
            }
        })
    }

    fn mean_sinr_db(&self, est: &CovarianceEstimate) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.grid {
            total += estimate_sinr(est, &self.truth, s)?;
        }
        Ok(sinr_db(total / self.grid.len() as f64))
    }

    /// All estimators on the training draw of one `(K, trial)` cell.
    fn run_cell(&self, k: usize, trial: usize, lr0: Option<f64>) -> Result<Vec<TrialRecord>> {
        let mut rng = StreamKey::new(self.cfg.master_seed, trial as u64, Purpose::Training)
            .with_salt(k as u64)
            .rng();
        let training = generate_training_with_factor(&self.factor, k, self.corruption.as_ref(), &mut rng)?;
        let spectrum = SampleSpectrum::from_sample_covariance(&sample_covariance(&training.z), k)?;
        let mut out = Vec::with_capacity(self.cfg.estimators.len());
        for &spec in &self.cfg.estimators {
            let start = Instant::now();
            let outcome = self
                .apply(spec, &spectrum, &training.z, lr0)
                .and_then(|sel| self.mean_sinr_db(&sel.est).map(|db| (sel, db)));
            let wall_time = start.elapsed().as_secs_f64();
            let record = match outcome {
                Ok((sel, db)) => TrialRecord {
                    trial,
                    k,
                    estimator: spec,
                    rank: sel.rank,
                    sigma2: sel.sigma2,
                    kmax: sel.kmax,
                    loading: sel.loading,
                    sinr_db: Some(db),
                    error: None,
                    wall_time,
                },
                Err(e) if e.is_numerical() => {
                    log::warn!("K = {k}, trial {trial}, {spec}: {e}");
                    TrialRecord {
                        trial,
                        k,
                        estimator: spec,
                        rank: None,
                        sigma2: None,
                        kmax: None,
                        loading: None,
                        sinr_db: None,
                        error: Some(e.to_string()),
                        wall_time,
                    }
                }
                Err(e) => return Err(e),
            };
            out.push(record);
        }
        Ok(out)
    }
}

/// Runs every `(K, estimator, trial)` combination without writing anything.
///
/// All estimators of a `(K, trial)` cell see the same training draw, keyed by
/// `(master_seed, trial)` and salted with K. With corruption configured the
/// disturbance is the same as in the clean run of the same seed.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<(Vec<TrialRecord>, Vec<Lr0Entry>)> {
    cfg.validate()?;
    let r_true = jammer_covariance(&cfg.scenario)?;
    let factor = sqrt_factor(&r_true)?;
    let mode = cfg.scenario.angle_mode;
    let n = cfg.scenario.n;
    let angles = cfg.steering_angles();
    if angles.is_empty() {
        return Err(Error::Config("steering grid is empty".into()));
    }
    let setup = Setup {
        cfg,
        truth: TrueCovariance::new(r_true)?,
        factor,
        grid: angles.iter().map(|&a| steering_vector_with(n, a, mode)).collect(),
        nmf_steering: steering_vector_with(n, cfg.nmf_angle, mode),
        corruption: cfg.corruption.as_ref().map(|c| c.spec(&cfg.scenario)),
        sigma2: cfg.sigma2(),
        rank_init: cfg.rank_init(),
    };

    let want_lr0 = cfg.estimators.iter().any(|&e| needs_lr0(e));
    let mut lr0s = Vec::new();
    let mut records = Vec::new();
    for &k in &cfg.k_list {
        let lr0 = if want_lr0 {
            let v = resolve_lr0(cfg, k)?;
            lr0s.push((k, v));
            Some(v)
        } else {
            None
        };
        let cells = (0..cfg.trials)
            .into_par_iter()
            .map(|t| setup.run_cell(k, t, lr0))
            .collect::<Result<Vec<_>>>()?;
        for e in 0..cfg.estimators.len() {
            records.extend(cells.iter().map(|c| c[e].clone()));
        }
    }
    Ok((records, lr0s))
}

/// Per-cell aggregates, summing in trial order.
pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &k in &cfg.k_list {
        for &estimator in &cfg.estimators {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.k == k && r.estimator == estimator)
                .collect();
            let sinrs: Vec<f64> = cell.iter().filter_map(|r| r.sinr_db).collect();
            let ranks: Vec<usize> = cell.iter().filter_map(|r| r.rank).collect();
            rows.push(SummaryRow {
                k,
                estimator,
                trials: cell.len(),
                failures: cell.len() - sinrs.len(),
                mean_sinr_db: mean(&sinrs),
                mean_rank: mean(&ranks.iter().map(|&r| r as f64).collect::<Vec<_>>()),
                min_rank: ranks.iter().copied().min(),
                max_rank: ranks.iter().copied().max(),
            });
        }
    }
    rows
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Runs the experiment and writes `trials.csv` and `summary.csv` to the
/// output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let (records, lr0) = run_trials(cfg)?;
    let summary = summarize(cfg, &records);
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trials_path = dir.join(TRIALS_FILE);
    let summary_path = dir.join(SUMMARY_FILE);
    write_trials(&records, cfg.record_timing, &trials_path)?;
    write_summary(&summary, &summary_path)?;
    Ok(ExperimentOutput {
        records,
        summary,
        lr0,
        trials_path,
        summary_path,
    })
}

/// Float with 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn write_trials(records: &[TrialRecord], with_timing: bool, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "k", "estimator", "trial", "rank", "sigma2", "kmax", "loading", "sinr_db", "error",
    ];
    if with_timing {
        header.push("wall_time");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.k.to_string(),
            r.estimator.to_string(),
            r.trial.to_string(),
            opt(r.rank, |v| v.to_string()),
            opt(r.sigma2, fmt_float),
            opt(r.kmax, fmt_float),
            opt(r.loading, fmt_float),
            opt(r.sinr_db, fmt_float),
            r.error.clone().unwrap_or_default(),
        ];
        if with_timing {
            row.push(fmt_float(r.wall_time));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "k",
        "estimator",
        "trials",
        "failures",
        "mean_sinr_db",
        "mean_rank",
        "min_rank",
        "max_rank",
    ])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.estimator.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            opt(r.mean_sinr_db, fmt_float),
            opt(r.mean_rank, fmt_float),
            opt(r.min_rank, |v| v.to_string()),
            opt(r.max_rank, |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
