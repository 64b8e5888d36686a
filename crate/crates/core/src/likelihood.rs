//! Likelihood ratios, the reference median LR₀ and the real Lambert W.
//!
//! The likelihood ratio of an estimate with eigenvalues `λ` against a sample
//! covariance with eigenvalues `d` on the same basis is
//! `lr = ∏ (dᵢ/λᵢ) · e^N / exp(Σ dᵢ/λᵢ)`. It lies in `(0, 1]` and reaches 1
//! only at `λ = d`. Everything is computed as `log lr`, since the ratio
//! underflows for large `N`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::SampleStats;
use crate::hermit::{sample_covariance, sample_training, CMatrix, TrainingMatrix};
use crate::rng::{Purpose, StreamKey};

/// `log lr` for estimate eigenvalues `lambdas` against sample eigenvalues `d`.
pub fn log_lr(lambdas: &[f64], d: &[f64]) -> Result<f64> {
    if lambdas.len() != d.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} estimate eigenvalues, {} sample eigenvalues",
            lambdas.len(),
            d.len()
        )));
    }
    let mut acc = 0.0;
    for (&l, &x) in lambdas.iter().zip(d) {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("estimate eigenvalue must be positive, got {l}")));
        }
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidInput(format!("sample eigenvalue must be non-negative, got {x}")));
        }
        acc += log_ratio_term(x / l);
    }
    Ok(acc)
}

pub fn lr_value(lambdas: &[f64], d: &[f64]) -> Result<f64> {
    log_lr(lambdas, d).map(f64::exp)
}

/// `log ρ − ρ + 1`, the contribution of one eigenvalue ratio. Never positive.
#[inline]
pub(crate) fn log_ratio_term(rho: f64) -> f64 {
    if rho == 1.0 {
        0.0
    } else {
        rho.ln() - rho + 1.0
    }
}

/// `log lr` of the rank-`r` RCML estimate, without building the estimate.
pub fn log_lr_rcml(stats: &SampleStats, r: usize) -> Result<f64> {
    let d = stats.eigenvalues();
    if r > d.len() {
        return Err(Error::InvalidInput(format!("rank {r} exceeds dimension {}", d.len())));
    }
    let s2 = stats.sigma2();
    Ok(d.iter()
        .enumerate()
        .filter(|&(i, &x)| i >= r || x < s2)
        .map(|(_, &x)| log_ratio_term(x / s2))
        .sum())
}

pub fn lr_rcml(stats: &SampleStats, r: usize) -> Result<f64> {
    log_lr_rcml(stats, r).map(f64::exp)
}

/// `log lr` for the profile `[d₁ … d_r, σ² … σ²]` with no clipping of the
/// leading part. This is the form whose roots in `σ²` have a closed form.
pub fn log_lr_rank_noise(d: &[f64], r: usize, sigma2: f64) -> f64 {
    d[r.min(d.len())..].iter().map(|&x| log_ratio_term(x / sigma2)).sum()
}

/// Median likelihood ratio of the true covariance for a given `(N, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LRReference {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub lr0: f64,
    /// `(probability, value)` pairs, increasing in probability.
    pub quantiles: Vec<(f64, f64)>,
}

pub const REFERENCE_PROBABILITIES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

impl LRReference {
    pub fn log_lr0(&self) -> f64 {
        self.lr0.ln()
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Stream key of one reference trial; distinct `(n, k)` cells never share draws.
fn reference_key(n: usize, k: usize, seed: u64, trial: usize) -> StreamKey {
    StreamKey::new(seed, trial as u64, Purpose::Reference).with_salt(((n as u64) << 32) | k as u64)
}

/// Monte-Carlo estimate of LR₀ with the true covariance taken as identity.
///
/// Each trial draws `Z` (N×K), forms `S = ZZᴴ/K` and records
/// `lr = |S| e^N / exp(tr S)`.
pub fn lr0_reference(n: usize, k: usize, trials: usize, seed: u64) -> Result<LRReference> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 trials, got {trials}")));
    }
    if k < n {
        log::warn!("K = {k} < N = {n}: the sample covariance is singular and every LR is 0");
        return Err(Error::InvalidInput(format!("sample count {k} below dimension {n}")));
    }
    if trials < 1000 {
        log::warn!("only {trials} trials for the LR reference; 1000 or more recommended");
    }
    let identity = CMatrix::identity(n);
    let mut values = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = reference_key(n, k, seed, t).rng();
            let z = sample_training(&identity, k, &mut rng);
            reference_trial_log_lr(&z?).map(f64::exp)
        })
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let quantiles: Vec<(f64, f64)> = REFERENCE_PROBABILITIES
        .iter()
        .map(|&p| (p, quantile_sorted(&values, p)))
        .collect();
    let lr0 = quantile_sorted(&values, 0.5);
    if !(lr0 > 0.0) {
        return Err(Error::Model(format!("reference LR underflowed for N = {n}, K = {k}")));
    }
    Ok(LRReference {
        n,
        k,
        trials,
        seed,
        lr0,
        quantiles,
    })
}

fn reference_trial_log_lr(z: &TrainingMatrix) -> Result<f64> {
    let s = sample_covariance(z);
    Ok(s.log_det()? + s.n() as f64 - s.trace())
}

const TABLE_HEADER: &str = "LR0TABLE v1";

/// Appends `reference` to the table at `path`, creating it if needed.
pub fn lr0_store(reference: &LRReference, path: &Path) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    if fresh {
        line.push_str(TABLE_HEADER);
        line.push('\n');
    }
    line.push_str(&format!(
        "{} {} {} {} {:e}",
        reference.n, reference.k, reference.trials, reference.seed, reference.lr0
    ));
    for p in REFERENCE_PROBABILITIES {
        match reference.quantiles.iter().find(|(q, _)| *q == p) {
            Some((_, v)) => line.push_str(&format!(" {v:e}")),
            None => line.push_str(" -"),
        }
    }
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

/// All records in a table file, in file order.
pub fn lr0_read_table(path: &Path) -> Result<Vec<LRReference>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if lineno == 1 {
            if line != TABLE_HEADER {
                return Err(Error::format(path, 1, format!("expected header \"{TABLE_HEADER}\"")));
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_record(line).map_err(|msg| Error::format(path, lineno, msg))?);
    }
    Ok(out)
}

fn parse_record(line: &str) -> std::result::Result<LRReference, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 10 {
        return Err(format!("expected 10 fields, found {}", fields.len()));
    }
    let int = |i: usize, name: &str| -> std::result::Result<u64, String> {
        fields[i].parse::<u64>().map_err(|_| format!("bad {name} \"{}\"", fields[i]))
    };
    let float = |i: usize, name: &str| -> std::result::Result<f64, String> {
        fields[i].parse::<f64>().map_err(|_| format!("bad {name} \"{}\"", fields[i]))
    };
    let lr0 = float(4, "lr0")?;
    if !(lr0 > 0.0 && lr0 <= 1.0) {
        return Err(format!("lr0 {lr0} outside (0, 1]"));
    }
    let mut quantiles = Vec::new();
    for (j, p) in REFERENCE_PROBABILITIES.iter().enumerate() {
        if fields[5 + j] != "-" {
            quantiles.push((*p, float(5 + j, "quantile")?));
        }
    }
    if quantiles.windows(2).any(|w| w[0].1 > w[1].1) {
        return Err("quantiles decrease with probability".into());
    }
    Ok(LRReference {
        n: int(0, "n")? as usize,
        k: int(1, "k")? as usize,
        trials: int(2, "trials")? as usize,
        seed: int(3, "seed")?,
        lr0,
        quantiles,
    })
}

/// Looks up `(n, k)` in the table. A missing file or key gives `Ok(None)`.
/// If the key appears more than once the last record wins.
pub fn lr0_load(n: usize, k: usize, path: &Path) -> Result<Option<LRReference>> {
    if !path.exists() {
        return Ok(None);
    }
    let matches: Vec<LRReference> = lr0_read_table(path)?
        .into_iter()
        .filter(|r| r.n == n && r.k == k)
        .collect();
    if matches.len() > 1 {
        log::warn!(
            "{}: {} records for N = {n}, K = {k}; using the last one",
            path.display(),
            matches.len()
        );
    }
    Ok(matches.into_iter().last())
}

/// Real branches of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambertBranch {
    /// `W₀`, defined on `[−1/e, ∞)` with `W₀ ≥ −1`.
    Principal,
    /// `W₋₁`, defined on `[−1/e, 0)` with `W₋₁ ≤ −1`.
    Lower,
}

impl LambertBranch {
    fn name(self) -> &'static str {
        match self {
            LambertBranch::Principal => "principal",
            LambertBranch::Lower => "lower",
        }
    }
}

// 1/e split into a double and its rounding error.
const INV_E_HI: f64 = 0.36787944117144233;
const INV_E_LO: f64 = -1.2428753672788363e-17;
const MAX_ITER: usize = 50;

/// Solves `W·e^W = z` on the requested real branch.
pub fn lambert_w(branch: LambertBranch, z: f64) -> Result<f64> {
    let domain = || Error::Domain {
        function: "lambert_w",
        branch: branch.name(),
        arg: z,
    };
    if z.is_nan() {
        return Err(domain());
    }
    if z >= 0.0 {
        return match branch {
            LambertBranch::Principal if z.is_finite() => Ok(principal_nonnegative(z)),
            _ => Err(domain()),
        };
    }
    // distance to the branch point, e·(z + 1/e), kept accurate near 0
    let mut q = std::f64::consts::E * ((z + INV_E_HI) + INV_E_LO);
    if q < 0.0 {
        if q < -4.0 * f64::EPSILON {
            return Err(domain());
        }
        q = 0.0;
    }
    // log(−e·z) = log(1 − q); away from the branch point take it from z directly
    let t = if q < 0.5 { (-q).ln_1p() } else { (-z).ln() + 1.0 };
    Ok(negative_branch(branch, t, q))
}

/// `W(z)` for `z = −exp(log_mag)`, taking the magnitude in log form so that
/// arguments far below the double range still resolve on the lower branch.
pub(crate) fn lambert_w_neg_log(branch: LambertBranch, log_mag: f64) -> Result<f64> {
    let t = log_mag + 1.0;
    if t.is_nan() || t > 4.0 * f64::EPSILON {
        return Err(Error::Domain {
            function: "lambert_w",
            branch: branch.name(),
            arg: -log_mag.exp(),
        });
    }
    let t = t.min(0.0);
    Ok(negative_branch(branch, t, -t.exp_m1()))
}

fn principal_nonnegative(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if z <= std::f64::consts::E {
        let l = z.ln_1p();
        halley_direct(l * (1.0 - l / (2.0 + l)), z)
    } else {
        // log form: w + ln w = ln z
        let lz = z.ln();
        let l2 = lz.ln();
        let w = lz - l2 + l2 / lz;
        halley_log_form(w.max(1.0), lz, false)
    }
}

/// Halley iteration on `g(w) = w + ln|w| − target`.
fn halley_log_form(mut w: f64, target: f64, negative: bool) -> f64 {
    for _ in 0..MAX_ITER {
        let lw = if negative { (-w).ln() } else { w.ln() };
        let g = w + lw - target;
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
        let next = w - step;
        // stay on the correct side of the branch point
        w = if negative {
            if w > -1.0 {
                next.clamp(-1.0, -f64::MIN_POSITIVE)
            } else {
                next.min(-1.0)
            }
        } else {
            next
        };
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    w
}

/// Negative-argument branches. `t = log(−e·z) ≤ 0` and `q = 1 − e^t`.
fn negative_branch(branch: LambertBranch, t: f64, q: f64) -> f64 {
    let lower = branch == LambertBranch::Lower;
    if q < 0.25 {
        // Near the branch point, work with ε = w + 1 to keep digits.
        let p = (2.0 * q).sqrt();
        let p = if lower { -p } else { p };
        let mut eps =
            p - p * p / 3.0 + 11.0 / 72.0 * p.powi(3) - 43.0 / 540.0 * p.powi(4) + 769.0 / 17280.0 * p.powi(5)
                - 221.0 / 8505.0 * p.powi(6);
        if q == 0.0 {
            return -1.0;
        }
        for _ in 0..MAX_ITER {
            // g(ε) = ε + ln(1 − ε) − t
            let g = eps + (-eps).ln_1p() - t;
            let g1 = -eps / (1.0 - eps);
            let g2 = -1.0 / ((1.0 - eps) * (1.0 - eps));
            if g1 == 0.0 {
                break;
            }
            let step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
            let next = eps - step;
            let next = if lower { next.min(0.0) } else { next.clamp(0.0, 1.0) };
            let moved = (next - eps).abs();
            eps = next;
            if moved <= 4.0 * f64::EPSILON * eps.abs() {
                break;
            }
        }
        return eps - 1.0;
    }
    let target = t - 1.0;
    if lower {
        let l2 = (-target).ln();
        let w0 = target - l2 + l2 / target;
        halley_log_form(w0.min(-1.0 - 1e-3), target, true)
    } else {
        let z = -target.exp();
        halley_direct(z * (1.0 - z), z)
    }
}

/// Halley iteration on `w·e^w − z`.
fn halley_direct(mut w: f64, z: f64) -> f64 {
    if z == 0.0 {
        return z;
    }
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    w
}
