//! Expected-likelihood selection of estimator constraints.
//!
//! Each selector picks the constraint whose estimate has a likelihood ratio
//! closest to the reference median `lr0`. Ratios are handled as logs, so
//! candidates are compared without ever forming `lr` itself.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{cncml, rcml_profile, lsmi, SampleSpectrum, SampleStats};
use crate::harness::metrics::nmf_from_projections;
use crate::hermit::TrainingMatrix;
use crate::likelihood::{lambert_w_neg_log, log_lr, log_lr_rank_noise, log_lr_rcml, LambertBranch};

fn check_lr0(lr0: f64) -> Result<f64> {
    if !(lr0 > 0.0 && lr0 <= 1.0) {
        return Err(Error::InvalidInput(format!("reference LR must lie in (0, 1], got {lr0}")));
    }
    Ok(lr0.ln())
}

/// Orders `|lr_a − lr0|` against `|lr_b − lr0|` from log values.
///
/// On the same side of `lr0` the log values order the distances directly,
/// which keeps ratios far below `lr0` distinguishable.
pub(crate) fn cmp_distance(a: f64, b: f64, log_lr0: f64) -> Ordering {
    let (da, db) = (a - log_lr0, b - log_lr0);
    if da <= 0.0 && db <= 0.0 {
        db.total_cmp(&da)
    } else if da >= 0.0 && db >= 0.0 {
        da.total_cmp(&db)
    } else {
        da.exp_m1().abs().total_cmp(&db.exp_m1().abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    pub r_hat: usize,
    /// `(r, lr)` for every rank evaluated, in evaluation order.
    pub visited: Vec<(usize, f64)>,
    pub lr0: f64,
}

/// Stepwise rank search starting at `r_init`.
///
/// The RCML likelihood ratio is non-decreasing in `r`, so `|lr − lr0|` falls
/// and then rises and a single walk finds the global minimizer. Among tied
/// ranks the smallest is returned.
pub fn select_rank(stats: &SampleStats, r_init: usize, lr0: f64) -> Result<RankSelection> {
    select_rank_bounded(stats, r_init, lr0, stats.n())
}

/// As [`select_rank`] with the search restricted to `[0, r_max]`.
pub fn select_rank_bounded(stats: &SampleStats, r_init: usize, lr0: f64, r_max: usize) -> Result<RankSelection> {
    let log_lr0 = check_lr0(lr0)?;
    let r_max = r_max.min(stats.n());
    if r_init > r_max {
        return Err(Error::InvalidInput(format!("initial rank {r_init} outside [0, {r_max}]")));
    }
    let mut visited = Vec::new();
    let mut eval = |r: usize| -> Result<f64> {
        let l = log_lr_rcml(stats, r)?;
        visited.push((r, l.exp()));
        Ok(l)
    };
    let closer = |a: f64, b: f64| cmp_distance(a, b, log_lr0) == Ordering::Less;
    let mut r = r_init;
    let mut cur = eval(r)?;
    let up = if r < r_max { Some(eval(r + 1)?) } else { None };
    match up {
        Some(next) if closer(next, cur) => {
            r += 1;
            cur = next;
            while r < r_max {
                let next = eval(r + 1)?;
                if closer(next, cur) {
                    r += 1;
                    cur = next;
                } else {
                    break;
                }
            }
        }
        _ => {
            while r > 0 {
                let next = eval(r - 1)?;
                if !closer(cur, next) {
                    r -= 1;
                    cur = next;
                } else {
                    break;
                }
            }
        }
    }
    Ok(RankSelection { r_hat: r, visited, lr0 })
}

/// Mean of the `N − r` smallest sample eigenvalues.
pub fn sigma_ml(d: &[f64], r: usize) -> Result<f64> {
    let n = d.len();
    if r >= n {
        return Err(Error::InvalidInput(format!("noise power undefined for rank {r} with N = {n}")));
    }
    Ok(d[r..].iter().sum::<f64>() / (n - r) as f64)
}

/// Noise powers at which the rank-`r` likelihood ratio equals `lr0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRoots {
    /// 0, 1 or 2.
    pub count: usize,
    /// Ascending; when two, they bracket `sigma_ml`.
    pub roots: Vec<f64>,
    pub sigma_ml: f64,
    /// Likelihood ratio at `sigma_ml`, the maximum over `σ²`.
    pub lr_max: f64,
}

/// Closed-form roots of `lr(σ²) = lr0` for the profile `[d₁…d_r, σ²…σ²]`.
///
/// With `a = r − N`, `b = Σ_{k>r} d_k` and
/// `c = log lr0 − Σ_{k>r} log d_k + a`, the roots are
/// `σ² = exp(W(b/a · e^{−c/a}) + c/a)` on the two real branches of W.
/// The lower branch gives the smaller root.
pub fn sigma_el_roots(d: &[f64], r: usize, lr0: f64) -> Result<NoiseRoots> {
    let log_lr0 = check_lr0(lr0)?;
    let s_ml = sigma_ml(d, r)?;
    let tail = &d[r..];
    if s_ml <= 0.0 || tail.iter().any(|&x| x <= 0.0) {
        return Ok(NoiseRoots {
            count: 0,
            roots: vec![],
            sigma_ml: s_ml,
            lr_max: 0.0,
        });
    }
    let log_lr_max = log_lr_rank_noise(d, r, s_ml);
    let lr_max = log_lr_max.exp();
    let gap = (log_lr0 - log_lr_max).exp_m1();
    if gap.abs() <= 1e-10 {
        return Ok(NoiseRoots {
            count: 1,
            roots: vec![s_ml],
            sigma_ml: s_ml,
            lr_max,
        });
    }
    if gap > 0.0 {
        return Ok(NoiseRoots {
            count: 0,
            roots: vec![],
            sigma_ml: s_ml,
            lr_max,
        });
    }
    let a = r as f64 - d.len() as f64;
    let b: f64 = tail.iter().sum();
    let sum_log: f64 = tail.iter().map(|x| x.ln()).sum();
    let c = log_lr0 - sum_log + a;
    let log_mag = b.ln() - (-a).ln() - c / a;
    let lo = (lambert_w_neg_log(LambertBranch::Lower, log_mag)? + c / a).exp();
    let hi = (lambert_w_neg_log(LambertBranch::Principal, log_mag)? + c / a).exp();
    Ok(NoiseRoots {
        count: 2,
        roots: vec![lo, hi],
        sigma_ml: s_ml,
        lr_max,
    })
}

/// Which noise-power candidate the joint selector settled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseChoice {
    Ml,
    El1,
    El2,
}

impl std::fmt::Display for NoiseChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseChoice::Ml => "ML",
            NoiseChoice::El1 => "EL1",
            NoiseChoice::El2 => "EL2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSelection {
    pub r_hat: usize,
    /// Rank whose trailing eigenvalues gave the noise-power candidates.
    pub noise_rank: usize,
    pub sigma2_hat: f64,
    pub chosen_from: NoiseChoice,
    /// Outer iterations until the rank repeated.
    pub iterations: usize,
    /// Rank after each outer iteration.
    pub trajectory: Vec<usize>,
    /// `(candidate, σ², mean NMF)` for each candidate evaluated.
    pub candidates: Vec<(NoiseChoice, f64, f64)>,
}

const JOINT_MAX_ITER: usize = 50;

/// Joint rank and noise-power selection.
///
/// Alternates between the ML noise power for the current rank and a rank
/// search at that noise power until the selected rank repeats. Whenever the
/// current rank admits no EL noise power it is first raised until one does.
/// The final noise power is the candidate among ML and the EL roots at that
/// admitted rank whose RCML estimate gives the smallest mean NMF statistic
/// over the training columns.
pub fn select_rank_sigma(
    spectrum: &SampleSpectrum,
    r_init: usize,
    lr0: f64,
    training: &TrainingMatrix,
    steering: &[Complex64],
) -> Result<JointSelection> {
    check_lr0(lr0)?;
    let n = spectrum.n();
    if n < 2 {
        return Err(Error::InvalidInput("joint selection needs N >= 2".into()));
    }
    if training.n() != n || steering.len() != n {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: spectrum {n}, training {}, steering {}",
            training.n(),
            steering.len()
        )));
    }
    if r_init > n {
        return Err(Error::InvalidInput(format!("initial rank {r_init} outside [0, {n}]")));
    }
    let d = spectrum.eigenvalues();
    let r_top = n - 1;
    let mut r = r_init.min(r_top);
    let mut trajectory: Vec<usize> = Vec::new();
    let mut iterations = 0;
    // `admitted` is the smallest rank at or above `r` with an EL root; the
    // noise power comes from it and the rank search starts there.
    let (r_hat, admitted) = loop {
        if iterations == JOINT_MAX_ITER {
            return Err(Error::Convergence {
                iterations,
                trajectory,
            });
        }
        iterations += 1;
        let mut admitted = r;
        while sigma_el_roots(d, admitted, lr0)?.count == 0 {
            if admitted == r_top {
                return Err(Error::NoRoot(format!("no noise power matches lr0 = {lr0} at any rank")));
            }
            admitted += 1;
        }
        let stats = spectrum.with_noise_power(sigma_ml(d, admitted)?)?;
        let next = select_rank_bounded(&stats, admitted, lr0, r_top)?.r_hat;
        let repeated = trajectory.last() == Some(&next);
        trajectory.push(next);
        if next == admitted || repeated {
            break (next, admitted);
        }
        r = next;
    };

    let roots = sigma_el_roots(d, admitted, lr0)?;
    let mut options = vec![(NoiseChoice::Ml, roots.sigma_ml)];
    if roots.count == 2 {
        options.push((NoiseChoice::El1, roots.roots[0]));
        options.push((NoiseChoice::El2, roots.roots[1]));
    }
    let basis = &spectrum.eigen().eigenvectors;
    let s_proj = basis.adjoint_matvec(steering);
    // All-zero snapshots have no defined NMF value and are left out.
    let z_proj: Vec<Vec<Complex64>> = training
        .columns()
        .filter(|z| z.iter().any(|x| x.norm_sqr() > 0.0))
        .map(|z| basis.adjoint_matvec(&z))
        .collect();
    if z_proj.is_empty() {
        return Err(Error::InvalidInput("training has no nonzero snapshot".into()));
    }
    let mut candidates = Vec::with_capacity(options.len());
    for (tag, s2) in options {
        let lambdas = rcml_profile(d, s2, r_hat)?;
        let score = z_proj
            .iter()
            .map(|z| nmf_from_projections(&lambdas, &s_proj, z))
            .sum::<f64>()
            / z_proj.len() as f64;
        candidates.push((tag, s2, score));
    }
    let best = candidates
        .iter()
        .copied()
        .fold(None::<(NoiseChoice, f64, f64)>, |acc, c| match acc {
            Some(a) if a.2 <= c.2 => Some(a),
            _ => Some(c),
        })
        .expect("at least the ML candidate");
    Ok(JointSelection {
        r_hat,
        noise_rank: admitted,
        sigma2_hat: best.1,
        chosen_from: best.0,
        iterations,
        trajectory,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmaxSelection {
    pub kmax_hat: f64,
    /// `(K_max, lr)` for every bound evaluated, in evaluation order.
    pub visited: Vec<(f64, f64)>,
    /// Step size when the search stopped.
    pub final_step: f64,
    /// True when the estimate does not depend on the bound at `kmax_hat`.
    pub inactive: bool,
}

const KMAX_MIN_STEP: f64 = 1e-4;

/// `log lr` of the CNCML estimate with bound `kmax`.
pub fn log_lr_cncml(stats: &SampleStats, kmax: f64) -> Result<f64> {
    log_lr(&cncml(stats, kmax)?.lambdas, stats.eigenvalues())
}

/// Condition-number bound search.
///
/// Starts from the ML bound `max(d₁/σ², 1)` with step `K/100`, walks while
/// `|lr − lr0|` improves, then reverses and divides the step by ten, until
/// the step drops below `1e-4`.
pub fn select_kmax(stats: &SampleStats, lr0: f64) -> Result<KmaxSelection> {
    let log_lr0 = check_lr0(lr0)?;
    let d1 = stats.eigenvalues()[0] / stats.sigma2();
    let mut k = d1.max(1.0);
    let mut visited = Vec::new();
    let mut eval = |k: f64| -> Result<f64> {
        let l = log_lr_cncml(stats, k)?;
        visited.push((k, l.exp()));
        Ok(l)
    };
    let closer = |a: f64, b: f64| cmp_distance(a, b, log_lr0) == Ordering::Less;
    let mut cur = eval(k)?;
    let mut delta = k / 100.0;
    while delta.abs() >= KMAX_MIN_STEP {
        let mut dir = None;
        for step in [delta, -delta] {
            let cand = (k + step).max(1.0);
            if cand == k {
                continue;
            }
            let v = eval(cand)?;
            if closer(v, cur) {
                k = cand;
                cur = v;
                dir = Some(step);
                break;
            }
        }
        if let Some(step) = dir {
            loop {
                let cand = (k + step).max(1.0);
                if cand == k {
                    break;
                }
                let v = eval(cand)?;
                if closer(v, cur) {
                    k = cand;
                    cur = v;
                } else {
                    break;
                }
            }
            delta = -step / 10.0;
        } else {
            delta = -delta / 10.0;
        }
    }
    Ok(KmaxSelection {
        kmax_hat: k,
        visited,
        final_step: delta,
        inactive: d1 <= k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingSelection {
    pub beta: f64,
    pub lr: f64,
    pub iterations: usize,
}

/// Diagonal loading `β` with `lr(βI + S) = lr0`.
///
/// The ratio falls from 1 at `β = 0` towards 0 as `β` grows. The bracket is
/// grown geometrically and then bisected.
pub fn select_loading(spectrum: &SampleSpectrum, lr0: f64) -> Result<LoadingSelection> {
    let log_lr0 = check_lr0(lr0)?;
    if lr0 >= 1.0 {
        return Err(Error::InvalidInput("loading selection needs lr0 < 1".into()));
    }
    let d = spectrum.eigenvalues();
    if d.iter().any(|&x| x <= 0.0) {
        return Err(Error::NoRoot("sample covariance is singular; lr is 0 for every loading".into()));
    }
    let f = |beta: f64| -> Result<f64> { Ok(log_lr(&lsmi(spectrum, beta)?.lambdas, d)? - log_lr0) };
    let scale = d.iter().sum::<f64>() / d.len() as f64;
    let mut lo = 0.0;
    let mut hi = 1e-6 * scale;
    let mut expansions = 0;
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::NoRoot(format!("no loading reaches lr0 = {lr0}")));
        }
    }
    let mut iterations = 0;
    let mut beta = hi;
    let mut val = f(hi)?;
    while val.exp_m1().abs() > 1e-10 && iterations < 400 {
        iterations += 1;
        beta = 0.5 * (lo + hi);
        if beta <= lo || beta >= hi {
            break;
        }
        val = f(beta)?;
        if val > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    let lr = (val + log_lr0).exp();
    if (lr - lr0).abs() > 1e-8 {
        return Err(Error::NoRoot(format!("bisection stalled at β = {beta:e} with lr = {lr:e}")));
    }
    Ok(LoadingSelection { beta, lr, iterations })
}
