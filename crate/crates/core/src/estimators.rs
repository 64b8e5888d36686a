//! Covariance estimators as eigenvalue maps on the sample-covariance basis.
//!
//! SMI keeps the sample eigenvalues, FML clips them at the noise floor,
//! RCML keeps the top `r` (clipped) and floors the rest, and CNCML bounds the
//! condition number by `K_max` through a scalar parameter `u`. All of them
//! share the eigenvectors of `S`, so an estimate is just a new eigenvalue
//! vector plus a handle on that basis.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermit::{apply_spectral, eig_hermitian, CMatrix, EigenDecomposition, HermitianMatrix, PSD_TOL};

/// Eigendecomposition of a sample covariance together with its sample count.
#[derive(Debug, Clone)]
pub struct SampleSpectrum {
    k: usize,
    eig: Arc<EigenDecomposition>,
}

impl SampleSpectrum {
    pub fn from_sample_covariance(s: &HermitianMatrix, k: usize) -> Result<Self> {
        Self::from_eigen(eig_hermitian(s)?, k)
    }

    /// Rounding-level negative eigenvalues (down to `-1e-10 · d₁`) are set to 0.
    pub fn from_eigen(mut eig: EigenDecomposition, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        if eig.n() == 0 {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        let top = eig.eigenvalues[0].max(0.0);
        for d in eig.eigenvalues.iter_mut() {
            if !d.is_finite() {
                return Err(Error::InvalidInput("non-finite sample eigenvalue".into()));
            }
            if *d < 0.0 {
                if *d < -PSD_TOL * top {
                    return Err(Error::NotPsd { min_eig: *d, max_eig: top });
                }
                *d = 0.0;
            }
        }
        if eig.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("sample eigenvalues must be sorted descending".into()));
        }
        Ok(Self { k, eig: Arc::new(eig) })
    }

    /// A spectrum on the standard basis, for working with eigenvalues alone.
    pub fn from_eigenvalues(values: Vec<f64>, k: usize) -> Result<Self> {
        let n = values.len();
        Self::from_eigen(
            EigenDecomposition {
                eigenvalues: values,
                eigenvectors: CMatrix::identity(n),
            },
            k,
        )
    }

    pub fn n(&self) -> usize {
        self.eig.n()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sample eigenvalues `d₁ ≥ … ≥ d_N ≥ 0`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    pub fn eigen(&self) -> &Arc<EigenDecomposition> {
        &self.eig
    }

    pub fn with_noise_power(&self, sigma2: f64) -> Result<SampleStats> {
        SampleStats::new(self.clone(), sigma2)
    }
}

/// A sample spectrum with a noise power `σ²`.
#[derive(Debug, Clone)]
pub struct SampleStats {
    spectrum: SampleSpectrum,
    sigma2: f64,
}

impl SampleStats {
    pub fn new(spectrum: SampleSpectrum, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {sigma2}")));
        }
        Ok(Self { spectrum, sigma2 })
    }

    pub fn from_eigenvalues(values: Vec<f64>, k: usize, sigma2: f64) -> Result<Self> {
        Self::new(SampleSpectrum::from_eigenvalues(values, k)?, sigma2)
    }

    pub fn spectrum(&self) -> &SampleSpectrum {
        &self.spectrum
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    pub fn k(&self) -> usize {
        self.spectrum.k()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    /// Eigenvalues normalized by the noise power, `d̄ᵢ = dᵢ / σ²`.
    pub fn normalized(&self) -> Vec<f64> {
        self.eigenvalues().iter().map(|d| d / self.sigma2).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Smi,
    Fml,
    Rcml,
    Cncml,
    Lsmi,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Smi => "SMI",
            EstimatorKind::Fml => "FML",
            EstimatorKind::Rcml => "RCML",
            EstimatorKind::Cncml => "CNCML",
            EstimatorKind::Lsmi => "LSMI",
        })
    }
}

/// The constraint values an estimate was built with.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Constraints {
    pub rank: Option<usize>,
    pub sigma2: Option<f64>,
    pub kmax: Option<f64>,
    pub loading: Option<f64>,
}

/// An estimate `R̂ = V · diag(λ) · Vᴴ` on the sample eigenbasis `V`.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub lambdas: Vec<f64>,
    pub kind: EstimatorKind,
    pub constraints: Constraints,
    basis: Arc<EigenDecomposition>,
}

impl CovarianceEstimate {
    fn new(spectrum: &SampleSpectrum, lambdas: Vec<f64>, kind: EstimatorKind, constraints: Constraints) -> Self {
        Self {
            lambdas,
            kind,
            constraints,
            basis: Arc::clone(spectrum.eigen()),
        }
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis.eigenvectors
    }

    pub fn to_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_eigen(&self.basis.eigenvectors, &self.lambdas)
    }

    /// `R̂⁻¹ x`
    pub fn solve(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let min = self.lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Singular(min));
        }
        let inv: Vec<f64> = self.lambdas.iter().map(|l| 1.0 / l).collect();
        Ok(apply_spectral(&self.basis.eigenvectors, &inv, x))
    }
}

pub fn smi(spectrum: &SampleSpectrum) -> CovarianceEstimate {
    CovarianceEstimate::new(
        spectrum,
        spectrum.eigenvalues().to_vec(),
        EstimatorKind::Smi,
        Constraints::default(),
    )
}

/// Eigenvalue clipping at the noise floor: `λᵢ = max(dᵢ, σ²)`.
pub fn fml(stats: &SampleStats) -> CovarianceEstimate {
    let s2 = stats.sigma2();
    let d = stats.eigenvalues();
    let lambdas = d.iter().map(|&x| x.max(s2)).collect();
    let rank = d.iter().filter(|&&x| x > s2).count();
    CovarianceEstimate::new(
        stats.spectrum(),
        lambdas,
        EstimatorKind::Fml,
        Constraints {
            rank: Some(rank),
            sigma2: Some(s2),
            ..Default::default()
        },
    )
}

/// Rank-constrained ML: `λᵢ = max(dᵢ, σ²)` for the first `r`, `σ²` after.
pub fn rcml(stats: &SampleStats, r: usize) -> Result<CovarianceEstimate> {
    let lambdas = rcml_profile(stats.eigenvalues(), stats.sigma2(), r)?;
    Ok(CovarianceEstimate::new(
        stats.spectrum(),
        lambdas,
        EstimatorKind::Rcml,
        Constraints {
            rank: Some(r),
            sigma2: Some(stats.sigma2()),
            ..Default::default()
        },
    ))
}

pub(crate) fn rcml_profile(d: &[f64], sigma2: f64, r: usize) -> Result<Vec<f64>> {
    if r > d.len() {
        return Err(Error::InvalidInput(format!("rank {r} exceeds dimension {}", d.len())));
    }
    Ok(d.iter()
        .enumerate()
        .map(|(i, &x)| if i < r { x.max(sigma2) } else { sigma2 })
        .collect())
}

/// Diagonal loading `R̂ = βI + S`.
pub fn lsmi(spectrum: &SampleSpectrum, beta: f64) -> Result<CovarianceEstimate> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("loading must be non-negative, got {beta}")));
    }
    let lambdas = spectrum.eigenvalues().iter().map(|d| d + beta).collect();
    Ok(CovarianceEstimate::new(
        spectrum,
        lambdas,
        EstimatorKind::Lsmi,
        Constraints {
            loading: Some(beta),
            ..Default::default()
        },
    ))
}

/// Which closed form of the condition-number-constrained estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CnCase {
    /// `d₁ ≤ σ²`: the estimate is `σ²I`.
    ScaledIdentity,
    /// `d₁ ≤ σ²K_max`: the constraint is inactive and the estimate is FML.
    FmlEquivalent,
    /// `u* = 1/K_max`: top eigenvalues pinned at `σ²K_max`.
    CaseBoundaryU,
    /// `1/d̄₁ < u* < 1/K_max`: top at `σ²/u*`, bottom at `σ²/(u*K_max)`.
    CaseInteriorU,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnCaseResult {
    pub case_id: CnCase,
    pub u_star: f64,
    /// Number of eigenvalues pinned at the top value.
    pub p: usize,
    /// Index after the last sample eigenvalue kept unchanged.
    pub q: usize,
    /// Number of normalized sample eigenvalues `≥ 1`.
    pub nbar: usize,
}

/// `Σᵢ Gᵢ(u)`, the profile objective minimized over `u ∈ (0, 1]`.
///
/// `dbar` are the normalized sample eigenvalues. Each term is
/// `-log xᵢ + d̄ᵢ xᵢ` at the optimal `xᵢ` for that `u`, written piecewise.
pub fn cn_objective(dbar: &[f64], kmax: f64, u: f64) -> f64 {
    let lk = kmax.ln();
    dbar.iter()
        .map(|&d| {
            if d <= 1.0 {
                if u <= 1.0 / kmax {
                    -lk - u.ln() + kmax * d * u
                } else {
                    d
                }
            } else if u <= 1.0 / (kmax * d) {
                -lk - u.ln() + kmax * d * u
            } else if u <= 1.0 / d {
                d.ln() + 1.0
            } else {
                -u.ln() + d * u
            }
        })
        .sum()
}

/// `Σᵢ Gᵢ'(u)`; continuous and non-decreasing on `(0, 1/K_max)`.
pub fn cn_objective_derivative(dbar: &[f64], kmax: f64, u: f64) -> f64 {
    dbar.iter()
        .map(|&d| {
            if d <= 1.0 {
                if u < 1.0 / kmax {
                    -1.0 / u + kmax * d
                } else {
                    0.0
                }
            } else if u <= 1.0 / (kmax * d) {
                -1.0 / u + kmax * d
            } else if u <= 1.0 / d {
                0.0
            } else {
                -1.0 / u + d
            }
        })
        .sum()
}

fn check_kmax(kmax: f64) -> Result<()> {
    if !(kmax >= 1.0 && kmax.is_finite()) {
        return Err(Error::InvalidInput(format!("condition bound must be >= 1, got {kmax}")));
    }
    Ok(())
}

/// Minimizer `u*` of the profile objective and the case it falls into.
pub fn cncml_u_star(stats: &SampleStats, kmax: f64) -> Result<CnCaseResult> {
    check_kmax(kmax)?;
    let dbar = stats.normalized();
    let d1 = dbar[0];
    let nbar = dbar.iter().filter(|&&d| d >= 1.0).count();

    if d1 <= 1.0 {
        return Ok(CnCaseResult {
            case_id: CnCase::ScaledIdentity,
            u_star: 1.0 / kmax,
            p: 0,
            q: 0,
            nbar,
        });
    }
    let fml_like = CnCaseResult {
        case_id: CnCase::FmlEquivalent,
        u_star: 1.0 / d1,
        p: 0,
        q: nbar,
        nbar,
    };
    if d1 <= kmax {
        return Ok(fml_like);
    }

    let p = dbar.iter().filter(|&&d| d > kmax).count();
    let top: f64 = dbar[..p].iter().sum();
    let below: f64 = dbar[nbar..].iter().map(|d| d - 1.0).sum();
    let threshold = top / (p as f64 - below);
    if kmax >= threshold {
        return Ok(CnCaseResult {
            case_id: CnCase::CaseBoundaryU,
            u_star: 1.0 / kmax,
            p,
            q: nbar,
            nbar,
        });
    }

    let mut lo = 1.0 / d1;
    let mut hi = 1.0 / kmax;
    if cn_objective_derivative(&dbar, kmax, lo) >= 0.0 {
        // Every eigenvalue lies within a factor K_max of d₁ and above the
        // floor, so S itself already satisfies the bound.
        return Ok(fml_like);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cn_objective_derivative(&dbar, kmax, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let p = dbar.iter().filter(|&&d| d > 1.0 / u).count();
    let q = dbar.iter().filter(|&&d| d > 1.0 / (u * kmax)).count();
    Ok(CnCaseResult {
        case_id: CnCase::CaseInteriorU,
        u_star: u,
        p,
        q,
        nbar,
    })
}

/// Condition-number-constrained ML estimate with bound `kmax`.
pub fn cncml(stats: &SampleStats, kmax: f64) -> Result<CovarianceEstimate> {
    let case = cncml_u_star(stats, kmax)?;
    let lambdas = cncml_profile(stats.eigenvalues(), stats.sigma2(), kmax, &case);
    Ok(CovarianceEstimate::new(
        stats.spectrum(),
        lambdas,
        EstimatorKind::Cncml,
        Constraints {
            sigma2: Some(stats.sigma2()),
            kmax: Some(kmax),
            ..Default::default()
        },
    ))
}

pub(crate) fn cncml_profile(d: &[f64], sigma2: f64, kmax: f64, case: &CnCaseResult) -> Vec<f64> {
    let n = d.len();
    match case.case_id {
        CnCase::ScaledIdentity => vec![sigma2; n],
        CnCase::FmlEquivalent => d.iter().map(|&x| x.max(sigma2)).collect(),
        CnCase::CaseBoundaryU => (0..n)
            .map(|i| {
                if i < case.p {
                    sigma2 * kmax
                } else if i < case.nbar {
                    d[i]
                } else {
                    sigma2
                }
            })
            .collect(),
        CnCase::CaseInteriorU => {
            let u = case.u_star;
            (0..n)
                .map(|i| {
                    if i < case.p {
                        sigma2 / u
                    } else if i < case.q {
                        d[i]
                    } else {
                        sigma2 / (u * kmax)
                    }
                })
                .collect()
        }
    }
}

/// `λ_max / λ_min` of an estimate.
pub fn condition_number(est: &CovarianceEstimate) -> Result<f64> {
    let max = est.lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = est.lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::ZeroEigenvalue(min));
    }
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(d: &[f64], sigma2: f64) -> SampleStats {
        SampleStats::from_eigenvalues(d.to_vec(), 10, sigma2).unwrap()
    }

    /// Per-eigenvalue optimum for a given `u`, straight from the clipping rule
    /// `xᵢ = min(min(K_max·u, 1), max(u, 1/d̄ᵢ))`, and the resulting cost.
    fn clip_cost(dbar: &[f64], kmax: f64, u: f64) -> f64 {
        dbar.iter()
            .map(|&d| {
                let x = (kmax * u).min(1.0).min(u.max(1.0 / d));
                -x.ln() + d * x
            })
            .sum()
    }

    fn grid_argmin(dbar: &[f64], kmax: f64, step: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut i = 1usize;
        loop {
            let u = i as f64 * step;
            if u > 1.0 {
                break;
            }
            let v = clip_cost(dbar, kmax, u);
            if v < best.0 {
                best = (v, u);
            }
            i += 1;
        }
        best.1
    }

    #[test]
    fn smi_is_identity_map() {
        let s = stats(&[3.0, 1.0, 0.2], 1.0);
        assert_eq!(smi(s.spectrum()).lambdas, vec![3.0, 1.0, 0.2]);
        let s = stats(&[3.0, 0.0, 0.0], 1.0);
        assert_eq!(smi(s.spectrum()).lambdas, vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn fml_clips_at_floor() {
        let e = fml(&stats(&[5.0, 0.8, 0.5], 1.0));
        assert_eq!(e.lambdas, vec![5.0, 1.0, 1.0]);
        assert_eq!(e.constraints.rank, Some(1));
        let e = fml(&stats(&[0.9, 0.8], 1.0));
        assert_eq!(e.lambdas, vec![1.0, 1.0]);
        assert_eq!(e.constraints.rank, Some(0));
        let e = fml(&stats(&[4.0, 2.0], 1.0));
        assert_eq!(e.lambdas, vec![4.0, 2.0]);
    }

    #[test]
    fn rcml_profiles() {
        let s = stats(&[5.0, 3.0, 0.5, 0.2], 1.0);
        assert_eq!(rcml(&s, 2).unwrap().lambdas, vec![5.0, 3.0, 1.0, 1.0]);
        assert_eq!(rcml(&s, 3).unwrap().lambdas, vec![5.0, 3.0, 1.0, 1.0]);
        assert_eq!(rcml(&s, 0).unwrap().lambdas, vec![1.0; 4]);
        assert!(rcml(&s, 5).is_err());
        let s = stats(&[5.0, 3.0, 2.0], 1.0);
        assert_eq!(rcml(&s, 3).unwrap().lambdas, vec![5.0, 3.0, 2.0]);
    }

    #[test]
    fn fml_equals_rcml_at_implied_rank() {
        let s = stats(&[7.0, 4.0, 1.5, 0.9, 0.1], 1.2);
        let f = fml(&s);
        let r = rcml(&s, f.constraints.rank.unwrap()).unwrap();
        assert_eq!(f.lambdas, r.lambdas);
    }

    #[test]
    fn cn_scaled_identity() {
        let s = stats(&[0.5, 0.3], 1.0);
        for kmax in [1.0, 3.0, 100.0] {
            let c = cncml_u_star(&s, kmax).unwrap();
            assert_eq!(c.case_id, CnCase::ScaledIdentity);
            let e = cncml(&s, kmax).unwrap();
            assert_eq!(e.lambdas, vec![1.0, 1.0]);
            assert_eq!(condition_number(&e).unwrap(), 1.0);
        }
    }

    #[test]
    fn cn_fml_equivalent() {
        let s = stats(&[10.0, 5.0, 0.5], 1.0);
        let c = cncml_u_star(&s, 20.0).unwrap();
        assert_eq!(c.case_id, CnCase::FmlEquivalent);
        assert!((c.u_star - 0.1).abs() < 1e-15);
        let e = cncml(&s, 20.0).unwrap();
        assert_eq!(e.lambdas, fml(&s).lambdas);
        assert_eq!(e.lambdas, vec![10.0, 5.0, 1.0]);
        // tie d̄₁ = K_max resolves to the FML case
        assert_eq!(cncml_u_star(&s, 10.0).unwrap().case_id, CnCase::FmlEquivalent);
    }

    #[test]
    fn cn_interior_example() {
        // Stationarity on (0.1, 0.2]: -2/u + 12 = 0, so u* = 1/6.
        let s = stats(&[10.0, 5.0, 0.5], 1.0);
        let c = cncml_u_star(&s, 4.0).unwrap();
        assert_eq!(c.case_id, CnCase::CaseInteriorU);
        assert!((c.u_star - 1.0 / 6.0).abs() < 1e-11);
        let grid = grid_argmin(&[10.0, 5.0, 0.5], 4.0, 1e-6);
        assert!((c.u_star - grid).abs() < 1e-5);
        let e = cncml(&s, 4.0).unwrap();
        let expect = [6.0, 5.0, 1.5];
        for (a, b) in e.lambdas.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{:?}", e.lambdas);
        }
        assert!((condition_number(&e).unwrap() - 4.0).abs() < 1e-9);
        assert_eq!((c.p, c.q), (1, 2));
    }

    #[test]
    fn cn_boundary_example() {
        // p = 1, N̄ = 2: threshold = 10 / (1 + 0.5) ≈ 6.67, so K_max = 8 is on the boundary.
        let s = stats(&[10.0, 5.0, 0.5], 2.0 / 2.0);
        let c = cncml_u_star(&s, 8.0).unwrap();
        assert_eq!(c.case_id, CnCase::CaseBoundaryU);
        let e = cncml(&s, 8.0).unwrap();
        assert_eq!(e.lambdas, vec![8.0, 5.0, 1.0]);
        assert!((condition_number(&e).unwrap() - 8.0).abs() < 1e-12);
        let grid = grid_argmin(&[10.0, 5.0, 0.5], 8.0, 1e-6);
        assert!((grid - 0.125).abs() < 2e-6);
    }

    #[test]
    fn piecewise_objective_matches_clip_cost() {
        let dbar = [12.0, 4.0, 1.0, 0.7, 0.0];
        for kmax in [1.0, 2.5, 6.0, 30.0] {
            for i in 1..=1000 {
                let u = i as f64 / 1000.0;
                let a = cn_objective(&dbar, kmax, u);
                let b = clip_cost(&dbar, kmax, u);
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "kmax {kmax} u {u}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_kmax() {
        let s = stats(&[2.0, 1.0], 1.0);
        assert!(cncml_u_star(&s, 0.5).is_err());
        assert!(cncml(&s, f64::NAN).is_err());
    }

    #[test]
    fn all_above_floor_within_bound_is_fml() {
        // d̄₁ > K_max but d̄₁/d̄_N ≤ K_max and no eigenvalue below the floor.
        let s = stats(&[9.0, 6.0, 4.0], 1.0);
        let e = cncml(&s, 5.0).unwrap();
        assert_eq!(e.lambdas, vec![9.0, 6.0, 4.0]);
        assert!(condition_number(&e).unwrap() <= 5.0);
    }

    #[test]
    fn condition_number_cases() {
        let s = stats(&[8.0, 2.0], 1.0);
        assert_eq!(condition_number(&smi(s.spectrum())).unwrap(), 4.0);
        let z = stats(&[8.0, 0.0], 1.0);
        assert!(matches!(condition_number(&smi(z.spectrum())), Err(Error::ZeroEigenvalue(_))));
    }

    #[test]
    fn lsmi_adds_loading() {
        let s = stats(&[3.0, 1.0], 1.0);
        assert_eq!(lsmi(s.spectrum(), 0.5).unwrap().lambdas, vec![3.5, 1.5]);
        assert!(lsmi(s.spectrum(), -1.0).is_err());
    }

    #[test]
    fn solve_uses_shared_basis() {
        let mut m = CMatrix::identity(2).scale(2.0);
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        m[(1, 0)] = Complex64::new(0.0, -1.0);
        let h = HermitianMatrix::new(m).unwrap();
        let spec = SampleSpectrum::from_sample_covariance(&h, 4).unwrap();
        let e = smi(&spec);
        let x = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.5)];
        let y = e.solve(&x).unwrap();
        let back = h.matrix().matvec(&y);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
