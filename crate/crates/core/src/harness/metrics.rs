//! Figures of merit: normalized SINR and the normalized matched filter.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::CovarianceEstimate;
use crate::hermit::{eig_hermitian, inner, EigenDecomposition, HermitianMatrix};

/// A true covariance with its eigendecomposition, for repeated SINR evaluation.
#[derive(Debug, Clone)]
pub struct TrueCovariance {
    matrix: HermitianMatrix,
    eig: EigenDecomposition,
}

impl TrueCovariance {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let eig = eig_hermitian(&matrix)?;
        Ok(Self { matrix, eig })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// `sᴴR⁻¹s`
    fn s_rinv_s(&self, s: &[Complex64]) -> Result<f64> {
        let y = self.eig.solve(s)?;
        Ok(inner(s, &y).re)
    }
}

fn check_nonzero(name: &str, v: &[Complex64]) -> Result<()> {
    if v.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
        return Err(Error::InvalidInput(format!("{name} must be nonzero")));
    }
    Ok(())
}

/// `η = |sᴴw|² / (|wᴴRw|·|sᴴR⁻¹s|)` for the adaptive weight `w = R̂⁻¹s`.
///
/// `solve` applies `R̂⁻¹`. The result lies in `(0, 1]`.
fn sinr_with(solve: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>, truth: &TrueCovariance, s: &[Complex64]) -> Result<f64> {
    if s.len() != truth.matrix.n() {
        return Err(Error::InvalidInput(format!(
            "steering length {} does not match dimension {}",
            s.len(),
            truth.matrix.n()
        )));
    }
    check_nonzero("steering vector", s)?;
    let w = solve(s)?;
    let num = inner(s, &w).norm_sqr();
    let rw = truth.matrix.matrix().matvec(&w);
    let den = inner(&w, &rw).norm() * truth.s_rinv_s(s)?.abs();
    Ok(num / den)
}

pub fn normalized_sinr(r_hat: &HermitianMatrix, r_true: &HermitianMatrix, s: &[Complex64]) -> Result<f64> {
    let eig = eig_hermitian(r_hat)?;
    let truth = TrueCovariance::new(r_true.clone())?;
    sinr_with(|x| eig.solve(x), &truth, s)
}

/// Normalized SINR of an estimate against a prepared true covariance.
pub fn estimate_sinr(est: &CovarianceEstimate, truth: &TrueCovariance, s: &[Complex64]) -> Result<f64> {
    sinr_with(|x| est.solve(x), truth, s)
}

pub fn sinr_db(eta: f64) -> f64 {
    10.0 * eta.log10()
}

/// `|sᴴR̂⁻¹z|² / ((sᴴR̂⁻¹s)(zᴴR̂⁻¹z))`, in `[0, 1]`.
pub fn nmf_statistic(est: &CovarianceEstimate, s: &[Complex64], z: &[Complex64]) -> Result<f64> {
    if s.len() != est.n() || z.len() != est.n() {
        return Err(Error::InvalidInput("vector length does not match the estimate".into()));
    }
    check_nonzero("steering vector", s)?;
    check_nonzero("snapshot", z)?;
    let min = est.lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Singular(min));
    }
    let basis = est.basis();
    Ok(nmf_from_projections(&est.lambdas, &basis.adjoint_matvec(s), &basis.adjoint_matvec(z)))
}

/// NMF statistic from `Vᴴs` and `Vᴴz`, with `R̂ = V·diag(λ)·Vᴴ`.
pub(crate) fn nmf_from_projections(lambdas: &[f64], s: &[Complex64], z: &[Complex64]) -> f64 {
    let mut sz = Complex64::new(0.0, 0.0);
    let mut ss = 0.0;
    let mut zz = 0.0;
    for ((l, a), b) in lambdas.iter().zip(s).zip(z) {
        sz += a.conj() * b / l;
        ss += a.norm_sqr() / l;
        zz += b.norm_sqr() / l;
    }
    sz.norm_sqr() / (ss * zz)
}
