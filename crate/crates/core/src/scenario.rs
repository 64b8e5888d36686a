//! Jammer-plus-noise covariance model, steering vectors, training draws with
//! optional target-like corruption, and the CMAT matrix file format.
//!
//! The model is
//! `R(n, m) = Σᵢ σᵢ² · sinc(0.5 βᵢ (n−m) φᵢ) · e^{j(n−m)φᵢ} + σₐ² δ(n, m)`
//! with `φᵢ` the electrical phase of jammer `i`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hermit::{eig_hermitian, sample_training, sqrt_factor, CMatrix, HermitianMatrix, TrainingMatrix};

/// Tolerance for negative model eigenvalues, relative to the largest.
const MODEL_PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SincConvention {
    /// `sin(x)/x`
    #[default]
    Unnormalized,
    /// `sin(πx)/(πx)`
    Normalized,
}

impl SincConvention {
    pub fn eval(self, x: f64) -> f64 {
        let x = match self {
            SincConvention::Unnormalized => x,
            SincConvention::Normalized => PI * x,
        };
        if x == 0.0 {
            1.0
        } else {
            x.sin() / x
        }
    }
}

/// How a configured angle in degrees becomes the electrical phase `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleMode {
    /// Half-wavelength array: `φ = π·sin θ`.
    ArraySine,
    /// The angle is the phase itself: `φ = θ·π/180`.
    #[default]
    Phase,
}

impl AngleMode {
    pub fn phase(self, degrees: f64) -> f64 {
        match self {
            AngleMode::ArraySine => PI * degrees.to_radians().sin(),
            AngleMode::Phase => degrees.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jammer {
    /// `σᵢ²`
    pub power: f64,
    pub angle_deg: f64,
    /// Fractional bandwidth `βᵢ ∈ [0, 1)`.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub jammers: Vec<Jammer>,
    /// `σₐ²`
    pub noise_power: f64,
    pub sinc: SincConvention,
    pub angle_mode: AngleMode,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("array size must be at least 1".into()));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {}", self.noise_power)));
        }
        for (i, j) in self.jammers.iter().enumerate() {
            if !(j.power > 0.0 && j.power.is_finite()) {
                return Err(Error::InvalidInput(format!("jammer {i}: power must be positive")));
            }
            if !(0.0..1.0).contains(&j.bandwidth) {
                return Err(Error::InvalidInput(format!("jammer {i}: bandwidth must lie in [0, 1)")));
            }
            if !j.angle_deg.is_finite() {
                return Err(Error::InvalidInput(format!("jammer {i}: angle must be finite")));
            }
        }
        Ok(())
    }
}

/// The model covariance. Rejected if an eigenvalue falls below
/// `-1e-9 · λ_max`; smaller negative excursions are logged.
pub fn jammer_covariance(cfg: &ScenarioConfig) -> Result<HermitianMatrix> {
    cfg.validate()?;
    let n = cfg.n;
    let lags: Vec<Complex64> = (0..n)
        .map(|l| {
            let lf = l as f64;
            let mut acc = Complex64::new(if l == 0 { cfg.noise_power } else { 0.0 }, 0.0);
            for j in &cfg.jammers {
                let phi = cfg.angle_mode.phase(j.angle_deg);
                acc += Complex64::from_polar(j.power * cfg.sinc.eval(0.5 * j.bandwidth * lf * phi), lf * phi);
            }
            acc
        })
        .collect();
    let m = CMatrix::from_fn(n, n, |i, k| if i >= k { lags[i - k] } else { lags[k - i].conj() });
    let h = HermitianMatrix::new(m)?;
    let eig = eig_hermitian(&h)?;
    let max = eig.eigenvalues[0];
    let min = eig.eigenvalues[n - 1];
    if min < -MODEL_PSD_TOL * max {
        return Err(Error::Model(format!(
            "covariance model is indefinite: eigenvalue {min:e} with largest {max:e}"
        )));
    }
    if min < 0.0 {
        log::warn!("covariance model has eigenvalue {min:e}; treated as 0");
    }
    Ok(h)
}

/// `s[m] = e^{j m π sin θ} / √N`
pub fn steering_vector(n: usize, angle_deg: f64) -> Vec<Complex64> {
    steering_vector_with(n, angle_deg, AngleMode::ArraySine)
}

/// Unit steering vector with the phase mapping of `mode`.
pub fn steering_vector_with(n: usize, angle_deg: f64, mode: AngleMode) -> Vec<Complex64> {
    let phi = mode.phase(angle_deg);
    let scale = 1.0 / (n as f64).sqrt();
    (0..n).map(|m| Complex64::from_polar(scale, m as f64 * phi)).collect()
}

/// Target-like outliers added to a fraction of the training columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub fraction: f64,
    /// `α`
    pub amplitude: f64,
    pub steering: Vec<Complex64>,
}

impl CorruptionSpec {
    pub fn count(&self, k: usize) -> usize {
        ((self.fraction * k as f64).round() as usize).min(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub z: TrainingMatrix,
    /// Ascending 0-based indices of the corrupted columns.
    pub corrupted_indices: Vec<usize>,
    pub corruption: Option<CorruptionSpec>,
}

/// Draws `k` snapshots from `CN(0, r_true)` and corrupts a fraction of them.
pub fn generate_training<R: Rng + ?Sized>(
    r_true: &HermitianMatrix,
    k: usize,
    corruption: Option<&CorruptionSpec>,
    rng: &mut R,
) -> Result<TrainingSet> {
    generate_training_with_factor(&sqrt_factor(r_true)?, k, corruption, rng)
}

/// As [`generate_training`] with a precomputed square-root factor of the
/// true covariance. The disturbance is drawn before the corrupted columns are
/// chosen, so the same stream gives the same disturbance with or without
/// corruption.
pub fn generate_training_with_factor<R: Rng + ?Sized>(
    factor: &CMatrix,
    k: usize,
    corruption: Option<&CorruptionSpec>,
    rng: &mut R,
) -> Result<TrainingSet> {
    let mut z = sample_training(factor, k, rng)?;
    let mut corrupted_indices = Vec::new();
    if let Some(c) = corruption {
        if !(0.0..=1.0).contains(&c.fraction) {
            return Err(Error::InvalidInput(format!("corruption fraction {} outside [0, 1]", c.fraction)));
        }
        if c.steering.len() != factor.rows() {
            return Err(Error::InvalidInput("corruption steering vector has the wrong length".into()));
        }
        corrupted_indices = rand::seq::index::sample(rng, k, c.count(k)).into_vec();
        corrupted_indices.sort_unstable();
        let m = z.matrix_mut();
        for &j in &corrupted_indices {
            for (i, s) in c.steering.iter().enumerate() {
                m[(i, j)] += s * c.amplitude;
            }
        }
    }
    Ok(TrainingSet {
        z,
        corrupted_indices,
        corruption: corruption.cloned(),
    })
}

const CMAT_MAGIC: &str = "CMAT v1";

/// Writes a matrix as `CMAT v1 N M` followed by one line per row of
/// `re im` pairs with 17 significant digits.
pub fn matrix_save(h: &HermitianMatrix, path: &Path) -> Result<()> {
    cmatrix_save(h.matrix(), path)
}

pub fn cmatrix_save(m: &CMatrix, path: &Path) -> Result<()> {
    let mut out = format!("{CMAT_MAGIC} {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|c| format!("{:.16e} {:.16e}", c.re, c.im)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a CMAT file of any shape.
pub fn cmatrix_load(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "CMAT" || fields[1] != "v1" {
        return Err(Error::format(path, 1, format!("expected header \"{CMAT_MAGIC} N M\"")));
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::format(path, 1, format!("bad dimension \"{s}\"")))
    };
    let (rows, cols) = (dim(fields[2])?, dim(fields[3])?);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::format(path, text.lines().count() + 1, format!("row {r}: missing")))?;
        let lineno = idx + 1;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 2 * cols {
            return Err(Error::format(
                path,
                lineno,
                format!("row {r}: expected {} numbers, found {}", 2 * cols, vals.len()),
            ));
        }
        for c in 0..cols {
            let parse = |s: &str, part: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(path, lineno, format!("row {r}, column {c}: bad {part} part \"{s}\"")))
            };
            data.push(Complex64::new(parse(vals[2 * c], "real")?, parse(vals[2 * c + 1], "imaginary")?));
        }
    }
    if let Some((idx, _)) = lines.next() {
        return Err(Error::format(path, idx + 1, format!("extra content after {rows} rows")));
    }
    CMatrix::from_row_major(rows, cols, data)
}

/// Reads a square Hermitian CMAT file.
pub fn matrix_load(path: &Path) -> Result<HermitianMatrix> {
    let m = cmatrix_load(path)?;
    if m.rows() != m.cols() {
        return Err(Error::format(path, 1, format!("matrix is {}x{}, expected square", m.rows(), m.cols())));
    }
    HermitianMatrix::new(m).map_err(|e| match e {
        Error::NotHermitian { row, col, mismatch } => Error::format(
            path,
            row + 2,
            format!("row {row}, column {col}: not Hermitian (mismatch {mismatch:e})"),
        ),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    pub(crate) fn paper_jammers() -> Vec<Jammer> {
        [(100.0, 20.0, 0.2), (1e4, 40.0, 0.0), (1e6, 60.0, 0.3)]
            .iter()
            .map(|&(power, angle_deg, bandwidth)| Jammer {
                power,
                angle_deg,
                bandwidth,
            })
            .collect()
    }

    fn cfg(n: usize, jammers: Vec<Jammer>) -> ScenarioConfig {
        ScenarioConfig {
            n,
            jammers,
            noise_power: 1.0,
            sinc: SincConvention::Unnormalized,
            angle_mode: AngleMode::ArraySine,
        }
    }

    #[test]
    fn no_jammers_is_scaled_identity() {
        let mut c = cfg(4, vec![]);
        c.noise_power = 2.5;
        let r = jammer_covariance(&c).unwrap();
        assert_eq!(r.matrix().max_abs_diff(&CMatrix::identity(4).scale(2.5)), 0.0);
    }

    #[test]
    fn diagonal_and_toeplitz() {
        for mode in [AngleMode::ArraySine, AngleMode::Phase] {
            let mut c = cfg(20, paper_jammers());
            c.angle_mode = mode;
            let r = jammer_covariance(&c).unwrap();
            let total = 100.0 + 1e4 + 1e6 + 1.0;
            for i in 0..20 {
                assert!((r[(i, i)].re - total).abs() < 1e-9 * total);
                assert_eq!(r[(i, i)].im, 0.0);
            }
            for i in 0..19 {
                for j in 0..19 {
                    assert_eq!(r[(i, j)], r[(i + 1, j + 1)]);
                }
            }
        }
    }

    #[test]
    fn narrowband_jammer_is_rank_one() {
        let c = cfg(8, vec![Jammer { power: 50.0, angle_deg: 25.0, bandwidth: 0.0 }]);
        let eig = eig_hermitian(&jammer_covariance(&c).unwrap()).unwrap();
        let above = eig.eigenvalues.iter().filter(|&&l| l > 1.0 + 1e-9).count();
        assert_eq!(above, 1);
        assert!((eig.eigenvalues[0] - (1.0 + 50.0 * 8.0)).abs() < 1e-8);
    }

    #[test]
    fn model_eigenvalues_above_ten_noise_floors() {
        let count = |mode| {
            let mut c = cfg(20, paper_jammers());
            c.angle_mode = mode;
            let eig = eig_hermitian(&jammer_covariance(&c).unwrap()).unwrap();
            assert!(*eig.eigenvalues.last().unwrap() > -1e-9 * eig.eigenvalues[0]);
            eig.eigenvalues.iter().filter(|&&l| l > 10.0).count()
        };
        assert_eq!(count(AngleMode::Phase), 6);
        assert_eq!(count(AngleMode::ArraySine), 10);
    }

    #[test]
    fn sqrt_factor_of_model_reconstructs() {
        let r = jammer_covariance(&cfg(8, paper_jammers())).unwrap();
        let f = sqrt_factor(&r).unwrap();
        let back = f.matmul(&f.adjoint());
        assert!(back.max_abs_diff(r.matrix()) <= 1e-9 * r.matrix().max_abs());
    }

    #[test]
    fn steering_vectors() {
        let s = steering_vector(5, 0.0);
        for x in &s {
            assert!((x - Complex64::new(1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        for a in [-73.0, 12.5, 20.0, 88.0] {
            let s = steering_vector(11, a);
            assert!((crate::hermit::norm(&s) - 1.0).abs() < 1e-12);
        }
        let s = steering_vector(9, 20.0);
        assert!((crate::hermit::inner(&s, &s) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let p = steering_vector_with(4, 90.0, AngleMode::Phase);
        assert!((p[1] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn training_corruption_counts() {
        let r = HermitianMatrix::identity(4);
        let s = steering_vector(4, 10.0);
        let none = CorruptionSpec { fraction: 0.0, amplitude: 5.0, steering: s.clone() };
        let mut rng = stream(1, 0, Purpose::Training);
        let t = generate_training(&r, 10, Some(&none), &mut rng).unwrap();
        assert!(t.corrupted_indices.is_empty());
        let half = CorruptionSpec { fraction: 0.5, amplitude: 50.0, steering: s.clone() };
        assert_eq!(half.count(704), 352);
        let mut rng = stream(1, 0, Purpose::Training);
        let t = generate_training(&r, 704, Some(&half), &mut rng).unwrap();
        assert_eq!(t.corrupted_indices.len(), 352);
        assert!(t.corrupted_indices.windows(2).all(|w| w[0] < w[1]));
        // clean columns are unchanged by corruption
        let mut rng = stream(1, 0, Purpose::Training);
        let clean = generate_training(&r, 704, None, &mut rng).unwrap();
        let j = (0..704).find(|j| !t.corrupted_indices.contains(j)).unwrap();
        assert_eq!(clean.z.column(j), t.z.column(j));
    }

    #[test]
    fn corrupted_mean_is_alpha_s() {
        let n = 3;
        let r = HermitianMatrix::identity(n);
        let s = steering_vector(n, 30.0);
        let c = CorruptionSpec { fraction: 1.0, amplitude: 4.0, steering: s.clone() };
        let mut rng = stream(2, 0, Purpose::Training);
        let k = 20000;
        let t = generate_training(&r, k, Some(&c), &mut rng).unwrap();
        for i in 0..n {
            let mean: Complex64 = (0..k).map(|j| t.z.matrix()[(i, j)]).sum::<Complex64>() / k as f64;
            // each entry has unit variance, so the mean has standard error 1/√K
            let band = 3.0 / (k as f64).sqrt();
            assert!((mean - s[i] * 4.0).norm() < band * 2f64.sqrt(), "entry {i}");
        }
    }

    #[test]
    fn cmat_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.cmat");
        let id = HermitianMatrix::identity(4);
        matrix_save(&id, &p).unwrap();
        assert_eq!(matrix_load(&p).unwrap(), id);
        let r = jammer_covariance(&cfg(8, paper_jammers())).unwrap();
        matrix_save(&r, &p).unwrap();
        let back = matrix_load(&p).unwrap();
        assert!(back.matrix().max_abs_diff(r.matrix()) <= 1e-15 * r.matrix().max_abs());
    }

    #[test]
    fn cmat_rejects_bad_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.cmat");
        std::fs::write(&p, "CMAT v1 2 2\n1 0 2 1\n2 1 3 0\n").unwrap();
        match matrix_load(&p) {
            Err(Error::Format { line, msg, .. }) => {
                assert!(msg.contains("not Hermitian"), "{msg}");
                assert!(line >= 2);
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "CMAT v1 2 2\n1 0 0 0\n0 0 x 0\n").unwrap();
        match matrix_load(&p) {
            Err(Error::Format { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("row 1, column 1"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "CMAT v2 2 2\n").unwrap();
        assert!(matches!(matrix_load(&p), Err(Error::Format { line: 1, .. })));
        std::fs::write(&p, "CMAT v1 2 2\n1 0 0 0\n").unwrap();
        assert!(matches!(matrix_load(&p), Err(Error::Format { .. })));
    }
}
