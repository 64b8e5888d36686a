use elcov::estimators::*;
use elcov::harness::metrics::normalized_sinr;
use elcov::hermit::*;
use elcov::likelihood::*;
use elcov::rng::{stream, Purpose};
use elcov::scenario::*;
use elcov::selection::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Sorted spectra of length 2..=max_n with entries in `lo..hi`.
fn spectrum(lo: f64, hi: f64, max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 2..=max_n).prop_map(descending)
}

/// Spectra that straddle the unit noise floor, with the last entry below it.
fn floored_spectrum(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.05f64..40.0, 1..max_n), 0.02f64..0.95).prop_map(|(mut v, low)| {
        v.push(low);
        descending(v)
    })
}

fn stats(d: &[f64], sigma2: f64) -> SampleStats {
    SampleStats::from_eigenvalues(d.to_vec(), 4 * d.len(), sigma2).unwrap()
}

fn complex_matrix(n: usize, m: usize, seed: u64) -> CMatrix {
    let mut rng = stream(seed, 0, Purpose::Custom(1));
    CMatrix::from_fn(n, m, |_, _| circular_gaussian(&mut rng))
}

fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
    HermitianMatrix::hermitize(&complex_matrix(n, n, seed))
}

fn random_pd(n: usize, seed: u64) -> HermitianMatrix {
    let f = complex_matrix(n, n, seed);
    let mut m = f.matmul(&f.adjoint());
    for i in 0..n {
        m[(i, i)] += Complex64::new(0.1, 0.0);
    }
    HermitianMatrix::hermitize(&m)
}

fn log_lr_rank_noise_oracle(d: &[f64], r: usize, t: f64) -> f64 {
    d[r..].iter().map(|&x| (x / t).ln() - x / t + 1.0).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigen_reconstructs(n in 2usize..=12, seed in any::<u64>()) {
        let h = random_hermitian(n, seed);
        let eig = eig_hermitian(&h).unwrap();
        let scale = h.matrix().max_abs().max(1.0);
        prop_assert!(eig.reconstruct().matrix().max_abs_diff(h.matrix()) <= 1e-9 * scale);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn psd_products_have_nonnegative_spectrum(n in 2usize..=10, m in 1usize..=12, seed in any::<u64>()) {
        let f = complex_matrix(n, m, seed);
        let h = HermitianMatrix::hermitize(&f.matmul(&f.adjoint()));
        let e = eig_hermitian(&h).unwrap().eigenvalues;
        prop_assert!(*e.last().unwrap() >= -1e-9 * e[0]);
    }

    #[test]
    fn sample_covariance_is_psd_and_training_deterministic(n in 1usize..=8, k in 1usize..=20, seed in any::<u64>()) {
        let f = sqrt_factor(&random_pd(n, seed)).unwrap();
        let z1 = sample_training(&f, k, &mut stream(seed, 1, Purpose::Training)).unwrap();
        let z2 = sample_training(&f, k, &mut stream(seed, 1, Purpose::Training)).unwrap();
        prop_assert_eq!(z1.matrix(), z2.matrix());
        let e = eig_hermitian(&sample_covariance(&z1)).unwrap().eigenvalues;
        prop_assert!(*e.last().unwrap() >= -1e-10 * e[0]);
    }

    #[test]
    fn rcml_nesting_and_fml_identity(d in spectrum(0.01, 30.0, 10), sigma2 in 0.1f64..5.0) {
        let s = stats(&d, sigma2);
        let n = d.len();
        let profiles: Vec<Vec<f64>> = (0..=n).map(|r| rcml(&s, r).unwrap().lambdas).collect();
        for i in 0..=n {
            for j in i + 1..=n {
                prop_assert_eq!(&profiles[i][..i], &profiles[j][..i]);
                for m in 0..n {
                    if d[m] < sigma2 {
                        prop_assert_eq!(profiles[i][m], profiles[j][m]);
                    }
                }
            }
        }
        let above = d.iter().filter(|&&x| x > sigma2).count();
        prop_assert_eq!(fml(&s).lambdas, rcml(&s, above).unwrap().lambdas);
        for p in &profiles {
            prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(p.iter().all(|&l| l >= sigma2));
        }
    }

    #[test]
    fn cncml_bounds_and_fml_case(d in floored_spectrum(9), kscale in 0.0f64..1.0) {
        let s = stats(&d, 1.0);
        let d1 = d[0];
        let kmax = 1.0 + kscale * (2.0 * d1.max(1.0));
        let est = cncml(&s, kmax).unwrap();
        prop_assert!(est.lambdas.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(est.lambdas.iter().all(|&l| l >= 1.0 - 1e-12));
        let cn = condition_number(&est).unwrap();
        prop_assert!(cn <= kmax + 1e-9);
        let case = cncml_u_star(&s, kmax).unwrap();
        if matches!(case.case_id, CnCase::CaseBoundaryU | CnCase::CaseInteriorU) {
            prop_assert!((cn - kmax).abs() <= 1e-9 * kmax);
        }
        if d1 >= 1.0 {
            let loose = cncml(&s, d1.max(1.0) * (1.0 + kscale)).unwrap();
            prop_assert_eq!(loose.lambdas, fml(&s).lambdas);
        }
    }

    #[test]
    fn lr_value_at_most_one(pairs in prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..10)) {
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let v = lr_value(&lambdas, &d).unwrap();
        prop_assert!(v <= 1.0);
        prop_assert_eq!(lr_value(&d, &d).unwrap(), 1.0);
        let off = d.iter().zip(&lambdas).any(|(a, b)| ((a / b) - 1.0).abs() > 1e-6);
        if off {
            prop_assert!(v < 1.0);
        }
    }

    #[test]
    fn rcml_lr_is_monotone_in_rank(d in spectrum(0.01, 30.0, 12), sigma2 in 0.1f64..5.0) {
        let s = stats(&d, sigma2);
        for r in 0..d.len() {
            prop_assert!(lr_rcml(&s, r + 1).unwrap() >= lr_rcml(&s, r).unwrap() - 1e-12);
        }
    }

    #[test]
    fn lambert_identity(x in 0.0f64..1.0, log_pos in -20.0f64..20.0) {
        let z_neg = -(-1.0f64).exp() * x;
        for branch in [LambertBranch::Principal, LambertBranch::Lower] {
            if branch == LambertBranch::Lower && z_neg == 0.0 {
                continue;
            }
            let w = lambert_w(branch, z_neg).unwrap();
            prop_assert!((w * w.exp() - z_neg).abs() <= 1e-12 * z_neg.abs().max(1e-300) + 1e-15);
        }
        let z = log_pos.exp();
        let w = lambert_w(LambertBranch::Principal, z).unwrap();
        prop_assert!((w * w.exp() - z).abs() <= 1e-12 * z);
    }

    #[test]
    fn rank_search_is_exhaustive_argmin(d in spectrum(0.05, 5.0, 10), r_init_frac in 0.0f64..=1.0, lr0 in 0.001f64..1.0) {
        let s = stats(&d, 1.0);
        let n = d.len();
        let r_init = (r_init_frac * n as f64).round() as usize;
        let sel = select_rank(&s, r_init, lr0).unwrap();
        let mut best = (f64::INFINITY, 0);
        for r in 0..=n {
            let v = (lr_rcml(&s, r).unwrap() - lr0).abs();
            if v < best.0 {
                best = (v, r);
            }
        }
        prop_assert_eq!(sel.r_hat, best.1);
        prop_assert_eq!(select_rank(&s, r_init, lr0).unwrap(), sel);
    }

    #[test]
    fn noise_lr_is_unimodal_and_roots_solve(d in spectrum(0.05, 20.0, 10), frac in 0.05f64..0.99) {
        let n = d.len();
        let r = n / 2;
        let ml = sigma_ml(&d, r).unwrap();
        let (lo, hi) = (ml / 50.0, ml * 50.0);
        let grid: Vec<f64> = (0..1000).map(|i| lo * (hi / lo).powf(i as f64 / 999.0)).collect();
        for w in grid.windows(2) {
            let (a, b) = (log_lr_rank_noise_oracle(&d, r, w[0]), log_lr_rank_noise_oracle(&d, r, w[1]));
            if w[1] <= ml {
                prop_assert!(b >= a - 1e-12);
            } else if w[0] >= ml {
                prop_assert!(b <= a + 1e-12);
            }
        }
        let lr_max = log_lr_rank_noise_oracle(&d, r, ml).exp();
        let lr0 = frac * lr_max;
        let roots = sigma_el_roots(&d, r, lr0).unwrap();
        prop_assert_eq!(roots.count, 2);
        prop_assert!(roots.roots[0] < ml && ml < roots.roots[1]);
        for &t in &roots.roots {
            let v = log_lr_rank_noise_oracle(&d, r, t).exp();
            prop_assert!((v - lr0).abs() <= 1e-8 * lr0);
        }
    }

    #[test]
    fn kmax_walk_is_monotone_upward(d in floored_spectrum(8), lr0 in 0.01f64..1.0) {
        let s = stats(&d, 1.0);
        let sel = select_kmax(&s, lr0).unwrap();
        prop_assert!(sel.kmax_hat >= 1.0);
        let mut pts = sel.visited.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-10);
        }
        prop_assert_eq!(select_kmax(&s, lr0).unwrap(), sel);
    }

    #[test]
    fn jammer_models_are_hermitian_psd_toeplitz(
        n in 2usize..=16,
        jam in prop::collection::vec((0.1f64..1e4, -90.0f64..90.0, 0.0f64..0.99), 0..4),
        normalized in any::<bool>(),
        phase in any::<bool>(),
    ) {
        let cfg = ScenarioConfig {
            n,
            jammers: jam.iter().map(|&(power, angle_deg, bandwidth)| Jammer { power, angle_deg, bandwidth }).collect(),
            noise_power: 1.0,
            sinc: if normalized { SincConvention::Normalized } else { SincConvention::Unnormalized },
            angle_mode: if phase { AngleMode::Phase } else { AngleMode::ArraySine },
        };
        let r = jammer_covariance(&cfg).unwrap();
        let m = r.matrix();
        let scale = m.max_abs();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((m[(i, j)] - m[(j, i)].conj()).norm() <= 1e-12 * scale);
                if i + 1 < n && j + 1 < n {
                    prop_assert_eq!(m[(i, j)], m[(i + 1, j + 1)]);
                }
            }
        }
        let e = eig_hermitian(&r).unwrap().eigenvalues;
        prop_assert!(*e.last().unwrap() >= -1e-9 * e[0]);
    }

    #[test]
    fn narrowband_jammer_is_rank_one(n in 2usize..=16, power in 0.5f64..1e3, angle in -90.0f64..90.0) {
        let cfg = ScenarioConfig {
            n,
            jammers: vec![Jammer { power, angle_deg: angle, bandwidth: 0.0 }],
            noise_power: 1.0,
            sinc: SincConvention::Unnormalized,
            angle_mode: AngleMode::Phase,
        };
        let e = eig_hermitian(&jammer_covariance(&cfg).unwrap()).unwrap().eigenvalues;
        prop_assert_eq!(e.iter().filter(|&&l| l > 1.0 + 1e-9 * e[0]).count(), 1);
    }

    #[test]
    fn training_generation_is_bit_identical(seed in any::<u64>(), k in 1usize..30, frac in 0.0f64..=1.0) {
        let r = random_pd(5, seed);
        let c = CorruptionSpec { fraction: frac, amplitude: 3.0, steering: steering_vector(5, 12.0) };
        let a = generate_training(&r, k, Some(&c), &mut stream(seed, 3, Purpose::Training)).unwrap();
        let b = generate_training(&r, k, Some(&c), &mut stream(seed, 3, Purpose::Training)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sinr_is_bounded_and_scale_invariant(n in 2usize..=8, seed in any::<u64>(), angle in -90.0f64..90.0) {
        let r_hat = random_pd(n, seed);
        let r_true = random_pd(n, seed.wrapping_add(1));
        let s = steering_vector(n, angle);
        let eta = normalized_sinr(&r_hat, &r_true, &s).unwrap();
        prop_assert!(eta > 0.0 && eta <= 1.0 + 1e-12);
        for c in [1e-3, 1.0, 1e3] {
            let scaled = normalized_sinr(&r_hat.scale(c), &r_true, &s).unwrap();
            prop_assert!((scaled - eta).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cn_objective_minimized_at_u_star(d in floored_spectrum(8), kscale in 0.05f64..0.95) {
        let s = stats(&d, 1.0);
        let d1 = d[0];
        prop_assume!(d1 > 1.5);
        let kmax = 1.0 + kscale * (d1 - 1.0);
        let case = cncml_u_star(&s, kmax).unwrap();
        let at = cn_objective(&d, kmax, case.u_star);
        let mut u = 1e-6;
        while u <= 1.0 {
            prop_assert!(at <= cn_objective(&d, kmax, u) + 1e-8);
            u += 1e-4;
        }
    }

    #[test]
    fn interior_u_star_falls_with_kmax(d in floored_spectrum(8)) {
        let s = stats(&d, 1.0);
        let d1 = d[0];
        prop_assume!(d1 > 2.0);
        let mut last = f64::INFINITY;
        for i in 1..40 {
            let kmax = 1.0 + (d1 - 1.0) * i as f64 / 40.0;
            let case = cncml_u_star(&s, kmax).unwrap();
            if case.case_id == CnCase::CaseInteriorU {
                prop_assert!(case.u_star <= last + 1e-12);
                last = case.u_star;
            }
        }
    }
}
