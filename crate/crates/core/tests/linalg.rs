mod common;

use common::*;
use gbs_core::linalg::*;
use gbs_core::special::log_mv_gamma;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

fn to_na(a: &RealMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut r = rng(1);
    for _ in 0..200 {
        let m = r.random_range(1..=6usize);
        let a = gaussian_matrix(&mut r, m, m);
        let s = (&a + &a.transpose()).scale(0.5);
        let ours = sym_eig(&s).unwrap();
        let theirs = sorted_desc(to_na(&s).symmetric_eigen().eigenvalues.iter().copied().collect());
        assert!(max_gap(&ours.values, &theirs) < 1e-11 * s.max_abs().max(1.0));
        assert!(ours.reconstruct_with(|x| x).rel_diff(&s) < 1e-12);
    }
}

#[test]
fn singular_values_and_det_match_nalgebra() {
    let mut r = rng(2);
    for _ in 0..200 {
        let n = r.random_range(1..=6usize);
        let m = r.random_range(1..=n);
        let a = gaussian_matrix(&mut r, n, m);
        let ours = svd_thin(&a).unwrap();
        let theirs = sorted_desc(to_na(&a).singular_values().iter().copied().collect());
        assert!(max_gap(&ours.singulars, &theirs) < 1e-11);
        let sq = gaussian_matrix(&mut r, m, m);
        let d = to_na(&sq).determinant();
        assert!(rel(sq.det().unwrap(), d) < 1e-10);
        let inv = sq.inverse().unwrap();
        let na_inv = to_na(&sq).try_inverse().unwrap();
        let gap = inv
            .as_slice()
            .iter()
            .zip(na_inv.transpose().as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-8 * na_inv.amax().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), n in 1usize..6, m_off in 0usize..5) {
        let m = 1 + m_off.min(n - 1);
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, n, m);
        let thin = svd_thin(&a).unwrap();
        prop_assert!(thin.reconstruct().rel_diff(&a) < 1e-12);
        let ltl = &thin.left.transpose() * &thin.left;
        prop_assert!(ltl.rel_diff(&RealMatrix::identity(m)) < 1e-12);
        prop_assert!(thin.singulars.windows(2).all(|w| w[0] >= w[1]));
        // rank one: the left factor must still have orthonormal columns
        let x = gaussian_matrix(&mut r, n, 1);
        let y = gaussian_matrix(&mut r, 1, m);
        let low = &x * &y;
        let full = svd_complete(&low).unwrap();
        let q = &full.left.transpose() * &full.left;
        prop_assert!(q.rel_diff(&RealMatrix::identity(m)) < 1e-12);
        prop_assert!(full.reconstruct().rel_diff(&low) < 1e-12);
    }

    #[test]
    fn penrose_identities(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, n, m);
        let p = pinv(&a).unwrap();
        prop_assert_eq!(p.shape(), (m, n));
        prop_assert!((&(&a * &p) * &a).rel_diff(&a) < 1e-10);
        prop_assert!((&(&p * &a) * &p).rel_diff(&p) < 1e-10);
        prop_assert!((&a * &p).asymmetry() < 1e-10);
        prop_assert!((&p * &a).asymmetry() < 1e-10);
    }

    #[test]
    fn spd_square_root_squares_back(seed in any::<u64>(), m in 1usize..6) {
        let mut r = rng(seed);
        let b = spd(&mut r, m, 0.1, 1e3);
        let root = spd_sqrt(&b);
        prop_assert!((root.matrix() * root.matrix()).rel_diff(b.matrix()) < 1e-11);
        prop_assert!(root.eigenvalues().iter().all(|&x| x > 0.0));
        let inv = b.inverse();
        prop_assert!((b.matrix() * inv.matrix()).rel_diff(&RealMatrix::identity(m)) < 1e-10);
        prop_assert!(rel(b.log_det(), b.matrix().det().unwrap().ln()) < 1e-10);
    }

    #[test]
    fn commutation_is_orthogonal_permutation(n in 1usize..5, m in 1usize..5) {
        let k = commutation(n, m);
        prop_assert!((&k * &k.transpose()).rel_diff(&RealMatrix::identity(n * m)) == 0.0);
        prop_assert!(k.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
        let a = RealMatrix::from_fn(n, m, |i, j| (i * 10 + j) as f64);
        let ka: Vec<f64> = (0..n * m).map(|i| (0..n * m).map(|j| k[(i, j)] * a.vec()[j]).sum()).collect();
        prop_assert_eq!(ka, a.transpose().vec());
    }

    #[test]
    fn commutation_swaps_kronecker_factors(seed in any::<u64>(), p in 1usize..4, q in 1usize..4, rr in 1usize..4, s in 1usize..4) {
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, p, q);
        let b = gaussian_matrix(&mut r, rr, s);
        let lhs = &kron(&a, &b) * &commutation(q, s);
        let rhs = &commutation(p, rr) * &kron(&b, &a);
        prop_assert!(lhs.rel_diff(&rhs) < 1e-14);
    }

    #[test]
    fn multivariate_gamma_recurrence(m in 2usize..6, extra in 0.01f64..20.0) {
        let a = (m as f64 - 1.0) / 2.0 + extra;
        let lhs = log_mv_gamma(m, a).unwrap();
        let rhs = 0.5 * (m as f64 - 1.0) * std::f64::consts::PI.ln() + ln_gamma(a) + log_mv_gamma(m - 1, a - 0.5).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        prop_assert!((log_mv_gamma(1, a).unwrap() - ln_gamma(a)).abs() < 1e-14);
    }
}

#[test]
fn multivariate_gamma_domain() {
    assert!(log_mv_gamma(2, 0.5).is_err());
    assert!(log_mv_gamma(0, 3.0).is_err());
    // Γ_2(3/2) = π^{1/2} Γ(3/2) Γ(1) = π/2
    assert!((log_mv_gamma(2, 1.5).unwrap() - (std::f64::consts::PI / 2.0).ln()).abs() < 1e-14);
}
