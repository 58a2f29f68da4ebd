#![allow(dead_code)]

use gbs_core::density::{logpdf_t, NormalizationConvention::BranchNormalized};
use gbs_core::elliptic::KernelFamily;
use gbs_core::linalg::{sym_eig, RealMatrix, SpdMatrix};
use gbs_core::quad::{integrate, QuadOptions};
use gbs_core::transform::GbsParams;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut TestRng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix from the eigenvectors of a random symmetric one.
pub fn orthogonal(rng: &mut TestRng, m: usize) -> RealMatrix {
    let a = gaussian_matrix(rng, m, m);
    let s = (&a + &a.transpose()).scale(0.5);
    sym_eig(&s).unwrap().vectors
}

/// SPD matrix with eigenvalues log-uniform in `[scale, scale * cond]`.
pub fn spd(rng: &mut TestRng, m: usize, scale: f64, cond: f64) -> SpdMatrix {
    let q = orthogonal(rng, m);
    let eig: Vec<f64> = (0..m).map(|_| scale * cond.powf(rng.random::<f64>())).collect();
    let d = RealMatrix::from_diag(&eig);
    SpdMatrix::new((&(&q * &d) * &q.transpose()).symmetrize()).unwrap()
}

pub fn params(rng: &mut TestRng, n: usize, m: usize, cond: f64) -> GbsParams {
    let xi = spd(rng, m, 0.3, cond);
    let beta = spd(rng, m, 0.5, cond);
    GbsParams::new(n, xi, beta).unwrap()
}

/// `(n, m)` with `1 <= m <= n <= max_n`.
pub fn dims(rng: &mut TestRng, max_n: usize) -> (usize, usize) {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=n);
    (n, m)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Two-sided Kolmogorov-Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Pearson chi-squared p-value of observed counts against expected counts,
/// with `bins - 1` degrees of freedom.
pub fn chi_squared_p_value(observed: &[usize], expected: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Wishart(`dof`, `scale` I_m) by the Bartlett decomposition.
pub fn wishart_scaled_identity(rng: &mut TestRng, m: usize, dof: usize, scale: f64) -> SpdMatrix {
    use rand_distr::{ChiSquared, Distribution};
    let mut a = RealMatrix::zeros(m, m);
    for i in 0..m {
        let chi = ChiSquared::new((dof - i) as f64).unwrap();
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    SpdMatrix::new((&a * &a.transpose()).scale(scale).symmetrize()).unwrap()
}

/// Log-density of Wishart(`dof`, `scale` I_m).
pub fn wishart_scaled_identity_logpdf(w: &SpdMatrix, dof: usize, scale: f64) -> f64 {
    let m = w.dim() as f64;
    let nu = dof as f64;
    0.5 * (nu - m - 1.0) * w.log_det()
        - w.matrix().trace() / (2.0 * scale)
        - 0.5 * nu * m * (2.0 * scale).ln()
        - gbs_core::special::log_mv_gamma(w.dim(), 0.5 * nu).unwrap()
}

/// Branch CDF of `t` for `m = 1` by quadrature from `β`.
pub fn branch_cdf(p: &GbsParams, fam: KernelFamily, x: f64) -> f64 {
    let beta = p.beta().matrix()[(0, 0)];
    let k = fam.with_dims(p.n(), 1).unwrap();
    integrate(
        |t| {
            logpdf_t(&SpdMatrix::scalar(1, t.max(beta)).unwrap(), p, &k, BranchNormalized)
                .unwrap()
                .exp()
        },
        beta,
        x,
        QuadOptions::default(),
    )
    .value
}

/// Pearson p-value of `draws` single-column samples (`n = 2`, Gaussian)
/// over `bins` equiprobable bins of the branch law.
pub fn single_column_chi_squared(seed: u64, draws: usize, bins: usize) -> f64 {
    use gbs_core::elliptic::RngState;
    use gbs_core::sample::sample_t;
    let p = GbsParams::with_scalar_beta(2, SpdMatrix::scalar(1, 0.8).unwrap(), 2.0).unwrap();
    let fam = KernelFamily::Gaussian;
    let k = fam.with_dims(2, 1).unwrap();
    // equiprobable bin edges by bisection on the quadrature CDF
    let mut edges = vec![2.0];
    for b in 1..bins {
        let target = b as f64 / bins as f64;
        let (mut lo, mut hi) = (*edges.last().unwrap(), 200.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if branch_cdf(&p, fam, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    let mut counts = vec![0usize; bins];
    let mut rng = RngState::from_seed(seed);
    for _ in 0..draws {
        let t = sample_t(&p, &k, &mut rng).unwrap().matrix()[(0, 0)];
        counts[edges.iter().rposition(|&e| t >= e).unwrap()] += 1;
    }
    chi_squared_p_value(&counts, &vec![draws as f64 / bins as f64; bins])
}

/// Mass of the branch density at `n = 6, m = 2`, Gaussian kernel, under the
/// proposal `T = Δ(I + W)Δ`, `W ~ Wishart(4, 1.5 I)`.
pub fn importance_mass(seed: u64, draws: usize) -> (f64, f64) {
    let xi = SpdMatrix::from_upper(2, &[1.0, 0.3, 0.8]).unwrap();
    let beta = SpdMatrix::from_upper(2, &[2.0, 0.5, 1.0]).unwrap();
    let p = GbsParams::new(6, xi, beta).unwrap();
    let k = KernelFamily::Gaussian.with_dims(6, 2).unwrap();
    let (dof, scale) = (4, 1.5);
    let mut r = rng(seed);
    let d = p.delta().matrix();
    let weights: Vec<f64> = (0..draws)
        .map(|_| {
            let w = wishart_scaled_identity(&mut r, 2, dof, scale);
            let inner = &RealMatrix::identity(2) + w.matrix();
            let t = SpdMatrix::new((&(d * &inner) * d).symmetrize()).unwrap();
            let log_q = wishart_scaled_identity_logpdf(&w, dof, scale) - 1.5 * p.log_det_beta();
            (logpdf_t(&t, &p, &k, BranchNormalized).unwrap() - log_q).exp()
        })
        .collect();
    let n = draws as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
