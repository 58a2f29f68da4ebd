//! Runtime oracle suite: cross-checks between independent computation paths
//! that a correct build must pass.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::density::{
    logpdf_t, logpdf_t_congruence, logpdf_t_inverse, logpdf_uni_gbs, logpdf_v, NormalizationConvention,
};
use crate::elliptic::{KernelFamily, KernelSpec, RngState};
use crate::fit::{loglik, ModelParams};
use crate::linalg::{sym_eig, RealMatrix, SpdMatrix};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::sample::SampleBatch;
use crate::transform::{branch_eigenvalues, forward_map, inverse_map_branch, jacobian_report, GbsParams};

use NormalizationConvention::{AsPublished, BranchNormalized};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest discrepancy seen.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{}  {:<width$}  worst {:.3e}  tol {:.0e}  cases {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.tolerance,
                c.cases
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(
            out,
            "{} checks, {} failed (seed {})",
            self.checks.len(),
            failed,
            self.seed
        );
        out
    }
}

fn check(name: &str, worst: f64, tolerance: f64, cases: usize) -> Check {
    Check {
        name: name.to_string(),
        passed: worst <= tolerance,
        worst,
        tolerance,
        cases,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn gaussian_matrix(rng: &mut RngState, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// SPD matrix with eigenvalues log-uniform in `[scale, scale * cond]`.
fn random_spd(rng: &mut RngState, m: usize, scale: f64, cond: f64) -> SpdMatrix {
    let a = gaussian_matrix(rng, m, m);
    let q = sym_eig(&(&a + &a.transpose()).scale(0.5)).expect("symmetric").vectors;
    let eig: Vec<f64> = (0..m).map(|_| scale * cond.powf(rng.random::<f64>())).collect();
    SpdMatrix::new((&(&q * &RealMatrix::from_diag(&eig)) * &q.transpose()).symmetrize()).expect("positive spectrum")
}

fn random_params(rng: &mut RngState, n: usize, m: usize, cond: f64) -> GbsParams {
    let xi = random_spd(rng, m, 0.3, cond);
    let beta = random_spd(rng, m, 0.5, cond);
    GbsParams::new(n, xi, beta).expect("valid dimensions")
}

fn random_dims(rng: &mut RngState, max_n: usize) -> (usize, usize) {
    let n = rng.random_range(1..=max_n);
    (n, rng.random_range(1..=n))
}

/// Determinant form, both singular-value forms and central differences.
pub fn jacobian_agreement(rng: &mut RngState, cases: usize) -> Vec<Check> {
    let mut analytic = 0.0f64;
    let mut fd = 0.0f64;
    for _ in 0..cases {
        let (n, m) = random_dims(rng, 4);
        let p = random_params(rng, n, m, 100.0);
        let v = gaussian_matrix(rng, n, m).scale(2.0);
        match jacobian_report(&v, &p, Some(1e-5)) {
            Ok(r) => {
                analytic = analytic.max(r.rel_disagreement);
                fd = fd.max(r.fd_disagreement.unwrap_or(f64::INFINITY));
            }
            Err(_) => analytic = f64::INFINITY,
        }
    }
    vec![
        check("jacobian: determinant vs singular-value forms", analytic, 1e-6, cases),
        check("jacobian: finite differences", fd, 1e-4, cases),
    ]
}

/// Matrix path at `n = m = 1` against the univariate density.
pub fn univariate_reduction() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (alpha, beta) in [(0.5, 1.0), (1.2, 3.0), (0.2, 0.4)] {
        for fam in [KernelFamily::Gaussian, KernelFamily::Kotz { q: 2.0, r: 1.0, s: 1.0 }] {
            let k = fam.with_dims(1, 1).expect("valid kernel");
            let p = GbsParams::with_scalar_beta(1, SpdMatrix::scalar(1, alpha).expect("positive"), beta).expect("1x1");
            for i in 0..50 {
                let t = beta * (0.05 + 0.1 * i as f64);
                let a = logpdf_t(&SpdMatrix::scalar(1, t).expect("positive"), &p, &k, AsPublished);
                let b = logpdf_uni_gbs(t, alpha, beta, &k);
                worst = worst.max(match (a, b) {
                    (Ok(a), Ok(b)) => rel(a, b),
                    _ => f64::INFINITY,
                });
                cases += 1;
            }
        }
    }
    check("univariate reduction", worst, 1e-12, cases)
}

/// Gaussian against `Kotz(1, 1/2, 1)` for the matrix densities.
pub fn kernel_identity(rng: &mut RngState, cases: usize) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (n, m) = random_dims(rng, 4);
        let p = random_params(rng, n, m, 50.0);
        let g = KernelFamily::Gaussian.with_dims(n, m).expect("valid kernel");
        let k = KernelFamily::GAUSSIAN_AS_KOTZ.with_dims(n, m).expect("valid kernel");
        let v = inverse_map_branch(&gaussian_matrix(rng, n, m), &p);
        let c = gaussian_matrix(rng, m, m);
        let Ok(v) = v else {
            continue;
        };
        let t = SpdMatrix::new((&v.transpose() * &v).symmetrize());
        let Ok(t) = t else {
            continue;
        };
        let pairs = [
            (
                logpdf_t(&t, &p, &g, BranchNormalized),
                logpdf_t(&t, &p, &k, BranchNormalized),
            ),
            (
                logpdf_t_inverse(&t.inverse(), &p, &g, AsPublished),
                logpdf_t_inverse(&t.inverse(), &p, &k, AsPublished),
            ),
            (
                logpdf_v(&v, &p, &g, BranchNormalized),
                logpdf_v(&v, &p, &k, BranchNormalized),
            ),
        ];
        for (a, b) in pairs {
            worst = worst.max(match (a, b) {
                (Ok(a), Ok(b)) => rel(a, b),
                _ => f64::INFINITY,
            });
        }
        if let Ok(y) = t.congruence(&c) {
            if let (Ok(a), Ok(b)) = (
                logpdf_t_congruence(&y, &c, &p, &g, AsPublished),
                logpdf_t_congruence(&y, &c, &p, &k, AsPublished),
            ) {
                worst = worst.max(rel(a, b));
            }
        }
    }
    check("kernel identity: Gaussian vs unit Kotz", worst, 1e-10, cases)
}

/// Quadrature of the single-column densities.
pub fn normalization() -> Vec<Check> {
    let opts = QuadOptions::default();
    let mut branch = 0.0f64;
    let mut cases = 0;
    for fam in [KernelFamily::Gaussian, KernelFamily::Kotz { q: 2.0, r: 1.0, s: 1.0 }] {
        for n in [1, 2, 3, 5] {
            let (xi, beta) = (0.8, 2.0);
            let p = GbsParams::with_scalar_beta(n, SpdMatrix::scalar(1, xi).expect("positive"), beta).expect("1x1");
            let k = fam.with_dims(n, 1).expect("valid kernel");
            let total = integrate_to_infinity(
                |t| {
                    let t = SpdMatrix::scalar(1, t.max(beta)).expect("positive");
                    logpdf_t(&t, &p, &k, BranchNormalized).map_or(f64::NAN, f64::exp)
                },
                beta,
                opts,
            );
            branch = branch.max((total.value - 1.0).abs());
            cases += 1;
        }
    }
    let mut uni = 0.0f64;
    let mut median = 0.0f64;
    for (alpha, beta) in [(0.5, 1.0), (1.2, 3.0)] {
        let k = KernelFamily::Gaussian.with_dims(1, 1).expect("valid kernel");
        let f = |t: f64| {
            if t > 0.0 {
                logpdf_uni_gbs(t, alpha, beta, &k).map_or(f64::NAN, f64::exp)
            } else {
                0.0
            }
        };
        uni = uni.max((integrate_to_infinity(f, 0.0, opts).value - 1.0).abs());
        median = median.max((integrate(f, 0.0, beta, opts).value - 0.5).abs());
    }
    vec![
        check("normalization: single-column branch density", branch, 1e-6, cases),
        check("normalization: univariate density", uni, 1e-8, 2),
        check("normalization: univariate median at beta", median, 1e-6, 2),
    ]
}

/// Forward map after the branch inverse, and the reverse on the branch.
pub fn round_trips(rng: &mut RngState, cases: usize) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (n, m) = random_dims(rng, 5);
        let p = random_params(rng, n, m, 100.0);
        let z = gaussian_matrix(rng, n, m).scale(2.0);
        let gap = inverse_map_branch(&z, &p).and_then(|v| {
            let back = forward_map(&v, &p)?.rel_diff(&z);
            let on_branch = branch_eigenvalues(&v, &p)?.iter().all(|&x| x.sqrt() > 1.0 + 1e-6);
            let again = if on_branch {
                inverse_map_branch(&forward_map(&v, &p)?, &p)?.rel_diff(&v)
            } else {
                0.0
            };
            Ok(back.max(again))
        });
        worst = worst.max(gap.unwrap_or(f64::INFINITY));
    }
    check("transform round trips", worst, 1e-10, cases)
}

/// Inverse and congruence densities against the direct change of variables.
pub fn transform_consistency(rng: &mut RngState, cases: usize) -> Check {
    let mut worst = 0.0f64;
    let k_fam = KernelFamily::Kotz { q: 2.0, r: 1.0, s: 1.0 };
    for _ in 0..cases {
        let n = rng.random_range(2..=6);
        let p = random_params(rng, n, 2, 50.0);
        let k = k_fam.with_dims(n, 2).expect("valid kernel");
        let s = random_spd(rng, 2, 0.1, 100.0);
        let c = gaussian_matrix(rng, 2, 2);
        let y = random_spd(rng, 2, 0.1, 100.0);
        let gap = (|| -> crate::Result<f64> {
            let direct = logpdf_t(&s.inverse(), &p, &k, AsPublished)? - 3.0 * s.log_det();
            let a = rel(direct, logpdf_t_inverse(&s, &p, &k, AsPublished)?);
            let c_inv = c.inverse()?;
            let t = SpdMatrix::new((&(&c_inv.transpose() * y.matrix()) * &c_inv).symmetrize())?;
            let direct = logpdf_t(&t, &p, &k, AsPublished)? - 3.0 * c.log_abs_det()?.0;
            Ok(a.max(rel(direct, logpdf_t_congruence(&y, &c, &p, &k, AsPublished)?)))
        })();
        worst = worst.max(gap.unwrap_or(f64::INFINITY));
    }
    check("inverse and congruence densities", worst, 1e-10, cases)
}

/// Expanded likelihood against summed densities.
pub fn likelihood_paths(rng: &mut RngState, cases: usize) -> Check {
    let mut worst = 0.0f64;
    let kernels = [
        KernelFamily::Gaussian,
        KernelFamily::Kotz { q: 2.0, r: 0.7, s: 1.0 },
        KernelFamily::Kotz {
            q: 0.5,
            r: 1.3,
            s: 0.75,
        },
    ];
    for case in 0..cases {
        let beta = 0.5 + rng.random::<f64>();
        let xi = random_spd(rng, 2, 0.3, 10.0);
        let kernel = kernels[case % kernels.len()];
        let gp = GbsParams::with_scalar_beta(6, xi.clone(), beta).expect("valid dimensions");
        let k: KernelSpec = kernel.with_dims(6, 2).expect("valid kernel");
        let data: Vec<SpdMatrix> = (0..20)
            .filter_map(|_| {
                let w = random_spd(rng, 2, 0.05, 50.0);
                SpdMatrix::new((&RealMatrix::identity(2) + w.matrix()).scale(beta)).ok()
            })
            .collect();
        let gap = (|| -> crate::Result<f64> {
            let batch = SampleBatch::new(data)?;
            let mut direct = 0.0;
            for t in batch.matrices() {
                direct += logpdf_t(t, &gp, &k, AsPublished)?;
            }
            let model = ModelParams { beta, xi, kernel };
            Ok(rel(direct, loglik(&model, &batch, 6, AsPublished)?))
        })();
        worst = worst.max(gap.unwrap_or(f64::INFINITY));
    }
    check("likelihood expansion vs summed densities", worst, 1e-8, cases)
}

/// Every check, with its random inputs drawn from `seed`.
pub fn run_all(seed: u64) -> ValidationReport {
    let root = RngState::from_seed(seed);
    let mut checks = jacobian_agreement(&mut root.split(1), 200);
    checks.push(univariate_reduction());
    checks.push(kernel_identity(&mut root.split(2), 100));
    checks.extend(normalization());
    checks.push(round_trips(&mut root.split(3), 100));
    checks.push(transform_consistency(&mut root.split(4), 100));
    checks.push(likelihood_paths(&mut root.split(5), 30));
    ValidationReport { seed, checks }
}
