//! Maximum likelihood for the matrix-variate Kotz-Birnbaum-Saunders model
//! with scalar scale `β I_m`, BIC* comparison against the Gaussian model, and
//! profiling over a grid of fixed Kotz powers `s`.

use std::f64::consts::LN_2;
use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::density::NormalizationConvention;
use crate::elliptic::{KernelFamily, KernelSpec, RngState};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, RealMatrix, SpdMatrix};
use crate::sample::SampleBatch;
use crate::special::log_mv_gamma;

/// Model family being fitted. For Kotz the power `s` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FitFamily {
    Gaussian,
    Kotz { s: f64 },
}

impl FitFamily {
    /// Free parameter count: `β`, the `m(m+1)/2` entries of `Ξ`, and `r, q`
    /// for Kotz.
    pub fn n_params(self, m: usize) -> usize {
        let base = 1 + m * (m + 1) / 2;
        match self {
            FitFamily::Gaussian => base,
            FitFamily::Kotz { .. } => base + 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitFamily::Gaussian => "gaussian",
            FitFamily::Kotz { .. } => "kotz",
        }
    }
}

/// A point in the model space: scalar scale, shape matrix and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub xi: SpdMatrix,
    pub kernel: KernelFamily,
}

impl ModelParams {
    /// `(r, q)` for a Kotz kernel.
    pub fn kotz_rq(&self) -> Option<(f64, f64)> {
        match self.kernel {
            KernelFamily::Kotz { q, r, .. } => Some((r, q)),
            KernelFamily::Gaussian => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Simplex iterations per run.
    pub max_iter: usize,
    /// Relative tolerance on the spread of objective values in the simplex.
    pub tol: f64,
    /// Number of seeded starts: the moment guess plus jittered copies.
    pub starts: usize,
    pub seed: u64,
    /// Standard deviation of the start jitter in the unconstrained space.
    pub start_jitter: f64,
    /// Fresh-simplex restarts from the best point after a run converges.
    pub polish_rounds: usize,
    pub convention: NormalizationConvention,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-10,
            starts: 5,
            seed: 0,
            start_jitter: 0.5,
            polish_rounds: 3,
            convention: NormalizationConvention::BranchNormalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub family: FitFamily,
    /// Degrees `n`, supplied rather than estimated.
    pub n: usize,
    pub options: FitOptions,
}

impl FitSpec {
    pub fn new(family: FitFamily, n: usize) -> Self {
        Self {
            family,
            n,
            options: FitOptions::default(),
        }
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    pub n: usize,
    pub m: usize,
    pub sample_size: usize,
    pub convention: NormalizationConvention,
    pub estimates: ModelParams,
    pub loglik_max: f64,
    pub n_p: usize,
    pub bic_star: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub seed: u64,
    /// Index of the start that produced the optimum; warm starts follow the
    /// seeded ones.
    pub best_start: usize,
}

/// Per-observation quantities reused by every likelihood evaluation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    m: usize,
    t: Vec<RealMatrix>,
    t_inv: Vec<RealMatrix>,
    eigenvalues: Vec<Vec<f64>>,
    sum_log_det: f64,
    min_eigenvalue: f64,
}

impl PreparedData {
    pub fn new(data: &SampleBatch) -> Result<Self> {
        let mut t = Vec::with_capacity(data.count());
        let mut t_inv = Vec::with_capacity(data.count());
        let mut eigenvalues = Vec::with_capacity(data.count());
        let mut sum_log_det = 0.0;
        let mut min_eigenvalue = f64::INFINITY;
        for obs in data.matrices() {
            let eig = sym_eig(obs.matrix())?;
            sum_log_det += eig.values.iter().map(|x| x.ln()).sum::<f64>();
            min_eigenvalue = min_eigenvalue.min(*eig.values.last().expect("m >= 1"));
            t_inv.push(eig.reconstruct_with(|x| 1.0 / x));
            t.push(obs.matrix().clone());
            eigenvalues.push(eig.values);
        }
        Ok(Self {
            m: data.m(),
            t,
            t_inv,
            eigenvalues,
            sum_log_det,
            min_eigenvalue,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn count(&self) -> usize {
        self.t.len()
    }

    /// Smallest eigenvalue over all observations.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// `tr(A B)` for symmetric `A`, `B`.
fn trace_product(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn ln_checked(x: f64, k: usize, what: &str) -> Result<f64> {
    if x > 0.0 {
        Ok(x.ln())
    } else if x == 0.0 {
        Ok(f64::NEG_INFINITY)
    } else {
        Err(Error::OutsideSupport(format!(
            "observation {k}: {what} = {x:.6e} is negative"
        )))
    }
}

/// Log-likelihood of an i.i.d. batch, expanded term by term with the first
/// product form of `G` and the eigenvalues `λ_{ik}` of each `T_k`.
///
/// An observation with some `λ_{ik} < β` lies outside the domain of the
/// expansion (when `n > m`, or under the branch convention) and is reported
/// as [`Error::OutsideSupport`].
pub fn loglik(params: &ModelParams, data: &SampleBatch, n: usize, conv: NormalizationConvention) -> Result<f64> {
    loglik_prepared(params, &PreparedData::new(data)?, n, conv)
}

pub fn loglik_prepared(
    params: &ModelParams,
    data: &PreparedData,
    n: usize,
    conv: NormalizationConvention,
) -> Result<f64> {
    let m = data.m;
    if params.xi.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            got: (params.xi.dim(), params.xi.dim()),
        });
    }
    if n < m {
        return Err(Error::Domain(format!("degrees n = {n} must be at least m = {m}")));
    }
    let beta = params.beta;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    // validates the Kotz domain
    KernelSpec::new(params.kernel, n, m)?;
    let k = data.count() as f64;
    let (nf, mf) = (n as f64, m as f64);

    let xi_inv = params.xi.inverse().into_matrix();
    let xi_inv2 = (&xi_inv * &xi_inv).symmetrize();
    let tr_xi_inv2 = xi_inv2.trace();
    let log_det_xi = params.xi.log_det();

    let mut g_terms = 0.0;
    let mut us = Vec::with_capacity(data.count());
    for (idx, ((t, t_inv), lambda)) in data.t.iter().zip(&data.t_inv).zip(&data.eigenvalues).enumerate() {
        let below = lambda.iter().any(|&l| l < beta);
        if below && (n > m || conv == NormalizationConvention::BranchNormalized) {
            return Err(Error::OutsideSupport(format!(
                "observation {idx}: an eigenvalue is below beta = {beta:.6e}"
            )));
        }
        for (i, &li) in lambda.iter().enumerate() {
            if n > m {
                g_terms += (nf - mf) * ln_checked(1.0 - beta / li, idx, "1 - β/λ")?;
            }
            g_terms += (1.0 + beta / li).ln();
            for &lj in &lambda[i + 1..] {
                g_terms += ln_checked(1.0 - beta * beta / (li * lj), idx, "1 - β²/(λ_i λ_j)")?;
            }
        }
        let u = trace_product(&xi_inv2, t) / beta + beta * trace_product(&xi_inv2, t_inv) - 2.0 * tr_xi_inv2;
        us.push(u.max(0.0));
    }

    let structural =
        g_terms - k * mf * LN_2 - k * log_mv_gamma(m, 0.5 * nf)? - 0.5 * k * nf * mf * beta.ln() - k * nf * log_det_xi
            + 0.5 * (nf - mf - 1.0) * data.sum_log_det
            + k * conv.log_offset(m);

    let kernel = match params.kernel {
        KernelFamily::Gaussian => -0.5 * k * nf * mf * LN_2 - 0.5 * us.iter().sum::<f64>(),
        KernelFamily::Kotz { q, r, s } => {
            let a = (2.0 * q + nf * mf - 2.0) / (2.0 * s);
            let constant = s.ln() + a * r.ln() + ln_gamma(0.5 * nf * mf) - ln_gamma(a);
            let mut body = -r * us.iter().map(|u| u.powf(s)).sum::<f64>();
            if q != 1.0 {
                for &u in &us {
                    if u == 0.0 {
                        if q < 1.0 {
                            return Err(Error::SingularKernel);
                        }
                        return Ok(f64::NEG_INFINITY);
                    }
                    body += (q - 1.0) * u.ln();
                }
            }
            k * constant + body
        }
    };
    let total = structural + kernel;
    if total.is_nan() {
        return Err(Error::Domain("log-likelihood is not a number".into()));
    }
    Ok(total)
}

/// Moment-style starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitGuess {
    pub beta: f64,
    pub xi: SpdMatrix,
    /// Whether any diagonal fell back to `α = 0.5`.
    pub alpha_fallback: bool,
    /// Whether `β` was pulled below the smallest observed eigenvalue.
    pub beta_clamped: bool,
}

/// Fallback shape when the arithmetic/harmonic ratio gives no estimate.
pub const ALPHA_FALLBACK: f64 = 0.5;
/// Eigenvalue floor applied to the starting shape matrix.
pub const XI_FLOOR: f64 = 1e-3;

/// Per diagonal index, the univariate moment estimates
/// `β_i = sqrt(s̄ h̄)` and `α_i = sqrt(2 (sqrt(s̄/h̄) - 1))` from the arithmetic
/// and harmonic means of `t_ii`; `β_0` is their geometric mean. Off the
/// diagonal, `ρ_ij sqrt(α_i α_j)` with `ρ_ij` the mean of
/// `t_ij / sqrt(t_ii t_jj)` over the sample.
///
/// With `bound = Some(b)`, `β_0` is capped at `0.99 b`.
pub fn init_guess(data: &SampleBatch, bound: Option<f64>) -> Result<InitGuess> {
    let m = data.m();
    let count = data.count();
    if count < 2 {
        return Err(Error::InvalidData(
            "initial guess needs at least two observations".into(),
        ));
    }
    let mut alphas = vec![0.0; m];
    let mut log_betas = 0.0;
    let mut alpha_fallback = false;
    for i in 0..m {
        let diag: Vec<f64> = data.matrices().iter().map(|t| t.matrix()[(i, i)]).collect();
        if diag.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidData(format!("diagonal entry {i} is not positive")));
        }
        let arith = diag.iter().sum::<f64>() / count as f64;
        let harm = count as f64 / diag.iter().map(|x| 1.0 / x).sum::<f64>();
        log_betas += 0.5 * (arith * harm).ln();
        let ratio = arith / harm;
        let inner = 2.0 * (ratio.sqrt() - 1.0);
        alphas[i] = if inner > 0.0 && inner.is_finite() && ratio > 1.0 + 1e-12 {
            inner.sqrt()
        } else {
            alpha_fallback = true;
            ALPHA_FALLBACK
        };
    }
    let mut beta = (log_betas / m as f64).exp();
    let mut beta_clamped = false;
    if let Some(b) = bound {
        if beta > 0.99 * b {
            beta = 0.99 * b;
            beta_clamped = true;
        }
    }
    let mut xi = RealMatrix::from_diag(&alphas);
    for i in 0..m {
        for j in i + 1..m {
            let rho = data
                .matrices()
                .iter()
                .map(|t| {
                    let a = t.matrix();
                    a[(i, j)] / (a[(i, i)] * a[(j, j)]).sqrt()
                })
                .sum::<f64>()
                / count as f64;
            let v = rho * (alphas[i] * alphas[j]).sqrt();
            xi[(i, j)] = v;
            xi[(j, i)] = v;
        }
    }
    let eig = sym_eig(&xi)?;
    let floored = eig.reconstruct_with(|x| x.max(XI_FLOOR));
    Ok(InitGuess {
        beta,
        xi: SpdMatrix::new(floored)?,
        alpha_fallback,
        beta_clamped,
    })
}

/// Ratio of the `β` upper bound to the smallest observed eigenvalue.
pub const BETA_BOUND_FACTOR: f64 = 1.0 - 1e-6;

/// Upper bound on `β` keeping every observation inside the expansion's
/// domain, or `None` when the model puts no constraint on it.
pub fn beta_bound(data: &PreparedData, n: usize, conv: NormalizationConvention) -> Option<f64> {
    let m = data.m();
    let constrained = n > m || m >= 2 || conv == NormalizationConvention::BranchNormalized;
    constrained.then(|| BETA_BOUND_FACTOR * data.min_eigenvalue())
}

/// Map between model parameters and the unconstrained search space:
/// logistic or log `β`, the Cholesky factor of `Ξ` with logged diagonal,
/// `ln r` and `ln(q - (2 - mn)/2)`.
struct Layout {
    m: usize,
    family: FitFamily,
    beta_max: Option<f64>,
    q_min: f64,
}

impl Layout {
    fn dim(&self) -> usize {
        self.family.n_params(self.m)
    }

    fn decode(&self, x: &[f64]) -> Option<ModelParams> {
        let beta = match self.beta_max {
            Some(b) => b / (1.0 + (-x[0]).exp()),
            None => x[0].exp(),
        };
        let m = self.m;
        let mut l = RealMatrix::zeros(m, m);
        let mut idx = 1;
        for i in 0..m {
            for j in 0..=i {
                l[(i, j)] = if i == j { x[idx].exp() } else { x[idx] };
                idx += 1;
            }
        }
        let xi = SpdMatrix::new((&l * &l.transpose()).symmetrize()).ok()?;
        let kernel = match self.family {
            FitFamily::Gaussian => KernelFamily::Gaussian,
            FitFamily::Kotz { s } => KernelFamily::Kotz {
                r: x[idx].exp(),
                q: self.q_min + x[idx + 1].exp(),
                s,
            },
        };
        (beta > 0.0 && beta.is_finite()).then_some(ModelParams { beta, xi, kernel })
    }

    fn encode(&self, p: &ModelParams) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim());
        x.push(match self.beta_max {
            Some(b) => {
                let beta = p.beta.min(0.999 * b);
                (beta / (b - beta)).ln()
            }
            None => p.beta.ln(),
        });
        let l = p.xi.matrix().cholesky()?;
        for i in 0..self.m {
            for j in 0..=i {
                x.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
            }
        }
        if let FitFamily::Kotz { .. } = self.family {
            let (r, q) = match p.kernel {
                KernelFamily::Kotz { q, r, .. } => (r, q),
                KernelFamily::Gaussian => (0.5, 1.0),
            };
            x.push(r.ln());
            x.push((q - self.q_min).max(1e-12).ln());
        }
        Ok(x)
    }
}

/// Outcome of one simplex minimisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimisation with the standard coefficients (reflection 1,
/// expansion 2, contraction 1/2, shrink 1/2).
///
/// Stops when the spread of objective values falls below
/// `tol * max(1, |f_best|)` and the simplex diameter below `1e-8` relative,
/// or after `max_iter` iterations.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> SimplexResult {
    let d = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += step * x0[i].abs().max(1.0);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evaluations)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[d]);
        let spread = if worst.is_finite() { worst - best } else { f64::INFINITY };
        let diameter = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)))
            .fold(0.0, f64::max);
        if spread <= tol * best.abs().max(1.0) && diameter <= 1e-8 {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (c - w)).collect() };
        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[d] {
            let c = along(0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        } else {
            let c = along(-0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        };
        if fc < values[d].min(fr) {
            simplex[d] = contracted;
            values[d] = fc;
            continue;
        }
        for i in 1..=d {
            let p: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            values[i] = eval(&p, &mut evaluations);
            simplex[i] = p;
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("nonempty simplex");
    SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations,
        converged,
    }
}

const SIMPLEX_STEP: f64 = 0.2;

/// Maximum likelihood fit with seeded multi-starts.
pub fn fit_mle(data: &SampleBatch, spec: &FitSpec) -> Result<FitResult> {
    fit_mle_with_starts(data, spec, &[])
}

/// Like [`fit_mle`], with extra warm starts tried after the seeded ones.
pub fn fit_mle_with_starts(data: &SampleBatch, spec: &FitSpec, warm: &[ModelParams]) -> Result<FitResult> {
    let prepared = PreparedData::new(data)?;
    let m = prepared.m();
    let n = spec.n;
    let opts = spec.options;
    if n < m {
        return Err(Error::Domain(format!("degrees n = {n} must be at least m = {m}")));
    }
    if let FitFamily::Kotz { s } = spec.family {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("Kotz power s must be positive, got {s}")));
        }
    }
    let bound = beta_bound(&prepared, n, opts.convention);
    let layout = Layout {
        m,
        family: spec.family,
        beta_max: bound,
        q_min: (2.0 - (n * m) as f64) / 2.0,
    };
    let objective = |x: &[f64]| -> f64 {
        match layout.decode(x) {
            Some(p) => match loglik_prepared(&p, &prepared, n, opts.convention) {
                Ok(l) if l.is_finite() => -l,
                _ => f64::INFINITY,
            },
            None => f64::INFINITY,
        }
    };

    let guess = init_guess(data, bound)?;
    let seed_params = ModelParams {
        beta: guess.beta,
        xi: guess.xi,
        kernel: match spec.family {
            FitFamily::Gaussian => KernelFamily::Gaussian,
            FitFamily::Kotz { s } => KernelFamily::Kotz { q: 1.0, r: 0.5, s },
        },
    };
    let base = layout.encode(&seed_params)?;
    let mut rng = RngState::from_seed(opts.seed);
    let mut starts = vec![base.clone()];
    for _ in 1..opts.starts.max(1) {
        starts.push(
            base.iter()
                .map(|&v| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v + opts.start_jitter * e
                })
                .collect(),
        );
    }
    for w in warm {
        let mut p = w.clone();
        if let (KernelFamily::Gaussian, FitFamily::Kotz { s }) = (p.kernel, spec.family) {
            p.kernel = KernelFamily::Kotz { q: 1.0, r: 0.5, s };
        }
        starts.push(layout.encode(&p)?);
    }

    let mut best: Option<(usize, SimplexResult)> = None;
    let mut iterations = 0;
    let mut evaluations = 0;
    for (idx, x0) in starts.iter().enumerate() {
        let mut run = nelder_mead(objective, x0, SIMPLEX_STEP, opts.max_iter, opts.tol);
        iterations += run.iterations;
        evaluations += run.evaluations;
        for _ in 0..opts.polish_rounds {
            if !run.f.is_finite() {
                break;
            }
            let again = nelder_mead(objective, &run.x, SIMPLEX_STEP, opts.max_iter, opts.tol);
            iterations += again.iterations;
            evaluations += again.evaluations;
            let gain = run.f - again.f;
            let converged = again.converged;
            if again.f <= run.f {
                run = again;
            }
            run.converged = converged;
            if gain <= opts.tol * run.f.abs().max(1.0) {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, b)| run.f < b.f) {
            best = Some((idx, run));
        }
    }
    let (best_start, run) = best.expect("at least one start");
    if !run.f.is_finite() {
        return Err(Error::Domain("no start produced a finite likelihood".into()));
    }
    let estimates = layout
        .decode(&run.x)
        .expect("finite objective implies valid parameters");
    let loglik_max = -run.f;
    let n_p = spec.family.n_params(m);
    Ok(FitResult {
        family: spec.family,
        n,
        m,
        sample_size: prepared.count(),
        convention: opts.convention,
        estimates,
        loglik_max,
        n_p,
        bic_star: bic_star(loglik_max, n_p, prepared.count()),
        converged: run.converged,
        iterations,
        evaluations,
        seed: opts.seed,
        best_start,
    })
}

/// `BIC* = -2 L + n_p (ln(K + 2) - ln 24)` with `K` the sample size.
pub fn bic_star(loglik_max: f64, n_p: usize, sample_size: usize) -> f64 {
    -2.0 * loglik_max + n_p as f64 * ((sample_size as f64 + 2.0).ln() - 24f64.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceGrade {
    Weak,
    Positive,
    Strong,
    VeryStrong,
}

impl fmt::Display for EvidenceGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceGrade::Weak => "Weak",
            EvidenceGrade::Positive => "Positive",
            EvidenceGrade::Strong => "Strong",
            EvidenceGrade::VeryStrong => "Very strong",
        })
    }
}

/// Grade of an absolute BIC* difference: `[0,2)` weak, `[2,6)` positive,
/// `[6,10)` strong, `>= 10` very strong.
pub fn evidence_grade(diff: f64) -> Result<EvidenceGrade> {
    if diff.is_nan() || diff < 0.0 {
        return Err(Error::NegativeDiff(diff));
    }
    Ok(if diff < 2.0 {
        EvidenceGrade::Weak
    } else if diff < 6.0 {
        EvidenceGrade::Positive
    } else if diff < 10.0 {
        EvidenceGrade::Strong
    } else {
        EvidenceGrade::VeryStrong
    })
}

/// Which model the smaller BIC* points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Favours {
    Kotz,
    Gaussian,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub s: f64,
    pub fit: FitResult,
    /// `BIC*_K - BIC*_G`.
    pub diff: f64,
    pub grade: EvidenceGrade,
    pub favours: Favours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub baseline: FitResult,
    pub rows: Vec<ProfileRow>,
}

pub const DEFAULT_S_GRID: [f64; 10] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 3.0, 4.0, 5.0];

/// Fits one Kotz row with fixed `s`, warm-started from the Gaussian optimum
/// so that at `s = 1` the nested model cannot do worse.
pub fn fit_kotz_row(
    data: &SampleBatch,
    s: f64,
    n: usize,
    options: FitOptions,
    baseline: &FitResult,
) -> Result<FitResult> {
    let spec = FitSpec::new(FitFamily::Kotz { s }, n).with_options(options);
    fit_mle_with_starts(data, &spec, std::slice::from_ref(&baseline.estimates))
}

/// Gaussian baseline and one Kotz fit per `s`.
pub fn profile_s_grid(data: &SampleBatch, s_values: &[f64], n: usize, options: FitOptions) -> Result<ProfileTable> {
    let baseline = fit_mle(data, &FitSpec::new(FitFamily::Gaussian, n).with_options(options))?;
    let fits = s_values
        .iter()
        .map(|&s| Ok((s, fit_kotz_row(data, s, n, options, &baseline)?)))
        .collect::<Result<Vec<_>>>()?;
    ProfileTable::from_fits(baseline, fits)
}

impl ProfileTable {
    /// Assembles a table from fits computed elsewhere (e.g. in parallel).
    pub fn from_fits(baseline: FitResult, fits: Vec<(f64, FitResult)>) -> Result<Self> {
        let rows = fits
            .into_iter()
            .map(|(s, fit)| {
                let diff = fit.bic_star - baseline.bic_star;
                let favours = if diff < 0.0 {
                    Favours::Kotz
                } else if diff > 0.0 {
                    Favours::Gaussian
                } else {
                    Favours::Neither
                };
                Ok(ProfileRow {
                    s,
                    grade: evidence_grade(diff.abs())?,
                    favours,
                    fit,
                    diff,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { baseline, rows })
    }

    /// Column headers: `s`, `beta`, the upper triangle of `Ξ`, `r`, `q` and
    /// `BIC*_K-BIC*_G` (eight columns for `m = 2`).
    pub fn headers(&self) -> Vec<String> {
        let m = self.baseline.m;
        let mut h = vec!["s".to_string(), "beta".to_string()];
        for i in 0..m {
            for j in i..m {
                h.push(format!("alpha{}{}", i + 1, j + 1));
            }
        }
        h.extend(["r", "q", "BIC*_K-BIC*_G"].map(String::from));
        h
    }

    fn cells(fit: &FitResult, s: Option<f64>, diff: Option<f64>) -> Vec<String> {
        let dash = || "-".to_string();
        let mut c = vec![
            s.map_or_else(dash, |s| format!("{s}")),
            format!("{:.6}", fit.estimates.beta),
        ];
        c.extend(fit.estimates.xi.upper().iter().map(|x| format!("{x:.6}")));
        match fit.estimates.kotz_rq() {
            Some((r, q)) => {
                c.push(format!("{r:.6}"));
                c.push(format!("{q:.6}"));
            }
            None => {
                c.push(dash());
                c.push(dash());
            }
        }
        c.push(diff.map_or_else(dash, |d| format!("{d:.5}")));
        c
    }

    /// Aligned text: the Kotz rows, the Gaussian baseline row, then the
    /// evidence grades.
    pub fn to_text(&self) -> String {
        let headers = self.headers();
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| Self::cells(&r.fit, Some(r.s), Some(r.diff)))
            .collect();
        let mut baseline = Self::cells(&self.baseline, None, None);
        baseline[0] = "gauss".to_string();
        rows.push(baseline);
        let widths: Vec<usize> = (0..headers.len())
            .map(|j| {
                rows.iter()
                    .map(|r| r[j].len())
                    .chain([headers[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = String::new();
        out.push_str(&line(&headers));
        out.push('\n');
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        out.push_str(&rule);
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&format!(
            "Gaussian baseline: loglik {:.6}, BIC* {:.6}, n_p {}\n",
            self.baseline.loglik_max, self.baseline.bic_star, self.baseline.n_p
        ));
        out.push_str(&format!(
            "BIC* = -2 loglik + n_p (ln(K + 2) - ln 24), K = {} (sample size)\n\n",
            self.baseline.sample_size
        ));
        out.push_str("evidence (|BIC*_K - BIC*_G|; smaller BIC* is preferred)\n");
        for r in &self.rows {
            let note = if r.fit.converged { "" } else { "  (not converged)" };
            out.push_str(&format!(
                "  s = {:<5} |diff| = {:>10.5}  {:<11}  favours {}{}\n",
                r.s,
                r.diff.abs(),
                r.grade.to_string(),
                match r.favours {
                    Favours::Kotz => "Kotz",
                    Favours::Gaussian => "Gaussian",
                    Favours::Neither => "neither",
                },
                note
            ));
        }
        out
    }
}
