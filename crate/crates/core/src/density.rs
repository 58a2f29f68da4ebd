//! Log-densities of the Birnbaum-Saunders family: the univariate and
//! element-wise constructions, and the matrix transformation densities of
//! `V`, `T = V'V`, `T^{-1}` and `C'TC`.
//!
//! Matrix densities come in two normalisations. `AsPublished` evaluates the
//! closed form with the Stiefel volume `π^{nm/2}/Γ_m[n/2]` on every `T > 0`.
//! That constant is short by `2^m` for the pushforward of one branch of the
//! transformation, so `BranchNormalized` adds `m ln 2` and restricts the
//! support to the branch region, where every eigenvalue of `β^{-1}T` is at
//! least 1. Only the latter integrates to one for `m >= 1` (`n = m = 1`
//! excepted, where the published form is already a density on `t > 0`).
//!
//! A density is `-inf` wherever `G` vanishes, which happens on the boundary
//! of the branch region.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::elliptic::{KernelFamily, KernelSpec};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, RealMatrix, SpdMatrix, SymEigen};
use crate::special::log_mv_gamma;
use crate::transform::{
    branch_eigenvalues, forward_map, log_g, log_jacobian_det_form, GForm, GbsParams, TIE_TOL, UNIT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationConvention {
    #[serde(rename = "as-published")]
    AsPublished,
    #[default]
    #[serde(rename = "branch")]
    BranchNormalized,
}

impl NormalizationConvention {
    /// Additive log offset relative to the published constant for `T`-type
    /// densities of order `m`.
    pub fn log_offset(self, m: usize) -> f64 {
        match self {
            Self::AsPublished => 0.0,
            Self::BranchNormalized => m as f64 * LN_2,
        }
    }
}

impl std::str::FromStr for NormalizationConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-published" => Ok(Self::AsPublished),
            "branch" => Ok(Self::BranchNormalized),
            other => Err(Error::Domain(format!(
                "unknown convention {other:?}, expected as-published or branch"
            ))),
        }
    }
}

fn check_kernel(kernel: &KernelSpec, n: usize, m: usize) -> Result<()> {
    if (kernel.n(), kernel.m()) != (n, m) {
        return Err(Error::DimensionMismatch {
            expected: (n, m),
            got: (kernel.n(), kernel.m()),
        });
    }
    Ok(())
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{what} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// `(sqrt(x/b) - sqrt(b/x))^2 = x/b + b/x - 2`, never negative.
fn bs_gap(x: f64, b: f64) -> f64 {
    let r = (x / b).sqrt();
    let d = r - 1.0 / r;
    d * d
}

/// Univariate generalised BS log-density
/// `ln[t^{-3/2}(t+β)/(2α sqrt β)] + ln h((t/β + β/t - 2)/α^2)`.
pub fn logpdf_uni_gbs(t: f64, alpha: f64, beta: f64, kernel: &KernelSpec) -> Result<f64> {
    check_kernel(kernel, 1, 1)?;
    check_positive(t, "t")?;
    check_positive(alpha, "alpha")?;
    check_positive(beta, "beta")?;
    let jac = -1.5 * t.ln() + (t + beta).ln() - (2.0 * alpha).ln() - 0.5 * beta.ln();
    Ok(jac + kernel.log_h(bs_gap(t, beta) / (alpha * alpha))?)
}

/// Square-root GBS log-density of `v = sqrt(t)`:
/// `ln[(1 + β v^{-2})/(α sqrt β)] + ln h((v^2/β + β/v^2 - 2)/α^2)`.
pub fn logpdf_sqrt_gbs(v: f64, alpha: f64, beta: f64, kernel: &KernelSpec) -> Result<f64> {
    check_kernel(kernel, 1, 1)?;
    check_positive(v, "v")?;
    check_positive(alpha, "alpha")?;
    check_positive(beta, "beta")?;
    let jac = (1.0 + beta / (v * v)).ln() - alpha.ln() - 0.5 * beta.ln();
    Ok(jac + kernel.log_h(bs_gap(v * v, beta) / (alpha * alpha))?)
}

/// Shape and scale matrices of the element-by-element construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementwiseParams {
    alpha: RealMatrix,
    beta: RealMatrix,
}

impl ElementwiseParams {
    pub fn new(alpha: RealMatrix, beta: RealMatrix) -> Result<Self> {
        if alpha.shape() != beta.shape() {
            return Err(Error::DimensionMismatch {
                expected: alpha.shape(),
                got: beta.shape(),
            });
        }
        for &x in alpha.as_slice().iter().chain(beta.as_slice()) {
            check_positive(x, "element-wise parameter")?;
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &RealMatrix {
        &self.alpha
    }

    pub fn beta(&self) -> &RealMatrix {
        &self.beta
    }
}

/// Element-wise GBS log-density: every entry gets its own univariate
/// Jacobian and the kernel sees the summed standardised gaps.
pub fn logpdf_elementwise(t: &RealMatrix, params: &ElementwiseParams, kernel: &KernelSpec) -> Result<f64> {
    let (n, m) = params.alpha.shape();
    if t.shape() != (n, m) {
        return Err(Error::DimensionMismatch {
            expected: (n, m),
            got: t.shape(),
        });
    }
    check_kernel(kernel, n, m)?;
    let mut jac = 0.0;
    let mut u = 0.0;
    for ((&x, &a), &b) in t
        .as_slice()
        .iter()
        .zip(params.alpha.as_slice())
        .zip(params.beta.as_slice())
    {
        check_positive(x, "entry of T")?;
        jac += -1.5 * x.ln() + (x + b).ln() - (2.0 * a).ln() - 0.5 * b.ln();
        u += bs_gap(x, b) / (a * a);
    }
    Ok(jac + kernel.log_h(u)?)
}

/// Outcome of a matrix density evaluation with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEval {
    pub log_density: f64,
    /// Sign of `G`: `-1` marks a point where the published formula is
    /// negative (it is reported through `|G|`), `0` a zero of `G`.
    pub g_sign: f64,
    /// Eigenvalues of `β^{-1} T` (or the transformed analogue), descending.
    pub eigenvalues: Vec<f64>,
    /// Whether two eigenvalues coincide within the tie tolerance.
    pub tied: bool,
    /// Argument of the kernel.
    pub kernel_arg: f64,
}

/// `tr Ξ^{-2}(A + A^{-1} - 2I)` for `A = P diag(x) P'`, written as the
/// squared Frobenius norm of `Ξ^{-1} P diag(sqrt x - 1/sqrt x)`.
fn kernel_arg(xi_inv: &RealMatrix, eig: &SymEigen) -> f64 {
    let mut w = xi_inv * &eig.vectors;
    for (j, &x) in eig.values.iter().enumerate() {
        let r = x.sqrt();
        let d = r - 1.0 / r;
        for i in 0..w.rows() {
            w[(i, j)] *= d;
        }
    }
    w.as_slice().iter().map(|x| x * x).sum()
}

fn has_ties(x: &[f64]) -> bool {
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (0..x.len()).any(|i| (i + 1..x.len()).any(|j| (x[i] - x[j]).abs() <= TIE_TOL * scale))
}

/// Snaps values within [`UNIT_TOL`] of 1 so that boundary points give an
/// exact zero of `G`.
fn snap_unit(x: &mut [f64]) {
    for v in x.iter_mut() {
        if (*v - 1.0).abs() < UNIT_TOL {
            *v = 1.0;
        }
    }
}

/// `(nm/2) ln π - m ln 2 - ln Γ_m[n/2] - (n/2) ln|β| - n ln|Ξ|` plus the
/// convention offset.
fn log_constant(n: usize, m: usize, log_det_beta: f64, log_det_xi: f64, conv: NormalizationConvention) -> Result<f64> {
    let (nf, mf) = (n as f64, m as f64);
    Ok(
        0.5 * nf * mf * PI.ln() - mf * LN_2 - log_mv_gamma(m, 0.5 * nf)? - 0.5 * nf * log_det_beta - nf * log_det_xi
            + conv.log_offset(m),
    )
}

struct Assembly<'a> {
    n: usize,
    xi_inv: &'a RealMatrix,
    log_const: f64,
    kernel: &'a KernelSpec,
    conv: NormalizationConvention,
}

impl Assembly<'_> {
    /// Combines the eigen-structure of the whitened matrix with a
    /// determinant power term already in log form.
    fn finish(&self, mut eig: SymEigen, log_det_term: f64) -> Result<DensityEval> {
        snap_unit(&mut eig.values);
        let tied = has_ties(&eig.values);
        let (log_abs_g, g_sign) = log_g(&eig.values, self.n, GForm::First);
        let u = kernel_arg(self.xi_inv, &eig);
        if g_sign == 0.0 {
            return Ok(DensityEval {
                log_density: f64::NEG_INFINITY,
                g_sign,
                eigenvalues: eig.values,
                tied,
                kernel_arg: u,
            });
        }
        if self.conv == NormalizationConvention::BranchNormalized {
            if let Some(x) = eig.values.iter().find(|&&x| x < 1.0) {
                return Err(Error::OutsideSupport(format!(
                    "eigenvalue {x:.6e} of the whitened matrix is below 1"
                )));
            }
        }
        let log_density = self.log_const + log_abs_g + log_det_term + self.kernel.log_h(u)?;
        Ok(DensityEval {
            log_density,
            g_sign,
            eigenvalues: eig.values,
            tied,
            kernel_arg: u,
        })
    }
}

fn assembly<'a>(params: &'a GbsParams, kernel: &'a KernelSpec, conv: NormalizationConvention) -> Result<Assembly<'a>> {
    check_kernel(kernel, params.n(), params.m())?;
    Ok(Assembly {
        n: params.n(),
        xi_inv: params.xi_inv(),
        log_const: log_constant(params.n(), params.m(), params.log_det_beta(), params.log_det_xi(), conv)?,
        kernel,
        conv,
    })
}

fn check_dim(t: &SpdMatrix, m: usize) -> Result<()> {
    if t.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            got: (t.dim(), t.dim()),
        });
    }
    Ok(())
}

/// Log-density of `T = V'V` with eigenvalues taken from `Δ^{-1} T Δ^{-1}`.
pub fn logpdf_t_detailed(
    t: &SpdMatrix,
    params: &GbsParams,
    kernel: &KernelSpec,
    conv: NormalizationConvention,
) -> Result<DensityEval> {
    check_dim(t, params.m())?;
    let asm = assembly(params, kernel, conv)?;
    let eig = sym_eig(&params.whiten(t.matrix()))?;
    // ln|T| = ln|β| + Σ ln δ_i
    let log_det_t = params.log_det_beta() + eig.values.iter().map(|x| x.ln()).sum::<f64>();
    let power = 0.5 * (params.n() as f64 - params.m() as f64 - 1.0) * log_det_t;
    asm.finish(eig, power)
}

/// Log-density of `T`. Uses the scalar-scale path when `β = c I_m`.
pub fn logpdf_t(t: &SpdMatrix, params: &GbsParams, kernel: &KernelSpec, conv: NormalizationConvention) -> Result<f64> {
    match params.scalar_beta() {
        Some(b) => logpdf_t_scalar_beta(t, params.n(), params.xi(), b, kernel, conv),
        None => Ok(logpdf_t_detailed(t, params, kernel, conv)?.log_density),
    }
}

/// Log-density of `T` for a scalar scale `β I_m`, driven by the eigenvalues
/// of `T` itself.
pub fn logpdf_t_scalar_beta(
    t: &SpdMatrix,
    n: usize,
    xi: &SpdMatrix,
    beta: f64,
    kernel: &KernelSpec,
    conv: NormalizationConvention,
) -> Result<f64> {
    let m = xi.dim();
    check_dim(t, m)?;
    check_kernel(kernel, n, m)?;
    check_positive(beta, "beta")?;
    if n < m {
        return Err(Error::Domain(format!("degrees n = {n} must be at least m = {m}")));
    }
    let xi_inv = xi.inverse().into_matrix();
    let log_const = log_constant(n, m, m as f64 * beta.ln(), xi.log_det(), conv)?;
    let mut eig = sym_eig(t.matrix())?;
    let log_det_t: f64 = eig.values.iter().map(|x| x.ln()).sum();
    for x in &mut eig.values {
        *x /= beta;
    }
    let asm = Assembly {
        n,
        xi_inv: &xi_inv,
        log_const,
        kernel,
        conv,
    };
    let power = 0.5 * (n as f64 - m as f64 - 1.0) * log_det_t;
    Ok(asm.finish(eig, power)?.log_density)
}

/// Closed form for the Gaussian kernel:
/// `G(δ) |T|^{(n-m-1)/2} etr(-Ξ^{-2}(...)/2) / (2^{m(n+2)/2} Γ_m[n/2] |β|^{n/2} |Ξ|^n)`.
pub fn logpdf_t_gaussian(t: &SpdMatrix, params: &GbsParams, conv: NormalizationConvention) -> Result<f64> {
    let (n, m) = (params.n(), params.m());
    check_dim(t, m)?;
    let (nf, mf) = (n as f64, m as f64);
    let mut eig = sym_eig(&params.whiten(t.matrix()))?;
    snap_unit(&mut eig.values);
    let (log_abs_g, sign) = log_g(&eig.values, n, GForm::First);
    if sign == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if conv == NormalizationConvention::BranchNormalized && eig.values.iter().any(|&x| x < 1.0) {
        return Err(Error::OutsideSupport("an eigenvalue of β^{-1}T is below 1".into()));
    }
    let log_det_t = params.log_det_beta() + eig.values.iter().map(|x| x.ln()).sum::<f64>();
    let u = kernel_arg(params.xi_inv(), &eig);
    Ok(log_abs_g
        - 0.5 * mf * (nf + 2.0) * LN_2
        - log_mv_gamma(m, 0.5 * nf)?
        - 0.5 * nf * params.log_det_beta()
        - nf * params.log_det_xi()
        + 0.5 * (nf - mf - 1.0) * log_det_t
        - 0.5 * u
        + conv.log_offset(m))
}

/// Log-density of `S = T^{-1}`, evaluated from its own closed form with
/// `ρ_i = ch_i(β^{-1} S^{-1})` and the power `|S|^{-(n+m+1)/2}`.
pub fn logpdf_t_inverse(
    s: &SpdMatrix,
    params: &GbsParams,
    kernel: &KernelSpec,
    conv: NormalizationConvention,
) -> Result<f64> {
    check_dim(s, params.m())?;
    let asm = assembly(params, kernel, conv)?;
    // Δ^{-1} S^{-1} Δ^{-1} is the inverse of Δ S Δ, so it shares eigenvectors
    // with reciprocal eigenvalues.
    let outer = s.sandwich(params.delta());
    let mut eig = sym_eig(outer.matrix())?;
    eig.values.iter_mut().for_each(|x| *x = 1.0 / *x);
    eig = reorder_descending(eig);
    let nf = params.n() as f64;
    let mf = params.m() as f64;
    let power = -0.5 * (nf + mf + 1.0) * s.log_det();
    Ok(asm.finish(eig, power)?.log_density)
}

/// Log-density of `Y = C'TC` for nonsingular `C`, from its closed form with
/// `θ_i = ch_i((C'βC)^{-1} Y)`, the power `|Y|^{(n-m-1)/2}` and `|C|^{-n}`.
pub fn logpdf_t_congruence(
    y: &SpdMatrix,
    c: &RealMatrix,
    params: &GbsParams,
    kernel: &KernelSpec,
    conv: NormalizationConvention,
) -> Result<f64> {
    let m = params.m();
    check_dim(y, m)?;
    if c.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            got: c.shape(),
        });
    }
    let (log_abs_c, sign) = c.log_abs_det().map_err(|_| Error::SingularCongruence)?;
    if sign == 0.0 || !log_abs_c.is_finite() {
        return Err(Error::SingularCongruence);
    }
    let asm = assembly(params, kernel, conv)?;
    // (ΔC)'^{-1} Y (ΔC)^{-1} has the spectrum of (C'βC)^{-1} Y
    let dc_inv = (params.delta().matrix() * c)
        .inverse()
        .map_err(|_| Error::SingularCongruence)?;
    let whitened = (&(&dc_inv.transpose() * y.matrix()) * &dc_inv).symmetrize();
    let eig = sym_eig(&whitened)?;
    let nf = params.n() as f64;
    let mf = m as f64;
    let power = 0.5 * (nf - mf - 1.0) * y.log_det() - nf * log_abs_c;
    Ok(asm.finish(eig, power)?.log_density)
}

fn reorder_descending(eig: SymEigen) -> SymEigen {
    let m = eig.values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let values = idx.iter().map(|&i| eig.values[i]).collect();
    let vectors = RealMatrix::from_fn(m, m, |r, c| eig.vectors[(r, idx[c])]);
    SymEigen { values, vectors }
}

/// Which Jacobian evaluation backs [`logpdf_v_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianPath {
    SingularValue,
    Determinant,
}

/// Log-density of `V`: `ln J(V) + ln h(tr Z'Z)`.
///
/// `h J` integrates to one over the branch region and to `2^m` over all of
/// `R^{n x m}`, so `BranchNormalized` only restricts the support here; no
/// constant changes.
pub fn logpdf_v(v: &RealMatrix, params: &GbsParams, kernel: &KernelSpec, conv: NormalizationConvention) -> Result<f64> {
    logpdf_v_with(v, params, kernel, conv, JacobianPath::SingularValue)
}

pub fn logpdf_v_with(
    v: &RealMatrix,
    params: &GbsParams,
    kernel: &KernelSpec,
    conv: NormalizationConvention,
    path: JacobianPath,
) -> Result<f64> {
    check_kernel(kernel, params.n(), params.m())?;
    let g2 = branch_eigenvalues(v, params)?;
    if conv == NormalizationConvention::BranchNormalized {
        if let Some(x) = g2.iter().find(|&&x| x < 1.0) {
            return Err(Error::OutsideSupport(format!(
                "squared singular value {x:.6e} of V Δ^{{-1}} is below 1"
            )));
        }
    }
    let log_jac = match path {
        JacobianPath::SingularValue => {
            let mut x = g2.clone();
            snap_unit(&mut x);
            let (log_abs_g, sign) = log_g(&x, params.n(), GForm::First);
            if sign == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let nf = params.n() as f64;
            log_abs_g - nf * params.log_det_xi() - 0.5 * nf * params.log_det_beta()
        }
        JacobianPath::Determinant => log_jacobian_det_form(v, params)?.0,
    };
    let z = forward_map(v, params)?;
    let u = z.as_slice().iter().map(|x| x * x).sum();
    Ok(log_jac + kernel.log_h(u)?)
}

/// Kernel family helper: the kernel bound to the dimensions of `params`.
pub fn kernel_for(family: KernelFamily, params: &GbsParams) -> Result<KernelSpec> {
    family.with_dims(params.n(), params.m())
}
