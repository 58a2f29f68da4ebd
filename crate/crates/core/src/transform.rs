//! The matrix transformation `Z = (V Δ^{-1} - V'^+ Δ) Ξ^{-1}` between an
//! `n x m` matrix `V` of full column rank and an elliptical matrix `Z`, its
//! branch inverse and three independent Jacobian computations.
//!
//! The map is not one-to-one: every `Z` has `2^m` preimages, one for each
//! choice of `l` or `-1/l` per singular value of `V Δ^{-1}`. The inverse here
//! always picks the branch where every singular value of `V Δ^{-1}` is at
//! least 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutation, kron, pinv, svd_complete, RealMatrix, SpdMatrix};

/// Relative tolerance under which two singular values (or eigenvalues) are
/// treated as tied.
pub const TIE_TOL: f64 = 1e-10;

/// Distance from 1 under which a singular value of `V Δ^{-1}` sits on the
/// zero set of the Jacobian.
pub const UNIT_TOL: f64 = 1e-12;

/// Parameters `(n, Ξ, β)` with the cached square root `Δ = β^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct GbsParams {
    n: usize,
    xi: SpdMatrix,
    beta: SpdMatrix,
    delta: SpdMatrix,
    delta_inv: RealMatrix,
    xi_inv: RealMatrix,
    log_det_xi: f64,
    log_det_beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    xi: SpdMatrix,
    beta: SpdMatrix,
}

impl TryFrom<RawParams> for GbsParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        GbsParams::new(raw.n, raw.xi, raw.beta)
    }
}

impl From<GbsParams> for RawParams {
    fn from(p: GbsParams) -> Self {
        RawParams {
            n: p.n,
            xi: p.xi,
            beta: p.beta,
        }
    }
}

impl GbsParams {
    pub fn new(n: usize, xi: SpdMatrix, beta: SpdMatrix) -> Result<Self> {
        let m = xi.dim();
        if beta.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: (m, m),
                got: (beta.dim(), beta.dim()),
            });
        }
        if n < m {
            return Err(Error::Domain(format!("degrees n = {n} must be at least m = {m}")));
        }
        let delta = beta.sqrt();
        let delta_inv = delta.inverse().into_matrix();
        let xi_inv = xi.inverse().into_matrix();
        let log_det_xi = xi.log_det();
        let log_det_beta = beta.log_det();
        Ok(Self {
            n,
            xi,
            beta,
            delta,
            delta_inv,
            xi_inv,
            log_det_xi,
            log_det_beta,
        })
    }

    /// Scalar scale `β I_m`.
    pub fn with_scalar_beta(n: usize, xi: SpdMatrix, beta: f64) -> Result<Self> {
        let m = xi.dim();
        Self::new(n, xi, SpdMatrix::scalar(m, beta)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.xi.dim()
    }

    pub fn xi(&self) -> &SpdMatrix {
        &self.xi
    }

    pub fn beta(&self) -> &SpdMatrix {
        &self.beta
    }

    pub fn delta(&self) -> &SpdMatrix {
        &self.delta
    }

    pub fn delta_inv(&self) -> &RealMatrix {
        &self.delta_inv
    }

    pub fn xi_inv(&self) -> &RealMatrix {
        &self.xi_inv
    }

    pub fn log_det_xi(&self) -> f64 {
        self.log_det_xi
    }

    pub fn log_det_beta(&self) -> f64 {
        self.log_det_beta
    }

    /// `Some(c)` when `β = c I_m` exactly.
    pub fn scalar_beta(&self) -> Option<f64> {
        let b = self.beta.matrix();
        let c = b[(0, 0)];
        let m = self.m();
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { c } else { 0.0 };
                if b[(i, j)] != want {
                    return None;
                }
            }
        }
        Some(c)
    }

    /// `Δ^{-1} A Δ^{-1}` for symmetric `A`; its spectrum is that of `β^{-1} A`.
    pub fn whiten(&self, a: &RealMatrix) -> RealMatrix {
        (&(&self.delta_inv * a) * &self.delta_inv).symmetrize()
    }

    fn check_v(&self, v: &RealMatrix) -> Result<()> {
        if v.shape() != (self.n, self.m()) {
            return Err(Error::DimensionMismatch {
                expected: (self.n, self.m()),
                got: v.shape(),
            });
        }
        Ok(())
    }
}

/// `Z = (V Δ^{-1} - V'^+ Δ) Ξ^{-1}` with `V'^+ = V (V'V)^{-1}`.
pub fn forward_map(v: &RealMatrix, params: &GbsParams) -> Result<RealMatrix> {
    params.check_v(v)?;
    let v_pinv_t = pinv(v)?.transpose();
    let w = &(v * params.delta_inv()) - &(&v_pinv_t * params.delta().matrix());
    Ok(&w * params.xi_inv())
}

/// Branch right inverse of [`forward_map`].
///
/// With `Y = Z Ξ = H D Q'` this returns `V = H diag(l) Q' Δ`, where
/// `l_i = (d_i + sqrt(d_i^2 + 4)) / 2 >= 1`. `Z = 0` maps to `[I_m; 0] Δ`.
/// Tied singular values of `Y` are rejected.
pub fn inverse_map_branch(z: &RealMatrix, params: &GbsParams) -> Result<RealMatrix> {
    let (n, m) = (params.n(), params.m());
    if z.shape() != (n, m) {
        return Err(Error::DimensionMismatch {
            expected: (n, m),
            got: z.shape(),
        });
    }
    if z.max_abs() == 0.0 {
        let embed = RealMatrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 });
        return Ok(&embed * params.delta().matrix());
    }
    let y = z * params.xi().matrix();
    let svd = svd_complete(&y)?;
    check_distinct(&svd.singulars, "singular values of Z Ξ").map_err(|e| match e {
        Error::DegenerateEigenvalues(msg) => Error::DegenerateInput(msg),
        other => other,
    })?;
    let mut hl = svd.left.clone();
    for (j, &d) in svd.singulars.iter().enumerate() {
        let l = 0.5 * (d + (d * d + 4.0).sqrt());
        for i in 0..n {
            hl[(i, j)] *= l;
        }
    }
    Ok(&(&hl * &svd.right.transpose()) * params.delta().matrix())
}

/// Rejects values that coincide within [`TIE_TOL`] relative to the largest
/// magnitude.
pub fn check_distinct(values: &[f64], what: &str) -> Result<()> {
    let scale = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if (values[i] - values[j]).abs() <= TIE_TOL * scale {
                return Err(Error::DegenerateEigenvalues(format!(
                    "{what} {i} and {j} coincide ({:.6e} vs {:.6e})",
                    values[i], values[j]
                )));
            }
        }
    }
    Ok(())
}

/// Which of the two algebraically equal product forms of `G` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GForm {
    /// `prod (1 - x_i^{-1})^{n-m} (1 + x_i^{-1}) prod_{i<j} (1 - x_i^{-1} x_j^{-1})`
    First,
    /// `prod x_i^{-n} (x_i - 1)^{n-m} (1 + x_i) prod_{i<j} (x_i x_j - 1)`
    Second,
}

/// `ln |G(x)|` and the sign of `G(x)` for eigenvalues `x_i > 0` (the squared
/// singular values of `V Δ^{-1}`, equivalently the eigenvalues of
/// `β^{-1} T`). A vanishing factor gives `(-inf, 0.0)`.
pub fn log_g(x: &[f64], n: usize, form: GForm) -> (f64, f64) {
    let m = x.len();
    let nm = (n - m) as f64;
    let mut log = 0.0;
    let mut sign = 1.0;
    let mut push = |factor: f64, power: f64| {
        if power == 0.0 {
            return;
        }
        if factor == 0.0 {
            log = f64::NEG_INFINITY;
            sign = 0.0;
            return;
        }
        log += power * factor.abs().ln();
        if factor < 0.0 && (power as i64) % 2 != 0 {
            sign = -sign;
        }
    };
    match form {
        GForm::First => {
            for (i, &a) in x.iter().enumerate() {
                push(1.0 - 1.0 / a, nm);
                push(1.0 + 1.0 / a, 1.0);
                for &b in &x[i + 1..] {
                    push(1.0 - 1.0 / (a * b), 1.0);
                }
            }
        }
        GForm::Second => {
            for (i, &a) in x.iter().enumerate() {
                push(a, -(n as f64));
                push(a - 1.0, nm);
                push(1.0 + a, 1.0);
                for &b in &x[i + 1..] {
                    push(a * b - 1.0, 1.0);
                }
            }
        }
    }
    (log, sign)
}

/// Squared singular values of `V Δ^{-1}`, descending: the eigenvalues of
/// `Δ^{-1} V'V Δ^{-1}`.
pub fn branch_eigenvalues(v: &RealMatrix, params: &GbsParams) -> Result<Vec<f64>> {
    params.check_v(v)?;
    let gram = &v.transpose() * v;
    Ok(SpdMatrix::new(params.whiten(&gram))?.eigenvalues())
}

/// `|Ξ|^{-n} |det M|` where `M = ∂vec W/∂vec V` is assembled from Kronecker
/// products for `W = V Δ^{-1} - V'^+ Δ`:
/// `M = Δ^{-1}⊗I_n + (Δ⊗I_n)(K (V'^+⊗V^+) - (V'V)^{-1}⊗(I_n - V V^+))`.
pub fn jacobian_det_form(v: &RealMatrix, params: &GbsParams) -> Result<f64> {
    Ok(log_jacobian_det_form(v, params)?.0.exp())
}

/// Log of [`jacobian_det_form`] together with the sign of `det M`.
pub fn log_jacobian_det_form(v: &RealMatrix, params: &GbsParams) -> Result<(f64, f64)> {
    params.check_v(v)?;
    let (n, m) = (params.n(), params.m());
    let v_pinv = pinv(v)?;
    let v_pinv_t = v_pinv.transpose();
    let gram_inv = (&v.transpose() * v).inverse()?;
    let eye_n = RealMatrix::identity(n);
    let proj = &eye_n - &(v * &v_pinv);
    let swap = &commutation(m, n) * &kron(&v_pinv_t, &v_pinv);
    let inner = &swap - &kron(&gram_inv, &proj);
    let mat = &kron(params.delta_inv(), &eye_n) + &(&kron(params.delta().matrix(), &eye_n) * &inner);
    let (log_det, sign) = mat.log_abs_det()?;
    Ok((log_det - n as f64 * params.log_det_xi(), sign))
}

/// `|Ξ|^{-n} |β|^{-n/2} |G(g^2)|` with `g_i` the singular values of
/// `V Δ^{-1}`.
///
/// Rejects tied `g_i^2` and any `g_i` within [`UNIT_TOL`] of 1.
pub fn jacobian_sv_form(v: &RealMatrix, params: &GbsParams, form: GForm) -> Result<f64> {
    Ok(log_jacobian_sv_form(v, params, form)?.0.exp())
}

/// Log of [`jacobian_sv_form`] with the sign of `G`.
pub fn log_jacobian_sv_form(v: &RealMatrix, params: &GbsParams, form: GForm) -> Result<(f64, f64)> {
    let g2 = branch_eigenvalues(v, params)?;
    check_distinct(&g2, "squared singular values of V Δ^{-1}")?;
    if let Some(g) = g2.iter().map(|x| x.sqrt()).find(|g| (g - 1.0).abs() < UNIT_TOL) {
        return Err(Error::DegenerateEigenvalues(format!(
            "singular value {g} of V Δ^{{-1}} is on the unit boundary"
        )));
    }
    let n = params.n() as f64;
    let (log_g, sign) = log_g(&g2, params.n(), form);
    Ok((log_g - n * params.log_det_xi() - 0.5 * n * params.log_det_beta(), sign))
}

/// `|det ∂vec Z/∂vec V|` from central differences of [`forward_map`] with a
/// relative step (`step * max(1, |v_ij|)`).
pub fn jacobian_fd_oracle(v: &RealMatrix, params: &GbsParams, step: f64) -> Result<f64> {
    params.check_v(v)?;
    let (n, m) = v.shape();
    let dim = n * m;
    let mut jac = RealMatrix::zeros(dim, dim);
    for j in 0..m {
        for i in 0..n {
            let h = step * v[(i, j)].abs().max(1.0);
            let mut plus = v.clone();
            plus[(i, j)] += h;
            let mut minus = v.clone();
            minus[(i, j)] -= h;
            let zp = forward_map(&plus, params)?.vec();
            let zm = forward_map(&minus, params)?.vec();
            let col = j * n + i;
            for r in 0..dim {
                jac[(r, col)] = (zp[r] - zm[r]) / (2.0 * h);
            }
        }
    }
    Ok(jac.det()?.abs())
}

/// The three Jacobian computations at one point, with their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub det_form: f64,
    pub sv_form: f64,
    pub sv_form_second: f64,
    pub fd_form: Option<f64>,
    /// Largest pairwise relative gap among the analytic values.
    pub rel_disagreement: f64,
    /// Relative gap of the finite-difference value to the determinant form.
    pub fd_disagreement: Option<f64>,
    /// Sign of `G`; negative only off the branch region.
    pub sign: f64,
    pub agree: bool,
}

/// Analytic values must match to this relative tolerance.
pub const ANALYTIC_AGREEMENT: f64 = 1e-6;
/// The finite-difference value must match the determinant form to this.
pub const FD_AGREEMENT: f64 = 1e-4;

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn jacobian_report(v: &RealMatrix, params: &GbsParams, fd_step: Option<f64>) -> Result<JacobianReport> {
    let det_form = jacobian_det_form(v, params)?;
    let (log_first, sign) = log_jacobian_sv_form(v, params, GForm::First)?;
    let (log_second, _) = log_jacobian_sv_form(v, params, GForm::Second)?;
    let sv_form = log_first.exp();
    let sv_form_second = log_second.exp();
    let rel_disagreement = rel_gap(det_form, sv_form)
        .max(rel_gap(det_form, sv_form_second))
        .max(rel_gap(sv_form, sv_form_second));
    let fd_form = fd_step.map(|h| jacobian_fd_oracle(v, params, h)).transpose()?;
    let fd_disagreement = fd_form.map(|fd| rel_gap(fd, det_form));
    let agree = rel_disagreement <= ANALYTIC_AGREEMENT && fd_disagreement.is_none_or(|d| d <= FD_AGREEMENT);
    Ok(JacobianReport {
        det_form,
        sv_form,
        sv_form_second,
        fd_form,
        rel_disagreement,
        fd_disagreement,
        sign,
        agree,
    })
}
