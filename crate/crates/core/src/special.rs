//! Log-space special functions.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `ln Γ_m[a] = m(m-1)/4 ln π + Σ_{i=1}^{m} ln Γ[a - (i-1)/2]`, defined for
/// `a > (m-1)/2`.
pub fn log_mv_gamma(m: usize, a: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("multivariate gamma needs m >= 1".into()));
    }
    let mf = m as f64;
    if !(a > (mf - 1.0) / 2.0) {
        return Err(Error::Domain(format!(
            "multivariate gamma of order {m} needs a > {}, got {a}",
            (mf - 1.0) / 2.0
        )));
    }
    let mut acc = mf * (mf - 1.0) / 4.0 * PI.ln();
    for i in 0..m {
        acc += ln_gamma(a - i as f64 / 2.0);
    }
    Ok(acc)
}
