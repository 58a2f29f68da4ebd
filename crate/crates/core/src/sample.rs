//! Samplers for the square-root matrix `V` and for `T = V'V`.
//!
//! A draw `Z` from the elliptical law is pushed through the branch inverse,
//! so every `V` has all singular values of `V Δ^{-1}` at least 1 and every
//! `T` has all eigenvalues of `β^{-1} T` at least 1. This is exactly the law
//! whose density is the `BranchNormalized` one.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::elliptic::{KernelFamily, KernelSpec, RngState};
use crate::error::{Error, Result};
use crate::linalg::{RealMatrix, SpdMatrix};
use crate::transform::{inverse_map_branch, GbsParams};

/// How many perturbed redraws a tie may trigger before giving up.
const JITTER_ATTEMPTS: usize = 8;

fn check_kernel(params: &GbsParams, kernel: &KernelSpec) -> Result<()> {
    if (kernel.n(), kernel.m()) != (params.n(), params.m()) {
        return Err(Error::DimensionMismatch {
            expected: (params.n(), params.m()),
            got: (kernel.n(), kernel.m()),
        });
    }
    Ok(())
}

/// One draw of `V`. Ties among the singular values of `Z Ξ` are an error.
pub fn sample_v(params: &GbsParams, kernel: &KernelSpec, rng: &mut RngState) -> Result<RealMatrix> {
    sample_v_jittered(params, kernel, rng, None)
}

/// Like [`sample_v`], but a tied draw is perturbed entrywise by
/// `jitter * max|Z| * N(0, 1)` and retried.
pub fn sample_v_jittered(
    params: &GbsParams,
    kernel: &KernelSpec,
    rng: &mut RngState,
    jitter: Option<f64>,
) -> Result<RealMatrix> {
    check_kernel(params, kernel)?;
    let mut z = kernel.sample(rng);
    let mut attempts = 0;
    loop {
        match inverse_map_branch(&z, params) {
            Err(Error::DegenerateInput(msg)) => {
                let Some(eps) = jitter else {
                    return Err(Error::DegenerateInput(msg));
                };
                if attempts == JITTER_ATTEMPTS {
                    return Err(Error::DegenerateInput(msg));
                }
                attempts += 1;
                let scale = eps * z.max_abs().max(1.0);
                let noise = RealMatrix::from_fn(z.rows(), z.cols(), |_, _| {
                    let e: f64 = StandardNormal.sample(rng);
                    scale * e
                });
                z = &z + &noise;
            }
            other => return other,
        }
    }
}

/// One draw of `T = V'V`.
pub fn sample_t(params: &GbsParams, kernel: &KernelSpec, rng: &mut RngState) -> Result<SpdMatrix> {
    sample_t_jittered(params, kernel, rng, None)
}

pub fn sample_t_jittered(
    params: &GbsParams,
    kernel: &KernelSpec,
    rng: &mut RngState,
    jitter: Option<f64>,
) -> Result<SpdMatrix> {
    let v = sample_v_jittered(params, kernel, rng, jitter)?;
    SpdMatrix::new((&v.transpose() * &v).symmetrize())
}

/// Where a batch came from, enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: GbsParams,
    pub kernel: KernelFamily,
    pub seed: u64,
    pub stream: u64,
}

/// `K` observed symmetric positive definite matrices of a common order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBatch", into = "RawBatch")]
pub struct SampleBatch {
    m: usize,
    matrices: Vec<SpdMatrix>,
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct RawBatch {
    m: usize,
    matrices: Vec<SpdMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl TryFrom<RawBatch> for SampleBatch {
    type Error = Error;
    fn try_from(raw: RawBatch) -> Result<Self> {
        let batch = SampleBatch::new(raw.matrices)?;
        if batch.m != raw.m {
            return Err(Error::InvalidData(format!(
                "batch declares m = {} but holds {}x{} matrices",
                raw.m, batch.m, batch.m
            )));
        }
        Ok(batch.with_provenance(raw.provenance))
    }
}

impl From<SampleBatch> for RawBatch {
    fn from(b: SampleBatch) -> Self {
        RawBatch {
            m: b.m,
            matrices: b.matrices,
            provenance: b.provenance,
        }
    }
}

impl SampleBatch {
    pub fn new(matrices: Vec<SpdMatrix>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidData("a batch needs at least one matrix".into()));
        };
        let m = first.dim();
        if let Some((k, bad)) = matrices.iter().enumerate().find(|(_, t)| t.dim() != m) {
            return Err(Error::InvalidData(format!(
                "matrix {k} is {}x{}, expected {m}x{m}",
                bad.dim(),
                bad.dim()
            )));
        }
        Ok(Self {
            m,
            matrices,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Option<Provenance>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[SpdMatrix] {
        &self.matrices
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// `count` independent draws of `T` from one stream.
pub fn sample_batch(params: &GbsParams, kernel: &KernelSpec, count: usize, rng: &mut RngState) -> Result<SampleBatch> {
    sample_batch_jittered(params, kernel, count, rng, None)
}

pub fn sample_batch_jittered(
    params: &GbsParams,
    kernel: &KernelSpec,
    count: usize,
    rng: &mut RngState,
    jitter: Option<f64>,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InvalidData("sample count must be at least 1".into()));
    }
    let provenance = Provenance {
        params: params.clone(),
        kernel: kernel.family(),
        seed: rng.seed(),
        stream: rng.stream(),
    };
    let matrices = (0..count)
        .map(|_| sample_t_jittered(params, kernel, rng, jitter))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch::new(matrices)?.with_provenance(Some(provenance)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::forward_map;

    fn setup() -> (GbsParams, KernelSpec) {
        let xi = SpdMatrix::from_upper(2, &[1.0, 0.3, 0.8]).unwrap();
        let p = GbsParams::with_scalar_beta(6, xi, 100.0).unwrap();
        let k = KernelFamily::Gaussian.with_dims(6, 2).unwrap();
        (p, k)
    }

    #[test]
    fn draws_invert_the_elliptical_sample() {
        let (p, k) = setup();
        let mut rng = RngState::from_seed(9);
        for _ in 0..20 {
            let mut shadow = rng.clone();
            let z = k.sample(&mut shadow);
            let v = sample_v(&p, &k, &mut rng).unwrap();
            assert!(forward_map(&v, &p).unwrap().rel_diff(&z) < 1e-10);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let (p, k) = setup();
        let a = sample_batch(&p, &k, 20, &mut RngState::from_seed(1)).unwrap();
        let b = sample_batch(&p, &k, 20, &mut RngState::from_seed(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 20);
        assert_eq!(a.provenance().unwrap().seed, 1);
        let c = sample_batch(&p, &k, 20, &mut RngState::from_seed(2)).unwrap();
        assert_ne!(a.matrices(), c.matrices());
    }

    #[test]
    fn batch_json_round_trip() {
        let (p, k) = setup();
        let a = sample_batch(&p, &k, 3, &mut RngState::from_seed(4)).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: SampleBatch = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_validation() {
        assert!(SampleBatch::new(vec![]).is_err());
        let mixed = vec![SpdMatrix::scalar(1, 1.0).unwrap(), SpdMatrix::scalar(2, 1.0).unwrap()];
        assert!(SampleBatch::new(mixed).is_err());
        let (p, k) = setup();
        assert!(sample_batch(&p, &k, 0, &mut RngState::from_seed(0)).is_err());
        let wrong = KernelFamily::Gaussian.with_dims(5, 2).unwrap();
        assert!(sample_t(&p, &wrong, &mut RngState::from_seed(0)).is_err());
    }
}
