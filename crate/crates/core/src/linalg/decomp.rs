//! Jacobi-type symmetric eigendecomposition and singular value decomposition.
//!
//! Both routines are fully deterministic: cyclic sweeps in a fixed order,
//! no randomisation, and a fixed sign convention on the output vectors.

use serde::{Deserialize, Serialize};

use super::matrix::RealMatrix;
use super::spd::SpdMatrix;
use crate::error::{Error, Result};

/// Relative rank threshold for thin SVDs and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-12;
/// Relative asymmetry accepted by [`sym_eig`].
pub const SYM_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order and the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

impl SymEigen {
    /// `V diag(f(values)) V'`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        let m = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..m {
            let s = f(self.values[j]);
            for i in 0..m {
                scaled[(i, j)] *= s;
            }
        }
        (&scaled * &self.vectors.transpose()).symmetrize()
    }
}

/// Thin singular value factorisation `A = left * diag(singulars) * right'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    /// `n x m`, orthonormal columns.
    pub left: RealMatrix,
    /// Non-increasing, nonnegative.
    pub singulars: Vec<f64>,
    /// `m x m` orthogonal.
    pub right: RealMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> RealMatrix {
        let mut ls = self.left.clone();
        for j in 0..self.singulars.len() {
            for i in 0..ls.rows() {
                ls[(i, j)] *= self.singulars[j];
            }
        }
        &ls * &self.right.transpose()
    }
}

/// Flips columns of `primary` (and the same columns of `follower`) so that the
/// largest-magnitude entry of each column of `primary` is positive.
fn fix_signs(primary: &mut RealMatrix, mut follower: Option<&mut RealMatrix>) {
    for j in 0..primary.cols() {
        let mut best = 0.0_f64;
        let mut best_val = 0.0;
        for i in 0..primary.rows() {
            let v = primary[(i, j)];
            // strict comparison keeps the first index on exact ties
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < 0.0 {
            for i in 0..primary.rows() {
                primary[(i, j)] = -primary[(i, j)];
            }
            if let Some(f) = follower.as_deref_mut() {
                for i in 0..f.rows() {
                    f[(i, j)] = -f[(i, j)];
                }
            }
        }
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(s: &RealMatrix) -> Result<SymEigen> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let asym = s.asymmetry();
    if asym > SYM_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let m = s.rows();
    let mut a = s.symmetrize();
    let mut v = RealMatrix::identity(m);
    let norm = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-17 * norm {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = RealMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..m {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    fix_signs(&mut vectors, None);
    Ok(SymEigen { values, vectors })
}

/// One-sided (Hestenes) Jacobi SVD of a tall matrix. Columns of `left` that
/// belong to zero singular values are left as zero vectors.
fn one_sided_jacobi(a: &RealMatrix) -> (RealMatrix, Vec<f64>, RealMatrix) {
    let (n, m) = a.shape();
    debug_assert!(n >= m);
    let mut w = a.clone();
    let mut v = RealMatrix::identity(m);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..m {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut left = RealMatrix::zeros(n, m);
    let mut right = RealMatrix::zeros(m, m);
    let mut singulars = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singulars.push(sigma);
        for i in 0..n {
            left[(i, dst)] = if sigma > 0.0 { w[(i, src)] / sigma } else { 0.0 };
        }
        for i in 0..m {
            right[(i, dst)] = v[(i, src)];
        }
    }
    (left, singulars, right)
}

/// Thin SVD of a full-column-rank `n x m` matrix, `n >= m`.
///
/// Singular values are returned in non-increasing order and the largest
/// magnitude entry of every left singular vector is positive.
pub fn svd_thin(a: &RealMatrix) -> Result<SvdFactors> {
    let (n, m) = a.shape();
    if n < m {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            got: (n, m),
        });
    }
    let (mut left, singulars, mut right) = one_sided_jacobi(a);
    let ratio = singulars[m - 1] / singulars[0].max(f64::MIN_POSITIVE);
    if singulars[0] == 0.0 || ratio <= RANK_TOL {
        return Err(Error::RankDeficient(ratio));
    }
    fix_signs(&mut left, Some(&mut right));
    Ok(SvdFactors { left, singulars, right })
}

/// SVD that tolerates rank deficiency: left vectors of zero singular values
/// are completed to an orthonormal set by Gram-Schmidt against the canonical
/// basis.
pub fn svd_complete(a: &RealMatrix) -> Result<SvdFactors> {
    let (n, m) = a.shape();
    if n < m {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            got: (n, m),
        });
    }
    let (mut left, singulars, mut right) = one_sided_jacobi(a);
    let top = singulars[0];
    let mut next_basis = 0;
    for j in 0..m {
        if singulars[j] > top * RANK_TOL && singulars[j] > 0.0 {
            continue;
        }
        // replace this column by the next canonical vector independent of the others
        loop {
            assert!(next_basis < n, "ran out of basis vectors");
            let mut cand = vec![0.0; n];
            cand[next_basis] = 1.0;
            next_basis += 1;
            for k in 0..m {
                if k == j || (k > j && singulars[k] <= top * RANK_TOL) {
                    continue;
                }
                let dot: f64 = (0..n).map(|i| left[(i, k)] * cand[i]).sum();
                for (i, c) in cand.iter_mut().enumerate() {
                    *c -= dot * left[(i, k)];
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, c) in cand.iter().enumerate() {
                    left[(i, j)] = c / norm;
                }
                break;
            }
        }
    }
    fix_signs(&mut left, Some(&mut right));
    Ok(SvdFactors { left, singulars, right })
}

/// Positive definite square root, computed from the eigendecomposition.
pub fn spd_sqrt(b: &SpdMatrix) -> SpdMatrix {
    let eig = sym_eig(b.matrix()).expect("SpdMatrix is symmetric");
    let root = eig.reconstruct_with(|x| x.max(0.0).sqrt());
    SpdMatrix::new_unchecked(root)
}

/// Moore-Penrose inverse of a full-rank matrix, via the thin SVD.
///
/// For a tall full-column-rank `A` this equals `(A'A)^{-1} A'`.
pub fn pinv(a: &RealMatrix) -> Result<RealMatrix> {
    if a.rows() < a.cols() {
        return Ok(pinv(&a.transpose())?.transpose());
    }
    let svd = svd_thin(a)?;
    let m = a.cols();
    let mut r = svd.right.clone();
    for j in 0..m {
        let inv = 1.0 / svd.singulars[j];
        for i in 0..m {
            r[(i, j)] *= inv;
        }
    }
    Ok(&r * &svd.left.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random(n: usize, m: usize, seed: &mut u64) -> RealMatrix {
        RealMatrix::from_fn(n, m, |_, _| lcg(seed))
    }

    #[test]
    fn svd_identity() {
        let svd = svd_thin(&RealMatrix::identity(2)).unwrap();
        assert_eq!(svd.singulars, vec![1.0, 1.0]);
        assert_eq!(svd.left, RealMatrix::identity(2));
        assert_eq!(svd.right, RealMatrix::identity(2));
    }

    #[test]
    fn svd_diagonal_embedding() {
        let a = RealMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 3.0], &[0.0, 0.0]]);
        let svd = svd_thin(&a).unwrap();
        assert!((svd.singulars[0] - 3.0).abs() < 1e-15);
        assert!((svd.singulars[1] - 1.0).abs() < 1e-15);
        assert!(svd.reconstruct().rel_diff(&a) < 1e-15);
    }

    #[test]
    fn svd_rank_deficient() {
        let a = RealMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        assert!(matches!(svd_thin(&a), Err(Error::RankDeficient(_))));
        let full = svd_complete(&a).unwrap();
        assert!(full.reconstruct().rel_diff(&a) < 1e-14);
        let gram = &full.left.transpose() * &full.left;
        assert!(gram.rel_diff(&RealMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn svd_sign_convention() {
        let mut seed = 7;
        for _ in 0..20 {
            let a = random(5, 3, &mut seed);
            let svd = svd_thin(&a).unwrap();
            for j in 0..3 {
                let col = svd.left.column(j);
                let big = col
                    .iter()
                    .cloned()
                    .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                assert!(big > 0.0);
            }
            assert!(svd.reconstruct().rel_diff(&a) < 1e-13);
            let neg = a.scale(-1.0);
            let svd_neg = svd_thin(&neg).unwrap();
            assert!(svd_neg.left.rel_diff(&svd.left) < 1e-13);
        }
    }

    #[test]
    fn eig_diagonal_and_identity() {
        let e = sym_eig(&RealMatrix::from_diag(&[1.0, 4.0])).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
        let e = sym_eig(&RealMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0; 3]);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = RealMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn eig_characteristic_residual() {
        let mut seed = 11;
        for _ in 0..20 {
            let b = random(3, 3, &mut seed);
            let s = (&b + &b.transpose()).scale(0.5);
            let e = sym_eig(&s).unwrap();
            for &lam in &e.values {
                let shifted = &s - &RealMatrix::identity(3).scale(lam);
                assert!(shifted.det().unwrap().abs() < 1e-8);
            }
            let rebuilt = e.reconstruct_with(|x| x);
            assert!(rebuilt.rel_diff(&s) < 1e-13);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn sqrt_of_diagonal() {
        let b = SpdMatrix::new(RealMatrix::from_diag(&[4.0, 9.0])).unwrap();
        let r = spd_sqrt(&b);
        assert!(r.matrix().rel_diff(&RealMatrix::from_diag(&[2.0, 3.0])) < 1e-15);
        let i = SpdMatrix::new(RealMatrix::identity(3)).unwrap();
        assert_eq!(spd_sqrt(&i).matrix(), &RealMatrix::identity(3));
    }

    #[test]
    fn pinv_cases() {
        let tall = RealMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let p = pinv(&tall).unwrap();
        let want = RealMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(p.rel_diff(&want) < 1e-15);

        let sq = RealMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        assert!(pinv(&sq).unwrap().rel_diff(&sq.inverse().unwrap()) < 1e-14);

        let flat = RealMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(pinv(&flat), Err(Error::RankDeficient(_))));
    }
}
