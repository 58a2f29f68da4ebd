use super::matrix::RealMatrix;

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let (p, q) = b.shape();
    RealMatrix::from_fn(a.rows() * p, a.cols() * q, |i, j| a[(i / p, j / q)] * b[(i % p, j % q)])
}

/// Commutation matrix `K_{nm}` of order `nm`, defined by
/// `K_{nm} vec(A) = vec(A')` for every `A` with `n` rows and `m` columns.
pub fn commutation(n: usize, m: usize) -> RealMatrix {
    let mut k = RealMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..m {
            // A[i, j] sits at j*n + i in vec(A) and at i*m + j in vec(A')
            k[(i * m + j, j * n + i)] = 1.0;
        }
    }
    k
}
