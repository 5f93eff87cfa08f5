//! Shared oracle helpers for integration tests. Everything here is built
//! directly on nalgebra so the checks stay independent of the library's own
//! linear algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// exp(-i theta H) for Hermitian H via a from-scratch eigendecomposition.
pub fn expm_oracle(h: &CMat, theta: f64) -> CMat {
    let se = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let phase = Complex64::from_polar(1.0, -theta * se.eigenvalues[j]);
        let col = se.eigenvectors.column(j);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += phase * col[r] * col[c].conj();
            }
        }
    }
    out
}

/// Plain DFT matrix Q[j][k] = omega^{jk} / sqrt(N).
pub fn dft_matrix(n_qubits: usize) -> CMat {
    let n = 1usize << n_qubits;
    let w = 2.0 * std::f64::consts::PI / n as f64;
    CMat::from_fn(n, n, |j, k| Complex64::from_polar(1.0 / (n as f64).sqrt(), w * (j * k) as f64))
}

/// Bit-reversal permutation matrix over n_qubits.
pub fn bit_reversal(n_qubits: usize) -> CMat {
    let n = 1usize << n_qubits;
    let mut p = CMat::zeros(n, n);
    for j in 0..n {
        let mut r = 0usize;
        for b in 0..n_qubits {
            if j & (1 << b) != 0 {
                r |= 1 << (n_qubits - 1 - b);
            }
        }
        p[(r, j)] = Complex64::from(1.0);
    }
    p
}

pub fn mat_distance(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}

/// Operator (spectral) norm of the difference, via singular values.
pub fn op_distance(a: &CMat, b: &CMat) -> f64 {
    (a - b).singular_values()[0]
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMat::identity(n, n)).norm()
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Least-squares slope of y against x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn vec_fidelity(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm_sqr()
}
