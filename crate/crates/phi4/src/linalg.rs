//! Internal dense/iterative linear algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as matrix columns.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let se = h.clone().symmetric_eigen();
    // nalgebra does not order the spectrum; sort ascending and permute columns.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    (values, vectors)
}

/// exp(-i * theta * H) for Hermitian H, computed spectrally.
pub fn expm_i_hermitian(h: &CMatrix, theta: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = h.nrows();
    let mut phased = vectors.clone();
    for (j, &e) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -theta * e);
        for i in 0..n {
            phased[(i, j)] *= phase;
        }
    }
    phased * vectors.adjoint()
}

/// Largest singular value of a complex matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let (values, _) = hermitian_eigen(&gram);
    values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Frobenius distance between two matrices.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Hermitian symmetrization (H + H^dag) / 2.
pub fn symmetrize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

pub fn is_hermitian(h: &CMatrix, tol: f64) -> bool {
    let norm = h.norm().max(1.0);
    (h - h.adjoint()).norm() <= tol * norm
}

/// Lowest-k eigenpairs of a Hermitian operator given only its action,
/// via Lanczos with full reorthogonalization and thick restarts.
pub struct LanczosOptions {
    pub max_subspace: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_subspace: 80, max_restarts: 60, tol: 1e-10, seed: 0x5eed }
    }
}

pub fn lanczos_lowest<F>(
    dim: usize,
    k: usize,
    mut matvec: F,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<CVector>)>
where
    F: FnMut(&CVector) -> CVector,
{
    use rand::{Rng, SeedableRng};
    if k == 0 || k > dim {
        return Err(Error::Domain(format!("requested {k} eigenpairs of a {dim}-dim operator")));
    }
    let m = opts.max_subspace.min(dim).max(2 * k + 2);
    let keep = (2 * k + 2).min(m - 1);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = CVector::from_fn(dim, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    start /= Complex64::from(start.norm());

    // Ritz basis carried across restarts (thick restart).
    let mut basis: Vec<CVector> = vec![start];
    let mut ritz_values: Vec<f64> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();

    for _restart in 0..opts.max_restarts {
        // Grow the Krylov space from the current basis to m vectors, projecting
        // H into it (full Rayleigh-Ritz keeps the restart logic simple and is
        // cheap next to the matvecs at the dimensions used here).
        while basis.len() < m {
            let v = basis.last().unwrap().clone();
            let mut w = matvec(&v);
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
            // second orthogonalization pass against rounding
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
            let nw = w.norm();
            if nw < 1e-13 {
                // invariant subspace: replace with a fresh random direction
                let mut r = CVector::from_fn(dim, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                for b in &basis {
                    let c = b.dotc(&r);
                    r -= b * c;
                }
                let nr = r.norm();
                if nr < 1e-13 {
                    break;
                }
                basis.push(r / Complex64::from(nr));
            } else {
                basis.push(w / Complex64::from(nw));
            }
        }

        let p = basis.len();
        let images: Vec<CVector> = basis.iter().map(|b| matvec(b)).collect();
        let mut proj = CMatrix::zeros(p, p);
        for (i, b) in basis.iter().enumerate() {
            for (j, hb) in images.iter().enumerate() {
                proj[(i, j)] = b.dotc(hb);
            }
        }
        let proj = symmetrize(&proj);
        let (values, vectors) = hermitian_eigen(&proj);

        let take = k.min(p);
        let mut new_basis: Vec<CVector> = Vec::with_capacity(keep + 1);
        residuals.clear();
        ritz_values = values[..take].to_vec();
        for j in 0..keep.min(p) {
            let mut x = CVector::zeros(dim);
            for (i, b) in basis.iter().enumerate() {
                x += b * vectors[(i, j)];
            }
            let nx = x.norm();
            if nx > 1e-13 {
                x /= Complex64::from(nx);
            }
            if j < take {
                let hx = matvec(&x);
                residuals.push((&hx - &x * Complex64::from(values[j])).norm());
            }
            new_basis.push(x);
        }
        basis = new_basis;

        if residuals.iter().all(|&r| r <= opts.tol) {
            let states = basis[..take].to_vec();
            return Ok((ritz_values, states));
        }
    }

    Err(Error::Resource(format!(
        "Lanczos did not converge to {:.1e} (worst residual {:.3e})",
        opts.tol,
        residuals.iter().cloned().fold(f64::NAN, f64::max)
    )))
}
