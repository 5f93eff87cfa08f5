//! Discretized phi^4 lattice Hamiltonian: field operators in the field
//! amplitude basis, centered Fourier transform, local and lattice
//! Hamiltonians, and exact diagonalization at desk scale.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, hermitian_eigen, is_hermitian, lanczos_lowest, spectral_norm, symmetrize, CMatrix,
    CVector, LanczosOptions,
};

/// Default Hilbert-space dimension above which dense diagonalization is
/// replaced by iterative (Lanczos) diagonalization.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Gap below which a ground pair is treated as degenerate and disambiguated
/// by the sign of the total field expectation.
const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
}

/// Bare couplings of the dimensionless lattice Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    /// Dimensionless squared bare mass; negative values select the
    /// double-well regime.
    pub m0_sq: f64,
    /// Dimensionless quartic coupling, >= 0.
    pub lambda0: f64,
    /// Dimensionless external field.
    pub f0: f64,
    /// Spatial dimension.
    pub dim: usize,
    /// Sites per dimension; the total site count is `n_sites^dim`.
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl ModelParams {
    pub fn new(
        m0_sq: f64,
        lambda0: f64,
        f0: f64,
        dim: usize,
        n_sites: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if lambda0 < 0.0 {
            return Err(Error::Domain(format!("lambda0 must be >= 0, got {lambda0}")));
        }
        if dim < 1 {
            return Err(Error::Domain("spatial dimension must be >= 1".into()));
        }
        if n_sites < 1 {
            return Err(Error::Domain("n_sites must be >= 1".into()));
        }
        Ok(Self { m0_sq, lambda0, f0, dim, n_sites, boundary })
    }

    /// 1d-chain convenience constructor with periodic boundary.
    pub fn chain(m0_sq: f64, lambda0: f64, f0: f64, n_sites: usize) -> Result<Self> {
        Self::new(m0_sq, lambda0, f0, 1, n_sites, Boundary::Periodic)
    }

    pub fn total_sites(&self) -> usize {
        self.n_sites.pow(self.dim as u32)
    }

    /// Nearest-neighbor bonds as unordered site pairs. Periodic wrap bonds
    /// that duplicate an existing pair (2-site chains) are counted once, and
    /// self-bonds (1-site lattices) are dropped.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let total = self.total_sites();
        let mut seen = std::collections::BTreeSet::new();
        let mut bonds = Vec::new();
        for site in 0..total {
            // decode multi-index, least significant coordinate first
            let mut rem = site;
            let mut coords = vec![0usize; self.dim];
            for c in coords.iter_mut() {
                *c = rem % n;
                rem /= n;
            }
            for e in 0..self.dim {
                let mut nb = coords.clone();
                if coords[e] + 1 < n {
                    nb[e] += 1;
                } else {
                    if self.boundary == Boundary::Open {
                        continue;
                    }
                    nb[e] = 0;
                }
                let mut other = 0usize;
                for c in nb.iter().rev() {
                    other = other * n + c;
                }
                if other == site {
                    continue;
                }
                let pair = (site.min(other), site.max(other));
                if seen.insert(pair) {
                    bonds.push(pair);
                }
            }
        }
        bonds
    }
}

/// Convert bare couplings with units to the dimensionless couplings of the
/// lattice Hamiltonian: m0^2 = m_b^2 a^2, lambda0 = lambda_b a^(3-d),
/// f0 = f_b a^((3+d)/2).
pub fn to_dimensionless(
    m_b_sq: f64,
    lambda_b: f64,
    f_b: f64,
    a: f64,
    d: usize,
) -> Result<(f64, f64, f64)> {
    if a <= 0.0 {
        return Err(Error::Domain(format!("lattice constant must be positive, got {a}")));
    }
    let m0_sq = m_b_sq * a * a;
    let lambda0 = lambda_b * a.powi(3 - d as i32);
    let f0 = f_b * a.powf((3.0 + d as f64) / 2.0);
    Ok((m0_sq, lambda0, f0))
}

/// Field-amplitude discretization of one site register.
#[derive(Debug, Clone, Copy)]
pub struct DiscretizationConfig {
    /// Qubits per site.
    pub n_q: usize,
    /// Discretization points, 2^n_q.
    pub n_phi: usize,
    /// Boson mass parameter of the representation, > 0.
    pub mu: f64,
    /// Field spacing sqrt(2 pi / (N_phi mu)).
    pub delta_phi: f64,
    /// Conjugate spacing sqrt(2 pi mu / N_phi).
    pub delta_kappa: f64,
    /// Boson cutoff used for truncation checks, < N_phi.
    pub n_b: usize,
}

impl DiscretizationConfig {
    pub fn new(n_q: usize, mu: f64) -> Result<Self> {
        let n_phi = 1usize
            .checked_shl(n_q as u32)
            .ok_or_else(|| Error::Domain(format!("n_q = {n_q} overflows")))?;
        Self::with_cutoff(n_q, mu, (n_phi / 2).max(1))
    }

    pub fn with_cutoff(n_q: usize, mu: f64, n_b: usize) -> Result<Self> {
        if n_q == 0 {
            return Err(Error::Domain("n_q must be >= 1".into()));
        }
        if mu <= 0.0 {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        let n_phi = 1usize << n_q;
        if n_b >= n_phi {
            return Err(Error::Domain(format!("n_b = {n_b} must be < N_phi = {n_phi}")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        let delta_phi = (tau / (n_phi as f64 * mu)).sqrt();
        let delta_kappa = (tau * mu / n_phi as f64).sqrt();
        Ok(Self { n_q, n_phi, mu, delta_phi, delta_kappa, n_b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    /// Single-site field amplitude basis of size N_phi.
    Local { n_phi: usize },
    /// Lattice product basis of size N_phi^N, site 0 most significant.
    Lattice { n_sites: usize, n_phi: usize },
}

/// Dense operator in the field amplitude basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub dim: usize,
    pub entries: CMatrix,
    pub basis_tag: BasisTag,
}

impl OperatorMatrix {
    pub fn local(entries: CMatrix) -> Self {
        let dim = entries.nrows();
        Self { dim, entries, basis_tag: BasisTag::Local { n_phi: dim } }
    }
}

/// Discrete field eigenvalues phi_alpha = Delta_phi (alpha - (N_phi - 1)/2).
pub fn field_grid(config: &DiscretizationConfig) -> Vec<f64> {
    let center = (config.n_phi as f64 - 1.0) / 2.0;
    (0..config.n_phi).map(|alpha| config.delta_phi * (alpha as f64 - center)).collect()
}

/// Conjugate-field eigenvalues kappa_beta = Delta_kappa (beta - (N_phi - 1)/2).
pub fn kappa_grid(config: &DiscretizationConfig) -> Vec<f64> {
    let center = (config.n_phi as f64 - 1.0) / 2.0;
    (0..config.n_phi).map(|beta| config.delta_kappa * (beta as f64 - center)).collect()
}

/// Diagonal field operator Phi.
pub fn phi_operator(config: &DiscretizationConfig) -> OperatorMatrix {
    let grid = field_grid(config);
    let entries = CMatrix::from_diagonal(&CVector::from_iterator(
        config.n_phi,
        grid.iter().map(|&x| Complex64::from(x)),
    ));
    OperatorMatrix::local(entries)
}

/// Centered finite Fourier transform F with entries
/// (1/sqrt(N_phi)) exp(i 2 pi / N_phi (alpha - c)(beta - c)), c = (N_phi-1)/2.
pub fn centered_ft_matrix(config: &DiscretizationConfig) -> OperatorMatrix {
    let n = config.n_phi;
    let center = (n as f64 - 1.0) / 2.0;
    let scale = 1.0 / (n as f64).sqrt();
    let freq = 2.0 * std::f64::consts::PI / n as f64;
    let entries = CMatrix::from_fn(n, n, |alpha, beta| {
        let phase = freq * (alpha as f64 - center) * (beta as f64 - center);
        Complex64::from_polar(scale, phase)
    });
    OperatorMatrix::local(entries)
}

/// Conjugate field operator Pi = mu F Phi F^-1.
pub fn pi_operator(config: &DiscretizationConfig) -> OperatorMatrix {
    let ft = centered_ft_matrix(config).entries;
    let phi = phi_operator(config).entries;
    let pi = &ft * phi * ft.adjoint() * Complex64::from(config.mu);
    OperatorMatrix::local(symmetrize(&pi))
}

/// Exact kinetic block Pi^2 / 2 of one site; real symmetric to rounding.
fn kinetic_block(config: &DiscretizationConfig) -> DMatrix<f64> {
    let pi = pi_operator(config).entries;
    let pi2 = symmetrize(&(&pi * &pi)).scale(0.5);
    DMatrix::from_fn(config.n_phi, config.n_phi, |i, j| pi2[(i, j)].re)
}

/// Spectral-norm residual of the canonical commutation relation projected on
/// the lowest `n_b` harmonic oscillator states:
/// || P [Phi, Pi] P - i P ||.
pub fn commutator_residual(config: &DiscretizationConfig, n_b: usize) -> Result<f64> {
    if n_b >= config.n_phi {
        return Err(Error::Domain(format!("n_b = {n_b} must be < N_phi = {}", config.n_phi)));
    }
    let phi = phi_operator(config).entries;
    let pi = pi_operator(config).entries;
    let h_osc = symmetrize(
        &((&pi * &pi).scale(0.5) + (&phi * &phi).scale(0.5 * config.mu * config.mu)),
    );
    let (_, vectors) = hermitian_eigen(&h_osc);
    let low = vectors.columns(0, n_b).into_owned();
    let projector = &low * low.adjoint();
    let comm = &phi * &pi - &pi * &phi;
    let residual = &projector * comm * &projector - projector.scale(1.0) * linalg::I;
    Ok(spectral_norm(&residual))
}

/// Local Hamiltonian Pi^2/2 + m_I^2 Phi^2/2 + lambda_I Phi^4/4! + f_I Phi
/// on one site.
pub fn local_hamiltonian(
    m_i_sq: f64,
    lambda_i: f64,
    f_i: f64,
    config: &DiscretizationConfig,
) -> OperatorMatrix {
    let n = config.n_phi;
    let grid = field_grid(config);
    let mut h = CMatrix::zeros(n, n);
    let kin = kinetic_block(config);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = Complex64::from(kin[(i, j)]);
        }
        let x = grid[i];
        h[(i, i)] += Complex64::from(
            0.5 * m_i_sq * x * x + lambda_i / 24.0 * x.powi(4) + f_i * x,
        );
    }
    OperatorMatrix::local(symmetrize(&h))
}

/// Per-term weights for assembling an interpolated lattice Hamiltonian.
///
/// `coupling` scales the inter-site hopping; the remaining entries are the
/// in-effect local couplings (already interpolated by the caller).
#[derive(Debug, Clone, Copy)]
pub struct LatticeWeights {
    pub coupling: f64,
    pub m_sq: f64,
    pub lambda: f64,
    pub f: f64,
}

impl LatticeWeights {
    pub fn bare(params: &ModelParams) -> Self {
        Self { coupling: 1.0, m_sq: params.m0_sq, lambda: params.lambda0, f: params.f0 }
    }
}

/// Lattice Hamiltonian held as a diagonal potential plus one shared per-site
/// kinetic block; supports matrix-free application at dimensions where the
/// dense matrix is out of reach.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub n_sites: usize,
    pub n_phi: usize,
    pub diag: Vec<f64>,
    pub kinetic: DMatrix<f64>,
}

impl LatticeOperator {
    pub fn build(
        params: &ModelParams,
        config: &DiscretizationConfig,
        weights: LatticeWeights,
    ) -> Self {
        let n_sites = params.total_sites();
        let n_phi = config.n_phi;
        let dim = n_phi.pow(n_sites as u32);
        let grid = field_grid(config);
        let bonds = params.bonds();

        let site_pot: Vec<f64> = grid
            .iter()
            .map(|&x| {
                0.5 * weights.m_sq * x * x + weights.lambda / 24.0 * x.powi(4) + weights.f * x
            })
            .collect();

        // strides: site j occupies digit N - 1 - j from the least significant end
        let stride = |j: usize| n_phi.pow((n_sites - 1 - j) as u32);
        let mut diag = vec![0.0; dim];
        for (idx, d) in diag.iter_mut().enumerate() {
            let mut value = 0.0;
            for j in 0..n_sites {
                let alpha = idx / stride(j) % n_phi;
                value += site_pot[alpha];
            }
            for &(a, b) in &bonds {
                let xa = grid[idx / stride(a) % n_phi];
                let xb = grid[idx / stride(b) % n_phi];
                value += weights.coupling * 0.5 * (xa - xb) * (xa - xb);
            }
            *d = value;
        }

        Self { n_sites, n_phi, diag, kinetic: kinetic_block(config) }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn site_stride(&self, j: usize) -> usize {
        self.n_phi.pow((self.n_sites - 1 - j) as u32)
    }

    /// H |v>.
    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::from_iterator(
            self.dim(),
            v.iter().zip(&self.diag).map(|(a, &d)| a * d),
        );
        self.add_kinetic(v, &mut out);
        out
    }

    /// out += sum_j (Pi_j^2 / 2) |v>.
    fn add_kinetic(&self, v: &CVector, out: &mut CVector) {
        let n = self.n_phi;
        let mut gathered = vec![Complex64::default(); n];
        for j in 0..self.n_sites {
            let stride = self.site_stride(j);
            let block = stride * n;
            let dim = self.dim();
            let mut base = 0;
            while base < dim {
                for lo in 0..stride {
                    for (a, g) in gathered.iter_mut().enumerate() {
                        *g = v[base + lo + a * stride];
                    }
                    for (b, row) in self.kinetic.row_iter().enumerate() {
                        let mut acc = Complex64::default();
                        for (a, g) in gathered.iter().enumerate() {
                            acc += row[a] * g;
                        }
                        out[base + lo + b * stride] += acc;
                    }
                }
                base += block;
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        let mut basis = CVector::zeros(dim);
        for col in 0..dim {
            basis[col] = Complex64::from(1.0);
            let image = self.apply(&basis);
            m.set_column(col, &image);
            basis[col] = Complex64::default();
        }
        symmetrize(&m)
    }

    /// Total-field diagonal in grid-index units, Sum_j (alpha_j - (N_phi-1)/2).
    /// Proportional to the Phi_total diagonal; enough for sign decisions.
    pub fn phi_total_index_diag(&self) -> Vec<f64> {
        let center = (self.n_phi as f64 - 1.0) / 2.0;
        (0..self.dim())
            .map(|idx| {
                (0..self.n_sites)
                    .map(|j| (idx / self.site_stride(j) % self.n_phi) as f64 - center)
                    .sum()
            })
            .collect()
    }
}

/// Dense lattice Hamiltonian H_loc(weights) + coupling * hopping on the
/// product basis.
pub fn lattice_hamiltonian(
    params: &ModelParams,
    config: &DiscretizationConfig,
    weights: LatticeWeights,
) -> Result<OperatorMatrix> {
    lattice_hamiltonian_with_limit(params, config, weights, DEFAULT_DENSE_LIMIT)
}

pub fn lattice_hamiltonian_with_limit(
    params: &ModelParams,
    config: &DiscretizationConfig,
    weights: LatticeWeights,
    dense_limit: usize,
) -> Result<OperatorMatrix> {
    let n_sites = params.total_sites();
    let dim = config
        .n_phi
        .checked_pow(n_sites as u32)
        .filter(|&d| d <= dense_limit)
        .ok_or_else(|| {
            Error::Resource(format!(
                "lattice dimension N_phi^N = {}^{} exceeds the dense limit {}",
                config.n_phi, n_sites, dense_limit
            ))
        })?;
    let op = LatticeOperator::build(params, config, weights);
    debug_assert_eq!(op.dim(), dim);
    Ok(OperatorMatrix {
        dim,
        entries: op.to_dense(),
        basis_tag: BasisTag::Lattice { n_sites, n_phi: config.n_phi },
    })
}

/// Lowest part of a Hermitian spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending eigenvalues.
    pub energies: Vec<f64>,
    /// Matching orthonormal eigenvectors.
    pub states: Vec<CVector>,
}

impl SpectrumResult {
    /// E_1 - E_0.
    pub fn gap10(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// E_2 - E_1.
    pub fn gap21(&self) -> f64 {
        self.energies[2] - self.energies[1]
    }
}

/// k lowest eigenpairs of a Hermitian matrix, ascending.
pub fn diagonalize(h: &OperatorMatrix, k: usize) -> Result<SpectrumResult> {
    if !is_hermitian(&h.entries, 1e-10) {
        return Err(Error::Domain("diagonalize requires a Hermitian matrix".into()));
    }
    if k == 0 || k > h.dim {
        return Err(Error::Domain(format!("requested {k} eigenpairs of dim {}", h.dim)));
    }
    let (values, vectors) = hermitian_eigen(&h.entries);
    let mut states: Vec<CVector> =
        (0..k).map(|j| vectors.column(j).into_owned()).collect();
    let energies = values[..k].to_vec();
    let phi_index_diag = match h.basis_tag {
        BasisTag::Local { n_phi } => index_diag(1, n_phi),
        BasisTag::Lattice { n_sites, n_phi } => index_diag(n_sites, n_phi),
    };
    disambiguate_ground_pair(&energies, &mut states, &phi_index_diag);
    for s in states.iter_mut() {
        canonicalize_phase(s);
    }
    Ok(SpectrumResult { energies, states })
}

/// k lowest eigenpairs of a lattice operator; dense below `dense_limit`,
/// Lanczos above.
pub fn diagonalize_operator(
    op: &LatticeOperator,
    k: usize,
    dense_limit: usize,
) -> Result<SpectrumResult> {
    let dim = op.dim();
    let (energies, mut states) = if dim <= dense_limit {
        let dense = op.to_dense();
        let (values, vectors) = hermitian_eigen(&dense);
        (values[..k].to_vec(), (0..k).map(|j| vectors.column(j).into_owned()).collect())
    } else {
        let opts = LanczosOptions {
            max_subspace: (4 * k + 40).min(dim),
            ..LanczosOptions::default()
        };
        lanczos_lowest(dim, k, |v| op.apply(v), &opts)?
    };
    disambiguate_ground_pair(&energies, &mut states, &op.phi_total_index_diag());
    for s in states.iter_mut() {
        canonicalize_phase(s);
    }
    Ok(SpectrumResult { energies, states })
}

fn index_diag(n_sites: usize, n_phi: usize) -> Vec<f64> {
    let center = (n_phi as f64 - 1.0) / 2.0;
    let dim = n_phi.pow(n_sites as u32);
    (0..dim)
        .map(|idx| {
            (0..n_sites)
                .map(|j| (idx / n_phi.pow((n_sites - 1 - j) as u32) % n_phi) as f64 - center)
                .sum()
        })
        .collect()
}

/// For a (near-)degenerate ground pair, rotate the pair into the eigenbasis
/// of the total field and order it toward negative expectation.
fn disambiguate_ground_pair(energies: &[f64], states: &mut [CVector], phi_diag: &[f64]) {
    if energies.len() < 2 || energies[1] - energies[0] > DEGENERACY_GAP {
        return;
    }
    let expect = |v: &CVector| -> f64 {
        v.iter().zip(phi_diag).map(|(a, &d)| a.norm_sqr() * d).sum()
    };
    let cross: Complex64 = states[0]
        .iter()
        .zip(states[1].iter())
        .zip(phi_diag)
        .map(|((a, b), &d)| a.conj() * b * d)
        .sum();
    // 2x2 field matrix in the span, eigenvectors give the polarized pair
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from(expect(&states[0])),
            cross,
            cross.conj(),
            Complex64::from(expect(&states[1])),
        ],
    );
    let (vals, vecs) = hermitian_eigen(&m);
    let mut rotated: Vec<CVector> = (0..2)
        .map(|j| {
            let mut out = &states[0] * vecs[(0, j)] + &states[1] * vecs[(1, j)];
            let n = out.norm();
            out /= Complex64::from(n);
            out
        })
        .collect();
    // vals ascending: index 0 is the most negative field expectation
    debug_assert!(vals[0] <= vals[1]);
    states[0] = rotated.remove(0);
    states[1] = rotated.remove(0);
}

/// Fix the global phase so the largest-magnitude amplitude is real positive.
fn canonicalize_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = 0.0;
    for (i, a) in v.iter().enumerate() {
        let m = a.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / Complex64::from(v[best].norm());
        let correction = phase.conj();
        for a in v.iter_mut() {
            *a *= correction;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config(n_q: usize, mu: f64) -> DiscretizationConfig {
        DiscretizationConfig::new(n_q, mu).unwrap()
    }

    #[test]
    fn dimensionless_conversion() {
        assert_eq!(to_dimensionless(1.0, 1.0, 1.0, 1.0, 1).unwrap(), (1.0, 1.0, 1.0));
        let (m, l, f) = to_dimensionless(4.0, 8.0, 0.0, 0.5, 1).unwrap();
        assert_relative_eq!(m, 1.0);
        assert_relative_eq!(l, 2.0);
        assert_relative_eq!(f, 0.0);
        let (m, l, f) = to_dimensionless(1.0, 1.0, 1.0, 2.0, 3).unwrap();
        assert_relative_eq!(m, 4.0);
        assert_relative_eq!(l, 1.0);
        assert_relative_eq!(f, 8.0);
        assert!(to_dimensionless(1.0, 1.0, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn grid_is_symmetric_and_spaced() {
        let c = config(2, std::f64::consts::FRAC_PI_2);
        let grid = field_grid(&c);
        assert_relative_eq!(c.delta_phi, 1.0, epsilon = 1e-12);
        let expected = [-1.5, -0.5, 0.5, 1.5];
        for (g, e) in grid.iter().zip(expected) {
            assert_relative_eq!(*g, e, epsilon = 1e-12);
        }
        assert!(grid.iter().sum::<f64>().abs() < 1e-12);

        let c1 = config(1, std::f64::consts::PI);
        let g1 = field_grid(&c1);
        assert_relative_eq!(g1[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(g1[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn spacing_product_matches_2pi_over_n() {
        for n_q in 1..=8 {
            for &mu in &[0.3, 1.0, 4.7] {
                let c = config(n_q, mu);
                let product = c.delta_phi * c.delta_kappa;
                let expected = 2.0 * std::f64::consts::PI / c.n_phi as f64;
                assert_relative_eq!(product, expected, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn phi_operator_diagonal_and_traceless() {
        let c = config(3, 0.8);
        let phi = phi_operator(&c);
        let trace: Complex64 = phi.entries.diagonal().iter().sum();
        assert!(trace.norm() < 1e-12);
        let grid = field_grid(&c);
        for i in 1..c.n_phi {
            assert_relative_eq!(grid[i] - grid[i - 1], c.delta_phi, epsilon = 1e-12);
        }
    }

    #[test]
    fn centered_ft_two_point_matrix() {
        let c = config(1, 1.0);
        let ft = centered_ft_matrix(&c).entries;
        let r = 1.0 / 2f64.sqrt();
        let q = std::f64::consts::FRAC_PI_4;
        assert!((ft[(0, 0)] - Complex64::from_polar(r, q)).norm() < 1e-14);
        assert!((ft[(0, 1)] - Complex64::from_polar(r, -q)).norm() < 1e-14);
        assert!((ft[(1, 0)] - Complex64::from_polar(r, -q)).norm() < 1e-14);
        assert!((ft[(1, 1)] - Complex64::from_polar(r, q)).norm() < 1e-14);
    }

    #[test]
    fn centered_ft_is_unitary() {
        for n_q in 1..=8 {
            let c = config(n_q, 1.3);
            let ft = centered_ft_matrix(&c).entries;
            let gram = ft.adjoint() * &ft;
            let dist = (&gram - CMatrix::identity(c.n_phi, c.n_phi)).norm();
            assert!(dist < 1e-12 * c.n_phi as f64, "n_q={n_q}: {dist}");
        }
    }

    #[test]
    fn ft_columns_build_kappa_states() {
        // F |phi_beta> must reproduce the plane-wave superposition defining
        // |kappa_beta>.
        let c = config(3, 0.9);
        let ft = centered_ft_matrix(&c).entries;
        let n = c.n_phi;
        let center = (n as f64 - 1.0) / 2.0;
        let freq = 2.0 * std::f64::consts::PI / n as f64;
        for beta in 0..n {
            for alpha in 0..n {
                let expected = Complex64::from_polar(
                    1.0 / (n as f64).sqrt(),
                    freq * (alpha as f64 - center) * (beta as f64 - center),
                );
                assert!((ft[(alpha, beta)] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn pi_operator_spectrum_and_similarity() {
        let mu = 2.0 / std::f64::consts::PI;
        let c = config(2, mu);
        assert_relative_eq!(c.delta_kappa, 1.0, epsilon = 1e-12);
        let pi = pi_operator(&c);
        assert!(is_hermitian(&pi.entries, 1e-12));
        let (values, _) = hermitian_eigen(&pi.entries);
        let expected = [-1.5, -0.5, 0.5, 1.5];
        for (v, e) in values.iter().zip(expected) {
            assert_relative_eq!(*v, e, epsilon = 1e-10);
        }
        // F^-1 Pi F is diagonal with the kappa grid (reversed convention folds
        // into the similarity direction).
        let ft = centered_ft_matrix(&c).entries;
        let similar = ft.adjoint() * &pi.entries * &ft;
        for i in 0..c.n_phi {
            for j in 0..c.n_phi {
                if i != j {
                    assert!(similar[(i, j)].norm() < 1e-10);
                }
            }
        }
        // identity Pi = mu F Phi F^dagger checked entrywise
        let phi = phi_operator(&c).entries;
        let rebuilt = &ft * phi * ft.adjoint() * Complex64::from(c.mu);
        assert!((&rebuilt - &pi.entries).norm() < 1e-12);
    }

    #[test]
    fn commutator_residual_matches_sampling_accuracy() {
        let c = config(6, 1.0);
        let r = commutator_residual(&c, 32).unwrap();
        assert!(r < 5e-4, "residual {r}");
        assert!(r > 0.0);
        // projector on a single state is far more forgiving than the
        // near-full-space projector
        let tight = commutator_residual(&c, 1).unwrap();
        let loose = commutator_residual(&c, c.n_phi - 1).unwrap();
        assert!(tight < loose);
    }

    #[test]
    fn commutator_residual_decreases_with_n_phi() {
        let r5 = commutator_residual(&config(5, 1.0), 16).unwrap();
        let r6 = commutator_residual(&config(6, 1.0), 16).unwrap();
        let r7 = commutator_residual(&config(7, 1.0), 16).unwrap();
        assert!(r6 < r5);
        assert!(r7 < r6);
    }

    #[test]
    fn commutator_residual_below_threshold_at_half_cutoff() {
        for n_q in [5, 6, 7] {
            let c = config(n_q, 1.0);
            let r = commutator_residual(&c, c.n_phi / 2).unwrap();
            assert!(r <= 1e-3, "n_q={n_q}: {r}");
        }
    }

    #[test]
    fn harmonic_local_spectrum() {
        let mu = 1.0;
        let c = config(6, mu);
        let h = local_hamiltonian(mu * mu, 0.0, 0.0, &c);
        let spec = diagonalize(&h, c.n_b).unwrap();
        for (n, e) in spec.energies.iter().enumerate() {
            let expected = (n as f64 + 0.5) * mu;
            assert!(
                (e - expected).abs() / expected < 1e-3,
                "level {n}: {e} vs {expected}"
            );
        }
        assert!((spec.energies[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn strong_coupling_ground_state_single_peaked_symmetric() {
        // lambda / m^3 = 100
        let c = config(6, 1.0);
        let h = local_hamiltonian(1.0, 100.0, 0.0, &c);
        let spec = diagonalize(&h, 2).unwrap();
        let gs = &spec.states[0];
        let probs: Vec<f64> = gs.iter().map(|a| a.norm_sqr()).collect();
        // symmetric under alpha -> N-1-alpha
        for i in 0..c.n_phi / 2 {
            assert!((probs[i] - probs[c.n_phi - 1 - i]).abs() < 1e-8);
        }
        // single peak: probability rises to the center then falls
        let half = &probs[..c.n_phi / 2];
        assert!(half.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn double_well_ground_state_double_peaked() {
        let c = config(6, 1.0);
        let h = local_hamiltonian(-1.0, 1.0, 0.0, &c);
        let spec = diagonalize(&h, 2).unwrap();
        let probs: Vec<f64> = spec.states[0].iter().map(|a| a.norm_sqr()).collect();
        let center = c.n_phi / 2;
        let peak = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(peak != center && peak != center - 1, "peak at the center");
        // the mirror point carries the same weight
        assert!((probs[peak] - probs[c.n_phi - 1 - peak]).abs() < 1e-6);
    }

    #[test]
    fn bonds_layouts() {
        let p2 = ModelParams::chain(0.0, 0.0, 0.0, 2).unwrap();
        assert_eq!(p2.bonds(), vec![(0, 1)]);
        let p4 = ModelParams::chain(0.0, 0.0, 0.0, 4).unwrap();
        assert_eq!(p4.bonds(), vec![(0, 1), (1, 2), (2, 3), (0, 3)]);
        let open4 = ModelParams::new(0.0, 0.0, 0.0, 1, 4, Boundary::Open).unwrap();
        assert_eq!(open4.bonds(), vec![(0, 1), (1, 2), (2, 3)]);
        let p1 = ModelParams::chain(0.0, 0.0, 0.0, 1).unwrap();
        assert!(p1.bonds().is_empty());
        let grid2 = ModelParams::new(0.0, 0.0, 0.0, 2, 2, Boundary::Periodic).unwrap();
        assert_eq!(grid2.bonds().len(), 4);
    }

    #[test]
    fn decoupled_lattice_is_sum_of_local_problems() {
        let c = config(3, 1.0);
        let params = ModelParams::chain(0.7, 0.4, 0.1, 2).unwrap();
        let weights = LatticeWeights { coupling: 0.0, m_sq: 0.7, lambda: 0.4, f: 0.1 };
        let h = lattice_hamiltonian(&params, &c, weights).unwrap();
        let spec = diagonalize(&h, 1).unwrap();
        let local = local_hamiltonian(0.7, 0.4, 0.1, &c);
        let local_spec = diagonalize(&local, 1).unwrap();
        assert_relative_eq!(
            spec.energies[0],
            2.0 * local_spec.energies[0],
            max_relative = 1e-10
        );
        // ground state is the product of local ground states
        let product = {
            let a = &local_spec.states[0];
            CVector::from_fn(h.dim, |idx, _| a[idx / c.n_phi] * a[idx % c.n_phi])
        };
        let overlap: Complex64 =
            product.iter().zip(spec.states[0].iter()).map(|(p, s)| p.conj() * s).sum();
        assert!(overlap.norm_sqr() > 1.0 - 1e-10);
    }

    #[test]
    fn lattice_operator_matches_dense_assembly() {
        let c = config(2, 1.1);
        let params = ModelParams::chain(-0.3, 0.8, 0.05, 3).unwrap();
        let weights = LatticeWeights::bare(&params);
        let op = LatticeOperator::build(&params, &c, weights);
        let dense = op.to_dense();
        assert!(is_hermitian(&dense, 1e-12));
        // matrix-free apply equals dense multiply on a random vector
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let v = CVector::from_fn(op.dim(), |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let via_apply = op.apply(&v);
        let via_dense = &dense * &v;
        assert!((via_apply - via_dense).norm() < 1e-10);
    }

    #[test]
    fn dense_limit_enforced() {
        let c = config(5, 1.0);
        let params = ModelParams::chain(0.1, 0.1, 0.0, 3).unwrap();
        let res = lattice_hamiltonian(&params, &c, LatticeWeights::bare(&params));
        assert!(matches!(res, Err(Error::Resource(_))));
    }

    #[test]
    fn diagonalize_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::from(1.0);
        let op = OperatorMatrix::local(m);
        assert!(matches!(diagonalize(&op, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn diagonalize_identity_and_residuals() {
        let id = OperatorMatrix::local(CMatrix::identity(8, 8));
        let spec = diagonalize(&id, 4).unwrap();
        for e in &spec.energies {
            assert_relative_eq!(*e, 1.0, epsilon = 1e-12);
        }
        let c = config(4, 1.0);
        let h = local_hamiltonian(0.6, 2.0, -0.2, &c);
        let spec = diagonalize(&h, 5).unwrap();
        for (e, v) in spec.energies.iter().zip(&spec.states) {
            let r = (&h.entries * v - v * Complex64::from(*e)).norm();
            assert!(r <= 1e-10, "residual {r}");
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
        assert!(spec.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degenerate_pair_polarized_by_field_sign() {
        // deep double well: near-exact degeneracy
        let c = config(6, 2.0);
        let h = local_hamiltonian(-4.0, 0.3, 0.0, &c);
        let spec = diagonalize(&h, 2).unwrap();
        if spec.gap10() < 1e-10 {
            let grid = field_grid(&c);
            let expect = |v: &CVector| -> f64 {
                v.iter().zip(&grid).map(|(a, &x)| a.norm_sqr() * x).sum()
            };
            let e0 = expect(&spec.states[0]);
            let e1 = expect(&spec.states[1]);
            assert!(e0 < 0.0 && e1 > 0.0, "expected polarized pair, got {e0}, {e1}");
        }
    }

    #[test]
    fn lanczos_agrees_with_dense_on_two_site_lattice() {
        let c = config(3, 1.0);
        let params = ModelParams::chain(-0.5, 0.5, 0.02, 2).unwrap();
        let op = LatticeOperator::build(&params, &c, LatticeWeights::bare(&params));
        let dense = diagonalize_operator(&op, 3, usize::MAX).unwrap();
        let sparse = diagonalize_operator(&op, 3, 1).unwrap();
        for i in 0..3 {
            assert!((dense.energies[i] - sparse.energies[i]).abs() < 1e-8);
        }
    }
}
