//! Statevector execution engine: gate application, fidelity, expectation
//! values, reduced density matrices, and state snapshots.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so a lattice
//! register layout (site 0 first) indexes amplitudes exactly like the
//! `N_phi^N` product basis used by the exact-diagonalization code.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::circuits::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{self, DiscretizationConfig};

const RENORM_THRESHOLD: f64 = 1e-8;

/// Normalized amplitude vector over `2^n_qubits` basis states.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<Complex64>,
    /// Diagnostics: renormalizations forced by norm drift beyond 1e-8.
    pub renormalizations: usize,
    /// Largest norm drift observed before correction.
    pub max_drift: f64,
}

impl StateVector {
    /// |0...0>.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::default(); 1 << n_qubits];
        amps[0] = Complex64::from(1.0);
        Self { n_qubits, amps, renormalizations: 0, max_drift: 0.0 }
    }

    /// Wrap an amplitude vector; the length must be a power of two and the
    /// vector is normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Domain(format!("amplitude length {dim} is not a power of two")));
        }
        let mut s = Self {
            n_qubits: dim.trailing_zeros() as usize,
            amps,
            renormalizations: 0,
            max_drift: 0.0,
        };
        let n = s.norm();
        if n == 0.0 {
            return Err(Error::Domain("zero state".into()));
        }
        if (n - 1.0).abs() > 1e-12 {
            s.scale(1.0 / n);
        }
        Ok(s)
    }

    pub fn from_vector(v: &CVector) -> Result<Self> {
        Self::from_amplitudes(v.iter().copied().collect())
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_iterator(self.amps.len(), self.amps.iter().copied())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scale(&mut self, s: f64) {
        for a in self.amps.iter_mut() {
            *a *= s;
        }
    }

    /// Apply a circuit in place.
    pub fn apply_mut(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Dimension { expected: self.n_qubits, got: circuit.n_qubits });
        }
        for gate in &circuit.gates {
            self.apply_gate(gate);
        }
        let drift = (self.norm() - 1.0).abs();
        if drift > self.max_drift {
            self.max_drift = drift;
        }
        if drift > RENORM_THRESHOLD {
            let n = self.norm();
            self.scale(1.0 / n);
            self.renormalizations += 1;
        }
        Ok(())
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn apply_gate(&mut self, gate: &Gate) {
        match *gate {
            Gate::Rz { q, theta } => {
                let p0 = Complex64::from_polar(1.0, -theta / 2.0);
                let p1 = Complex64::from_polar(1.0, theta / 2.0);
                let m = self.mask(q);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & m == 0 { p0 } else { p1 };
                }
            }
            Gate::Ry { q, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.apply_one_qubit(q, [
                    Complex64::from(c),
                    Complex64::from(-s),
                    Complex64::from(s),
                    Complex64::from(c),
                ]);
            }
            Gate::H { q } => {
                let r = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
                self.apply_one_qubit(q, [r, r, r, -r]);
            }
            Gate::Cz { a, b } => {
                let (ma, mb) = (self.mask(a), self.mask(b));
                let both = ma | mb;
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & both == both {
                        *amp = -*amp;
                    }
                }
            }
            Gate::CPhase { control, target, theta } => {
                let both = self.mask(control) | self.mask(target);
                let p = Complex64::from_polar(1.0, theta);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & both == both {
                        *amp *= p;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (mc, mt) = (self.mask(control), self.mask(target));
                for i in 0..self.amps.len() {
                    if i & mc != 0 && i & mt == 0 {
                        self.amps.swap(i, i | mt);
                    }
                }
            }
            Gate::Swap { a, b } => {
                let (ma, mb) = (self.mask(a), self.mask(b));
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, i ^ ma ^ mb);
                    }
                }
            }
            Gate::Zz { a, b, nu } => {
                let (ma, mb) = (self.mask(a), self.mask(b));
                let same = Complex64::from_polar(1.0, -nu);
                let diff = Complex64::from_polar(1.0, nu);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = (i & ma != 0) ^ (i & mb != 0);
                    *amp *= if parity { diff } else { same };
                }
            }
            Gate::Zzzz { a, b, c, d, rho } => {
                let masks = [self.mask(a), self.mask(b), self.mask(c), self.mask(d)];
                let even = Complex64::from_polar(1.0, -rho);
                let odd = Complex64::from_polar(1.0, rho);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = masks.iter().fold(false, |p, &m| p ^ (i & m != 0));
                    *amp *= if parity { odd } else { even };
                }
            }
            Gate::GlobalPhase { xi } => {
                let p = Complex64::from_polar(1.0, xi);
                for amp in self.amps.iter_mut() {
                    *amp *= p;
                }
            }
        }
    }

    fn apply_one_qubit(&mut self, q: usize, u: [Complex64; 4]) {
        let m = self.mask(q);
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let j = i | m;
                let (x, y) = (self.amps[i], self.amps[j]);
                self.amps[i] = u[0] * x + u[1] * y;
                self.amps[j] = u[2] * x + u[3] * y;
            }
        }
    }
}

/// U |psi> as a new state.
pub fn apply(state: &StateVector, circuit: &Circuit) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_mut(circuit)?;
    Ok(out)
}

/// |<a|b>|^2.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let overlap: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(overlap.norm_sqr().clamp(0.0, 1.0))
}

/// |<a|b>|^2 for plain amplitude vectors.
pub fn vector_fidelity(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm_sqr().clamp(0.0, 1.0)
}

/// Full dense unitary of a circuit, one basis column at a time.
pub fn circuit_unitary(circuit: &Circuit) -> Result<CMatrix> {
    let dim = 1usize << circuit.n_qubits;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut amps = vec![Complex64::default(); dim];
        amps[col] = Complex64::from(1.0);
        let mut s = StateVector {
            n_qubits: circuit.n_qubits,
            amps,
            renormalizations: 0,
            max_drift: 0.0,
        };
        s.apply_mut(circuit)?;
        for (row, a) in s.amps.iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    Ok(u)
}

/// Reduced density matrix of one site register.
#[derive(Debug, Clone)]
pub struct ReducedDensity {
    pub site: usize,
    pub matrix: CMatrix,
}

/// Trace out every site except `site` from a pure state over `n_sites`
/// registers of local dimension `n_phi`.
pub fn reduce(state: &StateVector, n_phi: usize, site: usize) -> Result<ReducedDensity> {
    reduce_vector(&state.to_vector(), n_phi, site)
}

/// Same as [`reduce`] for a plain amplitude vector of length `n_phi^n_sites`.
pub fn reduce_vector(amps: &CVector, n_phi: usize, site: usize) -> Result<ReducedDensity> {
    let dim = amps.len();
    let mut n_sites = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc *= n_phi;
        n_sites += 1;
    }
    if acc != dim {
        return Err(Error::Domain(format!("dimension {dim} is not a power of {n_phi}")));
    }
    if site >= n_sites {
        return Err(Error::Domain(format!("site {site} out of range ({n_sites} sites)")));
    }
    let stride = n_phi.pow((n_sites - 1 - site) as u32);
    let block = stride * n_phi;
    let mut rho = CMatrix::zeros(n_phi, n_phi);
    let mut base = 0;
    while base < dim {
        for lo in 0..stride {
            for a in 0..n_phi {
                let xa = amps[base + lo + a * stride];
                if xa == Complex64::default() {
                    continue;
                }
                for b in 0..n_phi {
                    let xb = amps[base + lo + b * stride];
                    rho[(a, b)] += xa * xb.conj();
                }
            }
        }
        base += block;
    }
    Ok(ReducedDensity { site, matrix: rho })
}

/// Local fidelity <psi_loc| rho |psi_loc>.
pub fn local_fidelity(local_state: &CVector, rho: &ReducedDensity) -> Result<f64> {
    if local_state.len() != rho.matrix.nrows() {
        return Err(Error::Dimension { expected: rho.matrix.nrows(), got: local_state.len() });
    }
    let image = &rho.matrix * local_state;
    Ok(local_state.dotc(&image).re.clamp(0.0, 1.0))
}

/// Single-site observables in the field amplitude basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Phi(usize),
    Phi2(usize),
    Pi(usize),
    Pi2(usize),
    PhiTotal,
}

/// Real expectation value of a site observable.
pub fn expectation(
    state: &StateVector,
    config: &DiscretizationConfig,
    obs: Observable,
) -> Result<f64> {
    let n_phi = config.n_phi;
    let grid = model::field_grid(config);
    let site_value = |site: usize, op: &CMatrix| -> Result<f64> {
        let rho = reduce(state, n_phi, site)?;
        let mut tr = Complex64::default();
        for i in 0..n_phi {
            for j in 0..n_phi {
                tr += rho.matrix[(i, j)] * op[(j, i)];
            }
        }
        debug_assert!(tr.im.abs() < 1e-10, "imaginary expectation {}", tr.im);
        Ok(tr.re)
    };
    match obs {
        Observable::Phi(site) => {
            let rho = reduce(state, n_phi, site)?;
            Ok((0..n_phi).map(|a| rho.matrix[(a, a)].re * grid[a]).sum())
        }
        Observable::Phi2(site) => {
            let rho = reduce(state, n_phi, site)?;
            Ok((0..n_phi).map(|a| rho.matrix[(a, a)].re * grid[a] * grid[a]).sum())
        }
        Observable::Pi(site) => site_value(site, &model::pi_operator(config).entries),
        Observable::Pi2(site) => {
            let pi = model::pi_operator(config).entries;
            site_value(site, &(&pi * &pi))
        }
        Observable::PhiTotal => {
            let dim = state.dim();
            let mut n_sites = 0;
            let mut acc = 1usize;
            while acc < dim {
                acc *= n_phi;
                n_sites += 1;
            }
            let mut total = 0.0;
            for (idx, a) in state.amps.iter().enumerate() {
                let w = a.norm_sqr();
                if w == 0.0 {
                    continue;
                }
                let mut phi_sum = 0.0;
                for j in 0..n_sites {
                    let alpha = idx / n_phi.pow((n_sites - 1 - j) as u32) % n_phi;
                    phi_sum += grid[alpha];
                }
                total += w * phi_sum;
            }
            Ok(total)
        }
    }
}

const SNAPSHOT_MAGIC: &str = "PHI4STATE 1";

/// Write a snapshot: text header (n_qubits, norm, tag) followed by raw
/// little-endian interleaved re/im doubles.
pub fn save_state<W: Write>(mut w: W, state: &StateVector, tag: &str) -> Result<()> {
    writeln!(w, "{SNAPSHOT_MAGIC}")?;
    writeln!(w, "n_qubits={}", state.n_qubits)?;
    writeln!(w, "norm={:.16e}", state.norm())?;
    writeln!(w, "tag={tag}")?;
    writeln!(w, "data")?;
    for a in &state.amps {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

/// Read a snapshot written by [`save_state`]; returns the state and its tag.
pub fn load_state<R: Read>(r: R) -> Result<(StateVector, String)> {
    let mut reader = std::io::BufReader::new(r);
    let mut line = String::new();
    let mut read_line = |reader: &mut std::io::BufReader<R>| -> Result<String> {
        line.clear();
        reader.read_line(&mut line)?;
        Ok(line.trim_end_matches('\n').to_string())
    };
    if read_line(&mut reader)? != SNAPSHOT_MAGIC {
        return Err(Error::Parse("bad snapshot magic".into()));
    }
    let nq_line = read_line(&mut reader)?;
    let n_qubits: usize = nq_line
        .strip_prefix("n_qubits=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad n_qubits line: {nq_line}")))?;
    let _norm_line = read_line(&mut reader)?;
    let tag_line = read_line(&mut reader)?;
    let tag = tag_line
        .strip_prefix("tag=")
        .ok_or_else(|| Error::Parse(format!("bad tag line: {tag_line}")))?
        .to_string();
    if read_line(&mut reader)? != "data" {
        return Err(Error::Parse("missing data marker".into()));
    }
    let dim = 1usize << n_qubits;
    let mut amps = Vec::with_capacity(dim);
    let mut buf = [0u8; 16];
    for _ in 0..dim {
        reader.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        amps.push(Complex64::new(re, im));
    }
    Ok((StateVector::from_amplitudes(amps)?, tag))
}
