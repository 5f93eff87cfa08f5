//! Gate-level IR and constructors for the Trotter steps of the phi^4
//! evolution operator, the centered Fourier transform circuit, decomposition
//! to CNOT + rotations, and per-term gate counting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DiscretizationConfig, LatticeWeights, ModelParams};

/// Elementary gate over global qubit indices.
///
/// Conventions: `Rz(theta) = exp(-i theta Z/2)`, `Ry(theta) = exp(-i theta Y/2)`,
/// `Zz(nu) = exp(-i nu Z Z)`, `Zzzz(rho) = exp(-i rho Z Z Z Z)`,
/// `CPhase(theta) = diag(1,1,1,e^{i theta})`, `GlobalPhase(xi) = e^{i xi}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Rz { q: usize, theta: f64 },
    Ry { q: usize, theta: f64 },
    H { q: usize },
    Cz { a: usize, b: usize },
    Cnot { control: usize, target: usize },
    Zz { a: usize, b: usize, nu: f64 },
    Zzzz { a: usize, b: usize, c: usize, d: usize, rho: f64 },
    CPhase { control: usize, target: usize, theta: f64 },
    GlobalPhase { xi: f64 },
    Swap { a: usize, b: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rz { q, .. } | Gate::Ry { q, .. } | Gate::H { q } => vec![q],
            Gate::Cz { a, b } | Gate::Zz { a, b, .. } | Gate::Swap { a, b } => vec![a, b],
            Gate::Cnot { control, target } | Gate::CPhase { control, target, .. } => {
                vec![control, target]
            }
            Gate::Zzzz { a, b, c, d, .. } => vec![a, b, c, d],
            Gate::GlobalPhase { .. } => vec![],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rz { theta, .. } | Gate::Ry { theta, .. } | Gate::CPhase { theta, .. } => {
                Some(theta)
            }
            Gate::Zz { nu, .. } => Some(nu),
            Gate::Zzzz { rho, .. } => Some(rho),
            Gate::GlobalPhase { xi } => Some(xi),
            _ => None,
        }
    }

    pub fn dagger(&self) -> Gate {
        match *self {
            Gate::Rz { q, theta } => Gate::Rz { q, theta: -theta },
            Gate::Ry { q, theta } => Gate::Ry { q, theta: -theta },
            Gate::Zz { a, b, nu } => Gate::Zz { a, b, nu: -nu },
            Gate::Zzzz { a, b, c, d, rho } => Gate::Zzzz { a, b, c, d, rho: -rho },
            Gate::CPhase { control, target, theta } => {
                Gate::CPhase { control, target, theta: -theta }
            }
            Gate::GlobalPhase { xi } => Gate::GlobalPhase { xi: -xi },
            ref g => g.clone(),
        }
    }

    fn validate(&self, n_qubits: usize) {
        let qs = self.qubits();
        for &q in &qs {
            assert!(q < n_qubits, "gate qubit {q} out of range (n_qubits = {n_qubits})");
        }
        for i in 0..qs.len() {
            for j in i + 1..qs.len() {
                assert!(qs[i] != qs[j], "repeated qubit {} in gate", qs[i]);
            }
        }
        if let Some(a) = self.angle() {
            assert!(a.is_finite(), "non-finite gate angle");
        }
    }
}

/// Contiguous qubit range assigned to one site register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Register {
    pub start: usize,
    pub n_q: usize,
}

impl Register {
    pub fn site(site: usize, n_q: usize) -> Self {
        Self { start: site * n_q, n_q }
    }

    pub fn qubit(&self, q: usize) -> usize {
        debug_assert!(q < self.n_q);
        self.start + q
    }

    pub fn end(&self) -> usize {
        self.start + self.n_q
    }
}

/// Ordered gate list; composition order is application order (the first gate
/// in the list is applied to the state first).
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub registers: Vec<Register>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new(), registers: Vec::new() }
    }

    pub fn with_registers(n_qubits: usize, registers: Vec<Register>) -> Self {
        Self { n_qubits, gates: Vec::new(), registers }
    }

    pub fn push(&mut self, gate: Gate) {
        gate.validate(self.n_qubits);
        self.gates.push(gate);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) {
        for g in gates {
            self.push(g);
        }
    }

    pub fn dagger(&self) -> Circuit {
        let gates = self.gates.iter().rev().map(Gate::dagger).collect();
        Circuit { n_qubits: self.n_qubits, gates, registers: self.registers.clone() }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    pub fn single_qubit_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Rz { .. } | Gate::Ry { .. } | Gate::H { .. }))
            .count()
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// Swap-free QFT ladder on a register: H plus controlled-phase gates,
/// processing the most significant qubit first. The resulting unitary is the
/// plain DFT composed with a bit-reversal permutation on the output.
pub fn qft_circuit(register: Register) -> Circuit {
    let mut c = Circuit::with_registers(register.end(), vec![register]);
    c.extend(qft_ladder(register));
    c
}

fn qft_ladder(register: Register) -> Vec<Gate> {
    let n = register.n_q;
    let mut gates = Vec::new();
    for q in 0..n {
        gates.push(Gate::H { q: register.qubit(q) });
        for t in q + 1..n {
            gates.push(Gate::CPhase {
                control: register.qubit(t),
                target: register.qubit(q),
                theta: std::f64::consts::PI / pow2((t - q) as i32),
            });
        }
    }
    gates
}

fn rz_layer(register: Register, delta: f64, reversed: bool) -> Vec<Gate> {
    let n = register.n_q;
    (0..n)
        .map(|q| {
            let exponent = if reversed { q as i32 } else { (n - 1 - q) as i32 };
            Gate::Rz { q: register.qubit(q), theta: pow2(exponent) * delta }
        })
        .collect()
}

fn swap_layer(register: Register) -> Vec<Gate> {
    let n = register.n_q;
    (0..n / 2)
        .map(|q| Gate::Swap { a: register.qubit(q), b: register.qubit(n - 1 - q) })
        .collect()
}

/// Centered finite Fourier transform as a circuit: an Rz dressing layer on
/// both sides of the QFT plus a global phase.
///
/// With `with_swaps` the unitary equals the centered FT matrix exactly;
/// without swaps it equals the centered FT composed with the bit-reversal
/// permutation left by the swap-free QFT (the Rz layer that lands after the
/// ladder carries reversed exponents to act on the permuted qubits).
///
/// The dressing layers carry angle -2^{n_q-1-q} delta: factoring the
/// diagonal exp(-i delta alpha) over Rz(theta) = exp(-i theta Z/2) gates
/// flips the sign since alpha_q = (1 - sigma_z)/2.
pub fn centered_ft_circuit(register: Register, with_swaps: bool) -> Circuit {
    let n_phi = pow2(register.n_q as i32);
    let delta = std::f64::consts::PI * (n_phi - 1.0) / n_phi;
    let mut c = Circuit::with_registers(register.end(), vec![register]);
    c.extend(rz_layer(register, -delta, false));
    c.extend(qft_ladder(register));
    if with_swaps {
        c.extend(swap_layer(register));
        c.extend(rz_layer(register, -delta, false));
    } else {
        c.extend(rz_layer(register, -delta, true));
    }
    c.push(Gate::GlobalPhase { xi: -n_phi * delta * delta / (2.0 * std::f64::consts::PI) });
    c
}

/// exp(-i theta Phi) on one site register: n_q plain z rotations.
pub fn trotter_phi(config: &DiscretizationConfig, register: Register, theta: f64) -> Circuit {
    let n = register.n_q;
    let mut c = Circuit::with_registers(register.end(), vec![register]);
    for q in 0..n {
        c.push(Gate::Rz {
            q: register.qubit(q),
            theta: -pow2((n - 1 - q) as i32) * config.delta_phi * theta,
        });
    }
    c
}

fn zz_pair_gates(register: Register, angle: impl Fn(usize, usize) -> f64) -> Vec<Gate> {
    let n = register.n_q;
    let mut gates = Vec::new();
    for p in 0..n {
        for q in 0..p {
            gates.push(Gate::Zz {
                a: register.qubit(q),
                b: register.qubit(p),
                nu: angle(p, q),
            });
        }
    }
    gates
}

/// exp(-i theta Phi^2) on one site register: ZZ pairs plus a global phase.
pub fn trotter_phi2(config: &DiscretizationConfig, register: Register, theta: f64) -> Circuit {
    let n = register.n_q as i32;
    let n_phi_sq = pow2(2 * n);
    let d2 = config.delta_phi * config.delta_phi;
    let mut c = Circuit::with_registers(register.end(), vec![register]);
    c.extend(zz_pair_gates(register, |p, q| {
        pow2(2 * n - 3 - p as i32 - q as i32) * d2 * theta
    }));
    c.push(Gate::GlobalPhase { xi: -theta * d2 * (n_phi_sq - 1.0) / 12.0 });
    c
}

/// exp(-i theta Pi^2) on one site register.
///
/// Uses Pi^2 = mu^2 F Phi^2 F^-1 with the swap-free QFT: the bit reversal
/// left by the ladder is absorbed into the reversed exponents of the inner
/// ZZ angles, so no swap gates are emitted. The outer Rz dressing layers of
/// the centered FT survive the similarity transform; the inner ones and the
/// FT global phases cancel.
pub fn trotter_pi2(config: &DiscretizationConfig, register: Register, theta: f64) -> Circuit {
    let n = register.n_q;
    let n_phi = pow2(n as i32);
    let delta = std::f64::consts::PI * (n_phi - 1.0) / n_phi;
    let dk2 = config.delta_kappa * config.delta_kappa;

    let ladder = qft_ladder(register);
    // reversed gate order realizes the transpose DFT * bit-reversal
    let dft_rev: Vec<Gate> = ladder.iter().rev().cloned().collect();
    let dft_rev_dagger: Vec<Gate> = ladder.iter().map(Gate::dagger).collect();

    let mut c = Circuit::with_registers(register.end(), vec![register]);
    c.extend(rz_layer(register, delta, false));
    c.extend(dft_rev_dagger);
    c.extend(zz_pair_gates(register, |p, q| pow2(p as i32 + q as i32 - 1) * dk2 * theta));
    c.push(Gate::GlobalPhase { xi: -theta * dk2 * (n_phi * n_phi - 1.0) / 12.0 });
    c.extend(dft_rev);
    c.extend(rz_layer(register, -delta, false));
    c
}

/// exp(-i theta Phi_j Phi_l) coupling two distinct site registers.
pub fn trotter_phiphi(
    config: &DiscretizationConfig,
    reg_j: Register,
    reg_l: Register,
    theta: f64,
) -> Result<Circuit> {
    if reg_j == reg_l || (reg_j.start < reg_l.end() && reg_l.start < reg_j.end()) {
        return Err(Error::Domain("coupling term requires two distinct site registers".into()));
    }
    let n = reg_j.n_q as i32;
    let d2 = config.delta_phi * config.delta_phi;
    let n_qubits = reg_j.end().max(reg_l.end());
    let mut c = Circuit::with_registers(n_qubits, vec![reg_j, reg_l]);
    for p in 0..reg_j.n_q {
        for q in 0..reg_l.n_q {
            c.push(Gate::Zz {
                a: reg_j.qubit(p),
                b: reg_l.qubit(q),
                nu: pow2(2 * n - 4 - p as i32 - q as i32) * d2 * theta,
            });
        }
    }
    Ok(c)
}

/// exp(-i theta Phi^4) on one site register: ZZZZ quadruples, ZZ pairs and a
/// global phase (all terms commute, so the step is exact).
pub fn trotter_phi4(config: &DiscretizationConfig, register: Register, theta: f64) -> Circuit {
    let n = register.n_q;
    let n_phi = pow2(n as i32);
    let d4 = config.delta_phi.powi(4);
    let mut c = Circuit::with_registers(register.end(), vec![register]);
    for p in 0..n {
        for q in 0..p {
            for r in 0..q {
                for s in 0..r {
                    let rho = 3.0 * n_phi.powi(4) / 32.0
                        * pow2(-((p + q + r + s) as i32))
                        * theta
                        * d4;
                    c.push(Gate::Zzzz {
                        a: register.qubit(s),
                        b: register.qubit(r),
                        c: register.qubit(q),
                        d: register.qubit(p),
                        rho,
                    });
                }
            }
        }
    }
    c.extend(zz_pair_gates(register, |p, q| {
        n_phi.powi(4) / 16.0
            * pow2(-((p + q) as i32))
            * (1.0
                - 1.0 / (n_phi * n_phi)
                - pow2(-(2 * p as i32 + 1))
                - pow2(-(2 * q as i32 + 1)))
            * theta
            * d4
    }));
    let xi = ((n_phi * n_phi - 1.0).powi(2) / 48.0 - (n_phi.powi(4) - 1.0) / 120.0) * theta * d4;
    c.push(Gate::GlobalPhase { xi: -xi });
    c
}

fn decompose_gate(gate: &Gate, out: &mut Vec<Gate>) {
    match *gate {
        Gate::Zz { a, b, nu } => {
            out.push(Gate::Cnot { control: a, target: b });
            out.push(Gate::Rz { q: b, theta: 2.0 * nu });
            out.push(Gate::Cnot { control: a, target: b });
        }
        Gate::Zzzz { a, b, c, d, rho } => {
            out.push(Gate::Cnot { control: a, target: b });
            out.push(Gate::Cnot { control: b, target: c });
            out.push(Gate::Cnot { control: c, target: d });
            out.push(Gate::Rz { q: d, theta: 2.0 * rho });
            out.push(Gate::Cnot { control: c, target: d });
            out.push(Gate::Cnot { control: b, target: c });
            out.push(Gate::Cnot { control: a, target: b });
        }
        Gate::CPhase { control, target, theta } => {
            out.push(Gate::Rz { q: control, theta: theta / 2.0 });
            out.push(Gate::Rz { q: target, theta: theta / 2.0 });
            out.push(Gate::Cnot { control, target });
            out.push(Gate::Rz { q: target, theta: -theta / 2.0 });
            out.push(Gate::Cnot { control, target });
            out.push(Gate::GlobalPhase { xi: theta / 4.0 });
        }
        Gate::Cz { a, b } => {
            decompose_gate(&Gate::CPhase { control: a, target: b, theta: std::f64::consts::PI }, out)
        }
        Gate::Swap { a, b } => {
            out.push(Gate::Cnot { control: a, target: b });
            out.push(Gate::Cnot { control: b, target: a });
            out.push(Gate::Cnot { control: a, target: b });
        }
        ref g => out.push(g.clone()),
    }
}

/// Rewrite a circuit over the base gate set {CNOT, Rz, Ry, H, GlobalPhase},
/// preserving the unitary including its global phase.
pub fn decompose(circuit: &Circuit) -> Circuit {
    let mut gates = Vec::with_capacity(circuit.gates.len() * 3);
    for g in &circuit.gates {
        decompose_gate(g, &mut gates);
    }
    Circuit { n_qubits: circuit.n_qubits, gates, registers: circuit.registers.clone() }
}

/// Trotter-step terms of the phi^4 Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrotterTerm {
    Phi,
    Phi2,
    Pi2,
    PhiPhi,
    Phi4,
}

impl TrotterTerm {
    pub const ALL: [TrotterTerm; 5] =
        [TrotterTerm::Phi, TrotterTerm::Phi2, TrotterTerm::Pi2, TrotterTerm::PhiPhi, TrotterTerm::Phi4];

    pub fn label(&self) -> &'static str {
        match self {
            TrotterTerm::Phi => "phi",
            TrotterTerm::Phi2 => "phi2",
            TrotterTerm::Pi2 => "pi2",
            TrotterTerm::PhiPhi => "phiphi",
            TrotterTerm::Phi4 => "phi4",
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Analytic CNOT count of one Trotter-step term after decomposition,
/// assuming all-to-all connectivity.
pub fn term_cnot_count(term: TrotterTerm, n_q: usize) -> usize {
    match term {
        TrotterTerm::Phi => 0,
        TrotterTerm::Phi2 => n_q * (n_q - 1),
        TrotterTerm::Pi2 => 3 * n_q * (n_q - 1),
        TrotterTerm::PhiPhi => 2 * n_q * n_q,
        TrotterTerm::Phi4 => 6 * binomial(n_q, 4) + 2 * binomial(n_q, 2),
    }
}

/// Gate counts for one full Trotter step over the lattice.
#[derive(Debug, Clone)]
pub struct GateCount {
    /// CNOTs of a single application of each term (one site / one bond).
    pub per_term: BTreeMap<TrotterTerm, usize>,
    /// Total CNOTs per lattice Trotter step.
    pub cnot: usize,
    /// Total single-qubit gates (Rz, Ry, H) per lattice Trotter step.
    pub single_qubit: usize,
}

/// Analytic gate counts for one Trotter step of the given order.
pub fn count_gates(
    params: &ModelParams,
    config: &DiscretizationConfig,
    trotter_order: usize,
) -> GateCount {
    let n_q = config.n_q;
    let per_term: BTreeMap<TrotterTerm, usize> =
        TrotterTerm::ALL.iter().map(|&t| (t, term_cnot_count(t, n_q))).collect();

    // empirical single-qubit counts of one application of each local term
    let reg = Register::site(0, n_q);
    let single_of = |c: &Circuit| decompose(c).single_qubit_count();
    let sq_phi = single_of(&trotter_phi(config, reg, 1.0));
    let sq_phi2 = single_of(&trotter_phi2(config, reg, 1.0));
    let sq_pi2 = single_of(&trotter_pi2(config, reg, 1.0));
    let sq_phi4 = single_of(&trotter_phi4(config, reg, 1.0));
    let reg1 = Register::site(1, n_q);
    let sq_phiphi = single_of(&trotter_phiphi(config, reg, reg1, 1.0).expect("distinct registers"));

    let n_sites = params.total_sites();
    let n_bonds = params.bonds().len();
    let site_cnots = per_term[&TrotterTerm::Pi2]
        + per_term[&TrotterTerm::Phi2]
        + per_term[&TrotterTerm::Phi4];
    let site_singles = sq_pi2 + sq_phi2 + sq_phi4 + sq_phi;
    let step_cnot = n_sites * site_cnots + n_bonds * per_term[&TrotterTerm::PhiPhi];
    let step_single = n_sites * site_singles + n_bonds * sq_phiphi;

    let (cnot, single_qubit) = match trotter_order {
        1 => (step_cnot, step_single),
        // symmetric step: every term twice at half angle except the last
        2 => (2 * step_cnot - last_term_cost(params, config).0, 2 * step_single - last_term_cost(params, config).1),
        o => panic!("unsupported Trotter order {o}"),
    };
    GateCount { per_term, cnot, single_qubit }
}

/// CNOT/single-qubit cost of the final term in the first-order ordering
/// (the term that is not repeated in the symmetric second-order step).
fn last_term_cost(params: &ModelParams, config: &DiscretizationConfig) -> (usize, usize) {
    let n_q = config.n_q;
    if params.bonds().is_empty() {
        // last local term is the linear field step
        let reg = Register::site(0, n_q);
        (0, decompose(&trotter_phi(config, reg, 1.0)).single_qubit_count())
    } else {
        let reg0 = Register::site(0, n_q);
        let reg1 = Register::site(1, n_q);
        let c = trotter_phiphi(config, reg0, reg1, 1.0).expect("distinct registers");
        (term_cnot_count(TrotterTerm::PhiPhi, n_q), decompose(&c).single_qubit_count())
    }
}

/// One Trotter step of the interpolated lattice Hamiltonian
/// `sum_j [Pi^2/2 + m^2 Phi^2/2 + lambda Phi^4/4! + f Phi] + coupling * hopping`.
///
/// Term ordering: local terms site by site (Pi^2, Phi^2, Phi^4, Phi), then
/// bond terms colored even/odd by their lower site index. The hopping
/// quadratic parts fold into per-site Phi^2 angles. Order 2 is the symmetric
/// splitting.
pub fn build_step_weighted(
    params: &ModelParams,
    config: &DiscretizationConfig,
    weights: LatticeWeights,
    dt: f64,
    order: usize,
) -> Result<Circuit> {
    assert!(dt.is_finite(), "dt must be finite");
    let n_sites = params.total_sites();
    let n_q = config.n_q;
    let bonds = params.bonds();
    // per-site degree from hopping expansion: each bond (a,b) contributes
    // coupling/2 * (phi_a - phi_b)^2 = c/2 phi_a^2 + c/2 phi_b^2 - c phi_a phi_b
    let mut degree = vec![0usize; n_sites];
    for &(a, b) in &bonds {
        degree[a] += 1;
        degree[b] += 1;
    }

    #[derive(Clone, Copy)]
    enum Term {
        Pi2(usize),
        Phi2(usize),
        Phi4(usize),
        Phi(usize),
        Bond(usize, usize),
    }

    let mut terms = Vec::new();
    for j in 0..n_sites {
        terms.push(Term::Pi2(j));
        terms.push(Term::Phi2(j));
        terms.push(Term::Phi4(j));
        terms.push(Term::Phi(j));
    }
    let (even, odd): (Vec<_>, Vec<_>) = bonds.iter().partition(|&&(a, _)| a % 2 == 0);
    for &(a, b) in even.iter().chain(odd.iter()) {
        terms.push(Term::Bond(a, b));
    }

    let registers: Vec<Register> = (0..n_sites).map(|j| Register::site(j, n_q)).collect();
    let mut circuit = Circuit::with_registers(n_sites * n_q, registers.clone());
    let mut emit = |circuit: &mut Circuit, term: Term, step_dt: f64| -> Result<()> {
        let c = match term {
            Term::Pi2(j) => trotter_pi2(config, registers[j], step_dt * 0.5),
            Term::Phi2(j) => {
                let coeff = 0.5 * weights.m_sq + 0.5 * weights.coupling * degree[j] as f64;
                trotter_phi2(config, registers[j], step_dt * coeff)
            }
            Term::Phi4(j) => trotter_phi4(config, registers[j], step_dt * weights.lambda / 24.0),
            Term::Phi(j) => trotter_phi(config, registers[j], step_dt * weights.f),
            Term::Bond(a, b) => {
                trotter_phiphi(config, registers[a], registers[b], -step_dt * weights.coupling)?
            }
        };
        circuit.extend(c.gates);
        Ok(())
    };

    match order {
        1 => {
            for &t in &terms {
                emit(&mut circuit, t, dt)?;
            }
        }
        2 => {
            let (last, head) = terms.split_last().expect("at least one term");
            for &t in head {
                emit(&mut circuit, t, dt / 2.0)?;
            }
            emit(&mut circuit, *last, dt)?;
            for &t in head.iter().rev() {
                emit(&mut circuit, t, dt / 2.0)?;
            }
        }
        o => return Err(Error::Domain(format!("unsupported Trotter order {o}"))),
    }
    Ok(circuit)
}

/// One Trotter step of the bare lattice Hamiltonian.
pub fn build_step(
    params: &ModelParams,
    config: &DiscretizationConfig,
    dt: f64,
    order: usize,
) -> Result<Circuit> {
    build_step_weighted(params, config, LatticeWeights::bare(params), dt, order)
}

fn write_angle(out: &mut String, angle: f64) {
    // 17 significant digits round-trip f64 exactly
    let _ = write!(out, " {:.16e}", angle);
}

/// Line-oriented text serialization: one gate per line,
/// `GATE q0 [q1 ...] angle`, preceded by `# nqubits=` / `# registers=`
/// headers.
pub fn to_text(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nqubits={}", circuit.n_qubits);
    let regs: Vec<String> =
        circuit.registers.iter().map(|r| format!("{}:{}", r.start, r.n_q)).collect();
    let _ = writeln!(out, "# registers={}", regs.join(","));
    for g in &circuit.gates {
        match *g {
            Gate::Rz { q, theta } => {
                out.push_str(&format!("RZ {q}"));
                write_angle(&mut out, theta);
            }
            Gate::Ry { q, theta } => {
                out.push_str(&format!("RY {q}"));
                write_angle(&mut out, theta);
            }
            Gate::H { q } => out.push_str(&format!("H {q}")),
            Gate::Cz { a, b } => out.push_str(&format!("CZ {a} {b}")),
            Gate::Cnot { control, target } => out.push_str(&format!("CNOT {control} {target}")),
            Gate::Zz { a, b, nu } => {
                out.push_str(&format!("ZZ {a} {b}"));
                write_angle(&mut out, nu);
            }
            Gate::Zzzz { a, b, c, d, rho } => {
                out.push_str(&format!("ZZZZ {a} {b} {c} {d}"));
                write_angle(&mut out, rho);
            }
            Gate::CPhase { control, target, theta } => {
                out.push_str(&format!("CPHASE {control} {target}"));
                write_angle(&mut out, theta);
            }
            Gate::GlobalPhase { xi } => {
                out.push_str("GPHASE");
                write_angle(&mut out, xi);
            }
            Gate::Swap { a, b } => out.push_str(&format!("SWAP {a} {b}")),
        }
        out.push('\n');
    }
    out
}

/// Parse the text form produced by [`to_text`].
pub fn from_text(text: &str) -> Result<Circuit> {
    let mut n_qubits = None;
    let mut registers = Vec::new();
    let mut gates = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("line {}: {msg}: {line}", lineno + 1));
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("nqubits=") {
                n_qubits =
                    Some(v.trim().parse::<usize>().map_err(|_| err("bad nqubits header"))?);
            } else if let Some(v) = rest.strip_prefix("registers=") {
                for part in v.split(',').filter(|p| !p.is_empty()) {
                    let (s, l) = part.split_once(':').ok_or_else(|| err("bad register"))?;
                    registers.push(Register {
                        start: s.parse().map_err(|_| err("bad register start"))?,
                        n_q: l.parse().map_err(|_| err("bad register length"))?,
                    });
                }
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().ok_or_else(|| err("empty gate line"))?;
        let toks: Vec<&str> = parts.collect();
        let idx = |i: usize| -> Result<usize> {
            toks.get(i)
                .ok_or_else(|| err("missing qubit index"))?
                .parse()
                .map_err(|_| err("bad qubit index"))
        };
        let ang = |i: usize| -> Result<f64> {
            toks.get(i)
                .ok_or_else(|| err("missing angle"))?
                .parse()
                .map_err(|_| err("bad angle"))
        };
        let gate = match name {
            "RZ" => Gate::Rz { q: idx(0)?, theta: ang(1)? },
            "RY" => Gate::Ry { q: idx(0)?, theta: ang(1)? },
            "H" => Gate::H { q: idx(0)? },
            "CZ" => Gate::Cz { a: idx(0)?, b: idx(1)? },
            "CNOT" => Gate::Cnot { control: idx(0)?, target: idx(1)? },
            "ZZ" => Gate::Zz { a: idx(0)?, b: idx(1)?, nu: ang(2)? },
            "ZZZZ" => Gate::Zzzz { a: idx(0)?, b: idx(1)?, c: idx(2)?, d: idx(3)?, rho: ang(4)? },
            "CPHASE" => Gate::CPhase { control: idx(0)?, target: idx(1)?, theta: ang(2)? },
            "GPHASE" => Gate::GlobalPhase { xi: ang(0)? },
            "SWAP" => Gate::Swap { a: idx(0)?, b: idx(1)? },
            _ => return Err(err("unknown gate")),
        };
        gates.push(gate);
    }
    let n_qubits = n_qubits.ok_or_else(|| Error::Parse("missing nqubits header".into()))?;
    let mut circuit = Circuit::with_registers(n_qubits, registers);
    for g in gates {
        circuit.push(g);
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_q: usize) -> DiscretizationConfig {
        DiscretizationConfig::new(n_q, 1.0).unwrap()
    }

    #[test]
    fn qft_structure() {
        let c = qft_circuit(Register::site(0, 1));
        assert_eq!(c.gates, vec![Gate::H { q: 0 }]);
        let c3 = qft_circuit(Register::site(0, 3));
        let h = c3.gates.iter().filter(|g| matches!(g, Gate::H { .. })).count();
        let cp = c3.gates.iter().filter(|g| matches!(g, Gate::CPhase { .. })).count();
        assert_eq!((h, cp), (3, 3));
    }

    #[test]
    fn trotter_phi_is_rz_only() {
        let cfg = config(4);
        let c = trotter_phi(&cfg, Register::site(0, 4), 0.7);
        assert_eq!(c.gates.len(), 4);
        assert_eq!(c.cnot_count(), 0);
        assert!(c.gates.iter().all(|g| matches!(g, Gate::Rz { .. })));
    }

    #[test]
    fn analytic_counts_match_table() {
        let expected = [
            (TrotterTerm::Phi, 0),
            (TrotterTerm::Phi2, 30),
            (TrotterTerm::Pi2, 90),
            (TrotterTerm::PhiPhi, 72),
            (TrotterTerm::Phi4, 120),
        ];
        for (term, count) in expected {
            assert_eq!(term_cnot_count(term, 6), count, "{term:?}");
        }
        // combinatorial recount: C(6,4)*6 + C(6,2)*2
        assert_eq!(15 * 6 + 15 * 2, 120);
        // n_q=2 quartic term
        assert_eq!(term_cnot_count(TrotterTerm::Phi4, 2), 2);
    }

    #[test]
    fn empirical_counts_match_analytic() {
        for n_q in 2..=8 {
            let cfg = config(n_q);
            let reg = Register::site(0, n_q);
            let reg1 = Register::site(1, n_q);
            let cases: Vec<(TrotterTerm, Circuit)> = vec![
                (TrotterTerm::Phi, trotter_phi(&cfg, reg, 0.3)),
                (TrotterTerm::Phi2, trotter_phi2(&cfg, reg, 0.3)),
                (TrotterTerm::Pi2, trotter_pi2(&cfg, reg, 0.3)),
                (TrotterTerm::PhiPhi, trotter_phiphi(&cfg, reg, reg1, 0.3).unwrap()),
                (TrotterTerm::Phi4, trotter_phi4(&cfg, reg, 0.3)),
            ];
            for (term, circuit) in cases {
                let empirical = decompose(&circuit).cnot_count();
                assert_eq!(
                    empirical,
                    term_cnot_count(term, n_q),
                    "{term:?} at n_q={n_q}"
                );
            }
        }
    }

    #[test]
    fn step_counts_linear_in_lattice_size() {
        let cfg = config(3);
        // periodic chains with N >= 3 have exactly N bonds, so the step grows
        // linearly in N; the 2-site chain is special (its wrap bond is counted
        // once)
        let counts: Vec<usize> = [3usize, 4, 5, 6]
            .iter()
            .map(|&n| {
                let params = ModelParams::chain(0.5, 0.1, 0.0, n).unwrap();
                count_gates(&params, &cfg, 1).cnot
            })
            .collect();
        let per_site = counts[1] - counts[0];
        for w in counts.windows(2) {
            assert_eq!(w[1] - w[0], per_site);
        }
        // empirical recount of the full step
        let params = ModelParams::chain(0.5, 0.1, 0.0, 3).unwrap();
        let analytic = count_gates(&params, &cfg, 1);
        let step = build_step(&params, &cfg, 0.1, 1).unwrap();
        assert_eq!(decompose(&step).cnot_count(), analytic.cnot);
        assert_eq!(decompose(&step).single_qubit_count(), analytic.single_qubit);
        let analytic2 = count_gates(&params, &cfg, 2);
        let step2 = build_step(&params, &cfg, 0.1, 2).unwrap();
        assert_eq!(decompose(&step2).cnot_count(), analytic2.cnot);
        assert_eq!(decompose(&step2).single_qubit_count(), analytic2.single_qubit);
    }

    #[test]
    fn decompose_idempotent() {
        let cfg = config(3);
        let mut c = trotter_phi4(&cfg, Register::site(0, 3), 0.4);
        c.push(Gate::Cz { a: 0, b: 2 });
        c.push(Gate::Swap { a: 1, b: 2 });
        let once = decompose(&c);
        let twice = decompose(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn phiphi_rejects_same_site() {
        let cfg = config(2);
        let reg = Register::site(0, 2);
        assert!(trotter_phiphi(&cfg, reg, reg, 0.1).is_err());
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let cfg = config(3);
        let params = ModelParams::chain(-0.37, 0.119, 1.0 / 3.0, 2).unwrap();
        let step = build_step(&params, &cfg, 0.123456789123456789, 2).unwrap();
        let text = to_text(&step);
        let parsed = from_text(&text).unwrap();
        assert_eq!(step, parsed);
        assert_eq!(to_text(&parsed), text);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(from_text("FOO 1 2\n").is_err());
        assert!(from_text("# nqubits=2\nRZ x 0.1\n").is_err());
        assert!(from_text("RZ 0 0.1\n").is_err(), "missing header must fail");
    }
}
