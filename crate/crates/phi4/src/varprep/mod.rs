//! Variational preparation of local ground states: a hardware-efficient
//! ansatz over one site register, optimized by CMA-ES against an exact
//! diagonalization target.

mod cma;

pub use cma::{cma_es, CmaOptions, OptResult};

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::circuits::{Circuit, Gate, Register};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::{self, DiscretizationConfig};
use crate::simulator::StateVector;

/// Entangling/rotation gate choice; the default follows the Ry/Rz + CZ
/// layout, the alternate swaps in Rx (as H Rz H) and CNOT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateSet {
    #[default]
    RyRzCz,
    RxRzCnot,
}

/// Hardware-efficient ansatz layout: L+1 single-qubit layers (a Ry and an Rz
/// rotation on every qubit) interleaved with L entangling layers of
/// neighbor gates whose pairing alternates layer to layer.
#[derive(Debug, Clone, Copy)]
pub struct AnsatzConfig {
    pub n_q: usize,
    pub layers: usize,
    pub gate_set: GateSet,
}

impl AnsatzConfig {
    pub fn new(n_q: usize, layers: usize) -> Self {
        Self { n_q, layers, gate_set: GateSet::default() }
    }

    /// Number of rotation angles: 2 n_q (L + 1).
    pub fn param_count(&self) -> usize {
        2 * self.n_q * (self.layers + 1)
    }

    /// Entangling pairs of layer `layer` (0-based): even layers pair
    /// (0,1),(2,3),..., odd layers pair (1,2),(3,4),...
    pub fn entangling_pairs(&self, layer: usize) -> Vec<(usize, usize)> {
        let start = layer % 2;
        (start..self.n_q.saturating_sub(1)).step_by(2).map(|q| (q, q + 1)).collect()
    }
}

/// Build the ansatz circuit for a parameter vector.
pub fn ansatz_circuit(config: &AnsatzConfig, theta: &[f64]) -> Result<Circuit> {
    if theta.len() != config.param_count() {
        return Err(Error::Dimension { expected: config.param_count(), got: theta.len() });
    }
    let reg = Register::site(0, config.n_q);
    let mut circuit = Circuit::with_registers(config.n_q, vec![reg]);
    let mut next = theta.iter().copied();
    for layer in 0..=config.layers {
        for q in 0..config.n_q {
            let a = next.next().expect("length checked");
            let b = next.next().expect("length checked");
            match config.gate_set {
                GateSet::RyRzCz => {
                    circuit.push(Gate::Ry { q, theta: a });
                    circuit.push(Gate::Rz { q, theta: b });
                }
                GateSet::RxRzCnot => {
                    // Rx = H Rz H
                    circuit.push(Gate::H { q });
                    circuit.push(Gate::Rz { q, theta: a });
                    circuit.push(Gate::H { q });
                    circuit.push(Gate::Rz { q, theta: b });
                }
            }
        }
        if layer < config.layers {
            for (a, b) in config.entangling_pairs(layer) {
                match config.gate_set {
                    GateSet::RyRzCz => circuit.push(Gate::Cz { a, b }),
                    GateSet::RxRzCnot => circuit.push(Gate::Cnot { control: a, target: b }),
                }
            }
        }
    }
    Ok(circuit)
}

/// Ansatz output state from |0...0> without building a `Circuit`; this is
/// the CMA-ES inner loop, kept allocation-free per gate.
fn ansatz_state_into(config: &AnsatzConfig, theta: &[f64], amps: &mut [Complex64]) {
    let n = config.n_q;
    let dim = 1usize << n;
    amps[..dim].fill(Complex64::default());
    amps[0] = Complex64::from(1.0);
    let mask = |q: usize| 1usize << (n - 1 - q);

    let rot_y = |amps: &mut [Complex64], q: usize, th: f64| {
        let (s, c) = (th / 2.0).sin_cos();
        let m = mask(q);
        for i in 0..dim {
            if i & m == 0 {
                let j = i | m;
                let (x, y) = (amps[i], amps[j]);
                amps[i] = x * c - y * s;
                amps[j] = x * s + y * c;
            }
        }
    };
    let rot_z = |amps: &mut [Complex64], q: usize, th: f64| {
        let p0 = Complex64::from_polar(1.0, -th / 2.0);
        let p1 = Complex64::from_polar(1.0, th / 2.0);
        let m = mask(q);
        for (i, a) in amps.iter_mut().enumerate().take(dim) {
            *a *= if i & m == 0 { p0 } else { p1 };
        }
    };
    let rot_x = |amps: &mut [Complex64], q: usize, th: f64| {
        let (s, c) = (th / 2.0).sin_cos();
        let is = Complex64::new(0.0, -s);
        let m = mask(q);
        for i in 0..dim {
            if i & m == 0 {
                let j = i | m;
                let (x, y) = (amps[i], amps[j]);
                amps[i] = x * c + y * is;
                amps[j] = x * is + y * c;
            }
        }
    };

    let mut next = theta.iter().copied();
    for layer in 0..=config.layers {
        for q in 0..n {
            let a = next.next().expect("length checked");
            let b = next.next().expect("length checked");
            match config.gate_set {
                GateSet::RyRzCz => rot_y(amps, q, a),
                GateSet::RxRzCnot => rot_x(amps, q, a),
            }
            rot_z(amps, q, b);
        }
        if layer < config.layers {
            for (a, b) in config.entangling_pairs(layer) {
                let (ma, mb) = (mask(a), mask(b));
                match config.gate_set {
                    GateSet::RyRzCz => {
                        let both = ma | mb;
                        for (i, amp) in amps.iter_mut().enumerate().take(dim) {
                            if i & both == both {
                                *amp = -*amp;
                            }
                        }
                    }
                    GateSet::RxRzCnot => {
                        for i in 0..dim {
                            if i & ma != 0 && i & mb == 0 {
                                amps.swap(i, i | mb);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 1 - |<target|phi_qc(theta)>|^2.
pub fn infidelity(config: &AnsatzConfig, theta: &[f64], target: &CVector) -> f64 {
    let dim = 1usize << config.n_q;
    debug_assert_eq!(target.len(), dim);
    let mut amps = vec![Complex64::default(); dim];
    ansatz_state_into(config, theta, &mut amps);
    let overlap: Complex64 =
        target.iter().zip(&amps).map(|(t, a)| t.conj() * a).sum();
    (1.0 - overlap.norm_sqr()).clamp(0.0, 1.0)
}

/// Outcome of a variational local-state preparation.
#[derive(Debug, Clone)]
pub struct PrepResult {
    pub circuit: Circuit,
    pub theta: Vec<f64>,
    pub fidelity: f64,
    pub evaluations: usize,
    /// Set when the optimizer stayed below the target fidelity after all
    /// restarts.
    pub below_target: bool,
}

/// Variationally prepare the ground state of the local Hamiltonian with the
/// given couplings; the target comes from exact diagonalization.
pub fn prepare_local_state(
    m_i_sq: f64,
    lambda_i: f64,
    f_i: f64,
    config: &DiscretizationConfig,
    ansatz: &AnsatzConfig,
    opts: &CmaOptions,
) -> Result<PrepResult> {
    let h = model::local_hamiltonian(m_i_sq, lambda_i, f_i, config);
    let spec = model::diagonalize(&h, 2)?;
    let target = spec.states[0].clone();
    prepare_target_state(&target, ansatz, opts)
}

/// Same as [`prepare_local_state`] for an explicit target vector.
///
/// Runs a global CMA-ES phase (large population, wide step, restarts) and
/// then warm-started refinement rounds with shrinking step size until the
/// target infidelity is met or the rounds stop paying off.
pub fn prepare_target_state(
    target: &CVector,
    ansatz: &AnsatzConfig,
    opts: &CmaOptions,
) -> Result<PrepResult> {
    let dim = 1usize << ansatz.n_q;
    if target.len() != dim {
        return Err(Error::Dimension { expected: dim, got: target.len() });
    }
    let objective = |theta: &[f64]| infidelity(ansatz, theta, target);
    let mut result = cma_es(&objective, ansatz.param_count(), opts)?;

    let mut sigma = 0.05;
    for round in 0..6 {
        if result.best_value <= opts.target {
            break;
        }
        let polish = CmaOptions {
            population: 24,
            sigma0: sigma,
            max_evals: opts.max_evals / 2,
            restarts: 0,
            stagnation_gens: 400,
            seed: opts.seed.wrapping_add(1000 + round),
            initial_mean: result.best_theta.clone(),
            restart_jitter: 0.0,
            target: opts.target,
        };
        let refined = cma_es(&objective, ansatz.param_count(), &polish)?;
        let improved = refined.best_value < result.best_value;
        let gain = result.best_value - refined.best_value;
        if improved {
            result.best_theta = refined.best_theta;
            result.best_value = refined.best_value;
            result.reached_target = refined.reached_target;
        }
        result.evaluations += refined.evaluations;
        result.history.push(result.best_value);
        if gain < 0.05 * result.best_value {
            sigma /= 4.0;
            if sigma < 1e-3 {
                break;
            }
        }
    }

    let circuit = ansatz_circuit(ansatz, &result.best_theta)?;
    Ok(PrepResult {
        circuit,
        theta: result.best_theta,
        fidelity: 1.0 - result.best_value,
        evaluations: result.evaluations,
        below_target: !result.reached_target,
    })
}

/// Persist optimized parameters: a text header followed by one angle per
/// line at 17 significant digits.
pub fn save_params<W: Write>(
    mut w: W,
    ansatz: &AnsatzConfig,
    description: &str,
    fidelity: f64,
    theta: &[f64],
) -> Result<()> {
    writeln!(w, "# n_q={} layers={}", ansatz.n_q, ansatz.layers)?;
    writeln!(w, "# target={description}")?;
    writeln!(w, "# fidelity={fidelity:.16e}")?;
    for t in theta {
        writeln!(w, "{t:.16e}")?;
    }
    Ok(())
}

/// Parse the angle file written by [`save_params`]; returns the angles.
pub fn load_params<R: std::io::Read>(r: R) -> Result<Vec<f64>> {
    let reader = std::io::BufReader::new(r);
    let mut theta = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        theta.push(
            line.parse::<f64>().map_err(|_| Error::Parse(format!("bad angle line: {line}")))?,
        );
    }
    Ok(theta)
}

/// Statevector produced by the ansatz circuit from |0...0>.
pub fn ansatz_state(config: &AnsatzConfig, theta: &[f64]) -> Result<StateVector> {
    let mut amps = vec![Complex64::default(); 1 << config.n_q];
    if theta.len() != config.param_count() {
        return Err(Error::Dimension { expected: config.param_count(), got: theta.len() });
    }
    ansatz_state_into(config, theta, &mut amps);
    StateVector::from_amplitudes(amps)
}
