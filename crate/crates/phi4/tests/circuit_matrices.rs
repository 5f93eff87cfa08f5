//! Dense-matrix oracle checks for every circuit constructor: each circuit
//! unitary is compared entrywise (global phase included) against the matrix
//! exponential or transform it claims to implement.

mod common;

use common::*;
use num_complex::Complex64;

use phi4::circuits::{
    build_step, centered_ft_circuit, decompose, qft_circuit, trotter_phi, trotter_phi2,
    trotter_phi4, trotter_phiphi, trotter_pi2, Circuit, Gate, Register,
};
use phi4::model::{self, DiscretizationConfig, ModelParams};
use phi4::simulator::circuit_unitary;

fn cfg(n_q: usize, mu: f64) -> DiscretizationConfig {
    DiscretizationConfig::new(n_q, mu).unwrap()
}

fn phi_matrix(c: &DiscretizationConfig) -> CMat {
    model::phi_operator(c).entries
}

#[test]
fn qft_matches_dft_up_to_bit_reversal() {
    for n_q in 1..=6 {
        let u = circuit_unitary(&qft_circuit(Register::site(0, n_q))).unwrap();
        let oracle = bit_reversal(n_q) * dft_matrix(n_q);
        assert!(
            mat_distance(&u, &oracle) < 1e-10,
            "n_q={n_q}: {}",
            mat_distance(&u, &oracle)
        );
    }
}

#[test]
fn centered_ft_circuit_matches_dense_matrix() {
    for n_q in 1..=6 {
        let c = cfg(n_q, 1.0);
        let oracle = model::centered_ft_matrix(&c).entries;
        let with_swaps = circuit_unitary(&centered_ft_circuit(Register::site(0, n_q), true)).unwrap();
        let d = mat_distance(&with_swaps, &oracle);
        let tol = if n_q == 1 { 1e-12 } else { 1e-10 };
        assert!(d < tol, "n_q={n_q} with swaps: {d}");

        let no_swaps = circuit_unitary(&centered_ft_circuit(Register::site(0, n_q), false)).unwrap();
        let reversed = bit_reversal(n_q) * &oracle;
        let d2 = mat_distance(&no_swaps, &reversed);
        assert!(d2 < 1e-10, "n_q={n_q} without swaps: {d2}");
    }
}

#[test]
fn centered_ft_applied_twice_is_parity() {
    for n_q in 1..=5 {
        let u = circuit_unitary(&centered_ft_circuit(Register::site(0, n_q), true)).unwrap();
        let twice = &u * &u;
        let n = 1 << n_q;
        let mut parity = CMat::zeros(n, n);
        for a in 0..n {
            parity[(n - 1 - a, a)] = Complex64::from(1.0);
        }
        assert!(mat_distance(&twice, &parity) < 1e-10, "n_q={n_q}");
    }
}

#[test]
fn trotter_phi_exact() {
    let c = cfg(3, 1.0);
    let reg = Register::site(0, 3);
    let u = circuit_unitary(&trotter_phi(&c, reg, 0.7)).unwrap();
    let oracle = expm_oracle(&phi_matrix(&c), 0.7);
    assert!(mat_distance(&u, &oracle) < 1e-12);

    let id = circuit_unitary(&trotter_phi(&c, reg, 0.0)).unwrap();
    assert!(mat_distance(&id, &CMat::identity(8, 8)) < 1e-14);
}

#[test]
fn trotter_phi2_exact() {
    let c = cfg(4, 0.8);
    let reg = Register::site(0, 4);
    let phi = phi_matrix(&c);
    let u = circuit_unitary(&trotter_phi2(&c, reg, 0.3)).unwrap();
    let oracle = expm_oracle(&(&phi * &phi), 0.3);
    assert!(mat_distance(&u, &oracle) < 1e-12);

    let id = circuit_unitary(&trotter_phi2(&c, reg, 0.0)).unwrap();
    assert!(mat_distance(&id, &CMat::identity(16, 16)) < 1e-14);
}

#[test]
fn trotter_pi2_exact() {
    let c = cfg(3, 1.0);
    let reg = Register::site(0, 3);
    let pi = model::pi_operator(&c).entries;
    let u = circuit_unitary(&trotter_pi2(&c, reg, 0.5)).unwrap();
    let oracle = expm_oracle(&(&pi * &pi), 0.5);
    assert!(mat_distance(&u, &oracle) < 1e-10, "{}", mat_distance(&u, &oracle));

    // theta = 0 is the identity up to (here: exactly zero) global phase
    let id = circuit_unitary(&trotter_pi2(&c, reg, 0.0)).unwrap();
    let phase = id[(0, 0)] / Complex64::from(id[(0, 0)].norm());
    let adjusted = id * phase.conj();
    assert!(mat_distance(&adjusted, &CMat::identity(8, 8)) < 1e-10);
}

#[test]
fn trotter_phiphi_exact() {
    let c = cfg(2, 1.3);
    let (r0, r1) = (Register::site(0, 2), Register::site(1, 2));
    let phi = phi_matrix(&c);
    let u = circuit_unitary(&trotter_phiphi(&c, r0, r1, 0.4).unwrap()).unwrap();
    let oracle = expm_oracle(&kron(&phi, &phi), 0.4);
    assert!(mat_distance(&u, &oracle) < 1e-12);

    let id = circuit_unitary(&trotter_phiphi(&c, r0, r1, 0.0).unwrap()).unwrap();
    assert!(mat_distance(&id, &CMat::identity(16, 16)) < 1e-14);
}

#[test]
fn trotter_phi4_exact() {
    let c = cfg(4, 1.0);
    let reg = Register::site(0, 4);
    let phi = phi_matrix(&c);
    let phi2 = &phi * &phi;
    let u = circuit_unitary(&trotter_phi4(&c, reg, 0.2)).unwrap();
    let oracle = expm_oracle(&(&phi2 * &phi2), 0.2);
    assert!(mat_distance(&u, &oracle) < 1e-11, "{}", mat_distance(&u, &oracle));
}

#[test]
fn all_terms_all_widths_match_oracles() {
    // diagonal steps to 1e-12, Pi^2 to 1e-10, for n_q <= 6
    for n_q in 2..=6 {
        let c = cfg(n_q, 1.0);
        let reg = Register::site(0, n_q);
        let theta = 0.23;
        let phi = phi_matrix(&c);
        let phi2 = &phi * &phi;
        let phi4 = &phi2 * &phi2;
        let pi = model::pi_operator(&c).entries;
        let pi2 = &pi * &pi;

        let cases: Vec<(&str, Circuit, CMat, f64)> = vec![
            ("phi", trotter_phi(&c, reg, theta), expm_oracle(&phi, theta), 1e-12),
            ("phi2", trotter_phi2(&c, reg, theta), expm_oracle(&phi2, theta), 1e-12),
            ("phi4", trotter_phi4(&c, reg, theta), expm_oracle(&phi4, theta), 1e-12),
            ("pi2", trotter_pi2(&c, reg, theta), expm_oracle(&pi2, theta), 1e-10),
        ];
        for (name, circuit, oracle, tol) in cases {
            let u = circuit_unitary(&circuit).unwrap();
            let d = op_distance(&u, &oracle);
            assert!(d < tol, "{name} n_q={n_q}: {d:.3e}");
            assert!(unitarity_defect(&u) < 1e-10, "{name} n_q={n_q} unitarity");

            // decomposition preserves the unitary including global phase
            let du = circuit_unitary(&decompose(&circuit)).unwrap();
            let dd = mat_distance(&du, &u);
            assert!(dd < 1e-10, "{name} n_q={n_q} decompose drift: {dd:.3e}");
        }
    }
}

#[test]
fn zz_and_zzzz_decompositions_are_exact() {
    let mut zz = Circuit::new(2);
    zz.push(Gate::Zz { a: 0, b: 1, nu: 0.3 });
    let u = circuit_unitary(&zz).unwrap();
    let d = decompose(&zz);
    assert_eq!(d.cnot_count(), 2);
    assert_eq!(d.single_qubit_count(), 1);
    assert!(mat_distance(&circuit_unitary(&d).unwrap(), &u) < 1e-13);

    let mut zzzz = Circuit::new(4);
    zzzz.push(Gate::Zzzz { a: 0, b: 1, c: 2, d: 3, rho: 0.1 });
    let u4 = circuit_unitary(&zzzz).unwrap();
    let d4 = decompose(&zzzz);
    assert_eq!(d4.cnot_count(), 6);
    assert_eq!(d4.single_qubit_count(), 1);
    assert!(mat_distance(&circuit_unitary(&d4).unwrap(), &u4) < 1e-13);
}

#[test]
fn build_step_first_order_error_scales_quadratically() {
    // one site, harmonic only: the Trotter error per step is O(dt^2)
    let c = cfg(3, 1.0);
    let params = ModelParams::chain(1.0, 0.0, 0.0, 1).unwrap();
    let h = model::lattice_hamiltonian(&params, &c, model::LatticeWeights::bare(&params))
        .unwrap()
        .entries;
    let mut logs_dt = Vec::new();
    let mut logs_err = Vec::new();
    for &dt in &[0.1, 0.05, 0.025] {
        let u = circuit_unitary(&build_step(&params, &c, dt, 1).unwrap()).unwrap();
        let oracle = expm_oracle(&h, dt);
        logs_dt.push(dt.ln());
        logs_err.push(mat_distance(&u, &oracle).ln());
    }
    let s = slope(&logs_dt, &logs_err);
    assert!((s - 2.0).abs() < 0.2, "first-order slope {s}");
}

#[test]
fn build_step_second_order_error_scales_cubically() {
    let c = cfg(3, 1.0);
    let params = ModelParams::chain(0.8, 0.5, 0.1, 2).unwrap();
    let h = model::lattice_hamiltonian(&params, &c, model::LatticeWeights::bare(&params))
        .unwrap()
        .entries;
    let mut logs_dt = Vec::new();
    let mut logs_err = Vec::new();
    for &dt in &[0.2, 0.1, 0.05] {
        let u = circuit_unitary(&build_step(&params, &c, dt, 2).unwrap()).unwrap();
        let oracle = expm_oracle(&h, dt);
        logs_dt.push(dt.ln());
        logs_err.push(mat_distance(&u, &oracle).ln());
    }
    let s = slope(&logs_dt, &logs_err);
    assert!((s - 3.0).abs() < 0.3, "second-order slope {s}");

    let id = circuit_unitary(&build_step(&params, &c, 0.0, 1).unwrap()).unwrap();
    assert!(mat_distance(&id, &CMat::identity(64, 64)) < 1e-12);
}

#[test]
fn repeated_steps_approximate_full_evolution() {
    use phi4::simulator::{apply, StateVector};
    let c = cfg(4, 1.0);
    let params = ModelParams::chain(1.0, 0.6, 0.0, 1).unwrap();
    let h = model::lattice_hamiltonian(&params, &c, model::LatticeWeights::bare(&params))
        .unwrap()
        .entries;
    let t_total = 1.0;
    let spec = model::diagonalize(&model::local_hamiltonian(1.0, 0.0, 0.0, &c), 1).unwrap();
    let mut errs = Vec::new();
    for &n_steps in &[10usize, 20, 40] {
        let dt = t_total / n_steps as f64;
        let step = build_step(&params, &c, dt, 1).unwrap();
        let mut state = StateVector::from_vector(&spec.states[0]).unwrap();
        for _ in 0..n_steps {
            state = apply(&state, &step).unwrap();
        }
        let exact = expm_oracle(&h, t_total) * &spec.states[0];
        let err = (state.to_vector() - exact).norm();
        errs.push(err);
    }
    // first-order evolution: global error is O(dt), halving dt roughly halves it
    assert!(errs[1] < 0.7 * errs[0], "{errs:?}");
    assert!(errs[2] < 0.7 * errs[1], "{errs:?}");
}
