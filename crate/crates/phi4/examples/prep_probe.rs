use phi4::model::DiscretizationConfig;
use phi4::varprep::{prepare_local_state, AnsatzConfig, CmaOptions};
use std::time::Instant;

fn main() {
    let targets: Vec<(&str, f64, f64, f64, f64)> = vec![
        ("harmonic", 1.0, 0.0, 0.0, 1.0),
        ("strong-d0", 1.0, 100.0, 0.0, 1.0),
        ("strong-d0/2", 1.0, 100.0, 0.0, 4.0),
        ("dw-small-f", -1.0, 1.0, 0.1, 1.0),
        ("dw-large-f", -1.0, 1.0, 1.5, 1.0),
    ];
    for n_q in [6usize, 7, 8] {
        for &(label, m, l, f, mu) in &targets {
            let cfg = DiscretizationConfig::new(n_q, mu).unwrap();
            let ansatz = AnsatzConfig::new(n_q, 6);
            let mut opts = CmaOptions::for_dimension(ansatz.param_count());
            opts.target = 9e-5;
            opts.max_evals = 120_000;
            opts.restarts = 4;
            opts.seed = 11;
            let t0 = Instant::now();
            let prep = prepare_local_state(m, l, f, &cfg, &ansatz, &opts).unwrap();
            println!(
                "n_q={n_q} {label:12} fid={:.6} evals={} ok={} t={:.1?}",
                prep.fidelity, prep.evaluations, !prep.below_target, t0.elapsed()
            );
        }
    }
}
