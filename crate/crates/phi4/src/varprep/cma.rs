//! Covariance Matrix Adaptation Evolution Strategy, (mu/mu_w, lambda)
//! flavor: weighted recombination, rank-1 plus rank-mu covariance update and
//! cumulative step-size adaptation. Minimizes the objective.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CmaOptions {
    /// Population size lambda.
    pub population: usize,
    /// Initial step size.
    pub sigma0: f64,
    /// Evaluation budget per run.
    pub max_evals: usize,
    /// Independent restarts after the first run (fresh seed, jittered mean).
    pub restarts: usize,
    /// Stop as soon as the best objective value drops to this level.
    pub target: f64,
    /// Stop a run when the best value has not improved for this many
    /// generations.
    pub stagnation_gens: usize,
    pub seed: u64,
    /// Initial mean; zeros if empty.
    pub initial_mean: Vec<f64>,
    /// Gaussian jitter added to the initial mean on restarts.
    pub restart_jitter: f64,
}

impl CmaOptions {
    pub fn for_dimension(dim: usize) -> Self {
        let base = 4 + (3.0 * (dim.max(2) as f64).ln()).floor() as usize * 4;
        Self {
            population: base.max(32),
            sigma0: 0.3 * std::f64::consts::PI,
            max_evals: 200_000,
            restarts: 0,
            target: f64::NEG_INFINITY,
            stagnation_gens: 200,
            seed: 1,
            initial_mean: Vec::new(),
            restart_jitter: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub best_theta: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// Best-so-far objective after each generation (nonincreasing).
    pub history: Vec<f64>,
    pub reached_target: bool,
}

/// Minimize `objective` over `dim` parameters.
pub fn cma_es<F>(objective: F, dim: usize, opts: &CmaOptions) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if dim == 0 {
        return Err(Error::Domain("cma_es requires dim >= 1".into()));
    }
    if opts.population < 4 {
        return Err(Error::Domain("population must be >= 4".into()));
    }
    let mut best = OptResult {
        best_theta: vec![0.0; dim],
        best_value: f64::INFINITY,
        evaluations: 0,
        history: Vec::new(),
        reached_target: false,
    };
    for run in 0..=opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(run as u64));
        let mut mean = if opts.initial_mean.is_empty() {
            DVector::zeros(dim)
        } else {
            DVector::from_column_slice(&opts.initial_mean)
        };
        if run > 0 {
            for m in mean.iter_mut() {
                *m += opts.restart_jitter * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let outcome = run_once(&objective, dim, opts, mean, &mut rng, best.evaluations)?;
        let evals = outcome.evaluations;
        if outcome.best_value < best.best_value {
            best.best_theta = outcome.best_theta;
            best.best_value = outcome.best_value;
            best.reached_target = outcome.reached_target;
        }
        best.history.extend(outcome.history);
        best.evaluations = evals;
        if best.best_value <= opts.target {
            best.reached_target = true;
            break;
        }
    }
    // make the recorded history the global best-so-far trace
    let mut acc = f64::INFINITY;
    for h in best.history.iter_mut() {
        acc = acc.min(*h);
        *h = acc;
    }
    Ok(best)
}

fn run_once<F>(
    objective: &F,
    dim: usize,
    opts: &CmaOptions,
    mut mean: DVector<f64>,
    rng: &mut ChaCha8Rng,
    evals_so_far: usize,
) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = dim as f64;
    let lambda = opts.population;
    let mu = lambda / 2;
    let mut weights: Vec<f64> =
        (0..mu).map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= wsum;
    }
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    let c_mu = (1.0 - c_1)
        .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
    let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    let mut sigma = opts.sigma0;
    let mut cov = DMatrix::<f64>::identity(dim, dim);
    let mut p_sigma = DVector::<f64>::zeros(dim);
    let mut p_c = DVector::<f64>::zeros(dim);
    let mut eigen_basis = DMatrix::<f64>::identity(dim, dim);
    let mut eigen_scale = DVector::<f64>::from_element(dim, 1.0);

    let mut best_theta = mean.as_slice().to_vec();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::new();
    let mut evaluations = evals_so_far;
    let mut stagnant = 0usize;
    let mut generation = 0usize;

    while evaluations + lambda <= evals_so_far + opts.max_evals {
        // sample
        let zs: Vec<DVector<f64>> = (0..lambda)
            .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let ys: Vec<DVector<f64>> = zs
            .iter()
            .map(|z| &eigen_basis * z.component_mul(&eigen_scale))
            .collect();
        let xs: Vec<Vec<f64>> =
            ys.iter().map(|y| (&mean + y * sigma).as_slice().to_vec()).collect();

        let values: Vec<f64> = xs.par_iter().map(|x| objective(x)).collect();
        evaluations += lambda;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteObjective { evaluation: evaluations - lambda + bad });
        }

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let gen_best = values[order[0]];
        if gen_best < best_value - 1e-14 {
            best_value = gen_best;
            best_theta = xs[order[0]].clone();
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        history.push(best_value);
        if best_value <= opts.target {
            return Ok(OptResult {
                best_theta,
                best_value,
                evaluations,
                history,
                reached_target: true,
            });
        }
        if stagnant >= opts.stagnation_gens {
            break;
        }

        // recombination
        let mut y_w = DVector::<f64>::zeros(dim);
        let mut z_w = DVector::<f64>::zeros(dim);
        for (w, &idx) in weights.iter().zip(&order) {
            y_w += &ys[idx] * *w;
            z_w += &zs[idx] * *w;
        }
        mean += &y_w * sigma;

        // step-size path; B z_w = C^{-1/2} y_w
        let bz = &eigen_basis * &z_w;
        p_sigma = &p_sigma * (1.0 - c_sigma)
            + bz * (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();
        let ps_norm = p_sigma.norm();
        let decay = 1.0 - (1.0 - c_sigma).powi(2 * (generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() / chi_n < 1.4 + 2.0 / (n + 1.0);

        // covariance path
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = &p_c * (1.0 - c_c) + &y_w * (h * (c_c * (2.0 - c_c) * mu_eff).sqrt());

        // covariance update
        let delta_h = (1.0 - h) * c_c * (2.0 - c_c);
        cov = &cov * (1.0 - c_1 - c_mu + c_1 * delta_h);
        cov += (&p_c * p_c.transpose()) * c_1;
        for (w, &idx) in weights.iter().zip(&order) {
            cov += (&ys[idx] * ys[idx].transpose()) * (c_mu * *w);
        }

        // step size
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        if !sigma.is_finite() || sigma > 1e6 {
            break;
        }

        // refresh eigen decomposition of C
        cov = (&cov + cov.transpose()) * 0.5;
        let eig = cov.clone().symmetric_eigen();
        let mut min_e = f64::INFINITY;
        let mut max_e: f64 = 0.0;
        for (j, &e) in eig.eigenvalues.iter().enumerate() {
            let e = e.max(1e-20);
            eigen_scale[j] = e.sqrt();
            min_e = min_e.min(e);
            max_e = max_e.max(e);
        }
        eigen_basis = eig.eigenvectors;
        if max_e / min_e > 1e14 || sigma * max_e.sqrt() < 1e-14 {
            break;
        }
        generation += 1;
    }

    Ok(OptResult { best_theta, best_value, evaluations, history, reached_target: false })
}
