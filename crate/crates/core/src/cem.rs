//! Cross-entropy method over flat parameter vectors.
//!
//! Each iteration samples a Gaussian population around the current mean,
//! scores every candidate, and refits mean and (elementwise) standard
//! deviation to the elite fraction. Candidate seeds are derived from the
//! iteration and candidate indices, so a run is reproducible regardless of
//! evaluation order.

use crate::error::{Error, Result};
use crate::rng::{derive_seed2, rng_from_seed};
use rand::Rng;
use rand_distr::StandardNormal;

/// Noise floor that keeps the search distribution alive.
pub const STD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CemConfig {
    pub population: usize,
    /// Fraction in (0, 1]; the elite count is `ceil(elite_frac * population)`.
    pub elite_frac: f64,
    pub iterations: usize,
    /// Initial per-dimension sampling std.
    pub init_std: f64,
    /// Episodes per candidate evaluation (used by callers that roll out).
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            population: 32,
            elite_frac: 0.25,
            iterations: 15,
            init_std: 0.8,
            eval_episodes: 2,
            seed: 0,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidArgument("population must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.elite_frac) || self.n_elite() == 0 {
            return Err(Error::InvalidArgument(format!(
                "elite_frac {} yields no elites",
                self.elite_frac
            )));
        }
        Ok(())
    }

    pub fn n_elite(&self) -> usize {
        ((self.elite_frac * self.population as f64).ceil() as usize).min(self.population)
    }
}

/// One distribution refit: elementwise mean and std of the top-scoring
/// candidates, with the std floored at [`STD_FLOOR`].
///
/// `scored` pairs candidate parameter vectors with their objective values
/// (higher is better). Ties rank by candidate order.
pub fn cem_update(scored: &[(Vec<f64>, f64)], n_elite: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(!scored.is_empty() && n_elite >= 1);
    assert!(scored.iter().all(|(_, s)| s.is_finite()), "scores must be finite");
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
    let elites: Vec<&Vec<f64>> = order.iter().take(n_elite).map(|&i| &scored[i].0).collect();

    let dim = elites[0].len();
    let mut mean = vec![0.0; dim];
    for e in &elites {
        for (m, x) in mean.iter_mut().zip(e.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_elite as f64);

    let mut std = vec![0.0; dim];
    for e in &elites {
        for (s, (x, m)) in std.iter_mut().zip(e.iter().zip(&mean)) {
            *s += (x - m) * (x - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n_elite as f64).sqrt().max(STD_FLOOR);
    }
    (mean, std)
}

/// Outcome of a full CEM run.
#[derive(Debug, Clone)]
pub struct CemResult {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Best candidate ever scored and its objective value.
    pub best: Vec<f64>,
    pub best_score: f64,
    /// Mean elite score per iteration.
    pub history: Vec<f64>,
}

/// Maximizes `objective` starting from `init_mean`.
///
/// The objective receives the candidate vector and a derived seed to use
/// for any simulation noise, keeping the whole run deterministic.
pub fn optimize(
    cfg: &CemConfig,
    init_mean: &[f64],
    mut objective: impl FnMut(&[f64], u64) -> f64,
) -> Result<CemResult> {
    cfg.validate()?;
    let dim = init_mean.len();
    let mut mean = init_mean.to_vec();
    let mut std = vec![cfg.init_std; dim];
    let mut best = mean.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        // all candidates in an iteration share the evaluation seed, so
        // simulation noise cancels out of the elite selection
        let eval_seed = derive_seed2(cfg.seed, 0x5eed, iter as u64);
        let mut scored: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.population);
        for cand in 0..cfg.population {
            let seed = derive_seed2(cfg.seed, iter as u64, cand as u64);
            let mut rng = rng_from_seed(seed);
            let theta: Vec<f64> = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let score = objective(&theta, eval_seed);
            if !score.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "objective returned non-finite score {score}"
                )));
            }
            if score > best_score {
                best_score = score;
                best = theta.clone();
            }
            scored.push((theta, score));
        }
        let (new_mean, new_std) = cem_update(&scored, cfg.n_elite());
        let elite_mean: f64 = {
            let mut order: Vec<usize> = (0..scored.len()).collect();
            order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
            order.iter().take(cfg.n_elite()).map(|&i| scored[i].1).sum::<f64>()
                / cfg.n_elite() as f64
        };
        history.push(elite_mean);
        mean = new_mean;
        // smooth the std refit; a raw elite refit collapses the search
        // distribution before the mean has finished travelling
        for (s, ns) in std.iter_mut().zip(&new_std) {
            *s = 0.7 * ns + 0.3 * *s;
        }
    }
    Ok(CemResult { mean, std, best, best_score, history })
}
