//! Offline policy optimization inside the penalized episodic model.
//!
//! Training never touches the true environment: candidate policies are
//! scored by k-step rollouts through the nearest-entry model with the
//! uncertainty-penalized reward, from start states drawn out of the batch
//! buffer. The terminal value after k steps is bootstrapped as zero, which
//! truncates pessimistically.

use crate::cem::{self, CemConfig};
use crate::env::{rollout, Actor, Buffer, EnvSpec, RewardSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{model_query, EpisodicModel};
use crate::policy::{policy_act, PolicyParams, StochasticPolicy};
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineConfig {
    /// Model rollout horizon k.
    pub rollout_k: usize,
    /// Start states sampled uniformly from the buffer per evaluation.
    pub n_start_states: usize,
    pub gamma: f64,
    pub cem: CemConfig,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            rollout_k: 10,
            n_start_states: 24,
            gamma: 0.99,
            cem: CemConfig { iterations: 40, population: 64, init_std: 1.5, ..CemConfig::default() },
        }
    }
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rollout_k == 0 {
            return Err(Error::InvalidArgument("rollout_k must be >= 1".into()));
        }
        if self.n_start_states == 0 {
            return Err(Error::InvalidArgument("n_start_states must be >= 1".into()));
        }
        self.cem.validate()
    }
}

/// Mean penalized k-step return of a policy over fixed start states.
///
/// Also returns the mean uncertainty seen along the model rollouts, which
/// the bound reports use as their epsilon_u sample.
pub fn penalized_model_return(
    params: &PolicyParams,
    model: &EpisodicModel,
    starts: &[Vec<f64>],
    task: &TaskSpec,
    spec: &EnvSpec,
    cfg: &OfflineConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut total_u = 0.0;
    let mut rng = rng_from_seed(seed);
    for s0 in starts {
        let mut s = s0.clone();
        let mut ret = 0.0;
        let mut w = 1.0;
        for _ in 0..cfg.rollout_k {
            let a = policy_act(params, &s, spec, Some(&mut rng));
            let q = model_query(model, &s, &a, task, spec)?;
            ret += w * q.r_pen;
            total_u += q.u;
            w *= cfg.gamma;
            s = q.s_next;
        }
        total += ret;
    }
    let n_queries = (starts.len() * cfg.rollout_k) as f64;
    Ok((total / starts.len() as f64, total_u / n_queries))
}

/// Start states drawn uniformly from the buffer's visited states.
pub fn sample_starts(buf: &Buffer, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| buf.transitions[rng.gen_range(0..buf.len())].s.clone()).collect()
}

/// Policy template for offline training: zero readout and near-silent
/// exploration noise (an offline learner has no use for exploration).
pub fn offline_template(spec: &EnvSpec, id: usize) -> PolicyParams {
    let mut p = PolicyParams::zeroed(spec, 3, 2.5, id);
    p.log_std = vec![(0.05_f64).ln(); spec.action_dim];
    p
}

/// Trains a policy by maximizing the penalized model return with CEM.
///
/// The template provides centers, bandwidth and the policy id; its readout
/// is the CEM init mean so a zeroed template starts from the stand-still
/// policy.
pub fn train_offline(
    model: &EpisodicModel,
    buf: &Buffer,
    task: &TaskSpec,
    spec: &EnvSpec,
    template: &PolicyParams,
    cfg: &OfflineConfig,
) -> Result<PolicyParams> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    cfg.validate()?;
    let starts = sample_starts(buf, cfg.n_start_states, derive_seed(cfg.cem.seed, 0x5747));
    let mut failure: Option<Error> = None;
    let result = cem::optimize(&cfg.cem, &template.to_vec(), |theta, seed| {
        let cand = template.with_params(theta);
        match penalized_model_return(&cand, model, &starts, task, spec, cfg, seed) {
            Ok((ret, _)) => ret,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(template.with_params(&result?.mean))
}

/// Monte-Carlo discounted return of an actor in the true environment.
pub fn evaluate_actor<A: Actor + ?Sized>(
    actor: &A,
    spec: &EnvSpec,
    task: &TaskSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let buf = rollout(actor, spec, RewardSpec::Task(task), n_episodes, seed, 0)?;
    let mut returns = Vec::with_capacity(n_episodes);
    for ep in buf.episodes() {
        let mut g = 0.0;
        let mut w = 1.0;
        for tr in ep {
            g += w * tr.r;
            w *= spec.gamma;
        }
        returns.push(g);
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / returns.len() as f64;
    Ok((mean, var.sqrt()))
}

/// Monte-Carlo discounted return of a stochastic policy.
pub fn evaluate_policy(
    params: &PolicyParams,
    spec: &EnvSpec,
    task: &TaskSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    evaluate_actor(&StochasticPolicy { params, spec }, spec, task, n_episodes, seed)
}
