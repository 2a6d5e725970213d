//! Unsupervised diversity training of a policy ensemble.
//!
//! Each policy is scored by how far its discounted occupancy sits from the
//! closest other policy in Wasserstein distance, and the ensemble is
//! trained round-robin: one policy's parameters move while the occupancies
//! of its peers stay frozen. The result maximizes the minimum pairwise
//! distance — a packing of the occupancy space — so that whatever task
//! reward arrives later, some member's data is close to where an optimal
//! policy would go.
//!
//! A partial task reward can be mixed in with weight lambda; an infinite
//! lambda trains every member on the task alone, which is the supervised
//! baseline the experiments compare against.

use crate::cem::{self, CemConfig};
use crate::env::{average_return, rollout, EnvSpec, RewardSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::policy::{random_policy, PolicyParams, StochasticPolicy};
use crate::rng::{derive_seed, derive_seed2, rng_from_seed};
use crate::transport::{
    min_pairwise, occupancy_from_buffer, pairwise_w1, w1, DistanceMode, EmpiricalMeasure,
    Projection,
};

/// Distance backend for training-time scores (seeds derive internally).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainDistance {
    Exact,
    Sliced { n_projections: usize },
}

impl TrainDistance {
    fn mode(&self, seed: u64) -> DistanceMode {
        match *self {
            TrainDistance::Exact => DistanceMode::Exact,
            TrainDistance::Sliced { n_projections } => DistanceMode::Sliced { n_projections, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityConfig {
    /// Ensemble size K (>= 2).
    pub k_policies: usize,
    /// Round-robin passes over the ensemble.
    pub rounds: usize,
    /// Weight of the partial task reward; `f64::INFINITY` trains on the
    /// task alone, `0.0` (with no partial task) is fully unsupervised.
    pub lambda: f64,
    pub distance: TrainDistance,
    /// Coordinates the occupancy measures live in.
    pub projection: Projection,
    /// Partial task reward available at generation time, if any.
    pub partial_task: Option<TaskSpec>,
    /// Episodes per occupancy estimate.
    pub eval_episodes: usize,
    /// Support cap applied to occupancy estimates.
    pub measure_cap: usize,
    /// RBF grid side and bandwidth of the policy class.
    pub rbf_side: usize,
    pub bandwidth: f64,
    /// Scale of the random initial readout.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            k_policies: 8,
            rounds: 4,
            lambda: 0.0,
            distance: TrainDistance::Sliced { n_projections: 16 },
            projection: Projection::State,
            partial_task: None,
            eval_episodes: 2,
            measure_cap: 2000,
            rbf_side: 3,
            bandwidth: 2.5,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl DiversityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_policies < 2 {
            return Err(Error::InvalidArgument("ensemble needs K >= 2 policies".into()));
        }
        if self.rounds == 0 || self.eval_episodes == 0 {
            return Err(Error::InvalidArgument("rounds and eval_episodes must be >= 1".into()));
        }
        if self.lambda < 0.0 || self.lambda.is_nan() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.lambda.is_infinite() && self.partial_task.is_none() {
            return Err(Error::InvalidArgument(
                "infinite lambda needs a partial task to train on".into(),
            ));
        }
        Ok(())
    }

    /// Default CEM settings for the per-policy parameter search.
    pub fn default_cem(&self) -> CemConfig {
        CemConfig {
            population: 24,
            elite_frac: 0.25,
            iterations: 10,
            init_std: 0.6,
            eval_episodes: self.eval_episodes,
            seed: self.seed,
        }
    }
}

/// Minimum distance from measure `i` to any other measure.
pub fn pseudo_reward(i: usize, measures: &[EmpiricalMeasure], mode: DistanceMode) -> Result<f64> {
    if measures.len() < 2 {
        return Err(Error::InvalidArgument("pseudo reward needs at least 2 measures".into()));
    }
    if i >= measures.len() {
        return Err(Error::InvalidArgument(format!("measure index {i} out of range")));
    }
    let mut best = f64::INFINITY;
    for (j, other) in measures.iter().enumerate() {
        if j != i {
            best = best.min(w1(other, &measures[i], mode)?);
        }
    }
    Ok(best)
}

/// Trained ensemble plus the per-round held-out diversity objective.
#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    pub policies: Vec<PolicyParams>,
    /// `min_{i != j} W1` on held-out rollouts; entry 0 is the random
    /// initialization, then one entry per round.
    pub round_min_pairwise: Vec<f64>,
}

/// Held-out occupancy estimate and the task return of the same rollouts.
struct HeldOut {
    measure: EmpiricalMeasure,
    task_return: f64,
}

fn heldout(
    params: &PolicyParams,
    spec: &EnvSpec,
    cfg: &DiversityConfig,
    policy: usize,
) -> Result<HeldOut> {
    // fixed per-policy seed: the estimate moves only when the policy does
    let seed = derive_seed2(cfg.seed, 0x8E1D, policy as u64);
    let buf = rollout(
        &StochasticPolicy { params, spec },
        spec,
        RewardSpec::None,
        cfg.eval_episodes,
        seed,
        policy,
    )?;
    let task_return = match &cfg.partial_task {
        Some(task) => average_return(&relabel_buffer(&buf, task, spec)?, spec.gamma)?,
        None => 0.0,
    };
    let measure = occupancy_from_buffer(&buf, spec.gamma, &cfg.projection)?
        .cap_support(cfg.measure_cap, derive_seed(seed, 0xCA9));
    Ok(HeldOut { measure, task_return })
}

/// Held-out value of the training objective for one policy against the
/// frozen measures of its peers (exact distances).
fn heldout_objective(
    h: &HeldOut,
    i: usize,
    measures: &[EmpiricalMeasure],
    cfg: &DiversityConfig,
) -> Result<f64> {
    if cfg.lambda.is_infinite() {
        return Ok(h.task_return);
    }
    let mut nearest = f64::INFINITY;
    for (j, peer) in measures.iter().enumerate() {
        if j != i {
            nearest = nearest.min(w1(peer, &h.measure, DistanceMode::Exact)?);
        }
    }
    Ok(cfg.lambda * h.task_return + nearest)
}

/// Round-robin ensemble training maximizing the surrogate packing
/// objective (optionally mixed with a partial task reward).
pub fn train_diverse(
    spec: &EnvSpec,
    cfg: &DiversityConfig,
    cem_cfg: &CemConfig,
) -> Result<TrainedEnsemble> {
    cfg.validate()?;
    cem_cfg.validate()?;
    spec.validate()?;

    let mut policies: Vec<PolicyParams> = (0..cfg.k_policies)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed2(cfg.seed, 0x171, i as u64));
            random_policy(spec, cfg.rbf_side, cfg.bandwidth, cfg.init_scale, i, &mut rng)
        })
        .collect();

    let mut held: Vec<HeldOut> = policies
        .iter()
        .enumerate()
        .map(|(i, p)| heldout(p, spec, cfg, i))
        .collect::<Result<_>>()?;
    let mut measures: Vec<EmpiricalMeasure> = held.iter().map(|h| h.measure.clone()).collect();

    let exact = DistanceMode::Exact;
    let mut round_min_pairwise = vec![min_pairwise(&pairwise_w1(&measures, exact)?)];

    for round in 0..cfg.rounds {
        for i in 0..cfg.k_policies {
            let template = policies[i].clone();
            let peers: Vec<EmpiricalMeasure> = measures
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, m)| m.clone())
                .collect();
            // one direction seed per (round, policy): candidates compete
            // under identical projections
            let slice_seed = derive_seed2(cfg.seed, 0x51C + round as u64, i as u64);
            let mode = cfg.distance.mode(slice_seed);

            let cem_run = CemConfig {
                seed: derive_seed2(cem_cfg.seed, round as u64, i as u64),
                ..cem_cfg.clone()
            };
            let mut failure: Option<Error> = None;
            let result = cem::optimize(&cem_run, &template.to_vec(), |theta, seed| {
                let cand = template.with_params(theta);
                match score_candidate(&cand, spec, cfg, &peers, mode, seed) {
                    Ok(score) => score,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            // a policy update only lands if it improves its own held-out
            // objective against the frozen peers; moves of policy i cannot
            // lower any other pair's distance, so the logged ensemble
            // objective never regresses
            let cand_params = template.with_params(&result?.mean);
            let cand_held = heldout(&cand_params, spec, cfg, i)?;
            let incumbent_score = heldout_objective(&held[i], i, &measures, cfg)?;
            let cand_score = heldout_objective(&cand_held, i, &measures, cfg)?;
            if cand_score >= incumbent_score {
                policies[i] = cand_params;
                measures[i] = cand_held.measure.clone();
                held[i] = cand_held;
            }
        }
        round_min_pairwise.push(min_pairwise(&pairwise_w1(&measures, exact)?));
    }

    Ok(TrainedEnsemble { policies, round_min_pairwise })
}

fn score_candidate(
    cand: &PolicyParams,
    spec: &EnvSpec,
    cfg: &DiversityConfig,
    peers: &[EmpiricalMeasure],
    mode: DistanceMode,
    seed: u64,
) -> Result<f64> {
    let gen_reward = match (&cfg.partial_task, cfg.lambda) {
        (Some(task), l) if l > 0.0 => RewardSpec::Task(task),
        _ => RewardSpec::None,
    };
    let buf = rollout(
        &StochasticPolicy { params: cand, spec },
        spec,
        gen_reward,
        cfg.eval_episodes,
        seed,
        cand.id,
    )?;

    let task_part = match (&cfg.partial_task, cfg.lambda) {
        (Some(_), l) if l > 0.0 => average_return(&buf, spec.gamma)?,
        _ => 0.0,
    };
    if cfg.lambda.is_infinite() {
        return Ok(task_part);
    }

    let occ = occupancy_from_buffer(&buf, spec.gamma, &cfg.projection)?
        .cap_support(cfg.measure_cap, derive_seed(seed, 0xCA9));
    let mut nearest = f64::INFINITY;
    for peer in peers {
        nearest = nearest.min(w1(peer, &occ, mode)?);
    }
    Ok(cfg.lambda * task_part + nearest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::SpaceTag;

    fn spec() -> EnvSpec {
        EnvSpec::point_mass_2d()
    }

    fn diracs(points: &[[f64; 2]]) -> Vec<EmpiricalMeasure> {
        points.iter().map(|p| EmpiricalMeasure::dirac(p.to_vec(), SpaceTag::State)).collect()
    }

    #[test]
    fn pseudo_reward_with_two_measures_is_their_distance() {
        let ms = diracs(&[[0.0, 0.0], [3.0, 4.0]]);
        let r = pseudo_reward(1, &ms, DistanceMode::Exact).unwrap();
        assert!((r - 5.0).abs() < 1e-9);
    }

    #[test]
    fn pseudo_reward_takes_the_minimum() {
        let ms = diracs(&[[0.0, 0.0], [2.0, 0.0], [5.0, 0.0]]);
        let r = pseudo_reward(0, &ms, DistanceMode::Exact).unwrap();
        assert!((r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pseudo_reward_zero_when_any_peer_matches() {
        let ms = diracs(&[[1.0, 1.0], [1.0, 1.0], [4.0, 4.0]]);
        assert!(pseudo_reward(0, &ms, DistanceMode::Exact).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pseudo_reward_needs_two_measures() {
        let ms = diracs(&[[0.0, 0.0]]);
        assert!(pseudo_reward(0, &ms, DistanceMode::Exact).is_err());
    }

    #[test]
    fn pseudo_reward_is_permutation_equivariant() {
        let ms = diracs(&[[0.0, 0.0], [1.0, 0.0], [0.0, 4.0], [-3.0, 0.0]]);
        let base: Vec<f64> = (0..4)
            .map(|i| pseudo_reward(i, &ms, DistanceMode::Exact).unwrap())
            .collect();
        // reverse the ensemble and check the rewards reverse with it
        let rev: Vec<EmpiricalMeasure> = ms.iter().rev().cloned().collect();
        for i in 0..4 {
            let r = pseudo_reward(i, &rev, DistanceMode::Exact).unwrap();
            assert!((r - base[3 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn config_rejects_single_policy() {
        let cfg = DiversityConfig { k_policies: 1, ..DiversityConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn two_policy_training_separates_occupancies() {
        let sp = spec();
        let cfg = DiversityConfig {
            k_policies: 2,
            rounds: 2,
            seed: 7,
            ..DiversityConfig::default()
        };
        let ens = train_diverse(&sp, &cfg, &cfg.default_cem()).unwrap();
        let first = ens.round_min_pairwise[0];
        let last = *ens.round_min_pairwise.last().unwrap();
        assert!(
            last > first,
            "training should separate the pair: {first} -> {last}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let sp = spec();
        let cfg = DiversityConfig {
            k_policies: 2,
            rounds: 1,
            seed: 3,
            ..DiversityConfig::default()
        };
        let a = train_diverse(&sp, &cfg, &cfg.default_cem()).unwrap();
        let b = train_diverse(&sp, &cfg, &cfg.default_cem()).unwrap();
        assert_eq!(a.policies, b.policies);
        assert_eq!(a.round_min_pairwise, b.round_min_pairwise);
    }

    #[test]
    fn infinite_lambda_trains_toward_the_task() {
        let sp = spec();
        let task = TaskSpec::angle(0.0);
        let cfg = DiversityConfig {
            k_policies: 2,
            rounds: 2,
            lambda: f64::INFINITY,
            partial_task: Some(task.clone()),
            seed: 13,
            ..DiversityConfig::default()
        };
        let ens = train_diverse(&sp, &cfg, &cfg.default_cem()).unwrap();
        for (i, p) in ens.policies.iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed2(cfg.seed, 0x171, i as u64));
            let raw = random_policy(&sp, cfg.rbf_side, cfg.bandwidth, cfg.init_scale, i, &mut rng);
            let (trained, _) = crate::offline::evaluate_policy(p, &sp, &task, 4, 99).unwrap();
            let (random, _) = crate::offline::evaluate_policy(&raw, &sp, &task, 4, 99).unwrap();
            assert!(
                trained >= random,
                "policy {i}: task training went backwards ({trained} < {random})"
            );
        }
    }
}
