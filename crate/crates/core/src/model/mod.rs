//! Episodic nearest-entry dynamics model with an uncertainty penalty.
//!
//! The model memorizes every transition of a buffer. A query `(s, a)`
//! returns the stored next state of the memory entry whose `(s, a)` key is
//! closest in Euclidean norm, an uncertainty `u = kappa * distance`, and a
//! reward penalized by `gamma * u`. Under the declared Lipschitz constants
//! (`kappa >= lipschitz_r * lipschitz_t`) the uncertainty upper-bounds the
//! value error of the prediction, so maximizing the penalized return is a
//! pessimistic surrogate for the true objective.

pub mod kdtree;

use crate::env::{step_reward, Buffer, EnvSpec, TaskSpec};
use crate::error::{Error, Result};
use kdtree::KdTree;

/// Non-parametric dynamics model over a buffer's transitions.
#[derive(Debug)]
pub struct EpisodicModel {
    /// `(s, a, s', r)` entries in buffer order.
    entries: Vec<MemoryEntry>,
    index: KdTree,
    key_dim: usize,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
struct MemoryEntry {
    s2: Vec<f64>,
    /// generation-time reward, kept for auditing only
    r_stored: f64,
}

/// Result of one penalized model query.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedQuery {
    pub s_next: Vec<f64>,
    /// task reward recomputed on `(s, a, s_next)`
    pub r_raw: f64,
    /// `kappa * distance(query key, nearest memory key)`
    pub u: f64,
    /// `r_raw - gamma * u`
    pub r_pen: f64,
    /// memory index of the nearest entry
    pub entry: usize,
}

/// Builds the model by memorizing every transition (duplicates kept).
pub fn model_build(buf: &Buffer, kappa: f64, gamma: f64) -> Result<EpisodicModel> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa must be > 0, got {kappa}")));
    }
    let key_dim = buf.transitions[0].s.len() + buf.transitions[0].a.len();
    let mut keys = Vec::with_capacity(buf.len() * key_dim);
    let mut entries = Vec::with_capacity(buf.len());
    for tr in &buf.transitions {
        keys.extend_from_slice(&tr.s);
        keys.extend_from_slice(&tr.a);
        entries.push(MemoryEntry { s2: tr.s2.clone(), r_stored: tr.r });
    }
    Ok(EpisodicModel { entries, index: KdTree::new(keys, key_dim), key_dim, kappa, gamma })
}

impl EpisodicModel {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reward stored at generation time for a memory entry.
    pub fn stored_reward(&self, entry: usize) -> f64 {
        self.entries[entry].r_stored
    }

    /// Default uncertainty coefficient for an environment: the product of
    /// its declared Lipschitz constants.
    pub fn default_kappa(spec: &EnvSpec) -> f64 {
        spec.lipschitz_r * spec.lipschitz_t
    }
}

/// Nearest-entry lookup with recomputed task reward and pessimism penalty.
pub fn model_query(
    model: &EpisodicModel,
    s: &[f64],
    a: &[f64],
    task: &TaskSpec,
    spec: &EnvSpec,
) -> Result<PenalizedQuery> {
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    if s.len() + a.len() != model.key_dim {
        return Err(Error::DimensionMismatch { expected: model.key_dim, got: s.len() + a.len() });
    }
    let mut key = Vec::with_capacity(model.key_dim);
    key.extend_from_slice(s);
    key.extend_from_slice(a);
    let (entry, d2) = model.index.nearest(&key);
    let s_next = model.entries[entry].s2.clone();
    let u = model.kappa * d2.sqrt();
    let r_raw = step_reward(spec, task, s, &s_next)?;
    Ok(PenalizedQuery { r_pen: r_raw - model.gamma * u, s_next, r_raw, u, entry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{rollout, RewardSpec, Transition};
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> EnvSpec {
        EnvSpec::point_mass_2d()
    }

    fn tiny_buffer(transitions: Vec<Transition>) -> Buffer {
        Buffer {
            env_id: "pointmass2d".into(),
            episode_starts: vec![0],
            seed: 0,
            policy_ids: vec![0],
            reward_desc: "none".into(),
            transitions,
        }
    }

    fn tr(s: [f64; 2], a: [f64; 2], s2: [f64; 2]) -> Transition {
        Transition { s: s.to_vec(), a: a.to_vec(), r: 0.0, s2: s2.to_vec(), t: 0, done: false, policy_id: 0 }
    }

    #[test]
    fn build_memorizes_everything() {
        let sp = spec();
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let buf = rollout(&noisy, &sp, RewardSpec::None, 2, 5, 0).unwrap();
        let m = model_build(&buf, 1.0, sp.gamma).unwrap();
        assert_eq!(m.len(), buf.len());
        let m2 = model_build(&buf, 1.0, sp.gamma).unwrap();
        // deterministic rebuild answers queries identically
        let q = model_query(&m, &[0.3, -0.2], &[0.5, 0.5], &TaskSpec::angle(0.0), &sp).unwrap();
        let q2 = model_query(&m2, &[0.3, -0.2], &[0.5, 0.5], &TaskSpec::angle(0.0), &sp).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn build_rejects_empty_buffer() {
        let buf = tiny_buffer(vec![]);
        let buf = Buffer { episode_starts: vec![], ..buf };
        assert!(matches!(model_build(&buf, 1.0, 0.9), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn on_memory_query_has_zero_uncertainty() {
        let sp = spec();
        let buf = tiny_buffer(vec![tr([0.0, 0.0], [1.0, 0.0], [0.1, 0.0])]);
        let m = model_build(&buf, 2.0, sp.gamma).unwrap();
        let q = model_query(&m, &[0.0, 0.0], &[1.0, 0.0], &TaskSpec::angle(0.0), &sp).unwrap();
        assert_eq!(q.u, 0.0);
        assert_eq!(q.s_next, vec![0.1, 0.0]);
        assert_eq!(q.r_pen, q.r_raw);
    }

    #[test]
    fn uncertainty_is_kappa_times_distance() {
        let sp = spec();
        // memory key (0,0,1,0); query key (0,1,1,0) sits at distance 1
        let buf = tiny_buffer(vec![tr([0.0, 0.0], [1.0, 0.0], [0.1, 0.0])]);
        let m = model_build(&buf, 2.0, sp.gamma).unwrap();
        let q = model_query(&m, &[0.0, 1.0], &[1.0, 0.0], &TaskSpec::angle(0.0), &sp).unwrap();
        assert_relative_eq!(q.u, 2.0, epsilon = 1e-12);
        assert_relative_eq!(q.r_pen, q.r_raw - sp.gamma * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn equidistant_entries_resolve_to_lowest_index() {
        let sp = spec();
        let buf = tiny_buffer(vec![
            tr([1.0, 0.0], [0.0, 0.0], [9.0, 9.0]),
            tr([-1.0, 0.0], [0.0, 0.0], [-9.0, -9.0]),
        ]);
        let m = model_build(&buf, 1.0, sp.gamma).unwrap();
        let q = model_query(&m, &[0.0, 0.0], &[0.0, 0.0], &TaskSpec::angle(0.0), &sp).unwrap();
        assert_eq!(q.entry, 0);
        assert_eq!(q.s_next, vec![9.0, 9.0]);
    }

    #[test]
    fn reward_is_recomputed_not_stored() {
        let sp = spec();
        let mut t = tr([0.0, 0.0], [0.0, 1.0], [0.0, 0.1]);
        t.r = 123.0; // stored generation-time value must be ignored
        let buf = tiny_buffer(vec![t]);
        let m = model_build(&buf, 1.0, sp.gamma).unwrap();
        let q = model_query(&m, &[0.0, 0.0], &[0.0, 1.0], &TaskSpec::angle(0.0), &sp).unwrap();
        assert_relative_eq!(q.r_raw, 1.0, epsilon = 1e-12);
        assert_eq!(m.stored_reward(q.entry), 123.0);
    }

    #[test]
    fn queries_match_linear_scan_argmin() {
        let sp = spec();
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let buf = rollout(&noisy, &sp, RewardSpec::None, 3, 17, 0).unwrap();
        let m = model_build(&buf, 1.5, sp.gamma).unwrap();
        let mut keys = Vec::new();
        for t in &buf.transitions {
            keys.extend_from_slice(&t.s);
            keys.extend_from_slice(&t.a);
        }
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let s = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let q = model_query(&m, &s, &a, &TaskSpec::angle(90.0), &sp).unwrap();
            let key = [s[0], s[1], a[0], a[1]];
            let (want, want_d2) = kdtree::nearest_linear(&keys, 4, &key);
            assert_eq!(q.entry, want);
            assert_relative_eq!(q.u, 1.5 * want_d2.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_never_raises_reward() {
        let sp = spec();
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let buf = rollout(&noisy, &sp, RewardSpec::None, 1, 2, 0).unwrap();
        let m = model_build(&buf, EpisodicModel::default_kappa(&sp), sp.gamma).unwrap();
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            let s = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let q = model_query(&m, &s, &a, &TaskSpec::jump(15.0, 0.0), &sp).unwrap();
            assert!(q.r_pen <= q.r_raw);
            assert!(q.u >= 0.0);
        }
    }

    #[test]
    fn uncertainty_is_lipschitz_in_the_query() {
        let sp = spec();
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let buf = rollout(&noisy, &sp, RewardSpec::None, 1, 4, 0).unwrap();
        let kappa = 2.5;
        let m = model_build(&buf, kappa, sp.gamma).unwrap();
        let task = TaskSpec::angle(0.0);
        let mut rng = rng_from_seed(12);
        for _ in 0..100 {
            let s1 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let s2 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let u1 = model_query(&m, &s1, &a, &task, &sp).unwrap().u;
            let u2 = model_query(&m, &s2, &a, &task, &sp).unwrap().u;
            let dist =
                ((s1[0] - s2[0]).powi(2) + (s1[1] - s2[1]).powi(2)).sqrt();
            assert!((u1 - u2).abs() <= kappa * dist + 1e-12);
        }
    }
}
