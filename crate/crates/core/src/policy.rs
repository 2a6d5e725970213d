//! RBF-feature linear Gaussian policies.
//!
//! The action mean is a linear readout of Gaussian radial basis features of
//! the state; exploration noise is diagonal with per-dimension log standard
//! deviations. Small enough to optimize derivative-free, expressive enough
//! to steer the point mass anywhere in the arena.

use crate::env::{Actor, EnvSpec};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// `m x state_dim` RBF centers.
    pub centers: Vec<Vec<f64>>,
    /// Shared RBF bandwidth (> 0).
    pub bandwidth: f64,
    /// `m x action_dim` linear readout.
    pub weights: Vec<Vec<f64>>,
    /// Per-action-dimension log standard deviation.
    pub log_std: Vec<f64>,
    pub id: usize,
}

impl PolicyParams {
    /// Policy skeleton with a fixed center grid and zero readout.
    ///
    /// Centers form a `side x side` grid over the state box (state_dim 2).
    pub fn zeroed(spec: &EnvSpec, side: usize, bandwidth: f64, id: usize) -> Self {
        assert_eq!(spec.state_dim, 2, "grid centers assume a planar state");
        let mut centers = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                let frac = |k: usize| (k as f64 + 0.5) / side as f64;
                let x = spec.state_bounds[0][0]
                    + frac(i) * (spec.state_bounds[0][1] - spec.state_bounds[0][0]);
                let y = spec.state_bounds[1][0]
                    + frac(j) * (spec.state_bounds[1][1] - spec.state_bounds[1][0]);
                centers.push(vec![x, y]);
            }
        }
        let m = centers.len();
        PolicyParams {
            centers,
            bandwidth,
            weights: vec![vec![0.0; spec.action_dim]; m],
            log_std: vec![(0.2_f64).ln(); spec.action_dim],
            id,
        }
    }

    pub fn n_features(&self) -> usize {
        self.centers.len()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth <= 0.0 || !self.bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be finite and > 0, got {}",
                self.bandwidth
            )));
        }
        let finite = self
            .centers
            .iter()
            .chain(self.weights.iter())
            .flatten()
            .chain(self.log_std.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("policy parameters must be finite".into()));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.centers.len(),
                got: self.weights.len(),
            });
        }
        Ok(())
    }

    /// Gaussian RBF feature vector; equals 1 at a center.
    pub fn features(&self, s: &[f64]) -> Vec<f64> {
        let two_bw2 = 2.0 * self.bandwidth * self.bandwidth;
        self.centers
            .iter()
            .map(|c| {
                let d2: f64 = c.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / two_bw2).exp()
            })
            .collect()
    }

    /// Mean action before clipping: `W^T phi(s)`.
    pub fn mean_action(&self, s: &[f64]) -> Vec<f64> {
        let phi = self.features(s);
        let mut a = vec![0.0; self.action_dim()];
        for (w_row, &f) in self.weights.iter().zip(&phi) {
            for (ai, wi) in a.iter_mut().zip(w_row) {
                *ai += wi * f;
            }
        }
        a
    }

    /// Number of free parameters seen by the optimizer (readout + log_std).
    pub fn n_params(&self) -> usize {
        self.n_features() * self.action_dim() + self.action_dim()
    }

    /// Flattens the optimizable parameters.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.weights.iter().flatten().copied().collect();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Rebuilds a policy from a flat parameter vector, keeping this
    /// policy's centers and bandwidth. Log stds are clamped to a sane range.
    pub fn with_params(&self, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), self.n_params());
        let ad = self.action_dim();
        let mut out = self.clone();
        for (row, chunk) in out.weights.iter_mut().zip(theta.chunks(ad)) {
            row.copy_from_slice(chunk);
        }
        let tail = &theta[self.n_features() * ad..];
        for (ls, &t) in out.log_std.iter_mut().zip(tail) {
            *ls = t.clamp(-6.0, 1.0);
        }
        out
    }
}

/// Samples an action: `clip(W^T phi(s) + exp(log_std) * eps)`.
///
/// Pass `None` for deterministic mode (`eps = 0`).
pub fn policy_act(
    p: &PolicyParams,
    s: &[f64],
    spec: &EnvSpec,
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<f64> {
    let mut a = p.mean_action(s);
    if let Some(rng) = rng {
        for (ai, ls) in a.iter_mut().zip(&p.log_std) {
            let eps: f64 = rng.sample(StandardNormal);
            *ai += ls.exp() * eps;
        }
    }
    spec.clip_action(&mut a);
    a
}

/// Stochastic rollout adapter.
pub struct StochasticPolicy<'a> {
    pub params: &'a PolicyParams,
    pub spec: &'a EnvSpec,
}

impl Actor for StochasticPolicy<'_> {
    fn act(&self, s: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        policy_act(self.params, s, self.spec, Some(rng))
    }
}

/// Noise-free rollout adapter.
pub struct DeterministicPolicy<'a> {
    pub params: &'a PolicyParams,
    pub spec: &'a EnvSpec,
}

impl Actor for DeterministicPolicy<'_> {
    fn act(&self, s: &[f64], _rng: &mut ChaCha8Rng) -> Vec<f64> {
        policy_act(self.params, s, self.spec, None)
    }
}

/// Random readout initialization used for ensemble starts.
pub fn random_policy(
    spec: &EnvSpec,
    side: usize,
    bandwidth: f64,
    scale: f64,
    id: usize,
    rng: &mut ChaCha8Rng,
) -> PolicyParams {
    let mut p = PolicyParams::zeroed(spec, side, bandwidth, id);
    for row in &mut p.weights {
        for w in row.iter_mut() {
            *w = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    fn spec() -> EnvSpec {
        EnvSpec::point_mass_2d()
    }

    #[test]
    fn zero_weights_give_zero_action() {
        let p = PolicyParams::zeroed(&spec(), 3, 2.5, 0);
        let a = policy_act(&p, &[1.0, -2.0], &spec(), None);
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn feature_is_one_at_center() {
        let sp = spec();
        let mut p = PolicyParams::zeroed(&sp, 1, 1.0, 0);
        p.centers = vec![vec![0.5, -0.5]];
        p.weights = vec![vec![0.3, -0.9]];
        let a = policy_act(&p, &[0.5, -0.5], &sp, None);
        assert_relative_eq!(a[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(a[1], -0.9, epsilon = 1e-12);
        // saturating weights are clipped to the action box
        p.weights = vec![vec![5.0, -5.0]];
        let a = policy_act(&p, &[0.5, -0.5], &sp, None);
        assert_eq!(a, vec![1.0, -1.0]);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let sp = spec();
        let mut p = PolicyParams::zeroed(&sp, 3, 2.5, 0);
        p.log_std = vec![(0.5_f64).ln(); 2];
        let mut r1 = rng_from_seed(4);
        let mut r2 = rng_from_seed(4);
        let a = policy_act(&p, &[0.0, 0.0], &sp, Some(&mut r1));
        let b = policy_act(&p, &[0.0, 0.0], &sp, Some(&mut r2));
        assert_eq!(a, b);
    }

    #[test]
    fn param_vector_round_trips() {
        let sp = spec();
        let mut rng = rng_from_seed(9);
        let p = random_policy(&sp, 3, 2.5, 0.7, 5, &mut rng);
        let v = p.to_vec();
        assert_eq!(v.len(), p.n_params());
        let q = p.with_params(&v);
        assert_eq!(p, q);
    }
}
