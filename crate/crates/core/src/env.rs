//! Environment abstraction and the 2-D point-mass instantiation.
//!
//! Dynamics are a deterministic single integrator, `s' = clip(s + dt * a)`,
//! with box-bounded states and actions. The transition map is Lipschitz in
//! the concatenated `(s, a)` input with constant `sqrt(1 + dt^2)` (clipping
//! is a projection onto a box and therefore non-expansive), which is what
//! `EnvSpec::lipschitz_t` declares for the default environment.
//!
//! Episodes always start at the centre of the state box and run for a fixed
//! horizon; there is no early termination.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use rand_chacha::ChaCha8Rng;

/// Environment description: spaces, dynamics constants, and episode rules.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Per-dimension `[lo, hi]` state bounds.
    pub state_bounds: Vec<[f64; 2]>,
    /// Per-dimension `[lo, hi]` action bounds.
    pub action_bounds: Vec<[f64; 2]>,
    /// Integration step.
    pub dt: f64,
    /// Maximum steps per episode.
    pub horizon: usize,
    /// Discount factor in `[0, 1)`.
    pub gamma: f64,
    /// Declared Lipschitz constant of the transition map on concatenated
    /// `(s, a)` inputs under the Euclidean metric.
    pub lipschitz_t: f64,
    /// Declared Lipschitz constant of value functions on states.
    pub lipschitz_r: f64,
}

impl EnvSpec {
    /// Default 2-D point mass on `[-5, 5]^2` with unit action box.
    pub fn point_mass_2d() -> Self {
        let dt = 0.1_f64;
        EnvSpec {
            id: "pointmass2d".to_string(),
            state_dim: 2,
            action_dim: 2,
            state_bounds: vec![[-5.0, 5.0]; 2],
            action_bounds: vec![[-1.0, 1.0]; 2],
            dt,
            horizon: 100,
            gamma: 0.99,
            // Operator norm of (ds, da) -> ds + dt*da, then a box projection.
            lipschitz_t: (1.0 + dt * dt).sqrt(),
            // Displacement-rate rewards scale like 1/dt, and so do the
            // value gradients they induce.
            lipschitz_r: 1.0 / dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in [0,1), got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.lipschitz_t <= 0.0 || self.lipschitz_r <= 0.0 {
            return Err(Error::InvalidArgument(
                "lipschitz constants must be > 0".into(),
            ));
        }
        for bounds in [&self.state_bounds, &self.action_bounds] {
            for b in bounds {
                if !b[0].is_finite() || !b[1].is_finite() || b[0] >= b[1] {
                    return Err(Error::InvalidArgument(format!(
                        "bounds must be finite with lo < hi, got [{}, {}]",
                        b[0], b[1]
                    )));
                }
            }
        }
        if self.state_bounds.len() != self.state_dim || self.action_bounds.len() != self.action_dim
        {
            return Err(Error::InvalidArgument(
                "bounds length must match dimensions".into(),
            ));
        }
        Ok(())
    }

    /// Diameter of the state box (Euclidean).
    pub fn state_diameter(&self) -> f64 {
        self.state_bounds
            .iter()
            .map(|b| (b[1] - b[0]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Diameter of the action box (Euclidean).
    pub fn action_diameter(&self) -> f64 {
        self.action_bounds
            .iter()
            .map(|b| (b[1] - b[0]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Initial state: the centre of the state box.
    pub fn reset_state(&self) -> Vec<f64> {
        self.state_bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect()
    }

    pub fn clip_state(&self, s: &mut [f64]) {
        for (x, b) in s.iter_mut().zip(&self.state_bounds) {
            *x = x.clamp(b[0], b[1]);
        }
    }

    pub fn clip_action(&self, a: &mut [f64]) {
        for (x, b) in a.iter_mut().zip(&self.action_bounds) {
            *x = x.clamp(b[0], b[1]);
        }
    }
}

/// One environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s2: Vec<f64>,
    /// Step index within the episode.
    pub t: usize,
    pub done: bool,
    /// Id of the policy that produced this step.
    pub policy_id: usize,
}

/// Ordered transition log with episode boundaries and provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    pub env_id: String,
    pub transitions: Vec<Transition>,
    /// Indices where episodes start; strictly increasing, first is 0.
    pub episode_starts: Vec<usize>,
    pub seed: u64,
    pub policy_ids: Vec<usize>,
    /// Human-readable description of the reward used at generation time.
    pub reward_desc: String,
}

impl Buffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_starts.len()
    }

    /// Iterator over episode slices.
    pub fn episodes(&self) -> impl Iterator<Item = &[Transition]> {
        let n = self.transitions.len();
        self.episode_starts.iter().enumerate().map(move |(k, &start)| {
            let end = self.episode_starts.get(k + 1).copied().unwrap_or(n);
            &self.transitions[start..end]
        })
    }

    pub fn validate(&self, spec: &EnvSpec) -> Result<()> {
        if self.episode_starts.first() != Some(&0) && !self.transitions.is_empty() {
            return Err(Error::InvalidArgument("episode_starts must begin at 0".into()));
        }
        if !self.episode_starts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "episode_starts must be strictly increasing".into(),
            ));
        }
        for ep in self.episodes() {
            if ep.len() > spec.horizon {
                return Err(Error::InvalidArgument(format!(
                    "episode length {} exceeds horizon {}",
                    ep.len(),
                    spec.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Task reward specification, fixed only at the offline stage.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Move along a compass direction; `0` degrees is the +y axis and angles
    /// increase counterclockwise. Reward is the unit direction dotted with
    /// the per-step displacement rate `(s' - s) / dt`.
    Angle { angle_deg: f64 },
    /// Forward progress `(s' - s)_x / dt` plus a height bonus
    /// `c_z * (s'_y - z0)`. Negative `c_z` rewards staying low.
    Jump { c_z: f64, z0: f64 },
}

impl TaskSpec {
    pub fn angle(angle_deg: f64) -> Self {
        TaskSpec::Angle { angle_deg }
    }

    pub fn jump(c_z: f64, z0: f64) -> Self {
        TaskSpec::Jump { c_z, z0 }
    }

    /// Unit direction for angle tasks: 0 deg = +y, counterclockwise.
    pub fn direction(&self) -> Option<[f64; 2]> {
        match self {
            TaskSpec::Angle { angle_deg } => {
                let rad = angle_deg.to_radians();
                Some([-rad.sin(), rad.cos()])
            }
            TaskSpec::Jump { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::Angle { angle_deg } => {
                if !(0.0..360.0).contains(angle_deg) {
                    return Err(Error::InvalidArgument(format!(
                        "angle_deg must be in [0, 360), got {angle_deg}"
                    )));
                }
            }
            TaskSpec::Jump { c_z, z0 } => {
                if !c_z.is_finite() || !z0.is_finite() {
                    return Err(Error::InvalidArgument("jump parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            TaskSpec::Angle { angle_deg } => format!("angle:{angle_deg}"),
            TaskSpec::Jump { c_z, z0 } => format!("jump:{c_z},{z0}"),
        }
    }

    /// Parses the `label` format back: `angle:<deg>` or `jump:<c_z>,<z0>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("task {s:?} needs kind:params")))?;
        let task = match kind {
            "angle" => {
                let angle_deg: f64 = rest
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("task {s:?}: {e}")))?;
                TaskSpec::Angle { angle_deg }
            }
            "jump" => {
                let (cz, z0) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidArgument(format!("task {s:?} needs c_z,z0")))?;
                TaskSpec::Jump {
                    c_z: cz.parse().map_err(|e| Error::InvalidArgument(format!("task {s:?}: {e}")))?,
                    z0: z0.parse().map_err(|e| Error::InvalidArgument(format!("task {s:?}: {e}")))?,
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown task kind {other:?}")));
            }
        };
        task.validate()?;
        Ok(task)
    }
}

/// Anything that maps states to actions during a rollout.
///
/// Stochastic actors draw noise from the provided RNG; deterministic actors
/// ignore it.
pub trait Actor {
    fn act(&self, s: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;
}

impl<F> Actor for F
where
    F: Fn(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
{
    fn act(&self, s: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self(s, rng)
    }
}

/// Reward rule applied while generating a buffer.
pub enum RewardSpec<'a> {
    /// Store 0 for every step; the task arrives later.
    None,
    /// A known (possibly partial) task reward.
    Task(&'a TaskSpec),
    /// Arbitrary per-step hook on `(s, a, s')`.
    Hook(&'a dyn Fn(&[f64], &[f64], &[f64]) -> f64),
}

impl RewardSpec<'_> {
    fn eval(&self, spec: &EnvSpec, s: &[f64], a: &[f64], s2: &[f64]) -> Result<f64> {
        match self {
            RewardSpec::None => Ok(0.0),
            RewardSpec::Task(task) => step_reward(spec, task, s, s2),
            RewardSpec::Hook(f) => Ok(f(s, a, s2)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RewardSpec::None => "none".to_string(),
            RewardSpec::Task(t) => t.label(),
            RewardSpec::Hook(_) => "hook".to_string(),
        }
    }
}

/// Deterministic point-mass dynamics: `s' = clip(s + dt * a)`.
///
/// The action is clipped to the action box before integrating.
pub fn env_step(state: &[f64], action: &[f64], spec: &EnvSpec) -> Result<Vec<f64>> {
    if state.len() != spec.state_dim {
        return Err(Error::DimensionMismatch { expected: spec.state_dim, got: state.len() });
    }
    if action.len() != spec.action_dim {
        return Err(Error::DimensionMismatch { expected: spec.action_dim, got: action.len() });
    }
    let mut a = action.to_vec();
    spec.clip_action(&mut a);
    let mut next: Vec<f64> = state.iter().zip(&a).map(|(s, ai)| s + spec.dt * ai).collect();
    spec.clip_state(&mut next);
    Ok(next)
}

/// Task reward on a raw `(s, s')` pair; shared by relabeling and the model.
pub fn step_reward(spec: &EnvSpec, task: &TaskSpec, s: &[f64], s2: &[f64]) -> Result<f64> {
    if s.len() != spec.state_dim || s2.len() != spec.state_dim {
        return Err(Error::DimensionMismatch { expected: spec.state_dim, got: s.len().min(s2.len()) });
    }
    match task {
        TaskSpec::Angle { .. } => {
            let u = task.direction().expect("angle task has a direction");
            let vx = (s2[0] - s[0]) / spec.dt;
            let vy = (s2[1] - s[1]) / spec.dt;
            Ok(u[0] * vx + u[1] * vy)
        }
        TaskSpec::Jump { c_z, z0 } => {
            let forward = (s2[0] - s[0]) / spec.dt;
            Ok(forward + c_z * (s2[1] - z0))
        }
    }
}

/// Task reward of a stored transition.
pub fn task_reward(tr: &Transition, task: &TaskSpec, spec: &EnvSpec) -> Result<f64> {
    step_reward(spec, task, &tr.s, &tr.s2)
}

/// Rolls out `n_episodes` full-horizon episodes of `policy` in the true
/// environment under the given reward rule. Bit-reproducible for a fixed
/// `(policy, seed)` pair; episode k draws from a seed derived as stream k.
pub fn rollout<A: Actor + ?Sized>(
    policy: &A,
    spec: &EnvSpec,
    reward: RewardSpec<'_>,
    n_episodes: usize,
    seed: u64,
    policy_id: usize,
) -> Result<Buffer> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    let mut transitions = Vec::with_capacity(n_episodes * spec.horizon);
    let mut episode_starts = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        episode_starts.push(transitions.len());
        let mut rng = rng_from_seed(derive_seed(seed, ep as u64));
        let mut s = spec.reset_state();
        for t in 0..spec.horizon {
            let mut a = policy.act(&s, &mut rng);
            spec.clip_action(&mut a);
            let s2 = env_step(&s, &a, spec)?;
            let r = reward.eval(spec, &s, &a, &s2)?;
            transitions.push(Transition {
                s: s.clone(),
                a,
                r,
                s2: s2.clone(),
                t,
                done: t + 1 == spec.horizon,
                policy_id,
            });
            s = s2;
        }
    }
    Ok(Buffer {
        env_id: spec.id.clone(),
        transitions,
        episode_starts,
        seed,
        policy_ids: vec![policy_id],
        reward_desc: reward.describe(),
    })
}

/// Returns a copy of the buffer with every reward replaced by the task
/// reward of its `(s, s')` pair. All other fields are untouched.
pub fn relabel_buffer(buf: &Buffer, task: &TaskSpec, spec: &EnvSpec) -> Result<Buffer> {
    let mut out = buf.clone();
    for tr in &mut out.transitions {
        tr.r = task_reward(tr, task, spec)?;
    }
    out.reward_desc = format!("relabeled:{}", task.label());
    Ok(out)
}

/// Mean discounted per-episode return, `mean_ep sum_t gamma^t r_t`.
pub fn average_return(buf: &Buffer, gamma: f64) -> Result<f64> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ep in buf.episodes() {
        let mut g = 0.0;
        let mut w = 1.0;
        for tr in ep {
            g += w * tr.r;
            w *= gamma;
        }
        total += g;
        count += 1;
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn spec() -> EnvSpec {
        EnvSpec::point_mass_2d()
    }

    #[test]
    fn zero_action_is_fixed_point() {
        let s = env_step(&[0.0, 0.0], &[0.0, 0.0], &spec()).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn step_integrates_action() {
        let s = env_step(&[0.0, 0.0], &[1.0, 0.0], &spec()).unwrap();
        assert_eq!(s, vec![0.1, 0.0]);
    }

    #[test]
    fn step_clips_at_bound() {
        let s = env_step(&[4.95, 0.0], &[1.0, 0.0], &spec()).unwrap();
        assert_eq!(s, vec![5.0, 0.0]);
    }

    #[test]
    fn step_rejects_bad_dims() {
        assert!(env_step(&[0.0], &[0.0, 0.0], &spec()).is_err());
        assert!(env_step(&[0.0, 0.0], &[0.0], &spec()).is_err());
    }

    #[test]
    fn angle_reward_matches_convention() {
        let sp = EnvSpec { dt: 1.0, ..spec() };
        // displacement (0,1), 0 deg = +y
        let r = step_reward(&sp, &TaskSpec::angle(0.0), &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        let r = step_reward(&sp, &TaskSpec::angle(180.0), &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(r, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn jump_reward_arithmetic() {
        let sp = EnvSpec { dt: 1.0, ..spec() };
        let r = step_reward(&sp, &TaskSpec::jump(15.0, 0.0), &[0.0, 0.0], &[1.0, 0.5]).unwrap();
        assert_relative_eq!(r, 8.5, epsilon = 1e-12);
    }

    #[test]
    fn rollout_standstill_policy() {
        let sp = EnvSpec { horizon: 3, ..spec() };
        let hold = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 0.0];
        let buf = rollout(&hold, &sp, RewardSpec::None, 1, 0, 0).unwrap();
        assert_eq!(buf.len(), 3);
        for tr in &buf.transitions {
            assert_eq!(tr.s, sp.reset_state());
            assert_eq!(tr.r, 0.0);
        }
        assert!(buf.transitions.last().unwrap().done);
    }

    #[test]
    fn rollout_is_deterministic() {
        let sp = spec();
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let a = rollout(&noisy, &sp, RewardSpec::None, 2, 7, 0).unwrap();
        let b = rollout(&noisy, &sp, RewardSpec::None, 2, 7, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rollout_episode_bookkeeping() {
        let sp = EnvSpec { horizon: 5, ..spec() };
        let noisy = |_s: &[f64], rng: &mut ChaCha8Rng| {
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
        };
        let buf = rollout(&noisy, &sp, RewardSpec::None, 2, 3, 1).unwrap();
        assert_eq!(buf.episode_starts, vec![0, 5]);
        assert_eq!(buf.n_episodes(), 2);
        buf.validate(&sp).unwrap();
    }

    #[test]
    fn relabel_replaces_rewards_only() {
        let sp = spec();
        let drift = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 1.0];
        let buf = rollout(&drift, &sp, RewardSpec::None, 1, 0, 0).unwrap();
        let task = TaskSpec::angle(0.0);
        let relabeled = relabel_buffer(&buf, &task, &sp).unwrap();
        assert_eq!(relabeled.len(), buf.len());
        for (orig, new) in buf.transitions.iter().zip(&relabeled.transitions) {
            assert_eq!(orig.s, new.s);
            assert_eq!(orig.a, new.a);
            assert_eq!(orig.s2, new.s2);
            assert_eq!(orig.t, new.t);
            assert_eq!(orig.done, new.done);
            assert_eq!(orig.policy_id, new.policy_id);
        }
        // moving straight up at full speed: displacement rate 1 in +y
        assert_relative_eq!(relabeled.transitions[0].r, 1.0, epsilon = 1e-12);
        // idempotent: rewards are a pure function of (s, s')
        let twice = relabel_buffer(&relabeled, &task, &sp).unwrap();
        for (a, b) in relabeled.transitions.iter().zip(&twice.transitions) {
            assert_eq!(a.r, b.r);
        }
    }

    #[test]
    fn relabel_empty_buffer_is_noop() {
        let sp = spec();
        let buf = Buffer {
            env_id: sp.id.clone(),
            transitions: vec![],
            episode_starts: vec![],
            seed: 0,
            policy_ids: vec![],
            reward_desc: "none".into(),
        };
        let out = relabel_buffer(&buf, &TaskSpec::angle(0.0), &sp).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn average_return_geometric() {
        let sp = EnvSpec { horizon: 3, ..spec() };
        let hold = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 0.0];
        let mut buf = rollout(&hold, &sp, RewardSpec::None, 1, 0, 0).unwrap();
        for tr in &mut buf.transitions {
            tr.r = 1.0;
        }
        assert_relative_eq!(average_return(&buf, 0.5).unwrap(), 1.75, epsilon = 1e-12);
    }

    #[test]
    fn average_return_means_over_episodes() {
        let sp = EnvSpec { horizon: 1, ..spec() };
        let hold = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 0.0];
        let mut buf = rollout(&hold, &sp, RewardSpec::None, 2, 0, 0).unwrap();
        buf.transitions[0].r = 2.0;
        buf.transitions[1].r = 4.0;
        assert_relative_eq!(average_return(&buf, 0.99).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn average_return_gamma_zero_keeps_first_reward() {
        let sp = EnvSpec { horizon: 2, ..spec() };
        let hold = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 0.0];
        let mut buf = rollout(&hold, &sp, RewardSpec::None, 1, 0, 0).unwrap();
        buf.transitions[0].r = 5.0;
        buf.transitions[1].r = 9.0;
        assert_relative_eq!(average_return(&buf, 0.0).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn average_return_empty_buffer_errors() {
        let buf = Buffer {
            env_id: "pointmass2d".into(),
            transitions: vec![],
            episode_starts: vec![],
            seed: 0,
            policy_ids: vec![],
            reward_desc: "none".into(),
        };
        assert!(matches!(average_return(&buf, 0.9), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn zero_reward_buffer_has_zero_return() {
        let sp = spec();
        let hold = |_s: &[f64], _rng: &mut ChaCha8Rng| vec![0.0, 0.0];
        let buf = rollout(&hold, &sp, RewardSpec::None, 3, 1, 0).unwrap();
        assert_eq!(average_return(&buf, sp.gamma).unwrap(), 0.0);
    }
}
