//! Grid value-iteration planner.
//!
//! Discretizes the planar state box into a node grid and a finite action
//! set, then sweeps the Bellman optimality operator with bilinear
//! interpolation of the value table at the continuous successor state.
//! Interpolation keeps the operator a sup-norm contraction, so the sweep
//! converges to a unique fixed point whose greedy policy serves as the
//! optimal-policy oracle for the point-mass tasks.

use crate::env::{env_step, step_reward, Actor, EnvSpec, TaskSpec};
use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Grid nodes per state dimension.
    pub resolution: usize,
    /// Finite action set searched at every node.
    pub actions: Vec<Vec<f64>>,
    /// Bellman residual required at convergence.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl PlannerConfig {
    /// 51x51 grid with the 8 extreme compass actions.
    pub fn default_for(spec: &EnvSpec) -> Self {
        let hi = spec.action_bounds[0][1];
        let mut actions = Vec::with_capacity(8);
        for dx in [-1.0, 0.0, 1.0] {
            for dy in [-1.0, 0.0, 1.0] {
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                actions.push(vec![dx * hi, dy * hi]);
            }
        }
        PlannerConfig { resolution: 51, actions, tolerance: 1e-6, max_sweeps: 50_000 }
    }
}

/// Converged value table and greedy policy on the grid.
#[derive(Debug, Clone)]
pub struct GridPlanner {
    pub cfg: PlannerConfig,
    /// Row-major `resolution x resolution` value table.
    pub values: Vec<f64>,
    /// Greedy action index per grid node.
    pub greedy: Vec<usize>,
    pub sweeps: usize,
    /// Residual measured by one extra sweep after convergence.
    pub residual: f64,
    lo: [f64; 2],
    step: [f64; 2],
}

/// Value iteration for a task reward until the sup-norm residual drops
/// below the configured tolerance.
pub fn grid_value_iteration(
    spec: &EnvSpec,
    task: &TaskSpec,
    cfg: &PlannerConfig,
) -> Result<GridPlanner> {
    value_iteration_with(spec, &|s, s2| step_reward(spec, task, s, s2), cfg)
}

/// VI core over an arbitrary `(s, s')` reward.
pub(crate) fn value_iteration_with(
    spec: &EnvSpec,
    reward: &dyn Fn(&[f64], &[f64]) -> Result<f64>,
    cfg: &PlannerConfig,
) -> Result<GridPlanner> {
    if spec.state_dim != 2 {
        return Err(Error::InvalidArgument(format!(
            "grid planner handles planar states, got dim {}",
            spec.state_dim
        )));
    }
    if cfg.resolution < 2 || cfg.actions.is_empty() {
        return Err(Error::InvalidArgument("planner needs a grid and actions".into()));
    }
    let res = cfg.resolution;
    let lo = [spec.state_bounds[0][0], spec.state_bounds[1][0]];
    let step = [
        (spec.state_bounds[0][1] - lo[0]) / (res - 1) as f64,
        (spec.state_bounds[1][1] - lo[1]) / (res - 1) as f64,
    ];
    let mut planner = GridPlanner {
        cfg: cfg.clone(),
        values: vec![0.0; res * res],
        greedy: vec![0; res * res],
        sweeps: 0,
        residual: f64::INFINITY,
        lo,
        step,
    };

    // successor states and immediate rewards never change between sweeps
    let n_actions = cfg.actions.len();
    let mut next_states = vec![[0.0_f64; 2]; res * res * n_actions];
    let mut rewards = vec![0.0_f64; res * res * n_actions];
    for iy in 0..res {
        for ix in 0..res {
            let s = [lo[0] + ix as f64 * step[0], lo[1] + iy as f64 * step[1]];
            for (ai, a) in cfg.actions.iter().enumerate() {
                let s2 = env_step(&s, a, spec)?;
                let k = (iy * res + ix) * n_actions + ai;
                next_states[k] = [s2[0], s2[1]];
                rewards[k] = reward(&s, &s2)?;
            }
        }
    }

    let mut new_values = planner.values.clone();
    for sweep in 0..cfg.max_sweeps {
        let mut delta = 0.0_f64;
        for cell in 0..res * res {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for ai in 0..n_actions {
                let k = cell * n_actions + ai;
                let q = rewards[k] + spec.gamma * planner.interp(&next_states[k]);
                if q > best {
                    best = q;
                    best_a = ai;
                }
            }
            delta = delta.max((best - planner.values[cell]).abs());
            new_values[cell] = best;
            planner.greedy[cell] = best_a;
        }
        std::mem::swap(&mut planner.values, &mut new_values);
        planner.sweeps = sweep + 1;
        if delta < cfg.tolerance {
            break;
        }
    }

    // one verification sweep: the residual is the delta of applying the
    // Bellman operator once more
    let mut residual = 0.0_f64;
    for cell in 0..res * res {
        let mut best = f64::NEG_INFINITY;
        for ai in 0..n_actions {
            let k = cell * n_actions + ai;
            let q = rewards[k] + spec.gamma * planner.interp(&next_states[k]);
            best = best.max(q);
        }
        residual = residual.max((best - planner.values[cell]).abs());
    }
    planner.residual = residual;
    if residual >= cfg.tolerance {
        return Err(Error::InvalidArgument(format!(
            "value iteration did not converge: residual {residual} after {} sweeps",
            planner.sweeps
        )));
    }
    Ok(planner)
}

impl GridPlanner {
    /// Bilinear interpolation of the value table at a continuous state.
    pub fn interp(&self, s: &[f64]) -> f64 {
        let res = self.cfg.resolution;
        let fx = ((s[0] - self.lo[0]) / self.step[0]).clamp(0.0, (res - 1) as f64);
        let fy = ((s[1] - self.lo[1]) / self.step[1]).clamp(0.0, (res - 1) as f64);
        let ix = (fx as usize).min(res - 2);
        let iy = (fy as usize).min(res - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = self.values[iy * res + ix];
        let v10 = self.values[iy * res + ix + 1];
        let v01 = self.values[(iy + 1) * res + ix];
        let v11 = self.values[(iy + 1) * res + ix + 1];
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }

    /// Greedy action at a continuous state (lowest index wins ties).
    pub fn greedy_action(&self, s: &[f64], spec: &EnvSpec, task: &TaskSpec) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for (ai, a) in self.cfg.actions.iter().enumerate() {
            let s2 = env_step(s, a, spec).expect("planner state dims");
            let q = step_reward(spec, task, s, &s2).expect("planner task dims")
                + spec.gamma * self.interp(&s2);
            if q > best {
                best = q;
                best_a = ai;
            }
        }
        self.cfg.actions[best_a].clone()
    }

    /// Re-extracts the greedy table; `true` when nothing changes, i.e. the
    /// policy is a fixed point of a further improvement sweep.
    pub fn improvement_stable(&self, spec: &EnvSpec, task: &TaskSpec) -> bool {
        let res = self.cfg.resolution;
        for iy in 0..res {
            for ix in 0..res {
                let s = [
                    self.lo[0] + ix as f64 * self.step[0],
                    self.lo[1] + iy as f64 * self.step[1],
                ];
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0;
                for (ai, a) in self.cfg.actions.iter().enumerate() {
                    let s2 = env_step(&s, a, spec).expect("dims");
                    let q = step_reward(spec, task, &s, &s2).expect("dims")
                        + spec.gamma * self.interp(&s2);
                    if q > best {
                        best = q;
                        best_a = ai;
                    }
                }
                if best_a != self.greedy[iy * res + ix] {
                    return false;
                }
            }
        }
        true
    }

    /// Deterministic rollout adapter for the greedy policy.
    pub fn policy<'a>(&'a self, spec: &'a EnvSpec, task: &'a TaskSpec) -> OraclePolicy<'a> {
        OraclePolicy { planner: self, spec, task }
    }
}

/// Greedy planner policy acting on continuous states.
pub struct OraclePolicy<'a> {
    planner: &'a GridPlanner,
    spec: &'a EnvSpec,
    task: &'a TaskSpec,
}

impl Actor for OraclePolicy<'_> {
    fn act(&self, s: &[f64], _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.planner.greedy_action(s, self.spec, self.task)
    }
}
