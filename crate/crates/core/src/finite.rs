//! Exact evaluation on small finite MDPs.
//!
//! Everything here is closed-form linear algebra: values solve
//! `(I - gamma P_pi) V = r_pi`, occupancies solve the transposed system,
//! and returns are `p0 . V`. The telescoping check evaluates both sides of
//! the identity
//!
//! ```text
//! eta_B(pi) - eta_A(pi) = c * gamma * E_{(s,a) ~ rho_B^pi} [ G(s,a) ],
//! G(s,a) = E_{s' ~ B}[V_A(s')] - E_{s' ~ A}[V_A(s')],  c = 1/(1-gamma)
//! ```
//!
//! for two MDPs that share a reward function but differ in dynamics, and
//! returns the absolute residual, which exact arithmetic should keep near
//! machine precision.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Tabular MDP with dense transitions.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[s][a][s2]`, each row a probability vector.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    /// Initial state distribution.
    pub p0: Vec<f64>,
    pub gamma: f64,
}

/// Stochastic policy: `pi[s][a]`.
pub type TabularPolicy = Vec<Vec<f64>>;

impl FiniteMdp {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_states > 100 {
            return Err(Error::InvalidArgument(format!(
                "finite MDP needs 1..=100 states, got {}",
                self.n_states
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument("gamma must be in [0,1)".into()));
        }
        let rows_ok = self
            .transition
            .iter()
            .flatten()
            .chain(std::iter::once(&self.p0))
            .all(|row| {
                row.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
            });
        if !rows_ok {
            return Err(Error::InvalidArgument("transition rows must be distributions".into()));
        }
        Ok(())
    }

    /// Random dense MDP with Dirichlet-like transition rows.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let row = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut v: Vec<f64> = (0..n).map(|_| -(rng.gen_range(1e-12..1.0_f64)).ln()).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        };
        let transition = (0..n_states)
            .map(|_| (0..n_actions).map(|_| row(n_states, &mut rng)).collect())
            .collect();
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let p0 = row(n_states, &mut rng);
        FiniteMdp { n_states, n_actions, transition, reward, p0, gamma }
    }

    /// Random stochastic policy for this MDP's shape.
    pub fn random_policy(&self, seed: u64) -> TabularPolicy {
        let mut rng = rng_from_seed(seed);
        (0..self.n_states)
            .map(|_| {
                let mut v: Vec<f64> =
                    (0..self.n_actions).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            })
            .collect()
    }

    /// State-to-state transition matrix under a policy.
    fn policy_matrix(&self, pi: &TabularPolicy) -> DMatrix<f64> {
        let n = self.n_states;
        DMatrix::from_fn(n, n, |s, s2| {
            (0..self.n_actions).map(|a| pi[s][a] * self.transition[s][a][s2]).sum()
        })
    }

    fn policy_reward(&self, pi: &TabularPolicy) -> DVector<f64> {
        DVector::from_fn(self.n_states, |s, _| {
            (0..self.n_actions).map(|a| pi[s][a] * self.reward[s][a]).sum()
        })
    }

    /// Exact value function: `(I - gamma P_pi) V = r_pi`.
    pub fn value(&self, pi: &TabularPolicy) -> Result<DVector<f64>> {
        let n = self.n_states;
        let system = DMatrix::identity(n, n) - self.gamma * self.policy_matrix(pi);
        system
            .lu()
            .solve(&self.policy_reward(pi))
            .ok_or_else(|| Error::InvalidArgument("singular value system".into()))
    }

    /// Exact return `eta = p0 . V`.
    pub fn expected_return(&self, pi: &TabularPolicy) -> Result<f64> {
        let v = self.value(pi)?;
        Ok(DVector::from_vec(self.p0.clone()).dot(&v))
    }

    /// Normalized discounted state occupancy:
    /// `d = (1-gamma) (I - gamma P_pi^T)^{-1} p0`.
    pub fn state_occupancy(&self, pi: &TabularPolicy) -> Result<DVector<f64>> {
        let n = self.n_states;
        let system = DMatrix::identity(n, n) - self.gamma * self.policy_matrix(pi).transpose();
        let d = system
            .lu()
            .solve(&DVector::from_vec(self.p0.clone()))
            .ok_or_else(|| Error::InvalidArgument("singular occupancy system".into()))?;
        Ok((1.0 - self.gamma) * d)
    }
}

/// |LHS - RHS| of the telescoping identity for dynamics pair `(m, m_hat)`
/// sharing `m`'s reward, evaluated exactly.
pub fn verify_telescoping(m: &FiniteMdp, m_hat: &FiniteMdp, pi: &TabularPolicy) -> Result<f64> {
    m.validate()?;
    m_hat.validate()?;
    if m.n_states != m_hat.n_states || m.n_actions != m_hat.n_actions {
        return Err(Error::DimensionMismatch { expected: m.n_states, got: m_hat.n_states });
    }
    // the identity is about dynamics: reward, gamma and p0 must match
    let mut m_hat = m_hat.clone();
    m_hat.reward = m.reward.clone();
    m_hat.gamma = m.gamma;
    m_hat.p0 = m.p0.clone();

    let gamma = m.gamma;
    let c = 1.0 / (1.0 - gamma);

    let lhs = m_hat.expected_return(pi)? - m.expected_return(pi)?;

    let v_m = m.value(pi)?;
    let occ_hat = m_hat.state_occupancy(pi)?;
    let mut rhs = 0.0;
    for s in 0..m.n_states {
        for a in 0..m.n_actions {
            // rho(s, a) = d(s) * pi(a|s)
            let w = occ_hat[s] * pi[s][a];
            let gap: f64 = (0..m.n_states)
                .map(|s2| (m_hat.transition[s][a][s2] - m.transition[s][a][s2]) * v_m[s2])
                .sum();
            rhs += w * gap;
        }
    }
    rhs *= c * gamma;

    Ok((lhs - rhs).abs())
}
