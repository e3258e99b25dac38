use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_joint_action, Env, EnvSpec, JointAction, StepOutcome};
use crate::diffcore::Tensor;
use crate::{Error, Result};

/// Single-shot cooperative matrix game: every agent picks one action, the
/// team receives the payoff entry for that joint action, and the episode
/// ends. Observations are constant one-hot agent identifiers, so policies
/// can only specialize by agent index.
#[derive(Debug, Clone)]
pub struct CoopMatrixGame {
    spec: EnvSpec,
    /// Payoff tensor with one axis per agent, each of size
    /// `actions_per_agent`, in row-major order.
    payoff: Tensor,
    max_payoff: f64,
    finished: bool,
    started: bool,
}

impl CoopMatrixGame {
    pub fn new(n_agents: usize, actions_per_agent: usize, payoff: Tensor) -> Result<Self> {
        if n_agents == 0 || actions_per_agent == 0 {
            return Err(Error::config(
                "matrix game needs at least one agent and one action".to_string(),
            ));
        }
        let expected_shape: Vec<usize> = vec![actions_per_agent; n_agents];
        if payoff.shape() != expected_shape.as_slice() {
            return Err(Error::config(format!(
                "payoff shape {:?} does not match {} agents x {} actions",
                payoff.shape(),
                n_agents,
                actions_per_agent
            )));
        }
        payoff.ensure_finite("payoff table")?;
        let max_payoff = payoff
            .values()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let spec = EnvSpec {
            n_agents,
            actions_per_agent,
            obs_dim: n_agents,
            state_dim: n_agents,
            obs_range: (0.0, 1.0),
            gamma: 1.0,
            max_steps: 1,
        };
        Ok(Self {
            spec,
            payoff,
            max_payoff,
            finished: false,
            started: false,
        })
    }

    /// Game with payoffs drawn uniformly from `[0, 1)`.
    pub fn random(n_agents: usize, actions_per_agent: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = actions_per_agent.pow(n_agents as u32);
        let values: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let payoff = Tensor::new(vec![actions_per_agent; n_agents], values)?;
        Self::new(n_agents, actions_per_agent, payoff)
    }

    pub fn payoff(&self) -> &Tensor {
        &self.payoff
    }

    pub fn payoff_of(&self, action: &JointAction) -> Result<f64> {
        check_joint_action(&self.spec, action)?;
        self.payoff.get(action.actions())
    }

    pub fn max_payoff(&self) -> f64 {
        self.max_payoff
    }

    fn observations(&self) -> Vec<Tensor> {
        (0..self.spec.n_agents)
            .map(|i| {
                let mut v = vec![0.0; self.spec.n_agents];
                v[i] = 1.0;
                Tensor::vector(v)
            })
            .collect()
    }
}

impl Env for CoopMatrixGame {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn name(&self) -> &'static str {
        "coop_matrix"
    }

    fn reset(&mut self, _seed: u64) -> (Tensor, Vec<Tensor>) {
        self.finished = false;
        self.started = true;
        (Tensor::zeros(vec![self.spec.state_dim]), self.observations())
    }

    fn step(&mut self, action: &JointAction) -> Result<StepOutcome> {
        if !self.started || self.finished {
            return Err(Error::usage(
                "step called on a finished or unstarted episode".to_string(),
            ));
        }
        let reward = self.payoff_of(action)?;
        self.finished = true;
        Ok(StepOutcome {
            next_state: Tensor::zeros(vec![self.spec.state_dim]),
            next_obs: self.observations(),
            reward,
            done: true,
            win: reward >= self.max_payoff - 1e-9,
        })
    }
}
