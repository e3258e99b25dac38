//! Cooperative multi-agent environments with shared team reward.
//!
//! Both environments expose the same surface: a global state vector used by
//! centralized components, one observation vector per agent used by the
//! decentralized policies, and discrete per-agent actions combined into a
//! joint action. Episodes are deterministic given the reset seed and the
//! action sequence, which is what makes trajectory-level regression checks
//! possible.

mod grid;
mod matrix;

pub use grid::GridCapture;
pub use matrix::CoopMatrixGame;

use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::{Error, Result};

/// Static description of an environment's shapes and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub n_agents: usize,
    pub actions_per_agent: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    /// Inclusive componentwise bounds every observation lives in.
    pub obs_range: (f64, f64),
    pub gamma: f64,
    pub max_steps: usize,
}

/// One discrete action per agent, indexed by agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn n_agents(&self) -> usize {
        self.0.len()
    }
}

/// Everything a single environment transition produces.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_state: Tensor,
    pub next_obs: Vec<Tensor>,
    pub reward: f64,
    pub done: bool,
    pub win: bool,
}

pub trait Env {
    fn spec(&self) -> &EnvSpec;

    /// Short stable identifier used to label results and checkpoints.
    fn name(&self) -> &'static str;

    /// Starts a fresh episode; returns the initial state and observations.
    fn reset(&mut self, seed: u64) -> (Tensor, Vec<Tensor>);

    /// Advances one step. Calling this on a finished episode is an error.
    fn step(&mut self, action: &JointAction) -> Result<StepOutcome>;

    /// Which agents can still act. Defaults to everyone.
    fn alive(&self) -> Vec<bool> {
        vec![true; self.spec().n_agents]
    }
}

/// Validates a joint action against an environment spec.
pub fn check_joint_action(spec: &EnvSpec, action: &JointAction) -> Result<()> {
    if action.n_agents() != spec.n_agents {
        return Err(Error::usage(format!(
            "joint action has {} entries, environment has {} agents",
            action.n_agents(),
            spec.n_agents
        )));
    }
    for (agent, &a) in action.actions().iter().enumerate() {
        if a >= spec.actions_per_agent {
            return Err(Error::usage(format!(
                "agent {agent} action {a} out of range 0..{}",
                spec.actions_per_agent
            )));
        }
    }
    Ok(())
}

/// All `A^N` joint actions in lexicographic order, refusing to materialize
/// more than `cap` of them.
pub fn enumerate_joint_actions(spec: &EnvSpec, cap: u128) -> Result<Vec<JointAction>> {
    let total = (spec.actions_per_agent as u128)
        .checked_pow(spec.n_agents as u32)
        .ok_or(Error::EnumerationCap {
            joint_actions: u128::MAX,
            cap,
        })?;
    if total > cap {
        return Err(Error::EnumerationCap {
            joint_actions: total,
            cap,
        });
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut current = vec![0usize; spec.n_agents];
    loop {
        out.push(JointAction(current.clone()));
        // Odometer increment, last agent fastest.
        let mut pos = spec.n_agents;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < spec.actions_per_agent {
                break;
            }
            current[pos] = 0;
        }
    }
}
