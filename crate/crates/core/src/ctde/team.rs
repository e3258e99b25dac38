use super::mixer::{JointMixer, MixerKind};
use super::policy::{AgentPolicy, ObservationHistory};
use crate::diffcore::Tensor;
use crate::envs::JointAction;
use crate::{Error, Result};

/// A trained unit: one value network per agent plus the mixer they were
/// trained under. Policies act on observation histories alone; the mixer
/// needs the global state and is only used by centralized machinery.
#[derive(Debug, Clone)]
pub struct CtdeTeam {
    pub policies: Vec<AgentPolicy>,
    pub mixer: MixerKind,
    pub history_depth: usize,
}

impl CtdeTeam {
    pub fn n_agents(&self) -> usize {
        self.policies.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::config("team has no agents".to_string()));
        }
        if self.mixer.n_agents() != self.policies.len() {
            return Err(Error::config(format!(
                "mixer built for {} agents, team has {}",
                self.mixer.n_agents(),
                self.policies.len()
            )));
        }
        if self.history_depth == 0 {
            return Err(Error::config("history depth must be >= 1".to_string()));
        }
        let n_actions = self.policies[0].n_actions();
        if self.policies.iter().any(|p| p.n_actions() != n_actions) {
            return Err(Error::config(
                "all agents must share one action space".to_string(),
            ));
        }
        Ok(())
    }

    /// Fresh, empty observation windows sized for this team.
    pub fn new_histories(&self, obs_dim: usize) -> Result<Vec<ObservationHistory>> {
        (0..self.n_agents())
            .map(|_| ObservationHistory::new(self.history_depth, obs_dim))
            .collect()
    }

    /// Each agent's greedy action on its own encoded history.
    pub fn greedy_joint(&self, encoded: &[Tensor]) -> Result<JointAction> {
        if encoded.len() != self.n_agents() {
            return Err(Error::usage(format!(
                "got {} encoded histories for {} agents",
                encoded.len(),
                self.n_agents()
            )));
        }
        let mut actions = Vec::with_capacity(self.n_agents());
        for (policy, enc) in self.policies.iter().zip(encoded) {
            actions.push(policy.greedy(enc)?);
        }
        Ok(JointAction(actions))
    }

    /// Team value of a particular joint action: per-agent values for the
    /// chosen actions, combined by the mixer.
    pub fn joint_value(
        &self,
        state: &Tensor,
        encoded: &[Tensor],
        action: &JointAction,
    ) -> Result<f64> {
        if action.n_agents() != self.n_agents() {
            return Err(Error::usage(format!(
                "joint action has {} entries for {} agents",
                action.n_agents(),
                self.n_agents()
            )));
        }
        let mut values = Vec::with_capacity(self.n_agents());
        for ((policy, enc), &a) in self.policies.iter().zip(encoded).zip(action.actions()) {
            let qs = policy.q_values(enc)?;
            if a >= qs.len() {
                return Err(Error::usage(format!(
                    "action {a} out of range 0..{}",
                    qs.len()
                )));
            }
            values.push(qs.values()[a]);
        }
        self.mixer.mix(state, &values)
    }
}
