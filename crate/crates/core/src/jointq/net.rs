use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    Checkpoint, GradBundle, HiddenActivation, MlpSpec, Network, OutputActivation, Tensor,
};
use crate::envs::{EnvSpec, JointAction};
use crate::{Error, Result};

/// Scalar value model over (global state, joint action) pairs. The joint
/// action enters as concatenated per-agent one-hot blocks, so any
/// discrete joint action has a fixed-length encoding.
#[derive(Debug, Clone)]
pub struct JointQNet {
    net: Network,
    state_dim: usize,
    n_agents: usize,
    actions_per_agent: usize,
}

impl JointQNet {
    pub fn init<R: Rng + ?Sized>(
        env_spec: &EnvSpec,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let input = env_spec.state_dim + env_spec.n_agents * env_spec.actions_per_agent;
        let mut layer_sizes = vec![input];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let spec = MlpSpec::new(
            layer_sizes,
            HiddenActivation::Relu,
            OutputActivation::Identity,
        )?;
        Ok(Self {
            net: Network::init(spec, rng)?,
            state_dim: env_spec.state_dim,
            n_agents: env_spec.n_agents,
            actions_per_agent: env_spec.actions_per_agent,
        })
    }

    pub fn from_parts(
        net: Network,
        state_dim: usize,
        n_agents: usize,
        actions_per_agent: usize,
    ) -> Result<Self> {
        if n_agents == 0 || actions_per_agent == 0 || state_dim == 0 {
            return Err(Error::config(
                "joint value model needs state_dim, n_agents and actions_per_agent >= 1"
                    .to_string(),
            ));
        }
        let want_in = state_dim + n_agents * actions_per_agent;
        if net.input_dim() != want_in {
            return Err(Error::config(format!(
                "network input dim {} does not match encoding size {want_in}",
                net.input_dim()
            )));
        }
        if net.output_dim() != 1 {
            return Err(Error::config(format!(
                "joint value network must output one value, got {}",
                net.output_dim()
            )));
        }
        Ok(Self {
            net,
            state_dim,
            n_agents,
            actions_per_agent,
        })
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn actions_per_agent(&self) -> usize {
        self.actions_per_agent
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Concatenates the state with one-hot blocks for each agent's action.
    pub fn encode(&self, state: &Tensor, action: &JointAction) -> Result<Tensor> {
        if state.shape() != [self.state_dim] {
            return Err(Error::usage(format!(
                "state shape {:?} does not match state_dim {}",
                state.shape(),
                self.state_dim
            )));
        }
        if action.n_agents() != self.n_agents {
            return Err(Error::usage(format!(
                "joint action has {} entries for {} agents",
                action.n_agents(),
                self.n_agents
            )));
        }
        let mut v = Vec::with_capacity(self.net.input_dim());
        v.extend_from_slice(state.values());
        for (agent, &a) in action.actions().iter().enumerate() {
            if a >= self.actions_per_agent {
                return Err(Error::usage(format!(
                    "agent {agent} action {a} out of range 0..{}",
                    self.actions_per_agent
                )));
            }
            let mut block = vec![0.0; self.actions_per_agent];
            block[a] = 1.0;
            v.extend_from_slice(&block);
        }
        Ok(Tensor::vector(v))
    }

    pub fn predict(&self, state: &Tensor, action: &JointAction) -> Result<f64> {
        let input = self.encode(state, action)?;
        Ok(self.net.forward(&input)?.values()[0])
    }

    pub(super) fn backward_on(&self, input: &Tensor, upstream: f64) -> Result<GradBundle> {
        self.net.backward(input, &Tensor::vector(vec![upstream]))
    }

    pub(super) fn sgd_step(&mut self, grads: &GradBundle, lr: f64) -> Result<()> {
        self.net.sgd_step(grads, lr)
    }
}

/// On-disk form of a joint value model plus enough context to rebuild and
/// sanity-check it. `source` names the behavior whose rollouts the model
/// was fitted to (for example "uniform" or "qmix:3f92..."), so downstream
/// cross-pairing experiments can tell transfer from self-evaluation.
#[derive(Debug, Serialize, Deserialize)]
pub struct JointQFile {
    pub env_name: String,
    pub fingerprint: String,
    pub source: String,
    pub state_dim: usize,
    pub n_agents: usize,
    pub actions_per_agent: usize,
    pub net: Checkpoint,
}

pub fn save_joint_q(
    path: &Path,
    qnet: &JointQNet,
    env_name: &str,
    fingerprint: &str,
    source: &str,
) -> Result<()> {
    let file = JointQFile {
        env_name: env_name.to_string(),
        fingerprint: fingerprint.to_string(),
        source: source.to_string(),
        state_dim: qnet.state_dim,
        n_agents: qnet.n_agents,
        actions_per_agent: qnet.actions_per_agent,
        net: Checkpoint::from_network(&qnet.net),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?).map_err(|e| Error::io(path, e))
}

pub fn load_joint_q(path: &Path) -> Result<(JointQNet, JointQFile)> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: JointQFile = serde_json::from_str(&raw)
        .map_err(|e| Error::decode(path.display().to_string(), format!("{e}")))?;
    let net = file.net.clone().into_network()?;
    let qnet = JointQNet::from_parts(net, file.state_dim, file.n_agents, file.actions_per_agent)?;
    Ok((qnet, file))
}
