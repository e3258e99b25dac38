use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    backward, forward, GradBundle, HiddenActivation, MlpSpec, Network, OutputActivation, Tensor,
};
use crate::{Error, Result};

/// Gradients flowing out of a mixer for one (state, agent-values) pair:
/// the derivative with respect to each agent value, plus parameter
/// gradients for any internal networks, keyed by network name.
#[derive(Debug, Clone)]
pub struct MixGrad {
    pub dq: Vec<f64>,
    pub nets: BTreeMap<String, GradBundle>,
}

impl MixGrad {
    pub fn accumulate(&mut self, other: &MixGrad) {
        for (a, b) in self.dq.iter_mut().zip(&other.dq) {
            *a += b;
        }
        for (name, bundle) in &other.nets {
            self.nets
                .get_mut(name)
                .expect("accumulating mixer grads of the same shape")
                .accumulate(bundle);
        }
    }
}

/// Combines per-agent action values and the global state into one team
/// value. Implementations must be monotone in every agent value so that
/// each agent maximizing its own value also maximizes the team value.
pub trait JointMixer {
    fn n_agents(&self) -> usize;

    fn mix(&self, state: &Tensor, agent_values: &[f64]) -> Result<f64>;

    /// Derivatives of `upstream * mix(...)` with respect to the agent
    /// values and any internal parameters.
    fn mix_backward(&self, state: &Tensor, agent_values: &[f64], upstream: f64)
        -> Result<MixGrad>;

    fn sgd_step(&mut self, grads: &MixGrad, lr: f64) -> Result<()>;
}

fn check_agent_values(n_agents: usize, agent_values: &[f64]) -> Result<()> {
    if agent_values.len() != n_agents {
        return Err(Error::usage(format!(
            "mixer built for {n_agents} agents got {} values",
            agent_values.len()
        )));
    }
    Ok(())
}

/// Additive mixer: the team value is exactly the sum of agent values and
/// the state is ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdnMixer {
    n_agents: usize,
}

impl VdnMixer {
    pub fn new(n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::config("mixer needs at least one agent".to_string()));
        }
        Ok(Self { n_agents })
    }
}

impl JointMixer for VdnMixer {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn mix(&self, _state: &Tensor, agent_values: &[f64]) -> Result<f64> {
        check_agent_values(self.n_agents, agent_values)?;
        Ok(agent_values.iter().sum())
    }

    fn mix_backward(
        &self,
        _state: &Tensor,
        agent_values: &[f64],
        upstream: f64,
    ) -> Result<MixGrad> {
        check_agent_values(self.n_agents, agent_values)?;
        Ok(MixGrad {
            dq: vec![upstream; self.n_agents],
            nets: BTreeMap::new(),
        })
    }

    fn sgd_step(&mut self, _grads: &MixGrad, _lr: f64) -> Result<()> {
        Ok(())
    }
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp() - 1.0
    }
}

fn elu_prime(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

const HYPER_W1: &str = "hyper_w1";
const HYPER_B1: &str = "hyper_b1";
const HYPER_W2: &str = "hyper_w2";
const HYPER_B2: &str = "hyper_b2";

/// State-conditioned monotone mixer.
///
/// Four small hypernetworks read the global state and emit the weights of a
/// one-hidden-layer mixing network. The mixing weights pass through an
/// absolute value, and the hidden activation (ELU) has a nonnegative
/// derivative, so the team value is nondecreasing in every agent value
/// regardless of what the hypernetworks produce.
#[derive(Debug, Clone)]
pub struct QmixMixer {
    n_agents: usize,
    embed: usize,
    nets: BTreeMap<String, Network>,
}

struct QmixForward {
    w1: Vec<f64>, // raw hypernet output, embed * n_agents
    w2: Vec<f64>,
    z: Vec<f64>, // pre-activation hidden values
    value: f64,
}

impl QmixMixer {
    pub fn init<R: Rng + ?Sized>(
        n_agents: usize,
        state_dim: usize,
        embed: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_agents == 0 || state_dim == 0 || embed == 0 {
            return Err(Error::config(
                "mixer needs n_agents, state_dim and embed all >= 1".to_string(),
            ));
        }
        let linear = |out: usize, rng: &mut R| -> Result<Network> {
            let spec = MlpSpec::new(
                vec![state_dim, out],
                HiddenActivation::Relu,
                OutputActivation::Identity,
            )?;
            Network::init(spec, rng)
        };
        let mut nets = BTreeMap::new();
        nets.insert(HYPER_W1.to_string(), linear(embed * n_agents, rng)?);
        nets.insert(HYPER_B1.to_string(), linear(embed, rng)?);
        nets.insert(HYPER_W2.to_string(), linear(embed, rng)?);
        // The scalar offset gets one hidden layer so the mixer can express
        // state values that are not linear in the state.
        let b2_spec = MlpSpec::new(
            vec![state_dim, embed, 1],
            HiddenActivation::Relu,
            OutputActivation::Identity,
        )?;
        nets.insert(HYPER_B2.to_string(), Network::init(b2_spec, rng)?);
        Ok(Self {
            n_agents,
            embed,
            nets,
        })
    }

    pub fn from_parts(n_agents: usize, embed: usize, nets: BTreeMap<String, Network>) -> Result<Self> {
        let expected = [HYPER_W1, HYPER_B1, HYPER_W2, HYPER_B2];
        for name in expected {
            if !nets.contains_key(name) {
                return Err(Error::config(format!("mixer is missing network `{name}`")));
            }
        }
        if nets.len() != expected.len() {
            return Err(Error::config(format!(
                "mixer expects {} networks, got {}",
                expected.len(),
                nets.len()
            )));
        }
        let mixer = Self {
            n_agents,
            embed,
            nets,
        };
        mixer.check_shapes()?;
        Ok(mixer)
    }

    fn check_shapes(&self) -> Result<()> {
        let expect = |name: &str, out: usize| -> Result<()> {
            let net = &self.nets[name];
            if net.output_dim() != out {
                return Err(Error::config(format!(
                    "mixer network `{name}` outputs {} values, expected {out}",
                    net.output_dim()
                )));
            }
            Ok(())
        };
        expect(HYPER_W1, self.embed * self.n_agents)?;
        expect(HYPER_B1, self.embed)?;
        expect(HYPER_W2, self.embed)?;
        expect(HYPER_B2, 1)?;
        let state_dim = self.nets[HYPER_W1].input_dim();
        for (name, net) in &self.nets {
            if net.input_dim() != state_dim {
                return Err(Error::config(format!(
                    "mixer network `{name}` expects input dim {}, others use {state_dim}",
                    net.input_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn embed(&self) -> usize {
        self.embed
    }

    pub fn state_dim(&self) -> usize {
        self.nets[HYPER_W1].input_dim()
    }

    pub fn nets(&self) -> &BTreeMap<String, Network> {
        &self.nets
    }

    fn run_forward(&self, state: &Tensor, agent_values: &[f64]) -> Result<QmixForward> {
        check_agent_values(self.n_agents, agent_values)?;
        let w1 = forward(&self.nets[HYPER_W1].spec, &self.nets[HYPER_W1].params, state)?
            .values()
            .to_vec();
        let b1 = forward(&self.nets[HYPER_B1].spec, &self.nets[HYPER_B1].params, state)?
            .values()
            .to_vec();
        let w2 = forward(&self.nets[HYPER_W2].spec, &self.nets[HYPER_W2].params, state)?
            .values()
            .to_vec();
        let b2 = forward(&self.nets[HYPER_B2].spec, &self.nets[HYPER_B2].params, state)?
            .values()[0];
        let mut z = vec![0.0; self.embed];
        for (k, zk) in z.iter_mut().enumerate() {
            let mut acc = b1[k];
            for (i, q) in agent_values.iter().enumerate() {
                acc += w1[k * self.n_agents + i].abs() * q;
            }
            *zk = acc;
        }
        let mut value = b2;
        for (k, zk) in z.iter().enumerate() {
            value += w2[k].abs() * elu(*zk);
        }
        Ok(QmixForward { w1, w2, z, value })
    }
}

impl JointMixer for QmixMixer {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn mix(&self, state: &Tensor, agent_values: &[f64]) -> Result<f64> {
        Ok(self.run_forward(state, agent_values)?.value)
    }

    fn mix_backward(
        &self,
        state: &Tensor,
        agent_values: &[f64],
        upstream: f64,
    ) -> Result<MixGrad> {
        let f = self.run_forward(state, agent_values)?;

        // Hidden-unit gradients: d(value)/dz[k] = |w2[k]| * elu'(z[k]).
        let gz: Vec<f64> = (0..self.embed)
            .map(|k| upstream * f.w2[k].abs() * elu_prime(f.z[k]))
            .collect();

        let mut dq = vec![0.0; self.n_agents];
        let mut d_w1 = vec![0.0; self.embed * self.n_agents];
        for k in 0..self.embed {
            for (i, q) in agent_values.iter().enumerate() {
                let raw = f.w1[k * self.n_agents + i];
                dq[i] += gz[k] * raw.abs();
                d_w1[k * self.n_agents + i] = gz[k] * q * raw.signum_or_zero();
            }
        }
        let d_b1 = gz.clone();
        let d_w2: Vec<f64> = (0..self.embed)
            .map(|k| upstream * elu(f.z[k]) * f.w2[k].signum_or_zero())
            .collect();
        let d_b2 = vec![upstream];

        let mut nets = BTreeMap::new();
        for (name, grad) in [
            (HYPER_W1, d_w1),
            (HYPER_B1, d_b1),
            (HYPER_W2, d_w2),
            (HYPER_B2, d_b2),
        ] {
            let net = &self.nets[name];
            let bundle = backward(&net.spec, &net.params, state, &Tensor::vector(grad))?;
            nets.insert(name.to_string(), bundle);
        }
        Ok(MixGrad { dq, nets })
    }

    fn sgd_step(&mut self, grads: &MixGrad, lr: f64) -> Result<()> {
        for (name, bundle) in &grads.nets {
            let net = self
                .nets
                .get_mut(name)
                .ok_or_else(|| Error::config(format!("gradients for unknown network `{name}`")))?;
            net.sgd_step(bundle, lr)?;
        }
        Ok(())
    }
}

trait SignumOrZero {
    /// Like `signum` but 0 at 0, the subgradient choice for `|x|`.
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self == 0.0 {
            0.0
        } else {
            self.signum()
        }
    }
}

/// The mixer variants a team can be trained with.
#[derive(Debug, Clone)]
pub enum MixerKind {
    Vdn(VdnMixer),
    Qmix(QmixMixer),
}

impl MixerKind {
    pub fn algo_name(&self) -> &'static str {
        match self {
            MixerKind::Vdn(_) => "vdn",
            MixerKind::Qmix(_) => "qmix",
        }
    }
}

impl JointMixer for MixerKind {
    fn n_agents(&self) -> usize {
        match self {
            MixerKind::Vdn(m) => m.n_agents(),
            MixerKind::Qmix(m) => m.n_agents(),
        }
    }

    fn mix(&self, state: &Tensor, agent_values: &[f64]) -> Result<f64> {
        match self {
            MixerKind::Vdn(m) => m.mix(state, agent_values),
            MixerKind::Qmix(m) => m.mix(state, agent_values),
        }
    }

    fn mix_backward(
        &self,
        state: &Tensor,
        agent_values: &[f64],
        upstream: f64,
    ) -> Result<MixGrad> {
        match self {
            MixerKind::Vdn(m) => m.mix_backward(state, agent_values, upstream),
            MixerKind::Qmix(m) => m.mix_backward(state, agent_values, upstream),
        }
    }

    fn sgd_step(&mut self, grads: &MixGrad, lr: f64) -> Result<()> {
        match self {
            MixerKind::Vdn(m) => m.sgd_step(grads, lr),
            MixerKind::Qmix(m) => m.sgd_step(grads, lr),
        }
    }
}
