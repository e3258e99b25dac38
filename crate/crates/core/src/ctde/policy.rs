use std::collections::VecDeque;

use rand::Rng;

use crate::diffcore::{Network, Tensor};
use crate::{Error, Result};

/// Index of the largest value, lowest index winning ties.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sliding window over an agent's recent observations.
///
/// The encoded form is the last `depth` observation vectors concatenated
/// oldest-first, zero-filled until the window is full, so policies see a
/// fixed-size input from the first step of an episode.
#[derive(Debug, Clone)]
pub struct ObservationHistory {
    depth: usize,
    obs_dim: usize,
    frames: VecDeque<Tensor>,
}

impl ObservationHistory {
    pub fn new(depth: usize, obs_dim: usize) -> Result<Self> {
        if depth == 0 || obs_dim == 0 {
            return Err(Error::config(
                "observation history needs depth >= 1 and obs_dim >= 1".to_string(),
            ));
        }
        Ok(Self {
            depth,
            obs_dim,
            frames: VecDeque::with_capacity(depth),
        })
    }

    pub fn reset(&mut self) {
        self.frames.clear();
    }

    pub fn push(&mut self, obs: Tensor) -> Result<()> {
        if obs.shape() != [self.obs_dim] {
            return Err(Error::usage(format!(
                "observation shape {:?} does not match history obs_dim {}",
                obs.shape(),
                self.obs_dim
            )));
        }
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(obs);
        Ok(())
    }

    /// Swaps out the most recent frame; how a perturbed observation enters
    /// an agent's perception without touching the true environment.
    pub fn replace_newest(&mut self, obs: Tensor) -> Result<()> {
        if obs.shape() != [self.obs_dim] {
            return Err(Error::usage(format!(
                "observation shape {:?} does not match history obs_dim {}",
                obs.shape(),
                self.obs_dim
            )));
        }
        match self.frames.back_mut() {
            Some(slot) => {
                *slot = obs;
                Ok(())
            }
            None => Err(Error::usage(
                "cannot replace an observation before any was pushed".to_string(),
            )),
        }
    }

    pub fn newest(&self) -> Option<&Tensor> {
        self.frames.back()
    }

    pub fn encoded_dim(&self) -> usize {
        self.depth * self.obs_dim
    }

    pub fn encode(&self) -> Tensor {
        let mut v = vec![0.0; self.encoded_dim()];
        let missing = self.depth - self.frames.len();
        for (slot, frame) in self.frames.iter().enumerate() {
            let start = (missing + slot) * self.obs_dim;
            v[start..start + self.obs_dim].copy_from_slice(frame.values());
        }
        Tensor::vector(v)
    }
}

/// One agent's action-value network over encoded observation histories.
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    net: Network,
}

impl AgentPolicy {
    pub fn new(net: Network) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn q_values(&self, encoded: &Tensor) -> Result<Tensor> {
        self.net.forward(encoded)
    }

    pub fn greedy(&self, encoded: &Tensor) -> Result<usize> {
        Ok(greedy_index(self.q_values(encoded)?.values()))
    }

    /// With probability `epsilon` a uniformly random action, otherwise the
    /// greedy one.
    pub fn epsilon_greedy<R: Rng + ?Sized>(
        &self,
        encoded: &Tensor,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::config(format!(
                "epsilon must be in [0, 1], got {epsilon}"
            )));
        }
        if rng.random::<f64>() < epsilon {
            Ok(rng.random_range(0..self.n_actions()))
        } else {
            self.greedy(encoded)
        }
    }
}
