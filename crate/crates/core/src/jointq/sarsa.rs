use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::JointQNet;
use crate::ctde::CtdeTeam;
use crate::diffcore::{GradBundle, Tensor};
use crate::envs::{Env, JointAction};
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// How rollouts are generated while fitting the joint value model.
#[derive(Debug, Clone, Copy)]
pub enum SarsaBehavior<'a> {
    /// Every agent acts uniformly at random; visits everything, models
    /// nothing in particular.
    Uniform,
    /// Agents follow a trained team with per-agent exploration, so the
    /// fitted values describe that team's actual play.
    TeamEpsilonGreedy { team: &'a CtdeTeam, epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct SarsaConfig {
    pub episodes: usize,
    pub lr: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Run one gradient update every this many environment steps.
    pub train_every: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for SarsaConfig {
    fn default() -> Self {
        Self {
            episodes: 3000,
            lr: 5e-4,
            buffer_capacity: 20_000,
            batch_size: 32,
            train_every: 4,
            hidden: vec![64],
            seed: 0,
        }
    }
}

impl SarsaConfig {
    fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(Error::config(format!("lr must be >= 0, got {}", self.lr)));
        }
        for (name, v) in [
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("train_every", self.train_every),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::config(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SarsaOutcome {
    pub qnet: JointQNet,
    pub episode_returns: Vec<f64>,
    pub updates: usize,
}

/// One on-policy tuple: state, action, reward, successor state, and the
/// action actually taken there (absent at episode end).
struct SarsaTuple {
    state: Tensor,
    action: JointAction,
    reward: f64,
    next_state: Tensor,
    next_action: Option<JointAction>,
}

struct Rollout<'a> {
    behavior: SarsaBehavior<'a>,
    histories: Option<Vec<crate::ctde::ObservationHistory>>,
    actions_per_agent: usize,
    n_agents: usize,
}

impl<'a> Rollout<'a> {
    fn begin(
        behavior: SarsaBehavior<'a>,
        env_spec: &crate::envs::EnvSpec,
        obs: Vec<Tensor>,
    ) -> Result<Self> {
        let histories = match behavior {
            SarsaBehavior::Uniform => None,
            SarsaBehavior::TeamEpsilonGreedy { team, epsilon } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::config(format!(
                        "epsilon must be in [0, 1], got {epsilon}"
                    )));
                }
                if team.n_agents() != env_spec.n_agents {
                    return Err(Error::config(format!(
                        "team has {} agents, environment {}",
                        team.n_agents(),
                        env_spec.n_agents
                    )));
                }
                let mut hs = team.new_histories(env_spec.obs_dim)?;
                for (h, o) in hs.iter_mut().zip(obs) {
                    h.push(o)?;
                }
                Some(hs)
            }
        };
        Ok(Self {
            behavior,
            histories,
            actions_per_agent: env_spec.actions_per_agent,
            n_agents: env_spec.n_agents,
        })
    }

    fn observe(&mut self, obs: &[Tensor]) -> Result<()> {
        if let Some(hs) = &mut self.histories {
            for (h, o) in hs.iter_mut().zip(obs) {
                h.push(o.clone())?;
            }
        }
        Ok(())
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> Result<JointAction> {
        match self.behavior {
            SarsaBehavior::Uniform => Ok(JointAction(
                (0..self.n_agents)
                    .map(|_| rng.random_range(0..self.actions_per_agent))
                    .collect(),
            )),
            SarsaBehavior::TeamEpsilonGreedy { team, epsilon } => {
                let hs = self.histories.as_ref().expect("histories exist for teams");
                let mut actions = Vec::with_capacity(self.n_agents);
                for (policy, h) in team.policies.iter().zip(hs) {
                    actions.push(policy.epsilon_greedy(&h.encode(), epsilon, rng)?);
                }
                Ok(JointAction(actions))
            }
        }
    }
}

/// Semi-gradient update on a sampled batch: only the value of the visited
/// pair moves; the bootstrap value of the successor pair is held fixed.
fn train_on_batch(
    qnet: &mut JointQNet,
    buffer: &VecDeque<SarsaTuple>,
    cfg: &SarsaConfig,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let batch = cfg.batch_size;
    let mut grads = GradBundle::zeros_like(&qnet.net().spec)?;
    let mut loss = 0.0;
    for _ in 0..batch {
        let t = &buffer[rng.random_range(0..buffer.len())];
        let target = match &t.next_action {
            None => t.reward,
            Some(a) => t.reward + gamma * qnet.predict(&t.next_state, a)?,
        };
        let input = qnet.encode(&t.state, &t.action)?;
        let value = qnet.net().forward(&input)?.values()[0];
        let delta = value - target;
        loss += delta * delta / batch as f64;
        grads.accumulate(&qnet.backward_on(&input, 2.0 * delta / batch as f64)?);
    }
    if !loss.is_finite() {
        return Err(Error::Diverged(format!(
            "joint value loss became {loss}"
        )));
    }
    qnet.sgd_step(&grads, cfg.lr)?;
    Ok(loss)
}

/// Fits a joint action-value model to rollouts of `behavior` on `env` by
/// on-policy temporal-difference learning over (s, a, r, s', a') tuples.
pub fn train_sarsa(
    env: &mut dyn Env,
    behavior: SarsaBehavior<'_>,
    cfg: &SarsaConfig,
) -> Result<SarsaOutcome> {
    cfg.validate()?;
    let env_spec = env.spec().clone();
    let gamma = env_spec.gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sarsa", 0));
    let mut qnet = JointQNet::init(&env_spec, &cfg.hidden, &mut rng)?;

    let mut buffer: VecDeque<SarsaTuple> = VecDeque::with_capacity(cfg.buffer_capacity);
    let mut episode_returns = Vec::with_capacity(cfg.episodes);
    let mut global_steps = 0usize;
    let mut updates = 0usize;

    for episode in 0..cfg.episodes {
        let (mut state, obs) = env.reset(derive_seed(cfg.seed, "sarsa-episode", episode as u64));
        let mut rollout = Rollout::begin(behavior, &env_spec, obs)?;
        let mut action = rollout.choose(&mut rng)?;
        let mut episode_return = 0.0;

        loop {
            let out = env.step(&action)?;
            episode_return += out.reward;
            rollout.observe(&out.next_obs)?;
            let next_action = if out.done {
                None
            } else {
                Some(rollout.choose(&mut rng)?)
            };
            if buffer.len() == cfg.buffer_capacity {
                buffer.pop_front();
            }
            buffer.push_back(SarsaTuple {
                state,
                action: action.clone(),
                reward: out.reward,
                next_state: out.next_state.clone(),
                next_action: next_action.clone(),
            });
            state = out.next_state;
            global_steps += 1;

            if global_steps % cfg.train_every == 0 && buffer.len() >= cfg.batch_size {
                train_on_batch(&mut qnet, &buffer, cfg, gamma, &mut rng)?;
                updates += 1;
            }

            match next_action {
                Some(a) => action = a,
                None => break,
            }
        }
        episode_returns.push(episode_return);
    }

    Ok(SarsaOutcome {
        qnet,
        episode_returns,
        updates,
    })
}
