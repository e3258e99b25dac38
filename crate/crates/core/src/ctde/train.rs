use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mixer::{JointMixer, MixGrad, MixerKind, QmixMixer, VdnMixer};
use super::policy::{greedy_index, AgentPolicy};
use super::team::CtdeTeam;
use crate::diffcore::{
    GradBundle, HiddenActivation, MlpSpec, Network, OutputActivation, Tensor,
};
use crate::envs::{Env, JointAction};
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// Which mixing structure to train under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixerChoice {
    Vdn,
    Qmix,
}

#[derive(Debug, Clone)]
pub struct TdTrainConfig {
    pub algo: MixerChoice,
    pub episodes: usize,
    pub lr: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which exploration decays linearly from start to end.
    pub epsilon_decay_episodes: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Run one gradient update every this many environment steps.
    pub train_every: usize,
    /// Copy online networks into the bootstrap targets every this many
    /// gradient updates.
    pub target_sync_every: usize,
    pub hidden: Vec<usize>,
    pub history_depth: usize,
    pub mixer_embed: usize,
    pub seed: u64,
}

impl Default for TdTrainConfig {
    fn default() -> Self {
        Self {
            algo: MixerChoice::Qmix,
            episodes: 2000,
            lr: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 1600,
            buffer_capacity: 20_000,
            batch_size: 32,
            train_every: 4,
            target_sync_every: 200,
            hidden: vec![64],
            history_depth: 1,
            mixer_embed: 32,
            seed: 0,
        }
    }
}

impl TdTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(Error::config(format!("lr must be >= 0, got {}", self.lr)));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("train_every", self.train_every),
            ("target_sync_every", self.target_sync_every),
            ("history_depth", self.history_depth),
            ("mixer_embed", self.mixer_embed),
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

    fn epsilon_at(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_decay_episodes.max(1);
        let frac = (episode as f64 / horizon as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub team: CtdeTeam,
    pub episode_returns: Vec<f64>,
    pub episode_wins: Vec<bool>,
    pub updates: usize,
}

struct Transition {
    state: Tensor,
    encoded: Vec<Tensor>,
    actions: Vec<usize>,
    reward: f64,
    next_state: Tensor,
    next_encoded: Vec<Tensor>,
    done: bool,
}

fn init_team(
    env_spec: &crate::envs::EnvSpec,
    cfg: &TdTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CtdeTeam> {
    let mut layer_sizes = vec![cfg.history_depth * env_spec.obs_dim];
    layer_sizes.extend_from_slice(&cfg.hidden);
    layer_sizes.push(env_spec.actions_per_agent);
    let spec = MlpSpec::new(
        layer_sizes,
        HiddenActivation::Relu,
        OutputActivation::Identity,
    )?;
    let policies = (0..env_spec.n_agents)
        .map(|_| Ok(AgentPolicy::new(Network::init(spec.clone(), rng)?)))
        .collect::<Result<Vec<_>>>()?;
    let mixer = match cfg.algo {
        MixerChoice::Vdn => MixerKind::Vdn(VdnMixer::new(env_spec.n_agents)?),
        MixerChoice::Qmix => MixerKind::Qmix(QmixMixer::init(
            env_spec.n_agents,
            env_spec.state_dim,
            cfg.mixer_embed,
            rng,
        )?),
    };
    let team = CtdeTeam {
        policies,
        mixer,
        history_depth: cfg.history_depth,
    };
    team.validate()?;
    Ok(team)
}

/// One gradient update on a sampled batch. Returns the mean squared
/// temporal-difference error of the batch.
fn train_on_batch(
    team: &mut CtdeTeam,
    target_policies: &[AgentPolicy],
    target_mixer: &MixerKind,
    buffer: &VecDeque<Transition>,
    cfg: &TdTrainConfig,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let n_agents = team.n_agents();
    let batch = cfg.batch_size;

    let mut agent_grads: Vec<GradBundle> = team
        .policies
        .iter()
        .map(|p| GradBundle::zeros_like(&p.net().spec))
        .collect::<Result<Vec<_>>>()?;
    let mut mixer_grads: Option<MixGrad> = None;
    let mut loss = 0.0;

    for _ in 0..batch {
        let t = &buffer[rng.random_range(0..buffer.len())];

        let target_value = if t.done {
            t.reward
        } else {
            let mut best = Vec::with_capacity(n_agents);
            for (policy, enc) in target_policies.iter().zip(&t.next_encoded) {
                let qs = policy.q_values(enc)?;
                best.push(qs.values()[greedy_index(qs.values())]);
            }
            t.reward + gamma * target_mixer.mix(&t.next_state, &best)?
        };

        let mut chosen = Vec::with_capacity(n_agents);
        for ((policy, enc), &a) in team.policies.iter().zip(&t.encoded).zip(&t.actions) {
            chosen.push(policy.q_values(enc)?.values()[a]);
        }
        let mixed = team.mixer.mix(&t.state, &chosen)?;
        let delta = mixed - target_value;
        loss += delta * delta / batch as f64;

        let upstream = 2.0 * delta / batch as f64;
        let mix_grad = team.mixer.mix_backward(&t.state, &chosen, upstream)?;
        for (agent, grads) in agent_grads.iter_mut().enumerate() {
            let policy = &team.policies[agent];
            let mut up = vec![0.0; policy.n_actions()];
            up[t.actions[agent]] = mix_grad.dq[agent];
            grads.accumulate(&policy.net().backward(&t.encoded[agent], &Tensor::vector(up))?);
        }
        match &mut mixer_grads {
            None => mixer_grads = Some(mix_grad),
            Some(acc) => acc.accumulate(&mix_grad),
        }
    }

    if !loss.is_finite() {
        return Err(Error::Diverged(format!(
            "temporal-difference loss became {loss}"
        )));
    }
    for (policy, grads) in team.policies.iter_mut().zip(&agent_grads) {
        policy.net_mut().sgd_step(grads, cfg.lr)?;
    }
    if let Some(grads) = mixer_grads {
        team.mixer.sgd_step(&grads, cfg.lr)?;
    }
    Ok(loss)
}

/// Trains a team on `env` by temporal-difference learning with a replay
/// buffer and periodically synced bootstrap targets. With zero episodes the
/// freshly initialized team is returned untouched, which gives callers a
/// seeded random baseline.
pub fn td_train(env: &mut dyn Env, cfg: &TdTrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env_spec = env.spec().clone();
    let gamma = env_spec.gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "td-train", 0));
    let mut team = init_team(&env_spec, cfg, &mut rng)?;

    let mut target_policies = team.policies.clone();
    let mut target_mixer = team.mixer.clone();
    let mut buffer: VecDeque<Transition> = VecDeque::with_capacity(cfg.buffer_capacity);

    let mut episode_returns = Vec::with_capacity(cfg.episodes);
    let mut episode_wins = Vec::with_capacity(cfg.episodes);
    let mut global_steps = 0usize;
    let mut updates = 0usize;
    let log_every = (cfg.episodes / 10).max(1);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon_at(episode);
        let (mut state, obs) = env.reset(derive_seed(cfg.seed, "episode", episode as u64));
        let mut histories = team.new_histories(env_spec.obs_dim)?;
        for (h, o) in histories.iter_mut().zip(obs) {
            h.push(o)?;
        }
        let mut encoded: Vec<Tensor> = histories.iter().map(|h| h.encode()).collect();
        let mut episode_return = 0.0;
        let mut won = false;

        loop {
            let mut actions = Vec::with_capacity(team.n_agents());
            for (policy, enc) in team.policies.iter().zip(&encoded) {
                actions.push(policy.epsilon_greedy(enc, epsilon, &mut rng)?);
            }
            let out = env.step(&JointAction(actions.clone()))?;
            for (h, o) in histories.iter_mut().zip(out.next_obs.iter().cloned()) {
                h.push(o)?;
            }
            let next_encoded: Vec<Tensor> = histories.iter().map(|h| h.encode()).collect();

            if buffer.len() == cfg.buffer_capacity {
                buffer.pop_front();
            }
            buffer.push_back(Transition {
                state,
                encoded,
                actions,
                reward: out.reward,
                next_state: out.next_state.clone(),
                next_encoded: next_encoded.clone(),
                done: out.done,
            });

            episode_return += out.reward;
            won = won || out.win;
            state = out.next_state;
            encoded = next_encoded;
            global_steps += 1;

            if global_steps % cfg.train_every == 0 && buffer.len() >= cfg.batch_size {
                train_on_batch(
                    &mut team,
                    &target_policies,
                    &target_mixer,
                    &buffer,
                    cfg,
                    gamma,
                    &mut rng,
                )?;
                updates += 1;
                if updates % cfg.target_sync_every == 0 {
                    target_policies = team.policies.clone();
                    target_mixer = team.mixer.clone();
                }
            }
            if out.done {
                break;
            }
        }
        episode_returns.push(episode_return);
        episode_wins.push(won);

        if (episode + 1) % log_every == 0 {
            let tail = &episode_returns[episode_returns.len().saturating_sub(log_every)..];
            let mean = tail.iter().sum::<f64>() / tail.len() as f64;
            log::info!(
                "episode {}/{}: mean return {mean:.3}, epsilon {epsilon:.3}, {updates} updates",
                episode + 1,
                cfg.episodes
            );
        }
    }

    Ok(TrainOutcome {
        team,
        episode_returns,
        episode_wins,
        updates,
    })
}
