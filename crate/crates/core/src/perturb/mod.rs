//! Bounded observation attacks against per-agent policies.
//!
//! A policy's action values define a softmax action distribution; pushing
//! its input a few signed-gradient steps inside an L-infinity ball around
//! the true observation can make a chosen action the greedy one. Only the
//! newest frame of an observation window is ever touched — the past is
//! already perceived — and every result is clamped back into both the
//! budget ball and the environment's observation range, so the
//! perturbation is undetectable by range checks alone.

use rand::Rng;

use crate::ctde::greedy_index;
use crate::diffcore::{Network, OutputActivation, Tensor};
use crate::envs::EnvSpec;
use crate::{Error, Result};

/// Probabilities this small are floored before taking logs, keeping the
/// loss finite even when the policy is fully confident.
const PROB_FLOOR: f64 = 1e-12;

/// The attacker's allowance: ball radius, step size, step count, and the
/// legal observation box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackBudget {
    pub epsilon: f64,
    pub alpha: f64,
    pub steps: usize,
    pub clip_range: (f64, f64),
}

impl AttackBudget {
    pub fn new(epsilon: f64, alpha: f64, steps: usize, clip_range: (f64, f64)) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::config(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::config(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if steps == 0 {
            return Err(Error::config("attack needs at least one step".to_string()));
        }
        let (lo, hi) = clip_range;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::config(format!(
                "clip range [{lo}, {hi}] is not a valid interval"
            )));
        }
        Ok(Self {
            epsilon,
            alpha,
            steps,
            clip_range,
        })
    }

    /// Budget with the environment's observation bounds and the common
    /// single-step choice of `alpha = epsilon`.
    pub fn for_env(spec: &EnvSpec, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, epsilon, 1, spec.obs_range)
    }
}

/// What one attack invocation produced.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    /// The perturbed newest observation frame.
    pub adversarial_obs: Tensor,
    /// Greedy action of the policy on the perturbed input.
    pub induced_action: usize,
    /// Greedy action on the clean input.
    pub clean_action: usize,
    /// For targeted attacks, whether the induced action equals the target;
    /// for untargeted ones, whether it differs from the clean action.
    pub hit: bool,
    pub final_loss: f64,
}

fn softmax_probs(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_prob(probs: &[f64], action: usize) -> f64 {
    probs[action].max(PROB_FLOOR).ln()
}

fn sign(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

struct AttackSetup {
    obs_start: usize,
}

fn check_attack_inputs(
    net: &Network,
    clean_encoded: &Tensor,
    obs_dim: usize,
) -> Result<AttackSetup> {
    if net.spec.output_activation != OutputActivation::Identity {
        return Err(Error::config(
            "attacked policy must produce raw action values".to_string(),
        ));
    }
    if clean_encoded.shape() != [net.input_dim()] {
        return Err(Error::usage(format!(
            "encoded observation has shape {:?}, network expects [{}]",
            clean_encoded.shape(),
            net.input_dim()
        )));
    }
    if obs_dim == 0 || obs_dim > net.input_dim() {
        return Err(Error::usage(format!(
            "obs_dim {obs_dim} does not fit in network input {}",
            net.input_dim()
        )));
    }
    Ok(AttackSetup {
        obs_start: net.input_dim() - obs_dim,
    })
}

/// One signed step on the newest frame followed by projection into the
/// budget ball around the clean frame and into the legal box.
fn descend_and_project(
    current: &mut Tensor,
    grad: &Tensor,
    clean: &Tensor,
    obs_start: usize,
    budget: &AttackBudget,
) {
    let (lo, hi) = budget.clip_range;
    let clean_v = clean.values();
    let grad_v = grad.values();
    for (i, v) in current.values_mut().iter_mut().enumerate().skip(obs_start) {
        let stepped = *v - budget.alpha * sign(grad_v[i]);
        let ball_lo = clean_v[i] - budget.epsilon;
        let ball_hi = clean_v[i] + budget.epsilon;
        *v = stepped.clamp(ball_lo, ball_hi).clamp(lo, hi);
    }
}

fn newest_frame(encoded: &Tensor, obs_start: usize) -> Tensor {
    Tensor::vector(encoded.values()[obs_start..].to_vec())
}

/// Pushes the policy toward choosing `target` instead of its clean greedy
/// action by descending `-log p(target) + log p(clean greedy)` over the
/// newest observation frame.
pub fn attack_targeted(
    net: &Network,
    clean_encoded: &Tensor,
    obs_dim: usize,
    target: usize,
    budget: &AttackBudget,
) -> Result<AttackOutcome> {
    let setup = check_attack_inputs(net, clean_encoded, obs_dim)?;
    if target >= net.output_dim() {
        return Err(Error::usage(format!(
            "target action {target} out of range 0..{}",
            net.output_dim()
        )));
    }
    let clean_logits = net.forward(clean_encoded)?;
    let clean_action = greedy_index(clean_logits.values());

    let mut current = clean_encoded.clone();
    for _ in 0..budget.steps {
        // d(loss)/d(logits) = onehot(clean) - onehot(target); the softmax
        // terms of the two log-probabilities cancel.
        let mut upstream = vec![0.0; net.output_dim()];
        upstream[clean_action] += 1.0;
        upstream[target] -= 1.0;
        let grads = net.backward(&current, &Tensor::vector(upstream))?;
        descend_and_project(&mut current, &grads.input_grad, clean_encoded, setup.obs_start, budget);
    }

    let final_logits = net.forward(&current)?;
    let probs = softmax_probs(final_logits.values());
    let induced_action = greedy_index(final_logits.values());
    Ok(AttackOutcome {
        adversarial_obs: newest_frame(&current, setup.obs_start),
        induced_action,
        clean_action,
        hit: induced_action == target,
        final_loss: -log_prob(&probs, target) + log_prob(&probs, clean_action),
    })
}

/// Pushes the policy away from its clean greedy action by descending
/// `log p(clean greedy)` over the newest observation frame.
pub fn attack_untargeted(
    net: &Network,
    clean_encoded: &Tensor,
    obs_dim: usize,
    budget: &AttackBudget,
) -> Result<AttackOutcome> {
    let setup = check_attack_inputs(net, clean_encoded, obs_dim)?;
    let clean_logits = net.forward(clean_encoded)?;
    let clean_action = greedy_index(clean_logits.values());

    let mut current = clean_encoded.clone();
    for _ in 0..budget.steps {
        // d(log p(a))/d(logits) = onehot(a) - p.
        let probs = softmax_probs(net.forward(&current)?.values());
        let mut upstream: Vec<f64> = probs.iter().map(|p| -p).collect();
        upstream[clean_action] += 1.0;
        let grads = net.backward(&current, &Tensor::vector(upstream))?;
        descend_and_project(&mut current, &grads.input_grad, clean_encoded, setup.obs_start, budget);
    }

    let final_logits = net.forward(&current)?;
    let probs = softmax_probs(final_logits.values());
    let induced_action = greedy_index(final_logits.values());
    Ok(AttackOutcome {
        adversarial_obs: newest_frame(&current, setup.obs_start),
        induced_action,
        clean_action,
        hit: induced_action != clean_action,
        final_loss: log_prob(&probs, clean_action),
    })
}

/// Uniform noise in the budget ball, clamped to the legal box — the
/// baseline any gradient-shaped attack has to beat.
pub fn attack_random<R: Rng + ?Sized>(
    clean_obs: &Tensor,
    budget: &AttackBudget,
    rng: &mut R,
) -> Tensor {
    let (lo, hi) = budget.clip_range;
    let values = clean_obs
        .values()
        .iter()
        .map(|&v| {
            let noisy = v + rng.random_range(-budget.epsilon..=budget.epsilon);
            noisy
                .clamp(v - budget.epsilon, v + budget.epsilon)
                .clamp(lo, hi)
        })
        .collect();
    Tensor::vector(values)
}
