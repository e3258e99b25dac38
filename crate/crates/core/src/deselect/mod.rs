//! Evolutionary search for the most damaging action substitution.
//!
//! Given a scoring function over "these agents take these actions instead",
//! a small differential-evolution run picks which agents to hijack and what
//! they should do. Candidates are real-valued genomes — one gene per victim
//! slot and one per substituted action — decoded by rounding, clamping and
//! de-duplication, so every genome the arithmetic can produce maps to a
//! valid substitution and no gradient information is needed anywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::JointAction;
use crate::seeding::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DeConfig {
    pub population_size: usize,
    /// Differential weight applied to the difference vector.
    pub f: f64,
    /// Per-gene crossover probability.
    pub cr: f64,
    pub generations: usize,
    /// How many agents to hijack at once.
    pub victims: usize,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 400,
            f: 0.5,
            cr: 0.9,
            generations: 20,
            victims: 1,
            seed: 0,
        }
    }
}

impl DeConfig {
    fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::config(format!(
                "population_size must be >= 4, got {}",
                self.population_size
            )));
        }
        if !self.f.is_finite() || self.f <= 0.0 || self.f > 2.0 {
            return Err(Error::config(format!(
                "differential weight must be in (0, 2], got {}",
                self.f
            )));
        }
        if !self.cr.is_finite() || !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::config(format!(
                "crossover rate must be in [0, 1], got {}",
                self.cr
            )));
        }
        Ok(())
    }
}

/// Outcome of one selection run: which agents to hijack, what they should
/// do, and how bad the scoring function says it gets.
#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    /// `(agent, action)` pairs sorted by agent index.
    pub substitutions: Vec<(usize, usize)>,
    pub best_score: f64,
    pub generations_run: usize,
    pub evaluations: usize,
}

impl DeResult {
    pub fn victims(&self) -> Vec<usize> {
        self.substitutions.iter().map(|&(v, _)| v).collect()
    }
}

/// Rounds a gene to the nearest slot in `0..n`, saturating at the edges.
fn gene_to_index(gene: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    let rounded = gene.round();
    if rounded.is_nan() || rounded < 0.0 {
        0
    } else if rounded >= n as f64 {
        n - 1
    } else {
        rounded as usize
    }
}

/// Decodes a genome into distinct victims (drawn from `eligible`) paired
/// with actions. The first `m` genes choose positions in the eligible
/// list — collisions advance to the next unused position, wrapping — and
/// the last `m` genes choose actions. Total: every finite or non-finite
/// genome decodes to something valid.
fn decode(genome: &[f64], eligible: &[usize], actions_per_agent: usize) -> Vec<(usize, usize)> {
    let m = genome.len() / 2;
    debug_assert!(m <= eligible.len());
    debug_assert_eq!(genome.len(), 2 * m);
    let mut used = vec![false; eligible.len()];
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut pos = gene_to_index(genome[k], eligible.len());
        while used[pos] {
            pos = (pos + 1) % eligible.len();
        }
        used[pos] = true;
        let action = gene_to_index(genome[m + k], actions_per_agent);
        out.push((eligible[pos], action));
    }
    out
}

/// Replaces the victims' entries of a joint action, leaving everyone else
/// untouched. Substitutions must name distinct agents.
pub fn apply_substitutions(
    base: &JointAction,
    substitutions: &[(usize, usize)],
) -> Result<JointAction> {
    let mut actions = base.actions().to_vec();
    let mut seen = vec![false; actions.len()];
    for &(agent, action) in substitutions {
        if agent >= actions.len() {
            return Err(Error::usage(format!(
                "substitution targets agent {agent}, joint action has {}",
                actions.len()
            )));
        }
        if seen[agent] {
            return Err(Error::usage(format!(
                "agent {agent} substituted more than once"
            )));
        }
        seen[agent] = true;
        actions[agent] = action;
    }
    Ok(JointAction(actions))
}

struct Member {
    genome: Vec<f64>,
    score: f64,
}

/// Searches for the substitution minimizing `objective`.
///
/// `eligible` lists the agents that may be hijacked; if it is shorter than
/// the configured victim count the whole list is used. With nothing to
/// hijack the objective is scored once on the empty substitution. The
/// search is generational: all trial vectors of a generation are built
/// before any replacement happens, then each replaces its parent only on a
/// strictly better score.
pub fn select_attack<F>(
    cfg: &DeConfig,
    eligible: &[usize],
    actions_per_agent: usize,
    mut objective: F,
) -> Result<DeResult>
where
    F: FnMut(&[(usize, usize)]) -> Result<f64>,
{
    cfg.validate()?;
    if actions_per_agent == 0 {
        return Err(Error::config("need at least one action".to_string()));
    }
    {
        let mut sorted = eligible.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != eligible.len() {
            return Err(Error::usage("eligible agents listed twice".to_string()));
        }
    }
    let m = cfg.victims.min(eligible.len());
    if m == 0 {
        let score = objective(&[])?;
        return Ok(DeResult {
            substitutions: Vec::new(),
            best_score: score,
            generations_run: 0,
            evaluations: 1,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "de", 0));
    let genome_len = 2 * m;
    let victim_span = (eligible.len() - 1) as f64;
    let action_span = (actions_per_agent - 1) as f64;

    let mut evaluations = 0usize;
    let mut score_genome = |genome: &[f64], objective: &mut F| -> Result<f64> {
        let subs = decode(genome, eligible, actions_per_agent);
        evaluations += 1;
        let score = objective(&subs)?;
        if score.is_nan() {
            return Err(Error::Diverged(
                "substitution objective returned NaN".to_string(),
            ));
        }
        Ok(score)
    };

    let mut population: Vec<Member> = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let mut genome = Vec::with_capacity(genome_len);
        for k in 0..genome_len {
            let span = if k < m { victim_span } else { action_span };
            genome.push(if span == 0.0 {
                0.0
            } else {
                rng.random_range(0.0..=span)
            });
        }
        let score = score_genome(&genome, &mut objective)?;
        population.push(Member { genome, score });
    }

    for _ in 0..cfg.generations {
        // Build every trial of the generation first so that candidate
        // construction does not depend on evaluation order.
        let mut trials: Vec<Vec<f64>> = Vec::with_capacity(cfg.population_size);
        for j in 0..cfg.population_size {
            let mut pick_distinct = |exclude: &[usize]| loop {
                let d = rng.random_range(0..cfg.population_size);
                if !exclude.contains(&d) {
                    return d;
                }
            };
            let d1 = pick_distinct(&[j]);
            let d2 = pick_distinct(&[j, d1]);
            let d3 = pick_distinct(&[j, d1, d2]);
            let forced = rng.random_range(0..genome_len);
            let mut trial = Vec::with_capacity(genome_len);
            for k in 0..genome_len {
                let mutated = population[d1].genome[k]
                    + cfg.f * (population[d2].genome[k] - population[d3].genome[k]);
                let crossed = if k == forced || rng.random::<f64>() < cfg.cr {
                    mutated
                } else {
                    population[j].genome[k]
                };
                trial.push(crossed);
            }
            trials.push(trial);
        }
        for (j, trial) in trials.into_iter().enumerate() {
            let score = score_genome(&trial, &mut objective)?;
            if score < population[j].score {
                population[j] = Member {
                    genome: trial,
                    score,
                };
            }
        }
    }

    let best = population
        .iter()
        .min_by(|a, b| a.score.partial_cmp(&b.score).expect("scores are not NaN"))
        .expect("population is never empty");
    let mut substitutions = decode(&best.genome, eligible, actions_per_agent);
    substitutions.sort_unstable_by_key(|&(agent, _)| agent);
    Ok(DeResult {
        substitutions,
        best_score: best.score,
        generations_run: cfg.generations,
        evaluations,
    })
}
