//! End-to-end attack evaluation: config loading, seeded episode rollouts
//! with per-step victim selection and observation perturbation, metric
//! aggregation, and CSV/JSON report emission.
//!
//! The flow of one attacked step: every agent computes its clean greedy
//! action; a search over victim subsets and replacement actions picks the
//! substitution that minimizes a joint action-value objective; each chosen
//! victim's newest observation is perturbed toward its replacement action;
//! victims act on perturbed observations while everyone else acts on clean
//! ones; the environment then transitions on the true state and the
//! actually selected actions. Victims are re-chosen from scratch at every
//! step.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::ctde::{env_fingerprint, load_team, team_fingerprint, CtdeTeam, TeamMeta};
use crate::deselect::{apply_substitutions, select_attack, DeConfig};
use crate::diffcore::Tensor;
use crate::envs::{CoopMatrixGame, Env, GridCapture, JointAction};
use crate::jointq::{load_joint_q, JointQFile, JointQNet};
use crate::perturb::{attack_random, attack_targeted, attack_untargeted, AttackBudget};
use crate::seeding::derive_seed;
use crate::{Error, Result};

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// How victim observations are tampered with during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    /// Search for critical victims and worst replacement actions, then
    /// drive each victim toward its replacement by gradient steps.
    Rtca,
    /// Uniformly random victims, uniformly random bounded noise.
    Random,
    /// Uniformly random victims, gradient noise away from the clean action.
    FgsmUntargeted,
    /// Clean rollout.
    None,
}

impl AttackMethod {
    pub fn label(&self) -> &'static str {
        match self {
            AttackMethod::Rtca => "rtca",
            AttackMethod::Random => "random",
            AttackMethod::FgsmUntargeted => "fgsm_untargeted",
            AttackMethod::None => "none",
        }
    }
}

impl FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rtca" => Ok(AttackMethod::Rtca),
            "random" => Ok(AttackMethod::Random),
            "fgsm_untargeted" => Ok(AttackMethod::FgsmUntargeted),
            "none" => Ok(AttackMethod::None),
            other => Err(Error::usage(format!(
                "unknown attack method `{other}` (expected rtca, random, fgsm_untargeted, or none)"
            ))),
        }
    }
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which joint action-value the victim search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSource {
    /// The separately learned joint action-value model.
    SarsaQjt,
    /// The trained team's own mixer applied to its per-agent values.
    CentralizedCritic,
}

impl FromStr for ObjectiveSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sarsa_qjt" => Ok(ObjectiveSource::SarsaQjt),
            "centralized_critic" => Ok(ObjectiveSource::CentralizedCritic),
            other => Err(Error::usage(format!(
                "unknown objective `{other}` (expected sarsa_qjt or centralized_critic)"
            ))),
        }
    }
}

/// Which environment to build, by name plus optional matrix-game shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSection {
    pub n_agents: usize,
    pub actions_per_agent: usize,
    pub payoff_seed: u64,
}

impl EnvSection {
    pub fn build(&self) -> Result<Box<dyn Env>> {
        match self.name.as_str() {
            "grid_capture" => Ok(Box::new(GridCapture::new())),
            "coop_matrix" => {
                let m = self.matrix.as_ref().ok_or_else(|| {
                    Error::config("coop_matrix needs an `env.matrix` section".to_string())
                })?;
                Ok(Box::new(CoopMatrixGame::random(
                    m.n_agents,
                    m.actions_per_agent,
                    m.payoff_seed,
                )?))
            }
            other => Err(Error::config(format!("unknown environment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub checkpoint: PathBuf,
}

/// Victim-search knobs. Field names follow the conventional upper-case
/// letters for the differential weight, crossover rate, generation count,
/// and victim count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeSection {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(rename = "F", default = "default_f")]
    pub f: f64,
    #[serde(rename = "CR", default = "default_cr")]
    pub cr: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t: usize,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
}

fn default_population() -> usize {
    400
}
fn default_f() -> f64 {
    0.5
}
fn default_cr() -> f64 {
    0.9
}
fn default_t() -> usize {
    20
}
fn default_m() -> usize {
    1
}

impl Default for DeSection {
    fn default() -> Self {
        Self {
            population_size: default_population(),
            f: default_f(),
            cr: default_cr(),
            t: default_t(),
            m: default_m(),
        }
    }
}

impl DeSection {
    fn to_de_config(&self, seed: u64) -> DeConfig {
        DeConfig {
            population_size: self.population_size,
            f: self.f,
            cr: self.cr,
            generations: self.t,
            victims: self.m,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Step size; defaults to epsilon (one full-radius step).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_method")]
    pub method: AttackMethod,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_steps() -> usize {
    1
}
fn default_method() -> AttackMethod {
    AttackMethod::Rtca
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            alpha: None,
            steps: default_steps(),
            method: default_method(),
        }
    }
}

impl AttackSection {
    pub fn budget(&self, obs_range: (f64, f64)) -> Result<AttackBudget> {
        AttackBudget::new(
            self.epsilon,
            self.alpha.unwrap_or(self.epsilon),
            self.steps,
            obs_range,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSection {
    /// Episodes per seed.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_objective")]
    pub objective_source: ObjectiveSource,
}

fn default_episodes() -> usize {
    32
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_objective() -> ObjectiveSource {
    ObjectiveSource::SarsaQjt
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            seeds: default_seeds(),
            objective_source: default_objective(),
        }
    }
}

/// One evaluation run, as read from a JSON config document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvSection,
    pub ctde: CheckpointRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jointq: Option<CheckpointRef>,
    #[serde(default)]
    pub de: DeSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::decode(path.display().to_string(), format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes must be at least 1".to_string()));
        }
        if self.eval.seeds.is_empty() {
            return Err(Error::config("eval.seeds must not be empty".to_string()));
        }
        Ok(())
    }

    /// Digest of the full effective configuration, stamped onto every
    /// report row so results stay traceable to their settings.
    pub fn fingerprint(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        Ok(format!("{:016x}", fnv1a64(json.as_bytes())))
    }
}

/// Everything an evaluation needs in memory, cross-checked against the
/// environment it will run on.
pub struct LoadedSetup {
    pub team: CtdeTeam,
    pub meta: TeamMeta,
    pub team_fp: String,
    pub qnet: Option<(JointQNet, JointQFile)>,
}

pub fn load_setup(cfg: &RunConfig) -> Result<(Box<dyn Env>, LoadedSetup)> {
    let env = cfg.env.build()?;
    let env_fp = env_fingerprint(env.name(), env.spec())?;
    let (team, meta) = load_team(&cfg.ctde.checkpoint)?;
    if meta.fingerprint != env_fp {
        return Err(Error::config(format!(
            "team checkpoint was trained on `{}` ({}), config asks for `{}` ({env_fp})",
            meta.env_name, meta.fingerprint, env.name()
        )));
    }
    let qnet = match &cfg.jointq {
        Some(r) => {
            let (net, file) = load_joint_q(&r.checkpoint)?;
            if file.fingerprint != env_fp {
                return Err(Error::config(format!(
                    "joint value checkpoint belongs to `{}` ({}), config asks for `{}` ({env_fp})",
                    file.env_name, file.fingerprint, env.name()
                )));
            }
            Some((net, file))
        }
        None => None,
    };
    let team_fp = team_fingerprint(&team)?;
    Ok((
        env,
        LoadedSetup {
            team,
            meta,
            team_fp,
            qnet,
        },
    ))
}

/// The joint action-value the victim search minimizes.
pub enum AttackObjective<'a> {
    SarsaQjt(&'a JointQNet),
    CentralizedCritic(&'a CtdeTeam),
}

impl AttackObjective<'_> {
    fn value(&self, state: &Tensor, encoded: &[Tensor], action: &JointAction) -> Result<f64> {
        match self {
            AttackObjective::SarsaQjt(q) => q.predict(state, action),
            AttackObjective::CentralizedCritic(team) => team.joint_value(state, encoded, action),
        }
    }
}

/// Per-step record of who was attacked and toward what.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepAttackLog {
    pub victims: Vec<usize>,
    /// Replacement actions the search asked for (victim-search method only).
    pub targets: Vec<usize>,
    /// Whether each victim's induced action matched its intent: the chosen
    /// replacement for targeted attacks, any non-clean action otherwise.
    pub hits: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub win: bool,
    pub cumulative_reward: f64,
    pub steps: usize,
    /// Order-sensitive digest of every joint action and reward, so two
    /// rollouts can be compared for exact equality without storing traces.
    pub trace_hash: u64,
    pub attack_log: Vec<StepAttackLog>,
}

fn sample_distinct<R: Rng + ?Sized>(pool: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let count = count.min(pool.len());
    for i in 0..count {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

struct TraceHasher {
    hash: u64,
}

impl TraceHasher {
    fn new() -> Self {
        Self {
            hash: 0xcbf2_9ce4_8422_2325,
        }
    }

    fn absorb(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.hash ^= b as u64;
            self.hash = self.hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn step(&mut self, action: &JointAction, reward: f64) {
        for &a in action.actions() {
            self.absorb(&(a as u64).to_le_bytes());
        }
        self.absorb(&reward.to_bits().to_le_bytes());
    }
}

/// Rolls one seeded episode with per-step attacks.
///
/// `objective` is only consulted by the victim-search method; baselines
/// draw victims uniformly. A `de.victims` of zero, or a zero-radius
/// budget, leaves the rollout identical to a clean one.
pub fn run_episode(
    env: &mut dyn Env,
    team: &CtdeTeam,
    method: AttackMethod,
    objective: Option<&AttackObjective<'_>>,
    de: &DeSection,
    budget: &AttackBudget,
    episode_seed: u64,
) -> Result<EpisodeResult> {
    team.validate()?;
    let spec = env.spec().clone();
    if team.n_agents() != spec.n_agents {
        return Err(Error::config(format!(
            "team has {} agents, environment expects {}",
            team.n_agents(),
            spec.n_agents
        )));
    }
    let (mut state, first_obs) = env.reset(derive_seed(episode_seed, "episode-env", 0));
    let mut histories = team.new_histories(spec.obs_dim)?;
    for (h, o) in histories.iter_mut().zip(&first_obs) {
        h.push(o.clone())?;
    }
    let mut attack_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, "episode-attack", 0));

    let mut trace = TraceHasher::new();
    let mut attack_log = Vec::new();
    let mut cumulative_reward = 0.0;
    let mut steps = 0usize;
    let win = loop {
        let encoded: Vec<Tensor> = histories.iter().map(|h| h.encode()).collect();
        let clean_joint = team.greedy_joint(&encoded)?;
        let mut actions = clean_joint.actions().to_vec();
        let alive = env.alive();
        let eligible: Vec<usize> = (0..spec.n_agents).filter(|&i| alive[i]).collect();
        let mut log = StepAttackLog::default();

        match method {
            AttackMethod::None => {}
            AttackMethod::Rtca => {
                let objective = objective.ok_or_else(|| {
                    Error::config(
                        "victim-search attack needs a joint action-value objective".to_string(),
                    )
                })?;
                let de_cfg = de.to_de_config(derive_seed(episode_seed, "de-step", steps as u64));
                let found =
                    select_attack(&de_cfg, &eligible, spec.actions_per_agent, |subs| {
                        let joint = apply_substitutions(&clean_joint, subs)?;
                        objective.value(&state, &encoded, &joint)
                    })?;
                for &(victim, worst) in &found.substitutions {
                    let out = attack_targeted(
                        team.policies[victim].net(),
                        &encoded[victim],
                        spec.obs_dim,
                        worst,
                        budget,
                    )?;
                    actions[victim] = out.induced_action;
                    log.victims.push(victim);
                    log.targets.push(worst);
                    log.hits.push(out.hit);
                }
            }
            AttackMethod::Random => {
                for victim in sample_distinct(&eligible, de.m, &mut attack_rng) {
                    let newest = histories[victim]
                        .newest()
                        .expect("history holds the current observation")
                        .clone();
                    let noisy = attack_random(&newest, budget, &mut attack_rng);
                    let mut perceived = histories[victim].clone();
                    perceived.replace_newest(noisy)?;
                    let induced = team.policies[victim].greedy(&perceived.encode())?;
                    log.hits.push(induced != actions[victim]);
                    actions[victim] = induced;
                    log.victims.push(victim);
                }
            }
            AttackMethod::FgsmUntargeted => {
                for victim in sample_distinct(&eligible, de.m, &mut attack_rng) {
                    let out = attack_untargeted(
                        team.policies[victim].net(),
                        &encoded[victim],
                        spec.obs_dim,
                        budget,
                    )?;
                    actions[victim] = out.induced_action;
                    log.victims.push(victim);
                    log.hits.push(out.hit);
                }
            }
        }

        let joint = JointAction(actions);
        let outcome = env.step(&joint)?;
        trace.step(&joint, outcome.reward);
        cumulative_reward += outcome.reward;
        steps += 1;
        attack_log.push(log);
        if outcome.done {
            break outcome.win;
        }
        state = outcome.next_state;
        for (h, o) in histories.iter_mut().zip(&outcome.next_obs) {
            h.push(o.clone())?;
        }
    };

    Ok(EpisodeResult {
        win,
        cumulative_reward,
        steps,
        trace_hash: trace.hash,
        attack_log,
    })
}

/// Population mean and standard deviation (denominator `n`).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One aggregated evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub env: String,
    pub method: String,
    pub algo: String,
    #[serde(rename = "M")]
    pub m: usize,
    /// Episodes per seed; totals are `episodes * seed_set.len()`.
    pub episodes: usize,
    pub win_rate: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
    /// Table-style rendering of the two reward moments.
    pub reward: String,
    pub seed_set: Vec<u64>,
    pub config_hash: String,
}

pub fn reward_display(mean: f64, std: f64) -> String {
    format!("{mean:.2}±{std:.2}")
}

/// Runs `eval.episodes` episodes for every seed in `eval.seeds` with the
/// configured method and aggregates the results. Also returns the
/// per-episode results ordered by (seed position, episode index).
pub fn evaluate(cfg: &RunConfig) -> Result<(Report, Vec<EpisodeResult>)> {
    cfg.validate()?;
    let (mut env, setup) = load_setup(cfg)?;
    let objective = match cfg.eval.objective_source {
        ObjectiveSource::SarsaQjt => {
            let (qnet, _) = setup.qnet.as_ref().ok_or_else(|| {
                Error::config(
                    "objective_source sarsa_qjt needs a `jointq.checkpoint`".to_string(),
                )
            })?;
            AttackObjective::SarsaQjt(qnet)
        }
        ObjectiveSource::CentralizedCritic => AttackObjective::CentralizedCritic(&setup.team),
    };
    let budget = cfg.attack.budget(env.spec().obs_range)?;

    let mut results = Vec::with_capacity(cfg.eval.episodes * cfg.eval.seeds.len());
    for &seed in &cfg.eval.seeds {
        for e in 0..cfg.eval.episodes {
            let episode_seed = derive_seed(seed, "episode", e as u64);
            let result = run_episode(
                env.as_mut(),
                &setup.team,
                cfg.attack.method,
                Some(&objective),
                &cfg.de,
                &budget,
                episode_seed,
            )
            .map_err(|err| {
                Error::config(format!("episode {e} under seed {seed} failed: {err}"))
            })?;
            results.push(result);
        }
    }

    let rewards: Vec<f64> = results.iter().map(|r| r.cumulative_reward).collect();
    let (reward_mean, reward_std) = mean_std(&rewards);
    let wins = results.iter().filter(|r| r.win).count();
    let win_rate = wins as f64 / results.len() as f64;
    let report = Report {
        env: env.name().to_string(),
        method: cfg.attack.method.label().to_string(),
        algo: setup.meta.algo.clone(),
        m: cfg.de.m,
        episodes: cfg.eval.episodes,
        win_rate,
        reward_mean,
        reward_std,
        reward: reward_display(reward_mean, reward_std),
        seed_set: cfg.eval.seeds.clone(),
        config_hash: cfg.fingerprint()?,
    };
    Ok((report, results))
}

/// Runs the victim-search attack twice — once scoring candidates with the
/// team's own mixer, once with the separately learned joint value — under
/// identical seeds, and returns the paired rows (critic first).
pub fn ablation_objective(cfg: &RunConfig) -> Result<(Report, Report)> {
    if cfg.jointq.is_none() {
        return Err(Error::config(
            "the objective ablation needs a `jointq.checkpoint` for its second arm".to_string(),
        ));
    }
    let mut critic_cfg = cfg.clone();
    critic_cfg.attack.method = AttackMethod::Rtca;
    critic_cfg.eval.objective_source = ObjectiveSource::CentralizedCritic;
    let mut sarsa_cfg = cfg.clone();
    sarsa_cfg.attack.method = AttackMethod::Rtca;
    sarsa_cfg.eval.objective_source = ObjectiveSource::SarsaQjt;

    let (critic_report, _) = evaluate(&critic_cfg)?;
    let (sarsa_report, _) = evaluate(&sarsa_cfg)?;
    Ok((critic_report, sarsa_report))
}

/// Outcome of attacking one team with a joint value learned elsewhere.
pub struct TransferOutcome {
    pub report: Report,
    /// Provenance label of the joint value model used for the attack.
    pub qnet_source: String,
    /// Identity of the attacked team: algorithm plus parameter digest.
    pub victim_team: String,
    /// True when the joint value was fitted to this very team — the
    /// non-transfer sanity path.
    pub is_self: bool,
}

/// Evaluates the victim-search attack with the joint value model at
/// `cross_qjt` substituted for the one named in the config.
pub fn transfer_experiment(cfg: &RunConfig, cross_qjt: &Path) -> Result<TransferOutcome> {
    let mut cfg = cfg.clone();
    cfg.jointq = Some(CheckpointRef {
        checkpoint: cross_qjt.to_path_buf(),
    });
    cfg.attack.method = AttackMethod::Rtca;
    cfg.eval.objective_source = ObjectiveSource::SarsaQjt;

    let (_, setup) = load_setup(&cfg)?;
    let (_, qfile) = setup.qnet.as_ref().expect("jointq was just set");
    let victim_team = format!("{}:{}", setup.meta.algo, setup.team_fp);
    let is_self = qfile.source == victim_team;
    if is_self {
        log::warn!(
            "joint value model was fitted to the attacked team itself ({victim_team}); \
             this measures self-attack, not transfer"
        );
    }
    let qnet_source = qfile.source.clone();

    let (mut report, _) = evaluate(&cfg)?;
    report.algo = format!("{}<-{}", victim_team, qnet_source);
    Ok(TransferOutcome {
        report,
        qnet_source,
        victim_team,
        is_self,
    })
}

pub const CSV_HEADER: &str =
    "env,method,algo,M,episodes,win_rate,reward_mean,reward_std,seed_set,config_hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn render_csv(reports: &[Report]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let seed_set = r
            .seed_set
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("|");
        out.push_str(&format!(
            "{},{},{},{},{},{:.2},{:.2},{:.2},{},{}\n",
            r.env,
            r.method,
            r.algo,
            r.m,
            r.episodes,
            r.win_rate,
            r.reward_mean,
            r.reward_std,
            seed_set,
            r.config_hash
        ));
    }
    out
}

pub fn write_report(reports: &[Report], path: &Path, format: ReportFormat) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => render_csv(reports),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            s
        }
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Concatenates CSV report files into one, keeping a single header.
/// Every input must carry the exact expected header.
pub fn merge_csv_files(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut merged = String::from(CSV_HEADER);
    merged.push('\n');
    for input in inputs {
        let raw = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        let mut lines = raw.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            _ => {
                return Err(Error::decode(
                    input.display().to_string(),
                    "missing or mismatched report header".to_string(),
                ))
            }
        }
        for line in lines {
            if !line.trim().is_empty() {
                merged.push_str(line);
                merged.push('\n');
            }
        }
    }
    fs::write(out, merged).map_err(|e| Error::io(out, e))
}
