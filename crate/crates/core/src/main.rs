//! Command-line front end: train teams, fit the adversary's joint value,
//! run attack evaluations, and merge result tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use marlprobe::ctde::{
    env_fingerprint, load_team, save_team, td_train, team_fingerprint, MixerChoice,
    TdTrainConfig, TeamMeta,
};
use marlprobe::harness::{
    ablation_objective, evaluate, merge_csv_files, transfer_experiment, write_report,
    EnvSection, Report, ReportFormat, RunConfig,
};
use marlprobe::jointq::{save_joint_q, train_sarsa, SarsaBehavior, SarsaConfig};
use marlprobe::{Error, Result};

#[derive(Parser)]
#[command(
    name = "marlprobe",
    version,
    about = "Robustness probing for cooperative multi-agent teams: train, attack, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a cooperative team and write its checkpoint directory.
    Train {
        /// Environment name (grid_capture, or coop_matrix via --config).
        #[arg(long, default_value = "grid_capture")]
        env: String,
        /// Value mixing: vdn or qmix.
        #[arg(long, default_value = "qmix")]
        algo: String,
        /// Optional JSON config; its `env` section overrides --env.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the adversary's joint action-value model from rollouts.
    TrainSarsaQ {
        #[arg(long, default_value = "grid_capture")]
        env: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Team checkpoint whose epsilon-greedy behavior generates rollouts;
        /// omitted = uniformly random behavior.
        #[arg(long)]
        team: Option<PathBuf>,
        /// Exploration rate of the behavior team.
        #[arg(long, default_value_t = 0.3)]
        behavior_epsilon: f64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured attack over seeded episodes and report metrics.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed set with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Episodes per seed.
        #[arg(long)]
        episodes: Option<usize>,
        /// rtca, random, fgsm_untargeted, or none.
        #[arg(long)]
        method: Option<String>,
        /// How many agents to attack per step.
        #[arg(long)]
        victims: Option<usize>,
        /// Directory for report.csv / report.json (stdout only if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare victim-search objectives (team critic vs learned joint value).
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        victims: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attack the configured team with a joint value fitted elsewhere.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        /// The cross-paired joint value checkpoint.
        #[arg(long)]
        jointq: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        victims: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge CSV report files into one.
    Report {
        /// Input CSV files.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn env_section(name: &str, config: Option<&Path>) -> Result<EnvSection> {
    match config {
        Some(path) => {
            let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let doc: serde_json::Value = serde_json::from_str(&raw)
                .map_err(|e| Error::decode(path.display().to_string(), format!("{e}")))?;
            let env = doc.get("env").ok_or_else(|| {
                Error::config(format!("{} has no `env` section", path.display()))
            })?;
            Ok(serde_json::from_value(env.clone())
                .map_err(|e| Error::decode("env".to_string(), format!("{e}")))?)
        }
        None => Ok(EnvSection {
            name: name.to_string(),
            matrix: None,
        }),
    }
}

fn parse_algo(algo: &str) -> Result<MixerChoice> {
    match algo {
        "vdn" => Ok(MixerChoice::Vdn),
        "qmix" => Ok(MixerChoice::Qmix),
        other => Err(Error::usage(format!(
            "unknown algorithm `{other}` (expected vdn or qmix)"
        ))),
    }
}

/// Aligned plain-text table for terminal summaries.
fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    println!("{}", line(header.iter().map(|h| h.to_string()).collect()));
    for row in rows {
        println!("{}", line(row.clone()));
    }
}

fn report_row(r: &Report) -> Vec<String> {
    vec![
        r.env.clone(),
        r.method.clone(),
        r.algo.clone(),
        r.m.to_string(),
        r.episodes.to_string(),
        format!("{:.2}", r.win_rate),
        r.reward.clone(),
    ]
}

fn print_reports(reports: &[Report]) {
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    print_table(
        &["env", "method", "algo", "M", "episodes", "WR", "reward"],
        &rows,
    );
}

fn write_out(reports: &[Report], out: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join(format!("{stem}.csv"));
    let json = out.join(format!("{stem}.json"));
    write_report(reports, &csv, ReportFormat::Csv)?;
    write_report(reports, &json, ReportFormat::Json)?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn apply_overrides(
    cfg: &mut RunConfig,
    seed: Option<u64>,
    episodes: Option<usize>,
    method: Option<&str>,
    victims: Option<usize>,
) -> Result<()> {
    if let Some(s) = seed {
        cfg.eval.seeds = vec![s];
    }
    if let Some(e) = episodes {
        cfg.eval.episodes = e;
    }
    if let Some(m) = method {
        cfg.attack.method = m.parse()?;
    }
    if let Some(v) = victims {
        cfg.de.m = v;
    }
    cfg.validate()
}

fn tail_stats(returns: &[f64], wins: &[bool]) -> (f64, f64) {
    let k = returns.len().min(100).max(1);
    let tail_r = &returns[returns.len() - k..];
    let tail_w = &wins[wins.len() - k..];
    let mean = tail_r.iter().sum::<f64>() / k as f64;
    let wr = tail_w.iter().filter(|&&w| w).count() as f64 / k as f64;
    (mean, wr)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            env,
            algo,
            config,
            episodes,
            seed,
            out,
        } => {
            let section = env_section(&env, config.as_deref())?;
            let mut env = section.build()?;
            let mut cfg = TdTrainConfig {
                algo: parse_algo(&algo)?,
                seed,
                ..TdTrainConfig::default()
            };
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            let outcome = td_train(env.as_mut(), &cfg)?;
            let meta = TeamMeta {
                env_name: env.name().to_string(),
                env_spec: env.spec().clone(),
                algo: algo.clone(),
                n_agents: env.spec().n_agents,
                history_depth: cfg.history_depth,
                fingerprint: env_fingerprint(env.name(), env.spec())?,
                seed,
                episodes_trained: cfg.episodes,
            };
            save_team(&out, &outcome.team, &meta)?;
            let (mean, wr) = tail_stats(&outcome.episode_returns, &outcome.episode_wins);
            println!(
                "trained {algo} on {} for {} episodes ({} updates); \
                 recent mean return {mean:.2}, recent win rate {wr:.2}",
                env.name(),
                cfg.episodes,
                outcome.updates
            );
            println!("saved team checkpoint to {}", out.display());
            Ok(())
        }
        Command::TrainSarsaQ {
            env,
            config,
            team,
            behavior_epsilon,
            episodes,
            seed,
            out,
        } => {
            let section = env_section(&env, config.as_deref())?;
            let mut env = section.build()?;
            let mut cfg = SarsaConfig {
                seed,
                ..SarsaConfig::default()
            };
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            let loaded = match &team {
                Some(dir) => Some(load_team(dir)?),
                None => None,
            };
            let (behavior, source) = match &loaded {
                Some((team, meta)) => {
                    let fp = env_fingerprint(env.name(), env.spec())?;
                    if meta.fingerprint != fp {
                        return Err(Error::config(format!(
                            "behavior team was trained on `{}`, not `{}`",
                            meta.env_name,
                            env.name()
                        )));
                    }
                    (
                        SarsaBehavior::TeamEpsilonGreedy {
                            team,
                            epsilon: behavior_epsilon,
                        },
                        format!("{}:{}", meta.algo, team_fingerprint(team)?),
                    )
                }
                None => (SarsaBehavior::Uniform, "uniform".to_string()),
            };
            let outcome = train_sarsa(env.as_mut(), behavior, &cfg)?;
            let fp = env_fingerprint(env.name(), env.spec())?;
            save_joint_q(&out, &outcome.qnet, env.name(), &fp, &source)?;
            println!(
                "fitted joint action-value on {} over {} episodes ({} updates, behavior {source})",
                env.name(),
                cfg.episodes,
                outcome.updates
            );
            println!("saved model to {}", out.display());
            Ok(())
        }
        Command::Evaluate {
            config,
            seed,
            episodes,
            method,
            victims,
            out,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            apply_overrides(&mut cfg, seed, episodes, method.as_deref(), victims)?;
            let (report, _) = evaluate(&cfg)?;
            print_reports(std::slice::from_ref(&report));
            if let Some(out) = out {
                write_out(std::slice::from_ref(&report), &out, "report")?;
            }
            Ok(())
        }
        Command::Ablate {
            config,
            seed,
            episodes,
            victims,
            out,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            apply_overrides(&mut cfg, seed, episodes, None, victims)?;
            let (critic, sarsa) = ablation_objective(&cfg)?;
            let rows = vec![
                {
                    let mut row = vec!["centralized_critic".to_string()];
                    row.extend(report_row(&critic));
                    row
                },
                {
                    let mut row = vec!["sarsa_qjt".to_string()];
                    row.extend(report_row(&sarsa));
                    row
                },
            ];
            print_table(
                &[
                    "objective", "env", "method", "algo", "M", "episodes", "WR", "reward",
                ],
                &rows,
            );
            if let Some(out) = out {
                write_out(&[critic, sarsa], &out, "ablation")?;
            }
            Ok(())
        }
        Command::Transfer {
            config,
            jointq,
            seed,
            episodes,
            victims,
            out,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            apply_overrides(&mut cfg, seed, episodes, None, victims)?;
            let outcome = transfer_experiment(&cfg, &jointq)?;
            if outcome.is_self {
                println!(
                    "note: joint value was fitted to the attacked team itself; \
                     this is the self-attack sanity path"
                );
            }
            let mut row = vec![outcome.victim_team.clone(), outcome.qnet_source.clone()];
            row.extend(report_row(&outcome.report));
            print_table(
                &[
                    "victim_team",
                    "qnet_source",
                    "env",
                    "method",
                    "algo",
                    "M",
                    "episodes",
                    "WR",
                    "reward",
                ],
                std::slice::from_ref(&row),
            );
            if let Some(out) = out {
                write_out(std::slice::from_ref(&outcome.report), &out, "transfer")?;
            }
            Ok(())
        }
        Command::Report { inputs, out } => {
            if inputs.is_empty() {
                return Err(Error::usage(
                    "report needs at least one input CSV".to_string(),
                ));
            }
            merge_csv_files(&inputs, &out)?;
            println!("merged {} files into {}", inputs.len(), out.display());
            Ok(())
        }
    }
}
