use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mixer::{JointMixer, MixerKind, QmixMixer, VdnMixer};
use super::policy::AgentPolicy;
use super::team::CtdeTeam;
use crate::diffcore::{load_network, save_network, Checkpoint};
use crate::envs::EnvSpec;
use crate::{Error, Result};

/// Provenance stored next to a team's networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamMeta {
    pub env_name: String,
    pub env_spec: EnvSpec,
    pub algo: String,
    pub n_agents: usize,
    pub history_depth: usize,
    /// Stable digest of the environment the team was trained on, used to
    /// tell apart results that were produced on different tasks.
    pub fingerprint: String,
    pub seed: u64,
    pub episodes_trained: usize,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Digest identifying an environment instance by name and shape.
pub fn env_fingerprint(name: &str, spec: &EnvSpec) -> Result<String> {
    let payload = format!("{name}:{}", serde_json::to_string(spec)?);
    Ok(format!("{:016x}", fnv1a64(payload.as_bytes())))
}

/// Digest of a team's actual parameters (policies and mixer), so two
/// separately trained teams on the same environment are distinguishable.
pub fn team_fingerprint(team: &CtdeTeam) -> Result<String> {
    let mut payload = String::new();
    for policy in &team.policies {
        payload.push_str(&serde_json::to_string(&Checkpoint::from_network(
            policy.net(),
        ))?);
    }
    payload.push_str(team.mixer.algo_name());
    if let MixerKind::Qmix(m) = &team.mixer {
        for (name, net) in m.nets() {
            payload.push_str(name);
            payload.push_str(&serde_json::to_string(&Checkpoint::from_network(net))?);
        }
    }
    Ok(format!("{:016x}", fnv1a64(payload.as_bytes())))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
enum MixerFile {
    Vdn {
        n_agents: usize,
    },
    Qmix {
        n_agents: usize,
        embed: usize,
        nets: BTreeMap<String, Checkpoint>,
    },
}

fn agent_file(dir: &Path, agent: usize) -> std::path::PathBuf {
    dir.join(format!("agent_{agent}.json"))
}

/// Writes a team directory: `agent_<i>.json` per agent, `mixer.json`, and
/// `meta.json`.
pub fn save_team(dir: &Path, team: &CtdeTeam, meta: &TeamMeta) -> Result<()> {
    team.validate()?;
    if meta.n_agents != team.n_agents() {
        return Err(Error::config(format!(
            "meta says {} agents, team has {}",
            meta.n_agents,
            team.n_agents()
        )));
    }
    if meta.algo != team.mixer.algo_name() {
        return Err(Error::config(format!(
            "meta algo `{}` does not match mixer `{}`",
            meta.algo,
            team.mixer.algo_name()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, policy) in team.policies.iter().enumerate() {
        save_network(policy.net(), &agent_file(dir, i))?;
    }
    let mixer_file = match &team.mixer {
        MixerKind::Vdn(m) => MixerFile::Vdn {
            n_agents: m.n_agents(),
        },
        MixerKind::Qmix(m) => MixerFile::Qmix {
            n_agents: m.n_agents(),
            embed: m.embed(),
            nets: m
                .nets()
                .iter()
                .map(|(name, net)| (name.clone(), Checkpoint::from_network(net)))
                .collect(),
        },
    };
    let mixer_path = dir.join("mixer.json");
    fs::write(
        &mixer_path,
        serde_json::to_string_pretty(&mixer_file)?,
    )
    .map_err(|e| Error::io(&mixer_path, e))?;
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(meta)?)
        .map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Loads a team directory written by [`save_team`], cross-checking the
/// networks against the recorded environment shape.
pub fn load_team(dir: &Path) -> Result<(CtdeTeam, TeamMeta)> {
    let meta_path = dir.join("meta.json");
    let meta_raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TeamMeta = serde_json::from_str(&meta_raw)
        .map_err(|e| Error::decode("meta.json", format!("{e}")))?;

    let mut policies = Vec::with_capacity(meta.n_agents);
    for i in 0..meta.n_agents {
        let net = load_network(&agent_file(dir, i))?;
        let want_in = meta.history_depth * meta.env_spec.obs_dim;
        if net.input_dim() != want_in {
            return Err(Error::decode(
                format!("agent_{i}.json"),
                format!("input dim {} but meta implies {want_in}", net.input_dim()),
            ));
        }
        if net.output_dim() != meta.env_spec.actions_per_agent {
            return Err(Error::decode(
                format!("agent_{i}.json"),
                format!(
                    "output dim {} but environment has {} actions",
                    net.output_dim(),
                    meta.env_spec.actions_per_agent
                ),
            ));
        }
        policies.push(AgentPolicy::new(net));
    }

    let mixer_path = dir.join("mixer.json");
    let mixer_raw = fs::read_to_string(&mixer_path).map_err(|e| Error::io(&mixer_path, e))?;
    let mixer_file: MixerFile = serde_json::from_str(&mixer_raw)
        .map_err(|e| Error::decode("mixer.json", format!("{e}")))?;
    let mixer = match mixer_file {
        MixerFile::Vdn { n_agents } => MixerKind::Vdn(VdnMixer::new(n_agents)?),
        MixerFile::Qmix {
            n_agents,
            embed,
            nets,
        } => {
            let mut built = BTreeMap::new();
            for (name, ckpt) in nets {
                built.insert(name, ckpt.into_network()?);
            }
            MixerKind::Qmix(QmixMixer::from_parts(n_agents, embed, built)?)
        }
    };
    if mixer.algo_name() != meta.algo {
        return Err(Error::decode(
            "mixer.json",
            format!(
                "mixer is `{}` but meta says `{}`",
                mixer.algo_name(),
                meta.algo
            ),
        ));
    }

    let team = CtdeTeam {
        policies,
        mixer,
        history_depth: meta.history_depth,
    };
    team.validate()?;
    Ok((team, meta))
}
