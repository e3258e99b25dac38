use super::mixer::JointMixer;
use super::policy::greedy_index;
use super::team::CtdeTeam;
use crate::diffcore::Tensor;
use crate::envs::JointAction;
use crate::{Error, Result};

/// Outcome of checking that individual greedy choices are also jointly
/// greedy under a mixer: the composed per-agent argmax must attain the
/// maximum mixed value over every joint action.
#[derive(Debug, Clone)]
pub struct IgmReport {
    pub joint_actions_checked: usize,
    pub greedy_joint: JointAction,
    pub greedy_value: f64,
    pub best_joint: JointAction,
    pub best_value: f64,
    pub consistent: bool,
}

/// Exhaustively verifies greedy consistency for explicit per-agent value
/// tables under `mixer` at `state`. Refuses to enumerate more than `cap`
/// joint actions.
pub fn igm_check(
    mixer: &dyn JointMixer,
    state: &Tensor,
    q_tables: &[Vec<f64>],
    cap: u128,
) -> Result<IgmReport> {
    if q_tables.len() != mixer.n_agents() {
        return Err(Error::usage(format!(
            "{} value tables for a {}-agent mixer",
            q_tables.len(),
            mixer.n_agents()
        )));
    }
    if q_tables.iter().any(|t| t.is_empty()) {
        return Err(Error::usage("every agent needs at least one action".to_string()));
    }
    let mut total: u128 = 1;
    for table in q_tables {
        total = total
            .checked_mul(table.len() as u128)
            .ok_or(Error::EnumerationCap {
                joint_actions: u128::MAX,
                cap,
            })?;
    }
    if total > cap {
        return Err(Error::EnumerationCap {
            joint_actions: total,
            cap,
        });
    }

    let greedy: Vec<usize> = q_tables.iter().map(|t| greedy_index(t)).collect();
    let greedy_values: Vec<f64> = greedy.iter().zip(q_tables).map(|(&a, t)| t[a]).collect();
    let greedy_value = mixer.mix(state, &greedy_values)?;

    let mut current = vec![0usize; q_tables.len()];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_joint = current.clone();
    let mut checked = 0usize;
    loop {
        let values: Vec<f64> = current.iter().zip(q_tables).map(|(&a, t)| t[a]).collect();
        let mixed = mixer.mix(state, &values)?;
        checked += 1;
        if mixed > best_value {
            best_value = mixed;
            best_joint = current.clone();
        }
        let mut pos = current.len();
        'inc: loop {
            if pos == 0 {
                let consistent = greedy_value == best_value;
                return Ok(IgmReport {
                    joint_actions_checked: checked,
                    greedy_joint: JointAction(greedy),
                    greedy_value,
                    best_joint: JointAction(best_joint),
                    best_value,
                    consistent,
                });
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < q_tables[pos].len() {
                break 'inc;
            }
            current[pos] = 0;
        }
    }
}

/// Greedy-consistency check for a live team at one perceived situation.
pub fn igm_check_team(
    team: &CtdeTeam,
    state: &Tensor,
    encoded: &[Tensor],
    cap: u128,
) -> Result<IgmReport> {
    let mut tables = Vec::with_capacity(team.n_agents());
    for (policy, enc) in team.policies.iter().zip(encoded) {
        tables.push(policy.q_values(enc)?.values().to_vec());
    }
    igm_check(&team.mixer, state, &tables, cap)
}
