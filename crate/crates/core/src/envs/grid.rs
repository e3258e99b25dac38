use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_joint_action, Env, EnvSpec, JointAction, StepOutcome};
use crate::diffcore::Tensor;
use crate::{Error, Result};

const GRID: usize = 5;
const N_HUNTERS: usize = 3;
const N_ACTIONS: usize = 7; // no-op, stop, north, south, east, west, attack
const MAX_STEPS: usize = 25;
const VIEW_RADIUS: usize = 3;
const ATTACK_RANGE: usize = 1;
const HUNTER_DAMAGE: f64 = 0.25;
const PREY_DAMAGE: f64 = 0.34;
const DAMAGE_WEIGHT: f64 = 4.0;
const KILL_BONUS: f64 = 5.0;
const WIN_BONUS: f64 = 10.0;
const STEP_COST: f64 = 0.02;

const ACT_NOOP: usize = 0;
const ACT_STOP: usize = 1;
const ACT_NORTH: usize = 2;
const ACT_SOUTH: usize = 3;
const ACT_EAST: usize = 4;
const ACT_WEST: usize = 5;
const ACT_ATTACK: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Unit {
    row: usize,
    col: usize,
    health: f64,
}

impl Unit {
    fn alive(&self) -> bool {
        self.health > 0.0
    }

    fn health_clamped(&self) -> f64 {
        self.health.max(0.0)
    }
}

fn chebyshev(a: &Unit, b: &Unit) -> usize {
    a.row.abs_diff(b.row).max(a.col.abs_diff(b.col))
}

fn euclid(a: &Unit, b: &Unit) -> f64 {
    let dr = a.row as f64 - b.row as f64;
    let dc = a.col as f64 - b.col as f64;
    (dr * dr + dc * dc).sqrt()
}

fn moved(row: usize, col: usize, action: usize) -> (usize, usize) {
    // Moves that would leave the grid are absorbed by the wall.
    match action {
        ACT_NORTH => (row.saturating_sub(1), col),
        ACT_SOUTH => ((row + 1).min(GRID - 1), col),
        ACT_EAST => (row, (col + 1).min(GRID - 1)),
        ACT_WEST => (row, col.saturating_sub(1)),
        _ => (row, col),
    }
}

/// Readable copy of the full simulation state, for tooling and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSnapshot {
    /// `(row, col, health)` per hunter; health is clamped at zero.
    pub hunters: Vec<(usize, usize, f64)>,
    pub prey: (usize, usize, f64),
    pub steps: usize,
}

/// Pursuit game on a 5x5 grid: three hunters chase one scripted prey.
///
/// Hunters move one cell per step or attack anything within one cell of
/// themselves (diagonals included). Every other step the prey either strikes
/// back at the closest adjacent hunter or flees to the neighbouring cell
/// that maximizes its smallest distance to the pack. The team is rewarded
/// for damage, for the kill, and slightly for closing in; it wins when the
/// prey dies and loses when all hunters are dead or time runs out.
#[derive(Debug, Clone)]
pub struct GridCapture {
    spec: EnvSpec,
    hunters: Vec<Unit>,
    prey: Unit,
    steps: usize,
    finished: bool,
    started: bool,
}

impl GridCapture {
    /// The hunter action set. Actions 0 and 1 both hold position; dead
    /// hunters are treated as emitting action 0 regardless of input.
    pub const ACT_NOOP: usize = ACT_NOOP;
    pub const ACT_STOP: usize = ACT_STOP;
    pub const ACT_NORTH: usize = ACT_NORTH;
    pub const ACT_SOUTH: usize = ACT_SOUTH;
    pub const ACT_EAST: usize = ACT_EAST;
    pub const ACT_WEST: usize = ACT_WEST;
    pub const ACT_ATTACK: usize = ACT_ATTACK;

    pub fn new() -> Self {
        let spec = EnvSpec {
            n_agents: N_HUNTERS,
            actions_per_agent: N_ACTIONS,
            obs_dim: 3 + 4 * N_HUNTERS, // own triple + one block per other unit
            state_dim: 3 * N_HUNTERS + 3,
            obs_range: (0.0, 1.0),
            gamma: 0.99,
            max_steps: MAX_STEPS,
        };
        Self {
            spec,
            hunters: Vec::new(),
            prey: Unit {
                row: 0,
                col: 0,
                health: 0.0,
            },
            steps: 0,
            finished: true,
            started: false,
        }
    }

    fn scale() -> f64 {
        (GRID - 1) as f64
    }

    fn max_dist() -> f64 {
        (2.0 * Self::scale() * Self::scale()).sqrt()
    }

    /// Shaping potential: negative mean distance from alive hunters to the
    /// prey, scaled so the whole-episode contribution stays within one
    /// reward unit. Zero once the chase is decided either way.
    fn potential(&self) -> f64 {
        if !self.prey.alive() {
            return 0.0;
        }
        let alive: Vec<&Unit> = self.hunters.iter().filter(|h| h.alive()).collect();
        if alive.is_empty() {
            return 0.0;
        }
        let mean: f64 =
            alive.iter().map(|h| euclid(h, &self.prey)).sum::<f64>() / alive.len() as f64;
        -mean / Self::max_dist()
    }

    fn observation(&self, agent: usize) -> Tensor {
        let me = &self.hunters[agent];
        let mut v = vec![0.0; self.spec.obs_dim];
        if !me.alive() {
            return Tensor::vector(v);
        }
        let scale = Self::scale();
        v[0] = me.row as f64 / scale;
        v[1] = me.col as f64 / scale;
        v[2] = me.health_clamped();
        let mut offset = 3;
        let others = self
            .hunters
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != agent)
            .map(|(_, h)| h)
            .chain(std::iter::once(&self.prey));
        for unit in others {
            if unit.alive() && chebyshev(me, unit) <= VIEW_RADIUS {
                v[offset] = euclid(me, unit) / Self::max_dist();
                v[offset + 1] = (unit.row as f64 - me.row as f64 + scale) / (2.0 * scale);
                v[offset + 2] = (unit.col as f64 - me.col as f64 + scale) / (2.0 * scale);
                v[offset + 3] = unit.health_clamped();
            }
            offset += 4;
        }
        Tensor::vector(v)
    }

    fn observations(&self) -> Vec<Tensor> {
        (0..N_HUNTERS).map(|i| self.observation(i)).collect()
    }

    fn state(&self) -> Tensor {
        let scale = Self::scale();
        let mut v = Vec::with_capacity(self.spec.state_dim);
        for unit in self.hunters.iter().chain(std::iter::once(&self.prey)) {
            v.push(unit.row as f64 / scale);
            v.push(unit.col as f64 / scale);
            v.push(unit.health_clamped());
        }
        Tensor::vector(v)
    }

    pub fn snapshot(&self) -> GridSnapshot {
        GridSnapshot {
            hunters: self
                .hunters
                .iter()
                .map(|h| (h.row, h.col, h.health_clamped()))
                .collect(),
            prey: (self.prey.row, self.prey.col, self.prey.health_clamped()),
            steps: self.steps,
        }
    }

    #[cfg(test)]
    fn force_layout(&mut self, hunters: &[(usize, usize)], prey: (usize, usize)) {
        assert_eq!(hunters.len(), N_HUNTERS);
        for (unit, &(row, col)) in self.hunters.iter_mut().zip(hunters) {
            unit.row = row;
            unit.col = col;
        }
        self.prey.row = prey.0;
        self.prey.col = prey.1;
    }

    /// Scripted prey turn: strike back if cornered, otherwise flee to the
    /// neighbouring cell (or stay put) with the largest minimum distance to
    /// any alive hunter, breaking ties toward the lowest cell index.
    fn prey_turn(&mut self) {
        if !self.prey.alive() {
            return;
        }
        let alive: Vec<usize> = (0..N_HUNTERS)
            .filter(|&i| self.hunters[i].alive())
            .collect();
        if alive.is_empty() {
            return;
        }
        if let Some(&target) = alive
            .iter()
            .find(|&&i| chebyshev(&self.hunters[i], &self.prey) <= ATTACK_RANGE)
        {
            self.hunters[target].health -= PREY_DAMAGE;
            return;
        }
        let mut best: Option<(f64, usize, (usize, usize))> = None;
        for action in [ACT_STOP, ACT_NORTH, ACT_SOUTH, ACT_EAST, ACT_WEST] {
            let (row, col) = moved(self.prey.row, self.prey.col, action);
            let candidate = Unit {
                row,
                col,
                health: self.prey.health,
            };
            let min_dist = alive
                .iter()
                .map(|&i| euclid(&self.hunters[i], &candidate))
                .fold(f64::INFINITY, f64::min);
            let cell_index = row * GRID + col;
            let better = match &best {
                None => true,
                Some((d, idx, _)) => min_dist > *d || (min_dist == *d && cell_index < *idx),
            };
            if better {
                best = Some((min_dist, cell_index, (row, col)));
            }
        }
        let (_, _, (row, col)) = best.expect("candidate list is never empty");
        self.prey.row = row;
        self.prey.col = col;
    }
}

impl Default for GridCapture {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for GridCapture {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn name(&self) -> &'static str {
        "grid_capture"
    }

    fn reset(&mut self, seed: u64) -> (Tensor, Vec<Tensor>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Hunters start on distinct cells of the top two rows, the prey
        // somewhere on row 3, so the pack usually sees its target at once.
        let mut taken: Vec<(usize, usize)> = Vec::new();
        while taken.len() < N_HUNTERS {
            let cell = (rng.random_range(0..2usize), rng.random_range(0..GRID));
            if !taken.contains(&cell) {
                taken.push(cell);
            }
        }
        self.hunters = taken
            .into_iter()
            .map(|(row, col)| Unit {
                row,
                col,
                health: 1.0,
            })
            .collect();
        self.prey = Unit {
            row: 3,
            col: rng.random_range(0..GRID),
            health: 1.0,
        };
        self.steps = 0;
        self.finished = false;
        self.started = true;
        (self.state(), self.observations())
    }

    fn step(&mut self, action: &JointAction) -> Result<StepOutcome> {
        if !self.started || self.finished {
            return Err(Error::usage(
                "step called on a finished or unstarted episode".to_string(),
            ));
        }
        check_joint_action(&self.spec, action)?;

        let potential_before = self.potential();

        // Movement, then attacks; dead hunters' submitted actions are
        // ignored entirely.
        for (i, &a) in action.actions().iter().enumerate() {
            if self.hunters[i].alive() && matches!(a, ACT_NORTH | ACT_SOUTH | ACT_EAST | ACT_WEST)
            {
                let (row, col) = moved(self.hunters[i].row, self.hunters[i].col, a);
                self.hunters[i].row = row;
                self.hunters[i].col = col;
            }
        }
        let mut damage_dealt = 0.0;
        for (i, &a) in action.actions().iter().enumerate() {
            if a == ACT_ATTACK
                && self.hunters[i].alive()
                && self.prey.alive()
                && chebyshev(&self.hunters[i], &self.prey) <= ATTACK_RANGE
            {
                let applied = HUNTER_DAMAGE.min(self.prey.health);
                self.prey.health -= applied;
                damage_dealt += applied;
            }
        }
        let win = !self.prey.alive();

        if self.steps % 2 == 1 {
            self.prey_turn();
        }

        let mut reward = DAMAGE_WEIGHT * damage_dealt - STEP_COST;
        reward += self.potential() - potential_before;
        if win {
            reward += KILL_BONUS + WIN_BONUS;
        }

        self.steps += 1;
        let team_dead = self.hunters.iter().all(|h| !h.alive());
        let done = win || team_dead || self.steps >= MAX_STEPS;
        self.finished = done;

        Ok(StepOutcome {
            next_state: self.state(),
            next_obs: self.observations(),
            reward,
            done,
            win,
        })
    }

    fn alive(&self) -> Vec<bool> {
        self.hunters.iter().map(Unit::alive).collect()
    }
}
