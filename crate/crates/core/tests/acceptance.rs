//! The acceptance gate: ten sequential checks covering gradient
//! correctness, mixer structure, value-fitting accuracy, search quality,
//! perturbation containment, end-to-end attack effect, and the reporting
//! protocol. One `ACCEPTANCE <n>: PASS/FAIL` line is printed per check and
//! the process exits nonzero if any fails.
//!
//! The slow part — training a QMIX team plus a fitted joint action-value
//! on the grid task — happens once up front and is shared by the checks
//! that need a competent victim.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use marlprobe::ctde::{
    env_fingerprint, greedy_index, igm_check, save_team, td_train, team_fingerprint, CtdeTeam,
    JointMixer, MixerChoice, MixerKind, QmixMixer, TdTrainConfig, TeamMeta, VdnMixer,
};
use marlprobe::deselect::{apply_substitutions, select_attack, DeConfig};
use marlprobe::diffcore::{HiddenActivation, MlpSpec, Network, OutputActivation, Tensor};
use marlprobe::envs::{CoopMatrixGame, Env, EnvSpec, GridCapture, JointAction, StepOutcome};
use marlprobe::harness::{
    evaluate, reward_display, run_episode, AttackMethod, AttackObjective, AttackSection,
    CheckpointRef, DeSection, EnvSection, EpisodeResult, EvalSection, ObjectiveSource, Report,
    RunConfig, CSV_HEADER,
};
use marlprobe::jointq::{save_joint_q, train_sarsa, JointQNet, SarsaBehavior, SarsaConfig};
use marlprobe::perturb::{attack_random, attack_targeted, attack_untargeted, AttackBudget};
use marlprobe::seeding::derive_seed;

fn main() -> ExitCode {
    println!("acceptance gate: training the fixture team (the slow step, roughly a minute)...");
    let fix = fixture();
    println!(
        "fixture ready in {:.0} s: qmix team (recent win rate {:.2}) and fitted joint values on grid_capture",
        fix.train_secs, fix.recent_win_rate
    );

    let criteria: &[(u32, &str, fn() -> Result<String, String>)] = &[
        (1, "analytic gradients match central finite differences", criterion_1),
        (2, "additive mixing is exact and greedy-consistent", criterion_2),
        (3, "monotone mixing never decreases in a per-agent value", criterion_3),
        (4, "victim search attains the exhaustive minimum", criterion_4),
        (5, "fitted joint action-values match ground truth", criterion_5),
        (6, "perturbations respect the ball and box constraints", criterion_6),
        (
            7,
            "targeted perturbations flip actions where a zero budget cannot",
            criterion_7,
        ),
        (8, "victim search degrades the team more than random noise", criterion_8),
        (9, "disabled attacks reproduce the clean trace bit-exactly", criterion_9),
        (10, "reports keep the protocol: defaults, formatting, tables", criterion_10),
    ];

    let mut failed = Vec::new();
    for &(n, label, check) in criteria {
        let clock = Instant::now();
        match check() {
            Ok(detail) => println!(
                "ACCEPTANCE {n}: PASS — {label} ({detail}; {:.1} s)",
                clock.elapsed().as_secs_f64()
            ),
            Err(msg) => {
                println!("ACCEPTANCE {n}: FAIL — {label}: {msg}");
                failed.push(n);
            }
        }
    }

    if failed.is_empty() {
        println!("acceptance gate: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance gate: FAILED criteria {failed:?}");
        ExitCode::FAILURE
    }
}

fn es<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Shared fixture: a trained team and a fitted joint action-value, also
// saved to disk so the config-driven checks can load them back.
// ---------------------------------------------------------------------------

struct Fixture {
    _dir: tempfile::TempDir,
    team_dir: PathBuf,
    qjt_path: PathBuf,
    team: CtdeTeam,
    qnet: JointQNet,
    recent_win_rate: f64,
    train_secs: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(build_fixture)
}

fn build_fixture() -> Fixture {
    let start = Instant::now();
    let mut env = GridCapture::new();
    let cfg = TdTrainConfig {
        algo: MixerChoice::Qmix,
        episodes: 6000,
        seed: 0,
        ..TdTrainConfig::default()
    };
    let outcome = td_train(&mut env, &cfg).expect("fixture team training");
    let team = outcome.team;
    let tail = &outcome.episode_wins[outcome.episode_wins.len().saturating_sub(500)..];
    let recent_win_rate =
        tail.iter().filter(|&&w| w).count() as f64 / tail.len().max(1) as f64;

    let sarsa_cfg = SarsaConfig {
        episodes: 3000,
        seed: 0,
        ..SarsaConfig::default()
    };
    let fitted = train_sarsa(
        &mut env,
        SarsaBehavior::TeamEpsilonGreedy {
            team: &team,
            epsilon: 0.3,
        },
        &sarsa_cfg,
    )
    .expect("fixture joint-value fitting");

    let dir = tempfile::tempdir().expect("fixture tempdir");
    let spec = env.spec().clone();
    let fp = env_fingerprint(env.name(), &spec).expect("environment fingerprint");
    let team_dir = dir.path().join("team");
    let meta = TeamMeta {
        env_name: env.name().to_string(),
        env_spec: spec,
        algo: "qmix".to_string(),
        n_agents: team.n_agents(),
        history_depth: team.history_depth,
        fingerprint: fp.clone(),
        seed: 0,
        episodes_trained: cfg.episodes,
    };
    save_team(&team_dir, &team, &meta).expect("save fixture team");
    let qjt_path = dir.path().join("qjt.json");
    let source = format!(
        "qmix:{}",
        team_fingerprint(&team).expect("team fingerprint")
    );
    save_joint_q(&qjt_path, &fitted.qnet, env.name(), &fp, &source).expect("save fixture values");

    Fixture {
        _dir: dir,
        team_dir,
        qjt_path,
        team,
        qnet: fitted.qnet,
        recent_win_rate,
        train_secs: start.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: every analytic gradient in the toolkit agrees with central
// finite differences — plain regression losses, mixed TD losses through
// both mixers (network and mixer parameters alike), and the attack losses'
// input gradients. 100 seeded cases, every coordinate checked.
// ---------------------------------------------------------------------------

const GRAD_TOL: f64 = 1e-4;
const FD_H: f64 = 1e-5;

fn check_grad(label: &str, analytic: f64, fd: f64, worst: &mut f64) -> Result<(), String> {
    let err = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
    *worst = worst.max(err);
    if err > GRAD_TOL {
        return Err(format!(
            "{label}: analytic {analytic:.8e} vs finite difference {fd:.8e} (relative error {err:.2e})"
        ));
    }
    Ok(())
}

fn criterion_1() -> Result<String, String> {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..40 {
        grad_case_regression(case, &mut worst)?;
    }
    for case in 0..30 {
        grad_case_mixer_td(case, case % 2 == 0, &mut worst)?;
    }
    for case in 0..30 {
        grad_case_attack(case, case % 2 == 0, &mut worst)?;
    }
    let secs = clock.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.1} s, budget is 10 s"));
    }
    Ok(format!("100 cases, worst relative error {worst:.1e}"))
}

fn grad_case_regression(case: u64, worst: &mut f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "grad-regression", case));
    let d_in = rng.random_range(2..=5);
    let d_hidden = rng.random_range(3..=8);
    let d_out = rng.random_range(1..=4);
    let spec = MlpSpec::new(
        vec![d_in, d_hidden, d_out],
        HiddenActivation::Tanh,
        OutputActivation::Identity,
    )
    .map_err(es)?;
    let net = Network::init(spec, &mut rng).map_err(es)?;
    let x = Tensor::vector((0..d_in).map(|_| rng.random_range(-1.0..1.0)).collect());
    let target: Vec<f64> = (0..d_out).map(|_| rng.random_range(-1.0..1.0)).collect();

    let loss = |net: &Network, x: &Tensor| -> Result<f64, String> {
        let y = net.forward(x).map_err(es)?;
        Ok(y.values()
            .iter()
            .zip(&target)
            .map(|(y, t)| (y - t) * (y - t))
            .sum())
    };

    let y = net.forward(&x).map_err(es)?;
    let upstream = Tensor::vector(
        y.values()
            .iter()
            .zip(&target)
            .map(|(y, t)| 2.0 * (y - t))
            .collect(),
    );
    let grads = net.backward(&x, &upstream).map_err(es)?;

    for (name, grad) in &grads.param_grads {
        for idx in 0..grad.len() {
            let mut plus = net.clone();
            plus.params.get_mut(name).map_err(es)?.values_mut()[idx] += FD_H;
            let mut minus = net.clone();
            minus.params.get_mut(name).map_err(es)?.values_mut()[idx] -= FD_H;
            let fd = (loss(&plus, &x)? - loss(&minus, &x)?) / (2.0 * FD_H);
            check_grad(
                &format!("regression case {case}, {name}[{idx}]"),
                grad.values()[idx],
                fd,
                worst,
            )?;
        }
    }
    for idx in 0..x.len() {
        let mut xp = x.clone();
        xp.values_mut()[idx] += FD_H;
        let mut xm = x.clone();
        xm.values_mut()[idx] -= FD_H;
        let fd = (loss(&net, &xp)? - loss(&net, &xm)?) / (2.0 * FD_H);
        check_grad(
            &format!("regression case {case}, input[{idx}]"),
            grads.input_grad.values()[idx],
            fd,
            worst,
        )?;
    }
    Ok(())
}

fn grad_case_mixer_td(case: u64, use_qmix: bool, worst: &mut f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "grad-mixer", case));
    let n_agents = 2usize;
    let n_actions = 3usize;
    let enc_dim = 3usize;
    let state_dim = 4usize;
    let spec = MlpSpec::new(
        vec![enc_dim, 5, n_actions],
        HiddenActivation::Tanh,
        OutputActivation::Identity,
    )
    .map_err(es)?;
    let nets: Vec<Network> = (0..n_agents)
        .map(|_| Network::init(spec.clone(), &mut rng))
        .collect::<Result<_, _>>()
        .map_err(es)?;
    let encodings: Vec<Tensor> = (0..n_agents)
        .map(|_| Tensor::vector((0..enc_dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let state = Tensor::vector((0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    let actions: Vec<usize> = (0..n_agents)
        .map(|_| rng.random_range(0..n_actions))
        .collect();
    let td_target = rng.random_range(-1.0..1.0);
    let mixer = if use_qmix {
        MixerKind::Qmix(QmixMixer::init(n_agents, state_dim, 6, &mut rng).map_err(es)?)
    } else {
        MixerKind::Vdn(VdnMixer::new(n_agents).map_err(es)?)
    };
    let kind = if use_qmix { "qmix" } else { "vdn" };

    let td_loss = |nets: &[Network], mixer: &dyn JointMixer| -> Result<f64, String> {
        let mut chosen = Vec::with_capacity(n_agents);
        for (net, (enc, &a)) in nets.iter().zip(encodings.iter().zip(&actions)) {
            chosen.push(net.forward(enc).map_err(es)?.values()[a]);
        }
        let total = mixer.mix(&state, &chosen).map_err(es)?;
        Ok((total - td_target) * (total - td_target))
    };

    let mut chosen = Vec::with_capacity(n_agents);
    for (net, (enc, &a)) in nets.iter().zip(encodings.iter().zip(&actions)) {
        chosen.push(net.forward(enc).map_err(es)?.values()[a]);
    }
    let total = mixer.mix(&state, &chosen).map_err(es)?;
    let mix_grad = mixer
        .mix_backward(&state, &chosen, 2.0 * (total - td_target))
        .map_err(es)?;

    for agent in 0..n_agents {
        let mut upstream = vec![0.0; n_actions];
        upstream[actions[agent]] = mix_grad.dq[agent];
        let bundle = nets[agent]
            .backward(&encodings[agent], &Tensor::vector(upstream))
            .map_err(es)?;
        for (name, grad) in &bundle.param_grads {
            for idx in 0..grad.len() {
                let mut plus = nets.clone();
                plus[agent].params.get_mut(name).map_err(es)?.values_mut()[idx] += FD_H;
                let mut minus = nets.clone();
                minus[agent].params.get_mut(name).map_err(es)?.values_mut()[idx] -= FD_H;
                let fd = (td_loss(&plus, &mixer)? - td_loss(&minus, &mixer)?) / (2.0 * FD_H);
                check_grad(
                    &format!("td case {case} ({kind}), agent {agent} {name}[{idx}]"),
                    grad.values()[idx],
                    fd,
                    worst,
                )?;
            }
        }
    }

    if let MixerKind::Qmix(qmix) = &mixer {
        for (net_name, bundle) in &mix_grad.nets {
            for (param_name, grad) in &bundle.param_grads {
                for idx in 0..grad.len() {
                    let shifted_loss = |delta: f64| -> Result<f64, String> {
                        let mut cloned = qmix.nets().clone();
                        cloned
                            .get_mut(net_name)
                            .expect("known mixer net")
                            .params
                            .get_mut(param_name)
                            .map_err(es)?
                            .values_mut()[idx] += delta;
                        let shifted = MixerKind::Qmix(
                            QmixMixer::from_parts(n_agents, qmix.embed(), cloned).map_err(es)?,
                        );
                        td_loss(&nets, &shifted)
                    };
                    let fd = (shifted_loss(FD_H)? - shifted_loss(-FD_H)?) / (2.0 * FD_H);
                    check_grad(
                        &format!("td case {case} (qmix), mixer {net_name}.{param_name}[{idx}]"),
                        grad.values()[idx],
                        fd,
                        worst,
                    )?;
                }
            }
        }
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - top).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

fn grad_case_attack(case: u64, targeted: bool, worst: &mut f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "grad-attack", case));
    let d_obs = rng.random_range(3..=6);
    let n_actions = rng.random_range(2..=5);
    let spec = MlpSpec::new(
        vec![d_obs, 7, n_actions],
        HiddenActivation::Tanh,
        OutputActivation::Identity,
    )
    .map_err(es)?;
    let net = Network::init(spec, &mut rng).map_err(es)?;
    let x = Tensor::vector((0..d_obs).map(|_| rng.random_range(0.0..1.0)).collect());

    let logits = net.forward(&x).map_err(es)?;
    let clean = greedy_index(logits.values());
    let target = (clean + 1 + rng.random_range(0..n_actions - 1)) % n_actions;

    let loss = |x: &Tensor| -> Result<f64, String> {
        let probs = softmax(net.forward(x).map_err(es)?.values());
        Ok(if targeted {
            -probs[target].ln() + probs[clean].ln()
        } else {
            probs[clean].ln()
        })
    };

    let mut upstream = vec![0.0; n_actions];
    if targeted {
        upstream[clean] += 1.0;
        upstream[target] -= 1.0;
    } else {
        let probs = softmax(logits.values());
        for (k, u) in upstream.iter_mut().enumerate() {
            *u = if k == clean { 1.0 - probs[k] } else { -probs[k] };
        }
    }
    let grads = net.backward(&x, &Tensor::vector(upstream)).map_err(es)?;

    let kind = if targeted { "targeted" } else { "untargeted" };
    for idx in 0..d_obs {
        let mut xp = x.clone();
        xp.values_mut()[idx] += FD_H;
        let mut xm = x.clone();
        xm.values_mut()[idx] -= FD_H;
        let fd = (loss(&xp)? - loss(&xm)?) / (2.0 * FD_H);
        check_grad(
            &format!("attack case {case} ({kind}), input[{idx}]"),
            grads.input_grad.values()[idx],
            fd,
            worst,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Criterion 2: additive mixing equals the exact sum, and per-agent greedy
// choices assemble the true joint maximum, verified against an independent
// brute-force enumeration.
// ---------------------------------------------------------------------------

fn for_each_joint(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.iter().any(|&d| d == 0) {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    'outer: loop {
        f(&idx);
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                continue 'outer;
            }
            idx[k] = 0;
        }
        return;
    }
}

fn criterion_2() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "additivity", 0));
    for trial in 0..10_000u64 {
        let n = rng.random_range(2..=5);
        let mixer = VdnMixer::new(n).map_err(es)?;
        let state = Tensor::vector((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mixed = mixer.mix(&state, &values).map_err(es)?;
        let sum: f64 = values.iter().sum();
        if (mixed - sum).abs() > 1e-12 {
            return Err(format!(
                "additivity trial {trial}: |mixed - sum| = {:.3e}",
                (mixed - sum).abs()
            ));
        }
    }

    for trial in 0..1_000u64 {
        let n = rng.random_range(2..=3);
        let tables: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let k = rng.random_range(2..=5);
                (0..k).map(|_| rng.random_range(-5.0..5.0)).collect()
            })
            .collect();
        let mixer = MixerKind::Vdn(VdnMixer::new(n).map_err(es)?);
        let state = Tensor::vector(vec![0.0]);
        let report = igm_check(&mixer, &state, &tables, 1_000_000).map_err(es)?;
        if !report.consistent {
            return Err(format!("greedy trial {trial}: greedy joint action is not a maximizer"));
        }
        // Independent oracle: enumerate every joint action by hand.
        let dims: Vec<usize> = tables.iter().map(Vec::len).collect();
        let mut best = f64::NEG_INFINITY;
        for_each_joint(&dims, |joint| {
            let total: f64 = joint.iter().zip(&tables).map(|(&a, t)| t[a]).sum();
            if total > best {
                best = total;
            }
        });
        if (report.best_value - best).abs() > 1e-12 {
            return Err(format!(
                "greedy trial {trial}: reported best {:.12} vs enumerated {best:.12}",
                report.best_value
            ));
        }
        if (report.greedy_value - best).abs() > 1e-12 {
            return Err(format!(
                "greedy trial {trial}: greedy value {:.12} misses the maximum {best:.12}",
                report.greedy_value
            ));
        }
    }
    Ok("10000 additivity trials within 1e-12, 1000 greedy trials match brute force".to_string())
}

// ---------------------------------------------------------------------------
// Criterion 3: the monotone mixer's finite-difference slope in every
// per-agent value stays nonnegative, on fresh mixers and on the trained
// fixture mixer.
// ---------------------------------------------------------------------------

fn min_mix_slope(
    mixer: &dyn JointMixer,
    n_agents: usize,
    state_dim: usize,
    state_range: (f64, f64),
    value_range: (f64, f64),
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64, String> {
    let h = 1e-4;
    let mut min_slope = f64::INFINITY;
    for _ in 0..probes {
        let state = Tensor::vector(
            (0..state_dim)
                .map(|_| rng.random_range(state_range.0..state_range.1))
                .collect(),
        );
        let values: Vec<f64> = (0..n_agents)
            .map(|_| rng.random_range(value_range.0..value_range.1))
            .collect();
        for agent in 0..n_agents {
            let mut plus = values.clone();
            plus[agent] += h;
            let mut minus = values.clone();
            minus[agent] -= h;
            let slope = (mixer.mix(&state, &plus).map_err(es)?
                - mixer.mix(&state, &minus).map_err(es)?)
                / (2.0 * h);
            min_slope = min_slope.min(slope);
            if slope < -1e-6 {
                return Err(format!(
                    "slope {slope:.3e} in agent {agent}'s value at a random probe"
                ));
            }
        }
    }
    Ok(min_slope)
}

fn criterion_3() -> Result<String, String> {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "monotonicity", 0));
    let mut min_fresh = f64::INFINITY;
    for _ in 0..10 {
        let n = rng.random_range(2..=4);
        let state_dim = rng.random_range(2..=6);
        let mixer =
            MixerKind::Qmix(QmixMixer::init(n, state_dim, 8, &mut rng).map_err(es)?);
        let slope = min_mix_slope(&mixer, n, state_dim, (-1.0, 1.0), (-3.0, 3.0), 100, &mut rng)?;
        min_fresh = min_fresh.min(slope);
    }

    let fix = fixture();
    let MixerKind::Qmix(_) = &fix.team.mixer else {
        return Err("the fixture team does not use the monotone mixer".to_string());
    };
    let spec = GridCapture::new().spec().clone();
    let min_trained = min_mix_slope(
        &fix.team.mixer,
        fix.team.n_agents(),
        spec.state_dim,
        (0.0, 1.0),
        (-5.0, 25.0),
        1000,
        &mut rng,
    )?;

    let secs = clock.elapsed().as_secs_f64();
    if secs >= 30.0 {
        return Err(format!("took {secs:.1} s, budget is 30 s"));
    }
    Ok(format!(
        "minimum slope {min_fresh:.2e} on fresh mixers, {min_trained:.2e} on the trained one"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4: on a 4-agent, 4-action one-shot game with two victims, the
// evolutionary search matches an exhaustive enumeration of all victim-pair
// and replacement-action combinations in at least 95 of 100 seeded runs.
// ---------------------------------------------------------------------------

fn criterion_4() -> Result<String, String> {
    let game = CoopMatrixGame::random(4, 4, 77).map_err(es)?;
    let clean = JointAction(vec![0, 0, 0, 0]);

    let mut oracle = f64::INFINITY;
    let mut combos = 0usize;
    for i in 0..4 {
        for j in (i + 1)..4 {
            for ai in 0..4 {
                for aj in 0..4 {
                    let action =
                        apply_substitutions(&clean, &[(i, ai), (j, aj)]).map_err(es)?;
                    oracle = oracle.min(game.payoff_of(&action).map_err(es)?);
                    combos += 1;
                }
            }
        }
    }
    if combos != 96 {
        return Err(format!("expected 96 victim/action combos, enumerated {combos}"));
    }

    let mut matches = 0usize;
    for seed in 0..100u64 {
        let clock = Instant::now();
        let cfg = DeConfig {
            population_size: 400,
            f: 0.5,
            cr: 0.9,
            generations: 20,
            victims: 2,
            seed,
        };
        let result = select_attack(&cfg, &[0, 1, 2, 3], 4, |subs| {
            let action = apply_substitutions(&clean, subs)?;
            game.payoff_of(&action)
        })
        .map_err(es)?;
        let secs = clock.elapsed().as_secs_f64();
        if secs >= 1.0 {
            return Err(format!("run with seed {seed} took {secs:.2} s, budget is 1 s"));
        }
        if (result.best_score - oracle).abs() <= 1e-12 {
            matches += 1;
        }
    }
    if matches < 95 {
        return Err(format!(
            "only {matches}/100 runs reached the exhaustive minimum {oracle:.6}"
        ));
    }
    Ok(format!("{matches}/100 runs hit the exhaustive minimum, every run under 1 s"))
}

// ---------------------------------------------------------------------------
// Criterion 5: the fitted joint action-value matches hand-derived returns
// on a two-step chain, and the payoff tensor on a one-shot game.
// ---------------------------------------------------------------------------

/// Two agents, two actions, two steps. Both steps pay `(2*a0 + a1)/10` and
/// observations equal the stage index, so with a uniform-random behavior
/// policy and no discounting the true values are `reward + 0.15` at the
/// first stage (0.15 being the mean final-step payoff) and `reward` at the
/// last.
struct ChainEnv {
    spec: EnvSpec,
    stage: usize,
    done: bool,
}

impl ChainEnv {
    fn new() -> Self {
        Self {
            spec: EnvSpec {
                n_agents: 2,
                actions_per_agent: 2,
                obs_dim: 1,
                state_dim: 1,
                obs_range: (0.0, 1.0),
                gamma: 1.0,
                max_steps: 2,
            },
            stage: 0,
            done: true,
        }
    }

    fn snapshot(&self) -> (Tensor, Vec<Tensor>) {
        let t = Tensor::vector(vec![self.stage as f64]);
        (t.clone(), vec![t.clone(), t])
    }
}

impl Env for ChainEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn name(&self) -> &'static str {
        "two_step_chain"
    }

    fn reset(&mut self, _seed: u64) -> (Tensor, Vec<Tensor>) {
        self.stage = 0;
        self.done = false;
        self.snapshot()
    }

    fn step(&mut self, action: &JointAction) -> marlprobe::Result<StepOutcome> {
        if self.done {
            return Err(marlprobe::Error::usage(
                "step on a finished episode".to_string(),
            ));
        }
        let acts = action.actions();
        let reward = (2 * acts[0] + acts[1]) as f64 / 10.0;
        self.stage += 1;
        self.done = self.stage >= self.spec.max_steps;
        let (next_state, next_obs) = self.snapshot();
        Ok(StepOutcome {
            next_state,
            next_obs,
            reward,
            done: self.done,
            win: false,
        })
    }
}

fn criterion_5() -> Result<String, String> {
    let clock = Instant::now();

    let mut chain = ChainEnv::new();
    let chain_cfg = SarsaConfig {
        episodes: 8000,
        lr: 0.02,
        hidden: vec![32],
        seed: 5,
        ..SarsaConfig::default()
    };
    let fit = train_sarsa(&mut chain, SarsaBehavior::Uniform, &chain_cfg).map_err(es)?;
    let mut worst_chain = 0.0f64;
    for stage in 0..2usize {
        let state = Tensor::vector(vec![stage as f64]);
        let future = if stage == 0 { 0.15 } else { 0.0 };
        for a0 in 0..2usize {
            for a1 in 0..2usize {
                let expected = (2 * a0 + a1) as f64 / 10.0 + future;
                let fitted = fit
                    .qnet
                    .predict(&state, &JointAction(vec![a0, a1]))
                    .map_err(es)?;
                let err = (fitted - expected).abs();
                worst_chain = worst_chain.max(err);
                if err >= 0.05 {
                    return Err(format!(
                        "chain stage {stage}, action ({a0},{a1}): fitted {fitted:.4} vs analytic {expected:.4}"
                    ));
                }
            }
        }
    }

    let mut game = CoopMatrixGame::random(2, 3, 5).map_err(es)?;
    let game_cfg = SarsaConfig {
        episodes: 3000,
        lr: 0.05,
        hidden: vec![24],
        seed: 6,
        ..SarsaConfig::default()
    };
    let fit = train_sarsa(&mut game, SarsaBehavior::Uniform, &game_cfg).map_err(es)?;
    let (state, _) = game.reset(0);
    let mut worst_game = 0.0f64;
    for a0 in 0..3usize {
        for a1 in 0..3usize {
            let action = JointAction(vec![a0, a1]);
            let expected = game.payoff_of(&action).map_err(es)?;
            let fitted = fit.qnet.predict(&state, &action).map_err(es)?;
            let err = (fitted - expected).abs();
            worst_game = worst_game.max(err);
            if err >= 0.1 {
                return Err(format!(
                    "one-shot game action ({a0},{a1}): fitted {fitted:.4} vs payoff {expected:.4}"
                ));
            }
        }
    }

    let secs = clock.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1} s, budget is 60 s"));
    }
    Ok(format!(
        "chain max error {worst_chain:.3} (< 0.05), one-shot max error {worst_game:.3} (< 0.1)"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 6: one hundred thousand invocations of every perturbation
// method stay inside the 0.1-radius ball around the clean observation and
// inside the observation box.
// ---------------------------------------------------------------------------

fn check_contained(
    clean: &Tensor,
    adversarial: &Tensor,
    epsilon: f64,
    range: (f64, f64),
    label: &str,
) -> Result<(), String> {
    let dist = clean.linf_distance(adversarial);
    if dist > epsilon + 1e-12 {
        return Err(format!("{label}: max deviation {dist:.6e} exceeds {epsilon}"));
    }
    for &v in adversarial.values() {
        if v < range.0 || v > range.1 {
            return Err(format!(
                "{label}: component {v:.6} escapes [{}, {}]",
                range.0, range.1
            ));
        }
    }
    Ok(())
}

fn criterion_6() -> Result<String, String> {
    let epsilon = 0.1;
    let range = (0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "containment", 0));
    let step_sizes = [0.05, 0.1, 0.25];
    let mut per_method = 0usize;
    for net_idx in 0..100u64 {
        let d_obs = rng.random_range(3..=6);
        let n_actions = rng.random_range(2..=5);
        let spec = MlpSpec::new(
            vec![d_obs, 6, n_actions],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )
        .map_err(es)?;
        let net = Network::init(spec, &mut rng).map_err(es)?;
        for draw in 0..1000u64 {
            let clean =
                Tensor::vector((0..d_obs).map(|_| rng.random_range(0.0..=1.0)).collect());
            let alpha = step_sizes[rng.random_range(0..step_sizes.len())];
            let steps = rng.random_range(1..=3);
            let budget = AttackBudget::new(epsilon, alpha, steps, range).map_err(es)?;
            let label = format!("net {net_idx}, draw {draw}");

            let target = rng.random_range(0..n_actions);
            let out = attack_targeted(&net, &clean, d_obs, target, &budget).map_err(es)?;
            check_contained(&clean, &out.adversarial_obs, epsilon, range, &label)?;

            let out = attack_untargeted(&net, &clean, d_obs, &budget).map_err(es)?;
            check_contained(&clean, &out.adversarial_obs, epsilon, range, &label)?;

            let noisy = attack_random(&clean, &budget, &mut rng);
            check_contained(&clean, &noisy, epsilon, range, &label)?;
            per_method += 1;
        }
    }
    Ok(format!(
        "{per_method} invocations per method inside the ball and the box"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7: on the trained team, single-step targeted perturbations at
// radius 0.1 flip some sampled observations to the requested action, while
// a zero radius never does.
// ---------------------------------------------------------------------------

fn criterion_7() -> Result<String, String> {
    let fix = fixture();
    let spec = GridCapture::new().spec().clone();
    let mut env = GridCapture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACCE, "hit-rate", 0));

    let mut samples: Vec<(usize, Tensor)> = Vec::new();
    let mut episode = 0u64;
    while samples.len() < 200 {
        let (_, first_obs) = env.reset(derive_seed(0xACCE, "hit-rate-env", episode));
        let mut histories = fix.team.new_histories(spec.obs_dim).map_err(es)?;
        for (history, obs) in histories.iter_mut().zip(first_obs) {
            history.push(obs).map_err(es)?;
        }
        loop {
            let encoded: Vec<Tensor> = histories.iter().map(|h| h.encode()).collect();
            let alive = env.alive();
            for agent in 0..spec.n_agents {
                if alive[agent] && samples.len() < 200 && rng.random_range(0..3) == 0 {
                    samples.push((agent, encoded[agent].clone()));
                }
            }
            let action = fix.team.greedy_joint(&encoded).map_err(es)?;
            let outcome = env.step(&action).map_err(es)?;
            for (history, obs) in histories.iter_mut().zip(outcome.next_obs) {
                history.push(obs).map_err(es)?;
            }
            if outcome.done {
                break;
            }
        }
        episode += 1;
    }

    let full = AttackBudget::new(0.1, 0.1, 1, spec.obs_range).map_err(es)?;
    let empty = AttackBudget::new(0.0, 0.0, 1, spec.obs_range).map_err(es)?;
    let mut hits_full = 0usize;
    let mut hits_empty = 0usize;
    for (agent, encoded) in &samples {
        let policy = &fix.team.policies[*agent];
        let clean = policy.greedy(encoded).map_err(es)?;
        let target =
            (clean + 1 + rng.random_range(0..spec.actions_per_agent - 1)) % spec.actions_per_agent;
        let out = attack_targeted(policy.net(), encoded, spec.obs_dim, target, &full).map_err(es)?;
        if out.hit {
            hits_full += 1;
        }
        let out =
            attack_targeted(policy.net(), encoded, spec.obs_dim, target, &empty).map_err(es)?;
        if out.hit {
            hits_empty += 1;
        }
    }

    if hits_empty != 0 {
        return Err(format!("zero-radius attacks reported {hits_empty} hits"));
    }
    if hits_full == 0 {
        return Err("no targeted hits at radius 0.1 across 200 sampled observations".to_string());
    }
    Ok(format!(
        "hit rate {hits_full}/200 at radius 0.1 vs 0/200 at radius 0"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 8: end to end on the grid task, hijacking the searched victim
// yields strictly lower mean reward than the random-noise baseline, and no
// higher win rate. Five seeds, 32 episodes each, one victim per step.
// ---------------------------------------------------------------------------

fn grid_eval_config(fix: &Fixture, method: AttackMethod) -> RunConfig {
    RunConfig {
        env: EnvSection {
            name: "grid_capture".to_string(),
            matrix: None,
        },
        ctde: CheckpointRef {
            checkpoint: fix.team_dir.clone(),
        },
        jointq: Some(CheckpointRef {
            checkpoint: fix.qjt_path.clone(),
        }),
        de: DeSection {
            population_size: 60,
            t: 8,
            m: 1,
            ..DeSection::default()
        },
        attack: AttackSection {
            epsilon: 0.1,
            alpha: None,
            steps: 1,
            method,
        },
        eval: EvalSection {
            episodes: 32,
            seeds: vec![1, 2, 3, 4, 5],
            objective_source: ObjectiveSource::SarsaQjt,
        },
    }
}

fn criterion_8() -> Result<String, String> {
    let fix = fixture();
    let clock = Instant::now();

    let (searched, _) = evaluate(&grid_eval_config(fix, AttackMethod::Rtca)).map_err(es)?;
    let (noise, _) = evaluate(&grid_eval_config(fix, AttackMethod::Random)).map_err(es)?;

    let total = clock.elapsed().as_secs_f64() + fix.train_secs;
    if !(searched.reward_mean < noise.reward_mean) {
        return Err(format!(
            "victim search did not lower mean reward: {} vs random noise {}",
            searched.reward, noise.reward
        ));
    }
    if searched.win_rate > noise.win_rate {
        return Err(format!(
            "victim search left a higher win rate: {:.2} vs random noise {:.2}",
            searched.win_rate, noise.win_rate
        ));
    }
    if total >= 600.0 {
        return Err(format!(
            "training plus evaluation took {total:.0} s, budget is 600 s"
        ));
    }
    Ok(format!(
        "reward {} vs noise {}, win rate {:.2} <= {:.2}, {total:.0} s including training",
        searched.reward, noise.reward, searched.win_rate, noise.win_rate
    ))
}

// ---------------------------------------------------------------------------
// Criterion 9: a zero perturbation radius and a zero victim count both
// leave the seeded rollout bit-identical to a clean one, judged by the
// action/reward trace digest.
// ---------------------------------------------------------------------------

fn criterion_9() -> Result<String, String> {
    let fix = fixture();
    let full = AttackBudget::new(0.1, 0.1, 1, (0.0, 1.0)).map_err(es)?;
    let empty = AttackBudget::new(0.0, 0.0, 1, (0.0, 1.0)).map_err(es)?;
    let search = DeSection {
        population_size: 20,
        t: 3,
        m: 1,
        ..DeSection::default()
    };
    let no_victims = DeSection { m: 0, ..search.clone() };
    let objective = AttackObjective::SarsaQjt(&fix.qnet);

    let run = |method: AttackMethod,
               objective: Option<&AttackObjective>,
               de: &DeSection,
               budget: &AttackBudget,
               seed: u64|
     -> Result<EpisodeResult, String> {
        let mut env = GridCapture::new();
        run_episode(&mut env, &fix.team, method, objective, de, budget, seed).map_err(es)
    };

    for seed in 0..4u64 {
        let clean = run(AttackMethod::None, None, &search, &full, seed)?;
        let variants = [
            ("search with zero radius", run(AttackMethod::Rtca, Some(&objective), &search, &empty, seed)?),
            ("search with zero victims", run(AttackMethod::Rtca, Some(&objective), &no_victims, &full, seed)?),
            ("noise with zero radius", run(AttackMethod::Random, None, &search, &empty, seed)?),
            ("gradient step with zero radius", run(AttackMethod::FgsmUntargeted, None, &search, &empty, seed)?),
        ];
        for (label, episode) in &variants {
            if episode.trace_hash != clean.trace_hash {
                return Err(format!(
                    "seed {seed}, {label}: trace {:016x} differs from the clean {:016x}",
                    episode.trace_hash, clean.trace_hash
                ));
            }
            if episode.cumulative_reward.to_bits() != clean.cumulative_reward.to_bits() {
                return Err(format!(
                    "seed {seed}, {label}: reward {} differs from the clean {}",
                    episode.cumulative_reward, clean.cumulative_reward
                ));
            }
        }
    }
    Ok("4 seeds x 4 disabled-attack variants reproduce the clean trace".to_string())
}

// ---------------------------------------------------------------------------
// Criterion 10: the reporting protocol — 32 episodes per seed by default,
// rewards rendered as mean±std to two decimals, the pinned CSV/JSON
// schema, and the comparison tables of the ablate and transfer commands.
// ---------------------------------------------------------------------------

fn check_two_decimal(part: &str, label: &str) -> Result<(), String> {
    let ok = part.parse::<f64>().is_ok()
        && part
            .rsplit_once('.')
            .is_some_and(|(_, frac)| frac.len() == 2 && frac.bytes().all(|b| b.is_ascii_digit()));
    if ok {
        Ok(())
    } else {
        Err(format!("{label}: `{part}` is not a two-decimal number"))
    }
}

fn criterion_10() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(es)?;
    let dir_path = dir.path();

    // A small one-shot-game setup on disk, so the protocol checks stay fast.
    let mut env = CoopMatrixGame::random(2, 2, 3).map_err(es)?;
    let spec = env.spec().clone();
    let fp = env_fingerprint(env.name(), &spec).map_err(es)?;
    let train_cfg = TdTrainConfig {
        algo: MixerChoice::Vdn,
        episodes: 200,
        hidden: vec![16],
        seed: 7,
        ..TdTrainConfig::default()
    };
    let outcome = td_train(&mut env, &train_cfg).map_err(es)?;
    let team_dir = dir_path.join("team");
    let meta = TeamMeta {
        env_name: env.name().to_string(),
        env_spec: spec,
        algo: "vdn".to_string(),
        n_agents: outcome.team.n_agents(),
        history_depth: outcome.team.history_depth,
        fingerprint: fp.clone(),
        seed: 7,
        episodes_trained: train_cfg.episodes,
    };
    save_team(&team_dir, &outcome.team, &meta).map_err(es)?;

    let sarsa_cfg = SarsaConfig {
        episodes: 400,
        lr: 0.05,
        hidden: vec![16],
        seed: 11,
        ..SarsaConfig::default()
    };
    let fitted = train_sarsa(&mut env, SarsaBehavior::Uniform, &sarsa_cfg).map_err(es)?;
    let qjt_path = dir_path.join("qjt.json");
    save_joint_q(&qjt_path, &fitted.qnet, env.name(), &fp, "uniform").map_err(es)?;
    let cross_cfg = SarsaConfig { seed: 12, ..sarsa_cfg };
    let crossed = train_sarsa(&mut env, SarsaBehavior::Uniform, &cross_cfg).map_err(es)?;
    let cross_path = dir_path.join("qjt_cross.json");
    save_joint_q(&cross_path, &crossed.qnet, env.name(), &fp, "uniform").map_err(es)?;

    // (a) Episode count defaults to 32 per seed when the config leaves it out.
    let config_path = dir_path.join("config.json");
    let document = serde_json::json!({
        "env": {
            "name": "coop_matrix",
            "matrix": {"n_agents": 2, "actions_per_agent": 2, "payoff_seed": 3}
        },
        "ctde": {"checkpoint": team_dir},
        "jointq": {"checkpoint": qjt_path},
        "de": {"population_size": 16, "T": 3},
        "eval": {"seeds": [1]}
    });
    fs::write(
        &config_path,
        serde_json::to_string_pretty(&document).map_err(es)?,
    )
    .map_err(es)?;
    let cfg = RunConfig::from_file(&config_path).map_err(es)?;
    if cfg.eval.episodes != 32 {
        return Err(format!(
            "omitted episode count parsed as {}, expected the default 32",
            cfg.eval.episodes
        ));
    }
    let (report, episodes) = evaluate(&cfg).map_err(es)?;
    if report.episodes != 32 || episodes.len() != 32 {
        return Err(format!(
            "default run produced {} episodes (report says {}), expected 32",
            episodes.len(),
            report.episodes
        ));
    }

    // (b) Rewards render as mean±std, two decimals each.
    let rendered = reward_display(19.7432, 1.4481);
    if rendered != "19.74±1.45" {
        return Err(format!("reward_display produced `{rendered}`, expected `19.74±1.45`"));
    }
    let (mean_part, std_part) = report
        .reward
        .split_once('±')
        .ok_or_else(|| format!("report reward `{}` lacks the ± separator", report.reward))?;
    check_two_decimal(mean_part, "reward mean")?;
    check_two_decimal(std_part, "reward std")?;

    // (c) The CSV/JSON schema and the side-by-side command tables.
    let binary = env!("CARGO_BIN_EXE_marlprobe");
    let config_str = config_path.to_str().ok_or("non-utf8 temp path")?;

    let eval_dir = dir_path.join("eval-out");
    let output = Command::new(binary)
        .args(["evaluate", "--config", config_str])
        .args(["--out", eval_dir.to_str().ok_or("non-utf8 temp path")?])
        .output()
        .map_err(es)?;
    if !output.status.success() {
        return Err(format!(
            "evaluate subcommand failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    let csv = fs::read_to_string(eval_dir.join("report.csv")).map_err(es)?;
    let mut lines = csv.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(format!("report.csv header differs from `{CSV_HEADER}`"));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    if rows.len() != 1 || rows[0].split(',').count() != CSV_HEADER.split(',').count() {
        return Err("report.csv should hold exactly one row with one field per column".to_string());
    }
    let parsed: Vec<Report> =
        serde_json::from_str(&fs::read_to_string(eval_dir.join("report.json")).map_err(es)?)
            .map_err(es)?;
    if parsed.len() != 1 || parsed[0] != report {
        return Err("report.json does not round-trip the evaluation report".to_string());
    }

    let ablate_dir = dir_path.join("ablate-out");
    let output = Command::new(binary)
        .args(["ablate", "--config", config_str])
        .args(["--out", ablate_dir.to_str().ok_or("non-utf8 temp path")?])
        .output()
        .map_err(es)?;
    if !output.status.success() {
        return Err(format!(
            "ablate subcommand failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    let table = String::from_utf8_lossy(&output.stdout);
    for needle in ["objective", "centralized_critic", "sarsa_qjt", "±"] {
        if !table.contains(needle) {
            return Err(format!("ablate table lacks `{needle}`"));
        }
    }
    let csv = fs::read_to_string(ablate_dir.join("ablation.csv")).map_err(es)?;
    let mut lines = csv.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(format!("ablation.csv header differs from `{CSV_HEADER}`"));
    }
    if lines.filter(|l| !l.is_empty()).count() != 2 {
        return Err("ablation.csv should hold one row per objective".to_string());
    }

    let transfer_dir = dir_path.join("transfer-out");
    let output = Command::new(binary)
        .args(["transfer", "--config", config_str])
        .args(["--jointq", cross_path.to_str().ok_or("non-utf8 temp path")?])
        .args(["--out", transfer_dir.to_str().ok_or("non-utf8 temp path")?])
        .output()
        .map_err(es)?;
    if !output.status.success() {
        return Err(format!(
            "transfer subcommand failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    let table = String::from_utf8_lossy(&output.stdout);
    for needle in ["victim_team", "qnet_source", "±"] {
        if !table.contains(needle) {
            return Err(format!("transfer table lacks `{needle}`"));
        }
    }
    let csv = fs::read_to_string(transfer_dir.join("transfer.csv")).map_err(es)?;
    if csv.lines().next() != Some(CSV_HEADER) {
        return Err(format!("transfer.csv header differs from `{CSV_HEADER}`"));
    }

    Ok(format!(
        "default 32 episodes, reward `{}` well-formed, schema and tables verified",
        report.reward
    ))
}
