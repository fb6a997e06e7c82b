//! The training orchestrator: rollout collection, replay-driven
//! optimization, greedy evaluation, metrics, and checkpoints.
//!
//! Determinism contract: every episode's RNG is derived from the run
//! seed and the episode's global index, and optimizer sampling runs on
//! its own seeded stream, so a run is a pure function of its
//! configuration. Rollout workers only partition episode indices;
//! results are merged in index order, which makes the outcome
//! identical for any worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lob_core::analysis::{EpisodeLog, StepRecord};
use lob_core::ddpg::Agent;
use lob_core::her::{EpisodeRecord, ReplayBuffer, EPISODE_LEN};
use lob_core::rand::SeedableRng;
use lob_core::sim::{apply_variant_rule, Env, EnvConfig};
use lob_core::DetRng;

use crate::formats::{
    Checkpoint, EpochMetrics, MetricsWriter, Progress, RngState, TrainConfig, CHECKPOINT_VERSION,
};
use crate::{Error, Result};

/// Domain separators for the derived RNG streams.
const SALT_EPISODE: u64 = 0x01;
const SALT_OPTIMIZER: u64 = 0x02;
const SALT_EVAL: u64 = 0x03;

/// SplitMix64 finalizer over (seed, salt, index): cheap, well mixed,
/// and stable across platforms.
fn derive_seed(seed: u64, salt: u64, index: u64) -> u64 {
    let mut z = seed
        ^ salt.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct RolloutResult {
    record: EpisodeRecord,
    success: bool,
    cumulative_reward: f64,
}

/// Runs one episode against a freshly built environment. The variant
/// rule (drifting or growing targets) is applied at `global_step`
/// before the episode starts.
#[allow(clippy::too_many_arguments)]
fn run_episode(
    agent: &Agent,
    base: &EnvConfig,
    episode_seed: u64,
    episode_index: u64,
    global_step: u64,
    explore: bool,
    want_log: bool,
) -> Result<(RolloutResult, Option<EpisodeLog>)> {
    let variant = base.variant;
    let cfg = apply_variant_rule(base, global_step);
    let mut env = Env::new(cfg).map_err(Error::Core)?;
    let mut rng = DetRng::seed_from_u64(episode_seed);
    let mut obs = env.reset(&mut rng);
    let desired = obs.desired_goal;

    let len = EPISODE_LEN;
    let mut states = Vec::with_capacity(len + 1);
    let mut achieved = Vec::with_capacity(len + 1);
    let mut actions = Vec::with_capacity(len);
    let mut rewards = Vec::with_capacity(len);
    let mut steps = if want_log { Vec::with_capacity(len) } else { Vec::new() };
    let mut cumulative = 0.0;
    let mut success = false;

    for t in 0..len {
        states.push(obs.state.clone());
        achieved.push(obs.achieved_goal);
        let a = agent
            .select_action(&obs.state, &obs.achieved_goal, &obs.desired_goal, explore, &mut rng)
            .map_err(Error::Core)?;
        let action: [f64; 4] = a
            .try_into()
            .map_err(|_| Error::Config("policy action must have four components".into()))?;
        let (next_obs, reward, info) = env.step(&action).map_err(Error::Core)?;
        cumulative += reward;
        success = info.is_success;
        if want_log {
            let st = env.state();
            steps.push(StepRecord {
                step: t as u32,
                gripper_pos: st.gripper_pos,
                finger_gap: st.gap,
                box_pos: st.box_pos,
                box_vel: st.box_vel,
                action,
                reward,
                contact: info.gripper_box_contact,
                grasped: info.grasped,
            });
        }
        actions.push(action);
        rewards.push(reward);
        obs = next_obs;
    }
    states.push(obs.state.clone());
    achieved.push(obs.achieved_goal);

    let record = EpisodeRecord::from_series(
        variant.name().to_string(),
        episode_seed,
        episode_index,
        states,
        achieved,
        actions,
        rewards,
        desired,
    )
    .map_err(Error::Core)?;
    let log = want_log.then(|| EpisodeLog {
        variant,
        seed: episode_seed,
        episode_index,
        target: env.state().target,
        steps,
    });
    Ok((
        RolloutResult {
            record,
            success,
            cumulative_reward: cumulative,
        },
        log,
    ))
}

/// Collects one cycle of exploration episodes, splitting the index
/// range over `cfg.workers` threads. Episodes are merged back in index
/// order, so the result is independent of the split.
fn collect_cycle(
    agent: &Agent,
    base: &EnvConfig,
    cfg: &TrainConfig,
    first_episode: u64,
    count: usize,
) -> Result<Vec<RolloutResult>> {
    let indices: Vec<u64> = (first_episode..first_episode + count as u64).collect();
    let one = |idx: u64| -> Result<RolloutResult> {
        let seed = derive_seed(cfg.seed, SALT_EPISODE, idx);
        let (result, _) =
            run_episode(agent, base, seed, idx, idx * EPISODE_LEN as u64, true, false)?;
        Ok(result)
    };
    if cfg.workers <= 1 {
        return indices.iter().map(|&i| one(i)).collect();
    }
    let chunk = count.div_ceil(cfg.workers);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for part in indices.chunks(chunk) {
            handles.push(scope.spawn(move || part.iter().map(|&i| one(i)).collect::<Result<Vec<_>>>()));
        }
        let mut all = Vec::with_capacity(count);
        for h in handles {
            all.extend(h.join().expect("rollout worker panicked")?);
        }
        Ok(all)
    })
}

/// Folds freshly collected episodes into the observation and goal
/// normalizers. Raw values are clipped exactly as the agent clips its
/// own inputs, and both achieved and desired goals feed the goal
/// statistics.
fn update_normalizers(agent: &mut Agent, fresh: &[RolloutResult]) {
    let clip = agent.hp.obs_clip;
    let clamp_row = |row: &[f64]| row.iter().map(|x| x.clamp(-clip, clip)).collect::<Vec<f64>>();
    let mut state_rows = Vec::new();
    let mut goal_rows = Vec::new();
    for r in fresh {
        for s in r.record.states() {
            state_rows.push(clamp_row(s));
        }
        for g in r.record.achieved() {
            goal_rows.push(clamp_row(g));
        }
        goal_rows.push(clamp_row(&r.record.desired()));
    }
    agent.obs_norm.update(&state_rows);
    agent.goal_norm.update(&goal_rows);
}

/// One cycle of minibatch updates followed by a target-network blend.
/// Returns mean (actor, critic) losses.
fn optimize(
    agent: &mut Agent,
    buffer: &ReplayBuffer,
    steps: usize,
    k_future: usize,
    rng: &mut DetRng,
) -> Result<(f64, f64)> {
    let mut actor_sum = 0.0;
    let mut critic_sum = 0.0;
    for _ in 0..steps {
        let batch = buffer
            .sample_batch(agent.hp.batch_size, k_future, rng)
            .map_err(Error::Core)?;
        let targets = agent.compute_target_q(&batch.transitions).map_err(Error::Core)?;
        critic_sum += agent
            .critic_update(&batch.transitions, &targets)
            .map_err(Error::Core)?;
        actor_sum += agent.actor_update(&batch.transitions).map_err(Error::Core)?;
    }
    agent.polyak_update().map_err(Error::Core)?;
    Ok((actor_sum / steps as f64, critic_sum / steps as f64))
}

/// Greedy evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOutcome {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
}

/// Rolls the deterministic policy (no exploration noise) for
/// `episodes` episodes and reports the success rate and mean episode
/// reward. Pass a sink to also receive per-step logs.
pub fn evaluate(
    agent: &Agent,
    base: &EnvConfig,
    episodes: usize,
    seed: u64,
    mut logs: Option<&mut Vec<EpisodeLog>>,
) -> Result<EvalOutcome> {
    if episodes == 0 {
        return Err(Error::Core(lob_core::Error::NoSamples("evaluation episodes")));
    }
    let mut successes = 0usize;
    let mut reward_sum = 0.0;
    for i in 0..episodes {
        let episode_seed = derive_seed(seed, SALT_EVAL, i as u64);
        let (result, log) =
            run_episode(agent, base, episode_seed, i as u64, 0, false, logs.is_some())?;
        successes += usize::from(result.success);
        reward_sum += result.cumulative_reward;
        if let (Some(sink), Some(log)) = (logs.as_deref_mut(), log) {
            sink.push(log);
        }
    }
    Ok(EvalOutcome {
        episodes,
        success_rate: successes as f64 / episodes as f64,
        mean_reward: reward_sum / episodes as f64,
    })
}

/// What `run_training` hands back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub env_steps: u64,
    pub final_eval_success: f64,
    /// Greedy eval success rate after each epoch this call ran.
    pub epoch_eval_success: Vec<f64>,
    /// Mean greedy eval episode reward after each epoch this call ran.
    pub epoch_eval_reward: Vec<f64>,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    /// Set when the success threshold ended the run before the
    /// configured epochs.
    pub reached_stop_threshold: bool,
}

/// Runs the full loop: per epoch, `cycles_per_epoch` cycles of
/// {collect episodes, update normalizers, optimizer steps, target
/// blend}, then a greedy evaluation and one metrics row. Checkpoints
/// are written on schedule, at the end, and before a numeric abort.
pub fn run_training(
    cfg: &TrainConfig,
    out_dir: &Path,
    from_checkpoint: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let checkpoint_path = out_dir.join("checkpoint.json");

    let (mut agent, mut rng_train, mut progress, env_base) = match from_checkpoint {
        Some(path) => {
            let (ck, hash_ok) = Checkpoint::load(path)?;
            if !hash_ok {
                eprintln!("warning: checkpoint config hash does not match its recorded config");
            }
            if ck.config_hash != cfg.hash()? {
                eprintln!("warning: resuming under a different configuration than the checkpoint recorded");
            }
            (ck.agent, ck.train_rng.restore()?, ck.progress, ck.env)
        }
        None => {
            let env = EnvConfig::for_variant(cfg.variant);
            let agent = Agent::new(
                env.obs_dim(),
                env.goal_dim(),
                4,
                &cfg.hidden,
                cfg.include_achieved_goal,
                cfg.hp.clone(),
                cfg.seed,
            )
            .map_err(Error::Core)?;
            let rng = DetRng::seed_from_u64(derive_seed(cfg.seed, SALT_OPTIMIZER, 0));
            (agent, rng, Progress::default(), env)
        }
    };
    if env_base.episode_len as usize != EPISODE_LEN {
        return Err(Error::Config(format!(
            "replay is fixed at {EPISODE_LEN}-step episodes, environment runs {}",
            env_base.episode_len
        )));
    }

    let mut buffer = ReplayBuffer::with_tolerance(agent.hp.buffer_size, env_base.success_tolerance)
        .map_err(Error::Core)?;
    let mut metrics = MetricsWriter::create(&metrics_path)?;
    let save = |agent: &Agent, rng: &DetRng, progress: Progress| -> Result<()> {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config_hash: cfg.hash()?,
            train_config: cfg.clone(),
            env: env_base.clone(),
            agent: agent.clone(),
            train_rng: RngState::capture(rng),
            progress,
        }
        .save(&checkpoint_path)
    };

    let started = Instant::now();
    let mut final_eval_success = 0.0;
    let mut epoch_eval_success = Vec::new();
    let mut epoch_eval_reward = Vec::new();
    let mut reached_stop = false;

    'epochs: for epoch in progress.epochs_done..cfg.epochs {
        let mut rewards = Vec::new();
        let mut successes = 0usize;
        let mut actor_losses = Vec::new();
        let mut critic_losses = Vec::new();

        for _ in 0..cfg.cycles_per_epoch {
            if progress.env_steps >= cfg.total_step_budget {
                break;
            }
            let fresh = collect_cycle(&agent, &env_base, cfg, progress.episodes, cfg.episodes_per_cycle)?;
            update_normalizers(&mut agent, &fresh);
            for r in fresh {
                successes += usize::from(r.success);
                rewards.push(r.cumulative_reward);
                buffer.store_episode(r.record).map_err(Error::Core)?;
                progress.episodes += 1;
                progress.env_steps += EPISODE_LEN as u64;
            }
            match optimize(
                &mut agent,
                &buffer,
                cfg.optimizer_steps_per_cycle,
                cfg.k_future,
                &mut rng_train,
            ) {
                Ok((al, cl)) => {
                    actor_losses.push(al);
                    critic_losses.push(cl);
                }
                Err(e) => {
                    // Keep the last healthy state reachable before
                    // surfacing a numeric abort.
                    save(&agent, &rng_train, progress)?;
                    return Err(e);
                }
            }
        }
        if rewards.is_empty() {
            break;
        }

        let eval_env = apply_variant_rule(&env_base, progress.env_steps);
        let eval = evaluate(
            &agent,
            &eval_env,
            cfg.eval_episodes,
            derive_seed(cfg.seed, SALT_EVAL, epoch as u64),
            None,
        )?;
        final_eval_success = eval.success_rate;
        epoch_eval_success.push(eval.success_rate);
        epoch_eval_reward.push(eval.mean_reward);

        let n = rewards.len() as f64;
        metrics.append(&EpochMetrics {
            epoch,
            env_steps: progress.env_steps,
            train_success_rate: successes as f64 / n,
            eval_success_rate: eval.success_rate,
            mean_episode_reward: rewards.iter().sum::<f64>() / n,
            actor_loss: actor_losses.iter().sum::<f64>() / actor_losses.len() as f64,
            critic_loss: critic_losses.iter().sum::<f64>() / critic_losses.len() as f64,
            wall_clock_s: if cfg.deterministic_timing {
                0.0
            } else {
                started.elapsed().as_secs_f64()
            },
        })?;
        progress.epochs_done = epoch + 1;

        if (epoch + 1) % cfg.checkpoint_every == 0 {
            save(&agent, &rng_train, progress)?;
        }
        if let Some(threshold) = cfg.stop_at_eval_success {
            if eval.success_rate >= threshold {
                reached_stop = true;
                break 'epochs;
            }
        }
        if progress.env_steps >= cfg.total_step_budget {
            break;
        }
    }

    save(&agent, &rng_train, progress)?;
    Ok(TrainOutcome {
        epochs_run: progress.epochs_done,
        env_steps: progress.env_steps,
        final_eval_success,
        epoch_eval_success,
        epoch_eval_reward,
        metrics_path,
        checkpoint_path,
        reached_stop_threshold: reached_stop,
    })
}
