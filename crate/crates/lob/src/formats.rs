//! On-disk formats: the training configuration, checkpoints, episode
//! log files, and the metrics CSV.
//!
//! Checkpoints and configs are JSON; episode logs are JSON lines (one
//! header line then one line per step, episodes concatenated); metrics
//! and analysis tables are RFC 4180 CSV. All writers are deterministic:
//! the same values produce the same bytes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use lob_core::analysis::{EpisodeLog, StepRecord};
use lob_core::ddpg::{Agent, Hyperparams};
use lob_core::sim::{EnvConfig, Variant};
use lob_core::DetRng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Everything `run_training` needs. Serializable so runs are fully
/// described by one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub hp: Hyperparams,
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    /// Concatenate the achieved goal into network inputs alongside the
    /// desired goal.
    pub include_achieved_goal: bool,
    /// Future-strategy relabel count; 0 disables hindsight replay.
    pub k_future: usize,
    pub epochs: usize,
    pub cycles_per_epoch: usize,
    pub episodes_per_cycle: usize,
    pub optimizer_steps_per_cycle: usize,
    /// Greedy evaluation episodes per epoch.
    pub eval_episodes: usize,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (and always at the
    /// end).
    pub checkpoint_every: usize,
    /// Hard cap on environment steps; training stops at the first cycle
    /// boundary past it.
    pub total_step_budget: u64,
    /// Stop once greedy eval success reaches this rate.
    pub stop_at_eval_success: Option<f64>,
    /// Rollout threads. Results are identical for any value; more than
    /// one only helps on multi-core hosts.
    pub workers: usize,
    /// Write 0.0 for wall-clock columns so metrics files are
    /// byte-identical across runs.
    pub deterministic_timing: bool,
}

impl Default for TrainConfig {
    /// A single-core schedule that solves the flat task in a few
    /// minutes: small cycles with a high update-to-data ratio (40
    /// batches of 256 per 300 environment steps).
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Flat,
            hp: Hyperparams {
                buffer_size: 200_000,
                ..Hyperparams::default()
            },
            hidden: vec![48, 48, 48],
            include_achieved_goal: false,
            k_future: 4,
            epochs: 334,
            cycles_per_epoch: 20,
            episodes_per_cycle: 5,
            optimizer_steps_per_cycle: 40,
            eval_episodes: 20,
            seed: 1,
            checkpoint_every: 50,
            total_step_budget: 2_000_000,
            stop_at_eval_success: Some(0.9),
            workers: 1,
            deterministic_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        TrainConfig {
            variant,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate().map_err(Error::Core)?;
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        };
        check(!self.hidden.is_empty(), "need at least one hidden layer")?;
        check(
            self.hidden.iter().all(|&w| w > 0),
            "hidden layer widths must be positive",
        )?;
        check(self.cycles_per_epoch > 0, "cycles_per_epoch must be positive")?;
        check(
            self.episodes_per_cycle > 0,
            "episodes_per_cycle must be positive",
        )?;
        check(
            self.episodes_per_cycle >= self.hp.rollout_batch,
            "episodes_per_cycle cannot be smaller than the rollout batch",
        )?;
        check(
            self.optimizer_steps_per_cycle > 0,
            "optimizer_steps_per_cycle must be positive",
        )?;
        check(self.eval_episodes > 0, "eval_episodes must be positive")?;
        check(self.checkpoint_every > 0, "checkpoint_every must be positive")?;
        check(self.workers > 0, "workers must be positive")?;
        if let Some(s) = self.stop_at_eval_success {
            check(
                (0.0..=1.0).contains(&s),
                "stop_at_eval_success must lie in [0, 1]",
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: TrainConfig =
            serde_json::from_str(&text).map_err(Error::json(format!("config {}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(Error::json("config"))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// FNV-1a over the canonical JSON encoding; checkpoints carry it so
    /// a resume under a different config is flagged.
    pub fn hash(&self) -> Result<String> {
        let canon = serde_json::to_string(self).map_err(Error::json("config hash"))?;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canon.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(format!("{h:016x}"))
    }
}

/// Serializable RNG position: seed plus stream offset, enough to
/// reproduce the exact remaining stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed_hex: String,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &DetRng) -> Self {
        let seed = rng.get_seed();
        let mut seed_hex = String::with_capacity(64);
        for b in seed {
            seed_hex.push_str(&format!("{b:02x}"));
        }
        RngState {
            seed_hex,
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> Result<DetRng> {
        if self.seed_hex.len() != 64 || !self.seed_hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Config(format!(
                "rng seed must be 64 hex digits, got '{}'",
                self.seed_hex
            )));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in self.seed_hex.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16).unwrap() as u8;
            let lo = (chunk[1] as char).to_digit(16).unwrap() as u8;
            seed[i] = hi << 4 | lo;
        }
        use lob_core::rand::SeedableRng;
        let mut rng = DetRng::from_seed(seed);
        rng.set_word_pos(self.word_pos);
        Ok(rng)
    }
}

/// Where a run currently stands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub epochs_done: usize,
    pub env_steps: u64,
    pub episodes: u64,
}

/// A complete training snapshot: agent (networks, targets, optimizer
/// moments, normalizers), RNG position, environment, and progress.
/// Replay contents are deliberately not persisted; a resumed run
/// refills its buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub train_config: TrainConfig,
    pub env: EnvConfig,
    pub agent: Agent,
    pub train_rng: RngState,
    pub progress: Progress,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    /// Writes atomically: the bytes land in a sibling temp file that is
    /// renamed over the target, so a crash never leaves a torn file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(Error::json("checkpoint"))?;
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a checkpoint, naming the failing section on parse errors.
    /// Returns the checkpoint and whether its config hash matches the
    /// stored config (a mismatch is legal but worth surfacing).
    pub fn load(path: &Path) -> Result<(Checkpoint, bool)> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(Error::json(format!("checkpoint {}", path.display())))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("checkpoint root must be a JSON object".into()))?;

        let section = |name: &str| -> Result<serde_json::Value> {
            obj.get(name)
                .cloned()
                .ok_or_else(|| Error::Config(format!("checkpoint is missing the '{name}' section")))
        };
        let format_version: u32 = serde_json::from_value(section("format_version")?)
            .map_err(Error::json("checkpoint section 'format_version'"))?;
        if format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {format_version} is not the supported {CHECKPOINT_VERSION}"
            )));
        }
        let config_hash: String = serde_json::from_value(section("config_hash")?)
            .map_err(Error::json("checkpoint section 'config_hash'"))?;
        let train_config: TrainConfig = serde_json::from_value(section("train_config")?)
            .map_err(Error::json("checkpoint section 'train_config'"))?;
        let env: EnvConfig = serde_json::from_value(section("env")?)
            .map_err(Error::json("checkpoint section 'env'"))?;
        let agent: Agent = serde_json::from_value(section("agent")?)
            .map_err(Error::json("checkpoint section 'agent'"))?;
        let train_rng: RngState = serde_json::from_value(section("train_rng")?)
            .map_err(Error::json("checkpoint section 'train_rng'"))?;
        let progress: Progress = serde_json::from_value(section("progress")?)
            .map_err(Error::json("checkpoint section 'progress'"))?;

        let ck = Checkpoint {
            format_version,
            config_hash,
            train_config,
            env,
            agent,
            train_rng,
            progress,
        };
        let matches = ck.train_config.hash()? == ck.config_hash;
        Ok((ck, matches))
    }
}

/// Log file line: a header opens each episode, sixty step lines follow.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Header {
        variant: Variant,
        seed: u64,
        episode_index: u64,
        target: [f64; 3],
    },
    Step(Box<StepRecord>),
}

/// Appends episodes to a JSON-lines log file, creating it when absent.
pub fn write_episode_logs(path: &Path, episodes: &[EpisodeLog]) -> Result<()> {
    let mut out = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    for ep in episodes {
        let header = LogLine::Header {
            variant: ep.variant,
            seed: ep.seed,
            episode_index: ep.episode_index,
            target: ep.target,
        };
        buf.push_str(&serde_json::to_string(&header).map_err(Error::json("episode header"))?);
        buf.push('\n');
        for step in &ep.steps {
            let line = LogLine::Step(Box::new(step.clone()));
            buf.push_str(&serde_json::to_string(&line).map_err(Error::json("episode step"))?);
            buf.push('\n');
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Reads every episode from one JSON-lines log file.
pub fn read_episode_logs(path: &Path) -> Result<Vec<EpisodeLog>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut episodes = Vec::new();
    let mut current: Option<EpisodeLog> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line)
            .map_err(Error::json(format!("{} line {}", path.display(), lineno + 1)))?;
        match parsed {
            LogLine::Header {
                variant,
                seed,
                episode_index,
                target,
            } => {
                if let Some(done) = current.take() {
                    episodes.push(done);
                }
                current = Some(EpisodeLog {
                    variant,
                    seed,
                    episode_index,
                    target,
                    steps: Vec::new(),
                });
            }
            LogLine::Step(step) => match current.as_mut() {
                Some(ep) => ep.steps.push(*step),
                None => {
                    return Err(Error::Config(format!(
                        "{} line {}: step record before any header",
                        path.display(),
                        lineno + 1
                    )))
                }
            },
        }
    }
    if let Some(done) = current.take() {
        episodes.push(done);
    }
    for ep in &episodes {
        ep.validate().map_err(Error::Core)?;
    }
    Ok(episodes)
}

/// Reads and concatenates every `.jsonl` file in a directory, sorted by
/// file name so the order is stable.
pub fn read_log_dir(dir: &Path) -> Result<Vec<EpisodeLog>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut all = Vec::new();
    for f in files {
        all.extend(read_episode_logs(&f)?);
    }
    Ok(all)
}

/// One metrics row per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub env_steps: u64,
    pub train_success_rate: f64,
    pub eval_success_rate: f64,
    pub mean_episode_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub wall_clock_s: f64,
}

/// Incremental CSV writer for [`EpochMetrics`], flushing after every
/// row so an aborted run keeps everything written so far.
pub struct MetricsWriter {
    writer: csv::Writer<fs::File>,
}

impl MetricsWriter {
    /// Creates the file and writes the header. Truncates an existing
    /// file: metrics always describe exactly one run.
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(fs::File::create(path)?);
        writer.write_record([
            "epoch",
            "env_steps",
            "train_success_rate",
            "eval_success_rate",
            "mean_episode_reward",
            "actor_loss",
            "critic_loss",
            "wall_clock_s",
        ])?;
        writer.flush()?;
        Ok(MetricsWriter { writer })
    }

    pub fn append(&mut self, m: &EpochMetrics) -> Result<()> {
        self.writer.write_record([
            m.epoch.to_string(),
            m.env_steps.to_string(),
            fmt_f64(m.train_success_rate),
            fmt_f64(m.eval_success_rate),
            fmt_f64(m.mean_episode_reward),
            fmt_f64(m.actor_loss),
            fmt_f64(m.critic_loss),
            fmt_f64(m.wall_clock_s),
        ])?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Shortest exact decimal form, the same rule the JSON writer uses, so
/// values survive a parse round-trip unchanged.
pub fn fmt_f64(x: f64) -> String {
    let mut buf = ryu_format(x);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lob_core::rand::SeedableRng;

    #[test]
    fn rng_state_round_trips_mid_stream() {
        use lob_core::rand::RngCore;
        let mut rng = DetRng::seed_from_u64(42);
        for _ in 0..7 {
            rng.next_u64();
        }
        let state = RngState::capture(&rng);
        let mut restored = state.restore().unwrap();
        for _ in 0..32 {
            assert_eq!(rng.next_u64(), restored.next_u64());
        }
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = TrainConfig::default();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn float_formatting_is_shortest_exact() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(-60.0), "-60");
        assert_eq!(fmt_f64(0.30000000000000004), "0.30000000000000004");
    }
}
