//! Command-line front end with three subcommands: `train`, `eval`, and
//! `analyze`. Exit codes: 0 on success, 2 for configuration problems,
//! 3 for a numeric abort during training, 1 otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lob_core::analysis::{aggregate, Aggregate, AnalysisConfig, EventKind};
use lob_core::sim::{EnvConfig, Variant};

use crate::formats::{fmt_f64, read_log_dir, write_episode_logs, Checkpoint, TrainConfig};
use crate::{plots, trainer, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lob",
    version,
    about = "Train, evaluate, and analyze goal-conditioned table-manipulation agents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the training loop, writing metrics.csv and checkpoint.json.
    Train {
        /// Environment variant: flat, wall, ditch, target-near,
        /// target-moving, target-expanding, rstatesp.
        #[arg(long)]
        env: Option<String>,
        /// JSON training configuration; omitted fields use defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run seed; overrides the configuration file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Rollout worker threads; overrides the configuration file.
        #[arg(long)]
        workers: Option<usize>,
        /// Resume from an earlier checkpoint.
        #[arg(long)]
        from_checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate on a different variant than the checkpoint trained on.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for JSON-lines episode logs; omit to skip logging.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Aggregate episode logs into CSV tables and SVG plots.
    Analyze {
        /// Directory of .jsonl episode logs.
        #[arg(long)]
        logs: PathBuf,
        /// Output directory for tables and plots.
        #[arg(long)]
        out: PathBuf,
        /// Gaussian kernel bandwidth for the success density, in metres.
        #[arg(long, default_value_t = 0.02)]
        bandwidth: f64,
    },
}

/// Accepts both the dashed command-line spellings and the internal
/// underscored names.
pub fn parse_variant(name: &str) -> Result<Variant> {
    let norm = name.to_ascii_lowercase().replace('-', "_");
    let norm = if norm == "rstatesp" { "r_state_sp".into() } else { norm };
    Variant::from_name(&norm).map_err(Error::Core)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            env,
            config,
            seed,
            out,
            workers,
            from_checkpoint,
        } => {
            let mut cfg = if let Some(path) = &config {
                TrainConfig::load(path)?
            } else if let Some(path) = &from_checkpoint {
                Checkpoint::load(path)?.0.train_config
            } else {
                TrainConfig::default()
            };
            if let Some(name) = env {
                cfg.variant = parse_variant(&name)?;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(workers) = workers {
                cfg.workers = workers;
            }
            let outcome = trainer::run_training(&cfg, &out, from_checkpoint.as_deref())?;
            println!(
                "trained {} epochs ({} env steps) on {}; final eval success {:.3}{}",
                outcome.epochs_run,
                outcome.env_steps,
                cfg.variant.name(),
                outcome.final_eval_success,
                if outcome.reached_stop_threshold {
                    " (stop threshold reached)"
                } else {
                    ""
                }
            );
            println!("metrics: {}", outcome.metrics_path.display());
            println!("checkpoint: {}", outcome.checkpoint_path.display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
            log_dir,
        } => {
            let (ck, hash_ok) = Checkpoint::load(&checkpoint)?;
            if !hash_ok {
                eprintln!("warning: checkpoint config hash does not match its recorded config");
            }
            let base = match env {
                Some(name) => EnvConfig::for_variant(parse_variant(&name)?),
                None => ck.env,
            };
            let mut sink = Vec::new();
            let outcome = trainer::evaluate(
                &ck.agent,
                &base,
                episodes,
                seed,
                log_dir.as_ref().map(|_| &mut sink),
            )?;
            if let Some(dir) = log_dir {
                fs::create_dir_all(&dir)?;
                let path = dir.join(format!("eval_{}_seed{}.jsonl", base.variant.name(), seed));
                write_episode_logs(&path, &sink)?;
                println!("logs: {}", path.display());
            }
            println!(
                "evaluated {} episodes on {}: success rate {:.3}, mean reward {:.2}",
                outcome.episodes,
                base.variant.name(),
                outcome.success_rate,
                outcome.mean_reward
            );
            Ok(())
        }
        Command::Analyze { logs, out, bandwidth } => {
            let episode_logs = read_log_dir(&logs)?;
            let cfg = AnalysisConfig {
                kde_bandwidth: bandwidth,
                ..AnalysisConfig::default()
            };
            let agg = aggregate(&episode_logs, &cfg).map_err(Error::Core)?;
            write_analysis_outputs(&out, &agg)?;
            println!(
                "analyzed {} episodes into {}",
                agg.rows.len(),
                out.display()
            );
            Ok(())
        }
    }
}

/// Writes the aggregate as five CSV tables and three SVG plots.
pub fn write_analysis_outputs(out: &Path, agg: &Aggregate) -> Result<()> {
    fs::create_dir_all(out)?;

    let mut w = csv::Writer::from_path(out.join("episodes.csv"))?;
    w.write_record([
        "episode_index",
        "variant",
        "seed",
        "target_x",
        "target_y",
        "target_z",
        "target_distance",
        "cumulative_reward",
        "grabs",
        "punches",
        "attempts",
        "steps_remaining",
        "success",
        "last_event_kind",
    ])?;
    for r in &agg.rows {
        w.write_record([
            r.episode_index.to_string(),
            r.variant.name().to_string(),
            r.seed.to_string(),
            fmt_f64(r.target[0]),
            fmt_f64(r.target[1]),
            fmt_f64(r.target[2]),
            fmt_f64(r.target_distance),
            fmt_f64(r.cumulative_reward),
            r.grabs.to_string(),
            r.punches.to_string(),
            r.attempts.to_string(),
            r.steps_remaining.to_string(),
            (r.success as u8).to_string(),
            match r.last_event_kind {
                Some(EventKind::Grab) => "grab".to_string(),
                Some(EventKind::Punch) => "punch".to_string(),
                None => String::new(),
            },
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("attempts_histogram.csv"))?;
    w.write_record(["attempts", "episodes"])?;
    for (attempts, episodes) in &agg.attempts_histogram {
        w.write_record([attempts.to_string(), episodes.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("success_x_bins.csv"))?;
    w.write_record(["x_bin_center", "successes", "episodes"])?;
    for (center, successes, episodes) in &agg.success_x_bins {
        w.write_record([fmt_f64(*center), successes.to_string(), episodes.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("variant_summary.csv"))?;
    w.write_record(["variant", "episodes", "success_rate", "mean_reward", "mean_attempts"])?;
    for s in &agg.per_variant {
        w.write_record([
            s.variant.name().to_string(),
            s.episodes.to_string(),
            fmt_f64(s.success_rate),
            fmt_f64(s.mean_reward),
            fmt_f64(s.mean_attempts),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("density.csv"))?;
    w.write_record(["x", "density"])?;
    if let Some(kde) = &agg.success_density {
        for (x, d) in kde.grid.iter().zip(&kde.density) {
            w.write_record([fmt_f64(*x), fmt_f64(*d)])?;
        }
    }
    w.flush()?;

    fs::write(
        out.join("reward_vs_distance.svg"),
        plots::scatter_reward_vs_distance(&agg.rows),
    )?;
    fs::write(
        out.join("attempts_vs_steps.svg"),
        plots::scatter_attempts_vs_steps_remaining(&agg.rows),
    )?;
    let empty = lob_core::analysis::Kde {
        grid: Vec::new(),
        density: Vec::new(),
    };
    fs::write(
        out.join("success_density.svg"),
        plots::density_line(agg.success_density.as_ref().unwrap_or(&empty)),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_spellings_normalize() {
        assert_eq!(parse_variant("flat").unwrap(), Variant::Flat);
        assert_eq!(parse_variant("target-near").unwrap(), Variant::TargetNear);
        assert_eq!(parse_variant("target_moving").unwrap(), Variant::TargetMoving);
        assert_eq!(parse_variant("rstatesp").unwrap(), Variant::RStateSp);
        assert_eq!(parse_variant("R-State-Sp").unwrap(), Variant::RStateSp);
        assert!(parse_variant("lava").is_err());
    }

    #[test]
    fn cli_parses_the_documented_grammar() {
        let cli = Cli::try_parse_from([
            "lob", "train", "--env", "wall", "--seed", "3", "--out", "/tmp/run", "--workers", "2",
        ])
        .unwrap();
        match cli.command {
            Command::Train { env, seed, workers, .. } => {
                assert_eq!(env.as_deref(), Some("wall"));
                assert_eq!(seed, Some(3));
                assert_eq!(workers, Some(2));
            }
            _ => panic!("expected train"),
        }
        let cli = Cli::try_parse_from([
            "lob", "analyze", "--logs", "/tmp/logs", "--out", "/tmp/tables",
        ])
        .unwrap();
        match cli.command {
            Command::Analyze { bandwidth, .. } => assert_eq!(bandwidth, 0.02),
            _ => panic!("expected analyze"),
        }
    }
}
