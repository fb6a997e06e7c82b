//! Post-hoc analysis of evaluation episodes: contact-event
//! classification, attempt counting, and success-density estimation.
//!
//! Everything here is pure and deterministic: logs go in, tables come
//! out. Parsing episode files and writing CSV/SVG belong to the
//! companion crate.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{self, Vec3};
use crate::sim::Variant;
use crate::{Error, Result};

/// Thresholds for event detection and density estimation. The episode
/// format pins none of these; they are reporting choices, set just
/// above solver noise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalysisConfig {
    /// Minimum box displacement (m) for a contact interval to count as
    /// an event at all. Grazing contacts that move nothing are noise.
    pub min_event_displacement: f64,
    /// Box speed (m/s) right after contact ends for an event to count
    /// as a throw attempt.
    pub min_release_speed: f64,
    /// Gaussian kernel bandwidth (m) for densities along x.
    pub kde_bandwidth: f64,
    /// Width (m) of the x histogram bins.
    pub bin_width: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_event_displacement: 0.01,
            min_release_speed: 0.05,
            kde_bandwidth: 0.02,
            bin_width: 0.01,
        }
    }
}

/// One control step as recorded during evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: u32,
    pub gripper_pos: Vec3,
    pub finger_gap: f64,
    pub box_pos: Vec3,
    pub box_vel: Vec3,
    pub action: [f64; 4],
    pub reward: f64,
    /// Any gripper body touched the box during the step.
    pub contact: bool,
    /// Both fingers held opposite faces during the step.
    pub grasped: bool,
}

/// A full recorded episode: identification header plus one record per
/// control step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeLog {
    pub variant: Variant,
    pub seed: u64,
    pub episode_index: u64,
    pub target: Vec3,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Structural checks every consumer relies on: consecutive step
    /// numbering from zero, sparse rewards, finite kinematics.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::MalformedEpisode(alloc::format!(
                "episode {} has no steps",
                self.episode_index
            )));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.step as usize != i {
                return Err(Error::MalformedEpisode(alloc::format!(
                    "step records out of order: index {i} is numbered {}",
                    s.step
                )));
            }
            if s.reward != 0.0 && s.reward != -1.0 {
                return Err(Error::MalformedEpisode(alloc::format!(
                    "reward at step {i} is {}, want -1 or 0",
                    s.reward
                )));
            }
            let finite = s.gripper_pos.iter().all(|v| v.is_finite())
                && s.box_pos.iter().all(|v| v.is_finite())
                && s.box_vel.iter().all(|v| v.is_finite())
                && s.finger_gap.is_finite();
            if !finite {
                return Err(Error::MalformedEpisode(alloc::format!(
                    "non-finite kinematics at step {i}"
                )));
            }
        }
        Ok(())
    }

    /// Sum of the per-step rewards. Always in `[-n, 0]` for a valid
    /// n-step log.
    pub fn cumulative_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// First step whose reward is zero, i.e. the box first sits within
    /// tolerance of the target.
    pub fn first_success(&self) -> Option<u32> {
        self.steps.iter().find(|s| s.reward == 0.0).map(|s| s.step)
    }

    /// Whether the box is on target when the episode ends.
    pub fn success(&self) -> bool {
        self.steps.last().is_some_and(|s| s.reward == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    /// The box was held between both fingers at some point.
    Grab,
    /// The box was shoved without ever being held.
    Punch,
}

/// A maximal contiguous gripper-box contact interval that displaced
/// the box. Steps are inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionEvent {
    pub kind: EventKind,
    pub start_step: u32,
    pub end_step: u32,
    /// Box displacement (m) from the sample before contact began to
    /// the sample after it ended. Records hold post-step state, so the
    /// surrounding samples bracket everything the contact moved,
    /// including an impulse delivered on the last contact step.
    pub displacement: f64,
}

/// Splits an episode into contact events and classifies each.
///
/// A maximal run of contact steps becomes a [`EventKind::Grab`] if the
/// box was grasped at any step in the run, a [`EventKind::Punch`]
/// otherwise. Runs that displace the box no further than
/// `cfg.min_event_displacement` produce no event regardless of finger
/// state.
pub fn classify_events(log: &EpisodeLog, cfg: &AnalysisConfig) -> Result<Vec<ActionEvent>> {
    log.validate()?;
    let n = log.steps.len();
    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        if !log.steps[i].contact {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && log.steps[i].contact {
            i += 1;
        }
        let end = i - 1;
        let before = start.saturating_sub(1);
        let after = if end + 1 < n { end + 1 } else { end };
        let displacement =
            math::norm3(math::sub3(log.steps[after].box_pos, log.steps[before].box_pos));
        if displacement <= cfg.min_event_displacement {
            continue;
        }
        let grasped = log.steps[start..=end].iter().any(|s| s.grasped);
        events.push(ActionEvent {
            kind: if grasped {
                EventKind::Grab
            } else {
                EventKind::Punch
            },
            start_step: start as u32,
            end_step: end as u32,
            displacement,
        });
    }
    Ok(events)
}

/// Attempt count and success timing for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptSummary {
    /// Events after which the box left the gripper moving faster than
    /// the release-speed threshold.
    pub attempts: u32,
    /// Step at which the box first sat on target, if ever.
    pub first_success: Option<u32>,
    /// Episode length minus the first success step; zero if the episode
    /// never succeeded.
    pub steps_remaining: u32,
}

/// Counts throw attempts: contact events whose end is followed by the
/// box leaving the gripper faster than `cfg.min_release_speed`. An
/// event still in contact at the final step released nothing.
pub fn count_attempts(log: &EpisodeLog, cfg: &AnalysisConfig) -> Result<AttemptSummary> {
    let events = classify_events(log, cfg)?;
    let n = log.steps.len();
    let attempts = events
        .iter()
        .filter(|e| {
            let after = e.end_step as usize + 1;
            after < n && math::norm3(log.steps[after].box_vel) > cfg.min_release_speed
        })
        .count() as u32;
    let first_success = log.first_success();
    let steps_remaining = match first_success {
        Some(s) => n as u32 - s,
        None => 0,
    };
    Ok(AttemptSummary {
        attempts,
        first_success,
        steps_remaining,
    })
}

/// One row of the per-episode table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode_index: u64,
    pub variant: Variant,
    pub seed: u64,
    pub target: Vec3,
    /// Planar distance from the box's start position to the target.
    pub target_distance: f64,
    pub cumulative_reward: f64,
    pub grabs: u32,
    pub punches: u32,
    pub attempts: u32,
    pub steps_remaining: u32,
    pub success: bool,
    /// Kind of the final contact event, the one that decided the
    /// episode's outcome.
    pub last_event_kind: Option<EventKind>,
}

/// Per-variant roll-up across episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub episodes: u32,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub mean_attempts: f64,
}

/// A kernel density estimate sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Everything the report writers need, computed in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rows: Vec<EpisodeRow>,
    /// (attempt count, number of episodes with that count).
    pub attempts_histogram: Vec<(u32, u32)>,
    /// (bin center x, successful episodes, total episodes) per
    /// `bin_width` bin of target x.
    pub success_x_bins: Vec<(f64, u32, u32)>,
    /// Density of target x over successful episodes; `None` when no
    /// episode succeeded.
    pub success_density: Option<Kde>,
    pub per_variant: Vec<VariantSummary>,
}

/// Reduces a batch of episode logs to the summary tables.
pub fn aggregate(logs: &[EpisodeLog], cfg: &AnalysisConfig) -> Result<Aggregate> {
    if logs.is_empty() {
        return Err(Error::NoSamples("episode logs"));
    }
    let mut rows = Vec::with_capacity(logs.len());
    let mut histogram: BTreeMap<u32, u32> = BTreeMap::new();
    let mut bins: BTreeMap<i64, (u32, u32)> = BTreeMap::new();
    let mut variant_acc: BTreeMap<usize, (Variant, u32, u32, f64, f64)> = BTreeMap::new();
    let mut success_x = Vec::new();

    for log in logs {
        let events = classify_events(log, cfg)?;
        let summary = count_attempts(log, cfg)?;
        let grabs = events.iter().filter(|e| e.kind == EventKind::Grab).count() as u32;
        let punches = events.len() as u32 - grabs;
        let success = log.success();
        let row = EpisodeRow {
            episode_index: log.episode_index,
            variant: log.variant,
            seed: log.seed,
            target: log.target,
            target_distance: math::planar_dist(log.steps[0].box_pos, log.target),
            cumulative_reward: log.cumulative_reward(),
            grabs,
            punches,
            attempts: summary.attempts,
            steps_remaining: summary.steps_remaining,
            success,
            last_event_kind: events.last().map(|e| e.kind),
        };

        *histogram.entry(row.attempts).or_insert(0) += 1;
        let bin = math::floor(log.target[0] / cfg.bin_width) as i64;
        let slot = bins.entry(bin).or_insert((0, 0));
        slot.1 += 1;
        if success {
            slot.0 += 1;
            success_x.push(log.target[0]);
        }
        let acc = variant_acc
            .entry(log.variant as usize)
            .or_insert((log.variant, 0, 0, 0.0, 0.0));
        acc.1 += 1;
        acc.2 += u32::from(success);
        acc.3 += row.cumulative_reward;
        acc.4 += f64::from(row.attempts);
        rows.push(row);
    }

    let success_density = if success_x.is_empty() {
        None
    } else {
        Some(gaussian_kde(&success_x, cfg.kde_bandwidth, cfg.bin_width)?)
    };
    Ok(Aggregate {
        rows,
        attempts_histogram: histogram.into_iter().collect(),
        success_x_bins: bins
            .into_iter()
            .map(|(k, (s, t))| ((k as f64 + 0.5) * cfg.bin_width, s, t))
            .collect(),
        success_density,
        per_variant: variant_acc
            .into_values()
            .map(|(variant, n, wins, reward, attempts)| VariantSummary {
                variant,
                episodes: n,
                success_rate: f64::from(wins) / f64::from(n),
                mean_reward: reward / f64::from(n),
                mean_attempts: attempts / f64::from(n),
            })
            .collect(),
    })
}

/// Gaussian kernel density estimate on a regular grid of the given
/// spacing. The grid extends six bandwidths past the sample range, so
/// the trapezoid integral of the result recovers 1 to well under 1e-6.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, spacing: f64) -> Result<Kde> {
    if samples.is_empty() {
        return Err(Error::NoSamples("density estimate"));
    }
    if !(bandwidth > 0.0 && spacing > 0.0) {
        return Err(Error::Config(alloc::format!(
            "density estimate needs positive bandwidth and spacing, got {bandwidth} and {spacing}"
        )));
    }
    let (mut lo, mut hi) = (samples[0], samples[0]);
    for &x in samples {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let start = lo - 6.0 * bandwidth;
    let span = (hi + 6.0 * bandwidth) - start;
    let points = (span / spacing) as usize + 2;
    let norm = 1.0 / (samples.len() as f64 * bandwidth * math::sqrt(2.0 * core::f64::consts::PI));
    let mut grid = Vec::with_capacity(points);
    let mut density = Vec::with_capacity(points);
    for i in 0..points {
        let g = start + i as f64 * spacing;
        let mut d = 0.0;
        for &x in samples {
            let z = (g - x) / bandwidth;
            d += math::exp(-0.5 * z * z);
        }
        grid.push(g);
        density.push(d * norm);
    }
    Ok(Kde { grid, density })
}

/// Trapezoid-rule integral of samples on an arbitrary grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 1..xs.len().min(ys.len()) {
        total += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    const LEN: usize = 60;

    fn idle_log() -> EpisodeLog {
        let steps = (0..LEN)
            .map(|i| StepRecord {
                step: i as u32,
                gripper_pos: [0.0, 0.0, 0.05],
                finger_gap: 0.06,
                box_pos: [0.10, 0.0, 0.025],
                box_vel: [0.0; 3],
                action: [0.0; 4],
                reward: -1.0,
                contact: false,
                grasped: false,
            })
            .collect();
        EpisodeLog {
            variant: Variant::Wall,
            seed: 1,
            episode_index: 0,
            target: [0.40, 0.0, 0.025],
            steps,
        }
    }

    /// Marks `steps` as in contact, sliding the box from its position
    /// at the interval start to `to` and leaving it there.
    fn splice_move(
        log: &mut EpisodeLog,
        start: usize,
        end: usize,
        grasped: bool,
        to: Vec3,
    ) {
        let from = log.steps[start].box_pos;
        let span = (end - start + 1) as f64;
        for i in start..=end {
            let t = (i - start + 1) as f64 / span;
            log.steps[i].contact = true;
            log.steps[i].grasped = grasped;
            log.steps[i].box_pos = [
                from[0] + t * (to[0] - from[0]),
                from[1] + t * (to[1] - from[1]),
                from[2] + t * (to[2] - from[2]),
            ];
        }
        for i in end + 1..LEN {
            log.steps[i].box_pos = to;
        }
    }

    #[test]
    fn held_interval_classifies_as_grab() {
        let mut log = idle_log();
        splice_move(&mut log, 10, 20, true, [0.40, 0.0, 0.025]);
        let events = classify_events(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Grab);
        assert_eq!((events[0].start_step, events[0].end_step), (10, 20));
        assert!(events[0].displacement > 0.29);
    }

    #[test]
    fn open_finger_shove_classifies_as_punch() {
        let mut log = idle_log();
        splice_move(&mut log, 8, 11, false, [0.30, 0.0, 0.025]);
        let events = classify_events(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Punch);
        assert!((events[0].displacement - 0.20).abs() < 1e-12);
    }

    #[test]
    fn no_contact_means_no_events() {
        let log = idle_log();
        assert!(classify_events(&log, &AnalysisConfig::default())
            .unwrap()
            .is_empty());
        let summary = count_attempts(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(summary.attempts, 0);
        assert_eq!(summary.steps_remaining, 0);
    }

    #[test]
    fn grazing_contact_is_ignored() {
        let mut log = idle_log();
        splice_move(&mut log, 30, 31, false, [0.105, 0.0, 0.025]);
        assert!(classify_events(&log, &AnalysisConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_throw_success_counts_one_attempt() {
        let mut log = idle_log();
        splice_move(&mut log, 12, 18, true, [0.38, 0.0, 0.025]);
        log.steps[19].box_vel = [0.4, 0.0, 0.1];
        for i in 21..LEN {
            log.steps[i].box_pos = [0.40, 0.0, 0.025];
            log.steps[i].reward = 0.0;
        }
        let summary = count_attempts(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(summary.attempts, 1);
        assert_eq!(summary.first_success, Some(21));
        assert_eq!(summary.steps_remaining, 39);
    }

    /// Two failed grab-and-throws, then a third that lands on target.
    fn two_misses_then_scoring_throw() -> EpisodeLog {
        let mut log = idle_log();
        splice_move(&mut log, 5, 10, true, [0.16, 0.0, 0.025]);
        log.steps[11].box_vel = [0.10, 0.0, 0.0];
        splice_move(&mut log, 20, 25, true, [0.23, 0.0, 0.025]);
        log.steps[26].box_vel = [0.10, 0.0, 0.0];
        splice_move(&mut log, 35, 40, true, [0.36, 0.0, 0.025]);
        log.steps[41].box_vel = [0.30, 0.0, 0.1];
        for i in 43..LEN {
            log.steps[i].box_pos = [0.40, 0.0, 0.025];
            log.steps[i].reward = 0.0;
        }
        log
    }

    #[test]
    fn repeated_grabs_before_a_scoring_throw_all_count() {
        let log = two_misses_then_scoring_throw();
        let cfg = AnalysisConfig::default();
        let events = classify_events(&log, &cfg).unwrap();
        assert_eq!(events.len(), 3);
        assert!(events.iter().all(|e| e.kind == EventKind::Grab));

        let summary = count_attempts(&log, &cfg).unwrap();
        assert_eq!(summary.attempts, 3);
        let scored_at = summary.first_success.unwrap();
        assert_eq!(summary.steps_remaining, 60 - scored_at);
        let before_success = events
            .iter()
            .filter(|e| u32::from(e.end_step) < scored_at)
            .count();
        assert_eq!(before_success, 3);
        assert_eq!(
            events.iter().filter(|e| e.end_step < 35).count(),
            2,
            "two failed attempts precede the scoring throw"
        );
    }

    #[test]
    fn still_grasped_at_episode_end_is_not_an_attempt() {
        let mut log = idle_log();
        splice_move(&mut log, 50, LEN - 1, true, [0.20, 0.0, 0.025]);
        let summary = count_attempts(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(summary.attempts, 0);
    }

    #[test]
    fn slow_release_is_not_an_attempt() {
        let mut log = idle_log();
        splice_move(&mut log, 10, 15, true, [0.20, 0.0, 0.025]);
        log.steps[16].box_vel = [0.01, 0.0, 0.0];
        let summary = count_attempts(&log, &AnalysisConfig::default()).unwrap();
        assert_eq!(summary.attempts, 0);
    }

    #[test]
    fn malformed_logs_are_rejected() {
        let mut log = idle_log();
        log.steps[7].reward = -0.5;
        assert!(matches!(
            classify_events(&log, &AnalysisConfig::default()),
            Err(Error::MalformedEpisode(_))
        ));

        let mut log = idle_log();
        log.steps[3].step = 9;
        assert!(log.validate().is_err());

        let empty = EpisodeLog {
            steps: vec![],
            ..idle_log()
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn identical_successes_peak_at_their_position() {
        let samples = vec![0.40; 100];
        let kde = gaussian_kde(&samples, 0.02, 0.01).unwrap();
        let integral = trapezoid(&kde.grid, &kde.density);
        assert!(
            (integral - 1.0).abs() < 1e-6,
            "density integral {integral} strays from 1"
        );
        let peak = kde
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((kde.grid[peak] - 0.40).abs() < 0.006);
    }

    #[test]
    fn uniform_successes_give_a_flat_interior_density() {
        let mut rng = crate::DetRng::seed_from_u64(0xD3_11);
        let samples: Vec<f64> = (0..20_000)
            .map(|_| rng.random_range(0.25..0.55))
            .collect();
        let kde = gaussian_kde(&samples, 0.02, 0.01).unwrap();
        let interior: Vec<f64> = kde
            .grid
            .iter()
            .zip(&kde.density)
            .filter(|(g, _)| **g > 0.25 + 0.06 && **g < 0.55 - 0.06)
            .map(|(_, d)| *d)
            .collect();
        let hi = interior.iter().cloned().fold(f64::MIN, f64::max);
        let lo = interior.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            hi / lo < 1.10,
            "interior density varies {hi:.4} to {lo:.4}, more than 10%"
        );
        let integral = trapezoid(&kde.grid, &kde.density);
        assert!((integral - 1.0).abs() < 1e-6);
    }

    #[test]
    fn aggregate_requires_at_least_one_log() {
        assert!(matches!(
            aggregate(&[], &AnalysisConfig::default()),
            Err(Error::NoSamples(_))
        ));
    }

    #[test]
    fn all_failure_batch_reports_zero_successes() {
        let logs: Vec<EpisodeLog> = (0..5)
            .map(|i| {
                let mut log = idle_log();
                log.episode_index = i;
                log
            })
            .collect();
        let agg = aggregate(&logs, &AnalysisConfig::default()).unwrap();
        assert!(agg.rows.iter().all(|r| !r.success));
        assert!(agg.success_x_bins.iter().all(|(_, wins, _)| *wins == 0));
        assert!(agg.success_density.is_none());
        assert_eq!(agg.per_variant.len(), 1);
        assert_eq!(agg.per_variant[0].success_rate, 0.0);
        assert_eq!(agg.attempts_histogram, vec![(0, 5)]);
    }

    #[test]
    fn aggregate_splits_grabs_and_punches_per_row() {
        let mut grab = two_misses_then_scoring_throw();
        grab.episode_index = 0;
        let mut punch = idle_log();
        punch.episode_index = 1;
        punch.variant = Variant::Flat;
        splice_move(&mut punch, 8, 11, false, [0.30, 0.0, 0.025]);
        let agg = aggregate(&[grab, punch], &AnalysisConfig::default()).unwrap();
        assert_eq!((agg.rows[0].grabs, agg.rows[0].punches), (3, 0));
        assert_eq!((agg.rows[1].grabs, agg.rows[1].punches), (0, 1));
        assert_eq!(agg.rows[0].last_event_kind, Some(EventKind::Grab));
        assert_eq!(agg.rows[1].last_event_kind, Some(EventKind::Punch));
        assert_eq!(agg.per_variant.len(), 2);
        let kde = agg.success_density.expect("one episode succeeded");
        assert!((trapezoid(&kde.grid, &kde.density) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Whatever the contact pattern, events are disjoint, ordered,
        /// in range, and all displaced past the threshold.
        #[test]
        fn events_are_disjoint_ordered_and_in_range(
            contact_bits in proptest::collection::vec(any::<bool>(), LEN),
            grasp_bits in proptest::collection::vec(any::<bool>(), LEN),
            xs in proptest::collection::vec(-0.5f64..0.5, LEN),
        ) {
            let mut log = idle_log();
            for i in 0..LEN {
                log.steps[i].contact = contact_bits[i];
                log.steps[i].grasped = contact_bits[i] && grasp_bits[i];
                log.steps[i].box_pos = [xs[i], 0.0, 0.025];
            }
            let cfg = AnalysisConfig::default();
            let events = classify_events(&log, &cfg).unwrap();
            let mut prev_end: Option<u32> = None;
            for e in &events {
                prop_assert!(e.start_step <= e.end_step);
                prop_assert!((e.end_step as usize) < LEN);
                prop_assert!(e.displacement > cfg.min_event_displacement);
                if let Some(p) = prev_end {
                    prop_assert!(e.start_step > p + 1, "events must be separated by a gap");
                }
                prev_end = Some(e.end_step);
            }
            let summary = count_attempts(&log, &cfg).unwrap();
            prop_assert!(summary.attempts as usize <= events.len());
        }
    }
}
