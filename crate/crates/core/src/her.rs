//! Episode-structured replay with hindsight goal relabeling.
//!
//! Episodes are stored whole so that sampling can look ahead to goals
//! the agent actually achieved later in the same episode. Internally an
//! episode keeps one state series of length `T + 1` rather than per-step
//! `(state, next_state)` pairs; that halves memory and makes broken
//! chaining unrepresentable. Capacity is counted in transitions and
//! eviction drops whole episodes, oldest first.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::{Error, Result};

/// Fixed episode length in control steps.
pub const EPISODE_LEN: usize = 60;

/// Planar distance under which an achieved position satisfies a goal.
pub const SUCCESS_TOLERANCE: f64 = 0.05;

/// Sparse goal-conditioned reward: 0 when the achieved position lies
/// within [`SUCCESS_TOLERANCE`] of the goal in the table plane (x, y),
/// otherwise -1.
pub fn recompute_reward(achieved: [f64; 3], goal: [f64; 3]) -> f64 {
    recompute_reward_with(achieved, goal, SUCCESS_TOLERANCE)
}

/// Same as [`recompute_reward`] with an explicit tolerance.
pub fn recompute_reward_with(achieved: [f64; 3], goal: [f64; 3], tolerance: f64) -> f64 {
    if math::planar_dist(achieved, goal) < tolerance {
        0.0
    } else {
        -1.0
    }
}

/// One environment step as the learner consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; 4],
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Goal position achieved in `state`.
    pub achieved_goal: [f64; 3],
    /// Goal the agent was pursuing (possibly relabeled in hindsight).
    pub desired_goal: [f64; 3],
    /// Goal position achieved in `next_state`; rewards are computed
    /// against this.
    pub next_achieved_goal: [f64; 3],
}

/// A complete episode in struct-of-arrays form.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    env_id: String,
    seed: u64,
    episode_index: u64,
    /// `EPISODE_LEN + 1` states: initial plus one per step.
    states: Vec<Vec<f64>>,
    /// Achieved goal of each state, same length as `states`.
    achieved: Vec<[f64; 3]>,
    actions: Vec<[f64; 4]>,
    rewards: Vec<f64>,
    /// The episode's original target, constant across its steps.
    desired: [f64; 3],
}

impl EpisodeRecord {
    /// Builds a record directly from its series. Lengths must line up:
    /// `states` and `achieved` carry `EPISODE_LEN + 1` entries, the rest
    /// `EPISODE_LEN`.
    pub fn from_series(
        env_id: String,
        seed: u64,
        episode_index: u64,
        states: Vec<Vec<f64>>,
        achieved: Vec<[f64; 3]>,
        actions: Vec<[f64; 4]>,
        rewards: Vec<f64>,
        desired: [f64; 3],
    ) -> Result<Self> {
        if states.len() != EPISODE_LEN + 1 || achieved.len() != EPISODE_LEN + 1 {
            return Err(Error::MalformedEpisode(format!(
                "need {} states and achieved goals, got {} and {}",
                EPISODE_LEN + 1,
                states.len(),
                achieved.len()
            )));
        }
        if actions.len() != EPISODE_LEN || rewards.len() != EPISODE_LEN {
            return Err(Error::MalformedEpisode(format!(
                "need {EPISODE_LEN} actions and rewards, got {} and {}",
                actions.len(),
                rewards.len()
            )));
        }
        let dim = states[0].len();
        if dim == 0 || states.iter().any(|s| s.len() != dim) {
            return Err(Error::MalformedEpisode(
                "states must share one positive dimension".into(),
            ));
        }
        Ok(EpisodeRecord {
            env_id,
            seed,
            episode_index,
            states,
            achieved,
            actions,
            rewards,
            desired,
        })
    }

    /// Builds a record from per-step transitions, validating that they
    /// chain: each `next_state` must equal the following `state`, and
    /// goals must be episode-consistent.
    pub fn from_transitions(
        env_id: String,
        seed: u64,
        episode_index: u64,
        transitions: &[Transition],
    ) -> Result<Self> {
        if transitions.len() != EPISODE_LEN {
            return Err(Error::MalformedEpisode(format!(
                "expected {EPISODE_LEN} transitions, got {}",
                transitions.len()
            )));
        }
        let desired = transitions[0].desired_goal;
        for (t, tr) in transitions.iter().enumerate() {
            if tr.desired_goal != desired {
                return Err(Error::MalformedEpisode(format!(
                    "desired goal changes at step {t}"
                )));
            }
            if t + 1 < transitions.len() {
                let next = &transitions[t + 1];
                if tr.next_state != next.state || tr.next_achieved_goal != next.achieved_goal {
                    return Err(Error::MalformedEpisode(format!(
                        "broken state chaining between steps {t} and {}",
                        t + 1
                    )));
                }
            }
        }
        let mut states: Vec<Vec<f64>> = transitions.iter().map(|t| t.state.clone()).collect();
        states.push(transitions[EPISODE_LEN - 1].next_state.clone());
        let mut achieved: Vec<[f64; 3]> = transitions.iter().map(|t| t.achieved_goal).collect();
        achieved.push(transitions[EPISODE_LEN - 1].next_achieved_goal);
        let actions = transitions.iter().map(|t| t.action).collect();
        let rewards = transitions.iter().map(|t| t.reward).collect();
        Self::from_series(
            env_id,
            seed,
            episode_index,
            states,
            achieved,
            actions,
            rewards,
            desired,
        )
    }

    /// Reconstructs the transition at step `t`.
    pub fn transition(&self, t: usize) -> Transition {
        Transition {
            state: self.states[t].clone(),
            action: self.actions[t],
            reward: self.rewards[t],
            next_state: self.states[t + 1].clone(),
            achieved_goal: self.achieved[t],
            desired_goal: self.desired,
            next_achieved_goal: self.achieved[t + 1],
        }
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn achieved(&self) -> &[[f64; 3]] {
        &self.achieved
    }

    pub fn actions(&self) -> &[[f64; 4]] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn desired(&self) -> [f64; 3] {
        self.desired
    }

    pub fn len(&self) -> usize {
        EPISODE_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Provenance of one sampled transition, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleMeta {
    /// Index into the buffer's episode queue at sampling time.
    pub episode_slot: usize,
    pub step: usize,
    pub relabeled: bool,
}

/// A minibatch drawn from the buffer. `transitions[i]` corresponds to
/// `meta[i]`.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub transitions: Vec<Transition>,
    pub meta: Vec<SampleMeta>,
}

/// Episode-granular replay buffer with future-strategy relabeling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    tolerance: f64,
    episodes: VecDeque<EpisodeRecord>,
    transition_count: usize,
}

impl ReplayBuffer {
    /// `capacity` is counted in transitions and must hold at least one
    /// episode.
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_tolerance(capacity, SUCCESS_TOLERANCE)
    }

    pub fn with_tolerance(capacity: usize, tolerance: f64) -> Result<Self> {
        if capacity < EPISODE_LEN {
            return Err(Error::Config(format!(
                "buffer capacity {capacity} cannot hold one {EPISODE_LEN}-step episode"
            )));
        }
        if !(tolerance > 0.0) || !tolerance.is_finite() {
            return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
        }
        Ok(ReplayBuffer {
            capacity,
            tolerance,
            episodes: VecDeque::new(),
            transition_count: 0,
        })
    }

    /// Appends an episode, evicting oldest episodes while over capacity.
    /// Stored rewards must agree with the sparse reward of each step's
    /// outcome; anything else indicates a corrupted episode.
    pub fn store_episode(&mut self, episode: EpisodeRecord) -> Result<()> {
        for t in 0..EPISODE_LEN {
            let expect = recompute_reward_with(episode.achieved[t + 1], episode.desired, self.tolerance);
            if episode.rewards[t] != expect {
                return Err(Error::MalformedEpisode(format!(
                    "stored reward {} at step {t} disagrees with outcome reward {expect}",
                    episode.rewards[t]
                )));
            }
        }
        self.episodes.push_back(episode);
        self.transition_count += EPISODE_LEN;
        while self.transition_count > self.capacity {
            self.episodes.pop_front();
            self.transition_count -= EPISODE_LEN;
        }
        Ok(())
    }

    /// Number of stored transitions.
    pub fn len(&self) -> usize {
        self.transition_count
    }

    pub fn is_empty(&self) -> bool {
        self.transition_count == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    /// Draws a minibatch of uniformly chosen (episode, step) pairs. With
    /// probability `1 - 1/(1 + k_future)` a transition's desired goal is
    /// replaced by the goal achieved at a uniformly chosen step at or
    /// after its own outcome (the "future" strategy), and its reward is
    /// recomputed against the new goal. `k_future = 0` disables
    /// relabeling.
    ///
    /// Per sample the RNG is consumed in a fixed order: episode, step,
    /// relabel coin, then (only when relabeling) the future step.
    pub fn sample_batch(
        &self,
        batch_size: usize,
        k_future: usize,
        rng: &mut impl Rng,
    ) -> Result<SampledBatch> {
        if self.episodes.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let relabel_p = 1.0 - 1.0 / (1.0 + k_future as f64);
        let mut transitions = Vec::with_capacity(batch_size);
        let mut meta = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let slot = rng.random_range(0..self.episodes.len());
            let t = rng.random_range(0..EPISODE_LEN);
            let episode = &self.episodes[slot];
            let mut tr = episode.transition(t);
            let relabeled = k_future > 0 && rng.random::<f64>() < relabel_p;
            if relabeled {
                let future = rng.random_range(t..EPISODE_LEN);
                tr.desired_goal = episode.achieved[future + 1];
                tr.reward =
                    recompute_reward_with(tr.next_achieved_goal, tr.desired_goal, self.tolerance);
            }
            transitions.push(tr);
            meta.push(SampleMeta {
                episode_slot: slot,
                step: t,
                relabeled,
            });
        }
        Ok(SampledBatch { transitions, meta })
    }
}
