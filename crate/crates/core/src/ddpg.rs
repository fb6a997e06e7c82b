//! Deterministic actor-critic agent for goal-conditioned control.
//!
//! The actor maps a normalized state-goal pair to a squashed action,
//! the critic scores state-goal-action triples, and both keep slowly
//! tracking target copies blended by Polyak averaging. Updates consume
//! minibatches of replayed transitions and apply exact gradients
//! through the hand-rolled dense networks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::her::Transition;
use crate::net::{
    adam_step, init_network, Activation, AdamState, GradientBundle, NetworkParams,
};
use crate::{Error, Result};

/// Hidden widths of the default actor/critic instantiation: three
/// hidden layers.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 64];

/// Agent hyperparameters. `Default` carries the tuned values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Hyperparams {
    /// Discount factor.
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Weight on the *old* target network in target tracking.
    pub polyak: f64,
    /// Replay capacity in transitions.
    pub buffer_size: usize,
    pub batch_size: usize,
    /// Standard-deviation floor for observation normalization.
    pub normalize_eps: f64,
    /// Normalized features are clipped to this many deviations.
    pub normalize_clip: f64,
    /// Raw observations are clipped to this magnitude before
    /// normalization.
    pub obs_clip: f64,
    /// Quadratic penalty on pre-scale actor outputs.
    pub action_l2: f64,
    /// Actions live in `[-max_action, max_action]`.
    pub max_action: f64,
    /// Gaussian exploration noise scale, relative to `max_action`.
    pub noise_std: f64,
    /// Chance of replacing the policy action with a uniform draw.
    pub random_action_prob: f64,
    /// Number of episodes a rollout worker contributes per cycle.
    pub rollout_batch: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.98,
            actor_lr: 0.001,
            critic_lr: 0.001,
            polyak: 0.95,
            buffer_size: 1_000_000,
            batch_size: 256,
            normalize_eps: 0.01,
            normalize_clip: 5.0,
            obs_clip: 200.0,
            action_l2: 1.0,
            max_action: 1.0,
            noise_std: 0.2,
            random_action_prob: 0.3,
            rollout_batch: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        };
        check(
            self.gamma > 0.0 && self.gamma < 1.0,
            &format!("gamma must lie in (0, 1), got {}", self.gamma),
        )?;
        check(
            (0.0..=1.0).contains(&self.polyak),
            &format!("polyak must lie in [0, 1], got {}", self.polyak),
        )?;
        check(self.actor_lr > 0.0, "actor_lr must be positive")?;
        check(self.critic_lr > 0.0, "critic_lr must be positive")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(self.buffer_size >= 1, "buffer_size must be at least 1")?;
        check(self.normalize_eps > 0.0, "normalize_eps must be positive")?;
        check(self.normalize_clip > 0.0, "normalize_clip must be positive")?;
        check(self.obs_clip > 0.0, "obs_clip must be positive")?;
        check(self.action_l2 >= 0.0, "action_l2 must be non-negative")?;
        check(self.max_action > 0.0, "max_action must be positive")?;
        check(self.noise_std >= 0.0, "noise_std must be non-negative")?;
        check(
            (0.0..=1.0).contains(&self.random_action_prob),
            "random_action_prob must lie in [0, 1]",
        )?;
        check(self.rollout_batch >= 1, "rollout_batch must be at least 1")?;
        Ok(())
    }
}

/// Running feature statistics for observation normalization.
///
/// Tracks per-feature sum, sum of squares, and a shared sample count;
/// the derived deviation is floored at `eps` so constant features stay
/// harmless. Normalized outputs are clipped to `[-clip, clip]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Normalizer {
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
    pub count: f64,
    pub eps: f64,
    pub clip: f64,
}

impl Normalizer {
    pub fn new(dim: usize, eps: f64, clip: f64) -> Self {
        Normalizer {
            sum: vec![0.0; dim],
            sumsq: vec![0.0; dim],
            count: 0.0,
            eps,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    /// Folds one observation into the running statistics.
    pub fn observe(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.sum.len(), "normalizer dimension mismatch");
        for (i, &x) in row.iter().enumerate() {
            self.sum[i] += x;
            self.sumsq[i] += x * x;
        }
        self.count += 1.0;
    }

    /// Folds a batch of observations; equivalent to observing each row
    /// in order.
    pub fn update(&mut self, rows: &[Vec<f64>]) {
        for row in rows {
            self.observe(row);
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            0.0
        } else {
            self.sum[i] / self.count
        }
    }

    pub fn std(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            return self.eps;
        }
        let mean = self.mean(i);
        let var = self.sumsq[i] / self.count - mean * mean;
        crate::math::sqrt(var.max(self.eps * self.eps))
    }

    /// `(x - mean) / std`, elementwise, clipped to `[-clip, clip]`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.normalize_into(x, &mut out);
        out
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut Vec<f64>) {
        assert_eq!(x.len(), self.sum.len(), "normalizer dimension mismatch");
        out.clear();
        for (i, &xi) in x.iter().enumerate() {
            let z = (xi - self.mean(i)) / self.std(i);
            out.push(z.clamp(-self.clip, self.clip));
        }
    }
}

/// The four networks of the agent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentParams {
    pub actor: NetworkParams,
    pub critic: NetworkParams,
    pub actor_target: NetworkParams,
    pub critic_target: NetworkParams,
}

/// Blends `target <- polyak * target + (1 - polyak) * main`, elementwise.
pub fn polyak_blend(target: &mut NetworkParams, main: &NetworkParams, polyak: f64) -> Result<()> {
    if target.layers.len() != main.layers.len() {
        return Err(Error::Shape {
            context: "polyak network layer count",
            expected: main.layers.len(),
            got: target.layers.len(),
        });
    }
    for (t, m) in target.layers.iter_mut().zip(&main.layers) {
        if t.weights.len() != m.weights.len() || t.bias.len() != m.bias.len() {
            return Err(Error::Shape {
                context: "polyak layer buffer",
                expected: m.weights.len(),
                got: t.weights.len(),
            });
        }
        for (tw, mw) in t.weights.iter_mut().zip(&m.weights) {
            *tw = polyak * *tw + (1.0 - polyak) * mw;
        }
        for (tb, mb) in t.bias.iter_mut().zip(&m.bias) {
            *tb = polyak * *tb + (1.0 - polyak) * mb;
        }
    }
    Ok(())
}

/// A complete goal-conditioned agent: networks, their target copies,
/// optimizers, and input normalization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Agent {
    pub hp: Hyperparams,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    /// When set, the achieved goal is concatenated into network inputs
    /// alongside the desired goal.
    pub include_achieved_goal: bool,
    pub params: AgentParams,
    pub obs_norm: Normalizer,
    pub goal_norm: Normalizer,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl Agent {
    /// Builds a seeded agent. The actor draws from `seed`, the critic
    /// from `seed + 1`; targets start as exact copies.
    pub fn new(
        state_dim: usize,
        goal_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        include_achieved_goal: bool,
        hp: Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        if state_dim == 0 || goal_dim == 0 || action_dim == 0 {
            return Err(Error::Config("agent dimensions must be positive".into()));
        }
        if hidden.is_empty() {
            return Err(Error::Config("need at least one hidden layer".into()));
        }
        let goal_parts = if include_achieved_goal { 2 } else { 1 };
        let actor_in = state_dim + goal_parts * goal_dim;
        let critic_in = actor_in + action_dim;

        let mut actor_sizes = vec![actor_in];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(action_dim);
        let mut actor_acts = vec![Activation::Relu; hidden.len()];
        actor_acts.push(Activation::Tanh);

        let mut critic_sizes = vec![critic_in];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let mut critic_acts = vec![Activation::Relu; hidden.len()];
        critic_acts.push(Activation::Identity);

        let actor = init_network(&actor_sizes, &actor_acts, seed)?;
        let critic = init_network(&critic_sizes, &critic_acts, seed.wrapping_add(1))?;
        let actor_target = actor.clone();
        let critic_target = critic.clone();
        let actor_opt = AdamState::new(&actor, hp.actor_lr);
        let critic_opt = AdamState::new(&critic, hp.critic_lr);

        Ok(Agent {
            state_dim,
            goal_dim,
            action_dim,
            include_achieved_goal,
            params: AgentParams {
                actor,
                critic,
                actor_target,
                critic_target,
            },
            obs_norm: Normalizer::new(state_dim, hp.normalize_eps, hp.normalize_clip),
            goal_norm: Normalizer::new(goal_dim, hp.normalize_eps, hp.normalize_clip),
            actor_opt,
            critic_opt,
            hp,
        })
    }

    /// Clips a raw observation and normalizes state and goal parts into
    /// one network input vector.
    fn build_input(&self, state: &[f64], achieved: &[f64; 3], desired: &[f64; 3]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::Shape {
                context: "agent state",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        let clip = self.hp.obs_clip;
        let clipped: Vec<f64> = state.iter().map(|x| x.clamp(-clip, clip)).collect();
        let mut input = self.obs_norm.normalize(&clipped);
        if self.include_achieved_goal {
            let ag: Vec<f64> = achieved.iter().map(|x| x.clamp(-clip, clip)).collect();
            input.extend(self.goal_norm.normalize(&ag));
        }
        let dg: Vec<f64> = desired.iter().map(|x| x.clamp(-clip, clip)).collect();
        input.extend(self.goal_norm.normalize(&dg));
        Ok(input)
    }

    /// Pre-scale policy output in `[-1, 1]^action_dim` from an arbitrary
    /// actor network.
    fn raw_policy(&self, net: &NetworkParams, state: &[f64], achieved: &[f64; 3], desired: &[f64; 3]) -> Result<Vec<f64>> {
        let input = self.build_input(state, achieved, desired)?;
        net.forward(&input)
    }

    /// Deterministic policy action: `max_action * tanh(...)`, so every
    /// component lies in `[-max_action, max_action]`.
    pub fn actor_forward(&self, state: &[f64], achieved: &[f64; 3], desired: &[f64; 3]) -> Result<Vec<f64>> {
        let mut u = self.raw_policy(&self.params.actor, state, achieved, desired)?;
        for x in &mut u {
            *x *= self.hp.max_action;
        }
        Ok(u)
    }

    /// Behavior policy. With `explore` set, the action is replaced by a
    /// uniform draw with probability `random_action_prob`, otherwise
    /// perturbed with Gaussian noise of deviation
    /// `noise_std * max_action`; the result is clipped back into the
    /// action box. The RNG is consumed in a fixed order: the uniform
    /// coin first, then either `action_dim` uniforms or `action_dim`
    /// normal draws.
    pub fn select_action(
        &self,
        state: &[f64],
        achieved: &[f64; 3],
        desired: &[f64; 3],
        explore: bool,
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>> {
        let max = self.hp.max_action;
        if explore && rng.random::<f64>() < self.hp.random_action_prob {
            return Ok((0..self.action_dim).map(|_| rng.random_range(-max..max)).collect());
        }
        let mut action = self.actor_forward(state, achieved, desired)?;
        if explore {
            let sigma = self.hp.noise_std * max;
            for a in &mut action {
                let n: f64 = rng.sample(StandardNormal);
                *a += sigma * n;
            }
        }
        for a in &mut action {
            *a = a.clamp(-max, max);
        }
        Ok(action)
    }

    /// One-step lookahead targets `r + gamma * Q'(s', g, pi'(s', g))`,
    /// clipped to `[-1 / (1 - gamma), 0]` (the value range a -1/0 reward
    /// can produce).
    pub fn compute_target_q(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        let clip_low = -1.0 / (1.0 - self.hp.gamma);
        let mut targets = Vec::with_capacity(batch.len());
        for tr in batch {
            let u_next = self.raw_policy(
                &self.params.actor_target,
                &tr.next_state,
                &tr.next_achieved_goal,
                &tr.desired_goal,
            )?;
            let mut input = self.build_input(&tr.next_state, &tr.next_achieved_goal, &tr.desired_goal)?;
            input.extend_from_slice(&u_next);
            let q_next = self.params.critic_target.forward(&input)?[0];
            targets.push((tr.reward + self.hp.gamma * q_next).clamp(clip_low, 0.0));
        }
        Ok(targets)
    }

    /// One critic gradient step toward `targets`; returns the
    /// pre-update mean squared error.
    pub fn critic_update(&mut self, batch: &[Transition], targets: &[f64]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("critic_update needs a non-empty batch".into()));
        }
        if batch.len() != targets.len() {
            return Err(Error::Shape {
                context: "critic targets",
                expected: batch.len(),
                got: targets.len(),
            });
        }
        let n = batch.len() as f64;
        let mut grads = GradientBundle::zeros_for(&self.params.critic);
        let mut loss = 0.0;
        for (tr, &y) in batch.iter().zip(targets) {
            let mut input = self.build_input(&tr.state, &tr.achieved_goal, &tr.desired_goal)?;
            input.extend(tr.action.iter().map(|a| a / self.hp.max_action));
            let trace = self.params.critic.trace(&input)?;
            let q = trace.output()[0];
            let diff = q - y;
            loss += diff * diff / n;
            self.params
                .critic
                .backprop_into(&trace, &[2.0 * diff / n], &mut grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        adam_step(&mut self.params.critic, &grads, &mut self.critic_opt)?;
        Ok(loss)
    }

    /// One actor gradient step maximizing the critic's score with an L2
    /// penalty on pre-scale outputs; returns the pre-update loss
    /// `-mean(Q) + action_l2 * mean(u^2)`.
    pub fn actor_update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("actor_update needs a non-empty batch".into()));
        }
        let n = batch.len() as f64;
        let penalty_scale = self.hp.action_l2 / (n * self.action_dim as f64);
        let mut grads = GradientBundle::zeros_for(&self.params.actor);
        let mut loss = 0.0;
        for tr in batch {
            let actor_input = self.build_input(&tr.state, &tr.achieved_goal, &tr.desired_goal)?;
            let actor_trace = self.params.actor.trace(&actor_input)?;
            let u = actor_trace.output().to_vec();

            let mut critic_input = actor_input;
            critic_input.extend_from_slice(&u);
            let critic_trace = self.params.critic.trace(&critic_input)?;
            let q = critic_trace.output()[0];
            let dq_dinput = self.params.critic.backward_input(&critic_trace, &[1.0])?;
            let dq_du = &dq_dinput[dq_dinput.len() - self.action_dim..];

            let upstream: Vec<f64> = u
                .iter()
                .zip(dq_du)
                .map(|(&ui, &dqi)| -dqi / n + 2.0 * penalty_scale * ui)
                .collect();
            self.params.actor.backprop_into(&actor_trace, &upstream, &mut grads)?;
            loss += -q / n + penalty_scale * u.iter().map(|ui| ui * ui).sum::<f64>();
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor loss"));
        }
        adam_step(&mut self.params.actor, &grads, &mut self.actor_opt)?;
        Ok(loss)
    }

    /// Moves both target networks a Polyak step toward their main
    /// networks.
    pub fn polyak_update(&mut self) -> Result<()> {
        polyak_blend(&mut self.params.actor_target, &self.params.actor, self.hp.polyak)?;
        polyak_blend(&mut self.params.critic_target, &self.params.critic, self.hp.polyak)?;
        Ok(())
    }
}
