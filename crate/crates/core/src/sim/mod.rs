//! Table-top manipulation environments: a kinematic two-finger gripper
//! and a 5 cm elastic box on a bounded table, with optional wall or
//! ditch constraints between the box and the target region.
//!
//! Episodes are 60 control steps of 46 ms each (2.76 s). The agent
//! commands gripper displacement (x, y, z) plus finger aperture; the
//! reward is -1 per step until the box sits within `success_tolerance`
//! of the target in the table plane, then 0. Physics is deterministic;
//! randomness enters only through `reset`.

mod dynamics;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::her::recompute_reward_with;
use crate::math::{planar_dist, sqrt, sub3, Vec3};
use crate::{Error, Result};

/// The task variants. `Flat` has no constraint and near targets;
/// `Wall` and `Ditch` put an obstacle between box and target;
/// `TargetNear` widens the target range on a free table;
/// `TargetMoving` / `TargetExpanding` are the wall task with a
/// target region that drifts or grows over global training steps;
/// `RStateSp` is the wall task with the reduced 19-dim observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    Flat,
    Wall,
    Ditch,
    TargetNear,
    TargetMoving,
    TargetExpanding,
    RStateSp,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Flat,
        Variant::Wall,
        Variant::Ditch,
        Variant::TargetNear,
        Variant::TargetMoving,
        Variant::TargetExpanding,
        Variant::RStateSp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Flat => "flat",
            Variant::Wall => "wall",
            Variant::Ditch => "ditch",
            Variant::TargetNear => "target_near",
            Variant::TargetMoving => "target_moving",
            Variant::TargetExpanding => "target_expanding",
            Variant::RStateSp => "r_state_sp",
        }
    }

    pub fn from_name(name: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Config(alloc::format!("unknown variant '{name}'")))
    }
}

/// Geometry, timing, and contact constants. All lengths in metres,
/// masses in kg, stiffnesses in N/m.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvConfig {
    pub variant: Variant,
    /// Table surface extent; the top lies at z = 0.
    pub table_x: [f64; 2],
    pub table_y: [f64; 2],
    /// Wall slab faces (present on wall-family variants).
    pub wall_x: [f64; 2],
    pub wall_height: f64,
    /// Ditch gap faces (present on the ditch variant).
    pub ditch_x: [f64; 2],
    pub ditch_depth: f64,
    pub target_x: [f64; 2],
    pub target_y: [f64; 2],
    /// Range drift per global environment step for the moving and
    /// expanding variants; zero elsewhere.
    pub variant_rate: f64,
    pub episode_len: u32,
    pub dt_control: f64,
    pub dt_physics: f64,
    pub gripper_workspace_min: Vec3,
    pub gripper_workspace_max: Vec3,
    pub gripper_start: Vec3,
    /// Commanded displacement per control step at full action.
    pub gripper_step_scale: f64,
    pub finger_gap_max: f64,
    pub initial_gap: f64,
    pub finger_speed: f64,
    /// Fingertips hang this far below the wrist point.
    pub finger_drop: f64,
    pub palm_radius: f64,
    pub finger_radius: f64,
    pub box_half_extent: f64,
    pub box_mass: f64,
    pub box_start: [f64; 2],
    pub box_start_jitter: f64,
    pub gravity: f64,
    /// Net table stiffness/damping when all four bottom corners rest.
    pub k_table: f64,
    pub c_table: f64,
    /// Net wall/ditch face stiffness/damping across four corners.
    pub k_wall: f64,
    pub c_wall: f64,
    pub mu: f64,
    /// Gripper-box contact spring; also the elastic-compression
    /// constant whose stored energy drives the catapult launch.
    pub k_box: f64,
    pub c_box: f64,
    pub k_grasp: f64,
    pub c_grasp: f64,
    /// Fingers narrower than this with both side faces touched engage
    /// the grasp anchor.
    pub grasp_gap_max: f64,
    pub max_compression: f64,
    /// Projection backstop caps; the impenetrability guarantees are
    /// stated relative to these.
    pub max_penetration_floor: f64,
    pub max_penetration_face: f64,
    /// Spin shedding threshold (rad/s). The small-angle rotation update
    /// is only faithful up to moderate spin, so sustained tumbling above
    /// this rate decays under a drag torque, the same guard mainstream
    /// engines apply to angular velocity. Brief impact spikes pass
    /// through; only spin held across many substeps is bled off.
    pub max_spin: f64,
    pub success_tolerance: f64,
}

impl EnvConfig {
    pub fn for_variant(variant: Variant) -> EnvConfig {
        let mut cfg = EnvConfig {
            variant,
            table_x: [-0.275, 0.55],
            table_y: [-0.325, 0.325],
            wall_x: [0.275, 0.285],
            wall_height: 0.03,
            ditch_x: [0.25, 0.275],
            ditch_depth: 0.02,
            target_x: [0.25, 0.55],
            target_y: [-0.15, 0.15],
            variant_rate: 0.0,
            episode_len: 60,
            dt_control: 0.046,
            dt_physics: 0.002,
            gripper_workspace_min: [-0.25, -0.30, 0.02],
            gripper_workspace_max: [0.27, 0.30, 0.35],
            gripper_start: [0.0, 0.0, 0.05],
            gripper_step_scale: 0.033,
            finger_gap_max: 0.08,
            initial_gap: 0.06,
            finger_speed: 0.4,
            finger_drop: 0.04,
            palm_radius: 0.015,
            finger_radius: 0.012,
            box_half_extent: 0.025,
            box_mass: 2.0,
            box_start: [0.10, 0.0],
            box_start_jitter: 0.02,
            gravity: 9.81,
            k_table: 5.0e4,
            c_table: 75.0,
            k_wall: 2.0e5,
            c_wall: 300.0,
            mu: 0.4,
            k_box: 8.0e3,
            c_box: 120.0,
            k_grasp: 5.0e3,
            c_grasp: 200.0,
            grasp_gap_max: 0.05,
            max_compression: 0.02,
            max_penetration_floor: 0.012,
            max_penetration_face: 0.004,
            max_spin: 16.0,
            success_tolerance: 0.05,
        };
        match variant {
            Variant::Flat => cfg.target_x = [0.15, 0.25],
            Variant::TargetNear => cfg.target_x = [0.10, 0.70],
            Variant::TargetMoving => cfg.variant_rate = 2.0e-8,
            Variant::TargetExpanding => cfg.variant_rate = 6.67e-9,
            Variant::Wall | Variant::Ditch | Variant::RStateSp => {}
        }
        cfg
    }

    pub fn has_wall(&self) -> bool {
        matches!(
            self.variant,
            Variant::Wall | Variant::RStateSp | Variant::TargetMoving | Variant::TargetExpanding
        )
    }

    pub fn has_ditch(&self) -> bool {
        self.variant == Variant::Ditch
    }

    /// Observation width: 25, or 19 with rotation state removed.
    pub fn obs_dim(&self) -> usize {
        if self.variant == Variant::RStateSp {
            19
        } else {
            25
        }
    }

    pub fn goal_dim(&self) -> usize {
        3
    }

    /// Physics substeps per control step.
    pub fn substeps(&self) -> u32 {
        libm::round(self.dt_control / self.dt_physics) as u32
    }

    /// Box center height at static equilibrium on the table: the half
    /// extent minus the weight-loaded spring deflection.
    pub fn resting_height(&self) -> f64 {
        self.box_half_extent - self.box_mass * self.gravity / self.k_table
    }

    /// Coefficient of restitution implied by the normal spring-damper
    /// pair, from the damping ratio of a single contact cycle. The
    /// integrator evaluates the contact spring at the predicted
    /// penetration `pen - v_n * dt`, whose velocity term acts as an
    /// extra damper of coefficient k*dt on top of the configured one.
    pub fn restitution_estimate(&self) -> f64 {
        let c_eff = self.c_table + self.k_table * self.dt_physics;
        let zeta = c_eff / (2.0 * sqrt(self.k_table * self.box_mass));
        if zeta >= 1.0 {
            return 0.0;
        }
        crate::math::exp(-zeta * core::f64::consts::PI / sqrt(1.0 - zeta * zeta))
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        };
        check(self.table_x[0] < self.table_x[1], "table x range empty")?;
        check(self.table_y[0] < self.table_y[1], "table y range empty")?;
        check(self.target_x[0] <= self.target_x[1], "target x range reversed")?;
        check(self.target_y[0] <= self.target_y[1], "target y range reversed")?;
        check(self.episode_len >= 1, "episode_len must be at least 1")?;
        check(
            self.dt_control > 0.0 && self.dt_physics > 0.0,
            "time steps must be positive",
        )?;
        let n = self.substeps();
        check(
            n >= 1 && (self.dt_control - n as f64 * self.dt_physics).abs() < 1e-9,
            "dt_control must be an integer multiple of dt_physics",
        )?;
        for i in 0..3 {
            check(
                self.gripper_workspace_min[i] < self.gripper_workspace_max[i],
                "gripper workspace empty",
            )?;
            check(
                self.gripper_start[i] >= self.gripper_workspace_min[i]
                    && self.gripper_start[i] <= self.gripper_workspace_max[i],
                "gripper start outside workspace",
            )?;
        }
        check(
            self.box_half_extent > 0.0 && self.box_mass > 0.0 && self.gravity > 0.0,
            "box parameters must be positive",
        )?;
        check(
            self.k_table > 0.0 && self.k_wall > 0.0 && self.k_box > 0.0 && self.k_grasp > 0.0,
            "stiffnesses must be positive",
        )?;
        check(
            self.c_table >= 0.0 && self.c_wall >= 0.0 && self.c_box >= 0.0 && self.c_grasp >= 0.0,
            "damping must be non-negative",
        )?;
        check(self.mu >= 0.0, "friction must be non-negative")?;
        // Explicit-integration stability: the stiffest spring must stay
        // well under the semi-implicit Euler limit of 2/(dt*omega).
        let k_max = self.k_table.max(self.k_wall).max(self.k_box).max(self.k_grasp);
        check(
            self.dt_physics * sqrt(k_max / self.box_mass) < 1.5,
            "dt_physics too large for the stiffest spring",
        )?;
        check(
            self.finger_gap_max > 0.0
                && self.initial_gap >= 0.0
                && self.initial_gap <= self.finger_gap_max
                && self.finger_speed > 0.0,
            "finger parameters out of range",
        )?;
        check(
            self.palm_radius > 0.0 && self.finger_radius > 0.0,
            "gripper radii must be positive",
        )?;
        check(
            self.max_penetration_floor > 0.0 && self.max_penetration_face > 0.0,
            "penetration caps must be positive",
        )?;
        check(self.max_spin > 0.0, "spin saturation must be positive")?;
        check(self.success_tolerance > 0.0, "success tolerance must be positive")?;
        check(
            self.gripper_step_scale > 0.0,
            "gripper step scale must be positive",
        )?;
        check(
            self.box_start_jitter >= 0.0,
            "box start jitter must be non-negative",
        )?;
        check(self.resting_height() > 0.0, "table spring too soft for the box weight")?;
        Ok(())
    }
}

/// Applies the per-variant schedule to the target region: the moving
/// variant translates the x-range, the expanding variant pushes the far
/// x bound and both y bounds outward. Other variants pass through
/// unchanged.
pub fn apply_variant_rule(cfg: &EnvConfig, global_step: u64) -> EnvConfig {
    let mut out = cfg.clone();
    let drift = cfg.variant_rate * global_step as f64;
    match cfg.variant {
        Variant::TargetMoving => {
            out.target_x[0] += drift;
            out.target_x[1] += drift;
        }
        Variant::TargetExpanding => {
            out.target_x[1] += drift;
            out.target_y[0] -= drift;
            out.target_y[1] += drift;
        }
        _ => {}
    }
    out
}

/// Anchor data while the box is held between the fingers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspState {
    /// Box-center offset from the wrist, frozen at grab time.
    pub offset: Vec3,
    pub gap_at_grasp: f64,
}

/// Full dynamic state of one environment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub gripper_pos: Vec3,
    pub gripper_vel: Vec3,
    /// Finger aperture (distance between fingertip centers).
    pub gap: f64,
    pub gap_vel: f64,
    pub box_pos: Vec3,
    pub box_vel: Vec3,
    /// XYZ Euler angles.
    pub box_rot: Vec3,
    pub box_rotvel: Vec3,
    /// Elastic squeeze depth currently stored in the box.
    pub compression: f64,
    pub target: Vec3,
    pub step_index: u32,
    pub grasp: Option<GraspState>,
    /// Substeps since the palm last touched the box; the catapult
    /// fires once this debounce passes with compression stored.
    pub palm_clear_substeps: u32,
    /// Launch direction remembered from the latest squeeze geometry.
    pub squeeze_dir: Vec3,
}

/// What the agent sees each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: Vec<f64>,
    pub achieved_goal: [f64; 3],
    pub desired_goal: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub is_success: bool,
    pub gripper_box_contact: bool,
    pub grasped: bool,
    pub box_airborne: bool,
}

/// One environment instance. Instances are independent values and may
/// be stepped on separate threads.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    substeps: u32,
    state: SimState,
    work_signed: f64,
    work_positive: f64,
    episode_max_floor_pen: f64,
    episode_max_face_pen: f64,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Env> {
        cfg.validate()?;
        let substeps = cfg.substeps();
        let state = SimState {
            gripper_pos: cfg.gripper_start,
            gripper_vel: [0.0; 3],
            gap: cfg.initial_gap,
            gap_vel: 0.0,
            box_pos: [cfg.box_start[0], cfg.box_start[1], cfg.resting_height()],
            box_vel: [0.0; 3],
            box_rot: [0.0; 3],
            box_rotvel: [0.0; 3],
            compression: 0.0,
            target: [0.0, 0.0, cfg.resting_height()],
            step_index: 0,
            grasp: None,
            palm_clear_substeps: 0,
            squeeze_dir: [0.0, 0.0, 1.0],
        };
        Ok(Env {
            cfg,
            substeps,
            state,
            work_signed: 0.0,
            work_positive: 0.0,
            episode_max_floor_pen: 0.0,
            episode_max_face_pen: 0.0,
        })
    }

    pub fn from_variant(variant: Variant) -> Result<Env> {
        Env::new(EnvConfig::for_variant(variant))
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Begins a fresh episode. Consumes exactly four uniform draws, in
    /// order: box x jitter, box y jitter, target x, target y. Sampled
    /// targets are pulled back inside the table so the goal is always
    /// physically occupiable.
    pub fn reset(&mut self, rng: &mut impl Rng) -> Observation {
        let cfg = &self.cfg;
        let j = cfg.box_start_jitter;
        let (bx, by) = if j > 0.0 {
            (
                cfg.box_start[0] + rng.random_range(-j..j),
                cfg.box_start[1] + rng.random_range(-j..j),
            )
        } else {
            (cfg.box_start[0], cfg.box_start[1])
        };
        let sample = |rng: &mut dyn rand::RngCore, range: [f64; 2]| {
            if range[0] < range[1] {
                rng.random_range(range[0]..range[1])
            } else {
                range[0]
            }
        };
        let he = cfg.box_half_extent;
        let tx = sample(rng, cfg.target_x).clamp(cfg.table_x[0] + he, cfg.table_x[1] - he);
        let ty = sample(rng, cfg.target_y).clamp(cfg.table_y[0] + he, cfg.table_y[1] - he);

        self.state = SimState {
            gripper_pos: cfg.gripper_start,
            gripper_vel: [0.0; 3],
            gap: cfg.initial_gap,
            gap_vel: 0.0,
            box_pos: [bx, by, cfg.resting_height()],
            box_vel: [0.0; 3],
            box_rot: [0.0; 3],
            box_rotvel: [0.0; 3],
            compression: 0.0,
            target: [tx, ty, cfg.resting_height()],
            step_index: 0,
            grasp: None,
            palm_clear_substeps: 0,
            squeeze_dir: [0.0, 0.0, 1.0],
        };
        self.work_signed = 0.0;
        self.work_positive = 0.0;
        self.episode_max_floor_pen = 0.0;
        self.episode_max_face_pen = 0.0;
        self.observe()
    }

    /// Advances one control step. `action` components are interpreted
    /// in [-1, 1]: xyz scale the commanded gripper displacement, the
    /// fourth maps linearly to the commanded finger aperture. Values
    /// outside the box are clamped.
    pub fn step(&mut self, action: &[f64; 4]) -> Result<(Observation, f64, StepInfo)> {
        if self.state.step_index >= self.cfg.episode_len {
            return Err(Error::EpisodeOver);
        }
        let a: Vec<f64> = action.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        let scale = self.cfg.gripper_step_scale;
        let mut target = [0.0; 3];
        for i in 0..3 {
            target[i] = (self.state.gripper_pos[i] + a[i] * scale).clamp(
                self.cfg.gripper_workspace_min[i],
                self.cfg.gripper_workspace_max[i],
            );
        }
        let v_grip = crate::math::scale3(
            sub3(target, self.state.gripper_pos),
            1.0 / self.cfg.dt_control,
        );
        let gap_target = 0.5 * (a[3] + 1.0) * self.cfg.finger_gap_max;

        let acc = dynamics::control_step(&self.cfg, &mut self.state, v_grip, gap_target, self.substeps);
        for i in 0..3 {
            self.state.gripper_pos[i] = self.state.gripper_pos[i].clamp(
                self.cfg.gripper_workspace_min[i],
                self.cfg.gripper_workspace_max[i],
            );
        }
        self.state.step_index += 1;
        self.work_signed += acc.work_signed;
        self.work_positive += acc.work_positive;
        self.episode_max_floor_pen = self.episode_max_floor_pen.max(acc.max_floor_pen);
        self.episode_max_face_pen = self.episode_max_face_pen.max(acc.max_face_pen);

        let reward = recompute_reward_with(
            self.state.box_pos,
            self.state.target,
            self.cfg.success_tolerance,
        );
        let info = StepInfo {
            is_success: reward == 0.0,
            gripper_box_contact: acc.gripper_box_contact,
            grasped: acc.grasped,
            box_airborne: acc.airborne,
        };
        Ok((self.observe(), reward, info))
    }

    pub fn is_success(&self) -> bool {
        planar_dist(self.state.box_pos, self.state.target) < self.cfg.success_tolerance
    }

    /// Builds the observation in the published component order:
    /// gripper position, box position, box rotation, box velocity, box
    /// rotational velocity, gripper-to-box offset, finger positions,
    /// gripper velocity, finger velocities. The reduced variant drops
    /// both rotation blocks.
    pub fn observe(&self) -> Observation {
        let st = &self.state;
        let full = self.cfg.variant != Variant::RStateSp;
        let mut state = Vec::with_capacity(self.cfg.obs_dim());
        state.extend_from_slice(&st.gripper_pos);
        state.extend_from_slice(&st.box_pos);
        if full {
            state.extend_from_slice(&st.box_rot);
        }
        state.extend_from_slice(&st.box_vel);
        if full {
            state.extend_from_slice(&st.box_rotvel);
        }
        state.extend_from_slice(&sub3(st.box_pos, st.gripper_pos));
        state.push(0.5 * st.gap);
        state.push(0.5 * st.gap);
        state.extend_from_slice(&st.gripper_vel);
        state.push(0.5 * st.gap_vel);
        state.push(0.5 * st.gap_vel);
        debug_assert_eq!(state.len(), self.cfg.obs_dim());
        Observation {
            state,
            achieved_goal: st.box_pos,
            desired_goal: st.target,
        }
    }

    /// Box mechanical energy (kinetic + rotational + gravitational +
    /// stored compression).
    pub fn mechanical_energy(&self) -> f64 {
        dynamics::mechanical_energy(&self.cfg, &self.state)
    }

    /// Cumulative (signed, positive-part) work done on the box through
    /// the gripper since the last reset.
    pub fn gripper_work(&self) -> (f64, f64) {
        (self.work_signed, self.work_positive)
    }

    /// Episode-maximum post-projection penetrations (floor, face); the
    /// impenetrability invariants bound these by the config caps.
    pub fn max_penetrations(&self) -> (f64, f64) {
        (self.episode_max_floor_pen, self.episode_max_face_pen)
    }

    /// Current deepest corner penetration below the local floor.
    pub fn floor_penetration(&self) -> f64 {
        dynamics::floor_penetration(&self.cfg, &self.state)
    }

    /// Current deepest corner penetration into the wall volume.
    pub fn wall_penetration(&self) -> f64 {
        dynamics::wall_penetration(&self.cfg, &self.state)
    }

    #[cfg(test)]
    pub(crate) fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }
}

/// The grab-carry-press macro used as the catapult feasibility
/// fixture: pick the box up, slide it to a parking spot short of the
/// wall, let go, squeeze it against the table from behind its center,
/// and release. Tuned against `Variant::Wall` reset with seed 7.
pub fn catapult_script() -> Vec<[f64; 4]> {
    let mut s = vec![
        // Rise until the hanging fingers clear the box top.
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 1.0, 1.0],
        // Approach over the box and center on it.
        [1.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 1.0],
        [0.46, -0.23, 0.0, 1.0],
        // Lower the fingers to the box equator and close.
        [0.0, 0.0, -0.64, 1.0],
        [0.0, 0.0, -0.64, 1.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 0.0, -1.0],
    ];
    // Slide the box toward the wall holding the gap at the grasp
    // width; closing further would push the fingers deep into the box
    // and shove it out of the grip.
    s.extend(core::iter::repeat([1.0, 0.0, 0.0, 0.08]).take(5));
    s.extend([
        // Stop and let the anchor lag settle before letting go.
        [0.0, 0.0, 0.0, 0.08],
        [0.0, 0.0, 0.0, 0.08],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
        // Climb clear of the box top.
        [0.0, 0.0, 1.0, 1.0],
    ]);
    // Let the released box sit still.
    s.extend(core::iter::repeat([0.0, 0.0, 0.0, 1.0]).take(4));
    s.extend([
        // Come down with the palm a little behind the box center; the
        // offset tilts the stored squeeze toward the wall but must stay
        // shy of the half extent or the contact walks off the top face
        // and shoves the box sideways instead.
        [-0.48, 0.0, -1.0, 1.0],
        // Press the box against the table to full squeeze.
        [0.0, 0.0, -0.91, 1.0],
        // Release up and back so the palm clears the flight path; the
        // stored squeeze fires the box over the wall.
        [-0.5, 0.0, 1.0, 1.0],
    ]);
    // Coast while the box flies and settles.
    s.extend(core::iter::repeat([0.0, 0.0, 0.0, 1.0]).take(17));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DetRng;
    use rand::SeedableRng;

    fn reset_env(variant: Variant, seed: u64) -> (Env, Observation) {
        let mut env = Env::from_variant(variant).unwrap();
        let mut rng = DetRng::seed_from_u64(seed);
        let obs = env.reset(&mut rng);
        (env, obs)
    }

    #[test]
    fn default_configs_match_published_geometry() {
        let wall = EnvConfig::for_variant(Variant::Wall);
        assert_eq!(wall.wall_x, [0.275, 0.285]);
        assert_eq!(wall.wall_height, 0.03);
        assert_eq!(wall.target_x, [0.25, 0.55]);
        assert_eq!(wall.target_y, [-0.15, 0.15]);
        assert_eq!(wall.episode_len, 60);
        assert_eq!(wall.substeps(), 23);
        assert!((wall.dt_control * 60.0 - 2.76).abs() < 1e-12);
        assert!(wall.has_wall() && !wall.has_ditch());

        let ditch = EnvConfig::for_variant(Variant::Ditch);
        assert_eq!(ditch.ditch_x, [0.25, 0.275]);
        assert_eq!(ditch.ditch_depth, 0.02);
        assert!(!ditch.has_wall() && ditch.has_ditch());

        let near = EnvConfig::for_variant(Variant::TargetNear);
        assert_eq!(near.target_x, [0.10, 0.70]);

        let flat = EnvConfig::for_variant(Variant::Flat);
        assert_eq!(flat.target_x, [0.15, 0.25]);
        assert!(!flat.has_wall() && !flat.has_ditch());

        for v in Variant::ALL {
            EnvConfig::for_variant(v).validate().unwrap();
            assert_eq!(Variant::from_name(v.name()).unwrap(), v);
        }
    }

    #[test]
    fn variant_rule_shifts_and_expands_target_ranges() {
        let moving = EnvConfig::for_variant(Variant::TargetMoving);
        let shifted = apply_variant_rule(&moving, 1_000_000);
        assert!((shifted.target_x[0] - (0.25 + 0.02)).abs() < 1e-12);
        assert!((shifted.target_x[1] - (0.55 + 0.02)).abs() < 1e-12);
        assert_eq!(shifted.target_y, moving.target_y);
        assert_eq!(apply_variant_rule(&moving, 0), moving);

        let expanding = EnvConfig::for_variant(Variant::TargetExpanding);
        let grown = apply_variant_rule(&expanding, 1_000_000);
        assert!((grown.target_x[1] - (0.55 + 0.00667)).abs() < 1e-12);
        assert!((grown.target_y[0] - (-0.15 - 0.00667)).abs() < 1e-12);
        assert!((grown.target_y[1] - (0.15 + 0.00667)).abs() < 1e-12);
        assert_eq!(grown.target_x[0], expanding.target_x[0]);

        let wall = EnvConfig::for_variant(Variant::Wall);
        assert_eq!(apply_variant_rule(&wall, 123_456), wall);
    }

    #[test]
    fn reset_places_box_and_target_in_their_ranges() {
        let mut env = Env::from_variant(Variant::Wall).unwrap();
        let mut rng = DetRng::seed_from_u64(5);
        let mut tx_sum = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let obs = env.reset(&mut rng);
            let st = env.state();
            assert!((st.box_pos[0] - 0.10).abs() <= 0.02);
            assert!(st.box_pos[1].abs() <= 0.02);
            assert_eq!(st.box_pos[2], env.cfg().resting_height());
            assert!(st.target[0] >= 0.25 && st.target[0] <= 0.55);
            assert!(st.target[1].abs() <= 0.15);
            assert_eq!(st.box_vel, [0.0; 3]);
            assert_eq!(st.compression, 0.0);
            assert_eq!(obs.achieved_goal, st.box_pos);
            assert_eq!(obs.desired_goal, st.target);
            tx_sum += st.target[0];
        }
        // Uniform on [0.25, 0.55]: mean 0.40, sigma of the sample mean
        // = 0.30 / sqrt(12 n); 3 sigma ~ 0.0026.
        assert!((tx_sum / n as f64 - 0.40).abs() < 0.0026);
    }

    #[test]
    fn reset_is_deterministic_for_equal_seeds() {
        let (env_a, obs_a) = reset_env(Variant::Ditch, 99);
        let (env_b, obs_b) = reset_env(Variant::Ditch, 99);
        assert_eq!(env_a.state(), env_b.state());
        assert_eq!(obs_a, obs_b);
    }

    #[test]
    fn observation_layout_and_dims() {
        let (mut env, obs) = reset_env(Variant::Wall, 3);
        assert_eq!(obs.state.len(), 25);
        let (obs, _, _) = env.step(&[0.5, -0.2, 0.1, 0.3]).unwrap();
        let st = env.state().clone();
        assert_eq!(&obs.state[0..3], &st.gripper_pos);
        assert_eq!(&obs.state[3..6], &st.box_pos);
        assert_eq!(&obs.state[6..9], &st.box_rot);
        assert_eq!(&obs.state[9..12], &st.box_vel);
        assert_eq!(&obs.state[12..15], &st.box_rotvel);
        assert_eq!(
            &obs.state[15..18],
            &[
                st.box_pos[0] - st.gripper_pos[0],
                st.box_pos[1] - st.gripper_pos[1],
                st.box_pos[2] - st.gripper_pos[2]
            ]
        );
        assert_eq!(obs.state[18], 0.5 * st.gap);
        assert_eq!(obs.state[19], 0.5 * st.gap);
        assert_eq!(&obs.state[20..23], &st.gripper_vel);
        assert_eq!(obs.state[23], 0.5 * st.gap_vel);

        let (_, obs_r) = reset_env(Variant::RStateSp, 3);
        assert_eq!(obs_r.state.len(), 19);
        assert_eq!(obs_r.desired_goal.len(), 3);
    }

    #[test]
    fn reduced_state_drops_exactly_the_rotation_blocks() {
        let mut full = Env::from_variant(Variant::Wall).unwrap();
        let mut reduced = Env::from_variant(Variant::RStateSp).unwrap();
        let mut rng_a = DetRng::seed_from_u64(11);
        let mut rng_b = DetRng::seed_from_u64(11);
        full.reset(&mut rng_a);
        reduced.reset(&mut rng_b);
        for _ in 0..5 {
            full.step(&[0.4, 0.1, -0.2, 0.0]).unwrap();
            reduced.step(&[0.4, 0.1, -0.2, 0.0]).unwrap();
        }
        let f = full.observe().state;
        let r = reduced.observe().state;
        let mut kept: Vec<f64> = Vec::new();
        kept.extend_from_slice(&f[0..6]);
        kept.extend_from_slice(&f[9..12]);
        kept.extend_from_slice(&f[15..25]);
        assert_eq!(kept, r);
    }

    #[test]
    fn box_at_rest_stays_at_rest_under_zero_action() {
        let (mut env, _) = reset_env(Variant::Wall, 21);
        let start = env.state().box_pos;
        let mut total_reward = 0.0;
        for _ in 0..60 {
            let (_, r, info) = env.step(&[0.0; 4]).unwrap();
            total_reward += r;
            assert!(!info.gripper_box_contact);
            assert!(!info.box_airborne);
        }
        let drift = crate::math::norm3(sub3(env.state().box_pos, start));
        assert!(drift < 1e-9, "resting box drifted {drift}");
        assert_eq!(total_reward, -60.0);
        assert!(matches!(env.step(&[0.0; 4]), Err(Error::EpisodeOver)));
    }

    #[test]
    fn box_on_target_scores_zero_reward() {
        let (mut env, _) = reset_env(Variant::Flat, 2);
        let target = env.state().target;
        env.state_mut().box_pos = [target[0], target[1], env.cfg().resting_height()];
        let (_, r, info) = env.step(&[0.0; 4]).unwrap();
        assert_eq!(r, 0.0);
        assert!(info.is_success);
        assert!(env.is_success());
    }

    #[test]
    fn gripper_stays_clamped_to_the_workspace() {
        let (mut env, _) = reset_env(Variant::Wall, 8);
        for _ in 0..30 {
            env.step(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        }
        let p = env.state().gripper_pos;
        assert!(p[0] <= 0.27 + 1e-12, "gripper x reached {}", p[0]);
        assert!(p[1] <= 0.30 + 1e-12);
        assert!(p[2] <= 0.35 + 1e-12);
        for _ in 0..30 {
            env.step(&[-1.0, -1.0, -1.0, 0.0]).unwrap();
        }
        let p = env.state().gripper_pos;
        assert!(p[0] >= -0.25 - 1e-12);
        assert!(p[1] >= -0.30 - 1e-12);
        assert!(p[2] >= 0.02 - 1e-12);
    }

    #[test]
    fn dropped_box_bounces_to_the_predicted_apex_band() {
        let (mut env, _) = reset_env(Variant::Flat, 31);
        let rest = env.cfg().resting_height();
        env.state_mut().box_pos[2] = rest + 0.1;
        // e ~ 0.4 from the spring-damper pair including the
        // integrator's predicted-penetration damping; apex = e^2 * h
        // with model slack. Contact lasts ~20 ms, under one control
        // step, so the bounce is detected by the velocity flipping
        // upward rather than by catching a sample inside the contact
        // window.
        let e = env.cfg().restitution_estimate();
        assert!(e > 0.35 && e < 0.45, "restitution estimate {e}");
        let mut samples = Vec::new();
        for _ in 0..60 {
            env.step(&[0.0; 4]).unwrap();
            samples.push((env.state().box_pos[2], env.state().box_vel[2]));
        }
        let rebound = samples
            .iter()
            .position(|&(_, vz)| vz > 0.05)
            .expect("box never rebounded");
        let rebound_apex = samples[rebound..]
            .iter()
            .map(|&(z, _)| z)
            .fold(f64::MIN, f64::max)
            - rest;
        assert!(
            (0.010..=0.022).contains(&rebound_apex),
            "rebound apex {rebound_apex}"
        );
    }

    #[test]
    fn sliding_box_only_loses_kinetic_energy() {
        let (mut env, _) = reset_env(Variant::Flat, 17);
        env.state_mut().box_vel = [1.0, 0.0, 0.0];
        let ke = |env: &Env| {
            let v = env.state().box_vel;
            0.5 * env.cfg().box_mass * crate::math::dot3(v, v)
        };
        let mut prev = ke(&env);
        for _ in 0..30 {
            env.step(&[0.0; 4]).unwrap();
            let now = ke(&env);
            assert!(now <= prev + 1e-9, "kinetic energy rose {prev} -> {now}");
            prev = now;
        }
        assert!(prev < 1e-6, "friction failed to stop the box");
    }

    // A box sliding into the wall tips over it only above roughly
    // 0.84 m/s (the impact has to lift the center of mass over the
    // lip); the gripper tops out near 0.72 m/s of drag speed, so a
    // push can never clear the wall but a throw can.
    #[test]
    fn wall_blocks_a_slow_slide_but_not_a_fast_one() {
        let (mut env, _) = reset_env(Variant::Wall, 13);
        env.state_mut().box_pos[0] = 0.22;
        env.state_mut().box_vel = [0.5, 0.0, 0.0];
        for _ in 0..40 {
            env.step(&[0.0; 4]).unwrap();
        }
        let he = env.cfg().box_half_extent;
        let x = env.state().box_pos[0];
        assert!(
            x <= 0.28 - he + env.cfg().max_penetration_face + 1e-6,
            "box ended at x = {x}"
        );
        assert!(env.wall_penetration() <= env.cfg().max_penetration_face + 1e-6);

        let (mut fast, _) = reset_env(Variant::Wall, 13);
        fast.state_mut().box_pos[0] = 0.22;
        fast.state_mut().box_vel = [1.2, 0.0, 0.0];
        for _ in 0..40 {
            fast.step(&[0.0; 4]).unwrap();
        }
        let x = fast.state().box_pos[0];
        assert!(x > 0.285, "fast box failed to tip over the wall: x = {x}");
    }

    #[test]
    fn ditch_traps_a_sliding_box_but_not_a_thrown_one() {
        let (mut slide, _) = reset_env(Variant::Ditch, 13);
        slide.state_mut().box_pos[0] = 0.20;
        slide.state_mut().box_vel = [0.8, 0.0, 0.0];
        for _ in 0..60 {
            slide.step(&[0.0; 4]).unwrap();
        }
        let slid = slide.state().box_pos;
        assert!(slid[0] < 0.31, "sliding box escaped the ditch: x = {}", slid[0]);

        let (mut throw, _) = reset_env(Variant::Ditch, 13);
        throw.state_mut().box_pos[0] = 0.18;
        throw.state_mut().box_vel = [1.0, 0.0, 1.3];
        for _ in 0..60 {
            throw.step(&[0.0; 4]).unwrap();
        }
        let flown = throw.state().box_pos;
        assert!(flown[0] > 0.31, "thrown box failed to clear: x = {}", flown[0]);
        assert!(flown[2] > -0.001, "thrown box ended below the surface");
    }

    #[test]
    fn grasp_lift_and_release_cycle() {
        let (mut env, _) = reset_env(Variant::Flat, 4);
        let bx = env.state().box_pos;
        // Open, travel over the box, descend to straddle height.
        env.step(&[0.0, 0.0, 0.5, 1.0]).unwrap();
        let reach = [bx[0], bx[1], bx[2] + env.cfg().finger_drop];
        for _ in 0..8 {
            let g = env.state().gripper_pos;
            let d = sub3(reach, g);
            let s = env.cfg().gripper_step_scale;
            let a = [
                (d[0] / s).clamp(-1.0, 1.0),
                (d[1] / s).clamp(-1.0, 1.0),
                (d[2] / s).clamp(-1.0, 1.0),
                1.0,
            ];
            env.step(&a).unwrap();
        }
        // Close on the box.
        let mut grasped = false;
        for _ in 0..4 {
            let (_, _, info) = env.step(&[0.0, 0.0, 0.0, -1.0]).unwrap();
            grasped = info.grasped;
        }
        assert!(grasped, "fingers failed to engage the box");
        // Lift.
        for _ in 0..4 {
            env.step(&[0.0, 0.0, 1.0, -1.0]).unwrap();
        }
        let carried = env.state().box_pos[2];
        assert!(carried > 0.08, "box not lifted: z = {carried}");
        // Open; the box should fall back to the table.
        for _ in 0..3 {
            env.step(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        }
        assert!(env.state().grasp.is_none(), "grasp survived the release");
        for _ in 0..10 {
            env.step(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        }
        let settled = env.state().box_pos[2];
        assert!(
            (settled - env.cfg().resting_height()).abs() < 0.005,
            "box did not settle: z = {settled}"
        );
    }

    #[test]
    fn energy_stays_within_injected_work_through_the_script() {
        let (mut env, _) = reset_env(Variant::Wall, 7);
        let e0 = env.mechanical_energy();
        for a in catapult_script() {
            env.step(&a).unwrap();
            let (w, w_pos) = env.gripper_work();
            let e = env.mechanical_energy();
            assert!(
                e <= e0 + w + 0.01 * w_pos + 2e-3,
                "energy {e} exceeds budget {} at step {}",
                e0 + w + 0.01 * w_pos + 2e-3,
                env.state().step_index
            );
        }
    }

    #[test]
    fn catapult_script_sends_the_box_over_the_wall() {
        let (mut env, _) = reset_env(Variant::Wall, 7);
        let mut apex = f64::MIN;
        let mut max_compression = 0.0f64;
        for a in catapult_script() {
            env.step(&a).unwrap();
            apex = apex.max(env.state().box_pos[2]);
            max_compression = max_compression.max(env.state().compression);
        }
        let x = env.state().box_pos[0];
        let he = env.cfg().box_half_extent;
        assert!(
            max_compression > 0.01,
            "press phase stored too little squeeze: {max_compression}"
        );
        assert!(
            apex > 0.03 + he,
            "box apex {apex} cannot have cleared the wall"
        );
        assert!(x >= 0.33, "box settled at x = {x}, short of the far side");
        assert!(
            env.state().box_vel[0].abs() < 0.05,
            "box still moving at episode end"
        );
    }
}
