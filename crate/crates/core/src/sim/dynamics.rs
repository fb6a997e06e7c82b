//! Substep integrator: penalty-spring contacts, friction, the gripper
//! spheres, grasping, and the compression catapult.
//!
//! All quantities are SI. The box is integrated with semi-implicit
//! Euler; the gripper is kinematic (driven positions, infinite force
//! authority). Contacts are resolved per box corner against the local
//! solid (table top, ditch floor and faces, wall faces) and per gripper
//! sphere against the box. Springs are stiff, so transient penetrations
//! of a few millimetres are intrinsic to the model; position projection
//! caps them at `max_penetration_floor` / `max_penetration_face`, and
//! the published invariants are stated relative to those caps.

use crate::math::{add3, cross3, dot3, scale3, sqrt, sub3, Vec3};

use super::{EnvConfig, GraspState, SimState};

/// Per-control-step bookkeeping fed back to the environment.
#[derive(Debug, Clone, Copy, Default)]
pub(super) struct StepAccum {
    pub gripper_box_contact: bool,
    pub grasped: bool,
    /// No supporting contact during the final substep.
    pub airborne: bool,
    /// Signed work done on the box through gripper contacts, anchor
    /// force, and compression loading.
    pub work_signed: f64,
    /// Sum of only the positive per-substep work terms.
    pub work_positive: f64,
    /// Deepest post-projection floor penetration seen this step.
    pub max_floor_pen: f64,
    /// Deepest post-projection face penetration seen this step.
    pub max_face_pen: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Floor,
    Face,
}

#[derive(Clone, Copy)]
struct CornerContact {
    normal: Vec3,
    pen: f64,
    kind: Kind,
}

/// Small-angle rotation matrix from XYZ Euler angles.
fn rot_matrix(e: Vec3) -> [Vec3; 3] {
    let (sx, cx) = (libm::sin(e[0]), libm::cos(e[0]));
    let (sy, cy) = (libm::sin(e[1]), libm::cos(e[1]));
    let (sz, cz) = (libm::sin(e[2]), libm::cos(e[2]));
    [
        [cy * cz, sx * sy * cz - cx * sz, cx * sy * cz + sx * sz],
        [cy * sz, sx * sy * sz + cx * cz, cx * sy * sz - sx * cz],
        [-sy, sx * cy, cx * cy],
    ]
}

/// The eight box corners in a fixed order (sign pattern ---, --+, -+-,
/// ... +++), for deterministic force accumulation.
fn corners(cfg: &EnvConfig, pos: Vec3, rot: Vec3) -> [Vec3; 8] {
    let h = cfg.box_half_extent;
    let r = rot_matrix(rot);
    let mut out = [[0.0; 3]; 8];
    for (i, c) in out.iter_mut().enumerate() {
        let s = [
            if i & 4 == 0 { -h } else { h },
            if i & 2 == 0 { -h } else { h },
            if i & 1 == 0 { -h } else { h },
        ];
        *c = [
            pos[0] + dot3(r[0], s),
            pos[1] + dot3(r[1], s),
            pos[2] + dot3(r[2], s),
        ];
    }
    out
}

/// Local ground height under (x, y): table top, ditch bottom, or a far
/// drop beyond the table edge.
pub(super) fn floor_height(cfg: &EnvConfig, x: f64, y: f64) -> f64 {
    if x < cfg.table_x[0] || x > cfg.table_x[1] || y < cfg.table_y[0] || y > cfg.table_y[1] {
        return -2.0;
    }
    if cfg.has_ditch() && x >= cfg.ditch_x[0] && x <= cfg.ditch_x[1] {
        return -cfg.ditch_depth;
    }
    0.0
}

/// Resolves one corner against the local solid. Returns the contact
/// normal (axis-aligned), penetration depth, and whether floor or face
/// constants apply. Inside the wall band every exit is a wall face;
/// elsewhere the minimum-penetration axis wins between the local floor
/// and a ditch face.
fn corner_contact(cfg: &EnvConfig, c: Vec3) -> Option<CornerContact> {
    if cfg.has_wall() && c[0] > cfg.wall_x[0] && c[0] < cfg.wall_x[1] && c[2] < cfg.wall_height {
        let p_left = c[0] - cfg.wall_x[0];
        let p_right = cfg.wall_x[1] - c[0];
        let p_top = cfg.wall_height - c[2];
        let (normal, pen) = if p_left <= p_right && p_left <= p_top {
            ([-1.0, 0.0, 0.0], p_left)
        } else if p_right <= p_top {
            ([1.0, 0.0, 0.0], p_right)
        } else {
            ([0.0, 0.0, 1.0], p_top)
        };
        return Some(CornerContact {
            normal,
            pen,
            kind: Kind::Face,
        });
    }

    let floor = floor_height(cfg, c[0], c[1]);
    let mut best = if c[2] < floor {
        Some(CornerContact {
            normal: [0.0, 0.0, 1.0],
            pen: floor - c[2],
            kind: Kind::Floor,
        })
    } else {
        None
    };

    if cfg.has_ditch() && c[2] < 0.0 && c[2] > -cfg.ditch_depth {
        if c[0] < cfg.ditch_x[0] {
            let p = cfg.ditch_x[0] - c[0];
            if p < -c[2] {
                best = Some(CornerContact {
                    normal: [1.0, 0.0, 0.0],
                    pen: p,
                    kind: Kind::Face,
                });
            }
        } else if c[0] > cfg.ditch_x[1] {
            let p = c[0] - cfg.ditch_x[1];
            if p < -c[2] {
                best = Some(CornerContact {
                    normal: [-1.0, 0.0, 0.0],
                    pen: p,
                    kind: Kind::Face,
                });
            }
        }
    }
    best
}

struct SphereContact {
    point: Vec3,
    /// Unit normal pointing from the box surface toward the sphere.
    normal: Vec3,
    pen: f64,
}

/// Sphere versus the box's axis-aligned bounds (box rotation stays
/// small in practice and is ignored for gripper contacts).
fn sphere_box(center: Vec3, radius: f64, bmin: Vec3, bmax: Vec3) -> Option<SphereContact> {
    let inside = (0..3).all(|i| center[i] > bmin[i] && center[i] < bmax[i]);
    if inside {
        // Deep contact: exit through the nearest face.
        let mut axis = 0;
        let mut sign = 1.0;
        let mut depth = f64::INFINITY;
        for i in 0..3 {
            let d_lo = center[i] - bmin[i];
            let d_hi = bmax[i] - center[i];
            if d_lo < depth {
                depth = d_lo;
                axis = i;
                sign = -1.0;
            }
            if d_hi < depth {
                depth = d_hi;
                axis = i;
                sign = 1.0;
            }
        }
        let mut normal = [0.0; 3];
        normal[axis] = sign;
        let mut point = center;
        point[axis] = if sign > 0.0 { bmax[axis] } else { bmin[axis] };
        return Some(SphereContact {
            point,
            normal,
            pen: radius + depth,
        });
    }
    let cp = [
        center[0].clamp(bmin[0], bmax[0]),
        center[1].clamp(bmin[1], bmax[1]),
        center[2].clamp(bmin[2], bmax[2]),
    ];
    let d = sub3(center, cp);
    let dist = crate::math::norm3(d);
    if dist >= radius {
        return None;
    }
    let normal = if dist > 1e-9 {
        scale3(d, 1.0 / dist)
    } else {
        [0.0, 0.0, 1.0]
    };
    Some(SphereContact {
        point: cp,
        normal,
        pen: radius - dist,
    })
}

/// Regularized Coulomb friction on the tangential relative velocity.
///
/// Below the Coulomb regime the force is viscous with slope
/// `visc_cap`; the caller derives that cap from the integration step so
/// the explicit tangential damping stays inside the stability limit
/// even when four corners load at once (see `tangential_cap`).
fn friction(mu: f64, f_n: f64, v_tangent: Vec3, visc_cap: f64) -> Vec3 {
    let speed = crate::math::norm3(v_tangent);
    if speed < 1e-12 {
        return [0.0; 3];
    }
    let scale = -(mu * f_n / speed).min(visc_cap);
    scale3(v_tangent, scale)
}

/// Stability bound for the viscous friction slope: with four corners
/// engaged at lever arms up to the half extent, the rocking mode sees
/// total damping 4 * cap * h^2; keeping `4 * cap * h^2 * dt / I < 1`
/// (I = 2/3 m h^2 for the cube) gives cap = 0.15 m / dt with margin.
fn tangential_cap(cfg: &EnvConfig) -> f64 {
    0.15 * cfg.box_mass / cfg.dt_physics
}

/// Current gripper sphere centers: palm at the wrist, fingers hanging
/// `finger_drop` below it at `±gap/2` in y, floored at one finger
/// radius above the table.
pub(super) fn gripper_spheres(cfg: &EnvConfig, st: &SimState) -> [Vec3; 3] {
    let g = st.gripper_pos;
    let fz = (g[2] - cfg.finger_drop).max(cfg.finger_radius);
    [
        g,
        [g[0], g[1] - 0.5 * st.gap, fz],
        [g[0], g[1] + 0.5 * st.gap, fz],
    ]
}

pub(super) fn inertia(cfg: &EnvConfig) -> f64 {
    let side = 2.0 * cfg.box_half_extent;
    cfg.box_mass * side * side / 6.0
}

/// Advances the world by one physics substep.
#[allow(clippy::too_many_lines)]
pub(super) fn substep(cfg: &EnvConfig, st: &mut SimState, v_grip: Vec3, gap_target: f64, acc: &mut StepAccum) {
    let dt = cfg.dt_physics;
    let m = cfg.box_mass;
    let inv_m = 1.0 / m;
    let inv_i = 1.0 / inertia(cfg);

    // Kinematic gripper.
    st.gripper_pos = add3(st.gripper_pos, scale3(v_grip, dt));
    let want = gap_target - st.gap;
    let max_d = cfg.finger_speed * dt;
    let d_gap = want.clamp(-max_d, max_d);
    st.gap = (st.gap + d_gap).clamp(0.0, cfg.finger_gap_max);
    st.gap_vel = d_gap / dt;

    let mut force = [0.0, 0.0, -m * cfg.gravity];
    let mut torque = [0.0, 0.0, 0.0];
    let mut floor_support = false;
    let mut work = 0.0;
    // Gripper-applied forces with their application offsets. Their work
    // is tallied after the velocity update: the integrator displaces
    // the box by the post-update velocity, so tallying against the
    // pre-update velocity would miss energy the gripper injects.
    let mut applied: [(Vec3, Vec3); 4] = [([0.0; 3], [0.0; 3]); 4];
    let mut n_applied = 0usize;

    // Box corners against the terrain.
    let k_floor = 0.25 * cfg.k_table;
    let c_floor = 0.25 * cfg.c_table;
    let k_face = 0.25 * cfg.k_wall;
    let c_face = 0.25 * cfg.c_wall;
    let visc_cap = tangential_cap(cfg);
    for corner in corners(cfg, st.box_pos, st.box_rot) {
        let Some(contact) = corner_contact(cfg, corner) else {
            continue;
        };
        let (k, c) = match contact.kind {
            Kind::Floor => (k_floor, c_floor),
            Kind::Face => (k_face, c_face),
        };
        let r = sub3(corner, st.box_pos);
        let v_point = add3(st.box_vel, cross3(st.box_rotvel, r));
        let v_n = dot3(contact.normal, v_point);
        // The spring acts on the penetration predicted at the end of the
        // substep. Evaluating it at the stale depth makes every hard
        // impact a net energy source (force k*pen carried over the
        // displacement of the updated velocity); the predicted depth
        // turns that discretization error dissipative at the cost of an
        // extra k*dt of effective normal damping. Statics are
        // unchanged since the correction vanishes at rest.
        let f_n = (k * (contact.pen - v_n * dt) - c * v_n).max(0.0);
        if f_n == 0.0 {
            continue;
        }
        if contact.normal[2] > 0.5 {
            floor_support = true;
        }
        let v_t = sub3(v_point, scale3(contact.normal, v_n));
        let f = add3(scale3(contact.normal, f_n), friction(cfg.mu, f_n, v_t, visc_cap));
        force = add3(force, f);
        torque = add3(torque, cross3(r, f));
    }

    // Gripper spheres against the box.
    let he = cfg.box_half_extent;
    let bmin = sub3(st.box_pos, [he, he, he]);
    let bmax = add3(st.box_pos, [he, he, he]);
    let spheres = gripper_spheres(cfg, st);
    let radii = [cfg.palm_radius, cfg.finger_radius, cfg.finger_radius];
    let sphere_vels = [
        v_grip,
        add3(v_grip, [0.0, -0.5 * st.gap_vel, 0.0]),
        add3(v_grip, [0.0, 0.5 * st.gap_vel, 0.0]),
    ];
    let mut palm_top_pen = 0.0f64;
    let mut palm_any = false;
    let mut finger_face = [false; 2];
    for i in 0..3 {
        let Some(contact) = sphere_box(spheres[i], radii[i], bmin, bmax) else {
            continue;
        };
        acc.gripper_box_contact = true;
        if i == 0 {
            palm_any = true;
            if contact.normal[2] > 0.9 {
                palm_top_pen = palm_top_pen.max(contact.pen);
            }
        } else if contact.normal[1] * if i == 1 { -1.0 } else { 1.0 } > 0.7 {
            finger_face[i - 1] = true;
        }
        let r = sub3(contact.point, st.box_pos);
        let v_point = add3(st.box_vel, cross3(st.box_rotvel, r));
        let rel = sub3(v_point, sphere_vels[i]);
        let pen_rate = dot3(rel, contact.normal);
        let f_n = (cfg.k_box * contact.pen + cfg.c_box * pen_rate).max(0.0);
        if f_n == 0.0 {
            continue;
        }
        let v_t = sub3(rel, scale3(contact.normal, pen_rate));
        let f = add3(scale3(contact.normal, -f_n), friction(cfg.mu, f_n, v_t, visc_cap));
        force = add3(force, f);
        torque = add3(torque, cross3(r, f));
        applied[n_applied] = (f, r);
        n_applied += 1;
    }

    // Grasp anchor: a critically damped spring pinning the box to its
    // grab offset from the wrist.
    if let Some(g) = st.grasp {
        let released = st.gap > g.gap_at_grasp + 0.005
            || crate::math::norm3(sub3(st.box_pos, add3(st.gripper_pos, g.offset))) > 0.04;
        if released {
            st.grasp = None;
        } else {
            let anchor = add3(st.gripper_pos, g.offset);
            let f = add3(
                scale3(sub3(anchor, st.box_pos), cfg.k_grasp),
                scale3(sub3(st.box_vel, v_grip), -cfg.c_grasp),
            );
            force = add3(force, f);
            // Settle orientation while carried.
            torque = add3(torque, scale3(st.box_rotvel, -0.05));
            applied[n_applied] = (f, [0.0; 3]);
            n_applied += 1;
        }
    } else if finger_face[0] && finger_face[1] && st.gap <= cfg.grasp_gap_max {
        st.grasp = Some(GraspState {
            offset: sub3(st.box_pos, st.gripper_pos),
            gap_at_grasp: st.gap,
        });
    }

    // Spin shedding: past this rate the additive rotation update stops
    // tracking rigid corner motion, so sustained excess spin decays
    // with a ~20 ms time constant. A drag, not a clamp: impulsive
    // transfers (a corner strike lasts a few substeps) pass through
    // nearly untouched, which toppling depends on.
    let spin = crate::math::norm3(st.box_rotvel);
    if spin > cfg.max_spin {
        let drag = inertia(cfg) / 0.02 * (spin - cfg.max_spin) / spin;
        torque = add3(torque, scale3(st.box_rotvel, -drag));
    }

    // Semi-implicit Euler.
    st.box_vel = add3(st.box_vel, scale3(force, inv_m * dt));
    st.box_rotvel = add3(st.box_rotvel, scale3(torque, inv_i * dt));
    st.box_pos = add3(st.box_pos, scale3(st.box_vel, dt));
    st.box_rot = add3(st.box_rot, scale3(st.box_rotvel, dt));

    for &(f, r) in &applied[..n_applied] {
        let v_point = add3(st.box_vel, cross3(st.box_rotvel, r));
        work += dot3(f, v_point) * dt;
    }

    // Compression catapult: ratchet while the palm squeezes the box
    // against support, release the stored energy when the palm lets go.
    if palm_top_pen > 0.0 && floor_support {
        st.palm_clear_substeps = 0;
        let squeeze = palm_top_pen.min(cfg.max_compression);
        if squeeze > st.compression {
            // Loading work, the exact spring integral over the ratchet.
            let dw = 0.5 * cfg.k_box * (squeeze + st.compression) * (squeeze - st.compression);
            work += dw;
            st.compression = squeeze;
        }
        let d = sub3(st.box_pos, spheres[0]);
        let dir = [d[0], d[1], d[2].abs()];
        let n = crate::math::norm3(dir);
        if n > 1e-9 {
            st.squeeze_dir = scale3(dir, 1.0 / n);
        }
    } else if palm_any {
        st.palm_clear_substeps = 0;
    } else {
        st.palm_clear_substeps = st.palm_clear_substeps.saturating_add(1);
        if st.palm_clear_substeps == 3 && st.compression > 1e-4 && st.grasp.is_none() {
            // Energy-exact release: the added kinetic energy equals the
            // stored elastic energy regardless of the current velocity.
            // For a box at rest this reduces to compression * sqrt(k/m).
            let vd = dot3(st.box_vel, st.squeeze_dir);
            let launch = -vd
                + sqrt(vd * vd + cfg.k_box / m * st.compression * st.compression);
            st.box_vel = add3(st.box_vel, scale3(st.squeeze_dir, launch));
            st.compression = 0.0;
        }
        if st.palm_clear_substeps >= 3 {
            st.compression = 0.0;
        }
    }

    // Position-projection backstops for penetrations past the caps.
    let mut max_floor = 0.0f64;
    let mut max_xpos = 0.0f64;
    let mut max_xneg = 0.0f64;
    for corner in corners(cfg, st.box_pos, st.box_rot) {
        if let Some(contact) = corner_contact(cfg, corner) {
            if contact.normal[2] > 0.5 {
                max_floor = max_floor.max(contact.pen);
            } else if contact.normal[0] > 0.5 {
                max_xpos = max_xpos.max(contact.pen);
            } else if contact.normal[0] < -0.5 {
                max_xneg = max_xneg.max(contact.pen);
            }
        }
    }
    if max_floor > cfg.max_penetration_floor {
        st.box_pos[2] += max_floor - cfg.max_penetration_floor;
        if st.box_vel[2] < 0.0 {
            st.box_vel[2] = 0.0;
        }
        max_floor = cfg.max_penetration_floor;
    }
    if max_xpos > cfg.max_penetration_face {
        st.box_pos[0] += max_xpos - cfg.max_penetration_face;
        if st.box_vel[0] < 0.0 {
            st.box_vel[0] = 0.0;
        }
        max_xpos = cfg.max_penetration_face;
    }
    if max_xneg > cfg.max_penetration_face {
        st.box_pos[0] -= max_xneg - cfg.max_penetration_face;
        if st.box_vel[0] > 0.0 {
            st.box_vel[0] = 0.0;
        }
        max_xneg = cfg.max_penetration_face;
    }

    acc.max_floor_pen = acc.max_floor_pen.max(max_floor);
    acc.max_face_pen = acc.max_face_pen.max(max_xpos.max(max_xneg));
    acc.grasped = st.grasp.is_some();
    acc.airborne = !floor_support;
    acc.work_signed += work;
    if work > 0.0 {
        acc.work_positive += work;
    }
}

/// Runs the full control interval: `substeps` physics substeps under a
/// constant gripper velocity and finger drive.
pub(super) fn control_step(
    cfg: &EnvConfig,
    st: &mut SimState,
    v_grip: Vec3,
    gap_target: f64,
    substeps: u32,
) -> StepAccum {
    let mut acc = StepAccum::default();
    for _ in 0..substeps {
        substep(cfg, st, v_grip, gap_target, &mut acc);
    }
    st.gripper_vel = v_grip;
    acc
}

/// Total mechanical energy of the box: kinetic, rotational,
/// gravitational, plus elastic compression storage.
pub(super) fn mechanical_energy(cfg: &EnvConfig, st: &SimState) -> f64 {
    let v2 = dot3(st.box_vel, st.box_vel);
    let w2 = dot3(st.box_rotvel, st.box_rotvel);
    0.5 * cfg.box_mass * v2
        + 0.5 * inertia(cfg) * w2
        + cfg.box_mass * cfg.gravity * st.box_pos[2]
        + 0.5 * cfg.k_box * st.compression * st.compression
}

/// Deepest current corner penetration below the local floor, a probe
/// for impenetrability checks.
pub(super) fn floor_penetration(cfg: &EnvConfig, st: &SimState) -> f64 {
    let mut worst = 0.0f64;
    for corner in corners(cfg, st.box_pos, st.box_rot) {
        let floor = floor_height(cfg, corner[0], corner[1]);
        worst = worst.max(floor - corner[2]);
    }
    worst
}

/// Deepest current corner penetration into the wall volume.
pub(super) fn wall_penetration(cfg: &EnvConfig, st: &SimState) -> f64 {
    if !cfg.has_wall() {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for corner in corners(cfg, st.box_pos, st.box_rot) {
        if corner[2] < cfg.wall_height && corner[0] > cfg.wall_x[0] && corner[0] < cfg.wall_x[1] {
            let depth = (corner[0] - cfg.wall_x[0])
                .min(cfg.wall_x[1] - corner[0])
                .min(cfg.wall_height - corner[2]);
            worst = worst.max(depth);
        }
    }
    worst
}
