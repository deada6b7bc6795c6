//! Kinematic hexapod surrogate.
//!
//! Joints track commands under a rate limit; feet near the lowest ones are in
//! stance and the body moves opposite to their mean horizontal motion. No
//! dynamics, no friction model.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};

pub const JOINTS_PER_LEG: usize = 3;

/// Leg names in command order for the hexapod.
pub const HEXAPOD_LEGS: [&str; 6] = ["RF", "RM", "RH", "LF", "LM", "LH"];
pub const QUADRUPED_LEGS: [&str; 4] = ["RF", "RH", "LF", "LH"];

/// Body shape. Right legs come first; leg `i` of the right side mirrors leg
/// `i + n_legs/2` across the body's x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    /// Hip offsets from the body center, body frame (x forward, y left).
    pub hips: Vec<[f64; 2]>,
    pub coxa: f64,
    pub femur: f64,
    pub tibia: f64,
    pub body_length: f64,
}

impl RobotGeometry {
    pub fn hexapod() -> Self {
        let right = [[0.15, -0.06], [0.0, -0.08], [-0.15, -0.06]];
        Self::from_right_hips(&right)
    }

    /// Hexapod without the middle pair.
    pub fn quadruped() -> Self {
        Self::from_right_hips(&[[0.15, -0.06], [-0.15, -0.06]])
    }

    fn from_right_hips(right: &[[f64; 2]]) -> Self {
        let mut hips = right.to_vec();
        hips.extend(right.iter().map(|h| [h[0], -h[1]]));
        Self {
            hips,
            coxa: 0.05,
            femur: 0.08,
            tibia: 0.12,
            body_length: 0.30,
        }
    }

    pub fn n_legs(&self) -> usize {
        self.hips.len()
    }

    pub fn n_joints(&self) -> usize {
        self.n_legs() * JOINTS_PER_LEG
    }

    pub fn max_leg_length(&self) -> f64 {
        self.coxa + self.femur + self.tibia
    }

    /// -1 for right legs, +1 for left legs.
    pub fn side(&self, leg: usize) -> f64 {
        if leg < self.n_legs() / 2 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn mirror_leg(&self, leg: usize) -> usize {
        let half = self.n_legs() / 2;
        (leg + half) % self.n_legs()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_legs();
        if n < 2 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "leg count must be even and ≥ 2, got {n}"
            )));
        }
        if !(self.coxa >= 0.0 && self.femur > 0.0 && self.tibia > 0.0) {
            return Err(Error::Config("segment lengths must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self::hexapod()
    }
}

/// Body-frame foot position for joints `(swing, lift, tibia)` of `leg`.
///
/// Swing rotates about the hip's vertical axis (positive = foot forward on
/// both sides); lift raises the femur; the tibia hangs straight down when
/// lift and tibia are zero.
pub fn forward_kinematics(joints: [f64; 3], leg: usize, geom: &RobotGeometry) -> [f64; 3] {
    let [q1, q2, q3] = joints;
    let radial = geom.coxa + geom.femur * q2.cos() + geom.tibia * (q2 + q3).sin();
    let z = geom.femur * q2.sin() - geom.tibia * (q2 + q3).cos();
    let hip = geom.hips[leg];
    let (s, c) = q1.sin_cos();
    [hip[0] + radial * s, hip[1] + geom.side(leg) * radial * c, z]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardMode {
    /// Forward progress minus lateral drift.
    Sim,
    /// Displacement projected on the heading change.
    Heading,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::Sim => "sim",
            RewardMode::Heading => "heading",
        })
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(Self::Sim),
            "heading" => Ok(Self::Heading),
            other => Err(Error::Config(format!("unknown reward mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResetMode {
    Full,
    PoseOnly,
    None,
}

impl fmt::Display for ResetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResetMode::Full => "full",
            ResetMode::PoseOnly => "pose_only",
            ResetMode::None => "none",
        })
    }
}

impl FromStr for ResetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "pose_only" => Ok(Self::PoseOnly),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown reset mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub geometry: RobotGeometry,
    /// Max joint change per step (rad).
    pub rate_limit: f64,
    /// Feet within this height of the `n_legs/2`-th lowest foot are in stance.
    pub contact_margin: f64,
    pub slip_factor: f64,
    /// Fewer stance feet than this triggers the slip factor.
    pub min_stance: usize,
    /// Cap on the body's horizontal displacement per step (m).
    pub max_step_displacement: f64,
    pub reward_mode: RewardMode,
}

impl EnvConfig {
    pub fn new(geometry: RobotGeometry) -> Self {
        // Two leg lengths per 70-step gait cycle, spread evenly over its steps.
        let max_step_displacement = 2.0 * geometry.max_leg_length() / 70.0;
        Self {
            geometry,
            rate_limit: 0.2,
            contact_margin: 0.001,
            slip_factor: 0.1,
            min_stance: 2,
            max_step_displacement,
            reward_mode: RewardMode::Sim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.rate_limit > 0.0) {
            return Err(Error::Config("rate_limit must be > 0".into()));
        }
        if !(self.contact_margin >= 0.0) {
            return Err(Error::Config("contact_margin must be ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.slip_factor) {
            return Err(Error::Config("slip_factor must lie in [0, 1]".into()));
        }
        if !(self.max_step_displacement > 0.0) {
            return Err(Error::Config("max_step_displacement must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::new(RobotGeometry::hexapod())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    /// Leg-major joint angles: `joints[leg * 3 + j]`.
    pub joints: Vec<f64>,
    /// World-frame foot points.
    pub feet: Vec<[f64; 3]>,
    pub contacts: Vec<bool>,
}

/// Body-frame motion of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyMotion {
    pub dx: f64,
    pub dy: f64,
    pub dpsi: f64,
}

fn leg_joints(joints: &[f64], leg: usize) -> [f64; 3] {
    let i = leg * JOINTS_PER_LEG;
    [joints[i], joints[i + 1], joints[i + 2]]
}

fn body_feet(joints: &[f64], geom: &RobotGeometry) -> Vec<[f64; 3]> {
    (0..geom.n_legs())
        .map(|leg| forward_kinematics(leg_joints(joints, leg), leg, geom))
        .collect()
}

fn stance_flags(feet: &[[f64; 3]], cfg: &EnvConfig) -> Vec<bool> {
    let mut heights: Vec<f64> = feet.iter().map(|p| p[2]).collect();
    heights.sort_by(f64::total_cmp);
    let h = (feet.len() / 2).max(1);
    let threshold = heights[h - 1] + cfg.contact_margin;
    feet.iter().map(|p| p[2] <= threshold).collect()
}

fn to_world(x: f64, y: f64, psi: f64, p: [f64; 3]) -> [f64; 3] {
    let (s, c) = psi.sin_cos();
    [x + c * p[0] - s * p[1], y + s * p[0] + c * p[1], p[2]]
}

fn world_from_joints(x: f64, y: f64, psi: f64, joints: Vec<f64>, cfg: &EnvConfig) -> WorldState {
    let body = body_feet(&joints, &cfg.geometry);
    let contacts = stance_flags(&body, cfg);
    WorldState {
        x,
        y,
        psi,
        feet: body.into_iter().map(|p| to_world(x, y, psi, p)).collect(),
        joints,
        contacts,
    }
}

pub fn initial_world(cfg: &EnvConfig) -> WorldState {
    world_from_joints(0.0, 0.0, 0.0, vec![0.0; cfg.geometry.n_joints()], cfg)
}

pub fn reset(world: &WorldState, cfg: &EnvConfig, mode: ResetMode) -> WorldState {
    match mode {
        ResetMode::Full => initial_world(cfg),
        ResetMode::PoseOnly => world_from_joints(0.0, 0.0, 0.0, world.joints.clone(), cfg),
        ResetMode::None => world.clone(),
    }
}

/// Body-frame motion produced by moving the joints from `prev` to `next`.
pub fn body_motion(prev: &[f64], next: &[f64], cfg: &EnvConfig) -> BodyMotion {
    let geom = &cfg.geometry;
    let before = body_feet(prev, geom);
    let after = body_feet(next, geom);
    let stance = stance_flags(&after, cfg);
    let n_stance = stance.iter().filter(|&&s| s).count();
    if n_stance == 0 {
        return BodyMotion::default();
    }
    // Each side's terms are accumulated pairwise with the mirrored leg so
    // that left/right mirroring is exact in floating point.
    let half = geom.n_legs() / 2;
    let term = |leg: usize| -> [f64; 3] {
        if !stance[leg] {
            return [0.0; 3];
        }
        let p = before[leg];
        let d = [after[leg][0] - p[0], after[leg][1] - p[1]];
        let r2 = p[0] * p[0] + p[1] * p[1];
        let turn = if r2 > 0.0 {
            (p[0] * d[1] - p[1] * d[0]) / r2
        } else {
            0.0
        };
        [d[0], d[1], turn]
    };
    let mut sum = [0.0; 3];
    for leg in 0..half {
        let r = term(leg);
        let l = term(leg + half);
        for k in 0..3 {
            sum[k] += r[k] + l[k];
        }
    }
    let n = n_stance as f64;
    let mut dx = -sum[0] / n;
    let mut dy = -sum[1] / n;
    let mut dpsi = -sum[2] / n;
    if n_stance < cfg.min_stance {
        dx *= cfg.slip_factor;
        dy *= cfg.slip_factor;
        dpsi *= cfg.slip_factor;
    }
    let norm = dx.hypot(dy);
    if norm > cfg.max_step_displacement {
        let scale = cfg.max_step_displacement / norm;
        dx *= scale;
        dy *= scale;
    }
    BodyMotion { dx, dy, dpsi }
}

/// Joints after one rate-limited step toward `commands`.
pub fn track_commands(joints: &[f64], commands: &[f64], rate_limit: f64) -> Vec<f64> {
    joints
        .iter()
        .zip(commands)
        .map(|(&q, &c)| q + (c - q).clamp(-rate_limit, rate_limit))
        .collect()
}

pub fn reward_sim(prev: &WorldState, next: &WorldState) -> f64 {
    (next.x - prev.x) - (next.y - prev.y)
}

pub fn reward_heading(prev: &WorldState, next: &WorldState) -> f64 {
    let dpsi = next.psi - prev.psi;
    (next.x - prev.x) * dpsi.cos() + (next.y - prev.y) * dpsi.sin()
}

pub fn reward(prev: &WorldState, next: &WorldState, mode: RewardMode) -> f64 {
    match mode {
        RewardMode::Sim => reward_sim(prev, next),
        RewardMode::Heading => reward_heading(prev, next),
    }
}

/// Advances the world by one control step.
pub fn env_step(
    world: &WorldState,
    commands: &[f64],
    cfg: &EnvConfig,
) -> Result<(WorldState, f64)> {
    check_len("env_step commands", cfg.geometry.n_joints(), commands.len())?;
    check_len(
        "env_step joints",
        cfg.geometry.n_joints(),
        world.joints.len(),
    )?;
    let joints = track_commands(&world.joints, commands, cfg.rate_limit);
    let m = body_motion(&world.joints, &joints, cfg);
    let (s, c) = world.psi.sin_cos();
    let x = world.x + c * m.dx - s * m.dy;
    let y = world.y + s * m.dx + c * m.dy;
    let next = world_from_joints(x, y, world.psi + m.dpsi, joints, cfg);
    let r = reward(world, &next, cfg.reward_mode);
    Ok((next, r))
}

/// Swaps each leg's commands with its mirror leg.
pub fn mirror_commands(commands: &[f64], geom: &RobotGeometry) -> Vec<f64> {
    let mut out = vec![0.0; commands.len()];
    for leg in 0..geom.n_legs() {
        let m = geom.mirror_leg(leg);
        for j in 0..JOINTS_PER_LEG {
            out[m * JOINTS_PER_LEG + j] = commands[leg * JOINTS_PER_LEG + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn neutral_foot() {
        let g = RobotGeometry::hexapod();
        assert!((g.max_leg_length() - 0.25).abs() < 1e-15);
        // Planar chain at zero: radial coxa + femur, tibia straight down.
        let p = forward_kinematics([0.0; 3], 0, &g);
        assert_eq!(p, [0.15, -0.06 - 0.13, -0.12]);
        let p = forward_kinematics([0.0; 3], 4, &g);
        assert_eq!(p, [0.0, 0.08 + 0.13, -0.12]);
    }

    #[test]
    fn swing_rotates_about_hip() {
        let g = RobotGeometry::hexapod();
        let p0 = forward_kinematics([0.0, 0.1, -0.2], 3, &g);
        let p1 = forward_kinematics([0.1, 0.1, -0.2], 3, &g);
        let h = g.hips[3];
        let r0 = (p0[0] - h[0]).hypot(p0[1] - h[1]);
        let r1 = (p1[0] - h[0]).hypot(p1[1] - h[1]);
        assert!((r0 - r1).abs() < 1e-15);
        let a0 = (p0[1] - h[1]).atan2(p0[0] - h[0]);
        let a1 = (p1[1] - h[1]).atan2(p1[0] - h[0]);
        assert!(((a0 - a1).abs() - 0.1).abs() < 1e-12);
        assert_eq!(p0[2], p1[2]);
    }

    #[test]
    fn mirrored_joints_mirror_feet() {
        let g = RobotGeometry::hexapod();
        for leg in 0..3 {
            let q = [0.2, -0.1, 0.15];
            let r = forward_kinematics(q, leg, &g);
            let l = forward_kinematics(q, g.mirror_leg(leg), &g);
            assert_eq!([r[0], -r[1], r[2]], l);
        }
    }

    #[test]
    fn reward_examples() {
        let cfg = EnvConfig::default();
        let w = initial_world(&cfg);
        let moved = |dx: f64, dy: f64, dpsi: f64| WorldState {
            x: w.x + dx,
            y: w.y + dy,
            psi: w.psi + dpsi,
            ..w.clone()
        };
        assert!((reward_sim(&w, &moved(0.02, 0.005, 0.0)) - 0.015).abs() < 1e-15);
        assert_eq!(reward_sim(&w, &moved(0.0, 0.01, 0.0)), -0.01);
        assert_eq!(reward_sim(&w, &w), 0.0);
        assert_eq!(reward_heading(&w, &moved(0.03, 0.01, 0.0)), 0.03);
        let r = reward_heading(&w, &moved(0.0, 0.01, std::f64::consts::FRAC_PI_2));
        assert!((r - 0.01).abs() < 1e-15);
        assert_eq!(reward_heading(&w, &w), 0.0);
    }

    #[test]
    fn holding_joints_is_a_fixed_point() {
        let cfg = EnvConfig::default();
        let mut w = initial_world(&cfg);
        let cmd: Vec<f64> = (0..18).map(|i| 0.01 * i as f64 - 0.05).collect();
        for _ in 0..5 {
            w = env_step(&w, &cmd, &cfg).unwrap().0;
        }
        let pose = (w.x, w.y, w.psi);
        for _ in 0..100 {
            let (next, r) = env_step(&w, &cmd, &cfg).unwrap();
            assert_eq!(r, 0.0);
            w = next;
        }
        assert_eq!((w.x, w.y, w.psi), pose);
    }

    #[test]
    fn rate_limit_applies() {
        let cfg = EnvConfig::default();
        let w = initial_world(&cfg);
        let (next, _) = env_step(&w, &[1.0; 18], &cfg).unwrap();
        assert!(next.joints.iter().all(|&q| q == 0.2));
        assert!(env_step(&w, &[0.0; 12], &cfg).is_err());
    }

    fn random_commands(rng: &mut ChaCha8Rng, steps: usize) -> Vec<Vec<f64>> {
        (0..steps)
            .map(|_| (0..18).map(|_| rng.gen_range(-0.3..0.3)).collect())
            .collect()
    }

    #[test]
    fn mirrored_commands_negate_lateral_motion() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let cmds = random_commands(&mut rng, 40);
            let (mut a, mut b) = (initial_world(&cfg), initial_world(&cfg));
            for c in &cmds {
                a = env_step(&a, c, &cfg).unwrap().0;
                b = env_step(&b, &mirror_commands(c, &cfg.geometry), &cfg)
                    .unwrap()
                    .0;
                assert_eq!(a.x, b.x);
                assert_eq!(a.y, -b.y);
                assert_eq!(a.psi, -b.psi);
            }
        }
    }

    #[test]
    fn symmetric_commands_move_straight() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = initial_world(&cfg);
        for _ in 0..200 {
            let right: Vec<f64> = (0..9).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let cmd: Vec<f64> = right.iter().chain(right.iter()).copied().collect();
            w = env_step(&w, &cmd, &cfg).unwrap().0;
            assert_eq!(w.y, 0.0);
            assert_eq!(w.psi, 0.0);
        }
    }

    #[test]
    fn displacement_stays_within_speed_bound() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v_max = 2.0 * cfg.geometry.max_leg_length();
        for _ in 0..20 {
            let mut w = initial_world(&cfg);
            let mut poses = vec![(w.x, w.y)];
            for c in random_commands(&mut rng, 300) {
                w = env_step(&w, &c, &cfg).unwrap().0;
                poses.push((w.x, w.y));
            }
            for win in poses.windows(71) {
                let (a, b) = (win[0], win[70]);
                assert!((b.0 - a.0).hypot(b.1 - a.1) <= v_max + 1e-12);
            }
        }
    }

    #[test]
    fn world_motion_is_rotated_body_motion() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = initial_world(&cfg);
        w.psi = 0.7;
        for c in random_commands(&mut rng, 100) {
            let (next, _) = env_step(&w, &c, &cfg).unwrap();
            let m = body_motion(&w.joints, &next.joints, &cfg);
            let (s, co) = w.psi.sin_cos();
            assert!((next.x - w.x - (co * m.dx - s * m.dy)).abs() < 1e-15);
            assert!((next.y - w.y - (s * m.dx + co * m.dy)).abs() < 1e-15);
            assert!((next.psi - w.psi - m.dpsi).abs() < 1e-15);
            w = next;
        }
    }

    #[test]
    fn stepping_is_deterministic() {
        let cfg = EnvConfig::default();
        let cmds = random_commands(&mut ChaCha8Rng::seed_from_u64(1), 70);
        let run = || {
            let mut w = initial_world(&cfg);
            for c in &cmds {
                w = env_step(&w, c, &cfg).unwrap().0;
            }
            w
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reset_modes() {
        let cfg = EnvConfig::default();
        let mut w = initial_world(&cfg);
        for c in random_commands(&mut ChaCha8Rng::seed_from_u64(2), 30) {
            w = env_step(&w, &c, &cfg).unwrap().0;
        }
        assert_eq!(
            reset(&w, &cfg, ResetMode::Full),
            reset(&w, &cfg, ResetMode::Full)
        );
        assert_eq!(reset(&w, &cfg, ResetMode::Full), initial_world(&cfg));
        assert_eq!(reset(&w, &cfg, ResetMode::None), w);
        let p = reset(&w, &cfg, ResetMode::PoseOnly);
        assert_eq!((p.x, p.y, p.psi), (0.0, 0.0, 0.0));
        assert_eq!(p.joints, w.joints);
    }

    #[test]
    fn quadruped_mode() {
        let cfg = EnvConfig::new(RobotGeometry::quadruped());
        let w = initial_world(&cfg);
        assert_eq!(w.joints.len(), 12);
        assert_eq!(w.contacts, vec![true; 4]);
        assert!(env_step(&w, &[0.1; 12], &cfg).is_ok());
    }
}
