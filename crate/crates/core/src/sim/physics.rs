use std::f64::consts::FRAC_PI_2;

use super::arena::{ArenaSpec, Pose};
use super::body::BodyModel;
use super::geometry::{add_scaled, cross, dot, norm, resolve_disc_segment, rotate, sub, Square, Vec2};
use crate::controllers::ActuatorCommands;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub pose: Pose,
    pub wheel_angle: Vec<f64>,
    /// Wheel angular velocity delivered by each motor (rad/s).
    pub wheel_speed: Vec<f64>,
    pub joint_angle: Vec<[f64; 2]>,
    pub joint_rate: Vec<[f64; 2]>,
    pub cube: Option<Square>,
    pub cube_velocity: Vec2,
    pub clock: f64,
    pub steps: u64,
    /// Physics steps during which the robot touched the cube.
    pub contact_steps: u64,
}

impl SimState {
    /// Robot at the arena start pose; the cube (if any) sits `gap` in front
    /// of the footprint.
    pub fn initial(body: &BodyModel, arena: &ArenaSpec) -> Self {
        let start = arena.start;
        let cube = arena.cube.map(|c| {
            let ahead = body.footprint_radius + c.gap + 0.5 * c.edge;
            let (s, co) = start.heading.sin_cos();
            Square { center: [start.x + co * ahead, start.y + s * ahead], half: 0.5 * c.edge }
        });
        Self {
            pose: start,
            wheel_angle: vec![0.0; body.n_wheels()],
            wheel_speed: vec![0.0; body.n_wheels()],
            joint_angle: vec![[0.0; 2]; body.n_limbs()],
            joint_rate: vec![[0.0; 2]; body.n_limbs()],
            cube,
            cube_velocity: [0.0, 0.0],
            clock: 0.0,
            steps: 0,
            contact_steps: 0,
        }
    }

    pub fn position(&self) -> Vec2 {
        [self.pose.x, self.pose.y]
    }
}

fn push_out_of_walls(p: Vec2, r: f64, arena: &ArenaSpec) -> Vec2 {
    let mut p = p;
    for _ in 0..2 {
        let mut moved = false;
        for w in &arena.walls {
            if let Some(q) = resolve_disc_segment(p, r, w) {
                p = q;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    p
}

/// Advance the state by one physics step of length `dt`.
///
/// Joints track their targets under a speed limit; limbs in ground contact
/// push the body along their thrust direction in proportion to the swing
/// rate. Wheel rim speeds map onto a body twist by least squares. The pose is
/// integrated semi-implicitly (heading first), pushed out of walls and the
/// cube, and the wheel angles follow the motion actually achieved.
pub fn step(state: &mut SimState, body: &BodyModel, cmds: &ActuatorCommands, arena: &ArenaSpec, dt: f64) -> Result<()> {
    if cmds.wheel_velocity.len() != body.n_wheels() {
        return Err(Error::ShapeMismatch { expected: body.n_wheels(), actual: cmds.wheel_velocity.len() });
    }
    if cmds.joint_target.len() != body.n_limbs() {
        return Err(Error::ShapeMismatch { expected: body.n_limbs(), actual: cmds.joint_target.len() });
    }
    if !cmds.is_finite() {
        return Err(Error::Fault("non-finite actuator command".into()));
    }
    let p = &body.params;
    let r2 = body.footprint_radius * body.footprint_radius;

    let mut twist = [0.0; 3];
    let max_delta = p.joint_speed * dt;
    for (l, limb) in body.limbs.iter().enumerate() {
        let mut rate = [0.0; 2];
        for j in 0..2 {
            let target = cmds.joint_target[l][j].clamp(-FRAC_PI_2, FRAC_PI_2);
            let cur = state.joint_angle[l][j];
            let delta = (target - cur).clamp(-max_delta, max_delta);
            state.joint_angle[l][j] = cur + delta;
            rate[j] = delta / dt;
        }
        state.joint_rate[l] = rate;
        let contact = (0.5 * (1.0 - state.joint_angle[l][1] / FRAC_PI_2)).clamp(0.0, 1.0);
        let speed = body.limb_gain * rate[0].abs() * contact;
        twist[0] += speed * limb.direction[0];
        twist[1] += speed * limb.direction[1];
        twist[2] += speed * cross(limb.pos, limb.direction) / r2;
    }
    if !body.wheels.is_empty() {
        let follow = if p.motor_tau > 0.0 { 1.0 - (-dt / p.motor_tau).exp() } else { 1.0 };
        for (speed, cmd) in state.wheel_speed.iter_mut().zip(&cmds.wheel_velocity) {
            *speed += (cmd - *speed) * follow;
        }
        for (col, w) in body.wheel_to_twist.iter().zip(&state.wheel_speed) {
            let rim = w * p.wheel_radius;
            for k in 0..3 {
                twist[k] += col[k] * rim;
            }
        }
    }

    let old = state.position();
    let rough = arena.roughness_at(old);
    let omega = twist[2] * rough;
    let heading = state.pose.heading + omega * dt;
    let mut v = rotate([twist[0] * rough, twist[1] * rough], heading);
    if let Some(hill) = &arena.hill {
        let speed = norm(v);
        if speed > 0.0 {
            let slope = dot(hill.gradient_at(old), v) / speed;
            if slope > 0.0 {
                let f = (1.0 - hill.slope_penalty * slope).max(0.1);
                v = [v[0] * f, v[1] * f];
            }
        }
    }
    let mut pos = add_scaled(old, v, dt);
    if v != [0.0, 0.0] {
        pos = push_out_of_walls(pos, body.footprint_radius, arena);
    }

    if let (Some(cube), Some(spec)) = (state.cube.as_mut(), arena.cube.as_ref()) {
        if state.cube_velocity != [0.0, 0.0] {
            cube.center = add_scaled(cube.center, state.cube_velocity, dt);
            state.cube_velocity = [state.cube_velocity[0] * spec.slide_decay, state.cube_velocity[1] * spec.slide_decay];
            cube.center = push_out_of_walls(cube.center, cube.half, arena);
        }
        let q = cube.closest_point(pos);
        let d = sub(q, pos);
        let dist = norm(d);
        if dist < body.footprint_radius {
            state.contact_steps += 1;
            let dir = if dist > 1e-12 {
                [d[0] / dist, d[1] / dist]
            } else {
                let c = sub(cube.center, pos);
                let n = norm(c).max(1e-12);
                [c[0] / n, c[1] / n]
            };
            let pen = body.footprint_radius - dist;
            let before = cube.center;
            cube.center = push_out_of_walls(add_scaled(cube.center, dir, pen), cube.half, arena);
            let moved = sub(cube.center, before);
            state.cube_velocity = [moved[0] / dt, moved[1] / dt];
            // Cube blocked by a wall: the robot stays outside it.
            let q = cube.closest_point(pos);
            let d = sub(pos, q);
            let dist = norm(d);
            if dist < body.footprint_radius && dist > 1e-12 {
                pos = add_scaled(q, d, body.footprint_radius / dist);
            }
        }
    }

    let moved = sub(pos, old);
    let v_body = rotate([moved[0] / dt, moved[1] / dt], -heading);
    for (angle, w) in state.wheel_angle.iter_mut().zip(&body.wheels) {
        let point_v = [v_body[0] - omega * w.pos[1], v_body[1] + omega * w.pos[0]];
        *angle += dot(w.tangent, point_v) / p.wheel_radius * dt;
    }

    state.pose = Pose { x: pos[0], y: pos[1], heading };
    state.clock += dt;
    state.steps += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::body::{build_body, BodyParams, WheelUnit};
    use crate::morphology::RobotDesign;

    /// Body with a single forward-rolling wheel at the centre so that the
    /// commanded rim speed is the forward speed.
    fn unicycle() -> BodyModel {
        let mut b = build_body(&RobotDesign::head_only(), &BodyParams::default());
        b.wheels.push(WheelUnit { pos: [0.0, 0.0], tangent: [1.0, 0.0] });
        b.wheel_to_twist = vec![[1.0, 0.0, 0.0]];
        b
    }

    #[test]
    fn zero_commands_leave_pose() {
        let b = unicycle();
        let arena = ArenaSpec::exploration();
        let mut s = SimState::initial(&b, &arena);
        let start = s.pose;
        let cmds = ActuatorCommands { wheel_velocity: vec![0.0], joint_target: vec![] };
        for _ in 0..1000 {
            step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
        }
        assert!((s.pose.x - start.x).abs() < 1e-15 && (s.pose.y - start.y).abs() < 1e-15);
    }

    #[test]
    fn constant_velocity_closed_form() {
        let b = unicycle();
        let arena = ArenaSpec::loco_flat();
        let mut s = SimState::initial(&b, &arena);
        let cmds = ActuatorCommands { wheel_velocity: vec![0.1 / b.params.wheel_radius], joint_target: vec![] };
        // Already cruising at the commanded speed.
        s.wheel_speed = cmds.wheel_velocity.clone();
        for _ in 0..1000 {
            step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
        }
        assert!((s.pose.x - 1.0).abs() < 1e-9, "x = {}", s.pose.x);
        assert!((s.clock - 10.0).abs() < 1e-9);
    }

    #[test]
    fn wall_is_never_crossed() {
        let b = unicycle();
        let arena = ArenaSpec::exploration();
        let mut s = SimState::initial(&b, &arena);
        let cmds = ActuatorCommands { wheel_velocity: vec![2.0], joint_target: vec![] };
        for _ in 0..5000 {
            step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
            assert!(s.pose.x <= 4.0 - b.footprint_radius + 1e-12);
        }
        assert!((s.pose.x - (4.0 - b.footprint_radius)).abs() < 1e-9);
        // The wheel stalls against the wall.
        let a = s.wheel_angle[0];
        step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
        assert!((s.wheel_angle[0] - a).abs() < 1e-9);
    }

    #[test]
    fn non_finite_command_faults() {
        let b = unicycle();
        let arena = ArenaSpec::exploration();
        let mut s = SimState::initial(&b, &arena);
        let cmds = ActuatorCommands { wheel_velocity: vec![f64::NAN], joint_target: vec![] };
        assert!(matches!(step(&mut s, &b, &cmds, &arena, 0.01), Err(Error::Fault(_))));
    }

    #[test]
    fn cube_moves_only_on_contact() {
        let b = unicycle();
        let arena = ArenaSpec::manipulation();
        let mut s = SimState::initial(&b, &arena);
        let c0 = s.cube.unwrap().center;
        let cmds = ActuatorCommands { wheel_velocity: vec![2.0], joint_target: vec![] };
        let mut t = 0;
        while s.contact_steps == 0 {
            step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
            if s.contact_steps == 0 {
                assert_eq!(s.cube.unwrap().center, c0);
            }
            t += 1;
            assert!(t < 10_000);
        }
        for _ in 0..500 {
            step(&mut s, &b, &cmds, &arena, 0.01).unwrap();
        }
        assert!(s.cube.unwrap().center[0] > c0[0] + 0.3);
    }
}
