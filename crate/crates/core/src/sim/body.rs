//! Planar body abstraction of a voxel design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::geometry::{norm, Vec2};
use crate::controllers::IoLayout;
use crate::morphology::{ComponentKind, RobotDesign, VoxelContent, HEAD};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyParams {
    /// Edge length of one voxel (m).
    pub voxel_size: f64,
    pub wheel_radius: f64,
    /// Time constant of the wheel motors (s); zero for instantaneous response.
    pub motor_tau: f64,
    /// Smallest footprint radius; the head alone occupies this much.
    pub min_footprint: f64,
    /// Ground thrust per radian of limb sweep (m/rad).
    pub limb_thrust: f64,
    /// Maximum joint speed (rad/s).
    pub joint_speed: f64,
    pub sensor_range: f64,
    /// Half-angle of the IR receiver cone (rad).
    pub ir_half_angle: f64,
    /// Voxel count at which limb thrust is halved.
    pub mass_scale: f64,
    /// Limb thrust multiplier for bodies without castors.
    pub drag_without_castor: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.02,
            wheel_radius: 0.05,
            motor_tau: 0.1,
            min_footprint: 0.06,
            limb_thrust: 0.02,
            joint_speed: 6.0,
            sensor_range: 1.0,
            ir_half_angle: 0.5,
            mass_scale: 50.0,
            drag_without_castor: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WheelUnit {
    pub pos: Vec2,
    /// Rolling direction in the body frame.
    pub tangent: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimbUnit {
    pub pos: Vec2,
    /// Thrust direction in the body frame; zero for limbs without ground contact.
    pub direction: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorUnit {
    pub pos: Vec2,
    /// Ray direction in the body frame; `None` when the sensor faces straight up or down.
    pub direction: Option<Vec2>,
}

#[derive(Clone, Debug)]
pub struct BodyModel {
    pub layout: IoLayout,
    pub footprint_radius: f64,
    pub voxel_count: usize,
    pub wheels: Vec<WheelUnit>,
    pub limbs: Vec<LimbUnit>,
    pub sensors: Vec<SensorUnit>,
    pub castors: usize,
    /// Column `i` maps wheel `i` rim speed onto the body twist `(vx, vy, ω)`.
    pub wheel_to_twist: Vec<[f64; 3]>,
    /// Limb thrust multiplier from mass and drag.
    pub limb_gain: f64,
    pub params: BodyParams,
}

fn planar(p: [u8; 3], vs: f64) -> Vec2 {
    [(p[0] as f64 - HEAD[0] as f64) * vs, (p[1] as f64 - HEAD[1] as f64) * vs]
}

/// Rolling direction for a horizontal axle normal. Mirror-image wheels share
/// the same direction so equal commands drive straight.
fn rolling_direction(normal: [i8; 3]) -> Vec2 {
    [normal[1].abs() as f64, normal[0].abs() as f64]
}

impl BodyModel {
    pub fn n_wheels(&self) -> usize {
        self.wheels.len()
    }

    pub fn n_limbs(&self) -> usize {
        self.limbs.len()
    }

    /// Least-squares twist for the given wheel rim speeds.
    pub fn wheel_twist(&self, rim: &[f64]) -> [f64; 3] {
        let mut t = [0.0; 3];
        for (col, r) in self.wheel_to_twist.iter().zip(rim) {
            for k in 0..3 {
                t[k] += col[k] * r;
            }
        }
        t
    }

    /// Rows `[t_x, t_y, p_x t_y - p_y t_x]` mapping a twist onto rim speeds.
    pub fn wheel_jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.wheels.len(), 3, |i, k| {
            let w = &self.wheels[i];
            match k {
                0 => w.tangent[0],
                1 => w.tangent[1],
                _ => w.pos[0] * w.tangent[1] - w.pos[1] * w.tangent[0],
            }
        })
    }
}

pub fn build_body(design: &RobotDesign, params: &BodyParams) -> BodyModel {
    let vs = params.voxel_size;
    let layout = IoLayout::of(design);
    let mut footprint: f64 = 0.0;
    let mut voxel_count = 0;
    for (i, v) in design.grid().iter().enumerate() {
        if *v != VoxelContent::Empty {
            voxel_count += 1;
            footprint = footprint.max(norm(planar(crate::morphology::coords(i), vs)));
        }
    }
    let footprint_radius = (footprint + 0.5 * vs).max(params.min_footprint);

    let mut wheels = Vec::new();
    let mut limbs = Vec::new();
    let mut sensors = Vec::new();
    let mut castors = 0;
    for c in design.components() {
        let pos = planar(c.pos, vs);
        let n = c.normal;
        match c.kind {
            ComponentKind::Wheel => wheels.push(WheelUnit { pos, tangent: rolling_direction(n) }),
            ComponentKind::Limb => {
                let direction = match n {
                    [0, 0, -1] => [1.0, 0.0],
                    [0, 0, _] => [0.0, 0.0],
                    _ => [-(n[0] as f64), -(n[1] as f64)],
                };
                limbs.push(LimbUnit { pos, direction });
            }
            ComponentKind::Sensor => {
                let direction = (n[2] == 0).then(|| [n[0] as f64, n[1] as f64]);
                sensors.push(SensorUnit { pos, direction });
            }
            ComponentKind::Castor => castors += 1,
        }
    }

    let mut body = BodyModel {
        layout,
        footprint_radius,
        voxel_count,
        wheels,
        limbs,
        sensors,
        castors,
        wheel_to_twist: Vec::new(),
        limb_gain: 0.0,
        params: *params,
    };
    if !body.wheels.is_empty() {
        let pinv = body
            .wheel_jacobian()
            .pseudo_inverse(1e-10)
            .expect("pseudo-inverse with a positive tolerance");
        body.wheel_to_twist = (0..body.wheels.len()).map(|i| [pinv[(0, i)], pinv[(1, i)], pinv[(2, i)]]).collect();
    }
    let drag = if castors > 0 { 1.0 } else { params.drag_without_castor };
    body.limb_gain = params.limb_thrust * drag / (1.0 + voxel_count as f64 / params.mass_scale);
    body
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{index, Component, CELLS};

    pub(crate) fn two_wheel_design() -> RobotDesign {
        let mut grid = vec![VoxelContent::Empty; CELLS];
        for y in 2..=8 {
            grid[index([5, y, 0])] = VoxelContent::Chassis;
        }
        grid[index([5, 1, 0])] = VoxelContent::Wheel;
        grid[index([5, 9, 0])] = VoxelContent::Wheel;
        let comps = vec![
            Component { kind: ComponentKind::Wheel, pos: [5, 1, 0], normal: [0, -1, 0] },
            Component { kind: ComponentKind::Wheel, pos: [5, 9, 0], normal: [0, 1, 0] },
        ];
        RobotDesign::from_parts(grid, comps).unwrap()
    }

    #[test]
    fn head_only_body_has_no_actuators() {
        let b = build_body(&RobotDesign::head_only(), &BodyParams::default());
        assert_eq!((b.n_wheels(), b.n_limbs(), b.sensors.len()), (0, 0, 0));
        assert_eq!(b.footprint_radius, BodyParams::default().min_footprint);
    }

    #[test]
    fn symmetric_wheels_drive_straight() {
        let b = build_body(&two_wheel_design(), &BodyParams::default());
        let t = b.wheel_twist(&[0.1, 0.1]);
        assert!((t[0] - 0.1).abs() < 1e-12);
        assert!(t[1].abs() < 1e-12);
        assert!(t[2].abs() < 1e-12);
        let spin = b.wheel_twist(&[-0.1, 0.1]);
        // Right wheel back, left wheel forward: clockwise.
        assert!(spin[0].abs() < 1e-12 && spin[2] < 0.0);
    }
}
