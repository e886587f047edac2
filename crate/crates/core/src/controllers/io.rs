use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::ControllerFamily;
use crate::error::{Error, Result};
use crate::morphology::{ComponentKind, RobotDesign};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorChannel {
    /// Angle turned by a wheel over the last control period, relative to the
    /// largest commandable turn.
    WheelRate(usize),
    /// Angular position of one of the two joints of a limb.
    JointAngle { limb: usize, joint: usize },
    /// Proximity reading in `[0, 1]`.
    Proximity(usize),
    /// Binary infrared receiver.
    Infrared(usize),
}

impl SensorChannel {
    pub fn is_proprioceptive(self) -> bool {
        matches!(self, Self::WheelRate(_) | Self::JointAngle { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionChannel {
    Wheel(usize),
    Joint { limb: usize, joint: usize },
}

/// Sensor and action vector layout of a design, in component order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoLayout {
    pub sensors: Vec<SensorChannel>,
    pub actions: Vec<ActionChannel>,
    pub wheels: usize,
    pub limbs: usize,
    pub proximity: usize,
}

impl IoLayout {
    pub fn of(design: &RobotDesign) -> Self {
        let mut layout = Self { sensors: Vec::new(), actions: Vec::new(), wheels: 0, limbs: 0, proximity: 0 };
        for c in design.components() {
            match c.kind {
                ComponentKind::Wheel => {
                    layout.sensors.push(SensorChannel::WheelRate(layout.wheels));
                    layout.actions.push(ActionChannel::Wheel(layout.wheels));
                    layout.wheels += 1;
                }
                ComponentKind::Limb => {
                    for joint in 0..2 {
                        layout.sensors.push(SensorChannel::JointAngle { limb: layout.limbs, joint });
                        layout.actions.push(ActionChannel::Joint { limb: layout.limbs, joint });
                    }
                    layout.limbs += 1;
                }
                ComponentKind::Sensor => {
                    layout.sensors.push(SensorChannel::Proximity(layout.proximity));
                    layout.sensors.push(SensorChannel::Infrared(layout.proximity));
                    layout.proximity += 1;
                }
                ComponentKind::Castor => {}
            }
        }
        layout
    }

    pub fn n(&self) -> usize {
        self.sensors.len()
    }

    pub fn m(&self) -> usize {
        self.actions.len()
    }

    /// Pairs `(action index, sensor index)` of each actuator with its own
    /// proprioceptive channel.
    pub fn proprioceptive_pairs(&self) -> Vec<(usize, usize)> {
        self.actions
            .iter()
            .enumerate()
            .filter_map(|(ai, a)| {
                let want = match *a {
                    ActionChannel::Wheel(w) => SensorChannel::WheelRate(w),
                    ActionChannel::Joint { limb, joint } => SensorChannel::JointAngle { limb, joint },
                };
                self.sensors.iter().position(|s| *s == want).map(|si| (ai, si))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorParams {
    /// Wheel angular velocity at action 1 (rad/s).
    pub v_max: f64,
    /// Oscillation frequency at action 1 (Hz) for the fixed and Elman families.
    pub f_max: f64,
    /// Joint oscillation amplitude (rad).
    pub amplitude: f64,
    /// Joint range half-width (rad) for homeokinetic goal positions.
    pub joint_range: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self { v_max: 2.0, f_max: 1.0, amplitude: FRAC_PI_4, joint_range: FRAC_PI_2 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActuatorCommands {
    /// Target angular velocity per wheel (rad/s).
    pub wheel_velocity: Vec<f64>,
    /// Target position per limb joint (rad).
    pub joint_target: Vec<[f64; 2]>,
}

impl ActuatorCommands {
    pub fn zeros(layout: &IoLayout) -> Self {
        Self { wheel_velocity: vec![0.0; layout.wheels], joint_target: vec![[0.0; 2]; layout.limbs] }
    }

    pub fn is_finite(&self) -> bool {
        self.wheel_velocity.iter().all(|v| v.is_finite()) && self.joint_target.iter().flatten().all(|v| v.is_finite())
    }
}

/// Convert a normalised action vector into actuator commands at time `t`.
///
/// Wheels scale linearly to `[-v_max, v_max]`. Homeokinetic joint entries are
/// goal positions within the joint range; fixed and Elman joint entries set
/// the frequency `f = f_max (a + 1) / 2` of a sinusoid
/// `amplitude * sin(2π f t)`.
pub fn map_actions(
    layout: &IoLayout,
    a: &[f64],
    family: ControllerFamily,
    t: f64,
    params: &ActuatorParams,
    out: &mut ActuatorCommands,
) -> Result<()> {
    if a.len() != layout.m() {
        return Err(Error::ShapeMismatch { expected: layout.m(), actual: a.len() });
    }
    out.wheel_velocity.resize(layout.wheels, 0.0);
    out.joint_target.resize(layout.limbs, [0.0; 2]);
    for (value, ch) in a.iter().zip(&layout.actions) {
        let v = value.clamp(-1.0, 1.0);
        match *ch {
            ActionChannel::Wheel(w) => out.wheel_velocity[w] = v * params.v_max,
            ActionChannel::Joint { limb, joint } => {
                out.joint_target[limb][joint] = match family {
                    ControllerFamily::Homeokinetic => v * params.joint_range,
                    ControllerFamily::Fixed | ControllerFamily::Elman => {
                        params.amplitude * (2.0 * PI * joint_frequency(v, params) * t).sin()
                    }
                };
            }
        }
    }
    Ok(())
}

/// Oscillation frequency for a normalised joint action.
pub fn joint_frequency(a: f64, params: &ActuatorParams) -> f64 {
    params.f_max * (a.clamp(-1.0, 1.0) + 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{index, Component, VoxelContent, CELLS};

    fn wheel_limb_design() -> RobotDesign {
        let mut grid = vec![VoxelContent::Empty; CELLS];
        for y in 4..=6 {
            grid[index([5, y, 0])] = VoxelContent::Chassis;
        }
        grid[index([5, 3, 0])] = VoxelContent::Wheel;
        grid[index([5, 7, 0])] = VoxelContent::Limb;
        let comps = vec![
            Component { kind: ComponentKind::Wheel, pos: [5, 3, 0], normal: [0, -1, 0] },
            Component { kind: ComponentKind::Limb, pos: [5, 7, 0], normal: [0, 1, 0] },
        ];
        RobotDesign::from_parts(grid, comps).unwrap()
    }

    #[test]
    fn layout_counts() {
        let l = IoLayout::of(&wheel_limb_design());
        assert_eq!((l.n(), l.m()), (3, 3));
        assert_eq!(l.proprioceptive_pairs(), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn zero_action_under_hk() {
        let l = IoLayout::of(&wheel_limb_design());
        let mut out = ActuatorCommands::zeros(&l);
        map_actions(&l, &[0.0; 3], ControllerFamily::Homeokinetic, 3.0, &ActuatorParams::default(), &mut out).unwrap();
        assert_eq!(out.wheel_velocity, vec![0.0]);
        assert_eq!(out.joint_target, vec![[0.0, 0.0]]);
    }

    #[test]
    fn elman_joint_at_time_zero() {
        let l = IoLayout::of(&wheel_limb_design());
        let p = ActuatorParams::default();
        let mut out = ActuatorCommands::zeros(&l);
        map_actions(&l, &[1.0, 1.0, 1.0], ControllerFamily::Elman, 0.0, &p, &mut out).unwrap();
        assert_eq!(out.joint_target, vec![[0.0, 0.0]]);
        assert_eq!(out.wheel_velocity, vec![p.v_max]);
        assert_eq!(joint_frequency(1.0, &p), p.f_max);
    }

    #[test]
    fn frequency_is_monotone() {
        let p = ActuatorParams::default();
        let freqs: Vec<f64> = (0..=200).map(|i| joint_frequency(-1.0 + i as f64 / 100.0, &p)).collect();
        assert_eq!(freqs[0], 0.0);
        assert_eq!(*freqs.last().unwrap(), p.f_max);
        assert!(freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn wrong_action_length() {
        let l = IoLayout::of(&wheel_limb_design());
        let mut out = ActuatorCommands::zeros(&l);
        let err = map_actions(&l, &[0.0], ControllerFamily::Fixed, 0.0, &ActuatorParams::default(), &mut out);
        assert!(matches!(err, Err(Error::ShapeMismatch { expected: 3, actual: 1 })));
    }
}
