//! Controllers and the sensor/actuator convention they share.
//!
//! Three families drive a design: the homeokinetic controller used to
//! evaluate designs during MEHK, a fixed random feed-forward network for the
//! MEFC baseline, and an Elman network whose flat parameter vector is
//! optimised by NCMA-ES on downstream tasks.

mod elman;
mod fixed;
mod hk;
mod io;

pub use elman::ElmanController;
pub use fixed::FixedController;
pub use hk::{model_error_gradients, tle_gradients, HkController, HkParams, HkStep, TleGradients};
pub use io::{map_actions, ActionChannel, ActuatorCommands, ActuatorParams, IoLayout, SensorChannel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerFamily {
    Homeokinetic,
    Fixed,
    Elman,
}

impl ControllerFamily {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Homeokinetic => "homeokinetic",
            Self::Fixed => "fixed",
            Self::Elman => "elman",
        }
    }
}

/// Output of one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub action: Vec<f64>,
    /// Time-loop error and prediction-error norm (homeokinetic only, absent on
    /// the first step of an episode).
    pub tle: Option<f64>,
    pub error_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Controller {
    Homeokinetic(HkController),
    Fixed(FixedController),
    Elman(ElmanController),
}

impl Controller {
    pub fn family(&self) -> ControllerFamily {
        match self {
            Self::Homeokinetic(_) => ControllerFamily::Homeokinetic,
            Self::Fixed(_) => ControllerFamily::Fixed,
            Self::Elman(_) => ControllerFamily::Elman,
        }
    }

    pub fn reset(&mut self) {
        match self {
            Self::Homeokinetic(c) => c.reset_episode(),
            Self::Elman(c) => c.reset(),
            Self::Fixed(_) => {}
        }
    }

    pub fn step(&mut self, s: &[f64]) -> Result<ControlOutput> {
        match self {
            Self::Homeokinetic(c) => {
                let out = c.step(s)?;
                Ok(ControlOutput { action: out.action, tle: out.tle, error_norm: out.error_norm })
            }
            Self::Fixed(c) => Ok(ControlOutput { action: c.forward(s)?, tle: None, error_norm: None }),
            Self::Elman(c) => Ok(ControlOutput { action: c.forward(s)?, tle: None, error_norm: None }),
        }
    }

    /// Count of numerical faults that forced a parameter reset.
    pub fn faults(&self) -> u32 {
        match self {
            Self::Homeokinetic(c) => c.faults(),
            _ => 0,
        }
    }
}

/// Flat controller parameters with a shape header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParamsFile {
    pub family: ControllerFamily,
    pub n: usize,
    pub m: usize,
    pub params: Vec<f64>,
}

impl ControllerParamsFile {
    pub fn from_controller(c: &Controller) -> Self {
        match c {
            Controller::Homeokinetic(h) => {
                Self { family: ControllerFamily::Homeokinetic, n: h.n(), m: h.m(), params: h.flat() }
            }
            Controller::Fixed(f) => Self { family: ControllerFamily::Fixed, n: f.n(), m: f.m(), params: f.flat() },
            Controller::Elman(e) => Self { family: ControllerFamily::Elman, n: e.n(), m: e.m(), params: e.flat() },
        }
    }

    pub fn into_controller(self) -> Result<Controller> {
        match self.family {
            ControllerFamily::Elman => Ok(Controller::Elman(ElmanController::from_flat(self.n, self.m, &self.params)?)),
            ControllerFamily::Fixed => Ok(Controller::Fixed(FixedController::from_flat(self.n, self.m, &self.params)?)),
            ControllerFamily::Homeokinetic => Err(Error::Config(
                "homeokinetic controllers adapt online and are not restored from parameter files".into(),
            )),
        }
    }
}

/// CSV rows `t,tle,error_norm` for the homeokinetic diagnostics stream.
pub fn diagnostics_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("t,tle,error_norm\n");
    for (t, tle, e) in rows {
        s.push_str(&format!("{t:.3},{tle:e},{e:e}\n"));
    }
    s
}
