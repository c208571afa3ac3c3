//! Per-pursuer decision making.
//!
//! A pursuer only ever looks at its own state and the evader's. It measures
//! the tracking error in its local frame, keeps a three-sample window per
//! axis, and lets one [`AxisLearner`] per axis turn the window into a control.
//! The two controls are then decomposed into a speed and heading adjustment.
//!
//! The learners work on the error split into a *lateral* axis (x, positive
//! to port) and a *longitudinal* axis (y, along the heading). In that frame
//! `atan(u_x / u_y)` is the bearing of the commanded direction relative to
//! the bow, so adding it to the heading turns the vessel onto the command.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, normalize_angle, GeodeticPosition};
use crate::kinematics::{
    decompose_control, ControlAdjustment, PolarAdjustment, VesselId, VesselState,
};
use crate::rl::{
    model_weights, AxisLearner, CostParams, ErrorWindow, LearnerConfig, LearnerStatus, Transition,
};

pub const DEFAULT_CAPTURE_RADIUS_M: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mission {
    Intercept,
    Surveil { standoff: f64 },
    Idle,
}

impl Mission {
    pub fn validate(&self) -> Result<()> {
        match self {
            Mission::Surveil { standoff } if !(standoff.is_finite() && *standoff > 0.0) => {
                Err(Error::validation("mission.standoff_m", "must be > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mission::Intercept => "intercept",
            Mission::Surveil { .. } => "surveil",
            Mission::Idle => "idle",
        }
    }
}

impl std::fmt::Display for Mission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mission::Surveil { standoff } => write!(f, "surveil({standoff} m)"),
            other => f.write_str(other.name()),
        }
    }
}

/// Pursuer-minus-target error in the pursuer's ENU frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingError {
    pub ex: f64,
    pub ey: f64,
    pub e_theta: f64,
}

pub fn measure_error(
    pursuer: &VesselState,
    target_point: &GeodeticPosition,
    target_heading: f64,
) -> TrackingError {
    let rel = geo::relative_enu(&pursuer.pos, target_point);
    TrackingError {
        ex: -rel.e,
        ey: -rel.n,
        e_theta: normalize_angle(pursuer.heading - target_heading),
    }
}

/// Point and heading the pursuer should track for its mission.
pub fn mission_target(
    mission: &Mission,
    evader: &VesselState,
    pursuer: &VesselState,
) -> Result<(GeodeticPosition, f64)> {
    match mission {
        Mission::Intercept => Ok((evader.pos, evader.heading)),
        Mission::Idle => Ok((pursuer.pos, pursuer.heading)),
        Mission::Surveil { standoff } => {
            let bearing = geo::heading_towards(&evader.pos, &pursuer.pos)
                .unwrap_or_else(|| normalize_angle(evader.heading + std::f64::consts::PI));
            let point = geo::destination(&evader.pos, bearing, *standoff)?;
            Ok((point, evader.heading))
        }
    }
}

/// Inclusive great-circle distance test.
pub fn check_capture(pursuer: &VesselState, evader: &VesselState, radius: f64) -> bool {
    geo::great_circle_distance(&pursuer.pos, &evader.pos) <= radius
}

/// Unit conversion between physical errors/commands and learner inputs/outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Meters of tracking error per learner error unit.
    pub error_scale_m: f64,
    /// m/s of adjustment per learner control unit.
    pub control_scale_mps: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            error_scale_m: 100_000.0,
            control_scale_mps: 10_000.0,
        }
    }
}

impl Normalization {
    /// Change in learner error per learner control unit over one tick, for a
    /// vessel whose speed comes entirely from the command.
    pub fn input_gain(&self, delta: f64, dt: f64) -> f64 {
        delta * dt * self.control_scale_mps / self.error_scale_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.error_scale_m.is_finite() && self.error_scale_m > 0.0) {
            return Err(Error::validation("learning.error_scale_m", "must be > 0"));
        }
        if !(self.control_scale_mps.is_finite() && self.control_scale_mps > 0.0) {
            return Err(Error::validation(
                "learning.control_scale_mps",
                "must be > 0",
            ));
        }
        Ok(())
    }
}

/// What one controller step measured and commanded, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlRecord {
    pub error: TrackingError,
    pub control: ControlAdjustment,
    pub polar: PolarAdjustment,
}

#[derive(Debug, Clone)]
pub struct PursuerController {
    id: VesselId,
    mission: Mission,
    learner_x: AxisLearner,
    learner_y: AxisLearner,
    window_x: ErrorWindow,
    window_y: ErrorWindow,
    /// Learner-unit controls, as executed, of the previous step.
    last_u: (f64, f64),
    primed: bool,
    prev_polar: PolarAdjustment,
    captured: bool,
    scales: Normalization,
}

impl PursuerController {
    /// Learner random streams are derived from the vessel id and axis.
    pub fn new(
        id: VesselId,
        mission: Mission,
        config: LearnerConfig,
        cost: CostParams,
        scales: Normalization,
    ) -> Result<Self> {
        mission.validate()?;
        scales.validate()?;
        let stream = u64::from(id) * 2;
        Ok(Self {
            id,
            mission,
            learner_x: AxisLearner::new(config, cost, stream)?,
            learner_y: AxisLearner::new(config, cost, stream + 1)?,
            window_x: ErrorWindow::ZERO,
            window_y: ErrorWindow::ZERO,
            last_u: (0.0, 0.0),
            primed: false,
            prev_polar: PolarAdjustment::ZERO,
            captured: false,
            scales,
        })
    }

    /// Replaces both learners, e.g. to start from known weights.
    pub fn with_learners(mut self, x: AxisLearner, y: AxisLearner) -> Self {
        self.learner_x = x;
        self.learner_y = y;
        self
    }

    /// Starts both learners from the exact value weights of the per-axis
    /// integrator `e' = e + b u` with lagged copies, instead of random weights.
    pub fn warm_start(mut self, b: f64) -> Result<Self> {
        let a = Matrix3::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let (critic, actor) =
            model_weights(&a, &Vector3::new(b, 0.0, 0.0), &self.learner_x.cost())?;
        self.learner_x = self.learner_x.clone().with_weights(critic, actor);
        self.learner_y = self.learner_y.clone().with_weights(critic, actor);
        Ok(self)
    }

    pub fn id(&self) -> VesselId {
        self.id
    }

    pub fn mission(&self) -> Mission {
        self.mission
    }

    pub fn is_captured(&self) -> bool {
        self.captured
    }

    pub fn windows(&self) -> (ErrorWindow, ErrorWindow) {
        (self.window_x, self.window_y)
    }

    pub fn prev_polar(&self) -> PolarAdjustment {
        self.prev_polar
    }

    pub fn learners(&self) -> (&AxisLearner, &AxisLearner) {
        (&self.learner_x, &self.learner_y)
    }

    pub fn learner_status(&self) -> (LearnerStatus, LearnerStatus) {
        (self.learner_x.status(), self.learner_y.status())
    }

    pub fn mark_captured(&mut self) {
        self.captured = true;
    }

    /// New mission; windows are re-primed from the next measurement while the
    /// learners keep adapting from their current weights.
    pub fn set_mission(&mut self, mission: Mission) -> Result<()> {
        mission.validate()?;
        self.mission = mission;
        self.primed = false;
        Ok(())
    }

    /// Replaces the commanded controls of the last step by the ones the
    /// vessel actually executed, given the speed it ended up sailing at.
    ///
    /// The executed control is the one that reproduces the observed motion
    /// under `speed = delta * control_scale * |u|`: it points along the new
    /// heading (so a command with a negative forward part, which the heading
    /// law folds onto the bow, counts as its opposite) and its magnitude
    /// follows the applied, possibly saturated, speed.
    pub fn observe_motion(&mut self, applied_speed: f64, delta: f64) {
        let (ux, uy) = self.last_u;
        let norm = ux.hypot(uy);
        let magnitude = applied_speed / (delta * self.scales.control_scale_mps);
        self.last_u = if norm > 0.0 {
            let sign = if uy < 0.0 { -1.0 } else { 1.0 };
            (sign * magnitude * ux / norm, sign * magnitude * uy / norm)
        } else {
            (0.0, magnitude)
        };
    }

    /// Mission becomes idle and both learners stop.
    pub fn disable(&mut self) {
        self.mission = Mission::Idle;
        self.prev_polar = PolarAdjustment::ZERO;
        self.learner_x.freeze();
        self.learner_y.freeze();
    }

    /// One decision step from the pursuer's own state and the evader's.
    ///
    /// Returns the adjustment to apply now; it is also kept as the previous
    /// adjustment for the next call's speed increment.
    pub fn step(&mut self, evader: &VesselState, own: &VesselState) -> Result<ControlRecord> {
        if self.captured || self.mission == Mission::Idle {
            self.prev_polar = PolarAdjustment::ZERO;
            let error = if self.mission == Mission::Idle {
                TrackingError::default()
            } else {
                measure_error(own, &evader.pos, evader.heading)
            };
            return Ok(ControlRecord {
                error,
                ..ControlRecord::default()
            });
        }

        let (point, heading) = mission_target(&self.mission, evader, own)?;
        let error = measure_error(own, &point, heading);
        let (lateral, longitudinal) = body_components(&error, own.heading);
        let ex = lateral / self.scales.error_scale_m;
        let ey = longitudinal / self.scales.error_scale_m;

        let (ux, uy) = if self.primed {
            let next_x = self.window_x.pushed(ex);
            let next_y = self.window_y.pushed(ey);
            let ux = self.learner_x.step(&Transition {
                e: self.window_x,
                u: self.last_u.0,
                e_next: next_x,
            });
            let uy = self.learner_y.step(&Transition {
                e: self.window_y,
                u: self.last_u.1,
                e_next: next_y,
            });
            self.window_x = next_x;
            self.window_y = next_y;
            (ux, uy)
        } else {
            self.window_x = ErrorWindow::filled(ex);
            self.window_y = ErrorWindow::filled(ey);
            self.primed = true;
            (
                self.learner_x.control(&self.window_x),
                self.learner_y.control(&self.window_y),
            )
        };
        self.last_u = (ux, uy);

        let control = ControlAdjustment {
            u_x: ux * self.scales.control_scale_mps,
            u_y: uy * self.scales.control_scale_mps,
        };
        let polar = decompose_control(control);
        self.prev_polar = polar;
        Ok(ControlRecord {
            error,
            control,
            polar,
        })
    }
}

/// Splits an ENU error into (port, forward) components for a vessel heading
/// `heading` radians from East.
pub fn body_components(error: &TrackingError, heading: f64) -> (f64, f64) {
    let (sin_h, cos_h) = heading.sin_cos();
    let forward = error.ex * cos_h + error.ey * sin_h;
    let port = -error.ex * sin_h + error.ey * cos_h;
    (port, forward)
}
