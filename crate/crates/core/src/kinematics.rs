//! Vessel state, the speed/heading adjustment model and evader behaviors.
//!
//! Headings are measured from the local East axis, counter-clockwise positive,
//! and kept in `(-pi, pi]`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, normalize_angle, GeodeticPosition};

pub const DEFAULT_PURSUER_MAX_SPEED: f64 = 15.0;
pub const DEFAULT_EVADER_MAX_SPEED: f64 = 10.0;

pub type VesselId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselState {
    pub id: VesselId,
    pub pos: GeodeticPosition,
    /// Surge speed actually applied, m/s, within `[0, max_speed]`.
    pub speed: f64,
    /// Heading in radians from local East, CCW.
    pub heading: f64,
    pub max_speed: f64,
    /// Running speed demand of the incremental speed law, before the
    /// `[0, max_speed]` actuator limit is applied.
    pub speed_demand: f64,
}

impl VesselState {
    pub fn new(
        id: VesselId,
        pos: GeodeticPosition,
        speed: f64,
        heading: f64,
        max_speed: f64,
    ) -> Self {
        let speed = speed.clamp(0.0, max_speed);
        Self {
            id,
            pos,
            speed,
            heading: normalize_angle(heading),
            max_speed,
            speed_demand: speed,
        }
    }

    /// Brings the vessel to rest and discards any pending speed demand.
    pub fn halted(mut self) -> Self {
        self.speed = 0.0;
        self.speed_demand = 0.0;
        self
    }
}

/// Per-axis control outputs of a pursuer's two learners.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAdjustment {
    pub u_x: f64,
    pub u_y: f64,
}

/// Speed magnitude and heading increment derived from a [`ControlAdjustment`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolarAdjustment {
    pub u_v: f64,
    pub u_theta: f64,
}

impl PolarAdjustment {
    pub const ZERO: Self = Self {
        u_v: 0.0,
        u_theta: 0.0,
    };
}

/// `u_v = |(u_x, u_y)|`, `u_theta = atan(u_x / u_y)` in `[-pi/2, pi/2]`.
///
/// The single-argument arctangent is kept on purpose: a command pointing
/// backwards turns the vessel onto the opposite course, not around.
pub fn decompose_control(c: ControlAdjustment) -> PolarAdjustment {
    let u_v = c.u_x.hypot(c.u_y);
    let u_theta = if c.u_y == 0.0 {
        if c.u_x == 0.0 {
            0.0
        } else {
            FRAC_PI_2.copysign(c.u_x)
        }
    } else {
        (c.u_x / c.u_y).atan()
    };
    PolarAdjustment { u_v, u_theta }
}

/// Moves `distance` meters along the great circle leaving `p` at `heading`.
pub fn great_circle_step(
    p: &GeodeticPosition,
    heading: f64,
    distance: f64,
) -> Result<GeodeticPosition> {
    if !(distance >= 0.0 && distance < std::f64::consts::PI * p.radius) {
        return Err(Error::validation(
            "distance",
            format!("{distance} m outside [0, pi*R)"),
        ));
    }
    geo::destination(p, heading, distance)
}

/// One tick of the incremental speed law and the additive heading law.
///
/// `speed_demand += delta * (now.u_v - prev.u_v)`, the applied speed is the
/// demand limited to `[0, max_speed]`, and `heading += now.u_theta`. The
/// vessel then sails `speed * dt` along the new heading.
pub fn step_vessel(
    s: &VesselState,
    now: PolarAdjustment,
    prev: PolarAdjustment,
    delta: f64,
    dt: f64,
) -> Result<VesselState> {
    let speed_demand = s.speed_demand + delta * (now.u_v - prev.u_v);
    let speed = speed_demand.clamp(0.0, s.max_speed);
    let heading = normalize_angle(s.heading + now.u_theta);
    let pos = great_circle_step(&s.pos, heading, speed * dt)?;
    Ok(VesselState {
        pos,
        speed,
        heading,
        speed_demand,
        ..*s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaderPolicy {
    ConstantCourse {
        heading: f64,
        speed: f64,
    },
    Waypoints {
        points: Vec<GeodeticPosition>,
        speed: f64,
    },
    RandomManeuver {
        seed: u64,
        base_heading: f64,
        /// Maximum heading change rate, rad/s.
        turn_rate: f64,
        speed: f64,
    },
}

impl EvaderPolicy {
    pub fn speed(&self) -> f64 {
        match self {
            EvaderPolicy::ConstantCourse { speed, .. }
            | EvaderPolicy::Waypoints { speed, .. }
            | EvaderPolicy::RandomManeuver { speed, .. } => *speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed().is_finite() && self.speed() >= 0.0) {
            return Err(Error::validation("evader.speed_mps", "must be >= 0"));
        }
        match self {
            EvaderPolicy::Waypoints { points, .. } if points.is_empty() => {
                Err(Error::validation("evader.waypoints", "must not be empty"))
            }
            EvaderPolicy::RandomManeuver { turn_rate, .. }
                if turn_rate.is_nan() || *turn_rate < 0.0 =>
            {
                Err(Error::validation("evader.turn_rate_deg_s", "must be >= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Runs an [`EvaderPolicy`], carrying the waypoint cursor and random stream.
#[derive(Debug, Clone)]
pub struct EvaderDriver {
    policy: EvaderPolicy,
    next_waypoint: usize,
    rng: ChaCha8Rng,
}

impl EvaderDriver {
    pub fn new(policy: EvaderPolicy) -> Self {
        let seed = match &policy {
            EvaderPolicy::RandomManeuver { seed, .. } => *seed,
            _ => 0,
        };
        Self {
            policy,
            next_waypoint: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn policy(&self) -> &EvaderPolicy {
        &self.policy
    }

    pub fn step(&mut self, s: &VesselState, dt: f64) -> Result<VesselState> {
        match &self.policy {
            EvaderPolicy::ConstantCourse { heading, speed } => {
                sail(s, normalize_angle(*heading), *speed, dt)
            }
            EvaderPolicy::RandomManeuver {
                turn_rate, speed, ..
            } => {
                let bound = turn_rate * dt;
                let turn = if bound > 0.0 {
                    self.rng.gen_range(-bound..=bound)
                } else {
                    0.0
                };
                sail(s, normalize_angle(s.heading + turn), *speed, dt)
            }
            EvaderPolicy::Waypoints { points, speed } => {
                let mut pos = s.pos;
                let mut heading = s.heading;
                let mut budget = speed.min(s.max_speed) * dt;
                while self.next_waypoint < points.len() {
                    let wp = points[self.next_waypoint];
                    let remaining = geo::great_circle_distance(&pos, &wp);
                    if remaining <= budget {
                        budget -= remaining;
                        pos = wp;
                        self.next_waypoint += 1;
                        continue;
                    }
                    heading = geo::heading_towards(&pos, &wp).unwrap_or(heading);
                    pos = great_circle_step(&pos, heading, budget)?;
                    break;
                }
                let moving = self.next_waypoint < points.len();
                let v = if moving { speed.min(s.max_speed) } else { 0.0 };
                Ok(VesselState {
                    pos,
                    heading,
                    speed: v,
                    speed_demand: v,
                    ..*s
                })
            }
        }
    }
}

/// Evader step as a free function; builds a fresh driver each call, so it is
/// only meaningful for the memoryless [`EvaderPolicy::ConstantCourse`] or for
/// the first step of the other policies.
pub fn evader_step(s: &VesselState, policy: &EvaderPolicy, dt: f64) -> Result<VesselState> {
    EvaderDriver::new(policy.clone()).step(s, dt)
}

fn sail(s: &VesselState, heading: f64, speed: f64, dt: f64) -> Result<VesselState> {
    let speed = speed.clamp(0.0, s.max_speed);
    let pos = great_circle_step(&s.pos, heading, speed * dt)?;
    Ok(VesselState {
        pos,
        heading,
        speed,
        speed_demand: speed,
        ..*s
    })
}
