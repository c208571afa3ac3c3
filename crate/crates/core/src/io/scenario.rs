//! Scenario files: TOML in, [`ScenarioConfig`] out, and back again.
//!
//! Distances are meters, times seconds and angles degrees in the file;
//! headings are measured from East, counter-clockwise, like everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{
    EvaderSetup, EventKind, PursuerSetup, ScenarioConfig, ScheduledEvent, VesselSpec,
    DEFAULT_DELTA, DEFAULT_DT_S, DEFAULT_MAX_DURATION_S,
};
use crate::error::{Error, Result};
use crate::geo::{self, GeodeticPosition};
use crate::kinematics::{
    EvaderPolicy, VesselId, DEFAULT_EVADER_MAX_SPEED, DEFAULT_PURSUER_MAX_SPEED,
};
use crate::pursuit::{Mission, Normalization, DEFAULT_CAPTURE_RADIUS_M};
use crate::rl::{CostParams, LearnerConfig, UpdateRule};

const DEFAULT_Q_SCALE: f64 = 1e-4;
const DEFAULT_R: f64 = 0.01;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    simulation: RawSimulation,
    #[serde(default)]
    learning: RawLearning,
    evader: RawEvader,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pursuers: Vec<RawPursuer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<RawEvent>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    seed: Option<u64>,
    dt_s: Option<f64>,
    max_duration_s: Option<f64>,
    capture_radius_m: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLearning {
    delta: Option<f64>,
    q_scale: Option<f64>,
    r: Option<f64>,
    alpha_a: Option<f64>,
    alpha_c: Option<f64>,
    conv_threshold: Option<f64>,
    window_l: Option<usize>,
    max_iters: Option<usize>,
    init_scale: Option<f64>,
    update_rule: Option<UpdateRule>,
    error_scale_m: Option<f64>,
    control_scale_mps: Option<f64>,
    warm_start: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvader {
    id: Option<VesselId>,
    lon_deg: f64,
    lat_deg: f64,
    speed_mps: f64,
    heading_deg: f64,
    max_speed_mps: Option<f64>,
    policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    waypoints: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    maneuver_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    turn_rate_deg_s: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPursuer {
    id: VesselId,
    lon_deg: f64,
    lat_deg: f64,
    speed_mps: Option<f64>,
    /// Omitted: point at the evader.
    heading_deg: Option<f64>,
    max_speed_mps: Option<f64>,
    mission: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standoff_m: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    time_s: f64,
    kind: String,
    vessel: VesselId,
    #[serde(skip_serializing_if = "Option::is_none")]
    mission: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standoff_m: Option<f64>,
}

/// Parses and validates a scenario document.
pub fn parse_scenario(doc: &str) -> Result<ScenarioConfig> {
    let raw: RawScenario = toml::from_str(doc).map_err(|e| parse_error(doc, &e))?;
    let config = build(raw)?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let doc = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&doc)
}

fn parse_error(doc: &str, e: &toml::de::Error) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &doc[..span.start.min(doc.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}

fn position(section: &str, lon_deg: f64, lat_deg: f64) -> Result<GeodeticPosition> {
    if !lon_deg.is_finite() {
        return Err(Error::validation(
            format!("{section}.lon_deg"),
            "must be finite",
        ));
    }
    if !(lat_deg.is_finite() && lat_deg.abs() < 90.0) {
        return Err(Error::validation(
            format!("{section}.lat_deg"),
            "must lie strictly between -90 and 90",
        ));
    }
    GeodeticPosition::from_degrees(lon_deg, lat_deg)
}

fn mission(section: &str, name: Option<&str>, standoff_m: Option<f64>) -> Result<Mission> {
    let mission = match name.unwrap_or("intercept") {
        "intercept" => Mission::Intercept,
        "idle" => Mission::Idle,
        "surveil" => Mission::Surveil {
            standoff: standoff_m.ok_or_else(|| {
                Error::validation(format!("{section}.standoff_m"), "required for surveil")
            })?,
        },
        other => {
            return Err(Error::validation(
                format!("{section}.mission"),
                format!("unknown mission {other:?} (expected intercept, surveil or idle)"),
            ))
        }
    };
    mission
        .validate()
        .map_err(|_| Error::validation(format!("{section}.standoff_m"), "must be > 0"))?;
    Ok(mission)
}

fn build(raw: RawScenario) -> Result<ScenarioConfig> {
    let sim = raw.simulation;
    let seed = sim.seed.unwrap_or(0);
    let dt = sim.dt_s.unwrap_or(DEFAULT_DT_S);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("simulation.dt_s", "must be > 0"));
    }

    let lr = raw.learning;
    let defaults = LearnerConfig::default();
    let learner = LearnerConfig {
        alpha_a: lr.alpha_a.unwrap_or(defaults.alpha_a),
        alpha_c: lr.alpha_c.unwrap_or(defaults.alpha_c),
        conv_threshold: lr.conv_threshold.unwrap_or(defaults.conv_threshold),
        window_l: lr.window_l.unwrap_or(defaults.window_l),
        max_iters: lr.max_iters.unwrap_or(defaults.max_iters),
        init_scale: lr.init_scale.unwrap_or(defaults.init_scale),
        rng_seed: seed,
        update_rule: lr.update_rule.unwrap_or(defaults.update_rule),
    };
    let q_scale = lr.q_scale.unwrap_or(DEFAULT_Q_SCALE);
    if !(q_scale.is_finite() && q_scale > 0.0) {
        return Err(Error::validation("learning.q_scale", "must be > 0"));
    }
    let r = lr.r.unwrap_or(DEFAULT_R);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::validation("learning.r", "must be > 0"));
    }
    let cost = CostParams::isotropic(q_scale, r)?;
    let scale_defaults = Normalization::default();
    let scales = Normalization {
        error_scale_m: lr.error_scale_m.unwrap_or(scale_defaults.error_scale_m),
        control_scale_mps: lr
            .control_scale_mps
            .unwrap_or(scale_defaults.control_scale_mps),
    };

    let ev = raw.evader;
    let evader_pos = position("evader", ev.lon_deg, ev.lat_deg)?;
    let heading = ev.heading_deg.to_radians();
    let speed = ev.speed_mps;
    let policy = match ev.policy.as_deref().unwrap_or("constant_course") {
        "constant_course" => EvaderPolicy::ConstantCourse { heading, speed },
        "waypoints" => {
            let list = ev.waypoints.ok_or_else(|| {
                Error::validation("evader.waypoints", "required for the waypoints policy")
            })?;
            let points = list
                .iter()
                .enumerate()
                .map(|(i, [lon, lat])| position(&format!("evader.waypoints[{i}]"), *lon, *lat))
                .collect::<Result<Vec<_>>>()?;
            EvaderPolicy::Waypoints { points, speed }
        }
        "random_maneuver" => EvaderPolicy::RandomManeuver {
            seed: ev.maneuver_seed.unwrap_or(seed),
            base_heading: heading,
            turn_rate: ev
                .turn_rate_deg_s
                .ok_or_else(|| {
                    Error::validation(
                        "evader.turn_rate_deg_s",
                        "required for the random_maneuver policy",
                    )
                })?
                .to_radians(),
            speed,
        },
        other => {
            let expected = "constant_course, waypoints or random_maneuver";
            let reason = format!("unknown policy {other:?} (expected {expected})");
            return Err(Error::validation("evader.policy", reason));
        }
    };
    let evader = EvaderSetup {
        vessel: VesselSpec {
            id: ev.id.unwrap_or(0),
            pos: evader_pos,
            speed,
            heading,
            max_speed: ev
                .max_speed_mps
                .unwrap_or(DEFAULT_EVADER_MAX_SPEED.max(speed)),
        },
        policy,
    };

    let pursuers = raw
        .pursuers
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let section = format!("pursuers[{i}]");
            let pos = position(&section, p.lon_deg, p.lat_deg)?;
            let heading = match p.heading_deg {
                Some(h) => h.to_radians(),
                None => geo::heading_towards(&pos, &evader_pos).ok_or_else(|| {
                    Error::validation(
                        format!("{section}.heading_deg"),
                        "required when the pursuer sits on the evader",
                    )
                })?,
            };
            Ok(PursuerSetup {
                vessel: VesselSpec {
                    id: p.id,
                    pos,
                    speed: p.speed_mps.unwrap_or(0.0),
                    heading,
                    max_speed: p.max_speed_mps.unwrap_or(DEFAULT_PURSUER_MAX_SPEED),
                },
                mission: mission(&section, p.mission.as_deref(), p.standoff_m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let events = raw
        .events
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let section = format!("events[{i}]");
            let kind = match e.kind.as_str() {
                "malfunction" => EventKind::Malfunction { vessel: e.vessel },
                "set_mission" => EventKind::SetMission {
                    vessel: e.vessel,
                    mission: mission(
                        &section,
                        Some(e.mission.as_deref().ok_or_else(|| {
                            Error::validation(
                                format!("{section}.mission"),
                                "required for set_mission",
                            )
                        })?),
                        e.standoff_m,
                    )?,
                },
                other => {
                    return Err(Error::validation(
                        format!("{section}.kind"),
                        format!("unknown event {other:?} (expected malfunction or set_mission)"),
                    ))
                }
            };
            Ok(ScheduledEvent {
                time: e.time_s,
                kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScenarioConfig {
        seed,
        dt,
        max_duration: sim.max_duration_s.unwrap_or(DEFAULT_MAX_DURATION_S),
        capture_radius: sim.capture_radius_m.unwrap_or(DEFAULT_CAPTURE_RADIUS_M),
        evader,
        pursuers,
        events,
        learner,
        cost,
        delta: lr.delta.unwrap_or(DEFAULT_DELTA),
        scales,
        warm_start: lr.warm_start.unwrap_or(true),
    })
}

fn mission_fields(m: &Mission) -> (Option<String>, Option<f64>) {
    let standoff = match m {
        Mission::Surveil { standoff } => Some(*standoff),
        _ => None,
    };
    (Some(m.name().to_string()), standoff)
}

/// Writes a config back out as a complete scenario document with every
/// field explicit. Only isotropic state weights are representable.
pub fn scenario_to_toml(config: &ScenarioConfig) -> Result<String> {
    let q = config.cost.q;
    let q_scale = q[(0, 0)];
    if q != nalgebra::Matrix3::identity() * q_scale {
        return Err(Error::validation(
            "learning.q_scale",
            "state weight matrix is not a multiple of the identity",
        ));
    }
    let ev = &config.evader;
    let (policy, waypoints, maneuver_seed, turn_rate_deg_s) = match &ev.policy {
        EvaderPolicy::ConstantCourse { .. } => ("constant_course", None, None, None),
        EvaderPolicy::Waypoints { points, .. } => (
            "waypoints",
            Some(points.iter().map(|p| [p.lon_deg(), p.lat_deg()]).collect()),
            None,
            None,
        ),
        EvaderPolicy::RandomManeuver {
            seed, turn_rate, ..
        } => (
            "random_maneuver",
            None,
            Some(*seed),
            Some(turn_rate.to_degrees()),
        ),
    };
    let heading = match &ev.policy {
        EvaderPolicy::ConstantCourse { heading, .. } => *heading,
        EvaderPolicy::RandomManeuver { base_heading, .. } => *base_heading,
        EvaderPolicy::Waypoints { .. } => ev.vessel.heading,
    };
    let raw = RawScenario {
        simulation: RawSimulation {
            seed: Some(config.seed),
            dt_s: Some(config.dt),
            max_duration_s: Some(config.max_duration),
            capture_radius_m: Some(config.capture_radius),
        },
        learning: RawLearning {
            delta: Some(config.delta),
            q_scale: Some(q_scale),
            r: Some(config.cost.r),
            alpha_a: Some(config.learner.alpha_a),
            alpha_c: Some(config.learner.alpha_c),
            conv_threshold: Some(config.learner.conv_threshold),
            window_l: Some(config.learner.window_l),
            max_iters: Some(config.learner.max_iters),
            init_scale: Some(config.learner.init_scale),
            update_rule: Some(config.learner.update_rule),
            error_scale_m: Some(config.scales.error_scale_m),
            control_scale_mps: Some(config.scales.control_scale_mps),
            warm_start: Some(config.warm_start),
        },
        evader: RawEvader {
            id: Some(ev.vessel.id),
            lon_deg: ev.vessel.pos.lon_deg(),
            lat_deg: ev.vessel.pos.lat_deg(),
            speed_mps: ev.policy.speed(),
            heading_deg: heading.to_degrees(),
            max_speed_mps: Some(ev.vessel.max_speed),
            policy: Some(policy.to_string()),
            waypoints,
            maneuver_seed,
            turn_rate_deg_s,
        },
        pursuers: config
            .pursuers
            .iter()
            .map(|p| {
                let (mission, standoff_m) = mission_fields(&p.mission);
                RawPursuer {
                    id: p.vessel.id,
                    lon_deg: p.vessel.pos.lon_deg(),
                    lat_deg: p.vessel.pos.lat_deg(),
                    speed_mps: Some(p.vessel.speed),
                    heading_deg: Some(p.vessel.heading.to_degrees()),
                    max_speed_mps: Some(p.vessel.max_speed),
                    mission,
                    standoff_m,
                }
            })
            .collect(),
        events: config
            .events
            .iter()
            .map(|e| match &e.kind {
                EventKind::Malfunction { vessel } => RawEvent {
                    time_s: e.time,
                    kind: "malfunction".into(),
                    vessel: *vessel,
                    mission: None,
                    standoff_m: None,
                },
                EventKind::SetMission { vessel, mission } => {
                    let (mission, standoff_m) = mission_fields(mission);
                    RawEvent {
                        time_s: e.time,
                        kind: "set_mission".into(),
                        vessel: *vessel,
                        mission,
                        standoff_m,
                    }
                }
            })
            .collect(),
    };
    toml::to_string(&raw).map_err(|e| Error::encode("scenario", e))
}
