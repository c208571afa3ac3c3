//! Fixed-step world simulation.
//!
//! Each tick: apply due events, move the evader, let every active pursuer
//! decide from the evader's previously published state, move the pursuers,
//! then test captures. A run ends when every pursuer on an intercept mission
//! has captured, or when the time limit is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, GeodeticPosition};
use crate::kinematics::{step_vessel, EvaderDriver, EvaderPolicy, VesselId, VesselState};
use crate::pursuit::{
    check_capture, measure_error, mission_target, ControlRecord, Mission, Normalization,
    PursuerController,
};
use crate::rl::{CostParams, LearnerConfig};

pub const DEFAULT_DT_S: f64 = 10.0;
pub const DEFAULT_MAX_DURATION_S: f64 = 6.0 * 3600.0;
pub const DEFAULT_DELTA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSpec {
    pub id: VesselId,
    pub pos: GeodeticPosition,
    pub speed: f64,
    pub heading: f64,
    pub max_speed: f64,
}

impl VesselSpec {
    pub fn state(&self) -> VesselState {
        VesselState::new(self.id, self.pos, self.speed, self.heading, self.max_speed)
    }

    fn validate(&self, section: &str) -> Result<()> {
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(Error::validation(
                format!("{section}.max_speed_mps"),
                "must be > 0",
            ));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0 && self.speed <= self.max_speed) {
            return Err(Error::validation(
                format!("{section}.speed_mps"),
                "must lie in [0, max_speed_mps]",
            ));
        }
        if !self.heading.is_finite() {
            return Err(Error::validation(
                format!("{section}.heading_deg"),
                "must be finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaderSetup {
    pub vessel: VesselSpec,
    pub policy: EvaderPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuerSetup {
    pub vessel: VesselSpec,
    pub mission: Mission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Malfunction { vessel: VesselId },
    SetMission { vessel: VesselId, mission: Mission },
}

impl EventKind {
    pub fn vessel(&self) -> VesselId {
        match self {
            EventKind::Malfunction { vessel } | EventKind::SetMission { vessel, .. } => *vessel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub dt: f64,
    pub max_duration: f64,
    pub capture_radius: f64,
    pub evader: EvaderSetup,
    pub pursuers: Vec<PursuerSetup>,
    pub events: Vec<ScheduledEvent>,
    pub learner: LearnerConfig,
    pub cost: CostParams,
    pub delta: f64,
    pub scales: Normalization,
    /// Start the learners from the nominal model's value weights rather than
    /// random ones.
    pub warm_start: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("simulation.dt_s", "must be > 0"));
        }
        if !(self.max_duration.is_finite() && self.max_duration >= self.dt) {
            return Err(Error::validation(
                "simulation.max_duration_s",
                "must be >= dt_s",
            ));
        }
        if !(self.capture_radius.is_finite() && self.capture_radius > 0.0) {
            return Err(Error::validation(
                "simulation.capture_radius_m",
                "must be > 0",
            ));
        }
        if !(self.delta.is_finite() && self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::validation("learning.delta", "must lie in (0, 1]"));
        }
        self.learner.validate()?;
        self.cost.validate()?;
        self.scales.validate()?;
        self.evader.vessel.validate("evader")?;
        self.evader.policy.validate()?;
        if self.pursuers.is_empty() {
            return Err(Error::validation(
                "pursuers",
                "at least one pursuer is required",
            ));
        }
        let mut ids = vec![self.evader.vessel.id];
        for (i, p) in self.pursuers.iter().enumerate() {
            let section = format!("pursuers[{i}]");
            p.vessel.validate(&section)?;
            p.mission
                .validate()
                .map_err(|_| Error::validation(format!("{section}.standoff_m"), "must be > 0"))?;
            if ids.contains(&p.vessel.id) {
                return Err(Error::validation(
                    format!("{section}.id"),
                    format!("duplicate vessel id {}", p.vessel.id),
                ));
            }
            ids.push(p.vessel.id);
        }
        for (i, e) in self.events.iter().enumerate() {
            let section = format!("events[{i}]");
            if !(e.time.is_finite() && e.time >= 0.0 && e.time <= self.max_duration) {
                return Err(Error::validation(
                    format!("{section}.time_s"),
                    "must lie in [0, max_duration_s]",
                ));
            }
            if !ids.contains(&e.kind.vessel()) {
                return Err(Error::validation(
                    format!("{section}.vessel"),
                    format!("unknown vessel id {}", e.kind.vessel()),
                ));
            }
            if let EventKind::SetMission { vessel, mission } = &e.kind {
                if *vessel == self.evader.vessel.id {
                    return Err(Error::validation(
                        format!("{section}.vessel"),
                        "the evader has no mission",
                    ));
                }
                mission.validate().map_err(|_| {
                    Error::validation(format!("{section}.standoff_m"), "must be > 0")
                })?;
            }
        }
        Ok(())
    }

    /// Learner settings as seen by the pursuers: the scenario seed drives the
    /// weight initialization.
    pub fn effective_learner(&self) -> LearnerConfig {
        LearnerConfig {
            rng_seed: self.seed,
            ..self.learner
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Evader,
    Pursuer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselSnapshot {
    pub id: VesselId,
    pub role: Role,
    pub lon: f64,
    pub lat: f64,
    pub speed: f64,
    pub heading: f64,
    pub mission: Option<Mission>,
    pub record: ControlRecord,
    pub captured: bool,
    pub critic_converged: bool,
    pub actor_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub tick: u64,
    pub time: f64,
    pub vessels: Vec<VesselSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub time: f64,
    pub tick: u64,
    pub vessel: VesselId,
    pub event: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllCaptured,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ScenarioConfig,
    pub snapshots: Vec<TickSnapshot>,
    pub timeline: Vec<TimelineEntry>,
    pub unapplied: Vec<ScheduledEvent>,
    pub termination: Termination,
}

struct PursuerSlot {
    state: VesselState,
    controller: PursuerController,
    disabled: bool,
    last: ControlRecord,
}

struct World {
    tick: u64,
    evader: VesselState,
    driver: EvaderDriver,
    evader_disabled: bool,
    pursuers: Vec<PursuerSlot>,
}

impl World {
    fn new(config: &ScenarioConfig) -> Result<Self> {
        let learner = config.effective_learner();
        let pursuers = config
            .pursuers
            .iter()
            .map(|p| {
                let mut controller = PursuerController::new(
                    p.vessel.id,
                    p.mission,
                    learner,
                    config.cost,
                    config.scales,
                )?;
                if config.warm_start {
                    controller =
                        controller.warm_start(config.scales.input_gain(config.delta, config.dt))?;
                }
                Ok(PursuerSlot {
                    state: p.vessel.state(),
                    controller,
                    disabled: false,
                    last: ControlRecord::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tick: 0,
            evader: config.evader.vessel.state(),
            driver: EvaderDriver::new(config.evader.policy.clone()),
            evader_disabled: false,
            pursuers,
        })
    }

    fn apply_event(&mut self, event: &EventKind) -> Result<()> {
        let id = event.vessel();
        if id == self.evader.id {
            return match event {
                EventKind::Malfunction { .. } => {
                    self.evader = self.evader.halted();
                    self.evader_disabled = true;
                    Ok(())
                }
                EventKind::SetMission { .. } => Err(Error::validation(
                    "events.vessel",
                    "the evader has no mission",
                )),
            };
        }
        let slot = self
            .pursuers
            .iter_mut()
            .find(|s| s.state.id == id)
            .ok_or_else(|| Error::validation("events.vessel", format!("unknown vessel id {id}")))?;
        match event {
            EventKind::Malfunction { .. } => {
                slot.state = slot.state.halted();
                slot.controller.disable();
                slot.disabled = true;
                slot.last = ControlRecord::default();
            }
            EventKind::SetMission { mission, .. } => slot.controller.set_mission(*mission)?,
        }
        Ok(())
    }

    /// Measured error for logging when no controller step ran this tick.
    fn passive_record(&self, slot: &PursuerSlot) -> Result<ControlRecord> {
        let mission = slot.controller.mission();
        let (point, heading) = mission_target(&mission, &self.evader, &slot.state)?;
        Ok(ControlRecord {
            error: measure_error(&slot.state, &point, heading),
            ..ControlRecord::default()
        })
    }

    fn advance(&mut self, config: &ScenarioConfig) -> Result<()> {
        let published = self.evader;
        if !self.evader_disabled {
            self.evader = self.driver.step(&self.evader, config.dt)?;
        }
        for slot in &mut self.pursuers {
            if slot.disabled {
                continue;
            }
            let prev = slot.controller.prev_polar();
            let record = slot.controller.step(&published, &slot.state)?;
            slot.state = step_vessel(&slot.state, record.polar, prev, config.delta, config.dt)?;
            slot.controller
                .observe_motion(slot.state.speed, config.delta);
            slot.last = record;
        }
        self.tick += 1;
        Ok(())
    }

    fn detect_captures(&mut self, radius: f64) {
        for slot in &mut self.pursuers {
            if slot.disabled
                || slot.controller.is_captured()
                || slot.controller.mission() != Mission::Intercept
            {
                continue;
            }
            if check_capture(&slot.state, &self.evader, radius) {
                slot.controller.mark_captured();
            }
        }
    }

    fn all_intercepts_captured(&self) -> bool {
        let mut any = false;
        for slot in &self.pursuers {
            if slot.controller.mission() == Mission::Intercept {
                any = true;
                if !slot.controller.is_captured() {
                    return false;
                }
            }
        }
        any
    }

    fn snapshot(&self, time: f64) -> TickSnapshot {
        let mut vessels = Vec::with_capacity(self.pursuers.len() + 1);
        vessels.push(VesselSnapshot {
            id: self.evader.id,
            role: Role::Evader,
            lon: self.evader.pos.lon,
            lat: self.evader.pos.lat,
            speed: self.evader.speed,
            heading: self.evader.heading,
            mission: None,
            record: ControlRecord::default(),
            captured: false,
            critic_converged: false,
            actor_converged: false,
        });
        for slot in &self.pursuers {
            let (sx, sy) = slot.controller.learner_status();
            vessels.push(VesselSnapshot {
                id: slot.state.id,
                role: Role::Pursuer,
                lon: slot.state.pos.lon,
                lat: slot.state.pos.lat,
                speed: slot.state.speed,
                heading: slot.state.heading,
                mission: Some(slot.controller.mission()),
                record: slot.last,
                captured: slot.controller.is_captured(),
                critic_converged: sx.critic_converged && sy.critic_converged,
                actor_converged: sx.actor_converged && sy.actor_converged,
            });
        }
        TickSnapshot {
            tick: self.tick,
            time,
            vessels,
        }
    }
}

/// Runs a scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<RunRecord> {
    config.validate()?;
    let mut world = World::new(config)?;

    let mut pending: Vec<ScheduledEvent> = config.events.clone();
    // stable: equal times keep list order
    pending.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut pending = pending.into_iter().peekable();

    let mut timeline = Vec::new();
    let mut snapshots = Vec::new();
    let last_tick = (config.max_duration / config.dt + 1e-9).floor() as u64;
    let mut termination = Termination::TimeLimit;

    loop {
        let tick = world.tick;
        let time = tick as f64 * config.dt;
        while let Some(event) = pending.next_if(|e| e.time <= time + 1e-9 * config.dt) {
            world
                .apply_event(&event.kind)
                .map_err(|e| sim_error(tick, e))?;
            timeline.push(TimelineEntry {
                time,
                tick,
                vessel: event.kind.vessel(),
                event: event.kind,
            });
        }
        if tick == 0 {
            for i in 0..world.pursuers.len() {
                let record = world
                    .passive_record(&world.pursuers[i])
                    .map_err(|e| sim_error(tick, e))?;
                world.pursuers[i].last = record;
            }
        }
        world.detect_captures(config.capture_radius);
        snapshots.push(world.snapshot(time));
        if world.all_intercepts_captured() {
            termination = Termination::AllCaptured;
            break;
        }
        if tick >= last_tick {
            break;
        }
        world.advance(config).map_err(|e| sim_error(tick + 1, e))?;
    }

    Ok(RunRecord {
        config: config.clone(),
        snapshots,
        timeline,
        unapplied: pending.collect(),
        termination,
    })
}

fn sim_error(tick: u64, e: Error) -> Error {
    if e.is_validation() {
        e
    } else {
        Error::Simulation {
            tick,
            source: Box::new(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuerMetrics {
    pub id: VesselId,
    pub initial_distance_m: f64,
    pub capture_tick: Option<u64>,
    pub capture_time_s: Option<f64>,
    pub min_distance_m: f64,
    pub final_mission: Option<Mission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub ticks: usize,
    pub duration_s: f64,
    pub termination: Termination,
    pub pursuers: Vec<PursuerMetrics>,
    pub capture_order: Vec<VesselId>,
    pub timeline: Vec<TimelineEntry>,
    pub unapplied_events: Vec<ScheduledEvent>,
}

impl RunSummary {
    pub fn pursuer(&self, id: VesselId) -> Option<&PursuerMetrics> {
        self.pursuers.iter().find(|p| p.id == id)
    }
}

/// Capture times, closest approaches and capture order, all read back from
/// the snapshots.
pub fn metrics(record: &RunRecord) -> RunSummary {
    let mut pursuers: Vec<PursuerMetrics> = record
        .config
        .pursuers
        .iter()
        .map(|p| PursuerMetrics {
            id: p.vessel.id,
            initial_distance_m: geo::great_circle_distance(
                &p.vessel.pos,
                &record.config.evader.vessel.pos,
            ),
            capture_tick: None,
            capture_time_s: None,
            min_distance_m: f64::INFINITY,
            final_mission: None,
        })
        .collect();

    for snap in &record.snapshots {
        let Some(evader) = snap.vessels.iter().find(|v| v.role == Role::Evader) else {
            continue;
        };
        let evader_pos = GeodeticPosition {
            lon: evader.lon,
            lat: evader.lat,
            radius: geo::EARTH_RADIUS_M,
        };
        for v in snap.vessels.iter().filter(|v| v.role == Role::Pursuer) {
            let Some(m) = pursuers.iter_mut().find(|m| m.id == v.id) else {
                continue;
            };
            let pos = GeodeticPosition {
                lon: v.lon,
                lat: v.lat,
                radius: geo::EARTH_RADIUS_M,
            };
            m.min_distance_m = m
                .min_distance_m
                .min(geo::great_circle_distance(&pos, &evader_pos));
            if v.captured && m.capture_tick.is_none() {
                m.capture_tick = Some(snap.tick);
                m.capture_time_s = Some(snap.time);
            }
            m.final_mission = v.mission;
        }
    }
    for m in &mut pursuers {
        if !m.min_distance_m.is_finite() {
            m.min_distance_m = m.initial_distance_m;
        }
    }

    let mut order: Vec<(u64, usize, VesselId)> = pursuers
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.capture_tick.map(|t| (t, i, m.id)))
        .collect();
    order.sort();

    let duration_s = record.snapshots.last().map_or(0.0, |s| s.time);
    RunSummary {
        seed: record.config.seed,
        ticks: record.snapshots.len(),
        duration_s,
        termination: record.termination,
        pursuers,
        capture_order: order.into_iter().map(|(_, _, id)| id).collect(),
        timeline: record.timeline.clone(),
        unapplied_events: record.unapplied.clone(),
    }
}
