//! Closed-loop simulation of one modeled vehicle inside replayed traffic.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, pure_pursuit_steer, PurePursuitConfig};
use crate::error::{Error, Result};
use crate::idm::{idm_accel, IdmGlobals, IdmParams, IdmState};
use crate::scene::{
    nearest_lane, ControlInput, Episode, FrameState, LaneGeometry, ReplayAgent, Trajectory,
    VehicleGeometry, VehicleId, VehicleState,
};

/// Smallest gap handed to the IDM when a replayed vehicle's rear bumper is
/// already level with the model's front bumper.
pub const MIN_GAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Idm { params: IdmParams, globals: IdmGlobals },
    /// Zero acceleration and zero steering.
    ConstantVelocity,
    /// Pre-computed inputs applied verbatim, one per step.
    Scripted(Vec<ControlInput>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub pursuit: PurePursuitConfig,
    /// Euler substeps per frame.
    pub substeps: usize,
}

impl RolloutConfig {
    pub fn substeps(&self) -> usize {
        self.substeps.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub other: VehicleId,
    /// The model ran into a vehicle ahead of it.
    pub at_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The start lane's centerline ran out before the lookahead point.
    LaneExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Modeled trajectory; shorter than the horizon after a collision or early termination.
    pub model_trajectory: Trajectory,
    pub collision: Option<Collision>,
    pub collision_frame: Option<u32>,
    pub terminated_early: Option<Termination>,
}

impl RolloutResult {
    pub fn collided(&self) -> bool {
        self.collision.is_some()
    }

    pub fn at_fault(&self) -> bool {
        self.collision.is_some_and(|c| c.at_fault)
    }
}

/// Nearest replayed vehicle ahead of `state` in `lane`, by arc length.
pub fn resolve_lead<'a>(
    state: &VehicleState,
    geom: &VehicleGeometry,
    lane: &LaneGeometry,
    traffic: &'a [ReplayAgent],
) -> Option<(&'a ReplayAgent, f64)> {
    let s_me = lane.project(state.position()).arc_length;
    traffic
        .iter()
        .filter(|a| a.lane_id == lane.lane_id)
        .filter_map(|a| {
            let s = lane.project(a.state.position()).arc_length;
            (s > s_me).then_some((a, s))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.id.cmp(&y.0.id)))
        .map(|(a, s)| {
            let gap = (s - a.geometry.length / 2.0) - (s_me + geom.length / 2.0);
            (a, gap)
        })
}

/// Separating-axis overlap test of the model footprint against every replayed
/// footprint. The first overlap (in replay order) is reported; the model is at
/// fault when the other vehicle's centre is ahead of its own along `lane`.
pub fn detect_collision(
    state: &VehicleState,
    geom: &VehicleGeometry,
    others: &[ReplayAgent],
    lane: &LaneGeometry,
) -> Option<Collision> {
    let me = geom.footprint(state);
    let s_me = lane.project(state.position()).arc_length;
    others
        .iter()
        .find(|a| me.overlaps(&a.geometry.footprint(&a.state)))
        .map(|a| Collision {
            other: a.id,
            at_fault: lane.project(a.state.position()).arc_length > s_me,
        })
}

fn control(
    controller: &Controller,
    step: usize,
    state: &VehicleState,
    episode: &Episode,
    cfg: &RolloutConfig,
) -> Result<ControlInput> {
    match controller {
        Controller::ConstantVelocity => Ok(ControlInput::default()),
        Controller::Scripted(inputs) => Ok(inputs.get(step).copied().unwrap_or_default()),
        Controller::Idm { params, globals } => {
            let lane = nearest_lane(&episode.lanes, state.position()).unwrap_or(&episode.start_lane);
            let lead = resolve_lead(state, &episode.geometry, lane, &episode.traffic[step]);
            let idm_state = match lead {
                Some((agent, gap)) => IdmState {
                    v: state.v,
                    dv: state.v - agent.state.v,
                    gap: Some(gap.max(MIN_GAP)),
                },
                None => IdmState::free(state.v),
            };
            let accel = idm_accel(params, globals, &idm_state, episode.dt())?;
            let delta = pure_pursuit_steer(state, &episode.start_lane, &episode.geometry, &cfg.pursuit)?;
            Ok(ControlInput { accel, delta })
        }
    }
}

/// Runs `controller` from the episode's first ground-truth state over its horizon.
pub fn rollout(episode: &Episode, controller: &Controller, cfg: &RolloutConfig) -> Result<RolloutResult> {
    let truth = episode.truth.frames();
    let dt = episode.dt();
    let mut frames = Vec::with_capacity(truth.len());
    frames.push(truth[0]);
    let mut state = truth[0].state;
    let mut collision = None;
    let mut collision_frame = None;
    let mut terminated_early = None;

    for step in 0..truth.len() - 1 {
        let input = match control(controller, step, &state, episode, cfg) {
            Ok(u) => u,
            Err(Error::LaneExhausted { .. }) => {
                terminated_early = Some(Termination::LaneExhausted);
                break;
            }
            Err(e) => return Err(e),
        };
        state = integrate(&state, &input, &episode.geometry, dt, cfg.substeps());
        let frame = truth[step + 1].frame;
        frames.push(FrameState { frame, state });
        let lane = nearest_lane(&episode.lanes, state.position()).unwrap_or(&episode.start_lane);
        if let Some(c) = detect_collision(&state, &episode.geometry, &episode.traffic[step + 1], lane) {
            collision = Some(c);
            collision_frame = Some(frame);
            break;
        }
    }

    if frames.len() < 2 {
        // terminated before the first step: hold the initial pose for one frame
        frames.push(FrameState {
            frame: truth[1].frame,
            state: VehicleState { v: 0.0, ..state },
        });
    }
    Ok(RolloutResult {
        model_trajectory: Trajectory::new(episode.vehicle_id, dt, frames)?,
        collision,
        collision_frame,
        terminated_early,
    })
}
