//! Kinematic bicycle transition and lane-keeping pure-pursuit steering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::scene::{ControlInput, LaneGeometry, VehicleGeometry, VehicleState};

/// Advances the kinematic bicycle model by one explicit Euler step.
///
/// The slip angle `beta = atan(lr / (lf + lr) * tan(delta))` sets the direction
/// of travel of the centre of mass; speed is floored at zero.
pub fn bicycle_step(state: &VehicleState, input: &ControlInput, geom: &VehicleGeometry, dt: f64) -> VehicleState {
    let beta = (geom.lr / (geom.lf + geom.lr) * input.delta.tan()).atan();
    let (s, c) = (state.psi + beta).sin_cos();
    VehicleState {
        x: state.x + state.v * c * dt,
        y: state.y + state.v * s * dt,
        psi: wrap_angle(state.psi + state.v / geom.lr * beta.sin() * dt),
        v: (state.v + input.accel * dt).max(0.0),
    }
}

/// Integrates one frame of length `dt` in `substeps` equal Euler steps with the input held.
pub fn integrate(
    state: &VehicleState,
    input: &ControlInput,
    geom: &VehicleGeometry,
    dt: f64,
    substeps: usize,
) -> VehicleState {
    let n = substeps.max(1);
    let h = dt / n as f64;
    (0..n).fold(*state, |s, _| bicycle_step(&s, input, geom, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurePursuitConfig {
    /// Lookahead time gain (s).
    pub t_lookahead: f64,
    /// Minimum lookahead distance (m).
    pub ld_min: f64,
    /// Steering clamp (rad).
    pub delta_max: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self {
            t_lookahead: 1.0,
            ld_min: 5.0,
            delta_max: 0.6,
        }
    }
}

impl PurePursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_lookahead > 0.0 && self.ld_min > 0.0 && self.delta_max > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("pursuit gains must be positive: {self:?}")))
        }
    }
}

/// Steering angle that chases the lane centerline point one lookahead
/// distance ahead of the rear axle's projection.
pub fn pure_pursuit_steer(
    state: &VehicleState,
    lane: &LaneGeometry,
    geom: &VehicleGeometry,
    cfg: &PurePursuitConfig,
) -> Result<f64> {
    let lookahead = cfg.ld_min.max(cfg.t_lookahead * state.v);
    let heading = Vec2::from_angle(state.psi);
    let rear = state.position() - heading * geom.lr;
    let s = lane.project(rear).arc_length + lookahead;
    let target = lane
        .centerline
        .point_at(s)
        .ok_or(Error::LaneExhausted { lane: lane.lane_id })?;
    let to_target = target - rear;
    let alpha = wrap_angle(to_target.y.atan2(to_target.x) - state.psi);
    let wheelbase = geom.lf + geom.lr;
    let delta = (2.0 * wheelbase * alpha.sin()).atan2(lookahead);
    Ok(delta.clamp(-cfg.delta_max, cfg.delta_max))
}
