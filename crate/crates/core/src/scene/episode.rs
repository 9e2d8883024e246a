use super::{LaneGeometry, LaneId, Scene, Trajectory, VehicleGeometry, VehicleId, VehicleState};
use crate::error::{Error, Result};

/// A recorded vehicle replayed around the modeled one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayAgent {
    pub id: VehicleId,
    pub state: VehicleState,
    pub geometry: VehicleGeometry,
    pub lane_id: LaneId,
}

/// One modeled vehicle's ground-truth window plus the replayed traffic around it.
#[derive(Debug, Clone)]
pub struct Episode {
    pub vehicle_id: VehicleId,
    pub truth: Trajectory,
    pub geometry: VehicleGeometry,
    /// Lane occupied at the first frame; steering targets it for the whole episode.
    pub start_lane: LaneGeometry,
    pub lanes: Vec<LaneGeometry>,
    /// Other vehicles present at each frame of the window, aligned with `truth`.
    pub traffic: Vec<Vec<ReplayAgent>>,
    pub speed_limit: f64,
}

impl Episode {
    pub fn horizon(&self) -> usize {
        self.truth.len()
    }

    pub fn dt(&self) -> f64 {
        self.truth.dt
    }
}

/// Cuts the first `horizon_frames` frames of a vehicle out of the scene.
pub fn episode_window(scene: &Scene, vehicle_id: VehicleId, horizon_frames: usize) -> Result<Episode> {
    let track = scene
        .vehicle(vehicle_id)
        .ok_or(Error::UnknownVehicle(vehicle_id))?;
    if track.trajectory.len() < horizon_frames || horizon_frames < 2 {
        return Err(Error::InsufficientLength {
            vehicle: vehicle_id,
            have: track.trajectory.len(),
            need: horizon_frames.max(2),
        });
    }
    let truth = track.trajectory.window(0, horizon_frames)?;
    let start_lane = scene
        .lane(track.lane_ids[0])
        .cloned()
        .ok_or_else(|| Error::Format(format!("lane {} has no geometry", track.lane_ids[0])))?;
    let traffic = truth
        .frames()
        .iter()
        .map(|f| {
            scene
                .occupants(f.frame)
                .iter()
                .filter(|(id, _)| *id != vehicle_id)
                .map(|&(id, j)| {
                    let other = scene.vehicle(id).expect("occupant index is consistent");
                    ReplayAgent {
                        id,
                        state: other.trajectory.frames()[j].state,
                        geometry: other.geometry,
                        lane_id: other.lane_ids[j],
                    }
                })
                .collect()
        })
        .collect();
    Ok(Episode {
        vehicle_id,
        truth,
        geometry: track.geometry,
        start_lane,
        lanes: scene.lanes().to_vec(),
        traffic,
        speed_limit: scene.speed_limit(),
    })
}
