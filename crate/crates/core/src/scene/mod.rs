//! Recorded traffic scenes: domain types, NGSIM ingestion, hygiene filtering,
//! episode extraction and the canonical snapshot file.

mod episode;
mod hygiene;
mod ngsim;
mod snapshot;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, OrientedRect, Polyline, Projection, Vec2};

pub use episode::{episode_window, Episode, ReplayAgent};
pub use hygiene::{hygiene_filter, FilterReport, RemovalReason};
pub use ngsim::{ingest_ngsim, IngestConfig, PositionReference, Units, FEET_TO_METERS};
pub use snapshot::{read_lanes, read_scene, write_lanes, write_scene, SCENE_SCHEMA};

/// Frame period of the NGSIM recordings.
pub const NGSIM_DT: f64 = 0.1;

/// Default speed limit of the US-101 study segment (65 mph).
pub const US101_SPEED_LIMIT: f64 = 29.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub type LaneId = i32;

/// Physical state of one vehicle at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m), positive to the left of travel.
    pub y: f64,
    /// Heading (rad) in (-pi, pi].
    pub psi: f64,
    /// Speed (m/s), never negative.
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
            v: v.max(0.0),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Longitudinal acceleration (m/s^2).
    pub accel: f64,
    /// Steering angle (rad).
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
    /// Centre of mass to front axle (m).
    pub lf: f64,
    /// Centre of mass to rear axle (m).
    pub lr: f64,
}

impl VehicleGeometry {
    /// Geometry for a vehicle whose axle positions are unknown: the centre of
    /// mass sits midway between axles and the wheelbase is half the body length.
    pub fn from_dimensions(length: f64, width: f64) -> Self {
        Self {
            length,
            width,
            lf: 0.25 * length,
            lr: 0.25 * length,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0
            && self.width > 0.0
            && self.lf > 0.0
            && self.lr > 0.0
            && self.lf + self.lr <= self.length
    }

    pub fn footprint(&self, state: &VehicleState) -> OrientedRect {
        OrientedRect {
            center: state.position(),
            heading: state.psi,
            length: self.length,
            width: self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub frame: u32,
    pub state: VehicleState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub vehicle_id: VehicleId,
    pub dt: f64,
    frames: Vec<FrameState>,
}

impl Trajectory {
    /// Frames must be strictly increasing; at least two are required.
    pub fn new(vehicle_id: VehicleId, dt: f64, frames: Vec<FrameState>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientLength {
                vehicle: vehicle_id,
                have: frames.len(),
                need: 2,
            });
        }
        if frames.windows(2).any(|w| w[1].frame <= w[0].frame) {
            return Err(Error::Format(format!(
                "vehicle {vehicle_id}: frame indices are not strictly increasing"
            )));
        }
        Ok(Self {
            vehicle_id,
            dt,
            frames,
        })
    }

    pub fn frames(&self) -> &[FrameState] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_frame(&self) -> u32 {
        self.frames[0].frame
    }

    pub fn last_frame(&self) -> u32 {
        self.frames[self.frames.len() - 1].frame
    }

    pub fn is_contiguous(&self) -> bool {
        self.frames.windows(2).all(|w| w[1].frame == w[0].frame + 1)
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.dt
    }

    pub fn states(&self) -> impl Iterator<Item = &VehicleState> {
        self.frames.iter().map(|f| &f.state)
    }

    pub fn index_of(&self, frame: u32) -> Option<usize> {
        self.frames.binary_search_by_key(&frame, |f| f.frame).ok()
    }

    pub fn state_at(&self, frame: u32) -> Option<&VehicleState> {
        self.index_of(frame).map(|i| &self.frames[i].state)
    }

    /// Sub-trajectory covering `len` frames starting at index `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Trajectory> {
        if start + len > self.frames.len() {
            return Err(Error::InsufficientLength {
                vehicle: self.vehicle_id,
                have: self.frames.len().saturating_sub(start),
                need: len,
            });
        }
        Trajectory::new(
            self.vehicle_id,
            self.dt,
            self.frames[start..start + len].to_vec(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneGeometry {
    pub lane_id: LaneId,
    pub centerline: Polyline,
    pub width: f64,
}

impl LaneGeometry {
    pub fn straight(lane_id: LaneId, y: f64, x_start: f64, x_end: f64, width: f64) -> Self {
        Self {
            lane_id,
            centerline: Polyline::new(vec![Vec2::new(x_start, y), Vec2::new(x_end, y)])
                .expect("x_end must exceed x_start"),
            width,
        }
    }

    pub fn project(&self, p: Vec2) -> Projection {
        self.centerline.project(p)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.project(p).offset.abs() <= self.width / 2.0
    }
}

/// Returns the lane whose centerline is laterally closest to `p`.
pub fn nearest_lane(lanes: &[LaneGeometry], p: Vec2) -> Option<&LaneGeometry> {
    lanes.iter().min_by(|a, b| {
        a.project(p)
            .offset
            .abs()
            .total_cmp(&b.project(p).offset.abs())
    })
}

/// Bumper-to-bumper gap from a follower to a leader measured along `lane`.
pub fn longitudinal_gap(
    lane: &LaneGeometry,
    follower: &VehicleState,
    follower_geom: &VehicleGeometry,
    leader: &VehicleState,
    leader_geom: &VehicleGeometry,
) -> f64 {
    let sf = lane.project(follower.position()).arc_length;
    let sl = lane.project(leader.position()).arc_length;
    (sl - leader_geom.length / 2.0) - (sf + follower_geom.length / 2.0)
}

/// Everything recorded about one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub trajectory: Trajectory,
    pub geometry: VehicleGeometry,
    /// Lane per frame, aligned with `trajectory.frames()`.
    pub lane_ids: Vec<LaneId>,
    /// Recorded lead vehicle per frame; `None` is the no-lead sentinel.
    pub preceding: Vec<Option<VehicleId>>,
}

impl VehicleTrack {
    pub fn new(
        trajectory: Trajectory,
        geometry: VehicleGeometry,
        lane_ids: Vec<LaneId>,
        preceding: Vec<Option<VehicleId>>,
    ) -> Result<Self> {
        let n = trajectory.len();
        if lane_ids.len() != n || preceding.len() != n {
            return Err(Error::Format(format!(
                "vehicle {}: per-frame columns do not match trajectory length",
                trajectory.vehicle_id
            )));
        }
        if !geometry.is_valid() {
            return Err(Error::Format(format!(
                "vehicle {}: invalid geometry {geometry:?}",
                trajectory.vehicle_id
            )));
        }
        Ok(Self {
            trajectory,
            geometry,
            lane_ids,
            preceding,
        })
    }

    pub fn id(&self) -> VehicleId {
        self.trajectory.vehicle_id
    }
}

/// Lead vehicle as seen from a follower at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadObservation {
    pub id: VehicleId,
    pub gap: f64,
    pub speed: f64,
}

/// A recorded multi-vehicle traffic episode with lane geometry. Immutable once built.
#[derive(Debug, Clone)]
pub struct Scene {
    vehicles: BTreeMap<VehicleId, VehicleTrack>,
    lanes: Vec<LaneGeometry>,
    dt: f64,
    speed_limit: f64,
    by_frame: BTreeMap<u32, Vec<(VehicleId, usize)>>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.vehicles == other.vehicles
            && self.lanes == other.lanes
            && self.dt == other.dt
            && self.speed_limit == other.speed_limit
    }
}

impl Scene {
    pub fn new(
        tracks: impl IntoIterator<Item = VehicleTrack>,
        mut lanes: Vec<LaneGeometry>,
        dt: f64,
        speed_limit: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(speed_limit > 0.0) {
            return Err(Error::Config(format!(
                "dt ({dt}) and speed limit ({speed_limit}) must be positive"
            )));
        }
        lanes.sort_by_key(|l| l.lane_id);
        let mut vehicles = BTreeMap::new();
        for track in tracks {
            if (track.trajectory.dt - dt).abs() > 1e-12 {
                return Err(Error::Format(format!(
                    "vehicle {}: dt {} differs from scene dt {dt}",
                    track.id(),
                    track.trajectory.dt
                )));
            }
            if vehicles.insert(track.id(), track).is_some() {
                return Err(Error::Format("duplicate vehicle id".into()));
            }
        }
        let mut by_frame: BTreeMap<u32, Vec<(VehicleId, usize)>> = BTreeMap::new();
        for (id, track) in &vehicles {
            for (i, f) in track.trajectory.frames().iter().enumerate() {
                by_frame.entry(f.frame).or_default().push((*id, i));
            }
        }
        let scene = Self {
            vehicles,
            lanes,
            dt,
            speed_limit,
            by_frame,
        };
        for track in scene.vehicles.values() {
            for (f, lead) in track.trajectory.frames().iter().zip(&track.preceding) {
                if let Some(lead) = lead {
                    if scene.index_at(*lead, f.frame).is_none() {
                        return Err(Error::Format(format!(
                            "vehicle {} references lead {lead} absent at frame {}",
                            track.id(),
                            f.frame
                        )));
                    }
                }
            }
        }
        Ok(scene)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speed_limit(&self) -> f64 {
        self.speed_limit
    }

    pub fn lanes(&self) -> &[LaneGeometry] {
        &self.lanes
    }

    pub fn lane(&self, id: LaneId) -> Option<&LaneGeometry> {
        self.lanes.iter().find(|l| l.lane_id == id)
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Tracks in ascending vehicle id order.
    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleTrack> {
        self.vehicles.values()
    }

    pub fn vehicle_ids(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.vehicles.keys().copied()
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleTrack> {
        self.vehicles.get(&id)
    }

    pub fn frame_range(&self) -> Option<(u32, u32)> {
        Some((
            *self.by_frame.keys().next()?,
            *self.by_frame.keys().next_back()?,
        ))
    }

    /// Vehicles present at `frame` as (id, index into that vehicle's trajectory).
    pub fn occupants(&self, frame: u32) -> &[(VehicleId, usize)] {
        self.by_frame.get(&frame).map_or(&[], |v| v.as_slice())
    }

    fn index_at(&self, id: VehicleId, frame: u32) -> Option<usize> {
        self.vehicles.get(&id)?.trajectory.index_of(frame)
    }

    /// Nearest vehicle ahead in the same recorded lane, from lane occupancy.
    pub fn lead_at(&self, id: VehicleId, frame: u32) -> Option<LeadObservation> {
        let track = self.vehicles.get(&id)?;
        let i = track.trajectory.index_of(frame)?;
        let lane_id = track.lane_ids[i];
        let lane = self.lane(lane_id)?;
        let me = &track.trajectory.frames()[i].state;
        let s_me = lane.project(me.position()).arc_length;
        self.ordered_ahead(lane, frame, s_me, id)
            .into_iter()
            .next()
            .map(|(other, j, _)| {
                let ot = &self.vehicles[&other];
                let os = &ot.trajectory.frames()[j].state;
                LeadObservation {
                    id: other,
                    gap: longitudinal_gap(lane, me, &track.geometry, os, &ot.geometry),
                    speed: os.v,
                }
            })
    }

    /// Same-lane vehicles strictly ahead of arc length `s`, nearest first.
    pub(crate) fn ordered_ahead(
        &self,
        lane: &LaneGeometry,
        frame: u32,
        s: f64,
        exclude: VehicleId,
    ) -> Vec<(VehicleId, usize, f64)> {
        let mut ahead: Vec<_> = self
            .occupants(frame)
            .iter()
            .filter(|(other, _)| *other != exclude)
            .filter_map(|&(other, j)| {
                let t = &self.vehicles[&other];
                if t.lane_ids[j] != lane.lane_id {
                    return None;
                }
                let so = lane
                    .project(t.trajectory.frames()[j].state.position())
                    .arc_length;
                (so > s).then_some((other, j, so))
            })
            .collect();
        ahead.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        ahead
    }

    pub(crate) fn into_parts(self) -> (BTreeMap<VehicleId, VehicleTrack>, Vec<LaneGeometry>) {
        (self.vehicles, self.lanes)
    }
}
