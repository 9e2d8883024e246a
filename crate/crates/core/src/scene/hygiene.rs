use std::collections::BTreeMap;
use std::fmt;

use super::{Scene, VehicleId, VehicleTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RemovalReason {
    /// Frame indices are not contiguous.
    FrameGap,
    /// Recorded lead contradicts lane occupancy on at least one frame.
    WrongLead,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::FrameGap => "frame_gap",
            RemovalReason::WrongLead => "wrong_lead",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    pub ingested: usize,
    pub retained: usize,
    pub removed: BTreeMap<VehicleId, RemovalReason>,
}

impl FilterReport {
    pub fn count(&self, reason: RemovalReason) -> usize {
        self.removed.values().filter(|r| **r == reason).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vehicle_id,reason\n");
        for (id, reason) in &self.removed {
            out.push_str(&format!("{id},{reason}\n"));
        }
        out
    }
}

/// A frame is consistent when the recorded lead is the nearest same-lane
/// vehicle ahead or the one just past it (a single ordering swap), or when no
/// lead is recorded and the lane ahead is empty.
fn has_wrong_lead(scene: &Scene, track: &VehicleTrack) -> bool {
    for (i, f) in track.trajectory.frames().iter().enumerate() {
        let Some(lane) = scene.lane(track.lane_ids[i]) else {
            return true;
        };
        let s = lane.project(f.state.position()).arc_length;
        let ahead = scene.ordered_ahead(lane, f.frame, s, track.id());
        let ok = match track.preceding[i] {
            None => ahead.is_empty(),
            Some(lead) => ahead.iter().take(2).any(|(id, _, _)| *id == lead),
        };
        if !ok {
            return true;
        }
    }
    false
}

/// Removes vehicles with frame irregularities or inconsistent recorded leads.
///
/// Lead pointers of retained vehicles that referenced a removed vehicle are
/// reset to the no-lead sentinel so the result stays self-consistent.
pub fn hygiene_filter(scene: Scene) -> (Scene, FilterReport) {
    let mut removed = BTreeMap::new();
    for track in scene.vehicles() {
        if !track.trajectory.is_contiguous() {
            removed.insert(track.id(), RemovalReason::FrameGap);
        } else if has_wrong_lead(&scene, track) {
            removed.insert(track.id(), RemovalReason::WrongLead);
        }
    }
    let ingested = scene.len();
    if removed.is_empty() {
        return (
            scene,
            FilterReport {
                ingested,
                retained: ingested,
                removed,
            },
        );
    }

    let dt = scene.dt();
    let speed_limit = scene.speed_limit();
    let (vehicles, lanes) = scene.into_parts();
    let tracks: Vec<VehicleTrack> = vehicles
        .into_values()
        .filter(|t| !removed.contains_key(&t.id()))
        .map(|mut t| {
            for lead in t.preceding.iter_mut() {
                if lead.is_some_and(|id| removed.contains_key(&id)) {
                    *lead = None;
                }
            }
            t
        })
        .collect();
    let filtered = Scene::new(tracks, lanes, dt, speed_limit)
        .expect("removing vehicles preserves scene invariants");
    let report = FilterReport {
        ingested,
        retained: filtered.len(),
        removed,
    };
    log::info!(
        "hygiene: kept {} of {} ({} frame gaps, {} wrong leads)",
        report.retained,
        report.ingested,
        report.count(RemovalReason::FrameGap),
        report.count(RemovalReason::WrongLead)
    );
    (filtered, report)
}
