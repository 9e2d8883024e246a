//! Seeded multi-lane car-following traffic with known per-driver parameters.
//!
//! Each lane has a scripted leader with an oscillating speed profile and a
//! platoon of IDM followers. A driver's parameters and lateral offset are drawn
//! from a shared latent style, so driving codes carry information about the
//! parameters.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idm::{idm_accel, IdmGlobals, IdmParams, IdmState};
use crate::scene::{
    FrameState, LaneGeometry, LaneId, Scene, Trajectory, VehicleGeometry, VehicleId, VehicleState,
    VehicleTrack, FEET_TO_METERS, NGSIM_DT, US101_SPEED_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub lanes: usize,
    /// Followers per lane, not counting the scripted leader.
    pub followers: usize,
    pub frames: usize,
    pub lane_width: f64,
    pub speed_limit: f64,
    /// First vehicle id; ids increase lane by lane, front to back.
    pub first_id: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lanes: 3,
            followers: 8,
            frames: 150,
            lane_width: 12.0 * FEET_TO_METERS,
            speed_limit: US101_SPEED_LIMIT,
            first_id: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTraffic {
    pub scene: Scene,
    /// Parameters of every IDM-driven vehicle (leaders are scripted and absent).
    pub drivers: BTreeMap<VehicleId, IdmParams>,
}

/// Centre of lane `id` (lane 1 leftmost, at the top).
pub fn lane_center(id: LaneId, width: f64) -> f64 {
    -(id as f64 - 0.5) * width
}

fn draw_driver(rng: &mut ChaCha8Rng) -> (IdmParams, f64) {
    let style: f64 = rng.gen();
    let mut jitter = |scale: f64| rng.gen_range(-scale..=scale);
    let params = IdmParams {
        a: 0.6 + 2.0 * style + jitter(0.2),
        b: 1.0 + 1.5 * style + jitter(0.3),
        t_headway: 2.2 - 1.3 * style + jitter(0.1),
        d0: 3.5 - 2.0 * style + jitter(0.3),
        d1: 1.0 + 3.0 * (1.0 - style) + jitter(0.5),
    };
    let offset = 0.5 * (style - 0.5) + jitter(0.05);
    (params, offset)
}

fn equilibrium_gap(p: &IdmParams, g: &IdmGlobals, v: f64) -> f64 {
    let free = 1.0 - (v / g.v0).powf(g.phi);
    (p.d0 + p.d1 * (v / g.v0).sqrt() + p.t_headway * v) / free.max(0.05).sqrt()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticTraffic> {
    if cfg.lanes == 0 || cfg.frames < 2 {
        return Err(Error::Config("synthetic traffic needs at least one lane and two frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dt = NGSIM_DT;
    let globals = IdmGlobals {
        v0: cfg.speed_limit,
        phi: 4.0,
    };
    let mut tracks = Vec::new();
    let mut drivers = BTreeMap::new();
    let mut next_id = cfg.first_id;
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);

    for lane_idx in 0..cfg.lanes {
        let lane_id = lane_idx as LaneId + 1;
        let y_center = lane_center(lane_id, cfg.lane_width);
        let base = rng.gen_range(9.0..15.0);
        let amp = rng.gen_range(1.5..4.0);
        let period = rng.gen_range(6.0..12.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let leader_speed = |t: f64| (base + amp * (std::f64::consts::TAU * t / period + phase).sin()).max(0.0);

        let mut ids = Vec::with_capacity(cfg.followers + 1);
        let mut params = Vec::with_capacity(cfg.followers + 1);
        let mut offsets = Vec::with_capacity(cfg.followers + 1);
        let mut geoms: Vec<VehicleGeometry> = Vec::with_capacity(cfg.followers + 1);
        let mut xs: Vec<f64> = Vec::with_capacity(cfg.followers + 1);
        let mut vs = Vec::with_capacity(cfg.followers + 1);

        let x_lead = rng.gen_range(150.0..250.0);
        for j in 0..=cfg.followers {
            let geom = VehicleGeometry::from_dimensions(rng.gen_range(4.0..5.5), rng.gen_range(1.7..2.1));
            let (p, offset) = draw_driver(&mut rng);
            let v = leader_speed(0.0);
            let x = if j == 0 {
                x_lead
            } else {
                let ahead = xs[j - 1] - geoms[j - 1].length / 2.0;
                ahead - geom.length / 2.0 - equilibrium_gap(&p, &globals, v) * rng.gen_range(0.9..1.3)
            };
            ids.push(VehicleId(next_id));
            next_id += 1;
            params.push(p);
            offsets.push(if j == 0 { 0.0 } else { offset });
            geoms.push(geom);
            xs.push(x);
            vs.push(v);
        }

        let mut history: Vec<Vec<FrameState>> = vec![Vec::with_capacity(cfg.frames); ids.len()];
        for step in 0..cfg.frames {
            for j in 0..ids.len() {
                history[j].push(FrameState {
                    frame: step as u32,
                    state: VehicleState::new(xs[j], y_center + offsets[j], 0.0, vs[j]),
                });
            }
            let accel: Vec<f64> = (0..ids.len())
                .map(|j| {
                    if j == 0 {
                        return Ok((leader_speed((step + 1) as f64 * dt) - vs[0]) / dt);
                    }
                    let gap = (xs[j - 1] - geoms[j - 1].length / 2.0) - (xs[j] + geoms[j].length / 2.0);
                    let state = IdmState {
                        v: vs[j],
                        dv: vs[j] - vs[j - 1],
                        gap: Some(gap.max(0.01)),
                    };
                    idm_accel(&params[j], &globals, &state, dt)
                })
                .collect::<Result<_>>()?;
            for j in 0..ids.len() {
                // same update order as the bicycle model on a straight road
                xs[j] += vs[j] * dt;
                vs[j] = (vs[j] + accel[j] * dt).max(0.0);
            }
        }

        for (j, frames) in history.into_iter().enumerate() {
            for f in &frames {
                x_min = x_min.min(f.state.x);
                x_max = x_max.max(f.state.x);
            }
            let preceding = if j == 0 { None } else { Some(ids[j - 1]) };
            let n = frames.len();
            tracks.push(VehicleTrack::new(
                Trajectory::new(ids[j], dt, frames)?,
                geoms[j],
                vec![lane_id; n],
                vec![preceding; n],
            )?);
            if j > 0 {
                drivers.insert(ids[j], params[j]);
            }
        }
    }

    let lanes = (1..=cfg.lanes as LaneId)
        .map(|id| LaneGeometry::straight(id, lane_center(id, cfg.lane_width), x_min - 100.0, x_max + 100.0, cfg.lane_width))
        .collect();
    Ok(SyntheticTraffic {
        scene: Scene::new(tracks, lanes, dt, cfg.speed_limit)?,
        drivers,
    })
}

/// Writes a scene as an NGSIM-style table: feet, front-bumper reference,
/// `Local_X` growing to the right and `Local_Y` along the road.
pub fn write_ngsim_csv(scene: &Scene, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<ngsim>", e);
    writeln!(
        out,
        "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,v_Length,v_Width,Lane_ID,Preceding,Space_Headway"
    )
    .map_err(io)?;
    let f = FEET_TO_METERS;
    let mut rows = Vec::new();
    for track in scene.vehicles() {
        for (i, fs) in track.trajectory.frames().iter().enumerate() {
            rows.push((fs.frame, track.id(), i, fs.state));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    for (frame, id, i, s) in rows {
        let track = scene.vehicle(id).expect("listed vehicle");
        let g = track.geometry;
        let front = s.x + g.length / 2.0 * s.psi.cos();
        let preceding = track.preceding[i];
        let headway = preceding
            .and_then(|p| scene.vehicle(p))
            .and_then(|p| p.trajectory.state_at(frame))
            .map(|p| (p.x + g.length / 2.0 - front).max(0.0))
            .unwrap_or(0.0);
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{:.4}",
            id,
            frame,
            -s.y / f,
            front / f,
            s.v / f,
            g.length / f,
            g.width / f,
            track.lane_ids[i],
            preceding.map_or(0, |p| p.0),
            headway / f
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{hygiene_filter, ingest_ngsim, IngestConfig};

    #[test]
    fn seeded_generation_is_reproducible() {
        let cfg = SyntheticConfig { followers: 4, frames: 60, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.scene, b.scene);
        let c = generate(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.scene, c.scene);
        assert_eq!(a.scene.len(), 15);
        assert_eq!(a.drivers.len(), 12);
    }

    #[test]
    fn platoons_keep_positive_gaps_and_pass_hygiene() {
        let t = generate(&SyntheticConfig { followers: 6, frames: 200, ..Default::default() }).unwrap();
        for id in t.drivers.keys() {
            let track = t.scene.vehicle(*id).unwrap();
            for f in track.trajectory.frames() {
                assert!(t.scene.lead_at(*id, f.frame).unwrap().gap > 0.0);
            }
        }
        let (_, report) = hygiene_filter(t.scene.clone());
        assert_eq!(report.retained, report.ingested);
    }

    #[test]
    fn ngsim_export_ingests_back() {
        let t = generate(&SyntheticConfig { followers: 3, frames: 40, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_ngsim_csv(&t.scene, &mut buf).unwrap();
        let scene = ingest_ngsim(buf.as_slice(), &IngestConfig { lanes: vec![1, 2, 3], ..Default::default() }).unwrap();
        assert_eq!(scene.len(), t.scene.len());
        for track in t.scene.vehicles() {
            let back = scene.vehicle(track.id()).unwrap();
            assert_eq!(back.lane_ids, track.lane_ids);
            assert_eq!(back.preceding, track.preceding);
            for (a, b) in back.trajectory.states().zip(track.trajectory.states()) {
                assert!((a.x - b.x).abs() < 1e-3 && (a.y - b.y).abs() < 1e-3 && (a.v - b.v).abs() < 1e-3);
            }
        }
    }
}
