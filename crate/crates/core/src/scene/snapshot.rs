//! Canonical scene snapshot: self-describing columnar text in SI units.
//!
//! ```text
//! # drivecode-scene v1
//! # dt=0.1
//! # speed_limit=29.06
//! # lane=1;3.6576;-100 -1.8;740 -1.8
//! vehicle_id,frame,x,y,psi,v,length,width,lf,lr,lane_id,preceding
//! 12,4021,103.2,-1.77,0.0012,11.4,4.4,1.8,1.1,1.1,1,9
//! ```
//!
//! Floats are written in shortest round-trip form so a read after a write is
//! bit-identical. Unknown `#` lines are ignored.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{
    FrameState, LaneGeometry, LaneId, Scene, Trajectory, VehicleGeometry, VehicleId, VehicleState,
    VehicleTrack,
};
use crate::error::{Error, Result};
use crate::geometry::{Polyline, Vec2};

pub const SCENE_SCHEMA: &str = "drivecode-scene v1";

const COLUMNS: &str = "vehicle_id,frame,x,y,psi,v,length,width,lf,lr,lane_id,preceding";

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stream>", e)
}

/// Writes `scene`; `extra_header` lines are emitted as `# ` comments after the schema line.
pub fn write_scene(mut out: impl Write, scene: &Scene, extra_header: &[String]) -> Result<()> {
    writeln!(out, "# {SCENE_SCHEMA}").map_err(io_err)?;
    for line in extra_header {
        writeln!(out, "# {line}").map_err(io_err)?;
    }
    writeln!(out, "# dt={}", scene.dt()).map_err(io_err)?;
    writeln!(out, "# speed_limit={}", scene.speed_limit()).map_err(io_err)?;
    for lane in scene.lanes() {
        let pts: Vec<String> = lane
            .centerline
            .points()
            .iter()
            .map(|p| format!("{} {}", p.x, p.y))
            .collect();
        writeln!(out, "# lane={};{};{}", lane.lane_id, lane.width, pts.join(";")).map_err(io_err)?;
    }
    writeln!(out, "{COLUMNS}").map_err(io_err)?;
    for track in scene.vehicles() {
        let g = track.geometry;
        for (i, f) in track.trajectory.frames().iter().enumerate() {
            let s = f.state;
            let lead = track.preceding[i].map(|id| id.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                track.id(),
                f.frame,
                s.x,
                s.y,
                s.psi,
                s.v,
                g.length,
                g.width,
                g.lf,
                g.lr,
                track.lane_ids[i],
                lead
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

fn parse_lane(line: usize, spec: &str) -> Result<LaneGeometry> {
    let mut parts = spec.split(';');
    let bad = || Error::parse(line, format!("malformed lane `{spec}`"));
    let lane_id: LaneId = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(bad)?;
    let width: f64 = parts.next().and_then(|p| p.trim().parse().ok()).ok_or_else(bad)?;
    let points = parts
        .map(|p| {
            let mut xy = p.split_whitespace().map(str::parse::<f64>);
            match (xy.next(), xy.next(), xy.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => Ok(Vec2::new(x, y)),
                _ => Err(bad()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let centerline = Polyline::new(points).ok_or_else(bad)?;
    Ok(LaneGeometry {
        lane_id,
        centerline,
        width,
    })
}

pub fn read_scene(mut input: impl Read) -> Result<Scene> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(io_err)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, first)) if first.trim_start_matches('#').trim() == SCENE_SCHEMA => {}
        _ => return Err(Error::Format(format!("expected `# {SCENE_SCHEMA}` header"))),
    }
    let mut dt = None;
    let mut speed_limit = None;
    let mut lanes = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let Some(meta) = line.strip_prefix('#') else {
            continue;
        };
        let meta = meta.trim();
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::parse(n + 1, format!("bad number `{v}`")))
        };
        if let Some(v) = meta.strip_prefix("dt=") {
            dt = Some(num(v)?);
        } else if let Some(v) = meta.strip_prefix("speed_limit=") {
            speed_limit = Some(num(v)?);
        } else if let Some(v) = meta.strip_prefix("lane=") {
            lanes.push(parse_lane(n + 1, v)?);
        }
    }
    let dt = dt.ok_or_else(|| Error::Format("missing dt header".into()))?;
    let speed_limit = speed_limit.ok_or_else(|| Error::Format("missing speed_limit header".into()))?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    if reader.headers()?.iter().collect::<Vec<_>>().join(",") != COLUMNS {
        return Err(Error::Format(format!("expected columns `{COLUMNS}`")));
    }

    struct Acc {
        frames: Vec<FrameState>,
        geometry: VehicleGeometry,
        lanes: Vec<LaneId>,
        preceding: Vec<Option<VehicleId>>,
    }
    let mut acc: BTreeMap<VehicleId, Acc> = BTreeMap::new();
    for (n, record) in reader.records().enumerate() {
        let r = record?;
        let line = r.position().map_or(n + 2, |p| p.line() as usize);
        let f = |i: usize| -> Result<f64> {
            r.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(line, format!("column {i}")))
        };
        let int = |i: usize| -> Result<i64> {
            r.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(line, format!("column {i}")))
        };
        let id = VehicleId(int(0)? as u32);
        let geometry = VehicleGeometry {
            length: f(6)?,
            width: f(7)?,
            lf: f(8)?,
            lr: f(9)?,
        };
        let lead = match r.get(11) {
            Some("") | None => None,
            Some(_) => Some(VehicleId(int(11)? as u32)),
        };
        let entry = acc.entry(id).or_insert_with(|| Acc {
            frames: Vec::new(),
            geometry,
            lanes: Vec::new(),
            preceding: Vec::new(),
        });
        entry.frames.push(FrameState {
            frame: int(1)? as u32,
            state: VehicleState {
                x: f(2)?,
                y: f(3)?,
                psi: f(4)?,
                v: f(5)?,
            },
        });
        entry.lanes.push(int(10)? as LaneId);
        entry.preceding.push(lead);
    }
    let tracks = acc
        .into_iter()
        .map(|(id, a)| {
            VehicleTrack::new(Trajectory::new(id, dt, a.frames)?, a.geometry, a.lanes, a.preceding)
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(tracks, lanes, dt, speed_limit)
}

/// Lane polyline file: `lane_id,width,x,y`, one row per vertex in order.
pub fn write_lanes(mut out: impl Write, lanes: &[LaneGeometry]) -> Result<()> {
    writeln!(out, "lane_id,width,x,y").map_err(io_err)?;
    for lane in lanes {
        for p in lane.centerline.points() {
            writeln!(out, "{},{},{},{}", lane.lane_id, lane.width, p.x, p.y).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_lanes(input: impl Read) -> Result<Vec<LaneGeometry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut acc: BTreeMap<LaneId, (f64, Vec<Vec2>)> = BTreeMap::new();
    for (n, record) in reader.records().enumerate() {
        let r = record?;
        let get = |i: usize| -> Result<f64> {
            r.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(n + 2, format!("column {i}")))
        };
        let id = get(0)? as LaneId;
        let entry = acc.entry(id).or_insert((get(1)?, Vec::new()));
        entry.1.push(Vec2::new(get(2)?, get(3)?));
    }
    acc.into_iter()
        .map(|(lane_id, (width, pts))| {
            Ok(LaneGeometry {
                lane_id,
                width,
                centerline: Polyline::new(pts)
                    .ok_or_else(|| Error::Format(format!("lane {lane_id}: degenerate polyline")))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{NGSIM_DT, US101_SPEED_LIMIT};
    use super::*;

    #[test]
    fn scene_round_trip_is_exact() {
        let mut states = cruising(0.1, -1.8, 10.0 / 3.0, 12);
        states[3].psi = 0.1 + 0.2;
        let scene = Scene::new(
            vec![
                track(1, 7, &states, 1, Some(2)),
                track(2, 7, &cruising(40.0, -1.8, 11.1, 15), 1, None),
            ],
            lanes(2, 3.6576),
            NGSIM_DT,
            US101_SPEED_LIMIT,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_scene(&mut buf, &scene, &["config-hash=abc".to_string()]).unwrap();
        let back = read_scene(buf.as_slice()).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(read_scene("vehicle_id,frame\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn lanes_round_trip() {
        let lanes = lanes(3, 3.7);
        let mut buf = Vec::new();
        write_lanes(&mut buf, &lanes).unwrap();
        assert_eq!(read_lanes(buf.as_slice()).unwrap(), lanes);
    }
}
