//! NGSIM trajectory table ingestion.
//!
//! NGSIM reports `Local_Y` along the direction of travel and `Local_X` across
//! the lanes, increasing to the right, both at the front centre of the vehicle
//! and in feet. Scenes use a right-handed SI frame with x along the road and
//! y to the left, positions at the vehicle centre.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    FrameState, LaneGeometry, LaneId, Scene, Trajectory, VehicleGeometry, VehicleId, VehicleState,
    VehicleTrack, NGSIM_DT, US101_SPEED_LIMIT,
};
use crate::error::{Error, Result};
use crate::geometry::wrap_angle;

pub const FEET_TO_METERS: f64 = 0.3048;

const REQUIRED: [&str; 10] = [
    "Vehicle_ID",
    "Frame_ID",
    "Local_X",
    "Local_Y",
    "v_Vel",
    "v_Length",
    "v_Width",
    "Lane_ID",
    "Preceding",
    "Space_Headway",
];

/// Column positions of the headerless whitespace-separated release files.
const RAW_COLUMNS: [usize; 10] = [0, 1, 4, 5, 11, 8, 9, 13, 14, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Feet,
    Meters,
}

impl Units {
    pub fn factor(self) -> f64 {
        match self {
            Units::Feet => FEET_TO_METERS,
            Units::Meters => 1.0,
        }
    }
}

impl FromStr for Units {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feet" | "ft" => Ok(Units::Feet),
            "meters" | "m" | "metres" => Ok(Units::Meters),
            other => Err(Error::Config(format!("unknown units `{other}`"))),
        }
    }
}

/// Which point of the vehicle body the source positions refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionReference {
    #[default]
    FrontCenter,
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub units: Units,
    /// Mainline lanes to keep.
    pub lanes: Vec<LaneId>,
    pub reference: PositionReference,
    pub dt: f64,
    pub speed_limit: f64,
    /// Centred moving-average window applied to the differentiated heading.
    pub heading_window: usize,
    pub lane_width: f64,
    /// Estimated centerlines extend this far beyond the observed extent (m).
    pub lane_margin: f64,
    /// Externally supplied lane polylines; replaces centerline estimation.
    #[serde(skip)]
    pub lane_geometry: Option<Vec<LaneGeometry>>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            units: Units::Feet,
            lanes: (1..=5).collect(),
            reference: PositionReference::FrontCenter,
            dt: NGSIM_DT,
            speed_limit: US101_SPEED_LIMIT,
            heading_window: 5,
            lane_width: 12.0 * FEET_TO_METERS,
            lane_margin: 100.0,
            lane_geometry: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Row {
    vehicle: u32,
    frame: u32,
    local_x: f64,
    local_y: f64,
    vel: f64,
    length: f64,
    width: f64,
    lane: LaneId,
    preceding: u32,
}

fn parse_field(line: usize, name: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("{name}: cannot parse `{raw}`")))
}

fn parse_int(line: usize, name: &str, raw: &str) -> Result<i64> {
    let v = parse_field(line, name, raw)?;
    if v.fract() != 0.0 {
        return Err(Error::parse(line, format!("{name}: `{raw}` is not an integer")));
    }
    Ok(v as i64)
}

fn row_from_fields<'a>(line: usize, field: impl Fn(usize) -> Option<&'a str>) -> Result<Row> {
    let get = |i: usize| field(i).ok_or_else(|| Error::parse(line, format!("missing {}", REQUIRED[i])));
    let int = |i: usize| -> Result<i64> { parse_int(line, REQUIRED[i], get(i)?) };
    let float = |i: usize| -> Result<f64> { parse_field(line, REQUIRED[i], get(i)?) };
    let vehicle = int(0)?;
    let frame = int(1)?;
    let preceding = int(8)?;
    if vehicle < 0 || frame < 0 || preceding < 0 {
        return Err(Error::parse(line, "negative identifier"));
    }
    // Space_Headway is required by the schema but gaps are recomputed from geometry.
    float(9)?;
    Ok(Row {
        vehicle: vehicle as u32,
        frame: frame as u32,
        local_x: float(2)?,
        local_y: float(3)?,
        vel: float(4)?,
        length: float(5)?,
        width: float(6)?,
        lane: int(7)? as LaneId,
        preceding: preceding as u32,
    })
}

fn read_rows(source: impl Read) -> Result<Vec<Row>> {
    let mut reader = BufReader::new(source);
    let mut first = String::new();
    loop {
        first.clear();
        if reader.read_line(&mut first).map_err(|e| Error::io("<input>", e))? == 0 {
            return Err(Error::Format("input is empty".into()));
        }
        if !first.trim().is_empty() {
            break;
        }
    }

    if first.chars().any(|c| c.is_ascii_alphabetic()) {
        let text = first.clone();
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes().chain(reader));
        let headers = csv.headers()?.clone();
        let index: Vec<usize> = REQUIRED
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.eq_ignore_ascii_case(name))
                    .ok_or_else(|| Error::MissingColumn((*name).to_string()))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (n, record) in csv.records().enumerate() {
            let record = record?;
            rows.push(row_from_fields(n + 2, |i| record.get(index[i]))?);
        }
        Ok(rows)
    } else {
        let mut rows = Vec::new();
        let mut line_no = 1;
        let mut push = |line: &str, line_no: usize| -> Result<()> {
            if line.trim().is_empty() {
                return Ok(());
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            rows.push(row_from_fields(line_no, |i| fields.get(RAW_COLUMNS[i]).copied())?);
            Ok(())
        };
        push(&first, line_no)?;
        for line in reader.lines() {
            line_no += 1;
            push(&line.map_err(|e| Error::io("<input>", e))?, line_no)?;
        }
        Ok(rows)
    }
}

fn smoothed_headings(xs: &[f64], ys: &[f64], window: usize) -> Vec<f64> {
    let n = xs.len();
    let mut raw: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
            let dx = xs[b] - xs[a];
            let dy = ys[b] - ys[a];
            (dx.hypot(dy) > 1e-6).then(|| dy.atan2(dx))
        })
        .collect();
    // stationary stretches inherit the nearest defined heading
    let mut last = None;
    for h in raw.iter_mut() {
        match h {
            Some(v) => last = Some(*v),
            None => *h = last,
        }
    }
    let mut next = None;
    for h in raw.iter_mut().rev() {
        match h {
            Some(v) => next = Some(*v),
            None => *h = next,
        }
    }
    let mut unwrapped: Vec<f64> = raw.into_iter().map(|h| h.unwrap_or(0.0)).collect();
    for i in 1..n {
        let d = wrap_angle(unwrapped[i] - unwrapped[i - 1]);
        unwrapped[i] = unwrapped[i - 1] + d;
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let sum: f64 = unwrapped[i - h..=i + h].iter().sum();
            wrap_angle(sum / (2 * h + 1) as f64)
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Reads an NGSIM trajectory table into an SI scene restricted to the configured lanes.
///
/// Accepts the comma-separated export with a header row or the headerless
/// whitespace-separated release files.
pub fn ingest_ngsim(source: impl Read, config: &IngestConfig) -> Result<Scene> {
    let rows = read_rows(source)?;
    let keep: HashSet<LaneId> = config.lanes.iter().copied().collect();
    let factor = config.units.factor();

    let mut grouped: BTreeMap<u32, BTreeMap<u32, Row>> = BTreeMap::new();
    let mut duplicates = 0usize;
    for row in rows.into_iter().filter(|r| keep.contains(&r.lane)) {
        match grouped.entry(row.vehicle).or_default().entry(row.frame) {
            std::collections::btree_map::Entry::Occupied(_) => duplicates += 1,
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(row);
            }
        }
    }
    if duplicates > 0 {
        log::warn!("ignored {duplicates} duplicate (vehicle, frame) rows");
    }

    struct Pending {
        id: VehicleId,
        frames: Vec<FrameState>,
        geometry: VehicleGeometry,
        lanes: Vec<LaneId>,
        preceding: Vec<u32>,
    }

    let mut pending = Vec::new();
    let mut dropped_short = 0usize;
    for (vid, frames) in grouped {
        if frames.len() < 2 {
            dropped_short += 1;
            continue;
        }
        let rows: Vec<&Row> = frames.values().collect();
        let scaled = |v: f64| if factor == 1.0 { v } else { v * factor };
        let xs: Vec<f64> = rows.iter().map(|r| scaled(r.local_y)).collect();
        let ys: Vec<f64> = rows.iter().map(|r| -scaled(r.local_x)).collect();
        let headings = smoothed_headings(&xs, &ys, config.heading_window);
        let geometry = VehicleGeometry::from_dimensions(scaled(rows[0].length), scaled(rows[0].width));
        if !geometry.is_valid() {
            dropped_short += 1;
            log::warn!("vehicle {vid}: invalid dimensions, dropped");
            continue;
        }
        let states = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (mut x, mut y) = (xs[i], ys[i]);
                if config.reference == PositionReference::FrontCenter {
                    x -= geometry.length / 2.0 * headings[i].cos();
                    y -= geometry.length / 2.0 * headings[i].sin();
                }
                FrameState {
                    frame: r.frame,
                    state: VehicleState::new(x, y, headings[i], scaled(r.vel)),
                }
            })
            .collect();
        pending.push(Pending {
            id: VehicleId(vid),
            frames: states,
            geometry,
            lanes: rows.iter().map(|r| r.lane).collect(),
            preceding: rows.iter().map(|r| r.preceding).collect(),
        });
    }
    if dropped_short > 0 {
        log::warn!("dropped {dropped_short} vehicles with fewer than two usable frames");
    }
    if pending.is_empty() {
        return Err(Error::EmptyScene);
    }

    let lanes = match &config.lane_geometry {
        Some(lanes) => lanes
            .iter()
            .filter(|l| keep.contains(&l.lane_id))
            .cloned()
            .collect(),
        None => {
            let mut lateral: BTreeMap<LaneId, Vec<f64>> = BTreeMap::new();
            let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &pending {
                for (f, lane) in p.frames.iter().zip(&p.lanes) {
                    lateral.entry(*lane).or_default().push(f.state.y);
                    x_min = x_min.min(f.state.x);
                    x_max = x_max.max(f.state.x);
                }
            }
            let (start, end) = (x_min - config.lane_margin, x_max + config.lane_margin);
            let end = if end > start { end } else { start + 1.0 };
            lateral
                .into_iter()
                .map(|(id, mut ys)| LaneGeometry::straight(id, median(&mut ys), start, end, config.lane_width))
                .collect()
        }
    };

    let present: BTreeMap<VehicleId, BTreeSet<u32>> = pending
        .iter()
        .map(|p| (p.id, p.frames.iter().map(|f| f.frame).collect()))
        .collect();
    let mut dangling = 0usize;
    let mut tracks = Vec::with_capacity(pending.len());
    for p in pending {
        let preceding = p
            .frames
            .iter()
            .zip(&p.preceding)
            .map(|(f, &lead)| {
                if lead == 0 || VehicleId(lead) == p.id {
                    return None;
                }
                let lead = VehicleId(lead);
                if present.get(&lead).is_some_and(|fr| fr.contains(&f.frame)) {
                    Some(lead)
                } else {
                    dangling += 1;
                    None
                }
            })
            .collect();
        let trajectory = Trajectory::new(p.id, config.dt, p.frames)?;
        tracks.push(VehicleTrack::new(trajectory, p.geometry, p.lanes, preceding)?);
    }
    if dangling > 0 {
        log::info!("{dangling} recorded lead pointers reference vehicles outside the scene");
    }
    let scene = Scene::new(tracks, lanes, config.dt, config.speed_limit)?;
    log::info!(
        "ingested {} vehicles on {} lanes",
        scene.len(),
        scene.lanes().len()
    );
    Ok(scene)
}
