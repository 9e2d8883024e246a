//! Driving codes and nearest-neighbour IDM parameter prediction.
//!
//! A driving code summarises a short observation window by three statistics:
//! mean signed lane-centre offset `tau`, mean speed `nu` and mean time headway
//! `omega`. Parameters for a new driver are the mean of the parameters of the
//! `k` training drivers with the closest codes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idm::IdmParams;
use crate::scene::{Scene, VehicleId};

/// Below this speed (m/s) a frame does not contribute a time headway.
pub const MIN_HEADWAY_SPEED: f64 = 0.5;

/// Floor applied to a per-dimension standard deviation.
pub const MIN_STD: f64 = 1e-9;

pub const STORE_SCHEMA: &str = "drivecode-knn-store v1";
const STORE_COLUMNS: &str = "vehicle_id,a,b,T,d0,d1,tau,nu,omega";

/// Per-feature values; `None` marks an unavailable or masked feature.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DrivingCode {
    pub tau: Option<f64>,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
}

impl DrivingCode {
    pub fn new(tau: f64, nu: f64, omega: Option<f64>) -> Self {
        Self {
            tau: Some(tau),
            nu: Some(nu),
            omega,
        }
    }

    pub fn to_array(&self) -> [Option<f64>; 3] {
        [self.tau, self.nu, self.omega]
    }

    pub fn masked(&self, mask: FeatureMask) -> Self {
        Self {
            tau: self.tau.filter(|_| mask.tau),
            nu: self.nu.filter(|_| mask.nu),
            omega: self.omega.filter(|_| mask.omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask {
    pub tau: bool,
    pub nu: bool,
    pub omega: bool,
}

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask {
        tau: true,
        nu: true,
        omega: true,
    };

    pub fn to_array(self) -> [bool; 3] {
        [self.tau, self.nu, self.omega]
    }

    pub fn is_empty(self) -> bool {
        !(self.tau || self.nu || self.omega)
    }

    /// The seven non-empty subsets, singletons first.
    pub fn subsets() -> [FeatureMask; 7] {
        let m = |nu, omega, tau| FeatureMask { tau, nu, omega };
        [
            m(true, false, false),
            m(false, true, false),
            m(false, false, true),
            m(true, true, false),
            m(true, false, true),
            m(false, true, true),
            m(true, true, true),
        ]
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.nu, "nu"), (self.omega, "omega"), (self.tau, "tau")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut mask = FeatureMask {
            tau: false,
            nu: false,
            omega: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "tau" => mask.tau = true,
                "nu" => mask.nu = true,
                "omega" => mask.omega = true,
                other => return Err(Error::Config(format!("unknown feature `{other}`"))),
            }
        }
        if mask.is_empty() {
            return Err(Error::Config("feature mask selects nothing".into()));
        }
        Ok(mask)
    }
}

impl Serialize for FeatureMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the speed feature is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuMode {
    /// Mean own speed.
    #[default]
    Absolute,
    /// Mean approach rate to the lead, over frames with a lead.
    Relative,
}

/// One observed frame of the vehicle being coded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeSample {
    /// Signed offset from the lane centerline, positive to the left (m).
    pub offset: f64,
    pub speed: f64,
    /// (bumper gap, lead speed) when a lead is present.
    pub lead: Option<(f64, f64)>,
}

/// Observation samples for the first `frames` frames of a vehicle (all frames when `None`).
pub fn code_samples(scene: &Scene, id: VehicleId, frames: Option<usize>) -> Result<Vec<CodeSample>> {
    let track = scene.vehicle(id).ok_or(Error::UnknownVehicle(id))?;
    let n = frames.unwrap_or(track.trajectory.len());
    if n > track.trajectory.len() {
        return Err(Error::InsufficientLength {
            vehicle: id,
            have: track.trajectory.len(),
            need: n,
        });
    }
    track.trajectory.frames()[..n]
        .iter()
        .zip(&track.lane_ids)
        .map(|(f, lane_id)| {
            let lane = scene
                .lane(*lane_id)
                .ok_or_else(|| Error::Format(format!("lane {lane_id} has no geometry")))?;
            Ok(CodeSample {
                offset: lane.project(f.state.position()).offset,
                speed: f.state.v,
                lead: scene.lead_at(id, f.frame).map(|l| (l.gap, l.speed)),
            })
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Driving code of an observation window; masked features are left unset.
pub fn extract_code(samples: &[CodeSample], mask: FeatureMask, nu_mode: NuMode) -> Result<DrivingCode> {
    if samples.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let tau = mean(samples.iter().map(|s| s.offset));
    let nu = match nu_mode {
        NuMode::Absolute => mean(samples.iter().map(|s| s.speed)),
        NuMode::Relative => mean(
            samples
                .iter()
                .filter_map(|s| s.lead.map(|(_, lead_v)| s.speed - lead_v)),
        ),
    };
    let omega = mean(samples.iter().filter_map(|s| match s.lead {
        Some((gap, _)) if s.speed > MIN_HEADWAY_SPEED && gap > 0.0 => Some(gap / s.speed),
        _ => None,
    }));
    Ok(DrivingCode { tau, nu, omega }.masked(mask))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreEntry {
    pub vehicle_id: VehicleId,
    pub code: DrivingCode,
    pub params: IdmParams,
}

/// Per-dimension z-score statistics over the available entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    /// Dimensions whose deviation was floored at [`MIN_STD`].
    pub degenerate: [bool; 3],
}

impl Standardization {
    fn fit(entries: &[StoreEntry]) -> Self {
        let mut out = Standardization {
            mean: [0.0; 3],
            std: [1.0; 3],
            degenerate: [false; 3],
        };
        for d in 0..3 {
            let vals: Vec<f64> = entries.iter().filter_map(|e| e.code.to_array()[d]).collect();
            if vals.is_empty() {
                out.degenerate[d] = true;
                continue;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
            out.mean[d] = m;
            let sd = var.sqrt();
            if sd > MIN_STD {
                out.std[d] = sd;
            } else {
                out.std[d] = MIN_STD;
                out.degenerate[d] = true;
            }
        }
        out
    }

    pub fn z(&self, code: &DrivingCode) -> [Option<f64>; 3] {
        let raw = code.to_array();
        std::array::from_fn(|d| raw[d].map(|v| (v - self.mean[d]) / self.std[d]))
    }
}

/// Immutable set of (driving code, fitted parameters) pairs, ordered by vehicle id.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnStore {
    entries: Vec<StoreEntry>,
    standardization: Standardization,
    z: Vec<[Option<f64>; 3]>,
}

impl KnnStore {
    pub fn new(mut entries: Vec<StoreEntry>) -> Self {
        entries.sort_by_key(|e| e.vehicle_id);
        let standardization = Standardization::fit(&entries);
        if standardization.degenerate.iter().any(|d| *d) && !entries.is_empty() {
            log::warn!(
                "degenerate driving-code dimensions (tau, nu, omega): {:?}",
                standardization.degenerate
            );
        }
        let z = entries.iter().map(|e| standardization.z(&e.code)).collect();
        Self {
            entries,
            standardization,
            z,
        }
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Arithmetic mean of every stored parameter set.
    pub fn mean_params(&self) -> Option<IdmParams> {
        IdmParams::mean(self.entries.iter().map(|e| &e.params))
    }

    /// Indices of the `k` nearest entries, nearest first; ties go to the lower vehicle id.
    pub fn neighbors(&self, query: &DrivingCode, k: usize, mask: FeatureMask) -> Result<Vec<usize>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyStore);
        }
        if k == 0 || k > self.entries.len() {
            return Err(Error::KTooLarge {
                k,
                size: self.entries.len(),
            });
        }
        let q = self.standardization.z(&query.masked(mask));
        let mut scored: Vec<(f64, usize)> = self
            .z
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for d in 0..3 {
                    if let (Some(a), Some(b)) = (q[d], e[d]) {
                        sum += (a - b) * (a - b);
                        n += 1;
                    }
                }
                let dist = if n == 0 { f64::INFINITY } else { sum / n as f64 };
                (dist, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored.into_iter().map(|(_, i)| i).collect())
    }

    pub fn save(&self, mut out: impl Write, extra_header: &[String]) -> Result<()> {
        let io = |e| Error::io("<store>", e);
        writeln!(out, "# {STORE_SCHEMA}").map_err(io)?;
        for line in extra_header {
            writeln!(out, "# {line}").map_err(io)?;
        }
        writeln!(out, "{STORE_COLUMNS}").map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            let p = e.params;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.vehicle_id,
                p.a,
                p.b,
                p.t_headway,
                p.d0,
                p.d1,
                opt(e.code.tau),
                opt(e.code.nu),
                opt(e.code.omega)
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn load(mut input: impl Read) -> Result<Self> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<store>", e))?;
        if text.lines().next().map(|l| l.trim_start_matches('#').trim()) != Some(STORE_SCHEMA) {
            return Err(Error::Format(format!("expected `# {STORE_SCHEMA}` header")));
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        if reader.headers()?.iter().collect::<Vec<_>>().join(",") != STORE_COLUMNS {
            return Err(Error::Format(format!("expected columns `{STORE_COLUMNS}`")));
        }
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = || Error::parse(i + 2, "malformed store row");
            let f = |j: usize| rec.get(j).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
            let opt = |j: usize| -> Result<Option<f64>> {
                match rec.get(j) {
                    Some("") => Ok(None),
                    Some(v) => v.parse().map(Some).map_err(|_| bad()),
                    None => Err(bad()),
                }
            };
            entries.push(StoreEntry {
                vehicle_id: VehicleId(rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?),
                params: IdmParams::from_array([f(1)?, f(2)?, f(3)?, f(4)?, f(5)?]),
                code: DrivingCode {
                    tau: opt(6)?,
                    nu: opt(7)?,
                    omega: opt(8)?,
                },
            });
        }
        Ok(KnnStore::new(entries))
    }
}

/// Mean parameters of the `k` stored drivers whose codes are nearest to `query`.
pub fn predict_params(store: &KnnStore, query: &DrivingCode, k: usize, mask: FeatureMask) -> Result<IdmParams> {
    let mut idx = store.neighbors(query, k, mask)?;
    // summed in store order so that k = len reproduces the population mean bit for bit
    idx.sort_unstable();
    Ok(IdmParams::mean(idx.iter().map(|&i| &store.entries[i].params)).expect("k >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub k: usize,
    pub observe_frames: usize,
    pub features: FeatureMask,
    pub nu_mode: NuMode,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            k: 8,
            observe_frames: 10,
            features: FeatureMask::ALL,
            nu_mode: NuMode::Absolute,
        }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("predict.k must be at least 1".into()));
        }
        if self.observe_frames < 2 {
            return Err(Error::Config("predict.observe_frames must be at least 2".into()));
        }
        Ok(())
    }
}

/// Predicts parameters for one scene vehicle from its first `observe_frames` frames.
pub fn predict_vehicle(store: &KnnStore, scene: &Scene, id: VehicleId, cfg: &PredictConfig) -> Result<IdmParams> {
    let samples = code_samples(scene, id, Some(cfg.observe_frames))?;
    let code = extract_code(&samples, cfg.features, cfg.nu_mode)?;
    predict_params(store, &code, cfg.k, cfg.features)
}

/// Vehicles that could not be coded, with the reason.
pub type Skipped = Vec<(VehicleId, String)>;

/// Bulk prediction for every vehicle of a scene. Vehicles that cannot be coded
/// are returned separately with the reason.
pub fn predict_all(
    store: &KnnStore,
    scene: &Scene,
    cfg: &PredictConfig,
) -> Result<(BTreeMap<VehicleId, IdmParams>, Skipped)> {
    cfg.validate()?;
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    let mut out = BTreeMap::new();
    let mut skipped = Vec::new();
    for id in scene.vehicle_ids() {
        match predict_vehicle(store, scene, id, cfg) {
            Ok(p) => {
                out.insert(id, p);
            }
            Err(e @ (Error::EmptyStore | Error::KTooLarge { .. })) => return Err(e),
            Err(e) => skipped.push((id, e.to_string())),
        }
    }
    Ok((out, skipped))
}

/// Parameters file: `vehicle_id,a,b,T,d0,d1`.
pub fn write_params(mut out: impl Write, params: &BTreeMap<VehicleId, IdmParams>, extra_header: &[String]) -> Result<()> {
    let io = |e| Error::io("<params>", e);
    for line in extra_header {
        writeln!(out, "# {line}").map_err(io)?;
    }
    writeln!(out, "vehicle_id,a,b,T,d0,d1").map_err(io)?;
    for (id, p) in params {
        writeln!(out, "{id},{},{},{},{},{}", p.a, p.b, p.t_headway, p.d0, p.d1).map_err(io)?;
    }
    Ok(())
}
