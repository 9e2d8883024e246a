//! Evaluation harness: every method is rolled out on the same test vehicles
//! and aggregated into a report table.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_idm, FitConfig, ScoringConfig};
use crate::idm::IdmParams;
use crate::metrics::{EvalRecord, ReportTable};
use crate::predictor::{predict_vehicle, FeatureMask, KnnStore, PredictConfig};
use crate::rollout::Controller;
use crate::scene::{episode_window, Episode, Scene, VehicleId};

/// Observation windows swept by [`ablation_frames`].
pub const ABLATION_FRAMES: [usize; 5] = [2, 4, 6, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    ConstantVelocity,
    /// IDM with the mean of all stored parameters.
    Average,
    /// IDM with driving-code nearest-neighbour parameters.
    Predict,
    /// IDM fitted on the test vehicle's own window.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ConstantVelocity, Method::Average, Method::Predict, Method::Oracle];

    pub fn label(self) -> &'static str {
        match self {
            Method::ConstantVelocity => "constvel",
            Method::Average => "avg",
            Method::Predict => "pred",
            Method::Oracle => "oracle",
        }
    }

    /// Parses a comma-separated list; the result is in canonical order without duplicates.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constvel" => Ok(Method::ConstantVelocity),
            "avg" | "idm_average" => Ok(Method::Average),
            "pred" | "idm_predict" => Ok(Method::Predict),
            "oracle" | "idm_oracle" => Ok(Method::Oracle),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub scoring: ScoringConfig,
    pub predict: PredictConfig,
    /// Oracle fitting; its `horizon` is also the evaluation horizon.
    pub fit: FitConfig,
}

impl BenchmarkConfig {
    pub fn horizon(&self) -> usize {
        self.fit.horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub table: ReportTable,
    /// Per-vehicle records ordered by vehicle id, then row order.
    pub records: Vec<EvalRecord>,
    /// Vehicles left out of every row, with the reason.
    pub excluded: Vec<(VehicleId, String)>,
}

/// One report row: a label and how to obtain its controller.
#[derive(Debug, Clone)]
enum Variant {
    ConstantVelocity,
    Fixed(IdmParams),
    Predict(PredictConfig),
    Oracle(Option<IdmParams>),
}

fn controller(
    variant: &Variant,
    scene: &Scene,
    store: &KnnStore,
    episode: &Episode,
    cfg: &BenchmarkConfig,
) -> Result<Controller> {
    Ok(match variant {
        Variant::ConstantVelocity => Controller::ConstantVelocity,
        Variant::Fixed(p) => cfg.scoring.idm(episode, *p),
        Variant::Predict(pc) => {
            let p = predict_vehicle(store, scene, episode.vehicle_id, pc)?;
            cfg.scoring.idm(episode, p)
        }
        Variant::Oracle(start) => {
            let fit = fit_idm(episode, &cfg.fit, &cfg.scoring, start.as_ref())?;
            cfg.scoring.idm(episode, fit.params)
        }
    })
}

fn evaluate_vehicle(
    id: VehicleId,
    rows: &[(String, Variant)],
    scene: &Scene,
    store: &KnnStore,
    cfg: &BenchmarkConfig,
) -> Result<Vec<EvalRecord>> {
    let episode = episode_window(scene, id, cfg.horizon())?;
    rows.iter()
        .map(|(label, variant)| {
            let c = controller(variant, scene, store, &episode, cfg)?;
            let (ade, fde, result) = cfg.scoring.evaluate(&episode, &c)?;
            Ok(EvalRecord {
                vehicle_id: id,
                method: label.clone(),
                ade,
                fde,
                collided_at_fault: result.at_fault(),
            })
        })
        .collect()
}

/// Runs every row on every vehicle. A vehicle that fails any row is dropped from all rows.
fn run_rows(scene: &Scene, store: &KnnStore, rows: &[(String, Variant)], cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    cfg.predict.validate()?;
    cfg.fit.validate()?;
    for (_, v) in rows {
        if let Variant::Predict(pc) = v {
            pc.validate()?;
            if pc.k > store.len() {
                return Err(Error::KTooLarge { k: pc.k, size: store.len() });
            }
        }
    }
    let ids: Vec<VehicleId> = scene.vehicle_ids().collect();
    let outcomes: Vec<_> = ids
        .par_iter()
        .map(|&id| (id, evaluate_vehicle(id, rows, scene, store, cfg)))
        .collect();
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => {
                log::info!("vehicle {id} excluded: {e}");
                excluded.push((id, e.to_string()));
            }
        }
    }
    Ok(BenchmarkOutput {
        table: ReportTable::aggregate(&records),
        records,
        excluded,
    })
}

fn require_store(store: &KnnStore) -> Result<IdmParams> {
    store.mean_params().ok_or(Error::EmptyStore)
}

/// Evaluates `methods` on every vehicle of the test scene that has a full horizon.
pub fn run_benchmark(store: &KnnStore, scene: &Scene, methods: &[Method], cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let needs_store = methods.iter().any(|m| matches!(m, Method::Average | Method::Predict));
    let mean = if needs_store { Some(require_store(store)?) } else { store.mean_params() };
    let rows: Vec<(String, Variant)> = methods
        .iter()
        .map(|m| {
            let v = match m {
                Method::ConstantVelocity => Variant::ConstantVelocity,
                Method::Average => Variant::Fixed(mean.expect("checked above")),
                Method::Predict => Variant::Predict(cfg.predict),
                Method::Oracle => Variant::Oracle(mean),
            };
            (m.label().to_string(), v)
        })
        .collect();
    run_rows(scene, store, &rows, cfg)
}

/// Prediction rows for each of the seven non-empty driving-code subsets.
pub fn ablation_driving_code(store: &KnnStore, scene: &Scene, cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    require_store(store)?;
    let rows: Vec<(String, Variant)> = FeatureMask::subsets()
        .into_iter()
        .map(|mask| {
            let pc = PredictConfig { features: mask, ..cfg.predict };
            (format!("pred[{}]", mask.to_string().replace(',', "+")), Variant::Predict(pc))
        })
        .collect();
    run_rows(scene, store, &rows, cfg)
}

/// Prediction rows for each observation window in `frames`.
pub fn ablation_frames(store: &KnnStore, scene: &Scene, frames: &[usize], cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    require_store(store)?;
    let rows: Vec<(String, Variant)> = frames
        .iter()
        .map(|&n| {
            let pc = PredictConfig { observe_frames: n, ..cfg.predict };
            (format!("pred@{n}"), Variant::Predict(pc))
        })
        .collect();
    run_rows(scene, store, &rows, cfg)
}
