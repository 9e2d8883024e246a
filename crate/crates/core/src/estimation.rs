//! Full-information IDM fitting: per-vehicle parameters that minimise the
//! rollout ADE against the vehicle's own recorded window.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idm::{IdmBounds, IdmGlobals, IdmParams};
use crate::metrics::{score, AdeNormalization, PostCollision};
use crate::optimize::{halton, minimize_bounded, QuasiNewtonConfig};
use crate::predictor::{code_samples, extract_code, FeatureMask, KnnStore, NuMode, StoreEntry};
use crate::rollout::{rollout, Controller, RolloutConfig, RolloutResult};
use crate::scene::{episode_window, Episode, Scene, VehicleId};

/// Objective value used when a rollout fails outright.
const FAILED_ROLLOUT: f64 = 1e6;

/// Everything that decides how a parameter set is simulated and scored.
/// Fitting and evaluation share one instance so their numbers agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub rollout: RolloutConfig,
    /// Free-road exponent; the desired speed comes from the scene's speed limit.
    pub phi: f64,
    pub ade: AdeNormalization,
    pub post_collision: PostCollision,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            rollout: RolloutConfig::default(),
            phi: IdmGlobals::default().phi,
            ade: AdeNormalization::default(),
            post_collision: PostCollision::default(),
        }
    }
}

impl ScoringConfig {
    pub fn globals(&self, episode: &Episode) -> IdmGlobals {
        IdmGlobals {
            v0: episode.speed_limit,
            phi: self.phi,
        }
    }

    pub fn idm(&self, episode: &Episode, params: IdmParams) -> Controller {
        Controller::Idm {
            params,
            globals: self.globals(episode),
        }
    }

    /// Rolls `controller` out and scores it; returns (ade, fde, result).
    pub fn evaluate(&self, episode: &Episode, controller: &Controller) -> Result<(f64, f64, RolloutResult)> {
        let result = rollout(episode, controller, &self.rollout)?;
        let (ade, fde) = score(&episode.truth, &result, self.ade, self.post_collision)?;
        Ok((ade, fde, result))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub bounds: IdmBounds,
    /// Low-discrepancy starts in addition to the population-mean start.
    pub restarts: usize,
    /// Finite-difference step as a fraction of each bound's width.
    pub fd_step: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    /// Stop all restarts once the ADE falls to this value (m).
    pub ade_target: f64,
    /// Offsets the low-discrepancy sequence.
    pub seed: u64,
    pub horizon: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bounds: IdmBounds::default(),
            restarts: 5,
            fd_step: 1e-3,
            max_iter: 60,
            memory: 6,
            grad_tol: 1e-7,
            f_tol: 1e-9,
            ade_target: 1e-9,
            seed: 0,
            horizon: 100,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::Config(format!("fit.fd_step must lie in (0, 0.5), got {}", self.fd_step)));
        }
        if self.max_iter == 0 || self.memory == 0 {
            return Err(Error::Config("fit.max_iter and fit.memory must be positive".into()));
        }
        if self.horizon < 2 {
            return Err(Error::Config("fit.horizon must be at least 2".into()));
        }
        Ok(())
    }

    fn optimizer(&self) -> QuasiNewtonConfig {
        QuasiNewtonConfig {
            max_iter: self.max_iter,
            memory: self.memory,
            grad_tol: self.grad_tol,
            f_tol: self.f_tol,
            f_target: self.ade_target,
            ..QuasiNewtonConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: IdmParams,
    pub ade: f64,
    pub fde: f64,
    pub n_restarts_used: usize,
    /// At least one restart met a convergence tolerance.
    pub converged: bool,
}

/// Fits IDM parameters to one episode. `extra_start` is tried first when given.
pub fn fit_idm(
    episode: &Episode,
    cfg: &FitConfig,
    scoring: &ScoringConfig,
    extra_start: Option<&IdmParams>,
) -> Result<FitResult> {
    cfg.validate()?;
    let lo = cfg.bounds.lower();
    let width: Vec<f64> = cfg.bounds.intervals().iter().map(|i| i.width()).collect();
    let to_params = |u: &[f64]| -> IdmParams {
        let mut p = [0.0; IdmParams::DIM];
        for d in 0..IdmParams::DIM {
            p[d] = (lo[d] + u[d] * width[d]).clamp(lo[d], lo[d] + width[d]);
        }
        IdmParams::from_array(p)
    };
    let to_unit = |p: &IdmParams| -> Vec<f64> {
        let p = p.to_array();
        (0..IdmParams::DIM)
            .map(|d| if width[d] > 0.0 { ((p[d] - lo[d]) / width[d]).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    };
    let upper: Vec<f64> = width.iter().map(|w| if *w > 0.0 { 1.0 } else { 0.0 }).collect();
    let lower = vec![0.0; IdmParams::DIM];
    let steps = vec![cfg.fd_step; IdmParams::DIM];

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts + 1);
    if let Some(p) = extra_start {
        starts.push(to_unit(p));
    }
    starts.extend((0..cfg.restarts as u64).map(|r| halton(1 + cfg.seed + r, IdmParams::DIM)));
    if starts.is_empty() {
        starts.push(to_unit(&IdmParams::default()));
    }

    let objective = |u: &[f64]| -> f64 {
        let params = to_params(u);
        match scoring.evaluate(episode, &scoring.idm(episode, params)) {
            Ok((ade, _, _)) if ade.is_finite() => ade,
            _ => FAILED_ROLLOUT,
        }
    };

    let opt = cfg.optimizer();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    let mut used = 0;
    for x0 in &starts {
        used += 1;
        let m = minimize_bounded(objective, x0, &lower, &upper, &steps, &opt);
        converged |= m.status.converged();
        if best.as_ref().is_none_or(|(_, f)| m.f < *f) {
            best = Some((m.x, m.f));
        }
        if best.as_ref().is_some_and(|(_, f)| *f <= cfg.ade_target) {
            break;
        }
    }
    let (x, _) = best.expect("at least one start");
    let params = to_params(&x);
    let (ade, fde, _) = scoring.evaluate(episode, &scoring.idm(episode, params))?;
    Ok(FitResult {
        params,
        ade,
        fde,
        n_restarts_used: used,
        converged,
    })
}

/// Outcome of fitting every eligible vehicle of a training scene.
#[derive(Debug, Clone)]
pub struct TrainingFit {
    pub store: KnnStore,
    pub fits: BTreeMap<VehicleId, FitResult>,
    /// Vehicles that could not be fitted, with the reason.
    pub failures: Vec<(VehicleId, String)>,
}

fn fit_vehicle(
    scene: &Scene,
    id: VehicleId,
    cfg: &FitConfig,
    scoring: &ScoringConfig,
    nu_mode: NuMode,
) -> Result<(FitResult, StoreEntry)> {
    let episode = episode_window(scene, id, cfg.horizon)?;
    let fit = fit_idm(&episode, cfg, scoring, Some(&IdmParams::default()))?;
    let code = extract_code(&code_samples(scene, id, None)?, FeatureMask::ALL, nu_mode)?;
    Ok((
        fit,
        StoreEntry {
            vehicle_id: id,
            code,
            params: fit.params,
        },
    ))
}

/// Fits every vehicle of `scene` (in parallel on the current rayon pool) and
/// pairs each fit with the driving code of its whole trajectory.
pub fn fit_training_set(scene: &Scene, cfg: &FitConfig, scoring: &ScoringConfig, nu_mode: NuMode) -> Result<TrainingFit> {
    cfg.validate()?;
    let ids: Vec<VehicleId> = scene.vehicle_ids().collect();
    let outcomes: Vec<_> = ids
        .par_iter()
        .map(|&id| (id, fit_vehicle(scene, id, cfg, scoring, nu_mode)))
        .collect();
    let mut fits = BTreeMap::new();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok((fit, entry)) => {
                fits.insert(id, fit);
                entries.push(entry);
            }
            Err(e) => {
                log::warn!("vehicle {id}: fit skipped: {e}");
                failures.push((id, e.to_string()));
            }
        }
    }
    Ok(TrainingFit {
        store: KnnStore::new(entries),
        fits,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{LaneGeometry, ReplayAgent, Trajectory, VehicleGeometry, VehicleState, NGSIM_DT, FrameState};

    fn lane() -> LaneGeometry {
        LaneGeometry::straight(1, 0.0, -100.0, 3000.0, 3.66)
    }

    /// Model starts 30 m behind a lead that brakes then cruises.
    fn synthetic(params: IdmParams, horizon: usize) -> Episode {
        let geometry = VehicleGeometry::from_dimensions(4.5, 1.8);
        let lead_geometry = VehicleGeometry::from_dimensions(4.5, 1.8);
        let mut lead = VehicleState::new(30.0, 0.0, 0.0, 14.0);
        let mut traffic = Vec::with_capacity(horizon);
        for step in 0..horizon {
            traffic.push(vec![ReplayAgent { id: VehicleId(2), state: lead, geometry: lead_geometry, lane_id: 1 }]);
            let accel = if step < 30 { -1.5 } else { 0.3 };
            lead.v = (lead.v + accel * NGSIM_DT).max(0.0);
            lead.x += lead.v * NGSIM_DT;
        }
        let placeholder: Vec<FrameState> = (0..horizon)
            .map(|i| FrameState { frame: i as u32, state: VehicleState::new(i as f64, 0.0, 0.0, 15.0) })
            .collect();
        let mut episode = Episode {
            vehicle_id: VehicleId(1),
            truth: Trajectory::new(VehicleId(1), NGSIM_DT, placeholder).unwrap(),
            geometry,
            start_lane: lane(),
            lanes: vec![lane()],
            traffic,
            speed_limit: 29.06,
        };
        let scoring = ScoringConfig::default();
        let r = rollout(&episode, &scoring.idm(&episode, params), &scoring.rollout).unwrap();
        assert_eq!(r.model_trajectory.len(), horizon);
        episode.truth = r.model_trajectory;
        episode
    }

    fn quick() -> FitConfig {
        FitConfig { restarts: 3, horizon: 60, ..FitConfig::default() }
    }

    #[test]
    fn recovers_generating_rollout() {
        let truth = IdmParams { a: 1.4, b: 2.0, t_headway: 1.2, d0: 3.0, d1: 2.0 };
        let ep = synthetic(truth, 60);
        let fit = fit_idm(&ep, &quick(), &ScoringConfig::default(), Some(&IdmParams::default())).unwrap();
        assert!(fit.ade <= 0.05, "ade {}", fit.ade);
        assert!(quick().bounds.contains(&fit.params));
    }

    #[test]
    fn beats_the_mean_start_and_is_reproducible() {
        let ep = synthetic(IdmParams { a: 0.8, b: 3.0, t_headway: 2.0, d0: 1.0, d1: 5.0 }, 60);
        let scoring = ScoringConfig::default();
        let start = IdmParams::default();
        let (start_ade, _, _) = scoring.evaluate(&ep, &scoring.idm(&ep, start)).unwrap();
        let a = fit_idm(&ep, &quick(), &scoring, Some(&start)).unwrap();
        let b = fit_idm(&ep, &quick(), &scoring, Some(&start)).unwrap();
        assert!(a.ade <= start_ade);
        assert_eq!(a, b);
    }

    #[test]
    fn flat_objective_converges() {
        // no lead, cruising at the desired speed: every parameter set reproduces the truth
        let v0 = 29.06;
        let frames: Vec<FrameState> = (0..50)
            .map(|i| FrameState { frame: i, state: VehicleState::new(i as f64 * v0 * NGSIM_DT, 0.0, 0.0, v0) })
            .collect();
        let ep = Episode {
            vehicle_id: VehicleId(1),
            truth: Trajectory::new(VehicleId(1), NGSIM_DT, frames).unwrap(),
            geometry: VehicleGeometry::from_dimensions(4.5, 1.8),
            start_lane: lane(),
            lanes: vec![lane()],
            traffic: vec![Vec::new(); 50],
            speed_limit: v0,
        };
        let fit = fit_idm(&ep, &quick(), &ScoringConfig::default(), None).unwrap();
        assert!(fit.ade < 1e-6);
        assert!(fit.converged);
        assert_eq!(fit.n_restarts_used, 1);
    }

    #[test]
    fn empty_scene_gives_empty_store() {
        let scene = Scene::new(Vec::new(), Vec::new(), NGSIM_DT, 29.06).unwrap();
        let out = fit_training_set(&scene, &quick(), &ScoringConfig::default(), NuMode::Absolute).unwrap();
        assert!(out.store.is_empty() && out.failures.is_empty());
    }
}
