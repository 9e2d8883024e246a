//! Displacement metrics and aggregated report tables.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::RolloutResult;
use crate::scene::{FrameState, Trajectory, VehicleId};

/// Divisor used by [`ade`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdeNormalization {
    /// Divide by the number of points summed (a true mean).
    #[default]
    Points,
    /// Divide by the number of steps, one less than the number of points.
    Steps,
}

/// What happens to the modeled trajectory after a collision or early termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostCollision {
    /// Hold the last modeled pose for the rest of the horizon.
    #[default]
    Freeze,
    /// Score only the frames that were simulated.
    Truncate,
}

fn check_aligned(truth: &Trajectory, model: &Trajectory) -> Result<()> {
    if truth.len() != model.len() {
        return Err(Error::LengthMismatch {
            truth: truth.len(),
            model: model.len(),
        });
    }
    if truth.first_frame() != model.first_frame() {
        return Err(Error::Format(format!(
            "trajectories start at different frames ({} vs {})",
            truth.first_frame(),
            model.first_frame()
        )));
    }
    Ok(())
}

/// Average displacement error over all points.
pub fn ade(truth: &Trajectory, model: &Trajectory, norm: AdeNormalization) -> Result<f64> {
    check_aligned(truth, model)?;
    let sum: f64 = truth
        .states()
        .zip(model.states())
        .map(|(g, m)| (m.x - g.x).hypot(m.y - g.y))
        .sum();
    let n = match norm {
        AdeNormalization::Points => truth.len(),
        AdeNormalization::Steps => truth.len() - 1,
    };
    Ok(sum / n as f64)
}

/// Final displacement error.
pub fn fde(truth: &Trajectory, model: &Trajectory) -> Result<f64> {
    check_aligned(truth, model)?;
    let g = truth.frames().last().unwrap().state;
    let m = model.frames().last().unwrap().state;
    Ok((m.x - g.x).hypot(m.y - g.y))
}

/// Pairs a rollout with the ground truth it is scored against.
pub fn scoring_pair(
    truth: &Trajectory,
    result: &RolloutResult,
    policy: PostCollision,
) -> Result<(Trajectory, Trajectory)> {
    let model = &result.model_trajectory;
    if model.len() >= truth.len() {
        return Ok((truth.clone(), model.clone()));
    }
    match policy {
        PostCollision::Truncate => Ok((truth.window(0, model.len())?, model.clone())),
        PostCollision::Freeze => {
            let last = model.frames().last().unwrap().state;
            let mut frames = model.frames().to_vec();
            frames.extend(truth.frames()[model.len()..].iter().map(|f| FrameState {
                frame: f.frame,
                state: last,
            }));
            Ok((truth.clone(), Trajectory::new(model.vehicle_id, model.dt, frames)?))
        }
    }
}

/// ADE and FDE of a rollout under the given post-collision policy.
pub fn score(
    truth: &Trajectory,
    result: &RolloutResult,
    norm: AdeNormalization,
    policy: PostCollision,
) -> Result<(f64, f64)> {
    let (t, m) = scoring_pair(truth, result, policy)?;
    Ok((ade(&t, &m, norm)?, fde(&t, &m)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub vehicle_id: VehicleId,
    pub method: String,
    pub ade: f64,
    pub fde: f64,
    pub collided_at_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    pub mean_ade: f64,
    pub se_ade: f64,
    pub mean_fde: f64,
    pub se_fde: f64,
    pub at_fault_collisions: usize,
}

/// Mean and standard error (sample deviation over sqrt(n)).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub const REPORT_COLUMNS: &str = "method,n,mean_ade,se_ade,mean_fde,se_fde,at_fault_collisions";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    /// Aggregates records into one row per method, in the order methods first appear.
    pub fn aggregate(records: &[EvalRecord]) -> Self {
        let mut order: Vec<&str> = Vec::new();
        for r in records {
            if !order.contains(&r.method.as_str()) {
                order.push(&r.method);
            }
        }
        let rows = order
            .into_iter()
            .map(|method| {
                let mine: Vec<&EvalRecord> = records.iter().filter(|r| r.method == method).collect();
                let ades: Vec<f64> = mine.iter().map(|r| r.ade).collect();
                let fdes: Vec<f64> = mine.iter().map(|r| r.fde).collect();
                let (mean_ade, se_ade) = mean_and_se(&ades);
                let (mean_fde, se_fde) = mean_and_se(&fdes);
                ReportRow {
                    method: method.to_string(),
                    n: mine.len(),
                    mean_ade,
                    se_ade,
                    mean_fde,
                    se_fde,
                    at_fault_collisions: mine.iter().filter(|r| r.collided_at_fault).count(),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method, r.n, r.mean_ade, r.se_ade, r.mean_fde, r.se_fde, r.at_fault_collisions
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Method | n | ADE (m) | FDE (m) | Collisions |\n|---|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {} |",
                r.method, r.n, r.mean_ade, r.se_ade, r.mean_fde, r.se_fde, r.at_fault_collisions
            );
        }
        out
    }

    /// Reads a report CSV, skipping `#` header lines.
    pub fn from_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        if reader.headers()?.iter().collect::<Vec<_>>().join(",") != REPORT_COLUMNS {
            return Err(Error::Format(format!("expected columns `{REPORT_COLUMNS}`")));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = || Error::parse(i + 2, "malformed report row");
            let f = |j: usize| rec.get(j).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
            let u = |j: usize| rec.get(j).and_then(|v| v.parse::<usize>().ok()).ok_or_else(bad);
            rows.push(ReportRow {
                method: rec.get(0).ok_or_else(bad)?.to_string(),
                n: u(1)?,
                mean_ade: f(2)?,
                se_ade: f(3)?,
                mean_fde: f(4)?,
                se_fde: f(5)?,
                at_fault_collisions: u(6)?,
            });
        }
        Ok(Self { rows })
    }
}

pub fn records_to_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from("vehicle_id,method,ade,fde,collided_at_fault\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.vehicle_id, r.method, r.ade, r.fde, r.collided_at_fault
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::Collision;
    use crate::scene::VehicleState;
    use proptest::prelude::*;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        let frames = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| FrameState {
                frame: i as u32,
                state: VehicleState::new(x, y, 0.0, 0.0),
            })
            .collect();
        Trajectory::new(VehicleId(1), 0.1, frames).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let t = traj(&[(0.0, 0.0), (1.0, 2.0), (3.0, 1.0)]);
        assert_eq!(ade(&t, &t, AdeNormalization::Points).unwrap(), 0.0);
        assert_eq!(fde(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_three_four_five() {
        let t = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (5.0, 5.0)]);
        let m = traj(&[(3.0, 4.0), (4.0, 4.0), (5.0, 5.0), (8.0, 9.0)]);
        assert_eq!(ade(&t, &m, AdeNormalization::Points).unwrap(), 5.0);
        assert_eq!(fde(&t, &m).unwrap(), 5.0);
    }

    #[test]
    fn normalization_conventions() {
        let t = traj(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let m = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(ade(&t, &m, AdeNormalization::Points).unwrap(), 1.0);
        assert_eq!(ade(&t, &m, AdeNormalization::Steps).unwrap(), 1.5);
    }

    #[test]
    fn fde_hand_value() {
        let t = traj(&[(1.0, 1.0), (0.0, 0.0)]);
        let m = traj(&[(1.0, 1.0), (6.0, 8.0)]);
        assert_eq!(fde(&t, &m).unwrap(), 10.0);
    }

    #[test]
    fn length_mismatch() {
        let t = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let m = traj(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(ade(&t, &m, AdeNormalization::Points), Err(Error::LengthMismatch { .. })));
        assert!(matches!(fde(&t, &m), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn freeze_and_truncate_policies() {
        let t = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let result = RolloutResult {
            model_trajectory: traj(&[(0.0, 0.0), (1.0, 0.0)]),
            collision: Some(Collision { other: VehicleId(2), at_fault: true }),
            collision_frame: Some(1),
            terminated_early: None,
        };
        let (a, f) = score(&t, &result, AdeNormalization::Points, PostCollision::Freeze).unwrap();
        assert_eq!((a, f), (0.75, 2.0));
        let (a, f) = score(&t, &result, AdeNormalization::Points, PostCollision::Truncate).unwrap();
        assert_eq!((a, f), (0.0, 0.0));
    }

    #[test]
    fn standard_error_uses_sample_deviation() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn report_csv_round_trip() {
        let recs = vec![
            EvalRecord { vehicle_id: VehicleId(1), method: "constvel".into(), ade: 1.0, fde: 2.0, collided_at_fault: true },
            EvalRecord { vehicle_id: VehicleId(1), method: "avg".into(), ade: 0.5, fde: 1.0, collided_at_fault: false },
            EvalRecord { vehicle_id: VehicleId(2), method: "constvel".into(), ade: 3.0, fde: 4.0, collided_at_fault: false },
            EvalRecord { vehicle_id: VehicleId(2), method: "avg".into(), ade: 0.25, fde: 0.5, collided_at_fault: false },
        ];
        let table = ReportTable::aggregate(&recs);
        assert_eq!(table.rows[0].method, "constvel");
        assert_eq!(table.rows[0].at_fault_collisions, 1);
        assert_eq!(table.rows[1].mean_ade, 0.375);
        let back = ReportTable::from_csv(format!("# header\n{}", table.to_csv()).as_bytes()).unwrap();
        assert_eq!(back, table);
        assert!(table.to_markdown().contains("| constvel | 2 | 2.00 ± 1.00 |"));
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..40)
    }

    proptest! {
        #[test]
        fn ade_bounded_by_max_pointwise(a in points(), seed in any::<u64>()) {
            let b: Vec<(f64, f64)> = a
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| (x + ((seed >> (i % 60)) & 7) as f64, y - (i % 3) as f64))
                .collect();
            let (t, m) = (traj(&a), traj(&b));
            let max = a.iter().zip(&b).map(|(p, q)| (p.0 - q.0).hypot(p.1 - q.1)).fold(0.0, f64::max);
            let v = ade(&t, &m, AdeNormalization::Points).unwrap();
            prop_assert!(v >= 0.0 && v <= max + 1e-12);
            prop_assert_eq!(ade(&t, &t, AdeNormalization::Points).unwrap(), 0.0);
        }
    }
}
