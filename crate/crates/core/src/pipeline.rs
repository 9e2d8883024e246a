//! File-level pipeline stages shared by the command-line tool and the tests.
//! Every stage reads its declared inputs and writes its declared outputs only.

use std::fs;
use std::path::Path;

use crate::benchmark::{ablation_driving_code, ablation_frames, run_benchmark, BenchmarkOutput, ABLATION_FRAMES};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimation::{fit_training_set, TrainingFit};
use crate::metrics::{records_to_csv, ReportTable};
use crate::predictor::{predict_all, write_params, KnnStore};
use crate::scene::{hygiene_filter, ingest_ngsim, read_lanes, read_scene, write_scene, FilterReport, Scene, VehicleId};

/// Runs `f` on a dedicated pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header(cfg: &RunConfig, lines: &[String]) -> String {
    cfg.header_lines()
        .iter()
        .chain(lines)
        .map(|l| format!("# {l}\n"))
        .collect()
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    read_scene(std::io::BufReader::new(open(path)?))
}

pub fn load_store(path: &Path) -> Result<KnnStore> {
    KnnStore::load(std::io::BufReader::new(open(path)?))
}

/// Raw NGSIM table to a cleaned scene snapshot. Lane polylines are read from
/// `lanes` when given. The filter report goes to `report` when given.
pub fn ingest(
    input: &Path,
    lanes: Option<&Path>,
    cfg: &RunConfig,
    out: &Path,
    report: Option<&Path>,
) -> Result<FilterReport> {
    let mut ingest_cfg = cfg.ingest.clone();
    if let Some(path) = lanes {
        ingest_cfg.lane_geometry = Some(read_lanes(open(path)?)?);
    }
    let raw = ingest_ngsim(std::io::BufReader::new(open(input)?), &ingest_cfg)?;
    let (scene, filter) = hygiene_filter(raw);
    let mut buf = Vec::new();
    let mut extra = cfg.header_lines();
    extra.push(format!("ingested={} retained={}", filter.ingested, filter.retained));
    write_scene(&mut buf, &scene, &extra)?;
    write(out, &buf)?;
    if let Some(path) = report {
        write(path, filter.to_csv().as_bytes())?;
    }
    Ok(filter)
}

/// Fits every training vehicle and writes the nearest-neighbour store.
pub fn estimate(scene: &Path, cfg: &RunConfig, out: &Path) -> Result<TrainingFit> {
    cfg.validate()?;
    let scene = load_scene(scene)?;
    let fit = with_threads(cfg.runtime.threads, || {
        fit_training_set(&scene, &cfg.fit_config(), &cfg.scoring(), cfg.predict.nu_mode)
    })??;
    let mut buf = Vec::new();
    let mut extra = cfg.header_lines();
    extra.push(format!("fitted={} failed={}", fit.fits.len(), fit.failures.len()));
    fit.store.save(&mut buf, &extra)?;
    write(out, &buf)?;
    Ok(fit)
}

/// Predicts parameters for every vehicle of `scene`; returns the skipped vehicles.
pub fn predict(store: &Path, scene: &Path, cfg: &RunConfig, out: &Path) -> Result<Vec<(VehicleId, String)>> {
    cfg.validate()?;
    let store = load_store(store)?;
    let scene = load_scene(scene)?;
    let (params, skipped) = predict_all(&store, &scene, &cfg.predict)?;
    let mut buf = Vec::new();
    write_params(&mut buf, &params, &cfg.header_lines())?;
    write(out, &buf)?;
    Ok(skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Study {
    /// One row per configured method.
    #[default]
    Methods,
    /// Prediction with each driving-code subset.
    DrivingCode,
    /// Prediction with each observation window length.
    Frames,
}

impl std::str::FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "methods" => Ok(Study::Methods),
            "code" | "driving-code" => Ok(Study::DrivingCode),
            "frames" => Ok(Study::Frames),
            other => Err(Error::Config(format!("unknown study `{other}`"))),
        }
    }
}

/// Runs the benchmark and writes the report table (and optionally per-vehicle records).
pub fn evaluate(
    store: &Path,
    test: &Path,
    cfg: &RunConfig,
    study: Study,
    report: &Path,
    records: Option<&Path>,
) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let store = load_store(store)?;
    let scene = load_scene(test)?;
    let bench = cfg.benchmark();
    let methods = cfg.methods()?;
    let out = with_threads(cfg.runtime.threads, || match study {
        Study::Methods => run_benchmark(&store, &scene, &methods, &bench),
        Study::DrivingCode => ablation_driving_code(&store, &scene, &bench),
        Study::Frames => ablation_frames(&store, &scene, &ABLATION_FRAMES, &bench),
    })??;
    let extra = [format!("vehicles={} excluded={}", scene.len(), out.excluded.len())];
    let text = header(cfg, &extra) + &out.table.to_csv();
    write(report, text.as_bytes())?;
    if let Some(path) = records {
        write(path, (header(cfg, &[]) + &records_to_csv(&out.records)).as_bytes())?;
    }
    Ok(out)
}

/// Re-renders a report file as `csv` or `md`.
pub fn render_report(path: &Path, format: &str) -> Result<String> {
    let table = ReportTable::from_csv(open(path)?)?;
    match format {
        "csv" => Ok(table.to_csv()),
        "md" | "markdown" => Ok(table.to_markdown()),
        other => Err(Error::Config(format!("unknown report format `{other}`"))),
    }
}
