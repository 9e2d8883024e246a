use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use drivecode::config::parse_bounds;
use drivecode::pipeline::{self, Study};
use drivecode::scene::{episode_window, Units};
use drivecode::synthetic::{generate, write_ngsim_csv, SyntheticConfig};
use drivecode::{
    gaussian_overlap_risk, rollout, Controller, EllipseGaussian, Error, FeatureMask, IdmBounds, IdmParams, RunConfig,
    VehicleId,
};

#[derive(Parser)]
#[command(name = "drivecode", version, about = "Driver-specific IDM fitting, prediction and evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file; DRIVECODE__SECTION__KEY variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Episode length in frames.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw NGSIM table into a cleaned scene snapshot.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        units: Option<Units>,
        /// Lanes to keep, as a range (`1..5`) or a list (`1,2,3`).
        #[arg(long)]
        lanes: Option<String>,
        /// Lane centerline file (`lane_id,width,x,y`) replacing the estimated lanes.
        #[arg(long)]
        lane_file: Option<PathBuf>,
        /// Where to write the list of removed vehicles.
        #[arg(long)]
        filter_report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit every vehicle of a training scene and write the neighbour store.
    Estimate {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// TOML file with parameter intervals, e.g. `a = { lo = 0.3, hi = 5.0 }`.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict parameters for the vehicles of a scene from their first frames.
    Predict {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        features: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one vehicle inside its recorded traffic.
    Rollout {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        vehicle: u32,
        #[arg(long, value_parser = ["idm", "constvel"], default_value = "idm")]
        controller: String,
        /// Parameters as inline JSON or a JSON file; defaults to the standard set.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate methods on a test scene and write the report table.
    Evaluate {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        methods: Option<String>,
        /// `methods` (default), `code` for the driving-code subsets, `frames` for the window sweep.
        #[arg(long, default_value = "methods")]
        ablation: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        features: Option<String>,
        /// Per-vehicle results.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a report file as csv or markdown.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Write seeded synthetic traffic as an NGSIM-style table.
    Synth {
        #[arg(long, default_value_t = 3)]
        lanes: usize,
        #[arg(long, default_value_t = 8)]
        followers: usize,
        #[arg(long, default_value_t = 150)]
        frames: usize,
        /// First vehicle id, to keep training and test ids apart.
        #[arg(long, default_value_t = 1)]
        first_id: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlap risk of two ellipse Gaussians given as inline JSON or JSON files.
    Risk {
        #[arg(long)]
        ego: String,
        #[arg(long)]
        other: String,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config(_)) => Failure::Usage(e),
            _ => Failure::Pipeline(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn json_arg<T: serde::de::DeserializeOwned>(raw: &str) -> anyhow::Result<T> {
    let text = if raw.trim_start().starts_with('{') {
        raw.to_string()
    } else {
        std::fs::read_to_string(raw).with_context(|| format!("reading {raw}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing JSON from {raw}"))
}

fn parse_lanes(raw: &str) -> Result<Vec<i32>, Error> {
    let bad = || Error::Config(format!("invalid lane selection `{raw}`"));
    if let Some((a, b)) = raw.split_once("..") {
        let lo: i32 = a.trim().parse().map_err(|_| bad())?;
        let hi: i32 = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    raw.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn required<'a>(flag: Option<&'a PathBuf>, configured: Option<&'a PathBuf>, name: &str) -> Result<&'a Path, Error> {
    flag.or(configured)
        .map(PathBuf::as_path)
        .ok_or_else(|| Error::Config(format!("--{name} is required (or set paths.{name})")))
}

fn load_config(global: &Global) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(global.config.as_deref(), std::env::vars())?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = global.threads {
        cfg.runtime.threads = threads;
    }
    if let Some(h) = global.horizon {
        cfg.horizon = h;
    }
    Ok(cfg)
}

fn apply_predict_flags(cfg: &mut RunConfig, k: Option<usize>, frames: Option<usize>, features: Option<&str>) -> Result<(), Error> {
    if let Some(k) = k {
        cfg.predict.k = k;
    }
    if let Some(n) = frames {
        cfg.predict.observe_frames = n;
    }
    if let Some(f) = features {
        cfg.predict.features = f.parse::<FeatureMask>()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest { input, units, lanes, lane_file, filter_report, out } => {
            if let Some(u) = units {
                cfg.ingest.units = u;
            }
            if let Some(l) = lanes {
                cfg.ingest.lanes = parse_lanes(&l)?;
            }
            cfg.validate()?;
            log_run(&cfg);
            let report = pipeline::ingest(&input, lane_file.as_deref(), &cfg, &out, filter_report.as_deref())?;
            log::info!(
                "ingested {} vehicles, retained {} ({} frame gaps, {} wrong leads)",
                report.ingested,
                report.retained,
                report.count(drivecode::scene::RemovalReason::FrameGap),
                report.count(drivecode::scene::RemovalReason::WrongLead)
            );
        }
        Command::Estimate { scene, bounds, restarts, out } => {
            if let Some(path) = bounds {
                cfg.bounds = read_bounds(&path)?;
            }
            if let Some(r) = restarts {
                cfg.fit.restarts = r;
            }
            let scene = required(scene.as_ref(), cfg.paths.scene.as_ref(), "scene")?.to_path_buf();
            cfg.validate()?;
            log_run(&cfg);
            let fit = pipeline::estimate(&scene, &cfg, &out)?;
            for (id, reason) in &fit.failures {
                log::warn!("vehicle {id} not fitted: {reason}");
            }
            log::info!("store of {} entries written to {}", fit.store.len(), out.display());
        }
        Command::Predict { store, scene, frames, k, features, out } => {
            apply_predict_flags(&mut cfg, k, frames, features.as_deref())?;
            let store = required(store.as_ref(), cfg.paths.store.as_ref(), "store")?.to_path_buf();
            let scene = required(scene.as_ref(), cfg.paths.scene.as_ref(), "scene")?.to_path_buf();
            cfg.validate()?;
            log_run(&cfg);
            for (id, reason) in pipeline::predict(&store, &scene, &cfg, &out)? {
                log::warn!("vehicle {id} skipped: {reason}");
            }
        }
        Command::Rollout { scene, vehicle, controller, params, out } => {
            let scene_path = required(scene.as_ref(), cfg.paths.scene.as_ref(), "scene")?.to_path_buf();
            cfg.validate()?;
            log_run(&cfg);
            let scene = pipeline::load_scene(&scene_path)?;
            let episode = episode_window(&scene, VehicleId(vehicle), cfg.horizon)?;
            let scoring = cfg.scoring();
            let c = match controller.as_str() {
                "constvel" => Controller::ConstantVelocity,
                _ => {
                    let p: IdmParams = match params {
                        Some(raw) => json_arg(&raw).map_err(Failure::Usage)?,
                        None => IdmParams::default(),
                    };
                    scoring.idm(&episode, p)
                }
            };
            let result = rollout(&episode, &c, &scoring.rollout)?;
            let (ade, fde) = drivecode::metrics::score(&episode.truth, &result, scoring.ade, scoring.post_collision)?;
            let mut text = String::new();
            for line in cfg.header_lines() {
                text.push_str(&format!("# {line}\n"));
            }
            text.push_str(&format!("# vehicle={vehicle} controller={controller} ade={ade} fde={fde}\n"));
            if let Some(c) = result.collision {
                text.push_str(&format!(
                    "# collision other={} at_fault={} frame={}\n",
                    c.other,
                    c.at_fault,
                    result.collision_frame.unwrap_or_default()
                ));
            }
            text.push_str("frame,x,y,psi,v\n");
            for f in result.model_trajectory.frames() {
                let s = f.state;
                text.push_str(&format!("{},{},{},{},{}\n", f.frame, s.x, s.y, s.psi, s.v));
            }
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            log::info!("ade {ade:.3} m, fde {fde:.3} m");
        }
        Command::Evaluate { store, test, methods, ablation, k, frames, features, records, out } => {
            if let Some(m) = methods {
                cfg.eval.methods = m;
            }
            apply_predict_flags(&mut cfg, k, frames, features.as_deref())?;
            let study: Study = ablation.parse()?;
            let store = required(store.as_ref(), cfg.paths.store.as_ref(), "store")?.to_path_buf();
            let test = required(test.as_ref(), cfg.paths.test.as_ref(), "test")?.to_path_buf();
            let out = required(out.as_ref(), cfg.paths.report.as_ref(), "report")?.to_path_buf();
            cfg.validate()?;
            log_run(&cfg);
            let result = pipeline::evaluate(&store, &test, &cfg, study, &out, records.as_deref())?;
            log::info!("{} vehicles excluded", result.excluded.len());
            eprint!("{}", result.table.to_markdown());
        }
        Command::Report { input, format } => {
            print!("{}", pipeline::render_report(&input, &format)?);
        }
        Command::Synth { lanes, followers, frames, first_id, out } => {
            let synth = SyntheticConfig { seed: cfg.seed, lanes, followers, frames, first_id, ..Default::default() };
            let traffic = generate(&synth)?;
            let mut buf = Vec::new();
            write_ngsim_csv(&traffic.scene, &mut buf)?;
            std::fs::write(&out, buf).with_context(|| format!("writing {}", out.display()))?;
            log::info!("{} vehicles written to {}", traffic.scene.len(), out.display());
        }
        Command::Risk { ego, other } => {
            let ego: EllipseGaussian = json_arg(&ego).map_err(Failure::Usage)?;
            let other: EllipseGaussian = json_arg(&other).map_err(Failure::Usage)?;
            println!("{}", gaussian_overlap_risk(&ego, &other)?);
        }
    }
    Ok(())
}

fn read_bounds(path: &Path) -> anyhow::Result<IdmBounds> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_bounds(&text)?)
}

fn log_run(cfg: &RunConfig) {
    log::info!("config sha256 {} seed {}", cfg.hash(), cfg.seed);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
