//! Command-line front end. Every command prints JSON on stdout; failures
//! print an [`ApiError`] on stderr and exit nonzero.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use platetrack_core::config::AppConfig;
use platetrack_core::detector::{load_geometry_map, load_score_map, RotatedBox};
use platetrack_core::eval::{evaluate, load_truth, predict_frames, DEFAULT_MATCH_IOU};
use platetrack_core::font::{render_glyph, CHARSET};
use platetrack_core::imaging::{load_pnm, save_pnm, to_grayscale};
use platetrack_core::pipeline::{
    detect_plates, replay_journal, run, Backend, FrameDetector, FrameSource, PipelineConfig, SightingSink, SourceKind,
    SpoolingSink, StoreSink,
};
use platetrack_core::recognizer::{build_template_library, recognize_plate, DEFAULT_GLYPH_H, DEFAULT_GLYPH_W};
use platetrack_core::synth::{generate_corpus, CorpusSpec};
use platetrack_core::trackstore::{Location, Role, StoreOptions, TrackStore};
use platetrack_core::TemplateLibrary;

use crate::api::AppState;
use crate::error::ApiError;
use crate::remote::RemoteSink;

#[derive(Debug, Parser)]
#[command(name = "platetrack", version, about = "License-plate detection, recognition and sighting tracking")]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Heuristic,
    East,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect plate boxes in one image.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum, default_value = "heuristic")]
        backend: BackendArg,
        #[arg(long, required_if_eq("backend", "east"))]
        score_map: Option<PathBuf>,
        #[arg(long, required_if_eq("backend", "east"))]
        geom_map: Option<PathBuf>,
        /// Write the boxes here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read the text of a plate crop.
    Recognize {
        #[arg(long)]
        image: PathBuf,
        /// Template directory; the built-in font when omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Process a directory of frames and deliver sightings.
    Run(RunArgs),
    /// Deliver the sightings in a journal written by an earlier run.
    Replay {
        #[arg(long)]
        journal: PathBuf,
        #[command(flatten)]
        target: Target,
    },
    /// Build a template library from a directory of `<char>.pgm` glyphs.
    MakeTemplates {
        #[arg(long)]
        glyphs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Characters the library must cover.
        #[arg(long, default_value = CHARSET)]
        whitelist: String,
    },
    /// Write the built-in font as `<char>.pgm` glyph files.
    RenderGlyphs {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        scale: usize,
    },
    /// Generate a labelled synthetic frame corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 10)]
        plates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write per-frame score/geometry maps.
        #[arg(long)]
        maps: bool,
    },
    /// Score detection and reading against a truth file.
    Eval {
        #[arg(long, required_unless_present = "predictions")]
        frames: Option<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value = "heuristic")]
        backend: BackendArg,
        #[arg(long)]
        maps: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Score this prediction file (truth format) instead of running detection.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Manage users in a store directory.
    User {
        #[command(subcommand)]
        action: UserAction,
    },
    /// Manage cameras in a store directory.
    Camera {
        #[command(subcommand)]
        action: CameraAction,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub camera: String,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub backend: BackendArg,
    /// Directory holding `<stem>.score.emap` / `<stem>.geo.emap`; defaults to the frame directory.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Seconds between frames.
    #[arg(long, default_value_t = 1.0 / 30.0)]
    pub interval: f64,
    /// Timestamp of the first frame, UTC ms; defaults to now.
    #[arg(long)]
    pub start_ms: Option<i64>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub target: Target,
    /// Where undelivered sightings are spooled in remote mode.
    #[arg(long, default_value = "platetrack-spool.jsonl")]
    pub journal: PathBuf,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Base URL of a running service.
    #[arg(long, requires = "api_key", conflicts_with = "store")]
    pub serve_url: Option<String>,
    #[arg(long)]
    pub api_key: Option<String>,
    /// Local store directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum UserAction {
    Add {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        username: String,
        #[arg(long, conflicts_with = "password_stdin")]
        password: Option<String>,
        /// Read the password from the first line of stdin.
        #[arg(long)]
        password_stdin: bool,
        #[arg(long, default_value = "basic")]
        role: String,
    },
    Rm {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        username: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum CameraAction {
    Add {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "")]
        label: String,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
    },
    Rm {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        id: String,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = ApiError::new(axum::http::StatusCode::BAD_REQUEST, "usage", e.to_string().trim());
            eprintln!("{}", err.to_json());
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), ApiError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<AppConfig, ApiError> {
    match path {
        Some(p) => Ok(AppConfig::load(p)?),
        None => Ok(AppConfig::default()),
    }
}

fn store_dir(arg: Option<PathBuf>, cfg: &AppConfig) -> Result<PathBuf, ApiError> {
    arg.or_else(|| cfg.store_dir.clone())
        .ok_or_else(|| ApiError::bad_request("no store directory: pass --store or set store_dir in the config"))
}

fn open_store(dir: &Path, cfg: &AppConfig) -> Result<TrackStore, ApiError> {
    let store = TrackStore::open(dir, StoreOptions { sync: true, pbkdf2_iterations: cfg.pbkdf2_iterations })?;
    for w in store.recovery_warnings() {
        log::warn!("{w}");
    }
    Ok(store)
}

fn load_library(dir: Option<&Path>) -> Result<TemplateLibrary, ApiError> {
    match dir {
        None => Ok(TemplateLibrary::builtin()),
        Some(d) => {
            let whitelist: Vec<char> = CHARSET.chars().collect();
            Ok(build_template_library(d, &whitelist, DEFAULT_GLYPH_W, DEFAULT_GLYPH_H)?)
        }
    }
}

fn backend(arg: BackendArg, maps: Option<PathBuf>) -> Backend {
    match arg {
        BackendArg::Heuristic => Backend::Heuristic,
        BackendArg::East => Backend::EastMaps { map_dir: maps },
    }
}

fn read_password(password: Option<String>, from_stdin: bool) -> Result<String, ApiError> {
    if from_stdin {
        let mut line = String::new();
        std::io::stdin().lock().read_line(&mut line)?;
        return Ok(line.trim_end_matches(['\r', '\n']).to_string());
    }
    password.ok_or_else(|| ApiError::bad_request("pass --password or --password-stdin"))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    report: &'a platetrack_core::pipeline::ThroughputReport,
    sightings: usize,
    stored: usize,
    spooled: usize,
    failed: usize,
    frame_errors: &'a [platetrack_core::pipeline::FrameError],
    journal: Option<&'a Path>,
}

fn sink_for(target: &Target, cfg: &AppConfig, journal: Option<&Path>) -> Result<Box<dyn SightingSink>, ApiError> {
    if let Some(url) = &target.serve_url {
        let key = target.api_key.as_deref().unwrap_or_default();
        let remote = RemoteSink::new(url, key, Duration::from_secs(10))?;
        return Ok(match journal {
            Some(j) => Box::new(SpoolingSink::new(remote, j)),
            None => Box::new(remote),
        });
    }
    let dir = store_dir(target.store.clone(), cfg)?;
    Ok(Box::new(StoreSink::new(Arc::new(open_store(&dir, cfg)?))))
}

fn execute(cli: Cli) -> Result<(), ApiError> {
    let cfg = load_config(cli.config.as_deref())?;
    let pipeline: &PipelineConfig = &cfg.pipeline;
    match cli.command {
        Command::Detect { image, backend, score_map, geom_map, out } => {
            let img = to_grayscale(&load_pnm(&image)?);
            let boxes: Vec<RotatedBox> = match backend {
                BackendArg::Heuristic => detect_plates(&img, FrameDetector::Heuristic, &pipeline.detector)?,
                BackendArg::East => {
                    let score = load_score_map(score_map.expect("required by clap"))?;
                    let geometry = load_geometry_map(geom_map.expect("required by clap"))?;
                    detect_plates(&img, FrameDetector::Maps { score: &score, geometry: &geometry }, &pipeline.detector)?
                }
            };
            match out {
                Some(path) => std::fs::write(path, serde_json::to_string_pretty(&boxes)?)?,
                None => print_json(&boxes)?,
            }
        }
        Command::Recognize { image, templates } => {
            let lib = load_library(templates.as_deref())?;
            let read = recognize_plate(&load_pnm(&image)?, &lib, &pipeline.recognize)?;
            print_json(&read)?;
        }
        Command::Run(args) => {
            let lib = load_library(args.templates.as_deref())?;
            let mut source = FrameSource::new(SourceKind::Directory(args.frames.clone()), &args.camera, args.interval)?;
            if let Some(ms) = args.start_ms {
                source = source.with_start_ms(ms);
            }
            let remote = args.target.serve_url.is_some();
            if !remote {
                let dir = store_dir(args.target.store.clone(), &cfg)?;
                if open_store(&dir, &cfg)?.camera(&args.camera).is_none() {
                    return Err(ApiError::not_found(format!("unknown camera '{}'", args.camera)));
                }
            }
            let journal = remote.then_some(args.journal.as_path());
            let mut sink = sink_for(&args.target, &cfg, journal)?;
            let outcome = run(&source, &backend(args.backend, args.maps), &lib, pipeline, sink.as_mut())?;
            print_json(&RunSummary {
                report: &outcome.report,
                sightings: outcome.sightings.len(),
                stored: outcome.stored,
                spooled: outcome.spooled,
                failed: outcome.failed,
                frame_errors: &outcome.frame_errors,
                journal: journal.filter(|_| outcome.spooled > 0),
            })?;
        }
        Command::Replay { journal, target } => {
            let mut sink = sink_for(&target, &cfg, None)?;
            print_json(&replay_journal(&journal, sink.as_mut())?)?;
        }
        Command::MakeTemplates { glyphs, out, whitelist } => {
            let chars: Vec<char> = whitelist.chars().collect();
            let lib = build_template_library(&glyphs, &chars, DEFAULT_GLYPH_W, DEFAULT_GLYPH_H)?;
            lib.save(&out)?;
            print_json(&serde_json::json!({ "templates": lib.len(), "out": out }))?;
        }
        Command::RenderGlyphs { out, scale } => {
            if scale == 0 {
                return Err(ApiError::bad_request("scale must be positive"));
            }
            std::fs::create_dir_all(&out)?;
            for c in CHARSET.chars() {
                let glyph = render_glyph(c, scale).expect("charset glyphs exist");
                save_pnm(&glyph, out.join(format!("{c}.pgm")))?;
            }
            print_json(&serde_json::json!({ "glyphs": CHARSET.len(), "out": out }))?;
        }
        Command::Synth { out, frames, plates, seed, maps } => {
            let spec = CorpusSpec { frames, plates, write_maps: maps, ..CorpusSpec::default() };
            let (truth, texts) = generate_corpus(&out, &spec, &mut StdRng::seed_from_u64(seed))?;
            print_json(&serde_json::json!({ "frames": truth.len(), "plates": texts, "out": out }))?;
        }
        Command::Eval { frames, truth, backend: b, maps, templates, predictions } => {
            let truth = load_truth(&truth)?;
            let pred = match predictions {
                Some(p) => load_truth(&p)?,
                None => {
                    let lib = load_library(templates.as_deref())?;
                    let frames = frames.expect("required by clap");
                    predict_frames(&frames, truth.keys().cloned(), &backend(b, maps), &lib, pipeline)?
                }
            };
            print_json(&evaluate(&pred, &truth, DEFAULT_MATCH_IOU))?;
        }
        Command::Serve { store, bind } => {
            let dir = store_dir(store, &cfg)?;
            let bind = bind.unwrap_or_else(|| cfg.bind.clone());
            let store = Arc::new(open_store(&dir, &cfg)?);
            let state = Arc::new(AppState::new(store, (cfg.token_ttl_s as i64).saturating_mul(1000)));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                log::info!("listening on {}", listener.local_addr()?);
                crate::server::serve(state, listener, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?;
        }
        Command::User { action } => match action {
            UserAction::Add { store, username, password, password_stdin, role } => {
                let role: Role = role.parse()?;
                let password = read_password(password, password_stdin)?;
                let store = open_store(&store_dir(store, &cfg)?, &cfg)?;
                print_json(&store.create_user(&username, &password, role)?)?;
            }
            UserAction::Rm { store, username } => {
                open_store(&store_dir(store, &cfg)?, &cfg)?.delete_user(&username)?;
                print_json(&serde_json::json!({ "deleted": username }))?;
            }
        },
        Command::Camera { action } => match action {
            CameraAction::Add { store, id, label, lat, lon } => {
                let store = open_store(&store_dir(store, &cfg)?, &cfg)?;
                let (camera, api_key) = store.create_camera(&id, &label, Location { lat, lon })?;
                print_json(&serde_json::json!({ "camera": camera, "api_key": api_key }))?;
            }
            CameraAction::Rm { store, id } => {
                open_store(&store_dir(store, &cfg)?, &cfg)?.delete_camera(&id)?;
                print_json(&serde_json::json!({ "deleted": id }))?;
            }
        },
    }
    Ok(())
}
