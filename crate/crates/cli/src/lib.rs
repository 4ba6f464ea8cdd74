//! `thinjulia plan | verify | render | probe`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage, configuration or I/O
//! error.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thinjulia_core::dynamics::{classify, itinerary_class, joining_stage, ItineraryClass, Status};
use thinjulia_core::geometry::{locate, pull_back_annulus_around, write_annuli_csv, Location};
use thinjulia_core::params::{default_b, BoundMargins, PlanPolicy};
use thinjulia_core::render::{
    classify_grid, colorize, default_window, extract_julia_samples, grid_stats, overlay_annuli, resolve_overlays,
    write_image, write_julia_csv, OverlaySpec, Palette, RenderConfig, Window, OVERLAY,
};
use thinjulia_core::verify::{self, CheckStatus, VerifyOptions};
use thinjulia_core::{build_sequence, Complex64, ParameterSequence};

use config::{parse_resolution, Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "thinjulia", version, about = "Plan, check, render and probe iterated Julia sets of unbounded quadratic sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML manifest; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of stages K.
    #[arg(long, global = true, value_name = "K")]
    pub depth: Option<usize>,
    /// Stage values, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true, value_name = "B1,B2,..")]
    pub b: Option<Vec<f64>>,
    /// Block exponents, comma separated; one per stage.
    #[arg(long, global = true, value_delimiter = ',', value_name = "M1,M2,..")]
    pub m: Option<Vec<u32>>,
    /// Keep exponent overrides that break the bounds (for falsification runs).
    #[arg(long, global = true)]
    pub allow_invalid_overrides: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sequence and print b, a, m, M and the bound margins.
    Plan,
    /// Run the numeric checks and write verify.json and verify.csv.
    Verify {
        /// Run one check family only.
        #[arg(long, value_name = "NAME")]
        only: Option<String>,
    },
    /// Classify a pixel grid and write render_m<m>.ppm and julia_m<m>.csv.
    Render {
        /// Render time; repeatable.
        #[arg(long = "time", value_name = "M")]
        times: Vec<u64>,
        #[arg(long, value_name = "WxH")]
        res: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "CX,CY,W,H")]
        window: Option<Vec<f64>>,
        /// A:k, B:k:CODE or B:k:*; repeatable.
        #[arg(long = "overlay", value_name = "SPEC")]
        overlays: Vec<String>,
        #[arg(long, value_name = "NAME")]
        palette: Option<String>,
        #[arg(long, value_name = "K")]
        horizon: Option<usize>,
    },
    /// Classify one point and list the pulled-back annuli around it.
    Probe {
        /// Point as RE,IM.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1, value_name = "RE,IM")]
        point: Vec<f64>,
        #[arg(long, default_value_t = 0, value_name = "M")]
        time: u64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Params(#[from] thinjulia_core::params::ParamsError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    Render(#[from] thinjulia_core::render::RenderError),
    #[error(transparent)]
    Geometry(#[from] thinjulia_core::geometry::GeometryError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn flag_config(cli: &Cli) -> Config {
    let c = &cli.common;
    let mut cfg = Config {
        b: c.b.clone(),
        m: c.m.clone(),
        allow_invalid_overrides: c.allow_invalid_overrides.then_some(true),
        depth: c.depth,
        seed: c.seed,
        out: c.out.clone(),
        ..Config::default()
    };
    if let Command::Render {
        times,
        res,
        window,
        overlays,
        palette,
        horizon,
    } = &cli.command
    {
        cfg.times = (!times.is_empty()).then(|| times.clone());
        cfg.resolution = res.clone();
        cfg.window = window.as_ref().and_then(|w| <[f64; 4]>::try_from(w.as_slice()).ok());
        cfg.overlays = (!overlays.is_empty()).then(|| overlays.clone());
        cfg.palette = palette.clone();
        cfg.horizon = *horizon;
    }
    cfg
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if let Command::Render { window: Some(w), .. } = &cli.command {
        if w.len() != 4 {
            return Err(ConfigError::Invalid(format!("--window needs CX,CY,W,H, got {} numbers", w.len())).into());
        }
    }
    let file = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let cfg = file.overlay(flag_config(cli));
    let seq = sequence_from(&cfg)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Plan => cmd_plan(&seq, &out),
        Command::Verify { only } => cmd_verify(&seq, &cfg, &out, only.as_deref()),
        Command::Render { .. } => cmd_render(&seq, &cfg, &out),
        Command::Probe { point, time } => {
            if point.len() != 2 {
                return Err(ConfigError::Invalid("--point needs RE,IM".into()).into());
            }
            cmd_probe(&seq, Complex64::new(point[0], point[1]), *time)
        }
    }
}

/// Builds the sequence from `b`, `m`, `depth` and `allow_invalid_overrides`.
pub fn sequence_from(cfg: &Config) -> Result<ParameterSequence, CliError> {
    let mut b = match (&cfg.b, cfg.depth) {
        (Some(b), _) => b.clone(),
        (None, depth) => default_b(depth.unwrap_or(3)),
    };
    if let Some(depth) = cfg.depth {
        if depth == 0 || depth > b.len() {
            return Err(ConfigError::Invalid(format!("depth {depth} needs 1..={} stage values", b.len())).into());
        }
        b.truncate(depth);
    }
    let policy = match &cfg.m {
        None => PlanPolicy::default(),
        Some(m) => {
            if m.len() < b.len() {
                return Err(ConfigError::Invalid(format!("{} exponents given for {} stages", m.len(), b.len())).into());
            }
            if cfg.allow_invalid_overrides.unwrap_or(false) {
                PlanPolicy::unchecked(&m[..b.len()])
            } else {
                PlanPolicy::explicit(m[..b.len()].iter().copied().map(Some).collect())
            }
        }
    };
    Ok(build_sequence(&b, &policy)?)
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(format!("cannot create {}", out.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(format!("cannot write {}", path.display())))
}

#[derive(Debug, Serialize)]
struct StageRow {
    k: usize,
    b: f64,
    a: f64,
    m: u32,
    checkpoint: u64,
    margins: BoundMargins,
}

#[derive(Debug, Serialize)]
struct Plan<'a> {
    sequence: &'a ParameterSequence,
    stages: Vec<StageRow>,
}

pub fn cmd_plan(seq: &ParameterSequence, out: &Path) -> Result<i32, CliError> {
    let stages: Vec<StageRow> = (1..=seq.depth())
        .map(|k| StageRow {
            k,
            b: seq.b(k),
            a: seq.a(k),
            m: seq.m(k),
            checkpoint: seq.checkpoint(k),
            margins: seq.margins(k),
        })
        .collect();
    let mut stdout = io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{:>3} {:>12} {:>12} {:>4} {:>6} {:>12} {:>12} {:>10} {:>10}",
        "k", "b", "a", "m", "M_k", "inv1", "inv2", "annulus", "contract"
    );
    for s in &stages {
        let _ = writeln!(
            stdout,
            "{:>3} {:>12.6} {:>12.6} {:>4} {:>6} {:>12.4} {:>12.4} {:>10.4} {:>10.4}",
            s.k,
            s.b,
            s.a,
            s.m,
            s.checkpoint,
            s.margins.invariance1,
            s.margins.invariance2,
            s.margins.annulus,
            s.margins.contraction
        );
    }
    for adv in seq.advisories() {
        let _ = writeln!(stdout, "advisory: {}", serde_json::to_string(adv)?);
    }
    create_dir(out)?;
    let mut json = serde_json::to_vec_pretty(&Plan { sequence: seq, stages })?;
    json.push(b'\n');
    write_file(&out.join("plan.json"), &json)?;
    Ok(EXIT_OK)
}

pub fn verify_options(cfg: &Config) -> VerifyOptions {
    let d = VerifyOptions::default();
    VerifyOptions {
        seed: cfg.seed.unwrap_or(d.seed),
        samples: cfg.samples.unwrap_or(d.samples),
        radii_samples: cfg.radii_samples.unwrap_or(d.radii_samples),
        grid_n: cfg.grid_n.unwrap_or(d.grid_n),
        codes: cfg.codes.unwrap_or(d.codes),
    }
}

pub fn cmd_verify(seq: &ParameterSequence, cfg: &Config, out: &Path, only: Option<&str>) -> Result<i32, CliError> {
    let reports = verify::run_selected(seq, &verify_options(cfg), only)?;
    let mut stdout = io::stdout().lock();
    for r in &reports {
        let _ = writeln!(
            stdout,
            "{:<26} {:<13} margin {:>12.4e}  samples {:>6}  {:>8.1} ms",
            r.name,
            r.status.to_string(),
            r.margin,
            r.samples,
            r.wall_time.as_secs_f64() * 1e3
        );
    }
    create_dir(out)?;
    let mut json = Vec::new();
    verify::write_json(&reports, &mut json)?;
    write_file(&out.join("verify.json"), &json)?;
    let mut csv = Vec::new();
    verify::write_csv(&reports, &mut csv)?;
    write_file(&out.join("verify.csv"), &csv)?;

    let failed = reports.iter().filter(|r| r.status == CheckStatus::Fail).count();
    let open = reports.iter().filter(|r| r.status == CheckStatus::Indeterminate).count();
    let _ = writeln!(
        stdout,
        "{} checks: {} pass, {failed} fail, {open} indeterminate",
        reports.len(),
        reports.len() - failed - open
    );
    Ok(if failed > 0 { EXIT_CHECK_FAILED } else { EXIT_OK })
}

pub fn render_config(seq: &ParameterSequence, cfg: &Config, m: u64) -> Result<RenderConfig, CliError> {
    let (width, height) = match &cfg.resolution {
        Some(r) => parse_resolution(r)?,
        None => (1024, 1024),
    };
    let window = match cfg.window {
        Some([cx, cy, w, h]) => Window::new(Complex64::new(cx, cy), w, h),
        None => default_window(seq, m),
    };
    let palette = match &cfg.palette {
        Some(p) => p.parse::<Palette>().map_err(ConfigError::Invalid)?,
        None => Palette::Classic,
    };
    let overlays = cfg
        .overlays
        .iter()
        .flatten()
        .map(|s| s.parse::<OverlaySpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let rc = RenderConfig {
        window,
        width,
        height,
        time: m,
        horizon: cfg.horizon.unwrap_or(seq.depth()),
        tail_margin: cfg.tail_margin.unwrap_or(thinjulia_core::dynamics::DEFAULT_TAIL_MARGIN),
        palette,
        overlays,
    };
    rc.validate(seq)?;
    Ok(rc)
}

pub fn cmd_render(seq: &ParameterSequence, cfg: &Config, out: &Path) -> Result<i32, CliError> {
    let times = cfg.times.clone().unwrap_or_else(|| vec![0]);
    let configs = times
        .iter()
        .map(|&m| render_config(seq, cfg, m))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let mut all_annuli = Vec::new();
    let mut stdout = io::stdout().lock();
    for rc in &configs {
        let annuli = resolve_overlays(seq, rc.time, &rc.overlays)?;
        let grid = classify_grid(seq, rc)?;
        let image = overlay_annuli(&colorize(&grid, rc.palette), &rc.window, &annuli, OVERLAY);
        let samples = extract_julia_samples(&grid);
        let ppm = out.join(format!("render_m{}.ppm", rc.time));
        write_image(&image, &ppm)?;
        let mut csv = Vec::new();
        write_julia_csv(&samples, &mut csv)?;
        write_file(&out.join(format!("julia_m{}.csv", rc.time)), &csv)?;
        let stats = grid_stats(&grid);
        let _ = writeln!(
            stdout,
            "m={} {}x{}: escaped {}, thick {}, thin {}, anomalies {}, julia samples {}, overlays {} -> {}",
            rc.time,
            rc.width,
            rc.height,
            stats.escaped,
            stats.thick,
            stats.thin,
            stats.anomalies,
            samples.len(),
            annuli.len(),
            ppm.display()
        );
        all_annuli.extend(annuli);
    }
    if !all_annuli.is_empty() {
        let mut csv = Vec::new();
        write_annuli_csv(&all_annuli, &mut csv)?;
        write_file(&out.join("annuli.csv"), &csv)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ProbeAnnulus {
    stage: usize,
    code: String,
    modulus: f64,
    diameter: f64,
}

#[derive(Debug, Serialize)]
struct Probe {
    point: [f64; 2],
    time: u64,
    status: Status,
    itinerary: String,
    class: ItineraryClass,
    joining_stage: usize,
    anomaly: bool,
    /// Pulled-back annuli whose bounded complementary component holds the point.
    annuli: Vec<ProbeAnnulus>,
    /// Stages whose pull-back could not be traced.
    unresolved: Vec<String>,
}

pub fn cmd_probe(seq: &ParameterSequence, z: Complex64, m: u64) -> Result<i32, CliError> {
    if m > seq.final_time() {
        return Err(ConfigError::Invalid(format!("time {m} is past the last checkpoint {}", seq.final_time())).into());
    }
    let horizon = seq.depth();
    let cl = classify(seq, z, m, horizon);
    let last_stage = match cl.status {
        Status::Survived { depth } => depth,
        Status::Escaped { stage, .. } => stage - 1,
    };
    let mut annuli = Vec::new();
    let mut unresolved = Vec::new();
    for k in seq.first_stage_from(m)..=last_stage {
        match pull_back_annulus_around(seq, m, k, z) {
            Ok(a) if locate(&a, z) == Location::Bounded => annuli.push(ProbeAnnulus {
                stage: k,
                code: a.code.to_string(),
                modulus: a.modulus,
                diameter: a.diameter,
            }),
            Ok(_) => {}
            Err(e) => unresolved.push(format!("stage {k}: {e}")),
        }
    }
    let probe = Probe {
        point: [z.re, z.im],
        time: m,
        class: itinerary_class(&cl.itinerary, thinjulia_core::dynamics::DEFAULT_TAIL_MARGIN),
        joining_stage: joining_stage(&cl.itinerary),
        itinerary: cl.itinerary.to_string(),
        status: cl.status,
        anomaly: cl.anomaly,
        annuli,
        unresolved,
    };
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &probe)?;
    let _ = writeln!(stdout);
    Ok(EXIT_OK)
}
