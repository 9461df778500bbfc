use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use ndmls::pipeline::{
    load_dataset, preview_render, run_augmentation, Mode, RunConfig, SamplePlan, WarpRoute,
};
use ndmls::{HandleSet, LabeledSample, Raster};

const EXIT_PARTIAL: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "ndmls",
    version,
    about = "Rigid MLS deformation augmentation for labeled images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nine-dot deformations of class-labelled images (`<input>/<class>/*.png`).
    Classify(RunArgs),
    /// Contour-handle deformations of images and their label masks.
    Segment(RunArgs),
    /// Like `segment`, but emits one JSON box document per variant.
    Detect(RunArgs),
    /// Render handles, displacement arrows and the warped result side by side.
    Preview(PreviewArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Nine-dot placement coefficient.
    #[arg(long)]
    kp: Option<f64>,
    /// Displacement coefficient (nine-dot or contour scheme, by mode).
    #[arg(long)]
    kl: Option<f64>,
    /// Nine-dot angular step coefficient.
    #[arg(long)]
    ks: Option<f64>,
    /// Initial displacement angle in degrees.
    #[arg(long)]
    phi0: Option<f64>,
    /// MLS weighting exponent (> 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Lattice spacing in pixels for the warp field.
    #[arg(long)]
    grid: Option<u32>,
    /// Warp-field construction: `inverse` (shared basis) or `role-swap`.
    #[arg(long, value_parser = parse_route)]
    route: Option<WarpRoute>,
    /// Do not pin the image corners in segment/detect modes.
    #[arg(long)]
    no_anchors: bool,
    /// Accepted for compatibility; the tool has no randomness.
    #[arg(long)]
    seedless: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Dataset root directory (or a single image).
    #[arg(long)]
    input: PathBuf,
    /// Mask directory for segment/detect (default `<input>/masks`).
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Variants per source image.
    #[arg(long)]
    count: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct PreviewArgs {
    /// Source image.
    #[arg(long)]
    input: PathBuf,
    /// Label mask for the image; selects contour handles instead of nine-dot.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Output PNG path.
    #[arg(long)]
    out: PathBuf,
    /// Index of the move pattern to show.
    #[arg(long, default_value_t = 0)]
    variant: u64,
    #[command(flatten)]
    params: ParamArgs,
}

fn parse_route(s: &str) -> Result<WarpRoute, String> {
    match s {
        "inverse" => Ok(WarpRoute::Inverse),
        "role-swap" => Ok(WarpRoute::RoleSwap),
        other => Err(format!(
            "unknown route '{other}', expected inverse or role-swap"
        )),
    }
}

fn build_config(mode: Mode, params: &ParamArgs) -> ndmls::Result<RunConfig> {
    let mut cfg = match &params.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(v) = params.kp {
        cfg.nine_dot.k_p = v;
    }
    if let Some(v) = params.kl {
        match mode {
            Mode::Classify => cfg.nine_dot.k_l = v,
            _ => cfg.contour.k_l = v,
        }
    }
    if let Some(v) = params.ks {
        cfg.nine_dot.k_s = v;
    }
    if let Some(v) = params.phi0 {
        match mode {
            Mode::Classify => cfg.nine_dot.phi0 = v,
            _ => cfg.contour.phi0 = v,
        }
    }
    if let Some(v) = params.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = params.grid {
        cfg.lattice_spacing = v;
    }
    if let Some(v) = params.route {
        cfg.warp_route = v;
    }
    if params.no_anchors {
        cfg.anchor_corners = false;
    }
    Ok(cfg)
}

fn run(mode: Mode, args: RunArgs) -> ExitCode {
    let mut cfg = match build_config(mode, &args.params) {
        Ok(c) => c,
        Err(e) => {
            error!("invalid config: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(n) = args.count {
        cfg.variants_per_image = n;
    }
    if let Some(j) = args.jobs {
        cfg.parallelism = j;
    }
    if let Err(e) = cfg.validate() {
        error!("invalid config: {e}");
        return ExitCode::from(EXIT_INVALID_CONFIG);
    }
    let dataset = match load_dataset(&args.input, args.masks.as_deref(), mode) {
        Ok(d) => d,
        Err(e) => {
            error!("cannot read input: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    match run_augmentation(&cfg, &dataset) {
        Ok(manifest) => {
            println!(
                "{} emitted, {} rejected, {} errors -> {}",
                manifest.emitted,
                manifest.rejected,
                manifest.errors.len(),
                cfg.output_dir.display()
            );
            for err in &manifest.errors {
                eprintln!("{}: {}", err.path, err.reason);
            }
            if manifest.is_partial() {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}

fn load_preview_sample(image: &Path, mask: Option<&Path>) -> ndmls::Result<LabeledSample> {
    let sample = LabeledSample::new(image, Raster::load(image)?);
    match mask {
        Some(m) => sample.with_mask(Raster::load_mask(m)?),
        None => Ok(sample),
    }
}

fn preview(args: PreviewArgs) -> ExitCode {
    let mode = if args.masks.is_some() {
        Mode::Segment
    } else {
        Mode::Classify
    };
    let cfg = match build_config(mode, &args.params).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            error!("invalid config: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    let result = load_preview_sample(&args.input, args.masks.as_deref()).and_then(|sample| {
        let plan = SamplePlan::for_sample(&cfg, &sample)?;
        let pattern = plan.pattern(args.variant)?;
        let handles = HandleSet::new(plan.sources.clone(), plan.targets(&pattern), cfg.alpha)?;
        preview_render(
            &sample,
            &handles,
            cfg.lattice_spacing,
            cfg.warp_route,
            &args.out,
        )
    });
    match result {
        Ok(layout) => {
            println!(
                "{} handles, scale {} -> {}",
                layout.markers.len(),
                layout.scale,
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Classify(a) => run(Mode::Classify, a),
        Command::Segment(a) => run(Mode::Segment, a),
        Command::Detect(a) => run(Mode::Detect, a),
        Command::Preview(a) => preview(a),
    }
}
