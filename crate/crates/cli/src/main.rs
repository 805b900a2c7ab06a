mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sage_core::fusion::{run_sage_net, ClampPolicy, PipelineConfig, ProviderBundle};
use sage_core::groundtruth::{self, CategoryFilter};
use sage_core::harness::{
    aggregate, emit_report, evaluate_corpus, CorpusManifest, EvalOptions, Pipeline, Regime,
    ReportFormat,
};
use sage_core::map;
use sage_core::metrics::ThresholdPolicy;
use sage_core::synth::{self, canned, SceneSpec, Seed};
use sage_core::{Error, ErrorClass, Result};

#[derive(Debug, Parser)]
#[command(
    name = "sage",
    version,
    about = "Semantics-augmented gaze maps and saliency evaluation"
)]
struct Cli {
    /// TOML file whose [subcommand] tables supply default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic corpus from scene specs.
    SynthGen(SynthGen),
    /// Fuse a gaze map with instance masks into a SAGE ground-truth map.
    SageGen(SageGen),
    /// Run the gated composition on one 16-frame clip.
    PipelineRun(PipelineRun),
    /// Score a corpus and write an aggregated report.
    Eval(Eval),
    /// Export a map as a grayscale PNG heatmap.
    Viz(Viz),
}

#[derive(Debug, Args)]
struct SynthGen {
    /// Scene TOML file or canned scene name (crossing, approaching, empty_road).
    #[arg(long, required = true)]
    spec: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SageGen {
    #[arg(long)]
    gaze: PathBuf,
    /// Instance list JSON; mask paths inside it are relative to the file.
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Categories to keep, comma separated. Defaults to the driving categories.
    #[arg(long, value_delimiter = ',')]
    keep: Vec<String>,
    #[arg(long, default_value_t = groundtruth::DEFAULT_MIN_SCORE)]
    min_score: f32,
    /// Output grid as HxW; defaults to the gaze map's grid.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<map::GridDims>,
    /// Also write the union mask here.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct PipelineArgs {
    #[arg(long, default_value_t = sage_core::fusion::DEFAULT_K)]
    k: f64,
    #[arg(long, default_value_t = sage_core::fusion::DEFAULT_V_THRESH)]
    v_thresh: f64,
    #[arg(long, default_value_t = ClampPolicy::default(), value_parser = parse_str::<ClampPolicy>)]
    clamp: ClampPolicy,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        PipelineConfig::new(self.v_thresh, self.k, self.clamp)
    }
}

#[derive(Debug, Args)]
struct PipelineRun {
    /// MANIFEST#CLIP_ID
    #[arg(long)]
    clip: String,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Eval {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "gaze_only,sage", value_parser = parse_str::<Regime>)]
    regimes: Vec<Regime>,
    #[arg(long, value_delimiter = ',', default_value = "raw,sage_net", value_parser = parse_str::<Pipeline>)]
    pipelines: Vec<Pipeline>,
    /// Only score clips carrying this scenario tag.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "csv", value_parser = parse_str::<ReportFormat>)]
    format: ReportFormat,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// fixed:T or adaptive:M
    #[arg(long, default_value = "adaptive:2", value_parser = parse_str::<ThresholdPolicy>)]
    threshold: ThresholdPolicy,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct Viz {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dims(s: &str) -> std::result::Result<map::GridDims, String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HxW")?;
    let h = h
        .trim()
        .parse()
        .map_err(|_| format!("bad height in `{s}`"))?;
    let w = w
        .trim()
        .parse()
        .map_err(|_| format!("bad width in `{s}`"))?;
    map::GridDims::new(h, w).map_err(|e| e.to_string())
}

fn load_spec(arg: &str) -> Result<SceneSpec> {
    let path = Path::new(arg);
    if path.exists() {
        return SceneSpec::load(path);
    }
    canned::by_name(arg).ok_or_else(|| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "neither a file nor a canned scene name",
        ),
    })
}

fn synth_gen(args: SynthGen) -> Result<()> {
    let specs = args
        .spec
        .iter()
        .map(|s| load_spec(s))
        .collect::<Result<Vec<_>>>()?;
    let manifest = match specs.as_slice() {
        [one] => synth::generate_corpus(one, Seed(args.seed), &args.out)?,
        many => synth::generate_suite(many, Seed(args.seed), &args.out)?,
    };
    let frames: usize = manifest.clips.iter().map(|c| c.frames.len()).sum();
    println!(
        "wrote {} clips ({frames} frames) to {}",
        manifest.clips.len(),
        args.out.display()
    );
    Ok(())
}

fn sage_gen(args: SageGen) -> Result<()> {
    let gaze = map::load_smap(&args.gaze)?;
    let instances = groundtruth::load_instances(&args.instances)?;
    let filter = if args.keep.is_empty() {
        CategoryFilter::default()
    } else {
        CategoryFilter::new(args.keep.iter().map(String::as_str))?
    }
    .with_min_score(args.min_score)?;
    let dims = args.dims.unwrap_or(gaze.dims());
    let sage = groundtruth::build_sage_frame(&gaze, &instances, &filter, dims)?;
    map::save_smap(&sage, &args.out)?;
    if let Some(path) = &args.mask_out {
        map::save_mask(&groundtruth::union_mask(&instances, &filter, dims)?, path)?;
    }
    log::info!(
        "{} instances, kept categories: {}",
        instances.len(),
        filter.categories().collect::<Vec<_>>().join(",")
    );
    Ok(())
}

fn pipeline_run(args: PipelineRun) -> Result<()> {
    let config = args.pipeline.config()?;
    let (manifest_path, clip_id) = args
        .clip
        .rsplit_once('#')
        .ok_or_else(|| Error::Invalid("--clip expects MANIFEST#CLIP_ID".into()))?;
    let manifest = CorpusManifest::load(manifest_path)?;
    let entry = manifest
        .clip(clip_id)
        .ok_or_else(|| Error::Invalid(format!("clip `{clip_id}` not in {manifest_path}")))?;
    let window = manifest.load_clip(entry)?;
    let out = run_sage_net(&window, &ProviderBundle::file_backed(), &config)?;
    map::save_smap(&out, &args.out)?;
    if let Some(png) = &args.png {
        map::export_heatmap_png(&out, png)?;
    }
    Ok(())
}

fn eval(args: Eval) -> Result<()> {
    let mut manifest = CorpusManifest::load(&args.manifest)?;
    if let Some(tag) = &args.scenario {
        manifest = manifest.filter_scenario(tag);
    }
    for (clip, path) in manifest.missing_files() {
        log::warn!("clip {clip}: missing {}", path.display());
    }
    let opts = EvalOptions {
        config: args.pipeline.config()?,
        policy: args.threshold,
        regimes: args.regimes,
        pipelines: args.pipelines,
        workers: args.workers,
    };
    let result = evaluate_corpus(&manifest, &ProviderBundle::file_backed(), &opts)?;
    for f in &result.failures {
        eprintln!("skipped {}: {}", f.clip_id, f.message);
    }
    let table = aggregate(&result.rows);
    emit_report(&table, args.format, &args.report)?;
    println!(
        "scored {} of {} clips; report written to {}",
        manifest.clips.len() - result.failures.len(),
        manifest.clips.len(),
        args.report.display()
    );
    Ok(())
}

fn viz(args: Viz) -> Result<()> {
    map::export_heatmap_png(&map::load_smap(&args.map)?, &args.out)
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Validation => 1,
        ErrorClass::Io => 2,
        ErrorClass::Metric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(e.class()));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::SynthGen(a) => synth_gen(a),
        Command::SageGen(a) => sage_gen(a),
        Command::PipelineRun(a) => pipeline_run(a),
        Command::Eval(a) => eval(a),
        Command::Viz(a) => viz(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
