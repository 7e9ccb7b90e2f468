//! Command-line driver for the region pipeline.
//!
//! Four subcommands: `propose` ranks candidate regions for one heatmap,
//! `evaluate` scores a manifest of heatmaps against annotated targets,
//! `synth` generates test scenes with known ground truth, and
//! `debug-clusters` dumps pipeline internals as JSON. Exit status 0 means
//! the command ran to completion — an empty candidate list or a sheet of
//! "none" outcomes is a result, not a failure; nonzero is reserved for
//! operational errors (unreadable files, invalid flags).

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use saliency_regions::clustering::KMeansConfig;
use saliency_regions::evaluation::{evaluate_manifest, EvalReport};
use saliency_regions::heatmap::{load_heatmap, render_overlay};
use saliency_regions::manifest::{load_manifest, serialize_manifest};
use saliency_regions::ranking::propose_regions_traced;
use saliency_regions::synth::{generate, BlobSpec, Falloff, SynthScene};
use saliency_regions::{Difficulty, ManifestEntry, PixelCoord, RankingConfig};

#[derive(Parser)]
#[command(
    name = "regions",
    version,
    about = "Propose, score, and debug activation-based region candidates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank candidate regions for one heatmap and print them as JSON.
    Propose(ProposeArgs),
    /// Score every manifest entry and tally match ranks per difficulty.
    Evaluate(EvaluateArgs),
    /// Render a synthetic scene and emit its manifest line.
    Synth(SynthArgs),
    /// Dump the active mask, cluster budget, and per-cluster pixels.
    DebugClusters(DebugArgs),
}

// ── Shared pipeline flags ────────────────────────────────────────────────

/// Every pipeline knob as a kebab-case flag, defaulting to the reference
/// constants.
#[derive(Args, Debug, Clone)]
struct PipelineFlags {
    /// High activation threshold for region counting (strict).
    #[arg(long, default_value_t = 0.9)]
    t_h: f64,
    /// Medium activation threshold for the feature grid (strict).
    #[arg(long, default_value_t = 0.5)]
    t_m: f64,
    /// Gaussian kernel size in pixels; must be odd.
    #[arg(long, default_value_t = 11)]
    kernel_size: u32,
    /// Smoothing bandwidth; derived from the kernel size when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    /// Minimum pixel count for active components and cluster parts.
    #[arg(long, default_value_t = 150)]
    min_area: usize,
    /// Red-channel weight in the activation score.
    #[arg(long, default_value_t = 0.7)]
    w_r: f64,
    /// Green-channel weight in the activation score.
    #[arg(long, default_value_t = 0.3)]
    w_g: f64,
    /// Iteration cap per k-means restart.
    #[arg(long, default_value_t = 300)]
    max_iterations: usize,
    /// Independent k-means restarts; the lowest-SSE run wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Early-stop threshold on SSE improvement; 0 runs to the fixpoint.
    #[arg(long, default_value_t = 0.0)]
    convergence_epsilon: f64,
    /// Seed for k-means initialisation; when omitted, REGION_SEED
    /// applies, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

impl PipelineFlags {
    fn to_config(&self) -> anyhow::Result<RankingConfig> {
        Ok(RankingConfig {
            t_h: self.t_h,
            t_m: self.t_m,
            kernel_size: self.kernel_size,
            sigma: self.sigma,
            min_area: self.min_area,
            w_r: self.w_r,
            w_g: self.w_g,
            kmeans: KMeansConfig {
                max_iterations: self.max_iterations,
                seed: resolve_seed(self.seed)?,
                convergence_epsilon: self.convergence_epsilon,
                restarts: self.restarts,
            },
        })
    }
}

/// Explicit flag, then the REGION_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> anyhow::Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("REGION_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .with_context(|| format!("REGION_SEED {raw:?} is not a 64-bit unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(e).context("REGION_SEED is not valid UTF-8"),
    }
}

// ── propose ──────────────────────────────────────────────────────────────

#[derive(Args)]
struct ProposeArgs {
    /// Heatmap PNG to analyse.
    heatmap: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Write the candidate JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the candidates onto the heatmap as a PNG.
    #[arg(long)]
    overlay: Option<PathBuf>,
}

fn run_propose(args: &ProposeArgs) -> anyhow::Result<()> {
    let cfg = args.pipeline.to_config()?;
    let heatmap = load_heatmap(&args.heatmap)?;
    let trace = propose_regions_traced(&heatmap, &cfg)?;
    let ranked = trace.candidates;

    let json = serde_json::to_string_pretty(&ranked.records())?;
    match &args.out {
        Some(path) => std::fs::write(path, format!("{json}\n"))
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.overlay {
        let image = render_overlay(&heatmap, &ranked.boxes(), None)?;
        image
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

// ── evaluate ─────────────────────────────────────────────────────────────

#[derive(Args)]
struct EvaluateArgs {
    /// Manifest of heatmap/target records, one JSON object per line.
    manifest: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Print only the JSON report, no text table.
    #[arg(long)]
    json_only: bool,
}

fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let row = |name: &str, c: &saliency_regions::evaluation::OutcomeCounts| {
        format!(
            "{name:<10} {:>5} {:>5} {:>5} {:>5}\n",
            c.first, c.second, c.third, c.none
        )
    };
    out.push_str(&format!(
        "{:<10} {:>5} {:>5} {:>5} {:>5}\n",
        "", "1st", "2nd", "3rd", "none"
    ));
    for d in Difficulty::ALL {
        out.push_str(&row(d.as_str(), report.per_difficulty.get(d)));
    }
    out.push_str(&row("overall", &report.overall));
    if report.errors.is_empty() {
        out.push_str(&format!("entries scored: {}\n", report.entries_scored));
    } else {
        out.push_str(&format!(
            "entries scored: {} ({} skipped)\n",
            report.entries_scored,
            report.errors.len()
        ));
    }
    out
}

fn run_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let cfg = args.pipeline.to_config()?;
    let entries = load_manifest(&args.manifest)?;
    let base = args
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let report = evaluate_manifest(&entries, base, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !args.json_only {
        print!("{}", render_table(&report));
    }
    Ok(())
}

// ── synth ────────────────────────────────────────────────────────────────

fn parse_falloff(s: &str) -> saliency_regions::Result<Falloff> {
    s.parse()
}

fn parse_difficulty(s: &str) -> saliency_regions::Result<Difficulty> {
    s.parse()
}

#[derive(Args)]
struct SynthArgs {
    /// Where to write the heatmap PNG.
    out: PathBuf,
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 96)]
    width: u32,
    /// Canvas height in pixels.
    #[arg(long, default_value_t = 96)]
    height: u32,
    /// Number of planted blobs (0 to 4); peaks descend from 1.0.
    #[arg(long, default_value_t = 1)]
    blobs: u32,
    /// Permit a scene with no blobs (noise only).
    #[arg(long)]
    allow_empty: bool,
    /// Blob intensity profile: flat or gaussian.
    #[arg(long, default_value = "flat", value_parser = parse_falloff)]
    falloff: Falloff,
    /// Uniform red-channel noise bound in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Noise seed; when omitted, REGION_SEED applies, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Difficulty recorded on the manifest line.
    #[arg(long, default_value = "easy", value_parser = parse_difficulty)]
    difficulty: Difficulty,
    /// Referring expression recorded on the manifest line.
    #[arg(long, default_value = "synthetic scene")]
    expression: String,
    /// Append the manifest line to this file as well.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Blob centres for 1–4 blobs, spread so supports stay disjoint.
fn blob_centers(count: u32, w: u32, h: u32) -> Vec<(u32, u32)> {
    match count {
        1 => vec![(w / 2, h / 2)],
        2 => vec![(w / 4, h / 2), (3 * w / 4, h / 2)],
        3 => vec![(w / 4, h / 4), (3 * w / 4, h / 4), (w / 2, 3 * h / 4)],
        _ => vec![
            (w / 4, h / 4),
            (3 * w / 4, h / 4),
            (w / 4, 3 * h / 4),
            (3 * w / 4, 3 * h / 4),
        ],
    }
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    if args.blobs == 0 && !args.allow_empty {
        bail!("--blobs 0 produces a scene with no ground truth; pass --allow-empty if that is intended");
    }
    if args.blobs > 4 {
        bail!("at most 4 blobs are supported, got {}", args.blobs);
    }
    let radius = (args.width.min(args.height) / 6).max(1);
    let blobs: Vec<BlobSpec> = blob_centers(args.blobs, args.width, args.height)
        .into_iter()
        .take(args.blobs as usize)
        .enumerate()
        .map(|(i, (cx, cy))| BlobSpec {
            center: PixelCoord::new(cx, cy),
            radius_x: radius,
            radius_y: radius,
            peak_r: 1.0 - 0.02 * i as f64,
            peak_g: 0.0,
            falloff: args.falloff,
        })
        .collect();
    let scene = SynthScene {
        width: args.width,
        height: args.height,
        blobs,
        noise_amplitude: args.noise,
        seed: resolve_seed(args.seed)?,
    };
    let (heatmap, truth) = generate(&scene)?;
    heatmap.save_png(&args.out)?;

    // The manifest line carries the first blob's box as the target; a
    // scene without ground truth gets no line.
    let Some(target) = truth.first() else {
        return Ok(());
    };
    let stem = args
        .out
        .file_stem()
        .and_then(|s| s.to_str())
        .context("output path needs a UTF-8 file name")?;
    let entry = ManifestEntry {
        image_id: stem.to_string(),
        heatmap_path: args.out.display().to_string(),
        expression: args.expression.clone(),
        target_box: *target,
        difficulty: args.difficulty,
    };
    let line = serialize_manifest(std::slice::from_ref(&entry));
    print!("{line}");
    if let Some(path) = &args.manifest {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        file.write_all(line.as_bytes())?;
    }
    Ok(())
}

// ── debug-clusters ───────────────────────────────────────────────────────

#[derive(Args)]
struct DebugArgs {
    /// Heatmap PNG to analyse.
    heatmap: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

fn run_debug_clusters(args: &DebugArgs) -> anyhow::Result<()> {
    let cfg = args.pipeline.to_config()?;
    let heatmap = load_heatmap(&args.heatmap)?;
    let trace = propose_regions_traced(&heatmap, &cfg)?;

    let mask_rows: Vec<String> = (0..trace.mask.height())
        .map(|y| {
            (0..trace.mask.width())
                .map(|x| if trace.mask.get(x, y) { '1' } else { '0' })
                .collect()
        })
        .collect();
    let clusters: Vec<serde_json::Value> = trace
        .candidates
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            serde_json::json!({
                "rank": i + 1,
                "id": c.cluster.id,
                "size": c.cluster.size(),
                "activation": c.activation,
                "box": c.bounds,
                "pixels": c.cluster.members.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "width": heatmap.width(),
        "height": heatmap.height(),
        "active_components": trace.regions.active_components,
        "requested_k": trace.requested_k,
        "effective_k": trace.effective_k,
        "mask": mask_rows,
        "clusters": clusters,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Propose(args) => run_propose(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Synth(args) => run_synth(&args),
        Command::DebugClusters(args) => run_debug_clusters(&args),
    }
}
