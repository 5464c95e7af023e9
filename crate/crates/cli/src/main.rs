use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use openworld::correspondence::{expand_vocabulary, DecayParams, MappingParams};
use openworld::embedding::load_embeddings;
use openworld::harness::{
    coco_thresholds, detection_map, load_detection_eval, load_vocabulary, run_pipeline, InterpretationRecord, Mode,
    PipelineConfig,
};
use openworld::knowledge::{load_assertions, AssertionFormat, Ingested};
use openworld::ConceptId;

#[derive(Parser)]
#[command(name = "openworld", version, about = "Open-world activity interpretation over a commonsense knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an assertion file and optionally write it back as canonical TSV.
    Ingest(IngestArgs),
    /// Score source concepts against target concepts.
    Map(MapArgs),
    /// Run the full pipeline and write ranked interpretations.
    Infer(InferArgs),
    /// Detection mAP and recall from JSON-lines box files.
    EvalDet(EvalDetArgs),
    /// Write one DOT file per interpretation line.
    ExportDot(ExportDotArgs),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Auto,
    Tsv,
    Conceptnet,
}

impl From<Format> for AssertionFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Auto => AssertionFormat::Auto,
            Format::Tsv => AssertionFormat::Tsv,
            Format::Conceptnet => AssertionFormat::ConceptNet,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    assertions: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    /// Canonical TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    assertions: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Source vocabulary, one concept per line.
    #[arg(long)]
    sources: PathBuf,
    /// Target vocabulary, one concept per line.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    rel_floor: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Closed,
    Open,
}

#[derive(Args)]
struct InferArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    assertions: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    actions: Option<PathBuf>,
    #[arg(long)]
    objects: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    hop_bound: Option<usize>,
    #[arg(long)]
    detection_threshold: Option<f64>,
    #[arg(long)]
    top_k_objects: Option<usize>,
    #[arg(long)]
    top_k_actions: Option<usize>,
    #[arg(long)]
    max_interpretations: Option<usize>,
    /// Interpretation JSON lines; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Metrics report JSON.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Directory for per-interpretation DOT files.
    #[arg(long)]
    dot_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalDetArgs {
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// IoU thresholds; 0.50:0.05:0.95 when omitted.
    #[arg(long, value_delimiter = ',')]
    iou: Vec<f64>,
}

#[derive(Args)]
struct ExportDotArgs {
    /// Interpretation JSON lines written by `infer`.
    interpretations: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Only export this segment.
    #[arg(long)]
    segment: Option<String>,
    /// Only export ranks below this.
    #[arg(long)]
    top: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Map(a) => map(a),
        Command::Infer(a) => infer(a),
        Command::EvalDet(a) => eval_det(a),
        Command::ExportDot(a) => export_dot(a),
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_toml());
            Ok(())
        }
    }
}

fn warn_rejected<T>(path: &Path, ingested: &Ingested<T>) {
    for r in &ingested.rejected {
        log::warn!("{}: {r}", path.display());
    }
}

fn ingest(args: IngestArgs) -> Result<()> {
    let ingested = load_assertions(&args.assertions, args.format.into())?;
    warn_rejected(&args.assertions, &ingested);
    let graph = &ingested.value;
    let summary = serde_json::json!({
        "concepts": graph.concept_count(),
        "assertions": graph.assertion_count(),
        "rejected": ingested.rejected.len(),
        "skipped": ingested.skipped,
    });
    println!("{summary}");
    if let Some(out) = args.out {
        let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
        graph
            .write_tsv(std::io::BufWriter::new(file))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn vocabulary(path: &Path) -> Result<BTreeSet<ConceptId>> {
    let v = load_vocabulary(path)?;
    warn_rejected(path, &v);
    Ok(v.value)
}

fn map(args: MapArgs) -> Result<()> {
    let graph = load_assertions(&args.assertions, AssertionFormat::Auto)?;
    warn_rejected(&args.assertions, &graph);
    let emb = load_embeddings(&args.embeddings)?;
    warn_rejected(&args.embeddings, &emb);
    let defaults = MappingParams::default();
    let params = MappingParams {
        decay: DecayParams {
            gamma: args.gamma.unwrap_or(defaults.decay.gamma),
            epsilon: args.epsilon.unwrap_or(defaults.decay.epsilon),
        },
        rel_floor: args.rel_floor.unwrap_or(defaults.rel_floor),
    };
    params.validate()?;
    let mapping = expand_vocabulary(
        &graph.value,
        &emb.value,
        &vocabulary(&args.sources)?,
        &vocabulary(&args.targets)?,
        &params,
        args.top_k,
    )?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for scores in mapping.entries.values() {
        for s in scores {
            writeln!(out, "{}", serde_json::to_string(s)?)?;
        }
    }
    Ok(())
}

fn infer_config(args: &InferArgs) -> Result<PipelineConfig> {
    let mut c = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let p = &mut c.paths;
    for (slot, flag) in [
        (&mut p.assertions, &args.assertions),
        (&mut p.embeddings, &args.embeddings),
        (&mut p.detections, &args.detections),
        (&mut p.ground_truth, &args.ground_truth),
        (&mut p.actions, &args.actions),
        (&mut p.objects, &args.objects),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(m) = args.mode {
        c.mode = match m {
            ModeArg::Closed => Mode::Closed,
            ModeArg::Open => Mode::Open,
        };
    }
    if let Some(v) = args.hop_bound {
        c.hop_bound = v;
    }
    if let Some(v) = args.detection_threshold {
        c.detection_threshold = v;
    }
    if let Some(v) = args.top_k_objects {
        c.top_k_objects = v;
    }
    if let Some(v) = args.top_k_actions {
        c.top_k_actions = v;
    }
    if let Some(v) = args.max_interpretations {
        c.max_interpretations = v;
    }
    Ok(c)
}

fn infer(args: InferArgs) -> Result<()> {
    let config = infer_config(&args)?;
    let report = run_pipeline(&config)?;
    let lines = report.interpretation_lines();
    match &args.output {
        Some(path) => fs::write(path, &lines).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{lines}"),
    }
    if let Some(path) = &args.metrics {
        let json = serde_json::to_string_pretty(&report.metrics)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &args.dot_dir {
        let records: Vec<&InterpretationRecord> = report.results.iter().flat_map(|r| &r.records).collect();
        write_dots(dir, records)?;
    }
    Ok(())
}

fn eval_det(args: EvalDetArgs) -> Result<()> {
    let records = load_detection_eval(&args.ground_truth, &args.predictions)?;
    for r in &records.rejected {
        log::warn!("detection boxes: {r}");
    }
    if records.value.is_empty() {
        bail!("no valid boxes in {} or {}", args.ground_truth.display(), args.predictions.display());
    }
    let thresholds = if args.iou.is_empty() { coco_thresholds() } else { args.iou };
    let report = detection_map(&records.value, &thresholds)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// File-name safe rendering of a segment id.
fn file_stem(segment: &str) -> String {
    segment
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_dots<'a>(dir: &Path, records: impl IntoIterator<Item = &'a InterpretationRecord>) -> Result<usize> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut n = 0;
    for r in records {
        let path = dir.join(format!("{}_{:03}.dot", file_stem(&r.segment), r.rank));
        fs::write(&path, &r.dot).with_context(|| format!("writing {}", path.display()))?;
        n += 1;
    }
    Ok(n)
}

fn export_dot(args: ExportDotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.interpretations)
        .with_context(|| format!("reading {}", args.interpretations.display()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: InterpretationRecord = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}", args.interpretations.display(), i + 1))?;
        let keep = args.segment.as_ref().is_none_or(|s| *s == r.segment) && args.top.is_none_or(|t| r.rank < t);
        if keep {
            records.push(r);
        }
    }
    let n = write_dots(&args.out_dir, &records)?;
    println!("{n} DOT files written to {}", args.out_dir.display());
    Ok(())
}
