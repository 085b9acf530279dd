//! `roadloc`: build indexes, locate queries, synthesize benchmarks and score them.
//!
//! Exit codes: 0 success or located, 2 not located, 3 usage error, 4 input error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use roadloc::eval::{evaluate, EvalRow, GroundTruth, CSV_HEADER};
use roadloc::formats::{read_mask, QueryFile, RasterMeta, ResultFile};
use roadloc::matcher::{localize, MatcherConfig, Verdict};
use roadloc::refindex::{
    build_index, ingest_vector_map, load_index, save_index, ExactIngest, IndexConfig, IngestMode, RasterIngest,
    VectorMap,
};
use roadloc::skeleton::{extract_all, ExtractConfig};
use roadloc::synth::{gen_query, gen_synth_map, junction_histogram, MapSpec, MapStyle, QueryNoise, QuerySpec, Transform};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_NOT_LOCATED: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "roadloc", version, about = "Locate a road-network view inside a reference map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a vector map and write a reference index.
    BuildIndex(BuildIndexArgs),
    /// Locate one query against an index; exit 0 when located, 2 otherwise.
    Locate(LocateArgs),
    /// Detect intersections in a road mask and write them as a query file.
    Extract(ExtractArgs),
    /// Generate synthetic maps and queries.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Score a directory of results against ground truth.
    ///
    /// Writes one CSV row per result with the columns
    /// scenario_id, verdict, theta, center_error_m, l_used, k_used_total,
    /// elapsed_ms and a JSON aggregate next to it (same stem, .json).
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Raster,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Vector map JSON: {"polylines": [[[x, y], ...], ...]}, meters.
    map: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Longest indexed tuple, meters.
    #[arg(long, default_value_t = IndexConfig::default().d_max)]
    d_max: f64,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("query").required(true).args(["query_json", "mask"]))]
struct LocateArgs {
    index: PathBuf,
    /// Pre-extracted intersections.
    #[arg(long)]
    query_json: Option<PathBuf>,
    /// Binary PGM road mask; requires --meta.
    #[arg(long, requires = "meta")]
    mask: Option<PathBuf>,
    /// Mask georeference JSON: {"origin": [x, y], "resolution": m}.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Matcher configuration JSON; missing fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Leave elapsed_ms out so identical runs give identical files.
    #[arg(long)]
    no_timing: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Perturbed-grid road map.
    Map(SynthMapArgs),
    /// Cropped, transformed and noisy queries with ground truth.
    Queries(SynthQueriesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    GridOnly,
    Mixed,
}

#[derive(Args)]
struct SynthMapArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// East-west extent, meters.
    #[arg(long, default_value_t = 4000.0)]
    width: f64,
    /// North-south extent, meters.
    #[arg(long, default_value_t = 4000.0)]
    height: f64,
    /// Junctions per km².
    #[arg(long, default_value_t = 200.0)]
    density: f64,
    #[arg(long, value_enum, default_value_t = Style::Mixed)]
    style: Style,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SynthQueriesArgs {
    /// Vector map the scenes are cropped from.
    map: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side of the square scene, meters.
    #[arg(long, default_value_t = 500.0)]
    scene_size: f64,
    /// Intersections kept per scene before dropout.
    #[arg(long, default_value_t = 30)]
    subset_size: usize,
    #[arg(long, default_value_t = 0.0)]
    tangent_sigma_deg: f64,
    /// Meters.
    #[arg(long, default_value_t = 0.0)]
    center_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0.0)]
    clutter: f64,
    /// Keep map coordinates instead of applying a random homography.
    #[arg(long)]
    identity: bool,
    /// Receives queries/<id>.json and truth/<id>.json.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Result files named <id>.json.
    results: PathBuf,
    /// Ground-truth files named <id>.json.
    #[arg(long)]
    truth: PathBuf,
    /// A located query counts as correct within this distance, meters.
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Bad or unreadable input; exit code 4.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, InputError>;

fn context<T, E: std::fmt::Display>(r: std::result::Result<T, E>, path: &Path) -> Result<T> {
    r.map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    context(fs::read(path), path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    context(serde_json::from_slice(&read(path)?), path)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    context(fs::write(path, text), path)
}

fn ingest(map: &VectorMap, mode: Mode) -> Result<Vec<roadloc::features::Intersection>> {
    let mode = match mode {
        Mode::Exact => IngestMode::Exact(ExactIngest::default()),
        Mode::Raster => IngestMode::Raster(RasterIngest::default()),
    };
    Ok(ingest_vector_map(map, mode)?)
}

fn build_index_cmd(a: BuildIndexArgs) -> Result<u8> {
    let map: VectorMap = read_json(&a.map)?;
    let ps = ingest(&map, a.mode)?;
    let n = ps.len();
    let idx = build_index(
        ps,
        IndexConfig {
            d_max: a.d_max,
            ..IndexConfig::default()
        },
    )?;
    context(save_index(&idx, &a.output), &a.output)?;
    println!("{n} intersections, {} tuples, {} keys", idx.tuple_count(), idx.buckets().len());
    Ok(0)
}

fn mask_query(mask: &Path, meta: &Path) -> Result<QueryFile> {
    let meta: RasterMeta = read_json(meta)?;
    let raster = context(read_mask(&read(mask)?, &meta), mask)?;
    Ok(QueryFile::from_detections(&extract_all(&raster, &ExtractConfig::default())))
}

fn locate_cmd(a: LocateArgs) -> Result<u8> {
    let idx = context(load_index(&a.index), &a.index)?;
    let query = match (&a.query_json, &a.mask, &a.meta) {
        (Some(q), _, _) => read_json::<QueryFile>(q)?,
        (None, Some(m), Some(meta)) => mask_query(m, meta)?,
        _ => unreachable!("clap enforces one query source"),
    };
    let mut cfg: MatcherConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => MatcherConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    let r = localize(&query.to_intersections()?, &idx, &cfg)?;
    write_json(&a.output, &ResultFile::new(&r, &cfg, !a.no_timing))?;
    println!(
        "{} theta {:.3}, {} of {} query samples, {} hypotheses",
        r.verdict.as_str(),
        r.theta,
        r.l_used,
        r.l_budget,
        r.k_used_total
    );
    Ok(if r.verdict == Verdict::Located { 0 } else { EXIT_NOT_LOCATED })
}

fn extract_cmd(a: ExtractArgs) -> Result<u8> {
    let q = mask_query(&a.mask, &a.meta)?;
    write_json(&a.output, &q)?;
    println!("{} intersections", q.intersections.len());
    Ok(0)
}

fn synth_map_cmd(a: SynthMapArgs) -> Result<u8> {
    let spec = MapSpec {
        seed: a.seed,
        extent: [a.width, a.height],
        density: a.density,
        style: match a.style {
            Style::GridOnly => MapStyle::GridOnly,
            Style::Mixed => MapStyle::Mixed,
        },
    };
    let map = gen_synth_map(&spec)?;
    write_json(&a.output, &map)?;
    let ps = ingest(&map, Mode::Exact)?;
    println!("{} polylines, {} junctions", map.polylines.len(), ps.len());
    for ((n_b, n_q), count) in junction_histogram(&ps) {
        println!("  N_B {n_b} N_q {n_q}: {count}");
    }
    Ok(0)
}

fn synth_queries_cmd(a: SynthQueriesArgs) -> Result<u8> {
    let map: VectorMap = read_json(&a.map)?;
    let bounds = map.bounds().ok_or_else(|| InputError("map has no polylines".into()))?;
    let ps = ingest(&map, Mode::Exact)?;
    let (qdir, tdir) = (a.output.join("queries"), a.output.join("truth"));
    for d in [&qdir, &tdir] {
        context(fs::create_dir_all(d), d)?;
    }
    let width = a.count.saturating_sub(1).to_string().len().max(3);
    for i in 0..a.count {
        let spec = QuerySpec {
            seed: a.seed.wrapping_mul(1 << 32).wrapping_add(i),
            scene_size: a.scene_size,
            subset_size: a.subset_size,
            noise: QueryNoise {
                tangent_sigma: a.tangent_sigma_deg.to_radians(),
                center_sigma: a.center_sigma,
                dropout: a.dropout,
                clutter: a.clutter,
            },
            transform: if a.identity { Transform::Identity } else { Transform::Random },
        };
        let q = gen_query(&ps, bounds, &spec)?;
        let name = format!("q{i:0width$}.json");
        write_json(&qdir.join(&name), &QueryFile::from_intersections(&q.intersections))?;
        let truth = GroundTruth {
            center_query: q.center_query,
            center_ref: Some(q.center_ref),
        };
        write_json(&tdir.join(&name), &truth)?;
    }
    println!("{} queries in {}", a.count, a.output.display());
    Ok(0)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in context(fs::read_dir(dir), dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn eval_cmd(a: EvalArgs) -> Result<u8> {
    let mut rows: Vec<EvalRow> = Vec::new();
    let mut truths = Vec::new();
    for p in json_files(&a.results)? {
        let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let result: ResultFile = read_json(&p)?;
        let truth: GroundTruth = read_json(&a.truth.join(format!("{id}.json")))?;
        rows.push(context(result.eval_row(id, &truth), &p)?);
        truths.push(truth);
    }
    let report = evaluate(&rows, &truths, a.radius);
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    context(fs::write(&a.output, csv), &a.output)?;
    write_json(&a.output.with_extension("json"), &report)?;
    let ratio = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "{} queries, tp {} fp {}, precision {}, recall {}, median {:.1} ms",
        report.queries,
        report.tp,
        report.fp,
        ratio(report.precision),
        ratio(report.recall),
        report.runtime_ms[1]
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::BuildIndex(a) => build_index_cmd(a),
        Command::Locate(a) => locate_cmd(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Synth(SynthCommand::Map(a)) => synth_map_cmd(a),
        Command::Synth(SynthCommand::Queries(a)) => synth_queries_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
