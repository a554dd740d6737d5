//! `recm`: fit, sample and analyse reciprocity-preserving network ensembles.
//!
//! Files:
//! - graphs: CSV `src_label,dst_label,weight`
//! - transactions: CSV with `date,lender,borrower,amount` (+ optional `time`)
//! - parameters: JSON written by `fit` (`schema_version`, `model`, `n`,
//!   `labels`, `multipliers`, `fit`)
//! - reports: `report.csv`, `motif_z.csv`, `period_<key>.json`
//!
//! Failures print `{"error": <kind>, "message": ...}` to stderr and exit
//! non-zero.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use recm::analysis::{failures, run_pipeline, write_outputs, BlockMode, RunConfig};
use recm::coreperiphery::{
    block_stats, detect_core, detect_core_exhaustive, detect_core_sorted, write_block_csv,
};
use recm::ensembles::{constraints_from_graph, fit, FitOptions};
use recm::io::{
    ingest, labels_of, read_graph_csv, write_graph_csv, IngestOptions, ParamsDocument, Period,
};
use recm::motifs::{motif_census, motif_zscores, write_motif_csv, MOTIFS};
use recm::sampler::{write_values_csv, GraphSampler, StatDistribution};
use recm::{global_stats, node_stats, Error, ModelKind, WeightedDigraph};

#[derive(Parser)]
#[command(name = "recm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate a transaction ledger into one graph per period.
    Ingest(IngestArgs),
    /// Fit a model to a graph's node constraints.
    Fit(FitArgs),
    /// Draw graphs from a fitted model.
    Sample(SampleArgs),
    /// Global and node statistics, optionally against an ensemble.
    Stats(StatsArgs),
    /// Core-periphery split and block statistics.
    Coreperiphery(CpArgs),
    /// Motif census, optionally with ensemble z-scores.
    Motifs(MotifArgs),
    /// Full per-period pipeline.
    Report(ReportArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "RECM_OUTPUT_DIR", default_value = "recm-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IngestFlags {
    /// month, quarter or year.
    #[arg(long, default_value = "quarter")]
    period: Period,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Keep only rows with `column=value`; repeatable.
    #[arg(long = "filter", value_parser = parse_filter)]
    filters: Vec<(String, String)>,
}

#[derive(Args)]
struct IngestArgs {
    /// Transaction CSV.
    input: PathBuf,
    #[command(flatten)]
    flags: IngestFlags,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Decm,
    Rwcm,
    Recm,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Decm => ModelKind::Decm,
            Model::Rwcm => ModelKind::Rwcm,
            Model::Recm => ModelKind::Recm,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Graph CSV.
    graph: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Parameter file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Parameter JSON written by `fit`.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SampleArgs {
    /// Parameter JSON written by `fit`.
    params: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct StatsArgs {
    graph: PathBuf,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum CpMethod {
    Sorted,
    Refined,
    Exhaustive,
}

#[derive(Args)]
struct CpArgs {
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "refined")]
    method: CpMethod,
    #[arg(long, default_value_t = 1000)]
    max_passes: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct MotifArgs {
    graph: PathBuf,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// Period label used in the z-score file.
    #[arg(long, default_value = "all")]
    period_label: String,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct ReportArgs {
    /// Transaction CSV, or a graph CSV with `--graph-input`.
    input: PathBuf,
    /// Treat the input as a single graph instead of a ledger.
    #[arg(long)]
    graph_input: bool,
    /// Period key when the input is a single graph.
    #[arg(long, default_value = "all")]
    period_label: String,
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Vec<Model>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lower and upper percentile, e.g. `0.025,0.975`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    percentiles: Option<Vec<f64>>,
    #[arg(long)]
    significance: Option<f64>,
    /// empirical, per_sample or both.
    #[arg(long)]
    block_mode: Option<BlockMode>,
    #[arg(long)]
    period: Option<Period>,
    #[arg(long)]
    strict: bool,
    #[arg(long = "filter", value_parser = parse_filter)]
    filters: Vec<(String, String)>,
    /// Output directory.
    #[arg(long, env = "RECM_OUTPUT_DIR")]
    out_dir: Option<PathBuf>,
}

fn parse_filter(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(c, v)| (c.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected column=value, got '{s}'"))
}

type CliResult = Result<(), Failure>;

struct Failure {
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

fn failure(kind: &str, message: impl Into<String>) -> Failure {
    Failure {
        kind: kind.into(),
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| failure("io", format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| failure("io", format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<WeightedDigraph, Failure> {
    Ok(read_graph_csv(open(path)?)?)
}

fn read_params(path: &Path) -> Result<ParamsDocument, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| failure("io", format!("{}: {e}", path.display())))?;
    Ok(ParamsDocument::from_json(&text)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn cmd_ingest(a: IngestArgs) -> CliResult {
    let opts = IngestOptions {
        period: a.flags.period,
        strict: a.flags.strict,
        filters: a.flags.filters,
    };
    let out = ingest(open(&a.input)?, &opts)?;
    let dir = a.out.out_dir;
    let mut written = Vec::new();
    let mut periods = Vec::new();
    for pg in &out.periods {
        let path = dir.join(format!("graph_{}.csv", pg.period));
        let mut w = create(&path)?;
        write_graph_csv(&mut w, &pg.graph)?;
        w.flush()?;
        written.push(path);
        let gs = global_stats(&pg.graph);
        periods.push(
            json!({"period": pg.period, "nodes": gs.n, "links": gs.links, "volume": gs.volume}),
        );
    }
    let summary = dir.join("ingest.json");
    write_json(
        &summary,
        &json!({"periods": periods, "skipped": out.skipped, "filtered": out.filtered}),
    )?;
    written.push(summary);
    for s in &out.skipped {
        eprintln!(
            "{}",
            json!({"warning": "skipped_row", "line": s.line, "message": s.message})
        );
    }
    announce(&written);
    Ok(())
}

fn cmd_fit(a: FitArgs) -> CliResult {
    let g = read_graph(&a.graph)?;
    let options = FitOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let report = fit(&constraints_from_graph(&g, a.model.into()), &options)?;
    let doc = ParamsDocument::from_fit(&report, a.tol, labels_of(&g));
    let text = doc.to_json()?;
    match &a.output {
        Some(path) => create(path)?.write_all(text.as_bytes())?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    if !report.converged {
        return Err(failure(
            "not_converged",
            format!(
                "residual {} above tolerance {} after {} iterations",
                report.residual_sup_norm, a.tol, report.iterations
            ),
        ));
    }
    Ok(())
}

fn sampler_for(doc: &ParamsDocument) -> Result<GraphSampler, Failure> {
    Ok(GraphSampler::new(&doc.params()?)?)
}

fn cmd_sample(a: SampleArgs) -> CliResult {
    let doc = read_params(&a.params)?;
    let sampler = sampler_for(&doc)?;
    let graphs = sampler.map(a.seed, a.samples, |_, g| g.links().collect::<Vec<_>>())?;
    let path = a.out.out_dir.join("samples.csv");
    let mut w = create(&path)?;
    writeln!(w, "sample_index,src_label,dst_label,weight")?;
    for (s, links) in graphs.iter().enumerate() {
        for &(i, j, wij) in links {
            writeln!(w, "{s},{},{},{wij}", doc.labels[i], doc.labels[j])?;
        }
    }
    w.flush()?;
    announce(&[path]);
    Ok(())
}

const GLOBAL_STATS: [&str; 9] = [
    "links",
    "density",
    "volume",
    "weighted_density",
    "rec_links",
    "reciprocity",
    "rec_volume",
    "avg_rec_weight",
    "nodes",
];

fn global_values(g: &WeightedDigraph) -> [Option<f64>; 9] {
    let s = global_stats(g);
    [
        Some(s.links as f64),
        s.density,
        Some(s.volume as f64),
        s.weighted_density,
        Some(s.rec_links as f64),
        s.reciprocity_ratio,
        Some(s.rec_volume as f64),
        s.avg_rec_weight,
        Some(s.n as f64),
    ]
}

fn cmd_stats(a: StatsArgs) -> CliResult {
    let g = read_graph(&a.graph)?;
    let dir = a.out.out_dir;
    let nodes: Vec<_> = node_stats(&g)
        .into_iter()
        .enumerate()
        .map(|(i, s)| json!({"label": g.label(i), "stats": s}))
        .collect();
    let mut doc = json!({"global": global_stats(&g), "nodes": nodes});
    let mut written = Vec::new();
    if let Some(params) = &a.ensemble.params {
        let sampler = sampler_for(&read_params(params)?)?;
        if sampler.n() != g.n() {
            return Err(failure(
                "schema",
                "parameter file and graph have different n",
            ));
        }
        let rows = sampler.map(a.ensemble.seed, a.ensemble.samples, |_, s| global_values(s))?;
        let empirical = global_values(&g);
        let mut dists = Vec::new();
        let mut summary = Vec::new();
        for (k, name) in GLOBAL_STATS.iter().enumerate() {
            let values: Vec<f64> = rows.iter().filter_map(|r| r[k]).collect();
            let Ok(d) = StatDistribution::from_values(*name, values) else {
                continue;
            };
            let z = empirical[k].map(|x| d.z(x));
            summary.push(json!({
                "statistic": name, "empirical": empirical[k], "mean": d.mean, "std": d.std,
                "p2.5": d.p2_5, "p97.5": d.p97_5, "z": z,
            }));
            dists.push(d);
        }
        doc["ensemble"] = json!(summary);
        let path = dir.join("ensemble_values.csv");
        let mut w = create(&path)?;
        write_values_csv(&mut w, &dists)?;
        w.flush()?;
        written.push(path);
    }
    let path = dir.join("stats.json");
    write_json(&path, &doc)?;
    written.insert(0, path);
    announce(&written);
    Ok(())
}

fn cmd_coreperiphery(a: CpArgs) -> CliResult {
    let g = read_graph(&a.graph)?;
    let part = match a.method {
        CpMethod::Sorted => detect_core_sorted(&g)?,
        CpMethod::Refined => detect_core(&g, a.max_passes)?,
        CpMethod::Exhaustive => {
            if g.n() > 24 {
                return Err(failure(
                    "invalid_graph",
                    "exhaustive search is limited to 24 nodes",
                ));
            }
            detect_core_exhaustive(&g)?
        }
    };
    let dir = a.out.out_dir;
    let json_path = dir.join("coreperiphery.json");
    write_json(&json_path, &part.labelled(&g))?;
    let csv_path = dir.join("blocks.csv");
    let mut w = create(&csv_path)?;
    write_block_csv(&mut w, &block_stats(&g, &part)?)?;
    w.flush()?;
    announce(&[json_path, csv_path]);
    Ok(())
}

fn cmd_motifs(a: MotifArgs) -> CliResult {
    let g = read_graph(&a.graph)?;
    let census = motif_census(&g);
    let dir = a.out.out_dir;
    let path = dir.join("motifs.csv");
    let mut w = create(&path)?;
    write_motif_csv(&mut w, &census)?;
    w.flush()?;
    let mut written = vec![path];
    if let Some(params) = &a.ensemble.params {
        let doc = read_params(params)?;
        let sampler = sampler_for(&doc)?;
        if sampler.n() != g.n() {
            return Err(failure(
                "schema",
                "parameter file and graph have different n",
            ));
        }
        let ensemble = sampler.map(a.ensemble.seed, a.ensemble.samples, |_, s| motif_census(s))?;
        let z = motif_zscores(&census, &ensemble)?;
        let path = dir.join("motif_z.csv");
        let mut w = create(&path)?;
        writeln!(w, "model,period,motif_id,variant,z")?;
        for (variant, zs) in [("unweighted", &z.unweighted), ("weighted", &z.weighted)] {
            for m in 0..MOTIFS {
                writeln!(
                    w,
                    "{},{},{},{variant},{}",
                    doc.model,
                    a.period_label,
                    m + 1,
                    zs[m]
                )?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    announce(&written);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| failure("io", format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| failure("schema", e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if !a.models.is_empty() {
        cfg.models = a.models.iter().map(|&m| m.into()).collect();
    }
    cfg.tol = a.tol.unwrap_or(cfg.tol);
    cfg.max_iter = a.max_iter.unwrap_or(cfg.max_iter);
    cfg.samples = a.samples.unwrap_or(cfg.samples);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.significance = a.significance.unwrap_or(cfg.significance);
    cfg.block_mode = a.block_mode.unwrap_or(cfg.block_mode);
    cfg.period = a.period.unwrap_or(cfg.period);
    if let Some(p) = &a.percentiles {
        cfg.percentiles = (p[0], p[1]);
    }
    if a.out_dir.is_some() {
        cfg.output_dir = a.out_dir.clone();
    }
    cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("recm-out"));

    let graphs = if a.graph_input {
        vec![(a.period_label.clone(), read_graph(&a.input)?)]
    } else {
        let opts = IngestOptions {
            period: cfg.period,
            strict: a.strict,
            filters: a.filters.clone(),
        };
        let out = ingest(open(&a.input)?, &opts)?;
        for s in &out.skipped {
            eprintln!(
                "{}",
                json!({"warning": "skipped_row", "line": s.line, "message": s.message})
            );
        }
        out.periods
            .into_iter()
            .map(|p| (p.period, p.graph))
            .collect()
    };
    let reports = run_pipeline(&graphs, &cfg)?;
    for (period, model, message) in failures(&reports) {
        eprintln!(
            "{}",
            json!({"warning": "model_failed", "period": period, "model": model, "message": message})
        );
    }
    announce(&write_outputs(&dir, &reports)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": "usage", "message": e.to_string().trim_end()})
            );
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Coreperiphery(a) => cmd_coreperiphery(a),
        Command::Motifs(a) => cmd_motifs(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::FAILURE
        }
    }
}
