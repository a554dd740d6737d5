//! Per-period pipeline: fit each model, sample its ensemble, and compare the
//! empirical statistics with their ensemble distributions.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coreperiphery::{
    block_stats, detect_core, Bipartition, BlockStats, LabelledBipartition,
};
use crate::ensembles::{constraints_from_graph, fit, FitOptions, ModelKind};
use crate::error::{Error, Result};
use crate::graph::{global_stats, node_stats, GlobalStats, NodeStats, WeightedDigraph};
use crate::io::{Period, SCHEMA_VERSION};
use crate::motifs::{motif_census, MotifVector, MOTIFS};
use crate::sampler::GraphSampler;
use crate::sampler::{StatDistribution, ZScore};

/// Which partition block statistics of sampled graphs are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// The empirical partition, held fixed across samples.
    #[default]
    Empirical,
    /// The partition re-detected on every sample.
    PerSample,
    Both,
}

impl std::str::FromStr for BlockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(BlockMode::Empirical),
            "per_sample" | "per-sample" => Ok(BlockMode::PerSample),
            "both" => Ok(BlockMode::Both),
            other => Err(Error::Schema(format!("unknown block mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub models: Vec<ModelKind>,
    pub tol: f64,
    pub max_iter: usize,
    pub samples: usize,
    pub seed: u64,
    pub percentiles: (f64, f64),
    pub significance: f64,
    pub block_mode: BlockMode,
    pub refine_passes: usize,
    pub period: Period,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            tol: 1e-4,
            max_iter: 500,
            samples: 1000,
            seed: 0,
            percentiles: (0.025, 0.975),
            significance: 1.96,
            block_mode: BlockMode::Empirical,
            refine_passes: 1000,
            period: Period::Quarter,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.percentiles;
        if self.samples < 2 {
            Err(Error::Schema("samples must be at least 2".into()))
        } else if !(self.tol > 0.0) {
            Err(Error::Schema("tolerance must be positive".into()))
        } else if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            Err(Error::Schema(
                "percentiles must satisfy 0 <= lower < upper <= 1".into(),
            ))
        } else if self.models.is_empty() {
            Err(Error::Schema("no models requested".into()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticReport {
    pub name: String,
    pub empirical: Option<f64>,
    /// Samples on which the statistic was defined.
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub p_lower: Option<f64>,
    pub p_upper: Option<f64>,
    pub z: ZScore,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub residual_sup_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub seed: u64,
    pub fit: Option<FitSummary>,
    pub error: Option<String>,
    pub statistics: Vec<StatisticReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRow {
    pub label: String,
    #[serde(flatten)]
    pub stats: NodeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodReport {
    pub schema_version: u32,
    pub period: String,
    pub percentiles: (f64, f64),
    pub significance: f64,
    pub global: GlobalStats,
    pub nodes: Vec<NodeRow>,
    pub core_periphery: Option<LabelledBipartition>,
    pub blocks: Option<BlockStats>,
    pub motifs: MotifVector,
    pub models: Vec<ModelReport>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the ensemble for `model` in `period`, derived from the master seed.
pub fn derive_seed(master: u64, period: &str, model: ModelKind) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in period.bytes().chain(model.as_str().bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(splitmix(master) ^ h)
}

/// Collects statistic values in a fixed order; names only when asked.
struct Recorder {
    names: Option<Vec<String>>,
    values: Vec<Option<f64>>,
}

impl Recorder {
    fn put(&mut self, name: impl FnOnce() -> String, value: Option<f64>) {
        if let Some(names) = &mut self.names {
            names.push(name());
        }
        self.values.push(value);
    }

    fn blocks(&mut self, prefix: &str, stats: Option<&BlockStats>) {
        for (i, block) in ["cc", "cp", "pc", "pp"].into_iter().enumerate() {
            let b = stats.map(|s| s.blocks()[i].1);
            let metrics: [(&str, Option<f64>); 6] = [
                ("links", b.map(|b| b.links as f64)),
                ("density", b.and_then(|b| b.density)),
                ("volume", b.map(|b| b.volume as f64)),
                ("volume_per_link", b.and_then(|b| b.volume_per_link)),
                ("reciprocity", b.and_then(|b| b.reciprocity)),
                (
                    "weighted_reciprocity",
                    b.and_then(|b| b.weighted_reciprocity),
                ),
            ];
            for (m, v) in metrics {
                self.put(|| format!("{prefix}{block}_{m}"), v);
            }
        }
    }
}

fn observe(
    g: &WeightedDigraph,
    empirical_part: Option<&Bipartition>,
    cfg: &RunConfig,
    rec: &mut Recorder,
) {
    let gs = global_stats(g);
    rec.put(|| "nodes".into(), Some(gs.n as f64));
    rec.put(|| "links".into(), Some(gs.links as f64));
    rec.put(|| "density".into(), gs.density);
    rec.put(|| "volume".into(), Some(gs.volume as f64));
    rec.put(|| "weighted_density".into(), gs.weighted_density);
    rec.put(|| "rec_links".into(), Some(gs.rec_links as f64));
    rec.put(|| "reciprocity".into(), gs.reciprocity_ratio);
    rec.put(|| "rec_volume".into(), Some(gs.rec_volume as f64));
    rec.put(|| "avg_rec_weight".into(), gs.avg_rec_weight);

    let own = detect_core(g, cfg.refine_passes).ok();
    rec.put(
        || "core_size".into(),
        own.as_ref().map(|p| p.core_size() as f64),
    );
    rec.put(|| "core_error".into(), own.as_ref().map(|p| p.error));

    if matches!(cfg.block_mode, BlockMode::Empirical | BlockMode::Both) {
        let stats = empirical_part.and_then(|p| block_stats(g, p).ok());
        rec.blocks("block_", stats.as_ref());
    }
    if matches!(cfg.block_mode, BlockMode::PerSample | BlockMode::Both) {
        let stats = own.as_ref().and_then(|p| block_stats(g, p).ok());
        rec.blocks("redetected_block_", stats.as_ref());
    }

    let motifs = motif_census(g);
    for m in 0..MOTIFS {
        rec.put(
            || format!("motif_{}_unweighted", m + 1),
            Some(motifs.unweighted[m] as f64),
        );
    }
    for m in 0..MOTIFS {
        rec.put(
            || format!("motif_{}_weighted", m + 1),
            Some(motifs.weighted[m]),
        );
    }
}

fn summarize(
    name: String,
    empirical: Option<f64>,
    values: Vec<f64>,
    cfg: &RunConfig,
) -> StatisticReport {
    let count = values.len();
    let dist =
        StatDistribution::with_percentiles("", values, cfg.percentiles.0, cfg.percentiles.1).ok();
    let z = match (&dist, empirical) {
        (Some(d), Some(x)) => d.z(x),
        _ => ZScore::Undefined,
    };
    StatisticReport {
        name,
        empirical,
        count,
        mean: dist.as_ref().map(|d| d.mean),
        std: dist.as_ref().and_then(|d| d.std),
        p_lower: dist.as_ref().map(|d| d.p2_5),
        p_upper: dist.as_ref().map(|d| d.p97_5),
        significant: z.is_significant(cfg.significance),
        z,
    }
}

fn run_model(
    period: &str,
    g: &WeightedDigraph,
    part: Option<&Bipartition>,
    names: &[String],
    empirical: &[Option<f64>],
    model: ModelKind,
    cfg: &RunConfig,
) -> ModelReport {
    let seed = derive_seed(cfg.seed, period, model);
    let mut report = ModelReport {
        model,
        seed,
        fit: None,
        error: None,
        statistics: Vec::new(),
    };
    let options = FitOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };
    let fitted = match fit(&constraints_from_graph(g, model), &options) {
        Ok(r) => r,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.fit = Some(FitSummary {
        converged: fitted.converged,
        residual_sup_norm: fitted.residual_sup_norm,
        iterations: fitted.iterations,
    });
    if !fitted.converged {
        report.error = Some(format!(
            "solver did not reach tolerance {} (residual {})",
            cfg.tol, fitted.residual_sup_norm
        ));
        return report;
    }
    let sampled = GraphSampler::new(&fitted.params).and_then(|s| {
        s.map(seed, cfg.samples, |_, sample| {
            let mut rec = Recorder {
                names: None,
                values: Vec::with_capacity(names.len()),
            };
            observe(sample, part, cfg, &mut rec);
            rec.values
        })
    });
    let rows = match sampled {
        Ok(rows) => rows,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.statistics = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values = rows.iter().filter_map(|r| r[k]).collect();
            summarize(name.clone(), empirical[k], values, cfg)
        })
        .collect();
    report
}

pub fn analyze_period(period: &str, g: &WeightedDigraph, cfg: &RunConfig) -> Result<PeriodReport> {
    cfg.validate()?;
    let part = detect_core(g, cfg.refine_passes).ok();
    let mut rec = Recorder {
        names: Some(Vec::new()),
        values: Vec::new(),
    };
    observe(g, part.as_ref(), cfg, &mut rec);
    let names = rec.names.unwrap_or_default();
    let models = cfg
        .models
        .iter()
        .map(|&m| run_model(period, g, part.as_ref(), &names, &rec.values, m, cfg))
        .collect();
    Ok(PeriodReport {
        schema_version: SCHEMA_VERSION,
        period: period.to_string(),
        percentiles: cfg.percentiles,
        significance: cfg.significance,
        global: global_stats(g),
        nodes: node_stats(g)
            .into_iter()
            .enumerate()
            .map(|(i, stats)| NodeRow {
                label: g.label(i),
                stats,
            })
            .collect(),
        blocks: part.as_ref().and_then(|p| block_stats(g, p).ok()),
        core_periphery: part.map(|p| p.labelled(g)),
        motifs: motif_census(g),
        models,
    })
}

/// Runs every period in order. Model failures are recorded per report.
pub fn run_pipeline(
    graphs: &[(String, WeightedDigraph)],
    cfg: &RunConfig,
) -> Result<Vec<PeriodReport>> {
    graphs
        .iter()
        .map(|(p, g)| analyze_period(p, g, cfg))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn percent_label(q: f64) -> String {
    format!("p{}", (q * 1e6).round() / 1e4)
}

/// Long format, one row per (period, model, statistic).
pub fn write_report_csv<W: Write>(out: W, reports: &[PeriodReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (lo, hi) = reports.first().map_or((0.025, 0.975), |r| r.percentiles);
    w.write_record([
        "period".to_string(),
        "model".into(),
        "statistic".into(),
        "empirical".into(),
        "mean".into(),
        "std".into(),
        percent_label(lo),
        percent_label(hi),
        "z".into(),
        "significant".into(),
    ])?;
    for r in reports {
        for m in &r.models {
            for s in &m.statistics {
                w.write_record([
                    r.period.clone(),
                    m.model.to_string(),
                    s.name.clone(),
                    cell(s.empirical),
                    cell(s.mean),
                    cell(s.std),
                    cell(s.p_lower),
                    cell(s.p_upper),
                    s.z.to_string(),
                    s.significant.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `model,period,motif_id,variant,z`.
pub fn write_motif_z_csv<W: Write>(out: W, reports: &[PeriodReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "period", "motif_id", "variant", "z"])?;
    for r in reports {
        for m in &r.models {
            for s in &m.statistics {
                let Some(rest) = s.name.strip_prefix("motif_") else {
                    continue;
                };
                let Some((id, variant)) = rest.split_once('_') else {
                    continue;
                };
                w.write_record([
                    m.model.as_str(),
                    r.period.as_str(),
                    id,
                    variant,
                    s.z.to_string().as_str(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Models whose fit failed or did not converge, as `(period, model, message)`.
pub fn failures(reports: &[PeriodReport]) -> Vec<(String, ModelKind, String)> {
    reports
        .iter()
        .flat_map(|r| {
            r.models
                .iter()
                .filter_map(|m| m.error.clone().map(|e| (r.period.clone(), m.model, e)))
        })
        .collect()
}

/// Writes `report.csv`, `motif_z.csv` and one `period_<key>.json` per period.
/// Returns the files written.
pub fn write_outputs(dir: &Path, reports: &[PeriodReport]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.csv");
    write_report_csv(fs::File::create(&path)?, reports)?;
    written.push(path);
    let path = dir.join("motif_z.csv");
    write_motif_z_csv(fs::File::create(&path)?, reports)?;
    written.push(path);
    for r in reports {
        let path = dir.join(format!("period_{}.json", r.period));
        fs::write(&path, serde_json::to_string_pretty(r)? + "\n")?;
        written.push(path);
    }
    Ok(written)
}
