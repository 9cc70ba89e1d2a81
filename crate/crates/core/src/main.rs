use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use icelink::bench::{self, prepare, run_benchmark, run_job, write_json, Stage};
use icelink::config::{ManifestSource, MatcherKind, ModeSelection, RunConfig};
use icelink::engine::snapshot::{read_snapshot, write_snapshot};
use icelink::error::{Error, Result};
use icelink::ingest::{export_temporal_graph, load_generic, load_iceid, write_edges, write_records, DatasetManifest};
use icelink::pairgen::{make_splits, write_pairs, PairMode};
use icelink::synth::{generate, write_dataset, SynthConfig};

/// Identity resolution benchmarks for historical census records.
#[derive(Parser)]
#[command(name = "icelink", version)]
struct Cli {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset manifest, overriding the one in the config.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// within, across, combined or both.
    #[arg(long, global = true)]
    mode: Option<ModeSelection>,
    /// nars or baseline.
    #[arg(long, global = true)]
    matcher: Option<MatcherKind>,
    /// Seed of run 0; run r uses base + r.
    #[arg(long = "seed-base", global = true)]
    seed_base: Option<u64>,
    /// Number of seeded runs per mode.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluate at this fixed threshold instead of calibrating.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and normalize a dataset, writing records.csv for census data.
    Ingest,
    /// Write the labeled pair set of every mode and run.
    Pairs,
    /// Full protocol: learn, calibrate, evaluate and diagnose every run.
    Run,
    /// Learn and calibrate only; writes thresholds.json and pool snapshots.
    Calibrate,
    /// Clustering and retrieval diagnostics on the held-out records.
    Diagnose {
        /// Score with this pool snapshot instead of learning one.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Write the temporal person graph as a directed edge list.
    ExportGraph,
    /// List a pool snapshot, most decisive patterns first.
    InspectPool { file: PathBuf },
    /// Write a synthetic labeled census dataset.
    Synth {
        #[arg(long, default_value_t = 500)]
        persons: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        missing_rate: f64,
    },
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(ManifestSource::Path(m.clone()));
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(m) = self.matcher {
            cfg.matcher = m;
        }
        if let Some(s) = self.seed_base {
            cfg.split.base_seed = s;
        }
        if let Some(r) = self.runs {
            cfg.split.runs = r;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.threshold {
            cfg.threshold = Some(t);
        }
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn manifest_of(cfg: &RunConfig) -> Result<DatasetManifest> {
    let source = cfg.manifest.as_ref().ok_or_else(|| Error::Config("no dataset manifest given".into()))?;
    let manifest = source.resolve()?;
    manifest.validate()?;
    Ok(manifest)
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let manifest = manifest_of(cfg)?;
    match manifest {
        DatasetManifest::Iceid { .. } => {
            let data = load_iceid(&manifest)?;
            let path = cfg.out.join("records.csv");
            write_records(&data, create(&path)?)?;
            let labeled = data.records.iter().filter(|r| r.is_labeled()).count();
            println!(
                "{} rows read, {} ingested ({labeled} labeled), {} skipped; wrote {}",
                data.rows_read,
                data.records.len(),
                data.rows_skipped,
                path.display()
            );
        }
        DatasetManifest::GenericEr { .. } => {
            let u = load_generic(&manifest)?;
            let positives = u.pairs.iter().filter(|p| p.2).count();
            println!(
                "{} + {} records, {} labeled pairs ({positives} matches), {} duplicates dropped",
                u.table_a.len(),
                u.table_b.len(),
                u.pairs.len(),
                u.duplicates_dropped
            );
        }
    }
    Ok(())
}

fn pairs(cfg: &RunConfig) -> Result<()> {
    let (_, data) = prepare(cfg)?;
    let plan = cfg.effective_split();
    for mode in data.modes(cfg.mode) {
        for run in 0..plan.runs {
            let seed = plan.seed_for_run(run);
            let set = data.pair_set(mode, &plan, seed);
            let split = make_splits(&data.records, &set, &plan, run);
            let dir = cfg.out.join(mode.as_str());
            write_pairs(&data.records, &set.pairs, None, create(&dir.join(format!("pairs_run_{run:02}.csv")))?)?;
            write_pairs(&data.records, &split.learn, None, create(&dir.join(format!("learn_run_{run:02}.csv")))?)?;
            write_pairs(&data.records, &split.eval, None, create(&dir.join(format!("eval_run_{run:02}.csv")))?)?;
            println!(
                "{mode} run {run} (seed {seed}): {} positives, {} negatives; {} learn, {} eval, {} held-out records",
                set.positives(),
                set.negatives(),
                split.learn.len(),
                split.eval.len(),
                split.holdout.len()
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    mode: PairMode,
    run: usize,
    seed: u64,
    threshold: f64,
}

#[derive(Serialize)]
struct DiagnosticsRow {
    mode: PairMode,
    run: usize,
    seed: u64,
    threshold: f64,
    #[serde(flatten)]
    diagnostics: icelink::metrics::Diagnostics,
}

fn jobs(cfg: &RunConfig, modes: &[PairMode]) -> Vec<(PairMode, usize)> {
    modes.iter().flat_map(|&m| (0..cfg.split.runs).map(move |r| (m, r))).collect()
}

fn calibrate(cfg: &RunConfig) -> Result<()> {
    let (_, data) = prepare(cfg)?;
    let outputs: Vec<_> = jobs(cfg, &data.modes(cfg.mode))
        .par_iter()
        .map(|&(mode, run)| run_job(&data, cfg, mode, run, Stage::Calibrate, None))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for o in &outputs {
        if let Some(pool) = o.matcher.pool() {
            let path = cfg.out.join(o.mode.as_str()).join(format!("pool_run_{:02}.tsv", o.run));
            write_snapshot(pool, create(&path)?).map_err(|e| Error::io(&path, e))?;
        }
        println!("{} run {} (seed {}): threshold {:.4}", o.mode, o.run, o.seed, o.threshold);
        rows.push(ThresholdRow { mode: o.mode, run: o.run, seed: o.seed, threshold: o.threshold });
    }
    write_json(&cfg.out.join("thresholds.json"), &rows)
}

fn diagnose(cfg: &RunConfig, pool: Option<&Path>) -> Result<()> {
    let (_, data) = prepare(cfg)?;
    let pool = match pool {
        Some(path) => {
            if cfg.matcher != MatcherKind::Nars {
                return Err(Error::Config("--pool only applies to the nars matcher".into()));
            }
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            Some(read_snapshot(BufReader::new(file), &path.display().to_string(), cfg.nars.capacity, cfg.nal)?)
        }
        None => None,
    };
    let outputs: Vec<_> = jobs(cfg, &data.modes(cfg.mode))
        .par_iter()
        .map(|&(mode, run)| run_job(&data, cfg, mode, run, Stage::Diagnose, pool.as_ref()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for o in outputs {
        let d = o.diagnostics.expect("diagnosed");
        println!(
            "{} run {}: ARI-CC {:.4}  ARI-Agg {:.4}  P@{k} {:.4}  R@{k} {:.4}  ({} batches)",
            o.mode,
            o.run,
            d.ari_cc,
            d.ari_agg,
            d.p_at_k,
            d.r_at_k,
            d.batches,
            k = cfg.diagnostics.k
        );
        rows.push(DiagnosticsRow { mode: o.mode, run: o.run, seed: o.seed, threshold: o.threshold, diagnostics: d });
    }
    write_json(&cfg.out.join("diagnostics.json"), &rows)
}

fn export_graph(cfg: &RunConfig) -> Result<()> {
    let manifest = manifest_of(cfg)?;
    let data = load_iceid(&manifest)?;
    let edges = export_temporal_graph(&data.records);
    let path = cfg.out.join("temporal_graph.csv");
    let mut out = create(&path)?;
    writeln!(out, "source,target").map_err(|e| Error::io(&path, e))?;
    write_edges(&edges, out).map_err(|e| Error::io(&path, e))?;
    println!("wrote {} directed edges to {}", edges.len(), path.display());
    Ok(())
}

fn inspect(cfg: &RunConfig, file: &Path) -> Result<()> {
    let f = File::open(file).map_err(|e| Error::io(file, e))?;
    let listing = bench::inspect_pool(BufReader::new(f), &file.display().to_string(), &cfg.nal)?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(listing.as_bytes()).map_err(|e| Error::io("stdout", e))
}

fn synth(cfg: &RunConfig, persons: usize, seed: u64, missing_rate: f64) -> Result<()> {
    let records = generate(&SynthConfig { persons, seed, missing_rate, ..Default::default() })?;
    let manifest = write_dataset(&records, &cfg.out)?;
    println!("wrote {} records; manifest at {}", records.len(), manifest.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Pairs => pairs(&cfg),
        Command::Run => {
            let outcome = run_benchmark(&cfg)?;
            let mut rows = outcome.aggregates.clone();
            rows.extend(outcome.combined.clone());
            for r in &rows {
                println!(
                    "{:<9} P {:.4}  R {:.4}  F1 {:.4}  Acc {:.4}  tau {:.4}  AUC {:.4}  ARI-CC {:.4}  ARI-Agg {:.4}",
                    r.mode, r.precision, r.recall, r.f1, r.accuracy, r.threshold, r.auc, r.ari_cc, r.ari_agg
                );
            }
            info!("reports in {}", outcome.out.display());
            Ok(())
        }
        Command::Calibrate => calibrate(&cfg),
        Command::Diagnose { pool } => diagnose(&cfg, pool.as_deref()),
        Command::ExportGraph => export_graph(&cfg),
        Command::InspectPool { file } => inspect(&cfg, file),
        Command::Synth { persons, seed, missing_rate } => synth(&cfg, *persons, *seed, *missing_rate),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
