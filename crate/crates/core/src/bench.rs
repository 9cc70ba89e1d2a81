//! The multi-run protocol: build pairs, learn, calibrate, evaluate and
//! diagnose per mode and seed, then write per-run and aggregated reports.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{blocked_score, RuleConfig};
use crate::config::{ManifestSource, MatcherKind, ModeSelection, RunConfig};
use crate::engine::snapshot::{read_rows, write_snapshot};
use crate::engine::{midpoint_threshold, JudgmentSet, PatternPool};
use crate::error::{Error, Result};
use crate::featurize::{age_disparity_threshold, pair_judgments, AgeDisparityThreshold, PersonRecord};
use crate::ingest::{generic_judgments, load_generic, load_iceid, DatasetManifest, GenericRecord};
use crate::metrics::cluster::UnionFind;
use crate::metrics::{
    aggregate_runs, auc, best_threshold, combine_modes, diagnose, pairwise_metrics, plan_batches, write_summary_csv,
    Diagnostics, EvalReport,
};
use crate::pairgen::{build_pair_set, make_splits, LabeledPair, PairMode, PairSet, RunSplit, SplitPlan, WavePredicate};
use crate::truth::NalConfig;

enum Features {
    Census(AgeDisparityThreshold),
    Generic(Vec<GenericRecord>),
}

/// A loaded dataset ready for pair construction. Generic two-table data is
/// mapped onto records whose wave is the table (0 or 1) and whose person
/// label is the match component, so cross-table pairs are "across" pairs.
pub struct Prepared {
    pub records: Vec<PersonRecord>,
    features: Features,
    fixed_pairs: Option<Vec<LabeledPair>>,
}

impl Prepared {
    pub fn census(records: Vec<PersonRecord>) -> Result<Self> {
        let records: Vec<PersonRecord> = records.into_iter().filter(PersonRecord::is_labeled).collect();
        let thr = age_disparity_threshold(&records)?;
        info!("{} labeled records, age-disparity threshold {} years", records.len(), thr.years());
        Ok(Self { records, features: Features::Census(thr), fixed_pairs: None })
    }

    pub fn load(manifest: &DatasetManifest, cfg: &RunConfig) -> Result<Self> {
        manifest.validate()?;
        match manifest {
            DatasetManifest::Iceid { .. } => {
                let mut records: Vec<PersonRecord> =
                    load_iceid(manifest)?.records.into_iter().filter(PersonRecord::is_labeled).collect();
                if let Some(n) = cfg.subsample_rows {
                    records = subsample_persons(records, n, cfg.split.base_seed);
                }
                Self::census(records)
            }
            DatasetManifest::GenericEr { .. } => Self::generic(load_generic(manifest)?),
        }
    }

    fn generic(universe: crate::ingest::GenericUniverse) -> Result<Self> {
        let n_a = universe.table_a.len() as u32;
        let mut used: Vec<u32> = universe.pairs.iter().flat_map(|&(a, b, _)| [a, n_a + b]).collect();
        used.sort_unstable();
        used.dedup();
        let slot: HashMap<u32, u32> = used.iter().enumerate().map(|(i, &g)| (g, i as u32)).collect();
        let mut uf = UnionFind::new(used.len());
        for &(a, b, label) in &universe.pairs {
            if label {
                uf.union(slot[&a] as usize, slot[&(n_a + b)] as usize);
            }
        }
        let components = uf.labels();
        let mut generic = Vec::with_capacity(used.len());
        let mut records = Vec::with_capacity(used.len());
        for (i, &g) in used.iter().enumerate() {
            let (table, rec) = if g < n_a {
                (0, &universe.table_a[g as usize])
            } else {
                (1, &universe.table_b[(g - n_a) as usize])
            };
            records.push(PersonRecord {
                id: format!("{}:{}", if table == 0 { "a" } else { "b" }, rec.id),
                heimild: table,
                person: Some(format!("c{}", components[i])),
                ..Default::default()
            });
            generic.push(rec.clone());
        }
        let pairs = universe.pairs.iter().map(|&(a, b, label)| LabeledPair::new(slot[&a], slot[&(n_a + b)], label)).collect();
        Ok(Self { records, features: Features::Generic(generic), fixed_pairs: Some(pairs) })
    }

    pub fn is_generic(&self) -> bool {
        matches!(self.features, Features::Generic(_))
    }

    pub fn age_threshold(&self) -> Option<AgeDisparityThreshold> {
        match self.features {
            Features::Census(thr) => Some(thr),
            Features::Generic(_) => None,
        }
    }

    pub fn judgments(&self, a: u32, b: u32) -> JudgmentSet {
        let (a, b) = (a as usize, b as usize);
        match &self.features {
            Features::Census(thr) => pair_judgments(&self.records[a], &self.records[b], *thr),
            Features::Generic(recs) => {
                // Table A first so attribute order is stable.
                let (x, y) = if self.records[a].heimild <= self.records[b].heimild { (a, b) } else { (b, a) };
                generic_judgments(&recs[x], &recs[y])
            }
        }
    }

    pub fn modes(&self, selection: ModeSelection) -> Vec<PairMode> {
        if self.is_generic() {
            vec![PairMode::Across]
        } else {
            selection.modes()
        }
    }

    pub fn pair_set(&self, mode: PairMode, plan: &SplitPlan, seed: u64) -> PairSet {
        match &self.fixed_pairs {
            Some(pairs) => PairSet { pairs: pairs.clone(), mode, seed },
            None => build_pair_set(&self.records, mode, plan, seed),
        }
    }
}

/// Keeps whole labeled persons, in seeded random order, until at least `n`
/// rows are kept. Original row order is preserved.
pub fn subsample_persons(records: Vec<PersonRecord>, n: usize, seed: u64) -> Vec<PersonRecord> {
    let mut by_person: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(p) = r.person.as_deref() {
            by_person.entry(p).or_default().push(i);
        }
    }
    let mut persons: Vec<Vec<usize>> = by_person.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    persons.shuffle(&mut rng);
    let mut keep = vec![false; records.len()];
    let mut kept = 0;
    for members in persons {
        if kept >= n {
            break;
        }
        kept += members.len();
        for i in members {
            keep[i] = true;
        }
    }
    records.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect()
}

/// A trained (or rule-based) pair scorer.
#[allow(clippy::large_enum_variant)]
pub enum Matcher<'a> {
    Nars { pool: PatternPool, n_reference: usize },
    Baseline { rules: &'a RuleConfig, thr: AgeDisparityThreshold },
}

impl Matcher<'_> {
    pub fn score(&self, data: &Prepared, a: u32, b: u32) -> Result<f64> {
        match self {
            Matcher::Nars { pool, n_reference } => pool.score(&data.judgments(a, b), *n_reference),
            Matcher::Baseline { rules, thr } => {
                Ok(blocked_score(&data.records[a as usize], &data.records[b as usize], *thr, rules))
            }
        }
    }

    pub fn pool(&self) -> Option<&PatternPool> {
        match self {
            Matcher::Nars { pool, .. } => Some(pool),
            Matcher::Baseline { .. } => None,
        }
    }
}

/// How far a job proceeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Calibrate,
    Diagnose,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub run: usize,
    pub seed: u64,
    pub best_threshold: f64,
    pub best_f1: f64,
}

pub struct JobOutput<'a> {
    pub mode: PairMode,
    pub run: usize,
    pub seed: u64,
    pub threshold: f64,
    pub matcher: Matcher<'a>,
    pub split: RunSplit,
    pub report: Option<EvalReport>,
    pub sweep: Option<SweepPoint>,
    pub diagnostics: Option<Diagnostics>,
    pub eval_scores: Vec<f64>,
}

/// Pairs visited while learning: the learn pairs in seeded random order,
/// cycled when there are fewer pairs than iterations.
pub fn learn_order(learn: &[LabeledPair], seed: u64) -> Vec<LabeledPair> {
    let mut order = learn.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    order.shuffle(&mut rng);
    order
}

fn par_scores(matcher: &Matcher<'_>, data: &Prepared, pairs: &[LabeledPair]) -> Result<Vec<f64>> {
    pairs.par_iter().map(|p| matcher.score(data, p.a, p.b)).collect()
}

fn train<'a>(data: &Prepared, cfg: &'a RunConfig, order: &[LabeledPair], pool: Option<&PatternPool>) -> Result<Matcher<'a>> {
    match cfg.matcher {
        MatcherKind::Baseline => {
            let thr = data
                .age_threshold()
                .ok_or_else(|| Error::Config("the baseline matcher needs census records".into()))?;
            Ok(Matcher::Baseline { rules: &cfg.rules, thr })
        }
        MatcherKind::Nars => {
            if let Some(pool) = pool {
                return Ok(Matcher::Nars { pool: pool.clone(), n_reference: cfg.nars.n_reference });
            }
            let mut pool = PatternPool::new(cfg.nars.capacity, cfg.nal)?;
            for i in 0..cfg.nars.learn_iterations {
                let slot = i % order.len();
                let p = order[slot];
                // One source per distinct pair: revisits add no new evidence.
                pool.learn(data.judgments(p.a, p.b), p.label, slot as u64, cfg.nars.inference_budget)?;
            }
            Ok(Matcher::Nars { pool, n_reference: cfg.nars.n_reference })
        }
    }
}

/// Runs one (mode, run) job up to `stage`. A supplied pool replaces
/// learning.
pub fn run_job<'a>(
    data: &Prepared,
    cfg: &'a RunConfig,
    mode: PairMode,
    run: usize,
    stage: Stage,
    pool: Option<&PatternPool>,
) -> Result<JobOutput<'a>> {
    let plan = cfg.effective_split();
    let seed = plan.seed_for_run(run);
    let pairs = data.pair_set(mode, &plan, seed);
    let split = make_splits(&data.records, &pairs, &plan, run);
    let context = |what: &str| format!("{mode} run {run} (seed {seed}): {what}");
    if split.learn.is_empty() && pool.is_none() {
        return Err(Error::Calibration(context("no learn pairs; does the dataset support this mode?")));
    }

    let order = learn_order(&split.learn, seed);
    let matcher = train(data, cfg, &order, pool)?;
    let visited = &order[..order.len().min(cfg.nars.learn_iterations)];
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => {
            let scores = par_scores(&matcher, data, visited)?;
            let (pos, neg): (Vec<_>, Vec<_>) = scores.iter().zip(visited).partition(|(_, p)| p.label);
            let pos: Vec<f64> = pos.into_iter().map(|(s, _)| *s).collect();
            let neg: Vec<f64> = neg.into_iter().map(|(s, _)| *s).collect();
            midpoint_threshold(&pos, &neg).map_err(|e| Error::Calibration(context(&e.to_string())))?
        }
    };
    let mut out = JobOutput {
        mode,
        run,
        seed,
        threshold,
        matcher,
        split,
        report: None,
        sweep: None,
        diagnostics: None,
        eval_scores: Vec::new(),
    };
    if stage == Stage::Calibrate {
        return Ok(out);
    }

    let diagnostics = run_diagnostics(data, cfg, &out, mode)?;
    out.diagnostics = Some(diagnostics);
    if stage == Stage::Diagnose {
        return Ok(out);
    }

    let scores = par_scores(&out.matcher, data, &out.split.eval)?;
    let labels: Vec<bool> = out.split.eval.iter().map(|p| p.label).collect();
    let m = pairwise_metrics(&scores, &labels, threshold).map_err(|e| Error::Calibration(context(&e.to_string())))?;
    let auc = auc(&scores, &labels).map_err(|e| Error::Calibration(context(&e.to_string())))?;
    let (best_threshold, best_f1) = best_threshold(&scores, &labels)?;
    out.report = Some(EvalReport {
        mode: mode.as_str().to_string(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        accuracy: m.accuracy,
        threshold,
        auc,
        ari_cc: diagnostics.ari_cc,
        ari_agg: diagnostics.ari_agg,
        p_at_k: diagnostics.p_at_k,
        r_at_k: diagnostics.r_at_k,
        runs_aggregated: 1,
    });
    out.sweep = Some(SweepPoint { run, seed, best_threshold, best_f1 });
    out.eval_scores = scores;
    Ok(out)
}

fn run_diagnostics(data: &Prepared, cfg: &RunConfig, job: &JobOutput<'_>, mode: PairMode) -> Result<Diagnostics> {
    let mut clusters: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for &i in &job.split.holdout {
        if let Some(p) = data.records[i as usize].person.as_deref() {
            clusters.entry(p).or_default().push(i);
        }
    }
    let clusters: Vec<Vec<u32>> = clusters.into_values().collect();
    let batches = plan_batches(&clusters, &cfg.diagnostics, job.seed);
    let predicate = WavePredicate::new(&data.records, mode, cfg.effective_split().adjacent());
    let labels: Vec<&str> = data.records.iter().map(|r| r.person.as_deref().unwrap_or_default()).collect();
    diagnose(&batches, |m| labels[m as usize], job.threshold, cfg.diagnostics.k, |a, b| {
        if predicate.allows(&data.records[a as usize], &data.records[b as usize]) {
            job.matcher.score(data, a, b).map(Some)
        } else {
            Ok(None)
        }
    })
}

/// Results of a full benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub runs: Vec<EvalReport>,
    pub aggregates: Vec<EvalReport>,
    pub combined: Option<EvalReport>,
    pub out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Resolves the manifest and loads the dataset after validating `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<(DatasetManifest, Prepared)> {
    cfg.validate()?;
    let manifest = cfg.manifest.as_ref().expect("validated").resolve()?;
    let data = Prepared::load(&manifest, cfg)?;
    Ok((manifest, data))
}

/// Writes the fully resolved configuration next to the results.
pub fn echo_config(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<()> {
    let mut effective = cfg.clone();
    effective.manifest = Some(ManifestSource::Inline(manifest.clone()));
    effective.split = cfg.effective_split();
    write_json(&cfg.out.join("config.json"), &effective)
}

/// Runs every (mode, run) job in parallel and writes reports and artifacts.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchOutcome> {
    let (manifest, data) = prepare(cfg)?;
    run_prepared(cfg, &manifest, &data)
}

pub fn run_prepared(cfg: &RunConfig, manifest: &DatasetManifest, data: &Prepared) -> Result<BenchOutcome> {
    let modes = data.modes(cfg.mode);
    let jobs: Vec<(PairMode, usize)> = modes.iter().flat_map(|&m| (0..cfg.split.runs).map(move |r| (m, r))).collect();
    let outputs: Vec<JobOutput<'_>> =
        jobs.par_iter().map(|&(mode, run)| run_job(data, cfg, mode, run, Stage::Evaluate, None)).collect::<Result<_>>()?;

    echo_config(cfg, manifest)?;
    let mut runs = Vec::new();
    let mut aggregates = Vec::new();
    for &mode in &modes {
        let dir = cfg.out.join(mode.as_str());
        let mine: Vec<&JobOutput<'_>> = outputs.iter().filter(|o| o.mode == mode).collect();
        let reports: Vec<EvalReport> = mine.iter().map(|o| o.report.clone().expect("evaluated")).collect();
        let sweeps: Vec<SweepPoint> = mine.iter().map(|o| o.sweep.clone().expect("evaluated")).collect();
        for (o, r) in mine.iter().zip(&reports) {
            write_json(&dir.join(format!("run_{:02}.json", o.run)), r)?;
            if let Some(pool) = o.matcher.pool() {
                let path = dir.join(format!("pool_run_{:02}.tsv", o.run));
                write_snapshot(pool, create(&path)?).map_err(|e| Error::io(&path, e))?;
            }
            if cfg.write_scores {
                let path = dir.join(format!("scores_run_{:02}.csv", o.run));
                crate::pairgen::write_pairs(&data.records, &o.split.eval, Some(&o.eval_scores), create(&path)?)?;
            }
        }
        write_json(&dir.join("sweep.json"), &sweeps)?;
        let agg = aggregate_runs(&reports)?;
        write_json(&dir.join("aggregate.json"), &agg)?;
        runs.extend(reports);
        aggregates.push(agg);
    }
    let combined = if cfg.mode == ModeSelection::Both && aggregates.len() == 2 {
        let c = combine_modes("combined", &aggregates)?;
        write_json(&cfg.out.join("combined.json"), &c)?;
        Some(c)
    } else {
        None
    };
    let mut summary: Vec<EvalReport> = aggregates.clone();
    summary.extend(combined.clone());
    write_summary_csv(&summary, create(&cfg.out.join("summary.csv"))?)?;
    info!("wrote {} run reports to {}", runs.len(), cfg.out.display());
    Ok(BenchOutcome { runs, aggregates, combined, out: cfg.out.clone() })
}

/// Human-readable pool listing, most decisive patterns first.
pub fn inspect_pool<R: BufRead>(input: R, origin: &str, nal: &NalConfig) -> Result<String> {
    let rows = read_rows(input, origin)?;
    let mut listed: Vec<(f64, String)> = rows
        .iter()
        .map(|row| {
            let e = row.truth.expectation(nal);
            let f = row.truth.frequency().map(|f| format!("{f:.4}")).unwrap_or_else(|_| "-".into());
            let line = format!(
                "{e:.4}\t{f}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}",
                row.truth.confidence(nal),
                row.truth.w_plus,
                row.truth.w_minus,
                row.source_count,
                row.judgments
            );
            ((e - 0.5).abs(), line)
        })
        .collect();
    listed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    if listed.is_empty() {
        return Ok(String::new());
    }
    let mut out = String::from("e\tf\tc\tw_plus\tw_minus\tsources\tjudgments\n");
    for (_, line) in listed {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::snapshot::write_snapshot;
    use crate::engine::Judgment;
    use crate::synth::{generate, SynthConfig};

    fn set(items: &[&str]) -> JudgmentSet {
        items.iter().map(|s| s.parse::<Judgment>().unwrap()).collect()
    }

    #[test]
    fn subsample_keeps_whole_persons() {
        let recs = generate(&SynthConfig { persons: 30, ..Default::default() }).unwrap();
        let sub = subsample_persons(recs.clone(), 10, 1);
        assert_eq!(sub.len(), 12);
        assert_eq!(sub, subsample_persons(recs, 10, 1));
    }

    #[test]
    fn inspect_listing() {
        let nal = NalConfig::default();
        assert_eq!(inspect_pool("".as_bytes(), "pool", &nal).unwrap(), "");

        let mut pool = PatternPool::new(10, nal).unwrap();
        pool.learn(set(&["name:same"]), true, 1, 0).unwrap();
        pool.learn(set(&["name:different", "sex:same"]), false, 2, 0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&pool, &mut buf).unwrap();
        let listing = inspect_pool(buf.as_slice(), "pool", &nal).unwrap();
        let lines: Vec<&str> = listing.lines().collect();
        assert_eq!(lines.len(), 3);
        // Both patterns are equally decisive; ties list by text.
        assert_eq!(lines[1], "0.0500\t0.0000\t0.9000\t0.0000\t9.0000\t1\t{name:different, sex:same}");
        assert_eq!(lines[2], "0.9500\t1.0000\t0.9000\t9.0000\t0.0000\t1\t{name:same}");

        let reimported = crate::engine::snapshot::read_snapshot(buf.as_slice(), "pool", 10, nal).unwrap();
        let mut again = Vec::new();
        write_snapshot(&reimported, &mut again).unwrap();
        assert_eq!(inspect_pool(again.as_slice(), "pool", &nal).unwrap(), listing);
    }

    #[test]
    fn malformed_snapshot_reports_line() {
        let text = "# header\nname:same\t1\t0\t1\nbroken line\n";
        match inspect_pool(text.as_bytes(), "pool.tsv", &NalConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
