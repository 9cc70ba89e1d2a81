//! Labeled pair construction, negative sampling and run splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::PersonRecord;

/// Which census waves a candidate pair may span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Both records from the same census wave.
    Within,
    /// Records from different waves.
    Across,
    /// Any two records.
    Combined,
}

impl PairMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PairMode::Within => "within",
            PairMode::Across => "across",
            PairMode::Combined => "combined",
        }
    }
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within" => Ok(PairMode::Within),
            "across" => Ok(PairMode::Across),
            "combined" => Ok(PairMode::Combined),
            other => Err(Error::Config(format!("unknown pair mode `{other}`"))),
        }
    }
}

/// Sampling ratios, caps and the multi-seed protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub holdout_record_fraction: f64,
    pub learn_eval_split: f64,
    pub neg_ratio: f64,
    pub cap: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Restrict cross-wave pairs to consecutive waves. Unset means the
    /// matcher's default: off for nars, on for the baseline.
    pub adjacent_waves: Option<bool>,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            holdout_record_fraction: 0.20,
            learn_eval_split: 0.80,
            neg_ratio: 2.0,
            cap: 500_000,
            runs: 10,
            base_seed: 42,
            adjacent_waves: None,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("holdout_record_fraction", self.holdout_record_fraction), ("learn_eval_split", self.learn_eval_split)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.neg_ratio.is_finite() && self.neg_ratio >= 0.0) {
            return Err(Error::Config(format!("neg_ratio must be nonnegative, got {}", self.neg_ratio)));
        }
        if self.cap == 0 {
            return Err(Error::Config("pair cap must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        Ok(())
    }

    pub fn adjacent(&self) -> bool {
        self.adjacent_waves.unwrap_or(false)
    }

    pub fn seed_for_run(&self, run_index: usize) -> u64 {
        self.base_seed + run_index as u64
    }
}

/// A pair of record indices (smaller first) with its match label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: u32,
    pub b: u32,
    pub label: bool,
}

impl LabeledPair {
    pub fn new(x: u32, y: u32, label: bool) -> Self {
        Self { a: x.min(y), b: x.max(y), label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<LabeledPair>,
    pub mode: PairMode,
    pub seed: u64,
}

impl PairSet {
    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.label).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }
}

/// Decides whether two records may form a candidate pair under a mode.
#[derive(Debug, Clone)]
pub struct WavePredicate {
    mode: PairMode,
    adjacent_only: bool,
    wave_rank: HashMap<i32, usize>,
}

impl WavePredicate {
    pub fn new(records: &[PersonRecord], mode: PairMode, adjacent_only: bool) -> Self {
        let mut waves: Vec<i32> = records.iter().map(|r| r.heimild).collect();
        waves.sort_unstable();
        waves.dedup();
        let wave_rank = waves.into_iter().enumerate().map(|(i, w)| (w, i)).collect();
        Self { mode, adjacent_only, wave_rank }
    }

    pub fn mode(&self) -> PairMode {
        self.mode
    }

    pub fn waves_ok(&self, w1: i32, w2: i32) -> bool {
        match self.mode {
            PairMode::Within => w1 == w2,
            PairMode::Combined => true,
            PairMode::Across if w1 == w2 => false,
            PairMode::Across if self.adjacent_only => {
                let (r1, r2) = (self.wave_rank[&w1], self.wave_rank[&w2]);
                r1.abs_diff(r2) == 1
            }
            PairMode::Across => true,
        }
    }

    pub fn allows(&self, r1: &PersonRecord, r2: &PersonRecord) -> bool {
        self.waves_ok(r1.heimild, r2.heimild)
    }
}

fn clusters(records: &[PersonRecord]) -> BTreeMap<&str, Vec<u32>> {
    let mut by_person: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(p) = r.person.as_deref() {
            by_person.entry(p).or_default().push(i as u32);
        }
    }
    by_person
}

/// Every same-person pair allowed by the predicate.
pub fn positive_pairs(records: &[PersonRecord], predicate: &WavePredicate) -> Vec<LabeledPair> {
    let mut out = Vec::new();
    for members in clusters(records).values() {
        for (i, &x) in members.iter().enumerate() {
            for &y in &members[i + 1..] {
                if predicate.allows(&records[x as usize], &records[y as usize]) {
                    out.push(LabeledPair::new(x, y, true));
                }
            }
        }
    }
    out
}

/// Positives kept and negatives requested, honoring ratio and cap.
pub fn pair_budget(n_pos: usize, plan: &SplitPlan) -> (usize, usize) {
    let n_neg = (plan.neg_ratio * n_pos as f64).round() as usize;
    if n_pos + n_neg <= plan.cap {
        return (n_pos, n_neg);
    }
    let pos_kept = ((plan.cap as f64 / (1.0 + plan.neg_ratio)).round() as usize).min(n_pos);
    (pos_kept, plan.cap - pos_kept)
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

struct LabeledIndex<'a> {
    records: &'a [PersonRecord],
    labeled: Vec<u32>,
    by_wave: BTreeMap<i32, Vec<u32>>,
}

impl<'a> LabeledIndex<'a> {
    fn new(records: &'a [PersonRecord]) -> Self {
        let labeled: Vec<u32> = (0..records.len() as u32).filter(|&i| records[i as usize].is_labeled()).collect();
        let mut by_wave: BTreeMap<i32, Vec<u32>> = BTreeMap::new();
        for &i in &labeled {
            by_wave.entry(records[i as usize].heimild).or_default().push(i);
        }
        Self { records, labeled, by_wave }
    }

    fn person(&self, i: u32) -> &str {
        self.records[i as usize].person.as_deref().expect("labeled")
    }

    fn is_negative(&self, x: u32, y: u32, predicate: &WavePredicate) -> bool {
        x != y && self.person(x) != self.person(y) && predicate.allows(&self.records[x as usize], &self.records[y as usize])
    }

    fn same_person_pairs(members: &[u32], records: &[PersonRecord]) -> u64 {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for &i in members {
            *counts.entry(records[i as usize].person.as_deref().expect("labeled")).or_default() += 1;
        }
        counts.values().map(|&c| choose2(c)).sum()
    }

    fn cross_same_person(a: &[u32], b: &[u32], records: &[PersonRecord]) -> u64 {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for &i in a {
            *counts.entry(records[i as usize].person.as_deref().expect("labeled")).or_default() += 1;
        }
        b.iter().map(|&i| counts.get(records[i as usize].person.as_deref().expect("labeled")).copied().unwrap_or(0)).sum()
    }

    fn adjacent_waves(&self) -> Vec<(i32, i32)> {
        let waves: Vec<i32> = self.by_wave.keys().copied().collect();
        waves.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Number of distinct different-person pairs the predicate allows.
    fn available(&self, predicate: &WavePredicate) -> u64 {
        let all = choose2(self.labeled.len() as u64) - Self::same_person_pairs(&self.labeled, self.records);
        let within: u64 = self
            .by_wave
            .values()
            .map(|m| choose2(m.len() as u64) - Self::same_person_pairs(m, self.records))
            .sum();
        match (predicate.mode, predicate.adjacent_only) {
            (PairMode::Within, _) => within,
            (PairMode::Combined, _) => all,
            (PairMode::Across, false) => all - within,
            (PairMode::Across, true) => self
                .adjacent_waves()
                .into_iter()
                .map(|(w1, w2)| {
                    let (a, b) = (&self.by_wave[&w1], &self.by_wave[&w2]);
                    a.len() as u64 * b.len() as u64 - Self::cross_same_person(a, b, self.records)
                })
                .sum(),
        }
    }

    fn enumerate(&self, predicate: &WavePredicate) -> Vec<LabeledPair> {
        let mut out = Vec::new();
        for (i, &x) in self.labeled.iter().enumerate() {
            for &y in &self.labeled[i + 1..] {
                if self.is_negative(x, y, predicate) {
                    out.push(LabeledPair::new(x, y, false));
                }
            }
        }
        out
    }
}

/// Uniformly samples `count` distinct different-person pairs allowed by the
/// predicate. Returns fewer (with a warning) when not enough exist.
pub fn sample_negatives(records: &[PersonRecord], predicate: &WavePredicate, count: usize, rng: &mut impl Rng) -> Vec<LabeledPair> {
    if count == 0 {
        return Vec::new();
    }
    let index = LabeledIndex::new(records);
    let available = index.available(predicate);
    if available == 0 {
        warn!("no {} negative pairs can be formed from these records", predicate.mode);
        return Vec::new();
    }
    if (count as u64) * 2 >= available {
        let mut all = index.enumerate(predicate);
        if (count as u64) > available {
            warn!("requested {count} {} negatives but only {available} exist", predicate.mode);
        }
        let take = count.min(all.len());
        let picks = rand::seq::index::sample(rng, all.len(), take);
        let mut out: Vec<LabeledPair> = picks.into_iter().map(|i| all[i]).collect();
        all.clear();
        out.sort_unstable();
        return out;
    }

    // Rejection sampling over a uniform proposal for each mode.
    let waves: Vec<&Vec<u32>> = index.by_wave.values().collect();
    let adjacent: Vec<(&Vec<u32>, &Vec<u32>)> =
        index.adjacent_waves().into_iter().map(|(a, b)| (&index.by_wave[&a], &index.by_wave[&b])).collect();
    let within_weights = WeightedIndex::new(waves.iter().map(|m| choose2(m.len() as u64) as f64)).ok();
    let adjacent_weights = WeightedIndex::new(adjacent.iter().map(|(a, b)| (a.len() * b.len()) as f64)).ok();

    let n = index.labeled.len();
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(count * 2);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x, y) = match (predicate.mode, predicate.adjacent_only) {
            (PairMode::Within, _) => {
                let m = waves[within_weights.as_ref().expect("within pairs exist").sample(rng)];
                (m[rng.random_range(0..m.len())], m[rng.random_range(0..m.len())])
            }
            (PairMode::Across, true) => {
                let (a, b) = adjacent[adjacent_weights.as_ref().expect("adjacent pairs exist").sample(rng)];
                (a[rng.random_range(0..a.len())], b[rng.random_range(0..b.len())])
            }
            _ => (index.labeled[rng.random_range(0..n)], index.labeled[rng.random_range(0..n)]),
        };
        if !index.is_negative(x, y, predicate) {
            continue;
        }
        let key = (x.min(y), x.max(y));
        if seen.insert(key) {
            out.push(LabeledPair::new(x, y, false));
        }
    }
    out
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Positives plus sampled negatives for one mode and seed.
pub fn build_pair_set(records: &[PersonRecord], mode: PairMode, plan: &SplitPlan, seed: u64) -> PairSet {
    let predicate = WavePredicate::new(records, mode, plan.adjacent());
    let mut positives = positive_pairs(records, &predicate);
    let (pos_kept, n_neg) = pair_budget(positives.len(), plan);
    let mut rng = rng_for(seed, 0);
    if pos_kept < positives.len() {
        let keep = rand::seq::index::sample(&mut rng, positives.len(), pos_kept);
        let mut kept: Vec<LabeledPair> = keep.into_iter().map(|i| positives[i]).collect();
        kept.sort_unstable();
        positives = kept;
    }
    let negatives = sample_negatives(records, &predicate, n_neg, &mut rng);
    let mut pairs = positives;
    pairs.extend(negatives);
    PairSet { pairs, mode, seed }
}

/// Held-out records plus the learn and evaluation pairs for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSplit {
    pub seed: u64,
    pub holdout: Vec<u32>,
    pub learn: Vec<LabeledPair>,
    pub eval: Vec<LabeledPair>,
}

/// Reserves whole person clusters (about `holdout_record_fraction` of the
/// labeled records) for diagnostics, drops pairs touching them, and splits
/// the rest into learn and evaluation pairs.
pub fn make_splits(records: &[PersonRecord], pairs: &PairSet, plan: &SplitPlan, run_index: usize) -> RunSplit {
    let seed = plan.seed_for_run(run_index);
    let mut rng = rng_for(seed, 1);

    let mut persons: Vec<(&str, Vec<u32>)> = clusters(records).into_iter().collect();
    persons.shuffle(&mut rng);
    let labeled: usize = persons.iter().map(|(_, m)| m.len()).sum();
    let target = (plan.holdout_record_fraction * labeled as f64).round() as usize;
    let mut holdout = Vec::new();
    for (_, members) in persons {
        if holdout.len() >= target {
            break;
        }
        holdout.extend(members);
    }
    holdout.sort_unstable();

    let mut in_holdout = vec![false; records.len()];
    for &i in &holdout {
        in_holdout[i as usize] = true;
    }
    let mut remaining: Vec<LabeledPair> =
        pairs.pairs.iter().copied().filter(|p| !in_holdout[p.a as usize] && !in_holdout[p.b as usize]).collect();
    remaining.shuffle(&mut rng);
    let n_learn = (plan.learn_eval_split * remaining.len() as f64).round() as usize;
    let eval = remaining.split_off(n_learn);
    RunSplit { seed, holdout, learn: remaining, eval }
}

/// Writes `id1,id2,label[,score]` rows with a header line.
pub fn write_pairs<W: Write>(
    records: &[PersonRecord],
    pairs: &[LabeledPair],
    scores: Option<&[f64]>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if scores.is_some() {
        w.write_record(["id1", "id2", "label", "score"])?;
    } else {
        w.write_record(["id1", "id2", "label"])?;
    }
    for (i, p) in pairs.iter().enumerate() {
        let (id1, id2) = (&records[p.a as usize].id, &records[p.b as usize].id);
        let label = if p.label { "1" } else { "0" };
        match scores {
            Some(s) => w.write_record([id1.as_str(), id2.as_str(), label, &s[i].to_string()])?,
            None => w.write_record([id1.as_str(), id2.as_str(), label])?,
        }
    }
    w.flush().map_err(|e| Error::io("pair file", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, person: &str, heimild: i32) -> PersonRecord {
        PersonRecord { id: id.to_string(), heimild, person: Some(person.into()), ..Default::default() }
    }

    /// `persons` people, each appearing once in every wave.
    fn panel(persons: usize, waves: &[i32]) -> Vec<PersonRecord> {
        let mut out = Vec::new();
        for p in 0..persons {
            for &w in waves {
                out.push(rec(out.len(), &format!("p{p}"), w));
            }
        }
        out
    }

    #[test]
    fn positive_pair_examples() {
        let recs = panel(1, &[1703, 1729, 1801]);
        let across = WavePredicate::new(&recs, PairMode::Across, false);
        assert_eq!(positive_pairs(&recs, &across).len(), 3);
        let within = WavePredicate::new(&recs, PairMode::Within, false);
        assert_eq!(positive_pairs(&recs, &within).len(), 0);
        let adjacent = WavePredicate::new(&recs, PairMode::Across, true);
        assert_eq!(positive_pairs(&recs, &adjacent).len(), 2);

        let singles = vec![rec(0, "a", 1703), rec(1, "b", 1703)];
        let pred = WavePredicate::new(&singles, PairMode::Combined, false);
        assert!(positive_pairs(&singles, &pred).is_empty());
    }

    #[test]
    fn budget_examples() {
        let plan = SplitPlan { cap: usize::MAX / 4, ..Default::default() };
        assert_eq!(pair_budget(10, &plan), (10, 20));
        assert_eq!(pair_budget(0, &plan), (0, 0));
        assert_eq!(pair_budget(300_000, &SplitPlan::default()), (166_667, 333_333));
    }

    #[test]
    fn negatives_meet_ratio_and_constraints() {
        let recs = panel(30, &[1703, 1729, 1801]);
        let plan = SplitPlan::default();
        for mode in [PairMode::Across, PairMode::Within, PairMode::Combined] {
            let set = build_pair_set(&recs, mode, &plan, 42);
            let pred = WavePredicate::new(&recs, mode, false);
            let (pos, neg) = (set.positives(), set.negatives());
            if mode == PairMode::Within {
                assert_eq!(pos, 0);
            } else {
                assert_eq!(neg, 2 * pos);
            }
            let mut uniq = HashSet::new();
            for p in &set.pairs {
                assert!(p.a < p.b);
                assert!(pred.allows(&recs[p.a as usize], &recs[p.b as usize]));
                assert_eq!(p.label, recs[p.a as usize].person == recs[p.b as usize].person);
                assert!(uniq.insert((p.a, p.b)));
            }
        }
    }

    #[test]
    fn exhaustive_branch_when_negatives_are_scarce() {
        // 3 persons × 2 waves: 12 cross-wave pairs, 3 positive, 6 negative available.
        let recs = panel(3, &[1703, 1729]);
        let set = build_pair_set(&recs, PairMode::Across, &SplitPlan::default(), 1);
        assert_eq!(set.positives(), 3);
        assert_eq!(set.negatives(), 6);
    }

    #[test]
    fn impossible_mode_yields_empty() {
        let recs = panel(5, &[1703]);
        let pred = WavePredicate::new(&recs, PairMode::Across, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_negatives(&recs, &pred, 10, &mut rng).is_empty());
    }

    #[test]
    fn splits_are_deterministic_and_disjoint() {
        let recs = panel(50, &[1703, 1729, 1801]);
        let plan = SplitPlan::default();
        let set = build_pair_set(&recs, PairMode::Across, &plan, 42);
        let s1 = make_splits(&recs, &set, &plan, 0);
        let s2 = make_splits(&recs, &set, &plan, 0);
        assert_eq!(s1, s2);
        assert_eq!(s1.seed, 42);
        assert_eq!(make_splits(&recs, &set, &plan, 9).seed, 51);
        assert_eq!(s1.holdout.len(), 30);
        let hold: HashSet<u32> = s1.holdout.iter().copied().collect();
        let learn: HashSet<_> = s1.learn.iter().collect();
        for p in s1.learn.iter().chain(&s1.eval) {
            assert!(!hold.contains(&p.a) && !hold.contains(&p.b));
        }
        assert!(s1.eval.iter().all(|p| !learn.contains(p)));
        let n = s1.learn.len() + s1.eval.len();
        assert_eq!(s1.learn.len(), (0.8 * n as f64).round() as usize);
    }

    #[test]
    fn pair_file_format() {
        let recs = panel(1, &[1703, 1729]);
        let mut buf = Vec::new();
        write_pairs(&recs, &[LabeledPair::new(1, 0, true)], None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id1,id2,label\n0,1,1\n");
        let mut buf = Vec::new();
        write_pairs(&recs, &[LabeledPair::new(0, 1, false)], Some(&[0.25]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id1,id2,label,score\n0,1,0,0.25\n");
    }
}
