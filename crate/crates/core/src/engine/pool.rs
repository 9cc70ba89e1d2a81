use std::collections::{BTreeSet, HashMap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::engine::judgment::{Judgment, JudgmentSet};
use crate::engine::pattern::{infer, Pattern, SourceId};
use crate::error::{Error, Result};
use crate::truth::{NalConfig, Truth};

/// Knobs for learning and recognition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    /// Reference patterns consulted per query, half from each end of the pool.
    pub n_reference: usize,
    pub capacity: usize,
    /// Labeled pairs visited while learning.
    pub learn_iterations: usize,
    /// Partner patterns the inference rule is applied with per learned pair.
    pub inference_budget: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self { n_reference: 10, capacity: 10_000, learn_iterations: 5_000, inference_budget: 3 }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reference == 0 || !self.n_reference.is_multiple_of(2) {
            return Err(Error::Config(format!("n_reference must be a positive even integer, got {}", self.n_reference)));
        }
        if self.capacity == 0 {
            return Err(Error::Config("pool capacity must be positive".into()));
        }
        if self.learn_iterations == 0 {
            return Err(Error::Config("learn_iterations must be positive".into()));
        }
        if self.n_reference > self.capacity {
            return Err(Error::Config(format!(
                "n_reference ({}) exceeds pool capacity ({})",
                self.n_reference, self.capacity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertOutcome {
    /// A new judgment set entered the pool.
    Inserted,
    /// An existing pattern absorbed independent evidence.
    Revised,
    /// The existing pattern already holds evidence from one of the sources;
    /// nothing changed.
    Overlapping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertReport {
    pub outcome: InsertOutcome,
    /// Pattern dropped to keep the pool within capacity.
    pub evicted: Option<Pattern>,
}

#[derive(Clone)]
struct Entry {
    pattern: Pattern,
    ids: Vec<u32>,
    seq: u64,
    expectation: f64,
    confidence: f64,
}

type OrderKey = (OrderedFloat<f64>, u64, usize);
type EvictKey = (OrderedFloat<f64>, OrderedFloat<f64>, u64, usize);

impl Entry {
    fn order_key(&self, slot: usize) -> OrderKey {
        (OrderedFloat(self.expectation), self.seq, slot)
    }

    /// Least decisive first; ties go to lower confidence, then older entries.
    fn evict_key(&self, slot: usize) -> EvictKey {
        (OrderedFloat((self.expectation - 0.5).abs()), OrderedFloat(self.confidence), self.seq, slot)
    }
}

/// Capacity-bounded store of patterns kept in ascending order of expectation.
#[derive(Clone)]
pub struct PatternPool {
    nal: NalConfig,
    capacity: usize,
    slots: Vec<Option<Entry>>,
    free: Vec<usize>,
    index: HashMap<JudgmentSet, usize>,
    by_expectation: BTreeSet<OrderKey>,
    by_decisiveness: BTreeSet<EvictKey>,
    interner: HashMap<Judgment, u32>,
    marks: Vec<bool>,
    next_seq: u64,
}

impl std::fmt::Debug for PatternPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PatternPool").field("len", &self.len()).field("capacity", &self.capacity).finish()
    }
}

impl PatternPool {
    pub fn new(capacity: usize, nal: NalConfig) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("pool capacity must be positive".into()));
        }
        nal.validate()?;
        Ok(Self {
            nal,
            capacity,
            slots: Vec::new(),
            free: Vec::new(),
            index: HashMap::new(),
            by_expectation: BTreeSet::new(),
            by_decisiveness: BTreeSet::new(),
            interner: HashMap::new(),
            marks: Vec::new(),
            next_seq: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn nal(&self) -> &NalConfig {
        &self.nal
    }

    fn entry(&self, slot: usize) -> &Entry {
        self.slots[slot].as_ref().expect("indexed slot is occupied")
    }

    /// Patterns in ascending order of expectation.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Pattern> + '_ {
        self.by_expectation.iter().map(move |&(_, _, slot)| &self.entry(slot).pattern)
    }

    pub fn get(&self, judgments: &JudgmentSet) -> Option<&Pattern> {
        self.index.get(judgments).map(|&slot| &self.entry(slot).pattern)
    }

    fn intern(&mut self, judgments: &JudgmentSet) -> Vec<u32> {
        judgments
            .iter()
            .map(|j| {
                let next = self.interner.len() as u32;
                *self.interner.entry(j.clone()).or_insert(next)
            })
            .collect()
    }

    fn unlink(&mut self, slot: usize) {
        let entry = self.slots[slot].as_ref().expect("occupied");
        let (ok, ek) = (entry.order_key(slot), entry.evict_key(slot));
        self.by_expectation.remove(&ok);
        self.by_decisiveness.remove(&ek);
    }

    fn link(&mut self, slot: usize) {
        let entry = self.slots[slot].as_ref().expect("occupied");
        let (ok, ek) = (entry.order_key(slot), entry.evict_key(slot));
        self.by_expectation.insert(ok);
        self.by_decisiveness.insert(ek);
    }

    fn remove_slot(&mut self, slot: usize) -> Pattern {
        self.unlink(slot);
        let entry = self.slots[slot].take().expect("occupied");
        self.index.remove(&entry.pattern.judgments);
        self.free.push(slot);
        entry.pattern
    }

    /// Adds a pattern, revising an existing one with the same judgment set
    /// when their sources are independent.
    pub fn insert(&mut self, pattern: Pattern) -> InsertReport {
        if let Some(&slot) = self.index.get(&pattern.judgments) {
            let entry = self.slots[slot].as_ref().expect("occupied");
            if !entry.pattern.sources.is_disjoint(&pattern.sources) {
                return InsertReport { outcome: InsertOutcome::Overlapping, evicted: None };
            }
            self.unlink(slot);
            let nal = self.nal;
            let entry = self.slots[slot].as_mut().expect("occupied");
            entry.pattern.truth = entry.pattern.truth.revise(&pattern.truth);
            entry.pattern.sources = entry.pattern.sources.union(&pattern.sources);
            entry.expectation = entry.pattern.truth.expectation(&nal);
            entry.confidence = entry.pattern.truth.confidence(&nal);
            self.link(slot);
            return InsertReport { outcome: InsertOutcome::Revised, evicted: None };
        }

        let ids = self.intern(&pattern.judgments);
        let entry = Entry {
            expectation: pattern.truth.expectation(&self.nal),
            confidence: pattern.truth.confidence(&self.nal),
            seq: self.next_seq,
            ids,
            pattern,
        };
        self.next_seq += 1;
        let slot = match self.free.pop() {
            Some(slot) => slot,
            None => {
                self.slots.push(None);
                self.slots.len() - 1
            }
        };
        self.index.insert(entry.pattern.judgments.clone(), slot);
        self.slots[slot] = Some(entry);
        self.link(slot);

        let evicted = if self.len() > self.capacity {
            let &(_, _, _, victim) = self.by_decisiveness.first().expect("pool is nonempty");
            Some(self.remove_slot(victim))
        } else {
            None
        };
        InsertReport { outcome: InsertOutcome::Inserted, evicted }
    }

    /// Up to `budget` patterns sharing the most judgments with `judgments`,
    /// excluding the identical set. Ties prefer more decisive, then older
    /// patterns.
    fn partners(&mut self, judgments: &JudgmentSet, budget: usize) -> Vec<Pattern> {
        if budget == 0 || self.is_empty() {
            return Vec::new();
        }
        self.marks.clear();
        self.marks.resize(self.interner.len(), false);
        for j in judgments {
            if let Some(&id) = self.interner.get(j) {
                self.marks[id as usize] = true;
            }
        }

        // (overlap, decisiveness, seq, slot), best first.
        let mut best: Vec<(usize, f64, u64, usize)> = Vec::with_capacity(budget + 1);
        let better = |a: &(usize, f64, u64, usize), b: &(usize, f64, u64, usize)| {
            a.0 > b.0 || (a.0 == b.0 && (a.1 > b.1 || (a.1 == b.1 && a.2 < b.2)))
        };
        for (slot, entry) in self.slots.iter().enumerate() {
            let Some(entry) = entry else { continue };
            let overlap = entry.ids.iter().filter(|&&id| self.marks[id as usize]).count();
            if overlap == 0 {
                continue;
            }
            if overlap == judgments.len() && entry.ids.len() == overlap {
                continue;
            }
            let cand = (overlap, (entry.expectation - 0.5).abs(), entry.seq, slot);
            if best.len() == budget && !better(&cand, best.last().expect("full")) {
                continue;
            }
            let pos = best.iter().position(|b| better(&cand, b)).unwrap_or(best.len());
            best.insert(pos, cand);
            best.truncate(budget);
        }
        best.into_iter().map(|(_, _, _, slot)| self.entry(slot).pattern.clone()).collect()
    }

    /// Learns from one labeled pair: inserts the observed pattern and applies
    /// the inference rule against the best-overlapping existing patterns.
    pub fn learn(&mut self, judgments: JudgmentSet, label: bool, source: SourceId, inference_budget: usize) -> Result<()> {
        let observed = Pattern::observed(judgments, label, source, &self.nal)?;
        let partners = self.partners(&observed.judgments, inference_budget);
        self.insert(observed.clone());
        for partner in &partners {
            for child in infer(&observed, partner) {
                self.insert(child);
            }
        }
        Ok(())
    }

    /// Reference patterns for recognition: up to `n/2` from the low end and
    /// `n/2` from the high end of the expectation order, without repeats.
    pub fn references(&self, n_reference: usize) -> Vec<&Pattern> {
        if self.len() <= n_reference {
            return self.iter().collect();
        }
        let half = n_reference / 2;
        let mut refs: Vec<&Pattern> = self.iter().take(half).collect();
        refs.extend(self.iter().rev().take(n_reference - half));
        refs
    }

    /// Expectation of the revised match truths between `query` and the
    /// reference patterns. Higher means more likely the same individual.
    pub fn score(&self, query: &JudgmentSet, n_reference: usize) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::NoKnowledge);
        }
        if query.is_empty() {
            return Err(Error::InvalidPattern("query judgment set is empty".into()));
        }
        let revised: Truth = self.references(n_reference).into_iter().map(|p| match_truth(query, p, &self.nal)).sum();
        Ok(revised.expectation(&self.nal))
    }

    pub fn classify(&self, query: &JudgmentSet, threshold: f64, n_reference: usize) -> Result<bool> {
        Ok(self.score(query, n_reference)? >= threshold)
    }
}

/// Degree to which `query` matches `pattern`, as a truth value.
///
/// Frequency is the overlap over the longer judgment set, folded to `1 − f`
/// for patterns that lean towards "different individuals" (expectation below
/// ½). The evidence mass is the pattern's own, so confidence equals the
/// pattern's confidence.
pub fn match_truth(query: &JudgmentSet, pattern: &Pattern, nal: &NalConfig) -> Truth {
    let longest = query.len().max(pattern.judgments.len());
    let mut f = if longest == 0 { 0.0 } else { query.overlap(&pattern.judgments) as f64 / longest as f64 };
    if pattern.truth.expectation(nal) < 0.5 {
        f = 1.0 - f;
    }
    // k·c/(1−c) with c = W/(W+k) is exactly W; taking W directly avoids
    // losing precision as c approaches 1.
    let total = pattern.truth.total();
    let w_plus = f * total;
    Truth { w_plus, w_minus: total - w_plus }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Midpoint between the median positive and median negative score.
pub fn midpoint_threshold(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::Calibration(format!(
            "need both classes, got {} positive and {} negative scores",
            pos_scores.len(),
            neg_scores.len()
        )));
    }
    let pos = median(&mut pos_scores.to_vec());
    let neg = median(&mut neg_scores.to_vec());
    Ok((pos + neg) / 2.0)
}

/// Scores every seeded pair without learning and returns the global
/// decision threshold.
pub fn calibrate_threshold(pool: &PatternPool, seeded: &[(JudgmentSet, bool)], n_reference: usize) -> Result<f64> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (judgments, label) in seeded {
        let s = pool.score(judgments, n_reference)?;
        if *label {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    midpoint_threshold(&pos, &neg)
}
