use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::judgment::JudgmentSet;
use crate::error::{Error, Result};
use crate::truth::{NalConfig, Truth};

/// Opaque identifier of an independent piece of evidence (one labeled pair).
pub type SourceId = u64;

/// Frequency and confidence assigned to a freshly observed pair.
pub const SEED_CONFIDENCE: f64 = 0.9;

/// Sorted, shared set of evidence sources. Clones are cheap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceSet(Arc<[SourceId]>);

impl SourceSet {
    pub fn single(id: SourceId) -> Self {
        SourceSet(Arc::from([id]))
    }

    pub fn from_ids(ids: impl IntoIterator<Item = SourceId>) -> Self {
        let mut v: Vec<SourceId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SourceSet(v.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[SourceId] {
        &self.0
    }

    pub fn contains(&self, id: SourceId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn is_disjoint(&self, other: &SourceSet) -> bool {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        if small.is_empty() {
            return true;
        }
        // Binary search wins once one side is much larger than the other.
        if small.len() * 8 < large.len() {
            return small.0.iter().all(|id| large.0.binary_search(id).is_err());
        }
        let (a, b) = (&small.0, &large.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    #[must_use]
    pub fn union(&self, other: &SourceSet) -> SourceSet {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        SourceSet(out.into())
    }
}

impl Serialize for SourceSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SourceSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(SourceSet::from_ids(Vec::<SourceId>::deserialize(deserializer)?))
    }
}

/// A judgment set with the evidence that it indicates a match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub judgments: JudgmentSet,
    pub truth: Truth,
    pub sources: SourceSet,
}

impl Pattern {
    pub fn new(judgments: JudgmentSet, truth: Truth, sources: SourceSet) -> Result<Self> {
        if judgments.is_empty() {
            return Err(Error::InvalidPattern("judgment set is empty".into()));
        }
        Ok(Self { judgments, truth, sources })
    }

    /// Pattern observed from one labeled pair: `(1, 0.9)` for a match,
    /// `(0, 0.9)` otherwise.
    pub fn observed(judgments: JudgmentSet, label: bool, source: SourceId, cfg: &NalConfig) -> Result<Self> {
        let f = if label { 1.0 } else { 0.0 };
        let truth = Truth::from_fc(f, SEED_CONFIDENCE, cfg)?;
        Pattern::new(judgments, truth, SourceSet::single(source))
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn expectation(&self, cfg: &NalConfig) -> f64 {
        self.truth.expectation(cfg)
    }
}

/// Applies the three-way inference rule to two patterns.
///
/// Children are `j1 − j2` carrying `t1`, `j2 − j1` carrying `t2`, and
/// `j1 ∩ j2` carrying `revise(t1, t2)`. The intersection child needs
/// independent parents (disjoint sources). Children with no judgments are
/// dropped.
pub fn infer(p1: &Pattern, p2: &Pattern) -> Vec<Pattern> {
    let mut out = Vec::with_capacity(3);
    let left = p1.judgments.difference(&p2.judgments);
    if !left.is_empty() {
        out.push(Pattern { judgments: left, truth: p1.truth, sources: p1.sources.clone() });
    }
    let right = p2.judgments.difference(&p1.judgments);
    if !right.is_empty() {
        out.push(Pattern { judgments: right, truth: p2.truth, sources: p2.sources.clone() });
    }
    if p1.sources.is_disjoint(&p2.sources) {
        let common = p1.judgments.intersection(&p2.judgments);
        if !common.is_empty() {
            out.push(Pattern {
                judgments: common,
                truth: p1.truth.revise(&p2.truth),
                sources: p1.sources.union(&p2.sources),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::judgment::Judgment;

    const K1: NalConfig = NalConfig { k: 1.0 };

    fn set(items: &[&str]) -> JudgmentSet {
        items.iter().map(|s| s.parse::<Judgment>().unwrap()).collect()
    }

    #[test]
    fn observed_patterns_carry_seed_truths() {
        let p = Pattern::observed(set(&["name:same", "sex:same"]), true, 1, &K1).unwrap();
        assert_eq!(p.truth.frequency().unwrap(), 1.0);
        assert!((p.truth.confidence(&K1) - 0.9).abs() < 1e-12);
        let n = Pattern::observed(set(&["name:different"]), false, 2, &K1).unwrap();
        assert_eq!(n.truth.frequency().unwrap(), 0.0);
        assert!((n.truth.confidence(&K1) - 0.9).abs() < 1e-12);
        assert!(Pattern::observed(JudgmentSet::default(), true, 3, &K1).is_err());
    }

    #[test]
    fn infer_three_cases() {
        let p1 = Pattern::observed(set(&["name:same", "sex:same"]), true, 1, &K1).unwrap();
        let p2 = Pattern::observed(set(&["sex:same", "farm:same"]), false, 2, &K1).unwrap();
        let kids = infer(&p1, &p2);
        assert_eq!(kids.len(), 3);
        assert_eq!(kids[0].judgments, set(&["name:same"]));
        assert_eq!(kids[0].truth, p1.truth);
        assert_eq!(kids[0].sources, p1.sources);
        assert_eq!(kids[1].judgments, set(&["farm:same"]));
        assert_eq!(kids[1].truth, p2.truth);
        assert_eq!(kids[2].judgments, set(&["sex:same"]));
        assert_eq!(kids[2].truth, p1.truth.revise(&p2.truth));
        assert_eq!(kids[2].sources, SourceSet::from_ids([1, 2]));
    }

    #[test]
    fn infer_identical_sets_shared_source_yields_nothing() {
        let p1 = Pattern::observed(set(&["name:same"]), true, 7, &K1).unwrap();
        let p2 = Pattern::observed(set(&["name:same"]), true, 7, &K1).unwrap();
        assert!(infer(&p1, &p2).is_empty());
    }

    #[test]
    fn infer_disjoint_judgments_drops_empty_intersection() {
        let p1 = Pattern::observed(set(&["name:same", "sex:same"]), true, 1, &K1).unwrap();
        let p2 = Pattern::observed(set(&["farm:same"]), false, 2, &K1).unwrap();
        let kids = infer(&p1, &p2);
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].judgments, p1.judgments);
        assert_eq!(kids[1].judgments, p2.judgments);
    }

    #[test]
    fn source_set_algebra() {
        let a = SourceSet::from_ids([5, 1, 3]);
        let b = SourceSet::from_ids([2, 4]);
        assert!(a.is_disjoint(&b));
        assert_eq!(a.union(&b).ids(), &[1, 2, 3, 4, 5]);
        let big = SourceSet::from_ids(0..100);
        assert!(!big.is_disjoint(&SourceSet::single(42)));
        assert!(big.is_disjoint(&SourceSet::single(420)));
    }
}
