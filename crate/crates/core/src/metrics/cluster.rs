//! Partition comparison and the two clustering diagnostics.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

fn choose2(n: u64) -> i128 {
    (n as i128) * (n as i128 - 1) / 2
}

/// Adjusted Rand Index between two labelings of the same elements.
///
/// Computed from integer pair counts as a single ratio, so the result is the
/// correctly rounded value of the exact rational. Trivial cases where the
/// chance-corrected denominator vanishes (both all-singletons or both a
/// single cluster, and fewer than two elements) score 1.
pub fn ari<A: Hash + Eq, B: Hash + Eq>(pred: &[A], truth: &[B]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::UniverseMismatch);
    }
    let n = pred.len() as u64;
    let mut cells: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in pred.iter().zip(truth) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: i128 = cells.values().map(|&c| choose2(c)).sum();
    let sum_a: i128 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: i128 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    // ARI = (index − a·b/C) / ((a + b)/2 − a·b/C), scaled by 2C.
    let num = 2 * (total * index - sum_a * sum_b);
    let den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    /// Component label per element: the smallest member index.
    pub fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut smallest: HashMap<usize, usize> = HashMap::new();
        let roots: Vec<usize> = (0..n).map(|i| self.find(i)).collect();
        for (i, &r) in roots.iter().enumerate() {
            smallest.entry(r).or_insert(i);
        }
        roots.iter().map(|r| smallest[r]).collect()
    }
}

/// Connected components of the graph whose edges are the pairs scored at or
/// above `threshold`. Elements without edges are singletons.
pub fn threshold_components(n: usize, scored: &[(usize, usize, f64)], threshold: f64) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for &(a, b, s) in scored {
        if s >= threshold {
            uf.union(a, b);
        }
    }
    uf.labels()
}

/// ARI of the thresholded-graph components against the true labels.
pub fn ari_cc<B: Hash + Eq>(scored: &[(usize, usize, f64)], threshold: f64, truth: &[B]) -> Result<f64> {
    if let Some(&(a, b, _)) = scored.iter().find(|&&(a, b, _)| a >= truth.len() || b >= truth.len()) {
        return Err(Error::Config(format!("pair ({a}, {b}) is outside the {} labeled elements", truth.len())));
    }
    ari(&threshold_components(truth.len(), scored, threshold), truth)
}

/// Dense symmetric similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    /// An `n × n` matrix with unit diagonal and zero elsewhere.
    pub fn new(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch(bad.len(), n));
        }
        let m = Self { n, data: rows.concat() };
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, s: f64) {
        self.data[i * self.n + j] = s;
        self.data[j * self.n + i] = s;
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::NonSymmetric(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Average-linkage agglomerative clustering on distance `1 − similarity`,
/// merging while the closest pair of clusters is within `max_distance`.
/// Ties merge the lowest-indexed pair first. Returns a label per element.
pub fn average_linkage(matrix: &ScoreMatrix, max_distance: f64) -> Vec<usize> {
    let n = matrix.len();
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 1.0 - matrix.get(i, j)).collect()).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && best.is_none_or(|(d, _, _)| dist[i][j] < d) {
                    best = Some((dist[i][j], i, j));
                }
            }
        }
        let Some((d, i, j)) = best else { break };
        if d > max_distance {
            break;
        }
        // Lance–Williams update for average linkage; cluster j folds into i.
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if active[k] && k != i && k != j {
                let merged = (si * dist[i][k] + sj * dist[j][k]) / (si + sj);
                dist[i][k] = merged;
                dist[k][i] = merged;
            }
        }
        size[i] += size[j];
        active[j] = false;
        for l in label.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
    }
    label
}

/// ARI of average-linkage clusters cut at distance `1 − threshold`.
pub fn ari_agg<B: Hash + Eq>(matrix: &ScoreMatrix, threshold: f64, truth: &[B]) -> Result<f64> {
    if matrix.len() != truth.len() {
        return Err(Error::UniverseMismatch);
    }
    matrix.check_symmetric()?;
    ari(&average_linkage(matrix, 1.0 - threshold), truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), -0.5);
        assert_eq!(ari(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert!(matches!(ari(&[0, 1], &[0]), Err(Error::UniverseMismatch)));
    }

    fn truth6() -> Vec<u8> {
        vec![0, 0, 0, 1, 1, 2]
    }

    #[test]
    fn ari_cc_cases() {
        let perfect = [(0, 1, 0.9), (1, 2, 0.8), (3, 4, 0.9), (2, 3, 0.1), (4, 5, 0.2)];
        assert_eq!(ari_cc(&perfect, 0.5, &truth6()).unwrap(), 1.0);

        let singletons = ari(&[0, 1, 2, 3, 4, 5], &truth6()).unwrap();
        assert_eq!(ari_cc(&[], 0.5, &truth6()).unwrap(), singletons);
        // Pair-count oracle: 4 true pairs, none predicted → 0.
        assert_eq!(singletons, 0.0);

        let mut bridged = perfect.to_vec();
        bridged.push((2, 3, 0.7));
        assert!(ari_cc(&bridged, 0.5, &truth6()).unwrap() < 1.0);
    }

    #[test]
    fn components_label_by_smallest_member() {
        assert_eq!(threshold_components(4, &[(3, 1, 1.0), (2, 0, 0.0)], 0.5), vec![0, 1, 2, 1]);
    }

    #[test]
    fn agg_block_diagonal_and_empty() {
        let truth = [0, 0, 1, 1, 1];
        let mut m = ScoreMatrix::new(5);
        m.set_pair(0, 1, 1.0);
        m.set_pair(2, 3, 1.0);
        m.set_pair(2, 4, 1.0);
        m.set_pair(3, 4, 1.0);
        assert_eq!(ari_agg(&m, 0.5, &truth).unwrap(), 1.0);
        assert_eq!(average_linkage(&ScoreMatrix::new(5), 0.5), vec![0, 1, 2, 3, 4]);
    }

    /// Hand-traced fixture: truth {0,1} {2,3}; similarities
    /// s01=.9 s23=.8 s12=.6 s02=.5 s13=.3 s03=.1. At τ = .55 (cut .45):
    /// merge 0,1 at .1; then d({01},2)=.45, d({01},3)=.8, d(2,3)=.2 → merge
    /// 2,3; then d({01},{23})=(.5+.9+.4+.7)/4=.625 > .45 → stop, ARI 1.
    /// The thresholded graph instead links 1–2 (.6 ≥ .55) into one component.
    fn ambiguous() -> ScoreMatrix {
        let mut m = ScoreMatrix::new(4);
        for &(i, j, s) in &[(0, 1, 0.9), (2, 3, 0.8), (1, 2, 0.6), (0, 2, 0.5), (1, 3, 0.3), (0, 3, 0.1)] {
            m.set_pair(i, j, s);
        }
        m
    }

    #[test]
    fn agg_ambiguous_link_fixture() {
        let truth = [0, 0, 1, 1];
        let m = ambiguous();
        assert_eq!(average_linkage(&m, 1.0 - 0.55), vec![0, 0, 2, 2]);
        assert_eq!(ari_agg(&m, 0.55, &truth).unwrap(), 1.0);
        let pairs: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).map(|(i, j)| (i, j, m.get(i, j))).collect();
        assert_eq!(ari_cc(&pairs, 0.55, &truth).unwrap(), 0.0);
        // Cut beyond .625 merges everything.
        assert_eq!(ari_agg(&m, 0.35, &truth).unwrap(), 0.0);
    }

    #[test]
    fn agg_rejects_asymmetric() {
        let rows = vec![vec![1.0, 0.2], vec![0.3, 1.0]];
        assert!(matches!(ScoreMatrix::from_rows(&rows), Err(Error::NonSymmetric(0, 1))));
    }
}
