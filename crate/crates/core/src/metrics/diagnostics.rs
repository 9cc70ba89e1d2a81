//! Clustering and retrieval diagnostics over batches of held-out records.
//!
//! A batch is a set of records small enough that all of its pairs fit the
//! configured per-batch pair budget. Batches are filled with whole identity
//! clusters so each one contains true matches to recover.

use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::cluster::{ari, ari_agg, threshold_components, ScoreMatrix};
use crate::metrics::retrieval::p_r_at_k;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsPlan {
    /// Total scored pairs across all batches.
    pub sample_pairs: usize,
    /// Scored pairs per batch.
    pub batch_size: usize,
    pub k: usize,
}

impl Default for DiagnosticsPlan {
    fn default() -> Self {
        Self { sample_pairs: 100_000, batch_size: 2_000, k: 5 }
    }
}

impl DiagnosticsPlan {
    pub fn validate(&self) -> Result<()> {
        if self.sample_pairs == 0 || self.batch_size == 0 || self.k == 0 {
            return Err(Error::Config("diagnostics sample_pairs, batch_size and k must be positive".into()));
        }
        if self.batch_size > self.sample_pairs {
            return Err(Error::Config("diagnostics batch_size exceeds sample_pairs".into()));
        }
        Ok(())
    }

    pub fn batches(&self) -> usize {
        (self.sample_pairs / self.batch_size).max(1)
    }

    /// Largest record count whose pairs fit in one batch.
    pub fn records_per_batch(&self) -> usize {
        let mut m = 2;
        while (m + 1) * m / 2 <= self.batch_size {
            m += 1;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ari_cc: f64,
    pub ari_agg: f64,
    pub p_at_k: f64,
    pub r_at_k: f64,
    pub batches: usize,
}

/// Draws record batches from identity clusters (lists of element ids).
pub fn plan_batches(clusters: &[Vec<u32>], plan: &DiagnosticsPlan, seed: u64) -> Vec<Vec<u32>> {
    let total: usize = clusters.iter().map(Vec::len).sum();
    if total < 2 {
        return Vec::new();
    }
    let per_batch = plan.records_per_batch();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let n_batches = if total <= per_batch { 1 } else { plan.batches() };
    let mut order: Vec<usize> = (0..clusters.len()).collect();
    (0..n_batches)
        .map(|_| {
            order.shuffle(&mut rng);
            let mut batch = Vec::with_capacity(per_batch);
            for &c in &order {
                let room = per_batch - batch.len();
                if room == 0 {
                    break;
                }
                batch.extend(clusters[c].iter().take(room));
            }
            batch.sort_unstable();
            batch
        })
        .collect()
}

/// Diagnostics for one batch. `score(i, j)` gives the similarity of batch
/// members `i < j`, or `None` when the pair is not a candidate.
pub fn diagnose_batch<T, F>(truth: &[T], threshold: f64, k: usize, score: F) -> Result<Diagnostics>
where
    T: Hash + Eq,
    F: Fn(usize, usize) -> Result<Option<f64>>,
{
    let n = truth.len();
    let mut scores: Vec<Option<f64>> = vec![None; n * n];
    let mut matrix = ScoreMatrix::new(n);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some(s) = score(i, j)? {
                scores[i * n + j] = Some(s);
                scores[j * n + i] = Some(s);
                matrix.set_pair(i, j, s);
                edges.push((i, j, s));
            }
        }
    }
    let ari_cc = ari(&threshold_components(n, &edges, threshold), truth)?;
    let ari_agg = ari_agg(&matrix, threshold, truth)?;
    let (p_at_k, r_at_k) = p_r_at_k(truth, k, |i, j| scores[i * n + j]);
    Ok(Diagnostics { ari_cc, ari_agg, p_at_k, r_at_k, batches: 1 })
}

/// Runs every batch in parallel and averages the results.
pub fn diagnose<T, L, F>(batches: &[Vec<u32>], label: L, threshold: f64, k: usize, score: F) -> Result<Diagnostics>
where
    T: Hash + Eq + Send,
    L: Fn(u32) -> T + Sync,
    F: Fn(u32, u32) -> Result<Option<f64>> + Sync,
{
    let per_batch: Vec<Diagnostics> = batches
        .par_iter()
        .map(|members| {
            let truth: Vec<T> = members.iter().map(|&m| label(m)).collect();
            diagnose_batch(&truth, threshold, k, |i, j| score(members[i], members[j]))
        })
        .collect::<Result<_>>()?;
    if per_batch.is_empty() {
        return Ok(Diagnostics::default());
    }
    let n = per_batch.len() as f64;
    let mean = |f: fn(&Diagnostics) -> f64| per_batch.iter().map(f).sum::<f64>() / n;
    Ok(Diagnostics {
        ari_cc: mean(|d| d.ari_cc),
        ari_agg: mean(|d| d.ari_agg),
        p_at_k: mean(|d| d.p_at_k),
        r_at_k: mean(|d| d.r_at_k),
        batches: per_batch.len(),
    })
}
