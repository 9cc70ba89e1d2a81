use std::hash::Hash;

/// Precision and recall at `k`, averaged over records with at least one
/// true match among their candidates.
///
/// `score(i, j)` returns `None` when `j` is not a candidate for `i`.
/// Candidates rank by descending score, then ascending index. Returns
/// `(0, 0)` when no record has a true match.
pub fn p_r_at_k<T, F>(truth: &[T], k: usize, score: F) -> (f64, f64)
where
    T: Hash + Eq,
    F: Fn(usize, usize) -> Option<f64>,
{
    let k = k.max(1);
    let n = truth.len();
    let (mut hit_sum, mut r_sum, mut counted) = (0usize, 0.0, 0usize);
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        ranked.clear();
        ranked.extend((0..n).filter(|&j| j != i).filter_map(|j| score(i, j).map(|s| (s, j))));
        let relevant = ranked.iter().filter(|&&(_, j)| truth[j] == truth[i]).count();
        if relevant == 0 {
            continue;
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let hits = ranked.iter().take(k).filter(|&&(_, j)| truth[j] == truth[i]).count();
        hit_sum += hits;
        r_sum += hits as f64 / relevant as f64;
        counted += 1;
    }
    if counted == 0 {
        return (0.0, 0.0);
    }
    (hit_sum as f64 / (k * counted) as f64, r_sum / counted as f64)
}
