use std::collections::BTreeMap;
use std::io::Write;

use crate::featurize::PersonRecord;

/// Directed edges linking each person's consecutive appearances, ordered by
/// census wave. Every link is emitted in both directions. Unlabeled rows are
/// left out.
pub fn export_temporal_graph(records: &[PersonRecord]) -> Vec<(String, String)> {
    let mut by_person: BTreeMap<&str, Vec<&PersonRecord>> = BTreeMap::new();
    for r in records {
        if let Some(p) = r.person.as_deref() {
            by_person.entry(p).or_default().push(r);
        }
    }
    let mut edges = Vec::new();
    for rows in by_person.values_mut() {
        rows.sort_by(|a, b| a.heimild.cmp(&b.heimild).then_with(|| a.id.cmp(&b.id)));
        for w in rows.windows(2) {
            edges.push((w[0].id.clone(), w[1].id.clone()));
            edges.push((w[1].id.clone(), w[0].id.clone()));
        }
    }
    edges
}

/// Writes one `source,target` line per edge.
pub fn write_edges<W: Write>(edges: &[(String, String)], mut out: W) -> std::io::Result<()> {
    for (a, b) in edges {
        writeln!(out, "{a},{b}")?;
    }
    out.flush()
}
