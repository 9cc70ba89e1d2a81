use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{open_csv, DatasetManifest};
use crate::engine::{Judgment, JudgmentKind, JudgmentSet};
use crate::error::{Error, Result};

/// A row of a generic ER table, tokenized per attribute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenericRecord {
    pub id: String,
    /// Sorted token multiset per text attribute.
    pub text: BTreeMap<String, Vec<String>>,
    pub numeric: BTreeMap<String, Option<f64>>,
}

/// Two tables plus the labeled pairs between them.
#[derive(Debug, Clone, Default)]
pub struct GenericUniverse {
    pub table_a: Vec<GenericRecord>,
    pub table_b: Vec<GenericRecord>,
    /// `(index into table_a, index into table_b, is_match)`.
    pub pairs: Vec<(u32, u32, bool)>,
    pub duplicates_dropped: usize,
}

/// Lowercased alphanumeric tokens, sorted.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens: Vec<String> =
        text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect();
    tokens.sort_unstable();
    tokens
}

fn read_table(path: &Path, id_column: &str, numeric: &[String]) -> Result<Vec<GenericRecord>> {
    let mut reader = open_csv(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_lowercase()).collect();
    let id_at = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::Schema { path: path.to_path_buf(), column: id_column.to_string() })?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let id = row.get(id_at).unwrap_or_default().trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Ingest { row: format!("{}:{}", path.display(), i + 2), message: format!("duplicate id `{id}`") });
        }
        let mut rec = GenericRecord { id, ..Default::default() };
        for (j, h) in headers.iter().enumerate() {
            if j == id_at {
                continue;
            }
            let v = row.get(j).unwrap_or_default().trim();
            if numeric.contains(h) {
                let x = v.trim_start_matches('$').replace(',', "").parse::<f64>().ok().filter(|x| x.is_finite());
                rec.numeric.insert(h.clone(), x);
            } else {
                rec.text.insert(h.clone(), tokenize(v));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

fn parse_label(v: &str) -> Option<bool> {
    match v.trim().to_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Some(true),
        "0" | "0.0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Loads both tables and the labeled matches. A matches file without a
/// label column lists positives only.
pub fn load_generic(manifest: &DatasetManifest) -> Result<GenericUniverse> {
    let DatasetManifest::GenericEr {
        table_a,
        table_b,
        matches,
        id_column,
        left_id_column,
        right_id_column,
        label_column,
        numeric_attributes,
    } = manifest
    else {
        return Err(Error::Config(format!("expected a generic_er manifest, got {}", manifest.kind())));
    };
    let lower = |s: &String| s.trim().to_lowercase();
    let numeric: Vec<String> = numeric_attributes.iter().map(lower).collect();
    let a = read_table(table_a, &lower(id_column), &numeric)?;
    let b = read_table(table_b, &lower(id_column), &numeric)?;
    let index_a: HashMap<&str, u32> = a.iter().enumerate().map(|(i, r)| (r.id.as_str(), i as u32)).collect();
    let index_b: HashMap<&str, u32> = b.iter().enumerate().map(|(i, r)| (r.id.as_str(), i as u32)).collect();

    let mut reader = open_csv(matches)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_lowercase()).collect();
    let col = |name: &String| headers.iter().position(|h| *h == lower(name));
    let schema = |name: &String| Error::Schema { path: matches.clone(), column: name.clone() };
    let left_at = col(left_id_column).ok_or_else(|| schema(left_id_column))?;
    let right_at = col(right_id_column).ok_or_else(|| schema(right_id_column))?;
    let label_at = col(label_column);

    let mut seen: HashMap<(u32, u32), bool> = HashMap::new();
    let mut pairs = Vec::new();
    let mut duplicates = 0;
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |at: usize| row.get(at).unwrap_or_default().trim();
        let (left, right) = (field(left_at), field(right_at));
        let ia = *index_a
            .get(left)
            .ok_or_else(|| Error::Referential(format!("{}:{line}: id `{left}` not in table A", matches.display())))?;
        let ib = *index_b
            .get(right)
            .ok_or_else(|| Error::Referential(format!("{}:{line}: id `{right}` not in table B", matches.display())))?;
        let label = match label_at {
            Some(at) => parse_label(field(at)).ok_or_else(|| Error::Parse {
                path: matches.display().to_string(),
                line,
                message: format!("unreadable label `{}`", field(at)),
            })?,
            None => true,
        };
        match seen.get(&(ia, ib)) {
            Some(&prev) => {
                duplicates += 1;
                if prev == label {
                    warn!("{}:{line}: duplicate match ({left}, {right}) dropped", matches.display());
                } else {
                    warn!("{}:{line}: conflicting label for ({left}, {right}); keeping the first", matches.display());
                }
            }
            None => {
                seen.insert((ia, ib), label);
                pairs.push((ia, ib, label));
            }
        }
    }
    info!("loaded {} + {} records and {} labeled pairs", a.len(), b.len(), pairs.len());
    Ok(GenericUniverse { table_a: a, table_b: b, pairs, duplicates_dropped: duplicates })
}

/// Multiset Jaccard overlap of two sorted token lists.
fn jaccard(a: &[String], b: &[String]) -> f64 {
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - shared;
    if union == 0 {
        return 1.0;
    }
    shared as f64 / union as f64
}

/// Bin 0 is exactly zero overlap; bins 1 to 4 are the quarters
/// (0, .25], (.25, .5], (.5, .75] and (.75, 1].
pub fn jaccard_bin(j: f64) -> u8 {
    if j <= 0.0 {
        0
    } else if j <= 0.25 {
        1
    } else if j <= 0.5 {
        2
    } else if j <= 0.75 {
        3
    } else {
        4
    }
}

/// Judgments for a cross-table pair: a Jaccard bin per shared text
/// attribute, same/different per shared numeric attribute.
pub fn generic_judgments(a: &GenericRecord, b: &GenericRecord) -> JudgmentSet {
    let mut out = Vec::with_capacity(a.text.len() + a.numeric.len());
    for (attr, ta) in &a.text {
        let Some(tb) = b.text.get(attr) else { continue };
        if ta.is_empty() || tb.is_empty() {
            out.push(Judgment::new(JudgmentKind::UnknownField, attr));
        } else {
            out.push(Judgment::new(JudgmentKind::GenericToken, format!("{attr}:{}", jaccard_bin(jaccard(ta, tb)))));
        }
    }
    for (attr, xa) in &a.numeric {
        let Some(xb) = b.numeric.get(attr) else { continue };
        match (xa, xb) {
            (Some(x), Some(y)) => {
                let v = if x == y { "same" } else { "different" };
                out.push(Judgment::new(JudgmentKind::GenericToken, format!("{attr}:{v}")));
            }
            _ => out.push(Judgment::new(JudgmentKind::UnknownField, attr)),
        }
    }
    JudgmentSet::new(out)
}
