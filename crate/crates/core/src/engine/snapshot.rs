//! Line-oriented pool snapshots.
//!
//! One pattern per line, with tabs between the four fields:
//!
//! ```text
//! <judgment>|<judgment>|...  <w_plus>  <w_minus>  <source_count>
//! ```
//!
//! Judgments appear in canonical sorted order. `\`, `|`, tab and newline
//! inside judgment values are backslash-escaped. Evidence is written with the
//! shortest decimal that parses back to the identical `f64`. Lines starting
//! with `#` and blank lines are ignored.

use std::io::{BufRead, Write};

use crate::engine::judgment::{Judgment, JudgmentSet};
use crate::engine::pattern::{Pattern, SourceId, SourceSet};
use crate::engine::pool::PatternPool;
use crate::error::{Error, Result};
use crate::truth::{NalConfig, Truth};

pub const HEADER: &str = "# icelink pattern pool v1: judgments\tw_plus\tw_minus\tsources";

/// First id handed to sources reconstructed from a snapshot. Learned pairs
/// never reach this range.
pub const IMPORTED_SOURCE_BASE: SourceId = 1 << 62;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub judgments: JudgmentSet,
    pub truth: Truth,
    pub source_count: usize,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\p"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn split_unescape(field: &str) -> std::result::Result<Vec<String>, String> {
    let mut parts = vec![String::new()];
    let mut chars = field.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '|' => parts.push(String::new()),
            '\\' => {
                let decoded = match chars.next() {
                    Some('\\') => '\\',
                    Some('p') => '|',
                    Some('t') => '\t',
                    Some('n') => '\n',
                    Some('r') => '\r',
                    other => return Err(format!("bad escape sequence `\\{}`", other.map(String::from).unwrap_or_default())),
                };
                parts.last_mut().expect("nonempty").push(decoded);
            }
            c => parts.last_mut().expect("nonempty").push(c),
        }
    }
    Ok(parts)
}

pub fn format_row(pattern: &Pattern) -> String {
    let judgments: Vec<String> = pattern.judgments.iter().map(|j| escape(&j.to_string())).collect();
    format!(
        "{}\t{}\t{}\t{}",
        judgments.join("|"),
        pattern.truth.w_plus,
        pattern.truth.w_minus,
        pattern.sources.len()
    )
}

/// Writes the pool in ascending expectation order.
pub fn write_snapshot<W: Write>(pool: &PatternPool, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for pattern in pool.iter() {
        writeln!(out, "{}", format_row(pattern))?;
    }
    out.flush()
}

pub fn parse_row(line: &str) -> std::result::Result<SnapshotRow, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let judgments: JudgmentSet = split_unescape(fields[0])?
        .iter()
        .map(|s| s.parse::<Judgment>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    if judgments.is_empty() {
        return Err("empty judgment set".into());
    }
    let w_plus: f64 = fields[1].parse().map_err(|_| format!("bad w_plus `{}`", fields[1]))?;
    let w_minus: f64 = fields[2].parse().map_err(|_| format!("bad w_minus `{}`", fields[2]))?;
    let truth = Truth::new(w_plus, w_minus).map_err(|e| e.to_string())?;
    let source_count: usize = fields[3].parse().map_err(|_| format!("bad source count `{}`", fields[3]))?;
    Ok(SnapshotRow { judgments, truth, source_count })
}

/// Parses every pattern row; `origin` names the input in error messages.
pub fn read_rows<R: BufRead>(input: R, origin: &str) -> Result<Vec<SnapshotRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = parse_row(trimmed).map_err(|message| Error::Parse { path: origin.to_string(), line: i + 1, message })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Rebuilds a pool from snapshot rows. Source identities are not stored, so
/// each pattern receives fresh, mutually independent source ids.
pub fn pool_from_rows(rows: Vec<SnapshotRow>, capacity: usize, nal: NalConfig) -> Result<PatternPool> {
    let mut pool = PatternPool::new(capacity, nal)?;
    let mut next = IMPORTED_SOURCE_BASE;
    for row in rows {
        let count = row.source_count.max(1) as u64;
        let sources = SourceSet::from_ids(next..next + count);
        next += count;
        pool.insert(Pattern::new(row.judgments, row.truth, sources)?);
    }
    Ok(pool)
}

pub fn read_snapshot<R: BufRead>(input: R, origin: &str, capacity: usize, nal: NalConfig) -> Result<PatternPool> {
    pool_from_rows(read_rows(input, origin)?, capacity, nal)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K1: NalConfig = NalConfig { k: 1.0 };

    #[test]
    fn round_trip_preserves_patterns_and_order() {
        let mut pool = PatternPool::new(100, K1).unwrap();
        let a: JudgmentSet = ["name:same", "status_value:vinnu|kona\tx"].iter().map(|s| s.parse().unwrap()).collect();
        let b: JudgmentSet = ["sex:different"].iter().map(|s| s.parse().unwrap()).collect();
        pool.learn(a.clone(), true, 1, 0).unwrap();
        pool.learn(a.clone(), true, 2, 0).unwrap();
        pool.learn(b.clone(), false, 3, 0).unwrap();

        let mut buf = Vec::new();
        write_snapshot(&pool, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice(), "mem", 100, K1).unwrap();
        let before: Vec<_> = pool.iter().map(|p| (p.judgments.clone(), p.truth, p.sources.len())).collect();
        let after: Vec<_> = back.iter().map(|p| (p.judgments.clone(), p.truth, p.sources.len())).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{HEADER}\nname:same\t9\t0\t1\nname:same\tnine\t0\t1\n");
        match read_rows(text.as_bytes(), "pool.tsv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_empty_pool() {
        assert!(read_rows(&b""[..], "empty").unwrap().is_empty());
    }
}
