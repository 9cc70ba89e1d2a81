//! Census record normalization and pair featurization.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::engine::{Judgment, JudgmentKind, JudgmentSet};
use crate::error::{Error, Result};

pub const UNKNOWN_NAME: &str = "unknown";

/// One normalized census row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: String,
    pub heimild: i32,
    pub nafn_norm: String,
    pub first_name: String,
    pub patronym: String,
    pub surname: String,
    pub full_name: String,
    pub birthyear: Option<i32>,
    pub sex_male: Option<bool>,
    pub status: Option<String>,
    pub marriagestatus: Option<String>,
    pub farm: Option<String>,
    pub parish: Option<String>,
    pub district: Option<String>,
    pub county: Option<String>,
    pub partner: Option<String>,
    pub father: Option<String>,
    pub mother: Option<String>,
    /// Identity cluster label; `None` for unlabeled rows.
    pub person: Option<String>,
}

impl PersonRecord {
    pub fn is_labeled(&self) -> bool {
        self.person.is_some()
    }

    /// Recomputes `full_name` from the name components.
    pub fn derive_full_name(&mut self) {
        let parts: Vec<&str> =
            [&self.first_name, &self.patronym, &self.surname].into_iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
        self.full_name = if !parts.is_empty() {
            parts.join(" ")
        } else if !self.nafn_norm.is_empty() {
            self.nafn_norm.clone()
        } else {
            UNKNOWN_NAME.to_string()
        };
    }
}

/// Maximum plausible birth-year gap between two rows of one individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgeDisparityThreshold(pub u32);

impl AgeDisparityThreshold {
    pub fn years(self) -> u32 {
        self.0
    }

    pub fn compatible(self, a: i32, b: i32) -> bool {
        a.abs_diff(b) <= self.0
    }
}

/// Canonical column name for a raw header: lowercased, trimmed, with a few
/// Icelandic source headers mapped to their normalized names.
pub fn canonical_column(raw: &str) -> String {
    let lower = raw.trim().to_lowercase();
    let mapped = match lower.as_str() {
        "fornafn" => "first_name",
        "millinafn" | "föðurnafn" | "fodurnafn" | "kenninafn" => "patronym",
        "eftirnafn" | "ættarnafn" => "surname",
        "nafn" => "nafn_norm",
        "fæðingarár" | "faedingarar" | "birth_year" => "birthyear",
        "kyn" => "sex",
        "staða" | "stada" => "status",
        "hjúskaparstaða" | "hjuskaparstada" | "marriage_status" => "marriagestatus",
        "bær" | "baer" => "farm",
        "sókn" | "sokn" => "parish",
        "hreppur" => "district",
        "sýsla" | "sysla" => "county",
        "manntal" | "census_year" | "year" => "heimild",
        _ => return lower,
    };
    mapped.to_string()
}

fn clean_text(v: &str) -> String {
    v.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn non_empty(v: Option<&String>) -> Option<String> {
    v.map(|s| clean_text(s)).filter(|s| !s.is_empty())
}

/// Integer ids exported through floating point columns (`"12.0"`) collapse to
/// their integer spelling so joins and comparisons agree.
pub fn normalize_id(v: &str) -> Option<String> {
    let t = v.trim();
    if t.is_empty() {
        return None;
    }
    if let Ok(x) = t.parse::<f64>() {
        if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
            return Some(format!("{}", x as i64));
        }
    }
    Some(t.to_string())
}

fn parse_int(v: &str) -> Option<i32> {
    let t = v.trim();
    t.parse::<i32>().ok().or_else(|| {
        t.parse::<f64>().ok().filter(|x| x.is_finite() && x.fract() == 0.0 && x.abs() < i32::MAX as f64).map(|x| x as i32)
    })
}

fn parse_sex(v: &str) -> Option<bool> {
    match clean_text(v).as_str() {
        "m" | "male" | "karl" | "kk" | "karlmaður" | "1" | "true" => Some(true),
        "f" | "female" | "kona" | "kvk" | "kvenmaður" | "0" | "false" => Some(false),
        _ => None,
    }
}

/// Builds a [`PersonRecord`] from a raw field map keyed by column header.
pub fn normalize_record<K: AsRef<str>, V: AsRef<str>>(raw: impl IntoIterator<Item = (K, V)>) -> Result<PersonRecord> {
    let fields: HashMap<String, String> =
        raw.into_iter().map(|(k, v)| (canonical_column(k.as_ref()), v.as_ref().to_string())).collect();
    let get = |name: &str| fields.get(name);

    let id = get("id").and_then(|v| normalize_id(v)).ok_or_else(|| Error::Ingest {
        row: format!("{:?}", fields.get("id").cloned().unwrap_or_default()),
        message: "missing id".into(),
    })?;
    let heimild_raw = get("heimild").cloned().unwrap_or_default();
    let heimild = parse_int(&heimild_raw)
        .ok_or_else(|| Error::Ingest { row: id.clone(), message: format!("unparsable heimild `{heimild_raw}`") })?;

    let text = |name: &str| non_empty(get(name)).unwrap_or_default();
    let mut record = PersonRecord {
        id,
        heimild,
        nafn_norm: text("nafn_norm"),
        first_name: text("first_name"),
        patronym: text("patronym"),
        surname: text("surname"),
        full_name: String::new(),
        birthyear: get("birthyear").and_then(|v| parse_int(v)),
        sex_male: get("sex_male").or(get("sex")).and_then(|v| parse_sex(v)),
        status: non_empty(get("status")),
        marriagestatus: non_empty(get("marriagestatus")),
        farm: get("farm").and_then(|v| normalize_id(v)),
        parish: get("parish").and_then(|v| normalize_id(v)),
        district: get("district").and_then(|v| normalize_id(v)),
        county: get("county").and_then(|v| normalize_id(v)),
        partner: get("partner").and_then(|v| normalize_id(v)),
        father: get("father").and_then(|v| normalize_id(v)),
        mother: get("mother").and_then(|v| normalize_id(v)),
        // `-1` marks rows without an expert cluster label.
        person: get("person").and_then(|v| normalize_id(v)).filter(|p| p != "-1"),
    };
    match non_empty(get("full_name")) {
        Some(full) if full != UNKNOWN_NAME => record.full_name = full,
        _ => record.derive_full_name(),
    }
    Ok(record)
}

/// 95th percentile (nearest rank) of per-person birth-year spans.
pub fn age_disparity_threshold(records: &[PersonRecord]) -> Result<AgeDisparityThreshold> {
    let mut ranges: BTreeMap<&str, (i32, i32)> = BTreeMap::new();
    for r in records {
        let (Some(person), Some(by)) = (r.person.as_deref(), r.birthyear) else { continue };
        ranges.entry(person).and_modify(|(lo, hi)| {
            *lo = (*lo).min(by);
            *hi = (*hi).max(by);
        }).or_insert((by, by));
    }
    if ranges.is_empty() {
        return Err(Error::Config("no labeled records with a birthyear; cannot derive the age-disparity threshold".into()));
    }
    let mut spans: Vec<u32> = ranges.values().map(|&(lo, hi)| hi.abs_diff(lo)).collect();
    spans.sort_unstable();
    let rank = (95 * spans.len()).div_ceil(100).max(1);
    Ok(AgeDisparityThreshold(spans[rank - 1]))
}

fn compare_text(out: &mut Vec<Judgment>, kind: JudgmentKind, field: &str, a: &str, b: &str) {
    if a.is_empty() || b.is_empty() {
        out.push(Judgment::new(JudgmentKind::UnknownField, field));
    } else {
        out.push(Judgment::same_or_different(kind, a == b));
    }
}

fn compare_opt<T: PartialEq>(out: &mut Vec<Judgment>, kind: JudgmentKind, field: &str, a: &Option<T>, b: &Option<T>) {
    match (a, b) {
        (Some(a), Some(b)) => out.push(Judgment::same_or_different(kind, a == b)),
        _ => out.push(Judgment::new(JudgmentKind::UnknownField, field)),
    }
}

/// Summarizes the similarities and differences of two records as judgments.
pub fn pair_judgments(r1: &PersonRecord, r2: &PersonRecord, thr: AgeDisparityThreshold) -> JudgmentSet {
    let mut out = Vec::with_capacity(16);
    out.push(Judgment::new(JudgmentKind::HeimildDiff, r1.heimild.abs_diff(r2.heimild).to_string()));
    compare_text(&mut out, JudgmentKind::Name, "nafn_norm", &r1.nafn_norm, &r2.nafn_norm);
    compare_text(&mut out, JudgmentKind::FirstName, "first_name", &r1.first_name, &r2.first_name);
    compare_text(&mut out, JudgmentKind::Patronym, "patronym", &r1.patronym, &r2.patronym);
    compare_text(&mut out, JudgmentKind::Surname, "surname", &r1.surname, &r2.surname);
    match (r1.birthyear, r2.birthyear) {
        (Some(a), Some(b)) => {
            out.push(Judgment::same_or_different(JudgmentKind::Birthyear, a == b));
            out.push(Judgment::new(JudgmentKind::BirthyearCompatible, if thr.compatible(a, b) { "true" } else { "false" }));
        }
        _ => out.push(Judgment::new(JudgmentKind::UnknownField, "birthyear")),
    }
    compare_opt(&mut out, JudgmentKind::Sex, "sex", &r1.sex_male, &r2.sex_male);
    match (&r1.status, &r2.status) {
        (Some(a), Some(b)) => {
            out.push(Judgment::new(JudgmentKind::StatusValue, a));
            out.push(Judgment::new(JudgmentKind::StatusValue, b));
        }
        _ => out.push(Judgment::new(JudgmentKind::UnknownField, "status")),
    }
    compare_opt(&mut out, JudgmentKind::Marriage, "marriagestatus", &r1.marriagestatus, &r2.marriagestatus);
    compare_opt(&mut out, JudgmentKind::Farm, "farm", &r1.farm, &r2.farm);
    compare_opt(&mut out, JudgmentKind::County, "county", &r1.county, &r2.county);
    compare_opt(&mut out, JudgmentKind::Parish, "parish", &r1.parish, &r2.parish);
    compare_opt(&mut out, JudgmentKind::District, "district", &r1.district, &r2.district);
    JudgmentSet::new(out)
}
