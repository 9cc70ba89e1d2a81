//! Deterministic rule-based matcher: Jaro–Winkler name similarity, age and
//! geography agreement, with key-based blocking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{AgeDisparityThreshold, PersonRecord};

/// Stand-in for a missing blocking field.
pub const MISSING_TOKEN: &str = "∅";
const MAX_PREFIX: usize = 4;

/// Classical Jaro similarity over Unicode scalar values.
pub fn jaro(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_hit = vec![false; a.len()];
    let mut b_hit = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_hit[j] && b[j] == ca {
                a_hit[i] = true;
                b_hit[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_hit).filter(|(_, &h)| h).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_hit).filter(|(_, &h)| h).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

fn jaro_winkler_unchecked(s1: &str, s2: &str, p: f64) -> f64 {
    let j = jaro(s1, s2);
    let prefix = s1.chars().zip(s2.chars()).take(MAX_PREFIX).take_while(|(a, b)| a == b).count();
    j + prefix as f64 * p * (1.0 - j)
}

/// Jaro similarity boosted by the shared prefix (at most four characters).
pub fn jaro_winkler(s1: &str, s2: &str, prefix_weight: f64) -> Result<f64> {
    check_prefix_weight(prefix_weight)?;
    Ok(jaro_winkler_unchecked(s1, s2, prefix_weight))
}

fn check_prefix_weight(p: f64) -> Result<()> {
    if !(0.0..=0.25).contains(&p) {
        return Err(Error::Config(format!("jw_prefix_weight must lie in [0, 0.25], got {p}")));
    }
    Ok(())
}

/// Record attribute usable as a blocking key component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockField {
    County,
    Parish,
    District,
    Farm,
    FirstInitial,
    SurnameInitial,
    PatronymInitial,
    Sex,
}

impl BlockField {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockField::County => "county",
            BlockField::Parish => "parish",
            BlockField::District => "district",
            BlockField::Farm => "farm",
            BlockField::FirstInitial => "first-initial",
            BlockField::SurnameInitial => "surname-initial",
            BlockField::PatronymInitial => "patronym-initial",
            BlockField::Sex => "sex",
        }
    }

    fn value(self, r: &PersonRecord) -> Option<String> {
        let initial = |s: &str| s.chars().next().map(String::from);
        match self {
            BlockField::County => r.county.clone(),
            BlockField::Parish => r.parish.clone(),
            BlockField::District => r.district.clone(),
            BlockField::Farm => r.farm.clone(),
            BlockField::FirstInitial => initial(&r.first_name),
            BlockField::SurnameInitial => initial(&r.surname),
            BlockField::PatronymInitial => initial(&r.patronym),
            BlockField::Sex => r.sex_male.map(|m| if m { "m" } else { "f" }.to_string()),
        }
    }
}

impl fmt::Display for BlockField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BlockField::County,
            BlockField::Parish,
            BlockField::District,
            BlockField::Farm,
            BlockField::FirstInitial,
            BlockField::SurnameInitial,
            BlockField::PatronymInitial,
            BlockField::Sex,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown blocking field `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub jw_prefix_weight: f64,
    pub name_weight: f64,
    pub age_weight: f64,
    pub geo_weight: f64,
    pub block_on: Vec<BlockField>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            jw_prefix_weight: 0.1,
            name_weight: 0.5,
            age_weight: 0.25,
            geo_weight: 0.25,
            block_on: vec![BlockField::Parish, BlockField::FirstInitial],
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        check_prefix_weight(self.jw_prefix_weight)?;
        let w = [self.name_weight, self.age_weight, self.geo_weight];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("rule weights must be nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("rule weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Blocking key: the configured fields joined by `|`.
pub fn block_key(r: &PersonRecord, cfg: &RuleConfig) -> String {
    cfg.block_on
        .iter()
        .map(|f| f.value(r).unwrap_or_else(|| MISSING_TOKEN.to_string()))
        .collect::<Vec<_>>()
        .join("|")
}

fn name_similarity(r1: &PersonRecord, r2: &PersonRecord, p: f64) -> f64 {
    let fields = [
        (&r1.nafn_norm, &r2.nafn_norm),
        (&r1.first_name, &r2.first_name),
        (&r1.patronym, &r2.patronym),
        (&r1.surname, &r2.surname),
    ];
    let scores: Vec<f64> = fields
        .iter()
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .map(|(a, b)| jaro_winkler_unchecked(a, b, p))
        .collect();
    if scores.is_empty() {
        return 1.0;
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

fn age_closeness(a: Option<i32>, b: Option<i32>, thr: AgeDisparityThreshold) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) if thr.years() > 0 => 1.0 - a.abs_diff(b) as f64 / thr.years() as f64,
        _ => 1.0,
    }
}

/// Quarter credit per agreeing level, walking county → parish → district →
/// farm and stopping at the first disagreement.
fn geo_agreement(r1: &PersonRecord, r2: &PersonRecord) -> f64 {
    let levels = [(&r1.county, &r2.county), (&r1.parish, &r2.parish), (&r1.district, &r2.district), (&r1.farm, &r2.farm)];
    levels.iter().take_while(|(a, b)| a == b).count() as f64 / 4.0
}

/// Weighted rule score in `[0, 1]`; a sex conflict or a birth-year gap beyond
/// `thr` scores exactly 0. Assumes `cfg` has been validated.
pub fn rule_score(r1: &PersonRecord, r2: &PersonRecord, thr: AgeDisparityThreshold, cfg: &RuleConfig) -> f64 {
    if let (Some(a), Some(b)) = (r1.sex_male, r2.sex_male) {
        if a != b {
            return 0.0;
        }
    }
    if let (Some(a), Some(b)) = (r1.birthyear, r2.birthyear) {
        if !thr.compatible(a, b) {
            return 0.0;
        }
    }
    let s = cfg.name_weight * name_similarity(r1, r2, cfg.jw_prefix_weight)
        + cfg.age_weight * age_closeness(r1.birthyear, r2.birthyear, thr)
        + cfg.geo_weight * geo_agreement(r1, r2);
    s.clamp(0.0, 1.0)
}

/// Baseline score with blocking: pairs in different blocks score 0.
pub fn blocked_score(r1: &PersonRecord, r2: &PersonRecord, thr: AgeDisparityThreshold, cfg: &RuleConfig) -> f64 {
    if block_key(r1, cfg) != block_key(r2, cfg) {
        return 0.0;
    }
    rule_score(r1, r2, thr, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> PersonRecord {
        let mut r = PersonRecord {
            id: "1".into(),
            heimild: 1703,
            nafn_norm: "jón jónsson".into(),
            first_name: "jón".into(),
            patronym: "jónsson".into(),
            birthyear: Some(1680),
            sex_male: Some(true),
            farm: Some("101".into()),
            parish: Some("12".into()),
            district: Some("3".into()),
            county: Some("1".into()),
            ..Default::default()
        };
        r.derive_full_name();
        r
    }

    #[test]
    fn jaro_examples() {
        assert_eq!(jaro("abc", "abc"), 1.0);
        assert_eq!(jaro("abc", "xyz"), 0.0);
        assert!((jaro("martha", "marhta") - 17.0 / 18.0).abs() < 1e-12);
        assert_eq!(jaro("", ""), 1.0);
        assert_eq!(jaro("", "a"), 0.0);
    }

    #[test]
    fn jaro_winkler_examples() {
        let jw = jaro_winkler("martha", "marhta", 0.1).unwrap();
        assert!((jw - (17.0 / 18.0 + 0.3 / 18.0)).abs() < 1e-12);
        assert_eq!(jaro_winkler("dixon", "dixon", 0.1).unwrap(), 1.0);
        assert_eq!(jaro_winkler("abcd", "xbcd", 0.1).unwrap(), jaro("abcd", "xbcd"));
        assert!(matches!(jaro_winkler("a", "b", 0.3), Err(Error::Config(_))));
    }

    #[test]
    fn block_keys() {
        let cfg = RuleConfig::default();
        assert_eq!(block_key(&rec(), &cfg), "12|j");
        assert_eq!(block_key(&PersonRecord::default(), &cfg), "∅|∅");
        assert_eq!(block_key(&rec(), &cfg), block_key(&rec().clone(), &cfg));
    }

    #[test]
    fn rule_score_examples() {
        let cfg = RuleConfig::default();
        let thr = AgeDisparityThreshold(10);
        assert_eq!(rule_score(&rec(), &rec(), thr, &cfg), 1.0);

        let mut other = rec();
        other.sex_male = Some(false);
        assert_eq!(rule_score(&rec(), &other, thr, &cfg), 0.0);

        let mut other = rec();
        other.birthyear = Some(1685);
        other.district = Some("4".into());
        other.farm = Some("202".into());
        assert!((rule_score(&rec(), &other, thr, &cfg) - 0.75).abs() < 1e-12);

        other.birthyear = Some(1691);
        assert_eq!(rule_score(&rec(), &other, thr, &cfg), 0.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(RuleConfig::default().validate().is_ok());
        let cfg = RuleConfig { name_weight: 0.6, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = RuleConfig { jw_prefix_weight: 0.3, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn block_field_names_round_trip() {
        for f in ["county", "parish", "first-initial", "sex"] {
            assert_eq!(f.parse::<BlockField>().unwrap().as_str(), f);
        }
        let cfg: RuleConfig = serde_json::from_str(r#"{"block_on":["county","surname-initial"]}"#).unwrap();
        assert_eq!(cfg.block_on, vec![BlockField::County, BlockField::SurnameInitial]);
    }
}
