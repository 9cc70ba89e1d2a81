use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature family a judgment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentKind {
    HeimildDiff,
    Name,
    FirstName,
    Patronym,
    Surname,
    Birthyear,
    BirthyearCompatible,
    Sex,
    StatusValue,
    Marriage,
    Farm,
    County,
    Parish,
    District,
    UnknownField,
    GenericToken,
}

impl JudgmentKind {
    pub const ALL: [JudgmentKind; 16] = [
        JudgmentKind::HeimildDiff,
        JudgmentKind::Name,
        JudgmentKind::FirstName,
        JudgmentKind::Patronym,
        JudgmentKind::Surname,
        JudgmentKind::Birthyear,
        JudgmentKind::BirthyearCompatible,
        JudgmentKind::Sex,
        JudgmentKind::StatusValue,
        JudgmentKind::Marriage,
        JudgmentKind::Farm,
        JudgmentKind::County,
        JudgmentKind::Parish,
        JudgmentKind::District,
        JudgmentKind::UnknownField,
        JudgmentKind::GenericToken,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JudgmentKind::HeimildDiff => "heimild_diff",
            JudgmentKind::Name => "name",
            JudgmentKind::FirstName => "first_name",
            JudgmentKind::Patronym => "patronym",
            JudgmentKind::Surname => "surname",
            JudgmentKind::Birthyear => "birthyear",
            JudgmentKind::BirthyearCompatible => "birthyear_compatible",
            JudgmentKind::Sex => "sex",
            JudgmentKind::StatusValue => "status_value",
            JudgmentKind::Marriage => "marriage",
            JudgmentKind::Farm => "farm",
            JudgmentKind::County => "county",
            JudgmentKind::Parish => "parish",
            JudgmentKind::District => "district",
            JudgmentKind::UnknownField => "unknown_field",
            JudgmentKind::GenericToken => "generic_token",
        }
    }
}

impl fmt::Display for JudgmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JudgmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JudgmentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidPattern(format!("unknown judgment kind `{s}`")))
    }
}

/// One atomic comparison between two records, e.g. `surname:same`.
///
/// Equality and ordering follow the canonical `kind:value` text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Judgment {
    kind: JudgmentKind,
    value: Arc<str>,
}

impl Judgment {
    pub fn new(kind: JudgmentKind, value: impl AsRef<str>) -> Self {
        Self { kind, value: Arc::from(value.as_ref()) }
    }

    pub fn same_or_different(kind: JudgmentKind, same: bool) -> Self {
        Self::new(kind, if same { "same" } else { "different" })
    }

    pub fn kind(&self) -> JudgmentKind {
        self.kind
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.value)
    }
}

impl FromStr for Judgment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidPattern(format!("judgment `{s}` lacks a `kind:value` separator")))?;
        Ok(Judgment::new(kind.parse()?, value))
    }
}

impl Serialize for Judgment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Judgment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unordered, duplicate-free set of judgments, kept sorted internally.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Judgment>", into = "Vec<Judgment>")]
pub struct JudgmentSet(Vec<Judgment>);

impl JudgmentSet {
    pub fn new(judgments: impl IntoIterator<Item = Judgment>) -> Self {
        let mut v: Vec<Judgment> = judgments.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Judgment> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Judgment] {
        &self.0
    }

    pub fn contains(&self, j: &Judgment) -> bool {
        self.0.binary_search(j).is_ok()
    }

    /// Size of the intersection, by sorted merge.
    pub fn overlap(&self, other: &JudgmentSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn difference(&self, other: &JudgmentSet) -> JudgmentSet {
        JudgmentSet(self.0.iter().filter(|j| !other.contains(j)).cloned().collect())
    }

    pub fn intersection(&self, other: &JudgmentSet) -> JudgmentSet {
        JudgmentSet(self.0.iter().filter(|j| other.contains(j)).cloned().collect())
    }
}

impl From<Vec<Judgment>> for JudgmentSet {
    fn from(v: Vec<Judgment>) -> Self {
        JudgmentSet::new(v)
    }
}

impl From<JudgmentSet> for Vec<Judgment> {
    fn from(s: JudgmentSet) -> Self {
        s.0
    }
}

impl FromIterator<Judgment> for JudgmentSet {
    fn from_iter<I: IntoIterator<Item = Judgment>>(iter: I) -> Self {
        JudgmentSet::new(iter)
    }
}

impl<'a> IntoIterator for &'a JudgmentSet {
    type Item = &'a Judgment;
    type IntoIter = std::slice::Iter<'a, Judgment>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for JudgmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}
