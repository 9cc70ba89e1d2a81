//! Evidence-based truth values.
//!
//! A [`Truth`] is stored as a pair of evidence counts. Frequency, confidence
//! and expectation are derived on demand, so revision is plain addition and a
//! truth value can never be produced without the evidence that backs it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evidential horizon configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NalConfig {
    /// Amount of hypothetical future evidence confidence is measured against.
    pub k: f64,
}

impl Default for NalConfig {
    fn default() -> Self {
        Self { k: 1.0 }
    }
}

impl NalConfig {
    pub fn new(k: f64) -> Result<Self> {
        let cfg = Self { k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config(format!("evidential horizon k must be positive, got {}", self.k)));
        }
        Ok(())
    }
}

/// Positive and negative evidence for a statement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truth {
    pub w_plus: f64,
    pub w_minus: f64,
}

impl Truth {
    pub const IGNORANT: Truth = Truth { w_plus: 0.0, w_minus: 0.0 };

    pub fn new(w_plus: f64, w_minus: f64) -> Result<Self> {
        if !(w_plus >= 0.0 && w_minus >= 0.0 && w_plus.is_finite() && w_minus.is_finite()) {
            return Err(Error::InvalidTruth(format!(
                "evidence must be finite and nonnegative, got ({w_plus}, {w_minus})"
            )));
        }
        Ok(Self { w_plus, w_minus })
    }

    /// Builds the truth whose frequency and confidence are `(f, c)`.
    ///
    /// Total evidence is `k·c/(1−c)`, split `f : 1−f` between the two sides.
    pub fn from_fc(f: f64, c: f64, cfg: &NalConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidTruth(format!("frequency must lie in [0, 1], got {f}")));
        }
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidConfidence(c));
        }
        let total = cfg.k * c / (1.0 - c);
        let w_plus = f * total;
        Ok(Self { w_plus, w_minus: total - w_plus })
    }

    pub fn total(&self) -> f64 {
        self.w_plus + self.w_minus
    }

    pub fn has_evidence(&self) -> bool {
        self.total() > 0.0
    }

    /// Share of positive evidence. Undefined without any evidence.
    pub fn frequency(&self) -> Result<f64> {
        let total = self.total();
        if total > 0.0 {
            Ok(self.w_plus / total)
        } else {
            Err(Error::NoEvidence)
        }
    }

    pub fn confidence(&self, cfg: &NalConfig) -> f64 {
        let total = self.total();
        total / (total + cfg.k)
    }

    /// `c·(f − ½) + ½`, and exactly ½ when there is no evidence.
    pub fn expectation(&self, cfg: &NalConfig) -> f64 {
        match self.frequency() {
            Ok(f) => self.confidence(cfg) * (f - 0.5) + 0.5,
            Err(_) => 0.5,
        }
    }

    /// Pools evidence from an independent source.
    #[must_use]
    pub fn revise(&self, other: &Truth) -> Truth {
        Truth { w_plus: self.w_plus + other.w_plus, w_minus: self.w_minus + other.w_minus }
    }
}

impl std::iter::Sum for Truth {
    fn sum<I: Iterator<Item = Truth>>(iter: I) -> Truth {
        iter.fold(Truth::IGNORANT, |acc, t| acc.revise(&t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K1: NalConfig = NalConfig { k: 1.0 };

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn from_fc_examples() {
        let t = Truth::from_fc(1.0, 0.9, &K1).unwrap();
        assert!(close(t.w_plus, 9.0) && t.w_minus == 0.0);
        let t = Truth::from_fc(0.0, 0.9, &K1).unwrap();
        assert!(t.w_plus == 0.0 && close(t.w_minus, 9.0));
        let t = Truth::from_fc(0.5, 0.0, &K1).unwrap();
        assert_eq!(t, Truth::IGNORANT);
    }

    #[test]
    fn from_fc_rejects_full_confidence() {
        assert!(matches!(Truth::from_fc(1.0, 1.0, &K1), Err(Error::InvalidConfidence(_))));
        assert!(Truth::from_fc(1.0, 1.5, &K1).is_err());
        assert!(Truth::from_fc(-0.1, 0.5, &K1).is_err());
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(Truth::new(9.0, 0.0).unwrap().frequency().unwrap(), 1.0);
        assert_eq!(Truth::new(1.0, 1.0).unwrap().frequency().unwrap(), 0.5);
        assert_eq!(Truth::new(1.0, 3.0).unwrap().frequency().unwrap(), 0.25);
        assert!(matches!(Truth::IGNORANT.frequency(), Err(Error::NoEvidence)));
    }

    #[test]
    fn confidence_examples() {
        assert!(close(Truth::new(9.0, 0.0).unwrap().confidence(&K1), 0.9));
        assert_eq!(Truth::IGNORANT.confidence(&K1), 0.0);
        assert!(close(Truth::new(1.0, 1.0).unwrap().confidence(&K1), 2.0 / 3.0));
    }

    #[test]
    fn expectation_examples() {
        assert!(close(Truth::from_fc(1.0, 0.9, &K1).unwrap().expectation(&K1), 0.95));
        assert!(close(Truth::from_fc(0.0, 0.9, &K1).unwrap().expectation(&K1), 0.05));
        assert_eq!(Truth::IGNORANT.expectation(&K1), 0.5);
    }

    #[test]
    fn revise_examples() {
        let pos = Truth::new(9.0, 0.0).unwrap();
        let neg = Truth::new(0.0, 9.0).unwrap();
        let both = pos.revise(&pos);
        assert_eq!(both, Truth::new(18.0, 0.0).unwrap());
        assert_eq!(both.frequency().unwrap(), 1.0);
        assert!(close(both.confidence(&K1), 18.0 / 19.0));
        assert_eq!(pos.revise(&neg).frequency().unwrap(), 0.5);
        assert_eq!(pos.revise(&Truth::IGNORANT), pos);
    }

    #[test]
    fn invalid_evidence_and_horizon() {
        assert!(Truth::new(-1.0, 0.0).is_err());
        assert!(Truth::new(f64::NAN, 0.0).is_err());
        assert!(NalConfig::new(0.0).is_err());
        assert!(NalConfig::new(2.0).is_ok());
    }
}
