//! Pattern learning and recognition.

pub mod judgment;
pub mod pattern;
pub mod pool;
pub mod snapshot;

pub use judgment::{Judgment, JudgmentKind, JudgmentSet};
pub use pattern::{infer, Pattern, SourceId, SourceSet};
pub use pool::{calibrate_threshold, match_truth, midpoint_threshold, InsertOutcome, InsertReport, MatcherConfig, PatternPool};
