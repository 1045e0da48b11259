//! Skill-routed forensic pipeline for synthetic-image detection.
//!
//! Detection runs in two stages. A routing stage extracts cheap perceptual
//! clues from the image and picks one forensic skill out of a twelve-skill
//! library, either by prompting a multimodal reasoner or through a
//! deterministic offline fallback. An analysis stage then executes the
//! toolchain bound to that skill (built-in spectral and residual analyzers,
//! derived views, or external tool services), renders a skill-conditioned
//! prompt around the collected evidence, and parses the reasoner's
//! structured reply into a real/fake verdict.
//!
//! Around the detector: a benchmark harness (manifests, per-skill
//! accuracy/F1 tables, a robustness perturbation suite, seeded few-shot
//! sampling, skill annotation), a desk-scale trainer for the group-relative
//! policy objective on a contextual-bandit surrogate, and record/replay
//! transports that make every external interaction reproducible.

pub mod analyzers;
pub mod bench;
pub mod error;
pub mod pixels;
pub mod reasoner;
pub mod record;
pub mod router;
pub mod skill;
pub mod templates;
pub mod testkit;
pub mod training;
pub mod trajectory;
pub mod transport;

mod par;

pub use error::{Error, Result};
pub use pixels::Pixels;
pub use reasoner::{DetectConfig, DetectionOutcome, Detector, Pipeline};
pub use record::{ImageRecord, Split};
pub use skill::{SkillId, SkillRegistry};
pub use trajectory::{RewardWeights, Trajectory, Verdict};

/// Fixed-width numeric formatting shared by summaries and reports: four
/// fractional digits, ties to even.
pub(crate) fn fmt4(value: f64) -> String {
    format!("{value:.4}")
}
