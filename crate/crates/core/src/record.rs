//! Manifest records: one image with its authenticity and skill annotation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skill::SkillId;
use crate::trajectory::Verdict;

/// Dataset split a record belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest entry. Real images carry a skill annotation too, so that
/// per-skill metric tables have real/fake pairs in every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    pub label: Verdict,
    pub skill: SkillId,
    pub source: String,
    pub split: Split,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::ParseError {
                line: 0,
                message: "record id must be non-empty".into(),
            });
        }
        Ok(())
    }
}
