//! Manifest loading, validation, and seeded few-shot subsampling.
//!
//! On disk a manifest is line-delimited JSON: an optional first header line
//! `{"header":{...}}` followed by one record object per line with exactly
//! the fields `id`, `path`, `label` ("real"|"fake"), `skill` (canonical
//! name), `source`, and `split` ("train"|"test").

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{ImageRecord, Split};
use crate::skill::SkillId;
use crate::trajectory::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub name: String,
    pub version: String,
    pub created_at: String,
}

impl Default for ManifestHeader {
    fn default() -> Self {
        ManifestHeader {
            name: "manifest".into(),
            version: "1".into(),
            created_at: "1970-01-01T00:00:00Z".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ManifestHeader,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ImageRecord>,
}

impl Manifest {
    /// Validates id uniqueness and per-record invariants.
    pub fn new(header: ManifestHeader, records: Vec<ImageRecord>) -> Result<Manifest> {
        let mut seen = HashSet::new();
        for (i, record) in records.iter().enumerate() {
            record.validate().map_err(|e| Error::ManifestLine {
                line: i + 1,
                source: Box::new(e),
            })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: record.id.clone(),
                });
            }
        }
        Ok(Manifest { header, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Manifest> {
        let mut header = ManifestHeader::default();
        let mut records = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(trimmed).map_err(|e| Error::ParseError {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if value.get("header").is_some() {
                let parsed: HeaderLine =
                    serde_json::from_value(value).map_err(|e| Error::ParseError {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                header = parsed.header;
                continue;
            }
            // Validate the skill name first so an unknown skill surfaces as
            // its own error kind, with the line number attached.
            let skill_name =
                value
                    .get("skill")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| Error::ParseError {
                        line: line_no,
                        message: "missing string field \"skill\"".into(),
                    })?;
            skill_name
                .parse::<SkillId>()
                .map_err(|e| Error::ManifestLine {
                    line: line_no,
                    source: Box::new(e),
                })?;
            let record: ImageRecord =
                serde_json::from_value(value).map_err(|e| Error::ParseError {
                    line: line_no,
                    message: e.to_string(),
                })?;
            record.validate().map_err(|e| Error::ManifestLine {
                line: line_no,
                source: Box::new(e),
            })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId {
                    line: line_no,
                    id: record.id.clone(),
                });
            }
            records.push(record);
        }
        Ok(Manifest { header, records })
    }

    /// Serializes back to the line format, header first. Byte-deterministic.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = HeaderLine {
            header: self.header.clone(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&header).expect("header"));
        for record in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(record).expect("record"));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Seeded per-skill subsample: up to `n_per_skill` real and `n_per_skill`
/// fake train-split records for every skill present in the manifest. Skills
/// with fewer records contribute all of them and add a warning. Output
/// records are grouped by skill ordinal, real pool first.
pub fn few_shot_sample(
    manifest: &Manifest,
    n_per_skill: usize,
    seed: u64,
) -> Result<(Manifest, Vec<String>)> {
    if n_per_skill == 0 {
        return Err(Error::InvalidConfig(
            "n_per_skill must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for skill in SkillId::ALL {
        let present = manifest.records.iter().any(|r| r.skill == skill);
        if !present {
            continue;
        }
        for label in [Verdict::Real, Verdict::Fake] {
            let pool: Vec<&ImageRecord> = manifest
                .records
                .iter()
                .filter(|r| r.skill == skill && r.label == label && r.split == Split::Train)
                .collect();
            if pool.len() < n_per_skill {
                warnings.push(format!(
                    "skill {} has only {} {} train record(s), wanted {}",
                    skill.canonical_name(),
                    pool.len(),
                    label,
                    n_per_skill
                ));
            }
            records.extend(sample_without_replacement(&pool, n_per_skill, &mut rng));
        }
    }
    let header = ManifestHeader {
        name: format!("{}-fewshot", manifest.header.name),
        version: manifest.header.version.clone(),
        created_at: manifest.header.created_at.clone(),
    };
    Ok((Manifest::new(header, records)?, warnings))
}

/// Partial Fisher-Yates: draws up to `n` elements uniformly without
/// replacement, in selection order.
fn sample_without_replacement(
    pool: &[&ImageRecord],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<ImageRecord> {
    if pool.len() <= n {
        return pool.iter().map(|r| (*r).clone()).collect();
    }
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut picked = Vec::with_capacity(n);
    for i in 0..n {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
        picked.push(pool[indices[i]].clone());
    }
    picked
}
