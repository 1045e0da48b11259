//! Skill annotation: probe each enabled skill with a yes/no query and
//! retain (image, skill) pairs only when exactly one skill answers yes.

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixels::Pixels;
use crate::record::{ImageRecord, Split};
use crate::skill::{SkillId, SkillRegistry};
use crate::templates::TemplateStore;
use crate::trajectory::Verdict;
use crate::transport::{ChatMessage, ReasonerClient};

/// An unannotated input image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub path: String,
    pub label: Verdict,
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default = "default_split")]
    pub split: Split,
}

fn default_source() -> String {
    "unknown".into()
}

fn default_split() -> Split {
    Split::Train
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectEntry {
    pub id: String,
    pub reason: String,
}

/// Retained records plus the rejects report.
#[derive(Clone, Debug, Default)]
pub struct AnnotateOutcome {
    pub records: Vec<ImageRecord>,
    pub rejects: Vec<RejectEntry>,
}

/// Renders the rejects report: one tab-separated `id\treason` line each.
pub fn rejects_report(rejects: &[RejectEntry]) -> String {
    let mut out = String::new();
    for entry in rejects {
        out.push_str(&entry.id);
        out.push('\t');
        out.push_str(&entry.reason.replace('\n', " "));
        out.push('\n');
    }
    out
}

fn reply_is_yes(reply: &str) -> bool {
    let normalized = reply.trim().trim_end_matches('.').to_ascii_lowercase();
    normalized == "yes"
}

/// Annotates candidates against the enabled skill library.
///
/// Fake candidates are probed once per enabled skill (repeated `repeats`
/// times; a skill counts as "yes" only when every repeat agrees) and
/// retained only when exactly one skill says yes. Real candidates are
/// assigned round-robin over the enabled skills in ordinal order so
/// per-skill counts stay balanced. Unreadable images and ambiguous or
/// evidence-free fakes land in the rejects report; transport failures are
/// fatal.
pub fn annotate(
    candidates: &[Candidate],
    registry: &SkillRegistry,
    reasoner: &dyn ReasonerClient,
    templates: &TemplateStore,
    repeats: usize,
) -> Result<AnnotateOutcome> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let mut outcome = AnnotateOutcome::default();
    let mut real_cursor = 0usize;
    for candidate in candidates {
        let pixels = match Pixels::decode_file(&candidate.path) {
            Ok(pixels) => pixels,
            Err(err) => {
                outcome.rejects.push(RejectEntry {
                    id: candidate.id.clone(),
                    reason: format!("unreadable: {err}"),
                });
                continue;
            }
        };
        match candidate.label {
            Verdict::Real => {
                let skill = registry.enabled()[real_cursor % registry.enabled().len()];
                real_cursor += 1;
                outcome.records.push(make_record(candidate, skill));
            }
            Verdict::Fake => {
                let payload =
                    base64::engine::general_purpose::STANDARD.encode(pixels.to_png_bytes()?);
                let mut yes_skills = Vec::new();
                for &skill in registry.enabled() {
                    let prompt = templates.render_annotate(skill)?;
                    let messages =
                        vec![ChatMessage::user_with_images(prompt, vec![payload.clone()])];
                    let mut all_yes = true;
                    for _ in 0..repeats {
                        let reply = reasoner.complete(&messages)?;
                        if !reply_is_yes(&reply) {
                            all_yes = false;
                            break;
                        }
                    }
                    if all_yes {
                        yes_skills.push(skill);
                    }
                }
                match yes_skills.as_slice() {
                    [skill] => outcome.records.push(make_record(candidate, *skill)),
                    [] => outcome.rejects.push(RejectEntry {
                        id: candidate.id.clone(),
                        reason: "no-skill-detected".into(),
                    }),
                    many => outcome.rejects.push(RejectEntry {
                        id: candidate.id.clone(),
                        reason: format!(
                            "ambiguous: {}",
                            many.iter()
                                .map(|s| s.canonical_name())
                                .collect::<Vec<_>>()
                                .join(",")
                        ),
                    }),
                }
            }
        }
    }
    Ok(outcome)
}

fn make_record(candidate: &Candidate, skill: SkillId) -> ImageRecord {
    ImageRecord {
        id: candidate.id.clone(),
        path: candidate.path.clone(),
        label: candidate.label,
        skill,
        source: candidate.source.clone(),
        split: candidate.split,
    }
}

/// Parses a candidates file: one JSON candidate per line, blank lines
/// skipped.
pub fn load_candidates(path: impl AsRef<std::path::Path>) -> Result<Vec<Candidate>> {
    let text = std::fs::read_to_string(path)?;
    let mut candidates = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let candidate: Candidate =
            serde_json::from_str(trimmed).map_err(|e| Error::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
        candidates.push(candidate);
    }
    Ok(candidates)
}
