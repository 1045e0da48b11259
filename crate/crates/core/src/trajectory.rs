//! The structured output grammar: an optional skill tag, a think block, and
//! a binary answer.
//!
//! Raw model output is parsed leniently (every well-formed block is
//! extracted even when others are missing or broken) while `format_valid`
//! reports strict whole-string compliance:
//!
//! ```text
//! [<skill>NAME</skill>] <think>TEXT</think> <answer>D</answer>
//! ```
//!
//! with `NAME` a canonical skill name, `TEXT` non-empty, `D` either 0 or 1,
//! arbitrary whitespace between blocks, and nothing else outside them.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::skill::SkillId;

/// Binary authenticity decision. Doubles as the ground-truth label on
/// manifest records; code 0 means real, code 1 means fake.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Real,
    Fake,
}

impl Verdict {
    pub fn code(self) -> u8 {
        match self {
            Verdict::Real => 0,
            Verdict::Fake => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Verdict> {
        match code {
            0 => Some(Verdict::Real),
            1 => Some(Verdict::Fake),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Real => "real",
            Verdict::Fake => "fake",
        })
    }
}

/// Weights for the three reward signals: answer correctness, skill
/// consistency, and format compliance. All default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub answer: f64,
    pub skill: f64,
    pub format: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            answer: 1.0,
            skill: 1.0,
            format: 1.0,
        }
    }
}

static STRICT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?s)^\s*(?:<skill>([A-Za-z]+)</skill>\s*)?<think>(.+?)</think>\s*<answer>([01])</answer>\s*$",
    )
    .unwrap()
});
static SKILL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<skill>\s*([A-Za-z]+)\s*</skill>").unwrap());
static THINK_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think>(.*?)</think>").unwrap());
static ANSWER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<answer>\s*([^<\s]*)\s*</answer>").unwrap());

/// A parsed reasoning output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Skill echoed by the routing stage, when a well-formed tag is present.
    pub skill_tag: Option<SkillId>,
    /// Free-form reasoning text; empty when no think block was found.
    pub think_text: String,
    /// The answer digit, populated whenever a well-formed answer block
    /// exists, even if the rest of the grammar is broken.
    pub answer: Option<u8>,
    /// True iff `raw` matches the full grammar.
    pub format_valid: bool,
    /// The original text.
    pub raw: String,
}

impl Trajectory {
    /// Lenient parse with a strict validity flag. Never fails; a malformed
    /// answer digit leaves `answer` empty and `format_valid` false.
    pub fn parse(raw: &str) -> Trajectory {
        let skill_tag = SKILL_RE
            .captures(raw)
            .and_then(|c| c[1].parse::<SkillId>().ok());
        let think_text = THINK_RE
            .captures(raw)
            .map(|c| c[1].to_string())
            .unwrap_or_default();
        let answer = ANSWER_RE.captures(raw).and_then(|c| match &c[1] {
            "0" => Some(0),
            "1" => Some(1),
            _ => None,
        });
        let format_valid = match STRICT_RE.captures(raw) {
            // A strict match may still carry a tag that is not a canonical
            // skill name; that fails validation.
            Some(c) => c
                .get(1)
                .is_none_or(|m| m.as_str().parse::<SkillId>().is_ok()),
            None => false,
        };
        Trajectory {
            skill_tag,
            think_text,
            answer,
            format_valid,
            raw: raw.to_string(),
        }
    }

    /// Renders the canonical grammar string for this trajectory's fields.
    /// For any grammar-valid trajectory, `parse(render(t))` reproduces `t`'s
    /// fields.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(skill) = self.skill_tag {
            out.push_str("<skill>");
            out.push_str(skill.canonical_name());
            out.push_str("</skill>");
        }
        out.push_str("<think>");
        out.push_str(&self.think_text);
        out.push_str("</think>");
        if let Some(answer) = self.answer {
            out.push_str("<answer>");
            out.push_str(if answer == 0 { "0" } else { "1" });
            out.push_str("</answer>");
        }
        out
    }

    /// Builds a grammar-valid trajectory from its parts.
    pub fn valid(skill_tag: Option<SkillId>, think_text: &str, answer: u8) -> Trajectory {
        debug_assert!(!think_text.is_empty());
        debug_assert!(answer <= 1);
        let mut t = Trajectory {
            skill_tag,
            think_text: think_text.to_string(),
            answer: Some(answer),
            format_valid: true,
            raw: String::new(),
        };
        t.raw = t.render();
        t
    }
}

/// Renders a grammar-valid raw string in one call.
pub fn render_trajectory(skill_tag: Option<SkillId>, think_text: &str, answer: u8) -> String {
    Trajectory::valid(skill_tag, think_text, answer).raw
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_valid_trajectory() {
        let t = Trajectory::parse(
            "<think>shadow direction conflicts with sun</think><answer>1</answer>",
        );
        assert_eq!(t.answer, Some(1));
        assert!(t.format_valid);
        assert_eq!(t.skill_tag, None);
        assert_eq!(t.think_text, "shadow direction conflicts with sun");
    }

    #[test]
    fn skill_tagged_trajectory() {
        let t = Trajectory::parse(
            "<skill>Freq</skill>\n<think>spectral spike at the corner</think>\n<answer>0</answer>",
        );
        assert!(t.format_valid);
        assert_eq!(t.skill_tag, Some(SkillId::Freq));
        assert_eq!(t.answer, Some(0));
    }

    #[test]
    fn lenient_answer_extraction_without_think() {
        let t = Trajectory::parse("<answer>0</answer>");
        assert_eq!(t.answer, Some(0));
        assert!(!t.format_valid);
        assert!(t.think_text.is_empty());
    }

    #[test]
    fn answer_digit_outside_binary_is_dropped() {
        let t = Trajectory::parse("<think>x</think><answer>2</answer>");
        assert_eq!(t.answer, None);
        assert!(!t.format_valid);
        assert_eq!(t.think_text, "x");
    }

    #[test]
    fn empty_think_is_invalid() {
        let t = Trajectory::parse("<think></think><answer>1</answer>");
        assert!(!t.format_valid);
        assert_eq!(t.answer, Some(1));
    }

    #[test]
    fn trailing_garbage_is_invalid() {
        let t = Trajectory::parse("<think>x</think><answer>1</answer> but also this");
        assert!(!t.format_valid);
        assert_eq!(t.answer, Some(1));
    }

    #[test]
    fn non_canonical_skill_tag_is_invalid() {
        let t = Trajectory::parse("<skill>Texture</skill><think>x</think><answer>1</answer>");
        assert!(!t.format_valid);
        assert_eq!(t.skill_tag, None);
        assert_eq!(t.answer, Some(1));
    }

    #[test]
    fn render_parse_identity() {
        let t = Trajectory::valid(Some(SkillId::Ocr), "misspelled storefront sign", 1);
        let back = Trajectory::parse(&t.raw);
        assert_eq!(back, t);
    }

    #[test]
    fn render_of_parse_is_grammar_equivalent() {
        // Whitespace between blocks is legal; rendering canonicalizes it
        // while preserving every field.
        let raw = "  <skill>freq</skill>\n <think>corner spike</think>\n\t<answer>1</answer>  ";
        let parsed = Trajectory::parse(raw);
        assert!(parsed.format_valid);
        let rendered = parsed.render();
        let reparsed = Trajectory::parse(&rendered);
        assert_eq!(reparsed.skill_tag, parsed.skill_tag);
        assert_eq!(reparsed.think_text, parsed.think_text);
        assert_eq!(reparsed.answer, parsed.answer);
        assert!(reparsed.format_valid);
    }

    #[test]
    fn deleting_any_block_invalidates() {
        let raw = "<skill>Pixel</skill><think>blocky residue</think><answer>1</answer>";
        assert!(Trajectory::parse(raw).format_valid);
        // The skill tag is optional, so only think/answer removal must break
        // validity; a skill tag without the rest must break it too.
        assert!(!Trajectory::parse("<skill>Pixel</skill><answer>1</answer>").format_valid);
        assert!(
            !Trajectory::parse("<skill>Pixel</skill><think>blocky residue</think>").format_valid
        );
        assert!(!Trajectory::parse("<skill>Pixel</skill>").format_valid);
    }
}
