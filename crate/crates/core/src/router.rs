//! Routing stage: cheap perceptual clue extraction and skill selection,
//! with a reasoner-backed path and a deterministic offline fallback.

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::analyzers::{frequency_evidence, pixel_evidence, AnalyzerConfig, ToolKind};
use crate::error::{Error, Result};
use crate::fmt4;
use crate::pixels::Pixels;
use crate::skill::{SkillId, SkillRegistry};
use crate::templates::{TemplateStore, STAGE1_TEMPLATE_ID};
use crate::trajectory::Trajectory;
use crate::transport::{ChatMessage, ReasonerClient, ToolTransport};

/// Cheap perceptual statistics that drive skill routing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClueSet {
    /// High-frequency energy fraction, in [0, 1].
    pub hf_ratio: f64,
    /// Mean absolute down-up resampling residual.
    pub residual_energy: f64,
    /// Fraction of image area covered by detected text boxes; 0 when no OCR
    /// client is available.
    pub text_likelihood: f64,
    pub luminance_mean: f64,
    pub luminance_var: f64,
    /// Id of the image the clues were extracted from.
    pub derived_from: String,
}

impl ClueSet {
    /// Deterministic one-line-per-field rendering for prompts.
    pub fn summary(&self) -> String {
        format!(
            "image: {}\nhf_ratio={}\nresidual_energy={}\ntext_likelihood={}\nluminance_mean={}\nluminance_var={}",
            self.derived_from,
            fmt4(self.hf_ratio),
            fmt4(self.residual_energy),
            fmt4(self.text_likelihood),
            fmt4(self.luminance_mean),
            fmt4(self.luminance_var),
        )
    }
}

/// Thresholds for the deterministic fallback router.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouterThresholds {
    pub text_likelihood: f64,
    pub hf_ratio: f64,
    pub residual_energy: f64,
}

impl Default for RouterThresholds {
    fn default() -> Self {
        RouterThresholds {
            text_likelihood: 0.05,
            hf_ratio: 0.5,
            residual_energy: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceOrigin {
    Reasoner,
    Fallback,
}

/// The routing decision: which skill analyzes the image, and why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillChoice {
    pub skill: SkillId,
    pub rationale: String,
    pub origin: ChoiceOrigin,
}

/// Extracts routing clues from an image: spectral and residual statistics
/// via the built-in analyzers, text coverage via OCR when a client is
/// supplied, and luminance moments.
pub fn extract_clues(
    pixels: &Pixels,
    image_id: &str,
    ocr: Option<&dyn ToolTransport>,
    config: &AnalyzerConfig,
) -> Result<ClueSet> {
    let freq = frequency_evidence(pixels, config.hf_cutoff)?;
    let pix = pixel_evidence(pixels, config.pixel_factor)?;
    let text_likelihood = match ocr {
        Some(transport) => match crate::analyzers::call_tool(transport, ToolKind::Ocr, pixels)? {
            crate::analyzers::ToolResult::Ocr(result) => result.area_covered(),
            _ => unreachable!("ocr kind returns ocr result"),
        },
        None => 0.0,
    };
    let luma = pixels.luminance();
    let n = luma.len() as f64;
    let mean = luma.iter().sum::<f64>() / n;
    let var = luma.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(ClueSet {
        hf_ratio: freq.hf_ratio,
        residual_energy: pix.residual_mean,
        text_likelihood,
        luminance_mean: mean,
        luminance_var: var,
        derived_from: image_id.to_string(),
    })
}

fn stage1_messages(
    pixels: &Pixels,
    clues: &ClueSet,
    registry: &SkillRegistry,
    templates: &TemplateStore,
) -> Result<Vec<ChatMessage>> {
    let text =
        templates.render_stage1(&clues.derived_from, &clues.summary(), registry.enabled())?;
    let payload = base64::engine::general_purpose::STANDARD.encode(pixels.to_png_bytes()?);
    Ok(vec![ChatMessage::user_with_images(text, vec![payload])])
}

fn extract_skill_name(reply: &str) -> Option<String> {
    // Same lenient tag extraction the trajectory grammar uses.
    let parsed = Trajectory::parse(reply);
    if let Some(skill) = parsed.skill_tag {
        return Some(skill.canonical_name().to_string());
    }
    // Keep the raw (possibly non-canonical) name for error reporting.
    regex::Regex::new(r"<skill>\s*([A-Za-z]+)\s*</skill>")
        .unwrap()
        .captures(reply)
        .map(|c| c[1].to_string())
}

/// Asks the reasoner to pick one enabled skill given the clues. A reply
/// naming a skill outside the enabled library triggers one retry with an
/// explicit constraint reminder before erroring.
pub fn select_skill(
    pixels: &Pixels,
    clues: &ClueSet,
    registry: &SkillRegistry,
    reasoner: &dyn ReasonerClient,
    templates: &TemplateStore,
) -> Result<SkillChoice> {
    let mut messages = stage1_messages(pixels, clues, registry, templates)?;
    let mut last_name = String::from("<missing>");
    for attempt in 0..2 {
        let reply = reasoner.complete(&messages)?;
        let name = extract_skill_name(&reply);
        if let Some(name) = &name {
            if let Ok(skill) = name.parse::<SkillId>() {
                if registry.is_enabled(skill) {
                    return Ok(SkillChoice {
                        skill,
                        rationale: format!("[{}] {}", STAGE1_TEMPLATE_ID, reply.trim()),
                        origin: ChoiceOrigin::Reasoner,
                    });
                }
            }
            last_name = name.clone();
        }
        if attempt == 0 {
            let enabled: Vec<&str> = registry
                .enabled()
                .iter()
                .map(|s| s.canonical_name())
                .collect();
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(format!(
                "That skill is not in the enabled library. Choose exactly one of: {}. {}",
                enabled.join(", "),
                crate::templates::SKILL_TAG_INSTRUCTION
            )));
        }
    }
    Err(Error::SkillNotInLibrary { name: last_name })
}

/// Deterministic offline router. Rules fire in fixed priority order; a rule
/// whose skill is disabled falls through to the next, and the final resort
/// is the lowest-ordinal enabled skill.
pub fn fallback_route(
    clues: &ClueSet,
    registry: &SkillRegistry,
    thresholds: &RouterThresholds,
) -> SkillChoice {
    let rules: [(bool, SkillId, &str); 4] = [
        (
            clues.text_likelihood >= thresholds.text_likelihood,
            SkillId::Ocr,
            "text-likelihood",
        ),
        (
            clues.hf_ratio >= thresholds.hf_ratio,
            SkillId::Freq,
            "hf-ratio",
        ),
        (
            clues.residual_energy >= thresholds.residual_energy,
            SkillId::Pixel,
            "residual-energy",
        ),
        (true, SkillId::Cs, "default"),
    ];
    for (fired, skill, rule) in rules {
        if fired && registry.is_enabled(skill) {
            return SkillChoice {
                skill,
                rationale: format!("[fallback] rule={rule}"),
                origin: ChoiceOrigin::Fallback,
            };
        }
    }
    let skill = registry.lowest_enabled();
    SkillChoice {
        skill,
        rationale: "[fallback] rule=lowest-ordinal".into(),
        origin: ChoiceOrigin::Fallback,
    }
}
