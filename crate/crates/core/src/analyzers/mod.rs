//! Evidence producers: built-in analyzers (frequency, pixel residual,
//! transform views) plus the external tool clients, wired together by
//! per-skill toolchain bindings.

pub mod freq;
pub mod pixel;
pub mod tools;
pub mod views;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt4;
use crate::pixels::Pixels;
use crate::skill::{producer, SkillId, SkillRegistry};
use crate::transport::ToolTransport;

pub use freq::{dft2, frequency_evidence, FrequencyEvidence, Spectrum, DEFAULT_HF_CUTOFF};
pub use pixel::{pixel_evidence, PixelEvidence, DEFAULT_PIXEL_FACTOR};
pub use tools::{
    parse_tool_response, LineSegments, OcrResult, RegionMasks, ShadowPairs, ToolKind, ToolResult,
};
pub use views::{transform_views, VIEW_IDS};

/// Tunables for the built-in analyzers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub hf_cutoff: f64,
    pub pixel_factor: usize,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            hf_cutoff: DEFAULT_HF_CUTOFF,
            pixel_factor: DEFAULT_PIXEL_FACTOR,
        }
    }
}

/// One piece of evidence with the producer that made it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub producer: String,
    pub payload: EvidencePayload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidencePayload {
    Frequency(FrequencyEvidence),
    Pixel(PixelEvidence),
    Ocr(OcrResult),
    Lighting(LineSegments),
    Shadow(ShadowPairs),
    Region(RegionMasks),
    View { view_id: String },
}

/// Collected observations for one skill on one image. Items are non-empty
/// for tool-backed skills; prompt-only skills carry an empty item list and a
/// canned checklist summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub skill: SkillId,
    pub items: Vec<EvidenceItem>,
    pub textual_summary: String,
}

fn summarize_frequency(ev: &FrequencyEvidence) -> String {
    format!(
        "freq hf_ratio={} nyquist_peak={} cutoff={} profile_bins={}",
        fmt4(ev.hf_ratio),
        fmt4(ev.nyquist_peak),
        fmt4(ev.cutoff),
        ev.radial_profile.len()
    )
}

fn summarize_pixel(ev: &PixelEvidence) -> String {
    format!(
        "pixel factor={} residual_mean={} residual_var={} residual_max={} periodicity={}",
        ev.factor,
        fmt4(ev.residual_mean),
        fmt4(ev.residual_var),
        fmt4(ev.residual_max),
        fmt4(ev.periodicity_score)
    )
}

fn summarize_ocr(ev: &OcrResult) -> String {
    let texts: Vec<&str> = ev.items.iter().map(|b| b.text.as_str()).collect();
    format!(
        "ocr boxes={} area={} texts=[{}]",
        ev.items.len(),
        fmt4(ev.area_covered()),
        texts.join(", ")
    )
}

fn summarize_lighting(ev: &LineSegments) -> String {
    let mean_angle = if ev.segments.is_empty() {
        0.0
    } else {
        ev.segments.iter().map(|s| s.angle).sum::<f64>() / ev.segments.len() as f64
    };
    format!(
        "lighting segments={} mean_angle={}",
        ev.segments.len(),
        fmt4(mean_angle)
    )
}

fn summarize_shadow(ev: &ShadowPairs) -> String {
    let mean_dir = if ev.pairs.is_empty() {
        0.0
    } else {
        ev.pairs.iter().map(|p| p.direction).sum::<f64>() / ev.pairs.len() as f64
    };
    format!(
        "shadow pairs={} mean_direction={}",
        ev.pairs.len(),
        fmt4(mean_dir)
    )
}

fn summarize_region(ev: &RegionMasks) -> String {
    let area: f64 = ev.masks.iter().map(|m| m.area_fraction).sum();
    format!(
        "region masks={} area_total={}",
        ev.masks.len(),
        fmt4(area.clamp(0.0, 1.0))
    )
}

fn producer_error(skill: SkillId, producer_id: &str, source: Error) -> Error {
    Error::Producer {
        skill,
        producer: producer_id.to_string(),
        source: Box::new(source),
    }
}

/// Calls a tool service for the given image and validates the typed result.
pub fn call_tool(
    transport: &dyn ToolTransport,
    kind: ToolKind,
    pixels: &Pixels,
) -> Result<ToolResult> {
    let png = pixels.to_png_bytes()?;
    let body = transport.call(kind, &png)?;
    parse_tool_response(kind, &body)
}

/// Executes the producers bound to `skill`, in declared order, and renders
/// the deterministic textual summary (fixed field order, four fractional
/// digits, round-half-even).
pub fn run_toolchain(
    skill: SkillId,
    pixels: &Pixels,
    registry: &SkillRegistry,
    transport: &dyn ToolTransport,
    config: &AnalyzerConfig,
) -> Result<EvidenceBundle> {
    let binding = registry.binding(skill)?;
    if binding.producers.is_empty() {
        return Ok(EvidenceBundle {
            skill,
            items: Vec::new(),
            textual_summary: format!("checklist:{}", skill.canonical_name()),
        });
    }

    let mut items = Vec::new();
    let mut parts = Vec::new();
    for producer_id in &binding.producers {
        match producer_id.as_str() {
            producer::FREQUENCY => {
                let ev = frequency_evidence(pixels, config.hf_cutoff)
                    .map_err(|e| producer_error(skill, producer_id, e))?;
                parts.push(summarize_frequency(&ev));
                items.push(EvidenceItem {
                    producer: producer_id.clone(),
                    payload: EvidencePayload::Frequency(ev),
                });
            }
            producer::PIXEL => {
                let ev = pixel_evidence(pixels, config.pixel_factor)
                    .map_err(|e| producer_error(skill, producer_id, e))?;
                parts.push(summarize_pixel(&ev));
                items.push(EvidenceItem {
                    producer: producer_id.clone(),
                    payload: EvidencePayload::Pixel(ev),
                });
            }
            producer::VIEWS => {
                let views = transform_views(pixels);
                parts.push(format!(
                    "views {}",
                    views
                        .iter()
                        .map(|(id, _)| id.as_str())
                        .collect::<Vec<_>>()
                        .join(",")
                ));
                for (view_id, _) in views {
                    items.push(EvidenceItem {
                        producer: producer_id.clone(),
                        payload: EvidencePayload::View { view_id },
                    });
                }
            }
            producer::OCR | producer::LIGHTING | producer::SHADOW | producer::REGION => {
                let kind = match producer_id.as_str() {
                    producer::OCR => ToolKind::Ocr,
                    producer::LIGHTING => ToolKind::Lighting,
                    producer::SHADOW => ToolKind::Shadow,
                    _ => ToolKind::Region,
                };
                let result = call_tool(transport, kind, pixels)
                    .map_err(|e| producer_error(skill, producer_id, e))?;
                let (part, payload) = match result {
                    ToolResult::Ocr(ev) => (summarize_ocr(&ev), EvidencePayload::Ocr(ev)),
                    ToolResult::Lighting(ev) => {
                        (summarize_lighting(&ev), EvidencePayload::Lighting(ev))
                    }
                    ToolResult::Shadow(ev) => (summarize_shadow(&ev), EvidencePayload::Shadow(ev)),
                    ToolResult::Region(ev) => (summarize_region(&ev), EvidencePayload::Region(ev)),
                };
                parts.push(part);
                items.push(EvidenceItem {
                    producer: producer_id.clone(),
                    payload,
                });
            }
            other => {
                return Err(producer_error(
                    skill,
                    other,
                    Error::InvalidConfig(format!("unknown producer id {other:?}")),
                ));
            }
        }
    }

    Ok(EvidenceBundle {
        skill,
        items,
        textual_summary: parts.join("; "),
    })
}
