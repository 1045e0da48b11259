//! Typed results from the external tool services, with wire parsing and
//! invariant validation.
//!
//! All box coordinates are relative, `[x0, y0, x1, y1]` in [0, 1] with
//! ordered corners; confidences and area fractions live in [0, 1].

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// The four externally served tool kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolKind {
    Ocr,
    Lighting,
    Shadow,
    Region,
}

impl ToolKind {
    pub const ALL: [ToolKind; 4] = [
        ToolKind::Ocr,
        ToolKind::Lighting,
        ToolKind::Shadow,
        ToolKind::Region,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToolKind::Ocr => "ocr",
            ToolKind::Lighting => "lighting",
            ToolKind::Shadow => "shadow",
            ToolKind::Region => "region",
        }
    }

    pub fn parse(name: &str) -> Option<ToolKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcrBox {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub items: Vec<OcrBox>,
}

impl OcrResult {
    /// Fraction of image area covered by the detected boxes, clamped to
    /// [0, 1]. Overlap is not deduplicated.
    pub fn area_covered(&self) -> f64 {
        let sum: f64 = self
            .items
            .iter()
            .map(|b| (b.bbox[2] - b.bbox[0]) * (b.bbox[3] - b.bbox[1]))
            .sum();
        sum.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub endpoints: [f64; 4],
    /// Radians.
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegments {
    pub segments: Vec<LineSegment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowPair {
    pub object_box: [f64; 4],
    pub shadow_box: [f64; 4],
    /// Radians.
    pub direction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowPairs {
    pub pairs: Vec<ShadowPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub area_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMasks {
    pub masks: Vec<RegionMask>,
}

/// A validated response from one tool kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolResult {
    Ocr(OcrResult),
    Lighting(LineSegments),
    Shadow(ShadowPairs),
    Region(RegionMasks),
}

fn malformed(kind: ToolKind, message: impl Into<String>) -> Error {
    Error::MalformedToolResponse {
        kind: kind.name().to_string(),
        message: message.into(),
    }
}

fn check_unit(kind: ToolKind, what: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(malformed(kind, format!("{what} {value} outside [0, 1]")));
    }
    Ok(())
}

fn check_box(kind: ToolKind, bbox: &[f64; 4]) -> Result<()> {
    for &coord in bbox {
        check_unit(kind, "box coordinate", coord)?;
    }
    if bbox[2] < bbox[0] || bbox[3] < bbox[1] {
        return Err(malformed(
            kind,
            format!("box corners out of order: {bbox:?}"),
        ));
    }
    Ok(())
}

fn check_finite(kind: ToolKind, what: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(malformed(kind, format!("{what} must be finite")));
    }
    Ok(())
}

/// Parses a raw wire body into the typed result for `kind` and validates
/// every invariant before returning.
pub fn parse_tool_response(kind: ToolKind, body: &str) -> Result<ToolResult> {
    let result = match kind {
        ToolKind::Ocr => {
            let parsed: OcrResult =
                serde_json::from_str(body).map_err(|e| malformed(kind, e.to_string()))?;
            for item in &parsed.items {
                check_box(kind, &item.bbox)?;
                check_unit(kind, "confidence", item.confidence)?;
            }
            ToolResult::Ocr(parsed)
        }
        ToolKind::Lighting => {
            let parsed: LineSegments =
                serde_json::from_str(body).map_err(|e| malformed(kind, e.to_string()))?;
            for seg in &parsed.segments {
                for &coord in &seg.endpoints {
                    check_unit(kind, "endpoint coordinate", coord)?;
                }
                check_finite(kind, "angle", seg.angle)?;
            }
            ToolResult::Lighting(parsed)
        }
        ToolKind::Shadow => {
            let parsed: ShadowPairs =
                serde_json::from_str(body).map_err(|e| malformed(kind, e.to_string()))?;
            for pair in &parsed.pairs {
                check_box(kind, &pair.object_box)?;
                check_box(kind, &pair.shadow_box)?;
                check_finite(kind, "direction", pair.direction)?;
            }
            ToolResult::Shadow(parsed)
        }
        ToolKind::Region => {
            let parsed: RegionMasks =
                serde_json::from_str(body).map_err(|e| malformed(kind, e.to_string()))?;
            for mask in &parsed.masks {
                check_box(kind, &mask.bbox)?;
                check_unit(kind, "area_fraction", mask.area_fraction)?;
            }
            ToolResult::Region(parsed)
        }
    };
    Ok(result)
}
