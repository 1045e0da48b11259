//! The twelve-skill forensic taxonomy and per-skill toolchain bindings.
//!
//! Every image is analyzed through exactly one skill; each skill is bound to
//! the evidence producers and the prompt template that drive its analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Evidence-producer ids referenced by toolchain bindings.
pub mod producer {
    pub const FREQUENCY: &str = "frequency-analyzer";
    pub const PIXEL: &str = "pixel-analyzer";
    pub const VIEWS: &str = "transform-views";
    pub const OCR: &str = "ocr-client";
    pub const LIGHTING: &str = "lighting-client";
    pub const SHADOW: &str = "shadow-client";
    pub const REGION: &str = "region-client";
}

/// A forensic analysis skill. Ordinals follow the canonical listing order,
/// 0 through 11; the name/ordinal mapping is a fixed bijection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkillId {
    Light,
    Shadow,
    Phys,
    Cs,
    Func,
    Ocr,
    Human,
    Region,
    Animal,
    Freq,
    Pixel,
    Trans,
}

impl SkillId {
    /// All twelve skills in ordinal order.
    pub const ALL: [SkillId; 12] = [
        SkillId::Light,
        SkillId::Shadow,
        SkillId::Phys,
        SkillId::Cs,
        SkillId::Func,
        SkillId::Ocr,
        SkillId::Human,
        SkillId::Region,
        SkillId::Animal,
        SkillId::Freq,
        SkillId::Pixel,
        SkillId::Trans,
    ];

    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn from_ordinal(ordinal: usize) -> Option<SkillId> {
        Self::ALL.get(ordinal).copied()
    }

    /// Canonical skill name, as used in manifests, prompts, and reports.
    pub fn canonical_name(self) -> &'static str {
        match self {
            SkillId::Light => "Light",
            SkillId::Shadow => "Shadow",
            SkillId::Phys => "Phys",
            SkillId::Cs => "CS",
            SkillId::Func => "Func",
            SkillId::Ocr => "OCR",
            SkillId::Human => "Human",
            SkillId::Region => "Region",
            SkillId::Animal => "Animal",
            SkillId::Freq => "Freq",
            SkillId::Pixel => "Pixel",
            SkillId::Trans => "Trans",
        }
    }

    /// One-line functional definition, used when listing skills in prompts.
    pub fn definition(self) -> &'static str {
        match self {
            SkillId::Light => {
                "checks whether illumination direction and intensity on objects agree with the visible light sources"
            }
            SkillId::Shadow => {
                "checks whether shadows match their casting objects in direction, shape, and ground contact"
            }
            SkillId::Phys => {
                "checks whether support, gravity, reflections, and perspective in the scene are physically plausible"
            }
            SkillId::Cs => {
                "checks whether scene content and object relationships make everyday sense"
            }
            SkillId::Func => {
                "checks whether object parts and usage configurations are functionally coherent"
            }
            SkillId::Ocr => {
                "checks whether embedded text is legible, correctly spelled, and typographically consistent"
            }
            SkillId::Human => {
                "checks whether human bodies have correct counts, proportions, and joint articulation"
            }
            SkillId::Region => {
                "checks local regions for splicing seams, smearing, and texture breakdown"
            }
            SkillId::Animal => {
                "checks whether animal bodies have correct anatomy and plausible poses"
            }
            SkillId::Freq => {
                "checks the frequency spectrum for periodic peaks and unnatural energy distribution"
            }
            SkillId::Pixel => {
                "checks low-level pixel statistics and resampling residue for generator traces"
            }
            SkillId::Trans => {
                "checks whether the image stays self-consistent under rotation and color-space changes"
            }
        }
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl FromStr for SkillId {
    type Err = Error;

    /// Case-insensitive match on canonical names; anything else is rejected.
    fn from_str(name: &str) -> Result<SkillId> {
        Self::ALL
            .into_iter()
            .find(|s| s.canonical_name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownSkill(name.to_string()))
    }
}

impl Serialize for SkillId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for SkillId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        name.parse().map_err(D::Error::custom)
    }
}

/// Producers and prompt template driving one skill's analysis stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToolchainBinding {
    /// Evidence-producer ids, executed in this order. Empty for prompt-only skills.
    pub producers: Vec<String>,
    /// Analysis-stage prompt template id.
    pub template_id: String,
}

fn default_binding(skill: SkillId) -> ToolchainBinding {
    let producers: Vec<String> = match skill {
        SkillId::Ocr => vec![producer::OCR.into()],
        SkillId::Light => vec![producer::LIGHTING.into()],
        SkillId::Shadow => vec![producer::SHADOW.into()],
        SkillId::Region => vec![producer::REGION.into()],
        SkillId::Freq => vec![producer::FREQUENCY.into()],
        SkillId::Pixel => vec![producer::PIXEL.into()],
        SkillId::Trans => vec![producer::VIEWS.into()],
        // Prompt-only skills carry no producers.
        SkillId::Phys | SkillId::Cs | SkillId::Func | SkillId::Human | SkillId::Animal => vec![],
    };
    ToolchainBinding {
        producers,
        template_id: crate::templates::stage2_template_id(skill).to_string(),
    }
}

/// Default membership for the 4-skill subset: the tool-backed, cheapest skills.
pub const COMPACT_SUBSET: [&str; 4] = ["Freq", "Pixel", "OCR", "Trans"];

/// Default membership for the 8-skill subset.
pub const ADVANCED_SUBSET: [&str; 8] = [
    "Freq", "Pixel", "OCR", "Trans", "Light", "Shadow", "Region", "Human",
];

/// The set of enabled skills plus their toolchain bindings.
///
/// `enabled` is always non-empty and sorted by ordinal; every enabled skill
/// has exactly one binding.
#[derive(Clone, Debug)]
pub struct SkillRegistry {
    enabled: Vec<SkillId>,
    bindings: BTreeMap<SkillId, ToolchainBinding>,
}

impl SkillRegistry {
    /// Registry with all twelve skills enabled and default bindings.
    pub fn full() -> SkillRegistry {
        let enabled: Vec<SkillId> = SkillId::ALL.to_vec();
        let bindings = enabled.iter().map(|&s| (s, default_binding(s))).collect();
        SkillRegistry { enabled, bindings }
    }

    /// Registry restricted to the named skills, with default bindings attached.
    ///
    /// Rejects unknown names, duplicates (after case folding), and empty lists.
    pub fn with_subset<S: AsRef<str>>(names: &[S]) -> Result<SkillRegistry> {
        if names.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut enabled: Vec<SkillId> = Vec::with_capacity(names.len());
        for name in names {
            let skill: SkillId = name.as_ref().parse()?;
            if enabled.contains(&skill) {
                return Err(Error::DuplicateSkill(skill));
            }
            enabled.push(skill);
        }
        enabled.sort_by_key(|s| s.ordinal());
        let bindings = enabled.iter().map(|&s| (s, default_binding(s))).collect();
        Ok(SkillRegistry { enabled, bindings })
    }

    pub fn compact() -> SkillRegistry {
        Self::with_subset(&COMPACT_SUBSET).expect("compact subset is valid")
    }

    pub fn advanced() -> SkillRegistry {
        Self::with_subset(&ADVANCED_SUBSET).expect("advanced subset is valid")
    }

    /// Enabled skills in ordinal order.
    pub fn enabled(&self) -> &[SkillId] {
        &self.enabled
    }

    pub fn is_enabled(&self, skill: SkillId) -> bool {
        self.enabled.contains(&skill)
    }

    /// Binding for an enabled skill.
    pub fn binding(&self, skill: SkillId) -> Result<&ToolchainBinding> {
        self.bindings
            .get(&skill)
            .ok_or(Error::SkillNotEnabled(skill))
    }

    /// The enabled skill with the smallest ordinal.
    pub fn lowest_enabled(&self) -> SkillId {
        self.enabled[0]
    }
}
