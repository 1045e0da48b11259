//! Prompt templates for the routing stage, the twelve analysis-stage
//! checklists, and the annotation query.
//!
//! Templates are plain text with named `{placeholder}` slots. Built-in
//! defaults are embedded; a template directory can override them, in which
//! case every requested id must resolve to `<dir>/<id>.txt`.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::skill::SkillId;

/// Output-grammar instruction, included verbatim in every analysis-stage
/// prompt.
pub const GRAMMAR_INSTRUCTION: &str = "Write your reasoning inside <think>...</think>, then output <answer>0</answer> if the image is real or <answer>1</answer> if the image is synthetic.";

/// Routing-stage instruction for the skill tag.
pub const SKILL_TAG_INSTRUCTION: &str =
    "Reply with exactly one tag: <skill>NAME</skill>, where NAME is one of the listed skill names.";

pub const STAGE1_TEMPLATE_ID: &str = "stage1-route-v1";
pub const ANNOTATE_TEMPLATE_ID: &str = "annotate-skill-probe-v1";

const STAGE1_TEMPLATE: &str = "[template:stage1-route-v1]\n\
You are a forensic analyst triaging an image that may be synthetic.\n\
Image id: {image_id}\n\
Perceptual clues extracted from the image:\n\
{clue_summary}\n\
Available forensic skills:\n\
{skill_list}\n\
Pick the single skill most likely to expose whether this image is synthetic.\n\
{skill_tag_instruction}\n";

const STAGE2_WRAPPER: &str = "[template:{template_id}]\n\
You are a forensic analyst deciding whether the attached image is real or synthetic.\n\
Focus skill: {skill_name} ({skill_definition}).\n\
Checklist [{checklist_id}]:\n\
{checklist}\n\
{evidence_section}{views_note}Compare the evidence against the attached original image before deciding.\n\
{grammar_instruction}\n";

const ANNOTATE_TEMPLATE: &str = "[template:annotate-skill-probe-v1]\n\
You are screening an image for one specific forensic skill.\n\
Skill: {skill_name} ({skill_definition}).\n\
Question: does this skill reveal clear, discriminative evidence that the attached image is synthetic?\n\
Answer with the single word yes or no.\n";

/// Analysis-stage template id for a skill.
pub fn stage2_template_id(skill: SkillId) -> &'static str {
    match skill {
        SkillId::Light => "stage2-light-v1",
        SkillId::Shadow => "stage2-shadow-v1",
        SkillId::Phys => "stage2-phys-v1",
        SkillId::Cs => "stage2-cs-v1",
        SkillId::Func => "stage2-func-v1",
        SkillId::Ocr => "stage2-ocr-v1",
        SkillId::Human => "stage2-human-v1",
        SkillId::Region => "stage2-region-v1",
        SkillId::Animal => "stage2-animal-v1",
        SkillId::Freq => "stage2-freq-v1",
        SkillId::Pixel => "stage2-pixel-v1",
        SkillId::Trans => "stage2-trans-v1",
    }
}

/// Checklist section id for a skill, embedded in the rendered prompt.
pub fn checklist_id(skill: SkillId) -> &'static str {
    match skill {
        SkillId::Light => "light-v1",
        SkillId::Shadow => "shadow-v1",
        SkillId::Phys => "phys-v1",
        SkillId::Cs => "cs-v1",
        SkillId::Func => "func-v1",
        SkillId::Ocr => "ocr-v1",
        SkillId::Human => "human-v1",
        SkillId::Region => "region-v1",
        SkillId::Animal => "animal-v1",
        SkillId::Freq => "freq-v1",
        SkillId::Pixel => "pixel-v1",
        SkillId::Trans => "trans-v1",
    }
}

fn checklist(skill: SkillId) -> &'static str {
    match skill {
        SkillId::Light => {
            "- Locate every light source implied by highlights and bright regions.\n\
- Check that the reported scene line directions agree with a single illumination direction.\n\
- Check that object brightness falls off consistently with distance from the light.\n\
- Flag surfaces lit from directions no source could reach."
        }
        SkillId::Shadow => {
            "- Pair each object with its shadow and compare directions across pairs.\n\
- Check shadow shape against the silhouette of the casting object.\n\
- Check contact points: attached shadows must touch their objects.\n\
- Flag objects with missing, doubled, or divergent shadows."
        }
        SkillId::Phys => {
            "- Check that objects rest on supports and nothing floats unexplained.\n\
- Check reflections and refractions for geometric consistency.\n\
- Check perspective convergence and relative object scale.\n\
- Flag any violation of everyday mechanics."
        }
        SkillId::Cs => {
            "- Check that the scene depicts a situation that can occur in the real world.\n\
- Check object co-occurrence and placement against everyday expectations.\n\
- Flag impossible combinations, counts, or interactions."
        }
        SkillId::Func => {
            "- Check that tools, devices, and structures have all functional parts.\n\
- Check that depicted usage matches how the object actually works.\n\
- Flag merged, missing, or non-operable components."
        }
        SkillId::Ocr => {
            "- Read every piece of text reported by the OCR results.\n\
- Check spelling, character shapes, and kerning for generator artifacts.\n\
- Check that text content matches its carrier object (signs, labels, screens).\n\
- Flag garbled glyphs and mid-word alphabet switches."
        }
        SkillId::Human => {
            "- Count fingers, limbs, and joints on every person.\n\
- Check proportions and articulation angles against human anatomy.\n\
- Check face symmetry, teeth, and ears.\n\
- Flag fused digits, extra limbs, and impossible poses."
        }
        SkillId::Region => {
            "- Inspect each reported region for seams, smearing, and resolution jumps.\n\
- Compare texture statistics between neighboring regions.\n\
- Flag regions whose sharpness or noise level breaks from the surroundings."
        }
        SkillId::Animal => {
            "- Count limbs, ears, and tails on every animal.\n\
- Check skeletal plausibility of the depicted pose.\n\
- Check fur, feather, or scale continuity.\n\
- Flag anatomically impossible features."
        }
        SkillId::Freq => {
            "- Inspect the reported high-frequency energy fraction and corner-bin peak.\n\
- Look for periodic spikes in the radial profile that natural images lack.\n\
- Compare overall spectral decay against the smooth falloff of camera output.\n\
- Flag grid-like periodicity typical of upsampling stacks."
        }
        SkillId::Pixel => {
            "- Inspect the reported resampling residual statistics.\n\
- A near-zero residual with high periodicity indicates synthetic upsampling.\n\
- Compare residual magnitude against sensor-noise expectations.\n\
- Flag block-aligned residue patterns."
        }
        SkillId::Trans => {
            "- Compare the original against the attached rotated and recolored views.\n\
- Check that structures remain coherent under rotation.\n\
- Check that colors remap plausibly under the channel swap.\n\
- Flag content that only looks consistent in the original orientation."
        }
    }
}

/// Substitutes `{name}` placeholders. Unknown placeholders are left as-is.
fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Resolves template text by id, with an optional directory override.
#[derive(Clone, Debug, Default)]
pub struct TemplateStore {
    override_dir: Option<PathBuf>,
}

impl TemplateStore {
    pub fn builtin() -> TemplateStore {
        TemplateStore { override_dir: None }
    }

    /// All template ids must resolve to `<dir>/<id>.txt` when a directory is
    /// set; there is no fallback to the embedded defaults.
    pub fn with_dir(dir: PathBuf) -> TemplateStore {
        TemplateStore {
            override_dir: Some(dir),
        }
    }

    fn resolve(&self, id: &str) -> Result<String> {
        if let Some(dir) = &self.override_dir {
            let path = dir.join(format!("{id}.txt"));
            return std::fs::read_to_string(&path)
                .map_err(|_| Error::TemplateMissing(id.to_string()));
        }
        if id == STAGE1_TEMPLATE_ID {
            return Ok(STAGE1_TEMPLATE.to_string());
        }
        if id == ANNOTATE_TEMPLATE_ID {
            return Ok(ANNOTATE_TEMPLATE.to_string());
        }
        if SkillId::ALL.iter().any(|&s| stage2_template_id(s) == id) {
            return Ok(STAGE2_WRAPPER.to_string());
        }
        Err(Error::TemplateMissing(id.to_string()))
    }

    /// Routing-stage prompt: the enabled skill list with one-line
    /// definitions, the clue summary, and the skill-tag instruction.
    pub fn render_stage1(
        &self,
        image_id: &str,
        clue_summary: &str,
        skills: &[SkillId],
    ) -> Result<String> {
        let mut skill_list = String::new();
        for skill in skills {
            let _ = writeln!(
                skill_list,
                "- {}: {}",
                skill.canonical_name(),
                skill.definition()
            );
        }
        let template = self.resolve(STAGE1_TEMPLATE_ID)?;
        Ok(substitute(
            &template,
            &[
                ("image_id", image_id),
                ("clue_summary", clue_summary),
                ("skill_list", skill_list.trim_end()),
                ("skill_tag_instruction", SKILL_TAG_INSTRUCTION),
            ],
        ))
    }

    /// Analysis-stage prompt: shared wrapper, the skill checklist, and the
    /// evidence summary. `None` evidence (prompt-only skills) omits the
    /// evidence section entirely; `views_attached` notes the derived views
    /// for the transformation skill.
    pub fn render_stage2(
        &self,
        skill: SkillId,
        evidence_summary: Option<&str>,
        views_attached: bool,
    ) -> Result<String> {
        let template_id = stage2_template_id(skill);
        let template = self.resolve(template_id)?;
        let views_note = if views_attached {
            "Derived views are attached after the original: rot90, rot180, grayscale, channel-swap. "
        } else {
            ""
        };
        let evidence_section = match evidence_summary {
            Some(summary) => format!("Tool evidence:\n{summary}\n"),
            None => String::new(),
        };
        Ok(substitute(
            &template,
            &[
                ("template_id", template_id),
                ("skill_name", skill.canonical_name()),
                ("skill_definition", skill.definition()),
                ("checklist_id", checklist_id(skill)),
                ("checklist", checklist(skill)),
                ("evidence_section", &evidence_section),
                ("views_note", views_note),
                ("grammar_instruction", GRAMMAR_INSTRUCTION),
            ],
        ))
    }

    /// Annotation probe: one yes/no question about one skill.
    pub fn render_annotate(&self, skill: SkillId) -> Result<String> {
        let template = self.resolve(ANNOTATE_TEMPLATE_ID)?;
        Ok(substitute(
            &template,
            &[
                ("skill_name", skill.canonical_name()),
                ("skill_definition", skill.definition()),
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage1_lists_only_enabled_skills() {
        let store = TemplateStore::builtin();
        let text = store
            .render_stage1("img-1", "hf_ratio=0.9000", &[SkillId::Freq, SkillId::Pixel])
            .unwrap();
        assert!(text.contains("- Freq:"));
        assert!(text.contains("- Pixel:"));
        assert!(!text.contains("- OCR:"));
        assert!(text.contains(SKILL_TAG_INSTRUCTION));
        assert!(text.contains("img-1"));
    }

    #[test]
    fn stage2_contains_grammar_and_checklist_id() {
        let store = TemplateStore::builtin();
        let text = store
            .render_stage2(SkillId::Light, Some("segments=3"), false)
            .unwrap();
        assert!(text.contains(GRAMMAR_INSTRUCTION));
        assert!(text.contains("[light-v1]"));
        assert!(text.contains("[template:stage2-light-v1]"));
        assert!(text.contains("segments=3"));
    }

    #[test]
    fn stage2_without_evidence_omits_the_section() {
        let store = TemplateStore::builtin();
        let text = store.render_stage2(SkillId::Cs, None, false).unwrap();
        assert!(!text.contains("Tool evidence:"));
    }

    #[test]
    fn override_dir_is_strict() {
        let dir = tempfile::tempdir().unwrap();
        let store = TemplateStore::with_dir(dir.path().to_path_buf());
        let err = store.render_stage2(SkillId::Cs, None, false).unwrap_err();
        assert!(matches!(err, Error::TemplateMissing(id) if id == "stage2-cs-v1"));

        std::fs::write(
            dir.path().join("stage2-cs-v1.txt"),
            "custom {evidence_section}",
        )
        .unwrap();
        let text = store
            .render_stage2(SkillId::Cs, Some("none"), false)
            .unwrap();
        assert_eq!(text, "custom Tool evidence:\nnone\n");
    }

    #[test]
    fn every_skill_has_a_distinct_template_and_checklist_id() {
        let mut template_ids: Vec<&str> = SkillId::ALL
            .iter()
            .map(|&s| stage2_template_id(s))
            .collect();
        template_ids.sort_unstable();
        template_ids.dedup();
        assert_eq!(template_ids.len(), 12);
        let store = TemplateStore::builtin();
        for skill in SkillId::ALL {
            let text = store.render_stage2(skill, Some("e"), false).unwrap();
            assert!(text.contains(&format!("[{}]", checklist_id(skill))));
        }
    }
}
