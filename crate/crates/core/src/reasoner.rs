//! Analysis stage: skill-conditioned prompt construction, reasoning with
//! tool evidence, decision fusion, and the end-to-end detection pipeline.

use std::sync::Arc;
use std::time::Instant;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::analyzers::{run_toolchain, transform_views, AnalyzerConfig, EvidenceBundle};
use crate::error::{Error, Result};
use crate::pixels::Pixels;
use crate::record::ImageRecord;
use crate::router::{
    extract_clues, fallback_route, select_skill, ChoiceOrigin, RouterThresholds, SkillChoice,
};
use crate::skill::{SkillId, SkillRegistry};
use crate::templates::{stage2_template_id, TemplateStore, GRAMMAR_INSTRUCTION};
use crate::trajectory::{Trajectory, Verdict};
use crate::transport::{ChatMessage, ReasonerClient, ToolTransport};

/// A fully rendered analysis-stage prompt. The first attachment is always
/// the original image; derived views follow for the transformation skill.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub rendered_text: String,
    /// Base64 PNG payloads.
    pub attachments: Vec<String>,
    pub skill: SkillId,
}

/// Renders the analysis prompt for a skill: shared wrapper, the skill
/// checklist, and the evidence summary. Byte-deterministic for identical
/// inputs.
pub fn build_stage2_prompt(
    skill: SkillId,
    pixels: &Pixels,
    evidence: &EvidenceBundle,
    views: &[(String, Pixels)],
    templates: &TemplateStore,
) -> Result<PromptBundle> {
    if evidence.skill != skill {
        return Err(Error::InvalidConfig(format!(
            "evidence bundle was produced for {}, prompt requested {}",
            evidence.skill, skill
        )));
    }
    let evidence_summary = if evidence.items.is_empty() {
        None
    } else {
        Some(evidence.textual_summary.as_str())
    };
    let rendered_text = templates.render_stage2(skill, evidence_summary, !views.is_empty())?;

    let mut attachments =
        vec![base64::engine::general_purpose::STANDARD.encode(pixels.to_png_bytes()?)];
    for (_, view) in views {
        attachments.push(base64::engine::general_purpose::STANDARD.encode(view.to_png_bytes()?));
    }
    Ok(PromptBundle {
        template_id: stage2_template_id(skill).to_string(),
        rendered_text,
        attachments,
        skill,
    })
}

/// Wall-clock stage durations in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub clues_ms: f64,
    pub routing_ms: f64,
    pub toolchain_ms: f64,
    pub reasoning_ms: f64,
    pub total_ms: f64,
}

/// Everything produced for one image: the verdict, the routing decision,
/// the raw trajectory, the evidence behind it, and stage timings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub verdict: Verdict,
    pub skill_choice: SkillChoice,
    pub trajectory: Trajectory,
    pub evidence: EvidenceBundle,
    pub timings: StageTimings,
    pub used_fallback: bool,
}

/// Maps a parsed answer onto the verdict: 0 is real, 1 is fake. Evidence is
/// recorded in the outcome but never overrides the parsed answer.
pub fn fuse(trajectory: &Trajectory, evidence: &EvidenceBundle) -> Result<Verdict> {
    match trajectory.answer {
        Some(code) => Ok(Verdict::from_code(code).expect("parser admits only 0|1")),
        None => Err(Error::IndeterminateOutput {
            skill: evidence.skill,
            attempts: 1,
            last_raw: trajectory.raw.clone(),
        }),
    }
}

/// Runs the toolchain for the selected skill, prompts the reasoner with the
/// evidence, and parses the reply. A format-invalid reply is retried once
/// with an appended grammar reminder; if neither attempt yields an answer
/// digit the detection is indeterminate.
pub fn run_detection(
    pixels: &Pixels,
    skill: SkillId,
    registry: &SkillRegistry,
    reasoner: &dyn ReasonerClient,
    tools: &dyn ToolTransport,
    templates: &TemplateStore,
    config: &AnalyzerConfig,
) -> Result<(Trajectory, EvidenceBundle, StageTimings)> {
    let mut timings = StageTimings::default();

    let started = Instant::now();
    let evidence = run_toolchain(skill, pixels, registry, tools, config)?;
    let views = if skill == SkillId::Trans {
        transform_views(pixels)
    } else {
        Vec::new()
    };
    let prompt = build_stage2_prompt(skill, pixels, &evidence, &views, templates)?;
    timings.toolchain_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let mut messages = vec![ChatMessage::user_with_images(
        prompt.rendered_text.clone(),
        prompt.attachments.clone(),
    )];
    let first_reply = reasoner.complete(&messages)?;
    let first = Trajectory::parse(&first_reply);
    if first.format_valid {
        timings.reasoning_ms = started.elapsed().as_secs_f64() * 1e3;
        return Ok((first, evidence, timings));
    }

    messages.push(ChatMessage::assistant(first_reply));
    messages.push(ChatMessage::user(format!(
        "Your reply did not follow the required format. {GRAMMAR_INSTRUCTION}"
    )));
    let second_reply = reasoner.complete(&messages)?;
    let second = Trajectory::parse(&second_reply);
    timings.reasoning_ms = started.elapsed().as_secs_f64() * 1e3;

    if second.answer.is_some() {
        Ok((second, evidence, timings))
    } else if first.answer.is_some() {
        Ok((first, evidence, timings))
    } else {
        Err(Error::IndeterminateOutput {
            skill,
            attempts: 2,
            last_raw: second.raw,
        })
    }
}

/// Per-detection behavior knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Routes every image to this skill, skipping the routing stage.
    pub skill_override: Option<SkillId>,
    /// When false, the deterministic fallback router replaces the reasoner
    /// for skill selection.
    pub use_reasoner_routing: bool,
    /// Fall back to the offline router when the reasoner is unreachable
    /// during routing.
    pub fallback_on_unavailable: bool,
    /// Query the OCR tool during clue extraction.
    pub clue_ocr: bool,
    pub thresholds: RouterThresholds,
    pub analyzer: AnalyzerConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            skill_override: None,
            use_reasoner_routing: true,
            fallback_on_unavailable: true,
            clue_ocr: false,
            thresholds: RouterThresholds::default(),
            analyzer: AnalyzerConfig::default(),
        }
    }
}

/// Shared service clients.
#[derive(Clone)]
pub struct Clients {
    pub reasoner: Arc<dyn ReasonerClient>,
    pub tools: Arc<dyn ToolTransport>,
}

/// The wired two-stage detector.
pub struct Pipeline {
    pub registry: SkillRegistry,
    pub clients: Clients,
    pub config: DetectConfig,
    pub templates: TemplateStore,
}

impl Pipeline {
    pub fn new(registry: SkillRegistry, clients: Clients, config: DetectConfig) -> Pipeline {
        Pipeline {
            registry,
            clients,
            config,
            templates: TemplateStore::builtin(),
        }
    }

    /// Decodes the record's image and runs the full pipeline; every error is
    /// wrapped with the record id.
    pub fn detect(&self, record: &ImageRecord) -> Result<DetectionOutcome> {
        let pixels = Pixels::decode_file(&record.path).map_err(|e| e.for_record(&record.id))?;
        self.detect_pixels(&record.id, &pixels)
            .map_err(|e| e.for_record(&record.id))
    }

    /// Full pipeline on already-decoded pixels: clue extraction, skill
    /// routing, toolchain execution, reasoning, and fusion.
    pub fn detect_pixels(&self, image_id: &str, pixels: &Pixels) -> Result<DetectionOutcome> {
        let total_started = Instant::now();
        let mut timings = StageTimings::default();

        let started = Instant::now();
        let ocr_for_clues: Option<&dyn ToolTransport> = if self.config.clue_ocr {
            Some(self.clients.tools.as_ref())
        } else {
            None
        };
        let clues = extract_clues(pixels, image_id, ocr_for_clues, &self.config.analyzer)?;
        timings.clues_ms = started.elapsed().as_secs_f64() * 1e3;

        let started = Instant::now();
        let skill_choice = if let Some(skill) = self.config.skill_override {
            if !self.registry.is_enabled(skill) {
                return Err(Error::SkillNotEnabled(skill));
            }
            SkillChoice {
                skill,
                rationale: "[override] routing skipped".into(),
                origin: ChoiceOrigin::Fallback,
            }
        } else if !self.config.use_reasoner_routing {
            fallback_route(&clues, &self.registry, &self.config.thresholds)
        } else {
            match select_skill(
                pixels,
                &clues,
                &self.registry,
                self.clients.reasoner.as_ref(),
                &self.templates,
            ) {
                Ok(choice) => choice,
                Err(Error::ReasonerUnavailable { .. }) if self.config.fallback_on_unavailable => {
                    fallback_route(&clues, &self.registry, &self.config.thresholds)
                }
                Err(e) => return Err(e),
            }
        };
        timings.routing_ms = started.elapsed().as_secs_f64() * 1e3;

        let (trajectory, evidence, stage2) = run_detection(
            pixels,
            skill_choice.skill,
            &self.registry,
            self.clients.reasoner.as_ref(),
            self.clients.tools.as_ref(),
            &self.templates,
            &self.config.analyzer,
        )?;
        timings.toolchain_ms = stage2.toolchain_ms;
        timings.reasoning_ms = stage2.reasoning_ms;

        let verdict = fuse(&trajectory, &evidence)?;
        timings.total_ms = total_started.elapsed().as_secs_f64() * 1e3;
        let used_fallback = skill_choice.origin == ChoiceOrigin::Fallback;
        Ok(DetectionOutcome {
            verdict,
            skill_choice,
            trajectory,
            evidence,
            timings,
            used_fallback,
        })
    }
}

/// Anything that can score one record's pixels; the evaluation harness is
/// generic over this so tests can plug in scripted detectors.
pub trait Detector: Sync {
    fn detect_pixels(&self, record: &ImageRecord, pixels: &Pixels) -> Result<DetectionOutcome>;
}

impl Detector for Pipeline {
    fn detect_pixels(&self, record: &ImageRecord, pixels: &Pixels) -> Result<DetectionOutcome> {
        Pipeline::detect_pixels(self, &record.id, pixels).map_err(|e| e.for_record(&record.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzers::EvidencePayload;
    use crate::testkit;
    use crate::transport::ScriptedReasoner;

    fn pipeline_with(replies: Vec<&str>, config: DetectConfig) -> Pipeline {
        Pipeline::new(
            SkillRegistry::full(),
            Clients {
                reasoner: Arc::new(ScriptedReasoner::new(replies)),
                tools: Arc::new(testkit::canned_tools()),
            },
            config,
        )
    }

    #[test]
    fn stage2_prompt_for_lighting_carries_checklist_id() {
        let px = testkit::noise_image(16, 16, 3, 1);
        let registry = SkillRegistry::full();
        let evidence = run_toolchain(
            SkillId::Light,
            &px,
            &registry,
            &testkit::canned_tools(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let prompt = build_stage2_prompt(
            SkillId::Light,
            &px,
            &evidence,
            &[],
            &TemplateStore::builtin(),
        )
        .unwrap();
        assert!(prompt.rendered_text.contains("[light-v1]"));
        assert!(prompt.rendered_text.contains(GRAMMAR_INSTRUCTION));
        assert_eq!(prompt.attachments.len(), 1);
    }

    #[test]
    fn prompt_only_skill_prompt_has_no_evidence_section() {
        let px = testkit::noise_image(16, 16, 3, 2);
        let registry = SkillRegistry::full();
        let evidence = run_toolchain(
            SkillId::Cs,
            &px,
            &registry,
            &testkit::canned_tools(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let prompt =
            build_stage2_prompt(SkillId::Cs, &px, &evidence, &[], &TemplateStore::builtin())
                .unwrap();
        assert!(!prompt.rendered_text.contains("Tool evidence:"));
        assert_eq!(prompt.attachments.len(), 1);
    }

    #[test]
    fn trans_prompt_attaches_original_plus_four_views() {
        let px = testkit::noise_image(16, 16, 3, 3);
        let registry = SkillRegistry::full();
        let evidence = run_toolchain(
            SkillId::Trans,
            &px,
            &registry,
            &testkit::canned_tools(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let views = transform_views(&px);
        let prompt = build_stage2_prompt(
            SkillId::Trans,
            &px,
            &evidence,
            &views,
            &TemplateStore::builtin(),
        )
        .unwrap();
        assert_eq!(prompt.attachments.len(), 5);
        let original = base64::engine::general_purpose::STANDARD.encode(px.to_png_bytes().unwrap());
        assert_eq!(prompt.attachments[0], original);
    }

    #[test]
    fn prompt_bytes_are_deterministic() {
        let px = testkit::noise_image(16, 16, 3, 4);
        let registry = SkillRegistry::full();
        let evidence = run_toolchain(
            SkillId::Freq,
            &px,
            &registry,
            &testkit::canned_tools(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let a = build_stage2_prompt(
            SkillId::Freq,
            &px,
            &evidence,
            &[],
            &TemplateStore::builtin(),
        )
        .unwrap();
        let b = build_stage2_prompt(
            SkillId::Freq,
            &px,
            &evidence,
            &[],
            &TemplateStore::builtin(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fuse_is_a_bijection_on_answers() {
        let registry = SkillRegistry::full();
        let px = testkit::noise_image(16, 16, 3, 5);
        let evidence = run_toolchain(
            SkillId::Cs,
            &px,
            &registry,
            &testkit::canned_tools(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        let t1 = Trajectory::parse("<think>odd scene</think><answer>1</answer>");
        assert_eq!(fuse(&t1, &evidence).unwrap(), Verdict::Fake);
        let t0 = Trajectory::parse("<think>plausible</think><answer>0</answer>");
        assert_eq!(fuse(&t0, &evidence).unwrap(), Verdict::Real);
        let none = Trajectory::parse("<think>no digit</think>");
        assert!(matches!(
            fuse(&none, &evidence),
            Err(Error::IndeterminateOutput { .. })
        ));
    }

    #[test]
    fn run_detection_accepts_valid_first_reply() {
        let registry = SkillRegistry::full();
        let px = testkit::noise_image(16, 16, 3, 6);
        let reasoner = ScriptedReasoner::new(["<think>clean spectrum</think><answer>1</answer>"]);
        let (trajectory, evidence, _) = run_detection(
            &px,
            SkillId::Freq,
            &registry,
            &reasoner,
            &testkit::canned_tools(),
            &TemplateStore::builtin(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        assert_eq!(trajectory.answer, Some(1));
        assert!(trajectory.format_valid);
        assert_eq!(evidence.skill, SkillId::Freq);
    }

    #[test]
    fn run_detection_retries_on_invalid_format() {
        let registry = SkillRegistry::full();
        let px = testkit::noise_image(16, 16, 3, 7);
        let reasoner = ScriptedReasoner::new([
            "no blocks at all",
            "<think>second try</think><answer>0</answer>",
        ]);
        let (trajectory, _, _) = run_detection(
            &px,
            SkillId::Cs,
            &registry,
            &reasoner,
            &testkit::canned_tools(),
            &TemplateStore::builtin(),
            &AnalyzerConfig::default(),
        )
        .unwrap();
        assert!(trajectory.format_valid);
        assert_eq!(trajectory.answer, Some(0));
        assert_eq!(reasoner.remaining(), 0);
    }

    #[test]
    fn run_detection_is_indeterminate_after_two_bad_replies() {
        let registry = SkillRegistry::full();
        let px = testkit::noise_image(16, 16, 3, 8);
        let reasoner = ScriptedReasoner::new(["garbled", "still garbled"]);
        let err = run_detection(
            &px,
            SkillId::Cs,
            &registry,
            &reasoner,
            &testkit::canned_tools(),
            &TemplateStore::builtin(),
            &AnalyzerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::IndeterminateOutput { attempts: 2, .. }
        ));
    }

    #[test]
    fn detect_pixels_runs_both_stages() {
        let pipeline = pipeline_with(
            vec![
                "<skill>Freq</skill>",
                "<think>corner spike</think><answer>1</answer>",
            ],
            DetectConfig::default(),
        );
        let px = testkit::checkerboard(64, 64);
        let outcome = pipeline.detect_pixels("img", &px).unwrap();
        assert_eq!(outcome.verdict, Verdict::Fake);
        assert_eq!(outcome.skill_choice.skill, SkillId::Freq);
        assert!(!outcome.used_fallback);
        // Stage ordering: the evidence must come from the selected skill's
        // bound producer.
        assert!(outcome
            .evidence
            .items
            .iter()
            .all(|i| i.producer == "frequency-analyzer"));
        assert!(matches!(
            outcome.evidence.items[0].payload,
            EvidencePayload::Frequency(_)
        ));
    }

    #[test]
    fn skill_override_bypasses_routing() {
        let pipeline = pipeline_with(
            vec!["<think>looks resampled</think><answer>0</answer>"],
            DetectConfig {
                skill_override: Some(SkillId::Freq),
                ..DetectConfig::default()
            },
        );
        let px = testkit::noise_image(32, 32, 3, 9);
        let outcome = pipeline.detect_pixels("img", &px).unwrap();
        assert_eq!(outcome.skill_choice.skill, SkillId::Freq);
        assert_eq!(outcome.skill_choice.origin, ChoiceOrigin::Fallback);
        assert!(outcome.used_fallback);
    }

    #[test]
    fn unavailable_reasoner_falls_back_for_routing_only() {
        // Routing falls back, but the analysis stage still needs the
        // reasoner, so the error surfaces there.
        let pipeline = pipeline_with(vec![], DetectConfig::default());
        let px = testkit::noise_image(32, 32, 3, 10);
        let err = pipeline.detect_pixels("img", &px).unwrap_err();
        assert!(matches!(err, Error::ReasonerUnavailable { .. }));
    }

    #[test]
    fn routing_disabled_uses_fallback_router() {
        let pipeline = pipeline_with(
            vec!["<think>default path</think><answer>0</answer>"],
            DetectConfig {
                use_reasoner_routing: false,
                ..DetectConfig::default()
            },
        );
        let px = testkit::noise_image(32, 32, 3, 11);
        let outcome = pipeline.detect_pixels("img", &px).unwrap();
        assert!(outcome.used_fallback);
        // Uniform noise has strong residual energy, so the fallback lands on
        // Pixel (hf_ratio of noise stays below the 0.5 threshold).
        assert_eq!(outcome.skill_choice.skill, SkillId::Pixel);
    }

    #[test]
    fn detect_wraps_errors_with_record_id() {
        let pipeline = pipeline_with(vec![], DetectConfig::default());
        let record = ImageRecord {
            id: "missing-image".into(),
            path: "/nonexistent/path.png".into(),
            label: Verdict::Real,
            skill: SkillId::Cs,
            source: "t".into(),
            split: crate::record::Split::Test,
        };
        let err = pipeline.detect(&record).unwrap_err();
        assert!(err.to_string().contains("missing-image"));
    }
}
