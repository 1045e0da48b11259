//! Predictions, accuracy/F1 scoring, and the per-skill evaluation harness.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bench::manifest::Manifest;
use crate::bench::perturb::{perturb, PerturbationSpec};
use crate::error::{Error, Result};
use crate::pixels::Pixels;
use crate::reasoner::{DetectionOutcome, Detector};
use crate::record::ImageRecord;
use crate::skill::{SkillId, SkillRegistry};
use crate::trajectory::Verdict;
use crate::transport::sha256_hex;

/// One scored record. Indeterminate predictions carry no verdict and count
/// as incorrect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub selected_skill: SkillId,
    pub indeterminate: bool,
    pub trajectory_digest: String,
}

impl PredictionRecord {
    pub fn from_outcome(id: &str, outcome: &DetectionOutcome) -> PredictionRecord {
        PredictionRecord {
            id: id.to_string(),
            verdict: Some(outcome.verdict),
            selected_skill: outcome.skill_choice.skill,
            indeterminate: false,
            trajectory_digest: sha256_hex(outcome.trajectory.raw.as_bytes()),
        }
    }

    pub fn indeterminate(id: &str, skill: SkillId, last_raw: &str) -> PredictionRecord {
        PredictionRecord {
            id: id.to_string(),
            verdict: None,
            selected_skill: skill,
            indeterminate: true,
            trajectory_digest: sha256_hex(last_raw.as_bytes()),
        }
    }
}

/// Fraction of predictions whose verdict matches the manifest label.
/// Indeterminate predictions count as incorrect. Every prediction id must
/// exist in the manifest.
pub fn accuracy(preds: &[PredictionRecord], manifest: &Manifest) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let by_id: HashMap<&str, &ImageRecord> = manifest
        .records
        .iter()
        .map(|r| (r.id.as_str(), r))
        .collect();
    let mut correct = 0usize;
    for pred in preds {
        let record = by_id
            .get(pred.id.as_str())
            .ok_or_else(|| Error::UnknownRecordId(pred.id.clone()))?;
        if pred.verdict == Some(record.label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / preds.len() as f64)
}

/// Harmonic mean of precision and recall with fake as the positive class;
/// zero when there are no true positives.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillRow {
    pub skill: SkillId,
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub routing_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub routing_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub id: String,
    pub message: String,
}

/// Per-skill metric rows plus the record-weighted overall row. Hard
/// per-record errors are collected in `errors` and excluded from the rows;
/// indeterminate predictions stay in the rows as incorrect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<String>,
    pub rows: Vec<SkillRow>,
    pub overall: OverallRow,
    pub errors: Vec<RecordFailure>,
}

struct Counts {
    n: usize,
    correct: usize,
    tp: usize,
    fp: usize,
    fn_: usize,
    routed: usize,
}

impl Counts {
    fn new() -> Counts {
        Counts {
            n: 0,
            correct: 0,
            tp: 0,
            fp: 0,
            fn_: 0,
            routed: 0,
        }
    }

    fn add(&mut self, record: &ImageRecord, pred: &PredictionRecord) {
        self.n += 1;
        if pred.verdict == Some(record.label) {
            self.correct += 1;
        }
        // Indeterminate predictions count as negative (real) calls, so a
        // fake record becomes a false negative and a real one a true
        // negative.
        let predicted_fake = pred.verdict == Some(Verdict::Fake);
        match (record.label, predicted_fake) {
            (Verdict::Fake, true) => self.tp += 1,
            (Verdict::Real, true) => self.fp += 1,
            (Verdict::Fake, false) => self.fn_ += 1,
            (Verdict::Real, false) => {}
        }
        if pred.selected_skill == record.skill {
            self.routed += 1;
        }
    }
}

/// Builds the per-skill table from scored predictions. Rows cover every
/// enabled skill in ordinal order, including empty ones.
pub fn metrics_table(
    preds: &[PredictionRecord],
    manifest: &Manifest,
    registry: &SkillRegistry,
    perturbation: Option<String>,
    errors: Vec<RecordFailure>,
) -> Result<MetricsTable> {
    let by_id: HashMap<&str, &ImageRecord> = manifest
        .records
        .iter()
        .map(|r| (r.id.as_str(), r))
        .collect();
    let mut per_skill: HashMap<SkillId, Counts> = HashMap::new();
    let mut overall = Counts::new();
    for pred in preds {
        let record = by_id
            .get(pred.id.as_str())
            .ok_or_else(|| Error::UnknownRecordId(pred.id.clone()))?;
        per_skill
            .entry(record.skill)
            .or_insert_with(Counts::new)
            .add(record, pred);
        overall.add(record, pred);
    }

    let rate = |num: usize, den: usize| {
        if den > 0 {
            num as f64 / den as f64
        } else {
            0.0
        }
    };
    let rows = registry
        .enabled()
        .iter()
        .map(|&skill| {
            let counts = per_skill.get(&skill);
            let (n, correct, tp, fp, fn_, routed) = match counts {
                Some(c) => (c.n, c.correct, c.tp, c.fp, c.fn_, c.routed),
                None => (0, 0, 0, 0, 0, 0),
            };
            SkillRow {
                skill,
                n,
                accuracy: rate(correct, n),
                f1: f1(tp, fp, fn_),
                routing_accuracy: rate(routed, n),
            }
        })
        .collect();
    Ok(MetricsTable {
        perturbation,
        rows,
        overall: OverallRow {
            n: overall.n,
            accuracy: rate(overall.correct, overall.n),
            f1: f1(overall.tp, overall.fp, overall.fn_),
            routing_accuracy: rate(overall.routed, overall.n),
        },
        errors,
    })
}

/// Runs the detector over every enabled-skill record of the manifest,
/// applying the perturbation (when given) before detection. Detections may
/// run concurrently up to `parallelism`; aggregation folds in manifest
/// order, so reports are order-stable.
pub fn evaluate(
    manifest: &Manifest,
    detector: &dyn Detector,
    perturbation: Option<&PerturbationSpec>,
    registry: &SkillRegistry,
    parallelism: usize,
) -> Result<MetricsTable> {
    let records: Vec<&ImageRecord> = manifest
        .records
        .iter()
        .filter(|r| registry.is_enabled(r.skill))
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyManifest);
    }

    let results: Vec<std::result::Result<PredictionRecord, RecordFailure>> =
        crate::par::map_limit(&records, parallelism.max(1), |record| {
            let run = || -> Result<DetectionOutcome> {
                let pixels = Pixels::decode_file(&record.path)?;
                let pixels = match perturbation {
                    Some(spec) => perturb(&pixels, spec)?,
                    None => pixels,
                };
                detector.detect_pixels(record, &pixels)
            };
            match run() {
                Ok(outcome) => Ok(PredictionRecord::from_outcome(&record.id, &outcome)),
                Err(err) => match err.root() {
                    Error::IndeterminateOutput {
                        skill, last_raw, ..
                    } => Ok(PredictionRecord::indeterminate(
                        &record.id, *skill, last_raw,
                    )),
                    _ => Err(RecordFailure {
                        id: record.id.clone(),
                        message: err.to_string(),
                    }),
                },
            }
        });

    let mut preds = Vec::new();
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok(pred) => preds.push(pred),
            Err(failure) => errors.push(failure),
        }
    }
    if preds.is_empty() && !errors.is_empty() {
        // Nothing succeeded; still emit a table so the failures surface.
        let empty = metrics_table(
            &[],
            manifest,
            registry,
            perturbation.map(|s| s.label()),
            errors,
        )?;
        return Ok(empty);
    }
    metrics_table(
        &preds,
        manifest,
        registry,
        perturbation.map(|s| s.label()),
        errors,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::manifest::ManifestHeader;
    use crate::record::Split;

    fn record(id: &str, skill: SkillId, label: Verdict) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            path: format!("{id}.png"),
            label,
            skill,
            source: "unit".into(),
            split: Split::Test,
        }
    }

    fn pred(id: &str, skill: SkillId, verdict: Option<Verdict>) -> PredictionRecord {
        PredictionRecord {
            id: id.into(),
            verdict,
            selected_skill: skill,
            indeterminate: verdict.is_none(),
            trajectory_digest: "d".into(),
        }
    }

    #[test]
    fn accuracy_counts_by_hand() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            (0..8)
                .map(|i| {
                    record(
                        &format!("r{i}"),
                        SkillId::Freq,
                        if i % 2 == 0 {
                            Verdict::Real
                        } else {
                            Verdict::Fake
                        },
                    )
                })
                .collect(),
        )
        .unwrap();
        // 6 of 8 correct: flip predictions on r0 and r1.
        let preds: Vec<PredictionRecord> = (0..8)
            .map(|i| {
                let truth = if i % 2 == 0 {
                    Verdict::Real
                } else {
                    Verdict::Fake
                };
                let verdict = if i < 2 {
                    if truth == Verdict::Real {
                        Verdict::Fake
                    } else {
                        Verdict::Real
                    }
                } else {
                    truth
                };
                pred(&format!("r{i}"), SkillId::Freq, Some(verdict))
            })
            .collect();
        assert_eq!(accuracy(&preds, &manifest).unwrap(), 0.75);
    }

    #[test]
    fn f1_hand_cases() {
        assert_eq!(f1(3, 1, 3), 0.6);
        assert_eq!(f1(10, 0, 0), 1.0);
        assert_eq!(f1(0, 5, 5), 0.0);
        assert_eq!(f1(0, 0, 0), 0.0);
    }

    #[test]
    fn unknown_prediction_id_is_rejected() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            vec![record("a", SkillId::Cs, Verdict::Real)],
        )
        .unwrap();
        let preds = vec![pred("ghost", SkillId::Cs, Some(Verdict::Real))];
        assert!(matches!(
            accuracy(&preds, &manifest),
            Err(Error::UnknownRecordId(id)) if id == "ghost"
        ));
    }

    #[test]
    fn indeterminate_counts_as_incorrect_and_negative() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            vec![
                record("a", SkillId::Cs, Verdict::Fake),
                record("b", SkillId::Cs, Verdict::Fake),
            ],
        )
        .unwrap();
        let preds = vec![
            pred("a", SkillId::Cs, Some(Verdict::Fake)),
            pred("b", SkillId::Cs, None),
        ];
        assert_eq!(accuracy(&preds, &manifest).unwrap(), 0.5);
        let registry = SkillRegistry::full();
        let table = metrics_table(&preds, &manifest, &registry, None, vec![]).unwrap();
        // One true positive, one false negative.
        assert_eq!(table.overall.f1, f1(1, 0, 1));
    }

    #[test]
    fn always_fake_detector_on_balanced_manifest() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            (0..10)
                .map(|i| {
                    record(
                        &format!("r{i}"),
                        SkillId::Freq,
                        if i < 5 { Verdict::Real } else { Verdict::Fake },
                    )
                })
                .collect(),
        )
        .unwrap();
        let preds: Vec<PredictionRecord> = (0..10)
            .map(|i| pred(&format!("r{i}"), SkillId::Freq, Some(Verdict::Fake)))
            .collect();
        assert_eq!(accuracy(&preds, &manifest).unwrap(), 0.5);
        let registry = SkillRegistry::full();
        let table = metrics_table(&preds, &manifest, &registry, None, vec![]).unwrap();
        // Precision 0.5, recall 1.0: harmonic mean 2/3.
        assert!((table.overall.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overall_accuracy_is_the_weighted_row_mean() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            vec![
                record("a", SkillId::Freq, Verdict::Fake),
                record("b", SkillId::Freq, Verdict::Real),
                record("c", SkillId::Freq, Verdict::Fake),
                record("d", SkillId::Ocr, Verdict::Fake),
            ],
        )
        .unwrap();
        let preds = vec![
            pred("a", SkillId::Freq, Some(Verdict::Fake)),
            pred("b", SkillId::Freq, Some(Verdict::Fake)),
            pred("c", SkillId::Freq, Some(Verdict::Real)),
            pred("d", SkillId::Ocr, Some(Verdict::Fake)),
        ];
        let registry = SkillRegistry::full();
        let table = metrics_table(&preds, &manifest, &registry, None, vec![]).unwrap();
        let weighted: f64 = table
            .rows
            .iter()
            .map(|row| row.accuracy * row.n as f64)
            .sum::<f64>()
            / table.overall.n as f64;
        assert!((table.overall.accuracy - weighted).abs() < 1e-12);
        assert_eq!(table.rows.len(), 12);
    }

    struct NeverDetector;

    impl Detector for NeverDetector {
        fn detect_pixels(
            &self,
            _record: &ImageRecord,
            _pixels: &Pixels,
        ) -> crate::error::Result<DetectionOutcome> {
            unreachable!("evaluate must short-circuit before detection")
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let registry = SkillRegistry::full();
        let empty = Manifest::new(ManifestHeader::default(), vec![]).unwrap();
        assert!(matches!(
            evaluate(&empty, &NeverDetector, None, &registry, 1),
            Err(Error::EmptyManifest)
        ));
        // Same when the registry subset excludes every record.
        let manifest = Manifest::new(
            ManifestHeader::default(),
            vec![record("a", SkillId::Light, Verdict::Real)],
        )
        .unwrap();
        let subset = SkillRegistry::with_subset(&["Freq"]).unwrap();
        assert!(matches!(
            evaluate(&manifest, &NeverDetector, None, &subset, 1),
            Err(Error::EmptyManifest)
        ));
    }

    #[test]
    fn routing_accuracy_tracks_selected_skill() {
        let manifest = Manifest::new(
            ManifestHeader::default(),
            vec![
                record("a", SkillId::Freq, Verdict::Fake),
                record("b", SkillId::Freq, Verdict::Fake),
            ],
        )
        .unwrap();
        let preds = vec![
            pred("a", SkillId::Freq, Some(Verdict::Fake)),
            pred("b", SkillId::Pixel, Some(Verdict::Fake)),
        ];
        let registry = SkillRegistry::full();
        let table = metrics_table(&preds, &manifest, &registry, None, vec![]).unwrap();
        assert_eq!(table.overall.routing_accuracy, 0.5);
    }
}
