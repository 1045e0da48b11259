//! Benchmark harness: manifests, annotation, metrics, perturbations, and
//! report emission.

pub mod annotate;
pub mod manifest;
pub mod metrics;
pub mod perturb;
pub mod report;

pub use annotate::{
    annotate, load_candidates, rejects_report, AnnotateOutcome, Candidate, RejectEntry,
};
pub use manifest::{few_shot_sample, Manifest, ManifestHeader};
pub use metrics::{accuracy, evaluate, f1, metrics_table, MetricsTable, PredictionRecord};
pub use perturb::{perturb, psnr, PerturbationSpec};
pub use report::{emit_report, render_report, ReportFormat};
