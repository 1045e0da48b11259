//! End-to-end record/replay: the fixture manifest is detected once against
//! a ground-truth oracle (recording every wire interaction), then replayed
//! twice; replayed runs must agree with the labels and with each other.

use std::sync::Arc;

use fakescope::bench::{evaluate, render_report, ReportFormat};
use fakescope::reasoner::{Clients, DetectConfig, Pipeline};
use fakescope::testkit;
use fakescope::transport::ReplayStore;
use fakescope::SkillRegistry;

fn build_pipeline(
    reasoner: Arc<dyn fakescope::transport::ReasonerClient>,
    tools: Arc<dyn fakescope::transport::ToolTransport>,
) -> Pipeline {
    Pipeline::new(
        SkillRegistry::full(),
        Clients { reasoner, tools },
        DetectConfig::default(),
    )
}

#[test]
fn replayed_evaluation_is_perfect_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = testkit::build_fixture_set(dir.path()).unwrap();
    let fixture_dir = dir.path().join("fixtures");
    let processed = testkit::record_pipeline_fixtures(
        &fixtures.manifest,
        &fixture_dir,
        build_pipeline,
        &[None],
    )
    .unwrap();
    assert_eq!(processed, 24);

    let registry = SkillRegistry::full();
    let run = || {
        let store = Arc::new(ReplayStore::new(&fixture_dir));
        let pipeline = build_pipeline(store.clone(), store);
        let table = evaluate(&fixtures.manifest, &pipeline, None, &registry, 1).unwrap();
        render_report(&table, ReportFormat::Machine)
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "replay runs must be byte-identical");
    assert!(first.contains("overall n=24 accuracy=1.0000"));
    assert!(first.contains("routing=1.0000"));
    assert!(!first.contains("error id="));
}

#[test]
fn outcome_evidence_comes_from_the_selected_skills_toolchain() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = testkit::build_fixture_set(dir.path()).unwrap();
    let fixture_dir = dir.path().join("fixtures");
    testkit::record_pipeline_fixtures(&fixtures.manifest, &fixture_dir, build_pipeline, &[None])
        .unwrap();

    let store = Arc::new(ReplayStore::new(&fixture_dir));
    let pipeline = build_pipeline(store.clone(), store);
    let registry = SkillRegistry::full();
    for record in &fixtures.manifest.records {
        let outcome = pipeline.detect(record).unwrap();
        let binding = registry.binding(outcome.skill_choice.skill).unwrap();
        assert_eq!(outcome.evidence.skill, outcome.skill_choice.skill);
        for item in &outcome.evidence.items {
            assert!(
                binding.producers.contains(&item.producer),
                "{}: producer {} not bound to {}",
                record.id,
                item.producer,
                outcome.skill_choice.skill
            );
        }
        if binding.producers.is_empty() {
            assert!(outcome.evidence.items.is_empty());
        } else {
            assert!(!outcome.evidence.items.is_empty());
        }
    }
}

#[test]
fn replay_with_parallel_evaluation_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = testkit::build_fixture_set(dir.path()).unwrap();
    let fixture_dir = dir.path().join("fixtures");
    testkit::record_pipeline_fixtures(&fixtures.manifest, &fixture_dir, build_pipeline, &[None])
        .unwrap();

    let registry = SkillRegistry::full();
    let store = Arc::new(ReplayStore::new(&fixture_dir));
    let pipeline = build_pipeline(store.clone(), store);
    let serial = evaluate(&fixtures.manifest, &pipeline, None, &registry, 1).unwrap();
    let parallel = evaluate(&fixtures.manifest, &pipeline, None, &registry, 8).unwrap();
    assert_eq!(
        render_report(&serial, ReportFormat::Machine),
        render_report(&parallel, ReportFormat::Machine)
    );
}

#[test]
fn replay_without_fixtures_collects_errors_instead_of_dying() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = testkit::build_fixture_set(dir.path()).unwrap();
    let empty_fixture_dir = dir.path().join("empty");
    std::fs::create_dir_all(&empty_fixture_dir).unwrap();

    let registry = SkillRegistry::full();
    let store = Arc::new(ReplayStore::new(&empty_fixture_dir));
    let pipeline = build_pipeline(store.clone(), store);
    let table = evaluate(&fixtures.manifest, &pipeline, None, &registry, 1).unwrap();
    assert_eq!(table.errors.len(), 24);
    assert_eq!(table.overall.n, 0);
    let report = render_report(&table, ReportFormat::Machine);
    assert!(report.contains("error id="));
}

#[test]
fn subset_evaluation_only_scores_enabled_skills() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = testkit::build_fixture_set(dir.path()).unwrap();
    let fixture_dir = dir.path().join("fixtures");
    // Record with the same subset registry the replay will use: the routing
    // prompt lists the enabled skills, so the fixture keys depend on it.
    let registry = SkillRegistry::with_subset(&["Freq", "Pixel", "OCR", "Trans"]).unwrap();
    let subset_registry = registry.clone();
    let processed = testkit::record_pipeline_fixtures(
        &fixtures.manifest,
        &fixture_dir,
        move |reasoner, tools| {
            Pipeline::new(
                subset_registry.clone(),
                Clients { reasoner, tools },
                DetectConfig::default(),
            )
        },
        &[None],
    )
    .unwrap();
    // Only the 4 subset skills (8 records) route successfully.
    assert_eq!(processed, 8);

    let store = Arc::new(ReplayStore::new(&fixture_dir));
    let pipeline = Pipeline::new(
        registry.clone(),
        Clients {
            reasoner: store.clone(),
            tools: store,
        },
        DetectConfig::default(),
    );
    let table = evaluate(&fixtures.manifest, &pipeline, None, &registry, 1).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.overall.n, 8);
    assert_eq!(table.overall.accuracy, 1.0);
}
