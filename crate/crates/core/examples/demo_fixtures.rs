//! Builds a self-contained replay demo: the 24-record fixture manifest
//! (one real and one fake image per skill), recorded oracle fixtures for
//! the plain and perturbed variants, and a ready-to-use replay config.
//!
//! ```sh
//! cargo run --example demo_fixtures -- /tmp/fakescope-demo
//! fakescope evaluate --manifest /tmp/fakescope-demo/manifest.jsonl \
//!     --config /tmp/fakescope-demo/replay.toml
//! ```

use std::path::PathBuf;

use fakescope::bench::PerturbationSpec;
use fakescope::reasoner::{Clients, DetectConfig, Pipeline};
use fakescope::testkit;
use fakescope::SkillRegistry;

fn main() -> fakescope::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fakescope-demo"));
    std::fs::create_dir_all(&dir)?;

    let fixtures = testkit::build_fixture_set(&dir)?;
    let fixture_dir = dir.join("fixtures");
    let specs = [
        None,
        Some(PerturbationSpec::Jpeg { quality: 85 }),
        Some(PerturbationSpec::Jpeg { quality: 70 }),
        Some(PerturbationSpec::Blur { sigma: 1.0 }),
        Some(PerturbationSpec::Blur { sigma: 2.0 }),
        Some(PerturbationSpec::Resize { scale: 0.5 }),
    ];
    let mut processed = testkit::record_pipeline_fixtures(
        &fixtures.manifest,
        &fixture_dir,
        |reasoner, tools| {
            Pipeline::new(
                SkillRegistry::full(),
                Clients { reasoner, tools },
                DetectConfig::default(),
            )
        },
        &specs,
    )?;
    // Routing prompts list the enabled skills, so subset runs need their own
    // recordings; cover the compact subset for unperturbed evaluation.
    processed += testkit::record_pipeline_fixtures(
        &fixtures.manifest,
        &fixture_dir,
        |reasoner, tools| {
            Pipeline::new(
                SkillRegistry::compact(),
                Clients { reasoner, tools },
                DetectConfig::default(),
            )
        },
        &[None],
    )?;

    let config_path = dir.join("replay.toml");
    std::fs::write(
        &config_path,
        format!(
            "[replay]\nenabled = true\nfixture_dir = {:?}\n",
            fixture_dir.to_string_lossy()
        ),
    )?;

    println!(
        "demo ready: {} detections recorded\n  manifest: {}\n  config:   {}",
        processed,
        fixtures.manifest_path.display(),
        config_path.display()
    );
    Ok(())
}
