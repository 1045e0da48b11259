//! Command implementations: client wiring from the config plus thin
//! wrappers over the library operations.

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use fakescope::analyzers::ToolKind;
use fakescope::bench::{
    annotate, evaluate, few_shot_sample, load_candidates, rejects_report, render_report, Manifest,
    ManifestHeader, PerturbationSpec, ReportFormat,
};
use fakescope::reasoner::{Clients, DetectConfig, Pipeline};
use fakescope::templates::TemplateStore;
use fakescope::training::{curve_to_csv, train_toy, TrainConfig};
use fakescope::transport::{
    HttpReasoner, HttpTools, ReasonerClient, RecordingReasoner, RecordingTools, ReplayStore,
    ToolTransport, Unreachable,
};
use fakescope::{Error, Pixels, SkillId, SkillRegistry};

use crate::config::Config;

const PERTURB_USAGE: &str =
    "usage: --perturb jpeg:<quality 1-100> | blur:<sigma> | resize:<scale> (repeatable)";

/// Exit code for indeterminate verdicts; operational errors exit 1.
pub const EXIT_INDETERMINATE: u8 = 2;

fn tool_endpoints(config: &Config) -> Vec<(ToolKind, String)> {
    config
        .tools
        .endpoints
        .iter()
        .filter_map(|(name, url)| ToolKind::parse(name).map(|kind| (kind, url.clone())))
        .collect()
}

/// Wires service clients from the config: replay fixtures, live HTTP, or
/// unreachable stubs, with optional recording.
pub fn build_clients(config: &Config) -> Result<Clients> {
    if config.replay.enabled {
        let store = Arc::new(ReplayStore::new(config.fixture_dir()));
        return Ok(Clients {
            reasoner: store.clone(),
            tools: store,
        });
    }

    let reasoner: Arc<dyn ReasonerClient> = if config.reasoner.endpoint.is_empty() {
        Arc::new(Unreachable)
    } else {
        let api_key = std::env::var(&config.reasoner.credential_env).ok();
        Arc::new(HttpReasoner::new(
            config.reasoner.endpoint.clone(),
            config.reasoner.model.clone(),
            config.reasoner.temperature,
            config.reasoner_timeout(),
            config.reasoner.retries,
            api_key,
        )?)
    };
    let tools: Arc<dyn ToolTransport> = if config.tools.endpoints.is_empty() {
        Arc::new(Unreachable)
    } else {
        Arc::new(HttpTools::new(
            tool_endpoints(config).into_iter().collect(),
            config.tools_timeout(),
            config.tools.retries,
        )?)
    };

    if config.replay.record {
        let dir = config.fixture_dir();
        return Ok(Clients {
            reasoner: Arc::new(RecordingReasoner::new(reasoner, &dir)?),
            tools: Arc::new(RecordingTools::new(tools, &dir)?),
        });
    }
    Ok(Clients { reasoner, tools })
}

fn detect_config(config: &Config, skill_override: Option<SkillId>) -> DetectConfig {
    DetectConfig {
        skill_override,
        use_reasoner_routing: config.router.use_reasoner,
        fallback_on_unavailable: config.router.fallback_on_unavailable,
        clue_ocr: config.router.clue_ocr,
        thresholds: config.thresholds(),
        analyzer: config.analyzer_config(),
    }
}

pub fn build_pipeline(
    config: &Config,
    registry: SkillRegistry,
    skill_override: Option<SkillId>,
) -> Result<Pipeline> {
    Ok(Pipeline::new(
        registry,
        build_clients(config)?,
        detect_config(config, skill_override),
    ))
}

fn registry_from(config: &Config, skills_flag: Option<&str>) -> Result<SkillRegistry> {
    match skills_flag {
        Some(list) => {
            let names: Vec<&str> = list.split(',').map(str::trim).collect();
            Ok(SkillRegistry::with_subset(&names)?)
        }
        None => config.registry(),
    }
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_detect(
    config: &Config,
    image: &Path,
    skill: Option<&str>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let skill_override = match skill {
        Some(name) => Some(name.parse::<SkillId>()?),
        None => None,
    };
    let registry = config.registry()?;
    let pipeline = build_pipeline(config, registry, skill_override)?;
    let pixels =
        Pixels::decode_file(image).with_context(|| format!("reading image {}", image.display()))?;
    let image_id = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());

    match pipeline.detect_pixels(&image_id, &pixels) {
        Ok(outcome) => {
            let doc = serde_json::to_string_pretty(&outcome)?;
            write_or_print(&format!("{doc}\n"), out)?;
            if out.is_some() {
                println!("verdict: {}", outcome.verdict);
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            if matches!(err.root(), Error::IndeterminateOutput { .. }) {
                eprintln!("indeterminate: {err}");
                Ok(ExitCode::from(EXIT_INDETERMINATE))
            } else {
                Err(err.into())
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    config: &Config,
    manifest_path: &Path,
    perturb_specs: &[String],
    skills: Option<&str>,
    format: &str,
    out: Option<&Path>,
    parallelism: Option<usize>,
) -> Result<ExitCode> {
    let format = ReportFormat::parse(format)
        .with_context(|| format!("unknown report format {format:?} (machine|markdown)"))?;
    let mut specs: Vec<Option<PerturbationSpec>> = Vec::new();
    if perturb_specs.is_empty() {
        specs.push(None);
    }
    for text in perturb_specs {
        let spec =
            PerturbationSpec::parse(text).map_err(|e| anyhow::anyhow!("{e}\n{PERTURB_USAGE}"))?;
        specs.push(Some(spec));
    }

    let registry = registry_from(config, skills)?;
    let manifest = Manifest::load(manifest_path)?;
    let pipeline = build_pipeline(config, registry.clone(), None)?;
    let parallelism = parallelism.unwrap_or(config.pipeline.parallelism).max(1);

    let mut rendered = String::new();
    for spec in &specs {
        let table = evaluate(&manifest, &pipeline, spec.as_ref(), &registry, parallelism)?;
        rendered.push_str(&render_report(&table, format));
    }
    write_or_print(&rendered, out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_annotate(
    config: &Config,
    candidates_path: &Path,
    out: &Path,
    repeats: usize,
) -> Result<ExitCode> {
    let candidates = load_candidates(candidates_path)?;
    let registry = config.registry()?;
    let clients = build_clients(config)?;
    let outcome = annotate(
        &candidates,
        &registry,
        clients.reasoner.as_ref(),
        &TemplateStore::builtin(),
        repeats,
    )?;
    let manifest = Manifest::new(
        ManifestHeader {
            name: "annotated".into(),
            version: "1".into(),
            created_at: "1970-01-01T00:00:00Z".into(),
        },
        outcome.records,
    )?;
    manifest.save(out)?;
    let rejects_path = out.with_extension("rejects");
    std::fs::write(&rejects_path, rejects_report(&outcome.rejects))?;
    eprintln!(
        "retained {} record(s), rejected {} (see {})",
        manifest.records.len(),
        outcome.rejects.len(),
        rejects_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_train_toy(train_config_path: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let text = std::fs::read_to_string(train_config_path)
        .with_context(|| format!("reading training config {}", train_config_path.display()))?;
    let config: TrainConfig = toml::from_str(&text)
        .with_context(|| format!("parsing training config {}", train_config_path.display()))?;
    let (_, curve) = train_toy(&config)?;
    let csv = curve_to_csv(&curve);
    write_or_print(&csv, out)?;
    if let Some(last) = curve.last() {
        eprintln!(
            "trained {} step(s); final mean reward {:.4}",
            last.step, last.mean_reward
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_fewshot(
    manifest_path: &Path,
    n_per_skill: usize,
    seed: u64,
    out: &Path,
) -> Result<ExitCode> {
    let manifest = Manifest::load(manifest_path)?;
    let (sampled, warnings) = few_shot_sample(&manifest, n_per_skill, seed)?;
    sampled.save(out)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    eprintln!("sampled {} record(s)", sampled.records.len());
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_record(config: &Config, kind: &str, image: &Path) -> Result<ExitCode> {
    if config.replay.enabled || !config.replay.record {
        bail!("recording disabled (requires replay.record = true and a fixture_dir, without replay.enabled)");
    }
    let kind = ToolKind::parse(kind)
        .with_context(|| format!("unknown tool kind {kind:?} (ocr|lighting|shadow|region)"))?;
    let clients = build_clients(config)?;
    let pixels =
        Pixels::decode_file(image).with_context(|| format!("reading image {}", image.display()))?;
    let png = pixels.to_png_bytes()?;
    clients.tools.call(kind, &png)?;
    println!(
        "recorded {}",
        fakescope::transport::tool_request_key(kind, &png)
    );
    Ok(ExitCode::SUCCESS)
}
