//! Deterministic image generators, fixture manifests, and oracle clients
//! used by the test suites, the benches, and local experiments. Everything
//! here is seeded and reproducible.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::manifest::{Manifest, ManifestHeader};
use crate::error::Result;
use crate::pixels::Pixels;
use crate::record::{ImageRecord, Split};
use crate::skill::SkillId;
use crate::trajectory::{render_trajectory, Verdict};
use crate::transport::{sha256_hex, ChatMessage, ReasonerClient};

/// Period-2 checkerboard with values {0, 1}; all non-DC spectral energy
/// lands at the (W/2, H/2) bin for even dimensions.
pub fn checkerboard(width: usize, height: usize) -> Pixels {
    let data = (0..height)
        .flat_map(|y| (0..width).map(move |x| ((x + y) % 2) as f64))
        .collect();
    Pixels::new(width, height, 1, data).expect("valid checkerboard")
}

/// Smooth radial gradient peaking at the center.
pub fn radial_gradient(width: usize, height: usize) -> Pixels {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let max_r = cx.hypot(cy).max(1.0);
    let data = (0..height)
        .flat_map(|y| {
            (0..width).map(move |x| {
                let r = (x as f64 - cx).hypot(y as f64 - cy) / max_r;
                1.0 - r.min(1.0)
            })
        })
        .collect();
    Pixels::new(width, height, 1, data).expect("valid gradient")
}

/// Uniform noise in [0, 1), seeded.
pub fn noise_image(width: usize, height: usize, channels: usize, seed: u64) -> Pixels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * channels)
        .map(|_| rng.random::<f64>())
        .collect();
    Pixels::new(width, height, channels, data).expect("valid noise")
}

/// Noise quantized to multiples of 1/256. Block means of such values are
/// exact in binary floating point for small block sizes, which keeps the
/// zero-residual invariant exact for factors beyond 2.
pub fn quantized_noise_image(width: usize, height: usize, channels: usize, seed: u64) -> Pixels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * channels)
        .map(|_| rng.random_range(0..=255u32) as f64 / 256.0)
        .collect();
    Pixels::new(width, height, channels, data).expect("valid noise")
}

/// Nearest-neighbor upsample of a seeded random base image by `factor`.
pub fn nearest_upsampled(
    base_width: usize,
    base_height: usize,
    channels: usize,
    factor: usize,
    seed: u64,
) -> Pixels {
    let base = noise_image(base_width, base_height, channels, seed);
    upsample_nearest(&base, factor)
}

/// Nearest-neighbor upsample of an arbitrary base image.
pub fn upsample_nearest(base: &Pixels, factor: usize) -> Pixels {
    let (w, h, c) = (base.width(), base.height(), base.channels());
    let (ow, oh) = (w * factor, h * factor);
    let mut data = vec![0.0; ow * oh * c];
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                data[(y * ow + x) * c + ch] = base.get(x / factor, y / factor, ch);
            }
        }
    }
    Pixels::new(ow, oh, c, data).expect("valid upsample")
}

/// Photographic stand-in: smooth sky gradient, a sun disc, soft hills, and
/// mild sensor-style noise. Deterministic.
pub fn photo_fixture() -> Pixels {
    let (w, h) = (96, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let fy = y as f64 / (h - 1) as f64;
            let fx = x as f64 / (w - 1) as f64;
            // Sky fading into ground.
            let mut r = 0.35 + 0.25 * (1.0 - fy);
            let mut g = 0.45 + 0.30 * (1.0 - fy);
            let mut b = 0.65 + 0.30 * (1.0 - fy);
            // Sun disc upper right.
            let d = ((fx - 0.75) * 3.0).hypot((fy - 0.2) * 2.0);
            if d < 0.25 {
                let glow = (0.25 - d) / 0.25;
                r += 0.5 * glow;
                g += 0.45 * glow;
                b += 0.2 * glow;
            }
            // Rolling hill silhouette.
            let hill = 0.62 + 0.08 * (fx * 9.0).sin() + 0.05 * (fx * 23.0).cos();
            if fy > hill {
                r *= 0.35;
                g *= 0.5;
                b *= 0.3;
            }
            let noise = rng.random::<f64>() * 0.02;
            data.push((r + noise).clamp(0.0, 1.0));
            data.push((g + noise).clamp(0.0, 1.0));
            data.push((b + noise).clamp(0.0, 1.0));
        }
    }
    Pixels::new(w, h, 3, data).expect("valid photo fixture")
}

/// Distinct deterministic content per (skill, label) pair, 32x32 RGB.
pub fn skill_image(skill: SkillId, label: Verdict) -> Pixels {
    let seed = 1000 + skill.ordinal() as u64 * 2 + label.code() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (32, 32);
    let phase = skill.ordinal() as f64;
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / w as f64;
            let fy = y as f64 / h as f64;
            let wave = 0.5 + 0.3 * ((fx * (2.0 + phase) + fy * 3.0) * std::f64::consts::TAU).sin();
            for c in 0..3 {
                let n = rng.random::<f64>() * 0.2;
                let v = (wave * (0.6 + 0.2 * c as f64) + n).clamp(0.0, 1.0);
                data.push(v);
            }
        }
    }
    Pixels::new(w, h, 3, data).expect("valid skill image")
}

/// Canned, valid tool bodies for every tool kind.
pub fn canned_tool_bodies() -> Vec<(crate::analyzers::ToolKind, String)> {
    use crate::analyzers::ToolKind;
    vec![
        (
            ToolKind::Ocr,
            r#"{"items":[{"text":"sample","box":[0.1,0.1,0.4,0.2],"confidence":0.93}]}"#.into(),
        ),
        (
            ToolKind::Lighting,
            r#"{"segments":[{"endpoints":[0.1,0.1,0.8,0.2],"angle":0.142}]}"#.into(),
        ),
        (
            ToolKind::Shadow,
            r#"{"pairs":[{"object_box":[0.2,0.2,0.5,0.6],"shadow_box":[0.2,0.6,0.6,0.8],"direction":2.1}]}"#.into(),
        ),
        (
            ToolKind::Region,
            r#"{"masks":[{"box":[0.3,0.3,0.7,0.7],"area_fraction":0.16}]}"#.into(),
        ),
    ]
}

/// Tool transport preloaded with the canned bodies above.
pub fn canned_tools() -> crate::transport::CannedTools {
    let mut tools = crate::transport::CannedTools::new();
    for (kind, body) in canned_tool_bodies() {
        tools = tools.with(kind, body);
    }
    tools
}

/// Writes the 24-record fixture set (one real and one fake image per skill)
/// under `dir/images/` and returns the manifest. Records are train-split.
pub fn fixture_manifest(dir: &Path) -> Result<Manifest> {
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir)?;
    let mut records = Vec::new();
    for skill in SkillId::ALL {
        for label in [Verdict::Real, Verdict::Fake] {
            let id = format!("{}-{}", skill.canonical_name().to_lowercase(), label);
            let path = image_dir.join(format!("{id}.png"));
            std::fs::write(&path, skill_image(skill, label).to_png_bytes()?)?;
            records.push(ImageRecord {
                id,
                path: path.to_string_lossy().into_owned(),
                label,
                skill,
                source: "testkit".into(),
                split: Split::Train,
            });
        }
    }
    Manifest::new(
        ManifestHeader {
            name: "fixture-24".into(),
            version: "1".into(),
            created_at: "1970-01-01T00:00:00Z".into(),
        },
        records,
    )
}

/// Ground-truth reasoner keyed by the digest of the first image attachment.
///
/// Routing-stage prompts are answered with the annotated skill tag,
/// analysis-stage prompts with a grammar-valid trajectory whose answer
/// matches the authenticity label, and annotation probes with yes/no
/// according to a per-image yes-skill set. Stages are told apart by the
/// template id embedded in the rendered prompt.
#[derive(Debug, Default)]
pub struct OracleReasoner {
    by_digest: HashMap<String, (SkillId, Verdict)>,
    yes_skills: HashMap<String, Vec<SkillId>>,
}

impl OracleReasoner {
    pub fn new() -> OracleReasoner {
        OracleReasoner::default()
    }

    /// Registers the expected route/answer for an image variant.
    pub fn insert_pixels(&mut self, pixels: &Pixels, skill: SkillId, label: Verdict) -> Result<()> {
        let digest = sha256_hex(&pixels.to_png_bytes()?);
        self.by_digest.insert(digest, (skill, label));
        Ok(())
    }

    /// Registers the set of skills that answer "yes" to annotation probes
    /// for an image.
    pub fn insert_annotation(&mut self, pixels: &Pixels, yes: &[SkillId]) -> Result<()> {
        let digest = sha256_hex(&pixels.to_png_bytes()?);
        self.yes_skills.insert(digest, yes.to_vec());
        Ok(())
    }

    /// Oracle covering every record of a manifest, loading the images from
    /// their paths. Extra closures can register perturbed variants.
    pub fn for_manifest(manifest: &Manifest) -> Result<OracleReasoner> {
        let mut oracle = OracleReasoner::new();
        for record in &manifest.records {
            let pixels = Pixels::decode_file(&record.path)?;
            oracle.insert_pixels(&pixels, record.skill, record.label)?;
        }
        Ok(oracle)
    }

    fn first_attachment_digest(messages: &[ChatMessage]) -> Option<String> {
        use base64::Engine as _;
        for message in messages {
            if let Some(payload) = message.images.first() {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(payload)
                    .ok()?;
                return Some(sha256_hex(&bytes));
            }
        }
        None
    }
}

impl ReasonerClient for OracleReasoner {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let text: String = messages
            .iter()
            .map(|m| m.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let digest = Self::first_attachment_digest(messages).unwrap_or_default();

        if text.contains("[template:annotate-") {
            // Parse the probed skill out of the prompt.
            let probed = text
                .lines()
                .find_map(|l| l.strip_prefix("Skill: "))
                .and_then(|rest| rest.split_whitespace().next())
                .and_then(|name| name.parse::<SkillId>().ok());
            let yes = match (probed, self.yes_skills.get(&digest)) {
                (Some(skill), Some(set)) => set.contains(&skill),
                _ => false,
            };
            return Ok(if yes { "yes".into() } else { "no".into() });
        }

        let Some(&(skill, label)) = self.by_digest.get(&digest) else {
            return Err(crate::error::Error::ReasonerUnavailable {
                attempts: 1,
                message: format!("oracle has no entry for digest {digest}"),
            });
        };
        if text.contains("[template:stage1-") {
            Ok(format!("<skill>{}</skill>", skill.canonical_name()))
        } else {
            Ok(render_trajectory(
                None,
                "fixture-guided inspection of the flagged cues",
                label.code(),
            ))
        }
    }
}

/// Records oracle replies for a manifest into a fixture directory by
/// driving the full pipeline once. Returns the number of records processed.
pub fn record_pipeline_fixtures(
    manifest: &Manifest,
    fixture_dir: &Path,
    pipeline_builder: impl Fn(
        std::sync::Arc<dyn ReasonerClient>,
        std::sync::Arc<dyn crate::transport::ToolTransport>,
    ) -> crate::reasoner::Pipeline,
    perturbations: &[Option<crate::bench::perturb::PerturbationSpec>],
) -> Result<usize> {
    use crate::transport::{RecordingReasoner, RecordingTools};
    use std::sync::Arc;

    let mut oracle = OracleReasoner::new();
    for record in &manifest.records {
        let pixels = Pixels::decode_file(&record.path)?;
        for spec in perturbations {
            let variant = match spec {
                Some(spec) => crate::bench::perturb::perturb(&pixels, spec)?,
                None => pixels.clone(),
            };
            oracle.insert_pixels(&variant, record.skill, record.label)?;
        }
    }

    let reasoner: Arc<dyn ReasonerClient> = Arc::new(RecordingReasoner::new(oracle, fixture_dir)?);
    let tools: Arc<dyn crate::transport::ToolTransport> =
        Arc::new(RecordingTools::new(canned_tools(), fixture_dir)?);
    let pipeline = pipeline_builder(reasoner, tools);

    let mut processed = 0;
    for record in &manifest.records {
        let pixels = Pixels::decode_file(&record.path)?;
        for spec in perturbations {
            let variant = match spec {
                Some(spec) => crate::bench::perturb::perturb(&pixels, spec)?,
                None => pixels.clone(),
            };
            // Best-effort: records the pipeline cannot route (e.g. their
            // skill is outside the pipeline's registry) are skipped; their
            // wire interactions up to the failure are still persisted.
            if pipeline.detect_pixels(&record.id, &variant).is_ok() {
                processed += 1;
            }
        }
    }
    Ok(processed)
}

/// Temp-dir helper bundling a fixture manifest with its paths.
pub struct FixtureSet {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

/// Builds the 24-record fixture set under `dir` and saves the manifest to
/// `dir/manifest.jsonl`.
pub fn build_fixture_set(dir: &Path) -> Result<FixtureSet> {
    let manifest = fixture_manifest(dir)?;
    let manifest_path = dir.join("manifest.jsonl");
    manifest.save(&manifest_path)?;
    Ok(FixtureSet {
        dir: dir.to_path_buf(),
        manifest,
        manifest_path,
    })
}
