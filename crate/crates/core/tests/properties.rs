//! Cross-module property tests: grammar round-trips, router closure,
//! analyzer identities, advantage algebra, and metric oracle equivalence.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fakescope::analyzers::{dft2, frequency_evidence, pixel_evidence, views};
use fakescope::bench::manifest::{Manifest, ManifestHeader};
use fakescope::bench::metrics::{accuracy, f1, PredictionRecord};
use fakescope::router::{fallback_route, ClueSet, RouterThresholds};
use fakescope::testkit;
use fakescope::training::{group_advantages, ADVANTAGE_EPSILON};
use fakescope::trajectory::{Trajectory, Verdict};
use fakescope::{ImageRecord, SkillId, SkillRegistry, Split};

fn arb_skill() -> impl Strategy<Value = SkillId> {
    (0usize..12).prop_map(|i| SkillId::from_ordinal(i).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Grammar round-trip: parse(render(t)) reproduces every field.
    #[test]
    fn trajectory_roundtrip(
        skill in proptest::option::of(arb_skill()),
        think in "[a-zA-Z0-9 ,.:;!?-]{1,60}",
        answer in 0u8..2,
    ) {
        let t = Trajectory::valid(skill, &think, answer);
        let back = Trajectory::parse(&t.raw);
        prop_assert_eq!(back, t);
    }

    /// Deleting any required block from a valid raw string breaks validity.
    #[test]
    fn format_valid_monotonicity(
        skill in arb_skill(),
        think in "[a-zA-Z0-9 ]{1,40}",
        answer in 0u8..2,
    ) {
        let skill_block = format!("<skill>{}</skill>", skill.canonical_name());
        let think_block = format!("<think>{think}</think>");
        let answer_block = format!("<answer>{answer}</answer>");
        let full = format!("{skill_block}{think_block}{answer_block}");
        prop_assert!(Trajectory::parse(&full).format_valid);
        let without_think = format!("{skill_block}{answer_block}");
        prop_assert!(!Trajectory::parse(&without_think).format_valid);
        let without_answer = format!("{skill_block}{think_block}");
        prop_assert!(!Trajectory::parse(&without_answer).format_valid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Router closure: the fallback choice is always an enabled skill, and
    /// the choice is a pure function of its inputs.
    #[test]
    fn fallback_route_closure(
        text in 0.0f64..1.0,
        hf in 0.0f64..1.0,
        residual in 0.0f64..0.2,
        mask in 1u16..(1 << 12),
    ) {
        let names: Vec<&str> = SkillId::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, s)| s.canonical_name())
            .collect();
        let registry = SkillRegistry::with_subset(&names).unwrap();
        let clues = ClueSet {
            hf_ratio: hf,
            residual_energy: residual,
            text_likelihood: text,
            luminance_mean: 0.5,
            luminance_var: 0.1,
            derived_from: "prop".into(),
        };
        let thresholds = RouterThresholds::default();
        let choice = fallback_route(&clues, &registry, &thresholds);
        prop_assert!(registry.is_enabled(choice.skill));
        let again = fallback_route(&clues, &registry, &thresholds);
        prop_assert_eq!(choice, again);
    }

    /// Advantages are invariant under positive affine reward maps and sum
    /// to zero.
    #[test]
    fn advantage_affine_invariance(
        rewards in proptest::collection::vec(0.0f64..4.0, 2..32),
        shift in -10.0f64..10.0,
        scale in 0.1f64..10.0,
    ) {
        let base = group_advantages(&rewards, ADVANTAGE_EPSILON).unwrap();
        let mapped: Vec<f64> = rewards.iter().map(|r| shift + scale * r).collect();
        let transformed = group_advantages(&mapped, ADVANTAGE_EPSILON).unwrap();
        let sum: f64 = base.iter().sum();
        prop_assert!(sum.abs() <= 1e-9 * rewards.len() as f64);
        // Skip the epsilon boundary: scaling can move a degenerate group
        // across the guard.
        let stats_std = {
            let n = rewards.len() as f64;
            let mean = rewards.iter().sum::<f64>() / n;
            (rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt()
        };
        if stats_std >= 1e-6 {
            for (a, b) in base.iter().zip(&transformed) {
                prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
        }
    }

    /// Zero residual on nearest-upsampled images, factors 2 and 3. Seeds are
    /// quantized to multiples of 1/256 so block means are exact in binary
    /// floating point.
    #[test]
    fn upsampled_residual_is_exactly_zero(seed in 0u64..500, factor in 2usize..4) {
        let base = testkit::quantized_noise_image(8, 8, 1, seed);
        let image = testkit::upsample_nearest(&base, factor);
        let ev = pixel_evidence(&image, factor).unwrap();
        prop_assert_eq!(ev.residual_mean, 0.0);
        prop_assert_eq!(ev.residual_max, 0.0);
    }

    /// F1 bounds and symmetry under swapping false positives with false
    /// negatives.
    #[test]
    fn f1_bounds_and_symmetry(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let value = f1(tp, fp, fn_);
        prop_assert!((0.0..=1.0).contains(&value));
        prop_assert_eq!(value, f1(tp, fn_, fp));
        if tp > 0 && fp == 0 && fn_ == 0 {
            prop_assert_eq!(value, 1.0);
        }
        if value == 1.0 {
            prop_assert!(tp > 0 && fp == 0 && fn_ == 0);
        }
    }
}

#[test]
fn parseval_holds_on_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let w = rng.random_range(8..=64);
        let h = rng.random_range(8..=64);
        let px = testkit::noise_image(w, h, 1, rng.random());
        let spectrum = dft2(&px);
        let spatial: f64 = px.luminance().iter().map(|v| v * v).sum();
        let spectral = spectrum.total_power() / (w * h) as f64;
        let rel = (spectral - spatial).abs() / spatial.max(1e-300);
        assert!(rel < 1e-6, "parseval violated at {w}x{h}: rel={rel}");
    }
}

#[test]
fn constant_images_have_zero_hf_ratio_at_every_level() {
    for level in [0.0, 0.5, 1.0] {
        let px = fakescope::Pixels::constant(32, 32, 1, level).unwrap();
        let ev = frequency_evidence(&px, 0.75).unwrap();
        assert_eq!(ev.hf_ratio, 0.0);
    }
}

#[test]
fn view_involutions() {
    for seed in 0..10 {
        let px = testkit::noise_image(9, 7, 3, seed);
        assert_eq!(views::rot180(&views::rot180(&px)), px);
        assert_eq!(views::channel_swap(&views::channel_swap(&px)), px);
    }
}

/// Independent recount of accuracy and F1 for the metric oracle check.
fn brute_force_metrics(preds: &[PredictionRecord], records: &[ImageRecord]) -> (f64, f64) {
    let mut correct = 0usize;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for pred in preds {
        let record = records.iter().find(|r| r.id == pred.id).unwrap();
        match (record.label, pred.verdict) {
            (label, Some(v)) if v == label => correct += 1,
            _ => {}
        }
        let said_fake = pred.verdict == Some(Verdict::Fake);
        match (record.label, said_fake) {
            (Verdict::Fake, true) => tp += 1,
            (Verdict::Real, true) => fp += 1,
            (Verdict::Fake, false) => fn_ += 1,
            (Verdict::Real, false) => {}
        }
    }
    let acc = correct as f64 / preds.len() as f64;
    let f1_value = if tp == 0 {
        0.0
    } else {
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / (tp + fn_) as f64;
        2.0 * p * r / (p + r)
    };
    (acc, f1_value)
}

#[test]
fn metric_oracle_equivalence_over_random_prediction_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let mut records = Vec::with_capacity(n);
        let mut preds = Vec::with_capacity(n);
        for i in 0..n {
            let label = if rng.random::<bool>() {
                Verdict::Fake
            } else {
                Verdict::Real
            };
            let skill = SkillId::from_ordinal(rng.random_range(0..12)).unwrap();
            records.push(ImageRecord {
                id: format!("r{i}"),
                path: format!("r{i}.png"),
                label,
                skill,
                source: "prop".into(),
                split: Split::Test,
            });
            let verdict = match rng.random_range(0..3) {
                0 => Some(Verdict::Real),
                1 => Some(Verdict::Fake),
                _ => None,
            };
            preds.push(PredictionRecord {
                id: format!("r{i}"),
                verdict,
                selected_skill: skill,
                indeterminate: verdict.is_none(),
                trajectory_digest: "d".into(),
            });
        }
        let manifest = Manifest::new(ManifestHeader::default(), records.clone()).unwrap();
        let (oracle_acc, oracle_f1) = brute_force_metrics(&preds, &records);
        assert_eq!(accuracy(&preds, &manifest).unwrap(), oracle_acc);
        let registry = SkillRegistry::full();
        let table =
            fakescope::bench::metrics_table(&preds, &manifest, &registry, None, vec![]).unwrap();
        assert_eq!(table.overall.f1, oracle_f1);
    }
}

#[test]
fn advantage_centering_over_ten_thousand_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let g = rng.random_range(2..=16);
        let rewards: Vec<f64> = (0..g).map(|_| rng.random_range(0..4) as f64).collect();
        let advantages = group_advantages(&rewards, ADVANTAGE_EPSILON).unwrap();
        let sum: f64 = advantages.iter().sum();
        assert!(sum.abs() <= 1e-9 * g as f64, "sum={sum} for {rewards:?}");
    }
}
