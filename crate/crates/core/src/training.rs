//! Desk-scale training objectives on a contextual-bandit surrogate: the
//! two-factor supervised losses, indicator reward composition, group-relative
//! advantages, and the group-normalized policy-gradient objective with an
//! analytic softmax gradient.
//!
//! The policy is a categorical table over (skill, answer) pairs per context;
//! output index `k = skill_ordinal * 2 + answer`. Sampling contract: one
//! uniform draw in [0, 1) per sample, walked through the cumulative
//! probabilities in output-index order. The only supported generator is
//! `chacha8` (ChaCha with 8 rounds), seeded from the config.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skill::SkillId;
use crate::trajectory::{render_trajectory, RewardWeights, Trajectory};

/// Advantages collapse to zero when the group reward deviation falls below
/// this guard.
pub const ADVANTAGE_EPSILON: f64 = 1e-8;

const SAMPLE_THINK: &str = "sampled rollout";

/// Categorical policy over (skill, answer) outputs, one logit row per
/// context, temperature fixed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    num_contexts: usize,
    num_skills: usize,
    /// Flat logits, `[context * outputs + k]`.
    logits: Vec<f64>,
}

impl ToyPolicy {
    /// Uniform policy (all-zero logits).
    pub fn uniform(num_contexts: usize, num_skills: usize) -> ToyPolicy {
        ToyPolicy {
            num_contexts,
            num_skills,
            logits: vec![0.0; num_contexts * num_skills * 2],
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_skills(&self) -> usize {
        self.num_skills
    }

    pub fn num_outputs(&self) -> usize {
        self.num_skills * 2
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn output_index(&self, skill: SkillId, answer: u8) -> usize {
        skill.ordinal() * 2 + answer as usize
    }

    pub fn output_from_index(&self, index: usize) -> (SkillId, u8) {
        let skill = SkillId::from_ordinal(index / 2).expect("index within skill table");
        (skill, (index % 2) as u8)
    }

    fn check_context(&self, context: usize) -> Result<()> {
        if context >= self.num_contexts {
            return Err(Error::UnknownContext(context));
        }
        Ok(())
    }

    fn row(&self, context: usize) -> &[f64] {
        let n = self.num_outputs();
        &self.logits[context * n..(context + 1) * n]
    }

    /// Log-softmax over the context's outputs.
    pub fn log_probs(&self, context: usize) -> Result<Vec<f64>> {
        self.check_context(context)?;
        let row = self.row(context);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(row.iter().map(|l| l - max - log_sum).collect())
    }

    pub fn probs(&self, context: usize) -> Result<Vec<f64>> {
        Ok(self.log_probs(context)?.iter().map(|lp| lp.exp()).collect())
    }

    /// Maps one uniform draw to an output index via the cumulative
    /// distribution in output-index order.
    pub fn sample_output(&self, context: usize, uniform: f64) -> Result<usize> {
        let probs = self.probs(context)?;
        let mut acc = 0.0;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if uniform < acc {
                return Ok(k);
            }
        }
        Ok(probs.len() - 1)
    }
}

/// One sampled output with its rendered text and reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSample {
    pub context: usize,
    pub skill: SkillId,
    pub answer: u8,
    pub raw_text: String,
    pub reward: f64,
}

/// A group of samples drawn for one context.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutGroup {
    pub context: usize,
    pub samples: Vec<RolloutSample>,
}

/// Group reward statistics: mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub std: f64,
    pub size: usize,
}

impl GroupStats {
    pub fn from_rewards(rewards: &[f64]) -> Result<GroupStats> {
        if rewards.len() < 2 {
            return Err(Error::GroupTooSmall {
                size: rewards.len(),
            });
        }
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Ok(GroupStats {
            mean,
            std: var.sqrt(),
            size: rewards.len(),
        })
    }
}

/// 1 when the raw string satisfies the full output grammar, else 0.
pub fn format_reward(raw: &str) -> f64 {
    if Trajectory::parse(raw).format_valid {
        1.0
    } else {
        0.0
    }
}

/// Composite reward: weighted indicators for answer correctness, skill
/// consistency, and format compliance. Each indicator is exactly 0 or 1.
pub fn reward(
    sample: &RolloutSample,
    gt_answer: u8,
    gt_skill: SkillId,
    weights: &RewardWeights,
) -> f64 {
    let answer_hit = if sample.answer == gt_answer { 1.0 } else { 0.0 };
    let skill_hit = if sample.skill == gt_skill { 1.0 } else { 0.0 };
    weights.answer * answer_hit
        + weights.skill * skill_hit
        + weights.format * format_reward(&sample.raw_text)
}

/// Group-normalized advantages `(R_i - mean) / std` with the population
/// standard deviation. Degenerate groups (`std < epsilon`) yield all zeros.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let stats = GroupStats::from_rewards(rewards)?;
    if stats.std < epsilon {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards
        .iter()
        .map(|r| (r - stats.mean) / stats.std)
        .collect())
}

/// Group-normalized policy-gradient loss and its analytic gradient w.r.t.
/// the logits:
///
/// ```text
/// loss = -(1/N) * sum_i A_i * log pi(o_i | c_i)
/// ```
///
/// averaged over all samples across groups. Advantages are treated as
/// constants: no gradient flows through the group statistics. For the
/// softmax parameterization the gradient at logit (c, k) is
/// `-(1/N) * sum_{i in c} A_i * (1[k = o_i] - pi(k | c))`.
pub fn grpo_loss_and_grad(policy: &ToyPolicy, groups: &[RolloutGroup]) -> Result<(f64, Vec<f64>)> {
    let outputs = policy.num_outputs();
    let total: usize = groups.iter().map(|g| g.samples.len()).sum();
    if total == 0 {
        return Err(Error::GroupTooSmall { size: 0 });
    }
    let scale = 1.0 / total as f64;

    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.logits().len()];
    for group in groups {
        policy.check_context(group.context)?;
        for sample in &group.samples {
            if sample.context != group.context {
                return Err(Error::UnknownContext(sample.context));
            }
        }
        let rewards: Vec<f64> = group.samples.iter().map(|s| s.reward).collect();
        let advantages = group_advantages(&rewards, ADVANTAGE_EPSILON)?;
        let log_probs = policy.log_probs(group.context)?;
        let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
        let row = group.context * outputs;
        for (sample, advantage) in group.samples.iter().zip(&advantages) {
            let chosen = policy.output_index(sample.skill, sample.answer);
            loss -= scale * advantage * log_probs[chosen];
            for k in 0..outputs {
                let indicator = if k == chosen { 1.0 } else { 0.0 };
                grad[row + k] -= scale * advantage * (indicator - probs[k]);
            }
        }
    }
    Ok((loss, grad))
}

/// Mean negative log-likelihood of the two-factor supervision: the skill
/// marginal first, then the answer conditional given the skill. For the
/// joint categorical parameterization the two terms sum to the joint
/// log-probability of the (skill, answer) pair.
pub fn sft_loss(policy: &ToyPolicy, examples: &[(usize, SkillId, u8)]) -> Result<f64> {
    Ok(sft_loss_and_grad(policy, examples)?.0)
}

/// Loss plus the analytic gradient `(1/N) * (pi - onehot)` per example row.
pub fn sft_loss_and_grad(
    policy: &ToyPolicy,
    examples: &[(usize, SkillId, u8)],
) -> Result<(f64, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::InvalidConfig("no supervision examples".into()));
    }
    let outputs = policy.num_outputs();
    let scale = 1.0 / examples.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.logits().len()];
    for &(context, skill, answer) in examples {
        let log_probs = policy.log_probs(context)?;
        let target = policy.output_index(skill, answer);
        // Factored form: -log P(skill) - log P(answer | skill). The skill
        // marginal sums the pair probabilities over both answers.
        let joint = log_probs[target];
        let marginal = (log_probs[target].exp() + log_probs[target ^ 1].exp()).ln();
        let conditional = joint - marginal;
        loss -= scale * (marginal + conditional);
        let row = context * outputs;
        for k in 0..outputs {
            let p = log_probs[k].exp();
            let indicator = if k == target { 1.0 } else { 0.0 };
            grad[row + k] += scale * (p - indicator);
        }
    }
    Ok((loss, grad))
}

/// Training configuration; see the module docs for the sampling contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub contexts: usize,
    pub steps: usize,
    pub group_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default = "default_generator")]
    pub generator: String,
    #[serde(default = "default_num_skills")]
    pub num_skills: usize,
}

fn default_generator() -> String {
    "chacha8".to_string()
}

fn default_num_skills() -> usize {
    12
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.contexts == 0 {
            return Err(Error::InvalidConfig("contexts must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.group_size < 2 {
            return Err(Error::InvalidConfig("group_size must be at least 2".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if self.generator != "chacha8" {
            return Err(Error::InvalidConfig(format!(
                "unsupported generator {:?} (only \"chacha8\")",
                self.generator
            )));
        }
        if self.num_skills == 0 || self.num_skills > 12 {
            return Err(Error::InvalidConfig("num_skills must lie in 1..=12".into()));
        }
        Ok(())
    }
}

/// One learning-curve row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_reward: f64,
    pub loss: f64,
}

/// Renders the learning curve as comma-separated rows.
pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step,mean_reward,loss\n");
    for point in curve {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            point.step, point.mean_reward, point.loss
        ));
    }
    out
}

/// Plain gradient descent on the group-normalized objective over a seeded
/// contextual bandit: each context gets a hidden (skill, answer) target,
/// sampled outputs are rewarded against it, and the policy follows the
/// analytic gradient. Byte-deterministic for a fixed config.
pub fn train_toy(config: &TrainConfig) -> Result<(ToyPolicy, Vec<CurvePoint>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Hidden per-context targets.
    let targets: Vec<(SkillId, u8)> = (0..config.contexts)
        .map(|_| {
            let skill = SkillId::from_ordinal(rng.random_range(0..config.num_skills))
                .expect("ordinal within table");
            let answer = rng.random_range(0..2u8);
            (skill, answer)
        })
        .collect();

    let mut policy = ToyPolicy::uniform(config.contexts, config.num_skills);
    let mut curve = Vec::with_capacity(config.steps);

    for step in 1..=config.steps {
        let mut groups = Vec::with_capacity(config.contexts);
        let mut reward_sum = 0.0;
        for (context, &(gt_skill, gt_answer)) in targets.iter().enumerate() {
            let mut samples = Vec::with_capacity(config.group_size);
            for _ in 0..config.group_size {
                let draw = rng.random::<f64>();
                let output = policy.sample_output(context, draw)?;
                let (skill, answer) = policy.output_from_index(output);
                let mut sample = RolloutSample {
                    context,
                    skill,
                    answer,
                    raw_text: render_trajectory(Some(skill), SAMPLE_THINK, answer),
                    reward: 0.0,
                };
                sample.reward = reward(&sample, gt_answer, gt_skill, &config.weights);
                reward_sum += sample.reward;
                samples.push(sample);
            }
            groups.push(RolloutGroup { context, samples });
        }

        let (loss, grad) = grpo_loss_and_grad(&policy, &groups)?;
        for (logit, g) in policy.logits_mut().iter_mut().zip(&grad) {
            *logit -= config.learning_rate * g;
        }
        curve.push(CurvePoint {
            step,
            mean_reward: reward_sum / (config.contexts * config.group_size) as f64,
            loss,
        });
    }
    Ok((policy, curve))
}
