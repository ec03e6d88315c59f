//! Two-stage rollout collection: exploratory drafts, best-draft selection,
//! prompt augmentation, and the conditioned refinement group.
//!
//! Stage 1 samples `N` drafts from the snapshot policy and keeps the
//! highest-reward one. Stage 2 appends that draft to the prompt between
//! reserved separator tokens and samples a group of `G` refinements from the
//! same snapshot; only those receive gradient. With `N = 0` the pipeline
//! degenerates to plain GRPO collection from the bare prompt, drawing from
//! the identical rng stream.
//!
//! All sampling goes through a [`Sampler`] that counts calls, so the
//! `N + G` rollout budget per prompt is checkable rather than assumed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::{normalize_advantages_with, RolloutGroup, StdDivisor};
use crate::policy::{self, PolicyParams, Token, TokenSeq, Vocabulary};

/// Counted, temperature-aware sequence sampler.
#[derive(Debug, Clone)]
pub struct Sampler {
    temperature: f64,
    max_completion_len: usize,
    calls: u64,
}

impl Sampler {
    pub fn new(temperature: f64, max_completion_len: usize) -> Result<Self> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::config("temperature", "must be positive"));
        }
        if max_completion_len == 0 {
            return Err(Error::config("max_completion_len", "must be at least 1"));
        }
        Ok(Sampler {
            temperature,
            max_completion_len,
            calls: 0,
        })
    }

    /// Draws one completion and bumps the rollout counter.
    pub fn sample<R: Rng>(
        &mut self,
        params: &PolicyParams,
        prompt: &[Token],
        rng: &mut R,
    ) -> Result<TokenSeq> {
        self.calls += 1;
        policy::sample_sequence_with_temperature(
            params,
            prompt,
            self.max_completion_len,
            self.temperature,
            rng,
        )
    }

    /// Total completions drawn through this sampler.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_completion_len(&self) -> usize {
        self.max_completion_len
    }
}

/// Stage-1 drafts with their rewards and the selected index.
#[derive(Debug, Clone)]
pub struct DraftSet {
    drafts: Vec<TokenSeq>,
    rewards: Vec<f64>,
    selected: Option<usize>,
}

impl DraftSet {
    /// Empty set for the `N = 0` (plain GRPO) path.
    pub fn empty() -> Self {
        DraftSet {
            drafts: Vec::new(),
            rewards: Vec::new(),
            selected: None,
        }
    }

    pub fn new(drafts: Vec<TokenSeq>, rewards: Vec<f64>) -> Result<Self> {
        if drafts.len() != rewards.len() {
            return Err(Error::InvalidInput(format!(
                "{} drafts but {} rewards",
                drafts.len(),
                rewards.len()
            )));
        }
        let selected = if drafts.is_empty() {
            None
        } else {
            Some(select_best_draft(&drafts, &rewards)?)
        };
        Ok(DraftSet {
            drafts,
            rewards,
            selected,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.drafts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.drafts.len()
    }

    pub fn drafts(&self) -> &[TokenSeq] {
        &self.drafts
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Index of the best draft, `None` for an empty set.
    pub fn selected(&self) -> Option<usize> {
        self.selected
    }

    pub fn best_draft(&self) -> Option<&TokenSeq> {
        self.selected.map(|i| &self.drafts[i])
    }

    pub fn best_reward(&self) -> Option<f64> {
        self.selected.map(|i| self.rewards[i])
    }
}

/// A prompt with the best draft appended between separators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedPrompt {
    tokens: TokenSeq,
    original_prompt_len: usize,
    draft_len: usize,
}

impl AugmentedPrompt {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> TokenSeq {
        self.tokens
    }

    pub fn original_prompt_len(&self) -> usize {
        self.original_prompt_len
    }

    /// Length of the (possibly truncated) draft section, separators excluded.
    pub fn draft_len(&self) -> usize {
        self.draft_len
    }
}

/// Per-prompt rollout budget: `N` Stage-1 drafts, `G` Stage-2 refinements,
/// and the baseline group size `G_grpo` the budget is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetSplit {
    pub drafts: usize,
    pub group: usize,
    pub baseline_group: usize,
}

impl BudgetSplit {
    pub fn new(drafts: usize, group: usize, baseline_group: usize) -> Result<Self> {
        if group < 2 {
            return Err(Error::config("group_size", "need at least 2 completions"));
        }
        Ok(BudgetSplit {
            drafts,
            group,
            baseline_group,
        })
    }

    /// Rollouts drawn per prompt.
    pub fn per_prompt(&self) -> usize {
        self.drafts + self.group
    }

    pub fn is_matched(&self) -> bool {
        self.per_prompt() == self.baseline_group
    }
}

/// Generation cost relative to the baseline: `(N + G) / G_grpo`.
pub fn budget_ratio(split: &BudgetSplit) -> f64 {
    debug_assert!(split.baseline_group >= 1);
    split.per_prompt() as f64 / split.baseline_group as f64
}

/// Samples `n` independent drafts from the snapshot policy.
pub fn generate_drafts<R: Rng>(
    sampler: &mut Sampler,
    params_old: &PolicyParams,
    prompt: &[Token],
    n: usize,
    rng: &mut R,
) -> Result<Vec<TokenSeq>> {
    if n == 0 {
        return Err(Error::InvalidInput("draft count must be at least 1".into()));
    }
    (0..n)
        .map(|_| sampler.sample(params_old, prompt, rng))
        .collect()
}

/// Index of the highest-reward draft; ties break toward the smallest index.
pub fn select_best_draft(drafts: &[TokenSeq], rewards: &[f64]) -> Result<usize> {
    if drafts.is_empty() || drafts.len() != rewards.len() {
        return Err(Error::InvalidInput(format!(
            "need matching non-empty drafts/rewards, got {}/{}",
            drafts.len(),
            rewards.len()
        )));
    }
    let mut best = 0;
    for (i, &r) in rewards.iter().enumerate().skip(1) {
        if r > rewards[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Builds `prompt ++ SEP_DRAFT ++ draft ++ SEP_REFINE`, truncating the tail
/// of the draft (never the prompt) to respect `max_prompt_len`.
pub fn concat_prompt(
    prompt: &[Token],
    best_draft: &[Token],
    max_prompt_len: usize,
) -> Result<AugmentedPrompt> {
    if prompt.is_empty() {
        return Err(Error::InvalidInput("cannot augment an empty prompt".into()));
    }
    let fixed = prompt.len() + 2; // both separators always survive
    if fixed > max_prompt_len {
        return Err(Error::PromptTooLong(format!(
            "prompt of {} tokens plus separators exceeds max prompt length {}",
            prompt.len(),
            max_prompt_len
        )));
    }
    let draft_len = best_draft.len().min(max_prompt_len - fixed);
    let mut tokens = Vec::with_capacity(fixed + draft_len);
    tokens.extend_from_slice(prompt);
    tokens.push(Vocabulary::SEP_DRAFT);
    tokens.extend_from_slice(&best_draft[..draft_len]);
    tokens.push(Vocabulary::SEP_REFINE);
    Ok(AugmentedPrompt {
        tokens,
        original_prompt_len: prompt.len(),
        draft_len,
    })
}

/// Knobs for collection that are fixed across a run.
#[derive(Debug, Clone, Copy)]
pub struct CollectOptions {
    pub max_prompt_len: usize,
    pub std_divisor: StdDivisor,
    /// When false, a best draft with reward exactly 0 is not appended and
    /// Stage 2 runs from the bare prompt (ablation switch).
    pub condition_on_zero_reward: bool,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            max_prompt_len: 64,
            std_divisor: StdDivisor::Population,
            condition_on_zero_reward: true,
        }
    }
}

/// Runs both stages for one prompt and returns the scored rollout group.
///
/// Draws exactly `split.drafts + split.group` completions from `sampler`, in
/// a fixed order (drafts first) from the single `rng` stream. Rewards come
/// from `reward_fn`; advantages are group-normalized; per-token
/// log-probabilities under the snapshot and the reference policy are cached
/// into the group.
#[allow(clippy::too_many_arguments)]
pub fn collect<R, F>(
    sampler: &mut Sampler,
    params_old: &PolicyParams,
    params_ref: &PolicyParams,
    prompt: &[Token],
    split: &BudgetSplit,
    reward_fn: F,
    opts: &CollectOptions,
    rng: &mut R,
) -> Result<(DraftSet, RolloutGroup)>
where
    R: Rng,
    F: Fn(&[Token]) -> f64,
{
    // Stage 1: exploratory drafts.
    let draft_set = if split.drafts == 0 {
        DraftSet::empty()
    } else {
        let drafts = generate_drafts(sampler, params_old, prompt, split.drafts, rng)?;
        let rewards: Vec<f64> = drafts.iter().map(|d| reward_fn(d)).collect();
        DraftSet::new(drafts, rewards)?
    };

    // Stage 2 context: augmented when a usable draft exists.
    let context: TokenSeq = match draft_set.best_draft() {
        Some(best)
            if opts.condition_on_zero_reward || draft_set.best_reward() != Some(0.0) =>
        {
            concat_prompt(prompt, best, opts.max_prompt_len)?.into_tokens()
        }
        _ => prompt.to_vec(),
    };

    // Stage 2: conditioned refinement group.
    let g = split.group;
    let mut completions = Vec::with_capacity(g);
    let mut rewards = Vec::with_capacity(g);
    let mut logp_old = Vec::with_capacity(g);
    let mut logp_ref = Vec::with_capacity(g);
    for _ in 0..g {
        let completion = sampler.sample(params_old, &context, rng)?;
        rewards.push(reward_fn(&completion));
        let mut ctx = context.clone();
        let mut lpo = Vec::with_capacity(completion.len());
        let mut lpr = Vec::with_capacity(completion.len());
        for &token in &completion {
            lpo.push(policy::log_prob(params_old, &ctx, token)?);
            lpr.push(policy::log_prob(params_ref, &ctx, token)?);
            ctx.push(token);
        }
        completions.push(completion);
        logp_old.push(lpo);
        logp_ref.push(lpr);
    }
    let advantages = normalize_advantages_with(&rewards, opts.std_divisor)?;
    let group = RolloutGroup::new(context, completions, rewards, advantages, logp_old, logp_ref)?;
    Ok((draft_set, group))
}
