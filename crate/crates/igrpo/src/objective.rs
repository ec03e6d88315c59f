//! Per-token and per-group quantities of the GRPO/iGRPO objective.
//!
//! For a group of `G` completions sampled from the snapshot policy, each
//! completion carries a single group-normalized advantage shared by all its
//! tokens. Per token, the objective combines the clipped importance-weighted
//! surrogate with a non-negative KL penalty against a frozen reference
//! policy:
//!
//! ```text
//! value  = mean over groups of (1/G) Σ_j (1/|o_j|) Σ_t [ min(r·Â, clip(r, 1−ε, 1+ε)·Â) − β·(ρ − ln ρ − 1) ]
//! grad   = same sums with per-token coefficient [ 𝟙_unclipped·Â·r + β·(ρ − 1) ] · ∇ log π_θ(token | context)
//! ```
//!
//! where `r = π_θ/π_old` and `ρ = π_ref/π_θ` at the sampled token. Both are
//! computed in log space from cached sampling-time log-probabilities. With an
//! empty draft (context = the original prompt) this reduces token-for-token
//! to plain GRPO.

use crate::error::{Error, Result};
use crate::policy::{self, PolicyParams, TokenSeq, WeightMatrix};

/// Which divisor the group standard deviation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdDivisor {
    /// Divide by `G` (population). The default.
    #[default]
    Population,
    /// Divide by `G − 1` (sample), for sensitivity checks.
    Sample,
}

/// One prompt context with its sampled completion group.
///
/// `logp_old[j][t]` and `logp_ref[j][t]` are the log-probabilities of
/// `completions[j][t]` under the sampling snapshot and the frozen reference
/// policy, cached when the group was collected.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    context: TokenSeq,
    completions: Vec<TokenSeq>,
    rewards: Vec<f64>,
    advantages: Vec<f64>,
    logp_old: Vec<Vec<f64>>,
    logp_ref: Vec<Vec<f64>>,
}

impl RolloutGroup {
    /// Assembles a group, validating sizes, alignment and the zero-std
    /// advantage convention.
    pub fn new(
        context: TokenSeq,
        completions: Vec<TokenSeq>,
        rewards: Vec<f64>,
        advantages: Vec<f64>,
        logp_old: Vec<Vec<f64>>,
        logp_ref: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let g = completions.len();
        if g < 2 {
            return Err(Error::InvalidGroup(format!(
                "group needs at least 2 completions, got {g}"
            )));
        }
        if rewards.len() != g || advantages.len() != g {
            return Err(Error::InvalidGroup(format!(
                "{g} completions but {} rewards / {} advantages",
                rewards.len(),
                advantages.len()
            )));
        }
        if logp_old.len() != g || logp_ref.len() != g {
            return Err(Error::Alignment(
                "cached log-prob lists must match the completion count".into(),
            ));
        }
        for (j, completion) in completions.iter().enumerate() {
            if completion.is_empty() {
                return Err(Error::InvalidGroup(format!("completion {j} is empty")));
            }
            if logp_old[j].len() != completion.len() || logp_ref[j].len() != completion.len() {
                return Err(Error::Alignment(format!(
                    "completion {j} has {} tokens but {}/{} cached log-probs",
                    completion.len(),
                    logp_old[j].len(),
                    logp_ref[j].len()
                )));
            }
        }
        Ok(RolloutGroup {
            context,
            completions,
            rewards,
            advantages,
            logp_old,
            logp_ref,
        })
    }

    pub fn context(&self) -> &[crate::policy::Token] {
        &self.context
    }

    pub fn completions(&self) -> &[TokenSeq] {
        &self.completions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn group_size(&self) -> usize {
        self.completions.len()
    }

    pub fn logp_old(&self) -> &[Vec<f64>] {
        &self.logp_old
    }

    pub fn logp_ref(&self) -> &[Vec<f64>] {
        &self.logp_ref
    }

    /// Total generated tokens across the group.
    pub fn token_count(&self) -> usize {
        self.completions.iter().map(|c| c.len()).sum()
    }
}

/// Objective value, exact gradient, and diagnostics for one batch of groups.
#[derive(Debug, Clone)]
pub struct SurrogateReport {
    /// Estimate of the objective (higher is better; this is ascended).
    pub value: f64,
    /// Analytic gradient of `value` with respect to the policy weights.
    pub gradient: WeightMatrix,
    /// Fraction of tokens whose ratio fell on the clipped branch.
    pub clip_fraction: f64,
    /// Mean per-token KL estimate against the reference policy.
    pub mean_kl: f64,
}

/// Group-normalized advantages `(R_j − mean) / std`.
///
/// Uses the population standard deviation by default; if every reward is
/// identical (or the std is exactly zero) all advantages are zero.
pub fn normalize_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    normalize_advantages_with(rewards, StdDivisor::Population)
}

/// [`normalize_advantages`] with an explicit std divisor.
pub fn normalize_advantages_with(rewards: &[f64], divisor: StdDivisor) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::InvalidGroup(format!(
            "advantage normalization needs at least 2 rewards, got {g}"
        )));
    }
    // Exact equality check first: the mean of equal values can round, and the
    // convention demands exactly-zero advantages for a zero-spread group.
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; g]);
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let denom = match divisor {
        StdDivisor::Population => g as f64,
        StdDivisor::Sample => (g - 1) as f64,
    };
    let var = rewards.iter().map(|&r| (r - mean).powi(2)).sum::<f64>() / denom;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|&r| (r - mean) / std).collect())
}

/// Importance ratio `exp(logp_new − logp_old)`.
pub fn importance_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old).exp()
}

/// The clipped per-token surrogate `min(r·adv, clip(r, 1−ε, 1+ε)·adv)`.
pub fn clipped_term(r: f64, adv: f64, epsilon: f64) -> f64 {
    let clipped = r.clamp(1.0 - epsilon, 1.0 + epsilon);
    (r * adv).min(clipped * adv)
}

/// 1 when the token sits on the unclipped branch (its ratio still moves the
/// objective), 0 when clipping has frozen it:
///
/// ```text
/// 1  iff  (adv ≥ 0 and r ≤ 1+ε)  or  (adv < 0 and r ≥ 1−ε)
/// ```
///
/// Exact boundary ratios count as unclipped (`min` and `clip` agree there),
/// and a zero advantage is never clipped: its term vanishes either way, so
/// the indicator is purely diagnostic for that token.
pub fn clip_indicator(r: f64, adv: f64, epsilon: f64) -> f64 {
    let unclipped = if adv == 0.0 {
        true
    } else if adv > 0.0 {
        r <= 1.0 + epsilon
    } else {
        r >= 1.0 - epsilon
    };
    if unclipped {
        1.0
    } else {
        0.0
    }
}

/// Non-negative per-token KL estimate `ρ − ln ρ − 1` with
/// `ρ = exp(logp_ref − logp_theta)`.
pub fn kl_estimate(logp_ref: f64, logp_theta: f64) -> f64 {
    let log_ratio = logp_ref - logp_theta;
    log_ratio.exp() - log_ratio - 1.0
}

/// Supplies the per-token policy term of the objective, so alternative
/// group-based update rules can be slotted in behind the same pipeline.
///
/// `value` is the token's contribution to the objective; `grad_coeff` is the
/// scalar multiplying `∇ log π_θ(token | context)` in the gradient. The KL
/// penalty is handled outside the hook.
pub trait BaseUpdate {
    fn value(&self, r: f64, adv: f64, epsilon: f64) -> f64;
    fn grad_coeff(&self, r: f64, adv: f64, epsilon: f64) -> f64;
    /// Whether this token counts as clipped for diagnostics.
    fn is_clipped(&self, r: f64, adv: f64, epsilon: f64) -> bool;
}

/// The shipped update rule: PPO-style ratio clipping.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClippedSurrogate;

impl BaseUpdate for ClippedSurrogate {
    fn value(&self, r: f64, adv: f64, epsilon: f64) -> f64 {
        clipped_term(r, adv, epsilon)
    }

    fn grad_coeff(&self, r: f64, adv: f64, epsilon: f64) -> f64 {
        clip_indicator(r, adv, epsilon) * adv * r
    }

    fn is_clipped(&self, r: f64, adv: f64, epsilon: f64) -> bool {
        clip_indicator(r, adv, epsilon) == 0.0
    }
}

/// Value, analytic gradient and diagnostics of the full objective over a
/// batch of rollout groups, evaluated at `theta`.
///
/// Per-group contributions are `(1/G) Σ_j (1/|o_j|) Σ_t [·]`, then averaged
/// uniformly across groups. `clip_fraction` and `mean_kl` are uniform
/// per-token means over the whole batch. Summation order is fixed, so equal
/// inputs give bit-equal outputs.
pub fn surrogate(
    groups: &[RolloutGroup],
    theta: &PolicyParams,
    epsilon: f64,
    beta: f64,
) -> Result<SurrogateReport> {
    surrogate_with(groups, theta, epsilon, beta, &ClippedSurrogate)
}

/// [`surrogate`] with a pluggable per-token update rule.
pub fn surrogate_with<U: BaseUpdate>(
    groups: &[RolloutGroup],
    theta: &PolicyParams,
    epsilon: f64,
    beta: f64,
    update: &U,
) -> Result<SurrogateReport> {
    if groups.is_empty() {
        return Err(Error::InvalidGroup("no rollout groups".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config("epsilon", "must lie in (0, 1)"));
    }
    let mut gradient = theta.grad_buffer();
    let mut value = 0.0;
    let mut clipped_tokens = 0usize;
    let mut total_tokens = 0usize;
    let mut kl_sum = 0.0;
    let group_weight = 1.0 / groups.len() as f64;

    for group in groups {
        let g = group.group_size() as f64;
        let mut context = group.context.clone();
        let context_len = context.len();
        for (j, completion) in group.completions.iter().enumerate() {
            let adv = group.advantages[j];
            let token_weight = group_weight / (g * completion.len() as f64);
            context.truncate(context_len);
            for (t, &token) in completion.iter().enumerate() {
                let lp_theta = policy::log_prob(theta, &context, token)?;
                let lp_old = group.logp_old[j][t];
                let lp_ref = group.logp_ref[j][t];
                let r = importance_ratio(lp_theta, lp_old);
                let kl = kl_estimate(lp_ref, lp_theta);
                let rho = (lp_ref - lp_theta).exp();

                value += token_weight * (update.value(r, adv, epsilon) - beta * kl);
                let coeff = update.grad_coeff(r, adv, epsilon) + beta * (rho - 1.0);
                if coeff != 0.0 {
                    policy::accumulate_grad_log_prob(
                        theta,
                        &context,
                        token,
                        token_weight * coeff,
                        &mut gradient,
                    )?;
                }

                clipped_tokens += usize::from(update.is_clipped(r, adv, epsilon));
                kl_sum += kl;
                total_tokens += 1;
                context.push(token);
            }
        }
    }

    if !gradient.is_finite() || !value.is_finite() {
        return Err(Error::NumericalState(
            "non-finite surrogate value or gradient".into(),
        ));
    }
    Ok(SurrogateReport {
        value,
        gradient,
        clip_fraction: clipped_tokens as f64 / total_tokens as f64,
        mean_kl: kl_sum / total_tokens as f64,
    })
}
