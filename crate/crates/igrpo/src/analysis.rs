//! Closed-form best-of-N bootstrap analysis and Monte-Carlo cross-checks.
//!
//! For a binary reward and N i.i.d. drafts with per-draft success probability
//! `p`, the selected best draft succeeds with probability `1 − (1 − p)^N`,
//! which is monotonically increasing in both `p` and `N`. This module
//! evaluates that closed form, checks its monotonicity on grids, and verifies
//! it against the actual sampling stack (policy, drafts, argmax selection)
//! by Monte Carlo.

use crate::error::{Error, Result};
use crate::policy::{
    FeatureMap, FeatureOrder, PolicyParams, Token, TokenSeq, Vocabulary,
};
use crate::refine::select_best_draft;
use crate::seeding::derive_rng;

/// `1 − (1 − p)^n`: success probability of the best of `n` i.i.d. binary
/// drafts with per-draft success probability `p`.
pub fn bootstrap_probability(p: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    if n == 0 {
        return Err(Error::Domain("draft count must be at least 1".into()));
    }
    if n == 1 {
        // 1 − (1 − p) can differ from p by an ulp; the degenerate case is p itself.
        return Ok(p);
    }
    Ok(1.0 - (1.0 - p).powi(n as i32))
}

/// True iff the closed form is non-decreasing along `p_grid` for every `n`
/// and along `n_grid` for every `p > 0`. Both grids must be sorted ascending.
pub fn monotonicity_check(p_grid: &[f64], n_grid: &[u32]) -> Result<bool> {
    if p_grid.windows(2).any(|w| w[0] > w[1]) || n_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("grids must be sorted ascending".into()));
    }
    for &n in n_grid {
        let mut prev = f64::NEG_INFINITY;
        for &p in p_grid {
            let value = bootstrap_probability(p, n)?;
            if value < prev {
                return Ok(false);
            }
            prev = value;
        }
    }
    for &p in p_grid {
        let mut prev = f64::NEG_INFINITY;
        for &n in n_grid {
            let value = bootstrap_probability(p, n)?;
            if p > 0.0 && value < prev {
                return Ok(false);
            }
            prev = value;
        }
    }
    Ok(true)
}

/// Monte-Carlo comparison of the measured best-draft success rate against the
/// closed form evaluated at the measured single-draft rate.
#[derive(Debug, Clone)]
pub struct PropositionReport {
    /// Single-draft success estimate p̂.
    pub p_hat: f64,
    /// Drafts per selection.
    pub draft_count: u32,
    /// `1 − (1 − p̂)^N`.
    pub closed_form: f64,
    /// Measured mean reward of the selected best draft.
    pub mc_estimate: f64,
    /// Trials behind each estimate.
    pub mc_trials: usize,
    /// Combined standard error of `mc_estimate − closed_form` (binomial error
    /// of both estimates, the closed form's propagated through its
    /// derivative).
    pub std_error: f64,
}

impl PropositionReport {
    /// Absolute deviation in combined standard errors.
    pub fn sigmas(&self) -> f64 {
        if self.std_error == 0.0 {
            return if self.mc_estimate == self.closed_form {
                0.0
            } else {
                f64::INFINITY
            };
        }
        (self.mc_estimate - self.closed_form).abs() / self.std_error
    }
}

/// Monte-Carlo settings for [`verify_proposition`].
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub trials: usize,
    pub max_completion_len: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            trials: 100_000,
            max_completion_len: 8,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Estimates the single-draft success probability and the best-of-N success
/// rate on the real sampling stack, and reports both against the closed form.
///
/// `reward_fn` must be binary on this task. Each trial draws from its own
/// derived rng stream, so trials are order-independent.
pub fn verify_proposition<F>(
    params: &PolicyParams,
    prompt: &[Token],
    reward_fn: F,
    draft_count: u32,
    settings: &McSettings,
) -> Result<PropositionReport>
where
    F: Fn(&[Token]) -> f64,
{
    if settings.trials < 1000 {
        return Err(Error::InvalidInput(
            "need at least 1000 Monte-Carlo trials".into(),
        ));
    }
    if draft_count == 0 {
        return Err(Error::Domain("draft count must be at least 1".into()));
    }
    let trials = settings.trials;
    let n = draft_count as usize;

    // Single-draft success rate.
    let mut successes = 0usize;
    for trial in 0..trials {
        let mut rng = derive_rng(settings.seed, &[1, trial as u64]);
        let draft = crate::policy::sample_sequence_with_temperature(
            params,
            prompt,
            settings.max_completion_len,
            settings.temperature,
            &mut rng,
        )?;
        successes += usize::from(reward_fn(&draft) == 1.0);
    }
    let p_hat = successes as f64 / trials as f64;

    // Best-of-N success rate with fresh draft sets.
    let mut best_successes = 0usize;
    let mut drafts: Vec<TokenSeq> = Vec::with_capacity(n);
    let mut rewards: Vec<f64> = Vec::with_capacity(n);
    for trial in 0..trials {
        let mut rng = derive_rng(settings.seed, &[2, trial as u64]);
        drafts.clear();
        rewards.clear();
        for _ in 0..n {
            let draft = crate::policy::sample_sequence_with_temperature(
                params,
                prompt,
                settings.max_completion_len,
                settings.temperature,
                &mut rng,
            )?;
            rewards.push(reward_fn(&draft));
            drafts.push(draft);
        }
        let best = select_best_draft(&drafts, &rewards)?;
        best_successes += usize::from(rewards[best] == 1.0);
    }
    let mc_estimate = best_successes as f64 / trials as f64;

    let closed_form = bootstrap_probability(p_hat, draft_count)?;
    let se_mc = (mc_estimate * (1.0 - mc_estimate) / trials as f64).sqrt();
    let se_p = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    // d/dp [1 − (1−p)^N] = N (1−p)^{N−1}
    let derivative = draft_count as f64 * (1.0 - p_hat).powi(draft_count as i32 - 1);
    let std_error = (se_mc * se_mc + (derivative * se_p).powi(2)).sqrt();

    Ok(PropositionReport {
        p_hat,
        draft_count,
        closed_form,
        mc_estimate,
        mc_trials: trials,
        std_error,
    })
}

/// A policy with a designed single-shot success probability.
///
/// From any prompt (not itself containing `ANS`) it emits `ANS`, then
/// `answer_token` with probability `p` (otherwise a fixed wrong payload
/// token), then EOS. Useful for calibrating Monte-Carlo checks and pass@N
/// curves against a known `p`. Needs a window of at least 2: the stop rule
/// keys on the token before last.
pub fn calibrated_success_policy(
    vocab: Vocabulary,
    window: usize,
    answer_token: Token,
    p: f64,
) -> Result<PolicyParams> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    if crate::tasks::token_digit(answer_token).is_none() {
        return Err(Error::InvalidInput(
            "answer token must be a payload digit token".into(),
        ));
    }
    if window < 2 {
        return Err(Error::InvalidInput(
            "calibrated policy needs a window of at least 2".into(),
        ));
    }
    // A payload token distinct from the answer to carry the failure mass.
    let wrong_token = (Vocabulary::PAYLOAD_BASE..vocab.size() as Token)
        .find(|&t| t != answer_token)
        .expect("vocabulary has at least two payload tokens");

    let features = FeatureMap::new(vocab, window, FeatureOrder::Unary)?;
    let mut params = PolicyParams::zeroed(features);
    const BIG: f64 = 50.0;
    let v = vocab.size();

    // Columns of the slot-0 (last token) and slot-1 one-hots.
    let slot0 = |token: Token| usize::from(token);
    let slot1 = |token: Token| v + usize::from(token);

    // Any context not already inside the answer: emit the marker.
    for t in 0..v as Token {
        if t != Vocabulary::ANS {
            params
                .weights_mut()
                .set(usize::from(Vocabulary::ANS), slot0(t), BIG);
        }
    }
    // Right after the marker: answer with probability p, wrong otherwise.
    // Scores of 2·BIG beat the marker rule; the leftover mass is ~e^(-BIG).
    if p == 1.0 {
        params
            .weights_mut()
            .set(usize::from(answer_token), slot0(Vocabulary::ANS), 2.0 * BIG);
    } else if p == 0.0 {
        params
            .weights_mut()
            .set(usize::from(wrong_token), slot0(Vocabulary::ANS), 2.0 * BIG);
    } else {
        params.weights_mut().set(
            usize::from(answer_token),
            slot0(Vocabulary::ANS),
            2.0 * BIG + p.ln(),
        );
        params.weights_mut().set(
            usize::from(wrong_token),
            slot0(Vocabulary::ANS),
            2.0 * BIG + (1.0 - p).ln(),
        );
    }
    // One token after the marker: stop.
    params
        .weights_mut()
        .set(usize::from(Vocabulary::EOS), slot1(Vocabulary::ANS), 3.0 * BIG);
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{binary_reward, digit_token};
    use proptest::prelude::*;

    #[test]
    fn closed_form_reference_points() {
        assert_eq!(bootstrap_probability(0.0, 5).unwrap(), 0.0);
        assert_eq!(bootstrap_probability(1.0, 3).unwrap(), 1.0);
        assert_eq!(bootstrap_probability(0.5, 3).unwrap(), 0.875);
    }

    #[test]
    fn closed_form_n_grid_at_p02() {
        let expect = [0.2, 0.36, 0.5904, 0.83222784];
        for (&n, &e) in [1u32, 2, 4, 8].iter().zip(&expect) {
            let value = bootstrap_probability(0.2, n).unwrap();
            assert!((value - e).abs() < 1e-12, "n={n}: {value} vs {e}");
        }
        assert!(expect.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn out_of_domain_p_is_rejected() {
        assert!(matches!(
            bootstrap_probability(1.2, 2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            bootstrap_probability(-0.1, 2),
            Err(Error::Domain(_))
        ));
        assert!(bootstrap_probability(0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_bounds(p in 0.0f64..=1.0, n in 1u32..=32) {
            let value = bootstrap_probability(p, n).unwrap();
            prop_assert!(value >= p - 1e-15);
            prop_assert!(value <= (n as f64 * p).min(1.0) + 1e-12);
        }

        #[test]
        fn single_draft_is_exactly_p(p in 0.0f64..=1.0) {
            prop_assert_eq!(bootstrap_probability(p, 1).unwrap(), p);
        }
    }

    #[test]
    fn monotonicity_on_grids() {
        let p_grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert!(monotonicity_check(&p_grid, &[2]).unwrap());
        assert!(monotonicity_check(&p_grid, &[1, 2, 4, 8]).unwrap());
        // p = 0 column is constant zero, which still passes (non-decreasing).
        assert!(monotonicity_check(&[0.0], &[1, 2, 4, 8]).unwrap());
        assert!(monotonicity_check(&[0.3, 0.1], &[2]).is_err());
    }

    #[test]
    fn calibrated_policy_hits_its_target() {
        let vocab = Vocabulary::with_size(16).unwrap();
        let answer = digit_token(7);
        let params = calibrated_success_policy(vocab, 3, answer, 0.3).unwrap();
        let reward = |c: &[Token]| binary_reward(c, &[answer]);
        let mut hits = 0usize;
        let trials = 50_000;
        for t in 0..trials {
            let mut rng = derive_rng(900, &[t as u64]);
            let draft = crate::policy::sample_sequence(
                &params,
                &[Vocabulary::BOS],
                8,
                &mut rng,
            )
            .unwrap();
            assert_eq!(draft.len(), 3, "draft {draft:?}");
            hits += usize::from(reward(&draft) == 1.0);
        }
        let p_hat = hits as f64 / trials as f64;
        let se = (0.3f64 * 0.7 / trials as f64).sqrt();
        assert!((p_hat - 0.3).abs() < 3.0 * se, "p_hat {p_hat}");
    }

    #[test]
    fn degenerate_policies_give_exact_estimates() {
        let vocab = Vocabulary::with_size(16).unwrap();
        let answer = digit_token(4);
        let settings = McSettings {
            trials: 2000,
            ..Default::default()
        };
        let always = calibrated_success_policy(vocab, 2, answer, 1.0).unwrap();
        let report = verify_proposition(
            &always,
            &[Vocabulary::BOS],
            |c| binary_reward(c, &[answer]),
            3,
            &settings,
        )
        .unwrap();
        assert_eq!(report.mc_estimate, 1.0);
        assert_eq!(report.closed_form, 1.0);

        let never = calibrated_success_policy(vocab, 2, answer, 0.0).unwrap();
        let report = verify_proposition(
            &never,
            &[Vocabulary::BOS],
            |c| binary_reward(c, &[answer]),
            3,
            &settings,
        )
        .unwrap();
        assert_eq!(report.mc_estimate, 0.0);
        assert_eq!(report.closed_form, 0.0);
    }

    #[test]
    fn mid_range_probability_matches_closed_form() {
        let vocab = Vocabulary::with_size(16).unwrap();
        let answer = digit_token(2);
        let params = calibrated_success_policy(vocab, 2, answer, 0.3).unwrap();
        let settings = McSettings {
            trials: 20_000,
            seed: 17,
            ..Default::default()
        };
        let report = verify_proposition(
            &params,
            &[Vocabulary::BOS],
            |c| binary_reward(c, &[answer]),
            4,
            &settings,
        )
        .unwrap();
        // 1 − 0.7^4 = 0.7599
        assert!((report.closed_form - 0.7599).abs() < 0.02);
        assert!(report.sigmas() <= 3.0, "deviation {}σ", report.sigmas());
    }

    #[test]
    fn tiny_trial_counts_are_rejected() {
        let vocab = Vocabulary::with_size(16).unwrap();
        let params = calibrated_success_policy(vocab, 2, digit_token(1), 0.5).unwrap();
        let settings = McSettings {
            trials: 10,
            ..Default::default()
        };
        assert!(verify_proposition(&params, &[Vocabulary::BOS], |_| 0.0, 2, &settings).is_err());
    }
}
