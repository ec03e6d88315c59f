//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them on success).
//!
//! The criteria cover: exactness of the objective's gradient against finite
//! differences, the advantage and KL-estimator contracts, Monte-Carlo
//! verification of the best-of-N bootstrap closed form, rollout-budget
//! accounting, bitwise GRPO/iGRPO reduction, end-to-end learning, the
//! matched-budget mode comparison, entropy instrumentation, pass@N
//! monotonicity, and byte-level determinism of machine outputs.

use std::time::Instant;

use rand::Rng;

use igrpo::analysis::{calibrated_success_policy, verify_proposition, McSettings};
use igrpo::metrics::{self, ExportFormat};
use igrpo::objective::{self, normalize_advantages, RolloutGroup};
use igrpo::policy::{self, FeatureMap, FeatureOrder, PolicyParams, Token, Vocabulary};
use igrpo::refine::{budget_ratio, BudgetSplit};
use igrpo::seeding::derive_rng;
use igrpo::tasks::{binary_reward, digit_token, RewardKind, TaskKind};
use igrpo::trainer::{evaluate, train, Mode, TrainerConfig};

fn verdict(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:>2} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity
// ---------------------------------------------------------------------------

fn random_params(vocab_size: usize, k: usize, scale: f64, seed: u64) -> PolicyParams {
    let vocab = Vocabulary::with_size(vocab_size).unwrap();
    let features = FeatureMap::new(vocab, k, FeatureOrder::Unary).unwrap();
    let mut params = PolicyParams::zeroed(features);
    let mut rng = derive_rng(seed, &[vocab_size as u64, k as u64]);
    for x in params.weights_mut().as_mut_slice() {
        *x = rng.gen_range(-scale..scale);
    }
    params
}

/// Samples a rollout group from `old`, caching exact log-probs.
fn sample_group(
    old: &PolicyParams,
    reference: &PolicyParams,
    context: &[Token],
    rewards: Vec<f64>,
    max_len: usize,
    seed: u64,
) -> RolloutGroup {
    let mut rng = derive_rng(seed, &[]);
    let g = rewards.len();
    let mut completions = Vec::with_capacity(g);
    let mut logp_old = Vec::with_capacity(g);
    let mut logp_ref = Vec::with_capacity(g);
    for _ in 0..g {
        let completion = policy::sample_sequence(old, context, max_len, &mut rng).unwrap();
        let mut ctx = context.to_vec();
        let mut lpo = Vec::new();
        let mut lpr = Vec::new();
        for &tok in &completion {
            lpo.push(policy::log_prob(old, &ctx, tok).unwrap());
            lpr.push(policy::log_prob(reference, &ctx, tok).unwrap());
            ctx.push(tok);
        }
        completions.push(completion);
        logp_old.push(lpo);
        logp_ref.push(lpr);
    }
    let advantages = normalize_advantages(&rewards).unwrap();
    RolloutGroup::new(context.to_vec(), completions, rewards, advantages, logp_old, logp_ref)
        .unwrap()
}

/// True when every token's ratio keeps `margin` clear of both clip edges.
fn boundary_screened(group: &RolloutGroup, theta: &PolicyParams, eps: f64, margin: f64) -> bool {
    for (j, completion) in group.completions().iter().enumerate() {
        let mut ctx = group.context().to_vec();
        for (t, &tok) in completion.iter().enumerate() {
            let lp = policy::log_prob(theta, &ctx, tok).unwrap();
            let r = (lp - group.logp_old()[j][t]).exp();
            if (r - (1.0 - eps)).abs() < margin || (r - (1.0 + eps)).abs() < margin {
                return false;
            }
            ctx.push(tok);
        }
    }
    true
}

#[test]
fn criterion_01_gradient_fidelity() {
    let started = Instant::now();
    let epsilon = 0.2;
    let step = 1e-5;
    let mut checked = 0u32;
    let mut worst: f64 = 0.0;
    let mut seed = 0u64;
    while checked < 50 {
        seed += 1;
        let mut rng = derive_rng(4000, &[seed]);
        let vocab_size = rng.gen_range(6..=8);
        let k = rng.gen_range(1..=3);
        let beta = if rng.gen_bool(0.5) { 0.0 } else { 0.01 };
        let g = if rng.gen_bool(0.5) { 2 } else { 4 };
        let theta = random_params(vocab_size, k, 0.6, seed * 5 + 1);
        let old = random_params(vocab_size, k, 0.6, seed * 5 + 2);
        let reference = random_params(vocab_size, k, 0.4, seed * 5 + 3);
        let context = vec![Vocabulary::BOS, 5];
        let rewards: Vec<f64> = (0..g).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        if beta == 0.0 && rewards.iter().all(|&r| r == rewards[0]) {
            continue; // identically-zero gradient, nothing to compare
        }
        let group = sample_group(&old, &reference, &context, rewards, 4, seed * 5 + 4);
        if !boundary_screened(&group, &theta, epsilon, 1e-3) {
            continue;
        }
        let groups = vec![group];
        let report = objective::surrogate(&groups, &theta, epsilon, beta).unwrap();
        let mut probe = theta.clone();
        let mut fd_norm = 0.0;
        let mut diff_norm = 0.0;
        for r in 0..report.gradient.rows() {
            for c in 0..report.gradient.cols() {
                let orig = probe.weights().get(r, c);
                probe.weights_mut().set(r, c, orig + step);
                let up = objective::surrogate(&groups, &probe, epsilon, beta).unwrap().value;
                probe.weights_mut().set(r, c, orig - step);
                let down = objective::surrogate(&groups, &probe, epsilon, beta).unwrap().value;
                probe.weights_mut().set(r, c, orig);
                let fd = (up - down) / (2.0 * step);
                fd_norm += fd * fd;
                diff_norm += (fd - report.gradient.get(r, c)).powi(2);
            }
        }
        let rel = diff_norm.sqrt() / fd_norm.sqrt().max(1e-12);
        worst = worst.max(rel);
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient fidelity",
        worst < 1e-5 && elapsed < 30.0,
        &format!("50 boundary-screened instances, worst rel err {worst:.2e}, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 2. Advantage normalization
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_advantage_normalization() {
    let started = Instant::now();
    let mut rng = derive_rng(4100, &[]);
    let mut worst_mean: f64 = 0.0;
    let mut worst_std: f64 = 0.0;
    for _ in 0..10_000 {
        let g = rng.gen_range(2..=16);
        let rewards: Vec<f64> = (0..g).map(|_| rng.gen_range(-5.0..5.0)).collect();
        if rewards.iter().all(|&r| r == rewards[0]) {
            continue;
        }
        let adv = normalize_advantages(&rewards).unwrap();
        let mean = adv.iter().sum::<f64>() / g as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / g as f64).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
    }
    let zeros = normalize_advantages(&[0.75; 8]).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        2,
        "advantage normalization",
        worst_mean <= 1e-12 && worst_std <= 1e-9 && zeros == vec![0.0; 8] && elapsed < 5.0,
        &format!(
            "10^4 vectors: worst |mean| {worst_mean:.2e}, worst |std−1| {worst_std:.2e}, all-equal → zeros, {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. KL estimator
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_kl_estimator() {
    let started = Instant::now();
    let mut rng = derive_rng(4200, &[]);
    let mut min_value = f64::INFINITY;
    let mut worst_match: f64 = 0.0;
    for _ in 0..100_000 {
        let log_ratio: f64 = rng.gen_range(-5.0..5.0);
        let kl = objective::kl_estimate(log_ratio, 0.0);
        min_value = min_value.min(kl);
        let rho = log_ratio.exp();
        worst_match = worst_match.max((kl - (rho - rho.ln() - 1.0)).abs());
    }
    let mut at_one: f64 = 0.0;
    for x in [-3.0, -0.5, 0.0, 1.25, 4.0] {
        at_one = at_one.max(objective::kl_estimate(x, x).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        3,
        "kl estimator",
        min_value >= 0.0 && at_one <= 1e-12 && worst_match <= 1e-12 && elapsed < 5.0,
        &format!(
            "10^5 draws: min {min_value:.2e}, |at ratio 1| {at_one:.2e}, worst formula gap {worst_match:.2e}, {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Proposition verification
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_proposition_verification() {
    let started = Instant::now();
    let vocab = Vocabulary::with_size(16).unwrap();
    let answer = digit_token(7);
    let prompt = vec![Vocabulary::BOS, digit_token(3)];
    let mut pass = true;
    let mut lines = Vec::new();
    for (pi, &p) in [0.1, 0.3, 0.5].iter().enumerate() {
        let params = calibrated_success_policy(vocab, 2, answer, p).unwrap();
        for (ni, &n) in [1u32, 2, 4, 8].iter().enumerate() {
            let settings = McSettings {
                trials: 100_000,
                max_completion_len: 4,
                temperature: 1.0,
                seed: 4300 + (pi * 4 + ni) as u64,
            };
            let report = verify_proposition(
                &params,
                &prompt,
                |c| binary_reward(c, &[answer]),
                n,
                &settings,
            )
            .unwrap();
            let ok = report.sigmas() <= 3.0;
            pass &= ok;
            lines.push(format!(
                "p={p} N={n}: p̂={:.4} closed={:.4} mc={:.4} ({:.2}σ){}",
                report.p_hat,
                report.closed_form,
                report.mc_estimate,
                report.sigmas(),
                if ok { "" } else { " <-- out of band" }
            ));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    for line in &lines {
        println!("  {line}");
    }
    verdict(
        4,
        "proposition verification",
        pass && elapsed < 300.0,
        &format!("12 (p, N) cells at 10^5 trials within 3σ, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 5. Budget exactness
// ---------------------------------------------------------------------------

fn small_config(mode: Mode, drafts: usize, group: usize, baseline: usize) -> TrainerConfig {
    TrainerConfig {
        mode,
        task: TaskKind::Parity,
        task_size: 3,
        dataset_size: 8,
        reward: RewardKind::BinaryExact,
        draft_count: drafts,
        group_size: group,
        grpo_group_size: baseline,
        batch_size: 4,
        iterations: 5,
        learning_rate: 0.5,
        max_completion_len: 4,
        window_k: 3,
        ..TrainerConfig::default()
    }
}

#[test]
fn criterion_05_budget_exactness() {
    let igrpo = train(small_config(Mode::Igrpo, 4, 4, 8)).unwrap();
    let grpo = train(small_config(Mode::Grpo, 0, 8, 8)).unwrap();

    let per_iter_ok = igrpo
        .records()
        .iter()
        .chain(grpo.records())
        .all(|r| r.rollout_count == 4 * 8);
    let igrpo_total: u64 = igrpo.records().iter().map(|r| r.rollout_count).sum();
    let grpo_total: u64 = grpo.records().iter().map(|r| r.rollout_count).sum();
    let instrumented_ok =
        igrpo_total == igrpo.sampler_calls() && grpo_total == grpo.sampler_calls();
    let ratio = budget_ratio(&BudgetSplit::new(4, 4, 8).unwrap());
    verdict(
        5,
        "budget exactness",
        per_iter_ok && instrumented_ok && ratio == 1.0 && igrpo_total == grpo_total,
        &format!(
            "S·(N+G)=32 per iteration, instrumented counts match records, ratio {ratio}, totals {igrpo_total}={grpo_total}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. GRPO reduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_grpo_reduction() {
    let mut pass = true;
    for seed in [11u64, 22, 33] {
        let grpo = train(TrainerConfig {
            seed,
            ..small_config(Mode::Grpo, 0, 8, 8)
        })
        .unwrap();
        let igrpo_zero = train(TrainerConfig {
            seed,
            ..small_config(Mode::Igrpo, 0, 8, 8)
        })
        .unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        metrics::write_records(grpo.records(), ExportFormat::Csv, &mut csv_a).unwrap();
        metrics::write_records(igrpo_zero.records(), ExportFormat::Csv, &mut csv_b).unwrap();
        let mut ckpt_a = Vec::new();
        let mut ckpt_b = Vec::new();
        grpo.params().write_weights(&mut ckpt_a).unwrap();
        igrpo_zero.params().write_weights(&mut ckpt_b).unwrap();
        pass &= csv_a == csv_b && ckpt_a == ckpt_b;
    }
    verdict(
        6,
        "grpo reduction",
        pass,
        "mode=igrpo with N=0 reproduces mode=grpo bit-for-bit (metrics and weights) on 3 seeds",
    );
}

// ---------------------------------------------------------------------------
// 7. End-to-end learning
// ---------------------------------------------------------------------------

/// The tuned 2-digit-addition GRPO recipe (same as configs/addition2_grpo.conf).
fn addition2_grpo_config(seed: u64) -> TrainerConfig {
    TrainerConfig {
        mode: Mode::Grpo,
        task: TaskKind::Addition,
        task_size: 2,
        dataset_size: 512,
        reward: RewardKind::GradedDigitMatch,
        format_weight: 1.0,
        beta: 0.0,
        draft_count: 0,
        group_size: 8,
        grpo_group_size: 8,
        batch_size: 32,
        iterations: 300,
        learning_rate: 5.0,
        min_lr_rate: 0.1,
        warmup_ratio: 0.05,
        max_completion_len: 4,
        window_k: 8,
        feature_order: FeatureOrder::Pairwise,
        inner_epochs: 8,
        seed,
        ..TrainerConfig::default()
    }
}

#[test]
fn criterion_07_end_to_end_learning() {
    let started = Instant::now();
    let trainer = train(addition2_grpo_config(0)).unwrap();
    let records = trainer.records();
    let baseline = records[0].mean_stage2_reward;
    let last10: Vec<f64> = records
        .iter()
        .rev()
        .take(10)
        .map(|r| r.mean_stage2_reward)
        .collect();
    let final_reward = last10.iter().sum::<f64>() / last10.len() as f64;
    let elapsed = started.elapsed().as_secs_f64();
    verdict(
        7,
        "end-to-end learning",
        baseline < 0.15 && final_reward >= 0.80 && elapsed < 600.0,
        &format!(
            "2-digit addition, I=300 S=32 G=8 |V|=16 dataset 512: reward {baseline:.4} -> {final_reward:.4} (mean of last 10), {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. iGRPO vs GRPO under matched budgets
// ---------------------------------------------------------------------------

struct ModeComparison {
    task: &'static str,
    grpo: Vec<f64>,
    igrpo: Vec<f64>,
}

impl ModeComparison {
    fn means(&self) -> (f64, f64) {
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        (mean(&self.grpo), mean(&self.igrpo))
    }

    /// Standard error of the difference of the two seed means.
    fn pooled_se(&self) -> f64 {
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        (var(&self.grpo) / self.grpo.len() as f64 + var(&self.igrpo) / self.igrpo.len() as f64)
            .sqrt()
    }

    fn passes(&self) -> bool {
        let (g, i) = self.means();
        i >= g - self.pooled_se()
    }
}

/// Matched-budget comparison config: identical in every field except the
/// mode's rollout split (N=G=4 vs G_grpo=8).
fn comparison_config(mode: Mode, task: TaskKind, seed: u64) -> TrainerConfig {
    let (drafts, group) = match mode {
        Mode::Grpo => (0, 8),
        Mode::Igrpo => (4, 4),
    };
    let (task_size, dataset_size, batch_size, iterations, max_completion_len, learning_rate, inner_epochs) =
        match task {
            TaskKind::Addition => (1, 64, 64, 300, 3, 3.0, 8),
            TaskKind::Parity => (4, 16, 32, 150, 2, 1.0, 4),
            TaskKind::SortDigits => (2, 64, 64, 200, 3, 3.0, 8),
        };
    TrainerConfig {
        mode,
        task,
        task_size,
        dataset_size,
        batch_size,
        iterations,
        max_completion_len,
        learning_rate,
        inner_epochs,
        reward: RewardKind::BinaryExact,
        format_weight: 0.0,
        beta: 0.0,
        draft_count: drafts,
        group_size: group,
        grpo_group_size: 8,
        warmup_ratio: 0.1,
        min_lr_rate: 0.1,
        window_k: 8,
        feature_order: FeatureOrder::Pairwise,
        condition_on_zero_reward: false,
        seed,
        ..TrainerConfig::default()
    }
}

fn holdout_pass_at_1(config: &TrainerConfig) -> f64 {
    let trainer = train(config.clone()).unwrap();
    let vocab = Vocabulary::with_size(config.vocab_size).unwrap();
    let holdout =
        igrpo::tasks::make_dataset(&config.task_spec_with_seed(config.seed + 10_000), vocab)
            .unwrap();
    evaluate(
        trainer.params(),
        &holdout,
        1,
        config.temperature,
        config.max_completion_len,
        54321,
    )
    .unwrap()
    .pass_at(1)
}

#[test]
fn criterion_08_igrpo_vs_grpo_matched_budget() {
    let seeds = [0u64, 1, 2, 3, 4];
    let mut comparisons = Vec::new();
    for task in [TaskKind::Addition, TaskKind::Parity, TaskKind::SortDigits] {
        let grpo: Vec<f64> = seeds
            .iter()
            .map(|&s| holdout_pass_at_1(&comparison_config(Mode::Grpo, task, s)))
            .collect();
        let igrpo: Vec<f64> = seeds
            .iter()
            .map(|&s| holdout_pass_at_1(&comparison_config(Mode::Igrpo, task, s)))
            .collect();
        comparisons.push(ModeComparison {
            task: task.name(),
            grpo,
            igrpo,
        });
    }

    println!("  held-out pass@1 per seed (matched budget N=G=4 vs G=8):");
    let mut passing = 0;
    for c in &comparisons {
        let (g, i) = c.means();
        let se = c.pooled_se();
        println!(
            "  {:<11} grpo:  {:?} mean {g:.4}",
            c.task,
            c.grpo.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
        println!(
            "  {:<11} igrpo: {:?} mean {i:.4}  (bar: {:.4}, pooled SE {se:.4}) -> {}",
            c.task,
            c.igrpo.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            g - se,
            if c.passes() { "pass" } else { "fail" }
        );
        passing += usize::from(c.passes());
    }
    verdict(
        8,
        "igrpo vs grpo",
        passing >= 2,
        &format!("{passing} of 3 task kinds within one pooled SE of the GRPO mean"),
    );
}

// ---------------------------------------------------------------------------
// 9. Entropy instrumentation
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_entropy_instrumentation() {
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("entropy_traces");
    std::fs::create_dir_all(&out).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for mode in [Mode::Grpo, Mode::Igrpo] {
        let mut config = match mode {
            Mode::Grpo => addition2_grpo_config(0),
            Mode::Igrpo => TrainerConfig {
                mode: Mode::Igrpo,
                draft_count: 4,
                group_size: 4,
                ..addition2_grpo_config(0)
            },
        };
        config.iterations = 60;
        let trainer = train(config).unwrap();
        let records = trainer.records();
        let first = records[0].mean_token_entropy_nats;
        let exact = first == (16.0f64).ln();
        let path = out.join(format!("{}.csv", mode.name()));
        metrics::export(records, &path, ExportFormat::Csv).unwrap();
        let back = metrics::import(&path, ExportFormat::Csv).unwrap();
        pass &= exact && back.as_slice() == records;
        detail.push(format!(
            "{}: H0 = ln16 exactly ({}), trace {} -> {:.3} nats exported to {}",
            mode.name(),
            exact,
            first,
            records.last().unwrap().mean_token_entropy_nats,
            path.display()
        ));
    }
    for line in &detail {
        println!("  {line}");
    }
    verdict(9, "entropy instrumentation", pass, "traces exported, H0 exact for both modes");
}

// ---------------------------------------------------------------------------
// 10. pass@N monotonicity
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_pass_at_n_monotonicity() {
    // An i.i.d.-success control policy with known p.
    let vocab = Vocabulary::with_size(16).unwrap();
    let answer = digit_token(6);
    let p = 0.3;
    let control = calibrated_success_policy(vocab, 2, answer, p).unwrap();
    let problems: Vec<igrpo::tasks::Problem> = (0..500)
        .map(|i| igrpo::tasks::Problem {
            prompt: vec![Vocabulary::BOS, digit_token((i % 10) as u8)],
            answer: vec![answer],
        })
        .collect();
    let report = evaluate(&control, &problems, 16, 1.0, 4, 4500).unwrap();
    let monotone_control = report.pass_at.windows(2).all(|w| w[0] <= w[1]);
    let mut within_band = true;
    let mut lines = Vec::new();
    for n in [1usize, 2, 4, 8, 16] {
        let expect = 1.0 - (1.0 - p).powi(n as i32);
        let se = (expect * (1.0 - expect) / problems.len() as f64).sqrt();
        let got = report.pass_at(n);
        let ok = (got - expect).abs() <= 3.0 * se;
        within_band &= ok;
        lines.push(format!(
            "pass@{n}: {got:.4} vs closed form {expect:.4} (3σ band ±{:.4})",
            3.0 * se
        ));
    }
    for line in &lines {
        println!("  {line}");
    }

    // A trained policy's evaluation stays monotone too.
    let trainer = train(comparison_config(Mode::Grpo, TaskKind::SortDigits, 0)).unwrap();
    let holdout = igrpo::tasks::make_dataset(
        &trainer.config().task_spec_with_seed(77),
        vocab,
    )
    .unwrap();
    let trained = evaluate(trainer.params(), &holdout, 16, 1.0, 3, 99).unwrap();
    let monotone_trained = trained.pass_at.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        10,
        "pass@N monotonicity",
        monotone_control && monotone_trained && within_band,
        "columns non-decreasing; control matches 1−(1−p)^n within 3σ at n ∈ {1,2,4,8,16}",
    );
}

// ---------------------------------------------------------------------------
// 11. Determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_determinism() {
    // train: full artifact bytes.
    let run = |seed: u64| {
        let trainer = train(TrainerConfig {
            seed,
            ..small_config(Mode::Igrpo, 2, 2, 4)
        })
        .unwrap();
        let mut csv = Vec::new();
        metrics::write_records(trainer.records(), ExportFormat::Csv, &mut csv).unwrap();
        let mut jsonl = Vec::new();
        metrics::write_records(trainer.records(), ExportFormat::Jsonl, &mut jsonl).unwrap();
        let mut weights = Vec::new();
        trainer.params().write_weights(&mut weights).unwrap();
        (csv, jsonl, weights)
    };
    let train_ok = run(3) == run(3);

    // eval: identical pass@N tables.
    let vocab = Vocabulary::with_size(16).unwrap();
    let params = calibrated_success_policy(vocab, 2, digit_token(2), 0.4).unwrap();
    let problems = igrpo::tasks::make_dataset(
        &igrpo::tasks::TaskSpec {
            kind: TaskKind::Parity,
            size: 3,
            dataset_size: 8,
            seed: 1,
        },
        vocab,
    )
    .unwrap();
    let eval_ok = evaluate(&params, &problems, 8, 1.0, 4, 9).unwrap()
        == evaluate(&params, &problems, 8, 1.0, 4, 9).unwrap();

    // analyze: identical Monte-Carlo reports.
    let settings = McSettings {
        trials: 5_000,
        max_completion_len: 4,
        temperature: 1.0,
        seed: 12,
    };
    let analyze = || {
        let r = verify_proposition(
            &params,
            &[Vocabulary::BOS],
            |c| binary_reward(c, &[digit_token(2)]),
            4,
            &settings,
        )
        .unwrap();
        (r.p_hat, r.mc_estimate, r.closed_form, r.std_error)
    };
    let analyze_ok = analyze() == analyze();

    verdict(
        11,
        "determinism",
        train_ok && eval_ok && analyze_ok,
        "train/eval/analyze reruns produce byte-identical machine outputs",
    );
}
