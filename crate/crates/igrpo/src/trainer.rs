//! End-to-end training loop and evaluation.
//!
//! Each iteration snapshots the policy, collects two-stage rollouts for a
//! batch of prompts from the snapshot, computes the surrogate gradient at the
//! current parameters, and takes one (or `inner_epochs`) plain gradient-ascent
//! steps under a warmup+cosine learning-rate schedule. With `mode = grpo` the
//! draft stage is disabled and collection degenerates to vanilla GRPO under
//! the same rng streams, so the two modes are bit-comparable.
//!
//! Every random draw derives from `(seed, stream, iteration, batch slot)`;
//! reruns with an equal config produce byte-identical metrics and
//! checkpoints, and a checkpoint plus its config reproduce the exact
//! remaining metrics stream.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsRecord};
use crate::objective::{self, RolloutGroup, StdDivisor};
use crate::policy::{FeatureMap, FeatureOrder, PolicyParams, Vocabulary};
use crate::refine::{self, BudgetSplit, CollectOptions, Sampler};
use crate::seeding::{derive_rng, mix};
use crate::tasks::{binary_reward, Problem, RewardConfig, RewardKind, TaskKind, TaskSpec};

/// rng stream tags, to keep training and evaluation draws disjoint.
const STREAM_COLLECT: u64 = 1;
const STREAM_EVAL: u64 = 3;
const STREAM_SCHEDULE: u64 = 4;

/// Whether the run trains plain GRPO or the two-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Grpo,
    Igrpo,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Grpo => "grpo",
            Mode::Igrpo => "igrpo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "grpo" => Ok(Mode::Grpo),
            "igrpo" => Ok(Mode::Igrpo),
            other => Err(Error::config(
                "mode",
                format!("unknown mode {other:?} (grpo|igrpo)"),
            )),
        }
    }
}

/// Every knob of a training run. The config file is a flat `key = value`
/// document mirroring these field names; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub mode: Mode,
    pub task: TaskKind,
    /// Operand digit count (addition) or sequence length (parity, sorting).
    pub task_size: usize,
    pub dataset_size: usize,
    pub reward: RewardKind,
    /// Bonus paid for any parseable completion, on top of the base reward.
    pub format_weight: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Stage-1 drafts per prompt (N). Must be 0 in grpo mode.
    pub draft_count: usize,
    /// Stage-2 group size (G).
    pub group_size: usize,
    /// Baseline group size (G_grpo) the rollout budget is compared against.
    pub grpo_group_size: usize,
    /// Prompts per iteration (S).
    pub batch_size: usize,
    /// Training iterations (I).
    pub iterations: u64,
    /// Peak learning rate η0.
    pub learning_rate: f64,
    /// Cosine floor as a fraction of η0.
    pub min_lr_rate: f64,
    /// Fraction of iterations spent in linear warmup.
    pub warmup_ratio: f64,
    pub max_prompt_len: usize,
    pub max_completion_len: usize,
    pub temperature: f64,
    pub seed: u64,
    pub std_divisor: StdDivisor,
    /// Context window (k) of the policy feature map.
    pub window_k: usize,
    pub vocab_size: usize,
    /// 1 = per-slot one-hots; 2 = adds slot-pair one-hots.
    pub feature_order: FeatureOrder,
    /// Gradient steps per collected batch.
    pub inner_epochs: usize,
    /// Append the best draft even when its reward is exactly zero.
    pub condition_on_zero_reward: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            mode: Mode::Igrpo,
            task: TaskKind::Addition,
            task_size: 2,
            dataset_size: 512,
            reward: RewardKind::BinaryExact,
            format_weight: 0.0,
            epsilon: 0.2,
            beta: 0.0,
            draft_count: 4,
            group_size: 4,
            grpo_group_size: 8,
            batch_size: 32,
            iterations: 300,
            learning_rate: 0.5,
            min_lr_rate: 0.1,
            warmup_ratio: 0.1,
            max_prompt_len: 32,
            max_completion_len: 8,
            temperature: 1.0,
            seed: 0,
            std_divisor: StdDivisor::Population,
            window_k: 4,
            vocab_size: 16,
            feature_order: FeatureOrder::Unary,
            inner_epochs: 1,
            condition_on_zero_reward: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon", "must lie in (0, 1)"));
        }
        if self.beta < 0.0 {
            return Err(Error::config("beta", "must be non-negative"));
        }
        if self.format_weight < 0.0 {
            return Err(Error::config("format_weight", "must be non-negative"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.min_lr_rate) {
            return Err(Error::config("min_lr_rate", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::config("warmup_ratio", "must lie in [0, 1)"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::config("temperature", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.inner_epochs == 0 {
            return Err(Error::config("inner_epochs", "must be at least 1"));
        }
        if self.group_size < 2 {
            return Err(Error::config("group_size", "need at least 2 completions"));
        }
        if self.grpo_group_size < 2 {
            return Err(Error::config("grpo_group_size", "need at least 2 completions"));
        }
        if self.mode == Mode::Grpo {
            if self.draft_count != 0 {
                return Err(Error::config(
                    "draft_count",
                    "mode grpo draws no drafts; set draft_count = 0",
                ));
            }
            if self.group_size != self.grpo_group_size {
                return Err(Error::config(
                    "group_size",
                    "mode grpo requires group_size = grpo_group_size",
                ));
            }
        }
        if self.max_completion_len == 0 {
            return Err(Error::config("max_completion_len", "must be at least 1"));
        }
        let prompt_len = self.prompt_len();
        let needed = prompt_len + if self.mode == Mode::Igrpo { 2 } else { 0 };
        if needed > self.max_prompt_len {
            return Err(Error::config(
                "max_prompt_len",
                format!("prompts of this task need at least {needed} tokens"),
            ));
        }
        // Vocabulary, window and task parameters validate through their
        // constructors; surface those errors now rather than mid-run.
        let vocab = Vocabulary::with_size(self.vocab_size)?;
        FeatureMap::new(vocab, self.window_k, self.feature_order)?;
        let spec = self.task_spec();
        let _ = crate::tasks::make_dataset(
            &TaskSpec {
                dataset_size: 1,
                ..spec
            },
            vocab,
        )?;
        Ok(())
    }

    /// Prompt token count for the configured task (BOS included).
    pub fn prompt_len(&self) -> usize {
        1 + match self.task {
            TaskKind::Addition => 2 * self.task_size,
            TaskKind::Parity | TaskKind::SortDigits => self.task_size,
        }
    }

    /// Training dataset description.
    pub fn task_spec(&self) -> TaskSpec {
        self.task_spec_with_seed(self.seed)
    }

    /// Dataset description under a different generation seed (held-out sets).
    pub fn task_spec_with_seed(&self, seed: u64) -> TaskSpec {
        TaskSpec {
            kind: self.task,
            size: self.task_size,
            dataset_size: self.dataset_size,
            seed,
        }
    }

    /// Per-prompt rollout budget implied by the mode.
    pub fn budget_split(&self) -> Result<BudgetSplit> {
        match self.mode {
            Mode::Grpo => BudgetSplit::new(0, self.grpo_group_size, self.grpo_group_size),
            Mode::Igrpo => BudgetSplit::new(self.draft_count, self.group_size, self.grpo_group_size),
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            kind: self.reward,
            format_weight: self.format_weight,
        }
    }

    /// Canonical `key = value` rendering; also the config-echo format.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let order = match self.feature_order {
            FeatureOrder::Unary => 1,
            FeatureOrder::Pairwise => 2,
        };
        let divisor = match self.std_divisor {
            StdDivisor::Population => "population",
            StdDivisor::Sample => "sample",
        };
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        kv("mode", self.mode.name().into());
        kv("task", self.task.name().into());
        kv("task_size", self.task_size.to_string());
        kv("dataset_size", self.dataset_size.to_string());
        kv("reward", self.reward.name().into());
        kv("format_weight", format!("{}", self.format_weight));
        kv("epsilon", format!("{}", self.epsilon));
        kv("beta", format!("{}", self.beta));
        kv("draft_count", self.draft_count.to_string());
        kv("group_size", self.group_size.to_string());
        kv("grpo_group_size", self.grpo_group_size.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("iterations", self.iterations.to_string());
        kv("learning_rate", format!("{}", self.learning_rate));
        kv("min_lr_rate", format!("{}", self.min_lr_rate));
        kv("warmup_ratio", format!("{}", self.warmup_ratio));
        kv("max_prompt_len", self.max_prompt_len.to_string());
        kv("max_completion_len", self.max_completion_len.to_string());
        kv("temperature", format!("{}", self.temperature));
        kv("seed", self.seed.to_string());
        kv("std_divisor", divisor.into());
        kv("window_k", self.window_k.to_string());
        kv("vocab_size", self.vocab_size.to_string());
        kv("feature_order", order.to_string());
        kv("inner_epochs", self.inner_epochs.to_string());
        kv(
            "condition_on_zero_reward",
            self.condition_on_zero_reward.to_string(),
        );
        out
    }

    /// Parses the `key = value` format. Missing keys keep their defaults;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = TrainerConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    "<file>",
                    format!("line {}: expected `key = value`, got {raw:?}", i + 1),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            config.set_field(key, value)?;
        }
        Ok(config)
    }

    fn set_field(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
        }
        match key {
            "mode" => self.mode = Mode::parse(value)?,
            "task" => self.task = TaskKind::parse(value)?,
            "task_size" => self.task_size = num(key, value)?,
            "dataset_size" => self.dataset_size = num(key, value)?,
            "reward" => self.reward = RewardKind::parse(value)?,
            "format_weight" => self.format_weight = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "draft_count" => self.draft_count = num(key, value)?,
            "group_size" => self.group_size = num(key, value)?,
            "grpo_group_size" => self.grpo_group_size = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "min_lr_rate" => self.min_lr_rate = num(key, value)?,
            "warmup_ratio" => self.warmup_ratio = num(key, value)?,
            "max_prompt_len" => self.max_prompt_len = num(key, value)?,
            "max_completion_len" => self.max_completion_len = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "std_divisor" => {
                self.std_divisor = match value {
                    "population" => StdDivisor::Population,
                    "sample" => StdDivisor::Sample,
                    other => {
                        return Err(Error::config(
                            key,
                            format!("unknown divisor {other:?} (population|sample)"),
                        ))
                    }
                }
            }
            "window_k" => self.window_k = num(key, value)?,
            "vocab_size" => self.vocab_size = num(key, value)?,
            "feature_order" => {
                self.feature_order = match value {
                    "1" => FeatureOrder::Unary,
                    "2" => FeatureOrder::Pairwise,
                    other => {
                        return Err(Error::config(key, format!("unknown order {other:?} (1|2)")))
                    }
                }
            }
            "inner_epochs" => self.inner_epochs = num(key, value)?,
            "condition_on_zero_reward" => self.condition_on_zero_reward = num(key, value)?,
            other => {
                return Err(Error::config(
                    other,
                    "unknown configuration key".to_string(),
                ))
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Stable 64-bit hash of the canonical rendering.
    pub fn hash(&self) -> u64 {
        let text = self.emit();
        let mut coords = Vec::with_capacity(text.len().div_ceil(8));
        for chunk in text.as_bytes().chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            coords.push(u64::from_le_bytes(word));
        }
        mix(text.len() as u64, &coords)
    }
}

/// Learning rate at `step` (1-based, `step ≤ iterations`): linear warmup over
/// `warmup_ratio · iterations` steps from 0 to η0, then cosine decay to
/// `min_lr_rate · η0` at the final step.
pub fn lr_at(step: u64, config: &TrainerConfig) -> f64 {
    let total = config.iterations as f64;
    if total <= 0.0 {
        return config.learning_rate;
    }
    let s = (step as f64).min(total);
    let warmup = config.warmup_ratio * total;
    if s < warmup {
        return config.learning_rate * s / warmup;
    }
    let span = total - warmup;
    let progress = if span > 0.0 { (s - warmup) / span } else { 1.0 };
    let floor = config.min_lr_rate;
    config.learning_rate
        * (floor + (1.0 - floor) * (1.0 + (std::f64::consts::PI * progress).cos()) / 2.0)
}

/// Resumable training state: the policy, how far the run has progressed, the
/// seed that regenerates every rng stream, and a hash tying it to its config.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub iteration: u64,
    pub seed: u64,
    pub config_hash: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "igrpo-checkpoint 1\niteration {}\nseed {}\nconfig-hash {:016x}\n",
            self.iteration, self.seed, self.config_hash
        );
        let mut weights = Vec::new();
        self.params
            .write_weights(&mut weights)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        text.push_str(std::str::from_utf8(&weights).expect("weights are ascii"));
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut reader = std::io::BufReader::new(file);
        let mut expect_line = |what: &str| -> Result<String> {
            let mut line = String::new();
            reader
                .read_line(&mut line)
                .map_err(|e| Error::CorruptCheckpoint(format!("reading {what}: {e}")))?;
            if line.is_empty() {
                return Err(Error::CorruptCheckpoint(format!("missing {what}")));
            }
            Ok(line.trim_end().to_string())
        };
        let magic = expect_line("header")?;
        if magic != "igrpo-checkpoint 1" {
            return Err(Error::CorruptCheckpoint(format!("bad header {magic:?}")));
        }
        let field = |line: String, name: &str| -> Result<String> {
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("expected `{name} ...`")))
        };
        let iteration: u64 = field(expect_line("iteration")?, "iteration")?
            .parse()
            .map_err(|_| Error::CorruptCheckpoint("bad iteration".into()))?;
        let seed: u64 = field(expect_line("seed")?, "seed")?
            .parse()
            .map_err(|_| Error::CorruptCheckpoint("bad seed".into()))?;
        let config_hash = u64::from_str_radix(&field(expect_line("config-hash")?, "config-hash")?, 16)
            .map_err(|_| Error::CorruptCheckpoint("bad config hash".into()))?;
        let params = PolicyParams::read_weights(reader)?;
        Ok(Checkpoint {
            params,
            iteration,
            seed,
            config_hash,
        })
    }
}

/// The training loop. Create with [`Trainer::new`], drive with
/// [`step`](Trainer::step) or [`run`](Trainer::run).
pub struct Trainer {
    config: TrainerConfig,
    split: BudgetSplit,
    dataset: Vec<Problem>,
    params: PolicyParams,
    ref_params: PolicyParams,
    sampler: Sampler,
    completed: u64,
    records: Vec<MetricsRecord>,
    /// Prompt visit order for the current epoch, lazily derived from
    /// `(seed, epoch)` so resumed runs see the identical schedule.
    schedule: Option<(u64, Vec<u32>)>,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::with_size(config.vocab_size)?;
        let features = FeatureMap::new(vocab, config.window_k, config.feature_order)?;
        let dataset = crate::tasks::make_dataset(&config.task_spec(), vocab)?;
        let params = PolicyParams::zeroed(features);
        let ref_params = params.clone();
        let sampler = Sampler::new(config.temperature, config.max_completion_len)?;
        let split = config.budget_split()?;
        Ok(Trainer {
            config,
            split,
            dataset,
            params,
            ref_params,
            sampler,
            completed: 0,
            records: Vec::new(),
            schedule: None,
        })
    }

    /// Problem index for a batch slot: the dataset is cycled epoch by epoch,
    /// each epoch visiting the problems in a freshly derived shuffle.
    fn problem_index(&mut self, iter: u64, slot: usize) -> usize {
        let len = self.dataset.len() as u64;
        let position = iter * self.config.batch_size as u64 + slot as u64;
        let (epoch, offset) = (position / len, position % len);
        let fresh = match &self.schedule {
            Some((cached, _)) => *cached != epoch,
            None => true,
        };
        if fresh {
            let mut order: Vec<u32> = (0..self.dataset.len() as u32).collect();
            let mut rng = derive_rng(self.config.seed, &[STREAM_SCHEDULE, epoch]);
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            self.schedule = Some((epoch, order));
        }
        let (_, order) = self.schedule.as_ref().expect("schedule just built");
        order[offset as usize] as usize
    }

    /// Rebuilds a trainer mid-run from a checkpoint. The config must be the
    /// one the checkpoint was trained under (hashes are compared); the
    /// remaining iterations then reproduce the original run exactly.
    pub fn from_checkpoint(config: TrainerConfig, checkpoint: &Checkpoint) -> Result<Self> {
        if checkpoint.config_hash != config.hash() {
            return Err(Error::CorruptCheckpoint(
                "checkpoint was trained under a different configuration".into(),
            ));
        }
        let mut trainer = Trainer::new(config)?;
        trainer.params = checkpoint.params.clone();
        trainer.completed = checkpoint.iteration;
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn dataset(&self) -> &[Problem] {
        &self.dataset
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn completed_iterations(&self) -> u64 {
        self.completed
    }

    /// Completions drawn so far through this trainer's sampler.
    pub fn sampler_calls(&self) -> u64 {
        self.sampler.calls()
    }

    pub fn is_done(&self) -> bool {
        self.completed >= self.config.iterations
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            iteration: self.completed,
            seed: self.config.seed,
            config_hash: self.config.hash(),
        }
    }

    /// Runs one iteration: snapshot, collect, update, record.
    pub fn step(&mut self) -> Result<MetricsRecord> {
        let iter = self.completed;
        let abort = |message: String| Error::TrainingAbort {
            iteration: iter,
            message,
        };
        let snapshot = self.params.clone(); // θ_old, constant within the iteration
        let reward_cfg = self.config.reward_config();
        let opts = CollectOptions {
            max_prompt_len: self.config.max_prompt_len,
            std_divisor: self.config.std_divisor,
            condition_on_zero_reward: self.config.condition_on_zero_reward,
        };
        let calls_before = self.sampler.calls();

        let mut groups: Vec<RolloutGroup> = Vec::with_capacity(self.config.batch_size);
        let mut best_rewards: Vec<f64> = Vec::new();
        for slot in 0..self.config.batch_size {
            let problem_index = self.problem_index(iter, slot);
            let problem = &self.dataset[problem_index];
            let answer = problem.answer.clone();
            let mut rng = derive_rng(self.config.seed, &[STREAM_COLLECT, iter, slot as u64]);
            let (drafts, group) = refine::collect(
                &mut self.sampler,
                &snapshot,
                &self.ref_params,
                &problem.prompt,
                &self.split,
                |completion| reward_cfg.score(completion, &answer),
                &opts,
                &mut rng,
            )
            .map_err(|e| abort(e.to_string()))?;
            if let Some(best) = drafts.best_reward() {
                best_rewards.push(best);
            }
            groups.push(group);
        }

        // Diagnostics measured under the snapshot, as collected.
        let entropy = metrics::group_token_entropy(&snapshot, &groups)
            .map_err(|e| abort(e.to_string()))?;
        let response_length = metrics::mean_response_length(&groups);
        let reward_sum: f64 = groups.iter().map(|g| g.rewards().iter().sum::<f64>()).sum();
        let completion_count: usize = groups.iter().map(|g| g.group_size()).sum();

        let lr = lr_at(iter + 1, &self.config);
        let mut last_report = None;
        for _ in 0..self.config.inner_epochs {
            let report = objective::surrogate(&groups, &self.params, self.config.epsilon, self.config.beta)
                .map_err(|e| abort(e.to_string()))?;
            self.params.ascend(lr, &report.gradient);
            if !self.params.weights().is_finite() {
                return Err(abort(format!(
                    "weights became non-finite after the update (lr {lr}, gradient norm {})",
                    report.gradient.norm()
                )));
            }
            last_report = Some(report);
        }
        let report = last_report.expect("at least one inner epoch");

        let record = MetricsRecord {
            iteration: iter,
            mean_stage2_reward: reward_sum / completion_count as f64,
            mean_best_draft_reward: if best_rewards.is_empty() {
                None
            } else {
                Some(best_rewards.iter().sum::<f64>() / best_rewards.len() as f64)
            },
            mean_token_entropy_nats: entropy,
            mean_response_length: response_length,
            clip_fraction: report.clip_fraction,
            mean_kl: report.mean_kl,
            learning_rate: lr,
            rollout_count: self.sampler.calls() - calls_before,
            wall_time_seconds: 0.0,
        };
        self.records.push(record.clone());
        self.completed += 1;
        Ok(record)
    }

    /// Runs the remaining iterations to completion.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }
}

/// Convenience: build a trainer and run it to completion.
pub fn train(config: TrainerConfig) -> Result<Trainer> {
    let mut trainer = Trainer::new(config)?;
    trainer.run()?;
    Ok(trainer)
}

/// pass@n table from single-shot evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Samples drawn per problem.
    pub attempts: usize,
    /// `pass_at[n-1]` = fraction of problems solved within the first n samples.
    pub pass_at: Vec<f64>,
    /// Per problem, the index of the first correct sample (if any).
    pub first_success: Vec<Option<usize>>,
}

impl EvalReport {
    pub fn pass_at(&self, n: usize) -> f64 {
        self.pass_at[n - 1]
    }
}

/// Samples `attempts` single-shot completions per problem from the bare
/// prompt (no draft conditioning) and scores them with the exact binary
/// reward. Deterministic given the seed; each problem owns a derived stream.
pub fn evaluate(
    params: &PolicyParams,
    problems: &[Problem],
    attempts: usize,
    temperature: f64,
    max_completion_len: usize,
    seed: u64,
) -> Result<EvalReport> {
    if attempts == 0 {
        return Err(Error::InvalidInput("attempts must be at least 1".into()));
    }
    if problems.is_empty() {
        return Err(Error::InvalidInput("no problems to evaluate".into()));
    }
    let mut first_success = Vec::with_capacity(problems.len());
    for (idx, problem) in problems.iter().enumerate() {
        let mut rng = derive_rng(seed, &[STREAM_EVAL, idx as u64]);
        let mut hit = None;
        for attempt in 0..attempts {
            let completion = crate::policy::sample_sequence_with_temperature(
                params,
                &problem.prompt,
                max_completion_len,
                temperature,
                &mut rng,
            )?;
            if binary_reward(&completion, &problem.answer) == 1.0 {
                hit = Some(attempt);
                break;
            }
        }
        // Skipped draws keep the stream aligned but are not needed: each
        // problem owns its own rng, so stopping early is safe.
        first_success.push(hit);
    }
    let total = problems.len() as f64;
    let pass_at = (1..=attempts)
        .map(|n| {
            first_success
                .iter()
                .filter(|h| matches!(h, Some(i) if *i < n))
                .count() as f64
                / total
        })
        .collect();
    Ok(EvalReport {
        attempts,
        pass_at,
        first_success,
    })
}
