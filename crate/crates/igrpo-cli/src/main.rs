//! Command-line driver for GRPO/iGRPO training, sweeps, evaluation and
//! analysis.
//!
//! Subcommands:
//! - `train`: run one training job from a config file; writes `config.echo`,
//!   `metrics.csv`, `metrics.jsonl` and `checkpoint.final` into the output
//!   directory.
//! - `eval`: pass@N table for a checkpoint on a task.
//! - `sweep`: one sub-run per value along a `beta` or `completions` axis.
//! - `analyze`: best-of-N bootstrap verification and budget accounting for a
//!   checkpoint.
//! - `report`: per-run and cross-run summary CSVs from finished run dirs.
//!
//! Exit codes: 0 success, 2 invalid configuration or flags, 3 training
//! abort, 4 corrupt checkpoint, 1 other failures. Machine-readable data goes
//! to files; stdout carries human summaries only.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use igrpo::analysis::{self, McSettings};
use igrpo::error::Error;
use igrpo::metrics::{self, ExportFormat, MetricsRecord};
use igrpo::refine::{budget_ratio, BudgetSplit};
use igrpo::tasks::{self, binary_reward, TaskKind, TaskSpec};
use igrpo::trainer::{evaluate, Checkpoint, Trainer, TrainerConfig};

#[derive(Parser)]
#[command(name = "igrpo", about = "GRPO/iGRPO training and analysis driver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from a config file.
    Train(TrainArgs),
    /// Evaluate a checkpoint: pass@1..pass@N table.
    Eval(EvalArgs),
    /// Run a one-axis sweep of training jobs.
    Sweep(SweepArgs),
    /// Verify the best-of-N bootstrap closed form and report budgets.
    Analyze(AnalyzeArgs),
    /// Summarize finished run directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training configuration file (flat `key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Replace the config's seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Task spec as `kind:size:count:seed`, e.g. `addition:2:512:7`.
    #[arg(long)]
    task: String,
    /// Samples per problem (1..=1024).
    #[arg(long, default_value_t = 16)]
    attempts: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Optional training config supplying temperature and completion length.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the evaluation seed (default 0).
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base training configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Sweep axis: `beta` or `completions`.
    #[arg(long)]
    axis: String,
    /// Comma-separated values along the axis.
    #[arg(long)]
    values: String,
    /// Output directory (one sub-directory per value).
    #[arg(long)]
    out: PathBuf,
    /// Replace the base seed before per-value derivation.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Checkpoint to analyze.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Task spec as `kind:size:count:seed`.
    #[arg(long)]
    task: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Draft counts for the bootstrap grid.
    #[arg(long, default_value = "1,2,4,8")]
    draft_counts: String,
    /// Monte-Carlo trials per grid cell.
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    /// Problem index supplying the prompt under study.
    #[arg(long, default_value_t = 0)]
    prompt_index: usize,
    /// Budget split to report, as `drafts,group,baseline`.
    #[arg(long, default_value = "4,4,8")]
    budget: String,
    /// Optional training config supplying temperature and completion length.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the analysis seed (default 0).
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory for the summary CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Finished run directories (each containing metrics.csv).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_status(&err))
        }
    }
}

fn exit_status(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidInput(_) | Error::Domain(_) => 2,
        Error::TrainingAbort { .. } => 3,
        Error::CorruptCheckpoint(_) => 4,
        _ => 1,
    }
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_task(arg: &str) -> Result<TaskSpec, Error> {
    let parts: Vec<&str> = arg.split(':').collect();
    if parts.len() != 4 {
        return Err(Error::config(
            "task",
            format!("expected kind:size:count:seed, got {arg:?}"),
        ));
    }
    let kind = TaskKind::parse(parts[0])?;
    let parse = |s: &str, what: &str| -> Result<u64, Error> {
        s.parse()
            .map_err(|_| Error::config("task", format!("bad {what}: {s:?}")))
    };
    Ok(TaskSpec {
        kind,
        size: parse(parts[1], "size")? as usize,
        dataset_size: parse(parts[2], "count")? as usize,
        seed: parse(parts[3], "seed")?,
    })
}

fn task_arg(spec: &TaskSpec) -> String {
    format!(
        "{}:{}:{}:{}",
        spec.kind.name(),
        spec.size,
        spec.dataset_size,
        spec.seed
    )
}

/// Sampling settings for eval/analyze: from a training config when given,
/// defaults otherwise.
fn sampling_settings(config: &Option<PathBuf>) -> Result<(f64, usize), Error> {
    match config {
        Some(path) => {
            let config = TrainerConfig::load(path)?;
            Ok((config.temperature, config.max_completion_len))
        }
        None => {
            let d = TrainerConfig::default();
            Ok((d.temperature, d.max_completion_len))
        }
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Core of `train`, shared with `sweep`: runs one job into `out`.
fn run_training(config: TrainerConfig, out: &Path) -> Result<Trainer, Error> {
    config.validate()?;
    ensure_dir(out)?;
    write_text(&out.join("config.echo"), &config.emit())?;

    let started = Instant::now();
    let total = config.iterations;
    let mut trainer = Trainer::new(config)?;
    let tenth = (total / 10).max(1);
    while !trainer.is_done() {
        let record = trainer.step()?;
        if record.iteration % tenth == 0 || record.iteration + 1 == total {
            println!(
                "iter {:>5}/{}  reward {:<8.4} entropy {:<8.4} lr {:.4}",
                record.iteration + 1,
                total,
                record.mean_stage2_reward,
                record.mean_token_entropy_nats,
                record.learning_rate
            );
        }
    }
    metrics::export(trainer.records(), &out.join("metrics.csv"), ExportFormat::Csv)?;
    metrics::export(
        trainer.records(),
        &out.join("metrics.jsonl"),
        ExportFormat::Jsonl,
    )?;
    trainer.checkpoint().save(&out.join("checkpoint.final"))?;

    let last = trainer.records().last();
    println!(
        "done: {} iterations, {} rollouts, final reward {:.4}, wall time {:.1}s",
        trainer.completed_iterations(),
        trainer.sampler_calls(),
        last.map_or(f64::NAN, |r| r.mean_stage2_reward),
        started.elapsed().as_secs_f64()
    );
    Ok(trainer)
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let mut config = TrainerConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        config.seed = seed;
    }
    run_training(config, &args.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    if !(1..=1024).contains(&args.attempts) {
        return Err(Error::config("attempts", "must lie in 1..=1024"));
    }
    let spec = parse_task(&args.task)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let (temperature, max_completion_len) = sampling_settings(&args.config)?;
    let seed = args.seed_override.unwrap_or(0);

    let vocab = checkpoint.params.vocab();
    let problems = tasks::make_dataset(&spec, vocab)?;
    let report = evaluate(
        &checkpoint.params,
        &problems,
        args.attempts,
        temperature,
        max_completion_len,
        seed,
    )?;

    ensure_dir(&args.out)?;
    let reports = args.out.join("reports");
    ensure_dir(&reports)?;
    write_text(
        &args.out.join("config.echo"),
        &format!(
            "command = eval\ncheckpoint = {}\ntask = {}\nattempts = {}\ntemperature = {}\nmax_completion_len = {}\nseed = {}\n",
            args.checkpoint.display(),
            task_arg(&spec),
            args.attempts,
            temperature,
            max_completion_len,
            seed
        ),
    )?;
    let mut csv = String::from("n,pass_at\n");
    for n in 1..=args.attempts {
        csv.push_str(&format!("{n},{}\n", report.pass_at(n)));
    }
    write_text(&reports.join("pass_at.csv"), &csv)?;

    println!("pass@N over {} problems ({} attempts):", problems.len(), args.attempts);
    let mut n = 1;
    while n <= args.attempts {
        println!("  pass@{n:<5} {:.4}", report.pass_at(n));
        n *= 2;
    }
    if args.attempts > 1 && !args.attempts.is_power_of_two() {
        println!("  pass@{:<5} {:.4}", args.attempts, report.pass_at(args.attempts));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let mut base = TrainerConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        base.seed = seed;
    }
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::config("values", "need at least one value"));
    }

    // Validate every point before running any, so a bad trailing value
    // cannot waste a half-finished sweep.
    let mut jobs: Vec<(String, TrainerConfig)> = Vec::with_capacity(values.len());
    for (index, value) in values.iter().enumerate() {
        let mut config = base.clone();
        // Sweeps run serially with derived seeds so results are independent
        // of execution order.
        config.seed = base.seed + index as u64;
        match args.axis.as_str() {
            "beta" => {
                config.beta = value
                    .parse()
                    .map_err(|_| Error::config("values", format!("bad beta {value:?}")))?;
            }
            "completions" => {
                let total: usize = value
                    .parse()
                    .map_err(|_| Error::config("values", format!("bad completion count {value:?}")))?;
                if !total.is_multiple_of(2) || total < 4 {
                    return Err(Error::config(
                        "values",
                        format!("completion total {total} cannot split evenly across the stages"),
                    ));
                }
                // Total rollouts split evenly across the two stages, with the
                // budget matched against a same-total baseline.
                config.mode = igrpo::trainer::Mode::Igrpo;
                config.draft_count = total / 2;
                config.group_size = total / 2;
                config.grpo_group_size = total;
            }
            other => {
                return Err(Error::config(
                    "axis",
                    format!("unknown axis {other:?} (beta|completions)"),
                ))
            }
        }
        config.validate()?;
        jobs.push((value.to_string(), config));
    }

    ensure_dir(&args.out)?;
    let mut summary = String::from(
        "axis,value,seed,iterations,final_reward,mean_last10_reward,final_entropy_nats\n",
    );
    for (value, config) in jobs {
        let sub = args.out.join(format!("{}_{}", args.axis, value));
        println!("== {} = {} -> {}", args.axis, value, sub.display());
        let trainer = run_training(config.clone(), &sub)?;
        let records = trainer.records();
        let final_reward = records.last().map_or(f64::NAN, |r| r.mean_stage2_reward);
        let last10: Vec<f64> = records
            .iter()
            .rev()
            .take(10)
            .map(|r| r.mean_stage2_reward)
            .collect();
        let mean_last10 = last10.iter().sum::<f64>() / last10.len().max(1) as f64;
        let final_entropy = records.last().map_or(f64::NAN, |r| r.mean_token_entropy_nats);
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            args.axis,
            value,
            config.seed,
            records.len(),
            final_reward,
            mean_last10,
            final_entropy
        ));
    }
    write_text(&args.out.join("summary.csv"), &summary)?;
    println!("sweep summary written to {}", args.out.join("summary.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let spec = parse_task(&args.task)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let (temperature, max_completion_len) = sampling_settings(&args.config)?;
    let seed = args.seed_override.unwrap_or(0);

    let draft_counts: Vec<u32> = args
        .draft_counts
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config("draft_counts", format!("bad count {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    let budget_parts: Vec<usize> = args
        .budget
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::config("budget", format!("bad budget field {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    if budget_parts.len() != 3 {
        return Err(Error::config("budget", "expected drafts,group,baseline"));
    }
    let split = BudgetSplit::new(budget_parts[0], budget_parts[1], budget_parts[2])?;

    let vocab = checkpoint.params.vocab();
    let problems = tasks::make_dataset(&spec, vocab)?;
    let problem = problems.get(args.prompt_index).ok_or_else(|| {
        Error::config(
            "prompt_index",
            format!("dataset has only {} problems", problems.len()),
        )
    })?;

    ensure_dir(&args.out)?;
    let reports = args.out.join("reports");
    ensure_dir(&reports)?;
    write_text(
        &args.out.join("config.echo"),
        &format!(
            "command = analyze\ncheckpoint = {}\ntask = {}\nprompt_index = {}\ndraft_counts = {}\ntrials = {}\nbudget = {}\ntemperature = {}\nmax_completion_len = {}\nseed = {}\n",
            args.checkpoint.display(),
            task_arg(&spec),
            args.prompt_index,
            args.draft_counts,
            args.trials,
            args.budget,
            temperature,
            max_completion_len,
            seed
        ),
    )?;

    println!(
        "best-of-N bootstrap on prompt {} ({} trials per cell):",
        args.prompt_index, args.trials
    );
    let mut csv =
        String::from("draft_count,p_hat,closed_form,mc_estimate,std_error,sigmas,trials\n");
    let answer = problem.answer.clone();
    for (index, &n) in draft_counts.iter().enumerate() {
        let settings = McSettings {
            trials: args.trials,
            max_completion_len,
            temperature,
            seed: seed + index as u64,
        };
        let report = analysis::verify_proposition(
            &checkpoint.params,
            &problem.prompt,
            |completion| binary_reward(completion, &answer),
            n,
            &settings,
        )?;
        println!(
            "  N={n:<3} p̂={:<8.4} closed={:<8.4} mc={:<8.4} ({:.2}σ)",
            report.p_hat,
            report.closed_form,
            report.mc_estimate,
            report.sigmas()
        );
        csv.push_str(&format!(
            "{n},{},{},{},{},{},{}\n",
            report.p_hat,
            report.closed_form,
            report.mc_estimate,
            report.std_error,
            report.sigmas(),
            report.mc_trials
        ));
    }
    write_text(&reports.join("proposition.csv"), &csv)?;

    let ratio = budget_ratio(&split);
    println!(
        "budget: N={} G={} baseline={} -> ratio {:.4} ({})",
        split.drafts,
        split.group,
        split.baseline_group,
        ratio,
        if split.is_matched() { "matched" } else { "unmatched" }
    );
    write_text(
        &reports.join("budget.csv"),
        &format!(
            "drafts,group,baseline_group,ratio,matched\n{},{},{},{},{}\n",
            split.drafts,
            split.group,
            split.baseline_group,
            ratio,
            split.is_matched()
        ),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    ensure_dir(&args.out)?;
    let mut per_run = String::from(
        "run,iterations,total_rollouts,first_reward,final_reward,max_reward,first_entropy_nats,final_entropy_nats\n",
    );
    let mut combined = String::new();
    let mut header_written = false;
    for run in &args.runs {
        let path = run.join("metrics.csv");
        let records = metrics::import(&path, ExportFormat::Csv)?;
        let name = run.display();
        let stats = |records: &[MetricsRecord]| -> (f64, f64, f64, f64, f64, u64) {
            let first = records.first();
            let last = records.last();
            (
                first.map_or(f64::NAN, |r| r.mean_stage2_reward),
                last.map_or(f64::NAN, |r| r.mean_stage2_reward),
                records
                    .iter()
                    .map(|r| r.mean_stage2_reward)
                    .fold(f64::NAN, f64::max),
                first.map_or(f64::NAN, |r| r.mean_token_entropy_nats),
                last.map_or(f64::NAN, |r| r.mean_token_entropy_nats),
                records.iter().map(|r| r.rollout_count).sum(),
            )
        };
        let (first_r, final_r, max_r, first_h, final_h, rollouts) = stats(&records);
        per_run.push_str(&format!(
            "{name},{},{rollouts},{first_r},{final_r},{max_r},{first_h},{final_h}\n",
            records.len()
        ));

        let raw =
            std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = raw.lines();
        let header = lines.next().unwrap_or_default();
        if !header_written {
            combined.push_str(&format!("run,{header}\n"));
            header_written = true;
        }
        for line in lines {
            if !line.is_empty() {
                combined.push_str(&format!("{name},{line}\n"));
            }
        }
    }
    write_text(&args.out.join("per_run.csv"), &per_run)?;
    write_text(&args.out.join("combined.csv"), &combined)?;
    println!(
        "summaries for {} runs written to {}",
        args.runs.len(),
        args.out.display()
    );
    Ok(())
}
