//! Desk-scale GRPO and iterative GRPO on tabular softmax policies.
//!
//! This crate implements the full training stack for Group Relative Policy
//! Optimization (GRPO) and its two-stage iterative extension (iGRPO) on
//! small, exactly differentiable autoregressive policies over synthetic
//! verifiable tasks:
//!
//! - [`policy`]: linear softmax policies with closed-form log-probability
//!   gradients, seeded ancestral sampling, per-token entropy, and a text
//!   checkpoint format.
//! - [`objective`]: group-normalized advantages, importance ratios, the
//!   clipped surrogate, the non-negative per-token KL estimator, and the
//!   exact analytic gradient of the full objective.
//! - [`refine`]: the two-stage collection pipeline — exploratory drafts,
//!   best-draft selection, prompt augmentation, and conditioned refinement
//!   groups under a matched rollout budget.
//! - [`tasks`]: deterministic synthetic reasoning tasks (addition, parity,
//!   digit sorting) with rule-based binary and graded rewards.
//! - [`trainer`]: the end-to-end loop — snapshotting, batched collection,
//!   gradient ascent with a warmup+cosine learning-rate schedule,
//!   checkpointing, and pass@N evaluation.
//! - [`analysis`]: the best-of-N bootstrap closed form `1 − (1 − p)^N` and
//!   Monte-Carlo cross-checks of it against the real sampling stack.
//! - [`metrics`]: per-iteration instrumentation and CSV/JSONL export.
//!
//! Everything is deterministic given a seed: reruns produce byte-identical
//! metrics files and checkpoints.

pub mod analysis;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod policy;
pub mod refine;
pub mod seeding;
pub mod tasks;
pub mod trainer;

pub use error::{Error, Result};
pub use policy::{FeatureMap, FeatureOrder, PolicyParams, Token, TokenSeq, Vocabulary};

// The guide chapters double as doctests so the book stays in sync with the
// public API. `cargo test --doc` runs every fenced snippet below.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(overview, "../../../book/src/overview.md");
    chapter!(policies, "../../../book/src/policies.md");
    chapter!(objective, "../../../book/src/objective.md");
    chapter!(refinement, "../../../book/src/refinement.md");
    chapter!(tasks, "../../../book/src/tasks.md");
    chapter!(training, "../../../book/src/training.md");
    chapter!(analysis, "../../../book/src/analysis.md");
    chapter!(cli, "../../../book/src/cli.md");
}
