//! Synthetic verifiable reasoning tasks.
//!
//! Three task families with deterministic generation and rule-based rewards:
//!
//! - **addition**: two fixed-width decimal operands, answer is their sum;
//! - **parity**: a bit string, answer is its XOR parity bit;
//! - **sort_digits**: a list of distinct digits, answer is the ascending sort.
//!
//! A completion is scored by extracting the tokens after the *last* answer
//! marker (`ANS`) up to the following EOS, and comparing them with the
//! reference answer: exactly (binary reward) or per position (graded reward).
//! Unparseable completions score zero.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::{Token, TokenSeq, Vocabulary};
use crate::seeding::derive_rng;

/// Token id used for decimal digit `d`.
pub fn digit_token(d: u8) -> Token {
    debug_assert!(d < 10);
    Vocabulary::PAYLOAD_BASE + Token::from(d)
}

/// Digit encoded by `token`, if it is a digit token.
pub fn token_digit(token: Token) -> Option<u8> {
    let d = token.checked_sub(Vocabulary::PAYLOAD_BASE)?;
    (d < 10).then_some(d as u8)
}

/// One training/evaluation instance: a prompt and its reference answer.
///
/// Prompts begin with BOS; answers are payload tokens only (no EOS).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub prompt: TokenSeq,
    pub answer: TokenSeq,
}

impl Problem {
    /// The completion a perfect policy would emit: `ANS`, the answer, EOS.
    pub fn gold_completion(&self) -> TokenSeq {
        let mut out = vec![Vocabulary::ANS];
        out.extend_from_slice(&self.answer);
        out.push(Vocabulary::EOS);
        out
    }
}

/// Which synthetic task family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Addition,
    Parity,
    SortDigits,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Addition => "addition",
            TaskKind::Parity => "parity",
            TaskKind::SortDigits => "sort_digits",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "addition" => Ok(TaskKind::Addition),
            "parity" => Ok(TaskKind::Parity),
            "sort_digits" => Ok(TaskKind::SortDigits),
            other => Err(Error::config(
                "task",
                format!("unknown task kind {other:?} (addition|parity|sort_digits)"),
            )),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            TaskKind::Addition => 1,
            TaskKind::Parity => 2,
            TaskKind::SortDigits => 3,
        }
    }
}

/// Full description of a generated dataset. Generation is a pure function of
/// these fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Operand digit count (addition) or sequence length (parity, sorting).
    pub size: usize,
    pub dataset_size: usize,
    pub seed: u64,
}

impl TaskSpec {
    /// Number of distinct instances this spec can produce.
    fn instance_space(&self) -> u128 {
        match self.kind {
            TaskKind::Addition => {
                let operands = 10u128.saturating_pow(self.size as u32);
                operands.saturating_mul(operands)
            }
            TaskKind::Parity => 1u128 << self.size.min(100),
            TaskKind::SortDigits => {
                // Ordered draws of distinct digits: 10 · 9 · … · (10 − L + 1).
                (0..self.size).fold(1u128, |acc, i| acc * (10 - i) as u128)
            }
        }
    }

    fn validate(&self, vocab: Vocabulary) -> Result<()> {
        if self.dataset_size == 0 {
            return Err(Error::config("dataset_size", "must be at least 1"));
        }
        if self.size == 0 {
            return Err(Error::config("task_size", "must be at least 1"));
        }
        let digits_needed = match self.kind {
            TaskKind::Parity => 2,
            TaskKind::Addition | TaskKind::SortDigits => 10,
        };
        if vocab.payload_size() < digits_needed {
            return Err(Error::config(
                "vocab_size",
                format!(
                    "{} needs {digits_needed} digit tokens but the vocabulary has room for {}",
                    self.kind.name(),
                    vocab.payload_size()
                ),
            ));
        }
        if self.kind == TaskKind::SortDigits && self.size > 10 {
            return Err(Error::config(
                "task_size",
                "sort_digits uses distinct digits; length cannot exceed 10",
            ));
        }
        Ok(())
    }
}

fn push_fixed_width(tokens: &mut TokenSeq, value: u64, width: usize) {
    for i in (0..width).rev() {
        let digit = (value / 10u64.pow(i as u32)) % 10;
        tokens.push(digit_token(digit as u8));
    }
}

fn generate_one<R: Rng>(spec: &TaskSpec, rng: &mut R) -> Problem {
    let mut prompt = vec![Vocabulary::BOS];
    match spec.kind {
        TaskKind::Addition => {
            let bound = 10u64.pow(spec.size as u32);
            let a = rng.gen_range(0..bound);
            let b = rng.gen_range(0..bound);
            push_fixed_width(&mut prompt, a, spec.size);
            push_fixed_width(&mut prompt, b, spec.size);
            // Sums are zero-padded to size+1 digits, so every instance of a
            // task shares one answer length.
            let mut answer = TokenSeq::new();
            push_fixed_width(&mut answer, a + b, spec.size + 1);
            Problem { prompt, answer }
        }
        TaskKind::Parity => {
            let mut parity = 0u8;
            for _ in 0..spec.size {
                let bit = rng.gen_range(0..2u8);
                parity ^= bit;
                prompt.push(digit_token(bit));
            }
            Problem {
                prompt,
                answer: vec![digit_token(parity)],
            }
        }
        TaskKind::SortDigits => {
            // Partial Fisher-Yates draw of `size` distinct digits.
            let mut pool: Vec<u8> = (0..10).collect();
            let mut digits = Vec::with_capacity(spec.size);
            for i in 0..spec.size {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
                digits.push(pool[i]);
            }
            for &d in &digits {
                prompt.push(digit_token(d));
            }
            let mut sorted = digits;
            sorted.sort_unstable();
            Problem {
                prompt,
                answer: sorted.into_iter().map(digit_token).collect(),
            }
        }
    }
}

/// Deterministic dataset for `spec`. Prompts are distinct while the instance
/// space allows; once it is exhausted, repeats are permitted.
pub fn make_dataset(spec: &TaskSpec, vocab: Vocabulary) -> Result<Vec<Problem>> {
    spec.validate(vocab)?;
    let mut rng = derive_rng(spec.seed, &[spec.kind.tag(), spec.size as u64]);
    let space = spec.instance_space();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(spec.dataset_size);
    while out.len() < spec.dataset_size {
        let problem = generate_one(spec, &mut rng);
        if seen.insert(problem.prompt.clone()) || (seen.len() as u128) >= space {
            out.push(problem);
        }
    }
    Ok(out)
}

/// Tokens strictly between the last `ANS` marker and the following EOS (or
/// the end of the completion). `None` when no marker is present.
pub fn extract_answer(completion: &[Token]) -> Option<TokenSeq> {
    let last_ans = completion
        .iter()
        .rposition(|&t| t == Vocabulary::ANS)?;
    let tail = &completion[last_ans + 1..];
    let end = tail
        .iter()
        .position(|&t| t == Vocabulary::EOS)
        .unwrap_or(tail.len());
    Some(tail[..end].to_vec())
}

fn strip_terminal_eos(answer: &[Token]) -> &[Token] {
    match answer.split_last() {
        Some((&last, rest)) if last == Vocabulary::EOS => rest,
        _ => answer,
    }
}

/// 1 iff the extracted answer matches the reference token-for-token; 0
/// otherwise (including unparseable completions).
pub fn binary_reward(completion: &[Token], answer: &[Token]) -> f64 {
    match extract_answer(completion) {
        Some(extracted) if extracted == strip_terminal_eos(answer) => 1.0,
        _ => 0.0,
    }
}

/// Fraction of answer positions matched, in `[0, 1]`.
///
/// Zero when the completion is unparseable or the extracted answer has the
/// wrong length; this keeps the graded score equal to the binary one for
/// single-token answers.
pub fn graded_reward(completion: &[Token], answer: &[Token]) -> f64 {
    let answer = strip_terminal_eos(answer);
    let Some(extracted) = extract_answer(completion) else {
        return 0.0;
    };
    if extracted.len() != answer.len() || answer.is_empty() {
        return 0.0;
    }
    let matches = extracted
        .iter()
        .zip(answer)
        .filter(|(a, b)| a == b)
        .count();
    matches as f64 / answer.len() as f64
}

/// Which scalar reward scores a completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardKind {
    /// Exact-match indicator in {0, 1}.
    #[default]
    BinaryExact,
    /// Positional match fraction in [0, 1].
    GradedDigitMatch,
}

impl RewardKind {
    pub fn name(&self) -> &'static str {
        match self {
            RewardKind::BinaryExact => "binary_exact",
            RewardKind::GradedDigitMatch => "graded_digit_match",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary_exact" => Ok(RewardKind::BinaryExact),
            "graded_digit_match" => Ok(RewardKind::GradedDigitMatch),
            other => Err(Error::config(
                "reward",
                format!("unknown reward kind {other:?} (binary_exact|graded_digit_match)"),
            )),
        }
    }
}

/// Reward configuration: the base kind, optionally mixed with a format term
/// paid for any parseable completion (an answer marker was found).
///
/// The composite is the weighted mean `(base + w·parseable) / (1 + w)`, so
/// scores stay in `[0, 1]` for any weight. Group normalization is affine
/// invariant, so the mix changes which completions earn signal (keeping
/// answer-shaped output alive early in training) without rescaling
/// advantages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub format_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kind: RewardKind::BinaryExact,
            format_weight: 0.0,
        }
    }
}

impl RewardConfig {
    pub fn score(&self, completion: &[Token], answer: &[Token]) -> f64 {
        let base = match self.kind {
            RewardKind::BinaryExact => binary_reward(completion, answer),
            RewardKind::GradedDigitMatch => graded_reward(completion, answer),
        };
        if self.format_weight == 0.0 {
            return base;
        }
        let parseable = extract_answer(completion).is_some();
        (base + self.format_weight * f64::from(u8::from(parseable))) / (1.0 + self.format_weight)
    }
}

// ---------------------------------------------------------------------------
// Dataset dump/load
// ---------------------------------------------------------------------------

fn tokens_to_field(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn field_to_tokens(field: &str, line: usize) -> Result<TokenSeq> {
    field
        .split_whitespace()
        .map(|s| {
            s.parse::<Token>()
                .map_err(|_| Error::InvalidInput(format!("line {line}: bad token id {s:?}")))
        })
        .collect()
}

/// Writes one line per problem: prompt tokens, a tab, answer tokens (ids in
/// decimal, space-separated).
pub fn write_dataset<W: Write>(problems: &[Problem], mut w: W) -> std::io::Result<()> {
    for p in problems {
        writeln!(
            w,
            "{}\t{}",
            tokens_to_field(&p.prompt),
            tokens_to_field(&p.answer)
        )?;
    }
    Ok(())
}

/// Parses the format produced by [`write_dataset`].
pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<Problem>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let (prompt, answer) = line.split_once('\t').ok_or_else(|| {
            Error::InvalidInput(format!("line {}: expected prompt<TAB>answer", i + 1))
        })?;
        out.push(Problem {
            prompt: field_to_tokens(prompt, i + 1)?,
            answer: field_to_tokens(answer, i + 1)?,
        });
    }
    Ok(out)
}

pub fn save_dataset(problems: &[Problem], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_dataset(problems, std::io::BufWriter::new(file))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<Problem>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_dataset(std::io::BufReader::new(file))
}
