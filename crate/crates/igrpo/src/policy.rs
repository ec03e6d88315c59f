//! Tabular softmax policy over a small token vocabulary.
//!
//! The policy is linear: logits are `W · φ(context)` where `φ` is a sparse
//! binary feature vector built from the last `k` context tokens (one-hot per
//! window slot, plus a constant bias feature). Log-probabilities, per-token
//! entropy and the exact gradient of `log π(token | context)` all have closed
//! forms, so optimizer updates can be checked against finite differences
//! without an autodiff engine.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Token id. Vocabularies here are tiny (a few dozen entries at most).
pub type Token = u16;

/// A raw token sequence (prompt, draft, or completion).
pub type TokenSeq = Vec<Token>;

/// Token vocabulary with a fixed layout for the reserved ids.
///
/// Reserved ids always occupy the low range: BOS=0, EOS=1, SEP_DRAFT=2,
/// SEP_REFINE=3, ANS=4. Payload tokens (digits, bits, ...) start at
/// [`Vocabulary::PAYLOAD_BASE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    size: usize,
}

impl Vocabulary {
    /// Beginning-of-sequence marker; also the left-padding token.
    pub const BOS: Token = 0;
    /// End-of-sequence marker.
    pub const EOS: Token = 1;
    /// Separator inserted before the best draft in an augmented prompt.
    pub const SEP_DRAFT: Token = 2;
    /// Separator closing the draft section of an augmented prompt.
    pub const SEP_REFINE: Token = 3;
    /// Marker preceding the final answer inside a completion.
    pub const ANS: Token = 4;
    /// First id available to task payloads.
    pub const PAYLOAD_BASE: Token = 5;

    /// A vocabulary of `size` tokens. Needs at least 6 (five reserved ids
    /// plus one payload token).
    pub fn with_size(size: usize) -> Result<Self> {
        if size < 6 {
            return Err(Error::config(
                "vocab_size",
                format!("need at least 6 tokens, got {size}"),
            ));
        }
        if size > usize::from(Token::MAX) {
            return Err(Error::config("vocab_size", "vocabulary too large"));
        }
        Ok(Vocabulary { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of payload (non-reserved) tokens.
    pub fn payload_size(&self) -> usize {
        self.size - usize::from(Self::PAYLOAD_BASE)
    }

    pub fn contains(&self, token: Token) -> bool {
        usize::from(token) < self.size
    }
}

/// How much window structure the feature vector captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureOrder {
    /// One-hot per window slot: dimension `k·|V| + 1`.
    Unary,
    /// Unary block plus a one-hot per unordered slot pair: dimension
    /// `k·|V| + C(k,2)·|V|² + 1`. Lets the linear policy represent
    /// pairwise token interactions (carries, XOR) that the unary map cannot.
    Pairwise,
}

/// Sparse binary featurization of the last `k` context tokens.
///
/// Slot `s` refers to the token `s` positions back from the end of the
/// context; contexts shorter than `k` are left-padded with BOS so the vector
/// always has the same number of active entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMap {
    vocab: Vocabulary,
    window: usize,
    order: FeatureOrder,
}

impl FeatureMap {
    pub fn new(vocab: Vocabulary, window: usize, order: FeatureOrder) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("window_k", "window must be at least 1"));
        }
        Ok(FeatureMap {
            vocab,
            window,
            order,
        })
    }

    pub fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn order(&self) -> FeatureOrder {
        self.order
    }

    /// Total feature dimension, including the bias feature.
    pub fn dimension(&self) -> usize {
        let v = self.vocab.size();
        let k = self.window;
        let unary = k * v;
        match self.order {
            FeatureOrder::Unary => unary + 1,
            FeatureOrder::Pairwise => unary + (k * (k - 1) / 2) * v * v + 1,
        }
    }

    /// Number of active (one-valued) features for any context.
    pub fn active_count(&self) -> usize {
        let k = self.window;
        match self.order {
            FeatureOrder::Unary => k + 1,
            FeatureOrder::Pairwise => k + k * (k - 1) / 2 + 1,
        }
    }

    /// Token occupying window slot `s` (0 = most recent), BOS-padded.
    fn slot_token(&self, context: &[Token], s: usize) -> Token {
        if s < context.len() {
            context[context.len() - 1 - s]
        } else {
            Vocabulary::BOS
        }
    }

    /// Indices of the active features for `context`, in a fixed order.
    pub fn active_indices(&self, context: &[Token]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.active_count());
        self.fill_active_indices(context, &mut out);
        out
    }

    /// Same as [`active_indices`](Self::active_indices) but reusing a buffer.
    pub fn fill_active_indices(&self, context: &[Token], out: &mut Vec<usize>) {
        out.clear();
        let v = self.vocab.size();
        let k = self.window;
        for s in 0..k {
            out.push(s * v + usize::from(self.slot_token(context, s)));
        }
        if let FeatureOrder::Pairwise = self.order {
            let base = k * v;
            let mut pair = 0usize;
            for s1 in 0..k {
                let t1 = usize::from(self.slot_token(context, s1));
                for s2 in (s1 + 1)..k {
                    let t2 = usize::from(self.slot_token(context, s2));
                    out.push(base + pair * v * v + t1 * v + t2);
                    pair += 1;
                }
            }
        }
        out.push(self.dimension() - 1); // bias
    }

    /// Dense feature vector; mostly useful for tests and illustration.
    pub fn dense(&self, context: &[Token]) -> Vec<f64> {
        let mut phi = vec![0.0; self.dimension()];
        for idx in self.active_indices(context) {
            phi[idx] = 1.0;
        }
        phi
    }
}

/// Dense row-major matrix shaped like the policy weights (`|V| × dim`).
///
/// Used both for the weights themselves and for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        WeightMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self += a · other`, matching shapes required.
    pub fn axpy(&mut self, a: f64, other: &WeightMatrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute entry.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Parameters θ of the policy: a weight matrix plus its feature map.
///
/// Snapshots (θ_old) and the frozen reference policy are separate cloned
/// instances; the version tag counts gradient updates applied to this one.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    features: FeatureMap,
    weights: WeightMatrix,
    version: u64,
}

impl PolicyParams {
    /// Zero-initialized parameters: the exact uniform policy at any context.
    pub fn zeroed(features: FeatureMap) -> Self {
        let weights = WeightMatrix::zeros(features.vocab().size(), features.dimension());
        PolicyParams {
            features,
            weights,
            version: 0,
        }
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn vocab(&self) -> Vocabulary {
        self.features.vocab()
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightMatrix {
        &mut self.weights
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Gradient-ascent step `θ ← θ + lr · grad`; bumps the version tag.
    pub fn ascend(&mut self, lr: f64, grad: &WeightMatrix) {
        self.weights.axpy(lr, grad);
        self.version += 1;
    }

    /// Fresh zero matrix shaped like these weights.
    pub fn grad_buffer(&self) -> WeightMatrix {
        WeightMatrix::zeros(self.weights.rows(), self.weights.cols())
    }
}

/// Raw scores `W · φ(context)` for every token in the vocabulary.
pub fn logits(params: &PolicyParams, context: &[Token]) -> Result<Vec<f64>> {
    if context.is_empty() {
        return Err(Error::InvalidInput("logits of an empty context".into()));
    }
    let active = params.features.active_indices(context);
    let out = logits_from_active(params, &active)?;
    Ok(out)
}

fn logits_from_active(params: &PolicyParams, active: &[usize]) -> Result<Vec<f64>> {
    let v = params.vocab().size();
    let cols = params.weights.cols();
    let data = params.weights.as_slice();
    let mut out = vec![0.0; v];
    for (r, logit) in out.iter_mut().enumerate() {
        let row = &data[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for &c in active {
            acc += row[c];
        }
        *logit = acc;
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalState(
            "non-finite logit; policy weights are corrupt".into(),
        ));
    }
    Ok(out)
}

/// Numerically stable log-softmax (max subtraction).
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    scores.iter().map(|z| z - lse).collect()
}

/// `log π(token | context)` in nats.
pub fn log_prob(params: &PolicyParams, context: &[Token], token: Token) -> Result<f64> {
    check_token(params, token)?;
    let z = logits(params, context)?;
    Ok(log_softmax(&z)[usize::from(token)])
}

/// Exact gradient of `log π(token | context)` with respect to the weights:
/// `(onehot(token) − softmax(logits)) ⊗ φ(context)`.
pub fn grad_log_prob(
    params: &PolicyParams,
    context: &[Token],
    token: Token,
) -> Result<WeightMatrix> {
    check_token(params, token)?;
    let mut grad = params.grad_buffer();
    accumulate_grad_log_prob(params, context, token, 1.0, &mut grad)?;
    Ok(grad)
}

/// Adds `coeff · ∇ log π(token | context)` into `acc`, touching only the
/// columns active for this context.
pub fn accumulate_grad_log_prob(
    params: &PolicyParams,
    context: &[Token],
    token: Token,
    coeff: f64,
    acc: &mut WeightMatrix,
) -> Result<()> {
    check_token(params, token)?;
    let z = logits(params, context)?;
    let lp = log_softmax(&z);
    let active = params.features.active_indices(context);
    let cols = acc.cols();
    let data = acc.as_mut_slice();
    for (r, lp_r) in lp.iter().enumerate() {
        let indicator = if r == usize::from(token) { 1.0 } else { 0.0 };
        let delta = coeff * (indicator - lp_r.exp());
        let row = &mut data[r * cols..(r + 1) * cols];
        for &c in &active {
            row[c] += delta;
        }
    }
    Ok(())
}

/// Shannon entropy (nats) of the next-token distribution at `context`.
///
/// Computed as `ln Σ e^{z−max} − Σ p·(z−max)`, which is exact for the uniform
/// zero-weight policy; the result is clamped to `[0, ln |V|]` to absorb
/// rounding at the boundaries.
pub fn token_entropy(params: &PolicyParams, context: &[Token]) -> Result<f64> {
    let z = logits(params, context)?;
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for &zi in &z {
        let e = (zi - max).exp();
        sum += e;
        weighted += e * (zi - max);
    }
    let entropy = sum.ln() - weighted / sum;
    Ok(entropy.clamp(0.0, (params.vocab().size() as f64).ln()))
}

/// Ancestral sampling at temperature 1 until EOS or `max_len` new tokens.
///
/// The returned sequence excludes the prompt and includes the terminal EOS
/// when one was drawn. Deterministic given the rng state.
pub fn sample_sequence<R: Rng>(
    params: &PolicyParams,
    prompt: &[Token],
    max_len: usize,
    rng: &mut R,
) -> Result<TokenSeq> {
    sample_sequence_with_temperature(params, prompt, max_len, 1.0, rng)
}

/// [`sample_sequence`] with a sampling temperature (logits are divided by it).
pub fn sample_sequence_with_temperature<R: Rng>(
    params: &PolicyParams,
    prompt: &[Token],
    max_len: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<TokenSeq> {
    if max_len == 0 {
        return Err(Error::InvalidInput("max_len must be at least 1".into()));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::config("temperature", "must be positive"));
    }
    let mut context = prompt.to_vec();
    let mut out = Vec::new();
    let mut active = Vec::with_capacity(params.features.active_count());
    for _ in 0..max_len {
        params.features.fill_active_indices(&context, &mut active);
        let mut z = logits_from_active(params, &active)?;
        if temperature != 1.0 {
            for zi in &mut z {
                *zi /= temperature;
            }
        }
        let lp = log_softmax(&z);
        let u: f64 = rng.gen();
        let token = sample_from_log_probs(&lp, u);
        out.push(token);
        context.push(token);
        if token == Vocabulary::EOS {
            break;
        }
    }
    Ok(out)
}

/// Inverse-CDF draw over `exp(lp)`; `u` in [0, 1).
fn sample_from_log_probs(lp: &[f64], u: f64) -> Token {
    let mut acc = 0.0;
    for (i, &l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return i as Token;
        }
    }
    (lp.len() - 1) as Token // residual mass from rounding
}

fn check_token(params: &PolicyParams, token: Token) -> Result<()> {
    if !params.vocab().contains(token) {
        return Err(Error::InvalidInput(format!(
            "token {token} outside vocabulary of size {}",
            params.vocab().size()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Weight checkpoint format
// ---------------------------------------------------------------------------

/// Format version for the unary feature map.
const FORMAT_UNARY: u32 = 1;
/// Format version for the pairwise feature map.
const FORMAT_PAIRWISE: u32 = 2;

impl PolicyParams {
    /// Writes the weights as text: a header line `igrpo-policy <format>
    /// <vocab> <k>` followed by one row per line, values at 17 significant
    /// digits (lossless for f64 round-trips).
    pub fn write_weights<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let format = match self.features.order() {
            FeatureOrder::Unary => FORMAT_UNARY,
            FeatureOrder::Pairwise => FORMAT_PAIRWISE,
        };
        writeln!(
            w,
            "igrpo-policy {} {} {}",
            format,
            self.vocab().size(),
            self.features.window()
        )?;
        let cols = self.weights.cols();
        let mut line = String::new();
        for r in 0..self.weights.rows() {
            line.clear();
            for c in 0..cols {
                if c > 0 {
                    line.push(' ');
                }
                write!(line, "{:.16e}", self.weights.get(r, c)).expect("write to string");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parses the format produced by [`write_weights`](Self::write_weights).
    pub fn read_weights<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::CorruptCheckpoint("empty file".into()))?
            .map_err(|e| Error::CorruptCheckpoint(format!("read header: {e}")))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "igrpo-policy" {
            return Err(Error::CorruptCheckpoint(format!(
                "bad header line: {header:?}"
            )));
        }
        let format: u32 = parse_field(fields[1], "format version")?;
        let vocab_size: usize = parse_field(fields[2], "vocabulary size")?;
        let window: usize = parse_field(fields[3], "window")?;
        let order = match format {
            FORMAT_UNARY => FeatureOrder::Unary,
            FORMAT_PAIRWISE => FeatureOrder::Pairwise,
            other => {
                return Err(Error::CorruptCheckpoint(format!(
                    "unknown format version {other}"
                )))
            }
        };
        let vocab = Vocabulary::with_size(vocab_size)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let features =
            FeatureMap::new(vocab, window, order).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let mut params = PolicyParams::zeroed(features);
        let cols = params.weights.cols();
        for r in 0..vocab_size {
            let line = lines
                .next()
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing weight row {r}")))?
                .map_err(|e| Error::CorruptCheckpoint(format!("read row {r}: {e}")))?;
            let mut count = 0;
            for (c, value) in line.split_whitespace().enumerate() {
                if c >= cols {
                    return Err(Error::CorruptCheckpoint(format!(
                        "row {r} has more than {cols} values"
                    )));
                }
                let value: f64 = value.parse().map_err(|_| {
                    Error::CorruptCheckpoint(format!("row {r} column {c}: bad float"))
                })?;
                params.weights.set(r, c, value);
                count += 1;
            }
            if count != cols {
                return Err(Error::CorruptCheckpoint(format!(
                    "row {r} has {count} values, expected {cols}"
                )));
            }
        }
        Ok(params)
    }

    pub fn save_weights(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_weights(&mut w)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load_weights(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read_weights(std::io::BufReader::new(file))
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::CorruptCheckpoint(format!("bad {what}: {s:?}")))
}
