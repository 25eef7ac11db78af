//! Loss and score formulas: dice loss, the combined training loss, CTC
//! forward loss with greedy decoding, and CR/AR edit rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, FloatMap};

/// CTC blank class.
pub const BLANK: usize = 0;

/// `1 - 2ΣPG / (ΣP² + ΣG²)`, defined as 0 when both maps are all zero.
pub fn dice_loss(pred: &FloatMap, gt: &BinaryMask) -> Result<f64> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(v) = pred.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!("prediction value {v} outside [0, 1]")));
    }
    let (mut pg, mut pp, mut gg) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let g = if g { 1.0 } else { 0.0 };
        pg += p * g;
        pp += p * p;
        gg += g;
    }
    if pp + gg == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - 2.0 * pg / (pp + gg))
}

/// Weight of the kernel loss in the combined loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    alpha: f64,
}

impl LossWeights {
    pub const DEFAULT_ALPHA: f64 = 0.1;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: Self::DEFAULT_ALPHA }
    }
}

/// `l_text + alpha * l_kernel`.
pub fn combined_loss(l_text: f64, l_kernel: f64, w: LossWeights) -> f64 {
    l_text + w.alpha * l_kernel
}

/// Per-timestep class probabilities, class 0 being the CTC blank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ProbMatrix {
    timesteps: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(timesteps: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if timesteps == 0 || classes == 0 {
            return Err(Error::InvalidProbabilities(format!(
                "need at least one timestep and one class, got {timesteps}x{classes}"
            )));
        }
        if data.len() != timesteps * classes {
            return Err(Error::InvalidProbabilities(format!(
                "expected {} entries, got {}",
                timesteps * classes,
                data.len()
            )));
        }
        for (t, row) in data.chunks_exact(classes).enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidProbabilities(format!("row {t} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidProbabilities(format!("row {t} sums to {sum}")));
            }
        }
        Ok(Self { timesteps, classes, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidProbabilities("ragged rows".into()));
        }
        let t = rows.len();
        Self::new(t, classes, rows.into_iter().flatten().collect())
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }
}

impl TryFrom<Vec<Vec<f64>>> for ProbMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<ProbMatrix> for Vec<Vec<f64>> {
    fn from(m: ProbMatrix) -> Self {
        m.data.chunks_exact(m.classes).map(<[f64]>::to_vec).collect()
    }
}

/// Label sequence without blanks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LabelSeq {
    symbols: Vec<usize>,
}

impl LabelSeq {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.contains(&BLANK) {
            return Err(Error::InvalidLabels("label sequence contains the blank class".into()));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Shortest alignment length: one step per symbol plus a blank between repeats.
    pub fn min_timesteps(&self) -> usize {
        self.symbols.len() + self.symbols.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

impl TryFrom<Vec<usize>> for LabelSeq {
    type Error = Error;

    fn try_from(symbols: Vec<usize>) -> Result<Self> {
        Self::new(symbols)
    }
}

impl From<LabelSeq> for Vec<usize> {
    fn from(l: LabelSeq) -> Self {
        l.symbols
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Negative log-likelihood of `labels` under `probs`, summed over every
/// blank-augmented alignment by the forward recursion in log space.
pub fn ctc_forward_loss(probs: &ProbMatrix, labels: &LabelSeq) -> Result<f64> {
    if let Some(&s) = labels.symbols().iter().find(|&&s| s >= probs.classes()) {
        return Err(Error::InvalidLabels(format!(
            "label {s} out of range for {} classes",
            probs.classes()
        )));
    }
    let required = labels.min_timesteps();
    if probs.timesteps() < required {
        return Err(Error::InfeasibleLength { required, available: probs.timesteps() });
    }
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(BLANK);
    for &s in labels.symbols() {
        ext.push(s);
        ext.push(BLANK);
    }
    let s_len = ext.len();
    let lp = |t: usize, c: usize| probs.row(t)[c].ln();

    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = lp(0, ext[0]);
    if s_len > 1 {
        alpha[1] = lp(0, ext[1]);
    }
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..probs.timesteps() {
        for s in 0..s_len {
            let mut a = alpha[s];
            if s >= 1 {
                a = log_add(a, alpha[s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                a = log_add(a, alpha[s - 2]);
            }
            next[s] = if a == f64::NEG_INFINITY { a } else { a + lp(t, ext[s]) };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let mut total = alpha[s_len - 1];
    if s_len > 1 {
        total = log_add(total, alpha[s_len - 2]);
    }
    Ok(-total)
}

/// Per-step argmax (ties to the lower class), repeats collapsed, blanks dropped.
pub fn ctc_greedy_decode(probs: &ProbMatrix) -> LabelSeq {
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..probs.timesteps() {
        let row = probs.row(t);
        let best = (1..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
        if best != BLANK && prev != Some(best) {
            out.push(best);
        }
        prev = Some(best);
    }
    LabelSeq { symbols: out }
}

/// Outcome of a unit-cost Levenshtein alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    /// Reference length `N = H + S + D`.
    pub fn reference_len(&self) -> usize {
        self.hits + self.substitutions + self.deletions
    }

    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(CR, AR) = ((N - S - D) / N, (N - S - D - I) / N)`.
    pub fn rates(&self) -> Result<(f64, f64)> {
        let n = self.reference_len();
        if n == 0 {
            return Err(Error::EmptyReference);
        }
        let n = n as f64;
        let correct = n - self.substitutions as f64 - self.deletions as f64;
        Ok((correct / n, (correct - self.insertions as f64) / n))
    }
}

impl std::ops::Add for EditCounts {
    type Output = EditCounts;

    fn add(self, o: EditCounts) -> EditCounts {
        EditCounts {
            hits: self.hits + o.hits,
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
        }
    }
}

impl std::iter::Sum for EditCounts {
    fn sum<I: Iterator<Item = EditCounts>>(iter: I) -> Self {
        iter.fold(EditCounts::default(), |a, b| a + b)
    }
}

/// Minimum-cost alignment of `hypothesis` against `reference`. Among equal-cost
/// alignments the backtrace prefers substitution, then insertion, then deletion.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        dp[i * w] = i;
    }
    for j in 0..=m {
        dp[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = dp[i * w + j - 1] + 1;
            let del = dp[(i - 1) * w + j] + 1;
            dp[i * w + j] = sub.min(ins).min(del);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if dp[(i - 1) * w + j - 1] + usize::from(!same) == here {
                if same {
                    counts.hits += 1;
                } else {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dp[i * w + j - 1] + 1 == here {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// Correct rate and accurate rate of `hypothesis` against `reference`.
pub fn cr_ar<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<(f64, f64)> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    align(reference, hypothesis).rates()
}

/// Maps full-width Chinese punctuation to its ASCII counterpart.
pub fn normalize_symbols(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '，' | '、' => ',',
            '。' => '.',
            '“' | '”' | '＂' => '"',
            '‘' | '’' | '＇' => '\'',
            '：' => ':',
            '；' => ';',
            '！' => '!',
            '？' => '?',
            '（' => '(',
            '）' => ')',
            other => other,
        })
        .collect()
}
