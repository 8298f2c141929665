//! BLEU, TER, chrF, UNK counting and paired bootstrap resampling.
//!
//! Every metric is computed from additive per-sentence sufficient
//! statistics, so corpus scores, sentence scores and bootstrap samples all
//! go through the same code path.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Sentence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("line count mismatch: {left} vs {right}")]
    LineCountMismatch { left: usize, right: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty reference")]
    EmptyReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Add one to numerator and denominator of every precision with n ≥ 2.
    AddOne,
}

impl FromStr for Smoothing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Smoothing::None),
            "add-one" => Ok(Smoothing::AddOne),
            other => Err(format!("unknown smoothing {other:?} (expected none or add-one)")),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothing::None => "none",
            Smoothing::AddOne => "add-one",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuOptions {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions {
            max_n: 4,
            smoothing: Smoothing::None,
        }
    }
}

impl BleuOptions {
    /// Add-one smoothing, for sentence scores that should not collapse to 0
    /// when a higher order has no matches.
    pub fn add_one() -> Self {
        BleuOptions {
            max_n: 4,
            smoothing: Smoothing::AddOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerOptions {
    pub shifts: bool,
    pub max_shift_len: usize,
    pub max_shift_distance: usize,
}

impl Default for TerOptions {
    fn default() -> Self {
        TerOptions {
            shifts: true,
            max_shift_len: 10,
            max_shift_distance: 50,
        }
    }
}

impl TerOptions {
    pub fn no_shifts() -> Self {
        TerOptions {
            shifts: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfOptions {
    pub max_n: usize,
    pub beta: f64,
    pub strip_whitespace: bool,
}

impl Default for ChrfOptions {
    fn default() -> Self {
        ChrfOptions {
            max_n: 6,
            beta: 3.0,
            strip_whitespace: true,
        }
    }
}

/// A corpus-level metric with its options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Bleu(BleuOptions),
    Ter(TerOptions),
    Chrf(ChrfOptions),
}

impl Metric {
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Metric::Ter(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Bleu(_) => "BLEU",
            Metric::Ter(_) => "TER",
            Metric::Chrf(_) => "chrF",
        }
    }

    fn stats_len(&self) -> usize {
        match self {
            Metric::Bleu(o) => 2 * o.max_n + 2,
            Metric::Ter(_) => 2,
            Metric::Chrf(o) => 3 * o.max_n,
        }
    }

    /// Additive sufficient statistics of one sentence pair.
    pub fn sentence_stats(&self, hyp: &Sentence, reference: &Sentence) -> Vec<f64> {
        match self {
            Metric::Bleu(o) => bleu_stats(hyp, reference, o.max_n),
            Metric::Ter(o) => {
                let (edits, len) = ter_edits(hyp, reference, o);
                vec![edits as f64, len as f64]
            }
            Metric::Chrf(o) => chrf_stats(hyp, reference, o),
        }
    }

    /// Score from summed statistics.
    pub fn score_from_stats(&self, stats: &[f64]) -> f64 {
        match self {
            Metric::Bleu(o) => bleu_from_stats(stats, o),
            Metric::Ter(_) => {
                if stats[1] == 0.0 {
                    if stats[0] == 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    stats[0] / stats[1]
                }
            }
            Metric::Chrf(o) => chrf_from_stats(stats, o),
        }
    }

    /// Corpus score over line-parallel streams.
    pub fn corpus_score(&self, hyps: &[Sentence], refs: &[Sentence]) -> Result<f64, MetricsError> {
        check_parallel(hyps.len(), refs.len())?;
        let mut total = vec![0.0; self.stats_len()];
        for (h, r) in hyps.iter().zip(refs) {
            add_into(&mut total, &self.sentence_stats(h, r));
        }
        Ok(self.score_from_stats(&total))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(Metric::Bleu(BleuOptions::default())),
            "ter" => Ok(Metric::Ter(TerOptions::default())),
            "chrf" | "chrf3" => Ok(Metric::Chrf(ChrfOptions::default())),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

fn check_parallel(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LineCountMismatch { left, right });
    }
    if left == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(())
}

fn add_into(total: &mut [f64], stats: &[f64]) {
    for (t, s) in total.iter_mut().zip(stats) {
        *t += s;
    }
}

fn ngram_counts<T: Eq + std::hash::Hash>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n == 0 || items.len() < n {
        return counts;
    }
    for w in items.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
    counts
}

fn clipped_matches<T: Eq + std::hash::Hash>(hyp: &HashMap<&[T], u64>, reference: &HashMap<&[T], u64>) -> u64 {
    hyp.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// `[match_1, total_1, …, match_N, total_N, hyp_len, ref_len]`.
fn bleu_stats(hyp: &Sentence, reference: &Sentence, max_n: usize) -> Vec<f64> {
    let h: Vec<&str> = hyp.surfaces().collect();
    let r: Vec<&str> = reference.surfaces().collect();
    let mut out = Vec::with_capacity(2 * max_n + 2);
    for n in 1..=max_n {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        out.push(clipped_matches(&hc, &rc) as f64);
        out.push(h.len().saturating_sub(n - 1) as f64);
    }
    out.push(h.len() as f64);
    out.push(r.len() as f64);
    out
}

/// Geometric mean of clipped precisions times the brevity penalty, on
/// [0, 100]. Orders for which the hypothesis has no n-grams at all are left
/// out of the mean.
fn bleu_from_stats(stats: &[f64], options: &BleuOptions) -> f64 {
    let n = options.max_n;
    let hyp_len = stats[2 * n];
    let ref_len = stats[2 * n + 1];
    if hyp_len == 0.0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for i in 0..n {
        let (mut matches, mut total) = (stats[2 * i], stats[2 * i + 1]);
        if total == 0.0 {
            continue;
        }
        if i > 0 && options.smoothing == Smoothing::AddOne {
            matches += 1.0;
            total += 1.0;
        }
        if matches == 0.0 {
            return 0.0;
        }
        log_sum += (matches / total).ln();
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len / hyp_len).exp()
    } else {
        1.0
    };
    (100.0 * bp * (log_sum / orders as f64).exp()).clamp(0.0, 100.0)
}

/// Corpus BLEU over line-parallel streams.
pub fn bleu(hyps: &[Sentence], refs: &[Sentence], options: BleuOptions) -> Result<f64, MetricsError> {
    Metric::Bleu(options).corpus_score(hyps, refs)
}

pub fn sentence_bleu(hyp: &Sentence, reference: &Sentence, options: BleuOptions) -> f64 {
    let m = Metric::Bleu(options);
    m.score_from_stats(&m.sentence_stats(hyp, reference))
}

/// Word-level Levenshtein distance, all edits cost 1.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Moves `block_len` items starting at `start` so that they begin at `dest`
/// in the resulting sequence.
pub fn apply_shift<T: Clone>(items: &[T], start: usize, block_len: usize, dest: usize) -> Vec<T> {
    let mut rest: Vec<T> = Vec::with_capacity(items.len());
    rest.extend_from_slice(&items[..start]);
    rest.extend_from_slice(&items[start + block_len..]);
    let mut out = Vec::with_capacity(items.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(&items[start..start + block_len]);
    out.extend_from_slice(&rest[dest..]);
    out
}

/// Error flags and alignment from one minimal edit path.
struct EditTrace {
    distance: usize,
    hyp_err: Vec<bool>,
    ref_err: Vec<bool>,
    /// For each reference position, the hypothesis position it follows or
    /// matches (`-1` before the first hypothesis token).
    align: Vec<isize>,
}

#[derive(Clone, Copy, PartialEq)]
enum EditOp {
    Keep,
    Sub,
    HypExtra,
    RefMissing,
}

/// Levenshtein with a backtrace. Ties prefer match/substitution, then a
/// surplus hypothesis token, then a missing reference token.
fn edit_trace(hyp: &[&str], reference: &[&str]) -> EditTrace {
    let (n, m) = (hyp.len(), reference.len());
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    let mut op = vec![vec![EditOp::Keep; m + 1]; n + 1];
    for i in 1..=n {
        cost[i][0] = i;
        op[i][0] = EditOp::HypExtra;
    }
    for j in 1..=m {
        cost[0][j] = j;
        op[0][j] = EditOp::RefMissing;
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = hyp[i - 1] == reference[j - 1];
            let mut best = (
                cost[i - 1][j - 1] + usize::from(!same),
                if same { EditOp::Keep } else { EditOp::Sub },
            );
            if cost[i - 1][j] + 1 < best.0 {
                best = (cost[i - 1][j] + 1, EditOp::HypExtra);
            }
            if cost[i][j - 1] + 1 < best.0 {
                best = (cost[i][j - 1] + 1, EditOp::RefMissing);
            }
            cost[i][j] = best.0;
            op[i][j] = best.1;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let o = op[i][j];
        path.push(o);
        match o {
            EditOp::Keep | EditOp::Sub => {
                i -= 1;
                j -= 1;
            }
            EditOp::HypExtra => i -= 1,
            EditOp::RefMissing => j -= 1,
        }
    }
    path.reverse();
    let mut trace = EditTrace {
        distance: cost[n][m],
        hyp_err: Vec::with_capacity(n),
        ref_err: Vec::with_capacity(m),
        align: Vec::with_capacity(m),
    };
    let mut h: isize = -1;
    for o in path {
        match o {
            EditOp::Keep | EditOp::Sub => {
                h += 1;
                let err = o == EditOp::Sub;
                trace.hyp_err.push(err);
                trace.ref_err.push(err);
                trace.align.push(h);
            }
            EditOp::HypExtra => {
                h += 1;
                trace.hyp_err.push(true);
            }
            EditOp::RefMissing => {
                trace.ref_err.push(true);
                trace.align.push(h);
            }
        }
    }
    trace
}

/// Moves the block `[start, start + len)` so it sits before position
/// `target` of the original sequence. A target inside the block moves it
/// right by `target - start`, stopping at the end.
fn shift_before<T: Clone>(items: &[T], start: usize, len: usize, target: usize) -> Vec<T> {
    let dest = if target > start + len { target - len } else { target };
    apply_shift(items, start, len, dest.min(items.len() - len))
}

/// Orders shift candidates: gain, block length, then earlier start and
/// earlier target.
type ShiftRank = (usize, usize, Reverse<usize>, Reverse<usize>);

/// Greedy shift search: returns `(shifts, remaining edit distance)`.
///
/// Candidates are hypothesis blocks that equal a reference block, where
/// neither side is already an exact match in the current edit path. Each
/// candidate is tried at the hypothesis positions aligned just before and
/// within the reference block. The shift with the largest distance
/// reduction wins; ties prefer longer blocks, then earlier starts, then
/// earlier targets.
fn greedy_shifts(hyp: &[&str], reference: &[&str], options: &TerOptions) -> (usize, usize) {
    let mut current: Vec<&str> = hyp.to_vec();
    let mut trace = edit_trace(&current, reference);
    let mut shifts = 0;
    if !options.shifts {
        return (0, trace.distance);
    }
    while trace.distance > 0 {
        let n = current.len();
        let mut best: Option<(ShiftRank, Vec<&str>, EditTrace)> = None;
        for start in 0..n {
            for ref_start in 0..reference.len() {
                if start.abs_diff(ref_start) > options.max_shift_distance {
                    continue;
                }
                let mut len = 0;
                while len < options.max_shift_len
                    && start + len < n
                    && ref_start + len < reference.len()
                    && current[start + len] == reference[ref_start + len]
                {
                    len += 1;
                    if !trace.hyp_err[start..start + len].iter().any(|&e| e)
                        || !trace.ref_err[ref_start..ref_start + len].iter().any(|&e| e)
                    {
                        continue;
                    }
                    let anchor = trace.align[ref_start];
                    if anchor >= start as isize && anchor < (start + len) as isize {
                        continue;
                    }
                    let mut previous = None;
                    for offset in -1..len as isize {
                        let k = ref_start as isize + offset;
                        let target = if k < 0 {
                            0
                        } else {
                            (trace.align[k as usize] + 1) as usize
                        };
                        if previous == Some(target) {
                            continue;
                        }
                        previous = Some(target);
                        let shifted = shift_before(&current, start, len, target);
                        if shifted == current {
                            continue;
                        }
                        let t = edit_trace(&shifted, reference);
                        if t.distance >= trace.distance {
                            continue;
                        }
                        let rank = (trace.distance - t.distance, len, Reverse(start), Reverse(target));
                        if best.as_ref().is_none_or(|(r, _, _)| rank > *r) {
                            best = Some((rank, shifted, t));
                        }
                    }
                }
            }
        }
        match best {
            Some((_, shifted, t)) => {
                current = shifted;
                trace = t;
                shifts += 1;
            }
            None => break,
        }
    }
    (shifts, trace.distance)
}

/// Returns `(edits, reference length)`, shifts counted as one edit each.
fn ter_edits(hyp: &Sentence, reference: &Sentence, options: &TerOptions) -> (usize, usize) {
    let e = ter_breakdown(hyp, reference, *options);
    (e.shifts + e.distance, e.reference_len)
}

/// Edit counts behind one TER score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerEdits {
    pub shifts: usize,
    /// Insertions, deletions and substitutions left after shifting.
    pub distance: usize,
    pub reference_len: usize,
}

pub fn ter_breakdown(hyp: &Sentence, reference: &Sentence, options: TerOptions) -> TerEdits {
    let h: Vec<&str> = hyp.surfaces().collect();
    let r: Vec<&str> = reference.surfaces().collect();
    let (shifts, distance) = greedy_shifts(&h, &r, &options);
    TerEdits {
        shifts,
        distance,
        reference_len: r.len(),
    }
}

/// Sentence TER: edits divided by reference length.
pub fn ter(hyp: &Sentence, reference: &Sentence, options: TerOptions) -> Result<f64, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let (edits, len) = ter_edits(hyp, reference, &options);
    Ok(edits as f64 / len as f64)
}

/// Corpus TER: total edits over total reference length.
pub fn corpus_ter(hyps: &[Sentence], refs: &[Sentence], options: TerOptions) -> Result<f64, MetricsError> {
    if refs.iter().all(Sentence::is_empty) && !refs.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    Metric::Ter(options).corpus_score(hyps, refs)
}

fn chrf_chars(sentence: &Sentence, strip_whitespace: bool) -> Vec<char> {
    if strip_whitespace {
        sentence.surfaces().flat_map(str::chars).collect()
    } else {
        sentence.surface_text().chars().collect()
    }
}

/// `[match_n, hyp_n, ref_n]` for each order n.
fn chrf_stats(hyp: &Sentence, reference: &Sentence, options: &ChrfOptions) -> Vec<f64> {
    let h = chrf_chars(hyp, options.strip_whitespace);
    let r = chrf_chars(reference, options.strip_whitespace);
    let mut out = Vec::with_capacity(3 * options.max_n);
    for n in 1..=options.max_n {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        out.push(clipped_matches(&hc, &rc) as f64);
        out.push(h.len().saturating_sub(n - 1) as f64);
        out.push(r.len().saturating_sub(n - 1) as f64);
    }
    out
}

/// Character n-gram F-score on [0, 100]. Precision and recall are
/// averaged over the orders that both sides have n-grams for.
fn chrf_from_stats(stats: &[f64], options: &ChrfOptions) -> f64 {
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut orders = 0;
    for n in 0..options.max_n {
        let (m, h, r) = (stats[3 * n], stats[3 * n + 1], stats[3 * n + 2]);
        if h == 0.0 || r == 0.0 {
            continue;
        }
        precision += m / h;
        recall += m / r;
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    precision /= orders as f64;
    recall /= orders as f64;
    if precision == 0.0 && recall == 0.0 {
        return 0.0;
    }
    let b2 = options.beta * options.beta;
    (100.0 * (1.0 + b2) * precision * recall / (b2 * precision + recall)).clamp(0.0, 100.0)
}

pub fn chrf(hyp: &Sentence, reference: &Sentence, options: ChrfOptions) -> f64 {
    let m = Metric::Chrf(options);
    m.score_from_stats(&m.sentence_stats(hyp, reference))
}

pub fn corpus_chrf(hyps: &[Sentence], refs: &[Sentence], options: ChrfOptions) -> Result<f64, MetricsError> {
    Metric::Chrf(options).corpus_score(hyps, refs)
}

/// Number of whole-token occurrences of `unk_token`.
pub fn count_unks<'a, I>(hyps: I, unk_token: &str) -> usize
where
    I: IntoIterator<Item = &'a Sentence>,
{
    hyps.into_iter()
        .map(|s| s.surfaces().filter(|t| *t == unk_token).count())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub sample_size: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            sample_size: 1000,
            iterations: 1000,
            alpha: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceReport {
    pub metric: &'static str,
    pub score_a: f64,
    pub score_b: f64,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    /// `(wins_a + ties / 2) / iterations`.
    pub win_fraction: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Paired bootstrap resampling: draws `sample_size` sentence indices with
/// replacement per iteration and scores both systems on the sample.
///
/// Iteration `i` draws from its own ChaCha stream, so reports are
/// reproducible for a given seed.
pub fn bootstrap_significance(
    hyps_a: &[Sentence],
    hyps_b: &[Sentence],
    refs: &[Sentence],
    metric: Metric,
    options: BootstrapOptions,
) -> Result<SignificanceReport, MetricsError> {
    check_parallel(hyps_a.len(), refs.len())?;
    check_parallel(hyps_b.len(), refs.len())?;
    let stats_a: Vec<Vec<f64>> = hyps_a
        .iter()
        .zip(refs)
        .map(|(h, r)| metric.sentence_stats(h, r))
        .collect();
    let stats_b: Vec<Vec<f64>> = hyps_b
        .iter()
        .zip(refs)
        .map(|(h, r)| metric.sentence_stats(h, r))
        .collect();

    let width = metric.stats_len();
    let sum_all = |stats: &[Vec<f64>]| {
        let mut t = vec![0.0; width];
        for s in stats {
            add_into(&mut t, s);
        }
        t
    };
    let score_a = metric.score_from_stats(&sum_all(&stats_a));
    let score_b = metric.score_from_stats(&sum_all(&stats_b));

    let n = refs.len();
    let sample_size = if options.sample_size == 0 {
        n
    } else {
        options.sample_size
    };
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut total_a = vec![0.0; width];
    let mut total_b = vec![0.0; width];
    for iteration in 0..options.iterations {
        rng.set_stream(iteration as u64);
        rng.set_word_pos(0);
        total_a.iter_mut().for_each(|x| *x = 0.0);
        total_b.iter_mut().for_each(|x| *x = 0.0);
        for _ in 0..sample_size {
            let i = rng.random_range(0..n);
            add_into(&mut total_a, &stats_a[i]);
            add_into(&mut total_b, &stats_b[i]);
        }
        let a = metric.score_from_stats(&total_a);
        let b = metric.score_from_stats(&total_b);
        let a_better = if metric.higher_is_better() { a > b } else { a < b };
        if a == b {
            ties += 1;
        } else if a_better {
            wins_a += 1;
        } else {
            wins_b += 1;
        }
    }
    let iterations = options.iterations.max(1) as f64;
    let win_fraction = (wins_a as f64 + 0.5 * ties as f64) / iterations;
    let p_value = 1.0 - win_fraction;
    Ok(SignificanceReport {
        metric: metric.name(),
        score_a,
        score_b,
        wins_a,
        wins_b,
        ties,
        win_fraction,
        p_value,
        significant: p_value < options.alpha,
    })
}
