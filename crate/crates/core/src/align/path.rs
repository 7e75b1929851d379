use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::AlignmentParams;

use super::scoring::{Scorer, State};
use super::AlignError;

/// One column of a pairwise alignment. Indices are 0-based positions in the
/// truth (`i`) and stt (`j`) sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignOp {
    /// `truth[i]` aligned with `stt[j]`, equal or not.
    MatchOrSub(usize, usize),
    /// `stt[j]` aligned with a gap in truth.
    GapInTruth(usize),
    /// `truth[i]` aligned with a gap in stt.
    GapInStt(usize),
}

/// A complete global alignment and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub ops: Vec<AlignOp>,
    pub score: f64,
    pub truth_len: usize,
    pub stt_len: usize,
}

impl AlignmentPath {
    /// Checks that the ops consume both sequences exactly once, in order.
    pub fn validate(&self) -> Result<(), AlignError> {
        let (mut i, mut j) = (0usize, 0usize);
        for (k, op) in self.ops.iter().enumerate() {
            let ok = match *op {
                AlignOp::MatchOrSub(a, b) => {
                    let ok = a == i && b == j;
                    i += 1;
                    j += 1;
                    ok
                }
                AlignOp::GapInTruth(b) => {
                    let ok = b == j;
                    j += 1;
                    ok
                }
                AlignOp::GapInStt(a) => {
                    let ok = a == i;
                    i += 1;
                    ok
                }
            };
            if !ok {
                return Err(AlignError::InconsistentPath(format!(
                    "op {k} ({op:?}) out of sequence"
                )));
            }
        }
        if i != self.truth_len || j != self.stt_len {
            return Err(AlignError::InconsistentPath(format!(
                "path consumes {i}x{j} symbols, expected {}x{}",
                self.truth_len, self.stt_len
            )));
        }
        Ok(())
    }

    /// Run-length encoded ops: `M` pair, `T` gap in truth, `S` gap in stt.
    pub fn to_rle_json(&self) -> serde_json::Value {
        let mut runs: Vec<(char, usize)> = Vec::new();
        for op in &self.ops {
            let c = match op {
                AlignOp::MatchOrSub(..) => 'M',
                AlignOp::GapInTruth(_) => 'T',
                AlignOp::GapInStt(_) => 'S',
            };
            match runs.last_mut() {
                Some((last, n)) if *last == c => *n += 1,
                _ => runs.push((c, 1)),
            }
        }
        serde_json::to_value(RleDump {
            truth_len: self.truth_len,
            stt_len: self.stt_len,
            score: self.score,
            runs: runs.into_iter().map(|(c, n)| (c.to_string(), n)).collect(),
        })
        .expect("dump serializes")
    }

    pub fn from_rle_json(value: &serde_json::Value) -> Result<Self, AlignError> {
        let dump: RleDump = serde_json::from_value(value.clone())
            .map_err(|e| AlignError::InconsistentPath(e.to_string()))?;
        let (mut i, mut j) = (0, 0);
        let mut ops = Vec::new();
        for (kind, n) in dump.runs {
            for _ in 0..n {
                match kind.as_str() {
                    "M" => {
                        ops.push(AlignOp::MatchOrSub(i, j));
                        i += 1;
                        j += 1;
                    }
                    "T" => {
                        ops.push(AlignOp::GapInTruth(j));
                        j += 1;
                    }
                    "S" => {
                        ops.push(AlignOp::GapInStt(i));
                        i += 1;
                    }
                    other => {
                        return Err(AlignError::InconsistentPath(format!("unknown run {other:?}")))
                    }
                }
            }
        }
        let path = AlignmentPath {
            ops,
            score: dump.score,
            truth_len: dump.truth_len,
            stt_len: dump.stt_len,
        };
        path.validate()?;
        Ok(path)
    }
}

#[derive(Serialize, Deserialize)]
struct RleDump {
    truth_len: usize,
    stt_len: usize,
    score: f64,
    runs: Vec<(String, usize)>,
}

/// Sums per-operation costs left to right, starting after `prev` with `i`
/// truth and `j` stt symbols consumed.
pub(crate) fn score_ops<T: PartialEq>(
    ops: &[AlignOp],
    truth: &[T],
    stt: &[T],
    sc: &Scorer,
    mut i: usize,
    mut j: usize,
    mut prev: State,
) -> f64 {
    let mut total = 0.0;
    for op in ops {
        total += sc.op_cost(prev, op, i, j, truth, stt);
        match op {
            AlignOp::MatchOrSub(..) => {
                i += 1;
                j += 1;
            }
            AlignOp::GapInTruth(_) => j += 1,
            AlignOp::GapInStt(_) => i += 1,
        }
        prev = State::of(op);
    }
    total
}

/// Score of `path` under `params`: pairs score match or mismatch, a gap run
/// of length `k` scores `open + (k - 1) * extend` with the boundary class of
/// the run, accumulated op by op.
pub fn rescore_path<T: PartialEq>(
    path: &AlignmentPath,
    truth: &[T],
    stt: &[T],
    params: &AlignmentParams,
) -> Result<f64, AlignError> {
    if path.truth_len != truth.len() || path.stt_len != stt.len() {
        return Err(AlignError::InconsistentPath(format!(
            "path is for {}x{} symbols, sequences are {}x{}",
            path.truth_len,
            path.stt_len,
            truth.len(),
            stt.len()
        )));
    }
    path.validate()?;
    let sc = Scorer::new(params, truth.len(), stt.len());
    Ok(score_ops(&path.ops, truth, stt, &sc, 0, 0, State::Pair))
}

/// Per-truth-symbol lookups over a path, for projecting many ranges.
#[derive(Debug, Clone)]
pub struct PathIndex {
    /// stt index paired with each truth symbol, if any.
    truth_to_stt: Vec<Option<usize>>,
    /// Index into `ops` of the op consuming each truth symbol.
    truth_op: Vec<usize>,
    /// Symbols consumed before each op, as (truth, stt).
    before: Vec<(usize, usize)>,
}

impl PathIndex {
    pub fn new(path: &AlignmentPath) -> Self {
        let mut truth_to_stt = vec![None; path.truth_len];
        let mut truth_op = vec![0; path.truth_len];
        let mut before = Vec::with_capacity(path.ops.len());
        let (mut i, mut j) = (0, 0);
        for (k, op) in path.ops.iter().enumerate() {
            before.push((i, j));
            match *op {
                AlignOp::MatchOrSub(a, b) => {
                    truth_to_stt[a] = Some(b);
                    truth_op[a] = k;
                    i += 1;
                    j += 1;
                }
                AlignOp::GapInStt(a) => {
                    truth_op[a] = k;
                    i += 1;
                }
                AlignOp::GapInTruth(_) => j += 1,
            }
        }
        PathIndex {
            truth_to_stt,
            truth_op,
            before,
        }
    }

    /// Minimal stt range covering every pair whose truth index lies in
    /// `truth_range`; `None` when the range aligns entirely to gaps.
    pub fn project(&self, truth_range: Range<usize>) -> Result<Option<Range<usize>>, AlignError> {
        if truth_range.start > truth_range.end || truth_range.end > self.truth_to_stt.len() {
            return Err(AlignError::OutOfBounds(format!(
                "truth range {truth_range:?} outside 0..{}",
                self.truth_to_stt.len()
            )));
        }
        let mut paired = self.truth_to_stt[truth_range].iter().flatten();
        let Some(&first) = paired.next() else {
            return Ok(None);
        };
        let last = paired.last().copied().unwrap_or(first);
        Ok(Some(first..last + 1))
    }

    /// Range of op indices from the op consuming `truth_range.start` to the
    /// op consuming `truth_range.end - 1`.
    pub fn op_range(&self, truth_range: Range<usize>) -> Option<Range<usize>> {
        if truth_range.is_empty() || truth_range.end > self.truth_op.len() {
            return None;
        }
        Some(self.truth_op[truth_range.start]..self.truth_op[truth_range.end - 1] + 1)
    }

    /// Score of the sub-path spanning `truth_range` (including gaps in truth
    /// between its first and last truth symbol), priced in the context of
    /// the whole path.
    pub fn segment_score<T: PartialEq>(
        &self,
        path: &AlignmentPath,
        truth_range: Range<usize>,
        truth: &[T],
        stt: &[T],
        params: &AlignmentParams,
    ) -> Option<f64> {
        let ops = self.op_range(truth_range)?;
        let prev = if ops.start == 0 {
            State::Pair
        } else {
            State::of(&path.ops[ops.start - 1])
        };
        let (i, j) = self.before[ops.start];
        let sc = Scorer::new(params, truth.len(), stt.len());
        Some(score_ops(&path.ops[ops], truth, stt, &sc, i, j, prev))
    }
}

/// Projects a truth index range onto the stt sequence through `path`.
pub fn project_range(
    path: &AlignmentPath,
    truth_range: Range<usize>,
) -> Result<Option<Range<usize>>, AlignError> {
    PathIndex::new(path).project(truth_range)
}
