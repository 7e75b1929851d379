use crate::ingest::{AlignmentParams, BoundaryGaps, GapScores};

use super::AlignOp;

/// Type of the operation that led into a DP cell. The start of an alignment
/// behaves like a preceding pair: any following gap opens a new run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum State {
    Pair = 0,
    GapInStt = 1,
    GapInTruth = 2,
}

pub(crate) const STATES: [State; 3] = [State::Pair, State::GapInStt, State::GapInTruth];

impl State {
    pub(crate) fn from_bits(b: u8) -> State {
        match b & 3 {
            0 => State::Pair,
            1 => State::GapInStt,
            _ => State::GapInTruth,
        }
    }

    pub(crate) fn of(op: &AlignOp) -> State {
        match op {
            AlignOp::MatchOrSub(..) => State::Pair,
            AlignOp::GapInStt(_) => State::GapInStt,
            AlignOp::GapInTruth(_) => State::GapInTruth,
        }
    }
}

/// Per-problem view of the parameters: resolves the boundary class of a gap
/// from its row (truth position) or column (stt position).
#[derive(Debug, Clone)]
pub(crate) struct Scorer {
    pub n: usize,
    pub m: usize,
    pub match_score: f64,
    pub mismatch_score: f64,
    truth: BoundaryGaps,
    stt: BoundaryGaps,
}

fn class(gaps: &BoundaryGaps, pos: usize, len: usize) -> GapScores {
    if pos == 0 {
        gaps.left
    } else if pos == len {
        gaps.right
    } else {
        gaps.internal
    }
}

impl Scorer {
    pub(crate) fn new(params: &AlignmentParams, n: usize, m: usize) -> Self {
        Scorer {
            n,
            m,
            match_score: params.match_score,
            mismatch_score: params.mismatch_score,
            truth: params.truth,
            stt: params.stt,
        }
    }

    #[inline]
    pub(crate) fn pair(&self, equal: bool) -> f64 {
        if equal {
            self.match_score
        } else {
            self.mismatch_score
        }
    }

    /// Scores of a gap in the stt sequence while `j` stt symbols are consumed.
    #[inline]
    pub(crate) fn stt_gap(&self, j: usize) -> GapScores {
        class(&self.stt, j, self.m)
    }

    /// Scores of a gap in the truth sequence while `i` truth symbols are consumed.
    #[inline]
    pub(crate) fn truth_gap(&self, i: usize) -> GapScores {
        class(&self.truth, i, self.n)
    }

    /// Cost of `op` given the previous operation type and the number of
    /// truth (`i`) and stt (`j`) symbols consumed before it.
    pub(crate) fn op_cost<T: PartialEq>(
        &self,
        prev: State,
        op: &AlignOp,
        i: usize,
        j: usize,
        truth: &[T],
        stt: &[T],
    ) -> f64 {
        match *op {
            AlignOp::MatchOrSub(a, b) => self.pair(truth[a] == stt[b]),
            AlignOp::GapInStt(_) => {
                let g = self.stt_gap(j);
                if prev == State::GapInStt {
                    g.extend
                } else {
                    g.open
                }
            }
            AlignOp::GapInTruth(_) => {
                let g = self.truth_gap(i);
                if prev == State::GapInTruth {
                    g.extend
                } else {
                    g.open
                }
            }
        }
    }
}
