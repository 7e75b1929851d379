//! Linear-memory alignment by divide and conquer over the score recurrence.
//!
//! The middle row of a rectangle is crossed by the optimal path at some
//! cell `(mid, j)` entered by an operation of type `s`. A forward pass gives
//! the best prefix scores into row `mid` per `(j, s)` and a backward pass the
//! best suffix scores out of it, conditioned on `s` so that a gap run
//! crossing the row is priced as one run. The best `(j, s)` splits the
//! problem into two independent halves.

use super::dp::{backward_row, forward_row, traceback_dp, Rect};
use super::scoring::{Scorer, State, STATES};
use super::AlignOp;

/// Rectangles at or below this many cells are solved with a stored traceback.
pub const DEFAULT_BASE_CELLS: usize = 1 << 20;

pub(crate) fn align_linear<T: PartialEq>(
    truth: &[T],
    stt: &[T],
    sc: &Scorer,
    base_cells: usize,
) -> Vec<AlignOp> {
    let stt_open: Vec<f64> = (0..=stt.len()).map(|j| sc.stt_gap(j).open).collect();
    let stt_ext: Vec<f64> = (0..=stt.len()).map(|j| sc.stt_gap(j).extend).collect();
    let mut ctx = Ctx {
        truth,
        stt,
        sc,
        base_cells,
        stt_open,
        stt_ext,
        ops: Vec::with_capacity(truth.len() + stt.len()),
    };
    let rect = Rect {
        i0: 0,
        i1: truth.len(),
        j0: 0,
        j1: stt.len(),
    };
    ctx.solve(rect, State::Pair, None);
    ctx.ops
}

struct Ctx<'a, T> {
    truth: &'a [T],
    stt: &'a [T],
    sc: &'a Scorer,
    base_cells: usize,
    stt_open: Vec<f64>,
    stt_ext: Vec<f64>,
    ops: Vec<AlignOp>,
}

impl<T: PartialEq> Ctx<'_, T> {
    fn solve(&mut self, rect: Rect, start: State, end: Option<State>) {
        if rect.i1 - rect.i0 <= 1 || rect.cells() <= self.base_cells {
            let (_, ops) = traceback_dp(self.truth, self.stt, self.sc, rect, start, end, None);
            self.ops.extend(ops);
            return;
        }
        let mid = rect.i0 + (rect.i1 - rect.i0) / 2;
        let top = Rect { i1: mid, ..rect };
        let bottom = Rect { i0: mid, ..rect };
        let fwd = forward_row(
            self.truth,
            self.stt,
            self.sc,
            top,
            start,
            &self.stt_open,
            &self.stt_ext,
        );
        let bwd = backward_row(
            self.truth,
            self.stt,
            self.sc,
            bottom,
            end,
            &self.stt_open,
            &self.stt_ext,
        );

        let mut best = f64::NEG_INFINITY;
        let mut split = (rect.j0, State::Pair);
        for c in 0..=rect.j1 - rect.j0 {
            for s in STATES {
                let total = fwd[s as usize][c] + bwd[s as usize][c];
                if total > best {
                    best = total;
                    split = (rect.j0 + c, s);
                }
            }
        }
        debug_assert!(best.is_finite(), "no path through {rect:?}");
        let (j, s) = split;
        self.solve(Rect { j1: j, ..top }, start, Some(s));
        self.solve(Rect { j0: j, ..bottom }, s, end);
    }
}
