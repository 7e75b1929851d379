//! Three-state affine DP over a sub-rectangle of the alignment matrix.
//!
//! `M` holds the best score of a path whose last operation is a pair, `X`
//! one ending in a gap in stt (vertical move, consumes truth) and `Y` one
//! ending in a gap in truth (horizontal move, consumes stt). All cell values
//! are built as `predecessor + cost`, which is the same left-to-right
//! accumulation `rescore_path` performs.

use super::scoring::{Scorer, State};
use super::AlignOp;

const NEG: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Rect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Rect {
    pub(crate) fn cells(&self) -> usize {
        (self.i1 - self.i0 + 1) * (self.j1 - self.j0 + 1)
    }
}

/// Max in preference order pair, gap-in-stt, gap-in-truth.
#[inline(always)]
fn best3(a: f64, b: f64, c: f64) -> (f64, u8) {
    let mut v = a;
    let mut k = 0;
    if b > v {
        v = b;
        k = 1;
    }
    if c > v {
        v = c;
        k = 2;
    }
    (v, k)
}

#[inline(always)]
fn max3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).max(c)
}

/// Column bounds per row for a banded run over the full matrix.
pub(crate) fn band_bounds(n: usize, m: usize, width: usize) -> Vec<(usize, usize)> {
    let slope = (m as f64 / n.max(1) as f64).max(n as f64 / m.max(1) as f64);
    let w = width.max(slope.ceil() as usize + 1);
    (0..=n)
        .map(|i| {
            let center_lo = (i * m) / n.max(1);
            let center_hi = (i * m).div_ceil(n.max(1));
            (center_lo.saturating_sub(w), (center_hi + w).min(m))
        })
        .collect()
}

/// Optimal path inside `rect` from `start` state at `(i0, j0)` to `(i1, j1)`,
/// ending in `end` when given. Returns the path score and its operations.
pub(crate) fn traceback_dp<T: PartialEq>(
    truth: &[T],
    stt: &[T],
    sc: &Scorer,
    rect: Rect,
    start: State,
    end: Option<State>,
    bounds: Option<&[(usize, usize)]>,
) -> (f64, Vec<AlignOp>) {
    let Rect { i0, i1, j0, j1 } = rect;
    let width = j1 - j0 + 1;
    let row_bounds = |i: usize| -> (usize, usize) {
        match bounds {
            Some(b) => (b[i].0.max(j0), b[i].1.min(j1)),
            None => (j0, j1),
        }
    };

    let mut offsets = Vec::with_capacity(i1 - i0 + 2);
    let mut total = 0usize;
    for i in i0..=i1 {
        let (lo, hi) = row_bounds(i);
        offsets.push(total);
        total += hi + 1 - lo;
    }
    let mut tb = vec![0u8; total];

    let mut prev = [vec![NEG; width], vec![NEG; width], vec![NEG; width]];
    let mut cur = [vec![NEG; width], vec![NEG; width], vec![NEG; width]];
    let mut prev_written: Option<(usize, usize)> = None;
    let mut cur_written: Option<(usize, usize)> = None;

    for i in i0..=i1 {
        if let Some((lo, hi)) = cur_written {
            for arr in cur.iter_mut() {
                arr[lo - j0..=hi - j0].fill(NEG);
            }
        }
        let (lo, hi) = row_bounds(i);
        let row_tb = &mut tb[offsets[i - i0]..];
        let yg = sc.truth_gap(i);
        for j in lo..=hi {
            let c = j - j0;
            let mut ptr = 0u8;
            if i == i0 && j == j0 {
                cur[start as usize][c] = 0.0;
                continue;
            }
            if i > i0 {
                if j > j0 {
                    let (v, k) = best3(prev[0][c - 1], prev[1][c - 1], prev[2][c - 1]);
                    cur[0][c] = v + sc.pair(truth[i - 1] == stt[j - 1]);
                    ptr |= k;
                }
                let xg = sc.stt_gap(j);
                let (v, k) = best3(prev[0][c] + xg.open, prev[1][c] + xg.extend, prev[2][c] + xg.open);
                cur[1][c] = v;
                ptr |= k << 2;
            }
            if j > j0 {
                let (v, k) = best3(cur[0][c - 1] + yg.open, cur[1][c - 1] + yg.open, cur[2][c - 1] + yg.extend);
                cur[2][c] = v;
                ptr |= k << 4;
            }
            row_tb[j - lo] = ptr;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_written, &mut cur_written);
        prev_written = Some((lo, hi));
    }

    let c = j1 - j0;
    let (score, mut state) = match end {
        Some(s) => (prev[s as usize][c], s),
        None => {
            let (v, k) = best3(prev[0][c], prev[1][c], prev[2][c]);
            (v, State::from_bits(k))
        }
    };
    debug_assert!(score.is_finite(), "no path through rectangle {rect:?}");

    let mut ops = Vec::with_capacity((i1 - i0) + (j1 - j0));
    let (mut i, mut j) = (i1, j1);
    while i != i0 || j != j0 {
        let (lo, _) = row_bounds(i);
        let ptr = tb[offsets[i - i0] + (j - lo)];
        let pred = State::from_bits(ptr >> (2 * state as u8));
        match state {
            State::Pair => {
                ops.push(AlignOp::MatchOrSub(i - 1, j - 1));
                i -= 1;
                j -= 1;
            }
            State::GapInStt => {
                ops.push(AlignOp::GapInStt(i - 1));
                i -= 1;
            }
            State::GapInTruth => {
                ops.push(AlignOp::GapInTruth(j - 1));
                j -= 1;
            }
        }
        state = pred;
    }
    debug_assert_eq!(state, start);
    ops.reverse();
    (score, ops)
}

/// Scores of the best prefixes from `start` at `(i0, j0)` to every cell of
/// row `i1`, by state of the last operation.
pub(crate) fn forward_row<T: PartialEq>(
    truth: &[T],
    stt: &[T],
    sc: &Scorer,
    rect: Rect,
    start: State,
    stt_open: &[f64],
    stt_ext: &[f64],
) -> [Vec<f64>; 3] {
    let Rect { i0, i1, j0, j1 } = rect;
    let width = j1 - j0 + 1;
    let mut pm = vec![NEG; width];
    let mut px = vec![NEG; width];
    let mut py = vec![NEG; width];
    let mut cm = vec![NEG; width];
    let mut cx = vec![NEG; width];
    let mut cy = vec![NEG; width];

    match start {
        State::Pair => pm[0] = 0.0,
        State::GapInStt => px[0] = 0.0,
        State::GapInTruth => py[0] = 0.0,
    }
    let yg = sc.truth_gap(i0);
    for c in 1..width {
        py[c] = max3(pm[c - 1] + yg.open, px[c - 1] + yg.open, py[c - 1] + yg.extend);
    }

    let stt_slice = &stt[j0..j1];
    for i in i0 + 1..=i1 {
        let t = &truth[i - 1];
        let yg = sc.truth_gap(i);
        cm[0] = NEG;
        cx[0] = max3(pm[0] + stt_open[j0], px[0] + stt_ext[j0], py[0] + stt_open[j0]);
        cy[0] = NEG;
        for c in 1..width {
            let j = j0 + c;
            let diag = max3(pm[c - 1], px[c - 1], py[c - 1]);
            cm[c] = diag + sc.pair(*t == stt_slice[c - 1]);
            cx[c] = max3(pm[c] + stt_open[j], px[c] + stt_ext[j], py[c] + stt_open[j]);
            cy[c] = max3(cm[c - 1] + yg.open, cx[c - 1] + yg.open, cy[c - 1] + yg.extend);
        }
        std::mem::swap(&mut pm, &mut cm);
        std::mem::swap(&mut px, &mut cx);
        std::mem::swap(&mut py, &mut cy);
    }
    [pm, px, py]
}

/// Scores of the best suffixes from every cell of row `i0` to `(i1, j1)`,
/// ending in `end` when given. Indexed by the state of the operation that
/// led into the cell, since that decides whether the next gap opens or extends.
pub(crate) fn backward_row<T: PartialEq>(
    truth: &[T],
    stt: &[T],
    sc: &Scorer,
    rect: Rect,
    end: Option<State>,
    stt_open: &[f64],
    stt_ext: &[f64],
) -> [Vec<f64>; 3] {
    let Rect { i0, i1, j0, j1 } = rect;
    let width = j1 - j0 + 1;
    let last = width - 1;
    let mut nm = vec![NEG; width];
    let mut nx = vec![NEG; width];
    let mut ny = vec![NEG; width];
    let mut bm = vec![NEG; width];
    let mut bx = vec![NEG; width];
    let mut by = vec![NEG; width];

    let terminal = |s: State| if end.map_or(true, |e| e == s) { 0.0 } else { NEG };
    nm[last] = terminal(State::Pair);
    nx[last] = terminal(State::GapInStt);
    ny[last] = terminal(State::GapInTruth);
    let yg = sc.truth_gap(i1);
    for c in (0..last).rev() {
        let y_next = ny[c + 1];
        nm[c] = yg.open + y_next;
        nx[c] = yg.open + y_next;
        ny[c] = yg.extend + y_next;
    }

    let stt_slice = &stt[j0..j1];
    for i in (i0..i1).rev() {
        let t = &truth[i];
        let yg = sc.truth_gap(i);
        // Last column: only a vertical move is possible.
        let j = j1;
        let down = nx[last];
        bm[last] = stt_open[j] + down;
        bx[last] = stt_ext[j] + down;
        by[last] = stt_open[j] + down;
        for c in (0..last).rev() {
            let j = j0 + c;
            let diag = sc.pair(*t == stt_slice[c]) + nm[c + 1];
            let down = nx[c];
            let right = by[c + 1];
            let (xo, xe) = (stt_open[j] + down, stt_ext[j] + down);
            let (yo, ye) = (yg.open + right, yg.extend + right);
            bm[c] = max3(diag, xo, yo);
            bx[c] = max3(diag, xe, yo);
            by[c] = max3(diag, xo, ye);
        }
        std::mem::swap(&mut nm, &mut bm);
        std::mem::swap(&mut nx, &mut bx);
        std::mem::swap(&mut ny, &mut by);
    }
    [nm, nx, ny]
}
