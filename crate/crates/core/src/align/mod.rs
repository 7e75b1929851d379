//! Optimal global and semi-global pairwise alignment with boundary-aware
//! affine gap scoring.
//!
//! Two symbol sequences are aligned: `truth` (the manual transcript) and
//! `stt` (the ASR output). Pairs score `match_score` or `mismatch_score`.
//! A run of `k` consecutive gaps in one sequence scores
//! `open + (k - 1) * extend`, where the scores come from the `left` class
//! if the run lies before the first symbol of the gapped sequence, `right`
//! if it lies after its last symbol and `internal` otherwise.
//!
//! Traceback prefers pairs, then gaps in stt, then gaps in truth, so full
//! DP results are deterministic. [`AlignMode::LinearMemory`] returns a
//! co-optimal path in `O(n + m)` memory.

mod dp;
mod linear;
mod path;
mod scoring;

pub use linear::DEFAULT_BASE_CELLS;
pub use path::{project_range, rescore_path, AlignOp, AlignmentPath, PathIndex};

use crate::ingest::{AlignmentParams, IngestError};

use scoring::{Scorer, State};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("cannot align an empty sequence")]
    EmptySequence,
    #[error(transparent)]
    Params(#[from] IngestError),
    #[error("inconsistent alignment path: {0}")]
    InconsistentPath(String),
    #[error("range out of bounds: {0}")]
    OutOfBounds(String),
    #[error("banding is only available in full DP mode")]
    BandNeedsFullDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    /// Whole traceback matrix (one byte per cell); deterministic tie-breaking.
    #[default]
    FullDp,
    /// Divide and conquer, linear memory.
    LinearMemory,
}

impl std::str::FromStr for AlignMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full_dp" | "full" => Ok(AlignMode::FullDp),
            "linear_memory" | "linear" => Ok(AlignMode::LinearMemory),
            other => Err(format!("unknown alignment mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignOptions {
    pub mode: AlignMode,
    /// Restrict full DP to cells within this distance of the diagonal.
    /// Faster, but no longer guaranteed optimal.
    pub band: Option<usize>,
    /// Linear mode solves rectangles up to this many cells directly.
    pub linear_base_cells: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            mode: AlignMode::FullDp,
            band: None,
            linear_base_cells: DEFAULT_BASE_CELLS,
        }
    }
}

impl From<AlignMode> for AlignOptions {
    fn from(mode: AlignMode) -> Self {
        AlignOptions {
            mode,
            ..Default::default()
        }
    }
}

/// Aligns `truth` against `stt`, returning an optimal path.
pub fn global_align<T: PartialEq>(
    truth: &[T],
    stt: &[T],
    params: &AlignmentParams,
    options: impl Into<AlignOptions>,
) -> Result<AlignmentPath, AlignError> {
    let options = options.into();
    if truth.is_empty() || stt.is_empty() {
        return Err(AlignError::EmptySequence);
    }
    params.validate()?;
    let (n, m) = (truth.len(), stt.len());
    let sc = Scorer::new(params, n, m);
    let (ops, score) = match options.mode {
        AlignMode::FullDp => {
            let rect = dp::Rect {
                i0: 0,
                i1: n,
                j0: 0,
                j1: m,
            };
            let bounds = options.band.map(|w| dp::band_bounds(n, m, w));
            let (score, ops) =
                dp::traceback_dp(truth, stt, &sc, rect, State::Pair, None, bounds.as_deref());
            (ops, score)
        }
        AlignMode::LinearMemory => {
            if options.band.is_some() {
                return Err(AlignError::BandNeedsFullDp);
            }
            let ops = linear::align_linear(truth, stt, &sc, options.linear_base_cells.max(1));
            let score = path::score_ops(&ops, truth, stt, &sc, 0, 0, State::Pair);
            (ops, score)
        }
    };
    Ok(AlignmentPath {
        ops,
        score,
        truth_len: n,
        stt_len: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BoundaryGaps, GapScores};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive maximum over every alignment, pricing each gap run as
    /// `open + (len - 1) * extend` with its boundary class.
    fn brute_force(truth: &[u8], stt: &[u8], p: &AlignmentParams) -> f64 {
        #[derive(Clone, Copy, PartialEq)]
        enum K {
            P,
            S, // gap in stt
            T, // gap in truth
        }
        fn runs_score(ops: &[K], truth: &[u8], stt: &[u8], p: &AlignmentParams) -> f64 {
            let (n, m) = (truth.len(), stt.len());
            let (mut i, mut j, mut total, mut k) = (0, 0, 0.0, 0);
            while k < ops.len() {
                match ops[k] {
                    K::P => {
                        total += if truth[i] == stt[j] { p.match_score } else { p.mismatch_score };
                        i += 1;
                        j += 1;
                        k += 1;
                    }
                    kind => {
                        let mut len = 0;
                        while k < ops.len() && ops[k] == kind {
                            len += 1;
                            k += 1;
                        }
                        let (gaps, pos, full) = if kind == K::S { (&p.stt, j, m) } else { (&p.truth, i, n) };
                        let g = if pos == 0 { gaps.left } else if pos == full { gaps.right } else { gaps.internal };
                        total += g.open + (len - 1) as f64 * g.extend;
                        if kind == K::S { i += len } else { j += len }
                    }
                }
            }
            total
        }
        fn rec(i: usize, j: usize, ops: &mut Vec<K>, t: &[u8], s: &[u8], p: &AlignmentParams, best: &mut f64) {
            if i == t.len() && j == s.len() {
                *best = best.max(runs_score(ops, t, s, p));
                return;
            }
            if i < t.len() && j < s.len() {
                ops.push(K::P);
                rec(i + 1, j + 1, ops, t, s, p, best);
                ops.pop();
            }
            if i < t.len() {
                ops.push(K::S);
                rec(i + 1, j, ops, t, s, p, best);
                ops.pop();
            }
            if j < s.len() {
                ops.push(K::T);
                rec(i, j + 1, ops, t, s, p, best);
                ops.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(0, 0, &mut Vec::new(), truth, stt, p, &mut best);
        best
    }

    fn random_params(rng: &mut ChaCha8Rng) -> AlignmentParams {
        let mut g = || GapScores { open: -rng.gen::<f64>(), extend: -rng.gen::<f64>() };
        let truth = BoundaryGaps { left: g(), internal: g(), right: g() };
        let stt = BoundaryGaps { left: g(), internal: g(), right: g() };
        AlignmentParams { match_score: rng.gen(), mismatch_score: -rng.gen::<f64>(), truth, stt }
    }

    fn random_seq(rng: &mut ChaCha8Rng, max: usize, alphabet: &[u8]) -> Vec<u8> {
        let len = rng.gen_range(1..=max);
        (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
    }

    #[test]
    fn identity() {
        let p = AlignmentParams::optimized();
        let path = global_align(b"abc", b"abc", &p, AlignMode::FullDp).unwrap();
        assert_eq!(
            path.ops,
            [AlignOp::MatchOrSub(0, 0), AlignOp::MatchOrSub(1, 1), AlignOp::MatchOrSub(2, 2)]
        );
        assert_eq!(path.score, 3.0 * p.match_score);
    }

    #[test]
    fn gattaca_scores_zero() {
        let p = AlignmentParams::uniform(1.0, -1.0, -1.0, -1.0);
        assert_eq!(brute_force(b"gattaca", b"gcatgcu", &p), 0.0);
        for mode in [AlignMode::FullDp, AlignMode::LinearMemory] {
            let path = global_align(b"gattaca", b"gcatgcu", &p, mode).unwrap();
            assert_eq!(path.score, 0.0);
        }
    }

    #[test]
    fn free_end_gaps() {
        let p = AlignmentParams::semi_global();
        assert_eq!(brute_force(b"bcd", b"abcde", &p), 3.0);
        let path = global_align(b"bcd", b"abcde", &p, AlignMode::FullDp).unwrap();
        assert_eq!(path.score, 3.0);
        assert_eq!(path.ops.first(), Some(&AlignOp::GapInTruth(0)));
        assert_eq!(path.ops.last(), Some(&AlignOp::GapInTruth(4)));
    }

    #[test]
    fn tie_break_prefers_pairs_then_stt_gaps() {
        // "a" vs "b" under zero gaps: pair (-1) loses to two gaps (0);
        // the last op taken in traceback is the gap in stt.
        let p = AlignmentParams::uniform(1.0, -1.0, 0.0, 0.0);
        let path = global_align(b"a", b"b", &p, AlignMode::FullDp).unwrap();
        assert_eq!(path.score, 0.0);
        assert_eq!(path.ops, [AlignOp::GapInTruth(0), AlignOp::GapInStt(0)]);
        // Mismatch equal to the gap alternative: the pair wins.
        let p = AlignmentParams::uniform(1.0, -1.0, -0.5, -0.5);
        let path = global_align(b"a", b"b", &p, AlignMode::FullDp).unwrap();
        assert_eq!(path.ops, [AlignOp::MatchOrSub(0, 0)]);
    }

    #[test]
    fn empty_sequence_rejected() {
        let p = AlignmentParams::semi_global();
        assert!(matches!(global_align::<u8>(b"", b"a", &p, AlignMode::FullDp), Err(AlignError::EmptySequence)));
        let mut bad = p;
        bad.truth.internal.open = 0.5;
        assert!(global_align(b"a", b"a", &bad, AlignMode::FullDp).is_err());
    }

    #[test]
    fn rescore_hand_built_internal_gap() {
        let mut p = AlignmentParams::uniform(1.0, -1.0, -1.0, -1.0);
        p.truth.internal = GapScores { open: -1.0, extend: -0.5 };
        // truth "ad", stt "abcd": a, two stt symbols against gaps in truth, d.
        let path = AlignmentPath {
            ops: vec![
                AlignOp::MatchOrSub(0, 0),
                AlignOp::GapInTruth(1),
                AlignOp::GapInTruth(2),
                AlignOp::MatchOrSub(1, 3),
            ],
            score: 0.0,
            truth_len: 2,
            stt_len: 4,
        };
        assert_eq!(rescore_path(&path, b"ad", b"abcd", &p).unwrap(), 2.0 - 1.5);
    }

    #[test]
    fn rescore_rejects_inconsistent_path() {
        let p = AlignmentParams::semi_global();
        let path = AlignmentPath { ops: vec![AlignOp::MatchOrSub(0, 1)], score: 0.0, truth_len: 1, stt_len: 1 };
        assert!(rescore_path(&path, b"a", b"a", &p).is_err());
        let short = AlignmentPath { ops: vec![], score: 0.0, truth_len: 1, stt_len: 1 };
        assert!(rescore_path(&short, b"a", b"a", &p).is_err());
    }

    #[test]
    fn all_match_rescore_is_length() {
        let p = AlignmentParams::uniform(1.0, -1.0, -1.0, -1.0);
        let path = global_align(b"abcdefg", b"abcdefg", &p, AlignMode::FullDp).unwrap();
        assert_eq!(rescore_path(&path, b"abcdefg", b"abcdefg", &p).unwrap(), 7.0);
    }

    #[test]
    fn projection() {
        let p = AlignmentParams::uniform(1.0, -1.0, -1.0, -1.0);
        let path = global_align(b"abcdef", b"abcdef", &p, AlignMode::FullDp).unwrap();
        assert_eq!(project_range(&path, 2..5).unwrap(), Some(2..5));
        assert!(project_range(&path, 2..9).is_err());

        let sub = global_align(b"abcde", b"abcxe", &p, AlignMode::FullDp).unwrap();
        assert_eq!(project_range(&sub, 1..5).unwrap(), Some(1..5));

        let semi = AlignmentParams::semi_global();
        let deleted = AlignmentPath {
            ops: vec![AlignOp::MatchOrSub(0, 0), AlignOp::GapInStt(1), AlignOp::GapInStt(2)],
            score: 0.0,
            truth_len: 3,
            stt_len: 1,
        };
        assert_eq!(project_range(&deleted, 1..3).unwrap(), None);
        let _ = semi;
    }

    #[test]
    fn rle_dump_round_trip() {
        let p = AlignmentParams::semi_global();
        let path = global_align(b"bcd", b"abxde", &p, AlignMode::FullDp).unwrap();
        let back = AlignmentPath::from_rle_json(&path.to_rle_json()).unwrap();
        assert_eq!(back, path);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..400 {
            let p = random_params(&mut rng);
            let t = random_seq(&mut rng, 5, b"ab");
            let s = random_seq(&mut rng, 5, b"ab");
            let expected = brute_force(&t, &s, &p);
            let full = global_align(&t, &s, &p, AlignMode::FullDp).unwrap();
            assert!((full.score - expected).abs() <= 1e-12, "{t:?} {s:?}");
            assert_eq!(rescore_path(&full, &t, &s, &p).unwrap(), full.score);
        }
    }

    #[test]
    fn linear_mode_splits_and_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let p = random_params(&mut rng);
            let t = random_seq(&mut rng, 60, b"abc");
            let s = random_seq(&mut rng, 60, b"abc");
            let full = global_align(&t, &s, &p, AlignMode::FullDp).unwrap();
            let opts = AlignOptions { mode: AlignMode::LinearMemory, band: None, linear_base_cells: 4 };
            let lin = global_align(&t, &s, &p, opts).unwrap();
            lin.validate().unwrap();
            assert!((full.score - lin.score).abs() <= 1e-9, "{} vs {}", full.score, lin.score);
            assert_eq!(rescore_path(&lin, &t, &s, &p).unwrap(), lin.score);
        }
    }

    #[test]
    fn wide_band_is_exact_and_narrow_band_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let t = random_seq(&mut rng, 40, b"ab");
            let s = random_seq(&mut rng, 40, b"ab");
            let full = global_align(&t, &s, &p, AlignMode::FullDp).unwrap();
            let wide = AlignOptions { band: Some(100), ..Default::default() };
            assert_eq!(global_align(&t, &s, &p, wide).unwrap().score, full.score);
            let narrow = AlignOptions { band: Some(1), ..Default::default() };
            let banded = global_align(&t, &s, &p, narrow).unwrap();
            banded.validate().unwrap();
            assert!(banded.score <= full.score);
            assert_eq!(rescore_path(&banded, &t, &s, &p).unwrap(), banded.score);
        }
        let opts = AlignOptions { mode: AlignMode::LinearMemory, band: Some(3), ..Default::default() };
        assert!(global_align(b"a", b"a", &AlignmentParams::semi_global(), opts).is_err());
    }

    #[test]
    fn segment_score_sums_to_total_for_single_segment() {
        let p = AlignmentParams::optimized();
        let (t, s) = (b"xxabcdyy".as_slice(), b"abzd".as_slice());
        let path = global_align(t, s, &p, AlignMode::FullDp).unwrap();
        let idx = PathIndex::new(&path);
        let whole = idx.segment_score(&path, 0..t.len(), t, s, &p).unwrap();
        // Whole-range segment differs from the total only by gaps in truth
        // outside the first/last truth symbol.
        let outside: usize = path
            .ops
            .iter()
            .take_while(|op| matches!(op, AlignOp::GapInTruth(_)))
            .count();
        if outside == 0 && !matches!(path.ops.last(), Some(AlignOp::GapInTruth(_))) {
            assert_eq!(whole, path.score);
        }
        assert!(idx.segment_score(&path, 0..0, t, s, &p).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn role_swap_symmetry(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let t = random_seq(&mut rng, 12, b"abc");
            let s = random_seq(&mut rng, 12, b"abc");
            let a = global_align(&t, &s, &p, AlignMode::FullDp).unwrap().score;
            let b = global_align(&s, &t, &p.swapped_roles(), AlignMode::FullDp).unwrap().score;
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn harsher_gaps_never_raise_score(seed in any::<u64>(), which in 0usize..12, delta in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let t = random_seq(&mut rng, 10, b"ab");
            let s = random_seq(&mut rng, 10, b"ab");
            let key = crate::ingest::PARAM_KEYS[2 + which];
            let text = p.to_string().lines().map(|l| {
                if l.starts_with(key) { format!("{key} = {:?}\n", p.get(key).unwrap() - delta) } else { format!("{l}\n") }
            }).collect::<String>();
            let harsher = crate::ingest::parse_alignment_params(&text).unwrap();
            let a = global_align(&t, &s, &p, AlignMode::FullDp).unwrap().score;
            let b = global_align(&t, &s, &harsher, AlignMode::FullDp).unwrap().score;
            prop_assert!(b <= a + 1e-12);
        }
    }
}
