//! Scoring parameters for the boundary-aware affine-gap aligner.
//!
//! Gap runs are priced separately for each sequence role (`truth` is the
//! manual transcript, `stt` the ASR output) and for where the run sits:
//! `left` before the first symbol of the gapped sequence, `right` after its
//! last symbol, `internal` anywhere else. Zero left/right scores give
//! semi-global alignment with free end gaps.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Affine cost of one gap run: `open + (len - 1) * extend`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapScores {
    pub open: f64,
    pub extend: f64,
}

/// Gap scores by position of the run relative to the gapped sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGaps {
    pub left: GapScores,
    pub internal: GapScores,
    pub right: GapScores,
}

impl BoundaryGaps {
    pub fn uniform(open: f64, extend: f64) -> Self {
        let g = GapScores { open, extend };
        BoundaryGaps {
            left: g,
            internal: g,
            right: g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    pub match_score: f64,
    pub mismatch_score: f64,
    /// Prices runs of gaps inserted into the truth sequence.
    pub truth: BoundaryGaps,
    /// Prices runs of gaps inserted into the stt sequence.
    pub stt: BoundaryGaps,
}

/// The 14 configuration keys, in canonical order.
pub const PARAM_KEYS: [&str; 14] = [
    "match_score",
    "mismatch_score",
    "truth_left_open_gap_score",
    "truth_internal_open_gap_score",
    "truth_right_open_gap_score",
    "truth_left_extend_gap_score",
    "truth_internal_extend_gap_score",
    "truth_right_extend_gap_score",
    "stt_left_open_gap_score",
    "stt_internal_open_gap_score",
    "stt_right_open_gap_score",
    "stt_left_extend_gap_score",
    "stt_internal_extend_gap_score",
    "stt_right_extend_gap_score",
];

impl AlignmentParams {
    /// Same open/extend scores for every boundary class and both roles.
    pub fn uniform(match_score: f64, mismatch_score: f64, open: f64, extend: f64) -> Self {
        AlignmentParams {
            match_score,
            mismatch_score,
            truth: BoundaryGaps::uniform(open, extend),
            stt: BoundaryGaps::uniform(open, extend),
        }
    }

    /// Parameters tuned for global alignment on a labeled alignment corpus.
    pub fn optimized() -> Self {
        AlignmentParams {
            match_score: 0.03875752471676385,
            mismatch_score: -1.0,
            truth: BoundaryGaps {
                left: GapScores {
                    open: -0.5038367052042227,
                    extend: -0.2440180768676541,
                },
                internal: GapScores {
                    open: -1.0,
                    extend: -0.4817146150129493,
                },
                right: GapScores {
                    open: -0.43980186690399603,
                    extend: -0.2594102766979399,
                },
            },
            stt: BoundaryGaps {
                left: GapScores {
                    open: -1.0,
                    extend: -0.25266456311369834,
                },
                internal: GapScores {
                    open: -0.7698209478188247,
                    extend: -0.7698209478188247,
                },
                right: GapScores {
                    open: -0.9815365376036425,
                    extend: -0.5619337177636895,
                },
            },
        }
    }

    /// Semi-global parameters: free end gaps on both sequences, unit costs inside.
    pub fn semi_global() -> Self {
        let free = GapScores {
            open: 0.0,
            extend: 0.0,
        };
        let unit = GapScores {
            open: -1.0,
            extend: -1.0,
        };
        let gaps = BoundaryGaps {
            left: free,
            internal: unit,
            right: free,
        };
        AlignmentParams {
            match_score: 1.0,
            mismatch_score: -1.0,
            truth: gaps,
            stt: gaps,
        }
    }

    /// Looks up a shipped preset. `appendix_a`/`appendix_b` are accepted as
    /// aliases of `optimized`/`semi_global`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "optimized" | "appendix_a" => Some(Self::optimized()),
            "semi_global" | "semiglobal" | "appendix_b" => Some(Self::semi_global()),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "match_score" => self.match_score,
            "mismatch_score" => self.mismatch_score,
            "truth_left_open_gap_score" => self.truth.left.open,
            "truth_internal_open_gap_score" => self.truth.internal.open,
            "truth_right_open_gap_score" => self.truth.right.open,
            "truth_left_extend_gap_score" => self.truth.left.extend,
            "truth_internal_extend_gap_score" => self.truth.internal.extend,
            "truth_right_extend_gap_score" => self.truth.right.extend,
            "stt_left_open_gap_score" => self.stt.left.open,
            "stt_internal_open_gap_score" => self.stt.internal.open,
            "stt_right_open_gap_score" => self.stt.right.open,
            "stt_left_extend_gap_score" => self.stt.left.extend,
            "stt_internal_extend_gap_score" => self.stt.internal.extend,
            "stt_right_extend_gap_score" => self.stt.right.extend,
            _ => return None,
        })
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "match_score" => &mut self.match_score,
            "mismatch_score" => &mut self.mismatch_score,
            "truth_left_open_gap_score" => &mut self.truth.left.open,
            "truth_internal_open_gap_score" => &mut self.truth.internal.open,
            "truth_right_open_gap_score" => &mut self.truth.right.open,
            "truth_left_extend_gap_score" => &mut self.truth.left.extend,
            "truth_internal_extend_gap_score" => &mut self.truth.internal.extend,
            "truth_right_extend_gap_score" => &mut self.truth.right.extend,
            "stt_left_open_gap_score" => &mut self.stt.left.open,
            "stt_internal_open_gap_score" => &mut self.stt.internal.open,
            "stt_right_open_gap_score" => &mut self.stt.right.open,
            "stt_left_extend_gap_score" => &mut self.stt.left.extend,
            "stt_internal_extend_gap_score" => &mut self.stt.internal.extend,
            "stt_right_extend_gap_score" => &mut self.stt.right.extend,
            _ => return None,
        })
    }

    /// Gap scores must be non-positive and finite; mismatch may not beat match.
    pub fn validate(&self) -> Result<(), IngestError> {
        for key in PARAM_KEYS {
            let v = self.get(key).expect("known key");
            if !v.is_finite() {
                return Err(IngestError::Params(format!("{key} is not finite")));
            }
            if key.ends_with("_gap_score") && v > 0.0 {
                return Err(IngestError::Params(format!(
                    "{key} = {v} must be non-positive"
                )));
            }
        }
        if self.mismatch_score > self.match_score {
            return Err(IngestError::Params(format!(
                "mismatch_score {} exceeds match_score {}",
                self.mismatch_score, self.match_score
            )));
        }
        Ok(())
    }

    /// Swaps the truth and stt gap scores.
    pub fn swapped_roles(&self) -> Self {
        AlignmentParams {
            truth: self.stt,
            stt: self.truth,
            ..*self
        }
    }
}

impl fmt::Display for AlignmentParams {
    /// Writes the `key = value` configuration format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in PARAM_KEYS {
            writeln!(f, "{key} = {:?}", self.get(key).expect("known key"))?;
        }
        Ok(())
    }
}

/// Parses the line-oriented `key = value` format. Blank lines and `#`
/// comments are ignored; all 14 keys must appear exactly once.
pub fn parse_alignment_params(text: &str) -> Result<AlignmentParams, IngestError> {
    let mut seen: BTreeMap<String, f64> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            IngestError::Params(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        if !PARAM_KEYS.contains(&key) {
            return Err(IngestError::Params(format!("unknown key `{key}`")));
        }
        let value: f64 = value.trim().parse().map_err(|_| {
            IngestError::Params(format!("`{key}`: non-numeric value {:?}", value.trim()))
        })?;
        if seen.insert(key.to_owned(), value).is_some() {
            return Err(IngestError::Params(format!("duplicate key `{key}`")));
        }
    }
    let mut params = AlignmentParams::uniform(0.0, 0.0, 0.0, 0.0);
    for key in PARAM_KEYS {
        let v = seen
            .get(key)
            .ok_or_else(|| IngestError::Params(format!("missing key `{key}`")))?;
        *params.slot(key).expect("known key") = *v;
    }
    params.validate()?;
    Ok(params)
}
