use std::collections::HashMap;
use std::ops::Range;

use crate::ingest::{normalize_str, normalize_text, AsrTranscript};

/// Unit of alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    /// Characters of normalized text, including single separating spaces.
    #[default]
    Char,
    /// Normalized words.
    Word,
}

impl std::str::FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "char" => Ok(Granularity::Char),
            "word" => Ok(Granularity::Word),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// The two symbol sequences of one document plus the maps tying them back
/// to transcript characters and ASR words.
#[derive(Debug, Clone)]
pub struct SymbolMaps {
    pub granularity: Granularity,
    /// Symbols of the normalized manual transcript.
    pub truth: Vec<u32>,
    /// Raw transcript character each truth symbol starts at. Non-decreasing.
    pub truth_raw: Vec<usize>,
    /// Symbols of the normalized ASR text.
    pub stt: Vec<u32>,
    /// ASR word each stt symbol belongs to; `None` for separators.
    pub stt_word: Vec<Option<usize>>,
}

/// Word symbols are interned above the Unicode range so they never collide
/// with character symbols.
struct Interner(HashMap<String, u32>);

impl Interner {
    fn id(&mut self, w: &str) -> u32 {
        let next = 0x0011_0000 + self.0.len() as u32;
        *self.0.entry(w.to_owned()).or_insert(next)
    }
}

impl SymbolMaps {
    pub fn build(manual_text: &str, asr: &AsrTranscript, granularity: Granularity) -> Self {
        let norm = normalize_text(manual_text);
        let asr_words: Vec<(usize, String)> = asr
            .words
            .iter()
            .enumerate()
            .map(|(k, w)| (k, normalize_str(&w.text)))
            .filter(|(_, w)| !w.is_empty())
            .collect();
        match granularity {
            Granularity::Char => {
                let truth = norm.chars().iter().map(|&c| c as u32).collect();
                let mut stt = Vec::new();
                let mut stt_word = Vec::new();
                for (n, (k, w)) in asr_words.iter().enumerate() {
                    if n > 0 {
                        stt.push(' ' as u32);
                        stt_word.push(None);
                    }
                    for c in w.chars() {
                        stt.push(c as u32);
                        stt_word.push(Some(*k));
                    }
                }
                SymbolMaps {
                    granularity,
                    truth,
                    truth_raw: norm.raw_index().to_vec(),
                    stt,
                    stt_word,
                }
            }
            Granularity::Word => {
                let mut interner = Interner(HashMap::new());
                let mut truth = Vec::new();
                let mut truth_raw = Vec::new();
                let chars = norm.chars();
                let mut k = 0;
                while k < chars.len() {
                    if chars[k] == ' ' {
                        k += 1;
                        continue;
                    }
                    let start = k;
                    while k < chars.len() && chars[k] != ' ' {
                        k += 1;
                    }
                    let word: String = chars[start..k].iter().collect();
                    truth.push(interner.id(&word));
                    truth_raw.push(norm.raw_index()[start]);
                }
                let stt = asr_words.iter().map(|(_, w)| interner.id(w)).collect();
                let stt_word = asr_words.iter().map(|(k, _)| Some(*k)).collect();
                SymbolMaps {
                    granularity,
                    truth,
                    truth_raw,
                    stt,
                    stt_word,
                }
            }
        }
    }

    /// Truth symbols originating inside raw character range `raw`.
    pub fn truth_range(&self, raw: &Range<usize>) -> Range<usize> {
        let lo = self.truth_raw.partition_point(|&r| r < raw.start);
        let hi = self.truth_raw.partition_point(|&r| r < raw.end);
        lo..hi.max(lo)
    }

    /// First and last ASR word touched by stt symbols in `stt_range`.
    pub fn words_in(&self, stt_range: Range<usize>) -> Option<(usize, usize)> {
        let mut words = self.stt_word[stt_range].iter().flatten();
        let first = *words.next()?;
        let last = words.last().copied().unwrap_or(first);
        Some((first, last))
    }
}
