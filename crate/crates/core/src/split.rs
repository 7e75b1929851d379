//! Deterministic rule-based sentence splitting for German transcripts.
//!
//! A sentence ends after `.`, `!`, `?` or `:` (plus any closing quotes or
//! brackets) when whitespace follows and the next word starts with an
//! uppercase letter or a digit, possibly behind opening quotes. A period
//! does not end a sentence when the token before it is a known
//! abbreviation, a single letter (initials) or a number (ordinals such as
//! `1. Lesung`).

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ingest::{is_punctuation, ManualTranscript, SpeakerSpan};

const GERMAN_ABBREVIATIONS: &str = "\
Abs.
Abb.
Abg.
Abt.
allg.
Art.
Bd.
bspw.
bzgl.
bzw.
ca.
Co.
d.h.
Dr.
ebd.
etc.
evtl.
Fr.
Frl.
gem.
ggf.
Hr.
Hrn.
i.d.R.
inkl.
insb.
Jh.
Kap.
lic.
lit.
max.
Mio.
min.
Mrd.
Mrz.
Nr.
Nrn.
o.ä.
Prof.
resp.
S.
sog.
St.
Str.
Tel.
u.a.
usw.
vgl.
z.B.
z.T.
Ziff.
zzgl.";

/// Case-insensitive set of abbreviations, stored without the final period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abbreviations(HashSet<String>);

impl Abbreviations {
    /// The built-in German list.
    pub fn german() -> Self {
        Self::from_lines(GERMAN_ABBREVIATIONS)
    }

    /// One token per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Self {
        Abbreviations(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(key)
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Abbreviations(HashSet::new())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&key(token))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn key(token: &str) -> String {
    token.trim_end_matches('.').to_lowercase()
}

/// One sentence of a manual transcript. `raw_char_range` indexes characters
/// of the transcript text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub raw_char_range: Range<usize>,
    #[serde(default)]
    pub speaker_id: Option<String>,
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ':')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '»' | '«' | '“' | '”' | '’' | '‘')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '«' | '»' | '„' | '“' | '‘' | '‚')
}

/// Whether a period at `dot` is part of an abbreviation, initial or number.
fn period_is_protected(chars: &[char], dot: usize, abbreviations: &Abbreviations) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let token: String = chars[start..=dot].iter().collect();
    let token = token.trim_start_matches(|c: char| is_punctuation(c) && c != '.');
    let bare = token.trim_end_matches('.');
    if bare.is_empty() {
        return false;
    }
    if abbreviations.contains(token) {
        return true;
    }
    let mut letters = bare.chars();
    if let (Some(c), None) = (letters.next(), letters.next()) {
        if c.is_alphabetic() {
            return true;
        }
    }
    bare.chars().all(|c| c.is_ascii_digit() || c == '.')
}

/// Splits `transcript` into sentences. Speaker ids are attached when the
/// transcript carries speaker spans.
pub fn split_sentences(transcript: &ManualTranscript, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let chars: Vec<char> = transcript.text.chars().collect();
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            } else {
                i += 1;
                continue;
            }
        }
        if is_terminator(c) {
            let mut end = i + 1;
            while end < chars.len() && (is_terminator(chars[end]) || is_closer(chars[end])) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].is_whitespace() {
                next += 1;
            }
            let followed_by_space = next > end;
            let mut word = next;
            while word < chars.len() && is_opener(chars[word]) {
                word += 1;
            }
            let starts_upper =
                word < chars.len() && (chars[word].is_uppercase() || chars[word].is_ascii_digit());
            let protected = c == '.'
                && end == i + 1
                && period_is_protected(&chars, i, abbreviations);
            if followed_by_space && starts_upper && !protected {
                ranges.push(start.take().expect("open sentence")..end);
                i = next;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let mut end = chars.len();
        while end > s && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end > s {
            ranges.push(s..end);
        }
    }
    let sentences = ranges
        .into_iter()
        .map(|r| Sentence {
            text: chars[r.clone()].iter().collect(),
            raw_char_range: r,
            speaker_id: None,
        })
        .collect();
    match &transcript.speaker_spans {
        Some(spans) => attach_speakers(sentences, spans),
        None => sentences,
    }
}

/// Gives each sentence the speaker whose spans cover most of its characters.
/// Ties go to the speaker whose span comes first; no overlap leaves it unset.
pub fn attach_speakers(mut sentences: Vec<Sentence>, spans: &[SpeakerSpan]) -> Vec<Sentence> {
    for s in &mut sentences {
        let r = &s.raw_char_range;
        // speaker -> (covered chars, first span index)
        let mut cover: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (idx, span) in spans.iter().enumerate() {
            let lo = r.start.max(span.range.start);
            let hi = r.end.min(span.range.end);
            if hi > lo {
                let e = cover.entry(span.speaker_id.as_str()).or_insert((0, idx));
                e.0 += hi - lo;
            }
        }
        s.speaker_id = cover
            .into_iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(id, _)| id.to_owned());
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split(text: &str) -> Vec<String> {
        split_sentences(&ManualTranscript::new("r", text), &Abbreviations::german())
            .into_iter()
            .map(|s| s.text)
            .collect()
    }

    #[test]
    fn two_terminal_periods() {
        assert_eq!(split("Er kam. Sie ging."), ["Er kam.", "Sie ging."]);
    }

    #[test]
    fn abbreviation_suppresses_boundary() {
        assert_eq!(split("Dr. Muster sprach."), ["Dr. Muster sprach."]);
        let no_abbrev =
            split_sentences(&ManualTranscript::new("r", "Dr. Muster sprach."), &Abbreviations::empty());
        assert_eq!(no_abbrev.len(), 2);
    }

    #[test]
    fn empty_text() {
        assert!(split("").is_empty());
        assert!(split("   \n ").is_empty());
    }

    #[test]
    fn ordinals_initials_and_lowercase_continuations() {
        assert_eq!(split("Wir kommen zur 1. Lesung. Gut."), ["Wir kommen zur 1. Lesung.", "Gut."]);
        assert_eq!(split("Es sprach H. Muster. Danke."), ["Es sprach H. Muster.", "Danke."]);
        assert_eq!(split("Ich frage: warum nicht? Nein!"), ["Ich frage: warum nicht?", "Nein!"]);
        assert_eq!(split("Er sagte: «Nein.» Dann ging er."), ["Er sagte:", "«Nein.»", "Dann ging er."]);
        assert_eq!(split("Er sagte: «nein.» Dann ging er."), ["Er sagte: «nein.»", "Dann ging er."]);
        assert_eq!(split("Gilt das z.B. hier? Ja."), ["Gilt das z.B. hier?", "Ja."]);
        assert_eq!(split("Wirklich?! Ja. 2020 war gut"), ["Wirklich?!", "Ja.", "2020 war gut"]);
    }

    #[test]
    fn ranges_are_char_offsets() {
        let t = ManualTranscript::new("r", "Grüsse. Später.");
        let s = split_sentences(&t, &Abbreviations::german());
        assert_eq!(s[1].raw_char_range, 8..15);
        assert_eq!(s[1].text, "Später.");
    }

    #[test]
    fn builtin_list_size() {
        assert!(Abbreviations::german().len() >= 50);
        assert!(Abbreviations::german().contains("dr."));
    }

    fn sentence(range: Range<usize>) -> Sentence {
        Sentence { text: "x".repeat(range.len()), raw_char_range: range, speaker_id: None }
    }

    fn span(id: &str, range: Range<usize>) -> SpeakerSpan {
        SpeakerSpan { speaker_id: id.into(), range }
    }

    #[test]
    fn speakers_single_span_covers_all() {
        let out = attach_speakers(vec![sentence(0..5), sentence(6..10)], &[span("anna", 0..10)]);
        assert!(out.iter().all(|s| s.speaker_id.as_deref() == Some("anna")));
    }

    #[test]
    fn speakers_majority_wins() {
        let out = attach_speakers(vec![sentence(0..10)], &[span("anna", 0..6), span("beat", 6..10)]);
        assert_eq!(out[0].speaker_id.as_deref(), Some("anna"));
        let out = attach_speakers(vec![sentence(0..10)], &[span("anna", 0..4), span("beat", 4..10)]);
        assert_eq!(out[0].speaker_id.as_deref(), Some("beat"));
    }

    #[test]
    fn speakers_absent_without_spans() {
        let out = attach_speakers(vec![sentence(0..10)], &[]);
        assert_eq!(out[0].speaker_id, None);
    }

    proptest! {
        #[test]
        fn covers_every_non_whitespace_char(text in "[A-Za-zä0-9 .!?:,\\n]{0,80}") {
            let t = ManualTranscript::new("r", text.clone());
            let sentences = split_sentences(&t, &Abbreviations::german());
            let chars: Vec<char> = text.chars().collect();
            let mut covered = vec![0u8; chars.len()];
            let mut prev_end = 0;
            for s in &sentences {
                prop_assert!(s.raw_char_range.start >= prev_end);
                prop_assert!(!s.text.trim().is_empty());
                prev_end = s.raw_char_range.end;
                for k in s.raw_char_range.clone() { covered[k] += 1; }
            }
            for (k, c) in chars.iter().enumerate() {
                if c.is_whitespace() {
                    prop_assert!(covered[k] <= 1);
                } else {
                    prop_assert_eq!(covered[k], 1);
                }
            }
            // Determinism.
            prop_assert_eq!(split_sentences(&t, &Abbreviations::german()), sentences);
        }
    }
}
