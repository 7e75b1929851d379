//! Seeded synthetic documents with known sentence timings: a spoken
//! sentence sequence, timed ASR words with a systematic timing bias, and a
//! manual transcript with deleted, substituted, and swapped content.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{AsrTranscript, AsrWord, ManualTranscript, SpeakerSpan};
use crate::pipeline::{write_jsonl, AlignedRecord};

const FUNCTION_WORDS: [&str; 24] = [
    "der", "die", "das", "und", "ist", "nicht", "mit", "dem", "den", "zu", "auf", "für", "von",
    "wir", "sie", "es", "ein", "eine", "auch", "noch", "wird", "sind", "dass", "aber",
];

const SYLLABLES: [&str; 24] = [
    "ber", "ta", "gen", "schaf", "lin", "tor", "mu", "rek", "sel", "dan", "ko", "wi", "ster",
    "hau", "fel", "ni", "ra", "bung", "ment", "lo", "gra", "stein", "ach", "vol",
];

const SPEAKER_NAMES: [&str; 12] = [
    "Anna Muster", "Beat Keller", "Claudia Frei", "Daniel Meier", "Eva Brunner", "Fritz Huber",
    "Gabriela Roth", "Hans Weber", "Irene Baumann", "Jonas Graf", "Karin Vogel", "Lukas Steiner",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub sentences_per_doc: (usize, usize),
    pub words_per_sentence: (usize, usize),
    pub word_duration: (f64, f64),
    pub word_gap: (f64, f64),
    pub sentence_pause: (f64, f64),
    /// Transcript sentences that are never spoken.
    pub deletion_rate: f64,
    /// Transcript words that differ from what was spoken.
    pub substitution_rate: f64,
    /// Chance that a sentence trades places with the next in the transcript.
    pub swap_rate: f64,
    /// ASR words that differ from what was spoken.
    pub asr_error_rate: f64,
    /// Constant offsets the ASR adds to true word starts and ends.
    pub asr_start_bias: f64,
    pub asr_end_bias: f64,
    /// Half-width of uniform noise on ASR times.
    pub asr_jitter: f64,
    /// Size of the corpus-wide speaker pool, numbered beyond the named ones.
    pub speaker_pool: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 50,
            sentences_per_doc: (8, 16),
            words_per_sentence: (4, 12),
            word_duration: (0.2, 0.6),
            word_gap: (0.0, 0.08),
            sentence_pause: (0.3, 1.0),
            deletion_rate: 0.05,
            substitution_rate: 0.10,
            swap_rate: 0.05,
            asr_error_rate: 0.0,
            asr_start_bias: 0.08,
            asr_end_bias: 0.05,
            asr_jitter: 0.02,
            speaker_pool: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDocument {
    pub asr: AsrTranscript,
    pub transcript: ManualTranscript,
    /// One record per transcript sentence with its true span.
    pub gold: Vec<AlignedRecord>,
    /// Per transcript sentence: not spoken.
    pub deleted: Vec<bool>,
    /// Per transcript sentence: out of spoken order.
    pub swapped: Vec<bool>,
}

impl SynthDocument {
    pub fn recording_id(&self) -> &str {
        &self.transcript.recording_id
    }

    /// True when every transcript sentence was spoken.
    pub fn has_no_spurious_sentences(&self) -> bool {
        !self.deleted.iter().any(|&d| d)
    }
}

fn content_word(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(2..=3)).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.35) {
        FUNCTION_WORDS.choose(rng).expect("non-empty").to_string()
    } else {
        content_word(rng)
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn speaker_name(k: usize) -> String {
    SPEAKER_NAMES.get(k).map(|s| s.to_string()).unwrap_or_else(|| format!("Sprecher {k}"))
}

/// Case and spacing variants of a name, to exercise speaker deduplication.
fn name_variant(name: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..6) {
        0 => name.to_lowercase(),
        1 => name.replace(' ', "  "),
        _ => name.to_string(),
    }
}

pub fn generate_document(cfg: &SynthConfig, doc_index: usize) -> SynthDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1_000_003).wrapping_add(doc_index as u64));
    let recording_id = format!("doc{doc_index:03}");
    let n = rng.gen_range(cfg.sentences_per_doc.0..=cfg.sentences_per_doc.1);

    // Spoken content in source order.
    let source: Vec<Vec<String>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(cfg.words_per_sentence.0..=cfg.words_per_sentence.1);
            let mut words: Vec<String> = (0..len).map(|_| random_word(&mut rng)).collect();
            // Sentence-final words are content words so no period is read as
            // an abbreviation.
            *words.last_mut().expect("len >= 1") = content_word(&mut rng);
            words
        })
        .collect();
    let deleted_src: Vec<bool> = (0..n).map(|_| rng.gen_bool(cfg.deletion_rate)).collect();

    // Speakers take contiguous runs of source sentences.
    let n_speakers = rng.gen_range(1..=3usize).min(n);
    let pool: Vec<usize> = (0..cfg.speaker_pool.max(n_speakers)).collect();
    let doc_speakers: Vec<usize> = pool.choose_multiple(&mut rng, n_speakers).copied().collect();
    let mut cuts: Vec<usize> = (1..n).collect::<Vec<_>>().choose_multiple(&mut rng, n_speakers - 1).copied().collect();
    cuts.sort_unstable();
    let speaker_of = |s: usize| doc_speakers[cuts.iter().filter(|&&c| c <= s).count()];
    let labels: Vec<String> = doc_speakers.iter().map(|&k| name_variant(&speaker_name(k), &mut rng)).collect();

    // Audio timeline and ASR words.
    let mut t = rng.gen_range(0.2..1.0);
    let mut gold_span: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut asr_words = Vec::new();
    let mut prev_start: f64 = 0.0;
    for (s, words) in source.iter().enumerate() {
        if deleted_src[s] {
            continue;
        }
        let first = t;
        let mut last = t;
        for w in words {
            let dur = rng.gen_range(cfg.word_duration.0..=cfg.word_duration.1);
            let (start, end) = (t, t + dur);
            last = end;
            let jitter = |rng: &mut ChaCha8Rng| {
                if cfg.asr_jitter > 0.0 {
                    rng.gen_range(-cfg.asr_jitter..=cfg.asr_jitter)
                } else {
                    0.0
                }
            };
            let a_start = (start + cfg.asr_start_bias + jitter(&mut rng)).max(prev_start).max(0.0);
            let a_end = (end + cfg.asr_end_bias + jitter(&mut rng)).max(a_start + 0.01);
            prev_start = a_start;
            let text = if rng.gen_bool(cfg.asr_error_rate) { content_word(&mut rng) } else { w.clone() };
            asr_words.push(AsrWord::new(text, a_start, a_end, rng.gen_range(0.75..=1.0)));
            t = end + rng.gen_range(cfg.word_gap.0..=cfg.word_gap.1);
        }
        gold_span[s] = Some((first, last));
        t = last + rng.gen_range(cfg.sentence_pause.0..=cfg.sentence_pause.1);
    }
    let duration = asr_words.iter().map(|w| w.end).fold(t, f64::max) + 0.5;

    // Transcript order with adjacent swaps.
    let mut order: Vec<usize> = (0..n).collect();
    let mut swapped_src = vec![false; n];
    let mut k = 0;
    while k + 1 < n {
        if rng.gen_bool(cfg.swap_rate) {
            order.swap(k, k + 1);
            swapped_src[k] = true;
            swapped_src[k + 1] = true;
            k += 2;
        } else {
            k += 1;
        }
    }

    let mut text = String::new();
    let mut spans: Vec<SpeakerSpan> = Vec::new();
    let mut gold = Vec::with_capacity(n);
    let mut deleted = Vec::with_capacity(n);
    let mut swapped = Vec::with_capacity(n);
    for &s in &order {
        let written: Vec<String> = source[s]
            .iter()
            .map(|w| if rng.gen_bool(cfg.substitution_rate) { content_word(&mut rng) } else { w.clone() })
            .collect();
        let mut sentence = capitalize(&written[0]);
        for (i, w) in written.iter().enumerate().skip(1) {
            sentence.push(' ');
            sentence.push_str(w);
            if i + 1 < written.len() && rng.gen_bool(0.05) {
                sentence.push(',');
            }
        }
        sentence.push(if rng.gen_bool(0.1) { '?' } else { '.' });
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(&sentence);
        let end = text.chars().count();
        let label = labels[doc_speakers.iter().position(|&d| d == speaker_of(s)).expect("doc speaker")].clone();
        match spans.last_mut() {
            Some(last) if last.speaker_id == label && last.range.end + 1 == start => last.range.end = end,
            _ => spans.push(SpeakerSpan { speaker_id: label.clone(), range: start..end }),
        }
        gold.push(AlignedRecord {
            text: sentence,
            start: gold_span[s].map(|g| g.0),
            end: gold_span[s].map(|g| g.1),
            iou_estimate: None,
            speaker: Some(label),
        });
        deleted.push(deleted_src[s]);
        swapped.push(swapped_src[s]);
    }

    let asr = AsrTranscript::new(recording_id.clone(), Some(duration), asr_words).expect("valid synthetic ASR");
    let transcript = ManualTranscript::new(recording_id, text)
        .with_speaker_spans(spans)
        .expect("valid synthetic speaker spans");
    SynthDocument { asr, transcript, gold, deleted, swapped }
}

pub fn generate_corpus(cfg: &SynthConfig) -> Vec<SynthDocument> {
    (0..cfg.n_docs).map(|k| generate_document(cfg, k)).collect()
}

/// Writes `<id>.asr.json`, `<id>.txt`, `<id>.speakers.tsv`, and
/// `<id>.gold.jsonl` per document.
pub fn write_corpus(docs: &[SynthDocument], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for d in docs {
        let id = d.recording_id();
        std::fs::write(dir.join(format!("{id}.asr.json")), d.asr.to_json())?;
        std::fs::write(dir.join(format!("{id}.txt")), &d.transcript.text)?;
        let mut tsv = String::new();
        for s in d.transcript.speaker_spans.iter().flatten() {
            tsv.push_str(&format!("{}\t{}\t{}\n", s.speaker_id, s.range.start, s.range.end));
        }
        std::fs::write(dir.join(format!("{id}.speakers.tsv")), tsv)?;
        let mut gold = Vec::new();
        write_jsonl(&d.gold, &mut gold).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{id}.gold.jsonl")), gold)?;
    }
    Ok(())
}
