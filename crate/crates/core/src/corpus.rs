//! Speaker-disjoint train/test assembly, manifests, and cut lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("test split unreachable: {0}")]
    Unreachable(String),
    #[error("invalid split request: {0}")]
    InvalidRequest(String),
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Test,
    Unassigned,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Train => "train",
            SplitLabel::Test => "test",
            SplitLabel::Unassigned => "unassigned",
        })
    }
}

impl std::str::FromStr for SplitLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "test" => Ok(SplitLabel::Test),
            "unassigned" => Ok(SplitLabel::Unassigned),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub recording_id: String,
    pub text: String,
    pub start: f64,
    pub end: f64,
    /// Absent when no estimator was available.
    pub iou_estimate: Option<f64>,
    pub speaker_id: String,
    pub split: SplitLabel,
}

impl CorpusEntry {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Case-folded, whitespace-collapsed speaker label; an empty label becomes
/// `unknown-<recording>`.
pub fn canonical_speaker(label: &str, recording_id: &str) -> String {
    let folded = label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if folded.is_empty() {
        format!("unknown-{recording_id}")
    } else {
        folded
    }
}

/// Rewrites every entry's speaker to its canonical id and returns the
/// `(recording, raw label) -> canonical id` mapping for auditing.
pub fn dedupe_speakers(entries: &mut [CorpusEntry]) -> BTreeMap<(String, String), String> {
    let mut mapping = BTreeMap::new();
    for e in entries.iter_mut() {
        let id = canonical_speaker(&e.speaker_id, &e.recording_id);
        mapping.insert((e.recording_id.clone(), std::mem::take(&mut e.speaker_id)), id.clone());
        e.speaker_id = id;
    }
    mapping
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_hours: f64,
    /// Every test speaker's share of the test duration stays below this.
    pub speaker_cap: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_hours: 1.0, speaker_cap: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub entries: usize,
    pub hours: f64,
    pub speakers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<CorpusEntry>,
}

impl Manifest {
    pub fn summary(&self) -> BTreeMap<SplitLabel, SplitSummary> {
        let mut speakers: BTreeMap<SplitLabel, BTreeSet<&str>> = BTreeMap::new();
        let mut out: BTreeMap<SplitLabel, SplitSummary> = BTreeMap::new();
        for e in &self.entries {
            let s = out.entry(e.split).or_insert(SplitSummary { entries: 0, hours: 0.0, speakers: 0 });
            s.entries += 1;
            s.hours += e.duration() / 3600.0;
            speakers.entry(e.split).or_default().insert(&e.speaker_id);
        }
        for (label, set) in speakers {
            out.get_mut(&label).expect("present").speakers = set.len();
        }
        out
    }

    /// Total duration in seconds per speaker within one split.
    pub fn speaker_seconds(&self, split: SplitLabel) -> BTreeMap<&str, f64> {
        let mut out = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.split == split) {
            *out.entry(e.speaker_id.as_str()).or_insert(0.0) += e.duration();
        }
        out
    }

    pub fn filter(&self, keep: impl Fn(&CorpusEntry) -> bool) -> Manifest {
        Manifest { entries: self.entries.iter().filter(|e| keep(e)).cloned().collect() }
    }

    /// Checks speaker exclusivity and the per-speaker test share.
    pub fn verify(&self, speaker_cap: f64) -> Result<(), String> {
        let train = self.speaker_seconds(SplitLabel::Train);
        let test = self.speaker_seconds(SplitLabel::Test);
        if let Some(s) = test.keys().find(|s| train.contains_key(*s)) {
            return Err(format!("speaker {s:?} is in both train and test"));
        }
        let total: f64 = test.values().sum();
        if let Some((s, d)) = test.iter().find(|(_, &d)| d / total >= speaker_cap) {
            return Err(format!("speaker {s:?} makes up {:.4} of the test set", d / total));
        }
        Ok(())
    }
}

/// Assigns whole speakers to the test split in seeded random order until it
/// holds at least `test_hours`. Speakers longer than `speaker_cap ×
/// test_hours` are never candidates, and assignment continues past the
/// target while any test speaker still holds a share of `speaker_cap` or
/// more. All other speakers go to train.
pub fn split_by_speaker(mut entries: Vec<CorpusEntry>, cfg: &SplitConfig) -> Result<Manifest, CorpusError> {
    if !(cfg.test_hours > 0.0) || !(cfg.speaker_cap > 0.0 && cfg.speaker_cap <= 1.0) {
        return Err(CorpusError::InvalidRequest(format!("{cfg:?}")));
    }
    let mut per_speaker: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &entries {
        *per_speaker.entry(e.speaker_id.as_str()).or_insert(0.0) += e.duration();
    }
    let total: f64 = per_speaker.values().sum();
    let target = cfg.test_hours * 3600.0;
    if target >= total {
        return Err(CorpusError::InvalidRequest(format!(
            "test target {:.3} h is not below the corpus total {:.3} h",
            cfg.test_hours,
            total / 3600.0
        )));
    }
    let mut order: Vec<(&str, f64)> = per_speaker.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let limit = cfg.speaker_cap * target;
    let mut test: Vec<(&str, f64)> = Vec::new();
    let mut test_s = 0.0;
    let satisfied = |test: &[(&str, f64)], test_s: f64| {
        test_s >= target && test.iter().all(|(_, d)| d / test_s < cfg.speaker_cap)
    };
    for &(speaker, d) in &order {
        if satisfied(&test, test_s) {
            break;
        }
        if d > limit {
            continue;
        }
        test.push((speaker, d));
        test_s += d;
    }
    if !satisfied(&test, test_s) {
        return Err(CorpusError::Unreachable(format!(
            "{:.3} h of eligible speakers cannot reach {:.3} h with every speaker below {} of the test set",
            test_s / 3600.0,
            cfg.test_hours,
            cfg.speaker_cap
        )));
    }
    let test: BTreeSet<String> = test.into_iter().map(|(s, _)| s.to_owned()).collect();
    for e in &mut entries {
        e.split = if test.contains(&e.speaker_id) { SplitLabel::Test } else { SplitLabel::Train };
    }
    let manifest = Manifest { entries };
    manifest.verify(cfg.speaker_cap).map_err(CorpusError::Unreachable)?;
    Ok(manifest)
}

pub const MANIFEST_COLUMNS: [&str; 7] =
    ["recording_id", "start", "end", "text", "speaker_id", "iou_estimate", "split"];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

/// Tab-separated manifest with a header row. Text fields escape backslash,
/// tab, and newlines; a missing estimate is an empty cell.
pub fn write_manifest_tsv(manifest: &Manifest, mut w: impl Write) -> Result<(), CorpusError> {
    writeln!(w, "{}", MANIFEST_COLUMNS.join("\t"))?;
    for e in &manifest.entries {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            escape(&e.recording_id),
            e.start,
            e.end,
            escape(&e.text),
            escape(&e.speaker_id),
            e.iou_estimate.map(|v| v.to_string()).unwrap_or_default(),
            e.split
        )?;
    }
    Ok(())
}

pub fn read_manifest_tsv(r: impl BufRead) -> Result<Manifest, CorpusError> {
    let mut entries = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let err = |message: String| CorpusError::Parse { line: lineno, message };
        if k == 0 {
            if line != MANIFEST_COLUMNS.join("\t") {
                return Err(err("unexpected header".into()));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != MANIFEST_COLUMNS.len() {
            return Err(err(format!("expected {} columns, found {}", MANIFEST_COLUMNS.len(), cols.len())));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(format!("bad {what} {s:?}")));
        entries.push(CorpusEntry {
            recording_id: unescape(cols[0]).map_err(err)?,
            start: num(cols[1], "start")?,
            end: num(cols[2], "end")?,
            text: unescape(cols[3]).map_err(err)?,
            speaker_id: unescape(cols[4]).map_err(err)?,
            iou_estimate: if cols[5].is_empty() { None } else { Some(num(cols[5], "iou_estimate")?) },
            split: cols[6].parse().map_err(err)?,
        });
    }
    Ok(Manifest { entries })
}

/// Recording id to its `(start, end)` pairs, sorted.
pub fn cut_list(manifest: &Manifest) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for e in &manifest.entries {
        out.entry(e.recording_id.clone()).or_default().push((e.start, e.end));
    }
    for spans in out.values_mut() {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    out
}

pub fn write_cut_list(manifest: &Manifest, w: impl Write) -> Result<(), CorpusError> {
    serde_json::to_writer_pretty(w, &cut_list(manifest)).map_err(std::io::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn entry(rec: &str, speaker: &str, start: f64, dur: f64) -> CorpusEntry {
        CorpusEntry {
            recording_id: rec.into(),
            text: format!("Satz von {speaker}."),
            start,
            end: start + dur,
            iou_estimate: Some(0.8),
            speaker_id: speaker.into(),
            split: SplitLabel::Unassigned,
        }
    }

    /// `n` speakers each speaking `hours` in 0.05 h pieces.
    fn speakers(n: usize, hours: f64) -> Vec<CorpusEntry> {
        let piece = 180.0;
        let per = (hours * 3600.0 / piece).round() as usize;
        (0..n)
            .flat_map(|s| (0..per).map(move |k| entry(&format!("rec{}", s % 4), &format!("spk{s}"), k as f64 * piece, piece)))
            .collect()
    }

    #[test]
    fn canonical_speakers() {
        assert_eq!(canonical_speaker("Anna Muster", "r"), canonical_speaker("anna  muster", "r"));
        assert_ne!(canonical_speaker("Anna Muster", "r"), canonical_speaker("A. Muster", "r"));
        assert_eq!(canonical_speaker("  ", "rec7"), "unknown-rec7");
        assert_eq!(canonical_speaker("Zoë Müller", "r"), "zoë müller");
        let mut e = vec![entry("r", "Anna Muster", 0.0, 1.0), entry("r", "anna  muster", 1.0, 1.0)];
        let mapping = dedupe_speakers(&mut e);
        assert_eq!(e[0].speaker_id, e[1].speaker_id);
        assert_eq!(mapping.len(), 2);
    }

    #[test]
    fn cap_unsatisfiable() {
        let r = split_by_speaker(speakers(3, 1.0), &SplitConfig { test_hours: 1.0, speaker_cap: 0.1, seed: 0 });
        assert!(matches!(r, Err(CorpusError::Unreachable(_))));
    }

    #[test]
    fn thirty_speakers_two_hours() {
        let cfg = SplitConfig { test_hours: 2.0, speaker_cap: 0.1, seed: 4 };
        let m = split_by_speaker(speakers(30, 0.2), &cfg).unwrap();
        let test = m.speaker_seconds(SplitLabel::Test);
        assert!((10..=11).contains(&test.len()), "{}", test.len());
        let total: f64 = test.values().sum();
        assert!(total >= 7200.0);
        assert!(test.values().all(|d| d / total < 0.1));
        m.verify(0.1).unwrap();
        assert_eq!(m.entries, split_by_speaker(speakers(30, 0.2), &cfg).unwrap().entries);
    }

    #[test]
    fn target_not_below_total() {
        assert!(split_by_speaker(speakers(2, 0.1), &SplitConfig { test_hours: 1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn tsv_and_cut_list() {
        let mut a = entry("r1", "x", 5.0, 1.25);
        a.text = "Tab\there, slash \\ and\nnewline".into();
        a.split = SplitLabel::Test;
        let mut b = entry("r2", "y", 0.1, 0.2);
        b.iou_estimate = None;
        b.split = SplitLabel::Train;
        let c = entry("r1", "x", 1.0, 1.0);
        let m = Manifest { entries: vec![a, b, c] };
        let mut buf = Vec::new();
        write_manifest_tsv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_manifest_tsv(&buf[..]).unwrap(), m);
        let cuts = cut_list(&m);
        assert_eq!(cuts.len(), 2);
        assert_eq!(cuts["r1"], vec![(1.0, 2.0), (5.0, 6.25)]);
        assert!(read_manifest_tsv("bad header\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn random_speaker_sets(seed in 0u64..10_000, n in 5usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut entries = Vec::new();
            for s in 0..n {
                for k in 0..rng.gen_range(1..20) {
                    entries.push(entry("r", &format!("s{s}"), k as f64 * 30.0, rng.gen_range(1.0..30.0)));
                }
            }
            let total: f64 = entries.iter().map(|e| e.duration()).sum();
            let cfg = SplitConfig { test_hours: total / 3600.0 * rng.gen_range(0.05..0.6), speaker_cap: 0.1, seed };
            match split_by_speaker(entries.clone(), &cfg) {
                Ok(m) => {
                    prop_assert_eq!(m.entries.len(), entries.len());
                    prop_assert!(m.verify(0.1).is_ok());
                    prop_assert!(m.entries.iter().all(|e| e.split != SplitLabel::Unassigned));
                    let mut a = Vec::new();
                    let mut b = Vec::new();
                    write_manifest_tsv(&m, &mut a).unwrap();
                    write_manifest_tsv(&split_by_speaker(entries, &cfg).unwrap(), &mut b).unwrap();
                    prop_assert_eq!(a, b);
                }
                Err(e) => prop_assert!(matches!(e, CorpusError::Unreachable(_))),
            }
        }
    }
}
