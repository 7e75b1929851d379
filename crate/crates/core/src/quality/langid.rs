use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::QualityError;
use crate::ingest::normalize_str;

/// Code returned when a text is too short or ambiguous to decide.
pub const UNKNOWN_LANGUAGE: &str = "unknown";

pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<String, QualityError>;
}

struct Profile {
    code: &'static str,
    stopwords: &'static [&'static str],
    trigrams: &'static [&'static str],
}

const PROFILES: [Profile; 4] = [
    Profile {
        code: "de",
        stopwords: &[
            "der", "die", "das", "und", "ist", "nicht", "ein", "eine", "einen", "dem", "den", "des",
            "zu", "mit", "sich", "auf", "für", "von", "im", "wir", "ich", "sie", "es", "auch",
            "noch", "wird", "werden", "hat", "haben", "sind", "dass", "aber", "oder", "wie", "bei",
            "nach", "aus", "um", "über", "so", "vom", "zum", "zur", "kann", "nur", "diese", "wenn",
        ],
        trigrams: &["sch", "ich", "ein", "der", "und", "ung", "cht", "die", "gen", "ten"],
    },
    Profile {
        code: "fr",
        stopwords: &[
            "le", "la", "les", "de", "des", "du", "et", "est", "un", "une", "que", "qui", "dans",
            "pour", "pas", "sur", "au", "aux", "ce", "il", "elle", "nous", "vous", "ne", "se",
            "avec", "par", "mais", "ou", "sont", "cette", "leur",
        ],
        trigrams: &["les", "ent", "ion", "que", "tio", "our", "eur", "ait", "des", "men"],
    },
    Profile {
        code: "it",
        stopwords: &[
            "il", "lo", "la", "gli", "le", "di", "del", "della", "e", "è", "un", "una", "che",
            "per", "non", "con", "nel", "nella", "si", "sono", "questo", "questa", "da", "dei",
            "delle", "al", "alla", "ma", "anche", "come",
        ],
        trigrams: &["che", "ell", "del", "ion", "one", "per", "are", "ato", "ent", "zio"],
    },
    Profile {
        code: "en",
        stopwords: &[
            "the", "and", "is", "of", "to", "in", "that", "it", "for", "on", "with", "as", "was",
            "are", "be", "this", "by", "not", "we", "you", "have", "has", "from", "or", "but",
            "they", "which", "will", "an", "a",
        ],
        trigrams: &["the", "ing", "and", "ion", "tio", "ent", "her", "hat", "tha", "ere"],
    },
];

/// Built-in detector: one point per stopword token, a tenth of a point per
/// characteristic trigram. Fewer than three tokens, no evidence, or a tie
/// for first place gives [`UNKNOWN_LANGUAGE`].
#[derive(Debug, Default, Clone, Copy)]
pub struct ProfileDetector;

impl ProfileDetector {
    pub fn scores(&self, text: &str) -> Vec<(&'static str, f64)> {
        let norm = normalize_str(text);
        let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        PROFILES
            .iter()
            .map(|p| {
                let stop = tokens.iter().filter(|t| p.stopwords.contains(t)).count() as f64;
                let tri = tokens
                    .iter()
                    .map(|t| {
                        let c: Vec<char> = t.chars().collect();
                        c.windows(3)
                            .filter(|w| p.trigrams.contains(&w.iter().collect::<String>().as_str()))
                            .count()
                    })
                    .sum::<usize>() as f64;
                (p.code, stop + 0.1 * tri)
            })
            .collect()
    }
}

impl LanguageDetector for ProfileDetector {
    fn detect(&self, text: &str) -> Result<String, QualityError> {
        if normalize_str(text).split(' ').filter(|t| !t.is_empty()).count() < 3 {
            return Ok(UNKNOWN_LANGUAGE.into());
        }
        let mut scores = self.scores(text);
        scores.sort_by(|a, b| b.1.total_cmp(&a.1));
        let code = if scores[0].1 == 0.0 || scores[0].1 == scores[1].1 {
            UNKNOWN_LANGUAGE
        } else {
            scores[0].0
        };
        Ok(code.into())
    }
}

/// External detector speaking a line protocol: one sentence per line on its
/// standard input, one language code per line back.
pub struct CommandDetector {
    inner: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl CommandDetector {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, QualityError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| QualityError::Detector(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(CommandDetector { inner: Mutex::new((child, stdin, stdout)) })
    }
}

impl LanguageDetector for CommandDetector {
    fn detect(&self, text: &str) -> Result<String, QualityError> {
        let mut guard = self.inner.lock().expect("detector lock");
        let (_, stdin, stdout) = &mut *guard;
        let line = text.replace(['\n', '\r'], " ");
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| QualityError::Detector(e.to_string()))?;
        let mut answer = String::new();
        let n = stdout
            .read_line(&mut answer)
            .map_err(|e| QualityError::Detector(e.to_string()))?;
        if n == 0 {
            return Err(QualityError::Detector("detector closed its output".into()));
        }
        Ok(answer.trim().to_owned())
    }
}

impl Drop for CommandDetector {
    fn drop(&mut self) {
        if let Ok(inner) = self.inner.get_mut() {
            let _ = inner.0.kill();
            let _ = inner.0.wait();
        }
    }
}
