//! Normalized dialogue corpus: loaders for SGD-shaped and MultiWOZ-shaped
//! data, a JSON-lines on-disk format, and per-turn annotation text.

mod multiwoz;
mod sgd;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonutil;

pub use multiwoz::load_multiwoz;
pub use sgd::load_sgd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => write!(f, "USER"),
            Speaker::System => write!(f, "SYSTEM"),
        }
    }
}

/// One task annotation attached to a turn. All fields are stored verbatim
/// from the source; empty strings mean the source carried no value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFrame {
    pub domain: String,
    pub intent: String,
    pub slot_values: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub turn_index: usize,
    pub text: String,
    pub annotations: Vec<AnnotationFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SourceFormat {
    Sgd,
    Multiwoz,
    Normalized,
}

/// An immutable, deterministic corpus: dialogues are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub source_format: SourceFormat,
    pub dialogues: Vec<Dialogue>,
    /// Loader notes such as the detected MultiWOZ shape. Not exported.
    pub metadata: BTreeMap<String, String>,
}

impl Corpus {
    /// Build a corpus from in-memory dialogues, enforcing every invariant
    /// (unique ids, non-empty turns, consecutive indices, clean annotation
    /// fields). Dialogues are re-sorted by id.
    pub fn new(source_format: SourceFormat, dialogues: Vec<Dialogue>) -> Result<Self> {
        Self::assemble(source_format, dialogues, Path::new("<memory>"))
    }

    pub(crate) fn assemble(
        source_format: SourceFormat,
        mut dialogues: Vec<Dialogue>,
        file: &Path,
    ) -> Result<Self> {
        dialogues.sort_by(|a, b| a.dialogue_id.cmp(&b.dialogue_id));
        validate_dialogues(&dialogues, file)?;
        Ok(Corpus {
            source_format,
            dialogues,
            metadata: BTreeMap::new(),
        })
    }

    pub fn dialogue_count(&self) -> usize {
        self.dialogues.len()
    }

    pub fn turn_count(&self) -> usize {
        self.dialogues.iter().map(|d| d.turns.len()).sum()
    }

    /// Turns in deterministic corpus iteration order (dialogue id, then
    /// turn index).
    pub fn turns(&self) -> impl Iterator<Item = (&Dialogue, &Turn)> {
        self.dialogues
            .iter()
            .flat_map(|d| d.turns.iter().map(move |t| (d, t)))
    }
}

/// Deterministic per-turn annotation string: for each frame in order,
/// domain, intent, then `slot value` pairs, all joined with `", "`.
/// Empty components are skipped; a turn with no annotations yields `""`.
pub fn annotation_text(turn: &Turn) -> String {
    let mut components: Vec<String> = Vec::new();
    for frame in &turn.annotations {
        if !frame.domain.is_empty() {
            components.push(frame.domain.clone());
        }
        if !frame.intent.is_empty() {
            components.push(frame.intent.clone());
        }
        for (slot, value) in &frame.slot_values {
            let pair = format!("{slot} {value}");
            let pair = pair.trim();
            if !pair.is_empty() {
                components.push(pair.to_string());
            }
        }
    }
    components.join(", ")
}

fn has_control_chars(s: &str) -> bool {
    s.chars().any(|c| c.is_control())
}

fn validate_dialogues(dialogues: &[Dialogue], file: &Path) -> Result<()> {
    let mut seen: HashSet<&str> = HashSet::with_capacity(dialogues.len());
    for (d_idx, dialogue) in dialogues.iter().enumerate() {
        let at = |rest: String| Error::Schema {
            file: file.to_path_buf(),
            path: format!("dialogues[{d_idx}]{rest}"),
            message: String::new(),
        };
        if !seen.insert(&dialogue.dialogue_id) {
            return Err(Error::Schema {
                file: file.to_path_buf(),
                path: format!("dialogues[{d_idx}].dialogue_id"),
                message: format!("duplicate dialogue id {:?}", dialogue.dialogue_id),
            });
        }
        if dialogue.turns.is_empty() {
            return Err(Error::Schema {
                file: file.to_path_buf(),
                path: format!("dialogues[{d_idx}].turns"),
                message: format!("dialogue {:?} has no turns", dialogue.dialogue_id),
            });
        }
        for (t_idx, turn) in dialogue.turns.iter().enumerate() {
            if turn.turn_index != t_idx {
                return Err(Error::Schema {
                    file: file.to_path_buf(),
                    path: format!("dialogues[{d_idx}].turns[{t_idx}].turn_index"),
                    message: format!("expected {t_idx}, found {}", turn.turn_index),
                });
            }
            if turn.text.trim().is_empty() {
                return Err(Error::Schema {
                    file: file.to_path_buf(),
                    path: format!("dialogues[{d_idx}].turns[{t_idx}].text"),
                    message: "empty utterance text".into(),
                });
            }
            for (f_idx, frame) in turn.annotations.iter().enumerate() {
                let fields = std::iter::once(("domain", frame.domain.as_str()))
                    .chain(std::iter::once(("intent", frame.intent.as_str())))
                    .chain(
                        frame
                            .slot_values
                            .iter()
                            .flat_map(|(s, v)| [("slot", s.as_str()), ("value", v.as_str())]),
                    );
                for (name, value) in fields {
                    if has_control_chars(value) {
                        let mut err = at(format!(".turns[{t_idx}].annotations[{f_idx}].{name}"));
                        if let Error::Schema { message, .. } = &mut err {
                            *message = format!("control character in {name} {value:?}");
                        }
                        return Err(err);
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Normalized JSON-lines format
// ---------------------------------------------------------------------------

/// Write dialogues as JSON-lines, one dialogue per line, UTF-8, LF endings.
pub fn write_normalized(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for dialogue in &corpus.dialogues {
        let line = serde_json::to_string(dialogue)
            .map_err(|e| Error::Validation(format!("serialize dialogue: {e}")))?;
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load a normalized JSON-lines corpus.
pub fn read_normalized(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut dialogues = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = jsonutil::parse_value(path, &line)?;
        let dialogue: Dialogue =
            jsonutil::from_value(path, &format!("line {}", line_no + 1), value)?;
        dialogues.push(dialogue);
    }
    Corpus::assemble(SourceFormat::Normalized, dialogues, path)
}
