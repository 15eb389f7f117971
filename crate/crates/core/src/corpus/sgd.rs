//! Loader for schema-guided-dataset-shaped JSON: each file is an array of
//! dialogue objects carrying per-turn frames with service, state and actions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::jsonutil;

use super::{AnnotationFrame, Corpus, Dialogue, SourceFormat, Speaker, Turn};

#[derive(Deserialize)]
struct RawDialogue {
    dialogue_id: String,
    turns: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<RawFrame>,
}

#[derive(Deserialize)]
struct RawFrame {
    #[serde(default)]
    service: String,
    state: Option<RawState>,
    #[serde(default)]
    actions: Vec<RawAction>,
}

#[derive(Deserialize)]
struct RawState {
    #[serde(default)]
    active_intent: String,
    // BTreeMap keeps slot order deterministic regardless of source key order.
    #[serde(default)]
    slot_values: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct RawAction {
    slot: Option<String>,
    #[serde(default)]
    values: Vec<String>,
}

/// Load one SGD-shaped JSON file, or every `*.json` in a directory
/// (`schema.json` is skipped — it describes services, not dialogues).
pub fn load_sgd(path: &Path) -> Result<Corpus> {
    let files = dialogue_files(path)?;
    let mut dialogues = Vec::new();
    for file in &files {
        let raw = jsonutil::read_to_string(file)?;
        let value = jsonutil::parse_value(file, &raw)?;
        if !value.is_array() {
            return Err(Error::Schema {
                file: file.clone(),
                path: ".".into(),
                message: "expected a JSON array of dialogue objects".into(),
            });
        }
        let parsed: Vec<RawDialogue> = jsonutil::from_value(file, "", value)?;
        for (idx, raw_dialogue) in parsed.into_iter().enumerate() {
            dialogues.push(convert_dialogue(raw_dialogue, file, idx)?);
        }
    }
    if dialogues.is_empty() {
        return Err(Error::Schema {
            file: path.to_path_buf(),
            path: ".".into(),
            message: "no dialogues found".into(),
        });
    }
    Corpus::assemble(SourceFormat::Sgd, dialogues, path)
}

fn dialogue_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "json")
                && p.file_name().is_some_and(|n| n != "schema.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no .json dialogue files in directory",
            ),
        ));
    }
    Ok(files)
}

fn convert_dialogue(raw: RawDialogue, file: &Path, idx: usize) -> Result<Dialogue> {
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (t_idx, raw_turn) in raw.turns.into_iter().enumerate() {
        let speaker = match raw_turn.speaker.as_str() {
            "USER" => Speaker::User,
            "SYSTEM" => Speaker::System,
            other => {
                return Err(Error::Schema {
                    file: file.to_path_buf(),
                    path: format!("[{idx}].turns[{t_idx}].speaker"),
                    message: format!("unknown speaker {other:?}"),
                })
            }
        };
        let annotations = raw_turn.frames.into_iter().map(convert_frame).collect();
        turns.push(Turn {
            speaker,
            turn_index: t_idx,
            text: raw_turn.utterance,
            annotations,
        });
    }
    Ok(Dialogue {
        dialogue_id: raw.dialogue_id,
        turns,
    })
}

/// service -> domain, state.active_intent -> intent, and the union of
/// state.slot_values with per-action values -> slot_values. A slot with
/// several values contributes one pair per value; exact duplicate pairs
/// collapse, first occurrence wins the position.
fn convert_frame(raw: RawFrame) -> AnnotationFrame {
    let mut intent = String::new();
    let mut slot_values: Vec<(String, String)> = Vec::new();
    let push_unique = |slot_values: &mut Vec<(String, String)>, pair: (String, String)| {
        if !slot_values.contains(&pair) {
            slot_values.push(pair);
        }
    };
    if let Some(state) = raw.state {
        intent = state.active_intent;
        for (slot, values) in state.slot_values {
            for value in values {
                push_unique(&mut slot_values, (slot.clone(), value));
            }
        }
    }
    for action in raw.actions {
        if let Some(slot) = action.slot {
            for value in action.values {
                push_unique(&mut slot_values, (slot.clone(), value));
            }
        }
    }
    AnnotationFrame {
        domain: raw.service,
        intent,
        slot_values,
    }
}
