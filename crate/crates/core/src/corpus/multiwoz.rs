//! Loader for MultiWOZ-shaped JSON: one object mapping dialogue name to a
//! `log` of turns. Source files carry no speaker field; turns alternate
//! starting with the user.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::jsonutil;

use super::{AnnotationFrame, Corpus, Dialogue, SourceFormat, Speaker, Turn};

#[derive(Deserialize)]
struct RawDialogue {
    log: Vec<RawLogEntry>,
}

#[derive(Deserialize)]
struct RawLogEntry {
    text: String,
    // 2.1+ carries per-turn dialog acts; 2.0 does not.
    dialog_act: Option<BTreeMap<String, Vec<(String, String)>>>,
    metadata: Option<serde_json::Value>,
}

pub fn load_multiwoz(path: &Path) -> Result<Corpus> {
    let raw = jsonutil::read_to_string(path)?;
    let value = jsonutil::parse_value(path, &raw)?;
    if !value.is_object() {
        return Err(Error::Schema {
            file: path.to_path_buf(),
            path: ".".into(),
            message: "expected a JSON object mapping dialogue name to dialogue".into(),
        });
    }
    let parsed: BTreeMap<String, RawDialogue> = jsonutil::from_value(path, "", value)?;
    let mut saw_dialog_act = false;
    let mut dialogues = Vec::with_capacity(parsed.len());
    for (name, raw_dialogue) in parsed {
        dialogues.push(convert_dialogue(
            &name,
            raw_dialogue,
            path,
            &mut saw_dialog_act,
        )?);
    }
    if dialogues.is_empty() {
        return Err(Error::Schema {
            file: path.to_path_buf(),
            path: ".".into(),
            message: "no dialogues found".into(),
        });
    }
    let mut corpus = Corpus::assemble(SourceFormat::Multiwoz, dialogues, path)?;
    // Known source shapes differ only in whether dialog acts ride along
    // with the log; record what we saw so runs are attributable to one.
    corpus.metadata.insert(
        "multiwoz_shape".into(),
        if saw_dialog_act {
            "2.1-like (per-turn dialog_act)"
        } else {
            "2.0-like (no dialog_act)"
        }
        .into(),
    );
    Ok(corpus)
}

fn convert_dialogue(
    name: &str,
    raw: RawDialogue,
    file: &Path,
    saw_dialog_act: &mut bool,
) -> Result<Dialogue> {
    if raw.log.is_empty() {
        return Err(Error::Schema {
            file: file.to_path_buf(),
            path: format!("{name}.log"),
            message: "empty log".into(),
        });
    }
    let mut turns = Vec::with_capacity(raw.log.len());
    for (idx, entry) in raw.log.into_iter().enumerate() {
        let speaker = if idx % 2 == 0 {
            Speaker::User
        } else {
            Speaker::System
        };
        // User turns in MultiWOZ carry an empty metadata object; a populated
        // belief state on an even index means the log does not alternate
        // USER/SYSTEM from the start.
        if speaker == Speaker::User {
            if let Some(serde_json::Value::Object(m)) = &entry.metadata {
                if !m.is_empty() {
                    return Err(Error::Schema {
                        file: file.to_path_buf(),
                        path: format!("{name}.log[{idx}].metadata"),
                        message: "belief state on a user-position turn; log does not alternate"
                            .into(),
                    });
                }
            }
        }
        let mut annotations = Vec::new();
        if let Some(acts) = entry.dialog_act {
            *saw_dialog_act = true;
            for (key, pairs) in acts {
                annotations.push(convert_act(&key, pairs));
            }
        }
        turns.push(Turn {
            speaker,
            turn_index: idx,
            text: entry.text,
            annotations,
        });
    }
    Ok(Dialogue {
        dialogue_id: name.to_string(),
        turns,
    })
}

/// `"Domain-Act"` keys split at the first dash into domain and intent; the
/// act's argument pairs become slot/value pairs verbatim.
fn convert_act(key: &str, pairs: Vec<(String, String)>) -> AnnotationFrame {
    let (domain, intent) = match key.split_once('-') {
        Some((d, a)) => (d.to_string(), a.to_string()),
        None => (key.to_string(), String::new()),
    };
    AnnotationFrame {
        domain,
        intent,
        slot_values: pairs,
    }
}
