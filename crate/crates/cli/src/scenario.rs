//! Scenario script parsing. Line-oriented UTF-8:
//!
//! ```text
//! SEED 42
//! AT 3600 JOIN ab34ef...
//! AT 7200 LEAVE ab34ef...
//! ```
//!
//! Node ids are hex, up to 40 digits, left-padded to 160 bits. Blank lines
//! and `#` comments are ignored.

use std::path::Path;

use sdd_core::crypto::DhtId;
use sdd_core::dht::{ScriptedAction, ScriptedEvent};

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub events: Vec<ScriptedEvent>,
}

pub fn parse_node_id(hex_str: &str) -> Result<DhtId, CliError> {
    if hex_str.is_empty() || hex_str.len() > 40 || !hex_str.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(CliError::Usage(format!("bad hex node id {hex_str:?}")));
    }
    let padded = format!("{hex_str:0>40}");
    let bytes = hex::decode(padded).expect("validated hex");
    Ok(DhtId(bytes.try_into().expect("40 hex digits are 20 bytes")))
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut words = line.split_whitespace();
        let err = |msg: &str| CliError::Usage(format!("scenario line {}: {msg}", lineno + 1));
        match words.next() {
            Some("SEED") => {
                let value = words.next().ok_or_else(|| err("SEED needs a value"))?;
                scenario.seed =
                    Some(value.parse().map_err(|_| err("SEED value is not a number"))?);
            }
            Some("AT") => {
                let at: u64 = words
                    .next()
                    .ok_or_else(|| err("AT needs a time"))?
                    .parse()
                    .map_err(|_| err("AT time is not a number of virtual seconds"))?;
                let verb = words.next().ok_or_else(|| err("missing JOIN or LEAVE"))?;
                let id = parse_node_id(words.next().ok_or_else(|| err("missing node id"))?)?;
                let action = match verb {
                    "JOIN" => ScriptedAction::Join(id),
                    "LEAVE" => ScriptedAction::Leave(id),
                    other => return Err(err(&format!("unknown action {other:?}"))),
                };
                scenario.events.push(ScriptedEvent { at, action });
            }
            Some(other) => {
                return Err(err(&format!("unknown directive {other:?}")));
            }
            None => unreachable!("blank lines are skipped"),
        }
        if words.next().is_some() {
            return Err(CliError::Usage(format!(
                "scenario line {}: trailing tokens",
                lineno + 1
            )));
        }
    }
    Ok(scenario)
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("scenario {}: {e}", path.display())))?;
    parse(&text)
}
