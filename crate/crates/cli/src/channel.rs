//! Channel and code ingestion from JSON files.
//!
//! A channel file holds one of three layouts, recognised by its keys:
//! - explicit table: `{"q", "m", "outputs", "rows"}`;
//! - linear combination: `{"q", "m", "terms": [{"p", "basis"}]}`;
//! - binary two-user state: `{"binary2": [p0, p1, p2, p3, p4]}`.

use std::path::Path;

use polarmac::linear_mac::{Binary2State, LinearComboMac, DEFAULT_TABLE_CAP};
use polarmac::mac::DiscreteMac;
use polarmac::polarize::CodeSpec;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub enum Channel {
    Explicit(DiscreteMac),
    Linear(LinearComboMac),
}

impl Channel {
    /// The explicit transition table, expanding linear combinations.
    pub fn explicit(&self) -> Result<DiscreteMac> {
        match self {
            Channel::Explicit(p) => Ok(p.clone()),
            Channel::Linear(c) => Ok(c.to_explicit(DEFAULT_TABLE_CAP)?),
        }
    }

    pub fn q(&self) -> u32 {
        match self {
            Channel::Explicit(p) => p.q(),
            Channel::Linear(c) => c.field().order(),
        }
    }

    pub fn users(&self) -> usize {
        match self {
            Channel::Explicit(p) => p.users(),
            Channel::Linear(c) => c.users(),
        }
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e))
}

fn decode<T: DeserializeOwned>(path: &Path, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_channel(path: &Path) -> Result<Channel> {
    let value = read_json(path)?;
    let keys = |k: &str| value.get(k).is_some();
    if keys("binary2") {
        #[derive(serde::Deserialize)]
        struct State {
            binary2: [f64; 5],
        }
        let st: State = decode(path, value)?;
        let st = Binary2State::new(st.binary2)?;
        Ok(Channel::Linear(st.to_combo()))
    } else if keys("terms") {
        Ok(Channel::Linear(decode(path, value)?))
    } else if keys("rows") {
        Ok(Channel::Explicit(decode(path, value)?))
    } else {
        Err(CliError::Config(format!(
            "{}: expected a channel with `rows`, `terms` or `binary2`",
            path.display()
        )))
    }
}

pub fn load_code(path: &Path) -> Result<CodeSpec> {
    let spec: CodeSpec = decode(path, read_json(path)?)?;
    spec.validate()?;
    Ok(spec)
}
