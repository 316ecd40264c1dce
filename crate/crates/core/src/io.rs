//! Versioned JSON file formats for programs, architectures, profiles,
//! and plans.
//!
//! Program, architecture, and profile files are objects carrying
//! `"schema_version": 1`; the profile loader also accepts a bare JSON
//! array of entries.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Architecture, ProfileEntry, Program, TuningProfile};
use crate::pdl::Plan;
use crate::scalar::Scalar;

/// Current version of every on-disk schema.
pub const SCHEMA_VERSION: u64 = 1;

fn load_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value.as_object_mut().ok_or(Error::SchemaVersion {
        found: 0,
        expected: SCHEMA_VERSION,
    })?;
    let found = obj
        .remove("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0);
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_program<T: Scalar + DeserializeOwned>(path: impl AsRef<Path>) -> Result<Program<T>> {
    load_versioned(path.as_ref())
}

pub fn load_architecture<T: Scalar + DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<Architecture<T>> {
    load_versioned(path.as_ref())
}

/// Load a tuning profile: either `{"schema_version": 1, "entries": [...]}`
/// or a bare array of `{section, device, layout, time_ns}` entries.
pub fn load_profile<T: Scalar + DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<TuningProfile<T>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let entries: Vec<ProfileEntry<T>> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        serde_json::Value::Object(mut obj) => {
            let found = obj
                .remove("schema_version")
                .and_then(|v| v.as_u64())
                .unwrap_or(0);
            if found != SCHEMA_VERSION {
                return Err(Error::SchemaVersion {
                    found,
                    expected: SCHEMA_VERSION,
                });
            }
            let entries = obj.remove("entries").ok_or_else(|| {
                Error::InvalidInput("profile object has no 'entries' array".to_string())
            })?;
            serde_json::from_value(entries)?
        }
        _ => {
            return Err(Error::InvalidInput(
                "profile file must hold an object or an array".to_string(),
            ))
        }
    };
    TuningProfile::from_entries(entries)
}

#[derive(Serialize)]
struct PlanFile<'a, T> {
    schema_version: u64,
    program: &'a str,
    #[serde(flatten)]
    plan: &'a Plan<T>,
}

/// Pretty-printed plan JSON with a trailing newline.
pub fn plan_to_json<T: Scalar + Serialize>(plan: &Plan<T>, program_name: &str) -> String {
    let file = PlanFile {
        schema_version: SCHEMA_VERSION,
        program: program_name,
        plan,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plans serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_schema_version() {
        let dir = std::env::temp_dir().join("layplan-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad_version.json");
        std::fs::write(&path, r#"{"schema_version": 9, "entries": []}"#).unwrap();
        let err = load_profile::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 9, .. }));
    }

    #[test]
    fn accepts_bare_profile_arrays() {
        let dir = std::env::temp_dir().join("layplan-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bare_profile.json");
        std::fs::write(
            &path,
            r#"[{"section": "s1", "device": "cpu", "layout": "{A}", "time_ns": 5.0}]"#,
        )
        .unwrap();
        let prof = load_profile::<f64>(&path).unwrap();
        assert_eq!(prof.lookup("s1", "cpu", "{A}"), Some(5.0));
    }
}
