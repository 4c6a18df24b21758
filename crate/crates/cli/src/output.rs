//! Output files: CSV with `#` metadata lines above the header, and JSON
//! documents carrying the same metadata as fields.

use std::path::{Path, PathBuf};

use crate::config::Experiment;
use crate::error::CliError;

pub const VERSION: &str = concat!("hopflab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

fn metadata(exp: &Experiment, command: &str) -> String {
    let mut s = format!("# {VERSION}\n# command: {command}\n# config:\n");
    for line in exp.text.lines() {
        s.push_str("#   ");
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}

pub fn csv(exp: &Experiment, command: &str, name: &str, header: &str, rows: &[String]) -> Output {
    let mut contents = metadata(exp, command);
    contents.push_str(header);
    contents.push('\n');
    for row in rows {
        contents.push_str(row);
        contents.push('\n');
    }
    Output {
        name: name.to_string(),
        contents,
    }
}

pub fn json(exp: &Experiment, command: &str, name: &str, result: serde_json::Value) -> Output {
    let doc = serde_json::json!({
        "version": VERSION,
        "command": command,
        "config": exp.json(),
        "result": result,
    });
    let mut contents = serde_json::to_string_pretty(&doc).expect("serializable");
    contents.push('\n');
    Output {
        name: name.to_string(),
        contents,
    }
}

/// The lines of a CSV file below its metadata.
pub fn csv_body(contents: &str) -> Vec<&str> {
    contents.lines().filter(|l| !l.starts_with('#')).collect()
}

pub fn write_all(dir: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    outputs
        .iter()
        .map(|o| {
            let path = dir.join(&o.name);
            std::fs::write(&path, &o.contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}
