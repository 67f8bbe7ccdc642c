//! Output directory handling: atomic file writes and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";
pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// JSON document with a leading `schema_version` field.
#[derive(Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema_version: &'static str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn to_json<T: Serialize>(body: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
    .expect("serializable output");
    v.push(b'\n');
    v
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: &'static str,
    subcommand: &'a str,
    inputs: &'a [PathBuf],
    parameters: &'a serde_json::Value,
    seed: u64,
    tool_version: &'static str,
    outputs: &'a [PathBuf],
    wall_time_ms: u128,
}

/// Collects the files written by one subcommand run.
pub struct Run {
    dir: PathBuf,
    subcommand: &'static str,
    seed: u64,
    inputs: Vec<PathBuf>,
    parameters: serde_json::Value,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(dir: &Path, subcommand: &'static str, seed: u64, parameters: serde_json::Value) -> Self {
        Self {
            dir: dir.to_path_buf(),
            subcommand,
            seed,
            inputs: Vec::new(),
            parameters,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        self.write_path(path, bytes)
    }

    /// Writes to an explicit path, which may lie outside the directory.
    pub fn write_path(&mut self, path: PathBuf, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn finish(self) -> io::Result<()> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            subcommand: self.subcommand,
            inputs: &self.inputs,
            parameters: &self.parameters,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: &self.outputs,
            wall_time_ms: self.started.elapsed().as_millis(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
        bytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.txt")]);
    }

    #[test]
    fn versioned_json_leads_with_schema_version() {
        #[derive(Serialize)]
        struct Body {
            x: f64,
        }
        let s = String::from_utf8(to_json(&Body { x: 0.1 })).unwrap();
        assert!(s.starts_with("{\n  \"schema_version\": \"1\",\n  \"x\": 0.1"), "{s}");
    }
}
