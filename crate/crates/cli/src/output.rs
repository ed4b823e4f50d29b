use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{Map, Value};

/// Failure classes mapped to exit codes 2 (configuration or validation) and
/// 1 (runtime).
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow::anyhow!(msg.into()))
}

#[derive(Debug)]
pub struct Summary {
    pub command: &'static str,
    pub fields: Vec<(&'static str, Value)>,
    pub failed: bool,
}

impl Summary {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            fields: Vec::new(),
            failed: false,
        }
    }

    pub fn with(mut self, key: &'static str, value: impl Into<Value>) -> Self {
        self.fields.push((key, value.into()));
        self
    }
}

pub fn print_summary(s: &Summary, json: bool) {
    if json {
        let mut map = Map::new();
        map.insert("command".into(), s.command.into());
        for (k, v) in &s.fields {
            map.insert((*k).into(), v.clone());
        }
        println!("{}", Value::Object(map));
    } else {
        for (k, v) in &s.fields {
            match v {
                Value::String(text) => println!("{k}: {text}"),
                other => println!("{k}: {other}"),
            }
        }
    }
}

/// Files produced by a command, written only once everything succeeded.
#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_files_appear_together() {
        let dir = tempfile::tempdir().unwrap();
        let mut staged = Staged::default();
        staged.add(dir.path().join("a/x.txt"), "one");
        staged.add(dir.path().join("a/y.txt"), "two");
        assert!(!dir.path().join("a").exists());
        staged.commit().unwrap();
        assert_eq!(
            std::fs::read_to_string(dir.path().join("a/y.txt")).unwrap(),
            "two"
        );
        assert_eq!(std::fs::read_dir(dir.path().join("a")).unwrap().count(), 2);
    }
}
