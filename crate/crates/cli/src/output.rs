//! Staged output directories, CSV rendering and file digests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Fixed scientific rendering with 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A file written into the staging directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Outputs collect in a hidden sibling of the target directory and move into
/// place only when the run finishes; dropping an uncommitted stage deletes it.
#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Config(format!("out: `{}` does not name a directory", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            dir,
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&self, name: &str, header: &[&str]) -> Result<CsvWriter, CliError> {
        CsvWriter::create(self.path(name), name, header)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<OutputFile, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(OutputFile {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<OutputFile, CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("serialising {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Move every staged file into the target directory, replacing files of
    /// the same name and leaving any others alone.
    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        let mut entries: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| CliError::io(&self.dir, e))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(&self.dir, e))?;
        entries.sort();
        for from in entries {
            let to = self
                .target
                .join(from.file_name().expect("directory entries have names"));
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
        }
        fs::remove_dir(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Buffered CSV writer that hashes what it writes.
pub struct CsvWriter {
    name: String,
    path: PathBuf,
    out: BufWriter<File>,
    hasher: Sha256,
    bytes: u64,
    columns: usize,
    line: String,
}

impl CsvWriter {
    fn create(path: PathBuf, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = Self {
            name: name.to_string(),
            path,
            out: BufWriter::new(file),
            hasher: Sha256::new(),
            bytes: 0,
            columns: header.len(),
            line: String::new(),
        };
        w.line = header.join(",");
        w.flush_line()?;
        Ok(w)
    }

    fn flush_line(&mut self) -> Result<(), CliError> {
        self.line.push('\n');
        self.out
            .write_all(self.line.as_bytes())
            .map_err(|e| CliError::io(&self.path, e))?;
        self.hasher.update(self.line.as_bytes());
        self.bytes += self.line.len() as u64;
        self.line.clear();
        Ok(())
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        debug_assert_eq!(values.len(), self.columns, "{}", self.name);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.line.push(',');
            }
            self.line.push_str(&fmt_f64(*v));
        }
        self.flush_line()
    }

    /// A row of pre-rendered cells, for integer or flag columns.
    pub fn cells(&mut self, cells: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.columns, "{}", self.name);
        self.line = cells.join(",");
        self.flush_line()
    }

    pub fn finish(mut self) -> Result<OutputFile, CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(OutputFile {
            name: self.name,
            bytes: self.bytes,
            sha256: self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
        })
    }
}
