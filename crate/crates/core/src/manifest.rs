//! Run directories: output files written atomically and inventoried with
//! SHA-256 checksums in `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NlsError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub status: String,
    pub hypotheses: Option<serde_json::Value>,
    pub spectrum: Option<serde_json::Value>,
    pub files: Vec<FileEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> NlsError {
    NlsError::Io(format!("{}: {e}", path.display()))
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<RunDir> {
        fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
        Ok(RunDir {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `name` inside the run directory and records its checksum.
    /// Rewriting a name replaces its entry.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name.contains(['/', '\\']) || name == MANIFEST_NAME {
            return Err(NlsError::InvalidArgument(format!("invalid output name {name}")));
        }
        write_atomic(&self.path.join(name), bytes)?;
        let entry = FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        };
        match self.files.iter_mut().find(|f| f.name == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| NlsError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest last, with the inventory filled in.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.files = self.files;
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| NlsError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.path.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Re-reads every inventoried file and compares checksums.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| NlsError::Io(e.to_string()))?;
    for f in &manifest.files {
        let p = dir.join(&f.name);
        let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(NlsError::Io(format!("checksum mismatch for {}", f.name)));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest {
            command: "solve".into(),
            artifact_version: "0".into(),
            config_sha256: sha256_hex(b""),
            seed: 0,
            started: String::new(),
            finished: String::new(),
            wall_time_s: 0.0,
            exit_code: 0,
            status: "ok".into(),
            hypotheses: None,
            spectrum: None,
            files: Vec::new(),
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn inventory_matches_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(&dir.path().join("r")).unwrap();
        run.write("a.csv", b"x\n1\n").unwrap();
        run.write("a.csv", b"x\n2\n").unwrap();
        run.write_json("b.json", &vec![1, 2]).unwrap();
        assert!(run.write("../escape", b"").is_err());
        let m = run.finish(manifest()).unwrap();
        assert_eq!(m.files.len(), 2);
        let back = verify_manifest(&dir.path().join("r")).unwrap();
        assert_eq!(back.files, m.files);
        std::fs::write(dir.path().join("r/a.csv"), b"tampered").unwrap();
        assert!(verify_manifest(&dir.path().join("r")).is_err());
    }
}
