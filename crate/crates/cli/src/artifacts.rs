//! Artifact layout under the output root, atomic writes and provenance.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seen_core::explain::ExplainerKind;
use seen_core::synth::DatasetKind;

use crate::settings::Settings;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn dataset(&self, kind: DatasetKind, data_seed: u64) -> PathBuf {
        self.root.join("data").join(format!("{kind}-d{data_seed}.json"))
    }

    pub fn model(&self, kind: DatasetKind, data_seed: u64, seed: u64) -> PathBuf {
        self.root
            .join("models")
            .join(format!("{kind}-d{data_seed}-m{seed}.json"))
    }

    pub fn explanation(&self, kind: DatasetKind, explainer: ExplainerKind, seed: u64, node: usize, tag: &str) -> PathBuf {
        self.root
            .join("explanations")
            .join(format!("{kind}-{explainer}-m{seed}-v{node}-{tag}.json"))
    }

    pub fn scan_stem(&self, kind: DatasetKind, explainer: ExplainerKind) -> PathBuf {
        self.root.join("scans").join(format!("{kind}-{explainer}"))
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("report").join("summary.json")
    }
}

/// Appends `suffix` to the final path component.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Where an artifact came from: tool version, command, resolved settings and
/// digests of every file read to produce it.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub settings: Settings,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: &str, settings: &Settings) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            settings: settings.clone(),
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path, bytes: &[u8]) -> Self {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        self
    }
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Serializes `value` as a JSON object with a `provenance` member added.
pub fn write_json_with_provenance<T: Serialize>(path: &Path, value: &T, prov: &Provenance) -> Result<(), CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| CliError::Io("artifact is not a JSON object".into()))?;
    obj.insert(
        "provenance".into(),
        serde_json::to_value(prov).map_err(|e| CliError::Io(e.to_string()))?,
    );
    let text = serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// Writes a non-JSON artifact plus a `<file>.provenance.json` sidecar.
pub fn write_with_sidecar(path: &Path, bytes: &[u8], prov: &Provenance) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    let mut prov = prov.clone();
    prov.inputs.push(InputDigest {
        path: format!("(artifact) {}", path.display()),
        sha256: sha256_hex(bytes),
    });
    let text = serde_json::to_string_pretty(&prov).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&with_suffix(path, ".provenance.json"), text.as_bytes())
}

/// Reads an artifact produced by an earlier stage.
pub fn read_artifact(path: &Path, hint: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Missing(path.to_path_buf(), hint.to_string())
        } else {
            CliError::io(path, e)
        }
    })
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("{}: malformed artifact: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/file.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
