use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// File name of the artifact.
    pub name: String,
    pub sha256: String,
}

impl ArtifactRef {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        ArtifactRef {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Sidecar describing an artifact by content hash, with the hashes of the
/// artifacts it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub artifact: ArtifactRef,
    #[serde(default)]
    pub inputs: BTreeMap<String, ArtifactRef>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(kind: &str, path: &Path, bytes: &[u8]) -> Self {
        Manifest {
            kind: kind.to_string(),
            artifact: ArtifactRef::new(path, bytes),
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, role: &str, input: ArtifactRef) -> Self {
        self.inputs.insert(role.to_string(), input);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn sidecar_path(artifact: &Path) -> PathBuf {
        let mut s = artifact.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))
    }

    /// The artifact's bytes hash to the recorded value.
    pub fn verify(&self, bytes: &[u8]) -> Result<(), PipelineError> {
        let actual = sha256_hex(bytes);
        if actual != self.artifact.sha256 {
            return Err(PipelineError::Manifest(format!(
                "{} `{}` changed since its manifest was written ({} != {})",
                self.kind, self.artifact.name, actual, self.artifact.sha256
            )));
        }
        Ok(())
    }

    /// If this artifact records an input under `role`, it must have hash
    /// `sha256`.
    pub fn check_input(&self, role: &str, sha256: &str) -> Result<(), PipelineError> {
        match self.inputs.get(role) {
            Some(r) if r.sha256 != sha256 => Err(PipelineError::Manifest(format!(
                "{} `{}` was derived from a different {role} (`{}`)",
                self.kind, self.artifact.name, r.name
            ))),
            _ => Ok(()),
        }
    }
}
