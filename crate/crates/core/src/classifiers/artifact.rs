//! Artifact container: one JSON header line, then a bincode payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format_version: u32,
    /// `svm`, `mnb`, `forest`, `boost`, `cnn`, or a pipeline kind such as `pipeline/acoustic`.
    pub kind: String,
    pub config: serde_json::Value,
    pub split_id: String,
    pub seed: u64,
    pub payload_len: usize,
}

pub fn encode_artifact<T: Serialize>(
    kind: &str,
    config: serde_json::Value,
    split_id: &str,
    seed: u64,
    payload: &T,
) -> Vec<u8> {
    let payload = bincode::serialize(payload).expect("artifact payload serializes");
    let header = ArtifactHeader {
        format_version: ARTIFACT_FORMAT_VERSION,
        kind: kind.to_string(),
        config,
        split_id: split_id.to_string(),
        seed,
        payload_len: payload.len(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out
}

pub fn decode_artifact<T: DeserializeOwned>(bytes: &[u8], expected_kind: &str) -> Result<(ArtifactHeader, T)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::data("artifact has no header line"))?;
    let header: ArtifactHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::data(format!("bad artifact header: {e}")))?;
    if header.format_version != ARTIFACT_FORMAT_VERSION {
        return Err(Error::data(format!(
            "artifact format_version {} is not supported (expected {ARTIFACT_FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.kind != expected_kind {
        return Err(Error::data(format!(
            "artifact holds `{}`, expected `{expected_kind}`",
            header.kind
        )));
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != header.payload_len {
        return Err(Error::data(format!(
            "artifact payload is {} bytes, header says {}",
            payload.len(),
            header.payload_len
        )));
    }
    let value = bincode::deserialize(payload).map_err(|e| Error::data(format!("corrupt artifact payload: {e}")))?;
    Ok((header, value))
}

pub fn write_artifact(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_model(path: &Path, model: &Model, split_id: &str, seed: u64) -> Result<()> {
    let bytes = encode_artifact(model.kind().as_str(), model.config_json(), split_id, seed, model);
    write_artifact(path, &bytes)
}

/// Load a bare model artifact of any classifier kind.
pub fn load_model(path: &Path) -> Result<(ArtifactHeader, Model)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let kind = peek_kind(&bytes)?;
    let (header, model): (ArtifactHeader, Model) = decode_artifact(&bytes, &kind)?;
    if model.kind().as_str() != header.kind {
        return Err(Error::data("artifact kind does not match its payload"));
    }
    Ok((header, model))
}

fn peek_kind(bytes: &[u8]) -> Result<String> {
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let header: ArtifactHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::data(format!("bad artifact header: {e}")))?;
    Ok(header.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{mnb_train, svm_train, Classifier, NbConfig, SvmConfig};
    use crate::label::Label;

    #[test]
    fn round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.2, 0.9]];
        let y = vec![Label::Truthful, Label::Deceptive, Label::Truthful];
        for model in [
            Model::Svm(svm_train(&x, &y, &SvmConfig::default()).unwrap()),
            Model::Mnb(mnb_train(&x, &y, &NbConfig::default()).unwrap()),
        ] {
            let path = dir.path().join(format!("{}.model", model.kind().as_str()));
            save_model(&path, &model, "split-abc", 9).unwrap();
            let (h, back) = load_model(&path).unwrap();
            assert_eq!((h.split_id.as_str(), h.seed, h.kind.as_str()), ("split-abc", 9, model.kind().as_str()));
            assert_eq!(back, model);
            assert_eq!(back.score(&[0.5, 0.5]).unwrap(), model.score(&[0.5, 0.5]).unwrap());

            let bytes = fs::read(&path).unwrap();
            let nl = bytes.iter().position(|&c| c == b'\n').unwrap();
            let head = String::from_utf8(bytes[..nl].to_vec()).unwrap();
            let mut bumped = head.replacen("\"format_version\":1", "\"format_version\":2", 1).into_bytes();
            bumped.extend_from_slice(&bytes[nl..]);
            assert!(matches!(decode_artifact::<Model>(&bumped, &h.kind), Err(Error::Data(_))));
            assert!(matches!(decode_artifact::<Model>(&bytes[..bytes.len() - 1], &h.kind), Err(Error::Data(_))));
            assert!(matches!(decode_artifact::<Model>(&bytes, "cnn"), Err(Error::Data(_))));
        }
    }
}
