//! APK archive access. Only the `AndroidManifest.xml` entry is read.

use std::io::{Cursor, Read};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::axml::{parse_axml, AxmlError};
use super::{extract_features, StaticFeatureSet};

const MANIFEST_ENTRY: &str = "AndroidManifest.xml";

#[derive(Error, Debug)]
pub enum ApkError {
    #[error("not a zip archive: {0}")]
    NotAnArchive(String),
    #[error("archive has no {MANIFEST_ENTRY}")]
    MissingManifest,
    #[error("manifest: {0}")]
    Manifest(#[from] AxmlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hex SHA-256 of the APK bytes, used as the stable apk id.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_bytes(apk: &[u8]) -> Result<Vec<u8>, ApkError> {
    let mut zip = zip::ZipArchive::new(Cursor::new(apk)).map_err(|e| ApkError::NotAnArchive(e.to_string()))?;
    let mut entry = match zip.by_name(MANIFEST_ENTRY) {
        Ok(e) => e,
        Err(zip::result::ZipError::FileNotFound) => return Err(ApkError::MissingManifest),
        Err(e) => return Err(ApkError::NotAnArchive(e.to_string())),
    };
    let mut out = Vec::with_capacity(entry.size().min(1 << 24) as usize);
    entry.read_to_end(&mut out)?;
    Ok(out)
}

/// Extract the feature set of an in-memory APK, keyed by its SHA-256.
pub fn features_from_apk_bytes(apk: &[u8]) -> Result<StaticFeatureSet, ApkError> {
    let manifest = parse_axml(&manifest_bytes(apk)?)?;
    Ok(extract_features(&manifest, &sha256_hex(apk)))
}

pub fn features_from_apk(path: impl AsRef<Path>) -> Result<StaticFeatureSet, ApkError> {
    let bytes = std::fs::read(path)?;
    features_from_apk_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn garbage_is_not_an_archive() {
        assert!(matches!(
            features_from_apk_bytes(b"nope"),
            Err(ApkError::NotAnArchive(_))
        ));
    }

    #[test]
    fn archive_without_manifest() {
        let mut buf = Vec::new();
        {
            let mut w = zip::ZipWriter::new(Cursor::new(&mut buf));
            w.start_file("classes.dex", zip::write::SimpleFileOptions::default())
                .unwrap();
            std::io::Write::write_all(&mut w, b"dex\n035").unwrap();
            w.finish().unwrap();
        }
        assert!(matches!(features_from_apk_bytes(&buf), Err(ApkError::MissingManifest)));
    }
}
