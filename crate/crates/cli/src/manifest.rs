//! JSON run manifests: every artifact written by the CLI gets a sibling
//! `<name>.manifest.json` recording the inputs needed to reproduce it.
//! Reruns differ only in the `created_unix` timestamp.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Manifest path beside an artifact: `out.csv` -> `out.csv.manifest.json`.
pub fn sibling_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Writes the manifest, stamping provenance fields onto the body.
pub fn write(path: &Path, body: serde_json::Value) -> io::Result<()> {
    let mut body = body;
    if let Some(map) = body.as_object_mut() {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        map.insert("created_unix".into(), serde_json::json!(created));
        map.insert(
            "version".into(),
            serde_json::json!(env!("CARGO_PKG_VERSION")),
        );
        map.insert(
            "git_describe".into(),
            serde_json::json!(env!("NONCIRC_GIT_DESCRIBE")),
        );
    }
    let text = serde_json::to_string_pretty(&body).map_err(io::Error::other)?;
    std::fs::write(path, format!("{text}\n"))
}
