//! Output files. CSVs open with `# key: value` metadata lines; JSON files
//! carry a top-level `metadata` object.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const ARTIFACT: &str = "gkp";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub artifact: String,
    pub artifact_version: String,
    pub command: String,
    pub timestamp: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Subcommand options.
    pub options: Value,
}

impl Metadata {
    pub fn new<T: Serialize>(command: &str, config: &RunConfig, options: &T) -> CliResult<Self> {
        Ok(Self {
            artifact: ARTIFACT.into(),
            artifact_version: ARTIFACT_VERSION.into(),
            command: command.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: config.seed,
            config: config.clone(),
            options: serde_json::to_value(options).map_err(|e| CliError::Invalid(e.to_string()))?,
        })
    }

    fn csv_lines(&self) -> CliResult<String> {
        Ok(format!(
            "# artifact: {} {}\n# command: {}\n# timestamp: {}\n# seed: {}\n# config: {}\n# options: {}\n",
            self.artifact,
            self.artifact_version,
            self.command,
            self.timestamp,
            self.seed,
            to_json(&self.config)?,
            to_json(&self.options)?,
        ))
    }
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string(v).map_err(|e| CliError::Invalid(e.to_string()))
}

/// Writes into one directory, stamping every file with the same metadata.
pub struct OutputDir {
    root: PathBuf,
    metadata: Metadata,
}

impl OutputDir {
    pub fn create(root: &Path, metadata: Metadata) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), metadata })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file and a rename so an interrupted run
    /// never leaves a truncated file behind.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// RFC-4180 CSV below the metadata lines.
    pub fn write_csv<R, I>(&self, name: &str, header: &[&str], rows: R) -> CliResult<PathBuf>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator,
        I::Item: AsRef<[u8]>,
    {
        let mut buf = self.metadata.csv_lines()?.into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let err = |e: csv::Error| CliError::io(self.path(name), std::io::Error::other(e));
            w.write_record(header).map_err(err)?;
            for row in rows {
                w.write_record(row).map_err(err)?;
            }
            w.flush().map_err(|e| CliError::io(self.path(name), e))?;
        }
        self.write_atomic(name, &buf)
    }

    /// `{"metadata": …, <fields of body>}`, pretty-printed.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> CliResult<PathBuf> {
        self.write_json_inner(name, body, true)
    }

    /// As [`write_json`](Self::write_json) without indentation, for large records.
    pub fn write_json_compact<T: Serialize>(&self, name: &str, body: &T) -> CliResult<PathBuf> {
        self.write_json_inner(name, body, false)
    }

    fn write_json_inner<T: Serialize>(&self, name: &str, body: &T, pretty: bool) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            metadata: &'a Metadata,
            #[serde(flatten)]
            body: &'a T,
        }
        let doc = Stamped { metadata: &self.metadata, body };
        let encoded = if pretty { serde_json::to_vec_pretty(&doc) } else { serde_json::to_vec(&doc) };
        let mut bytes = encoded.map_err(|e| CliError::Invalid(e.to_string()))?;
        bytes.push(b'\n');
        self.write_atomic(name, &bytes)
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Removes the run timestamp so that outputs of identical configurations
/// can be compared byte for byte.
pub fn strip_timestamp(path: &Path, content: &str) -> String {
    if path.extension().is_some_and(|e| e == "json") {
        if let Ok(mut v) = serde_json::from_str::<Value>(content) {
            if let Some(m) = v.get_mut("metadata").and_then(Value::as_object_mut) {
                m.remove("timestamp");
            }
            return v.to_string();
        }
    }
    content.lines().filter(|l| !l.starts_with("# timestamp:")).collect::<Vec<_>>().join("\n")
}
