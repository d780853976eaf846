//! Run manifests and report files.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun a command.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Vec<u64>,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
}

/// Collects output paths while a command runs.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    started: DateTime<Utc>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Utc::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write(name, &(text + "\n"))
    }

    pub fn finish<C: Serialize>(mut self, subcommand: &str, config: &C, seed: Vec<u64>) -> CliResult<()> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().collect(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            threads: rayon::current_num_threads(),
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            outputs: self.written.clone(),
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(())
    }
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes rows of serializable records as CSV with a header.
pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Gnuplot data: one `# title` block per series, two blank lines apart.
pub fn to_dat(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    for (i, (title, points)) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("# {title}\n"));
        for (x, y) in points {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    out
}
