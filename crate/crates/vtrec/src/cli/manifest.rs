//! Every artifact-producing command appends one record to `runs.jsonl`
//! in its output directory: what ran, under which config digest, over
//! which (digested) inputs, and what it wrote. Append-only, so the file
//! doubles as a run history.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::util::sha256_hex;

pub const RUNS_FILE: &str = "runs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Digest of the pipeline config (or of the checkpoint's stored
    /// config) the run was driven by.
    pub config_digest: String,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<String>,
    /// Non-default switches, e.g. embedding_init=random.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, String>,
    pub wall_clock_s: f64,
    pub unix_time: u64,
    pub exit_status: i32,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: &str) -> Self {
        let unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            options: BTreeMap::new(),
            wall_clock_s: 0.0,
            unix_time,
            exit_status: 0,
        }
    }

    /// Records an input file along with its content digest.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(ArtifactRef {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn option(&mut self, key: &str, value: &str) -> &mut Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    /// Stamps the wall clock and appends one JSON line to
    /// `<dir>/runs.jsonl`. Only successful runs get here, so the
    /// recorded exit status is 0.
    pub fn finish(mut self, dir: &Path, started: Instant) -> Result<(), CliError> {
        self.wall_clock_s = started.elapsed().as_secs_f64();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(RUNS_FILE))?;
        let line = serde_json::to_string(&self)?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifests_append_one_line_each() {
        let dir = std::env::temp_dir().join("vtrec-cli-manifest");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let input = dir.join("input.txt");
        std::fs::write(&input, b"payload").unwrap();

        for i in 0..2 {
            let mut m = RunManifest::new("eval", "abc123");
            m.input(&input).unwrap();
            m.output(Path::new("eval/metrics.csv"));
            m.option("round", &i.to_string());
            m.finish(&dir, Instant::now()).unwrap();
        }

        let text = std::fs::read_to_string(dir.join(RUNS_FILE)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2, "append-only, one line per run");
        let back: RunManifest = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(back.command, "eval");
        assert_eq!(back.exit_status, 0);
        assert_eq!(back.inputs[0].sha256, sha256_hex(b"payload"));
        assert_eq!(back.options["round"], "1");
        std::fs::remove_dir_all(&dir).ok();
    }
}
