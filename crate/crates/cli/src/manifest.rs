//! Run manifests: what produced a directory of outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one invocation. `id` hashes everything except the output
/// directory, the raw command line and the wall time, so two runs with the
/// same flags and inputs share an id and produce identical files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    /// Input name -> sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    pub argv: Vec<String>,
    pub wall_time_s: f64,
}

/// Collects inputs while a command runs, then writes outputs tagged with the
/// manifest id.
pub struct Run {
    out: PathBuf,
    command: String,
    config: Value,
    seeds: Vec<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    id: Option<String>,
    started: Instant,
}

impl Run {
    pub fn new(out: &Path, command: &str, config: Value, seeds: Vec<u64>) -> Run {
        Run {
            out: out.to_path_buf(),
            command: command.to_string(),
            config,
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            id: None,
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        assert!(self.id.is_none(), "inputs must be registered before the first output");
        self.inputs.insert(name.into(), sha256_hex(bytes));
    }

    pub fn id(&mut self) -> String {
        if self.id.is_none() {
            let key = json!({
                "command": self.command,
                "config": self.config,
                "seeds": self.seeds,
                "version": env!("CARGO_PKG_VERSION"),
                "inputs": self.inputs,
            });
            self.id = Some(sha256_hex(key.to_string().as_bytes()));
        }
        self.id.clone().unwrap()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// CSV or text with a leading `# manifest <id>` comment line.
    pub fn write_commented(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let text = format!("# manifest {}\n{body}", self.id());
        self.write(name, text.as_bytes())
    }

    /// A JSON object with a `manifest` field added.
    pub fn write_json(&mut self, name: &str, value: Value) -> std::io::Result<()> {
        let mut value = value;
        if let Value::Object(map) = &mut value {
            map.insert("manifest".into(), Value::String(self.id()));
        }
        let text = serde_json::to_string_pretty(&value).expect("JSON values serialize") + "\n";
        self.write(name, text.as_bytes())
    }

    /// Records a file written by library code.
    pub fn record(&mut self, name: &str) -> std::io::Result<()> {
        let bytes = std::fs::read(self.out.join(name))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<RunManifest> {
        let manifest = RunManifest {
            id: self.id(),
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            argv: std::env::args().collect(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        std::fs::create_dir_all(&self.out)?;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(self.out.join("manifest.json"), text)?;
        Ok(manifest)
    }
}
