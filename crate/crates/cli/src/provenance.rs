//! Run configuration records and artifact writers that stamp every output
//! with the digest of the configuration that produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hyperpm::Hypergraph;

pub const CONFIG_FILE: &str = "run_config.json";
pub const CONFIG_PREFIX: &str = "# config-digest:";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Canonical digest of a parsed `.khg` graph.
    Graph,
    /// SHA-256 of the raw file bytes.
    File,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub kind: InputKind,
    pub digest: String,
}

impl InputDigest {
    pub fn graph(role: &str, path: &Path, g: &Hypergraph) -> Self {
        Self {
            role: role.into(),
            path: path.display().to_string(),
            kind: InputKind::Graph,
            digest: g.digest(),
        }
    }

    pub fn file(role: &str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            role: role.into(),
            path: path.display().to_string(),
            kind: InputKind::File,
            digest: sha256_hex(&bytes),
        })
    }

    /// Recomputes the digest from the file on disk.
    pub fn recompute(&self) -> Result<String> {
        let path = Path::new(&self.path);
        Ok(match self.kind {
            InputKind::Graph => hyperpm::io::read_hypergraph(path)?.digest(),
            InputKind::File => sha256_hex(&fs::read(path)?),
        })
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub command: serde_json::Value,
    pub jobs: usize,
    pub out: String,
    pub alpha_table: Option<String>,
    pub inputs: Vec<InputDigest>,
}

impl RunConfig {
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_digest: String,
    pub inputs: Vec<InputDigest>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    config: RunConfig,
    config_digest: String,
}

/// Output directory bound to one run configuration.
pub struct OutputDir {
    root: PathBuf,
    provenance: Provenance,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(config: RunConfig) -> Result<Self> {
        let root = PathBuf::from(&config.out);
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        let digest = config.digest();
        let provenance = Provenance {
            config_digest: digest.clone(),
            inputs: config.inputs.clone(),
        };
        let file = ConfigFile {
            config,
            config_digest: digest,
        };
        fs::write(root.join(CONFIG_FILE), pretty(&file)?)?;
        Ok(Self {
            root,
            provenance,
            written: Vec::new(),
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    fn stamp(&self) -> String {
        format!("{CONFIG_PREFIX} {}\n", self.provenance.config_digest)
    }

    /// Writes `report` with a `provenance` field added; returns the value.
    pub fn write_json<T: Serialize>(
        &mut self,
        name: &str,
        report: &T,
    ) -> Result<serde_json::Value> {
        let mut value = serde_json::to_value(report)?;
        match value.as_object_mut() {
            Some(map) => {
                map.insert("provenance".into(), serde_json::to_value(&self.provenance)?);
            }
            None => bail!("report {name} is not a JSON object"),
        }
        let path = self.path(name);
        fs::write(path, pretty(&value)?)?;
        Ok(value)
    }

    pub fn write_graph(&mut self, name: &str, g: &Hypergraph) -> Result<()> {
        let text = self.stamp() + &g.to_khg_string();
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn write_weights(&mut self, name: &str, g: &Hypergraph, w: &[f64]) -> Result<()> {
        let text = self.stamp() + &hyperpm::io::weights_to_string(g, w);
        fs::write(self.path(name), text)?;
        Ok(())
    }

    /// CSV writer whose first line is the config stamp.
    pub fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>> {
        let stamp = self.stamp();
        let mut file = fs::File::create(self.path(name))?;
        file.write_all(stamp.as_bytes())?;
        Ok(csv::Writer::from_writer(file))
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Clone, Debug, Serialize)]
pub struct DirCheck {
    pub file: String,
    pub ok: bool,
    pub detail: String,
}

/// Rechecks the config digest, every artifact stamp and every input digest.
pub fn verify_dir(dir: &Path) -> Result<Vec<DirCheck>> {
    let text = fs::read_to_string(dir.join(CONFIG_FILE))
        .with_context(|| format!("no {CONFIG_FILE} in {}", dir.display()))?;
    let file: ConfigFile = serde_json::from_str(&text)?;
    let digest = file.config.digest();
    let mut checks = vec![DirCheck {
        file: CONFIG_FILE.into(),
        ok: digest == file.config_digest,
        detail: format!("recomputed {digest}"),
    }];
    for input in &file.config.inputs {
        let (ok, detail) = match input.recompute() {
            Ok(d) if d == input.digest => (true, "input digest matches".to_string()),
            Ok(d) => (false, format!("input digest is now {d}")),
            Err(e) => (false, format!("cannot read input: {e}")),
        };
        checks.push(DirCheck {
            file: input.path.clone(),
            ok,
            detail,
        });
    }
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != CONFIG_FILE))
        .collect();
    names.sort();
    for path in names {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let content = fs::read_to_string(&path)?;
        let found = if name.ends_with(".json") {
            serde_json::from_str::<serde_json::Value>(&content)
                .ok()
                .and_then(|v| v["provenance"]["config_digest"].as_str().map(String::from))
        } else {
            content
                .lines()
                .find_map(|l| l.strip_prefix(CONFIG_PREFIX).map(|d| d.trim().to_string()))
        };
        let (ok, detail) = match found {
            Some(d) if d == file.config_digest => (true, "stamp matches".to_string()),
            Some(d) => (false, format!("stamped with {d}")),
            None => (false, "no config stamp".to_string()),
        };
        checks.push(DirCheck {
            file: name,
            ok,
            detail,
        });
    }
    Ok(checks)
}
