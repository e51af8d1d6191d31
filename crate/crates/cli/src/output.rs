use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "ptspec";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_VERSION: u32 = 1;
const UNITS: &str = "a and lx are lengths in the units of y; eigenvalues in inverse length squared";

/// Provenance block shared by every file a command writes.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub statement: String,
    pub units: &'static str,
}

impl Meta {
    pub fn new(command: &str, canonical_config: &str, statement: &str) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            statement: statement.to_string(),
            units: UNITS,
        }
    }
}

pub struct Writer {
    dir: PathBuf,
    pub meta: Meta,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, meta: Meta) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), meta, written: Vec::new() })
    }

    fn atomic(&mut self, name: &str, body: &[u8]) -> std::io::Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        self.written.push(target);
        Ok(())
    }

    /// CSV with `#` header lines, then `columns`, then `rows`.
    pub fn csv(&mut self, name: &str, notes: &[String], columns: &str, rows: &str) -> std::io::Result<()> {
        let m = &self.meta;
        let mut s = format!(
            "# tool: {} {}\n# command: {}\n# config_sha256: {}\n# statement: {}\n# units: {}\n",
            m.tool, m.version, m.command, m.config_sha256, m.statement, m.units
        );
        for n in notes {
            s.push_str(&format!("# {n}\n"));
        }
        s.push_str(columns);
        s.push('\n');
        s.push_str(rows);
        self.atomic(name, s.as_bytes())
    }

    /// JSON document `{schema_version, meta, ...body}`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> std::io::Result<()> {
        let mut doc = serde_json::json!({ "schema_version": SCHEMA_VERSION, "meta": self.meta });
        if let (Some(d), serde_json::Value::Object(b)) = (doc.as_object_mut(), serde_json::to_value(body).map_err(std::io::Error::other)?) {
            for (k, v) in b {
                d.entry(k).or_insert(v);
            }
        }
        let mut s = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        s.push('\n');
        self.atomic(name, s.as_bytes())
    }
}

/// Shortest round-trip form, switching to exponent notation for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let ax = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&ax) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
