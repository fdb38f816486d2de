use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, Subcommand};

pub const TOOL: &str = "orbsieve";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header shared by every artifact of a run.
pub fn metadata(sub: Subcommand, config: &RunConfig) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "subcommand": sub.name(),
        "seed": config.seed,
        "config": config,
    })
}

/// Writes reports into one output directory.
pub struct ReportWriter {
    dir: PathBuf,
    meta: Value,
    json: bool,
    csv: bool,
    pub written: Vec<PathBuf>,
}

impl ReportWriter {
    pub fn new(dir: &Path, sub: Subcommand, config: &RunConfig) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            meta: metadata(sub, config),
            json: config.output.json,
            csv: config.output.csv,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn json(&mut self, name: &str, complete: bool, body: Value) -> std::io::Result<()> {
        if !self.json {
            return Ok(());
        }
        let doc = json!({ "metadata": self.meta, "complete": complete, "report": body });
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with the metadata as a leading `#` comment line.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R], header: &[&str]) -> std::io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        let mut buf = Vec::new();
        writeln!(buf, "# {}", serde_json::to_string(&self.meta).expect("metadata serializes"))?;
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf)?;
        self.written.push(path);
        Ok(())
    }
}
