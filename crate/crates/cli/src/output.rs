use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

pub const TOOL: &str = "segplan";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Report format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// Reproducibility header carried by every artifact. `flags` holds the
/// subcommand's parsed arguments; `--threads` and `--out` are left out
/// because they cannot change the results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub flags: serde_json::Value,
}

impl Header {
    pub fn new(command: &'static str, flags: &impl Serialize, seed: Option<u64>) -> Self {
        let flags = serde_json::to_value(flags).expect("argument structs serialize");
        Self { tool: TOOL, version: VERSION, command, seed, flags }
    }

    /// Comment lines placed before CSV content.
    pub fn csv_preamble(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        format!(
            "# tool={} version={} command={} seed={seed}\n# flags={}\n",
            self.tool, self.version, self.command, self.flags
        )
    }

    /// Short form for the 80-byte NIfTI description field.
    pub fn short(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        format!("{} {} {} seed={seed}", self.tool, self.version, self.command)
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

/// Serialize `body` as a JSON object with the header as its first field.
pub fn to_json<T: Serialize>(header: &Header, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Artifact { header, body }).expect("reports serialize");
    s.push('\n');
    s
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn ensure_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", self.dir.display())))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        self.ensure_dir()?;
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, header: &Header, body: &T) -> Result<PathBuf, CliError> {
        self.write(name, &to_json(header, body))
    }

    pub fn csv(&self, name: &str, header: &Header, body: &str) -> Result<PathBuf, CliError> {
        self.write(name, &format!("{}{body}", header.csv_preamble()))
    }

    /// JSON and/or CSV per `format`, sharing the file stem.
    pub fn report<T: Serialize>(&self, stem: &str, format: Format, header: &Header, body: &T, csv: impl FnOnce() -> String) -> Result<(), CliError> {
        if format.json() {
            self.json(&format!("{stem}.json"), header, body)?;
        }
        if format.csv() {
            self.csv(&format!("{stem}.csv"), header, &csv())?;
        }
        Ok(())
    }
}
