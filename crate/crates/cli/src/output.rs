use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use qswitch::trace::write_csv;
use qswitch::TraceSeries;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where a reported number comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Taken directly from the configuration.
    Input,
    /// Computed from the model at the configured parameters.
    Model,
    /// Fitted to synthetic data generated from the model.
    SyntheticFit,
    /// Fitted to data read from a file.
    DataFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "str::is_empty")]
    pub unit: String,
    pub source: Source,
}

/// Scalar results of one command, in insertion order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Record {
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub entry: Vec<Entry>,
}

impl Record {
    pub fn new(command: &str) -> Self {
        Record {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, name: &str, value: f64, unit: &str, source: Source) -> &mut Entry {
        self.entry.push(Entry {
            name: name.into(),
            value,
            sigma: None,
            unit: unit.into(),
            source,
        });
        self.entry.last_mut().unwrap()
    }

    pub fn flag(&mut self, on: bool, name: &str) {
        if on {
            self.flags.push(name.into());
        }
    }
}

impl Entry {
    pub fn sigma(&mut self, s: f64) -> &mut Self {
        self.sigma = Some(s);
        self
    }
}

/// Collects output files in memory and writes them all at the end, so a
/// failing command leaves nothing behind.
pub struct Output {
    dir: PathBuf,
    format: Format,
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Self {
        Output {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        }
    }

    pub fn traces(&mut self, stem: &str, traces: &[TraceSeries]) -> Result<()> {
        let (name, bytes) = match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_csv(traces, &mut buf)?;
                (format!("{stem}.csv"), buf)
            }
            Format::Json => (format!("{stem}.json"), json_bytes(traces)?),
        };
        self.files.push((name, bytes));
        Ok(())
    }

    pub fn record(&mut self, stem: &str, record: &Record) -> Result<()> {
        let (name, bytes) = match self.format {
            Format::Csv => (format!("{stem}.toml"), toml::to_string(record)?.into_bytes()),
            Format::Json => (format!("{stem}.json"), json_bytes(record)?),
        };
        self.files.push((name, bytes));
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating output directory {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                let _ = fs::remove_file(&path);
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}
