//! Writing artifacts and their metadata.
//!
//! A CSV artifact written to a file gets a sidecar `<file>.meta.json`. JSON
//! artifacts carry the same metadata under a `meta` key.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use sphlaplace::experiments::write_table;
use sphlaplace::sampler::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub rng: &'static str,
    /// Arguments after the program name; re-running them reproduces the
    /// artifact.
    pub argv: Vec<String>,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Value>,
}

impl Meta {
    pub fn new<C: Serialize>(command: &'static str, seed: u64, config: &C) -> Result<Self> {
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            rng: RngState::ALGORITHM,
            argv: std::env::args().skip(1).collect(),
            config: serde_json::to_value(config)?,
            report: None,
        })
    }

    pub fn with_report<R: Serialize>(mut self, report: &R) -> Result<Self> {
        self.report = Some(serde_json::to_value(report)?);
        Ok(self)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn create(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes the sidecar next to a CSV file. Nothing is written for stdout.
pub fn write_sidecar(path: Option<&Path>, meta: &Meta) -> Result<()> {
    if let Some(p) = path {
        write_json(Some(&sidecar_path(p)), meta)?;
    }
    Ok(())
}

/// Emits table rows as CSV (plus sidecar) or as `{meta, rows}` JSON.
pub fn emit_table<T: Serialize>(
    rows: &[T],
    format: Format,
    path: Option<&Path>,
    meta: &Meta,
) -> Result<()> {
    match format {
        Format::Csv => {
            write_table(create(path)?, rows)?;
            write_sidecar(path, meta)
        }
        Format::Json => write_json(path, &json!({ "meta": meta, "rows": rows })),
    }
}
