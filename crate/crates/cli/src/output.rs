//! Output files. Every CSV starts with `#` comment lines holding the
//! resolved config and the seed-list hash; every JSON summary carries the
//! same two fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::config::ExperimentConfig;

/// Git blob hash of the seed list written one decimal seed per line.
pub fn seed_list_hash(seeds: &[u64]) -> String {
    let body: String = seeds.iter().map(|s| format!("{s}\n")).collect();
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

pub struct OutputDir {
    dir: PathBuf,
    config: serde_json::Value,
    config_line: String,
    seeds_sha1: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config: serde_json::to_value(config).expect("configs serialize"),
            config_line: config.to_json(),
            seeds_sha1: seed_list_hash(&config.seeds),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[String]) -> std::io::Result<CsvFile> {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "# config: {}", self.config_line)?;
        writeln!(out, "# seeds-sha1: {}", self.seeds_sha1)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        self.written.push(path);
        Ok(CsvFile { w })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let doc = serde_json::json!({
            "config": self.config,
            "seeds_sha1": self.seeds_sha1,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

pub struct CsvFile {
    w: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn row(&mut self, cells: &[Cell]) -> std::io::Result<()> {
        self.w.write_record(cells.iter().map(Cell::render))?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

/// One CSV value; floats use the shortest representation that round-trips.
pub enum Cell {
    F(f64),
    U(u64),
    Opt(Option<f64>),
    S(String),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:e}"),
            Cell::U(x) => x.to_string(),
            Cell::Opt(Some(x)) => format!("{x:e}"),
            Cell::Opt(None) => String::new(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

pub fn names(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}
