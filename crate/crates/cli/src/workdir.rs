//! On-disk layout of a working directory and its advisory lock.
//!
//! ```text
//! <workdir>/
//!   config.toml              optional, read when --config is absent
//!   corpus.json vocab.json   ingest
//!   skipped.tsv              ingest: documents emptied by preprocessing
//!   partitions.json          ingest
//!   report.txt report.jsonl  evaluate
//!   pvalues.txt stats.txt scatter.txt
//!   split-<i>/
//!     model.txt              train
//!     subdocs-<strategy>.tsv split-docs
//!     profiles/<system>.tsv  profile (topic systems: <system>.model, <system>.vectors)
//!     index/<system>.idx     index
//!     qrels.txt              search --test-queries, evaluate
//!     runs/<system>.run      search --test-queries
//!     runs/<system>.fused    fuse
//!     report.txt stats.txt   evaluate, stats
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use subprof::corpus::{Corpus, CorpusPartition, Vocabulary};
use subprof::eval::System;

use crate::CliError;

pub const LOCK_FILE: &str = ".lock";

pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn split_dir(&self, split: usize) -> PathBuf {
        self.root.join(format!("split-{split}"))
    }

    pub fn model(&self, split: usize) -> PathBuf {
        self.split_dir(split).join("model.txt")
    }

    pub fn subdocs(&self, split: usize, strategy: &str) -> PathBuf {
        self.split_dir(split)
            .join(format!("subdocs-{strategy}.tsv"))
    }

    pub fn profiles(&self, split: usize, system: System, ext: &str) -> PathBuf {
        self.split_dir(split)
            .join("profiles")
            .join(format!("{system}.{ext}"))
    }

    pub fn index(&self, split: usize, system: System) -> PathBuf {
        self.split_dir(split)
            .join("index")
            .join(format!("{system}.idx"))
    }

    pub fn run(&self, split: usize, system: System, ext: &str) -> PathBuf {
        self.split_dir(split)
            .join("runs")
            .join(format!("{system}.{ext}"))
    }

    pub fn qrels(&self, split: usize) -> PathBuf {
        self.split_dir(split).join("qrels.txt")
    }

    pub fn lock(&self) -> Result<WorkdirLock, CliError> {
        fs::create_dir_all(&self.root)?;
        let path = self.file(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(WorkdirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn load_corpus(&self) -> Result<(Corpus, Vocabulary), CliError> {
        let corpus = require(&self.file("corpus.json"), "ingest")?;
        let vocab = require(&self.file("vocab.json"), "ingest")?;
        Ok((Corpus::load(&corpus)?, Vocabulary::load(&vocab)?))
    }

    pub fn load_partitions(&self) -> Result<Vec<CorpusPartition>, CliError> {
        let path = require(&self.file("partitions.json"), "ingest")?;
        let parts = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(subprof::Error::from)?;
        Ok(parts)
    }

    pub fn save_partitions(&self, parts: &[CorpusPartition]) -> Result<(), CliError> {
        let mut out = BufWriter::new(File::create(self.file("partitions.json"))?);
        serde_json::to_writer_pretty(&mut out, parts).map_err(subprof::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Partitions selected by `--split`, all of them when `None`.
    pub fn partitions(&self, split: Option<usize>) -> Result<Vec<CorpusPartition>, CliError> {
        let all = self.load_partitions()?;
        match split {
            None => Ok(all),
            Some(i) => all
                .into_iter()
                .find(|p| p.index == i)
                .map(|p| vec![p])
                .ok_or_else(|| CliError::Usage(format!("no split {i} in partitions.json"))),
        }
    }
}

/// Removes the lock file when dropped.
pub struct WorkdirLock {
    path: PathBuf,
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Fails with a missing-artifact error naming the producing command.
pub fn require(path: &Path, producer: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Missing(format!(
            "{} (run `{producer}` first)",
            path.display()
        )))
    }
}

/// Creates the parent directory of `path` and opens it for writing.
pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let wd = Workdir::new(dir.path());
        let lock = wd.lock().unwrap();
        assert!(matches!(wd.lock(), Err(CliError::Locked(_))));
        drop(lock);
        assert!(wd.lock().is_ok());
    }

    #[test]
    fn missing_artifacts_name_their_producer() {
        let dir = tempfile::tempdir().unwrap();
        let wd = Workdir::new(dir.path());
        match wd.load_corpus() {
            Err(CliError::Missing(msg)) => assert!(msg.contains("ingest")),
            other => panic!("{:?}", other.err()),
        }
    }
}
