//! Epoch logs and wall-clock timing for training runs.
//!
//! The log is headerless text with one `epoch,train_loss,val_m,seconds` line
//! per epoch, written as each epoch completes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use vem_core::trainer::{EpochLog, Stage, TrainObserver};

use crate::error::{io_err, parse_err, Error, Result};

pub fn format_line(log: &EpochLog) -> String {
    format!("{},{},{},{}", log.epoch, log.train_loss, log.val_m, log.seconds)
}

pub fn parse_log(text: &str, path: &Path) -> Result<Vec<EpochLog>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || parse_err(path, format!("line {}: expected epoch,train_loss,val_m,seconds", i + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            Ok(EpochLog {
                epoch: fields[0].parse().map_err(|_| bad())?,
                train_loss: fields[1].parse().map_err(|_| bad())?,
                val_m: fields[2].parse().map_err(|_| bad())?,
                seconds: fields[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Observer with a monotonic clock that appends epoch lines to a file and
/// optionally echoes them to stderr.
pub struct LogObserver {
    start: Instant,
    path: PathBuf,
    out: BufWriter<File>,
    echo: bool,
    error: Option<std::io::Error>,
}

impl LogObserver {
    pub fn create(path: &Path, echo: bool) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        Ok(Self {
            start: Instant::now(),
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            echo,
            error: None,
        })
    }

    /// Flushes and reports the first write error, if any.
    pub fn finish(mut self) -> Result<()> {
        if let Some(source) = self.error.take() {
            return Err(Error::Io { path: self.path, source });
        }
        self.out.flush().map_err(io_err(&self.path))
    }
}

impl TrainObserver for LogObserver {
    fn now_seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, stage: Stage, log: &EpochLog) {
        let line = format_line(log);
        if self.echo {
            eprintln!("stage {stage} epoch {}: train_loss {} val_m {}", log.epoch, log.train_loss, log.val_m);
        }
        if self.error.is_none() {
            if let Err(e) = writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
                self.error = Some(e);
            }
        }
    }
}

/// Clock-only observer.
pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TrainObserver for StdClock {
    fn now_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
