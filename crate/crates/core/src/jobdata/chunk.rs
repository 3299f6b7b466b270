//! Chunked counts codec: newline-delimited records, each carrying a slice
//! of the entries in ascending outcome order.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{JobDataError, ErrorCode};
use crate::sim::{parse_bitstring, to_bitstring, Counts};

pub const DEFAULT_CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsChunk {
    pub job_id: String,
    pub index: usize,
    pub total: usize,
    /// Shots of the whole counts map, repeated in every chunk.
    pub shots: u64,
    pub width: usize,
    pub entries: Vec<(String, u64)>,
    pub terminal: bool,
}

/// Number of chunks `counts` splits into (at least one).
pub fn chunk_count(entries: usize, chunk_size: usize) -> usize {
    entries.div_ceil(chunk_size).max(1)
}

/// Lazily yields the chunks of `counts`. An empty map gives one empty
/// terminal chunk.
pub fn chunk_iter<'a>(counts: &'a Counts, job_id: &'a str, chunk_size: usize) -> impl Iterator<Item = CountsChunk> + 'a {
    let size = chunk_size.max(1);
    let total = chunk_count(counts.len(), size);
    let mut entries = counts.iter();
    (0..total).map(move |index| CountsChunk {
        job_id: job_id.to_string(),
        index,
        total,
        shots: counts.shots(),
        width: counts.width(),
        entries: entries
            .by_ref()
            .take(size)
            .map(|(o, n)| (to_bitstring(o, counts.width()), n))
            .collect(),
        terminal: index + 1 == total,
    })
}

pub fn chunk_counts(counts: &Counts, job_id: &str, chunk_size: usize) -> Result<Vec<CountsChunk>, JobDataError> {
    if chunk_size == 0 {
        return Err(JobDataError::new(ErrorCode::Invalid, "chunk_size must be at least 1"));
    }
    Ok(chunk_iter(counts, job_id, chunk_size).collect())
}

/// Incremental reassembly. In-order chunks are folded straight into the
/// output; early chunks wait in a buffer until the gap before them fills.
#[derive(Debug, Default)]
pub struct StreamAssembler {
    header: Option<(String, usize, u64, usize)>,
    next: usize,
    pending: BTreeMap<usize, CountsChunk>,
    pending_entries: usize,
    peak_pending_entries: usize,
    counts: Option<Counts>,
}

impl StreamAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Largest number of buffered out-of-order entries seen so far.
    pub fn peak_pending_entries(&self) -> usize {
        self.peak_pending_entries
    }

    pub fn push(&mut self, chunk: CountsChunk) -> Result<(), JobDataError> {
        let key = (chunk.job_id.clone(), chunk.total, chunk.shots, chunk.width);
        match &self.header {
            None => {
                if chunk.total == 0 {
                    return Err(chunk_error("chunk total must be at least 1"));
                }
                self.counts = Some(Counts::new(chunk.width).map_err(|e| chunk_error(e.to_string()))?);
                self.header = Some(key);
            }
            Some(h) if *h != key => {
                return Err(chunk_error(format!(
                    "chunk {} disagrees with earlier chunks on job id, total, shots or width",
                    chunk.index
                )))
            }
            Some(_) => {}
        }
        if chunk.index >= chunk.total {
            return Err(chunk_error(format!("chunk index {} out of range 0..{}", chunk.index, chunk.total)));
        }
        if chunk.index < self.next || self.pending.contains_key(&chunk.index) {
            return Err(chunk_error(format!("duplicate chunk index {}", chunk.index)));
        }
        if chunk.terminal != (chunk.index + 1 == chunk.total) {
            return Err(chunk_error(format!("chunk {} has a wrong terminal flag", chunk.index)));
        }
        if chunk.index == self.next {
            self.fold(chunk)?;
            while let Some(c) = self.pending.remove(&self.next) {
                self.pending_entries -= c.entries.len();
                self.fold(c)?;
            }
        } else {
            self.pending_entries += chunk.entries.len();
            self.peak_pending_entries = self.peak_pending_entries.max(self.pending_entries);
            self.pending.insert(chunk.index, chunk);
        }
        Ok(())
    }

    fn fold(&mut self, chunk: CountsChunk) -> Result<(), JobDataError> {
        let counts = self.counts.as_mut().expect("header set before folding");
        let width = counts.width();
        for (key, n) in chunk.entries {
            let o = parse_bitstring(&key, width).map_err(|e| chunk_error(e.to_string()))?;
            if counts.get(o) != 0 {
                return Err(chunk_error(format!("state {key} appears twice")));
            }
            counts.try_add(o, n).map_err(|e| chunk_error(e.to_string()))?;
        }
        self.next += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<Counts, JobDataError> {
        let (_, total, shots, _) = self.header.ok_or_else(|| chunk_error("no chunks received"))?;
        if self.next != total {
            return Err(chunk_error(format!("missing chunk index {}", self.next)));
        }
        let counts = self.counts.expect("header implies counts");
        if counts.shots() != shots {
            return Err(chunk_error(format!(
                "chunks sum to {} shots, header says {shots}",
                counts.shots()
            )));
        }
        Ok(counts)
    }
}

fn chunk_error(msg: impl Into<String>) -> JobDataError {
    JobDataError::new(ErrorCode::Chunk, msg)
}

/// Reassembles chunks given in any order.
pub fn assemble(chunks: impl IntoIterator<Item = CountsChunk>) -> Result<Counts, JobDataError> {
    let mut asm = StreamAssembler::new();
    for c in chunks {
        asm.push(c)?;
    }
    asm.finish()
}

pub fn write_ndjson<W: Write>(chunks: impl IntoIterator<Item = CountsChunk>, mut out: W) -> std::io::Result<()> {
    for c in chunks {
        serde_json::to_writer(&mut out, &c)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Streams NDJSON chunk records into counts; blank lines are skipped.
pub fn read_ndjson<R: BufRead>(input: R) -> Result<Counts, JobDataError> {
    let mut asm = StreamAssembler::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| JobDataError::new(ErrorCode::Io, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk: CountsChunk = serde_json::from_str(&line)
            .map_err(|e| JobDataError::new(ErrorCode::Corrupt, format!("chunk line {}: {e}", i + 1)))?;
        asm.push(chunk)?;
    }
    asm.finish()
}
