//! Line-oriented reading and writing of UTF-8 corpora.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Iterates over the `\n`-separated lines of a UTF-8 stream.
///
/// Only the `\n` is stripped, so a trailing `\r` stays part of the line and
/// is reproduced when the line is written back out.
pub struct Lines<R> {
    reader: R,
    origin: String,
    buf: Vec<u8>,
    line: usize,
    offset: u64,
}

impl Lines<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Lines::new(
            BufReader::with_capacity(1 << 16, file),
            path.display().to_string(),
        ))
    }
}

impl<R: BufRead> Lines<R> {
    pub fn new(reader: R, origin: impl Into<String>) -> Self {
        Lines {
            reader,
            origin: origin.into(),
            buf: Vec::new(),
            line: 0,
            offset: 0,
        }
    }

    /// Next line as raw bytes, without validating the encoding.
    pub fn next_bytes(&mut self) -> Option<Result<Vec<u8>>> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(n) => {
                self.line += 1;
                self.offset += n as u64;
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                }
                Some(Ok(std::mem::take(&mut self.buf)))
            }
            Err(e) => Some(Err(Error::Stream(e))),
        }
    }

    /// Reads up to `max` lines.
    pub fn chunk(&mut self, max: usize) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(max.min(1 << 14));
        while out.len() < max {
            match self.next() {
                Some(line) => out.push(line?),
                None => break,
            }
        }
        Ok(out)
    }

    /// Number of lines consumed so far.
    pub fn lines_read(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for Lines<R> {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        let start = self.offset;
        let bytes = match self.next_bytes()? {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        Some(String::from_utf8(bytes).map_err(|e| Error::Decode {
            origin: self.origin.clone(),
            line: self.line,
            offset: start + e.utf8_error().valid_up_to() as u64,
        }))
    }
}

/// Decodes a single line, reporting the offset of the first bad byte.
pub fn decode_line(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        origin: "<input>".into(),
        line: 1,
        offset: e.valid_up_to() as u64,
    })
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut lines = Lines::new(&bytes[..], path.display().to_string());
    for line in lines.by_ref() {
        line?;
    }
    // validated above, line by line
    Ok(String::from_utf8(bytes).expect("validated"))
}

pub struct LineWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl LineWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(LineWriter {
            inner: BufWriter::with_capacity(1 << 16, file),
            path,
        })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        self.inner
            .write_all(line.as_bytes())
            .and_then(|_| self.inner.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Number of newline-terminated (or final unterminated) lines in a file.
pub fn count_lines(path: impl AsRef<Path>) -> Result<usize> {
    let mut lines = Lines::open(path)?;
    while let Some(line) = lines.next_bytes() {
        line?;
    }
    Ok(lines.lines_read())
}
