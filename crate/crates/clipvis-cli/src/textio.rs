//! Line-oriented file plumbing shared by every on-disk format: positioned
//! parse errors, a skipping line reader, number parsing, and atomic writes.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Failure while reading or writing one of the text formats. Parse errors
/// carry the `path:line:` position so shell users can jump to the offender.
#[derive(Debug, Error)]
pub enum FileError {
    // The io::Error is the source, so the message carries only the path;
    // chain-style printers append the cause themselves.
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl FileError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FileError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Reads a text file as a sequence of data lines, skipping blank lines and
/// (optionally) `#` comments, while tracking 1-based line numbers for
/// diagnostics.
pub struct LineReader {
    path: String,
    lines: Vec<String>,
    pos: usize,
    skip_comments: bool,
}

impl LineReader {
    pub fn open(path: &Path, skip_comments: bool) -> Result<Self, FileError> {
        let text = fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
        Ok(LineReader {
            path: path.display().to_string(),
            lines: text.lines().map(str::to_owned).collect(),
            pos: 0,
            skip_comments,
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Next non-blank (and non-comment, when enabled) line as
    /// `(line_number, text)`. Returns the text owned so callers can keep
    /// borrowing the reader for diagnostics.
    pub fn next_line(&mut self) -> Option<(usize, String)> {
        while self.pos < self.lines.len() {
            let line_no = self.pos + 1;
            let line = self.lines[self.pos].trim();
            self.pos += 1;
            if line.is_empty() || (self.skip_comments && line.starts_with('#')) {
                continue;
            }
            return Some((line_no, self.lines[line_no - 1].clone()));
        }
        None
    }

    /// Like [`next_line`](Self::next_line), but running out of input is an
    /// error describing what was expected.
    pub fn require_line(&mut self, what: &str) -> Result<(usize, String), FileError> {
        let eof_line = self.lines.len() + 1;
        match self.next_line() {
            Some(found) => Ok(found),
            None => Err(FileError::Parse {
                path: self.path.clone(),
                line: eof_line,
                message: format!("expected {what}, found end of file"),
            }),
        }
    }

    /// Positioned parse error at `line`.
    pub fn error(&self, line: usize, message: impl Into<String>) -> FileError {
        FileError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }
}

/// Splits a line into whitespace-separated tokens.
pub fn tokens(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

/// Parses one token, naming the field in the failure message.
pub fn parse_token<T>(
    reader: &LineReader,
    line: usize,
    token: &str,
    what: &str,
) -> Result<T, FileError>
where
    T: FromStr,
    T::Err: Display,
{
    token
        .parse()
        .map_err(|e| reader.error(line, format!("invalid {what} '{token}': {e}")))
}

/// Parses every remaining token of a record tail into one vector.
pub fn parse_all<T>(
    reader: &LineReader,
    line: usize,
    toks: &[&str],
    what: &str,
) -> Result<Vec<T>, FileError>
where
    T: FromStr,
    T::Err: Display,
{
    toks.iter()
        .map(|t| parse_token(reader, line, t, what))
        .collect()
}

/// Checks that the first data line is exactly the expected version header.
pub fn expect_header(reader: &mut LineReader, header: &str) -> Result<(), FileError> {
    let (line, text) = reader.require_line(&format!("header '{header}'"))?;
    if text.trim() != header {
        let found = text.trim().to_owned();
        return Err(reader.error(line, format!("expected header '{header}', found '{found}'")));
    }
    Ok(())
}

/// Formats an `f64` with Rust's shortest round-trip representation, so that
/// parsing the written text recovers the exact bit pattern.
pub fn fmt_f64(value: f64) -> String {
    format!("{value}")
}

/// Writes `contents` to `path` atomically: the bytes land in a temporary
/// file in the same directory which is then renamed over the target, so
/// readers never observe a half-written file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), FileError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let write = |dir: &Path| -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(contents)?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    };
    write(dir).map_err(|e| FileError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_skips_blanks_and_reports_positions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.txt");
        fs::write(&path, "first\n\n  \nsecond\n").unwrap();
        let mut reader = LineReader::open(&path, false).unwrap();
        assert_eq!(reader.next_line(), Some((1, "first".into())));
        assert_eq!(reader.next_line(), Some((4, "second".into())));
        assert_eq!(reader.next_line(), None);
    }

    #[test]
    fn comment_skipping_is_opt_in() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.txt");
        fs::write(&path, "# note\ndata\n").unwrap();
        let mut strict = LineReader::open(&path, false).unwrap();
        assert_eq!(strict.next_line().unwrap().1, "# note");
        let mut lenient = LineReader::open(&path, true).unwrap();
        assert_eq!(lenient.next_line().unwrap().1, "data");
    }

    #[test]
    fn require_line_names_the_missing_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        fs::write(&path, "").unwrap();
        let mut reader = LineReader::open(&path, false).unwrap();
        let err = reader.require_line("a header").unwrap_err();
        assert_eq!(
            err.to_string(),
            format!("{}:1: expected a header, found end of file", path.display())
        );
    }

    #[test]
    fn fmt_f64_round_trips_exactly() {
        for &v in &[0.0, 0.5, 0.1, 1.0 / 3.0, 123.456e-7, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn atomic_write_replaces_existing_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        // No leftover temporaries.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
