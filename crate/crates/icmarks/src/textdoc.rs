//! Line-oriented structured-text documents.
//!
//! Shared container for the canonical design dump and watermark
//! certificates: a `<kind> <version>` header, one `key value...` pair per
//! line in canonical order, and a mandatory `[end]` sentinel so truncation
//! is always detectable. Writers emit a fixed field order, which makes the
//! documents byte-stable and diffable.

use std::fmt::Display;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("unsupported {kind} document version {found} (expected {expected})")]
    VersionMismatch { kind: String, found: u32, expected: u32 },
    #[error("corrupt document at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct DocWriter {
    buf: String,
}

impl DocWriter {
    pub fn new(kind: &str, version: u32) -> Self {
        DocWriter { buf: format!("{kind} {version}\n") }
    }

    pub fn field(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.buf.push_str(key);
        self.buf.push(' ');
        self.buf.push_str(&value.to_string());
        self.buf.push('\n');
        self
    }

    /// A key followed by a space-separated list.
    pub fn list<T: Display>(&mut self, key: &str, values: impl IntoIterator<Item = T>) -> &mut Self {
        self.buf.push_str(key);
        for v in values {
            self.buf.push(' ');
            self.buf.push_str(&v.to_string());
        }
        self.buf.push('\n');
        self
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        self.buf.push('[');
        self.buf.push_str(name);
        self.buf.push_str("]\n");
        self
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("[end]\n");
        self.buf
    }
}

#[derive(Debug)]
pub struct DocReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> DocReader<'a> {
    /// Parse the header, verify kind and version, and position the reader on
    /// the first body line. The document must end with `[end]`.
    pub fn open(text: &'a str, kind: &str, version: u32) -> Result<Self, DocError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let Some(&(line, header)) = lines.first() else {
            return Err(DocError::Corrupt { line: 0, msg: "empty document".into() });
        };
        let mut it = header.split_whitespace();
        let found_kind = it.next().unwrap_or("");
        if found_kind != kind {
            return Err(DocError::Corrupt {
                line,
                msg: format!("expected `{kind}` header, found `{found_kind}`"),
            });
        }
        let found_version: u32 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| DocError::Corrupt { line, msg: "missing version".into() })?;
        if found_version != version {
            return Err(DocError::VersionMismatch {
                kind: kind.into(),
                found: found_version,
                expected: version,
            });
        }
        if lines.last().map(|&(_, l)| l != "[end]").unwrap_or(true) {
            return Err(DocError::Corrupt {
                line: lines.last().map(|&(l, _)| l).unwrap_or(0),
                msg: "missing [end] sentinel (truncated document?)".into(),
            });
        }
        Ok(DocReader { lines, pos: 1 })
    }

    fn corrupt(&self, msg: impl Into<String>) -> DocError {
        let line = self.lines.get(self.pos).map(|&(l, _)| l).unwrap_or(0);
        DocError::Corrupt { line, msg: msg.into() }
    }

    /// Current line without consuming it; `[end]` reads as None.
    pub fn peek(&self) -> Option<&'a str> {
        let (_, l) = *self.lines.get(self.pos)?;
        if l == "[end]" {
            None
        } else {
            Some(l)
        }
    }

    pub fn next_line(&mut self) -> Result<&'a str, DocError> {
        match self.peek() {
            Some(l) => {
                self.pos += 1;
                Ok(l)
            }
            None => Err(self.corrupt("unexpected end of document")),
        }
    }

    /// Consume a line that must start with `key`; return the remainder.
    pub fn expect(&mut self, key: &str) -> Result<&'a str, DocError> {
        let line = self
            .peek()
            .ok_or_else(|| self.corrupt(format!("expected `{key}`, found end")))?;
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| self.corrupt(format!("expected `{key}`, found `{line}`")))?;
        if !rest.is_empty() && !rest.starts_with(' ') {
            return Err(self.corrupt(format!("expected `{key}`, found `{line}`")));
        }
        self.pos += 1;
        Ok(rest.trim_start())
    }

    pub fn expect_parse<T: FromStr>(&mut self, key: &str) -> Result<T, DocError> {
        let pos_before = self.pos;
        let raw = self.expect(key)?;
        raw.parse().map_err(|_| {
            let line = self.lines[pos_before].0;
            DocError::Corrupt { line, msg: format!("cannot parse `{raw}` for `{key}`") }
        })
    }

    /// Consume `key v1 v2 ...` into a vector.
    pub fn expect_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>, DocError> {
        let pos_before = self.pos;
        let raw = self.expect(key)?;
        raw.split_whitespace()
            .map(|tok| tok.parse())
            .collect::<Result<Vec<T>, _>>()
            .map_err(|_| {
                let line = self.lines[pos_before].0;
                DocError::Corrupt { line, msg: format!("cannot parse list for `{key}`") }
            })
    }

    /// Consume a `[name]` section marker.
    pub fn expect_section(&mut self, name: &str) -> Result<(), DocError> {
        let line = self
            .peek()
            .ok_or_else(|| self.corrupt(format!("expected section [{name}], found end")))?;
        if line != format!("[{name}]") {
            return Err(self.corrupt(format!("expected section [{name}], found `{line}`")));
        }
        self.pos += 1;
        Ok(())
    }

    /// True when the next line is the `[name]` section marker.
    pub fn at_section(&self, name: &str) -> bool {
        self.peek().map(|l| l == format!("[{name}]")).unwrap_or(false)
    }

    pub fn at_end(&self) -> bool {
        self.peek().is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_sentinel() {
        let mut w = DocWriter::new("demo", 1);
        w.field("alpha", 3).list("ids", [1, 2, 3]).section("tail").field("z", "x y");
        let text = w.finish();
        let mut r = DocReader::open(&text, "demo", 1).unwrap();
        assert_eq!(r.expect_parse::<i64>("alpha").unwrap(), 3);
        assert_eq!(r.expect_list::<u32>("ids").unwrap(), vec![1, 2, 3]);
        r.expect_section("tail").unwrap();
        assert_eq!(r.expect("z").unwrap(), "x y");
        assert!(r.at_end());
    }

    #[test]
    fn truncation_is_corrupt() {
        let text = "demo 1\nalpha 3\n";
        match DocReader::open(text, "demo", 1) {
            Err(DocError::Corrupt { .. }) => {}
            other => panic!("expected corrupt, got {other:?}"),
        }
    }

    #[test]
    fn version_bump_is_rejected() {
        let text = "demo 2\n[end]\n";
        match DocReader::open(text, "demo", 1) {
            Err(DocError::VersionMismatch { found: 2, expected: 1, .. }) => {}
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }
}
