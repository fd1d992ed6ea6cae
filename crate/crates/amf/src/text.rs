//! Canonical text form of [`AmfValue`], used by the conformance corpus.
//!
//! ```text
//! undefined | null | true | false
//! int(-5)  double(1.5)  date(0.0)  bytes(0aff)  "json-style string"
//! obj{"a": int(1), "b": null}
//! arr{"k": null}[int(1), int(2)]     (associative part optional: arr[...])
//! ```
//!
//! Doubles use Rust's shortest round-tripping representation (`NaN`, `inf`
//! and `-inf` included), so printing then parsing is lossless.

use std::fmt::{self, Write};

use thiserror::Error;

use crate::value::{AmfArray, AmfValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("text form error at column {column}: {message}")]
pub struct TextError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for AmfValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmfValue::Undefined => f.write_str("undefined"),
            AmfValue::Null => f.write_str("null"),
            AmfValue::Boolean(b) => write!(f, "{b}"),
            AmfValue::Integer(n) => write!(f, "int({n})"),
            AmfValue::Double(d) => write!(f, "double({d:?})"),
            AmfValue::Date(d) => write!(f, "date({d:?})"),
            AmfValue::String(s) => write_quoted(f, s),
            AmfValue::ByteArray(bytes) => {
                f.write_str("bytes(")?;
                for b in bytes {
                    write!(f, "{b:02x}")?;
                }
                f.write_char(')')
            }
            AmfValue::Object(pairs) => {
                f.write_str("obj")?;
                write_pairs(f, pairs)
            }
            AmfValue::Array(arr) => {
                f.write_str("arr")?;
                if !arr.assoc.is_empty() {
                    write_pairs(f, &arr.assoc)?;
                }
                f.write_char('[')?;
                for (i, v) in arr.dense.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_char(']')
            }
        }
    }
}

fn write_pairs(f: &mut fmt::Formatter<'_>, pairs: &[(String, AmfValue)]) -> fmt::Result {
    f.write_char('{')?;
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write_quoted(f, k)?;
        write!(f, ": {v}")?;
    }
    f.write_char('}')
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c if (c as u32) < 0x20 || c == '\u{7f}' => write!(f, "\\u{:04x}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Parses the canonical text form. Surrounding whitespace is ignored.
pub fn parse_value(text: &str) -> Result<AmfValue, TextError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.error("unexpected trailing text"));
    }
    Ok(v)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> TextError {
        TextError {
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), TextError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected {c:?}")))
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// Raw text up to the closing parenthesis.
    fn paren_arg(&mut self) -> Result<String, TextError> {
        self.expect('(')?;
        let start = self.pos;
        while self.peek().is_some_and(|c| c != ')') {
            self.pos += 1;
        }
        let arg: String = self.chars[start..self.pos].iter().collect();
        self.expect(')')?;
        Ok(arg.trim().to_owned())
    }

    fn value(&mut self) -> Result<AmfValue, TextError> {
        self.skip_ws();
        if self.peek() == Some('"') {
            return self.quoted().map(AmfValue::String);
        }
        let at = self.pos;
        let word = self.word();
        let value = match word.as_str() {
            "undefined" => AmfValue::Undefined,
            "null" => AmfValue::Null,
            "true" => AmfValue::Boolean(true),
            "false" => AmfValue::Boolean(false),
            "int" => {
                let arg = self.paren_arg()?;
                AmfValue::Integer(arg.parse().map_err(|_| self.error(format!("bad integer {arg:?}")))?)
            }
            "double" | "date" => {
                let arg = self.paren_arg()?;
                let d: f64 = arg.parse().map_err(|_| self.error(format!("bad number {arg:?}")))?;
                if word == "double" {
                    AmfValue::Double(d)
                } else {
                    AmfValue::Date(d)
                }
            }
            "bytes" => {
                let arg = self.paren_arg()?;
                AmfValue::ByteArray(parse_hex(&arg).ok_or_else(|| self.error("bad hex in bytes(..)"))?)
            }
            "obj" => AmfValue::Object(self.pairs()?),
            "arr" => {
                self.skip_ws();
                let assoc = if self.peek() == Some('{') {
                    self.pairs()?
                } else {
                    Vec::new()
                };
                self.expect('[')?;
                let mut dense = Vec::new();
                if !self.eat(']') {
                    loop {
                        dense.push(self.value()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                AmfValue::Array(AmfArray { assoc, dense })
            }
            _ => {
                self.pos = at;
                return Err(self.error("expected a value"));
            }
        };
        Ok(value)
    }

    fn pairs(&mut self) -> Result<Vec<(String, AmfValue)>, TextError> {
        self.expect('{')?;
        let mut pairs = Vec::new();
        if self.eat('}') {
            return Ok(pairs);
        }
        loop {
            self.skip_ws();
            let key = self.quoted()?;
            self.expect(':')?;
            pairs.push((key, self.value()?));
            if self.eat('}') {
                return Ok(pairs);
            }
            self.expect(',')?;
        }
    }

    fn quoted(&mut self) -> Result<String, TextError> {
        if self.peek() != Some('"') {
            return Err(self.error("expected '\"'"));
        }
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error("unterminated string"));
            };
            self.pos += 1;
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let esc = self.peek().ok_or_else(|| self.error("dangling escape"))?;
                    self.pos += 1;
                    match esc {
                        '"' => out.push('"'),
                        '\\' => out.push('\\'),
                        'n' => out.push('\n'),
                        'r' => out.push('\r'),
                        't' => out.push('\t'),
                        'u' => {
                            let hex: String = self.chars.get(self.pos..self.pos + 4).unwrap_or(&[]).iter().collect();
                            let c = u32::from_str_radix(&hex, 16)
                                .ok()
                                .filter(|_| hex.len() == 4)
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error("bad \\u escape"))?;
                            self.pos += 4;
                            out.push(c);
                        }
                        other => return Err(self.error(format!("unknown escape \\{other}"))),
                    }
                }
                c => out.push(c),
            }
        }
    }
}

/// Decodes lowercase or uppercase hex with optional whitespace between octets.
pub fn parse_hex(text: &str) -> Option<Vec<u8>> {
    let digits: Vec<u8> = text
        .bytes()
        .filter(|b| !b.is_ascii_whitespace())
        .map(|b| (b as char).to_digit(16).map(|d| d as u8))
        .collect::<Option<_>>()?;
    if !digits.len().is_multiple_of(2) {
        return None;
    }
    Some(digits.chunks(2).map(|p| (p[0] << 4) | p[1]).collect())
}

pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{b:02x}");
    }
    s
}
