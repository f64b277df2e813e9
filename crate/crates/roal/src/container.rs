//! Versioned container shared by checkpoints and dataset caches.
//!
//! Layout: a UTF-8 header of `key value` lines, one `array <name> <dims>`
//! line per array, a closing `end` line, then every array's data as
//! little-endian f32 in declaration order.
//!
//! ```text
//! roal-container 1
//! kind checkpoint
//! model lrua
//! array lstm.input 800x403
//! end
//! <binary payload>
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, FormatError};

pub const MAGIC: &str = "roal-container";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    meta: Vec<(String, String)>,
    arrays: Vec<Array>,
}

fn check_token(what: &str, s: &str) -> Result<(), FormatError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace()) {
        return Err(FormatError::Header(format!("{what} {s:?} must be a non-empty token without whitespace")));
    }
    Ok(())
}

impl Container {
    pub fn new(kind: &str) -> Self {
        let mut c = Container::default();
        c.set("kind", kind);
        c
    }

    /// Sets a header entry, replacing an existing one with the same key.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, FormatError> {
        self.get(key).ok_or_else(|| FormatError::MissingKey(key.to_string()))
    }

    /// Parses a required header value.
    pub fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V, FormatError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| FormatError::BadValue { key: key.to_string(), value: raw.to_string() })
    }

    pub fn meta(&self) -> &[(String, String)] {
        &self.meta
    }

    pub fn push_array(&mut self, name: &str, shape: &[usize], data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(Array { name: name.to_string(), shape: shape.to_vec(), data });
    }

    pub fn arrays(&self) -> &[Array] {
        &self.arrays
    }

    pub fn array(&self, name: &str) -> Result<&Array, FormatError> {
        self.arrays.iter().find(|a| a.name == name).ok_or_else(|| FormatError::MissingArray(name.to_string()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FormatError> {
        let mut header = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            check_token("key", k)?;
            if k == "array" || k == "end" || v.contains('\n') {
                return Err(FormatError::Header(format!("unwritable entry {k:?}")));
            }
            header.push_str(&format!("{k} {v}\n"));
        }
        for a in &self.arrays {
            check_token("array name", &a.name)?;
            let dims: Vec<String> = a.shape.iter().map(usize::to_string).collect();
            header.push_str(&format!("array {} {}\n", a.name, dims.join("x")));
        }
        header.push_str("end\n");
        w.write_all(header.as_bytes())?;
        for a in &self.arrays {
            let mut bytes = Vec::with_capacity(a.data.len() * 4);
            for v in &a.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FormatError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut pos = 0;
        let mut next_line = |what: &str| -> Result<&str, FormatError> {
            let rest = &bytes[pos..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or(FormatError::Truncated(what.to_string()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| FormatError::Header("header is not UTF-8".into()))
        };
        let first = next_line("header")?;
        let version = match first.split_once(' ') {
            Some((MAGIC, v)) => v.parse::<u32>().map_err(|_| FormatError::BadMagic)?,
            _ => return Err(FormatError::BadMagic),
        };
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let mut container = Container::default();
        let mut declared: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line("header")?;
            if line == "end" {
                break;
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            if key == "array" {
                let (name, dims) =
                    value.split_once(' ').ok_or_else(|| FormatError::Header(format!("bad array line {line:?}")))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>().ok().filter(|&d| d > 0))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| FormatError::Header(format!("bad dimensions in {line:?}")))?;
                declared.push((name.to_string(), shape));
            } else {
                check_token("key", key)?;
                container.meta.push((key.to_string(), value.to_string()));
            }
        }
        let mut payload = &bytes[pos..];
        for (name, shape) in declared {
            let n: usize = shape.iter().product();
            if payload.len() < n * 4 {
                return Err(FormatError::Truncated(format!("array {name}")));
            }
            let (raw, rest) = payload.split_at(n * 4);
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            container.arrays.push(Array { name, shape, data });
            payload = rest;
        }
        if !payload.is_empty() {
            return Err(FormatError::TrailingBytes(payload.len()));
        }
        Ok(container)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| e.at(path))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| e.at(path))
    }
}
