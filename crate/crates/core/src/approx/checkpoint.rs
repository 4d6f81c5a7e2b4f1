//! Parameter checkpoints: a plain-text manifest followed by the raw values as
//! little-endian `f64`.
//!
//! ```text
//! guided-rl-params 1
//! meta <key> <value...>
//! slice <name> <offset> <len>
//! data <count>
//! <count * 8 bytes>
//! ```

use std::io::{BufRead, Write};

use super::mlp::{ParamLayout, ParamSlice, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &str = "guided-rl-params 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Free-form `key value` pairs, e.g. network dims and environment.
    pub meta: Vec<(String, String)>,
    pub params: ParamVector,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        for (k, v) in &self.meta {
            if k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(Error::Checkpoint(format!("meta entry {k:?} cannot be serialized")));
            }
            writeln!(w, "meta {k} {v}")?;
        }
        for s in &self.params.layout.slices {
            writeln!(w, "slice {} {} {}", s.name, s.offset, s.len)?;
        }
        writeln!(w, "data {}", self.params.values.len())?;
        let mut bytes = Vec::with_capacity(self.params.values.len() * 8);
        for v in &self.params.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let next_line = |r: &mut R, line: &mut String| -> Result<()> {
            line.clear();
            if r.read_line(line)? == 0 {
                return Err(Error::Checkpoint("unexpected end of header".into()));
            }
            Ok(())
        };
        next_line(&mut r, &mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic line {:?}", line.trim_end())));
        }
        let mut meta = Vec::new();
        let mut slices = Vec::new();
        let count = loop {
            next_line(&mut r, &mut line)?;
            let text = line.trim_end_matches('\n');
            let (tag, rest) = text.split_once(' ').unwrap_or((text, ""));
            match tag {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.push((k.to_string(), v.to_string()));
                }
                "slice" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    let [name, offset, len] = parts[..] else {
                        return Err(Error::Checkpoint(format!("malformed slice line {text:?}")));
                    };
                    let parse = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| Error::Checkpoint(format!("bad integer {s:?}")))
                    };
                    slices.push(ParamSlice {
                        name: name.to_string(),
                        offset: parse(offset)?,
                        len: parse(len)?,
                    });
                }
                "data" => {
                    break rest
                        .parse::<usize>()
                        .map_err(|_| Error::Checkpoint(format!("bad data count {rest:?}")))?;
                }
                other => return Err(Error::Checkpoint(format!("unknown header tag {other:?}"))),
            }
        };
        let layout = ParamLayout { slices };
        let mut expected = 0;
        for s in &layout.slices {
            if s.offset != expected {
                return Err(Error::Checkpoint(format!("slice {} is not contiguous", s.name)));
            }
            expected += s.len;
        }
        if expected != count {
            return Err(Error::Checkpoint(format!(
                "layout covers {expected} values, data holds {count}"
            )));
        }
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint("truncated parameter data".into()))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            meta,
            params: ParamVector { values, layout },
        })
    }
}
