//! Versioned plain-text checkpoint format.
//!
//! ```text
//! LEARNPATH-CHECKPOINT 1
//! meta <key> <value...>
//! tensor <name> <rank> <dim>...
//! <values, whitespace separated, shortest round-trip decimal>
//! end
//! ```
//!
//! Values round-trip bit-exactly. Keys and tensor names must not contain
//! whitespace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::tensor::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

pub const MAGIC: &str = "LEARNPATH-CHECKPOINT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing meta key `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::Checkpoint(format!("meta `{key}` has unparsable value `{raw}`")))
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], values: &[f64]) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            shape: shape.to_vec(),
            values: values.to_vec(),
        });
    }

    /// Adds every parameter tensor of `model`, prefixed with `prefix`.
    pub fn push_params<M: Parameterized + ?Sized>(&mut self, prefix: &str, model: &M) {
        for p in model.params() {
            self.push(format!("{prefix}{}", p.name()), p.shape(), &p.values);
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    /// Overwrites every parameter of `model` from tensors named
    /// `prefix + param.name()`, checking shapes.
    pub fn load_params<M: Parameterized + ?Sized>(&self, prefix: &str, model: &mut M) -> Result<()> {
        for p in model.params_mut() {
            let t = self.tensor(&format!("{prefix}{}", p.name()))?;
            if t.shape != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, model expects {:?}",
                    t.name,
                    t.shape,
                    p.shape()
                )));
            }
            *p = ParamTensor::from_values(p.name().to_string(), &t.shape, t.values.clone())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for t in &self.tensors {
            let _ = write!(out, "tensor {} {}", t.name, t.shape.len());
            for d in &t.shape {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let mut first = true;
            for v in &t.values {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(err(1, "bad magic header"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(1, "missing version"))?;
        if version != VERSION {
            return Err(err(1, &format!("unsupported version {version}")));
        }
        let mut ckpt = Checkpoint::new();
        let mut ended = false;
        while let Some((no, line)) = lines.next() {
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("meta") => {
                    let key = fields.next().ok_or_else(|| err(no, "meta without key"))?;
                    let value = fields.collect::<Vec<_>>().join(" ");
                    ckpt.meta.insert(key.to_string(), value);
                }
                Some("tensor") => {
                    let name = fields.next().ok_or_else(|| err(no, "tensor without name"))?;
                    let rank: usize = fields
                        .next()
                        .and_then(|r| r.parse().ok())
                        .ok_or_else(|| err(no, "bad rank"))?;
                    let shape: Vec<usize> = fields
                        .map(|d| d.parse().map_err(|_| err(no, "bad dimension")))
                        .collect::<Result<_>>()?;
                    if shape.len() != rank {
                        return Err(err(no, "rank disagrees with dimension count"));
                    }
                    let (vno, vline) = lines.next().ok_or_else(|| err(no + 1, "missing values line"))?;
                    let values: Vec<f64> = vline
                        .split_whitespace()
                        .map(|v| v.parse().map_err(|_| err(vno, &format!("bad value `{v}`"))))
                        .collect::<Result<_>>()?;
                    if values.len() != shape.iter().product::<usize>() {
                        return Err(err(vno, "value count disagrees with shape"));
                    }
                    ckpt.tensors.push(NamedTensor {
                        name: name.to_string(),
                        shape,
                        values,
                    });
                }
                Some("end") => {
                    ended = true;
                    break;
                }
                None => continue,
                Some(other) => return Err(err(no, &format!("unknown record `{other}`"))),
            }
        }
        if !ended {
            return Err(Error::Checkpoint("truncated checkpoint (no `end` record)".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
