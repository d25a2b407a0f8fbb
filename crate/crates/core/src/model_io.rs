//! Line-oriented text container shared by the model formats.
//!
//! A container starts with `crossner-model v1`, followed by `key value`
//! header lines and counted blocks (`name N` then N lines). Floats are written
//! in shortest round-trip form, so save/load is bit-exact.

use std::io::{BufRead, Lines, Write};

use crate::corpus::TagSet;
use crate::error::{Error, Result};
use crate::features::FeatureAlphabet;

pub(crate) const MAGIC: &str = "crossner-model v1";

pub(crate) struct ModelWriter<W: Write> {
    inner: W,
}

impl<W: Write> ModelWriter<W> {
    pub fn new(mut inner: W, kind: &str) -> Result<Self> {
        writeln!(inner, "{MAGIC}")?;
        writeln!(inner, "kind {kind}")?;
        Ok(ModelWriter { inner })
    }

    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) -> Result<()> {
        writeln!(self.inner, "{key} {value}")?;
        Ok(())
    }

    pub fn tagset(&mut self, tagset: &TagSet) -> Result<()> {
        self.field("types", tagset.entity_types().join(" "))
    }

    pub fn alphabet(&mut self, alphabet: &FeatureAlphabet) -> Result<()> {
        self.field("alphabet", alphabet.len())?;
        alphabet.write(&mut self.inner)
    }

    pub fn floats(&mut self, name: &str, values: &[f64]) -> Result<()> {
        self.field(name, values.len())?;
        for v in values {
            writeln!(self.inner, "{v}")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        writeln!(self.inner, "end")?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub(crate) struct ModelReader<R: BufRead> {
    lines: Lines<R>,
}

impl<R: BufRead> ModelReader<R> {
    pub fn new(reader: R, kind: &str) -> Result<Self> {
        let mut r = ModelReader {
            lines: reader.lines(),
        };
        let magic = r.next_line()?;
        if magic != MAGIC {
            return Err(Error::Model(format!("unrecognized header {magic:?}")));
        }
        let k = r.field("kind")?;
        if k != kind {
            return Err(Error::Model(format!("expected a {kind} model, found {k}")));
        }
        Ok(r)
    }

    fn next_line(&mut self) -> Result<String> {
        Ok(self
            .lines
            .next()
            .ok_or_else(|| Error::Model("unexpected end of model file".into()))??)
    }

    pub fn field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(Error::Model(format!("expected field {key:?}, found {line:?}"))),
        }
    }

    pub fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse()
            .map_err(|_| Error::Model(format!("bad value {v:?} for {key}")))
    }

    pub fn tagset(&mut self) -> Result<TagSet> {
        let v = self.field("types")?;
        TagSet::new(v.split_whitespace())
    }

    pub fn alphabet(&mut self) -> Result<FeatureAlphabet> {
        let n: usize = self.parsed("alphabet")?;
        FeatureAlphabet::read_lines(&mut self.lines, n)
    }

    pub fn floats(&mut self, name: &str) -> Result<Vec<f64>> {
        let n: usize = self.parsed(name)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.next_line()?;
            out.push(
                line.parse()
                    .map_err(|_| Error::Model(format!("bad float {line:?} in {name}")))?,
            );
        }
        Ok(out)
    }

    pub fn finish(mut self) -> Result<()> {
        self.field("end").map(|_| ())
    }
}

/// The `kind` field of a model container, without reading the rest.
pub(crate) fn peek_kind<R: BufRead>(reader: R) -> Result<String> {
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        Ok(lines
            .next()
            .ok_or_else(|| Error::Model("unexpected end of model file".into()))??)
    };
    let magic = next()?;
    if magic != MAGIC {
        return Err(Error::Model(format!("unrecognized header {magic:?}")));
    }
    let line = next()?;
    match line.strip_prefix("kind ") {
        Some(k) => Ok(k.trim().to_string()),
        None => Err(Error::Model(format!("expected the model kind, found {line:?}"))),
    }
}
