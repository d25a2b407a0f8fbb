//! Word embedding tables and the word2vec text format.
//!
//! The text format is a `count dim` header followed by `word v1 ... vd`
//! lines. A row for [`UNK_TOKEN`] sets the table's unknown-word vector
//! instead of adding a vocabulary entry.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<UNK>";

/// How [`EmbeddingTable::lookup`] treats letter case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CasePolicy {
    Exact,
    /// Exact match first, then the lowercased word.
    #[default]
    LowercaseFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    vectors: Vec<f64>,
    unk: Vec<f64>,
    case_policy: CasePolicy,
}

impl EmbeddingTable {
    /// Empty table with a zero UNK vector.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            index: HashMap::new(),
            words: Vec::new(),
            vectors: Vec::new(),
            unk: vec![0.0; dim],
            case_policy: CasePolicy::default(),
        })
    }

    pub fn from_pairs<S: Into<String>>(dim: usize, pairs: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let mut t = Self::new(dim)?;
        for (w, v) in pairs {
            t.insert(w, v)?;
        }
        Ok(t)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("embedding entries must be finite".into()));
        }
        Ok(())
    }

    /// Adds or replaces a word vector.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        self.check(&vector)?;
        let word = word.into();
        match self.index.get(&word) {
            Some(&k) => self.vectors[k * self.dim..(k + 1) * self.dim].copy_from_slice(&vector),
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.vectors.extend(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn case_policy(&self) -> CasePolicy {
        self.case_policy
    }

    pub fn set_case_policy(&mut self, policy: CasePolicy) {
        self.case_policy = policy;
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn set_unk(&mut self, unk: Vec<f64>) -> Result<()> {
        self.check(&unk)?;
        self.unk = unk;
        Ok(())
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get_exact(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&k| self.vector(k))
    }

    /// Vector for `word` under the case policy, or `None` if out of
    /// vocabulary.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.get_exact(word).or_else(|| match self.case_policy {
            CasePolicy::Exact => None,
            CasePolicy::LowercaseFallback => {
                let lower = word.to_lowercase();
                if lower == word {
                    None
                } else {
                    self.get_exact(&lower)
                }
            }
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    /// Per-token vectors; `None` marks out-of-vocabulary tokens.
    pub fn embed(&self, tokens: &[String]) -> Vec<Option<Vec<f64>>> {
        tokens.iter().map(|t| self.lookup(t).map(<[f64]>::to_vec)).collect()
    }

    pub fn read_word2vec<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let header = header?;
        let nums: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(1, "header must be \"count dim\""));
        if nums.len() != 2 {
            return Err(Error::parse(1, "header must be \"count dim\""));
        }
        let count = parse_usize(nums[0])?;
        let dim = parse_usize(nums[1])?;
        let mut table = Self::new(dim).map_err(|e| Error::parse(1, e.to_string()))?;
        let mut rows = 0;
        for (i, line) in lines {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let v: Vec<f64> = parts
                .map(|x| x.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad number {x:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(Error::parse(lineno, format!("expected {dim} values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(lineno, "non-finite value"));
            }
            if word == UNK_TOKEN {
                table.unk = v;
            } else {
                table.insert(word, v)?;
            }
            rows += 1;
        }
        if rows != count {
            return Err(Error::parse(1, format!("header announces {count} rows, file has {rows}")));
        }
        Ok(table)
    }

    /// Writes the vocabulary followed by the UNK row.
    pub fn write_word2vec<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len() + 1, self.dim)?;
        let row = |w: &mut W, word: &str, v: &[f64]| -> Result<()> {
            write!(w, "{word}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
            Ok(())
        };
        for (k, word) in self.words.iter().enumerate() {
            row(&mut w, word, self.vector(k))?;
        }
        row(&mut w, UNK_TOKEN, &self.unk)?;
        w.flush()?;
        Ok(())
    }
}
