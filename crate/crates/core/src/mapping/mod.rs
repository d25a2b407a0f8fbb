//! Cross-lingual embedding mapping and direct model transfer.
//!
//! A bilingual dictionary of weighted word pairs `(x, y, w)` (x in the source
//! language, y in the target language, `w = P(x | y)`) is used to fit a
//! linear map `M` from the target embedding space into the source space by
//! weighted least squares:
//!
//! ```text
//! M = (sum_i w_i u_i v_i^T) (sum_i w_i v_i v_i^T + eps I)^-1
//! ```
//!
//! where `u_i` and `v_i` are the source and target vectors of pair `i`.
//! A source-language neural tagger can then tag target text by feeding it
//! `M v` for every target word.

pub mod cbow;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::corpus::ConfidenceTaggedSentence;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linear::DecodeOptions;
use crate::neural::NnModel;

pub use cbow::{decay_weights, train_cbow_variant, CbowConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry {
    /// Source-language word.
    pub source: String,
    /// Target-language word.
    pub target: String,
    pub count: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DictionaryMode {
    /// Every retained pair, weighted by `P(x | y)`.
    #[default]
    Weighted,
    /// Only the most frequent source word per target word, weight 1. Ties go
    /// to the lexicographically smaller word.
    Top1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilingualDictionary {
    pub entries: Vec<DictionaryEntry>,
    pub min_freq: u64,
    pub mode: DictionaryMode,
}

impl BilingualDictionary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, source: &str, target: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.source == source && e.target == target)
            .map(|e| e.weight)
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut d = self.clone();
        for e in &mut d.entries {
            e.weight *= factor;
        }
        d
    }

    /// Copy with all weights set to 1.
    pub fn uniform(&self) -> Self {
        let mut d = self.clone();
        for e in &mut d.entries {
            e.weight = 1.0;
        }
        d
    }
}

/// Reads `source<TAB>target<TAB>count` lines. Counts of repeated pairs are
/// summed, pairs below `min_freq` dropped, and weights `P(x | y)` computed
/// over the retained pairs of each target word.
pub fn extract_dictionary<R: BufRead>(reader: R, min_freq: u64, mode: DictionaryMode) -> Result<BilingualDictionary> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 || cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::parse(i + 1, "expected source<TAB>target<TAB>count"));
        }
        let c: u64 = cols[2]
            .trim()
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::parse(i + 1, format!("count {:?} is not a positive integer", cols[2])))?;
        *counts.entry((cols[0].to_string(), cols[1].to_string())).or_default() += c;
    }
    let mut by_target: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
    for ((x, y), c) in counts {
        if c >= min_freq {
            by_target.entry(y).or_default().push((x, c));
        }
    }
    let mut entries = Vec::new();
    for (y, mut xs) in by_target {
        match mode {
            DictionaryMode::Weighted => {
                let total: u64 = xs.iter().map(|(_, c)| c).sum();
                for (x, c) in xs {
                    entries.push(DictionaryEntry {
                        source: x,
                        target: y.clone(),
                        count: c,
                        weight: c as f64 / total as f64,
                    });
                }
            }
            DictionaryMode::Top1 => {
                xs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                let (x, c) = xs.swap_remove(0);
                entries.push(DictionaryEntry {
                    source: x,
                    target: y,
                    count: c,
                    weight: 1.0,
                });
            }
        }
    }
    log::info!("dictionary: {} unique word pairs at min_freq {min_freq}", entries.len());
    Ok(BilingualDictionary {
        entries,
        min_freq,
        mode,
    })
}

/// Linear map from the target space (`cols` = d2) into the source space
/// (`rows` = d1), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MappingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("mapping entries must be finite".into()));
        }
        Ok(MappingMatrix { rows, cols, data })
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        MappingMatrix { rows: d, cols: d, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `M v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Header `d1 d2`, then one row per line.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| Error::parse(1, "header must be \"d1 d2\"")))
            .collect::<Result<_>>()?;
        if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
            return Err(Error::parse(1, "header must be \"d1 d2\""));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(r + 2, format!("expected {rows} rows")))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::parse(r + 2, format!("bad number {x:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::parse(r + 2, format!("expected {cols} values, found {}", vals.len())));
            }
            data.extend(vals);
        }
        Self::new(rows, cols, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingFit {
    pub matrix: MappingMatrix,
    pub pairs_used: usize,
    /// Pairs with a word missing from either table.
    pub pairs_dropped: usize,
    /// Weighted mean squared error `sum w |u - M v|^2 / sum w`.
    pub residual: f64,
    /// Absolute ridge added to the normal matrix.
    pub ridge: f64,
}

/// Relative ridge used when none is given: `1e-6` times the mean diagonal of
/// the normal matrix.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Solves the weighted least-squares problem. `ridge` is relative: the value
/// added to the diagonal is `ridge * trace(C) / d2`, which keeps the solution
/// invariant to rescaling the weights.
pub fn learn_mapping(
    dictionary: &BilingualDictionary,
    source: &EmbeddingTable,
    target: &EmbeddingTable,
    ridge: f64,
) -> Result<MappingFit> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Invalid("ridge must be non-negative".into()));
    }
    let (d1, d2) = (source.dim(), target.dim());
    let mut pairs: Vec<(&[f64], &[f64], f64)> = Vec::new();
    let mut dropped = 0;
    for e in &dictionary.entries {
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            return Err(Error::Invalid(format!("weight of {}/{} must be positive", e.source, e.target)));
        }
        match (source.lookup(&e.source), target.lookup(&e.target)) {
            (Some(u), Some(v)) => pairs.push((u, v, e.weight)),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{dropped} dictionary pairs dropped: word missing from an embedding table");
    }
    if pairs.is_empty() {
        return Err(Error::Invalid(format!(
            "no dictionary pair has both words in the embedding tables ({} entries, {dropped} dropped)",
            dictionary.len()
        )));
    }
    if pairs.len() < d2 {
        log::warn!("only {} pairs for a {d2}-dimensional target space", pairs.len());
    }
    let mut b = DMatrix::<f64>::zeros(d1, d2);
    let mut c = DMatrix::<f64>::zeros(d2, d2);
    for (u, v, w) in &pairs {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        b += *w * &u * v.transpose();
        c += *w * &v * v.transpose();
    }
    let eps = ridge * c.trace() / d2 as f64;
    for i in 0..d2 {
        c[(i, i)] += eps;
    }
    let singular = || {
        Error::Singular(
            "the normal matrix is singular: add more dictionary pairs or use a positive ridge".to_string(),
        )
    };
    let chol = c.clone().cholesky().ok_or_else(singular)?;
    let l = chol.l();
    let diag: Vec<f64> = (0..d2).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= max * 1e-13 {
        return Err(singular());
    }
    let mt = chol.solve(&b.transpose());
    let m = mt.transpose();
    let data: Vec<f64> = (0..d1).flat_map(|r| (0..d2).map(move |k| (r, k))).map(|(r, k)| m[(r, k)]).collect();
    let matrix = MappingMatrix::new(d1, d2, data)?;
    let residual = weighted_residual(&matrix, &pairs);
    Ok(MappingFit {
        matrix,
        pairs_used: pairs.len(),
        pairs_dropped: dropped,
        residual,
        ridge: eps,
    })
}

fn weighted_residual(m: &MappingMatrix, pairs: &[(&[f64], &[f64], f64)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, v, w) in pairs {
        let p = m.project(v).expect("dimensions checked");
        num += w * u.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        den += w;
    }
    num / den
}

/// Weighted mean squared error of `m` on the dictionary pairs found in both
/// tables.
pub fn mapping_residual(
    m: &MappingMatrix,
    dictionary: &BilingualDictionary,
    source: &EmbeddingTable,
    target: &EmbeddingTable,
) -> Result<f64> {
    if m.rows != source.dim() || m.cols != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim() * target.dim(),
            actual: m.rows * m.cols,
        });
    }
    let pairs: Vec<(&[f64], &[f64], f64)> = dictionary
        .entries
        .iter()
        .filter_map(|e| Some((source.lookup(&e.source)?, target.lookup(&e.target)?, e.weight)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Invalid("no usable dictionary pairs".into()));
    }
    Ok(weighted_residual(m, &pairs))
}

pub fn project_embedding(m: &MappingMatrix, v: &[f64]) -> Result<Vec<f64>> {
    m.project(v)
}

/// Where a transferred token's input vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferSource {
    Projected,
    SourceVocabulary,
    Unk,
}

/// Input vectors for a target sentence: `M v` for target-vocabulary words,
/// the source vector for source-vocabulary words, UNK otherwise.
pub fn transfer_inputs(
    tokens: &[String],
    m: &MappingMatrix,
    target: &EmbeddingTable,
    source: &EmbeddingTable,
) -> Result<Vec<(Option<Vec<f64>>, TransferSource)>> {
    if m.rows != source.dim() || m.cols != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim() * target.dim(),
            actual: m.rows * m.cols,
        });
    }
    tokens
        .iter()
        .map(|t| {
            Ok(if let Some(v) = target.lookup(t) {
                (Some(m.project(v)?), TransferSource::Projected)
            } else if let Some(u) = source.lookup(t) {
                (Some(u.to_vec()), TransferSource::SourceVocabulary)
            } else {
                (None, TransferSource::Unk)
            })
        })
        .collect()
}

/// Tags a target sentence with an unmodified source-language model.
pub fn transfer_decode(
    tokens: &[String],
    m: &MappingMatrix,
    target: &EmbeddingTable,
    source: &EmbeddingTable,
    model: &NnModel,
    options: DecodeOptions,
) -> Result<ConfidenceTaggedSentence> {
    if model.dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: source.dim(),
        });
    }
    let inputs: Vec<Option<Vec<f64>>> = transfer_inputs(tokens, m, target, source)?
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    Ok(model.decode_vectors(tokens, &inputs, options))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casa_weights() {
        let text = "house\tcasa\t9\nhome\tcasa\t1\n";
        let d = extract_dictionary(text.as_bytes(), 1, DictionaryMode::Weighted).unwrap();
        assert_eq!(d.weight("house", "casa"), Some(0.9));
        assert_eq!(d.weight("home", "casa"), Some(0.1));
        let top = extract_dictionary(text.as_bytes(), 1, DictionaryMode::Top1).unwrap();
        assert_eq!(top.entries.len(), 1);
        assert_eq!(top.weight("house", "casa"), Some(1.0));
    }

    #[test]
    fn duplicates_are_summed_before_thresholding() {
        let text = "house\tcasa\t2\nhouse\tcasa\t2\nhome\tcasa\t3\n";
        let d = extract_dictionary(text.as_bytes(), 4, DictionaryMode::Weighted).unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].count, 4);
        assert_eq!(d.weight("house", "casa"), Some(1.0));
        let d = extract_dictionary(text.as_bytes(), 100, DictionaryMode::Weighted).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = extract_dictionary("a\tb\t1\na\tb\n".as_bytes(), 1, DictionaryMode::Weighted).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = extract_dictionary("a\tb\t0\n".as_bytes(), 1, DictionaryMode::Weighted).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn matrix_round_trip() {
        let m = MappingMatrix::new(2, 3, vec![1.0, -0.5, 1e-20, 3.0, 0.0, 7.25]).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"2 3\n"));
        assert_eq!(MappingMatrix::read(&buf[..]).unwrap(), m);
        assert!(m.project(&[1.0, 2.0]).is_err());
    }
}
