//! Annotation projection across word-aligned bitext, the entity frequency
//! table, sentence quality scores and threshold-based data selection.
//!
//! A source entity is projected onto the smallest contiguous target span
//! covering every target token aligned to it. Overlapping projections are
//! resolved leftmost-longest.
//!
//! The quality of a projected sentence is the mean, over its entity
//! mentions, of the relative frequency with which the mention's surface form
//! received the same type anywhere in the corpus. Sentences without entities
//! score 0.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::{iob_to_spans, leftmost_longest, spans_to_iob, AlignedSentencePair, EntityMention, LabeledSentence, Tag};
use crate::error::{Error, Result};

/// Entity kept in a projected sentence, with the source span it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedEntity {
    pub target: EntityMention,
    pub source: EntityMention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSentence {
    pub sentence: LabeledSentence,
    /// Kept entities, ordered by target start.
    pub entities: Vec<ProjectedEntity>,
    /// Source entities with no aligned target token.
    pub unaligned: usize,
    /// Projections dropped by overlap resolution.
    pub overlapping: usize,
}

impl ProjectedSentence {
    /// Wraps an already labeled sentence; provenance is the target span.
    pub fn from_labeled(sentence: LabeledSentence) -> Self {
        let entities = sentence
            .entities()
            .into_iter()
            .map(|e| ProjectedEntity {
                source: e.clone(),
                target: e,
            })
            .collect();
        ProjectedSentence {
            sentence,
            entities,
            unaligned: 0,
            overlapping: 0,
        }
    }

    /// Surface forms and types of the entity mentions, with multiplicity.
    pub fn mentions(&self) -> impl Iterator<Item = (String, &str)> + '_ {
        self.entities
            .iter()
            .map(|e| (surface(self.sentence.tokens(), &e.target), e.target.etype.as_str()))
    }
}

/// Space-joined tokens of a span.
pub fn surface(tokens: &[String], span: &EntityMention) -> String {
    tokens[span.start..span.end].join(" ")
}

/// Projects IOB2 `source_tags` through the alignment links of `pair`.
pub fn project_annotations(pair: &AlignedSentencePair, source_tags: &[Tag]) -> Result<ProjectedSentence> {
    if source_tags.len() != pair.source.len() {
        return Err(Error::DimensionMismatch {
            expected: pair.source.len(),
            actual: source_tags.len(),
        });
    }
    let source_spans = iob_to_spans(source_tags)?;
    let mut candidates = Vec::new();
    let mut sources = Vec::new();
    let mut unaligned = 0;
    for span in source_spans {
        let hull = pair
            .links
            .iter()
            .filter(|(i, _)| (span.start..span.end).contains(i))
            .fold(None, |acc: Option<(usize, usize)>, &(_, j)| match acc {
                None => Some((j, j)),
                Some((lo, hi)) => Some((lo.min(j), hi.max(j))),
            });
        match hull {
            None => unaligned += 1,
            Some((lo, hi)) => {
                candidates.push(EntityMention::new(lo, hi + 1, span.etype.clone()));
                sources.push(span);
            }
        }
    }
    let kept = leftmost_longest(&candidates);
    let overlapping = candidates.len() - kept.len();
    let entities: Vec<ProjectedEntity> = kept
        .iter()
        .map(|&k| ProjectedEntity {
            target: candidates[k].clone(),
            source: sources[k].clone(),
        })
        .collect();
    let targets: Vec<EntityMention> = entities.iter().map(|e| e.target.clone()).collect();
    let tags = spans_to_iob(&targets, pair.target.len())?;
    Ok(ProjectedSentence {
        sentence: LabeledSentence::new(pair.target.clone(), tags)?,
        entities,
        unaligned,
        overlapping,
    })
}

/// Projects a whole corpus in parallel; `source_tags[k]` belongs to
/// `pairs[k]`.
pub fn project_corpus(pairs: &[AlignedSentencePair], source_tags: &[Vec<Tag>]) -> Result<Vec<ProjectedSentence>> {
    if pairs.len() != source_tags.len() {
        return Err(Error::Misaligned {
            sentence: pairs.len().min(source_tags.len()),
            message: format!("{} sentence pairs but {} tagged source sentences", pairs.len(), source_tags.len()),
        });
    }
    pairs
        .par_iter()
        .zip(source_tags)
        .enumerate()
        .map(|(k, (p, t))| {
            project_annotations(p, t).map_err(|e| Error::Misaligned {
                sentence: k,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Per-surface-form type counts and relative frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

type Counts = BTreeMap<String, BTreeMap<String, u64>>;

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (surface, row) in b {
        let dst = a.entry(surface).or_default();
        for (t, c) in row {
            *dst.entry(t).or_default() += c;
        }
    }
    a
}

impl FrequencyTable {
    pub fn build(corpus: &[ProjectedSentence]) -> Self {
        let counts = corpus
            .par_iter()
            .fold(Counts::new, |mut acc, s| {
                for (surface, etype) in s.mentions() {
                    *acc.entry(surface).or_default().entry(etype.to_string()).or_default() += 1;
                }
                acc
            })
            .reduce(Counts::new, merge);
        FrequencyTable { counts }
    }

    /// Table from raw `(surface, type, count)` triples; zero counts are
    /// ignored.
    pub fn from_counts<S: Into<String>, T: Into<String>>(rows: impl IntoIterator<Item = (S, T, u64)>) -> Self {
        let mut counts = Counts::new();
        for (s, t, c) in rows {
            if c > 0 {
                *counts.entry(s.into()).or_default().entry(t.into()).or_default() += c;
            }
        }
        FrequencyTable { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, surface: &str, etype: &str) -> u64 {
        self.counts
            .get(surface)
            .and_then(|r| r.get(etype))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, surface: &str) -> u64 {
        self.counts.get(surface).map_or(0, |r| r.values().sum())
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.counts.contains_key(surface)
    }

    /// `P(type | surface)`; `None` if the surface form is unknown.
    pub fn frequency(&self, surface: &str, etype: &str) -> Option<f64> {
        let total = self.total(surface);
        (total > 0).then(|| self.count(surface, etype) as f64 / total as f64)
    }

    /// Rows as `(surface, type, count, relative frequency)`, sorted by
    /// surface form, then by decreasing count.
    pub fn rows(&self) -> Vec<(&str, &str, u64, f64)> {
        let mut out = Vec::new();
        for (surface, row) in &self.counts {
            let total: u64 = row.values().sum();
            let mut entries: Vec<(&String, &u64)> = row.iter().collect();
            entries.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            for (t, &c) in entries {
                out.push((surface.as_str(), t.as_str(), c, c as f64 / total as f64));
            }
        }
        out
    }

    /// `surface<TAB>type<TAB>count<TAB>relfreq` lines.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, t, c, f) in self.rows() {
            writeln!(w, "{s}\t{t}\t{c}\t{f}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the export format; relative frequencies are recomputed from the
    /// counts.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::parse(i + 1, "expected surface, type and count"));
            }
            let c: u64 = cols[2]
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad count {:?}", cols[2])))?;
            rows.push((cols[0].to_string(), cols[1].to_string(), c));
        }
        Ok(Self::from_counts(rows))
    }
}

/// `q(y)` and `n(y)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceScore {
    pub quality: f64,
    pub entities: usize,
}

pub fn quality_score(sentence: &ProjectedSentence, table: &FrequencyTable) -> Result<SentenceScore> {
    let mut sum = 0.0;
    let mut n = 0;
    for (surface, etype) in sentence.mentions() {
        let f = table
            .frequency(&surface, etype)
            .ok_or_else(|| Error::MissingEntity(surface.clone()))?;
        sum += f;
        n += 1;
    }
    Ok(SentenceScore {
        quality: if n == 0 { 0.0 } else { sum / n as f64 },
        entities: n,
    })
}

pub fn score_corpus(corpus: &[ProjectedSentence], table: &FrequencyTable) -> Result<Vec<SentenceScore>> {
    corpus.par_iter().map(|s| quality_score(s, table)).collect()
}

/// Selection thresholds: keep sentences with `q(y) >= q` and `n(y) >= n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionThresholds {
    pub q: f64,
    pub n: usize,
}

impl SelectionThresholds {
    pub fn new(q: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Invalid(format!("quality threshold {q} outside [0, 1]")));
        }
        Ok(SelectionThresholds { q, n })
    }

    /// Tolerates rounding in `q(y)` (a mean of ratios) against decimal
    /// thresholds such as 0.7.
    pub fn accepts(&self, score: &SentenceScore) -> bool {
        score.quality + 1e-12 >= self.q && score.entities >= self.n
    }
}

/// Indices of the accepted sentences, in order.
pub fn select_indices(scores: &[SentenceScore], thresholds: SelectionThresholds) -> Vec<usize> {
    (0..scores.len()).filter(|&k| thresholds.accepts(&scores[k])).collect()
}

pub fn select_data<'a>(
    corpus: &'a [ProjectedSentence],
    table: &FrequencyTable,
    thresholds: SelectionThresholds,
) -> Result<Vec<&'a ProjectedSentence>> {
    let scores = score_corpus(corpus, table)?;
    Ok(select_indices(&scores, thresholds)
        .into_iter()
        .map(|k| &corpus[k])
        .collect())
}

/// `sentence_index<TAB>q<TAB>n` lines for the given indices.
pub fn write_scores<W: Write>(mut w: W, scores: &[SentenceScore], indices: &[usize]) -> Result<()> {
    for &k in indices {
        writeln!(w, "{k}\t{}\t{}", scores[k].quality, scores[k].entities)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub thresholds: SelectionThresholds,
    pub selected: usize,
    pub f1: f64,
    /// Set when the subset was empty or the trainer failed; `f1` is then 0.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: SelectionThresholds,
    pub best_f1: f64,
    /// Phase 1 (n = 3, q = 0.0..0.9) followed by phase 2 (n = 1..5).
    pub grid: Vec<GridPoint>,
}

pub const SEARCH_QS: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const SEARCH_NS: [usize; 5] = [1, 2, 3, 4, 5];
pub const SEARCH_FIXED_N: usize = 3;

/// Two-phase coordinate search: first `q` with `n` fixed at 3, then `n` with
/// the chosen `q`. Ties go to the smaller threshold. `train` is called on
/// each non-empty selection and `evaluate` scores the trained model on the
/// development data.
pub fn coordinate_search<M>(
    corpus: &[ProjectedSentence],
    table: &FrequencyTable,
    mut train: impl FnMut(&[LabeledSentence]) -> Result<M>,
    mut evaluate: impl FnMut(&M) -> Result<f64>,
) -> Result<SearchResult> {
    let scores = score_corpus(corpus, table)?;
    let mut grid = Vec::new();
    let mut run = |th: SelectionThresholds, grid: &mut Vec<GridPoint>| -> Result<f64> {
        let subset: Vec<LabeledSentence> = select_indices(&scores, th)
            .into_iter()
            .map(|k| corpus[k].sentence.clone())
            .collect();
        let (f1, failed) = if subset.is_empty() {
            (0.0, Some("empty selection".to_string()))
        } else {
            match train(&subset) {
                Ok(m) => (evaluate(&m)?, None),
                Err(e) => {
                    log::warn!("training failed at q={} n={}: {e}", th.q, th.n);
                    (0.0, Some(e.to_string()))
                }
            }
        };
        log::info!("q={} n={} selected={} f1={f1:.4}", th.q, th.n, subset.len());
        grid.push(GridPoint {
            thresholds: th,
            selected: subset.len(),
            f1,
            failed,
        });
        Ok(f1)
    };
    let mut best_q = SEARCH_QS[0];
    let mut best = f64::NEG_INFINITY;
    for &q in &SEARCH_QS {
        let f1 = run(SelectionThresholds { q, n: SEARCH_FIXED_N }, &mut grid)?;
        if f1 > best {
            best = f1;
            best_q = q;
        }
    }
    let mut best_n = SEARCH_NS[0];
    let mut best = f64::NEG_INFINITY;
    for &n in &SEARCH_NS {
        let f1 = run(SelectionThresholds { q: best_q, n }, &mut grid)?;
        if f1 > best {
            best = f1;
            best_n = n;
        }
    }
    Ok(SearchResult {
        best: SelectionThresholds { q: best_q, n: best_n },
        best_f1: best,
        grid,
    })
}
