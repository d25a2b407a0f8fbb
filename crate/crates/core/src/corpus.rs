//! Sentences, IOB2 tags, entity spans and word alignments, plus readers and
//! writers for the plain-text corpus formats.
//!
//! Internally every tag sequence is IOB2. CoNLL input written in IOB1 is
//! rewritten on read: an `I-t` that does not continue an entity of type `t`
//! becomes `B-t`.
//!
//! Formats:
//!
//! * CoNLL columns: one token per line, whitespace-separated columns, blank
//!   line between sentences. The tag column defaults to the last one.
//! * Tokenized text: one sentence per line, tokens separated by spaces.
//! * Alignments (Pharaoh/Moses): one sentence pair per line, `i-j` pairs,
//!   0-based, source index first.
//! * Confidence sidecar: `sent<TAB>token<TAB>conf`, one line per token.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A single IOB2 label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O,
    B(String),
    I(String),
}

impl Tag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::O)
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let (prefix, etype) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidTag(s.to_string()))?;
        if etype.is_empty() || etype.chars().any(char::is_whitespace) {
            return Err(Error::InvalidTag(s.to_string()));
        }
        match prefix {
            "B" => Ok(Tag::B(etype.to_string())),
            "I" => Ok(Tag::I(etype.to_string())),
            _ => Err(Error::InvalidTag(s.to_string())),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(t) => write!(f, "B-{t}"),
            Tag::I(t) => write!(f, "I-{t}"),
        }
    }
}

/// Parses a slice of tag strings.
pub fn parse_tags<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Tag>> {
    tags.iter().map(|t| t.as_ref().parse()).collect()
}

/// Ordered entity types and the derived label alphabet
/// `O, B-t1, I-t1, B-t2, I-t2, ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    entity_types: Vec<String>,
}

impl TagSet {
    pub fn new<S: Into<String>>(types: impl IntoIterator<Item = S>) -> Result<Self> {
        let entity_types: Vec<String> = types.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for t in &entity_types {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!("bad entity type name {t:?}")));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::Invalid(format!("duplicate entity type {t:?}")));
            }
        }
        Ok(TagSet { entity_types })
    }

    /// Entity types in order of first appearance in the corpus.
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a LabeledSentence>) -> Self {
        let mut types: Vec<String> = Vec::new();
        for s in sentences {
            for t in s.tags() {
                if let Some(e) = t.entity_type() {
                    if !types.iter().any(|x| x == e) {
                        types.push(e.to_string());
                    }
                }
            }
        }
        TagSet { entity_types: types }
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn num_labels(&self) -> usize {
        2 * self.entity_types.len() + 1
    }

    pub fn label(&self, tag: &Tag) -> Option<usize> {
        match tag {
            Tag::O => Some(0),
            Tag::B(t) => self.type_index(t).map(|k| 1 + 2 * k),
            Tag::I(t) => self.type_index(t).map(|k| 2 + 2 * k),
        }
    }

    pub fn tag(&self, label: usize) -> Tag {
        assert!(label < self.num_labels(), "label {label} out of range");
        if label == 0 {
            return Tag::O;
        }
        let t = self.entity_types[(label - 1) / 2].clone();
        if label % 2 == 1 {
            Tag::B(t)
        } else {
            Tag::I(t)
        }
    }

    pub fn tags(&self) -> Vec<Tag> {
        (0..self.num_labels()).map(|l| self.tag(l)).collect()
    }

    pub fn type_index(&self, etype: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == etype)
    }

    pub fn labels_of(&self, tags: &[Tag]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| self.label(t).ok_or_else(|| Error::InvalidTag(t.to_string())))
            .collect()
    }

    /// Whether label `cur` may follow `prev` (`None` = sentence start) in IOB2.
    pub fn allowed(&self, prev: Option<usize>, cur: usize) -> bool {
        if cur == 0 || cur % 2 == 1 {
            return true;
        }
        // I-t only after B-t or I-t
        match prev {
            Some(p) if p != 0 => (p - 1) / 2 == (cur - 1) / 2,
            _ => false,
        }
    }
}

/// Checks that `tags` is a valid IOB2 sequence.
pub fn validate_iob2(tags: &[Tag]) -> Result<()> {
    let mut prev: Option<&Tag> = None;
    for (i, t) in tags.iter().enumerate() {
        if let Tag::I(ty) = t {
            let ok = match prev {
                Some(Tag::B(p)) | Some(Tag::I(p)) => p == ty,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidIob {
                    index: i,
                    message: format!("{t} does not continue an entity of type {ty}"),
                });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Rewrites IOB1 (or sloppy IOB2) into IOB2.
pub fn normalize_iob1(tags: &mut [Tag]) {
    for i in 0..tags.len() {
        if let Tag::I(ty) = &tags[i] {
            let continues = i > 0
                && matches!(&tags[i - 1], Tag::B(p) | Tag::I(p) if p == ty);
            if !continues {
                tags[i] = Tag::B(ty.clone());
            }
        }
    }
}

fn validate_token(tok: &str) -> Result<()> {
    if tok.is_empty() {
        return Err(Error::InvalidSentence("empty token".into()));
    }
    if tok.chars().any(char::is_whitespace) {
        return Err(Error::InvalidSentence(format!(
            "token {tok:?} contains whitespace"
        )));
    }
    Ok(())
}

/// Tokens with an IOB2 tag sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::InvalidSentence(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        for t in &tokens {
            validate_token(t)?;
        }
        validate_iob2(&tags)?;
        Ok(LabeledSentence { tokens, tags })
    }

    /// An all-`O` sentence.
    pub fn unlabeled(tokens: Vec<String>) -> Result<Self> {
        let tags = vec![Tag::O; tokens.len()];
        Self::new(tokens, tags)
    }

    pub fn from_strs(tokens: &[&str], tags: &[&str]) -> Result<Self> {
        Self::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            parse_tags(tags)?,
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn entities(&self) -> Vec<EntityMention> {
        iob_to_spans(&self.tags).expect("sentence tags are IOB2-valid")
    }

    /// The same tokens with a different tag sequence.
    pub fn with_tags(&self, tags: Vec<Tag>) -> Result<Self> {
        Self::new(self.tokens.clone(), tags)
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Tag>) {
        (self.tokens, self.tags)
    }
}

/// Half-open token span `[start, end)` with an entity type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub etype: String,
}

impl EntityMention {
    pub fn new(start: usize, end: usize, etype: impl Into<String>) -> Self {
        EntityMention {
            start,
            end,
            etype: etype.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntityMention) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn same_span(&self, other: &EntityMention) -> bool {
        self.start == other.start && self.end == other.end
    }
}

impl fmt::Display for EntityMention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.etype)
    }
}

/// Converts an IOB2 tag sequence into entity spans sorted by start.
pub fn iob_to_spans(tags: &[Tag]) -> Result<Vec<EntityMention>> {
    validate_iob2(tags)?;
    let mut spans = Vec::new();
    let mut open: Option<EntityMention> = None;
    for (i, t) in tags.iter().enumerate() {
        match t {
            Tag::O => {
                spans.extend(open.take());
            }
            Tag::B(ty) => {
                spans.extend(open.take());
                open = Some(EntityMention::new(i, i + 1, ty.clone()));
            }
            Tag::I(_) => {
                if let Some(m) = open.as_mut() {
                    m.end = i + 1;
                }
            }
        }
    }
    spans.extend(open);
    Ok(spans)
}

/// Inverse of [`iob_to_spans`]. Spans may be given in any order.
pub fn spans_to_iob(spans: &[EntityMention], length: usize) -> Result<Vec<Tag>> {
    let mut sorted: Vec<&EntityMention> = spans.iter().collect();
    sorted.sort();
    for s in &sorted {
        if s.is_empty() || s.end > length {
            return Err(Error::Invalid(format!(
                "span {s} outside sentence of length {length}"
            )));
        }
    }
    for w in sorted.windows(2) {
        if w[0].overlaps(w[1]) {
            return Err(Error::OverlappingSpans {
                first: w[0].to_string(),
                second: w[1].to_string(),
            });
        }
    }
    let mut tags = vec![Tag::O; length];
    for s in sorted {
        tags[s.start] = Tag::B(s.etype.clone());
        for t in &mut tags[s.start + 1..s.end] {
            *t = Tag::I(s.etype.clone());
        }
    }
    Ok(tags)
}

/// Greedy leftmost-longest selection of non-overlapping spans.
///
/// Returns indices into `spans` of the kept spans, ordered by start.
pub fn leftmost_longest(spans: &[EntityMention]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        spans[a]
            .start
            .cmp(&spans[b].start)
            .then(spans[b].end.cmp(&spans[a].end))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut frontier = 0;
    for i in order {
        if spans[i].is_empty() {
            continue;
        }
        if spans[i].start >= frontier {
            frontier = spans[i].end;
            kept.push(i);
        }
    }
    kept
}

/// Source and target token sequences with alignment links `(i, j)`:
/// source token `i` is aligned to target token `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub links: BTreeSet<(usize, usize)>,
}

impl AlignedSentencePair {
    pub fn new(
        source: Vec<String>,
        target: Vec<String>,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in links {
            if i >= source.len() || j >= target.len() {
                return Err(Error::Invalid(format!(
                    "link {i}-{j} out of bounds for {}x{} pair",
                    source.len(),
                    target.len()
                )));
            }
            if !set.insert((i, j)) {
                return Err(Error::Invalid(format!("duplicate link {i}-{j}")));
            }
        }
        Ok(AlignedSentencePair {
            source,
            target,
            links: set,
        })
    }
}

/// Decoder output: tags plus a per-token confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTaggedSentence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
    confidences: Vec<f64>,
}

impl ConfidenceTaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>, confidences: Vec<f64>) -> Result<Self> {
        if tokens.len() != tags.len() || tags.len() != confidences.len() {
            return Err(Error::InvalidSentence(format!(
                "lengths differ: {} tokens, {} tags, {} confidences",
                tokens.len(),
                tags.len(),
                confidences.len()
            )));
        }
        if let Some(c) = confidences
            .iter()
            .find(|c| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::InvalidSentence(format!("confidence {c} outside [0,1]")));
        }
        validate_iob2(&tags)?;
        Ok(ConfidenceTaggedSentence {
            tokens,
            tags,
            confidences,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Mean token confidence over `[start, end)`.
    pub fn span_confidence(&self, span: &EntityMention) -> f64 {
        let slice = &self.confidences[span.start..span.end];
        slice.iter().sum::<f64>() / slice.len() as f64
    }

    pub fn entities(&self) -> Vec<EntityMention> {
        iob_to_spans(&self.tags).expect("tags are IOB2-valid")
    }

    pub fn scored_entities(&self) -> Vec<(EntityMention, f64)> {
        self.entities()
            .into_iter()
            .map(|e| {
                let c = self.span_confidence(&e);
                (e, c)
            })
            .collect()
    }

    pub fn to_labeled(&self) -> LabeledSentence {
        LabeledSentence {
            tokens: self.tokens.clone(),
            tags: self.tags.clone(),
        }
    }
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| {
        (
            i + 1,
            l.map(|mut s| {
                if s.ends_with('\r') {
                    s.pop();
                }
                s
            }),
        )
    })
}

/// Reads CoNLL column data. `tag_column` defaults to the last column.
///
/// Every non-blank line must have the same number of columns as the first
/// one. `-DOCSTART-` pseudo-sentences are skipped.
pub fn read_conll<R: BufRead>(reader: R, tag_column: Option<usize>) -> Result<Vec<LabeledSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut width: Option<usize> = None;

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let is_docstart = tokens.len() == 1 && tokens[0] == "-DOCSTART-";
        let mut t = std::mem::take(tags);
        let toks = std::mem::take(tokens);
        if !is_docstart {
            normalize_iob1(&mut t);
            sentences.push(
                LabeledSentence::new(toks, t).map_err(|e| Error::parse(line, e.to_string()))?,
            );
        }
        Ok(())
    };

    let mut last_line = 0;
    for (lineno, line) in lines(reader) {
        let line = line?;
        last_line = lineno;
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, lineno)?;
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let w = *width.get_or_insert(cols.len());
        if cols.len() != w {
            return Err(Error::parse(
                lineno,
                format!("expected {w} columns, found {}", cols.len()),
            ));
        }
        let tc = tag_column.unwrap_or(w - 1);
        if tc >= w || w < 2 {
            return Err(Error::parse(
                lineno,
                format!("tag column {tc} not present in {w}-column line"),
            ));
        }
        let tag: Tag = cols[tc]
            .parse()
            .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
        tokens.push(cols[0].to_string());
        tags.push(tag);
    }
    flush(&mut tokens, &mut tags, last_line + 1)?;
    Ok(sentences)
}

/// Writes `token TAG` lines with a blank line after each sentence.
pub fn write_conll<'a, W: Write>(
    mut writer: W,
    sentences: impl IntoIterator<Item = &'a LabeledSentence>,
) -> Result<()> {
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            writeln!(writer, "{tok} {tag}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Reads one whitespace-tokenized sentence per line.
pub fn read_tokenized<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (_, line) in lines(reader) {
        out.push(line?.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

pub fn write_tokenized<W: Write, S: AsRef<[String]>>(mut writer: W, sentences: &[S]) -> Result<()> {
    for s in sentences {
        writeln!(writer, "{}", s.as_ref().join(" "))?;
    }
    Ok(())
}

/// Reads Pharaoh `i-j` alignment lines.
pub fn read_alignments<R: BufRead>(reader: R) -> Result<Vec<BTreeSet<(usize, usize)>>> {
    let mut out = Vec::new();
    for (lineno, line) in lines(reader) {
        let line = line?;
        let mut set = BTreeSet::new();
        let mut col = 1;
        for piece in line.split(' ') {
            if piece.is_empty() {
                col += 1;
                continue;
            }
            let err = |msg: String| Error::Parse {
                line: lineno,
                column: Some(col),
                message: msg,
            };
            let (a, b) = piece
                .split_once('-')
                .ok_or_else(|| err(format!("malformed link {piece:?}")))?;
            let digits = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
            if !digits(a) || !digits(b) {
                return Err(err(format!("malformed link {piece:?}")));
            }
            let i: usize = a.parse().map_err(|_| err(format!("index overflow in {piece:?}")))?;
            let j: usize = b.parse().map_err(|_| err(format!("index overflow in {piece:?}")))?;
            if !set.insert((i, j)) {
                return Err(err(format!("duplicate link {piece:?}")));
            }
            col += piece.chars().count() + 1;
        }
        out.push(set);
    }
    Ok(out)
}

pub fn write_alignments<'a, W: Write>(
    mut writer: W,
    links: impl IntoIterator<Item = &'a BTreeSet<(usize, usize)>>,
) -> Result<()> {
    for set in links {
        let line: Vec<String> = set.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        writeln!(writer, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Writes the `sent<TAB>token<TAB>conf` sidecar.
pub fn write_confidences<'a, W: Write>(
    mut writer: W,
    sentences: impl IntoIterator<Item = &'a ConfidenceTaggedSentence>,
) -> Result<()> {
    for (s, sent) in sentences.into_iter().enumerate() {
        for (t, c) in sent.confidences.iter().enumerate() {
            writeln!(writer, "{s}\t{t}\t{c}")?;
        }
    }
    Ok(())
}

/// Reads a confidence sidecar back into per-sentence vectors.
pub fn read_confidences<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines(reader) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(lineno, "expected sent<TAB>token<TAB>conf"));
        }
        let s: usize = cols[0].parse().map_err(|_| Error::parse(lineno, "bad sentence index"))?;
        let t: usize = cols[1].parse().map_err(|_| Error::parse(lineno, "bad token index"))?;
        let c: f64 = cols[2].parse().map_err(|_| Error::parse(lineno, "bad confidence"))?;
        if s >= out.len() {
            out.resize_with(s + 1, Vec::new);
        }
        if t != out[s].len() {
            return Err(Error::parse(lineno, "token indices must be consecutive"));
        }
        out[s].push(c);
    }
    Ok(out)
}

/// Pairs CoNLL sentences with their sidecar confidences.
pub fn attach_confidences(
    sentences: Vec<LabeledSentence>,
    confidences: Vec<Vec<f64>>,
) -> Result<Vec<ConfidenceTaggedSentence>> {
    if sentences.len() != confidences.len() {
        return Err(Error::Misaligned {
            sentence: sentences.len().min(confidences.len()),
            message: format!(
                "{} sentences but {} confidence rows",
                sentences.len(),
                confidences.len()
            ),
        });
    }
    sentences
        .into_iter()
        .zip(confidences)
        .map(|(s, c)| {
            let (tokens, tags) = s.into_parts();
            ConfidenceTaggedSentence::new(tokens, tags, c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &[&str]) -> Vec<Tag> {
        parse_tags(s).unwrap()
    }

    #[test]
    fn minimal_conll_file() {
        let data = "John B-PER\nruns O\n\n";
        let s = read_conll(data.as_bytes(), None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tags(), tags(&["B-PER", "O"]).as_slice());
    }

    #[test]
    fn iob1_is_normalized() {
        let data = "a I-PER\nb I-PER\nc O\n";
        let s = read_conll(data.as_bytes(), None).unwrap();
        assert_eq!(s[0].tags(), tags(&["B-PER", "I-PER", "O"]).as_slice());

        let mut t = tags(&["I-LOC", "I-PER", "B-PER", "I-PER"]);
        normalize_iob1(&mut t);
        assert_eq!(t, tags(&["B-LOC", "B-PER", "B-PER", "I-PER"]));
    }

    #[test]
    fn empty_stream() {
        assert!(read_conll("".as_bytes(), None).unwrap().is_empty());
    }

    #[test]
    fn conll_column_errors() {
        let err = read_conll("a NN O\nb O\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_conll("a X-PER\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = read_conll("a O\n".as_bytes(), Some(3)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn conll_with_tag_column_and_crlf() {
        let data = "-DOCSTART- -X- O\r\n\r\nEU NNP B-ORG\r\nrejects VBZ O\r\n\r\n";
        let s = read_conll(data.as_bytes(), Some(2)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens(), &["EU", "rejects"]);
    }

    #[test]
    fn write_two_tokens_gives_three_lines() {
        let s = LabeledSentence::from_strs(&["John", "runs"], &["B-PER", "O"]).unwrap();
        let mut buf = Vec::new();
        write_conll(&mut buf, [&s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "John B-PER\nruns O\n\n");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn tokens_with_whitespace_rejected() {
        assert!(LabeledSentence::from_strs(&["a\tb"], &["O"]).is_err());
        assert!(LabeledSentence::from_strs(&[""], &["O"]).is_err());
        assert!(LabeledSentence::from_strs(&["a"], &["I-PER"]).is_err());
    }

    #[test]
    fn spans_from_worked_example() {
        assert_eq!(
            iob_to_spans(&tags(&["B-PER", "O", "O", "O", "O"])).unwrap(),
            vec![EntityMention::new(0, 1, "PER")]
        );
        assert_eq!(
            iob_to_spans(&tags(&["B-ORG", "I-ORG", "O", "B-LOC", "I-LOC"])).unwrap(),
            vec![EntityMention::new(0, 2, "ORG"), EntityMention::new(3, 5, "LOC")]
        );
        assert!(iob_to_spans(&tags(&["O", "O"])).unwrap().is_empty());
    }

    #[test]
    fn invalid_iob_reports_index() {
        let err = iob_to_spans(&tags(&["O", "B-PER", "I-LOC"])).unwrap_err();
        assert!(matches!(err, Error::InvalidIob { index: 2, .. }));
    }

    #[test]
    fn spans_to_tags() {
        assert_eq!(
            spans_to_iob(&[EntityMention::new(0, 2, "ORG")], 3).unwrap(),
            tags(&["B-ORG", "I-ORG", "O"])
        );
        assert_eq!(spans_to_iob(&[], 4).unwrap(), vec![Tag::O; 4]);
        assert_eq!(
            spans_to_iob(
                &[EntityMention::new(3, 5, "LOC"), EntityMention::new(0, 1, "PER")],
                5
            )
            .unwrap(),
            tags(&["B-PER", "O", "O", "B-LOC", "I-LOC"])
        );
        let err = spans_to_iob(
            &[EntityMention::new(0, 2, "ORG"), EntityMention::new(1, 3, "LOC")],
            4,
        )
        .unwrap_err();
        match err {
            Error::OverlappingSpans { first, second } => {
                assert_eq!(first, "(0,2,ORG)");
                assert_eq!(second, "(1,3,LOC)");
            }
            other => panic!("unexpected {other}"),
        }
    }

    fn all_iob2_sequences(len: usize, types: &[&str]) -> Vec<Vec<Tag>> {
        let mut labels = vec![Tag::O];
        for t in types {
            labels.push(Tag::B(t.to_string()));
            labels.push(Tag::I(t.to_string()));
        }
        let mut out: Vec<Vec<Tag>> = vec![vec![]];
        for _ in 0..len {
            let mut next = Vec::new();
            for seq in &out {
                for l in &labels {
                    let mut s = seq.clone();
                    s.push(l.clone());
                    if validate_iob2(&s).is_ok() {
                        next.push(s);
                    }
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn span_round_trip_exhaustive() {
        for len in 0..=6 {
            for seq in all_iob2_sequences(len, &["PER", "LOC"]) {
                let spans = iob_to_spans(&seq).unwrap();
                for w in spans.windows(2) {
                    assert!(w[0].end <= w[1].start);
                }
                assert_eq!(spans_to_iob(&spans, len).unwrap(), seq);
            }
        }
    }

    #[test]
    fn alignment_lines() {
        let a = read_alignments("0-0 1-2\n\n".as_bytes()).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0], BTreeSet::from([(0, 0), (1, 2)]));
        assert!(a[1].is_empty());
        let err = read_alignments("0-0 3-x\n".as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::Parse { line: 1, column: Some(5), .. }),
            "{err}"
        );
        assert!(read_alignments("0-0 0-0\n".as_bytes()).is_err());
    }

    #[test]
    fn tagset_labels() {
        let ts = TagSet::new(["PER", "ORG"]).unwrap();
        assert_eq!(ts.num_labels(), 5);
        for l in 0..5 {
            assert_eq!(ts.label(&ts.tag(l)), Some(l));
        }
        assert!(TagSet::new(["PER", "PER"]).is_err());
        assert!(TagSet::new(["P R"]).is_err());
        assert!(ts.allowed(Some(1), 2));
        assert!(!ts.allowed(Some(3), 2));
        assert!(!ts.allowed(None, 2));
        assert!(ts.allowed(None, 3));
    }

    #[test]
    fn leftmost_longest_prefers_longer() {
        let spans = vec![
            EntityMention::new(2, 3, "A"),
            EntityMention::new(0, 2, "B"),
            EntityMention::new(0, 3, "C"),
            EntityMention::new(3, 4, "D"),
        ];
        assert_eq!(leftmost_longest(&spans), vec![2, 3]);
    }

    #[test]
    fn confidence_sidecar_round_trip() {
        let s = ConfidenceTaggedSentence::new(
            vec!["a".into(), "b".into()],
            tags(&["B-PER", "O"]),
            vec![0.25, 0.875],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_confidences(&mut buf, [&s]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\t0\t0.25\n0\t1\t0.875\n");
        let back = read_confidences(buf.as_slice()).unwrap();
        let joined = attach_confidences(vec![s.to_labeled()], back).unwrap();
        assert_eq!(joined[0], s);
    }
}
