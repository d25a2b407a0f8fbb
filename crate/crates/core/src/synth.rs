//! Synthetic corpora for desk-scale experiments.
//!
//! * A template generator for a labeled "source language" corpus over
//!   procedurally generated entity lexicons.
//! * A synthetic "target language" obtained by a deterministic word
//!   transform, with identity alignments perturbed by alignment noise and
//!   source labels perturbed by label noise.
//! * Embedding tables in which entity words cluster by type, and rotated
//!   copies of them for the target language.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{AlignedSentencePair, EntityMention, LabeledSentence, Tag};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::mapping::MappingMatrix;

pub const ENTITY_TYPES: [&str; 4] = ["PER", "ORG", "LOC", "MISC"];

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ra", "ten", "vo", "sha", "dri", "bel", "nor", "gu", "pe", "zan", "ti", "mar", "os", "qui",
    "fa", "len", "dor", "ul", "bri", "ces", "hom",
];
const ORG_HEADS: [&str; 6] = ["Corp", "Group", "Bank", "Holdings", "Motors", "Airlines"];
const LOC_HEADS: [&str; 3] = ["Port", "New", "San"];

/// Entity names per type; each name is a token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub entries: BTreeMap<String, Vec<Vec<String>>>,
}

fn cap(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn stem(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

impl Lexicon {
    /// `size` distinct names per type. PER names have one or two tokens, ORG
    /// names end in a company word, some LOC names start with a place word,
    /// MISC names are single demonym-like tokens.
    pub fn generate(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut used: BTreeSet<String> = BTreeSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng, suffix: &str| loop {
            let n = rng.random_range(2..=3);
            let w = cap(&format!("{}{suffix}", stem(rng, n)));
            if used.insert(w.clone()) {
                return w;
            }
        };
        let mut entries = BTreeMap::new();
        let mut names: Vec<Vec<String>> = Vec::new();
        while names.len() < size {
            let last = fresh(&mut rng, "");
            names.push(if rng.random_bool(0.6) {
                vec![fresh(&mut rng, ""), last]
            } else {
                vec![last]
            });
        }
        entries.insert("PER".to_string(), names);
        let orgs = (0..size)
            .map(|_| {
                let mut v = vec![fresh(&mut rng, "")];
                if rng.random_bool(0.3) {
                    v.push(fresh(&mut rng, ""));
                }
                v.push(ORG_HEADS.choose(&mut rng).expect("non-empty").to_string());
                v
            })
            .collect();
        entries.insert("ORG".to_string(), orgs);
        let locs = (0..size)
            .map(|_| {
                if rng.random_bool(0.25) {
                    vec![LOC_HEADS.choose(&mut rng).expect("non-empty").to_string(), fresh(&mut rng, "")]
                } else {
                    vec![fresh(&mut rng, "")]
                }
            })
            .collect();
        entries.insert("LOC".to_string(), locs);
        let misc = (0..size).map(|_| vec![fresh(&mut rng, "ian")]).collect();
        entries.insert("MISC".to_string(), misc);
        Lexicon { entries }
    }

    /// Distinct entity names of a labeled corpus, in order of first
    /// occurrence.
    pub fn from_corpus(corpus: &[LabeledSentence]) -> Self {
        let mut entries: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for s in corpus {
            for e in s.entities() {
                let name = s.tokens()[e.start..e.end].to_vec();
                if seen.insert((e.etype.clone(), name.clone())) {
                    entries.entry(e.etype).or_default().push(name);
                }
            }
        }
        Lexicon { entries }
    }

    /// Splits every type's names into a first part of `fraction` and the
    /// rest.
    pub fn split(&self, fraction: f64) -> (Lexicon, Lexicon) {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for (t, names) in &self.entries {
            let k = ((names.len() as f64) * fraction).round() as usize;
            a.insert(t.clone(), names[..k].to_vec());
            b.insert(t.clone(), names[k..].to_vec());
        }
        (Lexicon { entries: a }, Lexicon { entries: b })
    }

    /// Words occurring inside names of each type.
    pub fn words_by_type(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.entries
            .iter()
            .map(|(t, names)| (t.clone(), names.iter().flatten().cloned().collect()))
            .collect()
    }
}

const TEMPLATES: [&str; 24] = [
    "{PER} said on {DAY} that {ORG} would open an office in {LOC} .",
    "shares of {ORG} fell {NUM} percent in {LOC} trading .",
    "{PER} , a spokesman for {ORG} , declined to comment .",
    "the {MISC} delegation met {PER} in {LOC} on {DAY} .",
    "{LOC} beat {LOC} {NUM} - {NUM} in the final .",
    "{ORG} agreed to buy a stake in {ORG} for {NUM} million dollars .",
    "police in {LOC} arrested {NUM} people on {DAY} .",
    "{PER} will travel to {LOC} next week , officials said .",
    "the {MISC} government rejected the offer from {ORG} .",
    "{PER} told reporters that talks with {PER} had failed .",
    "{ORG} reported a profit of {NUM} million dollars .",
    "a {MISC} court sentenced {PER} to {NUM} years .",
    "{PER} of {LOC} won the race ahead of {PER} .",
    "the talks in {LOC} were praised by {MISC} officials .",
    "{ORG} chief executive {PER} resigned on {DAY} .",
    "prices rose sharply in {LOC} after the {MISC} elections .",
    "analysts expect {ORG} to raise its forecast .",
    "{PER} scored twice as {LOC} won the {MISC} cup .",
    "the market closed higher on {DAY} .",
    "officials said the talks would resume next week .",
    "the index fell {NUM} points in thin trading .",
    "rain is expected on {DAY} , forecasters said .",
    "{PER} visited {LOC} with {MISC} officials .",
    "the company said it would cut {NUM} jobs .",
];

const DAYS: [&str; 5] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"];

/// Source corpus generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub sentences: usize,
    pub seed: u64,
}

/// Fills the templates with names drawn uniformly from `lexicon`.
pub fn generate_source_corpus(lexicon: &Lexicon, spec: &CorpusSpec) -> Result<Vec<LabeledSentence>> {
    if lexicon.entries.values().any(Vec::is_empty) {
        return Err(Error::Invalid("every entity type needs at least one name".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let template = TEMPLATES.choose(&mut rng).expect("non-empty");
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for piece in template.split(' ') {
            match piece {
                "{DAY}" => {
                    tokens.push(DAYS.choose(&mut rng).expect("non-empty").to_string());
                    tags.push(Tag::O);
                }
                "{NUM}" => {
                    tokens.push(rng.random_range(1..100).to_string());
                    tags.push(Tag::O);
                }
                p if p.starts_with('{') => {
                    let t = &p[1..p.len() - 1];
                    let name = lexicon.entries[t].choose(&mut rng).expect("non-empty");
                    for (k, w) in name.iter().enumerate() {
                        tokens.push(w.clone());
                        tags.push(if k == 0 { Tag::B(t.into()) } else { Tag::I(t.into()) });
                    }
                }
                w => {
                    tokens.push(w.to_string());
                    tags.push(Tag::O);
                }
            }
        }
        out.push(LabeledSentence::new(tokens, tags)?);
    }
    Ok(out)
}

/// How the synthetic target language is derived from the source.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLanguageSpec {
    /// Appended to every reversed word.
    pub suffix: String,
    /// Lowercase every target word, removing the capitalization cue.
    pub lowercase: bool,
    /// Per-link probability of being dropped or redirected, in noisy
    /// sentences.
    pub alignment_noise: f64,
    /// Fraction of sentence pairs subject to alignment noise.
    pub noisy_sentence_fraction: f64,
    /// Per-entity probability of a wrong source type before projection.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticLanguageSpec {
    fn default() -> Self {
        SyntheticLanguageSpec {
            suffix: "o".to_string(),
            lowercase: false,
            alignment_noise: 0.0,
            noisy_sentence_fraction: 1.0,
            label_noise: 0.0,
            seed: 1,
        }
    }
}

impl SyntheticLanguageSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("alignment noise", self.alignment_noise),
            ("noisy sentence fraction", self.noisy_sentence_fraction),
            ("label noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Reverses the characters, appends the suffix, and either lowercases
    /// the result or keeps the case of the first letter.
    pub fn transform(&self, word: &str) -> String {
        let reversed: String = word.chars().rev().collect::<String>().to_lowercase() + &self.suffix;
        if self.lowercase {
            reversed.to_lowercase()
        } else if word.chars().next().is_some_and(char::is_uppercase) {
            cap(&reversed)
        } else {
            reversed
        }
    }

    /// Transform table over `vocabulary`; errors if two words collide.
    pub fn transform_vocabulary<'a>(&self, vocabulary: impl IntoIterator<Item = &'a str>) -> Result<HashMap<String, String>> {
        let mut forward = HashMap::new();
        let mut inverse: HashMap<String, String> = HashMap::new();
        for w in vocabulary {
            if forward.contains_key(w) {
                continue;
            }
            let t = self.transform(w);
            if let Some(prev) = inverse.insert(t.clone(), w.to_string()) {
                return Err(Error::Invalid(format!(
                    "word transform is not injective: {prev:?} and {w:?} both map to {t:?}"
                )));
            }
            forward.insert(w.to_string(), t);
        }
        Ok(forward)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBitext {
    pub pairs: Vec<AlignedSentencePair>,
    /// Source tags after label noise; the input to projection.
    pub source_tags: Vec<Vec<Tag>>,
    /// Clean target labels.
    pub gold_target: Vec<LabeledSentence>,
    /// Whether each pair received alignment noise.
    pub noisy: Vec<bool>,
}

impl SyntheticBitext {
    pub fn source_sentences(&self) -> Result<Vec<LabeledSentence>> {
        self.pairs
            .iter()
            .zip(&self.source_tags)
            .map(|(p, t)| LabeledSentence::new(p.source.clone(), t.clone()))
            .collect()
    }
}

/// Target-language copy of labeled sentences (clean transform, no noise).
pub fn translate(source: &[LabeledSentence], spec: &SyntheticLanguageSpec) -> Result<Vec<LabeledSentence>> {
    let map = spec.transform_vocabulary(source.iter().flat_map(|s| s.tokens().iter().map(String::as_str)))?;
    source
        .iter()
        .map(|s| LabeledSentence::new(s.tokens().iter().map(|w| map[w].clone()).collect(), s.tags().to_vec()))
        .collect()
}

/// Builds the bitext. Alignments start as the identity; in noisy pairs each
/// link is, with probability `alignment_noise`, dropped or (equally likely)
/// redirected to a different random target position.
pub fn synth_bitext(source: &[LabeledSentence], spec: &SyntheticLanguageSpec) -> Result<SyntheticBitext> {
    spec.validate()?;
    let gold_target = translate(source, spec)?;
    let types: Vec<String> = source
        .iter()
        .flat_map(|s| s.entities())
        .map(|e| e.etype)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(source.len());
    let mut source_tags = Vec::with_capacity(source.len());
    let mut noisy = Vec::with_capacity(source.len());
    for (s, t) in source.iter().zip(&gold_target) {
        let n = s.len();
        let is_noisy = rng.random_bool(spec.noisy_sentence_fraction);
        let mut links = BTreeSet::new();
        for i in 0..n {
            if is_noisy && rng.random_bool(spec.alignment_noise) {
                if rng.random_bool(0.5) || n < 2 {
                    continue;
                }
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                links.insert((i, j));
            } else {
                links.insert((i, i));
            }
        }
        let mut spans: Vec<EntityMention> = s.entities();
        for e in &mut spans {
            if types.len() > 1 && rng.random_bool(spec.label_noise) {
                let others: Vec<&String> = types.iter().filter(|t| **t != e.etype).collect();
                e.etype = (*others.choose(&mut rng).expect("at least two types")).clone();
            }
        }
        source_tags.push(crate::corpus::spans_to_iob(&spans, n)?);
        pairs.push(AlignedSentencePair::new(s.tokens().to_vec(), t.tokens().to_vec(), links)?);
        noisy.push(is_noisy);
    }
    Ok(SyntheticBitext {
        pairs,
        source_tags,
        gold_target,
        noisy,
    })
}

/// Embedding generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub dim: usize,
    /// Standard deviation of the per-word noise around the type centre.
    pub noise: f64,
    pub seed: u64,
}

/// Vectors for `vocabulary`: words of an entity type are that type's centre
/// plus Gaussian noise; all other words get an independent random vector.
/// Centres and random vectors have unit expected squared norm per
/// coordinate.
pub fn synthetic_embeddings(lexicon: &Lexicon, vocabulary: &BTreeSet<String>, spec: &EmbeddingSpec) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    let centres: BTreeMap<String, Vec<f64>> = lexicon.entries.keys().map(|t| (t.clone(), gauss(&mut rng))).collect();
    let mut class: HashMap<&str, &str> = HashMap::new();
    for (t, words) in lexicon.entries.iter().map(|(t, n)| (t, n.iter().flatten())) {
        for w in words {
            class.entry(w.as_str()).or_insert(t.as_str());
        }
    }
    let mut table = EmbeddingTable::new(d)?;
    for w in vocabulary {
        let v = match class.get(w.as_str()) {
            Some(t) => centres[*t]
                .iter()
                .map(|c| c + spec.noise * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            None => gauss(&mut rng),
        };
        table.insert(w.clone(), v)?;
    }
    Ok(table)
}

/// Haar-random orthogonal matrix.
pub fn random_rotation(d: usize, seed: u64) -> MappingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut data = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            data.push(q[(i, j)] * r[(j, j)].signum());
        }
    }
    MappingMatrix::new(d, d, data).expect("finite")
}

/// Target-language table: every source word `w` becomes `transform(w)` with
/// vector `R u + noise`.
pub fn target_embeddings(
    source: &EmbeddingTable,
    spec: &SyntheticLanguageSpec,
    rotation: &MappingMatrix,
    noise: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    let map = spec.transform_vocabulary(source.words().iter().map(String::as_str))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(rotation.rows())?;
    for (k, w) in source.words().iter().enumerate() {
        let mut v = rotation.project(source.vector(k))?;
        for x in &mut v {
            *x += noise * rng.sample::<f64, _>(StandardNormal);
        }
        table.insert(map[w].clone(), v)?;
    }
    Ok(table)
}

/// `source<TAB>target<TAB>count` rows pairing `pairs` random source words
/// with their transforms.
pub fn synthetic_dictionary(
    vocabulary: &[String],
    spec: &SyntheticLanguageSpec,
    pairs: usize,
    seed: u64,
) -> Result<Vec<(String, String, u64)>> {
    let map = spec.transform_vocabulary(vocabulary.iter().map(String::as_str))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<&String> = vocabulary.iter().collect::<BTreeSet<_>>().into_iter().collect();
    words.shuffle(&mut rng);
    Ok(words
        .into_iter()
        .take(pairs)
        .map(|w| (w.clone(), map[w].clone(), rng.random_range(1..20)))
        .collect())
}

/// All tokens of a corpus.
pub fn vocabulary(corpus: &[LabeledSentence]) -> BTreeSet<String> {
    corpus.iter().flat_map(|s| s.tokens().iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_examples() {
        let spec = SyntheticLanguageSpec::default();
        assert_eq!(spec.transform("Paris"), "Sirapo");
        assert_eq!(spec.transform("said"), "diaso");
        let lower = SyntheticLanguageSpec {
            lowercase: true,
            ..Default::default()
        };
        assert_eq!(lower.transform("Paris"), "sirapo");
        assert!(lower.transform_vocabulary(["May", "may"]).is_err());
        assert!(spec.transform_vocabulary(["May", "may"]).is_ok());
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let lex = Lexicon::generate(20, 1);
        let spec = CorpusSpec { sentences: 50, seed: 3 };
        let a = generate_source_corpus(&lex, &spec).unwrap();
        assert_eq!(a, generate_source_corpus(&lex, &spec).unwrap());
        assert!(a.iter().any(|s| !s.entities().is_empty()));
        assert!(a.iter().any(|s| s.entities().is_empty()));
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = random_rotation(5, 2);
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..5).map(|k| r.get(k, i) * r.get(k, j)).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
