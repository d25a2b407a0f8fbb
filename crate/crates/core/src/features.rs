//! Sparse binary features for the linear taggers.
//!
//! Observation features look at the token window around the focus position;
//! history features look at the previously assigned tags (MEMM only).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// History padding label used before the first token.
pub const BOS: &str = "<BOS>";

const PAD_LEFT: &str = "<S>";
const PAD_RIGHT: &str = "</S>";

/// Feature string to dense id map.
///
/// Ids are contiguous from 0 in insertion order. Once frozen, lookups of
/// unseen features return `None` and nothing is added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureAlphabet {
    index: HashMap<String, u32>,
    names: Vec<String>,
    frozen: bool,
}

impl FeatureAlphabet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn get(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    /// Looks up `feature`, adding it when the alphabet is still open.
    pub fn intern(&mut self, feature: &str) -> Option<u32> {
        if let Some(&id) = self.index.get(feature) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.names.len() as u32;
        self.names.push(feature.to_string());
        self.index.insert(feature.to_string(), id);
        Some(id)
    }

    /// Writes `id<TAB>feature` lines.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, n) in self.names.iter().enumerate() {
            writeln!(w, "{i}\t{n}")?;
        }
        Ok(())
    }

    /// Reads exactly `count` `id<TAB>feature` lines. The result is frozen.
    pub fn read_lines<R: BufRead>(lines: &mut std::io::Lines<R>, count: usize) -> Result<Self> {
        let mut a = FeatureAlphabet::new();
        for expected in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Model("truncated alphabet".into()))??;
            let (id, name) = line
                .split_once('\t')
                .ok_or_else(|| Error::Model(format!("bad alphabet line {line:?}")))?;
            if id.parse::<usize>().ok() != Some(expected) {
                return Err(Error::Model(format!("alphabet ids not contiguous at {line:?}")));
            }
            a.intern(name);
        }
        a.freeze();
        Ok(a)
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut a = FeatureAlphabet::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (id, name) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected id<TAB>feature"))?;
            if id.parse::<usize>().ok() != Some(a.len()) {
                return Err(Error::parse(i + 1, "alphabet ids must be contiguous from 0"));
            }
            a.intern(name);
        }
        a.freeze();
        Ok(a)
    }
}

/// Sorted, duplicate-free list of active binary feature ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    ids: Vec<u32>,
}

impl FeatureVector {
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        FeatureVector { ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// `(id, value)` pairs; every value is 1.0.
    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.ids.iter().map(|&i| (i, 1.0))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTemplateConfig {
    pub window: usize,
    pub affix_len: usize,
    pub shapes: bool,
    pub order: usize,
}

impl Default for FeatureTemplateConfig {
    fn default() -> Self {
        FeatureTemplateConfig {
            window: 2,
            affix_len: 4,
            shapes: true,
            order: 1,
        }
    }
}

impl FeatureTemplateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.affix_len < 1 {
            return Err(Error::Invalid("affix length must be at least 1".into()));
        }
        if self.order < 1 {
            return Err(Error::Invalid("tag-history order must be at least 1".into()));
        }
        Ok(())
    }

    /// Upper bound on the number of features emitted for one token.
    pub fn max_features_per_token(&self) -> usize {
        let r = self.window;
        let history = self.order + usize::from(self.order > 1);
        1 + (2 * r + 1) + 2 * r + usize::from(self.shapes) + 2 * self.affix_len + history
    }
}

/// Word shape: uppercase -> `A`, lowercase -> `a`, digit -> `0`, other -> `-`,
/// with runs of the same class collapsed.
pub fn word_shape(word: &str) -> String {
    let mut out = String::new();
    for c in word.chars() {
        let k = if c.is_uppercase() {
            'A'
        } else if c.is_lowercase() {
            'a'
        } else if c.is_numeric() {
            '0'
        } else {
            '-'
        };
        if !out.ends_with(k) {
            out.push(k);
        }
    }
    out
}

fn token_at(tokens: &[String], i: isize) -> &str {
    if i < 0 {
        PAD_LEFT
    } else if i as usize >= tokens.len() {
        PAD_RIGHT
    } else {
        &tokens[i as usize]
    }
}

/// Observation feature strings for `position`.
pub fn observation_feature_strings(
    tokens: &[String],
    position: usize,
    config: &FeatureTemplateConfig,
) -> Vec<String> {
    let r = config.window as isize;
    let p = position as isize;
    let mut out = Vec::with_capacity(config.max_features_per_token());
    out.push("bias".to_string());
    for k in -r..=r {
        out.push(format!("w[{k}]={}", token_at(tokens, p + k)));
    }
    for k in -r..r {
        out.push(format!(
            "w[{k}|{}]={}|{}",
            k + 1,
            token_at(tokens, p + k),
            token_at(tokens, p + k + 1)
        ));
    }
    let word = &tokens[position];
    if config.shapes {
        out.push(format!("shape={}", word_shape(word)));
    }
    let chars: Vec<char> = word.chars().collect();
    for k in 1..=config.affix_len.min(chars.len()) {
        let pre: String = chars[..k].iter().collect();
        let suf: String = chars[chars.len() - k..].iter().collect();
        out.push(format!("pre{k}={pre}"));
        out.push(format!("suf{k}={suf}"));
    }
    out
}

/// History feature strings. `prev_tags[0]` is the tag of the previous token,
/// `prev_tags[1]` the one before, and so on; missing positions are [`BOS`].
pub fn history_feature_strings<S: AsRef<str>>(prev_tags: &[S]) -> Vec<String> {
    let mut out = Vec::with_capacity(prev_tags.len() + 1);
    for (j, t) in prev_tags.iter().enumerate() {
        out.push(format!("t[-{}]={}", j + 1, t.as_ref()));
    }
    if prev_tags.len() > 1 {
        let joined: Vec<&str> = prev_tags.iter().rev().map(AsRef::as_ref).collect();
        out.push(format!("t[-{}..-1]={}", prev_tags.len(), joined.join("|")));
    }
    out
}

fn to_vector<'a>(
    strings: impl IntoIterator<Item = &'a String>,
    mut lookup: impl FnMut(&str) -> Option<u32>,
) -> FeatureVector {
    FeatureVector::from_ids(strings.into_iter().filter_map(|s| lookup(s)).collect())
}

/// Full feature vector (observation + history) for one token.
///
/// Grows `alphabet` unless it is frozen, in which case unseen features are
/// dropped.
pub fn extract_features<S: AsRef<str>>(
    tokens: &[String],
    position: usize,
    prev_tags: &[S],
    config: &FeatureTemplateConfig,
    alphabet: &mut FeatureAlphabet,
) -> FeatureVector {
    assert!(position < tokens.len(), "position out of range");
    assert_eq!(prev_tags.len(), config.order, "history length must equal order");
    let mut strings = observation_feature_strings(tokens, position, config);
    strings.extend(history_feature_strings(prev_tags));
    to_vector(&strings, |s| alphabet.intern(s))
}

/// Observation-only features through a read-only alphabet.
pub fn observation_features(
    tokens: &[String],
    position: usize,
    config: &FeatureTemplateConfig,
    alphabet: &FeatureAlphabet,
) -> FeatureVector {
    let strings = observation_feature_strings(tokens, position, config);
    to_vector(&strings, |s| alphabet.get(s))
}

pub fn observation_features_mut(
    tokens: &[String],
    position: usize,
    config: &FeatureTemplateConfig,
    alphabet: &mut FeatureAlphabet,
) -> FeatureVector {
    let strings = observation_feature_strings(tokens, position, config);
    to_vector(&strings, |s| alphabet.intern(s))
}

pub fn history_features<S: AsRef<str>>(prev_tags: &[S], alphabet: &FeatureAlphabet) -> FeatureVector {
    to_vector(&history_feature_strings(prev_tags), |s| alphabet.get(s))
}

pub fn history_features_mut<S: AsRef<str>>(
    prev_tags: &[S],
    alphabet: &mut FeatureAlphabet,
) -> FeatureVector {
    to_vector(&history_feature_strings(prev_tags), |s| alphabet.intern(s))
}
