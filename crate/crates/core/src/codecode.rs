//! Combining the outputs of two taggers.
//!
//! Two entities conflict when their spans overlap with different extents, or
//! when the spans are identical and the types differ. Identical span and
//! type is an agreement.
//!
//! * Rank scheme: keep every entity of the preferred (annotation projection)
//!   system, then add the other system's entities that conflict with none of
//!   them.
//! * Exclude-O confidence scheme: an entity whose span the other system
//!   tagged entirely O is kept whatever its confidence. Conflicting entities
//!   are compared by mean token confidence; an entity survives only if it
//!   wins all of its conflicts, with ties going to system A.
//!
//! Tokens inside an output entity take the confidences of the system that
//! contributed it. O tokens take the highest confidence among the systems
//! that also tagged them O, or 0 if neither did.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{leftmost_longest, spans_to_iob, ConfidenceTaggedSentence, EntityMention, Tag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictKind {
    OverlapDifferentSpan,
    SameSpanDifferentType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityConflict {
    /// Index into the first list.
    pub a: usize,
    /// Index into the second list.
    pub b: usize,
    pub kind: ConflictKind,
}

pub fn conflict_kind(a: &EntityMention, b: &EntityMention) -> Option<ConflictKind> {
    if a.same_span(b) {
        (a.etype != b.etype).then_some(ConflictKind::SameSpanDifferentType)
    } else if a.overlaps(b) {
        Some(ConflictKind::OverlapDifferentSpan)
    } else {
        None
    }
}

/// All conflicting pairs, ordered by `(a, b)`.
pub fn find_conflicts(entities_a: &[EntityMention], entities_b: &[EntityMention]) -> Vec<EntityConflict> {
    let mut out = Vec::new();
    for (i, a) in entities_a.iter().enumerate() {
        for (j, b) in entities_b.iter().enumerate() {
            if let Some(kind) = conflict_kind(a, b) {
                out.push(EntityConflict { a: i, b: j, kind });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rank,
    ExcludeO,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rank => "rank",
            Scheme::ExcludeO => "exclude-o",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rank" => Ok(Scheme::Rank),
            "exclude-o" | "exclude_o" | "confidence" => Ok(Scheme::ExcludeO),
            _ => Err(Error::Invalid(format!("unknown co-decoding scheme {s:?} (expected rank or exclude-o)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

fn check_tokens(a: &ConfidenceTaggedSentence, b: &ConfidenceTaggedSentence) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Misaligned {
            sentence: 0,
            message: format!("{} tokens versus {}", a.len(), b.len()),
        });
    }
    match a.tokens().iter().zip(b.tokens()).position(|(x, y)| x != y) {
        Some(position) => Err(Error::TokenMismatch { sentence: 0, position }),
        None => Ok(()),
    }
}

fn assemble(
    a: &ConfidenceTaggedSentence,
    b: &ConfidenceTaggedSentence,
    chosen: Vec<(EntityMention, Side)>,
) -> Result<ConfidenceTaggedSentence> {
    let spans: Vec<EntityMention> = chosen.iter().map(|(e, _)| e.clone()).collect();
    let keep = leftmost_longest(&spans);
    let chosen: Vec<&(EntityMention, Side)> = keep.iter().map(|&k| &chosen[k]).collect();
    let spans: Vec<EntityMention> = chosen.iter().map(|(e, _)| e.clone()).collect();
    let tags = spans_to_iob(&spans, a.len())?;
    let mut conf: Vec<f64> = (0..a.len())
        .map(|i| {
            let mut c: f64 = 0.0;
            if a.tags()[i] == Tag::O {
                c = c.max(a.confidences()[i]);
            }
            if b.tags()[i] == Tag::O {
                c = c.max(b.confidences()[i]);
            }
            c
        })
        .collect();
    for (e, side) in chosen {
        let src = match side {
            Side::A => a,
            Side::B => b,
        };
        conf[e.start..e.end].copy_from_slice(&src.confidences()[e.start..e.end]);
    }
    ConfidenceTaggedSentence::new(a.tokens().to_vec(), tags, conf)
}

/// Rank-based combination: all entities of `ap`, plus the entities of `rp`
/// that conflict with none of them.
pub fn codecode_rank(ap: &ConfidenceTaggedSentence, rp: &ConfidenceTaggedSentence) -> Result<ConfidenceTaggedSentence> {
    check_tokens(ap, rp)?;
    let ea = ap.entities();
    let eb = rp.entities();
    let mut chosen: Vec<(EntityMention, Side)> = ea.iter().map(|e| (e.clone(), Side::A)).collect();
    for e in &eb {
        let clash = ea.iter().any(|x| x.overlaps(e));
        if !clash {
            chosen.push((e.clone(), Side::B));
        }
    }
    assemble(ap, rp, chosen)
}

/// Exclude-O confidence-based combination.
pub fn codecode_confidence_exclude_o(
    a: &ConfidenceTaggedSentence,
    b: &ConfidenceTaggedSentence,
) -> Result<ConfidenceTaggedSentence> {
    check_tokens(a, b)?;
    let sa = a.scored_entities();
    let sb = b.scored_entities();
    let ea: Vec<EntityMention> = sa.iter().map(|(e, _)| e.clone()).collect();
    let eb: Vec<EntityMention> = sb.iter().map(|(e, _)| e.clone()).collect();
    let conflicts = find_conflicts(&ea, &eb);
    let mut a_ok = vec![true; ea.len()];
    let mut b_ok = vec![true; eb.len()];
    for c in &conflicts {
        if sa[c.a].1 >= sb[c.b].1 {
            b_ok[c.b] = false;
        } else {
            a_ok[c.a] = false;
        }
    }
    let mut chosen = Vec::new();
    for (i, e) in ea.iter().enumerate() {
        if !a_ok[i] {
            continue;
        }
        match eb.iter().position(|x| x == e) {
            // agreement: keep once, with the more confident system's scores
            Some(j) if sb[j].1 > sa[i].1 => chosen.push((e.clone(), Side::B)),
            _ => chosen.push((e.clone(), Side::A)),
        }
    }
    for (j, e) in eb.iter().enumerate() {
        if b_ok[j] && !ea.contains(e) {
            chosen.push((e.clone(), Side::B));
        }
    }
    assemble(a, b, chosen)
}

pub fn codecode(scheme: Scheme, a: &ConfidenceTaggedSentence, b: &ConfidenceTaggedSentence) -> Result<ConfidenceTaggedSentence> {
    match scheme {
        Scheme::Rank => codecode_rank(a, b),
        Scheme::ExcludeO => codecode_confidence_exclude_o(a, b),
    }
}

/// Sentence-by-sentence combination of two decoded corpora.
pub fn codecode_corpus(
    scheme: Scheme,
    a: &[ConfidenceTaggedSentence],
    b: &[ConfidenceTaggedSentence],
) -> Result<Vec<ConfidenceTaggedSentence>> {
    if a.len() != b.len() {
        return Err(Error::Misaligned {
            sentence: a.len().min(b.len()),
            message: format!("{} sentences versus {}", a.len(), b.len()),
        });
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| {
            codecode(scheme, x, y).map_err(|e| match e {
                Error::TokenMismatch { position, .. } => Error::TokenMismatch { sentence: k, position },
                Error::Misaligned { message, .. } => Error::Misaligned { sentence: k, message },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_tags;

    fn cts(tags: &[&str], conf: &[f64]) -> ConfidenceTaggedSentence {
        let toks = (0..tags.len()).map(|i| format!("t{i}")).collect();
        ConfidenceTaggedSentence::new(toks, parse_tags(tags).unwrap(), conf.to_vec()).unwrap()
    }

    #[test]
    fn conflict_definition() {
        let e = |s, t, ty| EntityMention::new(s, t, ty);
        assert_eq!(conflict_kind(&e(0, 2, "ORG"), &e(1, 3, "LOC")), Some(ConflictKind::OverlapDifferentSpan));
        assert_eq!(conflict_kind(&e(0, 2, "PER"), &e(0, 2, "ORG")), Some(ConflictKind::SameSpanDifferentType));
        assert_eq!(conflict_kind(&e(0, 2, "PER"), &e(3, 4, "LOC")), None);
        assert_eq!(conflict_kind(&e(0, 2, "PER"), &e(0, 2, "PER")), None);
    }

    #[test]
    fn rank_worked_example() {
        let ap = cts(&["B-PER", "O", "O", "O", "O"], &[0.9; 5]);
        let rp = cts(&["B-ORG", "I-ORG", "O", "B-LOC", "I-LOC"], &[0.6; 5]);
        let out = codecode_rank(&ap, &rp).unwrap();
        assert_eq!(out.tags(), &parse_tags(&["B-PER", "O", "O", "B-LOC", "I-LOC"]).unwrap()[..]);
        assert_eq!(out.confidences(), &[0.9, 0.9, 0.9, 0.6, 0.6]);
    }

    #[test]
    fn exclude_o_rules() {
        let a = cts(&["B-PER", "O", "O"], &[0.3, 0.9, 0.9]);
        let b = cts(&["O", "O", "O"], &[0.99; 3]);
        assert_eq!(codecode_confidence_exclude_o(&a, &b).unwrap().tags()[0], Tag::B("PER".into()));

        let a = cts(&["B-PER", "I-PER"], &[0.8, 0.8]);
        let b = cts(&["B-ORG", "I-ORG"], &[0.6, 0.6]);
        let out = codecode_confidence_exclude_o(&a, &b).unwrap();
        assert_eq!(out.entities(), vec![EntityMention::new(0, 2, "PER")]);

        let a = cts(&["B-ORG", "I-ORG", "O"], &[0.5, 0.5, 0.9]);
        let b = cts(&["O", "B-LOC", "I-LOC"], &[0.9, 0.9, 0.9]);
        let out = codecode_confidence_exclude_o(&a, &b).unwrap();
        assert_eq!(out.entities(), vec![EntityMention::new(1, 3, "LOC")]);
        assert_eq!(out.confidences()[0], 0.9);
    }

    #[test]
    fn ties_go_to_a() {
        let a = cts(&["B-PER"], &[0.5]);
        let b = cts(&["B-ORG"], &[0.5]);
        assert_eq!(codecode_confidence_exclude_o(&a, &b).unwrap().tags()[0], Tag::B("PER".into()));
    }

    #[test]
    fn token_mismatch_is_an_error() {
        let a = cts(&["O", "O"], &[0.5, 0.5]);
        let b = ConfidenceTaggedSentence::new(vec!["t0".into(), "x".into()], vec![Tag::O, Tag::O], vec![0.5, 0.5]).unwrap();
        assert!(matches!(codecode_rank(&a, &b), Err(Error::TokenMismatch { position: 1, .. })));
        let r = codecode_corpus(Scheme::ExcludeO, &[a.clone(), a.clone()], &[a.clone(), b]);
        assert!(matches!(r, Err(Error::TokenMismatch { sentence: 1, position: 1 })));
    }
}
