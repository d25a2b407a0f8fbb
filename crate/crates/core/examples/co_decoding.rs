//! Combine two taggers' outputs with the rank and exclude-O schemes.

use crossner::codecode::{codecode, find_conflicts, Scheme};
use crossner::corpus::{parse_tags, ConfidenceTaggedSentence};

fn sentence(words: &[&str], tags: &[&str], conf: &[f64]) -> crossner::Result<ConfidenceTaggedSentence> {
    ConfidenceTaggedSentence::new(words.iter().map(|w| w.to_string()).collect(), parse_tags(tags)?, conf.to_vec())
}

fn main() -> crossner::Result<()> {
    let words = ["Mia", "Lund", "visited", "Port", "Arda"];
    let ap = sentence(&words, &["B-PER", "O", "O", "O", "O"], &[0.9, 0.8, 0.9, 0.7, 0.7])?;
    let rp = sentence(&words, &["B-ORG", "I-ORG", "O", "B-LOC", "I-LOC"], &[0.6, 0.6, 0.9, 0.8, 0.8])?;
    for c in find_conflicts(&ap.entities(), &rp.entities()) {
        println!("conflict: {:?} vs {:?} ({:?})", ap.entities()[c.a], rp.entities()[c.b], c.kind);
    }
    for scheme in [Scheme::Rank, Scheme::ExcludeO] {
        let out = codecode(scheme, &ap, &rp)?;
        let tags: Vec<String> = out.tags().iter().map(ToString::to_string).collect();
        println!("{scheme}: {}", tags.join(" "));
    }
    Ok(())
}
