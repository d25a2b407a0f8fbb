//! Generate a synthetic bitext and show what the noise controls do.

use crossner::corpus::Tag;
use crossner::synth::{generate_source_corpus, synth_bitext, CorpusSpec, Lexicon, SyntheticLanguageSpec};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(20, 1);
    let source = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 4, seed: 1 })?;
    let language = SyntheticLanguageSpec {
        alignment_noise: 0.5,
        noisy_sentence_fraction: 0.5,
        label_noise: 0.3,
        seed: 2,
        ..Default::default()
    };
    let bitext = synth_bitext(&source, &language)?;
    for (k, pair) in bitext.pairs.iter().enumerate() {
        let show = |tags: &[Tag]| tags.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        println!("source: {}", pair.source.join(" "));
        println!("  tags: {}", show(&bitext.source_tags[k]));
        println!("target: {}", pair.target.join(" "));
        println!("  gold: {}", show(bitext.gold_target[k].tags()));
        let links: Vec<String> = pair.links.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        println!(" links: {}{}\n", links.join(" "), if bitext.noisy[k] { "  (noisy)" } else { "" });
    }
    Ok(())
}
