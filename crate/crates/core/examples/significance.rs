//! Exact-match scoring and a stratified shuffling test between two systems.

use crossner::eval::{phrasal_f1, stratified_shuffling_test};
use crossner::features::FeatureTemplateConfig;
use crossner::linear::{crf_train, memm_train, DecodeOptions, TrainConfig};
use crossner::synth::{generate_source_corpus, CorpusSpec, Lexicon};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 9);
    let train = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 150, seed: 1 })?;
    let test = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 300, seed: 2 })?;
    let config = TrainConfig { epochs: 3, ..Default::default() };

    let crf = crf_train(&train, &FeatureTemplateConfig::default(), &config)?;
    let memm = memm_train(&train, &FeatureTemplateConfig { order: 1, shapes: false, ..Default::default() }, &config)?;
    let a: Vec<_> = test.iter().map(|s| crf.decode(s.tokens(), DecodeOptions::default()).to_labeled()).collect();
    let b: Vec<_> = test.iter().map(|s| memm.decode(s.tokens(), DecodeOptions::default()).to_labeled()).collect();

    print!("{}", phrasal_f1(&test, &a)?.to_key_values());
    println!("memm f1\t{:.4}", phrasal_f1(&test, &b)?.f1());
    let r = stratified_shuffling_test(&a, &b, &test, 10_000, 1)?;
    println!("difference {:.4}, p = {:.4}", r.observed, r.p_value);
    Ok(())
}
