//! Train a linear-chain CRF on a generated corpus and tag held-out text.

use crossner::eval::phrasal_f1;
use crossner::features::FeatureTemplateConfig;
use crossner::linear::{crf_train, DecodeOptions, LinearChainCrf, TrainConfig};
use crossner::synth::{generate_source_corpus, CorpusSpec, Lexicon};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 1);
    let train = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 400, seed: 1 })?;
    let test = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 200, seed: 2 })?;

    let config = TrainConfig { epochs: 8, ..Default::default() };
    let model = crf_train(&train, &FeatureTemplateConfig::default(), &config)?;
    println!("{} weights, {} labels", model.weights().len(), model.num_labels());

    let pred: Vec<_> = test
        .iter()
        .map(|s| model.decode(s.tokens(), DecodeOptions::default()).to_labeled())
        .collect();
    println!("held-out F1 {:.4}", phrasal_f1(&test, &pred)?.f1());

    let sample = &test[0];
    let out = model.decode(sample.tokens(), DecodeOptions::default());
    for ((w, t), c) in out.tokens().iter().zip(out.tags()).zip(out.confidences()) {
        println!("{w:>14} {t:<7} {c:.3}");
    }

    // the text format round-trips exactly
    let mut bytes = Vec::new();
    model.save(&mut bytes)?;
    let again = LinearChainCrf::load(&bytes[..])?;
    assert_eq!(again.decode(sample.tokens(), DecodeOptions::default()).tags(), out.tags());
    Ok(())
}
