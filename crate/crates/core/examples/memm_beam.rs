//! Second-order MEMM: how the beam width changes decoding.

use crossner::eval::phrasal_f1;
use crossner::features::FeatureTemplateConfig;
use crossner::linear::{memm_train, DecodeOptions, TrainConfig};
use crossner::synth::{generate_source_corpus, CorpusSpec, Lexicon};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 3);
    let train = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 400, seed: 5 })?;
    let test = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 200, seed: 6 })?;

    let template = FeatureTemplateConfig { order: 2, ..Default::default() };
    let model = memm_train(&train, &template, &TrainConfig { epochs: 8, ..Default::default() })?;
    let exact = model.num_labels().pow(model.order() as u32);
    for width in [1, 2, 5, exact] {
        let pred: Vec<_> = test
            .iter()
            .map(|s| model.decode_with_beam(s.tokens(), width, DecodeOptions::default()).to_labeled())
            .collect();
        println!("beam {width:>3}: F1 {:.4}", phrasal_f1(&test, &pred)?.f1());
    }
    Ok(())
}
