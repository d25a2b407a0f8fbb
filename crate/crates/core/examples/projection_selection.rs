//! Project tags through a noisy synthetic bitext, score every sentence and
//! pick selection thresholds on a development set.

use crossner::eval::phrasal_f1;
use crossner::features::FeatureTemplateConfig;
use crossner::linear::{memm_train, DecodeOptions, TrainConfig};
use crossner::projection::{coordinate_search, project_corpus, score_corpus, FrequencyTable};
use crossner::synth::{generate_source_corpus, synth_bitext, translate, CorpusSpec, Lexicon, SyntheticLanguageSpec};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 7);
    let language = SyntheticLanguageSpec {
        lowercase: true,
        alignment_noise: 0.8,
        noisy_sentence_fraction: 0.4,
        seed: 3,
        ..Default::default()
    };
    let source = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 600, seed: 1 })?;
    let bitext = synth_bitext(&source, &language)?;
    let projected = project_corpus(&bitext.pairs, &bitext.source_tags)?;
    let table = FrequencyTable::build(&projected);

    let scores = score_corpus(&projected, &table)?;
    for (k, s) in scores.iter().enumerate().take(5) {
        let kind = if bitext.noisy[k] { "noisy" } else { "clean" };
        println!("sentence {k} ({kind}): q = {:.3}, n = {}", s.quality, s.entities);
    }

    let dev = translate(&generate_source_corpus(&lexicon, &CorpusSpec { sentences: 200, seed: 11 })?, &language)?;
    let template = FeatureTemplateConfig { order: 2, ..Default::default() };
    let config = TrainConfig { epochs: 5, ..Default::default() };
    let search = coordinate_search(
        &projected,
        &table,
        |data| memm_train(data, &template, &config),
        |m| {
            let pred: Vec<_> = dev.iter().map(|s| m.decode(s.tokens(), DecodeOptions::default()).to_labeled()).collect();
            Ok(phrasal_f1(&dev, &pred)?.f1())
        },
    )?;
    println!("{:>4} {:>2} {:>8} {:>7}", "q", "n", "selected", "dev F1");
    for g in &search.grid {
        println!("{:>4} {:>2} {:>8} {:>7.4}", g.thresholds.q, g.thresholds.n, g.selected, g.f1);
    }
    println!("chosen q = {}, n = {}", search.best.q, search.best.n);
    Ok(())
}
