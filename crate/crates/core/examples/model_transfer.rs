//! Tag a target language with a source-language neural model by mapping
//! target embeddings into the source space.

use crossner::eval::phrasal_f1;
use crossner::linear::DecodeOptions;
use crossner::mapping::{extract_dictionary, learn_mapping, transfer_decode, transfer_inputs, DictionaryMode, DEFAULT_RIDGE};
use crossner::neural::{nn_train, NnConfig, NnTrainConfig};
use crossner::synth::*;

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 7);
    let language = SyntheticLanguageSpec { lowercase: true, ..Default::default() };
    let train = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 400, seed: 1 })?;
    let test_source = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 200, seed: 2 })?;
    let test = translate(&test_source, &language)?;

    let mut vocab = vocabulary(&train);
    vocab.extend(vocabulary(&test_source));
    let source = synthetic_embeddings(&lexicon, &vocab, &EmbeddingSpec { dim: 20, noise: 1.0, seed: 3 })?;
    let target = target_embeddings(&source, &language, &random_rotation(20, 4), 0.05, 5)?;
    let rows = synthetic_dictionary(source.words(), &language, 500, 6)?;
    let tsv: String = rows.iter().map(|(s, t, n)| format!("{s}\t{t}\t{n}\n")).collect();
    let dict = extract_dictionary(tsv.as_bytes(), 1, DictionaryMode::Weighted)?;
    let m = learn_mapping(&dict, &source, &target, DEFAULT_RIDGE)?.matrix;

    let model = nn_train(&train, &source, &NnConfig { hidden: 20, ..Default::default() }, &NnTrainConfig::default())?;
    let own: Vec<_> = test_source
        .iter()
        .map(|s| model.decode(s.tokens(), &source, DecodeOptions::default()).to_labeled())
        .collect();
    let moved = test
        .iter()
        .map(|s| transfer_decode(s.tokens(), &m, &target, &source, &model, DecodeOptions::default()).map(|t| t.to_labeled()))
        .collect::<crossner::Result<Vec<_>>>()?;
    println!("source F1 {:.4}", phrasal_f1(&test_source, &own)?.f1());
    println!("transfer F1 {:.4}", phrasal_f1(&test, &moved)?.f1());

    let sentence = &test[0];
    for (w, (_, from)) in sentence.tokens().iter().zip(transfer_inputs(sentence.tokens(), &m, &target, &source)?) {
        println!("{w:>14} {from:?}");
    }
    Ok(())
}
