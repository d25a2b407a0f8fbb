//! Window-based neural taggers over fixed embeddings: plain (nn1) and with
//! prototype smoothing (nn2).

use crossner::eval::phrasal_f1;
use crossner::linear::DecodeOptions;
use crossner::neural::{nn_train, Architecture, NnConfig, NnTrainConfig};
use crossner::synth::{generate_source_corpus, synthetic_embeddings, vocabulary, CorpusSpec, EmbeddingSpec, Lexicon};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(40, 2);
    let train = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 300, seed: 1 })?;
    let test = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 150, seed: 2 })?;
    let mut vocab = vocabulary(&train);
    vocab.extend(vocabulary(&test));
    let emb = synthetic_embeddings(&lexicon, &vocab, &EmbeddingSpec { dim: 20, noise: 1.0, seed: 3 })?;

    for arch in [Architecture::Nn1, Architecture::Nn2] {
        let config = NnConfig { architecture: arch, hidden: 20, ..Default::default() };
        let model = nn_train(&train, &emb, &config, &NnTrainConfig { epochs: 4, ..Default::default() })?;
        let pred: Vec<_> = test
            .iter()
            .map(|s| model.decode(s.tokens(), &emb, DecodeOptions::default()).to_labeled())
            .collect();
        println!("{arch}: {} parameters, F1 {:.4}", model.params().len(), phrasal_f1(&test, &pred)?.f1());
    }
    Ok(())
}
