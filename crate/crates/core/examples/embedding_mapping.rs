//! Learn word vectors with the CBOW variant, then fit a linear map between
//! two embedding spaces from a weighted dictionary.

use crossner::mapping::cbow::{train_cbow_variant, CbowConfig};
use crossner::mapping::{extract_dictionary, learn_mapping, DictionaryMode, DEFAULT_RIDGE};
use crossner::synth::{
    generate_source_corpus, random_rotation, synthetic_dictionary, synthetic_embeddings, target_embeddings, vocabulary,
    CorpusSpec, EmbeddingSpec, Lexicon, SyntheticLanguageSpec,
};

fn main() -> crossner::Result<()> {
    let lexicon = Lexicon::generate(30, 4);
    let corpus = generate_source_corpus(&lexicon, &CorpusSpec { sentences: 500, seed: 1 })?;

    let text: Vec<Vec<String>> = corpus.iter().map(|s| s.tokens().to_vec()).collect();
    let config = CbowConfig { dim: 16, epochs: 3, min_count: 2, ..Default::default() };
    let vectors = train_cbow_variant(&text, &config)?;
    println!("cbow: {} words, dimension {}", vectors.len(), vectors.dim());

    // a second language whose space is a rotation of the first
    let language = SyntheticLanguageSpec::default();
    let source = synthetic_embeddings(&lexicon, &vocabulary(&corpus), &EmbeddingSpec { dim: 16, noise: 1.0, seed: 2 })?;
    let target = target_embeddings(&source, &language, &random_rotation(16, 3), 0.05, 4)?;
    let rows = synthetic_dictionary(source.words(), &language, 300, 5)?;
    let tsv: String = rows.iter().map(|(s, t, n)| format!("{s}\t{t}\t{n}\n")).collect();
    for mode in [DictionaryMode::Weighted, DictionaryMode::Top1] {
        let dict = extract_dictionary(tsv.as_bytes(), 1, mode)?;
        let fit = learn_mapping(&dict, &source, &target, DEFAULT_RIDGE)?;
        println!("{mode:?}: {} pairs, weighted residual {:.4}", fit.pairs_used, fit.residual);
    }
    Ok(())
}
