//! Command implementations behind the `crossner` binary.
//!
//! Every command reads a flat `key = value` configuration ([`Settings`]),
//! validates all of it before touching any output, then runs and returns a
//! machine-readable `key<TAB>value` report.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::codecode::{codecode_corpus, Scheme};
use crate::corpus::{
    attach_confidences, read_alignments, read_confidences, read_conll, read_tokenized, write_alignments,
    write_confidences, write_conll, write_tokenized, AlignedSentencePair, ConfidenceTaggedSentence, LabeledSentence,
    Tag, TagSet,
};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{phrasal_f1, stratified_shuffling_test, MIN_SHUFFLES};
use crate::features::FeatureTemplateConfig;
use crate::linear::crf::{crf_train_with_tagset, LinearChainCrf};
use crate::linear::memm::{memm_train, Memm, DEFAULT_BEAM};
use crate::linear::optim::TrainConfig;
use crate::linear::DecodeOptions;
use crate::mapping::{
    extract_dictionary, learn_mapping, transfer_inputs, DictionaryMode, MappingMatrix, TransferSource, DEFAULT_RIDGE,
};
use crate::model_io::peek_kind;
use crate::neural::{nn_train_with_tagset, Architecture, NnConfig, NnModel, NnTrainConfig};
use crate::projection::{
    coordinate_search, project_corpus, score_corpus, select_indices, write_scores, FrequencyTable, SearchResult,
    SelectionThresholds,
};
use crate::synth::{
    generate_source_corpus, random_rotation, synth_bitext, synthetic_dictionary, synthetic_embeddings,
    target_embeddings, vocabulary, CorpusSpec, EmbeddingSpec, Lexicon, SyntheticLanguageSpec,
};

/// Flat configuration: `key = value` lines, `#` comments, blank lines
/// ignored. Later assignments replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(k + 1, format!("expected `key = value`, found {line:?}")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(k + 1, "empty key"));
            }
            s.set(key, value.trim());
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Settings::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.replace('-', "_"), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        match assignment.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                self.set(k.trim(), v.trim());
                Ok(())
            }
            _ => Err(Error::Config(vec![format!("override {assignment:?} is not of the form key=value")])),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TrainSource,
    ProjectSelectTrain,
    LearnMapping,
    Transfer,
    Codecode,
    Evaluate,
    Significance,
    SynthBitext,
    CoordinateSearch,
    Tag,
}

pub const COMMANDS: [Command; 10] = [
    Command::TrainSource,
    Command::ProjectSelectTrain,
    Command::LearnMapping,
    Command::Transfer,
    Command::Codecode,
    Command::Evaluate,
    Command::Significance,
    Command::SynthBitext,
    Command::CoordinateSearch,
    Command::Tag,
];

const TRAIN_KEYS: [(&str, &str); 8] = [
    ("epochs", "training epochs"),
    ("learning_rate", "initial step size"),
    ("decay", "step-size decay per mini-batch"),
    ("l2", "L2 penalty"),
    ("batch_size", "sentences per mini-batch"),
    ("tolerance", "relative objective change that stops training"),
    ("seed", "random seed"),
    ("workers", "maximum worker threads"),
];

const FEATURE_KEYS: [(&str, &str); 3] = [
    ("window", "context radius"),
    ("affix_len", "longest prefix/suffix feature"),
    ("shapes", "word-shape features (true/false)"),
];

const PROJECT_KEYS: [(&str, &str); 15] = [
    ("source", "tokenized source sentences (with source_model)"),
    ("source_model", "source tagger used to label the source side"),
    ("source_embeddings", "word vectors for an NN source tagger"),
    ("source_tags", "CoNLL source side with tags (instead of source + source_model)"),
    ("target", "tokenized target sentences"),
    ("alignments", "Pharaoh alignments, source-target"),
    ("dev", "target-language CoNLL development set"),
    ("order", "MEMM tag-history order"),
    ("beam", "MEMM beam width"),
    ("projected", "write all projected sentences (CoNLL)"),
    ("selected", "write the selected sentences (CoNLL)"),
    ("table", "write the frequency table"),
    ("scores", "write per-sentence quality scores"),
    ("report", "write the report here as well as to standard output"),
    ("grid", "write the search grid"),
];

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TrainSource => "train-source",
            Command::ProjectSelectTrain => "project-select-train",
            Command::LearnMapping => "learn-mapping",
            Command::Transfer => "transfer",
            Command::Codecode => "codecode",
            Command::Evaluate => "evaluate",
            Command::Significance => "significance",
            Command::SynthBitext => "synth-bitext",
            Command::CoordinateSearch => "coordinate-search",
            Command::Tag => "tag",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::TrainSource => "Train a source-language CRF or neural tagger",
            Command::ProjectSelectTrain => "Project tags through a bitext, select sentences, train a target MEMM",
            Command::LearnMapping => "Learn a linear map from target to source embeddings",
            Command::Transfer => "Tag target text with a source neural model through the embedding map",
            Command::Codecode => "Combine the outputs of two taggers",
            Command::Evaluate => "Exact-match precision, recall and F1",
            Command::Significance => "Stratified shuffling test between two systems",
            Command::SynthBitext => "Generate a synthetic bitext with controlled noise",
            Command::CoordinateSearch => "Search selection thresholds on a development set",
            Command::Tag => "Tag text with a saved CRF, MEMM or neural model",
        }
    }

    /// Accepted configuration keys with one-line descriptions.
    pub fn keys(self) -> Vec<(&'static str, &'static str)> {
        let mut keys: Vec<(&str, &str)> = match self {
            Command::TrainSource => {
                let mut k = vec![
                    ("train", "labeled source corpus (CoNLL)"),
                    ("model", "output model file"),
                    ("dev", "optional development set (CoNLL)"),
                    ("architecture", "crf, nn1 or nn2"),
                    ("embeddings", "word vectors (word2vec text), required for nn1/nn2"),
                    ("hidden", "hidden units"),
                    ("history", "previous tags fed to the network"),
                    ("tag_dim", "tag embedding size"),
                    ("prototypes", "NN2 prototype count"),
                    ("temperature", "NN2 smoothing temperature"),
                    ("init_scale", "initialization range multiplier"),
                ];
                k.extend(FEATURE_KEYS);
                k.extend(TRAIN_KEYS);
                k
            }
            Command::ProjectSelectTrain | Command::CoordinateSearch => {
                let mut k = PROJECT_KEYS.to_vec();
                k.push(("model", "output target MEMM"));
                if self == Command::ProjectSelectTrain {
                    k.push(("q", "minimum quality score, or auto"));
                    k.push(("n", "minimum entity count"));
                }
                k.extend(FEATURE_KEYS);
                k.extend(TRAIN_KEYS);
                k
            }
            Command::LearnMapping => vec![
                ("dictionary", "source<TAB>target<TAB>count rows"),
                ("source_embeddings", "source word vectors"),
                ("target_embeddings", "target word vectors"),
                ("mapping", "output matrix"),
                ("min_freq", "drop pairs seen fewer times"),
                ("mode", "weighted or top1"),
                ("ridge", "relative ridge"),
                ("workers", "maximum worker threads"),
            ],
            Command::Transfer => vec![
                ("input", "target text to tag"),
                ("format", "tokens (one sentence per line) or conll"),
                ("model", "source NN model"),
                ("mapping", "matrix from learn-mapping"),
                ("source_embeddings", "source word vectors"),
                ("target_embeddings", "target word vectors"),
                ("output", "tagged output (CoNLL)"),
                ("confidences", "confidence sidecar (default: output + .conf)"),
                ("beam", "beam width"),
                ("constrain", "forbid invalid IOB2 transitions (true/false)"),
                ("workers", "maximum worker threads"),
            ],
            Command::Tag => vec![
                ("input", "text to tag"),
                ("format", "tokens (one sentence per line) or conll"),
                ("model", "saved model"),
                ("embeddings", "word vectors, required for neural models"),
                ("output", "tagged output (CoNLL)"),
                ("confidences", "confidence sidecar (default: output + .conf)"),
                ("beam", "beam width for MEMM and neural models"),
                ("constrain", "forbid invalid IOB2 transitions (true/false)"),
                ("workers", "maximum worker threads"),
            ],
            Command::Codecode => vec![
                ("ap", "tagged output of the projection-trained system (CoNLL)"),
                ("ap_confidences", "its confidence sidecar"),
                ("rp", "tagged output of the transferred system (CoNLL)"),
                ("rp_confidences", "its confidence sidecar"),
                ("scheme", "rank or exclude-o"),
                ("output", "combined output (CoNLL)"),
                ("confidences", "combined confidence sidecar"),
                ("workers", "maximum worker threads"),
            ],
            Command::Evaluate => vec![
                ("gold", "gold CoNLL"),
                ("predicted", "system output (CoNLL)"),
                ("format", "kv or table"),
                ("workers", "maximum worker threads"),
            ],
            Command::Significance => vec![
                ("gold", "gold CoNLL"),
                ("a", "first system output"),
                ("b", "second system output"),
                ("iterations", "number of shuffles"),
                ("alpha", "significance level"),
                ("seed", "random seed"),
                ("workers", "maximum worker threads"),
            ],
            Command::SynthBitext => vec![
                ("source", "labeled source corpus (CoNLL); or use generate"),
                ("generate", "number of template sentences to generate instead"),
                ("lexicon_size", "names per entity type when generating"),
                ("lexicon_seed", "seed of the generated lexicon"),
                ("suffix", "appended to every reversed word"),
                ("lowercase", "lowercase the target language (true/false)"),
                ("alignment_noise", "per-link drop/redirect probability"),
                ("noisy_fraction", "fraction of pairs that receive alignment noise"),
                ("label_noise", "per-entity wrong-type probability"),
                ("out_dir", "output directory"),
                ("embedding_dim", "also write embeddings and a dictionary when positive"),
                ("embedding_noise", "spread of entity vectors around their type centre"),
                ("target_noise", "noise added to rotated target vectors"),
                ("dictionary_pairs", "dictionary size"),
                ("seed", "random seed"),
                ("workers", "maximum worker threads"),
            ],
        };
        keys.dedup_by_key(|(k, _)| *k);
        keys
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        COMMANDS
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown command {s:?}")]))
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

/// Collects every configuration problem before failing.
struct Checker<'a> {
    settings: &'a Settings,
    errors: Vec<String>,
}

impl<'a> Checker<'a> {
    fn new(command: Command, settings: &'a Settings) -> Self {
        let known: Vec<&str> = command.keys().into_iter().map(|(k, _)| k).collect();
        let errors = settings
            .keys()
            .filter(|k| !known.contains(k))
            .map(|k| format!("unknown key {k:?} for {command}"))
            .collect();
        Checker { settings, errors }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.settings.get(key).filter(|v| !v.is_empty())
    }

    fn error(&mut self, message: impl Into<String>) {
        self.errors.push(message.into());
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(format!("{key}: cannot parse {raw:?}: {e}"));
                None
            }
        }
    }

    fn value<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.opt(key).unwrap_or(default)
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key).map(parse_bool) {
            None => default,
            Some(Ok(b)) => b,
            Some(Err(e)) => {
                self.error(format!("{key}: {e}"));
                default
            }
        }
    }

    fn opt_input(&mut self, key: &str) -> Option<PathBuf> {
        let p = PathBuf::from(self.raw(key)?);
        if p.is_file() {
            Some(p)
        } else {
            self.error(format!("{key}: input file {} does not exist", p.display()));
            None
        }
    }

    fn input(&mut self, key: &str) -> Option<PathBuf> {
        if self.raw(key).is_none() {
            self.error(format!("{key}: required input path is missing"));
            return None;
        }
        self.opt_input(key)
    }

    fn opt_output(&mut self, key: &str) -> Option<PathBuf> {
        let p = PathBuf::from(self.raw(key)?);
        self.check_parent(key, &p);
        Some(p)
    }

    fn output(&mut self, key: &str) -> Option<PathBuf> {
        if self.raw(key).is_none() {
            self.error(format!("{key}: required output path is missing"));
            return None;
        }
        self.opt_output(key)
    }

    fn check_parent(&mut self, key: &str, p: &Path) {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
        if let Some(d) = parent {
            if !d.is_dir() {
                self.error(format!("{key}: directory {} does not exist", d.display()));
            }
        }
        if p.is_dir() {
            self.error(format!("{key}: {} is a directory", p.display()));
        }
    }

    fn check(&mut self, result: Result<()>) {
        match result {
            Ok(()) => {}
            Err(Error::Config(list)) => self.errors.extend(list),
            Err(e) => self.errors.push(e.to_string()),
        }
    }

    fn workers(&mut self) {
        if let Some(0) = self.opt::<usize>("workers") {
            self.error("workers must be at least 1");
        }
    }

    fn finish(self) -> Result<()> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.errors))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::from(e).in_file(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::from(e).in_file(path))
}

fn with_file<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    f(open(path)?).map_err(|e| e.in_file(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|()| w.flush().map_err(Error::from)).map_err(|e| e.in_file(path))
}

pub fn read_conll_file(path: &Path) -> Result<Vec<LabeledSentence>> {
    with_file(path, |r| read_conll(r, None))
}

fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    with_file(path, EmbeddingTable::read_word2vec)
}

/// Reads a CoNLL file and, when given, its confidence sidecar; without one
/// every token gets confidence 1.
fn read_tagged(path: &Path, sidecar: Option<&Path>) -> Result<Vec<ConfidenceTaggedSentence>> {
    let sentences = read_conll_file(path)?;
    let conf = match sidecar {
        Some(p) => with_file(p, read_confidences)?,
        None => sentences.iter().map(|s| vec![1.0; s.len()]).collect(),
    };
    attach_confidences(sentences, conf).map_err(|e| e.in_file(path))
}

/// `kind` field of a saved model.
pub fn model_kind(path: &Path) -> Result<String> {
    with_file(path, peek_kind)
}

/// Any saved tagger.
#[derive(Debug, Clone)]
pub enum Tagger {
    Crf(LinearChainCrf),
    Memm(Memm),
    Nn(NnModel),
}

impl Tagger {
    pub fn load(path: &Path) -> Result<Self> {
        let kind = model_kind(path)?;
        with_file(path, |r| match kind.as_str() {
            "crf" => LinearChainCrf::load(r).map(Tagger::Crf),
            "memm" => Memm::load(r).map(Tagger::Memm),
            "nn" => NnModel::load(r).map(Tagger::Nn),
            other => Err(Error::Model(format!("unknown model kind {other:?}"))),
        })
    }

    pub fn tagset(&self) -> &TagSet {
        match self {
            Tagger::Crf(m) => m.tagset(),
            Tagger::Memm(m) => m.tagset(),
            Tagger::Nn(m) => m.tagset(),
        }
    }

    /// Neural models need `embeddings`.
    pub fn tag(
        &self,
        tokens: &[String],
        embeddings: Option<&EmbeddingTable>,
        options: DecodeOptions,
    ) -> Result<ConfidenceTaggedSentence> {
        Ok(match self {
            Tagger::Crf(m) => m.decode(tokens, options),
            Tagger::Memm(m) => m.decode(tokens, options),
            Tagger::Nn(m) => {
                let emb = embeddings.ok_or_else(|| Error::Invalid("a neural model needs word embeddings".into()))?;
                if emb.dim() != m.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim(),
                        actual: emb.dim(),
                    });
                }
                m.decode(tokens, emb, options)
            }
        })
    }
}

/// Caps the global rayon pool when `workers` is set. Only the first call in
/// a process has an effect.
pub fn configure_workers(settings: &Settings) -> Result<()> {
    if let Some(raw) = settings.get("workers") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(vec![format!("workers: expected a positive integer, got {raw:?}")]))?;
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized; workers={n} ignored");
        }
    }
    Ok(())
}

/// Report lines in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k}\t{v}")?;
        }
        Ok(())
    }
}

fn train_config(c: &mut Checker, defaults: TrainConfig) -> TrainConfig {
    let cfg = TrainConfig {
        epochs: c.value("epochs", defaults.epochs),
        learning_rate: c.value("learning_rate", defaults.learning_rate),
        decay: c.value("decay", defaults.decay),
        l2: c.value("l2", defaults.l2),
        batch_size: c.value("batch_size", defaults.batch_size),
        seed: c.value("seed", defaults.seed),
        tolerance: c.value("tolerance", defaults.tolerance),
    };
    c.check(cfg.validate());
    cfg
}

fn template_config(c: &mut Checker, order: usize) -> FeatureTemplateConfig {
    let d = FeatureTemplateConfig::default();
    let t = FeatureTemplateConfig {
        window: c.value("window", d.window),
        affix_len: c.value("affix_len", d.affix_len),
        shapes: c.flag("shapes", d.shapes),
        order,
    };
    c.check(t.validate());
    t
}

fn dev_f1(tagger: &Tagger, dev: &[LabeledSentence], emb: Option<&EmbeddingTable>) -> Result<f64> {
    let pred = dev
        .par_iter()
        .map(|s| tagger.tag(s.tokens(), emb, DecodeOptions::default()).map(|t| t.to_labeled()))
        .collect::<Result<Vec<_>>>()?;
    Ok(phrasal_f1(dev, &pred)?.f1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceArchitecture {
    Crf,
    Neural(Architecture),
}

impl FromStr for SourceArchitecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("crf") {
            Ok(SourceArchitecture::Crf)
        } else {
            s.parse()
                .map(SourceArchitecture::Neural)
                .map_err(|_| Error::Invalid(format!("unknown architecture {s:?} (expected crf, nn1 or nn2)")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSourceConfig {
    pub train: PathBuf,
    pub model: PathBuf,
    pub dev: Option<PathBuf>,
    pub architecture: SourceArchitecture,
    pub embeddings: Option<PathBuf>,
    pub template: FeatureTemplateConfig,
    pub linear: TrainConfig,
    pub nn: NnConfig,
    pub nn_train: NnTrainConfig,
}

impl TrainSourceConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::TrainSource, settings);
        c.workers();
        let train = c.input("train");
        let model = c.output("model");
        let dev = c.opt_input("dev");
        let architecture = c.value("architecture", SourceArchitecture::Crf);
        let embeddings = match architecture {
            SourceArchitecture::Crf => c.opt_input("embeddings"),
            SourceArchitecture::Neural(_) => c.input("embeddings"),
        };
        let template = template_config(&mut c, 1);
        let linear = train_config(&mut c, TrainConfig::default());
        let d = NnConfig::default();
        let arch = match architecture {
            SourceArchitecture::Neural(a) => a,
            SourceArchitecture::Crf => Architecture::Nn1,
        };
        let nn = NnConfig {
            architecture: arch,
            window: c.value("window", d.window),
            hidden: c.value("hidden", d.hidden),
            history: c.value("history", d.history),
            tag_dim: c.value("tag_dim", d.tag_dim),
            prototypes: c.value("prototypes", d.prototypes),
            temperature: c.value("temperature", d.temperature),
        };
        let dt = NnTrainConfig::default();
        let nn_train = NnTrainConfig {
            epochs: c.value("epochs", dt.epochs),
            learning_rate: c.value("learning_rate", dt.learning_rate),
            decay: c.value("decay", dt.decay),
            l2: c.value("l2", dt.l2),
            batch_size: c.value("batch_size", dt.batch_size),
            seed: c.value("seed", dt.seed),
            init_scale: c.value("init_scale", dt.init_scale),
            tolerance: c.value("tolerance", dt.tolerance),
        };
        if let SourceArchitecture::Neural(_) = architecture {
            c.check(nn.validate());
            c.check(nn_train.validate());
        }
        c.finish()?;
        Ok(TrainSourceConfig {
            train: train.expect("validated"),
            model: model.expect("validated"),
            dev,
            architecture,
            embeddings,
            template,
            linear,
            nn,
            nn_train,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let data = read_conll_file(&self.train)?;
        let dev = self.dev.as_deref().map(read_conll_file).transpose()?;
        let mut report = Report::default();
        report.push("sentences", data.len());
        report.push("tokens", data.iter().map(LabeledSentence::len).sum::<usize>());
        let tagset = TagSet::from_sentences(&data);
        report.push("entity_types", tagset.entity_types().join(","));
        let (tagger, emb, trace) = match self.architecture {
            SourceArchitecture::Crf => {
                let (m, trace) = crf_train_with_tagset(&data, tagset, &self.template, &self.linear)?;
                report.push("architecture", "crf");
                report.push("features", m.alphabet().len());
                (Tagger::Crf(m), None, trace)
            }
            SourceArchitecture::Neural(a) => {
                let emb = read_embeddings(self.embeddings.as_deref().expect("validated"))?;
                let (m, trace) = nn_train_with_tagset(&data, tagset, &emb, &self.nn, &self.nn_train)?;
                report.push("architecture", a);
                report.push("parameters", m.params().len());
                (Tagger::Nn(m), Some(emb), trace)
            }
        };
        report.push("epochs_run", trace.len().saturating_sub(1));
        report.push("objective", trace.last().copied().unwrap_or(f64::NAN));
        if let Some(dev) = &dev {
            let f1 = dev_f1(&tagger, dev, emb.as_ref())?;
            log::info!("development F1 {f1:.4}");
            report.push("dev_f1", f1);
        }
        write_file(&self.model, |w| match &tagger {
            Tagger::Crf(m) => m.save(w),
            Tagger::Nn(m) => m.save(w),
            Tagger::Memm(m) => m.save(w),
        })?;
        report.push("model", self.model.display());
        Ok(report)
    }
}

/// Where the source-side tags come from.
#[derive(Debug, Clone)]
pub enum SourceLabels {
    /// CoNLL file with tokens and tags.
    Tagged(PathBuf),
    /// Tokenized text tagged by a saved model.
    Model {
        text: PathBuf,
        model: PathBuf,
        embeddings: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    Fixed(SelectionThresholds),
    Auto,
}

#[derive(Debug, Clone)]
pub struct ProjectSelectConfig {
    pub labels: SourceLabels,
    pub target: PathBuf,
    pub alignments: PathBuf,
    pub dev: Option<PathBuf>,
    pub mode: SelectionMode,
    pub model: Option<PathBuf>,
    pub template: FeatureTemplateConfig,
    pub train: TrainConfig,
    pub beam: usize,
    pub projected: Option<PathBuf>,
    pub selected: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

impl ProjectSelectConfig {
    /// `command` is [`Command::ProjectSelectTrain`] or
    /// [`Command::CoordinateSearch`]; the latter always searches and only
    /// trains a model when one is requested.
    pub fn from_settings(command: Command, settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(command, settings);
        c.workers();
        let labels = match (c.raw("source_tags"), c.raw("source_model")) {
            (Some(_), Some(_)) => {
                c.error("give either source_tags or source_model, not both");
                None
            }
            (Some(_), None) => c.input("source_tags").map(SourceLabels::Tagged),
            (None, Some(_)) => {
                let text = c.input("source");
                let model = c.input("source_model");
                let embeddings = c.opt_input("source_embeddings");
                if let Some(m) = &model {
                    match model_kind(m) {
                        Ok(k) if k == "nn" && c.raw("source_embeddings").is_none() => {
                            c.error("source_embeddings: required for a neural source model")
                        }
                        Ok(_) => {}
                        Err(e) => c.error(format!("source_model: {e}")),
                    }
                }
                match (text, model) {
                    (Some(text), Some(model)) => Some(SourceLabels::Model { text, model, embeddings }),
                    _ => None,
                }
            }
            (None, None) => {
                c.error("source labels are missing: give source_tags, or source with source_model");
                None
            }
        };
        let target = c.input("target");
        let alignments = c.input("alignments");
        let mode = if command == Command::CoordinateSearch {
            SelectionMode::Auto
        } else {
            match c.raw("q") {
                Some(q) if q.eq_ignore_ascii_case("auto") => SelectionMode::Auto,
                _ => {
                    let q = c.value("q", 0.0);
                    let n = c.value("n", 0);
                    match SelectionThresholds::new(q, n) {
                        Ok(t) => SelectionMode::Fixed(t),
                        Err(e) => {
                            c.error(format!("q: {e}"));
                            SelectionMode::Fixed(SelectionThresholds { q: 0.0, n })
                        }
                    }
                }
            }
        };
        let dev = if mode == SelectionMode::Auto {
            if c.raw("dev").is_none() {
                c.error("dev: automatic threshold search needs a development set");
            }
            c.opt_input("dev")
        } else {
            c.opt_input("dev")
        };
        let model = if command == Command::ProjectSelectTrain {
            c.output("model")
        } else {
            c.opt_output("model")
        };
        let order = c.value("order", 2);
        let template = template_config(&mut c, order);
        let train = train_config(&mut c, TrainConfig::default());
        let beam = c.value("beam", DEFAULT_BEAM);
        if beam == 0 {
            c.error("beam must be at least 1");
        }
        let projected = c.opt_output("projected");
        let selected = c.opt_output("selected");
        let table = c.opt_output("table");
        let scores = c.opt_output("scores");
        let report = c.opt_output("report");
        let grid = c.opt_output("grid");
        c.finish()?;
        Ok(ProjectSelectConfig {
            labels: labels.expect("validated"),
            target: target.expect("validated"),
            alignments: alignments.expect("validated"),
            dev,
            mode,
            model,
            template,
            train,
            beam,
            projected,
            selected,
            table,
            scores,
            report,
            grid,
        })
    }

    fn load_bitext(&self) -> Result<(Vec<AlignedSentencePair>, Vec<Vec<Tag>>)> {
        let (source, tags): (Vec<Vec<String>>, Vec<Vec<Tag>>) = match &self.labels {
            SourceLabels::Tagged(p) => read_conll_file(p)?.into_iter().map(LabeledSentence::into_parts).unzip(),
            SourceLabels::Model { text, model, embeddings } => {
                let text = with_file(text, read_tokenized)?;
                let tagger = Tagger::load(model)?;
                let emb = embeddings.as_deref().map(read_embeddings).transpose()?;
                let tags = text
                    .par_iter()
                    .map(|t| tagger.tag(t, emb.as_ref(), DecodeOptions::default()).map(|s| s.tags().to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                (text, tags)
            }
        };
        let target = with_file(&self.target, read_tokenized)?;
        let links = with_file(&self.alignments, read_alignments)?;
        if source.len() != target.len() || source.len() != links.len() {
            return Err(Error::Misaligned {
                sentence: source.len().min(target.len()).min(links.len()),
                message: format!(
                    "{} source sentences, {} target sentences, {} alignment lines",
                    source.len(),
                    target.len(),
                    links.len()
                ),
            });
        }
        let pairs = source
            .into_iter()
            .zip(target)
            .zip(links)
            .enumerate()
            .map(|(k, ((s, t), l))| {
                AlignedSentencePair::new(s, t, l).map_err(|e| Error::Misaligned {
                    sentence: k,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((pairs, tags))
    }

    fn train_memm(&self, data: &[LabeledSentence]) -> Result<Memm> {
        let mut m = memm_train(data, &self.template, &self.train)?;
        m.set_beam_width(self.beam);
        Ok(m)
    }

    pub fn run(&self) -> Result<Report> {
        let (pairs, tags) = self.load_bitext()?;
        let projected = project_corpus(&pairs, &tags)?;
        let table = FrequencyTable::build(&projected);
        let scores = score_corpus(&projected, &table)?;
        let dev = self.dev.as_deref().map(read_conll_file).transpose()?;
        let mut report = Report::default();
        let tokens = |idx: &mut dyn Iterator<Item = usize>| idx.map(|k| projected[k].sentence.len()).sum::<usize>();
        report.push("bitext_sentences", projected.len());
        report.push("bitext_tokens", tokens(&mut (0..projected.len())));
        report.push("projected_entities", projected.iter().map(|p| p.entities.len()).sum::<usize>());
        report.push("unaligned_entities", projected.iter().map(|p| p.unaligned).sum::<usize>());
        report.push("overlap_dropped", projected.iter().map(|p| p.overlapping).sum::<usize>());
        let mut search: Option<SearchResult> = None;
        let thresholds = match self.mode {
            SelectionMode::Fixed(t) => t,
            SelectionMode::Auto => {
                let dev = dev.as_deref().expect("validated");
                let result = coordinate_search(
                    &projected,
                    &table,
                    |d| self.train_memm(d),
                    |m| {
                        let pred: Vec<LabeledSentence> = dev
                            .par_iter()
                            .map(|s| m.decode(s.tokens(), DecodeOptions::default()).to_labeled())
                            .collect();
                        Ok(phrasal_f1(dev, &pred)?.f1())
                    },
                )?;
                let best = result.best;
                search = Some(result);
                best
            }
        };
        let chosen = select_indices(&scores, thresholds);
        report.push("q", thresholds.q);
        report.push("n", thresholds.n);
        report.push("selected_sentences", chosen.len());
        report.push("selected_tokens", tokens(&mut chosen.iter().copied()));
        report.push("selected_entities", chosen.iter().map(|&k| projected[k].entities.len()).sum::<usize>());
        if let Some(s) = &search {
            report.push("search_best_f1", s.best_f1);
            for g in &s.grid {
                report.push(
                    "grid",
                    format!(
                        "{}\t{}\t{}\t{}{}",
                        g.thresholds.q,
                        g.thresholds.n,
                        g.selected,
                        g.f1,
                        g.failed.as_ref().map(|f| format!("\tfailed: {f}")).unwrap_or_default()
                    ),
                );
            }
        }
        if let Some(p) = &self.projected {
            write_file(p, |w| write_conll(w, projected.iter().map(|p| &p.sentence)))?;
        }
        if let Some(p) = &self.selected {
            write_file(p, |w| write_conll(w, chosen.iter().map(|&k| &projected[k].sentence)))?;
        }
        if let Some(p) = &self.table {
            write_file(p, |w| table.write(w))?;
        }
        if let Some(p) = &self.scores {
            let all: Vec<usize> = (0..scores.len()).collect();
            write_file(p, |w| write_scores(w, &scores, &all))?;
        }
        if let (Some(p), Some(s)) = (&self.grid, &search) {
            write_file(p, |w| {
                writeln!(w, "q\tn\tselected\tf1\tstatus")?;
                for g in &s.grid {
                    let status = g.failed.as_deref().unwrap_or("ok");
                    writeln!(w, "{}\t{}\t{}\t{}\t{status}", g.thresholds.q, g.thresholds.n, g.selected, g.f1)?;
                }
                Ok(())
            })?;
        }
        if let Some(path) = &self.model {
            if chosen.is_empty() {
                return Err(Error::Invalid(format!(
                    "no sentence passes q={} n={}; lower the thresholds",
                    thresholds.q, thresholds.n
                )));
            }
            let data: Vec<LabeledSentence> = chosen.iter().map(|&k| projected[k].sentence.clone()).collect();
            let m = self.train_memm(&data)?;
            if let Some(dev) = &dev {
                let f1 = dev_f1(&Tagger::Memm(m.clone()), dev, None)?;
                report.push("dev_f1", f1);
            }
            write_file(path, |w| m.save(w))?;
            report.push("model", path.display());
        }
        if let Some(p) = &self.report {
            write_file(p, |w| Ok(write!(w, "{report}")?))?;
        }
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct LearnMappingConfig {
    pub dictionary: PathBuf,
    pub source_embeddings: PathBuf,
    pub target_embeddings: PathBuf,
    pub mapping: PathBuf,
    pub min_freq: u64,
    pub mode: DictionaryMode,
    pub ridge: f64,
}

impl LearnMappingConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::LearnMapping, settings);
        c.workers();
        let dictionary = c.input("dictionary");
        let source_embeddings = c.input("source_embeddings");
        let target_embeddings = c.input("target_embeddings");
        let mapping = c.output("mapping");
        let min_freq = c.value("min_freq", 1);
        let mode = match c.raw("mode").map(str::to_ascii_lowercase).as_deref() {
            None | Some("weighted") => DictionaryMode::Weighted,
            Some("top1") => DictionaryMode::Top1,
            Some(other) => {
                c.error(format!("mode: expected weighted or top1, got {other:?}"));
                DictionaryMode::Weighted
            }
        };
        let ridge = c.value("ridge", DEFAULT_RIDGE);
        if !(ridge >= 0.0 && ridge.is_finite()) {
            c.error("ridge must be a non-negative number");
        }
        c.finish()?;
        Ok(LearnMappingConfig {
            dictionary: dictionary.expect("validated"),
            source_embeddings: source_embeddings.expect("validated"),
            target_embeddings: target_embeddings.expect("validated"),
            mapping: mapping.expect("validated"),
            min_freq,
            mode,
            ridge,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let dict = with_file(&self.dictionary, |r| extract_dictionary(r, self.min_freq, self.mode))?;
        let source = read_embeddings(&self.source_embeddings)?;
        let target = read_embeddings(&self.target_embeddings)?;
        let fit = learn_mapping(&dict, &source, &target, self.ridge)?;
        write_file(&self.mapping, |w| fit.matrix.write(w))?;
        let mut report = Report::default();
        report.push("dictionary_pairs", dict.len());
        report.push("pairs_used", fit.pairs_used);
        report.push("pairs_dropped", fit.pairs_dropped);
        report.push("source_dim", fit.matrix.rows());
        report.push("target_dim", fit.matrix.cols());
        report.push("residual", fit.residual);
        report.push("ridge", fit.ridge);
        report.push("mapping", self.mapping.display());
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Tokens,
    Conll,
}

fn read_input(path: &Path, format: InputFormat) -> Result<Vec<Vec<String>>> {
    match format {
        InputFormat::Tokens => with_file(path, read_tokenized),
        InputFormat::Conll => Ok(read_conll_file(path)?.into_iter().map(|s| s.into_parts().0).collect()),
    }
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".conf");
    PathBuf::from(s)
}

#[derive(Debug, Clone)]
pub struct TransferConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub model: PathBuf,
    pub mapping: PathBuf,
    pub source_embeddings: PathBuf,
    pub target_embeddings: PathBuf,
    pub output: PathBuf,
    pub confidences: PathBuf,
    pub beam: Option<usize>,
    pub options: DecodeOptions,
}

fn input_format(c: &mut Checker) -> InputFormat {
    match c.raw("format").map(str::to_ascii_lowercase).as_deref() {
        None | Some("tokens") => InputFormat::Tokens,
        Some("conll") => InputFormat::Conll,
        Some(other) => {
            c.error(format!("format: expected tokens or conll, got {other:?}"));
            InputFormat::Tokens
        }
    }
}

impl TransferConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::Transfer, settings);
        c.workers();
        let input = c.input("input");
        let format = input_format(&mut c);
        let model = c.input("model");
        if let Some(m) = &model {
            match model_kind(m) {
                Ok(k) if k == "nn" => {}
                Ok(k) => c.error(format!("model: transfer needs a neural model, found {k}")),
                Err(e) => c.error(format!("model: {e}")),
            }
        }
        let mapping = c.input("mapping");
        let source_embeddings = c.input("source_embeddings");
        let target_embeddings = c.input("target_embeddings");
        let output = c.output("output");
        let confidences = match c.opt_output("confidences") {
            Some(p) => Some(p),
            None => output.as_deref().map(sidecar_path),
        };
        let beam = c.opt::<usize>("beam");
        if beam == Some(0) {
            c.error("beam must be at least 1");
        }
        let options = DecodeOptions {
            constrain_iob: c.flag("constrain", DecodeOptions::default().constrain_iob),
        };
        c.finish()?;
        Ok(TransferConfig {
            input: input.expect("validated"),
            format,
            model: model.expect("validated"),
            mapping: mapping.expect("validated"),
            source_embeddings: source_embeddings.expect("validated"),
            target_embeddings: target_embeddings.expect("validated"),
            output: output.expect("validated"),
            confidences: confidences.expect("validated"),
            beam,
            options,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let sentences = read_input(&self.input, self.format)?;
        let mut model = with_file(&self.model, NnModel::load)?;
        if let Some(b) = self.beam {
            model.set_beam_width(b);
        }
        let m = with_file(&self.mapping, MappingMatrix::read)?;
        let source = read_embeddings(&self.source_embeddings)?;
        let target = read_embeddings(&self.target_embeddings)?;
        if model.dim() != source.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: source.dim(),
            });
        }
        let decoded = sentences
            .par_iter()
            .map(|tokens| {
                let inputs = transfer_inputs(tokens, &m, &target, &source)?;
                let counts = inputs.iter().fold([0usize; 3], |mut acc, (_, s)| {
                    acc[match s {
                        TransferSource::Projected => 0,
                        TransferSource::SourceVocabulary => 1,
                        TransferSource::Unk => 2,
                    }] += 1;
                    acc
                });
                let vectors: Vec<Option<Vec<f64>>> = inputs.into_iter().map(|(v, _)| v).collect();
                Ok((model.decode_vectors(tokens, &vectors, self.options), counts))
            })
            .collect::<Result<Vec<_>>>()?;
        let tagged: Vec<&ConfidenceTaggedSentence> = decoded.iter().map(|(t, _)| t).collect();
        let labeled: Vec<LabeledSentence> = tagged.iter().map(|t| t.to_labeled()).collect();
        write_file(&self.output, |w| write_conll(w, &labeled))?;
        write_file(&self.confidences, |w| write_confidences(w, tagged.iter().copied()))?;
        let totals = decoded.iter().fold([0usize; 3], |mut acc, (_, c)| {
            for k in 0..3 {
                acc[k] += c[k];
            }
            acc
        });
        let mut report = Report::default();
        report.push("sentences", sentences.len());
        report.push("tokens", totals.iter().sum::<usize>());
        report.push("tokens_projected", totals[0]);
        report.push("tokens_source_vocabulary", totals[1]);
        report.push("tokens_unk", totals[2]);
        report.push("entities", labeled.iter().map(|s| s.entities().len()).sum::<usize>());
        report.push("output", self.output.display());
        report.push("confidences", self.confidences.display());
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct TagConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub model: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub output: PathBuf,
    pub confidences: PathBuf,
    pub beam: Option<usize>,
    pub options: DecodeOptions,
}

impl TagConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::Tag, settings);
        c.workers();
        let input = c.input("input");
        let format = input_format(&mut c);
        let model = c.input("model");
        let embeddings = c.opt_input("embeddings");
        if let Some(m) = &model {
            match model_kind(m) {
                Ok(k) if k == "nn" && c.raw("embeddings").is_none() => {
                    c.error("embeddings: required for a neural model")
                }
                Ok(_) => {}
                Err(e) => c.error(format!("model: {e}")),
            }
        }
        let output = c.output("output");
        let confidences = match c.opt_output("confidences") {
            Some(p) => Some(p),
            None => output.as_deref().map(sidecar_path),
        };
        let beam = c.opt::<usize>("beam");
        if beam == Some(0) {
            c.error("beam must be at least 1");
        }
        let options = DecodeOptions {
            constrain_iob: c.flag("constrain", DecodeOptions::default().constrain_iob),
        };
        c.finish()?;
        Ok(TagConfig {
            input: input.expect("validated"),
            format,
            model: model.expect("validated"),
            embeddings,
            output: output.expect("validated"),
            confidences: confidences.expect("validated"),
            beam,
            options,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let sentences = read_input(&self.input, self.format)?;
        let mut tagger = Tagger::load(&self.model)?;
        if let Some(b) = self.beam {
            match &mut tagger {
                Tagger::Memm(m) => m.set_beam_width(b),
                Tagger::Nn(m) => m.set_beam_width(b),
                Tagger::Crf(_) => log::warn!("beam ignored: CRF decoding is exact"),
            }
        }
        let emb = self.embeddings.as_deref().map(read_embeddings).transpose()?;
        let tagged = sentences
            .par_iter()
            .map(|t| tagger.tag(t, emb.as_ref(), self.options))
            .collect::<Result<Vec<_>>>()?;
        let labeled: Vec<LabeledSentence> = tagged.iter().map(ConfidenceTaggedSentence::to_labeled).collect();
        write_file(&self.output, |w| write_conll(w, &labeled))?;
        write_file(&self.confidences, |w| write_confidences(w, &tagged))?;
        let mut report = Report::default();
        report.push("sentences", sentences.len());
        report.push("tokens", sentences.iter().map(Vec::len).sum::<usize>());
        report.push("entities", labeled.iter().map(|s| s.entities().len()).sum::<usize>());
        report.push("output", self.output.display());
        report.push("confidences", self.confidences.display());
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct CodecodeConfig {
    pub ap: PathBuf,
    pub ap_confidences: Option<PathBuf>,
    pub rp: PathBuf,
    pub rp_confidences: Option<PathBuf>,
    pub scheme: Scheme,
    pub output: PathBuf,
    pub confidences: Option<PathBuf>,
}

impl CodecodeConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::Codecode, settings);
        c.workers();
        let ap = c.input("ap");
        let ap_confidences = c.opt_input("ap_confidences");
        let rp = c.input("rp");
        let rp_confidences = c.opt_input("rp_confidences");
        let scheme = c.value("scheme", Scheme::Rank);
        if scheme == Scheme::ExcludeO {
            for key in ["ap_confidences", "rp_confidences"] {
                if c.raw(key).is_none() {
                    c.error(format!("{key}: the exclude-o scheme needs confidences from both systems"));
                }
            }
        }
        let output = c.output("output");
        let confidences = c.opt_output("confidences");
        c.finish()?;
        Ok(CodecodeConfig {
            ap: ap.expect("validated"),
            ap_confidences,
            rp: rp.expect("validated"),
            rp_confidences,
            scheme,
            output: output.expect("validated"),
            confidences,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let ap = read_tagged(&self.ap, self.ap_confidences.as_deref())?;
        let rp = read_tagged(&self.rp, self.rp_confidences.as_deref())?;
        let out = codecode_corpus(self.scheme, &ap, &rp)?;
        let labeled: Vec<LabeledSentence> = out.iter().map(ConfidenceTaggedSentence::to_labeled).collect();
        write_file(&self.output, |w| write_conll(w, &labeled))?;
        if let Some(p) = &self.confidences {
            write_file(p, |w| write_confidences(w, &out))?;
        }
        let count = |v: &[ConfidenceTaggedSentence]| v.iter().map(|s| s.entities().len()).sum::<usize>();
        let mut report = Report::default();
        report.push("scheme", self.scheme);
        report.push("sentences", out.len());
        report.push("ap_entities", count(&ap));
        report.push("rp_entities", count(&rp));
        report.push("output_entities", count(&out));
        report.push("output", self.output.display());
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    KeyValue,
    Table,
}

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub gold: PathBuf,
    pub predicted: PathBuf,
    pub format: ReportFormat,
}

impl EvaluateConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::Evaluate, settings);
        c.workers();
        let gold = c.input("gold");
        let predicted = c.input("predicted");
        let format = match c.raw("format").map(str::to_ascii_lowercase).as_deref() {
            None | Some("kv") => ReportFormat::KeyValue,
            Some("table") => ReportFormat::Table,
            Some(other) => {
                c.error(format!("format: expected kv or table, got {other:?}"));
                ReportFormat::KeyValue
            }
        };
        c.finish()?;
        Ok(EvaluateConfig {
            gold: gold.expect("validated"),
            predicted: predicted.expect("validated"),
            format,
        })
    }

    /// The report rendered in the configured format.
    pub fn run(&self) -> Result<String> {
        let gold = read_conll_file(&self.gold)?;
        let pred = read_conll_file(&self.predicted)?;
        let r = phrasal_f1(&gold, &pred)?;
        Ok(match self.format {
            ReportFormat::KeyValue => r.to_key_values(),
            ReportFormat::Table => r.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SignificanceConfig {
    pub gold: PathBuf,
    pub a: PathBuf,
    pub b: PathBuf,
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl SignificanceConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::Significance, settings);
        c.workers();
        let gold = c.input("gold");
        let a = c.input("a");
        let b = c.input("b");
        let iterations = c.value("iterations", 10_000);
        if iterations < MIN_SHUFFLES {
            c.error(format!("iterations: at least {MIN_SHUFFLES} shuffles are required"));
        }
        let alpha = c.value("alpha", 0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            c.error("alpha must lie strictly between 0 and 1");
        }
        let seed = c.value("seed", 1);
        c.finish()?;
        Ok(SignificanceConfig {
            gold: gold.expect("validated"),
            a: a.expect("validated"),
            b: b.expect("validated"),
            iterations,
            alpha,
            seed,
        })
    }

    pub fn run(&self) -> Result<Report> {
        let gold = read_conll_file(&self.gold)?;
        let a = read_conll_file(&self.a)?;
        let b = read_conll_file(&self.b)?;
        let result = stratified_shuffling_test(&a, &b, &gold, self.iterations, self.seed)?;
        let mut report = Report::default();
        report.push("f1_a", phrasal_f1(&gold, &a)?.f1());
        report.push("f1_b", phrasal_f1(&gold, &b)?.f1());
        report.push("observed_difference", result.observed);
        report.push("iterations", result.iterations);
        report.push("at_least_as_extreme", result.at_least_as_extreme);
        report.push("p_value", result.p_value);
        report.push("alpha", self.alpha);
        report.push(
            "verdict",
            if result.p_value < self.alpha { "significant" } else { "not_significant" },
        );
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub source: Option<PathBuf>,
    pub generate: usize,
    pub lexicon_size: usize,
    pub lexicon_seed: u64,
    pub language: SyntheticLanguageSpec,
    pub out_dir: PathBuf,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub target_noise: f64,
    pub dictionary_pairs: usize,
}

/// Files written by `synth-bitext`, relative to the output directory.
pub const SYNTH_FILES: [&str; 6] = [
    "source.txt",
    "target.txt",
    "alignments.txt",
    "source.conll",
    "source.gold.conll",
    "target.gold.conll",
];

/// Extra files written when embeddings are requested.
pub const SYNTH_EMBEDDING_FILES: [&str; 3] = ["source.vec", "target.vec", "dictionary.tsv"];

impl SynthConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Checker::new(Command::SynthBitext, settings);
        c.workers();
        let source = c.opt_input("source");
        let generate = c.value("generate", 0);
        match (c.raw("source").is_some(), generate > 0) {
            (true, true) => c.error("give either source or generate, not both"),
            (false, false) => c.error("source: give a labeled corpus, or generate > 0"),
            _ => {}
        }
        let d = SyntheticLanguageSpec::default();
        let language = SyntheticLanguageSpec {
            suffix: c.raw("suffix").map_or(d.suffix, str::to_string),
            lowercase: c.flag("lowercase", d.lowercase),
            alignment_noise: c.value("alignment_noise", d.alignment_noise),
            noisy_sentence_fraction: c.value("noisy_fraction", d.noisy_sentence_fraction),
            label_noise: c.value("label_noise", d.label_noise),
            seed: c.value("seed", d.seed),
        };
        c.check(language.validate());
        let out_dir = c.raw("out_dir").map(PathBuf::from);
        match &out_dir {
            None => c.error("out_dir: required output directory is missing"),
            Some(d) if d.exists() && !d.is_dir() => c.error(format!("out_dir: {} is not a directory", d.display())),
            Some(d) if !d.exists() => {
                if let Some(parent) = d.parent().filter(|p| !p.as_os_str().is_empty() && !p.is_dir()) {
                    c.error(format!("out_dir: directory {} does not exist", parent.display()));
                }
            }
            Some(_) => {}
        }
        let lexicon_size = c.value("lexicon_size", 100);
        if generate > 0 && lexicon_size == 0 {
            c.error("lexicon_size must be at least 1");
        }
        let embedding_noise = c.value("embedding_noise", 1.0);
        let target_noise = c.value("target_noise", 0.05);
        if !(embedding_noise >= 0.0 && target_noise >= 0.0) {
            c.error("embedding noise levels must be non-negative");
        }
        let cfg = SynthConfig {
            source,
            generate,
            lexicon_size,
            lexicon_seed: c.value("lexicon_seed", 7),
            language,
            out_dir: out_dir.unwrap_or_default(),
            embedding_dim: c.value("embedding_dim", 0),
            embedding_noise,
            target_noise,
            dictionary_pairs: c.value("dictionary_pairs", 1000),
        };
        c.finish()?;
        Ok(cfg)
    }

    pub fn run(&self) -> Result<Report> {
        let (source, lexicon) = match &self.source {
            Some(p) => {
                let s = read_conll_file(p)?;
                let lex = Lexicon::from_corpus(&s);
                (s, lex)
            }
            None => {
                let lex = Lexicon::generate(self.lexicon_size, self.lexicon_seed);
                let s = generate_source_corpus(
                    &lex,
                    &CorpusSpec {
                        sentences: self.generate,
                        seed: self.language.seed,
                    },
                )?;
                (s, lex)
            }
        };
        let bitext = synth_bitext(&source, &self.language)?;
        let mut emb = None;
        if self.embedding_dim > 0 {
            let seed = self.language.seed;
            let src = synthetic_embeddings(
                &lexicon,
                &vocabulary(&source),
                &EmbeddingSpec {
                    dim: self.embedding_dim,
                    noise: self.embedding_noise,
                    seed,
                },
            )?;
            let rotation = random_rotation(self.embedding_dim, seed.wrapping_add(1));
            let tgt = target_embeddings(&src, &self.language, &rotation, self.target_noise, seed.wrapping_add(2))?;
            let dict = synthetic_dictionary(src.words(), &self.language, self.dictionary_pairs, seed.wrapping_add(3))?;
            emb = Some((src, tgt, dict));
        }
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::from(e).in_file(&self.out_dir))?;
        let path = |name: &str| self.out_dir.join(name);
        let source_tokens: Vec<&[String]> = bitext.pairs.iter().map(|p| p.source.as_slice()).collect();
        let target_tokens: Vec<&[String]> = bitext.pairs.iter().map(|p| p.target.as_slice()).collect();
        write_file(&path("source.txt"), |w| write_tokenized(w, &source_tokens))?;
        write_file(&path("target.txt"), |w| write_tokenized(w, &target_tokens))?;
        write_file(&path("alignments.txt"), |w| write_alignments(w, bitext.pairs.iter().map(|p| &p.links)))?;
        write_file(&path("source.conll"), |w| write_conll(w, &bitext.source_sentences()?))?;
        write_file(&path("source.gold.conll"), |w| write_conll(w, &source))?;
        write_file(&path("target.gold.conll"), |w| write_conll(w, &bitext.gold_target))?;
        let mut report = Report::default();
        report.push("sentences", bitext.pairs.len());
        report.push("tokens", bitext.pairs.iter().map(|p| p.source.len()).sum::<usize>());
        report.push("entities", source.iter().map(|s| s.entities().len()).sum::<usize>());
        report.push("noisy_sentences", bitext.noisy.iter().filter(|&&b| b).count());
        if let Some((src, tgt, dict)) = emb {
            write_file(&path("source.vec"), |w| src.write_word2vec(w))?;
            write_file(&path("target.vec"), |w| tgt.write_word2vec(w))?;
            write_file(&path("dictionary.tsv"), |w| {
                for (x, y, n) in &dict {
                    writeln!(w, "{x}\t{y}\t{n}")?;
                }
                Ok(())
            })?;
            report.push("embedding_words", src.len());
            report.push("dictionary_pairs", dict.len());
        }
        report.push("out_dir", self.out_dir.display());
        Ok(report)
    }
}

/// Validates the whole configuration for `command` without running it.
pub fn validate(command: Command, settings: &Settings) -> Result<()> {
    match command {
        Command::TrainSource => TrainSourceConfig::from_settings(settings).map(drop),
        Command::ProjectSelectTrain | Command::CoordinateSearch => {
            ProjectSelectConfig::from_settings(command, settings).map(drop)
        }
        Command::LearnMapping => LearnMappingConfig::from_settings(settings).map(drop),
        Command::Transfer => TransferConfig::from_settings(settings).map(drop),
        Command::Codecode => CodecodeConfig::from_settings(settings).map(drop),
        Command::Evaluate => EvaluateConfig::from_settings(settings).map(drop),
        Command::Significance => SignificanceConfig::from_settings(settings).map(drop),
        Command::SynthBitext => SynthConfig::from_settings(settings).map(drop),
        Command::Tag => TagConfig::from_settings(settings).map(drop),
    }
}

/// Validates, then runs `command`; returns the text for standard output.
pub fn run(command: Command, settings: &Settings) -> Result<String> {
    Ok(match command {
        Command::TrainSource => TrainSourceConfig::from_settings(settings)?.run()?.to_string(),
        Command::ProjectSelectTrain | Command::CoordinateSearch => {
            ProjectSelectConfig::from_settings(command, settings)?.run()?.to_string()
        }
        Command::LearnMapping => LearnMappingConfig::from_settings(settings)?.run()?.to_string(),
        Command::Transfer => TransferConfig::from_settings(settings)?.run()?.to_string(),
        Command::Codecode => CodecodeConfig::from_settings(settings)?.run()?.to_string(),
        Command::Evaluate => EvaluateConfig::from_settings(settings)?.run()?,
        Command::Significance => SignificanceConfig::from_settings(settings)?.run()?.to_string(),
        Command::SynthBitext => SynthConfig::from_settings(settings)?.run()?.to_string(),
        Command::Tag => TagConfig::from_settings(settings)?.run()?.to_string(),
    })
}
