use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use crossner::corpus::LabeledSentence;
use crossner::pipeline::{self, read_conll_file, Command, Settings, Tagger};
use tempfile::TempDir;

fn settings(pairs: &[(&str, &str)]) -> Settings {
    let mut s = Settings::new();
    for (k, v) in pairs {
        s.set(k, v);
    }
    s
}

fn run(command: Command, pairs: &[(&str, &str)]) -> crossner::Result<String> {
    pipeline::run(command, &settings(pairs))
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

/// A synthetic bitext in `dir/name`; returns the directory path.
fn synth(dir: &TempDir, name: &str, extra: &[(&str, &str)]) -> PathBuf {
    let out = dir.path().join(name);
    let out_s = out.display().to_string();
    let mut pairs = vec![("generate", "60"), ("lexicon_size", "20"), ("out_dir", out_s.as_str())];
    pairs.extend_from_slice(extra);
    run(Command::SynthBitext, &pairs).unwrap();
    out
}

fn f(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn zero_noise_synthetic_projection_is_exact() {
    let tmp = TempDir::new().unwrap();
    let bt = synth(&tmp, "bt", &[]);
    let projected = p(&tmp, "projected.conll");
    let report = run(
        Command::ProjectSelectTrain,
        &[
            ("source_tags", &f(&bt, "source.conll")),
            ("target", &f(&bt, "target.txt")),
            ("alignments", &f(&bt, "alignments.txt")),
            ("q", "0"),
            ("n", "0"),
            ("projected", &projected),
            ("model", &p(&tmp, "t.memm")),
            ("epochs", "1"),
        ],
    )
    .unwrap();
    assert_eq!(value(&report, "selected_sentences"), "60");
    assert_eq!(value(&report, "unaligned_entities"), "0");
    let eval = run(
        Command::Evaluate,
        &[("gold", &f(&bt, "target.gold.conll")), ("predicted", &projected)],
    )
    .unwrap();
    assert_eq!(value(&eval, "f1"), "1");
}

#[test]
fn synthetic_bitext_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let noise = [("alignment_noise", "0.3"), ("label_noise", "0.1"), ("embedding_dim", "8"), ("seed", "5")];
    let a = synth(&tmp, "a", &noise);
    let b = synth(&tmp, "b", &noise);
    for name in pipeline::SYNTH_FILES.iter().chain(&pipeline::SYNTH_EMBEDDING_FILES) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = synth(&tmp, "c", &[("alignment_noise", "0.3"), ("seed", "6")]);
    assert_ne!(fs::read(a.join("alignments.txt")).unwrap(), fs::read(c.join("alignments.txt")).unwrap());
}

#[test]
fn crf_training_is_deterministic_and_loads() {
    let tmp = TempDir::new().unwrap();
    let bt = synth(&tmp, "bt", &[]);
    let train = f(&bt, "source.gold.conll");
    assert!(read_conll_file(Path::new(&train)).unwrap().len() >= 50);
    let (m1, m2) = (p(&tmp, "a.crf"), p(&tmp, "b.crf"));
    for m in [&m1, &m2] {
        let r = run(Command::TrainSource, &[("train", &train), ("model", m), ("epochs", "3"), ("seed", "4")]).unwrap();
        assert_eq!(value(&r, "architecture"), "crf");
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    assert_eq!(pipeline::model_kind(Path::new(&m1)).unwrap(), "crf");
    let tagger = Tagger::load(Path::new(&m1)).unwrap();
    let toks: Vec<String> = ["they", "met", "in", "the", "city"].iter().map(|s| s.to_string()).collect();
    assert_eq!(tagger.tag(&toks, None, Default::default()).unwrap().tags().len(), 5);

    let out = p(&tmp, "tagged.conll");
    run(Command::Tag, &[("input", &f(&bt, "source.txt")), ("model", &m1), ("output", &out)]).unwrap();
    let tagged = read_conll_file(Path::new(&out)).unwrap();
    let eval = run(Command::Evaluate, &[("gold", &train), ("predicted", &out)]).unwrap();
    assert_eq!(tagged.len(), 60);
    assert!(value(&eval, "f1").parse::<f64>().unwrap() > 0.8, "{eval}");
}

#[test]
fn validation_errors_come_before_side_effects() {
    let tmp = TempDir::new().unwrap();
    let model = p(&tmp, "m.crf");
    let err = run(
        Command::TrainSource,
        &[("train", "/no/such/file.conll"), ("model", &model), ("epochs", "zero"), ("colour", "red")],
    )
    .unwrap_err();
    assert!(err.is_validation());
    let msg = err.to_string();
    assert!(msg.contains("/no/such/file.conll") && msg.contains("epochs") && msg.contains("colour"), "{msg}");
    assert!(!Path::new(&model).exists());
    assert!(pipeline::validate(Command::Codecode, &Settings::new()).unwrap_err().is_validation());
}

#[test]
fn coordinate_search_walks_fifteen_points_and_selection_shrinks() {
    let tmp = TempDir::new().unwrap();
    let bt = synth(&tmp, "bt", &[("alignment_noise", "0.5"), ("noisy_fraction", "0.5"), ("seed", "3")]);
    let dev = synth(&tmp, "dev", &[("seed", "9")]);
    let grid = p(&tmp, "grid.tsv");
    let model = p(&tmp, "t.memm");
    let report = run(
        Command::CoordinateSearch,
        &[
            ("source_tags", &f(&bt, "source.conll")),
            ("target", &f(&bt, "target.txt")),
            ("alignments", &f(&bt, "alignments.txt")),
            ("dev", &f(&dev, "target.gold.conll")),
            ("grid", &grid),
            ("model", &model),
            ("epochs", "2"),
        ],
    )
    .unwrap();
    let rows = fs::read_to_string(&grid).unwrap();
    assert_eq!(rows.lines().count(), 16);
    assert_eq!(rows.lines().next().unwrap(), "q\tn\tselected\tf1\tstatus");
    assert_eq!(report.lines().filter(|l| l.starts_with("grid\t")).count(), 15);
    assert!(Path::new(&model).exists());
    let selected: usize = value(&report, "selected_sentences").parse().unwrap();
    assert!(selected < 60, "{report}");
    let best: f64 = value(&report, "search_best_f1").parse().unwrap();
    assert_eq!(value(&report, "dev_f1").parse::<f64>().unwrap(), best);

    let err = run(
        Command::ProjectSelectTrain,
        &[
            ("source_tags", &f(&bt, "source.conll")),
            ("target", &f(&bt, "target.txt")),
            ("alignments", &f(&bt, "alignments.txt")),
            ("q", "auto"),
        ],
    )
    .unwrap_err();
    assert!(err.is_validation() && err.to_string().contains("dev"));
}

#[test]
fn transfer_through_an_identity_map_matches_source_tagging() {
    let tmp = TempDir::new().unwrap();
    let bt = synth(&tmp, "bt", &[("embedding_dim", "10")]);
    let vec = f(&bt, "source.vec");
    let model = p(&tmp, "src.nn");
    let r = run(
        Command::TrainSource,
        &[
            ("train", &f(&bt, "source.gold.conll")),
            ("architecture", "nn1"),
            ("embeddings", &vec),
            ("model", &model),
            ("hidden", "8"),
            ("epochs", "2"),
        ],
    )
    .unwrap();
    assert_eq!(value(&r, "architecture"), "nn1");

    // every word paired with itself and the source vectors on both sides
    let words: Vec<String> = fs::read_to_string(&vec)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(' ').next().unwrap().to_string())
        .collect();
    let dict = p(&tmp, "self.tsv");
    fs::write(&dict, words.iter().map(|w| format!("{w}\t{w}\t1\n")).collect::<String>()).unwrap();
    let mapping = p(&tmp, "map.txt");
    run(
        Command::LearnMapping,
        &[
            ("dictionary", &dict),
            ("source_embeddings", &vec),
            ("target_embeddings", &vec),
            ("mapping", &mapping),
        ],
    )
    .unwrap();

    let (via_map, direct) = (p(&tmp, "transfer.conll"), p(&tmp, "direct.conll"));
    let input = f(&bt, "source.txt");
    let r = run(
        Command::Transfer,
        &[
            ("input", &input),
            ("model", &model),
            ("mapping", &mapping),
            ("source_embeddings", &vec),
            ("target_embeddings", &vec),
            ("output", &via_map),
        ],
    )
    .unwrap();
    assert!(Path::new(&format!("{via_map}.conf")).exists(), "{r}");
    run(Command::Tag, &[("input", &input), ("model", &model), ("embeddings", &vec), ("output", &direct)]).unwrap();
    let a = read_conll_file(Path::new(&via_map)).unwrap();
    let b = read_conll_file(Path::new(&direct)).unwrap();
    assert_eq!(a.len(), 60);
    assert_eq!(a, b);

    let err = run(
        Command::Transfer,
        &[
            ("input", &input),
            ("model", &model),
            ("mapping", "/missing/map.txt"),
            ("source_embeddings", &vec),
            ("target_embeddings", &vec),
            ("output", &p(&tmp, "never.conll")),
        ],
    )
    .unwrap_err();
    assert!(err.is_validation());
    assert!(!tmp.path().join("never.conll").exists());
}

fn write_tagged(path: &str, rows: &[(&str, &str, f64)]) {
    let mut conll = String::new();
    let mut conf = String::new();
    for (k, (w, t, c)) in rows.iter().enumerate() {
        conll.push_str(&format!("{w} {t}\n"));
        conf.push_str(&format!("0\t{k}\t{c}\n"));
    }
    fs::write(path, conll + "\n").unwrap();
    fs::write(format!("{path}.conf"), conf).unwrap();
}

#[test]
fn codecode_worked_example_and_bad_scheme() {
    let tmp = TempDir::new().unwrap();
    let (ap, rp, out) = (p(&tmp, "ap.conll"), p(&tmp, "rp.conll"), p(&tmp, "out.conll"));
    let words = ["Mia", "works", "at", "Paris", "Ville"];
    let ap_tags = ["B-PER", "O", "O", "O", "O"];
    let rp_tags = ["B-ORG", "I-ORG", "O", "B-LOC", "I-LOC"];
    let rows = |tags: &[&'static str; 5], c: f64| -> Vec<(&'static str, &'static str, f64)> {
        words.iter().zip(tags).map(|(w, t)| (*w, *t, c)).collect()
    };
    write_tagged(&ap, &rows(&ap_tags, 0.9));
    write_tagged(&rp, &rows(&rp_tags, 0.6));
    for scheme in ["rank", "exclude-o"] {
        let (apc, rpc) = (format!("{ap}.conf"), format!("{rp}.conf"));
        let args = [("ap", ap.as_str()), ("ap_confidences", &apc), ("rp", &rp), ("rp_confidences", &rpc)];
        let mut args = args.to_vec();
        args.extend([("scheme", scheme), ("output", out.as_str())]);
        run(Command::Codecode, &args).unwrap();
        let got = read_conll_file(Path::new(&out)).unwrap();
        let want = LabeledSentence::from_strs(&words, &["B-PER", "O", "O", "B-LOC", "I-LOC"]).unwrap();
        assert_eq!(got, vec![want], "{scheme}");
    }
    let err = run(Command::Codecode, &[("ap", &ap), ("rp", &rp), ("scheme", "vote"), ("output", &out)]).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn evaluate_and_significance_reports() {
    let tmp = TempDir::new().unwrap();
    let bt = synth(&tmp, "bt", &[]);
    let gold = f(&bt, "target.gold.conll");
    let eval = run(Command::Evaluate, &[("gold", &gold), ("predicted", &gold)]).unwrap();
    let keys: Vec<&str> = eval.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(&keys[..6], &["precision", "recall", "f1", "gold", "predicted", "correct"]);
    assert_eq!(value(&eval, "f1"), "1");
    assert_eq!(eval, run(Command::Evaluate, &[("gold", &gold), ("predicted", &gold)]).unwrap());
    let table = run(Command::Evaluate, &[("gold", &gold), ("predicted", &gold), ("format", "table")]).unwrap();
    assert!(table.contains("PER"));

    let sig = run(Command::Significance, &[("gold", &gold), ("a", &gold), ("b", &gold), ("iterations", "1000")]).unwrap();
    assert_eq!(value(&sig, "p_value"), "1");
    assert_eq!(value(&sig, "verdict"), "not_significant");
    let err = run(Command::Significance, &[("gold", &gold), ("a", &gold), ("b", &gold), ("iterations", "10")]).unwrap_err();
    assert!(err.is_validation());
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_crossner")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let bt = p(&tmp, "bt");
    let (code, out, _) = binary(&["synth-bitext", "--generate", "20", "--lexicon-size", "10", "--out-dir", &bt]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "sentences"), "20");

    let gold = format!("{bt}/target.gold.conll");
    let cfg = p(&tmp, "eval.cfg");
    fs::write(&cfg, format!("gold = {gold}\npredicted = {gold}\n")).unwrap();
    let (code, out, _) = binary(&["evaluate", "-c", &cfg, "--format", "kv"]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "f1"), "1");

    let (code, _, err) = binary(&["evaluate", "--gold", "/no/such.conll", "--predicted", &gold]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(binary(&["evaluate", "--bogus", "1"]).0, 1);
    assert_eq!(binary(&["evaluate", "-c", &cfg, "-s", "colour=red"]).0, 1);
    assert_eq!(binary(&["frobnicate"]).0, 1);
    assert_eq!(binary(&["--help"]).0, 0);

    // exists, but is not CoNLL: fails at run time
    let broken = p(&tmp, "broken.conll");
    fs::write(&broken, "a B-PER extra\n").unwrap();
    let (code, _, err) = binary(&["evaluate", "--gold", &gold, "--predicted", &broken]);
    assert_eq!(code, 2, "{err}");
}
