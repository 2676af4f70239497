use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use webzsl::analysis::{
    attribute_ablation, class_difficulty, corpus_ablation, distance_histogram, pearson, per_class_accuracy, topk_accuracy,
    write_attribute_ablation_csv, write_corpus_ablation_csv, write_csv, AttributeAblationConfig, Manifest, PerClassAccuracy,
    Taxonomy,
};
use webzsl::corpus::{build_vocabulary, load_metadata, MetadataLoad, StopWords, Vocabulary};
use webzsl::matrix_io::{load_lines, load_matrix, save_lines};
use webzsl::pairs::{extract_pairs, load_pairs, write_pairs_binary, write_pairs_text, DedupConfig};
use webzsl::pipeline::{run_pipeline, PipelineConfig, PipelineInputs};
use webzsl::prototypes::{build_prototypes, load_class_names, normalize, PrototypeSet};
use webzsl::sgns::{train_with_report, CooccurrenceMatrix, EmbeddingMatrix, SubwordConfig, TrainerConfig};
use webzsl::synth::{synth_corpus, SynthConfig};
use webzsl::zsl::{cross_validate, default_grid, load_dataset, DatasetPaths, Grid, ValidationClasses, ZslModel};

use crate::*;

type CmdResult = Result<(), CliError>;

pub fn run(cli: &Cli) -> CmdResult {
    if cli.threads > 0 {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match &cli.command {
        Cmd::Ingest(a) => ingest(cli, a),
        Cmd::Pairs(a) => pairs(cli, a),
        Cmd::TrainEmbed(a) => train_embed(cli, a),
        Cmd::ExportCooc(a) => export_cooc(cli, a),
        Cmd::Prototypes(a) => prototypes(cli, a),
        Cmd::ZslFit(a) => zsl_fit(cli, a),
        Cmd::ZslEval(a) => zsl_eval(cli, a),
        Cmd::Analyze(a) => analyze(cli, a),
        Cmd::AblateCorpus(a) => ablate_corpus(cli, a),
        Cmd::AblateAttributes(a) => ablate_attributes(cli, a),
        Cmd::Synth(a) => synth(cli, a),
        Cmd::Run(a) => run_all(cli, a),
    }
}

fn require<'a, I>(paths: I) -> Result<Vec<String>, CliError>
where
    I: IntoIterator<Item = &'a Path>,
{
    let mut out = Vec::new();
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Usage(format!("input file not found: {}", p.display())));
        }
        out.push(p.display().to_string());
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| webzsl::Error::Io { path: dir.into(), source: e })?;
    }
    let f = File::create(path).map_err(|e| webzsl::Error::Io { path: path.into(), source: e })?;
    Ok(BufWriter::new(f))
}

fn make_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| webzsl::Error::Io { path: dir.into(), source: e })?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Report<'a> {
    cli: &'a Cli,
    command: &'static str,
    inputs: Vec<String>,
    outputs: Vec<PathBuf>,
    metrics: Value,
}

impl Report<'_> {
    /// Writes the manifest to `--manifest` or `default`.
    fn save<A: Serialize>(self, args: &A, default: PathBuf) -> CmdResult {
        let config = json!({
            "args": serde_json::to_value(args).map_err(|e| CliError::Usage(e.to_string()))?,
            "seed": self.cli.seed,
            "threads": self.cli.threads,
        });
        let mut m = Manifest::new(self.command, config);
        m.seeds.insert("global".into(), self.cli.seed);
        m.inputs = self.inputs;
        m.outputs = self.outputs.iter().map(|p| p.display().to_string()).collect();
        m.metrics = self.metrics;
        let path = self.cli.manifest.clone().unwrap_or(default);
        m.write(create(&path)?)?;
        Ok(())
    }
}

fn stopwords(a: &CorpusArgs) -> Result<StopWords, CliError> {
    Ok(match &a.stopwords {
        Some(p) => StopWords::load(p)?,
        None => StopWords::english(),
    })
}

fn corpus_inputs(a: &CorpusArgs) -> Vec<&Path> {
    std::iter::once(a.metadata.as_path()).chain(a.stopwords.as_deref()).collect()
}

fn load_corpus(a: &CorpusArgs) -> Result<MetadataLoad, CliError> {
    Ok(load_metadata(&a.metadata, a.cap, &stopwords(a)?)?)
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    let f = File::open(path).map_err(|e| webzsl::Error::Io { path: path.into(), source: e })?;
    Ok(Vocabulary::read_tsv(BufReader::new(f))?)
}

fn trainer_config(cli: &Cli, t: &TrainArgs, min_count: u64) -> TrainerConfig {
    let subword = (t.minn.is_some() || t.maxn.is_some()).then(|| {
        let d = SubwordConfig::default();
        SubwordConfig {
            minn: t.minn.unwrap_or(d.minn),
            maxn: t.maxn.unwrap_or(d.maxn),
            buckets: t.buckets,
        }
    });
    let threads = match cli.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    TrainerConfig {
        epochs: t.epochs,
        lr: t.lr as f32,
        negatives: t.negative,
        sample: t.sample,
        dim: t.dim,
        min_count,
        subword,
        seed: cli.seed,
        deterministic: threads == 1,
        threads,
    }
}

fn parse_grid(text: &str) -> Result<Grid, CliError> {
    let bad = || CliError::Usage(format!("grid {text:?}: expected name=v1,v2;name=..."));
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (name, values) = part.split_once('=').ok_or_else(bad)?;
            let values = values
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((name.trim().to_owned(), values))
        })
        .collect()
}

fn grid_or_default(z: &ZslArgs) -> Result<Grid, CliError> {
    match &z.grid {
        Some(g) => parse_grid(g),
        None => Ok(default_grid(z.model)),
    }
}

fn topk_json(topk: &[(usize, f64)]) -> Value {
    topk.iter().map(|(k, a)| (format!("top{k}"), json!(a))).collect::<serde_json::Map<_, _>>().into()
}

fn per_class_csv(path: &Path, acc: &PerClassAccuracy, classes: &[String]) -> CmdResult {
    let rows: Vec<Vec<String>> = acc
        .per_class
        .iter()
        .map(|(c, a)| vec![classes[*c].clone(), a.to_string()])
        .collect();
    write_csv(create(path)?, &["class_id", "accuracy"], &rows)?;
    Ok(())
}

fn predictions_file(path: &Path, rankings: &[Vec<usize>], classes: &[String]) -> CmdResult {
    let lines: Vec<String> = rankings
        .iter()
        .map(|r| r.iter().map(|&c| classes[c].as_str()).collect::<Vec<_>>().join(" "))
        .collect();
    save_lines(&lines, path)?;
    Ok(())
}

fn ingest(cli: &Cli, a: &IngestArgs) -> CmdResult {
    let inputs = require(corpus_inputs(&a.corpus))?;
    let load = load_corpus(&a.corpus)?;
    let vocab = build_vocabulary(&load.collections, a.min_count)?;
    let mut w = create(&a.out)?;
    vocab.write_tsv(&mut w)?;
    w.flush().map_err(webzsl::Error::from)?;
    Report {
        cli,
        command: "ingest",
        inputs,
        outputs: vec![a.out.clone()],
        metrics: json!({
            "concepts": load.collections.len(),
            "pieces": load.piece_count(),
            "malformed_lines": load.malformed_lines,
            "empty_pieces": load.empty_pieces,
            "truncated_pieces": load.truncated_pieces,
            "vocabulary_size": vocab.len(),
            "token_count": vocab.total_count(),
        }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn pairs(cli: &Cli, a: &PairsArgs) -> CmdResult {
    let mut paths = corpus_inputs(&a.corpus);
    paths.push(&a.vocab);
    let inputs = require(paths)?;
    let load = load_corpus(&a.corpus)?;
    let vocab = load_vocab(&a.vocab)?;
    let dedup = DedupConfig {
        memory_records: a.memory_records,
        ..DedupConfig::default()
    };
    let pairs = extract_pairs(&load.collections, &vocab, a.mode, &dedup)?;
    let w = create(&a.out)?;
    if a.out.extension().is_some_and(|e| e == "bin") {
        write_pairs_binary(&pairs, w)?;
    } else {
        write_pairs_text(&pairs, &vocab, w)?;
    }
    Report {
        cli,
        command: "pairs",
        inputs,
        outputs: vec![a.out.clone()],
        metrics: json!({ "mode": a.mode.to_string(), "pair_count": pairs.len(), "pieces": load.piece_count() }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn train_embed(cli: &Cli, a: &TrainEmbedArgs) -> CmdResult {
    let inputs = require([a.pairs.as_path(), a.vocab.as_path()])?;
    let vocab = load_vocab(&a.vocab)?;
    let pairs = load_pairs(&a.pairs, &vocab)?;
    let config = trainer_config(cli, &a.train, 1);
    let (emb, report) = train_with_report(&pairs, &vocab, &config)?;
    emb.write_text(create(&a.out)?)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(m) = &a.model_out {
        emb.write_model(create(m)?)?;
        outputs.push(m.clone());
    }
    Report {
        cli,
        command: "train-embed",
        inputs,
        outputs,
        metrics: json!({
            "vocabulary_size": vocab.len(),
            "pair_count": pairs.len(),
            "deterministic": config.deterministic,
            "epoch_loss": report.epoch_loss,
            "epoch_examples": report.epoch_examples,
        }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn export_cooc(cli: &Cli, a: &ExportCoocArgs) -> CmdResult {
    let inputs = require([a.pairs.as_path(), a.vocab.as_path()])?;
    let vocab = load_vocab(&a.vocab)?;
    let cooc = CooccurrenceMatrix::from_pairs(&load_pairs(&a.pairs, &vocab)?);
    cooc.write_text(create(&a.out)?)?;
    Report {
        cli,
        command: "export-cooc",
        inputs,
        outputs: vec![a.out.clone()],
        metrics: json!({ "nonzero": cooc.nnz(), "total": cooc.total() }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn prototypes(cli: &Cli, a: &PrototypesArgs) -> CmdResult {
    let inputs = require([a.class_names.as_path(), a.embeddings.as_path()])?;
    let entries = load_class_names(&a.class_names)?;
    let emb = EmbeddingMatrix::load(&a.embeddings)?;
    let protos = normalize(&build_prototypes(&entries, &emb)?, a.normalize);
    protos.save(&a.out)?;
    Report {
        cli,
        command: "prototypes",
        inputs,
        outputs: vec![a.out.clone()],
        metrics: json!({ "classes": protos.len(), "dim": protos.dim(), "unresolved": protos.unresolved }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn zsl_fit(cli: &Cli, a: &ZslFitArgs) -> CmdResult {
    let d = &a.data;
    let mut paths = vec![d.prototypes.as_path(), &d.features, &d.labels, &d.seen, &d.unseen];
    paths.extend(a.zsl.validation_list.as_deref());
    let inputs = require(paths)?;
    let data = load_dataset(&DatasetPaths {
        features: d.features.clone(),
        labels: d.labels.clone(),
        prototypes: d.prototypes.clone(),
        seen: d.seen.clone(),
        unseen: d.unseen.clone(),
        test_features: None,
        test_labels: None,
    })?;
    let grid = grid_or_default(&a.zsl)?;
    let validation = match &a.zsl.validation_list {
        Some(p) => ValidationClasses::Explicit(load_lines(p)?),
        None => ValidationClasses::Count(a.zsl.validation_classes),
    };
    let cv = cross_validate(&data, a.zsl.model, &grid, &validation, cli.seed)?;
    cv.model.save(&a.out)?;
    let table: Vec<Value> = cv.table.iter().map(|(h, acc)| json!({ "hyper": h, "accuracy": acc })).collect();
    Report {
        cli,
        command: "zsl-fit",
        inputs,
        outputs: vec![a.out.clone()],
        metrics: json!({
            "model": a.zsl.model.name(),
            "best": cv.best,
            "validation_accuracy": cv.best_accuracy,
            "validation_classes": cv.validation_classes,
            "table": table,
        }),
    }
    .save(a, with_suffix(&a.out, ".manifest.json"))
}

fn label_positions(labels: &[String], classes: &[String]) -> Result<Vec<usize>, CliError> {
    labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| CliError::Stage(webzsl::Error::InvalidArgument(format!("label {l:?} is not a listed class"))))
        })
        .collect()
}

fn zsl_eval(cli: &Cli, a: &ZslEvalArgs) -> CmdResult {
    let inputs = require([a.model_file.as_path(), &a.prototypes, &a.unseen, &a.test_features, &a.test_labels])?;
    let model = ZslModel::load(&a.model_file)?;
    let unseen = load_lines(&a.unseen)?;
    let protos = PrototypeSet::load(&a.prototypes)?.select(&unseen)?;
    let features = load_matrix(&a.test_features)?;
    let labels = label_positions(&load_lines(&a.test_labels)?, &unseen)?;
    let rankings = model.rank_all(&features, &protos)?;
    let topk = a
        .topk
        .iter()
        .map(|&k| Ok((k, topk_accuracy(&rankings, &labels, k)?)))
        .collect::<Result<Vec<_>, webzsl::Error>>()?;
    let per_class = per_class_accuracy(&rankings, &labels, unseen.len())?;

    make_dir(&a.out_dir)?;
    let metrics = json!({
        "model": model.kind.name(),
        "samples": labels.len(),
        "per_sample": topk_json(&topk),
        "per_class_top1": per_class.macro_average,
    });
    let metrics_path = a.out_dir.join("metrics.json");
    let predictions = a.out_dir.join("predictions.txt");
    let per_class_path = a.out_dir.join("per_class.csv");
    write_json(&metrics_path, &metrics)?;
    predictions_file(&predictions, &rankings, &unseen)?;
    per_class_csv(&per_class_path, &per_class, &unseen)?;
    Report {
        cli,
        command: "zsl-eval",
        inputs,
        outputs: vec![metrics_path, predictions, per_class_path],
        metrics,
    }
    .save(a, a.out_dir.join("manifest.json"))
}

fn write_json(path: &Path, v: &Value) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| webzsl::Error::InvalidArgument(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(webzsl::Error::from)?;
    Ok(())
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> CmdResult {
    let inputs = require([a.taxonomy.as_path(), &a.predictions, &a.test_labels, &a.seen, &a.unseen])?;
    let tax = Taxonomy::load(&a.taxonomy)?;
    let seen = load_lines(&a.seen)?;
    let unseen = load_lines(&a.unseen)?;
    let labels = label_positions(&load_lines(&a.test_labels)?, &unseen)?;
    let rankings: Vec<Vec<usize>> = load_lines(&a.predictions)?
        .iter()
        .map(|line| label_positions(&line.split_whitespace().map(str::to_owned).collect::<Vec<_>>(), &unseen))
        .collect::<Result<_, _>>()?;

    let hist = distance_histogram(&rankings, &labels, &unseen, &tax)?;
    let per_class = per_class_accuracy(&rankings, &labels, unseen.len())?;
    let acc: BTreeMap<String, f64> = per_class.per_class.iter().map(|(c, a)| (unseen[*c].clone(), *a)).collect();
    let diffs = class_difficulty(&tax, &seen, &unseen, &acc)?;

    make_dir(&a.out_dir)?;
    let hist_path = a.out_dir.join("distance_histogram.csv");
    let hist_rows: Vec<Vec<String>> = hist.iter().map(|(d, n)| vec![d.to_string(), n.to_string()]).collect();
    write_csv(create(&hist_path)?, &["distance", "count"], &hist_rows)?;
    let diff_path = a.out_dir.join("class_difficulty.csv");
    let diff_rows: Vec<Vec<String>> = diffs
        .iter()
        .map(|d| {
            vec![
                d.class_id.clone(),
                d.min_dist_to_seen.to_string(),
                d.sibling_count.to_string(),
                d.unseen_closer_count.to_string(),
                d.accuracy.map(|x| x.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        create(&diff_path)?,
        &["class_id", "min_dist_to_seen", "sibling_count", "unseen_closer_count", "accuracy"],
        &diff_rows,
    )?;

    let scored: Vec<_> = diffs.iter().filter_map(|d| d.accuracy.map(|a| (d, a))).collect();
    let accs: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let corr = |f: fn(&webzsl::analysis::ClassDifficulty) -> usize| {
        let xs: Vec<f64> = scored.iter().map(|s| f(s.0) as f64).collect();
        pearson(&xs, &accs).ok()
    };
    let histogram: BTreeMap<String, usize> = hist.iter().map(|(d, n)| (d.to_string(), *n)).collect();
    Report {
        cli,
        command: "analyze",
        inputs,
        outputs: vec![hist_path, diff_path],
        metrics: json!({
            "distance_histogram": histogram,
            "correlation": {
                "min_dist_to_seen": corr(|d| d.min_dist_to_seen),
                "sibling_count": corr(|d| d.sibling_count),
                "unseen_closer_count": corr(|d| d.unseen_closer_count),
            },
        }),
    }
    .save(a, a.out_dir.join("manifest.json"))
}

fn split_inputs(s: &SplitArgs) -> Vec<&Path> {
    vec![&s.class_names, &s.features, &s.labels, &s.test_features, &s.test_labels, &s.seen, &s.unseen]
}

fn pipeline_inputs(corpus: &CorpusArgs, s: &SplitArgs) -> Result<PipelineInputs, CliError> {
    Ok(PipelineInputs {
        collections: load_corpus(corpus)?.collections,
        class_names: load_class_names(&s.class_names)?,
        seen: load_lines(&s.seen)?,
        unseen: load_lines(&s.unseen)?,
        train_features: load_matrix(&s.features)?,
        train_labels: load_lines(&s.labels)?,
        test_features: load_matrix(&s.test_features)?,
        test_labels: load_lines(&s.test_labels)?,
    })
}

fn pipeline_config(cli: &Cli, p: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    if p.zsl.validation_list.is_some() {
        return Err(CliError::Usage("--validation-list is only supported by zsl-fit".into()));
    }
    Ok(PipelineConfig {
        mode: p.mode,
        trainer: trainer_config(cli, &p.train, p.min_count),
        model: p.zsl.model,
        normalize: p.normalize,
        grid: Some(grid_or_default(&p.zsl)?),
        validation_classes: p.zsl.validation_classes,
        topk: p.topk.clone(),
        seed: cli.seed,
    })
}

fn run_all(cli: &Cli, a: &RunArgs) -> CmdResult {
    let mut paths = corpus_inputs(&a.corpus);
    paths.extend(split_inputs(&a.split));
    let inputs = require(paths)?;
    let config = pipeline_config(cli, &a.pipeline)?;
    let data = pipeline_inputs(&a.corpus, &a.split)?;
    let out = run_pipeline(&data, &config)?;

    make_dir(&a.out_dir)?;
    let e = &out.evaluation;
    let report = json!({
        "pieces": out.pieces,
        "vocabulary_size": out.vocabulary_size,
        "pair_count": out.pair_count,
        "unresolved_classes": out.unresolved_classes,
        "best_hyper": e.best_hyper,
        "validation_accuracy": e.validation_accuracy,
        "per_sample": topk_json(&e.topk),
        "per_class_top1": e.per_class.macro_average,
    });
    let report_path = a.out_dir.join("report.json");
    let predictions = a.out_dir.join("predictions.txt");
    let per_class_path = a.out_dir.join("per_class.csv");
    write_json(&report_path, &report)?;
    predictions_file(&predictions, &e.rankings, &data.unseen)?;
    per_class_csv(&per_class_path, &e.per_class, &data.unseen)?;
    Report {
        cli,
        command: "run",
        inputs,
        outputs: vec![report_path, predictions, per_class_path],
        metrics: report,
    }
    .save(a, a.out_dir.join("manifest.json"))
}

fn ablate_corpus(cli: &Cli, a: &AblateCorpusArgs) -> CmdResult {
    let mut paths = corpus_inputs(&a.corpus);
    paths.extend(split_inputs(&a.split));
    let inputs = require(paths)?;
    let config = pipeline_config(cli, &a.pipeline)?;
    let data = pipeline_inputs(&a.corpus, &a.split)?;
    let rows = corpus_ablation(&data, &config, &a.fractions)?;
    make_dir(&a.out_dir)?;
    let csv_path = a.out_dir.join("corpus_ablation.csv");
    write_corpus_ablation_csv(create(&csv_path)?, &rows)?;
    Report {
        cli,
        command: "ablate-corpus",
        inputs,
        outputs: vec![csv_path],
        metrics: serde_json::to_value(&rows).map_err(|e| CliError::Usage(e.to_string()))?,
    }
    .save(a, a.out_dir.join("manifest.json"))
}

fn default_keeps(k: usize) -> Vec<usize> {
    let mut keeps: Vec<usize> = [1, 2, 4, 8].iter().map(|d| (k / d).max(1)).collect();
    keeps.dedup();
    keeps
}

fn ablate_attributes(cli: &Cli, a: &AblateAttributesArgs) -> CmdResult {
    let inputs = require([a.attributes.as_path(), &a.features, &a.labels, &a.test_features, &a.test_labels, &a.seen, &a.unseen])?;
    let data = load_dataset(&DatasetPaths {
        features: a.features.clone(),
        labels: a.labels.clone(),
        prototypes: a.attributes.clone(),
        seen: a.seen.clone(),
        unseen: a.unseen.clone(),
        test_features: Some(a.test_features.clone()),
        test_labels: Some(a.test_labels.clone()),
    })?;
    let keep_counts = if a.keep.is_empty() { default_keeps(data.k()) } else { a.keep.clone() };
    let config = AttributeAblationConfig {
        keep_counts,
        runs: a.runs,
        seed: cli.seed,
        grid: a.grid.as_deref().map(parse_grid).transpose()?,
        validation: ValidationClasses::Count(a.validation_classes),
    };
    let rows = attribute_ablation(&data, &config)?;
    make_dir(&a.out_dir)?;
    let csv_path = a.out_dir.join("attribute_ablation.csv");
    write_attribute_ablation_csv(create(&csv_path)?, &rows)?;
    Report {
        cli,
        command: "ablate-attributes",
        inputs,
        outputs: vec![csv_path],
        metrics: serde_json::to_value(&rows).map_err(|e| CliError::Usage(e.to_string()))?,
    }
    .save(a, a.out_dir.join("manifest.json"))
}

fn synth(cli: &Cli, a: &SynthArgs) -> CmdResult {
    let config = SynthConfig {
        concepts: a.concepts,
        users: a.users,
        pieces_per_concept: a.pieces_per_concept,
        vocab_per_concept: a.vocab_per_concept,
        shared_vocab: a.shared_vocab,
        attributes_per_concept: a.attributes_per_concept,
        bulk_users_fraction: a.bulk_users_fraction,
        bulk_factor: a.bulk_factor,
        seen: a.seen,
        groups: a.groups,
        visual_dim: a.visual_dim,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        noise: a.noise,
        seed: cli.seed,
    };
    let corpus = synth_corpus(&config)?;
    let outputs = corpus.write_dir(&a.out_dir)?;
    Report {
        cli,
        command: "synth",
        inputs: Vec::new(),
        outputs,
        metrics: json!({ "records": corpus.records.len(), "bulk_users": corpus.bulk_users.len() }),
    }
    .save(a, a.out_dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("lambda=0.1,1;gamma=2").unwrap();
        assert_eq!(g, vec![("lambda".to_owned(), vec![0.1, 1.0]), ("gamma".to_owned(), vec![2.0])]);
        assert!(parse_grid("lambda").is_err());
        assert!(parse_grid("lambda=x").is_err());
    }

    #[test]
    fn keep_defaults() {
        assert_eq!(default_keeps(64), [64, 32, 16, 8]);
        assert_eq!(default_keeps(3), [3, 1]);
    }
}
