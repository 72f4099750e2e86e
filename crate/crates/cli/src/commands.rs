use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spforge::dataset::{parse_records, DatasetSplit, SplitWarning, StoryRecord};
use spforge::eval::{ablation_compare, evaluate_story_points, table5};
use spforge::fusion::{correlation_matrix, fuse as fuse_matrix, parse_embeddings, EmbeddingHeader, EmbeddingRecord, SEVERITY_COLUMN};
use spforge::gbt::{GbtModel, TrainReport};
use spforge::pipeline::{self, RunConfig};
use spforge::synth::{self, SynthConfig};
use spforge_ingest::{assemble_records, parse_annotations, BugzillaClient, ClientConfig, IngestError, BASE_URL_ENV};

use crate::config::{required, PipelineConfig};
use crate::failure::{CmdResult, Context, Failure};

fn open(path: &Path) -> CmdResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).context(format!("opening {}", path.display()))?))
}

/// Writes `text` plus a newline to `out`, or to standard output.
fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => {
            std::fs::write(path, format!("{text}\n")).context(format!("writing {}", path.display()))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> CmdResult<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn load_records(cfg: &PipelineConfig) -> CmdResult<Vec<StoryRecord>> {
    let path = required(&cfg.records, "records")?;
    parse_records(open(path)?, &cfg.run.fib_class_values).context(format!("reading records {}", path.display()))
}

fn load_embeddings(cfg: &PipelineConfig) -> CmdResult<Vec<EmbeddingRecord>> {
    let path = required(&cfg.embeddings, "embeddings")?;
    Ok(parse_embeddings(open(path)?).context(format!("reading embeddings {}", path.display()))?.records)
}

fn load_corpus(cfg: &PipelineConfig) -> CmdResult<(Vec<StoryRecord>, Vec<EmbeddingRecord>)> {
    Ok((load_records(cfg)?, load_embeddings(cfg)?))
}

fn load_model(cfg: &PipelineConfig) -> CmdResult<GbtModel> {
    let path = required(&cfg.model, "model")?;
    let text = std::fs::read_to_string(path).context(format!("reading model {}", path.display()))?;
    GbtModel::from_json(&text).context(format!("parsing model {}", path.display()))
}

/// A split as written by `split`.
#[derive(Serialize, Deserialize)]
struct SplitFile {
    #[serde(flatten)]
    split: DatasetSplit,
    #[serde(default)]
    warnings: Vec<SplitWarning>,
}

fn load_split(path: &Path) -> CmdResult<DatasetSplit> {
    let file: SplitFile = serde_json::from_reader(open(path)?).context(format!("reading split {}", path.display()))?;
    Ok(file.split)
}

fn warn_split(warnings: &[SplitWarning]) {
    for w in warnings {
        eprintln!(
            "warning: story-point class {} has {} training and {} test stories",
            w.class, w.train_rows, w.test_rows
        );
    }
}

pub fn ingest(annotations: &Path, ids: &[u64], base_url: Option<String>, parallelism: usize, out: Option<&Path>) -> CmdResult {
    let base_url = base_url
        .or_else(|| std::env::var(BASE_URL_ENV).ok().filter(|s| !s.is_empty()))
        .ok_or_else(|| Failure::usage(format!("no Bugzilla URL: pass --base-url or set {BASE_URL_ENV}")))?;
    let classes = spforge::dataset::FibClassMap::default();
    let ann = parse_annotations(open(annotations)?, &classes).context(format!("reading {}", annotations.display()))?;
    let ids: Vec<u64> = if ids.is_empty() { ann.keys().copied().collect() } else { ids.to_vec() };

    let client = BugzillaClient::new(ClientConfig::new(base_url));
    let mut bugs = Vec::new();
    let mut missing = Vec::new();
    for (id, result) in client.fetch_bugs(&ids, parallelism) {
        match result {
            Ok(bug) => bugs.push(bug),
            Err(IngestError::NotFound(_)) => missing.push(id),
            Err(e) => return Err(e).context(format!("fetching bug {id}")),
        }
    }
    let summary = match out {
        Some(path) => {
            let file = File::create(path).context(format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            let s = assemble_records(&bugs, &ann, &mut w)?;
            w.flush()?;
            s
        }
        None => assemble_records(&bugs, &ann, std::io::stdout().lock())?,
    };
    eprintln!(
        "{}",
        serde_json::json!({"written": summary.written, "skipped_unannotated": summary.skipped, "not_found": missing})
    );
    Ok(())
}

pub fn fuse(cfg: &PipelineConfig) -> CmdResult {
    let (records, embs) = load_corpus(cfg)?;
    let run = &cfg.run;
    let m = fuse_matrix(&records, &embs, &run.severity_scale, &run.fib_class_values, run.include_severity)?;
    emit(cfg.out.as_deref(), &serde_json::to_string(&m)?)
}

pub fn correlate(cfg: &PipelineConfig) -> CmdResult {
    let (records, embs) = load_corpus(cfg)?;
    let run = &cfg.run;
    let cm = correlation_matrix(&records, &embs, &run.severity_scale, &run.fib_class_values, run.include_severity)?;
    eprint!("{}", cm.render());
    emit(cfg.out.as_deref(), &to_json(&cm)?)
}

pub fn split(cfg: &PipelineConfig) -> CmdResult {
    let records = load_records(cfg)?;
    let (split, warnings) = pipeline::split_corpus(&records, &cfg.run)?;
    warn_split(&warnings);
    emit(cfg.out.as_deref(), &to_json(&SplitFile { split, warnings })?)
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a RunConfig,
    include_severity: bool,
    train_ids: &'a [String],
    validation_ids: Vec<String>,
    report: TrainReport,
}

pub fn train(cfg: &PipelineConfig, split_file: Option<&Path>) -> CmdResult {
    let model_path = required(&cfg.model, "model")?;
    let (records, embs) = load_corpus(cfg)?;
    let split = match split_file {
        Some(path) => load_split(path)?,
        None => {
            let (split, warnings) = pipeline::split_corpus(&records, &cfg.run)?;
            warn_split(&warnings);
            split
        }
    };
    let include = cfg.run.include_severity;
    let (model, report, validation_ids) = pipeline::train_on_split(&records, &embs, &split, &cfg.run, include)?;
    std::fs::write(model_path, model.to_json()).context(format!("writing model {}", model_path.display()))?;
    eprintln!(
        "trained {} round(s), best round {}{}",
        report.rounds_completed,
        report.best_round,
        if report.stopped_early { " (stopped early)" } else { "" }
    );
    let out = TrainOutput { config: &cfg.run, include_severity: include, train_ids: &split.train, validation_ids, report };
    emit(cfg.out.as_deref(), &to_json(&out)?)
}

/// Fuses the corpus the way `model` was trained and picks the rows to score.
fn model_inputs(cfg: &PipelineConfig, model: &GbtModel, split_file: Option<&Path>) -> CmdResult<(spforge::fusion::FeatureMatrix, Vec<String>)> {
    let (records, embs) = load_corpus(cfg)?;
    let include = model.column_names.last().map(String::as_str) == Some(SEVERITY_COLUMN);
    let m = fuse_matrix(&records, &embs, &cfg.run.severity_scale, &model.fib_class_values, include)?;
    if m.column_names != model.column_names {
        return Err(Failure::data(format!(
            "embeddings give {} feature columns but the model was trained on {}",
            m.n_cols,
            model.column_names.len()
        )));
    }
    let ids = match split_file {
        Some(path) => load_split(path)?.test,
        None => m.story_ids.clone(),
    };
    Ok((m, ids))
}

pub fn predict(cfg: &PipelineConfig, split_file: Option<&Path>) -> CmdResult {
    let model = load_model(cfg)?;
    let (m, ids) = model_inputs(cfg, &model, split_file)?;
    let (_, predictions) = pipeline::evaluate_ids(&model, &m, &ids, &cfg.run)?;
    let lines = predictions
        .iter()
        .map(serde_json::to_string)
        .collect::<Result<Vec<_>, _>>()?;
    emit(cfg.out.as_deref(), lines.join("\n").as_str())
}

pub fn evaluate(cfg: &PipelineConfig, split_file: Option<&Path>) -> CmdResult {
    let model = load_model(cfg)?;
    let (m, ids) = model_inputs(cfg, &model, split_file)?;
    let (report, _) = pipeline::evaluate_ids(&model, &m, &ids, &cfg.run)?;
    eprintln!("{}", report.confusion.render());
    eprintln!("accuracy {:.2}, near-miss accuracy {:.2}", report.accuracy, report.near_miss_accuracy);
    emit(cfg.out.as_deref(), &to_json(&report)?)
}

pub fn evaluate_table5(cfg: &PipelineConfig) -> CmdResult {
    let rows = table5();
    let actual: Vec<u32> = rows.iter().map(|r| r.actual_sp).collect();
    let score = |preds: Vec<u32>, include: bool| -> CmdResult<_> {
        let mut r = evaluate_story_points(&actual, &preds, &cfg.run.fib_class_values, cfg.run.near_miss_tolerance)?;
        r.include_severity = Some(include);
        Ok(r)
    };
    let with = score(rows.iter().map(|r| r.pred_with_severity).collect(), true)?;
    let without = score(rows.iter().map(|r| r.pred_without_severity).collect(), false)?;
    let diff = ablation_compare(&with, &without)?;
    eprint!("{}", diff.render());
    emit(cfg.out.as_deref(), &to_json(&diff)?)
}

pub fn ablate(cfg: &PipelineConfig) -> CmdResult {
    let (records, embs) = load_corpus(cfg)?;
    let outcome = pipeline::ablate(&records, &embs, &cfg.run)?;
    warn_split(&outcome.split_warnings);
    eprint!("{}", outcome.diff.render());
    emit(cfg.out.as_deref(), &to_json(&outcome)?)
}

pub fn synth(records_path: &Path, embeddings_path: &Path, seed: u64) -> CmdResult {
    if records_path == embeddings_path {
        return Err(Failure::usage("--records and --embeddings must differ"));
    }
    let config = SynthConfig { seed, ..Default::default() };
    let (records, embs) = synth::generate(&config, &Default::default())?;
    let mut w = BufWriter::new(File::create(records_path).context(format!("creating {}", records_path.display()))?);
    spforge::dataset::write_records(&mut w, &records)?;
    w.flush()?;

    let mut w = BufWriter::new(File::create(embeddings_path).context(format!("creating {}", embeddings_path.display()))?);
    let header = EmbeddingHeader {
        pooling: Some("synthetic".into()),
        text_dim: Some(config.text_dim),
        image_dim: Some(config.image_dim),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for e in &embs {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()?;
    eprintln!("wrote {} stories", records.len());
    Ok(())
}
