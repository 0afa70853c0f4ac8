use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tte_core::coxph::{self, CoxModel};
use tte_core::data::{
    generate_synthetic, load_csv, Schema, Split, SurvivalDataset, SurvivalRecord,
};
use tte_core::date::{self, DateModel};
use tte_core::draft::{self, DraftModel};
use tte_core::metrics::MetricReport;
use tte_core::nn::Checkpoint;
use tte_core::predict::prediction_set;
use tte_core::{Execution, TimeSampler};

use crate::config::{DataSource, ModelKind, ModelSpec, RunConfig};

pub const DATASET_FILE: &str = "dataset.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn checkpoint_path(out: &Path, kind: ModelKind) -> PathBuf {
    out.join(format!("{}.checkpoint.json", kind.as_str()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub n_records: usize,
    pub n_events: usize,
    pub event_fraction: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub source: String,
    pub n_records: usize,
    pub n_events: usize,
    pub event_fraction: f64,
    pub t_max: f64,
    pub time_units: String,
    pub features: Vec<String>,
    pub splits: BTreeMap<String, SplitSummary>,
    pub preprocessing_hash: String,
}

impl Manifest {
    fn of(ds: &SurvivalDataset, seed: u64, source: String) -> Self {
        let splits = Split::ALL
            .iter()
            .map(|&s| {
                let idx = ds.indices(s);
                let n_events = idx.iter().filter(|&&i| ds.records[i].event).count();
                let summary = SplitSummary {
                    n_records: idx.len(),
                    n_events,
                    event_fraction: ds.split_event_fraction(s),
                    t_max: ds.t_max_of(s),
                };
                (s.as_str().to_string(), summary)
            })
            .collect();
        Self {
            seed,
            source,
            n_records: ds.len(),
            n_events: ds.records.iter().filter(|r| r.event).count(),
            event_fraction: ds.event_fraction(),
            t_max: ds.t_max(),
            time_units: ds.time_units.clone(),
            features: ds.features.iter().map(|f| f.name.clone()).collect(),
            splits,
            preprocessing_hash: ds.preprocessing.hash(),
        }
    }
}

fn build_dataset(config: &RunConfig) -> Result<(SurvivalDataset, String)> {
    match &config.source {
        DataSource::Csv { csv, schema } => {
            let schema =
                Schema::load(schema).with_context(|| format!("schema {}", schema.display()))?;
            let ds = load_csv(csv, &schema, config.fractions, config.seed)?;
            Ok((ds, format!("csv:{}", csv.display())))
        }
        DataSource::Synthetic(s) => Ok((
            generate_synthetic(&config.synthetic_spec(s))?,
            "synthetic".into(),
        )),
    }
}

pub fn prepare(config: &RunConfig) -> Result<Manifest> {
    let (ds, source) = build_dataset(config)?;
    create_dir(&config.out)?;
    write_json(&config.out.join(DATASET_FILE), &ds)?;
    let manifest = Manifest::of(&ds, config.seed, source);
    write_json(&config.out.join(MANIFEST_FILE), &manifest)?;
    log::info!(
        "prepared {} records ({:.1}% events, t_max {} {}) into {}",
        manifest.n_records,
        100.0 * manifest.event_fraction,
        manifest.t_max,
        manifest.time_units,
        config.out.display()
    );
    Ok(manifest)
}

fn load_dataset(out: &Path) -> Result<SurvivalDataset> {
    let path = out.join(DATASET_FILE);
    if !path.is_file() {
        bail!("{} not found; run `tte prepare` first", path.display());
    }
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<PathBuf> {
    let ds = load_dataset(&config.out)?;
    let kind = config.model.kind();
    let log_path = config.out.join(format!("{}.train.jsonl", kind.as_str()));
    let mut cp = match &config.model {
        ModelSpec::Date(_) => {
            let cfg = config.date_config().expect("date model");
            let (model, log) = date::train(&ds, &cfg).context("training DATE")?;
            write_jsonl(&log_path, &log)?;
            if let Some(best) = log.iter().rev().find(|l| l.best) {
                log::info!("DATE best epoch {} of {}", best.epoch, log.len());
            }
            model.to_checkpoint()?
        }
        ModelSpec::Draft(_) => {
            let cfg = config.draft_config().expect("draft model");
            let (model, log) = draft::train(&ds, &cfg).context("training DRAFT")?;
            write_jsonl(&log_path, &log)?;
            if let Some(best) = log.iter().rev().find(|l| l.best) {
                log::info!("DRAFT best epoch {} of {}", best.epoch, log.len());
            }
            model.to_checkpoint()?
        }
        ModelSpec::Coxph(cfg) => {
            let model =
                coxph::fit(&ds.split_records(Split::Train), cfg).context("fitting Cox model")?;
            write_jsonl(&log_path, std::slice::from_ref(&model))?;
            log::info!(
                "Cox fit: converged {} after {} iterations, max |gradient| {:.2e}",
                model.converged,
                model.iterations,
                model.gradient_max_norm
            );
            let mut cp = Checkpoint::new(
                "coxph",
                config.seed,
                serde_json::json!({ "n_features": ds.n_features(), "model": model }),
            );
            cp.vectors.insert("beta".into(), model.beta.clone());
            cp
        }
    };
    cp.seed = config.seed;
    cp.preprocessing_hash = Some(ds.preprocessing.hash());
    let path = checkpoint_path(&config.out, kind);
    cp.save(&path)?;
    log::info!("wrote {} and {}", path.display(), log_path.display());
    Ok(path)
}

fn write_sample_dump(
    path: &Path,
    ids: &[usize],
    records: &[SurvivalRecord],
    set: &tte_core::metrics::PredictionSet,
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let k = set.records.first().map_or(0, |p| p.samples.len());
    let mut header = vec![
        "record_id".to_string(),
        "t".into(),
        "l".into(),
        "t_hat".into(),
    ];
    header.extend((0..k).map(|j| format!("sample_{j}")));
    w.write_record(&header)?;
    for ((id, r), p) in ids.iter().zip(records).zip(&set.records) {
        let mut row = vec![
            id.to_string(),
            r.t.to_string(),
            u8::from(r.event).to_string(),
            p.point.to_string(),
        ];
        row.extend(p.samples.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate(config: &RunConfig, checkpoint: &Path) -> Result<MetricReport> {
    let ds = load_dataset(&config.out)?;
    let cp = Checkpoint::load(checkpoint)
        .with_context(|| format!("loading {}", checkpoint.display()))?;
    let hash = ds.preprocessing.hash();
    match &cp.preprocessing_hash {
        Some(h) if *h == hash => {}
        Some(h) => {
            bail!("checkpoint encoding {h} does not match the prepared dataset encoding {hash}")
        }
        None => bail!("checkpoint carries no preprocessing hash"),
    }
    let kind = ModelKind::parse(&cp.model)?;
    let ids = ds.indices(Split::Test);
    if ids.is_empty() {
        bail!("the prepared dataset has no test split");
    }
    let test = ds.split_records(Split::Test);
    let t_max = ds.t_max();
    let exec = Execution::default();

    let sampler: Box<dyn TimeSampler> = match kind {
        ModelKind::Date => Box::new(DateModel::from_checkpoint(&cp)?),
        ModelKind::Draft => Box::new(DraftModel::from_checkpoint(&cp)?),
        ModelKind::Coxph => {
            let model: CoxModel = serde_json::from_value(cp.config["model"].clone())?;
            let scores = model.risk_scores(&test, exec)?;
            let times: Vec<f64> = test.iter().map(|r| r.t).collect();
            let events: Vec<bool> = test.iter().map(|r| r.event).collect();
            let report = MetricReport::from_risk_scores("coxph", &times, &events, &scores, t_max)?;
            write_json(&config.out.join("coxph.report.json"), &report)?;
            return Ok(report);
        }
    };
    let set = prediction_set(
        sampler.as_ref(),
        &test,
        config.eval.samples,
        config.seed,
        t_max,
        exec,
    )?;
    let report =
        MetricReport::from_predictions(kind.as_str(), &set, config.eval.interval_level, exec)?;
    let report_path = config.out.join(format!("{}.report.json", kind.as_str()));
    write_json(&report_path, &report)?;
    if config.eval.sample_dump {
        write_sample_dump(
            &config.out.join(format!("{}.samples.csv", kind.as_str())),
            &ids,
            &test,
            &set,
        )?;
    }
    log::info!(
        "{}: test CI {:.4}, non-censored median RAE {}",
        kind.as_str(),
        report.ci,
        report
            .rae_noncensored_median
            .map_or("n/a".to_string(), |v| format!("{v:.4}"))
    );
    Ok(report)
}

/// Write a synthetic dataset as a CSV file with its schema.
pub fn synth(config: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let DataSource::Synthetic(s) = &config.source else {
        bail!("synth needs a [data.synthetic] section");
    };
    let ds = generate_synthetic(&config.synthetic_spec(s))?;
    let table = ds.to_raw_table()?;
    create_dir(&config.out)?;
    let csv_path = config.out.join("synthetic.csv");
    let schema_path = config.out.join("synthetic.schema.toml");
    table.write_csv(&csv_path)?;
    std::fs::write(&schema_path, table.schema.to_toml())?;
    log::info!("wrote {} records to {}", ds.len(), csv_path.display());
    Ok((csv_path, schema_path))
}
