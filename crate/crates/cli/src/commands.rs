use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use cspace::data::{synthetic_shapes, write_container, Dataset, SyntheticConfig};
use cspace::eval::{
    bounding_box, decode_grid, evaluate, export_features, rate_report, GridSpec, RateReport, TraversalSpec,
};
use cspace::learner::{fit_with, train_autoencoder_baseline, train_classifier_baseline, FitOptions};

use crate::checkpoint::{checkpoint_dir, Checkpoint, Trained};
use crate::config::{RunConfig, Trainer};
use crate::error::{CliError, CliResult};

pub const EPOCH_LOG: &str = "epochs.jsonl";

fn out_err(e: std::io::Error) -> CliError {
    CliError::io("writing output", e)
}

/// Generates the synthetic dataset into a container and lists the count of
/// every property.
pub fn gen_data(config: &SyntheticConfig, path: &Path, out: &mut impl Write) -> CliResult<Dataset<f32>> {
    config.validate()?;
    let data = synthetic_shapes::<f32>(config)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    write_container(&data, path)?;
    writeln!(out, "wrote {} samples to {}", data.len(), path.display()).map_err(out_err)?;
    for (name, count) in data.properties().names.iter().zip(data.counts()) {
        writeln!(out, "  {name}: {count}").map_err(out_err)?;
    }
    Ok(data)
}

/// Trains with the configured trainer, writing one JSON line per epoch to
/// `<output>/epochs.jsonl` and the checkpoint to `<output>/checkpoint`.
pub fn train(config: &RunConfig, out: &mut impl Write) -> CliResult<Checkpoint> {
    config.validate()?;
    let (train, _) = config.load_dataset()?;
    let (enc, dec) = config.networks(train.sample_shape())?;
    fs::create_dir_all(&config.output).map_err(|e| CliError::io(format!("creating {}", config.output.display()), e))?;
    let log_path = config.output.join(EPOCH_LOG);
    let mut log =
        fs::File::create(&log_path).map_err(|e| CliError::io(format!("creating {}", log_path.display()), e))?;
    let mut write_line = |line: String| -> CliResult<()> {
        writeln!(log, "{line}").map_err(|e| CliError::io(format!("writing {}", log_path.display()), e))?;
        writeln!(out, "{line}").map_err(out_err)
    };
    let model = match config.trainer {
        Trainer::Domain => {
            let mut failed = None;
            let outcome = fit_with(&train, &enc, &dec, &config.train, FitOptions::default(), |r| {
                if failed.is_none() {
                    failed = write_line(r.to_json_line()).err();
                }
            })?;
            if let Some(e) = failed {
                return Err(e);
            }
            Trained::Domain(outcome.model)
        }
        Trainer::Autoencoder => {
            let outcome = train_autoencoder_baseline(&train, &enc, &dec, &config.train)?;
            for r in &outcome.reports {
                write_line(serde_json::to_string(r).expect("report serializes"))?;
            }
            Trained::Domain(outcome.model)
        }
        Trainer::Classifier => {
            let outcome = train_classifier_baseline(&train, &enc, &config.train)?;
            for r in &outcome.reports {
                write_line(serde_json::to_string(r).expect("report serializes"))?;
            }
            Trained::Classifier(outcome)
        }
    };
    let ckpt = Checkpoint::new(model, config, train.properties().clone(), train.sample_shape().to_vec());
    ckpt.save(&checkpoint_dir(&config.output))?;
    Ok(ckpt)
}

/// The checkpoint's run config, with the dataset source replaced when given.
fn eval_config(ckpt: &Checkpoint, dataset: Option<&str>) -> RunConfig {
    let mut config = ckpt.manifest.config.clone();
    if let Some(source) = dataset {
        config.dataset.source = source.to_string();
    }
    config
}

/// The evaluation split of the dataset, checked against the checkpoint.
pub fn eval_dataset(ckpt: &Checkpoint, dataset: Option<&str>) -> CliResult<Dataset<f32>> {
    let (_, test) = eval_config(ckpt, dataset).load_dataset()?;
    if test.sample_shape() != ckpt.manifest.sample_shape.as_slice() {
        return Err(CliError::Mismatch(format!(
            "checkpoint expects samples of shape {:?}, dataset has {:?}",
            ckpt.manifest.sample_shape,
            test.sample_shape()
        )));
    }
    if test.properties() != &ckpt.manifest.properties {
        return Err(CliError::Mismatch(format!(
            "checkpoint properties {:?} differ from dataset properties {:?}",
            ckpt.manifest.properties.names,
            test.properties().names
        )));
    }
    Ok(test)
}

fn unavailable(reason: &str) -> Value {
    json!({ "available": false, "reason": reason })
}

/// Every metric that applies, as a JSON object. Metrics that cannot be
/// computed are present with `available: false` and a reason.
pub fn eval(ckpt: &Checkpoint, dataset: Option<&str>) -> CliResult<Value> {
    let test = eval_dataset(ckpt, dataset)?;
    let mut report = match &ckpt.model {
        Trained::Domain(model) => {
            let r = evaluate(model, &test, &TraversalSpec::default())?;
            let mut v = serde_json::to_value(&r).expect("report serializes");
            if r.consistency.is_none() {
                v["consistency"] = unavailable("the properties carry no attribute table");
            }
            if r.interpretability.is_none() {
                v["interpretability"] = unavailable("the dataset records no generating qualities");
            }
            v
        }
        Trained::Classifier(c) => {
            let none = unavailable("a classifier checkpoint has no domain");
            json!({
                "accuracy": c.accuracy(&test)?,
                "distance_matrix": none,
                "distinctness": none,
                "consistency": none,
                "interpretability": none,
            })
        }
    };
    report["trainer"] = serde_json::to_value(ckpt.manifest.trainer).expect("trainer serializes");
    report["samples"] = json!(test.len());
    Ok(report)
}

pub fn export(ckpt: &Checkpoint, dataset: Option<&str>, path: &Path) -> CliResult<usize> {
    let model = ckpt.domain_model()?;
    let test = eval_dataset(ckpt, dataset)?;
    export_features(model, &test, path)?;
    Ok(test.len())
}

/// Decodes a grid spanning the bounding box of the evaluation split's
/// encodings.
pub fn decode_grid_cmd(
    ckpt: &Checkpoint,
    dataset: Option<&str>,
    grid: GridSpec,
    dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    let model = ckpt.domain_model()?;
    let test = eval_dataset(ckpt, dataset)?;
    let points: Vec<Vec<f64>> =
        model.encode_dataset(&test)?.iter().map(|q| q.iter().map(|&v| f64::from(v)).collect()).collect();
    let bbox = bounding_box(&points)?;
    Ok(decode_grid(model, &bbox, grid, dir)?)
}

pub fn rate(n: u64, bits: u64, raw: [u64; 3], bits_per_channel: u64, out: &mut impl Write) -> CliResult<RateReport> {
    let r = rate_report(n, bits, raw[0], raw[1], raw[2], bits_per_channel)?;
    writeln!(out, "semantic bits: {}", r.semantic_bits).map_err(out_err)?;
    writeln!(out, "raw bits: {}", r.raw_bits).map_err(out_err)?;
    writeln!(out, "reduction: {:.2}%", 100.0 * r.reduction).map_err(out_err)?;
    Ok(r)
}

/// Parses `AxBxC` into its factors.
pub fn parse_dims<const K: usize>(s: &str) -> Result<[u64; K], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != K {
        return Err(format!("expected {K} extents separated by 'x', got {s:?}"));
    }
    let mut dims = [0; K];
    for (d, p) in dims.iter_mut().zip(parts) {
        *d = p.trim().parse().map_err(|_| format!("{p:?} is not a positive integer"))?;
        if *d == 0 {
            return Err(format!("extents must be positive, got {s:?}"));
        }
    }
    Ok(dims)
}
