use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cspace::data::{read_container, SyntheticConfig};
use cspace::eval::accuracy;
use cspace::learner::TrainConfig;
use cspace_cli::checkpoint::{checkpoint_dir, BLOB_FILE, MANIFEST_FILE};
use cspace_cli::commands::{self, EPOCH_LOG};
use cspace_cli::{Architecture, Checkpoint, CliError, Preset, RunConfig, Trained, Trainer, CHECKPOINT_VERSION};

fn cspace(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cspace")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_synthetic(output: &Path) -> RunConfig {
    let mut c = RunConfig::preset(Preset::Synthetic);
    c.dataset.synthetic = SyntheticConfig { count: 400, height: 8, width: 8, ..Default::default() };
    c.model.hidden = vec![16];
    c.train = TrainConfig { epochs: 3, batches_per_epoch: 8, batch_size: 16, ..c.train };
    c.output = output.to_path_buf();
    c
}

fn trained(dir: &Path) -> (RunConfig, Checkpoint) {
    let config = small_synthetic(dir);
    let ckpt = commands::train(&config, &mut Vec::new()).unwrap();
    (config, ckpt)
}

#[test]
fn dry_run_prints_the_mnist_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cspace(&["train", "--dry-run"], tmp.path());
    assert!(o.status.success());
    let printed: RunConfig = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!(printed, RunConfig::preset(Preset::Mnist));
    let t = &printed.train;
    assert_eq!((t.batch_size, t.batches_per_epoch, t.epochs, t.domain_dim), (32, 250, 75, 2));
    assert_eq!((t.lr, t.mu), (0.0002, 0.75));
    assert_eq!((t.loss.alpha, t.loss.beta, t.loss.lambda), (5.0, 1.0, 1.0));
    assert_eq!((t.reg.k1, t.reg.k2), (50.0, 5.0));
    assert_eq!(printed.model.filters, 16);
    assert_eq!(printed.model.architecture, Architecture::Conv);
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn rate_command_prints_the_bit_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cspace(&["rate", "--n", "2", "--raw", "112x112x3"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["64", "301056", "99.98%"] {
        assert!(text.contains(needle), "{needle} missing from {text}");
    }
}

#[test]
fn flags_override_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.toml");
    fs::write(&file, "preset = \"synthetic\"\n[train]\nepochs = 5\nlr = 0.01\n").unwrap();
    let from_file = RunConfig::load(Some(&file), None).unwrap();
    assert_eq!(from_file.preset, Preset::Synthetic);
    assert_eq!((from_file.train.epochs, from_file.train.lr), (5, 0.01));
    assert_eq!(from_file.train.batches_per_epoch, 100);

    let o = cspace(&["train", "--dry-run", "--config", file.to_str().unwrap(), "--epochs", "7"], tmp.path());
    assert!(o.status.success());
    let printed: RunConfig = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!((printed.train.epochs, printed.train.lr), (7, 0.01));
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.toml");
    fs::write(&file, "[model]\nwidth = 3\n").unwrap();
    assert!(matches!(RunConfig::load(Some(&file), None), Err(CliError::Config(_))));
    let o = cspace(&["train", "--dry-run", "--config", file.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validation_lists_every_problem() {
    let mut c = RunConfig::preset(Preset::Synthetic);
    c.train.mu = 2.0;
    c.dataset.train_fraction = 1.5;
    c.model.hidden = vec![0];
    match c.validate() {
        Err(CliError::Invalid(problems)) => assert_eq!(problems.len(), 3, "{problems:?}"),
        other => panic!("expected validation failure, got {other:?}"),
    }
}

#[test]
fn missing_dataset_fails_before_training() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cspace(&["train", "--preset", "synthetic", "--dataset", "absent.csd", "--output", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csd"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn gen_data_lists_properties_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cspace(&["gen-data", "--out", "a.csd"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let listed = text.lines().filter(|l| l.starts_with("  ")).count();
    assert_eq!(listed, 4, "{text}");
    assert!(cspace(&["gen-data", "--out", "b.csd"], tmp.path()).status.success());
    assert_eq!(fs::read(tmp.path().join("a.csd")).unwrap(), fs::read(tmp.path().join("b.csd")).unwrap());

    assert!(cspace(&["gen-data", "--out", "c.csd", "--count", "8000"], tmp.path()).status.success());
    let data = read_container::<f32>(tmp.path().join("c.csd")).unwrap();
    assert_eq!(data.len(), 8000);
    assert_eq!(data.counts().iter().sum::<usize>(), 8000);
}

#[test]
fn training_twice_gives_identical_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    trained(&a);
    trained(&b);
    let log = fs::read_to_string(a.join(EPOCH_LOG)).unwrap();
    assert_eq!(log.lines().count(), 3);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["loss"].is_f64());
    }
    assert_eq!(log, fs::read_to_string(b.join(EPOCH_LOG)).unwrap());
    assert_eq!(
        fs::read(checkpoint_dir(&a).join(BLOB_FILE)).unwrap(),
        fs::read(checkpoint_dir(&b).join(BLOB_FILE)).unwrap()
    );
}

fn domain(ckpt: &Checkpoint) -> &cspace::learner::DomainModel<f32> {
    ckpt.domain_model().unwrap()
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, ckpt) = trained(tmp.path());
    let loaded = Checkpoint::load(&checkpoint_dir(tmp.path())).unwrap();
    let (a, b) = (domain(&ckpt), domain(&loaded));
    for (x, y) in a.encoder.iter().chain(a.decoder.iter()).zip(b.encoder.iter().chain(b.decoder.iter())) {
        assert_eq!(x.name, y.name);
        let bits = |t: &cspace::net::NamedTensor<f32>| t.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x), bits(y));
    }
    assert_eq!(a.encoder_spec, b.encoder_spec);
    assert_eq!(a.prototypes, b.prototypes);
    assert_eq!(loaded.manifest, ckpt.manifest);
    assert_eq!(loaded.manifest.config, config);
}

#[test]
fn manifest_prototypes_hold_full_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, ckpt) = trained(tmp.path());
    let text = fs::read_to_string(checkpoint_dir(tmp.path()).join(MANIFEST_FILE)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let stored: Vec<Vec<f64>> = serde_json::from_value(v["prototypes"].clone()).unwrap();
    let live = domain(&ckpt).prototypes.coords();
    for (s, p) in stored.iter().zip(&live) {
        for (x, y) in s.iter().zip(p) {
            assert_eq!((*x as f32).to_bits(), y.to_bits());
            assert_eq!(*x, f64::from(*y));
        }
    }
}

#[test]
fn checkpoint_errors_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let dir = checkpoint_dir(tmp.path());
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
    let blob = fs::read(dir.join(BLOB_FILE)).unwrap();

    fs::write(dir.join(BLOB_FILE), &blob[..blob.len() - 4]).unwrap();
    assert!(matches!(Checkpoint::load(&dir), Err(CliError::CheckpointLength { .. })));
    fs::write(dir.join(BLOB_FILE), &blob).unwrap();

    let bumped = manifest.replacen(
        &format!("\"format_version\": {CHECKPOINT_VERSION}"),
        &format!("\"format_version\": {}", CHECKPOINT_VERSION + 1),
        1,
    );
    fs::write(dir.join(MANIFEST_FILE), bumped).unwrap();
    assert!(matches!(Checkpoint::load(&dir), Err(CliError::CheckpointVersion { .. })));

    fs::write(dir.join(MANIFEST_FILE), &manifest[..manifest.len() / 2]).unwrap();
    let err = Checkpoint::load(&dir).unwrap_err();
    assert!(matches!(err, CliError::CheckpointManifest { .. }));
    let o = cspace(&["eval", "--checkpoint", tmp.path().to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(err.exit_code()));
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn eval_report_matches_library_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, ckpt) = trained(tmp.path());
    let report = commands::eval(&ckpt, None).unwrap();
    for key in ["accuracy", "confusion", "distance_matrix", "distinctness", "consistency", "interpretability"] {
        assert!(report.get(key).is_some(), "{key} missing");
    }
    assert!(report["interpretability"]["mean_abs"].is_f64());
    assert!(report["consistency"]["passed"].is_boolean());
    let (_, test) = config.load_dataset().unwrap();
    let lib = accuracy(domain(&ckpt), &test).unwrap().accuracy;
    assert_eq!(report["accuracy"].as_f64().unwrap(), lib);
    assert_eq!(report["samples"].as_u64().unwrap() as usize, test.len());
}

fn write_idx(dir: &Path, count: usize, side: usize) {
    let mut images = vec![0, 0, 8, 3];
    for v in [count, side, side] {
        images.extend((v as u32).to_be_bytes());
    }
    let mut labels = vec![0, 0, 8, 1];
    labels.extend((count as u32).to_be_bytes());
    for i in 0..count {
        let digit = i % 10;
        labels.push(digit as u8);
        images.extend((0..side * side).map(|p| if p % 10 == digit { 255 } else { ((p * 7 + i) % 50) as u8 }));
    }
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("images-idx3-ubyte"), images).unwrap();
    fs::write(dir.join("labels-idx1-ubyte"), labels).unwrap();
}

#[test]
fn mnist_eval_marks_interpretability_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    let mnist = tmp.path().join("mnist");
    write_idx(&mnist, 300, 8);
    let mut config = RunConfig::preset(Preset::Mnist);
    config.dataset.mnist_dir = mnist;
    config.model.architecture = Architecture::Mlp;
    config.model.hidden = vec![16];
    config.train = TrainConfig { epochs: 2, batches_per_epoch: 8, batch_size: 16, ..config.train };
    config.output = tmp.path().join("run");
    let ckpt = commands::train(&config, &mut Vec::new()).unwrap();
    let report = commands::eval(&ckpt, None).unwrap();
    assert_eq!(report["interpretability"]["available"], serde_json::Value::Bool(false));
    assert_eq!(report["consistency"]["available"], serde_json::Value::Bool(false));
    assert!(report["accuracy"].is_f64());
}

#[test]
fn eval_rejects_a_mismatched_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, ckpt) = trained(tmp.path());
    let other = tmp.path().join("big.csd");
    let cfg = SyntheticConfig { count: 100, height: 10, width: 10, ..Default::default() };
    commands::gen_data(&cfg, &other, &mut Vec::new()).unwrap();
    let err = commands::eval(&ckpt, Some(other.to_str().unwrap())).unwrap_err();
    assert!(matches!(err, CliError::Mismatch(_)), "{err}");
}

#[test]
fn export_round_trips_through_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, ckpt) = trained(tmp.path());
    let path = tmp.path().join("features.csv");
    let rows = commands::export(&ckpt, None, &path).unwrap();
    let model = domain(&ckpt);
    let (_, test) = config.load_dataset().unwrap();
    let points = model.encode_dataset(&test).unwrap();
    let predicted = model.classify_points(&points).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sample_id,q_1,q_2,label,predicted");
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), i);
        let q: Vec<f32> = f[1..3].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(q, points[i]);
        assert_eq!(f[3].parse::<usize>().unwrap(), test.labels()[i]);
        assert_eq!(f[4].parse::<usize>().unwrap(), predicted[i]);
        n += 1;
    }
    assert_eq!(n, rows);
}

#[test]
fn decode_grid_writes_one_image_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let o = cspace(
        &["decode-grid", "--checkpoint", tmp.path().to_str().unwrap(), "--grid", "5x5", "--out", "g"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<PathBuf> = fs::read_dir(tmp.path().join("g")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 25);
    let img = fs::read(tmp.path().join("g/grid_r4_c4.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(img.len(), b"P5\n8 8\n255\n".len() + 64);
}

#[test]
fn baseline_trainers_produce_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    for trainer in [Trainer::Autoencoder, Trainer::Classifier] {
        let mut config = small_synthetic(&tmp.path().join(format!("{trainer:?}")));
        config.trainer = trainer;
        commands::train(&config, &mut Vec::new()).unwrap();
        let loaded = Checkpoint::load(&checkpoint_dir(&config.output)).unwrap();
        let report = commands::eval(&loaded, None).unwrap();
        assert!(report["accuracy"].is_f64());
        match (trainer, &loaded.model) {
            (Trainer::Classifier, Trained::Classifier(_)) => {
                assert_eq!(report["distinctness"]["available"], serde_json::Value::Bool(false));
                assert!(commands::export(&loaded, None, &tmp.path().join("x.csv")).is_err());
            }
            (Trainer::Autoencoder, Trained::Domain(_)) => assert!(report["distinctness"].is_f64()),
            _ => panic!("wrong model kind for {trainer:?}"),
        }
    }
}
