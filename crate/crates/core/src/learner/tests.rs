use super::*;
use crate::data::{synthetic_shapes, Dataset, SyntheticConfig};
use crate::geometry::{squared_distortion, PrototypeSet};
use crate::net::{build_mlp_decoder, build_mlp_encoder, init_params, NetworkSpec, Params};
use crate::rng::{self, Stream};
use approx::assert_abs_diff_eq;
use rand::Rng as _;

fn tiny_data(count: usize) -> Dataset<f64> {
    let cfg = SyntheticConfig { count, height: 6, width: 6, seed: 3, ..Default::default() };
    synthetic_shapes(&cfg).unwrap()
}

fn tiny_nets(data: &Dataset<f64>) -> (NetworkSpec, NetworkSpec) {
    (
        build_mlp_encoder(data.sample_shape(), &[12], 2).unwrap(),
        build_mlp_decoder(data.sample_shape(), &[12], 2).unwrap(),
    )
}

fn tiny_config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batches_per_epoch: 6, batch_size: 16, lr: 1e-3, seed: 11, ..TrainConfig::mnist_defaults() }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::mnist_defaults().validate().is_ok());
    for bad in [
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { mu: 1.5, ..TrainConfig::default() },
        TrainConfig { lr: 0.0, ..TrainConfig::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn fit_is_reproducible_and_gates_the_first_epoch() {
    let data = tiny_data(200);
    let (enc, dec) = tiny_nets(&data);
    let cfg = tiny_config(3);
    let a = fit(&data, &enc, &dec, &cfg).unwrap();
    let b = fit(&data, &enc, &dec, &cfg).unwrap();
    let lines = |r: &[EpochReport]| r.iter().map(EpochReport::to_json_line).collect::<Vec<_>>();
    assert_eq!(lines(&a.reports), lines(&b.reports));
    assert_eq!(a.model, b.model);

    let first = &a.reports[0];
    let w = cfg.loss;
    assert_abs_diff_eq!(first.loss, w.alpha * first.loss_r + w.lambda * first.loss_d, epsilon = 1e-9);
    let later = &a.reports[2];
    assert_abs_diff_eq!(
        later.loss,
        w.alpha * later.loss_r + w.beta * later.loss_c + w.lambda * later.loss_d,
        epsilon = 1e-9
    );
    for r in &a.reports {
        assert!(r.loss_r >= 0.0 && r.loss_c >= 0.0 && r.loss_d >= 0.0);
        assert!((0.0..=1.0).contains(&r.accuracy));
    }
}

#[test]
fn first_epoch_loss_matches_an_offline_recomputation() {
    let data = tiny_data(200);
    let (enc, dec) = tiny_nets(&data);
    // one batch per epoch: the logged epoch-1 loss is that of the untrained nets
    let cfg = TrainConfig { epochs: 1, batches_per_epoch: 1, ..tiny_config(1) };
    let out = fit(&data, &enc, &dec, &cfg).unwrap();

    let ep = init_params::<f64>(&enc, rng::derive_seed(cfg.seed, Stream::EncoderInit, 0)).unwrap();
    let dp = init_params::<f64>(&dec, rng::derive_seed(cfg.seed, Stream::DecoderInit, 0)).unwrap();
    let idx =
        &crate::data::batch_indices(data.len(), 1, cfg.batch_size, rng::derive_seed(cfg.seed, Stream::Batches, 1))
            .unwrap()[0];
    let x = data.gather(idx).unwrap();
    let q = crate::net::forward(&enc, &ep, &x, crate::net::Mode::Train).unwrap().into_output();
    let xhat = crate::net::forward(&dec, &dp, &q, crate::net::Mode::Train).unwrap().into_output();
    let (mut lr, mut ld) = (0.0, 0.0);
    for i in 0..idx.len() {
        let diff: f64 = x.row(i).iter().zip(xhat.row(i)).map(|(a, b)| (a - b) * (a - b)).sum();
        lr += diff / x.row_len() as f64;
        // every prototype sits at the origin, so each other-class distortion is |q|
        let sq: f64 = q.row(i).iter().map(|v| v * v).sum();
        ld += sq.powf(2.5) / 50.0;
    }
    let expected = (5.0 * lr + ld) / idx.len() as f64;
    assert_abs_diff_eq!(out.reports[0].loss, expected, epsilon = 1e-9);
}

#[test]
fn prototype_trajectory_replays_exactly() {
    let data = tiny_data(200);
    let (enc, dec) = tiny_nets(&data);
    let cfg = tiny_config(4);
    let out = fit_with(&data, &enc, &dec, &cfg, FitOptions { record_draws: true }, |_| {}).unwrap();
    let mut prev = vec![vec![0.0; 2]; 4];
    for r in &out.reports {
        let draw = r.draw.as_ref().unwrap();
        assert_eq!(draw.indices.len(), (cfg.batches_per_epoch * cfg.batch_size).min(data.len()));
        for j in 0..4 {
            let members: Vec<&Vec<f64>> =
                draw.encodings.iter().zip(&draw.labels).filter(|(_, &l)| l == j).map(|(q, _)| q).collect();
            let expected: Vec<f64> = if members.is_empty() {
                prev[j].clone()
            } else {
                let mean: Vec<f64> =
                    (0..2).map(|k| members.iter().map(|q| q[k]).sum::<f64>() / members.len() as f64).collect();
                if r.epoch == 1 {
                    mean
                } else {
                    (0..2).map(|k| cfg.mu * prev[j][k] + (1.0 - cfg.mu) * mean[k]).collect()
                }
            };
            for k in 0..2 {
                assert_abs_diff_eq!(r.prototypes[j][k], expected[k], epsilon = 1e-12);
            }
        }
        prev = r.prototypes.clone();
    }
}

#[test]
fn zero_classifier_weights_reproduce_the_autoencoder_baseline() {
    let data = tiny_data(200);
    let (enc, dec) = tiny_nets(&data);
    let cfg = TrainConfig { loss: LossWeights::new(5.0, 0.0, 0.0).unwrap(), ..tiny_config(4) };
    let joint = fit(&data, &enc, &dec, &cfg).unwrap();
    let ae = train_autoencoder_baseline(&data, &enc, &dec, &cfg).unwrap();
    for (a, b) in joint.reports.iter().zip(&ae.reports) {
        assert_abs_diff_eq!(a.loss, b.loss, epsilon = 1e-6);
    }
    assert_eq!(joint.model.encoder, ae.model.encoder);
}

#[test]
fn autoencoder_baseline_learns() {
    let data = tiny_data(400);
    let (enc, dec) = tiny_nets(&data);
    let cfg = TrainConfig { batches_per_epoch: 20, ..tiny_config(12) };
    let a = train_autoencoder_baseline(&data, &enc, &dec, &cfg).unwrap();
    let b = train_autoencoder_baseline(&data, &enc, &dec, &cfg).unwrap();
    assert_eq!(a.reports, b.reports);
    let lead: f64 = a.reports[..5].iter().map(|r| r.loss).sum();
    let trail: f64 = a.reports[a.reports.len() - 5..].iter().map(|r| r.loss).sum();
    assert!(trail < lead);

    let held =
        synthetic_shapes::<f64>(&SyntheticConfig { count: 200, height: 6, width: 6, seed: 99, ..Default::default() })
            .unwrap();
    let codes = a.model.encode_dataset(&held).unwrap();
    let recon = a.model.decode(&codes).unwrap();
    let mse = reconstruction_loss(held.samples(), recon.data()).unwrap();
    let mean = held.samples().iter().sum::<f64>() / held.samples().len() as f64;
    let var = held.samples().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / held.samples().len() as f64;
    assert!(mse < var, "mse {mse} vs variance {var}");
}

#[test]
fn classifier_baseline_outputs_and_chance_level() {
    let cfg = SyntheticConfig { count: 4000, height: 6, width: 6, seed: 5, ..Default::default() };
    let data = synthetic_shapes::<f64>(&cfg).unwrap();
    let enc = build_mlp_encoder(data.sample_shape(), &[12], 2).unwrap();
    let train = TrainConfig { epochs: 0, ..tiny_config(1) };
    // untrained network: evaluate the freshly initialized head directly
    let (spec, params) = classifier_network::<f64>(&enc, 4, train.seed).unwrap();
    let untrained = ClassifierOutcome { spec, params, reports: Vec::new() };
    for p in untrained.probabilities(&data).unwrap().iter().take(50) {
        assert_eq!(p.len(), 4);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }
    let mut hist = [0usize; 4];
    for &l in data.labels() {
        hist[l] += 1;
    }
    let (lo, hi) = (*hist.iter().min().unwrap(), *hist.iter().max().unwrap());
    assert!(hi - lo < data.len() / 10, "synthetic data is roughly balanced");

    let budget = TrainConfig { batches_per_epoch: 50, batch_size: 32, lr: 3e-3, ..tiny_config(30) };
    let trained = train_classifier_baseline(&data, &enc, &budget).unwrap();
    let acc = trained.accuracy(&data).unwrap();
    assert!(acc >= 0.95, "accuracy {acc} {:?}", trained.reports.last());
}

#[test]
fn untrained_classifier_is_near_chance_on_balanced_data() {
    // balanced labels that carry no information about the samples
    let props = SyntheticConfig::property_table();
    let n = 4000;
    let mut draw = rng::seeded(17);
    let samples: Vec<f64> = (0..n * 4).map(|_| draw.random_range(0.0..1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let data = Dataset::new(vec![4], samples, labels, props).unwrap();
    let enc = build_mlp_encoder(&[4], &[8], 2).unwrap();
    let (spec, params) = classifier_network::<f64>(&enc, 4, 1).unwrap();
    let acc = ClassifierOutcome { spec, params, reports: Vec::new() }.accuracy(&data).unwrap();
    assert!((acc - 0.25).abs() <= 0.05, "accuracy {acc}");
}

#[test]
fn mismatched_networks_are_rejected() {
    let data = tiny_data(50);
    let (enc, dec) = tiny_nets(&data);
    let wrong = build_mlp_encoder(data.sample_shape(), &[4], 3).unwrap();
    assert!(fit(&data, &wrong, &dec, &tiny_config(1)).is_err());
    let big_batch = TrainConfig { batch_size: 64, ..tiny_config(1) };
    assert!(fit(&data, &enc, &dec, &big_batch).is_err());
}

#[test]
fn runaway_training_aborts_with_a_diagnostic() {
    let data = tiny_data(100);
    let (enc, dec) = tiny_nets(&data);
    let cfg = TrainConfig { lr: 1e150, ..tiny_config(3) };
    match fit(&data, &enc, &dec, &cfg) {
        Err(crate::Error::NonFinite(msg)) => assert!(msg.contains("epoch"), "{msg}"),
        other => panic!("expected a non-finite abort, got {:?}", other.map(|o| o.reports)),
    }
}

fn objective_value(
    enc: &NetworkSpec,
    ep: &Params<f64>,
    dec: &NetworkSpec,
    dp: &Params<f64>,
    protos: &PrototypeSet<f64>,
    data: &Dataset<f64>,
    idx: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
) -> f64 {
    let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
    batch_objective(enc, ep, dec, dp, protos, &data.gather(idx).unwrap(), &labels, cfg, epoch).unwrap().loss
}

#[test]
fn composite_loss_gradient_matches_finite_differences() {
    let data = tiny_data(40);
    let (enc, dec) = tiny_nets(&data);
    let cfg = tiny_config(1);
    let protos =
        PrototypeSet::from_coords(&[vec![0.5, -0.2], vec![-0.4, 0.3], vec![0.1, 0.9], vec![-0.7, -0.6]]).unwrap();
    let idx: Vec<usize> = (0..6).collect();
    let labels: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
    for epoch in [1, 2] {
        let ep = init_params::<f64>(&enc, 1).unwrap();
        let dp = init_params::<f64>(&dec, 2).unwrap();
        let out =
            batch_objective(&enc, &ep, &dec, &dp, &protos, &data.gather(&idx).unwrap(), &labels, &cfg, epoch).unwrap();
        for (which, grads) in [(0, &out.encoder_grads), (1, &out.decoder_grads)] {
            for (l, layer) in grads.layers.iter().enumerate() {
                for (s, t) in layer.iter().enumerate() {
                    for k in (0..t.value.len()).step_by(7) {
                        let h = 1e-6;
                        let eval = |delta: f64| {
                            let (mut e2, mut d2) = (ep.clone(), dp.clone());
                            let target = if which == 0 { &mut e2 } else { &mut d2 };
                            target.layers[l][s].value.data_mut()[k] += delta;
                            objective_value(&enc, &e2, &dec, &d2, &protos, &data, &idx, &cfg, epoch)
                        };
                        let num = (eval(h) - eval(-h)) / (2.0 * h);
                        let ana = t.value.data()[k];
                        let rel = (num - ana).abs() / (num.abs() + ana.abs()).max(1e-6);
                        assert!(rel < 1e-4, "{} {k}: {ana} vs {num}", t.name);
                    }
                }
            }
        }
    }
}

#[test]
fn prototypes_only_change_between_epochs() {
    let data = tiny_data(200);
    let (enc, dec) = tiny_nets(&data);
    let cfg = tiny_config(3);
    let mut snapshots = Vec::new();
    let out =
        fit_with(&data, &enc, &dec, &cfg, FitOptions::default(), |r| snapshots.push(r.prototypes.clone())).unwrap();
    assert_eq!(snapshots.len(), 3);
    let last: Vec<Vec<f64>> = out.model.prototypes.coords();
    assert_eq!(&last, snapshots.last().unwrap());
    let d = squared_distortion(out.model.prototypes.get(0), out.model.prototypes.get(3)).unwrap();
    assert!(d > 0.0);
}
