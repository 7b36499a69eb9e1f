use super::*;
use crate::dataprep::{synth_fleet, Normalizer, SynthParams};
use crate::numeric::{finite_difference_coords, relative_error, RegularizationSpec, SeededRng};
use crate::seqmodel::{Channel, ModelConfig, MtlModel, StlModel};

fn fleet_samples(n_cells: usize, config: &ModelConfig) -> (Normalizer, Vec<TrainingSample>) {
    let params = SynthParams::default();
    let fleet = synth_fleet(n_cells, 4, &params).unwrap();
    let cells: Vec<_> = fleet.into_iter().map(|c| c.series).collect();
    let norm = params.normalizer();
    (
        norm,
        build_fleet_samples(&cells, &norm, config, SAMPLE_STRIDE_CYCLES).unwrap(),
    )
}

/// Samples whose targets run off the end of a short series, so masks are partial.
fn short_samples(config: &ModelConfig) -> Vec<TrainingSample> {
    let mut rng = SeededRng::new(77);
    let last = 260;
    let soh_c: Vec<f64> = (0..=last)
        .map(|c| 1.0 - 2e-4 * c as f64 + 0.002 * rng.normal())
        .collect();
    let soh_r: Vec<f64> = (0..=last)
        .map(|c| 1.0 + 3e-4 * c as f64 + 0.002 * rng.normal())
        .collect();
    [100, 140, 180, 220]
        .iter()
        .map(|&p| {
            sample_at(&soh_c, &soh_r, "short", p, config)
                .unwrap()
                .unwrap()
        })
        .collect()
}

#[test]
fn stage3_gradient_matches_finite_differences() {
    let config = mini_config();
    let norm = Normalizer::new(1.85, 50.0).unwrap();
    let model = MtlModel::new(config, norm, RegularizationSpec::default(), 2024).unwrap();
    let samples = short_samples(&config);
    assert!(samples
        .iter()
        .any(|s| s.valid_targets() < config.output_len));

    let weights = [1.0, 1.0];
    let (_, analytic) = objective_grad(&model, &samples, weights, ParamSubset::All).unwrap();
    let flat = model.params_flat();
    let mut coords: Vec<usize> = (0..flat.len()).collect();
    SeededRng::new(5).shuffle(&mut coords);
    coords.truncate(600);

    let mut probe = model.clone();
    let mut loss = |p: &[f64]| {
        probe.set_params_flat(p);
        objective(&probe, &samples, weights, ParamSubset::All)
    };
    let numeric = finite_difference_coords(&mut loss, &flat, 1e-6, coords.iter().copied()).unwrap();
    let worst = coords
        .iter()
        .zip(&numeric)
        .map(|(&i, &n)| relative_error(analytic[i], n, 1e-6))
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn stage3_loss_is_additive() {
    let config = mini_config();
    let model = MtlModel::new(
        config,
        Normalizer::new(1.85, 50.0).unwrap(),
        RegularizationSpec::default(),
        1,
    )
    .unwrap();
    let samples = short_samples(&config);
    let total = objective(&model, &samples, [1.0, 1.0], ParamSubset::All).unwrap();
    let cap = objective(&model, &samples, [1.0, 0.0], ParamSubset::All).unwrap();
    let res = objective(&model, &samples, [0.0, 1.0], ParamSubset::All).unwrap();
    let penalty =
        crate::numeric::regularization(&model.params_flat(), &RegularizationSpec::default())
            .unwrap()
            .0;
    assert!((total - (cap + res - penalty)).abs() < 1e-12);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let config = mini_config();
    let (norm, samples) = fleet_samples(6, &config);
    let mut model = MtlModel::new(config, norm, RegularizationSpec::default(), 3).unwrap();
    let before = model.clone();
    let stage = StageConfig::new(1, 0.0, 3, 8, [1.0, 1.0], ParamSubset::All);
    let out = train_stage(
        &mut model,
        &samples[..30],
        &samples[30..],
        &stage,
        1,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(model, before);
    assert_eq!(out.epochs_run, 3);
    assert!(out
        .history
        .windows(2)
        .all(|w| w[0].val_loss == w[1].val_loss));
}

#[test]
fn stages_route_to_their_subsets() {
    let config = mini_config();
    let (norm, samples) = fleet_samples(6, &config);
    let mut model = MtlModel::new(config, norm, RegularizationSpec::default(), 3).unwrap();
    let mut schedule = Schedule::mtl_desk();
    for s in &mut schedule.stages {
        s.max_epochs = 2;
        s.batch_size = 8;
    }
    let before = model.clone();
    let report = train_multistage(
        &mut model,
        &samples[..30],
        &samples[30..],
        &schedule,
        11,
        &mut |_| {},
    )
    .unwrap();
    let blocks: Vec<Vec<String>> = report
        .stages
        .iter()
        .map(|s| s.changed_blocks.clone())
        .collect();
    assert_eq!(blocks[0], vec!["encoder", "decoder_cap"]);
    assert_eq!(blocks[1], vec!["decoder_res"]);
    assert_eq!(blocks[2], vec!["encoder", "decoder_cap", "decoder_res"]);
    assert_ne!(model, before);

    // Stage 2 on its own leaves encoder and capacity decoder bit-identical.
    let mut m2 = before.clone();
    train_stage(
        &mut m2,
        &samples[..30],
        &samples[30..],
        &schedule.stages[1],
        11,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(m2.params.encoder, before.params.encoder);
    assert_eq!(m2.params.cap, before.params.cap);
    assert_ne!(m2.params.res, before.params.res);
}

#[test]
fn early_stopping_returns_best_snapshot() {
    let config = mini_config();
    let (norm, samples) = fleet_samples(6, &config);
    let mut model = MtlModel::new(config, norm, RegularizationSpec::default(), 8).unwrap();
    // A large step size makes validation loss wander, so the last epoch is
    // rarely the best one.
    let mut stage = StageConfig::new(1, 0.05, 40, 4, [1.0, 1.0], ParamSubset::All);
    stage.patience = 3;
    let (train, val) = samples.split_at(30);
    let out = train_stage(&mut model, train, val, &stage, 2, &mut |_| {}).unwrap();
    assert!(out.epochs_run <= out.best_epoch + stage.patience);
    let mut val_loss = 0.0;
    for s in val {
        val_loss += model.sample_loss(s, stage.loss_weights, None).unwrap();
    }
    assert_eq!(val_loss / val.len() as f64, out.best_val);
    if out.best_epoch > 0 {
        assert_eq!(out.history[out.best_epoch - 1].val_loss, out.best_val);
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let config = mini_config();
    let (norm, samples) = fleet_samples(6, &config);
    let (train, val) = samples.split_at(30);
    let run = || {
        let mut m = MtlModel::new(config, norm, RegularizationSpec::default(), 21).unwrap();
        let mut schedule = Schedule::mtl_desk();
        for s in &mut schedule.stages {
            s.max_epochs = 8;
            s.batch_size = 8;
        }
        let r = train_multistage(&mut m, train, val, &schedule, 5, &mut |_| {}).unwrap();
        (m, r)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let first = &ra.stages[0].outcome.history[0];
    assert!(ra.stages[0].outcome.best_val < first.val_loss + 1e-12);
}

#[test]
fn stl_trains_all_parameters() {
    let config = mini_config();
    let (norm, samples) = fleet_samples(6, &config);
    let mut m = StlModel::new(
        config,
        Channel::Resistance,
        norm,
        RegularizationSpec::default(),
        4,
    )
    .unwrap();
    let mut schedule = Schedule::stl_desk(Channel::Resistance);
    schedule.stages[0].max_epochs = 2;
    let r = train_stl(
        &mut m,
        &samples[..30],
        &samples[30..],
        &schedule,
        1,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(r.stages[0].changed_blocks, vec!["encoder", "decoder"]);
    let bad = Schedule {
        stages: vec![StageConfig::new(
            1,
            1e-3,
            1,
            8,
            [0.0, 1.0],
            ParamSubset::ResDecoder,
        )],
    };
    assert!(train_stl(&mut m, &samples[..30], &samples[30..], &bad, 1, &mut |_| {}).is_err());
}

#[test]
fn reference_schedule_matches_published_table() {
    let s = Schedule::mtl_reference();
    let rows: Vec<(f64, usize, usize, [f64; 2])> = s
        .stages
        .iter()
        .map(|c| (c.lr, c.max_epochs, c.batch_size, c.loss_weights))
        .collect();
    assert_eq!(
        rows,
        vec![
            (1e-4, 450, 384, [1.0, 0.0]),
            (1e-4, 450, 384, [0.0, 1.0]),
            (1e-5, 300, 512, [1.0, 1.0])
        ]
    );
    assert!(s.stages.iter().all(|c| c.patience == 32));
    let stl = Schedule::stl_reference(Channel::Capacity);
    assert_eq!(
        (
            stl.stages[0].lr,
            stl.stages[0].max_epochs,
            stl.stages[0].batch_size
        ),
        (1e-4, 450, 384)
    );
    assert!(s.validate().is_ok());
}

#[test]
fn invalid_stage_rejected() {
    let mut s = StageConfig::new(1, 1e-3, 1, 8, [0.0, 0.0], ParamSubset::All);
    assert!(s.validate().is_err());
    s.loss_weights = [1.0, 0.0];
    s.batch_size = 0;
    assert!(s.validate().is_err());
}

#[test]
fn history_csv_layout() {
    let mut buf = Vec::new();
    write_history_csv(
        &mut buf,
        &[HistoryRow {
            epoch: 1,
            stage: 2,
            train_loss: 0.5,
            val_loss: 0.25,
            lr: 1e-4,
        }],
    )
    .unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,stage,train_loss,val_loss,lr\n1,2,0.5,0.25,0.0001\n"
    );
}
