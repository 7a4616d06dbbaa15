use attnrec::data::{synth_clips, synth_generate, FeatureCubeClip, FrameView, Split, SynthConfig};
use attnrec::model::{ModelConfig, ModelKind, ModelParams, Network, ParamSet, RegressionParams};
use attnrec::objective::LossConfig;
use attnrec::optim::AdamConfig;
use attnrec::pipeline::{
    attention_maps, evaluate, evaluate_manifest, frozen_gradient, reoptimize_glimpse,
    run_baseline_forward, train, train_manifest, BlockConfig, GlimpseConfig, TrainConfig,
};
use attnrec::rng::Rng;
use attnrec::tensor::Tensor;
use attnrec::Error;

fn small_model(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        grid: 3,
        feat_dim: 4,
        hidden: 8,
        layers: 2,
        classes: 3,
        steps: 6,
        dropout: 0.0,
    }
}

fn small_data(train_clips: usize, sigma: f64) -> (Vec<FeatureCubeClip>, Vec<FeatureCubeClip>) {
    let config = SynthConfig {
        grid: 3,
        feat_dim: 4,
        classes: 3,
        clip_len: 8,
        train_clips,
        test_clips: 6,
        noise_sigma: sigma,
        seed: 9,
    };
    let (_, clips) = synth_clips(&config).unwrap();
    let pick = |s: Split| {
        clips
            .iter()
            .filter(|c| c.split == s)
            .map(|c| c.clip.clone())
            .collect()
    };
    (pick(Split::Train), pick(Split::Test))
}

fn small_training() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 4,
        loss: LossConfig::new(1.0, 1e-5),
        adam: AdamConfig::with_alpha(1e-2),
        blocks: BlockConfig {
            block_len: 6,
            stride: 1,
            frame_step: 1,
        },
        seed: 4,
        max_updates: None,
        track_train_accuracy: false,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let (data, _) = small_data(6, 0.3);
    for kind in ModelKind::ALL {
        let net = Network::init(small_model(kind), &mut Rng::new(1)).unwrap();
        let config = TrainConfig {
            adam: AdamConfig::with_alpha(0.0),
            ..small_training()
        };
        let out = train(&data, net.clone(), &config).unwrap();
        assert_eq!(out.network, net, "{kind}");
        assert!(out.optimizer.step_count > 0);
    }
}

#[test]
fn same_seed_same_curve_different_seed_differs() {
    let (data, _) = small_data(6, 0.3);
    let model = ModelConfig {
        dropout: 0.5,
        ..small_model(ModelKind::Attention)
    };
    let run = |seed| {
        let net = Network::init(model, &mut Rng::new(2)).unwrap();
        let config = TrainConfig {
            seed,
            ..small_training()
        };
        let out = train(&data, net, &config).unwrap();
        out.history.iter().map(|e| e.mean_loss).collect::<Vec<_>>()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn small_set_loss_falls_and_is_memorized() {
    let (data, _) = small_data(8, 0.2);
    let net = Network::init(small_model(ModelKind::Attention), &mut Rng::new(3)).unwrap();
    let config = TrainConfig {
        epochs: 200,
        batch_size: 8,
        max_updates: Some(200),
        track_train_accuracy: true,
        loss: LossConfig::new(0.0, 1e-5),
        blocks: BlockConfig {
            block_len: 6,
            stride: 2,
            frame_step: 1,
        },
        ..small_training()
    };
    let out = train(&data, net, &config).unwrap();
    let first: Vec<f64> = out.history[..5].iter().map(|e| e.mean_loss).collect();
    assert!(first.windows(2).all(|w| w[1] < w[0]), "{first:?}");
    let hit = out.history.iter().find(|e| e.train_accuracy == Some(1.0));
    assert!(hit.is_some_and(|e| e.updates <= 200));
    let last = out.history.last().unwrap();
    assert!(last.updates <= 200);

    let report = evaluate(&data, &out.network, &config.blocks).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.mean_average_precision, Some(1.0));
}

#[test]
fn max_updates_stops_mid_epoch() {
    let (data, _) = small_data(6, 0.3);
    let net = Network::init(small_model(ModelKind::AvgPool), &mut Rng::new(1)).unwrap();
    let config = TrainConfig {
        epochs: 10,
        batch_size: 2,
        max_updates: Some(5),
        ..small_training()
    };
    let out = train(&data, net, &config).unwrap();
    assert_eq!(out.optimizer.step_count, 5);
    assert_eq!(out.history.last().unwrap().updates, 5);
}

#[test]
fn training_errors() {
    let (data, _) = small_data(3, 0.3);
    let net = Network::init(small_model(ModelKind::Attention), &mut Rng::new(1)).unwrap();
    let empty = train(&[], net.clone(), &small_training());
    assert!(matches!(empty, Err(Error::Config(_))));
    let zero_epochs = TrainConfig {
        epochs: 0,
        ..small_training()
    };
    assert!(matches!(
        train(&data, net.clone(), &zero_epochs),
        Err(Error::Config(_))
    ));
    let wrong_len = TrainConfig {
        blocks: BlockConfig::default(),
        ..small_training()
    };
    assert!(matches!(
        train(&data, net, &wrong_len),
        Err(Error::Config(_))
    ));
}

#[test]
fn multi_label_clips_train_on_every_label() {
    let (mut data, _) = small_data(3, 0.3);
    data[0].labels = vec![0, 2];
    let net = Network::init(small_model(ModelKind::MaxPool), &mut Rng::new(1)).unwrap();
    let config = TrainConfig {
        epochs: 1,
        batch_size: 1,
        blocks: BlockConfig {
            block_len: 6,
            stride: 2,
            frame_step: 1,
        },
        ..small_training()
    };
    // 8 frames, 6-frame blocks at stride 2: two blocks per clip and label.
    let out = train(&data, net, &config).unwrap();
    assert_eq!(out.optimizer.step_count, 2 * 4);
}

#[test]
fn uniform_predictions_score_one_over_c() {
    let config = ModelConfig {
        kind: ModelKind::SoftmaxRegression,
        ..small_model(ModelKind::SoftmaxRegression)
    };
    let net = Network::Regression(RegressionParams::zeros(config).unwrap());
    let blocks = small_training().blocks;
    let clip = |labels: Vec<usize>| {
        let data = vec![0.5; 6 * 9 * 4];
        FeatureCubeClip::new(Tensor::from_vec(&[6, 3, 3, 4], data).unwrap(), labels, "u").unwrap()
    };
    let hit = evaluate(&[clip(vec![0])], &net, &blocks).unwrap();
    assert!(hit.scores[0].iter().all(|&s| (s - 1.0 / 3.0).abs() < 1e-15));
    assert_eq!(hit.accuracy, 1.0);
    assert!(hit.attention.is_none());
    let miss = evaluate(&[clip(vec![2])], &net, &blocks).unwrap();
    assert_eq!(miss.accuracy, 0.0);
    assert_eq!(miss.per_class_ap[0], None);
    assert_eq!(miss.per_class_ap[2], Some(1.0));
}

#[test]
fn attention_statistics_cover_every_block() {
    let (_, test) = small_data(3, 0.3);
    let net = Network::init(small_model(ModelKind::Attention), &mut Rng::new(5)).unwrap();
    let blocks = BlockConfig {
        block_len: 6,
        stride: 1,
        frame_step: 1,
    };
    let report = evaluate(&test, &net, &blocks).unwrap();
    let stats = report.attention.unwrap();
    assert_eq!(stats.blocks, test.len() * 3);
    assert!((stats.region_mass.iter().sum::<f64>() - 6.0).abs() < 1e-9);
    assert_eq!(stats.step_entropy.len(), 6);
    assert!(stats
        .step_entropy
        .iter()
        .all(|&e| e >= 0.0 && e <= 9f64.ln() + 1e-12));
    let maps = attention_maps(&test[0], &net, &blocks).unwrap();
    assert_eq!(maps.len(), 3);
    assert_eq!(maps[0].len(), 6);
}

#[test]
fn baseline_forward_checks_mode() {
    let mut rng = Rng::new(6);
    let frames: Vec<f64> = (0..6 * 9 * 4).map(|_| rng.normal()).collect();
    let view = FrameView::new(&frames, 6, 9, 4).unwrap();
    let avg = Network::init(small_model(ModelKind::AvgPool), &mut rng).unwrap();
    assert_eq!(
        run_baseline_forward(&view, &avg, ModelKind::AvgPool)
            .unwrap()
            .len(),
        6
    );
    assert!(matches!(
        run_baseline_forward(&view, &avg, ModelKind::MaxPool),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        run_baseline_forward(&view, &avg, ModelKind::Attention),
        Err(Error::Contract(_))
    ));

    // Identical, exactly representable slices: both poolings return the slice.
    let slice: Vec<f64> = (0..4).map(|_| rng.below(16) as f64 * 0.25 - 2.0).collect();
    let same: Vec<f64> = (0..6 * 9).flat_map(|_| slice.clone()).collect();
    let view = FrameView::new(&same, 6, 9, 4).unwrap();
    let Network::Recurrent(p) = &avg else {
        unreachable!()
    };
    let max = Network::Recurrent(p.rekind(ModelKind::MaxPool).unwrap());
    assert_eq!(
        run_baseline_forward(&view, &avg, ModelKind::AvgPool).unwrap(),
        run_baseline_forward(&view, &max, ModelKind::MaxPool).unwrap()
    );

    let regression = Network::Regression(
        RegressionParams::zeros(small_model(ModelKind::SoftmaxRegression)).unwrap(),
    );
    let out = run_baseline_forward(&view, &regression, ModelKind::SoftmaxRegression).unwrap();
    assert!(out.iter().flatten().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn glimpse_with_zero_steps_changes_nothing() {
    let (data, _) = small_data(3, 0.3);
    let params = ModelParams::init(small_model(ModelKind::Attention), &mut Rng::new(8)).unwrap();
    let config = GlimpseConfig {
        steps: 0,
        blocks: small_training().blocks,
        ..GlimpseConfig::default()
    };
    let out = reoptimize_glimpse(&params, &data[0], &config).unwrap();
    assert_eq!(out.params, params);
    assert_eq!(out.losses.len(), 1);
    assert_eq!(out.maps_before, out.maps_after);
}

#[test]
fn glimpse_moves_only_the_location_softmax() {
    let (data, _) = small_data(3, 0.3);
    let params = ModelParams::init(small_model(ModelKind::Attention), &mut Rng::new(8)).unwrap();
    let config = GlimpseConfig {
        steps: 15,
        blocks: small_training().blocks,
        ..GlimpseConfig::default()
    };
    let (grad, _) = frozen_gradient(&params, &data[0], &config).unwrap();
    for (name, t) in grad.tensor_names().iter().zip(grad.tensors()) {
        if !name.starts_with("attn") {
            assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
    let out = reoptimize_glimpse(&params, &data[0], &config).unwrap();
    assert_eq!(out.losses.len(), 16);
    assert!(out.losses.last().unwrap() < &out.losses[0]);
    let mut a = out.params.clone();
    let mut b = params.clone();
    assert_ne!(a.attn, b.attn);
    a.attn = None;
    b.attn = None;
    assert_eq!(a, b);

    let reinit = GlimpseConfig {
        steps: 0,
        reinit_seed: Some(1),
        ..config
    };
    let out = reoptimize_glimpse(&params, &data[0], &reinit).unwrap();
    let (old, new) = (
        params.attn.as_ref().unwrap(),
        out.params.attn.as_ref().unwrap(),
    );
    let lo = old
        .weight
        .data()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = old
        .weight
        .data()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_ne!(old, new);
    assert!(new.weight.data().iter().all(|&w| (lo..=hi).contains(&w)));

    let pooled = params.rekind(ModelKind::AvgPool).unwrap();
    assert!(matches!(
        reoptimize_glimpse(&pooled, &data[0], &config),
        Err(Error::Contract(_))
    ));
}

#[test]
fn training_is_independent_of_thread_count() {
    let (data, _) = small_data(4, 0.3);
    let net = Network::init(small_model(ModelKind::Attention), &mut Rng::new(1)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let config = TrainConfig {
        epochs: 1,
        batch_size: 4,
        blocks: BlockConfig {
            block_len: 6,
            stride: 100,
            frame_step: 1,
        },
        ..small_training()
    };
    let a = pool.install(|| train(&data, net.clone(), &config).unwrap().network);
    let b = train(&data, net.clone(), &config).unwrap().network;
    assert_eq!(a, b);
}

#[test]
fn manifest_round_trip_through_training_and_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthConfig {
        grid: 3,
        feat_dim: 4,
        classes: 3,
        clip_len: 6,
        train_clips: 6,
        test_clips: 3,
        noise_sigma: 0.3,
        seed: 2,
    };
    let manifest = synth_generate(&synth, dir.path()).unwrap();
    let net = Network::init(small_model(ModelKind::Attention), &mut Rng::new(1)).unwrap();
    let out = train_manifest(&manifest, net, &small_training()).unwrap();
    let report = evaluate_manifest(&manifest, &out.network, &small_training().blocks).unwrap();
    assert_eq!(report.scores.len(), 3);
    assert_eq!(report.clip_ids, vec!["test_0000", "test_0001", "test_0002"]);

    let wrong = Network::init(
        ModelConfig {
            classes: 4,
            ..small_model(ModelKind::Attention)
        },
        &mut Rng::new(1),
    )
    .unwrap();
    assert!(matches!(
        train_manifest(&manifest, wrong, &small_training()),
        Err(Error::Config(_))
    ));
}
