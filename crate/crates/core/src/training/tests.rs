use super::*;
use crate::dataset::{generate_synthetic, SyntheticGame, SyntheticSpec};
use crate::error::Error;
use crate::models::{Classifier, Modality, ModelConfig, Sample};
use crate::optim::AdamConfig;
use crate::text::Vocabulary;

fn corpus(n: usize, seed: u64) -> Vec<SyntheticGame> {
    generate_synthetic(&SyntheticSpec {
        n,
        seed,
        min_side: 8,
        max_side: 16,
        ..Default::default()
    })
    .unwrap()
}

fn examples(games: &[SyntheticGame], vocab: &Vocabulary) -> Examples {
    Examples {
        samples: games
            .iter()
            .map(|g| Sample {
                text: Some(vocab.encode(&g.record.description, 20)),
                image: Some(g.cover_tensor(8).unwrap()),
            })
            .collect(),
        labels: games.iter().map(|g| g.label).collect(),
    }
}

fn setup(modality: Modality) -> (Classifier, Examples, Examples) {
    let games = corpus(150, 3);
    let descriptions: Vec<&str> = games
        .iter()
        .map(|g| g.record.description.as_str())
        .collect();
    let vocab = Vocabulary::build(&descriptions, 1).unwrap();
    let config = ModelConfig {
        modality,
        vocab_size: vocab.size(),
        embed_dim: 8,
        hidden_size: 16,
        image_size: 8,
        conv_channels: vec![4],
        image_features: 16,
        ..Default::default()
    };
    let model = Classifier::new(config, 1).unwrap();
    (
        model,
        examples(&games[..120], &vocab),
        examples(&games[120..], &vocab),
    )
}

fn config(modality: Modality, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        adam: AdamConfig {
            lr: 0.01,
            ..Default::default()
        },
        seed: 9,
        modality,
        freeze_encoders: false,
        patience: 0,
    }
}

#[test]
fn fused_model_fits_tiny_corpus() {
    let (mut model, tr, val) = setup(Modality::Fused);
    let report = train(&mut model, &tr, Some(&val), &config(Modality::Fused, 30)).unwrap();
    assert_eq!(report.history.len(), 30);
    let first = &report.history[0];
    let last = report.history.last().unwrap();
    assert!(
        last.train_loss < first.train_loss / 4.0,
        "{first:?} {last:?}"
    );
    let (_, probs) = evaluate(&model, &tr, 32).unwrap();
    assert!(top_k_accuracy(&probs, &tr.labels, 1).unwrap() >= 0.95);
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (mut model, tr, _) = setup(Modality::Fused);
    let before = model.clone();
    let mut cfg = config(Modality::Fused, 3);
    cfg.adam.lr = 0.0;
    train(&mut model, &tr, None, &cfg).unwrap();
    for ((n, a), (_, b)) in before.named_params().iter().zip(model.named_params()) {
        assert_eq!(a.values(), b.values(), "{n}");
    }
}

#[test]
fn same_config_same_history() {
    let run = || {
        let (mut model, tr, val) = setup(Modality::Text);
        let report = train(&mut model, &tr, Some(&val), &config(Modality::Text, 4)).unwrap();
        (report, model)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
}

#[test]
fn best_validation_epoch_is_restored() {
    let (mut model, tr, val) = setup(Modality::Image);
    let mut cfg = config(Modality::Image, 12);
    cfg.adam.lr = 0.05;
    let report = train(&mut model, &tr, Some(&val), &cfg).unwrap();
    let best = report
        .history
        .iter()
        .min_by(|a, b| a.val_loss.unwrap().total_cmp(&b.val_loss.unwrap()))
        .unwrap();
    assert_eq!(report.best_epoch, best.epoch);
    let (loss, _) = evaluate(&model, &val, 7).unwrap();
    assert!((loss - best.val_loss.unwrap()).abs() < 1e-12);
}

#[test]
fn patience_stops_training() {
    let (mut model, tr, val) = setup(Modality::Image);
    let mut cfg = config(Modality::Image, 200);
    cfg.adam.lr = 0.05;
    cfg.patience = 2;
    let report = train(&mut model, &tr, Some(&val), &cfg).unwrap();
    assert!(report.stopped_early);
    assert_eq!(report.history.len(), report.best_epoch + 2);
}

#[test]
fn frozen_encoders_only_move_the_head() {
    let (mut model, tr, _) = setup(Modality::Fused);
    let before = model.clone();
    let mut cfg = config(Modality::Fused, 2);
    cfg.freeze_encoders = true;
    train(&mut model, &tr, None, &cfg).unwrap();
    for ((n, a), (_, b)) in before.named_params().iter().zip(model.named_params()) {
        if n.starts_with("head.") {
            assert_ne!(a.values(), b.values(), "{n}");
        } else {
            assert_eq!(a.values(), b.values(), "{n}");
        }
    }
}

#[test]
fn contract_errors() {
    let (mut model, tr, _) = setup(Modality::Fused);
    let empty = Examples::default();
    assert!(matches!(
        train(&mut model, &empty, None, &config(Modality::Fused, 1)),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        train(&mut model, &tr, None, &config(Modality::Text, 1)),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        train(&mut model, &tr, None, &config(Modality::Fused, 0)),
        Err(Error::Config(_))
    ));
}

#[test]
fn non_finite_loss_names_epoch_and_batch() {
    let (mut model, tr, _) = setup(Modality::Fused);
    let head = model.head().params()[0].1;
    let mut poisoned = head.values().to_vec();
    poisoned[3] = f64::NAN;
    let poisoned = crate::autodiff::Tensor::new(head.shape(), poisoned).unwrap();
    model.set_param("head.weight", &poisoned).unwrap();
    match train(&mut model, &tr, None, &config(Modality::Fused, 1)) {
        Err(Error::NonFiniteLoss { epoch: 1, batch: 1 }) => {}
        other => panic!("{other:?}"),
    }
}
