use hatesense::encoder::EncoderConfig;
use hatesense::gradcheck::{check_model, check_op, primitive_cases};
use hatesense::objectives::LossWeights;
use hatesense::sense::{ModelConfig, ModelMode, SenseModel};
use hatesense::text::Vocabulary;
use hatesense::ClassSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const SEEDS: u64 = 20;

#[test]
fn every_primitive_matches_finite_differences() {
    let mut covered = 0;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, inputs, f) in primitive_cases(&mut rng) {
            let worst = check_op(seed, &inputs, f).unwrap();
            assert!(worst.rel_err < TOL, "{name} seed {seed}: {worst:?}");
            covered += 1;
        }
    }
    assert!(covered >= 29 * SEEDS as usize);
}

fn tiny_model(seed: u64, mode: ModelMode) -> SenseModel {
    let tokens = ["hate", "nothate", "w1", "w2", "w3", "w4", "w5", "w6"];
    let vocab = Vocabulary::from_tokens(&tokens, 16).unwrap();
    let mut enc = EncoderConfig::new(vocab.len());
    enc.d_model = 8;
    enc.n_heads = 2;
    enc.n_layers = 1;
    enc.d_ff = 16;
    enc.max_len = 8;
    enc.seed = seed;
    let mut config = ModelConfig::new(enc, mode);
    config.d_hidden = 8;
    SenseModel::new(config, ClassSet::binary(), vocab).unwrap()
}

fn random_text(seed: u64) -> String {
    let words = ["w1", "w2", "w3", "w4", "w5", "w6"];
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    (0..5).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
}

fn check_full(mode: ModelMode) {
    for seed in 0..SEEDS {
        let text = random_text(seed);
        let label = (seed % 2) as usize;
        let mut model = tiny_model(seed, mode);
        let before = model.predict_text(&text).unwrap().assignment.map(|a| a.senses);
        let worst = check_model(&mut model, &text, label, &LossWeights::default()).unwrap();
        assert!(
            worst.rel_err < TOL,
            "{mode:?} seed {seed} param {}: {worst:?}",
            model.params().names()[worst.input]
        );
        // Parameters are restored after probing.
        let after = model.predict_text(&text).unwrap().assignment.map(|a| a.senses);
        assert_eq!(before, after);
    }
}

#[test]
fn full_sense_model_matches_finite_differences() {
    check_full(ModelMode::Sense);
}

#[test]
fn full_baseline_model_matches_finite_differences() {
    check_full(ModelMode::Baseline);
}

#[test]
fn soft_augment_matches_finite_differences() {
    for seed in 0..5 {
        let mut model = tiny_model(seed, ModelMode::Sense);
        let mut cfg = model.config().clone();
        cfg.soft_augment = true;
        model = SenseModel::new(cfg, model.classes().clone(), model.vocab().clone()).unwrap();
        let worst = check_model(&mut model, &random_text(seed), 0, &LossWeights::default()).unwrap();
        assert!(worst.rel_err < TOL, "seed {seed}: {worst:?}");
    }
}
