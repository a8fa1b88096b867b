mod common;

use common::*;
use proptest::prelude::*;
use sm2c::net::{
    backward, backward_frozen, forward, load_checkpoint, poly_lr, predict_hard, read_checkpoint, save_checkpoint,
    sgd_step, softmax, softmax_ce, write_checkpoint, Architecture, Gradients, NetParams, Role,
};
use sm2c::{Image, RngState};

fn random_net(classes: usize, rng: &mut RngState) -> NetParams {
    let arch = Architecture::with_widths(2 + rng.below(4), 2 + rng.below(5), classes);
    let mut p = NetParams::init(arch, Role::Teacher, rng);
    // Non-zero biases move pre-activations away from exact zeros.
    for v in p.values.iter_mut() {
        if *v == 0.0 {
            *v = rng.uniform(-0.1, 0.1);
        }
    }
    p
}

fn analytic_ce_grad(params: &NetParams, img: &Image, target: &sm2c::LabelMap) -> (f64, Gradients) {
    let (logits, cache) = forward(params, img).unwrap();
    let (loss, dlogits) = softmax_ce(&logits, target).unwrap();
    (loss, backward(params, &cache, &dlogits).unwrap())
}

#[test]
fn library_forward_matches_reference() {
    let mut rng = RngState::new(1);
    for _ in 0..20 {
        let classes = 2 + rng.below(3);
        let net = random_net(classes, &mut rng);
        let (img, _) = random_tile(3 + rng.below(6), 3 + rng.below(6), classes as u8, &mut rng);
        let (logits, _) = forward(&net, &img).unwrap();
        let reference = reference_logits(&net, &img);
        for (a, b) in logits.data.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn default_network_matches_reference() {
    let mut rng = RngState::new(2);
    let net = NetParams::init(Architecture::default_for(4), Role::Student, &mut rng);
    assert_eq!(net.len(), 1316);
    let (img, _) = random_tile(20, 17, 4, &mut rng);
    let (logits, _) = forward(&net, &img).unwrap();
    for (a, b) in logits.data.iter().zip(&reference_logits(&net, &img)) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = RngState::new(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let classes = 2 + rng.below(3);
        let net = random_net(classes, &mut rng);
        let (img, target) = random_tile(4 + rng.below(4), 4 + rng.below(4), classes as u8, &mut rng);
        let (loss, grad) = analytic_ce_grad(&net, &img, &target);
        assert!((loss - reference_ce(&net, &img, &target)).abs() < 1e-12);
        let f = |x: &[f64]| {
            let p = NetParams {
                values: x.to_vec(),
                ..net.clone()
            };
            reference_ce(&p, &img, &target)
        };
        for i in 0..net.len() {
            let numeric = central_difference(f, &net.values, i, 1e-5);
            worst = worst.max(rel_err(grad.values[i], numeric));
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn uniform_logits_give_log_class_count() {
    let net = NetParams::zeros(Architecture::default_for(4), Role::Teacher);
    let (img, target) = random_tile(8, 8, 4, &mut RngState::new(4));
    let (logits, _) = forward(&net, &img).unwrap();
    let (loss, _) = softmax_ce(&logits, &target).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);
    assert!((loss - 1.3862943611198906).abs() < 1e-12);
}

#[test]
fn frozen_layers_get_zero_gradient() {
    let mut rng = RngState::new(5);
    let net = random_net(3, &mut rng);
    let (img, target) = random_tile(6, 6, 3, &mut rng);
    let (logits, cache) = forward(&net, &img).unwrap();
    let (_, d) = softmax_ce(&logits, &target).unwrap();
    let full = backward(&net, &cache, &d).unwrap();
    let ranges = net.arch.layer_ranges();
    for frozen in [vec![0], vec![1], vec![0, 1], vec![2]] {
        let g = backward_frozen(&net, &cache, &d, &frozen).unwrap();
        for (l, r) in ranges.iter().enumerate() {
            for i in r.clone() {
                if frozen.contains(&l) {
                    assert_eq!(g.values[i], 0.0);
                } else {
                    assert_eq!(g.values[i], full.values[i]);
                }
            }
        }
    }
}

#[test]
fn optimiser_examples() {
    let arch = Architecture::with_widths(1, 1, 2);
    let n = arch.param_count();
    let p = NetParams {
        values: vec![1.0; n],
        ..NetParams::zeros(arch, Role::Student)
    };
    let g = Gradients {
        values: (0..n).map(|i| i as f64).collect(),
    };
    let out = sgd_step(&p, &g, 0.5).unwrap();
    for (i, v) in out.values.iter().enumerate() {
        assert_eq!(*v, 1.0 - 0.5 * i as f64);
    }
    assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
    assert!(sgd_step(&p, &Gradients::zeros(n + 1), 0.1).is_err());

    assert_eq!(poly_lr(0, 100, 0.01, 0.9).unwrap(), 0.01);
    assert_eq!(poly_lr(100, 100, 0.01, 0.9).unwrap(), 0.0);
    let half = poly_lr(50, 100, 0.01, 0.9).unwrap();
    assert!((half - 0.01 * 0.5f64.powf(0.9)).abs() < 1e-15);
    assert!((half - 0.005359).abs() < 1e-6);
    assert!(poly_lr(101, 100, 0.01, 0.9).is_err());
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let mut rng = RngState::new(6);
    let net = random_net(4, &mut rng).with_role(Role::Student);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, net);
    assert_eq!(std::fs::read(&path).unwrap(), write_checkpoint(&net));

    let mut bytes = write_checkpoint(&net);
    bytes[0] ^= 0xff;
    assert!(read_checkpoint(&bytes).is_err());
    let bytes = write_checkpoint(&net);
    assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    assert!(load_checkpoint(&dir.path().join("missing.ckpt")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let net = random_net(3, &mut rng);
        let (img, _) = random_tile(5, 5, 3, &mut rng);
        let (logits, _) = forward(&net, &img).unwrap();
        let probs = softmax(&logits);
        for px in probs.data.chunks_exact(3) {
            prop_assert!(px.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_logit_offset_keeps_predictions(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let mut rng = RngState::new(seed);
        let net = random_net(4, &mut rng);
        let (img, _) = random_tile(6, 7, 4, &mut rng);
        let mut shifted = net.clone();
        let last = net.arch.layer_ranges().last().unwrap().clone();
        for v in &mut shifted.values[last.end - 4..last.end] {
            *v += shift;
        }
        prop_assert_eq!(predict_hard(&net, &img).unwrap(), predict_hard(&shifted, &img).unwrap());
    }

    #[test]
    fn loss_is_non_negative(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let net = random_net(2, &mut rng);
        let (img, target) = random_tile(5, 4, 2, &mut rng);
        let (loss, grad) = analytic_ce_grad(&net, &img, &target);
        prop_assert!(loss >= 0.0 && loss.is_finite());
        prop_assert!(grad.is_finite());
    }
}
