mod common;

use common::*;
use proptest::prelude::*;
use sm2c::augment::{
    compose_mask, extract_class_mask, jitter_donor, multi_class_mix, replay, scaling_up_concat, sm2c, sm2c_traced,
    AffineParams, MixDonor, Mixed, Sm2cConfig,
};
use sm2c::preprocess::{normalize_intensity, resize, standard_augment, ResizeMode};
use sm2c::{BinaryMask, Image, LabelMap, RngState};

fn config_strategy() -> impl Strategy<Value = Sm2cConfig> {
    (
        prop::sample::select(vec![vec![], vec![1u8], vec![2], vec![1, 2], vec![2, 3], vec![1, 2, 3]]),
        1usize..=4,
        1usize..=3,
    )
        .prop_map(|(parts, sigma, subset)| {
            let sigma = if parts.contains(&2) { sigma } else { 1 };
            let mut cfg = Sm2cConfig::from_parts(&parts, sigma).unwrap();
            cfg.class_subset_max = subset;
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pipeline_laws_hold(
        cfg in config_strategy(),
        h in 3usize..12,
        w in 3usize..12,
        classes in 2u8..6,
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let batch = random_batch(h, w, classes, &mut rng);
        let (mixed, trace) = sm2c_traced(&batch, &cfg, &mut rng).unwrap();
        if let Err(e) = check_sm2c_laws(&batch, &cfg, &mixed, &trace) {
            prop_assert!(false, "{}", e);
        }
        prop_assert_eq!(replay(&batch, &cfg, &trace).unwrap(), mixed);
    }

    #[test]
    fn sigma_one_without_jitter_is_plain_concat(
        h in 2usize..10,
        w in 2usize..10,
        with_mix_toggle in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let batch = random_batch(h, w, 4, &mut rng);
        let parts: &[u8] = if with_mix_toggle { &[1, 2] } else { &[1] };
        let cfg = Sm2cConfig::from_parts(parts, 1).unwrap();
        let Mixed::Concatenated(img, lbl) = sm2c(&batch, &cfg, &mut rng).unwrap() else {
            panic!("concat enabled");
        };
        let (ci, cl) = scaling_up_concat(&batch).unwrap();
        prop_assert!(img.data().iter().zip(ci.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(lbl, cl);
    }

    #[test]
    fn concat_matches_reference_layout(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let batch = random_batch(h.max(2), w.max(2), 3, &mut rng);
        let (h, w) = batch[0].0.dims();
        let (img, lbl) = scaling_up_concat(&batch).unwrap();
        let tiles: Vec<_> = batch.iter().map(|(i, l)| (i.data().to_vec(), l.data().to_vec())).collect();
        let (ri, rl) = reference_concat(&tiles, h, w);
        prop_assert_eq!(img.data(), &ri[..]);
        prop_assert_eq!(lbl.data(), &rl[..]);
    }

    #[test]
    fn identical_seeds_give_identical_output(cfg in config_strategy(), seed in any::<u64>()) {
        let batch = random_batch(8, 8, 4, &mut RngState::new(seed ^ 0x55));
        let a = sm2c_traced(&batch, &cfg, &mut RngState::new(seed)).unwrap();
        let b = sm2c_traced(&batch, &cfg, &mut RngState::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn class_mask_selects_exactly(classes in 2u8..6, subset in prop::collection::btree_set(0u8..6, 0..4), seed in any::<u64>()) {
        let (_, lbl) = random_tile(7, 9, classes, &mut RngState::new(seed));
        let subset: Vec<u8> = subset.into_iter().filter(|&c| c < classes).collect();
        let mask = extract_class_mask(&lbl, &subset).unwrap();
        for (m, l) in mask.data().iter().zip(lbl.data()) {
            prop_assert_eq!(*m, subset.contains(l));
        }
    }

    #[test]
    fn standard_augment_keeps_labels_in_range(seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let (img, lbl) = random_tile(10, 13, 4, &mut rng);
        let (i2, l2) = standard_augment(&img, &lbl, &mut rng).unwrap();
        prop_assert_eq!(i2.dims(), img.dims());
        prop_assert!(l2.data().iter().all(|&l| l < 4));
        prop_assert!(i2.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn later_donor_wins_on_overlap() {
    let recipient = (Image::zeros(2, 2), LabelMap::background(2, 2, 3));
    let donor = |v: f64, c: u8| {
        let img = Image::new(2, 2, vec![v; 4]).unwrap();
        let lbl = LabelMap::new(2, 2, vec![c; 4], 3).unwrap();
        let mask = BinaryMask::new(2, 2, vec![true, true, false, false]).unwrap();
        MixDonor::new(img, lbl, mask, AffineParams::IDENTITY).unwrap()
    };
    let mut second = donor(0.9, 2);
    second.mask = BinaryMask::new(2, 2, vec![false, true, true, false]).unwrap();
    let donors = vec![donor(0.5, 1), second];
    let (img, lbl) = multi_class_mix(&recipient.0, &recipient.1, &donors).unwrap();
    assert_eq!(img.data(), &[0.5, 0.9, 0.9, 0.0]);
    assert_eq!(lbl.data(), &[1, 2, 2, 0]);
    assert_eq!(compose_mask(&donors).unwrap().data(), &[true, true, true, false]);
}

#[test]
fn identity_jitter_leaves_donor_unchanged() {
    let (img, lbl) = random_tile(9, 7, 4, &mut RngState::new(4));
    let mask = extract_class_mask(&lbl, &[1, 3]).unwrap();
    let donor = MixDonor::new(img, lbl, mask, AffineParams::IDENTITY).unwrap();
    let out = jitter_donor(&donor).unwrap();
    assert_eq!(out, donor);
}

#[test]
fn jittered_donor_mask_matches_its_label() {
    let mut rng = RngState::new(9);
    for _ in 0..50 {
        let (img, lbl) = random_tile(12, 12, 4, &mut rng);
        let classes = [2u8];
        let mask = extract_class_mask(&lbl, &classes).unwrap();
        let affine = sm2c::augment::JitterRanges::default().sample(12, 12, &mut rng);
        let out = jitter_donor(&MixDonor::new(img, lbl, mask, affine).unwrap()).unwrap();
        for (m, l) in out.mask.data().iter().zip(out.label.data()) {
            assert_eq!(*m, *l == 2);
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut rng = RngState::new(0);
    let batch = random_batch(6, 6, 4, &mut rng);
    let cfg = Sm2cConfig::default();
    assert!(sm2c(&batch[..3], &cfg, &mut rng).is_err());
    let mut odd = batch.clone();
    odd[2] = random_tile(6, 5, 4, &mut rng);
    assert!(sm2c(&odd, &cfg, &mut rng).is_err());
    assert!(Sm2cConfig::from_parts(&[1, 2], 5).is_err());
    assert!(Sm2cConfig::from_parts(&[1], 3).is_err());
    assert!(Sm2cConfig::from_parts(&[1, 3], 1).is_err());
    assert!(Sm2cConfig::from_parts(&[4], 1).is_err());
    assert!(extract_class_mask(&batch[0].1, &[4]).is_err());
}

#[test]
fn normalize_and_resize_examples() {
    let img = normalize_intensity(1, 3, &[10.0, 20.0, 30.0]).unwrap();
    assert_eq!(img.data(), &[0.0, 0.5, 1.0]);
    let up = resize(&img, 1, 5, ResizeMode::Bilinear).unwrap();
    assert_eq!(up.data(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    let down = resize(&up, 1, 3, ResizeMode::Bilinear).unwrap();
    assert_eq!(down.data(), img.data());
}

#[test]
fn law_checker_detects_tampering() {
    let mut rng = RngState::new(21);
    let batch = random_batch(8, 8, 4, &mut rng);
    let cfg = Sm2cConfig::from_parts(&[1, 2], 4).unwrap();
    let (mixed, trace) = sm2c_traced(&batch, &cfg, &mut rng).unwrap();
    assert!(check_sm2c_laws(&batch, &cfg, &mixed, &trace).is_ok());
    let Mixed::Concatenated(img, lbl) = mixed.clone() else {
        panic!("concat enabled");
    };
    let mut data = img.data().to_vec();
    data[0] = 0.123456;
    let bad = Mixed::Concatenated(Image::new(16, 16, data).unwrap(), lbl);
    assert!(check_sm2c_laws(&batch, &cfg, &bad, &trace).is_err());
    let mut short = trace.clone();
    short.tiles[1].donors.pop();
    assert!(check_sm2c_laws(&batch, &cfg, &mixed, &short).is_err());
}
