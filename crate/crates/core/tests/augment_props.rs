use cxrnet_core::data::{augment, augment_with, preprocess, AugmentConfig, AugmentParams, GrayImage};
use cxrnet_core::layers::Rng;
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn sampled_parameters_cover_their_ranges() {
    let cfg = AugmentConfig::default();
    let (w, h) = (150.0, 150.0);
    let mut rng = Rng::seed_from_u64(2024);
    let draws: Vec<AugmentParams> = (0..10_000).map(|_| AugmentParams::sample(&cfg, 150, 150, &mut rng)).collect();

    let span = |f: &dyn Fn(&AugmentParams) -> f64| {
        let lo = draws.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = draws.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let check = |name: &str, (lo, hi): (f64, f64), r: f64, centre: f64| {
        assert!(lo >= centre - r && hi <= centre + r, "{name} [{lo}, {hi}] outside ±{r}");
        assert!(hi - lo >= 0.95 * 2.0 * r, "{name} covers only [{lo}, {hi}]");
    };
    check("angle", span(&|p| p.angle_degrees), 30.0, 0.0);
    check("zoom", span(&|p| p.zoom), 0.2, 1.0);
    check("dx", span(&|p| p.dx), 0.1 * w, 0.0);
    check("dy", span(&|p| p.dy), 0.1 * h, 0.0);
    let flips = draws.iter().filter(|p| p.flip).count() as f64 / draws.len() as f64;
    assert!((flips - 0.5).abs() < 0.02, "flip rate {flips}");
}

#[test]
fn disabled_flip_never_flips() {
    let cfg = AugmentConfig { horizontal_flip: false, ..AugmentConfig::default() };
    let mut rng = Rng::seed_from_u64(1);
    assert!((0..1000).all(|_| !AugmentParams::sample(&cfg, 10, 10, &mut rng).flip));
}

fn image() -> impl Strategy<Value = GrayImage> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |p| GrayImage::new(w, h, p).unwrap())
    })
}

proptest! {
    #[test]
    fn identity_transform_is_exact(img in image()) {
        prop_assert_eq!(augment_with(&img, &AugmentParams::IDENTITY), img);
    }

    #[test]
    fn same_seed_same_augmentation(img in image(), seed in any::<u64>()) {
        let cfg = AugmentConfig::default();
        let a = augment(&img, &cfg, &mut Rng::seed_from_u64(seed));
        let b = augment(&img, &cfg, &mut Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn preprocessed_values_stay_in_unit_interval(img in image(), seed in any::<u64>()) {
        let cfg = AugmentConfig { target_size: [16, 12], ..AugmentConfig::default() };
        let p = AugmentParams::sample(&cfg, 16, 12, &mut Rng::seed_from_u64(seed));
        let plane = preprocess(&img, &cfg, Some(&p)).unwrap();
        prop_assert_eq!(plane.len(), 16 * 12);
        prop_assert!(plane.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
    }
}
