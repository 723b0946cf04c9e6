mod oracles;

use pollen_core::filters::{
    adaptive_threshold_gaussian, gaussian_blur, mean_shift_point, otsu_threshold, AdaptiveParams, GaussianKernel,
    MeanShiftParams, Polarity,
};
use pollen_core::raster::{hsv_pixel_to_rgb, rgb_pixel_to_hsv, rgb_to_gray, rgb_to_hsv};
use pollen_core::{GrayImage, RgbImage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random())
}

#[test]
fn hsv_round_trip_10k_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let p: [u8; 3] = rng.random();
        let back = hsv_pixel_to_rgb(rgb_pixel_to_hsv(p));
        for c in 0..3 {
            assert!((back[c] as i32 - p[c] as i32).abs() <= 1, "{p:?} -> {back:?}");
        }
    }
}

#[test]
fn gray_pixels_survive_luma() {
    let img = RgbImage::from_fn(16, 16, |x, y| {
        let v = (x * 16 + y) as u8;
        [v, v, v]
    });
    let g = rgb_to_gray(&img);
    assert!(img.pixels().iter().zip(g.pixels()).all(|(p, &v)| p[0] == v));
    assert_eq!(rgb_to_hsv(&img).dimensions(), (16, 16));
}

#[test]
fn otsu_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..300 {
        let img = if i % 3 == 0 {
            // Few gray levels make exact ties likely.
            let levels: Vec<u8> = (0..4).map(|_| rng.random()).collect();
            GrayImage::from_fn(32, 32, |_, _| levels[rng.random_range(0..4)])
        } else {
            random_gray(&mut rng, 32, 32)
        };
        assert_eq!(otsu_threshold(&img).ok(), oracles::otsu(&img));
    }
}

#[test]
fn adaptive_matches_windowed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20 {
        let img = random_gray(&mut rng, 40, 33);
        let block = [11, 77, 5][i % 3];
        let c = rng.random_range(-6..=6);
        let taps = GaussianKernel::with_size(block).unwrap().taps().to_vec();
        for (polarity, darker) in [(Polarity::ObjectsDarker, true), (Polarity::ObjectsBrighter, false)] {
            let p = AdaptiveParams {
                block_size: block,
                c,
                polarity,
            };
            let got = adaptive_threshold_gaussian(&img, &p).unwrap();
            assert_eq!(got, oracles::adaptive(&img, &taps, c as i64, darker));
        }
    }
}

#[test]
fn adaptive_constant_image_examples() {
    let img = GrayImage::filled(30, 30, 100);
    let darker = |c| AdaptiveParams {
        block_size: 11,
        c,
        polarity: Polarity::ObjectsDarker,
    };
    let brighter = |c| AdaptiveParams {
        block_size: 11,
        c,
        polarity: Polarity::ObjectsBrighter,
    };
    // v < mean - c: only a negative c admits the constant level.
    assert_eq!(adaptive_threshold_gaussian(&img, &darker(-5)).unwrap().count(), 900);
    assert_eq!(adaptive_threshold_gaussian(&img, &darker(5)).unwrap().count(), 0);
    assert_eq!(adaptive_threshold_gaussian(&img, &brighter(5)).unwrap().count(), 900);
    assert_eq!(adaptive_threshold_gaussian(&img, &brighter(0)).unwrap().count(), 0);
}

fn arb_rgb(max_side: usize) -> impl Strategy<Value = RgbImage> {
    (1..max_side, 1..max_side).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<[u8; 3]>(), w * h)
            .prop_map(move |px| RgbImage::new(w, h, px).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_shift_color_stays_near_a_window_input(
        img in arb_rgb(14),
        sr in 1usize..5,
        cr in 5.0f32..60.0,
        sx in 0usize..14,
        sy in 0usize..14,
    ) {
        let p = MeanShiftParams { spatial_radius: sr, color_radius: cr, max_iterations: 5, convergence_eps: 1.0 };
        let (x, y) = (sx % img.width(), sy % img.height());
        let out = mean_shift_point(&img, x, y, &p);
        let (cx, cy) = out.window_center;
        let mut best = f32::INFINITY;
        for yy in cy.saturating_sub(sr)..=(cy + sr).min(img.height() - 1) {
            for xx in cx.saturating_sub(sr)..=(cx + sr).min(img.width() - 1) {
                let q = img.get(xx, yy);
                let d: f32 = (0..3).map(|k| (q[k] as f32 - out.color[k]).powi(2)).sum();
                best = best.min(d.sqrt());
            }
        }
        prop_assert!(best <= cr * (1.0 + 1e-5), "nearest input {best} > {cr}");
    }

    #[test]
    fn blur_commutes_with_transpose_rgb(img in arb_rgb(20), k in prop::sample::select(vec![3usize, 5, 11])) {
        let kernel = GaussianKernel::with_size(k).unwrap();
        prop_assert_eq!(gaussian_blur(&img.transpose(), &kernel), gaussian_blur(&img, &kernel).transpose());
    }
}
