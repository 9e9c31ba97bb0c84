use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use stainforge_core::acd::{build_matrix, saturation, separate, AcdParams, StainProfile};
use stainforge_core::augment::{apply_transform, sample_transform, AffineTransform, AugmentConfig};
use stainforge_core::color::{
    od_to_rgb, rgb_to_od, tissue_mask, BackgroundIntensity, DEFAULT_TISSUE_THRESHOLD,
};
use stainforge_core::linalg::Mat3;
use stainforge_core::metrics::{confusion, roc_auc, Prediction, PredictionSet};
use stainforge_core::split::{split, SampleRecord, SplitMode};
use stainforge_core::{Label, Magnification, OdImage, RgbImage};

fn image(max_side: usize, min_level: u8) -> impl Strategy<Value = RgbImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(min_level..=255u8, w * h * 3)
            .prop_map(move |data| RgbImage::new(w, h, data).unwrap())
    })
}

fn params() -> impl Strategy<Value = AcdParams> {
    (
        0.9..1.45f64,
        0.4..1.1f64,
        1.25..1.55f64,
        1.1..1.55f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
    )
        .prop_filter("stains too close", |p| {
            let a = AcdParams::from_array([p.0, p.1, p.2, p.3, p.4, p.5]);
            build_matrix(&a).is_ok()
        })
        .prop_map(|p| AcdParams::from_array([p.0, p.1, p.2, p.3, p.4, p.5]))
}

fn od_pixels(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec([0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64], 1..n)
}

fn predictions() -> impl Strategy<Value = Vec<Prediction>> {
    proptest::collection::vec((any::<bool>(), 0u32..=20), 1..60).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (m, s))| Prediction {
                path: i.to_string(),
                label: if m { Label::Malignant } else { Label::Benign },
                score: s as f64 / 20.0,
            })
            .collect()
    })
}

fn records(benign: usize, malignant: usize) -> Vec<SampleRecord> {
    (0..benign + malignant)
        .map(|i| SampleRecord {
            path: format!("r{i:04}.png"),
            label: if i < benign {
                Label::Benign
            } else {
                Label::Malignant
            },
            magnification: Magnification::X100,
            patient_id: format!("p{}", i % 17),
            subtype: "X".into(),
        })
        .collect()
}

proptest! {
    #[test]
    fn od_round_trip(img in image(12, 1)) {
        let bg = BackgroundIntensity::WHITE;
        prop_assert_eq!(od_to_rgb(&rgb_to_od(&img, &bg), &bg), img);
    }

    #[test]
    fn od_is_finite_and_nonnegative(img in image(12, 0), level in 1u8..=255) {
        let bg = BackgroundIntensity::uniform(level as f64).unwrap();
        let od = rgb_to_od(&img, &bg);
        prop_assert!(od.pixels().iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn od_is_strictly_monotone(a in 1u8..255, b in 1u8..255) {
        prop_assume!(a < b);
        let bg = BackgroundIntensity::WHITE;
        let img = RgbImage::new(2, 1, vec![a, a, a, b, b, b]).unwrap();
        let od = rgb_to_od(&img, &bg);
        prop_assert!(od.pixels()[0][0] > od.pixels()[1][0]);
    }

    #[test]
    fn tissue_mask_survives_round_trip(img in image(12, 0)) {
        let bg = BackgroundIntensity::WHITE;
        let od = rgb_to_od(&img, &bg);
        let again = rgb_to_od(&od_to_rgb(&od, &bg), &bg);
        prop_assert_eq!(
            tissue_mask(&od, DEFAULT_TISSUE_THRESHOLD),
            tissue_mask(&again, DEFAULT_TISSUE_THRESHOLD)
        );
    }

    #[test]
    fn saturation_bounds(h in -5.0..5.0f64, e in -5.0..5.0f64) {
        let s = saturation(h, e);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(saturation(h, h) == 1.0, h != 0.0);
    }

    #[test]
    fn profile_columns_are_orthonormal_residual(p in params()) {
        let profile = build_matrix(&p).unwrap();
        let (h, e, r) = (profile.hematoxylin(), profile.eosin(), profile.residual());
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        prop_assert!(dot(h, r).abs() < 1e-12 && dot(e, r).abs() < 1e-12);
        for c in [h, e, r] {
            prop_assert!((dot(c, c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_is_linear(p in params(), pixels in od_pixels(40), alpha in 0.0..4.0f64) {
        let profile = build_matrix(&p).unwrap();
        let od = OdImage::new(pixels.len(), 1, pixels.clone()).unwrap();
        let scaled: Vec<[f64; 3]> = pixels.iter().map(|v| v.map(|x| alpha * x)).collect();
        let a = separate(&od, &profile).unwrap();
        let b = separate(&OdImage::new(pixels.len(), 1, scaled).unwrap(), &profile).unwrap();
        for (x, y) in a.densities().iter().zip(b.densities()) {
            for k in 0..3 {
                prop_assert!((alpha * x[k] - y[k]).abs() <= 1e-9 * (1.0 + y[k].abs()));
            }
        }
    }

    #[test]
    fn reconstruction_inverts_separation(p in params(), pixels in od_pixels(40)) {
        let profile = build_matrix(&p).unwrap();
        let od = OdImage::new(pixels.len(), 1, pixels.clone()).unwrap();
        let compose = profile.composition_operator();
        let s = separate(&od, &profile).unwrap();
        for (orig, dens) in pixels.iter().zip(s.densities()) {
            let back = compose.mul_vec(dens);
            for k in 0..3 {
                prop_assert!((back[k] - orig[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn params_round_trip_through_profile(p in params()) {
        let profile = build_matrix(&p).unwrap();
        let again = build_matrix(&AcdParams::from_profile(&profile)).unwrap();
        let (a, b) = (profile.matrix(), again.matrix());
        prop_assert!((*a - *b).frobenius_norm() < 1e-12);
        prop_assert!((profile.wh() - again.wh()).abs() < 1e-12 * profile.wh());
    }

    #[test]
    fn augmentation_keeps_size_and_palette(img in image(20, 0), seed in any::<u64>()) {
        let cfg = AugmentConfig { seed, ..AugmentConfig::default() };
        let mut rng = SplitMix64::seed_from_u64(seed);
        let t = sample_transform(&cfg, &mut rng, img.width(), img.height()).unwrap();
        prop_assert!(t.is_valid());
        let out = apply_transform(&img, &t);
        prop_assert_eq!((out.width(), out.height()), (img.width(), img.height()));
        let mut palette: Vec<[u8; 3]> = img.pixels().collect();
        palette.sort_unstable();
        prop_assert!(out.pixels().all(|p| palette.binary_search(&p).is_ok()));
    }

    #[test]
    fn flip_is_an_involution(img in image(20, 0)) {
        let f = AffineTransform::horizontal_flip();
        prop_assert_eq!(apply_transform(&apply_transform(&img, &f), &f), img);
    }

    #[test]
    fn zero_ranges_give_identity(img in image(16, 0), seed in any::<u64>()) {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let t = sample_transform(&AugmentConfig::identity(), &mut rng, img.width(), img.height()).unwrap();
        prop_assert_eq!(apply_transform(&img, &t), img);
    }

    #[test]
    fn split_is_disjoint_and_covering(benign in 5usize..80, malignant in 5usize..80, seed in any::<u64>(), by_patient in any::<bool>()) {
        let recs = records(benign, malignant);
        let mode = if by_patient { SplitMode::Patient } else { SplitMode::Image };
        let m = split(&recs, seed, mode).unwrap();
        let mut paths: Vec<&str> = m.iter().map(|(_, r)| r.path.as_str()).collect();
        prop_assert_eq!(paths.len(), recs.len());
        paths.sort_unstable();
        paths.dedup();
        prop_assert_eq!(paths.len(), recs.len());
        if mode == SplitMode::Image {
            for (label, n) in [(Label::Benign, benign), (Label::Malignant, malignant)] {
                let test = m.test.iter().filter(|r| r.label == label).count();
                prop_assert_eq!(test, (3 * n + 5) / 10);
            }
            prop_assert_eq!(m.validation.len(), (recs.len() - m.test.len()) / 10);
        }
        prop_assert_eq!(split(&recs, seed, mode).unwrap(), m);
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(rows in predictions()) {
        let set = PredictionSet::new(rows.clone()).unwrap();
        let mapped: Vec<Prediction> = rows
            .iter()
            .map(|r| Prediction { score: r.score * r.score * r.score, ..r.clone() })
            .collect();
        let mapped = PredictionSet::new(mapped).unwrap();
        match (roc_auc(&set), roc_auc(&mapped)) {
            (Ok((ra, a)), Ok((rb, b))) => {
                prop_assert_eq!(a, b);
                let pts = |r: &[stainforge_core::metrics::RocPoint]| {
                    r.iter().map(|p| (p.fpr, p.tpr)).collect::<Vec<_>>()
                };
                prop_assert_eq!(pts(&ra), pts(&rb));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            _ => prop_assert!(false, "only one side failed"),
        }
    }

    #[test]
    fn raising_threshold_never_adds_positives(rows in predictions(), a in 0u32..=20, b in 0u32..=20) {
        let (lo, hi) = (a.min(b) as f64 / 20.0, a.max(b) as f64 / 20.0);
        let set = PredictionSet::new(rows).unwrap();
        let (cl, ch) = (confusion(&set, lo).unwrap(), confusion(&set, hi).unwrap());
        prop_assert!(ch.tp <= cl.tp && ch.fp <= cl.fp);
        prop_assert_eq!(cl.total(), ch.total());
    }
}

#[test]
fn profile_rejects_non_unit_columns() {
    let m = Mat3([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(StainProfile::new(m, 1.0, 1.0).is_err());
}
