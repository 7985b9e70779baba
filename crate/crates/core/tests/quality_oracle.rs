use camp_core::quality::{
    astrometric_error, dirty_rms, psnr, quality_loss, ssim, CatalogEntry, ImageGrid,
    PositionUnit, Psnr, QualityComponent, QualityVector, QualityWeights, SourceCatalog,
    SsimParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference implementations written straight from the textbook formulas:
// two-pass statistics, no shared helpers with the library.

fn oracle_rms(px: &[f64]) -> f64 {
    let n = px.len() as f64;
    let mean = px.iter().sum::<f64>() / n;
    (px.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n).sqrt()
}

fn oracle_psnr(cand: &[f64], reference: &[f64]) -> f64 {
    let peak = reference.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let mse = cand
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / cand.len() as f64;
    10.0 * (peak * peak / mse).log10()
}

fn oracle_ssim(a: &[f64], b: &[f64], w: usize, h: usize, win: usize, range: f64) -> f64 {
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - win {
        for x0 in 0..=w - win {
            let mut xa = Vec::new();
            let mut xb = Vec::new();
            for y in y0..y0 + win {
                for x in x0..x0 + win {
                    xa.push(a[y * w + x]);
                    xb.push(b[y * w + x]);
                }
            }
            let n = xa.len() as f64;
            let ma = xa.iter().sum::<f64>() / n;
            let mb = xb.iter().sum::<f64>() / n;
            let va = xa.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
            let vb = xb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
            let cov = xa
                .iter()
                .zip(&xb)
                .map(|(p, q)| (p - ma) * (q - mb))
                .sum::<f64>()
                / n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn range_of(px: &[f64]) -> f64 {
    let hi = px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = px.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let reference: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..5.0)).collect();
    let noise = rng.gen_range(0.01..2.0);
    let cand = reference
        .iter()
        .map(|r| r + rng.gen_range(-noise..noise))
        .collect();
    (cand, reference)
}

#[test]
fn metrics_match_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (c, r) = random_pair(&mut rng);
        let ci = ImageGrid::new(16, 16, c.clone()).unwrap();
        let ri = ImageGrid::new(16, 16, r.clone()).unwrap();
        assert!((dirty_rms(&ci) - oracle_rms(&c)).abs() <= 1e-6);
        match psnr(&ci, &ri).unwrap() {
            Psnr::Finite(v) => assert!((v - oracle_psnr(&c, &r)).abs() <= 1e-6),
            Psnr::Infinite => panic!("noisy pair cannot be identical"),
        }
        let got = ssim(&ci, &ri, &SsimParams::default()).unwrap();
        let want = oracle_ssim(&c, &r, 16, 16, 8, range_of(&r));
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    }
}

#[test]
fn negated_zero_mean_reference_gives_negative_ssim() {
    // separable period-8 pattern with zero-sum factors: every 8x8 window
    // has mean exactly zero, so only the structure term changes sign
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut period = || {
        let mut g: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = g.iter().sum::<f64>() / 8.0;
        g.iter_mut().for_each(|v| *v -= m);
        g
    };
    let (gx, gy) = (period(), period());
    let r: Vec<f64> = (0..256).map(|i| gx[(i % 16) % 8] * gy[(i / 16) % 8]).collect();
    let neg: Vec<f64> = r.iter().map(|p| -p).collect();
    let got = ssim(
        &ImageGrid::new(16, 16, neg.clone()).unwrap(),
        &ImageGrid::new(16, 16, r.clone()).unwrap(),
        &SsimParams::default(),
    )
    .unwrap();
    let want = oracle_ssim(&neg, &r, 16, 16, 8, range_of(&r));
    assert!((-1.0..0.0).contains(&got), "{got}");
    assert!((got - want).abs() <= 1e-6);
}

fn image(w: usize, h: usize) -> impl Strategy<Value = ImageGrid> {
    prop::collection::vec(-10.0f64..10.0, w * h)
        .prop_map(move |px| ImageGrid::new(w, h, px).unwrap())
}

fn catalog(unit: PositionUnit, pts: &[(f64, f64)]) -> SourceCatalog {
    SourceCatalog::new(
        unit,
        pts.iter()
            .enumerate()
            .map(|(i, &(x, y))| CatalogEntry {
                id: format!("s{i}"),
                x,
                y,
                flux: 1.0,
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn rms_shift_and_scale(img in image(9, 7), shift in -100.0f64..100.0, k in 0.01f64..100.0) {
        let base = dirty_rms(&img);
        let shifted = ImageGrid::new(9, 7, img.pixels().iter().map(|p| p + shift).collect()).unwrap();
        let scaled = ImageGrid::new(9, 7, img.pixels().iter().map(|p| p * k).collect()).unwrap();
        prop_assert!((dirty_rms(&shifted) - base).abs() <= 1e-9 * (1.0 + shift.abs()));
        prop_assert!((dirty_rms(&scaled) - k * base).abs() <= 1e-12 * k * (1.0 + base));
    }

    #[test]
    fn ssim_identity_and_symmetry(a in image(12, 10), b in image(12, 10)) {
        let fixed = SsimParams { data_range: Some(20.0), ..SsimParams::default() };
        prop_assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() <= 1e-12);
        let ab = ssim(&a, &b, &fixed).unwrap();
        let ba = ssim(&b, &a, &fixed).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn psnr_falls_as_noise_grows(img in image(8, 8), lo in 0.01f64..1.0, grow in 1.1f64..10.0) {
        prop_assume!(img.peak_abs() > 0.0);
        let pattern: Vec<f64> = (0..64).map(|i| if i % 3 == 0 { 1.0 } else { -0.5 }).collect();
        let noisy = |amp: f64| {
            ImageGrid::new(8, 8, img.pixels().iter().zip(&pattern).map(|(p, n)| p + amp * n).collect()).unwrap()
        };
        let small = psnr(&noisy(lo), &img).unwrap().as_f64();
        let big = psnr(&noisy(lo * grow), &img).unwrap().as_f64();
        prop_assert!(big < small);
    }

    #[test]
    fn astrometry_translation_invariant(
        pts in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 1..20),
        off in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 20),
        dx in -1e3f64..1e3,
        dy in -1e3f64..1e3,
    ) {
        let measured: Vec<(f64, f64)> = pts.iter().zip(&off).map(|(p, o)| (p.0 + o.0, p.1 + o.1)).collect();
        let a = astrometric_error(&catalog(PositionUnit::Px, &measured), &catalog(PositionUnit::Px, &pts), 5.0).unwrap();
        let mv: Vec<(f64, f64)> = measured.iter().map(|p| (p.0 + dx, p.1 + dy)).collect();
        let rv: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 + dx, p.1 + dy)).collect();
        let b = astrometric_error(&catalog(PositionUnit::Px, &mv), &catalog(PositionUnit::Px, &rv), 5.0).unwrap();
        prop_assert_eq!(a.matched, b.matched);
        prop_assert!((a.mean_error - b.mean_error).abs() <= 1e-9);
    }

    #[test]
    fn loss_is_monotone_in_worse_direction(
        rms_ref in 0.1f64..10.0,
        ssim_ref in 0.1f64..1.0,
        rms_a in 0.0f64..20.0,
        rms_step in 0.0f64..5.0,
        ssim_a in -1.0f64..1.0,
        ssim_step in 0.0f64..1.0,
        w1 in 0.0f64..3.0,
        w2 in 0.0f64..3.0,
    ) {
        let weights: QualityWeights = [(QualityComponent::RmsDirty, w1), (QualityComponent::Ssim, w2)].into();
        let q_ref = QualityVector { rms_dirty: Some(rms_ref), ssim: Some(ssim_ref), ..Default::default() };
        let a = QualityVector { rms_dirty: Some(rms_a), ssim: Some(ssim_a), ..Default::default() };
        let worse = QualityVector { rms_dirty: Some(rms_a + rms_step), ssim: Some(ssim_a - ssim_step), ..Default::default() };
        prop_assert_eq!(quality_loss(&q_ref, &q_ref, &weights).unwrap(), 0.0);
        prop_assert!(quality_loss(&worse, &q_ref, &weights).unwrap() >= quality_loss(&a, &q_ref, &weights).unwrap());
    }
}

#[test]
fn rigid_three_four_shift_is_five() {
    let reference: Vec<(f64, f64)> = vec![(10.0, 10.0), (50.0, 80.0), (200.0, 5.0)];
    let measured: Vec<(f64, f64)> = reference.iter().map(|p| (p.0 + 3.0, p.1 + 4.0)).collect();
    let m = astrometric_error(
        &catalog(PositionUnit::Arcsec, &measured),
        &catalog(PositionUnit::Arcsec, &reference),
        10.0,
    )
    .unwrap();
    assert_eq!(m.mean_error, 5.0);
    assert_eq!(m.matched, 3);
}
