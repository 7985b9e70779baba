use camp_core::econ::{
    carbon_efficiency, carbon_to_solution, econ_vector, efficiency_band, embodied_share,
    AssetModel, CarbonIntensity, CarbonIntensitySeries, SiteProfile, JOULES_PER_KWH,
};
use camp_core::trace::Window;
use proptest::prelude::*;

fn site(kappa: f64, price: f64) -> SiteProfile {
    SiteProfile {
        region: "XX".into(),
        label: "test".into(),
        carbon: CarbonIntensity::Constant(kappa),
        price_per_kwh: price,
        power_cap_w: 2e6,
    }
}

fn asset(capex: f64, embodied: f64, lifetime: f64, opex: Option<f64>) -> AssetModel {
    AssetModel {
        capex,
        currency: "USD".into(),
        embodied_kg: embodied,
        lifetime_s: lifetime,
        opex_rate_per_s: opex,
    }
}

proptest! {
    #[test]
    fn constant_carbon_is_linear(e in 0.0f64..1e12, k in 0.01f64..5.0, kappa in 0.01f64..1.5) {
        let w = Window::new(0.0, 10.0).unwrap();
        let c = CarbonIntensity::Constant(kappa);
        let one = carbon_to_solution(e, &c, w).unwrap();
        let scaled = carbon_to_solution(k * e, &c, w).unwrap();
        prop_assert!((scaled - k * one).abs() <= 1e-12 * scaled.abs().max(1e-300));
    }

    #[test]
    fn series_carbon_within_bounds(
        ks in prop::collection::vec(0.05f64..1.5, 2..24),
        e in 1.0f64..1e12,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let samples: Vec<(f64, f64)> = ks.iter().enumerate().map(|(i, &k)| (i as f64 * 3600.0, k)).collect();
        let end = (ks.len() - 1) as f64 * 3600.0;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let w = Window::new(lo * end, hi * end).unwrap();
        let series = CarbonIntensity::Series(CarbonIntensitySeries::new(samples).unwrap());
        let c = carbon_to_solution(e, &series, w).unwrap();
        let kwh = e / JOULES_PER_KWH;
        let kmin = ks.iter().cloned().fold(f64::INFINITY, f64::min);
        let kmax = ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(c >= kmin * kwh * (1.0 - 1e-12) && c <= kmax * kwh * (1.0 + 1e-12));
    }

    #[test]
    fn efficiency_ratio_is_inverse_intensity_ratio(e in 1.0f64..1e12, n in 1.0f64..1e12,
                                                   k1 in 0.01f64..2.0, k2 in 0.01f64..2.0) {
        let w = Window::new(0.0, 1.0).unwrap();
        let c1 = carbon_to_solution(e, &CarbonIntensity::Constant(k1), w).unwrap();
        let c2 = carbon_to_solution(e, &CarbonIntensity::Constant(k2), w).unwrap();
        let ratio = carbon_efficiency(n, c1).unwrap() / carbon_efficiency(n, c2).unwrap();
        prop_assert!((ratio - k2 / k1).abs() <= 1e-12 * (k2 / k1));
    }

    #[test]
    fn amortisation_is_linear(t in 0.0f64..1e7, f in 0.01f64..1.0, k in 0.01f64..1.0) {
        let a = asset(29875.39, 512519.0, 189345600.0, None);
        let base = embodied_share(&a, t, f);
        prop_assert!((embodied_share(&a, k * t, f) - k * base).abs() <= 1e-12 * base.max(1e-300));
        prop_assert!((embodied_share(&a, t, k * f) - k * base).abs() <= 1e-12 * base.max(1e-300));
        let s = site(0.5, 0.2);
        let x = econ_vector(1e6, &s, &a, t, f, 1.0).unwrap();
        let y = econ_vector(1e6, &s, &a, k * t, f, 1.0).unwrap();
        prop_assert!((y.capex_share - k * x.capex_share).abs() <= 1e-12 * x.capex_share.max(1e-300));
    }

    #[test]
    fn tto_is_sum_of_parts(e in 0.0f64..1e12, t in 0.0f64..1e7, f in 0.01f64..1.0,
                           price in 0.0f64..1.0, opex in prop::option::of(0.0f64..1.0)) {
        let a = asset(1e5, 1e5, 1e8, opex);
        let v = econ_vector(e, &site(0.4, price), &a, t, f, 0.0).unwrap();
        prop_assert_eq!(v.c_tto_share, v.capex_share + v.opex_share + v.c_e_energy);
    }

    #[test]
    fn band_monotone(c_lo in 1e15f64..5e16, c_span in 0.0f64..5e16,
                     caps in prop::collection::vec(1e5f64..1e8, 1..12),
                     f_lo in 0.0f64..0.5, f_span in 0.0f64..0.4, df in 0.0f64..0.09) {
        let rows = efficiency_band((c_lo, c_lo + c_span), &caps, (f_lo, f_lo + f_span)).unwrap();
        for pair in rows.windows(2) {
            prop_assert!(pair[0].p_cap_w <= pair[1].p_cap_w);
            prop_assert!(pair[1].min_gflops_per_w <= pair[0].min_gflops_per_w);
            prop_assert!(pair[1].max_gflops_per_w <= pair[0].max_gflops_per_w);
        }
        let more = efficiency_band((c_lo, c_lo + c_span), &caps, (f_lo + df, f_lo + f_span + df)).unwrap();
        for (r, m) in rows.iter().zip(&more) {
            prop_assert!(m.min_gflops_per_w >= r.min_gflops_per_w);
            prop_assert!(m.max_gflops_per_w >= r.max_gflops_per_w);
        }
    }
}
