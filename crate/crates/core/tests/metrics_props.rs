use camp_core::metrics::{
    decompose_static_dynamic, energy_efficiency, energy_to_solution, scaling_analysis,
    ScalingCurve,
};
use camp_core::trace::{PowerSource, PowerTrace, Sample, Window};
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_trace() -> impl Strategy<Value = PowerTrace> {
    prop::collection::vec((1e-2f64..10.0, 0.0f64..2e3), 2..200).prop_map(|pts| {
        let mut t = 0.0;
        let samples = pts
            .into_iter()
            .map(|(dt, w)| {
                t += dt;
                Sample::new(t, w)
            })
            .collect();
        PowerTrace::new(PowerSource::Pdu, samples).unwrap()
    })
}

proptest! {
    #[test]
    fn energy_is_additive_over_split(tr in random_trace(), frac in 0.01f64..0.99) {
        let (t0, t1) = tr.span().unwrap();
        let ts = t0 + frac * (t1 - t0);
        prop_assume!(ts > t0 && ts < t1);
        let whole = energy_to_solution(&tr, Window::new(t0, t1).unwrap()).unwrap();
        let left = energy_to_solution(&tr, Window::new(t0, ts).unwrap()).unwrap();
        let right = energy_to_solution(&tr, Window::new(ts, t1).unwrap()).unwrap();
        prop_assert!(rel_err(whole, left + right) <= 1e-9);
    }

    #[test]
    fn affine_power_integrates_exactly(
        a in 0.0f64..1e3,
        b in 0.0f64..50.0,
        times in prop::collection::btree_set(0u32..10_000, 2..100),
    ) {
        let ts: Vec<f64> = times.iter().map(|&t| t as f64 / 10.0).collect();
        let samples = ts.iter().map(|&t| Sample::new(t, a + b * t)).collect();
        let tr = PowerTrace::new(PowerSource::Cpu, samples).unwrap();
        let (t0, t1) = (ts[0], *ts.last().unwrap());
        let exact = a * (t1 - t0) + 0.5 * b * (t1 * t1 - t0 * t0);
        let got = energy_to_solution(&tr, Window::new(t0, t1).unwrap()).unwrap();
        prop_assert!(rel_err(got, exact) <= 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn deviation_is_scale_invariant(
        base in 1.0f64..1e4,
        ratios in prop::collection::vec(0.01f64..2.0, 1..8),
        k in 1e-3f64..1e3,
    ) {
        let mut pts = vec![(1u32, base)];
        for (i, r) in ratios.iter().enumerate() {
            pts.push((2u32 << i, base * r));
        }
        let scaled: Vec<(u32, f64)> = pts.iter().map(|&(n, t)| (n, t * k)).collect();
        let a = scaling_analysis(&ScalingCurve::new(pts).unwrap()).unwrap();
        let b = scaling_analysis(&ScalingCurve::new(scaled).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.threads, y.threads);
            prop_assert!((x.deviation - y.deviation).abs() <= 1e-12);
        }
    }

    #[test]
    fn efficiency_times_energy_recovers_items(n in 1.0f64..1e12, e in 1e-6f64..1e9) {
        let eta = energy_efficiency(n, e).unwrap();
        prop_assert!(rel_err(eta * e, n) <= 1e-12);
    }

    #[test]
    fn decomposition_identity_is_bit_exact(
        idle in 0.0f64..2e3,
        pdu in 0.0f64..3e3,
        cpu in 0.0f64..500.0,
        gpu in 0.0f64..700.0,
        frac in 0.01f64..1.0,
        len in 1.0f64..1e5,
    ) {
        let flat = |src, w: f64| {
            PowerTrace::new(src, vec![Sample::new(0.0, w), Sample::new(len * 0.3, w * 1.01), Sample::new(len, w)])
                .unwrap()
        };
        let w = Window::new(0.0, len).unwrap();
        let d = decompose_static_dynamic(
            &flat(PowerSource::Pdu, pdu),
            &flat(PowerSource::Cpu, cpu),
            &flat(PowerSource::Gpu, gpu),
            idle,
            frac,
            w,
        )
        .unwrap();
        let total = frac * energy_to_solution(&flat(PowerSource::Pdu, pdu), w).unwrap();
        // beyond this the components' rounding grid is coarser than the total's
        prop_assume!(d.e_static + d.e_dynamic <= 2.0 * total);
        prop_assert_eq!(d.e_static + d.e_dynamic + d.e_residual, total);
    }
}

#[test]
fn piecewise_affine_closed_form() {
    // 0 -> 100 W over 10 s, hold 100 W for 5 s, down to 20 W over 4 s
    let tr = PowerTrace::new(
        PowerSource::Pdu,
        vec![
            Sample::new(0.0, 0.0),
            Sample::new(10.0, 100.0),
            Sample::new(15.0, 100.0),
            Sample::new(19.0, 20.0),
        ],
    )
    .unwrap();
    let e = energy_to_solution(&tr, Window::new(0.0, 19.0).unwrap()).unwrap();
    assert_eq!(e, 500.0 + 500.0 + 240.0);
}
