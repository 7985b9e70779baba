use camp_core::trace::{
    align_traces, clip_to_window, idle_baseline, read_power_csv, PowerSource, PowerTrace, Sample,
    TraceError, Window,
};
use proptest::prelude::*;

fn trace_strategy() -> impl Strategy<Value = PowerTrace> {
    (2usize..60, -1e3f64..1e3)
        .prop_flat_map(|(n, t0)| {
            (
                Just(t0),
                prop::collection::vec(1e-3f64..20.0, n - 1),
                prop::collection::vec(0.0f64..5e3, n),
            )
        })
        .prop_map(|(t0, steps, watts)| {
            let mut t = t0;
            let mut samples = vec![Sample::new(t, watts[0])];
            for (dt, w) in steps.iter().zip(&watts[1..]) {
                t += dt;
                samples.push(Sample::new(t, *w));
            }
            PowerTrace::new(PowerSource::Pdu, samples).unwrap()
        })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn csv_round_trip_is_identity(tr in trace_strategy()) {
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = read_power_csv("mem", buf.as_slice(), PowerSource::Pdu).unwrap();
        prop_assert_eq!(back, tr);
    }

    #[test]
    fn clipping_conserves_energy(tr in trace_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (s, e) = tr.span().unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let w = Window::new(s + lo * (e - s), s + hi * (e - s)).unwrap();
        let clipped = clip_to_window(&tr, w).unwrap();
        prop_assert_eq!(clipped.span(), Some((w.t0, w.t1)));
        let direct = tr.energy_over(w).unwrap();
        let via_clip = clipped.energy().unwrap();
        prop_assert!(rel_close(direct, via_clip, 1e-9), "{direct} vs {via_clip}");
    }

    #[test]
    fn superset_grid_reproduces_samples(ints in prop::collection::btree_set(0u32..200, 2..30),
                                        watts in prop::collection::vec(0.0f64..1e3, 30)) {
        // integer timestamps on a unit grid are reproduced exactly
        let samples: Vec<Sample> = ints
            .iter()
            .zip(&watts)
            .map(|(&t, &w)| Sample::new(t as f64, w))
            .collect();
        let tr = PowerTrace::new(PowerSource::Gpu, samples.clone()).unwrap();
        let out = align_traces(std::slice::from_ref(&tr), 1.0).unwrap();
        for s in &samples {
            let hit = out[0].samples().iter().find(|g| g.t == s.t).unwrap();
            prop_assert_eq!(hit.value, s.value);
        }
        prop_assert!(rel_close(out[0].energy().unwrap(), tr.energy().unwrap(), 1e-12));
    }

    #[test]
    fn idle_of_constant_is_constant(c in 0.0f64..1e4, a in 0.0f64..50.0, len in 2.0f64..50.0) {
        let samples = (0..=100).map(|i| Sample::new(i as f64, c)).collect();
        let tr = PowerTrace::new(PowerSource::Pdu, samples).unwrap();
        let w = Window::new(a, a + len).unwrap();
        let got = idle_baseline(&tr, w).unwrap();
        prop_assert!(rel_close(got, c, 1e-12) || (c == 0.0 && got == 0.0));
    }
}

#[test]
fn aligned_traces_share_timestamps() {
    let a = PowerTrace::new(
        PowerSource::Cpu,
        vec![Sample::new(0.0, 10.0), Sample::new(7.3, 20.0), Sample::new(12.0, 5.0)],
    )
    .unwrap();
    let b = PowerTrace::new(
        PowerSource::Gpu,
        vec![Sample::new(2.0, 100.0), Sample::new(15.0, 100.0)],
    )
    .unwrap();
    let out = align_traces(&[a, b], 0.5).unwrap();
    let ta: Vec<f64> = out[0].samples().iter().map(|s| s.t).collect();
    let tb: Vec<f64> = out[1].samples().iter().map(|s| s.t).collect();
    assert_eq!(ta, tb);
    assert_eq!(ta.first(), Some(&2.0));
    assert_eq!(ta.last(), Some(&12.0));
    assert!(out[1].samples().iter().all(|s| s.value == 100.0));
}

#[test]
fn disjoint_alignment_fails() {
    let a = PowerTrace::new(
        PowerSource::Cpu,
        vec![Sample::new(0.0, 1.0), Sample::new(10.0, 1.0)],
    )
    .unwrap();
    let b = PowerTrace::new(
        PowerSource::Gpu,
        vec![Sample::new(20.0, 1.0), Sample::new(30.0, 1.0)],
    )
    .unwrap();
    assert!(matches!(align_traces(&[a, b], 1.0), Err(TraceError::NoOverlap)));
}
