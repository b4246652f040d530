use std::path::Path;

use proptest::prelude::*;

use ramsim::beamline::{bessel_amplitudes, default_n_max, BeamState, FourierComponent, SpatialMode};
use ramsim::commands::load_scenario;
use ramsim::control::run_closed_loop;
use ramsim::detection::{overlap, overlap_quadrature_oracle, photocurrent_harmonics, Aperture, DetectorSpec};
use ramsim::scenario::{parse_scenario, RfSource, Scenario};
use ramsim::Complex64;

const LAMBDA: f64 = 532e-9;

fn aperture_strategy() -> impl Strategy<Value = Aperture> {
    prop_oneof![
        Just(Aperture::FullPlane),
        (-2.0f64..2.0).prop_map(|x| Aperture::HalfPlaneScreen { edge_x: x * 4e-3 }),
        (-1.0f64..1.0, -1.0f64..1.0, 0.2f64..2.0, 0.2f64..2.0).prop_map(|(cx, cy, hw, hh)| Aperture::OffsetRect {
            center_x: cx * 4e-3,
            center_y: cy * 4e-3,
            half_width: hw * 4e-3,
            half_height: hh * 4e-3,
        }),
    ]
}

fn scaled(aperture: Aperture, w: f64) -> Aperture {
    let s = w / 4e-3;
    match aperture {
        Aperture::FullPlane => Aperture::FullPlane,
        Aperture::HalfPlaneScreen { edge_x } => Aperture::HalfPlaneScreen { edge_x: edge_x * s },
        Aperture::OffsetRect {
            center_x,
            center_y,
            half_width,
            half_height,
        } => Aperture::OffsetRect {
            center_x: center_x * s,
            center_y: center_y * s,
            half_width: half_width * s,
            half_height: half_height * s,
        },
    }
}

fn comb(amplitudes: &[(f64, f64)], shift: f64, w: f64) -> BeamState {
    let half = (amplitudes.len() / 2) as i64;
    let components = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &(re, im))| {
            let order = i as i64 - half;
            FourierComponent {
                order,
                amplitude: Complex64::new(re, im),
                mode: SpatialMode::new(w, LAMBDA).with_center(order as f64 * shift),
            }
        })
        .collect();
    BeamState::new(components, 0.0).unwrap()
}

fn shipped(name: &str) -> Scenario {
    load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analytic_overlap_matches_quadrature(
        w in 1e-3f64..8e-3,
        ca in -1e-3f64..1e-3,
        delta in 0.0f64..2e-3,
        ap in aperture_strategy(),
    ) {
        let a = SpatialMode::new(w, LAMBDA).with_center(ca);
        let b = SpatialMode::new(w, LAMBDA).with_center(ca + delta);
        let ap = scaled(ap, w);
        let x = overlap(&a, &b, &ap).unwrap();
        let y = overlap_quadrature_oracle(&a, &b, &ap).unwrap();
        prop_assert!((x - y).norm() <= 1e-8 * y.norm(), "{x} vs {y}");
    }

    #[test]
    fn overlap_is_hermitian(
        w in 1e-3f64..8e-3,
        ca in -2e-3f64..2e-3,
        cb in -2e-3f64..2e-3,
        ap in aperture_strategy(),
    ) {
        let a = SpatialMode::new(w, LAMBDA).with_center(ca);
        let b = SpatialMode::new(w, LAMBDA).with_center(cb);
        let ap = scaled(ap, w);
        let ab = overlap(&a, &b, &ap).unwrap();
        let ba = overlap(&b, &a, &ap).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-15 * ab.norm().max(1e-300));
    }

    #[test]
    fn screen_power_falls_as_edge_advances(
        w in 1e-3f64..8e-3,
        c in -2e-3f64..2e-3,
        x1 in -3.0f64..3.0,
        dx in 0.0f64..1.0,
    ) {
        let m = SpatialMode::new(w, LAMBDA).with_center(c);
        let p = |x: f64| overlap(&m, &m, &Aperture::HalfPlaneScreen { edge_x: x * w }).unwrap().re;
        let (p1, p2) = (p(x1), p(x1 + dx));
        prop_assert!(p2 <= p1 + 1e-15);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&p1));
    }

    #[test]
    fn common_mode_ratios_ignore_the_aperture(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7),
        ap in aperture_strategy(),
    ) {
        let beam = comb(&amps, 0.0, 4e-3);
        let full = photocurrent_harmonics(&beam, &DetectorSpec::new(Aperture::FullPlane, 0.5).unwrap(), 3).unwrap();
        let clipped = photocurrent_harmonics(&beam, &DetectorSpec::new(ap, 0.5).unwrap(), 3).unwrap();
        prop_assume!(clipped.dc() > 1e-6 * full.dc());
        for k in 1..=3 {
            let a = full.get(k) / full.dc();
            let b = clipped.get(k) / clipped.dc();
            prop_assert!((a - b).norm() <= 1e-12, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn photocurrent_is_nonnegative(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
        shift in 0.0f64..2e-3,
        ap in aperture_strategy(),
    ) {
        let beam = comb(&amps, shift, 4e-3);
        let h = photocurrent_harmonics(&beam, &DetectorSpec::new(ap, 0.5).unwrap(), 8).unwrap();
        let scale = amps.iter().map(|(r, i)| r * r + i * i).sum::<f64>();
        for s in 0..64 {
            let i = h.evaluate(2.0 * std::f64::consts::PI * s as f64 / 64.0);
            prop_assert!(i >= -1e-13 * scale, "i = {i}");
        }
    }

    #[test]
    fn bessel_power_sum(beta in 0.0f64..5.0) {
        let j = bessel_amplitudes(beta, default_n_max(beta)).unwrap();
        let p: f64 = j.values().iter().map(|v| v * v).sum();
        prop_assert!((p - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Complex RF responses exercise both quadratures; with gain*dt in (0, 1]
    /// the beam-1 residual never grows after the first step.
    #[test]
    fn loop_residual_is_non_increasing(
        fiber in any::<bool>(),
        slope in -0.02f64..0.02,
        phase_step in -0.5f64..0.5,
        gdt in 0.05f64..1.0,
    ) {
        let mut s = shipped(if fiber { "fig3_fiber.scenario" } else { "fig1_noFiber.scenario" });
        let m = s.modulation;
        s.rf = RfSource::Table(
            (-9..=9)
                .map(|k| {
                    let f = m.f_carrier + k as f64 * m.f_m;
                    (f, Complex64::from_polar(1.0 + slope * k as f64, phase_step * k as f64))
                })
                .collect(),
        );
        s.controller.gain = gdt / s.controller.dt;
        s.noise = None;
        let run = run_closed_loop(&s, 60).unwrap();
        prop_assume!(!run.report.initial_am_zero);
        let r: Vec<f64> = run.trajectory.iter().map(|p| p.beam1_c1).collect();
        for w in r[1..].windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12 * r[0], "{} -> {}", w[0], w[1]);
        }
        prop_assert!(r[60] < r[0] * 0.5);
        let again = run_closed_loop(&s, 60).unwrap();
        prop_assert_eq!(run.report, again.report);
    }

    #[test]
    fn scenario_text_round_trips(
        beta in 0.1f64..1.5,
        w0 in 1e-3f64..8e-3,
        shift in 1e-5f64..1e-3,
        edge in -5e-3f64..5e-3,
        gain in 1.0f64..500.0,
        seed in any::<u64>(),
        coeffs in prop::collection::vec(-0.05f64..0.05, 1..4),
    ) {
        let mut s = shipped("fig1_noFiber.scenario").with_seed(seed);
        s.modulation.beta = beta;
        s.source.w0 = w0;
        s.telescope.output_w0 = w0;
        s.aom.lateral_shift_override = Some(shift);
        s.pd2.aperture = Aperture::HalfPlaneScreen { edge_x: edge };
        s.controller.gain = gain;
        let mut c = vec![1.0];
        c.extend(coeffs);
        s.rf = RfSource::Polynomial(c);
        let parsed = parse_scenario(&s.to_text()).unwrap();
        prop_assert_eq!(&parsed, &s);
        prop_assert_eq!(parsed.hash(), s.hash());
    }
}
