//! Numerical self-checks run by `ramsim selftest`.

use num_complex::Complex64;

use crate::beamline::{
    aom_modulate, bessel_amplitudes, AomSpec, BeamState, DriveEnvelope, ModulationSpec, RfChainResponse, SpatialMode,
    SplitGeometry,
};
use crate::control::{controller_step, demodulate_iq, ControllerState};
use crate::detection::{overlap, overlap_quadrature_oracle, photocurrent_harmonics, Aperture, DetectorSpec};
use crate::error::Result;

/// Relative tolerance between analytic and quadrature overlaps.
pub const OVERLAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelftestOptions {
    /// Relative error injected into every analytic overlap (mutation hook).
    pub perturb_analytic: f64,
}

fn overlap_grid() -> Vec<(SpatialMode, SpatialMode, Aperture)> {
    const LAMBDA: f64 = 532e-9;
    let mut cases = Vec::new();
    let waists = [1e-3, 4e-3, 8e-3];
    let shifts = [(0.0, 0.0), (0.336e-3, -0.336e-3), (-1.2e-3, 0.8e-3), (2e-3, 0.0)];
    for &w in &waists {
        for &(ca, cb) in &shifts {
            let a = SpatialMode::new(w, LAMBDA).with_center(ca);
            let b = SpatialMode::new(w, LAMBDA).with_center(cb);
            for x in [-2.0, -0.5, 0.0, 1.3] {
                cases.push((a, b, Aperture::HalfPlaneScreen { edge_x: x * w }));
            }
            cases.push((
                a,
                b,
                Aperture::OffsetRect {
                    center_x: 0.4 * w,
                    center_y: -0.2 * w,
                    half_width: 0.7 * w,
                    half_height: 1.1 * w,
                },
            ));
        }
    }
    cases
}

fn check_overlaps(opts: SelftestOptions) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let cases = overlap_grid();
    for (a, b, ap) in &cases {
        let analytic = overlap(a, b, ap)? * (1.0 + opts.perturb_analytic);
        let oracle = overlap_quadrature_oracle(a, b, ap)?;
        let err = (analytic - oracle).norm() / oracle.norm().max(1e-300);
        worst = worst.max(err);
    }
    Ok(CheckResult {
        name: "overlap analytic vs quadrature",
        passed: worst <= OVERLAP_TOLERANCE,
        detail: format!("{} cases, worst relative error {worst:.3e}", cases.len()),
    })
}

fn check_bessel() -> Result<CheckResult> {
    let mut worst_norm = 0.0f64;
    let mut worst_pair = 0.0f64;
    let mut worst_rec = 0.0f64;
    for beta in [0.2, 1.0, 1.5] {
        let j = bessel_amplitudes(beta, 8)?;
        worst_norm = worst_norm.max((j.values().iter().map(|v| v * v).sum::<f64>() - 1.0).abs());
        worst_pair = worst_pair.max((-8..8).map(|n| j.get(n) * j.get(n + 1)).sum::<f64>().abs());
        for n in 1..7 {
            let r = j.get(n - 1) + j.get(n + 1) - 2.0 * n as f64 / beta * j.get(n);
            worst_rec = worst_rec.max(r.abs());
        }
    }
    Ok(CheckResult {
        name: "Bessel identities",
        passed: worst_norm <= 1e-9 && worst_pair <= 1e-12 && worst_rec <= 1e-12,
        detail: format!("power {worst_norm:.1e}, neighbour sum {worst_pair:.1e}, recurrence {worst_rec:.1e}"),
    })
}

fn check_fm_null() -> Result<CheckResult> {
    let modulation = ModulationSpec::new(250e6, 2.5e6, 1.0, 8)?;
    let aom = AomSpec {
        lambda: 532e-9,
        v_ac: None,
        f_lens: None,
        lateral_shift_override: Some(0.336e-3),
    };
    let carrier = BeamState::carrier(1e-3, SpatialMode::new(4e-3, 532e-9), 0.0)?;
    let beam = aom_modulate(
        &carrier,
        &modulation,
        &aom,
        &RfChainResponse::flat(&modulation),
        DriveEnvelope::UNIT,
        SplitGeometry::Lateral,
    )?;
    let h = photocurrent_harmonics(&beam, &DetectorSpec::new(Aperture::FullPlane, 0.5)?, 4)?;
    let ratio = h.get(1).norm() / h.dc();
    Ok(CheckResult {
        name: "pure FM null on full aperture",
        passed: ratio <= 1e-10,
        detail: format!("|c1|/c0 = {ratio:.3e}"),
    })
}

fn check_loop() -> Result<CheckResult> {
    let d = Complex64::new(0.02, -0.01);
    let (gain, dt, n) = (20.0, 1e-3, 200);
    let mut s = ControllerState::new(gain, dt, 0.0)?;
    let mut previous = d.norm();
    let mut monotone = true;
    for _ in 0..n {
        let r = d + Complex64::new(s.m_i, s.m_q);
        s = controller_step(&s, demodulate_iq(r, 0.0))?;
        let now = (d + Complex64::new(s.m_i, s.m_q)).norm();
        monotone &= now <= previous;
        previous = now;
    }
    let expected = (1.0 - gain * dt).powi(n) * d.norm();
    let rel = (previous / expected - 1.0).abs();
    Ok(CheckResult {
        name: "integrator loop geometric decay",
        passed: monotone && rel < 1e-9,
        detail: format!("residual/closed form - 1 = {rel:.1e}, monotone = {monotone}"),
    })
}

/// Runs every check; numerical errors count as failures.
pub fn run_selftest(opts: SelftestOptions) -> Vec<CheckResult> {
    let wrap = |name: &'static str, r: Result<CheckResult>| {
        r.unwrap_or_else(|e| CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        })
    };
    vec![
        wrap("overlap analytic vs quadrature", check_overlaps(opts)),
        wrap("Bessel identities", check_bessel()),
        wrap("pure FM null on full aperture", check_fm_null()),
        wrap("integrator loop geometric decay", check_loop()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        for c in run_selftest(SelftestOptions::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn perturbed_overlap_fails() {
        let results = run_selftest(SelftestOptions { perturb_analytic: 1e-6 });
        assert!(!results[0].passed);
        assert!(results[1..].iter().all(|c| c.passed));
    }
}
