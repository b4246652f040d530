//! Photodetection of a multi-sideband, multi-mode beam.
//!
//! The photocurrent of a beam `E = sum_n a_n g_n(x, y) e^{i n w t}` seen
//! through an aperture is `i(t) = sum_k c_k e^{i k w t}` with
//! `c_k = rho sum_n a_{n+k} conj(a_n) O(g_{n+k}, g_n)`, where `O` is the
//! aperture-restricted overlap of two modes. Equal-waist, untilted modes
//! (everything behind a lens) have closed-form overlaps in terms of `erfc`;
//! anything else goes through [`overlap_quadrature_oracle`].

mod fig2;
mod quadrature;
mod timeseries;

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::beamline::{BeamState, SpatialMode};
use crate::error::{ensure_finite, ensure_positive, Error, Result};

pub use fig2::{fig2_scan, fig2_scan_period_oracle, Fig2Point};
pub use quadrature::{gauss_legendre_16, overlap_quadrature_oracle};
pub use timeseries::{synthesize_timeseries, AmTone, NoiseSpec, MAX_SAMPLES};

/// Harmonic cap used when nothing else is configured.
pub const DEFAULT_K_MAX: usize = 4;

/// Detection region in the detector plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aperture {
    FullPlane,
    /// Opaque screen covering `x < edge_x`.
    HalfPlaneScreen { edge_x: f64 },
    /// Finite photodiode area.
    OffsetRect {
        center_x: f64,
        center_y: f64,
        half_width: f64,
        half_height: f64,
    },
}

impl Aperture {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Aperture::FullPlane => Ok(()),
            Aperture::HalfPlaneScreen { edge_x } => {
                if edge_x.is_nan() {
                    Err(Error::NonFinite("edge_x"))
                } else {
                    Ok(())
                }
            }
            Aperture::OffsetRect {
                center_x,
                center_y,
                half_width,
                half_height,
            } => {
                ensure_finite(center_x, "center_x")?;
                ensure_finite(center_y, "center_y")?;
                ensure_positive(half_width, "half_width")?;
                ensure_positive(half_height, "half_height")?;
                Ok(())
            }
        }
    }

    /// Axis-aligned bounds `(x_lo, x_hi, y_lo, y_hi)`; infinite where open.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let inf = f64::INFINITY;
        match *self {
            Aperture::FullPlane => (-inf, inf, -inf, inf),
            Aperture::HalfPlaneScreen { edge_x } => (edge_x, inf, -inf, inf),
            Aperture::OffsetRect {
                center_x,
                center_y,
                half_width,
                half_height,
            } => (
                center_x - half_width,
                center_x + half_width,
                center_y - half_height,
                center_y + half_height,
            ),
        }
    }
}

/// Photodiode: aperture plus responsivity `rho` (A/W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub aperture: Aperture,
    pub rho: f64,
}

impl DetectorSpec {
    pub fn new(aperture: Aperture, rho: f64) -> Result<Self> {
        let spec = Self { aperture, rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.aperture.validate()?;
        ensure_positive(self.rho, "rho")?;
        Ok(())
    }
}

/// Fraction of a normalized `exp(-2 (x - mean)^2 / w^2)` profile inside
/// `[lo, hi]`, written so that tail intervals keep full relative precision.
fn gaussian_fraction(lo: f64, hi: f64, mean: f64, w: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let s = SQRT_2 * (lo - mean) / w;
    let t = SQRT_2 * (hi - mean) / w;
    if s >= 0.0 {
        0.5 * (libm::erfc(s) - libm::erfc(t))
    } else if t <= 0.0 {
        0.5 * (libm::erfc(-t) - libm::erfc(-s))
    } else {
        1.0 - 0.5 * libm::erfc(-s) - 0.5 * libm::erfc(t)
    }
}

/// Closed-form overlap of two equal-waist, untilted modes.
fn analytic_overlap(a: &SpatialMode, b: &SpatialMode, aperture: &Aperture) -> f64 {
    let w = a.w0;
    let delta = a.center_x - b.center_x;
    let mid = 0.5 * (a.center_x + b.center_x);
    let base = (-delta * delta / (2.0 * w * w)).exp();
    let (x_lo, x_hi, y_lo, y_hi) = aperture.bounds();
    match aperture {
        Aperture::FullPlane => base,
        Aperture::HalfPlaneScreen { edge_x } => base * 0.5 * libm::erfc(SQRT_2 * (edge_x - mid) / w),
        Aperture::OffsetRect { .. } => {
            base * gaussian_fraction(x_lo, x_hi, mid, w) * gaussian_fraction(y_lo, y_hi, 0.0, w)
        }
    }
}

fn analytic_path_applies(a: &SpatialMode, b: &SpatialMode) -> bool {
    a.w0 == b.w0 && a.tilt == 0.0 && b.tilt == 0.0
}

/// Aperture-restricted overlap `integral of g_a conj(g_b)`.
///
/// Equal waists and zero tilts use the closed form; any other pair is
/// integrated numerically, never rejected.
pub fn overlap(a: &SpatialMode, b: &SpatialMode, aperture: &Aperture) -> Result<Complex64> {
    a.validate()?;
    b.validate()?;
    aperture.validate()?;
    if analytic_path_applies(a, b) {
        Ok(Complex64::new(analytic_overlap(a, b, aperture), 0.0))
    } else {
        overlap_quadrature_oracle(a, b, aperture)
    }
}

/// Complex photocurrent harmonics `c_k` for `k = 0..=k_max` (A).
///
/// `c_{-k} = conj(c_k)` is implied and served by [`HarmonicSet::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSet {
    coeffs: Vec<Complex64>,
    clipped: bool,
}

impl HarmonicSet {
    /// `coeffs[k]` is `c_k`; `coeffs[0]` must be real and non-negative.
    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Result<Self> {
        let Some(dc) = coeffs.first() else {
            return Err(Error::InvalidParameter {
                name: "harmonics",
                reason: "at least the DC term is required".into(),
            });
        };
        if dc.im != 0.0 || dc.re < 0.0 {
            return Err(Error::InvalidParameter {
                name: "harmonics",
                reason: format!("DC term must be real and >= 0, got {dc}"),
            });
        }
        Ok(Self {
            coeffs,
            clipped: false,
        })
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True when the requested k_max exceeded what the comb can produce.
    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn get(&self, k: i64) -> Complex64 {
        match self.coeffs.get(k.unsigned_abs() as usize) {
            None => Complex64::new(0.0, 0.0),
            Some(c) if k < 0 => c.conj(),
            Some(c) => *c,
        }
    }

    pub fn dc(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Peak AM depth at the modulation frequency, `2 |c_1| / c_0`.
    pub fn relative_am(&self) -> f64 {
        2.0 * self.get(1).norm() / self.dc()
    }

    /// Photocurrent at modulation phase `phase = w t`.
    pub fn evaluate(&self, phase: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| 2.0 * (c * Complex64::from_polar(1.0, k as f64 * phase)).re)
            .sum::<f64>()
            + self.dc()
    }
}

/// Photocurrent harmonics of `beam` on `detector`.
///
/// A beam of N components cannot produce harmonics beyond N-1; larger
/// `k_max` is clipped and the set is flagged.
pub fn photocurrent_harmonics(beam: &BeamState, detector: &DetectorSpec, k_max: usize) -> Result<HarmonicSet> {
    detector.validate()?;
    let comps = beam.components();
    let limit = comps.len().saturating_sub(1);
    let clipped = k_max > limit;
    let k_max = k_max.min(limit);

    let mut coeffs = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max as i64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for low in comps {
            if let Some(high) = beam.component(low.order + k) {
                let o = overlap(&high.mode, &low.mode, &detector.aperture)?;
                sum += high.amplitude * low.amplitude.conj() * o;
            }
        }
        coeffs.push(sum * detector.rho);
    }
    // Diagonal overlaps are real; drop quadrature round-off in the DC term.
    coeffs[0] = Complex64::new(coeffs[0].re.max(0.0), 0.0);
    Ok(HarmonicSet { coeffs, clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamline::{
        aom_modulate, AomSpec, DriveEnvelope, ModulationSpec, RfChainResponse, SplitGeometry,
    };

    const LAMBDA: f64 = 532e-9;

    fn mode(w: f64, x: f64) -> SpatialMode {
        SpatialMode::new(w, LAMBDA).with_center(x)
    }

    fn fm_beam(beta: f64, shift: f64, coeffs: &[f64]) -> BeamState {
        let m = ModulationSpec::new(250e6, 2.5e6, beta, 8).unwrap();
        let aom = AomSpec {
            lambda: LAMBDA,
            v_ac: None,
            f_lens: None,
            lateral_shift_override: Some(shift),
        };
        let carrier = BeamState::carrier(1e-3, SpatialMode::new(4e-3, LAMBDA), 0.0).unwrap();
        aom_modulate(
            &carrier,
            &m,
            &aom,
            &RfChainResponse::from_polynomial(&m, coeffs).unwrap(),
            DriveEnvelope::UNIT,
            SplitGeometry::Lateral,
        )
        .unwrap()
    }

    #[test]
    fn identical_modes_full_plane() {
        let a = mode(4e-3, 0.3e-3);
        assert_eq!(overlap(&a, &a, &Aperture::FullPlane).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn shifted_modes_full_plane() {
        let o = overlap(&mode(4e-3, 0.336e-3), &mode(4e-3, 0.0), &Aperture::FullPlane).unwrap();
        // exp(-(0.336/4)^2 / 2), frozen from the quadrature oracle.
        assert!((o.re - 0.996_478_216_079_741_5).abs() < 1e-12, "{o}");
        let q = overlap_quadrature_oracle(&mode(4e-3, 0.336e-3), &mode(4e-3, 0.0), &Aperture::FullPlane).unwrap();
        assert!((q.re - 0.996_478_216_079_741_5).abs() < 1e-10);
    }

    #[test]
    fn screen_at_midpoint_halves_overlap() {
        let (a, b) = (mode(4e-3, 0.5e-3), mode(4e-3, -0.1e-3));
        let full = overlap(&a, &b, &Aperture::FullPlane).unwrap();
        let half = overlap(&a, &b, &Aperture::HalfPlaneScreen { edge_x: 0.2e-3 }).unwrap();
        assert!((half.re - 0.5 * full.re).abs() < 1e-16);
    }

    #[test]
    fn overlap_is_hermitian_on_both_paths() {
        let a = mode(3e-3, 0.4e-3).with_tilt(1e-4);
        let b = mode(3e-3, -0.2e-3);
        let ap = Aperture::OffsetRect {
            center_x: 0.5e-3,
            center_y: -0.2e-3,
            half_width: 2e-3,
            half_height: 1e-3,
        };
        let ab = overlap(&a, &b, &ap).unwrap();
        let ba = overlap(&b, &a, &ap).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-13);
        assert!(ab.im.abs() > 1e-6, "tilted pair should carry a phase");
    }

    #[test]
    fn unequal_waists_dispatch_to_quadrature() {
        let a = mode(3e-3, 0.0);
        let b = mode(4e-3, 0.0);
        let o = overlap(&a, &b, &Aperture::FullPlane).unwrap();
        let expected = 2.0 * 3.0 * 4.0 / (9.0 + 16.0);
        assert!((o.re - expected).abs() < 1e-10);
    }

    #[test]
    fn non_finite_mode_is_an_error() {
        let a = mode(3e-3, f64::NAN);
        assert!(overlap(&a, &a, &Aperture::FullPlane).is_err());
        let bad = Aperture::OffsetRect {
            center_x: 0.0,
            center_y: 0.0,
            half_width: -1.0,
            half_height: 1.0,
        };
        assert!(overlap(&mode(1e-3, 0.0), &mode(1e-3, 0.0), &bad).is_err());
    }

    #[test]
    fn tail_fraction_keeps_precision() {
        let f = gaussian_fraction(5e-3, 6e-3, 0.0, 1e-3);
        let expected = 0.5 * (libm::erfc(5.0 * SQRT_2) - libm::erfc(6.0 * SQRT_2));
        assert!(((f - expected) / expected).abs() < 1e-12);
        assert!(f > 0.0);
    }

    #[test]
    fn pure_fm_has_no_am_on_full_plane() {
        let beam = fm_beam(1.0, 0.336e-3, &[1.0]);
        let det = DetectorSpec::new(Aperture::FullPlane, 0.5).unwrap();
        let h = photocurrent_harmonics(&beam, &det, 4).unwrap();
        assert!((h.dc() - 0.5 * beam.power()).abs() < 1e-15);
        for k in 1..=4 {
            assert!(h.get(k).norm() <= 1e-10 * h.dc(), "k = {k}: {}", h.get(k));
        }
    }

    #[test]
    fn rf_slope_produces_percent_level_am() {
        // H_n = 1 + 0.01 n: c_1 / c_0 ~ 0.01 beta, so 2|c_1|/c_0 ~ 2 %.
        let beam = fm_beam(1.0, 0.336e-3, &[1.0, 0.01]);
        let det = DetectorSpec::new(Aperture::FullPlane, 1.0).unwrap();
        let h = photocurrent_harmonics(&beam, &det, 4).unwrap();
        let am = h.relative_am();
        assert!((am - 0.02).abs() < 2e-4, "{am}");
        // Direct sum of J_n J_{n+1} (H_n H_{n+1} - 1) times the neighbour
        // overlap exp(-A^2 / (2 w^2)), as the independent route.
        let j = crate::beamline::bessel_amplitudes(1.0, 8).unwrap();
        let direct: f64 = (-8..8)
            .map(|n| {
                let (hn, hn1) = (1.0 + 0.01 * n as f64, 1.0 + 0.01 * (n + 1) as f64);
                j.get(n) * j.get(n + 1) * (hn * hn1 - 1.0)
            })
            .sum::<f64>()
            * 1e-3
            * (-(0.336f64 / 4.0).powi(2) / 2.0).exp();
        assert!((h.get(1).re - direct).abs() < 1e-15, "{} vs {direct}", h.get(1).re);
    }

    #[test]
    fn harmonic_cap_is_clipped() {
        let beam = fm_beam(0.0, 0.336e-3, &[1.0]);
        let det = DetectorSpec::new(Aperture::FullPlane, 1.0).unwrap();
        let h = photocurrent_harmonics(&beam, &det, 4).unwrap();
        assert!(h.clipped());
        assert_eq!(h.k_max(), 0);
        let full = photocurrent_harmonics(&fm_beam(1.0, 0.336e-3, &[1.0]), &det, 4).unwrap();
        assert!(!full.clipped());
    }

    #[test]
    fn harmonic_set_symmetry() {
        let h = HarmonicSet::from_coefficients(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.1, 0.2),
        ])
        .unwrap();
        assert_eq!(h.get(-1), Complex64::new(0.1, -0.2));
        assert_eq!(h.get(5), Complex64::new(0.0, 0.0));
        assert!((h.evaluate(0.0) - 1.2).abs() < 1e-15);
        assert!(HarmonicSet::from_coefficients(vec![Complex64::new(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn screen_is_monotone_in_edge() {
        let (a, b) = (mode(4e-3, 0.336e-3), mode(4e-3, 0.0));
        let mut prev = f64::INFINITY;
        for i in -20..=20 {
            let x = i as f64 * 0.5e-3;
            let o = overlap(&a, &b, &Aperture::HalfPlaneScreen { edge_x: x }).unwrap().norm();
            assert!(o <= prev);
            prev = o;
        }
    }
}
