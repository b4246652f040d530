//! Optical state and element transforms.
//!
//! A [`BeamState`] is a short list of FM sidebands. Each sideband carries a
//! complex field amplitude (sqrt(W)) and its own Gaussian [`SpatialMode`].
//! Elements are pure functions from one beam state to the next. Nothing here
//! ever samples the optical field in time; frequencies are bookkeeping.
//!
//! Units are SI throughout: Hz, m, rad, W.

mod bessel;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

pub use bessel::{bessel_amplitudes, default_n_max, SidebandAmplitudes, TRUNCATION_TOLERANCE};

/// FM drive applied to the AOM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    /// AOM frequency shift (Hz).
    pub f_carrier: f64,
    /// Modulation frequency (Hz).
    pub f_m: f64,
    /// FM modulation index.
    pub beta: f64,
    /// Sideband truncation order.
    pub n_max: usize,
}

impl ModulationSpec {
    pub fn new(f_carrier: f64, f_m: f64, beta: f64, n_max: usize) -> Result<Self> {
        let spec = Self {
            f_carrier,
            f_m,
            beta,
            n_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.f_carrier, "f_carrier")?;
        ensure_positive(self.f_m, "f_m")?;
        // Checks beta >= 0, n_max >= 1 and the truncation power rule.
        bessel_amplitudes(self.beta, self.n_max)?;
        Ok(())
    }

    pub fn sideband_frequency(&self, n: i64) -> f64 {
        self.f_carrier + n as f64 * self.f_m
    }
}

/// Geometry of the acousto-optic deflection and of lens L behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AomSpec {
    /// Optical wavelength (m).
    pub lambda: f64,
    /// Acoustic velocity in the crystal (m/s).
    pub v_ac: Option<f64>,
    /// Focal length of the lens that maps deflection angle to lateral shift (m).
    pub f_lens: Option<f64>,
    /// Measured sideband spacing at the detection plane (m); wins over the formula.
    pub lateral_shift_override: Option<f64>,
}

impl AomSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.lambda, "lambda")?;
        if let Some(v) = self.v_ac {
            ensure_positive(v, "v_ac")?;
        }
        if let Some(f) = self.f_lens {
            ensure_positive(f, "f_lens")?;
        }
        if let Some(a) = self.lateral_shift_override {
            ensure_positive(a, "lateral_shift")?;
        }
        if self.lateral_shift_override.is_none() && (self.v_ac.is_none() || self.f_lens.is_none()) {
            return Err(Error::InvalidParameter {
                name: "lateral_shift",
                reason: "either lateral_shift or both v_ac and f_lens must be given".into(),
            });
        }
        Ok(())
    }

    /// Deflection angle between successive sidebands, lambda f_m / v_ac.
    pub fn angular_step(&self, f_m: f64) -> Result<f64> {
        let v_ac = self.v_ac.ok_or(Error::InvalidParameter {
            name: "v_ac",
            reason: "required for the angular sideband splitting".into(),
        })?;
        Ok(self.lambda * f_m / v_ac)
    }
}

/// Lateral offset between successive sidebands behind lens L.
pub fn lateral_shift(aom: &AomSpec, f_m: f64) -> Result<f64> {
    ensure_finite(f_m, "f_m")?;
    if let Some(a) = aom.lateral_shift_override {
        return Ok(a);
    }
    let f_lens = aom.f_lens.ok_or(Error::InvalidParameter {
        name: "f_lens",
        reason: "required when lateral_shift is not given".into(),
    })?;
    Ok(f_lens * aom.angular_step(f_m)?)
}

/// Gaussian transverse mode. Field amplitude is
/// `sqrt(2/(pi w0^2)) exp(-((x-center_x)^2 + y^2)/w0^2) exp(i k tilt (x-center_x))`,
/// normalized to unit power. The tilt phase is referenced to the mode center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMode {
    pub w0: f64,
    pub center_x: f64,
    pub tilt: f64,
    /// Needed to turn a tilt angle into a phase gradient.
    pub wavelength: f64,
}

impl SpatialMode {
    pub fn new(w0: f64, wavelength: f64) -> Self {
        Self {
            w0,
            center_x: 0.0,
            tilt: 0.0,
            wavelength,
        }
    }

    pub fn with_center(mut self, center_x: f64) -> Self {
        self.center_x = center_x;
        self
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.w0, "w0")?;
        ensure_positive(self.wavelength, "wavelength")?;
        ensure_finite(self.center_x, "center_x")?;
        ensure_finite(self.tilt, "tilt")?;
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Normalized field at (x, y).
    pub fn field(&self, x: f64, y: f64) -> Complex64 {
        self.field_x(x) * self.field_y(y)
    }

    /// x factor of the field, including the tilt phase.
    pub fn field_x(&self, x: f64) -> Complex64 {
        let dx = x - self.center_x;
        let envelope = self.axis_norm() * (-dx * dx / (self.w0 * self.w0)).exp();
        if self.tilt == 0.0 {
            Complex64::new(envelope, 0.0)
        } else {
            Complex64::from_polar(envelope, self.wavenumber() * self.tilt * dx)
        }
    }

    /// y factor of the field.
    pub fn field_y(&self, y: f64) -> f64 {
        self.axis_norm() * (-y * y / (self.w0 * self.w0)).exp()
    }

    fn axis_norm(&self) -> f64 {
        (2.0 / (PI * self.w0 * self.w0)).sqrt().sqrt()
    }
}

/// One FM sideband: optical frequency f_carrier + order * f_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierComponent {
    pub order: i64,
    pub amplitude: Complex64,
    pub mode: SpatialMode,
}

/// The beam: sidebands sorted by order plus a linear polarization angle.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    components: Vec<FourierComponent>,
    pub pol_angle: f64,
}

impl BeamState {
    /// Components are sorted by order; duplicate orders are rejected.
    pub fn new(mut components: Vec<FourierComponent>, pol_angle: f64) -> Result<Self> {
        ensure_finite(pol_angle, "pol_angle")?;
        components.sort_by_key(|c| c.order);
        if components.windows(2).any(|w| w[0].order == w[1].order) {
            return Err(Error::InvalidParameter {
                name: "components",
                reason: "sideband orders must be unique".into(),
            });
        }
        for c in &components {
            ensure_finite(c.amplitude.re, "amplitude")?;
            ensure_finite(c.amplitude.im, "amplitude")?;
            c.mode.validate()?;
        }
        Ok(Self {
            components,
            pol_angle,
        })
    }

    /// Unmodulated input beam of the given power.
    pub fn carrier(power: f64, mode: SpatialMode, pol_angle: f64) -> Result<Self> {
        ensure_positive(power, "power")?;
        Self::new(
            vec![FourierComponent {
                order: 0,
                amplitude: Complex64::new(power.sqrt(), 0.0),
                mode,
            }],
            pol_angle,
        )
    }

    pub fn components(&self) -> &[FourierComponent] {
        &self.components
    }

    pub fn component(&self, order: i64) -> Option<&FourierComponent> {
        self.components
            .binary_search_by_key(&order, |c| c.order)
            .ok()
            .map(|i| &self.components[i])
    }

    /// Total optical power, sum of |a_n|^2 (W).
    pub fn power(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude.norm_sqr()).sum()
    }

    fn map_components(&self, f: impl Fn(&FourierComponent) -> FourierComponent) -> Self {
        Self {
            components: self.components.iter().map(f).collect(),
            pol_angle: self.pol_angle,
        }
    }
}

/// Complex RF-chain gain sampled on a frequency grid, linearly interpolated
/// in its real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RfChainResponse {
    points: Vec<(f64, Complex64)>,
}

impl RfChainResponse {
    pub fn new(points: Vec<(f64, Complex64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "rf_response",
                reason: "need at least two sample points".into(),
            });
        }
        for (f, h) in &points {
            ensure_finite(*f, "rf_response frequency")?;
            ensure_finite(h.re, "rf_response gain")?;
            ensure_finite(h.im, "rf_response gain")?;
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter {
                name: "rf_response",
                reason: "frequencies must be strictly increasing".into(),
            });
        }
        Ok(Self { points })
    }

    /// Unit gain over the comb of `modulation`, one sample beyond each edge.
    pub fn flat(modulation: &ModulationSpec) -> Self {
        Self::from_polynomial(modulation, &[1.0]).expect("flat response is valid")
    }

    /// Samples `sum_i coeffs[i] u^i` with `u = (f - f_carrier)/f_m` at every
    /// comb frequency from order -(n_max+1) to n_max+1.
    pub fn from_polynomial(modulation: &ModulationSpec, coeffs: &[f64]) -> Result<Self> {
        let edge = modulation.n_max as i64 + 1;
        let points = (-edge..=edge)
            .map(|n| {
                let u = n as f64;
                let gain = coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
                (modulation.sideband_frequency(n), Complex64::new(gain, 0.0))
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, Complex64)] {
        &self.points
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.points[0].0 <= lo && hi <= self.points[self.points.len() - 1].0
    }

    pub fn gain_at(&self, f: f64) -> Result<Complex64> {
        ensure_finite(f, "frequency")?;
        let (first, last) = (self.points[0].0, self.points[self.points.len() - 1].0);
        if f < first || f > last {
            return Err(Error::InvalidParameter {
                name: "rf_response",
                reason: format!("frequency {f} Hz outside the table span [{first}, {last}] Hz"),
            });
        }
        let upper = self.points.partition_point(|(fp, _)| *fp < f);
        if upper == 0 {
            return Ok(self.points[0].1);
        }
        let (f0, h0) = self.points[upper - 1];
        let (f1, h1) = self.points[upper];
        let t = (f - f0) / (f1 - f0);
        Ok(h0 + (h1 - h0) * t)
    }
}

/// Single-mode fiber with its input coupling misalignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub w_fiber: f64,
    pub offset_x: f64,
    pub tilt: f64,
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.w_fiber, "w_fiber")?;
        ensure_finite(self.offset_x, "offset_x")?;
        ensure_finite(self.tilt, "tilt")?;
        Ok(())
    }

    /// The fiber mode as seen from its input face.
    pub fn input_mode(&self, wavelength: f64) -> SpatialMode {
        SpatialMode::new(self.w_fiber, wavelength)
            .with_center(self.offset_x)
            .with_tilt(self.tilt)
    }
}

/// Polarizing beam splitter: power reflectivity along the two eigen-axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterSpec {
    pub r_p: f64,
    pub r_s: f64,
}

impl SplitterSpec {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.r_p, "r_p"), (self.r_s, "r_s")] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("reflectivity must lie in [0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Power reflectivity for linear polarization at `pol_angle` from the p axis.
    pub fn reflectivity(&self, pol_angle: f64) -> f64 {
        let (s, c) = pol_angle.sin_cos();
        self.r_p * c * c + self.r_s * s * s
    }
}

/// AM actuator on the RF drive: envelope `1 + m_i cos(w t) + m_q sin(w t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveEnvelope {
    pub m_i: f64,
    pub m_q: f64,
}

impl DriveEnvelope {
    pub const UNIT: Self = Self { m_i: 0.0, m_q: 0.0 };

    pub fn new(m_i: f64, m_q: f64) -> Self {
        Self { m_i, m_q }
    }

    pub fn depth(&self) -> f64 {
        self.m_i.hypot(self.m_q)
    }

    /// Mixing coefficient that moves amplitude from order n-1 to n.
    pub fn upshift(&self) -> Complex64 {
        Complex64::new(self.m_i, -self.m_q) * 0.5
    }

    /// Mixing coefficient that moves amplitude from order n+1 to n.
    pub fn downshift(&self) -> Complex64 {
        Complex64::new(self.m_i, self.m_q) * 0.5
    }
}

/// How sidebands leave the AOM relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitGeometry {
    /// Lens plane: centers n*A, all tilts zero.
    #[default]
    Lateral,
    /// Centers n*A and tilts n*lambda*f_m/v_ac (fiber input before the lens has acted).
    LateralAndAngular,
}

/// Writes the FM comb onto a single-component carrier.
///
/// Sideband n gets `a_carrier J_n(beta) H(f_carrier + n f_m)`; the drive
/// envelope then mixes neighbouring orders with coefficients
/// `(m_i -/+ i m_q)/2`, dropping anything pushed beyond n_max. Components
/// with exactly zero amplitude are omitted.
pub fn aom_modulate(
    carrier: &BeamState,
    modulation: &ModulationSpec,
    aom: &AomSpec,
    rf: &RfChainResponse,
    drive: DriveEnvelope,
    geometry: SplitGeometry,
) -> Result<BeamState> {
    let [input] = carrier.components() else {
        return Err(Error::InvalidParameter {
            name: "carrier",
            reason: "must contain exactly one component".into(),
        });
    };
    if input.order != 0 {
        return Err(Error::InvalidParameter {
            name: "carrier",
            reason: "carrier component must have order 0".into(),
        });
    }
    ensure_finite(drive.m_i, "m_i")?;
    ensure_finite(drive.m_q, "m_q")?;
    if drive.depth() > 1.0 {
        return Err(Error::Overmodulation {
            depth: drive.depth(),
        });
    }
    let bessel = bessel_amplitudes(modulation.beta, modulation.n_max)?;
    let shift = lateral_shift(aom, modulation.f_m)?;
    let tilt_step = match geometry {
        SplitGeometry::Lateral => 0.0,
        SplitGeometry::LateralAndAngular => aom.angular_step(modulation.f_m)?,
    };

    let n_max = modulation.n_max as i64;
    let base = (-n_max..=n_max)
        .map(|n| {
            let h = rf.gain_at(modulation.sideband_frequency(n))?;
            Ok(input.amplitude * bessel.get(n) * h)
        })
        .collect::<Result<Vec<_>>>()?;
    let at = |n: i64| -> Complex64 {
        if n.abs() > n_max {
            Complex64::new(0.0, 0.0)
        } else {
            base[(n + n_max) as usize]
        }
    };
    let (up, down) = (drive.upshift(), drive.downshift());

    let components = (-n_max..=n_max)
        .filter_map(|n| {
            let amplitude = at(n) + up * at(n - 1) + down * at(n + 1);
            if amplitude == Complex64::new(0.0, 0.0) {
                return None;
            }
            let mode = SpatialMode {
                center_x: input.mode.center_x + n as f64 * shift,
                tilt: input.mode.tilt + n as f64 * tilt_step,
                ..input.mode
            };
            Some(FourierComponent {
                order: n,
                amplitude,
                mode,
            })
        })
        .collect();
    BeamState::new(components, carrier.pol_angle)
}

/// Ideal lossless lens/telescope: converts tilts to nothing, rescales lateral
/// offsets by `shift_scale` and sets every waist to `new_w0`.
pub fn apply_lens_telescope(beam: &BeamState, new_w0: f64, shift_scale: f64) -> Result<BeamState> {
    ensure_positive(new_w0, "new_w0")?;
    ensure_finite(shift_scale, "shift_scale")?;
    Ok(beam.map_components(|c| FourierComponent {
        mode: SpatialMode {
            w0: new_w0,
            center_x: c.mode.center_x * shift_scale,
            tilt: 0.0,
            wavelength: c.mode.wavelength,
        },
        ..*c
    }))
}

/// Polarization-dependent split into (reflected, transmitted).
pub fn split(beam: &BeamState, splitter: &SplitterSpec) -> Result<(BeamState, BeamState)> {
    splitter.validate()?;
    let r = splitter.reflectivity(beam.pol_angle);
    let (tr, tt) = (r.sqrt(), (1.0 - r).sqrt());
    let reflected = beam.map_components(|c| FourierComponent {
        amplitude: c.amplitude * tr,
        ..*c
    });
    let transmitted = beam.map_components(|c| FourierComponent {
        amplitude: c.amplitude * tt,
        ..*c
    });
    Ok((reflected, transmitted))
}

/// Half-wave plate with its fast axis at `plate_angle`.
pub fn rotate_halfwave(beam: &BeamState, plate_angle: f64) -> BeamState {
    BeamState {
        components: beam.components.clone(),
        pol_angle: 2.0 * plate_angle - beam.pol_angle,
    }
}

/// Complex amplitude coupling of `mode` into the fiber's fundamental mode.
///
/// Closed form of the overlap of two Gaussians with waists w_a, w_f,
/// relative offset d and relative tilt theta:
/// `2 w_a w_f/(w_a^2+w_f^2) * exp(b^2/(4p) - d^2/w_a^2 - i k theta_a d)` with
/// `p = 1/w_a^2 + 1/w_f^2` and `b = 2d/w_a^2 + i k theta`. Its modulus
/// reduces to `exp(-d^2/(w_a^2+w_f^2)) exp(-(k theta)^2 w_a^2 w_f^2 / (4 (w_a^2+w_f^2)))`
/// times the waist-mismatch factor.
pub fn fiber_coupling(mode: &SpatialMode, fiber: &FiberSpec) -> Complex64 {
    let (wa, wf) = (mode.w0, fiber.w_fiber);
    let k = mode.wavenumber();
    let d = mode.center_x - fiber.offset_x;
    let theta = mode.tilt - fiber.tilt;
    let sum_sq = wa * wa + wf * wf;
    let p = 1.0 / (wa * wa) + 1.0 / (wf * wf);
    let b = Complex64::new(2.0 * d / (wa * wa), k * theta);
    let exponent = b * b / (4.0 * p) - d * d / (wa * wa) - Complex64::new(0.0, k * mode.tilt * d);
    exponent.exp() * (2.0 * wa * wf / sum_sq)
}

/// Projects every sideband onto the fiber mode. All output components share
/// one mode record: waist w_fiber, centered, untilted.
pub fn fiber_project(beam: &BeamState, fiber: &FiberSpec) -> Result<BeamState> {
    fiber.validate()?;
    Ok(beam.map_components(|c| FourierComponent {
        order: c.order,
        amplitude: c.amplitude * fiber_coupling(&c.mode, fiber),
        mode: SpatialMode::new(fiber.w_fiber, c.mode.wavelength),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 532e-9;

    fn fm(beta: f64) -> ModulationSpec {
        ModulationSpec::new(250e6, 2.5e6, beta, 8).unwrap()
    }

    fn aom_with_shift(a: f64) -> AomSpec {
        AomSpec {
            lambda: LAMBDA,
            v_ac: Some(4200.0),
            f_lens: Some(1.061),
            lateral_shift_override: Some(a),
        }
    }

    fn carrier(w0: f64) -> BeamState {
        BeamState::carrier(1e-3, SpatialMode::new(w0, LAMBDA), 0.0).unwrap()
    }

    #[test]
    fn lateral_shift_override_and_formula() {
        assert_eq!(lateral_shift(&aom_with_shift(0.336e-3), 2.5e6).unwrap(), 0.336e-3);
        let aom = AomSpec {
            lateral_shift_override: None,
            ..aom_with_shift(1.0)
        };
        let a = lateral_shift(&aom, 2.5e6).unwrap();
        // 1.061 * 532e-9 * 2.5e6 / 4200
        assert!((a - 3.359_833_333e-4).abs() < 1e-12, "{a}");
        assert_eq!(lateral_shift(&aom, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn aom_spec_needs_shift_or_geometry() {
        let aom = AomSpec {
            lambda: LAMBDA,
            v_ac: None,
            f_lens: Some(1.0),
            lateral_shift_override: None,
        };
        assert!(aom.validate().is_err());
        assert!(aom_with_shift(1e-4).validate().is_ok());
    }

    #[test]
    fn flat_comb_is_bessel_with_shifted_centers() {
        let m = fm(1.0);
        let a = 0.336e-3;
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(a),
            &RfChainResponse::flat(&m),
            DriveEnvelope::UNIT,
            SplitGeometry::Lateral,
        )
        .unwrap();
        let j = bessel_amplitudes(1.0, 8).unwrap();
        assert_eq!(beam.components().len(), 17);
        for c in beam.components() {
            let expected = 1e-3f64.sqrt() * j.get(c.order);
            assert!((c.amplitude - expected).norm() < 1e-18);
            assert_eq!(c.mode.center_x, c.order as f64 * a);
            assert_eq!(c.mode.tilt, 0.0);
        }
        assert!((beam.power() - 1e-3).abs() < 1e-3 * 1e-9);
    }

    #[test]
    fn zero_index_leaves_single_carrier() {
        let m = ModulationSpec::new(250e6, 2.5e6, 0.0, 8).unwrap();
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(0.336e-3),
            &RfChainResponse::flat(&m),
            DriveEnvelope::UNIT,
            SplitGeometry::Lateral,
        )
        .unwrap();
        assert_eq!(beam.components().len(), 1);
        assert_eq!(beam.components()[0].order, 0);
        assert_eq!(beam.components()[0].mode.center_x, 0.0);
    }

    #[test]
    fn angular_geometry_tilts_sidebands() {
        let m = fm(1.0);
        let aom = aom_with_shift(0.336e-3);
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom,
            &RfChainResponse::flat(&m),
            DriveEnvelope::UNIT,
            SplitGeometry::LateralAndAngular,
        )
        .unwrap();
        let step = LAMBDA * 2.5e6 / 4200.0;
        for c in beam.components() {
            assert!((c.mode.tilt - c.order as f64 * step).abs() < 1e-18);
        }
    }

    #[test]
    fn drive_mixes_neighbouring_orders() {
        let m = fm(0.0);
        let drive = DriveEnvelope::new(0.2, 0.1);
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(0.336e-3),
            &RfChainResponse::flat(&m),
            drive,
            SplitGeometry::Lateral,
        )
        .unwrap();
        let a0 = 1e-3f64.sqrt();
        assert_eq!(beam.components().len(), 3);
        let up = beam.component(1).unwrap().amplitude;
        let down = beam.component(-1).unwrap().amplitude;
        assert!((up - Complex64::new(0.1, -0.05) * a0).norm() < 1e-15);
        assert!((down - Complex64::new(0.1, 0.05) * a0).norm() < 1e-15);
    }

    #[test]
    fn overmodulation_is_an_error() {
        let m = fm(1.0);
        let err = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(0.336e-3),
            &RfChainResponse::flat(&m),
            DriveEnvelope::new(0.8, 0.8),
            SplitGeometry::Lateral,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Overmodulation { .. }));
    }

    #[test]
    fn rf_table_interpolates_and_bounds() {
        let rf = RfChainResponse::new(vec![
            (0.0, Complex64::new(1.0, 0.0)),
            (10.0, Complex64::new(2.0, 1.0)),
        ])
        .unwrap();
        assert_eq!(rf.gain_at(5.0).unwrap(), Complex64::new(1.5, 0.5));
        assert_eq!(rf.gain_at(10.0).unwrap(), Complex64::new(2.0, 1.0));
        assert!(rf.gain_at(10.5).is_err());
        assert!(RfChainResponse::new(vec![(1.0, Complex64::new(1.0, 0.0)), (1.0, Complex64::new(1.0, 0.0))]).is_err());
    }

    #[test]
    fn polynomial_response_spans_comb() {
        let m = fm(1.0);
        let rf = RfChainResponse::from_polynomial(&m, &[1.0, 0.01]).unwrap();
        assert!(rf.covers(m.sideband_frequency(-8), m.sideband_frequency(8)));
        let h = rf.gain_at(m.sideband_frequency(3)).unwrap();
        assert!((h.re - 1.03).abs() < 1e-15);
    }

    #[test]
    fn telescope_identity_and_scaling() {
        let m = fm(1.0);
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(0.336e-3),
            &RfChainResponse::flat(&m),
            DriveEnvelope::UNIT,
            SplitGeometry::LateralAndAngular,
        )
        .unwrap();
        let flat = apply_lens_telescope(&beam, 4e-3, 1.0).unwrap();
        for (a, b) in flat.components().iter().zip(beam.components()) {
            assert_eq!(a.mode.center_x, b.mode.center_x);
            assert_eq!(a.amplitude, b.amplitude);
            assert_eq!(a.mode.tilt, 0.0);
        }
        let doubled = apply_lens_telescope(&beam, 2e-3, 2.0).unwrap();
        for c in doubled.components() {
            assert!((c.mode.center_x - 2.0 * c.order as f64 * 0.336e-3).abs() < 1e-18);
            assert_eq!(c.mode.w0, 2e-3);
        }
        assert_eq!(doubled.power(), beam.power());
        assert!(apply_lens_telescope(&beam, 0.0, 1.0).is_err());
    }

    #[test]
    fn splitter_ratios() {
        let beam = carrier(4e-3);
        let half = SplitterSpec { r_p: 0.5, r_s: 0.5 };
        for theta in [0.0, 0.3, 1.2] {
            let b = BeamState { pol_angle: theta, ..beam.clone() };
            let (r, t) = split(&b, &half).unwrap();
            assert!((r.power() - 0.5e-3).abs() < 1e-15);
            assert!((t.power() - 0.5e-3).abs() < 1e-15);
        }
        let (r, t) = split(&beam, &SplitterSpec { r_p: 1.0, r_s: 0.0 }).unwrap();
        assert!((r.power() - 1e-3).abs() < 1e-15);
        assert_eq!(t.power(), 0.0);

        let b = BeamState { pol_angle: PI / 4.0, ..beam };
        let (r, t) = split(&b, &SplitterSpec { r_p: 0.6, r_s: 0.4 }).unwrap();
        assert!((r.power() / 1e-3 - 0.5).abs() < 1e-12);
        assert!((t.power() / 1e-3 - 0.5).abs() < 1e-12);
        assert!(SplitterSpec { r_p: 1.1, r_s: 0.0 }.validate().is_err());
    }

    #[test]
    fn halfwave_plate() {
        let beam = carrier(4e-3);
        let b = BeamState { pol_angle: 0.3, ..beam.clone() };
        assert!((rotate_halfwave(&b, 0.3).pol_angle - 0.3).abs() < 1e-16);
        assert!((rotate_halfwave(&beam, PI / 8.0).pol_angle - PI / 4.0).abs() < 1e-16);
        let twice = rotate_halfwave(&rotate_halfwave(&b, 0.7), 0.7);
        assert!((twice.pol_angle - 0.3).abs() < 1e-15);
    }

    #[test]
    fn matched_fiber_couples_perfectly() {
        let mode = SpatialMode::new(4e-3, LAMBDA);
        let fiber = FiberSpec {
            w_fiber: 4e-3,
            offset_x: 0.0,
            tilt: 0.0,
        };
        let c = fiber_coupling(&mode, &fiber);
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn offset_coupling_magnitude() {
        let w = 4e-3;
        let d = 1e-3;
        let mode = SpatialMode::new(w, LAMBDA).with_center(d);
        let fiber = FiberSpec {
            w_fiber: w,
            offset_x: 0.0,
            tilt: 0.0,
        };
        let c = fiber_coupling(&mode, &fiber);
        assert!((c.norm() - (-d * d / (2.0 * w * w)).exp()).abs() < 1e-15);
    }

    #[test]
    fn fiber_output_modes_are_identical() {
        let m = fm(1.0);
        let beam = aom_modulate(
            &carrier(4e-3),
            &m,
            &aom_with_shift(0.336e-3),
            &RfChainResponse::flat(&m),
            DriveEnvelope::UNIT,
            SplitGeometry::LateralAndAngular,
        )
        .unwrap();
        let fiber = FiberSpec {
            w_fiber: 3e-3,
            offset_x: 0.1e-3,
            tilt: 1e-5,
        };
        let out = fiber_project(&beam, &fiber).unwrap();
        let first = out.components()[0].mode;
        assert!(out.components().iter().all(|c| c.mode == first));
        assert_eq!(first.center_x, 0.0);
        assert_eq!(first.tilt, 0.0);
        assert!(out.power() <= beam.power());
        for (a, b) in out.components().iter().zip(beam.components()) {
            assert!(a.amplitude.norm() <= b.amplitude.norm());
        }
    }

    #[test]
    fn beam_rejects_duplicate_orders() {
        let mode = SpatialMode::new(1e-3, LAMBDA);
        let c = FourierComponent {
            order: 1,
            amplitude: Complex64::new(1.0, 0.0),
            mode,
        };
        assert!(BeamState::new(vec![c, c], 0.0).is_err());
    }

    #[test]
    fn mode_field_is_normalized() {
        // Midpoint rule over +-6 w0, 400 x 400.
        let mode = SpatialMode::new(2e-3, LAMBDA).with_center(0.5e-3).with_tilt(2e-4);
        let n = 400;
        let h = 12.0 * mode.w0 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let x = mode.center_x - 6.0 * mode.w0 + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -6.0 * mode.w0 + (j as f64 + 0.5) * h;
                sum += mode.field(x, y).norm_sqr();
            }
        }
        assert!((sum * h * h - 1.0).abs() < 1e-10);
    }
}
