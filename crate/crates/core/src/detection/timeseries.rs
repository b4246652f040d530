//! Envelope-domain synthesis of the detected photocurrent.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::HarmonicSet;
use crate::error::{ensure_positive, Error, Result};

/// Upper bound on synthesized samples (2^26).
pub const MAX_SAMPLES: usize = 1 << 26;

/// Technical intensity noise and an optional detector floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub seed: u64,
    /// RMS of the multiplicative low-frequency intensity noise.
    pub rin_level: f64,
    /// Corner of the one-pole shaping filter (Hz).
    pub corner_hz: f64,
    /// RMS of an additive white floor, relative to `c_0`.
    pub floor_level: f64,
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self {
            seed: 0,
            rin_level: 0.0,
            corner_hz: 1.0,
            floor_level: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rin_level >= 0.0 && self.rin_level.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rin_level",
                reason: format!("must be finite and >= 0, got {}", self.rin_level),
            });
        }
        if !(self.floor_level >= 0.0 && self.floor_level.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "floor_level",
                reason: format!("must be finite and >= 0, got {}", self.floor_level),
            });
        }
        ensure_positive(self.corner_hz, "corner_hz")?;
        Ok(())
    }

    /// Pole of the discrete one-pole filter at sample rate `f_s`.
    pub fn pole(&self, f_s: f64) -> f64 {
        (-2.0 * PI * self.corner_hz / f_s).exp()
    }
}

/// Extra AM tone `c_0 depth cos(2 pi (f_m + offset_hz) t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmTone {
    pub depth: f64,
    pub offset_hz: f64,
}

/// Samples `i(t_j) = [sum_k c_k e^{i k w t_j} + tone] (1 + nu(t_j)) + floor`
/// at `t_j = j / f_s`.
///
/// `nu` is white Gaussian noise through `y_j = a y_{j-1} + (1-a) x_j`,
/// started in its stationary state and scaled to `rin_level` RMS.
/// Identical inputs and seed give identical samples.
pub fn synthesize_timeseries(
    harmonics: &HarmonicSet,
    f_m: f64,
    f_s: f64,
    duration: f64,
    noise: &NoiseSpec,
    tone: Option<AmTone>,
) -> Result<Vec<f64>> {
    ensure_positive(f_m, "f_m")?;
    ensure_positive(f_s, "f_s")?;
    ensure_positive(duration, "duration")?;
    noise.validate()?;
    if f_s < 8.0 * f_m {
        return Err(Error::InvalidParameter {
            name: "f_s",
            reason: format!("sample rate {f_s} Hz is below 8 f_m = {} Hz", 8.0 * f_m),
        });
    }
    let requested = (duration * f_s).round();
    if requested > MAX_SAMPLES as f64 {
        return Err(Error::SampleOverflow {
            requested,
            limit: MAX_SAMPLES,
        });
    }
    let count = requested as usize;

    let c0 = harmonics.dc();
    let cycles_per_sample = f_m / f_s;
    let tone_cycles = tone.map(|t| (f_m + t.offset_hz) / f_s);

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let a = noise.pole(f_s);
    let stationary_rms = ((1.0 - a) / (1.0 + a)).sqrt();
    let mut filtered = if noise.rin_level > 0.0 {
        let x: f64 = StandardNormal.sample(&mut rng);
        stationary_rms * x
    } else {
        0.0
    };

    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let phase = 2.0 * PI * (j as f64 * cycles_per_sample).fract();
        let mut current = harmonics.evaluate(phase);
        if let (Some(t), Some(cyc)) = (tone, tone_cycles) {
            current += c0 * t.depth * (2.0 * PI * (j as f64 * cyc).fract()).cos();
        }
        if noise.rin_level > 0.0 {
            if j > 0 {
                let x: f64 = StandardNormal.sample(&mut rng);
                filtered = a * filtered + (1.0 - a) * x;
            }
            current *= 1.0 + noise.rin_level * filtered / stationary_rms;
        }
        if noise.floor_level > 0.0 {
            let x: f64 = StandardNormal.sample(&mut rng);
            current += c0 * noise.floor_level * x;
        }
        out.push(current);
    }
    Ok(out)
}
