//! Welch power spectra of synthesized photocurrents, calibrated in dBc.
//!
//! A bin reads `V = (2 |X_k| / sum(w))^2 / ref^2`, so a sinusoid of amplitude
//! `ref` centred on a bin reads 0 dBc whatever the resolution bandwidth.
//! For noise, `V ref^2 / 2` is the mean-square power in one RBW.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::control::{run_closed_loop, ClosedLoopRun, Plant};
use crate::detection::{synthesize_timeseries, NoiseSpec};
use crate::beamline::DriveEnvelope;
use crate::error::{ensure_positive, Error, Result};
use crate::scenario::Scenario;

/// Most segments averaged by [`estimate_psd`].
pub const MAX_SEGMENTS: usize = 16;
/// Fewest segments [`estimate_psd`] accepts.
pub const MIN_SEGMENTS: usize = 4;
/// Half-width (bins) integrated by [`Spectrum::tone_dbc`].
pub const TONE_HALF_WIDTH_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// 4-term Blackman-Harris, -92 dB sidelobes.
    BlackmanHarris4,
    Hann,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::BlackmanHarris4 => "blackman-harris-4",
            Window::Hann => "hann",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "blackman-harris-4" => Some(Window::BlackmanHarris4),
            "hann" => Some(Window::Hann),
            _ => None,
        }
    }

    fn terms(self) -> &'static [f64] {
        match self {
            Window::BlackmanHarris4 => &[0.35875, 0.48829, 0.14128, 0.01168],
            Window::Hann => &[0.5, 0.5],
        }
    }

    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let terms = self.terms();
        (0..n)
            .map(|j| {
                let x = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                terms
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| if k % 2 == 0 { a } else { -a } * (k as f64 * x).cos())
                    .sum()
            })
            .collect()
    }

    /// Equivalent noise bandwidth in bins (exact for the periodic window).
    pub fn enbw_bins(self) -> f64 {
        let t = self.terms();
        let a0 = t[0];
        (a0 * a0 + t[1..].iter().map(|a| a * a / 2.0).sum::<f64>()) / (a0 * a0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdRequest {
    pub f_s: f64,
    pub rbw: f64,
    pub span_center: f64,
    pub span_width: f64,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub dbc: Vec<f64>,
    /// Linear `V` per bin (see module docs).
    pub relative: Vec<f64>,
    /// Effective RBW: ENBW in bins times the bin spacing.
    pub rbw_hz: f64,
    pub bin_hz: f64,
    pub enbw_bins: f64,
    pub window: Window,
    pub segment_len: usize,
    pub segments: usize,
    /// Amplitude mapped to 0 dBc.
    pub reference: f64,
}

impl Spectrum {
    fn nearest(&self, f: f64) -> Option<usize> {
        if self.freqs.is_empty() {
            return None;
        }
        let idx = ((f - self.freqs[0]) / self.bin_hz).round();
        (idx >= 0.0 && (idx as usize) < self.freqs.len()).then_some(idx as usize)
    }

    /// Amplitude of a tone at `f` relative to the reference (dB), from the
    /// power within +-4 bins; insensitive to where the tone falls between bins.
    pub fn tone_dbc(&self, f: f64) -> Option<f64> {
        let k = self.nearest(f)?;
        let lo = k.saturating_sub(TONE_HALF_WIDTH_BINS);
        let hi = (k + TONE_HALF_WIDTH_BINS).min(self.relative.len() - 1);
        let sum: f64 = self.relative[lo..=hi].iter().sum();
        Some(10.0 * (sum / self.enbw_bins).log10())
    }

    /// Highest bin reading within `half_width_hz` of `f`.
    pub fn peak_dbc(&self, f: f64, half_width_hz: f64) -> Option<f64> {
        self.freqs
            .iter()
            .zip(&self.dbc)
            .filter(|(x, _)| (*x - f).abs() <= half_width_hz)
            .map(|(_, d)| *d)
            .reduce(f64::max)
    }

    /// Mean-square signal power (reference units squared) in `[lo, hi]`.
    /// Bins at DC and Nyquist carry half weight.
    pub fn band_power(&self, lo: f64, hi: f64, f_s: f64) -> f64 {
        let r2 = self.reference * self.reference;
        self.freqs
            .iter()
            .zip(&self.relative)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, v)| {
                let edge = *f == 0.0 || (*f - f_s / 2.0).abs() < 1e-9 * f_s;
                let w = if edge { 0.25 } else { 0.5 };
                v * r2 * w / self.enbw_bins
            })
            .sum()
    }

    /// One-sided PSD (units^2/Hz) at bin `k`.
    pub fn density(&self, k: usize) -> f64 {
        self.relative[k] * self.reference * self.reference / 2.0 / self.rbw_hz
    }

    /// Mean level (dB) of the bins farther than `guard_hz` from every frequency in `exclude`.
    pub fn floor_dbc(&self, exclude: &[f64], guard_hz: f64) -> Option<f64> {
        let kept: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.relative)
            .filter(|(f, _)| exclude.iter().all(|x| (*f - x).abs() > guard_hz))
            .map(|(_, v)| *v)
            .collect();
        (!kept.is_empty()).then(|| 10.0 * (kept.iter().sum::<f64>() / kept.len() as f64).log10())
    }
}

fn five_smooth_around(lo: f64, hi: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p2 = 1usize;
    while (p2 as f64) <= hi {
        let mut p3 = p2;
        while (p3 as f64) <= hi {
            let mut p5 = p3;
            while (p5 as f64) <= hi {
                if p5 as f64 >= lo {
                    out.push(p5);
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    out.sort_unstable();
    out
}

/// Segment length: 5-smooth, ENBW close to the requested RBW, and when
/// possible with `span_center` exactly on a bin.
fn segment_length(req: &PsdRequest, enbw: f64) -> usize {
    let target = enbw * req.f_s / req.rbw;
    let candidates = five_smooth_around(0.85 * target, 1.15 * target);
    let on_bin = |n: usize| {
        let cycles = req.span_center * n as f64 / req.f_s;
        (cycles - cycles.round()).abs() < 1e-9 * cycles.max(1.0)
    };
    let closest = |it: &mut dyn Iterator<Item = usize>| {
        it.min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.total_cmp(&db)
        })
    };
    closest(&mut candidates.iter().copied().filter(|&n| on_bin(n)))
        .or_else(|| closest(&mut candidates.iter().copied()))
        .unwrap_or_else(|| target.round().max(16.0) as usize)
}

/// Welch-averaged spectrum over `span_center +- span_width / 2`.
///
/// Segments overlap by half, each has its mean removed, at most 16 are
/// averaged and at least 4 are required. `reference` is the amplitude that
/// reads 0 dBc.
pub fn estimate_psd(samples: &[f64], reference: f64, req: &PsdRequest) -> Result<Spectrum> {
    ensure_positive(req.f_s, "f_s")?;
    ensure_positive(req.rbw, "rbw")?;
    ensure_positive(req.span_width, "span_width")?;
    ensure_positive(reference, "reference")?;
    if !req.span_center.is_finite() {
        return Err(Error::NonFinite("span_center"));
    }
    let enbw = req.window.enbw_bins();
    let n = segment_length(req, enbw);
    let hop = n / 2;
    let min_samples = n + (MIN_SEGMENTS - 1) * hop;
    if samples.len() < min_samples {
        return Err(Error::InsufficientSamples {
            min_samples,
            min_duration_s: min_samples as f64 / req.f_s,
        });
    }
    let segments = ((samples.len() - n) / hop + 1).min(MAX_SEGMENTS);
    let bin_hz = req.f_s / n as f64;
    let lo_f = (req.span_center - req.span_width / 2.0).max(0.0);
    let hi_f = (req.span_center + req.span_width / 2.0).min(req.f_s / 2.0);
    let k_lo = (lo_f / bin_hz - 1e-9).ceil() as usize;
    let k_hi = (hi_f / bin_hz + 1e-9).floor() as usize;
    if k_hi < k_lo {
        return Err(Error::InvalidParameter {
            name: "span_width",
            reason: format!("span contains no bins at {bin_hz} Hz spacing"),
        });
    }

    let window = req.window.coefficients(n);
    let coherent: f64 = window.iter().sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buffer = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut acc = vec![0.0f64; k_hi - k_lo + 1];
    for s in 0..segments {
        let seg = &samples[s * hop..s * hop + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buffer.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        for (a, x) in acc.iter_mut().zip(&buffer[k_lo..=k_hi]) {
            *a += x.norm_sqr();
        }
    }
    let scale = 4.0 / (coherent * coherent * reference * reference * segments as f64);
    let relative: Vec<f64> = acc.iter().map(|a| a * scale).collect();
    Ok(Spectrum {
        freqs: (k_lo..=k_hi).map(|k| k as f64 * bin_hz).collect(),
        dbc: relative.iter().map(|v| 10.0 * v.log10()).collect(),
        relative,
        rbw_hz: enbw * bin_hz,
        bin_hz,
        enbw_bins: enbw,
        window: req.window,
        segment_len: n,
        segments,
        reference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeforeAfter {
    /// PD2 with the actuator at zero.
    pub before: Spectrum,
    /// PD2 with the actuator at the loop's final value.
    pub after: Spectrum,
    pub run: ClosedLoopRun,
}

/// PD2 spectra around f_m without and with the correction.
///
/// Both use the same noise realization; each is referenced to its own `c_0`.
pub fn before_after_spectra(scenario: &Scenario, duration: f64) -> Result<BeforeAfter> {
    let plant = Plant::from_scenario(scenario)?;
    let run = run_closed_loop(scenario, scenario.controller.steps)?;
    let sp = &scenario.spectrum;
    let noise = scenario.noise.unwrap_or_else(NoiseSpec::silent);
    let f_m = scenario.modulation.f_m;
    let req = PsdRequest {
        f_s: sp.f_s,
        rbw: sp.rbw,
        span_center: f_m,
        span_width: sp.span,
        window: sp.window,
    };
    let spectrum_for = |drive: DriveEnvelope| -> Result<Spectrum> {
        let harmonics = plant.evaluate(drive)?.pd2;
        let samples = synthesize_timeseries(&harmonics, f_m, sp.f_s, duration, &noise, sp.am_tone)?;
        estimate_psd(&samples, harmonics.dc(), &req)
    };
    Ok(BeforeAfter {
        before: spectrum_for(DriveEnvelope::UNIT)?,
        after: spectrum_for(run.final_state.drive())?,
        run,
    })
}
