//! Occultation curve: AM at f_m versus the edge position of a screen.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{overlap_quadrature_oracle, photocurrent_harmonics, Aperture, DetectorSpec};
use crate::beamline::BeamState;
use crate::error::{Error, Result};

/// One point of the curve: screen edge in waists and `|2 c_1| / (rho P0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Point {
    pub x_over_w0: f64,
    pub normalized_ifm: f64,
}

fn check_beam(beam: &BeamState) -> Result<f64> {
    let comps = beam.components();
    let mut centers: Vec<f64> = comps.iter().map(|c| c.mode.center_x).collect();
    centers.sort_by(f64::total_cmp);
    centers.dedup();
    if comps.len() < 3 || centers.len() != comps.len() {
        return Err(Error::InvalidParameter {
            name: "beam",
            reason: "occultation scan needs at least 3 components with distinct centers".into(),
        });
    }
    Ok(comps[0].mode.w0)
}

/// Screen covering `x < X` swept over `X / w0` in `x_over_w0`; `w0` is the
/// waist of the beam's components. `P0` is the unobstructed power.
pub fn fig2_scan(beam: &BeamState, rho: f64, x_over_w0: &[f64]) -> Result<Vec<Fig2Point>> {
    let w0 = check_beam(beam)?;
    let full = photocurrent_harmonics(beam, &DetectorSpec::new(Aperture::FullPlane, rho)?, 1)?;
    let p0 = full.dc() / rho;
    x_over_w0
        .iter()
        .map(|&x| {
            let det = DetectorSpec::new(Aperture::HalfPlaneScreen { edge_x: x * w0 }, rho)?;
            let h = photocurrent_harmonics(beam, &det, 1)?;
            Ok(Fig2Point {
                x_over_w0: x,
                normalized_ifm: 2.0 * h.get(1).norm() / (rho * p0),
            })
        })
        .collect()
}

/// Independent route to the same curve: every pairwise overlap by 2D
/// quadrature, the photocurrent synthesized over one modulation period on
/// `samples` phases, and `c_1` taken as the discrete Fourier coefficient.
pub fn fig2_scan_period_oracle(beam: &BeamState, rho: f64, x_over_w0: &[f64], samples: usize) -> Result<Vec<Fig2Point>> {
    let w0 = check_beam(beam)?;
    let comps = beam.components();
    let max_order = comps.iter().map(|c| c.order.unsigned_abs()).max().unwrap_or(0) as usize;
    if samples <= 4 * max_order {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need more than {} phases to avoid aliasing", 4 * max_order),
        });
    }

    let period_current = |aperture: &Aperture| -> Result<Vec<f64>> {
        let n = comps.len();
        let mut q = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let o = overlap_quadrature_oracle(&comps[i].mode, &comps[j].mode, aperture)?;
                q[i * n + j] = o;
                q[j * n + i] = o.conj();
            }
        }
        Ok((0..samples)
            .map(|s| {
                let phase = 2.0 * PI * s as f64 / samples as f64;
                let mut field_sum = 0.0;
                for (i, a) in comps.iter().enumerate() {
                    for (j, b) in comps.iter().enumerate() {
                        let beat = Complex64::from_polar(1.0, (a.order - b.order) as f64 * phase);
                        field_sum += (a.amplitude * b.amplitude.conj() * beat * q[i * n + j]).re;
                    }
                }
                rho * field_sum
            })
            .collect())
    };

    let unobstructed = period_current(&Aperture::FullPlane)?;
    let p0 = unobstructed.iter().sum::<f64>() / samples as f64 / rho;
    x_over_w0
        .iter()
        .map(|&x| {
            let current = period_current(&Aperture::HalfPlaneScreen { edge_x: x * w0 })?;
            let c1: Complex64 = current
                .iter()
                .enumerate()
                .map(|(s, i)| Complex64::from_polar(*i, -2.0 * PI * s as f64 / samples as f64))
                .sum::<Complex64>()
                / samples as f64;
            Ok(Fig2Point {
                x_over_w0: x,
                normalized_ifm: 2.0 * c1.norm() / (rho * p0),
            })
        })
        .collect()
}
