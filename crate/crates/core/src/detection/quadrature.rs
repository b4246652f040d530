//! Brute-force 2D quadrature of mode overlaps.
//!
//! Composite 16-point Gauss-Legendre on a tensor grid covering the aperture
//! clipped to a +-9 waist window around both modes. The panel count doubles
//! until two successive estimates agree. Nothing here knows about the
//! closed-form overlaps; it only evaluates the fields pointwise.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::Aperture;
use crate::beamline::SpatialMode;
use crate::error::{Error, Result};

const WINDOW_WAISTS: f64 = 9.0;
const START_PANELS: usize = 4;
const MAX_PANELS: usize = 512;
const REL_TOL: f64 = 1e-11;
const ABS_TOL: f64 = 1e-15;

/// Nodes and weights of the 16-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre_16() -> &'static [(f64, f64); 16] {
    static RULE: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut rule = [(0.0, 0.0); N];
        #[allow(clippy::needless_range_loop)]
        for i in 0..N {
            // Newton on P_N from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

fn composite_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre_16();
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for &(x, w) in rule {
            nodes.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    nodes
}

fn tensor_sum(a: &SpatialMode, b: &SpatialMode, x: (f64, f64), y: (f64, f64), panels: usize) -> Complex64 {
    let xs = composite_nodes(x.0, x.1, panels);
    let ys = composite_nodes(y.0, y.1, panels);
    // Field factors per node; the double sum below is over every grid point.
    let fx: Vec<(f64, Complex64, Complex64)> = xs.iter().map(|&(x, w)| (w, a.field_x(x), b.field_x(x))).collect();
    let fy: Vec<(f64, f64, f64)> = ys.iter().map(|&(y, w)| (w, a.field_y(y), b.field_y(y))).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for &(wy, ay, by) in &fy {
        let mut row = Complex64::new(0.0, 0.0);
        for &(wx, ax, bx) in &fx {
            row += (ax * ay) * (bx * by).conj() * wx;
        }
        total += row * wy;
    }
    total
}

/// Numerical overlap `integral over the aperture of g_a conj(g_b)`.
///
/// Fails with the last estimate when doubling the panel count stops helping.
pub fn overlap_quadrature_oracle(a: &SpatialMode, b: &SpatialMode, aperture: &Aperture) -> Result<Complex64> {
    a.validate()?;
    b.validate()?;
    aperture.validate()?;
    let reach = WINDOW_WAISTS * a.w0.max(b.w0);
    let window_x = (a.center_x.min(b.center_x) - reach, a.center_x.max(b.center_x) + reach);
    let window_y = (-reach, reach);
    let (ax_lo, ax_hi, ay_lo, ay_hi) = aperture.bounds();
    let x = (window_x.0.max(ax_lo), window_x.1.min(ax_hi));
    let y = (window_y.0.max(ay_lo), window_y.1.min(ay_hi));
    if x.1 <= x.0 || y.1 <= y.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }

    let mut panels = START_PANELS;
    let mut previous = tensor_sum(a, b, x, y, panels);
    loop {
        panels *= 2;
        let current = tensor_sum(a, b, x, y, panels);
        let change = (current - previous).norm();
        if change <= REL_TOL * current.norm() + ABS_TOL {
            return Ok(current);
        }
        if panels >= MAX_PANELS {
            return Err(Error::QuadratureNotConverged {
                estimate_re: current.re,
                estimate_im: current.im,
                rel_change: change / current.norm(),
            });
        }
        previous = current;
    }
}
