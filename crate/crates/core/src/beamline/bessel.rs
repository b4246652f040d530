//! FM sideband amplitudes J_n(beta).

use crate::error::{Error, Result};

/// Largest fraction of the optical power allowed outside a truncated comb.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;

/// Bessel amplitudes J_n(beta) for n in [-n_max, n_max].
///
/// Index `i` of [`SidebandAmplitudes::values`] holds order `i - n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandAmplitudes {
    n_max: usize,
    values: Vec<f64>,
    tail_power: f64,
}

impl SidebandAmplitudes {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// J_n for a signed order; zero outside the comb.
    pub fn get(&self, n: i64) -> f64 {
        let n_max = self.n_max as i64;
        if n.abs() > n_max {
            0.0
        } else {
            self.values[(n + n_max) as usize]
        }
    }

    /// Power carried by orders |n| > n_max, i.e. 1 - sum of J_n^2 in the comb.
    pub fn tail_power(&self) -> f64 {
        self.tail_power
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> + '_ {
        let n_max = self.n_max as i64;
        -n_max..=n_max
    }
}

/// J_n(beta) for n = 0..=n_max by Miller's backward recurrence, normalized
/// with J_0 + 2 sum J_2k = 1. Also returns the power beyond n_max.
fn bessel_nonnegative(beta: f64, n_max: usize) -> (Vec<f64>, f64) {
    if beta == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return (out, 0.0);
    }
    // Start well above both n_max and beta; the recurrence is stable downward.
    let start = {
        let m = n_max.max(beta.ceil() as usize) + 20 + (40.0 * (n_max.max(1) as f64)).sqrt() as usize;
        m + (m & 1)
    };
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = (2.0 * k as f64 / beta) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in j.iter_mut() {
        *v /= norm;
    }
    let tail: f64 = 2.0 * j.iter().skip(n_max + 1).map(|v| v * v).sum::<f64>();
    j.truncate(n_max + 1);
    (j, tail)
}

/// Sideband amplitudes of a pure FM comb, J_n(beta) for |n| <= n_max.
///
/// Negative orders use J_{-n} = (-1)^n J_n, so the antisymmetric pairing
/// holds bit-exactly. Fails if the comb misses more than
/// [`TRUNCATION_TOLERANCE`] of the power.
pub fn bessel_amplitudes(beta: f64, n_max: usize) -> Result<SidebandAmplitudes> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be finite and >= 0, got {beta}"),
        });
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: "must be >= 1".into(),
        });
    }
    let (positive, tail_power) = bessel_nonnegative(beta, n_max);
    if tail_power > TRUNCATION_TOLERANCE {
        return Err(Error::InsufficientOrder {
            beta,
            n_max,
            tail: tail_power,
        });
    }
    let mut values = Vec::with_capacity(2 * n_max + 1);
    for n in (1..=n_max).rev() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        values.push(sign * positive[n]);
    }
    values.extend_from_slice(&positive);
    Ok(SidebandAmplitudes {
        n_max,
        values,
        tail_power,
    })
}

/// Smallest truncation order meeting the power rule; 8 covers beta <= 1.5.
pub fn default_n_max(beta: f64) -> usize {
    if beta <= 1.5 {
        return 8;
    }
    (8..)
        .find(|&n| bessel_nonnegative(beta, n).1 <= TRUNCATION_TOLERANCE)
        .expect("unbounded search")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series J_n(x) = sum_k (-1)^k (x/2)^(2k+n) / (k! (k+n)!), 30 terms.
    fn series_oracle(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..30u32 {
            term *= -half * half / (f64::from(k) * f64::from(k + n));
            sum += term;
        }
        sum
    }

    #[test]
    fn unmodulated_carrier() {
        let amps = bessel_amplitudes(0.0, 4).unwrap();
        assert_eq!(amps.get(0), 1.0);
        for n in [-4, -3, -2, -1, 1, 2, 3, 4] {
            assert_eq!(amps.get(n), 0.0);
        }
    }

    #[test]
    fn beta_one_matches_power_series() {
        let amps = bessel_amplitudes(1.0, 8).unwrap();
        // Frozen from the 30-term series oracle.
        assert!((amps.get(0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((amps.get(1) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((amps.get(2) - 0.114_903_484_931_900_5).abs() < 1e-14);
        for n in 0..=8u32 {
            let oracle = series_oracle(n, 1.0);
            assert!(
                (amps.get(n as i64) - oracle).abs() < 1e-15,
                "n = {n}: {} vs {oracle}",
                amps.get(n as i64)
            );
        }
    }

    #[test]
    fn series_oracle_satisfies_three_term_recurrence() {
        for x in [0.3, 1.0, 2.5] {
            for n in 1..8u32 {
                let lhs = series_oracle(n - 1, x) + series_oracle(n + 1, x);
                let rhs = 2.0 * f64::from(n) / x * series_oracle(n, x);
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn negative_orders_are_exactly_signed_copies() {
        let amps = bessel_amplitudes(1.3, 8).unwrap();
        for n in 1..=8i64 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(amps.get(-n), sign * amps.get(n));
        }
    }

    #[test]
    fn adjacent_products_cancel() {
        let amps = bessel_amplitudes(1.0, 8).unwrap();
        let s: f64 = (-8..8).map(|n| amps.get(n) * amps.get(n + 1)).sum();
        assert!(s.abs() <= 1e-12);
    }

    #[test]
    fn power_sum_rule() {
        for beta in [0.1, 1.0, 1.5, 2.9] {
            let n_max = default_n_max(beta);
            let amps = bessel_amplitudes(beta, n_max).unwrap();
            let p: f64 = amps.values().iter().map(|v| v * v).sum();
            assert!((1.0 - 1e-9..=1.0 + 1e-15).contains(&p), "beta {beta}: {p}");
        }
    }

    #[test]
    fn truncation_is_rejected() {
        let err = bessel_amplitudes(3.0, 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientOrder { n_max: 2, .. }));
        assert!(err.to_string().contains("insufficient n_max"));
    }

    #[test]
    fn invalid_inputs() {
        assert!(bessel_amplitudes(-0.1, 8).is_err());
        assert!(bessel_amplitudes(f64::NAN, 8).is_err());
        assert!(bessel_amplitudes(1.0, 0).is_err());
    }

    #[test]
    fn default_order_grows_with_beta() {
        assert_eq!(default_n_max(1.0), 8);
        assert!(default_n_max(6.0) > 8);
        assert!(bessel_amplitudes(6.0, default_n_max(6.0)).is_ok());
    }
}
