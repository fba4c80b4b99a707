//! Gaussian displacement noise of approximate GKP states and the resulting
//! logical Pauli error probability.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Phase-space displacement variance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftVariance(f64);

impl ShiftVariance {
    pub const ZERO: ShiftVariance = ShiftVariance(0.0);

    pub fn new(sigma2: f64) -> Result<Self> {
        if sigma2 >= 0.0 && !sigma2.is_nan() {
            Ok(ShiftVariance(sigma2))
        } else {
            Err(Error::InvalidParameter {
                field: "sigma2",
                value: sigma2,
                reason: "variance must be nonnegative",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Add for ShiftVariance {
    type Output = ShiftVariance;

    fn add(self, rhs: ShiftVariance) -> ShiftVariance {
        ShiftVariance(self.0 + rhs.0)
    }
}

/// GKP squeezing in dB, `s = -10 log10(2 delta^2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SqueezingDb(pub f64);

impl SqueezingDb {
    /// Inverse of [`squeezing_to_variance`]; zero variance has no finite
    /// squeezing and is rejected.
    pub fn from_variance(delta2: ShiftVariance) -> Result<Self> {
        if delta2.0 > 0.0 {
            Ok(SqueezingDb(-10.0 * (2.0 * delta2.0).log10()))
        } else {
            Err(Error::Domain(
                "zero variance corresponds to infinite squeezing".into(),
            ))
        }
    }
}

/// `delta^2 = 10^(-s/10) / 2`.
pub fn squeezing_to_variance(s: SqueezingDb) -> Result<ShiftVariance> {
    if !s.0.is_finite() {
        return Err(Error::InvalidParameter {
            field: "squeezing_db",
            value: s.0,
            reason: "squeezing must be finite",
        });
    }
    ShiftVariance::new(0.5 * 10f64.powf(-s.0 / 10.0))
}

/// Shift variance left by preamplifying a loss channel of transmissivity `eta`.
pub fn loss_to_shift_variance(eta: f64) -> Result<ShiftVariance> {
    let eta = check_probability("eta", eta)?;
    ShiftVariance::new(1.0 - eta)
}

/// Shift variance after CC amplification of symmetric loss `eta` on both
/// BSM inputs. Only used for comparison with [`loss_to_shift_variance`].
pub fn cc_shift_variance(eta: f64) -> Result<ShiftVariance> {
    let eta = check_probability("eta", eta)?;
    if eta == 0.0 {
        return Err(Error::Domain("CC amplification diverges at eta = 0".into()));
    }
    ShiftVariance::new((1.0 - eta) / eta)
}

/// Truncation index of the stripe sum: stripes `|k| <= k_max` are summed.
pub fn stripe_truncation(sigma2_tot: ShiftVariance) -> u64 {
    let sigma = sigma2_tot.0.sqrt();
    ((6.0 * sigma / SQRT_PI).ceil() as u64).max(3)
}

/// Beyond this many stripes the dual (Fourier) series is used instead.
const MAX_DIRECT_STRIPES: u64 = 4096;

/// Probability that a zero-mean Gaussian shift of variance `sigma2_tot`
/// lands in an odd stripe `|x - (2k+1) sqrt(pi)| < sqrt(pi)/2`, i.e. that
/// GKP error correction leaves a logical Pauli error.
pub fn stripe_error_prob(sigma2_tot: ShiftVariance) -> f64 {
    let var = sigma2_tot.0;
    if var == 0.0 {
        return 0.0;
    }
    if var.is_infinite() {
        return 0.5;
    }
    let k_max = stripe_truncation(sigma2_tot);
    if k_max > MAX_DIRECT_STRIPES {
        return stripe_error_prob_dual(var);
    }
    let scale = 1.0 / (var.sqrt() * SQRT_2);
    // stripes k and -k-1 mirror each other, so sum k >= 0 twice; smallest
    // terms first
    let mut total = 0.0;
    for k in (0..=k_max).rev() {
        let lo = (2.0 * k as f64 + 0.5) * SQRT_PI * scale;
        let hi = (2.0 * k as f64 + 1.5) * SQRT_PI * scale;
        total += erfc_difference(lo, hi);
    }
    total.min(0.5)
}

/// Analytic upper bound on the Gaussian mass beyond the last summed stripe.
pub fn stripe_tail_bound(sigma2_tot: ShiftVariance) -> f64 {
    let var = sigma2_tot.0;
    if var == 0.0 {
        return 0.0;
    }
    let k_max = stripe_truncation(sigma2_tot) as f64;
    let edge = ((2.0 * k_max + 1.0) * SQRT_PI + 0.5 * SQRT_PI) / (var.sqrt() * SQRT_2);
    libm::erfc(edge)
}

/// `erfc(lo) - erfc(hi)` for `0 <= lo < hi`, keeping relative accuracy in
/// the far tail.
fn erfc_difference(lo: f64, hi: f64) -> f64 {
    if lo > 0.5 {
        libm::erfc(lo) - libm::erfc(hi)
    } else {
        libm::erf(hi) - libm::erf(lo)
    }
}

/// Fourier form of the stripe indicator (square wave of period 2 sqrt(pi)):
/// `1/2 - (2/pi) sum_{j odd} (-1)^{(j-1)/2} / j * exp(-pi j^2 sigma^2 / 2)`.
/// Converges fastest for wide Gaussians.
fn stripe_error_prob_dual(var: f64) -> f64 {
    let mut series = 0.0;
    let mut j = 1u64;
    loop {
        let jf = j as f64;
        let term = (-PI * jf * jf * var / 2.0).exp() / jf;
        if term < 1e-18 {
            break;
        }
        series += if (j / 2).is_multiple_of(2) {
            term
        } else {
            -term
        };
        j += 2;
    }
    0.5 - 2.0 / PI * series
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn squeezing_examples() {
        let v = |s| squeezing_to_variance(SqueezingDb(s)).unwrap().value();
        assert_relative_eq!(v(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(v(10.0), 0.05, max_relative = 1e-15);
        assert_relative_eq!(v(15.0), 0.015_811_388_300_841_896, max_relative = 1e-14);
        assert!(squeezing_to_variance(SqueezingDb(f64::NAN)).is_err());
        assert!(SqueezingDb::from_variance(ShiftVariance::ZERO).is_err());
    }

    #[test]
    fn loss_variances() {
        assert_eq!(loss_to_shift_variance(1.0).unwrap().value(), 0.0);
        assert_eq!(loss_to_shift_variance(0.0).unwrap().value(), 1.0);
        assert_relative_eq!(
            loss_to_shift_variance(0.9).unwrap().value(),
            0.1,
            max_relative = 1e-12
        );
        assert!(loss_to_shift_variance(1.2).is_err());

        assert_eq!(cc_shift_variance(1.0).unwrap().value(), 0.0);
        assert_eq!(cc_shift_variance(0.5).unwrap().value(), 1.0);
        assert_relative_eq!(
            cc_shift_variance(0.9).unwrap().value(),
            1.0 / 9.0,
            max_relative = 1e-12
        );
        assert!(matches!(cc_shift_variance(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn stripe_limits() {
        assert_eq!(stripe_error_prob(ShiftVariance::ZERO), 0.0);
        assert_eq!(
            stripe_error_prob(ShiftVariance::new(f64::INFINITY).unwrap()),
            0.5
        );
        let wide = stripe_error_prob(ShiftVariance::new(1e6).unwrap());
        assert!((0.5 - wide).abs() < 1e-15);
        assert!(ShiftVariance::new(-1e-3).is_err());
    }

    #[test]
    fn direct_and_dual_series_agree() {
        for &var in &[0.3, 1.0, 3.0, 10.0, 50.0] {
            let direct = stripe_error_prob(ShiftVariance::new(var).unwrap());
            let dual = stripe_error_prob_dual(var);
            assert!(
                (direct - dual).abs() < 1e-14,
                "var={var}: {direct} vs {dual}"
            );
        }
    }

    #[test]
    fn tail_bound_below_threshold() {
        for &var in &[1e-6, 1e-2, 0.2, 1.0, 10.0, 1e3, 1e5] {
            assert!(stripe_tail_bound(ShiftVariance::new(var).unwrap()) < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn preamplification_beats_cc(eta in 1e-9f64..(1.0 - 1e-9)) {
            let pre = loss_to_shift_variance(eta).unwrap();
            let cc = cc_shift_variance(eta).unwrap();
            prop_assert!(cc > pre);
        }

        #[test]
        fn squeezing_round_trip(s in -20.0f64..=40.0) {
            let back = SqueezingDb::from_variance(squeezing_to_variance(SqueezingDb(s)).unwrap()).unwrap();
            prop_assert!((back.0 - s).abs() <= 1e-12 * s.abs().max(1e-3));
        }

        // above ~10 the gap to 1/2 drops below f64 resolution
        #[test]
        fn stripe_prob_monotone_and_bounded(v in 1e-3f64..10.0, dv in 1e-6f64..1.0) {
            let a = stripe_error_prob(ShiftVariance::new(v).unwrap());
            let b = stripe_error_prob(ShiftVariance::new(v + dv).unwrap());
            prop_assert!((0.0..0.5).contains(&a));
            prop_assert!(b >= a);
        }
    }
}
