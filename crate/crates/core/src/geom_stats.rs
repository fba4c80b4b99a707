//! Statistics of geometrically distributed entanglement-distribution attempts.
//!
//! Every segment retries distribution once per signaling period until it
//! succeeds, so its attempt count `N` is geometric with support `k >= 1`.
//! Neighbouring segments wait `W = |N1 - N2|` slots for each other; the raw
//! rate is set by the slowest of the `n` segments.

use serde::{Deserialize, Serialize};

use crate::error::{check_failure_probability, check_probability, Error, Result};

/// Per-attempt success probability of a segment.
///
/// Only `p` is stored; `q = 1 - p` is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomParams {
    p: f64,
}

impl GeomParams {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p <= 1.0 {
            Ok(GeomParams { p })
        } else {
            Err(Error::InvalidParameter {
                field: "p",
                value: p,
                reason: "success probability must lie in (0, 1]",
            })
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

/// `P(|N1 - N2| = k)` for two i.i.d. geometric attempt counts with failure
/// probability `q`.
pub fn wait_pmf(k: u64, q: f64) -> Result<f64> {
    let q = check_failure_probability(q)?;
    let p = 1.0 - q;
    // p^2 / (1 - q^2) == p / (1 + q)
    let base = p / (1.0 + q);
    Ok(if k == 0 {
        base
    } else {
        2.0 * base * pow_u64(q, k)
    })
}

/// Probability mass of `W` strictly above `k_max`.
pub fn wait_tail_bound(k_max: u64, q: f64) -> Result<f64> {
    let q = check_failure_probability(q)?;
    let p = 1.0 - q;
    Ok(2.0 * p * p * pow_u64(q, k_max.saturating_add(1)) / ((1.0 - q * q) * (1.0 - q)))
}

/// `E(a^W)` for the waiting time between two neighbouring segments.
pub fn expect_pow_wait(a: f64, q: f64) -> Result<f64> {
    Ok(ln_expect_pow_wait(a, q)?.exp())
}

/// Natural logarithm of [`expect_pow_wait`].
pub fn ln_expect_pow_wait(a: f64, q: f64) -> Result<f64> {
    let a = check_probability("a", a)?;
    let q = check_failure_probability(q)?;
    // 1 - E = 2q(1-a) / ((1+q)(1-aq)), which keeps E <= 1 exact near a = 1
    Ok((-2.0 * q * (1.0 - a) / ((1.0 + q) * (1.0 - a * q))).ln_1p())
}

/// `E(a^{D_n})` for the summed waiting slots of an `n`-segment chain, with
/// the `n - 1` station waiting times treated as independent.
pub fn expect_pow_dsum(a: f64, q: f64, n: u64) -> Result<f64> {
    Ok(ln_expect_pow_dsum(a, q, n)?.exp())
}

pub fn ln_expect_pow_dsum(a: f64, q: f64, n: u64) -> Result<f64> {
    check_segments(n)?;
    let per_station = ln_expect_pow_wait(a, q)?;
    Ok(if n == 1 {
        0.0
    } else {
        (n - 1) as f64 * per_station
    })
}

/// Success probability below which [`expected_max_attempts`] switches from
/// the direct tail sum to its Euler-Maclaurin expansion.
pub const ASYMPTOTIC_MAX_P: f64 = 1e-3;

/// `E[max(N_1, ..., N_n)]` for `n` i.i.d. geometric attempt counts.
///
/// This is the bracketed alternating binomial sum of the raw-rate formula.
/// It is evaluated through the equivalent positive tail sum
/// `sum_{k>=0} 1 - (1 - q^k)^n`, which has no cancellation. For
/// `p < ASYMPTOTIC_MAX_P` and `n >= 2` the sum is replaced by
/// `H_n / ln(1/q) + 1/2`; all odd derivatives of the summand of order below
/// `n` vanish at zero, so the neglected terms are `O(ln(1/q)^3)`.
pub fn expected_max_attempts(n: u64, p: f64) -> Result<f64> {
    check_segments(n)?;
    let p = check_success_probability(p)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    if n == 1 {
        return Ok(1.0 / p);
    }
    let q = 1.0 - p;
    let lambda = -(-p).ln_1p();
    if p < ASYMPTOTIC_MAX_P {
        return Ok(harmonic(n) / lambda + 0.5);
    }
    let nf = n as f64;
    let mut sum = KahanSum::default();
    sum.add(1.0);
    let mut qk = 1.0;
    loop {
        qk *= q;
        let term = -(nf * (-qk).ln_1p()).exp_m1();
        sum.add(term);
        // remaining terms are bounded by n q^{k+1} / (1 - q)
        if nf * qk * q / p < 1e-17 * sum.value() {
            break;
        }
    }
    Ok(sum.value())
}

/// The alternating binomial form of [`expected_max_attempts`], summed with
/// log-domain binomials and compensated summation.
///
/// Cancellation limits this form to moderate `n` (relative error roughly
/// `eps * C(n, n/2) / H_n`); it exists to cross-check the production path.
pub fn expected_max_attempts_alternating(n: u64, p: f64) -> Result<f64> {
    check_segments(n)?;
    let p = check_success_probability(p)?;
    let ln_fact = ln_factorials(n as usize);
    let mut sum = KahanSum::default();
    for i in 1..=n {
        let ln_binom = ln_fact[n as usize] - ln_fact[i as usize] - ln_fact[(n - i) as usize];
        // 1 - q^i without cancellation
        let denom = -(i as f64 * (-p).ln_1p()).exp_m1();
        let term = (ln_binom - denom.ln()).exp();
        sum.add(if i % 2 == 1 { term } else { -term });
    }
    Ok(sum.value())
}

/// Raw rate `R = 1 / (tau0 E[max])` in Hz for `n` segments with per-attempt
/// success probability `p` and signaling period `tau0` seconds.
pub fn raw_rate(n: u64, p: f64, tau0: f64) -> Result<f64> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "tau0",
            value: tau0,
            reason: "signaling period must be positive and finite",
        });
    }
    Ok(1.0 / (tau0 * expected_max_attempts(n, p)?))
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    let x = check_probability("x", x)?;
    let plogp = |v: f64| if v == 0.0 { 0.0 } else { -v * v.log2() };
    Ok(plogp(x) + plogp(1.0 - x))
}

fn check_segments(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter {
            field: "n",
            value: 0.0,
            reason: "segment count must be at least 1",
        })
    } else {
        Ok(())
    }
}

fn check_success_probability(p: f64) -> Result<f64> {
    if p == 0.0 {
        return Err(Error::Domain(
            "success probability p = 0: the raw rate vanishes".into(),
        ));
    }
    check_probability("p", p)
}

pub(crate) fn pow_u64(base: f64, exp: u64) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

fn harmonic(n: u64) -> f64 {
    if n <= 10_000 {
        let mut s = KahanSum::default();
        for k in (1..=n).rev() {
            s.add(1.0 / k as f64);
        }
        s.value()
    } else {
        let nf = n as f64;
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        nf.ln() + EULER_GAMMA + 0.5 / nf - 1.0 / (12.0 * nf * nf) + 1.0 / (120.0 * nf.powi(4))
    }
}

/// `ln(k!)` for `k = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        // Neumaier variant: also robust when |x| > |sum|
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// P(|N1 - N2| = k) by explicit double sum over the attempt counts.
    fn wait_pmf_brute(k: u64, q: f64, cutoff: u64) -> f64 {
        let p = 1.0 - q;
        let geo = |n: u64| p * q.powi(n as i32 - 1);
        let mut total = 0.0;
        for n1 in 1..=cutoff {
            for n2 in 1..=cutoff {
                if n1.abs_diff(n2) == k {
                    total += geo(n1) * geo(n2);
                }
            }
        }
        total
    }

    #[test]
    fn wait_pmf_trivial_values() {
        assert_eq!(wait_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(wait_pmf(1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(wait_pmf(0, 0.5).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn wait_pmf_matches_double_sum() {
        for &q in &[0.1, 0.5, 0.8] {
            for k in 0..6 {
                let brute = wait_pmf_brute(k, q, 100);
                assert_relative_eq!(wait_pmf(k, q).unwrap(), brute, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn wait_pmf_rejects_never_succeeding_segment() {
        assert!(matches!(wait_pmf(0, 1.0), Err(Error::Domain(_))));
        assert!(wait_pmf(0, -0.1).is_err());
    }

    #[test]
    fn wait_pmf_partial_sum_and_tail() {
        let q = 0.99;
        let k_max = 10_000;
        let mut s = KahanSum::default();
        for k in 0..=k_max {
            s.add(wait_pmf(k, q).unwrap());
        }
        assert!(s.value() > 1.0 - 1e-10);
        let tail = wait_tail_bound(k_max, q).unwrap();
        assert!((s.value() + tail - 1.0).abs() < 1e-12);

        let k_max = 50;
        let q = 0.7;
        let partial: f64 = (0..=k_max).map(|k| wait_pmf(k, q).unwrap()).sum();
        assert_relative_eq!(
            1.0 - partial,
            wait_tail_bound(k_max, q).unwrap(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn expect_pow_wait_examples() {
        assert_relative_eq!(
            expect_pow_wait(1.0, 0.7).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            expect_pow_wait(0.3, 0.0).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        // (0.5/1.5)(1.45/0.55)
        let expected = 0.878_787_878_787_878_8;
        assert_relative_eq!(
            expect_pow_wait(0.9, 0.5).unwrap(),
            expected,
            max_relative = 1e-14
        );
        let series: f64 = (0..=500)
            .map(|k| 0.9f64.powi(k as i32) * wait_pmf(k, 0.5).unwrap())
            .sum();
        assert_relative_eq!(series, expected, max_relative = 1e-13);
    }

    #[test]
    fn expect_pow_dsum_edge_cases() {
        assert_eq!(expect_pow_dsum(0.5, 0.4, 1).unwrap(), 1.0);
        assert_relative_eq!(expect_pow_dsum(0.123, 0.0, 10).unwrap(), 1.0);
        assert!(expect_pow_dsum(0.5, 0.4, 0).is_err());
        assert!(expect_pow_dsum(1.5, 0.4, 3).is_err());
    }

    #[test]
    fn raw_rate_trivial_values() {
        assert_relative_eq!(raw_rate(1, 0.5, 1.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(raw_rate(3, 1.0, 2.0).unwrap(), 0.5, max_relative = 1e-14);
        assert!(matches!(raw_rate(3, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(raw_rate(3, 0.5, 0.0).is_err());
    }

    #[test]
    fn expected_max_two_segments_closed_form() {
        // E[max] = 2/p - 1/(1 - q^2) for n = 2
        for &p in &[0.9, 0.3, 0.01, 0.002, 5e-4, 1e-6] {
            let q: f64 = 1.0 - p;
            let exact = 2.0 / p - 1.0 / (1.0 - q * q);
            assert_relative_eq!(
                expected_max_attempts(2, p).unwrap(),
                exact,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn tail_sum_matches_alternating_form() {
        for n in [1, 2, 3, 7, 10, 15, 20] {
            for &p in &[0.9, 0.5, 0.1, 0.01, 0.005, 0.001] {
                let a = expected_max_attempts(n, p).unwrap();
                let b = expected_max_attempts_alternating(n, p).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn expected_max_high_precision_values() {
        // 40-digit evaluations of the tail sum
        let cases = [
            (30, 0.9, 2.250_806_444_528_681_6),
            (1000, 0.5, 11.299_252_697_279_202),
            (100, 0.0052, 995.476_657_059_905_6),
            (1000, 1e-3, 7482.227501018739),
            (1000, 9.9e-4, 7557.83832403608),
            (1000, 1e-4, 74_851.465_807_691_13),
            (7, 2e-4, 12_963.489_242_495_677),
        ];
        for (n, p, exact) in cases {
            assert_relative_eq!(
                expected_max_attempts(n, p).unwrap(),
                exact,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn asymptotic_branch_is_continuous_with_tail_sum() {
        for n in [2, 10, 100, 1000] {
            let below = expected_max_attempts(n, ASYMPTOTIC_MAX_P * (1.0 - 1e-12)).unwrap();
            let above = expected_max_attempts(n, ASYMPTOTIC_MAX_P).unwrap();
            assert_relative_eq!(below, above, max_relative = 1e-10);
        }
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_relative_eq!(
            binary_entropy(0.11).unwrap(),
            0.499_915_958_164_528_3,
            max_relative = 1e-12
        );
        assert!(1.0 - 2.0 * binary_entropy(0.11).unwrap() > 0.0);
        assert!(1.0 - 2.0 * binary_entropy(0.12).unwrap() < 0.0);
        assert!(binary_entropy(1.01).is_err());
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn expect_pow_wait_monotone(a in 0.0f64..0.999, q in 0.001f64..0.99, d in 1e-4f64..1e-2) {
            let base = expect_pow_wait(a, q).unwrap();
            prop_assert!(expect_pow_wait(a, (q + d).min(0.999)).unwrap() < base);
            prop_assert!(expect_pow_wait((a + d).min(1.0), q).unwrap() > base);
        }

        #[test]
        fn raw_rate_bounded_and_nonincreasing_in_n(n in 1u64..300, p in 1e-4f64..=1.0) {
            let tau0 = 1e-3;
            let r_n = raw_rate(n, p, tau0).unwrap();
            let r_next = raw_rate(n + 1, p, tau0).unwrap();
            prop_assert!(r_next <= r_n * (1.0 + 1e-12));
            prop_assert!(r_n <= p / tau0 * (1.0 + 1e-12));
        }
    }
}
