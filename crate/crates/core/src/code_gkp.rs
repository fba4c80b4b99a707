//! Secret key fraction of GKP and Steane-GKP repeaters.
//!
//! Every teleportation through a GKP Bell pair flips the logical qubit with
//! a small probability. The repeater QBER is the parity of all such flips
//! along the chain: `M_n = m D_n + 2m(n-1)` intermediate corrections,
//! `n - 1` swaps and, for Steane-GKP, `M_n + 2(n-1)` state-generation BSMs.
//!
//! Two evaluation routes are provided. [`qber_gkp`] / [`qber_steane`] use
//! the explicit odd-binomial closed forms in the log domain; the
//! `*_convolution` variants build the same quantity from [`PauliPair`]
//! convolutions and the waiting-time expectation. The closed form is the
//! production path.

use serde::{Deserialize, Serialize};

use crate::error::{check_failure_probability, check_probability, Error, Result};
use crate::gauss_noise::{loss_to_shift_variance, stripe_error_prob, ShiftVariance};
use crate::geom_stats::{binary_entropy, expect_pow_dsum, ln_expect_pow_wait};

/// Distribution `[P(no flip), P(flip)]` of a logical error parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliPair {
    pub p_no_error: f64,
    pub p_error: f64,
}

impl PauliPair {
    /// Identity of the convolution.
    pub const NO_ERROR: PauliPair = PauliPair {
        p_no_error: 1.0,
        p_error: 0.0,
    };

    pub fn from_error(p_error: f64) -> Result<Self> {
        let p_error = check_probability("p_error", p_error)?;
        Ok(PauliPair {
            p_no_error: 1.0 - p_error,
            p_error,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.p_no_error >= 0.0
            && self.p_error >= 0.0
            && (self.p_no_error + self.p_error - 1.0).abs() <= 1e-12
    }

    pub fn convolve(&self, other: &PauliPair) -> PauliPair {
        convolve_pauli(self, other)
    }

    /// `k`-fold convolution power by repeated squaring.
    pub fn pow(&self, mut k: u64) -> PauliPair {
        let mut acc = PauliPair::NO_ERROR;
        let mut base = *self;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.convolve(&base);
            }
            base = base.convolve(&base);
            k >>= 1;
        }
        acc
    }

    /// `p_no_error - p_error`, the character of the parity distribution.
    pub fn bias(&self) -> f64 {
        self.p_no_error - self.p_error
    }

    fn from_bias(bias: f64) -> PauliPair {
        PauliPair {
            p_no_error: 0.5 * (1.0 + bias),
            p_error: 0.5 * (1.0 - bias),
        }
    }
}

/// Circular convolution over `Z_2`: the parity distribution of two
/// independent error sources.
pub fn convolve_pauli(a: &PauliPair, b: &PauliPair) -> PauliPair {
    let even = a.p_no_error * b.p_no_error + a.p_error * b.p_error;
    let odd = a.p_no_error * b.p_error + a.p_error * b.p_no_error;
    // renormalise so rounding drift in the total mass does not compound
    // through long chains of squarings
    let total = even + odd;
    PauliPair {
        p_no_error: even / total,
        p_error: odd / total,
    }
}

/// Bare-GKP logical error probabilities of the three BSM kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpElementaryProbs {
    /// per intermediate correction (loop exit teleportation)
    pub p_corr: f64,
    /// per entanglement swap
    pub p_swap: f64,
    /// per state-generation BSM (Steane-GKP only)
    pub p_stategen: f64,
}

impl GkpElementaryProbs {
    pub fn new(p_corr: f64, p_swap: f64, p_stategen: f64) -> Result<Self> {
        for (field, v) in [
            ("p_corr", p_corr),
            ("p_swap", p_swap),
            ("p_stategen", p_stategen),
        ] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::InvalidParameter {
                    field,
                    value: v,
                    reason: "elementary Pauli error probability must lie in [0, 1/2]",
                });
            }
        }
        Ok(GkpElementaryProbs {
            p_corr,
            p_swap,
            p_stategen,
        })
    }

    pub const NOISELESS: GkpElementaryProbs = GkpElementaryProbs {
        p_corr: 0.0,
        p_swap: 0.0,
        p_stategen: 0.0,
    };
}

/// Elementary probabilities for finite-squeezing variance `delta2` and loop
/// transmissivity `eta_loop` (loss converted by preamplification).
///
/// Corrections see `(1 - eta_loop) + 2 delta^2`; swaps and state-generation
/// BSMs act on lossless modes and see `2 delta^2`.
pub fn gkp_elementary_probs(delta2: ShiftVariance, eta_loop: f64) -> Result<GkpElementaryProbs> {
    let loop_var = loss_to_shift_variance(eta_loop)?;
    let lossless = ShiftVariance::new(2.0 * delta2.value())?;
    let p_lossless = stripe_error_prob(lossless);
    GkpElementaryProbs::new(
        stripe_error_prob(loop_var + lossless),
        p_lossless,
        p_lossless,
    )
}

/// Steane transfer on no-error probabilities: `q^7 + 7 q^6 (1 - q)`.
pub fn steane_transfer(q_gkp: f64) -> Result<f64> {
    let q = check_probability("q_gkp", q_gkp)?;
    Ok(1.0 - steane_logical_error(1.0 - q))
}

/// Logical error probability of a Steane block whose seven GKP qubits fail
/// independently with probability `p`: the probability of two or more
/// failures, summed term by term so that `~21 p^2` survives for small `p`.
pub fn steane_logical_error(p: f64) -> f64 {
    const BINOM7: [f64; 8] = [1.0, 7.0, 21.0, 35.0, 35.0, 21.0, 7.0, 1.0];
    let q = 1.0 - p;
    (2..=7)
        .rev()
        .map(|k| BINOM7[k] * p.powi(k as i32) * q.powi(7 - k as i32))
        .sum()
}

/// Level at which state-generation errors enter the Steane-GKP QBER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StategenLevel {
    /// a connecting GKP BSM error counts directly (default)
    #[default]
    Bare,
    /// the error is first passed through the Steane transfer function
    Transferred,
}

impl std::fmt::Display for StategenLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StategenLevel::Bare => "bare",
            StategenLevel::Transferred => "transferred",
        })
    }
}

impl std::str::FromStr for StategenLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bare" => Ok(StategenLevel::Bare),
            "transferred" => Ok(StategenLevel::Transferred),
            other => Err(Error::Parse(format!(
                "unknown stategen level `{other}` (expected `bare` or `transferred`)"
            ))),
        }
    }
}

/// The probabilities that actually enter the Steane-GKP QBER.
///
/// Counting every two-or-more failure pattern as a logical flip exceeds 1/2
/// once bare errors pass ~0.23; such blocks are capped at a fully random 1/2.
pub fn steane_effective_probs(
    probs: &GkpElementaryProbs,
    level: StategenLevel,
) -> GkpElementaryProbs {
    let transfer = |p: f64| steane_logical_error(p).min(0.5);
    GkpElementaryProbs {
        p_corr: transfer(probs.p_corr),
        p_swap: transfer(probs.p_swap),
        p_stategen: match level {
            StategenLevel::Bare => probs.p_stategen,
            StategenLevel::Transferred => transfer(probs.p_stategen),
        },
    }
}

/// QBER of a GKP repeater with `n` segments and `m` loop passes per
/// signaling period, `q` the per-attempt distribution failure probability.
/// `p_stategen` is ignored.
pub fn qber_gkp(probs: &GkpElementaryProbs, n: u64, m: u64, q: f64) -> Result<f64> {
    qber_closed(probs.p_corr, probs.p_swap, 0.0, n, m, q)
}

/// QBER of a Steane-GKP repeater from bare-GKP elementary probabilities.
pub fn qber_steane(
    probs: &GkpElementaryProbs,
    n: u64,
    m: u64,
    q: f64,
    level: StategenLevel,
) -> Result<f64> {
    let eff = steane_effective_probs(probs, level);
    qber_closed(eff.p_corr, eff.p_swap, eff.p_stategen, n, m, q)
}

/// Closed form shared by both codes.
///
/// `p_all_other = (1 - X)/2` with
/// `ln X = 2m(n-1) ln(1-2p_c) + 2(m+1)(n-1) ln(1-2p_g) + (n-1) ln E(P^W)`,
/// `P = ((1-2p_c)(1-2p_g))^m`, and `p_all_swap = (1 - (1-2p_s)^{n-1})/2`.
fn qber_closed(p_corr: f64, p_swap: f64, p_gen: f64, n: u64, m: u64, q: f64) -> Result<f64> {
    check_chain(n, m)?;
    let q = check_failure_probability(q)?;
    GkpElementaryProbs::new(p_corr, p_swap, p_gen)?;
    let stations = (n - 1) as f64;
    let mf = m as f64;
    let ln_c = ln_one_minus_two(p_corr);
    let ln_g = ln_one_minus_two(p_gen);
    let per_slot = (mf * (ln_c + ln_g)).exp();
    let ln_x = scaled(2.0 * mf * stations, ln_c)
        + scaled(2.0 * (mf + 1.0) * stations, ln_g)
        + scaled(stations, ln_expect_pow_wait(per_slot, q)?);
    let all_other = -0.5 * ln_x.exp_m1();
    let all_swap = -0.5 * scaled(stations, ln_one_minus_two(p_swap)).exp_m1();
    Ok(xor_probability(all_other, all_swap))
}

/// GKP QBER via the convolution engine: `[E(p_corr^{*M_n}) * p_swap^{*(n-1)}]_1`.
pub fn qber_gkp_convolution(probs: &GkpElementaryProbs, n: u64, m: u64, q: f64) -> Result<f64> {
    qber_convolution(probs.p_corr, probs.p_swap, 0.0, n, m, q)
}

/// Steane-GKP QBER via the convolution engine.
pub fn qber_steane_convolution(
    probs: &GkpElementaryProbs,
    n: u64,
    m: u64,
    q: f64,
    level: StategenLevel,
) -> Result<f64> {
    let eff = steane_effective_probs(probs, level);
    qber_convolution(eff.p_corr, eff.p_swap, eff.p_stategen, n, m, q)
}

fn qber_convolution(p_corr: f64, p_swap: f64, p_gen: f64, n: u64, m: u64, q: f64) -> Result<f64> {
    check_chain(n, m)?;
    let q = check_failure_probability(q)?;
    let corr = PauliPair::from_error(p_corr)?;
    let gen = PauliPair::from_error(p_gen)?;
    let swap = PauliPair::from_error(p_swap)?;
    let stations = n - 1;
    // fixed part of M_n and M~_n
    let fixed = corr
        .pow(2 * m * stations)
        .convolve(&gen.pow(2 * (m + 1) * stations));
    // one waiting slot adds m corrections and m state generations
    let per_slot = corr.pow(m).convolve(&gen.pow(m));
    let waiting = expect_conv_pow_dsum(&per_slot, q, n)?;
    let total = fixed.convolve(&waiting).convolve(&swap.pow(stations));
    Ok(total.p_error)
}

/// `E(v^{*D_n})`. Convolution over `Z_2` is diagonalised by the character
/// `v -> v_0 - v_1`, which turns the convolution power into an ordinary
/// power, so the expectation is `E(bias^{D_n})` mapped back.
pub fn expect_conv_pow_dsum(v: &PauliPair, q: f64, n: u64) -> Result<PauliPair> {
    let bias = v.bias();
    if bias >= 0.0 {
        Ok(PauliPair::from_bias(expect_pow_dsum(bias, q, n)?))
    } else {
        Err(Error::Domain(
            "per-slot flip probability above 1/2 is outside the model".into(),
        ))
    }
}

/// Secret key fraction `max(0, 1 - 2 h(eps))`.
pub fn skf_gkp(epsilon: f64) -> Result<f64> {
    if !(0.0..=0.5 + 1e-12).contains(&epsilon) {
        return Err(Error::Domain(format!(
            "QBER {epsilon} outside [0, 1/2] indicates an upstream error"
        )));
    }
    Ok((1.0 - 2.0 * binary_entropy(epsilon.min(0.5))?).max(0.0))
}

/// `a (1-b) + b (1-a)`: probability that exactly one of two independent
/// parities is odd.
fn xor_probability(a: f64, b: f64) -> f64 {
    a + b - 2.0 * a * b
}

fn ln_one_minus_two(p: f64) -> f64 {
    (-2.0 * p).ln_1p()
}

/// `count * ln_base` with `0 * -inf = 0`.
fn scaled(count: f64, ln_base: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * ln_base
    }
}

fn check_chain(n: u64, m: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "n",
            value: 0.0,
            reason: "segment count must be at least 1",
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter {
            field: "m",
            value: 0.0,
            reason: "loop count must be at least 1",
        });
    }
    Ok(())
}
