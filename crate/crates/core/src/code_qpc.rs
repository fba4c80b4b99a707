//! Quantum parity code memories.
//!
//! A `(b, a)` QPC qubit spreads over `b` blocks of `a` dual-rail photons.
//! Teleportation through a QPC Bell pair introduces no Pauli errors but may
//! fail, so the secret key fraction is the probability that every
//! teleportation and every swap succeeds.

use serde::{Deserialize, Serialize};

use crate::error::{check_failure_probability, check_probability, Error, Result};
use crate::geom_stats::{ln_expect_pow_dsum, ln_factorials};

pub const DEFAULT_MAX_PHOTONS: u64 = 512;

/// Block shape: `a` photons per block, `b` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpcShape {
    pub a: u32,
    pub b: u32,
}

impl QpcShape {
    pub fn new(a: u32, b: u32) -> Result<Self> {
        if a == 0 {
            return Err(Error::InvalidParameter {
                field: "a",
                value: 0.0,
                reason: "photons per block must be at least 1",
            });
        }
        if b == 0 {
            return Err(Error::InvalidParameter {
                field: "b",
                value: 0.0,
                reason: "block count must be at least 1",
            });
        }
        Ok(QpcShape { a, b })
    }

    pub fn photons(&self) -> u64 {
        self.a as u64 * self.b as u64
    }

    /// Logical BSM success probability on lossless states, `1 - 2^-b`.
    pub fn lossless_bsm_success(&self) -> f64 {
        -(-(self.b as f64) * std::f64::consts::LN_2).exp_m1()
    }

    fn check_budget(&self, max_photons: u64) -> Result<()> {
        if self.photons() > max_photons {
            Err(Error::CombinatorialBudget {
                photons: self.photons(),
                max: max_photons,
            })
        } else {
            Ok(())
        }
    }
}

/// Probability of teleporting a QPC qubit that passed a loss channel of
/// transmissivity `eta` through a perfect QPC Bell pair:
/// `[1 - (1-eta)^a]^b - [1 - (1-eta)^a - eta^a / 2]^b`.
pub fn qpc_success_closed(shape: QpcShape, eta: f64) -> Result<f64> {
    let eta = check_probability("eta", eta)?;
    let a = shape.a as i32;
    let b = shape.b as i32;
    let block_lost = (1.0 - eta).powi(a);
    let block_kept = 1.0 - block_lost;
    let success = block_kept.powi(b) - (block_kept - 0.5 * eta.powi(a)).powi(b);
    Ok(success.clamp(0.0, 1.0))
}

/// Combinatorial tables for a shape: `counts[i][mu]` is the number of ways
/// to place `mu` losses on `i` chosen blocks, each block losing between 1
/// and `a - 1` photons (so it keeps at least one but is not intact).
struct LossCounts {
    shape: QpcShape,
    counts: Vec<Vec<f64>>,
    ln_fact: Vec<f64>,
}

impl LossCounts {
    fn new(shape: QpcShape, max_photons: u64) -> Result<Self> {
        shape.check_budget(max_photons)?;
        let a = shape.a as usize;
        let b = shape.b as usize;
        let mu_max = (b - 1) * (a.saturating_sub(1));
        let ln_fact = ln_factorials(a * b);
        let binom_a: Vec<f64> = (0..=a)
            .map(|j| (ln_fact[a] - ln_fact[j] - ln_fact[a - j]).exp().round())
            .collect();
        // counts[i] = coefficients of ((1+x)^a - 1 - x^a)^i up to x^mu_max
        let mut counts = vec![vec![0.0; mu_max + 1]];
        counts[0][0] = 1.0;
        for i in 1..b {
            let prev = &counts[i - 1];
            let mut next = vec![0.0; mu_max + 1];
            for (mu, &c) in prev.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for j in 1..a {
                    if mu + j > mu_max {
                        break;
                    }
                    next[mu + j] += c * binom_a[j];
                }
            }
            counts.push(next);
        }
        Ok(LossCounts {
            shape,
            counts,
            ln_fact,
        })
    }

    fn ln_binom(&self, n: usize, k: usize) -> f64 {
        self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
    }

    fn mu_max(&self) -> usize {
        self.counts[0].len() - 1
    }

    /// Success probability given exactly `mu` lost photons.
    fn success_given_losses(&self, mu: usize) -> f64 {
        let a = self.shape.a as usize;
        let b = self.shape.b as usize;
        if mu > a * b {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..=mu.min(b - 1) {
            let Some(&count) = self.counts.get(i).and_then(|row| row.get(mu)) else {
                continue;
            };
            if count == 0.0 {
                continue;
            }
            let lossless_part = -(-((b - i) as f64) * std::f64::consts::LN_2).exp_m1();
            let ln_weight = self.ln_binom(b, i) + count.ln() - self.ln_binom(a * b, mu);
            total += lossless_part * ln_weight.exp();
        }
        total
    }
}

/// `p^mu_QPC`: logical BSM success probability when exactly `mu` of the
/// `a b` photons are lost, averaged over loss placements.
pub fn qpc_success_given_losses(shape: QpcShape, mu: u64) -> Result<f64> {
    let tables = LossCounts::new(shape, DEFAULT_MAX_PHOTONS)?;
    Ok(tables.success_given_losses(mu as usize))
}

/// Brute-force counterpart of [`qpc_success_closed`]: mixes
/// [`qpc_success_given_losses`] over the binomial loss count.
pub fn qpc_success_sum(shape: QpcShape, eta: f64) -> Result<f64> {
    qpc_success_sum_with_budget(shape, eta, DEFAULT_MAX_PHOTONS)
}

pub fn qpc_success_sum_with_budget(shape: QpcShape, eta: f64, max_photons: u64) -> Result<f64> {
    let eta = check_probability("eta", eta)?;
    let tables = LossCounts::new(shape, max_photons)?;
    let total = tables.shape.photons() as usize;
    let ln_eta = eta.ln();
    let ln_loss = (-eta).ln_1p();
    let ln_pow = |count: usize, ln_base: f64| {
        if count == 0 {
            0.0
        } else {
            count as f64 * ln_base
        }
    };
    let mut sum = 0.0;
    for mu in 0..=tables.mu_max() {
        let p_mu = tables.success_given_losses(mu);
        if p_mu == 0.0 {
            continue;
        }
        let ln_weight =
            tables.ln_binom(total, mu) + ln_pow(total - mu, ln_eta) + ln_pow(mu, ln_loss);
        sum += p_mu * ln_weight.exp();
    }
    Ok(sum)
}

/// Secret key fraction of a QPC repeater:
/// `[1 - 2^-b]^{n-1} E(p_QPC^{M_n})` with `M_n = m D_n + 2m(n-1)`.
pub fn skf_qpc(shape: QpcShape, n: u64, m: u64, q: f64, eta_loop: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter {
            field: if n == 0 { "n" } else { "m" },
            value: 0.0,
            reason: "segment and loop counts must be at least 1",
        });
    }
    let q = check_failure_probability(q)?;
    if n == 1 {
        return Ok(1.0);
    }
    let p_qpc = qpc_success_closed(shape, eta_loop)?;
    if p_qpc == 0.0 {
        return Ok(0.0);
    }
    let stations = (n - 1) as f64;
    let ln_p = p_qpc.ln();
    let ln_r = stations * shape.lossless_bsm_success().ln()
        + 2.0 * m as f64 * stations * ln_p
        + ln_expect_pow_dsum((m as f64 * ln_p).exp(), q, n)?;
    Ok(ln_r.exp().clamp(0.0, 1.0))
}
