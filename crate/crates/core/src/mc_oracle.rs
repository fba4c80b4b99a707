//! Monte Carlo estimators for the waiting-time statistics, the raw rate and
//! the QBER. They sample the underlying random processes directly and share
//! no code with the analytic paths beyond input validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code_gkp::{steane_logical_error, GkpElementaryProbs, StategenLevel};
use crate::error::{check_failure_probability, check_probability, Error, Result};

/// Samples handled by one seeded stream.
const BATCH: u64 = 1 << 16;
/// Event count above which parities come from a single binomial draw.
const PER_EVENT_LIMIT: u64 = 1000;

/// How the waiting times at the `n - 1` swapping stations depend on each
/// other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceModel {
    /// every station waits on its own pair of fresh geometric draws
    #[default]
    IndependentPairs,
    /// station `i` waits on `|N_i - N_{i+1}|`; neighbours share a segment
    Chain,
}

impl std::str::FromStr for DependenceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "independent_pairs" | "independent-pairs" => Ok(Self::IndependentPairs),
            "chain" => Ok(Self::Chain),
            other => Err(Error::Parse(format!(
                "unknown dependence model {other:?} (expected independent-pairs or chain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub model: DependenceModel,
}

impl McSettings {
    pub fn new(samples: u64, seed: u64, model: DependenceModel) -> Self {
        McSettings {
            samples,
            seed,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter {
                field: "samples",
                value: 0.0,
                reason: "at least one sample is required",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// standard error of `mean`; infinite for a single sample
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// `(mean - reference) / std_error`, zero when both agree exactly.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Running count, mean and centred second moment, merged pairwise.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }

    fn estimate(self) -> McEstimate {
        let std_error = if self.count < 2 {
            f64::INFINITY
        } else {
            (self.m2.max(0.0) / (self.count - 1) as f64 / self.count as f64).sqrt()
        };
        McEstimate {
            mean: self.mean,
            std_error,
            samples: self.count,
        }
    }
}

/// Runs `draw` `settings.samples` times across parallel batches. Batch `i`
/// owns ChaCha stream `i` of the seed and batches are merged in index
/// order, so the result does not depend on the thread count.
fn sample<F>(settings: &McSettings, draw: F) -> Result<Moments>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    settings.validate()?;
    let batches = settings.samples.div_ceil(BATCH);
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(b);
            let len = BATCH.min(settings.samples - b * BATCH);
            let mut acc = Moments::default();
            for _ in 0..len {
                acc.push(draw(&mut rng));
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge))
}

/// Attempts until the first success, by inversion: `ceil(ln U / ln q)`.
fn geometric<R: Rng>(rng: &mut R, ln_q: f64) -> u64 {
    if ln_q == f64::NEG_INFINITY {
        return 1;
    }
    // 1 - U lies in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    ((u.ln() / ln_q).ceil() as u64).max(1)
}

/// Summed waiting slots `D_n` under `model`.
fn draw_dsum<R: Rng>(rng: &mut R, ln_q: f64, n: u64, model: DependenceModel) -> u64 {
    match model {
        DependenceModel::IndependentPairs => (1..n)
            .map(|_| geometric(rng, ln_q).abs_diff(geometric(rng, ln_q)))
            .sum(),
        DependenceModel::Chain => {
            let mut prev = geometric(rng, ln_q);
            let mut total = 0;
            for _ in 1..n {
                let next = geometric(rng, ln_q);
                total += prev.abs_diff(next);
                prev = next;
            }
            total
        }
    }
}

/// Parity of the number of errors among `events` independent events.
fn odd_parity<R: Rng>(rng: &mut R, events: u64, p: f64) -> bool {
    if events == 0 || p == 0.0 {
        return false;
    }
    if events < PER_EVENT_LIMIT {
        let mut odd = false;
        for _ in 0..events {
            odd ^= rng.random::<f64>() < p;
        }
        odd
    } else {
        let k = Binomial::new(events, p)
            .expect("validated probability")
            .sample(rng);
        k % 2 == 1
    }
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

fn ln_failure(q: f64) -> Result<f64> {
    let q = check_failure_probability(q)?;
    Ok(if q == 0.0 { f64::NEG_INFINITY } else { q.ln() })
}

fn powi_u64(a: f64, k: u64) -> f64 {
    match i32::try_from(k) {
        Ok(k) => a.powi(k),
        Err(_) => a.powf(k as f64),
    }
}

/// Estimate of `E(a^{D_n})`.
pub fn mc_expect_pow_dsum(a: f64, q: f64, n: u64, settings: &McSettings) -> Result<McEstimate> {
    let a = check_probability("a", a)?;
    check_segments(n)?;
    let ln_q = ln_failure(q)?;
    let model = settings.model;
    Ok(sample(settings, |rng| powi_u64(a, draw_dsum(rng, ln_q, n, model)))?.estimate())
}

/// Estimate of `E[max(N_1, ..., N_n)]` from explicit draws.
pub fn mc_expected_max_attempts(n: u64, p: f64, settings: &McSettings) -> Result<McEstimate> {
    check_segments(n)?;
    let p = check_probability("p", p)?;
    if p == 0.0 {
        return Err(Error::Domain(
            "success probability p = 0: the raw rate vanishes".into(),
        ));
    }
    let ln_q = ln_failure(1.0 - p)?;
    Ok(sample(settings, |rng| {
        (0..n).map(|_| geometric(rng, ln_q)).max().unwrap_or(0) as f64
    })?
    .estimate())
}

/// Estimate of the raw rate `1 / (tau0 E[max])` with a delta-method error.
pub fn mc_raw_rate(n: u64, p: f64, tau0: f64, settings: &McSettings) -> Result<McEstimate> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "tau0",
            value: tau0,
            reason: "signaling period must be positive and finite",
        });
    }
    let max = mc_expected_max_attempts(n, p, settings)?;
    Ok(McEstimate {
        mean: 1.0 / (tau0 * max.mean),
        std_error: max.std_error / (tau0 * max.mean * max.mean),
        samples: max.samples,
    })
}

/// Memory code sampled by [`mc_qber`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeLevel {
    Bare,
    Steane(StategenLevel),
}

/// Draws whether a Steane block of seven GKP qubits ends up flipped: two or
/// more of its qubits fail.
fn steane_block_fails<R: Rng>(rng: &mut R, p: f64) -> bool {
    let mut failures = 0;
    for _ in 0..7 {
        if rng.random::<f64>() < p {
            failures += 1;
        }
    }
    failures >= 2
}

/// One error family: `events` operations, each flipping with probability
/// `p_gkp` on bare GKP qubits, or through a Steane block when `steane`.
fn family_parity<R: Rng>(rng: &mut R, events: u64, p_gkp: f64, p_block: f64, steane: bool) -> bool {
    if steane && events < PER_EVENT_LIMIT {
        let mut odd = false;
        for _ in 0..events {
            odd ^= steane_block_fails(rng, p_gkp);
        }
        odd
    } else {
        odd_parity(rng, events, p_block)
    }
}

/// Estimate of the QBER: draw `D_n`, form the operation counts
/// `M_n = m D_n + 2m(n-1)` and `M_n + 2(n-1)`, draw an error parity for
/// every family and report the odd-parity frequency.
///
/// Steane blocks are simulated qubit by qubit while a family has fewer than
/// a thousand events; above that the block failure probability is used.
pub fn mc_qber(
    probs: &GkpElementaryProbs,
    n: u64,
    m: u64,
    q: f64,
    level: CodeLevel,
    settings: &McSettings,
) -> Result<McEstimate> {
    let probs = GkpElementaryProbs::new(probs.p_corr, probs.p_swap, probs.p_stategen)?;
    check_segments(n)?;
    if m == 0 {
        return Err(Error::InvalidParameter {
            field: "m",
            value: 0.0,
            reason: "loop count must be at least 1",
        });
    }
    let ln_q = ln_failure(q)?;
    let model = settings.model;
    let stations = n - 1;
    let block = |p: f64| steane_logical_error(p).min(0.5);
    let (steane, gen_steane, p_gen) = match level {
        CodeLevel::Bare => (false, false, 0.0),
        CodeLevel::Steane(StategenLevel::Bare) => (true, false, probs.p_stategen),
        CodeLevel::Steane(StategenLevel::Transferred) => (true, true, probs.p_stategen),
    };
    let corr_block = if steane {
        block(probs.p_corr)
    } else {
        probs.p_corr
    };
    let swap_block = if steane {
        block(probs.p_swap)
    } else {
        probs.p_swap
    };
    let gen_block = if gen_steane { block(p_gen) } else { p_gen };
    Ok(sample(settings, |rng| {
        let d = draw_dsum(rng, ln_q, n, model);
        let corrections = m * d + 2 * m * stations;
        let generations = if steane {
            corrections + 2 * stations
        } else {
            0
        };
        let odd = family_parity(rng, corrections, probs.p_corr, corr_block, steane)
            ^ family_parity(rng, generations, p_gen, gen_block, gen_steane)
            ^ family_parity(rng, stations, probs.p_swap, swap_block, steane);
        if odd {
            1.0
        } else {
            0.0
        }
    })?
    .estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_gkp::{qber_gkp, qber_steane};
    use crate::geom_stats::{expect_pow_dsum, expected_max_attempts, raw_rate};

    fn settings(samples: u64, seed: u64) -> McSettings {
        McSettings::new(samples, seed, DependenceModel::IndependentPairs)
    }

    #[test]
    fn trivial_cases() {
        let est = mc_expect_pow_dsum(0.7, 0.0, 6, &settings(1000, 1)).unwrap();
        assert_eq!((est.mean, est.std_error), (1.0, 0.0));
        let est = mc_expect_pow_dsum(1.0, 0.9, 6, &settings(1000, 1)).unwrap();
        assert_eq!((est.mean, est.std_error), (1.0, 0.0));
        let est = mc_raw_rate(2, 1.0, 1.0, &settings(1000, 1)).unwrap();
        assert_eq!((est.mean, est.std_error), (1.0, 0.0));
        let zero = GkpElementaryProbs::NOISELESS;
        let est = mc_qber(&zero, 10, 5, 0.9, CodeLevel::Bare, &settings(1000, 1)).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(mc_expect_pow_dsum(0.5, 1.0, 3, &settings(10, 1)).is_err());
        assert!(mc_raw_rate(3, 0.0, 1.0, &settings(10, 1)).is_err());
        assert!(mc_raw_rate(3, 0.5, 1.0, &settings(0, 1)).is_err());
    }

    #[test]
    fn single_segment_rate_is_p_over_tau() {
        let est = mc_raw_rate(1, 0.5, 1.0, &settings(400_000, 3)).unwrap();
        assert!(est.z_score(0.5).abs() < 4.0, "{est:?}");
    }

    #[test]
    fn swap_only_noise_is_fair_coin() {
        let probs = GkpElementaryProbs::new(0.0, 0.5, 0.0).unwrap();
        let est = mc_qber(&probs, 2, 3, 0.5, CodeLevel::Bare, &settings(200_000, 5)).unwrap();
        assert!(est.z_score(0.5).abs() < 4.0, "{est:?}");
    }

    #[test]
    fn replay_is_bit_identical() {
        let s = settings(300_000, 42);
        let a = mc_expect_pow_dsum(0.95, 0.8, 7, &s).unwrap();
        let b = mc_expect_pow_dsum(0.95, 0.8, 7, &s).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| mc_expect_pow_dsum(0.95, 0.8, 7, &s).unwrap());
        assert_eq!(a, c);
        let d = mc_expect_pow_dsum(0.95, 0.8, 7, &settings(300_000, 43)).unwrap();
        assert_ne!(a.mean, d.mean);
    }

    #[test]
    fn std_error_halves_when_samples_quadruple() {
        for seed in 0..4 {
            let small = mc_expect_pow_dsum(0.9, 0.7, 4, &settings(100_000, seed)).unwrap();
            let large = mc_expect_pow_dsum(0.9, 0.7, 4, &settings(400_000, seed + 100)).unwrap();
            let ratio = large.std_error / small.std_error;
            assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.25).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (a, b) = xs.split_at(313);
        let mut left = Moments::default();
        a.iter().for_each(|&x| left.push(x));
        let mut right = Moments::default();
        b.iter().for_each(|&x| right.push(x));
        let merged = left.merge(right);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn agrees_with_analytic_paths() {
        let s = settings(1_000_000, 2024);
        let est = mc_expect_pow_dsum(0.99, 0.9, 5, &s).unwrap();
        let exact = expect_pow_dsum(0.99, 0.9, 5).unwrap();
        assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");

        let est = mc_expected_max_attempts(10, 0.05, &settings(200_000, 7)).unwrap();
        let exact = expected_max_attempts(10, 0.05).unwrap();
        assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");

        let est = mc_raw_rate(10, 0.00518, 5e-4, &settings(200_000, 8)).unwrap();
        let exact = raw_rate(10, 0.00518, 5e-4).unwrap();
        assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");
        assert!((est.mean - 3.5).abs() < 0.1);

        let probs = GkpElementaryProbs::new(2e-4, 1e-3, 0.0).unwrap();
        let est = mc_qber(&probs, 10, 5, 0.9, CodeLevel::Bare, &settings(200_000, 9)).unwrap();
        let exact = qber_gkp(&probs, 10, 5, 0.9).unwrap();
        assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");

        let probs = GkpElementaryProbs::new(0.02, 0.01, 0.005).unwrap();
        for level in [StategenLevel::Bare, StategenLevel::Transferred] {
            let est = mc_qber(
                &probs,
                4,
                2,
                0.6,
                CodeLevel::Steane(level),
                &settings(200_000, 10),
            )
            .unwrap();
            let exact = qber_steane(&probs, 4, 2, 0.6, level).unwrap();
            assert!(
                est.z_score(exact).abs() < 3.0,
                "{level:?}: {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn chain_model_waits_less() {
        // neighbouring waits share a draw and are positively correlated, which
        // spreads D_n and raises E(a^D)
        let ind = mc_expect_pow_dsum(0.9, 0.8, 8, &settings(200_000, 11)).unwrap();
        let chain = mc_expect_pow_dsum(
            0.9,
            0.8,
            8,
            &McSettings::new(200_000, 11, DependenceModel::Chain),
        )
        .unwrap();
        assert!(chain.mean > ind.mean);
    }

    #[test]
    fn dependence_model_parses() {
        assert_eq!(
            "chain".parse::<DependenceModel>().unwrap(),
            DependenceModel::Chain
        );
        assert_eq!(
            "independent-pairs".parse::<DependenceModel>().unwrap(),
            DependenceModel::IndependentPairs
        );
        assert!("both".parse::<DependenceModel>().is_err());
    }
}
