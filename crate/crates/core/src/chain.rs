//! Repeater-chain assembly: configuration, per-segment quantities and the
//! secret key rate `S = r R`.

use serde::{Deserialize, Serialize};

use crate::code_gkp::{
    gkp_elementary_probs, qber_gkp, qber_steane, skf_gkp, steane_effective_probs,
    GkpElementaryProbs, StategenLevel,
};
use crate::code_qpc::{qpc_success_closed, skf_qpc, QpcShape};
use crate::error::{Error, Result};
use crate::gauss_noise::{squeezing_to_variance, SqueezingDb};
use crate::geom_stats::{binary_entropy, raw_rate};

pub const DEFAULT_ATTENUATION_LENGTH_KM: f64 = 22.0;
/// Signal velocity in fiber. Matches both the 22 km / 1.1e-4 s loop
/// coherence time and the 3.5 Hz / 2 Hz reference raw rates.
pub const DEFAULT_FIBER_SPEED_M_PER_S: f64 = 2.0e8;
pub const DEFAULT_P_LINK: f64 = 0.99;
pub const DEFAULT_P_LOOP: f64 = 0.99;
/// Linear-optics BSM success bound.
pub const DEFAULT_P_BSM: f64 = 0.5;

/// External parameters of a repeater chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeaterConfig {
    /// total distance `L` in km
    pub total_length_km: f64,
    /// number of segments `n`
    pub segments: u64,
    /// loop passes per classical signaling period `m`
    pub loops: u64,
    #[serde(default = "default_attenuation")]
    pub attenuation_length_km: f64,
    #[serde(default = "default_fiber_speed")]
    pub fiber_speed_m_per_s: f64,
    /// single-photon fiber coupling efficiency
    #[serde(default = "default_p_link")]
    pub p_link: f64,
    /// encoded-state loop coupling efficiency
    #[serde(default = "default_p_loop")]
    pub p_loop: f64,
    /// physical BSM success probability given both photons arrive
    #[serde(default = "default_p_bsm")]
    pub p_bsm: f64,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_LENGTH_KM
}
fn default_fiber_speed() -> f64 {
    DEFAULT_FIBER_SPEED_M_PER_S
}
fn default_p_link() -> f64 {
    DEFAULT_P_LINK
}
fn default_p_loop() -> f64 {
    DEFAULT_P_LOOP
}
fn default_p_bsm() -> f64 {
    DEFAULT_P_BSM
}

impl RepeaterConfig {
    /// Chain with default physical constants and efficiencies.
    pub fn new(total_length_km: f64, segments: u64, loops: u64) -> Self {
        RepeaterConfig {
            total_length_km,
            segments,
            loops,
            attenuation_length_km: DEFAULT_ATTENUATION_LENGTH_KM,
            fiber_speed_m_per_s: DEFAULT_FIBER_SPEED_M_PER_S,
            p_link: DEFAULT_P_LINK,
            p_loop: DEFAULT_P_LOOP,
            p_bsm: DEFAULT_P_BSM,
        }
    }

    pub fn with_segments(&self, segments: u64) -> Self {
        RepeaterConfig {
            segments,
            ..self.clone()
        }
    }

    pub fn with_loops(&self, loops: u64) -> Self {
        RepeaterConfig {
            loops,
            ..self.clone()
        }
    }

    pub fn with_length(&self, total_length_km: f64) -> Self {
        RepeaterConfig {
            total_length_km,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive_finite("total_length_km", self.total_length_km)?;
        positive_finite("attenuation_length_km", self.attenuation_length_km)?;
        positive_finite("fiber_speed_m_per_s", self.fiber_speed_m_per_s)?;
        if self.segments == 0 {
            return Err(Error::InvalidParameter {
                field: "segments",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.loops == 0 {
            return Err(Error::InvalidParameter {
                field: "loops",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        for (field, v) in [
            ("p_link", self.p_link),
            ("p_loop", self.p_loop),
            ("p_bsm", self.p_bsm),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter {
                    field,
                    value: v,
                    reason: "efficiency must lie in (0, 1]",
                });
            }
        }
        Ok(())
    }

    /// `L0 = L / n`
    pub fn segment_length_km(&self) -> f64 {
        self.total_length_km / self.segments as f64
    }

    /// `L_loop = L0 / m`
    pub fn loop_length_km(&self) -> f64 {
        self.segment_length_km() / self.loops as f64
    }

    /// Bare fiber storage time `L_att / c`, in seconds.
    pub fn fiber_coherence_time_s(&self) -> f64 {
        self.attenuation_length_km * 1e3 / self.fiber_speed_m_per_s
    }
}

fn positive_finite(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            value,
            reason: "must be positive and finite",
        })
    }
}

/// Quantities derived from a [`RepeaterConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedLink {
    /// per-attempt distribution success probability
    pub p: f64,
    pub q: f64,
    /// transmissivity of one loop pass
    pub eta_loop: f64,
    /// signaling period `L0 / c` in seconds
    pub tau0_s: f64,
    /// end-to-end fiber transmissivity `exp(-L / L_att)`
    pub eta_total: f64,
}

pub fn derive_link(config: &RepeaterConfig) -> Result<DerivedLink> {
    config.validate()?;
    let l0 = config.segment_length_km();
    let att = config.attenuation_length_km;
    let p = config.p_bsm * config.p_link * config.p_link * (-l0 / att).exp();
    Ok(DerivedLink {
        p,
        q: 1.0 - p,
        eta_loop: config.p_loop * (-l0 / (config.loops as f64 * att)).exp(),
        // km -> m happens here and nowhere else
        tau0_s: l0 * 1e3 / config.fiber_speed_m_per_s,
        eta_total: (-config.total_length_km / att).exp(),
    })
}

/// Memory error-correction code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodeSpec {
    Gkp {
        squeezing_db: f64,
    },
    SteaneGkp {
        squeezing_db: f64,
        #[serde(default)]
        stategen: StategenLevel,
    },
    Qpc {
        a: u32,
        b: u32,
    },
    /// Noise-free memory: no Pauli errors and no teleportation failures.
    /// Reference point for the code-independent raw rate.
    Ideal,
}

impl CodeSpec {
    pub fn gkp(squeezing_db: f64) -> Self {
        CodeSpec::Gkp { squeezing_db }
    }

    pub fn steane(squeezing_db: f64) -> Self {
        CodeSpec::SteaneGkp {
            squeezing_db,
            stategen: StategenLevel::Bare,
        }
    }

    pub fn qpc(a: u32, b: u32) -> Self {
        CodeSpec::Qpc { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CodeSpec::Gkp { squeezing_db } | CodeSpec::SteaneGkp { squeezing_db, .. } => {
                squeezing_to_variance(SqueezingDb(squeezing_db)).map(|_| ())
            }
            CodeSpec::Qpc { a, b } => QpcShape::new(a, b).map(|_| ()),
            CodeSpec::Ideal => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CodeSpec::Gkp { squeezing_db } => format!("gkp({squeezing_db} dB)"),
            CodeSpec::SteaneGkp {
                squeezing_db,
                stategen,
            } => format!("steane_gkp({squeezing_db} dB, {stategen} stategen)"),
            CodeSpec::Qpc { a, b } => format!("qpc(b={b}, a={a})"),
            CodeSpec::Ideal => "ideal".into(),
        }
    }
}

/// Extra quantities behind a [`RateBreakdown`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub link: DerivedLink,
    pub segments: u64,
    pub loops: u64,
    /// bare-GKP elementary probabilities (GKP family)
    pub elementary: Option<GkpElementaryProbs>,
    /// probabilities entering the QBER after Steane transfer
    pub effective: Option<GkpElementaryProbs>,
    /// `1 - 2 h(eps)` before clamping (GKP family)
    pub skf_unclamped: Option<f64>,
    /// single loop teleportation success (QPC)
    pub qpc_success: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub raw_rate_hz: f64,
    pub skf: f64,
    pub skr_hz: f64,
    /// QBER; identically zero for QPC and ideal memories
    pub epsilon: f64,
    pub diagnostics: Diagnostics,
}

/// Secret key fraction and QBER of one configuration, without the raw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyFraction {
    pub skf: f64,
    pub epsilon: f64,
    pub diagnostics: Diagnostics,
}

/// Secret key fraction of `config` operated with memory code `code`.
pub fn secret_key_fraction(config: &RepeaterConfig, code: &CodeSpec) -> Result<KeyFraction> {
    code.validate()?;
    let link = derive_link(config)?;
    let n = config.segments;
    let m = config.loops;
    let mut diagnostics = Diagnostics {
        link,
        segments: n,
        loops: m,
        elementary: None,
        effective: None,
        skf_unclamped: None,
        qpc_success: None,
    };
    let (skf, epsilon) = match *code {
        CodeSpec::Gkp { squeezing_db } => {
            let delta2 = squeezing_to_variance(SqueezingDb(squeezing_db))?;
            let probs = gkp_elementary_probs(delta2, link.eta_loop)?;
            let eps = qber_gkp(&probs, n, m, link.q)?;
            diagnostics.elementary = Some(probs);
            diagnostics.effective = Some(GkpElementaryProbs {
                p_stategen: 0.0,
                ..probs
            });
            diagnostics.skf_unclamped = Some(1.0 - 2.0 * binary_entropy(eps)?);
            (skf_gkp(eps)?, eps)
        }
        CodeSpec::SteaneGkp {
            squeezing_db,
            stategen,
        } => {
            let delta2 = squeezing_to_variance(SqueezingDb(squeezing_db))?;
            let probs = gkp_elementary_probs(delta2, link.eta_loop)?;
            let eps = qber_steane(&probs, n, m, link.q, stategen)?;
            diagnostics.elementary = Some(probs);
            diagnostics.effective = Some(steane_effective_probs(&probs, stategen));
            diagnostics.skf_unclamped = Some(1.0 - 2.0 * binary_entropy(eps)?);
            (skf_gkp(eps)?, eps)
        }
        CodeSpec::Qpc { a, b } => {
            let shape = QpcShape::new(a, b)?;
            diagnostics.qpc_success = Some(qpc_success_closed(shape, link.eta_loop)?);
            (skf_qpc(shape, n, m, link.q, link.eta_loop)?, 0.0)
        }
        CodeSpec::Ideal => (1.0, 0.0),
    };
    Ok(KeyFraction {
        skf,
        epsilon,
        diagnostics,
    })
}

/// Raw rate of `config` in Hz. Independent of the memory code and of `m`.
pub fn chain_raw_rate(config: &RepeaterConfig) -> Result<f64> {
    let link = derive_link(config)?;
    raw_rate(config.segments, link.p, link.tau0_s)
}

/// Secret key rate of `config` operated with memory code `code`.
pub fn secret_key_rate(config: &RepeaterConfig, code: &CodeSpec) -> Result<RateBreakdown> {
    let fraction = secret_key_fraction(config, code)?;
    Ok(combine(chain_raw_rate(config)?, fraction))
}

/// Assemble a [`RateBreakdown`] from a precomputed raw rate.
pub fn combine(raw_rate_hz: f64, fraction: KeyFraction) -> RateBreakdown {
    RateBreakdown {
        raw_rate_hz,
        skf: fraction.skf,
        skr_hz: fraction.skf * raw_rate_hz,
        epsilon: fraction.epsilon,
        diagnostics: fraction.diagnostics,
    }
}

/// Repeaterless secret-key capacity `-log2(1 - eta)` of a pure-loss channel.
pub fn plob_bound(eta_total: f64) -> Result<f64> {
    if eta_total == 1.0 {
        return Err(Error::Domain("PLOB bound diverges at eta = 1".into()));
    }
    if !(0.0..1.0).contains(&eta_total) {
        return Err(Error::InvalidParameter {
            field: "eta_total",
            value: eta_total,
            reason: "must lie in [0, 1)",
        });
    }
    Ok(-(-eta_total).ln_1p() / std::f64::consts::LN_2)
}

/// Best case for unencoded single-photon storage: every segment succeeds at
/// once, yet each of the `2(n-1)` stored photons still spends one signaling
/// period in its loop, `exp(-L/L_att)^{2m(n-1)/(nm)}`.
pub fn unencoded_upper_bound(config: &RepeaterConfig) -> Result<f64> {
    config.validate()?;
    let n = config.segments as f64;
    Ok((-(config.total_length_km / config.attenuation_length_km) * 2.0 * (n - 1.0) / n).exp())
}
