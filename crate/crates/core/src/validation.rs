//! Fixed grid of analytic-versus-Monte-Carlo comparisons.

use serde::{Deserialize, Serialize};

use crate::code_gkp::{qber_gkp, qber_steane, GkpElementaryProbs, StategenLevel};
use crate::error::Result;
use crate::geom_stats::{expect_pow_dsum, raw_rate};
use crate::mc_oracle::{
    mc_expect_pow_dsum, mc_qber, mc_raw_rate, CodeLevel, DependenceModel, McEstimate, McSettings,
};

pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0x5eed_2023;
/// `|z|` above which the command-line suite fails.
pub const FAIL_Z: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub model: DependenceModel,
    pub parameters: String,
    pub analytic: f64,
    pub mc: McEstimate,
    pub z: f64,
    /// false for rows that measure the independence approximation rather
    /// than implementation error
    pub gated: bool,
}

#[derive(Debug, Clone, Copy)]
enum Case {
    DSum {
        a: f64,
        q: f64,
        n: u64,
    },
    Rate {
        n: u64,
        p: f64,
        tau0: f64,
    },
    Gkp {
        probs: [f64; 2],
        n: u64,
        m: u64,
        q: f64,
    },
    Steane {
        probs: [f64; 3],
        n: u64,
        m: u64,
        q: f64,
        level: StategenLevel,
    },
}

const CASES: &[Case] = &[
    Case::DSum {
        a: 0.99,
        q: 0.9,
        n: 5,
    },
    Case::DSum {
        a: 0.9,
        q: 0.5,
        n: 10,
    },
    Case::DSum {
        a: 0.5,
        q: 0.99,
        n: 3,
    },
    Case::DSum {
        a: 0.999,
        q: 0.995,
        n: 20,
    },
    Case::DSum {
        a: 0.7,
        q: 0.0,
        n: 8,
    },
    Case::Rate {
        n: 10,
        p: 0.00518,
        tau0: 5e-4,
    },
    Case::Rate {
        n: 100,
        p: 0.0052,
        tau0: 5e-4,
    },
    Case::Rate {
        n: 2,
        p: 0.3,
        tau0: 1.0,
    },
    Case::Gkp {
        probs: [1e-3, 1e-4],
        n: 10,
        m: 20,
        q: 0.99,
    },
    Case::Gkp {
        probs: [2e-4, 1e-3],
        n: 10,
        m: 5,
        q: 0.9,
    },
    Case::Gkp {
        probs: [1e-5, 1e-3],
        n: 30,
        m: 3,
        q: 0.5,
    },
    Case::Steane {
        probs: [0.02, 0.01, 0.005],
        n: 4,
        m: 2,
        q: 0.6,
        level: StategenLevel::Bare,
    },
    Case::Steane {
        probs: [0.02, 0.01, 0.005],
        n: 4,
        m: 2,
        q: 0.6,
        level: StategenLevel::Transferred,
    },
    Case::Steane {
        probs: [0.01, 0.005, 1e-4],
        n: 10,
        m: 10,
        q: 0.95,
        level: StategenLevel::Bare,
    },
];

/// Cases rerun under the chain dependence model to measure the gap left by
/// treating station waits as independent.
const GAP_CASES: &[Case] = &[
    Case::DSum {
        a: 0.99,
        q: 0.9,
        n: 5,
    },
    Case::DSum {
        a: 0.999,
        q: 0.995,
        n: 20,
    },
    Case::Gkp {
        probs: [1e-3, 1e-4],
        n: 10,
        m: 20,
        q: 0.99,
    },
    Case::Gkp {
        probs: [2e-4, 1e-3],
        n: 10,
        m: 5,
        q: 0.9,
    },
];

fn evaluate(case: Case, settings: &McSettings) -> Result<(String, String, f64, McEstimate)> {
    Ok(match case {
        Case::DSum { a, q, n } => (
            "expect_pow_dsum".into(),
            format!("a={a} q={q} n={n}"),
            expect_pow_dsum(a, q, n)?,
            mc_expect_pow_dsum(a, q, n, settings)?,
        ),
        Case::Rate { n, p, tau0 } => (
            "raw_rate".into(),
            format!("n={n} p={p} tau0={tau0}"),
            raw_rate(n, p, tau0)?,
            mc_raw_rate(n, p, tau0, settings)?,
        ),
        Case::Gkp {
            probs: [c, s],
            n,
            m,
            q,
        } => {
            let probs = GkpElementaryProbs::new(c, s, 0.0)?;
            (
                "qber_gkp".into(),
                format!("p_corr={c} p_swap={s} n={n} m={m} q={q}"),
                qber_gkp(&probs, n, m, q)?,
                mc_qber(&probs, n, m, q, CodeLevel::Bare, settings)?,
            )
        }
        Case::Steane {
            probs: [c, s, g],
            n,
            m,
            q,
            level,
        } => {
            let probs = GkpElementaryProbs::new(c, s, g)?;
            (
                "qber_steane".into(),
                format!("p_corr={c} p_swap={s} p_stategen={g} n={n} m={m} q={q} stategen={level}"),
                qber_steane(&probs, n, m, q, level)?,
                mc_qber(&probs, n, m, q, CodeLevel::Steane(level), settings)?,
            )
        }
    })
}

/// Runs the gated independent-pairs grid followed by the ungated
/// chain-model gap rows. Row `i` uses seed `seed + i`.
pub fn run_suite(samples: u64, seed: u64) -> Result<Vec<ValidationRow>> {
    let plan = CASES
        .iter()
        .map(|&c| (c, DependenceModel::IndependentPairs, true))
        .chain(
            GAP_CASES
                .iter()
                .map(|&c| (c, DependenceModel::Chain, false)),
        );
    plan.enumerate()
        .map(|(i, (case, model, gated))| {
            let settings = McSettings::new(samples, seed.wrapping_add(i as u64), model);
            let (quantity, parameters, analytic, mc) = evaluate(case, &settings)?;
            Ok(ValidationRow {
                quantity,
                model,
                parameters,
                analytic,
                mc,
                z: mc.z_score(analytic),
                gated,
            })
        })
        .collect()
}

/// Largest `|z|` among gated rows.
pub fn max_gated_z(rows: &[ValidationRow]) -> f64 {
    rows.iter()
        .filter(|r| r.gated)
        .map(|r| r.z.abs())
        .fold(0.0, f64::max)
}
