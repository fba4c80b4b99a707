//! Parameter scans: loop-count optimization, `n`-`m` grids, squeezing
//! thresholds and key fraction versus distance.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{
    chain_raw_rate, combine, secret_key_fraction, CodeSpec, RateBreakdown, RepeaterConfig,
};
use crate::code_gkp::StategenLevel;
use crate::error::{Error, Result};

pub const DEFAULT_M_MIN: u64 = 1;
pub const DEFAULT_M_MAX: u64 = 10_000;
pub const DEFAULT_QPC_A_RANGE: RangeInclusive<u32> = 2..=10;
pub const DEFAULT_THRESHOLD_BRACKET_DB: (f64, f64) = (5.0, 30.0);
pub const DEFAULT_THRESHOLD_RESOLUTION_DB: f64 = 0.1;
/// Largest number of points a generated axis may have.
pub const MAX_AXIS_POINTS: usize = 1_000_000;

/// Inclusive range of loop counts scanned by [`optimize_m`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MRange {
    pub min: u64,
    pub max: u64,
}

impl Default for MRange {
    fn default() -> Self {
        MRange {
            min: DEFAULT_M_MIN,
            max: DEFAULT_M_MAX,
        }
    }
}

impl MRange {
    pub fn new(min: u64, max: u64) -> Result<Self> {
        let r = MRange { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::EmptyRange(format!(
                "loop range [{}, {}] must be nonempty and start at 1 or above",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Best loop count for `config` and its rate; ties go to the smaller `m`.
/// `config.loops` is ignored.
pub fn optimize_m(
    config: &RepeaterConfig,
    code: &CodeSpec,
    range: MRange,
) -> Result<(u64, RateBreakdown)> {
    range.validate()?;
    let raw = chain_raw_rate(config)?;
    let mut best: Option<(u64, RateBreakdown)> = None;
    for m in range.min..=range.max {
        let rate = combine(raw, secret_key_fraction(&config.with_loops(m), code)?);
        if best.as_ref().is_none_or(|(_, b)| rate.skf > b.skf) {
            best = Some((m, rate));
        }
    }
    Ok(best.expect("range is nonempty"))
}

/// Best QPC block size `a` in `a_range` for `b` blocks, with `m` optimized
/// for every candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpcOptimum {
    pub a: u32,
    pub b: u32,
    pub m: u64,
    pub rate: RateBreakdown,
}

pub fn optimize_qpc_a(
    config: &RepeaterConfig,
    b: u32,
    a_range: RangeInclusive<u32>,
    m_range: MRange,
) -> Result<QpcOptimum> {
    if a_range.is_empty() {
        return Err(Error::EmptyRange(format!(
            "QPC block size range {}..={} is empty",
            a_range.start(),
            a_range.end()
        )));
    }
    let mut best: Option<QpcOptimum> = None;
    for a in a_range {
        let (m, rate) = optimize_m(config, &CodeSpec::qpc(a, b), m_range)?;
        if best.as_ref().is_none_or(|o| rate.skf > o.rate.skf) {
            best = Some(QpcOptimum { a, b, m, rate });
        }
    }
    Ok(best.expect("range is nonempty"))
}

/// Values along one sweep axis, either listed or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let axis = Axis { values };
        axis.validate()?;
        Ok(axis)
    }

    /// `start..=stop` in `count` evenly spaced steps.
    pub fn linear(start: f64, stop: f64, count: usize) -> Result<Self> {
        Axis::new(spaced(start, stop, count, |x| x, |x| x)?)
    }

    /// `start..=stop` in `count` logarithmically spaced steps.
    pub fn log(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && stop > 0.0) {
            return Err(Error::Parse(format!(
                "log axis needs positive end points, got {start} and {stop}"
            )));
        }
        let mut values = spaced(start, stop, count, f64::ln, f64::exp)?;
        // exact end points rather than exp(ln(x))
        values[0] = start;
        *values.last_mut().expect("count >= 1") = stop;
        Axis::new(values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptyRange("axis has no values".into()));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("axis value {bad} is not finite")));
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::Parse("axis values must be strictly monotone".into()));
        }
        Ok(())
    }

    /// Values rounded to integers, with repeats from rounding dropped.
    pub fn integers(&self, field: &'static str) -> Result<Vec<u64>> {
        let mut out: Vec<u64> = Vec::with_capacity(self.values.len());
        for &v in &self.values {
            let r = v.round();
            if r < 1.0 {
                return Err(Error::InvalidParameter {
                    field,
                    value: v,
                    reason: "integer axis values must be at least 1",
                });
            }
            let r = r as u64;
            if out.last() != Some(&r) {
                out.push(r);
            }
        }
        Ok(out)
    }
}

fn spaced(
    start: f64,
    stop: f64,
    count: usize,
    fwd: fn(f64) -> f64,
    back: fn(f64) -> f64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::EmptyRange(
            "axis point count must be at least 1".into(),
        ));
    }
    if count > MAX_AXIS_POINTS {
        return Err(Error::Parse(format!(
            "axis point count {count} exceeds {MAX_AXIS_POINTS}"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (fwd(start), fwd(stop));
    let step = (b - a) / (count - 1) as f64;
    Ok((0..count).map(|i| back(a + step * i as f64)).collect())
}

impl std::str::FromStr for Axis {
    type Err = Error;

    /// `log:START:STOP:COUNT`, `lin:START:STOP:COUNT` or a comma list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_f = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad axis number {t:?}")))
        };
        if let Some((kind, rest)) = s.split_once(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "axis {s:?}: expected {kind}:START:STOP:COUNT"
                )));
            }
            let start = parse_f(parts[0])?;
            let stop = parse_f(parts[1])?;
            let count: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad axis count {:?}", parts[2])))?;
            match kind.trim() {
                "log" => Axis::log(start, stop, count),
                "lin" | "linear" => Axis::linear(start, stop, count),
                other => Err(Error::Parse(format!("unknown axis spacing {other:?}"))),
            }
        } else {
            let values = s.split(',').map(parse_f).collect::<Result<Vec<_>>>()?;
            Axis::new(values)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub segments: u64,
    pub loops: u64,
    pub rate: RateBreakdown,
}

/// Rates on the `n` x `m` grid, row-major in axis order.
pub fn scan_nm(
    base: &RepeaterConfig,
    code: &CodeSpec,
    n_values: &[u64],
    m_values: &[u64],
) -> Result<Vec<GridCell>> {
    if n_values.is_empty() || m_values.is_empty() {
        return Err(Error::EmptyRange(
            "n-m grid needs at least one value per axis".into(),
        ));
    }
    code.validate()?;
    let rows: Vec<Vec<GridCell>> = n_values
        .par_iter()
        .map(|&n| {
            let cfg = base.with_segments(n);
            let raw = chain_raw_rate(&cfg)?;
            m_values
                .iter()
                .map(|&m| {
                    let rate = combine(raw, secret_key_fraction(&cfg.with_loops(m), code)?);
                    Ok(GridCell {
                        segments: n,
                        loops: m,
                        rate,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub total_length_km: f64,
    pub loops: u64,
    pub rate: RateBreakdown,
}

/// Rate against total distance with `m` optimized at every point.
pub fn distance_curve(
    base: &RepeaterConfig,
    code: &CodeSpec,
    lengths_km: &[f64],
    m_range: MRange,
) -> Result<Vec<DistancePoint>> {
    code.validate()?;
    lengths_km
        .par_iter()
        .map(|&l| {
            let (m, rate) = optimize_m(&base.with_length(l), code, m_range)?;
            Ok(DistancePoint {
                total_length_km: l,
                loops: m,
                rate,
            })
        })
        .collect()
}

/// GKP-based code families whose squeezing can be searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SqueezedFamily {
    Gkp,
    SteaneGkp {
        #[serde(default)]
        stategen: StategenLevel,
    },
}

impl SqueezedFamily {
    pub fn at(&self, squeezing_db: f64) -> CodeSpec {
        match *self {
            SqueezedFamily::Gkp => CodeSpec::Gkp { squeezing_db },
            SqueezedFamily::SteaneGkp { stategen } => CodeSpec::SteaneGkp {
                squeezing_db,
                stategen,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSettings {
    /// the threshold is the least squeezing with SKF strictly above this
    pub target_skf: f64,
    pub bracket_db: (f64, f64),
    pub resolution_db: f64,
    pub m_range: MRange,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings {
            target_skf: 0.0,
            bracket_db: DEFAULT_THRESHOLD_BRACKET_DB,
            resolution_db: DEFAULT_THRESHOLD_RESOLUTION_DB,
            m_range: MRange::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub parameter: String,
    /// least probed squeezing that meets the target
    pub threshold: f64,
    /// `(below, at_or_above)`: the target fails at the first value and holds
    /// at the second
    pub bracket: (f64, f64),
    pub target_skf: f64,
    pub skf_below: f64,
    pub skf_above: f64,
    /// optimal loop count at `threshold`
    pub loops: u64,
}

/// Least squeezing (dB) at which the best SKF over `m` exceeds the target,
/// by bisection. Monotonicity of the SKF in squeezing is checked on every
/// probe rather than assumed.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn squeezing_threshold(
    family: SqueezedFamily,
    config: &RepeaterConfig,
    settings: &ThresholdSettings,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = settings.bracket_db;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::EmptyRange(format!(
            "squeezing bracket [{lo}, {hi}] dB"
        )));
    }
    if !(settings.resolution_db > 0.0) {
        return Err(Error::InvalidParameter {
            field: "resolution_db",
            value: settings.resolution_db,
            reason: "must be positive",
        });
    }
    if !(settings.target_skf >= 0.0 && settings.target_skf < 1.0) {
        return Err(Error::InvalidParameter {
            field: "target_skf",
            value: settings.target_skf,
            reason: "must lie in [0, 1)",
        });
    }
    let probe = |s: f64| optimize_m(config, &family.at(s), settings.m_range);
    let meets = |rate: &RateBreakdown| rate.skf > settings.target_skf;

    let (m_hi, mut rate_hi) = probe(hi)?;
    if !meets(&rate_hi) {
        return Err(Error::ThresholdUnreachable {
            low_db: lo,
            high_db: hi,
            target: settings.target_skf,
            skf_at_high: rate_hi.skf,
        });
    }
    let (_, mut rate_lo) = probe(lo)?;
    if meets(&rate_lo) {
        return Err(Error::Domain(format!(
            "target already met at the low end of the bracket ({lo} dB, SKF {})",
            rate_lo.skf
        )));
    }
    let mut m_at = m_hi;
    let mut probes = vec![(lo, rate_lo.skf), (hi, rate_hi.skf)];
    while hi - lo > settings.resolution_db {
        let mid = 0.5 * (lo + hi);
        let (m, rate) = probe(mid)?;
        probes.push((mid, rate.skf));
        if meets(&rate) {
            hi = mid;
            rate_hi = rate;
            m_at = m;
        } else {
            lo = mid;
            rate_lo = rate;
        }
    }
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = probes.windows(2).find(|w| w[1].1 < w[0].1) {
        return Err(Error::Domain(format!(
            "SKF not monotone in squeezing: {} at {} dB but {} at {} dB",
            w[0].1, w[0].0, w[1].1, w[1].0
        )));
    }
    Ok(ThresholdResult {
        parameter: "squeezing_db".into(),
        threshold: hi,
        bracket: (lo, hi),
        target_skf: settings.target_skf,
        skf_below: rate_lo.skf,
        skf_above: rate_hi.skf,
        loops: m_at,
    })
}
