//! Run and sweep configuration documents (TOML, or JSON emitted by a
//! previous run).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{
    CodeSpec, RepeaterConfig, DEFAULT_ATTENUATION_LENGTH_KM, DEFAULT_FIBER_SPEED_M_PER_S,
    DEFAULT_P_BSM, DEFAULT_P_LINK, DEFAULT_P_LOOP,
};
use crate::error::{Error, Result};
use crate::report::RunRecord;
use crate::sweep::{Axis, MRange, DEFAULT_M_MAX, DEFAULT_M_MIN};

/// `[chain]` section. Length and segment count may come from flags
/// instead; `loops` is optimized when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_length_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<u64>,
    #[serde(default = "attenuation")]
    pub attenuation_length_km: f64,
    #[serde(default = "fiber_speed")]
    pub fiber_speed_m_per_s: f64,
    #[serde(default = "p_link")]
    pub p_link: f64,
    #[serde(default = "p_loop")]
    pub p_loop: f64,
    #[serde(default = "p_bsm")]
    pub p_bsm: f64,
}

fn attenuation() -> f64 {
    DEFAULT_ATTENUATION_LENGTH_KM
}
fn fiber_speed() -> f64 {
    DEFAULT_FIBER_SPEED_M_PER_S
}
fn p_link() -> f64 {
    DEFAULT_P_LINK
}
fn p_loop() -> f64 {
    DEFAULT_P_LOOP
}
fn p_bsm() -> f64 {
    DEFAULT_P_BSM
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            total_length_km: None,
            segments: None,
            loops: None,
            attenuation_length_km: DEFAULT_ATTENUATION_LENGTH_KM,
            fiber_speed_m_per_s: DEFAULT_FIBER_SPEED_M_PER_S,
            p_link: DEFAULT_P_LINK,
            p_loop: DEFAULT_P_LOOP,
            p_bsm: DEFAULT_P_BSM,
        }
    }
}

impl ChainSection {
    /// Repeater configuration with loop count `loops`.
    pub fn resolve(&self, loops: u64) -> Result<RepeaterConfig> {
        let total_length_km = self
            .total_length_km
            .ok_or_else(|| missing("chain.total_length_km", "--L"))?;
        let segments = self
            .segments
            .ok_or_else(|| missing("chain.segments", "--n"))?;
        let cfg = RepeaterConfig {
            total_length_km,
            segments,
            loops,
            attenuation_length_km: self.attenuation_length_km,
            fiber_speed_m_per_s: self.fiber_speed_m_per_s,
            p_link: self.p_link,
            p_loop: self.p_loop,
            p_bsm: self.p_bsm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`resolve`](Self::resolve) for sweeps, where the swept fields
    /// get placeholders that every cell overwrites.
    pub fn resolve_partial(&self) -> Result<RepeaterConfig> {
        ChainSection {
            total_length_km: Some(self.total_length_km.unwrap_or(1.0)),
            segments: Some(self.segments.unwrap_or(1)),
            ..self.clone()
        }
        .resolve(self.loops.unwrap_or(1))
    }
}

fn missing(key: &str, flag: &str) -> Error {
    Error::Parse(format!(
        "missing `{key}` (set it in the config file or pass {flag})"
    ))
}

/// `[optimize]` section: search ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default = "m_min")]
    pub m_min: u64,
    #[serde(default = "m_max")]
    pub m_max: u64,
}

fn m_min() -> u64 {
    DEFAULT_M_MIN
}
fn m_max() -> u64 {
    DEFAULT_M_MAX
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            m_min: DEFAULT_M_MIN,
            m_max: DEFAULT_M_MAX,
        }
    }
}

impl OptimizeSection {
    pub fn m_range(&self) -> Result<MRange> {
        MRange::new(self.m_min, self.m_max)
    }
}

/// Configuration of a single rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub chain: ChainSection,
    pub code: CodeSpec,
    #[serde(default)]
    pub optimize: OptimizeSection,
}

/// Axis given either as a spec string (`log:10:1000:20`, `1,2,5`) or as an
/// explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Spec(String),
    Values(Vec<f64>),
}

impl AxisSpec {
    pub fn axis(&self) -> Result<Axis> {
        match self {
            AxisSpec::Spec(s) => s.parse(),
            AxisSpec::Values(v) => Axis::new(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSection {
    /// every `(n, m)` pair at fixed length
    NmGrid { segments: AxisSpec, loops: AxisSpec },
    /// total length axis at fixed `n`, `m` optimized per point
    Distance { lengths_km: AxisSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub chain: ChainSection,
    pub code: CodeSpec,
    #[serde(default)]
    pub optimize: OptimizeSection,
    pub sweep: SweepSection,
}

pub fn parse_run_toml(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_sweep_toml(text: &str) -> Result<SweepConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// A bare [`RunConfig`] or a full [`RunRecord`] emitted with `--json`.
pub fn parse_run_json(text: &str) -> Result<RunConfig> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Record(Box<RunRecord>),
        Config(RunConfig),
    }
    match serde_json::from_str::<Doc>(text) {
        Ok(Doc::Record(r)) => Ok(r.config),
        Ok(Doc::Config(c)) => Ok(c),
        Err(_) => serde_json::from_str::<RunConfig>(text).map_err(|e| Error::Parse(e.to_string())),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Loads a run configuration; `.json` files are read as JSON, anything else
/// as TOML.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = read(path)?;
    if is_json(path) {
        parse_run_json(&text)
    } else {
        parse_run_toml(&text)
    }
}

pub fn load_sweep_config(path: &Path) -> Result<SweepConfig> {
    let text = read(path)?;
    if is_json(path) {
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    } else {
        parse_sweep_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_gkp::StategenLevel;

    #[test]
    fn run_toml_with_defaults() {
        let cfg = parse_run_toml(
            r#"
            [chain]
            total_length_km = 1000
            segments = 100

            [code]
            kind = "steane_gkp"
            squeezing_db = 16.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.chain.loops, None);
        assert_eq!(cfg.chain.p_link, 0.99);
        assert_eq!(
            cfg.code,
            CodeSpec::SteaneGkp {
                squeezing_db: 16.0,
                stategen: StategenLevel::Bare
            }
        );
        assert_eq!(cfg.optimize.m_range().unwrap(), MRange::default());
        let rc = cfg.chain.resolve(7).unwrap();
        assert_eq!((rc.segments, rc.loops), (100, 7));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(parse_run_toml("[chain]\nlength = 3\n[code]\nkind = \"ideal\"").is_err());
        assert!(parse_run_toml("[code]\nkind = \"surface\"").is_err());
        let cfg = parse_run_toml(
            "[chain]\ntotal_length_km = 10\nsegments = 2\np_link = 1.5\n[code]\nkind = \"ideal\"",
        )
        .unwrap();
        match cfg.chain.resolve(1) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "p_link"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = parse_run_toml("[code]\nkind = \"ideal\"").unwrap();
        assert!(matches!(cfg.chain.resolve(1), Err(Error::Parse(_))));
    }

    #[test]
    fn sweep_toml_axes() {
        let cfg = parse_sweep_toml(
            r#"
            [chain]
            total_length_km = 1000

            [code]
            kind = "qpc"
            a = 5
            b = 21

            [sweep]
            kind = "nm_grid"
            segments = "log:10:10000:7"
            loops = [1, 10, 100]
            "#,
        )
        .unwrap();
        match &cfg.sweep {
            SweepSection::NmGrid { segments, loops } => {
                assert_eq!(segments.axis().unwrap().values.len(), 7);
                assert_eq!(
                    loops.axis().unwrap().integers("m").unwrap(),
                    vec![1, 10, 100]
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        let cfg = parse_sweep_toml(
            "[chain]\nsegments = 100\n[code]\nkind = \"gkp\"\nsqueezing_db = 20\n[sweep]\nkind = \"distance\"\nlengths_km = \"lin:1000:12000:12\"",
        )
        .unwrap();
        assert!(matches!(cfg.sweep, SweepSection::Distance { .. }));
    }

    #[test]
    fn json_config_round_trip() {
        let cfg = parse_run_toml("[chain]\ntotal_length_km = 1234.5678901234567\nsegments = 37\nloops = 12\n[code]\nkind = \"gkp\"\nsqueezing_db = 18.123456789012345").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_run_json(&json).unwrap(), cfg);
        assert!(parse_run_json("{\"code\": 3}").is_err());
    }
}
