//! TOML analysis config, preset resolution and load-time validation.

use std::path::{Path, PathBuf};

use codesign_lab::epmodel::{BandwidthModel, EpError, EpScenario, RoutingPolicy, ScoreDistribution};
use codesign_lab::lowprec::{Codec, Distribution};
use codesign_lab::memcalc::{presets, MemCalcError, ModelConfig};
use codesign_lab::topology::{CostModel, HopLatencyTable, TopologyKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Directory of extra `<name>.toml` model presets.
pub const PRESETS_ENV: &str = "CODESIGN_LAB_PRESETS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub models: ModelsSection,
    pub ep: EpSection,
    pub routing: RoutingSection,
    pub topo: TopoSection,
    pub quant: QuantSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    /// Preset names to analyse. Unset means the command's default list.
    pub presets: Option<Vec<String>>,
    /// Fully specified models appended after the presets.
    pub custom: Vec<ModelConfig>,
    /// Preset the KV multipliers are taken against.
    pub baseline: String,
    pub kv_bytes_per_element: u64,
    pub seq_len: u64,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            presets: None,
            custom: Vec::new(),
            baseline: "deepseek-v3".into(),
            kv_bytes_per_element: 2,
            seq_len: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpSection {
    pub scenario: EpScenario,
    /// Per-device bandwidths to evaluate, GB/s.
    pub bandwidths_gb_s: Vec<f64>,
    pub links: BandwidthModel,
    pub mtp_accept_rates: Vec<f64>,
}

impl Default for EpSection {
    fn default() -> Self {
        EpSection {
            scenario: EpScenario::default(),
            bandwidths_gb_s: vec![50.0, 900.0],
            links: BandwidthModel::default(),
            mtp_accept_rates: vec![0.8, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingSection {
    pub policy: RoutingPolicy,
    pub trials: u64,
    pub scores: ScoreDistribution,
}

impl Default for RoutingSection {
    fn default() -> Self {
        RoutingSection {
            policy: RoutingPolicy::default(),
            trials: 100_000,
            scores: ScoreDistribution::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyRequest {
    pub kind: TopologyKind,
    pub radix: u64,
    #[serde(default = "one")]
    pub planes: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoSection {
    pub topologies: Vec<TopologyRequest>,
    /// Append the Slim Fly and Dragonfly rows.
    pub include_reference: bool,
    pub cost_model: CostModel,
    pub latency: HopLatencyTable,
}

impl Default for TopoSection {
    fn default() -> Self {
        let req = |kind, planes| TopologyRequest { kind, radix: 64, planes };
        TopoSection {
            topologies: vec![
                req(TopologyKind::Ft2, 1),
                req(TopologyKind::Mpft, 8),
                req(TopologyKind::Ft3, 1),
            ],
            include_reference: true,
            cost_model: CostModel::default(),
            latency: HopLatencyTable::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GemmRequest {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantSection {
    pub codecs: Vec<Codec>,
    pub distribution: Distribution,
    /// 128-value blocks per codec.
    pub blocks: usize,
    /// Omit to skip the GEMM report.
    pub gemm: Option<GemmRequest>,
    pub gemm_distribution: Distribution,
}

impl Default for QuantSection {
    fn default() -> Self {
        QuantSection {
            codecs: vec![
                Codec::E4m3,
                Codec::E5m2,
                Codec::LogFmt { n_bits: 8, stochastic: false },
                Codec::LogFmt { n_bits: 8, stochastic: true },
                Codec::LogFmt { n_bits: 10, stochastic: false },
            ],
            distribution: Distribution::LogNormal { mu: 0.0, sigma: 1.0, positive: false },
            blocks: 2000,
            gemm: Some(GemmRequest { m: 128, n: 128, k: 128 }),
            gemm_distribution: Distribution::Normal { mean: 0.0, std_dev: 1.0 },
        }
    }
}

fn invalid(field: impl Into<String>, reason: impl ToString) -> CliError {
    CliError::ConfigInvalid {
        field: field.into(),
        reason: reason.to_string(),
    }
}

fn ep_invalid(prefix: &str, e: EpError) -> CliError {
    match e {
        EpError::Invalid { field, reason } => invalid(format!("{prefix}.{field}"), reason),
        other => invalid(prefix, other),
    }
}

pub(crate) fn model_invalid(prefix: &str, e: MemCalcError) -> CliError {
    match e {
        MemCalcError::Invalid { field, reason } => invalid(format!("{prefix}.{field}"), reason),
        other => invalid(prefix, other),
    }
}

impl AnalysisConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Checks everything that does not depend on which command runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.models;
        if m.kv_bytes_per_element == 0 {
            return Err(invalid("models.kv_bytes_per_element", "must be >= 1"));
        }
        if m.seq_len == 0 {
            return Err(invalid("models.seq_len", "must be >= 1"));
        }
        for (i, c) in m.custom.iter().enumerate() {
            c.validate().map_err(|e| model_invalid(&format!("models.custom[{i}]"), e))?;
        }

        let ep = &self.ep;
        ep.scenario.validate().map_err(|e| ep_invalid("ep.scenario", e))?;
        ep.links.validate().map_err(|e| ep_invalid("ep.links", e))?;
        for (i, bw) in ep.bandwidths_gb_s.iter().enumerate() {
            if !(*bw > 0.0 && bw.is_finite()) {
                return Err(invalid(format!("ep.bandwidths_gb_s[{i}]"), "must be positive"));
            }
        }
        for (i, p) in ep.mtp_accept_rates.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(invalid(format!("ep.mtp_accept_rates[{i}]"), "must be in [0, 1]"));
            }
        }

        let r = &self.routing;
        r.policy.validate().map_err(|e| ep_invalid("routing.policy", e))?;
        if r.trials == 0 {
            return Err(invalid("routing.trials", "must be >= 1"));
        }
        if let ScoreDistribution::Normal { std_dev } = r.scores {
            if !(std_dev > 0.0 && std_dev.is_finite()) {
                return Err(invalid("routing.scores.std_dev", "must be positive"));
            }
        }

        let t = &self.topo;
        for (i, req) in t.topologies.iter().enumerate() {
            if req.radix < 2 || !req.radix.is_multiple_of(2) {
                return Err(invalid(
                    format!("topo.topologies[{i}].radix"),
                    format!("radix must be even and >= 2, got {}", req.radix),
                ));
            }
            if req.planes == 0 {
                return Err(invalid(format!("topo.topologies[{i}].planes"), "must be >= 1"));
            }
            if req.kind == TopologyKind::Reference {
                return Err(invalid(
                    format!("topo.topologies[{i}].kind"),
                    "reference rows are built in; use include_reference",
                ));
            }
            if req.kind != TopologyKind::Mpft && req.planes != 1 {
                return Err(invalid(format!("topo.topologies[{i}].planes"), "only mpft has planes"));
            }
        }
        t.cost_model.validate().map_err(|e| invalid("topo.cost_model", e))?;
        t.latency.validate().map_err(|e| invalid("topo.latency", e))?;

        let q = &self.quant;
        if q.blocks == 0 {
            return Err(invalid("quant.blocks", "must be >= 1"));
        }
        for (i, c) in q.codecs.iter().enumerate() {
            if let Codec::LogFmt { n_bits, .. } = c {
                if !(2..=16).contains(n_bits) {
                    return Err(invalid(format!("quant.codecs[{i}].n_bits"), "must be in 2..=16"));
                }
            }
        }
        if let Some(g) = q.gemm {
            for (name, v) in [("m", g.m), ("n", g.n), ("k", g.k)] {
                if v == 0 || !v.is_multiple_of(128) {
                    return Err(invalid(format!("quant.gemm.{name}"), "must be a positive multiple of 128"));
                }
            }
        }
        Ok(())
    }
}

/// Looks up model presets, checking the directory named by
/// [`PRESETS_ENV`] before the built-in list.
#[derive(Debug, Clone, Default)]
pub struct PresetResolver {
    pub extra_dir: Option<PathBuf>,
}

impl PresetResolver {
    pub fn from_env() -> Self {
        PresetResolver {
            extra_dir: std::env::var_os(PRESETS_ENV).map(PathBuf::from),
        }
    }

    pub fn resolve(&self, name: &str) -> Result<ModelConfig, CliError> {
        if let Some(dir) = &self.extra_dir {
            let path = dir.join(format!("{name}.toml"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::ConfigParse {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let model: ModelConfig = toml::from_str(&text).map_err(|e| CliError::ConfigParse {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                model.validate().map_err(|e| model_invalid(&format!("preset {name}"), e))?;
                return Ok(model);
            }
        }
        presets::get(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))
    }

    /// The configured presets (or `defaults` when unset) followed by the
    /// custom models.
    pub fn models(&self, section: &ModelsSection, defaults: &[&str]) -> Result<Vec<ModelConfig>, CliError> {
        let names: Vec<String> = match &section.presets {
            Some(list) => list.clone(),
            None => defaults.iter().map(|s| s.to_string()).collect(),
        };
        let mut out = names.iter().map(|n| self.resolve(n)).collect::<Result<Vec<_>, _>>()?;
        out.extend(section.custom.iter().cloned());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = AnalysisConfig::from_toml("", "test").unwrap();
        assert_eq!(c, AnalysisConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn parse_errors() {
        let e = AnalysisConfig::from_toml("seed = \"x\"", "t").unwrap_err();
        assert!(matches!(e, CliError::ConfigParse { .. }));
        let e = AnalysisConfig::from_toml("[nope]\n", "t").unwrap_err();
        assert!(matches!(e, CliError::ConfigParse { .. }));
    }

    #[test]
    fn odd_radix_names_field() {
        let c = AnalysisConfig::from_toml("[[topo.topologies]]\nkind = \"ft2\"\nradix = 63\n", "t").unwrap();
        match c.validate().unwrap_err() {
            CliError::ConfigInvalid { field, reason } => {
                assert_eq!(field, "topo.topologies[0].radix");
                assert!(reason.contains("even"));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn nested_sections() {
        let text = r#"
seed = 7
[ep.scenario]
layers = 10
[routing.policy]
max_groups = 2
[[quant.codecs]]
codec = "log_fmt"
n_bits = 8
stochastic = true
"#;
        let c = AnalysisConfig::from_toml(text, "t").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.ep.scenario.layers, 10);
        assert_eq!(c.ep.scenario.hidden_dim, 7000);
        assert_eq!(c.routing.policy.max_groups, 2);
        assert_eq!(c.quant.codecs, vec![Codec::LogFmt { n_bits: 8, stochastic: true }]);
        c.validate().unwrap();
    }

    #[test]
    fn core_errors_carry_field_path() {
        let c = AnalysisConfig::from_toml("[ep.scenario]\nlayers = 0\n", "t").unwrap();
        match c.validate().unwrap_err() {
            CliError::ConfigInvalid { field, .. } => assert_eq!(field, "ep.scenario.layers"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_preset() {
        let r = PresetResolver::default();
        assert!(matches!(r.resolve("gpt-9"), Err(CliError::UnknownPreset(_))));
        assert_eq!(r.resolve("deepseek-v3").unwrap().name, "deepseek-v3");
    }
}
