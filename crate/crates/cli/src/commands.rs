//! One function per subcommand. Each turns a validated config into a
//! [`Report`].

use codesign_lab::epmodel::{
    dedup_ib_time, expected_nodes_unrestricted, mtp_speedup, routing_sim, tpot_bound, MStats,
};
use codesign_lab::lowprec::{format_error_stats, seeded_gemm};
use codesign_lab::memcalc::{kv_bytes_per_token, train_flops_per_token};
use codesign_lab::topology::{
    build_ft2, build_ft3, build_mpft, path_latency, published_rows, reference_topologies, topology_cost, CostModel,
    LinkLayer, PathRelation, Topology, TopologyKind,
};
use codesign_lab::GB;

use crate::config::{model_invalid, AnalysisConfig, PresetResolver};
use crate::report::{Cell, Report, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Kv,
    Flops,
    Tpot,
    Route,
    Topo,
    Quant,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kv => "kv",
            Command::Flops => "flops",
            Command::Tpot => "tpot",
            Command::Route => "route",
            Command::Topo => "topo",
            Command::Quant => "quant",
        }
    }
}

const KV_DEFAULT: [&str; 3] = ["deepseek-v3", "qwen2.5-72b", "llama3.1-405b"];
const FLOPS_DEFAULT: [&str; 4] = ["deepseek-v3", "deepseek-v2", "qwen2.5-72b", "llama3.1-405b"];

fn internal(e: impl ToString) -> CliError {
    CliError::Internal(e.to_string())
}

pub fn run(command: Command, config: &AnalysisConfig, presets: &PresetResolver) -> Result<Report, CliError> {
    config.validate()?;
    let tables = match command {
        Command::Kv => cmd_kv(config, presets)?,
        Command::Flops => cmd_flops(config, presets)?,
        Command::Tpot => cmd_tpot(config)?,
        Command::Route => cmd_route(config)?,
        Command::Topo => cmd_topo(config)?,
        Command::Quant => cmd_quant(config)?,
    };
    Ok(Report {
        command: command.name().to_string(),
        seed: config.seed,
        config: serde_json::to_value(config).map_err(internal)?,
        tables,
    })
}

pub fn cmd_kv(config: &AnalysisConfig, presets: &PresetResolver) -> Result<Vec<Table>, CliError> {
    let section = &config.models;
    let bpe = section.kv_bytes_per_element;
    let models = presets.models(section, &KV_DEFAULT)?;
    let mut t = Table::new("kv_cache", &["model", "attention", "kv_bytes", "kv_kb", "multiplier_x"]);
    if models.is_empty() {
        return Ok(vec![t]);
    }
    let baseline = presets.resolve(&section.baseline)?;
    let base = kv_bytes_per_token(&baseline, bpe).map_err(|e| model_invalid("models.baseline", e))?;
    for m in &models {
        let bytes = kv_bytes_per_token(m, bpe).map_err(|e| model_invalid(&format!("models.{}", m.name), e))?;
        let kind = serde_json::to_value(m.attention.kind).map_err(internal)?;
        t.push(vec![
            m.name.clone().into(),
            kind.as_str().unwrap_or_default().to_uppercase().into(),
            bytes.into(),
            (bytes as f64 / 1000.0).into(),
            (bytes as f64 / base as f64).into(),
        ]);
    }
    Ok(vec![t])
}

pub fn cmd_flops(config: &AnalysisConfig, presets: &PresetResolver) -> Result<Vec<Table>, CliError> {
    let section = &config.models;
    let mut t = Table::new(
        "train_flops",
        &[
            "model",
            "seq_len",
            "attention_proj_gflops",
            "attention_core_gflops",
            "dense_ffn_gflops",
            "moe_ffn_gflops",
            "forward_gflops",
            "train_gflops",
        ],
    );
    for m in presets.models(section, &FLOPS_DEFAULT)? {
        let f = train_flops_per_token(&m, section.seq_len).map_err(|e| model_invalid(&format!("models.{}", m.name), e))?;
        t.push(vec![
            m.name.clone().into(),
            section.seq_len.into(),
            (f.attention_proj / 1e9).into(),
            (f.attention_core / 1e9).into(),
            (f.dense_ffn / 1e9).into(),
            (f.moe_ffn / 1e9).into(),
            (f.forward / 1e9).into(),
            f.total_gflops().into(),
        ]);
    }
    Ok(vec![t])
}

pub fn cmd_tpot(config: &AnalysisConfig) -> Result<Vec<Table>, CliError> {
    let ep = &config.ep;
    let mut comm = Table::new(
        "ep_decode",
        &[
            "bandwidth_gb_s",
            "alltoall_us",
            "per_layer_us",
            "tpot_ms",
            "tokens_per_s",
            "tokens_per_s_floor",
        ],
    );
    for &bw in &ep.bandwidths_gb_s {
        let b = tpot_bound(&ep.scenario, bw * GB).map_err(internal)?;
        comm.push(vec![
            bw.into(),
            (b.comm_time_s * 1e6).into(),
            (b.per_layer_s * 1e6).into(),
            (b.tpot_s * 1e3).into(),
            b.tokens_per_s.into(),
            b.tokens_per_s_floor.into(),
        ]);
    }
    let mut mtp = Table::new("mtp", &["accept_rate", "speedup_x"]);
    for &p in &ep.mtp_accept_rates {
        mtp.push(vec![p.into(), mtp_speedup(p).map_err(internal)?.into()]);
    }
    let l = &ep.links;
    let mut links = Table::new(
        "link_bandwidth",
        &["nvlink_effective_gb_s", "nic_effective_gb_s", "nic_peak_gb_s", "disparity_x"],
    );
    links.push(vec![
        (l.nvlink_effective / GB).into(),
        (l.nic_effective / GB).into(),
        (l.nic_peak / GB).into(),
        l.disparity().into(),
    ]);
    Ok(vec![comm, mtp, links])
}

pub fn cmd_route(config: &AnalysisConfig) -> Result<Vec<Table>, CliError> {
    let r = &config.routing;
    let policy = &r.policy;
    let sim = routing_sim(policy, r.trials, config.seed, r.scores).map_err(internal)?;

    let mut summary = Table::new(
        "routing_nodes",
        &[
            "policy",
            "trials",
            "mean_nodes",
            "std_error_nodes",
            "max_nodes",
            "expected_nodes",
            "mean_ib_factor_x",
            "mean_reduction_x",
        ],
    );
    // exact for any i.i.d. continuous score distribution
    let expected = Some(expected_nodes_unrestricted(policy));
    let row = |name: &str, s: &MStats, oracle: Option<f64>| -> Vec<Cell> {
        let max = s.histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
        vec![
            name.into(),
            sim.trials.into(),
            s.mean.into(),
            s.std_error.into(),
            max.into(),
            oracle.into(),
            s.mean_ib_factor.into(),
            s.mean_reduction.into(),
        ]
    };
    summary.push(row("unrestricted", &sim.unrestricted, expected));
    summary.push(row("node_limited", &sim.node_limited, None));

    let mut hist = Table::new("routing_histogram", &["nodes", "unrestricted_trials", "node_limited_trials"]);
    for m in 1..=policy.n_groups {
        hist.push(vec![
            m.into(),
            sim.unrestricted.histogram[m].into(),
            sim.node_limited.histogram[m].into(),
        ]);
    }

    // one token's payload to one node, both legs
    let s = &config.ep.scenario;
    let per_copy = (s.dispatch_bytes + s.combine_bytes) * s.hidden_dim as f64 / s.effective_bandwidth;
    let fanout = policy.top_k as u64;
    let mut dedup = Table::new("ib_dedup", &["nodes", "dedup_ib_us", "naive_ib_us", "reduction_x"]);
    for m in 1..=fanout.min(policy.n_groups as u64) {
        let d = dedup_ib_time(m, per_copy, fanout).map_err(internal)?;
        dedup.push(vec![m.into(), (d.dedup_s * 1e6).into(), (d.naive_s * 1e6).into(), d.reduction.into()]);
    }
    Ok(vec![summary, hist, dedup])
}

fn build(kind: TopologyKind, radix: u64, planes: u64) -> Result<Topology, CliError> {
    match kind {
        TopologyKind::Ft2 => build_ft2(radix),
        TopologyKind::Ft3 => build_ft3(radix),
        TopologyKind::Mpft => build_mpft(radix, planes),
        TopologyKind::Reference => unreachable!("rejected by validation"),
    }
    .map_err(internal)
}

pub fn cmd_topo(config: &AnalysisConfig) -> Result<Vec<Table>, CliError> {
    let section = &config.topo;
    let model = &section.cost_model;
    let mut built = Vec::new();
    for req in &section.topologies {
        built.push((build(req.kind, req.radix, req.planes)?, None));
    }
    if section.include_reference {
        for r in reference_topologies() {
            built.push((r.topology, Some(r.published_cost)));
        }
    }

    let mut topo = Table::new(
        "topologies",
        &[
            "name",
            "kind",
            "radix",
            "planes",
            "endpoints",
            "switches",
            "inter_switch_links",
            "endpoint_links",
            "cost_musd",
            "cost_per_endpoint_kusd",
            "published_cost_musd",
            "worst_case_switch_hops",
        ],
    );
    for (t, published) in &built {
        let c = topology_cost(t, model).map_err(internal)?;
        let kind = serde_json::to_value(t.kind).map_err(internal)?;
        topo.push(vec![
            t.name.clone().into(),
            kind.as_str().unwrap_or_default().into(),
            (t.kind != TopologyKind::Reference).then_some(t.radix).into(),
            t.planes.into(),
            t.endpoints.into(),
            t.switches.into(),
            t.inter_switch_links.into(),
            t.endpoint_links.into(),
            (c.total / 1e6).into(),
            (c.per_endpoint / 1e3).into(),
            published.map(|p| p / 1e6).into(),
            t.worst_case_switch_hops().into(),
        ]);
    }

    let rows = published_rows();
    let row = |name: &str| rows.iter().find(|r| r.topology.name == name).expect("published row");
    let (ft2, ft3) = (row("FT2"), row("FT3"));
    let fit = CostModel::calibrate(
        (ft2.topology.switches, ft2.topology.inter_switch_links, ft2.published_cost),
        (ft3.topology.switches, ft3.topology.inter_switch_links, ft3.published_cost),
    )
    .map_err(internal)?;
    let mut costs = Table::new("cost_model", &["source", "switch_cost_usd", "link_cost_usd"]);
    costs.push(vec!["configured".into(), model.switch_cost.into(), model.link_cost.into()]);
    costs.push(vec!["fit_ft2_ft3".into(), fit.switch_cost.into(), fit.link_cost.into()]);

    let mut lat = Table::new("path_latency", &["topology", "link", "relation", "latency_us"]);
    for (t, _) in built.iter().filter(|(t, _)| t.kind != TopologyKind::Reference) {
        for link in [LinkLayer::Ib, LinkLayer::Roce, LinkLayer::Nvlink] {
            for rel in [PathRelation::SameLeaf, PathRelation::CrossLeaf, PathRelation::CrossPlane] {
                if let Ok(s) = path_latency(t, rel, &section.latency, link) {
                    let link_name = serde_json::to_value(link).map_err(internal)?;
                    let rel_name = serde_json::to_value(rel).map_err(internal)?;
                    lat.push(vec![
                        t.name.clone().into(),
                        link_name.as_str().unwrap_or_default().into(),
                        rel_name.as_str().unwrap_or_default().into(),
                        (s * 1e6).into(),
                    ]);
                }
            }
        }
    }
    Ok(vec![topo, costs, lat])
}

pub fn cmd_quant(config: &AnalysisConfig) -> Result<Vec<Table>, CliError> {
    let q = &config.quant;
    let mut errors = Table::new(
        "codec_error",
        &[
            "codec",
            "blocks",
            "samples",
            "mean_abs_error",
            "mean_rel_error",
            "max_rel_error",
            "bias",
            "bias_std_error",
        ],
    );
    for codec in &q.codecs {
        let s = format_error_stats(&q.distribution, codec, q.blocks, config.seed).map_err(internal)?;
        errors.push(vec![
            s.codec.into(),
            s.blocks.into(),
            s.samples.into(),
            s.mean_abs_error.into(),
            s.mean_rel_error.into(),
            s.max_rel_error.into(),
            s.bias.into(),
            s.bias_std_error.into(),
        ]);
    }
    let mut tables = vec![errors];
    if let Some(g) = q.gemm {
        let r = seeded_gemm(g.m, g.n, g.k, &q.gemm_distribution, config.seed).map_err(internal)?;
        let mut t = Table::new(
            "fp22_gemm",
            &["m", "n", "k", "max_abs_error", "mean_abs_error", "max_bound_ratio"],
        );
        t.push(vec![
            r.m.into(),
            r.n.into(),
            r.k.into(),
            r.max_abs_error.into(),
            r.mean_abs_error.into(),
            r.max_bound_ratio.into(),
        ]);
        tables.push(t);
    }
    Ok(tables)
}
