//! Expert-parallel communication and decode-speed models.
//!
//! The all-to-all cost of one EP step is
//!
//! ```text
//! (dispatch_bytes + combine_bytes) * tokens * fanout * hidden / bandwidth
//! ```
//!
//! Under dual micro-batch overlap with computation fully hidden, each layer
//! costs two such steps, which gives the TPOT lower bound (and hence the
//! tokens/second upper bound). Per-message network latency is not part of
//! this bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::GB;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpError {
    #[error("invalid parameter {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("expected {expected} scores, got {actual}")]
    ScoreLengthMismatch { expected: usize, actual: usize },
}

fn invalid(field: &str, reason: impl Into<String>) -> EpError {
    EpError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpScenario {
    pub tokens_per_device: u64,
    pub hidden_dim: u64,
    /// Bytes per element on the dispatch leg (FP8).
    pub dispatch_bytes: f64,
    /// Bytes per element on the combine leg (BF16).
    pub combine_bytes: f64,
    /// Copies per token: routed top-k plus shared experts.
    pub fanout: u64,
    pub layers: u64,
    /// Bytes per second per device.
    pub effective_bandwidth: f64,
}

impl Default for EpScenario {
    fn default() -> Self {
        EpScenario {
            tokens_per_device: 32,
            hidden_dim: 7000,
            dispatch_bytes: 1.0,
            combine_bytes: 2.0,
            fanout: 9,
            layers: 61,
            effective_bandwidth: 50.0 * GB,
        }
    }
}

impl EpScenario {
    pub fn validate(&self) -> Result<(), EpError> {
        if self.hidden_dim == 0 {
            return Err(invalid("hidden_dim", "must be >= 1"));
        }
        if !(self.dispatch_bytes > 0.0 && self.dispatch_bytes.is_finite()) {
            return Err(invalid("dispatch_bytes", "must be positive"));
        }
        if !(self.combine_bytes > 0.0 && self.combine_bytes.is_finite()) {
            return Err(invalid("combine_bytes", "must be positive"));
        }
        if self.fanout == 0 {
            return Err(invalid("fanout", "must be >= 1"));
        }
        if self.layers == 0 {
            return Err(invalid("layers", "must be >= 1"));
        }
        check_bandwidth("effective_bandwidth", self.effective_bandwidth)
    }
}

fn check_bandwidth(field: &str, bw: f64) -> Result<(), EpError> {
    if bw > 0.0 && bw.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be positive and finite"))
    }
}

/// Link bandwidths behind the node-limited routing argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandwidthModel {
    pub nvlink_effective: f64,
    pub nic_effective: f64,
    pub nic_peak: f64,
}

impl Default for BandwidthModel {
    fn default() -> Self {
        BandwidthModel {
            nvlink_effective: 160.0 * GB,
            nic_effective: 40.0 * GB,
            nic_peak: 50.0 * GB,
        }
    }
}

impl BandwidthModel {
    pub fn validate(&self) -> Result<(), EpError> {
        check_bandwidth("nvlink_effective", self.nvlink_effective)?;
        check_bandwidth("nic_effective", self.nic_effective)?;
        check_bandwidth("nic_peak", self.nic_peak)?;
        if self.nic_effective > self.nic_peak {
            return Err(invalid("nic_effective", "exceeds nic_peak"));
        }
        Ok(())
    }

    /// Scale-up to scale-out effective bandwidth ratio (4 for the defaults).
    pub fn disparity(&self) -> f64 {
        self.nvlink_effective / self.nic_effective
    }
}

/// Seconds for one EP all-to-all step (dispatch plus combine).
pub fn alltoall_time(s: &EpScenario, bandwidth: f64) -> f64 {
    (s.dispatch_bytes + s.combine_bytes) * s.tokens_per_device as f64 * s.fanout as f64 * s.hidden_dim as f64
        / bandwidth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpotBound {
    pub comm_time_s: f64,
    pub per_layer_s: f64,
    pub tpot_s: f64,
    pub tokens_per_s: f64,
    /// `floor(tokens_per_s)`.
    pub tokens_per_s_floor: u64,
}

pub fn tpot_bound(s: &EpScenario, bandwidth: f64) -> Result<TpotBound, EpError> {
    s.validate()?;
    check_bandwidth("bandwidth", bandwidth)?;
    let comm = alltoall_time(s, bandwidth);
    let per_layer = 2.0 * comm;
    let tpot = s.layers as f64 * per_layer;
    let tps = if tpot > 0.0 { 1.0 / tpot } else { f64::INFINITY };
    Ok(TpotBound {
        comm_time_s: comm,
        per_layer_s: per_layer,
        tpot_s: tpot,
        tokens_per_s: tps,
        tokens_per_s_floor: if tps.is_finite() { tps.floor() as u64 } else { u64::MAX },
    })
}

/// Generation-throughput multiplier from one multi-token-prediction draft
/// token accepted with probability `accept_rate`. Draft-module overhead is
/// not modelled.
pub fn mtp_speedup(accept_rate: f64) -> Result<f64, EpError> {
    if !(0.0..=1.0).contains(&accept_rate) {
        return Err(invalid("accept_rate", "must be in [0, 1]"));
    }
    Ok(1.0 + accept_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupCost {
    /// `M * t`.
    pub dedup_s: f64,
    /// `fanout * t`: one IB copy per routed expert.
    pub naive_s: f64,
    /// `fanout / M`.
    pub reduction: f64,
}

/// IB time for a token whose routed experts live on `nodes` distinct nodes,
/// when copies for the same node are sent once and forwarded over NVLink.
pub fn dedup_ib_time(nodes: u64, per_copy_s: f64, fanout: u64) -> Result<DedupCost, EpError> {
    if nodes == 0 {
        return Err(invalid("nodes", "must be >= 1"));
    }
    if nodes > fanout {
        return Err(invalid("nodes", "cannot exceed fanout"));
    }
    if !(per_copy_s > 0.0 && per_copy_s.is_finite()) {
        return Err(invalid("per_copy_s", "must be positive"));
    }
    Ok(DedupCost {
        dedup_s: nodes as f64 * per_copy_s,
        naive_s: fanout as f64 * per_copy_s,
        reduction: fanout as f64 / nodes as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupScore {
    /// Sum of the two largest expert scores in the group.
    SumTop2,
    /// Sum of the `top_k` largest expert scores in the group.
    SumTopK,
    /// Largest expert score in the group.
    Max,
}

/// Grouped top-k routing with at most `max_groups` groups (nodes) per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingPolicy {
    pub n_experts: usize,
    pub n_groups: usize,
    pub experts_per_group: usize,
    pub top_k: usize,
    pub max_groups: usize,
    pub group_score: GroupScore,
}

impl Default for RoutingPolicy {
    fn default() -> Self {
        RoutingPolicy {
            n_experts: 256,
            n_groups: 8,
            experts_per_group: 32,
            top_k: 8,
            max_groups: 4,
            group_score: GroupScore::SumTop2,
        }
    }
}

impl RoutingPolicy {
    pub fn validate(&self) -> Result<(), EpError> {
        if self.n_groups == 0 || self.experts_per_group == 0 {
            return Err(invalid("n_groups", "groups must be non-empty"));
        }
        if self.n_groups * self.experts_per_group != self.n_experts {
            return Err(invalid("n_experts", "must equal n_groups * experts_per_group"));
        }
        if self.max_groups == 0 || self.max_groups > self.n_groups {
            return Err(invalid("max_groups", "must be in 1..=n_groups"));
        }
        if self.top_k == 0 || self.top_k > self.max_groups * self.experts_per_group {
            return Err(invalid("top_k", "must be in 1..=max_groups * experts_per_group"));
        }
        Ok(())
    }

    fn group_of(&self, expert: usize) -> usize {
        expert / self.experts_per_group
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    /// Selected expert ids, best first.
    pub experts: Vec<usize>,
    /// Distinct groups (nodes) among the selected experts.
    pub nodes: usize,
}

/// Indices of the `k` largest values among `candidates`; ties go to the
/// lower index.
fn top_k_of(scores: &[f64], candidates: impl Iterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if idx.len() > k {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

fn check_scores(scores: &[f64], policy: &RoutingPolicy) -> Result<(), EpError> {
    if scores.len() != policy.n_experts {
        return Err(EpError::ScoreLengthMismatch {
            expected: policy.n_experts,
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("scores", "must be finite"));
    }
    Ok(())
}

fn count_nodes(policy: &RoutingPolicy, experts: &[usize]) -> usize {
    let mut seen = vec![false; policy.n_groups];
    experts.iter().map(|&e| policy.group_of(e)).filter(|&g| !std::mem::replace(&mut seen[g], true)).count()
}

/// Plain top-k over all experts.
pub fn unrestricted_route(scores: &[f64], policy: &RoutingPolicy) -> Result<Route, EpError> {
    policy.validate()?;
    check_scores(scores, policy)?;
    let experts = top_k_of(scores, 0..scores.len(), policy.top_k);
    let nodes = count_nodes(policy, &experts);
    Ok(Route { experts, nodes })
}

/// Score every group, keep the best `max_groups`, then take the top-k
/// experts inside the kept groups.
pub fn node_limited_route(scores: &[f64], policy: &RoutingPolicy) -> Result<Route, EpError> {
    policy.validate()?;
    check_scores(scores, policy)?;
    let kept = kept_groups(scores, policy);
    let per = policy.experts_per_group;
    let experts = top_k_of(scores, kept.iter().flat_map(|&g| g * per..(g + 1) * per), policy.top_k);
    let nodes = count_nodes(policy, &experts);
    Ok(Route { experts, nodes })
}

/// Groups surviving the group-level cut, best first.
pub fn kept_groups(scores: &[f64], policy: &RoutingPolicy) -> Vec<usize> {
    let per = policy.experts_per_group;
    let group_scores: Vec<f64> = scores
        .chunks(per)
        .map(|g| {
            let take = match policy.group_score {
                GroupScore::Max => 1,
                GroupScore::SumTop2 => 2,
                GroupScore::SumTopK => policy.top_k,
            };
            top_k_of(g, 0..g.len(), take).iter().map(|&i| g[i]).sum()
        })
        .collect();
    top_k_of(&group_scores, 0..policy.n_groups, policy.max_groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScoreDistribution {
    #[default]
    Uniform,
    Normal { std_dev: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStats {
    /// `histogram[m]` = trials whose experts span `m` nodes.
    pub histogram: Vec<u64>,
    pub mean: f64,
    pub std_error: f64,
    /// Mean of `M / top_k`: IB traffic relative to one copy per expert.
    pub mean_ib_factor: f64,
    /// Mean of `top_k / M`.
    pub mean_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSimReport {
    pub trials: u64,
    pub seed: u64,
    pub unrestricted: MStats,
    pub node_limited: MStats,
}

/// Monte-Carlo distribution of `M` with and without the node limit.
///
/// Trial `i` draws its scores from ChaCha stream `i` of `seed`, so results
/// are identical for any thread count.
pub fn routing_sim(
    policy: &RoutingPolicy,
    trials: u64,
    seed: u64,
    distribution: ScoreDistribution,
) -> Result<RoutingSimReport, EpError> {
    policy.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let normal = match distribution {
        ScoreDistribution::Normal { std_dev } if std_dev > 0.0 && std_dev.is_finite() => {
            Some(Normal::new(0.0, std_dev).expect("checked"))
        }
        ScoreDistribution::Normal { .. } => return Err(invalid("score_distribution.std_dev", "must be positive")),
        ScoreDistribution::Uniform => None,
    };
    let pairs: Vec<(usize, usize)> = (0..trials)
        .into_par_iter()
        .map_init(
            || vec![0.0; policy.n_experts],
            |scores, t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t);
                match normal {
                    Some(n) => scores.iter_mut().for_each(|s| *s = n.sample(&mut rng)),
                    None => scores.iter_mut().for_each(|s| *s = rng.random::<f64>()),
                }
                let free = unrestricted_route(scores, policy).expect("validated").nodes;
                let limited = node_limited_route(scores, policy).expect("validated").nodes;
                (free, limited)
            },
        )
        .collect();
    let summarize = |pick: fn(&(usize, usize)) -> usize| {
        let mut histogram = vec![0u64; policy.n_groups + 1];
        let (mut sum, mut sum_sq, mut reduction) = (0.0, 0.0, 0.0);
        for p in &pairs {
            let m = pick(p);
            histogram[m] += 1;
            sum += m as f64;
            sum_sq += (m * m) as f64;
            reduction += policy.top_k as f64 / m as f64;
        }
        let n = trials as f64;
        let mean = sum / n;
        let var = if trials > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
        MStats {
            histogram,
            mean,
            std_error: (var / n).sqrt(),
            mean_ib_factor: mean / policy.top_k as f64,
            mean_reduction: reduction / n,
        }
    };
    Ok(RoutingSimReport {
        trials,
        seed,
        unrestricted: summarize(|p| p.0),
        node_limited: summarize(|p| p.1),
    })
}

/// Exact `E[M]` for unrestricted top-k on i.i.d. continuous scores:
/// `n_groups * (1 - C(n - per, k) / C(n, k))`.
pub fn expected_nodes_unrestricted(policy: &RoutingPolicy) -> f64 {
    let n = policy.n_experts;
    let miss = n - policy.experts_per_group;
    let p_miss: f64 = (0..policy.top_k)
        .map(|i| if miss >= i { (miss - i) as f64 / (n - i) as f64 } else { 0.0 })
        .product();
    policy.n_groups as f64 * (1.0 - p_miss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_comm_times() {
        let s = EpScenario::default();
        assert!((alltoall_time(&s, 50.0 * GB) * 1e6 - 120.96).abs() < 1e-9);
        assert!((alltoall_time(&s, 900.0 * GB) * 1e6 - 6.72).abs() < 1e-9);
        let zero = EpScenario { tokens_per_device: 0, ..s };
        assert_eq!(alltoall_time(&zero, 50.0 * GB), 0.0);
    }

    #[test]
    fn published_tpot() {
        let s = EpScenario::default();
        let b = tpot_bound(&s, 50.0 * GB).unwrap();
        assert!((b.per_layer_s * 1e6 - 241.92).abs() < 1e-9);
        assert!((b.tpot_s * 1e3 - 14.757).abs() < 1e-3);
        assert_eq!(b.tokens_per_s_floor, 67);
        let fast = tpot_bound(&s, 900.0 * GB).unwrap();
        assert!((fast.tpot_s * 1e3 - 0.82).abs() < 0.005);
        assert!((fast.tokens_per_s - 1200.0).abs() < 25.0);
        let one = tpot_bound(&EpScenario { layers: 1, ..s }, 50.0 * GB).unwrap();
        assert!((one.tpot_s * 1e6 - 241.92).abs() < 1e-9);
        assert!(tpot_bound(&EpScenario { layers: 0, ..EpScenario::default() }, GB).is_err());
        assert!(tpot_bound(&s, 0.0).is_err());
    }

    #[test]
    fn mtp() {
        assert_eq!(mtp_speedup(0.8).unwrap(), 1.8);
        assert_eq!(mtp_speedup(0.9).unwrap(), 1.9);
        assert_eq!(mtp_speedup(0.0).unwrap(), 1.0);
        assert_eq!(mtp_speedup(1.0).unwrap(), 2.0);
        assert!(mtp_speedup(1.1).is_err());
        assert!(mtp_speedup(f64::NAN).is_err());
    }

    #[test]
    fn dedup() {
        let c = dedup_ib_time(8, 1.0, 8).unwrap();
        assert_eq!((c.dedup_s, c.reduction), (8.0, 1.0));
        let c = dedup_ib_time(4, 2.5, 8).unwrap();
        assert_eq!((c.dedup_s, c.naive_s, c.reduction), (10.0, 20.0, 2.0));
        assert_eq!(dedup_ib_time(1, 3.0, 8).unwrap().dedup_s, 3.0);
        assert!(dedup_ib_time(0, 1.0, 8).is_err());
        assert!(dedup_ib_time(9, 1.0, 8).is_err());
        assert!(dedup_ib_time(2, 0.0, 8).is_err());
    }

    #[test]
    fn bandwidth_disparity_is_four() {
        let b = BandwidthModel::default();
        b.validate().unwrap();
        assert_eq!(b.disparity(), 4.0);
        let bad = BandwidthModel { nic_effective: 60.0 * GB, ..b };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn one_group_holds_all_winners() {
        let p = RoutingPolicy::default();
        let mut s = vec![0.0; 256];
        for i in 0..8 {
            s[40 + i] = 1.0 + i as f64;
        }
        let free = unrestricted_route(&s, &p).unwrap();
        let lim = node_limited_route(&s, &p).unwrap();
        assert_eq!(free.nodes, 1);
        assert_eq!(free, lim);
        assert_eq!(lim.experts, vec![47, 46, 45, 44, 43, 42, 41, 40]);
    }

    #[test]
    fn spread_winners_are_limited() {
        let p = RoutingPolicy::default();
        let mut s = vec![0.01; 256];
        for g in 0..8 {
            s[g * 32 + 5] = 10.0 + g as f64;
            s[g * 32 + 6] = 1.0 + g as f64 * 0.1;
        }
        let free = unrestricted_route(&s, &p).unwrap();
        assert_eq!(free.nodes, 8);
        let lim = node_limited_route(&s, &p).unwrap();
        assert!(lim.nodes <= 4);
        // groups 7..4 win on top-2 sums; within them the 8 best experts are
        // the two planted ones per group
        let mut want: Vec<usize> = (4..8).flat_map(|g| [g * 32 + 5, g * 32 + 6]).collect();
        want.sort();
        let mut got = lim.experts.clone();
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn score_length_checked() {
        let p = RoutingPolicy::default();
        assert_eq!(
            node_limited_route(&[0.0; 10], &p).unwrap_err(),
            EpError::ScoreLengthMismatch { expected: 256, actual: 10 }
        );
    }

    #[test]
    fn ties_prefer_lower_index() {
        let p = RoutingPolicy { n_experts: 8, n_groups: 2, experts_per_group: 4, top_k: 2, max_groups: 1, group_score: GroupScore::Max };
        let r = node_limited_route(&[1.0; 8], &p).unwrap();
        assert_eq!(r.experts, vec![0, 1]);
    }

    #[test]
    fn policy_validation() {
        let ok = RoutingPolicy::default();
        assert!(RoutingPolicy { n_experts: 255, ..ok.clone() }.validate().is_err());
        assert!(RoutingPolicy { max_groups: 9, ..ok.clone() }.validate().is_err());
        assert!(RoutingPolicy { top_k: 129, ..ok.clone() }.validate().is_err());
        assert!(RoutingPolicy { top_k: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn combinatorial_mean() {
        let e = expected_nodes_unrestricted(&RoutingPolicy::default());
        assert!((e - 5.294652000382479).abs() < 1e-12, "{e}");
    }

    #[test]
    fn sim_vacuous_limit_matches_unrestricted() {
        let p = RoutingPolicy { max_groups: 8, ..RoutingPolicy::default() };
        let r = routing_sim(&p, 2000, 5, ScoreDistribution::Uniform).unwrap();
        assert_eq!(r.unrestricted, r.node_limited);
        let r2 = routing_sim(&p, 2000, 5, ScoreDistribution::Uniform).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn sim_normal_scores() {
        let p = RoutingPolicy::default();
        let r = routing_sim(&p, 500, 1, ScoreDistribution::Normal { std_dev: 1.0 }).unwrap();
        assert_eq!(r.node_limited.histogram[5..].iter().sum::<u64>(), 0);
        assert!(routing_sim(&p, 10, 1, ScoreDistribution::Normal { std_dev: 0.0 }).is_err());
        assert!(routing_sim(&p, 0, 1, ScoreDistribution::Uniform).is_err());
    }

    proptest! {
        #[test]
        fn comm_time_homogeneous(tokens in 1u64..1000, hidden in 1u64..20000, bw in 1.0f64..1e12) {
            let s = EpScenario { tokens_per_device: tokens, hidden_dim: hidden, ..EpScenario::default() };
            let t = alltoall_time(&s, bw);
            prop_assert!((alltoall_time(&s, 2.0 * bw) - t / 2.0).abs() <= 1e-12 * t);
            let d = EpScenario { dispatch_bytes: 2.0, combine_bytes: 4.0, ..s.clone() };
            prop_assert!((alltoall_time(&d, bw) - 2.0 * t).abs() <= 1e-12 * t);
            let h = EpScenario { hidden_dim: 2 * hidden, ..s };
            prop_assert!((alltoall_time(&h, bw) - 2.0 * t).abs() <= 1e-12 * t);
        }

        #[test]
        fn tpot_linear_in_layers(layers in 1u64..200) {
            let one = tpot_bound(&EpScenario { layers: 1, ..EpScenario::default() }, 50.0 * GB).unwrap();
            let many = tpot_bound(&EpScenario { layers, ..EpScenario::default() }, 50.0 * GB).unwrap();
            prop_assert!((many.tpot_s - layers as f64 * one.tpot_s).abs() <= 1e-12 * many.tpot_s);
        }

        #[test]
        fn mtp_monotone_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (sa, sb) = (mtp_speedup(a).unwrap(), mtp_speedup(b).unwrap());
            prop_assert!((1.0..=2.0).contains(&sa));
            if a < b { prop_assert!(sa < sb); }
        }

        #[test]
        fn route_invariants(scores in proptest::collection::vec(-5.0f64..5.0, 256), c in 0.01f64..100.0) {
            let p = RoutingPolicy::default();
            let r = node_limited_route(&scores, &p).unwrap();
            prop_assert_eq!(r.experts.len(), 8);
            let mut u = r.experts.clone();
            u.sort();
            u.dedup();
            prop_assert_eq!(u.len(), 8);
            prop_assert!(r.nodes <= 4);
            let kept = kept_groups(&scores, &p);
            prop_assert!(r.experts.iter().all(|e| kept.contains(&(e / 32))));
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            let rs = node_limited_route(&scaled, &p).unwrap();
            prop_assert_eq!(rs.nodes, r.nodes);
            let mut a = rs.experts.clone();
            a.sort();
            prop_assert_eq!(a, u);
        }
    }
}
