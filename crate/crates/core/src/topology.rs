//! Fat-tree topologies built from switch radix, a linear cost model and
//! table-driven path latency.
//!
//! `inter_switch_links` counts switch-to-switch cables only; endpoint
//! cables are tracked in `endpoint_links` and never priced. For multi-plane
//! fat trees an endpoint is one NIC attachment point, so a node with eight
//! NICs on eight planes contributes eight endpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("switch radix must be even and >= 2, got {0}")]
    OddRadix(u64),
    #[error("planes must be >= 1")]
    ZeroPlanes,
    #[error("topology has no endpoints")]
    ZeroEndpoints,
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("{relation:?} over {link:?} is not defined for {kind:?}")]
    RelationNotApplicable {
        kind: TopologyKind,
        relation: PathRelation,
        link: LinkLayer,
    },
    #[error("singular calibration system")]
    SingularCalibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Ft2,
    Mpft,
    Ft3,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub kind: TopologyKind,
    pub endpoints: u64,
    pub switches: u64,
    pub inter_switch_links: u64,
    pub endpoint_links: u64,
    pub planes: u64,
    /// 0 for reference rows.
    pub radix: u64,
}

fn check_radix(radix: u64) -> Result<(), TopologyError> {
    if radix < 2 || !radix.is_multiple_of(2) {
        Err(TopologyError::OddRadix(radix))
    } else {
        Ok(())
    }
}

/// Two-layer fat tree: `radix` leaves with `radix/2` endpoints and
/// `radix/2` uplinks each, fully meshed to `radix/2` spines.
pub fn build_ft2(radix: u64) -> Result<Topology, TopologyError> {
    check_radix(radix)?;
    let half = radix / 2;
    Ok(Topology {
        name: format!("FT2(k={radix})"),
        kind: TopologyKind::Ft2,
        endpoints: radix * half,
        switches: radix + half,
        inter_switch_links: radix * half,
        endpoint_links: radix * half,
        planes: 1,
        radix,
    })
}

/// Three-layer k-ary fat tree: `k` pods of `k/2` edge and `k/2`
/// aggregation switches, plus `(k/2)^2` cores.
pub fn build_ft3(radix: u64) -> Result<Topology, TopologyError> {
    check_radix(radix)?;
    let half = radix / 2;
    Ok(Topology {
        name: format!("FT3(k={radix})"),
        kind: TopologyKind::Ft3,
        endpoints: radix * half * half,
        switches: radix * radix + half * half,
        inter_switch_links: 2 * radix * half * half,
        endpoint_links: radix * half * half,
        planes: 1,
        radix,
    })
}

/// `planes` independent two-layer fat trees.
pub fn build_mpft(radix: u64, planes: u64) -> Result<Topology, TopologyError> {
    if planes == 0 {
        return Err(TopologyError::ZeroPlanes);
    }
    let plane = build_ft2(radix)?;
    Ok(Topology {
        name: format!("MPFT(k={radix},p={planes})"),
        kind: TopologyKind::Mpft,
        endpoints: planes * plane.endpoints,
        switches: planes * plane.switches,
        inter_switch_links: planes * plane.inter_switch_links,
        endpoint_links: planes * plane.endpoint_links,
        planes,
        radix,
    })
}

impl Topology {
    /// Inter-switch links on the longest shortest path between endpoints.
    pub fn worst_case_switch_hops(&self) -> Option<u64> {
        match self.kind {
            TopologyKind::Ft2 | TopologyKind::Mpft => Some(2),
            TopologyKind::Ft3 => Some(4),
            TopologyKind::Reference => None,
        }
    }
}

/// A topology row taken as published data, with its published cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub topology: Topology,
    pub published_cost: f64,
    pub published_cost_per_endpoint: f64,
}

fn reference(name: &str, endpoints: u64, switches: u64, links: u64, cost: f64, per_endpoint: f64) -> ReferenceRow {
    ReferenceRow {
        topology: Topology {
            name: name.to_string(),
            kind: TopologyKind::Reference,
            endpoints,
            switches,
            inter_switch_links: links,
            endpoint_links: endpoints,
            planes: 1,
            radix: 0,
        },
        published_cost: cost,
        published_cost_per_endpoint: per_endpoint,
    }
}

/// Published comparison rows: the three fat trees at radix 64 (8 planes for
/// MPFT), Slim Fly and Dragonfly. Costs in dollars.
pub fn published_rows() -> Vec<ReferenceRow> {
    vec![
        reference("FT2", 2_048, 96, 2_048, 9e6, 4.39e3),
        reference("MPFT", 16_384, 768, 16_384, 72e6, 4.39e3),
        reference("FT3", 65_536, 5_120, 131_072, 491e6, 7.5e3),
        reference("SF", 32_928, 1_568, 32_928, 146e6, 4.4e3),
        reference("DF", 261_632, 16_352, 384_272, 1_522e6, 5.8e3),
    ]
}

/// Slim Fly and Dragonfly rows only.
pub fn reference_topologies() -> Vec<ReferenceRow> {
    published_rows().into_iter().filter(|r| matches!(r.topology.name.as_str(), "SF" | "DF")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Dollars per switch.
    pub switch_cost: f64,
    /// Dollars per inter-switch link.
    pub link_cost: f64,
}

impl Default for CostModel {
    /// Fit to the published FT2 and FT3 totals.
    fn default() -> Self {
        CostModel {
            switch_cost: 83_009.0,
            link_cost: 503.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub total: f64,
    pub per_endpoint: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<(), TopologyError> {
        for (name, v) in [("switch_cost", self.switch_cost), ("link_cost", self.link_cost)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TopologyError::InvalidCost(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Solve for switch and link prices that reproduce two known
    /// `(switches, links, total)` rows exactly.
    pub fn calibrate(a: (u64, u64, f64), b: (u64, u64, f64)) -> Result<CostModel, TopologyError> {
        let (s1, l1, c1) = (a.0 as f64, a.1 as f64, a.2);
        let (s2, l2, c2) = (b.0 as f64, b.1 as f64, b.2);
        let det = s1 * l2 - s2 * l1;
        if det == 0.0 {
            return Err(TopologyError::SingularCalibration);
        }
        Ok(CostModel {
            switch_cost: (c1 * l2 - c2 * l1) / det,
            link_cost: (s1 * c2 - s2 * c1) / det,
        })
    }

    pub fn cost(&self, t: &Topology) -> Result<Cost, TopologyError> {
        self.validate()?;
        if t.endpoints == 0 {
            return Err(TopologyError::ZeroEndpoints);
        }
        let total = self.switch_cost * t.switches as f64 + self.link_cost * t.inter_switch_links as f64;
        Ok(Cost {
            total,
            per_endpoint: total / t.endpoints as f64,
        })
    }
}

pub fn topology_cost(t: &Topology, m: &CostModel) -> Result<Cost, TopologyError> {
    m.cost(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkLayer {
    Ib,
    Roce,
    Nvlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRelation {
    SameLeaf,
    CrossLeaf,
    CrossPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLatency {
    pub same_leaf: f64,
    /// `None` where no cross-leaf path exists (NVLink).
    pub cross_leaf: Option<f64>,
}

/// Measured 64-byte end-to-end latencies, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopLatencyTable {
    pub ib: LayerLatency,
    pub roce: LayerLatency,
    pub nvlink: LayerLatency,
}

impl Default for HopLatencyTable {
    fn default() -> Self {
        HopLatencyTable {
            ib: LayerLatency {
                same_leaf: 2.8e-6,
                cross_leaf: Some(3.7e-6),
            },
            roce: LayerLatency {
                same_leaf: 3.6e-6,
                cross_leaf: Some(5.6e-6),
            },
            nvlink: LayerLatency {
                same_leaf: 3.33e-6,
                cross_leaf: None,
            },
        }
    }
}

impl HopLatencyTable {
    pub fn layer(&self, link: LinkLayer) -> &LayerLatency {
        match link {
            LinkLayer::Ib => &self.ib,
            LinkLayer::Roce => &self.roce,
            LinkLayer::Nvlink => &self.nvlink,
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        for (name, l) in [("ib", &self.ib), ("roce", &self.roce), ("nvlink", &self.nvlink)] {
            let bad = !(l.same_leaf > 0.0 && l.same_leaf.is_finite())
                || l.cross_leaf.is_some_and(|c| !(c >= l.same_leaf && c.is_finite()));
            if bad {
                return Err(TopologyError::InvalidCost(format!(
                    "latency table {name}: need 0 < same_leaf <= cross_leaf"
                )));
            }
        }
        Ok(())
    }
}

/// End-to-end latency between two endpoints in the given relation.
///
/// Two-layer trees read the table directly. On a three-layer tree a
/// cross-leaf path is the worst-case cross-pod path: the same-leaf latency
/// plus four inter-switch hops, each priced at half the table's
/// cross-minus-same difference (the two extra hops of a two-layer path).
/// Cross-plane traffic on a multi-plane tree first hops to the NIC of the
/// target plane inside the node (the NVLink entry) and then takes the
/// cross-leaf path in that plane.
pub fn path_latency(
    t: &Topology,
    relation: PathRelation,
    table: &HopLatencyTable,
    link: LinkLayer,
) -> Result<f64, TopologyError> {
    let na = || TopologyError::RelationNotApplicable {
        kind: t.kind,
        relation,
        link,
    };
    let layer = table.layer(link);
    match (t.kind, relation) {
        (TopologyKind::Reference, _) => Err(na()),
        (_, PathRelation::SameLeaf) => Ok(layer.same_leaf),
        (TopologyKind::Ft2 | TopologyKind::Mpft, PathRelation::CrossLeaf) => layer.cross_leaf.ok_or_else(na),
        (TopologyKind::Ft3, PathRelation::CrossLeaf) => {
            let cross = layer.cross_leaf.ok_or_else(na)?;
            let per_hop = (cross - layer.same_leaf) / 2.0;
            Ok(layer.same_leaf + 4.0 * per_hop)
        }
        (TopologyKind::Mpft, PathRelation::CrossPlane) if link != LinkLayer::Nvlink => {
            let cross = layer.cross_leaf.ok_or_else(na)?;
            Ok(table.nvlink.same_leaf + cross)
        }
        _ => Err(na()),
    }
}

/// Explicit switch-level construction used to audit the closed-form counts.
pub mod graph {

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub enum Node {
        Endpoint(usize),
        Switch(usize),
    }

    #[derive(Debug, Clone, Default)]
    pub struct FabricGraph {
        pub endpoints: usize,
        pub switches: usize,
        pub edges: Vec<(Node, Node)>,
        pub radix: usize,
    }

    impl FabricGraph {
        fn switch(&mut self) -> usize {
            self.switches += 1;
            self.switches - 1
        }

        fn endpoint(&mut self) -> usize {
            self.endpoints += 1;
            self.endpoints - 1
        }

        pub fn inter_switch_links(&self) -> usize {
            self.edges.iter().filter(|(a, b)| matches!((a, b), (Node::Switch(_), Node::Switch(_)))).count()
        }

        pub fn endpoint_links(&self) -> usize {
            self.edges.len() - self.inter_switch_links()
        }

        /// Ports in use on every switch.
        pub fn switch_degrees(&self) -> Vec<usize> {
            let mut deg = vec![0; self.switches];
            for (a, b) in &self.edges {
                for n in [a, b] {
                    if let Node::Switch(s) = n {
                        deg[*s] += 1;
                    }
                }
            }
            deg
        }

        /// Switch-to-switch hops on the shortest path between two endpoints.
        pub fn switch_hops(&self, from: usize, to: usize) -> Option<usize> {
            let n = self.endpoints + self.switches;
            let id = |x: &Node| match x {
                Node::Endpoint(e) => *e,
                Node::Switch(s) => self.endpoints + s,
            };
            let mut adj = vec![Vec::new(); n];
            for (a, b) in &self.edges {
                adj[id(a)].push(id(b));
                adj[id(b)].push(id(a));
            }
            let mut dist = vec![usize::MAX; n];
            let mut queue = std::collections::VecDeque::from([from]);
            dist[from] = 0;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    // endpoints are not transit nodes
                    if dist[v] == usize::MAX && (v >= self.endpoints || v == to) {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            // endpoint -> switch ... switch -> endpoint: total links minus the two access links
            (dist[to] != usize::MAX).then(|| dist[to] - 2)
        }
    }

    pub fn ft2(radix: usize) -> FabricGraph {
        let half = radix / 2;
        let mut g = FabricGraph { radix, ..Default::default() };
        let spines: Vec<usize> = (0..half).map(|_| g.switch()).collect();
        for _ in 0..radix {
            let leaf = g.switch();
            for _ in 0..half {
                let e = g.endpoint();
                g.edges.push((Node::Endpoint(e), Node::Switch(leaf)));
            }
            for &s in &spines {
                g.edges.push((Node::Switch(leaf), Node::Switch(s)));
            }
        }
        g
    }

    pub fn ft3(radix: usize) -> FabricGraph {
        let half = radix / 2;
        let mut g = FabricGraph { radix, ..Default::default() };
        // core (i, j) connects to aggregation switch i of every pod
        let cores: Vec<Vec<usize>> = (0..half).map(|_| (0..half).map(|_| g.switch()).collect()).collect();
        for _pod in 0..radix {
            let aggs: Vec<usize> = (0..half).map(|_| g.switch()).collect();
            for (i, &a) in aggs.iter().enumerate() {
                for &c in &cores[i] {
                    g.edges.push((Node::Switch(a), Node::Switch(c)));
                }
            }
            for _ in 0..half {
                let edge = g.switch();
                for _ in 0..half {
                    let e = g.endpoint();
                    g.edges.push((Node::Endpoint(e), Node::Switch(edge)));
                }
                for &a in &aggs {
                    g.edges.push((Node::Switch(edge), Node::Switch(a)));
                }
            }
        }
        g
    }

    /// Disjoint union of `planes` two-layer trees.
    pub fn mpft(radix: usize, planes: usize) -> FabricGraph {
        let mut g = FabricGraph { radix, ..Default::default() };
        for _ in 0..planes {
            let p = ft2(radix);
            let shift = |n: Node| match n {
                Node::Endpoint(e) => Node::Endpoint(e + g.endpoints),
                Node::Switch(s) => Node::Switch(s + g.switches),
            };
            let edges: Vec<_> = p.edges.iter().map(|&(a, b)| (shift(a), shift(b))).collect();
            g.edges.extend(edges);
            g.endpoints += p.endpoints;
            g.switches += p.switches;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(t: &Topology) -> (u64, u64, u64) {
        (t.endpoints, t.switches, t.inter_switch_links)
    }

    #[test]
    fn published_structures() {
        assert_eq!(counts(&build_ft2(64).unwrap()), (2048, 96, 2048));
        assert_eq!(counts(&build_mpft(64, 8).unwrap()), (16384, 768, 16384));
        assert_eq!(counts(&build_ft3(64).unwrap()), (65536, 5120, 131072));
    }

    #[test]
    fn small_instances() {
        assert_eq!(counts(&build_ft2(2).unwrap()), (2, 3, 2));
        assert_eq!(counts(&build_ft3(4).unwrap()), (16, 20, 32));
        assert_eq!(counts(&build_ft3(2).unwrap()), (2, 5, 4));
        assert_eq!(counts(&build_mpft(2, 3).unwrap()), (6, 9, 6));
        assert_eq!(counts(&build_ft2(128).unwrap()), (8192, 192, 8192));
        let one = build_mpft(64, 1).unwrap();
        assert_eq!(counts(&one), counts(&build_ft2(64).unwrap()));
    }

    #[test]
    fn radix_errors() {
        assert_eq!(build_ft2(63).unwrap_err(), TopologyError::OddRadix(63));
        assert_eq!(build_ft3(0).unwrap_err(), TopologyError::OddRadix(0));
        assert_eq!(build_mpft(5, 2).unwrap_err(), TopologyError::OddRadix(5));
        assert_eq!(build_mpft(4, 0).unwrap_err(), TopologyError::ZeroPlanes);
    }

    #[test]
    fn explicit_graphs_match_formulas() {
        for radix in (2..=16).step_by(2) {
            let cases = [
                (graph::ft2(radix), build_ft2(radix as u64).unwrap()),
                (graph::ft3(radix), build_ft3(radix as u64).unwrap()),
                (graph::mpft(radix, 3), build_mpft(radix as u64, 3).unwrap()),
            ];
            for (g, t) in cases {
                assert_eq!(g.endpoints as u64, t.endpoints, "{}", t.name);
                assert_eq!(g.switches as u64, t.switches, "{}", t.name);
                assert_eq!(g.inter_switch_links() as u64, t.inter_switch_links, "{}", t.name);
                assert_eq!(g.endpoint_links() as u64, t.endpoint_links, "{}", t.name);
                let deg = g.switch_degrees();
                assert_eq!(deg.iter().sum::<usize>(), 2 * g.inter_switch_links() + g.endpoint_links());
                assert!(deg.iter().all(|&d| d <= radix), "{}", t.name);
            }
        }
        // radix 128 FT2 is still cheap to build explicitly
        let g = graph::ft2(128);
        assert_eq!((g.endpoints, g.switches, g.inter_switch_links()), (8192, 192, 8192));
    }

    #[test]
    fn worst_case_hops_from_graphs() {
        let g2 = graph::ft2(8);
        let g3 = graph::ft3(8);
        let worst = |g: &graph::FabricGraph| (1..g.endpoints).filter_map(|e| g.switch_hops(0, e)).max().unwrap();
        assert_eq!(worst(&g2) as u64, build_ft2(8).unwrap().worst_case_switch_hops().unwrap());
        assert_eq!(worst(&g3) as u64, build_ft3(8).unwrap().worst_case_switch_hops().unwrap());
        assert_eq!(g2.switch_hops(0, 1), Some(0));
    }

    #[test]
    fn calibration_recovers_defaults() {
        let m = CostModel::calibrate((96, 2048, 9e6), (5120, 131072, 491e6)).unwrap();
        let d = CostModel::default();
        assert!((m.switch_cost - d.switch_cost).abs() / d.switch_cost < 1e-4, "{m:?}");
        assert!((m.link_cost - d.link_cost).abs() / d.link_cost < 1e-3, "{m:?}");
        assert_eq!(CostModel::calibrate((1, 2, 1.0), (2, 4, 2.0)), Err(TopologyError::SingularCalibration));
    }

    #[test]
    fn cost_ordering() {
        let m = CostModel::default();
        let ft2 = m.cost(&build_ft2(64).unwrap()).unwrap();
        let mp = m.cost(&build_mpft(64, 8).unwrap()).unwrap();
        let ft3 = m.cost(&build_ft3(64).unwrap()).unwrap();
        assert!(ft2.per_endpoint < ft3.per_endpoint);
        assert_eq!(ft2.per_endpoint, mp.per_endpoint);
        let mut empty = build_ft2(2).unwrap();
        empty.endpoints = 0;
        assert_eq!(m.cost(&empty).unwrap_err(), TopologyError::ZeroEndpoints);
        assert!(CostModel { switch_cost: -1.0, link_cost: 0.0 }.cost(&build_ft2(2).unwrap()).is_err());
    }

    #[test]
    fn latencies() {
        let tbl = HopLatencyTable::default();
        let ft2 = build_ft2(64).unwrap();
        let mp = build_mpft(64, 8).unwrap();
        let ft3 = build_ft3(64).unwrap();
        let us = |r: Result<f64, TopologyError>| r.unwrap() * 1e6;
        assert!((us(path_latency(&ft2, PathRelation::CrossLeaf, &tbl, LinkLayer::Ib)) - 3.7).abs() < 1e-9);
        assert!((us(path_latency(&ft2, PathRelation::SameLeaf, &tbl, LinkLayer::Roce)) - 3.6).abs() < 1e-9);
        assert!((us(path_latency(&mp, PathRelation::CrossPlane, &tbl, LinkLayer::Ib)) - 7.03).abs() < 1e-9);
        assert!(matches!(
            path_latency(&ft2, PathRelation::CrossPlane, &tbl, LinkLayer::Ib),
            Err(TopologyError::RelationNotApplicable { .. })
        ));
        assert!(path_latency(&ft2, PathRelation::CrossLeaf, &tbl, LinkLayer::Nvlink).is_err());
        let ref_row = &reference_topologies()[0].topology;
        assert!(path_latency(ref_row, PathRelation::SameLeaf, &tbl, LinkLayer::Ib).is_err());
        for link in [LinkLayer::Ib, LinkLayer::Roce] {
            let two = path_latency(&ft2, PathRelation::CrossLeaf, &tbl, link).unwrap();
            let three = path_latency(&ft3, PathRelation::CrossLeaf, &tbl, link).unwrap();
            assert!(two < three);
        }
        assert!((us(path_latency(&ft3, PathRelation::CrossLeaf, &tbl, LinkLayer::Ib)) - 4.6).abs() < 1e-9);
    }

    #[test]
    fn latency_table_validation() {
        let mut t = HopLatencyTable::default();
        t.validate().unwrap();
        t.roce.cross_leaf = Some(1e-6);
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn cost_linear(s in 0.0f64..1e6, l in 0.0f64..1e4, k in 1u64..40, scale in 0.0f64..10.0) {
            let t = build_ft3(2 * k).unwrap();
            let m = CostModel { switch_cost: s, link_cost: l };
            let c = m.cost(&t).unwrap().total;
            let only_s = CostModel { switch_cost: s, link_cost: 0.0 }.cost(&t).unwrap().total;
            let only_l = CostModel { switch_cost: 0.0, link_cost: l }.cost(&t).unwrap().total;
            prop_assert!((c - only_s - only_l).abs() <= 1e-9 * c.max(1.0));
            let scaled = CostModel { switch_cost: s * scale, link_cost: l * scale }.cost(&t).unwrap().total;
            prop_assert!((scaled - scale * c).abs() <= 1e-9 * c.max(1.0) * scale.max(1.0));
        }

        #[test]
        fn mpft_scales_linearly(k in 1u64..64, p in 1u64..16) {
            let one = build_ft2(2 * k).unwrap();
            let many = build_mpft(2 * k, p).unwrap();
            prop_assert_eq!(many.endpoints, p * one.endpoints);
            prop_assert_eq!(many.switches, p * one.switches);
            prop_assert_eq!(many.inter_switch_links, p * one.inter_switch_links);
        }
    }
}
