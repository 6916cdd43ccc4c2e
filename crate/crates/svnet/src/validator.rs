//! Multiple-hypothesis correction and validated-network construction.
//!
//! The family being tested is the set of pairs with nonzero overlap; pairs
//! that never co-occur have p-value one and are untestable. Bonferroni keeps
//! pairs with p strictly below epsilon/n_tests (the stricter reading of the
//! threshold rule; a non-strict variant exists in the literature but ties at
//! the threshold are not a practical concern with continuous-valued p).
//! The Benjamini-Hochberg alternative keeps everything up to the largest
//! rank k with p_(k) <= k*epsilon/n_tests.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bicm::fit_bicm_default;
use crate::error::{Error, Result};
use crate::graph::{HolderMetaTable, Layer, Snapshot};
use crate::pvalue::{Backend, PValueEngine, PValueResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMethod {
    Bonferroni,
    Fdr,
}

impl fmt::Display for CorrectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrectionMethod::Bonferroni => write!(f, "bonferroni"),
            CorrectionMethod::Fdr => write!(f, "fdr"),
        }
    }
}

impl std::str::FromStr for CorrectionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bonferroni" => Ok(CorrectionMethod::Bonferroni),
            "fdr" => Ok(CorrectionMethod::Fdr),
            other => Err(Error::InvalidConfig(format!(
                "unknown correction method {other:?}"
            ))),
        }
    }
}

/// A fully specified correction: method, family level and family size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionPolicy {
    pub method: CorrectionMethod,
    pub epsilon: f64,
    pub n_tests: usize,
}

impl CorrectionPolicy {
    pub fn new(method: CorrectionMethod, epsilon: f64, n_tests: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        Ok(CorrectionPolicy {
            method,
            epsilon,
            n_tests,
        })
    }

    /// Bonferroni family-wise threshold epsilon / n_tests.
    pub fn bonferroni_threshold(&self) -> f64 {
        self.epsilon / self.n_tests as f64
    }
}

/// Indices of the results that pass the policy, plus the effective p-value
/// cutoff actually applied (data-dependent under FDR).
pub fn select_significant(
    policy: &CorrectionPolicy,
    results: &[PValueResult],
) -> (Vec<usize>, f64) {
    if policy.n_tests == 0 || results.is_empty() {
        return (Vec::new(), 0.0);
    }
    match policy.method {
        CorrectionMethod::Bonferroni => {
            let p_star = policy.bonferroni_threshold();
            (
                results
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| (r.p_value < p_star).then_some(i))
                    .collect(),
                p_star,
            )
        }
        CorrectionMethod::Fdr => {
            let mut order: Vec<usize> = (0..results.len()).collect();
            order.sort_by(|&i, &j| {
                results[i]
                    .p_value
                    .partial_cmp(&results[j].p_value)
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let n = policy.n_tests as f64;
            let mut cutoff = None;
            for (rank0, &idx) in order.iter().enumerate() {
                let rank = (rank0 + 1) as f64;
                if results[idx].p_value <= rank * policy.epsilon / n {
                    cutoff = Some(results[idx].p_value);
                }
            }
            match cutoff {
                None => (Vec::new(), 0.0),
                Some(p_cut) => (
                    results
                        .iter()
                        .enumerate()
                        .filter_map(|(i, r)| (r.p_value <= p_cut).then_some(i))
                        .collect(),
                    p_cut,
                ),
            }
        }
    }
}

/// One validated edge on the projected layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedEdge {
    pub a: usize,
    pub b: usize,
    pub overlap: usize,
    pub p_value: f64,
}

/// Provenance of a validated network, written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub method: CorrectionMethod,
    pub epsilon: f64,
    pub n_tests: usize,
    /// Effective p-value cutoff: epsilon/n_tests under Bonferroni, the
    /// realized rank cutoff under FDR, 0 when nothing was tested or kept.
    pub p_star: f64,
    pub fit_residual: f64,
    pub backend: Backend,
}

/// Monopartite network of significant overlaps on one layer.
#[derive(Debug, Clone)]
pub struct ValidatedNetwork {
    pub date: String,
    pub layer: Layer,
    /// Ids of every node of the projected layer (validated or not).
    pub node_ids: Vec<String>,
    /// Significant edges, sorted by (a, b).
    pub edges: Vec<ValidatedEdge>,
    pub meta: NetworkMeta,
}

impl ValidatedNetwork {
    pub fn empty(date: impl Into<String>, layer: Layer, meta: NetworkMeta) -> Self {
        ValidatedNetwork {
            date: date.into(),
            layer,
            node_ids: Vec::new(),
            edges: Vec::new(),
            meta,
        }
    }

    /// Validated degree per node; nodes without validated edges are absent.
    pub fn validated_degrees(&self) -> HashMap<usize, usize> {
        let mut degrees = HashMap::new();
        for e in &self.edges {
            *degrees.entry(e.a).or_insert(0) += 1;
            *degrees.entry(e.b).or_insert(0) += 1;
        }
        degrees
    }

    /// Indices of nodes with at least one validated edge.
    pub fn validated_nodes(&self) -> HashSet<usize> {
        self.edges.iter().flat_map(|e| [e.a, e.b]).collect()
    }

    /// Canonical (a, b) pairs of the validated edges.
    pub fn edge_set(&self) -> HashSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }
}

/// Validation settings: correction method, family level and p-value backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub method: CorrectionMethod,
    pub epsilon: f64,
    pub backend: Backend,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            method: CorrectionMethod::Bonferroni,
            epsilon: 1e-3,
            backend: Backend::Exact,
        }
    }
}

/// Keep the significant results and assemble the network.
pub fn threshold(
    policy: &CorrectionPolicy,
    results: &[PValueResult],
    date: impl Into<String>,
    layer: Layer,
    node_ids: Vec<String>,
    fit_residual: f64,
    backend: Backend,
) -> ValidatedNetwork {
    let (kept, p_star) = select_significant(policy, results);
    let mut edges: Vec<ValidatedEdge> = kept
        .into_iter()
        .map(|i| {
            let r = &results[i];
            ValidatedEdge {
                a: r.a,
                b: r.b,
                overlap: r.overlap,
                p_value: r.p_value,
            }
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.a, e.b));
    ValidatedNetwork {
        date: date.into(),
        layer,
        node_ids,
        edges,
        meta: NetworkMeta {
            method: policy.method,
            epsilon: policy.epsilon,
            n_tests: policy.n_tests,
            p_star,
            fit_residual,
            backend,
        },
    }
}

/// A validated network together with every tested pair's p-value.
#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub network: ValidatedNetwork,
    /// All tested pairs (nonzero overlap), in canonical pair order.
    pub pvalues: Vec<PValueResult>,
}

/// Full pipeline on one snapshot: degrees, model fit, overlaps, p-values,
/// correction. Output is deterministic given the snapshot and config.
pub fn validate_snapshot(
    snap: &Snapshot,
    layer: Layer,
    config: &ValidationConfig,
) -> Result<ValidatedNetwork> {
    validate_snapshot_full(snap, layer, config).map(|o| o.network)
}

/// As `validate_snapshot`, also returning the tested pairs' p-values.
pub fn validate_snapshot_full(
    snap: &Snapshot,
    layer: Layer,
    config: &ValidationConfig,
) -> Result<ValidationOutcome> {
    if config.backend == Backend::Hypergeometric {
        return Err(Error::InvalidConfig(
            "hypergeometric is a comparison baseline, not a validation backend".into(),
        ));
    }
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0,1), got {}",
            config.epsilon
        )));
    }
    // Asset-layer projections run on the transposed snapshot.
    let work;
    let view = match layer {
        Layer::Holders => snap,
        Layer::Assets => {
            work = snap.transposed();
            &work
        }
    };
    let node_ids = view.holder_ids().to_vec();
    let empty_meta = |fit_residual: f64| NetworkMeta {
        method: config.method,
        epsilon: config.epsilon,
        n_tests: 0,
        p_star: 0.0,
        fit_residual,
        backend: config.backend,
    };
    if view.num_holders() < 2 || view.num_assets() == 0 {
        let mut net = ValidatedNetwork::empty(snap.date(), layer, empty_meta(0.0));
        net.node_ids = node_ids;
        return Ok(ValidationOutcome {
            network: net,
            pvalues: Vec::new(),
        });
    }

    let deg = view.degree_sequence(Layer::Holders);
    let sol = fit_bicm_default(&deg)?;
    let pairs = view.overlaps(Layer::Holders);
    if pairs.is_empty() {
        let mut net = ValidatedNetwork::empty(snap.date(), layer, empty_meta(sol.residual));
        net.node_ids = node_ids;
        return Ok(ValidationOutcome {
            network: net,
            pvalues: Vec::new(),
        });
    }

    let engine = PValueEngine::new(&sol);
    let results = engine.batch(&pairs, config.backend)?;
    let policy = CorrectionPolicy::new(config.method, config.epsilon, pairs.len())?;
    let network = threshold(
        &policy,
        &results,
        snap.date(),
        layer,
        node_ids,
        sol.residual,
        config.backend,
    );
    Ok(ValidationOutcome {
        network,
        pvalues: results,
    })
}

/// Aggregate description of a validated network, with optional per-group
/// breakdowns from metadata labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedStats {
    pub node_count: usize,
    pub validated_node_count: usize,
    /// Validated nodes over all nodes of the layer.
    pub validated_fraction: f64,
    pub edge_count: usize,
    /// Mean validated degree over validated nodes (0 when none).
    pub avg_validated_degree: f64,
    /// Per-label: (nodes, validated nodes, mean validated degree).
    pub per_group: BTreeMap<String, GroupStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupStats {
    pub nodes: usize,
    pub validated_nodes: usize,
    pub avg_validated_degree: f64,
}

/// Label source for breakdowns: holder types or asset categories.
pub enum GroupLabels<'a> {
    HolderTypes(&'a HolderMetaTable),
    AssetCategories(&'a crate::graph::AssetMetaTable),
    None,
}

pub fn validated_stats(net: &ValidatedNetwork, labels: GroupLabels<'_>) -> ValidatedStats {
    let node_count = net.node_ids.len();
    let degrees = net.validated_degrees();
    let validated_node_count = degrees.len();
    let edge_count = net.edges.len();
    let avg_validated_degree = if validated_node_count > 0 {
        2.0 * edge_count as f64 / validated_node_count as f64
    } else {
        0.0
    };

    let label_of = |id: &str| -> Option<String> {
        match &labels {
            GroupLabels::HolderTypes(meta) => Some(meta.kind_or_other(id).to_string()),
            GroupLabels::AssetCategories(meta) => Some(meta.category_or_other(id).to_string()),
            GroupLabels::None => None,
        }
    };

    let mut per_group: BTreeMap<String, GroupStats> = BTreeMap::new();
    if !matches!(labels, GroupLabels::None) {
        let mut degree_sum: HashMap<String, usize> = HashMap::new();
        for (idx, id) in net.node_ids.iter().enumerate() {
            let label = label_of(id).unwrap();
            let entry = per_group.entry(label.clone()).or_default();
            entry.nodes += 1;
            if let Some(&d) = degrees.get(&idx) {
                entry.validated_nodes += 1;
                *degree_sum.entry(label).or_insert(0) += d;
            }
        }
        for (label, stats) in per_group.iter_mut() {
            if stats.validated_nodes > 0 {
                stats.avg_validated_degree =
                    degree_sum[label] as f64 / stats.validated_nodes as f64;
            }
        }
    }

    ValidatedStats {
        node_count,
        validated_node_count,
        validated_fraction: if node_count > 0 {
            validated_node_count as f64 / node_count as f64
        } else {
            0.0
        },
        edge_count,
        avg_validated_degree,
        per_group,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, DegreeLaw, SynthSpec};
    use proptest::prelude::*;

    fn result(a: usize, b: usize, p: f64) -> PValueResult {
        PValueResult {
            a,
            b,
            overlap: 1,
            p_value: p,
            backend: Backend::Exact,
            underflowed: false,
        }
    }

    #[test]
    fn bonferroni_threshold_arithmetic() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, 1e-3, 1_000_000).unwrap();
        assert_eq!(policy.bonferroni_threshold(), 1e-9);
        let results = vec![result(0, 1, 1e-10), result(0, 2, 1e-8)];
        let (kept, p_star) = select_significant(&policy, &results);
        assert_eq!(kept, vec![0]);
        assert_eq!(p_star, 1e-9);
    }

    #[test]
    fn threshold_comparison_is_strict() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, 0.1, 10).unwrap();
        let at_threshold = vec![result(0, 1, 0.01)];
        let (kept, _) = select_significant(&policy, &at_threshold);
        assert!(kept.is_empty(), "p exactly at P* must not validate");
    }

    #[test]
    fn all_ones_give_empty_network() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, 0.5, 3).unwrap();
        let results = vec![result(0, 1, 1.0), result(0, 2, 1.0), result(1, 2, 1.0)];
        let (kept, _) = select_significant(&policy, &results);
        assert!(kept.is_empty());
    }

    #[test]
    fn fdr_keeps_ranked_prefix() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Fdr, 0.05, 3).unwrap();
        let results = vec![result(0, 1, 0.001), result(0, 2, 0.002), result(1, 2, 0.9)];
        let (kept, cutoff) = select_significant(&policy, &results);
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(cutoff, 0.002);
    }

    #[test]
    fn zero_tests_is_empty_not_error() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, 0.5, 0).unwrap();
        let (kept, p_star) = select_significant(&policy, &[]);
        assert!(kept.is_empty());
        assert_eq!(p_star, 0.0);
    }

    #[test]
    fn bonferroni_with_one_test_is_plain_epsilon() {
        let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, 0.05, 1).unwrap();
        let (kept, _) = select_significant(&policy, &[result(0, 1, 0.04)]);
        assert_eq!(kept, vec![0]);
        let (kept, _) = select_significant(&policy, &[result(0, 1, 0.06)]);
        assert!(kept.is_empty());
    }

    #[test]
    fn invalid_epsilon_rejected() {
        assert!(CorrectionPolicy::new(CorrectionMethod::Fdr, 0.0, 5).is_err());
        assert!(CorrectionPolicy::new(CorrectionMethod::Fdr, 1.0, 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fdr_contains_bonferroni_and_epsilon_is_monotone(
            ps in proptest::collection::vec(0.0f64..1.0, 1..40),
            eps in 0.001f64..0.5,
        ) {
            let results: Vec<PValueResult> = ps
                .iter()
                .enumerate()
                .map(|(i, &p)| result(i, i + 100, p))
                .collect();
            let n = results.len();
            let bon = CorrectionPolicy::new(CorrectionMethod::Bonferroni, eps, n).unwrap();
            let fdr = CorrectionPolicy::new(CorrectionMethod::Fdr, eps, n).unwrap();
            let (kept_bon, _) = select_significant(&bon, &results);
            let (kept_fdr, _) = select_significant(&fdr, &results);
            let fdr_set: std::collections::HashSet<_> = kept_fdr.iter().collect();
            for i in &kept_bon {
                prop_assert!(fdr_set.contains(i), "bonferroni edge lost under fdr");
            }
            // Raising epsilon never removes an edge.
            let wider = CorrectionPolicy::new(CorrectionMethod::Bonferroni, (eps * 2.0).min(0.99), n).unwrap();
            let (kept_wider, _) = select_significant(&wider, &results);
            let wider_set: std::collections::HashSet<_> = kept_wider.iter().collect();
            for i in &kept_bon {
                prop_assert!(wider_set.contains(i));
            }
            let fdr_wider = CorrectionPolicy::new(CorrectionMethod::Fdr, (eps * 2.0).min(0.99), n).unwrap();
            let (kept_fdr_wider, _) = select_significant(&fdr_wider, &results);
            let fdr_wider_set: std::collections::HashSet<_> = kept_fdr_wider.iter().collect();
            for i in &kept_fdr {
                prop_assert!(fdr_wider_set.contains(i));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Full pipeline on arbitrary small snapshots, including stars,
        // near-complete blocks and singleton layers: never panics, edges
        // are a subset of the tested pairs, and every kept p-value beats
        // the recorded threshold.
        #[test]
        fn pipeline_is_total_on_small_snapshots(
            pairs in proptest::collection::vec(((0usize..12), (0usize..18)), 1..120),
            epsilon in 0.0001f64..0.9,
        ) {
            let entries: Vec<(String, String, f64)> = pairs
                .iter()
                .map(|&(h, a)| (format!("h{h:02}"), format!("a{a:02}"), 1.0))
                .collect();
            let mut dedup = entries;
            dedup.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
            dedup.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
            let snap = Snapshot::from_entries("fuzz", dedup, false).unwrap();
            let cfg = ValidationConfig {
                epsilon,
                ..ValidationConfig::default()
            };
            for layer in [Layer::Holders, Layer::Assets] {
                let outcome = validate_snapshot_full(&snap, layer, &cfg).unwrap();
                let net = &outcome.network;
                let tested: HashSet<(usize, usize)> =
                    outcome.pvalues.iter().map(|r| (r.a, r.b)).collect();
                prop_assert_eq!(net.meta.n_tests, outcome.pvalues.len());
                for r in &outcome.pvalues {
                    prop_assert!((0.0..=1.0).contains(&r.p_value));
                }
                for e in &net.edges {
                    prop_assert!(tested.contains(&(e.a, e.b)));
                    prop_assert!(e.p_value < net.meta.p_star);
                    prop_assert!(e.a < e.b);
                }
            }
        }
    }

    fn planted_fixture(seed: u64) -> crate::synth::GeneratedFixture {
        let spec = SynthSpec {
            holders: 60,
            assets: 300,
            law: DegreeLaw::PowerLaw {
                exponent: 2.5,
                min_degree: 4,
                max_degree: 15,
            },
            blocks: vec![crate::synth::PlantedBlock {
                holders: 6,
                assets: 30,
                fill: 1.0,
            }],
            seed,
            weighted: false,
            date: "2003Q2".to_string(),
        };
        generate(&spec).unwrap()
    }

    #[test]
    fn planted_block_is_recovered() {
        let fixture = planted_fixture(17);
        let snap = &fixture.snapshot;
        let net = validate_snapshot(snap, Layer::Holders, &ValidationConfig::default()).unwrap();
        let edge_set = net.edge_set();
        let planted: Vec<usize> = fixture.planted[0]
            .holder_ids
            .iter()
            .map(|id| snap.holder_index_of(id).unwrap())
            .collect();
        for (i, &a) in planted.iter().enumerate() {
            for &b in &planted[i + 1..] {
                let key = (a.min(b), a.max(b));
                assert!(edge_set.contains(&key), "planted pair {key:?} missing");
            }
        }
        assert!(net.meta.n_tests > 0);
        assert_eq!(net.meta.p_star, 1e-3 / net.meta.n_tests as f64);
    }

    #[test]
    fn validated_network_is_invariant_under_relabeling() {
        let fixture = planted_fixture(5);
        let snap = &fixture.snapshot;
        let renamed = Snapshot::from_entries(
            snap.date(),
            snap.entries()
                .map(|(h, a, w)| {
                    (
                        format!("zz-{}", snap.holder_ids()[h]),
                        snap.asset_ids()[a].clone(),
                        w,
                    )
                })
                .collect::<Vec<_>>(),
            false,
        )
        .unwrap();
        let cfg = ValidationConfig::default();
        let net = validate_snapshot(snap, Layer::Holders, &cfg).unwrap();
        let net2 = validate_snapshot(&renamed, Layer::Holders, &cfg).unwrap();
        let ids = |n: &ValidatedNetwork, strip: bool| -> Vec<(String, String)> {
            n.edges
                .iter()
                .map(|e| {
                    let name = |idx: usize| {
                        let id = n.node_ids[idx].clone();
                        if strip {
                            id.strip_prefix("zz-").unwrap().to_string()
                        } else {
                            id
                        }
                    };
                    (name(e.a), name(e.b))
                })
                .collect()
        };
        assert_eq!(ids(&net, false), ids(&net2, true));
    }

    #[test]
    fn validated_overlap_exceeds_expectation() {
        let fixture = planted_fixture(13);
        let snap = &fixture.snapshot;
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm_default(&deg).unwrap();
        let net = validate_snapshot(snap, Layer::Holders, &ValidationConfig::default()).unwrap();
        assert!(!net.edges.is_empty());
        for e in &net.edges {
            let expected = sol.expected_overlap(e.a, e.b).unwrap();
            assert!(
                (e.overlap as f64) > expected,
                "validated overlap {} not above null expectation {expected}",
                e.overlap
            );
        }
    }

    #[test]
    fn tiny_layer_yields_empty_network() {
        let snap = Snapshot::from_entries(
            "2000Q1",
            vec![("f1".to_string(), "s1".to_string(), 1.0)],
            false,
        )
        .unwrap();
        let net = validate_snapshot(&snap, Layer::Holders, &ValidationConfig::default()).unwrap();
        assert!(net.edges.is_empty());
        assert_eq!(net.meta.n_tests, 0);
    }

    #[test]
    fn asset_layer_projection_mirrors_holder_layer() {
        // Transpose the planted fixture so the significant structure lives
        // on the asset layer; validating that layer must find exactly the
        // edges the holder-layer run finds on the original.
        let fixture = planted_fixture(23);
        let snap = &fixture.snapshot;
        let flipped = snap.transposed();
        let cfg = ValidationConfig::default();
        let on_holders = validate_snapshot(snap, Layer::Holders, &cfg).unwrap();
        let on_assets = validate_snapshot(&flipped, Layer::Assets, &cfg).unwrap();
        assert_eq!(on_assets.layer, Layer::Assets);
        assert_eq!(on_assets.node_ids, on_holders.node_ids);
        assert_eq!(on_assets.edge_set(), on_holders.edge_set());
        assert!(!on_assets.edges.is_empty());
        assert_eq!(on_assets.meta.n_tests, on_holders.meta.n_tests);
    }

    #[test]
    fn star_network_stats() {
        let meta = NetworkMeta {
            method: CorrectionMethod::Bonferroni,
            epsilon: 1e-3,
            n_tests: 10,
            p_star: 1e-4,
            fit_residual: 0.0,
            backend: Backend::Exact,
        };
        let net = ValidatedNetwork {
            date: "2000Q1".into(),
            layer: Layer::Holders,
            node_ids: (0..8).map(|i| format!("h{i}")).collect(),
            edges: (1..=4)
                .map(|b| ValidatedEdge {
                    a: 0,
                    b,
                    overlap: 3,
                    p_value: 1e-6,
                })
                .collect(),
            meta,
        };
        let stats = validated_stats(&net, GroupLabels::None);
        assert_eq!(stats.validated_node_count, 5);
        assert_eq!(stats.edge_count, 4);
        assert!((stats.avg_validated_degree - 8.0 / 5.0).abs() < 1e-12);
        assert!((stats.validated_fraction - 5.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn empty_network_stats() {
        let meta = NetworkMeta {
            method: CorrectionMethod::Bonferroni,
            epsilon: 1e-3,
            n_tests: 0,
            p_star: 0.0,
            fit_residual: 0.0,
            backend: Backend::Exact,
        };
        let net = ValidatedNetwork::empty("2000Q1", Layer::Holders, meta);
        let stats = validated_stats(&net, GroupLabels::None);
        assert_eq!(stats.validated_fraction, 0.0);
        assert_eq!(stats.avg_validated_degree, 0.0);
    }

    #[test]
    fn per_type_breakdown() {
        let mut holder_meta = HolderMetaTable::new();
        holder_meta.insert("h0", "HF");
        holder_meta.insert("h1", "HF");
        holder_meta.insert("h2", "IA");
        let meta = NetworkMeta {
            method: CorrectionMethod::Bonferroni,
            epsilon: 1e-3,
            n_tests: 3,
            p_star: 1e-4,
            fit_residual: 0.0,
            backend: Backend::Exact,
        };
        let net = ValidatedNetwork {
            date: "2000Q1".into(),
            layer: Layer::Holders,
            node_ids: vec!["h0".into(), "h1".into(), "h2".into(), "h3".into()],
            edges: vec![ValidatedEdge {
                a: 0,
                b: 1,
                overlap: 5,
                p_value: 1e-7,
            }],
            meta,
        };
        let stats = validated_stats(&net, GroupLabels::HolderTypes(&holder_meta));
        assert_eq!(stats.per_group["HF"].nodes, 2);
        assert_eq!(stats.per_group["HF"].validated_nodes, 2);
        assert_eq!(stats.per_group["IA"].validated_nodes, 0);
        assert_eq!(stats.per_group["other"].nodes, 1);
    }
}
