//! Portfolio- and security-level diagnostics of validated networks: weights
//! and concentrations, per-security validated fractions, distressed-holder
//! enrichment, return regressions, category internal degrees and per-date
//! time-series assembly.
//!
//! All operations are pure over their inputs; per-date analytics can run in
//! parallel across dates.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{AssetMetaTable, HolderMetaTable, Layer, Snapshot};
use crate::numeric::{ols_fit, pearson, OlsFit};
use crate::validator::ValidatedNetwork;

/// Why a holder was excluded from portfolio metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    MissingPrice,
    ZeroValue,
}

/// Per-position weights and concentrations plus per-holder market values.
///
/// `weights` and `concentrations` align with the snapshot's entry order
/// (holder-major); entries of excluded holders are NaN/None.
#[derive(Debug, Clone)]
pub struct PortfolioMetrics {
    pub weights: Vec<f64>,
    pub concentrations: Vec<Option<f64>>,
    /// Market value per holder; None for excluded holders.
    pub market_value: Vec<Option<f64>>,
    /// Sum of included holders' market values.
    pub total_market_value: f64,
    pub excluded: Vec<(usize, Exclusion)>,
    /// Entry offset of each holder's first position, mirroring the
    /// snapshot's holder-major entry order.
    row_offsets: Vec<usize>,
}

/// Portfolio weights w = p*W / sum(p*W), concentrations c = W/outstanding,
/// and market values. Requires a weighted snapshot; holders with any
/// missing-price position or zero total value are excluded and flagged.
#[allow(clippy::needless_range_loop)]
pub fn portfolio_metrics(snap: &Snapshot, meta: &AssetMetaTable) -> Result<PortfolioMetrics> {
    if snap.is_binary_only() {
        return Err(Error::BinaryOnly(snap.date().to_string()));
    }
    let prices: Vec<Option<f64>> = snap.asset_ids().iter().map(|id| meta.price(id)).collect();
    let outstanding: Vec<Option<f64>> = snap
        .asset_ids()
        .iter()
        .map(|id| meta.outstanding(id))
        .collect();

    let nnz = snap.num_links();
    let mut weights = vec![f64::NAN; nnz];
    let mut concentrations = vec![None; nnz];
    let mut market_value = vec![None; snap.num_holders()];
    let mut excluded = Vec::new();
    let mut total = 0.0;
    let mut row_offsets = Vec::with_capacity(snap.num_holders());

    let mut offset = 0usize;
    for holder in 0..snap.num_holders() {
        let assets = snap.assets_of(holder);
        let holder_weights = snap.weights_of(holder);
        let span = offset..offset + assets.len();
        row_offsets.push(offset);
        if assets.iter().any(|&a| prices[a].is_none()) {
            excluded.push((holder, Exclusion::MissingPrice));
            offset += assets.len();
            continue;
        }
        let value: f64 = assets
            .iter()
            .zip(holder_weights)
            .map(|(&a, &w)| prices[a].unwrap() * w)
            .sum();
        if value <= 0.0 {
            excluded.push((holder, Exclusion::ZeroValue));
            offset += assets.len();
            continue;
        }
        market_value[holder] = Some(value);
        total += value;
        for (k, (&a, &w)) in assets.iter().zip(holder_weights).enumerate() {
            weights[span.start + k] = prices[a].unwrap() * w / value;
            concentrations[span.start + k] = outstanding[a].map(|o| w / o);
        }
        offset += assets.len();
    }

    Ok(PortfolioMetrics {
        weights,
        concentrations,
        market_value,
        total_market_value: total,
        excluded,
        row_offsets,
    })
}

impl PortfolioMetrics {
    /// Position weight of (holder, k-th owned asset), by entry offset.
    fn weight_at(&self, holder: usize, position: usize) -> f64 {
        self.weights[self.row_offsets[holder] + position]
    }
}

/// Mean portfolio weight of overlapping vs non-overlapping positions for
/// one validated holder. The mean over all positions is 1/degree by
/// construction; a fully overlapping portfolio has no non-overlapping mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareSplit {
    pub holder: usize,
    pub degree: usize,
    pub overlapping_mean: Option<f64>,
    pub rest_mean: Option<f64>,
    pub inv_degree: f64,
}

/// For each validated holder, split its positions into those shared with at
/// least one validated neighbor and the rest, and average the portfolio
/// weights over each side. Holders outside the validated network or
/// excluded from metrics are skipped.
pub fn overlap_share_split(
    snap: &Snapshot,
    net: &ValidatedNetwork,
    pm: &PortfolioMetrics,
) -> Vec<ShareSplit> {
    let mut neighbors: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &net.edges {
        neighbors.entry(e.a).or_default().push(e.b);
        neighbors.entry(e.b).or_default().push(e.a);
    }
    let mut out = Vec::new();
    let mut holders: Vec<usize> = neighbors.keys().copied().collect();
    holders.sort_unstable();
    for holder in holders {
        if pm.market_value.get(holder).copied().flatten().is_none() {
            continue;
        }
        let own: &[usize] = snap.assets_of(holder);
        let mut shared: HashSet<usize> = HashSet::new();
        for &nb in &neighbors[&holder] {
            let their: HashSet<usize> = snap.assets_of(nb).iter().copied().collect();
            shared.extend(own.iter().filter(|a| their.contains(a)));
        }
        let mut over = Vec::new();
        let mut rest = Vec::new();
        for (k, &a) in own.iter().enumerate() {
            let w = pm.weight_at(holder, k);
            if shared.contains(&a) {
                over.push(w);
            } else {
                rest.push(w);
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        out.push(ShareSplit {
            holder,
            degree: own.len(),
            overlapping_mean: mean(&over),
            rest_mean: mean(&rest),
            inv_degree: 1.0 / own.len() as f64,
        });
    }
    out
}

/// Aggregate of the share split, in both averaging orders. The two differ
/// when holders have different degrees: per-holder first averages within
/// each portfolio and then across holders, pooled averages over every
/// position of every validated holder at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareSplitSummary {
    pub holders: usize,
    pub per_holder_overlapping: Option<f64>,
    pub per_holder_rest: Option<f64>,
    pub pooled_overlapping: Option<f64>,
    pub pooled_rest: Option<f64>,
}

/// Summarize a share split in both averaging orders.
pub fn share_split_summary(
    snap: &Snapshot,
    net: &ValidatedNetwork,
    pm: &PortfolioMetrics,
    splits: &[ShareSplit],
) -> ShareSplitSummary {
    let mean_of = |values: Vec<f64>| {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let per_holder_overlapping =
        mean_of(splits.iter().filter_map(|s| s.overlapping_mean).collect());
    let per_holder_rest = mean_of(splits.iter().filter_map(|s| s.rest_mean).collect());

    // Pooled: every position of every validated holder enters once.
    let mut neighbors: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &net.edges {
        neighbors.entry(e.a).or_default().push(e.b);
        neighbors.entry(e.b).or_default().push(e.a);
    }
    let mut over = Vec::new();
    let mut rest = Vec::new();
    for split in splits {
        let holder = split.holder;
        let own = snap.assets_of(holder);
        let mut shared: HashSet<usize> = HashSet::new();
        for &nb in &neighbors[&holder] {
            let their: HashSet<usize> = snap.assets_of(nb).iter().copied().collect();
            shared.extend(own.iter().filter(|a| their.contains(a)));
        }
        for (k, &a) in own.iter().enumerate() {
            let w = pm.weight_at(holder, k);
            if shared.contains(&a) {
                over.push(w);
            } else {
                rest.push(w);
            }
        }
    }
    ShareSplitSummary {
        holders: splits.len(),
        per_holder_overlapping,
        per_holder_rest,
        pooled_overlapping: mean_of(over),
        pooled_rest: mean_of(rest),
    }
}

/// Per-security validation statistics: which fraction of the holder pairs
/// owning the security is validated, its capitalization and mean per-holder
/// ownership concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityStats {
    pub asset: usize,
    pub degree: usize,
    pub pair_count: usize,
    pub validated_pairs: usize,
    pub validated_fraction: f64,
    pub capitalization: Option<f64>,
    pub mean_concentration: Option<f64>,
}

/// Statistics for every asset held by at least two holders. The validated
/// network must live on the holder layer.
pub fn security_validation_stats(
    snap: &Snapshot,
    net: &ValidatedNetwork,
    meta: Option<&AssetMetaTable>,
) -> Vec<SecurityStats> {
    let edges = net.edge_set();
    let mut out = Vec::new();
    for asset in 0..snap.num_assets() {
        let holders = snap.holders_of(asset);
        let degree = holders.len();
        if degree < 2 {
            continue;
        }
        let pair_count = degree * (degree - 1) / 2;
        let mut validated_pairs = 0usize;
        for i in 0..holders.len() {
            for j in (i + 1)..holders.len() {
                if edges.contains(&(holders[i], holders[j])) {
                    validated_pairs += 1;
                }
            }
        }
        let id = &snap.asset_ids()[asset];
        let capitalization = meta.and_then(|m| {
            let price = m.price(id)?;
            let outstanding = m.outstanding(id)?;
            Some(price * outstanding)
        });
        let mean_concentration = meta.and_then(|m| {
            let outstanding = m.outstanding(id)?;
            let held: f64 = snap.holder_weights_of(asset).iter().sum();
            Some(held / outstanding / degree as f64)
        });
        out.push(SecurityStats {
            asset,
            degree,
            pair_count,
            validated_pairs,
            validated_fraction: validated_pairs as f64 / pair_count as f64,
            capitalization,
            mean_concentration,
        });
    }
    out
}

/// One log-linear regression of validated fraction against a regressor,
/// within one asset-degree bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketRegression {
    pub bucket: &'static str,
    pub regressor: &'static str,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    pub dropped_nonpositive: usize,
}

fn degree_bucket(degree: usize) -> &'static str {
    match degree {
        0..=9 => "2-9",
        10..=99 => "10-99",
        _ => "100+",
    }
}

/// Validated fraction regressed on ln(capitalization) and on
/// ln(concentration), split by asset-degree buckets. Rows with non-positive
/// regressors are dropped and counted.
pub fn security_regressions(stats: &[SecurityStats]) -> Vec<BucketRegression> {
    let mut out = Vec::new();
    let buckets = ["2-9", "10-99", "100+"];
    for bucket in buckets {
        for (regressor, pick) in [("ln_capitalization", 0usize), ("ln_concentration", 1usize)] {
            let mut dropped = 0usize;
            let points: Vec<(f64, f64)> = stats
                .iter()
                .filter(|s| degree_bucket(s.degree) == bucket)
                .filter_map(|s| {
                    let x = if pick == 0 {
                        s.capitalization
                    } else {
                        s.mean_concentration
                    }?;
                    if x <= 0.0 {
                        dropped += 1;
                        return None;
                    }
                    Some((x.ln(), s.validated_fraction))
                })
                .collect();
            if let Some(fit) = ols_fit(&points) {
                out.push(BucketRegression {
                    bucket,
                    regressor,
                    slope: fit.slope,
                    intercept: fit.intercept,
                    points: fit.n,
                    dropped_nonpositive: dropped,
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Distressed institutions
// ---------------------------------------------------------------------------

/// How the distressed set is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistressRanking {
    /// Largest absolute dollar drop in market value (default).
    Dollar,
    /// Most negative portfolio return; noisier, kept for replication.
    Return,
}

impl std::str::FromStr for DistressRanking {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dollar" => Ok(DistressRanking::Dollar),
            "return" => Ok(DistressRanking::Return),
            other => Err(Error::InvalidConfig(format!(
                "unknown distress ranking {other:?}"
            ))),
        }
    }
}

/// Enrichment of a distressed holder set inside a validated network.
#[derive(Debug, Clone)]
pub struct DistressReport {
    pub n_requested: usize,
    pub n_effective: usize,
    pub distressed: Vec<String>,
    /// Fraction of all holders that are distressed.
    pub l: f64,
    /// Fraction of validated holders that are distressed.
    pub l_v: f64,
    /// l_v / l; over-representation of distressed holders among validated.
    pub g_i: Option<f64>,
    /// P(both ends distressed | validated edge) over the same probability
    /// among all positive-overlap pairs.
    pub r_i: Option<f64>,
    pub market_return: Option<f64>,
}

/// The n holders with the largest portfolio-value drop between two dates,
/// among holders priced at both. Ties break on id for determinism; n is
/// capped at the eligible population.
pub fn distressed_set(
    prev: &Snapshot,
    curr: &Snapshot,
    meta_prev: &AssetMetaTable,
    meta_curr: &AssetMetaTable,
    n: usize,
    ranking: DistressRanking,
) -> Result<Vec<String>> {
    let pm_prev = portfolio_metrics(prev, meta_prev)?;
    let pm_curr = portfolio_metrics(curr, meta_curr)?;
    let mut scored: Vec<(f64, &str)> = Vec::new();
    for (h, id) in prev.holder_ids().iter().enumerate() {
        let Some(mv_prev) = pm_prev.market_value[h] else {
            continue;
        };
        let Some(curr_idx) = curr.holder_index_of(id) else {
            continue;
        };
        let Some(mv_curr) = pm_curr.market_value[curr_idx] else {
            continue;
        };
        let score = match ranking {
            DistressRanking::Dollar => mv_prev - mv_curr,
            DistressRanking::Return => -(mv_curr / mv_prev - 1.0),
        };
        scored.push((score, id));
    }
    if scored.is_empty() {
        return Err(Error::Analytics("no holder is priced at both dates".into()));
    }
    if n > scored.len() {
        eprintln!(
            "warning: distress size {n} capped at eligible population {}",
            scored.len()
        );
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    Ok(scored
        .into_iter()
        .take(n)
        .map(|(_, id)| id.to_string())
        .collect())
}

/// Enrichment ratios of an arbitrary distressed set against a validated
/// network built on `snap`: returns (l, l_v, G_I, R_I).
pub fn distress_enrichment(
    snap: &Snapshot,
    net: &ValidatedNetwork,
    distressed: &HashSet<String>,
) -> (f64, f64, Option<f64>, Option<f64>) {
    let total = snap.num_holders();
    let flags: Vec<bool> = snap
        .holder_ids()
        .iter()
        .map(|id| distressed.contains(id))
        .collect();
    let n_distressed = flags.iter().filter(|&&f| f).count();
    let l = n_distressed as f64 / total as f64;

    let validated = net.validated_nodes();
    let distressed_validated = validated.iter().filter(|&&h| flags[h]).count();
    let l_v = if validated.is_empty() {
        0.0
    } else {
        distressed_validated as f64 / validated.len() as f64
    };
    let g_i = (l > 0.0 && !validated.is_empty()).then(|| l_v / l);

    let both = |a: usize, b: usize| flags[a] && flags[b];
    let validated_both = net.edges.iter().filter(|e| both(e.a, e.b)).count();
    let overlap_pairs = snap.overlaps(Layer::Holders);
    let overlap_both = overlap_pairs.iter().filter(|r| both(r.a, r.b)).count();
    let r_i = if net.edges.is_empty() || overlap_pairs.is_empty() || overlap_both == 0 {
        None
    } else {
        let p_validated = validated_both as f64 / net.edges.len() as f64;
        let p_any = overlap_both as f64 / overlap_pairs.len() as f64;
        Some(p_validated / p_any)
    };
    (l, l_v, g_i, r_i)
}

/// Full distress analysis between two consecutive snapshots, against the
/// validated network built at the earlier date.
#[allow(clippy::too_many_arguments)]
pub fn distress_report(
    prev: &Snapshot,
    curr: &Snapshot,
    meta_prev: &AssetMetaTable,
    meta_curr: &AssetMetaTable,
    net: &ValidatedNetwork,
    n: usize,
    ranking: DistressRanking,
    market_return: Option<f64>,
) -> Result<DistressReport> {
    let ids = distressed_set(prev, curr, meta_prev, meta_curr, n, ranking)?;
    let set: HashSet<String> = ids.iter().cloned().collect();
    let (l, l_v, g_i, r_i) = distress_enrichment(prev, net, &set);
    Ok(DistressReport {
        n_requested: n,
        n_effective: ids.len(),
        distressed: ids,
        l,
        l_v,
        g_i,
        r_i,
        market_return,
    })
}

// ---------------------------------------------------------------------------
// Returns regression
// ---------------------------------------------------------------------------

/// Regression of mean validated-set returns on mean complement returns over
/// dates, with the positive/negative split and the slope-versus-cutoff curve.
#[derive(Debug, Clone)]
pub struct ReturnsRegression {
    pub r_max: f64,
    /// One point per transition: (date label, mean return outside, mean
    /// return inside the validated network).
    pub points: Vec<(String, f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub slope_positive: Option<OlsFit>,
    pub slope_negative: Option<OlsFit>,
    /// Fraction of computable returns with |r| < r_max.
    pub included_fraction: f64,
    /// (r_max, slope, included fraction) over a grid of cutoffs.
    pub slope_curve: Vec<(f64, f64, f64)>,
}

struct ReturnObs {
    r: f64,
    validated: bool,
}

fn transition_returns(
    prev: &Snapshot,
    curr: &Snapshot,
    meta_prev: &AssetMetaTable,
    meta_curr: &AssetMetaTable,
    net: &ValidatedNetwork,
) -> Result<Vec<ReturnObs>> {
    let pm_prev = portfolio_metrics(prev, meta_prev)?;
    let pm_curr = portfolio_metrics(curr, meta_curr)?;
    let validated = net.validated_nodes();
    let mut out = Vec::new();
    for (h, id) in prev.holder_ids().iter().enumerate() {
        let Some(mv_prev) = pm_prev.market_value[h] else {
            continue;
        };
        let Some(curr_idx) = curr.holder_index_of(id) else {
            continue;
        };
        let Some(mv_curr) = pm_curr.market_value[curr_idx] else {
            continue;
        };
        out.push(ReturnObs {
            r: mv_curr / mv_prev - 1.0,
            validated: validated.contains(&h),
        });
    }
    Ok(out)
}

fn slope_at_cutoff(
    per_transition: &[(String, Vec<ReturnObs>)],
    r_max: f64,
) -> (Vec<(String, f64, f64)>, Option<OlsFit>, f64) {
    let mut points = Vec::new();
    let mut included = 0usize;
    let mut totaled = 0usize;
    for (date, obs) in per_transition {
        totaled += obs.len();
        let keep: Vec<&ReturnObs> = obs.iter().filter(|o| o.r.abs() < r_max).collect();
        included += keep.len();
        let inside: Vec<f64> = keep.iter().filter(|o| o.validated).map(|o| o.r).collect();
        let outside: Vec<f64> = keep.iter().filter(|o| !o.validated).map(|o| o.r).collect();
        if inside.is_empty() || outside.is_empty() {
            continue;
        }
        points.push((
            date.clone(),
            outside.iter().sum::<f64>() / outside.len() as f64,
            inside.iter().sum::<f64>() / inside.len() as f64,
        ));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.1, p.2)).collect();
    let fit = ols_fit(&xy);
    let frac = if totaled > 0 {
        included as f64 / totaled as f64
    } else {
        0.0
    };
    (points, fit, frac)
}

/// Regress mean validated returns on mean complement returns, one point per
/// transition, keeping only |r| < r_max. Needs at least two usable points.
pub fn returns_regression(
    snaps: &[Snapshot],
    metas: &[AssetMetaTable],
    nets: &[ValidatedNetwork],
    r_max: f64,
) -> Result<ReturnsRegression> {
    if snaps.len() < 2 || metas.len() != snaps.len() || nets.len() + 1 < snaps.len() {
        return Err(Error::Analytics(
            "returns regression needs aligned snapshots, metadata and networks".into(),
        ));
    }
    let mut per_transition: Vec<(String, Vec<ReturnObs>)> = Vec::new();
    for t in 0..snaps.len() - 1 {
        let obs = transition_returns(&snaps[t], &snaps[t + 1], &metas[t], &metas[t + 1], &nets[t])?;
        per_transition.push((snaps[t].date().to_string(), obs));
    }

    let (points, fit, included_fraction) = slope_at_cutoff(&per_transition, r_max);
    let fit = fit.ok_or_else(|| {
        Error::Analytics("fewer than 2 usable dates for the returns regression".into())
    })?;

    // Positive and negative returns treated separately.
    let split = |sign: f64| -> Option<OlsFit> {
        let mut pts = Vec::new();
        for (_, obs) in &per_transition {
            let keep: Vec<&ReturnObs> = obs
                .iter()
                .filter(|o| o.r.abs() < r_max && o.r * sign > 0.0)
                .collect();
            let inside: Vec<f64> = keep.iter().filter(|o| o.validated).map(|o| o.r).collect();
            let outside: Vec<f64> = keep.iter().filter(|o| !o.validated).map(|o| o.r).collect();
            if !inside.is_empty() && !outside.is_empty() {
                pts.push((
                    outside.iter().sum::<f64>() / outside.len() as f64,
                    inside.iter().sum::<f64>() / inside.len() as f64,
                ));
            }
        }
        ols_fit(&pts)
    };

    let slope_curve: Vec<(f64, f64, f64)> = (1..=20)
        .filter_map(|k| {
            let cutoff = 0.05 * k as f64;
            let (_, fit, frac) = slope_at_cutoff(&per_transition, cutoff);
            fit.map(|f| (cutoff, f.slope, frac))
        })
        .collect();

    Ok(ReturnsRegression {
        r_max,
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        slope_positive: split(1.0),
        slope_negative: split(-1.0),
        included_fraction,
        slope_curve,
    })
}

// ---------------------------------------------------------------------------
// Category internal degrees (asset layer)
// ---------------------------------------------------------------------------

/// Validated-network statistics of one asset category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryInternalStats {
    pub category: String,
    pub nodes: usize,
    pub validated_nodes: usize,
    pub validated_fraction: f64,
    /// Validated links with both endpoints in this category.
    pub internal_links: usize,
    /// Mean internal degree over the category's validated nodes.
    pub mean_internal_degree: f64,
}

/// Per-category internal connectivity of an asset-layer validated network.
/// Assets without a category label are bucketed as "other".
pub fn internal_degree(
    net: &ValidatedNetwork,
    meta: &AssetMetaTable,
) -> Result<Vec<CategoryInternalStats>> {
    if net.layer != Layer::Assets {
        return Err(Error::Analytics(
            "internal degrees need an asset-layer validated network".into(),
        ));
    }
    let labels: Vec<String> = net
        .node_ids
        .iter()
        .map(|id| meta.category_or_other(id).to_string())
        .collect();
    let mut by_cat: BTreeMap<String, CategoryInternalStats> = BTreeMap::new();
    for (idx, label) in labels.iter().enumerate() {
        let entry = by_cat
            .entry(label.clone())
            .or_insert_with(|| CategoryInternalStats {
                category: label.clone(),
                nodes: 0,
                validated_nodes: 0,
                validated_fraction: 0.0,
                internal_links: 0,
                mean_internal_degree: 0.0,
            });
        entry.nodes += 1;
        let _ = idx;
    }
    let validated = net.validated_nodes();
    for &node in &validated {
        by_cat.get_mut(&labels[node]).unwrap().validated_nodes += 1;
    }
    let mut internal_degree_sum: BTreeMap<String, usize> = BTreeMap::new();
    for e in &net.edges {
        if labels[e.a] == labels[e.b] {
            let entry = by_cat.get_mut(&labels[e.a]).unwrap();
            entry.internal_links += 1;
            *internal_degree_sum.entry(labels[e.a].clone()).or_insert(0) += 2;
        }
    }
    let mut out: Vec<CategoryInternalStats> = by_cat.into_values().collect();
    for stats in &mut out {
        stats.validated_fraction = if stats.nodes > 0 {
            stats.validated_nodes as f64 / stats.nodes as f64
        } else {
            0.0
        };
        if stats.validated_nodes > 0 {
            stats.mean_internal_degree = internal_degree_sum
                .get(&stats.category)
                .copied()
                .unwrap_or(0) as f64
                / stats.validated_nodes as f64;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

/// One per-date row of aggregate network and validation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub date: String,
    pub holders: usize,
    pub assets: usize,
    pub links: usize,
    pub market_value: Option<f64>,
    pub validated_fraction: f64,
    pub avg_validated_degree: f64,
    pub edge_count: usize,
    /// Validated holder count per type label (when holder metadata given).
    pub per_type: BTreeMap<String, usize>,
}

/// Assemble one row per date. `metas` and `holder_meta` are optional;
/// missing metadata simply leaves the corresponding columns empty.
pub fn timeseries(
    snaps: &[Snapshot],
    nets: &[ValidatedNetwork],
    metas: Option<&[AssetMetaTable]>,
    holder_meta: Option<&HolderMetaTable>,
) -> Result<Vec<TimeseriesRow>> {
    if snaps.len() != nets.len() {
        return Err(Error::Analytics(
            "timeseries needs one validated network per snapshot".into(),
        ));
    }
    let mut rows = Vec::with_capacity(snaps.len());
    for (t, (snap, net)) in snaps.iter().zip(nets).enumerate() {
        let market_value = match metas {
            Some(tables) => portfolio_metrics(snap, &tables[t])
                .ok()
                .map(|pm| pm.total_market_value),
            None => None,
        };
        let stats = crate::validator::validated_stats(
            net,
            match holder_meta {
                Some(meta) if net.layer == Layer::Holders => {
                    crate::validator::GroupLabels::HolderTypes(meta)
                }
                _ => crate::validator::GroupLabels::None,
            },
        );
        let per_type = stats
            .per_group
            .iter()
            .map(|(label, g)| (label.clone(), g.validated_nodes))
            .collect();
        rows.push(TimeseriesRow {
            date: snap.date().to_string(),
            holders: snap.num_holders(),
            assets: snap.num_assets(),
            links: snap.num_links(),
            market_value,
            validated_fraction: stats.validated_fraction,
            avg_validated_degree: stats.avg_validated_degree,
            edge_count: stats.edge_count,
            per_type,
        });
    }
    Ok(rows)
}

/// Pearson correlation between `xs[t]` and `ys[t + lag]` for lags in
/// [-max_lag, max_lag]; None where a window is too short or constant.
pub fn cross_correlation(xs: &[f64], ys: &[f64], max_lag: usize) -> Vec<(i64, Option<f64>)> {
    let n = xs.len().min(ys.len());
    let mut out = Vec::new();
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        let corr = if lag >= 0 {
            let l = lag as usize;
            if l >= n {
                None
            } else {
                pearson(&xs[..n - l], &ys[l..n])
            }
        } else {
            let l = (-lag) as usize;
            if l >= n {
                None
            } else {
                pearson(&xs[l..n], &ys[..n - l])
            }
        };
        out.push((lag, corr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AssetMeta;
    use crate::pvalue::Backend;
    use crate::validator::{CorrectionMethod, NetworkMeta, ValidatedEdge};

    fn meta_with(prices: &[(&str, f64, f64)]) -> AssetMetaTable {
        let mut meta = AssetMetaTable::new();
        for (id, price, outstanding) in prices {
            meta.insert(
                id.to_string(),
                AssetMeta {
                    price: Some(*price),
                    outstanding: Some(*outstanding),
                    category: None,
                },
            );
        }
        meta
    }

    fn weighted_snap(entries: &[(&str, &str, f64)], date: &str) -> Snapshot {
        Snapshot::from_entries(
            date,
            entries
                .iter()
                .map(|(h, a, w)| (h.to_string(), a.to_string(), *w))
                .collect::<Vec<_>>(),
            false,
        )
        .unwrap()
    }

    fn stub_net(
        node_ids: Vec<String>,
        edges: Vec<(usize, usize)>,
        layer: Layer,
    ) -> ValidatedNetwork {
        ValidatedNetwork {
            date: "2000Q1".into(),
            layer,
            node_ids,
            edges: edges
                .into_iter()
                .map(|(a, b)| ValidatedEdge {
                    a,
                    b,
                    overlap: 1,
                    p_value: 1e-9,
                })
                .collect(),
            meta: NetworkMeta {
                method: CorrectionMethod::Bonferroni,
                epsilon: 1e-3,
                n_tests: 1,
                p_star: 1e-3,
                fit_residual: 0.0,
                backend: Backend::Exact,
            },
        }
    }

    #[test]
    fn single_asset_portfolio_has_weight_one() {
        let snap = weighted_snap(&[("f1", "s1", 100.0)], "2000Q1");
        let meta = meta_with(&[("s1", 10.0, 1000.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        assert_eq!(pm.weights, vec![1.0]);
        assert_eq!(pm.market_value[0], Some(1000.0));
    }

    #[test]
    fn equal_dollar_positions_split_evenly() {
        // 100 shares at 10 and 50 shares at 20: equal dollar value.
        let snap = weighted_snap(&[("f1", "s1", 100.0), ("f1", "s2", 50.0)], "2000Q1");
        let meta = meta_with(&[("s1", 10.0, 1000.0), ("s2", 20.0, 1000.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        assert!((pm.weights[0] - 0.5).abs() < 1e-15);
        assert!((pm.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_ownership_means_concentration_one() {
        let snap = weighted_snap(&[("f1", "s1", 500.0)], "2000Q1");
        let meta = meta_with(&[("s1", 2.0, 500.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        assert_eq!(pm.concentrations[0], Some(1.0));
    }

    #[test]
    fn weights_sum_to_one_per_included_holder() {
        let snap = weighted_snap(
            &[
                ("f1", "s1", 3.0),
                ("f1", "s2", 11.0),
                ("f1", "s3", 7.0),
                ("f2", "s2", 5.0),
            ],
            "2000Q1",
        );
        let meta = meta_with(&[("s1", 3.5, 100.0), ("s2", 1.25, 100.0), ("s3", 80.0, 100.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        let w_sum: f64 = pm.weights[0..3].iter().sum();
        assert!((w_sum - 1.0).abs() <= 1e-12);
        assert!((pm.weights[3] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn missing_price_excludes_holder() {
        let snap = weighted_snap(&[("f1", "s1", 1.0), ("f2", "s2", 1.0)], "2000Q1");
        let meta = meta_with(&[("s1", 10.0, 100.0)]); // s2 unpriced
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        assert_eq!(pm.market_value[1], None);
        assert_eq!(pm.excluded, vec![(1, Exclusion::MissingPrice)]);
        assert!(pm.weights[1].is_nan());
    }

    #[test]
    fn zero_value_excludes_holder() {
        let snap = weighted_snap(&[("f1", "s1", 1.0)], "2000Q1");
        let meta = meta_with(&[("s1", 0.0, 100.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        assert_eq!(pm.excluded, vec![(0, Exclusion::ZeroValue)]);
    }

    #[test]
    fn binary_snapshot_refuses_weighted_analytics() {
        let snap = Snapshot::from_entries(
            "2000Q1",
            vec![("f1".to_string(), "s1".to_string(), 1.0)],
            true,
        )
        .unwrap();
        assert!(matches!(
            portfolio_metrics(&snap, &AssetMetaTable::new()),
            Err(Error::BinaryOnly(_))
        ));
    }

    #[test]
    fn share_split_uniform_weights() {
        // f1 and f2 validated neighbors share s1; uniform dollar weights.
        let snap = weighted_snap(
            &[
                ("f1", "s1", 1.0),
                ("f1", "s2", 1.0),
                ("f2", "s1", 1.0),
                ("f2", "s3", 1.0),
            ],
            "2000Q1",
        );
        let meta = meta_with(&[("s1", 1.0, 10.0), ("s2", 1.0, 10.0), ("s3", 1.0, 10.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let splits = overlap_share_split(&snap, &net, &pm);
        assert_eq!(splits.len(), 2);
        for s in &splits {
            assert!((s.overlapping_mean.unwrap() - 0.5).abs() < 1e-15);
            assert!((s.rest_mean.unwrap() - 0.5).abs() < 1e-15);
            assert!((s.inv_degree - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn split_summary_averaging_orders_differ_across_degrees() {
        // f1: two positions, one shared (w = 0.5 each). f2: four
        // positions, one shared (w = 0.25 each). Per-holder overlapping
        // mean = (0.5 + 0.25)/2 = 0.375; pooled = (0.5 + 0.25)/2 over the
        // two shared positions = 0.375 too, but the rest means split:
        // per-holder (0.5 + 0.25)/2 = 0.375 vs pooled (0.5 + 3*0.25)/4.
        let snap = weighted_snap(
            &[
                ("f1", "s1", 1.0),
                ("f1", "s2", 1.0),
                ("f2", "s1", 1.0),
                ("f2", "s3", 1.0),
                ("f2", "s4", 1.0),
                ("f2", "s5", 1.0),
            ],
            "2000Q1",
        );
        let meta = meta_with(&[
            ("s1", 1.0, 10.0),
            ("s2", 1.0, 10.0),
            ("s3", 1.0, 10.0),
            ("s4", 1.0, 10.0),
            ("s5", 1.0, 10.0),
        ]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let splits = overlap_share_split(&snap, &net, &pm);
        let agg = share_split_summary(&snap, &net, &pm, &splits);
        assert_eq!(agg.holders, 2);
        assert!((agg.per_holder_overlapping.unwrap() - 0.375).abs() < 1e-12);
        assert!((agg.pooled_overlapping.unwrap() - 0.375).abs() < 1e-12);
        assert!((agg.per_holder_rest.unwrap() - 0.375).abs() < 1e-12);
        assert!((agg.pooled_rest.unwrap() - (0.5 + 0.75) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn share_split_full_overlap_flags_missing_rest() {
        let snap = weighted_snap(&[("f1", "s1", 1.0), ("f2", "s1", 1.0)], "2000Q1");
        let meta = meta_with(&[("s1", 1.0, 10.0)]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let splits = overlap_share_split(&snap, &net, &pm);
        assert_eq!(splits[0].overlapping_mean, Some(1.0));
        assert_eq!(splits[0].rest_mean, None);
    }

    #[test]
    fn security_stats_fraction_bounds() {
        // s1 held by f1,f2 (validated pair) -> f_s = 1; s2 by f1,f3 -> 0.
        let snap = weighted_snap(
            &[
                ("f1", "s1", 1.0),
                ("f2", "s1", 1.0),
                ("f1", "s2", 1.0),
                ("f3", "s2", 1.0),
                ("f3", "s3", 1.0),
            ],
            "2000Q1",
        );
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let stats = security_validation_stats(&snap, &net, None);
        assert_eq!(stats.len(), 2); // s3 has degree 1
        let s1 = stats.iter().find(|s| s.asset == 0).unwrap();
        assert_eq!(s1.validated_fraction, 1.0);
        let s2 = stats.iter().find(|s| s.asset == 1).unwrap();
        assert_eq!(s2.validated_fraction, 0.0);
    }

    #[test]
    fn security_stats_recompute_after_adding_uninvolved_holder() {
        // Adding a holder that owns the asset but shares no validated edge
        // changes f_s only through the recomputed pair count.
        let base = weighted_snap(&[("f1", "s1", 1.0), ("f2", "s1", 1.0)], "2000Q1");
        let extended = weighted_snap(
            &[("f1", "s1", 1.0), ("f2", "s1", 1.0), ("f9", "s1", 1.0)],
            "2000Q1",
        );
        let net_base = stub_net(base.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let net_ext = stub_net(extended.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let s_base = &security_validation_stats(&base, &net_base, None)[0];
        let s_ext = &security_validation_stats(&extended, &net_ext, None)[0];
        assert_eq!(s_base.validated_pairs, 1);
        assert_eq!(s_ext.validated_pairs, 1);
        assert_eq!(s_base.validated_fraction, 1.0);
        // Recomputed from scratch: 1 validated pair of C(3,2) = 3.
        assert_eq!(s_ext.pair_count, 3);
        assert_eq!(s_ext.validated_fraction, 1.0 / 3.0);
    }

    #[test]
    fn distress_ratio_direct_case() {
        // 4 holders, 2 validated (f1, f2), both distressed; l = 0.5.
        let snap = weighted_snap(
            &[
                ("f1", "s1", 1.0),
                ("f2", "s1", 1.0),
                ("f3", "s2", 1.0),
                ("f4", "s3", 1.0),
            ],
            "2000Q1",
        );
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let distressed: HashSet<String> = ["f1", "f2"].iter().map(|s| s.to_string()).collect();
        let (l, l_v, g_i, r_i) = distress_enrichment(&snap, &net, &distressed);
        assert_eq!(l, 0.5);
        assert_eq!(l_v, 1.0);
        assert_eq!(g_i, Some(2.0));
        assert_eq!(r_i, Some(1.0)); // the only overlap pair is the validated one
    }

    #[test]
    fn distressed_set_ranks_by_dollar_drop() {
        let prev = weighted_snap(
            &[
                ("f1", "s1", 100.0),
                ("f2", "s1", 100.0),
                ("f3", "s1", 100.0),
            ],
            "2000Q1",
        );
        let curr = weighted_snap(
            &[("f1", "s1", 10.0), ("f2", "s1", 90.0), ("f3", "s1", 100.0)],
            "2000Q2",
        );
        let meta = meta_with(&[("s1", 1.0, 1000.0)]);
        let set = distressed_set(&prev, &curr, &meta, &meta, 2, DistressRanking::Dollar).unwrap();
        assert_eq!(set, vec!["f1".to_string(), "f2".to_string()]);
        // Capping beyond the population warns and returns everyone.
        let all = distressed_set(&prev, &curr, &meta, &meta, 10, DistressRanking::Dollar).unwrap();
        assert_eq!(all.len(), 3);
        // The return-ranked variant orders by relative drop instead.
        let by_return =
            distressed_set(&prev, &curr, &meta, &meta, 1, DistressRanking::Return).unwrap();
        assert_eq!(by_return, vec!["f1".to_string()]);
    }

    #[test]
    fn doubled_weight_on_shared_assets_lifts_overlapping_mean() {
        // Two validated holders share s1; the shared position carries twice
        // the dollar value of each private one, so the overlapping mean
        // must exceed the 1/degree baseline.
        let snap = weighted_snap(
            &[
                ("f1", "s1", 2.0),
                ("f1", "s2", 1.0),
                ("f1", "s3", 1.0),
                ("f2", "s1", 2.0),
                ("f2", "s4", 1.0),
                ("f2", "s5", 1.0),
            ],
            "2000Q1",
        );
        let meta = meta_with(&[
            ("s1", 1.0, 10.0),
            ("s2", 1.0, 10.0),
            ("s3", 1.0, 10.0),
            ("s4", 1.0, 10.0),
            ("s5", 1.0, 10.0),
        ]);
        let pm = portfolio_metrics(&snap, &meta).unwrap();
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        for split in overlap_share_split(&snap, &net, &pm) {
            assert!(
                split.overlapping_mean.unwrap() > split.inv_degree,
                "overweighted shared position must beat 1/degree"
            );
            assert!(split.rest_mean.unwrap() < split.inv_degree);
        }
    }

    #[test]
    fn planted_assets_have_higher_validated_fraction() {
        use crate::synth::{generate, DegreeLaw, PlantedBlock, SynthSpec};
        use crate::validator::{validate_snapshot, ValidationConfig};
        let fixture = generate(&SynthSpec {
            holders: 60,
            assets: 300,
            law: DegreeLaw::PowerLaw {
                exponent: 2.5,
                min_degree: 4,
                max_degree: 15,
            },
            blocks: vec![PlantedBlock {
                holders: 6,
                assets: 30,
                fill: 1.0,
            }],
            seed: 17,
            weighted: false,
            date: "2003Q2".to_string(),
        })
        .unwrap();
        let snap = &fixture.snapshot;
        let net = validate_snapshot(snap, Layer::Holders, &ValidationConfig::default()).unwrap();
        let planted: std::collections::HashSet<usize> = fixture.planted[0]
            .asset_ids
            .iter()
            .map(|id| snap.asset_index_of(id).unwrap())
            .collect();
        let stats = security_validation_stats(snap, &net, None);
        let mean = |keep: &dyn Fn(usize) -> bool| {
            let v: Vec<f64> = stats
                .iter()
                .filter(|s| keep(s.asset))
                .map(|s| s.validated_fraction)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let planted_mean = mean(&|a| planted.contains(&a));
        let background_mean = mean(&|a| !planted.contains(&a));
        assert_eq!(
            planted_mean, 1.0,
            "fully planted assets: every pair validated"
        );
        assert!(background_mean < 0.1);
    }

    #[test]
    fn returns_regression_recovers_constructed_slope() {
        // 13 quarters; per transition, validated holders return exactly
        // 1.2x the outsiders' mean. Every holder owns its own asset so
        // prices set returns directly.
        let holders = 40usize;
        let validated: Vec<usize> = (0..holders / 2).collect();
        let mut snaps = Vec::new();
        let mut metas = Vec::new();
        let mut nets = Vec::new();
        let mut price = vec![100.0f64; holders];
        for t in 0..13usize {
            let entries: Vec<(String, String, f64)> = (0..holders)
                .map(|h| (format!("h{h:02}"), format!("s{h:02}"), 10.0))
                .collect();
            let snap = weighted_snap(
                &entries
                    .iter()
                    .map(|(h, a, w)| (h.as_str(), a.as_str(), *w))
                    .collect::<Vec<_>>(),
                &format!("Q{t:02}"),
            );
            let mut meta = AssetMetaTable::new();
            for (h, p) in price.iter().enumerate() {
                meta.insert(
                    format!("s{h:02}"),
                    AssetMeta {
                        price: Some(*p),
                        outstanding: Some(1e6),
                        category: None,
                    },
                );
            }
            let edges: Vec<(usize, usize)> = validated
                .chunks(2)
                .filter(|c| c.len() == 2)
                .map(|c| (c[0], c[1]))
                .collect();
            nets.push(stub_net(snap.holder_ids().to_vec(), edges, Layer::Holders));
            snaps.push(snap);
            metas.push(meta);
            // Returns for the next step.
            let r_out = 0.01 * ((t as f64) - 6.0) / 6.0; // spans [-0.01, 0.01]
            let r_in = 1.2 * r_out;
            for (h, p) in price.iter_mut().enumerate() {
                *p *= 1.0 + if validated.contains(&h) { r_in } else { r_out };
            }
        }
        let reg = returns_regression(&snaps, &metas, &nets, 0.2).unwrap();
        assert!(
            (reg.slope - 1.2).abs() <= 0.05,
            "slope {} not within 0.05 of 1.2",
            reg.slope
        );
        assert!(reg.intercept.abs() < 1e-6);
        assert_eq!(reg.points.len(), 12);
        assert!((reg.included_fraction - 1.0).abs() < 1e-12);
        assert!(!reg.slope_curve.is_empty());
        // The split variant sees the same 1.2x structure on each sign.
        let pos = reg.slope_positive.expect("positive-return regression");
        let neg = reg.slope_negative.expect("negative-return regression");
        assert!(
            (pos.slope - 1.2).abs() <= 0.05,
            "positive slope {}",
            pos.slope
        );
        assert!(
            (neg.slope - 1.2).abs() <= 0.05,
            "negative slope {}",
            neg.slope
        );
    }

    #[test]
    fn identical_populations_give_unit_slope() {
        // In and out returns identical per date -> A = 1, B = 0.
        let holders = 10usize;
        let mut snaps = Vec::new();
        let mut metas = Vec::new();
        let mut nets = Vec::new();
        let mut price = vec![50.0f64; holders];
        for t in 0..5usize {
            let entries: Vec<(String, String, f64)> = (0..holders)
                .map(|h| (format!("h{h}"), format!("s{h}"), 1.0))
                .collect();
            let snap = weighted_snap(
                &entries
                    .iter()
                    .map(|(h, a, w)| (h.as_str(), a.as_str(), *w))
                    .collect::<Vec<_>>(),
                &format!("Q{t}"),
            );
            let mut meta = AssetMetaTable::new();
            for (h, p) in price.iter().enumerate() {
                meta.insert(
                    format!("s{h}"),
                    AssetMeta {
                        price: Some(*p),
                        outstanding: Some(1e6),
                        category: None,
                    },
                );
            }
            nets.push(stub_net(
                snap.holder_ids().to_vec(),
                vec![(0, 1), (2, 3)],
                Layer::Holders,
            ));
            snaps.push(snap);
            metas.push(meta);
            let r = 0.02 * (t as f64 - 2.0);
            for p in price.iter_mut() {
                *p *= 1.0 + r;
            }
        }
        let reg = returns_regression(&snaps, &metas, &nets, 0.5).unwrap();
        assert!((reg.slope - 1.0).abs() < 1e-9);
        assert!(reg.intercept.abs() < 1e-9);
    }

    #[test]
    fn internal_degree_same_vs_split_categories() {
        let mut meta = AssetMetaTable::new();
        for (id, cat) in [("s0", "tech"), ("s1", "tech"), ("s2", "fin"), ("s3", "fin")] {
            meta.insert(
                id,
                AssetMeta {
                    price: None,
                    outstanding: None,
                    category: Some(cat.to_string()),
                },
            );
        }
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        // All edges inside "tech".
        let net = stub_net(ids.clone(), vec![(0, 1)], Layer::Assets);
        let stats = internal_degree(&net, &meta).unwrap();
        let tech = stats.iter().find(|s| s.category == "tech").unwrap();
        assert_eq!(tech.internal_links, 1);
        assert_eq!(tech.mean_internal_degree, 1.0);
        let fin = stats.iter().find(|s| s.category == "fin").unwrap();
        assert_eq!(fin.internal_links, 0);
        // Perfect bipartition across categories: zero internal links.
        let net = stub_net(ids, vec![(0, 2), (1, 3)], Layer::Assets);
        let stats = internal_degree(&net, &meta).unwrap();
        assert!(stats.iter().all(|s| s.internal_links == 0));
        // Holder-layer networks are rejected.
        let bad = stub_net(vec!["x".into()], vec![], Layer::Holders);
        assert!(internal_degree(&bad, &meta).is_err());
    }

    #[test]
    fn timeseries_single_date() {
        let snap = weighted_snap(&[("f1", "s1", 1.0), ("f2", "s1", 1.0)], "2000Q1");
        let net = stub_net(snap.holder_ids().to_vec(), vec![(0, 1)], Layer::Holders);
        let rows = timeseries(
            std::slice::from_ref(&snap),
            std::slice::from_ref(&net),
            None,
            None,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].holders, 2);
        assert_eq!(rows[0].edge_count, 1);
        assert_eq!(rows[0].validated_fraction, 1.0);
    }

    #[test]
    fn shifted_series_peaks_at_lag_one() {
        let buy: Vec<f64> = (0..12)
            .map(|t| ((t as f64) * 0.7).sin() + 0.1 * t as f64)
            .collect();
        let sell: Vec<f64> = std::iter::once(0.0)
            .chain(buy.iter().copied().take(11))
            .collect();
        let ccf = cross_correlation(&buy, &sell, 3);
        let at = |lag: i64| ccf.iter().find(|(l, _)| *l == lag).unwrap().1.unwrap();
        assert!((at(1) - 1.0).abs() < 1e-12, "corr at lag 1 should be exact");
        for lag in [-3i64, -2, -1, 0, 2, 3] {
            assert!(at(lag) < 1.0 - 1e-9, "lag {lag} should not be maximal");
        }
    }
}
