//! Synthetic bipartite fixtures and independent oracles.
//!
//! The generator produces seeded random backgrounds (regular, power-law or
//! explicit holder degrees) with optional planted overlapping blocks; the
//! oracles verify the analytic machinery from the outside: exhaustive
//! Bernoulli enumeration for small trial sets, and Monte-Carlo row sampling
//! of the ensemble for tail frequencies.
//!
//! All randomness flows through ChaCha8 streams derived from one seed, so
//! equal seeds give byte-identical fixtures on every platform.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::bicm::BiCMSolution;
use crate::error::{Error, Result};
use crate::graph::{AssetMeta, AssetMetaTable, HolderMetaTable, Snapshot};
use crate::numeric::{seeded_rng, KahanSum};

/// How background holder degrees are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegreeLaw {
    /// Every holder has exactly this degree; asset degrees are balanced.
    Regular { degree: usize },
    /// Holder degrees drawn from P(d) proportional to d^-exponent on
    /// [min_degree, max_degree]; asset popularity is Zipf-like with the
    /// matching exponent so asset degrees come out heavy-tailed too.
    PowerLaw {
        exponent: f64,
        min_degree: usize,
        max_degree: usize,
    },
    /// Explicit holder degree list; assets sampled uniformly.
    Explicit { degrees: Vec<usize> },
}

/// A planted overlapping block: `holders` background holders all connect to
/// `assets` dedicated extra assets, each edge present with probability
/// `fill`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBlock {
    pub holders: usize,
    pub assets: usize,
    pub fill: f64,
}

/// Complete recipe for one synthetic snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub holders: usize,
    pub assets: usize,
    pub law: DegreeLaw,
    #[serde(default)]
    pub blocks: Vec<PlantedBlock>,
    pub seed: u64,
    /// Draw log-normal share counts instead of binary ownership.
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "default_date")]
    pub date: String,
}

fn default_date() -> String {
    "2000Q1".to_string()
}

/// Ids of the nodes a planted block ended up on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedNodes {
    pub holder_ids: Vec<String>,
    pub asset_ids: Vec<String>,
}

/// A generated snapshot plus where the planted structure lives.
#[derive(Debug, Clone)]
pub struct GeneratedFixture {
    pub snapshot: Snapshot,
    pub planted: Vec<PlantedNodes>,
}

fn holder_id(i: usize) -> String {
    format!("h{i:05}")
}

fn asset_id(s: usize) -> String {
    format!("a{s:05}")
}

fn planted_asset_id(block: usize, s: usize) -> String {
    format!("p{block}a{s:04}")
}

/// Generate a snapshot from a spec. Reproducible: equal specs give
/// byte-identical snapshots.
pub fn generate(spec: &SynthSpec) -> Result<GeneratedFixture> {
    if spec.holders == 0 || spec.assets == 0 {
        return Err(Error::InfeasibleSpec("empty layer requested".into()));
    }
    let planted_total: usize = spec.blocks.iter().map(|b| b.holders).sum();
    if planted_total > spec.holders {
        return Err(Error::InfeasibleSpec(format!(
            "blocks claim {planted_total} holders, only {} available",
            spec.holders
        )));
    }
    for block in &spec.blocks {
        if !(0.0..=1.0).contains(&block.fill) || block.fill == 0.0 {
            return Err(Error::InfeasibleSpec(format!(
                "block fill must be in (0,1], got {}",
                block.fill
            )));
        }
    }

    let degrees = holder_degrees(spec)?;
    let mut edges: Vec<(usize, usize)> = match &spec.law {
        DegreeLaw::Regular { degree } => regular_edges(spec, *degree)?,
        DegreeLaw::PowerLaw { exponent, .. } => {
            weighted_edges(spec, &degrees, Some(1.0 / (exponent - 1.0)))?
        }
        DegreeLaw::Explicit { .. } => weighted_edges(spec, &degrees, None)?,
    };

    // Planted blocks: consecutive holders from the front, dedicated assets.
    let mut planted = Vec::new();
    let mut next_holder = 0usize;
    let mut planted_entries: Vec<(usize, String)> = Vec::new();
    for (b, block) in spec.blocks.iter().enumerate() {
        let mut rng = seeded_rng(spec.seed, 0x5000 + b as u64);
        let holder_range = next_holder..next_holder + block.holders;
        next_holder += block.holders;
        let asset_ids: Vec<String> = (0..block.assets).map(|s| planted_asset_id(b, s)).collect();
        for h in holder_range.clone() {
            for aid in &asset_ids {
                if block.fill >= 1.0 || rng.random::<f64>() < block.fill {
                    planted_entries.push((h, aid.clone()));
                }
            }
        }
        planted.push(PlantedNodes {
            holder_ids: holder_range.map(holder_id).collect(),
            asset_ids,
        });
    }

    edges.sort_unstable();
    edges.dedup();
    let mut entries: Vec<(String, String, f64)> = edges
        .into_iter()
        .map(|(h, s)| (holder_id(h), asset_id(s), 1.0))
        .collect();
    entries.extend(
        planted_entries
            .into_iter()
            .map(|(h, aid)| (holder_id(h), aid, 1.0)),
    );

    if spec.weighted {
        let mut rng = seeded_rng(spec.seed, 0x7E16);
        let law = LogNormal::new((1e4f64).ln(), 1.5).expect("valid lognormal");
        for entry in &mut entries {
            entry.2 = law.sample(&mut rng).round().max(1.0);
        }
    }

    let snapshot = Snapshot::from_entries(spec.date.clone(), entries, !spec.weighted)?;
    Ok(GeneratedFixture { snapshot, planted })
}

fn holder_degrees(spec: &SynthSpec) -> Result<Vec<usize>> {
    match &spec.law {
        DegreeLaw::Regular { degree } => {
            if *degree == 0 || *degree > spec.assets {
                return Err(Error::InfeasibleSpec(format!(
                    "regular degree {degree} outside [1, {}]",
                    spec.assets
                )));
            }
            Ok(vec![*degree; spec.holders])
        }
        DegreeLaw::PowerLaw {
            exponent,
            min_degree,
            max_degree,
        } => {
            if *min_degree == 0 || min_degree > max_degree || *max_degree > spec.assets {
                return Err(Error::InfeasibleSpec(format!(
                    "power-law degree range [{min_degree}, {max_degree}] outside [1, {}]",
                    spec.assets
                )));
            }
            if *exponent <= 1.0 {
                return Err(Error::InfeasibleSpec(format!(
                    "power-law exponent must exceed 1, got {exponent}"
                )));
            }
            let weights: Vec<f64> = (*min_degree..=*max_degree)
                .map(|d| (d as f64).powf(-exponent))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut rng = seeded_rng(spec.seed, 0xD6);
            Ok((0..spec.holders)
                .map(|_| {
                    let mut u = rng.random::<f64>() * total;
                    for (k, w) in weights.iter().enumerate() {
                        u -= w;
                        if u <= 0.0 {
                            return min_degree + k;
                        }
                    }
                    *max_degree
                })
                .collect())
        }
        DegreeLaw::Explicit { degrees } => {
            if degrees.len() != spec.holders {
                return Err(Error::InfeasibleSpec(format!(
                    "explicit list has {} degrees for {} holders",
                    degrees.len(),
                    spec.holders
                )));
            }
            if degrees.iter().any(|&d| d == 0 || d > spec.assets) {
                return Err(Error::InfeasibleSpec(
                    "explicit degrees must lie in [1, assets]".into(),
                ));
            }
            Ok(degrees.clone())
        }
    }
}

/// Exactly-regular construction by stub matching with duplicate repair.
fn regular_edges(spec: &SynthSpec, degree: usize) -> Result<Vec<(usize, usize)>> {
    if degree == spec.assets {
        // Complete bipartite graph is the only simple realization.
        let mut edges = Vec::with_capacity(spec.holders * degree);
        for h in 0..spec.holders {
            for s in 0..spec.assets {
                edges.push((h, s));
            }
        }
        return Ok(edges);
    }
    let total = spec.holders * degree;
    let base = total / spec.assets;
    let extra = total % spec.assets;
    let mut asset_stubs: Vec<usize> = Vec::with_capacity(total);
    for s in 0..spec.assets {
        let d = base + usize::from(s < extra);
        asset_stubs.extend(std::iter::repeat_n(s, d));
    }
    let mut rng = seeded_rng(spec.seed, 0x21);
    shuffle(&mut asset_stubs, &mut rng);
    let mut edges: Vec<(usize, usize)> = (0..total).map(|k| (k / degree, asset_stubs[k])).collect();

    // Swap asset ends of colliding edges until the graph is simple.
    for _round in 0..10_000 {
        let mut seen = HashSet::with_capacity(total);
        let duplicates: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter_map(|(pos, e)| (!seen.insert(*e)).then_some(pos))
            .collect();
        if duplicates.is_empty() {
            return Ok(edges);
        }
        for pos in duplicates {
            let other = rng.random_range(0..total);
            let tmp = edges[pos].1;
            edges[pos].1 = edges[other].1;
            edges[other].1 = tmp;
        }
    }
    Err(Error::InfeasibleSpec(
        "regular stub matching failed to become simple".into(),
    ))
}

/// Each holder samples its degree of distinct assets, weighted by asset
/// popularity (Efraimidis-Spirakis keys): Zipf weights when `alpha` is set,
/// uniform otherwise.
fn weighted_edges(
    spec: &SynthSpec,
    degrees: &[usize],
    alpha: Option<f64>,
) -> Result<Vec<(usize, usize)>> {
    let weights: Vec<f64> = (0..spec.assets)
        .map(|s| match alpha {
            Some(a) => ((s + 1) as f64).powf(-a),
            None => 1.0,
        })
        .collect();
    let mut rng = seeded_rng(spec.seed, 0xE5);
    let mut edges = Vec::with_capacity(degrees.iter().sum());
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(spec.assets);
    for (h, &d) in degrees.iter().enumerate() {
        keys.clear();
        for (s, &w) in weights.iter().enumerate() {
            let u: f64 = rng.random();
            // ln(u)/w is monotone in the Efraimidis-Spirakis key u^(1/w).
            keys.push((u.ln() / w, s));
        }
        keys.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        edges.extend(keys.iter().take(d).map(|&(_, s)| (h, s)));
    }
    Ok(edges)
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Synthetic metadata for a snapshot: log-normal prices, outstanding shares
/// covering total holdings, category labels, and holder type labels.
pub fn generate_metadata(
    snap: &Snapshot,
    seed: u64,
    categories: usize,
) -> (HolderMetaTable, AssetMetaTable) {
    let mut rng = seeded_rng(seed, 0x3E7A);
    let mut holder_meta = HolderMetaTable::new();
    let types = [
        ("IA", 0.35),
        ("MF", 0.20),
        ("HF", 0.20),
        ("PF", 0.10),
        ("BR", 0.08),
        ("PB", 0.07),
    ];
    for id in snap.holder_ids() {
        let mut u: f64 = rng.random();
        let mut label = "other";
        for (name, share) in types {
            u -= share;
            if u <= 0.0 {
                label = name;
                break;
            }
        }
        holder_meta.insert(id.clone(), label);
    }

    let price_law = LogNormal::new((20f64).ln(), 1.0).expect("valid lognormal");
    let mut asset_meta = AssetMetaTable::new();
    for (s, id) in snap.asset_ids().iter().enumerate() {
        let total_held: f64 = snap.holder_weights_of(s).iter().sum();
        let coverage: f64 = 0.2 + 0.6 * rng.random::<f64>();
        let price = price_law.sample(&mut rng);
        let category = if categories > 0 {
            Some(format!("cat{:02}", rng.random_range(0..categories)))
        } else {
            None
        };
        asset_meta.insert(
            id.clone(),
            AssetMeta {
                price: Some((price * 100.0).round() / 100.0),
                outstanding: Some((total_held / coverage).ceil().max(total_held)),
                category,
            },
        );
    }
    (holder_meta, asset_meta)
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Exhaustive,
    MonteCarlo,
}

/// An independent estimate of some probability, with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub method: OracleMethod,
}

/// Enumeration cap: 2^25 outcome vectors.
pub const EXHAUSTIVE_TRIAL_CAP: usize = 25;

/// Exact distribution of a sum of independent Bernoulli trials by brute
/// enumeration of every outcome vector. Probability-one trials shift the
/// support; the result has one entry per overlap value 0..=trials.
pub fn exhaustive_overlap_oracle(trials: &[f64]) -> Result<Vec<f64>> {
    let t = trials.len();
    if t > EXHAUSTIVE_TRIAL_CAP {
        return Err(Error::EnumerationCap {
            trials: t,
            cap: EXHAUSTIVE_TRIAL_CAP,
        });
    }
    let complements: Vec<f64> = trials.iter().map(|&q| 1.0 - q).collect();
    let mut buckets = vec![KahanSum::new(); t + 1];
    for mask in 0u64..(1u64 << t) {
        let mut p = 1.0f64;
        for (bit, (&q, &omq)) in trials.iter().zip(&complements).enumerate() {
            p *= if mask >> bit & 1 == 1 { q } else { omq };
        }
        buckets[mask.count_ones() as usize].add(p);
    }
    Ok(buckets.into_iter().map(|b| b.value()).collect())
}

/// Empirical overlap histogram for a holder degree pair: both Bernoulli rows
/// are sampled per asset and the joint successes counted. `counts[x]` is the
/// number of samples with overlap exactly x.
pub fn mc_overlap_histogram(
    sol: &BiCMSolution,
    degree_a: usize,
    degree_b: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let mut rng = seeded_rng(seed, 0x0C1E);
    mc_overlap_histogram_with_rng(sol, degree_a, degree_b, samples, &mut rng)
}

/// As `mc_overlap_histogram` with a caller-owned random stream, so parallel
/// runs can use independent derived streams.
pub fn mc_overlap_histogram_with_rng(
    sol: &BiCMSolution,
    degree_a: usize,
    degree_b: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<u64>> {
    let sa = sol.holder_state_of_degree(degree_a)?;
    let sb = sol.holder_state_of_degree(degree_b)?;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for ((count, qa), (_, qb)) in sol
        .row_probabilities_for_state(sa)
        .into_iter()
        .zip(sol.row_probabilities_for_state(sb))
    {
        rows.extend(std::iter::repeat_n((qa, qb), count));
    }
    let mut counts = vec![0u64; rows.len() + 1];
    for _ in 0..samples {
        let mut overlap = 0usize;
        for &(qa, qb) in &rows {
            let in_a = rng.random::<f64>() < qa || qa >= 1.0;
            let in_b = rng.random::<f64>() < qb || qb >= 1.0;
            if in_a && in_b {
                overlap += 1;
            }
        }
        counts[overlap] += 1;
    }
    Ok(counts)
}

/// Monte-Carlo tail frequency of {overlap >= observed} over ensemble draws
/// of the pair's rows.
pub fn mc_pvalue_oracle(
    sol: &BiCMSolution,
    degree_a: usize,
    degree_b: usize,
    observed: usize,
    samples: usize,
    seed: u64,
) -> Result<OracleResult> {
    if samples < 1_000 {
        eprintln!("warning: Monte-Carlo oracle with only {samples} samples");
    }
    let counts = mc_overlap_histogram(sol, degree_a, degree_b, samples, seed)?;
    Ok(tail_estimate(&counts, observed, samples))
}

/// Tail frequency {overlap >= observed} from a sampled histogram.
pub fn tail_estimate(counts: &[u64], observed: usize, samples: usize) -> OracleResult {
    let tail: u64 = counts.iter().skip(observed).sum();
    let estimate = tail as f64 / samples as f64;
    OracleResult {
        estimate,
        std_error: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
        samples,
        method: OracleMethod::MonteCarlo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicm::fit_bicm_default;
    use crate::graph::Layer;

    fn spec(holders: usize, assets: usize, law: DegreeLaw, seed: u64) -> SynthSpec {
        SynthSpec {
            holders,
            assets,
            law,
            blocks: vec![],
            seed,
            weighted: false,
            date: "2000Q1".to_string(),
        }
    }

    #[test]
    fn regular_10x10_degree_3_is_exactly_regular() {
        let fixture = generate(&spec(10, 10, DegreeLaw::Regular { degree: 3 }, 7)).unwrap();
        let snap = &fixture.snapshot;
        assert_eq!(snap.num_holders(), 10);
        assert_eq!(snap.num_assets(), 10);
        for h in 0..10 {
            assert_eq!(snap.holder_degree(h), 3);
        }
        for a in 0..10 {
            assert_eq!(snap.asset_degree(a), 3);
        }
    }

    #[test]
    fn planted_block_forces_overlaps() {
        let mut s = spec(
            200,
            1000,
            DegreeLaw::PowerLaw {
                exponent: 2.2,
                min_degree: 10,
                max_degree: 300,
            },
            11,
        );
        s.blocks.push(PlantedBlock {
            holders: 10,
            assets: 40,
            fill: 1.0,
        });
        let fixture = generate(&s).unwrap();
        let snap = &fixture.snapshot;
        let planted = &fixture.planted[0];
        assert_eq!(planted.holder_ids.len(), 10);
        assert_eq!(planted.asset_ids.len(), 40);
        let idx: Vec<usize> = planted
            .holder_ids
            .iter()
            .map(|id| snap.holder_index_of(id).unwrap())
            .collect();
        let overlaps = snap.overlaps(Layer::Holders);
        for (pos, &a) in idx.iter().enumerate() {
            for &b in &idx[pos + 1..] {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let rec = overlaps
                    .iter()
                    .find(|r| r.a == lo && r.b == hi)
                    .expect("planted pair must overlap");
                assert!(rec.overlap >= 40, "overlap {} < 40", rec.overlap);
            }
        }
    }

    #[test]
    fn power_law_assets_are_heavy_tailed() {
        let fixture = generate(&spec(
            300,
            1000,
            DegreeLaw::PowerLaw {
                exponent: 2.2,
                min_degree: 5,
                max_degree: 200,
            },
            3,
        ))
        .unwrap();
        let snap = &fixture.snapshot;
        let mut degrees: Vec<usize> = (0..snap.num_assets())
            .map(|a| snap.asset_degree(a))
            .collect();
        degrees.sort_unstable();
        let median = degrees[degrees.len() / 2];
        let max = *degrees.last().unwrap();
        assert!(
            max >= 10 * median.max(1),
            "max {max} not much larger than median {median}"
        );
    }

    #[test]
    fn equal_seeds_are_byte_identical() {
        let s = spec(
            50,
            120,
            DegreeLaw::PowerLaw {
                exponent: 2.5,
                min_degree: 3,
                max_degree: 40,
            },
            99,
        );
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        let dump = |snap: &Snapshot| {
            let mut v = Vec::new();
            snap.write_canonical(&mut v).unwrap();
            v
        };
        assert_eq!(dump(&a.snapshot), dump(&b.snapshot));
        let different = generate(&spec(
            50,
            120,
            DegreeLaw::PowerLaw {
                exponent: 2.5,
                min_degree: 3,
                max_degree: 40,
            },
            100,
        ))
        .unwrap();
        assert_ne!(dump(&a.snapshot), dump(&different.snapshot));
    }

    #[test]
    fn infeasible_specs_error() {
        assert!(generate(&spec(10, 5, DegreeLaw::Regular { degree: 6 }, 1)).is_err());
        assert!(generate(&spec(
            10,
            5,
            DegreeLaw::Explicit {
                degrees: vec![1; 9]
            },
            1
        ))
        .is_err());
        let mut s = spec(4, 5, DegreeLaw::Regular { degree: 2 }, 1);
        s.blocks.push(PlantedBlock {
            holders: 5,
            assets: 2,
            fill: 1.0,
        });
        assert!(generate(&s).is_err());
    }

    #[test]
    fn weighted_fixture_has_positive_integer_shares() {
        let mut s = spec(8, 20, DegreeLaw::Regular { degree: 4 }, 5);
        s.weighted = true;
        let snap = generate(&s).unwrap().snapshot;
        assert!(!snap.is_binary_only());
        for (_, _, w) in snap.entries() {
            assert!(w >= 1.0 && w.fract() == 0.0);
        }
    }

    #[test]
    fn restriction_matches_independent_label_count() {
        let fixture = generate(&spec(
            80,
            200,
            DegreeLaw::PowerLaw {
                exponent: 2.3,
                min_degree: 3,
                max_degree: 20,
            },
            44,
        ))
        .unwrap();
        let snap = &fixture.snapshot;
        let (holder_meta, _) = generate_metadata(snap, 44, 0);
        let restricted = snap.restrict(|id| holder_meta.kind(id) == Some("HF"));
        let expected = snap
            .holder_ids()
            .iter()
            .filter(|id| holder_meta.kind(id) == Some("HF"))
            .count();
        assert!(expected > 0, "fixture should contain some HF holders");
        assert_eq!(restricted.num_holders(), expected);
    }

    #[test]
    fn exhaustive_single_trial() {
        let pi = exhaustive_overlap_oracle(&[0.3]).unwrap();
        assert!((pi[0] - 0.7).abs() < 1e-15);
        assert!((pi[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_degenerate_trial_shifts_support() {
        let pi = exhaustive_overlap_oracle(&[1.0, 0.25]).unwrap();
        assert_eq!(pi[0], 0.0);
        assert!((pi[1] - 0.75).abs() < 1e-15);
        assert!((pi[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_total_probability_is_one() {
        let trials: Vec<f64> = (0..18).map(|k| 0.05 + 0.05 * (k as f64 % 19.0)).collect();
        let pi = exhaustive_overlap_oracle(&trials).unwrap();
        let total: f64 = pi.iter().sum();
        assert!((total - 1.0).abs() <= 1e-14, "total {total}");
    }

    #[test]
    fn exhaustive_cap() {
        let trials = vec![0.5; 26];
        assert!(matches!(
            exhaustive_overlap_oracle(&trials),
            Err(Error::EnumerationCap {
                trials: 26,
                cap: 25
            })
        ));
    }

    #[test]
    fn mc_oracle_degenerate_cases() {
        let fixture = generate(&spec(6, 8, DegreeLaw::Regular { degree: 3 }, 2)).unwrap();
        let sol = fit_bicm_default(&fixture.snapshot.degree_sequence(Layer::Holders)).unwrap();
        let r = mc_pvalue_oracle(&sol, 3, 3, 0, 2_000, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.std_error, 0.0);
        // Impossible overlap: more than the max support.
        let r = mc_pvalue_oracle(&sol, 3, 3, 9, 2_000, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn mc_oracle_standard_error_halves_with_4x_samples() {
        let fixture = generate(&spec(
            12,
            30,
            DegreeLaw::PowerLaw {
                exponent: 2.0,
                min_degree: 4,
                max_degree: 12,
            },
            8,
        ))
        .unwrap();
        let snap = &fixture.snapshot;
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        let rec = snap
            .overlaps(Layer::Holders)
            .into_iter()
            .find(|r| r.overlap >= 2)
            .expect("need an overlapping pair");
        let da = snap.holder_degree(rec.a);
        let db = snap.holder_degree(rec.b);
        let small = mc_pvalue_oracle(&sol, da, db, rec.overlap, 10_000, 3).unwrap();
        let large = mc_pvalue_oracle(&sol, da, db, rec.overlap, 40_000, 4).unwrap();
        assert!(small.std_error > 0.0);
        let ratio = large.std_error / small.std_error;
        assert!((ratio - 0.5).abs() < 0.2, "ratio {ratio}");
        assert!((small.estimate - large.estimate).abs() < 6.0 * small.std_error);
    }
}
