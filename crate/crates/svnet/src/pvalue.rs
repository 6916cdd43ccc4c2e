//! Exact null distribution of a pair's overlap and its tail p-value.
//!
//! Under the fitted model the overlap of holders (a, b) is a sum of
//! independent Bernoulli trials, one per asset, with success probability
//! Q_as * Q_bs. Probabilities coincide within an asset degree class, so the
//! sum collapses to a convolution of one binomial per class — far fewer
//! terms than assets. Only the cumulative mass below the observed overlap
//! enters the p-value, so every convolution is truncated at the observation.
//!
//! Two cheaper backends ride along: a normal approximation with continuity
//! correction, and the classical single-universe hypergeometric baseline
//! that ignores asset-degree heterogeneity.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::bicm::BiCMSolution;
use crate::error::{Error, Result};
use crate::graph::{DegreeSequence, OverlapRecord};
use crate::numeric::KahanSum;

/// p-values smaller than this are reported as 0 with the underflow flag set.
pub const P_UNDERFLOW: f64 = 1e-300;

/// Below this log-probability the binomial recurrence start underflows and
/// per-term log-space evaluation takes over.
const LOG_START_GUARD: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Normal,
    Hypergeometric,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Normal => write!(f, "normal"),
            Backend::Hypergeometric => write!(f, "hypergeometric"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "normal" => Ok(Backend::Normal),
            "hypergeometric" => Ok(Backend::Hypergeometric),
            other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

/// Tail probability of one pair's observed overlap under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueResult {
    pub a: usize,
    pub b: usize,
    pub overlap: usize,
    pub p_value: f64,
    pub backend: Backend,
    /// True when the tail mass fell below `P_UNDERFLOW` and was reported as 0.
    pub underflowed: bool,
}

/// Per-asset-degree-class success probabilities for one holder pair.
///
/// Classes with probability one contribute a deterministic `shift` of the
/// support instead of entering the recurrence (no 1/(1-q) singularity);
/// zero-probability classes are counted but never convolved.
#[derive(Debug, Clone)]
pub struct DegreeClassTable {
    /// Deterministic overlap contributed by probability-one classes.
    pub shift: usize,
    /// Assets with pair probability zero (forced-absent edges).
    pub zero_count: usize,
    /// (node count, q, 1-q) per class with q strictly inside (0, 1).
    pub classes: Vec<(usize, f64, f64)>,
}

impl DegreeClassTable {
    /// Class table for a holder degree pair under a fitted solution. The
    /// pair is unordered; arguments are canonicalized so that swapped
    /// degrees give bit-identical tables.
    pub fn for_degrees(sol: &BiCMSolution, degree_a: usize, degree_b: usize) -> Result<Self> {
        let (degree_a, degree_b) = if degree_a <= degree_b {
            (degree_a, degree_b)
        } else {
            (degree_b, degree_a)
        };
        let mut shift = 0usize;
        let mut zero_count = 0usize;
        let mut classes = Vec::new();
        for (count, q, omq) in sol.pair_class_probabilities(degree_a, degree_b)? {
            if q >= 1.0 || omq <= 0.0 {
                shift += count;
            } else if q <= 0.0 {
                zero_count += count;
            } else {
                classes.push((count, q, omq));
            }
        }
        Ok(DegreeClassTable {
            shift,
            zero_count,
            classes,
        })
    }

    /// Total trials represented, including degenerate classes.
    pub fn total_assets(&self) -> usize {
        self.shift + self.zero_count + self.classes.iter().map(|c| c.0).sum::<usize>()
    }

    /// Null mean of the overlap.
    pub fn mean(&self) -> f64 {
        self.shift as f64
            + self
                .classes
                .iter()
                .map(|&(n, q, _)| n as f64 * q)
                .sum::<f64>()
    }

    /// Null variance of the overlap.
    pub fn variance(&self) -> f64 {
        self.classes
            .iter()
            .map(|&(n, q, omq)| n as f64 * q * omq)
            .sum()
    }

    /// Expand to one Bernoulli probability per asset (forced classes become
    /// probability-one trials). Feed for the exhaustive oracle.
    pub fn expand_trials(&self) -> Vec<f64> {
        let mut trials = Vec::with_capacity(self.total_assets() - self.zero_count);
        trials.extend(std::iter::repeat_n(1.0, self.shift));
        for &(n, q, _) in &self.classes {
            trials.extend(std::iter::repeat_n(q, n));
        }
        trials
    }
}

/// Null overlap distribution truncated at `cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl OverlapDistribution {
    /// Convolve one binomial per class, truncating every intermediate at
    /// `cap`. Entry values are independent of the cap, so distributions for
    /// the same degree pair agree bit-for-bit on shared prefixes.
    pub fn from_table(table: &DegreeClassTable, cap: usize) -> OverlapDistribution {
        let mut pmf = vec![0.0f64; cap + 1];
        if table.shift <= cap {
            pmf[table.shift] = 1.0;
            for &(n, q, omq) in &table.classes {
                let binom = binomial_pmf_prefix(n, q, omq, cap);
                pmf = convolve_truncated(&pmf, &binom, cap);
            }
        }
        // else: all mass sits above the cap; within-cap pmf is identically 0

        let mut cdf = Vec::with_capacity(cap + 2);
        let mut acc = KahanSum::new();
        cdf.push(0.0);
        for &p in &pmf {
            acc.add(p);
            cdf.push(acc.value());
        }
        OverlapDistribution { pmf, cdf }
    }

    pub fn cap(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self, x: usize) -> f64 {
        self.pmf.get(x).copied().unwrap_or(0.0)
    }

    /// Cumulative mass strictly below `x` (clamped at the cap boundary).
    pub fn cdf_below(&self, x: usize) -> f64 {
        let idx = x.min(self.cdf.len() - 1);
        self.cdf[idx]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }
}

/// Binomial(n, q) probabilities for x = 0..=min(n, cap).
///
/// Fast path: the recurrence pi(x) = pi(x-1) * (n-x+1)/x * q/(1-q) seeded
/// with (1-q)^n computed as exp(n*log1p(-q)). When that start underflows
/// (huge n*q), each retained term is evaluated in log space instead so the
/// bulk of the distribution survives.
fn binomial_pmf_prefix(n: usize, q: f64, omq: f64, cap: usize) -> Vec<f64> {
    let kmax = n.min(cap);
    let ln_omq = if q <= 0.5 { (-q).ln_1p() } else { omq.ln() };
    let ln_start = n as f64 * ln_omq;
    let mut pmf = Vec::with_capacity(kmax + 1);
    if ln_start > LOG_START_GUARD {
        let ratio = q / omq;
        let mut value = ln_start.exp();
        pmf.push(value);
        for x in 1..=kmax {
            value *= (n - x + 1) as f64 / x as f64 * ratio;
            pmf.push(value);
        }
    } else {
        let ln_q = q.ln();
        let ln_n1 = ln_gamma(n as f64 + 1.0);
        for x in 0..=kmax {
            let ln_p = ln_n1 - ln_gamma(x as f64 + 1.0) - ln_gamma((n - x) as f64 + 1.0)
                + x as f64 * ln_q
                + (n - x) as f64 * ln_omq;
            pmf.push(ln_p.exp());
        }
    }
    pmf
}

/// out[x] = sum_k a[x-k] * b[k], truncated at `cap`, Kahan-compensated.
fn convolve_truncated(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; cap + 1];
    for (x, slot) in out.iter_mut().enumerate() {
        let mut acc = KahanSum::new();
        let kmax = x.min(b.len() - 1);
        for k in 0..=kmax {
            acc.add(a[x - k] * b[k]);
        }
        *slot = acc.value();
    }
    out
}

/// Null overlap distribution for a holder degree pair, truncated at `x_max`.
pub fn overlap_distribution(
    sol: &BiCMSolution,
    degree_a: usize,
    degree_b: usize,
    x_max: usize,
) -> Result<OverlapDistribution> {
    let table = DegreeClassTable::for_degrees(sol, degree_a, degree_b)?;
    Ok(OverlapDistribution::from_table(&table, x_max))
}

fn finish_p(raw: f64, rec: &OverlapRecord, backend: Backend) -> PValueResult {
    let clamped = raw.clamp(0.0, 1.0);
    let underflowed = clamped < P_UNDERFLOW;
    PValueResult {
        a: rec.a,
        b: rec.b,
        overlap: rec.overlap,
        p_value: if underflowed { 0.0 } else { clamped },
        backend,
        underflowed,
    }
}

/// Computes pair p-values against one fitted solution, memoizing
/// distributions by canonical degree pair. Safe to share across threads.
pub struct PValueEngine<'a> {
    sol: &'a BiCMSolution,
    cache: Mutex<HashMap<(usize, usize), Arc<OverlapDistribution>>>,
}

impl<'a> PValueEngine<'a> {
    pub fn new(sol: &'a BiCMSolution) -> Self {
        PValueEngine {
            sol,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn solution(&self) -> &BiCMSolution {
        self.sol
    }

    fn degree_pair(&self, rec: &OverlapRecord) -> Result<(usize, usize)> {
        let degrees = self.sol.holder_degrees();
        let da = *degrees
            .get(rec.a)
            .ok_or_else(|| Error::UnknownNode(format!("holder index {}", rec.a)))?;
        let db = *degrees
            .get(rec.b)
            .ok_or_else(|| Error::UnknownNode(format!("holder index {}", rec.b)))?;
        Ok(if da <= db { (da, db) } else { (db, da) })
    }

    /// Distribution for a degree pair with cap at least `cap`, from cache if
    /// already computed wide enough.
    fn distribution(&self, key: (usize, usize), cap: usize) -> Result<Arc<OverlapDistribution>> {
        {
            let cache = self.cache.lock().unwrap();
            if let Some(dist) = cache.get(&key) {
                if dist.cap() >= cap {
                    return Ok(Arc::clone(dist));
                }
            }
        }
        let table = DegreeClassTable::for_degrees(self.sol, key.0, key.1)?;
        let dist = Arc::new(OverlapDistribution::from_table(&table, cap));
        let mut cache = self.cache.lock().unwrap();
        let entry = cache.entry(key).or_insert_with(|| Arc::clone(&dist));
        if entry.cap() < cap {
            *entry = Arc::clone(&dist);
        }
        Ok(Arc::clone(entry))
    }

    /// Exact tail p-value: 1 minus the cumulative mass below the observed
    /// overlap, computed with the convolution truncated at the observation.
    pub fn exact(&self, rec: &OverlapRecord) -> Result<PValueResult> {
        if rec.overlap == 0 {
            return Ok(PValueResult {
                a: rec.a,
                b: rec.b,
                overlap: 0,
                p_value: 1.0,
                backend: Backend::Exact,
                underflowed: false,
            });
        }
        let key = self.degree_pair(rec)?;
        let dist = self.distribution(key, rec.overlap)?;
        Ok(finish_p(
            1.0 - dist.cdf_below(rec.overlap),
            rec,
            Backend::Exact,
        ))
    }

    /// Normal approximation with continuity correction, evaluated at the
    /// observation minus one half. Zero-variance tables delegate to the
    /// exact backend.
    pub fn normal(&self, rec: &OverlapRecord) -> Result<PValueResult> {
        let key = self.degree_pair(rec)?;
        let table = DegreeClassTable::for_degrees(self.sol, key.0, key.1)?;
        let variance = table.variance();
        if variance <= 0.0 {
            return self.exact(rec);
        }
        let z = (rec.overlap as f64 - 0.5 - table.mean()) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(finish_p(normal.sf(z), rec, Backend::Normal))
    }

    pub fn compute(&self, rec: &OverlapRecord, backend: Backend) -> Result<PValueResult> {
        match backend {
            Backend::Exact => self.exact(rec),
            Backend::Normal => self.normal(rec),
            Backend::Hypergeometric => Err(Error::InvalidConfig(
                "hypergeometric is a comparison baseline, not a validation backend".into(),
            )),
        }
    }

    /// All pairs at once: records are grouped by degree pair, each group's
    /// distribution is built once at the group's widest observation, and
    /// groups run in parallel on the current rayon pool. Output order equals
    /// input order regardless of scheduling.
    pub fn batch(&self, recs: &[OverlapRecord], backend: Backend) -> Result<Vec<PValueResult>> {
        if backend != Backend::Exact {
            return recs.iter().map(|r| self.compute(r, backend)).collect();
        }
        let mut groups: HashMap<(usize, usize), usize> = HashMap::new();
        for rec in recs {
            let key = self.degree_pair(rec)?;
            let cap = groups.entry(key).or_insert(0);
            *cap = (*cap).max(rec.overlap);
        }
        let mut work: Vec<((usize, usize), usize)> = groups.into_iter().collect();
        work.sort_unstable();
        let distributions: Result<Vec<_>> = work
            .par_iter()
            .map(|&(key, cap)| self.distribution(key, cap).map(|d| (key, d)))
            .collect();
        let by_key: HashMap<(usize, usize), Arc<OverlapDistribution>> =
            distributions?.into_iter().collect();
        recs.iter()
            .map(|rec| {
                if rec.overlap == 0 {
                    return self.exact(rec);
                }
                let key = self.degree_pair(rec)?;
                let dist = &by_key[&key];
                Ok(finish_p(
                    1.0 - dist.cdf_below(rec.overlap),
                    rec,
                    Backend::Exact,
                ))
            })
            .collect()
    }
}

/// Classical baseline: upper tail of Hypergeometric(N, d_a, d_b) at the
/// observed overlap, treating every asset as interchangeable. Kept for the
/// comparison with the exact machinery, not for production validation.
pub fn p_value_hypergeometric(deg: &DegreeSequence, rec: &OverlapRecord) -> Result<PValueResult> {
    let degrees = deg.projected_degrees();
    let da = *degrees
        .get(rec.a)
        .ok_or_else(|| Error::UnknownNode(format!("node index {}", rec.a)))?;
    let db = *degrees
        .get(rec.b)
        .ok_or_else(|| Error::UnknownNode(format!("node index {}", rec.b)))?;
    let universe = match deg.projected {
        crate::graph::Layer::Holders => deg.asset_degrees.len(),
        crate::graph::Layer::Assets => deg.holder_degrees.len(),
    };
    let bound = da.min(db);
    if rec.overlap > bound {
        return Err(Error::OverlapExceedsDegree {
            overlap: rec.overlap,
            bound,
        });
    }
    if rec.overlap == 0 {
        return Ok(PValueResult {
            a: rec.a,
            b: rec.b,
            overlap: 0,
            p_value: 1.0,
            backend: Backend::Hypergeometric,
            underflowed: false,
        });
    }
    let ln_choose = |n: usize, k: usize| -> f64 {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    };
    let ln_denom = ln_choose(universe, db);
    let low = rec.overlap.max((da + db).saturating_sub(universe));
    let mut acc = KahanSum::new();
    for k in low..=bound {
        let ln_p = ln_choose(da, k) + ln_choose(universe - da, db - k) - ln_denom;
        acc.add(ln_p.exp());
    }
    Ok(finish_p(acc.value(), rec, Backend::Hypergeometric))
}
