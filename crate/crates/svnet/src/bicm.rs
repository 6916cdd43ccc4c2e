//! Bipartite configuration model: the maximum-entropy ensemble of bipartite
//! graphs whose expected degree sequences match observation.
//!
//! One Lagrange multiplier per degree class (nodes with equal degree share a
//! multiplier by construction), so the solve runs on the reduced system of
//! distinct degrees. Full-degree nodes — a holder owning every asset or an
//! asset owned by every holder — make their multipliers diverge, so they are
//! peeled off first: their edges are forced with probability one and the
//! residual core is solved on its own.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DegreeClasses, DegreeSequence, Layer, Snapshot};
use crate::numeric::{seeded_rng, KahanSum};

/// Fate of one degree class after full-degree peeling.
///
/// `Peeled` classes had their edges to every node then present forced to
/// probability one; `Dropped` classes had their entire degree absorbed by
/// forced edges, leaving probability zero for everything else. The `order`
/// stamp decides, for a pair of non-core endpoints, which rule fired first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassState {
    Core { theta: f64, core_degree: usize },
    Peeled { order: usize },
    Dropped { order: usize },
}

/// Degree classes of one layer with their solved state.
#[derive(Debug, Clone)]
pub struct SolvedLayer {
    /// Distinct degrees, ascending.
    pub degrees: Vec<usize>,
    /// Node multiplicity per class.
    pub counts: Vec<usize>,
    /// Solved state per class.
    pub states: Vec<ClassState>,
    /// Class index per node.
    pub node_class: Vec<usize>,
    degree_class: HashMap<usize, usize>,
}

impl SolvedLayer {
    fn from_classes(classes: &DegreeClasses) -> SolvedLayer {
        SolvedLayer {
            degrees: classes.degrees.clone(),
            counts: classes.counts.clone(),
            states: Vec::new(),
            node_class: classes.node_class.clone(),
            degree_class: classes
                .degrees
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, i))
                .collect(),
        }
    }

    pub fn class_of_degree(&self, degree: usize) -> Option<usize> {
        self.degree_class.get(&degree).copied()
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
}

/// Connection probability implied by a pair of class states.
///
/// For two core classes it is the entropy-maximizing form t/(1+t) with
/// t the multiplier product; any non-core endpoint resolves by whichever
/// peel/drop event fired first.
fn pair_probability(a: ClassState, b: ClassState) -> f64 {
    use ClassState::*;
    match (a, b) {
        (Core { theta: ta, .. }, Core { theta: tb, .. }) => {
            let t = ta * tb;
            t / (1.0 + t)
        }
        (Core { .. }, Peeled { .. }) | (Peeled { .. }, Core { .. }) => 1.0,
        (Core { .. }, Dropped { .. }) | (Dropped { .. }, Core { .. }) => 0.0,
        (Peeled { .. }, Peeled { .. }) => 1.0,
        (Dropped { .. }, Dropped { .. }) => 0.0,
        (Peeled { order: op }, Dropped { order: od })
        | (Dropped { order: od }, Peeled { order: op }) => {
            if op < od {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Exact complement 1 - pair_probability, without cancellation for large
/// multiplier products.
fn pair_complement(a: ClassState, b: ClassState) -> f64 {
    use ClassState::*;
    match (a, b) {
        (Core { theta: ta, .. }, Core { theta: tb, .. }) => 1.0 / (1.0 + ta * tb),
        _ => 1.0 - pair_probability(a, b),
    }
}

/// Fitted bipartite configuration model.
#[derive(Debug, Clone)]
pub struct BiCMSolution {
    holder_degrees: Vec<usize>,
    asset_degrees: Vec<usize>,
    holders: SolvedLayer,
    assets: SolvedLayer,
    /// Achieved maximum relative degree error.
    pub residual: f64,
    /// Solver steps attempted (fixed-point sweeps plus Newton steps).
    pub iterations: usize,
}

impl BiCMSolution {
    pub fn num_holders(&self) -> usize {
        self.holder_degrees.len()
    }

    pub fn num_assets(&self) -> usize {
        self.asset_degrees.len()
    }

    pub fn holder_degrees(&self) -> &[usize] {
        &self.holder_degrees
    }

    pub fn asset_degrees(&self) -> &[usize] {
        &self.asset_degrees
    }

    pub fn holder_layer(&self) -> &SolvedLayer {
        &self.holders
    }

    pub fn asset_layer(&self) -> &SolvedLayer {
        &self.assets
    }

    fn holder_state(&self, holder: usize) -> Result<ClassState> {
        self.holders
            .node_class
            .get(holder)
            .map(|&c| self.holders.states[c])
            .ok_or_else(|| Error::UnknownNode(format!("holder index {holder}")))
    }

    fn asset_state(&self, asset: usize) -> Result<ClassState> {
        self.assets
            .node_class
            .get(asset)
            .map(|&c| self.assets.states[c])
            .ok_or_else(|| Error::UnknownNode(format!("asset index {asset}")))
    }

    /// State of the holder class with a given observed degree.
    pub fn holder_state_of_degree(&self, degree: usize) -> Result<ClassState> {
        self.holders
            .class_of_degree(degree)
            .map(|c| self.holders.states[c])
            .ok_or_else(|| Error::UnknownNode(format!("no holder class of degree {degree}")))
    }

    /// Ensemble probability Q of the edge (holder, asset).
    pub fn connection_probability(&self, holder: usize, asset: usize) -> Result<f64> {
        Ok(pair_probability(
            self.holder_state(holder)?,
            self.asset_state(asset)?,
        ))
    }

    /// Per-asset-class joint success probabilities for a holder degree pair:
    /// for each asset class, (node count, q, 1-q) with q = Q_a * Q_b.
    ///
    /// The complement is assembled from exact per-edge complements so that
    /// classes with q near one keep full precision in 1-q.
    pub fn pair_class_probabilities(
        &self,
        degree_a: usize,
        degree_b: usize,
    ) -> Result<Vec<(usize, f64, f64)>> {
        let sa = self.holder_state_of_degree(degree_a)?;
        let sb = self.holder_state_of_degree(degree_b)?;
        Ok(self
            .assets
            .counts
            .iter()
            .zip(&self.assets.states)
            .map(|(&count, &state)| {
                let qa = pair_probability(sa, state);
                let qb = pair_probability(sb, state);
                let q = qa * qb;
                // 1 - qa*qb = (1-qa) + qa*(1-qb)
                let omq = pair_complement(sa, state) + qa * pair_complement(sb, state);
                (count, q, omq)
            })
            .collect())
    }

    /// Per-asset-class connection probabilities for one holder class state:
    /// (node count, Q) per class.
    pub fn row_probabilities_for_state(&self, holder_state: ClassState) -> Vec<(usize, f64)> {
        self.assets
            .counts
            .iter()
            .zip(&self.assets.states)
            .map(|(&count, &state)| (count, pair_probability(holder_state, state)))
            .collect()
    }

    /// Null expectation of the overlap between two holders.
    pub fn expected_overlap(&self, holder_a: usize, holder_b: usize) -> Result<f64> {
        let sa = self.holder_state(holder_a)?;
        let sb = self.holder_state(holder_b)?;
        let mut acc = KahanSum::new();
        for (&count, &state) in self.assets.counts.iter().zip(&self.assets.states) {
            let q = pair_probability(sa, state) * pair_probability(sb, state);
            acc.add(count as f64 * q);
        }
        Ok(acc.value())
    }

    /// Draw one graph from the ensemble: every (holder, asset) edge appears
    /// independently with its probability Q. Returns the edge list.
    pub fn sample_edges(&self, rng: &mut impl Rng) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for holder in 0..self.num_holders() {
            let hs = self.holders.states[self.holders.node_class[holder]];
            // Per-class probabilities for this holder's row.
            let row: Vec<f64> = self
                .assets
                .states
                .iter()
                .map(|&s| pair_probability(hs, s))
                .collect();
            for asset in 0..self.num_assets() {
                let q = row[self.assets.node_class[asset]];
                if q >= 1.0 || rng.random::<f64>() < q {
                    edges.push((holder, asset));
                }
            }
        }
        edges
    }

    /// Expected degree of every node, computed by direct summation over the
    /// opposite layer's classes.
    pub fn expected_degrees(&self) -> (Vec<f64>, Vec<f64>) {
        let holder_expected: Vec<f64> = (0..self.num_holders())
            .map(|h| {
                let hs = self.holders.states[self.holders.node_class[h]];
                let mut acc = KahanSum::new();
                for (&count, &state) in self.assets.counts.iter().zip(&self.assets.states) {
                    acc.add(count as f64 * pair_probability(hs, state));
                }
                acc.value()
            })
            .collect();
        let asset_expected: Vec<f64> = (0..self.num_assets())
            .map(|a| {
                let as_ = self.assets.states[self.assets.node_class[a]];
                let mut acc = KahanSum::new();
                for (&count, &state) in self.holders.counts.iter().zip(&self.holders.states) {
                    acc.add(count as f64 * pair_probability(state, as_));
                }
                acc.value()
            })
            .collect();
        (holder_expected, asset_expected)
    }
}

/// Draw a snapshot-shaped sample from a fitted model, reusing the ids of the
/// snapshot the model was fitted on. Sampled nodes that end up with no edges
/// are absent from the result, as in any snapshot.
pub fn sample_snapshot(snap: &Snapshot, sol: &BiCMSolution, seed: u64) -> Result<Snapshot> {
    if snap.num_holders() != sol.num_holders() || snap.num_assets() != sol.num_assets() {
        return Err(Error::DegenerateInput(
            "snapshot and solution shapes differ".into(),
        ));
    }
    let mut rng = seeded_rng(seed, 0xB1C0);
    let entries: Vec<(String, String, f64)> = sol
        .sample_edges(&mut rng)
        .into_iter()
        .map(|(h, a)| {
            (
                snap.holder_ids()[h].clone(),
                snap.asset_ids()[a].clone(),
                1.0,
            )
        })
        .collect();
    Snapshot::from_entries(format!("{}-sample{}", snap.date(), seed), entries, true)
}

/// Default solver settings: maximum relative degree error and step budget.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Fit with default tolerance 1e-8 and budget 10^4 steps.
pub fn fit_bicm_default(deg: &DegreeSequence) -> Result<BiCMSolution> {
    fit_bicm(deg, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Fit the model: find per-class multipliers such that every class
/// reproduces its observed degree within `tol` relative error.
pub fn fit_bicm(deg: &DegreeSequence, tol: f64, max_iter: usize) -> Result<BiCMSolution> {
    fit_bicm_traced(deg, tol, max_iter).map(|(sol, _)| sol)
}

/// As `fit_bicm`, also returning the residual after every accepted step
/// (non-increasing by construction).
pub(crate) fn fit_bicm_traced(
    deg: &DegreeSequence,
    tol: f64,
    max_iter: usize,
) -> Result<(BiCMSolution, Vec<f64>)> {
    if deg.holder_degrees.is_empty() || deg.asset_degrees.is_empty() {
        return Err(Error::DegenerateInput(
            "cannot fit a model on an empty layer".into(),
        ));
    }
    if deg.holder_degrees.contains(&0) {
        return Err(Error::DegenerateInput("holder with degree 0".into()));
    }
    if deg.asset_degrees.contains(&0) {
        return Err(Error::DegenerateInput("asset with degree 0".into()));
    }

    let holder_classes = DegreeClasses::from_degrees(Layer::Holders, &deg.holder_degrees);
    let asset_classes = DegreeClasses::from_degrees(Layer::Assets, &deg.asset_degrees);
    let mut holders = SolvedLayer::from_classes(&holder_classes);
    let mut assets = SolvedLayer::from_classes(&asset_classes);

    let peel = peel_full_degree(&holder_classes, &asset_classes)?;

    // Assemble non-core states; core classes get multipliers from the solve.
    holders.states = vec![
        ClassState::Core {
            theta: 0.0,
            core_degree: 0
        };
        holder_classes.len()
    ];
    assets.states = vec![
        ClassState::Core {
            theta: 0.0,
            core_degree: 0
        };
        asset_classes.len()
    ];
    for (c, state) in &peel.holder_events {
        holders.states[*c] = *state;
    }
    for (c, state) in &peel.asset_events {
        assets.states[*c] = *state;
    }

    let core = CoreProblem {
        holder_ids: peel.core_holders.clone(),
        holder_counts: peel
            .core_holders
            .iter()
            .map(|&c| holder_classes.counts[c] as f64)
            .collect(),
        holder_residual: peel
            .core_holders
            .iter()
            .map(|&c| peel.holder_residual[c] as f64)
            .collect(),
        holder_original: peel
            .core_holders
            .iter()
            .map(|&c| holder_classes.degrees[c] as f64)
            .collect(),
        asset_ids: peel.core_assets.clone(),
        asset_counts: peel
            .core_assets
            .iter()
            .map(|&c| asset_classes.counts[c] as f64)
            .collect(),
        asset_residual: peel
            .core_assets
            .iter()
            .map(|&c| peel.asset_residual[c] as f64)
            .collect(),
        asset_original: peel
            .core_assets
            .iter()
            .map(|&c| asset_classes.degrees[c] as f64)
            .collect(),
    };

    let (solved, residual, iterations, trace) = if core.holder_ids.is_empty() {
        // Everything was forced; nothing left to solve.
        (CoreSolution::default(), 0.0, 0, Vec::new())
    } else {
        solve_core(&core, tol, max_iter)?
    };

    for (pos, &c) in core.holder_ids.iter().enumerate() {
        holders.states[c] = ClassState::Core {
            theta: solved.x[pos],
            core_degree: core.holder_residual[pos] as usize,
        };
    }
    for (pos, &c) in core.asset_ids.iter().enumerate() {
        assets.states[c] = ClassState::Core {
            theta: solved.y[pos],
            core_degree: core.asset_residual[pos] as usize,
        };
    }

    Ok((
        BiCMSolution {
            holder_degrees: deg.holder_degrees.clone(),
            asset_degrees: deg.asset_degrees.clone(),
            holders,
            assets,
            residual,
            iterations,
        },
        trace,
    ))
}

// ---------------------------------------------------------------------------
// Peeling
// ---------------------------------------------------------------------------

struct PeelOutcome {
    holder_events: Vec<(usize, ClassState)>,
    asset_events: Vec<(usize, ClassState)>,
    core_holders: Vec<usize>,
    core_assets: Vec<usize>,
    holder_residual: Vec<usize>,
    asset_residual: Vec<usize>,
}

/// Iteratively extract full-degree classes (forced edges) and zero-residual
/// classes (fully absorbed). Residual degrees track how much of each class
/// degree remains for the core solve.
fn peel_full_degree(
    holder_classes: &DegreeClasses,
    asset_classes: &DegreeClasses,
) -> Result<PeelOutcome> {
    let mut holder_residual: Vec<usize> = holder_classes.degrees.clone();
    let mut asset_residual: Vec<usize> = asset_classes.degrees.clone();
    let mut holder_alive = vec![true; holder_classes.len()];
    let mut asset_alive = vec![true; asset_classes.len()];
    let mut holder_events = Vec::new();
    let mut asset_events = Vec::new();
    let mut order = 0usize;

    loop {
        let core_holder_nodes: usize = holder_alive
            .iter()
            .zip(&holder_classes.counts)
            .filter_map(|(&alive, &n)| alive.then_some(n))
            .sum();
        let core_asset_nodes: usize = asset_alive
            .iter()
            .zip(&asset_classes.counts)
            .filter_map(|(&alive, &n)| alive.then_some(n))
            .sum();

        // Zero-residual classes drop first: all their degree is forced.
        if let Some(c) =
            (0..holder_classes.len()).find(|&c| holder_alive[c] && holder_residual[c] == 0)
        {
            holder_alive[c] = false;
            holder_events.push((c, ClassState::Dropped { order }));
            order += 1;
            continue;
        }
        if let Some(c) =
            (0..asset_classes.len()).find(|&c| asset_alive[c] && asset_residual[c] == 0)
        {
            asset_alive[c] = false;
            asset_events.push((c, ClassState::Dropped { order }));
            order += 1;
            continue;
        }

        // Full-degree classes peel: every remaining edge probability is one.
        if let Some(c) = (0..holder_classes.len())
            .find(|&c| holder_alive[c] && holder_residual[c] >= core_asset_nodes)
        {
            if holder_residual[c] > core_asset_nodes {
                return Err(Error::DegenerateInput(format!(
                    "holder degree {} exceeds remaining asset count {}",
                    holder_residual[c], core_asset_nodes
                )));
            }
            let count = holder_classes.counts[c];
            holder_alive[c] = false;
            holder_events.push((c, ClassState::Peeled { order }));
            order += 1;
            for (h, alive) in asset_alive.iter().enumerate() {
                if *alive {
                    asset_residual[h] = asset_residual[h].checked_sub(count).ok_or_else(|| {
                        Error::DegenerateInput("non-graphical degree sequence".into())
                    })?;
                }
            }
            continue;
        }
        if let Some(c) = (0..asset_classes.len())
            .find(|&c| asset_alive[c] && asset_residual[c] >= core_holder_nodes)
        {
            if asset_residual[c] > core_holder_nodes {
                return Err(Error::DegenerateInput(format!(
                    "asset degree {} exceeds remaining holder count {}",
                    asset_residual[c], core_holder_nodes
                )));
            }
            let count = asset_classes.counts[c];
            asset_alive[c] = false;
            asset_events.push((c, ClassState::Peeled { order }));
            order += 1;
            for (h, alive) in holder_alive.iter().enumerate() {
                if *alive {
                    holder_residual[h] =
                        holder_residual[h].checked_sub(count).ok_or_else(|| {
                            Error::DegenerateInput("non-graphical degree sequence".into())
                        })?;
                }
            }
            continue;
        }
        break;
    }

    Ok(PeelOutcome {
        core_holders: (0..holder_classes.len())
            .filter(|&c| holder_alive[c])
            .collect(),
        core_assets: (0..asset_classes.len())
            .filter(|&c| asset_alive[c])
            .collect(),
        holder_events,
        asset_events,
        holder_residual,
        asset_residual,
    })
}

// ---------------------------------------------------------------------------
// Core solver: damped fixed point with a Newton fallback on log-multipliers
// ---------------------------------------------------------------------------

struct CoreProblem {
    holder_ids: Vec<usize>,
    holder_counts: Vec<f64>,
    holder_residual: Vec<f64>,
    holder_original: Vec<f64>,
    asset_ids: Vec<usize>,
    asset_counts: Vec<f64>,
    asset_residual: Vec<f64>,
    asset_original: Vec<f64>,
}

#[derive(Default)]
struct CoreSolution {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Max relative error of expected class degrees against observed class
/// degrees (forced contributions are exact, so only the core part can err).
fn core_residual(core: &CoreProblem, x: &[f64], y: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let mut expected = KahanSum::new();
        for (j, &yj) in y.iter().enumerate() {
            let t = xi * yj;
            expected.add(core.asset_counts[j] * t / (1.0 + t));
        }
        let err = (expected.value() - core.holder_residual[i]).abs() / core.holder_original[i];
        worst = worst.max(err);
    }
    for (j, &yj) in y.iter().enumerate() {
        let mut expected = KahanSum::new();
        for (i, &xi) in x.iter().enumerate() {
            let t = xi * yj;
            expected.add(core.holder_counts[i] * t / (1.0 + t));
        }
        let err = (expected.value() - core.asset_residual[j]).abs() / core.asset_original[j];
        worst = worst.max(err);
    }
    worst
}

fn fixed_point_sweep(core: &CoreProblem, x: &mut [f64], y: &mut [f64], damping: f64) {
    for (i, xi) in x.iter_mut().enumerate() {
        let mut denom = KahanSum::new();
        for (j, &yj) in y.iter().enumerate() {
            denom.add(core.asset_counts[j] * yj / (1.0 + *xi * yj));
        }
        let proposal = core.holder_residual[i] / denom.value();
        *xi = if damping >= 1.0 {
            proposal
        } else {
            xi.powf(1.0 - damping) * proposal.powf(damping)
        };
    }
    for (j, yj) in y.iter_mut().enumerate() {
        let mut denom = KahanSum::new();
        for (i, &xi) in x.iter().enumerate() {
            denom.add(core.holder_counts[i] * xi / (1.0 + xi * *yj));
        }
        let proposal = core.asset_residual[j] / denom.value();
        *yj = if damping >= 1.0 {
            proposal
        } else {
            yj.powf(1.0 - damping) * proposal.powf(damping)
        };
    }
}

/// Newton step on log-multipliers with Levenberg-style diagonal damping.
/// Returns the proposed (x, y) or None if the linear solve degenerates.
fn newton_step(
    core: &CoreProblem,
    x: &[f64],
    y: &[f64],
    lambda: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let nc = x.len();
    let nh = y.len();
    let dim = nc + nh;
    let mut jac = vec![vec![0.0f64; dim]; dim];
    let mut rhs = vec![0.0f64; dim];

    for i in 0..nc {
        let mut f = KahanSum::new();
        for j in 0..nh {
            let t = x[i] * y[j];
            let q = t / (1.0 + t);
            let w = core.asset_counts[j] * q * (1.0 - q);
            f.add(core.asset_counts[j] * q);
            jac[i][i] += w;
            jac[i][nc + j] = w;
        }
        rhs[i] = core.holder_residual[i] - f.value();
    }
    for j in 0..nh {
        let mut f = KahanSum::new();
        for i in 0..nc {
            let t = x[i] * y[j];
            let q = t / (1.0 + t);
            let w = core.holder_counts[i] * q * (1.0 - q);
            f.add(core.holder_counts[i] * q);
            jac[nc + j][i] = w;
            jac[nc + j][nc + j] += w;
        }
        rhs[nc + j] = core.asset_residual[j] - f.value();
    }
    for (d, row) in jac.iter_mut().enumerate() {
        row[d] *= 1.0 + lambda;
        if row[d] == 0.0 {
            row[d] = 1e-12;
        }
    }

    let delta = solve_dense(&mut jac, &mut rhs)?;
    let cap = 10.0;
    let mut nx = x.to_vec();
    let mut ny = y.to_vec();
    for i in 0..nc {
        nx[i] = x[i] * delta[i].clamp(-cap, cap).exp();
    }
    for j in 0..nh {
        ny[j] = y[j] * delta[nc + j].clamp(-cap, cap).exp();
    }
    Some((nx, ny))
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
#[allow(clippy::needless_range_loop)]
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| {
            a[r1][col]
                .abs()
                .partial_cmp(&a[r2][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn solve_core(
    core: &CoreProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(CoreSolution, f64, usize, Vec<f64>)> {
    let links: f64 = core
        .holder_counts
        .iter()
        .zip(&core.holder_residual)
        .map(|(n, r)| n * r)
        .sum();
    let sqrt_l = links.sqrt().max(1.0);
    let mut x: Vec<f64> = core.holder_residual.iter().map(|&r| r / sqrt_l).collect();
    let mut y: Vec<f64> = core.asset_residual.iter().map(|&r| r / sqrt_l).collect();

    let mut residual = core_residual(core, &x, &y);
    let mut trace = vec![residual];
    let mut iterations = 0usize;
    let mut damping = 1.0f64;
    let mut lambda = 1e-6f64;
    let mut newton_mode = false;
    let mut since_big_improvement = 0usize;

    while residual > tol && iterations < max_iter {
        iterations += 1;
        let (cx, cy) = if newton_mode {
            match newton_step(core, &x, &y, lambda) {
                Some(step) => step,
                None => {
                    newton_mode = false;
                    damping = 0.5;
                    continue;
                }
            }
        } else {
            let mut nx = x.clone();
            let mut ny = y.clone();
            fixed_point_sweep(core, &mut nx, &mut ny, damping);
            (nx, ny)
        };

        let candidate = core_residual(core, &cx, &cy);
        if candidate < residual {
            if candidate < residual * (1.0 - 1e-3) {
                since_big_improvement = 0;
            } else {
                since_big_improvement += 1;
            }
            x = cx;
            y = cy;
            residual = candidate;
            trace.push(residual);
            if newton_mode {
                lambda = (lambda / 3.0).max(1e-12);
            } else {
                damping = (damping * 1.5).min(1.0);
                // Fixed point stalled: relative improvement under 1e-3 for
                // 50 accepted sweeps hands over to Newton.
                if since_big_improvement >= 50 {
                    newton_mode = true;
                    since_big_improvement = 0;
                }
            }
        } else if newton_mode {
            lambda *= 10.0;
            if lambda > 1e10 {
                newton_mode = false;
                lambda = 1e-6;
                damping = 0.25;
            }
        } else {
            damping *= 0.5;
            if damping < 1.0 / 64.0 {
                newton_mode = true;
                damping = 1.0;
            }
        }
    }

    if residual > tol {
        return Err(Error::FitNotConverged {
            residual,
            iterations,
        });
    }
    Ok((CoreSolution { x, y }, residual, iterations, trace))
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Tabular multiplier dump, one row per degree class: `layer,degree,theta`.
/// Peeled classes print `inf`, dropped classes `0`. A trailing comment line
/// carries residual and iteration count for audit.
pub fn write_solution(sol: &BiCMSolution, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "layer,degree,theta")?;
    let mut dump = |name: &str, layer: &SolvedLayer| -> std::io::Result<()> {
        for (c, &degree) in layer.degrees.iter().enumerate() {
            let theta = match layer.states[c] {
                ClassState::Core { theta, .. } => format!("{theta:e}"),
                ClassState::Peeled { .. } => "inf".to_string(),
                ClassState::Dropped { .. } => "0".to_string(),
            };
            writeln!(w, "{name},{degree},{theta}")?;
        }
        Ok(())
    };
    dump("holders", &sol.holders)?;
    dump("assets", &sol.assets)?;
    writeln!(
        w,
        "# residual={:e} iterations={}",
        sol.residual, sol.iterations
    )
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::graph::Snapshot;

    fn snapshot(entries: &[(&str, &str)]) -> Snapshot {
        Snapshot::from_entries(
            "2000Q1",
            entries
                .iter()
                .map(|(h, a)| (h.to_string(), a.to_string(), 1.0))
                .collect::<Vec<_>>(),
            false,
        )
        .unwrap()
    }

    fn complete(nh: usize, na: usize) -> Snapshot {
        let mut entries = Vec::new();
        for h in 0..nh {
            for a in 0..na {
                entries.push((format!("h{h:02}"), format!("a{a:02}"), 1.0));
            }
        }
        Snapshot::from_entries("2000Q1", entries, false).unwrap()
    }

    #[test]
    fn regular_graph_gives_uniform_q() {
        // 4 holders x 6 assets, every holder degree 3, every asset degree 2.
        let mut entries = Vec::new();
        for h in 0..4usize {
            for k in 0..3usize {
                entries.push((format!("h{h}"), format!("a{}", (3 * h + k) % 6), 1.0));
            }
        }
        let snap = Snapshot::from_entries("2000Q1", entries, false).unwrap();
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm(&deg, 1e-12, 20_000).unwrap();
        let expected = 12.0 / (4.0 * 6.0);
        for h in 0..4 {
            for a in 0..6 {
                let q = sol.connection_probability(h, a).unwrap();
                assert!((q - expected).abs() < 1e-10, "q={q} expected={expected}");
            }
        }
        assert!(sol.residual <= 1e-12);
        // Uniform Q = p makes the expected overlap |S| * p^2.
        let overlap = sol.expected_overlap(0, 1).unwrap();
        assert!((overlap - 6.0 * expected * expected).abs() < 1e-9);
    }

    #[test]
    fn probability_formula_points() {
        let core = |theta: f64| ClassState::Core {
            theta,
            core_degree: 1,
        };
        // theta = 0 gives Q = 0; theta product 1 gives Q = 1/2.
        assert_eq!(pair_probability(core(0.0), core(5.0)), 0.0);
        assert_eq!(pair_probability(core(2.0), core(0.5)), 0.5);
        assert_eq!(pair_complement(core(2.0), core(0.5)), 0.5);
    }

    #[test]
    fn sampled_mean_degrees_match_observed() {
        // Ensemble draws reproduce the degree sequence on average: each
        // node's sampled mean degree within 4 standard errors.
        let mut entries = Vec::new();
        for h in 0..12usize {
            let d = 2 + h % 5;
            for k in 0..d {
                entries.push((
                    format!("h{h:02}"),
                    format!("a{:02}", (h * 7 + k * 3) % 25),
                    1.0,
                ));
            }
        }
        entries.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        entries.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let snap = Snapshot::from_entries("2000Q1", entries, false).unwrap();
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm_default(&deg).unwrap();
        let samples = 20_000usize;
        let mut degree_sum = vec![0u64; snap.num_holders()];
        let mut rng = seeded_rng(77, 0);
        for _ in 0..samples {
            for (h, _) in sol.sample_edges(&mut rng) {
                degree_sum[h] += 1;
            }
        }
        for h in 0..snap.num_holders() {
            let observed = deg.holder_degrees[h] as f64;
            let mean = degree_sum[h] as f64 / samples as f64;
            // Degree variance is at most the expected degree.
            let se = (observed / samples as f64).sqrt();
            assert!(
                (mean - observed).abs() <= 4.0 * se,
                "holder {h}: sampled mean {mean:.4} vs observed {observed} (se {se:.4})"
            );
        }
    }

    #[test]
    fn star_is_fully_forced() {
        // 1 holder owning all 10 assets, each asset degree 1.
        let entries: Vec<(String, String, f64)> = (0..10)
            .map(|a| ("h0".to_string(), format!("a{a}"), 1.0))
            .collect();
        let snap = Snapshot::from_entries("2000Q1", entries, false).unwrap();
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm_default(&deg).unwrap();
        for a in 0..10 {
            assert_eq!(sol.connection_probability(0, a).unwrap(), 1.0);
        }
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn complete_graph_expected_overlap_is_asset_count() {
        let snap = complete(4, 6);
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        assert_eq!(sol.expected_overlap(0, 1).unwrap(), 6.0);
    }

    #[test]
    fn equal_degree_holders_share_q() {
        let snap = snapshot(&[
            ("h0", "a0"),
            ("h0", "a1"),
            ("h1", "a0"),
            ("h1", "a2"),
            ("h2", "a1"),
            ("h2", "a2"),
            ("h3", "a0"),
        ]);
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        for a in 0..3 {
            let q0 = sol.connection_probability(0, a).unwrap();
            let q1 = sol.connection_probability(1, a).unwrap();
            let q2 = sol.connection_probability(2, a).unwrap();
            assert_eq!(q0, q1);
            assert_eq!(q1, q2);
        }
    }

    #[test]
    fn unknown_node_is_error() {
        let snap = complete(2, 2);
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        assert!(matches!(
            sol.connection_probability(5, 0),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            sol.expected_overlap(0, 9),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn expected_degrees_match_observed() {
        // Heterogeneous hand-made instance.
        let snap = snapshot(&[
            ("h0", "a0"),
            ("h0", "a1"),
            ("h0", "a2"),
            ("h0", "a3"),
            ("h1", "a0"),
            ("h1", "a1"),
            ("h2", "a0"),
            ("h3", "a2"),
            ("h3", "a4"),
            ("h4", "a4"),
            ("h4", "a0"),
            ("h4", "a5"),
        ]);
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm(&deg, 1e-10, 20_000).unwrap();
        let (he, ae) = sol.expected_degrees();
        for (h, &expected) in he.iter().enumerate() {
            let observed = deg.holder_degrees[h] as f64;
            assert!(
                (expected - observed).abs() / observed <= 1e-9,
                "holder {h}: {expected} vs {observed}"
            );
        }
        for (a, &expected) in ae.iter().enumerate() {
            let observed = deg.asset_degrees[a] as f64;
            assert!(
                (expected - observed).abs() / observed <= 1e-9,
                "asset {a}: {expected} vs {observed}"
            );
        }
    }

    #[test]
    fn residual_trace_is_non_increasing() {
        let snap = snapshot(&[
            ("h0", "a0"),
            ("h0", "a1"),
            ("h0", "a2"),
            ("h1", "a0"),
            ("h1", "a3"),
            ("h2", "a1"),
            ("h3", "a3"),
            ("h3", "a0"),
        ]);
        let (_, trace) =
            fit_bicm_traced(&snap.degree_sequence(Layer::Holders), 1e-10, 10_000).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "residual increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn permuting_ids_leaves_q_attached_to_nodes() {
        let entries = [
            ("zeta", "m2"),
            ("zeta", "m3"),
            ("alpha", "m1"),
            ("alpha", "m2"),
            ("alpha", "m3"),
            ("mike", "m1"),
        ];
        let snap = snapshot(&entries);
        let renamed: Vec<(String, String, f64)> = entries
            .iter()
            .map(|(h, a)| (format!("renamed-{h}"), a.to_string(), 1.0))
            .collect();
        let snap2 = Snapshot::from_entries("2000Q1", renamed, false).unwrap();
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        let sol2 = fit_bicm_default(&snap2.degree_sequence(Layer::Holders)).unwrap();
        for (id, id2) in snap
            .holder_ids()
            .iter()
            .map(|h| (h.clone(), format!("renamed-{h}")))
        {
            let h = snap.holder_index_of(&id).unwrap();
            let h2 = snap2.holder_index_of(&id2).unwrap();
            for (a, asset) in snap.asset_ids().iter().enumerate() {
                let a2 = snap2.asset_index_of(asset).unwrap();
                let q = sol.connection_probability(h, a).unwrap();
                let q2 = sol2.connection_probability(h2, a2).unwrap();
                assert!((q - q2).abs() < 1e-12);
            }
        }
    }

    /// Unreduced reference solver: one multiplier per node, no class
    /// grouping, plain fixed point. Used to pin the class reduction.
    fn reference_q(deg: &DegreeSequence) -> Vec<Vec<f64>> {
        let dh: Vec<f64> = deg.holder_degrees.iter().map(|&d| d as f64).collect();
        let da: Vec<f64> = deg.asset_degrees.iter().map(|&d| d as f64).collect();
        let l: f64 = dh.iter().sum();
        let mut x: Vec<f64> = dh.iter().map(|d| d / l.sqrt()).collect();
        let mut y: Vec<f64> = da.iter().map(|d| d / l.sqrt()).collect();
        for _ in 0..200_000 {
            let mut worst: f64 = 0.0;
            for i in 0..x.len() {
                let denom: f64 = y.iter().map(|&yj| yj / (1.0 + x[i] * yj)).sum();
                let next = dh[i] / denom;
                worst = worst.max((next - x[i]).abs() / x[i].max(1e-300));
                x[i] = next;
            }
            for j in 0..y.len() {
                let denom: f64 = x.iter().map(|&xi| xi / (1.0 + xi * y[j])).sum();
                let next = da[j] / denom;
                worst = worst.max((next - y[j]).abs() / y[j].max(1e-300));
                y[j] = next;
            }
            if worst < 1e-13 {
                break;
            }
        }
        x.iter()
            .map(|&xi| y.iter().map(|&yj| xi * yj / (1.0 + xi * yj)).collect())
            .collect()
    }

    #[test]
    fn class_reduction_matches_unreduced_solver() {
        // Instances without full-degree nodes, up to 30 nodes total.
        let fixtures: Vec<Vec<(&str, &str)>> = vec![
            vec![
                ("h0", "a0"),
                ("h0", "a1"),
                ("h1", "a1"),
                ("h1", "a2"),
                ("h2", "a0"),
                ("h2", "a2"),
                ("h3", "a0"),
                ("h3", "a1"),
                ("h3", "a3"),
            ],
            vec![
                ("h0", "a0"),
                ("h0", "a1"),
                ("h0", "a2"),
                ("h0", "a3"),
                ("h1", "a0"),
                ("h1", "a1"),
                ("h2", "a2"),
                ("h2", "a3"),
                ("h3", "a4"),
                ("h3", "a0"),
                ("h4", "a4"),
                ("h4", "a5"),
                ("h5", "a5"),
                ("h5", "a1"),
                ("h6", "a0"),
                ("h6", "a5"),
            ],
        ];
        for entries in fixtures {
            let snap = snapshot(&entries);
            let deg = snap.degree_sequence(Layer::Holders);
            let sol = fit_bicm(&deg, 1e-12, 50_000).unwrap();
            let reference = reference_q(&deg);
            for h in 0..snap.num_holders() {
                for a in 0..snap.num_assets() {
                    let q = sol.connection_probability(h, a).unwrap();
                    assert!(
                        (q - reference[h][a]).abs() < 1e-6,
                        "Q mismatch at ({h},{a}): {q} vs {}",
                        reference[h][a]
                    );
                }
            }
        }
    }

    #[test]
    fn sampling_respects_degenerate_probabilities() {
        let snap = complete(3, 4);
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        let mut rng = seeded_rng(1, 0);
        let edges = sol.sample_edges(&mut rng);
        assert_eq!(edges.len(), 12); // all Q = 1
        let sample = sample_snapshot(&snap, &sol, 9).unwrap();
        assert_eq!(sample.num_links(), 12);
        assert!(sample.is_binary_only());
    }

    #[test]
    fn stiff_near_full_degree_instance_converges() {
        // One holder owning 99% of a large asset layer stresses the solver:
        // its multiplier is huge and the fixed point crawls, so the stall
        // detector and Newton fallback carry the fit home.
        let mut entries = Vec::new();
        for a in 0..990usize {
            entries.push(("whale".to_string(), format!("a{a:04}"), 1.0));
        }
        for h in 0..120usize {
            for k in 0..3usize {
                entries.push((
                    format!("minnow{h:03}"),
                    format!("a{:04}", (h * 37 + k * 11) % 1000),
                    1.0,
                ));
            }
        }
        entries.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        entries.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let snap = Snapshot::from_entries("stiff", entries, false).unwrap();
        let deg = snap.degree_sequence(Layer::Holders);
        let sol = fit_bicm(&deg, 1e-8, 10_000).unwrap();
        let (holder_expected, asset_expected) = sol.expected_degrees();
        for (h, &expected) in holder_expected.iter().enumerate() {
            let observed = deg.holder_degrees[h] as f64;
            assert!((expected - observed).abs() / observed <= 1e-7);
        }
        for (a, &expected) in asset_expected.iter().enumerate() {
            let observed = deg.asset_degrees[a] as f64;
            assert!((expected - observed).abs() / observed <= 1e-7);
        }
    }

    #[test]
    fn newton_step_contracts_inside_its_basin() {
        // Once fixed-point sweeps have brought the state near the solution,
        // a lightly damped Newton step contracts the residual sharply
        // (quadratic regime). Far from the solution the outer loop is
        // responsible for rejecting bad steps, not this one.
        let core = CoreProblem {
            holder_ids: vec![0, 1],
            holder_counts: vec![8.0, 2.0],
            holder_residual: vec![3.0, 12.0],
            holder_original: vec![3.0, 12.0],
            asset_ids: vec![0, 1],
            asset_counts: vec![30.0, 10.0],
            asset_residual: vec![1.0, 1.8],
            asset_original: vec![1.0, 1.8],
        };
        let links: f64 = 48.0;
        let mut x: Vec<f64> = core
            .holder_residual
            .iter()
            .map(|r| r / links.sqrt())
            .collect();
        let mut y: Vec<f64> = core
            .asset_residual
            .iter()
            .map(|r| r / links.sqrt())
            .collect();
        for _ in 0..6 {
            fixed_point_sweep(&core, &mut x, &mut y, 1.0);
        }
        let before = core_residual(&core, &x, &y);
        assert!(before < 0.1, "fixed point should be near the solution");
        let (nx, ny) = newton_step(&core, &x, &y, 1e-6).expect("solvable system");
        let after = core_residual(&core, &nx, &ny);
        assert!(
            after < before / 5.0,
            "newton step must contract near the solution: {before} -> {after}"
        );
        assert!(nx.iter().chain(&ny).all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn solution_dump_has_summary() {
        let snap = complete(2, 3);
        let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders)).unwrap();
        let mut buf = Vec::new();
        write_solution(&sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("layer,degree,theta\n"));
        assert!(text.contains("holders,3,inf"));
        assert!(text.lines().last().unwrap().starts_with("# residual="));
    }

    #[test]
    fn empty_layer_is_error() {
        let deg = DegreeSequence {
            projected: Layer::Holders,
            holder_degrees: vec![],
            asset_degrees: vec![],
            classes: DegreeClasses::from_degrees(Layer::Assets, &[]),
        };
        assert!(matches!(
            fit_bicm_default(&deg),
            Err(Error::DegenerateInput(_))
        ));
    }
}
