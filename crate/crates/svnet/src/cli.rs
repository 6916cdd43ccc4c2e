//! Command orchestration behind the `svnet` binary: ingest, fit, validate,
//! analyze, delta construction, synthetic generation and oracle checks,
//! each with deterministic file outputs.
//!
//! Determinism contract: given equal inputs, seed and parameters, every
//! output file is byte-identical regardless of worker count. Parallelism is
//! confined to pair-level p-values and oracle sampling; results are
//! collected and canonically sorted before writing, and worker counts never
//! appear in any output.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, cross_correlation, distress_report, internal_degree, overlap_share_split,
    portfolio_metrics, returns_regression, security_regressions, security_validation_stats,
    DistressRanking,
};
use crate::bicm::{fit_bicm_default, write_solution};
use crate::error::{Error, Result};
use crate::graph::{
    delta_networks, load_market_returns, load_snapshot_from_path, AssetMetaTable, HolderMetaTable,
    Layer, OverlapRecord, Snapshot,
};
use crate::numeric::seeded_rng;
use crate::pvalue::{Backend, PValueEngine};
use crate::report::{fmt_e, fmt_g, fmt_opt, out_path, Manifest, Table};
use crate::synth::{
    exhaustive_overlap_oracle, generate, generate_metadata, tail_estimate, DegreeLaw, SynthSpec,
};
use crate::validator::{
    validate_snapshot_full, validated_stats, CorrectionMethod, GroupLabels, ValidationConfig,
    ValidationOutcome,
};

/// Everything a run needs. Field defaults match the paper-style workflow:
/// holder-layer Bonferroni validation at epsilon 1e-3 with the exact
/// backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Snapshot CSV paths; the date label is the file stem.
    pub snapshots: Vec<PathBuf>,
    pub holder_meta: Option<PathBuf>,
    /// Asset metadata files, one per date, stem `<date>` or `<date>.assets`.
    pub asset_meta: Vec<PathBuf>,
    pub market_returns: Option<PathBuf>,
    pub layer: Layer,
    pub method: CorrectionMethod,
    pub epsilon: f64,
    pub backend: Backend,
    /// Distressed-set size (the paper's headline uses 300).
    pub distress_n: usize,
    pub distress_ranking: DistressRanking,
    /// Distress horizon in snapshots (1 = consecutive).
    pub dt: usize,
    pub r_max: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    /// Also write per-pair p-value tables next to edge lists.
    pub emit_pvalues: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            snapshots: Vec::new(),
            holder_meta: None,
            asset_meta: Vec::new(),
            market_returns: None,
            layer: Layer::Holders,
            method: CorrectionMethod::Bonferroni,
            epsilon: 1e-3,
            backend: Backend::Exact,
            distress_n: 300,
            distress_ranking: DistressRanking::Dollar,
            dt: 1,
            r_max: 0.2,
            out_dir: PathBuf::from("svnet-out"),
            seed: 42,
            workers: 1,
            emit_pvalues: false,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if self.distress_n == 0 {
            return Err(Error::InvalidConfig("distress size must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("worker count must be >= 1".into()));
        }
        if self.dt == 0 {
            return Err(Error::InvalidConfig("dt must be >= 1".into()));
        }
        if self.backend == Backend::Hypergeometric {
            return Err(Error::InvalidConfig(
                "hypergeometric is a comparison baseline, not a validation backend".into(),
            ));
        }
        for path in self
            .snapshots
            .iter()
            .chain(&self.asset_meta)
            .chain(&self.holder_meta)
            .chain(&self.market_returns)
        {
            if !path.exists() {
                return Err(Error::InvalidConfig(format!(
                    "input path does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    fn validation(&self) -> ValidationConfig {
        ValidationConfig {
            method: self.method,
            epsilon: self.epsilon,
            backend: self.backend,
        }
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .expect("worker pool")
    }
}

/// Date label of an input file: the stem, minus a `.assets`/`.holders`
/// marker if present.
pub fn date_of_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for marker in [".assets", ".holders"] {
        if let Some(prefix) = stem.strip_suffix(marker) {
            return prefix.to_string();
        }
    }
    stem
}

fn sorted_snapshot_paths(cfg: &RunConfig) -> Vec<PathBuf> {
    let mut paths = cfg.snapshots.clone();
    paths.sort_by_key(|p| date_of_path(p));
    paths
}

fn load_holder_meta(cfg: &RunConfig) -> Result<Option<HolderMetaTable>> {
    cfg.holder_meta
        .as_deref()
        .map(HolderMetaTable::load_from_path)
        .transpose()
}

fn asset_meta_by_date(cfg: &RunConfig) -> Result<HashMap<String, AssetMetaTable>> {
    let mut map = HashMap::new();
    for path in &cfg.asset_meta {
        map.insert(date_of_path(path), AssetMetaTable::load_from_path(path)?);
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Sidecar written next to every edge list.
#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    date: &'a str,
    layer: Layer,
    method: CorrectionMethod,
    epsilon: f64,
    n_tests: usize,
    p_star: f64,
    fit_residual: f64,
    edge_count: usize,
    node_count: usize,
}

/// Outcome of a multi-date command: per-date failures do not abort the run.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub processed: Vec<String>,
    pub failures: Vec<(String, Error)>,
}

impl RunSummary {
    /// Exit code: 0 when clean, otherwise the first failure's class.
    pub fn exit_code(&self) -> i32 {
        self.failures
            .first()
            .map(|(_, e)| e.exit_code())
            .unwrap_or(0)
    }
}

fn edges_table(outcome: &ValidationOutcome) -> Table {
    let net = &outcome.network;
    let mut table = Table::new(&["node_a", "node_b", "overlap", "p_value"]);
    for e in &net.edges {
        table.push(vec![
            net.node_ids[e.a].clone(),
            net.node_ids[e.b].clone(),
            e.overlap.to_string(),
            fmt_e(e.p_value),
        ]);
    }
    table
}

fn pvalues_table(outcome: &ValidationOutcome) -> Table {
    let net = &outcome.network;
    let mut table = Table::new(&["node_a", "node_b", "overlap", "p_value", "backend"]);
    for r in &outcome.pvalues {
        table.push(vec![
            net.node_ids[r.a].clone(),
            net.node_ids[r.b].clone(),
            r.overlap.to_string(),
            fmt_e(r.p_value),
            r.backend.to_string(),
        ]);
    }
    table
}

/// Validate every snapshot and write per-date edge lists plus JSON sidecars.
pub fn cmd_validate(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.check()?;
    if cfg.snapshots.is_empty() {
        return Err(Error::InvalidConfig("no snapshot inputs given".into()));
    }
    let pool = cfg.pool();
    let mut summary = RunSummary::default();
    let mut manifest = Manifest::new("validate");
    manifest
        .param("layer", cfg.layer.to_string())
        .param("method", cfg.method.to_string())
        .param("epsilon", cfg.epsilon)
        .param("backend", cfg.backend.to_string())
        .param("seed", cfg.seed);

    for path in sorted_snapshot_paths(cfg) {
        let date = date_of_path(&path);
        manifest.input(&path)?;
        let result = load_snapshot_from_path(&path, &date).and_then(|snap| {
            pool.install(|| validate_snapshot_full(&snap, cfg.layer, &cfg.validation()))
        });
        let outcome = match result {
            Ok(outcome) => outcome,
            Err(err) => {
                eprintln!("validate {date}: FAILED: {err}");
                manifest.failure(format!("{date}: {err}"));
                summary.failures.push((date, err));
                continue;
            }
        };
        let net = &outcome.network;
        let edges_path = out_path(&cfg.out_dir, &format!("{date}_{}_edges.csv", cfg.layer))?;
        edges_table(&outcome).write_to_path(&edges_path)?;
        manifest.output(&edges_path);

        let sidecar_path = out_path(&cfg.out_dir, &format!("{date}_{}_meta.json", cfg.layer))?;
        let sidecar = Sidecar {
            date: &net.date,
            layer: net.layer,
            method: net.meta.method,
            epsilon: net.meta.epsilon,
            n_tests: net.meta.n_tests,
            p_star: net.meta.p_star,
            fit_residual: net.meta.fit_residual,
            edge_count: net.edges.len(),
            node_count: net.node_ids.len(),
        };
        std::fs::write(
            &sidecar_path,
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n",
        )
        .map_err(|e| Error::io(sidecar_path.display().to_string(), e))?;
        manifest.output(&sidecar_path);

        if cfg.emit_pvalues {
            let p_path = out_path(&cfg.out_dir, &format!("{date}_{}_pvalues.csv", cfg.layer))?;
            pvalues_table(&outcome).write_to_path(&p_path)?;
            manifest.output(&p_path);
        }
        eprintln!(
            "validate {date}: {} nodes, {} tested pairs, {} validated edges",
            net.node_ids.len(),
            net.meta.n_tests,
            net.edges.len()
        );
        summary.processed.push(date);
    }
    manifest.write(out_path(&cfg.out_dir, "validate_manifest.json")?)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Fit the null model per snapshot and dump multipliers for audit.
pub fn cmd_fit(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.check()?;
    let mut summary = RunSummary::default();
    let mut manifest = Manifest::new("fit");
    manifest.param("layer", cfg.layer.to_string());
    for path in sorted_snapshot_paths(cfg) {
        let date = date_of_path(&path);
        manifest.input(&path)?;
        let result = load_snapshot_from_path(&path, &date).and_then(|snap| {
            let deg = snap.degree_sequence(cfg.layer);
            fit_bicm_default(&deg)
        });
        match result {
            Ok(sol) => {
                let dump_path = out_path(&cfg.out_dir, &format!("{date}_{}_bicm.csv", cfg.layer))?;
                let mut buf = Vec::new();
                write_solution(&sol, &mut buf)
                    .map_err(|e| Error::io(dump_path.display().to_string(), e))?;
                std::fs::write(&dump_path, buf)
                    .map_err(|e| Error::io(dump_path.display().to_string(), e))?;
                manifest.output(&dump_path);
                eprintln!(
                    "fit {date}: residual {:e} after {} iterations",
                    sol.residual, sol.iterations
                );
                summary.processed.push(date);
            }
            Err(err) => {
                eprintln!("fit {date}: FAILED: {err}");
                manifest.failure(format!("{date}: {err}"));
                summary.failures.push((date, err));
            }
        }
    }
    manifest.write(out_path(&cfg.out_dir, "fit_manifest.json")?)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// delta
// ---------------------------------------------------------------------------

/// Build buy/sell networks for consecutive snapshot pairs, optionally
/// restricted to one holder type.
pub fn cmd_delta(cfg: &RunConfig, holder_type: Option<&str>) -> Result<RunSummary> {
    cfg.check()?;
    let paths = sorted_snapshot_paths(cfg);
    if paths.len() < 2 {
        return Err(Error::InvalidConfig(
            "delta needs at least two snapshots".into(),
        ));
    }
    let holder_meta = load_holder_meta(cfg)?;
    if holder_type.is_some() && holder_meta.is_none() {
        return Err(Error::InvalidConfig(
            "holder-type restriction needs --holder-meta".into(),
        ));
    }
    let mut summary = RunSummary::default();
    let mut manifest = Manifest::new("delta");
    if let Some(t) = holder_type {
        manifest.param("holder_type", t);
    }
    let mut prev: Option<Snapshot> = None;
    for path in paths {
        let date = date_of_path(&path);
        manifest.input(&path)?;
        let mut snap = load_snapshot_from_path(&path, &date)?;
        if let (Some(kind), Some(meta)) = (holder_type, holder_meta.as_ref()) {
            snap = snap.restrict(|id| meta.kind(id) == Some(kind));
        }
        if let Some(prev_snap) = prev.take() {
            let label = format!("{}_to_{}", prev_snap.date(), snap.date());
            match delta_networks(&prev_snap, &snap) {
                Ok((buy, sell)) => {
                    let buy_path = out_path(&cfg.out_dir, &format!("{label}_buy.csv"))?;
                    buy.write_canonical_to_path(&buy_path)?;
                    let sell_path = out_path(&cfg.out_dir, &format!("{label}_sell.csv"))?;
                    sell.write_canonical_to_path(&sell_path)?;
                    manifest.output(&buy_path).output(&sell_path);
                    eprintln!(
                        "delta {label}: {} buys, {} sells",
                        buy.num_links(),
                        sell.num_links()
                    );
                    summary.processed.push(label);
                }
                Err(err) => {
                    eprintln!("delta {label}: FAILED: {err}");
                    manifest.failure(format!("{label}: {err}"));
                    summary.failures.push((label, err));
                }
            }
        }
        prev = Some(snap);
    }
    manifest.write(out_path(&cfg.out_dir, "delta_manifest.json")?)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Manifest for a generated fixture: the spec plus where planted structure
/// ended up.
#[derive(Debug, Serialize)]
struct SynthManifest<'a> {
    spec: &'a SynthSpec,
    planted: &'a [crate::synth::PlantedNodes],
    outputs: Vec<String>,
}

/// Generate a synthetic snapshot (and optional metadata) from a spec.
pub fn cmd_synth(cfg: &RunConfig, spec: &SynthSpec, categories: usize) -> Result<()> {
    let fixture = generate(spec)?;
    let snap = &fixture.snapshot;
    let snap_path = out_path(&cfg.out_dir, &format!("{}.csv", snap.date()))?;
    snap.write_canonical_to_path(&snap_path)?;
    let name_of = |p: &std::path::Path| {
        p.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let mut outputs = vec![name_of(&snap_path)];

    if categories > 0 {
        let (holder_meta_table, asset_meta_table) = generate_metadata(snap, spec.seed, categories);
        let holders_path = out_path(&cfg.out_dir, &format!("{}.holders.csv", snap.date()))?;
        let mut t = Table::new(&["holder_id", "type"]);
        for id in snap.holder_ids() {
            t.push(vec![
                id.clone(),
                holder_meta_table.kind_or_other(id).to_string(),
            ]);
        }
        t.write_to_path(&holders_path)?;
        outputs.push(name_of(&holders_path));

        let assets_path = out_path(&cfg.out_dir, &format!("{}.assets.csv", snap.date()))?;
        let mut t = Table::new(&["asset_id", "price", "outstanding", "category"]);
        for id in snap.asset_ids() {
            let meta = asset_meta_table.get(id).expect("generated meta");
            t.push(vec![
                id.clone(),
                fmt_opt(meta.price),
                fmt_opt(meta.outstanding),
                meta.category.clone().unwrap_or_default(),
            ]);
        }
        t.write_to_path(&assets_path)?;
        outputs.push(name_of(&assets_path));
    }

    let manifest_path = out_path(&cfg.out_dir, "synth_manifest.json")?;
    let manifest = SynthManifest {
        spec,
        planted: &fixture.planted,
        outputs,
    };
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    eprintln!(
        "synth {}: {} holders, {} assets, {} links",
        snap.date(),
        snap.num_holders(),
        snap.num_assets(),
        snap.num_links()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// timeseries
// ---------------------------------------------------------------------------

fn flatten_timeseries(rows: &[analytics::TimeseriesRow]) -> Table {
    let mut type_labels: BTreeSet<String> = BTreeSet::new();
    for row in rows {
        type_labels.extend(row.per_type.keys().cloned());
    }
    let mut headers = vec![
        "date".to_string(),
        "holders".to_string(),
        "assets".to_string(),
        "links".to_string(),
        "market_value".to_string(),
        "validated_fraction".to_string(),
        "avg_validated_degree".to_string(),
        "edge_count".to_string(),
    ];
    headers.extend(type_labels.iter().map(|t| format!("validated_{t}")));
    let mut table = Table::new(&headers);
    for row in rows {
        let mut cells = vec![
            row.date.clone(),
            row.holders.to_string(),
            row.assets.to_string(),
            row.links.to_string(),
            fmt_opt(row.market_value),
            fmt_g(row.validated_fraction),
            fmt_g(row.avg_validated_degree),
            row.edge_count.to_string(),
        ];
        for label in &type_labels {
            cells.push(
                row.per_type
                    .get(label)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        table.push(cells);
    }
    table
}

/// Per-date aggregate table; in delta mode, per-transition buy/sell tables
/// plus the lagged cross-correlation of their average validated degrees.
pub fn cmd_timeseries(cfg: &RunConfig, delta_mode: bool) -> Result<RunSummary> {
    cfg.check()?;
    let paths = sorted_snapshot_paths(cfg);
    if paths.is_empty() {
        return Err(Error::InvalidConfig("no snapshot inputs given".into()));
    }
    let holder_meta = load_holder_meta(cfg)?;
    let metas = asset_meta_by_date(cfg)?;
    let pool = cfg.pool();
    let mut summary = RunSummary::default();
    let mut manifest = Manifest::new(if delta_mode {
        "timeseries-delta"
    } else {
        "timeseries"
    });
    manifest
        .param("layer", cfg.layer.to_string())
        .param("method", cfg.method.to_string())
        .param("epsilon", cfg.epsilon);

    let mut snaps = Vec::new();
    for path in &paths {
        let date = date_of_path(path);
        manifest.input(path)?;
        snaps.push(load_snapshot_from_path(path, &date)?);
    }

    if !delta_mode {
        let mut nets = Vec::new();
        for snap in &snaps {
            let net = pool.install(|| {
                validate_snapshot_full(snap, cfg.layer, &cfg.validation()).map(|o| o.network)
            })?;
            nets.push(net);
            summary.processed.push(snap.date().to_string());
        }
        let meta_list: Option<Vec<AssetMetaTable>> = if metas.is_empty() {
            None
        } else {
            let mut list = Vec::new();
            for snap in &snaps {
                match metas.get(snap.date()) {
                    Some(m) => list.push(m.clone()),
                    None => {
                        eprintln!(
                            "warning: no asset metadata for {}, market value skipped",
                            snap.date()
                        );
                        list.clear();
                        break;
                    }
                }
            }
            (!list.is_empty()).then_some(list)
        };
        let rows =
            analytics::timeseries(&snaps, &nets, meta_list.as_deref(), holder_meta.as_ref())?;
        let table_path = out_path(&cfg.out_dir, "timeseries.csv")?;
        flatten_timeseries(&rows).write_to_path(&table_path)?;
        manifest.output(&table_path);
        manifest.write(out_path(&cfg.out_dir, "timeseries_manifest.json")?)?;
        return Ok(summary);
    }

    // Buy/sell variant.
    if snaps.len() < 2 {
        return Err(Error::InvalidConfig(
            "delta timeseries needs at least two snapshots".into(),
        ));
    }
    let mut table = Table::new(&[
        "date_from",
        "date_to",
        "buy_links",
        "sell_links",
        "buy_validated_fraction",
        "buy_avg_validated_degree",
        "sell_validated_fraction",
        "sell_avg_validated_degree",
    ]);
    let mut buy_degrees = Vec::new();
    let mut sell_degrees = Vec::new();
    for window in snaps.windows(2) {
        let label = format!("{}..{}", window[0].date(), window[1].date());
        let (buy, sell) = delta_networks(&window[0], &window[1])?;
        let side = |snap: &Snapshot| -> Result<(f64, f64, usize)> {
            if snap.num_holders() < 2 {
                return Ok((0.0, 0.0, snap.num_links()));
            }
            let net = pool.install(|| {
                validate_snapshot_full(snap, cfg.layer, &cfg.validation()).map(|o| o.network)
            })?;
            let stats = validated_stats(&net, GroupLabels::None);
            Ok((
                stats.validated_fraction,
                stats.avg_validated_degree,
                snap.num_links(),
            ))
        };
        match side(&buy).and_then(|b| side(&sell).map(|s| (b, s))) {
            Ok(((b_frac, b_deg, b_links), (s_frac, s_deg, s_links))) => {
                buy_degrees.push(b_deg);
                sell_degrees.push(s_deg);
                table.push(vec![
                    window[0].date().to_string(),
                    window[1].date().to_string(),
                    b_links.to_string(),
                    s_links.to_string(),
                    fmt_g(b_frac),
                    fmt_g(b_deg),
                    fmt_g(s_frac),
                    fmt_g(s_deg),
                ]);
                summary.processed.push(label);
            }
            Err(err) => {
                eprintln!("timeseries {label}: FAILED: {err}");
                manifest.failure(format!("{label}: {err}"));
                summary.failures.push((label, err));
            }
        }
    }
    let table_path = out_path(&cfg.out_dir, "timeseries_delta.csv")?;
    table.write_to_path(&table_path)?;
    manifest.output(&table_path);

    if buy_degrees.len() >= 3 {
        let max_lag = (buy_degrees.len() - 2).min(4);
        let ccf = cross_correlation(&buy_degrees, &sell_degrees, max_lag);
        let mut ccf_table = Table::new(&["lag", "correlation"]);
        for (lag, corr) in ccf {
            ccf_table.push(vec![lag.to_string(), fmt_opt(corr)]);
        }
        let ccf_path = out_path(&cfg.out_dir, "crosscorr.csv")?;
        ccf_table.write_to_path(&ccf_path)?;
        manifest.output(&ccf_path);
    }
    manifest.write(out_path(&cfg.out_dir, "timeseries_manifest.json")?)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

/// Which analyses to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analysis {
    Weights,
    Securities,
    Distress,
    Returns,
    Internal,
}

impl std::str::FromStr for Analysis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(Analysis::Weights),
            "securities" => Ok(Analysis::Securities),
            "distress" => Ok(Analysis::Distress),
            "returns" => Ok(Analysis::Returns),
            "internal" => Ok(Analysis::Internal),
            other => Err(Error::InvalidConfig(format!("unknown analysis {other:?}"))),
        }
    }
}

pub const ALL_ANALYSES: [Analysis; 5] = [
    Analysis::Weights,
    Analysis::Securities,
    Analysis::Distress,
    Analysis::Returns,
    Analysis::Internal,
];

/// Run the portfolio/security/distress/returns/internal-degree analyses
/// over the snapshot series. Analyses whose metadata is missing are skipped
/// with a warning rather than failing the run.
pub fn cmd_analyze(cfg: &RunConfig, analyses: &[Analysis]) -> Result<RunSummary> {
    cfg.check()?;
    let paths = sorted_snapshot_paths(cfg);
    if paths.is_empty() {
        return Err(Error::InvalidConfig("no snapshot inputs given".into()));
    }
    let metas = asset_meta_by_date(cfg)?;
    let market = cfg
        .market_returns
        .as_deref()
        .map(|p| {
            let file = std::fs::File::open(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            load_market_returns(file, &p.display().to_string())
        })
        .transpose()?;
    let pool = cfg.pool();
    let mut summary = RunSummary::default();
    let mut manifest = Manifest::new("analyze");
    manifest
        .param("epsilon", cfg.epsilon)
        .param("method", cfg.method.to_string())
        .param("r_max", cfg.r_max)
        .param("distress_n", cfg.distress_n as u64)
        .param("dt", cfg.dt as u64);

    let mut snaps = Vec::new();
    for path in &paths {
        manifest.input(path)?;
        snaps.push(load_snapshot_from_path(path, &date_of_path(path))?);
    }
    let skip = |manifest: &mut Manifest, what: &str, why: &str| {
        eprintln!("warning: skipping {what}: {why}");
        manifest.failure(format!("skipped {what}: {why}"));
    };

    // Holder-layer validated networks are shared by most analyses.
    let mut nets = Vec::new();
    for snap in &snaps {
        let net = pool.install(|| {
            validate_snapshot_full(snap, Layer::Holders, &cfg.validation()).map(|o| o.network)
        })?;
        nets.push(net);
    }

    let meta_for = |snap: &Snapshot| -> Option<&AssetMetaTable> { metas.get(snap.date()) };

    if analyses.contains(&Analysis::Weights) {
        for (snap, net) in snaps.iter().zip(&nets) {
            let Some(meta) = meta_for(snap) else {
                skip(
                    &mut manifest,
                    "weights",
                    &format!("no asset metadata for {}", snap.date()),
                );
                continue;
            };
            match portfolio_metrics(snap, meta) {
                Ok(pm) => {
                    let splits = overlap_share_split(snap, net, &pm);
                    let mut table = Table::new(&[
                        "holder_id",
                        "market_value",
                        "degree",
                        "inv_degree",
                        "mean_w_overlapping",
                        "mean_w_rest",
                    ]);
                    for s in &splits {
                        table.push(vec![
                            snap.holder_ids()[s.holder].clone(),
                            fmt_opt(pm.market_value[s.holder]),
                            s.degree.to_string(),
                            fmt_g(s.inv_degree),
                            fmt_opt(s.overlapping_mean),
                            fmt_opt(s.rest_mean),
                        ]);
                    }
                    let path = out_path(&cfg.out_dir, &format!("{}_weights.csv", snap.date()))?;
                    table.write_to_path(&path)?;
                    manifest.output(&path);

                    // Both averaging orders of the split, since they differ
                    // when degrees are heterogeneous.
                    let agg = analytics::share_split_summary(snap, net, &pm, &splits);
                    #[derive(Serialize)]
                    struct SplitSummary {
                        holders: usize,
                        per_holder_overlapping: Option<f64>,
                        per_holder_rest: Option<f64>,
                        pooled_overlapping: Option<f64>,
                        pooled_rest: Option<f64>,
                    }
                    let summary_path = out_path(
                        &cfg.out_dir,
                        &format!("{}_weights_summary.json", snap.date()),
                    )?;
                    let body = SplitSummary {
                        holders: agg.holders,
                        per_holder_overlapping: agg.per_holder_overlapping,
                        per_holder_rest: agg.per_holder_rest,
                        pooled_overlapping: agg.pooled_overlapping,
                        pooled_rest: agg.pooled_rest,
                    };
                    std::fs::write(
                        &summary_path,
                        serde_json::to_string_pretty(&body).expect("serializes") + "\n",
                    )
                    .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
                    manifest.output(&summary_path);
                    summary.processed.push(format!("weights {}", snap.date()));
                }
                Err(err) => skip(&mut manifest, "weights", &err.to_string()),
            }
        }
    }

    if analyses.contains(&Analysis::Securities) {
        for (snap, net) in snaps.iter().zip(&nets) {
            let stats = security_validation_stats(snap, net, meta_for(snap));
            let mut table = Table::new(&[
                "asset_id",
                "degree",
                "pair_count",
                "validated_pairs",
                "validated_fraction",
                "capitalization",
                "mean_concentration",
            ]);
            for s in &stats {
                table.push(vec![
                    snap.asset_ids()[s.asset].clone(),
                    s.degree.to_string(),
                    s.pair_count.to_string(),
                    s.validated_pairs.to_string(),
                    fmt_g(s.validated_fraction),
                    fmt_opt(s.capitalization),
                    fmt_opt(s.mean_concentration),
                ]);
            }
            let path = out_path(&cfg.out_dir, &format!("{}_security_stats.csv", snap.date()))?;
            table.write_to_path(&path)?;
            manifest.output(&path);

            let regs = security_regressions(&stats);
            if !regs.is_empty() {
                let mut table = Table::new(&[
                    "degree_bucket",
                    "regressor",
                    "slope",
                    "intercept",
                    "points",
                    "dropped_nonpositive",
                ]);
                for r in regs {
                    table.push(vec![
                        r.bucket.to_string(),
                        r.regressor.to_string(),
                        fmt_g(r.slope),
                        fmt_g(r.intercept),
                        r.points.to_string(),
                        r.dropped_nonpositive.to_string(),
                    ]);
                }
                let path = out_path(
                    &cfg.out_dir,
                    &format!("{}_security_regressions.csv", snap.date()),
                )?;
                table.write_to_path(&path)?;
                manifest.output(&path);
            }
            summary
                .processed
                .push(format!("securities {}", snap.date()));
        }
    }

    if analyses.contains(&Analysis::Distress) {
        if snaps.len() <= cfg.dt {
            skip(
                &mut manifest,
                "distress",
                &format!("needs more than dt={} snapshots", cfg.dt),
            );
        } else {
            let mut table = Table::new(&[
                "date_from",
                "date_to",
                "n",
                "l",
                "l_v",
                "g_i",
                "r_i",
                "market_return",
            ]);
            for t in 0..snaps.len() - cfg.dt {
                let (prev, curr) = (&snaps[t], &snaps[t + cfg.dt]);
                let (Some(meta_prev), Some(meta_curr)) = (meta_for(prev), meta_for(curr)) else {
                    skip(
                        &mut manifest,
                        "distress",
                        &format!("no asset metadata for {} or {}", prev.date(), curr.date()),
                    );
                    continue;
                };
                let market_return = market.as_ref().and_then(|m| m.get(prev.date())).copied();
                match distress_report(
                    prev,
                    curr,
                    meta_prev,
                    meta_curr,
                    &nets[t],
                    cfg.distress_n,
                    cfg.distress_ranking,
                    market_return,
                ) {
                    Ok(report) => {
                        table.push(vec![
                            prev.date().to_string(),
                            curr.date().to_string(),
                            report.n_effective.to_string(),
                            fmt_g(report.l),
                            fmt_g(report.l_v),
                            fmt_opt(report.g_i),
                            fmt_opt(report.r_i),
                            fmt_opt(report.market_return),
                        ]);
                        summary.processed.push(format!(
                            "distress {}..{}",
                            prev.date(),
                            curr.date()
                        ));
                    }
                    Err(err) => skip(&mut manifest, "distress", &err.to_string()),
                }
            }
            if !table.rows.is_empty() {
                let path = out_path(&cfg.out_dir, "distress.csv")?;
                table.write_to_path(&path)?;
                manifest.output(&path);
            }
        }
    }

    if analyses.contains(&Analysis::Returns) {
        let meta_list: Option<Vec<AssetMetaTable>> =
            snaps.iter().map(|s| metas.get(s.date()).cloned()).collect();
        match meta_list {
            None => skip(
                &mut manifest,
                "returns",
                "asset metadata missing for some date",
            ),
            Some(meta_list) => match returns_regression(&snaps, &meta_list, &nets, cfg.r_max) {
                Ok(reg) => {
                    let mut points = Table::new(&["date", "mean_return_out", "mean_return_in"]);
                    for (date, out, inside) in &reg.points {
                        points.push(vec![date.clone(), fmt_g(*out), fmt_g(*inside)]);
                    }
                    let points_path = out_path(&cfg.out_dir, "returns_points.csv")?;
                    points.write_to_path(&points_path)?;
                    manifest.output(&points_path);

                    let mut curve = Table::new(&["r_max", "slope", "included_fraction"]);
                    for (r, slope, frac) in &reg.slope_curve {
                        curve.push(vec![fmt_g(*r), fmt_g(*slope), fmt_g(*frac)]);
                    }
                    let curve_path = out_path(&cfg.out_dir, "returns_slopes.csv")?;
                    curve.write_to_path(&curve_path)?;
                    manifest.output(&curve_path);

                    #[derive(Serialize)]
                    struct ReturnsSummary {
                        r_max: f64,
                        slope: f64,
                        intercept: f64,
                        slope_se: f64,
                        slope_positive: Option<f64>,
                        slope_negative: Option<f64>,
                        included_fraction: f64,
                    }
                    let summary_path = out_path(&cfg.out_dir, "returns_summary.json")?;
                    let body = ReturnsSummary {
                        r_max: reg.r_max,
                        slope: reg.slope,
                        intercept: reg.intercept,
                        slope_se: reg.slope_se,
                        slope_positive: reg.slope_positive.map(|f| f.slope),
                        slope_negative: reg.slope_negative.map(|f| f.slope),
                        included_fraction: reg.included_fraction,
                    };
                    std::fs::write(
                        &summary_path,
                        serde_json::to_string_pretty(&body).expect("serializes") + "\n",
                    )
                    .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
                    manifest.output(&summary_path);
                    summary.processed.push("returns".to_string());
                }
                Err(err) => skip(&mut manifest, "returns", &err.to_string()),
            },
        }
    }

    if analyses.contains(&Analysis::Internal) {
        for snap in &snaps {
            let Some(meta) = meta_for(snap) else {
                skip(
                    &mut manifest,
                    "internal",
                    &format!("no asset metadata for {}", snap.date()),
                );
                continue;
            };
            let net = pool.install(|| {
                validate_snapshot_full(snap, Layer::Assets, &cfg.validation()).map(|o| o.network)
            })?;
            match internal_degree(&net, meta) {
                Ok(stats) => {
                    let mut table = Table::new(&[
                        "category",
                        "nodes",
                        "validated_nodes",
                        "validated_fraction",
                        "internal_links",
                        "mean_internal_degree",
                    ]);
                    for s in stats {
                        table.push(vec![
                            s.category,
                            s.nodes.to_string(),
                            s.validated_nodes.to_string(),
                            fmt_g(s.validated_fraction),
                            s.internal_links.to_string(),
                            fmt_g(s.mean_internal_degree),
                        ]);
                    }
                    let path = out_path(
                        &cfg.out_dir,
                        &format!("{}_internal_degree.csv", snap.date()),
                    )?;
                    table.write_to_path(&path)?;
                    manifest.output(&path);
                    summary.processed.push(format!("internal {}", snap.date()));
                }
                Err(err) => skip(&mut manifest, "internal", &err.to_string()),
            }
        }
    }

    manifest.write(out_path(&cfg.out_dir, "analyze_manifest.json")?)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

/// Oracle run settings.
#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Fixture spec JSON; None uses the default 20x50 fixture.
    pub fixture: Option<PathBuf>,
    pub samples: usize,
    /// Compare grouped convolution against exhaustive enumeration on a
    /// small fixture instead of Monte-Carlo sampling.
    pub exhaustive: bool,
    /// Also write the exact-vs-normal backend comparison table.
    pub compare_normal: bool,
    /// Mismatch threshold in standard-error multiples.
    pub se_limit: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            fixture: None,
            samples: 1_000_000,
            exhaustive: false,
            compare_normal: false,
            se_limit: 4.0,
        }
    }
}

/// The seeded 20x50 fixture used by the Monte-Carlo oracle checks.
pub fn default_mc_fixture(seed: u64) -> SynthSpec {
    SynthSpec {
        holders: 20,
        assets: 50,
        law: DegreeLaw::PowerLaw {
            exponent: 2.5,
            min_degree: 5,
            max_degree: 30,
        },
        blocks: vec![],
        seed,
        weighted: false,
        date: "fixture20x50".to_string(),
    }
}

/// Small fixture whose asset count stays within the enumeration cap.
pub fn default_exhaustive_fixture(seed: u64) -> SynthSpec {
    SynthSpec {
        holders: 10,
        assets: 20,
        law: DegreeLaw::PowerLaw {
            exponent: 2.5,
            min_degree: 3,
            max_degree: 10,
        },
        blocks: vec![],
        seed,
        weighted: false,
        date: "fixture10x20".to_string(),
    }
}

/// One row of the Monte-Carlo comparison report.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub a: usize,
    pub b: usize,
    pub degree_a: usize,
    pub degree_b: usize,
    pub overlap: usize,
    pub p_exact: f64,
    pub p_mc: f64,
    pub std_error: f64,
    /// |p_exact - p_mc| in standard-error multiples (0 when both errors
    /// vanish and the values agree exactly).
    pub se_multiple: f64,
}

/// Compare a p-value function against Monte-Carlo tail frequencies for every
/// pair, sampling each distinct degree pair once (the distribution depends
/// only on degrees). `p_fn` is injectable so a corrupted backend can be
/// detected in tests.
pub fn mc_comparison(
    sol: &crate::bicm::BiCMSolution,
    pairs: &[OverlapRecord],
    samples: usize,
    seed: u64,
    p_fn: impl Fn(&OverlapRecord) -> Result<f64> + Sync,
) -> Result<Vec<OracleRow>> {
    let degrees = sol.holder_degrees();
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (idx, rec) in pairs.iter().enumerate() {
        let (da, db) = (degrees[rec.a], degrees[rec.b]);
        let key = (da.min(db), da.max(db));
        groups.entry(key).or_default().push(idx);
    }
    let group_list: Vec<((usize, usize), Vec<usize>)> = groups.into_iter().collect();
    let histograms: Result<Vec<Vec<u64>>> = group_list
        .par_iter()
        .map(|&((da, db), _)| {
            // Stream tag derived from the degree pair: stable under any
            // grouping or scheduling order.
            let stream = 0x0C1E_0000_0000_0000u64 ^ ((da as u64) << 24) ^ db as u64;
            let mut rng = seeded_rng(seed, stream);
            crate::synth::mc_overlap_histogram_with_rng(sol, da, db, samples, &mut rng)
        })
        .collect();
    let histograms = histograms?;

    let mut rows = vec![None; pairs.len()];
    for (((da, db), members), hist) in group_list.iter().zip(&histograms) {
        for &idx in members {
            let rec = &pairs[idx];
            let oracle = tail_estimate(hist, rec.overlap, samples);
            let p_exact = p_fn(rec)?;
            let se_exact = (p_exact * (1.0 - p_exact) / samples as f64).sqrt();
            let se = oracle.std_error.max(se_exact);
            let gap = (p_exact - oracle.estimate).abs();
            let se_multiple = if gap == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                gap / se
            };
            rows[idx] = Some(OracleRow {
                a: rec.a,
                b: rec.b,
                degree_a: *da,
                degree_b: *db,
                overlap: rec.overlap,
                p_exact,
                p_mc: oracle.estimate,
                std_error: oracle.std_error,
                se_multiple,
            });
        }
    }
    Ok(rows.into_iter().map(|r| r.expect("row filled")).collect())
}

/// Exact-vs-oracle comparison on a synthetic fixture. Writes the comparison
/// table (and optional normal-backend table) and fails with an oracle
/// mismatch if any pair deviates beyond the limit.
pub fn cmd_oracle(cfg: &RunConfig, opts: &OracleOptions) -> Result<()> {
    cfg.check()?;
    let spec = match &opts.fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                row: 0,
                msg: e.to_string(),
            })?
        }
        None if opts.exhaustive => default_exhaustive_fixture(cfg.seed),
        None => default_mc_fixture(cfg.seed),
    };
    let fixture = generate(&spec)?;
    let snap = &fixture.snapshot;
    let deg = snap.degree_sequence(Layer::Holders);
    let sol = fit_bicm_default(&deg)?;
    let pairs = snap.overlaps(Layer::Holders);
    let engine = PValueEngine::new(&sol);
    let mut manifest = Manifest::new("oracle");
    manifest
        .param("samples", opts.samples as u64)
        .param("seed", cfg.seed)
        .param("se_limit", opts.se_limit)
        .param("exhaustive", opts.exhaustive)
        .param(
            "fixture",
            serde_json::to_value(&spec).expect("spec serializes"),
        );

    if opts.exhaustive {
        // Grouped convolution against brute-force enumeration, full support.
        let mut table = Table::new(&["degree_a", "degree_b", "max_abs_deviation"]);
        let mut worst: f64 = 0.0;
        let mut seen = BTreeSet::new();
        for rec in &pairs {
            let (da, db) = (deg.holder_degrees[rec.a], deg.holder_degrees[rec.b]);
            let key = (da.min(db), da.max(db));
            if !seen.insert(key) {
                continue;
            }
            let class_table = crate::pvalue::DegreeClassTable::for_degrees(&sol, key.0, key.1)?;
            let trials = class_table.expand_trials();
            let reference = exhaustive_overlap_oracle(&trials)?;
            let dist = crate::pvalue::OverlapDistribution::from_table(&class_table, trials.len());
            let deviation = reference
                .iter()
                .enumerate()
                .map(|(x, &expected)| (dist.pmf(x) - expected).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(deviation);
            table.push(vec![key.0.to_string(), key.1.to_string(), fmt_e(deviation)]);
        }
        let path = out_path(&cfg.out_dir, "oracle_exhaustive.csv")?;
        table.write_to_path(&path)?;
        manifest.output(&path);
        manifest.param("max_abs_deviation", worst);
        manifest.write(out_path(&cfg.out_dir, "oracle_manifest.json")?)?;
        eprintln!("oracle exhaustive: max abs deviation {worst:e}");
        if worst > 1e-12 {
            return Err(Error::OracleMismatch(format!(
                "convolution deviates from enumeration by {worst:e} > 1e-12"
            )));
        }
        return Ok(());
    }

    let pool = cfg.pool();
    let rows = pool.install(|| {
        mc_comparison(&sol, &pairs, opts.samples, cfg.seed, |rec| {
            engine.exact(rec).map(|r| r.p_value)
        })
    })?;
    let mut table = Table::new(&[
        "node_a",
        "node_b",
        "degree_a",
        "degree_b",
        "overlap",
        "p_exact",
        "p_mc",
        "std_error",
        "se_multiple",
    ]);
    let mut worst = 0.0f64;
    for row in &rows {
        worst = worst.max(row.se_multiple);
        table.push(vec![
            snap.holder_ids()[row.a].clone(),
            snap.holder_ids()[row.b].clone(),
            row.degree_a.to_string(),
            row.degree_b.to_string(),
            row.overlap.to_string(),
            fmt_e(row.p_exact),
            fmt_e(row.p_mc),
            fmt_e(row.std_error),
            fmt_g(row.se_multiple),
        ]);
    }
    let path = out_path(&cfg.out_dir, "oracle_report.csv")?;
    table.write_to_path(&path)?;
    manifest.output(&path);
    manifest.param("max_se_multiple", worst);

    if opts.compare_normal {
        let mut table = Table::new(&[
            "node_a",
            "node_b",
            "overlap",
            "p_exact",
            "p_normal",
            "relative_deviation",
            "excursion",
        ]);
        for rec in &pairs {
            let exact = engine.exact(rec)?.p_value;
            let normal = engine.normal(rec)?.p_value;
            let rel = if exact > 0.0 {
                (normal - exact).abs() / exact
            } else {
                f64::NAN
            };
            let excursion = (1e-4..=0.5).contains(&exact) && rel > 0.10;
            table.push(vec![
                snap.holder_ids()[rec.a].clone(),
                snap.holder_ids()[rec.b].clone(),
                rec.overlap.to_string(),
                fmt_e(exact),
                fmt_e(normal),
                fmt_g(rel),
                excursion.to_string(),
            ]);
        }
        let path = out_path(&cfg.out_dir, "backend_comparison.csv")?;
        table.write_to_path(&path)?;
        manifest.output(&path);
    }

    manifest.write(out_path(&cfg.out_dir, "oracle_manifest.json")?)?;
    eprintln!(
        "oracle: {} pairs, max deviation {worst:.2} standard errors",
        rows.len()
    );
    if worst > opts.se_limit {
        return Err(Error::OracleMismatch(format!(
            "worst pair deviates {worst:.2} standard errors (limit {})",
            opts.se_limit
        )));
    }
    Ok(())
}
