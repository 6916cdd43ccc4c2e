//! `svnet` command line: validate bipartite ownership snapshots against the
//! bipartite configuration model and run the downstream analytics.
//!
//! All orchestration lives in `svnet::cli`; this binary only parses flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svnet::cli::{self, Analysis, OracleOptions, RunConfig, RunSummary, ALL_ANALYSES};
use svnet::graph::Layer;
use svnet::synth::{DegreeLaw, PlantedBlock, SynthSpec};

#[derive(Parser)]
#[command(
    name = "svnet",
    about = "Statistically validated projections of bipartite ownership networks",
    version
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Snapshot CSV files (header holder_id,asset_id,shares); the file stem
    /// is the date label.
    #[arg(long = "snapshots", num_args = 1.., value_name = "FILE")]
    snapshots: Vec<PathBuf>,
    /// Holder metadata CSV (holder_id,type).
    #[arg(long = "holder-meta", value_name = "FILE")]
    holder_meta: Option<PathBuf>,
    /// Asset metadata CSVs (asset_id,price,outstanding,category), one per
    /// date, stem matching the snapshot date.
    #[arg(long = "asset-meta", num_args = 0.., value_name = "FILE")]
    asset_meta: Vec<PathBuf>,
    /// Market returns CSV (date,return).
    #[arg(long = "market-returns", value_name = "FILE")]
    market_returns: Option<PathBuf>,
    /// Projection layer: holders or assets.
    #[arg(long, value_name = "LAYER")]
    layer: Option<Layer>,
    /// Correction method: bonferroni or fdr.
    #[arg(long, value_name = "METHOD")]
    method: Option<String>,
    /// Family significance level.
    #[arg(long, value_name = "EPS")]
    epsilon: Option<f64>,
    /// p-value backend: exact or normal.
    #[arg(long, value_name = "BACKEND")]
    backend: Option<String>,
    /// Distressed-set size.
    #[arg(long = "distress-n", value_name = "N")]
    distress_n: Option<usize>,
    /// Distress ranking: dollar or return.
    #[arg(long = "distress-ranking", value_name = "RANKING")]
    distress_ranking: Option<String>,
    /// Distress horizon in snapshots.
    #[arg(long, value_name = "DT")]
    dt: Option<usize>,
    /// Absolute-return cutoff for the returns regression.
    #[arg(long = "r-max", value_name = "R")]
    r_max: Option<f64>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Worker threads for pair-level parallelism.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Also write per-pair p-value tables.
    #[arg(long = "emit-pvalues")]
    emit_pvalues: bool,
    /// JSON config file with RunConfig fields; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, svnet::Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| svnet::Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                serde_json::from_str(&text).map_err(|e| svnet::Error::Parse {
                    path: path.display().to_string(),
                    row: 0,
                    msg: e.to_string(),
                })?
            }
            None => RunConfig::default(),
        };
        if !self.snapshots.is_empty() {
            cfg.snapshots = self.snapshots;
        }
        if self.holder_meta.is_some() {
            cfg.holder_meta = self.holder_meta;
        }
        if !self.asset_meta.is_empty() {
            cfg.asset_meta = self.asset_meta;
        }
        if self.market_returns.is_some() {
            cfg.market_returns = self.market_returns;
        }
        if let Some(layer) = self.layer {
            cfg.layer = layer;
        }
        if let Some(method) = self.method {
            cfg.method = method.parse()?;
        }
        if let Some(eps) = self.epsilon {
            cfg.epsilon = eps;
        }
        if let Some(backend) = self.backend {
            cfg.backend = backend.parse()?;
        }
        if let Some(n) = self.distress_n {
            cfg.distress_n = n;
        }
        if let Some(ranking) = self.distress_ranking {
            cfg.distress_ranking = ranking.parse()?;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(r) = self.r_max {
            cfg.r_max = r;
        }
        if let Some(out) = self.out_dir {
            cfg.out_dir = out;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if self.emit_pvalues {
            cfg.emit_pvalues = true;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate snapshots: per-date edge lists plus JSON sidecars.
    Validate(CommonArgs),
    /// Fit the null model only and dump multipliers for audit.
    Fit(CommonArgs),
    /// Build buy/sell networks for consecutive snapshot pairs.
    Delta {
        #[command(flatten)]
        common: CommonArgs,
        /// Keep only holders of this type (needs --holder-meta).
        #[arg(long = "holder-type", value_name = "TYPE")]
        holder_type: Option<String>,
    },
    /// Per-date aggregate table; --delta adds buy/sell statistics.
    Timeseries {
        #[command(flatten)]
        common: CommonArgs,
        /// Analyze buy/sell networks of consecutive snapshot pairs.
        #[arg(long)]
        delta: bool,
    },
    /// Portfolio, security, distress, returns and internal-degree analytics.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated subset of weights,securities,distress,returns,internal.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        analyses: Vec<String>,
    },
    /// Generate a synthetic snapshot from a spec.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// SynthSpec JSON file; inline flags below are used when absent.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        holders: usize,
        #[arg(long, default_value_t = 500)]
        assets: usize,
        /// Degree law: regular:<d> or powerlaw:<exp>:<min>:<max>.
        #[arg(long, default_value = "powerlaw:2.5:5:50")]
        law: String,
        /// Planted blocks, repeatable: <holders>x<assets>:<fill>.
        #[arg(long = "block", value_name = "SPEC")]
        blocks: Vec<String>,
        /// Draw log-normal share counts.
        #[arg(long)]
        weighted: bool,
        /// Asset categories to generate metadata for (0 = no metadata).
        #[arg(long, default_value_t = 0)]
        categories: usize,
        /// Date label of the generated snapshot.
        #[arg(long, default_value = "2000Q1")]
        date: String,
    },
    /// Exact-vs-oracle comparison on a synthetic fixture.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixture spec JSON (default: seeded 20x50 fixture).
        #[arg(long, value_name = "FILE")]
        fixture: Option<PathBuf>,
        /// Monte-Carlo samples per degree pair.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Compare against exhaustive enumeration on a small fixture.
        #[arg(long)]
        exhaustive: bool,
        /// Also write the exact-vs-normal comparison table.
        #[arg(long = "compare-normal")]
        compare_normal: bool,
    },
}

fn parse_law(text: &str) -> Result<DegreeLaw, svnet::Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || svnet::Error::InvalidConfig(format!("unparseable degree law {text:?}"));
    match parts.as_slice() {
        ["regular", d] => Ok(DegreeLaw::Regular {
            degree: d.parse().map_err(|_| bad())?,
        }),
        ["powerlaw", exp, min, max] => Ok(DegreeLaw::PowerLaw {
            exponent: exp.parse().map_err(|_| bad())?,
            min_degree: min.parse().map_err(|_| bad())?,
            max_degree: max.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_block(text: &str) -> Result<PlantedBlock, svnet::Error> {
    let bad = || svnet::Error::InvalidConfig(format!("unparseable block {text:?}"));
    let (shape, fill) = text.split_once(':').ok_or_else(bad)?;
    let (h, a) = shape.split_once('x').ok_or_else(bad)?;
    Ok(PlantedBlock {
        holders: h.parse().map_err(|_| bad())?,
        assets: a.parse().map_err(|_| bad())?,
        fill: fill.parse().map_err(|_| bad())?,
    })
}

fn summary_exit(summary: RunSummary) -> ExitCode {
    let code = summary.exit_code();
    if code != 0 {
        eprintln!("{} date(s) failed", summary.failures.len());
    }
    ExitCode::from(code as u8)
}

fn fail(err: svnet::Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    match args.command {
        Command::Validate(common) => {
            match common.into_config().and_then(|cfg| cli::cmd_validate(&cfg)) {
                Ok(summary) => summary_exit(summary),
                Err(err) => fail(err),
            }
        }
        Command::Fit(common) => match common.into_config().and_then(|cfg| cli::cmd_fit(&cfg)) {
            Ok(summary) => summary_exit(summary),
            Err(err) => fail(err),
        },
        Command::Delta {
            common,
            holder_type,
        } => {
            match common
                .into_config()
                .and_then(|cfg| cli::cmd_delta(&cfg, holder_type.as_deref()))
            {
                Ok(summary) => summary_exit(summary),
                Err(err) => fail(err),
            }
        }
        Command::Timeseries { common, delta } => {
            match common
                .into_config()
                .and_then(|cfg| cli::cmd_timeseries(&cfg, delta))
            {
                Ok(summary) => summary_exit(summary),
                Err(err) => fail(err),
            }
        }
        Command::Analyze { common, analyses } => {
            let picked: Result<Vec<Analysis>, _> = analyses.iter().map(|a| a.parse()).collect();
            let picked = match picked {
                Ok(list) if list.is_empty() => ALL_ANALYSES.to_vec(),
                Ok(list) => list,
                Err(err) => return fail(err),
            };
            match common
                .into_config()
                .and_then(|cfg| cli::cmd_analyze(&cfg, &picked))
            {
                Ok(summary) => summary_exit(summary),
                Err(err) => fail(err),
            }
        }
        Command::Synth {
            common,
            spec,
            holders,
            assets,
            law,
            blocks,
            weighted,
            categories,
            date,
        } => {
            let run = || -> Result<(), svnet::Error> {
                let cfg = common.into_config()?;
                let spec = match spec {
                    Some(path) => {
                        let text =
                            std::fs::read_to_string(&path).map_err(|e| svnet::Error::Io {
                                path: path.display().to_string(),
                                source: e,
                            })?;
                        serde_json::from_str::<SynthSpec>(&text).map_err(|e| {
                            svnet::Error::Parse {
                                path: path.display().to_string(),
                                row: 0,
                                msg: e.to_string(),
                            }
                        })?
                    }
                    None => SynthSpec {
                        holders,
                        assets,
                        law: parse_law(&law)?,
                        blocks: blocks
                            .iter()
                            .map(|b| parse_block(b))
                            .collect::<Result<Vec<_>, _>>()?,
                        seed: cfg.seed,
                        weighted,
                        date: date.clone(),
                    },
                };
                cli::cmd_synth(&cfg, &spec, categories)
            };
            match run() {
                Ok(()) => ExitCode::SUCCESS,
                Err(err) => fail(err),
            }
        }
        Command::Oracle {
            common,
            fixture,
            samples,
            exhaustive,
            compare_normal,
        } => {
            let run = || -> Result<(), svnet::Error> {
                let cfg = common.into_config()?;
                let opts = OracleOptions {
                    fixture,
                    samples,
                    exhaustive,
                    compare_normal,
                    ..OracleOptions::default()
                };
                cli::cmd_oracle(&cfg, &opts)
            };
            match run() {
                Ok(()) => ExitCode::SUCCESS,
                Err(err) => fail(err),
            }
        }
    }
}
