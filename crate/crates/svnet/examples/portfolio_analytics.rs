//! Portfolio-level analytics on a weighted snapshot: position weights and
//! ownership concentrations, the overlapping-vs-rest share split for
//! validated holders, per-security validated fractions, and distressed-set
//! enrichment between two quarters.
//!
//! ```bash
//! cargo run --release --example portfolio_analytics
//! ```

use std::collections::HashSet;

use svnet::analytics::{
    distress_enrichment, overlap_share_split, portfolio_metrics, security_validation_stats,
};
use svnet::graph::Layer;
use svnet::synth::{generate, generate_metadata, DegreeLaw, PlantedBlock, SynthSpec};
use svnet::validator::{validate_snapshot, ValidationConfig};

fn main() -> svnet::Result<()> {
    let fixture = generate(&SynthSpec {
        holders: 120,
        assets: 500,
        law: DegreeLaw::PowerLaw {
            exponent: 2.4,
            min_degree: 6,
            max_degree: 30,
        },
        blocks: vec![PlantedBlock {
            holders: 8,
            assets: 30,
            fill: 1.0,
        }],
        seed: 21,
        weighted: true,
        date: "2006Q4".to_string(),
    })?;
    let snap = &fixture.snapshot;
    let (_, asset_meta) = generate_metadata(snap, 21, 6);

    let pm = portfolio_metrics(snap, &asset_meta)?;
    println!(
        "{}: total market value {:.3e}, {} holders excluded",
        snap.date(),
        pm.total_market_value,
        pm.excluded.len()
    );
    let w_sum: f64 = pm.weights[..snap.assets_of(0).len()].iter().sum();
    println!("holder 0 weight sum: {w_sum:.12} (always 1 for included holders)");

    let net = validate_snapshot(snap, Layer::Holders, &ValidationConfig::default())?;
    println!(
        "validated network: {} edges over {} holders",
        net.edges.len(),
        net.validated_nodes().len()
    );

    // Overlapping positions carry larger shares than 1/degree on average.
    let splits = overlap_share_split(snap, &net, &pm);
    let mut above = 0usize;
    for s in &splits {
        if s.overlapping_mean.unwrap_or(0.0) > s.inv_degree {
            above += 1;
        }
    }
    println!(
        "holders whose overlapping positions out-weigh the 1/degree baseline: {above}/{}",
        splits.len()
    );

    // Security-level view: which fraction of each asset's holder pairs is
    // validated.
    let stats = security_validation_stats(snap, &net, Some(&asset_meta));
    let planted_assets: HashSet<&String> = fixture.planted[0].asset_ids.iter().collect();
    let mean_f = |pick: &dyn Fn(usize) -> bool| -> f64 {
        let vals: Vec<f64> = stats
            .iter()
            .filter(|s| pick(s.asset))
            .map(|s| s.validated_fraction)
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };
    let planted_mean = mean_f(&|a| planted_assets.contains(&snap.asset_ids()[a]));
    let background_mean = mean_f(&|a| !planted_assets.contains(&snap.asset_ids()[a]));
    println!("mean validated fraction f_s: planted assets {planted_mean:.3}, background {background_mean:.4}");

    // Distress enrichment: if the validated holders are the ones that lose
    // value, they are over-represented among the distressed.
    let distressed: HashSet<String> = fixture.planted[0].holder_ids.iter().cloned().collect();
    let (l, l_v, g_i, r_i) = distress_enrichment(snap, &net, &distressed);
    println!(
        "distress enrichment with the planted holders as the distressed set:\n  l = {l:.3}, l_v = {l_v:.3}, G_I = {:?}, R_I = {:?}",
        g_i.map(|x| (x * 100.0).round() / 100.0),
        r_i.map(|x| (x * 100.0).round() / 100.0)
    );
    Ok(())
}
