//! Fit the bipartite configuration model to a synthetic snapshot and
//! inspect the solution: multipliers per degree class, connection
//! probabilities, expected degrees and the audit dump.
//!
//! ```bash
//! cargo run --release --example fit_model
//! ```

use svnet::bicm::{fit_bicm_default, write_solution};
use svnet::graph::Layer;
use svnet::synth::{generate, DegreeLaw, SynthSpec};

fn main() -> svnet::Result<()> {
    let spec = SynthSpec {
        holders: 120,
        assets: 600,
        law: DegreeLaw::PowerLaw {
            exponent: 2.2,
            min_degree: 8,
            max_degree: 80,
        },
        blocks: vec![],
        seed: 42,
        weighted: false,
        date: "2006Q4".to_string(),
    };
    let snap = generate(&spec)?.snapshot;
    println!(
        "snapshot {}: {} holders x {} assets, {} links",
        snap.date(),
        snap.num_holders(),
        snap.num_assets(),
        snap.num_links()
    );

    let deg = snap.degree_sequence(Layer::Holders);
    let sol = fit_bicm_default(&deg)?;
    println!(
        "fitted in {} steps, max relative degree error {:.3e}",
        sol.iterations, sol.residual
    );

    // Expected degrees reproduce observed degrees.
    let (holder_expected, _) = sol.expected_degrees();
    let worst = deg
        .holder_degrees
        .iter()
        .zip(&holder_expected)
        .map(|(&d, &e)| (e - d as f64).abs() / d as f64)
        .fold(0.0f64, f64::max);
    println!("worst holder-degree relative error: {worst:.3e}");

    // Equal-degree nodes share connection probabilities by construction.
    let q = sol.connection_probability(0, 0)?;
    println!(
        "Q(holder 0, asset 0) = {q:.6} (degree {} vs {})",
        deg.holder_degrees[0], deg.asset_degrees[0]
    );
    println!(
        "expected overlap of holders 0 and 1: {:.3}",
        sol.expected_overlap(0, 1)?
    );

    println!("\nsolution dump (first lines):");
    let mut dump = Vec::new();
    write_solution(&sol, &mut dump).expect("in-memory write");
    for line in String::from_utf8(dump).unwrap().lines().take(8) {
        println!("  {line}");
    }
    Ok(())
}
