//! Check the exact p-value machinery from the outside: Monte-Carlo ensemble
//! sampling of pair rows for tail frequencies, and exhaustive Bernoulli
//! enumeration for small distributions.
//!
//! ```bash
//! cargo run --release --example oracle_check
//! ```

use svnet::bicm::fit_bicm_default;
use svnet::cli::{default_mc_fixture, mc_comparison};
use svnet::graph::Layer;
use svnet::pvalue::{DegreeClassTable, OverlapDistribution, PValueEngine};
use svnet::synth::{exhaustive_overlap_oracle, generate};

fn main() -> svnet::Result<()> {
    // Monte-Carlo: every pair of the seeded 20x50 fixture, 100k draws each
    // (the acceptance suite runs 1M).
    let fixture = generate(&default_mc_fixture(7))?;
    let snap = &fixture.snapshot;
    let sol = fit_bicm_default(&snap.degree_sequence(Layer::Holders))?;
    let pairs = snap.overlaps(Layer::Holders);
    let engine = PValueEngine::new(&sol);
    let rows = mc_comparison(&sol, &pairs, 100_000, 7, |rec| {
        engine.exact(rec).map(|r| r.p_value)
    })?;
    let worst = rows.iter().map(|r| r.se_multiple).fold(0.0f64, f64::max);
    println!(
        "Monte-Carlo oracle: {} pairs sampled, worst deviation {:.2} standard errors",
        rows.len(),
        worst
    );
    for row in rows.iter().take(5) {
        println!(
            "  degrees ({:2},{:2}) o={:2}  exact {:.4e}  mc {:.4e}  ({:.2} se)",
            row.degree_a, row.degree_b, row.overlap, row.p_exact, row.p_mc, row.se_multiple
        );
    }

    // Exhaustive: grouped binomial convolution against brute-force
    // enumeration of every Bernoulli outcome vector.
    let deg = snap.degree_sequence(Layer::Holders);
    let (da, db) = (deg.holder_degrees[0], deg.holder_degrees[1]);
    let table = DegreeClassTable::for_degrees(&sol, da, db)?;
    // Keep only enough classes to stay within the 25-trial enumeration cap.
    let mut trimmed = DegreeClassTable {
        shift: 0,
        zero_count: 0,
        classes: Vec::new(),
    };
    let mut budget = 25usize;
    for &(n, q, omq) in &table.classes {
        let take = n.min(budget);
        if take == 0 {
            break;
        }
        trimmed.classes.push((take, q, omq));
        budget -= take;
    }
    let trials = trimmed.expand_trials();
    let reference = exhaustive_overlap_oracle(&trials)?;
    let dist = OverlapDistribution::from_table(&trimmed, trials.len());
    let max_dev = reference
        .iter()
        .enumerate()
        .map(|(x, &p)| (dist.pmf(x) - p).abs())
        .fold(0.0f64, f64::max);
    println!(
        "\nexhaustive oracle: {} trials enumerated, max |convolution - enumeration| = {max_dev:.2e}",
        trials.len()
    );
    Ok(())
}
