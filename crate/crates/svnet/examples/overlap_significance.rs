//! Why identical overlaps can differ in significance: two holder pairs both
//! share exactly 50 securities, but the pair with smaller portfolios is far
//! less likely to do so by chance, so only it survives validation.
//!
//! ```bash
//! cargo run --release --example overlap_significance
//! ```

use svnet::bicm::fit_bicm_default;
use svnet::graph::{Layer, Snapshot};
use svnet::pvalue::PValueEngine;
use svnet::validator::{threshold, CorrectionMethod, CorrectionPolicy};

/// Deterministic construction: a shared 50-asset set per pair, private
/// remainders sized to produce small vs large portfolios, and a background
/// of medium holders covering the rest of the universe.
fn build() -> Snapshot {
    let asset = |k: usize| format!("a{k:04}");
    let mut entries: Vec<(String, String, f64)> = Vec::new();
    let mut own = |holder: &str, assets: Vec<usize>| {
        for k in assets {
            entries.push((holder.to_string(), asset(k), 1.0));
        }
    };
    // Small pair: 50 shared + 10 private each -> degree 60.
    own("small_1", (0..50).chain(800..810).collect());
    own("small_2", (0..50).chain(810..820).collect());
    // Large pair: 50 shared + 350 private each -> degree 400.
    own("large_1", (50..100).chain(100..450).collect());
    own("large_2", (50..100).chain(450..800).collect());
    // Background: 20 holders of degree 120 spread across the universe.
    for b in 0..20usize {
        own(
            &format!("bg_{b:02}"),
            (0..120).map(|m| (b * 37 + 7 * m) % 820).collect(),
        );
    }
    Snapshot::from_entries("demo", entries, false).expect("construction is duplicate-free")
}

fn main() -> svnet::Result<()> {
    let snap = build();
    let deg = snap.degree_sequence(Layer::Holders);
    let sol = fit_bicm_default(&deg)?;
    let engine = PValueEngine::new(&sol);

    let pairs = snap.overlaps(Layer::Holders);
    let find = |x: &str, y: &str| {
        let (a, b) = (
            snap.holder_index_of(x).unwrap(),
            snap.holder_index_of(y).unwrap(),
        );
        let (a, b) = (a.min(b), a.max(b));
        pairs
            .iter()
            .find(|r| r.a == a && r.b == b)
            .copied()
            .unwrap()
    };
    let small = find("small_1", "small_2");
    let large = find("large_1", "large_2");
    assert_eq!(small.overlap, 50);
    assert_eq!(large.overlap, 50);

    let p_small = engine.exact(&small)?;
    let p_large = engine.exact(&large)?;
    println!("both pairs share exactly 50 securities:");
    println!(
        "  small portfolios (degree {:3}): p = {:.3e}  expected overlap {:.2}",
        deg.holder_degrees[small.a],
        p_small.p_value,
        sol.expected_overlap(small.a, small.b)?
    );
    println!(
        "  large portfolios (degree {:3}): p = {:.3e}  expected overlap {:.2}",
        deg.holder_degrees[large.a],
        p_large.p_value,
        sol.expected_overlap(large.a, large.b)?
    );

    // Pick a family level whose threshold separates the two p-values.
    let epsilon =
        (pairs.len() as f64 * (p_small.p_value.max(1e-290) * p_large.p_value).sqrt()).min(0.5);
    let policy = CorrectionPolicy::new(CorrectionMethod::Bonferroni, epsilon, pairs.len())?;
    let results = engine.batch(&pairs, svnet::Backend::Exact)?;
    let net = threshold(
        &policy,
        &results,
        snap.date(),
        Layer::Holders,
        snap.holder_ids().to_vec(),
        sol.residual,
        svnet::Backend::Exact,
    );
    println!(
        "\nat epsilon = {epsilon:.2e} (P* = {:.2e}):",
        net.meta.p_star
    );
    println!(
        "  small pair validated: {}",
        net.edge_set().contains(&(small.a, small.b))
    );
    println!(
        "  large pair validated: {}",
        net.edge_set().contains(&(large.a, large.b))
    );
    Ok(())
}
