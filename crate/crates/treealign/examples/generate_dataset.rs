//! Write a correlated graph-pair bundle to disk and read it back: the
//! interchange format for running external aligners on the same instances.
//!
//!     cargo run --release --example generate_dataset

use treealign::detection::PhasePoint;
use treealign::graphs::{
    load_pair_bundle, metrics, sample_correlated_er, save_pair_bundle, PairMeta, PartialMap,
};
use treealign::trees::Seed;

fn main() -> treealign::Result<()> {
    let (n, lambda, s, seed) = (500usize, 2.5, 0.85, 42u64);
    let point = PhasePoint::new(lambda, s)?;
    let mut rng = Seed::new(seed).child(0).rng();
    let pair = sample_correlated_er(n, &point, &mut rng)?;

    let dir = std::env::temp_dir().join("treealign-bundle-demo");
    save_pair_bundle(&dir, &pair, &PairMeta { lambda, s, n, seed })?;
    println!("wrote bundle to {}", dir.display());
    for name in ["g.edges", "gprime.edges", "sigma.json", "meta.json"] {
        let len = std::fs::metadata(dir.join(name))?.len();
        println!("  {name}: {len} bytes");
    }

    let (back, meta) = load_pair_bundle(&dir)?;
    println!(
        "round trip: |E| = {} / {}, n = {}, seed = {}",
        back.g.edge_count(),
        back.g_prime.edge_count(),
        meta.n,
        meta.seed
    );

    // The planted permutation scores overlap 1 by definition.
    let planted = PartialMap::new(
        (0..n as u32)
            .map(|i| (i, back.sigma_star[i as usize]))
            .collect(),
    );
    let m = metrics(&planted, &back.sigma_star, n)?;
    println!(
        "planted permutation metrics: overlap {}, errors {}",
        m.overlap, m.error_fraction
    );
    Ok(())
}
