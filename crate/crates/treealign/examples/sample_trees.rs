//! Tour of the random tree model: Galton-Watson sampling, pruning,
//! subsampling, augmentation, uniform relabeling, correlated pairs, and the
//! subsample-augment-relabel Markov kernel.
//!
//!     cargo run --release --example sample_trees

use treealign::trees::{
    augment, canonical_code, markov_transition, prune, relabel_uniform, sample_gw, sample_pair,
    subsample, Hypothesis, Seed,
};
use treealign::ModelParams;

fn main() -> treealign::Result<()> {
    let params = ModelParams::new(1.8, 0.8, 4)?;
    let mut rng = Seed::new(2).rng();

    let t = sample_gw(&params, &mut rng)?;
    println!("GW(lambda=1.8) pruned at depth 4: {} nodes", t.len());
    println!("  parenthesis form: {}", t.to_parens());
    println!("  pruned at depth 2: {}", prune(&t, 2).to_parens());

    let sub = subsample(&t, params.s, &mut rng);
    println!("  0.8-subsampled root component: {} nodes", sub.len());
    let aug = augment(&sub, &params, &mut rng)?;
    println!("  (lambda, s)-augmented back: {} nodes", aug.len());

    let shuffled = relabel_uniform(&t, &mut rng);
    println!(
        "  uniform relabeling preserves the shape: {}",
        canonical_code(&shuffled) == canonical_code(&t)
    );

    // One kernel step: same operations composed, pruned at params.depth.
    let stepped = markov_transition(&t, &params, &mut rng)?;
    println!("  one Markov step: {} nodes", stepped.len());

    // Correlated pair with its planted intersection tree.
    let pair = sample_pair(&params, Hypothesis::H1, &mut rng)?;
    let gt = pair.ground_truth.as_ref().expect("H1 carries ground truth");
    println!(
        "H1 pair: |t| = {}, |t'| = {}, intersection |tau*| = {}",
        pair.t.len(),
        pair.t_prime.len(),
        gt.intersection.len()
    );
    println!(
        "  injections map root to root: {} / {}",
        gt.sigma[gt.intersection.root()] == pair.t.root(),
        gt.sigma_prime[gt.intersection.root()] == pair.t_prime.root()
    );
    Ok(())
}
