//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible under `cargo test --test acceptance --
//! --nocapture`). Oracles here are written independently of the library
//! paths they check.

use treealign::align::{
    aggregate, init_messages, mp_sweep, mpalign, prune_to_injective, AlignConfig,
};
use treealign::detection::{
    extinction_probability, g_kl, kl_estimate, s_star, sample_log_lr, v_iteration, PhasePoint,
    VIteration,
};
use treealign::graphs::{largest_component, neighborhood_tree, sample_correlated_er, SparseGraph};
use treealign::likelihood::{likelihood_ratio, likelihood_ratio_explicit, PairMemo, PsiTable};
use treealign::trees::{automorphism_count_log, canonical_code, Hypothesis, RootedTree, Seed};
use treealign::ModelParams;

fn params(lambda: f64, s: f64, depth: usize) -> ModelParams {
    ModelParams::new(lambda, s, depth).unwrap()
}

/// All ordered rooted trees of depth <= 2 with every degree <= `max_deg`,
/// deduplicated to one representative per unlabeled shape.
fn shapes_depth2(max_deg: usize) -> Vec<RootedTree> {
    let mut out: Vec<RootedTree> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    // Encode a tree by its root-child subtree degrees: each child has
    // 0..=max_deg leaf children of its own.
    fn rec(slots: usize, max_deg: usize, prefix: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
        all.push(prefix.clone());
        if slots == 0 {
            return;
        }
        for d in 0..=max_deg {
            prefix.push(d);
            rec(slots - 1, max_deg, prefix, all);
            prefix.pop();
        }
    }
    let mut degree_lists = Vec::new();
    rec(max_deg, max_deg, &mut Vec::new(), &mut degree_lists);
    for degrees in degree_lists {
        let mut t = RootedTree::single();
        for &d in &degrees {
            let child = t.add_child(t.root());
            for _ in 0..d {
                t.add_child(child);
            }
        }
        if seen.insert(canonical_code(&t)) {
            out.push(t);
        }
    }
    out
}

#[test]
fn criterion_01_lr_recursive_equals_explicit_exhaustively() {
    let started = std::time::Instant::now();
    let shapes = shapes_depth2(3);
    assert_eq!(shapes.len(), 35, "exhaustive shape count");
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for &(lambda, s) in &[(2.0, 0.5), (1.5, 0.9), (1.3, 1.0)] {
        let psi = PsiTable::with_default_cap(params(lambda, s, 2));
        let mut memo = PairMemo::new();
        for (ia, a) in shapes.iter().enumerate() {
            for b in &shapes[ia..] {
                let rec = likelihood_ratio(a, b, 2, &psi, &mut memo).unwrap().ln();
                let exp = likelihood_ratio_explicit(a, b, 2, &psi).unwrap().ln();
                checked += 1;
                if rec == f64::NEG_INFINITY && exp == f64::NEG_INFINITY {
                    continue; // both zero (s = 1, incompatible shapes)
                }
                let rel = (rec - exp).abs() / exp.abs().max(1.0);
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-9,
                    "pair {} vs {} at ({lambda}, {s}): {rec} != {exp}",
                    a.to_parens(),
                    b.to_parens()
                );
            }
        }
    }
    println!(
        "ACCEPTANCE 01 PASS: recursive == explicit on {checked} tree pairs \
         (depth <= 2, degrees <= 3), worst relative log error {worst:.2e}, {:.1}s",
        started.elapsed().as_secs_f64()
    );
    assert!(started.elapsed().as_secs_f64() < 60.0);
}

/// Shared H0 sample set for criteria 2 and 3.
fn h0_samples() -> Vec<f64> {
    sample_log_lr(
        &PhasePoint::new(1.5, 0.7).unwrap(),
        3,
        Hypothesis::H0,
        20_000,
        &Seed::new(0xACCE_0002),
        20,
    )
    .unwrap()
}

#[test]
fn criterion_02_martingale_mean_is_one() {
    let started = std::time::Instant::now();
    let samples = h0_samples();
    let n = samples.len() as f64;
    let values: Vec<f64> = samples.iter().map(|&x| x.exp()).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        (mean - 1.0).abs() <= 4.0 * se,
        "E_0[L_3] = {mean} +- {se}, not within 4 SE of 1"
    );
    println!(
        "ACCEPTANCE 02 PASS: martingale mean exp(log L_3) = {mean:.4} +- {se:.4} \
         (|mean - 1| = {:.4} <= 4 SE), {:.1}s",
        (mean - 1.0).abs(),
        started.elapsed().as_secs_f64()
    );
    assert!(started.elapsed().as_secs_f64() < 120.0);
}

#[test]
fn criterion_03_h0_markov_bound_at_beta_100() {
    let samples = h0_samples();
    let n = samples.len() as f64;
    let count = samples.iter().filter(|&&x| x > 100f64.ln()).count();
    let freq = count as f64 / n;
    let se = (freq * (1.0 - freq) / n).sqrt();
    assert!(
        freq <= 0.01 + 3.0 * se,
        "P_0(L_3 > 100) = {freq} exceeds 0.01 + 3 SE"
    );
    println!("ACCEPTANCE 03 PASS: P_0(L_3 > 100) = {freq:.5} <= 0.01 + 3 SE ({count} of {n})");
}

/// Ordered trees with exactly `n` nodes, as parenthesis codes.
fn ordered_trees(n: usize) -> Vec<RootedTree> {
    fn forests(total: usize) -> Vec<String> {
        if total == 0 {
            return vec![String::new()];
        }
        let mut out = Vec::new();
        for first in 1..=total {
            for t in trees(first) {
                for rest in forests(total - first) {
                    out.push(format!("{t}{rest}"));
                }
            }
        }
        out
    }
    fn trees(n: usize) -> Vec<String> {
        forests(n - 1)
            .into_iter()
            .map(|f| format!("({f})"))
            .collect()
    }
    trees(n)
        .into_iter()
        .map(|code| RootedTree::from_parens(&code).unwrap())
        .collect()
}

/// Brute force |Aut|: count per-node child permutations that fix the tree.
fn brute_force_aut(t: &RootedTree) -> u64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in perms(k - 1) {
            for pos in 0..=rest.len() {
                let mut p = rest.clone();
                p.insert(pos, k - 1);
                out.push(p);
            }
        }
        out
    }
    fn apply(t: &RootedTree, v: usize, choice: &[usize], slots: &[Vec<Vec<usize>>]) -> String {
        // Parenthesis code of the relabeled subtree at v.
        let kids = t.children(v);
        let perm = &slots[v][choice[v]];
        let mut s = String::from("(");
        for &idx in perm {
            s.push_str(&apply(t, kids[idx], choice, slots));
        }
        s.push(')');
        s
    }
    let slots: Vec<Vec<Vec<usize>>> = t.node_ids().map(|v| perms(t.degree(v))).collect();
    let original = t.to_parens();
    let mut count = 0u64;
    let mut choice = vec![0usize; t.len()];
    loop {
        if apply(t, t.root(), &choice, &slots) == original {
            count += 1;
        }
        let mut i = 0;
        while i < choice.len() {
            choice[i] += 1;
            if choice[i] < slots[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == choice.len() {
            break;
        }
    }
    count
}

#[test]
fn criterion_04_automorphisms_match_brute_force_to_seven_nodes() {
    let started = std::time::Instant::now();
    let mut checked = 0usize;
    for n in 1..=7 {
        for t in ordered_trees(n) {
            let expect = (brute_force_aut(&t) as f64).ln();
            let got = automorphism_count_log(&t);
            assert!(
                (got - expect).abs() < 1e-9,
                "tree {}: log-aut {got} != brute {expect}",
                t.to_parens()
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 197, "ordered tree census up to 7 nodes");
    println!(
        "ACCEPTANCE 04 PASS: automorphism counts exact on all {checked} ordered trees \
         with <= 7 nodes, {:.1}s",
        started.elapsed().as_secs_f64()
    );
    assert!(started.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn criterion_05_extinction_probability() {
    assert_eq!(
        extinction_probability(1.0),
        1.0,
        "critical case must be exactly 1"
    );
    // Independent bisection oracle on x - exp(2(x-1)).
    let g = |x: f64| x - (2.0 * (x - 1.0)).exp();
    let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-9);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let got = extinction_probability(2.0);
    assert!((got - oracle).abs() <= 1e-9, "{got} vs oracle {oracle}");
    assert!((got - 0.203188).abs() < 1e-6);
    println!("ACCEPTANCE 05 PASS: p_ext(1) = 1 exactly; p_ext(2) = {got:.9} matches bisection");
}

/// Exact depth-1 kernel row: Binomial(c, s) + Poisson(lambda(1-s)) on
/// 0..=cutoff, leftover mass lumped into the last bin.
fn kernel_row(c: usize, lambda: f64, s: f64, cutoff: usize) -> Vec<f64> {
    let ln_fact = |n: usize| -> f64 { (2..=n).map(|i| (i as f64).ln()).sum() };
    let mean = lambda * (1.0 - s);
    let mut row = vec![0.0; cutoff + 1];
    for k in 0..=c.min(cutoff) {
        let ln_ck = ln_fact(c) - ln_fact(k) - ln_fact(c - k);
        let pb = (ln_ck + (k as f64) * s.ln() + ((c - k) as f64) * (1.0 - s).ln()).exp();
        for j in 0..=(cutoff - k) {
            let pp = (-mean + (j as f64) * mean.ln() - ln_fact(j)).exp();
            row[k + j] += pb * pp;
        }
    }
    let total: f64 = row.iter().sum();
    row[cutoff] += 1.0 - total;
    row
}

#[test]
fn criterion_06_markov_kernel_semigroup() {
    let started = std::time::Instant::now();
    let (lambda, cutoff) = (2.0, 60);
    let mut worst = 0.0f64;
    for c0 in 0..=12usize {
        let step1 = kernel_row(c0, lambda, 0.8, cutoff);
        let mut composed = vec![0.0; cutoff + 1];
        for (deg, &mass) in step1.iter().enumerate() {
            for (j, &q) in kernel_row(deg, lambda, 0.9, cutoff).iter().enumerate() {
                composed[j] += mass * q;
            }
        }
        let direct = kernel_row(c0, lambda, 0.8 * 0.9, cutoff);
        let tv: f64 = composed
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        worst = worst.max(tv);
        assert!(tv <= 1e-8, "TV = {tv:e} from initial degree {c0}");
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 06 PASS: depth-1 TV(M(0.8) o M(0.9), M(0.72)) <= {worst:.2e} \
         over initial degrees 0..=12, cutoff 60, {elapsed:.2}s"
    );
    assert!(elapsed < 1.0, "criterion demands < 1 s");
}

#[test]
fn criterion_07_message_passing_equals_tree_likelihood() {
    let started = std::time::Instant::now();
    let p = params(2.0, 0.7, 4);
    let psi = PsiTable::with_default_cap(p);
    let cfg = AlignConfig::new(4, 0.0);
    let seed = Seed::new(0xACCE_0007);
    let mut memo = PairMemo::new();
    let mut pairs_checked = 0usize;
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let mut rng = seed.child(trial).rng();
        // A two-tree forest on each side.
        let forest = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut edges: Vec<(u32, u32)> = Vec::new();
            let mut offset = 0u32;
            for _ in 0..2 {
                let t = treealign::trees::sample_gw(&p, rng).unwrap();
                for v in t.node_ids() {
                    if let Some(par) = t.parent(v) {
                        edges.push((offset + par as u32, offset + v as u32));
                    }
                }
                offset += t.len() as u32;
            }
            SparseGraph::from_edges(offset as usize, &edges).unwrap()
        };
        let ga = forest(&mut rng);
        let gb = forest(&mut rng);
        // Horizon = sweeps + 1: one aggregation layer on top of t sweeps.
        for &horizon in &[2usize, 4] {
            let mut table = init_messages(&ga, &gb, &cfg).unwrap();
            for _ in 0..horizon - 1 {
                table = mp_sweep(&table, &psi, &cfg).unwrap();
            }
            let scores = aggregate(&table, &ga, &gb, &psi).unwrap();
            assert_eq!(scores.horizon, horizon);
            for i in (0..ga.node_count()).step_by(2) {
                for u in (0..gb.node_count()).step_by(2) {
                    let (ni, ci) = neighborhood_tree(&ga, i, horizon);
                    let (nu, cu) = neighborhood_tree(&gb, u, horizon);
                    assert!(!ci && !cu, "forests have no cycles");
                    let tree = likelihood_ratio(&ni, &nu, horizon, &psi, &mut memo)
                        .unwrap()
                        .ln();
                    let mp = scores.get(i, u).ln();
                    let rel = (mp - tree).abs() / tree.abs().max(1.0);
                    worst = worst.max(rel);
                    assert!(rel <= 1e-6, "({i},{u}) horizon {horizon}: {mp} vs {tree}");
                    pairs_checked += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 07 PASS: aggregate after t sweeps == tree L_d at matching horizons \
         on 50 forest pairs ({pairs_checked} node pairs), worst rel err {worst:.2e}, {elapsed:.1}s"
    );
    assert!(elapsed < 120.0);
}

#[test]
fn criterion_08_kl_monotone_in_depth() {
    let point = PhasePoint::new(2.0, 0.8).unwrap();
    let seed = Seed::new(0xACCE_0008);
    let k1 = kl_estimate(&point, 1, 1000, &seed.child(1)).unwrap();
    let k2 = kl_estimate(&point, 2, 1000, &seed.child(2)).unwrap();
    let k3 = kl_estimate(&point, 3, 1000, &seed.child(3)).unwrap();
    for (lo, hi, name) in [(&k1, &k2, "KL_1 <= KL_2"), (&k2, &k3, "KL_2 <= KL_3")] {
        let gap = (lo.std_error.powi(2) + hi.std_error.powi(2)).sqrt();
        assert!(
            lo.mean <= hi.mean + 3.0 * gap,
            "{name} violated: {} vs {}",
            lo.mean,
            hi.mean
        );
    }
    println!(
        "ACCEPTANCE 08 PASS: KL estimates increase with depth: {:.3} <= {:.3} <= {:.3} \
         (SEs {:.3}/{:.3}/{:.3})",
        k1.mean, k2.mean, k3.mean, k1.std_error, k2.std_error, k3.std_error
    );
}

#[test]
fn criterion_09_mpalign2_overlap_gap() {
    let started = std::time::Instant::now();
    let (n, lambda, d_max) = (200usize, 2.5, 15usize);
    let seed = Seed::new(0xACCE_0009);
    let mut means = Vec::new();
    for (si, &s) in [0.95f64, 0.40].iter().enumerate() {
        let point = PhasePoint::new(lambda, s).unwrap();
        let psi = PsiTable::with_default_cap(params(lambda, s, d_max));
        let cfg = AlignConfig::new(d_max, 0.0);
        let mut acc = 0.0;
        for rep in 0..10u64 {
            let mut rng = seed.child(si as u64).child(rep).rng();
            let pair = sample_correlated_er(n, &point, &mut rng).unwrap();
            let (g, map_g) = largest_component(&pair.g);
            let (gp, map_gp) = largest_component(&pair.g_prime);
            let mut new_to_old = vec![0u32; g.node_count()];
            for (old, &new) in map_g.iter().enumerate() {
                if let Some(new) = new {
                    new_to_old[new as usize] = old as u32;
                }
            }
            let truth: Vec<Option<u32>> = new_to_old
                .iter()
                .map(|&old| map_gp[pair.sigma_star[old as usize] as usize])
                .collect();
            let r = treealign::align::mpalign2(&g, &gp, &psi, d_max, &cfg, Some(&truth)).unwrap();
            let star = &r.trace[r.t_star];
            let correct = (star.correct_pi.unwrap() + star.correct_sigma.unwrap()) as f64 / 2.0;
            acc += correct / n as f64;
        }
        means.push(acc / 10.0);
    }
    let gap = means[0] - means[1];
    assert!(
        gap >= 0.2,
        "overlap gap {gap:.3} below 0.2 (s=0.95: {:.3}, s=0.40: {:.3})",
        means[0],
        means[1]
    );
    println!(
        "ACCEPTANCE 09 PASS: mean overlap at s=0.95 is {:.3}, at s=0.40 is {:.3}, \
         gap {gap:.3} >= 0.2 (n=200, lambda=2.5, d=15, 10 seeds each), {:.0}s",
        means[0],
        means[1],
        started.elapsed().as_secs_f64()
    );
}

/// log P(Bin(m, p) >= k) upper tail, summed directly.
fn binomial_tail(m: usize, p: f64, k: usize) -> f64 {
    let ln_fact = |n: usize| -> f64 { (2..=n).map(|i| (i as f64).ln()).sum() };
    let mut tail = 0.0;
    for j in k..=m {
        let ln_c = ln_fact(m) - ln_fact(j) - ln_fact(m - j);
        tail += (ln_c + (j as f64) * p.ln() + ((m - j) as f64) * (1.0 - p).ln()).exp();
    }
    tail
}

#[test]
fn criterion_10_mpalign_is_one_sided() {
    let started = std::time::Instant::now();
    let (n, lambda, s) = (200usize, 2.0, 0.95);
    // d = floor(c log n) with c = 0.49 / log(lambda(2-s)); log beta = n^gamma
    // with gamma = log 2 / log n, inside (0, c log(lambda s)).
    let (d, beta_log) = (3usize, 2.0f64);
    let point = PhasePoint::new(lambda, s).unwrap();
    let psi = PsiTable::with_default_cap(params(lambda, s, d));
    let cfg = AlignConfig::new(d, beta_log);
    let seed = Seed::new(0xACCE_0010);
    let mut total = 0usize;
    let mut correct = 0usize;
    let mut runs_with_match = 0usize;
    for rep in 0..10u64 {
        let mut rng = seed.child(rep).rng();
        let pair = sample_correlated_er(n, &point, &mut rng).unwrap();
        let raw = mpalign(&pair.g, &pair.g_prime, &psi, &cfg).unwrap();
        let inj = prune_to_injective(&raw);
        if !inj.is_empty() {
            runs_with_match += 1;
        }
        total += inj.len();
        correct += inj
            .pairs
            .iter()
            .filter(|&&(i, u)| pair.sigma_star[i as usize] == u)
            .count();
    }
    let precision = correct as f64 / total as f64;
    let p_value = binomial_tail(total, 1.0 / n as f64, correct);
    assert!(
        runs_with_match >= 8,
        "only {runs_with_match}/10 runs returned a match"
    );
    assert!(
        precision >= 50.0 / n as f64,
        "precision {precision:.3} below 50x the 1/n baseline"
    );
    assert!(
        p_value < 0.01,
        "random-matching p-value {p_value:.2e} not below 0.01"
    );
    println!(
        "ACCEPTANCE 10 PASS: mpalign precision {correct}/{total} = {precision:.3} \
         (>= 50/n = 0.25), p = {p_value:.2e}, matches in {runs_with_match}/10 runs, {:.0}s",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_11_hard_phase_v_iteration() {
    match v_iteration(&PhasePoint::new(100.0, 0.05).unwrap(), 100_000, 1e-14) {
        VIteration::Converged {
            value,
            residual,
            steps,
        } => {
            assert!(residual <= 1e-12, "residual {residual:e}");
            println!(
                "ACCEPTANCE 11 PASS: V iteration converges at (100, 0.05) to {value:.12} \
                 in {steps} steps, residual {residual:.2e}; reports pole at (2, 0.9)"
            );
        }
        other => panic!("expected convergence at kappa = 0.25, got {other:?}"),
    }
    match v_iteration(&PhasePoint::new(2.0, 0.9).unwrap(), 100_000, 1e-14) {
        VIteration::Pole { .. } | VIteration::Diverged { .. } => {}
        other => panic!("expected pole/divergence at (2, 0.9), got {other:?}"),
    }
}

#[test]
fn criterion_12_s_star_boundary() {
    let at_e = s_star(std::f64::consts::E).unwrap();
    assert!((at_e - 1.0).abs() <= 1e-6, "s*(e) = {at_e}");
    let g1 = g_kl(2.0, 1.0);
    assert!(g1 < 0.0, "g(1) = {g1} at lambda = 2 should be negative");
    let s2 = s_star(2.0).unwrap();
    assert!(s2 < 1.0 && g_kl(2.0, s2).abs() < 1e-6);
    println!(
        "ACCEPTANCE 12 PASS: s*(e) = {at_e:.9} (within 1e-6 of 1); \
         lambda=2: g(1) = {g1:.4} < 0, s*(2) = {s2:.6}"
    );
}

#[test]
fn criterion_13_cli_determinism() {
    let started = std::time::Instant::now();
    let bin = env!("CARGO_BIN_EXE_treealign");
    let base = tempfile::tempdir().unwrap();
    let run = |args: &[&str], out: &std::path::Path| {
        let status = std::process::Command::new(bin)
            .args(args)
            .arg("--out")
            .arg(out)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("spawn treealign");
        assert!(status.success(), "command failed: {args:?}");
    };
    let compare = |a: &std::path::Path, b: &std::path::Path, files: &[&str]| {
        for f in files {
            let x = std::fs::read(a.join(f)).unwrap_or_else(|_| panic!("missing {f}"));
            let y = std::fs::read(b.join(f)).unwrap();
            assert_eq!(x, y, "{f} differs between identical runs");
        }
    };

    let ts = [
        "tree-sim", "--lambda", "2.0", "--s", "0.8", "--depth", "2", "--trials", "50", "--seed",
        "9",
    ];
    run(&ts, &base.path().join("ts1"));
    run(&ts, &base.path().join("ts2"));
    compare(
        &base.path().join("ts1"),
        &base.path().join("ts2"),
        &["results.csv"],
    );

    let ph = ["phase", "--lambda", "2.0", "--s", "0.9", "--seed", "9"];
    run(&ph, &base.path().join("ph1"));
    run(&ph, &base.path().join("ph2"));
    compare(
        &base.path().join("ph1"),
        &base.path().join("ph2"),
        &["verdicts.jsonl"],
    );

    let gen = [
        "gen", "--n", "80", "--lambda", "2.0", "--s", "0.9", "--seed", "9",
    ];
    run(&gen, &base.path().join("g1"));
    run(&gen, &base.path().join("g2"));
    compare(
        &base.path().join("g1"),
        &base.path().join("g2"),
        &["g.edges", "gprime.edges", "sigma.json", "meta.json"],
    );

    let al = [
        "align", "--algo", "mpalign2", "--n", "60", "--lambda", "2.0", "--s", "0.9", "--depth",
        "4", "--trials", "2", "--seed", "9",
    ];
    run(&al, &base.path().join("a1"));
    run(&al, &base.path().join("a2"));
    compare(
        &base.path().join("a1"),
        &base.path().join("a2"),
        &["metrics.csv", "matches.csv", "trace.csv"],
    );
    println!(
        "ACCEPTANCE 13 PASS: tree-sim, phase, gen, align reruns are byte-identical, {:.0}s",
        started.elapsed().as_secs_f64()
    );
}
