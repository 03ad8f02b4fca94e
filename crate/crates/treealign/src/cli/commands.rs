//! The four experiment commands. Every command writes deterministic data
//! files (CSV / JSONL / bundles) under the output directory and returns the
//! list of files written, for digesting into the run manifest.

use super::config::{Algo, AlignPlan, GenPlan, PhasePlan, TreeSimPlan};
use crate::align::{self, AlignConfig};
use crate::detection::{
    attach_exceedance_evidence, phase_scan, summarize, PhasePoint, PhaseScanConfig,
};
use crate::graphs::{
    largest_component, load_pair_bundle, metrics, sample_correlated_er, save_pair_bundle,
    CorrelatedPair, PairMeta, PartialMap,
};
use crate::likelihood::PsiTable;
use crate::trees::{Hypothesis, Seed};
use crate::{ModelParams, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "# treealign-csv v1";

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Grid sweep over `(lambda, s, d)`: mean `log L_d` and exceedance
/// frequencies under both hypotheses, one CSV row per statistic.
pub fn cmd_tree_sim(plan: &TreeSimPlan, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let seed = Seed::new(plan.seed);
    let mut csv =
        format!("{CSV_HEADER}\nlambda,s,d,hypothesis,statistic,value,std_error,n_trials,seed\n");
    let mut task = 0u64;
    for &lambda in &plan.lambdas {
        for &s in &plan.ss {
            let point = PhasePoint::new(lambda, s)?;
            for &d in &plan.depths {
                for hyp in [Hypothesis::H0, Hypothesis::H1] {
                    let samples = crate::detection::sample_log_lr(
                        &point,
                        d,
                        hyp,
                        plan.trials,
                        &seed.child(task),
                        plan.degree_cap,
                    )?;
                    task += 1;
                    let stats = summarize(&samples, &plan.betas);
                    let h = hyp.label();
                    writeln!(
                        csv,
                        "{lambda},{s},{d},{h},mean_log_lr,{},{},{},{}",
                        stats.mean, stats.std_error, plan.trials, plan.seed
                    )
                    .expect("write to string");
                    for e in &stats.exceed {
                        writeln!(
                            csv,
                            "{lambda},{s},{d},{h},exceed_{},{},{},{},{}",
                            e.beta, e.frequency, e.std_error, plan.trials, plan.seed
                        )
                        .expect("write to string");
                    }
                }
            }
        }
    }
    Ok(vec![write_file(out_dir, "results.csv", &csv)?])
}

/// Analytic scan over the `(lambda, s)` grid, one verdict JSON per line.
pub fn cmd_phase(plan: &PhasePlan, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut grid = Vec::new();
    for &lambda in &plan.lambdas {
        for &s in &plan.ss {
            grid.push(PhasePoint::new(lambda, s)?);
        }
    }
    let config = PhaseScanConfig {
        r0: plan.r0,
        eta: plan.eta,
        ..PhaseScanConfig::default()
    };
    let mut verdicts = phase_scan(&grid, &config);
    if plan.mc_trials > 0 {
        attach_exceedance_evidence(
            &mut verdicts,
            plan.mc_d,
            &plan.mc_betas,
            plan.mc_trials,
            &Seed::new(plan.seed),
        )?;
    }
    let mut jsonl = String::new();
    for v in &verdicts {
        jsonl.push_str(&serde_json::to_string(v)?);
        jsonl.push('\n');
    }
    Ok(vec![write_file(out_dir, "verdicts.jsonl", &jsonl)?])
}

fn load_or_sample(plan: &AlignPlan, repeat: u64) -> Result<(CorrelatedPair, u64)> {
    match &plan.load {
        Some(dir) => {
            let (pair, meta) = load_pair_bundle(dir)?;
            Ok((pair, meta.seed))
        }
        None => {
            let point = PhasePoint::new(plan.lambda, plan.s)?;
            let seed = Seed::new(plan.seed).child(repeat);
            let mut rng = seed.rng();
            Ok((sample_correlated_er(plan.n, &point, &mut rng)?, plan.seed))
        }
    }
}

/// Sample (or load) correlated pairs and run the chosen aligner, emitting
/// metrics, the match set, and (for mpalign2) the match-edges trace.
pub fn cmd_align(plan: &AlignPlan, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let params = ModelParams::new(plan.lambda, plan.s, plan.d)?;
    let psi = PsiTable::new(params, plan.degree_cap);
    let config = AlignConfig {
        gamma: plan.gamma,
        ..AlignConfig::new(plan.d, plan.beta_log).with_degree_cap(plan.degree_cap)
    };

    let mut metrics_csv = format!(
        "{CSV_HEADER}\nrepeat,algo,n,lambda,s,d,beta_log,t_star,matched,overlap,error_fraction\n"
    );
    let mut matches_csv = format!("{CSV_HEADER}\nrepeat,i,u,log_score\n");
    let mut trace_csv = format!("{CSV_HEADER}\nrepeat,t,match_edges,overlap\n");

    let repeats = if plan.load.is_some() { 1 } else { plan.repeats };
    for repeat in 0..repeats as u64 {
        let (pair, _) = load_or_sample(plan, repeat)?;
        match plan.algo {
            Algo::Mpalign => {
                let scored = align::mpalign_with_scores(&pair.g, &pair.g_prime, &psi, &config)?;
                let raw = PartialMap::new(scored.iter().map(|&(i, u, _)| (i, u)).collect());
                let injective = align::prune_to_injective(&raw);
                let kept: std::collections::HashSet<(u32, u32)> =
                    injective.pairs.iter().copied().collect();
                for &(i, u, score) in &scored {
                    if kept.contains(&(i, u)) {
                        writeln!(matches_csv, "{repeat},{i},{u},{score}").expect("string write");
                    }
                }
                let m = metrics(&injective, &pair.sigma_star, plan.n)?;
                writeln!(
                    metrics_csv,
                    "{repeat},mpalign,{},{},{},{},{},,{},{},{}",
                    plan.n,
                    plan.lambda,
                    plan.s,
                    plan.d,
                    plan.beta_log,
                    m.matched,
                    m.overlap,
                    m.error_fraction
                )
                .expect("string write");
            }
            Algo::Mpalign2 => {
                // Keep only the largest components, then map the planted
                // permutation into component coordinates for diagnostics.
                let (g, map_g) = largest_component(&pair.g);
                let (gp, map_gp) = largest_component(&pair.g_prime);
                let new_to_old_g: Vec<u32> = invert_component_map(&map_g);
                let new_to_old_gp: Vec<u32> = invert_component_map(&map_gp);
                let truth: Vec<Option<u32>> = new_to_old_g
                    .iter()
                    .map(|&old_i| map_gp[pair.sigma_star[old_i as usize] as usize])
                    .collect();
                let r = align::mpalign2(&g, &gp, &psi, plan.d, &config, Some(&truth))?;
                for it in &r.trace {
                    let overlap = match (it.correct_pi, it.correct_sigma) {
                        (Some(cp), Some(cs)) => {
                            ((cp + cs) as f64 / 2.0 / plan.n as f64).to_string()
                        }
                        _ => String::new(),
                    };
                    writeln!(trace_csv, "{repeat},{},{},{overlap}", it.t, it.match_edges)
                        .expect("string write");
                }
                for (i_new, &u_new) in r.pi.iter().enumerate() {
                    let score = r.scores_at_star.get(i_new, u_new as usize).ln();
                    writeln!(
                        matches_csv,
                        "{repeat},{},{},{score}",
                        new_to_old_g[i_new], new_to_old_gp[u_new as usize]
                    )
                    .expect("string write");
                }
                let star = &r.trace[r.t_star];
                let correct = (star.correct_pi.unwrap() + star.correct_sigma.unwrap()) as f64 / 2.0;
                let overlap = correct / plan.n as f64;
                let error = (g.node_count() as f64 - correct) / plan.n as f64;
                writeln!(
                    metrics_csv,
                    "{repeat},mpalign2,{},{},{},{},,{},{},{},{}",
                    plan.n,
                    plan.lambda,
                    plan.s,
                    plan.d,
                    r.t_star,
                    g.node_count(),
                    overlap,
                    error
                )
                .expect("string write");
            }
        }
    }

    let mut files = vec![
        write_file(out_dir, "metrics.csv", &metrics_csv)?,
        write_file(out_dir, "matches.csv", &matches_csv)?,
    ];
    if plan.algo == Algo::Mpalign2 {
        files.push(write_file(out_dir, "trace.csv", &trace_csv)?);
    }
    files.push(write_file(
        out_dir,
        "meta.json",
        &serde_json::to_string_pretty(plan)?,
    )?);
    Ok(files)
}

fn invert_component_map(old_to_new: &[Option<u32>]) -> Vec<u32> {
    let count = old_to_new.iter().flatten().count();
    let mut inv = vec![0u32; count];
    for (old, &new) in old_to_new.iter().enumerate() {
        if let Some(new) = new {
            inv[new as usize] = old as u32;
        }
    }
    inv
}

/// Write a correlated-pair bundle directory.
pub fn cmd_gen(plan: &GenPlan, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let point = PhasePoint::new(plan.lambda, plan.s)?;
    let seed = Seed::new(plan.seed);
    let mut rng = seed.child(0).rng();
    let pair = sample_correlated_er(plan.n, &point, &mut rng)?;
    let meta = PairMeta {
        lambda: plan.lambda,
        s: plan.s,
        n: plan.n,
        seed: plan.seed,
    };
    std::fs::create_dir_all(out_dir)?;
    save_pair_bundle(out_dir, &pair, &meta)?;
    Ok(vec![
        out_dir.join("g.edges"),
        out_dir.join("gprime.edges"),
        out_dir.join("sigma.json"),
        out_dir.join("meta.json"),
    ])
}
