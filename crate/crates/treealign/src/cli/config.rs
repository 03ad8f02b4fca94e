//! Experiment configuration: a TOML file plus flag overrides (flags win),
//! validated against module preconditions before any work starts.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Raw config file contents. Every field is optional; commands resolve the
/// blocks they need and reject missing or out-of-range values with the
/// field path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub tree_sim: TreeSimBlock,
    #[serde(default)]
    pub phase: PhaseBlock,
    #[serde(default)]
    pub align: AlignBlock,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub lambda: Option<f64>,
    pub s: Option<f64>,
    pub depth: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSimBlock {
    /// Grid overrides; default is the singleton from `[model]`.
    pub lambdas: Option<Vec<f64>>,
    pub ss: Option<Vec<f64>>,
    pub depths: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub betas: Option<Vec<f64>>,
    pub degree_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBlock {
    pub lambdas: Option<Vec<f64>>,
    pub ss: Option<Vec<f64>>,
    pub r0: Option<f64>,
    pub eta: Option<f64>,
    /// Monte Carlo exceedance evidence per verdict; 0 disables.
    pub mc_trials: Option<usize>,
    pub mc_d: Option<usize>,
    pub mc_betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignBlock {
    pub algo: Option<String>,
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub beta_log: Option<f64>,
    pub degree_cap: Option<usize>,
    pub repeats: Option<usize>,
    /// Bundle directory to load instead of sampling.
    pub load: Option<PathBuf>,
}

/// Flag overrides shared by all subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// Config file (TOML); flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; every trial derives a child stream from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo trials (tree-sim, phase evidence) or repeats (align).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Tree depth (tree-sim) or message-passing iteration budget (align).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Aligner: mpalign or mpalign2.
    #[arg(long)]
    pub algo: Option<String>,
    /// Threshold exponent: log(beta) = n^gamma.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Explicit log(beta); overrides gamma.
    #[arg(long = "beta-log", allow_negative_numbers = true)]
    pub beta_log: Option<f64>,
    #[arg(long = "degree-cap")]
    pub degree_cap: Option<usize>,
    /// Load a pair bundle directory instead of sampling (align only).
    #[arg(long)]
    pub load: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// File config with flag overrides applied.
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        if args.out.is_some() {
            cfg.out = args.out.clone();
        }
        if args.lambda.is_some() {
            cfg.model.lambda = args.lambda;
        }
        if args.s.is_some() {
            cfg.model.s = args.s;
        }
        if args.n.is_some() {
            cfg.model.n = args.n;
        }
        if args.depth.is_some() {
            cfg.model.depth = args.depth;
        }
        if args.trials.is_some() {
            cfg.tree_sim.trials = args.trials;
            cfg.align.repeats = args.trials;
            cfg.phase.mc_trials = args.trials;
        }
        if args.degree_cap.is_some() {
            cfg.tree_sim.degree_cap = args.degree_cap;
            cfg.align.degree_cap = args.degree_cap;
        }
        if args.algo.is_some() {
            cfg.align.algo = args.algo.clone();
        }
        if args.gamma.is_some() {
            cfg.align.gamma = args.gamma;
        }
        if args.beta_log.is_some() {
            cfg.align.beta_log = args.beta_log;
        }
        if args.load.is_some() {
            cfg.align.load = args.load.clone();
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn check_lambda(lambda: f64, path: &str) -> Result<f64> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(lambda)
    } else {
        Err(Error::Config(format!(
            "{path}: lambda must be > 0, got {lambda}"
        )))
    }
}

fn check_s(s: f64, path: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&s) {
        Ok(s)
    } else {
        Err(Error::Config(format!(
            "{path}: s must be in [0, 1], got {s}"
        )))
    }
}

/// Validated tree-sim plan.
#[derive(Debug, Clone, Serialize)]
pub struct TreeSimPlan {
    pub lambdas: Vec<f64>,
    pub ss: Vec<f64>,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub betas: Vec<f64>,
    pub degree_cap: usize,
    pub seed: u64,
}

pub fn resolve_tree_sim(cfg: &ExperimentConfig) -> Result<TreeSimPlan> {
    let lambdas = match (&cfg.tree_sim.lambdas, cfg.model.lambda) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(l)) => vec![l],
        _ => {
            return Err(Error::Config(
                "tree_sim.lambdas or model.lambda required".into(),
            ))
        }
    };
    for (i, &l) in lambdas.iter().enumerate() {
        check_lambda(l, &format!("tree_sim.lambdas[{i}]"))?;
    }
    let ss = match (&cfg.tree_sim.ss, cfg.model.s) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(s)) => vec![s],
        _ => return Err(Error::Config("tree_sim.ss or model.s required".into())),
    };
    for (i, &s) in ss.iter().enumerate() {
        check_s(s, &format!("tree_sim.ss[{i}]"))?;
    }
    let depths = match (&cfg.tree_sim.depths, cfg.model.depth) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(d)) => vec![d],
        _ => {
            return Err(Error::Config(
                "tree_sim.depths or model.depth required".into(),
            ))
        }
    };
    let trials = cfg.tree_sim.trials.unwrap_or(1000);
    if trials < 2 {
        return Err(Error::Config("tree_sim.trials: need at least 2".into()));
    }
    let betas = cfg
        .tree_sim
        .betas
        .clone()
        .unwrap_or_else(|| vec![100.0, 5000.0]);
    if betas.iter().any(|&b| b <= 0.0) {
        return Err(Error::Config(
            "tree_sim.betas: thresholds must be positive".into(),
        ));
    }
    Ok(TreeSimPlan {
        lambdas,
        ss,
        depths,
        trials,
        betas,
        degree_cap: cfg
            .tree_sim
            .degree_cap
            .unwrap_or(crate::likelihood::DEFAULT_DEGREE_CAP),
        seed: cfg.seed(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhasePlan {
    pub lambdas: Vec<f64>,
    pub ss: Vec<f64>,
    pub r0: f64,
    pub eta: f64,
    pub mc_trials: usize,
    pub mc_d: usize,
    pub mc_betas: Vec<f64>,
    pub seed: u64,
}

pub fn resolve_phase(cfg: &ExperimentConfig) -> Result<PhasePlan> {
    let lambdas = match (&cfg.phase.lambdas, cfg.model.lambda) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(l)) => vec![l],
        _ => {
            return Err(Error::Config(
                "phase.lambdas or model.lambda required".into(),
            ))
        }
    };
    for (i, &l) in lambdas.iter().enumerate() {
        check_lambda(l, &format!("phase.lambdas[{i}]"))?;
    }
    let ss = match (&cfg.phase.ss, cfg.model.s) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(s)) => vec![s],
        _ => return Err(Error::Config("phase.ss or model.s required".into())),
    };
    for (i, &s) in ss.iter().enumerate() {
        check_s(s, &format!("phase.ss[{i}]"))?;
    }
    let r0 = cfg.phase.r0.unwrap_or(20.0);
    if r0 <= 1.0 {
        return Err(Error::Config(format!("phase.r0: must be > 1, got {r0}")));
    }
    let eta = cfg.phase.eta.unwrap_or(0.1);
    if eta <= 0.0 {
        return Err(Error::Config(format!("phase.eta: must be > 0, got {eta}")));
    }
    Ok(PhasePlan {
        lambdas,
        ss,
        r0,
        eta,
        mc_trials: cfg.phase.mc_trials.unwrap_or(0),
        mc_d: cfg.phase.mc_d.unwrap_or(3),
        mc_betas: cfg.phase.mc_betas.clone().unwrap_or_else(|| vec![100.0]),
        seed: cfg.seed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Mpalign,
    Mpalign2,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignPlan {
    pub algo: Algo,
    pub n: usize,
    pub lambda: f64,
    pub s: f64,
    pub d: usize,
    pub gamma: Option<f64>,
    pub beta_log: f64,
    pub degree_cap: usize,
    pub repeats: usize,
    pub load: Option<PathBuf>,
    pub seed: u64,
}

pub fn resolve_align(cfg: &ExperimentConfig) -> Result<AlignPlan> {
    let algo = match cfg.align.algo.as_deref().unwrap_or("mpalign2") {
        "mpalign" => Algo::Mpalign,
        "mpalign2" => Algo::Mpalign2,
        other => {
            return Err(Error::Config(format!(
                "align.algo: expected mpalign or mpalign2, got {other:?}"
            )))
        }
    };
    let lambda = check_lambda(
        cfg.model
            .lambda
            .ok_or(Error::Config("model.lambda required".into()))?,
        "model.lambda",
    )?;
    let s = check_s(
        cfg.model
            .s
            .ok_or(Error::Config("model.s required".into()))?,
        "model.s",
    )?;
    let n = match &cfg.align.load {
        Some(dir) => {
            // Node count comes from the bundle; read the meta up front so
            // validation fails before any computation.
            let meta: crate::graphs::PairMeta = serde_json::from_str(
                &std::fs::read_to_string(dir.join("meta.json"))
                    .map_err(|e| Error::Config(format!("align.load: {e}")))?,
            )?;
            meta.n
        }
        None => cfg
            .model
            .n
            .ok_or(Error::Config("model.n required".into()))?,
    };
    if n < 2 {
        return Err(Error::Config(format!("model.n: must be >= 2, got {n}")));
    }
    // Depth and threshold: explicit values win, then gamma, then auto.
    let params = crate::ModelParams::new(lambda, s, 0)?;
    let auto = crate::align::AlignConfig::auto(n, &params).ok();
    let d = match (cfg.align.d, cfg.model.depth, &auto) {
        (Some(d), _, _) => d,
        (None, Some(d), _) => d,
        (None, None, Some(a)) => a.d,
        (None, None, None) => {
            return Err(Error::Config(
                "align.d required (auto derivation needs lambda s > 1 and lambda (2-s) > 1)".into(),
            ))
        }
    };
    if d < 1 {
        return Err(Error::Config("align.d: must be >= 1".into()));
    }
    let gamma = cfg.align.gamma.or(auto.as_ref().and_then(|a| a.gamma));
    if let Some(g) = gamma {
        if g <= 0.0 {
            return Err(Error::Config(format!("align.gamma: must be > 0, got {g}")));
        }
    }
    let beta_log = match (cfg.align.beta_log, gamma) {
        (Some(b), _) => b,
        (None, Some(g)) => (n as f64).powf(g),
        (None, None) => {
            if algo == Algo::Mpalign {
                return Err(Error::Config(
                    "align.beta_log or align.gamma required for mpalign".into(),
                ));
            }
            0.0 // unused by mpalign2
        }
    };
    let repeats = cfg.align.repeats.unwrap_or(1);
    if repeats < 1 {
        return Err(Error::Config("align.repeats: must be >= 1".into()));
    }
    Ok(AlignPlan {
        algo,
        n,
        lambda,
        s,
        d,
        gamma,
        beta_log,
        degree_cap: cfg
            .align
            .degree_cap
            .unwrap_or(crate::likelihood::DEFAULT_DEGREE_CAP),
        repeats,
        load: cfg.align.load.clone(),
        seed: cfg.seed(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenPlan {
    pub n: usize,
    pub lambda: f64,
    pub s: f64,
    pub seed: u64,
}

pub fn resolve_gen(cfg: &ExperimentConfig) -> Result<GenPlan> {
    let lambda = check_lambda(
        cfg.model
            .lambda
            .ok_or(Error::Config("model.lambda required".into()))?,
        "model.lambda",
    )?;
    let s = check_s(
        cfg.model
            .s
            .ok_or(Error::Config("model.s required".into()))?,
        "model.s",
    )?;
    let n = cfg
        .model
        .n
        .ok_or(Error::Config("model.n required".into()))?;
    if n < 2 {
        return Err(Error::Config(format!("model.n: must be >= 2, got {n}")));
    }
    Ok(GenPlan {
        n,
        lambda,
        s,
        seed: cfg.seed(),
    })
}
