//! Monte Carlo hypothesis-testing harness and analytic phase-diagram
//! predicates for the tree correlation problem.
//!
//! The Monte Carlo side samples tree pairs under either hypothesis and
//! summarizes `log L_d`: sample means estimate the KL divergence between the
//! correlated and independent models, exceedance frequencies estimate
//! `P(L_d > beta)`. The analytic side collects the closed-form ingredients of
//! the `(lambda, s)` phase diagram: the Galton-Watson extinction probability,
//! the entropy upper bound on the KL limit, the geometric KL recursion floor,
//! the `s*(lambda)` detectability threshold, the bounded-`V` iteration that
//! certifies failure of one-sided testing, and the automorphism-based
//! detectability condition.

use crate::likelihood::{likelihood_ratio, PairMemo, PsiTable};
use crate::numeric::{ln_factorial, xlogx};
use crate::trees::{sample_pair, Hypothesis, Seed};
use crate::{Error, ModelParams, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A `(lambda, s)` coordinate of the phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub lambda: f64,
    pub s: f64,
}

impl PhasePoint {
    pub fn new(lambda: f64, s: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("s must be in [0, 1], got {s}")));
        }
        Ok(PhasePoint { lambda, s })
    }

    /// Mean offspring of the intersection tree.
    pub fn lambda_s(&self) -> f64 {
        self.lambda * self.s
    }

    /// `kappa = lambda * s^2`, the contraction rate of the V iteration.
    pub fn kappa(&self) -> f64 {
        self.lambda * self.s * self.s
    }

    pub fn s_bar(&self) -> f64 {
        1.0 - self.s
    }

    pub fn params(&self, depth: usize) -> ModelParams {
        ModelParams::new(self.lambda, self.s, depth).expect("validated point")
    }
}

/// Exceedance record for one threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExceedEntry {
    pub beta: f64,
    pub count: usize,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
}

/// Summary of a Monte Carlo run over `log L_d` samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub n_trials: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `(level, value)` pairs of empirical quantiles of `log L_d`.
    pub quantiles: Vec<(f64, f64)>,
    pub exceed: Vec<ExceedEntry>,
}

/// Default quantile levels reported by [`summarize`].
pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Summarize `log L_d` samples: mean, standard error, quantiles, and the
/// frequency of `L_d > beta` for each requested threshold.
pub fn summarize(samples: &[f64], betas: &[f64]) -> MonteCarloStats {
    let n = samples.len();
    assert!(n > 1, "need at least two samples");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std_error = (var / n as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("log samples are never NaN"));
    let quantiles = QUANTILE_LEVELS
        .iter()
        .map(|&q| {
            let idx = ((q * n as f64) as usize).min(n - 1);
            (q, sorted[idx])
        })
        .collect();
    let exceed = betas
        .iter()
        .map(|&beta| {
            let ln_beta = beta.ln();
            let count = samples.iter().filter(|&&x| x > ln_beta).count();
            let f = count as f64 / n as f64;
            ExceedEntry {
                beta,
                count,
                frequency: f,
                std_error: (f * (1.0 - f) / n as f64).sqrt(),
            }
        })
        .collect();
    MonteCarloStats {
        n_trials: n,
        mean,
        std_error,
        quantiles,
        exceed,
    }
}

/// Draw `n_trials` tree pairs at depth `d` under `hypothesis` and return
/// `log L_d` per trial. Trials run in parallel on seeds derived as
/// `seed.child(trial)`, so the output is independent of scheduling.
pub fn sample_log_lr(
    point: &PhasePoint,
    d: usize,
    hypothesis: Hypothesis,
    n_trials: usize,
    seed: &Seed,
    degree_cap: usize,
) -> Result<Vec<f64>> {
    let params = point.params(d);
    let psi = PsiTable::new(params, degree_cap);
    (0..n_trials)
        .into_par_iter()
        .map_init(PairMemo::new, |memo, trial| {
            let mut rng = seed.child(trial as u64).rng();
            let pair = sample_pair(&params, hypothesis, &mut rng)?;
            Ok(likelihood_ratio(&pair.t, &pair.t_prime, d, &psi, memo)?.ln())
        })
        .collect()
}

/// Estimate `KL_d = E_1[log L_d]` by Monte Carlo.
pub fn kl_estimate(
    point: &PhasePoint,
    d: usize,
    n_trials: usize,
    seed: &Seed,
) -> Result<MonteCarloStats> {
    if n_trials < 100 {
        return Err(Error::Domain(format!(
            "kl_estimate needs n_trials >= 100, got {n_trials}"
        )));
    }
    let samples = sample_log_lr(
        point,
        d,
        Hypothesis::H1,
        n_trials,
        seed,
        crate::likelihood::DEFAULT_DEGREE_CAP,
    )?;
    Ok(summarize(&samples, &[]))
}

/// Empirical exceedance frequencies of `L_d` under both hypotheses.
pub fn exceedance_curve(
    point: &PhasePoint,
    d: usize,
    betas: &[f64],
    n_trials: usize,
    seed: &Seed,
) -> Result<(MonteCarloStats, MonteCarloStats)> {
    if betas.iter().any(|&b| b <= 0.0) {
        return Err(Error::Domain("betas must be positive".into()));
    }
    let cap = crate::likelihood::DEFAULT_DEGREE_CAP;
    let h0 = sample_log_lr(point, d, Hypothesis::H0, n_trials, &seed.child(0), cap)?;
    let h1 = sample_log_lr(point, d, Hypothesis::H1, n_trials, &seed.child(1), cap)?;
    Ok((summarize(&h0, betas), summarize(&h1, betas)))
}

/// Smallest fixed point in `[0, 1]` of `x = exp(mu (x - 1))`: the extinction
/// probability of a Galton-Watson tree with Poisson(`mu`) offspring. Exactly
/// 1 for `mu <= 1`; residual below 1e-12 otherwise.
pub fn extinction_probability(mu: f64) -> f64 {
    assert!(mu > 0.0, "mu must be positive");
    if mu <= 1.0 {
        return 1.0;
    }
    // g(x) = x - exp(mu(x-1)) is concave with g(0) < 0 < g(x) on (x*, 1), so
    // Newton from 0 climbs monotonically into the smallest root.
    let g = |x: f64| x - (mu * (x - 1.0)).exp();
    let dg = |x: f64| 1.0 - mu * (mu * (x - 1.0)).exp();
    let mut x = 0.0f64;
    for _ in 0..200 {
        let step = g(x) / dg(x);
        let next = (x - step).clamp(0.0, 1.0);
        if (next - x).abs() <= 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    debug_assert!(g(x).abs() <= 1e-12);
    x
}

/// Shannon entropy of the Poisson(`mu`) distribution by series summation,
/// truncated when the tail term drops below 1e-15 of the running sum.
pub fn poisson_entropy(mu: f64) -> f64 {
    assert!(mu > 0.0);
    let ln_mu = mu.ln();
    let mut acc = 0.0f64;
    let mut k = 0usize;
    loop {
        let ln_pk = -mu + (k as f64) * ln_mu - ln_factorial(k);
        let term = -ln_pk.exp() * ln_pk;
        acc += term;
        if k as f64 > mu && term.abs() < 1e-15 * acc.abs().max(1e-300) {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break; // unreachable for sane mu; keeps the loop total
        }
    }
    acc
}

/// Upper bound on `lim_d KL_d`: `Ent(Poisson(lambda s)) / (1 - lambda s)`
/// when `lambda s < 1`, infinite (vacuous) otherwise.
pub fn kl_entropy_bound(point: &PhasePoint) -> f64 {
    let mu = point.lambda_s();
    if mu >= 1.0 {
        return f64::INFINITY;
    }
    if mu == 0.0 {
        return 0.0;
    }
    poisson_entropy(mu) / (1.0 - mu)
}

/// The geometric KL recursion floor: a lower bound on `KL_{d+1}` given
/// `KL_d`, namely `lambda s KL_d + lambda s (log(s/lambda) + 1)
/// + 2 lambda (1-s) log(1-s)` with the `0 log 0 = 0` convention at `s = 1`.
pub fn kl_recursion_floor(point: &PhasePoint, kl_d: f64) -> f64 {
    debug_assert!(kl_d >= 0.0);
    let (lambda, s) = (point.lambda, point.s);
    let ls = point.lambda_s();
    let drift = if ls == 0.0 {
        0.0
    } else {
        ls * ((s / lambda).ln() + 1.0)
    };
    ls * kl_d + drift + 2.0 * lambda * xlogx(1.0 - s)
}

/// `g(s) = s (log(lambda/s) - 1) - 2 (1-s) log(1-s)`; detectability holds
/// above its largest zero.
pub fn g_kl(lambda: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    s * ((lambda / s).ln() - 1.0) - 2.0 * xlogx(1.0 - s)
}

/// Result of the `s*` threshold scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SStarScan {
    pub value: f64,
    /// Sign changes of `g` seen on the 1e3-point grid; more than one means
    /// the feasible set was not an interval and `value` is its supremum.
    pub sign_changes: usize,
}

/// `s*(lambda) = sup { s in [0,1] : g(s) >= 0 }` for `lambda` in `(1, e]`,
/// located by a downward grid scan plus bisection to 1e-9.
pub fn s_star(lambda: f64) -> Result<f64> {
    Ok(s_star_scan(lambda)?.value)
}

pub fn s_star_scan(lambda: f64) -> Result<SStarScan> {
    if !(lambda > 1.0 && lambda <= std::f64::consts::E + 1e-12) {
        return Err(Error::Domain(format!(
            "s_star requires lambda in (1, e], got {lambda}"
        )));
    }
    if g_kl(lambda, 1.0) >= 0.0 {
        return Ok(SStarScan {
            value: 1.0,
            sign_changes: 0,
        });
    }
    const GRID: usize = 1000;
    let at = |i: usize| i as f64 / GRID as f64;
    let mut sign_changes = 0usize;
    let mut prev_nonneg = true; // g(0) = 0
    let mut top: Option<usize> = None; // highest grid index with g >= 0
    for i in 1..=GRID {
        let nonneg = g_kl(lambda, at(i)) >= 0.0;
        if nonneg != prev_nonneg {
            sign_changes += 1;
        }
        if nonneg {
            top = Some(i);
        }
        prev_nonneg = nonneg;
    }
    let top = top.ok_or_else(|| {
        Error::Domain(format!("g(s) < 0 on the whole grid for lambda = {lambda}"))
    })?;
    // Bisect the crossing inside (top, top+1].
    let (mut lo, mut hi) = (at(top), at(top + 1));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g_kl(lambda, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SStarScan {
        value: lo,
        sign_changes,
    })
}

/// One application of the V iteration map
/// `f(x) = exp(kappa (1-s)(x-1) / (1-sx)) / (1-sx)`.
pub fn v_map(point: &PhasePoint, x: f64) -> f64 {
    let s = point.s;
    debug_assert!(s * x < 1.0, "v_map evaluated at or past its pole");
    let denom = 1.0 - s * x;
    (point.kappa() * (1.0 - s) * (x - 1.0) / denom).exp() / denom
}

/// Outcome of iterating `V_{d+1} = f(V_d)` from `V_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VIteration {
    /// `|V_{d+1} - V_d| <= tol`; a finite fixed point, so the mutual
    /// information stays bounded and one-sided testing fails.
    Converged {
        value: f64,
        steps: usize,
        residual: f64,
    },
    /// The iterate reached `s x >= 1` where `f` is undefined.
    Pole { step: usize },
    /// Budget exhausted without convergence or pole.
    Diverged { steps: usize, last: f64 },
}

pub fn v_iteration(point: &PhasePoint, d_max: usize, tol: f64) -> VIteration {
    let s = point.s;
    let mut v = 1.0f64;
    for step in 1..=d_max {
        if s * v >= 1.0 {
            return VIteration::Pole { step };
        }
        let next = v_map(point, v);
        if (next - v).abs() <= tol {
            let residual = if s * next < 1.0 {
                (v_map(point, next) - next).abs()
            } else {
                0.0
            };
            return VIteration::Converged {
                value: next,
                steps: step,
                residual,
            };
        }
        v = next;
    }
    VIteration::Diverged {
        steps: d_max,
        last: v,
    }
}

/// The automorphism-count detectability condition:
/// `lambda s > r0` and `1 - s <= sqrt(log(lambda s) / (lambda^3 s)) / (3 + eta)`.
pub fn auto_condition(point: &PhasePoint, r0: f64, eta: f64) -> bool {
    assert!(r0 > 1.0 && eta > 0.0, "r0 > 1 and eta > 0 required");
    let r = point.lambda_s();
    if r <= r0 {
        return false;
    }
    let rhs = (r.ln() / (point.lambda.powi(3) * point.s)).sqrt() / (3.0 + eta);
    1.0 - point.s <= rhs
}

/// Guaranteed recoverable fraction for the triple-branch aligner:
/// `(1 - p_ext(lambda s))^3 * P(Poisson(lambda s) >= 3)`.
pub fn alpha_bound(point: &PhasePoint) -> f64 {
    let mu = point.lambda_s();
    if mu <= 1.0 {
        return 0.0;
    }
    let survive = 1.0 - extinction_probability(mu);
    let tail = 1.0 - (-mu).exp() * (1.0 + mu + mu * mu / 2.0);
    survive.powi(3) * tail
}

/// Phase labels; `Impossible` excludes both `Detectable*` labels, the rest
/// may co-occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    #[serde(rename = "IMPOSSIBLE_LS_LE_1")]
    Impossible,
    #[serde(rename = "DETECTABLE_KL")]
    DetectableKl,
    #[serde(rename = "DETECTABLE_AUTO")]
    DetectableAuto,
    #[serde(rename = "HARD_CANDIDATE")]
    HardCandidate,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

/// Numeric evidence backing the labels of one verdict. The KL entropy bound
/// is `None` when infinite (vacuous for `lambda s >= 1`), since JSON has no
/// infinity literal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseEvidence {
    pub lambda_s: f64,
    pub kappa: f64,
    pub kl_entropy_bound: Option<f64>,
    pub s_star: Option<f64>,
    pub v_iteration: VIteration,
    pub alpha_bound: f64,
    pub r0: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceedance: Option<ExceedEvidence>,
}

/// Optional Monte Carlo exceedance attachment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExceedEvidence {
    pub d: usize,
    pub n_trials: usize,
    pub h0: Vec<ExceedEntry>,
    pub h1: Vec<ExceedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseVerdict {
    pub point: PhasePoint,
    pub labels: Vec<PhaseLabel>,
    pub evidence: PhaseEvidence,
}

/// Constants and budgets for [`phase_scan`]. `r0` and `eta` are exposed
/// rather than baked in: the automorphism condition only fixes them up to
/// "large enough", and verdicts echo the values used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseScanConfig {
    pub r0: f64,
    pub eta: f64,
    pub v_d_max: usize,
    pub v_tol: f64,
}

impl Default for PhaseScanConfig {
    fn default() -> Self {
        PhaseScanConfig {
            r0: 20.0,
            eta: 0.1,
            v_d_max: 100_000,
            v_tol: 1e-13,
        }
    }
}

/// Label every grid point:
/// `lambda s <= 1` is impossible; `lambda in (1, e)` with `s > s*(lambda)` is
/// KL-detectable; the automorphism condition gives a second detectable
/// region; a converged V iteration with `lambda s > 1` marks the conjectured
/// hard region; anything else is unknown.
pub fn phase_scan(grid: &[PhasePoint], config: &PhaseScanConfig) -> Vec<PhaseVerdict> {
    grid.iter()
        .map(|&point| {
            let ls = point.lambda_s();
            let sstar = if point.lambda > 1.0 && point.lambda < std::f64::consts::E {
                s_star(point.lambda).ok()
            } else {
                None
            };
            let v = v_iteration(&point, config.v_d_max, config.v_tol);
            let mut labels = Vec::new();
            let mut note = None;
            if ls <= 1.0 {
                labels.push(PhaseLabel::Impossible);
            } else {
                if let Some(sv) = sstar {
                    if point.s > sv {
                        labels.push(PhaseLabel::DetectableKl);
                    }
                }
                if auto_condition(&point, config.r0, config.eta) {
                    labels.push(PhaseLabel::DetectableAuto);
                }
                if matches!(v, VIteration::Converged { .. }) {
                    labels.push(PhaseLabel::HardCandidate);
                    note = Some(
                        "conjectured hard: bounded V iteration rules out one-sided \
                         tree detection, not alignment itself"
                            .to_string(),
                    );
                }
            }
            if labels.is_empty() {
                labels.push(PhaseLabel::Unknown);
            }
            let bound = kl_entropy_bound(&point);
            PhaseVerdict {
                point,
                labels,
                evidence: PhaseEvidence {
                    lambda_s: ls,
                    kappa: point.kappa(),
                    kl_entropy_bound: bound.is_finite().then_some(bound),
                    s_star: sstar,
                    v_iteration: v,
                    alpha_bound: alpha_bound(&point),
                    r0: config.r0,
                    eta: config.eta,
                    note,
                    exceedance: None,
                },
            }
        })
        .collect()
}

/// Attach Monte Carlo exceedance evidence to already-labeled verdicts.
pub fn attach_exceedance_evidence(
    verdicts: &mut [PhaseVerdict],
    d: usize,
    betas: &[f64],
    n_trials: usize,
    seed: &Seed,
) -> Result<()> {
    for (i, v) in verdicts.iter_mut().enumerate() {
        let (h0, h1) = exceedance_curve(&v.point, d, betas, n_trials, &seed.child(i as u64))?;
        v.evidence.exceedance = Some(ExceedEvidence {
            d,
            n_trials,
            h0: h0.exceed,
            h1: h1.exceed,
        });
    }
    Ok(())
}
