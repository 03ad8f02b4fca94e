//! Log-domain likelihood ratios for the tree correlation test.
//!
//! The ratio of the correlated to the independent model factorizes over the
//! root: each term couples `k` matched children out of root degrees `(c, c')`
//! through the weight
//!
//! ```text
//! psi(k, c, c') = exp(lambda*s) * s^k * (1-s)^(c+c'-2k) / (lambda^k * k!)
//! ```
//!
//! and the depth-`d` ratio satisfies
//!
//! ```text
//! L_d(t, t') = sum_k psi(k, c, c') * sum_{injections} prod_i L_{d-1}(t_i, t'_j)
//! ```
//!
//! with `L_0 = 1`. [`matching_sum`] evaluates the inner double sum as a
//! partial-matching polynomial with a subset-mask DP over the smaller side;
//! [`likelihood_ratio`] runs the depth recursion with memoization on
//! canonical codes; [`likelihood_ratio_explicit`] is the exponential-cost
//! brute-force evaluation of the developed formula, kept as an oracle for
//! small inputs. Everything is carried in log space: realistic experiment
//! sizes push ratios far beyond `f64` range in the linear domain.

use crate::numeric::{ln_binomial, ln_factorial, logaddexp};
use crate::trees::{subtree_codes, RootedTree, TreePairSample};
use crate::{Error, ModelParams, Result};
use std::collections::HashMap;

/// Log of a nonnegative real; `-inf` encodes zero, never NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    #[inline]
    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "LogWeight must not be NaN");
        LogWeight(ln)
    }

    /// The stored logarithm.
    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Sum of the underlying values (log-sum-exp).
impl std::ops::Add for LogWeight {
    type Output = LogWeight;
    #[inline]
    fn add(self, rhs: LogWeight) -> LogWeight {
        LogWeight(logaddexp(self.0, rhs.0))
    }
}

impl std::ops::AddAssign for LogWeight {
    #[inline]
    fn add_assign(&mut self, rhs: LogWeight) {
        self.0 = logaddexp(self.0, rhs.0);
    }
}

/// Product of the underlying values (sum of logs).
impl std::ops::Mul for LogWeight {
    type Output = LogWeight;
    #[inline]
    fn mul(self, rhs: LogWeight) -> LogWeight {
        if self.is_zero() || rhs.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + rhs.0)
        }
    }
}

/// Default cap on the smaller side of the matching DP.
pub const DEFAULT_DEGREE_CAP: usize = 20;

/// Precomputed constants for evaluating `log psi` and the matching kernel.
#[derive(Debug, Clone)]
pub struct PsiTable {
    params: ModelParams,
    cap: usize,
    lambda_s: f64,
    ln_s: f64,
    ln_sbar: f64,
    ln_lambda: f64,
    /// `log z` with `z = s / (lambda * (1-s)^2)`; `-inf` at `s = 0`.
    ln_z: f64,
}

impl PsiTable {
    pub fn new(params: ModelParams, cap: usize) -> Self {
        let s = params.s;
        let sbar = 1.0 - s;
        PsiTable {
            params,
            cap,
            lambda_s: params.lambda * s,
            ln_s: s.ln(),
            ln_sbar: sbar.ln(),
            ln_lambda: params.lambda.ln(),
            ln_z: if s == 0.0 {
                f64::NEG_INFINITY
            } else {
                s.ln() - params.lambda.ln() - 2.0 * sbar.ln()
            },
        }
    }

    pub fn with_default_cap(params: ModelParams) -> Self {
        Self::new(params, DEFAULT_DEGREE_CAP)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// `log psi(k, c, c')`. At `s = 1` this is zero unless `k = c = c'`, in
    /// which case it equals `log(e^lambda / (lambda^c c!))`.
    pub fn log_psi(&self, k: usize, c: usize, c_prime: usize) -> Result<LogWeight> {
        if k > c.min(c_prime) {
            return Err(Error::Domain(format!(
                "psi requires k <= min(c, c'), got k={k}, c={c}, c'={c_prime}"
            )));
        }
        let s = self.params.s;
        if s == 1.0 {
            return Ok(if c + c_prime != 2 * k {
                LogWeight::ZERO
            } else {
                LogWeight::from_ln(
                    self.params.lambda - (c as f64) * self.ln_lambda - ln_factorial(c),
                )
            });
        }
        if s == 0.0 {
            return Ok(if k > 0 {
                LogWeight::ZERO
            } else {
                LogWeight::ONE
            });
        }
        Ok(LogWeight::from_ln(
            self.lambda_s + (k as f64) * self.ln_s + ((c + c_prime - 2 * k) as f64) * self.ln_sbar
                - (k as f64) * self.ln_lambda
                - ln_factorial(k),
        ))
    }

    /// `log(k! * psi(k, c, c'))`, the subset-matching normalization.
    pub fn log_psi_tilde(&self, k: usize, c: usize, c_prime: usize) -> Result<LogWeight> {
        Ok(LogWeight::from_ln(
            self.log_psi(k, c, c_prime)?.ln() + ln_factorial(k),
        ))
    }
}

/// `log sum_k psi(k, c, c') * sum_{injection pairs} prod W[sigma(i)][sigma'(i)]`
/// for a row-major `c x c_prime` matrix of log child-pair ratios.
///
/// The injection double sum collapses to `k!` times the size-`k` matching
/// polynomial `M_k` of `exp(W)`, so the total is
/// `exp(lambda*s) * (1-s)^(c+c') * sum_k z^k M_k` with
/// `z = s / (lambda (1-s)^2)`. `M_k` comes from a subset-mask DP over the
/// smaller side (`O(max * 2^min * min)`); the `s = 1` singularity takes the
/// dedicated full-permanent branch instead of clamping `s`.
pub fn matching_sum(
    weights: &[LogWeight],
    c: usize,
    c_prime: usize,
    psi: &PsiTable,
) -> Result<LogWeight> {
    assert_eq!(weights.len(), c * c_prime, "weight matrix shape mismatch");
    let m = c.min(c_prime);
    if m > psi.cap {
        return Err(Error::DegreeCapExceeded {
            degree: m,
            cap: psi.cap,
            at: String::new(),
        });
    }
    // Row index runs over the smaller side.
    let transposed = c_prime < c;
    let p = c.max(c_prime);
    let w = |i: usize, j: usize| -> f64 {
        if transposed {
            weights[j * c_prime + i].ln()
        } else {
            weights[i * c_prime + j].ln()
        }
    };

    let s = psi.params.s;
    if s == 1.0 {
        // psi vanishes unless k = c = c'; the survivor is the permanent term.
        if c != c_prime {
            return Ok(LogWeight::ZERO);
        }
        let mk = matching_polynomials(&w, m, p);
        return Ok(LogWeight::from_ln(
            psi.params.lambda - (c as f64) * psi.ln_lambda + mk[m],
        ));
    }

    let mk = matching_polynomials(&w, m, p);
    let mut total = f64::NEG_INFINITY;
    for (k, &log_mk) in mk.iter().enumerate() {
        if psi.ln_z == f64::NEG_INFINITY && k > 0 {
            break;
        }
        let term = if k == 0 {
            log_mk
        } else {
            (k as f64) * psi.ln_z + log_mk
        };
        total = logaddexp(total, term);
    }
    Ok(LogWeight::from_ln(
        psi.lambda_s + ((c + c_prime) as f64) * psi.ln_sbar + total,
    ))
}

/// `M_k` for `k = 0..=m` in log space: the sum over size-`k` partial
/// matchings of the products of matched entries (entries given as logs).
fn matching_polynomials(w: &impl Fn(usize, usize) -> f64, m: usize, p: usize) -> Vec<f64> {
    let full = 1usize << m;
    let mut g = vec![f64::NEG_INFINITY; full];
    g[0] = 0.0;
    for j in 0..p {
        let mut next = g.clone();
        for mask in 1..full {
            let mut acc = next[mask];
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let prev = g[mask ^ (1 << i)];
                if prev != f64::NEG_INFINITY {
                    let wij = w(i, j);
                    if wij != f64::NEG_INFINITY {
                        acc = logaddexp(acc, prev + wij);
                    }
                }
            }
            next[mask] = acc;
        }
        g = next;
    }
    let mut mk = vec![f64::NEG_INFINITY; m + 1];
    for (mask, &v) in g.iter().enumerate() {
        let k = mask.count_ones() as usize;
        mk[k] = logaddexp(mk[k], v);
    }
    mk
}

/// Memo for the depth recursion, keyed by the canonical codes of the two
/// subtrees and the remaining depth. Values are deterministic, so sharing a
/// memo across trials only trades memory for speed.
#[derive(Debug, Default)]
pub struct PairMemo {
    intern: HashMap<Vec<u8>, u32>,
    values: HashMap<(u32, u32, u32), LogWeight>,
}

impl PairMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn intern(&mut self, code: &[u8]) -> u32 {
        if let Some(&id) = self.intern.get(code) {
            return id;
        }
        let id = self.intern.len() as u32;
        self.intern.insert(code.to_vec(), id);
        id
    }
}

/// `log L_d(t, t')` by depth recursion. Only the prunings of `t`, `t'` at
/// depth `d` are read, matching the model where deeper nodes are unobserved.
pub fn likelihood_ratio(
    t: &RootedTree,
    t_prime: &RootedTree,
    d: usize,
    psi: &PsiTable,
    memo: &mut PairMemo,
) -> Result<LogWeight> {
    let codes_t = subtree_codes(t);
    let codes_tp = subtree_codes(t_prime);
    lr_rec(
        t,
        &codes_t,
        t.root(),
        t_prime,
        &codes_tp,
        t_prime.root(),
        d,
        psi,
        memo,
    )
}

#[allow(clippy::too_many_arguments)]
fn lr_rec(
    ta: &RootedTree,
    ca: &[Vec<u8>],
    va: usize,
    tb: &RootedTree,
    cb: &[Vec<u8>],
    vb: usize,
    d: usize,
    psi: &PsiTable,
    memo: &mut PairMemo,
) -> Result<LogWeight> {
    if d == 0 {
        return Ok(LogWeight::ONE); // L_0 is identically 1
    }
    // Canonical orientation: the ratio is symmetric, so order the pair by
    // code. This halves the memo and makes symmetry bit-exact.
    if ca[va] > cb[vb] {
        return lr_rec(tb, cb, vb, ta, ca, va, d, psi, memo);
    }
    let key = (memo.intern(&ca[va]), memo.intern(&cb[vb]), d as u32);
    if let Some(&v) = memo.values.get(&key) {
        return Ok(v);
    }
    let ch_a = ta.children(va);
    let ch_b = tb.children(vb);
    let mut weights = Vec::with_capacity(ch_a.len() * ch_b.len());
    for &x in ch_a {
        for &y in ch_b {
            weights.push(lr_rec(ta, ca, x, tb, cb, y, d - 1, psi, memo)?);
        }
    }
    let value = matching_sum(&weights, ch_a.len(), ch_b.len(), psi)?;
    memo.values.insert(key, value);
    Ok(value)
}

/// Node-count guard for the brute-force oracle.
pub const ORACLE_NODE_LIMIT: usize = 16;

/// Brute-force `log L_d(t, t')` from the developed formula: enumerate every
/// candidate ordered tree `tau` of depth <= d together with every pair of
/// structure-preserving injections into `t` and `t'`, and sum the products
/// of psi over the non-leaf levels of `tau`. Exponential cost; inputs are
/// guarded to stay tiny.
pub fn likelihood_ratio_explicit(
    t: &RootedTree,
    t_prime: &RootedTree,
    d: usize,
    psi: &PsiTable,
) -> Result<LogWeight> {
    for tree in [t, t_prime] {
        if tree.len() > ORACLE_NODE_LIMIT {
            return Err(Error::OracleTooLarge {
                nodes: tree.len(),
                limit: ORACLE_NODE_LIMIT,
            });
        }
    }
    let max_nodes = t.len().min(t_prime.len());
    let max_depth = d.min(t.depth()).min(t_prime.depth());
    let max_deg = t
        .node_ids()
        .map(|v| t.degree(v))
        .chain(t_prime.node_ids().map(|v| t_prime.degree(v)))
        .max()
        .unwrap_or(0);

    let mut total = f64::NEG_INFINITY;
    for tau in enumerate_candidate_trees(max_depth, max_deg, max_nodes) {
        let inj_t = enumerate_injections(&tau, t);
        if inj_t.is_empty() {
            continue;
        }
        let inj_tp = enumerate_injections(&tau, t_prime);
        if inj_tp.is_empty() {
            continue;
        }
        // psi factors run over tau's nodes above the observation horizon.
        let weighted: Vec<usize> = tau.node_ids().filter(|&v| tau.depth_of(v) < d).collect();
        for sigma in &inj_t {
            for sigma_p in &inj_tp {
                let mut ln_term = 0.0;
                for &v in &weighted {
                    let lp = psi.log_psi(
                        tau.degree(v),
                        t.degree(sigma[v]),
                        t_prime.degree(sigma_p[v]),
                    )?;
                    ln_term += lp.ln();
                    if ln_term == f64::NEG_INFINITY {
                        break;
                    }
                }
                total = logaddexp(total, ln_term);
            }
        }
    }
    Ok(LogWeight::from_ln(total))
}

/// All ordered trees of depth <= `max_depth` with at most `max_nodes` nodes
/// and every degree <= `max_deg`.
fn enumerate_candidate_trees(
    max_depth: usize,
    max_deg: usize,
    max_nodes: usize,
) -> Vec<RootedTree> {
    fn build(depth_budget: usize, max_deg: usize, node_budget: usize, out: &mut Vec<String>) {
        // Parenthesis codes of trees within the budgets.
        if depth_budget == 0 || max_deg == 0 {
            out.push("()".to_string());
            return;
        }
        let mut subtrees = Vec::new();
        build(
            depth_budget - 1,
            max_deg,
            node_budget.saturating_sub(1),
            &mut subtrees,
        );
        // Forests: up to max_deg ordered children within the node budget.
        let mut forests: Vec<(String, usize, usize)> = vec![(String::new(), 0, 0)];
        let mut done = Vec::new();
        while let Some((code, children, nodes)) = forests.pop() {
            done.push(format!("({code})"));
            if children == max_deg {
                continue;
            }
            for sub in &subtrees {
                let sub_nodes = sub.len() / 2;
                if nodes + sub_nodes < node_budget {
                    forests.push((format!("{code}{sub}"), children + 1, nodes + sub_nodes));
                }
            }
        }
        out.extend(done);
    }
    let mut codes = Vec::new();
    build(max_depth, max_deg, max_nodes, &mut codes);
    codes.sort_unstable();
    codes.dedup();
    codes
        .into_iter()
        .map(|c| RootedTree::from_parens(&c).expect("generated code parses"))
        .collect()
}

/// Every structure-preserving injection of `tau` into `t`: root to root,
/// children of a node to distinct children of its image, order-free.
fn enumerate_injections(tau: &RootedTree, t: &RootedTree) -> Vec<Vec<usize>> {
    fn rec(
        tau: &RootedTree,
        t: &RootedTree,
        v_tau: usize,
        v_t: usize,
        assignment: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let kids_tau = tau.children(v_tau);
        let kids_t = t.children(v_t);
        if kids_tau.is_empty() {
            out.push(assignment.clone());
            return;
        }
        if kids_tau.len() > kids_t.len() {
            return;
        }
        // Choose an ordered injective target tuple, then recurse jointly over
        // the sibling list.
        #[allow(clippy::too_many_arguments)]
        fn choose(
            tau: &RootedTree,
            t: &RootedTree,
            kids_tau: &[usize],
            kids_t: &[usize],
            pos: usize,
            used: &mut Vec<bool>,
            assignment: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if pos == kids_tau.len() {
                // All siblings placed; now extend below each in turn.
                extend_below(tau, t, kids_tau, 0, assignment, out);
                return;
            }
            for (slot, &target) in kids_t.iter().enumerate() {
                if used[slot] {
                    continue;
                }
                used[slot] = true;
                assignment[kids_tau[pos]] = target;
                choose(tau, t, kids_tau, kids_t, pos + 1, used, assignment, out);
                used[slot] = false;
            }
        }
        fn extend_below(
            tau: &RootedTree,
            t: &RootedTree,
            siblings: &[usize],
            i: usize,
            assignment: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if i == siblings.len() {
                out.push(assignment.clone());
                return;
            }
            // Collect completions of sibling i, then for each, continue.
            let mut partials = Vec::new();
            rec(
                tau,
                t,
                siblings[i],
                assignment[siblings[i]],
                assignment,
                &mut partials,
            );
            for p in partials {
                let saved = assignment.clone();
                *assignment = p;
                extend_below(tau, t, siblings, i + 1, assignment, out);
                *assignment = saved;
            }
        }
        let mut used = vec![false; kids_t.len()];
        choose(tau, t, kids_tau, kids_t, 0, &mut used, assignment, out);
    }

    let mut assignment = vec![usize::MAX; tau.len()];
    assignment[tau.root()] = t.root();
    let mut out = Vec::new();
    rec(tau, t, tau.root(), t.root(), &mut assignment, &mut out);
    out
}

/// Log of the ground-truth lower bound on `L_d`: the automorphism count of
/// the intersection tree times a per-node weight ratio and the leaf-level
/// binomial factors.
pub fn lower_bound_lr(sample: &TreePairSample, psi: &PsiTable) -> Result<LogWeight> {
    let gt = sample
        .ground_truth
        .as_ref()
        .ok_or(Error::MissingGroundTruth)?;
    let params = psi.params();
    let d = params.depth;
    if d == 0 {
        return Ok(LogWeight::ONE); // nothing observed, L_0 = 1 and the bound is 1
    }
    let tau = &gt.intersection;
    let (s, lambda) = (params.s, params.lambda);
    let mut ln_total = crate::trees::automorphism_count_log(tau);
    for v in tau.node_ids() {
        let q = tau.depth_of(v);
        if q >= d {
            continue;
        }
        let c = tau.degree(v);
        let delta = sample.t.degree(gt.sigma[v]) - c;
        let delta_p = sample.t_prime.degree(gt.sigma_prime[v]) - c;
        if c > 0 {
            ln_total += (c as f64) * s.ln() - (c as f64) * lambda.ln();
        }
        ln_total += lambda * s;
        if delta + delta_p > 0 {
            ln_total += ((delta + delta_p) as f64) * (1.0 - s).ln();
        }
        if q + 1 == d {
            ln_total += ln_binomial(c + delta, c) + ln_binomial(c + delta_p, c);
        }
    }
    Ok(LogWeight::from_ln(ln_total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{sample_pair, Hypothesis, Seed};

    fn psi(lambda: f64, s: f64, depth: usize) -> PsiTable {
        PsiTable::with_default_cap(ModelParams::new(lambda, s, depth).unwrap())
    }

    #[test]
    fn log_psi_direct_values() {
        let p = psi(2.0, 0.5, 3);
        // psi(0,0,0) = e^{lambda s} = e
        assert!((p.log_psi(0, 0, 0).unwrap().ln() - 1.0).abs() < 1e-12);
        // psi(1,1,1) = e * s / lambda = e * 0.25
        assert!((p.log_psi(1, 1, 1).unwrap().ln() - (1.0 + 0.25f64.ln())).abs() < 1e-12);
        // s = 1, k = c = c' = 2, lambda = 1: psi = e / 2
        let p1 = psi(1.0, 1.0, 3);
        assert!((p1.log_psi(2, 2, 2).unwrap().ln() - (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!(p1.log_psi(1, 1, 2).unwrap().is_zero());
        assert!(p.log_psi(2, 1, 1).is_err());
    }

    #[test]
    fn matching_sum_empty_matrix() {
        let p = psi(2.0, 0.5, 3);
        let v = matching_sum(&[], 0, 0, &p).unwrap();
        assert!((v.ln() - 1.0).abs() < 1e-12); // lambda * s
    }

    #[test]
    fn matching_sum_one_by_one() {
        let p = psi(2.0, 0.5, 3);
        let l = LogWeight::from_ln(0.7);
        let got = matching_sum(&[l], 1, 1, &p).unwrap();
        let expect = (p.log_psi(0, 1, 1).unwrap().exp()
            + p.log_psi(1, 1, 1).unwrap().exp() * 0.7f64.exp())
        .ln();
        assert!((got.ln() - expect).abs() < 1e-12);
    }

    #[test]
    fn matching_sum_respects_cap() {
        let params = ModelParams::new(2.0, 0.5, 3).unwrap();
        let p = PsiTable::new(params, 2);
        let w = vec![LogWeight::ONE; 9];
        assert!(matches!(
            matching_sum(&w, 3, 3, &p),
            Err(Error::DegreeCapExceeded { degree: 3, cap: 2, .. })
        ));
    }

    /// Exhaustive oracle: iterate every pair of injections explicitly.
    fn matching_sum_oracle(w: &[f64], c: usize, cp: usize, p: &PsiTable) -> f64 {
        fn tuples(k: usize, n: usize) -> Vec<Vec<usize>> {
            // Ordered injective k-tuples from [n].
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for rest in tuples(k - 1, n) {
                for v in 0..n {
                    if !rest.contains(&v) {
                        let mut t = rest.clone();
                        t.push(v);
                        out.push(t);
                    }
                }
            }
            out
        }
        let mut total = 0.0f64;
        for k in 0..=c.min(cp) {
            let psi_k = p.log_psi(k, c, cp).unwrap().exp();
            let mut inner = 0.0;
            for sig in tuples(k, c) {
                for sig_p in tuples(k, cp) {
                    let mut prod = 1.0;
                    for i in 0..k {
                        prod *= w[sig[i] * cp + sig_p[i]].exp();
                    }
                    inner += prod;
                }
            }
            total += psi_k * inner;
        }
        total.ln()
    }

    #[test]
    fn matching_sum_matches_exhaustive_injections() {
        let mut rng = Seed::new(21).rng();
        use rand::Rng;
        for &(c, cp) in &[(1usize, 2usize), (2, 2), (3, 2), (3, 3), (0, 3)] {
            for &s in &[0.3, 0.8, 0.999] {
                let p = psi(1.7, s, 3);
                let w: Vec<f64> = (0..c * cp).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let lw: Vec<LogWeight> = w.iter().map(|&x| LogWeight::from_ln(x)).collect();
                let got = matching_sum(&lw, c, cp, &p).unwrap().ln();
                let expect = matching_sum_oracle(&w, c, cp, &p);
                let rel = (got - expect).abs() / expect.abs().max(1.0);
                assert!(rel < 1e-12, "c={c} c'={cp} s={s}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn matching_sum_s1_permanent_branch() {
        let p = psi(1.3, 1.0, 3);
        // Mismatched degrees have zero likelihood under s = 1.
        let w = vec![LogWeight::ONE; 2];
        assert!(matching_sum(&w, 1, 2, &p).unwrap().is_zero());
        // Matched degrees: e^lambda / lambda^c * permanent.
        let w = vec![
            LogWeight::from_ln(0.1),
            LogWeight::from_ln(-0.4),
            LogWeight::from_ln(0.9),
            LogWeight::from_ln(0.2),
        ];
        let got = matching_sum(&w, 2, 2, &p).unwrap().ln();
        let perm = (0.1f64 + 0.2).exp() + (-0.4f64 + 0.9).exp();
        let expect = 1.3 - 2.0 * 1.3f64.ln() + perm.ln();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_base_cases() {
        let p = psi(2.0, 0.5, 3);
        let single = RootedTree::single();
        let mut memo = PairMemo::new();
        // Single nodes at any positive depth: c = c' = 0 gives lambda * s.
        let v = likelihood_ratio(&single, &single, 3, &p, &mut memo).unwrap();
        assert!((v.ln() - 1.0).abs() < 1e-12);
        // Depth 0: L = 1 for any pair.
        let mut t = RootedTree::single();
        t.add_child(0);
        let v0 = likelihood_ratio(&t, &single, 0, &p, &mut memo).unwrap();
        assert_eq!(v0.ln(), 0.0);
    }

    #[test]
    fn explicit_oracle_depth1_formula() {
        // Root degrees (1,1), d=1, lambda=2, s=0.5:
        // L_1 = [pi_1(0) pi_1(1)^2 + pi_1(1) pi_1(0)^2] / pi_2(1)^2.
        let p = psi(2.0, 0.5, 1);
        let mut t = RootedTree::single();
        t.add_child(0);
        let pois = |mu: f64, k: i32| (-mu + (k as f64) * mu.ln()).exp();
        let expect = ((pois(1.0, 0) * pois(1.0, 1).powi(2) + pois(1.0, 1) * pois(1.0, 0).powi(2))
            / pois(2.0, 1).powi(2))
        .ln();
        let got = likelihood_ratio_explicit(&t, &t, 1, &p).unwrap().ln();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        let mut memo = PairMemo::new();
        let rec = likelihood_ratio(&t, &t, 1, &p, &mut memo).unwrap().ln();
        assert!((rec - expect).abs() < 1e-10);
    }

    #[test]
    fn recursive_matches_explicit_on_small_pairs() {
        // Spot pairs here; the exhaustive sweep lives in the acceptance suite.
        let shapes = ["()", "(())", "(()())", "((())())", "(()()())"];
        for &s in &[0.4, 0.85] {
            let p = psi(1.8, s, 2);
            for a in shapes {
                for b in shapes {
                    let ta = RootedTree::from_parens(a).unwrap();
                    let tb = RootedTree::from_parens(b).unwrap();
                    let mut memo = PairMemo::new();
                    let rec = likelihood_ratio(&ta, &tb, 2, &p, &mut memo).unwrap().ln();
                    let exp = likelihood_ratio_explicit(&ta, &tb, 2, &p).unwrap().ln();
                    let rel = (rec - exp).abs() / exp.abs().max(1.0);
                    assert!(rel < 1e-9, "{a} vs {b} at s={s}: {rec} vs {exp}");
                }
            }
        }
    }

    #[test]
    fn oracle_guard_rejects_large_trees() {
        let p = psi(2.0, 0.5, 2);
        let mut big = RootedTree::single();
        for _ in 0..ORACLE_NODE_LIMIT {
            big.add_child(0);
        }
        assert!(matches!(
            likelihood_ratio_explicit(&big, &big, 1, &p),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn symmetry_is_exact() {
        let params = ModelParams::new(2.0, 0.7, 3).unwrap();
        let p = PsiTable::with_default_cap(params);
        let mut rng = Seed::new(33).rng();
        for _ in 0..50 {
            let pair = sample_pair(&params, Hypothesis::H1, &mut rng).unwrap();
            let mut memo = PairMemo::new();
            let ab = likelihood_ratio(&pair.t, &pair.t_prime, 3, &p, &mut memo).unwrap();
            let mut memo2 = PairMemo::new();
            let ba = likelihood_ratio(&pair.t_prime, &pair.t, 3, &p, &mut memo2).unwrap();
            assert_eq!(ab.ln(), ba.ln(), "symmetry must be bit-exact");
        }
    }

    #[test]
    fn lower_bound_single_node_intersection() {
        let params = ModelParams::new(2.0, 0.5, 2).unwrap();
        let p = PsiTable::with_default_cap(params);
        let mut t = RootedTree::single();
        t.add_child(0);
        t.add_child(0);
        let mut tp = RootedTree::single();
        tp.add_child(0);
        let sample = TreePairSample {
            t: t.clone(),
            t_prime: tp.clone(),
            hypothesis: Hypothesis::H1,
            ground_truth: Some(crate::trees::GroundTruth {
                intersection: RootedTree::single(),
                sigma: vec![0],
                sigma_prime: vec![0],
            }),
        };
        // log(s^0 sbar^{2+1} e^{lambda s}) = 3 ln(1/2) + 1
        let expect = 3.0 * 0.5f64.ln() + 1.0;
        let got = lower_bound_lr(&sample, &p).unwrap().ln();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn lower_bound_s1_reduces_to_automorphisms() {
        let params = ModelParams::new(2.0, 1.0, 3).unwrap();
        let p = PsiTable::with_default_cap(params);
        let mut rng = Seed::new(44).rng();
        for _ in 0..20 {
            let sample = sample_pair(&params, Hypothesis::H1, &mut rng).unwrap();
            let gt = sample.ground_truth.as_ref().unwrap();
            let tau = &gt.intersection;
            let mut expect = crate::trees::automorphism_count_log(tau);
            for v in tau.node_ids() {
                if tau.depth_of(v) < 3 {
                    let c = tau.degree(v) as f64;
                    expect += 2.0 - c * 2f64.ln();
                }
            }
            let got = lower_bound_lr(&sample, &p).unwrap().ln();
            assert!((got - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn lower_bound_holds_on_h1_samples() {
        let params = ModelParams::new(2.0, 0.8, 3).unwrap();
        let p = PsiTable::with_default_cap(params);
        let mut rng = Seed::new(55).rng();
        let mut memo = PairMemo::new();
        for _ in 0..1000 {
            let sample = sample_pair(&params, Hypothesis::H1, &mut rng).unwrap();
            let lb = lower_bound_lr(&sample, &p).unwrap().ln();
            let lr = likelihood_ratio(&sample.t, &sample.t_prime, 3, &p, &mut memo)
                .unwrap()
                .ln();
            assert!(
                lr >= lb - 1e-9 * lb.abs().max(1.0),
                "bound violated: lr = {lr}, lb = {lb}"
            );
        }
    }

    #[test]
    fn logweight_arithmetic() {
        let a = LogWeight::from_ln(1.0);
        let b = LogWeight::ZERO;
        assert_eq!((a * b).ln(), f64::NEG_INFINITY);
        assert_eq!((a + b).ln(), 1.0);
        let doubled = a + a;
        assert!((doubled.ln() - (2.0 * 1f64.exp()).ln()).abs() < 1e-12);
    }
}
