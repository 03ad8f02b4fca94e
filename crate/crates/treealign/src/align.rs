//! Message passing of oriented likelihood ratios on graph pairs, and the two
//! aligners built on it.
//!
//! A message lives on a pair of directed edges `(i -> j, u -> v)` and equals
//! the log-likelihood ratio of the two dangling trees rooted at `i` and `u`
//! once the edges toward `j` and `v` are removed. A sweep applies the
//! matching kernel to the incoming messages at `i` and `u` with degrees
//! reduced by one; aggregation applies it once more over the full neighbor
//! sets. On forests the aggregated score after `t` sweeps is exactly the
//! tree likelihood ratio at horizon `t + 1` (the `t = 0` table already
//! aggregates to the depth-1 ratio).
//!
//! Messages are stored max-normalized with the subtracted offset tracked on
//! the table, and all arithmetic stays in log space, so the iteration cannot
//! overflow no matter how large the ratios grow.

use crate::graphs::{neighborhood_tree, PartialMap, SparseGraph};
use crate::likelihood::{matching_sum, LogWeight, PsiTable};
use crate::{Error, ModelParams, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default cap on dense message-table entries (`2|E| * 2|E'|`).
pub const DEFAULT_TABLE_BUDGET: u128 = 200_000_000;

/// Aligner configuration. The iteration depth `d` and the threshold
/// `beta_log = log(beta)` can be set explicitly or derived from `(n, lambda,
/// s)` via [`AlignConfig::auto`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Depth / iteration budget.
    pub d: usize,
    /// Threshold exponent when auto-derived: `beta = exp(n^gamma)`.
    pub gamma: Option<f64>,
    /// `log(beta)`, the per-branch acceptance threshold of `mpalign`.
    pub beta_log: f64,
    /// Cap on the smaller side of every matching kernel call.
    pub degree_cap: usize,
    /// Dense table entry budget; larger tables are rejected up front.
    pub table_budget: u128,
    /// Max-normalize messages each sweep (kept switchable so tests can
    /// compare against the raw recursion).
    pub normalize: bool,
}

impl AlignConfig {
    pub fn new(d: usize, beta_log: f64) -> Self {
        AlignConfig {
            d,
            gamma: None,
            beta_log,
            degree_cap: crate::likelihood::DEFAULT_DEGREE_CAP,
            table_budget: DEFAULT_TABLE_BUDGET,
            normalize: true,
        }
    }

    /// Derive `d = floor(c log n)` with `c = 0.49 / log(lambda (2 - s))` and
    /// `beta_log = n^gamma` with `gamma` at the midpoint of its admissible
    /// interval `(0, c log(lambda s))`. Requires `lambda (2 - s) > 1` and
    /// `lambda s > 1`.
    pub fn auto(n: usize, params: &ModelParams) -> Result<Self> {
        let union_rate = params.lambda * (2.0 - params.s);
        if union_rate <= 1.0 {
            return Err(Error::Domain(
                "auto config needs lambda (2 - s) > 1; set d explicitly".into(),
            ));
        }
        let ls = params.lambda * params.s;
        if ls <= 1.0 {
            return Err(Error::Domain(
                "auto config needs lambda s > 1; set beta_log explicitly".into(),
            ));
        }
        let c = 0.49 / union_rate.ln();
        let d = ((c * (n as f64).ln()).floor() as usize).max(2);
        let gamma = 0.5 * c * ls.ln();
        let beta_log = (n as f64).powf(gamma);
        Ok(AlignConfig {
            gamma: Some(gamma),
            ..AlignConfig::new(d, beta_log)
        })
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn with_beta_log(mut self, beta_log: f64) -> Self {
        self.beta_log = beta_log;
        self
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }
}

/// Directed-edge index of one graph: edge ids, endpoints, and per-node
/// incoming edge lists (sorted by source).
#[derive(Debug, Clone)]
struct EdgeIndex {
    src: Vec<u32>,
    dst: Vec<u32>,
    incoming: Vec<Vec<u32>>,
}

impl EdgeIndex {
    fn build(g: &SparseGraph) -> Self {
        let n = g.node_count();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut incoming = vec![Vec::new(); n];
        for i in 0..n {
            for &j in g.neighbors(i) {
                let id = src.len() as u32;
                src.push(i as u32);
                dst.push(j);
                incoming[j as usize].push(id);
            }
        }
        EdgeIndex { src, dst, incoming }
    }

    fn count(&self) -> usize {
        self.src.len()
    }
}

/// Iteration-indexed log-messages on directed-edge pairs, plus the global
/// normalization offset: `stored + offset` is the unnormalized log-message.
#[derive(Debug, Clone)]
pub struct MessageTable {
    /// Sweeps applied so far.
    pub t: usize,
    /// Global log offset folded out of the stored values.
    pub offset: f64,
    values: Vec<f64>,
    left: EdgeIndex,
    right: EdgeIndex,
}

impl MessageTable {
    /// Unnormalized log-message on `(edge e of g, edge f of g')`.
    pub fn message(&self, e: usize, f: usize) -> LogWeight {
        LogWeight::from_ln(self.values[e * self.right.count() + f] + self.offset)
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.left.count(), self.right.count())
    }

    /// Directed edge ids of `g` as `(src, dst)`.
    pub fn left_edge(&self, e: usize) -> (u32, u32) {
        (self.left.src[e], self.left.dst[e])
    }

    pub fn right_edge(&self, f: usize) -> (u32, u32) {
        (self.right.src[f], self.right.dst[f])
    }
}

/// The all-ones table at `t = 0` (log 0 everywhere, offset 0).
pub fn init_messages(
    g: &SparseGraph,
    g_prime: &SparseGraph,
    config: &AlignConfig,
) -> Result<MessageTable> {
    let left = EdgeIndex::build(g);
    let right = EdgeIndex::build(g_prime);
    let entries = left.count() as u128 * right.count() as u128;
    if entries > config.table_budget {
        return Err(Error::MessageBudget {
            entries,
            budget: config.table_budget,
        });
    }
    Ok(MessageTable {
        t: 0,
        offset: 0.0,
        values: vec![0.0; entries as usize],
        left,
        right,
    })
}

/// One synchronous sweep: every `(i -> j, u -> v)` entry of the next table is
/// the matching kernel applied to the incoming messages at `(i, u)` with the
/// back edges excluded, using degrees `(d_i - 1, d_u - 1)`.
pub fn mp_sweep(
    table: &MessageTable,
    psi: &PsiTable,
    config: &AlignConfig,
) -> Result<MessageTable> {
    let (ne, nf) = (table.left.count(), table.right.count());
    let values: Vec<f64> = (0..ne)
        .into_par_iter()
        .map(|e| -> Result<Vec<f64>> {
            let i = table.left.src[e] as usize;
            let j = table.left.dst[e];
            let rows: Vec<u32> = table.left.incoming[i]
                .iter()
                .copied()
                .filter(|&x| table.left.src[x as usize] != j)
                .collect();
            let mut out = Vec::with_capacity(nf);
            let mut weights = Vec::new();
            for f in 0..nf {
                let u = table.right.src[f] as usize;
                let v = table.right.dst[f];
                weights.clear();
                let mut cols = 0usize;
                for &fy in &table.right.incoming[u] {
                    if table.right.src[fy as usize] == v {
                        continue;
                    }
                    cols += 1;
                }
                for &ex in &rows {
                    for &fy in &table.right.incoming[u] {
                        if table.right.src[fy as usize] == v {
                            continue;
                        }
                        weights.push(table.message(ex as usize, fy as usize));
                    }
                }
                out.push(
                    matching_sum(&weights, rows.len(), cols, psi)
                        .map_err(|err| name_offender(err, i, u))?
                        .ln(),
                );
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut offset = 0.0;
    let mut values = values;
    if config.normalize {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() {
            offset = max;
            for v in &mut values {
                *v -= max;
            }
        }
    }
    Ok(MessageTable {
        t: table.t + 1,
        offset,
        values,
        left: table.left.clone(),
        right: table.right.clone(),
    })
}

/// Stamp a degree-cap error with the node pair it arose at.
fn name_offender(err: crate::Error, i: usize, u: usize) -> crate::Error {
    match err {
        crate::Error::DegreeCapExceeded { degree, cap, .. } => crate::Error::DegreeCapExceeded {
            degree,
            cap,
            at: format!(" at node pair ({i}, {u})"),
        },
        other => other,
    }
}

/// Aggregated absolute log-scores per node pair. After `t` sweeps the score
/// of `(i, u)` equals the tree log-likelihood ratio of the radius-`horizon`
/// neighborhoods with `horizon = t + 1`, exactly so on forests.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    /// Sweeps of the table this was aggregated from.
    pub t: usize,
    /// Tree-depth horizon the scores correspond to (`t + 1`).
    pub horizon: usize,
    n_left: usize,
    n_right: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn get(&self, i: usize, u: usize) -> LogWeight {
        LogWeight::from_ln(self.values[i * self.n_right + u])
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.n_left, self.n_right)
    }

    /// Row-wise argmax with ties broken toward the lowest index.
    pub fn argmax_rows(&self) -> Vec<u32> {
        (0..self.n_left)
            .map(|i| {
                let row = &self.values[i * self.n_right..(i + 1) * self.n_right];
                let mut best = 0usize;
                for (u, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = u;
                    }
                }
                best as u32
            })
            .collect()
    }

    pub fn argmax_cols(&self) -> Vec<u32> {
        (0..self.n_right)
            .map(|u| {
                let mut best = 0usize;
                for i in 0..self.n_left {
                    if self.values[i * self.n_right + u] > self.values[best * self.n_right + u] {
                        best = i;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Apply the matching kernel over the full neighbor sets of every `(i, u)`;
/// the table offset is folded in so scores are absolute.
pub fn aggregate(
    table: &MessageTable,
    g: &SparseGraph,
    g_prime: &SparseGraph,
    psi: &PsiTable,
) -> Result<ScoreMatrix> {
    let n_left = g.node_count();
    let n_right = g_prime.node_count();
    let values: Vec<f64> = (0..n_left)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let rows = &table.left.incoming[i];
            let mut out = Vec::with_capacity(n_right);
            let mut weights = Vec::new();
            for u in 0..n_right {
                let cols = &table.right.incoming[u];
                weights.clear();
                for &ex in rows {
                    for &fy in cols {
                        weights.push(table.message(ex as usize, fy as usize));
                    }
                }
                out.push(
                    matching_sum(&weights, rows.len(), cols.len(), psi)
                        .map_err(|err| name_offender(err, i, u))?
                        .ln(),
                );
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ScoreMatrix {
        t: table.t,
        horizon: table.t + 1,
        n_left,
        n_right,
        values,
    })
}

/// The thresholded triple-branch aligner. Runs `d - 1` sweeps so messages
/// carry depth-`d-1` dangling-tree ratios, then admits `(i, u)` iff both
/// `d`-neighborhoods are cycle-free and three distinct neighbors on each
/// side can be paired with all three oriented ratios above `beta`.
pub fn mpalign(
    g: &SparseGraph,
    g_prime: &SparseGraph,
    psi: &PsiTable,
    config: &AlignConfig,
) -> Result<PartialMap> {
    Ok(PartialMap::new(
        mpalign_with_scores(g, g_prime, psi, config)?
            .into_iter()
            .map(|(i, u, _)| (i, u))
            .collect(),
    ))
}

/// `mpalign` with each admitted pair's bottleneck branch score (the smallest
/// of its three accepted oriented ratios).
pub fn mpalign_with_scores(
    g: &SparseGraph,
    g_prime: &SparseGraph,
    psi: &PsiTable,
    config: &AlignConfig,
) -> Result<Vec<(u32, u32, f64)>> {
    if config.d < 2 {
        return Err(Error::Domain("mpalign needs d >= 2".into()));
    }
    let mut table = init_messages(g, g_prime, config)?;
    for _ in 0..config.d - 1 {
        table = mp_sweep(&table, psi, config)?;
    }
    let cycle_left: Vec<bool> = (0..g.node_count())
        .map(|i| neighborhood_tree(g, i, config.d).1)
        .collect();
    let cycle_right: Vec<bool> = (0..g_prime.node_count())
        .map(|u| neighborhood_tree(g_prime, u, config.d).1)
        .collect();

    let table = &table;
    let cycle_right = &cycle_right;
    let out: Vec<Vec<(u32, u32, f64)>> = (0..g.node_count())
        .into_par_iter()
        .map(|i| {
            let mut found = Vec::new();
            if cycle_left[i] || g.degree(i) < 3 {
                return found;
            }
            // Incoming edges j -> i carry the dangling ratio rooted at j.
            let rows = &table.left.incoming[i];
            for (u, &blocked) in cycle_right.iter().enumerate() {
                if blocked || g_prime.degree(u) < 3 {
                    continue;
                }
                let cols = &table.right.incoming[u];
                let mut pass = vec![false; rows.len() * cols.len()];
                let mut scores = vec![f64::NEG_INFINITY; rows.len() * cols.len()];
                for (r, &ex) in rows.iter().enumerate() {
                    for (c, &fy) in cols.iter().enumerate() {
                        let m = table.message(ex as usize, fy as usize).ln();
                        scores[r * cols.len() + c] = m;
                        pass[r * cols.len() + c] = m > config.beta_log;
                    }
                }
                if let Some(bottleneck) = matching_of_three(&pass, &scores, rows.len(), cols.len())
                {
                    found.push((i as u32, u as u32, bottleneck));
                }
            }
            found
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Size-3 bipartite matching on the thresholded score bigraph via augmenting
/// paths; returns the minimum selected score when one exists.
fn matching_of_three(pass: &[bool], scores: &[f64], rows: usize, cols: usize) -> Option<f64> {
    fn augment(
        r: usize,
        pass: &[bool],
        cols: usize,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for c in 0..cols {
            if pass[r * cols + c] && !seen[c] {
                seen[c] = true;
                if owner[c].is_none() || augment(owner[c].unwrap(), pass, cols, seen, owner) {
                    owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; cols];
    let mut size = 0;
    for r in 0..rows {
        let mut seen = vec![false; cols];
        if augment(r, pass, cols, &mut seen, &mut owner) {
            size += 1;
            if size == 3 {
                break;
            }
        }
    }
    if size < 3 {
        return None;
    }
    let selected = owner
        .iter()
        .enumerate()
        .filter_map(|(c, &r)| r.map(|r| scores[r * cols + c]))
        .fold(f64::INFINITY, f64::min);
    Some(selected)
}

/// Remove every pair whose left or right endpoint occurs more than once.
pub fn prune_to_injective(map: &PartialMap) -> PartialMap {
    let mut left_count = std::collections::HashMap::new();
    let mut right_count = std::collections::HashMap::new();
    for &(i, u) in &map.pairs {
        *left_count.entry(i).or_insert(0usize) += 1;
        *right_count.entry(u).or_insert(0usize) += 1;
    }
    PartialMap::new(
        map.pairs
            .iter()
            .copied()
            .filter(|&(i, u)| left_count[&i] == 1 && right_count[&u] == 1)
            .collect(),
    )
}

/// Symmetric edge-agreement score of a pair of total maps, in `[0, 2]`.
pub fn match_edges(g: &SparseGraph, g_prime: &SparseGraph, pi: &[u32], sigma: &[u32]) -> f64 {
    assert_eq!(pi.len(), g.node_count());
    assert_eq!(sigma.len(), g_prime.node_count());
    let term = |from: &SparseGraph, to: &SparseGraph, map: &[u32]| -> f64 {
        if from.edge_count() == 0 {
            return 0.0;
        }
        let hits = from
            .edges()
            .filter(|&(a, b)| to.has_edge(map[a as usize] as usize, map[b as usize] as usize))
            .count();
        hits as f64 / from.edge_count() as f64
    };
    term(g, g_prime, pi) + term(g_prime, g, sigma)
}

/// Per-iteration diagnostics of `mpalign2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mpalign2Iter {
    pub t: usize,
    pub match_edges: f64,
    /// Nodes of `g` mapped to their true match, when the truth is supplied.
    pub correct_pi: Option<usize>,
    pub correct_sigma: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Mpalign2Result {
    /// Argmax map `V -> V'` at the selected iteration.
    pub pi: Vec<u32>,
    /// Argmax map `V' -> V` at the selected iteration.
    pub sigma: Vec<u32>,
    /// Iteration with the highest match-edges score (earliest on ties).
    pub t_star: usize,
    pub trace: Vec<Mpalign2Iter>,
    pub scores_at_star: ScoreMatrix,
}

/// The practical argmax aligner: sweep up to `d_max` times, at each `t`
/// aggregate scores, build the row/column argmax maps, score them by
/// [`match_edges`], and keep the iteration that scores highest. Callers pass
/// connected graphs (apply [`crate::graphs::largest_component`] first) and
/// may pass the planted truth (as a map from `g` nodes to `g_prime` nodes)
/// for per-iteration overlap diagnostics.
pub fn mpalign2(
    g: &SparseGraph,
    g_prime: &SparseGraph,
    psi: &PsiTable,
    d_max: usize,
    config: &AlignConfig,
    truth: Option<&[Option<u32>]>,
) -> Result<Mpalign2Result> {
    if g.node_count() == 0 || g_prime.node_count() == 0 {
        return Err(Error::Domain("mpalign2 needs nonempty graphs".into()));
    }
    let mut table = init_messages(g, g_prime, config)?;
    let mut best: Option<(f64, Mpalign2Result)> = None;
    let mut trace = Vec::new();
    loop {
        let scores = aggregate(&table, g, g_prime, psi)?;
        let pi = scores.argmax_rows();
        let sigma = scores.argmax_cols();
        let e = match_edges(g, g_prime, &pi, &sigma);
        let (correct_pi, correct_sigma) = match truth {
            Some(truth) => {
                let cp = pi
                    .iter()
                    .enumerate()
                    .filter(|&(i, &u)| truth[i] == Some(u))
                    .count();
                let cs = sigma
                    .iter()
                    .enumerate()
                    .filter(|&(u, &i)| truth[i as usize] == Some(u as u32))
                    .count();
                (Some(cp), Some(cs))
            }
            None => (None, None),
        };
        trace.push(Mpalign2Iter {
            t: table.t,
            match_edges: e,
            correct_pi,
            correct_sigma,
        });
        // Strict improvement only: ties keep the earliest iteration.
        if best.as_ref().is_none_or(|(be, _)| e > *be) {
            best = Some((
                e,
                Mpalign2Result {
                    pi,
                    sigma,
                    t_star: table.t,
                    trace: Vec::new(),
                    scores_at_star: scores,
                },
            ));
        }
        if table.t == d_max {
            break;
        }
        table = mp_sweep(&table, psi, config)?;
    }
    let (_, mut result) = best.expect("at least one iteration ran");
    // t_star indexes the trace directly since t runs 0..=d_max.
    result.trace = trace;
    Ok(result)
}
