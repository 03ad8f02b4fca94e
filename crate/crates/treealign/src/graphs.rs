//! Sparse graphs, the correlated Erdős–Rényi sampler with a planted
//! permutation, component and neighborhood utilities, alignment metrics,
//! and edge-list / bundle I/O.

use crate::detection::PhasePoint;
use crate::trees::RootedTree;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Undirected simple graph on `[n]` with per-node sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    adj: Vec<Vec<u32>>,
}

impl SparseGraph {
    /// Build from an edge list; rejects self-loops and duplicates.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Domain(format!("self-loop at node {a}")));
            }
            if a as usize >= n || b as usize >= n {
                return Err(Error::Domain(format!("edge ({a}, {b}) outside [0, {n})")));
            }
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain("duplicate edge".into()));
            }
        }
        let g = SparseGraph { n, adj };
        g.debug_check();
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n as u32).flat_map(move |i| {
            self.adj[i as usize]
                .iter()
                .copied()
                .filter(move |&j| i < j)
                .map(move |j| (i, j))
        })
    }

    fn debug_check(&self) {
        #[cfg(debug_assertions)]
        {
            for v in 0..self.n {
                assert!(
                    self.adj[v].windows(2).all(|w| w[0] < w[1]),
                    "unsorted or duplicate"
                );
                for &u in &self.adj[v] {
                    assert_ne!(u as usize, v, "self-loop");
                    assert!(
                        self.adj[u as usize].binary_search(&(v as u32)).is_ok(),
                        "asymmetric adjacency"
                    );
                }
            }
        }
    }
}

/// A correlated graph pair with its planted permutation: node `i` of `g`
/// truly matches node `sigma_star[i]` of `g_prime`.
#[derive(Debug, Clone)]
pub struct CorrelatedPair {
    pub g: SparseGraph,
    pub g_prime: SparseGraph,
    pub sigma_star: Vec<u32>,
}

/// Above this node count the sampler switches from the per-pair Bernoulli
/// loop to geometric skipping over the union-edge process.
pub const DENSE_PAIR_LIMIT: usize = 20_000;

/// Sample the correlated Erdős–Rényi pair: each unordered pair is
/// `(1,1)` with probability `lambda s / n`, `(1,0)` or `(0,1)` with
/// probability `lambda (1-s) / n` each; the second graph is then relabeled
/// by a uniform permutation. Marginals are `G(n, lambda/n)`.
pub fn sample_correlated_er<R: Rng + ?Sized>(
    n: usize,
    point: &PhasePoint,
    rng: &mut R,
) -> Result<CorrelatedPair> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let p_union = point.lambda * (2.0 - point.s) / n as f64;
    if p_union > 1.0 {
        return Err(Error::Domain(format!(
            "lambda (2 - s) / n = {p_union} exceeds 1; raise n"
        )));
    }
    let p_both = point.lambda * point.s / n as f64;
    let p_one = point.lambda * (1.0 - point.s) / n as f64;

    let mut edges_a: Vec<(u32, u32)> = Vec::new();
    let mut edges_b: Vec<(u32, u32)> = Vec::new();
    let mut push_cell = |i: u32, j: u32, r: f64, both: f64, one: f64| {
        if r < both {
            edges_a.push((i, j));
            edges_b.push((i, j));
        } else if r < both + one {
            edges_a.push((i, j));
        } else {
            edges_b.push((i, j));
        }
    };

    if n <= DENSE_PAIR_LIMIT {
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                let r: f64 = rng.gen();
                if r < p_union {
                    // Conditional cell probabilities within the union event.
                    push_cell(i, j, r, p_both, p_one);
                }
            }
        }
    } else {
        // Geometric skip over the n(n-1)/2 linearized pairs.
        let total = n as u64 * (n as u64 - 1) / 2;
        let ln_q = (1.0 - p_union).ln();
        let mut k: u64 = 0;
        loop {
            let u: f64 = rng.gen();
            let skip = if p_union >= 1.0 {
                0.0
            } else {
                (1.0 - u).ln() / ln_q
            };
            k += 1 + skip as u64;
            if k > total {
                break;
            }
            let (i, j) = unpair(k - 1, n as u64);
            let r: f64 = rng.gen_range(0.0..p_union);
            push_cell(i as u32, j as u32, r, p_both, p_one);
        }
    }

    let mut sigma_star: Vec<u32> = (0..n as u32).collect();
    sigma_star.shuffle(rng);

    let g = SparseGraph::from_edges(n, &edges_a)?;
    let relabeled: Vec<(u32, u32)> = edges_b
        .iter()
        .map(|&(i, j)| (sigma_star[i as usize], sigma_star[j as usize]))
        .collect();
    let g_prime = SparseGraph::from_edges(n, &relabeled)?;
    Ok(CorrelatedPair {
        g,
        g_prime,
        sigma_star,
    })
}

/// Inverse of the row-major linearization of pairs `i < j` over `[n]`.
fn unpair(k: u64, n: u64) -> (u64, u64) {
    // Row i occupies indices [offset(i), offset(i+1)) with
    // offset(i) = i*n - i(i+1)/2.
    let offset = |i: u64| i * n - i * (i + 1) / 2;
    let (mut lo, mut hi) = (0u64, n - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if offset(mid) <= k {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let i = lo;
    let j = i + 1 + (k - offset(i));
    (i, j)
}

/// Induced subgraph on the largest connected component (ties broken toward
/// the component containing the smallest node id) plus the old-to-new node
/// map.
pub fn largest_component(g: &SparseGraph) -> (SparseGraph, Vec<Option<u32>>) {
    let n = g.node_count();
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0usize;
        let mut queue = VecDeque::from([start]);
        comp[start] = id;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in g.neighbors(v) {
                if comp[u as usize] == usize::MAX {
                    comp[u as usize] = id;
                    queue.push_back(u as usize);
                }
            }
        }
        sizes.push(size);
    }
    // First component with the maximum size has the smallest minimum id.
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut old_to_new = vec![None; n];
    let mut new_id = 0u32;
    for v in 0..n {
        if comp[v] == best {
            old_to_new[v] = Some(new_id);
            new_id += 1;
        }
    }
    let mut edges = Vec::new();
    for (i, j) in g.edges() {
        if let (Some(a), Some(b)) = (old_to_new[i as usize], old_to_new[j as usize]) {
            edges.push((a, b));
        }
    }
    let sub = SparseGraph::from_edges(new_id as usize, &edges).expect("induced subgraph is valid");
    (sub, old_to_new)
}

/// BFS ball of radius `d` around `i` as a rooted tree with children ordered
/// by node id, plus a cycle flag: true iff the closed ball contains any
/// non-tree edge.
pub fn neighborhood_tree(g: &SparseGraph, i: usize, d: usize) -> (RootedTree, bool) {
    let mut tree = RootedTree::single();
    let mut node_of = vec![usize::MAX; g.node_count()];
    let mut ball = vec![i];
    node_of[i] = tree.root();
    let mut frontier = vec![i];
    for _ in 0..d {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in g.neighbors(v) {
                let u = u as usize;
                if node_of[u] == usize::MAX {
                    node_of[u] = tree.add_child(node_of[v]);
                    ball.push(u);
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    // Tree iff the induced edge count is exactly |ball| - 1.
    let mut in_ball = vec![false; g.node_count()];
    for &v in &ball {
        in_ball[v] = true;
    }
    let mut edge_twice = 0usize;
    for &v in &ball {
        edge_twice += g
            .neighbors(v)
            .iter()
            .filter(|&&u| in_ball[u as usize])
            .count();
    }
    let has_cycle = edge_twice / 2 != ball.len() - 1;
    (tree, has_cycle)
}

/// A set of candidate `(i, u)` pairs; possibly non-injective until pruned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialMap {
    pub pairs: Vec<(u32, u32)>,
}

impl PartialMap {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        PartialMap { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_injective(&self) -> bool {
        let mut left: Vec<u32> = self.pairs.iter().map(|p| p.0).collect();
        let mut right: Vec<u32> = self.pairs.iter().map(|p| p.1).collect();
        left.sort_unstable();
        right.sort_unstable();
        left.windows(2).all(|w| w[0] != w[1]) && right.windows(2).all(|w| w[0] != w[1])
    }
}

/// Overlap and error fraction of an injective partial map against the
/// planted permutation, both normalized by `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    pub overlap: f64,
    pub error_fraction: f64,
    pub matched: usize,
}

pub fn metrics(map: &PartialMap, sigma_star: &[u32], n: usize) -> Result<AlignmentMetrics> {
    if !map.is_injective() {
        return Err(Error::NonInjectiveInput);
    }
    let correct = map
        .pairs
        .iter()
        .filter(|&&(i, u)| sigma_star[i as usize] == u)
        .count();
    Ok(AlignmentMetrics {
        overlap: correct as f64 / n as f64,
        error_fraction: (map.len() - correct) as f64 / n as f64,
        matched: map.len(),
    })
}

/// Write as text: a `# n=N` header, then one `i j` line per edge with
/// `i < j`, ascending.
pub fn save_edge_list(g: &SparseGraph, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# n={}", g.node_count())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read an edge list. Pairs may come in either order; self-loops and
/// duplicate edges are rejected with their line number. Without a `# n=`
/// header the node count is the largest id + 1.
pub fn load_edge_list(path: &Path) -> Result<SparseGraph> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut declared_n: Option<usize> = None;
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut seen: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
    let mut max_id: u32 = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(nv) = rest.strip_prefix("n=") {
                declared_n = Some(nv.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad node count {nv:?}"),
                })?);
            }
            continue;
        }
        let mut it = text.split_whitespace();
        let parse = |tok: Option<&str>, lineno: usize| -> Result<u32> {
            tok.ok_or(Error::Parse {
                line: lineno,
                message: "expected 'i j'".into(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                line: lineno,
                message: "bad node id".into(),
            })
        };
        let a = parse(it.next(), lineno)?;
        let b = parse(it.next(), lineno)?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: "trailing tokens".into(),
            });
        }
        if a == b {
            return Err(Error::Parse {
                line: lineno,
                message: format!("self-loop {a} {b}"),
            });
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate edge {} {}", key.0, key.1),
            });
        }
        max_id = max_id.max(key.1);
        edges.push(key);
    }
    let n = match declared_n {
        Some(n) => {
            if !edges.is_empty() && max_id as usize >= n {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("edge id {max_id} outside declared n={n}"),
                });
            }
            n
        }
        None => {
            if edges.is_empty() {
                0
            } else {
                max_id as usize + 1
            }
        }
    };
    SparseGraph::from_edges(n, &edges)
}

/// Metadata stored beside a graph-pair bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub lambda: f64,
    pub s: f64,
    pub n: usize,
    pub seed: u64,
}

/// Write the bundle directory: `g.edges`, `gprime.edges`, `sigma.json`,
/// `meta.json`.
pub fn save_pair_bundle(dir: &Path, pair: &CorrelatedPair, meta: &PairMeta) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_edge_list(&pair.g, &dir.join("g.edges"))?;
    save_edge_list(&pair.g_prime, &dir.join("gprime.edges"))?;
    std::fs::write(
        dir.join("sigma.json"),
        serde_json::to_string(&pair.sigma_star)?,
    )?;
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load_pair_bundle(dir: &Path) -> Result<(CorrelatedPair, PairMeta)> {
    let g = load_edge_list(&dir.join("g.edges"))?;
    let g_prime = load_edge_list(&dir.join("gprime.edges"))?;
    let sigma_star: Vec<u32> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sigma.json"))?)?;
    let meta: PairMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    if sigma_star.len() != g.node_count() || g.node_count() != g_prime.node_count() {
        return Err(Error::Domain("bundle sizes disagree".into()));
    }
    Ok((
        CorrelatedPair {
            g,
            g_prime,
            sigma_star,
        },
        meta,
    ))
}
