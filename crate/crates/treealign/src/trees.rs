//! Labeled rooted trees, random tree generators, pruning / subsampling /
//! augmentation / relabeling operators, and exact automorphism counting.
//!
//! Trees are arena-based: nodes are integer ids into a flat vector, each node
//! stores its parent, its ordered child list and its depth. The canonical
//! label of a node is implicit in child order (position-in-parent sequence),
//! so a relabeling is just a permutation of child lists; node ids survive the
//! operators that logically preserve nodes, which is what lets `sample_pair`
//! report the planted injections.

use crate::numeric::ln_factorial;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;

/// Default hard cap on nodes per generated tree.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Model parameters shared by all samplers: mean offspring `lambda`,
/// correlation `s`, and pruning depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub s: f64,
    pub depth: usize,
    #[serde(default = "default_node_budget")]
    pub node_budget: usize,
}

fn default_node_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

impl ModelParams {
    pub fn new(lambda: f64, s: f64, depth: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("s must be in [0, 1], got {s}")));
        }
        Ok(ModelParams {
            lambda,
            s,
            depth,
            node_budget: DEFAULT_NODE_BUDGET,
        })
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// `1 - s`.
    pub fn s_bar(&self) -> f64 {
        1.0 - self.s
    }
}

/// Reproducible random stream: a master value plus a derivation path.
/// Identical `(value, path)` always yields identical draws, so parallel
/// trials can derive disjoint streams as `seed.child(trial)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub path: Vec<u64>,
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed {
            value,
            path: Vec::new(),
        }
    }

    /// Derive the child stream at `index`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Seed {
            value: self.value,
            path,
        }
    }

    /// Instantiate the stream. The key is a hash of `(value, path)` so
    /// siblings and ancestors never share state.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.value.to_le_bytes());
        for p in &self.path {
            hasher.update(p.to_le_bytes());
        }
        let key: [u8; 32] = hasher.finalize().into();
        ChaCha8Rng::from_seed(key)
    }
}

/// Which model a tree pair was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn label(&self) -> &'static str {
        match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<usize>,
    children: Vec<usize>,
    depth: usize,
}

/// Arena-based ordered labeled rooted tree.
#[derive(Debug, Clone)]
pub struct RootedTree {
    nodes: Vec<Node>,
    root: usize,
}

impl RootedTree {
    /// A single root node.
    pub fn single() -> Self {
        RootedTree {
            nodes: vec![Node {
                parent: None,
                children: Vec::new(),
                depth: 0,
            }],
            root: 0,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a rooted tree always has its root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.nodes[v].children
    }

    /// Number of children of `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.nodes[v].children.len()
    }

    pub fn depth_of(&self, v: usize) -> usize {
        self.nodes[v].depth
    }

    /// Depth of the tree: maximum node depth.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn node_ids(&self) -> std::ops::Range<usize> {
        0..self.nodes.len()
    }

    /// Append a new child under `parent`, returning its id.
    pub fn add_child(&mut self, parent: usize) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            depth,
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Checks the arena invariants: one root at depth 0, child depths are
    /// parent depth + 1, parent/child links agree, every node reachable.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        if self.nodes[self.root].parent.is_some() || self.nodes[self.root].depth != 0 {
            return Err(Error::Domain("root must be parentless at depth 0".into()));
        }
        while let Some(v) = stack.pop() {
            if seen[v] {
                return Err(Error::Domain(format!("node {v} reached twice")));
            }
            seen[v] = true;
            for &c in &self.nodes[v].children {
                if self.nodes[c].parent != Some(v) {
                    return Err(Error::Domain(format!("bad parent link at node {c}")));
                }
                if self.nodes[c].depth != self.nodes[v].depth + 1 {
                    return Err(Error::Domain(format!("bad depth at node {c}")));
                }
                stack.push(c);
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Domain("unreachable nodes in arena".into()));
        }
        Ok(())
    }

    #[inline]
    fn debug_validate(&self) {
        #[cfg(debug_assertions)]
        self.validate().expect("tree invariant violated");
    }

    /// Newline-free nested-parenthesis form: a node is `(` followed by its
    /// children's forms followed by `)`. A single node is `()`.
    pub fn to_parens(&self) -> String {
        fn rec(t: &RootedTree, v: usize, out: &mut String) {
            out.push('(');
            for &c in t.children(v) {
                rec(t, c, out);
            }
            out.push(')');
        }
        let mut out = String::new();
        rec(self, self.root, &mut out);
        out
    }

    pub fn from_parens(text: &str) -> Result<Self> {
        let bytes = text.trim().as_bytes();
        if bytes.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty tree text".into(),
            });
        }
        let mut tree: Option<RootedTree> = None;
        let mut stack: Vec<usize> = Vec::new();
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => {
                    if let Some(t) = tree.as_mut() {
                        let &parent = stack.last().ok_or(Error::Parse {
                            line: 1,
                            message: format!("unexpected '(' at byte {i}"),
                        })?;
                        let id = t.add_child(parent);
                        stack.push(id);
                    } else {
                        tree = Some(RootedTree::single());
                        stack.push(0);
                    }
                }
                b')' => {
                    stack.pop().ok_or(Error::Parse {
                        line: 1,
                        message: format!("unbalanced ')' at byte {i}"),
                    })?;
                    if stack.is_empty() && i + 1 < bytes.len() {
                        return Err(Error::Parse {
                            line: 1,
                            message: "trailing text after root closes".into(),
                        });
                    }
                }
                c => {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("unexpected byte {:?}", c as char),
                    })
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "unbalanced '('".into(),
            });
        }
        let t = tree.ok_or(Error::Parse {
            line: 1,
            message: "no tree found".into(),
        })?;
        t.debug_validate();
        Ok(t)
    }
}

/// Ordered structural equality, independent of arena numbering.
impl PartialEq for RootedTree {
    fn eq(&self, other: &Self) -> bool {
        fn rec(a: &RootedTree, va: usize, b: &RootedTree, vb: usize) -> bool {
            let ca = a.children(va);
            let cb = b.children(vb);
            ca.len() == cb.len() && ca.iter().zip(cb.iter()).all(|(&x, &y)| rec(a, x, b, y))
        }
        self.len() == other.len() && rec(self, self.root, other, other.root)
    }
}

impl Eq for RootedTree {}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    parent: Option<usize>,
    children: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    nodes: Vec<NodeRepr>,
    root: usize,
}

impl Serialize for RootedTree {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        TreeRepr {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRepr {
                    parent: n.parent,
                    children: n.children.clone(),
                })
                .collect(),
            root: self.root,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for RootedTree {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = TreeRepr::deserialize(de)?;
        if repr.root >= repr.nodes.len() {
            return Err(D::Error::custom("root id out of range"));
        }
        let mut tree = RootedTree {
            nodes: repr
                .nodes
                .iter()
                .map(|n| Node {
                    parent: n.parent,
                    children: n.children.clone(),
                    depth: 0,
                })
                .collect(),
            root: repr.root,
        };
        // Recompute depths by BFS, then validate the full invariant set.
        let mut queue = VecDeque::from([repr.root]);
        while let Some(v) = queue.pop_front() {
            let d = tree.nodes[v].depth;
            for i in 0..tree.nodes[v].children.len() {
                let c = tree.nodes[v].children[i];
                if c >= tree.nodes.len() {
                    return Err(D::Error::custom("child id out of range"));
                }
                tree.nodes[c].depth = d + 1;
                queue.push_back(c);
            }
        }
        tree.validate()
            .map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(tree)
    }
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as usize
}

fn check_budget(nodes: usize, budget: usize) -> Result<()> {
    if nodes > budget {
        Err(Error::BudgetExceeded { nodes, budget })
    } else {
        Ok(())
    }
}

fn sample_gw_mean<R: Rng + ?Sized>(
    mean: f64,
    depth: usize,
    budget: usize,
    rng: &mut R,
) -> Result<RootedTree> {
    let mut t = RootedTree::single();
    let mut queue = VecDeque::from([t.root()]);
    while let Some(v) = queue.pop_front() {
        if t.depth_of(v) >= depth {
            continue;
        }
        let k = poisson_count(rng, mean);
        check_budget(t.len() + k, budget)?;
        for _ in 0..k {
            queue.push_back(t.add_child(v));
        }
    }
    t.debug_validate();
    Ok(t)
}

/// Galton-Watson tree with Poisson(`lambda`) offspring, truncated at
/// `params.depth`.
pub fn sample_gw<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<RootedTree> {
    sample_gw_mean(params.lambda, params.depth, params.node_budget, rng)
}

/// Subtree of nodes at depth at most `d`, child order preserved.
pub fn prune(t: &RootedTree, d: usize) -> RootedTree {
    let mut out = RootedTree::single();
    let mut stack = vec![(t.root(), 0usize)];
    while let Some((old, new)) = stack.pop() {
        if t.depth_of(old) >= d {
            continue;
        }
        for &c in t.children(old) {
            let id = out.add_child(new);
            stack.push((c, id));
        }
    }
    out.debug_validate();
    out
}

/// Keep each edge independently with probability `s` and return the root
/// component; surviving children keep their relative order.
pub fn subsample<R: Rng + ?Sized>(t: &RootedTree, s: f64, rng: &mut R) -> RootedTree {
    assert!((0.0..=1.0).contains(&s), "s must be in [0, 1]");
    let mut out = RootedTree::single();
    // Depth-first, drawing children in order so the stream is reproducible.
    fn rec<R: Rng + ?Sized>(
        t: &RootedTree,
        old: usize,
        out: &mut RootedTree,
        new: usize,
        s: f64,
        rng: &mut R,
    ) {
        for &c in t.children(old) {
            if rng.gen_bool(s) {
                let id = out.add_child(new);
                rec(t, c, out, id, s, rng);
            }
        }
    }
    let new_root = out.root();
    rec(t, t.root(), &mut out, new_root, s, rng);
    out.debug_validate();
    out
}

/// `(lambda, s)`-augmentation pruned at `params.depth`: every node of `t`
/// gains Poisson(`lambda * (1-s)`) fresh children appended after its existing
/// ones, each rooting an independent Galton-Watson tree.
pub fn augment<R: Rng + ?Sized>(
    t: &RootedTree,
    params: &ModelParams,
    rng: &mut R,
) -> Result<RootedTree> {
    Ok(augment_tracked(t, params, rng)?.0)
}

/// Augmentation that also reports where each input node landed; used to
/// carry the planted injection through `sample_pair`.
pub fn augment_tracked<R: Rng + ?Sized>(
    t: &RootedTree,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(RootedTree, Vec<usize>)> {
    let mean_extra = params.lambda * params.s_bar();
    let mut out = RootedTree::single();
    let mut map = vec![usize::MAX; t.len()];
    map[t.root()] = out.root();

    // Copy the pruned input first so original children precede additions.
    let mut order = vec![t.root()];
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        if t.depth_of(v) >= params.depth {
            continue;
        }
        for &c in t.children(v) {
            let id = out.add_child(map[v]);
            map[c] = id;
            order.push(c);
        }
    }
    check_budget(out.len(), params.node_budget)?;

    // Fresh children and their subtrees, in copy order.
    for &v in &order {
        let nv = map[v];
        let d = out.depth_of(nv);
        if d >= params.depth {
            continue;
        }
        let extra = poisson_count(rng, mean_extra);
        check_budget(out.len() + extra, params.node_budget)?;
        for _ in 0..extra {
            let child = out.add_child(nv);
            grow_gw(
                &mut out,
                child,
                params.depth,
                params.lambda,
                params.node_budget,
                rng,
            )?;
        }
    }
    out.debug_validate();
    Ok((out, map))
}

fn grow_gw<R: Rng + ?Sized>(
    out: &mut RootedTree,
    at: usize,
    depth: usize,
    lambda: f64,
    budget: usize,
    rng: &mut R,
) -> Result<()> {
    let mut queue = VecDeque::from([at]);
    while let Some(v) = queue.pop_front() {
        if out.depth_of(v) >= depth {
            continue;
        }
        let k = poisson_count(rng, lambda);
        check_budget(out.len() + k, budget)?;
        for _ in 0..k {
            queue.push_back(out.add_child(v));
        }
    }
    Ok(())
}

/// Independently permute each node's child list uniformly. Node ids are
/// stable; only child order changes.
pub fn relabel_uniform<R: Rng + ?Sized>(t: &RootedTree, rng: &mut R) -> RootedTree {
    let mut out = t.clone();
    for v in 0..out.nodes.len() {
        out.nodes[v].children.shuffle(rng);
    }
    out.debug_validate();
    out
}

/// Planted injection of the intersection tree into one observed tree.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// The intersection tree, pruned at the sampling depth.
    pub intersection: RootedTree,
    /// Node map intersection -> t.
    pub sigma: Vec<usize>,
    /// Node map intersection -> t'.
    pub sigma_prime: Vec<usize>,
}

/// A sampled tree pair with its hypothesis and, under H1, the planted
/// intersection tree and injections.
#[derive(Debug, Clone)]
pub struct TreePairSample {
    pub t: RootedTree,
    pub t_prime: RootedTree,
    pub hypothesis: Hypothesis,
    pub ground_truth: Option<GroundTruth>,
}

/// Draw a tree pair. Under H0 the trees are independent Galton-Watson trees;
/// under H1 both are augmentations of a common Poisson(`lambda * s`)
/// intersection tree, then independently uniformly relabeled. Marginals are
/// Galton-Watson(`lambda`) either way.
pub fn sample_pair<R: Rng + ?Sized>(
    params: &ModelParams,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<TreePairSample> {
    match hypothesis {
        Hypothesis::H0 => Ok(TreePairSample {
            t: sample_gw(params, rng)?,
            t_prime: sample_gw(params, rng)?,
            hypothesis,
            ground_truth: None,
        }),
        Hypothesis::H1 => {
            let intersection = sample_gw_mean(
                params.lambda * params.s,
                params.depth,
                params.node_budget,
                rng,
            )?;
            let (aug, sigma) = augment_tracked(&intersection, params, rng)?;
            let t = relabel_uniform(&aug, rng);
            let (aug_p, sigma_prime) = augment_tracked(&intersection, params, rng)?;
            let t_prime = relabel_uniform(&aug_p, rng);
            Ok(TreePairSample {
                t,
                t_prime,
                hypothesis,
                ground_truth: Some(GroundTruth {
                    intersection,
                    sigma,
                    sigma_prime,
                }),
            })
        }
    }
}

/// One step of the tree Markov kernel: subsample at `s`, `(lambda, s)`-
/// augment, uniformly relabel; everything pruned at `params.depth`.
pub fn markov_transition<R: Rng + ?Sized>(
    t: &RootedTree,
    params: &ModelParams,
    rng: &mut R,
) -> Result<RootedTree> {
    let pruned = prune(t, params.depth);
    let sub = subsample(&pruned, params.s, rng);
    let aug = augment(&sub, params, rng)?;
    Ok(relabel_uniform(&aug, rng))
}

/// Canonical shape code: `(` + sorted child codes + `)`. Two trees get the
/// same code iff they are equal up to relabeling.
pub fn canonical_code(t: &RootedTree) -> Vec<u8> {
    code_rec(t, t.root())
}

fn code_rec(t: &RootedTree, v: usize) -> Vec<u8> {
    let mut child_codes: Vec<Vec<u8>> = t.children(v).iter().map(|&c| code_rec(t, c)).collect();
    child_codes.sort_unstable();
    let mut out = Vec::with_capacity(2 + child_codes.iter().map(Vec::len).sum::<usize>());
    out.push(b'(');
    for c in child_codes {
        out.extend_from_slice(&c);
    }
    out.push(b')');
    out
}

/// Canonical code of every subtree, indexed by node id.
pub fn subtree_codes(t: &RootedTree) -> Vec<Vec<u8>> {
    let mut codes: Vec<Vec<u8>> = vec![Vec::new(); t.len()];
    // Children before parents: process by decreasing depth.
    let mut order: Vec<usize> = t.node_ids().collect();
    order.sort_by_key(|&v| std::cmp::Reverse(t.depth_of(v)));
    for v in order {
        let mut child_codes: Vec<&[u8]> =
            t.children(v).iter().map(|&c| codes[c].as_slice()).collect();
        child_codes.sort_unstable();
        let mut code = Vec::with_capacity(2 + child_codes.iter().map(|c| c.len()).sum::<usize>());
        code.push(b'(');
        for c in child_codes {
            code.extend_from_slice(c);
        }
        code.push(b')');
        codes[v] = code;
    }
    codes
}

/// `log |Aut(t)|`: at every node, group child subtrees by canonical code and
/// accumulate `log(multiplicity!)` per class. Log space because the counts
/// overflow 64-bit integers quickly.
pub fn automorphism_count_log(t: &RootedTree) -> f64 {
    let codes = subtree_codes(t);
    let mut acc = 0.0;
    for v in t.node_ids() {
        let mut child_codes: Vec<&[u8]> =
            t.children(v).iter().map(|&c| codes[c].as_slice()).collect();
        child_codes.sort_unstable();
        let mut i = 0;
        while i < child_codes.len() {
            let mut j = i + 1;
            while j < child_codes.len() && child_codes[j] == child_codes[i] {
                j += 1;
            }
            acc += ln_factorial(j - i);
            i = j;
        }
    }
    acc
}
