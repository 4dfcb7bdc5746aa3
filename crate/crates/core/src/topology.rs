//! Rooted in-trees, per-node statistics and the structural constructions
//! used by the exponent analysis.

use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Rooted tree with edges oriented toward the root, which is always node 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    parents: Vec<Option<usize>>,
    child_offsets: Vec<usize>,
    children: Vec<usize>,
    /// Breadth-first order from the root.
    order: Vec<usize>,
    depth: Vec<usize>,
    height: usize,
    leaf_count: Vec<usize>,
    pred_count: Vec<usize>,
}

impl Tree {
    /// `parents[0]` must be `None`, every other entry `Some(parent)`.
    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if n < 2 {
            return Err(Error::InvalidTree("a tree needs a root and at least one leaf".to_string()));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidTree("node 0 is the root and must have no parent".to_string()));
        }
        let mut degree = vec![0usize; n];
        for (v, p) in parents.iter().enumerate().skip(1) {
            match *p {
                None => return Err(Error::InvalidTree(alloc::format!("node {v} has no parent; only the root may"))),
                Some(p) if p >= n => {
                    return Err(Error::InvalidTree(alloc::format!("node {v} has out-of-range parent {p}")))
                }
                Some(p) if p == v => return Err(Error::InvalidTree(alloc::format!("node {v} is its own parent"))),
                Some(p) => degree[p] += 1,
            }
        }
        let mut child_offsets = Vec::with_capacity(n + 1);
        child_offsets.push(0);
        for d in &degree {
            child_offsets.push(child_offsets.last().unwrap() + d);
        }
        let mut fill = child_offsets.clone();
        let mut children = vec![0usize; n - 1];
        for (v, p) in parents.iter().enumerate().skip(1) {
            let p = p.unwrap();
            children[fill[p]] = v;
            fill[p] += 1;
        }

        let mut order = Vec::with_capacity(n);
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &children[child_offsets[v]..child_offsets[v + 1]] {
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
        if order.len() != n {
            return Err(Error::InvalidTree("parent links contain a cycle".to_string()));
        }

        let mut leaf_count = vec![0usize; n];
        let mut pred_count = vec![0usize; n];
        for &v in order.iter().rev() {
            if v != 0 && child_offsets[v] == child_offsets[v + 1] {
                leaf_count[v] = 1;
            }
            if let Some(p) = parents[v] {
                leaf_count[p] += leaf_count[v];
                pred_count[p] += pred_count[v] + 1;
            }
        }
        let height = depth.iter().copied().max().unwrap_or(0);
        Ok(Tree { parents, child_offsets, children, order, depth, height, leaf_count, pred_count })
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parents[v]
    }

    /// Immediate predecessors of `v`, sorted by id.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[self.child_offsets[v]..self.child_offsets[v + 1]]
    }

    pub fn bfs_order(&self) -> &[usize] {
        &self.order
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `h - depth(v)`; leaves of an h-uniform tree sit at level 0.
    pub fn level(&self, v: usize) -> usize {
        self.height - self.depth[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v != 0 && self.children(v).is_empty()
    }

    /// `l(v)`: leaves in the subtree rooted at `v`.
    pub fn leaf_count(&self, v: usize) -> usize {
        self.leaf_count[v]
    }

    /// `p(v)`: nodes in the subtree rooted at `v`, excluding `v`.
    pub fn pred_count(&self, v: usize) -> usize {
        self.pred_count[v]
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_count[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.n()).filter(move |&v| self.is_leaf(v))
    }

    /// Member of A: has at least one leaf child.
    pub fn in_a(&self, v: usize) -> bool {
        self.children(v).iter().any(|&c| self.is_leaf(c))
    }

    /// Member of B: non-leaf whose children are all leaves.
    pub fn in_b(&self, v: usize) -> bool {
        let c = self.children(v);
        !c.is_empty() && c.iter().all(|&u| self.is_leaf(u))
    }

    pub fn set_a(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| self.in_a(v)).collect()
    }

    pub fn set_b(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| self.in_b(v)).collect()
    }

    /// Every leaf is at depth `height`.
    pub fn is_uniform(&self) -> bool {
        self.leaves().all(|v| self.depth[v] == self.height)
    }

    /// Nodes at each level, index 0 = leaves; only meaningful for uniform trees.
    pub fn nodes_by_level(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.height + 1];
        for v in 0..self.n() {
            out[self.level(v)].push(v);
        }
        out
    }
}

/// Summary statistics of one tree at one small-subtree cutoff `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStats {
    pub n: usize,
    pub height: usize,
    pub leaves: usize,
    pub uniform: bool,
    pub a_count: usize,
    pub b_count: usize,
    pub cutoff: usize,
    /// `F_N`: members of B with at most `cutoff` leaves.
    pub small: Vec<usize>,
    /// Fraction of leaves that sit under members of `F_N`.
    pub q: f64,
    pub leaf_fraction: f64,
    /// `|F_N| >= q * l(f) / N`.
    pub small_count_bound_holds: bool,
}

pub fn analyze_tree(tree: &Tree, cutoff: usize) -> TreeStats {
    let b = tree.set_b();
    let small: Vec<usize> = b.iter().copied().filter(|&v| tree.leaf_count(v) <= cutoff).collect();
    let q = small_fraction(tree, cutoff);
    let leaves = tree.num_leaves();
    let bound = q * leaves as f64 / cutoff.max(1) as f64;
    TreeStats {
        n: tree.n(),
        height: tree.height(),
        leaves,
        uniform: tree.is_uniform(),
        a_count: tree.set_a().len(),
        b_count: b.len(),
        cutoff,
        small_count_bound_holds: small.len() as f64 >= bound * (1.0 - 1e-12),
        small,
        q,
        leaf_fraction: leaves as f64 / tree.n() as f64,
    }
}

/// `q_N` of one tree.
pub fn small_fraction(tree: &Tree, cutoff: usize) -> f64 {
    let s: usize = (0..tree.n())
        .filter(|&v| tree.in_b(v) && tree.leaf_count(v) <= cutoff)
        .map(|v| tree.leaf_count(v))
        .sum();
    s as f64 / tree.num_leaves() as f64
}

/// A tree together with where each original node ended up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapped<M> {
    pub tree: Tree,
    pub mapping: M,
}

/// Makes every leaf-to-root path exactly `height` long by splicing one relay
/// chain between each node and its group of shallow leaf children. Original
/// ids are kept; chain nodes are appended.
pub fn uniformize(tree: &Tree) -> Mapped<Vec<usize>> {
    let h = tree.height();
    let mut parents = tree.parents.clone();
    for v in 0..tree.n() {
        let shallow: Vec<usize> = tree
            .children(v)
            .iter()
            .copied()
            .filter(|&c| tree.is_leaf(c) && tree.depth(c) < h)
            .collect();
        let Some(&first) = shallow.first() else { continue };
        let deficit = h - tree.depth(first);
        let mut attach = v;
        for _ in 0..deficit {
            parents.push(Some(attach));
            attach = parents.len() - 1;
        }
        for leaf in shallow {
            parents[leaf] = Some(attach);
        }
    }
    let out = Tree::from_parents(parents).expect("splicing chains keeps the tree valid");
    debug_assert!(out.is_uniform());
    debug_assert!(out.set_b().len() <= h * tree.set_b().len());
    Mapped { tree: out, mapping: (0..tree.n()).collect() }
}

/// Keeps the nodes flagged in `keep` (root must be kept), renumbering them in
/// increasing id order.
fn induced_subtree(tree: &Tree, keep: &[bool]) -> Result<Mapped<Vec<Option<usize>>>> {
    debug_assert!(keep[0]);
    let mut mapping = vec![None; tree.n()];
    let mut next = 0usize;
    for v in 0..tree.n() {
        if keep[v] {
            mapping[v] = Some(next);
            next += 1;
        }
    }
    let mut parents = vec![None; next];
    for v in 1..tree.n() {
        if let Some(nv) = mapping[v] {
            let p = tree.parent(v).unwrap();
            parents[nv] = Some(mapping[p].expect("kept node has a kept parent"));
        }
    }
    Ok(Mapped { tree: Tree::from_parents(parents)?, mapping })
}

/// Removes every member of B with at most `cutoff` leaves, together with its
/// leaves, then repeatedly removes relays left without predecessors.
pub fn prune_small(tree: &Tree, cutoff: usize) -> Result<Mapped<Vec<Option<usize>>>> {
    if !tree.is_uniform() {
        return Err(Error::NotUniform);
    }
    let mut keep = vec![true; tree.n()];
    let mut live_children: Vec<usize> = (0..tree.n()).map(|v| tree.children(v).len()).collect();
    let mut stack = Vec::new();
    for v in 0..tree.n() {
        if tree.in_b(v) && tree.leaf_count(v) <= cutoff {
            for &c in tree.children(v) {
                keep[c] = false;
            }
            stack.push(v);
        }
    }
    while let Some(v) = stack.pop() {
        if v == 0 {
            return Err(Error::EmptyAfterPrune);
        }
        keep[v] = false;
        let p = tree.parent(v).unwrap();
        live_children[p] -= 1;
        if live_children[p] == 0 {
            stack.push(p);
        }
    }
    induced_subtree(tree, &keep)
}

/// Deletes all leaves of an h-uniform tree (`h >= 2`); the former B nodes
/// become the leaves of an (h-1)-uniform tree.
pub fn collapse_leaves(tree: &Tree) -> Result<Mapped<Vec<Option<usize>>>> {
    if !tree.is_uniform() {
        return Err(Error::NotUniform);
    }
    if tree.height() < 2 {
        return Err(Error::InvalidParams("collapsing leaves needs height at least 2".to_string()));
    }
    let keep: Vec<bool> = (0..tree.n()).map(|v| !tree.is_leaf(v)).collect();
    induced_subtree(tree, &keep)
}

/// How a structural dimension of a family scales with its size parameter `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRule {
    Fixed(usize),
    Linear,
    Square,
}

impl SizeRule {
    pub fn eval(self, m: usize) -> usize {
        match self {
            SizeRule::Fixed(k) => k,
            SizeRule::Linear => m,
            SizeRule::Square => m * m,
        }
    }
}

/// Parametric tree sequences. The size argument of [`TreeFamily::generate`]
/// is the node count `n` for `Parallel` and `ChainPlusLeaves`, and the
/// structural parameter `m` for the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeFamily {
    /// Star with `n - 1` leaves.
    Parallel,
    /// Root plus a chain of `height - 1` relays ending in one leaf; all other
    /// leaves attach to the root, `n - height` leaves in total.
    ChainPlusLeaves { height: usize },
    /// Two relays with `m` leaves each.
    TwoRelay,
    /// `relays(m)` level-1 nodes with `leaves(m)` leaves each.
    WideUniform { leaves: SizeRule, relays: SizeRule },
    /// Relays `v_1..v_m`, where `v_i` has `i + 1` leaves.
    IncreasingLeaves,
    /// A fixed tree, independent of the size argument.
    Explicit(Tree),
}

impl TreeFamily {
    pub fn generate(&self, size: usize) -> Result<Tree> {
        match self {
            TreeFamily::Parallel => {
                if size < 2 {
                    return Err(Error::InvalidParams(alloc::format!("parallel tree needs n >= 2, got {size}")));
                }
                let mut parents = vec![Some(0); size];
                parents[0] = None;
                Tree::from_parents(parents)
            }
            TreeFamily::ChainPlusLeaves { height } => {
                let h = *height;
                if h == 0 || size < h + 1 {
                    return Err(Error::InvalidParams(alloc::format!(
                        "chain of height {h} needs n >= {}, got {size}",
                        h + 1
                    )));
                }
                let mut parents = vec![None];
                for i in 1..h {
                    parents.push(Some(i - 1));
                }
                parents.push(Some(h - 1));
                while parents.len() < size {
                    parents.push(Some(0));
                }
                Tree::from_parents(parents)
            }
            TreeFamily::TwoRelay => two_level(&[size, size]),
            TreeFamily::WideUniform { leaves, relays } => {
                let (l, r) = (leaves.eval(size), relays.eval(size));
                two_level(&vec![l; r])
            }
            TreeFamily::IncreasingLeaves => {
                let sizes: Vec<usize> = (1..=size).map(|i| i + 1).collect();
                two_level(&sizes)
            }
            TreeFamily::Explicit(t) => Ok(t.clone()),
        }
    }
}

/// Root, one relay per entry of `leaves` (ids `1..=len`), then each relay's
/// leaves in relay order.
pub fn two_level(leaves: &[usize]) -> Result<Tree> {
    if leaves.is_empty() || leaves.contains(&0) {
        return Err(Error::InvalidParams("every relay needs at least one leaf".to_string()));
    }
    let r = leaves.len();
    let total: usize = leaves.iter().sum();
    let mut parents = Vec::with_capacity(1 + r + total);
    parents.push(None);
    parents.extend(core::iter::repeat(Some(0)).take(r));
    for (i, &l) in leaves.iter().enumerate() {
        parents.extend(core::iter::repeat(Some(i + 1)).take(l));
    }
    Tree::from_parents(parents)
}

/// Leaf fraction and `q_N` curves of a family over a size grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimate {
    pub sizes: Vec<usize>,
    pub leaf_fractions: Vec<f64>,
    /// Final leaf fraction.
    pub z: f64,
    /// `(N, q_N at each size)`.
    pub q_curves: Vec<(usize, Vec<f64>)>,
    /// At every size and `N`: `l/n <= N/(N+q_N)` and `(n-l)/l <= h q_N + h/N`.
    pub inequalities_hold: bool,
    /// Final leaf fraction within `TREND_TOLERANCE` of 1.
    pub z_near_one: bool,
    /// Every final `q_N` within `TREND_TOLERANCE` of 0.
    pub q_near_zero: bool,
    /// `z_near_one == q_near_zero`.
    pub consistent: bool,
}

pub const TREND_TOLERANCE: f64 = 0.05;

pub fn estimate_z(family: &TreeFamily, sizes: &[usize], cutoffs: &[usize]) -> Result<ZEstimate> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("size grid must be non-empty and increasing".to_string()));
    }
    let mut leaf_fractions = Vec::with_capacity(sizes.len());
    let mut q_curves: Vec<(usize, Vec<f64>)> = cutoffs.iter().map(|&c| (c, Vec::new())).collect();
    let mut inequalities_hold = true;
    for &m in sizes {
        let t = family.generate(m)?;
        let (n, l, h) = (t.n() as f64, t.num_leaves() as f64, t.height() as f64);
        leaf_fractions.push(l / n);
        for (c, curve) in q_curves.iter_mut() {
            let q = small_fraction(&t, *c);
            let nf = *c as f64;
            let slack = 1e-12;
            inequalities_hold &= l / n <= nf / (nf + q) + slack;
            inequalities_hold &= (n - l) / l <= h * q + h / nf + slack;
            curve.push(q);
        }
    }
    let z = *leaf_fractions.last().unwrap();
    let z_near_one = z >= 1.0 - TREND_TOLERANCE;
    let q_near_zero = q_curves.iter().all(|(_, c)| *c.last().unwrap() <= TREND_TOLERANCE);
    Ok(ZEstimate {
        sizes: sizes.to_vec(),
        leaf_fractions,
        z,
        q_curves,
        inequalities_hold,
        z_near_one,
        q_near_zero,
        consistent: z_near_one == q_near_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_stats() {
        let t = TreeFamily::Parallel.generate(11).unwrap();
        let s = analyze_tree(&t, 10);
        assert_eq!((s.height, s.leaves, s.b_count), (1, 10, 1));
        assert_eq!(s.small, vec![0]);
        assert_eq!(s.q, 1.0);
        assert!((s.leaf_fraction - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(t.pred_count(0), 10);
    }

    #[test]
    fn two_relay_stats() {
        let t = TreeFamily::TwoRelay.generate(4).unwrap();
        assert_eq!(t.n(), 11);
        assert_eq!(t.set_b(), vec![1, 2]);
        assert_eq!((t.leaf_count(1), t.leaf_count(2), t.num_leaves()), (4, 4, 8));
        assert_eq!(analyze_tree(&t, 3).q, 0.0);
        assert_eq!(analyze_tree(&t, 4).q, 1.0);
        let t3 = TreeFamily::TwoRelay.generate(3).unwrap();
        assert_eq!((t3.n(), t3.height(), t3.num_leaves()), (9, 2, 6));
    }

    #[test]
    fn increasing_leaves_stats() {
        let t = TreeFamily::IncreasingLeaves.generate(4).unwrap();
        assert_eq!(t.num_leaves(), 14);
        let s = analyze_tree(&t, 3);
        assert_eq!(s.small, vec![1, 2]);
        assert!((s.q - 5.0 / 14.0).abs() < 1e-15);
        assert!(s.small_count_bound_holds);
        let t2 = TreeFamily::IncreasingLeaves.generate(2).unwrap();
        assert_eq!(t2.n(), 8);
        assert_eq!((t2.leaf_count(1), t2.leaf_count(2)), (2, 3));
    }

    #[test]
    fn chain_plus_leaves() {
        let t = TreeFamily::ChainPlusLeaves { height: 3 }.generate(10).unwrap();
        assert_eq!(t.num_leaves(), 7);
        assert_eq!(t.height(), 3);
        assert!(!t.is_uniform());
        let u = uniformize(&t);
        assert!(u.tree.is_uniform());
        assert_eq!(u.tree.num_leaves(), 7);
        assert_eq!(u.tree.height(), 3);
        // One chain of two relays for the six shallow leaves on the root.
        assert_eq!(u.tree.n(), 12);
    }

    #[test]
    fn uniformize_chain_plus_leaves() {
        // Root with two direct leaves and a length-2 chain to a third leaf.
        let t = Tree::from_parents(vec![None, Some(0), Some(1), Some(0), Some(0)]).unwrap();
        let u = uniformize(&t);
        assert!(u.tree.is_uniform());
        assert_eq!(u.tree.n(), 6);
        assert_eq!(u.tree.parent(3), Some(5));
        assert_eq!(u.tree.parent(4), Some(5));
        assert_eq!(u.tree.parent(5), Some(0));
        assert_eq!(uniformize(&u.tree).tree, u.tree);
        let star = TreeFamily::Parallel.generate(6).unwrap();
        assert_eq!(uniformize(&star).tree, star);
    }

    #[test]
    fn pruning() {
        let t = TreeFamily::IncreasingLeaves.generate(4).unwrap();
        let p = prune_small(&t, 2).unwrap();
        assert_eq!(p.tree.num_leaves(), 12);
        assert!(p.tree.is_uniform());
        assert_eq!(p.mapping[1], None);
        assert_eq!(p.mapping[2], Some(1));
        assert_eq!(prune_small(&t, 1).unwrap().tree, t);
        let paired = TreeFamily::WideUniform { leaves: SizeRule::Fixed(2), relays: SizeRule::Linear }
            .generate(5)
            .unwrap();
        assert_eq!(prune_small(&paired, 2), Err(Error::EmptyAfterPrune));
    }

    #[test]
    fn pruning_cascades_upward() {
        // 3-uniform: root <- a <- b <- 2 leaves, root <- c <- d <- 5 leaves.
        let mut parents = vec![None, Some(0), Some(1), Some(0), Some(3)];
        parents.extend([Some(2), Some(2)]);
        parents.extend([Some(4); 5]);
        let t = Tree::from_parents(parents).unwrap();
        let p = prune_small(&t, 2).unwrap();
        assert_eq!(p.tree.n(), 8);
        assert_eq!(p.tree.num_leaves(), 5);
        assert!(p.tree.is_uniform());
        assert_eq!(p.tree.height(), 3);
    }

    #[test]
    fn collapsing() {
        let t = TreeFamily::TwoRelay.generate(4).unwrap();
        let c = collapse_leaves(&t).unwrap();
        assert_eq!((c.tree.n(), c.tree.num_leaves(), c.tree.height()), (3, 2, 1));
        // Balanced binary relay tree of height 3.
        let mut parents = vec![None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(2)];
        for v in 3..7 {
            parents.extend([Some(v), Some(v)]);
        }
        let b = Tree::from_parents(parents).unwrap();
        let c = collapse_leaves(&b).unwrap();
        assert!(c.tree.is_uniform());
        assert_eq!((c.tree.height(), c.tree.num_leaves()), (2, 4));
        assert!(matches!(collapse_leaves(&TreeFamily::Parallel.generate(3).unwrap()), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn invalid_trees() {
        assert!(Tree::from_parents(vec![None]).is_err());
        assert!(Tree::from_parents(vec![None, Some(2), Some(1)]).is_err());
        assert!(Tree::from_parents(vec![Some(0), Some(0)]).is_err());
        assert!(Tree::from_parents(vec![None, None]).is_err());
        assert!(Tree::from_parents(vec![None, Some(5)]).is_err());
    }

    #[test]
    fn z_estimates() {
        let grid: Vec<usize> = (1..=10).map(|i| i * 10).collect();
        let z = estimate_z(&TreeFamily::IncreasingLeaves, &grid, &[2, 5, 10]).unwrap();
        assert!(z.z >= 0.98);
        assert!(z.q_near_zero && z.z_near_one && z.consistent && z.inequalities_hold);

        let paired = TreeFamily::WideUniform { leaves: SizeRule::Fixed(2), relays: SizeRule::Linear };
        let z = estimate_z(&paired, &[10, 100, 1000], &[2]).unwrap();
        assert!((z.z - 2000.0 / 3001.0).abs() < 1e-12);
        assert!(z.q_curves[0].1.iter().all(|&q| q == 1.0));
        assert!(z.consistent && z.inequalities_hold);

        let z = estimate_z(&TreeFamily::Parallel, &[10, 100, 1000], &[2]).unwrap();
        assert!(z.z > 0.99);
        assert!(estimate_z(&TreeFamily::Parallel, &[10, 5], &[2]).is_err());
    }
}
