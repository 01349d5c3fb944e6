//! Minimum spanning trees (Borůvka) and rooted tree layouts for the filter passes.
//!
//! Edges are compared by `(weight, edge index)`, which is a strict total order,
//! so every graph has exactly one minimum spanning tree under this order and
//! Borůvka, Kruskal and reverse-delete all select it.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::EdgeList;

/// Parent of the root in [`RootedTree::parent`].
pub const NO_PARENT: usize = usize::MAX;

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[inline]
fn lighter(weights: &[f64], a: usize, b: usize) -> bool {
    match weights[a].total_cmp(&weights[b]) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a < b,
    }
}

/// Indices (into `edges`) of the minimum spanning tree, found with Borůvka's
/// algorithm. Returned in ascending index order.
pub fn boruvka_mst(edges: &EdgeList) -> Result<Vec<usize>> {
    let weights = edges.require_weights()?;
    let n = edges.num_nodes();
    let pairs = edges.edges();
    let mut sets = DisjointSets::new(n);
    let mut live: Vec<usize> = (0..pairs.len()).collect();
    let mut cheapest = vec![usize::MAX; n];
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    let mut components = n;

    while components > 1 {
        // Drop edges that became internal and find each component's lightest outgoing edge.
        let mut kept = 0;
        for k in 0..live.len() {
            let e = live[k];
            let (u, v) = pairs[e];
            let (ru, rv) = (sets.find(u), sets.find(v));
            if ru == rv {
                continue;
            }
            live[kept] = e;
            kept += 1;
            for r in [ru, rv] {
                if cheapest[r] == usize::MAX || lighter(weights, e, cheapest[r]) {
                    cheapest[r] = e;
                }
            }
        }
        live.truncate(kept);
        if live.is_empty() {
            return Err(Error::Structural(format!(
                "graph is disconnected: {components} components remain"
            )));
        }

        let mut merged = false;
        for slot in cheapest.iter_mut() {
            let e = std::mem::replace(slot, usize::MAX);
            if e == usize::MAX {
                continue;
            }
            let (u, v) = pairs[e];
            if sets.union(u, v) {
                chosen.push(e);
                components -= 1;
                merged = true;
            }
        }
        debug_assert!(merged);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Total weight of the minimum spanning tree via sort-and-union (Kruskal).
/// Kept independent of [`boruvka_mst`] so the two can cross-check.
pub fn kruskal_mst_weight(edges: &EdgeList) -> Result<f64> {
    let weights = edges.require_weights()?;
    Ok(kruskal_mst_edges(edges)?.iter().map(|&e| weights[e]).sum())
}

/// Kruskal's edge set under the same `(weight, index)` order, ascending by index.
pub fn kruskal_mst_edges(edges: &EdgeList) -> Result<Vec<usize>> {
    let weights = edges.require_weights()?;
    let n = edges.num_nodes();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));

    // Plain label-relinking sets: slower than union-find, independent of it.
    let mut label: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        let (u, v) = edges.edges()[e];
        let (mut a, mut b) = (label[u], label[v]);
        if a == b {
            continue;
        }
        if members[a].len() < members[b].len() {
            std::mem::swap(&mut a, &mut b);
        }
        let moved = std::mem::take(&mut members[b]);
        for &m in &moved {
            label[m] = a;
        }
        members[a].extend(moved);
        chosen.push(e);
    }
    if chosen.len() + 1 != n {
        return Err(Error::Structural(format!(
            "graph is disconnected: spanning forest has {} edges for {n} nodes",
            chosen.len()
        )));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// A spanning tree laid out for two-pass dynamic programming.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree {
    root: usize,
    parent: Vec<usize>,
    /// Index into the source edge list of the edge to the parent.
    parent_edge: Vec<usize>,
    parent_weight: Vec<f64>,
    /// Breadth-first order from the root.
    order: Vec<usize>,
    /// For each traversal position, the position of its parent (0 for the root).
    order_parent: Vec<usize>,
    child_start: Vec<usize>,
    child_list: Vec<usize>,
}

impl RootedTree {
    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Parent of each node, [`NO_PARENT`] for the root.
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    pub fn parent_edge(&self) -> &[usize] {
        &self.parent_edge
    }

    /// Weight of the edge to the parent; zero for the root.
    pub fn parent_weight(&self) -> &[f64] {
        &self.parent_weight
    }

    /// Traversal order in which every node follows its parent.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Parent positions in traversal order: node `order[k]` has parent
    /// `order[order_parent()[k]]`, and `order_parent()[k] < k` for `k > 0`.
    pub fn order_parent(&self) -> &[usize] {
        &self.order_parent
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.child_list[self.child_start[node]..self.child_start[node + 1]]
    }

    /// The tree's edges as `(child, parent)` pairs in traversal order.
    pub fn tree_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.order[1..].iter().map(move |&c| (c, self.parent[c]))
    }

    /// Same edge set, rooted elsewhere.
    pub fn reroot(&self, root: usize) -> Result<RootedTree> {
        if root >= self.num_nodes() {
            return Err(Error::Argument(format!("root {root} out of range")));
        }
        let mut adjacency = vec![Vec::new(); self.num_nodes()];
        for &c in &self.order[1..] {
            let p = self.parent[c];
            let info = (self.parent_edge[c], self.parent_weight[c]);
            adjacency[c].push((p, info));
            adjacency[p].push((c, info));
        }
        Ok(Self::bfs(root, &adjacency))
    }

    fn bfs(root: usize, adjacency: &[Vec<(usize, (usize, f64))>]) -> RootedTree {
        let n = adjacency.len();
        let mut parent = vec![NO_PARENT; n];
        let mut parent_edge = vec![usize::MAX; n];
        let mut parent_weight = vec![0.0; n];
        let mut order = Vec::with_capacity(n);
        let mut child_start = Vec::with_capacity(n + 1);
        let mut child_list = Vec::with_capacity(n.saturating_sub(1));
        let mut visited = vec![false; n];

        // Children are listed per node in BFS order, so a second pass builds the CSR layout.
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<_> = adjacency[u]
                .iter()
                .filter(|(v, _)| !visited[*v])
                .copied()
                .collect();
            next.sort_by_key(|&(v, _)| v);
            for (v, (e, w)) in next {
                visited[v] = true;
                parent[v] = u;
                parent_edge[v] = e;
                parent_weight[v] = w;
                queue.push_back(v);
            }
        }
        let mut kids = vec![Vec::new(); n];
        for &v in &order[1..] {
            kids[parent[v]].push(v);
        }
        for list in &kids {
            child_start.push(child_list.len());
            child_list.extend_from_slice(list);
        }
        child_start.push(child_list.len());
        let mut position = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let order_parent = order
            .iter()
            .map(|&v| if v == root { 0 } else { position[parent[v]] })
            .collect();
        RootedTree {
            root,
            parent,
            parent_edge,
            parent_weight,
            order,
            order_parent,
            child_start,
            child_list,
        }
    }
}

/// Roots the spanning tree given by `chosen` edge indices at `root`.
pub fn root_tree(edges: &EdgeList, chosen: &[usize], root: usize) -> Result<RootedTree> {
    let n = edges.num_nodes();
    if root >= n {
        return Err(Error::Argument(format!(
            "root {root} out of range for {n} nodes"
        )));
    }
    if chosen.len() + 1 != n {
        return Err(Error::Structural(format!(
            "a spanning tree on {n} nodes needs {} edges, got {}",
            n - 1,
            chosen.len()
        )));
    }
    let weights = edges.weights();
    let mut adjacency = vec![Vec::new(); n];
    for &e in chosen {
        let (u, v) = *edges
            .edges()
            .get(e)
            .ok_or_else(|| Error::Argument(format!("edge index {e} out of range")))?;
        let w = weights.map_or(0.0, |w| w[e]);
        adjacency[u].push((v, (e, w)));
        adjacency[v].push((u, (e, w)));
    }
    let tree = RootedTree::bfs(root, &adjacency);
    if tree.order.len() != n {
        return Err(Error::Structural(format!(
            "chosen edges contain a cycle: only {} of {n} nodes reachable from the root",
            tree.order.len()
        )));
    }
    Ok(tree)
}

/// Minimum spanning tree of a weighted graph, rooted at node 0.
pub fn minimum_spanning_tree(edges: &EdgeList) -> Result<RootedTree> {
    let chosen = boruvka_mst(edges)?;
    root_tree(edges, &chosen, 0)
}
