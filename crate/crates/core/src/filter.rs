//! Normalized tree filtering.
//!
//! On a spanning tree the affinity between two pixels is the product of edge
//! transmittances `t = exp(-ω/σ)` along their tree path, so
//!
//! ```text
//! out_i = Σ_j A_ij P_j / z_i,   z_i = Σ_j A_ij
//! ```
//!
//! is evaluated with one leaf-to-root pass (subtree sums) and one root-to-leaf
//! pass (whole-tree sums), O(n) per channel. The dense `n×n` evaluation in
//! [`dense_distance`] / [`dense_filter`] exists only as an oracle.
//!
//! The backward pass reuses the same recurrences. For the edge between node
//! `k` and its parent `p`, every pair `(i, j)` whose path crosses the edge has
//! one endpoint inside the subtree of `k` and one outside, so
//! `∂L/∂t_k` factorizes into products of subtree aggregates and
//! "outside" aggregates `full(p) - t_k·up(k)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mst::RootedTree;
use crate::tensor::DenseTensor;

/// Largest node count the dense oracle accepts.
pub const DENSE_MAX_NODES: usize = 4096;

/// Per-node transmittance of the edge to the parent. The root's entry is unused
/// and fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmittances {
    values: Vec<f64>,
}

impl Transmittances {
    /// Wraps explicit values, one per node. Non-root values must lie in `(0, 1]`
    /// unless `allow_any` is set (finite-difference probes step slightly outside).
    pub fn from_values(tree: &RootedTree, mut values: Vec<f64>, allow_any: bool) -> Result<Self> {
        if values.len() != tree.num_nodes() {
            return Err(Error::Argument(format!(
                "{} transmittances for {} nodes",
                values.len(),
                tree.num_nodes()
            )));
        }
        values[tree.root()] = 1.0;
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || (!allow_any && (**v <= 0.0 || **v > 1.0)))
        {
            return Err(Error::Argument(format!("transmittance {v} outside (0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn fingerprint(&self, tree: &RootedTree) -> u64 {
        let mut h = DefaultHasher::new();
        tree.root().hash(&mut h);
        tree.parent().hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// `t_i = exp(-ω_i / σ)` for each node's parent edge. Underflow is clamped to
/// the smallest positive normal so every value stays in `(0, 1]`.
pub fn transmittances(tree: &RootedTree, sigma: f64) -> Result<Transmittances> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Argument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let values = tree
        .parent_weight()
        .iter()
        .map(|&w| (-w / sigma).exp().max(f64::MIN_POSITIVE))
        .collect();
    Transmittances::from_values(tree, values, false)
}

/// Copies node-indexed `src` into traversal order.
fn gather(order: &[usize], src: &[f64], dst: &mut [f64]) {
    for (d, &i) in dst.iter_mut().zip(order) {
        *d = src[i];
    }
}

/// Inverse of [`gather`].
fn scatter(order: &[usize], src: &[f64], dst: &mut [f64]) {
    for (&s, &i) in src.iter().zip(order) {
        dst[i] = s;
    }
}

/// Leaf-to-root subtree sums in place in `up`, then whole-tree sums into `full`.
/// Everything is in traversal order, so the passes walk memory almost
/// sequentially instead of hopping across the image.
fn aggregate(parent: &[usize], t: &[f64], up: &mut [f64], full: &mut [f64]) {
    for k in (1..up.len()).rev() {
        up[parent[k]] += t[k] * up[k];
    }
    full[0] = up[0];
    for k in 1..up.len() {
        full[k] = up[k] + t[k] * (full[parent[k]] - t[k] * up[k]);
    }
}

/// Cached aggregates from [`tree_filter_forward`], consumed by [`tree_filter_backward`].
/// Per-node arrays are stored in the tree's traversal order. A workspace can be
/// reused across calls through [`tree_filter_forward_into`] to avoid reallocating.
#[derive(Debug, Clone, Default)]
pub struct FilterWorkspace {
    channels: usize,
    key: u64,
    up: Vec<f64>,
    full: Vec<f64>,
    z_up: Vec<f64>,
    z: Vec<f64>,
    order: Vec<usize>,
}

impl FilterWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Normalization `z_i = Σ_j A_ij` per node; always at least 1.
    pub fn normalization(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.z.len()];
        scatter(&self.order, &self.z, &mut z);
        z
    }
}

fn check_grid(p: &DenseTensor, tree: &RootedTree) -> Result<()> {
    if p.num_pixels() != tree.num_nodes() {
        return Err(Error::Argument(format!(
            "tensor has {} pixels but the tree has {} nodes",
            p.num_pixels(),
            tree.num_nodes()
        )));
    }
    Ok(())
}

/// Transmittances in traversal order.
fn ordered_transmittances(tree: &RootedTree, t: &Transmittances) -> Result<Vec<f64>> {
    if t.values.len() != tree.num_nodes() {
        return Err(Error::Argument(format!(
            "{} transmittances for {} nodes",
            t.values.len(),
            tree.num_nodes()
        )));
    }
    let mut tv = vec![0.0; t.values.len()];
    gather(tree.order(), &t.values, &mut tv);
    Ok(tv)
}

fn refill<T: Copy>(buffer: &mut Vec<T>, len: usize, value: T) {
    buffer.clear();
    buffer.resize(len, value);
}

/// Filters every channel of `p` over the tree.
pub fn tree_filter_forward(
    p: &DenseTensor,
    tree: &RootedTree,
    t: &Transmittances,
) -> Result<(DenseTensor, FilterWorkspace)> {
    let mut workspace = FilterWorkspace::new();
    let out = tree_filter_forward_into(p, tree, t, &mut workspace)?;
    Ok((out, workspace))
}

/// [`tree_filter_forward`] writing its cache into an existing workspace,
/// whose previous contents are discarded.
pub fn tree_filter_forward_into(
    p: &DenseTensor,
    tree: &RootedTree,
    t: &Transmittances,
    workspace: &mut FilterWorkspace,
) -> Result<DenseTensor> {
    check_grid(p, tree)?;
    let tv = ordered_transmittances(tree, t)?;
    let n = tree.num_nodes();
    let order = tree.order();
    let parent = tree.order_parent();

    let ws = workspace;
    ws.channels = p.channels();
    ws.key = t.fingerprint(tree);
    ws.order.clear();
    ws.order.extend_from_slice(order);
    refill(&mut ws.z_up, n, 1.0);
    refill(&mut ws.z, n, 0.0);
    aggregate(parent, &tv, &mut ws.z_up, &mut ws.z);

    let len = p.data().len();
    refill(&mut ws.up, len, 0.0);
    refill(&mut ws.full, len, 0.0);
    let mut result = vec![0.0; len];
    let z = &ws.z;
    ws.up
        .par_chunks_mut(n)
        .zip(ws.full.par_chunks_mut(n))
        .zip(result.par_chunks_mut(n))
        .zip(p.data().par_chunks(n))
        .for_each(|(((up, full), result), input)| {
            gather(order, input, up);
            aggregate(parent, &tv, up, full);
            for ((&i, s), zi) in order.iter().zip(full.iter()).zip(z) {
                result[i] = s / zi;
            }
        });
    p.with_data(result)
}

/// Convenience wrapper returning only the filtered tensor.
pub fn tree_filter(p: &DenseTensor, tree: &RootedTree, t: &Transmittances) -> Result<DenseTensor> {
    tree_filter_forward(p, tree, t).map(|(out, _)| out)
}

/// Gradients of `Σ grad_out ⊙ out` with respect to the filter input and to each
/// node's parent-edge transmittance (zero at the root).
pub fn tree_filter_backward(
    grad_out: &DenseTensor,
    workspace: &FilterWorkspace,
    tree: &RootedTree,
    t: &Transmittances,
    p: &DenseTensor,
) -> Result<(DenseTensor, Vec<f64>)> {
    check_grid(grad_out, tree)?;
    let tv = ordered_transmittances(tree, t)?;
    if !grad_out.same_shape(p) || p.channels() != workspace.channels {
        return Err(Error::Contract(
            "gradient, input and workspace shapes disagree".into(),
        ));
    }
    if workspace.key != t.fingerprint(tree) || workspace.z.len() != tree.num_nodes() {
        return Err(Error::Contract(
            "workspace was produced by a different tree or transmittances".into(),
        ));
    }
    let n = tree.num_nodes();
    let order = tree.order();
    let parent = tree.order_parent();
    let z = &workspace.z;
    let z_up = &workspace.z_up;

    // Per channel: u = g / z gives grad_P = A u, plus that channel's share of
    // ∂L/∂t and of w = ∂L/∂z. Channels run in batches of one per worker and
    // their shares are added in channel order, so the sums do not depend on
    // the thread count.
    let channel_share = |c: usize, gp: &mut [f64], g: &[f64]| {
        let p_up = &workspace.up[c * n..(c + 1) * n];
        let p_full = &workspace.full[c * n..(c + 1) * n];
        let mut u_up = vec![0.0; n];
        gather(order, g, &mut u_up);
        let mut w = vec![0.0; n];
        for k in 0..n {
            w[k] = -u_up[k] * p_full[k] / (z[k] * z[k]);
            u_up[k] /= z[k];
        }
        let mut u_full = vec![0.0; n];
        aggregate(parent, &tv, &mut u_up, &mut u_full);
        let mut grad_t = vec![0.0; n];
        for k in 1..n {
            let pk = parent[k];
            grad_t[k] =
                u_up[k] * (p_full[pk] - tv[k] * p_up[k]) + (u_full[pk] - tv[k] * u_up[k]) * p_up[k];
        }
        scatter(order, &u_full, gp);
        (grad_t, w)
    };

    let mut grad_p = vec![0.0; p.data().len()];
    let mut grad_t = vec![0.0; n];
    let mut w_up = vec![0.0; n];
    let batch = rayon::current_num_threads().max(1);
    for (b, (gp, g)) in grad_p
        .chunks_mut(batch * n)
        .zip(grad_out.data().chunks(batch * n))
        .enumerate()
    {
        let shares: Vec<(Vec<f64>, Vec<f64>)> = gp
            .par_chunks_mut(n)
            .zip(g.par_chunks(n))
            .enumerate()
            .map(|(j, (gp, g))| channel_share(b * batch + j, gp, g))
            .collect();
        for (gt, w) in shares {
            for k in 0..n {
                grad_t[k] += gt[k];
                w_up[k] += w[k];
            }
        }
    }
    let mut w_full = vec![0.0; n];
    aggregate(parent, &tv, &mut w_up, &mut w_full);
    for k in 1..n {
        let pk = parent[k];
        grad_t[k] += w_up[k] * (z[pk] - tv[k] * z_up[k]) + (w_full[pk] - tv[k] * w_up[k]) * z_up[k];
    }
    let mut grad_t_nodes = vec![0.0; n];
    scatter(order, &grad_t, &mut grad_t_nodes);
    Ok((p.with_data(grad_p)?, grad_t_nodes))
}

/// All-pairs tree-path distances, row-major `n×n`. Oracle only.
pub fn dense_distance(tree: &RootedTree) -> Result<Vec<f64>> {
    let n = tree.num_nodes();
    if n > DENSE_MAX_NODES {
        return Err(Error::Capacity(format!(
            "dense distance limited to {DENSE_MAX_NODES} nodes, got {n}"
        )));
    }
    let mut adjacency = vec![Vec::new(); n];
    for (c, p) in tree.tree_edges() {
        let w = tree.parent_weight()[c];
        adjacency[c].push((p, w));
        adjacency[p].push((c, w));
    }
    let mut dist = vec![0.0; n * n];
    let mut stack = Vec::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        stack.push((s, usize::MAX));
        while let Some((u, from)) = stack.pop() {
            for &(v, w) in &adjacency[u] {
                if v != from {
                    row[v] = row[u] + w;
                    stack.push((v, u));
                }
            }
        }
    }
    Ok(dist)
}

/// `out_i = Σ_j exp(-D_ij/σ) P_j / Σ_j exp(-D_ij/σ)` evaluated densely. Oracle only.
pub fn dense_filter(p: &DenseTensor, distance: &[f64], sigma: f64) -> Result<DenseTensor> {
    let n = p.num_pixels();
    if n > DENSE_MAX_NODES {
        return Err(Error::Capacity(format!(
            "dense filter limited to {DENSE_MAX_NODES} nodes, got {n}"
        )));
    }
    if distance.len() != n * n {
        return Err(Error::Argument(format!(
            "distance matrix has {} entries, expected {}",
            distance.len(),
            n * n
        )));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Argument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let affinity: Vec<f64> = distance.iter().map(|d| (-d / sigma).exp()).collect();
    let mut out = vec![0.0; p.data().len()];
    for i in 0..n {
        let row = &affinity[i * n..(i + 1) * n];
        let z: f64 = row.iter().sum();
        for c in 0..p.channels() {
            let s: f64 = row.iter().zip(p.channel(c)).map(|(a, v)| a * v).sum();
            out[c * n + i] = s / z;
        }
    }
    p.with_data(out)
}
