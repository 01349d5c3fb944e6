//! 4-connected pixel grid graphs and their dissimilarity weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Undirected edge list over linear node indices, with optional per-edge weights.
///
/// Grid graphs list all horizontal edges row-major, then all vertical edges
/// row-major, each as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    num_nodes: usize,
    grid: Option<(usize, usize)>,
    edges: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl EdgeList {
    /// The 4-connected grid over `height × width` pixels.
    pub fn grid(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Argument(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        let mut edges = Vec::with_capacity(2 * height * width - height - width);
        for r in 0..height {
            for c in 0..width - 1 {
                let u = r * width + c;
                edges.push((u, u + 1));
            }
        }
        for r in 0..height - 1 {
            for c in 0..width {
                let u = r * width + c;
                edges.push((u, u + width));
            }
        }
        Ok(Self {
            num_nodes: height * width,
            grid: Some((height, width)),
            edges,
            weights: None,
        })
    }

    /// An arbitrary undirected graph, mainly for tests and oracles.
    pub fn from_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Argument("graph needs at least one node".into()));
        }
        if let Some(&(u, v)) = edges
            .iter()
            .find(|&&(u, v)| u >= num_nodes || v >= num_nodes || u == v)
        {
            return Err(Error::Argument(format!(
                "edge ({u}, {v}) is a self-loop or out of range for {num_nodes} nodes"
            )));
        }
        Ok(Self {
            num_nodes,
            grid: None,
            edges,
            weights: None,
        })
    }

    /// Attaches weights; they must be finite, non-negative and one per edge.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Argument(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Argument(format!(
                "edge weights must be finite and non-negative, found {w}"
            )));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// `(height, width)` for grid graphs.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub(crate) fn require_weights(&self) -> Result<&[f64]> {
        self.weights
            .as_deref()
            .ok_or_else(|| Error::Argument("edge list has no weights".into()))
    }
}

/// Squared Euclidean distance over channels between the endpoints of each edge.
pub fn edge_weights(features: &DenseTensor, edges: &EdgeList) -> Result<Vec<f64>> {
    match edges.grid {
        Some((h, w)) if (h, w) == (features.height(), features.width()) => {}
        Some((h, w)) => {
            return Err(Error::Argument(format!(
                "features are {}x{} but the grid is {h}x{w}",
                features.height(),
                features.width()
            )))
        }
        None if edges.num_nodes == features.num_pixels() => {}
        None => {
            return Err(Error::Argument(format!(
                "features have {} pixels but the graph has {} nodes",
                features.num_pixels(),
                edges.num_nodes
            )))
        }
    }
    let n = features.num_pixels();
    let data = features.data();
    let channels = features.channels();
    Ok(edges
        .edges
        .par_iter()
        .map(|&(u, v)| {
            (0..channels)
                .map(|c| {
                    let d = data[c * n + u] - data[c * n + v];
                    d * d
                })
                .sum()
        })
        .collect())
}

/// Grid graph over `features` with its dissimilarity weights attached.
pub fn weighted_grid(features: &DenseTensor) -> Result<EdgeList> {
    let edges = EdgeList::grid(features.height(), features.width())?;
    let weights = edge_weights(features, &edges)?;
    edges.with_weights(weights)
}
