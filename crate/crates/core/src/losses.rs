//! Segmentation loss, cascaded pseudo labels and the tree energy loss.
//!
//! The objective is `L = L_seg + λ·L_tree` where `L_seg` is cross-entropy on
//! labeled pixels and `L_tree` measures the distance between the prediction
//! and soft pseudo labels on unlabeled pixels. Pseudo labels come from
//! filtering the prediction over a low-level (image color) tree and a
//! high-level (learned feature) tree.

use crate::error::{Error, Result};
use crate::filter::{tree_filter_backward, tree_filter_forward, FilterWorkspace, Transmittances};
use crate::mst::RootedTree;
use crate::tensor::{DenseTensor, LabelMap};

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Distance between prediction and pseudo label, per pixel over the class vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// `Σ_c |P - Ỹ|`
    L1,
    /// `Σ_c (P - Ỹ)²`
    L2,
    /// `-Σ_c Ỹ log P`
    CrossEntropy,
    /// `-Σ_c P Ỹ`
    DotProduct,
}

/// Order in which the two affinities are applied to the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Low-level filter, then high-level filter.
    LowHighCascade,
    /// High-level filter, then low-level filter.
    HighLowCascade,
    /// Each filter applied to the prediction separately; the two loss terms are averaged.
    LowHighParallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub sigma_low: f64,
    pub delta: Assignment,
    pub aggregation: Aggregation,
    /// Treat pseudo labels as constants.
    pub detach_pseudo_label: bool,
    /// Replace soft assignment by hard cross-entropy on unlabeled pixels whose
    /// pseudo-label confidence exceeds this threshold.
    pub naive_threshold: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.4,
            sigma_low: 0.02,
            delta: Assignment::L1,
            aggregation: Aggregation::LowHighCascade,
            detach_pseudo_label: false,
            naive_threshold: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Argument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.sigma_low.is_nan() || self.sigma_low <= 0.0 {
            return Err(Error::Argument(format!(
                "sigma must be positive, got {}",
                self.sigma_low
            )));
        }
        if let Some(th) = self.naive_threshold {
            if !(th > 0.5 && th <= 1.0) {
                return Err(Error::Argument(format!(
                    "naive threshold must be in (0.5, 1], got {th}"
                )));
            }
        }
        Ok(())
    }
}

/// A loss value, flagged when its pixel set was empty (the value is then 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub empty: bool,
}

impl LossTerm {
    fn empty() -> Self {
        Self {
            value: 0.0,
            empty: true,
        }
    }
}

fn check_labels(p: &DenseTensor, labels: &LabelMap) -> Result<()> {
    if (p.height(), p.width()) != (labels.height(), labels.width()) {
        return Err(Error::Argument(format!(
            "prediction is {}x{} but labels are {}x{}",
            p.height(),
            p.width(),
            labels.height(),
            labels.width()
        )));
    }
    if p.channels() != labels.num_classes() {
        return Err(Error::Argument(format!(
            "prediction has {} channels for {} classes",
            p.channels(),
            labels.num_classes()
        )));
    }
    Ok(())
}

/// `-(1/|Ω_L|) Σ_{i∈Ω_L} log P_i[Y_i]`.
pub fn partial_cross_entropy(p: &DenseTensor, labels: &LabelMap) -> Result<LossTerm> {
    partial_cross_entropy_grad(p, labels).map(|(term, _)| term)
}

/// Partial cross-entropy and its gradient with respect to `p`.
pub fn partial_cross_entropy_grad(
    p: &DenseTensor,
    labels: &LabelMap,
) -> Result<(LossTerm, DenseTensor)> {
    check_labels(p, labels)?;
    hard_cross_entropy(p, |i| labels.class_at(i))
}

fn hard_cross_entropy(
    p: &DenseTensor,
    target: impl Fn(usize) -> Option<usize>,
) -> Result<(LossTerm, DenseTensor)> {
    let n = p.num_pixels();
    let supervised: Vec<(usize, usize)> =
        (0..n).filter_map(|i| target(i).map(|c| (i, c))).collect();
    let mut grad = vec![0.0; p.data().len()];
    if supervised.is_empty() {
        return Ok((LossTerm::empty(), p.with_data(grad)?));
    }
    let scale = 1.0 / supervised.len() as f64;
    let mut total = 0.0;
    for &(i, c) in &supervised {
        let prob = p.at(c, i);
        total -= prob.max(PROB_FLOOR).ln();
        if prob > PROB_FLOOR {
            grad[c * n + i] = -scale / prob;
        }
    }
    Ok((
        LossTerm {
            value: total * scale,
            empty: false,
        },
        p.with_data(grad)?,
    ))
}

/// A spanning tree with the transmittances of its edges.
#[derive(Debug, Clone)]
pub struct AffinityTree {
    pub tree: RootedTree,
    pub transmittances: Transmittances,
}

impl AffinityTree {
    pub fn new(tree: RootedTree, transmittances: Transmittances) -> Self {
        Self {
            tree,
            transmittances,
        }
    }

    fn forward(&self, p: &DenseTensor) -> Result<(DenseTensor, FilterWorkspace)> {
        tree_filter_forward(p, &self.tree, &self.transmittances)
    }

    fn backward(
        &self,
        grad: &DenseTensor,
        ws: &FilterWorkspace,
        input: &DenseTensor,
    ) -> Result<(DenseTensor, Vec<f64>)> {
        tree_filter_backward(grad, ws, &self.tree, &self.transmittances, input)
    }
}

/// Output of [`cascaded_pseudo_label`].
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoLabel {
    Cascade(DenseTensor),
    /// Low-level and high-level filtered predictions.
    Parallel(DenseTensor, DenseTensor),
}

impl PseudoLabel {
    /// A single field for reporting; the parallel variant averages its two parts.
    pub fn merged(&self) -> DenseTensor {
        match self {
            PseudoLabel::Cascade(y) => y.clone(),
            PseudoLabel::Parallel(a, b) => {
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect();
                a.with_data(data).expect("same shape")
            }
        }
    }
}

/// Filters the prediction with both affinities according to `aggregation`.
pub fn cascaded_pseudo_label(
    p: &DenseTensor,
    low: &AffinityTree,
    high: &AffinityTree,
    aggregation: Aggregation,
) -> Result<PseudoLabel> {
    Ok(match aggregation {
        Aggregation::LowHighCascade => PseudoLabel::Cascade(high.forward(&low.forward(p)?.0)?.0),
        Aggregation::HighLowCascade => PseudoLabel::Cascade(low.forward(&high.forward(p)?.0)?.0),
        Aggregation::LowHighParallel => {
            PseudoLabel::Parallel(low.forward(p)?.0, high.forward(p)?.0)
        }
    })
}

/// `(1/|Ω_U|) Σ_{i∈Ω_U} δ(P_i, Ỹ_i)`.
pub fn tree_energy_loss(
    p: &DenseTensor,
    pseudo: &DenseTensor,
    labels: &LabelMap,
    delta: Assignment,
) -> Result<LossTerm> {
    tree_energy_loss_grad(p, pseudo, labels, delta).map(|(term, _, _)| term)
}

/// Tree energy loss with gradients with respect to the prediction and the pseudo label.
pub fn tree_energy_loss_grad(
    p: &DenseTensor,
    pseudo: &DenseTensor,
    labels: &LabelMap,
    delta: Assignment,
) -> Result<(LossTerm, DenseTensor, DenseTensor)> {
    check_labels(p, labels)?;
    if !p.same_shape(pseudo) {
        return Err(Error::Argument(
            "prediction and pseudo label shapes differ".into(),
        ));
    }
    let n = p.num_pixels();
    let mut grad_p = vec![0.0; p.data().len()];
    let mut grad_y = vec![0.0; p.data().len()];
    let unlabeled = labels.unlabeled_count();
    if unlabeled == 0 {
        return Ok((
            LossTerm::empty(),
            p.with_data(grad_p)?,
            p.with_data(grad_y)?,
        ));
    }
    let scale = 1.0 / unlabeled as f64;
    let mut total = 0.0;
    for i in (0..n).filter(|&i| !labels.is_labeled(i)) {
        for c in 0..p.channels() {
            let k = c * n + i;
            let (pv, yv) = (p.data()[k], pseudo.data()[k]);
            let (value, dp, dy) = match delta {
                Assignment::L1 => {
                    let s = if pv > yv {
                        1.0
                    } else if pv < yv {
                        -1.0
                    } else {
                        0.0
                    };
                    ((pv - yv).abs(), s, -s)
                }
                Assignment::L2 => {
                    let d = pv - yv;
                    (d * d, 2.0 * d, -2.0 * d)
                }
                Assignment::CrossEntropy => {
                    let log_p = pv.max(PROB_FLOOR).ln();
                    let dp = if pv > PROB_FLOOR { -yv / pv } else { 0.0 };
                    (-yv * log_p, dp, -log_p)
                }
                Assignment::DotProduct => (-pv * yv, -yv, -pv),
            };
            total += value;
            grad_p[k] = dp * scale;
            grad_y[k] = dy * scale;
        }
    }
    Ok((
        LossTerm {
            value: total * scale,
            empty: false,
        },
        p.with_data(grad_p)?,
        p.with_data(grad_y)?,
    ))
}

/// Value and gradients of the combined objective.
#[derive(Debug, Clone)]
pub struct TotalLoss {
    pub total: f64,
    pub seg: LossTerm,
    pub tree: LossTerm,
    pub pseudo_label: DenseTensor,
    pub grad_p: DenseTensor,
    /// Gradient with respect to the high-level tree's transmittances, per node.
    pub grad_t_high: Vec<f64>,
}

fn add_into(acc: &mut [f64], other: &[f64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += scale * b;
    }
}

/// `L_seg + λ·L_tree` with gradients with respect to `p` and the high-level transmittances.
pub fn total_loss(
    p: &DenseTensor,
    labels: &LabelMap,
    low: &AffinityTree,
    high: &AffinityTree,
    config: &LossConfig,
) -> Result<TotalLoss> {
    config.validate()?;
    check_labels(p, labels)?;
    let n = p.num_pixels();
    let (seg, seg_grad) = partial_cross_entropy_grad(p, labels)?;
    let mut grad_p = seg_grad.into_data();
    let mut grad_t_high = vec![0.0; n];
    let lambda = config.lambda;

    if let Some(threshold) = config.naive_threshold {
        let pseudo = cascaded_pseudo_label(p, low, high, config.aggregation)?.merged();
        let hard = |i: usize| -> Option<usize> {
            if labels.is_labeled(i) {
                return None;
            }
            let (best, conf) = (0..pseudo.channels()).map(|c| (c, pseudo.at(c, i))).fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
            (conf > threshold).then_some(best)
        };
        let (tree, tree_grad) = hard_cross_entropy(p, hard)?;
        add_into(&mut grad_p, tree_grad.data(), lambda);
        return Ok(TotalLoss {
            total: seg.value + lambda * tree.value,
            seg,
            tree,
            pseudo_label: pseudo,
            grad_p: p.with_data(grad_p)?,
            grad_t_high,
        });
    }

    let detach = config.detach_pseudo_label;
    let delta = config.delta;
    let (tree, pseudo_label) = match config.aggregation {
        Aggregation::LowHighCascade | Aggregation::HighLowCascade => {
            let (first, second) = if config.aggregation == Aggregation::LowHighCascade {
                (low, high)
            } else {
                (high, low)
            };
            let (mid, ws_first) = first.forward(p)?;
            let (pseudo, ws_second) = second.forward(&mid)?;
            let (term, gp, gy) = tree_energy_loss_grad(p, &pseudo, labels, delta)?;
            add_into(&mut grad_p, gp.data(), lambda);
            if !detach && !term.empty {
                let gy = gy.with_data(gy.data().iter().map(|g| g * lambda).collect())?;
                let (g_mid, gt_second) = second.backward(&gy, &ws_second, &mid)?;
                let (g_in, gt_first) = first.backward(&g_mid, &ws_first, p)?;
                add_into(&mut grad_p, g_in.data(), 1.0);
                let gt_high = if config.aggregation == Aggregation::LowHighCascade {
                    gt_second
                } else {
                    gt_first
                };
                add_into(&mut grad_t_high, &gt_high, 1.0);
            }
            (term, pseudo)
        }
        Aggregation::LowHighParallel => {
            let mut value = 0.0;
            let mut empty = false;
            let mut parts = Vec::with_capacity(2);
            for (branch, is_high) in [(low, false), (high, true)] {
                let (pseudo, ws) = branch.forward(p)?;
                let (term, gp, gy) = tree_energy_loss_grad(p, &pseudo, labels, delta)?;
                value += 0.5 * term.value;
                empty = term.empty;
                add_into(&mut grad_p, gp.data(), 0.5 * lambda);
                if !detach && !term.empty {
                    let gy = gy.with_data(gy.data().iter().map(|g| g * 0.5 * lambda).collect())?;
                    let (g_in, gt) = branch.backward(&gy, &ws, p)?;
                    add_into(&mut grad_p, g_in.data(), 1.0);
                    if is_high {
                        add_into(&mut grad_t_high, &gt, 1.0);
                    }
                }
                parts.push(pseudo);
            }
            let merged = PseudoLabel::Parallel(parts.remove(0), parts.remove(0)).merged();
            (LossTerm { value, empty }, merged)
        }
    };

    Ok(TotalLoss {
        total: seg.value + lambda * tree.value,
        seg,
        tree,
        pseudo_label,
        grad_p: p.with_data(grad_p)?,
        grad_t_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(channels: usize, h: usize, w: usize, data: Vec<f64>) -> DenseTensor {
        DenseTensor::new(channels, h, w, data).unwrap()
    }

    #[test]
    fn partial_ce_values() {
        let p = probs(2, 1, 2, vec![0.5, 0.25, 0.5, 0.75]);
        let one = LabelMap::new(1, 2, 2, vec![0, 255]).unwrap();
        assert!((partial_cross_entropy(&p, &one).unwrap().value - 2f64.ln()).abs() < 1e-12);
        let two = LabelMap::new(1, 2, 2, vec![0, 0]).unwrap();
        let v = partial_cross_entropy(&p, &two).unwrap().value;
        assert!((v - (2f64.ln() + 4f64.ln()) / 2.0).abs() < 1e-12);
        assert!((v - 1.0397).abs() < 1e-4);

        let certain = probs(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let lab = LabelMap::new(1, 2, 2, vec![0, 1]).unwrap();
        assert_eq!(partial_cross_entropy(&certain, &lab).unwrap().value, 0.0);
    }

    #[test]
    fn empty_sets_are_flagged() {
        let p = probs(2, 1, 2, vec![0.5, 0.5, 0.5, 0.5]);
        let none = LabelMap::unlabeled(1, 2, 2).unwrap();
        let term = partial_cross_entropy(&p, &none).unwrap();
        assert!(term.empty && term.value == 0.0);
        let all = LabelMap::new(1, 2, 2, vec![0, 1]).unwrap();
        let term = tree_energy_loss(&p, &p, &all, Assignment::L1).unwrap();
        assert!(term.empty && term.value == 0.0);
    }

    #[test]
    fn assignment_variants_on_one_pixel() {
        let p = probs(2, 1, 1, vec![0.6, 0.4]);
        let y = probs(2, 1, 1, vec![1.0, 0.0]);
        let lab = LabelMap::unlabeled(1, 1, 2).unwrap();
        let l = |d| tree_energy_loss(&p, &y, &lab, d).unwrap().value;
        assert!((l(Assignment::L1) - 0.8).abs() < 1e-12);
        assert!((l(Assignment::L2) - 0.32).abs() < 1e-12);
        assert!((l(Assignment::DotProduct) + 0.6).abs() < 1e-12);
        assert!((l(Assignment::CrossEntropy) + 0.6f64.ln()).abs() < 1e-12);
        assert_eq!(
            tree_energy_loss(&p, &p, &lab, Assignment::L1)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn labeled_pixels_do_not_enter_tree_loss() {
        let p = probs(2, 1, 2, vec![0.6, 0.1, 0.4, 0.9]);
        let y = probs(2, 1, 2, vec![1.0, 0.9, 0.0, 0.1]);
        let lab = LabelMap::new(1, 2, 2, vec![255, 1]).unwrap();
        let v = tree_energy_loss(&p, &y, &lab, Assignment::L1)
            .unwrap()
            .value;
        assert!((v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = LossConfig {
            naive_threshold: Some(0.4),
            ..LossConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LossConfig {
            sigma_low: 0.0,
            ..LossConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
