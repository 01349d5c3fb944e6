//! Desk-scale online self-training.
//!
//! A per-pixel MLP maps `(r, g, b, x/width, y/height)` through one tanh hidden
//! layer to class logits and to an embedding used for the high-level tree.
//! Each step rebuilds the high-level tree from the current embedding, forms
//! pseudo labels and takes one gradient step on `L_seg + λ·L_tree`, with the
//! gradient flowing through the filter into the embedding edge weights.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::filter::{transmittances, Transmittances};
use crate::graph::weighted_grid;
use crate::losses::{total_loss, AffinityTree, LossConfig, TotalLoss};
use crate::mst::{minimum_spanning_tree, NO_PARENT};
use crate::tensor::{DenseTensor, LabelMap};

/// Descriptor length: three colors and two normalized coordinates.
pub const DESCRIPTOR_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub hidden: usize,
    pub num_classes: usize,
    pub feat_dim: usize,
}

impl ModelDims {
    pub fn new(num_classes: usize) -> Self {
        Self {
            hidden: 16,
            num_classes,
            feat_dim: 8,
        }
    }

    pub fn param_count(&self) -> usize {
        let (h, k, f) = (self.hidden, self.num_classes, self.feat_dim);
        DESCRIPTOR_LEN * h + h + k * h + k + f * h
    }
}

/// Flat parameter vector laid out as `W1 | b1 | W2 | b2 | W3`, weights row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    dims: ModelDims,
    params: Vec<f64>,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
}

impl ToyModel {
    /// Parameters drawn uniformly from `[-0.1, 0.1]`.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..dims.param_count())
            .map(|_| rng.random_range(-0.1..=0.1))
            .collect();
        Self { dims, params }
    }

    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            params: vec![0.0; dims.param_count()],
        }
    }

    pub fn from_params(dims: ModelDims, params: Vec<f64>) -> Result<Self> {
        if params.len() != dims.param_count() {
            return Err(Error::Argument(format!(
                "{} parameters for a model with {}",
                params.len(),
                dims.param_count()
            )));
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        let ModelDims {
            hidden: h,
            num_classes: k,
            ..
        } = self.dims;
        let w1 = 0;
        let b1 = w1 + DESCRIPTOR_LEN * h;
        let w2 = b1 + h;
        let b2 = w2 + k * h;
        let w3 = b2 + k;
        Layout { w1, b1, w2, b2, w3 }
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probs: DenseTensor,
    pub features: DenseTensor,
    descriptors: Vec<[f64; DESCRIPTOR_LEN]>,
    /// `n × hidden`, pixel-major.
    hidden: Vec<f64>,
}

fn descriptors(image: &DenseTensor) -> Result<Vec<[f64; DESCRIPTOR_LEN]>> {
    let (c, h, w) = image.shape();
    if c != 1 && c != 3 {
        return Err(Error::Argument(format!(
            "image must have 1 or 3 channels, got {c}"
        )));
    }
    Ok((0..h * w)
        .map(|i| {
            let color = |k: usize| image.at(if c == 1 { 0 } else { k }, i);
            [
                color(0),
                color(1),
                color(2),
                (i % w) as f64 / w as f64,
                (i / w) as f64 / h as f64,
            ]
        })
        .collect())
}

/// Class probabilities and embedding for every pixel.
pub fn forward(model: &ToyModel, image: &DenseTensor) -> Result<ForwardPass> {
    let d = descriptors(image)?;
    let ModelDims {
        hidden: nh,
        num_classes: nk,
        feat_dim: nf,
    } = model.dims;
    let lay = model.layout();
    let p = &model.params;
    let n = d.len();
    let mut hidden = vec![0.0; n * nh];
    let mut probs = vec![0.0; nk * n];
    let mut feats = vec![0.0; nf * n];
    let mut logits = vec![0.0; nk];
    for (i, di) in d.iter().enumerate() {
        let hi = &mut hidden[i * nh..(i + 1) * nh];
        for j in 0..nh {
            let row = &p[lay.w1 + j * DESCRIPTOR_LEN..lay.w1 + (j + 1) * DESCRIPTOR_LEN];
            let a: f64 = row.iter().zip(di).map(|(w, x)| w * x).sum::<f64>() + p[lay.b1 + j];
            hi[j] = a.tanh();
        }
        for c in 0..nk {
            let row = &p[lay.w2 + c * nh..lay.w2 + (c + 1) * nh];
            logits[c] = row.iter().zip(hi.iter()).map(|(w, x)| w * x).sum::<f64>() + p[lay.b2 + c];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for c in 0..nk {
            probs[c * n + i] = (logits[c] - max).exp() / denom;
        }
        for f in 0..nf {
            let row = &p[lay.w3 + f * nh..lay.w3 + (f + 1) * nh];
            feats[f * n + i] = row.iter().zip(hi.iter()).map(|(w, x)| w * x).sum();
        }
    }
    let (h, w) = (image.height(), image.width());
    Ok(ForwardPass {
        probs: DenseTensor::new(nk, h, w, probs)?,
        features: DenseTensor::new(nf, h, w, feats)?,
        descriptors: d,
        hidden,
    })
}

/// The low-level (color) tree; static for a given image.
pub fn low_level_tree(image: &DenseTensor, sigma: f64) -> Result<AffinityTree> {
    let tree = minimum_spanning_tree(&weighted_grid(image)?)?;
    let t = transmittances(&tree, sigma)?;
    Ok(AffinityTree::new(tree, t))
}

/// The high-level tree over embeddings, with `A = exp(-D)`.
pub fn high_level_tree(features: &DenseTensor) -> Result<AffinityTree> {
    let tree = minimum_spanning_tree(&weighted_grid(features)?)?;
    let t = transmittances(&tree, 1.0)?;
    Ok(AffinityTree::new(tree, t))
}

/// Loss terms, pseudo label and parameter gradient for one image.
#[derive(Debug, Clone)]
pub struct StepEvaluation {
    pub forward: ForwardPass,
    pub loss: TotalLoss,
    pub gradient: Vec<f64>,
}

fn diagnostics(fwd: &ForwardPass, t: &Transmittances) -> String {
    let range = |x: &DenseTensor| {
        x.data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            })
    };
    let t_range = t
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    format!(
        "P range {:?}, F range {:?}, high-level transmittance range {:?}",
        range(&fwd.probs),
        range(&fwd.features),
        t_range
    )
}

/// Exact gradient of `L_seg + λ·L_tree` with respect to every model parameter,
/// holding both tree topologies fixed.
pub fn loss_and_gradient(
    model: &ToyModel,
    image: &DenseTensor,
    low: &AffinityTree,
    labels: &LabelMap,
    config: &LossConfig,
) -> Result<StepEvaluation> {
    let fwd = forward(model, image)?;
    let high = high_level_tree(&fwd.features)?;
    let loss = total_loss(&fwd.probs, labels, low, &high, config)?;
    let finite = loss.total.is_finite()
        && loss.grad_p.data().iter().all(|v| v.is_finite())
        && loss.grad_t_high.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite(format!(
            "loss {} is not finite; {}",
            loss.total,
            diagnostics(&fwd, &high.transmittances)
        )));
    }

    let ModelDims {
        hidden: nh,
        num_classes: nk,
        feat_dim: nf,
    } = model.dims;
    let lay = model.layout();
    let p = &model.params;
    let n = image.num_pixels();
    let probs = fwd.probs.data();
    let gp = loss.grad_p.data();
    let feats = fwd.features.data();

    // Embedding gradient from the high-level edge weights ω = |F_k - F_parent|², t = exp(-ω).
    let mut g_feat = vec![0.0; nf * n];
    let tv = high.transmittances.values();
    for k in 0..n {
        let parent = high.tree.parent()[k];
        if parent == NO_PARENT {
            continue;
        }
        let g_omega = -tv[k] * loss.grad_t_high[k];
        if g_omega == 0.0 {
            continue;
        }
        for f in 0..nf {
            let diff = feats[f * n + k] - feats[f * n + parent];
            g_feat[f * n + k] += 2.0 * diff * g_omega;
            g_feat[f * n + parent] -= 2.0 * diff * g_omega;
        }
    }

    let mut grad = vec![0.0; p.len()];
    let mut g_logit = vec![0.0; nk];
    let mut g_hidden = vec![0.0; nh];
    for i in 0..n {
        let dot: f64 = (0..nk).map(|c| probs[c * n + i] * gp[c * n + i]).sum();
        for c in 0..nk {
            g_logit[c] = probs[c * n + i] * (gp[c * n + i] - dot);
        }
        let hi = &fwd.hidden[i * nh..(i + 1) * nh];
        g_hidden.iter_mut().for_each(|g| *g = 0.0);
        for c in 0..nk {
            let gl = g_logit[c];
            grad[lay.b2 + c] += gl;
            for j in 0..nh {
                grad[lay.w2 + c * nh + j] += gl * hi[j];
                g_hidden[j] += p[lay.w2 + c * nh + j] * gl;
            }
        }
        for f in 0..nf {
            let gf = g_feat[f * n + i];
            if gf == 0.0 {
                continue;
            }
            for j in 0..nh {
                grad[lay.w3 + f * nh + j] += gf * hi[j];
                g_hidden[j] += p[lay.w3 + f * nh + j] * gf;
            }
        }
        let di = &fwd.descriptors[i];
        for j in 0..nh {
            let ga = g_hidden[j] * (1.0 - hi[j] * hi[j]);
            grad[lay.b1 + j] += ga;
            for (m, x) in di.iter().enumerate() {
                grad[lay.w1 + j * DESCRIPTOR_LEN + m] += ga * x;
            }
        }
    }

    Ok(StepEvaluation {
        forward: fwd,
        loss,
        gradient: grad,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain gradient descent.
    pub momentum: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub eval_interval: usize,
    pub hidden: usize,
    pub feat_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.5,
            momentum: 0.0,
            seed: 0,
            loss: LossConfig::default(),
            eval_interval: 10,
            hidden: 16,
            feat_dim: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Argument("steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.eval_interval == 0 || self.hidden == 0 || self.feat_dim == 0 {
            return Err(Error::Argument(
                "eval interval, hidden and feature sizes must be positive".into(),
            ));
        }
        self.loss.validate()
    }
}

/// Pixel accuracy and mean IoU of `argmax(probs)` against a label map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub pixel_accuracy: f64,
    pub mean_iou: f64,
    /// False when the label map had no valid pixels (both scores are then 0).
    pub valid: bool,
}

pub fn evaluate(probs: &DenseTensor, truth: &LabelMap) -> Result<Evaluation> {
    evaluate_prediction(&probs.argmax(), truth)
}

pub fn evaluate_prediction(prediction: &[usize], truth: &LabelMap) -> Result<Evaluation> {
    if prediction.len() != truth.num_pixels() {
        return Err(Error::Argument(format!(
            "{} predictions for {} pixels",
            prediction.len(),
            truth.num_pixels()
        )));
    }
    let k = truth.num_classes();
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    let mut present = vec![false; k];
    let mut correct = 0;
    let mut total = 0;
    for (i, &pred) in prediction.iter().enumerate() {
        let Some(gt) = truth.class_at(i) else {
            continue;
        };
        total += 1;
        present[gt] = true;
        if pred == gt {
            correct += 1;
            tp[gt] += 1;
        } else {
            fn_[gt] += 1;
            if pred < k {
                fp[pred] += 1;
            }
        }
    }
    if total == 0 {
        return Ok(Evaluation {
            pixel_accuracy: 0.0,
            mean_iou: 0.0,
            valid: false,
        });
    }
    let ious: Vec<f64> = (0..k)
        .filter(|&c| present[c])
        .map(|c| tp[c] as f64 / (tp[c] + fp[c] + fn_[c]) as f64)
        .collect();
    Ok(Evaluation {
        pixel_accuracy: correct as f64 / total as f64,
        mean_iou: ious.iter().sum::<f64>() / ious.len() as f64,
        valid: true,
    })
}

/// Accuracy of `argmax(field)` against `truth`, restricted to pixels unlabeled in `sparse`.
pub fn unlabeled_accuracy(field: &DenseTensor, truth: &LabelMap, sparse: &LabelMap) -> f64 {
    let pred = field.argmax();
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, &p) in pred.iter().enumerate() {
        if sparse.is_labeled(i) {
            continue;
        }
        if let Some(gt) = truth.class_at(i) {
            total += 1;
            hit += usize::from(p == gt);
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// One row of training metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub seg_loss: f64,
    pub tree_loss: f64,
    pub pixel_accuracy: f64,
    pub mean_iou: f64,
    /// Accuracy of the pseudo label on unlabeled pixels.
    pub pseudo_label_accuracy: f64,
    /// Accuracy of the prediction on unlabeled pixels.
    pub prediction_unlabeled_accuracy: f64,
}

impl StepMetrics {
    pub const CSV_HEADER: &'static str = "step,L_seg,L_tree,pixel_acc,mIoU,pseudo_label_acc";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.step,
            self.seg_loss,
            self.tree_loss,
            self.pixel_accuracy,
            self.mean_iou,
            self.pseudo_label_accuracy
        )
    }
}

/// Training state for one image.
pub struct Trainer {
    pub model: ToyModel,
    pub config: TrainConfig,
    image: DenseTensor,
    sparse: LabelMap,
    low: AffinityTree,
    velocity: Vec<f64>,
    step: usize,
}

impl Trainer {
    pub fn new(image: DenseTensor, sparse: LabelMap, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if (image.height(), image.width()) != (sparse.height(), sparse.width()) {
            return Err(Error::Argument("image and labels differ in size".into()));
        }
        let dims = ModelDims {
            hidden: config.hidden,
            num_classes: sparse.num_classes(),
            feat_dim: config.feat_dim,
        };
        let model = ToyModel::init(dims, config.seed);
        let low = low_level_tree(&image, config.loss.sigma_low)?;
        let velocity = vec![0.0; model.params().len()];
        Ok(Self {
            model,
            config,
            image,
            sparse,
            low,
            velocity,
            step: 0,
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One gradient step; returns the evaluation taken before the update.
    pub fn train_step(&mut self) -> Result<StepEvaluation> {
        let eval = loss_and_gradient(
            &self.model,
            &self.image,
            &self.low,
            &self.sparse,
            &self.config.loss,
        )?;
        let lr = self.config.learning_rate;
        let mu = self.config.momentum;
        for ((p, v), g) in self
            .model
            .params_mut()
            .iter_mut()
            .zip(self.velocity.iter_mut())
            .zip(&eval.gradient)
        {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
        self.step += 1;
        Ok(eval)
    }

    /// Metrics for the state that produced `eval`.
    pub fn metrics(&self, eval: &StepEvaluation, truth: &LabelMap) -> Result<StepMetrics> {
        let e = evaluate(&eval.forward.probs, truth)?;
        Ok(StepMetrics {
            step: self.step,
            seg_loss: eval.loss.seg.value,
            tree_loss: eval.loss.tree.value,
            pixel_accuracy: e.pixel_accuracy,
            mean_iou: e.mean_iou,
            pseudo_label_accuracy: unlabeled_accuracy(&eval.loss.pseudo_label, truth, &self.sparse),
            prediction_unlabeled_accuracy: unlabeled_accuracy(
                &eval.forward.probs,
                truth,
                &self.sparse,
            ),
        })
    }

    /// Current prediction.
    pub fn predict(&self) -> Result<DenseTensor> {
        forward(&self.model, &self.image).map(|f| f.probs)
    }
}

/// Runs `config.steps` steps, recording metrics every `eval_interval` steps
/// (and at the first and final step), then the metrics of the final model.
pub fn run_training(
    image: DenseTensor,
    sparse: LabelMap,
    truth: &LabelMap,
    config: TrainConfig,
) -> Result<(Trainer, Vec<StepMetrics>, Evaluation)> {
    let mut trainer = Trainer::new(image, sparse, config)?;
    let mut history = Vec::new();
    for s in 0..trainer.config.steps {
        let eval = trainer.train_step()?;
        if s == 0 || s % trainer.config.eval_interval == 0 || s + 1 == trainer.config.steps {
            let mut m = trainer.metrics(&eval, truth)?;
            m.step = s;
            history.push(m);
        }
    }
    let final_eval = evaluate(&trainer.predict()?, truth)?;
    Ok((trainer, history, final_eval))
}

/// Image, dense ground truth and sparse labels for a synthetic scene.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub image: DenseTensor,
    pub truth: LabelMap,
    pub sparse: LabelMap,
}

fn paint(
    height: usize,
    width: usize,
    noise_sigma: f64,
    seed: u64,
    class_of: impl Fn(usize, usize) -> u8,
    colors: &[[f64; 3]],
) -> Result<(DenseTensor, LabelMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let n = height * width;
    let mut data = vec![0.0; 3 * n];
    let mut labels = vec![0u8; n];
    for i in 0..n {
        let class = class_of(i / width, i % width);
        labels[i] = class;
        for c in 0..3 {
            let v: f64 = colors[class as usize][c] + noise.sample(&mut rng);
            data[c * n + i] = v.clamp(0.0, 1.0);
        }
    }
    Ok((
        DenseTensor::new(3, height, width, data)?,
        LabelMap::new(height, width, colors.len(), labels)?,
    ))
}

/// 32×32, left half `(0.9, 0.1, 0.1)` class 0, right half `(0.1, 0.1, 0.9)` class 1,
/// Gaussian color noise σ = 0.02, one labeled pixel at the center of each half.
pub fn two_region_fixture(seed: u64) -> Result<Fixture> {
    let (h, w) = (32, 32);
    let (image, truth) = paint(
        h,
        w,
        0.02,
        seed,
        |_, c| u8::from(c >= w / 2),
        &[[0.9, 0.1, 0.1], [0.1, 0.1, 0.9]],
    )?;
    let mut sparse = vec![crate::IGNORE_INDEX; h * w];
    sparse[(h / 2) * w + w / 4] = 0;
    sparse[(h / 2) * w + 3 * w / 4] = 1;
    let sparse = LabelMap::new(h, w, 2, sparse)?;
    Ok(Fixture {
        image,
        truth,
        sparse,
    })
}

/// 32×32 checkerboard of 8×8 cells in two colors, one labeled pixel per cell.
pub fn checkerboard_fixture(seed: u64) -> Result<Fixture> {
    let (h, w) = (32, 32);
    let (image, truth) = paint(
        h,
        w,
        0.02,
        seed,
        |r, c| (((r / 8) + (c / 8)) % 2) as u8,
        &[[0.8, 0.7, 0.2], [0.2, 0.3, 0.8]],
    )?;
    let sparse = crate::annotations::sample_point_annotation(&truth, 1, seed)?;
    Ok(Fixture {
        image,
        truth,
        sparse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        assert_eq!(ModelDims::new(3).param_count(), 275);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = ToyModel::init(ModelDims::new(3), 7);
        assert_eq!(a, ToyModel::init(ModelDims::new(3), 7));
        assert_ne!(a, ToyModel::init(ModelDims::new(3), 8));
        assert!(a.params().iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn zero_model_is_uniform() {
        let f = two_region_fixture(0).unwrap();
        let out = forward(&ToyModel::zeros(ModelDims::new(2)), &f.image).unwrap();
        assert!(out.probs.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let f = two_region_fixture(1).unwrap();
        let out = forward(&ToyModel::init(ModelDims::new(2), 3), &f.image).unwrap();
        for i in 0..out.probs.num_pixels() {
            let s = out.probs.at(0, i) + out.probs.at(1, i);
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn evaluation_arithmetic() {
        let truth = LabelMap::new(1, 4, 2, vec![0, 0, 1, 1]).unwrap();
        let e = evaluate_prediction(&[0, 0, 0, 0], &truth).unwrap();
        assert_eq!(e.pixel_accuracy, 0.5);
        assert_eq!(e.mean_iou, 0.25);
        let e = evaluate_prediction(&[0, 0, 1, 1], &truth).unwrap();
        assert_eq!((e.pixel_accuracy, e.mean_iou), (1.0, 1.0));
        let e = evaluate_prediction(&[0; 4], &LabelMap::unlabeled(1, 4, 2).unwrap()).unwrap();
        assert!(!e.valid);
    }

    #[test]
    fn no_labels_and_zero_lambda_leave_model_unchanged() {
        let f = two_region_fixture(0).unwrap();
        let config = TrainConfig {
            loss: LossConfig {
                lambda: 0.0,
                ..LossConfig::default()
            },
            ..TrainConfig::default()
        };
        let mut trainer =
            Trainer::new(f.image, LabelMap::unlabeled(32, 32, 2).unwrap(), config).unwrap();
        let before = trainer.model.clone();
        let eval = trainer.train_step().unwrap();
        assert!(eval.gradient.iter().all(|&g| g == 0.0));
        assert_eq!(trainer.model, before);
    }

    #[test]
    fn fixture_layout() {
        let f = two_region_fixture(0).unwrap();
        assert_eq!(f.sparse.labeled_count(), 2);
        assert_eq!(f.truth.get(0, 15), 0);
        assert_eq!(f.truth.get(0, 16), 1);
        assert!((f.image.get(0, 3, 3) - 0.9).abs() < 0.15);
        let c = checkerboard_fixture(0).unwrap();
        assert_eq!(c.sparse.labeled_count(), 16);
    }
}
