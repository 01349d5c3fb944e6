//! Dense `C×H×W` tensors and sparse label maps.
//!
//! Tensors hold `f64` values in row-major `(channel, row, column)` order. All
//! numerics in this crate run in double precision; the on-disk tensor format
//! stores `f32` (see [`crate::io`]).

use crate::error::{Error, Result};

/// Label value marking a pixel as unlabeled.
pub const IGNORE_INDEX: u8 = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps `data` after checking the shape and that every value is finite.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Argument(format!(
                "tensor dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Argument(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "tensor element {pos} is {}",
                data[pos]
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        )
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::filled(channels, height, width, 0.0)
    }

    /// Builds a tensor with the same shape as `self` from new data.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.channels, self.height, self.width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels per channel.
    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.num_pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    /// Value of channel `c` at linear pixel index `i`.
    pub fn at(&self, c: usize, i: usize) -> f64 {
        self.data[c * self.num_pixels() + i]
    }

    /// Per-channel `(min, max)`.
    pub fn channel_range(&self, c: usize) -> (f64, f64) {
        self.channel(c)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Class index with the largest value at each pixel; ties go to the lower index.
    pub fn argmax(&self) -> Vec<usize> {
        let n = self.num_pixels();
        (0..n)
            .map(|i| {
                let mut best = 0;
                for c in 1..self.channels {
                    if self.at(c, i) > self.at(best, i) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn same_shape(&self, other: &DenseTensor) -> bool {
        self.shape() == other.shape()
    }
}

/// Per-pixel class indices with [`IGNORE_INDEX`] marking unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_classes: usize, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Argument(format!(
                "label map dimensions must be positive, got {height}x{width}"
            )));
        }
        if num_classes == 0 || num_classes > 255 {
            return Err(Error::Argument(format!(
                "num_classes must be in 1..=255, got {num_classes}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::Argument(format!(
                "label count {} does not match {height}x{width}",
                labels.len()
            )));
        }
        for (i, &v) in labels.iter().enumerate() {
            if v != IGNORE_INDEX && v as usize >= num_classes {
                return Err(Error::Label {
                    row: i / width,
                    col: i % width,
                    value: v,
                    num_classes,
                });
            }
        }
        Ok(Self {
            height,
            width,
            num_classes,
            labels,
        })
    }

    /// A map with every pixel unlabeled.
    pub fn unlabeled(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        Self::new(
            height,
            width,
            num_classes,
            vec![IGNORE_INDEX; height * width],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Class at linear index `i`, or `None` when the pixel is unlabeled.
    pub fn class_at(&self, i: usize) -> Option<usize> {
        match self.labels[i] {
            IGNORE_INDEX => None,
            v => Some(v as usize),
        }
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labels[i] != IGNORE_INDEX
    }

    /// Size of the labeled set.
    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != IGNORE_INDEX).count()
    }

    /// Size of the unlabeled set.
    pub fn unlabeled_count(&self) -> usize {
        self.num_pixels() - self.labeled_count()
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.labeled_count() as f64 / self.num_pixels() as f64
    }
}
