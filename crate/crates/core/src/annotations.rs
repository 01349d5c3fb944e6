//! Sparse annotation synthesis from dense label maps.
//!
//! Block annotations peel labels away from class boundaries toward region
//! interiors. Point and scribble annotations sample inside each 4-connected
//! class component.

use std::collections::VecDeque;

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{LabelMap, IGNORE_INDEX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityKind {
    Block { ratio: f64 },
    Point { points_per_region: usize },
    Scribble { walk_length: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConfig {
    pub kind: SparsityKind,
    pub seed: u64,
}

impl SparsityConfig {
    pub fn apply(&self, full: &LabelMap) -> Result<LabelMap> {
        match self.kind {
            SparsityKind::Block { ratio } => synth_block_annotation(full, ratio, self.seed),
            SparsityKind::Point { points_per_region } => {
                sample_point_annotation(full, points_per_region, self.seed)
            }
            SparsityKind::Scribble { walk_length } => {
                sample_scribble_annotation(full, walk_length, self.seed)
            }
        }
    }
}

fn neighbors(i: usize, height: usize, width: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (i / width, i % width);
    [
        (r > 0).then(|| i - width),
        (c > 0).then(|| i - 1),
        (c + 1 < width).then(|| i + 1),
        (r + 1 < height).then(|| i + width),
    ]
    .into_iter()
    .flatten()
}

/// L1 distance from each pixel to the nearest pixel carrying a different value,
/// with everything outside the image counting as different. Border pixels and
/// pixels next to another class get 1.
pub fn boundary_distance(map: &LabelMap) -> Vec<u32> {
    let (h, w) = (map.height(), map.width());
    let labels = map.labels();
    let mut dist = vec![u32::MAX; labels.len()];
    let mut queue = VecDeque::new();
    for i in 0..labels.len() {
        let (r, c) = (i / w, i % w);
        let on_border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
        if on_border || neighbors(i, h, w).any(|j| labels[j] != labels[i]) {
            dist[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbors(i, h, w) {
            if dist[j] == u32::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Removes labels from class boundaries inward until `ratio` of the labeled
/// pixels remain. Pixels go in ascending boundary distance, ties by ascending
/// index, so the result is nested across ratios and independent of `seed`.
pub fn synth_block_annotation(full: &LabelMap, ratio: f64, _seed: u64) -> Result<LabelMap> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Argument(format!(
            "ratio must be in (0, 1], got {ratio}"
        )));
    }
    let dist = boundary_distance(full);
    let mut labeled: Vec<usize> = (0..full.num_pixels())
        .filter(|&i| full.is_labeled(i))
        .collect();
    let keep = (ratio * labeled.len() as f64).round() as usize;
    labeled.sort_by_key(|&i| (dist[i], i));
    let mut labels = full.labels().to_vec();
    for &i in &labeled[..labeled.len() - keep] {
        labels[i] = IGNORE_INDEX;
    }
    LabelMap::new(full.height(), full.width(), full.num_classes(), labels)
}

/// 4-connected components of equal labels, ignoring unlabeled pixels.
/// Components are ordered by their first pixel in scan order.
pub fn connected_components(map: &LabelMap) -> Vec<Vec<usize>> {
    let (h, w) = (map.height(), map.width());
    let labels = map.labels();
    let mut seen = vec![false; labels.len()];
    let mut components = Vec::new();
    for start in 0..labels.len() {
        if seen[start] || labels[start] == IGNORE_INDEX {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut head = 0;
        while head < members.len() {
            let i = members[head];
            head += 1;
            for j in neighbors(i, h, w) {
                if !seen[j] && labels[j] == labels[start] {
                    seen[j] = true;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Keeps `min(points_per_region, |component|)` uniformly sampled pixels per component.
pub fn sample_point_annotation(
    full: &LabelMap,
    points_per_region: usize,
    seed: u64,
) -> Result<LabelMap> {
    if points_per_region == 0 {
        return Err(Error::Argument("points_per_region must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![IGNORE_INDEX; full.num_pixels()];
    for comp in connected_components(full) {
        let k = points_per_region.min(comp.len());
        for pick in index::sample(&mut rng, comp.len(), k) {
            let i = comp[pick];
            labels[i] = full.labels()[i];
        }
    }
    LabelMap::new(full.height(), full.width(), full.num_classes(), labels)
}

/// One self-avoiding random walk of at most `walk_length` pixels per component,
/// starting from a uniformly chosen interior pixel (all four neighbors in the
/// component) when one exists.
pub fn sample_scribble_annotation(
    full: &LabelMap,
    walk_length: usize,
    seed: u64,
) -> Result<LabelMap> {
    if walk_length == 0 {
        return Err(Error::Argument("walk_length must be positive".into()));
    }
    let (h, w) = (full.height(), full.width());
    let src = full.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![IGNORE_INDEX; full.num_pixels()];
    for comp in connected_components(full) {
        let class = src[comp[0]];
        let inside = |j: usize| src[j] == class;
        let interior: Vec<usize> = comp
            .iter()
            .copied()
            .filter(|&i| neighbors(i, h, w).count() == 4 && neighbors(i, h, w).all(inside))
            .collect();
        let pool = if interior.is_empty() {
            &comp
        } else {
            &interior
        };
        let mut current = pool[rng.random_range(0..pool.len())];
        labels[current] = class;
        for _ in 1..walk_length {
            let options: Vec<usize> = neighbors(current, h, w)
                .filter(|&j| inside(j) && labels[j] == IGNORE_INDEX)
                .collect();
            if options.is_empty() {
                break;
            }
            current = options[rng.random_range(0..options.len())];
            labels[current] = class;
        }
    }
    LabelMap::new(h, w, full.num_classes(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> LabelMap {
        let labels = (0..16).map(|i| u8::from(i % 4 >= 2)).collect();
        LabelMap::new(4, 4, 2, labels).unwrap()
    }

    #[test]
    fn full_ratio_is_identity() {
        let m = halves();
        assert_eq!(synth_block_annotation(&m, 1.0, 0).unwrap(), m);
        assert!(synth_block_annotation(&m, 0.0, 0).is_err());
        assert!(synth_block_annotation(&m, 1.5, 0).is_err());
    }

    #[test]
    fn boundary_distance_of_halves() {
        // Every pixel touches either the image border or the class boundary.
        assert!(boundary_distance(&halves()).iter().all(|&d| d == 1));
        let single = LabelMap::new(5, 5, 1, vec![0; 25]).unwrap();
        let d = boundary_distance(&single);
        assert_eq!(d[12], 3);
        assert_eq!(d[6], 2);
        assert_eq!(d[0], 1);
    }

    #[test]
    fn existing_ignore_pixels_stay_out_of_budget() {
        let mut labels = vec![0u8; 16];
        labels[0] = IGNORE_INDEX;
        labels[5] = IGNORE_INDEX;
        let m = LabelMap::new(4, 4, 1, labels).unwrap();
        let out = synth_block_annotation(&m, 0.5, 0).unwrap();
        assert_eq!(out.labeled_count(), 7);
        assert_eq!(out.labels()[0], IGNORE_INDEX);
    }

    #[test]
    fn points_one_per_component() {
        let out = sample_point_annotation(&halves(), 1, 3).unwrap();
        assert_eq!(out.labeled_count(), 2);
        let classes: Vec<u8> = out.labels().iter().copied().filter(|&v| v != 255).collect();
        assert_eq!(classes.len(), 2);
        assert_ne!(classes[0], classes[1]);
    }

    #[test]
    fn points_saturate_to_full_map() {
        let single = LabelMap::new(3, 3, 1, vec![0; 9]).unwrap();
        assert_eq!(sample_point_annotation(&single, 9, 0).unwrap(), single);
    }

    #[test]
    fn scribble_of_length_one_is_a_point() {
        let out = sample_scribble_annotation(&halves(), 1, 11).unwrap();
        assert_eq!(out.labeled_count(), 2);
    }

    #[test]
    fn components_split_by_class_and_gap() {
        let m = LabelMap::new(1, 5, 2, vec![0, 0, 255, 0, 1]).unwrap();
        assert_eq!(connected_components(&m), vec![vec![0, 1], vec![3], vec![4]]);
    }
}
