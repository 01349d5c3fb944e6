use proptest::prelude::*;
use tel_core::annotations::{
    boundary_distance, connected_components, sample_point_annotation, sample_scribble_annotation,
    synth_block_annotation, SparsityConfig, SparsityKind,
};
use tel_core::{LabelMap, IGNORE_INDEX};

/// Brute force: distance to the nearest differently-labeled pixel or to the
/// outside of the image, whichever is closer.
fn brute_force_distance(map: &LabelMap) -> Vec<u32> {
    let (h, w) = (map.height() as i64, map.width() as i64);
    let labels = map.labels();
    (0..labels.len())
        .map(|i| {
            let (r, c) = (i as i64 / w, i as i64 % w);
            let mut best = (r + 1).min(c + 1).min(h - r).min(w - c);
            for (j, &l) in labels.iter().enumerate() {
                if l != labels[i] {
                    let (rj, cj) = (j as i64 / w, j as i64 % w);
                    best = best.min((r - rj).abs() + (c - cj).abs());
                }
            }
            best as u32
        })
        .collect()
}

fn blobs(h: usize, w: usize) -> LabelMap {
    let labels = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            if (r as f64 - 6.0).hypot(c as f64 - 7.0) < 5.0 {
                1
            } else if c > w * 3 / 4 {
                2
            } else {
                0
            }
        })
        .collect();
    LabelMap::new(h, w, 3, labels).unwrap()
}

#[test]
fn distance_transform_matches_brute_force() {
    for map in [blobs(16, 20), blobs(9, 31)] {
        assert_eq!(boundary_distance(&map), brute_force_distance(&map));
    }
}

#[test]
fn halves_at_half_ratio_keep_the_deepest_pixels() {
    let labels = (0..16).map(|i| u8::from(i % 4 >= 2)).collect();
    let map = LabelMap::new(4, 4, 2, labels).unwrap();
    let out = synth_block_annotation(&map, 0.5, 0).unwrap();
    assert_eq!(out.labeled_count(), 8);
    let dist = brute_force_distance(&map);
    let kept: Vec<usize> = (0..16).filter(|&i| out.is_labeled(i)).collect();
    let removed: Vec<usize> = (0..16).filter(|&i| !out.is_labeled(i)).collect();
    let min_kept = kept.iter().map(|&i| dist[i]).min().unwrap();
    let max_removed = removed.iter().map(|&i| dist[i]).max().unwrap();
    assert!(min_kept >= max_removed);
    // All distances tie at 1, so the lowest indices go first.
    assert_eq!(kept, (8..16).collect::<Vec<_>>());
}

#[test]
fn tenth_of_a_single_region_keeps_the_interior_band() {
    let map = LabelMap::new(100, 100, 1, vec![0; 10_000]).unwrap();
    let out = synth_block_annotation(&map, 0.1, 0).unwrap();
    let kept = out.labeled_count();
    assert!((900..=1100).contains(&kept), "kept {kept}");
    let dist = brute_force_distance(&map);
    let min_kept = (0..10_000)
        .filter(|&i| out.is_labeled(i))
        .map(|i| dist[i])
        .min()
        .unwrap();
    let max_removed = (0..10_000)
        .filter(|&i| !out.is_labeled(i))
        .map(|i| dist[i])
        .max()
        .unwrap();
    assert!(min_kept >= max_removed);
    // Center pixel survives.
    assert!(out.is_labeled(50 * 100 + 50));
}

#[test]
fn point_and_scribble_are_deterministic() {
    let map = blobs(16, 20);
    for kind in [
        SparsityKind::Point {
            points_per_region: 3,
        },
        SparsityKind::Scribble { walk_length: 12 },
        SparsityKind::Block { ratio: 0.2 },
    ] {
        let cfg = SparsityConfig { kind, seed: 42 };
        assert_eq!(cfg.apply(&map).unwrap(), cfg.apply(&map).unwrap());
    }
}

#[test]
fn points_respect_component_sizes() {
    let map = blobs(16, 20);
    let comps = connected_components(&map);
    let out = sample_point_annotation(&map, 5, 1).unwrap();
    for comp in &comps {
        let labeled = comp.iter().filter(|&&i| out.is_labeled(i)).count();
        assert_eq!(labeled, 5.min(comp.len()));
    }
    let whole = sample_point_annotation(&map, 16 * 20, 1).unwrap();
    assert_eq!(whole, map);
}

#[test]
fn scribbles_are_connected_walks_inside_components() {
    let map = blobs(16, 20);
    let out = sample_scribble_annotation(&map, 15, 5).unwrap();
    for comp in connected_components(&map) {
        let labeled: Vec<usize> = comp
            .iter()
            .copied()
            .filter(|&i| out.is_labeled(i))
            .collect();
        assert!(!labeled.is_empty() && labeled.len() <= 15);
        // The walk's pixels form one 4-connected piece.
        let sub = LabelMap::new(
            16,
            20,
            3,
            (0..320)
                .map(|i| {
                    if labeled.contains(&i) {
                        0
                    } else {
                        IGNORE_INDEX
                    }
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(connected_components(&sub).len(), 1);
    }
}

fn arb_map() -> impl Strategy<Value = LabelMap> {
    (2usize..14, 2usize..14, 1usize..4).prop_flat_map(|(h, w, k)| {
        proptest::collection::vec(0u8..(k as u8 + 1), h * w).prop_map(move |raw| {
            let labels = raw
                .into_iter()
                .map(|v| if v as usize == k { IGNORE_INDEX } else { v })
                .collect();
            LabelMap::new(h, w, k, labels).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesized_labels_are_subsets(map in arb_map(), seed in 0u64..1000, ratio in 0.05f64..1.0) {
        for kind in [
            SparsityKind::Block { ratio },
            SparsityKind::Point { points_per_region: 2 },
            SparsityKind::Scribble { walk_length: 6 },
        ] {
            let out = SparsityConfig { kind, seed }.apply(&map).unwrap();
            for i in 0..map.num_pixels() {
                if out.is_labeled(i) {
                    prop_assert_eq!(out.labels()[i], map.labels()[i]);
                }
            }
        }
    }

    #[test]
    fn block_synthesis_is_nested_and_on_target(map in arb_map(), r1 in 0.05f64..1.0, r2 in 0.05f64..1.0) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let a = synth_block_annotation(&map, lo, 0).unwrap();
        let b = synth_block_annotation(&map, hi, 0).unwrap();
        for i in 0..map.num_pixels() {
            prop_assert!(!a.is_labeled(i) || b.is_labeled(i));
        }
        let total = map.labeled_count();
        if total > 0 {
            let achieved = b.labeled_count() as f64 / total as f64;
            prop_assert!((achieved - hi).abs() <= 0.5 / total as f64 + 1e-12);
        }
    }
}
