use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tel_core::filter::{
    dense_distance, dense_filter, transmittances, tree_filter, tree_filter_backward,
    tree_filter_forward, tree_filter_forward_into, FilterWorkspace,
};
use tel_core::graph::{weighted_grid, EdgeList};
use tel_core::mst::{minimum_spanning_tree, root_tree, RootedTree};
use tel_core::verify::{max_relative_error, random_probabilities, random_tensor};
use tel_core::DenseTensor;

fn random_tree(rng: &mut ChaCha8Rng, h: usize, w: usize) -> RootedTree {
    let image = random_tensor(rng, 3, h, w);
    minimum_spanning_tree(&weighted_grid(&image).unwrap()).unwrap()
}

#[test]
fn path_distance_is_edge_sum() {
    let g = EdgeList::from_edges(3, vec![(0, 1), (1, 2)])
        .unwrap()
        .with_weights(vec![1.0, 2.0])
        .unwrap();
    let tree = root_tree(&g, &[0, 1], 0).unwrap();
    let d = dense_distance(&tree).unwrap();
    assert_eq!(d[2], 3.0);
    assert_eq!(d[6], 3.0);
    assert!((0..3).all(|i| d[i * 3 + i] == 0.0));
}

#[test]
fn tree_distances_satisfy_four_point_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tree = random_tree(&mut rng, 3, 4);
    let n = tree.num_nodes();
    let d = dense_distance(&tree).unwrap();
    let at = |i: usize, j: usize| d[i * n + j];
    for i in 0..n {
        for j in 0..n {
            assert!((at(i, j) - at(j, i)).abs() < 1e-12);
            for k in 0..n {
                for l in 0..n {
                    let mut sums = [
                        at(i, j) + at(k, l),
                        at(i, k) + at(j, l),
                        at(i, l) + at(j, k),
                    ];
                    sums.sort_by(f64::total_cmp);
                    assert!(
                        (sums[2] - sums[1]).abs() < 1e-12,
                        "quadruple {i} {j} {k} {l}"
                    );
                }
            }
        }
    }
}

#[test]
fn sixty_four_square_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let tree = random_tree(&mut rng, 64, 64);
    let p = random_tensor(&mut rng, 2, 64, 64);
    let sigma = 0.1;
    let fast = tree_filter(&p, &tree, &transmittances(&tree, sigma).unwrap()).unwrap();
    let dense = dense_filter(&p, &dense_distance(&tree).unwrap(), sigma).unwrap();
    assert!(max_relative_error(fast.data(), dense.data(), 1e-300) < 1e-5);
}

#[test]
fn backward_identity_filter_passes_gradient_through() {
    let image = DenseTensor::new(1, 1, 4, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
    let tree = minimum_spanning_tree(&weighted_grid(&image).unwrap()).unwrap();
    let t = transmittances(&tree, 1e-3).unwrap();
    let p = DenseTensor::new(1, 1, 4, vec![0.3, 0.1, 0.7, 0.2]).unwrap();
    let g = DenseTensor::new(1, 1, 4, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
    let (_, ws) = tree_filter_forward(&p, &tree, &t).unwrap();
    assert!(ws.normalization().iter().all(|&z| z >= 1.0));
    let (gp, _) = tree_filter_backward(&g, &ws, &tree, &t, &p).unwrap();
    assert_eq!(gp.data(), g.data());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let tree = random_tree(&mut rng, 17, 23);
    let t = transmittances(&tree, 0.3).unwrap();
    let p = random_tensor(&mut rng, 7, 17, 23);
    let g = random_tensor(&mut rng, 7, 17, 23);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let (out, ws) = tree_filter_forward(&p, &tree, &t).unwrap();
                let (gp, gt) = tree_filter_backward(&g, &ws, &tree, &t, &p).unwrap();
                (out, gp, gt)
            })
    };
    let single = run(1);
    for threads in [2, 3, 8] {
        assert_eq!(run(threads), single);
    }
}

#[test]
fn reused_workspace_matches_fresh_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ws = FilterWorkspace::new();
    for (h, w) in [(9, 9), (4, 6), (12, 3)] {
        let tree = random_tree(&mut rng, h, w);
        let t = transmittances(&tree, 0.2).unwrap();
        let p = random_tensor(&mut rng, 3, h, w);
        let reused = tree_filter_forward_into(&p, &tree, &t, &mut ws).unwrap();
        let (fresh, fresh_ws) = tree_filter_forward(&p, &tree, &t).unwrap();
        assert_eq!(reused, fresh);
        let a = tree_filter_backward(&p, &ws, &tree, &t, &p).unwrap();
        let b = tree_filter_backward(&p, &fresh_ws, &tree, &t, &p).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn filter_is_a_convex_combination(seed in 0u64..10_000, h in 1usize..12, w in 1usize..12, sigma in 0.005f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, h, w);
        let p = random_tensor(&mut rng, 3, h, w);
        let out = tree_filter(&p, &tree, &transmittances(&tree, sigma).unwrap()).unwrap();
        for c in 0..3 {
            let (lo, hi) = p.channel_range(c);
            prop_assert!(out.channel(c).iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn filter_preserves_probability_simplex(seed in 0u64..10_000, h in 1usize..12, w in 1usize..12, sigma in 0.005f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, h, w);
        let p = random_probabilities(&mut rng, 4, h, w);
        let out = tree_filter(&p, &tree, &transmittances(&tree, sigma).unwrap()).unwrap();
        for i in 0..h * w {
            let s: f64 = (0..4).map(|c| out.at(c, i)).sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
            prop_assert!((0..4).all(|c| out.at(c, i) >= 0.0));
        }
    }

    #[test]
    fn constant_inputs_are_fixed_points(seed in 0u64..10_000, h in 1usize..10, w in 1usize..10, v in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, h, w);
        let sigma = rng.random_range(0.01..1.0);
        let p = DenseTensor::filled(2, h, w, v).unwrap();
        let out = tree_filter(&p, &tree, &transmittances(&tree, sigma).unwrap()).unwrap();
        prop_assert!(out.data().iter().all(|&x| (x - v).abs() <= 1e-12 * (1.0 + v.abs())));
    }

    #[test]
    fn root_choice_does_not_change_output(seed in 0u64..10_000, h in 1usize..10, w in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, h, w);
        let sigma = rng.random_range(0.01..1.0);
        let p = random_tensor(&mut rng, 2, h, w);
        let base = tree_filter(&p, &tree, &transmittances(&tree, sigma).unwrap()).unwrap();
        let other = tree.reroot(rng.random_range(0..h * w)).unwrap();
        let out = tree_filter(&p, &other, &transmittances(&other, sigma).unwrap()).unwrap();
        prop_assert!(max_relative_error(base.data(), out.data(), 1e-300) < 1e-6);
    }
}
