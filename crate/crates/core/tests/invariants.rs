//! Property tests for the spec-level invariants that hold over whole input
//! families rather than single fixtures.

use flsim_core::attacks;
use flsim_core::data::{partition, static_label_flip, synth_dataset, PartitionConfig};
use flsim_core::defenses;
use flsim_core::linalg::Matrix;
use flsim_core::nn::{flatten, unflatten, Architecture, ModelParameters, UpdateVector};
use flsim_core::rng::{stream_rng, Stream};
use proptest::prelude::*;

fn small_matrix() -> impl Strategy<Value = Matrix> {
    (2usize..7, 1usize..5).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(-5.0f64..5.0, rows * cols)
            .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_unflatten_roundtrip(seed in 0u64..1000, hidden in 1usize..6, input in 1usize..5) {
        let arch = Architecture::fcn(input, &[hidden], 3, 0.01);
        let mut rng = stream_rng(seed, Stream::ModelInit, 0, 0);
        let model = ModelParameters::init(&arch, &mut rng).unwrap();
        let flat = flatten(&model);
        let back = unflatten(&flat, &arch).unwrap();
        prop_assert_eq!(&model, &back);
        let reflat = flatten(&back);
        prop_assert_eq!(reflat.as_slice(), flat.as_slice());
    }

    #[test]
    fn slf_is_involution(seed in 0u64..500, classes in 2usize..8) {
        let ds = synth_dataset(classes, 3, 4, 0.1, seed).unwrap();
        let twice = static_label_flip(&static_label_flip(&ds));
        prop_assert_eq!(twice.labels, ds.labels);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint(seed in 0u64..300, q in 0.05f64..1.0, clients in 4usize..10) {
        let ds = synth_dataset(4, 3, 12, 0.1, seed).unwrap();
        let parts = partition(&ds, &PartitionConfig { n_clients: clients, q, seed }).unwrap();
        let total: usize = parts.iter().map(|p| p.len()).sum();
        prop_assert_eq!(total, ds.len());
    }

    #[test]
    fn aggregators_are_row_permutation_invariant(m in small_matrix(), perm_seed in 0u64..100) {
        use rand::seq::SliceRandom;
        let n = m.rows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(perm_seed, Stream::Defense, 0, 0);
        order.shuffle(&mut rng);
        let permuted = m.select_rows(&order);

        if n > 2 {
            let a = defenses::trimmed_mean(&m, 1).unwrap();
            let b = defenses::trimmed_mean(&permuted, 1).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        if n >= 4 {
            // M = 0 keeps both rules feasible at small n
            let a = defenses::multi_krum(&m, 0).unwrap().aggregate;
            let b = defenses::multi_krum(&permuted, 0).unwrap().aggregate;
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn crafted_updates_have_benign_shape(m in small_matrix(), z in -2.0f64..2.0) {
        let lie = attacks::lie_attack(&m, z).unwrap();
        prop_assert_eq!(lie.len(), m.cols());
        prop_assert!(lie.is_finite());

        let p = attacks::perturbation_sgn(&m).unwrap();
        let mm = attacks::min_max_attack(&m, &p, &Default::default()).unwrap();
        prop_assert_eq!(mm.update.len(), m.cols());
        prop_assert!(mm.update.is_finite());

        let ms = attacks::min_sum_attack(&m, &p, &Default::default()).unwrap();
        prop_assert_eq!(ms.update.len(), m.cols());
        prop_assert!(ms.update.is_finite());

        let sf = attacks::sign_flip(m.row(0));
        prop_assert_eq!(sf.len(), m.cols());
    }

    #[test]
    fn convex_hull_membership_per_dimension(m in small_matrix()) {
        // trimmed mean stays inside the per-dimension value range
        if m.rows() > 2 {
            let out = defenses::trimmed_mean(&m, 1).unwrap();
            for j in 0..m.cols() {
                let lo = (0..m.rows()).map(|i| m[(i, j)]).fold(f64::INFINITY, f64::min);
                let hi = (0..m.rows()).map(|i| m[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out[j] >= lo - 1e-12 && out[j] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn update_vector_finite_check(vals in proptest::collection::vec(-1e300f64..1e300, 1..64)) {
        let v = UpdateVector::from_vec(vals.clone());
        prop_assert_eq!(v.is_finite(), vals.iter().all(|x| x.is_finite()));
    }
}
