use kspace_core::data::synth_dataset;
use kspace_core::evalmetrics::{accuracy, auc_ovr, binary_auc, confusion, specificity};
use kspace_core::model::{init_params, read_checkpoint, write_checkpoint, Architecture};
use kspace_core::numerics::Tensor;
use kspace_core::spectral::{fft2, ifft2};
use kspace_core::umap::{fuzzy_graph, knn, smooth_knn_params, trustworthiness};
use kspace_core::{InputMode, SplitTag, NUM_CLASSES};
use proptest::prelude::*;

fn image(max_log: u32) -> impl Strategy<Value = Tensor> {
    (0..=max_log, 0..=max_log).prop_flat_map(|(lh, lw)| {
        let (h, w) = (1usize << lh, 1usize << lw);
        prop::collection::vec(-1.0f64..1.0, h * w)
            .prop_map(move |d| Tensor::new(&[h, w], d).unwrap())
    })
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (4usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..8).prop_map(f64::from), n * NUM_CLASSES),
            prop::collection::vec(0usize..NUM_CLASSES, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(img in image(5)) {
        let back = ifft2(&fft2(&img).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&img).unwrap() < 1e-10);
    }

    #[test]
    fn binary_auc_matches_pair_count(
        data in prop::collection::vec(((0u8..6).prop_map(f64::from), any::<bool>()), 2..50)
    ) {
        let (scores, positive): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let got = binary_auc(&scores, &positive);
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (sp, _) in scores.iter().zip(&positive).filter(|(_, p)| **p) {
            for (sn, _) in scores.iter().zip(&positive).filter(|(_, p)| !**p) {
                pairs += 1.0;
                wins += if sp > sn { 1.0 } else if sp == sn { 0.5 } else { 0.0 };
            }
        }
        if pairs == 0.0 {
            prop_assert!(got.is_none());
        } else {
            prop_assert!((got.unwrap() - wins / pairs).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_auc_ignores_monotone_rescaling(
        data in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..50)
    ) {
        let (scores, positive): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let squashed: Vec<f64> = scores.iter().map(|s| 3.0 * s.tanh() + 1.0).collect();
        match (binary_auc(&scores, &positive), binary_auc(&squashed, &positive)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
        }
    }

    #[test]
    fn metrics_are_permutation_invariant((scores, labels) in scored_labels(), rot in 0usize..40) {
        let n = labels.len();
        let st = Tensor::new(&[n, NUM_CLASSES], scores.clone()).unwrap();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        if order.iter().collect::<std::collections::BTreeSet<_>>().len() != n {
            return Ok(());
        }
        let permuted = Tensor::from_fn(&[n, NUM_CLASSES], |f| {
            scores[order[f / NUM_CLASSES] * NUM_CLASSES + f % NUM_CLASSES]
        });
        let plabels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let preds = kspace_core::evalmetrics::argmax_rows(&st);
        let ppreds = kspace_core::evalmetrics::argmax_rows(&permuted);
        let cm = confusion(&preds, &labels).unwrap();
        let pcm = confusion(&ppreds, &plabels).unwrap();
        prop_assert_eq!(cm, pcm);
        prop_assert_eq!(cm.total(), n as u64);
        let acc = accuracy(&cm).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let spec = specificity(&cm).unwrap();
        prop_assert!((0.0..=1.0).contains(&spec));
        match (auc_ovr(&st, &labels), auc_ovr(&permuted, &plabels)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn knn_rows_are_sorted_and_exclude_self(
        pts in prop::collection::vec(-10.0f64..10.0, 3 * 20), k in 1usize..10
    ) {
        let t = Tensor::new(&[20, 3], pts).unwrap();
        let nb = knn(&t, k).unwrap();
        for (i, (idx, d)) in nb.indices.iter().zip(&nb.distances).enumerate() {
            prop_assert_eq!(idx.len(), k);
            prop_assert!(!idx.contains(&i));
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn fuzzy_graph_is_symmetric_and_bounded(
        pts in prop::collection::vec(-10.0f64..10.0, 4 * 25), k in 2usize..8
    ) {
        let t = Tensor::new(&[25, 4], pts).unwrap();
        let nb = knn(&t, k).unwrap();
        let calib: Vec<_> = nb.distances.iter().map(|d| smooth_knn_params(d, k, 1)).collect();
        let g = fuzzy_graph(&nb, &calib).unwrap();
        for &(i, j, w) in &g.edges {
            prop_assert!(i < j);
            prop_assert!(w > 0.0 && w <= 1.0);
            prop_assert_eq!(g.weight(i, j), g.weight(j, i));
        }
    }

    #[test]
    fn trustworthiness_is_a_fraction(
        high in prop::collection::vec(-1.0f64..1.0, 5 * 16),
        low in prop::collection::vec(-1.0f64..1.0, 2 * 16),
        k in 1usize..8,
    ) {
        let h = Tensor::new(&[16, 5], high).unwrap();
        let l = Tensor::new(&[16, 2], low).unwrap();
        let t = trustworthiness(&h, &l, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&t), "{}", t);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), experimental in any::<bool>()) {
        let mode = if experimental { InputMode::Experimental } else { InputMode::Control };
        let arch = Architecture { widths: [2, 3, 4], hidden: 5 };
        let p = init_params(mode, arch, 16, seed).unwrap();
        let q = read_checkpoint(&write_checkpoint(&p)).unwrap();
        prop_assert_eq!(p, q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_is_a_stratified_partition(per_class in 2usize..12, frac in 0.05f64..0.6, seed in any::<u64>()) {
        let ds = synth_dataset(4 * per_class, 16, 0.0, 1).unwrap();
        let split = ds.split(frac, seed).unwrap();
        let train = split.indices(SplitTag::Train);
        let val = split.indices(SplitTag::Validation);
        prop_assert_eq!(train.len() + val.len(), ds.len());
        let counts = split.class_counts(Some(SplitTag::Validation));
        let expected = (per_class as f64 * frac).floor() as usize;
        prop_assert!(counts.iter().all(|&c| c == expected));
        let again = ds.split(frac, seed).unwrap();
        prop_assert_eq!(split.split_tags(), again.split_tags());
    }
}
