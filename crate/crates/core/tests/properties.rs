mod common;

use common::*;
use proptest::prelude::*;
use seqrank::ingest::{read_container, sample_indices, write_container, Dtype};
use seqrank::spectral::{effective_rank, rankme_with, EmbeddingMatrix, SingularSpectrum, SpectrumMethod};
use seqrank::temporal::{padded_stack_sum, rankme_t, temporal_pool};

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-9..1e3f64], 1..80)
        .prop_filter("needs a positive value", |v| v.iter().any(|&s| s > 0.0))
        .prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn effective_rank_bounds_and_oracle(s in spectrum()) {
        let r = effective_rank(&SingularSpectrum::new(s.clone()).unwrap()).unwrap();
        prop_assert!(r.value >= 1.0 && r.value <= r.retained_count as f64);
        let want = naive_effective_rank(&s);
        prop_assert!((r.value - want).abs() <= 1e-12 * want, "{} vs {}", r.value, want);
    }

    #[test]
    fn pooling_paths_agree(seed in any::<u64>(), n in 1usize..30, dim in 1usize..12, max_len in 1usize..9) {
        let set = random_set(&mut rng(seed), n, dim, max_len);
        let a = temporal_pool(&set).unwrap();
        let b = padded_stack_sum(&set).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
        for (i, row) in naive_pool(&set).iter().enumerate() {
            for (x, y) in a.row(i).iter().zip(row) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn scale_and_permutation_invariance(seed in any::<u64>(), n in 2usize..40, dim in 1usize..10, c in 1e-3..1e3f64) {
        let mut r = rng(seed);
        let set = random_set(&mut r, n, dim, 4);
        let base = rankme_t(&set).unwrap().value;
        let scaled = rankme_t(&scale_set(&set, c)).unwrap().value;
        prop_assert!((base - scaled).abs() <= 1e-9 * base);
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(seed as usize % n);
        let permuted = rankme_t(&set.select(&order)).unwrap().value;
        prop_assert!((base - permuted).abs() <= 1e-9 * base);
    }

    #[test]
    fn gram_and_svd_agree(seed in any::<u64>(), d in 1usize..24, aspect in 1usize..12) {
        let mut r = rng(seed);
        let n = d * aspect + 1;
        let m = EmbeddingMatrix::new(n, d, gaussian(&mut r, n * d)).unwrap();
        let g = rankme_with(&m, SpectrumMethod::Gram).unwrap().value;
        let s = rankme_with(&m, SpectrumMethod::Svd).unwrap().value;
        prop_assert!((g - s).abs() <= 1e-9 * s, "{} vs {}", g, s);
    }

    #[test]
    fn container_round_trip(seed in any::<u64>(), n in 1usize..20, dim in 1usize..8, max_len in 1usize..6) {
        let set = random_set(&mut rng(seed), n, dim, max_len);
        let mut bytes = Vec::new();
        let written = write_container(&set, Dtype::F64, &mut bytes).unwrap();
        prop_assert_eq!(written as usize, bytes.len());
        prop_assert_eq!(read_container(&bytes[..]).unwrap(), set.clone());

        let mut narrow = Vec::new();
        write_container(&set, Dtype::F32, &mut narrow).unwrap();
        let back = read_container(&narrow[..]).unwrap();
        for (a, b) in back.sequences().iter().zip(set.sequences()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn sampling_is_a_prefix_stable_subset(n in 1usize..500, seed in any::<u64>(), k_frac in 0.0..1.0f64) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let idx = sample_indices(n, k, seed).unwrap();
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
        prop_assert!(idx.iter().all(|&i| i < n));
        let all = sample_indices(n, n, seed).unwrap();
        prop_assert_eq!(&all[..k], &idx[..]);
    }
}

#[test]
fn orthogonal_invariance() {
    let mut r = rng(31);
    for d in [2, 5, 16] {
        let set = random_set(&mut r, 60, d, 4);
        let q = random_orthogonal(&mut r, d);
        let a = rankme_t(&set).unwrap().value;
        let b = rankme_t(&rotate(&set, &q)).unwrap().value;
        assert!((a - b).abs() <= 1e-8 * a, "{a} vs {b}");
    }
}
