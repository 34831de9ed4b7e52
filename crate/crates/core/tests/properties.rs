//! Property tests over randomly drawn inputs.

use proptest::collection::vec;
use proptest::prelude::*;

use iat::cluster::purity;
use iat::dataset::{
    flatten_clip, frame_limb_lengths, joints_to_limbs, limbs_to_joints_per_frame, root_trajectory, ActionClip,
    ActionPair, FlatAction, InteractionRuleSet, PairedSet, Provenance, Role, Rule, SkeletonTopology,
};
use iat::pe_augment::{
    compute_confidence, fit_pca, max_distinct_pairs, reliability, row_normalize, sample_augmented_pairs, Embedding,
};
use iat::pipeline::reassign_pairs;
use iat::pvae::kl_divergence;

fn clip_from(frames: &[Vec<[f64; 3]>]) -> ActionClip {
    ActionClip { id: "c".into(), category: None, subject: None, role: None, frames: frames.to_vec() }
}

fn pose() -> impl Strategy<Value = Vec<[f64; 3]>> {
    // Joint offsets of at least 0.1 per axis keep every limb non-degenerate.
    vec((0.1f64..1.0, 0.1f64..1.0, 0.1f64..1.0), 8).prop_map(|offsets| {
        let topo = SkeletonTopology::upper_body9();
        let mut joints = vec![[0.0; 3]; topo.joint_count()];
        for (l, &(p, c)) in topo.limbs().iter().enumerate() {
            let o = offsets[l];
            joints[c] = [joints[p][0] + o.0, joints[p][1] + o.1, joints[p][2] + o.2];
        }
        joints
    })
}

fn pairs(n: usize) -> PairedSet {
    let action = |v: f64| FlatAction::new(2, 3, vec![v; 6]).unwrap();
    PairedSet {
        pairs: (0..n)
            .map(|i| ActionPair {
                stim_id: format!("s{i}"),
                resp_id: format!("r{i}"),
                stim: action(i as f64),
                resp: action(-(i as f64)),
                provenance: Provenance::Original,
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative(mu in vec(-5.0f64..5.0, 1..8), log_sigma in vec(-3.0f64..3.0, 8)) {
        let sigma: Vec<f64> = log_sigma[..mu.len()].iter().map(|v| v.exp()).collect();
        prop_assert!(kl_divergence(&mu, &sigma).unwrap() >= 0.0);
    }

    #[test]
    fn limb_round_trip_restores_joints(frames in vec(pose(), 2..5)) {
        let topo = SkeletonTopology::upper_body9();
        let clip = clip_from(&frames);
        let seq = joints_to_limbs(&clip, &topo).unwrap();
        let back = limbs_to_joints_per_frame(&seq, &frame_limb_lengths(&clip, &topo), &root_trajectory(&clip, &topo)).unwrap();
        for (a, b) in clip.frames.iter().zip(&back.frames) {
            for (x, y) in a.iter().zip(b) {
                for k in 0..3 {
                    prop_assert!((x[k] - y[k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn flattened_limbs_have_unit_length(frames in vec(pose(), 2..5)) {
        let topo = SkeletonTopology::upper_body9();
        let flat = flatten_clip(&clip_from(&frames), &topo, 4).unwrap();
        for v in flat.data.chunks(3) {
            prop_assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_is_orthonormal_and_ordered(points in vec(vec(-4.0f64..4.0, 5), 6..20), d in 1usize..4) {
        let p = fit_pca(&points, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-8);
            }
        }
        prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1] - 1e-9));
        prop_assert!(p.captured_variance() <= p.total_variance + 1e-9);
    }

    #[test]
    fn reliability_and_effectiveness_are_probabilities(
        pts in vec(vec(-2.0f64..2.0, 2), 3..15),
        labels in vec(0usize..3, 15),
        s in 0.01f64..3.0,
    ) {
        let n = pts.len();
        let emb: Vec<Embedding> = pts.into_iter().map(Embedding).collect();
        let p = fit_pca(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -0.5]], 2).unwrap();
        let sig = vec![vec![0.4, 0.9]; n];
        let nc = row_normalize(&compute_confidence(&emb, &sig, &p, s).unwrap(), Role::Responsive);
        let r = reliability(&nc, &labels[..n]).unwrap();
        let f = iat::pe_augment::effectiveness(&nc);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn augmentation_keeps_originals_and_adds_n_times_m(n in 2usize..10, m in 1usize..5, seed in any::<u64>()) {
        let a = pairs(n);
        let uniform = iat::pe_augment::SquareMatrix { n, values: vec![1.0; n * n] };
        let nc = row_normalize(&uniform, Role::Stimulative);
        let (out, repl) = sample_augmented_pairs(&a, &nc, &nc, m, seed).unwrap();
        prop_assert_eq!(out.len(), n * (m + 1));
        prop_assert_eq!(repl.len(), n * m);
        prop_assert_eq!(&out.pairs[..n], &a.pairs[..]);
        prop_assert!(out.pairs[n..].iter().all(|p| p.provenance == Provenance::Augmented));
    }

    #[test]
    fn reassignment_size_is_sum_of_squares(counts in vec(1usize..6, 1..5)) {
        let k = counts.len();
        let rules = InteractionRuleSet::new(
            (0..k).map(|r| Rule { stimulus: format!("s{r}"), response: format!("r{r}") }).collect(),
        ).unwrap();
        let labels: Vec<(String, String)> = counts
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| std::iter::repeat_n((format!("s{r}"), format!("r{r}")), c))
            .collect();
        let n = labels.len();
        let out = reassign_pairs(&pairs(n), &labels, &rules).unwrap();
        prop_assert_eq!(out.len(), counts.iter().map(|c| c * c).sum::<usize>());
        if counts.iter().all(|&c| c == counts[0]) {
            prop_assert_eq!(out.len() as u64, max_distinct_pairs(n as u64, k as i64).unwrap());
        }
    }

    #[test]
    fn purity_is_at_least_largest_class_share(assign in vec(0usize..4, 1..30), labels in vec(0usize..3, 30)) {
        let labels = &labels[..assign.len()];
        let p = purity(&assign, labels);
        let largest = (0..3).map(|c| labels.iter().filter(|&&l| l == c).count()).max().unwrap();
        prop_assert!(p >= largest as f64 / labels.len() as f64 - 1e-12);
        prop_assert!(p <= 1.0);
    }
}
