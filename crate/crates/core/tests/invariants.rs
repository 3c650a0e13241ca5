//! Property tests for invariants that span several modules.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use s3rc::archive::ModelArchive;
use s3rc::classifier::{fit, Method, PipelineConfig};
use s3rc::dataio::{format_dataset, generate_synthetic, parse_dataset, split, Protocol, SplitSpec, SynthSpec};
use s3rc::dictionaries::{gallery_from_centroids, variation_centroid_subtraction, LabeledSet, VariationDictionary};
use s3rc::l1solver::SolverConfig;
use s3rc::matrixcore::normalize_columns;
use s3rc::rectifier::{build_rectified_set, rectify_unlabeled};
use s3rc::ssgmm::{fit_em, init_gmm, CovMode, EmConfig, PriorsMode};

fn unit_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    normalize_columns(&DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))).unwrap()
}

fn labeled_set(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> LabeledSet {
    LabeledSet::new(
        (0..k)
            .map(|_| {
                let n = rng.random_range(1..=3);
                unit_gaussian(rng, dim, n)
            })
            .collect(),
    )
    .unwrap()
}

fn small_spec(seed: u64, k: usize, n_u: usize) -> SynthSpec {
    SynthSpec {
        num_classes: k,
        dim: 8,
        num_atoms: 3,
        labeled_per_class: 2,
        unlabeled_per_class: n_u,
        seed,
        ..SynthSpec::default()
    }
}

fn cov_mode(i: usize) -> CovMode {
    [CovMode::Identity, CovMode::Diagonal, CovMode::Full][i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empty_variation_rectifies_to_normalized_input(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labeled = labeled_set(&mut rng, 6, 3);
        let gallery = gallery_from_centroids(&labeled).unwrap();
        let raw = DMatrix::from_fn(6, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let set = build_rectified_set(&labeled, &raw, &gallery, &VariationDictionary::empty(6), &SolverConfig::new(0.01)).unwrap();
        let expected = normalize_columns(&raw).unwrap();
        let start = labeled.total();
        prop_assert_eq!(set.len(), start + n);
        for j in 0..n {
            prop_assert!((set.matrix().column(start + j) - expected.column(j)).amax() <= 1e-12);
        }
    }

    #[test]
    fn rectifying_with_zero_code_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = VariationDictionary::new(unit_gaussian(&mut rng, 7, 4)).unwrap();
        let y = unit_gaussian(&mut rng, 7, 1).column(0).into_owned();
        let r = rectify_unlabeled(&y, &v, &DVector::zeros(4)).unwrap();
        prop_assert!((r - y).amax() <= 1e-12);
    }

    #[test]
    fn rectified_set_keeps_every_column(seed in any::<u64>(), n in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labeled = labeled_set(&mut rng, 6, 3);
        let gallery = gallery_from_centroids(&labeled).unwrap();
        let variation = variation_centroid_subtraction(&labeled);
        let raw = unit_gaussian(&mut rng, 6, n);
        let set = build_rectified_set(&labeled, &raw, &gallery, &variation, &SolverConfig::new(0.01)).unwrap();
        prop_assert_eq!(set.len() + set.excluded().len(), labeled.total() + n);
    }

    #[test]
    fn em_is_monotone_and_permutation_invariant(seed in any::<u64>(), mode in 0usize..3, uniform in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labeled = labeled_set(&mut rng, 5, 3);
        let gallery = gallery_from_centroids(&labeled).unwrap();
        let variation = variation_centroid_subtraction(&labeled);
        let raw = unit_gaussian(&mut rng, 5, 12);
        let set = build_rectified_set(&labeled, &raw, &gallery, &variation, &SolverConfig::new(0.01)).unwrap();
        let cfg = EmConfig { cov_mode: cov_mode(mode), ..EmConfig::default() };
        let priors = if uniform { PriorsMode::Uniform } else { PriorsMode::LabeledProportion };
        let init = init_gmm(&set, &gallery, priors, &cfg).unwrap();
        let (model, trace) = fit_em(&set, &init, &cfg).unwrap();
        for w in trace.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "log-likelihood fell from {} to {}", w[0], w[1]);
        }

        let mut order: Vec<usize> = (0..set.len()).collect();
        order.reverse();
        let shuffled = set.permuted(&order).unwrap();
        let init2 = init_gmm(&shuffled, &gallery, priors, &cfg).unwrap();
        let (model2, _) = fit_em(&shuffled, &init2, &cfg).unwrap();
        prop_assert!((&model.means - &model2.means).amax() <= 1e-12);
        prop_assert!((&model.priors - &model2.priors).amax() <= 1e-12);
    }

    #[test]
    fn generator_is_deterministic_and_exact_without_noise(seed in any::<u64>(), k in 2usize..5) {
        let spec = SynthSpec { eta: 0.0, rho: 0.0, sigma: 0.0, ..small_spec(seed, k, 2) };
        let a = generate_synthetic(&spec).unwrap();
        prop_assert_eq!(&a, &generate_synthetic(&spec).unwrap());
        prop_assert_eq!(&a.truth.labeled_prototypes, &a.truth.unlabeled_prototypes);
        for (j, &c) in a.truth.labels.iter().enumerate() {
            let proto = DVector::from_vec(a.truth.base_prototypes[c].clone());
            prop_assert!((a.features.column(j) - proto).amax() <= 1e-15);
        }
    }

    #[test]
    fn splits_are_stratified_and_disjoint(seed in any::<u64>(), k in 2usize..5, n_l in 1usize..3, inductive in any::<bool>()) {
        let data = generate_synthetic(&small_spec(seed, k, 4)).unwrap().fully_labeled().unwrap();
        let protocol = if inductive { Protocol::Inductive } else { Protocol::Transductive };
        let s = split(&data, protocol, &SplitSpec { labeled_per_class: n_l, test_fraction: 0.5 }, seed).unwrap();
        for c in 0..k {
            let count = s.labeled.iter().filter(|&&j| data.labels()[j] == Some(c)).count();
            prop_assert_eq!(count, n_l);
        }
        for j in s.unlabeled_train.iter().chain(&s.test) {
            prop_assert!(!s.labeled.contains(j));
        }
        if inductive {
            prop_assert!(s.test.iter().all(|j| !s.unlabeled_train.contains(j)));
        } else {
            prop_assert_eq!(&s.test, &s.unlabeled_train);
        }
    }

    #[test]
    fn dataset_text_round_trips(seed in any::<u64>()) {
        let data = generate_synthetic(&small_spec(seed, 3, 2)).unwrap();
        let text = format_dataset(&data.features);
        let back = parse_dataset(&text, "mem.csv".as_ref()).unwrap().to_features().unwrap();
        prop_assert_eq!(back.data(), data.features.data());
        prop_assert_eq!(back.labels(), data.features.labels());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn archives_round_trip_and_fits_repeat(seed in any::<u64>(), method in 0usize..4, mode in 0usize..3) {
        let data = generate_synthetic(&small_spec(seed, 3, 3)).unwrap();
        let cfg = PipelineConfig {
            method: Method::ALL[method],
            em: EmConfig { cov_mode: cov_mode(mode), ..EmConfig::default() },
            ..PipelineConfig::default()
        };
        let model = fit(&data.features, None, &cfg).unwrap();
        let json = ModelArchive::from_model(&model).to_json();
        prop_assert_eq!(&json, &ModelArchive::from_model(&fit(&data.features, None, &cfg).unwrap()).to_json());
        let back = ModelArchive::from_json(&json).unwrap().into_model().unwrap();
        let x = data.features.data();
        prop_assert_eq!(back.predict(x).unwrap(), model.predict(x).unwrap());
    }

    #[test]
    fn relabeling_classes_permutes_predictions(seed in any::<u64>()) {
        let data = generate_synthetic(&small_spec(seed, 4, 3)).unwrap();
        let (x, labels, names) = data.features.clone().into_parts();
        // Class c becomes 3 − c.
        let flip = |c: usize| 3 - c;
        let relabeled = s3rc::matrixcore::FeatureMatrix::new(
            x.clone(),
            labels.iter().map(|l| l.map(flip)).collect(),
            names.iter().rev().cloned().collect(),
        )
        .unwrap();
        let cfg = PipelineConfig::default();
        let a = fit(&data.features, None, &cfg).unwrap().predict_labels(&x).unwrap();
        let b = fit(&relabeled, None, &cfg).unwrap().predict_labels(&x).unwrap();
        prop_assert_eq!(a.into_iter().map(flip).collect::<Vec<_>>(), b);
    }
}
