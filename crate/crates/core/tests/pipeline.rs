//! Whole-pipeline behavior on the synthetic benchmark.

use s3rc::classifier::{evaluate, fit, run_baseline, run_s3rc, Method, PipelineConfig};
use s3rc::dataio::{generate_synthetic, Protocol, SynthSpec};
use s3rc::matrixcore::FeatureMatrix;
use s3rc::Error;

fn correct_counts(eta: f64, seed: u64) -> Vec<usize> {
    let spec = SynthSpec {
        eta,
        seed,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let split = data.truth.split(Protocol::Transductive, 0.5, seed).unwrap();
    let test = data.features.data().select_columns(&split.test);
    let truth: Vec<usize> = split.test.iter().map(|&j| data.truth.labels[j]).collect();
    Method::ALL
        .iter()
        .map(|&method| {
            let cfg = PipelineConfig {
                method,
                ..PipelineConfig::default()
            };
            let model = fit(&data.features, None, &cfg).unwrap();
            evaluate(&model.predict_labels(&test).unwrap(), &truth, spec.num_classes)
                .unwrap()
                .correct
        })
        .collect()
}

// Regression numbers (correct out of 200, order src, esrc, ssrc, s3rc).
#[test]
fn benchmark_counts_are_pinned() {
    assert_eq!(correct_counts(0.6, 7), [198, 200, 200, 200]);
    assert_eq!(correct_counts(0.0, 7), [200, 200, 200, 200]);
    assert_eq!(correct_counts(1.0, 7), [157, 184, 187, 200]);
    assert_eq!(correct_counts(2.0, 7), [41, 43, 37, 80]);
}

#[test]
fn s3rc_gains_grow_with_the_session_gap() {
    let at = |eta| correct_counts(eta, 7);
    let (mid, wide) = (at(1.0), at(2.0));
    assert!(mid[3] >= mid[1] + 10);
    assert!(wide[3] >= wide[1] + 10);
}

#[test]
fn inductive_protocol_keeps_test_samples_out_of_training() {
    let spec = SynthSpec {
        eta: 1.0,
        ..SynthSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let split = data.truth.split(Protocol::Inductive, 0.5, 11).unwrap();
    assert!(split.test.iter().all(|j| !split.unlabeled_train.contains(j)));

    let mut cols = split.labeled.clone();
    cols.extend(&split.unlabeled_train);
    let train = data.features.select(&cols).unwrap();
    let model = fit(&train, None, &PipelineConfig::default()).unwrap();
    // PCA is fit on the training columns only.
    let mean = train.data().column_mean();
    assert!((&model.pca.mean - mean).amax() < 1e-12);

    let test = data.features.data().select_columns(&split.test);
    let truth: Vec<usize> = split.test.iter().map(|&j| data.truth.labels[j]).collect();
    let e = evaluate(&model.predict_labels(&test).unwrap(), &truth, spec.num_classes).unwrap();
    assert_eq!(e.total, 100);
    assert!(e.rate >= 0.9, "inductive rate {}", e.rate);
}

#[test]
fn run_helpers_classify_the_unlabeled_columns() {
    let data = generate_synthetic(&SynthSpec::default()).unwrap();
    let unlabeled = data.features.labels().iter().filter(|l| l.is_none()).count();
    let cfg = PipelineConfig::default();
    let out = run_s3rc(&data.features, None, &cfg).unwrap();
    assert_eq!(out.results.len(), unlabeled);
    for method in [Method::Src, Method::Esrc, Method::Ssrc] {
        assert_eq!(
            run_baseline(method, &data.features, None, &cfg).unwrap().results.len(),
            unlabeled
        );
    }
    assert!(matches!(
        run_baseline(Method::S3rc, &data.features, None, &cfg),
        Err(Error::Config(_))
    ));
}

#[test]
fn fit_is_repeatable_and_sample_order_keeps_labels() {
    let data = generate_synthetic(&SynthSpec {
        eta: 1.0,
        ..SynthSpec::default()
    })
    .unwrap();
    let cfg = PipelineConfig::default();
    let a = fit(&data.features, None, &cfg).unwrap();
    assert_eq!(a, fit(&data.features, None, &cfg).unwrap());

    // Reversing the sample order changes nothing but summation order.
    let order: Vec<usize> = (0..data.features.len()).rev().collect();
    let reversed: FeatureMatrix = data.features.select(&order).unwrap();
    let b = fit(&reversed, None, &cfg).unwrap();
    let x = data.features.data();
    assert_eq!(a.predict_labels(x).unwrap(), b.predict_labels(x).unwrap());
}

#[test]
fn numerical_failures_map_to_exit_code_3() {
    let e = Error::Numerical {
        sample: 4,
        class: 1,
        message: "non-finite residual".into(),
    };
    assert_eq!(e.exit_code(), 3);
    assert_eq!(Error::Config("x".into()).exit_code(), 2);
}
