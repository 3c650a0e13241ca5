//! Fits the class-wise Gaussian mixture on a rectified set and prints the
//! log-likelihood trace for each covariance mode.

use s3rc::dataio::{generate_synthetic, SynthSpec};
use s3rc::dictionaries::{gallery_from_centroids, variation_centroid_subtraction, LabeledSet};
use s3rc::l1solver::SolverConfig;
use s3rc::matrixcore::{normalize_columns, pca_fit_at_most, FeatureMatrix};
use s3rc::rectifier::build_rectified_set;
use s3rc::ssgmm::{fit_em, init_gmm, CovMode, EmConfig, PriorsMode};

fn main() -> s3rc::Result<()> {
    let data = generate_synthetic(&SynthSpec::default())?;
    let x = &data.features;
    let pca = pca_fit_at_most(x.data(), 40)?;
    let z = normalize_columns(&pca.project_matrix(x.data())?)?;

    let labeled_cols: Vec<usize> = (0..x.len()).filter(|&j| x.labels()[j].is_some()).collect();
    let unlabeled_cols: Vec<usize> = (0..x.len()).filter(|&j| x.labels()[j].is_none()).collect();
    let labels = labeled_cols.iter().map(|&j| x.labels()[j]).collect();
    let labeled = LabeledSet::from_features(&FeatureMatrix::new(
        z.select_columns(&labeled_cols),
        labels,
        x.classes().to_vec(),
    )?)?;
    let gallery = gallery_from_centroids(&labeled)?;
    let variation = variation_centroid_subtraction(&labeled);
    let set = build_rectified_set(
        &labeled,
        &z.select_columns(&unlabeled_cols),
        &gallery,
        &variation,
        &SolverConfig::new(0.005),
    )?;
    println!(
        "rectified set: {} columns, {} unlabeled",
        set.len(),
        set.num_unlabeled()
    );

    for mode in [CovMode::Identity, CovMode::Diagonal, CovMode::Full] {
        let cfg = EmConfig {
            cov_mode: mode,
            ..EmConfig::default()
        };
        let init = init_gmm(&set, &gallery, PriorsMode::LabeledProportion, &cfg)?;
        let (model, trace) = fit_em(&set, &init, &cfg)?;
        let ll: Vec<String> = trace.log_likelihoods.iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "{mode:?}: {} iterations, converged {}, priors sum {:.12}",
            trace.iterations,
            trace.converged,
            model.priors.sum()
        );
        println!("  log-likelihood {}", ll.join(" -> "));
    }
    Ok(())
}
