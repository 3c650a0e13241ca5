//! Removes a known variation from a sample: the joint sparse code over
//! `[P V]` recovers the variation part, and subtracting it leaves the
//! clean class prototype.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s3rc::dictionaries::{GalleryDictionary, VariationDictionary};
use s3rc::l1solver::{solve_joint, SolverConfig};
use s3rc::rectifier::rectify_unlabeled;

fn main() -> s3rc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dim = 60;
    let gallery = GalleryDictionary::one_per_class(DMatrix::from_fn(dim, 5, |_, _| rng.random_range(-1.0..1.0)))?;
    let variation = VariationDictionary::new(DMatrix::from_fn(dim, 12, |_, _| rng.random_range(-1.0..1.0)))?;

    let class = 2;
    let clean = gallery.matrix().column(class).into_owned();
    let mut beta = DVector::zeros(variation.len());
    beta[3] = 0.6;
    beta[9] = -0.4;
    let y = &clean + variation.combine(&beta)?;
    let y = &y / y.norm();

    let cosine = |v: &DVector<f64>| v.dot(&clean) / (v.norm() * clean.norm());
    println!("cosine to prototype before: {:.6}", cosine(&y));
    for lambda in [1e-2, 1e-3, 1e-4] {
        let code = solve_joint(&gallery, &variation, &y, &SolverConfig::new(lambda))?;
        let rectified = rectify_unlabeled(&y, &variation, &code.beta)?;
        println!("lambda {lambda:e}: cosine after {:.6}", cosine(&rectified));
    }
    Ok(())
}
