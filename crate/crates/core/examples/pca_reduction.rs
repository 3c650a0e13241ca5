//! Fits PCA to a synthetic dataset and reports how much variance the
//! leading components keep.

use s3rc::dataio::{generate_synthetic, SynthSpec};
use s3rc::matrixcore::{normalize_columns, pca_fit_at_most};

fn main() -> s3rc::Result<()> {
    let data = generate_synthetic(&SynthSpec {
        dim: 120,
        ..SynthSpec::default()
    })?;
    let x = data.features.data();
    let total: f64 = {
        let model = pca_fit_at_most(x, usize::MAX)?;
        model.eigenvalues.iter().sum()
    };
    println!("samples {} dim {}", x.ncols(), x.nrows());
    println!("d\tkept_variance\treconstruction_rms");
    for d in [2, 5, 10, 20, 50] {
        let model = pca_fit_at_most(x, d)?;
        let z = model.project_matrix(x)?;
        let back = model.reconstruct(&z);
        let rms = ((x - back).norm_squared() / x.len() as f64).sqrt();
        let kept: f64 = model.eigenvalues.iter().sum::<f64>() / total;
        println!("{}\t{kept:.4}\t{rms:.3e}", model.output_dim());
    }

    // Classification works on unit-norm reduced samples.
    let model = pca_fit_at_most(x, 30)?;
    let z = normalize_columns(&model.project_matrix(x)?)?;
    println!("first reduced sample norm {:.12}", z.column(0).norm());
    Ok(())
}
