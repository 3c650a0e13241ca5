//! Solves one LASSO problem along several penalties with the homotopy
//! solver and checks each solution against coordinate descent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s3rc::l1solver::{kkt_residual, objective, oracle_coordinate_descent, solve_lasso, SolverConfig};
use s3rc::matrixcore::normalize_columns;

fn main() -> s3rc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (rows, cols) = (30, 60);
    let raw = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let dict = normalize_columns(&raw)?;
    // A 4-sparse signal plus a little noise.
    let mut truth = DVector::zeros(cols);
    for (j, v) in [(4, 1.0), (17, -0.7), (33, 0.5), (58, 0.3)] {
        truth[j] = v;
    }
    let y = &dict * &truth + DVector::from_fn(rows, |_, _| rng.random_range(-0.01..0.01));

    println!("lambda\tnonzeros\tobjective\tkkt\toracle_gap");
    for lambda in [1.0, 0.1, 0.01, 0.001] {
        let cfg = SolverConfig::new(lambda);
        let x = solve_lasso(&dict, &y, &cfg)?;
        let reference = oracle_coordinate_descent(&dict, &y, &cfg)?;
        let f = objective(&dict, &y, &x, lambda);
        let gap = f - objective(&dict, &y, &reference, lambda);
        let nnz = x.iter().filter(|v| **v != 0.0).count();
        println!(
            "{lambda}\t{nnz}\t{f:.6e}\t{:.1e}\t{gap:.1e}",
            kkt_residual(&dict, &y, &x, lambda)
        );
    }

    let x = solve_lasso(&dict, &y, &SolverConfig::new(0.1))?;
    let support: Vec<usize> = (0..cols).filter(|&j| x[j] != 0.0).collect();
    println!("support at lambda 0.1: {support:?}");
    Ok(())
}
