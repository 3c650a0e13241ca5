//! ℓ1-regularized least squares, `min ‖Dx − y‖² + λ‖x‖₁` (no ½ on the data
//! term), solved by the homotopy method over the concatenated
//! gallery/variation dictionary.

mod cholesky;
mod homotopy;
mod oracle;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionaries::{GalleryDictionary, VariationDictionary};
use crate::error::{Error, Result};

pub use oracle::{oracle_coordinate_descent, ORACLE_MAX_SWEEPS, ORACLE_OBJECTIVE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Maximum number of homotopy breakpoints.
    pub max_iters: usize,
    pub kkt_tol: f64,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::Config(format!("kkt_tol must be > 0, got {}", self.kkt_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.005,
            max_iters: 5000,
            kkt_tol: 1e-8,
        }
    }
}

/// Coefficients of a sample over `[P V]`: `alpha` for gallery columns,
/// `beta` for variation atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub objective: f64,
}

impl SparseCode {
    pub fn stacked(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.alpha.len() + self.beta.len());
        x.rows_mut(0, self.alpha.len()).copy_from(&self.alpha);
        x.rows_mut(self.alpha.len(), self.beta.len()).copy_from(&self.beta);
        x
    }
}

pub fn objective(dict: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    (dict * x - y).norm_squared() + lambda * x.lp_norm(1)
}

/// Largest violation of the optimality conditions with `c = 2Dᵀ(y − Dx)`:
/// `c_i = λ·sign(x_i)` on the support and `|c_i| ≤ λ` off it.
pub fn kkt_residual(dict: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    let c = dict.tr_mul(&(y - dict * x)) * 2.0;
    c.iter()
        .zip(x.iter())
        .map(|(ci, xi)| {
            if *xi != 0.0 {
                (ci - lambda * xi.signum()).abs()
            } else {
                (ci.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn check_problem(dict: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if dict.nrows() != y.len() {
        return Err(Error::dim("dictionary rows vs sample length", dict.nrows(), y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sample has non-finite entries".into()));
    }
    if dict.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("dictionary has non-finite entries".into()));
    }
    Ok(())
}

/// Homotopy solution of the lasso problem. The dictionary is expected to
/// have unit columns.
pub fn solve_lasso(dict: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<DVector<f64>> {
    check_problem(dict, y, cfg)?;
    homotopy::solve(dict, y, cfg)
}

/// `[P V]`, the horizontal concatenation of the two dictionaries.
pub fn concat_dictionaries(gallery: &GalleryDictionary, variation: &VariationDictionary) -> Result<DMatrix<f64>> {
    let p = gallery.matrix();
    let v = variation.matrix();
    if v.ncols() > 0 && p.nrows() != v.nrows() {
        return Err(Error::dim("variation rows vs gallery rows", p.nrows(), v.nrows()));
    }
    let mut joint = DMatrix::zeros(p.nrows(), p.ncols() + v.ncols());
    joint.columns_mut(0, p.ncols()).copy_from(p);
    if v.ncols() > 0 {
        joint.columns_mut(p.ncols(), v.ncols()).copy_from(v);
    }
    Ok(joint)
}

/// Solves against `[P V]` and splits the solution into gallery and variation parts.
pub fn solve_joint(
    gallery: &GalleryDictionary,
    variation: &VariationDictionary,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    let joint = concat_dictionaries(gallery, variation)?;
    solve_joint_with(&joint, gallery.len(), y, cfg)
}

/// Like [`solve_joint`] with a pre-concatenated dictionary whose first
/// `gallery_cols` columns are the gallery.
pub fn solve_joint_with(
    joint: &DMatrix<f64>,
    gallery_cols: usize,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    let x = solve_lasso(joint, y, cfg)?;
    let objective = objective(joint, y, &x, cfg.lambda);
    Ok(SparseCode {
        alpha: x.rows(0, gallery_cols).into_owned(),
        beta: x.rows(gallery_cols, x.len() - gallery_cols).into_owned(),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{GalleryDictionary, VariationDictionary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit_dictionary(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let d = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        crate::matrixcore::normalize_columns(&d).unwrap()
    }

    #[test]
    fn identity_dictionary_soft_thresholds() {
        let d = DMatrix::<f64>::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 0.1]);
        let x = solve_lasso(&d, &y, &SolverConfig::new(0.4)).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn large_lambda_gives_exact_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = unit_dictionary(6, 9, &mut rng);
        let y = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 2.0 * d.tr_mul(&y).amax();
        let x = solve_lasso(&d, &y, &SolverConfig::new(lambda)).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_lambda_recovers_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = unit_dictionary(10, 4, &mut rng);
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_lasso(&d, &y, &SolverConfig::new(0.0)).unwrap();
        let ls = (d.transpose() * &d).cholesky().unwrap().solve(&d.tr_mul(&y));
        assert!((x - ls).amax() < 1e-8);
    }

    #[test]
    fn nan_sample_is_rejected() {
        let d = DMatrix::<f64>::identity(2, 2);
        let y = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(matches!(
            solve_lasso(&d, &y, &SolverConfig::new(0.1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn iteration_limit_carries_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = unit_dictionary(10, 20, &mut rng);
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let cfg = SolverConfig {
            lambda: 1e-4,
            max_iters: 1,
            kkt_tol: 1e-8,
        };
        match solve_lasso(&d, &y, &cfg) {
            Err(Error::IterationLimit { best, .. }) => assert_eq!(best.len(), 20),
            other => panic!("expected iteration limit, got {other:?}"),
        }
    }

    #[test]
    fn joint_with_empty_variation_equals_plain_lasso() {
        let p = GalleryDictionary::one_per_class(DMatrix::identity(3, 3)).unwrap();
        let v = VariationDictionary::empty(3);
        let y = DVector::from_vec(vec![0.9, -0.3, 0.05]);
        let cfg = SolverConfig::new(0.1);
        let code = solve_joint(&p, &v, &y, &cfg).unwrap();
        let plain = solve_lasso(p.matrix(), &y, &cfg).unwrap();
        assert_eq!(code.alpha, plain);
        assert_eq!(code.beta.len(), 0);
    }

    #[test]
    fn sample_equal_to_gallery_column_selects_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = GalleryDictionary::one_per_class(unit_dictionary(12, 4, &mut rng)).unwrap();
        let v = VariationDictionary::new(unit_dictionary(12, 5, &mut rng)).unwrap();
        let y = p.matrix().column(2).into_owned();
        let cfg = SolverConfig::new(1e-6);
        let code = solve_joint(&p, &v, &y, &cfg).unwrap();

        let joint = concat_dictionaries(&p, &v).unwrap();
        let oracle = oracle_coordinate_descent(&joint, &y, &cfg).unwrap();
        assert!((code.stacked() - &oracle).amax() < 1e-5);
        for k in 0..4 {
            let expected = if k == 2 { 1.0 } else { 0.0 };
            assert!((code.alpha[k] - expected).abs() < 1e-5);
        }
        assert!(code.beta.amax() < 1e-5);
    }

    #[test]
    fn joint_problem_matches_oracle_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = GalleryDictionary::one_per_class(unit_dictionary(20, 10, &mut rng)).unwrap();
        let v = VariationDictionary::new(unit_dictionary(20, 15, &mut rng)).unwrap();
        let y = DVector::from_fn(20, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cfg = SolverConfig::new(0.05);
        let code = solve_joint(&p, &v, &y, &cfg).unwrap();
        let joint = concat_dictionaries(&p, &v).unwrap();
        let oracle = oracle_coordinate_descent(&joint, &y, &cfg).unwrap();
        let oracle_obj = objective(&joint, &y, &oracle, cfg.lambda);
        assert!((code.objective - oracle_obj).abs() < 1e-6);
        let recomputed = objective(&joint, &y, &code.stacked(), cfg.lambda);
        assert!((recomputed - code.objective).abs() < 1e-8);
        assert!(kkt_residual(&joint, &y, &code.stacked(), cfg.lambda) <= cfg.kkt_tol);
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_oneof, proptest, Just, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]
            #[test]
            fn homotopy_is_kkt_optimal_and_beats_zero(
                rows in 2usize..12,
                cols in 1usize..20,
                lambda in prop_oneof![Just(1e-3), Just(1e-2), 0.05..2.0f64],
                seed in any::<u64>(),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = unit_dictionary(rows, cols, &mut rng);
                let y = DVector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
                let cfg = SolverConfig::new(lambda);
                let x = solve_lasso(&d, &y, &cfg).unwrap();
                prop_assert!(objective(&d, &y, &x, lambda) <= y.norm_squared() + 1e-12);
                prop_assert!(kkt_residual(&d, &y, &x, lambda) <= cfg.kkt_tol);
            }
        }
    }
}
