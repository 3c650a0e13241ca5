//! Dense linear-algebra substrate: labelled feature matrices, PCA and
//! column normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a principal direction is
/// considered absent.
const RANK_TOL: f64 = 1e-10;

/// A D×N matrix of sample vectors (columns) with optional class labels.
///
/// Class ids are zero-based indices into `classes`; `None` marks an
/// unlabeled column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
    labels: Vec<Option<usize>>,
    classes: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>, labels: Vec<Option<usize>>, classes: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if labels.len() != data.ncols() {
            return Err(Error::dim("label count", data.ncols(), labels.len()));
        }
        if let Some((j, _)) = data
            .column_iter()
            .enumerate()
            .find(|(_, c)| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput(format!("column {j} has a non-finite entry")));
        }
        if let Some((j, l)) = labels
            .iter()
            .enumerate()
            .find_map(|(j, l)| l.filter(|&l| l >= classes.len()).map(|l| (j, l)))
        {
            return Err(Error::InvalidInput(format!(
                "column {j} has class id {l} outside 0..{}",
                classes.len()
            )));
        }
        Ok(Self { data, labels, classes })
    }

    /// All columns unlabeled, with `num_classes` anonymous classes named `1..=K`.
    pub fn unlabeled(data: DMatrix<f64>, num_classes: usize) -> Result<Self> {
        let n = data.ncols();
        Self::new(data, vec![None; n], default_class_names(num_classes))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).into_owned()
    }

    /// Subset of columns, in the given order, keeping the class table.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let data = self.data.select_columns(columns);
        let labels = columns.iter().map(|&j| self.labels[j]).collect();
        Self::new(data, labels, self.classes.clone())
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<Option<usize>>, Vec<String>) {
        (self.data, self.labels, self.classes)
    }
}

pub fn default_class_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| i.to_string()).collect()
}

/// Principal component model: `components` is d×D with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    pub components: DMatrix<f64>,
    /// Sample-covariance eigenvalues (normalized by N−1) of the retained axes.
    pub eigenvalues: DVector<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    /// `components · (X − mean)` for a raw D×N matrix.
    pub fn project_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(Error::dim("pca input rows", self.input_dim(), x.nrows()));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(&self.components * centered)
    }

    pub fn project_vector(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.input_dim() {
            return Err(Error::dim("pca input rows", self.input_dim(), y.len()));
        }
        Ok(&self.components * (y - &self.mean))
    }

    /// Maps reduced coordinates back to the input space.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.components.transpose() * z;
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        out
    }
}

/// Fits a `d`-component PCA on the columns of `x`, centering by the
/// column mean. Uses the N×N Gram matrix when N < D.
pub fn pca_fit(x: &FeatureMatrix, d: usize) -> Result<PcaModel> {
    pca_fit_matrix(x.data(), d)
}

pub fn pca_fit_matrix(x: &DMatrix<f64>, d: usize) -> Result<PcaModel> {
    fit(x, d, false)
}

/// Like [`pca_fit_matrix`] but keeps `min(d_max, D, N−1, rank)` components
/// instead of failing when fewer are available.
pub fn pca_fit_at_most(x: &DMatrix<f64>, d_max: usize) -> Result<PcaModel> {
    let (dim, n) = x.shape();
    fit(x, d_max.min(dim).min(n.saturating_sub(1)).max(1), true)
}

fn fit(x: &DMatrix<f64>, d: usize, clamp_rank: bool) -> Result<PcaModel> {
    let (dim, n) = x.shape();
    if d == 0 {
        return Err(Error::dim("pca dimension must be positive", 1, 0));
    }
    if n < 2 || d > dim.min(n - 1) {
        return Err(Error::dim(
            "pca dimension exceeds min(D, N-1)",
            dim.min(n.saturating_sub(1)),
            d,
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("pca input has non-finite entries".into()));
    }

    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let scale = (n - 1) as f64;

    let (values, vectors) = if n < dim {
        let gram = centered.transpose() * &centered;
        let eig = SymmetricEigen::new(gram);
        let order = descending_order(&eig.eigenvalues);
        let d = check_rank(&eig.eigenvalues, &order, d, clamp_rank)?;
        let mut dirs = DMatrix::zeros(dim, d);
        let mut vals = DVector::zeros(d);
        for (slot, &i) in order.iter().take(d).enumerate() {
            let mu = eig.eigenvalues[i];
            let u = &centered * eig.eigenvectors.column(i) / mu.sqrt();
            dirs.set_column(slot, &u);
            vals[slot] = mu / scale;
        }
        reorthonormalize(&mut dirs);
        (vals, dirs)
    } else {
        let cov = &centered * centered.transpose() / scale;
        let eig = SymmetricEigen::new(cov);
        let order = descending_order(&eig.eigenvalues);
        let d = check_rank(&eig.eigenvalues, &order, d, clamp_rank)?;
        let mut dirs = DMatrix::zeros(dim, d);
        let mut vals = DVector::zeros(d);
        for (slot, &i) in order.iter().take(d).enumerate() {
            dirs.set_column(slot, &eig.eigenvectors.column(i));
            vals[slot] = eig.eigenvalues[i];
        }
        (vals, dirs)
    };

    let mut components = vectors.transpose();
    for mut row in components.row_iter_mut() {
        // Sign convention: the largest-magnitude entry is positive.
        let mut pivot = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            row.neg_mut();
        }
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues: values,
    })
}

/// Indices sorted by descending eigenvalue; equal values keep index order.
fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Returns the number of components to keep.
fn check_rank(values: &DVector<f64>, order: &[usize], d: usize, clamp: bool) -> Result<usize> {
    let top = values[order[0]].max(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| top > 0.0 && values[i] > RANK_TOL * top)
        .count();
    if rank < d {
        if clamp && rank > 0 {
            return Ok(rank);
        }
        return Err(Error::dim("pca dimension exceeds data rank", rank, d));
    }
    Ok(d)
}

/// Modified Gram-Schmidt over the columns, in order.
fn reorthonormalize(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let proj = m.column(i).dot(&m.column(j));
            let qi = m.column(i).into_owned();
            m.column_mut(j).axpy(-proj, &qi, 1.0);
        }
        let norm = m.column(j).norm();
        m.column_mut(j).unscale_mut(norm);
    }
}

/// Projects a labelled matrix, preserving labels.
pub fn pca_project(model: &PcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let data = model.project_matrix(x.data())?;
    FeatureMatrix::new(data, x.labels().to_vec(), x.classes().to_vec())
}

/// Scales every column to unit ℓ2 norm. Zero or non-finite columns are rejected.
pub fn normalize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "column {j} has norm {norm}, cannot normalize"
            )));
        }
        col.unscale_mut(norm);
    }
    Ok(out)
}

pub fn normalize_vector(y: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = y.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "vector has norm {norm}, cannot normalize"
        )));
    }
    Ok(y / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn normalize_three_four_five() {
        let x = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let n = normalize_columns(&x).unwrap();
        assert!((n[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((n[(1, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_unit_column_is_unchanged() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let n = normalize_columns(&x).unwrap();
        assert!((n - x).abs().max() < 1e-15);
    }

    #[test]
    fn normalize_zero_column_names_index() {
        let x = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let err = normalize_columns(&x).unwrap_err();
        assert!(err.to_string().contains("column 1"), "{err}");
    }

    #[test]
    fn pca_rejects_dimension_above_centered_rank() {
        let x = FeatureMatrix::unlabeled(random_matrix(10, 5, 1), 1).unwrap();
        assert!(matches!(pca_fit(&x, 5), Err(Error::Dimension { .. })));
        assert!(pca_fit(&x, 4).is_ok());
    }

    #[test]
    fn pca_rejects_rank_deficient_request() {
        // Rank-2 data in 6 dimensions with 8 samples.
        let basis = random_matrix(6, 2, 2);
        let coeffs = random_matrix(2, 8, 3);
        let x = &basis * coeffs;
        assert!(pca_fit_matrix(&x, 2).is_ok());
        assert!(matches!(pca_fit_matrix(&x, 3), Err(Error::Dimension { .. })));
        assert_eq!(pca_fit_at_most(&x, 300).unwrap().output_dim(), 2);
        let wide = &random_matrix(20, 2, 2) * random_matrix(2, 5, 3);
        assert_eq!(pca_fit_at_most(&wide, 300).unwrap().output_dim(), 2);
        assert_eq!(pca_fit_at_most(&random_matrix(3, 10, 1), 300).unwrap().output_dim(), 3);
    }

    #[test]
    fn pca_exact_rank_reconstructs_zero_mean_data() {
        let mut coeffs = random_matrix(3, 9, 5);
        let mean = coeffs.column_mean();
        for mut c in coeffs.column_iter_mut() {
            c -= &mean;
        }
        // 12 rows exercise the Gram route (N < D), 4 rows the covariance route.
        for rows in [12, 4] {
            let data = random_matrix(rows, 3, 4) * &coeffs;
            let model = pca_fit_matrix(&data, 3).unwrap();
            let back = model.reconstruct(&model.project_matrix(&data).unwrap());
            assert!((back - &data).abs().max() < 1e-8, "rows = {rows}");
        }
    }

    #[test]
    fn pca_covariance_route_matches_gram_route() {
        let x = random_matrix(6, 7, 6); // N > D: covariance route
        let wide = random_matrix(7, 6, 6); // N < D: gram route
        for m in [&x, &wide] {
            let model = pca_fit_matrix(m, 3).unwrap();
            let gram = &model.components * model.components.transpose();
            assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-8);
        }
    }

    #[test]
    fn projected_variance_equals_eigenvalue_and_is_decorrelated() {
        for (rows, cols) in [(8, 30), (30, 8)] {
            let x = random_matrix(rows, cols, 7);
            let d = 5;
            let model = pca_fit_matrix(&x, d).unwrap();
            let z = model.project_matrix(&x).unwrap();
            let cov = &z * z.transpose() / (cols - 1) as f64;
            for i in 0..d {
                assert!((cov[(i, i)] - model.eigenvalues[i]).abs() < 1e-8);
                for j in 0..d {
                    if i != j {
                        assert!(cov[(i, j)].abs() < 1e-6);
                    }
                }
            }
            for w in model.eigenvalues.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let x = random_matrix(5, 20, 8);
        let model = pca_fit_matrix(&x, 3).unwrap();
        let z = model.project_vector(&model.mean).unwrap();
        assert!(z.norm() < 1e-14);
    }

    #[test]
    fn project_rejects_wrong_row_count() {
        let x = random_matrix(5, 20, 9);
        let model = pca_fit_matrix(&x, 3).unwrap();
        assert!(model.project_matrix(&random_matrix(4, 2, 1)).is_err());
    }

    #[test]
    fn feature_matrix_validates_labels() {
        let data = random_matrix(2, 2, 10);
        assert!(FeatureMatrix::new(data.clone(), vec![Some(0), Some(2)], default_class_names(2)).is_err());
        assert!(FeatureMatrix::new(data, vec![Some(0), None], default_class_names(2)).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
            (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
                proptest::collection::vec(prop_oneof![-100.0..-1e-3f64, 1e-3..100.0f64], r * c)
                    .prop_map(move |v| DMatrix::from_vec(r, c, v))
            })
        }

        proptest! {
            #[test]
            fn normalization_is_idempotent_and_direction_preserving(x in matrix_strategy()) {
                let once = normalize_columns(&x).unwrap();
                let twice = normalize_columns(&once).unwrap();
                prop_assert!((&twice - &once).abs().max() < 1e-14);
                for j in 0..x.ncols() {
                    prop_assert!((once.column(j).norm() - 1.0).abs() < 1e-12);
                    let scale = x.column(j).dot(&once.column(j));
                    prop_assert!(scale > 0.0);
                    let diff = x.column(j) - once.column(j) * scale;
                    prop_assert!(diff.norm() < 1e-9 * x.column(j).norm());
                }
            }
        }
    }
}
