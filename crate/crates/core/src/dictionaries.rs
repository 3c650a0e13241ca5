//! Gallery (`P`) and variation (`V`) dictionary construction.
//!
//! All constructions operate on samples already in the reduced space and
//! return unit-column dictionaries.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataio::matrix_csv;
use crate::error::{Error, Result};
use crate::matrixcore::{normalize_columns, FeatureMatrix};

/// Variation columns with a smaller pre-normalization norm are dropped.
pub const ZERO_COLUMN_TOL: f64 = 1e-10;

/// Labeled samples grouped by class: `classes[i]` is D×n_i.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    classes: Vec<DMatrix<f64>>,
}

impl LabeledSet {
    pub fn new(classes: Vec<DMatrix<f64>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("labeled set has no classes".into()));
        }
        let dim = classes[0].nrows();
        for (i, a) in classes.iter().enumerate() {
            if a.ncols() == 0 {
                return Err(Error::InvalidInput(format!("class {i} has no labeled samples")));
            }
            if a.nrows() != dim {
                return Err(Error::dim(format!("rows of class {i}"), dim, a.nrows()));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("class {i} has non-finite entries")));
            }
        }
        Ok(Self { classes })
    }

    /// Groups the labeled columns of `x` by class id; unlabeled columns are ignored.
    pub fn from_features(x: &FeatureMatrix) -> Result<Self> {
        let mut members = vec![Vec::new(); x.num_classes()];
        for (j, l) in x.labels().iter().enumerate() {
            if let Some(c) = l {
                members[*c].push(j);
            }
        }
        if let Some(i) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "class {:?} has no labeled samples",
                x.classes()[i]
            )));
        }
        Self::new(members.iter().map(|m| x.data().select_columns(m)).collect())
    }

    pub fn class(&self, i: usize) -> &DMatrix<f64> {
        &self.classes[i]
    }

    pub fn classes(&self) -> &[DMatrix<f64>] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.classes[0].nrows()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.classes.iter().map(|a| a.ncols()).collect()
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|a| a.ncols()).sum()
    }

    /// `c_i`, the mean of the class samples (not normalized).
    pub fn centroid(&self, i: usize) -> DVector<f64> {
        self.classes[i].column_mean()
    }

    /// Applies `f` to every class matrix, e.g. a projection.
    pub fn map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    {
        Self::new(self.classes.iter().map(&mut f).collect::<Result<_>>()?)
    }

    /// All samples stacked class by class, with the class of each column.
    pub fn stacked(&self) -> (DMatrix<f64>, Vec<usize>) {
        let mut out = DMatrix::zeros(self.dim(), self.total());
        let mut owners = Vec::with_capacity(self.total());
        let mut at = 0;
        for (i, a) in self.classes.iter().enumerate() {
            out.columns_mut(at, a.ncols()).copy_from(a);
            owners.extend(std::iter::repeat_n(i, a.ncols()));
            at += a.ncols();
        }
        (out, owners)
    }
}

/// Auxiliary multi-sample-per-subject dataset used only to build `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericSet(LabeledSet);

impl GenericSet {
    pub fn new(classes: Vec<DMatrix<f64>>) -> Result<Self> {
        LabeledSet::new(classes).map(Self)
    }

    pub fn from_features(x: &FeatureMatrix) -> Result<Self> {
        LabeledSet::from_features(x).map(Self)
    }

    pub fn as_labeled(&self) -> &LabeledSet {
        &self.0
    }

    pub fn map<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    {
        self.0.map(f).map(Self)
    }
}

/// Unit-column gallery dictionary; `column_classes[j]` is the class of column j.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryDictionary {
    matrix: DMatrix<f64>,
    column_classes: Vec<usize>,
    num_classes: usize,
}

impl GalleryDictionary {
    /// One column per class, in class order. Columns are normalized.
    pub fn one_per_class(matrix: DMatrix<f64>) -> Result<Self> {
        let k = matrix.ncols();
        Self::with_classes(matrix, (0..k).collect(), k)
    }

    /// Arbitrary column-to-class assignment. Columns are normalized.
    pub fn with_classes(matrix: DMatrix<f64>, column_classes: Vec<usize>, num_classes: usize) -> Result<Self> {
        if column_classes.len() != matrix.ncols() {
            return Err(Error::dim(
                "gallery column classes",
                matrix.ncols(),
                column_classes.len(),
            ));
        }
        if let Some(c) = column_classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "gallery class {c} out of range 0..{num_classes}"
            )));
        }
        let matrix = normalize_columns(&matrix).map_err(|e| Error::DegenerateInput(format!("gallery: {e}")))?;
        Ok(Self {
            matrix,
            column_classes,
            num_classes,
        })
    }

    /// Restores a dictionary whose columns are already unit-norm (within
    /// 1e-9) without rescaling them.
    pub fn from_unit_columns(matrix: DMatrix<f64>, column_classes: Vec<usize>, num_classes: usize) -> Result<Self> {
        if column_classes.len() != matrix.ncols() {
            return Err(Error::dim(
                "gallery column classes",
                matrix.ncols(),
                column_classes.len(),
            ));
        }
        if let Some(c) = column_classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "gallery class {c} out of range 0..{num_classes}"
            )));
        }
        check_unit_columns("gallery", &matrix)?;
        Ok(Self {
            matrix,
            column_classes,
            num_classes,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column_classes(&self) -> &[usize] {
        &self.column_classes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of columns.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_one_per_class(&self) -> bool {
        self.column_classes.iter().copied().eq(0..self.num_classes)
    }
}

/// Unit-column variation dictionary (`m` may be zero).
#[derive(Debug, Clone, PartialEq)]
pub struct VariationDictionary {
    matrix: DMatrix<f64>,
}

impl VariationDictionary {
    /// Normalizes the columns of `matrix`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Ok(Self::empty(matrix.nrows()));
        }
        let matrix =
            normalize_columns(&matrix).map_err(|e| Error::DegenerateInput(format!("variation dictionary: {e}")))?;
        Ok(Self { matrix })
    }

    /// Restores a dictionary whose columns are already unit-norm (within 1e-9).
    pub fn from_unit_columns(matrix: DMatrix<f64>) -> Result<Self> {
        check_unit_columns("variation dictionary", &matrix)?;
        Ok(Self { matrix })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, 0),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `V·β`.
    pub fn combine(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        if beta.len() != self.len() {
            return Err(Error::dim("variation coefficients", self.len(), beta.len()));
        }
        Ok(&self.matrix * beta)
    }
}

fn check_unit_columns(what: &str, m: &DMatrix<f64>) -> Result<()> {
    for (j, c) in m.column_iter().enumerate() {
        let n = c.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidInput(format!(
                "{what} column {j} has norm {n}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Keeps columns whose norm is at least [`ZERO_COLUMN_TOL`], then normalizes.
pub fn variation_from_raw(dim: usize, raw: Vec<DVector<f64>>) -> VariationDictionary {
    let kept: Vec<DVector<f64>> = raw
        .into_iter()
        .filter(|c| c.norm() >= ZERO_COLUMN_TOL)
        .map(|c| {
            let n = c.norm();
            c / n
        })
        .collect();
    if kept.is_empty() {
        return VariationDictionary::empty(dim);
    }
    VariationDictionary {
        matrix: DMatrix::from_columns(&kept),
    }
}

/// `P = [c_1, …, c_K]`, normalized class centroids.
pub fn gallery_from_centroids(labeled: &LabeledSet) -> Result<GalleryDictionary> {
    let cols: Vec<DVector<f64>> = (0..labeled.num_classes()).map(|i| labeled.centroid(i)).collect();
    GalleryDictionary::one_per_class(DMatrix::from_columns(&cols))
}

/// `P = A`: every labeled sample, grouped by class, normalized.
pub fn gallery_from_samples(labeled: &LabeledSet) -> Result<GalleryDictionary> {
    let (stacked, owners) = labeled.stacked();
    GalleryDictionary::with_classes(stacked, owners, labeled.num_classes())
}

/// Pre-normalization deviations `A_i − c_i·1ᵀ`, class by class.
pub fn centroid_deviations(labeled: &LabeledSet) -> Vec<DMatrix<f64>> {
    labeled
        .classes()
        .iter()
        .map(|a| {
            let c = a.column_mean();
            let mut dev = a.clone();
            for mut col in dev.column_iter_mut() {
                col -= &c;
            }
            dev
        })
        .collect()
}

/// `V = [A_1 − c_1·1ᵀ, …, A_K − c_K·1ᵀ]` with zero columns dropped.
pub fn variation_centroid_subtraction(labeled: &LabeledSet) -> VariationDictionary {
    let raw = centroid_deviations(labeled)
        .into_iter()
        .flat_map(|dev| dev.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
        .collect();
    variation_from_raw(labeled.dim(), raw)
}

/// `V = [A_1⁻ − a_1*·1ᵀ, …]`: every non-prototype sample minus its class
/// prototype, where `prototype_index[i]` selects the prototype column of class i.
pub fn variation_prototype_subtraction(labeled: &LabeledSet, prototype_index: &[usize]) -> Result<VariationDictionary> {
    if prototype_index.len() != labeled.num_classes() {
        return Err(Error::dim(
            "prototype indices",
            labeled.num_classes(),
            prototype_index.len(),
        ));
    }
    let mut raw = Vec::new();
    for (i, (a, &p)) in labeled.classes().iter().zip(prototype_index).enumerate() {
        if p >= a.ncols() {
            return Err(Error::InvalidInput(format!(
                "prototype index {p} out of range for class {i} with {} samples",
                a.ncols()
            )));
        }
        let proto = a.column(p);
        raw.extend((0..a.ncols()).filter(|&j| j != p).map(|j| a.column(j) - proto));
    }
    Ok(variation_from_raw(labeled.dim(), raw))
}

/// First sample of every class as its prototype.
pub fn first_sample_prototypes(labeled: &LabeledSet) -> Vec<usize> {
    vec![0; labeled.num_classes()]
}

/// SLSPP dictionaries: `P` is the single-sample gallery `T` (one column per
/// class), `V` stacks centroid deviations of the generic dataset.
pub fn slspp_dictionaries(
    gallery: &DMatrix<f64>,
    generic: &GenericSet,
) -> Result<(GalleryDictionary, VariationDictionary)> {
    let g = generic.as_labeled();
    if gallery.nrows() != g.dim() {
        return Err(Error::dim("generic rows vs gallery rows", gallery.nrows(), g.dim()));
    }
    let p = GalleryDictionary::one_per_class(gallery.clone())?;
    Ok((p, variation_centroid_subtraction(g)))
}

/// Reads a variation dictionary from a matrix CSV (one row per line) and
/// normalizes its columns. An empty file yields `m = 0`.
pub fn load_variation_dictionary(path: impl AsRef<Path>, expected_rows: usize) -> Result<VariationDictionary> {
    let path = path.as_ref();
    match matrix_csv::read(path)? {
        None => Ok(VariationDictionary::empty(expected_rows)),
        Some(m) => {
            if m.nrows() != expected_rows {
                return Err(Error::dim(
                    format!("variation dictionary rows in {}", path.display()),
                    expected_rows,
                    m.nrows(),
                ));
            }
            VariationDictionary::new(m)
        }
    }
}

pub fn save_variation_dictionary(path: impl AsRef<Path>, v: &VariationDictionary) -> Result<()> {
    matrix_csv::write(path.as_ref(), v.matrix())
}
