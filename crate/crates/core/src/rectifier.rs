//! Removal of linear variation from unlabeled samples and assembly of the
//! normalized rectified set that feeds the mixture model.

use nalgebra::{DMatrix, DVector};

use crate::dictionaries::{GalleryDictionary, LabeledSet, VariationDictionary};
use crate::error::{Error, Result};
use crate::l1solver::{concat_dictionaries, solve_joint_with, SolverConfig};

/// Rectified vectors with a smaller norm (before normalization) are
/// excluded from the set.
pub const DEGENERATE_NORM: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LabeledCentroid,
    UnlabeledRectified,
}

/// Columns of the rectified set: labeled block first, then unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedSet {
    matrix: DMatrix<f64>,
    labels: Vec<Option<usize>>,
    provenance: Vec<Provenance>,
    num_classes: usize,
    /// Indices (into the unlabeled input) of samples dropped as degenerate.
    excluded: Vec<usize>,
}

impl RectifiedSet {
    /// Assembles a set from explicit columns. Provenance follows the labels.
    pub fn new(matrix: DMatrix<f64>, labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        if labels.len() != matrix.ncols() {
            return Err(Error::dim("rectified labels", matrix.ncols(), labels.len()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rectified set has non-finite entries".into()));
        }
        if let Some(l) = labels.iter().flatten().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidInput(format!("label {l} outside 0..{num_classes}")));
        }
        let provenance = labels
            .iter()
            .map(|l| match l {
                Some(_) => Provenance::LabeledCentroid,
                None => Provenance::UnlabeledRectified,
            })
            .collect();
        Ok(Self {
            matrix,
            labels,
            provenance,
            num_classes,
            excluded: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn num_unlabeled(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Labeled count per class.
    pub fn labeled_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for l in self.labels.iter().flatten() {
            counts[*l] += 1;
        }
        counts
    }

    /// Reorders columns; `order` must be a permutation.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if !sorted.iter().copied().eq(0..self.len()) {
            return Err(Error::InvalidInput("column order is not a permutation".into()));
        }
        let mut out = Self::new(
            self.matrix.select_columns(order),
            order.iter().map(|&j| self.labels[j]).collect(),
            self.num_classes,
        )?;
        out.excluded = self.excluded.clone();
        Ok(out)
    }
}

/// `normalize(y − V·β)`.
pub fn rectify_unlabeled(
    y: &DVector<f64>,
    variation: &VariationDictionary,
    beta: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !variation.is_empty() && y.len() != variation.dim() {
        return Err(Error::dim("sample vs variation rows", variation.dim(), y.len()));
    }
    let rectified = if variation.is_empty() {
        y.clone()
    } else {
        y - variation.combine(beta)?
    };
    let norm = rectified.norm();
    if !(norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateInput(format!("rectified vector has norm {norm:e}")));
    }
    Ok(rectified / norm)
}

/// Builds the rectified set: every labeled sample is replaced by its
/// normalized class centroid, every unlabeled sample by its rectification
/// with `β̂` from the joint sparse code over `[P V]`.
pub fn build_rectified_set(
    labeled: &LabeledSet,
    unlabeled: &DMatrix<f64>,
    gallery: &GalleryDictionary,
    variation: &VariationDictionary,
    cfg: &SolverConfig,
) -> Result<RectifiedSet> {
    let k = labeled.num_classes();
    if gallery.num_classes() != k {
        return Err(Error::dim("gallery classes", k, gallery.num_classes()));
    }
    let dim = labeled.dim();
    if unlabeled.ncols() > 0 && unlabeled.nrows() != dim {
        return Err(Error::dim("unlabeled rows", dim, unlabeled.nrows()));
    }

    let centroids: Vec<DVector<f64>> = (0..k)
        .map(|i| {
            let c = labeled.centroid(i);
            let n = c.norm();
            if n == 0.0 {
                Err(Error::DegenerateInput(format!("class {i} has a zero centroid")))
            } else {
                Ok(c / n)
            }
        })
        .collect::<Result<_>>()?;

    let joint = concat_dictionaries(gallery, variation)?;
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(labeled.total() + unlabeled.ncols());
    let mut labels = Vec::with_capacity(columns.capacity());
    for (i, a) in labeled.classes().iter().enumerate() {
        for _ in 0..a.ncols() {
            columns.push(centroids[i].clone());
            labels.push(Some(i));
        }
    }
    let mut excluded = Vec::new();
    for (j, y) in unlabeled.column_iter().enumerate() {
        let y = y.into_owned();
        let code = solve_joint_with(&joint, gallery.len(), &y, cfg)?;
        match rectify_unlabeled(&y, variation, &code.beta) {
            Ok(r) => {
                columns.push(r);
                labels.push(None);
            }
            Err(Error::DegenerateInput(_)) => excluded.push(j),
            Err(e) => return Err(e),
        }
    }

    let matrix = if columns.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    let mut set = RectifiedSet::new(matrix, labels, k)?;
    set.excluded = excluded;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionaries::{gallery_from_centroids, variation_centroid_subtraction};
    use crate::matrixcore::normalize_columns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn empty_variation_only_normalizes() {
        let y = DVector::from_vec(vec![3.0, 4.0]);
        let r = rectify_unlabeled(&y, &VariationDictionary::empty(2), &DVector::zeros(0)).unwrap();
        assert_eq!(r, DVector::from_vec(vec![0.6, 0.8]));
    }

    #[test]
    fn unit_vector_with_zero_code_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = VariationDictionary::new(gaussian(5, 3, &mut rng)).unwrap();
        let y = DVector::from_vec(vec![0.6, 0.0, 0.8, 0.0, 0.0]);
        let r = rectify_unlabeled(&y, &v, &DVector::zeros(3)).unwrap();
        assert!((r - y).amax() < 1e-12);
    }

    #[test]
    fn fully_explained_sample_is_degenerate() {
        let v = VariationDictionary::new(DMatrix::identity(2, 2)).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(rectify_unlabeled(&y, &v, &y).is_err());
    }

    #[test]
    fn gallery_plus_variation_recovers_gallery_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GalleryDictionary::one_per_class(gaussian(30, 4, &mut rng)).unwrap();
        let v = VariationDictionary::new(gaussian(30, 6, &mut rng)).unwrap();
        let a = p.matrix().column(1).into_owned();
        let y = &a + v.matrix().column(3) * 0.5;
        let code = crate::l1solver::solve_joint(&p, &v, &y, &SolverConfig::new(1e-6)).unwrap();
        let r = rectify_unlabeled(&y, &v, &code.beta).unwrap();
        assert!((r - &a / a.norm()).amax() < 1e-5);
    }

    #[test]
    fn labeled_columns_are_class_centroids() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labeled = LabeledSet::new(vec![gaussian(6, 2, &mut rng), gaussian(6, 3, &mut rng)]).unwrap();
        let p = gallery_from_centroids(&labeled).unwrap();
        let v = variation_centroid_subtraction(&labeled);
        let set = build_rectified_set(&labeled, &DMatrix::zeros(6, 0), &p, &v, &SolverConfig::new(0.01)).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.matrix().column(0), set.matrix().column(1));
        assert_eq!(set.matrix().column(2), set.matrix().column(4));
        assert!((set.matrix().column(0) - p.matrix().column(0)).amax() < 1e-15);
        assert!(set.provenance().iter().all(|p| *p == Provenance::LabeledCentroid));
    }

    #[test]
    fn empty_variation_set_is_normalized_raw_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labeled = LabeledSet::new(vec![gaussian(4, 1, &mut rng), gaussian(4, 1, &mut rng)]).unwrap();
        let p = gallery_from_centroids(&labeled).unwrap();
        let u = gaussian(4, 7, &mut rng);
        let set = build_rectified_set(
            &labeled,
            &u,
            &p,
            &VariationDictionary::empty(4),
            &SolverConfig::new(0.01),
        )
        .unwrap();
        let expected = normalize_columns(&u).unwrap();
        assert!((set.matrix().columns(2, 7) - expected).amax() < 1e-15);
        assert_eq!(set.num_unlabeled(), 7);
    }

    #[test]
    fn degenerate_unlabeled_samples_are_excluded_and_recorded() {
        let labeled = LabeledSet::new(vec![DMatrix::from_column_slice(2, 1, &[1.0, 0.0])]).unwrap();
        let p = gallery_from_centroids(&labeled).unwrap();
        let v = VariationDictionary::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        // The second sample is exactly a variation atom and is fit perfectly at λ = 0.
        let u = DMatrix::from_column_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let set = build_rectified_set(&labeled, &u, &p, &v, &SolverConfig::new(0.0)).unwrap();
        assert_eq!(set.excluded(), &[1]);
        assert_eq!(set.len(), 2);
    }
}
