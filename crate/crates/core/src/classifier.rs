//! End-to-end pipelines: S³RC and the SRC / ESRC / SSRC baselines, all
//! sharing the same reduction, dictionaries and solver, with residual-based
//! labels.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dictionaries::{
    first_sample_prototypes, gallery_from_centroids, gallery_from_samples, load_variation_dictionary,
    variation_centroid_subtraction, variation_from_raw, variation_prototype_subtraction, GalleryDictionary, GenericSet,
    LabeledSet, VariationDictionary,
};
use crate::error::{Error, Result};
use crate::l1solver::{concat_dictionaries, solve_joint_with, SolverConfig, SparseCode};
use crate::matrixcore::{normalize_columns, normalize_vector, pca_fit_at_most, FeatureMatrix, PcaModel};
use crate::rectifier::build_rectified_set;
use crate::ssgmm::{fit_em, init_gmm, EmConfig, EmTrace, GmmModel, PriorsMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// All labeled samples as gallery, no variation dictionary.
    Src,
    /// All labeled samples as gallery plus a variation dictionary.
    Esrc,
    /// Class centroids as gallery plus a variation dictionary.
    Ssrc,
    /// Centroid gallery refined by semi-supervised EM.
    S3rc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Src, Method::Esrc, Method::Ssrc, Method::S3rc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Src => "src",
            Method::Esrc => "esrc",
            Method::Ssrc => "ssrc",
            Method::S3rc => "s3rc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?} (expected src, esrc, ssrc or s3rc)")))
    }
}

/// Where the variation dictionary comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VariationSource {
    /// Labeled samples minus their class centroid.
    Centroid,
    /// Labeled samples minus the first sample of their class.
    Prototype,
    /// Centroid deviations of a separate generic dataset.
    Generic,
    /// A matrix CSV in the raw feature space, projected by the fitted PCA.
    File(PathBuf),
}

impl fmt::Display for VariationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariationSource::Centroid => f.write_str("centroid"),
            VariationSource::Prototype => f.write_str("prototype"),
            VariationSource::Generic => f.write_str("generic"),
            VariationSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for VariationSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(Self::Centroid),
            "prototype" => Ok(Self::Prototype),
            "generic" => Ok(Self::Generic),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(Error::Config(format!(
                    "unknown variation source {s:?} (expected centroid, prototype, generic or file:<path>)"
                ))),
            },
        }
    }
}

impl Serialize for VariationSource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VariationSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which samples the PCA is fit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaFitOn {
    /// Labeled and unlabeled training samples.
    All,
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub lambda: f64,
    /// Upper bound on the number of principal components; fewer are kept
    /// when the training data has lower rank.
    pub pca_dim: usize,
    pub em: EmConfig,
    pub priors_mode: PriorsMode,
    pub variation_source: VariationSource,
    pub pca_fit_on: PcaFitOn,
    pub solver_max_iters: usize,
    pub kkt_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            method: Method::S3rc,
            lambda: solver.lambda,
            pca_dim: 300,
            em: EmConfig::default(),
            priors_mode: PriorsMode::LabeledProportion,
            variation_source: VariationSource::Centroid,
            pca_fit_on: PcaFitOn::All,
            solver_max_iters: solver.max_iters,
            kkt_tol: solver.kkt_tol,
        }
    }
}

impl PipelineConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            max_iters: self.solver_max_iters,
            kkt_tol: self.kkt_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.pca_dim == 0 {
            return Err(Error::Config("pca_dim must be at least 1".into()));
        }
        self.solver().validate()?;
        self.em.validate()?;
        if self.method == Method::Src && self.variation_source == VariationSource::Generic {
            return Err(Error::Config(
                "src uses no variation dictionary; the generic source is not applicable".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub residuals: DVector<f64>,
    pub label: usize,
    pub code: SparseCode,
}

impl ClassificationResult {
    pub fn best_residual(&self) -> f64 {
        self.residuals[self.label]
    }

    /// Smallest residual among the other classes (infinite with one class).
    pub fn second_residual(&self) -> f64 {
        self.residuals
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.label)
            .map(|(_, r)| *r)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `δ_k(α)`: keeps the coefficients of gallery columns owned by class `k`.
pub fn class_mask(alpha: &DVector<f64>, column_classes: &[usize], k: usize) -> DVector<f64> {
    DVector::from_iterator(
        alpha.len(),
        alpha
            .iter()
            .zip(column_classes)
            .map(|(a, &c)| if c == k { *a } else { 0.0 }),
    )
}

/// `r_k = ‖y − [P V]·[δ_k(α); β]‖²` for every class.
pub fn residuals(
    y: &DVector<f64>,
    gallery: &GalleryDictionary,
    variation: &VariationDictionary,
    code: &SparseCode,
) -> Result<DVector<f64>> {
    if y.len() != gallery.dim() {
        return Err(Error::dim("sample vs gallery rows", gallery.dim(), y.len()));
    }
    if code.alpha.len() != gallery.len() {
        return Err(Error::dim("gallery coefficients", gallery.len(), code.alpha.len()));
    }
    let mut base = y.clone();
    if !variation.is_empty() {
        base -= variation.combine(&code.beta)?;
    } else if !code.beta.is_empty() {
        return Err(Error::dim("variation coefficients", 0, code.beta.len()));
    }
    let mut out = DVector::zeros(gallery.num_classes());
    for (k, r) in out.iter_mut().enumerate() {
        let mut diff = base.clone();
        for (j, (&c, a)) in gallery.column_classes().iter().zip(code.alpha.iter()).enumerate() {
            if c == k && *a != 0.0 {
                diff.axpy(-a, &gallery.matrix().column(j), 1.0);
            }
        }
        *r = diff.norm_squared();
    }
    Ok(out)
}

/// Index of the smallest residual; the lowest index wins ties.
pub fn argmin_label(residuals: &DVector<f64>) -> usize {
    let mut best = 0;
    for (k, r) in residuals.iter().enumerate() {
        if *r < residuals[best] {
            best = k;
        }
    }
    best
}

/// Everything needed to classify new raw samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub config: PipelineConfig,
    pub classes: Vec<String>,
    pub pca: PcaModel,
    /// `P*` for S³RC, the initial gallery for the baselines.
    pub gallery: GalleryDictionary,
    pub variation: VariationDictionary,
    /// Learned mixture (S³RC only).
    pub gmm: Option<GmmModel>,
    pub trace: Option<EmTrace>,
    /// Training columns left out of the rectified set as degenerate.
    pub excluded: Vec<usize>,
}

impl FittedModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Classifies a sample already projected and unit-normalized.
    pub fn classify_reduced(&self, y: &DVector<f64>) -> Result<ClassificationResult> {
        let joint = concat_dictionaries(&self.gallery, &self.variation)?;
        self.classify_with(&joint, y)
    }

    fn classify_with(&self, joint: &DMatrix<f64>, y: &DVector<f64>) -> Result<ClassificationResult> {
        let code = solve_joint_with(joint, self.gallery.len(), y, &self.config.solver())?;
        let residuals = residuals(y, &self.gallery, &self.variation, &code)?;
        Ok(ClassificationResult {
            label: argmin_label(&residuals),
            residuals,
            code,
        })
    }

    /// Projects, normalizes and classifies every column of a raw D×N matrix.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<ClassificationResult>> {
        if x.ncols() == 0 {
            return Ok(Vec::new());
        }
        let reduced = self.pca.project_matrix(x)?;
        let joint = concat_dictionaries(&self.gallery, &self.variation)?;
        reduced
            .column_iter()
            .enumerate()
            .map(|(j, z)| {
                let y = normalize_vector(&z.into_owned())
                    .map_err(|_| Error::DegenerateInput(format!("sample {j} projects to the zero vector")))?;
                self.classify_with(&joint, &y).map_err(|e| tag_sample(e, j))
            })
            .collect()
    }

    pub fn predict_labels(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(self.predict(x)?.into_iter().map(|r| r.label).collect())
    }
}

fn tag_sample(e: Error, sample: usize) -> Error {
    match e {
        Error::Numerical { class, message, .. } => Error::Numerical { sample, class, message },
        other => other,
    }
}

/// Fits the configured method on `train` (labeled and unlabeled columns).
/// `generic` is required by [`VariationSource::Generic`] and must share the
/// raw feature dimension.
pub fn fit(train: &FeatureMatrix, generic: Option<&FeatureMatrix>, cfg: &PipelineConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let labeled_idx: Vec<usize> = (0..train.len()).filter(|&j| train.labels()[j].is_some()).collect();
    let unlabeled_idx: Vec<usize> = (0..train.len()).filter(|&j| train.labels()[j].is_none()).collect();
    if labeled_idx.is_empty() {
        return Err(Error::InvalidInput("training data has no labeled samples".into()));
    }

    let pca_input = match cfg.pca_fit_on {
        PcaFitOn::All => train.data().clone(),
        PcaFitOn::Labeled => train.data().select_columns(&labeled_idx),
    };
    let pca = pca_fit_at_most(&pca_input, cfg.pca_dim)?;
    let reduced = normalize_columns(&pca.project_matrix(train.data())?)
        .map_err(|e| Error::DegenerateInput(format!("after projection: {e}")))?;
    let reduced = FeatureMatrix::new(reduced, train.labels().to_vec(), train.classes().to_vec())?;
    let labeled = LabeledSet::from_features(&reduced)?;
    let unlabeled = reduced.data().select_columns(&unlabeled_idx);

    let variation = match cfg.method {
        Method::Src => VariationDictionary::empty(pca.output_dim()),
        _ => build_variation(&cfg.variation_source, &labeled, generic, &pca)?,
    };
    let gallery = match cfg.method {
        Method::Src | Method::Esrc => gallery_from_samples(&labeled)?,
        Method::Ssrc | Method::S3rc => gallery_from_centroids(&labeled)?,
    };

    let mut model = FittedModel {
        config: cfg.clone(),
        classes: train.classes().to_vec(),
        pca,
        gallery,
        variation,
        gmm: None,
        trace: None,
        excluded: Vec::new(),
    };
    if cfg.method == Method::S3rc {
        let solver = cfg.solver();
        let set = build_rectified_set(&labeled, &unlabeled, &model.gallery, &model.variation, &solver)?;
        let init = init_gmm(&set, &model.gallery, cfg.priors_mode, &cfg.em)?;
        let (gmm, trace) = fit_em(&set, &init, &cfg.em)?;
        if trace.iterations > 0 {
            model.gallery = GalleryDictionary::one_per_class(gmm.means.clone())?;
        }
        model.excluded = set.excluded().iter().map(|&j| unlabeled_idx[j]).collect();
        model.gmm = Some(gmm);
        model.trace = Some(trace);
    }
    Ok(model)
}

fn build_variation(
    source: &VariationSource,
    labeled: &LabeledSet,
    generic: Option<&FeatureMatrix>,
    pca: &PcaModel,
) -> Result<VariationDictionary> {
    match source {
        VariationSource::Centroid => Ok(variation_centroid_subtraction(labeled)),
        VariationSource::Prototype => variation_prototype_subtraction(labeled, &first_sample_prototypes(labeled)),
        VariationSource::Generic => {
            let g =
                generic.ok_or_else(|| Error::Config("the generic variation source needs a generic dataset".into()))?;
            let projected = normalize_columns(&pca.project_matrix(g.data())?)
                .map_err(|e| Error::DegenerateInput(format!("generic dataset after projection: {e}")))?;
            let set = GenericSet::from_features(&FeatureMatrix::new(
                projected,
                g.labels().to_vec(),
                g.classes().to_vec(),
            )?)?;
            Ok(variation_centroid_subtraction(set.as_labeled()))
        }
        VariationSource::File(path) => {
            let raw = load_variation_dictionary(path, pca.input_dim())?;
            // Directions, so projected without centering.
            let projected = &pca.components * raw.matrix();
            Ok(variation_from_raw(
                pca.output_dim(),
                projected.column_iter().map(|c| c.into_owned()).collect(),
            ))
        }
    }
}

/// A fitted model with the results for the classified columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub model: FittedModel,
    pub results: Vec<ClassificationResult>,
}

impl RunOutput {
    pub fn labels(&self) -> Vec<usize> {
        self.results.iter().map(|r| r.label).collect()
    }
}

/// S³RC in the transductive setting: fits on `train` and classifies its
/// unlabeled columns.
pub fn run_s3rc(train: &FeatureMatrix, generic: Option<&FeatureMatrix>, cfg: &PipelineConfig) -> Result<RunOutput> {
    let cfg = PipelineConfig {
        method: Method::S3rc,
        ..cfg.clone()
    };
    run(train, generic, &cfg)
}

/// SRC, ESRC or SSRC on the unlabeled columns of `train`.
pub fn run_baseline(
    method: Method,
    train: &FeatureMatrix,
    generic: Option<&FeatureMatrix>,
    cfg: &PipelineConfig,
) -> Result<RunOutput> {
    if method == Method::S3rc {
        return Err(Error::Config("s3rc is not a baseline; use run_s3rc".into()));
    }
    let cfg = PipelineConfig { method, ..cfg.clone() };
    run(train, generic, &cfg)
}

fn run(train: &FeatureMatrix, generic: Option<&FeatureMatrix>, cfg: &PipelineConfig) -> Result<RunOutput> {
    let model = fit(train, generic, cfg)?;
    let unlabeled: Vec<usize> = (0..train.len()).filter(|&j| train.labels()[j].is_none()).collect();
    let results = model.predict(&train.data().select_columns(&unlabeled))?;
    Ok(RunOutput { model, results })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub rate: f64,
    /// `confusion[(truth, predicted)]` counts.
    pub confusion: DMatrix<usize>,
}

pub fn evaluate(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<Evaluation> {
    if predicted.len() != truth.len() {
        return Err(Error::dim("predictions vs ground truth", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let mut confusion = DMatrix::zeros(num_classes, num_classes);
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::InvalidInput(format!("label outside 0..{num_classes}")));
        }
        confusion[(t, p)] += 1;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(Evaluation {
        correct,
        total: truth.len(),
        rate: correct as f64 / truth.len() as f64,
        confusion,
    })
}
