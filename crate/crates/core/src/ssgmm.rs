//! Semi-supervised Gaussian mixture over the rectified set.
//!
//! Labeled columns have their responsibilities clamped to their label;
//! unlabeled columns get posterior responsibilities. The model holds one
//! Gaussian per class whose mean is that class's learned prototype.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionaries::GalleryDictionary;
use crate::error::{Error, Result};
use crate::rectifier::RectifiedSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovMode {
    /// Σ_j = I throughout; only means and priors are learned.
    Identity,
    /// Per-dimension variances with a floor.
    Diagonal,
    /// Full weighted scatter with eigenvalues clipped below at `ridge`.
    Full,
}

impl std::str::FromStr for CovMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "diagonal" => Ok(Self::Diagonal),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!("unknown covariance mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorsMode {
    /// π_j = n_j / n over labeled samples.
    LabeledProportion,
    /// π_j = 1 / K.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Identity,
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl Covariance {
    fn identity_like(mode: CovMode, dim: usize) -> Self {
        match mode {
            CovMode::Identity => Covariance::Identity,
            CovMode::Diagonal => Covariance::Diagonal(DVector::from_element(dim, 1.0)),
            CovMode::Full => Covariance::Full(DMatrix::identity(dim, dim)),
        }
    }

    /// Dense form, for reporting and serialization.
    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Covariance::Identity => DMatrix::identity(dim, dim),
            Covariance::Diagonal(v) => DMatrix::from_diagonal(v),
            Covariance::Full(m) => m.clone(),
        }
    }

    /// Smallest diagonal entry (diagonal) or eigenvalue (full).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Covariance::Identity => 1.0,
            Covariance::Diagonal(v) => v.min(),
            Covariance::Full(m) => m.clone().symmetric_eigenvalues().min(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Relative log-likelihood change `|Δℓ| / (|ℓ| + 1)` that stops EM.
    pub rel_tol: f64,
    pub cov_mode: CovMode,
    /// Lower bound on diagonal variances.
    pub variance_floor: f64,
    /// Eigenvalue floor for full covariances.
    pub ridge: f64,
    pub prior_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-5,
            cov_mode: CovMode::Diagonal,
            variance_floor: 1e-6,
            ridge: 1e-3,
            prior_floor: 1e-8,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("variance_floor", self.variance_floor),
            ("ridge", self.ridge),
            ("prior_floor", self.prior_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    /// d×K, column j is the prototype of class j.
    pub means: DMatrix<f64>,
    pub covariances: Vec<Covariance>,
    pub priors: DVector<f64>,
    pub cov_mode: CovMode,
}

impl GmmModel {
    pub fn num_classes(&self) -> usize {
        self.means.ncols()
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes();
        if self.covariances.len() != k || self.priors.len() != k {
            return Err(Error::dim(
                "gmm components",
                k,
                self.covariances.len().min(self.priors.len()),
            ));
        }
        if self.priors.iter().any(|p| !(*p >= 0.0)) || (self.priors.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput("gmm priors are not on the simplex".into()));
        }
        Ok(())
    }
}

/// N×K responsibilities, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix {
    z: DMatrix<f64>,
}

impl ResponsibilityMatrix {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        for (i, row) in z.row_iter().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) || (row.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!("responsibility row {i} is not stochastic")));
            }
        }
        Ok(Self { z })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[(i, j)]
    }

    pub fn nrows(&self) -> usize {
        self.z.nrows()
    }
}

/// Per-class precomputation for evaluating `log N(y | a, Σ)`.
enum Precision {
    Identity,
    Diagonal(DVector<f64>),
    /// Lower Cholesky factor of Σ.
    Full(DMatrix<f64>),
}

struct ClassDensity {
    precision: Precision,
    /// `−½(d·log 2π + log|Σ|)`.
    log_norm: f64,
}

impl ClassDensity {
    fn new(cov: &Covariance, dim: usize, class: usize) -> Result<Self> {
        let base = dim as f64 * (2.0 * PI).ln();
        let numerical = |message: String| Error::Numerical {
            sample: 0,
            class,
            message,
        };
        let (precision, log_det) = match cov {
            Covariance::Identity => (Precision::Identity, 0.0),
            Covariance::Diagonal(v) => {
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(numerical("non-positive variance".into()));
                }
                (Precision::Diagonal(v.map(|x| 1.0 / x)), v.iter().map(|x| x.ln()).sum())
            }
            Covariance::Full(m) => {
                let ch = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| numerical("covariance is not positive definite".into()))?;
                let l = ch.unpack();
                let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
                (Precision::Full(l), log_det)
            }
        };
        Ok(Self {
            precision,
            log_norm: -0.5 * (base + log_det),
        })
    }

    fn log_density(&self, y: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        let diff = y - mean;
        let maha = match &self.precision {
            Precision::Identity => diff.norm_squared(),
            Precision::Diagonal(inv) => diff.iter().zip(inv.iter()).map(|(d, p)| d * d * p).sum(),
            Precision::Full(l) => {
                let z = l
                    .solve_lower_triangular(&diff)
                    .expect("cholesky factor has positive diagonal");
                z.norm_squared()
            }
        };
        self.log_norm - 0.5 * maha
    }
}

/// `log π_j + log N(ŷ_i | a_j, Σ_j)` for every sample and class.
fn log_joint(model: &GmmModel, set: &RectifiedSet) -> Result<DMatrix<f64>> {
    let k = model.num_classes();
    if set.dim() != model.dim() {
        return Err(Error::dim(
            "rectified set rows vs gmm dimension",
            model.dim(),
            set.dim(),
        ));
    }
    if set.num_classes() != k {
        return Err(Error::dim("rectified set classes", k, set.num_classes()));
    }
    let densities: Vec<ClassDensity> = model
        .covariances
        .iter()
        .enumerate()
        .map(|(j, c)| ClassDensity::new(c, model.dim(), j))
        .collect::<Result<_>>()?;
    let means: Vec<DVector<f64>> = model.means.column_iter().map(|c| c.into_owned()).collect();
    let log_priors: Vec<f64> = model.priors.iter().map(|p| p.ln()).collect();

    let mut out = DMatrix::zeros(set.len(), k);
    for (i, y) in set.matrix().column_iter().enumerate() {
        let y = y.into_owned();
        for j in 0..k {
            let v = log_priors[j] + densities[j].log_density(&y, &means[j]);
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Numerical {
                    sample: i,
                    class: j,
                    message: format!("log density is {v}"),
                });
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// `log Σ exp(x)` with the maximum subtracted first.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Means from the gallery columns, identity-like covariances, and priors
/// from labeled proportions or uniform.
pub fn init_gmm(
    set: &RectifiedSet,
    gallery: &GalleryDictionary,
    priors_mode: PriorsMode,
    cfg: &EmConfig,
) -> Result<GmmModel> {
    if !gallery.is_one_per_class() {
        return Err(Error::InvalidInput(
            "gmm initialization needs one gallery column per class".into(),
        ));
    }
    let k = gallery.num_classes();
    if set.num_classes() != k {
        return Err(Error::dim("gmm classes vs rectified set classes", set.num_classes(), k));
    }
    if set.dim() != gallery.dim() {
        return Err(Error::dim(
            "gallery rows vs rectified set rows",
            set.dim(),
            gallery.dim(),
        ));
    }
    let priors = match priors_mode {
        PriorsMode::Uniform => DVector::from_element(k, 1.0 / k as f64),
        PriorsMode::LabeledProportion => {
            let counts = set.labeled_counts();
            let n: usize = counts.iter().sum();
            if n == 0 {
                return Err(Error::InvalidInput("proportional priors need labeled samples".into()));
            }
            floor_priors(
                DVector::from_iterator(k, counts.iter().map(|&c| c as f64 / n as f64)),
                cfg.prior_floor,
            )
        }
    };
    Ok(GmmModel {
        means: gallery.matrix().clone(),
        covariances: vec![Covariance::identity_like(cfg.cov_mode, gallery.dim()); k],
        priors,
        cov_mode: cfg.cov_mode,
    })
}

/// Closest covariance (in likelihood) with every eigenvalue at least `floor`.
fn clip_eigenvalues(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= floor {
        return cov;
    }
    let clipped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(floor)));
    let mut out = &eig.eigenvectors * clipped * eig.eigenvectors.transpose();
    out.fill_upper_triangle_with_lower_triangle();
    out
}

fn floor_priors(p: DVector<f64>, floor: f64) -> DVector<f64> {
    if p.iter().all(|v| *v >= floor) {
        return p;
    }
    let floored = p.map(|v| v.max(floor));
    let s = floored.sum();
    floored / s
}

/// Responsibilities: one-hot for labeled columns, normalized posteriors
/// (log domain) for unlabeled ones.
pub fn e_step(model: &GmmModel, set: &RectifiedSet) -> Result<ResponsibilityMatrix> {
    let logs = log_joint(model, set)?;
    let k = model.num_classes();
    let mut z = DMatrix::zeros(set.len(), k);
    for (i, label) in set.labels().iter().enumerate() {
        match label {
            Some(l) => z[(i, *l)] = 1.0,
            None => {
                let row = logs.row(i);
                let lse = log_sum_exp(row.iter().copied());
                if !lse.is_finite() {
                    return Err(Error::Numerical {
                        sample: i,
                        class: 0,
                        message: "all class densities underflow".into(),
                    });
                }
                for j in 0..k {
                    z[(i, j)] = (row[j] - lse).exp();
                }
            }
        }
    }
    Ok(ResponsibilityMatrix { z })
}

/// Weighted priors, means and covariances. Classes whose total
/// responsibility falls below `prior_floor·N` keep `prev`'s mean and
/// covariance with prior `prior_floor`.
pub fn m_step(set: &RectifiedSet, resp: &ResponsibilityMatrix, cfg: &EmConfig, prev: &GmmModel) -> Result<GmmModel> {
    let n = set.len();
    let k = prev.num_classes();
    let dim = set.dim();
    if resp.nrows() != n || resp.z.ncols() != k {
        return Err(Error::dim("responsibility rows", n, resp.nrows()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("m-step on an empty set".into()));
    }
    let y = set.matrix();
    let mut means = prev.means.clone();
    let mut covariances = prev.covariances.clone();
    let mut priors = DVector::zeros(k);

    for j in 0..k {
        let weights = resp.z.column(j);
        let mass: f64 = weights.iter().sum();
        if mass < cfg.prior_floor * n as f64 {
            priors[j] = cfg.prior_floor;
            continue;
        }
        priors[j] = mass / n as f64;

        let mut mean = DVector::zeros(dim);
        for (i, w) in weights.iter().enumerate() {
            if *w != 0.0 {
                mean.axpy(*w, &y.column(i), 1.0);
            }
        }
        mean /= mass;

        covariances[j] = match cfg.cov_mode {
            CovMode::Identity => Covariance::Identity,
            CovMode::Diagonal => {
                let mut var: DVector<f64> = DVector::zeros(dim);
                for (i, w) in weights.iter().enumerate() {
                    if *w != 0.0 {
                        for r in 0..dim {
                            let d = y[(r, i)] - mean[r];
                            var[r] += w * d * d;
                        }
                    }
                }
                Covariance::Diagonal(var.map(|v| (v / mass).max(cfg.variance_floor)))
            }
            CovMode::Full => {
                let mut scatter = DMatrix::zeros(dim, dim);
                for (i, w) in weights.iter().enumerate() {
                    if *w != 0.0 {
                        let d = y.column(i) - &mean;
                        scatter.syger(*w, &d, &d, 1.0);
                    }
                }
                let mut cov = scatter / mass;
                cov.fill_upper_triangle_with_lower_triangle();
                Covariance::Full(clip_eigenvalues(cov, cfg.ridge))
            }
        };
        means.set_column(j, &mean);
    }

    let s = priors.sum();
    Ok(GmmModel {
        means,
        covariances,
        priors: priors / s,
        cov_mode: cfg.cov_mode,
    })
}

/// Labeled terms `log π_l N(ŷ | a_l, Σ_l)` plus unlabeled terms
/// `log Σ_j π_j N(ŷ | a_j, Σ_j)`.
pub fn log_likelihood(model: &GmmModel, set: &RectifiedSet) -> Result<f64> {
    let logs = log_joint(model, set)?;
    let mut total = 0.0;
    for (i, label) in set.labels().iter().enumerate() {
        let term = match label {
            Some(l) => logs[(i, *l)],
            None => log_sum_exp(logs.row(i).iter().copied()),
        };
        if !term.is_finite() {
            return Err(Error::Numerical {
                sample: i,
                class: label.unwrap_or(0),
                message: format!("log-likelihood term is {term}"),
            });
        }
        total += term;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    /// Log-likelihood of the initial model followed by one entry per iteration.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates E and M steps until the relative log-likelihood change drops
/// below `rel_tol`, the responsibilities stop changing, or `max_iters`.
pub fn fit_em(set: &RectifiedSet, init: &GmmModel, cfg: &EmConfig) -> Result<(GmmModel, EmTrace)> {
    cfg.validate()?;
    init.validate()?;
    let mut model = init.clone();
    let mut ll = log_likelihood(&model, set)?;
    let mut trace = EmTrace {
        log_likelihoods: vec![ll],
        iterations: 0,
        converged: false,
    };
    let mut prev_resp: Option<ResponsibilityMatrix> = None;

    for it in 1..=cfg.max_iters {
        let resp = e_step(&model, set)?;
        if prev_resp.as_ref() == Some(&resp) {
            // Same responsibilities give the same M-step: fixed point.
            trace.converged = true;
            break;
        }
        model = m_step(set, &resp, cfg, &model)?;
        let next = log_likelihood(&model, set)?;
        trace.log_likelihoods.push(next);
        trace.iterations = it;
        let rel = (next - ll).abs() / (next.abs() + 1.0);
        ll = next;
        if rel < cfg.rel_tol {
            trace.converged = true;
            break;
        }
        prev_resp = Some(resp);
    }
    Ok((model, trace))
}
