//! JSON model archive.
//!
//! Matrices are stored as row-major nested arrays. Unknown fields are
//! ignored on load so newer writers stay readable.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::{FittedModel, PipelineConfig};
use crate::dataio::write_atomic;
use crate::dictionaries::{GalleryDictionary, VariationDictionary};
use crate::error::{Error, Result};
use crate::matrixcore::PcaModel;
use crate::ssgmm::{CovMode, Covariance, EmTrace, GmmModel};

pub const FORMAT_VERSION: u32 = 1;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub classes: Vec<String>,
    pub config: PipelineConfig,
    pub pca: PcaRecord,
    pub gallery: GalleryRecord,
    pub variation: VariationRecord,
    pub gmm: Option<GmmRecord>,
    pub em_trace: Option<EmTrace>,
    /// Training columns dropped from the rectified set.
    #[serde(default)]
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaRecord {
    pub mean: Vec<f64>,
    /// d×D.
    pub components: Rows,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryRecord {
    pub matrix: Rows,
    pub column_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationRecord {
    /// d rows, possibly with zero columns.
    pub matrix: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceRecord {
    Identity,
    Diagonal(Vec<f64>),
    Full(Rows),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmRecord {
    pub cov_mode: CovMode,
    /// d×K, column j is the mean of class j.
    pub means: Rows,
    pub covariances: Vec<CovarianceRecord>,
    pub priors: Vec<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(what: &str, rows: &Rows) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Archive(format!(
            "{what}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Archive(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn check(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Archive(format!("{what}: expected {expected}, found {actual}")));
    }
    Ok(())
}

impl ModelArchive {
    pub fn from_model(model: &FittedModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            classes: model.classes.clone(),
            config: model.config.clone(),
            pca: PcaRecord {
                mean: model.pca.mean.as_slice().to_vec(),
                components: to_rows(&model.pca.components),
                eigenvalues: model.pca.eigenvalues.as_slice().to_vec(),
            },
            gallery: GalleryRecord {
                matrix: to_rows(model.gallery.matrix()),
                column_classes: model.gallery.column_classes().to_vec(),
            },
            variation: VariationRecord {
                matrix: to_rows(model.variation.matrix()),
            },
            gmm: model.gmm.as_ref().map(|g| GmmRecord {
                cov_mode: g.cov_mode,
                means: to_rows(&g.means),
                covariances: g
                    .covariances
                    .iter()
                    .map(|c| match c {
                        Covariance::Identity => CovarianceRecord::Identity,
                        Covariance::Diagonal(v) => CovarianceRecord::Diagonal(v.as_slice().to_vec()),
                        Covariance::Full(m) => CovarianceRecord::Full(to_rows(m)),
                    })
                    .collect(),
                priors: g.priors.as_slice().to_vec(),
            }),
            em_trace: model.trace.clone(),
            excluded: model.excluded.clone(),
        }
    }

    /// Rebuilds the model, checking that all dimensions agree.
    pub fn into_model(self) -> Result<FittedModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Archive(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let k = self.classes.len();
        if k == 0 {
            return Err(Error::Archive("no classes".into()));
        }
        let components = from_rows("pca.components", &self.pca.components)?;
        let d = components.nrows();
        check("pca.mean length", components.ncols(), self.pca.mean.len())?;
        check("pca.eigenvalues length", d, self.pca.eigenvalues.len())?;
        let pca = PcaModel {
            mean: DVector::from_vec(self.pca.mean),
            components,
            eigenvalues: DVector::from_vec(self.pca.eigenvalues),
        };

        let p = from_rows("gallery.matrix", &self.gallery.matrix)?;
        check("gallery rows", d, p.nrows())?;
        let gallery = GalleryDictionary::from_unit_columns(p, self.gallery.column_classes, k)
            .map_err(|e| Error::Archive(e.to_string()))?;

        let v = from_rows("variation.matrix", &self.variation.matrix)?;
        check("variation rows", d, v.nrows())?;
        let variation = if v.ncols() == 0 {
            VariationDictionary::empty(d)
        } else {
            VariationDictionary::from_unit_columns(v).map_err(|e| Error::Archive(e.to_string()))?
        };

        let gmm = match self.gmm {
            None => None,
            Some(g) => {
                let means = from_rows("gmm.means", &g.means)?;
                check("gmm.means rows", d, means.nrows())?;
                check("gmm.means columns", k, means.ncols())?;
                check("gmm.priors length", k, g.priors.len())?;
                check("gmm.covariances length", k, g.covariances.len())?;
                let covariances = g
                    .covariances
                    .iter()
                    .map(|c| match c {
                        CovarianceRecord::Identity => Ok(Covariance::Identity),
                        CovarianceRecord::Diagonal(v) => {
                            check("gmm diagonal covariance length", d, v.len())?;
                            Ok(Covariance::Diagonal(DVector::from_vec(v.clone())))
                        }
                        CovarianceRecord::Full(rows) => {
                            let m = from_rows("gmm full covariance", rows)?;
                            check("gmm full covariance rows", d, m.nrows())?;
                            check("gmm full covariance columns", d, m.ncols())?;
                            Ok(Covariance::Full(m))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let model = GmmModel {
                    means,
                    covariances,
                    priors: DVector::from_vec(g.priors),
                    cov_mode: g.cov_mode,
                };
                model.validate().map_err(|e| Error::Archive(e.to_string()))?;
                Some(model)
            }
        };

        Ok(FittedModel {
            config: self.config,
            classes: self.classes,
            pca,
            gallery,
            variation,
            gmm,
            trace: self.em_trace,
            excluded: self.excluded,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archive fields are serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Archive(e.to_string()))
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &FittedModel) -> Result<()> {
    write_atomic(path.as_ref(), ModelArchive::from_model(model).to_json().as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelArchive::from_json(&text)
        .map_err(|e| Error::Archive(format!("{}: {e}", path.display())))?
        .into_model()
}
