//! Seeded synthetic data with a per-class nonlinear session gap and
//! shared linear variation atoms.
//!
//! Each class `k` has a base prototype `g_k` on the unit sphere. The
//! labeled session sees `normalize(g_k + η·u_k^L)` and the unlabeled session
//! `normalize(g_k + η·u_k^U)` for random unit directions `u`. Every sample
//! adds `ρ·W·b` (two random atoms of the shared unit-column matrix `W`,
//! coefficients uniform in [−1, 1]) and Gaussian noise of std σ.
//!
//! Every class draws from its own ChaCha stream, so generation order does
//! not affect the output.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::split::{partition_pools, Protocol, Split};
use crate::error::{Error, Result};
use crate::matrixcore::{default_class_names, FeatureMatrix};

const ATOM_STREAM: u64 = u64::MAX;
const ATOMS_PER_SAMPLE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub num_atoms: usize,
    pub labeled_per_class: usize,
    pub unlabeled_per_class: usize,
    /// Nonlinear session-gap magnitude.
    pub eta: f64,
    /// Linear variation scale.
    pub rho: f64,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            dim: 50,
            num_atoms: 8,
            labeled_per_class: 2,
            unlabeled_per_class: 20,
            eta: 0.6,
            rho: 0.4,
            sigma: 0.02,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("num_classes", self.num_classes),
            ("dim", self.dim),
            ("labeled_per_class", self.labeled_per_class),
            ("unlabeled_per_class", self.unlabeled_per_class),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("eta", self.eta), ("rho", self.rho), ("sigma", self.sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.num_classes * (self.labeled_per_class + self.unlabeled_per_class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Labeled,
    Unlabeled,
}

/// Everything the generator drew. Vectors are stored as plain arrays so the
/// record serializes directly to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    /// True class of every sample, in file order.
    pub labels: Vec<usize>,
    pub sessions: Vec<Session>,
    pub base_prototypes: Vec<Vec<f64>>,
    pub labeled_prototypes: Vec<Vec<f64>>,
    pub unlabeled_prototypes: Vec<Vec<f64>>,
    /// Columns of the shared variation matrix `W`.
    pub atoms: Vec<Vec<f64>>,
    /// Sparse code `b` of every sample.
    pub codes: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// Labeled-session columns carry labels; the split of the unlabeled
    /// session follows `protocol`.
    pub fn split(&self, protocol: Protocol, test_fraction: f64, seed: u64) -> Result<Split> {
        let k = self.spec.num_classes;
        let mut labeled = Vec::new();
        let mut pools = vec![Vec::new(); k];
        for (j, (&c, s)) in self.labels.iter().zip(&self.sessions).enumerate() {
            match s {
                Session::Labeled => labeled.push(j),
                Session::Unlabeled => pools[c].push(j),
            }
        }
        let names = default_class_names(k);
        let mut out = partition_pools(names.into_iter().zip(pools).collect(), protocol, test_fraction, seed)?;
        out.labeled = labeled;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Labeled-session samples first (labeled), then unlabeled-session
    /// samples (unlabeled), class by class within each block.
    pub features: FeatureMatrix,
    pub truth: GroundTruth,
}

impl SyntheticData {
    /// The same samples with every column labeled by its true class.
    pub fn fully_labeled(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            self.features.data().clone(),
            self.truth.labels.iter().map(|&c| Some(c)).collect(),
            self.features.classes().to_vec(),
        )
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

fn session_prototype(base: &DVector<f64>, eta: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let u = unit_vector(base.len(), rng);
    if eta == 0.0 {
        return base.clone();
    }
    let shifted = base + u * eta;
    let n = shifted.norm();
    if n == 0.0 {
        base.clone()
    } else {
        shifted / n
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let d = spec.dim;
    let m = spec.num_atoms;

    let mut atom_rng = stream(spec.seed, ATOM_STREAM);
    let atoms: Vec<DVector<f64>> = (0..m).map(|_| unit_vector(d, &mut atom_rng)).collect();

    struct ClassDraw {
        base: DVector<f64>,
        proto_l: DVector<f64>,
        proto_u: DVector<f64>,
        labeled: Vec<(DVector<f64>, DVector<f64>)>,
        unlabeled: Vec<(DVector<f64>, DVector<f64>)>,
    }

    let draw_sample = |proto: &DVector<f64>, rng: &mut ChaCha8Rng| {
        let mut code = DVector::zeros(m);
        for i in sample(rng, m, ATOMS_PER_SAMPLE.min(m)).into_iter() {
            code[i] = rng.random_range(-1.0..=1.0);
        }
        let mut y = proto.clone();
        for (i, b) in code.iter().enumerate() {
            if *b != 0.0 && spec.rho != 0.0 {
                y.axpy(spec.rho * b, &atoms[i], 1.0);
            }
        }
        if spec.sigma != 0.0 {
            for v in y.iter_mut() {
                *v += spec.sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        (y, code)
    };

    let classes: Vec<ClassDraw> = (0..spec.num_classes)
        .map(|k| {
            let mut rng = stream(spec.seed, k as u64);
            let base = unit_vector(d, &mut rng);
            let proto_l = session_prototype(&base, spec.eta, &mut rng);
            let proto_u = session_prototype(&base, spec.eta, &mut rng);
            let labeled = (0..spec.labeled_per_class)
                .map(|_| draw_sample(&proto_l, &mut rng))
                .collect();
            let unlabeled = (0..spec.unlabeled_per_class)
                .map(|_| draw_sample(&proto_u, &mut rng))
                .collect();
            ClassDraw {
                base,
                proto_l,
                proto_u,
                labeled,
                unlabeled,
            }
        })
        .collect();

    let n = spec.total();
    let mut data = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    let mut true_labels = Vec::with_capacity(n);
    let mut sessions = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    let mut j = 0;
    for session in [Session::Labeled, Session::Unlabeled] {
        for (k, c) in classes.iter().enumerate() {
            let samples = match session {
                Session::Labeled => &c.labeled,
                Session::Unlabeled => &c.unlabeled,
            };
            for (y, code) in samples {
                data.set_column(j, y);
                labels.push((session == Session::Labeled).then_some(k));
                true_labels.push(k);
                sessions.push(session);
                codes.push(code.as_slice().to_vec());
                j += 1;
            }
        }
    }

    let as_vecs = |f: &dyn Fn(&ClassDraw) -> &DVector<f64>| -> Vec<Vec<f64>> {
        classes.iter().map(|c| f(c).as_slice().to_vec()).collect()
    };
    let truth = GroundTruth {
        spec: *spec,
        labels: true_labels,
        sessions,
        base_prototypes: as_vecs(&|c| &c.base),
        labeled_prototypes: as_vecs(&|c| &c.proto_l),
        unlabeled_prototypes: as_vecs(&|c| &c.proto_u),
        atoms: atoms.iter().map(|a| a.as_slice().to_vec()).collect(),
        codes,
    };
    let features = FeatureMatrix::new(data, labels, default_class_names(spec.num_classes))?;
    Ok(SyntheticData { features, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_samples_equal_base_prototype() {
        let spec = SynthSpec {
            eta: 0.0,
            rho: 0.0,
            sigma: 0.0,
            num_classes: 3,
            dim: 5,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec).unwrap();
        for (j, &k) in data.truth.labels.iter().enumerate() {
            let base = DVector::from_column_slice(&data.truth.base_prototypes[k]);
            assert_eq!(data.features.column(j), base);
        }
    }

    #[test]
    fn zero_gap_means_identical_session_prototypes() {
        let spec = SynthSpec {
            eta: 0.0,
            ..SynthSpec::default()
        };
        let t = generate_synthetic(&spec).unwrap().truth;
        assert_eq!(t.labeled_prototypes, t.unlabeled_prototypes);
        let gapped = generate_synthetic(&SynthSpec::default()).unwrap().truth;
        assert_ne!(gapped.labeled_prototypes, gapped.unlabeled_prototypes);
    }

    #[test]
    fn shape_codes_and_determinism() {
        let spec = SynthSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features.len(), spec.total());
        assert_eq!(a.features.labels().iter().filter(|l| l.is_some()).count(), 20);
        for code in &a.truth.codes {
            assert_eq!(code.iter().filter(|v| **v != 0.0).count(), 2);
        }
        let other = generate_synthetic(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.features, other.features);
    }

    #[test]
    fn class_streams_are_independent_of_class_count() {
        let small = generate_synthetic(&SynthSpec {
            num_classes: 2,
            ..SynthSpec::default()
        })
        .unwrap();
        let big = generate_synthetic(&SynthSpec {
            num_classes: 5,
            ..SynthSpec::default()
        })
        .unwrap();
        assert_eq!(small.truth.base_prototypes[..], big.truth.base_prototypes[..2]);
    }

    #[test]
    fn rejects_invalid_spec() {
        assert!(generate_synthetic(&SynthSpec {
            num_classes: 0,
            ..SynthSpec::default()
        })
        .is_err());
        assert!(generate_synthetic(&SynthSpec {
            sigma: -1.0,
            ..SynthSpec::default()
        })
        .is_err());
        assert!(generate_synthetic(&SynthSpec {
            num_atoms: 0,
            ..SynthSpec::default()
        })
        .is_ok());
    }

    #[test]
    fn session_split() {
        let data = generate_synthetic(&SynthSpec::default()).unwrap();
        let s = data.truth.split(Protocol::Transductive, 0.5, 1).unwrap();
        assert_eq!(s.labeled, (0..20).collect::<Vec<_>>());
        assert_eq!(s.test, (20..220).collect::<Vec<_>>());
        let s = data.truth.split(Protocol::Inductive, 0.5, 1).unwrap();
        assert_eq!(s.test.len(), 100);
        assert_eq!(s.unlabeled_train.len(), 100);
    }
}
