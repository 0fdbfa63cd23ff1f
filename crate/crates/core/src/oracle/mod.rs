//! Ground-truth answer sources for simulated campaigns.

mod data;
mod synthetic;

pub use data::{
    build_data_oracle, DataOracle, MetricValidation, ValidationMethod, ValidationPoint, ValidationReport, METRIC_FLOOR,
    MIN_ROWS,
};
pub use synthetic::{
    LandscapeCheck, Link, PairTerm, Saturation, Surface, SyntheticLandscape, SyntheticParams, MIN_FEASIBLE_FRACTION,
    VALIDATION_SAMPLES,
};

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{read_experiments_csv, CsvError};
use crate::gp::{FitOptions, GpError};
use crate::metrics::QualityMetrics;
use crate::mixture::{DomainSpec, FeatureMap, MixtureError, MixtureRecipe};
use crate::seeds::derive_seed;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("recipe outside the oracle domain: {0}")]
    OutOfDomain(String),
    #[error("dataset schema: {0}")]
    Schema(String),
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
    #[error("only {:.4} % of domain samples meet both constraints", fraction * 100.0)]
    NoFeasibleRegion { fraction: f64 },
    #[error(transparent)]
    Fit(#[from] GpError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Per-metric Gaussian noise standard deviations, raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mfr: f64,
    pub youngs_modulus: f64,
    pub impact_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    Synthetic {
        #[serde(default)]
        params: SyntheticParams,
    },
    DataTrained {
        /// Experiments CSV, relative paths resolved against the spec's
        /// directory.
        dataset: PathBuf,
        #[serde(default = "plain_map")]
        feature_map: FeatureMap,
        #[serde(default)]
        fit: FitOptions,
    },
}

fn plain_map() -> FeatureMap {
    FeatureMap::Plain4d
}

fn default_bounds() -> [f64; 4] {
    DomainSpec::DEFAULT_UPPER_BOUNDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(flatten)]
    pub kind: OracleKind,
    #[serde(default)]
    pub noise_std: Option<NoiseSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bounds")]
    pub upper_bounds: [f64; 4],
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            kind: OracleKind::Synthetic {
                params: SyntheticParams::default(),
            },
            noise_std: None,
            seed: 0,
            upper_bounds: default_bounds(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OracleModel {
    Synthetic(SyntheticLandscape),
    DataTrained(DataOracle),
}

/// A constructed oracle, ready for queries.
#[derive(Debug, Clone)]
pub struct Oracle {
    spec: OracleSpec,
    domain: DomainSpec,
    model: OracleModel,
}

impl Oracle {
    /// `base_dir` resolves relative dataset paths.
    pub fn from_spec(spec: OracleSpec, base_dir: &Path) -> Result<Self, OracleError> {
        if let Some(n) = spec.noise_std {
            if [n.mfr, n.youngs_modulus, n.impact_strength].iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                return Err(OracleError::InvalidParams(format!("noise {n:?} must be non-negative")));
            }
        }
        let domain = DomainSpec::plain(spec.upper_bounds)?;
        let model = match &spec.kind {
            OracleKind::Synthetic { params } => OracleModel::Synthetic(SyntheticLandscape::new(params.clone())?),
            OracleKind::DataTrained {
                dataset,
                feature_map,
                fit,
            } => {
                let path = base_dir.join(dataset);
                let file = std::fs::File::open(&path).map_err(|source| OracleError::Io {
                    path: path.clone(),
                    source,
                })?;
                let rows = read_experiments_csv(file)?;
                let dom = domain.with_feature_map(feature_map.clone());
                let (oracle, _) = build_data_oracle(&rows, &dom, ValidationMethod::default(), fit, spec.seed)?;
                OracleModel::DataTrained(oracle)
            }
        };
        Ok(Oracle { spec, domain, model })
    }

    pub fn synthetic_default() -> Self {
        Self::from_spec(OracleSpec::default(), Path::new(".")).expect("default landscape validates")
    }

    pub fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    pub fn model(&self) -> &OracleModel {
        &self.model
    }

    pub fn query_noiseless(&self, recipe: &MixtureRecipe) -> Result<QualityMetrics, OracleError> {
        self.domain
            .check(recipe)
            .map_err(|e| OracleError::OutOfDomain(e.to_string()))?;
        match &self.model {
            OracleModel::Synthetic(l) => l.metrics(recipe),
            OracleModel::DataTrained(d) => d.metrics(recipe),
        }
    }

    /// Metrics for one experiment. Noise, when configured, is drawn from a
    /// stream keyed by `(seed, experiment_id)`, so answers do not depend on
    /// query order.
    pub fn query(&self, recipe: &MixtureRecipe, experiment_id: u64) -> Result<QualityMetrics, OracleError> {
        let clean = self.query_noiseless(recipe)?;
        let Some(noise) = self.spec.noise_std else {
            return Ok(clean);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.spec.seed, experiment_id));
        let mut jitter = |v: f64, sd: f64| -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            (v + sd * z).max(METRIC_FLOOR)
        };
        Ok(QualityMetrics {
            mfr: jitter(clean.mfr, noise.mfr),
            youngs_modulus: jitter(clean.youngs_modulus, noise.youngs_modulus),
            impact_strength: jitter(clean.impact_strength, noise.impact_strength),
        })
    }
}
