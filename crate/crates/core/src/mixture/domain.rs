use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use super::{FeatureMap, MixtureError, MixtureRecipe};

/// Consecutive rejections after which sampling gives up.
pub const REJECTION_BUDGET: u64 = 1_000_000;

const FEASIBLE_TOL: f64 = 1e-12;

/// The bounded simplex `{x ≥ 0, x ≤ ub, Σx = 1}` plus the feature map used
/// for modelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpecRaw", into = "DomainSpecRaw")]
pub struct DomainSpec {
    upper_bounds: [f64; 4],
    feature_map: FeatureMap,
}

#[derive(Serialize, Deserialize)]
struct DomainSpecRaw {
    upper_bounds: [f64; 4],
    feature_map: FeatureMap,
}

impl TryFrom<DomainSpecRaw> for DomainSpec {
    type Error = MixtureError;

    fn try_from(raw: DomainSpecRaw) -> Result<Self, Self::Error> {
        DomainSpec::new(raw.upper_bounds, raw.feature_map)
    }
}

impl From<DomainSpec> for DomainSpecRaw {
    fn from(d: DomainSpec) -> Self {
        DomainSpecRaw {
            upper_bounds: d.upper_bounds,
            feature_map: d.feature_map,
        }
    }
}

impl DomainSpec {
    /// Virgin PP and recycled PP unbounded, filler ≤ 0.3, modifier ≤ 0.2.
    pub const DEFAULT_UPPER_BOUNDS: [f64; 4] = [1.0, 1.0, 0.3, 0.2];

    pub fn new(upper_bounds: [f64; 4], feature_map: FeatureMap) -> Result<Self, MixtureError> {
        if upper_bounds.iter().any(|u| !(*u > 0.0 && *u <= 1.0)) {
            return Err(MixtureError::InvalidRecipe(format!(
                "upper bounds {upper_bounds:?} must lie in (0, 1]"
            )));
        }
        if upper_bounds.iter().sum::<f64>() < 1.0 {
            return Err(MixtureError::EmptyDomain);
        }
        Ok(DomainSpec {
            upper_bounds,
            feature_map,
        })
    }

    pub fn plain(upper_bounds: [f64; 4]) -> Result<Self, MixtureError> {
        Self::new(upper_bounds, FeatureMap::Plain4d)
    }

    pub fn upper_bounds(&self) -> [f64; 4] {
        self.upper_bounds
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn with_feature_map(&self, feature_map: FeatureMap) -> Self {
        DomainSpec {
            upper_bounds: self.upper_bounds,
            feature_map,
        }
    }

    pub fn contains(&self, recipe: &MixtureRecipe) -> bool {
        self.check(recipe).is_ok()
    }

    /// Full recipe invariant check: fractions, sum and upper bounds.
    pub fn check(&self, recipe: &MixtureRecipe) -> Result<(), MixtureError> {
        let x = recipe.to_array();
        MixtureRecipe::from_array(x)?;
        for i in 0..4 {
            if x[i] > self.upper_bounds[i] {
                return Err(MixtureError::OutOfDomain(format!(
                    "{} = {} above bound {}",
                    MixtureRecipe::COMPONENTS[i],
                    x[i],
                    self.upper_bounds[i]
                )));
            }
        }
        Ok(())
    }

    fn is_feasible_array(&self, x: &[f64; 4], tol: f64) -> bool {
        x.iter().zip(&self.upper_bounds).all(|(v, u)| *v >= 0.0 && *v <= *u) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Euclidean projection onto the bounded simplex.
    ///
    /// The projection is `clip(x − λ, 0, ub)` for the unique `λ` making the
    /// coordinates sum to one; `λ` is found exactly from the sorted
    /// breakpoints of that piecewise-linear sum.
    pub fn project(&self, point: [f64; 4]) -> Result<MixtureRecipe, MixtureError> {
        if point.iter().any(|v| !v.is_finite()) {
            return Err(MixtureError::InvalidRecipe(format!("non-finite point {point:?}")));
        }
        if self.is_feasible_array(&point, FEASIBLE_TOL) {
            return Ok(MixtureRecipe::from_array_unchecked(point));
        }
        let ub = self.upper_bounds;
        let mass = |lambda: f64| -> f64 { (0..4).map(|i| (point[i] - lambda).clamp(0.0, ub[i])).sum() };
        let mut breaks: Vec<f64> = (0..4).flat_map(|i| [point[i], point[i] - ub[i]]).collect();
        breaks.sort_by(f64::total_cmp);
        // mass is non-increasing in λ: Σub at the left end, 0 at the right
        let mut lambda = breaks[0];
        let mut prev_mass = mass(breaks[0]);
        if prev_mass > 1.0 {
            for &b in &breaks[1..] {
                let m = mass(b);
                if m <= 1.0 {
                    let frac = if prev_mass > m { (prev_mass - 1.0) / (prev_mass - m) } else { 0.0 };
                    lambda += frac * (b - lambda);
                    break;
                }
                lambda = b;
                prev_mass = m;
            }
        }
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = (point[i] - lambda).clamp(0.0, ub[i]);
        }
        Ok(MixtureRecipe::from_array_unchecked(x))
    }

    /// Vertices of the bounded simplex: three coordinates at a bound, the
    /// fourth taking up the remainder.
    pub fn vertices(&self) -> Vec<MixtureRecipe> {
        let ub = self.upper_bounds;
        let mut out: Vec<[f64; 4]> = Vec::new();
        for free in 0..4 {
            for mask in 0..8u32 {
                let mut x = [0.0; 4];
                let mut k = 0;
                for (i, xi) in x.iter_mut().enumerate() {
                    if i == free {
                        continue;
                    }
                    if mask >> k & 1 == 1 {
                        *xi = ub[i];
                    }
                    k += 1;
                }
                let rest = 1.0 - x.iter().sum::<f64>();
                if rest >= -FEASIBLE_TOL && rest <= ub[free] + FEASIBLE_TOL {
                    x[free] = rest.clamp(0.0, ub[free]);
                    if !out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12)) {
                        out.push(x);
                    }
                }
            }
        }
        out.into_iter().map(MixtureRecipe::from_array_unchecked).collect()
    }

    /// Bounding box of the feature map over the domain, for GP input
    /// scaling. Every default feature is linear or linear-fractional in the
    /// recipe, so its extremes sit at vertices.
    pub fn feature_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.feature_map.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in self.vertices() {
            for (k, f) in self.feature_map.features(&v).into_iter().enumerate() {
                lo[k] = lo[k].min(f);
                hi[k] = hi[k].max(f);
            }
        }
        for k in 0..d {
            if !(hi[k] - lo[k] > 1e-12) {
                hi[k] = lo[k] + 1.0;
            }
        }
        (lo, hi)
    }

    pub fn features(&self, recipe: &MixtureRecipe) -> Vec<f64> {
        self.feature_map.features(recipe)
    }

    /// Recipe coordinates mapped to `[0, 1]` by the per-component bounds.
    pub fn scaled_coordinates(&self, recipe: &MixtureRecipe) -> [f64; 4] {
        let x = recipe.to_array();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = x[i] / self.upper_bounds[i];
        }
        out
    }

    /// Dirichlet draws conditioned on the box bounds by rejection.
    pub fn sample_dirichlet_rejection(
        &self,
        count: usize,
        alpha: [f64; 4],
        seed: u64,
    ) -> Result<SampleReport, MixtureError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(count, alpha, &mut rng)
    }

    pub fn sample_with_rng(
        &self,
        count: usize,
        alpha: [f64; 4],
        rng: &mut ChaCha8Rng,
    ) -> Result<SampleReport, MixtureError> {
        if count == 0 {
            return Err(MixtureError::InvalidRecipe("sample count must be at least 1".into()));
        }
        let dist = Dirichlet::new(alpha).map_err(|e| MixtureError::InvalidRecipe(format!("alpha {alpha:?}: {e}")))?;
        let mut recipes = Vec::with_capacity(count);
        let mut rejections = 0u64;
        let mut streak = 0u64;
        while recipes.len() < count {
            let x: [f64; 4] = dist.sample(rng);
            if x.iter().zip(&self.upper_bounds).all(|(v, u)| v <= u) {
                recipes.push(MixtureRecipe::from_array_unchecked(x));
                streak = 0;
            } else {
                rejections += 1;
                streak += 1;
                if streak >= REJECTION_BUDGET {
                    return Err(MixtureError::RejectionBudgetExceeded { rejections: streak });
                }
            }
        }
        let accepted = recipes.len() as f64;
        Ok(SampleReport {
            recipes,
            rejections,
            acceptance_rate: accepted / (accepted + rejections as f64),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub recipes: Vec<MixtureRecipe>,
    pub rejections: u64,
    pub acceptance_rate: f64,
}
