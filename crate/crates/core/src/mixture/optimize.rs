//! Sequential-greedy batch construction over the bounded simplex.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DomainSpec, MixtureError, MixtureRecipe};
use crate::acquisition::{AcquisitionSpec, AcquisitionTrace, AcquisitionValue, ConstrainedAcquisition, ConstraintSpec, MetricModels};
use crate::seeds::derive_seed;
use crate::LOG_FLOOR;

/// A start whose joint probability of feasibility is below this is
/// considered hopeless.
pub const MIN_START_POF: f64 = 1e-6;
/// Batch members closer than this count as the same point.
pub const DISTINCT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Starts refined by projected ascent, per batch member.
    pub starts: usize,
    /// Dirichlet draws screened to pick the starts.
    pub raw_samples: usize,
    pub max_iterations: usize,
    /// Central-difference step as a fraction of each component's bound.
    pub gradient_step: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            starts: 64,
            raw_samples: 256,
            max_iterations: 100,
            gradient_step: 1e-4,
            initial_step: 0.05,
            seed: 0,
        }
    }
}

/// Best probability of feasibility reached for one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPof {
    pub constraint: ConstraintSpec,
    pub best_pof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Maximum over screened starts of the joint log PoF.
    pub best_joint_log_pof: f64,
    pub per_constraint: Vec<ConstraintPof>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchProposal {
    pub recipes: Vec<MixtureRecipe>,
    pub values: Vec<AcquisitionValue>,
    /// Report from the first batch member's screening.
    pub feasibility: FeasibilityReport,
    pub traces: Vec<AcquisitionTrace>,
}

struct Candidate {
    recipe: MixtureRecipe,
    value: AcquisitionValue,
}

fn evaluate(
    acq: &ConstrainedAcquisition<'_, f64>,
    domain: &DomainSpec,
    recipe: &MixtureRecipe,
) -> Result<AcquisitionValue, MixtureError> {
    let f = domain.features(recipe);
    let x = Array2::from_shape_vec((1, f.len()), f).expect("one row");
    Ok(acq.evaluate(&x.view())?)
}

/// Projected ascent on `x ↦ acq(features(P(x)))` from one start.
fn ascend(
    acq: &ConstrainedAcquisition<'_, f64>,
    domain: &DomainSpec,
    start: Candidate,
    options: &OptimizerOptions,
) -> Result<Candidate, MixtureError> {
    let ub = domain.upper_bounds();
    let mut best = start;
    if best.value.value <= LOG_FLOOR {
        return Ok(best);
    }
    let mut step = options.initial_step;
    let at = |x: [f64; 4]| -> Result<(MixtureRecipe, AcquisitionValue), MixtureError> {
        let r = domain.project(x)?;
        let v = evaluate(acq, domain, &r)?;
        Ok((r, v))
    };
    for _ in 0..options.max_iterations {
        let x = best.recipe.to_array();
        let mut grad = [0.0; 4];
        for i in 0..4 {
            let h = options.gradient_step * ub[i];
            let mut up = x;
            let mut dn = x;
            up[i] += h;
            dn[i] -= h;
            grad[i] = (at(up)?.1.value - at(dn)?.1.value) / (2.0 * h);
        }
        // tangent to Σx = 1
        let mean = grad.iter().sum::<f64>() / 4.0;
        let mut dir = grad.map(|g| g - mean);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        dir = dir.map(|v| v / norm);
        let mut moved = None;
        while step > 1e-10 {
            let mut trial = x;
            for i in 0..4 {
                trial[i] += step * dir[i];
            }
            let (r, v) = at(trial)?;
            if v.value > best.value.value {
                moved = Some(Candidate { recipe: r, value: v });
                break;
            }
            step *= 0.5;
        }
        let Some(next) = moved else { break };
        let displacement = next.recipe.distance(&best.recipe);
        best = next;
        if displacement < 1e-9 {
            break;
        }
        step = (step * 2.0).min(options.initial_step * 4.0);
    }
    Ok(best)
}

/// Builds a batch of `batch_size` recipes by sequential greedy maximization
/// of the constrained acquisition, conditioning the models on each chosen
/// member's posterior mean before choosing the next.
///
/// The incumbent set for noisy EI is the objective model's training inputs,
/// which includes earlier fantasies.
pub fn optimize_acquisition(
    models: &MetricModels<f64>,
    spec: &AcquisitionSpec,
    domain: &DomainSpec,
    batch_size: usize,
    options: &OptimizerOptions,
) -> Result<BatchProposal, MixtureError> {
    if batch_size == 0 {
        return Err(MixtureError::InvalidRecipe("batch size must be at least 1".into()));
    }
    if models.dim() != domain.feature_map().dim() {
        return Err(MixtureError::InvalidRecipe(format!(
            "models expect {} features, domain produces {}",
            models.dim(),
            domain.feature_map().dim()
        )));
    }
    let mut current = models.clone();
    let mut recipes: Vec<MixtureRecipe> = Vec::with_capacity(batch_size);
    let mut values = Vec::with_capacity(batch_size);
    let mut traces = Vec::new();
    let mut first_report = None;
    for member in 0..batch_size {
        let observed = current.get(spec.objective.metric()).raw_train_inputs();
        let acq = ConstrainedAcquisition::new(&current, &observed.view(), spec, 1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, member as u64));
        let screen = domain.sample_with_rng(options.raw_samples.max(options.starts).max(1), [1.0; 4], &mut rng)?;

        let k = spec.constraints.len();
        let mut best_joint = f64::NEG_INFINITY;
        let mut best_each = vec![f64::NEG_INFINITY; k];
        let mut screened = Vec::with_capacity(screen.recipes.len());
        for r in screen.recipes {
            let v = evaluate(&acq, domain, &r)?;
            let joint: f64 = v.constraint_log_pof.iter().sum();
            best_joint = best_joint.max(joint.max(LOG_FLOOR));
            for (b, t) in best_each.iter_mut().zip(&v.constraint_log_pof) {
                *b = b.max(*t);
            }
            screened.push(Candidate { recipe: r, value: v });
        }
        let report = FeasibilityReport {
            best_joint_log_pof: if k == 0 { 0.0 } else { best_joint },
            per_constraint: spec
                .constraints
                .iter()
                .zip(&best_each)
                .map(|(c, b)| ConstraintPof {
                    constraint: *c,
                    best_pof: b.exp(),
                })
                .collect(),
        };
        if k > 0 && best_joint < MIN_START_POF.ln() {
            return Err(MixtureError::AllStartsInfeasible { report });
        }
        if first_report.is_none() {
            first_report = Some(report);
        }

        // stable sort keeps draw order among ties
        screened.sort_by(|a, b| b.value.value.total_cmp(&a.value.value));
        let rest = screened.split_off(options.starts.min(screened.len()));
        let mut finals = Vec::with_capacity(screened.len());
        for start in screened {
            finals.push(ascend(&acq, domain, start, options)?);
        }
        finals.sort_by(|a, b| b.value.value.total_cmp(&a.value.value));
        let chosen = finals
            .into_iter()
            .chain(rest)
            .find(|c| recipes.iter().all(|r| r.distance(&c.recipe) > DISTINCT_TOL))
            .ok_or_else(|| MixtureError::InvalidRecipe("no distinct batch member found".into()))?;

        let features = domain.features(&chosen.recipe);
        traces.push(AcquisitionTrace {
            point: features.clone(),
            value: chosen.value.value,
            objective_term: chosen.value.objective_term,
            constraint_log_pof: chosen.value.constraint_log_pof.clone(),
        });
        if member + 1 < batch_size {
            let x = ndarray::Array1::from(features);
            current = current.with_fantasy(&x.view()).map_err(crate::acquisition::AcquisitionError::from)?;
        }
        debug_assert!(domain.contains(&chosen.recipe));
        recipes.push(chosen.recipe);
        values.push(chosen.value);
    }
    Ok(BatchProposal {
        recipes,
        values,
        feasibility: first_report.expect("at least one member"),
        traces,
    })
}
