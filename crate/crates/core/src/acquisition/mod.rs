//! Log-space acquisition functions: analytic and Monte-Carlo log expected
//! improvement, probability of feasibility, and their constrained sum.

mod nei;
mod spec;

pub use nei::{log_nei_mc, NeiContext, NeiEstimate};
pub use spec::{
    AcquisitionSpec, ConstraintKind, ConstraintSpec, ObjectiveSpec, MAX_RELAXATION_LEVEL, RELAXATION_STEP,
};

use std::io::Write;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{GpError, GpModel};
use crate::metrics::Metric;
use crate::scalar::{log_floor, Scalar, LOG_FLOOR};
use crate::special::{log1mexp, log_h, log_ndtr, norm_cdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquisitionError {
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("posterior sample is not a number")]
    NonFiniteSample,
    #[error("invalid acquisition spec: {0}")]
    InvalidSpec(String),
}

/// One independent GP per quality metric, sharing a feature space.
#[derive(Debug, Clone)]
pub struct MetricModels<T> {
    pub mfr: GpModel<T>,
    pub youngs_modulus: GpModel<T>,
    pub impact_strength: GpModel<T>,
}

impl<T: Scalar> MetricModels<T> {
    pub fn get(&self, metric: Metric) -> &GpModel<T> {
        match metric {
            Metric::Mfr => &self.mfr,
            Metric::YoungsModulus => &self.youngs_modulus,
            Metric::ImpactStrength => &self.impact_strength,
        }
    }

    pub fn dim(&self) -> usize {
        self.mfr.dim()
    }

    /// Kriging-believer update: every model gains the pseudo-observation
    /// `(x, posterior mean at x)`.
    pub fn with_fantasy(&self, raw_point: &ArrayView1<T>) -> Result<Self, GpError> {
        let x = raw_point.insert_axis(Axis(0));
        let fantasize = |m: &GpModel<T>| -> Result<GpModel<T>, GpError> {
            let (mean, _) = m.predict_raw(raw_point)?;
            m.condition_on(&x, &Array1::from_elem(1, mean).view())
        };
        Ok(MetricModels {
            mfr: fantasize(&self.mfr)?,
            youngs_modulus: fantasize(&self.youngs_modulus)?,
            impact_strength: fantasize(&self.impact_strength)?,
        })
    }
}

/// `log E[max(f − incumbent, 0)]` for `f ~ N(mean, std²)`.
pub fn log_ei_analytic<T: Scalar>(mean: T, std: T, incumbent: T) -> T {
    let floor = log_floor::<T>();
    if !(std > T::zero()) {
        let gap = mean - incumbent;
        return if gap > T::zero() { gap.ln().max(floor) } else { floor };
    }
    (log_h((mean - incumbent) / std) + std.ln()).max(floor)
}

/// `log(Φ(b) − Φ(a))` for `a < b`, stable in both tails.
pub fn log_normal_interval<T: Scalar>(a: T, b: T) -> T {
    let floor = log_floor::<T>();
    if !(a < b) {
        return floor;
    }
    let v = if a >= T::zero() {
        // upper tail: Φ(−a) − Φ(−b)
        let hi = log_ndtr(-a);
        hi + log1mexp(log_ndtr(-b) - hi)
    } else if b <= T::zero() {
        let hi = log_ndtr(b);
        hi + log1mexp(log_ndtr(a) - hi)
    } else {
        (-(norm_cdf(a) + norm_cdf(-b))).ln_1p()
    };
    if v.is_finite() {
        v.max(floor)
    } else {
        floor
    }
}

/// Log probability that one metric with posterior `N(mean, std²)` meets
/// `constraint` at its current relaxation level.
pub fn log_prob_feasible_single<T: Scalar>(mean: T, std: T, constraint: &ConstraintSpec) -> T {
    let floor = log_floor::<T>();
    if !(std > T::zero()) {
        return if constraint.is_satisfied(mean.to_f64_lossy()) { T::zero() } else { floor };
    }
    match (constraint.effective_threshold(), constraint.effective_corridor()) {
        (Some(t), _) => log_ndtr((mean - T::lit(t)) / std).max(floor),
        (_, Some((lo, hi))) => log_normal_interval((T::lit(lo) - mean) / std, (T::lit(hi) - mean) / std),
        _ => unreachable!("constraint is either a threshold or a corridor"),
    }
}

/// Per-constraint log PoF at a raw feature vector.
pub fn log_prob_feasible_terms<T: Scalar>(
    models: &MetricModels<T>,
    point: &ArrayView1<T>,
    constraints: &[ConstraintSpec],
) -> Result<Vec<T>, AcquisitionError> {
    let mut cache: [Option<(T, T)>; 3] = [None; 3];
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints {
        let slot = c.metric as usize;
        let (mean, std) = match cache[slot] {
            Some(v) => v,
            None => {
                let v = models.get(c.metric).predict_raw(point)?;
                cache[slot] = Some(v);
                v
            }
        };
        out.push(log_prob_feasible_single(mean, std, c));
    }
    Ok(out)
}

/// Sum over constraints of log PoF; independence across metrics makes the
/// joint probability a product.
pub fn log_prob_feasible<T: Scalar>(
    models: &MetricModels<T>,
    point: &ArrayView1<T>,
    constraints: &[ConstraintSpec],
) -> Result<T, AcquisitionError> {
    let terms = log_prob_feasible_terms(models, point, constraints)?;
    let floor = log_floor::<T>();
    if terms.iter().any(|t| *t <= floor) {
        return Ok(floor);
    }
    Ok(terms.into_iter().sum())
}

/// Breakdown of one constrained acquisition evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionValue {
    pub value: f64,
    pub objective_term: f64,
    pub objective_log_std_error: f64,
    /// Batch-mean log PoF, one per constraint.
    pub constraint_log_pof: Vec<f64>,
}

/// Constrained log noisy EI with the observed-set work done once.
pub struct ConstrainedAcquisition<'a, T> {
    models: &'a MetricModels<T>,
    spec: &'a AcquisitionSpec,
    nei: NeiContext<'a, T>,
}

impl<'a, T: Scalar> ConstrainedAcquisition<'a, T> {
    pub fn new(
        models: &'a MetricModels<T>,
        observed_raw: &ArrayView2<T>,
        spec: &'a AcquisitionSpec,
        max_batch: usize,
    ) -> Result<Self, AcquisitionError> {
        let constraints: Vec<(&GpModel<T>, ConstraintSpec)> =
            spec.constraints.iter().map(|c| (models.get(c.metric), *c)).collect();
        let nei = NeiContext::with_feasibility(
            models.get(spec.objective.metric()),
            observed_raw,
            spec,
            max_batch,
            &constraints,
        )?;
        Ok(ConstrainedAcquisition { models, spec, nei })
    }

    pub fn spec(&self) -> &AcquisitionSpec {
        self.spec
    }

    /// Mean over batch members of each constraint's log PoF.
    pub fn constraint_terms(&self, batch_raw: &ArrayView2<T>) -> Result<Vec<f64>, AcquisitionError> {
        let k = self.spec.constraints.len();
        let mut acc = vec![0.0; k];
        for row in batch_raw.rows() {
            let terms = log_prob_feasible_terms(self.models, &row, &self.spec.constraints)?;
            for (a, t) in acc.iter_mut().zip(terms) {
                *a += t.to_f64_lossy();
            }
        }
        let q = batch_raw.nrows() as f64;
        Ok(acc.into_iter().map(|a| (a / q).max(LOG_FLOOR)).collect())
    }

    pub fn evaluate(&self, batch_raw: &ArrayView2<T>) -> Result<AcquisitionValue, AcquisitionError> {
        let nei = self.nei.evaluate(batch_raw)?;
        let terms = self.constraint_terms(batch_raw)?;
        let value = if nei.log_value <= LOG_FLOOR || terms.iter().any(|t| *t <= LOG_FLOOR) {
            LOG_FLOOR
        } else {
            nei.log_value + terms.iter().sum::<f64>()
        };
        Ok(AcquisitionValue {
            value,
            objective_term: nei.log_value,
            objective_log_std_error: nei.log_std_error,
            constraint_log_pof: terms,
        })
    }
}

/// `log_nei_mc + mean over batch of log_prob_feasible`, or the floor when
/// either part is at the floor.
pub fn constrained_acquisition<T: Scalar>(
    models: &MetricModels<T>,
    batch_raw: &ArrayView2<T>,
    observed_raw: &ArrayView2<T>,
    spec: &AcquisitionSpec,
) -> Result<f64, AcquisitionError> {
    Ok(ConstrainedAcquisition::new(models, observed_raw, spec, batch_raw.nrows())?
        .evaluate(batch_raw)?
        .value)
}

/// One line of an acquisition trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionTrace {
    pub point: Vec<f64>,
    pub value: f64,
    pub objective_term: f64,
    pub constraint_log_pof: Vec<f64>,
}

pub fn write_traces_jsonl<W: Write>(mut out: W, traces: &[AcquisitionTrace]) -> std::io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_improvement() {
        assert_eq!(log_ei_analytic(7.0_f64, 0.0, 5.0), 2f64.ln());
        assert_eq!(log_ei_analytic(5.0_f64, 0.0, 5.0), LOG_FLOOR);
    }

    #[test]
    fn symmetric_case_is_log_pdf_at_zero() {
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((log_ei_analytic(3.0_f64, 1.0, 3.0) - want).abs() < 1e-15);
    }

    #[test]
    fn pof_at_threshold_is_half() {
        let c = ConstraintSpec::at_least(Metric::ImpactStrength, 8.0);
        assert!((log_prob_feasible_single(8.0_f64, 2.0, &c) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_prob_feasible_single(9.0, 0.0, &c), 0.0);
        assert_eq!(log_prob_feasible_single(7.0, 0.0, &c), LOG_FLOOR);
    }

    #[test]
    fn corridor_tails() {
        let c = ConstraintSpec::corridor(Metric::Mfr, 10.0, 5.0);
        let got = log_prob_feasible_single(10.0_f64, 1.0, &c);
        // log(Φ(5) − Φ(−5)), mpmath
        assert!((got - -5.7330330809669796e-7).abs() < 1e-18);
        // corridor far above / below the mean: log(Φ(−35) − Φ(−45)), mpmath
        let want = -616.97510126192251;
        let below = log_prob_feasible_single(-30.0_f64, 1.0, &c);
        let above = log_prob_feasible_single(50.0_f64, 1.0, &c);
        assert!((below - want).abs() < 1e-9, "{below}");
        assert!((above - want).abs() < 1e-9, "{above}");
    }

    #[test]
    fn relaxation_never_lowers_pof() {
        let c = ConstraintSpec::at_least(Metric::YoungsModulus, 1500.0);
        let mut prev = f64::NEG_INFINITY;
        for level in 0..=MAX_RELAXATION_LEVEL {
            let v = log_prob_feasible_single(1300.0_f64, 80.0, &c.with_level(level));
            assert!(v >= prev);
            prev = v;
        }
    }
}
