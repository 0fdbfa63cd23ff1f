use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::GpError;
use crate::scalar::Scalar;

/// Maps raw inputs to the unit box and raw targets to zero mean / unit
/// standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScalingSpec<T> {
    pub input_lower: Vec<T>,
    pub input_upper: Vec<T>,
    pub output_mean: T,
    pub output_std: T,
}

impl<T: Scalar> ScalingSpec<T> {
    pub fn new(input_lower: Vec<T>, input_upper: Vec<T>, output_mean: T, output_std: T) -> Result<Self, GpError> {
        if input_lower.len() != input_upper.len() || input_lower.is_empty() {
            return Err(GpError::InvalidScaling(format!(
                "bounds have lengths {} and {}",
                input_lower.len(),
                input_upper.len()
            )));
        }
        for (d, (lo, hi)) in input_lower.iter().zip(&input_upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(GpError::InvalidScaling(format!("feature {d}: lower {lo} is not below upper {hi}")));
            }
        }
        if !(output_std > T::zero()) || !output_mean.is_finite() {
            return Err(GpError::InvalidScaling(format!(
                "output mean {output_mean} / std {output_std} invalid"
            )));
        }
        Ok(ScalingSpec {
            input_lower,
            input_upper,
            output_mean,
            output_std,
        })
    }

    /// Builds a spec whose output part standardizes `targets` (sample standard
    /// deviation). The flag is `true` when all targets are identical, in which
    /// case the standard deviation falls back to one.
    pub fn standardizing(
        input_lower: Vec<T>,
        input_upper: Vec<T>,
        targets: &ArrayView1<T>,
    ) -> Result<(Self, bool), GpError> {
        let n = targets.len();
        if n == 0 {
            return Err(GpError::InsufficientData { needed: 1, got: 0 });
        }
        let mean = targets.sum() / T::from_usize(n).unwrap();
        let var = if n > 1 {
            targets.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / T::from_usize(n - 1).unwrap()
        } else {
            T::zero()
        };
        let std = var.sqrt();
        let degenerate = !(std > T::epsilon() * (T::one() + mean.abs()));
        let std = if degenerate { T::one() } else { std };
        Ok((Self::new(input_lower, input_upper, mean, std)?, degenerate))
    }

    /// Same input bounds, output statistics recomputed from `targets`.
    pub fn restandardized(&self, targets: &ArrayView1<T>) -> Result<(Self, bool), GpError> {
        Self::standardizing(self.input_lower.clone(), self.input_upper.clone(), targets)
    }

    pub fn dim(&self) -> usize {
        self.input_lower.len()
    }

    pub fn scale_inputs(&self, raw: &ArrayView2<T>) -> Array2<T> {
        let mut out = raw.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (d, v) in row.iter_mut().enumerate() {
                *v = (*v - self.input_lower[d]) / (self.input_upper[d] - self.input_lower[d]);
            }
        }
        out
    }

    pub fn scale_point(&self, raw: &ArrayView1<T>) -> Array1<T> {
        Array1::from_iter(
            raw.iter()
                .enumerate()
                .map(|(d, &v)| (v - self.input_lower[d]) / (self.input_upper[d] - self.input_lower[d])),
        )
    }

    pub fn unscale_inputs(&self, scaled: &ArrayView2<T>) -> Array2<T> {
        let mut out = scaled.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (d, v) in row.iter_mut().enumerate() {
                *v = self.input_lower[d] + *v * (self.input_upper[d] - self.input_lower[d]);
            }
        }
        out
    }

    pub fn standardize(&self, raw: &ArrayView1<T>) -> Array1<T> {
        raw.mapv(|y| (y - self.output_mean) / self.output_std)
    }

    pub fn unstandardize(&self, value: T) -> T {
        value * self.output_std + self.output_mean
    }

    pub fn unstandardize_std(&self, std: T) -> T {
        std * self.output_std
    }
}
