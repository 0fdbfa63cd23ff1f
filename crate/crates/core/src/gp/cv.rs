use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{fit, FitOptions, GpError, ScalingSpec};
use crate::scalar::Scalar;

/// Held-out prediction for one fold, raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooFold {
    pub index: usize,
    pub target: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Set when refitting without this point failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub folds: Vec<LooFold>,
    /// Over the folds that succeeded; `None` if none did.
    pub rmse: Option<f64>,
}

/// Leave-one-out cross-validation: refit on every `n − 1` subset with the
/// same options and predict the held-out point.
pub fn loo_cv<T: Scalar>(
    raw_inputs: &ArrayView2<T>,
    raw_targets: &ArrayView1<T>,
    scaling: &ScalingSpec<T>,
    options: &FitOptions,
) -> Result<LooReport, GpError> {
    let n = raw_targets.len();
    if n < 3 {
        return Err(GpError::InsufficientData { needed: 3, got: n });
    }
    let mut folds = Vec::with_capacity(n);
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let x = raw_inputs.select(Axis(0), &keep);
        let y: Array1<T> = raw_targets.select(Axis(0), &keep);
        let target = raw_targets[i].to_f64_lossy();
        let held = raw_inputs.row(i);
        let outcome = fit(&x.view(), &y.view(), scaling, options).and_then(|m| m.predict_raw(&held));
        folds.push(match outcome {
            Ok((mean, std)) => LooFold {
                index: i,
                target,
                mean: Some(mean.to_f64_lossy()),
                std: Some(std.to_f64_lossy()),
                error: None,
            },
            Err(e) => LooFold {
                index: i,
                target,
                mean: None,
                std: None,
                error: Some(e.to_string()),
            },
        });
    }
    let errs: Vec<f64> = folds.iter().filter_map(|f| f.mean.map(|m| m - f.target)).collect();
    let rmse = (!errs.is_empty()).then(|| (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt());
    Ok(LooReport { folds, rmse })
}
