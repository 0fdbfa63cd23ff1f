use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::GpError;
use crate::scalar::Scalar;

/// ARD squared-exponential kernel parameters, in scaled input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelHyperparams<T> {
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
    pub noise_variance: T,
}

impl<T: Scalar> KernelHyperparams<T> {
    pub fn new(lengthscales: Vec<T>, signal_variance: T, noise_variance: T) -> Result<Self, GpError> {
        let hp = KernelHyperparams {
            lengthscales,
            signal_variance,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if self.lengthscales.is_empty() {
            return Err(GpError::InvalidHyperparams("no lengthscales".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > T::zero()) || !l.is_finite()) {
            return Err(GpError::InvalidHyperparams(format!("lengthscale {l} not positive")));
        }
        if !(self.signal_variance > T::zero()) || !self.signal_variance.is_finite() {
            return Err(GpError::InvalidHyperparams(format!(
                "signal variance {} not positive",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= T::zero()) || !self.noise_variance.is_finite() {
            return Err(GpError::InvalidHyperparams(format!(
                "noise variance {} negative",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[log ℓ_1, …, log ℓ_d, log σ_f², log σ_n²]`.
    pub fn to_log_vector(&self) -> Vec<T> {
        let mut v: Vec<T> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log_vector(theta: &[T]) -> Self {
        let d = theta.len() - 2;
        KernelHyperparams {
            lengthscales: theta[..d].iter().map(|u| u.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    #[inline]
    pub fn covariance(&self, a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
        let mut r2 = T::zero();
        for ((x, y), l) in a.iter().zip(b.iter()).zip(&self.lengthscales) {
            let diff = (*x - *y) / *l;
            r2 += diff * diff;
        }
        self.signal_variance * (-T::lit(0.5) * r2).exp()
    }

    /// Noise-free cross covariance `k(A, B)`.
    pub fn cross_covariance(&self, a: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::<T>::zeros((a.nrows(), b.nrows()));
        for (i, ra) in a.rows().into_iter().enumerate() {
            for (j, rb) in b.rows().into_iter().enumerate() {
                out[[i, j]] = self.covariance(&ra, &rb);
            }
        }
        out
    }

    /// Noise-free `k(A, A)`, filled symmetrically.
    pub fn gram(&self, a: &ArrayView2<T>) -> Array2<T> {
        let n = a.nrows();
        let mut out = Array2::<T>::zeros((n, n));
        for i in 0..n {
            out[[i, i]] = self.signal_variance;
            for j in 0..i {
                let v = self.covariance(&a.row(i), &a.row(j));
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        out
    }
}
