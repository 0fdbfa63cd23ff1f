//! Normal-distribution special functions in log space.
//!
//! `erfc` uses the positive-term series for `erf` below [`ERFC_SWITCH`] and
//! a Lentz continued fraction for the scaled `erfcx(x) = exp(x²)·erfc(x)`
//! above it, so tail quantities never underflow before the logarithm.

use crate::scalar::Scalar;

const ERFC_SWITCH: f64 = 2.0;
const MAX_TERMS: usize = 1000;

/// `erf(x)` for `|x| < ERFC_SWITCH` from the series
/// `2/√π · exp(-x²) · Σ (2x²)ⁿ x / (1·3·…·(2n+1))`.
fn erf_series<T: Scalar>(x: T) -> T {
    let two_x2 = T::lit(2.0) * x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..MAX_TERMS {
        term = term * two_x2 / T::from_usize(2 * n + 1).unwrap();
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() {
            break;
        }
    }
    T::lit(2.0) / T::PI().sqrt() * (-x * x).exp() * sum
}

/// `exp(x²)·erfc(x)` for `x ≥ ERFC_SWITCH` via the continued fraction
/// `erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfcx_continued_fraction<T: Scalar>(x: T) -> T {
    let tiny = T::min_positive_value().sqrt();
    let mut f = x;
    let mut c = f;
    let mut d = T::zero();
    for k in 1..MAX_TERMS {
        let a = T::from_usize(k).unwrap() * T::lit(0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    T::one() / (T::PI().sqrt() * f)
}

pub fn erf<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(ERFC_SWITCH) {
        erf_series(x)
    } else {
        x.signum() * (T::one() - erfc(x.abs()))
    }
}

pub fn erfc<T: Scalar>(x: T) -> T {
    if x >= T::lit(ERFC_SWITCH) {
        erfcx_continued_fraction(x) * (-x * x).exp()
    } else if x > -T::lit(ERFC_SWITCH) {
        T::one() - erf_series(x)
    } else {
        T::lit(2.0) - erfc(-x)
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx<T: Scalar>(x: T) -> T {
    if x >= T::lit(ERFC_SWITCH) {
        erfcx_continued_fraction(x)
    } else {
        (x * x).exp() * erfc(x)
    }
}

/// Standard normal density.
pub fn norm_pdf<T: Scalar>(z: T) -> T {
    (-T::lit(0.5) * z * z).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Standard normal CDF `Φ(z)`.
pub fn norm_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::SQRT_2())
}

/// `log Φ(z)`, accurate deep into the lower tail.
pub fn log_ndtr<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        (-T::lit(0.5) * erfc(z / T::SQRT_2())).ln_1p()
    } else {
        let w = -z / T::SQRT_2();
        if w < T::lit(ERFC_SWITCH) {
            (T::lit(0.5) * erfc(w)).ln()
        } else {
            (T::lit(0.5) * erfcx_continued_fraction(w)).ln() - w * w
        }
    }
}

/// `log(1 - exp(x))` for `x < 0`.
pub fn log1mexp<T: Scalar>(x: T) -> T {
    if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(1 + exp(x))`.
pub fn log1pexp<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// `log h(z)` with `h(z) = φ(z) + z·Φ(z)`, the standardized expected
/// improvement. Uses the `erfcx` form below `z = -1` and the leading
/// asymptotic term once `z² > 1/ε`.
pub fn log_h<T: Scalar>(z: T) -> T {
    let half_log_2pi = T::lit(0.5) * (T::lit(2.0) * T::PI()).ln();
    if z > -T::one() {
        (norm_pdf(z) + z * norm_cdf(z)).ln()
    } else if z > -T::epsilon().sqrt().recip() {
        let inner = (erfcx(-z / T::SQRT_2()) * z.abs()).ln() + T::lit(0.5) * (T::PI() / T::lit(2.0)).ln();
        let inner = inner.min(-T::epsilon());
        -T::lit(0.5) * z * z - half_log_2pi + log1mexp(inner)
    } else {
        -T::lit(0.5) * z * z - half_log_2pi - T::lit(2.0) * z.abs().ln()
    }
}

/// Inverse standard normal CDF. Rational initial guess refined by one Halley
/// step against [`norm_cdf`].
pub fn norm_ppf<T: Scalar>(p: T) -> T {
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let horner = |coef: &[f64], x: T| coef.iter().fold(T::zero(), |acc, &c| acc * x + T::lit(c));
    let p_low = T::lit(0.02425);
    let x = if p < p_low {
        let q = (-T::lit(2.0) * p.ln()).sqrt();
        horner(&C, q) / (horner(&D, q) * q + T::one())
    } else if p <= T::one() - p_low {
        let q = p - T::lit(0.5);
        let r = q * q;
        horner(&A, r) * q / (horner(&B, r) * r + T::one())
    } else {
        let q = (-T::lit(2.0) * (T::one() - p).ln()).sqrt();
        -horner(&C, q) / (horner(&D, q) * q + T::one())
    };
    let e = norm_cdf(x) - p;
    let u = e * (T::lit(2.0) * T::PI()).sqrt() * (T::lit(0.5) * x * x).exp();
    x - u / (T::one() + x * u / T::lit(2.0))
}

/// `log(mean(exp(values)))`.
pub fn log_mean_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + (sum / T::from_usize(values.len()).unwrap()).ln()
}

/// `log(τ·log(1 + exp(x/τ)))`, the log of a softplus with temperature `τ`.
/// Stays finite for arbitrarily negative `x`.
pub fn log_softplus<T: Scalar>(x: T, tau: T) -> T {
    let u = x / tau;
    let inner = if u < -T::lit(30.0) {
        u
    } else if u > T::lit(30.0) {
        (u + (-u).exp().ln_1p()).ln()
    } else {
        u.exp().ln_1p().ln()
    };
    tau.ln() + inner
}
