//! Closed-form response surfaces over the bounded simplex.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::metrics::QualityMetrics;
use crate::mixture::{DomainSpec, MixtureRecipe};
use crate::problem::ProblemSpec;

/// Feasible-region check: samples drawn and minimum feasible fraction.
pub const VALIDATION_SAMPLES: usize = 1_000_000;
pub const MIN_FEASIBLE_FRACTION: f64 = 1e-3;
const VALIDATION_SEED: u64 = 0x05EE_D0F0_AC1E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Exp,
    Softplus,
}

/// `coef · x_i · x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

/// `amplitude · (1 − exp(−x_component / scale))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub component: usize,
    pub amplitude: f64,
    pub scale: f64,
}

/// `link(Σ linear_i x_i + Σ quadratic_i x_i² + pairs + saturations)` over
/// the recipe fractions in component order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub linear: [f64; 4],
    #[serde(default)]
    pub quadratic: [f64; 4],
    #[serde(default)]
    pub pairwise: Vec<PairTerm>,
    #[serde(default)]
    pub saturation: Vec<Saturation>,
    pub link: Link,
}

impl Surface {
    fn validate(&self, name: &str) -> Result<(), OracleError> {
        let bad = |msg: String| OracleError::InvalidParams(format!("{name}: {msg}"));
        if self.linear.iter().chain(&self.quadratic).any(|c| !c.is_finite()) {
            return Err(bad("non-finite coefficient".into()));
        }
        for p in &self.pairwise {
            if p.i > 3 || p.j > 3 || !p.coef.is_finite() {
                return Err(bad(format!("pair term {p:?}")));
            }
        }
        for s in &self.saturation {
            if s.component > 3 || !(s.scale > 0.0) || !s.amplitude.is_finite() {
                return Err(bad(format!("saturation term {s:?}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        let mut eta = 0.0;
        for i in 0..4 {
            eta += self.linear[i] * x[i] + self.quadratic[i] * x[i] * x[i];
        }
        for p in &self.pairwise {
            eta += p.coef * x[p.i] * x[p.j];
        }
        for s in &self.saturation {
            eta += s.amplitude * -(-x[s.component] / s.scale).exp_m1();
        }
        match self.link {
            Link::Identity => eta,
            Link::Exp => eta.exp(),
            Link::Softplus => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
        }
    }
}

/// Coefficients of the three synthetic quality surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub mfr: Surface,
    pub youngs_modulus: Surface,
    pub impact_strength: Surface,
}

impl Default for SyntheticParams {
    /// MFR is a log-linear blend of the ingredient melt flows with extra
    /// thickening from filler. Stiffness is a linear blend that the
    /// elastomer undercuts. Toughness saturates in the modifier and is
    /// penalized by filler and by recycled content next to the modifier.
    fn default() -> Self {
        SyntheticParams {
            mfr: Surface {
                linear: [6f64.ln(), 35f64.ln(), 0.45f64.ln(), 4f64.ln()],
                quadratic: [0.0, 0.0, -1.9, 0.0],
                pairwise: vec![],
                saturation: vec![],
                link: Link::Exp,
            },
            youngs_modulus: Surface {
                linear: [1480.0, 1070.0, 5650.0, -2430.0],
                quadratic: [0.0; 4],
                pairwise: vec![PairTerm { i: 1, j: 3, coef: -680.0 }],
                saturation: vec![],
                link: Link::Identity,
            },
            impact_strength: Surface {
                linear: [6.2, 2.0, -13.0, 0.0],
                quadratic: [0.0; 4],
                pairwise: vec![PairTerm { i: 1, j: 3, coef: -10.0 }, PairTerm { i: 2, j: 3, coef: -15.0 }],
                saturation: vec![Saturation {
                    component: 3,
                    amplitude: 10.0,
                    scale: 0.1,
                }],
                link: Link::Softplus,
            },
        }
    }
}

/// Outcome of the dense feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCheck {
    pub samples: usize,
    pub feasible_fraction: f64,
    pub youngs_impact_correlation: f64,
}

/// A validated synthetic landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLandscape {
    params: SyntheticParams,
}

static VALIDATED: Mutex<Vec<SyntheticParams>> = Mutex::new(Vec::new());

impl SyntheticLandscape {
    /// Validates the surfaces, then checks by dense sampling of the default
    /// domain that the default problem has a feasible region. Parameter sets
    /// that already passed are remembered for the life of the process.
    pub fn new(params: SyntheticParams) -> Result<Self, OracleError> {
        params.mfr.validate("mfr")?;
        params.youngs_modulus.validate("youngs_modulus")?;
        params.impact_strength.validate("impact_strength")?;
        let landscape = SyntheticLandscape { params };
        let known = VALIDATED.lock().map(|v| v.contains(&landscape.params)).unwrap_or(false);
        if !known {
            let check = landscape.check(&ProblemSpec::default(), VALIDATION_SAMPLES)?;
            if check.feasible_fraction < MIN_FEASIBLE_FRACTION {
                return Err(OracleError::NoFeasibleRegion {
                    fraction: check.feasible_fraction,
                });
            }
            if let Ok(mut v) = VALIDATED.lock() {
                v.push(landscape.params.clone());
            }
        }
        Ok(landscape)
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    /// Noise-free metrics; no domain check.
    pub fn eval(&self, x: &[f64; 4]) -> (f64, f64, f64) {
        (
            self.params.mfr.eval(x),
            self.params.youngs_modulus.eval(x),
            self.params.impact_strength.eval(x),
        )
    }

    pub fn metrics(&self, recipe: &MixtureRecipe) -> Result<QualityMetrics, OracleError> {
        let (a, b, c) = self.eval(&recipe.to_array());
        QualityMetrics::new(a, b, c).map_err(|e| OracleError::InvalidParams(format!("surface value: {e}")))
    }

    /// Feasible fraction and Young's/impact correlation over `samples`
    /// uniform draws from the default domain.
    pub fn check(&self, problem: &ProblemSpec, samples: usize) -> Result<LandscapeCheck, OracleError> {
        let domain = DomainSpec::plain(DomainSpec::DEFAULT_UPPER_BOUNDS).expect("default bounds are valid");
        let draws = domain.sample_dirichlet_rejection(samples, [1.0; 4], VALIDATION_SEED)?;
        let mut feasible = 0usize;
        let (mut sy, mut si, mut syy, mut sii, mut syi) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in &draws.recipes {
            let (_, y, i) = self.eval(&r.to_array());
            if y >= problem.youngs_min && i >= problem.impact_min {
                feasible += 1;
            }
            sy += y;
            si += i;
            syy += y * y;
            sii += i * i;
            syi += y * i;
        }
        let n = samples as f64;
        let cov = syi / n - sy * si / (n * n);
        let corr = cov / ((syy / n - sy * sy / (n * n)).sqrt() * (sii / n - si * si / (n * n)).sqrt());
        Ok(LandscapeCheck {
            samples,
            feasible_fraction: feasible as f64 / n,
            youngs_impact_correlation: corr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_virgin_matches_formula() {
        let l = SyntheticLandscape::new(SyntheticParams::default()).unwrap();
        let (mfr, y, i) = l.eval(&[1.0, 0.0, 0.0, 0.0]);
        assert!((mfr - 6.0).abs() < 1e-12);
        assert_eq!(y, 1480.0);
        assert!((i - (6.2f64.exp()).ln_1p()).abs() < 1e-12);
    }

    #[test]
    fn params_json_roundtrip() {
        let p = SyntheticParams::default();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<SyntheticParams>(&s).unwrap(), p);
    }

    #[test]
    fn infeasible_landscape_rejected() {
        let mut p = SyntheticParams::default();
        p.impact_strength.linear = [1.0; 4];
        p.impact_strength.saturation.clear();
        assert!(matches!(
            SyntheticLandscape::new(p),
            Err(OracleError::NoFeasibleRegion { .. })
        ));
    }
}
