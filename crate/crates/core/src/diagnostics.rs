//! Failure-mode checks: boundary oversampling, feasibility scarcity and
//! data density, plus run comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::acquisition::ConstraintSpec;
use crate::campaign::{model_training_data, CampaignState, CampaignSummary, Strategy};
use crate::experiment::{Experiment, Provenance};
use crate::gp::FitOptions;
use crate::metrics::{Metric, QualityMetrics};
use crate::mixture::{DomainSpec, MixtureRecipe};
use crate::oracle::{build_data_oracle, ValidationMethod, MIN_ROWS};
use crate::problem::ProblemSpec;

pub const SCHEMA: &str = "diagnostics_v1";
/// Scaled distance to a bound that counts as "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-3;
/// Boundary fraction above which a warning is raised.
pub const BOUNDARY_WARN: f64 = 0.5;
/// Fewer training rows than this many per input dimension is flagged.
pub const ROWS_PER_DIMENSION: usize = 10;

/// Whether any coordinate `x_i / ub_i` lies within [`BOUNDARY_TOL`] of 0
/// or 1.
pub fn on_boundary(recipe: &MixtureRecipe, domain: &DomainSpec) -> bool {
    domain
        .scaled_coordinates(recipe)
        .iter()
        .any(|&s| s <= BOUNDARY_TOL || s >= 1.0 - BOUNDARY_TOL)
}

/// Share of `proposals` on the boundary; `None` for an empty list.
pub fn boundary_fraction(proposals: &[MixtureRecipe], domain: &DomainSpec) -> Option<f64> {
    if proposals.is_empty() {
        return None;
    }
    let k = proposals.iter().filter(|r| on_boundary(r, domain)).count();
    Some(k as f64 / proposals.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticWarning {
    /// No training row meets every constraint.
    InfeasibleLikely,
    BoundaryOversampling { fraction: f64 },
    SparseData { rows: usize, dimension: usize },
    ValidationFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCount {
    pub constraint: ConstraintSpec,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingAudit {
    pub rows: usize,
    pub per_constraint: Vec<ConstraintCount>,
    /// `None` when there are no constraints.
    pub joint_feasible_count: Option<usize>,
    pub warnings: Vec<DiagnosticWarning>,
}

/// Counts rows meeting each constraint and all of them jointly, at the
/// constraints' effective thresholds.
pub fn audit_training_data(rows: &[QualityMetrics], constraints: &[ConstraintSpec]) -> TrainingAudit {
    let per_constraint = constraints
        .iter()
        .map(|c| ConstraintCount {
            constraint: *c,
            count: rows.iter().filter(|m| c.is_satisfied(m.get(c.metric))).count(),
        })
        .collect();
    let joint = (!constraints.is_empty()).then(|| {
        rows.iter()
            .filter(|m| constraints.iter().all(|c| c.is_satisfied(m.get(c.metric))))
            .count()
    });
    let mut warnings = Vec::new();
    if joint == Some(0) {
        warnings.push(DiagnosticWarning::InfeasibleLikely);
    }
    TrainingAudit {
        rows: rows.len(),
        per_constraint,
        joint_feasible_count: joint,
        warnings,
    }
}

/// Audit against the problem's Young's and impact thresholds.
pub fn audit_problem(rows: &[QualityMetrics], problem: &ProblemSpec) -> TrainingAudit {
    audit_training_data(rows, &problem.output_constraints())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRmse {
    pub metric: Metric,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub schema: String,
    pub label: String,
    pub boundary_fraction: Option<f64>,
    pub training_rows: usize,
    pub feasible_training_count: Vec<ConstraintCount>,
    pub joint_feasible_count: Option<usize>,
    pub dimension: usize,
    pub validation_rmse: Vec<MetricRmse>,
    pub warnings: Vec<DiagnosticWarning>,
}

/// Diagnostics for a campaign's current training data and proposals.
/// With `validate`, per-metric holdout RMSEs come from refitting on the
/// training rows, which costs a few GP fits.
pub fn diagnose_campaign(state: &CampaignState, validate: bool) -> DiagnosticsReport {
    let cfg = &state.config;
    let domain = cfg.domain().expect("validated at creation");
    let data = model_training_data(state, &domain);
    let rows: Vec<QualityMetrics> = (0..data.len())
        .map(|i| QualityMetrics {
            mfr: data.target(Metric::Mfr)[i],
            youngs_modulus: data.target(Metric::YoungsModulus)[i],
            impact_strength: data.target(Metric::ImpactStrength)[i],
        })
        .collect();
    let audit = audit_problem(&rows, &cfg.problem);
    let bo: Vec<MixtureRecipe> = state
        .history
        .iter()
        .filter(|e| e.provenance == Provenance::BoProposal)
        .map(|e| e.recipe)
        .collect();
    let fraction = boundary_fraction(&bo, &domain);
    let dimension = domain.feature_map().dim();
    let mut warnings = audit.warnings;
    if let Some(f) = fraction.filter(|f| *f > BOUNDARY_WARN) {
        warnings.push(DiagnosticWarning::BoundaryOversampling { fraction: f });
    }
    if data.len() < ROWS_PER_DIMENSION * dimension {
        warnings.push(DiagnosticWarning::SparseData {
            rows: data.len(),
            dimension,
        });
    }
    let mut validation_rmse = Vec::new();
    if validate && data.len() >= MIN_ROWS {
        let experiments: Vec<Experiment> = if cfg.strategy == Strategy::Run4Simplified {
            state.completed().cloned().collect()
        } else {
            cfg.historical.iter().chain(state.completed()).cloned().collect()
        };
        let fit = FitOptions {
            seed: cfg.seed,
            ..cfg.fit.clone()
        };
        match build_data_oracle(&experiments, &domain, ValidationMethod::default(), &fit, cfg.seed) {
            Ok((_, report)) => {
                validation_rmse = report
                    .per_metric
                    .iter()
                    .map(|m| MetricRmse {
                        metric: m.metric,
                        rmse: m.rmse,
                    })
                    .collect()
            }
            Err(e) => warnings.push(DiagnosticWarning::ValidationFailed { message: e.to_string() }),
        }
    }
    DiagnosticsReport {
        schema: SCHEMA.to_string(),
        label: cfg.label(),
        boundary_fraction: fraction,
        training_rows: data.len(),
        feasible_training_count: audit.per_constraint,
        joint_feasible_count: audit.joint_feasible_count,
        dimension,
        validation_rmse,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub completed: usize,
    pub feasible_count: usize,
    pub best_mfr_distance: Option<f64>,
    pub boundary_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema: String,
    pub rows: Vec<ComparisonRow>,
}

/// One row per summary, ordered by label; equal labels keep input order.
pub fn compare_runs(summaries: &[CampaignSummary]) -> Comparison {
    let mut rows: Vec<ComparisonRow> = summaries
        .iter()
        .map(|s| ComparisonRow {
            label: s.label.clone(),
            strategy: s.strategy,
            seed: s.seed,
            completed: s.completed,
            feasible_count: s.feasible_count,
            best_mfr_distance: s.best_mfr_distance,
            boundary_fraction: s.boundary_fraction,
        })
        .collect();
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    Comparison {
        schema: SCHEMA.to_string(),
        rows,
    }
}

impl Comparison {
    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.p$}"));
        let header = ["label", "strategy", "seed", "completed", "feasible", "best_|mfr-target|", "boundary_frac"];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.strategy.label().to_string(),
                    r.seed.to_string(),
                    r.completed.to_string(),
                    r.feasible_count.to_string(),
                    fmt(r.best_mfr_distance, 3),
                    fmt(r.boundary_fraction, 3),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: Vec<&str>| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(header.to_vec());
        for row in &body {
            line(row.iter().map(String::as_str).collect());
        }
        out
    }
}
