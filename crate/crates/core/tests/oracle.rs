use std::path::Path;

use compound_bo::experiment::{write_experiments_csv, Experiment, Provenance};
use compound_bo::gp::FitOptions;
use compound_bo::metrics::{Metric, QualityMetrics};
use compound_bo::mixture::{DomainSpec, MixtureRecipe};
use compound_bo::oracle::{
    build_data_oracle, NoiseSpec, Oracle, OracleError, OracleKind, OracleSpec, SyntheticLandscape, SyntheticParams,
    ValidationMethod,
};
use compound_bo::problem::ProblemSpec;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn domain() -> DomainSpec {
    DomainSpec::plain(DomainSpec::DEFAULT_UPPER_BOUNDS).unwrap()
}

/// The default surfaces written out term by term.
fn by_hand(x: [f64; 4]) -> (f64, f64, f64) {
    let [v, r, f, m] = x;
    let mfr = (v * 6f64.ln() + r * 35f64.ln() + f * 0.45f64.ln() + m * 4f64.ln() - 1.9 * f * f).exp();
    let youngs = 1480.0 * v + 1070.0 * r + 5650.0 * f - 2430.0 * m - 680.0 * r * m;
    let impact = softplus(6.2 * v + 2.0 * r - 13.0 * f - 10.0 * r * m - 15.0 * f * m + 10.0 * (1.0 - (-m / 0.1).exp()));
    (mfr, youngs, impact)
}

#[test]
fn synthetic_surfaces_match_the_closed_form() {
    let o = Oracle::synthetic_default();
    let pure = o.query_noiseless(&MixtureRecipe::new(1.0, 0.0, 0.0, 0.0).unwrap()).unwrap();
    assert!((pure.mfr - 6.0).abs() < 1e-12);
    assert!((pure.youngs_modulus - 1480.0).abs() < 1e-12);
    assert!((pure.impact_strength - softplus(6.2)).abs() < 1e-12);
    for r in domain().sample_dirichlet_rejection(200, [1.0; 4], 1).unwrap().recipes {
        let got = o.query_noiseless(&r).unwrap();
        let (a, b, c) = by_hand(r.to_array());
        assert!((got.mfr - a).abs() <= 1e-12 * a);
        assert!((got.youngs_modulus - b).abs() <= 1e-9);
        assert!((got.impact_strength - c).abs() <= 1e-12);
    }
}

#[test]
fn metrics_move_the_expected_way_from_the_centre() {
    let o = Oracle::synthetic_default();
    let base = [0.5, 0.3, 0.1, 0.1];
    let at = |x: [f64; 4]| o.query_noiseless(&MixtureRecipe::from_array(x).unwrap()).unwrap();
    // Shift mass from virgin polymer into one component.
    let shift = |k: usize, d: f64| {
        let mut x = base;
        x[0] -= d;
        x[k] += d;
        at(x)
    };
    let c = at(base);
    let d = 0.05;
    let filler = shift(2, d);
    assert!(filler.mfr < c.mfr);
    assert!(filler.youngs_modulus > c.youngs_modulus);
    assert!(filler.impact_strength < c.impact_strength);
    let recycled = shift(1, d);
    assert!(recycled.mfr > c.mfr);
    let modifier = shift(3, d);
    assert!(modifier.youngs_modulus < c.youngs_modulus);
    assert!(modifier.impact_strength > c.impact_strength);
}

#[test]
fn stiffness_and_toughness_trade_off() {
    let o = Oracle::synthetic_default();
    let recipes = domain().sample_dirichlet_rejection(10_000, [1.0; 4], 2).unwrap().recipes;
    let (ys, is): (Vec<f64>, Vec<f64>) = recipes
        .iter()
        .map(|r| {
            let m = o.query_noiseless(r).unwrap();
            (m.youngs_modulus, m.impact_strength)
        })
        .unzip();
    let n = ys.len() as f64;
    let (my, mi) = (ys.iter().sum::<f64>() / n, is.iter().sum::<f64>() / n);
    let cov: f64 = ys.iter().zip(&is).map(|(y, i)| (y - my) * (i - mi)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let vi: f64 = is.iter().map(|i| (i - mi).powi(2)).sum();
    let r = cov / (vy * vi).sqrt();
    assert!(r < -0.2, "correlation {r}");

    let l = SyntheticLandscape::new(SyntheticParams::default()).unwrap();
    let check = l.check(&ProblemSpec::default(), 10_000).unwrap();
    assert!(check.youngs_impact_correlation < -0.2);
    assert!(check.feasible_fraction > 0.0 && check.feasible_fraction < 0.2);
}

fn labelled(n: usize, seed: u64) -> Vec<Experiment> {
    let o = Oracle::synthetic_default();
    domain()
        .sample_dirichlet_rejection(n, [1.0; 4], seed)
        .unwrap()
        .recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| Experiment {
            id: i as u64 + 1,
            batch_index: 0,
            recipe,
            measured: Some(o.query_noiseless(&recipe).unwrap()),
            provenance: Provenance::ManualEntry,
        })
        .collect()
}

#[test]
fn data_oracle_holdout_error_is_small() {
    let rows = labelled(50, 3);
    let (oracle, report) = build_data_oracle(
        &rows,
        &domain(),
        ValidationMethod::Holdout { train_fraction: 0.85 },
        &FitOptions::default(),
        0,
    )
    .unwrap();
    assert_eq!(report.rows, 50);
    for v in &report.per_metric {
        let truth: Vec<f64> = rows.iter().map(|e| e.measured.unwrap().get(v.metric)).collect();
        let range = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - truth.iter().cloned().fold(f64::INFINITY, f64::min);
        let rmse = v.rmse.unwrap();
        assert!(rmse < 0.1 * range, "{:?}: rmse {rmse} vs range {range}", v.metric);
        assert_eq!(v.points.len(), 50 - 43);
    }
    // Training rows are reproduced closely.
    let m = oracle.metrics(&rows[0].recipe).unwrap();
    let truth = rows[0].measured.unwrap();
    assert!((m.youngs_modulus - truth.youngs_modulus).abs() < 0.02 * truth.youngs_modulus);
}

#[test]
fn data_oracle_needs_enough_rows_and_tolerates_duplicates() {
    let rows = labelled(4, 4);
    assert!(matches!(
        build_data_oracle(&rows, &domain(), ValidationMethod::default(), &FitOptions::default(), 0),
        Err(OracleError::Schema(_))
    ));
    let mut rows = labelled(12, 5);
    let dup = rows[0].clone();
    rows.push(Experiment { id: 99, ..dup });
    build_data_oracle(&rows, &domain(), ValidationMethod::Loo, &FitOptions::default(), 0).unwrap();
}

#[test]
fn data_oracle_loads_from_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut buf = Vec::new();
    write_experiments_csv(&mut buf, &labelled(20, 6)).unwrap();
    std::fs::write(dir.path().join("rows.csv"), buf).unwrap();
    let spec: OracleSpec = serde_json::from_str(r#"{"kind": "data_trained", "dataset": "rows.csv"}"#).unwrap();
    assert!(matches!(spec.kind, OracleKind::DataTrained { .. }));
    let o = Oracle::from_spec(spec.clone(), dir.path()).unwrap();
    o.query_noiseless(&MixtureRecipe::new(0.6, 0.2, 0.1, 0.1).unwrap()).unwrap();
    assert!(matches!(Oracle::from_spec(spec, Path::new("/nonexistent")), Err(OracleError::Io { .. })));
}

#[test]
fn noise_is_keyed_by_experiment_id() {
    let spec = OracleSpec {
        noise_std: Some(NoiseSpec {
            mfr: 0.3,
            youngs_modulus: 20.0,
            impact_strength: 0.4,
        }),
        seed: 8,
        ..OracleSpec::default()
    };
    let o = Oracle::from_spec(spec.clone(), Path::new(".")).unwrap();
    let again = Oracle::from_spec(spec, Path::new(".")).unwrap();
    let r = MixtureRecipe::new(0.6, 0.2, 0.1, 0.1).unwrap();
    let a: Vec<QualityMetrics> = (0..5).map(|id| o.query(&r, id).unwrap()).collect();
    let b: Vec<QualityMetrics> = (0..5).rev().map(|id| again.query(&r, id).unwrap()).rev().collect();
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    assert_ne!(a[0], o.query_noiseless(&r).unwrap());
    assert!(a.iter().all(|m| Metric::ALL.iter().all(|&k| m.get(k) > 0.0)));
}

#[test]
fn out_of_domain_queries_are_rejected() {
    let o = Oracle::synthetic_default();
    let r = MixtureRecipe::new(0.4, 0.1, 0.5, 0.0).unwrap();
    assert!(matches!(o.query_noiseless(&r), Err(OracleError::OutOfDomain(_))));
}
