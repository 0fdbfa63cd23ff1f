use compound_bo::campaign::{
    simulate, Campaign, CampaignConfig, CampaignError, Event, ExperimentResult, Status, Strategy,
};
use compound_bo::experiment::Experiment;
use compound_bo::metrics::{Metric, QualityMetrics};
use compound_bo::oracle::Oracle;
use compound_bo::problem::ProblemSpec;

mod common;

use common::low_impact_history;

fn results(batch: &[Experiment], f: impl Fn(usize) -> QualityMetrics) -> Vec<ExperimentResult> {
    batch
        .iter()
        .enumerate()
        .map(|(k, e)| ExperimentResult { id: e.id, metrics: f(k) })
        .collect()
}

fn metrics(mfr: f64, youngs: f64, impact: f64) -> QualityMetrics {
    QualityMetrics::new(mfr, youngs, impact).unwrap()
}

fn random_only(seed: u64, schedule: Vec<usize>) -> Campaign {
    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, seed);
    cfg.schedule = schedule;
    Campaign::create(cfg).unwrap()
}

#[test]
fn partial_batches_are_rejected_without_changing_state() {
    let mut c = random_only(1, vec![4, 2]);
    let batch = c.propose(None).unwrap();
    assert_eq!(c.state().status, Status::AwaitingResults);
    let before = (c.state().clone(), c.events().len());
    let partial = results(&batch[..3], |_| metrics(10.0, 1600.0, 9.0));
    match c.record(partial, None) {
        Err(CampaignError::IncompleteBatch { missing }) => assert_eq!(missing, vec![batch[3].id]),
        other => panic!("expected an incomplete batch, got {other:?}"),
    }
    assert_eq!((c.state().clone(), c.events().len()), before);

    let unknown = vec![ExperimentResult {
        id: 999,
        metrics: metrics(10.0, 1600.0, 9.0),
    }];
    assert!(matches!(c.record(unknown, None), Err(CampaignError::UnknownExperiment { id: 999 })));

    c.record(results(&batch, |_| metrics(10.0, 1600.0, 9.0)), None).unwrap();
    assert_eq!(c.state().status, Status::ReadyToPropose);
    assert_eq!(c.state().batch_index, 1);
    assert!(matches!(c.record(Vec::new(), None), Err(CampaignError::WrongStatus { .. })));
}

#[test]
fn final_batch_completes_the_campaign() {
    let oracle = Oracle::synthetic_default();
    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, 5);
    cfg.schedule = vec![10, 2];
    let mut c = Campaign::create(cfg).unwrap();
    c.run_to_completion(&oracle).unwrap();
    assert_eq!(c.state().status, Status::Complete);
    assert!(matches!(c.events().last(), Some(Event::Completed)));
    assert!(matches!(c.propose(None), Err(CampaignError::WrongStatus { .. })));
    assert_eq!(c.summary().completed, 12);
}

#[test]
fn replaying_the_log_rebuilds_the_state() {
    let oracle = Oracle::synthetic_default();
    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, 6);
    cfg.schedule = vec![10, 3];
    let (c, err) = simulate(cfg, &oracle).unwrap();
    assert!(err.is_none());
    let text = c.event_log();
    let back = Campaign::replay(compound_bo::campaign::events_from_jsonl(&text).unwrap()).unwrap();
    assert_eq!(back.state(), c.state());
    assert_eq!(back.event_log(), text);
}

#[test]
fn request_ids_make_calls_idempotent() {
    let mut c = random_only(2, vec![3, 2]);
    let a = c.propose(Some("p")).unwrap();
    let again = c.propose(Some("p")).unwrap();
    assert_eq!(a, again);
    let n = c.events().len();
    let r = results(&a, |_| metrics(10.0, 1600.0, 9.0));
    c.record(r.clone(), Some("r")).unwrap();
    c.record(r, Some("r")).unwrap();
    assert_eq!(c.events().len(), n + 1);
    // A proposal id reused for results is refused.
    assert!(matches!(
        c.record(Vec::new(), Some("p")),
        Err(CampaignError::RequestIdReused(_))
    ));
}

#[test]
fn summary_counts_feasible_points_and_the_best_distance() {
    let mut c = random_only(3, vec![3]);
    let batch = c.propose(None).unwrap();
    let mfr = [6.0, 9.5, 12.0];
    c.record(results(&batch, |k| metrics(mfr[k], 1600.0, 9.0)), None).unwrap();
    let s = c.summary();
    assert_eq!(s.status, Status::Complete);
    assert_eq!(s.feasible_count, 3);
    assert_eq!(s.best_mfr_distance, Some(0.5));
    assert_eq!(s.best_feasible.unwrap().id, batch[1].id);

    // An infeasible point never becomes the best, however close its MFR.
    let mut c = random_only(3, vec![3]);
    let batch = c.propose(None).unwrap();
    let rows = [metrics(10.0, 1400.0, 9.0), metrics(12.0, 1600.0, 9.0), metrics(10.1, 1600.0, 7.9)];
    c.record(results(&batch, |k| rows[k]), None).unwrap();
    let s = c.summary();
    assert_eq!(s.feasible_count, 1);
    assert_eq!(s.best_mfr_distance, Some(2.0));
}

#[test]
fn non_positive_metrics_are_rejected() {
    assert!(QualityMetrics::new(0.0, 1600.0, 9.0).is_err());
    assert!(QualityMetrics::new(10.0, 1600.0, -1.0).is_err());
}

#[test]
fn relaxation_raises_levels_monotonically_and_summaries_stay_strict() {
    let oracle = Oracle::synthetic_default();
    let mut cfg = CampaignConfig::new(Strategy::Run2Relaxation, 0);
    cfg.schedule = vec![4, 3];
    cfg.historical = low_impact_history();
    let mut c = Campaign::create(cfg).unwrap();
    c.propose(None).unwrap();

    let mut last: Option<compound_bo::campaign::RelaxationLevels> = None;
    let mut relaxed = 0;
    for e in c.events() {
        let levels = match e {
            Event::Relaxed { levels, .. } => {
                relaxed += 1;
                levels
            }
            Event::Proposed { levels, .. } => levels,
            _ => continue,
        };
        if let Some(prev) = &last {
            for (m, l) in prev {
                assert!(levels[m] >= *l, "{m:?} dropped from {l} to {}", levels[m]);
            }
            if matches!(e, Event::Relaxed { .. }) {
                assert_ne!(levels, prev);
            }
        }
        last = Some(levels.clone());
    }
    assert!(relaxed > 0, "the scarce prior should force relaxation");
    assert!(last.unwrap()[&Metric::ImpactStrength] > 0);

    // The final batch is never relaxed, so a still-hopeless model may stop
    // the campaign there.
    match c.run_to_completion(&oracle) {
        Ok(()) => {}
        Err(e) => {
            assert!(e.infeasibility().is_some(), "{e}");
            assert_eq!(c.state().batch_index, 1);
        }
    }
    let problem = ProblemSpec::default();
    let s = c.summary();
    let strict = s
        .batches
        .iter()
        .flat_map(|b| &b.experiments)
        .filter(|t| t.metrics.is_some_and(|m| problem.is_feasible(&m)))
        .count();
    assert_eq!(s.feasible_count, strict);
    for t in s.batches.iter().flat_map(|b| &b.experiments) {
        assert_eq!(t.feasible, t.metrics.map(|m| problem.is_feasible(&m)));
    }
}
