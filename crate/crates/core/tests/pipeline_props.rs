use pollisim::pipeline::{
    run_batch, BatchReport, FailureReason, RateTable, ScenarioConfig, Stage, StageOutcome, StageReport,
};
use proptest::prelude::*;

const REASONS: [FailureReason; 5] = [
    FailureReason::NotDetected,
    FailureReason::NotAligned,
    FailureReason::RegistrationError,
    FailureReason::NotCaptured,
    FailureReason::Misclassified,
];

/// Report that succeeds up to `reached` stages, then fails once if any
/// stage is left, and skips the rest.
fn report(seed: u64, id: usize, reached: usize, pollen: u64) -> StageReport {
    let mut r = StageReport::pending(seed, id);
    for (i, stage) in Stage::ALL.into_iter().enumerate() {
        *r.outcome_mut(stage) = match i.cmp(&reached) {
            std::cmp::Ordering::Less => StageOutcome::Success,
            std::cmp::Ordering::Equal => StageOutcome::Failure { reason: REASONS[i] },
            std::cmp::Ordering::Greater => StageOutcome::Skipped,
        };
    }
    r.metrics.true_stigma_pollen = pollen;
    r.metrics.pollen_counts = vec![pollen / 10];
    r
}

fn reports() -> impl Strategy<Value = Vec<StageReport>> {
    proptest::collection::vec((0u64..50, 0usize..8, 0usize..=5, 0u64..300_000), 0..60)
        .prop_map(|v| v.into_iter().map(|(s, id, reached, p)| report(s, id, reached, p)).collect())
}

fn check_table(reports: &[StageReport], table: &RateTable) {
    assert_eq!(table, &RateTable::from_reports(reports));
    assert_eq!(table.flowers, reports.len());
    let mut prev = reports.len();
    for s in &table.stages {
        assert_eq!(s.attempted, prev, "{:?}", s.stage);
        assert!(s.succeeded <= s.attempted);
        let expected = (s.attempted > 0).then(|| s.succeeded as f64 / s.attempted as f64);
        assert_eq!(s.rate, expected);
        prev = s.succeeded;
    }
}

proptest! {
    #[test]
    fn synthetic_batches_aggregate_conditionally(reports in reports()) {
        prop_assert!(reports.iter().all(StageReport::is_gated));
        let batch = BatchReport::from_reports(reports.clone());
        check_table(&reports, &batch.table);

        // Reports in the opposite order aggregate identically.
        let mut reversed = reports.clone();
        reversed.reverse();
        prop_assert_eq!(&RateTable::from_reports(&reversed), &batch.table);
    }

    #[test]
    fn json_lines_round_trip(reports in reports()) {
        let batch = BatchReport::from_reports(reports);
        let text = batch.to_json_lines().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        prop_assert_eq!(lines.len(), batch.reports.len() + 1);
        for (line, r) in lines.iter().zip(&batch.reports) {
            let back: StageReport = serde_json::from_str(line).unwrap();
            prop_assert_eq!(&back, r);
        }
        let last: serde_json::Value = serde_json::from_str(lines[lines.len() - 1]).unwrap();
        let table: RateTable = serde_json::from_value(last["aggregate"].clone()).unwrap();
        prop_assert_eq!(table, batch.table);
    }

    #[test]
    fn gating_rejects_skips_after_success(reached in 0usize..5, hole in 0usize..5) {
        let mut r = report(0, 0, 5, 0);
        prop_assert!(r.is_gated());
        *r.outcome_mut(Stage::ALL[hole]) = StageOutcome::Skipped;
        prop_assert!(!r.is_gated());
        let mut r = report(0, 0, reached, 0);
        if reached + 1 < 5 {
            *r.outcome_mut(Stage::ALL[reached + 1]) = StageOutcome::Success;
            prop_assert!(!r.is_gated());
        }
    }
}

#[test]
fn noisy_batch_reports_are_gated_and_aggregate_consistently() {
    let mut config = ScenarioConfig::field_emulation();
    config.scene.n_flowers = 3;
    let batch = run_batch(&config, 2, 40).unwrap();
    assert_eq!(batch.reports.len(), 6);
    assert!(batch.reports.iter().all(StageReport::is_gated));
    check_table(&batch.reports, &batch.table);
    let seeds: Vec<u64> = batch.reports.iter().map(|r| r.scene_seed).collect();
    assert_eq!(seeds, [40, 40, 40, 41, 41, 41]);
}

#[test]
fn shipped_configs_match_the_presets() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    assert_eq!(ScenarioConfig::load(dir.join("default.json")).unwrap(), ScenarioConfig::default());
    assert_eq!(ScenarioConfig::load(dir.join("field.json")).unwrap(), ScenarioConfig::field_emulation());
}
