//! Record/replay round-trip across a full trial: recording a scripted run
//! and replaying it must reproduce the transcripts bit for bit.

use tradecrew_core::agents::backend::{RecordingBackend, ReplayBackend, SyntheticBackend};
use tradecrew_core::agents::pipeline::run_trial;
use tradecrew_core::agents::{AblationMask, AgentRole, Granularity};
use tradecrew_core::data::rebalance_schedule;
use tradecrew_core::testkit::{synthetic_repository, FixtureSpec};
use tradecrew_core::Month;

#[test]
fn trial_record_then_replay_is_bit_exact() {
    let repo = synthetic_repository(&FixtureSpec::small());
    let schedule =
        rebalance_schedule(&repo.calendar, Month::new(2023, 9), Month::new(2023, 10)).unwrap();
    let mask = AblationMask::without(AgentRole::Macro).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let recorder = RecordingBackend::new(SyntheticBackend, dir.path()).unwrap();
    let (scores_rec, store_rec) =
        run_trial(&repo, &schedule, Granularity::Coarse, &mask, 1, &recorder).unwrap();

    let replayer = ReplayBackend::new(dir.path());
    let (scores_rep, store_rep) =
        run_trial(&repo, &schedule, Granularity::Coarse, &mask, 1, &replayer).unwrap();

    assert_eq!(scores_rec, scores_rep);
    assert_eq!(store_rec.len(), store_rep.len());

    // Bit-exact: serialize both stores and compare bytes.
    let jsonl = |store: &tradecrew_core::agents::transcript::TranscriptStore| {
        store
            .records()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(jsonl(&store_rec), jsonl(&store_rep));

    // The recording directory holds one file per call.
    let files = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(files, store_rec.len());
}
