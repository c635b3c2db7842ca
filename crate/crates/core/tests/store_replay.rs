use std::fs::OpenOptions;
use std::path::Path;

use curator_core::store::{Store, StoreState};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const JOURNAL: &str = "store.ndjson";

fn journal_len(dir: &Path) -> u64 {
    std::fs::metadata(dir.join(JOURNAL)).map(|m| m.len()).unwrap_or(0)
}

/// Runs random operations, returning (journal length, state) after each one.
fn run_ops(dir: &Path, seed: u64, n: usize, snapshot_every: u64) -> Vec<(u64, StoreState)> {
    let (store, _) = Store::open_with(dir, snapshot_every).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = vec![(journal_len(dir), (*store.state()).clone())];
    let series: Vec<String> = (0..8).map(|i| format!("1.2.3.{i}")).collect();
    let tags = ["qc:pass", "qc:fail", "exclude", "review"];
    for i in 0..n {
        let ids: Vec<String> = store.list_datasets().into_iter().map(|d| d.id).collect();
        match rng.gen_range(0..4) {
            0 => {
                store.create_dataset(&format!("set {i}")).unwrap();
            }
            1 if !ids.is_empty() => {
                let id = &ids[rng.gen_range(0..ids.len())];
                let add = vec![series[rng.gen_range(0..8)].clone()];
                let remove = vec![series[rng.gen_range(0..8)].clone()];
                let _ = store.modify_membership(id, &add, if add == remove { &[] } else { &remove });
            }
            _ => {
                let uid = &series[rng.gen_range(0..8)];
                let t: Vec<String> = tags.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect();
                store.set_tags(uid, &t).unwrap();
            }
        }
        out.push((journal_len(dir), (*store.state()).clone()));
    }
    out
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn truncated_journal_replays_to_a_prefix(seed in any::<u64>(), cuts in proptest::collection::vec(any::<u64>(), 20)) {
        let base = tempfile::tempdir().unwrap();
        let live = base.path().join("live");
        let history = run_ops(&live, seed, 40, u64::MAX);
        let full = journal_len(&live);
        for (k, cut) in cuts.iter().enumerate() {
            let cut = cut % (full + 1);
            let dir = base.path().join(format!("cut{k}"));
            copy_dir(&live, &dir);
            OpenOptions::new().write(true).open(dir.join(JOURNAL)).unwrap().set_len(cut).unwrap();
            let (store, _) = Store::open(&dir).unwrap();
            let want = history.iter().rev().find(|(len, _)| *len <= cut).map(|(_, s)| s.clone()).unwrap_or_default();
            prop_assert_eq!(&*store.state(), &want, "cut at {} of {}", cut, full);
            // The reopened store keeps working and persists new writes.
            store.set_tags("9.9.9", &["after:crash".to_string()]).unwrap();
            drop(store);
            let (again, _) = Store::open(&dir).unwrap();
            prop_assert_eq!(again.tags_of("9.9.9"), vec!["after:crash".to_string()]);
        }
    }

    #[test]
    fn snapshots_do_not_change_state(seed in any::<u64>(), every in 1u64..10) {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let with = run_ops(a.path(), seed, 30, every);
        let without = run_ops(b.path(), seed, 30, u64::MAX);
        prop_assert_eq!(&with.last().unwrap().1.tags, &without.last().unwrap().1.tags);
        let (reopened, _) = Store::open(a.path()).unwrap();
        prop_assert_eq!(&*reopened.state(), &with.last().unwrap().1);
    }
}
