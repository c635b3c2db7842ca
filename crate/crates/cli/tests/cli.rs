use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curator_core::catalog::Catalog;
use curator_service::api;
use curator_testkit::fixtures;

const BIN: &str = env!("CARGO_BIN_EXE_curator");

struct Env {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Env { _dir: dir, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .env_clear()
            .env("PATH", std::env::var("PATH").unwrap_or_default())
            .env("CURATOR_DATA_DIR", self.root.join("data"))
            .env("CURATOR_ANNOTATOR_DIR", self.root.join("annotators"))
            .output()
            .unwrap()
    }

    fn seeded(modalities: &[&str]) -> Self {
        let env = Env::new();
        for (i, s) in fixtures::corpus("cli", modalities.len(), 3, modalities).iter().enumerate() {
            fixtures::write_objects(&env.root.join("in").join(i.to_string()), s);
        }
        let out = env.run(&["ingest", env.root.join("in").to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        env
    }

    fn catalog(&self) -> Catalog {
        let data = self.root.join("data");
        Catalog::open(&data, &data.join("archive")).unwrap().0
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn search_json_matches_api() {
    let env = Env::seeded(&["CT", "MR", "CT"]);
    let out = env.run(&["search", "Modality:CT", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    let cat = env.catalog();
    let page = api::search(&cat.index, "Modality:CT", 0, 1000, None).unwrap();
    let want: String = page.hits.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect();
    assert_eq!(text, want);
}

#[test]
fn search_table_has_default_columns() {
    let env = Env::seeded(&["CT"]);
    let out = env.run(&["search", ""]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("uid\tModality\tPatientID\tinstance_count\ttags"));
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(&row[1..4], ["CT", "PAT000", "3"]);
    let out = env.run(&["search", "", "--cols", "Modality,body_part"]);
    assert_eq!(stdout(&out), "Modality\tbody_part\nCT\tchest\n");
}

#[test]
fn aggregate_csv_is_export_csv() {
    let env = Env::seeded(&["CT", "MR", "CT"]);
    let out = env.run(&["aggregate", "", "--fields", "Modality", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let cat = env.catalog();
    assert_eq!(out.stdout, api::aggregate_csv(&cat.index, "", "Modality").unwrap());
    assert_eq!(stdout(&out), "value,count\nCT,2\nMR,1\n");
    let out = env.run(&["aggregate", "", "--fields", "Modality"]);
    assert_eq!(stdout(&out), "field\tvalue\tcount\nModality\tCT\t2\nModality\tMR\t1\n");
}

#[test]
fn exit_codes_follow_the_contract() {
    let env = Env::seeded(&["CT"]);
    let out = env.run(&["search", "(a OR"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("position 5"), "{err}");
    assert!(err.contains("query grammar"));
    assert_eq!(env.run(&["aggregate", "", "--fields", "Modality,tags", "--csv"]).status.code(), Some(2));
    assert_eq!(env.run(&["aggregate", ""]).status.code(), Some(2));
    assert_eq!(env.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(env.run(&["--help"]).status.code(), Some(0));
    assert_eq!(env.run(&["ingest", "/definitely/not/here"]).status.code(), Some(1));
    assert_eq!(env.run(&["annotate", "nobody", "*"]).status.code(), Some(1));
    assert_eq!(env.run(&["thumbs", "*", "--edge", "8"]).status.code(), Some(2));
}

#[test]
fn fsck_reports_missing_archive() {
    let env = Env::seeded(&["CT", "MR"]);
    let out = env.run(&["fsck"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let uid = env.catalog().index.snapshot().documents().next().unwrap().series_uid.clone();
    std::fs::remove_dir_all(env.catalog().series_dir(&uid)).unwrap();
    let out = env.run(&["fsck"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains(&format!("missing_archive\t{uid}")));
}

#[test]
fn thumbs_writes_pngs() {
    let env = Env::seeded(&["CT", "MR"]);
    let out_dir = env.root.join("pngs");
    let out = env.run(&["thumbs", "*", "--edge", "64", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 2);
    let files: Vec<_> = std::fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(files.len(), 2);
}

fn write_mock_manifest(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let m = serde_json::json!({
        "name": "mock", "version": "1", "kind": "segmentation",
        "labels": ["liver", "spleen"],
        "invocation": format!("'{BIN}' mock-annotate {{input_dir}} {{output_dir}} --labels liver"),
    });
    std::fs::write(dir.join("mock.json"), serde_json::to_vec(&m).unwrap()).unwrap();
}

#[test]
fn annotate_with_mock_annotator() {
    let env = Env::seeded(&["CT", "MR", "CT"]);
    write_mock_manifest(&env.root.join("annotators"));
    let out = env.run(&["annotate", "mock", "Modality:CT"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 2);
    let out = env.run(&["search", "anatomical_structures:liver", "--json"]);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn shipped_manifests_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../annotators");
    let manifests = curator_core::annotator::load_manifests(&dir);
    let names: Vec<&str> = manifests.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["mock", "totalsegmentator"]);
    let ts = &manifests[1];
    assert_eq!(ts.labels.len(), 104);
    let sizes: Vec<(&str, usize)> = ts.groups.iter().map(|(g, l)| (g.as_str(), l.len())).collect();
    assert_eq!(sizes, [("bones", 59), ("muscles", 10), ("organs", 27), ("vessels", 8)]);
}
