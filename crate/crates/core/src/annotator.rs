//! Auto-annotation: header body-part mapping, SEG label ingestion and the
//! external annotator protocol.
//!
//! An external annotator is a command run once per series. It reads the
//! series' DICOM files from `{input_dir}` and writes DICOM-SEG files and/or a
//! `result.json` into `{output_dir}`:
//!
//! ```json
//! {"series_uid": "1.2.3", "structures": ["liver"], "body_part": "abdomen"}
//! ```
//!
//! The child also sees `CURATOR_SERIES_UID` and `CURATOR_OUTPUT_DIR`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dicom::{parse_file, parse_seg, SegmentationMasks};
use crate::index::SeriesDocument;

pub const HEADER_ANNOTATOR: &str = "header-annotator/1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
pub const RESULT_FILE: &str = "result.json";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotatorError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("annotator exited with {status}: {stderr}")]
    AnnotatorFailed { status: String, stderr: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("annotator timed out after {0} s")]
    Timeout(u64),
    #[error("segmentation does not reference series {0}")]
    UnreferencedSegmentation(String),
    #[error("annotator i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for AnnotatorError {
    fn from(e: std::io::Error) -> Self {
        AnnotatorError::Io(e.to_string())
    }
}

impl AnnotatorError {
    pub fn code(&self) -> &'static str {
        match self {
            AnnotatorError::InvalidManifest(_) => "invalid_manifest",
            AnnotatorError::UnknownAnnotator(_) => "unknown_annotator",
            AnnotatorError::AnnotatorFailed { .. } => "annotator_failed",
            AnnotatorError::ProtocolViolation(_) => "protocol_violation",
            AnnotatorError::Timeout(_) => "annotator_timeout",
            AnnotatorError::UnreferencedSegmentation(_) => "unreferenced_segmentation",
            AnnotatorError::Io(_) => "io_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorKind {
    Segmentation,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorManifest {
    pub name: String,
    pub version: String,
    pub labels: Vec<String>,
    pub kind: AnnotatorKind,
    /// Command line with `{input_dir}` and `{output_dir}` placeholders, split shell-style.
    pub invocation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    /// Optional partition of `labels` into named groups.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, Vec<String>>,
}

impl AnnotatorManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self, AnnotatorError> {
        let m: AnnotatorManifest =
            serde_json::from_slice(bytes).map_err(|e| AnnotatorError::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotatorError> {
        Self::from_json(&fs::read(path)?)
    }

    pub fn source(&self) -> String {
        format!("{}/{}", self.name, self.version)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout_secs.map_or(DEFAULT_TIMEOUT, Duration::from_secs)
    }

    pub fn validate(&self) -> Result<(), AnnotatorError> {
        let bad = |m: String| Err(AnnotatorError::InvalidManifest(m));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        if self.labels.is_empty() {
            return bad("no labels".into());
        }
        let mut seen = BTreeSet::new();
        for l in &self.labels {
            if l.trim().is_empty() {
                return bad("empty label".into());
            }
            if !seen.insert(l.to_lowercase()) {
                return bad(format!("duplicate label `{l}`"));
            }
        }
        for p in ["{input_dir}", "{output_dir}"] {
            let n = self.invocation.matches(p).count();
            if n != 1 {
                return bad(format!("invocation must contain {p} exactly once, found {n}"));
            }
        }
        if shell_words::split(&self.invocation).map_or(true, |w| w.is_empty()) {
            return bad("invocation is not a valid command line".into());
        }
        if !self.groups.is_empty() {
            let mut grouped = BTreeSet::new();
            for (g, members) in &self.groups {
                for l in members {
                    if !seen.contains(&l.to_lowercase()) {
                        return bad(format!("group `{g}` names unknown label `{l}`"));
                    }
                    if !grouped.insert(l.to_lowercase()) {
                        return bad(format!("label `{l}` is in more than one group"));
                    }
                }
            }
            if grouped.len() != seen.len() {
                return bad(format!("groups cover {} of {} labels", grouped.len(), seen.len()));
            }
        }
        Ok(())
    }

    fn allows(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l.eq_ignore_ascii_case(label) || l.to_lowercase() == label)
    }
}

/// Every `*.json` manifest in `dir`, sorted by name. Invalid files are logged and skipped.
pub fn load_manifests(dir: &Path) -> Vec<AnnotatorManifest> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<AnnotatorManifest> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter_map(|p| match AnnotatorManifest::load(&p) {
            Ok(m) => Some(m),
            Err(e) => {
                tracing::warn!(path = %p.display(), error = %e, "skipping annotator manifest");
                None
            }
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out.dedup_by(|a, b| a.name == b.name);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub series_uid: String,
    pub source: String,
    pub structures: Vec<String>,
    pub body_part: Option<String>,
    pub produced_seg_files: Vec<PathBuf>,
}

const BODY_PARTS: [(&str, &str); 30] = [
    ("chest", "chest"),
    ("thorax", "chest"),
    ("lung", "chest"),
    ("abdomen", "abdomen"),
    ("abd", "abdomen"),
    ("pelvis", "pelvis"),
    ("abdomenpelvis", "abdomen-pelvis"),
    ("abdpelvis", "abdomen-pelvis"),
    ("chestabdomenpelvis", "chest-abdomen-pelvis"),
    ("chestabdpelvis", "chest-abdomen-pelvis"),
    ("head", "head"),
    ("skull", "head"),
    ("brain", "head"),
    ("headneck", "head-neck"),
    ("neck", "neck"),
    ("cspine", "cervical-spine"),
    ("tspine", "thoracic-spine"),
    ("lspine", "lumbar-spine"),
    ("spine", "spine"),
    ("heart", "heart"),
    ("breast", "breast"),
    ("knee", "knee"),
    ("shoulder", "shoulder"),
    ("hip", "hip"),
    ("hand", "hand"),
    ("foot", "foot"),
    ("arm", "upper-extremity"),
    ("leg", "lower-extremity"),
    ("extremity", "extremity"),
    ("wholebody", "whole-body"),
];

/// Maps a BodyPartExamined value onto the canonical body part, if known.
pub fn normalize_body_part(raw: &str) -> Option<&'static str> {
    let key: String = raw
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    BODY_PARTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

pub fn annotate_from_headers(doc: &SeriesDocument) -> AnnotationResult {
    let body_part = doc
        .fields
        .get("BodyPartExamined")
        .and_then(|v| v.keyword_values().iter().find_map(|s| normalize_body_part(s)))
        .map(str::to_string);
    AnnotationResult {
        series_uid: doc.series_uid.clone(),
        source: HEADER_ANNOTATOR.to_string(),
        structures: Vec::new(),
        body_part,
        produced_seg_files: Vec::new(),
    }
}

fn union_structures(doc: &mut SeriesDocument, labels: impl IntoIterator<Item = String>) {
    let mut set: BTreeSet<String> = doc.anatomical_structures.drain(..).collect();
    set.extend(labels.into_iter().map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()));
    doc.anatomical_structures = set.into_iter().collect();
}

/// Unions the lowercased segment labels into `doc.anatomical_structures`.
pub fn ingest_seg_labels(seg: &SegmentationMasks, doc: &SeriesDocument) -> Result<SeriesDocument, AnnotatorError> {
    let referenced = seg.referenced_series.iter().any(|s| *s == doc.series_uid)
        || seg.referenced_instances.iter().any(|s| doc.sop_instance_uids.contains(s));
    if !referenced {
        return Err(AnnotatorError::UnreferencedSegmentation(doc.series_uid.clone()));
    }
    let mut out = doc.clone();
    union_structures(&mut out, seg.segments.iter().map(|s| s.label.clone()));
    Ok(out)
}

/// Folds a result into a document: structures are unioned, a present body part replaces the old one.
pub fn apply_result(doc: &mut SeriesDocument, result: &AnnotationResult) {
    union_structures(doc, result.structures.iter().cloned());
    if let Some(bp) = &result.body_part {
        doc.body_part = Some(bp.to_lowercase());
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultFile {
    #[serde(default)]
    series_uid: Option<String>,
    #[serde(default)]
    structures: Vec<String>,
    #[serde(default)]
    body_part: Option<String>,
}

fn copy_inputs(files: &[PathBuf], input_dir: &Path) -> Result<(), AnnotatorError> {
    fs::create_dir_all(input_dir)?;
    for (i, f) in files.iter().enumerate() {
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{i}.dcm"));
        let dest = input_dir.join(name);
        if fs::hard_link(f, &dest).is_err() {
            fs::copy(f, &dest)?;
        }
    }
    Ok(())
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn spawn_reader(mut r: impl Read + Send + 'static) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

/// Runs an external annotator over one series.
///
/// `inputs` are copied into `<work_dir>/input`; the annotator writes into
/// `<work_dir>/output`. SEG outputs must reference `series_uid`.
pub fn run_external(
    manifest: &AnnotatorManifest,
    series_uid: &str,
    inputs: &[PathBuf],
    work_dir: &Path,
) -> Result<AnnotationResult, AnnotatorError> {
    manifest.validate()?;
    let input_dir = work_dir.join("input");
    let output_dir = work_dir.join("output");
    copy_inputs(inputs, &input_dir)?;
    fs::create_dir_all(&output_dir)?;

    let words = shell_words::split(&manifest.invocation).map_err(|e| AnnotatorError::InvalidManifest(e.to_string()))?;
    let words: Vec<String> = words
        .into_iter()
        .map(|w| {
            w.replace("{input_dir}", &input_dir.to_string_lossy())
                .replace("{output_dir}", &output_dir.to_string_lossy())
        })
        .collect();
    let mut child = Command::new(&words[0])
        .args(&words[1..])
        .env("CURATOR_SERIES_UID", series_uid)
        .env("CURATOR_OUTPUT_DIR", &output_dir)
        .current_dir(work_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| AnnotatorError::AnnotatorFailed {
            status: "spawn failure".into(),
            stderr: format!("{}: {e}", words[0]),
        })?;
    let out = spawn_reader(child.stdout.take().expect("piped"));
    let err = spawn_reader(child.stderr.take().expect("piped"));
    let timeout = manifest.timeout();
    let start = Instant::now();
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break s;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(AnnotatorError::Timeout(timeout.as_secs()));
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let _ = out.join();
    let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();
    if !status.success() {
        return Err(AnnotatorError::AnnotatorFailed {
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }
    collect_outputs(manifest, series_uid, &output_dir)
}

fn collect_outputs(manifest: &AnnotatorManifest, series_uid: &str, output_dir: &Path) -> Result<AnnotationResult, AnnotatorError> {
    let violation = |m: String| AnnotatorError::ProtocolViolation(m);
    let mut structures = BTreeSet::new();
    let mut body_part = None;
    let mut produced = Vec::new();
    let mut found_result = false;
    for path in files_under(output_dir) {
        if path.file_name().is_some_and(|n| n == RESULT_FILE) && path.parent() == Some(output_dir) {
            let r: ResultFile = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| violation(format!("malformed {RESULT_FILE}: {e}")))?;
            if let Some(uid) = r.series_uid.filter(|u| u != series_uid) {
                return Err(violation(format!("{RESULT_FILE} names series {uid}, expected {series_uid}")));
            }
            structures.extend(r.structures.into_iter().map(|s| s.trim().to_lowercase()));
            body_part = r.body_part.map(|b| b.trim().to_lowercase()).filter(|b| !b.is_empty());
            found_result = true;
            continue;
        }
        let Ok(obj) = fs::read(&path).map_err(|_| ()).and_then(|b| parse_file(&b).map_err(|_| ())) else {
            continue;
        };
        if obj.modality() != Some("SEG") {
            continue;
        }
        let seg = parse_seg(&obj).map_err(|e| violation(format!("{}: {e}", path.display())))?;
        if !seg.referenced_series.is_empty() && !seg.referenced_series.iter().any(|s| s == series_uid) {
            return Err(violation(format!("{} references another series", path.display())));
        }
        structures.extend(seg.segments.iter().map(|s| s.label.trim().to_lowercase()));
        produced.push(path);
    }
    if !found_result && produced.is_empty() {
        return Err(violation(format!("no {RESULT_FILE} or DICOM-SEG in output")));
    }
    structures.remove("");
    let outside: Vec<&String> = structures.iter().filter(|s| !manifest.allows(s)).collect();
    if !outside.is_empty() {
        return Err(violation(format!(
            "labels not declared in manifest: {}",
            outside.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    if manifest.kind == AnnotatorKind::Classification {
        if let Some(bp) = &body_part {
            if !manifest.allows(bp) {
                return Err(violation(format!("body part `{bp}` not declared in manifest")));
            }
        }
    }
    Ok(AnnotationResult {
        series_uid: series_uid.to_string(),
        source: manifest.source(),
        structures: structures.into_iter().collect(),
        body_part,
        produced_seg_files: produced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{Mask, Segment, SegmentFrame};
    use crate::index::FieldValue;
    use chrono::Utc;

    fn manifest(invocation: &str, labels: &[&str]) -> AnnotatorManifest {
        AnnotatorManifest {
            name: "mock".into(),
            version: "1".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            kind: AnnotatorKind::Segmentation,
            invocation: invocation.into(),
            timeout_secs: None,
            groups: BTreeMap::new(),
        }
    }

    fn doc_with_body_part(v: Option<&str>) -> SeriesDocument {
        let mut d = SeriesDocument::new("1.2.3", Utc::now());
        if let Some(v) = v {
            d.fields.insert("BodyPartExamined".into(), FieldValue::Keywords(vec![v.into()]));
        }
        d
    }

    #[test]
    fn header_body_part() {
        let r = annotate_from_headers(&doc_with_body_part(Some("CHEST")));
        assert_eq!(r.body_part.as_deref(), Some("chest"));
        assert_eq!(r.source, "header-annotator/1");
        assert_eq!(annotate_from_headers(&doc_with_body_part(Some("THORAX"))).body_part.as_deref(), Some("chest"));
        assert_eq!(annotate_from_headers(&doc_with_body_part(None)).body_part, None);
        assert_eq!(annotate_from_headers(&doc_with_body_part(Some("TOE"))).body_part, None);
        assert_eq!(normalize_body_part("Abd_Pelvis"), Some("abdomen-pelvis"));
        assert_eq!(BODY_PARTS.len(), 30);
    }

    fn seg(labels: &[&str], series: &str) -> SegmentationMasks {
        SegmentationMasks {
            rows: 1,
            columns: 1,
            segments: labels
                .iter()
                .enumerate()
                .map(|(i, l)| Segment {
                    number: i as u32 + 1,
                    label: l.to_string(),
                    frames: vec![SegmentFrame {
                        referenced_sop_uid: String::new(),
                        position: None,
                        mask: Mask::empty(1, 1),
                    }],
                })
                .collect(),
            referenced_series: vec![series.into()],
            referenced_instances: vec![],
        }
    }

    #[test]
    fn seg_labels_union() {
        let d = doc_with_body_part(None);
        let once = ingest_seg_labels(&seg(&["Liver", "Spleen"], "1.2.3"), &d).unwrap();
        assert_eq!(once.anatomical_structures, vec!["liver", "spleen"]);
        let twice = ingest_seg_labels(&seg(&["Liver", "Spleen"], "1.2.3"), &once).unwrap();
        assert_eq!(twice, once);
        assert_eq!(
            ingest_seg_labels(&seg(&["x"], "9.9"), &d),
            Err(AnnotatorError::UnreferencedSegmentation("1.2.3".into()))
        );
    }

    #[test]
    fn manifest_validation() {
        assert!(manifest("run {input_dir} {output_dir}", &["liver"]).validate().is_ok());
        assert!(manifest("run {input_dir}", &["liver"]).validate().is_err());
        assert!(manifest("run {input_dir} {output_dir} {output_dir}", &["liver"]).validate().is_err());
        assert!(manifest("run {input_dir} {output_dir}", &[]).validate().is_err());
        assert!(manifest("run {input_dir} {output_dir}", &["a", "A"]).validate().is_err());
        let mut m = manifest("run {input_dir} {output_dir}", &["a", "b"]);
        m.groups.insert("g".into(), vec!["a".into()]);
        assert!(m.validate().is_err());
        m.groups.insert("h".into(), vec!["b".into()]);
        assert!(m.validate().is_ok());
    }

    fn sh(script: &str) -> String {
        format!("sh -c {} _ {{input_dir}} {{output_dir}}", shell_words::quote(script))
    }

    #[test]
    fn external_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("a.dcm");
        fs::write(&input, b"x").unwrap();
        let m = manifest(
            &sh(r#"test -f "$1/a.dcm" && printf '{"series_uid":"%s","structures":["Liver"]}' "$CURATOR_SERIES_UID" > "$2/result.json""#),
            &["liver", "spleen"],
        );
        let r = run_external(&m, "1.2.3", &[input.clone()], &dir.path().join("w1")).unwrap();
        assert_eq!(r.structures, vec!["liver"]);
        assert_eq!(r.source, "mock/1");

        let bad = manifest(&sh(r#"echo '{"structures":["brain"]}' > "$2/result.json""#), &["liver"]);
        assert!(matches!(
            run_external(&bad, "1.2.3", &[input.clone()], &dir.path().join("w2")),
            Err(AnnotatorError::ProtocolViolation(_))
        ));
        let garbled = manifest(&sh(r#"echo '{oops' > "$2/result.json""#), &["liver"]);
        assert!(matches!(
            run_external(&garbled, "1.2.3", &[input.clone()], &dir.path().join("w3")),
            Err(AnnotatorError::ProtocolViolation(_))
        ));
        let failing = manifest(&sh("echo boom >&2; exit 3"), &["liver"]);
        match run_external(&failing, "1.2.3", &[input.clone()], &dir.path().join("w4")) {
            Err(AnnotatorError::AnnotatorFailed { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("{other:?}"),
        }
        let mut slow = manifest(&sh("sleep 5"), &["liver"]);
        slow.timeout_secs = Some(0);
        assert_eq!(
            run_external(&slow, "1.2.3", &[input], &dir.path().join("w5")),
            Err(AnnotatorError::Timeout(0))
        );
    }

    #[test]
    fn apply_is_idempotent() {
        let mut d = doc_with_body_part(None);
        let r = AnnotationResult {
            series_uid: "1.2.3".into(),
            source: "m/1".into(),
            structures: vec!["liver".into()],
            body_part: Some("abdomen".into()),
            produced_seg_files: vec![],
        };
        apply_result(&mut d, &r);
        let once = d.clone();
        apply_result(&mut d, &r);
        assert_eq!(d, once);
        assert_eq!(d.body_part.as_deref(), Some("abdomen"));
    }
}
