//! The index, the dataset store and the raw-file archive behind one writer.
//!
//! Layout of a data directory:
//!
//! ```text
//! <data>/index.ndjson          series documents, last write wins
//! <data>/store.ndjson          dataset/tag operations
//! <data>/store.snapshot.json
//! <data>/thumbs/               thumbnail cache
//! <archive>/<series_uid>/<sop_uid>.dcm
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotator::{self, AnnotationResult, AnnotatorError, AnnotatorManifest};
use crate::dicom::{parse_file, parse_seg, DicomObject};
use crate::index::{merge_instance, to_document_at, Index, IndexError, ReplayReport, SeriesDocument};
use crate::journal;
use crate::store::{
    BulkTagEntry, DanglingReference, DatasetRecord, MembershipReport, Store, StoreError, StoreReplay,
};
use crate::thumbnail::{self, ThumbnailConfig, ThumbnailError};

pub const INDEX_FILE: &str = "index.ndjson";
pub const THUMB_DIR: &str = "thumbs";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Annotator(#[from] AnnotatorError),
    #[error(transparent)]
    Thumbnail(#[from] ThumbnailError),
    #[error("archive: {0}")]
    Archive(String),
}

impl From<std::io::Error> for CatalogError {
    fn from(e: std::io::Error) -> Self {
        CatalogError::Archive(e.to_string())
    }
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Index(e) => e.code(),
            CatalogError::Store(e) => e.code(),
            CatalogError::Annotator(e) => e.code(),
            CatalogError::Thumbnail(ThumbnailError::InvalidConfig(_)) => "invalid_thumbnail_config",
            CatalogError::Thumbnail(_) => "thumbnail_error",
            CatalogError::Archive(_) => "storage_error",
        }
    }
}

/// One parsed instance and the bytes to archive for it.
pub struct IngestItem {
    pub object: DicomObject,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchReport {
    pub created: Vec<String>,
    pub updated: Vec<String>,
    pub instances: usize,
    /// `(item position, error code, message)` for items that were not indexed.
    pub failed: Vec<(usize, String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsckReport {
    pub dangling: Vec<DanglingReference>,
    /// Indexed series with no files in the archive.
    pub missing_archive: Vec<String>,
    /// Series whose index tags differ from the store.
    pub tag_mismatches: Vec<String>,
}

impl FsckReport {
    pub fn is_clean(&self) -> bool {
        self.dangling.is_empty() && self.missing_archive.is_empty() && self.tag_mismatches.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OpenReport {
    pub index: ReplayReport,
    pub store: StoreReplay,
    /// Series whose index tags were overwritten from the store.
    pub reconciled: Vec<String>,
    /// Archived series re-read because the index had lost some or all of their instances.
    pub reindexed: Vec<String>,
}

pub struct Catalog {
    pub index: Index,
    pub store: Store,
    archive: PathBuf,
    data_dir: Option<PathBuf>,
    writer: Mutex<()>,
}

fn safe_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || ".-_".contains(c) { c } else { '_' })
        .collect()
}

impl Catalog {
    pub fn open(data_dir: &Path, archive: &Path) -> Result<(Self, OpenReport), CatalogError> {
        fs::create_dir_all(data_dir)?;
        fs::create_dir_all(archive)?;
        let (index, index_report) = Index::open(&data_dir.join(INDEX_FILE))?;
        let (store, store_report) = Store::open(data_dir)?;
        let cat = Catalog {
            index,
            store,
            archive: archive.to_path_buf(),
            data_dir: Some(data_dir.to_path_buf()),
            writer: Mutex::new(()),
        };
        let reindexed = cat.recover_archive()?;
        let reconciled = cat.reconcile()?;
        Ok((
            cat,
            OpenReport {
                index: index_report,
                store: store_report,
                reconciled,
                reindexed,
            },
        ))
    }

    /// In-memory index and store over an on-disk archive.
    pub fn ephemeral(archive: &Path) -> Self {
        Catalog {
            index: Index::in_memory(),
            store: Store::in_memory(),
            archive: archive.to_path_buf(),
            data_dir: None,
            writer: Mutex::new(()),
        }
    }

    pub fn archive_dir(&self) -> &Path {
        &self.archive
    }

    /// Makes index tags equal to store tags; the store is fsynced per operation, the index is not.
    pub fn reconcile(&self) -> Result<Vec<String>, CatalogError> {
        let _w = self.writer.lock().unwrap();
        let state = self.store.state();
        let mut fixed = Vec::new();
        for doc in self.index.snapshot().documents() {
            let want = state.tags_of(&doc.series_uid);
            if doc.tags != want {
                self.index.set_tags(&doc.series_uid, &want)?;
                fixed.push(doc.series_uid.clone());
            }
        }
        Ok(fixed)
    }

    /// Re-ingests archive directories the index is missing or holds fewer instances for.
    pub fn recover_archive(&self) -> Result<Vec<String>, CatalogError> {
        let snap = self.index.snapshot();
        let known: BTreeMap<String, usize> = snap
            .documents()
            .map(|d| (safe_component(&d.series_uid), d.instance_count as usize))
            .collect();
        let Ok(entries) = fs::read_dir(&self.archive) else {
            return Ok(Vec::new());
        };
        let mut dirs: Vec<PathBuf> = entries.flatten().map(|e| e.path()).filter(|p| p.is_dir()).collect();
        dirs.sort();
        let mut out = Vec::new();
        for dir in dirs {
            let name = dir.file_name().unwrap_or_default().to_string_lossy().to_string();
            let files: Vec<PathBuf> = fs::read_dir(&dir)?
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "dcm"))
                .collect();
            if files.is_empty() || known.get(&name) == Some(&files.len()) {
                continue;
            }
            let items: Vec<IngestItem> = files
                .iter()
                .filter_map(|p| fs::read(p).ok())
                .filter_map(|bytes| parse_file(&bytes).ok().map(|object| IngestItem { object, bytes }))
                .collect();
            let report = self.ingest(items)?;
            out.extend(report.created);
            out.extend(report.updated);
        }
        if !out.is_empty() {
            tracing::warn!(series = out.len(), "re-indexed archived series missing from the index");
        }
        Ok(out)
    }

    pub fn series_dir(&self, series_uid: &str) -> PathBuf {
        self.archive.join(safe_component(series_uid))
    }

    fn instance_path(&self, series_uid: &str, item: &IngestItem) -> PathBuf {
        let name = match item.object.sop_instance_uid() {
            Some(sop) if !sop.is_empty() => safe_component(sop),
            _ => Sha256::digest(&item.bytes)[..16].iter().map(|b| format!("{b:02x}")).collect(),
        };
        self.series_dir(series_uid).join(format!("{name}.dcm"))
    }

    /// Archives and indexes a batch of instances.
    pub fn ingest(&self, items: Vec<IngestItem>) -> Result<BatchReport, CatalogError> {
        let _w = self.writer.lock().unwrap();
        let now = Utc::now();
        let snap = self.index.snapshot();
        let mut report = BatchReport::default();
        let mut docs: BTreeMap<String, SeriesDocument> = BTreeMap::new();
        let mut segs: Vec<DicomObject> = Vec::new();
        for (pos, item) in items.into_iter().enumerate() {
            let uid = match item.object.series_uid() {
                Some(u) if !u.is_empty() => u.to_string(),
                _ => {
                    let e = IndexError::MissingSeriesUid;
                    report.failed.push((pos, e.code().into(), e.to_string()));
                    continue;
                }
            };
            let base = docs
                .get(&uid)
                .cloned()
                .or_else(|| snap.get(&uid).map(|d| SeriesDocument::clone(&d)));
            let merged = match &base {
                Some(doc) => merge_instance(doc, &item.object),
                None => to_document_at(&item.object, now).map(|mut d| {
                    d.tags = self.store.tags_of(&uid);
                    d
                }),
            };
            let doc = match merged {
                Ok(d) => d,
                Err(e) => {
                    report.failed.push((pos, e.code().into(), e.to_string()));
                    continue;
                }
            };
            let path = self.instance_path(&uid, &item);
            if fs::read(&path).ok().as_deref() != Some(item.bytes.as_slice()) {
                if let Err(e) = journal::write_atomic(&path, &item.bytes) {
                    report.failed.push((pos, "storage_error".into(), e.to_string()));
                    continue;
                }
            }
            report.instances += 1;
            if item.object.modality() == Some("SEG") {
                segs.push(item.object);
            }
            docs.insert(uid, doc);
        }

        let mut changed = Vec::new();
        for (uid, mut doc) in docs {
            if doc.body_part.is_none() {
                doc.body_part = annotator::annotate_from_headers(&doc).body_part;
            }
            let before = snap.get(&uid);
            match &before {
                None => report.created.push(uid.clone()),
                Some(b) if **b != doc => report.updated.push(uid.clone()),
                Some(_) => continue,
            }
            changed.push(doc);
        }
        self.index.upsert_many(changed)?;

        // SEG labels flow both ways: new SEGs label their targets, new targets pick up archived SEGs.
        for uid in &report.created {
            let snap = self.index.snapshot();
            for d in snap.documents().filter(|d| d.modality == "SEG" && d.referenced_series.contains(uid)) {
                if report.created.contains(&d.series_uid) {
                    continue;
                }
                segs.extend(self.read_series(&d.series_uid));
            }
        }
        for obj in &segs {
            self.apply_seg_labels(obj)?;
        }
        for uid in report.created.iter().chain(&report.updated) {
            self.invalidate_thumbnails(uid);
            if let Some(d) = self.index.get(uid) {
                for r in &d.referenced_series {
                    self.invalidate_thumbnails(r);
                }
            }
        }
        Ok(report)
    }

    fn apply_seg_labels(&self, obj: &DicomObject) -> Result<(), CatalogError> {
        let Ok(seg) = parse_seg(obj) else {
            return Ok(());
        };
        for target in &seg.referenced_series {
            let Some(doc) = self.index.get(target) else { continue };
            if let Ok(updated) = annotator::ingest_seg_labels(&seg, &doc) {
                if updated != *doc {
                    self.index
                        .modify(target, |d| d.anatomical_structures = updated.anatomical_structures)?;
                    self.invalidate_thumbnails(target);
                }
            }
        }
        Ok(())
    }

    /// Archived files of a series, sorted by path.
    pub fn series_files(&self, series_uid: &str) -> Vec<PathBuf> {
        let Ok(entries) = fs::read_dir(self.series_dir(series_uid)) else {
            return Vec::new();
        };
        let mut v: Vec<PathBuf> = entries
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "dcm"))
            .collect();
        v.sort();
        v
    }

    pub fn read_series(&self, series_uid: &str) -> Vec<DicomObject> {
        self.series_files(series_uid)
            .iter()
            .filter_map(|p| fs::read(p).ok())
            .filter_map(|b| parse_file(&b).ok())
            .collect()
    }

    /// SEG and RTSTRUCT objects whose documents reference `series_uid`.
    pub fn related_objects(&self, series_uid: &str) -> Vec<DicomObject> {
        let snap = self.index.snapshot();
        let mut out = Vec::new();
        for d in snap.documents() {
            if d.referenced_series.iter().any(|r| r == series_uid) && matches!(d.modality.as_str(), "SEG" | "RTSTRUCT") {
                out.extend(self.read_series(&d.series_uid));
            }
        }
        out
    }

    fn thumb_dir(&self) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(THUMB_DIR))
    }

    fn invalidate_thumbnails(&self, series_uid: &str) {
        let Some(dir) = self.thumb_dir() else { return };
        let probe = thumbnail::cache_path(&dir, series_uid, &ThumbnailConfig::default());
        let Some(shard) = probe.parent() else { return };
        let prefix = format!("{series_uid}_");
        if let Ok(entries) = fs::read_dir(shard) {
            for e in entries.flatten() {
                if e.file_name().to_string_lossy().starts_with(&prefix) {
                    let _ = fs::remove_file(e.path());
                }
            }
        }
    }

    /// Cached PNG thumbnail.
    pub fn thumbnail(&self, series_uid: &str, cfg: &ThumbnailConfig) -> Result<Vec<u8>, CatalogError> {
        cfg.validate()?;
        if self.index.get(series_uid).is_none() {
            return Err(IndexError::UnknownSeries(series_uid.to_string()).into());
        }
        let cached = self.thumb_dir().map(|d| thumbnail::cache_path(&d, series_uid, cfg));
        if let Some(p) = &cached {
            if let Ok(bytes) = fs::read(p) {
                return Ok(bytes);
            }
        }
        let png = thumbnail::make_thumbnail(&self.read_series(series_uid), &self.related_objects(series_uid), cfg);
        if let Some(p) = &cached {
            if let Err(e) = journal::write_atomic(p, &png) {
                tracing::warn!(error = %e, "thumbnail cache write failed");
            }
        }
        Ok(png)
    }

    /// Slice `index` of the detail-view scroller; `Ok(None)` past the end.
    pub fn slice(&self, series_uid: &str, index: usize, cfg: &ThumbnailConfig) -> Result<Option<Vec<u8>>, CatalogError> {
        cfg.validate()?;
        if self.index.get(series_uid).is_none() {
            return Err(IndexError::UnknownSeries(series_uid.to_string()).into());
        }
        Ok(thumbnail::render_slice(
            &self.read_series(series_uid),
            &self.related_objects(series_uid),
            index,
            cfg,
        ))
    }

    pub fn bulk_tag(&self, uids: &[String], add: &[String], remove: &[String]) -> Result<Vec<BulkTagEntry>, CatalogError> {
        let _w = self.writer.lock().unwrap();
        let snap = self.index.snapshot();
        let (report, changed) = self.store.bulk_tag(uids, add, remove, |u| snap.get(u).is_some())?;
        for (uid, tags) in changed {
            self.index.set_tags(&uid, &tags)?;
        }
        Ok(report)
    }

    pub fn set_tags(&self, series_uid: &str, tags: &[String]) -> Result<Vec<String>, CatalogError> {
        let _w = self.writer.lock().unwrap();
        if self.index.get(series_uid).is_none() {
            return Err(IndexError::UnknownSeries(series_uid.to_string()).into());
        }
        let tags = self.store.set_tags(series_uid, tags)?;
        self.index.set_tags(series_uid, &tags)?;
        Ok(tags)
    }

    pub fn create_dataset(&self, name: &str) -> Result<DatasetRecord, CatalogError> {
        let _w = self.writer.lock().unwrap();
        Ok(self.store.create_dataset(name)?)
    }

    pub fn modify_membership(&self, id: &str, add: &[String], remove: &[String]) -> Result<MembershipReport, CatalogError> {
        let _w = self.writer.lock().unwrap();
        Ok(self.store.modify_membership(id, add, remove)?)
    }

    /// Folds an annotation into the index.
    pub fn apply_annotation(&self, result: &AnnotationResult) -> Result<SeriesDocument, CatalogError> {
        let _w = self.writer.lock().unwrap();
        self.index.modify(&result.series_uid, |d| annotator::apply_result(d, result))?;
        Ok(SeriesDocument::clone(&self.index.get(&result.series_uid).expect("just modified")))
    }

    /// Runs an external annotator over one archived series and indexes its output.
    pub fn annotate(&self, manifest: &AnnotatorManifest, series_uid: &str, work_dir: &Path) -> Result<AnnotationResult, CatalogError> {
        if self.index.get(series_uid).is_none() {
            return Err(IndexError::UnknownSeries(series_uid.to_string()).into());
        }
        let files = self.series_files(series_uid);
        let result = annotator::run_external(manifest, series_uid, &files, work_dir)?;
        self.apply_annotation(&result)?;
        Ok(result)
    }

    pub fn fsck(&self) -> FsckReport {
        let snap = self.index.snapshot();
        let state = self.store.state();
        let archived = |u: &str| self.series_dir(u).is_dir();
        let dangling = self.store.dangling(|u| snap.get(u).is_some() && archived(u));
        let mut missing_archive = Vec::new();
        let mut tag_mismatches = BTreeSet::new();
        for d in snap.documents() {
            if self.series_files(&d.series_uid).is_empty() {
                missing_archive.push(d.series_uid.clone());
            }
            if d.tags != state.tags_of(&d.series_uid) {
                tag_mismatches.insert(d.series_uid.clone());
            }
        }
        FsckReport {
            dangling,
            missing_archive,
            tag_mismatches: tag_mismatches.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{tags, write_file, DataElement, PixelData, TransferSyntax, Vr};

    fn instance(series: &str, sop: &str, body: Option<&str>) -> IngestItem {
        let mut o = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        o.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, sop));
        o.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, series));
        o.put(DataElement::string(tags::STUDY_INSTANCE_UID, Vr::UI, "9.9"));
        o.put(DataElement::string(tags::MODALITY, Vr::CS, "CT"));
        if let Some(b) = body {
            o.put(DataElement::string(tags::BODY_PART_EXAMINED, Vr::CS, b));
        }
        o.put(DataElement::ints(tags::ROWS, Vr::US, &[2]));
        o.put(DataElement::ints(tags::COLUMNS, Vr::US, &[2]));
        o.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[8]));
        o.pixel_data = Some(PixelData {
            vr: Vr::OB,
            bytes: vec![0, 50, 100, 150],
        });
        let bytes = write_file(&o).unwrap();
        IngestItem { object: o, bytes }
    }

    #[test]
    fn ingest_is_idempotent_and_archives() {
        let dir = tempfile::tempdir().unwrap();
        let (cat, _) = Catalog::open(&dir.path().join("data"), &dir.path().join("archive")).unwrap();
        let r = cat
            .ingest(vec![instance("1.1", "1.1.1", Some("THORAX")), instance("1.1", "1.1.2", None)])
            .unwrap();
        assert_eq!(r.created, vec!["1.1"]);
        assert_eq!(r.instances, 2);
        assert_eq!(cat.series_files("1.1").len(), 2);
        let doc = cat.index.get("1.1").unwrap();
        assert_eq!(doc.instance_count, 2);
        assert_eq!(doc.body_part.as_deref(), Some("chest"));
        let again = cat.ingest(vec![instance("1.1", "1.1.1", Some("THORAX"))]).unwrap();
        assert!(again.created.is_empty() && again.updated.is_empty());
        assert_eq!(*cat.index.get("1.1").unwrap(), *doc);
    }

    #[test]
    fn tags_mirror_and_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let (data, archive) = (dir.path().join("data"), dir.path().join("archive"));
        {
            let (cat, _) = Catalog::open(&data, &archive).unwrap();
            cat.ingest(vec![instance("1.1", "1.1.1", None), instance("2.2", "2.2.1", None)]).unwrap();
            let rep = cat
                .bulk_tag(&["1.1".into(), "nope".into()], &["Reviewed".into()], &[])
                .unwrap();
            assert_eq!(rep[0].tags, Some(vec!["reviewed".to_string()]));
            assert_eq!(cat.index.get("1.1").unwrap().tags, vec!["reviewed"]);
            // Simulate a lost index write.
            cat.index.set_tags("1.1", &[]).unwrap();
        }
        let (cat, report) = Catalog::open(&data, &archive).unwrap();
        assert_eq!(report.reconciled, vec!["1.1"]);
        assert_eq!(cat.index.get("1.1").unwrap().tags, vec!["reviewed"]);
        assert!(cat.fsck().is_clean());
    }

    #[test]
    fn fsck_finds_dangling() {
        let dir = tempfile::tempdir().unwrap();
        let (cat, _) = Catalog::open(&dir.path().join("data"), &dir.path().join("archive")).unwrap();
        cat.ingest(vec![instance("1.1", "1.1.1", None)]).unwrap();
        let ds = cat.create_dataset("d").unwrap();
        cat.modify_membership(&ds.id, &["1.1".into(), "7.7".into()], &[]).unwrap();
        let report = cat.fsck();
        assert_eq!(report.dangling.len(), 1);
        assert_eq!(report.dangling[0].series_uid, "7.7");
        fs::remove_dir_all(cat.series_dir("1.1")).unwrap();
        let report = cat.fsck();
        assert_eq!(report.dangling.len(), 2);
        assert_eq!(report.missing_archive, vec!["1.1"]);
    }

    #[test]
    fn thumbnails_are_cached_and_invalidated() {
        let dir = tempfile::tempdir().unwrap();
        let (cat, _) = Catalog::open(&dir.path().join("data"), &dir.path().join("archive")).unwrap();
        cat.ingest(vec![instance("1.1", "1.1.1", None)]).unwrap();
        let cfg = ThumbnailConfig::default();
        let png = cat.thumbnail("1.1", &cfg).unwrap();
        let path = thumbnail::cache_path(&dir.path().join("data").join(THUMB_DIR), "1.1", &cfg);
        assert_eq!(fs::read(&path).unwrap(), png);
        cat.ingest(vec![instance("1.1", "1.1.2", None)]).unwrap();
        assert!(!path.exists());
        assert!(matches!(
            cat.thumbnail("nope", &cfg),
            Err(CatalogError::Index(IndexError::UnknownSeries(_)))
        ));
        assert!(cat.slice("1.1", 1, &cfg).unwrap().is_some());
        assert!(cat.slice("1.1", 2, &cfg).unwrap().is_none());
    }
}
