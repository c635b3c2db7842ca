use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use curator_core::catalog::{Catalog, CatalogError, IngestItem};
use curator_core::dicom::{nifti_to_dicom, parse_file, write_file};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const BATCH: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Regular files visited.
    pub scanned: usize,
    /// Distinct series that received at least one instance.
    pub indexed_series: usize,
    /// Files ingested; a NIfTI volume counts once.
    pub instances: usize,
    pub skipped: Vec<SkippedFile>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub code: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::PathNotFound(_) => "path_not_found",
            IngestError::Catalog(e) => e.code(),
        }
    }
}

fn is_nifti(path: &Path) -> bool {
    let name = path.file_name().unwrap_or_default().to_string_lossy().to_lowercase();
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

fn gunzip(bytes: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(bytes).read_to_end(&mut out)?;
    Ok(out)
}

/// Objects in one file, or the error code it was skipped with.
fn load(path: &Path) -> Result<Vec<IngestItem>, String> {
    let bytes = std::fs::read(path).map_err(|_| "io_error".to_string())?;
    if is_nifti(path) {
        let raw = if bytes.starts_with(&[0x1f, 0x8b]) {
            gunzip(&bytes).map_err(|_| "corrupt_gzip".to_string())?
        } else {
            bytes
        };
        let seed: String = Sha256::digest(&raw)[..16].iter().map(|b| format!("{b:02x}")).collect();
        let objs = nifti_to_dicom(&raw, &seed).map_err(|e| e.code().to_string())?;
        return objs
            .into_iter()
            .map(|object| {
                let bytes = write_file(&object).map_err(|_| "internal_error".to_string())?;
                Ok(IngestItem { object, bytes })
            })
            .collect();
    }
    let object = parse_file(&bytes).map_err(|e| e.code().to_string())?;
    Ok(vec![IngestItem { object, bytes }])
}

/// Walks `root`, archiving and indexing every readable DICOM or NIfTI file.
///
/// Unreadable files are reported in `skipped`; they never stop the walk.
pub fn ingest_directory(catalog: &Catalog, root: &Path, recursive: bool) -> Result<IngestReport, IngestError> {
    let start = Instant::now();
    if !root.exists() {
        return Err(IngestError::PathNotFound(root.to_path_buf()));
    }
    let mut report = IngestReport::default();
    let mut series = BTreeSet::new();
    let walker = walkdir::WalkDir::new(root)
        .max_depth(if recursive { usize::MAX } else { 1 })
        .sort_by_file_name();
    let mut batch: Vec<IngestItem> = Vec::new();
    // (path, first item position, item count) for the pending batch.
    let mut owners: Vec<(PathBuf, usize, usize)> = Vec::new();
    let flush = |batch: &mut Vec<IngestItem>,
                 owners: &mut Vec<(PathBuf, usize, usize)>,
                 report: &mut IngestReport,
                 series: &mut BTreeSet<String>|
     -> Result<(), IngestError> {
        if batch.is_empty() {
            return Ok(());
        }
        let uids: Vec<Option<String>> = batch.iter().map(|i| i.object.series_uid().map(str::to_string)).collect();
        let result = catalog.ingest(std::mem::take(batch))?;
        for (path, first, count) in owners.drain(..) {
            let failure = result.failed.iter().find(|f| (first..first + count).contains(&f.0));
            match failure {
                Some(f) => report.skipped.push(SkippedFile {
                    path,
                    code: f.1.clone(),
                }),
                None => {
                    report.instances += 1;
                    series.extend(uids[first..first + count].iter().flatten().cloned());
                }
            }
        }
        Ok(())
    };
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                report.scanned += 1;
                report.skipped.push(SkippedFile {
                    path: e.path().map(Path::to_path_buf).unwrap_or_default(),
                    code: "io_error".into(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        report.scanned += 1;
        match load(entry.path()) {
            Ok(items) => {
                owners.push((entry.path().to_path_buf(), batch.len(), items.len()));
                batch.extend(items);
            }
            Err(code) => {
                tracing::debug!(path = %entry.path().display(), %code, "skipped");
                report.skipped.push(SkippedFile {
                    path: entry.path().to_path_buf(),
                    code,
                });
            }
        }
        if batch.len() >= BATCH {
            flush(&mut batch, &mut owners, &mut report, &mut series)?;
        }
    }
    flush(&mut batch, &mut owners, &mut report, &mut series)?;
    report.indexed_series = series.len();
    report.duration_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}
