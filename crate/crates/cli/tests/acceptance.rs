//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p curator-cli --test acceptance`.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use curator_core::annotator::AnnotatorManifest;
use curator_core::catalog::{Catalog, IngestItem};
use curator_core::dicom::{
    self, pack_bits, parse_file, unpack_bits, write_file, write_file_with, DataElement, DicomObject, Item,
    TransferSyntax, Value, Vr,
};
use curator_core::index::{FacetDistribution, Index, QueryAst, SortSpec};
use curator_core::thumbnail::{fill_polygon, make_thumbnail, thumbnail_image, window_value, ThumbnailConfig};
use curator_service::{router, AppState, Config};
use curator_testkit::docs::{random_corpus, random_queries, FieldKind, FIELDS};
use curator_testkit::{fixtures, oracle};
use dicom_core::dictionary::DataDictionary;
use dicom_core::header::Header;
use dicom_dictionary_std::StandardDataDictionary;
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as Json};
use tower::ServiceExt;

const BIN: &str = env!("CARGO_BIN_EXE_curator");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: &[(&str, fn() -> Outcome)] = &[
        ("parser round-trip", parser_round_trip),
        ("search oracle", search_oracle),
        ("facet/autocomplete oracle", facet_autocomplete_oracle),
        ("windowing conformance", windowing),
        ("SEG/RTStruct rendering", rendering),
        ("bias-detection scenario", bias_scenario),
        ("curation workflow", workflow),
        ("crash safety", crash_safety),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- parser

fn text_value(s: &str) -> String {
    s.trim_end_matches([' ', '\0']).to_string()
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\\")
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn our_keyword(tag: dicom::Tag) -> String {
    dicom::dictionary::keyword(tag).unwrap_or("?").to_string()
}

/// `path keyword VR value` lines for our parse.
fn dump_ours(elements: &[DataElement], path: &str, out: &mut Vec<String>) {
    for e in elements {
        let kw = our_keyword(e.tag);
        let value = match &e.value {
            Value::Strings(v) => join(v.iter().map(|s| text_value(s))),
            Value::Ints(v) if e.vr == Vr::AT => join(v.iter().map(|t| format!("{t:08X}"))),
            Value::Ints(v) => join(v),
            Value::Floats(v) => join(v),
            Value::Bytes(b) => hex(b),
            Value::Sequence(items) => {
                for (i, item) in items.iter().enumerate() {
                    dump_ours(&item.elements, &format!("{path}{kw}[{i}]/"), out);
                }
                items.len().to_string()
            }
        };
        out.push(format!("{path}{kw} {} {value}", e.vr.as_str()));
    }
}

/// The same dump from the reference toolkit's in-memory object.
fn dump_reference(obj: &dicom_object::InMemDicomObject, path: &str, out: &mut Vec<String>) {
    use dicom_core::value::Value as V;
    use dicom_core::VR;
    for e in obj.iter() {
        let tag = e.tag();
        let kw = StandardDataDictionary
            .by_tag(tag)
            .map(|d| d.alias.to_string())
            .unwrap_or_else(|| "?".into());
        let vr = e.vr();
        let value = match e.value() {
            V::Sequence(seq) => {
                for (i, item) in seq.items().iter().enumerate() {
                    dump_reference(item, &format!("{path}{kw}[{i}]/"), out);
                }
                seq.items().len().to_string()
            }
            V::PixelSequence(_) => "encapsulated".into(),
            V::Primitive(p) => match vr {
                VR::AT => match p {
                    dicom_core::PrimitiveValue::Tags(t) => {
                        join(t.iter().map(|t| format!("{:04X}{:04X}", t.group(), t.element())))
                    }
                    _ => "?".into(),
                },
                VR::US | VR::UL | VR::SS | VR::SL | VR::UV | VR::SV => {
                    join(p.to_multi_int::<i64>().unwrap_or_default())
                }
                VR::FD | VR::FL => join(p.to_multi_float64().unwrap_or_default()),
                VR::OB | VR::OW | VR::UN | VR::OF | VR::OD | VR::OL | VR::OV => hex(&p.to_bytes()),
                _ => join(p.to_multi_str().iter().map(|s| text_value(s))),
            },
        };
        out.push(format!("{path}{kw} {} {value}", vr.to_string()));
    }
}

fn parser_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xD1C0);
    let (mut implicit, mut multiframe, mut nested, mut crossed) = (0, 0, 0, 0);
    for n in 0..50 {
        let ts = if n % 2 == 0 {
            TransferSyntax::ExplicitVrLittleEndian
        } else {
            TransferSyntax::ImplicitVrLittleEndian
        };
        let (obj, opts) = fixtures::random_fixture(&mut rng, ts, n);
        let bytes = write_file_with(&obj, opts).map_err(|e| format!("fixture {n}: write: {e}"))?;
        let back = parse_file(&bytes).map_err(|e| format!("fixture {n}: parse: {e}"))?;
        ensure!(back.elements == obj.elements, "fixture {n}: elements differ after parse");
        let (got, want) = (back.pixel_data.as_ref(), obj.pixel_data.as_ref());
        ensure!(got.map(|p| &p.bytes) == want.map(|p| &p.bytes), "fixture {n}: pixel bytes differ");
        let again = write_file_with(&back, opts).map_err(|e| e.to_string())?;
        ensure!(again == bytes, "fixture {n}: re-serialized bytes differ");
        ensure!(parse_file(&again).map(|o| o.elements) == Ok(back.elements.clone()), "fixture {n}: second parse differs");

        implicit += usize::from(!ts.is_explicit());
        multiframe += usize::from(obj.number_of_frames() > 1);
        nested += usize::from(has_nested_items(&obj.elements));

        if n < 10 {
            let reference = dicom_object::from_reader(&bytes[..]).map_err(|e| format!("fixture {n}: reference: {e}"))?;
            ensure!(
                reference.meta().transfer_syntax().trim_end_matches('\0') == ts.uid(),
                "fixture {n}: transfer syntax"
            );
            let mut theirs = Vec::new();
            dump_reference(&reference, "", &mut theirs);
            let mut ours = Vec::new();
            dump_ours(&back.elements, "", &mut ours);
            if let Some(p) = &back.pixel_data {
                let vr = if ts.is_explicit() { p.vr } else { Vr::OW };
                ours.push(format!("PixelData {} {}", vr.as_str(), hex(&p.bytes)));
            }
            // Both dumps are in tag order; sequences print after their items.
            if let Some(i) = (0..ours.len().max(theirs.len())).find(|&i| ours.get(i) != theirs.get(i)) {
                return Err(format!(
                    "fixture {n}: dump differs at line {i}: ours {:?} reference {:?}",
                    ours.get(i),
                    theirs.get(i)
                ));
            }
            crossed += 1;
        }
    }
    ensure!(implicit > 0 && multiframe > 0 && nested > 0, "coverage: implicit {implicit}, multi-frame {multiframe}, nested {nested}");
    Ok(format!(
        "50/50 identical ({implicit} implicit VR, {multiframe} multi-frame, {nested} nested); {crossed}/10 match the reference dump"
    ))
}

fn has_nested_items(elements: &[DataElement]) -> bool {
    elements.iter().any(|e| match &e.value {
        Value::Sequence(items) => items.iter().any(|i: &Item| i.elements.iter().any(|x| matches!(&x.value, Value::Sequence(s) if !s.is_empty()))),
        _ => false,
    })
}

// ---------------------------------------------------------------- search

fn sort_for(i: usize) -> Option<SortSpec> {
    match i % 5 {
        0 => None,
        1 => SortSpec::parse("SliceThickness"),
        2 => SortSpec::parse("-StudyDate"),
        3 => SortSpec::parse("PatientName"),
        _ => SortSpec::parse("-SeriesNumber"),
    }
}

fn search_oracle() -> Outcome {
    let docs = random_corpus(2024, 1000);
    let index = Index::in_memory();
    index.upsert_many(docs.clone()).map_err(|e| e.to_string())?;
    let queries = random_queries(77, 200);
    let mut nonempty = 0;
    for (i, q) in queries.iter().enumerate() {
        let sort = sort_for(i);
        let res = index.search(q, 0, 1000, sort.as_ref()).map_err(|e| format!("{q}: {e}"))?;
        let got: BTreeSet<String> = res.hits.iter().map(|h| h.series_uid.clone()).collect();
        let want = oracle::search(&docs, q);
        ensure!(got == want, "query {i} `{q}`: {} hits, oracle {}", got.len(), want.len());
        ensure!(res.total == want.len(), "query {i} `{q}`: total {}", res.total);
        for w in res.hits.windows(2) {
            let a = index.get(&w[0].series_uid).unwrap();
            let b = index.get(&w[1].series_uid).unwrap();
            ensure!(oracle::ordered(&a, &b, sort.as_ref()), "query {i} `{q}`: {} before {}", a.series_uid, b.series_uid);
        }
        nonempty += usize::from(!want.is_empty());
    }
    Ok(format!("200/200 queries agree on sets and order ({nonempty} non-empty)"))
}

fn tiebreak(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn facet_autocomplete_oracle() -> Outcome {
    let docs = random_corpus(2024, 1000);
    let index = Index::in_memory();
    index.upsert_many(docs.clone()).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(20);
    let queries = random_queries(91, 20);
    let completable: Vec<&str> = FIELDS
        .iter()
        .filter(|(f, k)| !matches!(k, FieldKind::Date | FieldKind::Text | FieldKind::Name) && *f != "has_pixel_data")
        .map(|(f, _)| *f)
        .collect();
    for (i, q) in queries.iter().enumerate() {
        let (field, kind) = FIELDS[rng.gen_range(0..FIELDS.len())];
        let q = if i % 2 == 0 { q.clone() } else { QueryAst::MatchAll };
        let dist = index.aggregate(&q, &[field.to_string()]);
        let hits = oracle::search(&docs, &q);
        let matched: Vec<_> = docs.iter().filter(|d| hits.contains(&d.series_uid)).collect();
        ensure!(dist.total == matched.len(), "{field} `{q}`: total {} vs {}", dist.total, matched.len());
        let facet = dist.get(field).ok_or("facet missing")?;
        let (counts, missing) = oracle::value_counts(&matched, field);
        ensure!(facet.missing_count == missing, "{field} `{q}`: missing {} vs {missing}", facet.missing_count);
        if kind == FieldKind::Number && counts.len() > 50 {
            let mut want: Vec<usize> = oracle::binned_counts(&matched, field).iter().map(|b| b.1).collect();
            let mut got: Vec<usize> = facet.buckets.iter().map(|b| b.count).collect();
            want.sort();
            got.sort();
            ensure!(got == want, "{field} `{q}`: bins {got:?} vs {want:?}");
        } else {
            let got: Vec<(String, usize)> = facet.buckets.iter().map(|b| (b.value.clone(), b.count)).collect();
            let mut want: Vec<(String, usize)> = counts.into_iter().collect();
            want.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| tiebreak(&a.0, &b.0)));
            ensure!(got == want, "{field} `{q}`: buckets differ");
        }

        let field = completable[rng.gen_range(0..completable.len())];
        let all = oracle::autocomplete(&docs, field, "", usize::MAX);
        let prefix = match all.get(rng.gen_range(0..all.len().max(1))) {
            Some((v, _)) if rng.gen_bool(0.8) => v.chars().take(rng.gen_range(0..=2)).collect(),
            _ => String::new(),
        };
        let got = index.autocomplete(field, &prefix, 10);
        let want = oracle::autocomplete(&docs, field, &prefix, 10);
        ensure!(got == want, "autocomplete {field} `{prefix}`: {got:?} vs {want:?}");
    }
    Ok("20/20 facets and 20/20 completions equal brute-force counts".into())
}

// ---------------------------------------------------------------- rendering

fn windowing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10_000);
    for _ in 0..10_000 {
        let v: i64 = rng.gen_range(-4096..4096);
        let c2: i64 = rng.gen_range(-8192..8192);
        let w: i64 = rng.gen_range(2..4000);
        let got = window_value(v as f64, c2 as f64 / 2.0, w as f64);
        let want = oracle::window_exact(2 * v, c2, w);
        ensure!(got == want, "v={v} c={} w={w}: {got} vs {want}", c2 as f64 / 2.0);
    }
    Ok("10000/10000 triples exact".into())
}

fn star_polygon(rng: &mut StdRng, size: i64) -> Vec<(i64, i64)> {
    let k = rng.gen_range(3..12);
    let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let c = size as f64 / 2.0;
    let mut poly: Vec<(i64, i64)> = angles
        .iter()
        .map(|a| {
            let r = rng.gen_range(2.0..c + 4.0);
            ((c + r * a.cos()).round() as i64, (c + r * a.sin()).round() as i64)
        })
        .collect();
    poly.dedup();
    poly
}

fn rendering() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1000);
    for n in 0..1000 {
        let bytes: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
        let bits = bytes.len() * 8 - rng.gen_range(0..8);
        let unpacked = unpack_bits(&bytes, bits);
        for (i, b) in unpacked.iter().enumerate() {
            ensure!(*b == oracle::naive_bit(&bytes, i), "byte string {n}: bit {i}");
        }
        ensure!(pack_bits(&unpacked) == mask_tail(&bytes, bits), "byte string {n}: repack");
    }
    let size = 32;
    for n in 0..100 {
        let poly = star_polygon(&mut rng, size);
        let mask = fill_polygon(&poly, size as usize, size as usize);
        for r in 0..size {
            for c in 0..size {
                ensure!(
                    mask.get(r as usize, c as usize) == oracle::point_in_polygon((c, r), &poly),
                    "polygon {n} {poly:?}: pixel ({c}, {r})"
                );
            }
        }
    }
    let mut spec = fixtures::SeriesSpec::new("acceptance-seg", "CT");
    spec.rows = 48;
    spec.columns = 48;
    let images = fixtures::series(&spec);
    let seg = fixtures::seg_for(&images, &["liver"]);
    let rt = fixtures::rtstruct_for(&images, &[("tumor", vec![(5.0, 5.0), (20.0, 5.0), (12.0, 20.0)])]);
    let cfg = ThumbnailConfig::with_edge(64);
    for (what, related) in [("SEG", vec![seg]), ("RTSTRUCT", vec![rt])] {
        let img = thumbnail_image(&images, &related, &cfg);
        let colored = img.data.chunks(3).filter(|p| !(p[0] == p[1] && p[1] == p[2])).count();
        ensure!(colored > 0, "{what} overlay left the thumbnail gray");
        let (a, b) = (make_thumbnail(&images, &related, &cfg), make_thumbnail(&images, &related, &cfg));
        ensure!(a == b, "{what} thumbnail differs between runs");
    }
    Ok("1000/1000 bit strings, 100/100 polygons, SEG and RTSTRUCT thumbnails colored and stable".into())
}

fn mask_tail(bytes: &[u8], bits: usize) -> Vec<u8> {
    let mut v = bytes.to_vec();
    if bits % 8 != 0 {
        let last = v.len() - 1;
        v[last] &= (1u8 << (bits % 8)) - 1;
    }
    v
}

// ---------------------------------------------------------------- service scenarios

struct Service {
    _dir: tempfile::TempDir,
    root: PathBuf,
    state: AppState,
    app: Router,
}

fn service(manifests: Vec<AnnotatorManifest>) -> Service {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let cfg = Config {
        data_dir: root.join("data"),
        static_dir: root.join("static"),
        ..Config::default()
    };
    let (cat, _) = Catalog::open(&cfg.data_dir, &cfg.archive_dir()).unwrap();
    let state = AppState::new(Arc::new(cat), manifests, &cfg);
    let app = router(state.clone(), &cfg.static_dir);
    Service {
        _dir: dir,
        root,
        state,
        app,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Json>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Json>) -> Result<Json, String> {
    let (status, bytes) = call(app, method, uri, body).await;
    ensure!(status.is_success(), "{method} {uri}: {status} {}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).map_err(|e| format!("{method} {uri}: {e}"))
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn items(objs: &[DicomObject]) -> Vec<IngestItem> {
    objs.iter()
        .map(|o| IngestItem {
            object: o.clone(),
            bytes: write_file(o).unwrap(),
        })
        .collect()
}

const OTHER_VENDOR: &str = "GE MEDICAL SYSTEMS, LLC";

fn bias_scenario() -> Outcome {
    let svc = service(Vec::new());
    for i in 0..100 {
        let mut spec = fixtures::SeriesSpec::new(&format!("bias/{i}"), "CT");
        spec.instances = 1;
        spec.rows = 8;
        spec.columns = 8;
        spec.kernel = Some(if i % 10 == 3 { "B70f" } else { "B30f" }.into());
        spec.manufacturer = if i % 5 == 1 { OTHER_VENDOR } else { "SIEMENS" }.into();
        svc.state.catalog.ingest(items(&fixtures::series(&spec))).map_err(|e| e.to_string())?;
    }
    runtime().block_on(async {
        let v = call_json(&svc.app, "GET", "/api/aggregate?q=Modality%3ACT&fields=ConvolutionKernel,Manufacturer", None).await?;
        let dist: FacetDistribution = serde_json::from_value(v).map_err(|e| e.to_string())?;
        ensure!(dist.total == 100, "total {}", dist.total);
        let pairs = |f: &str| -> Vec<(String, usize)> {
            dist.get(f)
                .map(|x| x.buckets.iter().map(|b| (b.value.clone(), b.count)).collect())
                .unwrap_or_default()
        };
        let kernels = pairs("ConvolutionKernel");
        ensure!(kernels == [("B30f".into(), 90), ("B70f".into(), 10)], "kernels {kernels:?}");
        let vendors = pairs("Manufacturer");
        ensure!(vendors == [("SIEMENS".into(), 80), (OTHER_VENDOR.into(), 20)], "manufacturers {vendors:?}");
        ensure!(dist.facets.iter().all(|f| f.missing_count == 0), "unexpected missing counts");

        let (status, csv) = call(&svc.app, "GET", "/api/aggregate.csv?q=Modality%3ACT&field=Manufacturer", None).await;
        ensure!(status == StatusCode::OK, "csv status {status}");
        let want = format!("value,count\nSIEMENS,80\n\"{OTHER_VENDOR}\",20\n");
        ensure!(csv == want.as_bytes(), "csv {:?}", String::from_utf8_lossy(&csv));
        let (_, csv) = call(&svc.app, "GET", "/api/aggregate.csv?field=ConvolutionKernel", None).await;
        ensure!(csv == b"value,count\nB30f,90\nB70f,10\n", "csv {:?}", String::from_utf8_lossy(&csv));
        Ok("kernels 90/10, manufacturers 80/20, both CSVs byte-exact".to_string())
    })
}

fn mock_manifest() -> AnnotatorManifest {
    AnnotatorManifest::from_json(
        &serde_json::to_vec(&json!({
            "name": "mock",
            "version": "1",
            "kind": "segmentation",
            "labels": ["liver", "spleen"],
            "invocation": format!("'{BIN}' mock-annotate {{input_dir}} {{output_dir}} --labels liver"),
        }))
        .unwrap(),
    )
    .unwrap()
}

fn uids_of(page: &Json) -> BTreeSet<String> {
    page["hits"]
        .as_array()
        .map(|h| h.iter().filter_map(|d| d["series_uid"].as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

fn workflow() -> Outcome {
    let svc = service(vec![mock_manifest()]);
    let incoming = svc.root.join("incoming");
    let corpus = fixtures::corpus("workflow", 20, 10, &["CT", "MR", "PT"]);
    for (i, s) in corpus.iter().enumerate() {
        fixtures::write_objects(&incoming.join(format!("s{i:02}")), s);
    }
    let ct: BTreeSet<String> = corpus
        .iter()
        .filter(|s| s[0].modality() == Some("CT"))
        .map(|s| s[0].series_uid().unwrap().to_string())
        .collect();
    runtime().block_on(async {
        let app = &svc.app;
        let start = Instant::now();
        let report = call_json(app, "POST", "/api/ingest", Some(json!({ "path": incoming }))).await?;
        let ingest_secs = start.elapsed().as_secs_f64();
        ensure!(report["indexed_series"] == 20 && report["instances"] == 200, "ingest report {report}");
        ensure!(ingest_secs < 10.0, "ingest took {ingest_secs:.2}s");

        let page = call_json(app, "GET", "/api/series?q=Modality%3ACT&size=1000", None).await?;
        let targets = uids_of(&page);
        ensure!(targets == ct, "Modality:CT returned {} series, expected {}", targets.len(), ct.len());
        let job = call_json(app, "POST", "/api/annotators/mock/run", Some(json!({ "series_uids": targets }))).await?;
        let id = job["id"].as_str().ok_or("job id")?.to_string();
        let deadline = Instant::now() + Duration::from_secs(120);
        let job = loop {
            let j = call_json(app, "GET", &format!("/api/jobs/{id}"), None).await?;
            if j["status"] == "done" || j["status"] == "failed" {
                break j;
            }
            ensure!(Instant::now() < deadline, "job still {} after 120s", j["status"]);
            tokio::time::sleep(Duration::from_millis(50)).await;
        };
        ensure!(job["status"] == "done", "job {job}");

        let q = "anatomical_structures%3Aliver%20AND%20Modality%3ACT";
        let found = uids_of(&call_json(app, "GET", &format!("/api/series?q={q}&size=1000"), None).await?);
        ensure!(found == ct, "liver AND CT returned {} series, expected {}", found.len(), ct.len());
        let livers = call_json(app, "GET", "/api/series?q=anatomical_structures%3Aliver&size=0", None).await?;
        ensure!(livers["total"] == ct.len(), "liver on non-CT series: {}", livers["total"]);

        call_json(app, "POST", "/api/tags/bulk", Some(json!({ "uids": found, "add": ["reviewed"] }))).await?;
        let reviewed = call_json(app, "GET", "/api/series?q=tags%3Areviewed&size=0", None).await?;
        ensure!(reviewed["total"] == ct.len(), "tags:reviewed total {}", reviewed["total"]);

        let ds = call_json(app, "POST", "/api/datasets", Some(json!({ "name": "liver CT" }))).await?;
        let ds_id = ds["id"].as_str().ok_or("dataset id")?.to_string();
        call_json(app, "PATCH", &format!("/api/datasets/{ds_id}/series"), Some(json!({ "add": found }))).await?;
        let ds = call_json(app, "GET", &format!("/api/datasets/{ds_id}"), None).await?;
        let members: BTreeSet<String> = serde_json::from_value(ds["series"].clone()).map_err(|e| format!("dataset {ds}: {e}"))?;
        ensure!(members == ct, "dataset holds {} series", members.len());
        let fsck = svc.state.catalog.fsck();
        ensure!(fsck.is_clean(), "fsck {fsck:?}");
        Ok(format!(
            "200 instances ingested in {ingest_secs:.2}s; {} CT series annotated, tagged and collected; fsck clean",
            ct.len()
        ))
    })
}

// ---------------------------------------------------------------- crash safety

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.path().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

fn truncate(path: &Path, rng: &mut StdRng) {
    let len = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
    if let Ok(f) = OpenOptions::new().write(true).open(path) {
        f.set_len(rng.gen_range(0..=len)).unwrap();
    }
}

/// Index/store/archive agreement after a restart.
fn check_invariants(cat: &Catalog) -> Result<usize, String> {
    let snap = cat.index.snapshot();
    let archive = cat.archive_dir();
    let mut on_disk = 0;
    for dir in std::fs::read_dir(archive).map_err(|e| e.to_string())?.flatten() {
        let files = std::fs::read_dir(dir.path())
            .map_err(|e| e.to_string())?
            .flatten()
            .filter(|f| f.path().extension().is_some_and(|x| x == "dcm"))
            .count();
        on_disk += usize::from(files > 0);
    }
    ensure!(snap.len() == on_disk, "{} series indexed, {on_disk} archived", snap.len());
    for d in snap.documents() {
        ensure!(d.tags == cat.store.tags_of(&d.series_uid), "tag mirror differs for {}", d.series_uid);
        let files = cat.series_files(&d.series_uid).len();
        ensure!(d.instance_count as usize == files, "{}: {} instances indexed, {files} archived", d.series_uid, d.instance_count);
    }
    let fields = vec!["Modality".to_string(), "tags".to_string(), "instance_count".to_string()];
    let dist = cat.index.aggregate(&QueryAst::MatchAll, &fields);
    for f in ["Modality", "instance_count"] {
        let facet = dist.get(f).ok_or("facet missing")?;
        let sum = facet.buckets.iter().map(|b| b.count).sum::<usize>() + facet.missing_count;
        ensure!(sum == dist.total, "{f} facet sums to {sum}, total {}", dist.total);
    }
    let fsck = cat.fsck();
    ensure!(fsck.is_clean(), "fsck {fsck:?}");
    Ok(snap.len())
}

fn crash_safety() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let (data, archive) = (base.path().join("data"), base.path().join("archive"));
    let corpus = fixtures::corpus("crash", 8, 3, &["CT", "MR", "PT"]);
    {
        let (cat, _) = Catalog::open(&data, &archive).map_err(|e| e.to_string())?;
        for s in &corpus {
            cat.ingest(items(s)).map_err(|e| e.to_string())?;
        }
        let uids: Vec<String> = corpus.iter().map(|s| s[0].series_uid().unwrap().to_string()).collect();
        cat.bulk_tag(&uids[..4], &["qc:pass".into()], &[]).map_err(|e| e.to_string())?;
        cat.bulk_tag(&uids[3..], &["reviewed".into()], &[]).map_err(|e| e.to_string())?;
        let ds = cat.create_dataset("crash").map_err(|e| e.to_string())?;
        cat.modify_membership(&ds.id, &uids, &[]).map_err(|e| e.to_string())?;
    }
    let mut rng = StdRng::seed_from_u64(8);
    for k in 0..20 {
        let root = base.path().join(format!("run{k}"));
        copy_dir(&data, &root.join("data"));
        copy_dir(&archive, &root.join("archive"));
        truncate(&root.join("data/index.ndjson"), &mut rng);
        truncate(&root.join("data/store.ndjson"), &mut rng);
        let (cat, _) = Catalog::open(&root.join("data"), &root.join("archive")).map_err(|e| format!("run {k}: {e}"))?;
        let n = check_invariants(&cat).map_err(|e| format!("truncation {k}: {e}"))?;
        ensure!(n == corpus.len(), "truncation {k}: {n} series after restart");
    }

    // Kill a real ingest part way through.
    let src = base.path().join("bulk");
    for (i, s) in fixtures::corpus("killed", 30, 6, &["CT", "MR"]).iter().enumerate() {
        fixtures::write_objects(&src.join(format!("s{i:02}")), s);
    }
    let mut killed = Vec::new();
    for (k, delay) in [40u64, 120, 300].into_iter().enumerate() {
        let data = base.path().join(format!("killed{k}"));
        let mut child = Command::new(BIN)
            .args(["ingest", src.to_str().unwrap()])
            .env("CURATOR_DATA_DIR", &data)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        std::thread::sleep(Duration::from_millis(delay));
        let _ = child.kill();
        let _ = child.wait();
        let (cat, _) = Catalog::open(&data, &data.join("archive")).map_err(|e| format!("kill {k}: {e}"))?;
        killed.push(check_invariants(&cat).map_err(|e| format!("kill {k}: {e}"))?);
    }
    Ok(format!("20/20 truncations recover; killed ingests recover with {killed:?} series"))
}
