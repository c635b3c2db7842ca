use std::collections::BTreeSet;

use curator_core::index::{parse_query, Index, QueryAst, SortSpec};
use curator_testkit::docs::{random_corpus, random_queries, FieldKind, FIELDS};
use curator_testkit::oracle;
use proptest::prelude::*;

fn loaded(seed: u64, n: usize) -> (Index, Vec<curator_core::index::SeriesDocument>) {
    let docs = random_corpus(seed, n);
    let index = Index::in_memory();
    index.upsert_many(docs.clone()).unwrap();
    (index, docs)
}

fn sort_for(i: usize) -> Option<SortSpec> {
    match i % 5 {
        0 => None,
        1 => SortSpec::parse("SliceThickness"),
        2 => SortSpec::parse("-StudyDate"),
        3 => SortSpec::parse("PatientName"),
        _ => SortSpec::parse("-SeriesNumber"),
    }
}

fn tiebreak(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_agrees_with_brute_force(seed in any::<u64>()) {
        let (index, docs) = loaded(seed, 150);
        for (i, q) in random_queries(seed ^ 0x5eed, 40).iter().enumerate() {
            let sort = sort_for(i);
            let res = index.search(q, 0, 1000, sort.as_ref()).unwrap();
            let got: BTreeSet<String> = res.hits.iter().map(|h| h.series_uid.clone()).collect();
            let want = oracle::search(&docs, q);
            prop_assert_eq!(&got, &want, "query {}", q);
            prop_assert_eq!(res.total, want.len());
            for w in res.hits.windows(2) {
                let a = index.get(&w[0].series_uid).unwrap();
                let b = index.get(&w[1].series_uid).unwrap();
                prop_assert!(oracle::ordered(&a, &b, sort.as_ref()), "order {} / {}", a.series_uid, b.series_uid);
            }
        }
    }

    #[test]
    fn printed_queries_reparse(seed in any::<u64>()) {
        for q in random_queries(seed, 60) {
            let printed = q.to_string();
            let back = parse_query(&printed).map_err(|e| TestCaseError::fail(format!("{printed}: {e:?}")))?;
            prop_assert_eq!(&back, &q, "printed {}", printed);
        }
    }

    #[test]
    fn pages_partition_results(seed in any::<u64>(), size in 1usize..40) {
        let (index, _) = loaded(seed, 80);
        let all = index.search(&QueryAst::MatchAll, 0, 1000, None).unwrap();
        let mut paged = Vec::new();
        let mut from = 0;
        while from < all.total {
            paged.extend(index.search(&QueryAst::MatchAll, from, size, None).unwrap().hits);
            from += size;
        }
        prop_assert_eq!(paged, all.hits);
    }

    #[test]
    fn facets_agree_with_counts(seed in any::<u64>()) {
        let (index, docs) = loaded(seed, 120);
        let fields: Vec<String> = FIELDS.iter().map(|(f, _)| f.to_string()).collect();
        for q in random_queries(seed ^ 7, 10) {
            let dist = index.aggregate(&q, &fields);
            let hits = oracle::search(&docs, &q);
            let matched: Vec<_> = docs.iter().filter(|d| hits.contains(&d.series_uid)).collect();
            prop_assert_eq!(dist.total, matched.len());
            for (field, kind) in FIELDS {
                let facet = dist.get(field).unwrap();
                let (counts, missing) = oracle::value_counts(&matched, field);
                prop_assert_eq!(facet.missing_count, missing, "missing {}", field);
                let binned = *kind == FieldKind::Number && counts.len() > 50;
                if binned {
                    let mut want: Vec<usize> = oracle::binned_counts(&matched, field).iter().map(|b| b.1).collect();
                    let mut got: Vec<usize> = facet.buckets.iter().map(|b| b.count).collect();
                    want.sort();
                    got.sort();
                    prop_assert_eq!(got, want, "bins {}", field);
                } else {
                    let got: Vec<(String, usize)> = facet.buckets.iter().map(|b| (b.value.clone(), b.count)).collect();
                    let mut want: Vec<(String, usize)> = counts.into_iter().collect();
                    want.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| tiebreak(&a.0, &b.0)));
                    prop_assert_eq!(got, want, "facet {}", field);
                }
            }
        }
    }

    #[test]
    fn autocomplete_agrees(seed in any::<u64>(), prefix in "[a-zA-Z0-9]{0,2}") {
        let (index, docs) = loaded(seed, 100);
        for (field, kind) in FIELDS {
            if matches!(kind, FieldKind::Date | FieldKind::Text | FieldKind::Name) || *field == "has_pixel_data" {
                continue;
            }
            prop_assert_eq!(
                index.autocomplete(field, &prefix, 10),
                oracle::autocomplete(&docs, field, &prefix, 10),
                "field {}", field
            );
        }
    }
}

#[test]
fn removed_and_replaced_documents_leave_no_postings() {
    let docs = random_corpus(11, 60);
    let index = Index::in_memory();
    index.upsert_many(docs.clone()).unwrap();
    // Re-upsert every document with a different modality; the old one must stop matching.
    let changed: Vec<_> = docs
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.modality = "XA".into();
            d.fields.insert("Modality".into(), curator_core::index::FieldValue::Keywords(vec!["XA".into()]));
            d
        })
        .collect();
    index.upsert_many(changed.clone()).unwrap();
    for q in ["Modality:CT", "CT", "Modality:XA"] {
        let ast = parse_query(q).unwrap();
        let got = index.search(&ast, 0, 1000, None).unwrap().total;
        assert_eq!(got, oracle::search(&changed, &ast).len(), "{q}");
    }
}
