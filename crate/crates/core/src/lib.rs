//! Catalog engine for DICOM series: parsing, indexing, thumbnails, curation state and annotators.

pub mod dicom;
pub mod index;
pub mod journal;
pub mod thumbnail;
pub mod store;
pub mod annotator;
pub mod catalog;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/dicom.md")]
    struct Dicom;
    #[doc = include_str!("../../../book/src/queries.md")]
    struct Queries;
    #[doc = include_str!("../../../book/src/thumbnails.md")]
    struct Thumbnails;
    #[doc = include_str!("../../../book/src/catalog.md")]
    struct Catalog;
    #[doc = include_str!("../../../book/src/annotators.md")]
    struct Annotators;
}
