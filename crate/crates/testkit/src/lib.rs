//! Test support: synthetic DICOM, random documents and queries, and slow reference oracles.

pub mod docs;
pub mod fixtures;
pub mod oracle;
