use serde::{Deserialize, Serialize};

use super::IndexError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub value: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFacet {
    pub field: String,
    pub buckets: Vec<Bucket>,
    pub missing_count: usize,
}

/// Value histograms over one result set, in requested field order.
///
/// For multi-valued fields a document counts once per distinct value, so
/// bucket counts can add up to more than `total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetDistribution {
    pub total: usize,
    pub facets: Vec<FieldFacet>,
}

impl FacetDistribution {
    pub fn get(&self, field: &str) -> Option<&FieldFacet> {
        self.facets.iter().find(|f| f.field == field)
    }
}

fn csv_field(out: &mut String, value: &str) {
    if value.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&value.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(value);
    }
}

/// `value,count` rows in bucket order, then `__missing__` when any document lacked the field.
pub fn export_csv(dist: &FacetDistribution, field: &str) -> Result<Vec<u8>, IndexError> {
    let facet = dist
        .get(field)
        .ok_or_else(|| IndexError::FieldNotInDistribution(field.to_string()))?;
    let mut out = String::from("value,count\n");
    for b in &facet.buckets {
        csv_field(&mut out, &b.value);
        out.push(',');
        out.push_str(&b.count.to_string());
        out.push('\n');
    }
    if facet.missing_count > 0 {
        out.push_str(&format!("__missing__,{}\n", facet.missing_count));
    }
    Ok(out.into_bytes())
}
