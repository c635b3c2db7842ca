use sha2::{Digest, Sha256};

/// Root for generated identifiers: the `2.25` arc takes a 128-bit decimal
/// integer and needs no registration.
pub const UID_ROOT: &str = "2.25";

/// Deterministic UID derived from a seed and a purpose path.
///
/// Same inputs always give the same UID; the result is at most 44 characters.
pub fn derived_uid(seed: &str, parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(seed.as_bytes());
    for p in parts {
        hasher.update([0u8]);
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let n = u128::from_be_bytes(digest[..16].try_into().unwrap());
    format!("{UID_ROOT}.{n}")
}

/// Random UID under the same root.
pub fn random_uid() -> String {
    format!("{UID_ROOT}.{}", uuid::Uuid::new_v4().as_u128())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = derived_uid("seed", &["series"]);
        assert_eq!(a, derived_uid("seed", &["series"]));
        assert_ne!(a, derived_uid("seed", &["study"]));
        assert_ne!(a, derived_uid("seed2", &["series"]));
        assert!(a.len() <= 64);
        assert!(a.chars().all(|c| c.is_ascii_digit() || c == '.'));
        let r = random_uid();
        assert!(r.len() <= 64 && r.starts_with("2.25."));
    }
}
