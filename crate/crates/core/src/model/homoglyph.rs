//! Confusable-character table shipped as `data/homoglyphs.json`.

use std::sync::OnceLock;

use serde::Deserialize;

const TABLE: &str = include_str!("../../data/homoglyphs.json");

#[derive(Debug, Clone, Deserialize)]
pub struct HomoglyphPair {
    pub latin: char,
    pub confusable: String,
    pub script: String,
}

#[derive(Deserialize)]
struct TableFile {
    v: u32,
    pairs: Vec<HomoglyphPair>,
}

pub fn pairs() -> &'static [HomoglyphPair] {
    static PAIRS: OnceLock<Vec<HomoglyphPair>> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let file: TableFile = serde_json::from_str(TABLE).expect("bundled homoglyph table");
        assert_eq!(file.v, 1, "homoglyph table version");
        file.pairs
    })
}

/// Look-alikes that can stand in for `latin`.
pub fn confusables_for(latin: char) -> impl Iterator<Item = &'static str> {
    pairs()
        .iter()
        .filter(move |p| p.latin == latin)
        .map(|p| p.confusable.as_str())
}

/// Lowercases `s` and folds every confusable back to its Latin letter.
/// Two strings with equal skeletons render near identically.
pub fn skeleton(s: &str) -> String {
    let mut out: String = s.to_lowercase();
    // Multi-character look-alikes first so "rn" folds before single chars.
    let mut multi: Vec<&HomoglyphPair> = pairs()
        .iter()
        .filter(|p| p.confusable.chars().count() > 1)
        .collect();
    multi.sort_by_key(|p| std::cmp::Reverse(p.confusable.len()));
    for p in multi {
        out = out.replace(p.confusable.as_str(), &p.latin.to_string());
    }
    out.chars()
        .map(|c| {
            pairs()
                .iter()
                .find(|p| p.confusable.chars().count() == 1 && p.confusable.starts_with(c))
                .map_or(c, |p| p.latin)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_about_twenty_pairs() {
        assert!((18..=26).contains(&pairs().len()));
        for p in pairs() {
            assert!(p.latin.is_ascii_lowercase());
            assert_ne!(p.confusable, p.latin.to_string());
        }
    }

    #[test]
    fn skeleton_folds_confusables() {
        assert_eq!(skeleton("pаypal"), "paypal");
        assert_eq!(skeleton("paypa1"), "paypal");
        assert_eq!(skeleton("arnazon"), "amazon");
        assert_eq!(skeleton("g00gle"), "google");
        assert_eq!(skeleton("PayPal"), "paypal");
        assert_eq!(skeleton("paypal"), "paypal");
    }

    #[test]
    fn every_confusable_folds_to_its_latin() {
        for p in pairs() {
            assert_eq!(skeleton(&p.confusable), p.latin.to_string(), "{p:?}");
        }
    }
}
