//! Frozen public-suffix snapshot and registrable-domain extraction.

use std::collections::HashSet;
use std::sync::OnceLock;

const SNAPSHOT: &str = include_str!("../../data/public_suffixes.txt");

fn suffixes() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        SNAPSHOT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect()
    })
}

/// All suffixes in the bundled snapshot, sorted.
pub fn known_suffixes() -> Vec<&'static str> {
    let mut v: Vec<&str> = suffixes().iter().map(String::as_str).collect();
    v.sort_unstable();
    v
}

pub fn is_public_suffix(candidate: &str) -> bool {
    suffixes().contains(&candidate.to_lowercase())
}

/// Number of trailing labels that form the public suffix of `labels`.
///
/// Longest listed match wins; an unlisted TLD counts as a one-label suffix.
pub fn suffix_len(labels: &[String]) -> usize {
    let set = suffixes();
    let lower: Vec<String> = labels.iter().map(|l| l.to_lowercase()).collect();
    let mut best = 1;
    for take in 1..=lower.len() {
        let candidate = lower[lower.len() - take..].join(".");
        if set.contains(&candidate) {
            best = take;
        }
    }
    best.min(labels.len())
}

/// Registrable domain of a host, case preserved: the public suffix plus one
/// label. A host that is itself a suffix (or a single label) is returned
/// whole.
pub fn registrable_domain(labels: &[String]) -> String {
    let take = (suffix_len(labels) + 1).min(labels.len());
    labels[labels.len() - take..].join(".")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(host: &str) -> Vec<String> {
        host.split('.').map(str::to_owned).collect()
    }

    #[test]
    fn snapshot_size() {
        let n = known_suffixes().len();
        assert!((50..=70).contains(&n), "{n}");
    }

    #[test]
    fn multi_label_suffixes() {
        assert_eq!(registrable_domain(&labels("www.hsbc.co.uk")), "hsbc.co.uk");
        assert_eq!(
            registrable_domain(&labels("a.b.commbank.com.au")),
            "commbank.com.au"
        );
        assert_eq!(registrable_domain(&labels("www.paypal.com")), "paypal.com");
    }

    #[test]
    fn unlisted_tld_and_bare_suffix() {
        assert_eq!(registrable_domain(&labels("login.example.zz")), "example.zz");
        assert_eq!(registrable_domain(&labels("co.uk")), "co.uk");
        assert_eq!(registrable_domain(&labels("localhost")), "localhost");
    }

    #[test]
    fn case_is_preserved_but_ignored_for_matching() {
        assert_eq!(registrable_domain(&labels("WWW.PayPal.COM")), "PayPal.COM");
    }
}
