//! Lexical trick detector.
//!
//! Each trick has one rule evaluated against the brand list. The detector
//! never consults generator metadata; it sees only the payload.

use serde::{Deserialize, Serialize};
use strsim::levenshtein;

use super::BrandSeed;
use crate::model::homoglyph::skeleton;
use crate::model::{parse_url, EmailItem, Payload, TrickTag, UrlParts, Verdict};

/// Subject phrases that signal manufactured urgency. Matched
/// case-insensitively as substrings.
pub(crate) const URGENCY_CUES: &[&str] = &[
    "urgent",
    "immediately",
    "suspended",
    "suspension",
    "within 24 hours",
    "final notice",
    "action required",
    "locked",
    "verify now",
    "unusual activity",
    "expires today",
    "last warning",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Detected tricks, sorted and unique.
    pub detected: Vec<TrickTag>,
}

struct BrandFacts {
    label: String,
    suffix: String,
    domain: String,
    label_skeleton: String,
}

impl BrandFacts {
    fn of(b: &BrandSeed) -> Self {
        let label = b.label();
        Self {
            label_skeleton: skeleton(&label),
            suffix: b.suffix(),
            domain: b.domain(),
            label,
        }
    }
}

pub fn classify(payload: &Payload, brands: &[BrandSeed]) -> Classification {
    let facts: Vec<BrandFacts> = brands.iter().map(BrandFacts::of).collect();
    let mut found = Vec::new();
    match payload {
        Payload::Url(u) => url_tricks(u, &facts, &mut found),
        Payload::Email(e) => email_tricks(e, &facts, &mut found),
    }
    found.sort();
    found.dedup();
    Classification {
        verdict: if found.is_empty() {
            Verdict::Legitimate
        } else {
            Verdict::Phishing
        },
        detected: found,
    }
}

fn url_tricks(u: &UrlParts, brands: &[BrandFacts], out: &mut Vec<TrickTag>) {
    if !u.is_https() {
        out.push(TrickTag::NoHttps);
    }
    if u.userinfo().is_some() {
        out.push(TrickTag::UserinfoDeception);
    }
    if u.is_ip_host() {
        out.push(TrickTag::IpAddressHost);
        return;
    }
    domain_tricks(u.subdomain_labels(), u.registrable_domain(), brands, out);
}

/// Rules on a named host: `subdomains` are the labels left of `registrable`.
fn domain_tricks(
    subdomains: &[String],
    registrable: &str,
    brands: &[BrandFacts],
    out: &mut Vec<TrickTag>,
) {
    let registrable = registrable.to_lowercase();
    if brands.iter().any(|b| b.domain == registrable) {
        return;
    }
    let (label, suffix) = registrable
        .split_once('.')
        .unwrap_or((registrable.as_str(), ""));
    let label_skeleton = skeleton(label);
    let subdomains: Vec<String> = subdomains.iter().map(|s| s.to_lowercase()).collect();

    for b in brands {
        if label == b.label {
            if suffix != b.suffix {
                out.push(TrickTag::WrongTld);
            }
        } else if label_skeleton == b.label_skeleton {
            out.push(TrickTag::HomoglyphSubstitution);
        } else if levenshtein(&registrable, &b.domain) == 1 {
            out.push(TrickTag::Typosquat);
        }
        if label.contains('-') && label.split('-').any(|part| part == b.label) {
            out.push(TrickTag::HyphenatedBrand);
        }
        if subdomains.contains(&b.label) {
            out.push(TrickTag::DeceptiveSubdomain);
        }
    }
}

/// Anchor text that names a destination, parsed as a URL.
fn anchor_destination(anchor: &str) -> Option<UrlParts> {
    let anchor = anchor.trim();
    let lower = anchor.to_ascii_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") {
        return parse_url(anchor).ok();
    }
    if anchor.contains('.') && !anchor.contains(char::is_whitespace) {
        return parse_url(&format!("https://{anchor}")).ok();
    }
    None
}

fn email_tricks(e: &EmailItem, brands: &[BrandFacts], out: &mut Vec<TrickTag>) {
    let from_labels = e.from.domain_labels();
    if crate::model::url_ipv4(from_labels).is_some() {
        out.push(TrickTag::IpAddressHost);
    } else {
        let keep = e.from.registrable_domain().split('.').count();
        let subs = &from_labels[..from_labels.len() - keep];
        domain_tricks(subs, e.from.registrable_domain(), brands, out);
    }
    let from_domain = e.from.registrable_domain().to_lowercase();
    if let Some(reply) = &e.reply_to {
        if reply.registrable_domain().to_lowercase() != from_domain {
            out.push(TrickTag::ReplyToMismatch);
        }
    }
    let subject = e.subject.to_lowercase();
    if URGENCY_CUES.iter().any(|cue| subject.contains(cue)) {
        out.push(TrickTag::UrgentLanguage);
    }
    for link in &e.body_links {
        url_tricks(&link.href, brands, out);
        if let Some(shown) = anchor_destination(&link.anchor_text) {
            if !shown
                .registrable_domain()
                .eq_ignore_ascii_case(link.href.registrable_domain())
            {
                out.push(TrickTag::LinkTextMismatch);
            }
        }
    }
}
