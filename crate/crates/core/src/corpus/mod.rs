//! Corpus synthesis, trick detection and explanations.
//!
//! A corpus is a JSONL file of [`PhishItem`]s. Each line is one item with a
//! leading `"v": 1` schema field and keys in a fixed order
//! (`v, id, kind, payload, legitimate, tricks, explanation, brand`).

mod classify;
mod explain;
mod generate;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{
    parse_url, EmailAddress, ItemKind, ModelError, PhishItem, TrickTag, UrlParts, SCHEMA_VERSION,
};

pub use classify::{classify, Classification};
pub use explain::{explain, explanations_for};
pub use generate::generate_corpus;

const DEFAULT_BRANDS: &str = include_str!("../../data/brands.json");

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("brand list is empty")]
    EmptyBrandList,
    #[error("no trick with positive weight applies to {0:?} items")]
    NoApplicableTrick(ItemKind),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("invalid brand {brand:?}: {reason}")]
    InvalidBrand { brand: String, reason: String },
    #[error("explanations only exist for fake items")]
    NotApplicable,
    #[error("could not generate a clean {what} for brand {brand:?}")]
    Exhausted { what: &'static str, brand: String },
    #[error("line {line}: unsupported schema version {found}")]
    SchemaVersion { line: usize, found: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source material for one impersonated brand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BrandRecord", into = "BrandRecord")]
pub struct BrandSeed {
    brand: String,
    canonical_url: UrlParts,
    canonical_sender: EmailAddress,
    legitimate_path_templates: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BrandRecord {
    brand: String,
    canonical_url: String,
    canonical_sender: String,
    legitimate_path_templates: Vec<String>,
}

impl TryFrom<BrandRecord> for BrandSeed {
    type Error = CorpusError;

    fn try_from(r: BrandRecord) -> Result<Self, Self::Error> {
        BrandSeed::new(
            &r.brand,
            &r.canonical_url,
            &r.canonical_sender,
            r.legitimate_path_templates,
        )
    }
}

impl From<BrandSeed> for BrandRecord {
    fn from(b: BrandSeed) -> Self {
        Self {
            brand: b.brand,
            canonical_url: b.canonical_url.raw().to_owned(),
            canonical_sender: b.canonical_sender.to_string(),
            legitimate_path_templates: b.legitimate_path_templates,
        }
    }
}

impl BrandSeed {
    pub fn new(
        brand: &str,
        canonical_url: &str,
        canonical_sender: &str,
        legitimate_path_templates: Vec<String>,
    ) -> Result<Self, CorpusError> {
        let invalid = |reason: String| CorpusError::InvalidBrand {
            brand: brand.to_owned(),
            reason,
        };
        let url = parse_url(canonical_url).map_err(|e| invalid(e.to_string()))?;
        if !url.is_https() || url.userinfo().is_some() || url.is_ip_host() {
            return Err(invalid(
                "canonical URL must be https on a named host without userinfo".into(),
            ));
        }
        let label = url
            .registrable_domain()
            .split('.')
            .next()
            .unwrap_or_default()
            .to_owned();
        if label.len() < 3 || !label.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(invalid(format!(
                "brand label {label:?} must be at least 3 ASCII letters or digits"
            )));
        }
        let sender = EmailAddress::parse(canonical_sender).map_err(|e| invalid(e.to_string()))?;
        if !sender
            .domain()
            .eq_ignore_ascii_case(url.registrable_domain())
        {
            return Err(invalid(format!(
                "sender domain {} differs from {}",
                sender.domain(),
                url.registrable_domain()
            )));
        }
        if legitimate_path_templates.is_empty() {
            return Err(invalid("no legitimate path templates".into()));
        }
        for t in &legitimate_path_templates {
            let candidate = format!("https://{}{}", url.host(), t);
            if !t.starts_with('/') || parse_url(&candidate).is_err() {
                return Err(invalid(format!("bad path template {t:?}")));
            }
        }
        Ok(Self {
            brand: brand.to_owned(),
            canonical_url: url,
            canonical_sender: sender,
            legitimate_path_templates,
        })
    }

    pub fn name(&self) -> &str {
        &self.brand
    }

    pub fn canonical_url(&self) -> &UrlParts {
        &self.canonical_url
    }

    pub fn canonical_sender(&self) -> &EmailAddress {
        &self.canonical_sender
    }

    pub fn path_templates(&self) -> &[String] {
        &self.legitimate_path_templates
    }

    /// The registrable domain, lowercased.
    pub fn domain(&self) -> String {
        self.canonical_url.registrable_domain().to_lowercase()
    }

    /// The label directly under the public suffix, e.g. `paypal`.
    pub fn label(&self) -> String {
        self.domain().split('.').next().unwrap_or_default().to_owned()
    }

    /// The public suffix, e.g. `com` or `co.uk`.
    pub fn suffix(&self) -> String {
        let d = self.domain();
        d.split_once('.').map(|(_, s)| s.to_owned()).unwrap_or_default()
    }

    /// Human-facing brand name for sender display names.
    pub fn display_name(&self) -> String {
        let mut c = self.brand.chars();
        match c.next() {
            Some(first) => first.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    }
}

#[derive(Deserialize, Serialize)]
struct BrandFile {
    v: u32,
    brands: Vec<BrandSeed>,
}

/// Parses a brand file (`{"v": 1, "brands": [...]}`).
pub fn load_brands(json: &str) -> Result<Vec<BrandSeed>, CorpusError> {
    let file: BrandFile = serde_json::from_str(json).map_err(|e| CorpusError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if file.v != SCHEMA_VERSION {
        return Err(CorpusError::SchemaVersion {
            line: 1,
            found: u64::from(file.v),
        });
    }
    if file.brands.is_empty() {
        return Err(CorpusError::EmptyBrandList);
    }
    Ok(file.brands)
}

/// The bundled brand list.
pub fn default_brands() -> Vec<BrandSeed> {
    load_brands(DEFAULT_BRANDS).expect("bundled brand file is valid")
}

/// Parameters for [`generate_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub seed: u64,
    /// Fraction of items that are emails; the rest are bare URLs.
    pub email_fraction: f64,
    /// Fraction of items, within each kind, that are legitimate.
    pub legitimate_fraction: f64,
    pub trick_weights: BTreeMap<TrickTag, f64>,
    pub count: usize,
}

impl GenerationSpec {
    /// 30% emails, half legitimate, every trick equally likely.
    pub fn new(seed: u64, count: usize) -> Self {
        Self {
            seed,
            email_fraction: 0.3,
            legitimate_fraction: 0.5,
            trick_weights: TrickTag::ALL.iter().map(|t| (*t, 1.0)).collect(),
            count,
        }
    }

    pub fn weight(&self, trick: TrickTag) -> f64 {
        self.trick_weights
            .get(&trick)
            .copied()
            .filter(|w| w.is_finite() && *w > 0.0)
            .unwrap_or(0.0)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.count == 0 {
            return Err(CorpusError::InvalidSpec("count must be positive".into()));
        }
        for (name, f) in [
            ("email_fraction", self.email_fraction),
            ("legitimate_fraction", self.legitimate_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(CorpusError::InvalidSpec(format!("{name} must be in [0, 1]")));
            }
        }
        if let Some((t, w)) = self
            .trick_weights
            .iter()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(CorpusError::InvalidSpec(format!(
                "weight for {t:?} must be a non-negative number, got {w}"
            )));
        }
        Ok(())
    }
}

pub fn write_corpus<W: Write>(items: &[PhishItem], mut out: W) -> Result<(), CorpusError> {
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSONL corpus. Errors name the 1-based offending line.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<PhishItem>, CorpusError> {
    let mut items = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        match value.get("v").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(found) => return Err(CorpusError::SchemaVersion { line: line_no, found }),
            None => {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: "missing schema version field \"v\"".into(),
                })
            }
        }
        let item: PhishItem = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_brands_load() {
        let brands = default_brands();
        assert!(brands.len() >= 10);
        let paypal = brands.iter().find(|b| b.name() == "paypal").unwrap();
        assert_eq!(paypal.domain(), "paypal.com");
        assert_eq!(paypal.label(), "paypal");
        assert_eq!(paypal.suffix(), "com");
        let hsbc = brands.iter().find(|b| b.name() == "hsbc").unwrap();
        assert_eq!(hsbc.suffix(), "co.uk");
    }

    #[test]
    fn brand_validation() {
        let paths = vec!["/login".to_owned()];
        assert!(BrandSeed::new("x", "https://www.acme.com/", "a@acme.com", paths.clone()).is_ok());
        for (url, sender) in [
            ("http://www.acme.com/", "a@acme.com"),
            ("https://www.acme.com/", "a@other.com"),
            ("https://10.0.0.1/", "a@10.0.0.1"),
            ("https://u@www.acme.com/", "a@acme.com"),
            ("https://www.a-b.com/", "a@a-b.com"),
        ] {
            assert!(BrandSeed::new("x", url, sender, paths.clone()).is_err(), "{url}");
        }
        assert!(BrandSeed::new("x", "https://www.acme.com/", "a@acme.com", vec![]).is_err());
        assert!(BrandSeed::new(
            "x",
            "https://www.acme.com/",
            "a@acme.com",
            vec!["login".into()]
        )
        .is_err());
    }

    #[test]
    fn brand_serde_round_trip() {
        let brands = default_brands();
        let json = serde_json::to_string(&brands[0]).unwrap();
        assert!(json.contains("\"canonical_url\":\"https://www.paypal.com/\""));
        let back: BrandSeed = serde_json::from_str(&json).unwrap();
        assert_eq!(back, brands[0]);
    }

    #[test]
    fn read_corpus_reports_line_numbers() {
        let items = generate_corpus(&default_brands(), &GenerationSpec::new(1, 3)).unwrap();
        let mut buf = Vec::new();
        write_corpus(&items, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(read_corpus(text.as_bytes()).unwrap(), items);

        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[1] = lines[1].replacen("\"v\":1", "\"v\":2", 1);
        let err = read_corpus(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::SchemaVersion { line: 2, found: 2 }));

        lines[1] = "{not json".into();
        let err = read_corpus(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn line_key_order_is_stable() {
        let items = generate_corpus(&default_brands(), &GenerationSpec::new(5, 1)).unwrap();
        let line = serde_json::to_string(&items[0]).unwrap();
        let order = ["\"v\"", "\"id\"", "\"kind\"", "\"payload\"", "\"legitimate\"", "\"tricks\"", "\"explanation\"", "\"brand\""];
        let positions: Vec<usize> = order.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    }
}
