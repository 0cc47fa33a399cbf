//! Domain types shared by the generator, the detector, the game and the
//! feedback screens.

pub mod homoglyph;
pub mod suffix;
mod url;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use url::{parse_url, serialize_url, UrlBuilder, UrlError, UrlParts};
pub(crate) use url::ipv4_from_labels as url_ipv4;

/// Corpus and event schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Url(#[from] UrlError),
    #[error("malformed email address {0:?}")]
    MalformedAddress(String),
    #[error("legitimate items carry no tricks and fake items carry at least one (tricks: {0:?})")]
    LegitimacyMismatch(Vec<TrickTag>),
    #[error("trick {0:?} appears more than once")]
    DuplicateTrick(TrickTag),
    #[error("trick {0:?} only applies to emails")]
    EmailOnlyTrick(TrickTag),
    #[error("explanations do not line up with tricks")]
    ExplanationMismatch,
    #[error("record kind {kind:?} does not match payload")]
    KindMismatch { kind: ItemKind },
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
}

/// A deception technique injected into a fake item.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum TrickTag {
    IpAddressHost,
    UserinfoDeception,
    Typosquat,
    HomoglyphSubstitution,
    DeceptiveSubdomain,
    HyphenatedBrand,
    WrongTld,
    NoHttps,
    LinkTextMismatch,
    ReplyToMismatch,
    UrgentLanguage,
}

impl TrickTag {
    pub const ALL: [TrickTag; 11] = [
        TrickTag::IpAddressHost,
        TrickTag::UserinfoDeception,
        TrickTag::Typosquat,
        TrickTag::HomoglyphSubstitution,
        TrickTag::DeceptiveSubdomain,
        TrickTag::HyphenatedBrand,
        TrickTag::WrongTld,
        TrickTag::NoHttps,
        TrickTag::LinkTextMismatch,
        TrickTag::ReplyToMismatch,
        TrickTag::UrgentLanguage,
    ];

    pub fn email_only(self) -> bool {
        matches!(
            self,
            TrickTag::LinkTextMismatch | TrickTag::ReplyToMismatch | TrickTag::UrgentLanguage
        )
    }

    /// Whether the trick decides which host the item points at. At most one
    /// such trick can be applied to an item.
    pub fn replaces_host(self) -> bool {
        matches!(
            self,
            TrickTag::IpAddressHost
                | TrickTag::Typosquat
                | TrickTag::HomoglyphSubstitution
                | TrickTag::DeceptiveSubdomain
                | TrickTag::HyphenatedBrand
                | TrickTag::WrongTld
        )
    }

    pub fn applies_to(self, kind: ItemKind) -> bool {
        kind == ItemKind::Email || !self.email_only()
    }

    pub fn label(self) -> &'static str {
        match self {
            TrickTag::IpAddressHost => "numeric IP address host",
            TrickTag::UserinfoDeception => "brand hidden before an @ sign",
            TrickTag::Typosquat => "misspelled brand domain",
            TrickTag::HomoglyphSubstitution => "look-alike characters",
            TrickTag::DeceptiveSubdomain => "brand used as a subdomain",
            TrickTag::HyphenatedBrand => "brand glued to extra words",
            TrickTag::WrongTld => "wrong top-level domain",
            TrickTag::NoHttps => "no HTTPS",
            TrickTag::LinkTextMismatch => "link text differs from destination",
            TrickTag::ReplyToMismatch => "reply-to address elsewhere",
            TrickTag::UrgentLanguage => "urgent or threatening language",
        }
    }
}

impl fmt::Display for TrickTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A player's or the detector's call on an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Legitimate,
    Phishing,
}

impl Verdict {
    pub fn from_legitimate(legitimate: bool) -> Self {
        if legitimate {
            Verdict::Legitimate
        } else {
            Verdict::Phishing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Url,
    Email,
}

/// `local-part@domain`, serialized as that string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EmailAddress {
    local_part: String,
    domain: Vec<String>,
    registrable_domain: String,
}

impl EmailAddress {
    pub fn parse(raw: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::MalformedAddress(raw.to_owned());
        let (local, domain) = raw.rsplit_once('@').ok_or_else(bad)?;
        if local.is_empty() || local.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(bad());
        }
        let labels = url::host_labels(domain).ok_or_else(bad)?;
        let registrable_domain = if url::ipv4_from_labels(&labels).is_some() {
            labels.join(".")
        } else {
            suffix::registrable_domain(&labels)
        };
        Ok(Self {
            local_part: local.to_owned(),
            domain: labels,
            registrable_domain,
        })
    }

    pub fn local_part(&self) -> &str {
        &self.local_part
    }

    pub fn domain(&self) -> String {
        self.domain.join(".")
    }

    pub fn domain_labels(&self) -> &[String] {
        &self.domain
    }

    pub fn registrable_domain(&self) -> &str {
        &self.registrable_domain
    }
}

impl fmt::Display for EmailAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.local_part, self.domain())
    }
}

impl TryFrom<String> for EmailAddress {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<EmailAddress> for String {
    fn from(a: EmailAddress) -> Self {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyLink {
    pub anchor_text: String,
    pub href: UrlParts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailItem {
    pub display_name: String,
    pub from: EmailAddress,
    pub reply_to: Option<EmailAddress>,
    pub subject: String,
    pub body_links: Vec<BodyLink>,
    pub urgent: bool,
}

impl EmailItem {
    /// The text a player sees in the reveal dialog.
    pub fn render(&self) -> String {
        let mut out = format!("From: {} <{}>\n", self.display_name, self.from);
        if let Some(r) = &self.reply_to {
            out.push_str(&format!("Reply-To: {r}\n"));
        }
        out.push_str(&format!("Subject: {}\n", self.subject));
        for link in &self.body_links {
            out.push_str(&format!("Link: [{}]({})\n", link.anchor_text, link.href));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Url(UrlParts),
    Email(EmailItem),
}

impl Payload {
    pub fn kind(&self) -> ItemKind {
        match self {
            Payload::Url(_) => ItemKind::Url,
            Payload::Email(_) => ItemKind::Email,
        }
    }

    /// Display string for the reveal dialog.
    pub fn render(&self) -> String {
        match self {
            Payload::Url(u) => u.raw().to_owned(),
            Payload::Email(e) => e.render(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub String);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub trick: TrickTag,
    pub text: String,
}

/// One URL or email with its ground truth. Construction enforces that an item
/// is legitimate exactly when it carries no tricks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ItemRecord", into = "ItemRecord")]
pub struct PhishItem {
    id: ItemId,
    payload: Payload,
    legitimate: bool,
    tricks: Vec<TrickTag>,
    explanation: Vec<Explanation>,
    brand: String,
}

impl PhishItem {
    pub fn new(
        id: ItemId,
        payload: Payload,
        legitimate: bool,
        tricks: Vec<TrickTag>,
        explanation: Vec<Explanation>,
        brand: String,
    ) -> Result<Self, ModelError> {
        if legitimate != tricks.is_empty() {
            return Err(ModelError::LegitimacyMismatch(tricks));
        }
        for (i, t) in tricks.iter().enumerate() {
            if tricks[..i].contains(t) {
                return Err(ModelError::DuplicateTrick(*t));
            }
            if !t.applies_to(payload.kind()) {
                return Err(ModelError::EmailOnlyTrick(*t));
            }
        }
        if explanation.len() != tricks.len()
            || explanation.iter().zip(&tricks).any(|(e, t)| e.trick != *t)
        {
            return Err(ModelError::ExplanationMismatch);
        }
        Ok(Self {
            id,
            payload,
            legitimate,
            tricks,
            explanation,
            brand,
        })
    }

    pub fn id(&self) -> &ItemId {
        &self.id
    }

    pub fn kind(&self) -> ItemKind {
        self.payload.kind()
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn is_legitimate(&self) -> bool {
        self.legitimate
    }

    pub fn verdict(&self) -> Verdict {
        Verdict::from_legitimate(self.legitimate)
    }

    pub fn tricks(&self) -> &[TrickTag] {
        &self.tricks
    }

    pub fn explanation(&self) -> &[Explanation] {
        &self.explanation
    }

    pub fn brand(&self) -> &str {
        &self.brand
    }
}

/// One corpus line.
#[derive(Serialize, Deserialize)]
struct ItemRecord {
    v: u32,
    id: ItemId,
    kind: ItemKind,
    payload: Payload,
    legitimate: bool,
    tricks: Vec<TrickTag>,
    explanation: Vec<Explanation>,
    brand: String,
}

impl From<PhishItem> for ItemRecord {
    fn from(i: PhishItem) -> Self {
        Self {
            v: SCHEMA_VERSION,
            id: i.id,
            kind: i.payload.kind(),
            payload: i.payload,
            legitimate: i.legitimate,
            tricks: i.tricks,
            explanation: i.explanation,
            brand: i.brand,
        }
    }
}

impl TryFrom<ItemRecord> for PhishItem {
    type Error = ModelError;

    fn try_from(r: ItemRecord) -> Result<Self, Self::Error> {
        if r.v != SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion(r.v));
        }
        if r.kind != r.payload.kind() {
            return Err(ModelError::KindMismatch { kind: r.kind });
        }
        PhishItem::new(
            r.id,
            r.payload,
            r.legitimate,
            r.tricks,
            r.explanation,
            r.brand,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url_item(legit: bool, tricks: Vec<TrickTag>) -> Result<PhishItem, ModelError> {
        let explanation = tricks
            .iter()
            .map(|t| Explanation {
                trick: *t,
                text: "x".into(),
            })
            .collect();
        PhishItem::new(
            ItemId("i".into()),
            Payload::Url(parse_url("http://www.paypal.com/").unwrap()),
            legit,
            tricks,
            explanation,
            "paypal".into(),
        )
    }

    #[test]
    fn legitimacy_matches_tricks() {
        assert!(url_item(true, vec![]).is_ok());
        assert!(url_item(false, vec![TrickTag::NoHttps]).is_ok());
        assert!(matches!(
            url_item(true, vec![TrickTag::NoHttps]),
            Err(ModelError::LegitimacyMismatch(_))
        ));
        assert!(matches!(
            url_item(false, vec![]),
            Err(ModelError::LegitimacyMismatch(_))
        ));
    }

    #[test]
    fn url_items_reject_email_tricks() {
        assert!(matches!(
            url_item(false, vec![TrickTag::UrgentLanguage]),
            Err(ModelError::EmailOnlyTrick(_))
        ));
        assert!(matches!(
            url_item(false, vec![TrickTag::NoHttps, TrickTag::NoHttps]),
            Err(ModelError::DuplicateTrick(_))
        ));
    }

    #[test]
    fn record_kind_must_match_payload() {
        let item = url_item(false, vec![TrickTag::NoHttps]).unwrap();
        let mut v = serde_json::to_value(&item).unwrap();
        assert_eq!(v["v"], 1);
        assert_eq!(v["kind"], "url");
        assert_eq!(serde_json::from_value::<PhishItem>(v.clone()).unwrap(), item);
        v["kind"] = "email".into();
        assert!(serde_json::from_value::<PhishItem>(v).is_err());
    }

    #[test]
    fn address_parsing() {
        let a = EmailAddress::parse("service@mail.paypal.com").unwrap();
        assert_eq!(a.local_part(), "service");
        assert_eq!(a.registrable_domain(), "paypal.com");
        assert_eq!(a.to_string(), "service@mail.paypal.com");
        for bad in ["", "nobody", "@paypal.com", "a b@x.com", "a@", "a@x..com"] {
            assert!(EmailAddress::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn link_mismatch_is_representable() {
        let link = BodyLink {
            anchor_text: "https://www.paypal.com/".into(),
            href: parse_url("https://account-review.net/x").unwrap(),
        };
        let anchor = parse_url(&link.anchor_text).unwrap();
        assert_ne!(anchor.registrable_domain(), link.href.registrable_domain());
    }
}
