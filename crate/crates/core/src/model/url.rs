//! Lossless URL decomposition for the two schemes the game shows.
//!
//! Parsing never normalises: case, percent escapes and non-ASCII labels are
//! kept verbatim, so `serialize_url(parse_url(s)?) == s` for every accepted
//! `s`. Homoglyph and look-alike analysis happens downstream.

use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::suffix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UrlError {
    #[error("malformed URL {raw:?}: {reason}")]
    Malformed { raw: String, reason: &'static str },
}

fn malformed(raw: &str, reason: &'static str) -> UrlError {
    UrlError::Malformed {
        raw: raw.to_owned(),
        reason,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UrlPartsRecord")]
pub struct UrlParts {
    scheme: String,
    userinfo: Option<String>,
    host: Vec<String>,
    registrable_domain: String,
    port: Option<u16>,
    path: String,
    query: Option<String>,
    fragment: Option<String>,
    raw: String,
}

/// Wire mirror of [`UrlParts`], checked against a reparse of `raw`.
#[derive(Deserialize)]
struct UrlPartsRecord {
    scheme: String,
    userinfo: Option<String>,
    host: Vec<String>,
    registrable_domain: String,
    port: Option<u16>,
    path: String,
    query: Option<String>,
    fragment: Option<String>,
    raw: String,
}

impl TryFrom<UrlPartsRecord> for UrlParts {
    type Error = String;

    fn try_from(r: UrlPartsRecord) -> Result<Self, Self::Error> {
        let parsed = parse_url(&r.raw).map_err(|e| e.to_string())?;
        let claimed = UrlParts {
            scheme: r.scheme,
            userinfo: r.userinfo,
            host: r.host,
            registrable_domain: r.registrable_domain,
            port: r.port,
            path: r.path,
            query: r.query,
            fragment: r.fragment,
            raw: r.raw,
        };
        if parsed != claimed {
            return Err(format!(
                "URL components disagree with raw string {:?}",
                claimed.raw
            ));
        }
        Ok(parsed)
    }
}

/// Characters never allowed inside a host label.
fn bad_host_char(c: char) -> bool {
    c.is_whitespace()
        || c.is_control()
        || matches!(
            c,
            '/' | '\\' | '?' | '#' | '@' | ':' | '[' | ']' | '<' | '>' | '%' | '"' | '\''
        )
}

/// Splits a hostname into labels, rejecting empty labels and stray
/// delimiters. Shared with email-address parsing.
pub(crate) fn host_labels(host: &str) -> Option<Vec<String>> {
    if host.is_empty() {
        return None;
    }
    let labels: Vec<String> = host.split('.').map(str::to_owned).collect();
    if labels
        .iter()
        .any(|l| l.is_empty() || l.chars().any(bad_host_char))
    {
        return None;
    }
    Some(labels)
}

/// Dotted-quad IPv4 literal, or `None` for a domain name.
pub(crate) fn ipv4_from_labels(labels: &[String]) -> Option<Ipv4Addr> {
    if labels.len() != 4 {
        return None;
    }
    let mut octets = [0u8; 4];
    for (slot, label) in octets.iter_mut().zip(labels) {
        if label.is_empty() || label.len() > 3 || !label.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        *slot = label.parse().ok()?;
    }
    Some(Ipv4Addr::from(octets))
}

/// Decomposes an `http` or `https` URL.
pub fn parse_url(raw: &str) -> Result<UrlParts, UrlError> {
    if raw.is_empty() {
        return Err(malformed(raw, "empty input"));
    }
    if raw.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(malformed(raw, "whitespace or control character"));
    }
    let (scheme, rest) = raw
        .split_once("://")
        .ok_or_else(|| malformed(raw, "missing \"://\" scheme separator"))?;
    if !scheme.eq_ignore_ascii_case("http") && !scheme.eq_ignore_ascii_case("https") {
        return Err(malformed(raw, "scheme is not http or https"));
    }

    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(authority_end);

    let (userinfo, hostport) = match authority.rfind('@') {
        Some(at) => (Some(authority[..at].to_owned()), &authority[at + 1..]),
        None => (None, authority),
    };

    let (host, port) = match hostport.rfind(':') {
        Some(colon) => {
            let digits = &hostport[colon + 1..];
            if digits.is_empty() || digits.len() > 5 || !digits.bytes().all(|b| b.is_ascii_digit())
            {
                return Err(malformed(raw, "invalid port"));
            }
            let port: u16 = digits
                .parse()
                .map_err(|_| malformed(raw, "port out of range"))?;
            (&hostport[..colon], Some(port))
        }
        None => (hostport, None),
    };

    let host = host_labels(host).ok_or_else(|| malformed(raw, "no host derivable"))?;

    let (before_fragment, fragment) = match tail.split_once('#') {
        Some((b, f)) => (b, Some(f.to_owned())),
        None => (tail, None),
    };
    let (path, query) = match before_fragment.split_once('?') {
        Some((p, q)) => (p, Some(q.to_owned())),
        None => (before_fragment, None),
    };

    let registrable_domain = if ipv4_from_labels(&host).is_some() {
        host.join(".")
    } else {
        suffix::registrable_domain(&host)
    };

    Ok(UrlParts {
        scheme: scheme.to_owned(),
        userinfo,
        host,
        registrable_domain,
        port,
        path: path.to_owned(),
        query,
        fragment,
        raw: raw.to_owned(),
    })
}

/// Reassembles a URL from its components.
pub fn serialize_url(parts: &UrlParts) -> String {
    let mut out = String::with_capacity(parts.raw.len());
    out.push_str(&parts.scheme);
    out.push_str("://");
    if let Some(u) = &parts.userinfo {
        out.push_str(u);
        out.push('@');
    }
    out.push_str(&parts.host.join("."));
    if let Some(p) = parts.port {
        out.push(':');
        out.push_str(&p.to_string());
    }
    out.push_str(&parts.path);
    if let Some(q) = &parts.query {
        out.push('?');
        out.push_str(q);
    }
    if let Some(f) = &parts.fragment {
        out.push('#');
        out.push_str(f);
    }
    out
}

/// Component-wise constructor for generated URLs.
#[derive(Debug, Clone, Default)]
pub struct UrlBuilder {
    pub scheme: String,
    pub userinfo: Option<String>,
    pub host: String,
    pub port: Option<u16>,
    pub path: String,
    pub query: Option<String>,
    pub fragment: Option<String>,
}

impl UrlBuilder {
    pub fn new(scheme: &str, host: &str, path: &str) -> Self {
        Self {
            scheme: scheme.to_owned(),
            host: host.to_owned(),
            path: path.to_owned(),
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<UrlParts, UrlError> {
        let mut raw = format!("{}://", self.scheme);
        if let Some(u) = &self.userinfo {
            raw.push_str(u);
            raw.push('@');
        }
        raw.push_str(&self.host);
        if let Some(p) = self.port {
            raw.push_str(&format!(":{p}"));
        }
        raw.push_str(&self.path);
        if let Some(q) = &self.query {
            raw.push('?');
            raw.push_str(q);
        }
        if let Some(f) = &self.fragment {
            raw.push('#');
            raw.push_str(f);
        }
        parse_url(&raw)
    }
}

impl UrlParts {
    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn userinfo(&self) -> Option<&str> {
        self.userinfo.as_deref()
    }

    pub fn host_labels(&self) -> &[String] {
        &self.host
    }

    pub fn host(&self) -> String {
        self.host.join(".")
    }

    pub fn registrable_domain(&self) -> &str {
        &self.registrable_domain
    }

    /// Labels to the left of the registrable domain.
    pub fn subdomain_labels(&self) -> &[String] {
        let keep = self.registrable_domain.split('.').count();
        &self.host[..self.host.len() - keep]
    }

    pub fn port(&self) -> Option<u16> {
        self.port
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn query(&self) -> Option<&str> {
        self.query.as_deref()
    }

    pub fn fragment(&self) -> Option<&str> {
        self.fragment.as_deref()
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn ipv4_host(&self) -> Option<Ipv4Addr> {
        ipv4_from_labels(&self.host)
    }

    pub fn is_ip_host(&self) -> bool {
        self.ipv4_host().is_some()
    }

    pub fn is_https(&self) -> bool {
        self.scheme.eq_ignore_ascii_case("https")
    }
}

impl fmt::Display for UrlParts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}
