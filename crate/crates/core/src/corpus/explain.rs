//! Per-trick explanation templates. Each one points at the part of the URL
//! or email that gives the trick away.

use super::CorpusError;
use crate::model::homoglyph;
use crate::model::{Explanation, Payload, PhishItem, TrickTag, UrlParts};

/// Explanations for a fake item, one per trick in the item's order.
pub fn explain(item: &PhishItem) -> Result<Vec<Explanation>, CorpusError> {
    if item.is_legitimate() {
        return Err(CorpusError::NotApplicable);
    }
    Ok(explanations_for(item.payload(), item.tricks(), item.brand()))
}

pub fn explanations_for(payload: &Payload, tricks: &[TrickTag], brand: &str) -> Vec<Explanation> {
    tricks
        .iter()
        .map(|t| Explanation {
            trick: *t,
            text: render(*t, payload, brand),
        })
        .collect()
}

/// The URL whose structure the tricks live in: the item itself, or the first
/// link of an email.
fn cue_url(payload: &Payload) -> Option<&UrlParts> {
    match payload {
        Payload::Url(u) => Some(u),
        Payload::Email(e) => e.body_links.first().map(|l| &l.href),
    }
}

fn where_(payload: &Payload) -> &'static str {
    match payload {
        Payload::Url(_) => "address",
        Payload::Email(_) => "link destination",
    }
}

fn render(trick: TrickTag, payload: &Payload, brand: &str) -> String {
    let url = cue_url(payload);
    let host = url.map(UrlParts::host).unwrap_or_default();
    let registrable = url.map(|u| u.registrable_domain().to_owned()).unwrap_or_default();
    let place = where_(payload);
    match trick {
        TrickTag::IpAddressHost => format!(
            "The host of the {place} is the bare number {host}. Real services are reached by a \
             registered domain name; a numeric IP address in the host part hides who runs the site."
        ),
        TrickTag::UserinfoDeception => {
            let userinfo = url.and_then(UrlParts::userinfo).unwrap_or_default();
            format!(
                "In the {place}, everything before the '@' ({userinfo}) is ignored by the browser. \
                 The real host is what follows the '@': {host}."
            )
        }
        TrickTag::Typosquat => format!(
            "The registrable domain {registrable} is one character away from the real {brand} \
             domain. Compare the name just before the top-level domain letter by letter."
        ),
        TrickTag::HomoglyphSubstitution => {
            let odd: Vec<String> = registrable
                .chars()
                .filter(|c| !c.is_ascii_lowercase() && *c != '.' && *c != '-')
                .map(|c| c.to_string())
                .collect();
            let odd = if odd.is_empty() {
                "letter pairs such as \"rn\" or \"vv\"".to_owned()
            } else {
                odd.join(" ")
            };
            format!(
                "The registrable domain {registrable} (skeleton {}) swaps real letters of {brand} \
                 for look-alike characters: {odd}.",
                homoglyph::skeleton(&registrable)
            )
        }
        TrickTag::DeceptiveSubdomain => format!(
            "{brand} appears only as a subdomain in {host}. Read the host from the right: the \
             registrable domain is {registrable}, which {brand} does not own."
        ),
        TrickTag::HyphenatedBrand => format!(
            "The registrable domain {registrable} glues the {brand} name to other words with a \
             hyphen. A brand's domain is its own name, not a hyphenated variant."
        ),
        TrickTag::WrongTld => {
            let suffix = registrable.split_once('.').map(|(_, s)| s).unwrap_or("");
            format!(
                "The {place} uses the {brand} name under the wrong top-level domain (.{suffix}). \
                 Check the suffix at the end of the host, not only the name."
            )
        }
        TrickTag::NoHttps => format!(
            "The {place} starts with plain http://. Sign-in and payment pages of real services \
             always use https://."
        ),
        TrickTag::LinkTextMismatch => {
            let shown = match payload {
                Payload::Email(e) => e
                    .body_links
                    .first()
                    .map(|l| l.anchor_text.clone())
                    .unwrap_or_default(),
                Payload::Url(_) => String::new(),
            };
            format!(
                "The link text shows {shown} but the link really goes to {registrable}. Hover \
                 over a link to read its true destination before clicking."
            )
        }
        TrickTag::ReplyToMismatch => {
            let (reply, from) = match payload {
                Payload::Email(e) => (
                    e.reply_to.as_ref().map(|r| r.to_string()).unwrap_or_default(),
                    e.from.registrable_domain().to_owned(),
                ),
                Payload::Url(_) => Default::default(),
            };
            format!(
                "The Reply-To header sends answers to {reply}, outside the sender's domain \
                 {from}. Replies would reach the attacker, not {brand}."
            )
        }
        TrickTag::UrgentLanguage => {
            let subject = match payload {
                Payload::Email(e) => e.subject.clone(),
                Payload::Url(_) => String::new(),
            };
            format!(
                "The subject \"{subject}\" pushes you to act at once. Pressure is used to stop \
                 you from checking the sender and the links."
            )
        }
    }
}
