//! Seeded item synthesis.
//!
//! Item `i` of a corpus draws from its own stream `derive(seed, "item/{i}")`,
//! so items are independent of one another and of generation order.

use sha2::{Digest, Sha256};
use strsim::levenshtein;

use super::explain::explanations_for;
use super::{BrandSeed, CorpusError, GenerationSpec};
use crate::model::homoglyph::{confusables_for, skeleton};
use crate::model::{
    parse_url, BodyLink, EmailAddress, EmailItem, ItemId, ItemKind, Payload, PhishItem, TrickTag,
    UrlParts,
};
use crate::rng::SeededRng;

/// Words combined into attacker-owned domains and hyphenated look-alikes.
const NEUTRAL_WORDS: &[&str] = &[
    "account", "secure", "verify", "login", "update", "support", "billing", "service", "portal",
    "center", "review", "client", "member", "notice", "access", "confirm", "online", "help",
];

const ATTACKER_TLDS: &[&str] = &["net", "info", "biz", "top", "xyz", "online", "site", "live"];

const WRONG_SUFFIXES: &[&str] = &[
    "net", "org", "info", "biz", "co", "io", "xyz", "top", "online", "support", "co.uk", "com.au",
    "ru", "cn", "de",
];

const CALM_SUBJECTS: &[&str] = &[
    "Your {brand} monthly statement is available",
    "Receipt for your recent {brand} order",
    "Welcome to your new {brand} account",
    "Your {brand} preferences were saved",
    "News from {brand} this month",
    "Your {brand} invoice",
];

const URGENT_SUBJECTS: &[&str] = &[
    "Urgent: your {brand} account has been suspended",
    "Action required: confirm your {brand} details within 24 hours",
    "Final notice: {brand} payment could not be processed",
    "Your {brand} account will be locked today",
    "Unusual activity on your {brand} account - verify now",
];

const PLAIN_ANCHORS: &[&str] = &[
    "Sign in",
    "View your account",
    "See details",
    "Review activity",
    "Manage preferences",
    "Open message",
];

const ATTACKER_MAILBOXES: &[&str] = &["support", "help", "billing", "security", "noreply"];

/// Synthesizes `spec.count` items. Identical inputs give an identical list.
pub fn generate_corpus(
    brands: &[BrandSeed],
    spec: &GenerationSpec,
) -> Result<Vec<PhishItem>, CorpusError> {
    if brands.is_empty() {
        return Err(CorpusError::EmptyBrandList);
    }
    spec.validate()?;

    let n_email = (spec.count as f64 * spec.email_fraction).round() as usize;
    let n_url = spec.count - n_email;
    let mut slots = Vec::with_capacity(spec.count);
    for (kind, n) in [(ItemKind::Url, n_url), (ItemKind::Email, n_email)] {
        let n_legit = (n as f64 * spec.legitimate_fraction).round() as usize;
        if n_legit < n && !has_applicable_trick(spec, kind) {
            return Err(CorpusError::NoApplicableTrick(kind));
        }
        slots.extend((0..n).map(|i| (kind, i < n_legit)));
    }
    SeededRng::derive(spec.seed, "corpus/slots").shuffle(&mut slots);

    let generator = Generator { brands, spec };
    slots
        .into_iter()
        .enumerate()
        .map(|(index, (kind, legit))| generator.item(index, kind, legit))
        .collect()
}

fn has_applicable_trick(spec: &GenerationSpec, kind: ItemKind) -> bool {
    TrickTag::ALL
        .iter()
        .any(|t| t.applies_to(kind) && spec.weight(*t) > 0.0)
}

struct Generator<'a> {
    brands: &'a [BrandSeed],
    spec: &'a GenerationSpec,
}

impl Generator<'_> {
    fn item(&self, index: usize, kind: ItemKind, legit: bool) -> Result<PhishItem, CorpusError> {
        let mut rng = SeededRng::derive(self.spec.seed, &format!("item/{index}"));
        let brand = rng.pick(self.brands);
        let tricks = if legit {
            Vec::new()
        } else {
            self.sample_tricks(kind, brand, &mut rng)?
        };
        let payload = match kind {
            ItemKind::Url => Payload::Url(self.url(brand, &tricks, &mut rng)?),
            ItemKind::Email => Payload::Email(self.email(brand, &tricks, &mut rng)?),
        };
        let id = item_id(self.spec.seed, index, brand.name(), &tricks, &payload);
        let explanation = explanations_for(&payload, &tricks, brand.name());
        Ok(PhishItem::new(
            id,
            payload,
            legit,
            tricks,
            explanation,
            brand.name().to_owned(),
        )?)
    }

    /// One or two compatible tricks, weighted. The second is added with
    /// probability one half when any compatible candidate remains.
    fn sample_tricks(
        &self,
        kind: ItemKind,
        brand: &BrandSeed,
        rng: &mut SeededRng,
    ) -> Result<Vec<TrickTag>, CorpusError> {
        let candidates: Vec<TrickTag> = TrickTag::ALL
            .iter()
            .copied()
            .filter(|t| t.applies_to(kind) && self.spec.weight(*t) > 0.0 && feasible(*t, brand))
            .collect();
        let weights: Vec<f64> = candidates.iter().map(|t| self.spec.weight(*t)).collect();
        let first = rng
            .weighted_index(&weights)
            .map(|i| candidates[i])
            .ok_or(CorpusError::NoApplicableTrick(kind))?;
        let mut tricks = vec![first];
        if rng.chance(0.5) {
            let compatible: Vec<TrickTag> = candidates
                .iter()
                .copied()
                .filter(|t| *t != first && !(t.replaces_host() && first.replaces_host()))
                .collect();
            let weights: Vec<f64> = compatible.iter().map(|t| self.spec.weight(*t)).collect();
            if let Some(i) = rng.weighted_index(&weights) {
                tricks.push(compatible[i]);
            }
        }
        tricks.sort();
        Ok(tricks)
    }

    fn url(
        &self,
        brand: &BrandSeed,
        tricks: &[TrickTag],
        rng: &mut SeededRng,
    ) -> Result<UrlParts, CorpusError> {
        let template = rng.pick(brand.path_templates()).clone();
        let host_trick = tricks.iter().copied().find(|t| t.replaces_host());
        let userinfo = tricks.contains(&TrickTag::UserinfoDeception);
        // A lone link-text or userinfo trick still needs somewhere else to go.
        let needs_foreign_host = userinfo || tricks.contains(&TrickTag::LinkTextMismatch);

        let (host, path) = match host_trick {
            Some(t) => self.mutate_host(t, brand, &template, rng)?,
            None if needs_foreign_host => (self.attacker_domain(brand, rng)?, template),
            None => (brand.canonical_url().host(), template),
        };
        let scheme = if tricks.contains(&TrickTag::NoHttps) {
            "http"
        } else {
            "https"
        };
        let userinfo = if userinfo {
            let shown = if rng.chance(0.5) {
                brand.canonical_url().host()
            } else {
                brand.domain()
            };
            format!("{shown}@")
        } else {
            String::new()
        };
        Ok(parse_url(&format!("{scheme}://{userinfo}{host}{path}"))
            .map_err(crate::model::ModelError::from)?)
    }

    fn email(
        &self,
        brand: &BrandSeed,
        tricks: &[TrickTag],
        rng: &mut SeededRng,
    ) -> Result<EmailItem, CorpusError> {
        let href = self.url(brand, tricks, rng)?;
        let anchor_text = if tricks.contains(&TrickTag::LinkTextMismatch) {
            let shown = rng.pick(brand.path_templates());
            format!("https://{}{}", brand.canonical_url().host(), shown)
        } else if tricks.is_empty() && rng.chance(0.3) {
            href.raw().to_owned()
        } else {
            rng.pick(PLAIN_ANCHORS).to_string()
        };

        let reply_to = if tricks.contains(&TrickTag::ReplyToMismatch) {
            let domain = self.attacker_domain(brand, rng)?;
            Some(address(&format!("{}@{domain}", rng.pick(ATTACKER_MAILBOXES)))?)
        } else if tricks.is_empty() && rng.chance(0.3) {
            Some(address(&format!("support@{}", brand.canonical_sender().domain()))?)
        } else {
            None
        };

        let urgent = tricks.contains(&TrickTag::UrgentLanguage);
        let subjects = if urgent { URGENT_SUBJECTS } else { CALM_SUBJECTS };
        let subject = rng
            .pick(subjects)
            .replace("{brand}", &brand.display_name());

        Ok(EmailItem {
            display_name: format!("{} Account Services", brand.display_name()),
            from: brand.canonical_sender().clone(),
            reply_to,
            subject,
            body_links: vec![BodyLink { anchor_text, href }],
            urgent,
        })
    }

    /// Host (and possibly a rewritten path) for a host-replacing trick.
    fn mutate_host(
        &self,
        trick: TrickTag,
        brand: &BrandSeed,
        template: &str,
        rng: &mut SeededRng,
    ) -> Result<(String, String), CorpusError> {
        let label = brand.label();
        let suffix = brand.suffix();
        let subdomain = brand.canonical_url().subdomain_labels().join(".");
        let with_sub = |registrable: String| {
            if subdomain.is_empty() {
                registrable
            } else {
                format!("{subdomain}.{registrable}")
            }
        };
        let host = match trick {
            TrickTag::IpAddressHost => {
                let first = loop {
                    let a = 11 + rng.below(213);
                    if a != 127 {
                        break a;
                    }
                };
                let ip = format!(
                    "{first}.{}.{}.{}",
                    rng.below(256),
                    rng.below(256),
                    1 + rng.below(254)
                );
                return Ok((ip, format!("/{}{template}", brand.name().to_lowercase())));
            }
            TrickTag::Typosquat => with_sub(format!("{}.{suffix}", self.typosquat(brand, rng)?)),
            TrickTag::HomoglyphSubstitution => {
                with_sub(format!("{}.{suffix}", homoglyph_label(&label, rng)))
            }
            TrickTag::DeceptiveSubdomain => {
                let attacker = self.attacker_domain(brand, rng)?;
                match rng.below(3) {
                    0 => format!("{label}.{suffix}.{attacker}"),
                    1 => format!("{label}.{attacker}"),
                    _ => format!("{}.{label}.{attacker}", rng.pick(NEUTRAL_WORDS)),
                }
            }
            TrickTag::HyphenatedBrand => {
                let word = rng.pick(NEUTRAL_WORDS);
                let joined = if rng.chance(0.5) {
                    format!("{label}-{word}")
                } else {
                    format!("{word}-{label}")
                };
                let registrable = format!("{joined}.{suffix}");
                if rng.chance(0.5) {
                    format!("www.{registrable}")
                } else {
                    registrable
                }
            }
            TrickTag::WrongTld => {
                let taken: Vec<String> = self.brands.iter().map(BrandSeed::domain).collect();
                let options: Vec<&&str> = WRONG_SUFFIXES
                    .iter()
                    .filter(|s| **s != suffix && !taken.contains(&format!("{label}.{s}")))
                    .collect();
                if options.is_empty() {
                    return Err(CorpusError::Exhausted {
                        what: "wrong suffix",
                        brand: brand.name().to_owned(),
                    });
                }
                with_sub(format!("{label}.{}", rng.pick(&options)))
            }
            other => unreachable!("{other:?} does not replace the host"),
        };
        Ok((host, template.to_owned()))
    }

    /// A one-edit misspelling of the brand label that is not a look-alike
    /// rendering and not another brand's domain.
    fn typosquat(&self, brand: &BrandSeed, rng: &mut SeededRng) -> Result<String, CorpusError> {
        let label: Vec<char> = brand.label().chars().collect();
        let domain = brand.domain();
        let suffix = brand.suffix();
        let taken: Vec<String> = self.brands.iter().map(BrandSeed::domain).collect();
        let labels: Vec<String> = self.brands.iter().map(BrandSeed::label).collect();
        for _ in 0..64 {
            let mut out = label.clone();
            let letter = (b'a' + rng.below(26) as u8) as char;
            match rng.below(3) {
                0 if out.len() > 3 => {
                    out.remove(rng.index(out.len()));
                }
                1 => {
                    let i = rng.index(out.len());
                    if out[i] == letter {
                        continue;
                    }
                    out[i] = letter;
                }
                _ => out.insert(rng.index(out.len() + 1), letter),
            }
            let candidate: String = out.into_iter().collect();
            let registrable = format!("{candidate}.{suffix}");
            if levenshtein(&registrable, &domain) == 1
                && skeleton(&candidate) != skeleton(&brand.label())
                && !taken.contains(&registrable)
                && !labels.contains(&candidate)
            {
                return Ok(candidate);
            }
        }
        Err(CorpusError::Exhausted {
            what: "typosquat",
            brand: brand.name().to_owned(),
        })
    }

    /// `word-word.tld`, far from every brand name.
    fn attacker_domain(&self, brand: &BrandSeed, rng: &mut SeededRng) -> Result<String, CorpusError> {
        for _ in 0..64 {
            let a = rng.pick(NEUTRAL_WORDS);
            let b = rng.pick(NEUTRAL_WORDS);
            if a == b {
                continue;
            }
            let domain = format!("{a}-{b}.{}", rng.pick(ATTACKER_TLDS));
            let clean = self.brands.iter().all(|x| {
                let lbl = x.label();
                levenshtein(&domain, &x.domain()) > 1
                    && !domain.contains(&lbl)
                    && skeleton(a) != skeleton(&lbl)
                    && skeleton(b) != skeleton(&lbl)
            });
            if clean {
                return Ok(domain);
            }
        }
        Err(CorpusError::Exhausted {
            what: "attacker domain",
            brand: brand.name().to_owned(),
        })
    }
}

fn feasible(trick: TrickTag, brand: &BrandSeed) -> bool {
    match trick {
        TrickTag::HomoglyphSubstitution => brand
            .label()
            .chars()
            .any(|c| confusables_for(c).next().is_some()),
        _ => true,
    }
}

fn homoglyph_label(label: &str, rng: &mut SeededRng) -> String {
    let chars: Vec<char> = label.chars().collect();
    let positions: Vec<usize> = (0..chars.len())
        .filter(|i| confusables_for(chars[*i]).next().is_some())
        .collect();
    let at = *rng.pick(&positions);
    let options: Vec<&str> = confusables_for(chars[at]).collect();
    let replacement = rng.pick(&options);
    let mut out = String::new();
    for (i, c) in chars.iter().enumerate() {
        if i == at {
            out.push_str(replacement);
        } else {
            out.push(*c);
        }
    }
    out
}

fn address(raw: &str) -> Result<EmailAddress, CorpusError> {
    Ok(EmailAddress::parse(raw)?)
}

/// Digest of the generation inputs that determine an item.
fn item_id(seed: u64, index: usize, brand: &str, tricks: &[TrickTag], payload: &Payload) -> ItemId {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.update(brand.as_bytes());
    h.update([0]);
    for t in tricks {
        h.update(format!("{t:?}").as_bytes());
        h.update([0]);
    }
    h.update(payload.render().as_bytes());
    let digest = h.finalize();
    ItemId(hex::encode(&digest[..12]))
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;
    use crate::corpus::{classify, default_brands};

    #[test]
    fn exact_count_and_mix() {
        let spec = GenerationSpec::new(7, 200);
        let items = generate_corpus(&default_brands(), &spec).unwrap();
        assert_eq!(items.len(), 200);
        let emails = items.iter().filter(|i| i.kind() == ItemKind::Email).count();
        assert_eq!(emails, 60);
        let legit = items.iter().filter(|i| i.is_legitimate()).count();
        assert_eq!(legit, 100);
    }

    #[test]
    fn ids_are_unique_and_stable() {
        let spec = GenerationSpec::new(8, 300);
        let a = generate_corpus(&default_brands(), &spec).unwrap();
        let b = generate_corpus(&default_brands(), &spec).unwrap();
        assert_eq!(a, b);
        let ids: HashSet<_> = a.iter().map(|i| i.id().clone()).collect();
        assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn at_most_two_tricks_one_host_replacement() {
        let items = generate_corpus(&default_brands(), &GenerationSpec::new(9, 500)).unwrap();
        for i in &items {
            assert!(i.tricks().len() <= 2);
            assert!(i.tricks().iter().filter(|t| t.replaces_host()).count() <= 1);
        }
        assert!(items.iter().any(|i| i.tricks().len() == 2));
    }

    #[test]
    fn all_legitimate_degenerate_spec() {
        let spec = GenerationSpec {
            legitimate_fraction: 1.0,
            trick_weights: TrickTag::ALL.iter().map(|t| (*t, 0.0)).collect(),
            ..GenerationSpec::new(1, 50)
        };
        let items = generate_corpus(&default_brands(), &spec).unwrap();
        assert!(items.iter().all(|i| i.is_legitimate() && i.tricks().is_empty()));
    }

    #[test]
    fn errors() {
        let spec = GenerationSpec::new(1, 10);
        assert!(matches!(
            generate_corpus(&[], &spec),
            Err(CorpusError::EmptyBrandList)
        ));
        let email_only = GenerationSpec {
            email_fraction: 0.0,
            trick_weights: BTreeMap::from([(TrickTag::LinkTextMismatch, 1.0)]),
            ..spec.clone()
        };
        assert!(matches!(
            generate_corpus(&default_brands(), &email_only),
            Err(CorpusError::NoApplicableTrick(ItemKind::Url))
        ));
        let zero = GenerationSpec { count: 0, ..spec.clone() };
        assert!(matches!(
            generate_corpus(&default_brands(), &zero),
            Err(CorpusError::InvalidSpec(_))
        ));
        let negative = GenerationSpec {
            trick_weights: BTreeMap::from([(TrickTag::NoHttps, -1.0)]),
            ..spec
        };
        assert!(generate_corpus(&default_brands(), &negative).is_err());
    }

    #[test]
    fn single_trick_weights_are_respected() {
        for tag in TrickTag::ALL {
            let spec = GenerationSpec {
                email_fraction: if tag.email_only() { 1.0 } else { 0.3 },
                legitimate_fraction: 0.0,
                trick_weights: BTreeMap::from([(tag, 1.0)]),
                ..GenerationSpec::new(21, 40)
            };
            let items = generate_corpus(&default_brands(), &spec).unwrap();
            let brands = default_brands();
            for i in &items {
                assert_eq!(i.tricks(), [tag]);
                let c = classify(i.payload(), &brands);
                assert_eq!(c.detected, [tag], "{:?}", i.payload().render());
            }
        }
    }
}
