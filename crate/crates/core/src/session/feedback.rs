//! Help hints and Fact-and-Advice feedback.

use serde::{Deserialize, Serialize};

use crate::model::{Explanation, ItemId, ItemKind, PhishItem, TrickTag};

/// The part of an item a hint points the player at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintComponent {
    Host,
    Userinfo,
    RegistrableDomain,
    Subdomains,
    Suffix,
    Scheme,
    LinkTarget,
    ReplyTo,
    Subject,
    Checklist,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub component: HintComponent,
    pub text: String,
}

const CHECKLIST: &str = "Read the address from the right: find the top-level domain, then the \
                         name just left of it. Check the scheme is https, that nothing sits \
                         before an '@', and for emails that links and replies stay on the \
                         sender's domain.";

/// Hint for a revealed balloon. Keyed by the item's first trick; it names
/// where to look, never the verdict.
pub fn hint_for(item: &PhishItem) -> Hint {
    let Some(first) = item.tricks().first() else {
        return Hint {
            component: HintComponent::Checklist,
            text: CHECKLIST.into(),
        };
    };
    let (component, text) = match first {
        TrickTag::IpAddressHost => (
            HintComponent::Host,
            "Look at the host part between '//' and the first '/'. Is it a name or a number?",
        ),
        TrickTag::UserinfoDeception => (
            HintComponent::Userinfo,
            "Is there an '@' in the address? The browser goes to whatever follows it.",
        ),
        TrickTag::Typosquat => (
            HintComponent::RegistrableDomain,
            "Spell out the name just left of the top-level domain, one letter at a time.",
        ),
        TrickTag::HomoglyphSubstitution => (
            HintComponent::RegistrableDomain,
            "Look closely at each character of the domain name. Do all of them look like plain letters?",
        ),
        TrickTag::DeceptiveSubdomain => (
            HintComponent::Subdomains,
            "Compare the registrable domain with the subdomains in front of it. Only the \
             registrable domain tells you who owns the site.",
        ),
        TrickTag::HyphenatedBrand => (
            HintComponent::RegistrableDomain,
            "Look at the whole registrable domain, including any words joined with hyphens.",
        ),
        TrickTag::WrongTld => (
            HintComponent::Suffix,
            "Check the ending of the host. Is it the top-level domain this company normally uses?",
        ),
        TrickTag::NoHttps => (
            HintComponent::Scheme,
            "Check how the address begins.",
        ),
        TrickTag::LinkTextMismatch => (
            HintComponent::LinkTarget,
            "Compare the text of the link with the address it actually opens.",
        ),
        TrickTag::ReplyToMismatch => (
            HintComponent::ReplyTo,
            "Check where a reply to this email would go.",
        ),
        TrickTag::UrgentLanguage => (
            HintComponent::Subject,
            "Read the subject line. How is it trying to make you feel?",
        ),
    };
    Hint {
        component,
        text: text.into(),
    }
}

/// Feedback after shooting a fake balloon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactAndAdvice {
    pub item_id: ItemId,
    pub fact: String,
    pub advice: Vec<Explanation>,
}

impl FactAndAdvice {
    /// `None` for legitimate items: shooting them is never a mistake.
    pub fn for_wrong_shot(item: &PhishItem) -> Option<Self> {
        if item.is_legitimate() {
            return None;
        }
        let what = match item.kind() {
            ItemKind::Url => "web address",
            ItemKind::Email => "email",
        };
        let tricks: Vec<&str> = item.tricks().iter().map(|t| t.label()).collect();
        Some(Self {
            item_id: item.id().clone(),
            fact: format!(
                "You shot a balloon carrying a fake {what} ({}). It only imitates {} and uses: {}. \
                 Trusting it would hand your details to an attacker.",
                item.payload().render(),
                item.brand(),
                tricks.join(", ")
            ),
            advice: item.explanation().to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_brands, generate_corpus, GenerationSpec};

    fn items() -> Vec<PhishItem> {
        generate_corpus(&default_brands(), &GenerationSpec::new(21, 400)).unwrap()
    }

    #[test]
    fn deceptive_subdomain_hint_points_at_domain_structure() {
        let items = items();
        let item = items
            .iter()
            .find(|i| i.tricks().first() == Some(&TrickTag::DeceptiveSubdomain))
            .unwrap();
        let h = hint_for(item);
        assert_eq!(h.component, HintComponent::Subdomains);
        assert!(h.text.contains("registrable domain"));
    }

    #[test]
    fn legitimate_gets_checklist_and_no_feedback() {
        let items = items();
        let real = items.iter().find(|i| i.is_legitimate()).unwrap();
        assert_eq!(hint_for(real).component, HintComponent::Checklist);
        assert!(FactAndAdvice::for_wrong_shot(real).is_none());
    }

    #[test]
    fn hints_never_state_the_verdict() {
        for item in items() {
            let t = hint_for(&item).text.to_lowercase();
            for word in ["fake", "phish", "legitimate", "real", "safe"] {
                assert!(!t.contains(word), "{t}");
            }
        }
    }

    #[test]
    fn advice_is_the_explanations() {
        let items = items();
        let fake = items.iter().find(|i| i.tricks().len() == 2).unwrap();
        let f = FactAndAdvice::for_wrong_shot(fake).unwrap();
        assert_eq!(f.advice, fake.explanation());
        assert!(f.fact.contains(&fake.payload().render()));
    }
}
