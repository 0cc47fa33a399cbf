//! Self-efficacy and motivation questionnaires.

use serde::{Deserialize, Serialize};

use super::AssessmentError;

const DEFAULT_INSTRUMENT: &str = include_str!("../../data/questionnaires.json");

pub const SELF_EFFICACY_ITEMS: usize = 10;
pub const MOTIVATION_ITEMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub min: u8,
    pub max: u8,
    pub anchors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub v: u32,
    pub scale: Scale,
    pub self_efficacy: Vec<String>,
    pub motivation: Vec<String>,
}

impl Questionnaire {
    pub fn load(json: &str) -> Result<Self, AssessmentError> {
        let q: Questionnaire = serde_json::from_str(json)
            .map_err(|e| AssessmentError::InvalidInstrument(e.to_string()))?;
        if q.v != 1 {
            return Err(AssessmentError::InvalidInstrument(format!(
                "unsupported version {}",
                q.v
            )));
        }
        if q.self_efficacy.len() != SELF_EFFICACY_ITEMS || q.motivation.len() != MOTIVATION_ITEMS {
            return Err(AssessmentError::InvalidInstrument(format!(
                "expected {SELF_EFFICACY_ITEMS} self-efficacy and {MOTIVATION_ITEMS} motivation items"
            )));
        }
        if q.scale.min >= q.scale.max
            || q.scale.anchors.len() != usize::from(q.scale.max - q.scale.min + 1)
        {
            return Err(AssessmentError::InvalidInstrument("bad scale".into()));
        }
        Ok(q)
    }

    pub fn bundled() -> Self {
        Self::load(DEFAULT_INSTRUMENT).expect("bundled questionnaire is valid")
    }

    pub fn validate(&self, r: &QuestionnaireResponse) -> Result<(), AssessmentError> {
        for (name, answers, expected) in [
            ("self_efficacy", &r.self_efficacy, self.self_efficacy.len()),
            ("motivation", &r.motivation, self.motivation.len()),
        ] {
            if answers.len() != expected {
                return Err(AssessmentError::InvalidResponse(format!(
                    "{name}: {} answers for {expected} items",
                    answers.len()
                )));
            }
            if let Some(bad) = answers
                .iter()
                .find(|a| !(self.scale.min..=self.scale.max).contains(*a))
            {
                return Err(AssessmentError::InvalidResponse(format!(
                    "{name}: rating {bad} outside {}..={}",
                    self.scale.min, self.scale.max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionnaireTiming {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub self_efficacy: Vec<u8>,
    pub motivation: Vec<u8>,
}

impl QuestionnaireResponse {
    /// Sum of the self-efficacy ratings, in `10..=50` for a valid response.
    pub fn self_efficacy_total(&self) -> u32 {
        self.self_efficacy.iter().map(|&a| u32::from(a)).sum()
    }

    pub fn motivation_mean(&self) -> f64 {
        if self.motivation.is_empty() {
            return 0.0;
        }
        self.motivation.iter().map(|&a| f64::from(a)).sum::<f64>() / self.motivation.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_instrument() {
        let q = Questionnaire::bundled();
        assert_eq!(q.self_efficacy.len(), 10);
        assert_eq!(q.motivation.len(), 3);
        assert!(q.self_efficacy.iter().all(|s| s.starts_with("I am confident I can")));
    }

    #[test]
    fn totals_span_ten_to_fifty() {
        let q = Questionnaire::bundled();
        for v in 1..=5u8 {
            let r = QuestionnaireResponse {
                self_efficacy: vec![v; 10],
                motivation: vec![v; 3],
            };
            q.validate(&r).unwrap();
            assert_eq!(r.self_efficacy_total(), 10 * u32::from(v));
        }
    }

    #[test]
    fn rejects_bad_responses() {
        let q = Questionnaire::bundled();
        let short = QuestionnaireResponse {
            self_efficacy: vec![3; 9],
            motivation: vec![3; 3],
        };
        assert!(q.validate(&short).is_err());
        let range = QuestionnaireResponse {
            self_efficacy: vec![3; 10],
            motivation: vec![6, 3, 3],
        };
        assert!(q.validate(&range).is_err());
        assert!(Questionnaire::load(r#"{"v":2}"#).is_err());
    }
}
