//! Hypothesis tests over a cohort of assessment records.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::AssessmentRecord;
use super::stats::{signed_rank_paired, spearman};
use super::AssessmentError;

pub const ALPHA: f64 = 0.05;
pub const MIN_RECORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisId {
    H1,
    H2,
    H3a,
    H3b,
    H3c,
    H3,
    H4a,
    H4b,
    H4c,
    /// Self-efficacy after the session versus before it.
    SelfEfficacyChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Spearman,
    SignedRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub id: HypothesisId,
    pub test: TestKind,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: usize,
    /// Spearman's rho, or the signed-rank W+ for the paired test.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub supported: Option<bool>,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub records: usize,
    pub complete_records: usize,
    pub alpha: f64,
    pub results: Vec<HypothesisResult>,
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn get(&self, id: HypothesisId) -> &HypothesisResult {
        self.results.iter().find(|r| r.id == id).expect("every id is reported")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:<34} {:<22} {:>3} {:>9} {:>10}  verdict",
            "hypothesis", "x", "y", "n", "stat", "p"
        );
        for r in &self.results {
            let num = |v: Option<f64>, prec: usize| {
                v.map_or_else(|| "-".to_owned(), |v| format!("{v:.prec$}"))
            };
            let _ = writeln!(
                s,
                "{:<20} {:<34} {:<22} {:>3} {:>9} {:>10}  {}",
                format!("{:?}", r.id),
                r.x_label,
                r.y_label,
                r.n,
                num(r.statistic, 3),
                num(r.p_value, 6),
                r.verdict
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

type Extract = fn(&AssessmentRecord) -> Option<f64>;

fn post_se(r: &AssessmentRecord) -> Option<f64> {
    r.post_self_efficacy.map(f64::from)
}

fn mean(parts: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = parts.iter().copied().collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn correlations() -> Vec<(HypothesisId, &'static str, Extract, &'static str, Extract)> {
    vec![
        (HypothesisId::H1, "motivation proxy", |r| Some(r.motivation_proxy), "avoidance behavior", |r| {
            r.metrics.avoidance_behavior
        }),
        (HypothesisId::H2, "post self-efficacy", post_se, "motivation proxy", |r| {
            Some(r.motivation_proxy)
        }),
        (HypothesisId::H3a, "procedural score", |r| r.metrics.procedural_score, "post self-efficacy", post_se),
        (HypothesisId::H3b, "conceptual score", |r| r.metrics.conceptual_score, "post self-efficacy", post_se),
        (
            HypothesisId::H3c,
            "mean(procedural, conceptual)",
            |r| mean(&[r.metrics.procedural_score, r.metrics.conceptual_score]),
            "post self-efficacy",
            post_se,
        ),
        (
            HypothesisId::H3,
            "mean(proc, concept, structural)",
            |r| {
                mean(&[
                    r.metrics.procedural_score,
                    r.metrics.conceptual_score,
                    r.metrics.structural_score,
                ])
            },
            "post self-efficacy",
            post_se,
        ),
        (HypothesisId::H4a, "heuristic delta", |r| r.metrics.heuristic_delta, "post self-efficacy", post_se),
        (
            HypothesisId::H4b,
            "observational score",
            |r| r.metrics.observational_score,
            "post self-efficacy",
            post_se,
        ),
        (
            HypothesisId::H4c,
            "mean(heuristic01, observational)",
            |r| {
                mean(&[
                    r.metrics.heuristic_delta.map(|d| (d + 1.0) / 2.0),
                    r.metrics.observational_score,
                ])
            },
            "post self-efficacy",
            post_se,
        ),
    ]
}

/// Every hypothesis predicts a positive association (or, for the paired
/// test, an increase). Each is tested two-sided at [`ALPHA`] over the
/// complete records that have both of its variables.
pub fn test_hypotheses(records: &[AssessmentRecord]) -> Result<HypothesisReport, AssessmentError> {
    let complete: Vec<&AssessmentRecord> = records.iter().filter(|r| r.is_complete()).collect();
    if complete.len() < MIN_RECORDS {
        return Err(AssessmentError::InsufficientData {
            have: complete.len(),
            need: MIN_RECORDS,
        });
    }
    let mut results = Vec::new();
    for (id, xl, fx, yl, fy) in correlations() {
        let (x, y): (Vec<f64>, Vec<f64>) = complete
            .iter()
            .filter_map(|r| Some((fx(r)?, fy(r)?)))
            .unzip();
        let n = x.len();
        let mut res = HypothesisResult {
            id,
            test: TestKind::Spearman,
            x_label: xl.into(),
            y_label: yl.into(),
            x,
            y,
            n,
            statistic: None,
            p_value: None,
            supported: None,
            verdict: String::new(),
        };
        if n < MIN_RECORDS {
            res.verdict = "insufficient data".into();
        } else {
            match spearman(&res.x, &res.y) {
                Ok(c) => {
                    let ok = c.rho > 0.0 && c.p_value < ALPHA;
                    res.statistic = Some(c.rho);
                    res.p_value = Some(c.p_value);
                    res.supported = Some(ok);
                    res.verdict = if ok { "supported" } else { "not supported" }.into();
                }
                Err(e) => res.verdict = format!("undefined: {e}"),
            }
        }
        results.push(res);
    }

    let pre: Vec<f64> = complete.iter().filter_map(|r| r.pre_self_efficacy.map(f64::from)).collect();
    let post: Vec<f64> = complete.iter().filter_map(|r| post_se(r)).collect();
    let mut change = HypothesisResult {
        id: HypothesisId::SelfEfficacyChange,
        test: TestKind::SignedRank,
        x_label: "pre self-efficacy".into(),
        y_label: "post self-efficacy".into(),
        n: pre.len(),
        x: pre,
        y: post,
        statistic: None,
        p_value: None,
        supported: None,
        verdict: String::new(),
    };
    let sr = signed_rank_paired(&change.x, &change.y)?;
    let ok = sr.w_plus > sr.w_minus && sr.p_value < ALPHA;
    change.statistic = Some(sr.w_plus);
    change.p_value = Some(sr.p_value);
    change.supported = Some(ok);
    change.verdict = if ok { "supported" } else { "not supported" }.into();
    results.push(change);

    Ok(HypothesisReport {
        records: records.len(),
        complete_records: complete.len(),
        alpha: ALPHA,
        results,
        notes: vec![
            "H4a is heuristic knowledge, H4b observational knowledge, H4c their combination"
                .into(),
            "motivation is an operational proxy: optional-stage participation, review \
             completion and a three-item questionnaire"
                .into(),
        ],
    })
}
