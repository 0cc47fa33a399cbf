//! Checks that responses leak no ground truth.
//!
//! The scan is structural and independent of how views are built: it looks
//! for every field that could carry an item's verdict or tricks and asks
//! whether the nearest enclosing item id was already public when the
//! response was produced.

use std::collections::HashSet;

use phishshoot::session::{EventKind, SessionEvent};
use phishshoot::ItemId;
use serde_json::Value;

/// Fields that carry, or are derived from, an item's ground truth.
pub const TRUTH_KEYS: &[&str] = &[
    "legitimate",
    "is_legitimate",
    "tricks",
    "trick",
    "correct",
    "correct_verdict",
    "correct_tricks",
    "verdict_correct",
    "explanation",
    "annotations",
    "advice",
    "fact",
];

/// Fields that must never reach a client at all.
pub const FORBIDDEN_KEYS: &[&str] = &["blueprint", "plans", "master_seed"];

/// Items whose ground truth the player has legitimately seen by `seq`:
/// tutorial items once shown, quiz items once answered, and balloon items
/// once resolved.
pub fn public_items(log: &[SessionEvent], upto_seq: u64) -> HashSet<ItemId> {
    let mut out = HashSet::new();
    let Some(EventKind::SessionCreated { blueprint, .. }) = log.first().map(|e| &e.kind) else {
        return out;
    };
    for e in log.iter().take_while(|e| e.seq <= upto_seq) {
        match &e.kind {
            EventKind::TutorialStep { step } => {
                if let Some(item) = blueprint.tutorial.get(*step).and_then(|s| s.item.as_ref()) {
                    out.insert(item.id().clone());
                }
            }
            EventKind::QuizAnswer { .. } => {
                out.extend(blueprint.quiz.items.iter().map(|q| q.item.id().clone()));
            }
            EventKind::Shot { item_id, .. }
            | EventKind::Skipped { item_id, .. }
            | EventKind::BalloonTimedOut { item_id, .. } => {
                out.insert(item_id.clone());
            }
            _ => {}
        }
    }
    out
}

fn item_id_of(map: &serde_json::Map<String, Value>) -> Option<ItemId> {
    map.get("item_id")
        .or_else(|| map.get("id"))
        .and_then(Value::as_str)
        .map(|s| ItemId(s.to_owned()))
}

/// Every leak found in one response body, as human-readable paths.
pub fn leaks(body: &Value, public: &HashSet<ItemId>) -> Vec<String> {
    let mut found = Vec::new();
    walk(body, None, "$", public, &mut found);
    found
}

fn carries_data(v: &Value) -> bool {
    match v {
        Value::Null => false,
        Value::Array(a) => !a.is_empty(),
        Value::String(s) => !s.is_empty(),
        _ => true,
    }
}

fn walk(v: &Value, owner: Option<&ItemId>, path: &str, public: &HashSet<ItemId>, found: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            let own = item_id_of(map);
            let owner = own.as_ref().or(owner);
            for (k, child) in map {
                let p = format!("{path}.{k}");
                if FORBIDDEN_KEYS.contains(&k.as_str()) {
                    found.push(format!("{p}: forbidden field"));
                    continue;
                }
                if TRUTH_KEYS.contains(&k.as_str()) && carries_data(child) {
                    match owner {
                        Some(id) if public.contains(id) => {}
                        Some(id) => found.push(format!("{p}: truth of unresolved item {}", id.0)),
                        None => found.push(format!("{p}: truth with no item id")),
                    }
                }
                walk(child, owner, &p, public, found);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, owner, &format!("{path}[{i}]"), public, found);
            }
        }
        _ => {}
    }
}
