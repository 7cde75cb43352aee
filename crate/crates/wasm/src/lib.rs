//! Browser bindings: parse a sentence, re-check a forest dump, and tabulate
//! a quantifier. Each call takes the environment and lexicon as text and
//! returns JSON, so the page needs no state on the Rust side.

use ebparse::{
    load_environment, load_lexicon, parse_category, verify_dump, ExtChart, ForestDump, InputChart,
    QuantifierRegistry,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_TREES: usize = 50;

/// Parses `sentence` with the extended parser. The result has `trees`
/// (bracketed, with denotations), `trace`, `forest` and `warnings`.
pub fn parse_json(env: &str, lexicon: &str, goal: &str, sentence: &str) -> Result<Value, String> {
    let env = load_environment(env).map_err(|e| format!("environment: {e}"))?;
    let g = load_lexicon(lexicon, &env, &QuantifierRegistry::builtin()).map_err(|e| format!("lexicon: {e}"))?;
    let goal = parse_category(goal).map_err(|e| format!("goal: {e}"))?;
    let chart = ExtChart::parse(&InputChart::from_sentence(sentence), &g, &env).map_err(|e| e.to_string())?;
    let best = chart.best_goal(&goal);
    let (trees, trace) = match best {
        Some(x) => {
            let trees: Vec<String> = chart.trees(x, MAX_TREES).iter().map(|t| t.bracketed(Some(&env))).collect();
            (trees, chart.trace(x, &env))
        }
        None => (Vec::new(), String::new()),
    };
    let forest: Value = serde_json::from_str(&chart.dump(&env).to_json()).map_err(|e| e.to_string())?;
    Ok(json!({
        "parsed": best.is_some(),
        "best": best.map(|x| chart.best_tree(x).bracketed(Some(&env))),
        "trees": trees,
        "trace": trace,
        "forest": forest,
        "warnings": chart.warnings,
    }))
}

/// Re-derives every item and derivation of a JSON forest dump.
pub fn verify_json(env: &str, lexicon: &str, sentence: &str, forest: &str) -> Result<Value, String> {
    let env = load_environment(env).map_err(|e| format!("environment: {e}"))?;
    let g = load_lexicon(lexicon, &env, &QuantifierRegistry::builtin()).map_err(|e| format!("lexicon: {e}"))?;
    let dump = ForestDump::from_json(forest).map_err(|e| format!("forest: {e}"))?;
    Ok(match verify_dump(&dump, &InputChart::from_sentence(sentence), &g, &env) {
        Ok(n) => json!({ "ok": true, "items": dump.items.len(), "derivations": n, "errors": [] }),
        Err(errors) => {
            let errors: Vec<String> = errors.iter().map(ToString::to_string).collect();
            json!({ "ok": false, "errors": errors })
        }
    })
}

/// `rows[r][s] = q(r, s)` for `0 ≤ s ≤ r ≤ max`.
pub fn quantifier_rows(name: &str, max: usize) -> Result<Vec<Vec<bool>>, String> {
    let reg = QuantifierRegistry::builtin();
    let q = reg.get(name).map_err(|e| e.to_string())?;
    Ok((0..=max).map(|r| (0..=r).map(|s| q.eval(r, s)).collect()).collect())
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn parse(env: &str, lexicon: &str, goal: &str, sentence: &str) -> Result<String, JsError> {
    to_js(parse_json(env, lexicon, goal, sentence))
}

#[wasm_bindgen]
pub fn verify(env: &str, lexicon: &str, sentence: &str, forest: &str) -> Result<String, JsError> {
    to_js(verify_json(env, lexicon, sentence, forest))
}

#[wasm_bindgen(js_name = quantifierTable)]
pub fn quantifier_table(name: &str, max: usize) -> Result<String, JsError> {
    to_js(quantifier_rows(name, max.min(20)).map(|rows| json!({ "name": name, "rows": rows })))
}
