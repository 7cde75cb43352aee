//! Independent re-check of a forest dump: every derivation is re-derived
//! from its antecedents with the rule functions, and every denotation and
//! score is recomputed from the derivations alone.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::category::{parse_category, Category, ConjOp, Direction};
use crate::extended::{
    apply_quantifier, attach_conj, attach_existing, attach_fresh, combine_components, consume_conj,
    discharge_empty, reassemble, saturate_anchor, seed_extended, skip_left, skip_right, Comp,
    ExtChart, ExtDerivation, ExtItem,
};
use crate::environment::Environment;
use crate::forest::{undump_relation, ForestDump, Rule};
use crate::grammar::Grammar;
use crate::input::InputChart;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("item {0}: {1}")]
    Item(usize, String),
    #[error("derivation {0} (rule {1}) of item {2}: {3}")]
    Derivation(usize, String, usize, String),
    #[error("item {0}: dumped denotation {1} differs from recomputed {2}")]
    Denotation(usize, String, String),
    #[error("item {0}: dumped score {1} differs from recomputed {2}")]
    Score(usize, i64, i64),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

fn parse_item(it: &crate::forest::DumpItem) -> Result<ExtItem, String> {
    let cat = |s: &str| parse_category(s).map_err(|e| format!("`{s}`: {e}"));
    let delta = it.delta.iter().map(|s| cat(s)).collect::<Result<Vec<_>, _>>()?;
    let sigma = it
        .sigma
        .iter()
        .map(|c| Ok(Comp { a: c.a, b: c.b, cat: cat(&c.cat)? }))
        .collect::<Result<Vec<_>, String>>()?;
    let item = ExtItem { i: it.i, j: it.j, delta, sigma };
    if item.delta.is_empty() || item.sigma.is_empty() {
        return Err("empty component list".into());
    }
    if item.current() != &cat(&it.cat)? {
        return Err(format!("cat `{}` is not the current category", it.cat));
    }
    Ok(item)
}

fn trailing_op(c: &Category) -> Option<ConjOp> {
    match c {
        Category::ConjPrime(op, _) => Some(*op),
        _ => None,
    }
}

/// Checks `dump` against the input and grammar it claims to come from.
/// Returns the number of derivations checked.
pub fn verify_dump(
    dump: &ForestDump,
    input: &InputChart,
    g: &Grammar,
    env: &Environment,
) -> Result<usize, Vec<VerifyError>> {
    let mut errors = Vec::new();
    let mut items = Vec::with_capacity(dump.items.len());
    for (k, it) in dump.items.iter().enumerate() {
        if it.id != k {
            errors.push(VerifyError::Item(k, format!("id {} out of sequence", it.id)));
        }
        match parse_item(it) {
            Ok(item) => items.push(item),
            Err(e) => {
                errors.push(VerifyError::Item(k, e));
                return Err(errors);
            }
        }
    }
    let distinct: BTreeSet<&ExtItem> = items.iter().collect();
    if distinct.len() != items.len() {
        errors.push(VerifyError::Item(0, "duplicate items".into()));
    }

    let seeds = seed_extended(input, g).0;
    let mut conj_ops: HashMap<usize, BTreeSet<ConjOp>> = HashMap::new();
    let mut derivations: Vec<Vec<ExtDerivation>> = vec![Vec::new(); items.len()];

    // lexical derivations first: they fix the operators of conjunction items
    let lexical = dump.derivations.iter().enumerate().filter(|(_, d)| d.rule == "lex");
    for (k, d) in lexical {
        let fail = |m: &str| VerifyError::Derivation(k, d.rule.clone(), d.parent, m.to_string());
        let Some(parent) = items.get(d.parent) else {
            errors.push(fail("parent out of range"));
            continue;
        };
        let word = d.word.as_deref().unwrap_or_default();
        match seeds.iter().find(|(it, leaf, _)| it == parent && leaf.word == word) {
            Some((_, leaf, op)) => {
                if let Some(op) = op {
                    conj_ops.entry(d.parent).or_default().insert(*op);
                }
                let mut der = ExtDerivation::new(Rule::Lex, vec![]);
                der.leaf = Some(leaf.clone());
                derivations[d.parent].push(der);
            }
            None => errors.push(fail(&format!("no lexical entry for `{word}` yields this item"))),
        }
    }

    for (k, d) in dump.derivations.iter().enumerate() {
        if d.rule == "lex" {
            continue;
        }
        let fail = |m: &str| VerifyError::Derivation(k, d.rule.clone(), d.parent, m.to_string());
        let Some(rule) = Rule::from_name(&d.rule) else {
            errors.push(fail("unknown rule"));
            continue;
        };
        if d.parent >= items.len() || d.children.iter().any(|&c| c >= items.len()) {
            errors.push(fail("index out of range"));
            continue;
        }
        let parent = &items[d.parent];
        let c: Vec<&ExtItem> = d.children.iter().map(|&c| &items[c]).collect();
        let arity = match rule {
            Rule::R5 | Rule::R6 | Rule::R12 | Rule::R13 => 1,
            _ => 2,
        };
        if c.len() != arity {
            errors.push(fail(&format!("expected {arity} antecedents")));
            continue;
        }
        let mut der = ExtDerivation::new(rule, d.children.clone());
        let derived = match rule {
            Rule::R1 => attach_existing(c[0], c[1], Direction::Forward)
                .or_else(|| saturate_anchor(c[0], c[1], Direction::Forward)),
            Rule::R2 => attach_existing(c[1], c[0], Direction::Backward)
                .or_else(|| saturate_anchor(c[1], c[0], Direction::Backward)),
            Rule::R3 | Rule::R4 => {
                let res = if rule == Rule::R3 {
                    attach_fresh(c[0], c[1], Direction::Forward)
                } else {
                    attach_fresh(c[1], c[0], Direction::Backward)
                };
                res.map(|(it, retain)| {
                    der.retain = retain;
                    it
                })
            }
            Rule::R5 | Rule::R6 => discharge_empty(c[0]).filter(|(r, _)| *r == rule).map(|(_, it)| it),
            Rule::R7 => {
                let op = trailing_op(parent.current());
                der.op = op;
                op.filter(|o| conj_ops.get(&d.children[0]).is_some_and(|s| s.contains(o)))
                    .and_then(|op| consume_conj(c[0], c[1], op))
            }
            Rule::R8 | Rule::R9 => {
                der.children = vec![d.children[0]];
                der.witness = Some(d.children[1]);
                if rule == Rule::R8 {
                    skip_left(c[1], c[0])
                } else {
                    skip_right(c[0], c[1])
                }
            }
            Rule::R10 => {
                let op = parent.sigma.last().and_then(|t| trailing_op(&t.cat));
                der.op = op;
                op.filter(|o| conj_ops.get(&d.children[1]).is_some_and(|s| s.contains(o)))
                    .and_then(|op| attach_conj(c[0], c[1], op))
            }
            Rule::R11 => reassemble(c[0], c[1]).map(|(it, op)| {
                der.op = Some(op);
                it
            }),
            Rule::R12 => combine_components(c[0]),
            Rule::R13 => apply_quantifier(c[0]).map(|(it, q)| {
                der.quantifier = Some(q);
                it
            }),
            Rule::Lex => unreachable!(),
        };
        if derived.as_ref() != Some(parent) {
            errors.push(fail("antecedents do not yield this item"));
            continue;
        }
        if der.children.iter().any(|&ch| items[ch].measure() >= parent.measure()) {
            errors.push(fail("antecedent is not smaller than its consequent"));
            continue;
        }
        derivations[d.parent].push(der);
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let checked = dump.derivations.len();
    let mut chart = ExtChart::assemble(input.n, items, derivations, conj_ops);
    if let Err(e) = chart.evaluate(g, env) {
        return Err(vec![VerifyError::Evaluation(e.to_string())]);
    }
    for (k, it) in dump.items.iter().enumerate() {
        let mine = &chart.denotations[k];
        match undump_relation(&it.denotation, mine.arity(), env) {
            Some(r) if r == *mine => {}
            _ => errors.push(VerifyError::Denotation(
                k,
                format!("{:?}", it.denotation),
                env.display(mine).to_string(),
            )),
        }
        if it.score != chart.scores[k] {
            errors.push(VerifyError::Score(k, it.score, chart.scores[k]));
        }
    }
    if errors.is_empty() {
        Ok(checked)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basic::BasicChart;
    use crate::denotation::QuantifierRegistry;
    use crate::environment::load_environment;
    use crate::grammar::load_lexicon;

    const ENV: &str = "
        entity l1 l2 b1 b2 x1 and1
        relation lemon : NP { (l1)(l2) }
        relation bin : NP { (b1)(b2) }
        relation in : NP\\NP/NP { (b1,l1,l1) }
        relation holds : S\\NP/NP { (l1,x1) (b1,x1) }
    ";
    const LEX: &str = "
        word lemon : NP_e = rel lemon
        word bin : NP_e = rel bin
        word in : NP\\NP/NP = rel in
        word holds : S\\NP_q/NP_q' = rel holds
        word a : X\\NP_q . NP_q\\NP_q . NP_q/NP_e = quant some
        word and : Conj = conj and
    ";

    fn setup() -> (Environment, Grammar) {
        let env = load_environment(ENV).unwrap();
        let g = load_lexicon(LEX, &env, &QuantifierRegistry::builtin()).unwrap();
        (env, g)
    }

    #[test]
    fn genuine_dumps_verify() {
        let (env, g) = setup();
        let input = InputChart::from_sentence("holds a lemon and a bin");
        let chart = ExtChart::parse(&input, &g, &env).unwrap();
        let dump = ForestDump::from_json(&chart.dump(&env).to_json()).unwrap();
        assert_eq!(verify_dump(&dump, &input, &g, &env), Ok(dump.derivations.len()));

        let input = InputChart::from_sentence("lemon in bin");
        let basic = BasicChart::parse(&input, &g).unwrap();
        assert!(verify_dump(&basic.dump(&env), &input, &g, &env).is_ok());
    }

    #[test]
    fn tampering_is_caught() {
        let (env, g) = setup();
        let input = InputChart::from_sentence("holds a lemon and a bin");
        let dump = ExtChart::parse(&input, &g, &env).unwrap().dump(&env);

        let mut bad = dump.clone();
        let last = bad.items.len() - 1;
        bad.items[last].score += 1;
        assert!(verify_dump(&bad, &input, &g, &env).is_err());

        let mut bad = dump.clone();
        let k = bad.items.iter().position(|it| !it.denotation.is_empty()).unwrap();
        bad.items[k].denotation.pop();
        assert!(matches!(&verify_dump(&bad, &input, &g, &env).unwrap_err()[0], VerifyError::Denotation(..)));

        let mut bad = dump.clone();
        let k = bad.derivations.iter().position(|d| d.rule == "R11").unwrap();
        bad.derivations[k].children.reverse();
        assert!(verify_dump(&bad, &input, &g, &env).is_err());

        let mut bad = dump;
        bad.derivations[0].word = Some("melon".into());
        assert!(verify_dump(&bad, &input, &g, &env).is_err());
    }
}
