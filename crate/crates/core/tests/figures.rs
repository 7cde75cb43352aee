use std::path::PathBuf;

use ebparse::category::{parse_category, Category};
use ebparse::denotation::QuantifierRegistry;
use ebparse::environment::{load_environment, Environment};
use ebparse::extended::{Comp, ExtChart, ExtItem};
use ebparse::grammar::{load_lexicon, Grammar};
use ebparse::input::InputChart;

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

fn load(env: &str, lex: &str) -> (Environment, Grammar) {
    let env = load_environment(&fixture(env)).unwrap();
    let g = load_lexicon(&fixture(lex), &env, &QuantifierRegistry::builtin()).unwrap();
    (env, g)
}

fn cat(s: &str) -> Category {
    parse_category(s).unwrap()
}

fn cats(s: &[&str]) -> Vec<Category> {
    s.iter().map(|c| cat(c)).collect()
}

fn comp(a: usize, b: usize, c: &str) -> Comp {
    Comp { a, b, cat: cat(c) }
}

fn shown(chart: &ExtChart, env: &Environment, item: &ExtItem) -> String {
    let id = chart.id(item).unwrap_or_else(|| panic!("missing item {item}"));
    env.display(&chart.denotations[id]).to_string()
}

fn root(chart: &ExtChart, env: &Environment, goal: &str) -> String {
    let x = chart.best_goal(&cat(goal)).expect("goal derived");
    env.display(&chart.denotations[x]).to_string()
}

#[test]
fn conjoined_quantified_objects_step_by_step() {
    for lex in ["crates.lex", "crates_exactly_one.lex"] {
        let (env, g) = load("crates.env", lex);
        let input = InputChart::from_sentence("containing one orange and one lemon");
        let chart = ExtChart::parse(&input, &g, &env).unwrap();
        let q = if lex == "crates.lex" { "some" } else { "exactly_one" };
        let np = format!("NP_{q}");
        let body = format!("X\\{np}");
        let modifier = format!("{np}\\{np}");
        let verb = format!("S\\NP_q/{np}");
        let three = [body.as_str(), modifier.as_str(), np.as_str()];
        let two = [body.as_str(), np.as_str()];
        let item = |delta: &[&str], sigma: Vec<Comp>, i: usize| ExtItem { i, j: 6, delta: cats(delta), sigma };
        let steps = [
            (item(&three, vec![comp(1, 3, &np)], 1), "{o1,o2,o3,o4}"),
            (item(&three, vec![comp(4, 6, &np)], 1), "{l1,l2,l3}"),
            (item(&two, vec![comp(1, 3, &np)], 1), "{o1,o2,o3,o4}"),
            (item(&two, vec![comp(4, 6, &np)], 1), "{l1,l2,l3}"),
            (item(&["S\\NP_q"], vec![comp(0, 1, &verb), comp(1, 3, &np)], 0), "{(o1,x1)}"),
            (item(&["S\\NP_q"], vec![comp(0, 1, &verb), comp(4, 6, &np)], 0), "{(l2,x1),(l3,x3)}"),
            (item(&["S\\NP_q"], vec![comp(0, 1, "S\\NP_q/NP_e"), comp(1, 3, "NP_e")], 0), "{x1}"),
            (item(&["S\\NP_q"], vec![comp(0, 1, "S\\NP_q/NP_e"), comp(4, 6, "NP_e")], 0), "{x1,x3}"),
            (item(&["S\\NP_q"], vec![comp(0, 1, "S\\NP_q/NP_e"), comp(1, 6, "NP_e")], 0), "{x1}"),
            (ExtItem::pure(0, 6, cat("S\\NP_q")), "{x1}"),
        ];
        for (k, (it, want)) in steps.iter().enumerate() {
            assert_eq!(shown(&chart, &env, it), *want, "{lex} step {}", k + 1);
        }
        assert_eq!(root(&chart, &env, "S\\NP_q"), "{x1}");
    }
}

#[test]
fn conjoined_trace_has_ten_steps() {
    let (env, g) = load("crates.env", "crates.lex");
    let chart = ExtChart::parse(&InputChart::from_sentence("containing one orange and one lemon"), &g, &env).unwrap();
    let x = chart.best_goal(&cat("S\\NP_q")).unwrap();
    let trace = chart.trace(x, &env);
    let numbered: Vec<&str> = trace.lines().filter(|l| l.starts_with('(')).collect();
    assert_eq!(numbered.len(), 10, "{trace}");
    let rules: Vec<&str> = numbered.iter().map(|l| l.split(')').nth(1).unwrap().split_whitespace().next().unwrap()).collect();
    assert_eq!(rules, ["R9", "R8", "R6", "R6", "R3", "R3", "R13", "R13", "R11", "R12"], "{trace}");
    assert!(numbered[9].ends_with("{x1}"), "{trace}");
}

#[test]
fn boy_with_no_backpack() {
    let (env, g) = load("boys.env", "boys.lex");
    let chart = ExtChart::parse(&InputChart::from_sentence("the boy with no backpack"), &g, &env).unwrap();
    assert_eq!(root(&chart, &env, "NP"), "{boy2}");
    let chart = ExtChart::parse(&InputChart::from_sentence("the boy with a backpack"), &g, &env).unwrap();
    assert_eq!(root(&chart, &env, "NP"), "{boy1,boy3}");
}

#[test]
fn child_wearing_glasses_and_blue_pants() {
    let (env, g) = load("glasses.env", "glasses.lex");
    let input = InputChart::from_sentence("the child wearing some glasses and some blue pants");
    let chart = ExtChart::parse(&input, &g, &env).unwrap();
    assert_eq!(root(&chart, &env, "NP"), "{c1}");
}
