use ebparse_wasm::{parse_json, quantifier_rows, verify_json};

fn fixture(name: &str) -> String {
    let path = format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

const SENTENCE: &str = "containing one orange and one lemon";

#[test]
fn parse_then_verify() {
    let (env, lex) = (fixture("crates.env"), fixture("crates.lex"));
    let out = parse_json(&env, &lex, "S\\NP_q", SENTENCE).unwrap();
    assert_eq!(out["parsed"], true);
    assert!(out["best"].as_str().unwrap().starts_with("(S\\NP_q:{x1}"), "{}", out["best"]);
    assert_eq!(out["trace"].as_str().unwrap().lines().filter(|l| l.starts_with('(')).count(), 10);

    let forest = out["forest"].to_string();
    let checked = verify_json(&env, &lex, SENTENCE, &forest).unwrap();
    assert_eq!(checked["ok"], true, "{checked}");

    let tampered = forest.replacen("\"x1\"", "\"x2\"", 1);
    assert_eq!(verify_json(&env, &lex, SENTENCE, &tampered).unwrap()["ok"], false);
}

#[test]
fn errors_are_reported_as_text() {
    let lex = fixture("crates.lex");
    let err = parse_json("entity a\nrelation r : NP { (zz) }\n", &lex, "NP", "a").unwrap_err();
    assert!(err.starts_with("environment:"), "{err}");
    let out = parse_json(&fixture("crates.env"), &lex, "S", "lemon").unwrap();
    assert_eq!(out["parsed"], false);
}

#[test]
fn quantifier_tables() {
    let most = quantifier_rows("most", 3).unwrap();
    for (r, row) in most.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            assert_eq!(v, 2 * s > r);
        }
    }
    assert!(quantifier_rows("several", 3).is_err());
}
