//! Random small worlds and an exhaustive-enumeration oracle that shares no
//! code with the chart parsers.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use ebparse::category::Category;
use ebparse::denotation::{QuantifierRegistry, Value};
use ebparse::environment::{load_environment, Environment};
use ebparse::grammar::{load_lexicon, Grammar};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

pub fn load(env: &str, lex: &str) -> (Environment, Grammar) {
    let env = load_environment(env).unwrap();
    let g = load_lexicon(lex, &env, &QuantifierRegistry::builtin()).unwrap();
    (env, g)
}

/// Lexical categories with valency at most three; relations over them are
/// evidence-style, one entity field per NP.
/// Weights favor nouns and modifiers so that sentences are often ambiguous.
pub const CATEGORIES: [(&str, usize, u32); 8] = [
    ("NP", 1, 4),
    ("NP/NP", 2, 2),
    ("NP\\NP", 2, 2),
    ("NP\\NP/NP", 3, 3),
    ("S\\NP", 1, 1),
    ("S/NP", 1, 1),
    ("S\\NP/NP", 2, 1),
    ("S", 0, 1),
];

pub struct World {
    pub env: Environment,
    pub grammar: Grammar,
    pub env_text: String,
    pub lex_text: String,
    pub words: Vec<String>,
}

/// A random environment of at most `max_entities` entities and a lexicon of
/// a few words, each with one or two categories.
pub fn random_world(rng: &mut StdRng, max_entities: usize) -> World {
    let n_ent = rng.gen_range(1..=max_entities);
    let mut env_text = String::from("entity");
    for e in 0..n_ent {
        let _ = write!(env_text, " e{e}");
    }
    env_text.push('\n');
    let mut lex_text = String::new();
    let n_words = rng.gen_range(2..=4);
    let mut words = Vec::new();
    let mut rel = 0;
    // the first word is always a noun so most sentences have a chance
    for w in 0..n_words {
        let word = format!("w{w}");
        let senses = rng.gen_range(1..=2);
        let mut used = BTreeSet::new();
        for s in 0..senses {
            let (cat, valency, _) = if w == 0 && s == 0 {
                CATEGORIES[0]
            } else {
                *CATEGORIES.choose_weighted(rng, |c| c.2).unwrap()
            };
            if !used.insert(cat) {
                continue;
            }
            let density = rng.gen_range(0.2..0.7);
            let mut tuples = String::new();
            let mut tuple = vec![0usize; valency];
            loop {
                if valency == 0 {
                    if rng.gen_bool(0.7) {
                        tuples.push_str("()");
                    }
                } else if rng.gen_bool(density) {
                    let names: Vec<String> = tuple.iter().map(|e| format!("e{e}")).collect();
                    let _ = write!(tuples, "({})", names.join(","));
                }
                // odometer over entity tuples
                let mut k = 0;
                while k < valency {
                    tuple[k] += 1;
                    if tuple[k] < n_ent {
                        break;
                    }
                    tuple[k] = 0;
                    k += 1;
                }
                if k == valency {
                    break;
                }
            }
            let _ = writeln!(env_text, "relation r{rel} : {cat} {{ {tuples} }}");
            let _ = writeln!(lex_text, "word {word} : {cat} = rel r{rel}");
            rel += 1;
        }
        words.push(word);
    }
    let (env, grammar) = load(&env_text, &lex_text);
    World { env, grammar, env_text, lex_text, words }
}

pub fn random_sentence(rng: &mut StdRng, words: &[String], max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| words.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
}

pub type Set = BTreeSet<Vec<Value>>;

/// Exhaustive CKY-style enumeration: for every span and category, every
/// bracketed tree and the denotation each tree evaluates to.
pub struct Oracle {
    pub cells: BTreeMap<(usize, usize, Category), Vec<(String, Set)>>,
}

fn apply_plain(functor: &Category, arg: &Category, forward: bool) -> Option<Category> {
    match (functor, forward) {
        (Category::Right(res, a), true) | (Category::Left(res, a), false) if **a == *arg => {
            Some((**res).clone())
        }
        _ => None,
    }
}

/// `{ f[k..] : f ∈ F, f[..k] ∈ A }` with `k` the argument arity.
fn discharge(f: &Set, a: &Set, k: usize) -> Set {
    f.iter().filter(|t| a.contains(&t[..k])).map(|t| t[k..].to_vec()).collect()
}

impl Oracle {
    pub fn new(words: &[&str], g: &Grammar) -> Oracle {
        let n = words.len();
        let mut cells: BTreeMap<(usize, usize, Category), Vec<(String, Set)>> = BTreeMap::new();
        let mut arity: BTreeMap<Category, usize> = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            for e in g.lookup(w) {
                let cat = e.components[0].clone();
                let set: Set = e.denotation.iter().cloned().collect();
                arity.insert(cat.clone(), e.denotation.arity());
                cells.entry((i, i + 1, cat.clone())).or_default().push((format!("({cat} {w})"), set));
            }
        }
        for width in 2..=n {
            for i in 0..=n - width {
                let j = i + width;
                for k in i + 1..j {
                    let span = |a: usize, b: usize| -> Vec<(Category, Vec<(String, Set)>)> {
                        cells.iter().filter(|(key, _)| key.0 == a && key.1 == b).map(|(key, v)| (key.2.clone(), v.clone())).collect()
                    };
                    let (left, right) = (span(i, k), span(k, j));
                    for (lc, lts) in &left {
                        for (rc, rts) in &right {
                            for (forward, f, a) in [(true, lc, rc), (false, rc, lc)] {
                                let Some(res) = apply_plain(f, a, forward) else { continue };
                                let k_arity = arity[a];
                                let f_arity = arity[f];
                                arity.insert(res.clone(), f_arity - k_arity);
                                for (ls, lset) in lts {
                                    for (rs, rset) in rts {
                                        let (fset, aset) = if forward { (lset, rset) } else { (rset, lset) };
                                        let den = discharge(fset, aset, k_arity);
                                        cells
                                            .entry((i, j, res.clone()))
                                            .or_default()
                                            .push((format!("({res} {ls} {rs})"), den));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Oracle { cells }
    }

    pub fn trees(&self, i: usize, j: usize, cat: &Category) -> BTreeSet<String> {
        self.cells.get(&(i, j, cat.clone())).map(|v| v.iter().map(|(s, _)| s.clone()).collect()).unwrap_or_default()
    }

    /// Union of the per-tree denotations.
    pub fn denotation(&self, i: usize, j: usize, cat: &Category) -> Set {
        self.cells.get(&(i, j, cat.clone())).map(|v| v.iter().flat_map(|(_, s)| s.iter().cloned()).collect()).unwrap_or_default()
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.max(1e-12).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
