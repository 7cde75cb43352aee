//! Rule ids, selected trees, and the serializable forest dump shared by
//! both parsers.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::denotation::{Relation, Tuple};
use crate::environment::Environment;

/// Deduction rules. `R1`/`R2` double as forward and backward application in
/// the basic parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Lex,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    R11,
    R12,
    R13,
}

impl Rule {
    pub const ALL: [Rule; 14] = [
        Rule::Lex,
        Rule::R1,
        Rule::R2,
        Rule::R3,
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
        Rule::R8,
        Rule::R9,
        Rule::R10,
        Rule::R11,
        Rule::R12,
        Rule::R13,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; 14] =
            ["lex", "R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8", "R9", "R10", "R11", "R12", "R13"];
        NAMES[self as usize]
    }

    pub fn from_name(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::Lex => "lexical item",
            Rule::R1 => "right application to an existing component",
            Rule::R2 => "left application to an existing component",
            Rule::R3 => "right application to a fresh component",
            Rule::R4 => "left application to a fresh component",
            Rule::R5 => "discharge empty component (/)",
            Rule::R6 => "discharge empty component (\\)",
            Rule::R7 => "consume conjunction",
            Rule::R8 => "skip conjunct (left)",
            Rule::R9 => "skip conjunct (right)",
            Rule::R10 => "attach conjunction to component",
            Rule::R11 => "reassemble conjoined components",
            Rule::R12 => "combine adjacent components",
            Rule::R13 => "apply quantifier",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A selected derivation tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub denotation: Relation,
    pub rule: Rule,
    pub word: Option<String>,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaves(&self) -> Vec<&str> {
        match &self.word {
            Some(w) if self.children.is_empty() => vec![w.as_str()],
            _ => self.children.iter().flat_map(|c| c.leaves()).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Tree::node_count).sum::<usize>()
    }

    /// Bracketed rendering; with an environment, each node carries its
    /// denotation.
    pub fn bracketed(&self, env: Option<&Environment>) -> String {
        let mut out = String::new();
        self.write_bracketed(env, &mut out);
        out
    }

    fn write_bracketed(&self, env: Option<&Environment>, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        if let Some(env) = env {
            let _ = write!(out, ":{}", env.display(&self.denotation));
        }
        if let Some(w) = &self.word {
            out.push(' ');
            out.push_str(w);
        }
        for c in &self.children {
            out.push(' ');
            c.write_bracketed(env, out);
        }
        out.push(')');
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpComponent {
    pub a: usize,
    pub b: usize,
    pub cat: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpItem {
    pub id: usize,
    pub i: usize,
    pub j: usize,
    pub delta: Vec<String>,
    pub sigma: Vec<DumpComponent>,
    pub cat: String,
    pub denotation: Vec<Vec<String>>,
    pub score: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpDerivation {
    pub parent: usize,
    pub rule: String,
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
}

/// Whole-forest dump: every chart item with its denotation and score, and
/// every derivation by back pointer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestDump {
    pub items: Vec<DumpItem>,
    pub derivations: Vec<DumpDerivation>,
}

pub fn dump_relation(r: &Relation, env: &Environment) -> Vec<Vec<String>> {
    r.iter().map(|t| t.iter().map(|v| env.value_text(*v)).collect()).collect()
}

/// Parses dumped denotation tuples back into a relation.
pub fn undump_relation(
    rows: &[Vec<String>],
    arity_hint: usize,
    env: &Environment,
) -> Option<Relation> {
    let arity = rows.first().map_or(arity_hint, Vec::len);
    let tuples: Option<Vec<Tuple>> =
        rows.iter().map(|row| row.iter().map(|s| env.parse_value(s)).collect()).collect();
    Relation::from_tuples(arity, tuples?).ok()
}

impl ForestDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest dumps always serialize")
    }

    pub fn from_json(text: &str) -> Result<ForestDump, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Graphviz rendering: one box per item labeled by category, span and
    /// denotation, one point per derivation.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph forest {\n  node [shape=box];\n");
        for it in &self.items {
            let den: Vec<String> = it
                .denotation
                .iter()
                .map(|t| if t.len() == 1 { t[0].clone() } else { format!("<{}>", t.join(",")) })
                .collect();
            let label = format!("{} [{},{}]\\n{{{}}}", it.cat, it.i, it.j, den.join(","));
            let _ = writeln!(out, "  n{} [label=\"{}\"];", it.id, escape(&label));
        }
        for (k, d) in self.derivations.iter().enumerate() {
            match &d.word {
                Some(w) => {
                    let _ = writeln!(out, "  w{k} [shape=plaintext, label=\"{}\"];", escape(w));
                    let _ = writeln!(out, "  w{k} -> n{};", d.parent);
                }
                None => {
                    let _ = writeln!(out, "  d{k} [shape=point, xlabel=\"{}\"];", d.rule);
                    for c in &d.children {
                        let _ = writeln!(out, "  n{c} -> d{k};");
                    }
                    let _ = writeln!(out, "  d{k} -> n{};", d.parent);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    // keep `\n` line breaks produced above, escape everything else
    s.replace('\\', "\\\\").replace("\\\\n", "\\n").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::load_environment;

    #[test]
    fn rule_names_round_trip() {
        for r in Rule::ALL {
            assert_eq!(Rule::from_name(r.name()), Some(r));
        }
        assert!(Rule::Lex < Rule::R1 && Rule::R2 < Rule::R13);
        assert_eq!(Rule::R13.id(), 13);
    }

    #[test]
    fn relation_dump_round_trip() {
        let env = load_environment("entity a b").unwrap();
        let a = env.parse_value("a").unwrap();
        let t = env.parse_value("true").unwrap();
        let r: Relation = vec![vec![a, t]].into_iter().collect();
        let rows = dump_relation(&r, &env);
        assert_eq!(rows, vec![vec!["a".to_string(), "true".to_string()]]);
        assert_eq!(undump_relation(&rows, 2, &env).unwrap(), r);
        assert_eq!(undump_relation(&[], 3, &env).unwrap(), Relation::empty(3));
        assert!(undump_relation(&[vec!["zz".into()]], 1, &env).is_none());
    }

    #[test]
    fn dot_escapes_backslashes() {
        let dump = ForestDump {
            items: vec![DumpItem {
                id: 0,
                i: 0,
                j: 1,
                delta: vec!["NP\\NP".into()],
                sigma: vec![],
                cat: "NP\\NP".into(),
                denotation: vec![vec!["a".into(), "a".into()]],
                score: 1,
            }],
            derivations: vec![DumpDerivation {
                parent: 0,
                rule: "lex".into(),
                children: vec![],
                word: Some("in".into()),
            }],
        };
        let dot = dump.to_dot();
        assert!(dot.contains("label=\"NP\\\\NP [0,1]\\n{<a,a>}\""), "{dot}");
        assert!(dot.contains("w0 -> n0"));
    }
}
