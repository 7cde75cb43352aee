//! Lexicon loading and the production closure.
//!
//! ```text
//! word lemon : NP = rel lemon
//! word the : NP/NP = identity
//! word one : X\NP_q . NP_q\NP_q . NP_q/NP_e = quant some
//! word and : Conj = conj and
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::category::{
    parse_components, Base, Category, CategoryError, ConjOp, Direction, QuantMark, Subst,
};
use crate::denotation::{QuantifierRegistry, Relation};
use crate::environment::{identity_relation, DomainError, Environment};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Semantics {
    Relation(String),
    Identity,
    Quant(String),
    Conj(ConjOp),
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Relation(n) => write!(f, "rel {n}"),
            Semantics::Identity => write!(f, "identity"),
            Semantics::Quant(n) => write!(f, "quant {n}"),
            Semantics::Conj(op) => write!(f, "conj {}", op.name()),
        }
    }
}

/// One lexical entry. `components` is the pattern as written (last is the
/// anchor); `denotation` is the resolved lexical relation (the anchor's
/// identity relation for quantifiers, `{⟨⟩}` for conjunctions).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexEntry {
    pub word: String,
    pub components: Vec<Category>,
    pub semantics: Semantics,
    pub denotation: Relation,
}

impl LexEntry {
    pub fn is_single(&self) -> bool {
        self.components.len() == 1
    }

    pub fn anchor(&self) -> &Category {
        self.components.last().expect("entries are nonempty")
    }

    /// Components with the quantifier variable bound to the entry's
    /// quantifier name.
    pub fn instantiated(&self) -> Vec<Category> {
        match &self.semantics {
            Semantics::Quant(name) => {
                let Some(var) = anchor_var(self.anchor()) else {
                    return self.components.clone();
                };
                let mut s = Subst::default();
                s.quants.insert(var, QuantMark::Bound(name.clone()));
                self.components.iter().map(|c| c.substitute(&s)).collect()
            }
            _ => self.components.clone(),
        }
    }

    pub fn quantifier(&self) -> Option<&str> {
        match &self.semantics {
            Semantics::Quant(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for LexEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comps: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        write!(f, "word {} : {} = {}", self.word, comps.join(" . "), self.semantics)
    }
}

/// Quantifier variable of an anchor `NP_q/NP_e` or `NP_q\NP_e`.
fn anchor_var(anchor: &Category) -> Option<String> {
    match anchor.as_functor()? {
        (Category::Atom(Base::NP, QuantMark::Var(v)), Category::Atom(Base::NP, QuantMark::Plain | QuantMark::Unquantified), _) => {
            Some(v.clone())
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexErrorKind {
    #[error("malformed entry: {0}")]
    Syntax(String),
    #[error("{0}")]
    Category(#[from] CategoryError),
    #[error("no relation `{name}` with a category matching `{category}`")]
    UnresolvedRelation { name: String, category: String },
    #[error("unknown quantifier `{0}`")]
    UnknownQuantifier(String),
    #[error("conjunction semantics on non-Conj category `{0}`")]
    ConjCategory(String),
    #[error("quantifier semantics need a multi-component entry ending in NP_q/NP_e, found `{0}`")]
    QuantShape(String),
    #[error("multi-component entries must use quantifier semantics")]
    MultiComponent,
    #[error("single-component category `{0}` contains X")]
    StructuralVar(String),
    #[error("{0}")]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LexError {
    pub line: usize,
    pub kind: LexErrorKind,
}

/// A loaded lexicon plus its closed nonterminal set.
#[derive(Clone, Debug)]
pub struct Grammar {
    entries: BTreeMap<String, Vec<LexEntry>>,
    nonterminals: BTreeSet<Category>,
    quantifiers: QuantifierRegistry,
}

impl Grammar {
    pub fn new(quantifiers: QuantifierRegistry) -> Self {
        Grammar { entries: BTreeMap::new(), nonterminals: BTreeSet::new(), quantifiers }
    }

    /// Adds an entry unless an identical one exists (directional quantifier
    /// variants normalize to the same pattern).
    pub fn add(&mut self, entry: LexEntry) {
        for c in entry.instantiated() {
            close_over(&c, &mut self.nonterminals);
        }
        let list = self.entries.entry(entry.word.clone()).or_default();
        if !list.contains(&entry) {
            list.push(entry);
        }
    }

    pub fn lookup(&self, word: &str) -> &[LexEntry] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexEntry> {
        self.entries.values().flatten()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn nonterminals(&self) -> &BTreeSet<Category> {
        &self.nonterminals
    }

    pub fn quantifiers(&self) -> &QuantifierRegistry {
        &self.quantifiers
    }

    pub fn max_components(&self) -> usize {
        self.entries().map(|e| e.components.len()).max().unwrap_or(0)
    }

    /// Lexical productions for every entry and application productions for
    /// every functor in the nonterminal set.
    pub fn productions(&self) -> BTreeSet<Production> {
        let mut out = BTreeSet::new();
        for e in self.entries() {
            if e.is_single() {
                out.insert(Production::Lexical { lhs: e.components[0].clone(), word: e.word.clone() });
            }
        }
        for c in &self.nonterminals {
            if let Some((result, arg, dir)) = c.as_functor() {
                out.insert(Production::Apply {
                    lhs: result.clone(),
                    functor: c.clone(),
                    arg: arg.clone(),
                    dir,
                });
            }
        }
        out
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.entries() {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

fn close_over(c: &Category, into: &mut BTreeSet<Category>) {
    for sub in c.subcategories() {
        if !sub.has_structural_vars() {
            into.insert(sub.clone());
        }
    }
}

/// A production of the grammar: `γ → w`, `γ → γ/δ δ` or `γ → δ γ\δ`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Production {
    Lexical { lhs: Category, word: String },
    Apply { lhs: Category, functor: Category, arg: Category, dir: Direction },
}

impl Production {
    pub fn lhs(&self) -> &Category {
        match self {
            Production::Lexical { lhs, .. } | Production::Apply { lhs, .. } => lhs,
        }
    }

    pub fn instantiate(&self, s: &Subst) -> Production {
        match self {
            Production::Lexical { lhs, word } => {
                Production::Lexical { lhs: lhs.substitute(s), word: word.clone() }
            }
            Production::Apply { lhs, functor, arg, dir } => Production::Apply {
                lhs: lhs.substitute(s),
                functor: functor.substitute(s),
                arg: arg.substitute(s),
                dir: *dir,
            },
        }
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Production::Lexical { lhs, word } => write!(f, "{lhs} -> {word}"),
            Production::Apply { lhs, functor, arg, dir: Direction::Forward } => {
                write!(f, "{lhs} -> {functor} {arg}")
            }
            Production::Apply { lhs, functor, arg, dir: Direction::Backward } => {
                write!(f, "{lhs} -> {arg} {functor}")
            }
        }
    }
}

/// Parses and validates a lexicon against an environment.
pub fn load_lexicon(
    text: &str,
    env: &Environment,
    quantifiers: &QuantifierRegistry,
) -> Result<Grammar, LexError> {
    let mut g = Grammar::new(quantifiers.clone());
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entry = parse_entry(line, env, quantifiers)
            .map_err(|kind| LexError { line: n + 1, kind })?;
        g.add(entry);
    }
    Ok(g)
}

fn parse_entry(
    line: &str,
    env: &Environment,
    quantifiers: &QuantifierRegistry,
) -> Result<LexEntry, LexErrorKind> {
    let syntax = |m: &str| LexErrorKind::Syntax(m.to_string());
    let rest = line.strip_prefix("word").filter(|r| r.starts_with(char::is_whitespace));
    let rest = rest.ok_or_else(|| syntax("expected `word`"))?;
    let (word, rest) = rest.split_once(':').ok_or_else(|| syntax("expected `:`"))?;
    let word = word.trim();
    if word.is_empty() || word.contains(char::is_whitespace) {
        return Err(syntax("word must be a single token"));
    }
    let (cats, sem) = rest.rsplit_once('=').ok_or_else(|| syntax("expected `=`"))?;
    let components = parse_components(cats.trim())?;
    let mut sem_words = sem.split_whitespace();
    let semantics = match (sem_words.next(), sem_words.next(), sem_words.next()) {
        (Some("rel"), Some(name), None) => Semantics::Relation(name.to_string()),
        (Some("identity"), None, None) => Semantics::Identity,
        (Some("quant"), Some(name), None) => Semantics::Quant(name.to_string()),
        (Some("conj"), Some(op), None) => Semantics::Conj(
            ConjOp::from_name(op).ok_or_else(|| syntax("conj takes `and` or `or`"))?,
        ),
        _ => return Err(syntax("semantics must be `rel NAME`, `identity`, `quant NAME` or `conj OP`")),
    };
    let cat_text = || components.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" . ");

    let denotation = match &semantics {
        Semantics::Quant(name) => {
            quantifiers.get(name).map_err(|_| LexErrorKind::UnknownQuantifier(name.clone()))?;
            if components.len() < 2 || anchor_var(components.last().unwrap()).is_none() {
                return Err(LexErrorKind::QuantShape(cat_text()));
            }
            identity_relation(components.last().unwrap(), env)?
        }
        _ if components.len() > 1 => return Err(LexErrorKind::MultiComponent),
        Semantics::Conj(_) => {
            if !components[0].is_conj() {
                return Err(LexErrorKind::ConjCategory(cat_text()));
            }
            Relation::unit()
        }
        _ if components[0].has_structural_vars() => {
            return Err(LexErrorKind::StructuralVar(cat_text()))
        }
        Semantics::Identity => identity_relation(&components[0], env)?,
        Semantics::Relation(name) => {
            let want = components[0].erase_marks();
            env.relations_named(name)
                .find(|(c, _)| c.erase_marks() == want)
                .map(|(_, r)| r.clone())
                .ok_or_else(|| LexErrorKind::UnresolvedRelation {
                    name: name.clone(),
                    category: cat_text(),
                })?
        }
    };
    Ok(LexEntry { word: word.to_string(), components, semantics, denotation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;
    use crate::environment::load_environment;

    const ENV: &str = "
        entity l1 l2 b1 m1
        relation lemon : NP { (l1)(l2) }
        relation in : NP\\NP/NP { (b1,l1,l1) }
        relation contains : S\\NP/NP { (b1,l1) }
    ";

    const LEX: &str = "
        word lemon : NP = rel lemon    # a noun
        word the : NP/NP = identity
        word in : NP\\NP/NP = rel in
        word has : S\\NP_q/NP_q' = rel contains
        word one : X\\NP_q . NP_q\\NP_q . NP_q/NP_e = quant some
        word one : X/NP_q . NP_q\\NP_q . NP_q/NP_e = quant some
        word and : Conj = conj and
    ";

    fn load() -> Grammar {
        let env = load_environment(ENV).unwrap();
        load_lexicon(LEX, &env, &QuantifierRegistry::builtin()).unwrap()
    }

    #[test]
    fn loads_entries() {
        let g = load();
        assert_eq!(g.lookup("lemon")[0].denotation.len(), 2);
        assert_eq!(g.lookup("the")[0].denotation.len(), 4);
        assert_eq!(g.lookup("has")[0].denotation.arity(), 2);
        assert_eq!(g.lookup("and")[0].semantics, Semantics::Conj(ConjOp::And));
        assert!(g.lookup("missing").is_empty());
        // both directional variants collapse to one pattern
        assert_eq!(g.lookup("one").len(), 1);
        assert_eq!(g.max_components(), 3);
    }

    #[test]
    fn quantifier_instantiation() {
        let g = load();
        let inst = g.lookup("one")[0].instantiated();
        assert_eq!(inst[2].to_string(), "NP_some/NP_e");
        assert_eq!(inst[1].to_string(), "NP_some\\NP_some");
        assert_eq!(inst[0], Category::Body(Box::new(parse_category("NP_some").unwrap())));
    }

    #[test]
    fn production_closure() {
        let g = load();
        let prods: Vec<String> = g.productions().iter().map(|p| p.to_string()).collect();
        assert!(prods.contains(&"NP -> NP/NP NP".to_string()));
        assert!(prods.contains(&"NP -> NP NP\\NP".to_string()));
        assert!(prods.contains(&"NP -> lemon".to_string()));

        let env = load_environment("entity a\nrelation lemon : NP { (a) }").unwrap();
        let only = load_lexicon("word lemon : NP = rel lemon", &env, &QuantifierRegistry::builtin())
            .unwrap();
        assert_eq!(only.productions().len(), 1);
    }

    #[test]
    fn instantiated_production() {
        let p = Production::Apply {
            lhs: parse_category("S\\NP_q").unwrap(),
            functor: parse_category("S\\NP_q/NP_q'").unwrap(),
            arg: parse_category("NP_q'").unwrap(),
            dir: Direction::Forward,
        };
        let mut s = Subst::default();
        s.quants.insert("q'".into(), QuantMark::Bound("some".into()));
        assert_eq!(p.instantiate(&s).to_string(), "S\\NP_q -> S\\NP_q/NP_some NP_some");
    }

    #[test]
    fn load_errors() {
        let env = load_environment(ENV).unwrap();
        let reg = QuantifierRegistry::builtin();
        let err = |text: &str| load_lexicon(text, &env, &reg).unwrap_err();

        let e = err("\nword x : NP = rel nope");
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, LexErrorKind::UnresolvedRelation { .. }));
        assert!(matches!(
            err("word x : S\\NP = rel lemon").kind,
            LexErrorKind::UnresolvedRelation { .. }
        ));
        assert!(matches!(
            err("word x : X\\NP_q . NP_q/NP_e = quant several").kind,
            LexErrorKind::UnknownQuantifier(_)
        ));
        assert!(matches!(err("word x : NP = conj and").kind, LexErrorKind::ConjCategory(_)));
        assert!(matches!(err("word x : NP/NP = quant some").kind, LexErrorKind::QuantShape(_)));
        assert!(matches!(err("word x : NP . NP = identity").kind, LexErrorKind::MultiComponent));
        assert!(matches!(err("word x : NP/(NP = identity").kind, LexErrorKind::Category(_)));
        assert!(matches!(err("word x NP = identity").kind, LexErrorKind::Syntax(_)));
        assert!(matches!(err("word x : S\\NP = identity").kind, LexErrorKind::Domain(_)));
    }

    #[test]
    fn print_round_trip() {
        let env = load_environment(ENV).unwrap();
        let reg = QuantifierRegistry::builtin();
        let once = load().to_string();
        let twice = load_lexicon(&once, &env, &reg).unwrap().to_string();
        assert_eq!(once, twice);
    }
}
