//! The single-component chart parser over items `[i,j,γ]`, with denotations,
//! denotational and Viterbi scores, and best-tree selection.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::category::{apply, unify, Category, Direction};
use crate::denotation::{join, merge, project_n, Relation, RelationError};
use crate::environment::Environment;
use crate::forest::{dump_relation, DumpComponent, DumpDerivation, DumpItem, ForestDump, Rule, Tree};
use crate::grammar::Grammar;
use crate::input::InputChart;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasicItem {
    pub i: usize,
    pub j: usize,
    pub cat: Category,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub word: String,
    pub weight: f64,
    pub relation: Relation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub rule: Rule,
    /// Children in string order.
    pub children: Vec<usize>,
    pub leaf: Option<Leaf>,
}

impl Derivation {
    /// Split point of a binary derivation.
    pub fn split(&self, chart: &BasicChart) -> usize {
        self.children.first().map_or(0, |&c| chart.items[c].j)
    }

    /// Functor and argument child ids.
    fn functor_arg(&self) -> (usize, usize) {
        match self.rule {
            Rule::R1 => (self.children[0], self.children[1]),
            _ => (self.children[1], self.children[0]),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{0}")]
    Relation(#[from] RelationError),
    #[error("no probability for production `{0}`")]
    MissingProbability(String),
}

/// A closed chart with memoized denotations and scores.
#[derive(Clone, Debug)]
pub struct BasicChart {
    pub n: usize,
    pub items: Vec<BasicItem>,
    pub derivations: Vec<Vec<Derivation>>,
    pub denotations: Vec<Relation>,
    /// Per derivation, the denotation it contributes.
    pub derivation_denotations: Vec<Vec<Relation>>,
    pub scores: Vec<i64>,
    pub best: Vec<usize>,
    pub warnings: Vec<String>,
    index: HashMap<BasicItem, usize>,
}

/// Lexical seeding: one item per edge and matching single-component entry.
pub fn seed(input: &InputChart, g: &Grammar) -> (Vec<(BasicItem, Leaf)>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for e in &input.edges {
        let entries: Vec<_> = g.lookup(&e.word).iter().filter(|x| x.is_single()).collect();
        if g.lookup(&e.word).is_empty() {
            warnings.push(format!("unknown word `{}` at {}..{}", e.word, e.i, e.j));
        }
        for entry in entries {
            let item = BasicItem { i: e.i, j: e.j, cat: entry.components[0].clone() };
            let leaf = Leaf { word: e.word.clone(), weight: e.weight, relation: entry.denotation.clone() };
            out.push((item, leaf));
        }
    }
    (out, warnings)
}

impl BasicChart {
    pub fn parse(input: &InputChart, g: &Grammar) -> Result<BasicChart, ParseError> {
        let mut chart = BasicChart {
            n: input.n,
            items: Vec::new(),
            derivations: Vec::new(),
            denotations: Vec::new(),
            derivation_denotations: Vec::new(),
            scores: Vec::new(),
            best: Vec::new(),
            warnings: Vec::new(),
            index: HashMap::new(),
        };
        let (seeds, warnings) = seed(input, g);
        chart.warnings = warnings;
        let mut agenda = VecDeque::new();
        for (item, leaf) in seeds {
            let (id, fresh) = chart.intern(item);
            if fresh {
                agenda.push_back(id);
            }
            let d = Derivation { rule: Rule::Lex, children: vec![], leaf: Some(leaf) };
            if !chart.derivations[id].contains(&d) {
                chart.derivations[id].push(d);
            }
        }
        chart.close(agenda);
        chart.evaluate()?;
        Ok(chart)
    }

    fn intern(&mut self, item: BasicItem) -> (usize, bool) {
        if let Some(&id) = self.index.get(&item) {
            return (id, false);
        }
        let id = self.items.len();
        self.index.insert(item.clone(), id);
        self.items.push(item);
        self.derivations.push(Vec::new());
        (id, true)
    }

    /// Agenda fixpoint: each popped item is combined with every adjacent
    /// item popped before it, so every pair is tried exactly once.
    fn close(&mut self, mut agenda: VecDeque<usize>) {
        let mut by_start: Vec<Vec<usize>> = vec![Vec::new(); self.n + 1];
        let mut by_end: Vec<Vec<usize>> = vec![Vec::new(); self.n + 1];
        while let Some(x) = agenda.pop_front() {
            let (i, j) = (self.items[x].i, self.items[x].j);
            by_start[i].push(x);
            by_end[j].push(x);
            let mut found = Vec::new();
            for &y in &by_start[j] {
                // x on the left
                found.extend(self.combine(x, y));
            }
            for &y in &by_end[i] {
                found.extend(self.combine(y, x));
            }
            for (item, d) in found {
                let (id, fresh) = self.intern(item);
                if fresh {
                    agenda.push_back(id);
                }
                self.derivations[id].push(d);
            }
        }
    }

    /// Consequents of the left item `l` followed by the right item `r`.
    fn combine(&self, l: usize, r: usize) -> Vec<(BasicItem, Derivation)> {
        let (li, ri) = (&self.items[l], &self.items[r]);
        let mut out = Vec::new();
        if let Some(cat) = apply(&li.cat, &ri.cat, Direction::Forward) {
            out.push((
                BasicItem { i: li.i, j: ri.j, cat },
                Derivation { rule: Rule::R1, children: vec![l, r], leaf: None },
            ));
        }
        if let Some(cat) = apply(&ri.cat, &li.cat, Direction::Backward) {
            out.push((
                BasicItem { i: li.i, j: ri.j, cat },
                Derivation { rule: Rule::R2, children: vec![l, r], leaf: None },
            ));
        }
        out
    }

    /// Denotations and S_D scores, bottom-up by span.
    fn evaluate(&mut self) -> Result<(), ParseError> {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by_key(|&x| (self.items[x].j - self.items[x].i, x));
        let count = self.items.len();
        self.denotations = vec![Relation::empty(0); count];
        self.derivation_denotations = vec![Vec::new(); count];
        self.scores = vec![0; count];
        self.best = vec![0; count];
        for x in order {
            let mut total: Option<Relation> = None;
            let mut per = Vec::with_capacity(self.derivations[x].len());
            for d in &self.derivations[x] {
                let r = match &d.leaf {
                    Some(leaf) => leaf.relation.clone(),
                    None => {
                        let (f, a) = d.functor_arg();
                        let arg = &self.denotations[a];
                        project_n(&join(&self.denotations[f], arg), arg.arity())?
                    }
                };
                total = Some(match total {
                    None => r.clone(),
                    Some(acc) => merge(&acc, &r)?,
                });
                per.push(r);
            }
            self.denotations[x] = total.unwrap_or_else(|| Relation::empty(0));
            let scores: Vec<i64> = self.derivations[x]
                .iter()
                .zip(&per)
                .map(|(d, r)| {
                    d.children.iter().map(|&c| self.scores[c]).sum::<i64>() + i64::from(!r.is_empty())
                })
                .collect();
            self.best[x] = self.pick(x, |k| scores[k] as f64);
            self.scores[x] = scores.get(self.best[x]).copied().unwrap_or(0);
            self.derivation_denotations[x] = per;
        }
        Ok(())
    }

    /// Highest-scoring derivation; ties go to the lower rule id, then the
    /// lower split point, then the smaller child items.
    fn pick(&self, x: usize, score: impl Fn(usize) -> f64) -> usize {
        let key = |k: usize| {
            let d = &self.derivations[x][k];
            let kids: Vec<&BasicItem> = d.children.iter().map(|&c| &self.items[c]).collect();
            (d.rule, d.split(self), kids)
        };
        (0..self.derivations[x].len())
            .min_by(|&a, &b| {
                score(b).partial_cmp(&score(a)).unwrap_or(std::cmp::Ordering::Equal).then_with(|| key(a).cmp(&key(b)))
            })
            .unwrap_or(0)
    }

    pub fn id(&self, item: &BasicItem) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items spanning the input whose category unifies with `goal`.
    pub fn goal_items(&self, goal: &Category) -> Vec<usize> {
        (0..self.items.len())
            .filter(|&x| {
                let it = &self.items[x];
                it.i == 0 && it.j == self.n && self.n > 0 && unify(goal, &it.cat).is_ok()
            })
            .collect()
    }

    pub fn recognize(&self, goal: &Category) -> bool {
        !self.goal_items(goal).is_empty()
    }

    /// The best goal item under S_D (ties to the earliest item).
    pub fn best_goal(&self, goal: &Category) -> Option<usize> {
        let goals = self.goal_items(goal);
        goals.iter().copied().max_by(|&a, &b| self.scores[a].cmp(&self.scores[b]).then(b.cmp(&a)))
    }

    pub fn best_tree(&self, x: usize) -> Tree {
        self.tree_with(x, &self.best)
    }

    fn tree_with(&self, x: usize, choice: &[usize]) -> Tree {
        let d = &self.derivations[x][choice[x]];
        self.node(x, d, d.children.iter().map(|&c| self.tree_with(c, choice)).collect())
    }

    fn node(&self, x: usize, d: &Derivation, children: Vec<Tree>) -> Tree {
        let it = &self.items[x];
        Tree {
            start: it.i,
            end: it.j,
            label: it.cat.to_string(),
            denotation: self.denotations[x].clone(),
            rule: d.rule,
            word: d.leaf.as_ref().map(|l| l.word.clone()),
            children,
        }
    }

    /// Every tree of `x`, in derivation order, up to `limit` trees.
    pub fn trees(&self, x: usize, limit: usize) -> Vec<Tree> {
        let mut out = Vec::new();
        for d in &self.derivations[x] {
            if out.len() >= limit {
                break;
            }
            match d.children.as_slice() {
                [] => out.push(self.node(x, d, vec![])),
                [l, r] => {
                    for lt in self.trees(*l, limit) {
                        for rt in self.trees(*r, limit) {
                            if out.len() >= limit {
                                break;
                            }
                            out.push(self.node(x, d, vec![lt.clone(), rt]));
                        }
                    }
                }
                _ => unreachable!("basic derivations are lexical or binary"),
            }
        }
        out
    }

    /// Viterbi scores under an external production probability table.
    pub fn viterbi(&self, probs: &ProbTable) -> Result<ViterbiScores, ParseError> {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by_key(|&x| (self.items[x].j - self.items[x].i, x));
        let mut scores = vec![0.0; self.items.len()];
        let mut best = vec![0; self.items.len()];
        for x in order {
            let mut per = Vec::new();
            for d in &self.derivations[x] {
                let key = self.production(x, d);
                let p = probs.get(&key).ok_or(ParseError::MissingProbability(key))?;
                let s = match &d.leaf {
                    Some(leaf) => p * leaf.weight,
                    None => d.children.iter().fold(p, |acc, &c| acc * scores[c]),
                };
                per.push(s);
            }
            best[x] = self.pick(x, |k| per[k]);
            scores[x] = per.get(best[x]).copied().unwrap_or(0.0);
        }
        Ok(ViterbiScores { scores, best })
    }

    pub fn viterbi_tree(&self, x: usize, v: &ViterbiScores) -> Tree {
        self.tree_with(x, &v.best)
    }

    /// Display form of the production a derivation uses.
    pub fn production(&self, x: usize, d: &Derivation) -> String {
        let lhs = &self.items[x].cat;
        match &d.leaf {
            Some(leaf) => format!("{lhs} -> {}", leaf.word),
            None => {
                let kids: Vec<String> =
                    d.children.iter().map(|&c| self.items[c].cat.to_string()).collect();
                format!("{lhs} -> {}", kids.join(" "))
            }
        }
    }

    pub fn dump(&self, env: &Environment) -> ForestDump {
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(id, it)| DumpItem {
                id,
                i: it.i,
                j: it.j,
                delta: vec![it.cat.to_string()],
                sigma: vec![DumpComponent { a: it.i, b: it.j, cat: it.cat.to_string() }],
                cat: it.cat.to_string(),
                denotation: dump_relation(&self.denotations[id], env),
                score: self.scores[id],
            })
            .collect();
        let derivations = self
            .derivations
            .iter()
            .enumerate()
            .flat_map(|(parent, ds)| {
                ds.iter().map(move |d| DumpDerivation {
                    parent,
                    rule: d.rule.name().to_string(),
                    children: d.children.clone(),
                    word: d.leaf.as_ref().map(|l| l.word.clone()),
                })
            })
            .collect();
        ForestDump { items, derivations }
    }
}

#[derive(Clone, Debug)]
pub struct ViterbiScores {
    pub scores: Vec<f64>,
    pub best: Vec<usize>,
}

/// Production probabilities keyed by the production's display form.
///
/// ```text
/// NP -> NP NP\NP 0.4
/// NP -> lemon 1.0
/// ```
#[derive(Clone, Debug, Default)]
pub struct ProbTable {
    probs: HashMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ProbError {
    pub line: usize,
    pub msg: String,
}

impl ProbTable {
    pub fn insert(&mut self, production: &str, p: f64) {
        self.probs.insert(normalize(production), p);
    }

    pub fn get(&self, production: &str) -> Option<f64> {
        self.probs.get(production).copied()
    }

    pub fn load(text: &str) -> Result<ProbTable, ProbError> {
        let mut t = ProbTable::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ProbError { line: n + 1, msg: msg.to_string() };
            let (prod, p) = line.rsplit_once(char::is_whitespace).ok_or_else(|| err("expected `<production> <p>`"))?;
            if !prod.contains("->") {
                return Err(err("expected `->`"));
            }
            let p: f64 = p.parse().map_err(|_| err("bad probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(err("probability outside [0,1]"));
            }
            t.insert(prod, p);
        }
        Ok(t)
    }

    /// A table giving every production of the chart probability `p`.
    pub fn uniform(chart: &BasicChart, p: f64) -> ProbTable {
        let mut t = ProbTable::default();
        for (x, ds) in chart.derivations.iter().enumerate() {
            for d in ds {
                t.insert(&chart.production(x, d), p);
            }
        }
        t
    }
}

fn normalize(production: &str) -> String {
    let (lhs, rhs) = production.split_once("->").unwrap_or(("", production));
    let rhs: Vec<&str> = rhs.split_whitespace().collect();
    format!("{} -> {}", lhs.trim(), rhs.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;
    use crate::denotation::QuantifierRegistry;
    use crate::environment::load_environment;
    use crate::grammar::load_lexicon;

    const ENV: &str = "
        entity l1 l2 l3 l4 b1 b2 m1 m2 m3
        relation lemon : NP { (l1)(l2)(l3)(l4) }
        relation bin : NP { (b1)(b2) }
        relation machine : NP { (m1)(m2)(m3) }
        relation in : NP\\NP/NP { (b1,l1,l1)(m1,l2,l2) }
        relation by : NP\\NP/NP { (m1,b1,b1)(m2,b2,b2) }
    ";
    const LEX: &str = "
        word lemon : NP = rel lemon
        word bin : NP = rel bin
        word machine : NP = rel machine
        word in : NP\\NP/NP = rel in
        word by : NP\\NP/NP = rel by
        word the : NP/NP = identity
    ";

    fn setup() -> (Environment, Grammar) {
        let env = load_environment(ENV).unwrap();
        let g = load_lexicon(LEX, &env, &QuantifierRegistry::builtin()).unwrap();
        (env, g)
    }

    fn np() -> Category {
        parse_category("NP").unwrap()
    }

    #[test]
    fn seeds_lexical_items() {
        let (_, g) = setup();
        let (seeds, warnings) = seed(&InputChart::from_sentence("lemon zzz"), &g);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].0, BasicItem { i: 0, j: 1, cat: np() });
        assert_eq!(seeds[0].1.relation.len(), 4);
        assert_eq!(warnings.len(), 1);
        assert!(seed(&InputChart::from_sentence(""), &g).0.is_empty());
    }

    #[test]
    fn lemon_forest_chart() {
        let (env, g) = setup();
        let chart = BasicChart::parse(&InputChart::from_sentence("lemon in bin by machine"), &g).unwrap();
        let den = |i, j, c: &str| {
            let id = chart.id(&BasicItem { i, j, cat: parse_category(c).unwrap() }).unwrap();
            env.display(&chart.denotations[id]).to_string()
        };
        assert_eq!(den(1, 3, "NP\\NP"), "{(l1,l1)}");
        assert_eq!(den(3, 5, "NP\\NP"), "{(b1,b1),(b2,b2)}");
        assert_eq!(den(2, 5, "NP"), "{b1,b2}");
        assert_eq!(den(0, 5, "NP"), "{l1}");
        let root = chart.best_goal(&np()).unwrap();
        assert_eq!(chart.scores[root], 9);
        let tree = chart.best_tree(root);
        assert_eq!(
            tree.bracketed(None),
            "(NP (NP lemon) (NP\\NP (NP\\NP/NP in) (NP (NP bin) (NP\\NP (NP\\NP/NP by) (NP machine)))))"
        );
        assert_eq!(chart.trees(root, 10).len(), 2);
    }

    #[test]
    fn unparseable_input() {
        let (_, g) = setup();
        let chart = BasicChart::parse(&InputChart::from_sentence("in in"), &g).unwrap();
        assert!(!chart.recognize(&np()));
        let empty = BasicChart::parse(&InputChart::from_sentence(""), &g).unwrap();
        assert!(!empty.recognize(&np()));
    }

    #[test]
    fn viterbi_scores() {
        let (_, g) = setup();
        let chart = BasicChart::parse(&InputChart::from_sentence("lemon in bin by machine"), &g).unwrap();
        let root = chart.best_goal(&np()).unwrap();
        let ones = ProbTable::uniform(&chart, 1.0);
        let v = chart.viterbi(&ones).unwrap();
        assert!(v.scores.iter().all(|&s| s == 1.0));
        // a tie resolves the same way as S_D's tie policy: lower split first
        let tree = chart.viterbi_tree(root, &v);
        assert_eq!(tree.children[0].label, "NP");
        assert_eq!(tree.children[0].end, 1);

        let mut table = ProbTable::uniform(&chart, 1.0);
        table.insert("NP -> NP NP\\NP", 0.5);
        table.insert("NP\\NP -> NP\\NP/NP NP", 0.8);
        let v = chart.viterbi(&table).unwrap();
        // right-branching: two NP->NP NP\NP and two PP rules: 0.5^2 * 0.8^2
        assert!((v.scores[root] - 0.16).abs() < 1e-12);

        let err = chart.viterbi(&ProbTable::default()).unwrap_err();
        assert!(matches!(err, ParseError::MissingProbability(_)));
    }

    #[test]
    fn probability_file() {
        let t = ProbTable::load("# rules\nNP ->  NP  NP\\NP 0.25\nNP -> lemon 1\n").unwrap();
        assert_eq!(t.get("NP -> NP NP\\NP"), Some(0.25));
        assert_eq!(t.get("NP -> lemon"), Some(1.0));
        assert!(ProbTable::load("NP -> lemon 2").is_err());
        assert!(ProbTable::load("NP lemon 0.5").is_err());
    }

    #[test]
    fn lattice_weights_scale_leaves() {
        let (_, g) = setup();
        let input = crate::input::load_lattice("edge 0 1 lemon 0.5\nedge 0 1 melon 0.5").unwrap();
        let chart = BasicChart::parse(&input, &g).unwrap();
        assert_eq!(chart.warnings.len(), 1);
        let v = chart.viterbi(&ProbTable::uniform(&chart, 1.0)).unwrap();
        assert_eq!(v.scores[0], 0.5);
    }
}
