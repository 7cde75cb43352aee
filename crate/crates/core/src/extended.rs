//! The multi-component parser over items `[i,j,Δ,Σ]`.
//!
//! Δ holds the unrecognized components (its last entry is the category the
//! item currently presents); Σ holds recognized components `⟨a,b,γ⟩`,
//! outermost first. Quantifier entries seed items whose Σ is the anchor
//! `NP_q/NP_e`; function application, conjunction skipping and reassembly
//! move material between the two until a single gapless component remains.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use crate::basic::{Leaf, ParseError};
use crate::category::{apply, unify, Base, Category, ConjOp, Direction, FieldKind, QuantMark};
use crate::denotation::{
    conj_combine, join, merge, project_n, quant_project, QuantMode, QuantifierFn, Relation, Value,
};
use crate::environment::{host_tuples, totalize, Environment};
use crate::forest::{
    dump_relation, DumpComponent, DumpDerivation, DumpItem, ForestDump, Rule, Tree,
};
use crate::grammar::{Grammar, Semantics};
use crate::input::InputChart;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comp {
    pub a: usize,
    pub b: usize,
    pub cat: Category,
}

impl fmt::Display for Comp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.a, self.b, self.cat)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtItem {
    pub i: usize,
    pub j: usize,
    pub delta: Vec<Category>,
    pub sigma: Vec<Comp>,
}

impl fmt::Display for ExtItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let delta: Vec<String> = self.delta.iter().map(|c| c.to_string()).collect();
        let sigma: Vec<String> = self.sigma.iter().map(|c| c.to_string()).collect();
        write!(f, "[{},{}, {}, {}]", self.i, self.j, delta.join(" . "), sigma.join(" . "))
    }
}

fn count_bound(c: &Category) -> usize {
    c.subcategories()
        .iter()
        .filter(|s| matches!(s, Category::Atom(_, QuantMark::Bound(_))))
        .count()
}

impl ExtItem {
    pub fn pure(i: usize, j: usize, cat: Category) -> ExtItem {
        ExtItem { i, j, delta: vec![cat.clone()], sigma: vec![Comp { a: i, b: j, cat }] }
    }

    pub fn current(&self) -> &Category {
        self.delta.last().expect("Δ is never empty")
    }

    /// A plain single-component constituent `[i,j,γ,⟨i,j,γ⟩]`.
    pub fn is_pure(&self) -> bool {
        self.delta.len() == 1
            && self.sigma.len() == 1
            && self.sigma[0] == Comp { a: self.i, b: self.j, cat: self.delta[0].clone() }
    }

    /// Quantifier awaiting application: the last recognized component is
    /// an NP bound to it and nothing is left unrecognized.
    pub fn pending(&self) -> Option<&str> {
        if self.delta.len() == 1 && self.sigma.len() >= 2 {
            self.sigma.last()?.cat.bound_np()
        } else {
            None
        }
    }

    /// A quantifier anchor still waiting for its restrictor noun.
    fn unsaturated(&self) -> bool {
        self.sigma.len() == 1
            && self.sigma[0].cat.is_functor()
            && self.sigma[0].cat != *self.current()
            && !self.current().is_conj_prime()
    }

    /// Last recognized component is a saturated quantified NP.
    fn ready(&self) -> bool {
        self.sigma.last().is_some_and(|c| c.cat.bound_np().is_some())
    }

    fn coverage(&self) -> usize {
        self.sigma.iter().map(|c| c.b - c.a).sum()
    }

    fn bound_count(&self) -> usize {
        self.delta.iter().map(count_bound).sum::<usize>()
            + self.sigma.iter().map(|c| count_bound(&c.cat)).sum::<usize>()
    }

    /// Strictly increases from antecedents to consequent under every rule.
    #[allow(clippy::type_complexity)]
    pub(crate) fn measure(&self) -> (usize, Reverse<usize>, usize, Reverse<usize>, Reverse<usize>) {
        (
            self.j - self.i,
            Reverse(self.sigma.len()),
            self.coverage(),
            Reverse(self.delta.len()),
            Reverse(self.bound_count()),
        )
    }

    fn with_current(&self, cat: Category) -> Vec<Category> {
        let mut d = self.delta[..self.delta.len() - 1].to_vec();
        d.push(cat);
        d
    }
}

fn same_shape(a: &[Category], b: &[Category]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.erase_marks() == y.erase_marks())
}

// ---------------------------------------------------------------------------
// Rules. Each returns the consequent, if any.

/// R1/R2 on an existing component: a pure functor consumes the argument's
/// head component.
pub fn attach_existing(f: &ExtItem, a: &ExtItem, dir: Direction) -> Option<ExtItem> {
    if !f.is_pure() || a.pending().is_some() {
        return None;
    }
    let arg = a.current();
    if arg.bound_np().is_some() || arg.is_conj_prime() {
        return None;
    }
    let head = a.sigma.first()?;
    if head.cat != *arg {
        return None;
    }
    let adjacent = match dir {
        Direction::Forward => f.j == a.i && head.a == a.i,
        Direction::Backward => a.j == f.i && head.b == a.j,
    };
    if !adjacent {
        return None;
    }
    let gamma = apply(f.current(), arg, dir)?;
    let comp = match dir {
        Direction::Forward => Comp { a: f.i, b: head.b, cat: gamma.clone() },
        Direction::Backward => Comp { a: head.a, b: f.j, cat: gamma.clone() },
    };
    let mut sigma = vec![comp];
    sigma.extend_from_slice(&a.sigma[1..]);
    Some(ExtItem { i: f.i.min(a.i), j: f.j.max(a.j), delta: a.with_current(gamma), sigma })
}

/// R1/R2 completing a quantifier anchor with its restrictor noun.
pub fn saturate_anchor(h: &ExtItem, p: &ExtItem, dir: Direction) -> Option<ExtItem> {
    if !p.is_pure() || !h.unsaturated() {
        return None;
    }
    let comp = &h.sigma[0];
    if comp.a != h.i || comp.b != h.j {
        return None;
    }
    let adjacent = match dir {
        Direction::Forward => h.j == p.i,
        Direction::Backward => p.j == h.i,
    };
    if !adjacent {
        return None;
    }
    let gamma = apply(&comp.cat, p.current(), dir)?;
    let (i, j) = (h.i.min(p.i), h.j.max(p.j));
    Some(ExtItem { i, j, delta: h.delta.clone(), sigma: vec![Comp { a: i, b: j, cat: gamma }] })
}

/// R3/R4: a pure functor fills the pending component `π` preceding the
/// argument's current category, and becomes a fresh recognized component.
/// The flag reports whether the argument field is retained for a later
/// quantifier (body attachment) rather than projected away.
pub fn attach_fresh(f: &ExtItem, a: &ExtItem, dir: Direction) -> Option<(ExtItem, bool)> {
    if !f.is_pure() || a.delta.len() < 2 || !a.ready() {
        return None;
    }
    let phi = f.current();
    let (_, _, fdir) = phi.as_functor()?;
    let adjacent = match dir {
        Direction::Forward => f.j == a.i,
        Direction::Backward => a.j == f.i,
    };
    if fdir != dir || !adjacent {
        return None;
    }
    let n = a.delta.len();
    let (pi, arg) = (&a.delta[n - 2], &a.delta[n - 1]);
    let u = unify(pi, phi).ok()?;
    let phi_s = phi.substitute(&u.concrete);
    let (phi_res, phi_arg, _) = phi_s.as_functor()?;
    if !phi_arg.equivalent(arg) {
        return None;
    }
    let (current, retain) = match pi {
        Category::Body(_) => (phi_res.clone(), true),
        _ => {
            let (res, _, _) = pi.as_functor()?;
            (res.substitute(&u.pattern), false)
        }
    };
    let mut delta = a.delta[..n - 2].to_vec();
    delta.push(current);
    let mut sigma = vec![Comp { a: f.i, b: f.j, cat: phi_s.clone() }];
    sigma.extend_from_slice(&a.sigma);
    Some((ExtItem { i: f.i.min(a.i), j: f.j.max(a.j), delta, sigma }, retain))
}

/// R5/R6: `Δ·γ/δ·δ ⇒ Δ·γ` (an empty component is discharged).
pub fn discharge_empty(x: &ExtItem) -> Option<(Rule, ExtItem)> {
    let n = x.delta.len();
    if n < 2 {
        return None;
    }
    let (res, arg, dir) = x.delta[n - 2].as_functor()?;
    if !arg.equivalent(&x.delta[n - 1]) {
        return None;
    }
    let mut delta = x.delta[..n - 2].to_vec();
    delta.push(res.clone());
    let rule = if dir == Direction::Forward { Rule::R5 } else { Rule::R6 };
    Some((rule, ExtItem { i: x.i, j: x.j, delta, sigma: x.sigma.clone() }))
}

fn conjoinable(x: &ExtItem) -> bool {
    let c = x.current();
    !c.is_conj() && !c.is_conj_prime() && !x.unsaturated() && x.pending().is_none()
}

/// R7: a conjunction word immediately left of `a` turns its category into
/// `Conj′_δ`.
pub fn consume_conj(c: &ExtItem, a: &ExtItem, op: ConjOp) -> Option<ExtItem> {
    if !c.is_pure() || !c.current().is_conj() || c.j != a.i || !conjoinable(a) {
        return None;
    }
    let cur = Category::ConjPrime(op, Box::new(a.current().clone()));
    Some(ExtItem { i: c.i, j: a.j, delta: a.with_current(cur), sigma: a.sigma.clone() })
}

/// R8: `[k,j,Δ·Conj′_δ,Σ]` skips a left conjunct `[i,k,Δ·δ,_]`.
pub fn skip_left(w: &ExtItem, m: &ExtItem) -> Option<ExtItem> {
    let Category::ConjPrime(_, inner) = m.current() else { return None };
    if w.j != m.i || !conjoinable(w) || !same_shape(&w.delta, &m.with_current((**inner).clone())) {
        return None;
    }
    Some(ExtItem { i: w.i, j: m.j, delta: m.with_current((**inner).clone()), sigma: m.sigma.clone() })
}

/// R9: `[i,k,Δ·δ,Σ]` skips a right conjunct `[k,j,Δ·Conj′_δ,_]`.
pub fn skip_right(m: &ExtItem, w: &ExtItem) -> Option<ExtItem> {
    let Category::ConjPrime(_, inner) = w.current() else { return None };
    if m.j != w.i || !conjoinable(m) || !same_shape(&m.delta, &w.with_current((**inner).clone())) {
        return None;
    }
    Some(ExtItem { i: m.i, j: w.j, delta: m.delta.clone(), sigma: m.sigma.clone() })
}

/// R10: a conjunction word left of the trailing component `⟨c,b,δ⟩`
/// widens it to `⟨a,b,Conj′_δ⟩`.
pub fn attach_conj(y: &ExtItem, c: &ExtItem, op: ConjOp) -> Option<ExtItem> {
    if !c.is_pure() || !c.current().is_conj() || y.delta.len() != 1 || y.pending().is_some() {
        return None;
    }
    let (t, rest) = y.sigma.split_last()?;
    if t.a != c.j || c.i < y.i || t.cat.is_conj_prime() || t.cat.is_conj() || t.cat.bound_np().is_some() {
        return None;
    }
    if rest.iter().any(|o| o.b > c.i && o.a < t.b) {
        return None;
    }
    let mut sigma = rest.to_vec();
    sigma.push(Comp { a: c.i, b: t.b, cat: Category::ConjPrime(op, Box::new(t.cat.clone())) });
    Some(ExtItem { i: y.i, j: y.j, delta: y.delta.clone(), sigma })
}

/// R11: two items with identical span, category and Σ-prefix, one ending
/// in `⟨a,c,δ⟩` and the other in `⟨c,b,Conj′_δ⟩`, reassemble to `⟨a,b,δ⟩`.
/// Returns the consequent and the conjunction operator.
pub fn reassemble(left: &ExtItem, right: &ExtItem) -> Option<(ExtItem, ConjOp)> {
    if left.i != right.i || left.j != right.j || left.delta != right.delta || left.delta.len() != 1 {
        return None;
    }
    let (l, lp) = left.sigma.split_last()?;
    let (r, rp) = right.sigma.split_last()?;
    let Category::ConjPrime(op, inner) = &r.cat else { return None };
    if lp != rp || l.b != r.a || **inner != l.cat {
        return None;
    }
    let mut sigma = lp.to_vec();
    sigma.push(Comp { a: l.a, b: r.b, cat: l.cat.clone() });
    Some((ExtItem { i: left.i, j: left.j, delta: left.delta.clone(), sigma }, *op))
}

/// R12: merges the last two recognized components when the first is a
/// functor over the second and they are adjacent in the right order.
pub fn combine_components(x: &ExtItem) -> Option<ExtItem> {
    if x.delta.len() != 1 || x.sigma.len() < 2 || x.pending().is_some() {
        return None;
    }
    let n = x.sigma.len();
    let (f, e) = (&x.sigma[n - 2], &x.sigma[n - 1]);
    let (res, arg, dir) = f.cat.as_functor()?;
    if !arg.equivalent(&e.cat) {
        return None;
    }
    let merged = match dir {
        Direction::Forward if f.b == e.a => Comp { a: f.a, b: e.b, cat: res.clone() },
        Direction::Backward if e.b == f.a => Comp { a: e.a, b: f.b, cat: res.clone() },
        _ => return None,
    };
    let mut sigma = x.sigma[..n - 2].to_vec();
    sigma.push(merged);
    Some(ExtItem { i: x.i, j: x.j, delta: x.delta.clone(), sigma })
}

/// R13: discharges a pending quantifier, rewriting its bound marks to `_e`.
pub fn apply_quantifier(x: &ExtItem) -> Option<(ExtItem, String)> {
    let q = x.pending()?.to_string();
    let delta = x.delta.iter().map(|c| c.discharge_quantifier(&q)).collect();
    let sigma = x
        .sigma
        .iter()
        .map(|c| Comp { a: c.a, b: c.b, cat: c.cat.discharge_quantifier(&q) })
        .collect();
    Some((ExtItem { i: x.i, j: x.j, delta, sigma }, q))
}

// ---------------------------------------------------------------------------
// Chart

#[derive(Clone, Debug, PartialEq)]
pub struct ExtDerivation {
    pub rule: Rule,
    /// Antecedents whose denotations and scores feed the consequent.
    pub children: Vec<usize>,
    /// Side-condition item of R8/R9.
    pub witness: Option<usize>,
    pub leaf: Option<Leaf>,
    /// Conjunction operator (R7, R10, R11) or quantifier name (R13).
    pub op: Option<ConjOp>,
    pub quantifier: Option<String>,
    /// R3/R4 body attachment keeps the quantified field.
    pub retain: bool,
}

impl ExtDerivation {
    pub(crate) fn new(rule: Rule, children: Vec<usize>) -> Self {
        ExtDerivation { rule, children, witness: None, leaf: None, op: None, quantifier: None, retain: false }
    }
}

#[derive(Clone, Debug)]
pub struct ExtChart {
    pub n: usize,
    pub items: Vec<ExtItem>,
    pub derivations: Vec<Vec<ExtDerivation>>,
    pub denotations: Vec<Relation>,
    /// Restrictor denotation of items carrying a pending quantifier.
    pub restrictors: Vec<Option<Relation>>,
    pub scores: Vec<i64>,
    pub best: Vec<usize>,
    pub warnings: Vec<String>,
    index: HashMap<ExtItem, usize>,
    conj_ops: HashMap<usize, BTreeSet<ConjOp>>,
}

type Found = Vec<(ExtItem, ExtDerivation)>;

/// A lexical item, its leaf, and the operator of a conjunction word.
pub type Seed = (ExtItem, Leaf, Option<ConjOp>);

/// Lexical items: pure items for single-component entries, and for a
/// quantifier entry `Δ·anchor` the item `[i,j,Δ·target(anchor),⟨i,j,anchor⟩]`.
pub fn seed_extended(input: &InputChart, g: &Grammar) -> (Vec<Seed>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for e in &input.edges {
        let entries = g.lookup(&e.word);
        if entries.is_empty() {
            warnings.push(format!("unknown word `{}` at {}..{}", e.word, e.i, e.j));
        }
        for entry in entries {
            let comps = entry.instantiated();
            let leaf = Leaf { word: e.word.clone(), weight: e.weight, relation: entry.denotation.clone() };
            let item = if comps.len() == 1 {
                ExtItem::pure(e.i, e.j, comps[0].clone())
            } else {
                let anchor = comps.last().expect("nonempty").clone();
                let mut delta = comps[..comps.len() - 1].to_vec();
                delta.push(anchor.target().clone());
                ExtItem { i: e.i, j: e.j, delta, sigma: vec![Comp { a: e.i, b: e.j, cat: anchor }] }
            };
            let op = match entry.semantics {
                Semantics::Conj(op) => Some(op),
                _ => None,
            };
            out.push((item, leaf, op));
        }
    }
    (out, warnings)
}

impl ExtChart {
    pub fn parse(input: &InputChart, g: &Grammar, env: &Environment) -> Result<ExtChart, ParseError> {
        let mut chart = ExtChart::empty(input.n);
        let (seeds, warnings) = seed_extended(input, g);
        chart.warnings = warnings;
        let mut agenda = VecDeque::new();
        for (item, leaf, op) in seeds {
            let (id, fresh) = chart.intern(item);
            if fresh {
                agenda.push_back(id);
            }
            if let Some(op) = op {
                chart.conj_ops.entry(id).or_default().insert(op);
            }
            let mut d = ExtDerivation::new(Rule::Lex, vec![]);
            d.leaf = Some(leaf);
            if !chart.derivations[id].contains(&d) {
                chart.derivations[id].push(d);
            }
        }
        chart.close(agenda);
        chart.evaluate(g, env)?;
        Ok(chart)
    }

    /// Chart over given items and derivations, not yet evaluated.
    pub(crate) fn assemble(
        n: usize,
        items: Vec<ExtItem>,
        derivations: Vec<Vec<ExtDerivation>>,
        conj_ops: HashMap<usize, BTreeSet<ConjOp>>,
    ) -> ExtChart {
        let mut chart = ExtChart::empty(n);
        chart.index = items.iter().cloned().enumerate().map(|(k, it)| (it, k)).collect();
        chart.items = items;
        chart.derivations = derivations;
        chart.conj_ops = conj_ops;
        chart
    }

    fn empty(n: usize) -> ExtChart {
        ExtChart {
            n,
            items: Vec::new(),
            derivations: Vec::new(),
            denotations: Vec::new(),
            restrictors: Vec::new(),
            scores: Vec::new(),
            best: Vec::new(),
            warnings: Vec::new(),
            index: HashMap::new(),
            conj_ops: HashMap::new(),
        }
    }

    fn intern(&mut self, item: ExtItem) -> (usize, bool) {
        if let Some(&id) = self.index.get(&item) {
            return (id, false);
        }
        let id = self.items.len();
        self.index.insert(item.clone(), id);
        self.items.push(item);
        self.derivations.push(Vec::new());
        (id, true)
    }

    fn ops(&self, id: usize) -> Vec<ConjOp> {
        self.conj_ops.get(&id).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn close(&mut self, mut agenda: VecDeque<usize>) {
        let n = self.n;
        let mut by_start: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let mut by_end: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        // R10 partners: conjunction items by end, items by trailing-component start
        let mut conj_by_end: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let mut trail_by_start: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        // R11 partners: same span, Δ and Σ-prefix
        let mut groups: HashMap<ExtItem, Vec<usize>> = HashMap::new();

        while let Some(x) = agenda.pop_front() {
            let it = self.items[x].clone();
            by_start[it.i].push(x);
            by_end[it.j].push(x);
            let mut found: Found = Vec::new();

            self.unary(x, &mut found);
            for &y in &by_start[it.j] {
                self.binary(x, y, &mut found);
            }
            for &y in &by_end[it.i] {
                self.binary(y, x, &mut found);
            }

            if it.is_pure() && it.current().is_conj() {
                conj_by_end[it.j].push(x);
                for &y in &trail_by_start[it.j] {
                    self.conj_attach(y, x, &mut found);
                }
            }
            if let Some(t) = it.sigma.last() {
                trail_by_start[t.a].push(x);
                for &c in &conj_by_end[t.a] {
                    self.conj_attach(x, c, &mut found);
                }
                if it.delta.len() == 1 {
                    let key = ExtItem { sigma: it.sigma[..it.sigma.len() - 1].to_vec(), ..it.clone() };
                    let group = groups.entry(key).or_default();
                    for &y in group.iter() {
                        for (l, r) in [(x, y), (y, x)] {
                            if let Some((item, op)) = reassemble(&self.items[l], &self.items[r]) {
                                let mut d = ExtDerivation::new(Rule::R11, vec![l, r]);
                                d.op = Some(op);
                                found.push((item, d));
                            }
                        }
                    }
                    group.push(x);
                }
            }

            for (item, d) in found {
                let (id, fresh) = self.intern(item);
                if fresh {
                    agenda.push_back(id);
                }
                if !self.derivations[id].contains(&d) {
                    self.derivations[id].push(d);
                }
            }
        }
    }

    fn unary(&self, x: usize, found: &mut Found) {
        let it = &self.items[x];
        if let Some((rule, item)) = discharge_empty(it) {
            found.push((item, ExtDerivation::new(rule, vec![x])));
        }
        if let Some(item) = combine_components(it) {
            found.push((item, ExtDerivation::new(Rule::R12, vec![x])));
        }
        if let Some((item, q)) = apply_quantifier(it) {
            let mut d = ExtDerivation::new(Rule::R13, vec![x]);
            d.quantifier = Some(q);
            found.push((item, d));
        }
    }

    /// Rules over the adjacent pair `l` (left) and `r` (right).
    fn binary(&self, l: usize, r: usize, found: &mut Found) {
        let (li, ri) = (&self.items[l], &self.items[r]);
        let pair = vec![l, r];
        let mut push = |item: Option<ExtItem>, rule: Rule| {
            if let Some(item) = item {
                found.push((item, ExtDerivation::new(rule, pair.clone())));
            }
        };
        push(attach_existing(li, ri, Direction::Forward), Rule::R1);
        push(saturate_anchor(li, ri, Direction::Forward), Rule::R1);
        push(attach_existing(ri, li, Direction::Backward), Rule::R2);
        push(saturate_anchor(ri, li, Direction::Backward), Rule::R2);
        for (res, rule) in [
            (attach_fresh(li, ri, Direction::Forward), Rule::R3),
            (attach_fresh(ri, li, Direction::Backward), Rule::R4),
        ] {
            if let Some((item, retain)) = res {
                let mut d = ExtDerivation::new(rule, pair.clone());
                d.retain = retain;
                found.push((item, d));
            }
        }
        for op in self.ops(l) {
            if let Some(item) = consume_conj(li, ri, op) {
                let mut d = ExtDerivation::new(Rule::R7, pair.clone());
                d.op = Some(op);
                found.push((item, d));
            }
        }
        if let Some(item) = skip_left(li, ri) {
            let mut d = ExtDerivation::new(Rule::R8, vec![r]);
            d.witness = Some(l);
            found.push((item, d));
        }
        if let Some(item) = skip_right(li, ri) {
            let mut d = ExtDerivation::new(Rule::R9, vec![l]);
            d.witness = Some(r);
            found.push((item, d));
        }
    }

    fn conj_attach(&self, y: usize, c: usize, found: &mut Found) {
        for op in self.ops(c) {
            if let Some(item) = attach_conj(&self.items[y], &self.items[c], op) {
                let mut d = ExtDerivation::new(Rule::R10, vec![y, c]);
                d.op = Some(op);
                found.push((item, d));
            }
        }
    }

    /// Denotations, restrictors and S_D scores in measure order.
    pub(crate) fn evaluate(&mut self, g: &Grammar, env: &Environment) -> Result<(), ParseError> {
        let count = self.items.len();
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by_key(|&x| (self.items[x].measure(), x));
        self.denotations = vec![Relation::empty(0); count];
        self.restrictors = vec![None; count];
        self.scores = vec![0; count];
        self.best = vec![0; count];
        for x in order {
            let mut total: Option<Relation> = None;
            let mut restrictor: Option<Relation> = None;
            let mut scores = Vec::with_capacity(self.derivations[x].len());
            for k in 0..self.derivations[x].len() {
                let (r, restr) = self.derivation_denotation(x, k, g, env)?;
                if let Some(rr) = restr {
                    restrictor = Some(match restrictor {
                        None => rr,
                        Some(acc) => merge(&acc, &rr)?,
                    });
                }
                let d = &self.derivations[x][k];
                scores.push(
                    d.children.iter().map(|&c| self.scores[c]).sum::<i64>() + i64::from(!r.is_empty()),
                );
                total = Some(match total {
                    None => r,
                    Some(acc) => merge(&acc, &r)?,
                });
            }
            self.denotations[x] = total.unwrap_or_else(|| Relation::empty(0));
            self.restrictors[x] = restrictor;
            self.best[x] = self.pick(x, &scores);
            self.scores[x] = scores.get(self.best[x]).copied().unwrap_or(0);
        }
        Ok(())
    }

    fn derivation_denotation(
        &mut self,
        x: usize,
        k: usize,
        g: &Grammar,
        env: &Environment,
    ) -> Result<(Relation, Option<Relation>), ParseError> {
        let d = &self.derivations[x][k];
        let den = |c: usize| &self.denotations[c];
        let out = match d.rule {
            Rule::Lex => (d.leaf.as_ref().expect("lexical derivations carry a leaf").relation.clone(), None),
            Rule::R1 | Rule::R2 | Rule::R3 | Rule::R4 => {
                let forward = matches!(d.rule, Rule::R1 | Rule::R3);
                let (f, a) = if forward { (d.children[0], d.children[1]) } else { (d.children[1], d.children[0]) };
                let joined = join(den(f), den(a));
                if d.retain {
                    (joined, Some(den(a).clone()))
                } else {
                    (project_n(&joined, den(a).arity())?, None)
                }
            }
            Rule::R7 => (den(d.children[1]).clone(), self.restrictors[d.children[1]].clone()),
            Rule::R11 => {
                let op = d.op.expect("R11 records its operator");
                (conj_combine(op, den(d.children[0]), den(d.children[1]))?, None)
            }
            Rule::R13 => {
                let c = d.children[0];
                let name = d.quantifier.clone().expect("R13 records its quantifier");
                let q = *g.quantifiers().get(&name)?;
                let cur = self.items[c].current().clone();
                let restrictor = self.restrictors[c].clone();
                match quantify(&q, den(c), restrictor.as_ref(), &cur, env) {
                    Ok(r) => (r, None),
                    Err(msg) => {
                        self.warnings.push(format!("{}: {msg}", self.items[c]));
                        (Relation::empty(cur.arity().unwrap_or(0)), None)
                    }
                }
            }
            _ => {
                let c = d.children[0];
                (den(c).clone(), self.restrictors[c].clone())
            }
        };
        Ok(out)
    }

    fn pick(&self, x: usize, scores: &[i64]) -> usize {
        let key = |k: usize| {
            let d = &self.derivations[x][k];
            let split = d.children.first().map_or(0, |&c| self.items[c].j);
            let kids: Vec<&ExtItem> = d.children.iter().map(|&c| &self.items[c]).collect();
            (d.rule, split, kids)
        };
        (0..self.derivations[x].len())
            .min_by(|&a, &b| scores[b].cmp(&scores[a]).then_with(|| key(a).cmp(&key(b))))
            .unwrap_or(0)
    }

    pub fn id(&self, item: &ExtItem) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Complete items `[0,n,(γ),⟨0,n,γ⟩]` whose category unifies with `goal`.
    pub fn goal_items(&self, goal: &Category) -> Vec<usize> {
        (0..self.items.len())
            .filter(|&x| {
                let it = &self.items[x];
                it.i == 0 && it.j == self.n && self.n > 0 && it.is_pure() && unify(goal, it.current()).is_ok()
            })
            .collect()
    }

    pub fn recognize(&self, goal: &Category) -> bool {
        !self.goal_items(goal).is_empty()
    }

    pub fn best_goal(&self, goal: &Category) -> Option<usize> {
        self.goal_items(goal)
            .into_iter()
            .max_by(|&a, &b| self.scores[a].cmp(&self.scores[b]).then(b.cmp(&a)))
    }

    pub fn label(&self, x: usize) -> String {
        let it = &self.items[x];
        if it.is_pure() {
            it.current().to_string()
        } else {
            it.to_string()
        }
    }

    fn node(&self, x: usize, d: &ExtDerivation, children: Vec<Tree>) -> Tree {
        let it = &self.items[x];
        Tree {
            start: it.i,
            end: it.j,
            label: self.label(x),
            denotation: self.denotations[x].clone(),
            rule: d.rule,
            word: d.leaf.as_ref().map(|l| l.word.clone()),
            children,
        }
    }

    pub fn best_tree(&self, x: usize) -> Tree {
        let d = &self.derivations[x][self.best[x]];
        self.node(x, d, d.children.iter().map(|&c| self.best_tree(c)).collect())
    }

    /// Every tree of `x`, up to `limit` trees.
    pub fn trees(&self, x: usize, limit: usize) -> Vec<Tree> {
        let mut out = Vec::new();
        for d in &self.derivations[x] {
            let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
            for &c in &d.children {
                let subs = self.trees(c, limit);
                let mut next = Vec::new();
                'outer: for p in &partial {
                    for s in &subs {
                        if next.len() >= limit {
                            break 'outer;
                        }
                        let mut q = p.clone();
                        q.push(s.clone());
                        next.push(q);
                    }
                }
                partial = next;
            }
            for kids in partial {
                if out.len() >= limit {
                    return out;
                }
                out.push(self.node(x, d, kids));
            }
        }
        out
    }

    /// Step-by-step derivation listing for the best tree of `x`: lexical
    /// items and restrictor attachments first, then numbered rule firings
    /// bottom-up, with conjunction partial results as unnumbered lines.
    pub fn trace(&self, x: usize, env: &Environment) -> String {
        let mut nodes: Vec<usize> = Vec::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            if nodes.contains(&y) {
                continue;
            }
            nodes.push(y);
            stack.extend(&self.derivations[y][self.best[y]].children);
        }
        let rule_of = |y: usize| &self.derivations[y][self.best[y]];
        let initial = |y: usize| {
            let d = rule_of(y);
            d.rule == Rule::Lex
                || (matches!(d.rule, Rule::R1 | Rule::R2) && !self.items[y].is_pure() && self.items[y].sigma.len() == 1
                    && d.children.iter().any(|&c| self.items[c].unsaturated()))
        };
        let partial = |y: usize| matches!(rule_of(y).rule, Rule::R7 | Rule::R10);
        let mut height: HashMap<usize, usize> = HashMap::new();
        let mut by_measure = nodes.clone();
        by_measure.sort_by_key(|&y| (self.items[y].measure(), y));
        for &y in &by_measure {
            let below = rule_of(y).children.iter().map(|c| height.get(c).copied().unwrap_or(0)).max().unwrap_or(0);
            let h = if initial(y) {
                0
            } else if partial(y) {
                below
            } else {
                below + 1
            };
            height.insert(y, h);
        }
        let line = |y: usize| format!("{}  {}", self.items[y], env.display(&self.denotations[y]));
        let mut out = String::new();
        let mut firsts: Vec<usize> = nodes.iter().copied().filter(|&y| initial(y)).collect();
        firsts.sort_by(|&a, &b| self.items[a].cmp(&self.items[b]));
        for y in firsts {
            let d = rule_of(y);
            let how = match &d.leaf {
                Some(l) => l.word.clone(),
                None => d.rule.to_string(),
            };
            let _ = writeln!(out, "     {}  ({how})", line(y));
        }
        let mut steps: Vec<usize> = nodes.iter().copied().filter(|&y| !initial(y) && !partial(y)).collect();
        steps.sort_by(|&a, &b| (height[&a], &self.items[a]).cmp(&(height[&b], &self.items[b])));
        let mut shown: BTreeSet<usize> = BTreeSet::new();
        for (k, &y) in steps.iter().enumerate() {
            for &c in &rule_of(y).children {
                if partial(c) && shown.insert(c) {
                    let _ = writeln!(out, "         {:<4} {}", rule_of(c).rule.name(), line(c));
                }
            }
            let _ = writeln!(out, "({:>2}) {:<4} {}", k + 1, rule_of(y).rule.name(), line(y));
        }
        out
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
                delta: it.delta.iter().map(|c| c.to_string()).collect(),
                sigma: it.sigma.iter().map(|c| DumpComponent { a: c.a, b: c.b, cat: c.cat.to_string() }).collect(),
                cat: it.current().to_string(),
                denotation: dump_relation(&self.denotations[id], env),
                score: self.scores[id],
            })
            .collect();
        let mut derivations = Vec::new();
        for (parent, ds) in self.derivations.iter().enumerate() {
            for d in ds {
                let mut children = d.children.clone();
                // witnesses follow the real antecedents so the dump stays
                // within the {parent, rule, children} schema
                children.extend(d.witness);
                derivations.push(DumpDerivation {
                    parent,
                    rule: d.rule.name().to_string(),
                    children,
                    word: d.leaf.as_ref().map(|l| l.word.clone()),
                });
            }
        }
        ForestDump { items, derivations }
    }
}

fn is_np(c: &Category) -> bool {
    matches!(c, Category::Atom(Base::NP, _))
}

/// Quantifier projection of a pending item's denotation, after closed-world
/// completion over the restrictor and the full entity domain.
///
/// The shape follows the current category: sentence-final categories keep
/// their truth field (or stay evidence-style), `NP\NP`-style modifiers keep
/// their copied host field, anything else is projected to its entities.
pub fn quantify(
    q: &QuantifierFn,
    d: &Relation,
    restrictor: Option<&Relation>,
    cur: &Category,
    env: &Environment,
) -> Result<Relation, String> {
    let restrictor = restrictor.ok_or("quantifier without a restrictor")?;
    let fields = cur.fields().map_err(|e| e.to_string())?;
    let w = fields.len();
    let s_final = matches!(cur.final_result(), Category::Atom(Base::S, _));
    let modifier = matches!(cur.as_functor(), Some((r, a, _)) if is_np(r) && is_np(a));
    let (host_fields, copy, mode) = if s_final && d.arity() == w + 1 {
        (&fields[..w - 1], false, QuantMode::Truth)
    } else if s_final && d.arity() == w {
        (&fields[..w - 1], false, QuantMode::Entity { copy: false })
    } else if modifier && d.arity() == w + 1 {
        (&fields[..w - 1], true, QuantMode::Entity { copy: true })
    } else if !s_final && d.arity() == w + 1 {
        (&fields[..], false, QuantMode::Entity { copy: false })
    } else {
        return Err(format!("denotation of arity {} does not fit `{cur}`", d.arity()));
    };
    let entities = env.entity_values();
    let hosts: Vec<Vec<Value>> = host_fields
        .iter()
        .map(|k| match k {
            FieldKind::Entity => entities.clone(),
            FieldKind::Truth => vec![Value::Truth(false), Value::Truth(true)],
        })
        .collect();
    let out_arity = match mode {
        QuantMode::Truth => hosts.len() + 1,
        QuantMode::Entity { copy } => hosts.len() + usize::from(copy),
    };
    let mut out = if restrictor.is_empty() {
        // no restrictor entities: every host sees q(0, 0)
        let t = q.eval(0, 0);
        let mut r = Relation::empty(out_arity);
        for h in host_tuples(&hosts) {
            let mut row = h.clone();
            match mode {
                QuantMode::Truth => row.push(Value::Truth(t)),
                QuantMode::Entity { copy } => {
                    if !t {
                        continue;
                    }
                    if copy {
                        row.push(*h.last().expect("copy shape has a host"));
                    }
                }
            }
            r.insert(row).map_err(|e| e.to_string())?;
        }
        r
    } else {
        let total = totalize(d, restrictor, &hosts, copy).map_err(|e| e.to_string())?;
        quant_project(q, &total, mode).map_err(|e| e.to_string())?
    };
    if out.is_empty() && out.arity() != out_arity {
        out = Relation::empty(out_arity);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::parse_category;

    fn cat(s: &str) -> Category {
        parse_category(s).unwrap()
    }

    fn quant_item(i: usize, j: usize, q: &str) -> ExtItem {
        let np = format!("NP_{q}");
        ExtItem {
            i,
            j,
            delta: vec![cat(&format!("X\\{np}")), cat(&format!("{np}\\{np}")), cat(&np)],
            sigma: vec![Comp { a: i, b: j, cat: cat(&format!("{np}/NP_e")) }],
        }
    }

    #[test]
    fn anchor_saturation_then_discharge() {
        let one = quant_item(1, 2, "some");
        assert!(one.unsaturated());
        let orange = ExtItem::pure(2, 3, cat("NP_e"));
        let sat = saturate_anchor(&one, &orange, Direction::Forward).unwrap();
        assert_eq!(sat.to_string(), "[1,3, X\\NP_some . NP_some\\NP_some . NP_some, <1,3,NP_some>]");
        assert!(sat.ready() && !sat.unsaturated());
        let (rule, d) = discharge_empty(&sat).unwrap();
        assert_eq!(rule, Rule::R6);
        assert_eq!(d.delta, vec![cat("X\\NP_some"), cat("NP_some")]);
        assert!(discharge_empty(&d).is_none());
        // bound NPs never feed plain application
        let the = ExtItem::pure(0, 1, cat("NP/NP"));
        assert!(attach_existing(&the, &sat, Direction::Forward).is_none());
    }

    #[test]
    fn fresh_attachment_binds_body() {
        let verb = ExtItem::pure(0, 1, cat("S\\NP_q/NP_q'"));
        let arg = ExtItem {
            i: 1,
            j: 3,
            delta: vec![cat("X\\NP_some"), cat("NP_some")],
            sigma: vec![Comp { a: 1, b: 3, cat: cat("NP_some") }],
        };
        let (item, retain) = attach_fresh(&verb, &arg, Direction::Forward).unwrap();
        assert!(retain);
        assert_eq!(item.to_string(), "[0,3, S\\NP_q, <0,1,S\\NP_q/NP_some> . <1,3,NP_some>]");
        assert_eq!(item.pending(), Some("some"));
        // the verb must sit on the side its slash looks at
        assert!(attach_fresh(&verb, &arg, Direction::Backward).is_none());

        let (done, q) = apply_quantifier(&item).unwrap();
        assert_eq!(q, "some");
        assert_eq!(done.to_string(), "[0,3, S\\NP_q, <0,1,S\\NP_q/NP_e> . <1,3,NP_e>]");
        let merged = combine_components(&done).unwrap();
        assert!(merged.is_pure());
        assert_eq!(merged.current(), &cat("S\\NP_q"));
    }

    #[test]
    fn conjunction_rules() {
        let and = ExtItem::pure(1, 2, cat("Conj"));
        let left = ExtItem::pure(0, 1, cat("NP"));
        let right = ExtItem::pure(2, 3, cat("NP"));
        let primed = consume_conj(&and, &right, ConjOp::And).unwrap();
        assert_eq!(primed.current().to_string(), "Conj'and(NP)");
        let r8 = skip_left(&left, &primed).unwrap();
        assert_eq!(r8.to_string(), "[0,3, NP, <2,3,NP>]");
        let r9 = skip_right(&left, &primed).unwrap();
        assert_eq!(r9.to_string(), "[0,3, NP, <0,1,NP>]");
        let r10 = attach_conj(&r8, &and, ConjOp::And).unwrap();
        assert_eq!(r10.to_string(), "[0,3, NP, <1,3,Conj'and(NP)>]");
        // a conjunction outside the item is not attached
        assert!(attach_conj(&right, &and, ConjOp::And).is_none());
        let (whole, op) = reassemble(&r9, &r10).unwrap();
        assert_eq!(op, ConjOp::And);
        assert!(whole.is_pure());
        assert!(reassemble(&r10, &r9).is_none());
    }

    #[test]
    fn reassembly_needs_identical_prefix() {
        let a = ExtItem {
            i: 0,
            j: 4,
            delta: vec![cat("S\\NP")],
            sigma: vec![Comp { a: 0, b: 1, cat: cat("S\\NP/NP_e") }, Comp { a: 1, b: 2, cat: cat("NP_e") }],
        };
        let b = ExtItem {
            i: 0,
            j: 4,
            delta: vec![cat("S\\NP")],
            sigma: vec![
                Comp { a: 0, b: 2, cat: cat("S\\NP/NP_e") },
                Comp { a: 2, b: 4, cat: Category::ConjPrime(ConjOp::And, Box::new(cat("NP_e"))) },
            ],
        };
        assert!(reassemble(&a, &b).is_none());
    }

    #[test]
    fn measure_increases_under_unary_rules() {
        let sat = saturate_anchor(&quant_item(1, 2, "no"), &ExtItem::pure(2, 3, cat("NP")), Direction::Forward)
            .unwrap();
        let (_, d) = discharge_empty(&sat).unwrap();
        assert!(d.measure() > sat.measure());
    }
}
