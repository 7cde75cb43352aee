//! Finite relations over entities and truth values, and the operations the
//! parsers compose them with: prefix join, projection, quantifier
//! projection and truth-functional conjunction.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::category::ConjOp;

/// Index of an entity in its environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Entity(EntityId),
    Truth(bool),
}

impl Value {
    pub fn is_truth(self) -> bool {
        matches!(self, Value::Truth(_))
    }

    pub fn truth(self) -> Option<bool> {
        match self {
            Value::Truth(t) => Some(t),
            Value::Entity(_) => None,
        }
    }
}

pub type Tuple = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("tuple of width {got} in a relation of arity {expected}")]
    Arity { expected: usize, got: usize },
    #[error("cannot project a relation of arity {arity} by {by} fields")]
    Project { arity: usize, by: usize },
    #[error("operands have arities {0} and {1}")]
    Mismatch(usize, usize),
    #[error("quantifier projection needs arity at least 2, got {0}")]
    QuantArity(usize),
    #[error("final field is not a truth value")]
    NotTruth,
    #[error("unknown quantifier `{0}`")]
    UnknownQuantifier(String),
}

/// A set of uniform-width tuples.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    arity: usize,
    tuples: BTreeSet<Tuple>,
}

impl Relation {
    pub fn empty(arity: usize) -> Relation {
        Relation { arity, tuples: BTreeSet::new() }
    }

    /// `{⟨⟩}`, the identity of [`join`].
    pub fn unit() -> Relation {
        let mut tuples = BTreeSet::new();
        tuples.insert(Vec::new());
        Relation { arity: 0, tuples }
    }

    pub fn from_tuples<I>(arity: usize, tuples: I) -> Result<Relation, RelationError>
    where
        I: IntoIterator<Item = Tuple>,
    {
        let mut r = Relation::empty(arity);
        for t in tuples {
            r.insert(t)?;
        }
        Ok(r)
    }

    pub fn insert(&mut self, t: Tuple) -> Result<bool, RelationError> {
        if t.len() != self.arity {
            return Err(RelationError::Arity { expected: self.arity, got: t.len() });
        }
        Ok(self.tuples.insert(t))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.tuples.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> + '_ {
        self.tuples.iter()
    }

    /// True when every tuple ends in a truth value (vacuously false when
    /// empty or of arity 0).
    pub fn is_truth_annotated(&self) -> bool {
        self.arity > 0
            && !self.tuples.is_empty()
            && self.tuples.iter().all(|t| t[self.arity - 1].is_truth())
    }

    pub fn union(&self, other: &Relation) -> Result<Relation, RelationError> {
        if self.arity != other.arity {
            return Err(RelationError::Mismatch(self.arity, other.arity));
        }
        count_ops(self.len() + other.len());
        let mut tuples = self.tuples.clone();
        tuples.extend(other.tuples.iter().cloned());
        Ok(Relation { arity: self.arity, tuples })
    }

    /// In-place union; arities must agree.
    pub fn extend_from(&mut self, other: &Relation) -> Result<(), RelationError> {
        if self.arity != other.arity {
            return Err(RelationError::Mismatch(self.arity, other.arity));
        }
        count_ops(other.len());
        self.tuples.extend(other.tuples.iter().cloned());
        Ok(())
    }

    /// Values appearing in field `i`.
    pub fn column(&self, i: usize) -> BTreeSet<Value> {
        self.tuples.iter().map(|t| t[i]).collect()
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.arity == other.arity && self.tuples.is_subset(&other.tuples)
    }
}

impl FromIterator<Tuple> for Relation {
    /// Panics on mixed widths; the arity is taken from the first tuple.
    fn from_iter<I: IntoIterator<Item = Tuple>>(iter: I) -> Self {
        let tuples: BTreeSet<Tuple> = iter.into_iter().collect();
        let arity = tuples.iter().next().map_or(0, |t| t.len());
        assert!(tuples.iter().all(|t| t.len() == arity), "mixed tuple widths");
        Relation { arity, tuples }
    }
}

// ---------------------------------------------------------------------------
// Operation counter

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

fn count_ops(n: usize) {
    OPS.with(|c| c.set(c.get() + n as u64));
}

/// Tuple visits performed by relation operations on this thread.
pub fn op_count() -> u64 {
    OPS.with(|c| c.get())
}

pub fn reset_op_count() {
    OPS.with(|c| c.set(0));
}

// ---------------------------------------------------------------------------
// Algebra

/// Natural join on shared leading fields: tuples of the wider operand whose
/// prefix is a tuple of the narrower one.
pub fn join(a: &Relation, b: &Relation) -> Relation {
    let (long, short) = if a.arity >= b.arity { (a, b) } else { (b, a) };
    count_ops(long.len() + short.len());
    let k = short.arity;
    let tuples = long
        .tuples
        .iter()
        .filter(|t| short.tuples.contains(&t[..k]))
        .cloned()
        .collect();
    Relation { arity: long.arity, tuples }
}

/// Removes the first field of every tuple.
pub fn project(a: &Relation) -> Result<Relation, RelationError> {
    project_n(a, 1)
}

/// Removes the first `n` fields of every tuple.
pub fn project_n(a: &Relation, n: usize) -> Result<Relation, RelationError> {
    if a.arity < n {
        return Err(RelationError::Project { arity: a.arity, by: n });
    }
    count_ops(a.len());
    let tuples = a.tuples.iter().map(|t| t[n..].to_vec()).collect();
    Ok(Relation { arity: a.arity - n, tuples })
}

// ---------------------------------------------------------------------------
// Quantifiers

/// A generalized quantifier stored by name and evaluated on cardinalities:
/// restrictor size and size of the restrictor/body intersection.
#[derive(Clone, Copy, Debug)]
pub struct QuantifierFn {
    pub name: &'static str,
    pub predicate: fn(usize, usize) -> bool,
}

impl QuantifierFn {
    pub fn eval(&self, restrictor: usize, body: usize) -> bool {
        (self.predicate)(restrictor, body)
    }
}

impl PartialEq for QuantifierFn {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

pub const BUILTIN_QUANTIFIERS: [QuantifierFn; 6] = [
    QuantifierFn { name: "some", predicate: |_, s| s >= 1 },
    QuantifierFn { name: "no", predicate: |_, s| s == 0 },
    QuantifierFn { name: "all", predicate: |r, s| s == r },
    QuantifierFn { name: "exactly_one", predicate: |_, s| s == 1 },
    QuantifierFn { name: "exactly_two", predicate: |_, s| s == 2 },
    QuantifierFn { name: "most", predicate: |r, s| 2 * s > r },
];

/// Named quantifier functions available to a lexicon.
#[derive(Clone, Debug)]
pub struct QuantifierRegistry {
    fns: BTreeMap<String, QuantifierFn>,
}

impl Default for QuantifierRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl QuantifierRegistry {
    pub fn builtin() -> Self {
        let fns = BUILTIN_QUANTIFIERS.iter().map(|q| (q.name.to_string(), *q)).collect();
        QuantifierRegistry { fns }
    }

    pub fn register(&mut self, q: QuantifierFn) {
        self.fns.insert(q.name.to_string(), q);
    }

    pub fn get(&self, name: &str) -> Result<&QuantifierFn, RelationError> {
        self.fns.get(name).ok_or_else(|| RelationError::UnknownQuantifier(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fns.keys().map(String::as_str)
    }
}

/// `q(nR, nS)`.
pub fn eval_quantifier(q: &QuantifierFn, n_restrictor: usize, n_body: usize) -> bool {
    q.eval(n_restrictor, n_body)
}

/// Output shape of [`quant_project`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantMode {
    /// Emit `⟨e2…, t⟩` for every host group.
    Truth,
    /// Emit the host tuple when the quantifier holds. With `copy`, the last
    /// host field is repeated to restore `⟨host, host⟩` modifier shape.
    Entity { copy: bool },
}

/// Quantifier projection. Field 1 is the restrictor entity; tuples are
/// grouped by the remaining fields (minus a trailing truth field when
/// present), and `q` is evaluated on the group size against the number of
/// members whose body is true. Evidence-style input (no truth field)
/// counts every member as true.
pub fn quant_project(
    q: &QuantifierFn,
    a: &Relation,
    mode: QuantMode,
) -> Result<Relation, RelationError> {
    if a.arity < 2 {
        return Err(RelationError::QuantArity(a.arity));
    }
    let annotated = a.is_truth_annotated();
    if mode == QuantMode::Truth && !annotated && !a.is_empty() {
        return Err(RelationError::NotTruth);
    }
    count_ops(a.len());
    let key_end = if annotated { a.arity - 1 } else { a.arity };
    let mut groups: BTreeMap<&[Value], (usize, usize)> = BTreeMap::new();
    for t in a.iter() {
        let g = groups.entry(&t[1..key_end]).or_insert((0, 0));
        g.0 += 1;
        if !annotated || t[key_end] == Value::Truth(true) {
            g.1 += 1;
        }
    }
    let out_arity = match mode {
        QuantMode::Truth => key_end,
        QuantMode::Entity { copy } => key_end - 1 + usize::from(copy && annotated),
    };
    let mut out = Relation::empty(out_arity);
    for (key, (nr, ns)) in groups {
        let t = q.eval(nr, ns);
        match mode {
            QuantMode::Truth => {
                let mut row = key.to_vec();
                row.push(Value::Truth(t));
                out.tuples.insert(row);
            }
            QuantMode::Entity { copy } => {
                if t {
                    let mut row = key.to_vec();
                    if copy && annotated {
                        if let Some(&last) = key.last() {
                            row.push(last);
                        }
                    }
                    out.tuples.insert(row);
                }
            }
        }
    }
    Ok(out)
}

/// Combines two conjuncts of equal arity. Truth-annotated operands are
/// combined pointwise on their shared key fields (a key missing from one
/// side counts as false there); otherwise `and` intersects and `or` unions.
pub fn conj_combine(op: ConjOp, a: &Relation, b: &Relation) -> Result<Relation, RelationError> {
    if a.arity != b.arity {
        return Err(RelationError::Mismatch(a.arity, b.arity));
    }
    if a.is_truth_annotated() && b.is_truth_annotated() {
        count_ops(a.len() + b.len());
        let k = a.arity - 1;
        let values = |r: &Relation| {
            let mut m: BTreeMap<Vec<Value>, BTreeSet<bool>> = BTreeMap::new();
            for t in r.iter() {
                m.entry(t[..k].to_vec()).or_default().insert(t[k] == Value::Truth(true));
            }
            m
        };
        let (va, vb) = (values(a), values(b));
        let keys: BTreeSet<&Vec<Value>> = va.keys().chain(vb.keys()).collect();
        let absent: BTreeSet<bool> = [false].into();
        let mut out = Relation::empty(a.arity);
        for key in keys {
            let ta = va.get(key).unwrap_or(&absent);
            let tb = vb.get(key).unwrap_or(&absent);
            for &x in ta {
                for &y in tb {
                    let mut row = key.clone();
                    row.push(Value::Truth(op.eval(x, y)));
                    out.tuples.insert(row);
                }
            }
        }
        return Ok(out);
    }
    match op {
        ConjOp::And => Ok(join(a, b)),
        ConjOp::Or => a.union(b),
    }
}

/// Union of two denotations of one constituent. When one side is
/// truth-annotated and the other is its evidence form (one field shorter),
/// the annotated side is reduced to evidence first.
pub fn merge(a: &Relation, b: &Relation) -> Result<Relation, RelationError> {
    if a.arity == b.arity {
        return a.union(b);
    }
    let (wide, narrow) = if a.arity > b.arity { (a, b) } else { (b, a) };
    if wide.arity != narrow.arity + 1 {
        return Err(RelationError::Mismatch(a.arity, b.arity));
    }
    let k = narrow.arity;
    let mut out = narrow.clone();
    for t in wide.iter() {
        match t[k] {
            Value::Truth(true) => {
                out.tuples.insert(t[..k].to_vec());
            }
            Value::Truth(false) => {}
            Value::Entity(_) => return Err(RelationError::Mismatch(a.arity, b.arity)),
        }
    }
    Ok(out)
}

/// Renders a relation with entity names supplied by `name`.
pub struct RelationDisplay<'a, F: Fn(EntityId) -> &'a str> {
    pub relation: &'a Relation,
    pub name: F,
}

impl<'a, F: Fn(EntityId) -> &'a str> fmt::Display for RelationDisplay<'a, F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, t) in self.relation.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            let vals: Vec<String> = t.iter().map(|v| value_text(*v, &self.name)).collect();
            if t.len() == 1 {
                write!(f, "{}", vals[0])?;
            } else {
                write!(f, "({})", vals.join(","))?;
            }
        }
        write!(f, "}}")
    }
}

pub(crate) fn value_text<'a>(v: Value, name: &impl Fn(EntityId) -> &'a str) -> String {
    match v {
        Value::Entity(e) => name(e).to_string(),
        Value::Truth(true) => "true".into(),
        Value::Truth(false) => "false".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: u32) -> Value {
        Value::Entity(EntityId(i))
    }
    const T: Value = Value::Truth(true);
    const F: Value = Value::Truth(false);

    fn rel(rows: &[&[Value]]) -> Relation {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    fn quant(name: &str) -> QuantifierFn {
        *QuantifierRegistry::builtin().get(name).unwrap()
    }

    // b1=0 l1=1 l2=2 m1=3 b2=4
    #[test]
    fn join_matches_prefix() {
        let inn = rel(&[&[e(0), e(1), e(1)], &[e(3), e(2), e(2)]]);
        let bins = rel(&[&[e(0)], &[e(4)]]);
        assert_eq!(join(&inn, &bins), rel(&[&[e(0), e(1), e(1)]]));
        assert_eq!(join(&bins, &inn), rel(&[&[e(0), e(1), e(1)]]));
        assert_eq!(join(&inn, &Relation::unit()), inn);
        let disjoint = join(&rel(&[&[e(0), T]]), &rel(&[&[e(1)]]));
        assert!(disjoint.is_empty());
        assert_eq!(disjoint.arity(), 2);
        assert!(join(&inn, &Relation::empty(1)).is_empty());
    }

    #[test]
    fn projection() {
        let a = rel(&[&[e(0), e(1), e(1)]]);
        assert_eq!(project(&a).unwrap(), rel(&[&[e(1), e(1)]]));
        assert!(project(&Relation::empty(2)).unwrap().is_empty());
        assert_eq!(project(&Relation::empty(2)).unwrap().arity(), 1);
        assert_eq!(project(&rel(&[&[e(0), e(5)], &[e(1), e(5)]])).unwrap(), rel(&[&[e(5)]]));
        assert!(project(&Relation::unit()).is_err());
        assert_eq!(project_n(&a, 2).unwrap(), rel(&[&[e(1)]]));
    }

    #[test]
    fn quantifier_table() {
        assert!(eval_quantifier(&quant("some"), 4, 1));
        assert!(eval_quantifier(&quant("no"), 3, 0));
        assert!(!eval_quantifier(&quant("exactly_one"), 4, 2));
        assert!(eval_quantifier(&quant("all"), 2, 2));
        assert!(!eval_quantifier(&quant("all"), 3, 2));
        assert!(eval_quantifier(&quant("exactly_two"), 5, 2));
        assert!(eval_quantifier(&quant("most"), 3, 2));
        assert!(!eval_quantifier(&quant("most"), 4, 2));
        assert!(QuantifierRegistry::builtin().get("several").is_err());
    }

    // o1=0 x1=10 l2=2 l3=3 x3=12
    #[test]
    fn quant_project_evidence() {
        let some = quant("some");
        let a = rel(&[&[e(0), e(10)]]);
        let out = quant_project(&some, &a, QuantMode::Entity { copy: false }).unwrap();
        assert_eq!(out, rel(&[&[e(10)]]));
        let a = rel(&[&[e(2), e(10)], &[e(3), e(12)]]);
        let out = quant_project(&some, &a, QuantMode::Entity { copy: false }).unwrap();
        assert_eq!(out, rel(&[&[e(10)], &[e(12)]]));
    }

    #[test]
    fn quant_project_truth_mode() {
        // restrictor {0,1}, hosts {5,6}: 5 has both, 6 has one
        let a = rel(&[&[e(0), e(5), T], &[e(1), e(5), T], &[e(0), e(6), T], &[e(1), e(6), F]]);
        let all = quant("all");
        let out = quant_project(&all, &a, QuantMode::Truth).unwrap();
        assert_eq!(out, rel(&[&[e(5), T], &[e(6), F]]));
        let out = quant_project(&all, &a, QuantMode::Entity { copy: true }).unwrap();
        assert_eq!(out, rel(&[&[e(5), e(5)]]));
        assert_eq!(
            quant_project(&all, &rel(&[&[e(0), e(5)]]), QuantMode::Truth),
            Err(RelationError::NotTruth)
        );
        assert_eq!(
            quant_project(&all, &rel(&[&[e(0)]]), QuantMode::Truth),
            Err(RelationError::QuantArity(1))
        );
    }

    #[test]
    fn conjunction() {
        let and = conj_combine(ConjOp::And, &rel(&[&[e(10)]]), &rel(&[&[e(10)], &[e(12)]]));
        assert_eq!(and.unwrap(), rel(&[&[e(10)]]));
        let or = conj_combine(ConjOp::Or, &Relation::empty(1), &rel(&[&[e(0)]]));
        assert_eq!(or.unwrap(), rel(&[&[e(0)]]));
        let a = rel(&[&[e(0), T], &[e(1), F]]);
        let b = rel(&[&[e(0), T], &[e(1), T]]);
        assert_eq!(conj_combine(ConjOp::And, &a, &b).unwrap(), rel(&[&[e(0), T], &[e(1), F]]));
        assert_eq!(conj_combine(ConjOp::Or, &a, &b).unwrap(), rel(&[&[e(0), T], &[e(1), T]]));
        assert!(conj_combine(ConjOp::And, &a, &rel(&[&[e(0)]])).is_err());
    }

    #[test]
    fn op_counter_tracks_visits() {
        reset_op_count();
        let a = rel(&[&[e(0)], &[e(1)]]);
        let _ = join(&a, &a);
        assert_eq!(op_count(), 4);
    }
}
