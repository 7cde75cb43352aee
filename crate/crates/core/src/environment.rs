//! The entity universe and named lexical relations a parse is interpreted
//! against, plus worst-case denotations and closed-world totalization.
//!
//! File format (`#` starts a comment):
//!
//! ```text
//! entity l1 l2 l3 b1
//! relation lemon : NP { (l1)(l2)(l3) }
//! relation in : NP\NP/NP { (b1,l1,l1) }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::category::{parse_category, Base, Category, CategoryError, FieldKind};
use crate::denotation::{EntityId, Relation, RelationDisplay, Tuple, Value};

pub const DEFAULT_ARITY_LIMIT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvErrorKind {
    #[error("undeclared entity `{0}`")]
    UndeclaredEntity(String),
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("invalid entity id `{0}`")]
    BadEntityId(String),
    #[error("tuple has {got} fields but `{category}` needs {expected}")]
    ArityMismatch { category: String, expected: String, got: usize },
    #[error("tuples of different widths in one relation")]
    MixedArity,
    #[error("truth literal in entity position {0}")]
    TruthInEntityPosition(usize),
    #[error("entity `{0}` in truth position")]
    EntityInTruthPosition(String),
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("{0}")]
    Category(#[from] CategoryError),
    #[error("{0}")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct EnvError {
    pub line: usize,
    pub col: usize,
    pub kind: EnvErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("category `{0}` has arity {1}, above the limit of {2}")]
    ArityLimit(String, usize, usize),
    #[error("no identity relation for category `{0}`")]
    UnsupportedIdentity(String),
    #[error("{0}")]
    Category(#[from] CategoryError),
    #[error("evidence relation of arity {got} does not fit {hosts} host fields")]
    FieldCount { got: usize, hosts: usize },
}

/// Entities plus lexical relations keyed by `(name, category)`.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    entities: Vec<String>,
    index: HashMap<String, EntityId>,
    relations: BTreeMap<(String, Category), Relation>,
    arity_limit: usize,
}

impl Environment {
    pub fn new() -> Self {
        Environment { arity_limit: DEFAULT_ARITY_LIMIT, ..Default::default() }
    }

    pub fn with_arity_limit(mut self, limit: usize) -> Self {
        self.arity_limit = limit;
        self
    }

    pub fn arity_limit(&self) -> usize {
        self.arity_limit
    }

    pub fn add_entity(&mut self, id: &str) -> Result<EntityId, EnvErrorKind> {
        if !valid_entity_id(id) {
            return Err(EnvErrorKind::BadEntityId(id.to_string()));
        }
        if self.index.contains_key(id) {
            return Err(EnvErrorKind::DuplicateEntity(id.to_string()));
        }
        let e = EntityId(self.entities.len() as u32);
        self.entities.push(id.to_string());
        self.index.insert(id.to_string(), e);
        Ok(e)
    }

    /// Adds a relation after checking it against the category's field layout.
    pub fn add_relation(
        &mut self,
        name: &str,
        category: Category,
        relation: Relation,
    ) -> Result<(), EnvErrorKind> {
        for t in relation.iter() {
            check_tuple(self, &category, t)?;
        }
        let key = (name.to_string(), category);
        if self.relations.contains_key(&key) {
            return Err(EnvErrorKind::DuplicateRelation(name.to_string()));
        }
        self.relations.insert(key, relation);
        Ok(())
    }

    pub fn entity(&self, id: &str) -> Option<EntityId> {
        self.index.get(id).copied()
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entities[e.0 as usize]
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn entity_values(&self) -> Vec<Value> {
        self.entities().map(Value::Entity).collect()
    }

    pub fn relation(&self, name: &str, category: &Category) -> Option<&Relation> {
        self.relations.get(&(name.to_string(), category.clone()))
    }

    /// All relations registered under `name`.
    pub fn relations_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = (&'a Category, &'a Relation)> + 'a {
        self.relations.iter().filter(move |((n, _), _)| n == name).map(|((_, c), r)| (c, r))
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Category, &Relation)> {
        self.relations.iter().map(|((n, c), r)| (n.as_str(), c, r))
    }

    pub fn display<'a>(&'a self, r: &'a Relation) -> impl fmt::Display + 'a {
        RelationDisplay { relation: r, name: move |e| self.entity_name(e) }
    }

    pub fn value_text(&self, v: Value) -> String {
        crate::denotation::value_text(v, &|e| self.entity_name(e))
    }

    /// Parses a value literal: an entity id or `true`/`false`.
    pub fn parse_value(&self, s: &str) -> Option<Value> {
        match s {
            "true" => Some(Value::Truth(true)),
            "false" => Some(Value::Truth(false)),
            _ => self.entity(s).map(Value::Entity),
        }
    }

    /// Relation fits within the category's worst-case denotation, either
    /// truth-annotated or with the final truth field dropped.
    pub fn fits(&self, category: &Category, r: &Relation) -> bool {
        r.iter().all(|t| check_tuple(self, category, t).is_ok())
    }
}

fn valid_entity_id(id: &str) -> bool {
    !id.is_empty()
        && id != "true"
        && id != "false"
        && !id.chars().any(|c| c.is_whitespace() || matches!(c, ',' | '(' | ')' | '{' | '}' | '#'))
}

/// Field kinds a stored tuple may use: the full layout, or the layout minus
/// a final truth field (evidence style).
pub fn admissible_layouts(category: &Category) -> Result<Vec<Vec<FieldKind>>, CategoryError> {
    let full = category.fields()?;
    let mut out = vec![full.clone()];
    if full.last() == Some(&FieldKind::Truth) {
        out.push(full[..full.len() - 1].to_vec());
    }
    Ok(out)
}

fn check_tuple(env: &Environment, category: &Category, t: &Tuple) -> Result<(), EnvErrorKind> {
    let layouts = admissible_layouts(category)?;
    let Some(layout) = layouts.iter().find(|l| l.len() == t.len()) else {
        let expected = layouts.iter().map(|l| l.len().to_string()).collect::<Vec<_>>().join(" or ");
        return Err(EnvErrorKind::ArityMismatch {
            category: category.to_string(),
            expected,
            got: t.len(),
        });
    };
    for (pos, (kind, v)) in layout.iter().zip(t).enumerate() {
        match (kind, v) {
            (FieldKind::Entity, Value::Truth(_)) => {
                return Err(EnvErrorKind::TruthInEntityPosition(pos + 1))
            }
            (FieldKind::Truth, Value::Entity(e)) => {
                return Err(EnvErrorKind::EntityInTruthPosition(env.entity_name(*e).to_string()))
            }
            (FieldKind::Entity, Value::Entity(e)) if e.0 as usize >= env.entity_count() => {
                return Err(EnvErrorKind::UndeclaredEntity(format!("#{}", e.0)))
            }
            _ => {}
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Loading

struct Scanner<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, kind: EnvErrorKind) -> EnvError {
        EnvError { line: self.line, col: self.col, kind }
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    /// Skips spaces and comments, stopping at a newline.
    fn skip_inline(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => self.skip_comment(),
                _ => break,
            }
        }
    }

    fn skip_all(&mut self) {
        loop {
            self.skip_inline();
            if self.peek() == Some('\n') {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || matches!(c, ',' | '(' | ')' | '{' | '}' | ':' | '#') {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn expect(&mut self, want: char) -> Result<(), EnvError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.err(EnvErrorKind::Syntax(format!("expected `{want}`, found `{c}`")))),
            None => Err(self.err(EnvErrorKind::Syntax(format!("expected `{want}`, found end of input")))),
        }
    }
}

/// Parses and validates an environment file.
pub fn load_environment(text: &str) -> Result<Environment, EnvError> {
    let mut env = Environment::new();
    let mut s = Scanner::new(text);
    loop {
        s.skip_all();
        if s.peek().is_none() {
            return Ok(env);
        }
        let (line, col) = (s.line, s.col);
        let kw = s.word();
        match kw.as_str() {
            "entity" => {
                s.skip_inline();
                if matches!(s.peek(), None | Some('\n')) {
                    return Err(s.err(EnvErrorKind::Syntax("`entity` needs at least one id".into())));
                }
                while !matches!(s.peek(), None | Some('\n')) {
                    let (l, c) = (s.line, s.col);
                    let id = s.word();
                    if id.is_empty() {
                        let ch = s.peek().unwrap_or(' ');
                        return Err(EnvError {
                            line: l,
                            col: c,
                            kind: EnvErrorKind::BadEntityId(ch.to_string()),
                        });
                    }
                    env.add_entity(&id).map_err(|kind| EnvError { line: l, col: c, kind })?;
                    s.skip_inline();
                }
            }
            "relation" => load_relation(&mut s, &mut env)?,
            "" => {
                let c = s.peek().unwrap_or(' ');
                return Err(s.err(EnvErrorKind::Syntax(format!("unexpected `{c}`"))));
            }
            other => {
                return Err(EnvError {
                    line,
                    col,
                    kind: EnvErrorKind::Syntax(format!("unknown statement `{other}`")),
                })
            }
        }
    }
}

fn load_relation(s: &mut Scanner<'_>, env: &mut Environment) -> Result<(), EnvError> {
    s.skip_inline();
    let (name_line, name_col) = (s.line, s.col);
    let name = s.word();
    if name.is_empty() {
        return Err(s.err(EnvErrorKind::Syntax("expected relation name".into())));
    }
    s.skip_inline();
    s.expect(':')?;
    s.skip_inline();
    let (cat_line, cat_col) = (s.line, s.col);
    let mut cat_text = String::new();
    while let Some(c) = s.peek() {
        if c == '{' || c == '\n' || c == '#' {
            break;
        }
        cat_text.push(c);
        s.bump();
    }
    let category = parse_category(cat_text.trim()).map_err(|e| {
        let col = match &e {
            CategoryError::Syntax { col, .. } => cat_col + col - 1,
            _ => cat_col,
        };
        EnvError { line: cat_line, col, kind: e.into() }
    })?;
    if category.has_structural_vars() {
        return Err(EnvError {
            line: cat_line,
            col: cat_col,
            kind: CategoryError::HasVariables(category.to_string()).into(),
        });
    }
    s.expect('{')?;
    let mut tuples: Vec<(usize, usize, Tuple)> = Vec::new();
    loop {
        s.skip_all();
        match s.peek() {
            Some('}') => {
                s.bump();
                break;
            }
            Some('(') => {
                let (l, c) = (s.line, s.col);
                s.bump();
                let mut tuple = Vec::new();
                loop {
                    s.skip_all();
                    if s.peek() == Some(')') && tuple.is_empty() {
                        s.bump();
                        break;
                    }
                    let (vl, vc) = (s.line, s.col);
                    let lit = s.word();
                    if lit.is_empty() {
                        return Err(s.err(EnvErrorKind::Syntax("expected a value".into())));
                    }
                    let v = env.parse_value(&lit).ok_or(EnvError {
                        line: vl,
                        col: vc,
                        kind: EnvErrorKind::UndeclaredEntity(lit.clone()),
                    })?;
                    tuple.push(v);
                    s.skip_all();
                    match s.peek() {
                        Some(',') => {
                            s.bump();
                        }
                        Some(')') => {
                            s.bump();
                            break;
                        }
                        _ => return Err(s.err(EnvErrorKind::Syntax("expected `,` or `)`".into()))),
                    }
                }
                tuples.push((l, c, tuple));
            }
            Some(c) => {
                return Err(s.err(EnvErrorKind::Syntax(format!("expected `(` or `}}`, found `{c}`"))))
            }
            None => return Err(s.err(EnvErrorKind::Syntax("unterminated relation body".into()))),
        }
    }
    let arity = match tuples.first() {
        Some((_, _, t)) => t.len(),
        None => category.arity().map_err(|e| EnvError { line: cat_line, col: cat_col, kind: e.into() })?,
    };
    let mut relation = Relation::empty(arity);
    for (l, c, t) in tuples {
        let at = |kind| EnvError { line: l, col: c, kind };
        if t.len() != arity {
            // report the layout problem first when the width is simply wrong
            check_tuple(env, &category, &t).map_err(at)?;
            return Err(at(EnvErrorKind::MixedArity));
        }
        check_tuple(env, &category, &t).map_err(at)?;
        relation.insert(t).expect("width checked");
    }
    env.add_relation(&name, category, relation)
        .map_err(|kind| EnvError { line: name_line, col: name_col, kind })
}

// ---------------------------------------------------------------------------
// Domains

fn product(domains: &[Vec<Value>]) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |v| {
                    let mut t = prefix.clone();
                    t.push(*v);
                    t
                })
            })
            .collect();
    }
    out
}

/// All host tuples over the given per-field domains.
pub fn host_tuples(domains: &[Vec<Value>]) -> Vec<Tuple> {
    product(domains)
}

/// The full product of entity and truth domains in the category's layout.
pub fn worst_case(category: &Category, env: &Environment) -> Result<Relation, DomainError> {
    let fields = category.fields()?;
    if fields.len() > env.arity_limit {
        return Err(DomainError::ArityLimit(category.to_string(), fields.len(), env.arity_limit));
    }
    let entities = env.entity_values();
    let truths = vec![Value::Truth(false), Value::Truth(true)];
    let domains: Vec<Vec<Value>> = fields
        .iter()
        .map(|k| match k {
            FieldKind::Entity => entities.clone(),
            FieldKind::Truth => truths.clone(),
        })
        .collect();
    Ok(Relation::from_tuples(fields.len(), product(&domains)).expect("uniform width"))
}

/// Identity relation for `NP/NP` and `NP\NP` (pairs `⟨e,e⟩`) and for the
/// three-place `NP\NP/NP` (triples `⟨e,e,e⟩`).
pub fn identity_relation(category: &Category, env: &Environment) -> Result<Relation, DomainError> {
    let np = Category::atom(Base::NP);
    let shape = category.erase_marks();
    let pair = [Category::right(np.clone(), np.clone()), Category::left(np.clone(), np.clone())];
    let triple = Category::right(Category::left(np.clone(), np.clone()), np.clone());
    let width = if pair.contains(&shape) {
        2
    } else if shape == triple {
        3
    } else {
        return Err(DomainError::UnsupportedIdentity(category.to_string()));
    };
    let rows = env.entities().map(|e| vec![Value::Entity(e); width]);
    Ok(Relation::from_tuples(width, rows).expect("uniform width"))
}

/// Closed-world completion of evidence into a truth-annotated relation over
/// `restrictor × hosts`.
///
/// Evidence tuples are `⟨r, h…⟩`, `⟨r, h…, h_last⟩` when `copy` is set (an
/// entity-result modifier repeating its host), or already annotated
/// `⟨r, h…, t⟩`. The output has one tuple `⟨r, h…, t⟩` per restrictor
/// entity and host tuple, with `t` true iff the evidence contains it.
pub fn totalize(
    evidence: &Relation,
    restrictor: &Relation,
    hosts: &[Vec<Value>],
    copy: bool,
) -> Result<Relation, DomainError> {
    let h = hosts.len();
    let plain_width = 1 + h + usize::from(copy);
    let annotated = evidence.arity() == 1 + h + 1
        && (evidence.is_truth_annotated() || (evidence.is_empty() && !copy));
    if evidence.arity() != plain_width && !annotated {
        return Err(DomainError::FieldCount { got: evidence.arity(), hosts: h });
    }
    if restrictor.arity() != 1 {
        return Err(DomainError::FieldCount { got: restrictor.arity(), hosts: h });
    }
    let host_rows = product(hosts);
    let mut out = Relation::empty(h + 2);
    let mut probe: Tuple = Vec::with_capacity(h + 2);
    for r in restrictor.iter() {
        for host in &host_rows {
            probe.clear();
            probe.push(r[0]);
            probe.extend_from_slice(host);
            let t = if annotated {
                probe.push(Value::Truth(true));
                let hit = evidence.contains(&probe);
                probe.pop();
                hit
            } else if copy {
                probe.push(*host.last().unwrap_or(&r[0]));
                let hit = evidence.contains(&probe);
                probe.pop();
                hit
            } else {
                evidence.contains(&probe)
            };
            let mut row = probe.clone();
            row.push(Value::Truth(t));
            out.insert(row).expect("uniform width");
        }
    }
    Ok(out)
}
