//! Categorial grammar categories: atoms, slashes, quantifier marks, and the
//! unification used by every parser rule.
//!
//! Surface syntax (ASCII):
//!
//! ```text
//! S   NP   Conj            atoms
//! NP_e                     unquantified NP
//! NP_q  NP_q'  NP_q2       NP carrying a quantifier variable
//! NP_some  NP_no           NP bound to a named quantifier
//! S\NP/NP                  slashes, left-associative: (S\NP)/NP
//! X\NP_q   X/NP_q          quantifier body placeholder (either slash)
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Atomic category symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    S,
    NP,
    Conj,
}

impl Base {
    pub fn name(self) -> &'static str {
        match self {
            Base::S => "S",
            Base::NP => "NP",
            Base::Conj => "Conj",
        }
    }
}

/// Subscript on an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuantMark {
    /// No subscript at all.
    Plain,
    /// `_e`: explicitly unquantified.
    Unquantified,
    /// `_q`, `_q'`, `_q2`: a quantifier variable bound during unification.
    Var(String),
    /// `_<name>`: bound to a named quantifier.
    Bound(String),
}

impl QuantMark {
    pub fn is_var(&self) -> bool {
        matches!(self, QuantMark::Var(_))
    }

    pub fn bound_name(&self) -> Option<&str> {
        match self {
            QuantMark::Bound(n) => Some(n),
            _ => None,
        }
    }

    /// Plain and unquantified marks are interchangeable for matching.
    fn equivalent(&self, other: &QuantMark) -> bool {
        use QuantMark::*;
        match (self, other) {
            (Plain | Unquantified, Plain | Unquantified) => true,
            (Bound(a), Bound(b)) => a == b,
            (Var(a), Var(b)) => a == b,
            _ => false,
        }
    }

    fn parse_subscript(sub: &str) -> QuantMark {
        if sub == "e" {
            QuantMark::Unquantified
        } else if is_quant_var_name(sub) {
            QuantMark::Var(sub.to_string())
        } else {
            QuantMark::Bound(sub.to_string())
        }
    }
}

fn is_quant_var_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('q') && chars.all(|c| c == '\'' || c.is_ascii_digit())
}

impl fmt::Display for QuantMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantMark::Plain => Ok(()),
            QuantMark::Unquantified => write!(f, "_e"),
            QuantMark::Var(n) | QuantMark::Bound(n) => write!(f, "_{n}"),
        }
    }
}

/// Truth-functional conjunction operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConjOp {
    And,
    Or,
}

impl ConjOp {
    pub fn name(self) -> &'static str {
        match self {
            ConjOp::And => "and",
            ConjOp::Or => "or",
        }
    }

    pub fn from_name(s: &str) -> Option<ConjOp> {
        match s {
            "and" => Some(ConjOp::And),
            "or" => Some(ConjOp::Or),
            _ => None,
        }
    }

    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            ConjOp::And => a && b,
            ConjOp::Or => a || b,
        }
    }
}

/// Slash direction of a functor relative to its argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `γ/δ`: the argument is found to the right.
    Forward,
    /// `γ\δ`: the argument is found to the left.
    Backward,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Atom(Base, QuantMark),
    /// `result/arg`
    Right(Box<Category>, Box<Category>),
    /// `result\arg`
    Left(Box<Category>, Box<Category>),
    Var(String),
    /// Partial result of a conjunction that has consumed the conjunction word.
    ConjPrime(ConjOp, Box<Category>),
    /// `X\arg` or `X/arg` in a quantifier entry: matches any functor whose
    /// next argument unifies with `arg`, in either direction.
    Body(Box<Category>),
}

/// Kind of a denotation field in the flattened worst-case tuple layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Entity,
    Truth,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("category syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("subscript on non-NP atom `{0}`")]
    BadSubscript(String),
    #[error("category `{0}` contains variables")]
    HasVariables(String),
}

impl Category {
    pub fn atom(base: Base) -> Category {
        Category::Atom(base, QuantMark::Plain)
    }

    pub fn np(mark: QuantMark) -> Category {
        Category::Atom(Base::NP, mark)
    }

    pub fn right(result: Category, arg: Category) -> Category {
        Category::Right(Box::new(result), Box::new(arg))
    }

    pub fn left(result: Category, arg: Category) -> Category {
        Category::Left(Box::new(result), Box::new(arg))
    }

    pub fn parse(text: &str) -> Result<Category, CategoryError> {
        parse_category(text)
    }

    /// Result, argument and direction of a slashed category.
    pub fn as_functor(&self) -> Option<(&Category, &Category, Direction)> {
        match self {
            Category::Right(r, a) => Some((r, a, Direction::Forward)),
            Category::Left(r, a) => Some((r, a, Direction::Backward)),
            _ => None,
        }
    }

    pub fn is_functor(&self) -> bool {
        self.as_functor().is_some()
    }

    pub fn is_conj(&self) -> bool {
        matches!(self, Category::Atom(Base::Conj, _))
    }

    pub fn is_conj_prime(&self) -> bool {
        matches!(self, Category::ConjPrime(..))
    }

    /// The quantifier name when this is an NP bound to a quantifier.
    pub fn bound_np(&self) -> Option<&str> {
        match self {
            Category::Atom(Base::NP, m) => m.bound_name(),
            _ => None,
        }
    }

    /// True when the category contains `X` or a body placeholder.
    pub fn has_structural_vars(&self) -> bool {
        match self {
            Category::Atom(..) => false,
            Category::Var(_) | Category::Body(_) => true,
            Category::Right(r, a) | Category::Left(r, a) => {
                r.has_structural_vars() || a.has_structural_vars()
            }
            Category::ConjPrime(_, c) => c.has_structural_vars(),
        }
    }

    /// True when no variable of any kind occurs.
    pub fn is_ground(&self) -> bool {
        match self {
            Category::Atom(_, m) => !m.is_var(),
            Category::Var(_) | Category::Body(_) => false,
            Category::Right(r, a) | Category::Left(r, a) => r.is_ground() && a.is_ground(),
            Category::ConjPrime(_, c) => c.is_ground(),
        }
    }

    /// Denotation tuple width: `arity(γ/δ) = arity(δ) + arity(γ)`.
    /// `Conj` has no fields.
    pub fn arity(&self) -> Result<usize, CategoryError> {
        Ok(self.fields()?.len())
    }

    /// Flattened worst-case field layout: argument fields first (in
    /// discharge order), result fields last.
    pub fn fields(&self) -> Result<Vec<FieldKind>, CategoryError> {
        let mut out = Vec::new();
        self.push_fields(&mut out)?;
        Ok(out)
    }

    fn push_fields(&self, out: &mut Vec<FieldKind>) -> Result<(), CategoryError> {
        match self {
            Category::Atom(Base::NP, _) => out.push(FieldKind::Entity),
            Category::Atom(Base::S, _) => out.push(FieldKind::Truth),
            Category::Atom(Base::Conj, _) => {}
            Category::Right(r, a) | Category::Left(r, a) => {
                a.push_fields(out)?;
                r.push_fields(out)?;
            }
            Category::ConjPrime(_, c) => c.push_fields(out)?,
            Category::Var(_) | Category::Body(_) => {
                return Err(CategoryError::HasVariables(self.to_string()))
            }
        }
        Ok(())
    }

    /// Innermost result atom (`S` for `S\NP/NP`).
    pub fn final_result(&self) -> &Category {
        match self {
            Category::Right(r, _) | Category::Left(r, _) => r.final_result(),
            Category::ConjPrime(_, c) => c.final_result(),
            other => other,
        }
    }

    /// Strips trailing unquantified NP arguments: `NP_q/NP_e` becomes `NP_q`.
    pub fn target(&self) -> &Category {
        match self {
            Category::Right(r, a) | Category::Left(r, a)
                if matches!(
                    a.as_ref(),
                    Category::Atom(Base::NP, QuantMark::Plain | QuantMark::Unquantified)
                ) =>
            {
                r.target()
            }
            other => other,
        }
    }

    /// Applies a substitution. Body placeholders keep their shape; only
    /// their argument is rewritten.
    pub fn substitute(&self, s: &Subst) -> Category {
        match self {
            Category::Atom(b, m) => Category::Atom(*b, s.resolve_mark(m)),
            Category::Right(r, a) => Category::right(r.substitute(s), a.substitute(s)),
            Category::Left(r, a) => Category::left(r.substitute(s), a.substitute(s)),
            Category::Var(n) => match s.cats.get(n) {
                Some(c) => c.clone(),
                None => self.clone(),
            },
            Category::ConjPrime(op, c) => Category::ConjPrime(*op, Box::new(c.substitute(s))),
            Category::Body(a) => Category::Body(Box::new(a.substitute(s))),
        }
    }

    /// Replaces every occurrence of the bound quantifier `name` by `_e`.
    pub fn discharge_quantifier(&self, name: &str) -> Category {
        match self {
            Category::Atom(b, QuantMark::Bound(n)) if n == name => {
                Category::Atom(*b, QuantMark::Unquantified)
            }
            Category::Atom(..) | Category::Var(_) => self.clone(),
            Category::Right(r, a) => Category::right(
                r.discharge_quantifier(name),
                a.discharge_quantifier(name),
            ),
            Category::Left(r, a) => Category::left(
                r.discharge_quantifier(name),
                a.discharge_quantifier(name),
            ),
            Category::ConjPrime(op, c) => {
                Category::ConjPrime(*op, Box::new(c.discharge_quantifier(name)))
            }
            Category::Body(a) => Category::Body(Box::new(a.discharge_quantifier(name))),
        }
    }

    /// Structural equality treating plain and `_e` marks as the same.
    pub fn equivalent(&self, other: &Category) -> bool {
        match (self, other) {
            (Category::Atom(b1, m1), Category::Atom(b2, m2)) => b1 == b2 && m1.equivalent(m2),
            (Category::Right(r1, a1), Category::Right(r2, a2))
            | (Category::Left(r1, a1), Category::Left(r2, a2)) => {
                r1.equivalent(r2) && a1.equivalent(a2)
            }
            (Category::ConjPrime(o1, c1), Category::ConjPrime(o2, c2)) => {
                o1 == o2 && c1.equivalent(c2)
            }
            (Category::Body(a1), Category::Body(a2)) => a1.equivalent(a2),
            (Category::Var(a), Category::Var(b)) => a == b,
            _ => false,
        }
    }

    /// Same category with every quantifier mark erased to plain.
    pub fn erase_marks(&self) -> Category {
        match self {
            Category::Atom(b, _) => Category::Atom(*b, QuantMark::Plain),
            Category::Right(r, a) => Category::right(r.erase_marks(), a.erase_marks()),
            Category::Left(r, a) => Category::left(r.erase_marks(), a.erase_marks()),
            Category::ConjPrime(op, c) => Category::ConjPrime(*op, Box::new(c.erase_marks())),
            Category::Body(a) => Category::Body(Box::new(a.erase_marks())),
            Category::Var(_) => self.clone(),
        }
    }

    /// Every sub-category reachable through results and arguments,
    /// including `self`.
    pub fn subcategories(&self) -> Vec<&Category> {
        let mut out = vec![self];
        match self {
            Category::Right(r, a) | Category::Left(r, a) => {
                out.extend(r.subcategories());
                out.extend(a.subcategories());
            }
            Category::ConjPrime(_, c) | Category::Body(c) => out.extend(c.subcategories()),
            _ => {}
        }
        out
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn arg(f: &mut fmt::Formatter<'_>, c: &Category) -> fmt::Result {
            match c {
                Category::Right(..) | Category::Left(..) | Category::Body(_) => write!(f, "({c})"),
                _ => write!(f, "{c}"),
            }
        }
        fn result(f: &mut fmt::Formatter<'_>, c: &Category) -> fmt::Result {
            match c {
                Category::Body(_) => write!(f, "({c})"),
                _ => write!(f, "{c}"),
            }
        }
        match self {
            Category::Atom(b, m) => write!(f, "{}{}", b.name(), m),
            Category::Right(r, a) => {
                result(f, r)?;
                write!(f, "/")?;
                arg(f, a)
            }
            Category::Left(r, a) => {
                result(f, r)?;
                write!(f, "\\")?;
                arg(f, a)
            }
            Category::Var(n) => write!(f, "{n}"),
            Category::ConjPrime(op, c) => write!(f, "Conj'{}({c})", op.name()),
            Category::Body(a) => {
                write!(f, "X\\")?;
                arg(f, a)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Fwd,
    Back,
    Open,
    Close,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, CategoryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '/' => {
                out.push((i + 1, Tok::Fwd));
                i += 1;
            }
            '\\' => {
                out.push((i + 1, Tok::Back));
                i += 1;
            }
            '(' => {
                out.push((i + 1, Tok::Open));
                i += 1;
            }
            ')' => {
                out.push((i + 1, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                out.push((start + 1, Tok::Ident(chars[start..i].iter().collect())));
            }
            other => {
                return Err(CategoryError::Syntax {
                    col: i + 1,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, CategoryError> {
        Err(CategoryError::Syntax { col: self.col(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Category, CategoryError> {
        let mut lhs = self.primary()?;
        loop {
            match self.toks.get(self.pos).map(|t| &t.1) {
                Some(Tok::Fwd) => {
                    self.pos += 1;
                    let rhs = self.primary()?;
                    lhs = slash(lhs, rhs, Direction::Forward);
                }
                Some(Tok::Back) => {
                    self.pos += 1;
                    let rhs = self.primary()?;
                    lhs = slash(lhs, rhs, Direction::Backward);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn primary(&mut self) -> Result<Category, CategoryError> {
        match self.toks.get(self.pos).cloned() {
            Some((_, Tok::Open)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.toks.get(self.pos) {
                    Some((_, Tok::Close)) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.err("expected `)`"),
                }
            }
            Some((_, Tok::Ident(name))) => {
                self.pos += 1;
                if let Some(rest) = name.strip_prefix("Conj'") {
                    let op = match ConjOp::from_name(rest) {
                        Some(op) => op,
                        None => return self.err(format!("unknown conjunction operator `{rest}`")),
                    };
                    match self.toks.get(self.pos) {
                        Some((_, Tok::Open)) => self.pos += 1,
                        _ => return self.err("expected `(` after Conj'"),
                    }
                    let inner = self.expr()?;
                    match self.toks.get(self.pos) {
                        Some((_, Tok::Close)) => self.pos += 1,
                        _ => return self.err("expected `)`"),
                    }
                    return Ok(Category::ConjPrime(op, Box::new(inner)));
                }
                atom(&name)
            }
            Some(_) => self.err("expected a category"),
            None => self.err("unexpected end of category"),
        }
    }
}

fn slash(result: Category, arg: Category, dir: Direction) -> Category {
    match (result, dir) {
        (Category::Var(n), _) if n == "X" => Category::Body(Box::new(arg)),
        (r, Direction::Forward) => Category::right(r, arg),
        (r, Direction::Backward) => Category::left(r, arg),
    }
}

fn atom(name: &str) -> Result<Category, CategoryError> {
    let (base, sub) = match name.split_once('_') {
        Some((b, s)) => (b, Some(s)),
        None => (name, None),
    };
    let base = match base {
        "S" => Base::S,
        "NP" => Base::NP,
        "Conj" => Base::Conj,
        "X" if sub.is_none() => return Ok(Category::Var("X".into())),
        _ => return Err(CategoryError::UnknownAtom(name.to_string())),
    };
    let mark = match sub {
        None => QuantMark::Plain,
        Some("") => {
            return Err(CategoryError::Syntax { col: 0, msg: format!("empty subscript in `{name}`") })
        }
        Some(s) => {
            if base != Base::NP {
                return Err(CategoryError::BadSubscript(name.to_string()));
            }
            QuantMark::parse_subscript(s)
        }
    };
    Ok(Category::Atom(base, mark))
}

/// Parses the category surface syntax; slashes are left-associative.
pub fn parse_category(text: &str) -> Result<Category, CategoryError> {
    let toks = lex(text)?;
    let end_col = text.chars().count() + 1;
    let mut p = Parser { toks, pos: 0, end_col };
    let c = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(c)
}

/// Parses a `.`-separated component sequence (`X\NP_q . NP_q\NP_q . NP_q/NP_e`).
pub fn parse_components(text: &str) -> Result<Vec<Category>, CategoryError> {
    text.split('.').map(parse_category).collect()
}

// ---------------------------------------------------------------------------
// Unification

/// Bindings for structural variables (`X`) and quantifier variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    pub cats: BTreeMap<String, Category>,
    pub quants: BTreeMap<String, QuantMark>,
}

impl Subst {
    pub fn is_empty(&self) -> bool {
        self.cats.is_empty() && self.quants.is_empty()
    }

    pub fn resolve_mark(&self, m: &QuantMark) -> QuantMark {
        let mut cur = m.clone();
        // Chains are short; the bound stops runaway var-to-var cycles.
        for _ in 0..8 {
            match &cur {
                QuantMark::Var(v) => match self.quants.get(v) {
                    Some(next) if next != &cur => cur = next.clone(),
                    _ => break,
                },
                _ => break,
            }
        }
        cur
    }
}

/// Result of unifying a pattern with a concrete category. The two sides
/// keep separate variable namespaces.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Unifier {
    pub pattern: Subst,
    pub concrete: Subst,
}

impl Unifier {
    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty() && self.concrete.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("cannot unify `{0}` with `{1}`")]
    Mismatch(String, String),
    #[error("inconsistent quantifier binding for `{0}`")]
    InconsistentQuant(String),
}

/// Most general unifier of `pattern` against `concrete`.
///
/// `Body(NP_q)` matches any slashed category whose next argument unifies
/// with `NP_q`, binding `X` to the remaining result.
pub fn unify(pattern: &Category, concrete: &Category) -> Result<Unifier, UnifyError> {
    let mut u = Unifier::default();
    unify_into(pattern, concrete, &mut u)?;
    Ok(u)
}

fn mismatch(p: &Category, c: &Category) -> UnifyError {
    UnifyError::Mismatch(p.to_string(), c.to_string())
}

fn unify_into(p: &Category, c: &Category, u: &mut Unifier) -> Result<(), UnifyError> {
    match (p, c) {
        (Category::Body(parg), _) => {
            let (result, carg, _) = c.as_functor().ok_or_else(|| mismatch(p, c))?;
            unify_into(parg, carg, u)?;
            bind_cat(&mut u.pattern, "X", result.clone(), p, c)
        }
        (Category::Var(n), _) => bind_cat(&mut u.pattern, n, c.clone(), p, c),
        (Category::Atom(b1, m1), Category::Atom(b2, m2)) => {
            if b1 != b2 {
                return Err(mismatch(p, c));
            }
            unify_marks(m1, m2, u)
        }
        (Category::Right(r1, a1), Category::Right(r2, a2))
        | (Category::Left(r1, a1), Category::Left(r2, a2)) => {
            unify_into(a1, a2, u)?;
            unify_into(r1, r2, u)
        }
        (Category::ConjPrime(o1, c1), Category::ConjPrime(o2, c2)) if o1 == o2 => {
            unify_into(c1, c2, u)
        }
        _ => Err(mismatch(p, c)),
    }
}

fn bind_cat(
    s: &mut Subst,
    name: &str,
    value: Category,
    p: &Category,
    c: &Category,
) -> Result<(), UnifyError> {
    match s.cats.get(name) {
        Some(prev) if !prev.equivalent(&value) => Err(mismatch(p, c)),
        Some(_) => Ok(()),
        None => {
            s.cats.insert(name.to_string(), value);
            Ok(())
        }
    }
}

fn unify_marks(pm: &QuantMark, cm: &QuantMark, u: &mut Unifier) -> Result<(), UnifyError> {
    let pv = u.pattern.resolve_mark(pm);
    let cv = u.concrete.resolve_mark(cm);
    match (&pv, &cv) {
        (QuantMark::Var(a), _) => {
            u.pattern.quants.insert(a.clone(), cv.clone());
            Ok(())
        }
        (_, QuantMark::Var(b)) => {
            u.concrete.quants.insert(b.clone(), pv.clone());
            Ok(())
        }
        _ if pv.equivalent(&cv) => Ok(()),
        _ => {
            let name = match (pm, cm) {
                (QuantMark::Var(v), _) | (_, QuantMark::Var(v)) => v.clone(),
                _ => format!("{pv} vs {cv}"),
            };
            Err(UnifyError::InconsistentQuant(name))
        }
    }
}

/// Function application of `functor` to `arg`. `dir` states where the
/// argument sits relative to the functor and must agree with the slash.
pub fn apply(functor: &Category, arg: &Category, dir: Direction) -> Option<Category> {
    let (result, slot, fdir) = functor.as_functor()?;
    if fdir != dir {
        return None;
    }
    let u = unify(slot, arg).ok()?;
    Some(result.substitute(&u.pattern))
}
