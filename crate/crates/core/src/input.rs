//! Parser input: a plain sentence or a word lattice.
//!
//! Lattice lines read `edge <i> <j> <word> [<weight>]`; `#` starts a comment.

use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub word: String,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputChart {
    pub n: usize,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeErrorKind {
    #[error("malformed line, expected `edge <i> <j> <word> [<weight>]`")]
    Malformed,
    #[error("bad position `{0}`")]
    BadPosition(String),
    #[error("edge start {0} is not before its end {1}")]
    Order(usize, usize),
    #[error("bad weight `{0}`")]
    BadWeight(String),
    #[error("negative weight {0}")]
    NegativeWeight(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LatticeError {
    pub line: usize,
    pub kind: LatticeErrorKind,
}

impl InputChart {
    /// One edge `(k, k+1, word, 1.0)` per whitespace-separated token.
    pub fn from_sentence(text: &str) -> InputChart {
        let edges: Vec<Edge> = text
            .split_whitespace()
            .enumerate()
            .map(|(k, w)| Edge { i: k, j: k + 1, word: w.to_string(), weight: 1.0 })
            .collect();
        InputChart { n: edges.len(), edges }
    }

    pub fn from_edges(edges: Vec<Edge>) -> InputChart {
        let n = edges.iter().map(|e| e.j).max().unwrap_or(0);
        InputChart { n, edges }
    }

    /// Tokens of a linear chart, `None` when edges overlap or leave gaps.
    pub fn words(&self) -> Option<Vec<&str>> {
        let mut out = vec![None; self.n];
        for e in &self.edges {
            if e.j != e.i + 1 || out[e.i].is_some() {
                return None;
            }
            out[e.i] = Some(e.word.as_str());
        }
        out.into_iter().collect()
    }
}

pub fn load_lattice(text: &str) -> Result<InputChart, LatticeError> {
    let mut edges = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let err = |kind| LatticeError { line: n + 1, kind };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "edge" || !(4..=5).contains(&fields.len()) {
            return Err(err(LatticeErrorKind::Malformed));
        }
        let pos = |s: &str| {
            s.parse::<usize>().map_err(|_| err(LatticeErrorKind::BadPosition(s.to_string())))
        };
        let (i, j) = (pos(fields[1])?, pos(fields[2])?);
        if i >= j {
            return Err(err(LatticeErrorKind::Order(i, j)));
        }
        let weight = match fields.get(4) {
            None => 1.0,
            Some(w) => {
                let v: f64 =
                    w.parse().map_err(|_| err(LatticeErrorKind::BadWeight(w.to_string())))?;
                if v.is_nan() {
                    return Err(err(LatticeErrorKind::BadWeight(w.to_string())));
                }
                if v < 0.0 {
                    return Err(err(LatticeErrorKind::NegativeWeight(w.to_string())));
                }
                v
            }
        };
        edges.push(Edge { i, j, word: fields[3].to_string(), weight });
    }
    Ok(InputChart::from_edges(edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_edges() {
        let c = InputChart::from_sentence("lemon in  bin");
        assert_eq!(c.n, 3);
        assert_eq!(c.edges[2], Edge { i: 2, j: 3, word: "bin".into(), weight: 1.0 });
        assert_eq!(c.words().unwrap(), vec!["lemon", "in", "bin"]);
        assert_eq!(InputChart::from_sentence("  ").n, 0);
    }

    #[test]
    fn lattice_loading() {
        let c = load_lattice("# rivals\nedge 0 1 lemon 0.7\nedge 0 1 melon 0.3\nedge 1 3 in\n").unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.edges.len(), 3);
        assert_eq!(c.edges[2].weight, 1.0);
        assert!(c.words().is_none());
        assert_eq!(load_lattice("").unwrap().n, 0);
    }

    #[test]
    fn lattice_errors() {
        let kind = |t: &str| load_lattice(t).unwrap_err().kind;
        assert_eq!(kind("edge 2 2 x"), LatticeErrorKind::Order(2, 2));
        assert!(matches!(kind("edge 0 1 x -1"), LatticeErrorKind::NegativeWeight(_)));
        assert!(matches!(kind("edge 0 1 x heavy"), LatticeErrorKind::BadWeight(_)));
        assert!(matches!(kind("edge a 1 x"), LatticeErrorKind::BadPosition(_)));
        assert_eq!(kind("node 0 1 x"), LatticeErrorKind::Malformed);
        assert_eq!(load_lattice("\n\nedge 0").unwrap_err().line, 3);
    }
}
