use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Undirected neighbourhood graph over `n` regions.
///
/// Serialises as `{"n": .., "nb": [[..], ..]}` with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct AdjacencyGraph {
    neighbours: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    nb: Vec<Vec<usize>>,
}

impl TryFrom<GraphJson> for AdjacencyGraph {
    type Error = Error;

    fn try_from(g: GraphJson) -> Result<Self> {
        if g.nb.len() != g.n {
            return Err(Error::DimensionMismatch { expected: g.n, got: g.nb.len() });
        }
        AdjacencyGraph::new(g.nb)
    }
}

impl From<AdjacencyGraph> for GraphJson {
    fn from(g: AdjacencyGraph) -> Self {
        GraphJson { n: g.n(), nb: g.neighbours }
    }
}

/// Index convention of a graph file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBase {
    Zero,
    #[default]
    One,
}

impl IndexBase {
    fn offset(self) -> i64 {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

impl AdjacencyGraph {
    /// Validate and normalise (sort, dedupe) neighbour lists.
    pub fn new(mut neighbours: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbours.len();
        for (i, nb) in neighbours.iter_mut().enumerate() {
            nb.sort_unstable();
            nb.dedup();
            if let Some(&j) = nb.iter().find(|&&j| j >= n) {
                return Err(Error::IndexOutOfRange { index: j as i64, n, line: 0 });
            }
            if nb.binary_search(&i).is_ok() {
                return Err(Error::InvalidParameter(format!("region {i} lists itself as a neighbour")));
            }
        }
        for (i, nb) in neighbours.iter().enumerate() {
            if let Some(&j) = nb.iter().find(|&&j| neighbours[j].binary_search(&i).is_err()) {
                return Err(Error::AsymmetricGraph(i, j));
            }
        }
        Ok(AdjacencyGraph { neighbours })
    }

    /// Build from undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut nb = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j) as i64, n, line: 0 });
            }
            nb[i].push(j);
            nb[j].push(i);
        }
        AdjacencyGraph::new(nb)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        AdjacencyGraph::from_edges(n, &edges).expect("valid path")
    }

    pub fn n(&self) -> usize {
        self.neighbours.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbours[i].len()
    }

    pub fn n_edges(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &self.neighbours[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Parse the ASCII format: the region count, then one line per region
    /// with its index, neighbour count and neighbour indices. Blank lines
    /// and `#` comments are ignored.
    pub fn parse(text: &str, base: IndexBase) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim())).filter(|(_, l)| !l.is_empty());
        let (first, header) = lines.next().ok_or(Error::MalformedLine { line: 1, message: "empty file".into() })?;
        let n: usize = header.parse().map_err(|_| Error::MalformedLine { line: first, message: format!("expected region count, got {header:?}") })?;
        let off = base.offset();
        let index = |tok: &str, line: usize| -> Result<usize> {
            let v: i64 = tok.parse().map_err(|_| Error::MalformedLine { line, message: format!("expected an integer, got {tok:?}") })?;
            let i = v - off;
            if i < 0 || i >= n as i64 {
                return Err(Error::IndexOutOfRange { index: v, n, line });
            }
            Ok(i as usize)
        };
        let mut nb: Vec<Option<Vec<usize>>> = vec![None; n];
        let mut last = first;
        for (line, l) in lines {
            last = line;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(Error::MalformedLine { line, message: "expected index and neighbour count".into() });
            }
            let i = index(toks[0], line)?;
            let count: usize = toks[1].parse().map_err(|_| Error::MalformedLine { line, message: format!("bad neighbour count {:?}", toks[1]) })?;
            if toks.len() - 2 != count {
                return Err(Error::MalformedLine { line, message: format!("neighbour count {count} but {} indices listed", toks.len() - 2) });
            }
            if nb[i].is_some() {
                return Err(Error::MalformedLine { line, message: format!("region {} listed twice", toks[0]) });
            }
            let list = toks[2..].iter().map(|t| index(t, line)).collect::<Result<Vec<_>>>()?;
            if list.contains(&i) {
                return Err(Error::MalformedLine { line, message: format!("region {} lists itself", toks[0]) });
            }
            nb[i] = Some(list);
        }
        if let Some(missing) = nb.iter().position(Option::is_none) {
            return Err(Error::MalformedLine { line: last + 1, message: format!("region {} has no line", missing as i64 + off) });
        }
        let nb: Vec<Vec<usize>> = nb.into_iter().map(Option::unwrap).collect();
        AdjacencyGraph::new(nb).map_err(|e| match e {
            Error::AsymmetricGraph(i, j) => Error::AsymmetricGraph(i + off as usize, j + off as usize),
            e => e,
        })
    }

    /// Inverse of [`AdjacencyGraph::parse`].
    pub fn to_text(&self, base: IndexBase) -> String {
        let off = base.offset() as usize;
        let mut s = format!("{}\n", self.n());
        for (i, nb) in self.neighbours.iter().enumerate() {
            s.push_str(&format!("{} {}", i + off, nb.len()));
            for j in nb {
                s.push_str(&format!(" {}", j + off));
            }
            s.push('\n');
        }
        s
    }
}

/// Parse a 1-based graph file.
pub fn parse_graph(text: &str) -> Result<AdjacencyGraph> {
    AdjacencyGraph::parse(text, IndexBase::One)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_three() {
        let g = parse_graph("3\n1 1 2\n2 2 1 3\n3 1 2").unwrap();
        assert_eq!(g, AdjacencyGraph::path(3));
        assert_eq!(g.n_edges(), 2);
    }

    #[test]
    fn asymmetric() {
        assert!(matches!(parse_graph("3\n1 1 2\n2 1 3\n3 1 2"), Err(Error::AsymmetricGraph(1, 2))));
    }

    #[test]
    fn errors_carry_lines() {
        assert!(matches!(parse_graph("2\n1 1 2\n2 1 5"), Err(Error::IndexOutOfRange { index: 5, n: 2, line: 3 })));
        assert!(matches!(parse_graph("2\n1 2 2\n2 1 1"), Err(Error::MalformedLine { line: 2, .. })));
        assert!(matches!(parse_graph("2\n1 1 x\n2 1 1"), Err(Error::MalformedLine { line: 2, .. })));
        assert!(matches!(parse_graph("2\n1 1 2"), Err(Error::MalformedLine { line: 3, .. })));
        assert!(matches!(parse_graph("two"), Err(Error::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn zero_based_and_round_trip() {
        let g = AdjacencyGraph::parse("3\n0 1 1\n1 2 0 2\n2 1 1\n", IndexBase::Zero).unwrap();
        assert_eq!(g, AdjacencyGraph::path(3));
        assert_eq!(parse_graph(&g.to_text(IndexBase::One)).unwrap(), g);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"n":3,"nb":[[1],[0,2],[1]]}"#);
        assert_eq!(serde_json::from_str::<AdjacencyGraph>(&json).unwrap(), g);
        assert!(serde_json::from_str::<AdjacencyGraph>(r#"{"n":2,"nb":[[1],[]]}"#).is_err());
    }

    #[test]
    fn components() {
        let g = AdjacencyGraph::from_edges(6, &[(0, 1), (1, 2), (4, 5)]).unwrap();
        assert_eq!(g.components(), vec![vec![0, 1, 2], vec![3], vec![4, 5]]);
    }
}
