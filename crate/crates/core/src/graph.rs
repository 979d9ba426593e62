//! Weighted graphs `(X, b, m)`: a vertex set `X`, a symmetric edge
//! weight `b` with zero diagonal and finite row sums, and a strictly
//! positive vertex measure `m`.
//!
//! Finite graphs are materialized as [`WeightedGraph`], which stores `b`
//! once per undirected edge and derives both orientations, so symmetry
//! holds by construction. Graphs too large to materialize are reached
//! through the [`GraphProvider`] trait, whose two queries (neighbors and
//! measure) are all the jump-process sampler needs.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::validate::{ValidationReport, Violation};

/// Index of a vertex: dense (`0..n`) in a materialized finite graph, an
/// opaque key in a provider-backed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One `b(u,v)` record, as given (oriented).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub b: f64,
}

/// Raw graph records prior to validation. May contain anything a file
/// can contain: duplicate ids, conflicting orientations, nonpositive
/// weights.
#[derive(Debug, Clone, Default)]
pub struct GraphData {
    /// `(vertex, m(vertex))` records.
    pub vertices: Vec<(VertexId, f64)>,
    /// Oriented edge records.
    pub edges: Vec<EdgeRecord>,
}

impl GraphData {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a vertex with the next dense id.
    pub fn add_vertex(&mut self, m: f64) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push((id, m));
        id
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId, b: f64) {
        self.edges.push(EdgeRecord { u, v, b });
    }
}

/// Checks every `(X, b, m)` invariant on raw records and reports each
/// offending vertex or edge. The report is empty exactly when a
/// [`WeightedGraph`] can be built from the records.
pub fn validate_graph(data: &GraphData) -> ValidationReport {
    let mut report = ValidationReport::new();

    let mut seen = BTreeMap::new();
    for &(id, _) in &data.vertices {
        let count = seen.entry(id).or_insert(0usize);
        *count += 1;
        if *count == 2 {
            report.push(Violation::DuplicateVertex(id));
        }
    }
    if let Some((&max_id, _)) = seen.iter().next_back() {
        if max_id.idx() + 1 != seen.len() {
            report.push(Violation::NonContiguousIds {
                count: seen.len(),
                max_id: max_id.0,
            });
        }
    }
    for &(id, m) in &data.vertices {
        if !(m.is_finite() && m > 0.0) {
            report.push(Violation::NonpositiveMeasure { vertex: id, m });
        }
    }

    // One slot per unordered pair; a second record either duplicates or
    // contradicts the first.
    let mut pairs: BTreeMap<(VertexId, VertexId), EdgeRecord> = BTreeMap::new();
    for &rec in &data.edges {
        let EdgeRecord { u, v, b } = rec;
        if !seen.contains_key(&u) || !seen.contains_key(&v) {
            report.push(Violation::UnknownEndpoint { u, v });
            continue;
        }
        if u == v {
            report.push(Violation::SelfLoop { vertex: u });
            continue;
        }
        if !(b.is_finite() && b > 0.0) {
            report.push(Violation::NonpositiveWeight { u, v, b });
            continue;
        }
        let key = (u.min(v), u.max(v));
        match pairs.get(&key) {
            None => {
                pairs.insert(key, rec);
            }
            Some(first) if first.b == b => report.push(Violation::DuplicateEdge { u: key.0, v: key.1 }),
            Some(first) => report.push(Violation::AsymmetricWeight {
                u: first.u,
                v: first.v,
                b_uv: first.b,
                b_vu: b,
            }),
        }
    }

    report
}

/// A validated finite weighted graph. Immutable after construction and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    measures: Vec<f64>,
    /// Unique edges in canonical orientation `u < v`, sorted.
    edges: Vec<EdgeRecord>,
    /// Per vertex: `(neighbor, b)`, sorted by neighbor id.
    adjacency: Vec<Vec<(VertexId, f64)>>,
    degrees: Vec<f64>,
}

impl WeightedGraph {
    /// Validates `data` and builds the graph, or returns the full report
    /// of violations.
    pub fn from_data(data: &GraphData) -> Result<Self> {
        let report = validate_graph(data);
        if !report.is_empty() {
            return Err(Error::Invalid(report));
        }

        let n = data.vertices.len();
        let mut measures = vec![0.0; n];
        for &(id, m) in &data.vertices {
            measures[id.idx()] = m;
        }

        let mut edges: Vec<EdgeRecord> = data
            .edges
            .iter()
            .map(|&EdgeRecord { u, v, b }| EdgeRecord {
                u: u.min(v),
                v: u.max(v),
                b,
            })
            .collect();
        edges.sort_by_key(|e| (e.u, e.v));

        let mut adjacency = vec![Vec::new(); n];
        for &EdgeRecord { u, v, b } in &edges {
            adjacency[u.idx()].push((v, b));
            adjacency[v.idx()].push((u, b));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|&(y, _)| y);
        }
        let degrees = adjacency
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(_, b)| b).sum())
            .collect();

        Ok(Self {
            measures,
            edges,
            adjacency,
            degrees,
        })
    }

    /// Convenience constructor from measures (vertex `i` gets
    /// `measures[i]`) and `(u, v, b)` triples.
    pub fn build(measures: Vec<f64>, edges: &[(u32, u32, f64)]) -> Result<Self> {
        let mut data = GraphData::new();
        for m in measures {
            data.add_vertex(m);
        }
        for &(u, v, b) in edges {
            data.add_edge(VertexId(u), VertexId(v), b);
        }
        Self::from_data(&data)
    }

    pub fn vertex_count(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.measures.len() as u32).map(VertexId)
    }

    pub fn contains(&self, x: VertexId) -> bool {
        x.idx() < self.measures.len()
    }

    fn check(&self, x: VertexId) -> Result<usize> {
        if self.contains(x) {
            Ok(x.idx())
        } else {
            Err(Error::UnknownVertex(x))
        }
    }

    pub fn measure(&self, x: VertexId) -> Result<f64> {
        Ok(self.measures[self.check(x)?])
    }

    /// The weighted degree `Σ_y b(x,y)`.
    pub fn degree(&self, x: VertexId) -> Result<f64> {
        Ok(self.degrees[self.check(x)?])
    }

    pub fn neighbors(&self, x: VertexId) -> Result<&[(VertexId, f64)]> {
        Ok(&self.adjacency[self.check(x)?])
    }

    /// `b(x,y)`; zero when `x` and `y` are not adjacent.
    pub fn weight(&self, x: VertexId, y: VertexId) -> Result<f64> {
        self.check(y)?;
        Ok(self.adjacency[self.check(x)?]
            .iter()
            .find(|&&(z, _)| z == y)
            .map_or(0.0, |&(_, b)| b))
    }

    /// Unique edges in canonical orientation `u < v`.
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// The form bound constant `C(b,m) = max_x deg(x)/m(x)`. Overflow of
    /// the ratio surfaces as `+inf`.
    pub fn form_bound_constant(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(self
            .degrees
            .iter()
            .zip(&self.measures)
            .map(|(&d, &m)| d / m)
            .fold(0.0, f64::max))
    }
}

/// Neighbor and measure queries backing the jump-process sampler.
///
/// Implementations must be deterministic: repeated calls return the same
/// list in the same order (the sampler walks it cumulatively, so order
/// is part of the sampled law), and `y` appears in `neighbors(x)` with
/// weight `w` exactly when `x` appears in `neighbors(y)` with weight `w`.
/// All returned weights and measures are strictly positive. Calls may
/// come from any thread concurrently.
pub trait GraphProvider: Sync {
    /// All `(y, b(x,y))` with `b(x,y) > 0`; finite at every queried
    /// vertex.
    fn neighbors(&self, x: VertexId) -> Result<Cow<'_, [(VertexId, f64)]>>;

    /// The vertex measure `m(x)`.
    fn measure(&self, x: VertexId) -> Result<f64>;

    /// The weighted degree `Σ_y b(x,y)`.
    fn degree(&self, x: VertexId) -> Result<f64> {
        Ok(self.neighbors(x)?.iter().map(|&(_, b)| b).sum())
    }
}

impl GraphProvider for WeightedGraph {
    fn neighbors(&self, x: VertexId) -> Result<Cow<'_, [(VertexId, f64)]>> {
        WeightedGraph::neighbors(self, x).map(Cow::Borrowed)
    }

    fn measure(&self, x: VertexId) -> Result<f64> {
        WeightedGraph::measure(self, x)
    }

    fn degree(&self, x: VertexId) -> Result<f64> {
        WeightedGraph::degree(self, x)
    }
}

/// The weighted degree, through whichever access path the graph offers.
pub fn vertex_degree<P: GraphProvider + ?Sized>(g: &P, x: VertexId) -> Result<f64> {
    g.degree(x)
}
