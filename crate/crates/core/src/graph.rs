//! The metric graph model: combinatorial skeleton, edge lengths, optional
//! conductance profiles, and points living on edges.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Piecewise-constant conductance `c_e` along one edge.
///
/// `breaks` partitions `[0, l(e)]`; piece `k` covers `[breaks[k], breaks[k+1]]`
/// and carries `vals[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub breaks: Vec<f64>,
    pub vals: Vec<f64>,
}

impl WeightProfile {
    pub fn new(breaks: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        let w = WeightProfile { breaks, vals };
        if let Some(msg) = w.shape_error() {
            return Err(Error::InvalidParameter(msg));
        }
        Ok(w)
    }

    pub fn constant(len: f64, value: f64) -> Self {
        WeightProfile {
            breaks: vec![0.0, len],
            vals: vec![value],
        }
    }

    fn shape_error(&self) -> Option<String> {
        if self.breaks.len() < 2 || self.vals.len() + 1 != self.breaks.len() {
            return Some("weight profile needs n+1 breakpoints for n values".into());
        }
        if self.breaks[0] != 0.0 {
            return Some("weight breakpoints must start at 0".into());
        }
        if self.breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Some("weight breakpoints must be strictly increasing".into());
        }
        if self.vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Some("weight values must be positive and finite".into());
        }
        None
    }

    pub fn len(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn min(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.vals.iter().copied().fold(0.0, f64::max)
    }

    /// Exact `∫_a^b f(c(s)) ds` for a pointwise transform `f` of the conductance.
    pub fn integrate_with(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let mut acc = 0.0;
        for (k, &v) in self.vals.iter().enumerate() {
            let lo = self.breaks[k].max(a);
            let hi = self.breaks[k + 1].min(b);
            if hi > lo {
                acc += (hi - lo) * f(v);
            }
        }
        acc
    }

    /// `∫_a^b c(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, |c| c)
    }

    /// Intrinsic length `∫_a^b c(s)^{-1/2} ds` of a sub-segment.
    pub fn intrinsic_length(&self, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, |c| 1.0 / c.sqrt())
    }

    /// Restriction to `[a, b]`, re-based so that `a` maps to 0.
    pub fn slice(&self, a: f64, b: f64) -> WeightProfile {
        let mut breaks = vec![0.0];
        let mut vals = Vec::new();
        for (k, &v) in self.vals.iter().enumerate() {
            let lo = self.breaks[k].max(a);
            let hi = self.breaks[k + 1].min(b);
            if hi > lo {
                vals.push(v);
                breaks.push(hi - a);
            }
        }
        if vals.is_empty() {
            // degenerate slice; keep the value at `a`
            let v = self.value_at(a);
            return WeightProfile::constant(b - a, v);
        }
        *breaks.last_mut().unwrap() = b - a;
        WeightProfile { breaks, vals }
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let k = self.breaks[1..]
            .iter()
            .position(|&b| s < b)
            .unwrap_or(self.vals.len() - 1);
        self.vals[k]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    /// Initial vertex `i(e)`; offset 0.
    pub init: VertexId,
    /// Terminal vertex `j(e)`; offset `len`.
    pub term: VertexId,
    pub len: f64,
    pub weight: Option<WeightProfile>,
}

impl Edge {
    pub fn new(id: u32, init: u32, term: u32, len: f64) -> Self {
        Edge {
            id: EdgeId(id),
            init: VertexId(init),
            term: VertexId(term),
            len,
            weight: None,
        }
    }

    pub fn with_weight(mut self, w: WeightProfile) -> Self {
        self.weight = Some(w);
        self
    }

    /// The endpoint opposite to `v`, if `v` is an endpoint.
    pub fn other(&self, v: VertexId) -> Option<VertexId> {
        if v == self.init {
            Some(self.term)
        } else if v == self.term {
            Some(self.init)
        } else {
            None
        }
    }

    /// Conductance integrated over `[a, b]`; 1 per unit length when unweighted.
    pub fn conductance_integral(&self, a: f64, b: f64) -> f64 {
        match &self.weight {
            Some(w) => w.integral(a, b),
            None => (b - a).abs(),
        }
    }

    /// Intrinsic length of `[a, b]` under the line element `c^{-1/2} ds`.
    pub fn intrinsic_length(&self, a: f64, b: f64) -> f64 {
        match &self.weight {
            Some(w) => w.intrinsic_length(a, b),
            None => (b - a).abs(),
        }
    }
}

/// A location on the graph.
///
/// Construct interior points with [`MetricGraph::point`] (or canonicalize with
/// [`MetricGraph::canonical`]) so that offsets `0` and `l(e)` become vertices.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Point {
    Vertex(VertexId),
    Interior { edge: EdgeId, offset: f64 },
}

impl Point {
    pub fn vertex(id: u32) -> Self {
        Point::Vertex(VertexId(id))
    }

    pub fn on_edge(edge: u32, offset: f64) -> Self {
        Point::Interior {
            edge: EdgeId(edge),
            offset,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Vertex(v) => write!(f, "v:{v}"),
            Point::Interior { edge, offset } => write!(f, "e:{edge}:{offset}"),
        }
    }
}

impl FromStr for Point {
    type Err = Error;

    /// Parses `v:<id>` or `e:<id>:<offset>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad point literal `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["v", id] => Ok(Point::vertex(id.parse().map_err(|_| bad())?)),
            ["e", id, off] => Ok(Point::on_edge(
                id.parse().map_err(|_| bad())?,
                off.parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

/// A point resolved to internal indices.
#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) enum Loc {
    Vertex(usize),
    Edge { e: usize, s: f64 },
}

/// One invariant violation found by [`MetricGraph::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    UnknownEndpoint { edge: EdgeId, vertex: VertexId },
    DuplicateVertex(VertexId),
    DuplicateEdge(EdgeId),
    SelfLoop(EdgeId),
    ParallelEdges(EdgeId, EdgeId),
    BadLength { edge: EdgeId, len: f64 },
    Disconnected { components: usize },
    MalformedWeight { edge: EdgeId, reason: String },
    WeightOutOfBounds { edge: EdgeId, value: f64, lambda: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty graph"),
            Violation::UnknownEndpoint { edge, vertex } => {
                write!(f, "edge {edge} references unknown vertex {vertex}")
            }
            Violation::DuplicateVertex(v) => write!(f, "duplicate vertex id {v}"),
            Violation::DuplicateEdge(e) => write!(f, "duplicate edge id {e}"),
            Violation::SelfLoop(e) => write!(f, "self-loop on edge {e}"),
            Violation::ParallelEdges(a, b) => write!(f, "parallel edges {a} and {b}"),
            Violation::BadLength { edge, len } => {
                write!(f, "edge {edge} has non-positive or non-finite length {len}")
            }
            Violation::Disconnected { components } => {
                write!(f, "disconnected ({components} components)")
            }
            Violation::MalformedWeight { edge, reason } => {
                write!(f, "malformed weight on edge {edge}: {reason}")
            }
            Violation::WeightOutOfBounds {
                edge,
                value,
                lambda,
            } => write!(f, "weight {value} on edge {edge} outside [1/{lambda}, {lambda}]"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidGraph(msg))
    }
}

/// Bounded-geometry parameters of a finite graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometryParams {
    /// Maximal vertex degree `D`.
    pub max_degree: usize,
    /// Minimal edge length `ℓ`.
    pub min_length: f64,
    /// `ℓ' = ℓ/4`, the radius below which doubling holds with `c_D`.
    pub ell_prime: f64,
    /// Doubling constant `c_D = 1 + D/2`.
    pub doubling_constant: f64,
    /// Local dimension `log2(D+2) - 1`.
    pub local_dimension: f64,
}

/// A finite, undirected metric graph.
///
/// Immutable after construction. Vertex and edge ids are opaque; algorithms
/// work on dense indices (`vertices()` and `edges()` are sorted by id).
#[derive(Clone, Debug)]
pub struct MetricGraph {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
    vindex: HashMap<VertexId, usize>,
    eindex: HashMap<EdgeId, usize>,
    incident: Vec<Vec<usize>>,
    lambda: Option<f64>,
    meta: Map<String, Value>,
}

impl MetricGraph {
    /// Builds and validates a graph.
    pub fn new(vertices: Vec<VertexId>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self::from_parts(vertices, edges)?;
        g.validate().into_result()?;
        Ok(g)
    }

    /// Builds a graph without checking the metric-graph invariants; only
    /// referential integrity (ids unique, endpoints known) is enforced.
    pub fn from_parts(mut vertices: Vec<VertexId>, mut edges: Vec<Edge>) -> Result<Self> {
        vertices.sort();
        edges.sort_by_key(|e| e.id);
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate vertex id {}", w[0])));
        }
        if let Some(w) = edges.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidGraph(format!("duplicate edge id {}", w[0].id)));
        }
        let vindex: HashMap<_, _> = vertices.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let eindex: HashMap<_, _> = edges.iter().enumerate().map(|(k, e)| (e.id, k)).collect();
        let mut incident = vec![Vec::new(); vertices.len()];
        for (k, e) in edges.iter().enumerate() {
            for v in [e.init, e.term] {
                let vi = *vindex.get(&v).ok_or(Error::UnknownVertex(v))?;
                if e.init == e.term && v == e.term {
                    continue;
                }
                incident[vi].push(k);
            }
        }
        Ok(MetricGraph {
            vertices,
            edges,
            vindex,
            eindex,
            incident,
            lambda: None,
            meta: Map::new(),
        })
    }

    /// Sets the graph-level conductance bound `Λ ≥ 1`.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn meta(&self) -> &Map<String, Value> {
        &self.meta
    }

    /// Whether the graph is a finite truncation of an infinite one.
    pub fn is_truncation(&self) -> bool {
        self.meta
            .get("truncated")
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_index(&self, v: VertexId) -> Result<usize> {
        self.vindex.get(&v).copied().ok_or(Error::UnknownVertex(v))
    }

    pub fn edge_index(&self, e: EdgeId) -> Result<usize> {
        self.eindex.get(&e).copied().ok_or(Error::UnknownEdge(e))
    }

    pub fn edge(&self, e: EdgeId) -> Result<&Edge> {
        Ok(&self.edges[self.edge_index(e)?])
    }

    /// Indices of the edges incident to the vertex with index `vi`.
    pub fn incident(&self, vi: usize) -> &[usize] {
        &self.incident[vi]
    }

    pub fn degree(&self, v: VertexId) -> Result<usize> {
        Ok(self.incident[self.vertex_index(v)?].len())
    }

    pub(crate) fn degree_at(&self, vi: usize) -> usize {
        self.incident[vi].len()
    }

    /// Endpoint vertex indices `(i(e), j(e))` of the edge with index `ei`.
    pub(crate) fn ends(&self, ei: usize) -> (usize, usize) {
        let e = &self.edges[ei];
        (self.vindex[&e.init], self.vindex[&e.term])
    }

    pub fn total_measure(&self) -> f64 {
        self.edges.iter().map(|e| e.len).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.iter().any(|e| e.weight.is_some())
    }

    /// The conductance bound `Λ`: the declared one, or else the smallest
    /// `Λ ≥ 1` containing every weight value (1 for unweighted graphs).
    pub fn lambda(&self) -> f64 {
        if let Some(l) = self.lambda {
            return l;
        }
        self.edges
            .iter()
            .filter_map(|e| e.weight.as_ref())
            .fold(1.0_f64, |acc, w| acc.max(w.max()).max(1.0 / w.min()))
    }

    pub fn declared_lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Interior point on edge `e` at `offset`, canonicalized.
    pub fn point(&self, edge: EdgeId, offset: f64) -> Result<Point> {
        self.canonical(Point::Interior { edge, offset })
    }

    /// Canonical form of a point: offsets 0 and `l(e)` become vertices.
    pub fn canonical(&self, p: Point) -> Result<Point> {
        match p {
            Point::Vertex(v) => {
                self.vertex_index(v)?;
                Ok(p)
            }
            Point::Interior { edge, offset } => {
                let e = self.edge(edge)?;
                if !(offset >= 0.0 && offset <= e.len) {
                    return Err(Error::OffsetOutOfRange {
                        edge,
                        offset,
                        len: e.len,
                    });
                }
                if offset == 0.0 {
                    Ok(Point::Vertex(e.init))
                } else if offset == e.len {
                    Ok(Point::Vertex(e.term))
                } else {
                    Ok(p)
                }
            }
        }
    }

    pub(crate) fn locate(&self, p: Point) -> Result<Loc> {
        match self.canonical(p)? {
            Point::Vertex(v) => Ok(Loc::Vertex(self.vertex_index(v)?)),
            Point::Interior { edge, offset } => Ok(Loc::Edge {
                e: self.edge_index(edge)?,
                s: offset,
            }),
        }
    }

    pub(crate) fn point_of(&self, loc: Loc) -> Point {
        match loc {
            Loc::Vertex(vi) => Point::Vertex(self.vertices[vi]),
            Loc::Edge { e, s } => Point::Interior {
                edge: self.edges[e].id,
                offset: s,
            },
        }
    }

    /// Checks every standing assumption and reports all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.edges.is_empty() {
            violations.push(Violation::Empty);
        }
        let mut pairs: HashMap<(VertexId, VertexId), EdgeId> = HashMap::new();
        for e in &self.edges {
            if e.init == e.term {
                violations.push(Violation::SelfLoop(e.id));
            } else {
                let key = (e.init.min(e.term), e.init.max(e.term));
                if let Some(prev) = pairs.insert(key, e.id) {
                    violations.push(Violation::ParallelEdges(prev, e.id));
                }
            }
            if !(e.len.is_finite() && e.len > 0.0) {
                violations.push(Violation::BadLength {
                    edge: e.id,
                    len: e.len,
                });
            }
            if let Some(w) = &e.weight {
                if let Some(reason) = w.shape_error() {
                    violations.push(Violation::MalformedWeight { edge: e.id, reason });
                } else if (w.len() - e.len).abs() > 1e-12 * e.len.max(1.0) {
                    violations.push(Violation::MalformedWeight {
                        edge: e.id,
                        reason: format!("profile ends at {} but edge length is {}", w.len(), e.len),
                    });
                } else if let Some(lambda) = self.lambda {
                    for &v in &w.vals {
                        if v < 1.0 / lambda || v > lambda {
                            violations.push(Violation::WeightOutOfBounds {
                                edge: e.id,
                                value: v,
                                lambda,
                            });
                        }
                    }
                }
            }
        }
        let components = self.component_count();
        if components > 1 {
            violations.push(Violation::Disconnected { components });
        }
        ValidationReport { violations }
    }

    fn component_count(&self) -> usize {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &ei in &self.incident[v] {
                    let (a, b) = self.ends(ei);
                    let w = if a == v { b } else { a };
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_length(&self) -> f64 {
        self.edges.iter().map(|e| e.len).fold(f64::INFINITY, f64::min)
    }

    /// Exact bounded-geometry parameters.
    pub fn geometry_params(&self) -> GeometryParams {
        let d = self.max_degree();
        let ell = self.min_length();
        GeometryParams {
            max_degree: d,
            min_length: ell,
            ell_prime: ell / 4.0,
            doubling_constant: 1.0 + d as f64 / 2.0,
            local_dimension: ((d + 2) as f64).log2() - 1.0,
        }
    }

    /// Vertex indices of degree greater than two ("branch vertices").
    pub(crate) fn branch_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| self.incident[v].len() > 2)
    }

    pub(crate) fn next_vertex_id(&self) -> u32 {
        self.vertices.last().map_or(0, |v| v.0 + 1)
    }

    pub(crate) fn next_edge_id(&self) -> u32 {
        self.edges.last().map_or(0, |e| e.id.0 + 1)
    }

    pub(crate) fn into_parts(self) -> (Vec<VertexId>, Vec<Edge>, Option<f64>, Map<String, Value>) {
        (self.vertices, self.edges, self.lambda, self.meta)
    }

    pub(crate) fn rebuild(
        vertices: Vec<VertexId>,
        edges: Vec<Edge>,
        lambda: Option<f64>,
        meta: Map<String, Value>,
    ) -> Result<Self> {
        let mut g = Self::from_parts(vertices, edges)?;
        g.lambda = lambda;
        g.meta = meta;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GraphJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(text)?;
        doc.into_graph()
    }
}

/// On-disk graph document.
#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<u32>,
    edges: Vec<EdgeJson>,
    #[serde(default)]
    meta: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    id: u32,
    i: u32,
    j: u32,
    #[serde(serialize_with = "ser_full_precision")]
    len: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<WeightJson>,
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    breaks: Vec<f64>,
    vals: Vec<f64>,
}

/// Lengths are written with 17 significant digits so they round-trip exactly.
fn ser_full_precision<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format!("{x:.16e}"))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

impl From<&MetricGraph> for GraphJson {
    fn from(g: &MetricGraph) -> Self {
        let mut meta = g.meta.clone();
        if let Some(l) = g.lambda {
            meta.insert("lambda".into(), Value::from(l));
        }
        GraphJson {
            vertices: g.vertices.iter().map(|v| v.0).collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeJson {
                    id: e.id.0,
                    i: e.init.0,
                    j: e.term.0,
                    len: e.len,
                    weight: e.weight.as_ref().map(|w| WeightJson {
                        breaks: w.breaks.clone(),
                        vals: w.vals.clone(),
                    }),
                })
                .collect(),
            meta,
        }
    }
}

impl GraphJson {
    fn into_graph(self) -> Result<MetricGraph> {
        let vertices: BTreeSet<u32> = self.vertices.iter().copied().collect();
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidGraph("duplicate vertex ids".into()));
        }
        let edges = self
            .edges
            .into_iter()
            .map(|e| {
                let mut edge = Edge::new(e.id, e.i, e.j, e.len);
                edge.weight = e.weight.map(|w| WeightProfile {
                    breaks: w.breaks,
                    vals: w.vals,
                });
                edge
            })
            .collect();
        let lambda = self.meta.get("lambda").and_then(Value::as_f64);
        let mut meta = self.meta;
        meta.remove("lambda");
        let g = MetricGraph::rebuild(vertices.into_iter().map(VertexId).collect(), edges, lambda, meta)?;
        g.validate().into_result()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(len: f64) -> MetricGraph {
        MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![Edge::new(0, 0, 1, len)]).unwrap()
    }

    #[test]
    fn single_edge_is_valid() {
        let g = interval(1.0);
        assert!(g.validate().is_ok());
        assert_eq!(g.total_measure(), 1.0);
    }

    #[test]
    fn self_loop_reported() {
        let g = MetricGraph::from_parts(vec![VertexId(0)], vec![Edge::new(0, 0, 0, 1.0)]).unwrap();
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().contains("self-loop")));
    }

    #[test]
    fn disjoint_edges_reported_disconnected() {
        let g = MetricGraph::from_parts(
            (0..4).map(VertexId).collect(),
            vec![Edge::new(0, 0, 1, 1.0), Edge::new(1, 2, 3, 1.0)],
        )
        .unwrap();
        let report = g.validate();
        assert_eq!(report.violations, vec![Violation::Disconnected { components: 2 }]);
        assert!(report.violations[0].to_string().contains("disconnected"));
    }

    #[test]
    fn parallel_edges_and_bad_lengths_reported() {
        let g = MetricGraph::from_parts(
            (0..2).map(VertexId).collect(),
            vec![Edge::new(0, 0, 1, 1.0), Edge::new(1, 1, 0, -2.0)],
        )
        .unwrap();
        let v = g.validate().violations;
        assert!(v.contains(&Violation::ParallelEdges(EdgeId(0), EdgeId(1))));
        assert!(v.iter().any(|x| matches!(x, Violation::BadLength { .. })));
        assert!(MetricGraph::new(g.vertices().to_vec(), g.edges().to_vec()).is_err());
    }

    #[test]
    fn weight_bounds_checked_against_lambda() {
        let e = Edge::new(0, 0, 1, 1.0).with_weight(WeightProfile::constant(1.0, 3.0));
        let g = MetricGraph::from_parts(vec![VertexId(0), VertexId(1)], vec![e])
            .unwrap()
            .with_lambda(2.0);
        assert!(matches!(
            g.validate().violations[0],
            Violation::WeightOutOfBounds { .. }
        ));
        assert_eq!(g.lambda(), 2.0);
    }

    #[test]
    fn canonical_points() {
        let g = interval(2.0);
        assert_eq!(g.point(EdgeId(0), 0.0).unwrap(), Point::vertex(0));
        assert_eq!(g.point(EdgeId(0), 2.0).unwrap(), Point::vertex(1));
        assert_eq!(g.point(EdgeId(0), 0.5).unwrap(), Point::on_edge(0, 0.5));
        assert!(g.point(EdgeId(0), 2.5).is_err());
        assert!(g.point(EdgeId(7), 0.5).is_err());
    }

    #[test]
    fn point_literals_parse() {
        assert_eq!("v:3".parse::<Point>().unwrap(), Point::vertex(3));
        assert_eq!("e:1:0.5".parse::<Point>().unwrap(), Point::on_edge(1, 0.5));
        assert!("x:1".parse::<Point>().is_err());
        assert_eq!(Point::on_edge(1, 0.25).to_string(), "e:1:0.25");
    }

    #[test]
    fn weight_profile_integrals() {
        let w = WeightProfile::new(vec![0.0, 0.5, 1.0], vec![1.0, 4.0]).unwrap();
        assert!((w.integral(0.0, 1.0) - 2.5).abs() < 1e-15);
        assert!((w.intrinsic_length(0.0, 1.0) - 0.75).abs() < 1e-15);
        let s = w.slice(0.25, 0.75);
        assert_eq!(s.breaks, vec![0.0, 0.25, 0.5]);
        assert_eq!(s.vals, vec![1.0, 4.0]);
        assert!(WeightProfile::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn json_round_trip_keeps_lengths_exact() {
        let e = Edge::new(0, 0, 1, 0.1 + 0.2).with_weight(WeightProfile::constant(0.1 + 0.2, 1.5));
        let g = MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![e])
            .unwrap()
            .with_lambda(2.0);
        let text = g.to_json().unwrap();
        assert!(text.contains("3.0000000000000004e-1"));
        let back = MetricGraph::from_json(&text).unwrap();
        assert_eq!(back.edges()[0].len, 0.1 + 0.2);
        assert_eq!(back.declared_lambda(), Some(2.0));
        assert_eq!(back.edges(), g.edges());
    }
}
