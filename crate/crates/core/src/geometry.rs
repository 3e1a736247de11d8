//! Exact metric geometry: path distance, intrinsic distance of a weighted
//! form, balls and their volumes, doubling scans and the diameter.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeId, Loc, MetricGraph, Point, VertexId};

/// Which line element measures edge length.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Metric {
    /// The path metric `d`, equal to the intrinsic metric of the unweighted form.
    Path,
    /// The intrinsic metric of the weighted form, line element `c_e^{-1/2} ds`.
    Intrinsic,
}

impl Metric {
    fn segment(self, e: &Edge, a: f64, b: f64) -> f64 {
        match self {
            Metric::Path => (b - a).abs(),
            Metric::Intrinsic => e.intrinsic_length(a, b),
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    cost: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, ties to the smaller vertex index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(g: &MetricGraph, seeds: &[(usize, f64)], metric: Metric) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.vertex_count()];
    let mut heap = BinaryHeap::new();
    for &(v, c) in seeds {
        if c < dist[v] {
            dist[v] = c;
            heap.push(Entry { cost: c, vertex: v });
        }
    }
    while let Some(Entry { cost, vertex }) = heap.pop() {
        if cost > dist[vertex] {
            continue;
        }
        for &ei in g.incident(vertex) {
            let e = &g.edges()[ei];
            let (a, b) = g.ends(ei);
            let next = if a == vertex { b } else { a };
            let c = cost + metric.segment(e, 0.0, e.len);
            if c < dist[next] {
                dist[next] = c;
                heap.push(Entry { cost: c, vertex: next });
            }
        }
    }
    dist
}

/// Distances from one source point to every vertex; evaluates the distance
/// to arbitrary points in O(1).
#[derive(Clone, Debug)]
pub struct DistanceField<'g> {
    graph: &'g MetricGraph,
    source: Loc,
    metric: Metric,
    to_vertex: Vec<f64>,
}

impl<'g> DistanceField<'g> {
    pub fn new(g: &'g MetricGraph, x: Point) -> Result<Self> {
        Self::with_metric(g, x, Metric::Path)
    }

    pub fn with_metric(g: &'g MetricGraph, x: Point, metric: Metric) -> Result<Self> {
        let source = g.locate(x)?;
        let seeds = match source {
            Loc::Vertex(v) => vec![(v, 0.0)],
            Loc::Edge { e, s } => {
                let edge = &g.edges()[e];
                let (i, j) = g.ends(e);
                vec![
                    (i, metric.segment(edge, 0.0, s)),
                    (j, metric.segment(edge, s, edge.len)),
                ]
            }
        };
        let to_vertex = dijkstra(g, &seeds, metric);
        Ok(DistanceField {
            graph: g,
            source,
            metric,
            to_vertex,
        })
    }

    pub fn source(&self) -> Point {
        self.graph.point_of(self.source)
    }

    /// Distance to the vertex with index `vi`.
    pub fn vertex(&self, vi: usize) -> f64 {
        self.to_vertex[vi]
    }

    /// Distance to the point at offset `t` of the edge with index `ei`.
    pub fn at(&self, ei: usize, t: f64) -> f64 {
        let e = &self.graph.edges()[ei];
        let (i, j) = self.graph.ends(ei);
        let m = self.metric;
        let mut d = (self.to_vertex[i] + m.segment(e, 0.0, t)).min(self.to_vertex[j] + m.segment(e, t, e.len));
        if let Loc::Edge { e: se, s } = self.source {
            if se == ei {
                d = d.min(m.segment(e, s, t));
            }
        }
        d
    }

    pub fn to(&self, y: Point) -> Result<f64> {
        let d = match self.graph.locate(y)? {
            Loc::Vertex(v) => self.to_vertex[v],
            Loc::Edge { e, s } => self.at(e, s),
        };
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Unreachable)
        }
    }

    /// Breakpoints in `(0, l)` of the piecewise-affine map `t ↦ d(x, (e, t))`.
    pub(crate) fn kinks(&self, ei: usize) -> Vec<f64> {
        let e = &self.graph.edges()[ei];
        let (i, j) = self.graph.ends(ei);
        let (di, dj) = (self.to_vertex[i], self.to_vertex[j]);
        let mut out = Vec::new();
        let mut push = |t: f64| {
            if t > 0.0 && t < e.len {
                out.push(t);
            }
        };
        push((dj + e.len - di) / 2.0);
        if let Loc::Edge { e: se, s } = self.source {
            if se == ei {
                push(s);
                // |t - s| meets d_i + t and d_j + l - t
                push((s - di) / 2.0);
                push((s + dj + e.len) / 2.0);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Exact path distance `d(x, y)`.
pub fn distance(g: &MetricGraph, x: Point, y: Point) -> Result<f64> {
    DistanceField::new(g, x)?.to(y)
}

/// Intrinsic distance `ρ̃(x, y)` of the weighted form.
pub fn weighted_distance(g: &MetricGraph, x: Point, y: Point) -> Result<f64> {
    if !g.is_weighted() {
        return Err(Error::MissingWeights);
    }
    DistanceField::with_metric(g, x, Metric::Intrinsic)?.to(y)
}

/// Makes an interior point a degree-2 vertex. The edge keeps its id for the
/// piece `[0, s]`; the piece `[s, l]` gets a fresh id.
pub fn split_at_point(g: &MetricGraph, x: Point) -> Result<(MetricGraph, VertexId)> {
    match g.canonical(x)? {
        Point::Vertex(v) => Ok((g.clone(), v)),
        Point::Interior { edge, offset } => {
            let new_v = VertexId(g.next_vertex_id());
            let new_e = EdgeId(g.next_edge_id());
            let (mut vertices, mut edges, lambda, meta) = g.clone().into_parts();
            vertices.push(new_v);
            let k = edges.iter().position(|e| e.id == edge).unwrap();
            let old = edges[k].clone();
            let mut tail = Edge {
                id: new_e,
                init: new_v,
                term: old.term,
                len: old.len - offset,
                weight: None,
            };
            let head = &mut edges[k];
            head.term = new_v;
            head.len = offset;
            if let Some(w) = &old.weight {
                head.weight = Some(w.slice(0.0, offset));
                tail.weight = Some(w.slice(offset, old.len));
            }
            edges.push(tail);
            Ok((MetricGraph::rebuild(vertices, edges, lambda, meta)?, new_v))
        }
    }
}

/// Covered sub-intervals of one edge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub edge: EdgeId,
    pub intervals: Vec<(f64, f64)>,
}

/// Exact geometry of a closed ball `B_r(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct BallGeometry {
    #[serde(serialize_with = "ser_point")]
    pub center: Point,
    pub radius: f64,
    /// Sorted by edge id; edges with no coverage are omitted.
    pub covered: Vec<Coverage>,
    pub volume: f64,
}

fn ser_point<S: serde::Serializer>(p: &Point, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

impl BallGeometry {
    pub fn intervals_on(&self, edge: EdgeId) -> &[(f64, f64)] {
        self.covered
            .iter()
            .find(|c| c.edge == edge)
            .map_or(&[], |c| c.intervals.as_slice())
    }

    /// Number of interval endpoints lying strictly inside an edge; these are
    /// where the ball grows as the radius increases.
    pub fn moving_endpoints(&self, g: &MetricGraph) -> usize {
        self.covered
            .iter()
            .map(|c| {
                let len = g.edge(c.edge).map(|e| e.len).unwrap_or(0.0);
                c.intervals
                    .iter()
                    .map(|&(a, b)| (a > 0.0) as usize + (b < len) as usize)
                    .sum::<usize>()
            })
            .sum()
    }
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.retain(|&(a, b)| b > a);
    iv.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Covered intervals of edge `ei` for the ball of radius `r` around the
/// source of `field`.
pub(crate) fn ball_intervals(field: &DistanceField<'_>, ei: usize, r: f64) -> Vec<(f64, f64)> {
    let g = field.graph;
    let e = &g.edges()[ei];
    let (i, j) = g.ends(ei);
    let l = e.len;
    let a = (r - field.vertex(i)).clamp(0.0, l);
    let b = (r - field.vertex(j)).clamp(0.0, l);
    let mut iv = vec![(0.0, a), (l - b, l)];
    if let Loc::Edge { e: se, s } = field.source {
        if se == ei {
            iv.push(((s - r).max(0.0), (s + r).min(l)));
        }
    }
    merge(iv)
}

/// The ball `B_r(x)` with its exact volume.
pub fn ball_geometry(g: &MetricGraph, x: Point, r: f64) -> Result<BallGeometry> {
    let field = DistanceField::new(g, x)?;
    ball_from_field(&field, r)
}

pub fn ball_from_field(field: &DistanceField<'_>, r: f64) -> Result<BallGeometry> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative radius {r}")));
    }
    let g = field.graph;
    let mut covered = Vec::new();
    let mut volume = 0.0;
    for (ei, e) in g.edges().iter().enumerate() {
        let intervals = ball_intervals(field, ei, r);
        if intervals.is_empty() {
            continue;
        }
        volume += intervals.iter().map(|(a, b)| b - a).sum::<f64>();
        covered.push(Coverage { edge: e.id, intervals });
    }
    Ok(BallGeometry {
        center: field.source(),
        radius: r,
        covered,
        volume,
    })
}

/// Which bound a doubling row was judged against.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublingBound {
    /// `d_v/2 + 1`, valid when at most one branch vertex is nearby.
    Local,
    /// `c_D^{max(2, 8r/ℓ')}` from chaining the covering estimate.
    Chained,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingRow {
    #[serde(serialize_with = "ser_point")]
    pub center: Point,
    pub r: f64,
    pub vol_r: f64,
    pub vol_2r: f64,
    pub ratio: f64,
    /// Number of vertices of degree > 2 within distance `2r`.
    pub branch_vertices: usize,
    /// Whether a degree-1 vertex lies within distance `2r`.
    pub touches_leaf: bool,
    pub bound_kind: DoublingBound,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingScan {
    pub rows: Vec<DoublingRow>,
    pub max_ratio: f64,
    /// The uniform constant `c_D = 1 + D/2` of the graph.
    pub doubling_constant: f64,
    /// `2^ν` for the local dimension ν.
    pub dimension_bound: f64,
}

impl DoublingScan {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("center,r,vol_r,vol_2r,ratio,bound,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{}",
                r.center, r.r, r.vol_r, r.vol_2r, r.ratio, r.bound, r.pass
            );
        }
        out
    }
}

/// Tabulates `m(B_2r(x)) / m(B_r(x))`.
///
/// A row is judged against `d_v/2 + 1` when `B_2r(x)` holds at most one
/// vertex of degree > 2 and no degree-1 vertex (`d_v = 2` when there is no
/// branch vertex); otherwise against the chained covering bound.
pub fn doubling_scan(g: &MetricGraph, centers: &[Point], radii: &[f64]) -> Result<DoublingScan> {
    let params = g.geometry_params();
    let c_d = params.doubling_constant;
    let mut rows = Vec::with_capacity(centers.len() * radii.len());
    for &x in centers {
        let field = DistanceField::new(g, x)?;
        for &r in radii {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("doubling radius {r} must be positive")));
            }
            let vol_r = ball_from_field(&field, r)?.volume;
            let vol_2r = ball_from_field(&field, 2.0 * r)?.volume;
            let near = |vi: usize| field.vertex(vi) <= 2.0 * r;
            let branches: Vec<usize> = g.branch_vertices().filter(|&v| near(v)).collect();
            let touches_leaf = (0..g.vertex_count()).any(|v| g.degree_at(v) == 1 && near(v));
            let ratio = vol_2r / vol_r;
            let (bound_kind, bound) = if branches.len() <= 1 && !touches_leaf {
                let dv = branches.first().map_or(2, |&v| g.degree_at(v));
                (DoublingBound::Local, dv as f64 / 2.0 + 1.0)
            } else {
                let exponent = (8.0 * r / params.ell_prime).max(2.0);
                (DoublingBound::Chained, c_d.powf(exponent))
            };
            rows.push(DoublingRow {
                center: field.source(),
                r,
                vol_r,
                vol_2r,
                ratio,
                branch_vertices: branches.len(),
                touches_leaf,
                bound_kind,
                bound,
                pass: ratio <= bound * (1.0 + 1e-12),
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DoublingScan {
        rows,
        max_ratio,
        doubling_constant: c_d,
        dimension_bound: 2f64.powf(params.local_dimension),
    })
}

/// All-pairs vertex distances (one shortest-path search per vertex).
pub(crate) fn vertex_distance_matrix(g: &MetricGraph) -> Vec<Vec<f64>> {
    (0..g.vertex_count())
        .map(|v| dijkstra(g, &[(v, 0.0)], Metric::Path))
        .collect()
}

/// `sup d(x, y)` over all points of a finite graph.
///
/// For two distinct edges the farthest pair is found in closed form: with
/// `A(s), B(s)` the distances from `(e, s)` to the ends of `f`, the farthest
/// point of `f` is at distance `(A + B + l_f)/2`, and `A + B` is concave
/// piecewise-affine in `s` with at most two kinks.
pub fn diameter(g: &MetricGraph) -> Result<f64> {
    if g.validate().violations.iter().any(|v| matches!(v, crate::graph::Violation::Disconnected { .. })) {
        return Err(Error::Unreachable);
    }
    let dm = vertex_distance_matrix(g);
    let mut best: f64 = 0.0;
    let edges = g.edges();
    for (e, ee) in edges.iter().enumerate() {
        let (ie, je) = g.ends(e);
        let le = ee.len;
        best = best.max((le + dm[ie][je]) / 2.0);
        for (f, ef) in edges.iter().enumerate() {
            if f == e {
                continue;
            }
            let (i_f, j_f) = g.ends(f);
            let lf = ef.len;
            let to = |s: f64, w: usize| (s + dm[ie][w]).min(le - s + dm[je][w]);
            let kink = |w: usize| ((le + dm[je][w] - dm[ie][w]) / 2.0).clamp(0.0, le);
            for s in [0.0, le, kink(i_f), kink(j_f)] {
                best = best.max((to(s, i_f) + to(s, j_f) + lf) / 2.0);
            }
        }
    }
    Ok(best)
}
