//! Example graph families: generalized stars, finite boxes of ℤ^d (optionally
//! with perturbed lengths), rooted trees, and length normalization by
//! subdivision.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeId, MetricGraph, Point, VertexId, WeightProfile};

/// Finite core of a generalized star: edges `(i, j, len)` between vertex ids.
#[derive(Clone, Debug, Default)]
pub struct StarCore {
    pub edges: Vec<(u32, u32, f64)>,
}

/// A star with `ray_count` pendant rays of length `ray_length`.
///
/// Without a core the rays share one center vertex (id 0). With a core, the
/// rays are attached round-robin to the core vertices in increasing id order.
/// Rays stand in for half-lines truncated at `ray_length`.
pub fn gen_star(ray_count: usize, ray_length: f64, core: Option<&StarCore>) -> Result<MetricGraph> {
    if ray_count < 1 {
        return Err(Error::InvalidParameter("a star needs at least one ray".into()));
    }
    if !(ray_length > 0.0 && ray_length.is_finite()) {
        return Err(Error::InvalidParameter(format!("nonpositive ray length {ray_length}")));
    }
    let mut edges = Vec::new();
    let mut attach: Vec<u32> = Vec::new();
    match core {
        Some(core) if !core.edges.is_empty() => {
            for (k, &(i, j, len)) in core.edges.iter().enumerate() {
                if !(len > 0.0 && len.is_finite()) {
                    return Err(Error::InvalidParameter(format!("nonpositive core length {len}")));
                }
                edges.push(Edge::new(k as u32, i, j, len));
                attach.push(i);
                attach.push(j);
            }
            attach.sort_unstable();
            attach.dedup();
        }
        _ => attach.push(0),
    }
    let mut next_v = attach.iter().max().unwrap() + 1;
    let mut next_e = edges.len() as u32;
    let mut vertices: Vec<u32> = attach.clone();
    for r in 0..ray_count {
        let hub = attach[r % attach.len()];
        vertices.push(next_v);
        edges.push(Edge::new(next_e, hub, next_v, ray_length));
        next_v += 1;
        next_e += 1;
    }
    let g = MetricGraph::new(vertices.into_iter().map(VertexId).collect(), edges)?;
    Ok(g.with_meta("generator", json!("star"))
        .with_meta("truncated", json!(true))
        .with_meta("ray_length", json!(ray_length)))
}

/// Edge lengths for lattice boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatticeLengths {
    Unit,
    /// Lengths drawn i.i.d. uniform in `[lo, hi]` from a seeded generator.
    Uniform { lo: f64, hi: f64, seed: u64 },
}

/// The box `[0, n]^d` of ℤ^d, `d ∈ {1, 2}`.
///
/// Vertex `(a, b)` has id `a + b (n+1)`; coordinates are kept in the `coords`
/// annotation. Horizontal edges come first, each oriented towards increasing
/// coordinate.
pub fn gen_lattice(dim: usize, n: usize, lengths: LatticeLengths) -> Result<MetricGraph> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::InvalidParameter(format!("lattice dimension {dim} not supported (1 or 2)")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("lattice side must be at least 2".into()));
    }
    let mut sample: Box<dyn FnMut() -> f64> = match lengths {
        LatticeLengths::Unit => Box::new(|| 1.0),
        LatticeLengths::Uniform { lo, hi, seed } => {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad length range [{lo}, {hi}]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new(move || if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        }
    };
    let side = n as u32 + 1;
    let rows = if dim == 2 { side } else { 1 };
    let id = |a: u32, b: u32| a + b * side;
    let mut edges = Vec::new();
    for b in 0..rows {
        for a in 0..n as u32 {
            edges.push(Edge::new(edges.len() as u32, id(a, b), id(a + 1, b), sample()));
        }
    }
    if dim == 2 {
        for b in 0..n as u32 {
            for a in 0..side {
                edges.push(Edge::new(edges.len() as u32, id(a, b), id(a, b + 1), sample()));
            }
        }
    }
    let vertices: Vec<VertexId> = (0..side * rows).map(VertexId).collect();
    let coords: Vec<Value> = (0..rows)
        .flat_map(|b| (0..side).map(move |a| if dim == 2 { json!([a, b]) } else { json!([a]) }))
        .collect();
    let g = MetricGraph::new(vertices, edges)?;
    Ok(g.with_meta("generator", json!("lattice"))
        .with_meta("truncated", json!(true))
        .with_meta("dimension", json!(dim))
        .with_meta("side", json!(n))
        .with_meta("coords", Value::Array(coords)))
}

/// Copy of `g` with random piecewise-constant conductances: each edge is
/// cut into `pieces` equal parts whose values are drawn log-uniformly from
/// `[1/Λ, Λ]`. The result declares `Λ`.
pub fn random_weights(g: &MetricGraph, lambda: f64, pieces: usize, seed: u64) -> Result<MetricGraph> {
    if !(lambda >= 1.0 && lambda.is_finite()) || pieces == 0 {
        return Err(Error::InvalidParameter(format!("need Λ ≥ 1 and pieces ≥ 1, got {lambda}, {pieces}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = lambda.ln();
    let (vertices, edges, _, meta) = g.clone().into_parts();
    let edges = edges
        .into_iter()
        .map(|e| {
            let breaks: Vec<f64> = (0..=pieces).map(|k| e.len * k as f64 / pieces as f64).collect();
            let vals: Vec<f64> = (0..pieces)
                .map(|_| if span > 0.0 { rng.gen_range(-span..=span).exp().clamp(1.0 / lambda, lambda) } else { 1.0 })
                .collect();
            Ok(e.with_weight(WeightProfile::new(breaks, vals)?))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricGraph::rebuild(vertices, edges, Some(lambda), meta)
}

/// Rooted `branching`-ary tree of the given depth; the root has id 0 and ids
/// increase level by level.
pub fn gen_tree(branching: usize, depth: usize, edge_length: f64) -> Result<MetricGraph> {
    if branching < 2 {
        return Err(Error::InvalidParameter("tree branching must be at least 2".into()));
    }
    if depth < 1 {
        return Err(Error::InvalidParameter("tree depth must be at least 1".into()));
    }
    if !(edge_length > 0.0 && edge_length.is_finite()) {
        return Err(Error::InvalidParameter(format!("nonpositive edge length {edge_length}")));
    }
    let mut vertices = vec![VertexId(0)];
    let mut levels = vec![0u32];
    let mut edges = Vec::new();
    let mut frontier = vec![0u32];
    for level in 1..=depth {
        let mut next = Vec::with_capacity(frontier.len() * branching);
        for &parent in &frontier {
            for _ in 0..branching {
                let child = vertices.len() as u32;
                vertices.push(VertexId(child));
                levels.push(level as u32);
                edges.push(Edge::new(edges.len() as u32, parent, child, edge_length));
                next.push(child);
            }
        }
        frontier = next;
    }
    let g = MetricGraph::new(vertices, edges)?;
    Ok(g.with_meta("generator", json!("tree"))
        .with_meta("truncated", json!(true))
        .with_meta("depth", json!(levels)))
}

/// Result of [`subdivide_with_map`]: the new graph plus, for every original
/// edge, its pieces as `(edge id, start offset in the original edge)`.
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub graph: MetricGraph,
    pub pieces: BTreeMap<EdgeId, Vec<(EdgeId, f64)>>,
}

impl Subdivision {
    /// Where a point of the original graph lives in the subdivided one.
    pub fn map_point(&self, p: Point) -> Result<Point> {
        match p {
            Point::Vertex(_) => self.graph.canonical(p),
            Point::Interior { edge, offset } => {
                let pieces = self.pieces.get(&edge).ok_or(Error::UnknownEdge(edge))?;
                let k = pieces
                    .iter()
                    .rposition(|&(_, start)| start <= offset)
                    .unwrap_or(0);
                let (id, start) = pieces[k];
                self.graph.point(id, offset - start)
            }
        }
    }
}

/// Splits every edge longer than `cap` into equal pieces of length `≤ cap`
/// joined by new degree-2 vertices.
pub fn subdivide_long_edges(g: &MetricGraph, cap: f64) -> Result<MetricGraph> {
    Ok(subdivide_with_map(g, cap)?.graph)
}

pub fn subdivide_with_map(g: &MetricGraph, cap: f64) -> Result<Subdivision> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("subdivision cap {cap} must be positive")));
    }
    let mut next_v = g.next_vertex_id();
    let mut next_e = g.next_edge_id();
    let (mut vertices, old_edges, lambda, meta) = g.clone().into_parts();
    let mut edges = Vec::with_capacity(old_edges.len());
    let mut pieces = BTreeMap::new();
    for e in old_edges {
        let k = (e.len / cap).ceil().max(1.0) as usize;
        if k == 1 {
            pieces.insert(e.id, vec![(e.id, 0.0)]);
            edges.push(e);
            continue;
        }
        let step = e.len / k as f64;
        let mut chain = vec![e.init];
        for _ in 1..k {
            chain.push(VertexId(next_v));
            vertices.push(VertexId(next_v));
            next_v += 1;
        }
        chain.push(e.term);
        let mut list = Vec::with_capacity(k);
        for p in 0..k {
            let start = p as f64 * step;
            let end = if p + 1 == k { e.len } else { (p + 1) as f64 * step };
            let id = if p == 0 {
                e.id
            } else {
                next_e += 1;
                EdgeId(next_e - 1)
            };
            let mut piece = Edge {
                id,
                init: chain[p],
                term: chain[p + 1],
                len: end - start,
                weight: None,
            };
            if let Some(w) = &e.weight {
                piece.weight = Some(w.slice(start, end));
            }
            list.push((id, start));
            edges.push(piece);
        }
        pieces.insert(e.id, list);
    }
    let graph = MetricGraph::rebuild(vertices, edges, lambda, meta)?;
    graph.validate().into_result()?;
    Ok(Subdivision { graph, pieces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_counts() {
        let g = gen_star(3, 1.0, None).unwrap();
        assert_eq!(g.degree(VertexId(0)).unwrap(), 3);
        assert_eq!(g.total_measure(), 3.0);
        assert!(g.validate().is_ok());
        assert!(g.is_truncation());

        let g = gen_star(1, 2.0, None).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.total_measure(), 2.0);
    }

    #[test]
    fn star_with_core_distributes_rays() {
        let core = StarCore {
            edges: vec![(0, 1, 0.5)],
        };
        let g = gen_star(4, 1.0, Some(&core)).unwrap();
        assert_eq!(g.total_measure(), 4.5);
        assert_eq!(g.max_degree(), 3);
        assert_eq!(g.degree(VertexId(0)).unwrap(), 3);
        assert_eq!(g.degree(VertexId(1)).unwrap(), 3);
    }

    #[test]
    fn star_rejects_bad_input() {
        assert!(gen_star(0, 1.0, None).is_err());
        assert!(gen_star(3, 0.0, None).is_err());
    }

    #[test]
    fn lattice_counts() {
        let g = gen_lattice(2, 2, LatticeLengths::Unit).unwrap();
        assert_eq!(g.vertex_count(), 9);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.total_measure(), 12.0);
        assert_eq!(g.max_degree(), 4);

        let g = gen_lattice(1, 5, LatticeLengths::Unit).unwrap();
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.total_measure(), 5.0);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn lattice_perturbed_lengths_in_range() {
        let g = gen_lattice(2, 4, LatticeLengths::Uniform { lo: 0.5, hi: 1.5, seed: 7 }).unwrap();
        let lens: Vec<f64> = g.edges().iter().map(|e| e.len).collect();
        assert!(lens.iter().all(|&l| (0.5..=1.5).contains(&l)));
        let ratio = lens.iter().cloned().fold(0.0, f64::max) / lens.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ratio <= 3.0);
        let again = gen_lattice(2, 4, LatticeLengths::Uniform { lo: 0.5, hi: 1.5, seed: 7 }).unwrap();
        assert_eq!(again.edges(), g.edges());
    }

    #[test]
    fn lattice_rejects_bad_input() {
        assert!(gen_lattice(3, 4, LatticeLengths::Unit).is_err());
        assert!(gen_lattice(2, 1, LatticeLengths::Unit).is_err());
        assert!(gen_lattice(2, 4, LatticeLengths::Uniform { lo: 0.0, hi: 1.0, seed: 0 }).is_err());
    }

    #[test]
    fn tree_counts() {
        let g = gen_tree(2, 3, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 15);
        assert_eq!(g.edge_count(), 14);
        assert_eq!(g.total_measure(), 14.0);
        assert_eq!(g.edge_count(), g.vertex_count() - 1);
        assert_eq!(g.max_degree(), 3);

        let g = gen_tree(2, 1, 1.0).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degree(VertexId(0)).unwrap(), 2);

        let g = gen_tree(3, 2, 0.5).unwrap();
        assert_eq!(g.total_measure(), 6.0);
        assert!(gen_tree(1, 2, 1.0).is_err());
    }

    #[test]
    fn random_weights_respect_lambda() {
        let g = gen_lattice(2, 3, LatticeLengths::Unit).unwrap();
        let w = random_weights(&g, 2.0, 3, 9).unwrap();
        assert!(w.is_weighted() && w.validate().is_ok());
        assert_eq!(w.declared_lambda(), Some(2.0));
        for e in w.edges() {
            let p = e.weight.as_ref().unwrap();
            assert!(p.min() >= 0.5 && p.max() <= 2.0);
            assert_eq!(p.vals.len(), 3);
        }
        assert_eq!(random_weights(&g, 2.0, 3, 9).unwrap().edges(), w.edges());
    }

    #[test]
    fn subdivision_caps_lengths() {
        let g = gen_lattice(1, 2, LatticeLengths::Unit).unwrap();
        let path5 = MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![Edge::new(0, 0, 1, 5.0)]).unwrap();
        let s = subdivide_long_edges(&path5, 2.0).unwrap();
        assert_eq!(s.edge_count(), 3);
        assert!(s.edges().iter().all(|e| e.len <= 2.0));
        assert!((s.total_measure() - 5.0).abs() < 1e-15);
        assert!(s.vertices()[2..].iter().all(|&v| s.degree(v).unwrap() == 2));

        let same = subdivide_long_edges(&g, 1.0).unwrap();
        assert_eq!(same.edges(), g.edges());
    }

    #[test]
    fn subdivision_maps_points() {
        let g = gen_star(3, 1.0, None).unwrap();
        let sub = subdivide_with_map(&g, 0.4).unwrap();
        assert_eq!(sub.graph.edge_count(), 9);
        let p = sub.map_point(Point::on_edge(1, 0.9)).unwrap();
        match p {
            Point::Interior { offset, .. } => assert!((offset - (0.9 - 2.0 / 3.0)).abs() < 1e-12),
            _ => panic!("expected interior point"),
        }
    }
}
