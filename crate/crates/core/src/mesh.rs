//! Piecewise-linear meshes on metric graphs, glued at vertices, with exact
//! integration of interpolants over the whole graph or over a ball.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::BallGeometry;
use crate::graph::{EdgeId, Loc, MetricGraph, Point};

/// One run of consecutive nodes along an edge.
#[derive(Clone, Debug)]
pub struct Segment {
    pub edge: EdgeId,
    pub(crate) edge_index: usize,
    pub offsets: Vec<f64>,
    pub dofs: Vec<usize>,
}

impl Segment {
    pub fn element_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Where a sub-mesh DOF sits in its parent mesh.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum ParentDof {
    Node(usize),
    /// Convex combination `(1 - w)·left + w·right`.
    Between { left: usize, right: usize, w: f64 },
}

#[derive(Clone, Debug)]
pub struct Mesh {
    graph: Arc<MetricGraph>,
    segments: Vec<Segment>,
    dof_points: Vec<Point>,
    boundary: Vec<bool>,
    parent: Option<Vec<ParentDof>>,
}

fn element_count(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

fn uniform(a: f64, b: f64, h: f64, out: &mut Vec<f64>) {
    let n = element_count(b - a, h);
    for k in 1..n {
        out.push(a + (b - a) * k as f64 / n as f64);
    }
    out.push(b);
}

/// Mesh with `max(1, ceil(l/h))` uniform elements per edge.
pub fn build_mesh(g: &MetricGraph, h: f64) -> Result<Mesh> {
    build_mesh_with_nodes(g, h, &[])
}

/// Like [`build_mesh`], but every interior point in `forced` becomes a node;
/// each edge is meshed uniformly between consecutive forced offsets.
pub fn build_mesh_with_nodes(g: &MetricGraph, h: f64, forced: &[Point]) -> Result<Mesh> {
    check_step(h)?;
    let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); g.edge_count()];
    for &p in forced {
        if let Loc::Edge { e, s } = g.locate(p)? {
            cuts[e].push(s);
        }
    }
    let pieces = g
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            let mut c = std::mem::take(&mut cuts[ei]);
            c.push(e.len);
            c.sort_by(f64::total_cmp);
            c.dedup();
            let mut nodes = vec![0.0];
            let mut a = 0.0;
            for b in c {
                uniform(a, b, h, &mut nodes);
                a = b;
            }
            (ei, nodes)
        })
        .collect();
    Mesh::from_pieces(Arc::new(g.clone()), pieces, None)
}

/// Uniform mesh of the covered intervals of a ball; cut points are nodes.
pub fn build_ball_mesh(g: &MetricGraph, ball: &BallGeometry, h: f64) -> Result<Mesh> {
    check_step(h)?;
    if !(ball.volume > 0.0) {
        return Err(Error::EmptyRegion(format!("ball of radius {} has no volume", ball.radius)));
    }
    let mut pieces = Vec::new();
    for c in &ball.covered {
        let ei = g.edge_index(c.edge)?;
        for &(a, b) in &c.intervals {
            let mut nodes = vec![a];
            uniform(a, b, h, &mut nodes);
            pieces.push((ei, nodes));
        }
    }
    Mesh::from_pieces(Arc::new(g.clone()), pieces, None)
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mesh step {h} must be positive")))
    }
}

impl Mesh {
    fn from_pieces(
        graph: Arc<MetricGraph>,
        mut pieces: Vec<(usize, Vec<f64>)>,
        parent: Option<Vec<(usize, usize, ParentDof)>>,
    ) -> Result<Self> {
        pieces.sort_by(|p, q| p.0.cmp(&q.0).then(p.1[0].total_cmp(&q.1[0])));
        let nv = graph.vertex_count();
        let mut touches = vec![0usize; nv];
        for (ei, nodes) in &pieces {
            let (i, j) = graph.ends(*ei);
            let len = graph.edges()[*ei].len;
            if nodes[0] == 0.0 {
                touches[i] += 1;
            }
            if *nodes.last().unwrap() == len {
                touches[j] += 1;
            }
        }
        let mut vertex_dof = vec![usize::MAX; nv];
        let mut dof_points = Vec::new();
        let mut boundary = Vec::new();
        for v in 0..nv {
            if touches[v] > 0 {
                vertex_dof[v] = dof_points.len();
                dof_points.push(Point::Vertex(graph.vertices()[v]));
                boundary.push(touches[v] < graph.degree_at(v));
            }
        }
        let mut segments = Vec::with_capacity(pieces.len());
        for (ei, nodes) in pieces {
            let e = &graph.edges()[ei];
            let (i, j) = graph.ends(ei);
            let last = nodes.len() - 1;
            let dofs = nodes
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    if k == 0 && s == 0.0 {
                        vertex_dof[i]
                    } else if k == last && s == e.len {
                        vertex_dof[j]
                    } else {
                        dof_points.push(Point::Interior { edge: e.id, offset: s });
                        boundary.push(k == 0 || k == last);
                        dof_points.len() - 1
                    }
                })
                .collect();
            segments.push(Segment {
                edge: e.id,
                edge_index: ei,
                offsets: nodes,
                dofs,
            });
        }
        let parent = parent.map(|refs| {
            let mut out = vec![ParentDof::Node(usize::MAX); dof_points.len()];
            for (si, k, r) in refs {
                out[segments[si].dofs[k]] = r;
            }
            out
        });
        Ok(Mesh {
            graph,
            segments,
            dof_points,
            boundary,
            parent,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_points.len()
    }

    pub fn element_count(&self) -> usize {
        self.segments.iter().map(Segment::element_count).sum()
    }

    pub fn dof_point(&self, dof: usize) -> Point {
        self.dof_points[dof]
    }

    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    /// Cut nodes inside edges and vertices whose star is only partly meshed.
    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&d| self.boundary[d]).collect()
    }

    pub fn parent_map(&self) -> Option<&[ParentDof]> {
        self.parent.as_deref()
    }

    pub fn h_max(&self) -> f64 {
        self.elements().map(|(_, a, b, _, _)| b - a).fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.elements().map(|(_, a, b, _, _)| b - a).sum()
    }

    /// `(edge index, s_k, s_{k+1}, dof_k, dof_{k+1})` for every element.
    pub(crate) fn elements(&self) -> impl Iterator<Item = (usize, f64, f64, usize, usize)> + '_ {
        self.segments.iter().flat_map(|s| {
            (0..s.element_count()).map(move |k| {
                (s.edge_index, s.offsets[k], s.offsets[k + 1], s.dofs[k], s.dofs[k + 1])
            })
        })
    }

    /// The DOF sitting exactly at `p`, if any.
    pub fn dof_of(&self, p: Point) -> Result<Option<usize>> {
        let loc = self.graph.locate(p)?;
        Ok(match self.find(loc) {
            Some((ParentDof::Node(n), _)) => Some(n),
            _ => None,
        })
    }

    fn find(&self, loc: Loc) -> Option<(ParentDof, f64)> {
        match loc {
            Loc::Vertex(v) => {
                let id = self.graph.vertices()[v];
                self.dof_points
                    .iter()
                    .position(|p| *p == Point::Vertex(id))
                    .map(|d| (ParentDof::Node(d), 0.0))
            }
            Loc::Edge { e, s } => {
                let tol = 1e-12 * self.graph.edges()[e].len.max(1.0);
                for seg in self.segments.iter().filter(|seg| seg.edge_index == e) {
                    let o = &seg.offsets;
                    if s < o[0] - tol || s > o[o.len() - 1] + tol {
                        continue;
                    }
                    let k = o.partition_point(|&x| x < s);
                    if k < o.len() && (o[k] - s).abs() <= tol {
                        return Some((ParentDof::Node(seg.dofs[k]), 0.0));
                    }
                    if k > 0 && (s - o[k - 1]).abs() <= tol {
                        return Some((ParentDof::Node(seg.dofs[k - 1]), 0.0));
                    }
                    let w = (s - o[k - 1]) / (o[k] - o[k - 1]);
                    return Some((
                        ParentDof::Between {
                            left: seg.dofs[k - 1],
                            right: seg.dofs[k],
                            w,
                        },
                        w,
                    ));
                }
                None
            }
        }
    }
}

/// Sub-mesh whose elements tile the covered intervals of `ball` exactly:
/// the parent's nodes inside each interval plus a node at each cut.
pub fn restrict_to_ball(mesh: &Mesh, ball: &BallGeometry) -> Result<Mesh> {
    if !(ball.volume > 0.0) {
        return Err(Error::EmptyRegion(format!("ball of radius {} has no volume", ball.radius)));
    }
    let g = &mesh.graph;
    let mut pieces = Vec::new();
    let mut refs = Vec::new();
    for c in &ball.covered {
        let ei = g.edge_index(c.edge)?;
        let tol = 1e-12 * g.edges()[ei].len.max(1.0);
        for &(a, b) in &c.intervals {
            let mut nodes = vec![a];
            for seg in mesh.segments.iter().filter(|s| s.edge_index == ei) {
                nodes.extend(seg.offsets.iter().copied().filter(|&s| s > a + tol && s < b - tol));
            }
            nodes.push(b);
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            let mut piece_refs = Vec::with_capacity(nodes.len());
            for (k, &s) in nodes.iter().enumerate() {
                let (r, _) = mesh
                    .find(Loc::Edge { e: ei, s })
                    .ok_or_else(|| Error::EmptyRegion(format!("edge {} is not meshed at {s}", c.edge)))?;
                piece_refs.push((k, r));
            }
            refs.push(piece_refs);
            pieces.push((ei, nodes));
        }
    }
    // pair refs with segment order after the sort inside from_pieces
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&p, &q| pieces[p].0.cmp(&pieces[q].0).then(pieces[p].1[0].total_cmp(&pieces[q].1[0])));
    let mut flat = Vec::new();
    for (si, &pi) in order.iter().enumerate() {
        for &(k, r) in &refs[pi] {
            flat.push((si, k, r));
        }
    }
    Mesh::from_pieces(Arc::clone(&mesh.graph), pieces, Some(flat))
}

/// Integration region.
#[derive(Copy, Clone, Debug)]
pub enum Region<'a> {
    Whole,
    Ball(&'a BallGeometry),
}

/// A sub-interval `[a, b]` of one element with the interpolant's end values.
#[derive(Copy, Clone, Debug)]
pub struct Piece {
    pub edge_index: usize,
    pub a: f64,
    pub b: f64,
    pub ua: f64,
    pub ub: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn slope(&self) -> f64 {
        (self.ub - self.ua) / (self.b - self.a)
    }
}

/// DOF values of a continuous piecewise-linear function.
#[derive(Clone, Debug)]
pub struct DiscreteFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * GL8.iter().map(|&(x, w)| w * f(m + r * x)).sum::<f64>()
}

/// `∫_0^L |u|^p` for `u` affine from `p0` to `p1`.
fn abs_power_integral(len: f64, p0: f64, p1: f64, p: f64) -> f64 {
    if p == 1.0 || p == 2.0 {
        return if p == 2.0 {
            len * (p0 * p0 + p0 * p1 + p1 * p1) / 3.0
        } else if p0 * p1 >= 0.0 {
            len * (p0.abs() + p1.abs()) / 2.0
        } else {
            len * (p0 * p0 + p1 * p1) / (2.0 * (p0.abs() + p1.abs()))
        };
    }
    if p0 * p1 < 0.0 {
        let z = len * p0.abs() / (p0.abs() + p1.abs());
        return abs_power_integral(z, p0, 0.0, p) + abs_power_integral(len - z, 0.0, p1, p);
    }
    let (a, b) = (p0.abs(), p1.abs());
    if (b - a).abs() <= 1e-3 * a.max(b) {
        return gauss_legendre(0.0, len, |s| (a + (b - a) * s / len).powf(p));
    }
    len * (b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * (b - a))
}

impl<'m> DiscreteFunction<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_dofs() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a mesh with {} DOFs",
                values.len(),
                mesh.n_dofs()
            )));
        }
        Ok(DiscreteFunction { mesh, values })
    }

    pub fn constant(mesh: &'m Mesh, c: f64) -> Self {
        DiscreteFunction {
            mesh,
            values: vec![c; mesh.n_dofs()],
        }
    }

    /// Nodal interpolant of `f(point)`.
    pub fn interpolate(mesh: &'m Mesh, f: impl Fn(Point) -> f64) -> Self {
        DiscreteFunction {
            mesh,
            values: mesh.dof_points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        DiscreteFunction {
            mesh: self.mesh,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Value of the interpolant at `p`.
    pub fn eval(&self, p: Point) -> Result<f64> {
        let loc = self.mesh.graph.locate(p)?;
        match self.mesh.find(loc) {
            Some((ParentDof::Node(d), _)) => Ok(self.values[d]),
            Some((ParentDof::Between { left, right, w }, _)) => {
                Ok((1.0 - w) * self.values[left] + w * self.values[right])
            }
            None => Err(Error::EmptyRegion(format!("{p} is outside the mesh"))),
        }
    }

    /// Transfers a function on the parent mesh to the sub-mesh `sub`.
    pub fn restrict<'s>(&self, sub: &'s Mesh) -> Result<DiscreteFunction<'s>> {
        let map = sub
            .parent_map()
            .ok_or_else(|| Error::InvalidParameter("mesh has no parent".into()))?;
        let values = map
            .iter()
            .map(|r| match *r {
                ParentDof::Node(d) => self.values[d],
                ParentDof::Between { left, right, w } => (1.0 - w) * self.values[left] + w * self.values[right],
            })
            .collect();
        DiscreteFunction::new(sub, values)
    }

    /// Element pieces lying in `region`, with exact end values.
    pub fn pieces(&self, region: Region<'_>) -> Vec<Piece> {
        let mut out = Vec::new();
        let covered: Option<BTreeMap<EdgeId, &[(f64, f64)]>> = match region {
            Region::Whole => None,
            Region::Ball(b) => Some(b.covered.iter().map(|c| (c.edge, c.intervals.as_slice())).collect()),
        };
        for (ei, s0, s1, d0, d1) in self.mesh.elements() {
            let (u0, u1) = (self.values[d0], self.values[d1]);
            let at = |s: f64| u0 + (u1 - u0) * (s - s0) / (s1 - s0);
            match &covered {
                None => out.push(Piece {
                    edge_index: ei,
                    a: s0,
                    b: s1,
                    ua: u0,
                    ub: u1,
                }),
                Some(map) => {
                    let id = self.mesh.graph.edges()[ei].id;
                    for &(a, b) in map.get(&id).copied().unwrap_or(&[]) {
                        let (lo, hi) = (a.max(s0), b.min(s1));
                        if hi > lo {
                            out.push(Piece {
                                edge_index: ei,
                                a: lo,
                                b: hi,
                                ua: if lo == s0 { u0 } else { at(lo) },
                                ub: if hi == s1 { u1 } else { at(hi) },
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn measure(&self, region: Region<'_>) -> f64 {
        self.pieces(region).iter().map(Piece::len).sum()
    }

    pub fn integral(&self, region: Region<'_>) -> f64 {
        self.pieces(region).iter().map(|p| p.len() * (p.ua + p.ub) / 2.0).sum()
    }

    /// `ū_Y = (1/m(Y)) ∫_Y u dm`.
    pub fn mean(&self, region: Region<'_>) -> Result<f64> {
        let pieces = self.pieces(region);
        let m: f64 = pieces.iter().map(Piece::len).sum();
        if m > 0.0 {
            // shifted by one value so that constants come back exactly
            let c = pieces[0].ua;
            let s: f64 = pieces.iter().map(|p| p.len() * ((p.ua - c) + (p.ub - c)) / 2.0).sum();
            Ok(c + s / m)
        } else {
            Err(Error::EmptyRegion("mean over a null set".into()))
        }
    }

    /// `‖u‖_p` over `region`; `p = ∞` gives the sup norm.
    pub fn norm(&self, p: f64, region: Region<'_>) -> f64 {
        let pieces = self.pieces(region);
        if p.is_infinite() {
            return pieces.iter().map(|q| q.ua.abs().max(q.ub.abs())).fold(0.0, f64::max);
        }
        let s: f64 = pieces.iter().map(|q| abs_power_integral(q.len(), q.ua, q.ub, p)).sum();
        s.powf(1.0 / p)
    }

    /// `∫ |u - c|^p` over `region`.
    pub fn centered_power_integral(&self, c: f64, p: f64, region: Region<'_>) -> f64 {
        self.pieces(region)
            .iter()
            .map(|q| abs_power_integral(q.len(), q.ua - c, q.ub - c, p))
            .sum()
    }

    /// `‖u'‖_p` over `region`.
    pub fn grad_norm(&self, p: f64, region: Region<'_>) -> f64 {
        let pieces = self.pieces(region);
        if p.is_infinite() {
            return pieces.iter().map(|q| q.slope().abs()).fold(0.0, f64::max);
        }
        let s: f64 = pieces.iter().map(|q| q.len() * q.slope().abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    /// `∫ |u'|² dm` over `region`.
    pub fn energy(&self, region: Region<'_>) -> f64 {
        self.pieces(region).iter().map(|q| q.len() * q.slope() * q.slope()).sum()
    }

    /// `∫ |u'|² c dm` with the graph's conductances (1 on unweighted edges).
    pub fn weighted_energy(&self, region: Region<'_>) -> f64 {
        let edges = self.mesh.graph.edges();
        self.pieces(region)
            .iter()
            .map(|q| q.slope() * q.slope() * edges[q.edge_index].conductance_integral(q.a, q.b))
            .sum()
    }
}

/// The mean of `u` over `region`.
pub fn mean_on_set(u: &DiscreteFunction<'_>, region: Region<'_>) -> Result<f64> {
    u.mean(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_star;
    use crate::geometry::ball_geometry;
    use crate::graph::{Edge, VertexId};

    fn interval(len: f64) -> MetricGraph {
        MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![Edge::new(0, 0, 1, len)]).unwrap()
    }

    fn offset_of(p: Point) -> f64 {
        match p {
            Point::Vertex(VertexId(0)) => 0.0,
            Point::Vertex(_) => 1.0,
            Point::Interior { offset, .. } => offset,
        }
    }

    #[test]
    fn element_counts() {
        let m = build_mesh(&interval(1.0), 0.5).unwrap();
        assert_eq!((m.element_count(), m.n_dofs()), (2, 3));
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.5).unwrap();
        assert_eq!((m.element_count(), m.n_dofs()), (6, 7));
        let m = build_mesh(&interval(1.0), 0.3).unwrap();
        assert_eq!(m.element_count(), 4);
        assert!((m.h_max() - 0.25).abs() < 1e-15);
        assert!(build_mesh(&interval(1.0), 0.0).is_err());
    }

    #[test]
    fn dof_order_is_vertices_then_interior() {
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.5).unwrap();
        for d in 0..4 {
            assert!(matches!(m.dof_point(d), Point::Vertex(v) if v == VertexId(d as u32)));
        }
        assert_eq!(m.dof_point(4), Point::on_edge(0, 0.5));
        assert_eq!(m.dof_point(6), Point::on_edge(2, 0.5));
        assert!(m.boundary_dofs().is_empty());
    }

    #[test]
    fn forced_nodes_are_exact() {
        let m = build_mesh_with_nodes(&interval(1.0), 0.5, &[Point::on_edge(0, 0.3)]).unwrap();
        let o = &m.segments()[0].offsets;
        assert_eq!((o.len(), o[1], o[3]), (4, 0.3, 1.0));
        assert!((o[2] - 0.65).abs() < 1e-15);
        assert!(m.dof_of(Point::on_edge(0, 0.3)).unwrap().is_some());
        assert!(m.dof_of(Point::on_edge(0, 0.31)).unwrap().is_none());
    }

    #[test]
    fn constant_norms_on_star() {
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.1).unwrap();
        let u = DiscreteFunction::constant(&m, 1.0);
        assert!((u.norm(1.0, Region::Whole) - 3.0).abs() < 1e-13);
        assert!((u.norm(2.0, Region::Whole) - 3f64.sqrt()).abs() < 1e-13);
        assert_eq!(u.energy(Region::Whole), 0.0);
        let five = DiscreteFunction::constant(&m, 5.0);
        assert!((five.mean(Region::Whole).unwrap() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn identity_function_on_interval() {
        let g = interval(1.0);
        let m = build_mesh(&g, 0.1).unwrap();
        let u = DiscreteFunction::interpolate(&m, offset_of);
        assert!((u.energy(Region::Whole) - 1.0).abs() < 1e-13);
        assert!((u.mean(Region::Whole).unwrap() - 0.5).abs() < 1e-15);
        let ball = ball_geometry(&g, Point::on_edge(0, 0.5), 0.25).unwrap();
        assert!((mean_on_set(&u, Region::Ball(&ball)).unwrap() - 0.5).abs() < 1e-15);
        assert!((u.norm(f64::INFINITY, Region::Ball(&ball)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn hat_energy_on_star() {
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.5).unwrap();
        let u = DiscreteFunction::interpolate(&m, |p| if p == Point::vertex(0) { 1.0 } else { 0.0 });
        assert!((u.energy(Region::Whole) - 6.0).abs() < 1e-13);
    }

    #[test]
    fn power_integrals_match_quadrature() {
        for &(p0, p1) in &[(0.3, 1.7), (-0.5, 2.0), (1.0, 1.0000001), (-2.0, -0.1)] {
            for &p in &[1.0, 1.5, 2.0, 3.0, 10.0] {
                let exact = abs_power_integral(2.0, p0, p1, p);
                let mut fine = 0.0;
                let n = 2000;
                for k in 0..n {
                    let (a, b) = (2.0 * k as f64 / n as f64, 2.0 * (k + 1) as f64 / n as f64);
                    fine += gauss_legendre(a, b, |s| (p0 + (p1 - p0) * s / 2.0).abs().powf(p));
                }
                assert!((exact - fine).abs() <= 1e-9 * fine.max(1.0), "{p0} {p1} {p}: {exact} vs {fine}");
            }
        }
    }

    #[test]
    fn restriction_to_whole_ball_is_identity() {
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.25).unwrap();
        let ball = ball_geometry(&star, Point::vertex(0), 10.0).unwrap();
        let sub = restrict_to_ball(&m, &ball).unwrap();
        assert_eq!(sub.dof_points(), m.dof_points());
        assert!(sub.boundary_dofs().is_empty());
        let map = sub.parent_map().unwrap();
        assert!(map.iter().enumerate().all(|(i, r)| *r == ParentDof::Node(i)));
    }

    #[test]
    fn restriction_inserts_exact_cuts() {
        let g = interval(10.0);
        let m = build_mesh(&g, 0.3).unwrap();
        let ball = ball_geometry(&g, Point::on_edge(0, 5.0), 1.0).unwrap();
        let sub = restrict_to_ball(&m, &ball).unwrap();
        let o = &sub.segments()[0].offsets;
        assert_eq!((o[0], *o.last().unwrap()), (4.0, 6.0));
        assert_eq!(sub.boundary_dofs().len(), 2);

        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 0.1).unwrap();
        let ball = ball_geometry(&star, Point::vertex(0), 0.75).unwrap();
        let sub = restrict_to_ball(&m, &ball).unwrap();
        for seg in sub.segments() {
            assert_eq!(*seg.offsets.last().unwrap(), 0.75);
        }
        assert_eq!(sub.boundary_dofs().len(), 3);
        let u = DiscreteFunction::interpolate(&m, |p| match p {
            Point::Interior { offset, .. } => offset * offset,
            Point::Vertex(VertexId(0)) => 0.0,
            Point::Vertex(_) => 1.0,
        });
        let r = u.restrict(&sub).unwrap();
        let whole = r.integral(Region::Whole);
        let on_ball = u.integral(Region::Ball(&ball));
        assert!((whole - on_ball).abs() < 1e-14);
        assert!(restrict_to_ball(&m, &ball_geometry(&star, Point::vertex(0), 0.0).unwrap()).is_err());
    }

    #[test]
    fn ball_mesh_covers_the_ball() {
        let star = gen_star(3, 1.0, None).unwrap();
        let ball = ball_geometry(&star, Point::on_edge(0, 0.25), 1.0).unwrap();
        let m = build_ball_mesh(&star, &ball, 0.1).unwrap();
        assert!((m.total_measure() - 2.5).abs() < 1e-14);
        assert_eq!(m.boundary_dofs().len(), 2);
    }
}
