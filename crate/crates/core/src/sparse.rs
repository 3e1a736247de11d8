//! Stiffness and lumped mass operators, plus a Jacobi-preconditioned
//! conjugate-gradient solver.

use std::fmt::Write as _;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Stiffness,
    Mass,
    /// A linear combination such as `M + θΔt K`.
    Combined,
}

/// Symmetric sparse matrix in CSR form.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    matrix: CsMat<f64>,
    role: Role,
}

impl SparseOperator {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j).copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            y[i] = row.iter().map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// `a·self + b·other` on the union sparsity pattern.
    pub fn combine(&self, a: f64, other: &SparseOperator, b: f64) -> SparseOperator {
        let lhs = self.matrix.map(|v| a * v);
        let rhs = other.matrix.map(|v| b * v);
        SparseOperator {
            matrix: &lhs + &rhs,
            role: Role::Combined,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.data().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sub-matrix on the given rows and columns (both in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseOperator {
        let mut col_pos = vec![usize::MAX; self.dim()];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut tri = TriMat::new((rows.len(), cols.len()));
        for (ri, &r) in rows.iter().enumerate() {
            if let Some(row) = self.matrix.outer_view(r) {
                for (j, &v) in row.iter() {
                    if col_pos[j] != usize::MAX {
                        tri.add_triplet(ri, col_pos[j], v);
                    }
                }
            }
        }
        SparseOperator {
            matrix: tri.to_csr(),
            role: Role::Combined,
        }
    }

    /// Coordinate-list dump, one `row col value` line per stored entry,
    /// values to 17 significant digits.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                let _ = writeln!(out, "{i} {j} {v:.16e}");
            }
        }
        out
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Stiffness matrix of the energy form on the mesh's interpolants. With
/// `weighted`, element entries are scaled by the mean conductance of the
/// element, which is exact for piecewise-constant weights.
pub fn assemble_stiffness(mesh: &Mesh, weighted: bool) -> Result<SparseOperator> {
    let g = mesh.graph();
    if weighted {
        if !g.is_weighted() {
            return Err(Error::MissingWeights);
        }
        g.validate().into_result()?;
    }
    let n = mesh.n_dofs();
    let mut tri = TriMat::new((n, n));
    for (ei, a, b, i, j) in mesh.elements() {
        let len = b - a;
        let c = if weighted {
            g.edges()[ei].conductance_integral(a, b) / len
        } else {
            1.0
        };
        let k = c / len;
        tri.add_triplet(i, i, k);
        tri.add_triplet(j, j, k);
        tri.add_triplet(i, j, -k);
        tri.add_triplet(j, i, -k);
    }
    Ok(SparseOperator {
        matrix: tri.to_csr(),
        role: Role::Stiffness,
    })
}

/// Lumped (diagonal) mass matrix: each element gives half its length to
/// each of its nodes.
pub fn assemble_mass(mesh: &Mesh) -> SparseOperator {
    let n = mesh.n_dofs();
    let mut diag = vec![0.0; n];
    for (_, a, b, i, j) in mesh.elements() {
        diag[i] += 0.5 * (b - a);
        diag[j] += 0.5 * (b - a);
    }
    let mut tri = TriMat::new((n, n));
    for (i, d) in diag.into_iter().enumerate() {
        tri.add_triplet(i, i, d);
    }
    SparseOperator {
        matrix: tri.to_csr(),
        role: Role::Mass,
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned CG for SPD `a`; `x` holds the initial guess and
/// receives the solution. Stops at relative residual `tol`.
pub fn solve_cg(a: &SparseOperator, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = a.apply(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > tol {
        if it == max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("CG curvature {pap} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    Ok(CgStats {
        iterations: it,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_star;
    use crate::graph::{Edge, MetricGraph, Point, VertexId, WeightProfile};
    use crate::mesh::{build_mesh, DiscreteFunction, Region};

    fn interval(len: f64) -> MetricGraph {
        MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![Edge::new(0, 0, 1, len)]).unwrap()
    }

    #[test]
    fn single_element_stiffness() {
        let m = build_mesh(&interval(1.0), 1.0).unwrap();
        let k = assemble_stiffness(&m, false).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(0, 1), -1.0);
        assert_eq!(k.get(1, 1), 1.0);
        assert_eq!(k.role(), Role::Stiffness);
        assert!(matches!(assemble_stiffness(&m, true), Err(Error::MissingWeights)));

        let e = Edge::new(0, 0, 1, 1.0).with_weight(WeightProfile::constant(1.0, 4.0));
        let g4 = MetricGraph::new(vec![VertexId(0), VertexId(1)], vec![e]).unwrap();
        let m4 = build_mesh(&g4, 1.0).unwrap();
        let k4 = assemble_stiffness(&m4, true).unwrap();
        assert_eq!(k4.get(0, 1), -4.0);
    }

    #[test]
    fn affine_energy_is_exact() {
        for h in [1.0, 0.3, 0.01] {
            let m = build_mesh(&interval(1.0), h).unwrap();
            let k = assemble_stiffness(&m, false).unwrap();
            let u = DiscreteFunction::interpolate(&m, |p| match p {
                Point::Vertex(VertexId(0)) => 0.0,
                Point::Vertex(_) => 1.0,
                Point::Interior { offset, .. } => offset,
            });
            let e = k.form(u.values(), u.values());
            assert!((e - 1.0).abs() < 1e-12);
            assert!((e - u.energy(Region::Whole)).abs() < 1e-12);
        }
    }

    #[test]
    fn lumped_masses() {
        let m = build_mesh(&interval(1.0), 0.5).unwrap();
        assert_eq!(assemble_mass(&m).diagonal(), vec![0.25, 0.25, 0.5]);
        let star = gen_star(3, 1.0, None).unwrap();
        let m = build_mesh(&star, 1.0).unwrap();
        assert_eq!(assemble_mass(&m).diagonal(), vec![1.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn stiffness_kills_constants() {
        let star = gen_star(5, 1.3, None).unwrap();
        let m = build_mesh(&star, 0.07).unwrap();
        let k = assemble_stiffness(&m, false).unwrap();
        let ones = vec![1.0; m.n_dofs()];
        let r = k.apply(&ones);
        let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 1e-13 * k.frobenius_norm());
    }

    #[test]
    fn cg_solves_shifted_laplacian() {
        let m = build_mesh(&interval(1.0), 0.01).unwrap();
        let k = assemble_stiffness(&m, false).unwrap();
        let mass = assemble_mass(&m);
        let a = mass.combine(1.0, &k, 0.01);
        let x_true: Vec<f64> = (0..m.n_dofs()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.apply(&x_true);
        let mut x = vec![0.0; m.n_dofs()];
        let stats = solve_cg(&a, &b, &mut x, 1e-13, 10_000).unwrap();
        assert!(stats.residual <= 1e-13);
        let err = x.iter().zip(&x_true).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-9);
        let mut y = vec![0.0; m.n_dofs()];
        assert!(matches!(
            solve_cg(&a, &b, &mut y, 1e-13, 2),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn coo_dump_has_seventeen_digits() {
        let m = build_mesh(&interval(1.0), 1.0 / 3.0).unwrap();
        let text = assemble_mass(&m).to_coo_text();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "0 0 1.6666666666666666e-1");
    }
}
