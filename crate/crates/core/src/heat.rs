//! θ-scheme evolution of the heat semigroup on a mesh and heat-kernel
//! columns from discrete deltas.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{MetricGraph, Point};
use crate::mesh::{build_mesh_with_nodes, DiscreteFunction, Mesh};
use crate::sparse::{assemble_mass, assemble_stiffness, solve_cg, SparseOperator};

/// Discretization parameters shared by kernel computations.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct HeatParams {
    pub h: f64,
    /// Upper bound on the time step; each interval between requested times
    /// is split into equal steps no longer than this.
    pub dt: f64,
    pub theta: f64,
    pub weighted: bool,
    /// Relative residual of each inner CG solve.
    pub cg_tol: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            h: 0.02,
            dt: 2e-4,
            theta: 0.5,
            weighted: false,
            cg_tol: 1e-13,
        }
    }
}

impl HeatParams {
    pub fn new(h: f64, dt: f64) -> Self {
        HeatParams {
            h,
            dt,
            ..Default::default()
        }
    }

    /// Both steps halved.
    pub fn refined(self) -> Self {
        HeatParams {
            h: self.h / 2.0,
            dt: self.dt / 2.0,
            ..self
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub cg_iterations: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
    /// `1ᵀ M u_t`.
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct HeatRun {
    pub dt: f64,
    pub theta: f64,
    pub initial_mass: f64,
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
}

impl HeatRun {
    /// Largest `|mass(t) − mass(0)| / |mass(0)|` over the snapshots.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.initial_mass;
        self.snapshots
            .iter()
            .map(|s| (s.mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Assembled operators for `M u̇ = −K u` on one mesh.
#[derive(Clone, Debug)]
pub struct HeatSolver {
    mesh: Mesh,
    stiffness: SparseOperator,
    mass: SparseOperator,
    mass_diag: Vec<f64>,
    theta: f64,
    cg_tol: f64,
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "times must be positive and increasing, got {t} after {prev}"
            )));
        }
        prev = t;
    }
    Ok(())
}

impl HeatSolver {
    pub fn new(mesh: Mesh, theta: f64, weighted: bool) -> Result<Self> {
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta {theta} outside [1/2, 1]")));
        }
        let stiffness = assemble_stiffness(&mesh, weighted)?;
        let mass = assemble_mass(&mesh);
        let mass_diag = mass.diagonal();
        Ok(HeatSolver {
            mesh,
            stiffness,
            mass,
            mass_diag,
            theta,
            cg_tol: 1e-13,
        })
    }

    pub fn with_params(mesh: Mesh, p: &HeatParams) -> Result<Self> {
        let mut s = HeatSolver::new(mesh, p.theta, p.weighted)?;
        s.cg_tol = p.cg_tol;
        Ok(s)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn total_mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.mass_diag).map(|(u, m)| u * m).sum()
    }

    /// `M⁻¹` applied to a unit load at the node sitting at `y`.
    pub fn delta(&self, y: Point) -> Result<Vec<f64>> {
        let dof = self
            .mesh
            .dof_of(y)?
            .ok_or_else(|| Error::Precondition(format!("{y} is not a mesh node")))?;
        let mut u = vec![0.0; self.mesh.n_dofs()];
        u[dof] = 1.0 / self.mass_diag[dof];
        Ok(u)
    }

    /// Steps from time 0 through every time in `stops`, calling `observe`
    /// after each step with the current time and state.
    pub fn march(
        &self,
        u0: &[f64],
        stops: &[f64],
        dt_cap: f64,
        mut observe: impl FnMut(f64, &[f64]) -> Result<()>,
    ) -> Result<RunStats> {
        check_times(stops)?;
        if !(dt_cap > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt_cap} must be positive")));
        }
        if u0.len() != self.mesh.n_dofs() {
            return Err(Error::InvalidParameter("initial data does not match the mesh".into()));
        }
        let mut u = u0.to_vec();
        let mut stats = RunStats::default();
        let mut t = 0.0;
        let mut cached: Option<(f64, SparseOperator)> = None;
        let mut rhs = vec![0.0; u.len()];
        let mut ku = vec![0.0; u.len()];
        for (si, &stop) in stops.iter().enumerate() {
            let span = stop - t;
            let n = ((span / dt_cap) - 1e-9).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            let a = match &cached {
                Some((d, a)) if *d == dt => a,
                _ => {
                    let a = self.mass.combine(1.0, &self.stiffness, self.theta * dt);
                    &cached.insert((dt, a)).1
                }
            };
            let explicit = (1.0 - self.theta) * dt;
            let t_start = t;
            for k in 1..=n {
                self.stiffness.apply_into(&u, &mut ku);
                for i in 0..u.len() {
                    rhs[i] = self.mass_diag[i] * u[i] - explicit * ku[i];
                }
                let max_iter = 20 * u.len() + 100;
                let cg = solve_cg(a, &rhs, &mut u, self.cg_tol, max_iter)?;
                stats.steps += 1;
                stats.cg_iterations += cg.iterations;
                stats.max_residual = stats.max_residual.max(cg.residual);
                t = if k == n { stop } else { t_start + k as f64 * dt };
                observe(t, &u)?;
            }
            t = stops[si];
        }
        Ok(stats)
    }

    /// Evolves `u0` and stores a snapshot at each requested time.
    pub fn evolve(&self, u0: &[f64], times: &[f64], dt_cap: f64) -> Result<HeatRun> {
        let mut snapshots = Vec::with_capacity(times.len());
        let mut next = 0;
        let stats = self.march(u0, times, dt_cap, |t, u| {
            if next < times.len() && t == times[next] {
                snapshots.push(Snapshot {
                    t,
                    values: u.to_vec(),
                    mass: self.total_mass(u),
                });
                next += 1;
            }
            Ok(())
        })?;
        Ok(HeatRun {
            dt: dt_cap,
            theta: self.theta,
            initial_mass: self.total_mass(u0),
            snapshots,
            stats,
        })
    }
}

/// Evolves `u0` on `mesh` under `M u̇ = −K u`.
pub fn evolve(mesh: &Mesh, u0: &[f64], times: &[f64], p: &HeatParams) -> Result<HeatRun> {
    HeatSolver::with_params(mesh.clone(), p)?.evolve(u0, times, p.dt)
}

/// `p(t, ·, y)` at one or more times, on a mesh with a node at `y`.
#[derive(Clone, Debug)]
pub struct KernelColumns {
    pub source: Point,
    pub params: HeatParams,
    pub mesh: Mesh,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    pub stats: RunStats,
}

/// A single kernel column `p(t, ·, y)`.
#[derive(Clone, Debug)]
pub struct KernelColumn {
    pub source: Point,
    pub t: f64,
    pub mesh: Mesh,
    pub values: Vec<f64>,
    pub mass: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub stats: RunStats,
}

impl KernelColumn {
    pub fn function(&self) -> DiscreteFunction<'_> {
        DiscreteFunction::new(&self.mesh, self.values.clone()).expect("column matches its mesh")
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        self.function().eval(x)
    }

    /// CSV with one `edge_id,offset,value` row per segment node.
    pub fn to_csv(&self) -> String {
        kernel_csv(&self.mesh, &self.values)
    }

    /// Run metadata as JSON.
    pub fn metadata(&self, params: &HeatParams, margin: Option<f64>) -> serde_json::Value {
        serde_json::json!({
            "source": self.source.to_string(),
            "t": self.t,
            "h": params.h,
            "dt": params.dt,
            "theta": params.theta,
            "margin": margin,
            "mass": self.mass,
            "min": self.min_value,
            "steps": self.stats.steps,
            "cg_iterations": self.stats.cg_iterations,
            "max_residual": self.stats.max_residual,
        })
    }
}

pub fn kernel_csv(mesh: &Mesh, values: &[f64]) -> String {
    let mut out = String::from("edge_id,offset,value\n");
    for seg in mesh.segments() {
        for (s, &d) in seg.offsets.iter().zip(&seg.dofs) {
            let _ = writeln!(out, "{},{:.11e},{:.11e}", seg.edge, s, values[d]);
        }
    }
    out
}

/// Kernel columns from `y` at several times, on a mesh with extra `nodes`.
pub fn heat_kernel_columns(
    g: &MetricGraph,
    p: &HeatParams,
    y: Point,
    times: &[f64],
    nodes: &[Point],
) -> Result<KernelColumns> {
    let mut forced = vec![y];
    forced.extend_from_slice(nodes);
    let mesh = build_mesh_with_nodes(g, p.h, &forced)?;
    let solver = HeatSolver::with_params(mesh, p)?;
    let u0 = solver.delta(y)?;
    let run = solver.evolve(&u0, times, p.dt)?;
    Ok(KernelColumns {
        source: g.canonical(y)?,
        params: *p,
        times: times.to_vec(),
        masses: run.snapshots.iter().map(|s| s.mass).collect(),
        values: run.snapshots.into_iter().map(|s| s.values).collect(),
        mesh: solver.mesh,
        stats: run.stats,
    })
}

/// `p(t, ·, y)` from the discrete delta at `y`.
pub fn heat_kernel_column(g: &MetricGraph, p: &HeatParams, y: Point, t: f64) -> Result<KernelColumn> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel time {t} must be positive")));
    }
    let cols = heat_kernel_columns(g, p, y, &[t], &[])?;
    let values = cols.values.into_iter().next().unwrap();
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelColumn {
        source: cols.source,
        t,
        mesh: cols.mesh,
        mass: cols.masses[0],
        values,
        min_value,
        max_value,
        stats: cols.stats,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SemigroupReport {
    pub t: f64,
    pub s: f64,
    /// `sup |p(t+s,·,y) − T_t p(s,·,y)|` with the two stages run separately.
    pub discrepancy: f64,
    /// `sup |p_Δt − p_{Δt/2}|` at `t + s`, floored at `1e-8·sup p`.
    pub scheme_error: f64,
    pub sup_p: f64,
    pub pass: bool,
}

/// Compares one run to `t + s` with a run to `s` restarted for another `t`.
pub fn semigroup_check(g: &MetricGraph, p: &HeatParams, y: Point, t: f64, s: f64) -> Result<SemigroupReport> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::InvalidParameter("semigroup times must be positive".into()));
    }
    let mesh = build_mesh_with_nodes(g, p.h, &[y])?;
    let solver = HeatSolver::with_params(mesh, p)?;
    let delta = solver.delta(y)?;
    let once = solver.evolve(&delta, &[t + s], p.dt)?.snapshots.pop().unwrap().values;
    let first = solver.evolve(&delta, &[s], p.dt)?.snapshots.pop().unwrap().values;
    let twice = solver.evolve(&first, &[t], p.dt)?.snapshots.pop().unwrap().values;
    let fine = solver.evolve(&delta, &[t + s], p.dt / 2.0)?.snapshots.pop().unwrap().values;
    let sup_p = once.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sup_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let discrepancy = sup_diff(&once, &twice);
    let scheme_error = sup_diff(&once, &fine).max(1e-8 * sup_p);
    Ok(SemigroupReport {
        t,
        s,
        discrepancy,
        scheme_error,
        sup_p,
        pass: discrepancy <= 3.0 * scheme_error,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub t: f64,
    pub pairs: usize,
    pub max_asymmetry: f64,
    pub sup_p: f64,
}

/// Cross-evaluates kernel columns from every point in `points` on one
/// shared mesh and reports `max |p(t,x,y) − p(t,y,x)|`.
pub fn symmetry_check(g: &MetricGraph, p: &HeatParams, points: &[Point], t: f64) -> Result<SymmetryReport> {
    let mesh = build_mesh_with_nodes(g, p.h, points)?;
    let solver = HeatSolver::with_params(mesh, p)?;
    let dofs: Vec<usize> = points
        .iter()
        .map(|&x| solver.mesh.dof_of(x).map(|d| d.expect("forced node")))
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<f64>> = points
        .iter()
        .map(|&y| {
            let u0 = solver.delta(y)?;
            Ok(solver.evolve(&u0, &[t], p.dt)?.snapshots.pop().unwrap().values)
        })
        .collect::<Result<_>>()?;
    let mut max_asymmetry: f64 = 0.0;
    let mut sup_p: f64 = 0.0;
    let mut pairs = 0;
    for a in 0..points.len() {
        sup_p = sup_p.max(columns[a].iter().fold(0.0, |m, v| m.max(v.abs())));
        for b in a + 1..points.len() {
            max_asymmetry = max_asymmetry.max((columns[b][dofs[a]] - columns[a][dofs[b]]).abs());
            pairs += 1;
        }
    }
    Ok(SymmetryReport {
        t,
        pairs,
        max_asymmetry,
        sup_p,
    })
}

/// Radius a finite truncation needs around a ball of radius `ball_radius`
/// so that kernel mass beyond it is below `tol` up to time `t_max`: the
/// larger of the 6σ rule and the point where the one-sided Gaussian tail
/// `2(4πt)^{-1/2} e^{-d²/4t}` drops under `tol`.
pub fn margin_policy(ball_radius: f64, t_max: f64, tol: f64) -> f64 {
    let six_sigma = 6.0 * t_max.sqrt();
    let prefactor = 2.0 / (4.0 * std::f64::consts::PI * t_max).sqrt();
    let tail = if prefactor > tol {
        (4.0 * t_max * (prefactor / tol).ln()).sqrt()
    } else {
        0.0
    };
    ball_radius + six_sigma.max(tail)
}
