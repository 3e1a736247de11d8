//! Harnack quotients on parabolic cylinders and balls, Hölder exponents,
//! on-diagonal kernel scans and two-sided Gaussian bound fits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ball_from_field, ball_geometry, BallGeometry, DistanceField};
use crate::graph::{MetricGraph, Point};
use crate::heat::{heat_kernel_columns, HeatParams, HeatSolver};
use crate::mesh::{build_ball_mesh, build_mesh_with_nodes, DiscreteFunction, Mesh, Region};
use crate::sparse::{assemble_stiffness, solve_cg};

/// Cylinder `Q = (s, s+r²) × B_r(x)` with the sub-cylinders
/// `Q₋ = (s+εr², s+ηr²) × B_{ζr}(x)` and `Q₊ = (s+σr², s+r²) × B_{ζr}(x)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct CylinderParams {
    pub eps: f64,
    pub eta: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub r: f64,
    pub s: f64,
    #[serde(serialize_with = "ser_point")]
    pub center: Point,
}

fn ser_point<S: serde::Serializer>(p: &Point, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

impl CylinderParams {
    /// `ε, η, σ, ζ = 1/4, 1/2, 3/4, 1/2` and `s = 0`.
    pub fn new(center: Point, r: f64) -> Self {
        CylinderParams {
            eps: 0.25,
            eta: 0.5,
            sigma: 0.75,
            zeta: 0.5,
            r,
            s: 0.0,
            center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.eps) && unit(self.eta) && unit(self.sigma) && unit(self.zeta)) {
            return Err(Error::InvalidParameter("cylinder parameters must lie in (0, 1)".into()));
        }
        if !(self.eps < self.eta && self.eta < self.sigma) {
            return Err(Error::InvalidParameter("need eps < eta < sigma".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidParameter(format!("cylinder radius {}", self.r)));
        }
        Ok(())
    }

    pub fn minus_window(&self) -> (f64, f64) {
        let r2 = self.r * self.r;
        (self.s + self.eps * r2, self.s + self.eta * r2)
    }

    pub fn plus_window(&self) -> (f64, f64) {
        let r2 = self.r * self.r;
        (self.s + self.sigma * r2, self.s + r2)
    }

    pub fn inner_radius(&self) -> f64 {
        self.zeta * self.r
    }
}

/// Nonnegative global solutions used to probe Harnack inequalities.
#[derive(Clone, Debug, PartialEq)]
pub enum Seed {
    /// The heat kernel `p(·, ·, y)`.
    Kernel(Point),
    /// Heat flow of the hat `max(0, 1 − d(c, ·)/ρ)`.
    Bump { center: Point, radius: f64 },
    Constant(f64),
}

impl Seed {
    pub fn describe(&self) -> String {
        match self {
            Seed::Kernel(y) => format!("kernel from {y}"),
            Seed::Bump { center, radius } => format!("bump at {center} radius {radius}"),
            Seed::Constant(c) => format!("constant {c}"),
        }
    }

    fn node(&self) -> Option<Point> {
        match *self {
            Seed::Kernel(y) => Some(y),
            Seed::Bump { center, .. } => Some(center),
            Seed::Constant(_) => None,
        }
    }

    fn initial(&self, solver: &HeatSolver) -> Result<Vec<f64>> {
        match *self {
            Seed::Kernel(y) => solver.delta(y),
            Seed::Bump { center, radius } => {
                let field = DistanceField::new(solver.mesh().graph(), center)?;
                solver
                    .mesh()
                    .dof_points()
                    .iter()
                    .map(|&p| Ok((1.0 - field.to(p)? / radius).max(0.0)))
                    .collect()
            }
            Seed::Constant(c) => {
                if c > 0.0 {
                    Ok(vec![c; solver.mesh().n_dofs()])
                } else {
                    Err(Error::InvalidParameter("constant seed must be positive".into()))
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedRow {
    pub seed: String,
    pub sup_minus: f64,
    pub inf_plus: f64,
    pub ratio: f64,
    /// Set when the solution was not numerically positive on `Q₊`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnackReport {
    pub cylinder: CylinderParams,
    /// Seeds start at `s − warmup`.
    pub warmup: f64,
    pub h: f64,
    pub dt: f64,
    pub rows: Vec<SeedRow>,
    /// Largest accepted ratio; a lower bound for the Harnack constant.
    pub max_ratio: f64,
}

/// Interior cut points of a ball (offsets where covered intervals end
/// strictly inside an edge).
pub fn ball_cut_points(g: &MetricGraph, ball: &BallGeometry) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for c in &ball.covered {
        let len = g.edge(c.edge)?.len;
        for &(a, b) in &c.intervals {
            for s in [a, b] {
                if s > 0.0 && s < len {
                    out.push(Point::Interior { edge: c.edge, offset: s });
                }
            }
        }
    }
    Ok(out)
}

/// DOFs within distance `radius` of `center`.
fn dofs_within(mesh: &Mesh, center: Point, radius: f64) -> Result<Vec<usize>> {
    let field = DistanceField::new(mesh.graph(), center)?;
    let tol = 1e-12 * radius.max(1.0);
    let mut out = Vec::new();
    for (d, &p) in mesh.dof_points().iter().enumerate() {
        if field.to(p)? <= radius + tol {
            out.push(d);
        }
    }
    Ok(out)
}

/// `sup_{Q₋} u / inf_{Q₊} u` for each seed, sampled on all mesh nodes in
/// `B_{ζr}(x)` at every time step in the windows.
pub fn parabolic_harnack_ratio(
    g: &MetricGraph,
    cyl: &CylinderParams,
    seeds: &[Seed],
    params: &HeatParams,
) -> Result<HarnackReport> {
    cyl.validate()?;
    let warmup = 0.1 * cyl.r * cyl.r;
    let inner = ball_geometry(g, cyl.center, cyl.inner_radius())?;
    let mut forced = vec![cyl.center];
    forced.extend(seeds.iter().filter_map(Seed::node));
    forced.extend(ball_cut_points(g, &inner)?);
    let mesh = build_mesh_with_nodes(g, params.h, &forced)?;
    let solver = HeatSolver::with_params(mesh, params)?;
    let ball_dofs = dofs_within(solver.mesh(), cyl.center, cyl.inner_radius())?;
    // run time τ corresponds to absolute time s − warmup + τ
    let shift = warmup - cyl.s;
    let (m0, m1) = cyl.minus_window();
    let (p0, p1) = cyl.plus_window();
    let stops = [m0 + shift, m1 + shift, p0 + shift, p1 + shift];
    let rows = seeds
        .par_iter()
        .map(|seed| {
            let u0 = seed.initial(&solver)?;
            let mut sup_minus: f64 = 0.0;
            let mut inf_plus = f64::INFINITY;
            let mut min_any = f64::INFINITY;
            solver.march(&u0, &stops, params.dt, |t, u| {
                let in_minus = t >= stops[0] && t <= stops[1];
                let in_plus = t >= stops[2] && t <= stops[3];
                for &d in &ball_dofs {
                    if in_minus {
                        sup_minus = sup_minus.max(u[d]);
                    }
                    if in_plus {
                        inf_plus = inf_plus.min(u[d]);
                        min_any = min_any.min(u[d]);
                    }
                }
                Ok(())
            })?;
            let rejected = (inf_plus <= 1e-12 * sup_minus)
                .then(|| format!("inf over Q+ is {inf_plus:e}, not numerically positive"));
            Ok(SeedRow {
                seed: seed.describe(),
                sup_minus,
                inf_plus,
                ratio: sup_minus / inf_plus,
                rejected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows
        .iter()
        .filter(|r| r.rejected.is_none())
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(HarnackReport {
        cylinder: *cyl,
        warmup,
        h: params.h,
        dt: params.dt,
        rows,
        max_ratio,
    })
}

/// A discrete harmonic function on a ball with Dirichlet data at its
/// boundary nodes.
#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub mesh: Mesh,
    pub values: Vec<f64>,
    pub boundary: Vec<usize>,
    /// Relative residual of the interior equations.
    pub residual: f64,
}

impl HarmonicSolution {
    pub fn function(&self) -> DiscreteFunction<'_> {
        DiscreteFunction::new(&self.mesh, self.values.clone()).expect("solution matches its mesh")
    }

    /// Whether every value lies between the boundary extremes.
    pub fn maximum_principle_holds(&self) -> bool {
        let lo = self.boundary.iter().map(|&d| self.values[d]).fold(f64::INFINITY, f64::min);
        let hi = self.boundary.iter().map(|&d| self.values[d]).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        self.values.iter().all(|&v| v >= lo - tol && v <= hi + tol)
    }
}

/// Solves `K_II u_I = −K_IB u_B` on a mesh of `ball`, with `boundary`
/// giving the (nonnegative) value at each boundary node.
pub fn harmonic_solve(
    g: &MetricGraph,
    ball: &BallGeometry,
    h: f64,
    boundary: impl Fn(Point) -> f64,
) -> Result<HarmonicSolution> {
    let mesh = build_ball_mesh(g, ball, h)?;
    let bdofs = mesh.boundary_dofs();
    if bdofs.is_empty() {
        return Err(Error::Singular("ball has no boundary nodes".into()));
    }
    let interior: Vec<usize> = (0..mesh.n_dofs()).filter(|&d| !mesh.is_boundary(d)).collect();
    if interior.is_empty() {
        return Err(Error::Singular("ball has no interior nodes".into()));
    }
    let mut values = vec![0.0; mesh.n_dofs()];
    for &d in &bdofs {
        let v = boundary(mesh.dof_point(d));
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter(format!("boundary value {v} is negative")));
        }
        values[d] = v;
    }
    let k = assemble_stiffness(&mesh, false)?;
    let kii = k.submatrix(&interior, &interior);
    let kib = k.submatrix(&interior, &bdofs);
    let ub: Vec<f64> = bdofs.iter().map(|&d| values[d]).collect();
    let rhs: Vec<f64> = kib.apply(&ub).into_iter().map(|v| -v).collect();
    let mut ui = vec![ub.iter().sum::<f64>() / ub.len() as f64; interior.len()];
    let stats = solve_cg(&kii, &rhs, &mut ui, 1e-14, 50 * interior.len() + 1000)?;
    for (&d, &v) in interior.iter().zip(&ui) {
        values[d] = v;
    }
    Ok(HarmonicSolution {
        mesh,
        values,
        boundary: bdofs,
        residual: stats.residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticRow {
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
    pub maximum_principle: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticReport {
    #[serde(serialize_with = "ser_point")]
    pub center: Point,
    pub r: f64,
    pub rows: Vec<EllipticRow>,
    pub max_ratio: f64,
}

/// For each boundary sample, solves on `B_2r(x)` and reports
/// `sup_{B_r} u / inf_{B_r} u` (exact for piecewise-linear `u`).
pub fn elliptic_harnack_ratio(
    g: &MetricGraph,
    x: Point,
    r: f64,
    h: f64,
    samples: &[&dyn Fn(Point) -> f64],
) -> Result<EllipticReport> {
    let field = DistanceField::new(g, x)?;
    let outer = ball_from_field(&field, 2.0 * r)?;
    let inner = ball_from_field(&field, r)?;
    let mut rows = Vec::with_capacity(samples.len());
    for f in samples {
        let sol = harmonic_solve(g, &outer, h, f)?;
        let u = sol.function();
        let pieces = u.pieces(Region::Ball(&inner));
        let sup = pieces.iter().map(|p| p.ua.max(p.ub)).fold(f64::NEG_INFINITY, f64::max);
        let inf = pieces.iter().map(|p| p.ua.min(p.ub)).fold(f64::INFINITY, f64::min);
        rows.push(EllipticRow {
            sup,
            inf,
            ratio: sup / inf,
            maximum_principle: sol.maximum_principle_holds(),
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(EllipticReport {
        center: x,
        r,
        rows,
        max_ratio,
    })
}

/// Values of a solution at fixed points and times.
#[derive(Clone, Debug)]
pub struct SpaceTimeSamples {
    pub points: Vec<Point>,
    pub times: Vec<f64>,
    /// `values[time][point]`.
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeSamples {
    pub fn scaled(&self, alpha: f64) -> Self {
        SpaceTimeSamples {
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| alpha * v).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Runs `seed` on `(T − 4r², T) × B_2r(x)` (started `warmup` before the
/// cylinder) and samples it at the mesh nodes of `B_r(x)` at `n_times`
/// equally spaced times in `[T − r², T]`.
pub fn sample_cylinder(
    g: &MetricGraph,
    seed: &Seed,
    params: &HeatParams,
    x: Point,
    r: f64,
    warmup: f64,
    n_times: usize,
) -> Result<SpaceTimeSamples> {
    let mut forced = vec![x];
    forced.extend(seed.node());
    forced.extend(ball_cut_points(g, &ball_geometry(g, x, r)?)?);
    let mesh = build_mesh_with_nodes(g, params.h, &forced)?;
    let solver = HeatSolver::with_params(mesh, params)?;
    let u0 = seed.initial(&solver)?;
    let t_end = warmup + 4.0 * r * r;
    let times: Vec<f64> = (0..n_times)
        .map(|k| t_end - r * r * (1.0 - k as f64 / (n_times - 1).max(1) as f64))
        .collect();
    let dofs = dofs_within(solver.mesh(), x, r)?;
    let run = solver.evolve(&u0, &times, params.dt)?;
    Ok(SpaceTimeSamples {
        points: dofs.iter().map(|&d| solver.mesh().dof_point(d)).collect(),
        times: times.iter().map(|t| t - warmup).collect(),
        values: run
            .snapshots
            .iter()
            .map(|s| dofs.iter().map(|&d| s.values[d]).collect())
            .collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HoelderFit {
    /// `None` when every increment is at rounding level.
    pub alpha: Option<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub pairs: usize,
    pub bins: usize,
    pub degenerate: bool,
}

/// Estimates the Hölder exponent from
/// `|u(s,y) − u(t,z)| / sup|u|` against `(|s−t|^{1/2} + d(y,z))/r`:
/// pairs are binned by log-distance, the largest increment in each bin is
/// kept, and α is the least-squares slope of the log-log envelope.
pub fn hoelder_exponent(g: &MetricGraph, r: f64, solutions: &[SpaceTimeSamples]) -> Result<HoelderFit> {
    const BINS: usize = 12;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut pairs = 0;
    for sol in solutions {
        let sup = sol.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let fields: Vec<DistanceField<'_>> = sol
            .points
            .iter()
            .map(|&p| DistanceField::new(g, p))
            .collect::<Result<_>>()?;
        let dist: Vec<Vec<f64>> = fields
            .iter()
            .map(|f| sol.points.iter().map(|&q| f.to(q)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let n = sol.points.len();
        let idx: Vec<(usize, usize)> = (0..sol.times.len()).flat_map(|a| (0..n).map(move |i| (a, i))).collect();
        for (k, &(a, i)) in idx.iter().enumerate() {
            for &(b, j) in &idx[k + 1..] {
                let rho = ((sol.times[a] - sol.times[b]).abs().sqrt() + dist[i][j]) / r;
                if rho <= 0.0 {
                    continue;
                }
                let inc = if sup > 0.0 {
                    (sol.values[a][i] - sol.values[b][j]).abs() / sup
                } else {
                    0.0
                };
                samples.push((rho, inc));
                pairs += 1;
            }
        }
    }
    if samples.iter().all(|&(_, inc)| inc <= 1e-14) {
        return Ok(HoelderFit {
            alpha: None,
            residual: 0.0,
            pairs,
            bins: 0,
            degenerate: true,
        });
    }
    let lo = samples.iter().map(|s| s.0.ln()).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0.ln()).fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / BINS as f64).max(f64::MIN_POSITIVE);
    let mut envelope = vec![(f64::NEG_INFINITY, 0.0f64); BINS];
    for &(rho, inc) in &samples {
        let b = (((rho.ln() - lo) / width) as usize).min(BINS - 1);
        if inc > envelope[b].1 {
            envelope[b] = (rho.ln(), inc);
        }
    }
    let pts: Vec<(f64, f64)> = envelope
        .into_iter()
        .filter(|&(_, inc)| inc > 1e-14)
        .map(|(x, inc)| (x, inc.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(HoelderFit {
            alpha: None,
            residual: 0.0,
            pairs,
            bins: pts.len(),
            degenerate: true,
        });
    }
    let (slope, intercept) = least_squares(&pts);
    let residual =
        (pts.iter().map(|&(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(HoelderFit {
        alpha: Some(slope),
        residual,
        pairs,
        bins: pts.len(),
        degenerate: false,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagonalRow {
    pub t: f64,
    #[serde(serialize_with = "ser_point")]
    pub x: Point,
    pub p: f64,
    /// `p(t,x,x)·t^{1/2}`.
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UltracontractivityReport {
    pub rows: Vec<DiagonalRow>,
    /// Largest `p(t,x,x) t^{1/2}`: the empirical constant.
    pub c_emp: f64,
    pub min_scaled: f64,
    /// `(max − min)/max` of the scaled values over the whole grid.
    pub variation: f64,
}

/// Samples `p(t,x,x)·t^{1/2}` over a time grid at each sample point.
pub fn ultracontractivity_scan(
    g: &MetricGraph,
    params: &HeatParams,
    times: &[f64],
    points: &[Point],
) -> Result<UltracontractivityReport> {
    let per_point = points
        .par_iter()
        .map(|&x| {
            let cols = heat_kernel_columns(g, params, x, times, &[])?;
            let dof = cols.mesh.dof_of(x)?.expect("source is a node");
            Ok(times
                .iter()
                .zip(&cols.values)
                .map(|(&t, v)| DiagonalRow {
                    t,
                    x: cols.source,
                    p: v[dof],
                    scaled: v[dof] * t.sqrt(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<DiagonalRow> = per_point.into_iter().flatten().collect();
    let c_emp = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let min_scaled = rows.iter().map(|r| r.scaled).fold(f64::INFINITY, f64::min);
    Ok(UltracontractivityReport {
        variation: (c_emp - min_scaled) / c_emp,
        rows,
        c_emp,
        min_scaled,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianRow {
    pub t: f64,
    #[serde(serialize_with = "ser_point")]
    pub x: Point,
    #[serde(serialize_with = "ser_point")]
    pub y: Point,
    pub d: f64,
    pub p: f64,
    pub vol_sqrt_t: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
}

/// Spread of `p(t,x,x)·prefactor⁻¹` over the on-diagonal rows.
#[derive(Clone, Debug, Serialize)]
pub struct PrefactorFit {
    pub form: String,
    pub min: f64,
    pub max: f64,
    /// `max/min`; 1 means the form captures the time dependence exactly.
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianFit {
    pub rows: Vec<GaussianRow>,
    pub dropped: usize,
    /// `min p·m(B_√t)` over on-diagonal rows.
    pub c1: f64,
    /// `max p·m(B_√t)` over on-diagonal rows.
    pub c2: f64,
    /// Lower bound holds for `C₁ ∈ (0, c1_upper]`.
    pub c1_upper: f64,
    /// Upper bound holds for `C₂ ∈ [c2_lower, ∞)`.
    pub c2_lower: f64,
    /// Least-squares exponent β in `p(t,x,x) ≈ a t^{−β}`.
    pub diagonal_exponent: f64,
    pub prefactors: Vec<PrefactorFit>,
    /// The prefactor form with the smallest spread.
    pub best_prefactor: String,
}

impl GaussianFit {
    pub fn lower_feasible(&self) -> bool {
        self.c1_upper > 0.0
    }

    pub fn upper_feasible(&self) -> bool {
        self.c2_lower.is_finite()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,d,p,vol_sqrt_t,lower_slack,upper_slack\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                r.t, r.d, r.p, r.vol_sqrt_t, r.lower_slack, r.upper_slack
            );
        }
        out
    }
}

/// Fits `c₁/m(B_√t(x)) e^{−d²/C₁t} ≤ p(t,x,y) ≤ c₂/m(B_√t(x)) e^{−d²/C₂t}`.
///
/// `c₁, c₂` are fixed from the on-diagonal rows (every `x` is also paired
/// with itself); then the feasible `C₁` and `C₂` ranges follow row by
/// row in closed form. Rows with `p < 1e-14` are dropped.
pub fn gaussian_bound_fit(
    g: &MetricGraph,
    params: &HeatParams,
    pairs: &[(Point, Point)],
    times: &[f64],
) -> Result<GaussianFit> {
    const FLOOR: f64 = 1e-14;
    let mut sources: Vec<Point> = Vec::new();
    for &(x, _) in pairs {
        let x = g.canonical(x)?;
        if !sources.contains(&x) {
            sources.push(x);
        }
    }
    // one run per x; p(t,x,y) is read from the column of x by symmetry
    let raw = sources
        .par_iter()
        .map(|&x| {
            let mut targets: Vec<Point> = vec![x];
            for &(xx, y) in pairs {
                let y = g.canonical(y)?;
                if g.canonical(xx)? == x && !targets.contains(&y) {
                    targets.push(y);
                }
            }
            let cols = heat_kernel_columns(g, params, x, times, &targets)?;
            let field = DistanceField::new(g, x)?;
            let vols: Vec<f64> = times
                .iter()
                .map(|t| Ok(ball_from_field(&field, t.sqrt())?.volume))
                .collect::<Result<_>>()?;
            let mut out = Vec::new();
            for &y in &targets {
                let d = field.to(y)?;
                let dof = cols.mesh.dof_of(y)?.expect("target is a node");
                for ((&t, v), &vol) in times.iter().zip(&cols.values).zip(&vols) {
                    out.push((t, x, y, d, v[dof], vol));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<_> = raw.into_iter().flatten().collect();
    let kept: Vec<_> = raw.iter().copied().filter(|r| r.4 >= FLOOR).collect();
    let dropped = raw.len() - kept.len();
    let diag: Vec<_> = kept.iter().filter(|r| r.3 == 0.0).collect();
    if diag.is_empty() {
        return Err(Error::EmptyRegion("no on-diagonal rows above the floor".into()));
    }
    let c1 = diag.iter().map(|r| r.4 * r.5).fold(f64::INFINITY, f64::min);
    let c2 = diag.iter().map(|r| r.4 * r.5).fold(0.0, f64::max);
    let mut c1_upper = f64::INFINITY;
    let mut c2_lower: f64 = 0.0;
    for &(t, _, _, d, p, vol) in &kept {
        if d == 0.0 {
            continue;
        }
        let lower = -(p * vol / c1).ln();
        if lower > 0.0 {
            c1_upper = c1_upper.min(d * d / (t * lower));
        }
        let upper = -(p * vol / c2).ln();
        c2_lower = if upper > 0.0 {
            c2_lower.max(d * d / (t * upper))
        } else {
            f64::INFINITY
        };
    }
    let c1_ref = if c1_upper.is_finite() { c1_upper } else { 4.0 };
    let c2_ref = if c2_lower.is_finite() { c2_lower } else { 4.0 };
    let rows = kept
        .iter()
        .map(|&(t, x, y, d, p, vol)| GaussianRow {
            t,
            x,
            y,
            d,
            p,
            vol_sqrt_t: vol,
            lower_slack: p - c1 / vol * (-d * d / (c1_ref * t)).exp(),
            upper_slack: c2 / vol * (-d * d / (c2_ref * t)).exp() - p,
        })
        .collect();
    let logs: Vec<(f64, f64)> = diag.iter().map(|r| (r.0.ln(), r.4.ln())).collect();
    let diagonal_exponent = if logs.len() >= 2 { -least_squares(&logs).0 } else { f64::NAN };
    let forms: [(&str, &dyn Fn(f64, f64) -> f64); 3] = [
        ("volume", &|_, vol| 1.0 / vol),
        ("t^-1/2", &|t: f64, _| t.powf(-0.5)),
        ("t^-1/4", &|t: f64, _| t.powf(-0.25)),
    ];
    let prefactors: Vec<PrefactorFit> = forms
        .iter()
        .map(|(name, f)| {
            let vals: Vec<f64> = diag.iter().map(|r| r.4 / f(r.0, r.5)).collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(0.0, f64::max);
            PrefactorFit {
                form: name.to_string(),
                min,
                max,
                spread: max / min,
            }
        })
        .collect();
    let best_prefactor = prefactors
        .iter()
        .min_by(|a, b| a.spread.total_cmp(&b.spread))
        .map(|p| p.form.clone())
        .unwrap_or_default();
    Ok(GaussianFit {
        rows,
        dropped,
        c1,
        c2,
        c1_upper,
        c2_lower,
        diagonal_exponent,
        prefactors,
        best_prefactor,
    })
}
