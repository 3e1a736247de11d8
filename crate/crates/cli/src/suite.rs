//! TOML suite definitions and their execution.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use heatgraph::geometry::{ball_geometry, distance, doubling_scan, weighted_distance};
use heatgraph::harnack::{
    elliptic_harnack_ratio, gaussian_bound_fit, parabolic_harnack_ratio, ultracontractivity_scan, CylinderParams,
};
use heatgraph::heat::{heat_kernel_columns, kernel_csv, semigroup_check, symmetry_check, HeatParams};
use heatgraph::inequality::{
    nash_check, poincare_check, random_supported_function, random_test_function, sobolev_compact_check,
    sobolev_infinite_check,
};
use heatgraph::mesh::{build_mesh, DiscreteFunction};
use heatgraph::sparse::assemble_stiffness;
use heatgraph::{MetricGraph, Point};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::fmt;
use crate::spec::{self, CliError, CliResult, GraphConfig};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub graph: Option<GraphConfig>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "half")]
    pub theta: f64,
    #[serde(default = "default_margin_tol")]
    pub margin_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the config file.
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub checks: Vec<Check>,
}

fn default_h() -> f64 {
    0.02
}

fn default_dt() -> f64 {
    2e-4
}

fn half() -> f64 {
    0.5
}

fn default_margin_tol() -> f64 {
    1e-8
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Check {
    /// Overrides the suite graph.
    pub graph: Option<GraphConfig>,
    pub h: Option<f64>,
    pub dt: Option<f64>,
    /// Whether a failure of this check fails the suite.
    #[serde(default = "yes")]
    pub assert: bool,
    #[serde(flatten)]
    pub kind: CheckKind,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheckKind {
    Distance {
        from: String,
        to: String,
        #[serde(default)]
        weighted: bool,
    },
    Ball {
        center: String,
        radius: f64,
    },
    Doubling {
        centers: Vec<String>,
        radii: Vec<f64>,
    },
    Poincare {
        center: String,
        radius: f64,
        #[serde(default = "twenty")]
        tests: usize,
    },
    Sobolev {
        p: f64,
        q: Option<f64>,
        #[serde(default = "twenty")]
        samples: usize,
        center: Option<String>,
        radius: Option<f64>,
    },
    Nash {
        center: String,
        radius: f64,
        #[serde(default = "twenty")]
        samples: usize,
    },
    Kernel {
        source: String,
        times: Vec<f64>,
    },
    /// Compares kernel columns with `(4πt)^{-1/2} e^{-d²/4t}`, or twice that
    /// at a half-line end.
    KernelOracle {
        source: String,
        times: Vec<f64>,
        max_distance: f64,
        tol: f64,
        #[serde(default)]
        half_line: bool,
    },
    Ultracontractivity {
        points: Vec<String>,
        times: Vec<f64>,
    },
    Semigroup {
        source: String,
        t: f64,
        s: f64,
    },
    Symmetry {
        points: Vec<String>,
        t: f64,
        #[serde(default = "sym_tol")]
        tol: f64,
    },
    HarnackParabolic {
        center: String,
        r: f64,
        seeds: Vec<String>,
    },
    HarnackElliptic {
        center: String,
        r: f64,
        /// Boundary samples: one value per edge (by edge index), applied to
        /// boundary nodes on or at the start of that edge.
        samples: Vec<Vec<f64>>,
    },
    GaussianFit {
        pairs: Vec<[String; 2]>,
        times: Vec<f64>,
    },
}

fn twenty() -> usize {
    20
}

fn sym_tol() -> f64 {
    1e-6
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Distance { .. } => "distance",
            CheckKind::Ball { .. } => "ball",
            CheckKind::Doubling { .. } => "doubling",
            CheckKind::Poincare { .. } => "poincare",
            CheckKind::Sobolev { .. } => "sobolev",
            CheckKind::Nash { .. } => "nash",
            CheckKind::Kernel { .. } => "kernel",
            CheckKind::KernelOracle { .. } => "kernel-oracle",
            CheckKind::Ultracontractivity { .. } => "ultracontractivity",
            CheckKind::Semigroup { .. } => "semigroup",
            CheckKind::Symmetry { .. } => "symmetry",
            CheckKind::HarnackParabolic { .. } => "harnack-parabolic",
            CheckKind::HarnackElliptic { .. } => "harnack-elliptic",
            CheckKind::GaussianFit { .. } => "gaussian-fit",
        }
    }
}

impl SuiteConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("h", self.h)?;
        positive("dt", self.dt)?;
        positive("margin_tol", self.margin_tol)?;
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(CliError::Config(format!("theta {} outside [0.5, 1]", self.theta)));
        }
        for (i, c) in self.checks.iter().enumerate() {
            if let Some(h) = c.h {
                positive(&format!("checks[{i}].h"), h)?;
            }
            if let Some(dt) = c.dt {
                positive(&format!("checks[{i}].dt"), dt)?;
            }
            if c.graph.is_none() && self.graph.is_none() {
                return Err(CliError::Config(format!("checks[{i}] has no graph and the suite none either")));
            }
        }
        Ok(())
    }
}

pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// What one check produced.
pub struct CheckOutput {
    pub rows: Vec<Value>,
    pub csv: Option<String>,
    pub pass: bool,
    pub summary: String,
}

pub struct SuiteResult {
    pub outputs: Vec<(String, bool, CliResult<CheckOutput>)>,
}

impl SuiteResult {
    /// 0 when every asserted check passed, 3 on any solver failure, else 1.
    pub fn exit_code(&self) -> i32 {
        let mut code = 0;
        for (_, asserted, out) in &self.outputs {
            match out {
                Err(e) => code = code.max(e.code()),
                Ok(o) if *asserted && !o.pass => code = code.max(1),
                Ok(_) => {}
            }
        }
        code
    }
}

pub fn run_suite(cfg: &SuiteConfig, seed: u64) -> SuiteResult {
    let outputs = cfg
        .checks
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let label = format!("{:02}-{}", i + 1, c.kind.name());
            let out = run_check(cfg, c, seed.wrapping_add(i as u64));
            (label, c.assert, out)
        })
        .collect();
    SuiteResult { outputs }
}

/// Writes `report.jsonl`, one CSV per tabular check and `meta.json` (the
/// only file with a timestamp). Rows are written in declared check order.
pub fn write_reports(dir: &Path, cfg: &SuiteConfig, hash: &str, seed: u64, res: &SuiteResult) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut report = String::new();
    for (label, asserted, out) in &res.outputs {
        let base = json!({"check": label, "config_hash": hash, "seed": seed, "asserted": asserted});
        match out {
            Ok(o) => {
                for row in &o.rows {
                    let mut line = base.clone();
                    line["pass"] = json!(o.pass);
                    line["row"] = row.clone();
                    report.push_str(&fmt::json(&line));
                    report.push('\n');
                }
                if let Some(csv) = &o.csv {
                    std::fs::write(dir.join(format!("{label}.csv")), csv)?;
                }
            }
            Err(e) => {
                let mut line = base;
                line["error"] = json!(e.message());
                report.push_str(&fmt::json(&line));
                report.push('\n');
            }
        }
    }
    std::fs::write(dir.join("report.jsonl"), report)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({"suite": cfg.name, "config_hash": hash, "seed": seed, "checks": res.outputs.len(), "unix_time": stamp});
    std::fs::write(dir.join("meta.json"), fmt::json(&meta) + "\n")
}

pub fn summary_table(res: &SuiteResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:<6} summary", "check", "status");
    for (label, asserted, o) in &res.outputs {
        let (status, text) = match o {
            Ok(o) if o.pass => ("pass", o.summary.clone()),
            Ok(o) if *asserted => ("FAIL", o.summary.clone()),
            Ok(o) => ("info", o.summary.clone()),
            Err(e) => ("ERROR", e.message().to_string()),
        };
        let _ = writeln!(out, "{label:<24} {status:<6} {text}");
    }
    out
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn gauss(t: f64, d: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-d * d / (4.0 * t)).exp()
}

fn run_check(cfg: &SuiteConfig, c: &Check, seed: u64) -> CliResult<CheckOutput> {
    let g = c.graph.as_ref().or(cfg.graph.as_ref()).expect("validated").build()?;
    let params = HeatParams {
        theta: cfg.theta,
        weighted: g.is_weighted(),
        ..HeatParams::new(c.h.unwrap_or(cfg.h), c.dt.unwrap_or(cfg.dt))
    };
    execute(&g, &c.kind, &params, seed)
}

/// Runs one check on a built graph; shared by suites and subcommands.
pub fn execute(g: &MetricGraph, kind: &CheckKind, p: &HeatParams, seed: u64) -> CliResult<CheckOutput> {
    match kind {
        CheckKind::Distance { from, to, weighted } => {
            let (x, y) = (spec::point(from)?, spec::point(to)?);
            let d = if *weighted { weighted_distance(g, x, y)? } else { distance(g, x, y)? };
            Ok(CheckOutput {
                rows: vec![json!({"from": from, "to": to, "weighted": weighted, "distance": d})],
                csv: None,
                pass: true,
                summary: fmt::sci(d),
            })
        }
        CheckKind::Ball { center, radius } => {
            let b = ball_geometry(g, spec::point(center)?, *radius)?;
            Ok(CheckOutput {
                summary: format!("volume {}", fmt::sci(b.volume)),
                rows: vec![to_value(&b)],
                csv: None,
                pass: true,
            })
        }
        CheckKind::Doubling { centers, radii } => {
            let scan = doubling_scan(g, &spec::points(centers)?, radii)?;
            Ok(CheckOutput {
                summary: format!("{} rows, max ratio {}", scan.rows.len(), fmt::sci(scan.max_ratio)),
                pass: scan.all_pass(),
                csv: Some(scan.to_csv()),
                rows: scan.rows.iter().map(to_value).collect(),
            })
        }
        CheckKind::Poincare { center, radius, tests } => {
            let ball = ball_geometry(g, spec::point(center)?, *radius)?;
            let rep = poincare_check(g, &ball, p.h, *tests, seed)?;
            let mut row = to_value(&rep);
            row.as_object_mut().unwrap().remove("reports");
            Ok(CheckOutput {
                summary: format!(
                    "lambda1 {}, c_opt {} vs printed {} / derived {}",
                    fmt::sci(rep.lambda1),
                    fmt::sci(rep.c_opt),
                    rep.c_printed,
                    rep.c_derived
                ),
                pass: rep.holds_derived,
                csv: None,
                rows: std::iter::once(row).chain(rep.reports.iter().map(to_value)).collect(),
            })
        }
        CheckKind::Sobolev {
            p: exp,
            q,
            samples,
            center,
            radius,
        } => {
            let mesh = build_mesh(g, p.h)?;
            let k = assemble_stiffness(&mesh, false)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut reports = Vec::new();
            for _ in 0..*samples {
                if g.is_truncation() {
                    let (c, r) = match (center, radius) {
                        (Some(c), Some(r)) => (spec::point(c)?, *r),
                        _ => {
                            return Err(CliError::Config(
                                "sobolev on a truncated graph needs center and radius for the support".into(),
                            ))
                        }
                    };
                    let v = random_supported_function(&mesh, &k, c, r, &mut rng)?;
                    reports.push(sobolev_infinite_check(&DiscreteFunction::new(&mesh, v)?, *exp)?);
                } else {
                    let v = random_test_function(&mesh, &k, &mut rng);
                    reports.extend(sobolev_compact_check(&DiscreteFunction::new(&mesh, v)?, *exp, q.unwrap_or(*exp))?);
                }
            }
            inequality_output(reports)
        }
        CheckKind::Nash { center, radius, samples } => {
            let mesh = build_mesh(g, p.h)?;
            let k = assemble_stiffness(&mesh, false)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = spec::point(center)?;
            let mut reports = Vec::new();
            for _ in 0..*samples {
                let v = random_supported_function(&mesh, &k, c, *radius, &mut rng)?;
                reports.push(nash_check(&DiscreteFunction::new(&mesh, v)?)?);
            }
            inequality_output(reports)
        }
        CheckKind::Kernel { source, times } => {
            let cols = heat_kernel_columns(g, p, spec::point(source)?, times, &[])?;
            let mut csv = String::new();
            for (t, v) in times.iter().zip(&cols.values) {
                for line in kernel_csv(&cols.mesh, v).lines().skip(usize::from(!csv.is_empty())) {
                    if csv.is_empty() {
                        let _ = writeln!(csv, "t,{line}");
                    } else {
                        let _ = writeln!(csv, "{},{line}", fmt::sci(*t));
                    }
                }
            }
            let rows = times
                .iter()
                .zip(&cols.values)
                .zip(&cols.masses)
                .map(|((t, v), m)| {
                    json!({"source": cols.source.to_string(), "t": t, "mass": m,
                           "min": v.iter().copied().fold(f64::INFINITY, f64::min),
                           "max": v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                           "h": p.h, "dt": p.dt, "theta": p.theta})
                })
                .collect();
            Ok(CheckOutput {
                summary: format!("{} columns, {} steps", times.len(), cols.stats.steps),
                rows,
                csv: Some(csv),
                pass: true,
            })
        }
        CheckKind::KernelOracle {
            source,
            times,
            max_distance,
            tol,
            half_line,
        } => {
            let y = spec::point(source)?;
            let cols = heat_kernel_columns(g, p, y, times, &[])?;
            let factor = if *half_line { 2.0 } else { 1.0 };
            let dists: Vec<f64> = cols
                .mesh
                .dof_points()
                .iter()
                .map(|&x| distance(g, y, x))
                .collect::<heatgraph::Result<_>>()?;
            let mut csv = String::from("t,d,numeric,exact\n");
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for (t, v) in times.iter().zip(&cols.values) {
                let mut num: f64 = 0.0;
                let mut den: f64 = 0.0;
                for (d, &dist) in dists.iter().enumerate() {
                    if dist <= *max_distance {
                        let exact = factor * gauss(*t, dist);
                        num = num.max((v[d] - exact).abs());
                        den = den.max(exact);
                        let _ = writeln!(csv, "{},{},{},{}", fmt::sci(*t), fmt::sci(dist), fmt::sci(v[d]), fmt::sci(exact));
                    }
                }
                worst = worst.max(num / den);
                rows.push(json!({"t": t, "sup_rel_error": num / den, "tol": tol, "half_line": half_line}));
            }
            Ok(CheckOutput {
                summary: format!("worst sup-norm relative error {}", fmt::sci(worst)),
                pass: worst <= *tol,
                rows,
                csv: Some(csv),
            })
        }
        CheckKind::Ultracontractivity { points, times } => {
            let rep = ultracontractivity_scan(g, p, times, &spec::points(points)?)?;
            let mut csv = String::from("t,x,p,scaled\n");
            for r in &rep.rows {
                let _ = writeln!(csv, "{},{},{},{}", fmt::sci(r.t), r.x, fmt::sci(r.p), fmt::sci(r.scaled));
            }
            Ok(CheckOutput {
                summary: format!("c_emp {}, variation {}", fmt::sci(rep.c_emp), fmt::sci(rep.variation)),
                pass: rep.c_emp.is_finite(),
                rows: vec![json!({"c_emp": rep.c_emp, "min_scaled": rep.min_scaled, "variation": rep.variation})],
                csv: Some(csv),
            })
        }
        CheckKind::Semigroup { source, t, s } => {
            let rep = semigroup_check(g, p, spec::point(source)?, *t, *s)?;
            Ok(CheckOutput {
                summary: format!("discrepancy {} vs scheme error {}", fmt::sci(rep.discrepancy), fmt::sci(rep.scheme_error)),
                pass: rep.pass,
                rows: vec![to_value(&rep)],
                csv: None,
            })
        }
        CheckKind::Symmetry { points, t, tol } => {
            let rep = symmetry_check(g, p, &spec::points(points)?, *t)?;
            let rel = rep.max_asymmetry / rep.sup_p;
            Ok(CheckOutput {
                summary: format!("{} pairs, asymmetry {} of sup", rep.pairs, fmt::sci(rel)),
                pass: rel <= *tol,
                rows: vec![to_value(&rep)],
                csv: None,
            })
        }
        CheckKind::HarnackParabolic { center, r, seeds } => {
            let seeds = seeds.iter().map(|s| spec::seed(s)).collect::<CliResult<Vec<_>>>()?;
            let cyl = CylinderParams::new(spec::point(center)?, *r);
            let rep = parabolic_harnack_ratio(g, &cyl, &seeds, p)?;
            Ok(CheckOutput {
                summary: format!("max ratio {} (lower bound for c_H)", fmt::sci(rep.max_ratio)),
                pass: rep.rows.iter().all(|r| r.rejected.is_none()),
                rows: vec![to_value(&rep)],
                csv: None,
            })
        }
        CheckKind::HarnackElliptic { center, r, samples } => {
            let fns: Vec<Box<dyn Fn(Point) -> f64 + '_>> = samples
                .iter()
                .map(|vals| -> Box<dyn Fn(Point) -> f64 + '_> { Box::new(move |x| boundary_value(g, vals, x)) })
                .collect();
            let refs: Vec<&dyn Fn(Point) -> f64> = fns.iter().map(|f| f.as_ref()).collect();
            let rep = elliptic_harnack_ratio(g, spec::point(center)?, *r, p.h, &refs)?;
            Ok(CheckOutput {
                summary: format!("max ratio {}", fmt::sci(rep.max_ratio)),
                pass: rep.rows.iter().all(|r| r.maximum_principle),
                rows: vec![to_value(&rep)],
                csv: None,
            })
        }
        CheckKind::GaussianFit { pairs, times } => {
            let pairs = pairs
                .iter()
                .map(|[x, y]| Ok((spec::point(x)?, spec::point(y)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let fit = gaussian_bound_fit(g, p, &pairs, times)?;
            let mut row = to_value(&fit);
            row.as_object_mut().unwrap().remove("rows");
            Ok(CheckOutput {
                summary: format!(
                    "C1 in (0, {}], C2 in [{}, inf), prefactor {}",
                    fmt::sci(fit.c1_upper),
                    fmt::sci(fit.c2_lower),
                    fit.best_prefactor
                ),
                pass: fit.lower_feasible() && fit.upper_feasible(),
                csv: Some(fit.to_csv()),
                rows: vec![row],
            })
        }
    }
}

/// Value of a per-edge boundary sample at a boundary node: the entry of
/// the node's edge, or of the first incident edge at a vertex.
pub fn boundary_value(g: &MetricGraph, vals: &[f64], x: Point) -> f64 {
    let ei = match x {
        Point::Interior { edge, .. } => g.edge_index(edge).ok(),
        Point::Vertex(v) => g
            .vertex_index(v)
            .ok()
            .and_then(|vi| g.incident(vi).first().copied()),
    };
    ei.and_then(|i| vals.get(i).copied()).unwrap_or(0.0)
}

fn inequality_output(reports: Vec<heatgraph::inequality::InequalityReport>) -> CliResult<CheckOutput> {
    let fails = reports.iter().filter(|r| !r.pass).count();
    let worst = reports.iter().map(|r| r.c_meas).fold(0.0, f64::max);
    Ok(CheckOutput {
        summary: format!("{} reports, {fails} violations, max measured constant {}", reports.len(), fmt::sci(worst)),
        pass: fails == 0,
        rows: reports.iter().map(to_value).collect(),
        csv: None,
    })
}
