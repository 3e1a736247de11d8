//! Graph specifications, seed literals and the CLI error type.

use std::path::PathBuf;

use heatgraph::generators::{gen_lattice, gen_star, gen_tree, random_weights, LatticeLengths};
use heatgraph::harnack::Seed;
use heatgraph::{Error, MetricGraph, Point};
use serde::{Deserialize, Serialize};

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments: exit 2.
    Config(String),
    /// Solver or geometry failure: exit 3.
    Solver(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } | Error::Singular(_) | Error::Unreachable | Error::EmptyRegion(_) => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum GraphSource {
    Star {
        rays: usize,
        len: f64,
    },
    Lattice {
        dim: usize,
        side: usize,
        /// Uniform random lengths in `[lo, hi]` when both are given.
        lo: Option<f64>,
        hi: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Tree {
        branching: usize,
        depth: usize,
        #[serde(default = "one")]
        len: f64,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub lambda: f64,
    #[serde(default = "three")]
    pub pieces: usize,
    #[serde(default)]
    pub seed: u64,
}

fn three() -> usize {
    3
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GraphConfig {
    #[serde(flatten)]
    pub source: GraphSource,
    pub weights: Option<WeightSpec>,
    /// Treat the graph as a finite graph rather than a truncation of an
    /// infinite one.
    #[serde(default)]
    pub compact: bool,
}

impl GraphConfig {
    pub fn build(&self) -> CliResult<MetricGraph> {
        let g = match &self.source {
            GraphSource::Star { rays, len } => gen_star(*rays, *len, None)?,
            GraphSource::Lattice { dim, side, lo, hi, seed } => {
                let lengths = match (lo, hi) {
                    (Some(lo), Some(hi)) => LatticeLengths::Uniform {
                        lo: *lo,
                        hi: *hi,
                        seed: *seed,
                    },
                    (None, None) => LatticeLengths::Unit,
                    _ => return Err(CliError::Config("lattice needs both lo and hi".into())),
                };
                gen_lattice(*dim, *side, lengths)?
            }
            GraphSource::Tree { branching, depth, len } => gen_tree(*branching, *depth, *len)?,
            GraphSource::File { path } => read_graph(path)?,
        };
        let g = if self.compact {
            g.with_meta("truncated", serde_json::Value::Bool(false))
        } else {
            g
        };
        match &self.weights {
            Some(w) => Ok(random_weights(&g, w.lambda, w.pieces, w.seed)?),
            None => Ok(g),
        }
    }
}

pub fn read_graph(path: &std::path::Path) -> CliResult<MetricGraph> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read graph {}: {e}", path.display())))?;
    Ok(MetricGraph::from_json(&text)?)
}

pub fn point(s: &str) -> CliResult<Point> {
    s.parse::<Point>()
        .map_err(|e| CliError::Config(format!("bad point literal {s:?}: {e}")))
}

pub fn points(list: &[String]) -> CliResult<Vec<Point>> {
    list.iter().map(|s| point(s)).collect()
}

/// `kernel:<point>`, `bump:<point>:<radius>` or `const:<value>`.
pub fn seed(s: &str) -> CliResult<Seed> {
    let bad = || CliError::Config(format!("bad seed literal {s:?}"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "kernel" => Ok(Seed::Kernel(point(rest)?)),
        "bump" => {
            let (p, r) = rest.rsplit_once(':').ok_or_else(bad)?;
            let radius: f64 = r.parse().map_err(|_| bad())?;
            Ok(Seed::Bump {
                center: point(p)?,
                radius,
            })
        }
        "const" => Ok(Seed::Constant(rest.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_literals() {
        assert_eq!(seed("kernel:v:3").unwrap(), Seed::Kernel(Point::vertex(3)));
        assert_eq!(
            seed("bump:e:2:0.5:0.25").unwrap(),
            Seed::Bump {
                center: Point::on_edge(2, 0.5),
                radius: 0.25
            }
        );
        assert_eq!(seed("const:2").unwrap(), Seed::Constant(2.0));
        assert!(seed("blob:v:1").is_err());
    }

    #[test]
    fn graph_config_from_toml() {
        let c: GraphConfig = toml::from_str("generator = \"star\"\nrays = 3\nlen = 2.0\n").unwrap();
        assert_eq!(c.build().unwrap().edge_count(), 3);
        let w: GraphConfig =
            toml::from_str("generator = \"lattice\"\ndim = 1\nside = 4\n[weights]\nlambda = 2.0\n").unwrap();
        assert!(w.build().unwrap().is_weighted());
    }
}
