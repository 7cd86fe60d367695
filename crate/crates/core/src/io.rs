//! Line-oriented chain files and trajectory files.
//!
//! ```text
//! # two-state chain
//! states 2
//! mode expectation        # optional; `edge-function` by default
//! edge 0 0 0.25
//! edge 0 1 0.25
//! edge 1 0 0.25
//! edge 1 1 0.25
//! ```
//!
//! `#` starts a comment. Edges may appear in any order; values are optional
//! but must be given on all edges or none. Numbers use Rust's
//! locale-independent float syntax (decimal or scientific).

use std::fmt::Write as _;
use std::sync::Arc;

use crate::coordinates::ExpectationPoint;
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::inference::Trajectory;
use crate::spectral::EdgeFunction;

/// What the values in a chain file represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    EdgeFunction,
    Expectation,
}

impl Mode {
    fn keyword(self) -> &'static str {
        match self {
            Mode::EdgeFunction => "edge-function",
            Mode::Expectation => "expectation",
        }
    }
}

/// A parsed chain file: the graph plus optional values in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFile {
    pub graph: Arc<ChainGraph>,
    pub mode: Mode,
    pub values: Option<Vec<f64>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token
        .parse()
        .map_err(|_| parse_error(line, format!("expected a state index, found `{token}`")))
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, format!("expected a finite number, found `{token}`")))
}

impl ChainFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut num_states = None;
        let mut mode = None;
        let mut edges: Vec<((usize, usize), Option<f64>)> = Vec::new();
        let mut last_line = 0;

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let Some((&keyword, args)) = tokens.split_first() else {
                continue;
            };
            match keyword {
                "states" if num_states.is_none() && edges.is_empty() => {
                    let [n] = args else {
                        return Err(parse_error(line, "`states` takes exactly one argument"));
                    };
                    num_states = Some(parse_usize(n, line)?);
                }
                "states" => return Err(parse_error(line, "`states` must come first and only once")),
                _ if num_states.is_none() => {
                    return Err(parse_error(line, "first line must be `states N`"));
                }
                "mode" if mode.is_none() && edges.is_empty() => {
                    mode = Some(match args {
                        ["expectation"] => Mode::Expectation,
                        ["edge-function"] => Mode::EdgeFunction,
                        _ => return Err(parse_error(line, "mode is `expectation` or `edge-function`")),
                    });
                }
                "mode" => return Err(parse_error(line, "`mode` must precede the edges and appear once")),
                "edge" => {
                    let (x, y, value) = match args {
                        [x, y] => (x, y, None),
                        [x, y, v] => (x, y, Some(parse_value(v, line)?)),
                        _ => return Err(parse_error(line, "expected `edge X Y [VALUE]`")),
                    };
                    edges.push(((parse_usize(x, line)?, parse_usize(y, line)?), value));
                }
                other => return Err(parse_error(line, format!("unknown keyword `{other}`"))),
            }
        }

        let num_states = num_states.ok_or_else(|| parse_error(last_line.max(1), "missing `states N`"))?;
        let with_values = edges.iter().filter(|(_, v)| v.is_some()).count();
        if with_values != 0 && with_values != edges.len() {
            return Err(parse_error(last_line, "values must be given on all edges or none"));
        }
        let pairs: Vec<_> = edges.iter().map(|&(e, _)| e).collect();
        let graph = Arc::new(ChainGraph::new(num_states, &pairs)?);
        let values = (with_values > 0).then(|| {
            let mut values = vec![0.0; graph.num_edges()];
            for &((x, y), v) in &edges {
                values[graph.edge_index(x, y).expect("edge just inserted")] = v.expect("checked");
            }
            values
        });
        Ok(Self {
            graph,
            mode: mode.unwrap_or_default(),
            values,
        })
    }

    fn require_values(&self) -> Result<Vec<f64>> {
        self.values
            .clone()
            .ok_or_else(|| parse_error(0, "chain file carries no edge values"))
    }

    /// Interprets the values as a positive edge function.
    pub fn edge_function(&self) -> Result<EdgeFunction> {
        if self.mode != Mode::EdgeFunction {
            return Err(parse_error(0, "expected an edge-function file, found `mode expectation`"));
        }
        EdgeFunction::new(Arc::clone(&self.graph), self.require_values()?)
    }

    /// Interprets the values as an expectation point.
    pub fn expectation_point(&self) -> Result<ExpectationPoint> {
        if self.mode != Mode::Expectation {
            return Err(parse_error(0, "expected a file with `mode expectation`"));
        }
        ExpectationPoint::new(Arc::clone(&self.graph), self.require_values()?)
    }
}

fn render(graph: &ChainGraph, mode: Mode, values: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states {}", graph.num_states());
    if mode == Mode::Expectation {
        let _ = writeln!(out, "mode {}", mode.keyword());
    }
    for (&(x, y), v) in graph.edges().iter().zip(values) {
        let _ = writeln!(out, "edge {x} {y} {v:.16e}");
    }
    out
}

/// Serializes an edge function; reading it back gives the same bits.
pub fn write_edge_function(f: &EdgeFunction) -> String {
    render(f.graph(), Mode::EdgeFunction, f.values())
}

/// Serializes an expectation point with a `mode expectation` header.
pub fn write_expectation_point(eta: &ExpectationPoint) -> String {
    render(eta.graph(), Mode::Expectation, eta.values())
}

/// Parses one trajectory per non-empty line.
pub fn parse_trajectories(graph: &Arc<ChainGraph>, text: &str) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let states = content
            .split_whitespace()
            .map(|t| parse_usize(t, index + 1))
            .collect::<Result<Vec<_>>>()?;
        out.push(Trajectory::new(Arc::clone(graph), states)?);
    }
    Ok(out)
}

/// One trajectory per line, states separated by single spaces.
pub fn write_trajectories(trajectories: &[Trajectory]) -> String {
    trajectories.iter().map(|t| format!("{t}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_unsorted_edges_with_comments() {
        let text = "# example\nstates 2\n\nedge 1 1 4  # last\nedge 0 1 2\nedge 1 0 3e0\nedge 0 0 1.0\n";
        let file = ChainFile::parse(text).unwrap();
        assert_eq!(file.mode, Mode::EdgeFunction);
        assert_eq!(file.values.as_deref(), Some(&[1.0, 2.0, 3.0, 4.0][..]));
        assert_eq!(file.edge_function().unwrap().values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(file.expectation_point().is_err());
    }

    #[test]
    fn expectation_mode() {
        let text = "states 2\nmode expectation\nedge 0 1 0.5\nedge 1 0 0.5\n";
        let file = ChainFile::parse(text).unwrap();
        assert_eq!(file.mode, Mode::Expectation);
        let eta = file.expectation_point().unwrap();
        assert_eq!(write_expectation_point(&eta), "states 2\nmode expectation\nedge 0 1 5.0000000000000000e-1\nedge 1 0 5.0000000000000000e-1\n");
        assert!(file.edge_function().is_err());
    }

    #[test]
    fn graph_only_file() {
        let file = ChainFile::parse("states 3\nedge 0 1\nedge 1 2\nedge 2 0\n").unwrap();
        assert_eq!(file.values, None);
        assert!(file.edge_function().is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        let cases = [
            ("edge 0 1 1\n", 1),
            ("states 2\nedge 0 1 x\n", 2),
            ("states 2\nedge 0 1 1\nedge 1 0\n", 3),
            ("states 2\nedge 0\n", 2),
            ("states 2\nmode bogus\n", 2),
            ("states 2\nvertex 0\n", 2),
            ("states 2\nedge 0 1 inf\n", 2),
            ("states 2\nstates 3\n", 2),
        ];
        for (text, line) in cases {
            match ChainFile::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        assert!(matches!(
            ChainFile::parse("states 2\nedge 0 0 1\nedge 0 1 1\nedge 1 1 1\n"),
            Err(Error::NotStronglyConnected { from: 1, to: 0 })
        ));
    }

    #[test]
    fn nonpositive_values_rejected_at_conversion() {
        let file = ChainFile::parse("states 2\nedge 0 1 -1\nedge 1 0 1\n").unwrap();
        assert!(matches!(file.edge_function(), Err(Error::NonPositiveValue { .. })));
    }

    #[test]
    fn trajectories_roundtrip() {
        let graph = Arc::new(ChainGraph::cycle(2).unwrap());
        let text = "0 1 0\n\n1 0 1 0\n";
        let ts = parse_trajectories(&graph, text).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(write_trajectories(&ts), "0 1 0\n1 0 1 0\n");
        assert!(parse_trajectories(&graph, "0 0\n").is_err());
    }
}
