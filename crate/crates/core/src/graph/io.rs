//! Text formats: edge lists and node-label files.
//!
//! Edge lists are `src <sep> dst [<sep> weight]` with tab, space or comma
//! separators (mixes allowed), `#` comment lines and blank lines ignored.
//! Self-loop lines are skipped entirely. A third column is parsed as the
//! weight when the graph is loaded as weighted and ignored otherwise, so
//! exports that carry a constant trust/flag column load cleanly.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

pub(crate) fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ' ' || c == '\t' || c == ',')
        .filter(|t| !t.is_empty())
        .collect()
}

/// Parses an edge list from a reader. See the module docs for the format.
pub fn parse_edge_list<R: BufRead>(reader: R, directed: bool, weighted: bool) -> Result<Graph> {
    let mut b = GraphBuilder::new(directed, weighted);
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                lineno,
                format!("expected `src dst [weight]`, got {} fields", fields.len()),
            ));
        }
        let weight = if weighted && fields.len() == 3 {
            let w: f64 = fields[2].parse().map_err(|_| {
                Error::parse(lineno, format!("weight `{}` is not a number", fields[2]))
            })?;
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::validation(format!(
                    "line {lineno}: edge weight must be positive, got {w}"
                )));
            }
            w
        } else {
            1.0
        };
        if fields[0] == fields[1] {
            continue; // self-loop: permitted in input, dropped at load
        }
        b.edge(fields[0], fields[1], weight);
    }
    let g = b.build();
    g.check_invariants()?;
    Ok(g)
}

/// Loads an edge list from a file path.
pub fn load_edge_list<P: AsRef<Path>>(path: P, directed: bool, weighted: bool) -> Result<Graph> {
    let f = File::open(path.as_ref())?;
    parse_edge_list(BufReader::new(f), directed, weighted)
}

/// Writes the canonical edge-list form: one edge per line, tab separated,
/// weight column only for weighted graphs. Loading the output back yields a
/// structurally identical graph (isolated nodes are not representable in
/// edge-list form and would be lost).
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    for (u, v, weight) in g.edges() {
        if g.is_weighted() {
            writeln!(w, "{}\t{}\t{}", g.external_id(u), g.external_id(v), weight)?;
        } else {
            writeln!(w, "{}\t{}", g.external_id(u), g.external_id(v))?;
        }
    }
    Ok(())
}

/// Parses a node-label file (`node <sep> label`, integer labels, same
/// separator and comment rules as edge lists). Duplicate nodes are an
/// error. Returns `(external id, raw label)` pairs in file order.
pub fn parse_node_labels<R: BufRead>(reader: R) -> Result<Vec<(String, i64)>> {
    let mut out: Vec<(String, i64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        if fields.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected `node label`, got {} fields", fields.len()),
            ));
        }
        let label: i64 = fields[1].parse().map_err(|_| {
            Error::parse(lineno, format!("label `{}` is not an integer", fields[1]))
        })?;
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::parse(
                lineno,
                format!("duplicate label for node `{}`", fields[0]),
            ));
        }
        out.push((fields[0].to_string(), label));
    }
    Ok(out)
}

/// Loads a node-label file from a path.
pub fn load_node_labels<P: AsRef<Path>>(path: P) -> Result<Vec<(String, i64)>> {
    let f = File::open(path.as_ref())?;
    parse_node_labels(BufReader::new(f))
}
