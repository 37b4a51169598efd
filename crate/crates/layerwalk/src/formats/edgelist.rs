//! Plain-text typed edge lists: `u v layer_id` per line.
//!
//! Comment lines start with `#`. Three comment directives carry metadata:
//! `# year Y`, `# nodes N` and `# layers name0 name1 ...`. Without them the
//! node count is the largest id plus one and layers take canonical names.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use layerwalk_core::graph::{canonical_layer_names, LayerId, MultiplexGraph, NodeId};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_string};

pub fn to_string(graph: &MultiplexGraph) -> String {
    let mut out = String::with_capacity(graph.num_edges() * 14 + 128);
    out.push_str("# multiplex edge list: u v layer_id\n");
    let _ = writeln!(out, "# year {}", graph.year());
    let _ = writeln!(out, "# nodes {}", graph.num_nodes());
    let _ = writeln!(out, "# layers {}", graph.layer_names().join(" "));
    for (u, v, l) in graph.edges() {
        let _ = writeln!(out, "{u} {v} {l}");
    }
    out
}

pub fn write(path: &Path, graph: &MultiplexGraph) -> Result<()> {
    atomic_write(path, to_string(graph).as_bytes())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

pub fn parse(path: &Path, text: &str) -> Result<MultiplexGraph> {
    let mut year = 0i32;
    let mut nodes: Option<u32> = None;
    let mut names: Option<Vec<String>> = None;
    let mut edges: Vec<(NodeId, NodeId, LayerId)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            match parts.next() {
                Some("year") => {
                    year = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err(path, lineno, "year directive needs an integer"))?;
                }
                Some("nodes") => {
                    nodes = Some(
                        parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| parse_err(path, lineno, "nodes directive needs a count"))?,
                    );
                }
                Some("layers") => names = Some(parts.map(str::to_string).collect()),
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, lineno, format!("expected `u v layer_id`, found {} fields", fields.len())));
        }
        let num = |s: &str, what: &str| -> Result<u32> {
            s.parse::<u32>().map_err(|_| parse_err(path, lineno, format!("{what} {s:?} is not a non-negative integer")))
        };
        let u = num(fields[0], "node")?;
        let v = num(fields[1], "node")?;
        let l = num(fields[2], "layer id")?;
        let l = u16::try_from(l).map_err(|_| parse_err(path, lineno, "layer id too large"))?;
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop on node {u}")));
        }
        if let Some(n) = nodes {
            if u >= n || v >= n {
                return Err(parse_err(path, lineno, format!("node id outside the declared {n} nodes")));
            }
        }
        if let Some(names) = &names {
            if usize::from(l) >= names.len() {
                return Err(parse_err(path, lineno, format!("layer id {l} but only {} layers declared", names.len())));
            }
        }
        edges.push((u, v, LayerId(l)));
    }
    let num_nodes = match nodes {
        Some(n) => n,
        None => edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0),
    };
    let names = names.unwrap_or_else(|| {
        let layers = edges.iter().map(|e| e.2.index() + 1).max().unwrap_or(0);
        let canonical = canonical_layer_names();
        if layers <= canonical.len() {
            canonical
        } else {
            (0..layers).map(|i| format!("layer{i}")).collect()
        }
    });
    MultiplexGraph::from_edges(num_nodes, year, names, edges).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read(path: &Path) -> Result<MultiplexGraph> {
    parse(path, &read_string(path)?)
}

/// File name used for one yearly snapshot inside a run directory.
pub fn year_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("graph_{year}.txt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MultiplexGraph {
        let edges = [(0, 1, LayerId(0)), (1, 2, LayerId(3)), (0, 2, LayerId(1)), (1, 0, LayerId(4))];
        MultiplexGraph::from_edges(4, 2011, canonical_layer_names(), edges).unwrap()
    }

    #[test]
    fn round_trip() {
        let g = sample();
        let back = parse(Path::new("g.txt"), &to_string(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn headerless_input_uses_defaults() {
        let g = parse(Path::new("g.txt"), "# plain\n0 1 0\n\n2 1 2\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.layer_names().len(), 5);
        assert!(g.has_edge(1, 2, LayerId(2)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("0 1 0\n0 x 1\n", 2, "not a non-negative integer"),
            ("0 1\n", 1, "fields"),
            ("# nodes 2\n0 5 0\n", 2, "outside"),
            ("# layers a b\n0 1 2\n", 2, "layer id"),
            ("3 3 0\n", 1, "self-loop"),
        ];
        for (text, line, needle) in cases {
            let err = parse(Path::new("bad.txt"), text).unwrap_err();
            match &err {
                Error::Parse { line: l, message, .. } => {
                    assert_eq!(*l, line, "{text:?}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("unexpected {other}"),
            }
            assert!(err.to_string().starts_with("bad.txt:"));
        }
    }
}
