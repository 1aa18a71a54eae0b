//! Instance file formats: TSPLIB ATSP (EXPLICIT FULL_MATRIX) and a native
//! JSON digraph-with-weights format whose rationals are "p/q" strings.

use crate::error::{AtspError, Result};
use crate::graph::Digraph;
use crate::ratio::{rat_from_string, rat_to_string, Rat};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Tsplib,
    Json,
}

impl FileFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tsplib" => Ok(FileFormat::Tsplib),
            "json" => Ok(FileFormat::Json),
            other => Err(AtspError::Unsupported(format!("unknown format `{other}`"))),
        }
    }
}

/// Sniffs JSON by the leading brace; anything else is treated as TSPLIB.
pub fn parse_instance(text: &str) -> Result<(Digraph, Vec<Rat>)> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_tsplib(text)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightedDigraphFile {
    n: usize,
    edges: Vec<WEdgeFile>,
}

#[derive(Serialize, Deserialize)]
struct WEdgeFile {
    tail: usize,
    head: usize,
    w: String,
}

pub fn parse_json(text: &str) -> Result<(Digraph, Vec<Rat>)> {
    let file: WeightedDigraphFile =
        serde_json::from_str(text).map_err(|e| AtspError::Parse {
            line: 0,
            msg: format!("json: {e}"),
        })?;
    let mut g = Digraph::new(file.n);
    let mut w = Vec::new();
    for e in &file.edges {
        if e.tail >= file.n || e.head >= file.n {
            return Err(AtspError::Parse {
                line: 0,
                msg: format!("edge ({}, {}) out of range", e.tail, e.head),
            });
        }
        g.add_edge(e.tail, e.head, None);
        w.push(rat_from_string(&e.w)?);
    }
    Ok((g, w))
}

pub fn emit_json(g: &Digraph, w: &[Rat]) -> String {
    let file = WeightedDigraphFile {
        n: g.n(),
        edges: g
            .edges()
            .iter()
            .map(|e| WEdgeFile {
                tail: e.tail,
                head: e.head,
                w: rat_to_string(&w[e.id]),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serialize digraph")
}

/// TSPLIB ATSP with TYPE: ATSP, EDGE_WEIGHT_TYPE: EXPLICIT,
/// EDGE_WEIGHT_FORMAT: FULL_MATRIX. The full digraph is built from the
/// matrix with self-loops dropped; integer weights become exact rationals.
pub fn parse_tsplib(text: &str) -> Result<(Digraph, Vec<Rat>)> {
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<String> = None;
    let mut in_matrix = false;
    let mut numbers: Vec<(i64, usize)> = Vec::new(); // (value, line)

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line == "EOF" {
            continue;
        }
        if in_matrix {
            if line.contains(':') && line.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            {
                in_matrix = false;
            } else {
                for tok in line.split_whitespace() {
                    let v: i64 = tok.parse().map_err(|_| AtspError::Parse {
                        line: lineno,
                        msg: format!("bad matrix entry `{tok}`"),
                    })?;
                    numbers.push((v, lineno));
                }
                continue;
            }
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim().to_uppercase(), v.trim().to_string()),
            None => (line.to_uppercase(), String::new()),
        };
        match key.as_str() {
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|_| AtspError::Parse {
                    line: lineno,
                    msg: format!("bad DIMENSION `{value}`"),
                })?)
            }
            "EDGE_WEIGHT_TYPE" => weight_type = Some(value),
            "EDGE_WEIGHT_FORMAT" => weight_format = Some(value),
            "EDGE_WEIGHT_SECTION" => in_matrix = true,
            _ => {}
        }
    }
    let n = dimension.ok_or(AtspError::Parse {
        line: 0,
        msg: "missing DIMENSION".into(),
    })?;
    if let Some(t) = &weight_type {
        if t != "EXPLICIT" {
            return Err(AtspError::Parse {
                line: 0,
                msg: format!("unsupported EDGE_WEIGHT_TYPE `{t}`"),
            });
        }
    }
    if let Some(f) = &weight_format {
        if f != "FULL_MATRIX" {
            return Err(AtspError::Parse {
                line: 0,
                msg: format!("unsupported EDGE_WEIGHT_FORMAT `{f}`"),
            });
        }
    }
    if numbers.len() != n * n {
        let line = numbers.last().map(|x| x.1).unwrap_or(0);
        return Err(AtspError::Parse {
            line,
            msg: format!("matrix has {} entries, expected {}", numbers.len(), n * n),
        });
    }
    for (v, line) in &numbers {
        if *v < 0 {
            return Err(AtspError::Parse {
                line: *line,
                msg: "negative weight in matrix".into(),
            });
        }
    }
    let mut g = Digraph::new(n);
    let mut w = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            g.add_edge(u, v, None);
            w.push(crate::ratio::rint(numbers[u * n + v].0));
        }
    }
    Ok((g, w))
}

pub fn emit_tsplib(name: &str, g: &Digraph, w: &[Rat]) -> Result<String> {
    let n = g.n();
    // Dense matrix; missing arcs are not representable in FULL_MATRIX.
    let mut matrix = vec![vec![None::<&Rat>; n]; n];
    for e in g.edges() {
        matrix[e.tail][e.head] = Some(&w[e.id]);
    }
    let mut out = String::new();
    out.push_str(&format!("NAME: {name}\n"));
    out.push_str("TYPE: ATSP\n");
    out.push_str(&format!("DIMENSION: {n}\n"));
    out.push_str("EDGE_WEIGHT_TYPE: EXPLICIT\n");
    out.push_str("EDGE_WEIGHT_FORMAT: FULL_MATRIX\n");
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for u in 0..n {
        let mut row = Vec::with_capacity(n);
        for (v, cell) in matrix[u].iter().enumerate() {
            if u == v {
                row.push("0".to_string());
                continue;
            }
            match cell {
                Some(r) => {
                    if !crate::ratio::is_integral(r) {
                        return Err(AtspError::Unsupported(
                            "TSPLIB output needs integer weights".into(),
                        ));
                    }
                    row.push(rat_to_string(r));
                }
                None => {
                    return Err(AtspError::Unsupported(
                        "TSPLIB output needs a complete digraph".into(),
                    ))
                }
            }
        }
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push_str("EOF\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::rint;

    #[test]
    fn tsplib_k3() {
        let text = "NAME: k3\nTYPE: ATSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\n\
                    EDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n\
                    0 1 1\n1 0 1\n1 1 0\nEOF\n";
        let (g, w) = parse_tsplib(text).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.m(), 6);
        assert!(w.iter().all(|x| *x == rint(1)));
    }

    #[test]
    fn tsplib_dimension_mismatch() {
        let text = "DIMENSION: 3\nEDGE_WEIGHT_SECTION\n0 1\n1 0\n";
        match parse_tsplib(text) {
            Err(AtspError::Parse { msg, .. }) => assert!(msg.contains("entries")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip() {
        let (g, w) = crate::gen::random_instance(4, 9);
        let text = emit_json(&g, &w);
        let (g2, w2) = parse_json(&text).unwrap();
        assert_eq!(g.n(), g2.n());
        assert_eq!(w, w2);
        // Sniffer picks JSON.
        let (g3, _) = parse_instance(&text).unwrap();
        assert_eq!(g3.m(), g.m());
    }

    #[test]
    fn tsplib_roundtrip() {
        let (g, w) = crate::gen::random_instance(5, 2);
        let text = emit_tsplib("t", &g, &w).unwrap();
        let (g2, w2) = parse_tsplib(&text).unwrap();
        assert_eq!(g.m(), g2.m());
        assert_eq!(w, w2);
    }
}
