//! Plain ASCII mesh files: `dim d`, `vertices n` + n coordinate lines,
//! `cells m` + m lines of 0-based vertex ids.

use super::MacroMesh;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

fn header(lines: &mut dyn Iterator<Item = (usize, &str)>, key: &str) -> Result<(usize, usize)> {
    let (no, line) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing `{key}` line") })?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::Parse { line: no, msg: format!("expected `{key} <n>`") });
    }
    let n = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or(Error::Parse { line: no, msg: format!("bad count after `{key}`") })?;
    Ok((no, n))
}

pub fn parse_mesh(text: &str) -> Result<MacroMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, d) = header(&mut lines, "dim")?;
    let (_, nv) = header(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, l) = lines.next().ok_or(Error::Parse { line: 0, msg: "truncated vertex list".into() })?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse { line: no, msg: e.to_string() }))
            .collect::<Result<_>>()?;
        if v.len() != d {
            return Err(Error::Parse { line: no, msg: format!("expected {d} coordinates, found {}", v.len()) });
        }
        vertices.push(v);
    }
    let (_, nc) = header(&mut lines, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (no, l) = lines.next().ok_or(Error::Parse { line: 0, msg: "truncated cell list".into() })?;
        let c: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse { line: no, msg: e.to_string() }))
            .collect::<Result<_>>()?;
        cells.push(c);
    }
    MacroMesh::new(vertices, cells)
}

pub fn format_mesh(mesh: &MacroMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dim {}", mesh.dim());
    let _ = writeln!(s, "vertices {}", mesh.num_vertices());
    for v in mesh.vertices() {
        let row: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    let _ = writeln!(s, "cells {}", mesh.num_cells());
    for c in mesh.cells() {
        let row: Vec<String> = c.vertices.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn read_mesh(path: &Path) -> Result<MacroMesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn write_mesh(mesh: &MacroMesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}
