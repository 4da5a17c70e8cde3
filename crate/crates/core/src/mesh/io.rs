//! Plain-text mesh format.
//!
//! ```text
//! dim=2 nv=<int> nt=<int>
//! x y                      (nv lines)
//! v0 v1 v2 boundary_marker (nt lines)
//! ```
//!
//! The vertex order of a triangle encodes its refinement edge `(v0, v1)`, and
//! `boundary_marker` is a bit mask with bit `i` set when the edge opposite `vi`
//! lies on the boundary. Reading a file creates a new forest whose roots are the
//! listed triangles.

use super::{Forest, SimplicialMesh};
use crate::error::{Error, Result};
use std::fmt::Write as _;

pub fn write_mesh(mesh: &SimplicialMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dim=2 nv={} nt={}", mesh.num_vertices(), mesh.num_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?}", v[0], v[1]);
    }
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangle(t);
        let _ = writeln!(out, "{a} {b} {c} {}", mesh.triangle_markers(t));
    }
    out
}

pub fn read_mesh(text: &str) -> Result<SimplicialMesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let mut nv = None;
    let mut nt = None;
    let mut dim = None;
    for tok in header.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| perr(hl, format!("malformed header token `{tok}`")))?;
        let v: usize = v.parse().map_err(|_| perr(hl, format!("bad integer in `{tok}`")))?;
        match k {
            "dim" => dim = Some(v),
            "nv" => nv = Some(v),
            "nt" => nt = Some(v),
            _ => return Err(perr(hl, format!("unknown header key `{k}`"))),
        }
    }
    if dim != Some(2) {
        return Err(perr(hl, "only dim=2 is supported".into()));
    }
    let nv = nv.ok_or_else(|| perr(hl, "missing nv".into()))?;
    let nt = nt.ok_or_else(|| perr(hl, "missing nt".into()))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, line) = lines.next().ok_or_else(|| perr(hl, "missing vertex lines".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| perr(l, format!("bad coordinate `{s}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 2 {
            return Err(perr(l, "expected two coordinates".into()));
        }
        vertices.push([vals[0], vals[1]]);
    }
    let mut roots = Vec::with_capacity(nt);
    let mut markers = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (l, line) = lines.next().ok_or_else(|| perr(hl, "missing triangle lines".into()))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| perr(l, format!("bad index `{s}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 4 {
            return Err(perr(l, "expected `v0 v1 v2 boundary_marker`".into()));
        }
        if vals[3] > 7 {
            return Err(perr(l, "boundary marker must be a 3-bit mask".into()));
        }
        roots.push([vals[0], vals[1], vals[2]]);
        markers.push(vals[3] as u8);
    }
    if let Some((l, _)) = lines.next() {
        return Err(perr(l, "trailing content".into()));
    }
    let forest = Forest::from_labeled(vertices, roots, markers)?;
    SimplicialMesh::from_keys(forest.clone(), (0..forest.num_roots() as u32).map(super::ElementKey::root).collect())
}

fn perr(line: usize, msg: String) -> Error {
    Error::Parse { line: line + 1, msg }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_refined_mesh() {
        let m = SimplicialMesh::unit_square().refine_uniform(3).bisect(&[0, 5]);
        let text = write_mesh(&m);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        for t in 0..m.num_triangles() {
            assert_eq!(back.triangle_markers(t), m.triangle_markers(t));
        }
        assert_eq!(write_mesh(&back), text);
    }

    #[test]
    fn roundtrip_inexact_coordinates() {
        let forest = Forest::from_triangulation(
            vec![[0.1, 0.0], [1.0 / 3.0, 0.0], [0.2, 0.7]],
            &[[0, 1, 2]],
        )
        .unwrap();
        let m = SimplicialMesh::root(&forest).refine_uniform(4);
        let text = write_mesh(&m);
        assert_eq!(write_mesh(&read_mesh(&text).unwrap()), text);
    }

    #[test]
    fn parse_errors() {
        assert!(read_mesh("").is_err());
        assert!(read_mesh("dim=3 nv=0 nt=0").is_err());
        assert!(read_mesh("dim=2 nv=3 nt=1\n0 0\n1 0\n0 1\n0 1 2").is_err());
        // clockwise triangle
        assert!(read_mesh("dim=2 nv=3 nt=1\n0 0\n1 0\n0 1\n0 2 1 0").is_err());
        assert!(read_mesh("dim=2 nv=3 nt=1\n0 0\n1 0\n0 1\n0 1 2 7").is_ok());
    }
}
