//! Conforming 2D triangle meshes drawn from a shared newest-vertex-bisection forest.
//!
//! Every mesh is a cut through a binary forest whose roots are the triangles of a
//! root mesh. Elements are identified by an [`ElementKey`] (root index plus the
//! sequence of child choices), so meshes refined independently from the same root
//! can be overlaid without any shared mutable state.
//!
//! Triangles are stored as `[v0, v1, v2]` with positive orientation; the refinement
//! edge is `(v0, v1)` and `v2` is the newest vertex. Local edge `i` is the edge
//! opposite local vertex `i`.

mod io;
mod overlay;
mod patch;
mod refine;

pub use io::{read_mesh, write_mesh};
pub use overlay::{ancestor_map, common_refinement, Overlay};
pub use patch::{build_patch, hat_value, PatchBuilder, VertexPatch};
pub use refine::dorfler_mark;

use crate::error::{Error, Result};
use crate::geometry::{dist, midpoint, point_key, Point, Triangle};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

static NEXT_FOREST_ID: AtomicU64 = AtomicU64::new(1);

/// Identifier of an element within its bisection forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementKey {
    pub root: u32,
    pub depth: u8,
    /// Bit `i` selects the child taken at generation `i + 1`.
    pub path: u64,
}

impl ElementKey {
    pub fn root(root: u32) -> Self {
        Self { root, depth: 0, path: 0 }
    }

    pub fn child(&self, which: u8) -> Self {
        assert!(self.depth < 63, "bisection depth limit reached");
        Self {
            root: self.root,
            depth: self.depth + 1,
            path: self.path | ((which as u64 & 1) << self.depth),
        }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.depth == 0 {
            return None;
        }
        let depth = self.depth - 1;
        Some(Self {
            root: self.root,
            depth,
            path: self.path & !(1u64 << depth),
        })
    }

    pub fn sibling(&self) -> Option<Self> {
        if self.depth == 0 {
            return None;
        }
        Some(Self {
            root: self.root,
            depth: self.depth,
            path: self.path ^ (1u64 << (self.depth - 1)),
        })
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, other: &ElementKey) -> bool {
        if self.root != other.root || self.depth > other.depth {
            return false;
        }
        let mask = if self.depth == 0 { 0 } else { (1u64 << self.depth) - 1 };
        other.path & mask == self.path
    }
}

/// Root triangles and vertices of a bisection forest.
#[derive(Debug)]
pub struct Forest {
    id: u64,
    vertices: Vec<Point>,
    roots: Vec<[usize; 3]>,
    markers: Vec<u8>,
}

/// Geometry of one forest element.
#[derive(Clone, Copy, Debug)]
pub struct ElementShape {
    pub vertices: [Point; 3],
    /// Boundary bits: bit `i` set when local edge `i` carries the boundary marker.
    pub markers: u8,
}

impl ElementShape {
    pub fn children(&self) -> [ElementShape; 2] {
        let [v0, v1, v2] = self.vertices;
        let m = midpoint(&v0, &v1);
        let b0 = self.markers & 1;
        let b1 = (self.markers >> 1) & 1;
        let b2 = (self.markers >> 2) & 1;
        [
            // (v2, v0, m): edges (v0,m) | (m,v2) | (v2,v0)
            ElementShape {
                vertices: [v2, v0, m],
                markers: b2 | (b1 << 2),
            },
            // (v1, v2, m): edges (v2,m) | (m,v1) | (v1,v2)
            ElementShape {
                vertices: [v1, v2, m],
                markers: (b2 << 1) | (b0 << 2),
            },
        ]
    }
}

impl Forest {
    /// Builds a forest from an unlabeled triangulation: triangles are oriented
    /// counter-clockwise, the longest edge of each triangle becomes its refinement
    /// edge (ties broken by the lowest vertex index), and edges with a single
    /// incident triangle are marked as boundary.
    pub fn from_triangulation(vertices: Vec<Point>, triangles: &[[usize; 3]]) -> Result<Arc<Self>> {
        Self::from_triangulation_marked(vertices, triangles, |_, _, count| count == 1)
    }

    /// As [`Forest::from_triangulation`], with the boundary marker of edge
    /// `(a, b)` (shared by `count` triangles) decided by `marked(a, b, count)`.
    pub fn from_triangulation_marked(
        vertices: Vec<Point>,
        triangles: &[[usize; 3]],
        marked: impl Fn(usize, usize, usize) -> bool,
    ) -> Result<Arc<Self>> {
        let mut roots = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v}")));
                }
            }
            let mut tri = *tri;
            let geo = Triangle::new([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if geo.area == 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if geo.area < 0.0 {
                tri.swap(1, 2);
            }
            // Pick the local edge (i, i+1) of maximal length; ties → lowest vertex index pair.
            let mut best = 0;
            let mut best_key = (f64::NEG_INFINITY, usize::MAX);
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let len = dist(&vertices[a], &vertices[b]);
                let lowest = a.min(b) * vertices.len() + a.max(b);
                let better = len > best_key.0 * (1.0 + 1e-12)
                    || ((len - best_key.0).abs() <= 1e-12 * len && lowest < best_key.1);
                if better {
                    best = i;
                    best_key = (len, lowest);
                }
            }
            let rotated = [tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]];
            roots.push(rotated);
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &roots {
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let markers = roots
            .iter()
            .map(|tri| {
                let mut m = 0u8;
                for i in 0..3 {
                    let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    if marked(a, b, edge_count[&(a.min(b), a.max(b))]) {
                        m |= 1 << i;
                    }
                }
                m
            })
            .collect();
        Self::from_labeled(vertices, roots, markers)
    }

    /// Builds a forest from triangles whose vertex order already encodes the
    /// refinement edge `(v0, v1)`, with explicit boundary markers.
    pub fn from_labeled(vertices: Vec<Point>, roots: Vec<[usize; 3]>, markers: Vec<u8>) -> Result<Arc<Self>> {
        if roots.len() != markers.len() {
            return Err(Error::InvalidMesh("marker count differs from triangle count".into()));
        }
        if roots.len() > u32::MAX as usize {
            return Err(Error::InvalidMesh("too many root triangles".into()));
        }
        let mut used = vec![false; vertices.len()];
        for (t, tri) in roots.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v}")));
                }
                used[v] = true;
            }
            let geo = Triangle::new([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if geo.area <= 0.0 || !geo.area.is_finite() {
                return Err(Error::InvalidMesh(format!("triangle {t} is not positively oriented")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        Ok(Arc::new(Self {
            id: NEXT_FOREST_ID.fetch_add(1, Ordering::Relaxed),
            vertices,
            roots,
            markers,
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn num_root_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Geometry of any element in the forest, replayed from its root.
    pub fn shape(&self, key: &ElementKey) -> ElementShape {
        let root = &self.roots[key.root as usize];
        let mut shape = ElementShape {
            vertices: [self.vertices[root[0]], self.vertices[root[1]], self.vertices[root[2]]],
            markers: self.markers[key.root as usize],
        };
        for g in 0..key.depth {
            let which = ((key.path >> g) & 1) as usize;
            shape = shape.children()[which];
        }
        shape
    }
}

/// A conforming triangle mesh: a cut through a bisection forest.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    forest: Arc<Forest>,
    keys: Vec<ElementKey>,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    markers: Vec<u8>,
    edges: Vec<[usize; 2]>,
    edge_marker: Vec<bool>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[usize; 2]>,
    vertex_tris: Vec<Vec<usize>>,
    vertex_marker: Vec<bool>,
}

/// Sentinel for a missing neighbour in `edge_tris`.
pub const NO_TRIANGLE: usize = usize::MAX;

impl SimplicialMesh {
    /// The root mesh of a forest.
    pub fn root(forest: &Arc<Forest>) -> Self {
        let keys = (0..forest.roots.len() as u32).map(ElementKey::root).collect();
        Self::from_keys(forest.clone(), keys).expect("root mesh of a valid forest is conforming")
    }

    /// Unit square split along the diagonal into two triangles.
    pub fn unit_square() -> Self {
        let forest = Forest::from_triangulation(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[[0, 1, 2], [0, 2, 3]],
        )
        .expect("valid unit square");
        Self::root(&forest)
    }

    /// The triangle with vertices (0,0), (1,0), (0,1).
    pub fn reference_triangle() -> Self {
        let forest = Forest::from_triangulation(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]])
            .expect("valid reference triangle");
        Self::root(&forest)
    }

    /// Builds the mesh formed by the given forest elements.
    pub fn from_keys(forest: Arc<Forest>, mut keys: Vec<ElementKey>) -> Result<Self> {
        keys.sort_unstable();
        keys.dedup();
        let shapes: Vec<ElementShape> = keys.iter().map(|k| forest.shape(k)).collect();

        let mut vertex_index: HashMap<[u64; 2], usize> = HashMap::new();
        let mut vertices: Vec<Point> = Vec::new();
        for v in &forest.vertices {
            vertex_index.entry(point_key(v)).or_insert_with(|| {
                vertices.push(*v);
                vertices.len() - 1
            });
        }
        let mut triangles = Vec::with_capacity(keys.len());
        let mut markers = Vec::with_capacity(keys.len());
        for shape in &shapes {
            let mut tri = [0usize; 3];
            for (i, v) in shape.vertices.iter().enumerate() {
                tri[i] = *vertex_index.entry(point_key(v)).or_insert_with(|| {
                    vertices.push(*v);
                    vertices.len() - 1
                });
            }
            triangles.push(tri);
            markers.push(shape.markers);
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_marker: Vec<bool> = Vec::new();
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_marker.push(false);
                    edge_tris.push([NO_TRIANGLE, NO_TRIANGLE]);
                    edges.len() - 1
                });
                if edge_tris[e][0] == NO_TRIANGLE {
                    edge_tris[e][0] = t;
                } else if edge_tris[e][1] == NO_TRIANGLE {
                    edge_tris[e][1] = t;
                } else {
                    return Err(Error::InvalidMesh(format!("edge {a}-{b} shared by more than two triangles")));
                }
                if markers[t] >> i & 1 == 1 {
                    edge_marker[e] = true;
                }
                te[i] = e;
            }
            tri_edges.push(te);
        }

        let mut vertex_tris = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        if let Some(v) = vertex_tris.iter().position(|l| l.is_empty()) {
            return Err(Error::InvalidMesh(format!("vertex {v} has no incident triangle")));
        }
        let mut vertex_marker = vec![false; vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            if edge_marker[e] {
                vertex_marker[edge[0]] = true;
                vertex_marker[edge[1]] = true;
            }
        }

        Ok(Self {
            forest,
            keys,
            vertices,
            triangles,
            markers,
            edges,
            edge_marker,
            tri_edges,
            edge_tris,
            vertex_tris,
            vertex_marker,
        })
    }

    pub fn forest(&self) -> &Arc<Forest> {
        &self.forest
    }

    pub fn forest_id(&self) -> u64 {
        self.forest.id
    }

    pub fn keys(&self) -> &[ElementKey] {
        &self.keys
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    /// Boundary-marker bits of a triangle (bit `i` for local edge `i`).
    pub fn triangle_markers(&self, t: usize) -> u8 {
        self.markers[t]
    }

    pub fn geometry(&self, t: usize) -> Triangle {
        let [a, b, c] = self.triangles[t];
        Triangle::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.edge_tris[e]
    }

    /// Edge carries the boundary marker (the domain boundary for meshes built with
    /// [`Forest::from_triangulation`]).
    pub fn is_marked_edge(&self, e: usize) -> bool {
        self.edge_marker[e]
    }

    /// Edge has a single incident triangle.
    pub fn is_topological_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1] == NO_TRIANGLE
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    /// Vertex lies on a marked (boundary) edge.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_marker[v]
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.geometry(t).area).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.geometry(t).diameter()).fold(0.0, f64::max)
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.geometry(t).shape_ratio()).fold(0.0, f64::max)
    }

    /// Index of the triangle containing `x`, if any (first in ascending order).
    pub fn locate(&self, x: &Point) -> Option<usize> {
        (0..self.num_triangles()).find(|&t| self.geometry(t).contains(x, 1e-12))
    }

    /// Map from element key to triangle index.
    pub fn key_index(&self) -> HashMap<ElementKey, usize> {
        self.keys.iter().enumerate().map(|(i, k)| (*k, i)).collect()
    }

    /// Exhaustive conformity audit: at most two triangles per edge, no vertex in
    /// the interior of an edge, positive areas, and a topological boundary
    /// consisting only of marked edges (for domain meshes, pass `check_markers`).
    pub fn audit_conformity(&self, check_markers: bool) -> Result<()> {
        for t in 0..self.num_triangles() {
            if self.geometry(t).area <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area")));
            }
        }
        let vertex_set: HashMap<[u64; 2], usize> =
            self.vertices.iter().enumerate().map(|(i, v)| (point_key(v), i)).collect();
        for (e, edge) in self.edges.iter().enumerate() {
            let m = midpoint(&self.vertices[edge[0]], &self.vertices[edge[1]]);
            if vertex_set.contains_key(&point_key(&m)) {
                return Err(Error::InvalidMesh(format!("hanging node on edge {e}")));
            }
            if check_markers && self.is_topological_boundary_edge(e) && !self.edge_marker[e] {
                return Err(Error::InvalidMesh(format!("unmarked boundary edge {e}")));
            }
        }
        Ok(())
    }

    /// Same element set (and hence identical geometry and numbering).
    pub fn same_elements(&self, other: &SimplicialMesh) -> bool {
        self.forest_id() == other.forest_id() && self.keys == other.keys
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_ancestry() {
        let r = ElementKey::root(3);
        let c = r.child(1).child(0).child(1);
        assert_eq!(c.depth, 3);
        assert!(r.is_ancestor_or_self(&c));
        assert!(r.child(1).is_ancestor_or_self(&c));
        assert!(!r.child(0).is_ancestor_or_self(&c));
        assert_eq!(c.parent().unwrap().parent().unwrap(), r.child(1));
        assert_eq!(c.sibling().unwrap().sibling().unwrap(), c);
        assert_eq!(c.sibling().unwrap().parent(), c.parent());
    }

    #[test]
    fn unit_square_topology() {
        let m = SimplicialMesh::unit_square();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_edges(), 5);
        assert!((m.area() - 1.0).abs() < 1e-15);
        m.audit_conformity(true).unwrap();
        // the diagonal is the refinement edge of both triangles
        for t in 0..2 {
            let [a, b, _] = m.triangle(t);
            assert_eq!((a.min(b), a.max(b)), (0, 2));
        }
        assert!((0..4).all(|v| m.is_boundary_vertex(v)));
    }

    #[test]
    fn children_markers_follow_edges() {
        let m = SimplicialMesh::unit_square();
        let shape = m.forest().shape(&m.keys()[0]);
        for child in shape.children() {
            let geo = Triangle::new(child.vertices);
            assert!(geo.area > 0.0);
            // edges on the square boundary carry marker bits
            for i in 0..3 {
                let a = child.vertices[(i + 1) % 3];
                let b = child.vertices[(i + 2) % 3];
                let on_boundary = (a[0] == b[0] && (a[0] == 0.0 || a[0] == 1.0))
                    || (a[1] == b[1] && (a[1] == 0.0 || a[1] == 1.0));
                assert_eq!(child.markers >> i & 1 == 1, on_boundary);
            }
        }
    }

    #[test]
    fn rejects_degenerate_triangles() {
        let r = Forest::from_triangulation(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &[[0, 1, 2]]);
        assert!(r.is_err());
    }
}
