use super::overlay::{ancestor_map, children_lists};
use super::SimplicialMesh;
use crate::error::{Error, Result};
use crate::geometry::{dist, Point};

/// The support of the hat function of a vertex, tiled by elements of a refinement.
#[derive(Clone, Debug)]
pub struct VertexPatch {
    pub vertex: usize,
    /// The vertex does not lie on the (marked) domain boundary.
    pub interior: bool,
    /// Coarse elements incident to the vertex, ascending.
    pub coarse_elements: Vec<usize>,
    /// Elements of the refinement tiling the patch, ascending.
    pub sub_elements: Vec<usize>,
    /// Coarse element containing each sub-element.
    pub sub_parent: Vec<usize>,
    /// Diameter of the patch.
    pub diameter: f64,
    /// Patch degree: max over sub-elements of (degree + 1).
    pub degree: usize,
}

/// Precomputed maps for extracting many vertex patches of one mesh pair.
pub struct PatchBuilder<'a> {
    coarse: &'a SimplicialMesh,
    fine_parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    fine_degrees: &'a [usize],
}

impl<'a> PatchBuilder<'a> {
    pub fn new(coarse: &'a SimplicialMesh, fine: &SimplicialMesh, fine_degrees: &'a [usize]) -> Result<Self> {
        let fine_parent = ancestor_map(coarse, fine)?;
        Ok(Self::from_parent_map(coarse, fine_parent, fine_degrees))
    }

    pub fn from_parent_map(coarse: &'a SimplicialMesh, fine_parent: Vec<usize>, fine_degrees: &'a [usize]) -> Self {
        let children = children_lists(&fine_parent, coarse.num_triangles());
        Self {
            coarse,
            fine_parent,
            children,
            fine_degrees,
        }
    }

    pub fn patch(&self, vertex: usize) -> Result<VertexPatch> {
        let mesh = self.coarse;
        if vertex >= mesh.num_vertices() {
            return Err(Error::UnknownVertex(vertex));
        }
        let coarse_elements = mesh.vertex_triangles(vertex).to_vec();
        let mut sub_elements: Vec<usize> = coarse_elements
            .iter()
            .flat_map(|&t| self.children[t].iter().copied())
            .collect();
        sub_elements.sort_unstable();
        let sub_parent = sub_elements.iter().map(|&s| self.fine_parent[s]).collect();
        let mut pts: Vec<Point> = Vec::new();
        for &t in &coarse_elements {
            for v in mesh.triangle(t) {
                pts.push(mesh.vertex(v));
            }
        }
        let mut diameter: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                diameter = diameter.max(dist(&pts[i], &pts[j]));
            }
        }
        let degree = sub_elements.iter().map(|&s| self.fine_degrees[s] + 1).max().unwrap_or(1);
        Ok(VertexPatch {
            vertex,
            interior: !mesh.is_boundary_vertex(vertex),
            coarse_elements,
            sub_elements,
            sub_parent,
            diameter,
            degree,
        })
    }
}

/// Patch of `vertex` in `mesh`, tiled by the elements of `refined` (a refinement
/// of `mesh` from the same forest) carrying polynomial degrees `refined_degrees`.
pub fn build_patch(
    mesh: &SimplicialMesh,
    refined: &SimplicialMesh,
    refined_degrees: &[usize],
    vertex: usize,
) -> Result<VertexPatch> {
    PatchBuilder::new(mesh, refined, refined_degrees)?.patch(vertex)
}

/// Value of the piecewise-affine hat function of `vertex` at `x`; zero outside
/// the patch.
pub fn hat_value(mesh: &SimplicialMesh, vertex: usize, x: &Point) -> f64 {
    for &t in mesh.vertex_triangles(vertex) {
        let geo = mesh.geometry(t);
        if geo.contains(x, 1e-14) {
            let local = mesh.triangle(t).iter().position(|&v| v == vertex).expect("incident");
            return geo.barycentric(x)[local].clamp(0.0, 1.0);
        }
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_vertex_patch_tiles() {
        // criss-cross square: 4 triangles around the center vertex
        let m = SimplicialMesh::unit_square().refine_uniform(1);
        let center = (0..m.num_vertices()).find(|&v| m.vertex(v) == [0.5, 0.5]).unwrap();
        let deg = vec![1; m.num_triangles()];
        let p = build_patch(&m, &m, &deg, center).unwrap();
        assert!(p.interior);
        assert_eq!(p.coarse_elements.len(), 4);
        let area: f64 = p.sub_elements.iter().map(|&s| m.geometry(s).area).sum();
        assert!((area - 1.0).abs() < 1e-15);
        assert!((p.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.degree, 2);
    }

    #[test]
    fn corner_patch_is_single_triangle() {
        let m = SimplicialMesh::unit_square();
        let corner = (0..m.num_vertices()).find(|&v| m.vertex(v) == [1.0, 0.0]).unwrap();
        let p = build_patch(&m, &m, &[1, 1], corner).unwrap();
        assert!(!p.interior);
        assert_eq!(p.coarse_elements.len(), 1);
        assert_eq!(p.sub_elements.len(), 1);
    }

    #[test]
    fn unknown_vertex_rejected() {
        let m = SimplicialMesh::unit_square();
        assert!(matches!(build_patch(&m, &m, &[1, 1], 99), Err(Error::UnknownVertex(99))));
    }

    #[test]
    fn hat_nodal_property() {
        let m = SimplicialMesh::unit_square().refine_uniform(3);
        for a in 0..m.num_vertices() {
            assert_eq!(hat_value(&m, a, &m.vertex(a)), 1.0);
            for &t in m.vertex_triangles(a) {
                for b in m.triangle(t) {
                    if b != a {
                        assert!(hat_value(&m, a, &m.vertex(b)).abs() < 1e-15);
                    }
                }
            }
        }
    }
}
