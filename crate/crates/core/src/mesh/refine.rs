use super::{ElementKey, ElementShape, SimplicialMesh};
use crate::geometry::{midpoint, point_key};
use std::collections::{BTreeMap, HashSet};

impl SimplicialMesh {
    /// Newest-vertex bisection of the marked triangles followed by the
    /// conforming closure. Marked indices outside the mesh are ignored.
    pub fn bisect(&self, marked: &[usize]) -> SimplicialMesh {
        if marked.is_empty() {
            return self.clone();
        }
        let mut leaves: BTreeMap<ElementKey, ElementShape> = self
            .keys
            .iter()
            .map(|k| (*k, self.forest.shape(k)))
            .collect();
        let mut vertex_set: HashSet<[u64; 2]> = self.vertices.iter().map(point_key).collect();
        let mut queue: Vec<ElementKey> = marked
            .iter()
            .filter(|&&t| t < self.keys.len())
            .map(|&t| self.keys[t])
            .collect();

        while !queue.is_empty() {
            for key in queue.drain(..) {
                if let Some(shape) = leaves.remove(&key) {
                    let m = midpoint(&shape.vertices[0], &shape.vertices[1]);
                    vertex_set.insert(point_key(&m));
                    let children = shape.children();
                    leaves.insert(key.child(0), children[0]);
                    leaves.insert(key.child(1), children[1]);
                }
            }
            for (key, shape) in &leaves {
                let v = &shape.vertices;
                let hanging = (0..3).any(|i| {
                    let m = midpoint(&v[(i + 1) % 3], &v[(i + 2) % 3]);
                    vertex_set.contains(&point_key(&m))
                });
                if hanging {
                    queue.push(*key);
                }
            }
        }
        SimplicialMesh::from_keys(self.forest.clone(), leaves.into_keys().collect())
            .expect("bisection closure yields a conforming mesh")
    }

    /// Bisects every triangle `rounds` times (two rounds halve the mesh size).
    pub fn refine_uniform(&self, rounds: usize) -> SimplicialMesh {
        let mut mesh = self.clone();
        for _ in 0..rounds {
            let all: Vec<usize> = (0..mesh.num_triangles()).collect();
            mesh = mesh.bisect(&all);
        }
        mesh
    }

    /// Removes non-root vertices whose incident triangles are all candidates,
    /// all have the vertex as their newest vertex, and pair up as siblings.
    /// Each such group is replaced by the parents; the result stays conforming
    /// and never coarsens below the root mesh.
    pub fn coarsen(&self, candidates: &[usize]) -> SimplicialMesh {
        let mut is_candidate = vec![false; self.num_triangles()];
        for &t in candidates {
            if t < is_candidate.len() {
                is_candidate[t] = true;
            }
        }
        let index = self.key_index();
        let n_root_vertices = self.forest.num_root_vertices();
        let mut removed = vec![false; self.num_triangles()];
        let mut parents = Vec::new();
        for v in n_root_vertices..self.num_vertices() {
            let tris = &self.vertex_tris[v];
            if tris.len() != 2 && tris.len() != 4 {
                continue;
            }
            let removable = tris.iter().all(|&t| {
                let key = self.keys[t];
                is_candidate[t]
                    && key.depth > 0
                    && self.triangles[t][2] == v
                    && key
                        .sibling()
                        .and_then(|s| index.get(&s))
                        .is_some_and(|s| tris.contains(s))
            });
            if !removable {
                continue;
            }
            for &t in tris {
                removed[t] = true;
                let parent = self.keys[t].parent().expect("depth > 0");
                if !parents.contains(&parent) {
                    parents.push(parent);
                }
            }
        }
        if parents.is_empty() {
            return self.clone();
        }
        let mut keys: Vec<ElementKey> = self
            .keys
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(k, _)| *k)
            .collect();
        keys.extend(parents);
        SimplicialMesh::from_keys(self.forest.clone(), keys).expect("coarsening preserves conformity")
    }
}

/// Dörfler (bulk) marking: the smallest set of elements, taken in decreasing
/// indicator order with ties broken by ascending element id, whose indicators sum
/// to at least `theta` times the total. `theta >= 1` marks everything.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Vec<usize> {
    if theta >= 1.0 {
        return (0..indicators.len()).collect();
    }
    let total: f64 = indicators.iter().sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for t in order {
        if acc >= theta * total {
            break;
        }
        acc += indicators[t];
        marked.push(t);
    }
    marked.sort_unstable();
    marked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Triangle;

    #[test]
    fn marking_both_square_triangles_gives_four() {
        let m = SimplicialMesh::unit_square();
        let r = m.bisect(&[0, 1]);
        assert_eq!(r.num_triangles(), 4);
        r.audit_conformity(true).unwrap();
        // each child lies inside its parent
        for (t, key) in r.keys().iter().enumerate() {
            let parent = key.parent().unwrap();
            let pgeo = m.geometry(parent.root as usize);
            let c = r.geometry(t).centroid();
            assert!(pgeo.contains(&c, 0.0));
        }
    }

    #[test]
    fn marking_one_triangle_triggers_closure() {
        let m = SimplicialMesh::unit_square();
        let r = m.bisect(&[0]);
        // the diagonal is shared, so both sides are bisected
        assert_eq!(r.num_triangles(), 4);
        r.audit_conformity(true).unwrap();
        // refinement edge on the boundary: no closure needed
        let r2 = r.bisect(&[0]);
        r2.audit_conformity(true).unwrap();
        assert_eq!(r2.num_triangles(), 5);
        // the new children have interior refinement edges
        let deep: Vec<usize> = (0..r2.num_triangles()).filter(|&t| r2.keys()[t].depth == 2).collect();
        let r3 = r2.bisect(&deep[..1]);
        r3.audit_conformity(true).unwrap();
        assert!(r3.num_triangles() > 6);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = SimplicialMesh::unit_square().refine_uniform(3);
        let r = m.bisect(&[]);
        assert!(r.same_elements(&m));
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
    }

    #[test]
    fn uniform_rounds_halve_mesh_size() {
        let m = SimplicialMesh::unit_square();
        let r = m.refine_uniform(2);
        assert_eq!(r.num_triangles(), 8);
        assert!((r.max_diameter() - 0.5 * m.max_diameter()).abs() < 1e-14);
    }

    #[test]
    fn coarsening_undoes_refinement() {
        let m = SimplicialMesh::unit_square().refine_uniform(2);
        let fine = m.bisect(&[0, 3]);
        fine.audit_conformity(true).unwrap();
        let all: Vec<usize> = (0..fine.num_triangles()).collect();
        let mut coarse = fine.clone();
        for _ in 0..10 {
            coarse = coarse.coarsen(&all[..coarse.num_triangles()]);
            coarse.audit_conformity(true).unwrap();
        }
        // never below the root
        assert_eq!(coarse.num_triangles(), 2);
        assert!((coarse.area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coarsening_respects_candidates() {
        let m = SimplicialMesh::unit_square().refine_uniform(4);
        let c = m.coarsen(&[]);
        assert!(c.same_elements(&m));
        let c = m.coarsen(&[0]);
        // a single candidate can never complete a sibling group
        assert!(c.same_elements(&m));
    }

    #[test]
    fn dorfler_marks_bulk() {
        let eta = [1.0, 4.0, 2.0, 3.0];
        assert_eq!(dorfler_mark(&eta, 0.5), vec![1, 3]);
        assert_eq!(dorfler_mark(&eta, 0.3), vec![1]);
        assert_eq!(dorfler_mark(&eta, 1.0), vec![0, 1, 2, 3]);
        // ties by ascending id
        assert_eq!(dorfler_mark(&[1.0, 1.0, 1.0], 0.5), vec![0, 1]);
    }

    #[test]
    fn shape_regularity_bounded() {
        let m = SimplicialMesh::unit_square();
        let root_ratio = m.max_shape_ratio();
        let mut r = m.clone();
        for step in 0..8 {
            let marked: Vec<usize> = (0..r.num_triangles())
                .filter(|&t| {
                    let c = r.geometry(t).centroid();
                    (c[0] - 0.3).hypot(c[1] - 0.7) < 0.3 / (1.0 + step as f64)
                })
                .collect();
            r = r.bisect(&marked);
            assert!(r.max_shape_ratio() <= 2.0 * root_ratio);
        }
        let t = Triangle::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(t.shape_ratio() > 0.0);
    }
}
