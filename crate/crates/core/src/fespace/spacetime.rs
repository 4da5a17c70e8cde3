use super::assembly::ElementQuadrature;
use super::{FESpace, SparseOperator, NO_DOF};
use crate::error::{Error, Result};
use crate::mesh::{common_refinement, Overlay};
use crate::temporal::{left_value, legendre_values, to_reference, TimePartition};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;

/// Connection between consecutive spaces `V^{n-1}` and `V^n` through the space
/// `Ṽ^n` on their common refinement.
#[derive(Debug)]
pub struct StepLink {
    pub prev: Arc<FESpace>,
    pub cur: Arc<FESpace>,
    pub overlay: Overlay,
    /// Space on the common refinement; degree per element is the larger of the
    /// two containing elements' degrees.
    pub tilde: Arc<FESpace>,
    /// Exact prolongation `V^{n-1} → Ṽ^n`.
    pub from_prev: SparseOperator,
    /// Exact prolongation `V^n → Ṽ^n`.
    pub from_cur: SparseOperator,
}

impl StepLink {
    pub fn new(prev: Arc<FESpace>, cur: Arc<FESpace>) -> Result<Self> {
        let overlay = common_refinement(prev.mesh(), cur.mesh())?;
        if prev.same_as(&cur) {
            let n = cur.num_dofs();
            return Ok(Self {
                tilde: cur.clone(),
                prev,
                cur,
                overlay,
                from_prev: SparseOperator::identity(n),
                from_cur: SparseOperator::identity(n),
            });
        }
        let degrees = (0..overlay.mesh.num_triangles())
            .map(|s| prev.degree(overlay.parent_a[s]).max(cur.degree(overlay.parent_b[s])))
            .collect();
        let tilde = Arc::new(FESpace::new(overlay.mesh.clone(), degrees, cur.boundary_condition())?);
        let from_prev = prolongation(&prev, &tilde, &overlay.parent_a);
        let from_cur = prolongation(&cur, &tilde, &overlay.parent_b);
        Ok(Self {
            prev,
            cur,
            overlay,
            tilde,
            from_prev,
            from_cur,
        })
    }

    /// The two spaces coincide and prolongations are identities.
    pub fn is_trivial(&self) -> bool {
        Arc::ptr_eq(&self.tilde, &self.cur)
    }
}

/// Prolongation of a coarse space into a finer nested space by element-wise L²
/// projection, which is exact for nested spaces.
pub fn prolongation(coarse: &FESpace, fine: &FESpace, parent: &[usize]) -> SparseOperator {
    let rows: Vec<Vec<(usize, Vec<(usize, f64)>)>> = (0..fine.mesh().num_triangles())
        .into_par_iter()
        .map(|s| {
            let k = parent[s];
            let geo = fine.mesh().geometry(s);
            let quad = ElementQuadrature::new(&geo, fine.degree(s) + fine.degree(s).max(coarse.degree(k)));
            let nf = fine.element_dofs(s).len();
            let nc = coarse.element_dofs(k).len();
            let mut mass = DMatrix::<f64>::zeros(nf, nf);
            let mut cross = DMatrix::<f64>::zeros(nf, nc);
            let (mut fv, mut fg, mut cv, mut cg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for q in 0..quad.len() {
                fine.shape(s, &quad.bary[q], &mut fv, &mut fg);
                coarse.shape_at(k, &quad.points[q], &mut cv, &mut cg);
                let w = quad.weights[q];
                for i in 0..nf {
                    for j in 0..nf {
                        mass[(i, j)] += w * fv[i] * fv[j];
                    }
                    for j in 0..nc {
                        cross[(i, j)] += w * fv[i] * cv[j];
                    }
                }
            }
            let local = mass.lu().solve(&cross).expect("local mass matrix is nonsingular");
            let cdofs = coarse.element_dofs(k);
            fine.element_dofs(s)
                .iter()
                .enumerate()
                .filter(|(_, &d)| d != NO_DOF)
                .map(|(i, &d)| {
                    let entries = (0..nc)
                        .filter(|&j| cdofs[j] != NO_DOF && local[(i, j)].abs() > 1e-14)
                        .map(|j| (cdofs[j], local[(i, j)]))
                        .collect();
                    (d, entries)
                })
                .collect()
        })
        .collect();
    let mut assigned = vec![false; fine.num_dofs()];
    let mut triplets = Vec::new();
    for element_rows in rows {
        for (d, entries) in element_rows {
            if assigned[d] {
                continue;
            }
            assigned[d] = true;
            triplets.extend(entries.into_iter().map(|(c, v)| (d, c, v)));
        }
    }
    SparseOperator::from_triplets(fine.num_dofs(), coarse.num_dofs(), triplets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Trace from the interval ending at the node (the function value).
    Left,
    /// Limit from the interval starting at the node.
    Right,
}

/// Piecewise-polynomial-in-time function with values in the spaces `V^n`.
///
/// Step `n` stores one coefficient vector per Legendre mode `j = 0..=q_n`.
#[derive(Clone, Debug)]
pub struct SpaceTimeFunction {
    partition: TimePartition,
    spaces: Vec<Arc<FESpace>>,
    links: Vec<Arc<StepLink>>,
    initial: Vec<f64>,
    blocks: Vec<Vec<Vec<f64>>>,
}

impl SpaceTimeFunction {
    pub fn new(partition: TimePartition, space0: Arc<FESpace>, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != space0.num_dofs() {
            return Err(Error::DegreeMismatch("initial value does not match V^0".into()));
        }
        Ok(Self {
            partition,
            spaces: vec![space0],
            links: Vec::new(),
            initial,
            blocks: Vec::new(),
        })
    }

    /// Appends the next step.
    pub fn push_step(&mut self, link: Arc<StepLink>, modes: Vec<Vec<f64>>) -> Result<()> {
        let n = self.blocks.len() + 1;
        if n > self.partition.num_steps() {
            return Err(Error::IndexOutOfRange {
                index: n,
                valid: format!("1..={}", self.partition.num_steps()),
            });
        }
        if !Arc::ptr_eq(&link.prev, self.spaces.last().expect("V^0 present")) {
            return Err(Error::DegreeMismatch(format!("link for step {n} does not start at V^{}", n - 1)));
        }
        if modes.len() != self.partition.degree(n) + 1 || modes.iter().any(|m| m.len() != link.cur.num_dofs()) {
            return Err(Error::DegreeMismatch(format!("mode blocks of step {n} have the wrong shape")));
        }
        self.spaces.push(link.cur.clone());
        self.links.push(link);
        self.blocks.push(modes);
        Ok(())
    }

    /// Removes the last step.
    pub fn pop_step(&mut self) -> Option<(Arc<StepLink>, Vec<Vec<f64>>)> {
        let modes = self.blocks.pop()?;
        self.spaces.pop();
        let link = self.links.pop().expect("one link per step");
        Some((link, modes))
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    /// Number of completed steps.
    pub fn num_steps(&self) -> usize {
        self.blocks.len()
    }

    /// `V^n`, `n = 0..=num_steps`.
    pub fn space(&self, n: usize) -> &Arc<FESpace> {
        &self.spaces[n]
    }

    /// Link for step `n = 1..=num_steps`.
    pub fn link(&self, n: usize) -> &Arc<StepLink> {
        &self.links[n - 1]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Legendre modes of step `n = 1..=num_steps`.
    pub fn modes(&self, n: usize) -> &[Vec<f64>] {
        &self.blocks[n - 1]
    }

    fn check_node(&self, n: usize, lo: usize, hi: usize) -> Result<()> {
        if n < lo || n > hi {
            return Err(Error::IndexOutOfRange {
                index: n,
                valid: format!("{lo}..={hi}"),
            });
        }
        Ok(())
    }

    /// `v(t_n)`: the initial value for `n = 0`, the left trace otherwise.
    pub fn node_value(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Ok(self.initial.clone());
        }
        self.trace(n, Side::Left)
    }

    /// Left trace at `t_n` (`1 ≤ n ≤ N`) in `V^n`, or right limit at `t_n`
    /// (`0 ≤ n ≤ N − 1`) in `V^{n+1}`.
    pub fn trace(&self, n: usize, side: Side) -> Result<Vec<f64>> {
        let steps = self.num_steps();
        match side {
            Side::Left => {
                self.check_node(n, 1, steps)?;
                Ok(sum_modes(&self.blocks[n - 1], |_| 1.0))
            }
            Side::Right => {
                if steps == 0 {
                    return Err(Error::IndexOutOfRange {
                        index: n,
                        valid: "none".into(),
                    });
                }
                self.check_node(n, 0, steps - 1)?;
                Ok(sum_modes(&self.blocks[n], left_value))
            }
        }
    }

    /// `⟦v⟧_n = v(t_n) − v(t_n^+)` in `Ṽ^{n+1}`, `0 ≤ n ≤ N − 1`.
    pub fn jump(&self, n: usize) -> Result<Vec<f64>> {
        let right = self.trace(n, Side::Right)?;
        let left = self.node_value(n)?;
        let link = &self.links[n];
        let a = link.from_prev.apply(&left);
        let b = link.from_cur.apply(&right);
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }

    /// Coefficients in `V^n` of `v(t)` for `t` in the closure of step `n`.
    pub fn value_at(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        self.check_node(n, 1, self.num_steps())?;
        let (a, b) = self.partition.interval(n);
        if !(t >= a && t <= b) {
            return Err(Error::TimeOutOfRange { t, a, b });
        }
        let l = legendre_values(self.partition.degree(n), to_reference(a, b, t));
        Ok(sum_modes(&self.blocks[n - 1], |j| l[j]))
    }
}

fn sum_modes(modes: &[Vec<f64>], weight: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; modes[0].len()];
    for (j, m) in modes.iter().enumerate() {
        let w = weight(j);
        for (o, c) in out.iter_mut().zip(m) {
            *o += w * c;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::BoundaryCondition;
    use super::*;
    use crate::mesh::SimplicialMesh;
    use crate::temporal::TimePartition;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0).collect()
    }

    #[test]
    fn prolongation_is_exact_under_refinement_and_degree_change() {
        let root = Arc::new(SimplicialMesh::unit_square().refine_uniform(2));
        let coarse_mesh = Arc::new(root.bisect(&[0, 3]));
        let fine_mesh = Arc::new(root.bisect(&[5, 6]).bisect(&[1]));
        let prev = Arc::new(
            FESpace::new(
                coarse_mesh.clone(),
                (0..coarse_mesh.num_triangles()).map(|t| 1 + t % 3).collect(),
                BoundaryCondition::Dirichlet,
            )
            .unwrap(),
        );
        let cur = Arc::new(FESpace::uniform(fine_mesh, 2, BoundaryCondition::Dirichlet).unwrap());
        let link = StepLink::new(prev.clone(), cur.clone()).unwrap();
        assert!(!link.is_trivial());
        for (space, op) in [(&prev, &link.from_prev), (&cur, &link.from_cur)] {
            let c = random_vec(space.num_dofs(), 3);
            let p = op.apply(&c);
            for k in 0..50 {
                let x = [((k * 37) % 97) as f64 / 97.0 + 0.001, ((k * 61) % 89) as f64 / 89.0 + 0.002];
                let a = space.evaluate_point(&c, &x).unwrap();
                let b = link.tilde.evaluate_point(&p, &x).unwrap();
                assert!((a - b).abs() < 1e-13, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn traces_and_jumps() {
        let mesh = Arc::new(SimplicialMesh::unit_square().refine_uniform(2));
        let space = Arc::new(FESpace::uniform(mesh, 2, BoundaryCondition::Dirichlet).unwrap());
        let n = space.num_dofs();
        let tp = TimePartition::uniform(1.0, 2, 2).unwrap();
        let mut v = SpaceTimeFunction::new(tp, space.clone(), random_vec(n, 1)).unwrap();
        let link = Arc::new(StepLink::new(space.clone(), space.clone()).unwrap());
        assert!(link.is_trivial());
        v.push_step(link.clone(), vec![random_vec(n, 2), random_vec(n, 3), random_vec(n, 4)]).unwrap();
        v.push_step(link, vec![random_vec(n, 5), random_vec(n, 6), random_vec(n, 7)]).unwrap();
        // left trace equals evaluation at t_1, right limit evaluation at t_1 from step 2
        let left = v.trace(1, Side::Left).unwrap();
        let right = v.trace(1, Side::Right).unwrap();
        let direct_left = v.value_at(1, 0.5).unwrap();
        let direct_right = v.value_at(2, 0.5).unwrap();
        for i in 0..n {
            assert!((left[i] - direct_left[i]).abs() < 1e-13);
            assert!((right[i] - direct_right[i]).abs() < 1e-13);
        }
        let jump = v.jump(1).unwrap();
        for i in 0..n {
            assert!((jump[i] - (left[i] - right[i])).abs() < 1e-15);
        }
        assert!(v.trace(0, Side::Left).is_err());
        assert!(v.trace(2, Side::Right).is_err());
        assert!(v.jump(2).is_err());
    }

    #[test]
    fn continuous_function_has_zero_jump() {
        let mesh = Arc::new(SimplicialMesh::unit_square().refine_uniform(2));
        let space = Arc::new(FESpace::uniform(mesh, 1, BoundaryCondition::Dirichlet).unwrap());
        let n = space.num_dofs();
        let tp = TimePartition::uniform(1.0, 2, 0).unwrap();
        let c = random_vec(n, 9);
        let mut v = SpaceTimeFunction::new(tp, space.clone(), c.clone()).unwrap();
        let link = Arc::new(StepLink::new(space.clone(), space).unwrap());
        v.push_step(link.clone(), vec![c.clone()]).unwrap();
        v.push_step(link, vec![c]).unwrap();
        for k in 0..2 {
            assert!(v.jump(k).unwrap().iter().all(|&j| j == 0.0));
        }
    }
}
