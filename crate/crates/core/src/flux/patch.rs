//! Mixed finite element systems on vertex patches.

use super::rtn::{self, RtnElement};
use crate::geometry::{Point, Triangle};
use crate::poly::{self, Frame};
use crate::quadrature::TriangleRule;
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

const NONE: usize = usize::MAX;

/// Patch geometry in coordinates relative to the patch vertex, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGeometry {
    /// Pure Neumann patch: zero normal flux on the whole patch boundary.
    pub interior: bool,
    pub degree: usize,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Per triangle, bit `i` set when local edge `i` lies on the patch boundary
    /// but carries no normal-flux constraint (domain boundary of a boundary patch).
    pub free_edges: Vec<u8>,
}

impl PatchGeometry {
    pub fn key(&self) -> Vec<u64> {
        let mut key = vec![self.interior as u64, self.degree as u64, self.vertices.len() as u64];
        for v in &self.vertices {
            key.push(v[0].to_bits());
            key.push(v[1].to_bits());
        }
        for (t, f) in self.triangles.iter().zip(&self.free_edges) {
            key.extend(t.iter().map(|&i| i as u64));
            key.push(*f as u64);
        }
        key
    }

    pub fn triangle(&self, c: usize) -> Triangle {
        let [a, b, d] = self.triangles[c];
        Triangle::new([self.vertices[a], self.vertices[b], self.vertices[d]])
    }
}

/// Quadrature data of one patch triangle.
#[derive(Debug)]
pub struct PatchQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub rtn_vals: Vec<Vec<Point>>,
    pub rtn_divs: Vec<Vec<f64>>,
    /// Multiplier basis (`P_p` monomials) at the points.
    pub mult_vals: Vec<Vec<f64>>,
}

/// Factorized saddle-point system of a patch:
/// `[A Bᵀ 0; B 0 c; 0 cᵀ 0]` with `A` the RTN mass, `B` the divergence
/// against broken `P_p`, and (for interior patches) `c` the gauge row pinning
/// the multiplier mean.
pub struct PatchSystem {
    pub geometry: PatchGeometry,
    pub elements: Vec<RtnElement>,
    /// Multiplier frames (same as the RTN frames).
    pub frames: Vec<Frame>,
    /// Per triangle: patch flux dof of each local RTN dof ([`usize::MAX`] if removed).
    pub element_dofs: Vec<Vec<usize>>,
    pub num_flux: usize,
    pub num_mult: usize,
    pub quadrature: Vec<PatchQuadrature>,
    pub mass: DMatrix<f64>,
    pub div: DMatrix<f64>,
    /// `∫ r_k` for every multiplier basis function.
    pub mult_integrals: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl std::fmt::Debug for PatchSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PatchSystem")
            .field("num_flux", &self.num_flux)
            .field("num_mult", &self.num_mult)
            .field("interior", &self.geometry.interior)
            .finish()
    }
}

/// Solution of one patch problem.
#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub flux: Vec<f64>,
    pub mult: Vec<f64>,
    pub gauge: f64,
}

impl PatchSystem {
    pub fn build(geometry: PatchGeometry) -> Self {
        let p = geometry.degree;
        let ntri = geometry.triangles.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &geometry.triangles {
            for i in 0..3 {
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        // edges in sorted order for a deterministic numbering
        let mut edge_list: Vec<(usize, usize)> = edge_count.keys().copied().collect();
        edge_list.sort_unstable();
        let mut free_boundary: HashMap<(usize, usize), bool> = HashMap::new();
        for (t, mask) in geometry.triangles.iter().zip(&geometry.free_edges) {
            for i in 0..3 {
                let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                if mask >> i & 1 == 1 {
                    free_boundary.insert((a.min(b), a.max(b)), true);
                }
            }
        }
        let mut edge_start: HashMap<(usize, usize), usize> = HashMap::new();
        let mut num_flux = 0;
        for e in &edge_list {
            let shared = edge_count[e] == 2;
            if shared || free_boundary.contains_key(e) {
                edge_start.insert(*e, num_flux);
                num_flux += p + 1;
            }
        }
        let mut elements = Vec::with_capacity(ntri);
        let mut element_dofs = Vec::with_capacity(ntri);
        for c in 0..ntri {
            let tri = geometry.triangle(c);
            let ids = geometry.triangles[c];
            elements.push(RtnElement::new(&tri, &ids, p));
            let mut dofs = Vec::with_capacity(rtn::ndof(p));
            for i in 0..3 {
                let (a, b) = (ids[(i + 1) % 3], ids[(i + 2) % 3]);
                match edge_start.get(&(a.min(b), a.max(b))) {
                    Some(&s) => dofs.extend(s..s + p + 1),
                    None => dofs.extend(std::iter::repeat_n(NONE, p + 1)),
                }
            }
            for _ in 0..rtn::num_interior(p) {
                dofs.push(num_flux);
                num_flux += 1;
            }
            element_dofs.push(dofs);
        }
        let nm_local = poly::dim(p);
        let num_mult = ntri * nm_local;
        let frames: Vec<Frame> = elements.iter().map(|e| e.frame).collect();

        let rule = TriangleRule::cached(2 * p + 2);
        let mut quadrature = Vec::with_capacity(ntri);
        let mut mass = DMatrix::<f64>::zeros(num_flux, num_flux);
        let mut div = DMatrix::<f64>::zeros(num_mult, num_flux);
        let mut mult_integrals = DVector::<f64>::zeros(num_mult);
        for c in 0..ntri {
            let tri = geometry.triangle(c);
            let area = tri.area.abs();
            let mut q = PatchQuadrature {
                points: Vec::new(),
                weights: Vec::new(),
                rtn_vals: Vec::new(),
                rtn_divs: Vec::new(),
                mult_vals: Vec::new(),
            };
            let dofs = &element_dofs[c];
            for qp in &rule.points {
                let x = tri.point(&qp.bary);
                let w = qp.weight * area;
                let (vals, divs) = elements[c].eval(&x);
                let r = poly::eval(p, &frames[c].local(&x));
                for i in 0..dofs.len() {
                    if dofs[i] == NONE {
                        continue;
                    }
                    for j in 0..dofs.len() {
                        if dofs[j] != NONE {
                            mass[(dofs[i], dofs[j])] += w * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
                        }
                    }
                    for k in 0..nm_local {
                        div[(c * nm_local + k, dofs[i])] += w * divs[i] * r[k];
                    }
                }
                for k in 0..nm_local {
                    mult_integrals[c * nm_local + k] += w * r[k];
                }
                q.points.push(x);
                q.weights.push(w);
                q.rtn_vals.push(vals);
                q.rtn_divs.push(divs);
                q.mult_vals.push(r);
            }
            quadrature.push(q);
        }
        // symmetrize against rounding in the accumulation order
        for i in 0..num_flux {
            for j in 0..i {
                let v = 0.5 * (mass[(i, j)] + mass[(j, i)]);
                mass[(i, j)] = v;
                mass[(j, i)] = v;
            }
        }
        let gauge = geometry.interior;
        let n = num_flux + num_mult + gauge as usize;
        let mut kkt = DMatrix::<f64>::zeros(n, n);
        kkt.view_mut((0, 0), (num_flux, num_flux)).copy_from(&mass);
        kkt.view_mut((num_flux, 0), (num_mult, num_flux)).copy_from(&div);
        kkt.view_mut((0, num_flux), (num_flux, num_mult)).copy_from(&div.transpose());
        if gauge {
            for k in 0..num_mult {
                kkt[(num_flux + k, n - 1)] = mult_integrals[k];
                kkt[(n - 1, num_flux + k)] = mult_integrals[k];
            }
        }
        let lu = kkt.lu();
        Self {
            geometry,
            elements,
            frames,
            element_dofs,
            num_flux,
            num_mult,
            quadrature,
            mass,
            div,
            mult_integrals,
            lu,
        }
    }

    pub fn has_gauge(&self) -> bool {
        self.geometry.interior
    }

    /// Minimizes `½ vᵀ A v + tᵀ v` subject to `B v = g`, where `t_w = (τ, w)` and
    /// `g_r = (g, r)`; the minimizer of `‖v + τ‖²` under `∇·v = g`.
    pub fn solve(&self, tau_moments: &[f64], g_moments: &[f64]) -> SaddleSolution {
        let nf = self.num_flux;
        let nm = self.num_mult;
        let n = nf + nm + self.has_gauge() as usize;
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..nf {
            rhs[i] = -tau_moments[i];
        }
        for k in 0..nm {
            rhs[nf + k] = g_moments[k];
        }
        let x = self.lu.solve(&rhs).expect("patch saddle-point system is nonsingular");
        SaddleSolution {
            flux: x.rows(0, nf).iter().copied().collect(),
            mult: x.rows(nf, nm).iter().copied().collect(),
            gauge: if self.has_gauge() { x[n - 1] } else { 0.0 },
        }
    }

    /// Relative residuals of the constraint `B v = g` and of stationarity
    /// `A v + Bᵀ λ + t = 0`.
    pub fn kkt_residuals(&self, sol: &SaddleSolution, tau_moments: &[f64], g_moments: &[f64]) -> (f64, f64) {
        let v = DVector::from_column_slice(&sol.flux);
        let lam = DVector::from_column_slice(&sol.mult);
        let t = DVector::from_column_slice(tau_moments);
        let g = DVector::from_column_slice(g_moments);
        let bv = &self.div * &v;
        // normwise backward error: rounding in `Bv` scales with `‖B‖‖v‖`, not with `‖g‖`
        let b_norm = self.div.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
        let cres = (&bv - &g).amax() / g.amax().max(b_norm * v.amax()).max(f64::MIN_POSITIVE);
        let av = &self.mass * &v;
        let btl = self.div.transpose() * &lam;
        let ores = (&av + &btl + &t).amax() / t.amax().max(av.amax()).max(btl.amax()).max(f64::MIN_POSITIVE);
        (cres, ores)
    }

    /// `½ vᵀ A v + tᵀ v`, which differs from `½‖v + τ‖²` by a constant.
    pub fn objective(&self, v: &[f64], tau_moments: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        0.5 * v.dot(&(&self.mass * &v)) + v.dot(&DVector::from_column_slice(tau_moments))
    }

    /// Local RTN coefficients of triangle `c` from patch flux dofs.
    pub fn local_flux(&self, c: usize, flux: &[f64]) -> Vec<f64> {
        self.element_dofs[c]
            .iter()
            .map(|&d| if d == NONE { 0.0 } else { flux[d] })
            .collect()
    }
}

/// Shared cache of factorized patch systems keyed by exact patch geometry.
pub struct PatchCache {
    map: Mutex<HashMap<Vec<u64>, Arc<PatchSystem>>>,
    capacity: usize,
}

impl Default for PatchCache {
    fn default() -> Self {
        Self::new(1024)
    }
}

impl PatchCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            map: Mutex::new(HashMap::new()),
            capacity,
        }
    }

    pub fn get(&self, geometry: PatchGeometry) -> Arc<PatchSystem> {
        let key = geometry.key();
        if let Some(sys) = self.map.lock().expect("patch cache").get(&key) {
            return sys.clone();
        }
        let sys = Arc::new(PatchSystem::build(geometry));
        let mut map = self.map.lock().expect("patch cache");
        if map.len() >= self.capacity {
            map.clear();
        }
        map.entry(key).or_insert(sys).clone()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("patch cache").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
