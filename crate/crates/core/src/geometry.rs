//! Affine triangle geometry shared by the mesh, FE and flux modules.

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub v: [Point; 3],
    /// Signed area (positive for counter-clockwise vertices).
    pub area: f64,
    /// Constant gradients of the three barycentric coordinates.
    pub grad_lambda: [Point; 3],
}

impl Triangle {
    pub fn new(v: [Point; 3]) -> Self {
        let (x0, y0) = (v[0][0], v[0][1]);
        let (x1, y1) = (v[1][0], v[1][1]);
        let (x2, y2) = (v[2][0], v[2][1]);
        let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        let area = 0.5 * det;
        let inv = 1.0 / det;
        let grad_lambda = [
            [(y1 - y2) * inv, (x2 - x1) * inv],
            [(y2 - y0) * inv, (x0 - x2) * inv],
            [(y0 - y1) * inv, (x1 - x0) * inv],
        ];
        Self { v, area, grad_lambda }
    }

    pub fn point(&self, bary: &[f64; 3]) -> Point {
        [
            bary[0] * self.v[0][0] + bary[1] * self.v[1][0] + bary[2] * self.v[2][0],
            bary[0] * self.v[0][1] + bary[1] * self.v[1][1] + bary[2] * self.v[2][1],
        ]
    }

    pub fn barycentric(&self, x: &Point) -> [f64; 3] {
        let d = [x[0] - self.v[0][0], x[1] - self.v[0][1]];
        let l1 = self.grad_lambda[1][0] * d[0] + self.grad_lambda[1][1] * d[1];
        let l2 = self.grad_lambda[2][0] * d[0] + self.grad_lambda[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.barycentric(x).iter().all(|&l| l >= -tol)
    }

    pub fn centroid(&self) -> Point {
        self.point(&[1.0 / 3.0; 3])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let a = self.v[(i + 1) % 3];
        let b = self.v[(i + 2) % 3];
        dist(&a, &b)
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|i| self.edge_length(i)).fold(0.0, f64::max)
    }

    /// Circumradius over inradius; equals 2 for the equilateral triangle.
    pub fn shape_ratio(&self) -> f64 {
        let (a, b, c) = (self.edge_length(0), self.edge_length(1), self.edge_length(2));
        let area = self.area.abs();
        let circum = a * b * c / (4.0 * area);
        let inradius = 2.0 * area / (a + b + c);
        circum / inradius
    }
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn midpoint(a: &Point, b: &Point) -> Point {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

/// Bit pattern of a point, used as an exact vertex identity across meshes of a forest.
pub fn point_key(p: &Point) -> [u64; 2] {
    [(p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()]
}
