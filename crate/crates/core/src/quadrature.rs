//! Gauss–Legendre rules on intervals and collapsed (Duffy) product rules on triangles.

use std::sync::OnceLock;

/// Gauss–Legendre rule on the reference interval (−1, 1).
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `m`-point rule, exact for polynomials of degree `2m − 1`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "a Gauss rule needs at least one point");
        let mut points = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_m.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(m, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            points[m / 2] = 0.0;
        }
        Self { points, weights }
    }

    /// Cached rule with `m` points.
    pub fn cached(m: usize) -> &'static GaussRule {
        static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
        let rules = CACHE.get_or_init(|| (1..=40).map(GaussRule::new).collect());
        &rules[m - 1]
    }

    /// Points and weights mapped affinely onto `(a, b)`.
    pub fn on_interval(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| (mid + half * s, half * w))
            .collect()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    let mut d_prev = 0.0;
    let mut d = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Quadrature point on the reference triangle `(0,0), (1,0), (0,1)` given by
/// its barycentric coordinates, with weight normalized so that the weights sum to 1.
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Collapsed-coordinate rule exact for total degree `degree` on a triangle.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<TriPoint>,
}

impl TriangleRule {
    pub fn new(degree: usize) -> Self {
        // x = s, y = r (1 − s) on the unit square; Jacobian (1 − s).
        let ms = (degree + 2).div_ceil(2).max(1);
        let mr = (degree + 1).div_ceil(2).max(1);
        let gs = GaussRule::new(ms).on_interval(0.0, 1.0);
        let gr = GaussRule::new(mr).on_interval(0.0, 1.0);
        let mut points = Vec::with_capacity(ms * mr);
        for &(s, ws) in &gs {
            for &(r, wr) in &gr {
                let x = s;
                let y = r * (1.0 - s);
                // Reference area is 1/2; normalize so weights sum to one.
                let weight = 2.0 * ws * wr * (1.0 - s);
                points.push(TriPoint {
                    bary: [1.0 - x - y, x, y],
                    weight,
                });
            }
        }
        Self { degree, points }
    }

    pub fn cached(degree: usize) -> &'static TriangleRule {
        static CACHE: OnceLock<Vec<TriangleRule>> = OnceLock::new();
        let rules = CACHE.get_or_init(|| (0..=30).map(TriangleRule::new).collect());
        &rules[degree.min(30)]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_monomials() {
        for m in 1..12 {
            let rule = GaussRule::new(m);
            for k in 0..(2 * m) {
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((approx - exact).abs() < 1e-14, "m={m} k={k}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        for degree in 0..14 {
            let rule = TriangleRule::new(degree);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .map(|p| 0.5 * p.weight * p.bary[1].powi(a as i32) * p.bary[2].powi(b as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-15, "deg {degree} a={a} b={b}");
                }
            }
        }
    }
}
