//! Time partitions, affinely mapped Legendre polynomials and the modal algebra
//! of the discontinuous Galerkin time discretization.

use crate::error::{Error, Result};
use crate::quadrature::{legendre_and_derivative, GaussRule};

/// Nodes `t_0 = 0 < t_1 < ... < t_N = T` with a temporal degree per step.
///
/// Steps are numbered `1..=N`; step `n` is the interval `(t_{n-1}, t_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
    degrees: Vec<usize>,
}

impl TimePartition {
    pub fn from_nodes(nodes: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPartition("at least two nodes are required".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidPartition(format!("first node must be 0, got {}", nodes[0])));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidPartition("nodes must be strictly increasing and finite".into()));
        }
        if degrees.len() != nodes.len() - 1 {
            return Err(Error::InvalidPartition(format!(
                "{} degrees given for {} steps",
                degrees.len(),
                nodes.len() - 1
            )));
        }
        Ok(Self { nodes, degrees })
    }

    /// `steps` equal steps on `(0, t_end)` with degree `q`.
    pub fn uniform(t_end: f64, steps: usize, q: usize) -> Result<Self> {
        if steps == 0 || !(t_end > 0.0) {
            return Err(Error::InvalidPartition("need T > 0 and at least one step".into()));
        }
        let mut nodes: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
        nodes[steps] = t_end;
        Self::from_nodes(nodes, vec![q; steps])
    }

    /// Steps growing geometrically by `ratio`, scaled to end at `t_end`.
    pub fn geometric(t_end: f64, steps: usize, ratio: f64, q: usize) -> Result<Self> {
        if steps == 0 || !(t_end > 0.0) || !(ratio > 0.0) {
            return Err(Error::InvalidPartition("need T > 0, ratio > 0 and at least one step".into()));
        }
        let total: f64 = (0..steps).map(|i| ratio.powi(i as i32)).sum();
        let mut nodes = vec![0.0];
        let mut acc = 0.0;
        for i in 0..steps {
            acc += ratio.powi(i as i32);
            nodes.push(t_end * acc / total);
        }
        nodes[steps] = t_end;
        Self::from_nodes(nodes, vec![q; steps])
    }

    pub fn num_steps(&self) -> usize {
        self.degrees.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().expect("non-empty")
    }

    /// `(t_{n-1}, t_n)` for step `n` in `1..=N`.
    pub fn interval(&self, n: usize) -> (f64, f64) {
        self.check_step(n);
        (self.nodes[n - 1], self.nodes[n])
    }

    pub fn tau(&self, n: usize) -> f64 {
        let (a, b) = self.interval(n);
        b - a
    }

    pub fn degree(&self, n: usize) -> usize {
        self.check_step(n);
        self.degrees[n - 1]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_tau(&self) -> f64 {
        (1..=self.num_steps()).map(|n| self.tau(n)).fold(0.0, f64::max)
    }

    /// Value of the mapped Legendre polynomial `L_q` of step `n` at `t`.
    pub fn legendre_eval(&self, n: usize, q: usize, t: f64) -> Result<f64> {
        if n == 0 || n > self.num_steps() {
            return Err(Error::IndexOutOfRange {
                index: n,
                valid: format!("1..={}", self.num_steps()),
            });
        }
        let (a, b) = self.interval(n);
        if !(t >= a && t <= b) {
            return Err(Error::TimeOutOfRange { t, a, b });
        }
        Ok(legendre_ref(q, to_reference(a, b, t)))
    }

    /// `∫_{I_n} |L_q|^2 dt = τ_n / (2q + 1)`.
    pub fn legendre_mass(&self, n: usize, q: usize) -> f64 {
        legendre_mass(self.tau(n), q)
    }

    fn check_step(&self, n: usize) {
        assert!(
            n >= 1 && n <= self.num_steps(),
            "step {n} outside 1..={}",
            self.num_steps()
        );
    }
}

/// Maps `t ∈ [a, b]` to `[-1, 1]`.
pub fn to_reference(a: f64, b: f64, t: f64) -> f64 {
    (2.0 * t - a - b) / (b - a)
}

/// Legendre polynomial `P_q` on `(-1, 1)`.
pub fn legendre_ref(q: usize, s: f64) -> f64 {
    legendre_and_derivative(q, s).0
}

/// Values `P_0(s), ..., P_q(s)`.
pub fn legendre_values(q: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(q + 1);
    out.push(1.0);
    if q >= 1 {
        out.push(s);
    }
    for k in 1..q {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * s * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

pub fn legendre_mass(tau: f64, q: usize) -> f64 {
    tau / (2 * q + 1) as f64
}

/// Gauss–Legendre points and weights on `(a, b)`; exact through degree `2m − 1`.
pub fn gauss_points(a: f64, b: f64, m: usize) -> Vec<(f64, f64)> {
    GaussRule::cached(m).on_interval(a, b)
}

/// Modal derivative: `d/dt L_k = Σ_m D[m][k] L_m` on an interval of length `tau`.
pub fn derivative_matrix(q: usize, tau: f64) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; q + 1]; q + 1];
    for (m, row) in d.iter_mut().enumerate() {
        for (k, entry) in row.iter_mut().enumerate() {
            if m < k && (k - m) % 2 == 1 {
                *entry = 2.0 * (2 * m + 1) as f64 / tau;
            }
        }
    }
    d
}

/// Temporal coupling of the dG scheme in the modal basis:
/// `C[i][k] = ∫ L_k' L_i dt + L_k(t_{n-1}^+) L_i(t_{n-1}^+)`.
pub fn time_coupling(q: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; q + 1]; q + 1];
    for (i, row) in c.iter_mut().enumerate() {
        for (k, entry) in row.iter_mut().enumerate() {
            let deriv = if i < k && (k - i) % 2 == 1 { 2.0 } else { 0.0 };
            let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
            *entry = deriv + sign;
        }
    }
    c
}

/// `L_q(t_{n-1}) = (−1)^q`.
pub fn left_value(q: usize) -> f64 {
    if q % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Coefficients of `L_q` and `L_{q+1}` in the reconstruction correction
/// `((−1)^q / 2)(L_q − L_{q+1})` that multiplies the jump at `t_{n-1}`.
pub fn reconstruction_weights(q: usize) -> [f64; 2] {
    let s = 0.5 * left_value(q);
    [s, -s]
}

/// Closed-form factor of the jump estimator: `τ (q+1) / ((2q+1)(2q+3))`.
pub fn jump_factor(tau: f64, q: usize) -> f64 {
    let qf = q as f64;
    tau * (qf + 1.0) / ((2.0 * qf + 1.0) * (2.0 * qf + 3.0))
}
