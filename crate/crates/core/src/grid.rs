//! Uniform interior-node mesh with homogeneous Dirichlet walls.
//!
//! Only interior nodes `x_min + dx, …, x_max - dx` are stored; the boundary
//! values are implicitly zero. With zero walls the rectangle rule with
//! weight `dx` coincides with the trapezoid rule.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    dx: f64,
    len: usize,
}

impl Grid {
    /// Builds the mesh; `(x_max - x_min) / dx` must be an integer ≥ 2 to
    /// within 1e-9.
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {dx}")));
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let cells = (x_max - x_min) / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "span {} is not a multiple of dx = {dx}",
                x_max - x_min
            )));
        }
        if rounded < 2.0 {
            return Err(Error::InvalidGrid(format!(
                "span must hold at least two cells, got {rounded}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            dx,
            len: rounded as usize - 1,
        })
    }

    /// The paper's mesh: [-10, 10] with spacing 0.01 (1999 interior nodes).
    pub fn standard() -> Self {
        Self::new(-10.0, 10.0, 0.01).expect("standard grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Position of interior node `j` (0-based).
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.x_min + (j + 1) as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.node(j)).collect()
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        check_len(self.len, field.len())
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len).map(|j| f(self.node(j))).collect()
    }

    /// `dx · Σ_j f_j`
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        self.check(field)?;
        Ok(self.dx * field.iter().sum::<f64>())
    }

    /// Discrete L² pairing `dx · Σ_j f_j g_j`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.dx * dot(f, g))
    }

    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        Ok(self.inner(f, f)?.sqrt())
    }

    /// `-(1/2)(f_{j+1} - 2 f_j + f_{j-1}) / dx²` with zero Dirichlet walls.
    pub fn kinetic_apply(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check(field)?;
        let mut out = vec![0.0; field.len()];
        kinetic_apply_into(self.dx, field, &mut out);
        Ok(out)
    }

    /// Index of the node mirrored through the domain midpoint.
    #[inline]
    pub fn mirror(&self, j: usize) -> usize {
        self.len - 1 - j
    }
}

pub(crate) fn kinetic_apply_into(dx: f64, f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let c = -0.5 / (dx * dx);
    for j in 0..n {
        let left = if j > 0 { f[j - 1] } else { 0.0 };
        let right = if j + 1 < n { f[j + 1] } else { 0.0 };
        out[j] = c * (right - 2.0 * f[j] + left);
    }
}

#[inline]
/// Euclidean dot product with four independent partial sums.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Closed-form eigenvalues of the Dirichlet stencil `-(1/2)Δ_h` on `n`
/// interior nodes of spacing `dx`: `(1 - cos(kπ/(n+1))) / dx²`, k = 1..=n,
/// evaluated as `2 sin²(θ/2) / dx²` to avoid cancellation.
pub fn stencil_eigenvalue(k: usize, n: usize, dx: f64) -> f64 {
    let half_theta = 0.5 * k as f64 * std::f64::consts::PI / (n + 1) as f64;
    2.0 * half_theta.sin().powi(2) / (dx * dx)
}

/// `⟨f, -(1/2)Δ_h f⟩ / dx` written as a sum of squared differences
/// (walls included), which is free of cancellation.
pub(crate) fn kinetic_form(dx: f64, f: &[f64]) -> f64 {
    let n = f.len();
    let mut s = f[0] * f[0] + f[n - 1] * f[n - 1];
    for w in f.windows(2) {
        s += (w[1] - w[0]) * (w[1] - w[0]);
    }
    0.5 * s / (dx * dx)
}
