//! Softened 1D Coulomb interaction of a thin wire and its discrete
//! convolution against grid densities.
//!
//! `v_d(x) = √π/(2d) · exp(x²/4d²) · erfc(|x|/2d)`, evaluated through
//! `erfcx` so that large `|x|/2d` neither overflows nor cancels. The
//! potential is even in `x` and behaves like `1/|x|` for `|x| ≫ d`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::special::{erfcx, gauss_legendre};

const CELL_QUADRATURE_ORDER: usize = 16;

/// Thin-wire potential `v_d(|x|)`.
pub fn thin_wire_potential(x: f64, d: f64) -> f64 {
    let z = x.abs() / (2.0 * d);
    std::f64::consts::PI.sqrt() / (2.0 * d) * erfcx(z)
}

/// How the continuous kernel is turned into per-offset weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelRule {
    /// `w_k = (1/dx) ∫ v_d` over the cell `[(k-½)dx, (k+½)dx]`.
    #[default]
    CellAverage,
    /// `w_k = v_d(k·dx)`.
    PointSample,
}

impl KernelRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelRule::CellAverage => "cell-average",
            KernelRule::PointSample => "point-sample",
        }
    }
}

impl std::str::FromStr for KernelRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cell-average" => Ok(KernelRule::CellAverage),
            "point-sample" => Ok(KernelRule::PointSample),
            other => Err(format!(
                "unknown kernel rule '{other}' (expected cell-average or point-sample)"
            )),
        }
    }
}

/// Per-offset kernel weights for one grid, with a precomputed circulant
/// spectrum for O(N log N) convolution.
#[derive(Clone)]
pub struct CoulombKernel {
    d: f64,
    dx: f64,
    rule: KernelRule,
    weights: Vec<f64>,
    spectrum: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CoulombKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoulombKernel")
            .field("d", &self.d)
            .field("dx", &self.dx)
            .field("rule", &self.rule)
            .field("len", &self.weights.len())
            .finish()
    }
}

impl CoulombKernel {
    pub fn new(grid: &Grid, d: f64, rule: KernelRule) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("wire diameter must be positive, got {d}"),
            });
        }
        let n = grid.len();
        let dx = grid.dx();
        let weights: Vec<f64> = match rule {
            KernelRule::PointSample => (0..n)
                .map(|k| thin_wire_potential(k as f64 * dx, d))
                .collect(),
            KernelRule::CellAverage => {
                let (nodes, w) = gauss_legendre(CELL_QUADRATURE_ORDER);
                let integrate = |a: f64, b: f64| {
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (b + a);
                    half * nodes
                        .iter()
                        .zip(&w)
                        .map(|(t, wt)| wt * thin_wire_potential(mid + half * t, d))
                        .sum::<f64>()
                };
                (0..n)
                    .map(|k| {
                        if k == 0 {
                            2.0 * integrate(0.0, 0.5 * dx) / dx
                        } else {
                            let x = k as f64 * dx;
                            integrate(x - 0.5 * dx, x + 0.5 * dx) / dx
                        }
                    })
                    .collect()
            }
        };

        let m = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        for (k, &w) in weights.iter().enumerate() {
            spectrum[k].re = w;
            if k > 0 {
                spectrum[m - k].re = w;
            }
        }
        fft.process(&mut spectrum);
        Ok(Self {
            d,
            dx,
            rule,
            weights,
            spectrum,
            fft,
            ifft,
        })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn rule(&self) -> KernelRule {
        self.rule
    }

    /// Weight for a node offset of `k` cells (either sign).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `out_j = dx · Σ_k w_{|j-k|} ρ_k`, via zero-padded FFT.
    pub fn convolve(&self, density: &[f64]) -> Result<Vec<f64>> {
        check_len(self.weights.len(), density.len())?;
        let m = self.spectrum.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (b, &r) in buf.iter_mut().zip(density) {
            b.re = r;
        }
        self.fft.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.ifft.process(&mut buf);
        let scale = self.dx / m as f64;
        Ok(buf[..density.len()].iter().map(|c| c.re * scale).collect())
    }

    /// The same convolution as an explicit O(N²) sum.
    pub fn convolve_direct(&self, density: &[f64]) -> Result<Vec<f64>> {
        let n = self.weights.len();
        check_len(n, density.len())?;
        Ok((0..n)
            .map(|j| {
                self.dx
                    * density
                        .iter()
                        .enumerate()
                        .map(|(k, r)| self.weights[j.abs_diff(k)] * r)
                        .sum::<f64>()
            })
            .collect())
    }

    /// `½ ∫∫ v_d(x-y) ρ(x) ρ(y)` in the same discretization.
    pub fn hartree_energy(&self, density: &[f64]) -> Result<f64> {
        let vh = self.convolve(density)?;
        Ok(0.5 * self.dx * vh.iter().zip(density).map(|(v, r)| v * r).sum::<f64>())
    }
}
