//! Real-time propagation of the excited determinant under the
//! time-dependent Hartree Hamiltonian `h[ρ'(t)]`.
//!
//! Each step is Crank–Nicolson, `(1 + iτh/2)ψ(t+τ) = (1 - iτh/2)ψ(t)`, with
//! a predictor–corrector pass for the density dependence: propagate with
//! `h[ρ'(t)]`, average the predicted and current densities, and propagate
//! again from `t` with the midpoint Hamiltonian. For a fixed Hermitian `h`
//! the step is unitary, so orbital norms are preserved up to round-off.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::excitation::ExcitationPair;
use crate::grid::Grid;
use crate::kernel::CoulombKernel;
use crate::ks::GroundState;

/// Occupied orbitals of the evolving determinant plus the hole orbital,
/// which is carried along under the same Hamiltonian without contributing
/// to the density.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    pub orbitals: Vec<Vec<Complex64>>,
    pub hole: Vec<Complex64>,
    pub time: f64,
    pub density: Vec<f64>,
}

fn complexify(f: &[f64]) -> Vec<Complex64> {
    f.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn density_of(orbitals: &[Vec<Complex64>]) -> Vec<f64> {
    let n = orbitals.first().map_or(0, Vec::len);
    let mut rho = vec![0.0; n];
    for phi in orbitals {
        rho.iter_mut().zip(phi).for_each(|(r, p)| *r += 2.0 * p.norm_sqr());
    }
    rho
}

impl PropagationState {
    /// `{φ_1, …, φ_{n-1}, φ_L}` occupied, hole `φ_H`.
    pub fn excited(state: &GroundState, pair: &ExcitationPair) -> Result<Self> {
        let n = state.n_occ;
        if n == 0 || state.orbitals.len() < n {
            return Err(Error::InsufficientEigenpairs {
                required: n.max(1),
                available: state.orbitals.len(),
            });
        }
        check_len(state.density.len(), pair.lumo.len())?;
        check_len(state.density.len(), pair.homo.len())?;
        let mut orbitals: Vec<Vec<Complex64>> = state.orbitals[..n - 1].iter().map(|f| complexify(f)).collect();
        orbitals.push(complexify(&pair.lumo));
        let density = density_of(&orbitals);
        Ok(Self {
            orbitals,
            hole: complexify(&pair.homo),
            time: 0.0,
            density,
        })
    }

    /// The unexcited ground state: occupied `{φ_1, …, φ_n}`, hole `φ_n`.
    pub fn ground(state: &GroundState) -> Result<Self> {
        let n = state.n_occ;
        if n == 0 || state.orbitals.len() < n {
            return Err(Error::InsufficientEigenpairs {
                required: n.max(1),
                available: state.orbitals.len(),
            });
        }
        let orbitals: Vec<Vec<Complex64>> = state.orbitals[..n].iter().map(|f| complexify(f)).collect();
        let density = density_of(&orbitals);
        Ok(Self {
            hole: orbitals[n - 1].clone(),
            orbitals,
            time: 0.0,
            density,
        })
    }

    /// The last occupied orbital: the excited electron for
    /// [`PropagationState::excited`].
    pub fn electron(&self) -> &[Complex64] {
        self.orbitals.last().map_or(&[], Vec::as_slice)
    }

    pub fn mass(&self, grid: &Grid) -> Result<f64> {
        grid.integrate(&self.density)
    }

    /// Largest `|‖ψ‖ - 1|` over the occupied orbitals and the hole.
    pub fn norm_drift(&self, grid: &Grid) -> f64 {
        self.orbitals
            .iter()
            .chain(std::iter::once(&self.hole))
            .map(|f| (norm(grid, f) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `G - I` for the Gram matrix of the occupied orbitals.
    pub fn gram_deviation(&self, grid: &Grid) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.orbitals.iter().enumerate() {
            for (j, b) in self.orbitals.iter().enumerate().take(i + 1) {
                let g = inner(grid, a, b);
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - want).norm());
            }
        }
        worst
    }
}

fn inner(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * grid.dx()
}

fn norm(grid: &Grid, a: &[Complex64]) -> f64 {
    (grid.dx() * a.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// `∫ x |ψ|²`.
pub fn complex_center_of_mass(grid: &Grid, f: &[Complex64]) -> f64 {
    grid.dx() * f.iter().enumerate().map(|(j, z)| grid.node(j) * z.norm_sqr()).sum::<f64>()
}

/// LU factors of the tridiagonal `1 + i(τ/2)h` without pivoting. The
/// Hermitian part is the identity, so elimination cannot break down.
struct CrankNicolson {
    half: f64,
    potential: Vec<f64>,
    diag_kin: f64,
    off: f64,
    upper: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl CrankNicolson {
    fn new(grid: &Grid, potential: Vec<f64>, dt: f64) -> Result<Self> {
        let n = potential.len();
        let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
        let half = 0.5 * dt;
        let off = -0.5 * inv_dx2;
        let a_off = Complex64::new(0.0, half * off);
        let mut upper = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut prev_upper = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let d = Complex64::new(1.0, half * (inv_dx2 + potential[j]));
            let pivot = if j == 0 { d } else { d - a_off * prev_upper };
            if !(pivot.norm() > f64::EPSILON) || !pivot.is_finite() {
                return Err(Error::Propagation(format!("Crank–Nicolson pivot {pivot} at node {j}")));
            }
            inv_pivot[j] = pivot.inv();
            upper[j] = a_off * inv_pivot[j];
            prev_upper = upper[j];
        }
        Ok(Self {
            half,
            potential,
            diag_kin: inv_dx2,
            off,
            upper,
            inv_pivot,
        })
    }

    /// `(1 + iτh/2)⁻¹ (1 - iτh/2) ψ`.
    fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = psi.len();
        let i_half = Complex64::new(0.0, self.half);
        let a_off = Complex64::new(0.0, self.half * self.off);
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut prev = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let mut hpsi = (self.diag_kin + self.potential[j]) * psi[j];
            if j > 0 {
                hpsi += self.off * psi[j - 1];
            }
            if j + 1 < n {
                hpsi += self.off * psi[j + 1];
            }
            let rhs = psi[j] - i_half * hpsi;
            let v = (rhs - a_off * prev) * self.inv_pivot[j];
            y[j] = v;
            prev = v;
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let next = y[j + 1];
            y[j] -= self.upper[j] * next;
        }
        y
    }
}

fn hamiltonian_potential(v_ext: &[f64], density: &[f64], kernel: &CoulombKernel) -> Result<Vec<f64>> {
    let vh = kernel.convolve(density)?;
    Ok(v_ext.iter().zip(&vh).map(|(a, b)| a + b).collect())
}

/// One predictor–corrector Crank–Nicolson step of length `dt`.
pub fn step(
    state: &PropagationState,
    dt: f64,
    grid: &Grid,
    v_ext: &[f64],
    kernel: &CoulombKernel,
) -> Result<PropagationState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    grid.check(v_ext)?;
    grid.check(&state.density)?;

    let now = CrankNicolson::new(grid, hamiltonian_potential(v_ext, &state.density, kernel)?, dt)?;
    let predicted: Vec<Vec<Complex64>> = state.orbitals.iter().map(|f| now.apply(f)).collect();
    let predicted_density = density_of(&predicted);
    let midpoint: Vec<f64> = state
        .density
        .iter()
        .zip(&predicted_density)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();

    let mid = CrankNicolson::new(grid, hamiltonian_potential(v_ext, &midpoint, kernel)?, dt)?;
    let orbitals: Vec<Vec<Complex64>> = state.orbitals.iter().map(|f| mid.apply(f)).collect();
    let hole = mid.apply(&state.hole);
    let density = density_of(&orbitals);
    if density.iter().any(|v| !v.is_finite()) {
        return Err(Error::Propagation(format!("non-finite density at t = {}", state.time + dt)));
    }
    Ok(PropagationState {
        orbitals,
        hole,
        time: state.time + dt,
        density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveParams {
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            dt: 0.002,
            t_final: 10.0,
            sample_every: 50,
        }
    }
}

impl EvolveParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad("t_final", format!("must be positive, got {}", self.t_final));
        }
        if self.sample_every == 0 {
            return bad("sample_every", "must be at least 1".into());
        }
        Ok(())
    }

    /// `round(t_final / dt)`, at least one step.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

/// Observables sampled every `sample_every` steps, and after the last step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub com_lumo: Vec<f64>,
    pub com_hole: Vec<f64>,
    pub norm_drift: Vec<f64>,
    pub mass: Vec<f64>,
    pub density_minus_ground: Vec<Vec<f64>>,
}

impl EvolutionTrace {
    fn record(&mut self, grid: &Grid, state: &PropagationState, ground_density: &[f64]) -> Result<()> {
        self.times.push(state.time);
        self.com_lumo.push(complex_center_of_mass(grid, state.electron()));
        self.com_hole.push(complex_center_of_mass(grid, &state.hole));
        self.norm_drift.push(state.norm_drift(grid));
        self.mass.push(state.mass(grid)?);
        self.density_minus_ground
            .push(state.density.iter().zip(ground_density).map(|(a, b)| a - b).collect());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Propagates `state0` to `t_final`, returning the sampled trace and the
/// final state. Times are `k·dt`, not accumulated sums.
pub fn evolve(
    state0: &PropagationState,
    params: &EvolveParams,
    grid: &Grid,
    v_ext: &[f64],
    kernel: &CoulombKernel,
    ground_density: &[f64],
) -> Result<(EvolutionTrace, PropagationState)> {
    params.validate()?;
    grid.check(ground_density)?;
    let mut trace = EvolutionTrace::default();
    let mut state = state0.clone();
    let t0 = state0.time;
    trace.record(grid, &state, ground_density)?;
    let steps = params.steps();
    for k in 1..=steps {
        state = step(&state, params.dt, grid, v_ext, kernel)?;
        state.time = t0 + k as f64 * params.dt;
        if k % params.sample_every == 0 || k == steps {
            trace.record(grid, &state, ground_density)?;
        }
    }
    Ok((trace, state))
}
