//! One-dimensional Kohn–Sham Hamiltonian without exchange–correlation and
//! its self-consistent ground state.
//!
//! `h = -(1/2) d²/dx² + v_ext + v_H[ρ]` is discretized by the three-point
//! stencil, so every Hamiltonian is a real symmetric tridiagonal matrix.
//! Orbitals are normalized in the discrete inner product `dx · Σ f g`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::{dot, kinetic_apply_into, kinetic_form, Grid};
use crate::kernel::CoulombKernel;
use crate::model::Model;
use crate::nuclear::DopingProfile;
use crate::tridiag::SymTridiagonal;

/// Local part of the Hamiltonian on a grid; the kinetic stencil is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    dx: f64,
    potential: Vec<f64>,
}

impl Hamiltonian {
    /// `v_ext + convolve(kernel, ρ)`.
    pub fn assemble(grid: &Grid, v_ext: &[f64], rho: &[f64], kernel: &CoulombKernel) -> Result<Self> {
        grid.check(v_ext)?;
        grid.check(rho)?;
        let vh = kernel.convolve(rho)?;
        Ok(Self {
            dx: grid.dx(),
            potential: v_ext.iter().zip(&vh).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn from_potential(grid: &Grid, potential: Vec<f64>) -> Result<Self> {
        grid.check(&potential)?;
        Ok(Self {
            dx: grid.dx(),
            potential,
        })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.len()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), f.len())?;
        let mut out = vec![0.0; f.len()];
        kinetic_apply_into(self.dx, f, &mut out);
        out.iter_mut()
            .zip(&self.potential)
            .zip(f)
            .for_each(|((o, v), x)| *o += v * x);
        Ok(out)
    }

    /// `⟨f, h f⟩` in the discrete inner product.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        Ok(self.dx * dot(f, &self.apply(f)?))
    }

    pub fn tridiagonal(&self) -> SymTridiagonal {
        let inv = 1.0 / (self.dx * self.dx);
        let diag = self.potential.iter().map(|v| inv + v).collect();
        let off = vec![-0.5 * inv; self.dim().saturating_sub(1)];
        SymTridiagonal::new(diag, off).expect("finite potential gives a valid matrix")
    }

    /// Explicit matrix, for small-grid oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let t = self.tridiagonal();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag()[i]
            } else if i.abs_diff(j) == 1 {
                t.off()[i.min(j)]
            } else {
                0.0
            }
        })
    }

    /// The `k` lowest eigenpairs, orbitals normalized so `dx·Σφ² = 1`.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigensolver("non-finite potential".into()));
        }
        let (_, mut vectors) = self.tridiagonal().lowest_eigenpairs(k)?;
        // Rayleigh quotients in difference form recover small eigenvalues to
        // full relative precision, which bisection on the 1/dx²-sized
        // diagonal cannot.
        let mut values: Vec<f64> = vectors
            .iter()
            .map(|v| {
                let potential: f64 = v.iter().zip(&self.potential).map(|(x, p)| p * x * x).sum();
                (kinetic_form(self.dx, v) + potential) / dot(v, v)
            })
            .collect();
        let scale = 1.0 / self.dx.sqrt();
        for v in vectors.iter_mut() {
            v.iter_mut().for_each(|x| *x *= scale);
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            vectors = order.iter().map(|&i| vectors[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
        }
        Ok((values, vectors))
    }
}

/// `ρ = 2 Σ_{i<n_occ} φ_i²`.
pub fn density_from(orbitals: &[Vec<f64>], n_occ: usize) -> Vec<f64> {
    let n = orbitals.first().map_or(0, Vec::len);
    let mut rho = vec![0.0; n];
    for phi in orbitals.iter().take(n_occ) {
        rho.iter_mut().zip(phi).for_each(|(r, p)| *r += 2.0 * p * p);
    }
    rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingScheme {
    /// `ρ ← ρ + α(ρ_out - ρ)`
    Linear,
    /// Anderson/Pulay extrapolation over the last `history` residuals.
    Anderson { history: usize },
}

impl Default for MixingScheme {
    fn default() -> Self {
        MixingScheme::Anderson { history: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfParams {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub extra_states: usize,
    pub scheme: MixingScheme,
}

impl Default for ScfParams {
    fn default() -> Self {
        Self {
            mixing: 0.3,
            tol: 1e-8,
            max_iter: 500,
            extra_states: 4,
            scheme: MixingScheme::default(),
        }
    }
}

impl ScfParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return bad("mixing", format!("must lie in (0, 1], got {}", self.mixing));
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be at least 1".into());
        }
        if let MixingScheme::Anderson { history } = self.scheme {
            if history == 0 {
                return bad("history", "Anderson history must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// Converged (or last) SCF iterate.
///
/// `orbitals` are eigenvectors of `v_ext + v_H[ρ_in]` where `ρ_in` is the
/// final input density; `density` is the output density built from them.
/// `potential` is that Hamiltonian's local part, so the orbitals are exact
/// eigenvectors of `Hamiltonian::from_potential(grid, potential)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub eigenvalues: Vec<f64>,
    pub orbitals: Vec<Vec<f64>>,
    pub density: Vec<f64>,
    pub potential: Vec<f64>,
    pub v_ext: Vec<f64>,
    pub n_occ: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl GroundState {
    pub fn hamiltonian(&self, grid: &Grid) -> Result<Hamiltonian> {
        Hamiltonian::from_potential(grid, self.potential.clone())
    }

    pub fn gap(&self) -> Option<f64> {
        let h = self.eigenvalues.get(self.n_occ.checked_sub(1)?)?;
        let l = self.eigenvalues.get(self.n_occ)?;
        Some(l - h)
    }
}

/// Ground state for a doping profile of `model`.
pub fn scf_ground_state(model: &Model, profile: &DopingProfile, scf: &ScfParams) -> Result<GroundState> {
    let v_ext = model.external_potential(profile)?;
    scf_with_external(model.grid(), v_ext, Some(model.kernel()), model.params().n_occ, scf)
}

/// SCF loop for an arbitrary external potential. Without a kernel the
/// problem is non-interacting and a single diagonalization suffices.
pub fn scf_with_external(
    grid: &Grid,
    v_ext: Vec<f64>,
    kernel: Option<&CoulombKernel>,
    n_occ: usize,
    scf: &ScfParams,
) -> Result<GroundState> {
    scf.validate()?;
    grid.check(&v_ext)?;
    let n_states = n_occ + scf.extra_states;
    if n_occ == 0 || n_states > grid.len() {
        return Err(Error::InvalidParameter {
            name: "n_occ",
            reason: format!("{n_states} states requested on {} nodes", grid.len()),
        });
    }
    let mass = 2.0 * n_occ as f64;
    let mut rho_in = vec![0.0; grid.len()];
    let mut mixer = Mixer::new(scf.scheme, scf.mixing);
    let mut last = None;
    for iter in 1..=scf.max_iter {
        let potential = match kernel {
            Some(k) => {
                let vh = k.convolve(&rho_in)?;
                v_ext.iter().zip(&vh).map(|(a, b)| a + b).collect()
            }
            None => v_ext.clone(),
        };
        let h = Hamiltonian::from_potential(grid, potential)?;
        let (eigenvalues, orbitals) = h.lowest_eigenpairs(n_states)?;
        let rho_out = density_from(&orbitals, n_occ);
        let residual = if kernel.is_some() {
            rho_out
                .iter()
                .zip(&rho_in)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let state = GroundState {
            eigenvalues,
            orbitals,
            density: rho_out,
            potential: h.potential,
            v_ext: v_ext.clone(),
            n_occ,
            iterations: iter,
            residual,
        };
        if residual <= scf.tol {
            return Ok(state);
        }
        rho_in = mixer.next(&rho_in, &state.density, mass, grid.dx());
        last = Some(state);
    }
    let last = last.expect("max_iter >= 1");
    Err(Error::ScfNotConverged {
        iterations: last.iterations,
        residual: last.residual,
        last: Box::new(last),
    })
}

struct Mixer {
    scheme: MixingScheme,
    beta: f64,
    inputs: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl Mixer {
    fn new(scheme: MixingScheme, beta: f64) -> Self {
        Self {
            scheme,
            beta,
            inputs: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn next(&mut self, rho_in: &[f64], rho_out: &[f64], mass: f64, dx: f64) -> Vec<f64> {
        let f: Vec<f64> = rho_out.iter().zip(rho_in).map(|(o, i)| o - i).collect();
        let linear: Vec<f64> = rho_in.iter().zip(&f).map(|(r, g)| r + self.beta * g).collect();
        let history = match self.scheme {
            MixingScheme::Linear => return linear,
            MixingScheme::Anderson { history } => history,
        };
        self.inputs.push(rho_in.to_vec());
        self.residuals.push(f.clone());
        if self.inputs.len() > history {
            self.inputs.remove(0);
            self.residuals.remove(0);
        }
        let m = self.inputs.len() - 1;
        if m == 0 {
            return linear;
        }
        let n = rho_in.len();
        let dfs: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..n).map(|j| self.residuals[i + 1][j] - self.residuals[i][j]).collect())
            .collect();
        let dxs: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..n).map(|j| self.inputs[i + 1][j] - self.inputs[i][j]).collect())
            .collect();
        let gram = DMatrix::from_fn(m, m, |i, j| dot(&dfs[i], &dfs[j]));
        let rhs = DVector::from_fn(m, |i, _| dot(&dfs[i], &f));
        let ridge = 1e-12 * gram.trace().max(f64::MIN_POSITIVE);
        let regularized = &gram + DMatrix::identity(m, m) * ridge;
        let Some(gamma) = regularized.lu().solve(&rhs) else {
            self.inputs.clear();
            self.residuals.clear();
            return linear;
        };
        let mut next = linear;
        for i in 0..m {
            let g = gamma[i];
            for j in 0..n {
                next[j] -= g * (dxs[i][j] + self.beta * dfs[i][j]);
            }
        }
        next.iter_mut().for_each(|v| *v = v.max(0.0));
        let total = dx * next.iter().sum::<f64>();
        if total > 0.0 {
            let s = mass / total;
            next.iter_mut().for_each(|v| *v *= s);
        }
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyComponents {
    pub kinetic: f64,
    pub external: f64,
    pub hartree: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.kinetic + self.external + self.hartree
    }
}

/// Kohn–Sham energy `T + ∫v_ext ρ + ½∫∫v_d ρρ` (no exchange–correlation),
/// with `v_ext = -convolve(kernel, μ)` and doubly occupied orbitals.
pub fn ks_energy(grid: &Grid, state: &GroundState, mu: &[f64], kernel: &CoulombKernel) -> Result<EnergyComponents> {
    grid.check(mu)?;
    let mut kinetic = 0.0;
    for phi in state.orbitals.iter().take(state.n_occ) {
        let kphi = grid.kinetic_apply(phi)?;
        kinetic += 2.0 * grid.inner(phi, &kphi)?;
    }
    let v_ext = kernel.convolve(mu)?;
    let external = -grid.inner(&v_ext, &state.density)?;
    let hartree = kernel.hartree_energy(&state.density)?;
    Ok(EnergyComponents {
        kinetic,
        external,
        hartree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::stencil_eigenvalue;
    use crate::kernel::KernelRule;

    #[test]
    fn free_hamiltonian_is_the_stencil() {
        let g = Grid::new(0.0, 1.1, 0.1).unwrap();
        let h = Hamiltonian::from_potential(&g, vec![0.0; g.len()]).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|j| (j as f64 * 0.7).sin()).collect();
        assert_eq!(h.apply(&f).unwrap(), g.kinetic_apply(&f).unwrap());
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let g = Grid::new(0.0, 1.1, 0.1).unwrap();
        assert_eq!(g.len(), 10);
        let v: Vec<f64> = (0..10).map(|j| (j as f64).cos() * 3.0).collect();
        let h = Hamiltonian::from_potential(&g, v).unwrap();
        let f: Vec<f64> = (0..10).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let dense = h.to_dense() * DVector::from_vec(f.clone());
        let fast = h.apply(&f).unwrap();
        for j in 0..10 {
            assert!((dense[j] - fast[j]).abs() <= 1e-14 * dense[j].abs().max(1.0));
        }
    }

    #[test]
    fn assemble_adds_hartree_term() {
        let g = Grid::new(0.0, 1.0, 0.01).unwrap();
        let k = CoulombKernel::new(&g, 0.01, KernelRule::CellAverage).unwrap();
        let zero = vec![0.0; g.len()];
        let h = Hamiltonian::assemble(&g, &zero, &zero, &k).unwrap();
        assert!(h.potential().iter().all(|&v| v == 0.0));
        let rho = g.sample(|x| (-(x - 0.5) * (x - 0.5) * 50.0).exp());
        let v_ext = g.sample(|x| -x);
        let h = Hamiltonian::assemble(&g, &v_ext, &rho, &k).unwrap();
        let vh = k.convolve(&rho).unwrap();
        for j in 0..g.len() {
            assert!((h.potential()[j] - (v_ext[j] + vh[j])).abs() < 1e-14);
        }
        assert!(Hamiltonian::assemble(&g, &zero[1..], &zero, &k).is_err());
    }

    #[test]
    fn free_box_spectrum() {
        let g = Grid::standard();
        let h = Hamiltonian::from_potential(&g, vec![0.0; g.len()]).unwrap();
        let (vals, vecs) = h.lowest_eigenpairs(10).unwrap();
        for k in 0..10 {
            let exact = stencil_eigenvalue(k + 1, g.len(), g.dx());
            assert!(((vals[k] - exact) / exact).abs() < 1e-12);
            // second-order discretization error: (k pi dx / L)^2 / 12
            let wave = (k + 1) as f64 * std::f64::consts::PI / g.length();
            let continuum = 0.5 * wave * wave;
            let bound = (wave * g.dx()).powi(2) / 12.0;
            let rel = (continuum - vals[k]) / continuum;
            assert!(rel > 0.0 && rel < 1.01 * bound, "k={k} rel={rel:e}");
        }
        for i in 0..10 {
            for j in 0..10 {
                let ip = g.inner(&vecs[i], &vecs[j]).unwrap();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn double_well_parity_and_nodes() {
        let g = Grid::new(-5.0, 5.0, 0.01).unwrap();
        let v = g.sample(|x| 0.5 * (x * x - 4.0).powi(2) / 4.0);
        let h = Hamiltonian::from_potential(&g, v).unwrap();
        let (_, vecs) = h.lowest_eigenpairs(2).unwrap();
        let nodes = |f: &[f64]| {
            f.windows(2)
                .filter(|w| w[0] * w[1] < 0.0 && w[0].abs().max(w[1].abs()) > 1e-8)
                .count()
        };
        let parity = |f: &[f64]| {
            let even = (0..f.len()).all(|j| (f[j] - f[g.mirror(j)]).abs() < 1e-8);
            let odd = (0..f.len()).all(|j| (f[j] + f[g.mirror(j)]).abs() < 1e-8);
            (even, odd)
        };
        assert_eq!(nodes(&vecs[0]), 0);
        assert_eq!(parity(&vecs[0]), (true, false));
        assert_eq!(nodes(&vecs[1]), 1);
        assert_eq!(parity(&vecs[1]), (false, true));
    }

    #[test]
    fn density_examples() {
        let g = Grid::new(0.0, 1.0, 0.01).unwrap();
        let h = Hamiltonian::from_potential(&g, vec![0.0; g.len()]).unwrap();
        let (_, vecs) = h.lowest_eigenpairs(1).unwrap();
        let rho = density_from(&vecs, 1);
        assert!((g.integrate(&rho).unwrap() - 2.0).abs() < 1e-12);
        let twice = density_from(&[vecs[0].clone(), vecs[0].clone()], 2);
        for (a, b) in twice.iter().zip(&rho) {
            assert!((a - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn scf_params_validation() {
        assert!(ScfParams::default().validate().is_ok());
        let bad = ScfParams {
            mixing: 0.0,
            ..ScfParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScfParams {
            tol: -1.0,
            ..ScfParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScfParams {
            max_iter: 0,
            ..ScfParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kinetic_energy_of_single_free_orbital() {
        let g = Grid::new(0.0, 2.0, 0.01).unwrap();
        let zero = vec![0.0; g.len()];
        let k = CoulombKernel::new(&g, 0.01, KernelRule::CellAverage).unwrap();
        let state = scf_with_external(&g, zero.clone(), None, 1, &ScfParams::default()).unwrap();
        let e = ks_energy(&g, &state, &zero, &k).unwrap();
        let eps1 = stencil_eigenvalue(1, g.len(), g.dx());
        // one doubly occupied orbital
        assert!((e.kinetic - 2.0 * eps1).abs() < 1e-10);
        assert_eq!(e.external, 0.0);
    }

    #[test]
    fn external_energy_is_linear_in_mu() {
        let g = Grid::new(-2.0, 2.0, 0.01).unwrap();
        let k = CoulombKernel::new(&g, 0.01, KernelRule::CellAverage).unwrap();
        let mu = crate::nuclear::gaussian_sum(&[2.0], &[0.0], 1.0 / 2000.0, &g);
        let v_ext: Vec<f64> = k.convolve(&mu).unwrap().iter().map(|v| -v).collect();
        let state = scf_with_external(&g, v_ext, Some(&k), 1, &ScfParams::default()).unwrap();
        let mu2: Vec<f64> = mu.iter().map(|m| 2.0 * m).collect();
        let e1 = ks_energy(&g, &state, &mu, &k).unwrap();
        let e2 = ks_energy(&g, &state, &mu2, &k).unwrap();
        assert!((e2.external - 2.0 * e1.external).abs() < 1e-12 * e1.external.abs());
        assert_eq!(e1.kinetic, e2.kinetic);
        assert_eq!(e1.hartree, e2.hartree);
    }
}
