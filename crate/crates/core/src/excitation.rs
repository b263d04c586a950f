//! HOMO/LUMO extraction and the excitation goal functionals.
//!
//! The excitation replaces the highest occupied orbital by the lowest
//! unoccupied one. The functionals measure how far the electron moves
//! (charge transfer), how much electron and hole overlap, how far the
//! excited determinant is from being stationary (lifetime), and the
//! HOMO–LUMO gap.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::grid::{dot, Grid};
use crate::kernel::CoulombKernel;
use crate::ks::GroundState;

/// HOMO and LUMO of a ground state, normalized in the grid inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationPair {
    pub homo: Vec<f64>,
    pub lumo: Vec<f64>,
    pub eps_h: f64,
    pub eps_l: f64,
}

/// Orbitals `n_occ` and `n_occ + 1` (1-based) of the ground state.
pub fn homo_lumo(state: &GroundState) -> Result<ExcitationPair> {
    let required = state.n_occ + 1;
    let available = state.orbitals.len().min(state.eigenvalues.len());
    if state.n_occ == 0 || available < required {
        return Err(Error::InsufficientEigenpairs { required, available });
    }
    let h = state.n_occ - 1;
    Ok(ExcitationPair {
        homo: state.orbitals[h].clone(),
        lumo: state.orbitals[h + 1].clone(),
        eps_h: state.eigenvalues[h],
        eps_l: state.eigenvalues[h + 1],
    })
}

/// `∫ x |f|²`.
pub fn center_of_mass(grid: &Grid, f: &[f64]) -> Result<f64> {
    grid.check(f)?;
    Ok(grid.dx() * f.iter().enumerate().map(|(j, v)| grid.node(j) * v * v).sum::<f64>())
}

/// `∫ x (|φ_L|² - |φ_H|²)`: how far the excited electron moves.
pub fn charge_transfer(grid: &Grid, pair: &ExcitationPair) -> Result<f64> {
    grid.check(&pair.homo)?;
    grid.check(&pair.lumo)?;
    let sum: f64 = pair
        .homo
        .iter()
        .zip(&pair.lumo)
        .enumerate()
        .map(|(j, (h, l))| grid.node(j) * (l * l - h * h))
        .sum();
    Ok(grid.dx() * sum)
}

/// `∫ |φ_H|² |φ_L|²`.
pub fn overlap(grid: &Grid, pair: &ExcitationPair) -> Result<f64> {
    grid.check(&pair.homo)?;
    grid.check(&pair.lumo)?;
    let sum: f64 = pair.homo.iter().zip(&pair.lumo).map(|(h, l)| h * h * l * l).sum();
    Ok(grid.dx() * sum)
}

pub fn bandgap(pair: &ExcitationPair) -> f64 {
    pair.eps_l - pair.eps_h
}

/// `⟨φ_L, h φ_L⟩ - ⟨φ_H, h φ_H⟩` for the state's own Hamiltonian.
pub fn bandgap_expectation(grid: &Grid, state: &GroundState, pair: &ExcitationPair) -> Result<f64> {
    let h = state.hamiltonian(grid)?;
    Ok(h.expectation(&pair.lumo)? - h.expectation(&pair.homo)?)
}

/// `(gap - target)²`.
pub fn bandgap_deviation(pair: &ExcitationPair, target: f64) -> f64 {
    (bandgap(pair) - target).powi(2)
}

/// Change of the Hartree potential caused by the excitation,
/// `convolve(kernel, 2(|φ_L|² - |φ_H|²))`.
pub fn excitation_potential(pair: &ExcitationPair, kernel: &CoulombKernel) -> Result<Vec<f64>> {
    check_len(pair.homo.len(), pair.lumo.len())?;
    let drho: Vec<f64> = pair
        .homo
        .iter()
        .zip(&pair.lumo)
        .map(|(h, l)| 2.0 * (l * l - h * h))
        .collect();
    kernel.convolve(&drho)
}

/// Squared Hilbert–Schmidt norm of `[h', γ']`, the commutator of the
/// post-excitation Hamiltonian with the excited density matrix. Zero iff
/// the excited determinant is stationary.
///
/// Evaluated as `2 Σ_χ ‖(I - γ')Wχ‖²` over `χ ∈ {φ_i - ⟨φ_H,φ_i⟩φ_H} ∪ {φ_L}`
/// with `W` the excitation potential, so only occupied orbitals are touched.
pub fn lifetime(grid: &Grid, state: &GroundState, pair: &ExcitationPair, kernel: &CoulombKernel) -> Result<f64> {
    let n_occ = state.n_occ;
    if state.orbitals.len() < n_occ {
        return Err(Error::InsufficientEigenpairs {
            required: n_occ,
            available: state.orbitals.len(),
        });
    }
    for f in state.orbitals.iter().take(n_occ).chain([&pair.homo, &pair.lumo]) {
        grid.check(f)?;
    }
    let w = excitation_potential(pair, kernel)?;
    let dx = grid.dx();
    let occupied = &state.orbitals[..n_occ];

    // (I - γ')ψ = ψ - Σ_i ⟨φ_i,ψ⟩φ_i + ⟨φ_H,ψ⟩φ_H - ⟨φ_L,ψ⟩φ_L
    let complement = |psi: &mut Vec<f64>| {
        let mut coeffs: Vec<(f64, &[f64])> = occupied
            .iter()
            .map(|phi| (-dx * dot(phi, psi), phi.as_slice()))
            .collect();
        coeffs.push((dx * dot(&pair.homo, psi), &pair.homo));
        coeffs.push((-dx * dot(&pair.lumo, psi), &pair.lumo));
        for (c, phi) in coeffs {
            psi.iter_mut().zip(phi).for_each(|(p, f)| *p += c * f);
        }
    };

    let mut total = 0.0;
    let mut accumulate = |chi: &[f64]| {
        let mut v: Vec<f64> = chi.iter().zip(&w).map(|(c, w)| c * w).collect();
        complement(&mut v);
        total += dx * dot(&v, &v);
    };
    for phi in occupied {
        let c = dx * dot(&pair.homo, phi);
        let chi: Vec<f64> = phi.iter().zip(&pair.homo).map(|(p, h)| p - c * h).collect();
        accumulate(&chi);
    }
    accumulate(&pair.lumo);
    Ok(2.0 * total)
}

/// Which excitation property the search drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalKind {
    ChargeTransfer,
    Overlap,
    Lifetime,
    BandgapMax,
    BandgapTarget(f64),
}

impl GoalKind {
    /// Parse a goal name; `bandgap-target` needs `target`.
    pub fn parse(name: &str, target: Option<f64>) -> Result<Self> {
        let kind = match name {
            "charge-transfer" => GoalKind::ChargeTransfer,
            "overlap" => GoalKind::Overlap,
            "lifetime" => GoalKind::Lifetime,
            "bandgap-max" => GoalKind::BandgapMax,
            "bandgap-target" => match target {
                Some(t) if t.is_finite() => GoalKind::BandgapTarget(t),
                Some(t) => {
                    return Err(Error::InvalidParameter {
                        name: "target",
                        reason: format!("must be finite, got {t}"),
                    })
                }
                None => {
                    return Err(Error::InvalidParameter {
                        name: "target",
                        reason: "bandgap-target needs a target gap".into(),
                    })
                }
            },
            other => {
                return Err(Error::InvalidParameter {
                    name: "goal",
                    reason: format!(
                        "unknown goal {other:?}; expected charge-transfer, overlap, lifetime, bandgap-max or bandgap-target"
                    ),
                })
            }
        };
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            GoalKind::ChargeTransfer => "charge-transfer",
            GoalKind::Overlap => "overlap",
            GoalKind::Lifetime => "lifetime",
            GoalKind::BandgapMax => "bandgap-max",
            GoalKind::BandgapTarget(_) => "bandgap-target",
        }
    }

    pub fn target(&self) -> Option<f64> {
        match self {
            GoalKind::BandgapTarget(t) => Some(*t),
            _ => None,
        }
    }

    /// Score to minimize: maximized objectives are negated.
    pub fn score(&self, f: &Functionals) -> f64 {
        match self {
            GoalKind::ChargeTransfer => -f.charge_transfer,
            GoalKind::Overlap => f.overlap,
            GoalKind::Lifetime => f.lifetime,
            GoalKind::BandgapMax => -f.bandgap,
            GoalKind::BandgapTarget(t) => (f.bandgap - t).powi(2),
        }
    }
}

impl fmt::Display for GoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalKind::BandgapTarget(t) => write!(f, "bandgap-target({t})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for GoalKind {
    type Err = Error;

    /// Accepts the goal names, with `bandgap-target=<gap>` for a target.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((name, t)) => {
                let target = t.trim().parse::<f64>().map_err(|e| Error::InvalidParameter {
                    name: "target",
                    reason: format!("{t:?}: {e}"),
                })?;
                GoalKind::parse(name.trim(), Some(target))
            }
            None => GoalKind::parse(s.trim(), None),
        }
    }
}

/// Every excitation property of one ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals {
    pub charge_transfer: f64,
    pub overlap: f64,
    pub lifetime: f64,
    pub bandgap: f64,
    pub eps_h: f64,
    pub eps_l: f64,
    pub com_homo: f64,
    pub com_lumo: f64,
}

impl Functionals {
    pub fn evaluate(grid: &Grid, state: &GroundState, kernel: &CoulombKernel) -> Result<Self> {
        let pair = homo_lumo(state)?;
        Ok(Self {
            charge_transfer: charge_transfer(grid, &pair)?,
            overlap: overlap(grid, &pair)?,
            lifetime: lifetime(grid, state, &pair, kernel)?,
            bandgap: bandgap(&pair),
            eps_h: pair.eps_h,
            eps_l: pair.eps_l,
            com_homo: center_of_mass(grid, &pair.homo)?,
            com_lumo: center_of_mass(grid, &pair.lumo)?,
        })
    }
}

/// Score of `kind` for one state; lower is better.
pub fn evaluate_goal(
    kind: GoalKind,
    grid: &Grid,
    state: &GroundState,
    pair: &ExcitationPair,
    kernel: &CoulombKernel,
) -> Result<f64> {
    Ok(match kind {
        GoalKind::ChargeTransfer => -charge_transfer(grid, pair)?,
        GoalKind::Overlap => overlap(grid, pair)?,
        GoalKind::Lifetime => lifetime(grid, state, pair, kernel)?,
        GoalKind::BandgapMax => -bandgap(pair),
        GoalKind::BandgapTarget(t) => bandgap_deviation(pair, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::stencil_eigenvalue;
    use crate::kernel::KernelRule;
    use crate::ks::{scf_with_external, ScfParams};
    use nalgebra::DMatrix;

    fn small_state(n_occ: usize) -> (Grid, CoulombKernel, GroundState) {
        let grid = Grid::new(-3.0, 3.0, 0.04).unwrap();
        assert!(grid.len() <= 200);
        let kernel = CoulombKernel::new(&grid, 0.1, KernelRule::CellAverage).unwrap();
        // asymmetric double well
        let v_ext = grid.sample(|x| -8.0 * (-(x + 1.0) * (x + 1.0)).exp() - 6.0 * (-2.0 * (x - 1.2).powi(2)).exp());
        let state = scf_with_external(&grid, v_ext, Some(&kernel), n_occ, &ScfParams::default()).unwrap();
        (grid, kernel, state)
    }

    /// `‖[A, Γ']‖_F²` with dense matrices; the grid weight is uniform, so
    /// the Frobenius norm of the matrix is the Hilbert–Schmidt norm.
    fn dense_commutator_norm(a: &DMatrix<f64>, state: &GroundState, pair: &ExcitationPair, dx: f64) -> f64 {
        let n = a.nrows();
        let mut gamma = DMatrix::<f64>::zeros(n, n);
        let occ = state.orbitals[..state.n_occ - 1].iter().chain([&pair.lumo]);
        for phi in occ {
            let v = nalgebra::DVector::from_column_slice(phi);
            gamma += dx * &v * v.transpose();
        }
        let c = a * &gamma - &gamma * a;
        c.norm_squared()
    }

    #[test]
    fn lifetime_matches_dense_commutator() {
        for n_occ in [1, 3, 5, 8] {
            let (grid, kernel, state) = small_state(n_occ);
            let pair = homo_lumo(&state).unwrap();
            let fast = lifetime(&grid, &state, &pair, &kernel).unwrap();
            let w = excitation_potential(&pair, &kernel).unwrap();
            let w_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w.clone()));
            let oracle = dense_commutator_norm(&w_mat, &state, &pair, grid.dx());
            assert!(fast > 0.0);
            assert!(((fast - oracle) / oracle).abs() < 1e-8, "n_occ {n_occ}: {fast} vs {oracle}");

            // full post-excitation Hamiltonian: [h', γ'] = [h' - h, γ']
            let h = state.hamiltonian(&grid).unwrap().to_dense();
            let full = dense_commutator_norm(&(h + w_mat), &state, &pair, grid.dx());
            assert!(((full - oracle) / oracle).abs() < 1e-8, "n_occ {n_occ}: {full} vs {oracle}");
        }
    }

    #[test]
    fn lifetime_vanishes_without_density_change() {
        let (grid, kernel, state) = small_state(3);
        let mut pair = homo_lumo(&state).unwrap();
        pair.lumo = pair.homo.iter().map(|v| -v).collect();
        assert_eq!(excitation_potential(&pair, &kernel).unwrap(), vec![0.0; grid.len()]);
        assert_eq!(lifetime(&grid, &state, &pair, &kernel).unwrap(), 0.0);
    }

    #[test]
    fn functionals_ignore_orbital_signs() {
        let (grid, kernel, state) = small_state(4);
        let pair = homo_lumo(&state).unwrap();
        let mut flipped = state.clone();
        for phi in flipped.orbitals.iter_mut().step_by(2) {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        let fpair = homo_lumo(&flipped).unwrap();
        let a = Functionals::evaluate(&grid, &state, &kernel).unwrap();
        let b = Functionals::evaluate(&grid, &flipped, &kernel).unwrap();
        assert!((a.charge_transfer - b.charge_transfer).abs() < 1e-12);
        assert!((a.overlap - b.overlap).abs() < 1e-12);
        assert!((a.lifetime - b.lifetime).abs() < 1e-12 * a.lifetime);
        assert_eq!(a.bandgap, b.bandgap);
        assert_eq!(bandgap(&pair), bandgap(&fpair));
    }

    #[test]
    fn pair_invariants() {
        let (grid, _, state) = small_state(5);
        let pair = homo_lumo(&state).unwrap();
        assert!((grid.norm(&pair.homo).unwrap() - 1.0).abs() < 1e-10);
        assert!((grid.norm(&pair.lumo).unwrap() - 1.0).abs() < 1e-10);
        assert!(grid.inner(&pair.homo, &pair.lumo).unwrap().abs() < 1e-10);
        assert!(pair.eps_h <= pair.eps_l);
        let cross = bandgap_expectation(&grid, &state, &pair).unwrap();
        assert!((cross - bandgap(&pair)).abs() < 1e-8);
    }

    #[test]
    fn charge_transfer_is_antisymmetric() {
        let (grid, _, state) = small_state(2);
        let pair = homo_lumo(&state).unwrap();
        let swapped = ExcitationPair {
            homo: pair.lumo.clone(),
            lumo: pair.homo.clone(),
            eps_h: pair.eps_l,
            eps_l: pair.eps_h,
        };
        assert_eq!(charge_transfer(&grid, &pair).unwrap(), -charge_transfer(&grid, &swapped).unwrap());
        let mirrored = ExcitationPair {
            homo: pair.homo.iter().rev().copied().collect(),
            lumo: pair.lumo.iter().rev().copied().collect(),
            ..pair.clone()
        };
        let ct = charge_transfer(&grid, &pair).unwrap();
        assert!((ct + charge_transfer(&grid, &mirrored).unwrap()).abs() < 1e-12 * ct.abs().max(1.0));
    }

    #[test]
    fn overlap_examples() {
        let grid = Grid::new(0.0, 1.0, 0.01).unwrap();
        let n = grid.len();
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        left[..40].iter_mut().for_each(|v| *v = 1.0 / (40.0 * grid.dx()).sqrt());
        right[50..90].iter_mut().for_each(|v| *v = 1.0 / (40.0 * grid.dx()).sqrt());
        let disjoint = ExcitationPair {
            homo: left.clone(),
            lumo: right,
            eps_h: 0.0,
            eps_l: 1.0,
        };
        assert_eq!(overlap(&grid, &disjoint).unwrap(), 0.0);
        let same = ExcitationPair {
            homo: left.clone(),
            lumo: left.clone(),
            eps_h: 0.0,
            eps_l: 0.0,
        };
        let quartic = grid.dx() * left.iter().map(|v| v.powi(4)).sum::<f64>();
        assert_eq!(overlap(&grid, &same).unwrap(), quartic);
    }

    #[test]
    fn free_box_pair_is_a_pair_of_sine_modes() {
        let grid = Grid::standard();
        let state = scf_with_external(&grid, vec![0.0; grid.len()], None, 60, &ScfParams::default()).unwrap();
        let pair = homo_lumo(&state).unwrap();
        let n = grid.len();
        let exact_gap = stencil_eigenvalue(61, n, grid.dx()) - stencil_eigenvalue(60, n, grid.dx());
        assert!((bandgap(&pair) - exact_gap).abs() < 1e-12 * stencil_eigenvalue(61, n, grid.dx()));
        for (k, phi) in [(60, &pair.homo), (61, &pair.lumo)] {
            let mode = grid.sample(|x| (k as f64 * std::f64::consts::PI * (x - grid.x_min()) / grid.length()).sin());
            let norm = grid.norm(&mode).unwrap();
            let proj = grid.inner(&mode, phi).unwrap() / norm;
            assert!((proj.abs() - 1.0).abs() < 1e-10, "mode {k}: {proj}");
        }
    }

    #[test]
    fn deviation_and_scores() {
        let pair = ExcitationPair {
            homo: vec![],
            lumo: vec![],
            eps_h: 1.0,
            eps_l: 4.0,
        };
        assert_eq!(bandgap_deviation(&pair, 3.0), 0.0);
        assert_eq!(bandgap_deviation(&pair, 2.5), bandgap_deviation(&pair, 3.5));

        let base = Functionals {
            charge_transfer: 1.0,
            overlap: 0.5,
            lifetime: 2.0,
            bandgap: 3.0,
            eps_h: 0.0,
            eps_l: 3.0,
            com_homo: 0.0,
            com_lumo: 1.0,
        };
        let better = Functionals {
            charge_transfer: 2.0,
            overlap: 0.25,
            lifetime: 1.0,
            bandgap: 3.5,
            ..base
        };
        for kind in [GoalKind::ChargeTransfer, GoalKind::Overlap, GoalKind::Lifetime, GoalKind::BandgapMax] {
            assert!(kind.score(&better) < kind.score(&base), "{kind}");
        }
        let target = GoalKind::BandgapTarget(3.6);
        assert!(target.score(&better) < target.score(&base));
    }

    #[test]
    fn goal_names_round_trip() {
        for name in ["charge-transfer", "overlap", "lifetime", "bandgap-max"] {
            let kind: GoalKind = name.parse().unwrap();
            assert_eq!(kind.name(), name);
        }
        assert_eq!("bandgap-target=3.0".parse::<GoalKind>().unwrap(), GoalKind::BandgapTarget(3.0));
        assert!("bandgap-target".parse::<GoalKind>().is_err());
        assert!(GoalKind::parse("bandgap-target", Some(f64::NAN)).is_err());
        assert!("entropy".parse::<GoalKind>().is_err());
    }

    #[test]
    fn homo_lumo_needs_the_lumo() {
        let (_, _, mut state) = small_state(2);
        state.orbitals.truncate(2);
        assert!(matches!(
            homo_lumo(&state),
            Err(Error::InsufficientEigenpairs { required: 3, available: 2 })
        ));
    }
}
