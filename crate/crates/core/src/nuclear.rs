//! Doping profiles and the nuclear charge model.
//!
//! The nuclear density is a sum of narrow normalized Gaussians with integer
//! weights `Z_α` centred on fixed lattice sites; the external potential is
//! its (negated) convolution with the thin-wire kernel.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::CoulombKernel;

/// Admissible charges per site, the total nuclear charge and the number of
/// sites. Charges are single decimal digits so profiles print as strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileConstraints {
    pub atoms: usize,
    pub min_charge: u8,
    pub max_charge: u8,
    pub total_charge: u32,
}

impl Default for ProfileConstraints {
    /// 20 sites, Li (3) to F (9), neutral with 120 electrons.
    fn default() -> Self {
        Self {
            atoms: 20,
            min_charge: 3,
            max_charge: 9,
            total_charge: 120,
        }
    }
}

impl ProfileConstraints {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParameter { name: "constraints", reason });
        if self.atoms == 0 {
            return bad("need at least one site".into());
        }
        if self.min_charge == 0 || self.min_charge > self.max_charge || self.max_charge > 9 {
            return bad(format!(
                "charge bounds must satisfy 1 <= min <= max <= 9, got [{}, {}]",
                self.min_charge, self.max_charge
            ));
        }
        let lo = self.atoms as u32 * self.min_charge as u32;
        let hi = self.atoms as u32 * self.max_charge as u32;
        if self.total_charge < lo || self.total_charge > hi {
            return bad(format!(
                "total charge {} unreachable with {} sites in [{}, {}]",
                self.total_charge, self.atoms, self.min_charge, self.max_charge
            ));
        }
        Ok(())
    }

    pub fn contains(&self, charge: i32) -> bool {
        charge >= self.min_charge as i32 && charge <= self.max_charge as i32
    }

    /// The uniform profile, if the total divides evenly over the sites.
    pub fn uniform(&self) -> Result<DopingProfile> {
        let per_site = self.total_charge as usize / self.atoms;
        if per_site * self.atoms != self.total_charge as usize {
            return Err(Error::InvalidProfile(format!(
                "total charge {} does not split evenly over {} sites",
                self.total_charge, self.atoms
            )));
        }
        DopingProfile::new(&vec![per_site as i64; self.atoms], self)
    }
}

/// Integer nuclear charges, one per lattice site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DopingProfile {
    charges: Vec<u8>,
}

impl DopingProfile {
    pub fn new(charges: &[i64], constraints: &ProfileConstraints) -> Result<Self> {
        if charges.len() != constraints.atoms {
            return Err(Error::InvalidProfile(format!(
                "expected {} charges, got {}",
                constraints.atoms,
                charges.len()
            )));
        }
        for (i, &z) in charges.iter().enumerate() {
            if z < constraints.min_charge as i64 || z > constraints.max_charge as i64 {
                return Err(Error::InvalidProfile(format!(
                    "charge {z} at site {} outside [{}, {}]",
                    i + 1,
                    constraints.min_charge,
                    constraints.max_charge
                )));
            }
        }
        let total: i64 = charges.iter().sum();
        if total != constraints.total_charge as i64 {
            return Err(Error::InvalidProfile(format!(
                "charges sum to {total}, expected {}",
                constraints.total_charge
            )));
        }
        Ok(Self {
            charges: charges.iter().map(|&z| z as u8).collect(),
        })
    }

    /// Pure carbon chain: twenty sites of charge 6.
    pub fn carbon() -> Self {
        Self {
            charges: vec![6; 20],
        }
    }

    /// Parses the digit-string form, e.g. `"75748566666666577476"`.
    pub fn parse(s: &str, constraints: &ProfileConstraints) -> Result<Self> {
        let charges = s
            .trim()
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as i64)
                    .ok_or_else(|| Error::InvalidProfile(format!("'{c}' is not a digit in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&charges, constraints)
    }

    pub fn charges(&self) -> &[u8] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut charges = self.charges.clone();
        charges.reverse();
        Self { charges }
    }

    /// `Z + t·h`, or `None` if any site leaves the admissible range.
    pub fn shifted(&self, h: &[i8], t: i8, constraints: &ProfileConstraints) -> Option<Self> {
        let mut charges = Vec::with_capacity(self.charges.len());
        for (&z, &hj) in self.charges.iter().zip(h) {
            let v = z as i32 + (t as i32) * (hj as i32);
            if !constraints.contains(v) {
                return None;
            }
            charges.push(v as u8);
        }
        Some(Self { charges })
    }
}

impl fmt::Display for DopingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for z in &self.charges {
            write!(f, "{z}")?;
        }
        Ok(())
    }
}

/// Validates a charge list against the 20-site Li..F, Σ=120 constraints.
pub fn validate_profile(charges: &[i64]) -> Result<DopingProfile> {
    DopingProfile::new(charges, &ProfileConstraints::default())
}

/// Lattice and smoothing parameters of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub positions: Vec<f64>,
    pub sigma2: f64,
    pub d: f64,
    pub n_occ: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            positions: (0..20).map(|i| -9.5 + i as f64).collect(),
            sigma2: 1.0 / 2000.0,
            d: 0.01,
            n_occ: 60,
        }
    }
}

impl ModelParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad("sigma2", format!("must be positive, got {}", self.sigma2));
        }
        if !(self.d > 0.0) || !self.d.is_finite() {
            return bad("d", format!("must be positive, got {}", self.d));
        }
        if self.n_occ == 0 {
            return bad("n_occ", "must be at least 1".into());
        }
        if self.positions.is_empty() {
            return bad("positions", "need at least one site".into());
        }
        if self.positions.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("positions", "must be strictly increasing".into());
        }
        let reach = 6.0 * self.sigma2.sqrt();
        let first = self.positions[0];
        let last = *self.positions.last().unwrap();
        if first - reach < grid.x_min() || last + reach > grid.x_max() {
            return bad(
                "positions",
                format!(
                    "Gaussians (6σ = {reach:.4}) must lie inside [{}, {}]",
                    grid.x_min(),
                    grid.x_max()
                ),
            );
        }
        Ok(())
    }
}

/// `μ(x_j) = Σ_α Z_α exp(-(x_j - R_α)²/2σ²) / √(2πσ²)`, sampled on the grid.
pub fn nuclear_density(profile: &DopingProfile, params: &ModelParams, grid: &Grid) -> Result<Vec<f64>> {
    if profile.len() != params.positions.len() {
        return Err(Error::InvalidProfile(format!(
            "profile has {} charges for {} sites",
            profile.len(),
            params.positions.len()
        )));
    }
    params.validate(grid)?;
    let charges: Vec<f64> = profile.charges().iter().map(|&z| z as f64).collect();
    Ok(gaussian_sum(&charges, &params.positions, params.sigma2, grid))
}

/// Sum of weighted normalized Gaussians; no admissibility checks.
pub fn gaussian_sum(weights: &[f64], centres: &[f64], sigma2: f64, grid: &Grid) -> Vec<f64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt();
    // beyond 28σ the Gaussian is below exp(-400)
    let cutoff = 800.0 * sigma2;
    grid.sample(|x| {
        weights
            .iter()
            .zip(centres)
            .map(|(z, r)| {
                let d2 = (x - r) * (x - r);
                if d2 > cutoff {
                    0.0
                } else {
                    z * norm * (-d2 / (2.0 * sigma2)).exp()
                }
            })
            .sum()
    })
}

/// `v_ext = -convolve(kernel, μ)`.
pub fn external_potential(mu: &[f64], kernel: &CoulombKernel) -> Result<Vec<f64>> {
    if mu.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "nuclear density must be non-negative".into(),
        });
    }
    Ok(kernel.convolve(mu)?.into_iter().map(|v| -v).collect())
}
