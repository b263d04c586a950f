use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{CoulombKernel, KernelRule};
use crate::nuclear::{external_potential, nuclear_density, DopingProfile, ModelParams, ProfileConstraints};

/// Grid, lattice parameters, admissible profiles and the precomputed
/// interaction kernel: everything that stays fixed while the doping
/// profile varies.
#[derive(Debug, Clone)]
pub struct Model {
    grid: Grid,
    params: ModelParams,
    constraints: ProfileConstraints,
    kernel: CoulombKernel,
}

impl Model {
    pub fn new(
        grid: Grid,
        params: ModelParams,
        constraints: ProfileConstraints,
        rule: KernelRule,
    ) -> Result<Self> {
        params.validate(&grid)?;
        constraints.validate()?;
        if constraints.atoms != params.positions.len() {
            return Err(Error::InvalidParameter {
                name: "positions",
                reason: format!(
                    "{} positions for {} sites",
                    params.positions.len(),
                    constraints.atoms
                ),
            });
        }
        if 2 * params.n_occ as u32 != constraints.total_charge {
            return Err(Error::InvalidParameter {
                name: "n_occ",
                reason: format!(
                    "{} electrons do not neutralize nuclear charge {}",
                    2 * params.n_occ,
                    constraints.total_charge
                ),
            });
        }
        let kernel = CoulombKernel::new(&grid, params.d, rule)?;
        Ok(Self {
            grid,
            params,
            constraints,
            kernel,
        })
    }

    /// The 20-atom chain on [-10, 10] with all default parameters.
    pub fn standard() -> Self {
        Self::new(
            Grid::standard(),
            ModelParams::default(),
            ProfileConstraints::default(),
            KernelRule::default(),
        )
        .expect("default model is valid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn constraints(&self) -> &ProfileConstraints {
        &self.constraints
    }

    pub fn kernel(&self) -> &CoulombKernel {
        &self.kernel
    }

    pub fn nuclear_density(&self, profile: &DopingProfile) -> Result<Vec<f64>> {
        nuclear_density(profile, &self.params, &self.grid)
    }

    pub fn external_potential(&self, profile: &DopingProfile) -> Result<Vec<f64>> {
        external_potential(&self.nuclear_density(profile)?, &self.kernel)
    }
}
