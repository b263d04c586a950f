//! Excitation functionals on the 20-atom chain and on random profiles of a
//! small chain.

use kscontrol_core::excitation::{bandgap_deviation, charge_transfer, lifetime, overlap};
use kscontrol_core::ks::ks_energy;
use kscontrol_core::{
    homo_lumo, scf_ground_state, DopingProfile, Functionals, Grid, KernelRule, Model, ModelParams, ProfileConstraints,
    ScfParams,
};
use proptest::prelude::*;

const DOPED: &str = "75748566666666577476";

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn carbon_chain_functionals() {
    let model = Model::standard();
    let grid = model.grid();
    let state = scf_ground_state(&model, &DopingProfile::carbon(), &ScfParams::default()).unwrap();
    let pair = homo_lumo(&state).unwrap();
    let f = Functionals::evaluate(grid, &state, model.kernel()).unwrap();

    assert!(f.charge_transfer.abs() < 1e-6, "{}", f.charge_transfer);
    assert!(f.com_homo.abs() < 1e-6 && f.com_lumo.abs() < 1e-6);
    assert!((f.bandgap - 4.93).abs() <= 0.05, "{}", f.bandgap);
    assert!(f.overlap > 0.0 && f.overlap <= 1.0);
    assert!(f.lifetime > 0.0);
    assert_eq!(bandgap_deviation(&pair, 3.0), (f.bandgap - 3.0).powi(2));

    // frozen at the first verified build
    assert!(rel(f.overlap, 0.03177442943264916) < 1e-6, "{:.17e}", f.overlap);
    assert!(rel(f.lifetime, 21.153967094168102) < 1e-6, "{:.17e}", f.lifetime);
    let mu = model.nuclear_density(&DopingProfile::carbon()).unwrap();
    let energy = ks_energy(grid, &state, &mu, model.kernel()).unwrap().total();
    assert!(rel(energy, -4994.102413493897) < 1e-8, "{energy:.17e}");
}

#[test]
fn doped_chain_reflection_covariance() {
    let model = Model::standard();
    let grid = model.grid();
    let c = ProfileConstraints::default();
    let p = DopingProfile::parse(DOPED, &c).unwrap();
    let scf = ScfParams::default();
    let a = scf_ground_state(&model, &p, &scf).unwrap();
    let b = scf_ground_state(&model, &p.reversed(), &scf).unwrap();
    let fa = Functionals::evaluate(grid, &a, model.kernel()).unwrap();
    let fb = Functionals::evaluate(grid, &b, model.kernel()).unwrap();

    assert!((fa.bandgap - 4.88).abs() <= 0.05, "{}", fa.bandgap);
    assert!(fa.charge_transfer.abs() > 1.0);
    assert!((fa.charge_transfer + fb.charge_transfer).abs() < 1e-8);
    assert!((fa.bandgap - fb.bandgap).abs() < 1e-8);
    assert!(rel(fb.overlap, fa.overlap) < 1e-8);
    assert!(rel(fb.lifetime, fa.lifetime) < 1e-8);
    for (ea, eb) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((ea - eb).abs() < 1e-8);
    }
    let peak = a.density.iter().cloned().fold(0.0, f64::max);
    for j in 0..grid.len() {
        assert!((a.density[j] - b.density[grid.mirror(j)]).abs() < 1e-8 * peak);
    }
}

const SIX_SITES: ProfileConstraints = ProfileConstraints {
    atoms: 6,
    min_charge: 3,
    max_charge: 9,
    total_charge: 36,
};

fn six_site_model() -> Model {
    let grid = Grid::new(-4.0, 4.0, 0.01).unwrap();
    let params = ModelParams {
        positions: (0..6).map(|i| -2.5 + i as f64).collect(),
        n_occ: 18,
        ..ModelParams::default()
    };
    Model::new(grid, params, SIX_SITES, KernelRule::default()).unwrap()
}

fn neutral_six_site_profile() -> impl Strategy<Value = DopingProfile> {
    prop::collection::vec((0..6usize, 0..6usize), 0..12).prop_map(|moves| {
        let mut z = [6i64; 6];
        for (from, to) in moves {
            if from != to && z[from] > 3 && z[to] < 9 {
                z[from] -= 1;
                z[to] += 1;
            }
        }
        DopingProfile::new(&z, &SIX_SITES).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_profiles_obey_the_functional_invariants(p in neutral_six_site_profile()) {
        let model = six_site_model();
        let grid = model.grid();
        let scf = ScfParams::default();
        let a = scf_ground_state(&model, &p, &scf).unwrap();
        let b = scf_ground_state(&model, &p.reversed(), &scf).unwrap();
        let pa = homo_lumo(&a).unwrap();
        let pb = homo_lumo(&b).unwrap();
        prop_assert!(pa.eps_l - pa.eps_h > 0.0);
        for (ea, eb) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((ea - eb).abs() < 1e-8);
        }
        let ct = charge_transfer(grid, &pa).unwrap();
        prop_assert!((ct + charge_transfer(grid, &pb).unwrap()).abs() < 1e-8);
        let ov = overlap(grid, &pa).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ov));
        prop_assert!(rel(overlap(grid, &pb).unwrap(), ov) < 1e-8);
        let life = lifetime(grid, &a, &pa, model.kernel()).unwrap();
        prop_assert!(life >= 0.0);
        prop_assert!(rel(lifetime(grid, &b, &pb, model.kernel()).unwrap(), life) < 1e-8);
    }
}
