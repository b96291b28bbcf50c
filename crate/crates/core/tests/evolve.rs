use bosonlight::evolve::{dense_propagator, evolve, expectation, EvolutionConfig};
use bosonlight::fock::{op_number, FockBasis};
use bosonlight::hamiltonian::HamiltonianSpec;
use bosonlight::lattice::{LatticeGraph, SiteSet};
use bosonlight::sparse::{SparseOperator, StateVector, C64};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_state(basis: &FockBasis, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bosonlight::bounds::random_state(basis, &mut rng, |_| true).unwrap()
}

fn system() -> impl Strategy<Value = (SparseOperator, FockBasis, StateVector, f64)> {
    (
        2usize..=6,
        1u32..=3,
        0.2f64..1.5,
        -2.0f64..2.0,
        any::<u64>(),
        -2.0f64..2.0,
    )
        .prop_map(|(n, total, j, u, seed, t)| {
            let lattice = LatticeGraph::chain(n).unwrap();
            let basis = FockBasis::uniform(n, total, Some(total)).unwrap();
            let h = HamiltonianSpec::bose_hubbard(&lattice, j, u, 0.1)
                .assemble(&basis, None)
                .unwrap();
            let psi = random_state(&basis, seed);
            (h, basis, psi, t)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn propagation_is_unitary_and_conserves_energy_and_number((h, basis, psi, t) in system()) {
        let out = evolve(&h, &psi, t, &EvolutionConfig::krylov()).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
        let scale = h.norm_inf().max(1.0);
        prop_assert!((expectation(&out, &h) - expectation(&psi, &h)).norm() < 1e-8 * scale);
        let n = op_number(&basis, &SiteSet::new(basis.n_sites(), 0..basis.n_sites()).unwrap(), 1).unwrap();
        prop_assert!((expectation(&out, &n).re - basis.sector().unwrap() as f64).abs() < 1e-9);
    }

    #[test]
    fn krylov_matches_dense((h, _basis, psi, t) in system()) {
        let a = evolve(&h, &psi, t, &EvolutionConfig::krylov()).unwrap();
        let b = evolve(&h, &psi, t, &EvolutionConfig::dense()).unwrap();
        prop_assert!(a.distance(&b) < 1e-8);
    }

    #[test]
    fn propagation_composes((h, _basis, psi, t) in system(), split in 0.0f64..1.0) {
        let cfg = EvolutionConfig::default();
        let whole = evolve(&h, &psi, t, &cfg).unwrap();
        let half = evolve(&h, &psi, split * t, &cfg).unwrap();
        let parts = evolve(&h, &half, (1.0 - split) * t, &cfg).unwrap();
        prop_assert!(whole.distance(&parts) < 1e-8);
    }
}

#[test]
fn two_site_population_oscillates_as_cosine_squared() {
    let lattice = LatticeGraph::chain(2).unwrap();
    let basis = FockBasis::uniform(2, 1, Some(1)).unwrap();
    let h = HamiltonianSpec::bose_hubbard(&lattice, 0.7, 0.0, 0.0)
        .assemble(&basis, None)
        .unwrap();
    let start = StateVector::basis_state(2, basis.rank(&[1, 0]).unwrap());
    let site0 = op_number(&basis, &SiteSet::new(2, [0]).unwrap(), 1).unwrap();
    for k in 0..20 {
        let t = 0.23 * k as f64;
        let out = evolve(&h, &start, t, &EvolutionConfig::krylov()).unwrap();
        assert!((expectation(&out, &site0).re - (0.7 * t).cos().powi(2)).abs() < 1e-10);
    }
}

#[test]
fn expectations_match_dense_quadratic_forms() {
    let basis = FockBasis::uniform(4, 3, Some(3)).unwrap();
    let psi = random_state(&basis, 5);
    let identity = SparseOperator::identity(basis.dim());
    assert!((expectation(&psi, &identity).re - 1.0).abs() < 1e-14);

    let all = SiteSet::new(4, 0..4).unwrap();
    assert!((expectation(&psi, &op_number(&basis, &all, 1).unwrap()).re - 3.0).abs() < 1e-12);

    let nx2 = op_number(&basis, &SiteSet::new(4, [1, 2]).unwrap(), 2).unwrap();
    let v = DVector::from_column_slice(psi.amplitudes());
    let dense = (v.adjoint() * nx2.to_dense() * &v)[(0, 0)];
    assert!((expectation(&psi, &nx2) - dense).norm() < 1e-12);
}

#[test]
fn dense_propagator_is_unitary() {
    let lattice = LatticeGraph::hypercubic(&[2, 2], &[false, false]).unwrap();
    let basis = FockBasis::uniform(4, 2, Some(2)).unwrap();
    let h = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 3.0, 0.0)
        .assemble(&basis, None)
        .unwrap();
    let u = dense_propagator(&h, 1.3);
    let defect = &u.adjoint() * &u - nalgebra::DMatrix::<C64>::identity(basis.dim(), basis.dim());
    assert!(defect.norm() < 1e-12);
}
