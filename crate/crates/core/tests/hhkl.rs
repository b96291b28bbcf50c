use bosonlight::bounds::random_state;
use bosonlight::fock::FockBasis;
use bosonlight::hamiltonian::HamiltonianSpec;
use bosonlight::hhkl::{
    exact_reference, gate_count, hhkl_error_scan, hhkl_sequence, simulate_hhkl, Direction,
    GateCountInputs, HhklConfig,
};
use bosonlight::lattice::LatticeGraph;
use bosonlight::sparse::StateVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn single_boson(n: usize, site: usize) -> (LatticeGraph, FockBasis, HamiltonianSpec, StateVector) {
    let lattice = LatticeGraph::chain(n).unwrap();
    let basis = FockBasis::uniform(n, 1, Some(1)).unwrap();
    let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 2.0, 0.0);
    let mut occ = vec![0u8; n];
    occ[site] = 1;
    let psi = StateVector::basis_state(n, basis.rank(&occ).unwrap());
    (lattice, basis, spec, psi)
}

fn error(
    lattice: &LatticeGraph,
    basis: &FockBasis,
    spec: &HamiltonianSpec,
    psi: &StateVector,
    cfg: &HhklConfig,
) -> f64 {
    let exact = exact_reference(psi, spec, basis, cfg).unwrap();
    simulate_hhkl(psi, spec, basis, lattice, cfg)
        .unwrap()
        .distance(&exact)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slices_cover_the_lattice_in_pattern_order(n in 2usize..=24, ell in 1usize..=8, slices in 1usize..=4) {
        prop_assume!(ell <= n);
        let lattice = LatticeGraph::chain(n).unwrap();
        let cfg = HhklConfig::new(ell, 0.5, 0.5 * slices as f64);
        let seq = hhkl_sequence(&lattice, &cfg).unwrap();
        let nb = n.div_ceil(ell);
        prop_assert_eq!(seq.n_blocks, nb);
        let per_slice = if nb == 1 { 1 } else { nb / 2 + (nb - 2) + (nb - 1) / 2 };
        for j in 0..slices {
            let steps: Vec<_> = seq.slice(j).collect();
            prop_assert_eq!(steps.len(), per_slice);
            let mut covered = vec![false; n];
            for s in &steps {
                for &site in &s.block_sites {
                    covered[site] = true;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
            // Forward pairs, then backward blocks, then forward pairs.
            let first_backward = steps.iter().position(|s| s.direction == Direction::Backward).unwrap_or(steps.len());
            let last_backward = steps.iter().rposition(|s| s.direction == Direction::Backward);
            if let Some(last) = last_backward {
                prop_assert!(steps[first_backward..=last].iter().all(|s| s.direction == Direction::Backward));
            }
        }
    }

    #[test]
    fn simulated_state_stays_normalized(n in 3usize..=7, total in 1u32..=2, ell in 1usize..=3, seed in any::<u64>()) {
        prop_assume!(ell <= n);
        let lattice = LatticeGraph::chain(n).unwrap();
        let basis = FockBasis::uniform(n, total, Some(total)).unwrap();
        let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 1.5, 0.2);
        let psi = random_state(&basis, &mut ChaCha8Rng::seed_from_u64(seed), |_| true).unwrap();
        let cfg = HhklConfig::new(ell, 0.25, 0.5);
        let out = simulate_hhkl(&psi, &spec, &basis, &lattice, &cfg).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn zero_time_and_single_block_are_exact() {
    let (lattice, basis, spec, psi) = single_boson(6, 2);
    assert!(error(&lattice, &basis, &spec, &psi, &HhklConfig::new(2, 0.5, 0.0)) < 1e-10);
    assert!(error(&lattice, &basis, &spec, &psi, &HhklConfig::new(6, 0.5, 1.0)) < 1e-10);
}

#[test]
fn larger_blocks_beat_smaller_ones_on_eight_sites() {
    let (lattice, basis, spec, psi) = single_boson(8, 3);
    let e2 = error(
        &lattice,
        &basis,
        &spec,
        &psi,
        &HhklConfig::new(2, 0.25, 1.0),
    );
    let e4 = error(
        &lattice,
        &basis,
        &spec,
        &psi,
        &HhklConfig::new(4, 0.25, 1.0),
    );
    assert!(e4 < e2, "{e4} vs {e2}");
}

#[test]
fn halving_the_slice_does_not_more_than_double_the_error() {
    let (lattice, basis, spec, psi) = single_boson(12, 5);
    for ell in [2, 3, 4] {
        let coarse = error(
            &lattice,
            &basis,
            &spec,
            &psi,
            &HhklConfig::new(ell, 0.2, 1.0),
        );
        let fine = error(
            &lattice,
            &basis,
            &spec,
            &psi,
            &HhklConfig::new(ell, 0.1, 1.0),
        );
        assert!(fine <= 2.0 * coarse, "ell {ell}: {fine} vs {coarse}");
    }
}

#[test]
fn error_scan_decreases_on_sixteen_sites() {
    let (lattice, basis, spec, psi) = single_boson(16, 7);
    let report = hhkl_error_scan(
        &psi,
        &spec,
        &basis,
        &lattice,
        &[2, 4, 6],
        &HhklConfig::new(2, 0.1, 1.0),
    )
    .unwrap();
    let errs: Vec<f64> = report.points.iter().map(|p| p.lhs).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(report.fit.unwrap().slope < 0.0);
}

#[test]
fn frozen_hopping_scan_skips_the_fit() {
    let (lattice, basis, _, psi) = single_boson(8, 3);
    let spec = HamiltonianSpec::bose_hubbard(&lattice, 0.0, 2.0, 0.3);
    let report = hhkl_error_scan(
        &psi,
        &spec,
        &basis,
        &lattice,
        &[2, 4, 8],
        &HhklConfig::new(2, 0.25, 1.0),
    )
    .unwrap();
    assert!(report.points.iter().all(|p| p.lhs < 1e-10));
    assert!(report.fit.is_none());
}

#[test]
fn gate_count_is_linear_in_sites_and_polylog_in_precision() {
    let base = GateCountInputs::new(64.0, 16.0, 4.0, 1e-3, 1);
    let pinned = GateCountInputs {
        ell: Some(6.0),
        dt: Some(0.25),
        ..base
    };
    let one = gate_count(pinned).unwrap();
    let two = gate_count(GateCountInputs {
        n_sites: 128.0,
        ..pinned
    })
    .unwrap();
    assert!((two.total / one.total - 2.0).abs() < 1e-12);

    let coarse = gate_count(base).unwrap();
    let fine = gate_count(GateCountInputs {
        epsilon: 5e-4,
        ..base
    })
    .unwrap();
    let ratio = fine.total / coarse.total;
    assert!(ratio > 1.0 && ratio < 2.0, "{ratio}");
}
