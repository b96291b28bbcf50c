use bosonlight::bounds::{
    number_tail, phase_observable, random_state, transport_step, InitialStateSpec, Setting,
};
use bosonlight::fock::{op_number, projector_number, FockBasis};
use bosonlight::hamiltonian::HamiltonianSpec;
use bosonlight::lattice::{estimate_gamma, LatticeGraph, SiteSet};
use bosonlight::sparse::{StateVector, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn number_tail_is_a_decreasing_projector_expectation(n in 2usize..=5, total in 1u32..=4, mask in 1u8..32, seed in any::<u64>()) {
        let basis = FockBasis::uniform(n, total, Some(total)).unwrap();
        let region = SiteSet::new(n, (0..n).filter(|i| mask >> i & 1 == 1)).unwrap();
        prop_assume!(!region.is_empty());
        let psi = random_state(&basis, &mut ChaCha8Rng::seed_from_u64(seed), |_| true).unwrap();
        let mut previous = 1.0;
        for x in 0..=total + 1 {
            let tail = number_tail(&basis, &psi, &region, x);
            let projector = projector_number(&basis, &region, x..=u32::MAX).unwrap();
            let brute = psi.inner(&psi.apply(&projector)).re;
            prop_assert!((tail - brute).abs() < 1e-12);
            prop_assert!(tail <= previous + 1e-15);
            previous = tail;
        }
    }

    #[test]
    fn short_time_bound_holds_on_random_states(n in 2usize..=6, total in 1u32..=3, s in 1u32..=3, lo in 0usize..6, len in 1usize..6, seed in any::<u64>()) {
        let lattice = LatticeGraph::chain(n).unwrap();
        let lo = lo % n;
        let region = lattice.site_set(lo..(lo + len).min(n)).unwrap();
        let basis = FockBasis::uniform(n, total, Some(total)).unwrap();
        let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 2.0, 0.0);
        let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
        let psi = random_state(&basis, &mut ChaCha8Rng::seed_from_u64(seed), |_| true).unwrap();
        let report = setting.schuch_check(&psi, &region, setting.tau_max(), s).unwrap();
        prop_assert!(report.all_satisfied(), "{:?}", report.points);
    }
}

fn mott_chain(n: usize) -> (LatticeGraph, FockBasis, HamiltonianSpec, StateVector) {
    let lattice = LatticeGraph::chain(n).unwrap();
    let basis = FockBasis::uniform(n, n as u32, Some(n as u32)).unwrap();
    let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 2.0, 0.0);
    let psi = InitialStateSpec::mott(1).build(&basis).unwrap();
    (lattice, basis, spec, psi)
}

#[test]
fn tail_edge_cases() {
    let (lattice, basis, _, psi) = mott_chain(4);
    let site = lattice.site_set([2]).unwrap();
    assert_eq!(number_tail(&basis, &psi, &site, 0), 1.0);
    assert_eq!(number_tail(&basis, &psi, &site, 2), 0.0);
    assert_eq!(number_tail(&basis, &psi, &lattice.all_sites(), 5), 0.0);
}

#[test]
fn short_time_bound_on_mott_middle_pair() {
    let (lattice, basis, spec, psi) = mott_chain(4);
    let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
    let middle = lattice.site_set([1, 2]).unwrap();
    for s in [1, 2] {
        assert!(setting
            .schuch_check(&psi, &middle, setting.tau_max(), s)
            .unwrap()
            .all_satisfied());
    }
}

#[test]
fn short_time_bound_is_trivial_without_hopping_or_on_the_whole_lattice() {
    let (lattice, basis, _, psi) = mott_chain(4);
    let frozen = HamiltonianSpec::bose_hubbard(&lattice, 0.0, 2.0, 0.0);
    let setting = Setting::new(&lattice, &basis, &frozen, 3.0).unwrap();
    let region = lattice.site_set([0, 1]).unwrap();
    let p = &setting.schuch_check(&psi, &region, 1.0, 2).unwrap().points[0];
    assert!((p.lhs - 4.0).abs() < 1e-12 && p.rhs >= p.lhs);

    let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 2.0, 0.0);
    let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
    let p = &setting
        .schuch_check(&psi, &lattice.all_sites(), setting.tau_max(), 1)
        .unwrap()
        .points[0];
    assert!((p.lhs - 4.0).abs() < 1e-10 && p.satisfied);
}

#[test]
fn single_step_transport_uses_the_radius_as_block_length() {
    let (lattice, basis, spec, psi) = mott_chain(6);
    let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
    let tau = setting.tau_max();
    assert_eq!(transport_step(tau, tau), (tau, 1));
    assert_eq!(transport_step(2.0 * tau, tau), (tau, 2));
    let left = lattice.site_set(0..3).unwrap();
    let p = setting.transport_evaluate(&psi, &left, 3, tau, 1).unwrap();
    assert_eq!(p.ell, 3);
    assert!(p.point.satisfied);
}

#[test]
fn transport_on_eight_site_chain_at_two_steps() {
    let (lattice, basis, spec, psi) = mott_chain(8);
    let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
    let left = lattice.site_set(0..4).unwrap();
    let t = 2.0 * setting.tau_max();
    for r in [0, 2, lattice.diameter()] {
        for s in [1, 2] {
            let p = setting.transport_evaluate(&psi, &left, r, t, s).unwrap();
            assert!(p.point.satisfied, "R={r} s={s}: {:?}", p.point);
        }
    }
    // The strict check refuses radii far below the admissible scale.
    assert!(setting.transport_check(&psi, &left, 2, t, 1).is_err());
}

#[test]
fn light_cone_error_vanishes_at_full_radius_and_zero_time() {
    let lattice = LatticeGraph::chain(6).unwrap();
    let basis = FockBasis::uniform(6, 2, Some(2)).unwrap();
    let spec = HamiltonianSpec::bose_hubbard(&lattice, 1.0, 2.0, 0.0);
    let setting = Setting::new(&lattice, &basis, &spec, 3.0).unwrap();
    let psi = StateVector::basis_state(basis.dim(), basis.rank(&[1, 1, 0, 0, 0, 0]).unwrap());
    let origin = lattice.site_set([0]).unwrap();
    let obs = phase_observable(&basis, &origin, 1.0);
    assert_eq!(
        setting
            .lr_error(&psi, &obs, &origin, lattice.diameter(), 0.3)
            .unwrap(),
        0.0
    );
    assert!(setting.lr_error(&psi, &obs, &origin, 1, 0.0).unwrap() < 1e-14);
}

/// With one boson and no interaction, the many-body problem is the
/// single-particle hopping matrix, so the error follows from two dense
/// L×L exponentials.
#[test]
fn free_single_particle_light_cone_error_matches_dense_oracle() {
    let n = 11;
    let (j, t, origin_site, start) = (1.0, 0.8, 5, 3);
    let lattice = LatticeGraph::chain(n).unwrap();
    let basis = FockBasis::uniform(n, 1, Some(1)).unwrap();
    let spec = HamiltonianSpec::bose_hubbard(&lattice, j, 0.0, 0.0);
    let gamma = estimate_gamma(&lattice, 4).unwrap().gamma;
    let setting = Setting::new(&lattice, &basis, &spec, gamma).unwrap();
    let origin = lattice.site_set([origin_site]).unwrap();
    let observable = op_number(&basis, &origin, 1).unwrap();
    let mut occ = vec![0u8; n];
    occ[start] = 1;
    let psi = StateVector::basis_state(n, basis.rank(&occ).unwrap());

    let propagate = |lo: usize, hi: usize| -> Vec<C64> {
        let h = DMatrix::<C64>::from_fn(n, n, |a, b| {
            let inside = (lo..=hi).contains(&a) && (lo..=hi).contains(&b);
            if inside && a.abs_diff(b) == 1 {
                C64::new(j, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let forward = (h.clone() * C64::new(0.0, -t)).exp();
        let backward = (h * C64::new(0.0, t)).exp();
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[start] = C64::new(1.0, 0.0);
        let mut w = forward * v;
        for a in 0..n {
            if a != origin_site {
                w[a] = C64::new(0.0, 0.0);
            }
        }
        (backward * w).iter().copied().collect()
    };
    let full = propagate(0, n - 1);
    for r in 1..=5u32 {
        let local = propagate(origin_site - r as usize, origin_site + r as usize);
        let oracle: f64 = full
            .iter()
            .zip(&local)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let got = setting.lr_error(&psi, &observable, &origin, r, t).unwrap();
        assert!((got - oracle).abs() < 1e-9, "R={r}: {got} vs {oracle}");
    }
}

#[test]
fn seeded_random_states_are_reproducible_and_normalized() {
    let basis = FockBasis::uniform(3, 2, Some(2)).unwrap();
    let a = random_state(&basis, &mut ChaCha8Rng::seed_from_u64(9), |_| true).unwrap();
    let b = random_state(&basis, &mut ChaCha8Rng::seed_from_u64(9), |_| true).unwrap();
    assert_eq!(a, b);
    assert!((a.norm() - 1.0).abs() < 1e-14);
    let admissible =
        random_state(&basis, &mut ChaCha8Rng::seed_from_u64(9), |occ| occ[0] == 0).unwrap();
    for k in 0..basis.dim() {
        if basis.state(k)[0] != 0 {
            assert_eq!(admissible.amplitudes()[k], C64::new(0.0, 0.0));
        }
    }
}
