use bosonlight::lattice::{estimate_gamma, LatticeGraph, SiteSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lattice_and_set() -> impl Strategy<Value = (LatticeGraph, SiteSet)> {
    (
        prop::collection::vec(1usize..=7, 1..=2),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(dims, periodic, seed)| {
            let lattice = LatticeGraph::hypercubic(&dims, &vec![periodic; dims.len()]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = lattice.n_sites();
            let k = rng.random_range(1..=n);
            let sites: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
            let set = lattice.site_set(sites).unwrap();
            (lattice, set)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balls_grow_with_radius((lattice, set) in lattice_and_set(), r1 in 0u32..6, dr in 0u32..4) {
        let small = lattice.ball(&set, r1);
        let large = lattice.ball(&set, r1 + dr);
        prop_assert!(set.is_subset(&small));
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn ball_boundary_lies_on_the_outer_shell((lattice, set) in lattice_and_set(), r in 1u32..6) {
        let ball = lattice.ball(&set, r);
        let shell = ball.difference(&lattice.ball(&set, r - 1));
        prop_assert!(lattice.boundary(&ball).is_subset(&shell));
    }

    #[test]
    fn open_grid_distance_is_manhattan(dims in prop::collection::vec(1usize..=6, 1..=3), a in any::<u64>(), b in any::<u64>()) {
        let lattice = LatticeGraph::hypercubic(&dims, &vec![false; dims.len()]).unwrap();
        let n = lattice.n_sites() as u64;
        let (a, b) = ((a % n) as usize, (b % n) as usize);
        let manhattan: usize = lattice.coords(a).iter().zip(lattice.coords(b)).map(|(x, y)| x.abs_diff(y)).sum();
        prop_assert_eq!(lattice.distance(a, b) as usize, manhattan);
    }

    #[test]
    fn distance_is_a_metric((lattice, _set) in lattice_and_set(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = lattice.n_sites();
        let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        prop_assert_eq!(lattice.distance(a, b), lattice.distance(b, a));
        prop_assert_eq!(lattice.distance(a, a), 0);
        prop_assert!(lattice.distance(a, c) <= lattice.distance(a, b) + lattice.distance(b, c));
    }
}

#[test]
fn saturated_ball_is_the_lattice() {
    let lattice = LatticeGraph::hypercubic(&[3, 4], &[false, false]).unwrap();
    let all = lattice.all_sites();
    assert_eq!(lattice.ball(&all, 3), all);
    assert!(lattice.boundary(&all).is_empty());
}

#[test]
fn grid_without_center_has_four_boundary_sites() {
    let lattice = LatticeGraph::hypercubic(&[3, 3], &[false, false]).unwrap();
    let center = lattice.site_at(&[1, 1]).unwrap();
    let set = lattice.site_set((0..9).filter(|&s| s != center)).unwrap();
    let brute: Vec<usize> = set
        .iter()
        .filter(|&s| lattice.are_adjacent(s, center))
        .collect();
    assert_eq!(lattice.boundary(&set).as_slice(), brute.as_slice());
    assert_eq!(brute.len(), 4);
}

#[test]
fn gamma_holds_on_fresh_random_samples() {
    for dims in [vec![10], vec![4, 4]] {
        let lattice = LatticeGraph::hypercubic(&dims, &vec![false; dims.len()]).unwrap();
        let gamma = estimate_gamma(&lattice, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = lattice.n_sites();
        for _ in 0..100 {
            let k = rng.random_range(1..=3);
            let set = SiteSet::new(n, (0..k).map(|_| rng.random_range(0..n))).unwrap();
            let ell = rng.random_range(1..=4);
            assert!(
                gamma.holds_for(&lattice, &set, ell),
                "dims {dims:?}, set {:?}, ell {ell}",
                set.as_slice()
            );
        }
    }
}
