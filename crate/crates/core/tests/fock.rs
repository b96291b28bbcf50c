use bosonlight::fock::{
    op_hopping, op_lowering, op_number, projector_number, weighted_number, FockBasis,
};
use bosonlight::lattice::SiteSet;
use bosonlight::sparse::{SparseOperator, C64};
use proptest::prelude::*;

fn basis() -> impl Strategy<Value = FockBasis> {
    (
        prop::collection::vec(0u32..=3, 1..=5),
        prop::option::of(0u32..=6),
    )
        .prop_filter_map("empty sector", |(caps, sector)| {
            FockBasis::new(&caps, sector).ok()
        })
}

fn brute_force_dim(caps: &[u32], sector: Option<u32>) -> usize {
    let mut count = 0;
    let total: usize = caps.iter().map(|&c| c as usize + 1).product();
    for mut idx in 0..total {
        let mut n = 0;
        for &c in caps {
            n += (idx % (c as usize + 1)) as u32;
            idx /= c as usize + 1;
        }
        if sector.is_none_or(|s| s == n) {
            count += 1;
        }
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_inverts_unrank(b in basis()) {
        for k in 0..b.dim() {
            prop_assert_eq!(b.rank(&b.unrank(k)), Some(k));
        }
    }

    #[test]
    fn dimension_matches_enumeration(caps in prop::collection::vec(0u32..=3, 1..=5), sector in prop::option::of(0u32..=8)) {
        let expected = brute_force_dim(&caps, sector);
        prop_assert_eq!(FockBasis::dimension_of(&caps, sector), expected as u128);
        if let Ok(b) = FockBasis::new(&caps, sector) {
            prop_assert_eq!(b.dim(), expected);
        }
    }

    #[test]
    fn states_are_lexicographically_sorted(b in basis()) {
        for k in 1..b.dim() {
            prop_assert!(b.state(k - 1) < b.state(k));
        }
    }

    #[test]
    fn hopping_inside_or_outside_a_region_keeps_its_number(n in 2usize..=5, total in 1u32..=4, mask in any::<u8>()) {
        let b = FockBasis::uniform(n, total, Some(total)).unwrap();
        let set = SiteSet::new(n, (0..n).filter(|i| mask >> i & 1 == 1)).unwrap();
        let nx = op_number(&b, &set, 1).unwrap();
        let n_all = op_number(&b, &SiteSet::new(n, 0..n).unwrap(), 1).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let hop = op_hopping(&b, i, j, C64::new(0.7, 0.3)).unwrap();
                prop_assert!(hop.commutator(&n_all).unwrap().max_abs() == 0.0);
                if set.contains(i) == set.contains(j) {
                    prop_assert!(hop.commutator(&nx).unwrap().max_abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn full_region_number_is_n_times_identity() {
    let b = FockBasis::uniform(4, 3, Some(3)).unwrap();
    let all = SiteSet::new(4, 0..4).unwrap();
    let expected = SparseOperator::identity(b.dim()).scale(C64::new(3.0, 0.0));
    assert_eq!(op_number(&b, &all, 1).unwrap(), expected);
}

#[test]
fn full_range_projector_is_identity_and_high_threshold_is_zero() {
    let b = FockBasis::uniform(3, 2, None).unwrap();
    let site = SiteSet::new(3, [1]).unwrap();
    assert_eq!(
        projector_number(&b, &site, 0..=2).unwrap(),
        SparseOperator::identity(b.dim())
    );
    assert_eq!(projector_number(&b, &site, 3..=10).unwrap().max_abs(), 0.0);
}

#[test]
fn boundary_weighted_number_matches_hand_sum() {
    let b = FockBasis::uniform(5, 2, Some(2)).unwrap();
    let weights: Vec<f64> = (0..5)
        .map(|j: i32| (-((j - 2).abs() as f64)).exp())
        .collect();
    let d = weighted_number(&b, &weights).unwrap();
    for k in 0..b.dim() {
        let hand: f64 = b
            .state(k)
            .iter()
            .zip(&weights)
            .map(|(&n, w)| n as f64 * w)
            .sum();
        assert!((d.get(k, k).re - hand).abs() < 1e-14);
    }
}

#[test]
fn lowering_is_adjoint_of_raising_on_every_element() {
    let b = FockBasis::uniform(3, 2, None).unwrap();
    let lower = op_lowering(&b, 1).unwrap();
    for (r, c, v) in lower.triplets() {
        let (from, to) = (b.state(c), b.state(r));
        assert_eq!(from[1], to[1] + 1);
        assert!((v.re - (from[1] as f64).sqrt()).abs() < 1e-15);
    }
}
