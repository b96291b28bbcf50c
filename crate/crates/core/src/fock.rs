//! Truncated occupation-number bases and the bosonic operators built on
//! them.
//!
//! Creation beyond a site's cap maps to zero: every operator here is the
//! projection `Π̄ O Π̄` onto the truncated space, never an error.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use crate::error::{invalid, Error, Result};
use crate::lattice::{SiteId, SiteSet};
use crate::sparse::{SparseOperator, C64, ZERO};

/// Default cap on basis dimension.
pub const DEFAULT_DIM_LIMIT: usize = 1 << 22;

/// Occupation-number basis with per-site caps and an optional fixed total
/// boson number, enumerated in ascending lexicographic order (site 0 is
/// the most significant digit).
#[derive(Debug, Clone)]
pub struct FockBasis {
    caps: Vec<u32>,
    sector: Option<u32>,
    occupations: Vec<u8>,
    dim: usize,
    /// Mixed-radix strides, used when there is no sector.
    strides: Vec<usize>,
}

impl FockBasis {
    pub fn new(caps: &[u32], sector: Option<u32>) -> Result<Self> {
        Self::with_limit(caps, sector, DEFAULT_DIM_LIMIT)
    }

    pub fn uniform(n_sites: usize, cap: u32, sector: Option<u32>) -> Result<Self> {
        Self::new(&vec![cap; n_sites], sector)
    }

    pub fn with_limit(caps: &[u32], sector: Option<u32>, limit: usize) -> Result<Self> {
        if caps.is_empty() {
            return invalid("basis needs at least one site");
        }
        if let Some(&c) = caps.iter().find(|&&c| c > u8::MAX as u32) {
            return invalid(format!("cap {c} exceeds the supported maximum {}", u8::MAX));
        }
        let total: u32 = caps.iter().sum();
        if let Some(n) = sector {
            if n > total {
                return invalid(format!("sector N={n} exceeds the sum of caps {total}"));
            }
        }
        let dim = count_states(caps, sector);
        if dim > limit as u128 {
            return Err(Error::ResourceLimit(format!(
                "basis dimension {dim} exceeds limit {limit}"
            )));
        }
        let dim = dim as usize;
        let n_sites = caps.len();
        let mut strides = vec![1usize; n_sites];
        if sector.is_none() {
            for i in (0..n_sites - 1).rev() {
                strides[i] = strides[i + 1] * (caps[i + 1] as usize + 1);
            }
        }
        let mut occupations = Vec::with_capacity(dim * n_sites);
        let mut current = vec![0u8; n_sites];
        enumerate(caps, sector, 0, 0, &mut current, &mut occupations);
        debug_assert_eq!(occupations.len(), dim * n_sites);
        Ok(Self {
            caps: caps.to_vec(),
            sector,
            occupations,
            dim,
            strides,
        })
    }

    /// Dimension the basis would have, without building it.
    pub fn dimension_of(caps: &[u32], sector: Option<u32>) -> u128 {
        count_states(caps, sector)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn sector(&self) -> Option<u32> {
        self.sector
    }

    /// Occupation vector of basis state `k`.
    pub fn state(&self, k: usize) -> &[u8] {
        let n = self.n_sites();
        &self.occupations[k * n..(k + 1) * n]
    }

    pub fn occupation(&self, k: usize, site: SiteId) -> u32 {
        self.state(k)[site] as u32
    }

    /// Index of an occupation vector, if it belongs to the basis.
    pub fn rank(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.n_sites() || occ.iter().zip(&self.caps).any(|(&n, &c)| n as u32 > c) {
            return None;
        }
        match self.sector {
            None => Some(
                occ.iter()
                    .zip(&self.strides)
                    .map(|(&n, &s)| n as usize * s)
                    .sum(),
            ),
            Some(total) => {
                if occ.iter().map(|&n| n as u32).sum::<u32>() != total {
                    return None;
                }
                self.search(occ)
            }
        }
    }

    fn search(&self, occ: &[u8]) -> Option<usize> {
        let (mut lo, mut hi) = (0usize, self.dim);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.state(mid).cmp(occ) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn unrank(&self, k: usize) -> Vec<u8> {
        self.state(k).to_vec()
    }

    /// Total occupation of a site set in basis state `k`.
    pub fn occupation_of(&self, k: usize, set: &SiteSet) -> u32 {
        let s = self.state(k);
        set.iter().map(|i| s[i] as u32).sum()
    }

    pub fn total_occupation(&self, k: usize) -> u32 {
        self.state(k).iter().map(|&n| n as u32).sum()
    }

    fn check_site(&self, site: SiteId) -> Result<()> {
        if site >= self.n_sites() {
            return invalid(format!(
                "site {site} outside basis of {} sites",
                self.n_sites()
            ));
        }
        Ok(())
    }

    fn check_set(&self, set: &SiteSet) -> Result<()> {
        if set.universe() != self.n_sites() {
            return invalid(format!(
                "site set over {} sites used with a basis of {} sites",
                set.universe(),
                self.n_sites()
            ));
        }
        Ok(())
    }
}

fn count_states(caps: &[u32], sector: Option<u32>) -> u128 {
    match sector {
        None => caps.iter().map(|&c| c as u128 + 1).product(),
        Some(n) => {
            // ways[m] = number of ways to place m bosons on the sites seen so far
            let n = n as usize;
            let mut ways = vec![0u128; n + 1];
            ways[0] = 1;
            for &cap in caps {
                let mut next = vec![0u128; n + 1];
                for (m, &w) in ways.iter().enumerate() {
                    if w == 0 {
                        continue;
                    }
                    for k in 0..=(cap as usize).min(n - m) {
                        next[m + k] = next[m + k].saturating_add(w);
                    }
                }
                ways = next;
            }
            ways[n]
        }
    }
}

fn enumerate(
    caps: &[u32],
    sector: Option<u32>,
    site: usize,
    used: u32,
    current: &mut [u8],
    out: &mut Vec<u8>,
) {
    if site == caps.len() {
        if sector.is_none_or(|n| n == used) {
            out.extend_from_slice(current);
        }
        return;
    }
    let remaining_cap: u32 = caps[site + 1..].iter().sum();
    let (lo, hi) = match sector {
        None => (0, caps[site]),
        Some(n) => {
            let left = n - used;
            (left.saturating_sub(remaining_cap), caps[site].min(left))
        }
    };
    for k in lo..=hi {
        current[site] = k as u8;
        enumerate(caps, sector, site + 1, used + k, current, out);
    }
    current[site] = 0;
}

/// `J b_i b_j† + conj(J) b_j b_i†` restricted to the basis.
///
/// `b_i b_j†` moves one boson from `i` to `j` with amplitude
/// `√(n_i (n_j + 1))`; moves that exceed a cap are dropped.
pub fn op_hopping(
    basis: &FockBasis,
    i: SiteId,
    j: SiteId,
    amplitude: C64,
) -> Result<SparseOperator> {
    if i == j {
        return invalid(format!("hopping needs two distinct sites, got {i} twice"));
    }
    basis.check_site(i)?;
    basis.check_site(j)?;
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); basis.dim()];
    for (col, row, value) in hopping_entries(basis, &[(i, j, amplitude)]) {
        rows[row].push((col, value));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
    }
    Ok(SparseOperator::from_rows(basis.dim(), rows).with_checked_hermiticity())
}

/// Matrix elements `(col, row, value)` of a list of hopping terms, each
/// meaning `J b_i b_j† + h.c.`.
pub(crate) fn hopping_entries(
    basis: &FockBasis,
    terms: &[(SiteId, SiteId, C64)],
) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    let mut occ = vec![0u8; basis.n_sites()];
    for col in 0..basis.dim() {
        for &(i, j, amp) in terms {
            for (from, to, a) in [(i, j, amp), (j, i, amp.conj())] {
                occ.copy_from_slice(basis.state(col));
                let (nf, nt) = (occ[from] as u32, occ[to] as u32);
                if nf == 0 || nt + 1 > basis.caps()[to] {
                    continue;
                }
                occ[from] -= 1;
                occ[to] += 1;
                if let Some(row) = basis.rank(&occ) {
                    out.push((col, row, a * ((nf * (nt + 1)) as f64).sqrt()));
                }
            }
        }
    }
    out
}

/// Lowering operator `b_i` on a basis without a sector.
pub fn op_lowering(basis: &FockBasis, site: SiteId) -> Result<SparseOperator> {
    basis.check_site(site)?;
    if basis.sector().is_some() {
        return Err(Error::Unsupported(
            "b_i leaves a fixed-number sector; use a basis without sector".into(),
        ));
    }
    let mut triplets = Vec::new();
    let mut occ = vec![0u8; basis.n_sites()];
    for col in 0..basis.dim() {
        occ.copy_from_slice(basis.state(col));
        let n = occ[site];
        if n == 0 {
            continue;
        }
        occ[site] -= 1;
        let row = basis.rank(&occ).expect("lowering stays within caps");
        triplets.push((row, col, C64::new((n as f64).sqrt(), 0.0)));
    }
    SparseOperator::from_triplets(basis.dim(), triplets)
}

/// Diagonal `(n̂_X)^power`.
pub fn op_number(basis: &FockBasis, set: &SiteSet, power: u32) -> Result<SparseOperator> {
    if power == 0 {
        return invalid("power must be >= 1");
    }
    basis.check_set(set)?;
    let diag: Vec<f64> = (0..basis.dim())
        .map(|k| (basis.occupation_of(k, set) as f64).powi(power as i32))
        .collect();
    Ok(SparseOperator::diagonal_real(&diag))
}

/// Diagonal 0/1 projector onto states whose occupation of `set` lies in
/// `range`. An empty range gives the zero operator.
pub fn projector_number(
    basis: &FockBasis,
    set: &SiteSet,
    range: RangeInclusive<u32>,
) -> Result<SparseOperator> {
    basis.check_set(set)?;
    let diag: Vec<f64> = (0..basis.dim())
        .map(|k| f64::from(u8::from(range.contains(&basis.occupation_of(k, set)))))
        .collect();
    Ok(SparseOperator::diagonal_real(&diag))
}

/// Projector `Π̄_{L,q}` onto states with `n_i ≤ q` for every site of `set`.
pub fn projector_truncation(basis: &FockBasis, set: &SiteSet, q: u32) -> Result<SparseOperator> {
    basis.check_set(set)?;
    let diag: Vec<f64> = (0..basis.dim())
        .map(|k| {
            let s = basis.state(k);
            f64::from(u8::from(set.iter().all(|i| s[i] as u32 <= q)))
        })
        .collect();
    Ok(SparseOperator::diagonal_real(&diag))
}

/// Diagonal `Σ_j w_j n̂_j`.
pub fn weighted_number(basis: &FockBasis, weights: &[f64]) -> Result<SparseOperator> {
    if weights.len() != basis.n_sites() {
        return invalid(format!(
            "{} weights for {} sites",
            weights.len(),
            basis.n_sites()
        ));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return invalid(format!("weights must be finite and non-negative, got {w}"));
    }
    let diag: Vec<f64> = (0..basis.dim())
        .map(|k| {
            basis
                .state(k)
                .iter()
                .zip(weights)
                .map(|(&n, w)| n as f64 * w)
                .sum()
        })
        .collect();
    Ok(SparseOperator::diagonal_real(&diag))
}

/// Probability weight of basis states where some site sits at its cap; a
/// proxy for leakage out of the truncated space.
pub fn cap_saturation(basis: &FockBasis, amplitudes: &[C64]) -> f64 {
    (0..basis.dim())
        .filter(|&k| {
            basis
                .state(k)
                .iter()
                .zip(basis.caps())
                .any(|(&n, &c)| n as u32 == c)
        })
        .map(|k| amplitudes[k].norm_sqr())
        .sum()
}

/// Whether truncation is invisible: a sector basis where no cap is below
/// the total boson number.
pub fn truncation_is_exact(basis: &FockBasis) -> bool {
    basis
        .sector()
        .is_some_and(|n| basis.caps().iter().all(|&c| c >= n))
}

/// Embeds a state from `from` into `to` by occupation vector. States of
/// `from` missing in `to` must carry zero amplitude.
pub fn embed(from: &FockBasis, to: &FockBasis, amplitudes: &[C64]) -> Result<Vec<C64>> {
    if from.n_sites() != to.n_sites() {
        return invalid("bases live on different lattices");
    }
    let mut out = vec![ZERO; to.dim()];
    for (k, &a) in amplitudes.iter().enumerate() {
        match to.rank(from.state(k)) {
            Some(r) => out[r] = a,
            None if a == ZERO => {}
            None => {
                return invalid(format!(
                    "state {:?} missing from target basis",
                    from.state(k)
                ))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::ONE;

    fn set(n: usize, s: &[usize]) -> SiteSet {
        SiteSet::new(n, s.iter().copied()).unwrap()
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(FockBasis::new(&[1, 1], None).unwrap().dim(), 4);
        let b = FockBasis::new(&[2, 2], Some(2)).unwrap();
        assert_eq!(b.dim(), 3);
        let states: Vec<Vec<u8>> = (0..3).map(|k| b.unrank(k)).collect();
        assert_eq!(states, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn sector_dimension_matches_enumeration() {
        // Brute force over the full product space.
        let mut count = 0;
        for a in 0..=3 {
            for b in 0..=3 {
                for c in 0..=3 {
                    if a + b + c == 3 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 10);
        assert_eq!(FockBasis::new(&[3, 3, 3], Some(3)).unwrap().dim(), count);
    }

    #[test]
    fn dimension_limit() {
        let err = FockBasis::with_limit(&[3; 12], None, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
        assert!(FockBasis::new(&[1, 1], Some(3)).is_err());
    }

    #[test]
    fn rank_unrank_roundtrip() {
        for basis in [
            FockBasis::new(&[2, 1, 3], None).unwrap(),
            FockBasis::new(&[3, 3, 3, 3], Some(4)).unwrap(),
        ] {
            for k in 0..basis.dim() {
                assert_eq!(basis.rank(&basis.unrank(k)), Some(k));
            }
            for k in 1..basis.dim() {
                assert!(basis.state(k - 1) < basis.state(k));
            }
        }
    }

    #[test]
    fn single_boson_hopping() {
        let b = FockBasis::new(&[1, 1], None).unwrap();
        let h = op_hopping(&b, 0, 1, ONE).unwrap();
        let from = b.rank(&[1, 0]).unwrap();
        let to = b.rank(&[0, 1]).unwrap();
        assert_eq!(h.get(to, from), ONE);
        assert_eq!(h.get(from, to), ONE);
        assert_eq!(h.hermitian(), crate::sparse::Hermiticity::Yes);
        assert!(op_hopping(&b, 1, 1, ONE).is_err());
    }

    #[test]
    fn hopping_amplitude_is_sqrt_n_i_n_j_plus_one() {
        let b = FockBasis::uniform(3, 4, Some(4)).unwrap();
        let j = C64::new(0.7, 0.2);
        let h = op_hopping(&b, 0, 2, j).unwrap();
        for col in 0..b.dim() {
            let s = b.state(col);
            let (ni, nj) = (s[0] as f64, s[2] as f64);
            if ni == 0.0 {
                continue;
            }
            let mut t = s.to_vec();
            t[0] -= 1;
            t[2] += 1;
            let row = b.rank(&t).unwrap();
            assert!((h.get(row, col) - j * (ni * (nj + 1.0)).sqrt()).norm() < 1e-14);
        }
    }

    #[test]
    fn lowering_commutator_is_identity_below_cap() {
        let b = FockBasis::new(&[3, 2], None).unwrap();
        let low = op_lowering(&b, 0).unwrap();
        let raise = low.adjoint();
        let comm = low
            .mul(&raise)
            .unwrap()
            .sub(&raise.mul(&low).unwrap())
            .unwrap();
        for k in 0..b.dim() {
            let below_cap = b.occupation(k, 0) < 3;
            for c in 0..b.dim() {
                let expected = if c == k && below_cap { ONE } else { ZERO };
                if below_cap {
                    assert!((comm.get(k, c) - expected).norm() < 1e-14);
                }
            }
        }
        assert!(op_lowering(&FockBasis::new(&[1, 1], Some(1)).unwrap(), 0).is_err());
    }

    #[test]
    fn number_operators() {
        let b = FockBasis::uniform(3, 3, Some(3)).unwrap();
        let all = set(3, &[0, 1, 2]);
        let n = op_number(&b, &all, 1).unwrap();
        assert!(n.diagonal().iter().all(|&v| v == C64::new(3.0, 0.0)));

        let b2 = FockBasis::new(&[2, 2], Some(2)).unwrap();
        let k = b2.rank(&[2, 0]).unwrap();
        let n0sq = op_number(&b2, &set(2, &[0]), 2).unwrap();
        assert_eq!(n0sq.get(k, k), C64::new(4.0, 0.0));

        let edge = set(3, &[0, 2]);
        let d = op_number(&b, &edge, 2).unwrap();
        for k in 0..b.dim() {
            let s = b.state(k);
            let expect = ((s[0] + s[2]) as f64).powi(2);
            assert_eq!(d.get(k, k).re, expect);
        }
        assert!(op_number(&b, &edge, 0).is_err());
    }

    #[test]
    fn projectors() {
        let b = FockBasis::uniform(4, 3, Some(4)).unwrap();
        let x = set(4, &[1, 2]);
        let full = projector_number(&b, &x, 0..=6).unwrap();
        assert_eq!(full, SparseOperator::identity(b.dim()));
        let none = projector_number(&b, &set(4, &[0]), 4..=4).unwrap();
        assert_eq!(none.nnz(), 0);
        // Π_{X,≤N−δN} against direct selection.
        let p = projector_number(&b, &x, 0..=2).unwrap();
        for k in 0..b.dim() {
            let s = b.state(k);
            let expect = if s[1] + s[2] <= 2 { 1.0 } else { 0.0 };
            assert_eq!(p.get(k, k).re, expect);
        }
        let p2 = p.mul(&p).unwrap();
        assert_eq!(p2, p);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = projector_number(&b, &x, 3..=2).unwrap();
        assert_eq!(empty.nnz(), 0);
    }

    #[test]
    fn weighted_numbers() {
        let b = FockBasis::uniform(5, 2, Some(2)).unwrap();
        let all = set(5, &[0, 1, 2, 3, 4]);
        assert_eq!(
            weighted_number(&b, &[1.0; 5]).unwrap(),
            op_number(&b, &all, 1).unwrap()
        );
        let w: Vec<f64> = (0..5)
            .map(|j: i32| (-((j - 2).abs() as f64)).exp())
            .collect();
        let d = weighted_number(&b, &w).unwrap();
        for k in 0..b.dim() {
            let s = b.state(k);
            let expect: f64 = (0..5).map(|j| s[j] as f64 * w[j]).sum();
            assert!((d.get(k, k).re - expect).abs() < 1e-15);
        }
        assert!(weighted_number(&b, &[1.0, -1.0, 0.0, 0.0, 0.0]).is_err());

        let single = FockBasis::new(&[3], None).unwrap();
        let d0 = weighted_number(&single, &[1.0]).unwrap();
        assert_eq!(d0, op_number(&single, &set(1, &[0]), 1).unwrap());
    }
}
