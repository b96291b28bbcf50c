//! Symbolic Bose-Hubbard-type Hamiltonians: hopping lists plus polynomial
//! potentials in the number operators, optionally with piecewise-constant
//! term scaling in time.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::{hopping_entries, FockBasis};
use crate::lattice::{LatticeGraph, SiteId, SiteSet};
use crate::sparse::{SparseOperator, C64};

/// `J (b_i b_j† + h.c.)` with optional per-interval scale factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub i: SiteId,
    pub j: SiteId,
    pub amplitude: C64,
    /// One factor per schedule interval; empty means always 1.
    #[serde(default)]
    pub scales: Vec<f64>,
}

/// `coefficient · Π_m n̂_{support[m]}^{exponents[m]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// A polynomial in the number operators of the sites in `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub support: Vec<SiteId>,
    pub monomials: Vec<Monomial>,
    #[serde(default)]
    pub scales: Vec<f64>,
}

impl PotentialTerm {
    pub fn evaluate(&self, occupations: &[u8]) -> f64 {
        self.monomials
            .iter()
            .map(|m| {
                m.exponents
                    .iter()
                    .zip(&self.support)
                    .fold(m.coefficient, |acc, (&e, &site)| {
                        acc * (occupations[site] as f64).powi(e as i32)
                    })
            })
            .sum()
    }
}

/// Interval boundaries `t_0 < t_1 < … < t_m`; interval `k` is
/// `[t_k, t_{k+1})`, the last one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub breakpoints: Vec<f64>,
}

impl Schedule {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("schedule needs at least two strictly increasing breakpoints");
        }
        Ok(Self { breakpoints })
    }

    pub fn n_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn interval_of(&self, t: f64) -> Result<usize> {
        let (first, last) = (self.breakpoints[0], *self.breakpoints.last().unwrap());
        if !(first..=last).contains(&t) {
            return invalid(format!("time {t} outside schedule [{first}, {last}]"));
        }
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Ok((k - 1).min(self.n_intervals() - 1))
    }
}

fn scale_at(scales: &[f64], interval: Option<usize>) -> f64 {
    match interval {
        Some(k) if !scales.is_empty() => scales[k],
        _ => 1.0,
    }
}

/// Hopping list plus potential terms on a lattice of `n_sites` sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    n_sites: usize,
    hoppings: Vec<Hopping>,
    potentials: Vec<PotentialTerm>,
    /// Largest diameter of a potential support (k).
    interaction_range: u32,
    /// Coefficient bound g.
    coupling_bound: f64,
    schedule: Option<Schedule>,
}

impl HamiltonianSpec {
    pub fn new(
        lattice: &LatticeGraph,
        hoppings: Vec<Hopping>,
        potentials: Vec<PotentialTerm>,
    ) -> Result<Self> {
        let n = lattice.n_sites();
        for h in &hoppings {
            if h.i >= n || h.j >= n || h.i == h.j {
                return invalid(format!("hopping ({}, {}) invalid on {n} sites", h.i, h.j));
            }
            if !lattice.are_adjacent(h.i, h.j) {
                return invalid(format!(
                    "hopping ({}, {}) joins non-adjacent sites",
                    h.i, h.j
                ));
            }
        }
        let mut range = 0;
        for p in &potentials {
            if p.support.is_empty() || p.support.iter().any(|&s| s >= n) {
                return invalid(format!("potential support {:?} invalid", p.support));
            }
            if let Some(m) = p
                .monomials
                .iter()
                .find(|m| m.exponents.len() != p.support.len())
            {
                return invalid(format!(
                    "monomial exponents {:?} do not match support {:?}",
                    m.exponents, p.support
                ));
            }
            for &a in &p.support {
                for &b in &p.support {
                    range = range.max(lattice.distance(a, b));
                }
            }
        }
        let coupling_bound = potentials
            .iter()
            .flat_map(|p| p.monomials.iter().map(|m| m.coefficient.abs()))
            .fold(0.0, f64::max);
        Ok(Self {
            n_sites: n,
            hoppings,
            potentials,
            interaction_range: range,
            coupling_bound,
            schedule: None,
        })
    }

    /// Uniform hopping `J` on every lattice edge and on-site potential
    /// `(U/2) n(n−1) − μ n`.
    pub fn bose_hubbard(lattice: &LatticeGraph, j: f64, u: f64, mu: f64) -> Self {
        let hoppings = lattice
            .edges()
            .iter()
            .map(|&(a, b)| Hopping {
                i: a,
                j: b,
                amplitude: C64::new(j, 0.0),
                scales: Vec::new(),
            })
            .collect();
        let potentials = (0..lattice.n_sites())
            .map(|s| PotentialTerm {
                support: vec![s],
                monomials: vec![
                    Monomial {
                        coefficient: u / 2.0,
                        exponents: vec![2],
                    },
                    Monomial {
                        coefficient: -u / 2.0 - mu,
                        exponents: vec![1],
                    },
                ],
                scales: Vec::new(),
            })
            .collect();
        let mut spec = Self::new(lattice, hoppings, potentials).expect("edges are adjacent");
        spec.coupling_bound = u.abs() / 2.0 + mu.abs();
        spec
    }

    /// Declares a coefficient bound g; must dominate every coefficient.
    pub fn with_coupling_bound(mut self, g: f64) -> Result<Self> {
        let max = self
            .potentials
            .iter()
            .flat_map(|p| p.monomials.iter().map(|m| m.coefficient.abs()))
            .fold(0.0, f64::max);
        if g < max {
            return invalid(format!(
                "coupling bound {g} below largest coefficient {max}"
            ));
        }
        self.coupling_bound = g;
        Ok(self)
    }

    /// Attaches a piecewise schedule; every term's `scales` must be empty
    /// or have one entry per interval.
    pub fn with_schedule(mut self, schedule: Schedule) -> Result<Self> {
        let m = schedule.n_intervals();
        let bad_hop = self
            .hoppings
            .iter()
            .any(|h| !h.scales.is_empty() && h.scales.len() != m);
        let bad_pot = self
            .potentials
            .iter()
            .any(|p| !p.scales.is_empty() && p.scales.len() != m);
        if bad_hop || bad_pot {
            return invalid(format!("term scales must list {m} interval factors"));
        }
        self.schedule = Some(schedule);
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn hoppings(&self) -> &[Hopping] {
        &self.hoppings
    }

    pub fn potentials(&self) -> &[PotentialTerm] {
        &self.potentials
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        self.schedule.as_ref()
    }

    pub fn interaction_range(&self) -> u32 {
        self.interaction_range
    }

    pub fn coupling_bound(&self) -> f64 {
        self.coupling_bound
    }

    /// J̄ = max |J_ij|.
    pub fn max_hopping(&self) -> f64 {
        self.hoppings
            .iter()
            .map(|h| h.amplitude.norm())
            .fold(0.0, f64::max)
    }

    /// v̄, the largest monomial degree.
    pub fn degree_bound(&self) -> u32 {
        self.potentials
            .iter()
            .flat_map(|p| p.monomials.iter().map(Monomial::degree))
            .max()
            .unwrap_or(0)
    }

    fn restricted(
        &self,
        keep_hop: impl Fn(&Hopping) -> bool,
        keep_pot: impl Fn(&PotentialTerm) -> bool,
    ) -> Self {
        Self {
            n_sites: self.n_sites,
            hoppings: self
                .hoppings
                .iter()
                .filter(|h| keep_hop(h))
                .cloned()
                .collect(),
            potentials: self
                .potentials
                .iter()
                .filter(|p| keep_pot(p))
                .cloned()
                .collect(),
            interaction_range: self.interaction_range,
            coupling_bound: self.coupling_bound,
            schedule: self.schedule.clone(),
        }
    }

    /// `H_X`: the terms supported inside `X`.
    pub fn subset(&self, set: &SiteSet) -> Result<SubsetHamiltonian> {
        if set.is_empty() {
            return invalid("subset must be nonempty");
        }
        if set.universe() != self.n_sites {
            return invalid("site set belongs to a different lattice");
        }
        let spec = self.restricted(
            |h| set.contains(h.i) && set.contains(h.j),
            |p| p.support.iter().all(|&s| set.contains(s)),
        );
        Ok(SubsetHamiltonian {
            spec,
            subset: set.clone(),
        })
    }

    /// `∂h_X = H − H_X − H_{X^c}`: the terms straddling the boundary of X.
    pub fn boundary_terms(&self, set: &SiteSet) -> Self {
        self.restricted(
            |h| set.contains(h.i) != set.contains(h.j),
            |p| {
                let inside = p.support.iter().filter(|&&s| set.contains(s)).count();
                inside != 0 && inside != p.support.len()
            },
        )
    }

    fn interval(&self, time: Option<f64>) -> Result<Option<usize>> {
        match (&self.schedule, time) {
            (None, _) => Ok(None),
            (Some(s), Some(t)) => s.interval_of(t).map(Some),
            (Some(_), None) => invalid("scheduled Hamiltonian assembled without a time"),
        }
    }

    /// Diagonal of the potential part in the basis.
    pub fn potential_diagonal(&self, basis: &FockBasis, time: Option<f64>) -> Result<Vec<f64>> {
        self.check_basis(basis)?;
        let interval = self.interval(time)?;
        Ok((0..basis.dim())
            .map(|k| {
                let occ = basis.state(k);
                self.potentials
                    .iter()
                    .map(|p| scale_at(&p.scales, interval) * p.evaluate(occ))
                    .sum()
            })
            .collect())
    }

    /// Kinetic part `H_0` in the basis.
    pub fn hopping_operator(&self, basis: &FockBasis, time: Option<f64>) -> Result<SparseOperator> {
        self.check_basis(basis)?;
        let interval = self.interval(time)?;
        let terms: Vec<(SiteId, SiteId, C64)> = self
            .hoppings
            .iter()
            .map(|h| (h.i, h.j, h.amplitude * scale_at(&h.scales, interval)))
            .collect();
        let triplets = hopping_entries(basis, &terms)
            .into_iter()
            .map(|(col, row, v)| (row, col, v))
            .collect();
        Ok(SparseOperator::from_triplets(basis.dim(), triplets)?.with_checked_hermiticity())
    }

    /// Sparse matrix of `H_0 + V` at `time` (required when scheduled).
    pub fn assemble(&self, basis: &FockBasis, time: Option<f64>) -> Result<SparseOperator> {
        let kinetic = self.hopping_operator(basis, time)?;
        let potential = SparseOperator::diagonal_real(&self.potential_diagonal(basis, time)?);
        Ok(kinetic.add(&potential)?.with_checked_hermiticity())
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if basis.n_sites() != self.n_sites {
            return invalid(format!(
                "basis has {} sites, Hamiltonian {}",
                basis.n_sites(),
                self.n_sites
            ));
        }
        Ok(())
    }
}

/// `H_X` together with the subset it was restricted to.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetHamiltonian {
    spec: HamiltonianSpec,
    subset: SiteSet,
}

impl SubsetHamiltonian {
    pub fn subset(&self) -> &SiteSet {
        &self.subset
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn assemble(&self, basis: &FockBasis, time: Option<f64>) -> Result<SparseOperator> {
        self.spec.assemble(basis, time)
    }
}

/// `P H P` for a diagonal 0/1 projector `P`.
pub fn effective(
    hamiltonian: &SparseOperator,
    projector: &SparseOperator,
) -> Result<SparseOperator> {
    if projector.dim() != hamiltonian.dim() {
        return invalid("projector and Hamiltonian dimensions differ");
    }
    if !projector.is_diagonal() {
        return invalid("projector must be diagonal in the number basis");
    }
    let diag = projector.diagonal();
    if diag
        .iter()
        .any(|&p| p != C64::new(0.0, 0.0) && p != C64::new(1.0, 0.0))
    {
        return invalid("projector is not idempotent (entries must be 0 or 1)");
    }
    let keep = |k: usize| diag[k].re == 1.0;
    let triplets = hamiltonian
        .triplets()
        .filter(|&(r, c, _)| keep(r) && keep(c))
        .collect();
    let mut out = SparseOperator::from_triplets(hamiltonian.dim(), triplets)?;
    out.check_hermitian();
    Ok(out)
}
