//! Finite hypercubic lattices, graph distances, balls `X[r]`, boundaries
//! and the structural constant bounding ball growth.

use std::collections::VecDeque;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type SiteId = usize;

/// Distance reported between sites in different connected components.
pub const UNREACHABLE: u32 = u32::MAX;

/// A finite lattice graph with dense row-major site ids.
///
/// Distances are computed lazily by breadth-first search and memoized per
/// source site, so a shared `&LatticeGraph` can be queried from several
/// threads.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    dims: Vec<usize>,
    periodic: Vec<bool>,
    dimension: usize,
    neighbors: Vec<Vec<SiteId>>,
    edges: Vec<(SiteId, SiteId)>,
    distances: Vec<OnceLock<Vec<u32>>>,
}

impl LatticeGraph {
    /// Hypercubic lattice with the given extents. `periodic` may be empty
    /// (all axes open) or hold one flag per axis.
    pub fn hypercubic(dims: &[usize], periodic: &[bool]) -> Result<Self> {
        if dims.is_empty() {
            return invalid("lattice needs at least one axis");
        }
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return invalid(format!("extent of axis {axis} is zero"));
        }
        let periodic = match periodic.len() {
            0 => vec![false; dims.len()],
            n if n == dims.len() => periodic.to_vec(),
            n => {
                return invalid(format!(
                    "{n} periodic flags given for a {}-dimensional lattice",
                    dims.len()
                ))
            }
        };
        let n_sites = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::ResourceLimit("site count overflows".into()))?;

        // Row-major: the last axis varies fastest.
        let mut strides = vec![1usize; dims.len()];
        for axis in (0..dims.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * dims[axis + 1];
        }
        let mut edges = Vec::new();
        for site in 0..n_sites {
            for (axis, &extent) in dims.iter().enumerate() {
                let coord = (site / strides[axis]) % extent;
                let next = if coord + 1 < extent {
                    Some(site + strides[axis])
                } else if periodic[axis] && extent > 2 {
                    Some(site - coord * strides[axis])
                } else {
                    None
                };
                if let Some(other) = next {
                    edges.push((site.min(other), site.max(other)));
                }
            }
        }
        Ok(Self::assemble(
            dims.to_vec(),
            periodic,
            dims.len(),
            n_sites,
            edges,
        ))
    }

    /// Open chain of `n` sites.
    pub fn chain(n: usize) -> Result<Self> {
        Self::hypercubic(&[n], &[false])
    }

    /// Arbitrary graph from an explicit edge list. `dimension` is the
    /// growth dimension used in the structural-constant inequalities.
    pub fn from_edges(
        n_sites: usize,
        dimension: usize,
        edges: &[(SiteId, SiteId)],
    ) -> Result<Self> {
        if n_sites == 0 || dimension == 0 {
            return invalid("graph needs at least one site and dimension >= 1");
        }
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n_sites || b >= n_sites {
                return invalid(format!("edge ({a},{b}) references a missing site"));
            }
            if a == b {
                return invalid(format!("self loop at site {a}"));
            }
            list.push((a.min(b), a.max(b)));
        }
        Ok(Self::assemble(
            vec![n_sites],
            vec![false],
            dimension,
            n_sites,
            list,
        ))
    }

    fn assemble(
        dims: Vec<usize>,
        periodic: Vec<bool>,
        dimension: usize,
        n_sites: usize,
        mut edges: Vec<(SiteId, SiteId)>,
    ) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut neighbors = vec![Vec::new(); n_sites];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self {
            dims,
            periodic,
            dimension,
            neighbors,
            edges,
            distances: (0..n_sites).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    /// Spatial dimension D.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn edges(&self) -> &[(SiteId, SiteId)] {
        &self.edges
    }

    pub fn neighbors(&self, site: SiteId) -> &[SiteId] {
        &self.neighbors[site]
    }

    pub fn are_adjacent(&self, a: SiteId, b: SiteId) -> bool {
        self.neighbors
            .get(a)
            .is_some_and(|list| list.binary_search(&b).is_ok())
    }

    /// Integer coordinates of a site (row-major, last axis fastest).
    pub fn coords(&self, site: SiteId) -> Vec<usize> {
        let mut rest = site;
        let mut out = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            out[axis] = rest % self.dims[axis];
            rest /= self.dims[axis];
        }
        out
    }

    pub fn site_at(&self, coords: &[usize]) -> Option<SiteId> {
        if coords.len() != self.dims.len() || coords.iter().zip(&self.dims).any(|(c, d)| c >= d) {
            return None;
        }
        Some(
            coords
                .iter()
                .zip(&self.dims)
                .fold(0, |acc, (c, d)| acc * d + c),
        )
    }

    /// Graph distance d(a, b).
    pub fn distance(&self, a: SiteId, b: SiteId) -> u32 {
        self.distances[a].get_or_init(|| self.bfs(&[a]))[b]
    }

    /// Distances from every site to the nearest site of `set`.
    pub fn distances_to_set(&self, set: &SiteSet) -> Vec<u32> {
        match set.as_slice() {
            [single] => self.distances[*single]
                .get_or_init(|| self.bfs(&[*single]))
                .clone(),
            sites => self.bfs(sites),
        }
    }

    pub fn distance_to_set(&self, site: SiteId, set: &SiteSet) -> u32 {
        set.iter()
            .map(|x| self.distance(site, x))
            .min()
            .unwrap_or(UNREACHABLE)
    }

    fn bfs(&self, sources: &[SiteId]) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.n_sites()];
        let mut queue = VecDeque::with_capacity(self.n_sites());
        for &s in sources {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(site) = queue.pop_front() {
            let next = dist[site] + 1;
            for &nb in &self.neighbors[site] {
                if dist[nb] == UNREACHABLE {
                    dist[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        dist
    }

    /// Largest finite graph distance.
    pub fn diameter(&self) -> u32 {
        (0..self.n_sites())
            .flat_map(|a| (0..self.n_sites()).map(move |b| (a, b)))
            .map(|(a, b)| self.distance(a, b))
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0)
    }

    pub fn all_sites(&self) -> SiteSet {
        SiteSet {
            sites: (0..self.n_sites()).collect(),
            universe: self.n_sites(),
        }
    }

    pub fn site_set(&self, sites: impl IntoIterator<Item = SiteId>) -> Result<SiteSet> {
        SiteSet::new(self.n_sites(), sites)
    }

    /// `X[r] = {i : d(i, X) <= r}`.
    pub fn ball(&self, set: &SiteSet, r: u32) -> SiteSet {
        let dist = self.distances_to_set(set);
        SiteSet {
            sites: (0..self.n_sites()).filter(|&i| dist[i] <= r).collect(),
            universe: self.n_sites(),
        }
    }

    /// `∂X = {i ∈ X : d(i, Λ∖X) = 1}`.
    pub fn boundary(&self, set: &SiteSet) -> SiteSet {
        let sites = set
            .iter()
            .filter(|&i| self.neighbors[i].iter().any(|&nb| !set.contains(nb)))
            .collect();
        SiteSet {
            sites,
            universe: self.n_sites(),
        }
    }

    /// Axis-aligned box with inclusive corner coordinates.
    pub fn box_sites(&self, lo: &[usize], hi: &[usize]) -> Result<SiteSet> {
        if lo.len() != self.dims.len() || hi.len() != self.dims.len() {
            return invalid("box corners must have one coordinate per axis");
        }
        if lo
            .iter()
            .zip(hi)
            .zip(&self.dims)
            .any(|((l, h), d)| l > h || h >= d)
        {
            return invalid(format!(
                "box {lo:?}..={hi:?} outside lattice {:?}",
                self.dims
            ));
        }
        let sites = (0..self.n_sites()).filter(|&s| {
            let c = self.coords(s);
            c.iter().zip(lo).zip(hi).all(|((c, l), h)| l <= c && c <= h)
        });
        self.site_set(sites)
    }

    /// Every axis-aligned box of the lattice (singletons included).
    pub fn all_boxes(&self) -> Vec<SiteSet> {
        let ranges: Vec<Vec<(usize, usize)>> = self
            .dims
            .iter()
            .map(|&d| (0..d).flat_map(|l| (l..d).map(move |h| (l, h))).collect())
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; ranges.len()];
        loop {
            let lo: Vec<usize> = idx.iter().zip(&ranges).map(|(&k, r)| r[k].0).collect();
            let hi: Vec<usize> = idx.iter().zip(&ranges).map(|(&k, r)| r[k].1).collect();
            out.push(self.box_sites(&lo, &hi).expect("box within lattice"));
            let mut axis = ranges.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < ranges[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Sorted, duplicate-free set of site ids of a lattice with `universe` sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteSet {
    sites: Vec<SiteId>,
    universe: usize,
}

impl SiteSet {
    pub fn new(universe: usize, sites: impl IntoIterator<Item = SiteId>) -> Result<Self> {
        let mut sites: Vec<SiteId> = sites.into_iter().collect();
        if let Some(&bad) = sites.iter().find(|&&s| s >= universe) {
            return invalid(format!("site {bad} outside lattice of {universe} sites"));
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(Self { sites, universe })
    }

    pub fn empty(universe: usize) -> Self {
        Self {
            sites: Vec::new(),
            universe,
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.sites.len() == self.universe
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.sites.iter().copied()
    }

    pub fn as_slice(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn complement(&self) -> Self {
        Self {
            sites: (0..self.universe).filter(|&s| !self.contains(s)).collect(),
            universe: self.universe,
        }
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.iter().all(|s| other.contains(s))
    }

    pub fn difference(&self, other: &SiteSet) -> Self {
        Self {
            sites: self.iter().filter(|&s| !other.contains(s)).collect(),
            universe: self.universe,
        }
    }

    pub fn union(&self, other: &SiteSet) -> Self {
        let mut sites: Vec<SiteId> = self.iter().chain(other.iter()).collect();
        sites.sort_unstable();
        sites.dedup();
        Self {
            sites,
            universe: self.universe.max(other.universe),
        }
    }

    /// Membership mask of length `universe`.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.universe];
        for s in self.iter() {
            mask[s] = true;
        }
        mask
    }
}

/// Lattice constant γ bounding `|X[ℓ]∖X| ≤ γℓ^D|∂X| − 1` and
/// `|∂(X[ℓ])| ≤ γℓ^{D−1}|X|`, found on a grid of step 1/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstant {
    pub gamma: f64,
    pub max_ell_verified: u32,
}

const GAMMA_GRID: u64 = 4;
const GAMMA_CAP: u64 = 64;

/// Smallest grid multiple k (γ = k/4) for which both inequalities hold on
/// one (X, ℓ) pair, or `None` when no finite γ can satisfy them.
fn quarters_required(lattice: &LatticeGraph, set: &SiteSet, ell: u32) -> Option<u64> {
    let d = lattice.dimension() as u32;
    let ball = lattice.ball(set, ell);
    let grown = (ball.len() - set.len()) as u64;
    let boundary = lattice.boundary(set).len() as u64;
    let ball_boundary = lattice.boundary(&ball).len() as u64;
    let ell = ell as u64;

    let first = if boundary == 0 {
        return None;
    } else {
        // k ℓ^D |∂X| ≥ 4(|X[ℓ]∖X| + 1)
        (GAMMA_GRID * (grown + 1)).div_ceil(ell.pow(d) * boundary)
    };
    let second = (GAMMA_GRID * ball_boundary).div_ceil(ell.pow(d - 1) * set.len() as u64);
    Some(first.max(second))
}

impl StructuralConstant {
    /// Whether both defining inequalities hold for this (X, ℓ).
    pub fn holds_for(&self, lattice: &LatticeGraph, set: &SiteSet, ell: u32) -> bool {
        let d = lattice.dimension() as i32;
        let ball = lattice.ball(set, ell);
        let grown = (ball.len() - set.len()) as f64;
        let boundary = lattice.boundary(set).len() as f64;
        let ball_boundary = lattice.boundary(&ball).len() as f64;
        let ell = ell as f64;
        grown <= self.gamma * ell.powi(d) * boundary - 1.0
            && ball_boundary <= self.gamma * ell.powi(d - 1) * set.len() as f64
    }
}

/// Smallest γ on the quarter grid satisfying the growth inequalities for
/// every singleton and every axis-aligned box seed (other than Λ) and every
/// `1 ≤ ℓ ≤ max_ell`.
pub fn estimate_gamma(lattice: &LatticeGraph, max_ell: u32) -> Result<StructuralConstant> {
    if max_ell == 0 {
        return invalid("max_ell must be >= 1");
    }
    let mut seeds: Vec<SiteSet> = (0..lattice.n_sites())
        .map(|s| SiteSet {
            sites: vec![s],
            universe: lattice.n_sites(),
        })
        .collect();
    seeds.extend(lattice.all_boxes().into_iter().filter(|b| b.len() > 1));
    seeds.retain(|s| !s.is_full());
    if seeds.is_empty() {
        // Single-site lattice: no proper subset to test.
        return Ok(StructuralConstant {
            gamma: 1.0,
            max_ell_verified: max_ell,
        });
    }

    let mut quarters = GAMMA_GRID; // γ ≥ 1
    for seed in &seeds {
        for ell in 1..=max_ell {
            let need = quarters_required(lattice, seed, ell).ok_or_else(|| {
                Error::NumericalFailure(format!(
                    "seed {:?} has an empty boundary; no finite γ exists",
                    seed.as_slice()
                ))
            })?;
            quarters = quarters.max(need);
        }
    }
    if quarters > GAMMA_CAP * GAMMA_GRID {
        return Err(Error::NumericalFailure(format!(
            "required γ = {} exceeds the cap {GAMMA_CAP}",
            quarters as f64 / GAMMA_GRID as f64
        )));
    }
    Ok(StructuralConstant {
        gamma: quarters as f64 / GAMMA_GRID as f64,
        max_ell_verified: max_ell,
    })
}
