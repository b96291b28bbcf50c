//! Closed-form constants of the boson-transport bounds and the numerical
//! checks that evaluate both sides of each inequality on exact dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolve::{evolve, expectation, EvolutionConfig};
use crate::fock::{cap_saturation, truncation_is_exact, FockBasis};
use crate::hamiltonian::HamiltonianSpec;
use crate::lattice::{LatticeGraph, SiteSet};
use crate::sparse::{SparseOperator, StateVector, C64, ZERO};

/// Leakage probability above which truncation could contaminate a check.
pub const LEAKAGE_LIMIT: f64 = 1e-10;

/// Relative slack allowed when comparing the two sides of a bound.
pub const BOUND_SLACK: f64 = 1e-9;

pub fn satisfied(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + BOUND_SLACK * rhs.abs().max(1.0)
}

/// `λ_c = 1 + c^{−D−1} e^c γ D!`, bounding `Σ_j e^{−c d(i,j)}`.
pub fn lambda_c(c: f64, dimension: usize, gamma: f64) -> f64 {
    let factorial: f64 = (1..=dimension).map(|k| k as f64).product();
    1.0 + c.powi(-(dimension as i32) - 1) * c.exp() * gamma * factorial
}

/// Inputs of [`compute_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsInputs {
    pub gamma: f64,
    pub jbar: f64,
    pub tau: f64,
    pub dimension: usize,
    pub ell: f64,
    pub t: f64,
    pub r: f64,
    /// `|∂(X[R])|`, entering δ̃_ℓ.
    #[serde(default)]
    pub boundary_size: usize,
    /// Prefactor c in `ℓ_t = c·t·log(max(t, 2))`.
    #[serde(default = "one")]
    pub ell_t_coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub inputs: ConstantsInputs,
    /// `(c, λ_c)` for c ∈ {1/2, 3/4, 1}.
    pub lambda: Vec<(f64, f64)>,
    pub c_tau_1: f64,
    pub c_tau_2: f64,
    pub f_tau: f64,
    pub delta_ell: f64,
    pub delta_tilde_ell: f64,
    pub ell_t: f64,
    /// Smallest ℓ admitted by the long-time transport bound at (t, τ).
    pub ell_min: f64,
}

impl ConstantsTable {
    pub fn lambda_half(&self) -> f64 {
        self.lambda[0].1
    }

    pub fn lambda_three_quarters(&self) -> f64 {
        self.lambda[1].1
    }

    /// Named scalar outputs, in a fixed order.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("lambda_1/2", self.lambda[0].1),
            ("lambda_3/4", self.lambda[1].1),
            ("lambda_1", self.lambda[2].1),
            ("c_tau_1", self.c_tau_1),
            ("c_tau_2", self.c_tau_2),
            ("f_tau", self.f_tau),
            ("delta_ell", self.delta_ell),
            ("delta_tilde_ell", self.delta_tilde_ell),
            ("ell_t", self.ell_t),
            ("ell_min", self.ell_min),
        ]
    }
}

/// Largest admissible short time step `1/(4γJ̄)`.
pub fn tau_max(gamma: f64, jbar: f64) -> f64 {
    if jbar == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (4.0 * gamma * jbar)
    }
}

fn check_tau(tau: f64, gamma: f64, jbar: f64) -> Result<()> {
    let max = tau_max(gamma, jbar);
    if !(tau > 0.0) || tau > max * (1.0 + 1e-12) {
        return invalid(format!("τ = {tau} outside (0, 1/(4γJ̄)] = (0, {max}]"));
    }
    Ok(())
}

pub fn compute_constants(inputs: ConstantsInputs) -> Result<ConstantsTable> {
    let ConstantsInputs {
        gamma,
        jbar,
        tau,
        dimension,
        ell,
        t,
        ..
    } = inputs;
    if dimension == 0 || !(gamma > 0.0) || jbar < 0.0 {
        return invalid("need D >= 1, γ > 0 and J̄ >= 0");
    }
    check_tau(tau, gamma, jbar)?;
    let x = gamma * jbar * tau;
    let c_tau_1 = 40.0 * (4.0 * x).exp();
    let c_tau_2 = (4.0 * x + 1.0).exp() * (1.0 + 8.0 * x + tau);
    let lambda: Vec<(f64, f64)> = [0.5, 0.75, 1.0]
        .iter()
        .map(|&c| (c, lambda_c(c, dimension, gamma)))
        .collect();
    let (lam_half, lam_3q) = (lambda[0].1, lambda[1].1);
    let f_tau = 0.5 * (1.0 + 1.0 / (5.0 * c_tau_1 * lam_half + 2.0)).ln();
    let delta_ell = 5.0 * c_tau_1 * lam_half * (-f_tau * ell).exp();
    let steps = t / tau;
    let delta_tilde_ell = c_tau_2
        * steps
        * (3.0 * steps * delta_ell
            + 2.0 * c_tau_1 * lam_3q * (-3.0 * ell / 16.0).exp() * inputs.boundary_size as f64);
    let ell_t = inputs.ell_t_coefficient * t * t.max(2.0).ln();
    let ell_min = (5.0 * c_tau_1 * lam_half * steps).ln() / f_tau;
    Ok(ConstantsTable {
        inputs,
        lambda,
        c_tau_1,
        c_tau_2,
        f_tau,
        delta_ell,
        delta_tilde_ell,
        ell_t,
        ell_min,
    })
}

/// Splits `t` into the fewest equal steps no longer than `tau_max`.
pub fn transport_step(t: f64, tau_max: f64) -> (f64, u32) {
    if !tau_max.is_finite() {
        return (t, 1);
    }
    let steps = ((t / tau_max) * (1.0 - 1e-12)).ceil().max(1.0);
    (t / steps, steps as u32)
}

/// Initial states for the bound checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialKind {
    /// Every site holds `filling` bosons.
    Mott { filling: u32 },
    /// Product of truncated coherent states with the given mean density,
    /// projected onto the basis and renormalized.
    CoherentTruncated { mean: f64 },
    /// Explicit amplitudes `[re, im]` per basis state.
    Custom { amplitudes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    #[serde(flatten)]
    pub kind: InitialKind,
    /// Low-density certificate parameters.
    #[serde(default = "default_b0")]
    pub b0: f64,
    #[serde(default = "one")]
    pub kappa: f64,
}

fn default_b0() -> f64 {
    std::f64::consts::E
}

impl InitialStateSpec {
    pub fn mott(filling: u32) -> Self {
        Self {
            kind: InitialKind::Mott { filling },
            b0: default_b0(),
            kappa: 1.0,
        }
    }

    pub fn build(&self, basis: &FockBasis) -> Result<StateVector> {
        if self.kappa < 1.0 {
            return invalid(format!("κ must be >= 1, got {}", self.kappa));
        }
        match &self.kind {
            InitialKind::Mott { filling } => {
                let occ = vec![*filling as u8; basis.n_sites()];
                if basis.caps().iter().any(|&c| c < *filling) {
                    return invalid(format!("Mott filling {filling} exceeds a site cap"));
                }
                let k = basis.rank(&occ).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "Mott state with filling {filling} not in the basis sector"
                    ))
                })?;
                Ok(StateVector::basis_state(basis.dim(), k))
            }
            InitialKind::CoherentTruncated { mean } => {
                if !(*mean >= 0.0) {
                    return invalid("coherent mean density must be non-negative");
                }
                let alpha = mean.sqrt();
                let amps = (0..basis.dim())
                    .map(|k| {
                        let a = basis.state(k).iter().fold(1.0, |acc, &n| {
                            let fact: f64 = (1..=n as u64).map(|m| m as f64).product();
                            acc * alpha.powi(n as i32) / fact.sqrt()
                        });
                        C64::new(a, 0.0)
                    })
                    .collect();
                StateVector::new(amps)?.normalized()
            }
            InitialKind::Custom { amplitudes } => {
                if amplitudes.len() != basis.dim() {
                    return invalid(format!(
                        "{} amplitudes for a basis of dimension {}",
                        amplitudes.len(),
                        basis.dim()
                    ));
                }
                StateVector::new(
                    amplitudes
                        .iter()
                        .map(|&[re, im]| C64::new(re, im))
                        .collect(),
                )?
                .normalized()
            }
        }
    }
}

/// Whether `max_i ⟨n̂_i^s⟩ ≤ (1/e)(b₀ s^κ / e)^s` for `s = 1..=s_max`.
pub fn low_density_certificate(
    basis: &FockBasis,
    psi: &StateVector,
    b0: f64,
    kappa: f64,
    s_max: u32,
) -> bool {
    let e = std::f64::consts::E;
    (1..=s_max).all(|s| {
        let bound = (b0 * (s as f64).powf(kappa) / e).powi(s as i32) / e;
        (0..basis.n_sites()).all(|i| {
            let moment: f64 = (0..basis.dim())
                .map(|k| {
                    psi.amplitudes()[k].norm_sqr() * (basis.occupation(k, i) as f64).powi(s as i32)
                })
                .sum();
            moment <= bound
        })
    })
}

/// Uniform complex Gaussian amplitudes on the basis states selected by
/// `admissible`, normalized.
pub fn random_state<R: Rng + ?Sized>(
    basis: &FockBasis,
    rng: &mut R,
    admissible: impl Fn(&[u8]) -> bool,
) -> Result<StateVector> {
    let amps: Vec<C64> = (0..basis.dim())
        .map(|k| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if admissible(basis.state(k)) {
                C64::new(re, im)
            } else {
                ZERO
            }
        })
        .collect();
    StateVector::new(amps)?.normalized()
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub params: Vec<(String, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl BoundPoint {
    pub fn new(params: Vec<(&str, f64)>, lhs: f64, rhs: f64) -> Self {
        Self {
            params: params
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            lhs,
            rhs,
            satisfied: satisfied(lhs, rhs),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub experiment: String,
    pub points: Vec<BoundPoint>,
    pub fit: Option<LinearFit>,
}

impl BoundReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            points: Vec::new(),
            fit: None,
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.points.iter().all(|p| p.satisfied)
    }

    pub fn violations(&self) -> usize {
        self.points.iter().filter(|p| !p.satisfied).count()
    }
}

/// `D̂_X` weights `w_j = Σ_{i∈∂X} e^{−d(i,j)}`.
pub fn boundary_weights(lattice: &LatticeGraph, set: &SiteSet) -> Vec<f64> {
    let boundary = lattice.boundary(set);
    (0..lattice.n_sites())
        .map(|j| {
            boundary
                .iter()
                .map(|i| (-(lattice.distance(i, j) as f64)).exp())
                .sum()
        })
        .collect()
}

/// `𝒟̂_{X[R]}` weights: `e^{−3d(j,X[R])/4}` outside `X[R]`, zero inside.
pub fn exterior_weights(lattice: &LatticeGraph, ball: &SiteSet) -> Vec<f64> {
    let dist = lattice.distances_to_set(ball);
    dist.iter()
        .map(|&d| {
            if d == 0 {
                0.0
            } else {
                (-0.75 * d as f64).exp()
            }
        })
        .collect()
}

/// Expectation of `f(n)` for a function of the occupation vector.
fn diagonal_expectation(basis: &FockBasis, psi: &StateVector, f: impl Fn(&[u8]) -> f64) -> f64 {
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * f(basis.state(k)))
        .sum()
}

fn occupation(occ: &[u8], set: &SiteSet) -> f64 {
    set.iter().map(|i| occ[i] as f64).sum()
}

fn weighted(occ: &[u8], weights: &[f64]) -> f64 {
    occ.iter().zip(weights).map(|(&n, w)| n as f64 * w).sum()
}

/// Outcome of the long-time transport bound at one (R, t, s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPoint {
    pub point: BoundPoint,
    /// Whether ℓ = ⌊R/(t/τ)⌋ meets the admissibility condition.
    pub admissible: bool,
    pub ell: u32,
    pub tau: f64,
    /// Smallest R for which the condition holds at this t.
    pub min_admissible_r: f64,
}

/// Everything the bound checks need about one model.
pub struct Setting<'a> {
    pub lattice: &'a LatticeGraph,
    pub basis: &'a FockBasis,
    pub spec: &'a HamiltonianSpec,
    pub gamma: f64,
    pub evolution: EvolutionConfig,
}

impl<'a> Setting<'a> {
    pub fn new(
        lattice: &'a LatticeGraph,
        basis: &'a FockBasis,
        spec: &'a HamiltonianSpec,
        gamma: f64,
    ) -> Result<Self> {
        if lattice.n_sites() != basis.n_sites() || spec.n_sites() != basis.n_sites() {
            return invalid("lattice, basis and Hamiltonian disagree on the number of sites");
        }
        if spec.schedule().is_some() {
            return Err(Error::Unsupported(
                "bound checks use time-independent Hamiltonians".into(),
            ));
        }
        Ok(Self {
            lattice,
            basis,
            spec,
            gamma,
            evolution: EvolutionConfig::default(),
        })
    }

    pub fn jbar(&self) -> f64 {
        self.spec.max_hopping()
    }

    pub fn tau_max(&self) -> f64 {
        tau_max(self.gamma, self.jbar())
    }

    fn constants(
        &self,
        tau: f64,
        ell: f64,
        t: f64,
        r: f64,
        boundary_size: usize,
    ) -> Result<ConstantsTable> {
        compute_constants(ConstantsInputs {
            gamma: self.gamma,
            jbar: self.jbar(),
            tau,
            dimension: self.lattice.dimension(),
            ell,
            t,
            r,
            boundary_size,
            ell_t_coefficient: 1.0,
        })
    }

    fn check_margin(&self, states: &[&StateVector]) -> Result<()> {
        if truncation_is_exact(self.basis) {
            return Ok(());
        }
        for psi in states {
            let leak = cap_saturation(self.basis, psi.amplitudes());
            if leak >= LEAKAGE_LIMIT {
                return invalid(format!(
                    "occupancy margin violated: cap-saturation probability {leak:.3e} >= {LEAKAGE_LIMIT:.0e}"
                ));
            }
        }
        Ok(())
    }

    fn check_state(&self, psi: &StateVector, set: &SiteSet) -> Result<()> {
        if psi.dim() != self.basis.dim() {
            return invalid("state dimension does not match the basis");
        }
        if set.is_empty() || set.universe() != self.lattice.n_sites() {
            return invalid("region must be a nonempty subset of the lattice");
        }
        Ok(())
    }

    /// Short-time moment bound: `⟨n̂_X(τ)^s⟩ ≤ ⟨(n̂_X + c_{τ,1}D̂_X + c_{τ,2}s)^s⟩`.
    pub fn schuch_check(
        &self,
        psi: &StateVector,
        set: &SiteSet,
        tau: f64,
        s: u32,
    ) -> Result<BoundReport> {
        self.check_state(psi, set)?;
        if s == 0 {
            return invalid("moment order s must be >= 1");
        }
        check_tau(tau, self.gamma, self.jbar())?;
        let h = self.spec.assemble(self.basis, None)?;
        let evolved = evolve(&h, psi, tau, &self.evolution)?;
        self.check_margin(&[psi, &evolved])?;

        let consts = self.constants(tau, 0.0, tau, 0.0, 0)?;
        let weights = boundary_weights(self.lattice, set);
        let si = s as i32;
        let lhs = diagonal_expectation(self.basis, &evolved, |occ| occupation(occ, set).powi(si));
        let rhs = diagonal_expectation(self.basis, psi, |occ| {
            (occupation(occ, set)
                + consts.c_tau_1 * weighted(occ, &weights)
                + consts.c_tau_2 * s as f64)
                .powi(si)
        });
        let mut report = BoundReport::new("schuch");
        report.points.push(BoundPoint::new(
            vec![
                ("s", s as f64),
                ("tau", tau),
                ("region_size", set.len() as f64),
            ],
            lhs,
            rhs,
        ));
        Ok(report)
    }

    /// Time step τ ≤ 1/(4γJ̄) with t/τ integral, and the step count.
    pub fn transport_step(&self, t: f64) -> (f64, u32) {
        transport_step(t, self.tau_max())
    }

    /// Evaluates both sides of the long-time transport bound regardless of
    /// whether ℓ meets the admissibility condition.
    pub fn transport_evaluate(
        &self,
        psi: &StateVector,
        set: &SiteSet,
        r: u32,
        t: f64,
        s: u32,
    ) -> Result<TransportPoint> {
        self.check_state(psi, set)?;
        if s == 0 || !(t > 0.0) {
            return invalid("need s >= 1 and t > 0");
        }
        let (tau, steps) = self.transport_step(t);
        let ell = r / steps;
        let ball = self.lattice.ball(set, r);
        let consts = self.constants(
            tau,
            ell as f64,
            t,
            r as f64,
            self.lattice.boundary(&ball).len(),
        )?;

        let h = self.spec.assemble(self.basis, None)?;
        let evolved = evolve(&h, psi, t, &self.evolution)?;
        self.check_margin(&[psi, &evolved])?;

        let ratio = t / tau;
        let inside = 1.0 + 3.0 * ratio * consts.delta_ell;
        let outside = 2.0 * consts.c_tau_1 * (-3.0 * ell as f64 / 16.0).exp();
        let offset = (consts.c_tau_2 * ratio + consts.delta_tilde_ell) * s as f64;
        let weights = exterior_weights(self.lattice, &ball);
        let si = s as i32;
        let lhs = diagonal_expectation(self.basis, &evolved, |occ| occupation(occ, set).powi(si));
        let rhs = diagonal_expectation(self.basis, psi, |occ| {
            (inside * occupation(occ, &ball) + outside * weighted(occ, &weights) + offset).powi(si)
        });
        let point = BoundPoint::new(vec![("R", r as f64), ("t", t), ("s", s as f64)], lhs, rhs);
        Ok(TransportPoint {
            point,
            admissible: ell as f64 >= consts.ell_min,
            ell,
            tau,
            min_admissible_r: steps as f64 * consts.ell_min.max(0.0).ceil(),
        })
    }

    /// Long-time transport bound, refusing radii whose ℓ violates the
    /// admissibility condition.
    pub fn transport_check(
        &self,
        psi: &StateVector,
        set: &SiteSet,
        r: u32,
        t: f64,
        s: u32,
    ) -> Result<BoundReport> {
        let (tau, steps) = self.transport_step(t);
        let ell = (r / steps) as f64;
        let consts = self.constants(tau, ell, t, r as f64, 0)?;
        if ell < consts.ell_min {
            return invalid(format!(
                "ℓ = {ell} below the admissible {:.3e}; minimal admissible R = {:.3e}",
                consts.ell_min,
                steps as f64 * consts.ell_min.ceil()
            ));
        }
        let point = self.transport_evaluate(psi, set, r, t, s)?;
        let mut report = BoundReport::new("transport");
        report.points.push(point.point);
        Ok(report)
    }

    /// `‖(O(H,t) − O(H_{X0[R]},t))|ψ₀⟩‖`, via four propagations.
    pub fn lr_error(
        &self,
        psi: &StateVector,
        observable: &SparseOperator,
        region: &SiteSet,
        r: u32,
        t: f64,
    ) -> Result<f64> {
        self.check_state(psi, region)?;
        if observable.dim() != self.basis.dim() {
            return invalid("observable dimension does not match the basis");
        }
        let ball = self.lattice.ball(region, r);
        if !ball.is_subset(&self.lattice.all_sites()) {
            return invalid("X0[R] is not contained in the lattice");
        }
        let full = self.spec.assemble(self.basis, None)?;
        let local = self.spec.subset(&ball)?.assemble(self.basis, None)?;
        let heisenberg = |h: &SparseOperator| -> Result<StateVector> {
            let forward = evolve(h, psi, t, &self.evolution)?;
            evolve(h, &forward.apply(observable), -t, &self.evolution)
        };
        let a = heisenberg(&full)?;
        let b = heisenberg(&local)?;
        Ok(crate::evolve::pure_state_trace_distance(&a.sub(&b)))
    }
}

/// `⟨ψ| Π_{region, ≥x} |ψ⟩`.
pub fn number_tail(basis: &FockBasis, psi: &StateVector, region: &SiteSet, x: u32) -> f64 {
    diagonal_expectation(basis, psi, |occ| {
        if occupation(occ, region) >= x as f64 {
            1.0
        } else {
            0.0
        }
    })
}

/// `e^{iθ n̂_X}`, a unit-norm observable diagonal in the number basis.
pub fn phase_observable(basis: &FockBasis, set: &SiteSet, theta: f64) -> SparseOperator {
    let diag: Vec<C64> = (0..basis.dim())
        .map(|k| C64::from_polar(1.0, theta * basis.occupation_of(k, set) as f64))
        .collect();
    SparseOperator::diagonal_from(&diag)
}

/// `⟨ψ|O|ψ⟩` as a real number, for hermitian observables.
pub fn real_expectation(psi: &StateVector, op: &SparseOperator) -> f64 {
    expectation(psi, op).re
}
