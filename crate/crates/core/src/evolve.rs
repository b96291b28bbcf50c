//! Time propagation `e^{-iHt}ψ`: dense Padé scaling-and-squaring for small
//! dimensions, Lanczos-Krylov with adaptive substeps otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::FockBasis;
use crate::hamiltonian::HamiltonianSpec;
use crate::sparse::{dot, norm, Hermiticity, SparseOperator, StateVector, C64, ZERO};

/// Largest dimension propagated densely by [`Method::Auto`].
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Krylov,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub method: Method,
    /// Per-substep error target of the Krylov propagator.
    pub tolerance: f64,
    pub krylov_dim: usize,
    /// Upper bound on a single Krylov substep.
    pub max_substep: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            tolerance: 1e-10,
            krylov_dim: 30,
            max_substep: f64::INFINITY,
        }
    }
}

impl EvolutionConfig {
    pub fn dense() -> Self {
        Self {
            method: Method::Dense,
            ..Self::default()
        }
    }

    pub fn krylov() -> Self {
        Self {
            method: Method::Krylov,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            ));
        }
        if self.krylov_dim < 2 {
            return invalid(format!("krylov_dim must be >= 2, got {}", self.krylov_dim));
        }
        if !(self.max_substep > 0.0) {
            return invalid("max_substep must be positive");
        }
        Ok(())
    }

    fn use_dense(&self, dim: usize) -> bool {
        match self.method {
            Method::Dense => true,
            Method::Krylov => false,
            Method::Auto => dim <= DENSE_LIMIT,
        }
    }
}

fn require_hermitian(h: &SparseOperator) -> Result<()> {
    let ok = match h.hermitian() {
        Hermiticity::Yes => true,
        Hermiticity::No => false,
        Hermiticity::Unchecked => h.hermiticity_defect() <= crate::sparse::HERMITIAN_TOL,
    };
    if ok {
        Ok(())
    } else {
        invalid("propagation requires a hermitian Hamiltonian")
    }
}

/// Dense `e^{-iHt}` by Padé scaling and squaring.
pub fn dense_propagator(h: &SparseOperator, t: f64) -> DMatrix<C64> {
    let scaled = h.to_dense() * C64::new(0.0, -t);
    scaled.exp()
}

fn apply_dense(u: &DMatrix<C64>, psi: &[C64]) -> Vec<C64> {
    let v = DVector::from_column_slice(psi);
    (u * v).as_slice().to_vec()
}

/// `e^{-iHt}ψ`. Negative `t` propagates backwards.
pub fn evolve(
    h: &SparseOperator,
    psi: &StateVector,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<StateVector> {
    cfg.validate()?;
    if h.dim() != psi.dim() {
        return invalid(format!(
            "state of dim {} vs operator of dim {}",
            psi.dim(),
            h.dim()
        ));
    }
    require_hermitian(h)?;
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let out = if cfg.use_dense(h.dim()) {
        apply_dense(&dense_propagator(h, t), psi.amplitudes())
    } else {
        krylov_evolve(h, psi.amplitudes(), t, cfg)?
    };
    Ok(StateVector::from_vec_unchecked(out))
}

/// Applies `(H_1, t_1), (H_2, t_2), …` in order.
pub fn evolve_piecewise(
    segments: &[(&SparseOperator, f64)],
    psi: &StateVector,
    cfg: &EvolutionConfig,
) -> Result<StateVector> {
    segments
        .iter()
        .try_fold(psi.clone(), |state, &(h, dt)| evolve(h, &state, dt, cfg))
}

/// Time-ordered propagation from `t0` to `t1` under a (possibly
/// scheduled) Hamiltonian; each schedule interval is assembled once.
pub fn evolve_scheduled(
    spec: &HamiltonianSpec,
    basis: &FockBasis,
    psi: &StateVector,
    t0: f64,
    t1: f64,
    cfg: &EvolutionConfig,
) -> Result<StateVector> {
    if t1 < t0 {
        return invalid("scheduled propagation runs forward in time only");
    }
    let Some(schedule) = spec.schedule() else {
        let h = spec.assemble(basis, None)?;
        return evolve(&h, psi, t1 - t0, cfg);
    };
    let mut cuts: Vec<f64> = vec![t0];
    cuts.extend(
        schedule
            .breakpoints
            .iter()
            .copied()
            .filter(|&b| b > t0 && b < t1),
    );
    cuts.push(t1);
    let mut state = psi.clone();
    for w in cuts.windows(2) {
        let h = spec.assemble(basis, Some(0.5 * (w[0] + w[1])))?;
        state = evolve(&h, &state, w[1] - w[0], cfg)?;
    }
    Ok(state)
}

/// Propagator for a fixed (H, t), reusable across many states.
pub enum Propagator {
    Dense(DMatrix<C64>),
    Krylov {
        hamiltonian: SparseOperator,
        time: f64,
        cfg: EvolutionConfig,
    },
}

impl Propagator {
    pub fn new(h: &SparseOperator, t: f64, cfg: &EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        require_hermitian(h)?;
        Ok(if cfg.use_dense(h.dim()) {
            Propagator::Dense(dense_propagator(h, t))
        } else {
            Propagator::Krylov {
                hamiltonian: h.clone(),
                time: t,
                cfg: *cfg,
            }
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        match self {
            Propagator::Dense(u) => {
                if u.nrows() != psi.dim() {
                    return invalid("state dimension does not match propagator");
                }
                Ok(StateVector::from_vec_unchecked(apply_dense(
                    u,
                    psi.amplitudes(),
                )))
            }
            Propagator::Krylov {
                hamiltonian,
                time,
                cfg,
            } => evolve(hamiltonian, psi, *time, cfg),
        }
    }
}

/// Orthonormal Lanczos basis with its tridiagonal projection.
struct LanczosBasis {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `β_m`, the coupling out of the subspace; zero on breakdown.
    residual: f64,
}

fn lanczos(h: &SparseOperator, start: &[C64], m: usize) -> LanczosBasis {
    let dim = start.len();
    let m = m.min(dim);
    let n0 = norm(start);
    let mut vectors: Vec<Vec<C64>> = vec![start.iter().map(|a| a / n0).collect()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut w = vec![ZERO; dim];
    let mut residual = 0.0;
    for j in 0..m {
        h.apply_into(&vectors[j], &mut w);
        let a = dot(&vectors[j], &w).re;
        alpha.push(a);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            for v in &vectors {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let b = norm(&w);
        let scale = a.abs() + beta.last().copied().unwrap_or(0.0);
        if b <= 1e-13 * scale.max(1e-300) || b == 0.0 {
            residual = 0.0;
            break;
        }
        if j + 1 == m {
            residual = b;
            break;
        }
        beta.push(b);
        vectors.push(w.iter().map(|x| x / b).collect());
    }
    LanczosBasis {
        vectors,
        alpha,
        beta,
        residual,
    }
}

impl LanczosBasis {
    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let k = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        SymmetricEigen::new(t)
    }
}

/// Coefficients `e^{-iτT} e_1` in the Lanczos basis.
fn small_exp(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> Vec<C64> {
    let q = &eig.eigenvectors;
    let k = q.nrows();
    (0..k)
        .map(|i| {
            (0..k).fold(ZERO, |acc, l| {
                acc + C64::from_polar(1.0, -tau * eig.eigenvalues[l]) * (q[(i, l)] * q[(0, l)])
            })
        })
        .collect()
}

fn krylov_evolve(
    h: &SparseOperator,
    psi: &[C64],
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<Vec<C64>> {
    let mut state = psi.to_vec();
    let psi_norm = norm(psi);
    if psi_norm == 0.0 {
        return Ok(state);
    }
    let direction = t.signum();
    let mut remaining = t.abs();
    let mut substeps = 0usize;
    let mut last_step = remaining.min(cfg.max_substep);
    while remaining > 0.0 {
        let basis = lanczos(h, &state, cfg.krylov_dim);
        let eig = basis.eigen();
        let beta0 = norm(&state);
        // Start from the previous accepted step, doubled, and halve until
        // the residual estimate β₀ β_m |[e^{-iτT}]_{m,1}| meets the target.
        let mut tau = (2.0 * last_step).min(remaining).min(cfg.max_substep);
        let coeffs = loop {
            let coeffs = small_exp(&eig, direction * tau);
            let err = beta0 * basis.residual * coeffs.last().map_or(0.0, |c| c.norm());
            if err <= cfg.tolerance {
                break coeffs;
            }
            tau *= 0.5;
            if tau < 1e-13 * t.abs() {
                return Err(Error::NumericalFailure(format!(
                    "Krylov substep underflow at t = {:.6e} of {t:.6e}: error estimate {err:.3e} \
                     exceeds tolerance {:.1e} with krylov_dim {}",
                    t.abs() - remaining,
                    cfg.tolerance,
                    cfg.krylov_dim
                )));
            }
        };
        state.iter_mut().for_each(|x| *x = ZERO);
        for (v, c) in basis.vectors.iter().zip(&coeffs) {
            let c = c * beta0;
            for (s, vi) in state.iter_mut().zip(v) {
                *s += c * vi;
            }
        }
        remaining = if tau >= remaining {
            0.0
        } else {
            remaining - tau
        };
        last_step = tau;
        substeps += 1;
        if substeps > 10_000_000 {
            return Err(Error::NumericalFailure(
                "Krylov propagation exceeded 1e7 substeps".into(),
            ));
        }
    }
    Ok(state)
}

/// Eigendecomposition `H = V diag(E) V†` of a small hermitian matrix, for
/// evaluating `e^{-iHt}ψ` at many times.
pub struct Spectral {
    vectors: DMatrix<C64>,
    values: DVector<f64>,
}

impl Spectral {
    pub fn new(h: &DMatrix<C64>) -> Result<Self> {
        if !h.is_square() {
            return invalid("spectral propagator needs a square matrix");
        }
        let defect = (h - h.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > crate::sparse::HERMITIAN_TOL * h.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return invalid("propagation requires a hermitian Hamiltonian");
        }
        let eig = SymmetricEigen::new(h.clone());
        Ok(Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    pub fn from_sparse(h: &SparseOperator) -> Result<Self> {
        Self::new(&h.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Coefficients `V†ψ` in the eigenbasis.
    pub fn project(&self, psi: &[C64]) -> DVector<C64> {
        self.vectors.adjoint() * DVector::from_column_slice(psi)
    }

    /// `e^{-iHt}ψ` from eigenbasis coefficients.
    pub fn at(&self, coefficients: &DVector<C64>, t: f64) -> DVector<C64> {
        let phased = DVector::from_iterator(
            self.dim(),
            coefficients
                .iter()
                .zip(self.values.iter())
                .map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
        );
        &self.vectors * phased
    }
}

/// `⟨ψ|O|ψ⟩`.
pub fn expectation(psi: &StateVector, op: &SparseOperator) -> C64 {
    psi.inner(&psi.apply(op))
}

/// `‖A|ψ⟩⟨ψ|‖₁` for a normalized ψ, given `A|ψ⟩`: the trace norm of a
/// rank-one operator `|a⟩⟨ψ|` is `‖a‖·‖ψ‖`.
pub fn pure_state_trace_distance(applied: &StateVector) -> f64 {
    applied.norm()
}
