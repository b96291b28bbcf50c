//! Block decomposition of the time evolution into forward/backward local
//! evolutions, its interaction-picture variant, error measurement, and the
//! gate-complexity arithmetic of the resulting circuit.

use serde::{Deserialize, Serialize};

use crate::bounds::{linear_fit, BoundPoint, BoundReport, InitialStateSpec};
use crate::error::{invalid, Error, Result};
use crate::evolve::{evolve, EvolutionConfig, Propagator};
use crate::fock::{embed, projector_truncation, FockBasis};
use crate::hamiltonian::{effective, HamiltonianSpec};
use crate::lattice::{LatticeGraph, SiteId, SiteSet};
use crate::sparse::{SparseOperator, StateVector, C64};

/// Largest basis for which [`hhkl_error_scan`] computes an exact reference.
pub const EXACT_REFERENCE_LIMIT: usize = 1 << 20;

/// Errors below this are indistinguishable from round-off.
pub const EXACTNESS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HhklConfig {
    /// Block extent along the slicing axis.
    pub ell: usize,
    pub dt: f64,
    pub t_total: f64,
    /// When set, every block generator is projected onto `n_i ≤ q̄`.
    #[serde(default)]
    pub q_bar: Option<u32>,
    /// Use rotated hoppings `e^{iṼx} H̃₀ e^{−iṼx}` inside the blocks.
    #[serde(default)]
    pub interaction_picture: bool,
    /// Piecewise-constant substeps per slice for time-dependent generators.
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default)]
    pub evolution: EvolutionConfig,
}

fn default_substeps() -> u32 {
    4
}

impl HhklConfig {
    pub fn new(ell: usize, dt: f64, t_total: f64) -> Self {
        Self {
            ell,
            dt,
            t_total,
            q_bar: None,
            interaction_picture: false,
            substeps: default_substeps(),
            evolution: EvolutionConfig::default(),
        }
    }

    /// Number of slices `m₀ = t/Δt`.
    pub fn slices(&self) -> Result<usize> {
        if self.ell == 0 {
            return invalid("block size ℓ must be >= 1");
        }
        if !(self.dt > 0.0) || !(self.t_total >= 0.0) || !self.t_total.is_finite() {
            return invalid("need Δt > 0 and a finite t >= 0");
        }
        if self.substeps == 0 {
            return invalid("substeps must be >= 1");
        }
        let m = self.t_total / self.dt;
        let rounded = m.round();
        if (m - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return invalid(format!("t/Δt = {m} is not an integer"));
        }
        Ok(rounded as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HhklStep {
    pub slice: usize,
    pub block_sites: Vec<SiteId>,
    pub t_start: f64,
    pub t_end: f64,
    pub direction: Direction,
}

/// Steps in application order: within each slice, odd pair-blocks forward,
/// interior blocks backward, then even pair-blocks forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HhklSequence {
    pub n_sites: usize,
    pub n_blocks: usize,
    pub steps: Vec<HhklStep>,
}

impl HhklSequence {
    pub fn slice(&self, j: usize) -> impl Iterator<Item = &HhklStep> {
        self.steps.iter().filter(move |s| s.slice == j)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.steps).expect("steps serialize to JSON")
    }
}

/// Contiguous slabs of `ell` layers along the first lattice axis.
pub fn blocks(lattice: &LatticeGraph, ell: usize) -> Result<Vec<SiteSet>> {
    let extent = lattice.dims()[0];
    if ell == 0 || ell > extent {
        return invalid(format!("block size {ell} outside 1..={extent}"));
    }
    let n_blocks = extent.div_ceil(ell);
    let mut members = vec![Vec::new(); n_blocks];
    for site in 0..lattice.n_sites() {
        members[lattice.coords(site)[0] / ell].push(site);
    }
    members
        .into_iter()
        .map(|m| SiteSet::new(lattice.n_sites(), m))
        .collect()
}

/// `(sites, direction)` for one slice, in application order.
fn slice_pattern(blocks: &[SiteSet]) -> Vec<(SiteSet, Direction)> {
    let n = blocks.len();
    if n == 1 {
        return vec![(blocks[0].clone(), Direction::Forward)];
    }
    let pair = |s: usize| blocks[s].union(&blocks[s + 1]);
    let mut out = Vec::new();
    // 1-based s odd ↔ 0-based index even.
    for s in (0..n - 1).step_by(2) {
        out.push((pair(s), Direction::Forward));
    }
    for block in &blocks[1..n - 1] {
        out.push((block.clone(), Direction::Backward));
    }
    for s in (1..n - 1).step_by(2) {
        out.push((pair(s), Direction::Forward));
    }
    out
}

pub fn hhkl_sequence(lattice: &LatticeGraph, cfg: &HhklConfig) -> Result<HhklSequence> {
    let m0 = cfg.slices()?;
    let blocks = blocks(lattice, cfg.ell)?;
    let pattern = slice_pattern(&blocks);
    let mut steps = Vec::with_capacity(m0 * pattern.len());
    for j in 0..m0 {
        let (t_start, t_end) = (j as f64 * cfg.dt, (j + 1) as f64 * cfg.dt);
        for (set, direction) in &pattern {
            steps.push(HhklStep {
                slice: j,
                block_sites: set.as_slice().to_vec(),
                t_start,
                t_end,
                direction: *direction,
            });
        }
    }
    Ok(HhklSequence {
        n_sites: lattice.n_sites(),
        n_blocks: blocks.len(),
        steps,
    })
}

/// `Ṽ` and `H̃₀` separated, so that `e^{−iH̃t} = e^{−iṼt} · T-exp(−i∫H̃₀(x)dx)`.
#[derive(Debug, Clone)]
pub struct InteractionSplit {
    pub potential: Vec<f64>,
    pub hopping: SparseOperator,
}

impl InteractionSplit {
    /// `e^{iṼx} H̃₀ e^{−iṼx}`.
    pub fn rotated(&self, x: f64) -> Result<SparseOperator> {
        rotate(&self.hopping, &self.potential, x)
    }

    /// `e^{−iṼt}` applied to `psi`.
    pub fn phase(&self, psi: &StateVector, t: f64) -> StateVector {
        apply_phase(&self.potential, psi, t)
    }

    /// Full propagation through the interaction picture, with `substeps`
    /// midpoint-sampled pieces.
    pub fn propagate(
        &self,
        psi: &StateVector,
        t: f64,
        substeps: u32,
        cfg: &EvolutionConfig,
    ) -> Result<StateVector> {
        if substeps == 0 {
            return invalid("substeps must be >= 1");
        }
        let h = t / substeps as f64;
        let mut state = psi.clone();
        for k in 0..substeps {
            let generator = self.rotated((k as f64 + 0.5) * h)?;
            state = evolve(&generator, &state, h, cfg)?;
        }
        Ok(self.phase(&state, t))
    }
}

fn rotate(hopping: &SparseOperator, potential: &[f64], x: f64) -> Result<SparseOperator> {
    let triplets = hopping
        .triplets()
        .map(|(r, c, v)| {
            (
                r,
                c,
                v * C64::from_polar(1.0, (potential[r] - potential[c]) * x),
            )
        })
        .collect();
    Ok(SparseOperator::from_triplets(hopping.dim(), triplets)?.with_checked_hermiticity())
}

fn apply_phase(potential: &[f64], psi: &StateVector, t: f64) -> StateVector {
    let amps = psi
        .amplitudes()
        .iter()
        .zip(potential)
        .map(|(a, v)| a * C64::from_polar(1.0, -v * t))
        .collect();
    StateVector::from_vec_unchecked(amps)
}

/// Splits the truncated Hamiltonian into its diagonal potential and the
/// hopping part. When `q_bar` is set both are projected onto `n_i ≤ q̄`.
pub fn interaction_split(
    spec: &HamiltonianSpec,
    basis: &FockBasis,
    q_bar: Option<u32>,
) -> Result<InteractionSplit> {
    if spec.schedule().is_some() {
        return Err(Error::Unsupported(
            "interaction picture needs a time-independent potential".into(),
        ));
    }
    let mut hopping = spec.hopping_operator(basis, None)?;
    let mut potential = spec.potential_diagonal(basis, None)?;
    if let Some(q) = q_bar {
        let p = projector_truncation(
            basis,
            &SiteSet::new(basis.n_sites(), 0..basis.n_sites())?,
            q,
        )?;
        hopping = effective(&hopping, &p)?;
        for (v, keep) in potential.iter_mut().zip(p.diagonal()) {
            *v *= keep.re;
        }
    }
    Ok(InteractionSplit { potential, hopping })
}

/// One block step, ready to apply.
enum StepAction {
    Fixed(Propagator),
    /// Midpoint-sampled generators for each substep (already time-ordered).
    Sampled(Vec<(SparseOperator, f64)>),
}

struct Simulator<'a> {
    spec: &'a HamiltonianSpec,
    basis: &'a FockBasis,
    cfg: &'a HhklConfig,
    projector: Option<SparseOperator>,
    potential: Option<Vec<f64>>,
}

impl Simulator<'_> {
    fn block_generator(&self, set: &SiteSet, time: Option<f64>) -> Result<SparseOperator> {
        let local = self.spec.subset(set)?;
        let h = if self.potential.is_some() {
            local.spec().hopping_operator(self.basis, time)?
        } else {
            local.assemble(self.basis, time)?
        };
        match &self.projector {
            Some(p) => effective(&h, p),
            None => Ok(h),
        }
    }

    fn time_dependent(&self) -> bool {
        self.potential.is_some() || self.spec.schedule().is_some()
    }

    fn action(
        &self,
        set: &SiteSet,
        t_start: f64,
        t_end: f64,
        direction: Direction,
    ) -> Result<StepAction> {
        let dt = t_end - t_start;
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        };
        if !self.time_dependent() {
            let h = self.block_generator(set, None)?;
            return Ok(StepAction::Fixed(Propagator::new(
                &h,
                sign * dt,
                &self.cfg.evolution,
            )?));
        }
        let n = self.cfg.substeps;
        let h = dt / n as f64;
        let mut pieces = Vec::with_capacity(n as usize);
        for k in 0..n {
            let mid = t_start + (k as f64 + 0.5) * h;
            let time = self.spec.schedule().map(|_| mid);
            let mut g = self.block_generator(set, time)?;
            if let Some(v) = &self.potential {
                g = rotate(&g, v, mid)?;
            }
            pieces.push((g, sign * h));
        }
        // The inverse of a time-ordered product runs the pieces in reverse.
        if direction == Direction::Backward {
            pieces.reverse();
        }
        Ok(StepAction::Sampled(pieces))
    }

    fn apply(&self, action: &StepAction, psi: StateVector) -> Result<StateVector> {
        match action {
            StepAction::Fixed(p) => p.apply(&psi),
            StepAction::Sampled(pieces) => pieces
                .iter()
                .try_fold(psi, |s, (g, h)| evolve(g, &s, *h, &self.cfg.evolution)),
        }
    }
}

/// Applies the block decomposition to `psi0`.
pub fn simulate_hhkl(
    psi0: &StateVector,
    spec: &HamiltonianSpec,
    basis: &FockBasis,
    lattice: &LatticeGraph,
    cfg: &HhklConfig,
) -> Result<StateVector> {
    if psi0.dim() != basis.dim() || lattice.n_sites() != basis.n_sites() {
        return invalid("state, basis and lattice do not match");
    }
    let sequence = hhkl_sequence(lattice, cfg)?;
    let projector = match cfg.q_bar {
        Some(q) => Some(projector_truncation(basis, &lattice.all_sites(), q)?),
        None => None,
    };
    let potential = if cfg.interaction_picture {
        Some(interaction_split(spec, basis, cfg.q_bar)?.potential)
    } else {
        None
    };
    let sim = Simulator {
        spec,
        basis,
        cfg,
        projector,
        potential,
    };

    let mut state = psi0.clone();
    if sim.time_dependent() {
        for step in &sequence.steps {
            let set = SiteSet::new(basis.n_sites(), step.block_sites.iter().copied())?;
            let action = sim.action(&set, step.t_start, step.t_end, step.direction)?;
            state = sim.apply(&action, state)?;
        }
    } else {
        // Every slice repeats the same block propagators.
        let first: Vec<StepAction> = sequence
            .slice(0)
            .map(|step| {
                let set = SiteSet::new(basis.n_sites(), step.block_sites.iter().copied())?;
                sim.action(&set, step.t_start, step.t_end, step.direction)
            })
            .collect::<Result<_>>()?;
        let per_slice = first.len().max(1);
        for (k, _) in sequence.steps.iter().enumerate() {
            state = sim.apply(&first[k % per_slice], state)?;
        }
    }
    if let Some(v) = &sim.potential {
        state = apply_phase(v, &state, cfg.t_total);
    }
    Ok(state)
}

/// `e^{−iHt}ψ₀` for the full (optionally projected) Hamiltonian.
pub fn exact_reference(
    psi0: &StateVector,
    spec: &HamiltonianSpec,
    basis: &FockBasis,
    cfg: &HhklConfig,
) -> Result<StateVector> {
    if basis.dim() > EXACT_REFERENCE_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "exact reference needs dimension {} > {EXACT_REFERENCE_LIMIT}",
            basis.dim()
        )));
    }
    if spec.schedule().is_some() {
        return crate::evolve::evolve_scheduled(
            spec,
            basis,
            psi0,
            0.0,
            cfg.t_total,
            &cfg.evolution,
        );
    }
    let mut h = spec.assemble(basis, None)?;
    if let Some(q) = cfg.q_bar {
        h = effective(
            &h,
            &projector_truncation(
                basis,
                &SiteSet::new(basis.n_sites(), 0..basis.n_sites())?,
                q,
            )?,
        )?;
    }
    evolve(&h, psi0, cfg.t_total, &cfg.evolution)
}

/// `‖ψ_hhkl − ψ_exact‖` for each block size, with a fit of the log-error
/// against ℓ (skipped when every error is at round-off level).
pub fn hhkl_error_scan(
    psi0: &StateVector,
    spec: &HamiltonianSpec,
    basis: &FockBasis,
    lattice: &LatticeGraph,
    ell_values: &[usize],
    cfg: &HhklConfig,
) -> Result<BoundReport> {
    if ell_values.len() < 3 {
        return invalid("error scan needs at least three block sizes");
    }
    let exact = exact_reference(psi0, spec, basis, cfg)?;
    let mut report = BoundReport::new("hhkl");
    for &ell in ell_values {
        let run = HhklConfig { ell, ..*cfg };
        let approx = simulate_hhkl(psi0, spec, basis, lattice, &run)?;
        // Two unit vectors are never further apart than 2.
        report.points.push(BoundPoint::new(
            vec![("ell", ell as f64)],
            approx.distance(&exact),
            2.0,
        ));
    }
    if report.points.iter().any(|p| p.lhs >= EXACTNESS_FLOOR) {
        let xs: Vec<f64> = report
            .points
            .iter()
            .map(|p| p.param("ell").unwrap_or(0.0))
            .collect();
        let ys: Vec<f64> = report
            .points
            .iter()
            .map(|p| p.lhs.max(f64::EPSILON).ln())
            .collect();
        report.fit = linear_fit(&xs, &ys);
    }
    Ok(report)
}

/// `‖ψ_exact(t) − ψ_q̄(t)‖` where the reference basis holds every boson on
/// any site and the truncated bases cap sites at each `q̄`.
pub fn truncation_scan(
    lattice: &LatticeGraph,
    spec: &HamiltonianSpec,
    initial: &InitialStateSpec,
    total: u32,
    q_values: &[u32],
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<BoundReport> {
    let n = lattice.n_sites();
    let full = FockBasis::uniform(n, total, Some(total))?;
    let psi = initial.build(&full)?;
    let reference = evolve(&spec.assemble(&full, None)?, &psi, t, cfg)?;
    let mut report = BoundReport::new("truncation");
    for &q in q_values {
        let basis = FockBasis::uniform(n, q.min(total), Some(total))?;
        let start = initial.build(&basis)?;
        let evolved = evolve(&spec.assemble(&basis, None)?, &start, t, cfg)?;
        let lifted = StateVector::from_vec_unchecked(embed(&basis, &full, evolved.amplitudes())?);
        report.points.push(BoundPoint::new(
            vec![("q_bar", q as f64), ("t", t)],
            lifted.distance(&reference),
            2.0,
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCountInputs {
    pub n_sites: f64,
    pub t: f64,
    pub q_bar: f64,
    pub epsilon: f64,
    pub dimension: u32,
    /// Overrides `ℓ = log(|Λ|t/ε)`.
    #[serde(default)]
    pub ell: Option<f64>,
    /// Overrides `Δt = 1/q̄`.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl GateCountInputs {
    pub fn new(n_sites: f64, t: f64, q_bar: f64, epsilon: f64, dimension: u32) -> Self {
        Self {
            n_sites,
            t,
            q_bar,
            epsilon,
            dimension,
            ell: None,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCountEstimate {
    pub inputs: GateCountInputs,
    pub ell: f64,
    pub dt: f64,
    /// `|B| = ℓ^D`.
    pub block_volume: f64,
    /// `|B|⁴ log²(|B|/ε) log₂(q̄+1)`.
    pub per_block: f64,
    /// `|Λ|/|B|`.
    pub blocks: f64,
    /// `t/Δt`.
    pub slices: f64,
    pub total: f64,
    /// Three block layers per slice.
    pub depth: f64,
}

/// Gate complexity of the block-decomposed circuit. Counts are real-valued
/// so the scaling in every input stays exact.
pub fn gate_count(inputs: GateCountInputs) -> Result<GateCountEstimate> {
    let GateCountInputs {
        n_sites,
        t,
        q_bar,
        epsilon,
        dimension,
        ..
    } = inputs;
    if !(n_sites > 0.0 && t > 0.0 && q_bar > 0.0 && epsilon > 0.0) || dimension == 0 {
        return invalid("gate count inputs must all be positive");
    }
    let ell = inputs.ell.unwrap_or_else(|| (n_sites * t / epsilon).ln());
    let dt = inputs.dt.unwrap_or(1.0 / q_bar);
    if !(ell > 0.0 && dt > 0.0) {
        return invalid("block size and time step must be positive");
    }
    let block_volume = ell.powi(dimension as i32);
    let per_block =
        block_volume.powi(4) * (block_volume / epsilon).ln().powi(2) * (q_bar + 1.0).log2();
    let blocks = n_sites / block_volume;
    let slices = t / dt;
    Ok(GateCountEstimate {
        inputs,
        ell,
        dt,
        block_volume,
        per_block,
        blocks,
        slices,
        total: per_block * blocks * slices,
        depth: 3.0 * per_block * slices,
    })
}
