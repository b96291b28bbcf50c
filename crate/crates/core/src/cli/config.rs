use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, InitialKind, InitialStateSpec};
use crate::error::{invalid, Error, Result};
use crate::evolve::EvolutionConfig;
use crate::fock::{FockBasis, DEFAULT_DIM_LIMIT};
use crate::hamiltonian::{HamiltonianSpec, Hopping, PotentialTerm, Schedule};
use crate::lattice::{estimate_gamma, LatticeGraph, SiteId, SiteSet};
use crate::sparse::{StateVector, C64};

/// Environment variable overriding the basis-dimension cap.
pub const DIM_LIMIT_VAR: &str = "BOSONLIGHT_DIM_LIMIT";

/// Path length used when `gamma` is not given and has to be estimated.
const GAMMA_PATH_LENGTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Constants,
    Transport,
    Lr,
    Hhkl,
    Protocol,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constants => "constants",
            Self::Transport => "transport",
            Self::Lr => "lr",
            Self::Hhkl => "hhkl",
            Self::Protocol => "protocol",
        }
    }
}

/// One experiment run. Only the blocks the chosen experiment reads need to
/// be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    pub lattice: Option<LatticeBlock>,
    pub hamiltonian: Option<HamiltonianBlock>,
    pub basis: Option<BasisBlock>,
    pub state: Option<StateBlock>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    /// Structural constant; estimated from the lattice when absent.
    pub gamma: Option<f64>,
    pub output: Option<OutputBlock>,
    pub constants: Option<ConstantsBlock>,
    pub transport: Option<TransportBlock>,
    pub lr: Option<LrBlock>,
    pub hhkl: Option<HhklBlock>,
    pub protocol: Option<ProtocolBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    /// Side lengths of a hypercubic lattice.
    pub dims: Option<Vec<usize>>,
    pub periodic: Option<Vec<bool>>,
    /// Explicit graph instead of `dims`.
    pub n_sites: Option<usize>,
    pub dimension: Option<usize>,
    pub edges: Option<Vec<[SiteId; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianBlock {
    /// Uniform Bose-Hubbard couplings, used when no explicit terms are given.
    #[serde(default)]
    pub j: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub hoppings: Vec<HoppingEntry>,
    #[serde(default)]
    pub potentials: Vec<PotentialTerm>,
    pub schedule: Option<Vec<f64>>,
    pub coupling_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingEntry {
    pub i: SiteId,
    pub j: SiteId,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default)]
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Caps {
    Uniform(u32),
    PerSite(Vec<u32>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    pub caps: Caps,
    pub sector: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateKind {
    Mott {
        filling: u32,
    },
    CoherentTruncated {
        mean: f64,
    },
    Custom {
        amplitudes: Vec<[f64; 2]>,
    },
    /// A single occupation-number basis state.
    Product {
        occupations: Vec<u8>,
    },
    /// Complex Gaussian amplitudes on the whole basis, drawn from the seed.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateBlock {
    #[serde(flatten)]
    pub kind: StateKind,
    pub b0: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
    /// File stem; defaults to the experiment name.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    pub gamma: Option<f64>,
    pub jbar: f64,
    pub tau: f64,
    pub dimension: Option<usize>,
    pub ell: f64,
    pub t: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub boundary_size: usize,
    pub ell_t_coefficient: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportBlock {
    pub region: Vec<SiteId>,
    /// Absolute times; alternatively `tau_multiples` of the largest τ.
    pub times: Option<Vec<f64>>,
    pub tau_multiples: Option<Vec<f64>>,
    pub radii: Vec<u32>,
    pub moments: Vec<u32>,
    /// Reject inadmissible (R, t) instead of evaluating them anyway.
    #[serde(default)]
    pub strict: bool,
    /// Moment orders checked against the short-time inequality at the
    /// initial state.
    #[serde(default)]
    pub schuch_moments: Vec<u32>,
    /// Extra seeded random states for the short-time inequality.
    #[serde(default)]
    pub random_instances: usize,
    /// Thresholds x of the tail probability `P(n_X ≥ x)` at the last time.
    #[serde(default)]
    pub tail_thresholds: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrBlock {
    pub origin: Vec<SiteId>,
    pub theta: f64,
    pub radii: Vec<u32>,
    /// Evolution time; defaults to the largest admissible τ.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HhklBlock {
    pub ells: Vec<usize>,
    pub dt: f64,
    pub t_total: f64,
    pub q_bar: Option<u32>,
    #[serde(default)]
    pub interaction_picture: bool,
    pub substeps: Option<u32>,
    /// Write the block sequence for the first ℓ to `<stem>.sequence.json`.
    #[serde(default)]
    pub export_sequence: bool,
    #[serde(default)]
    pub truncation_q: Vec<u32>,
    /// Time of the truncation scan; defaults to `t_total`.
    pub truncation_t: Option<f64>,
    pub gate_count: Option<GateCountBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCountBlock {
    pub n_sites: Vec<f64>,
    pub t: Vec<f64>,
    pub q_bar: f64,
    pub epsilon: f64,
    pub dimension: u32,
    pub ell: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub j: f64,
    pub u: f64,
    /// CNOT bias; defaults to `u`.
    pub h: Option<f64>,
    #[serde(default)]
    pub transfer_n: Vec<u32>,
    #[serde(default)]
    pub nbar: Vec<u32>,
    /// Rows of the chained-CNOT demonstration (0 disables it).
    #[serde(default)]
    pub rungs: usize,
    /// Time budget of the demonstration; defaults to enough for every gate.
    pub t_budget: Option<f64>,
}

fn missing(block: &str) -> Error {
    Error::InvalidArgument(format!("missing field `{block}`"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))
    }

    /// The blocks the experiment cannot run without.
    pub fn required_blocks(experiment: Experiment) -> &'static [&'static str] {
        match experiment {
            Experiment::Constants => &["constants"],
            Experiment::Transport => &["lattice", "hamiltonian", "basis", "state", "transport"],
            Experiment::Lr => &["lattice", "hamiltonian", "basis", "state", "lr"],
            Experiment::Hhkl => &["lattice", "hamiltonian", "basis", "state", "hhkl"],
            Experiment::Protocol => &["protocol"],
        }
    }

    fn has_block(&self, name: &str) -> bool {
        match name {
            "lattice" => self.lattice.is_some(),
            "hamiltonian" => self.hamiltonian.is_some(),
            "basis" => self.basis.is_some(),
            "state" => self.state.is_some(),
            "constants" => self.constants.is_some(),
            "transport" => self.transport.is_some(),
            "lr" => self.lr.is_some(),
            "hhkl" => self.hhkl.is_some(),
            "protocol" => self.protocol.is_some(),
            _ => false,
        }
    }

    pub fn check_for(&self, experiment: Experiment) -> Result<()> {
        if let Some(declared) = self.experiment {
            if declared != experiment {
                return invalid(format!(
                    "config declares experiment `{}` but `{}` was requested",
                    declared.name(),
                    experiment.name()
                ));
            }
        }
        match Self::required_blocks(experiment)
            .iter()
            .find(|b| !self.has_block(b))
        {
            Some(block) => Err(missing(block)),
            None => Ok(()),
        }
    }

    pub fn lattice(&self) -> Result<LatticeGraph> {
        let block = self.lattice.as_ref().ok_or_else(|| missing("lattice"))?;
        match (&block.dims, &block.edges) {
            (Some(dims), None) => {
                let periodic = block
                    .periodic
                    .clone()
                    .unwrap_or_else(|| vec![false; dims.len()]);
                LatticeGraph::hypercubic(dims, &periodic)
            }
            (None, Some(edges)) => {
                let n = block.n_sites.ok_or_else(|| missing("lattice.n_sites"))?;
                let edges: Vec<_> = edges.iter().map(|e| (e[0], e[1])).collect();
                LatticeGraph::from_edges(n, block.dimension.unwrap_or(1), &edges)
            }
            (Some(_), Some(_)) => invalid("lattice: give either `dims` or `edges`, not both"),
            (None, None) => Err(missing("lattice.dims")),
        }
    }

    pub fn hamiltonian(&self, lattice: &LatticeGraph) -> Result<HamiltonianSpec> {
        let block = self
            .hamiltonian
            .as_ref()
            .ok_or_else(|| missing("hamiltonian"))?;
        let mut spec = if block.hoppings.is_empty() && block.potentials.is_empty() {
            HamiltonianSpec::bose_hubbard(lattice, block.j, block.u, block.mu)
        } else {
            let hoppings = block
                .hoppings
                .iter()
                .map(|h| Hopping {
                    i: h.i,
                    j: h.j,
                    amplitude: C64::new(h.re, h.im),
                    scales: h.scales.clone(),
                })
                .collect();
            HamiltonianSpec::new(lattice, hoppings, block.potentials.clone())?
        };
        if let Some(g) = block.coupling_bound {
            spec = spec.with_coupling_bound(g)?;
        }
        if let Some(breakpoints) = &block.schedule {
            spec = spec.with_schedule(Schedule::new(breakpoints.clone())?)?;
        }
        Ok(spec)
    }

    fn caps_and_sector(&self, n_sites: usize) -> Result<(Vec<u32>, Option<u32>)> {
        let block = self.basis.as_ref().ok_or_else(|| missing("basis"))?;
        let caps = match &block.caps {
            Caps::Uniform(c) => vec![*c; n_sites],
            Caps::PerSite(c) if c.len() == n_sites => c.clone(),
            Caps::PerSite(c) => {
                return invalid(format!(
                    "basis.caps has {} entries for {n_sites} sites",
                    c.len()
                ))
            }
        };
        Ok((caps, block.sector))
    }

    pub fn estimated_dimension(&self, n_sites: usize) -> Result<u128> {
        let (caps, sector) = self.caps_and_sector(n_sites)?;
        Ok(FockBasis::dimension_of(&caps, sector))
    }

    pub fn basis(&self, n_sites: usize, limit: usize) -> Result<FockBasis> {
        let (caps, sector) = self.caps_and_sector(n_sites)?;
        FockBasis::with_limit(&caps, sector, limit)
    }

    /// The deterministic part of the state block, if it has one.
    pub fn initial_spec(&self) -> Result<Option<InitialStateSpec>> {
        let block = self.state.as_ref().ok_or_else(|| missing("state"))?;
        let kind = match &block.kind {
            StateKind::Mott { filling } => InitialKind::Mott { filling: *filling },
            StateKind::CoherentTruncated { mean } => InitialKind::CoherentTruncated { mean: *mean },
            StateKind::Custom { amplitudes } => InitialKind::Custom {
                amplitudes: amplitudes.clone(),
            },
            StateKind::Product { .. } | StateKind::Random => return Ok(None),
        };
        let mut spec = InitialStateSpec::mott(0);
        spec.kind = kind;
        if let Some(b0) = block.b0 {
            spec.b0 = b0;
        }
        if let Some(kappa) = block.kappa {
            spec.kappa = kappa;
        }
        Ok(Some(spec))
    }

    pub fn state(&self, basis: &FockBasis, rng: &mut impl Rng) -> Result<StateVector> {
        let block = self.state.as_ref().ok_or_else(|| missing("state"))?;
        match &block.kind {
            StateKind::Product { occupations } => {
                let k = basis.rank(occupations).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "occupations {occupations:?} are not in the basis"
                    ))
                })?;
                Ok(StateVector::basis_state(basis.dim(), k))
            }
            StateKind::Random => bounds::random_state(basis, rng, |_| true),
            _ => self
                .initial_spec()?
                .expect("deterministic state")
                .build(basis),
        }
    }

    pub fn gamma(&self, lattice: &LatticeGraph) -> Result<f64> {
        match self.gamma {
            Some(g) if g > 0.0 => Ok(g),
            Some(g) => invalid(format!("gamma must be positive, got {g}")),
            None => Ok(estimate_gamma(lattice, GAMMA_PATH_LENGTH)?.gamma),
        }
    }

    pub fn region(&self, lattice: &LatticeGraph, sites: &[SiteId]) -> Result<SiteSet> {
        lattice.site_set(sites.iter().copied())
    }
}

/// The basis-dimension cap, honouring the environment override.
pub fn dimension_limit() -> Result<usize> {
    match std::env::var(DIM_LIMIT_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{DIM_LIMIT_VAR}={v} is not a dimension"))),
        Err(_) => Ok(DEFAULT_DIM_LIMIT),
    }
}
