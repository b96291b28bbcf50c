use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, GateCountBlock};
use crate::bounds::{self, compute_constants, BoundPoint, ConstantsInputs, Setting};
use crate::error::{invalid, Error, Result};
use crate::evolve::evolve;
use crate::fock::FockBasis;
use crate::hamiltonian::HamiltonianSpec;
use crate::hhkl::{self, GateCountInputs, HhklConfig};
use crate::lattice::LatticeGraph;
use crate::protocol::{self, CnotGateSpec, TransferGateSpec};
use crate::sparse::StateVector;

/// Tolerances of the gate-protocol rows.
const FLIP_INFIDELITY: f64 = 0.01;
const FROZEN_INFIDELITY: f64 = 1e-3;
const TIME_OFFSET: f64 = 0.05;
const DEMO_FLIP_INFIDELITY: f64 = 0.1;
const HHKL_MIN_R_SQUARED: f64 = 0.9;

/// One CSV line before the config hash is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub params: Vec<(String, f64)>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub satisfied: bool,
}

impl Row {
    fn bound(experiment: &str, point: &BoundPoint) -> Self {
        Self {
            experiment: experiment.into(),
            params: point.params.clone(),
            lhs: Some(point.lhs),
            rhs: Some(point.rhs),
            satisfied: point.satisfied,
        }
    }

    fn check(experiment: &str, params: Vec<(&str, f64)>, lhs: f64, rhs: f64) -> Self {
        Self::bound(experiment, &BoundPoint::new(params, lhs, rhs))
    }

    fn value(experiment: &str, name: &str, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            params: vec![(name.into(), value)],
            lhs: Some(value),
            rhs: None,
            satisfied: true,
        }
    }
}

/// Rows, provenance details and any extra files an experiment produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub details: Value,
    pub files: Vec<(String, String)>,
}

/// Everything a runner needs besides the config itself.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub dim_limit: usize,
}

struct System {
    lattice: LatticeGraph,
    spec: HamiltonianSpec,
    basis: FockBasis,
    psi: StateVector,
    gamma: f64,
}

impl Context<'_> {
    fn system(&self) -> Result<System> {
        let lattice = self.config.lattice()?;
        let spec = self.config.hamiltonian(&lattice)?;
        let basis = self.config.basis(lattice.n_sites(), self.dim_limit)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let psi = self.config.state(&basis, &mut rng)?;
        let gamma = self.config.gamma(&lattice)?;
        Ok(System {
            lattice,
            spec,
            basis,
            psi,
            gamma,
        })
    }
}

impl System {
    fn setting(&self, ctx: &Context) -> Result<Setting<'_>> {
        let mut setting = Setting::new(&self.lattice, &self.basis, &self.spec, self.gamma)?;
        setting.evolution = ctx.config.evolution;
        Ok(setting)
    }

    fn summary(&self) -> Value {
        json!({
            "n_sites": self.lattice.n_sites(),
            "dimension": self.lattice.dimension(),
            "basis_dim": self.basis.dim(),
            "gamma": self.gamma,
            "jbar": self.spec.max_hopping(),
            "tau_max": bounds::tau_max(self.gamma, self.spec.max_hopping()),
        })
    }
}

pub fn constants(ctx: &Context) -> Result<Outcome> {
    let block = ctx
        .config
        .constants
        .as_ref()
        .ok_or_else(|| invalid_block("constants"))?;
    let lattice = ctx
        .config
        .lattice
        .as_ref()
        .map(|_| ctx.config.lattice())
        .transpose()?;
    let gamma = match (block.gamma, ctx.config.gamma, &lattice) {
        (Some(g), _, _) | (None, Some(g), _) => g,
        (None, None, Some(l)) => ctx.config.gamma(l)?,
        (None, None, None) => return Err(invalid_block("constants.gamma")),
    };
    let dimension = match (block.dimension, &lattice) {
        (Some(d), _) => d,
        (None, Some(l)) => l.dimension(),
        (None, None) => return Err(invalid_block("constants.dimension")),
    };
    let table = compute_constants(ConstantsInputs {
        gamma,
        jbar: block.jbar,
        tau: block.tau,
        dimension,
        ell: block.ell,
        t: block.t,
        r: block.r,
        boundary_size: block.boundary_size,
        ell_t_coefficient: block.ell_t_coefficient.unwrap_or(1.0),
    })?;
    let rows = table
        .named_values()
        .into_iter()
        .map(|(name, value)| Row::value("constants", name, value))
        .collect();
    Ok(Outcome {
        rows,
        details: json!({ "table": table }),
        files: Vec::new(),
    })
}

pub fn transport(ctx: &Context) -> Result<Outcome> {
    let block = ctx
        .config
        .transport
        .as_ref()
        .ok_or_else(|| invalid_block("transport"))?;
    let system = ctx.system()?;
    let setting = system.setting(ctx)?;
    let region = ctx.config.region(&system.lattice, &block.region)?;
    let tau = setting.tau_max();
    let times: Vec<f64> = match (&block.times, &block.tau_multiples) {
        (Some(_), Some(_)) => return invalid("transport: give either `times` or `tau_multiples`"),
        (Some(t), None) => t.clone(),
        (None, m) => {
            if !tau.is_finite() {
                return invalid("transport: `tau_multiples` needs a nonzero hopping");
            }
            m.clone()
                .unwrap_or_else(|| vec![1.0, 2.0, 3.0])
                .iter()
                .map(|m| m * tau)
                .collect()
        }
    };

    let grid: Vec<(f64, u32, u32)> = times
        .iter()
        .flat_map(|&t| {
            block
                .moments
                .iter()
                .flat_map(move |&s| block.radii.iter().map(move |&r| (t, s, r)))
        })
        .collect();
    let points: Vec<_> = grid
        .par_iter()
        .map(|&(t, s, r)| {
            if block.strict {
                setting.transport_check(&system.psi, &region, r, t, s)?;
            }
            setting.transport_evaluate(&system.psi, &region, r, t, s)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for p in &points {
        let mut row = Row::bound("transport", &p.point);
        row.params
            .push(("admissible".into(), if p.admissible { 1.0 } else { 0.0 }));
        rows.push(row);
    }

    let mut states = vec![system.psi.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(1));
    for _ in 0..block.random_instances {
        states.push(bounds::random_state(&system.basis, &mut rng, |_| true)?);
    }
    if !block.schuch_moments.is_empty() {
        let checks: Vec<(usize, u32)> = (0..states.len())
            .flat_map(|i| block.schuch_moments.iter().map(move |&s| (i, s)))
            .collect();
        let reports: Vec<_> = checks
            .par_iter()
            .map(|&(i, s)| setting.schuch_check(&states[i], &region, tau, s))
            .collect::<Result<_>>()?;
        for ((i, _), report) in checks.iter().zip(&reports) {
            for p in &report.points {
                let mut row = Row::bound("schuch", p);
                row.params.insert(0, ("instance".into(), *i as f64));
                rows.push(row);
            }
        }
    }

    if let (false, Some(&t)) = (block.tail_thresholds.is_empty(), times.last()) {
        let h = system.spec.assemble(&system.basis, None)?;
        let evolved = evolve(&h, &system.psi, t, &setting.evolution)?;
        let mut previous = 1.0;
        for &x in &block.tail_thresholds {
            let tail = bounds::number_tail(&system.basis, &evolved, &region, x);
            rows.push(Row::check(
                "number_tail",
                vec![("t", t), ("x", x as f64)],
                tail,
                previous,
            ));
            previous = tail;
        }
    }

    let admissible = points.iter().filter(|p| p.admissible).count();
    let min_admissible_r = points
        .iter()
        .map(|p| p.min_admissible_r)
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        rows,
        details: json!({
            "system": system.summary(),
            "tau": tau,
            "admissible_points": admissible,
            "evaluated_points": points.len(),
            "min_admissible_r": min_admissible_r,
        }),
        files: Vec::new(),
    })
}

pub fn lr(ctx: &Context) -> Result<Outcome> {
    let block = ctx.config.lr.as_ref().ok_or_else(|| invalid_block("lr"))?;
    let system = ctx.system()?;
    let setting = system.setting(ctx)?;
    let origin = ctx.config.region(&system.lattice, &block.origin)?;
    let t = match block.t {
        Some(t) => t,
        None if setting.tau_max().is_finite() => setting.tau_max(),
        None => return invalid("lr: `t` is required without hopping"),
    };
    let observable = bounds::phase_observable(&system.basis, &origin, block.theta);
    let errors: Vec<f64> = block
        .radii
        .par_iter()
        .map(|&r| setting.lr_error(&system.psi, &observable, &origin, r, t))
        .collect::<Result<_>>()?;
    let rows = block
        .radii
        .iter()
        .zip(&errors)
        .map(|(&r, &e)| Row::check("lr", vec![("R", r as f64), ("t", t)], e, 2.0))
        .collect();
    let non_increasing = errors
        .windows(2)
        .all(|w| w[1] <= w[0] + bounds::BOUND_SLACK);
    Ok(Outcome {
        rows,
        details: json!({
            "system": system.summary(),
            "t": t,
            "non_increasing": non_increasing,
            "errors": errors,
        }),
        files: Vec::new(),
    })
}

pub fn hhkl(ctx: &Context) -> Result<Outcome> {
    let block = ctx
        .config
        .hhkl
        .as_ref()
        .ok_or_else(|| invalid_block("hhkl"))?;
    let system = ctx.system()?;
    let first = *block
        .ells
        .first()
        .ok_or_else(|| invalid_block("hhkl.ells"))?;
    let mut cfg = HhklConfig::new(first, block.dt, block.t_total);
    cfg.q_bar = block.q_bar;
    cfg.interaction_picture = block.interaction_picture;
    if let Some(n) = block.substeps {
        cfg.substeps = n;
    }
    cfg.evolution = ctx.config.evolution;

    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut details = json!({ "system": system.summary() });

    if block.ells.len() >= 3 {
        let report = hhkl::hhkl_error_scan(
            &system.psi,
            &system.spec,
            &system.basis,
            &system.lattice,
            &block.ells,
            &cfg,
        )?;
        rows.extend(report.points.iter().map(|p| Row::bound("hhkl", p)));
        if let Some(fit) = report.fit {
            rows.push(Row::check(
                "hhkl_fit",
                vec![("slope", fit.slope)],
                fit.slope,
                0.0,
            ));
            rows.push(Row::check(
                "hhkl_fit",
                vec![("r_squared", fit.r_squared)],
                1.0 - fit.r_squared,
                1.0 - HHKL_MIN_R_SQUARED,
            ));
        }
        details["fit"] = json!(report.fit);
    } else {
        let exact = hhkl::exact_reference(&system.psi, &system.spec, &system.basis, &cfg)?;
        for &ell in &block.ells {
            let run = HhklConfig { ell, ..cfg };
            let approx = hhkl::simulate_hhkl(
                &system.psi,
                &system.spec,
                &system.basis,
                &system.lattice,
                &run,
            )?;
            rows.push(Row::check(
                "hhkl",
                vec![("ell", ell as f64)],
                approx.distance(&exact),
                2.0,
            ));
        }
    }

    if block.export_sequence {
        let sequence = hhkl::hhkl_sequence(&system.lattice, &cfg)?;
        details["sequence_steps"] = json!(sequence.steps.len());
        files.push(("sequence.json".into(), sequence.to_json()));
    }

    if !block.truncation_q.is_empty() {
        let initial = ctx.config.initial_spec()?.ok_or_else(|| {
            Error::InvalidArgument("truncation scan needs a mott, coherent or custom state".into())
        })?;
        let total = system
            .basis
            .sector()
            .ok_or_else(|| invalid_block("basis.sector"))?;
        let t = block.truncation_t.unwrap_or(block.t_total);
        let report = hhkl::truncation_scan(
            &system.lattice,
            &system.spec,
            &initial,
            total,
            &block.truncation_q,
            t,
            &ctx.config.evolution,
        )?;
        rows.extend(report.points.iter().map(|p| Row::bound("truncation", p)));
    }

    if let Some(gc) = &block.gate_count {
        rows.extend(gate_count_rows(gc)?);
    }

    Ok(Outcome {
        rows,
        details,
        files,
    })
}

fn gate_count_rows(gc: &GateCountBlock) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for &n in &gc.n_sites {
        for &t in &gc.t {
            let mut inputs = GateCountInputs::new(n, t, gc.q_bar, gc.epsilon, gc.dimension);
            inputs.ell = gc.ell;
            inputs.dt = gc.dt;
            let e = hhkl::gate_count(inputs)?;
            rows.push(Row::check(
                "gate_count",
                vec![("n_sites", n), ("t", t)],
                e.total,
                e.per_block * e.blocks * e.slices,
            ));
        }
    }
    Ok(rows)
}

fn degeneracy_tolerance(u: f64, n: u32) -> f64 {
    1e-12 * (u.abs() * ((n + 1) * (n + 1)) as f64).max(1.0)
}

pub fn protocol(ctx: &Context) -> Result<Outcome> {
    let block = ctx
        .config
        .protocol
        .as_ref()
        .ok_or_else(|| invalid_block("protocol"))?;
    let h = block.h.unwrap_or(block.u);
    let mut rows = Vec::new();

    let transfers: Vec<_> = block
        .transfer_n
        .par_iter()
        .map(|&n| {
            protocol::transfer_gate(&TransferGateSpec {
                n,
                j: block.j,
                u: block.u,
                duration: None,
            })
        })
        .collect::<Result<_>>()?;
    for (&n, r) in block.transfer_n.iter().zip(&transfers) {
        let nf = n as f64;
        let fidelity = r.fidelity("transfer").unwrap_or(0.0);
        rows.push(Row::check(
            "transfer",
            vec![("N", nf)],
            1.0 - fidelity,
            FLIP_INFIDELITY,
        ));
        rows.push(Row::check(
            "transfer_time",
            vec![("N", nf), ("t_opt", r.optimal_time)],
            (r.optimal_time / r.reference_time - 1.0).abs(),
            TIME_OFFSET,
        ));
        rows.push(Row::check(
            "transfer_degeneracy",
            vec![("N", nf)],
            r.degeneracy_defect,
            degeneracy_tolerance(block.u, n),
        ));
    }

    let cnot_spec = |nbar| CnotGateSpec {
        nbar,
        j: block.j,
        u: block.u,
        h,
        duration: None,
    };
    let cnots: Vec<_> = block
        .nbar
        .par_iter()
        .map(|&n| protocol::cnot_gate(&cnot_spec(n)))
        .collect::<Result<_>>()?;
    for (&n, r) in block.nbar.iter().zip(&cnots) {
        let nf = n as f64;
        rows.push(Row::check(
            "cnot_flip",
            vec![("nbar", nf), ("t_opt", r.optimal_time)],
            1.0 - r.flip_fidelity(),
            FLIP_INFIDELITY,
        ));
        rows.push(Row::check(
            "cnot_frozen",
            vec![("nbar", nf)],
            1.0 - r.frozen_fidelity(),
            FROZEN_INFIDELITY,
        ));
        rows.push(Row::check(
            "cnot_degeneracy",
            vec![("nbar", nf)],
            r.degeneracy_defect,
            degeneracy_tolerance(block.u, n),
        ));
    }
    if block.nbar.len() >= 3 {
        let report = protocol::gate_time_scaling(&block.nbar, block.j, block.u, h)?;
        rows.extend(
            report
                .points
                .iter()
                .map(|p| Row::bound("gate_time_scaling", p)),
        );
    }

    let mut demos = Vec::new();
    if block.rungs > 0 {
        let spec = cnot_spec(block.nbar.first().copied().unwrap_or(1));
        let budget = match block.t_budget {
            Some(t) => t,
            None => protocol::cnot_gate(&spec)?.optimal_time * block.rungs as f64,
        };
        for flip in [true, false] {
            let record = protocol::acceleration_demo(block.rungs, &spec, budget, flip)?;
            for row in &record.rows {
                let expect_one = flip && row.row <= record.gates_applied + 1;
                let (fidelity, tolerance) = if expect_one {
                    (row.fidelity_one, DEMO_FLIP_INFIDELITY)
                } else {
                    (row.fidelity_zero, FLIP_INFIDELITY)
                };
                rows.push(Row::check(
                    "acceleration",
                    vec![
                        ("flip", if flip { 1.0 } else { 0.0 }),
                        ("row", row.row as f64),
                    ],
                    1.0 - fidelity,
                    tolerance,
                ));
            }
            demos.push(record);
        }
    }

    Ok(Outcome {
        rows,
        details: json!({
            "transfer": transfers,
            "cnot": cnots,
            "acceleration": demos,
        }),
        files: Vec::new(),
    })
}

fn invalid_block(name: &str) -> Error {
    Error::InvalidArgument(format!("missing field `{name}`"))
}
