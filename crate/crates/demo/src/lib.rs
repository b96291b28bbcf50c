//! Browser bindings: a density light cone, the light-cone error profile of
//! a local observable, and CNOT fidelity curves. Every export returns a flat
//! `Float64Array`; the plain-Rust functions behind them are usable natively.

use bosonlight::bounds::{phase_observable, Setting};
use bosonlight::evolve::Spectral;
use bosonlight::protocol::{cnot_fidelity_trace, CnotGateSpec};
use bosonlight::{estimate_gamma, FockBasis, HamiltonianSpec, LatticeGraph, Result, StateVector};
use wasm_bindgen::prelude::*;

/// Keeps the dense diagonalisations interactive in a browser tab.
pub const DEMO_DIM_LIMIT: usize = 1200;

fn chain(n_sites: usize) -> Result<LatticeGraph> {
    LatticeGraph::chain(n_sites)
}

/// `⟨n̂_i(t)⟩` for `frames` equally spaced times in `[0, t_max]`, frame
/// major, starting from `bosons` bosons on the middle site of a chain.
pub fn density_frames(
    n_sites: usize,
    bosons: u32,
    j: f64,
    u: f64,
    t_max: f64,
    frames: usize,
) -> Result<Vec<f64>> {
    let lattice = chain(n_sites)?;
    let basis = FockBasis::with_limit(&vec![bosons; n_sites], Some(bosons), DEMO_DIM_LIMIT)?;
    let h = HamiltonianSpec::bose_hubbard(&lattice, j, u, 0.0).assemble(&basis, None)?;
    let spectral = Spectral::from_sparse(&h)?;

    let mut start = vec![0u8; n_sites];
    start[n_sites / 2] = bosons as u8;
    let k = basis
        .rank(&start)
        .expect("initial occupation lies in the basis");
    let coeffs = spectral.project(StateVector::basis_state(basis.dim(), k).amplitudes());

    let step = if frames > 1 {
        t_max / (frames - 1) as f64
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(frames * n_sites);
    for f in 0..frames {
        let psi = spectral.at(&coeffs, f as f64 * step);
        let mut density = vec![0.0; n_sites];
        for (idx, a) in psi.iter().enumerate() {
            let p = a.norm_sqr();
            for (site, &n) in basis.state(idx).iter().enumerate() {
                density[site] += p * n as f64;
            }
        }
        out.extend(density);
    }
    Ok(out)
}

/// Light-cone error of `e^{iθn̂_0}` for R = 0..=diameter, two bosons
/// starting on sites 0 and 1.
pub fn lr_profile(n_sites: usize, j: f64, u: f64, theta: f64, t: f64) -> Result<Vec<f64>> {
    let lattice = chain(n_sites)?;
    let basis = FockBasis::with_limit(&vec![2; n_sites], Some(2), DEMO_DIM_LIMIT)?;
    let spec = HamiltonianSpec::bose_hubbard(&lattice, j, u, 0.0);
    let gamma = estimate_gamma(&lattice, 4)?.gamma;
    let setting = Setting::new(&lattice, &basis, &spec, gamma)?;

    let mut start = vec![0u8; n_sites];
    start[0] = 1;
    start[1.min(n_sites - 1)] += 1;
    let k = basis
        .rank(&start)
        .expect("initial occupation lies in the basis");
    let psi = StateVector::basis_state(basis.dim(), k);
    let origin = lattice.site_set([0])?;
    let observable = phase_observable(&basis, &origin, theta);
    (0..=lattice.diameter())
        .map(|r| setting.lr_error(&psi, &observable, &origin, r, t))
        .collect()
}

/// CNOT fidelities of the inputs 11, 10, 01, 00 at `samples` times in
/// `[0, t_max]`, sample major.
pub fn cnot_curves(
    nbar: u32,
    j: f64,
    u: f64,
    h: f64,
    t_max: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let spec = CnotGateSpec {
        nbar,
        j,
        u,
        h,
        duration: None,
    };
    let step = if samples > 1 {
        t_max / (samples - 1) as f64
    } else {
        0.0
    };
    let times: Vec<f64> = (0..samples).map(|s| s as f64 * step).collect();
    Ok(cnot_fidelity_trace(&spec, &times)?
        .into_iter()
        .flatten()
        .collect())
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn light_cone(
    n_sites: usize,
    bosons: u32,
    j: f64,
    u: f64,
    t_max: f64,
    frames: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(density_frames(n_sites, bosons, j, u, t_max, frames))
}

#[wasm_bindgen]
pub fn lr_errors(
    n_sites: usize,
    j: f64,
    u: f64,
    theta: f64,
    t: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(lr_profile(n_sites, j, u, theta, t))
}

#[wasm_bindgen]
pub fn cnot_fidelities(
    nbar: u32,
    j: f64,
    u: f64,
    h: f64,
    t_max: f64,
    samples: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(cnot_curves(nbar, j, u, h, t_max, samples))
}
