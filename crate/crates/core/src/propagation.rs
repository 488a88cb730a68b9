//! Synthesis of the propagated state from a mode spectrum and an envelope
//! solution: three-component decomposition, reference-oscillator evolution,
//! Ermakov rescale-and-chirp, and per-component rotations.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decomposition::ModeSpectrum;
use crate::envelope::EnvelopeSolution;
use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::lgbasis::{radial, BasisConvention, ModeIndex};

/// Output grid request.
#[derive(Debug, Clone, Default)]
pub struct GridSpec {
    pub n_rho: usize,
    pub n_phi: usize,
    /// Radial extent; default 6 b(z).
    pub rho_max: Option<f64>,
    /// Explicit grids override everything else.
    pub explicit: Option<(Vec<f64>, Vec<f64>)>,
}

impl GridSpec {
    pub fn standard() -> Self {
        Self { n_rho: 256, n_phi: 256, rho_max: None, explicit: None }
    }

    pub fn with_grids(rho: Vec<f64>, phi: Vec<f64>) -> Self {
        Self { n_rho: rho.len(), n_phi: phi.len(), rho_max: None, explicit: Some((rho, phi)) }
    }
}

/// Envelope data frozen at the synthesis plane.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeSnapshot {
    pub b: f64,
    pub b_prime: f64,
    pub phase_advance: f64,
    pub larmor: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Observables {
    /// Spectral norm sum |c|^2 (exactly conserved).
    pub norm: f64,
    /// Grid-quadrature norm of the synthesized total.
    pub grid_norm: f64,
    /// Spectral <L_z>.
    pub mean_lz: f64,
    /// Grid-quadrature <rho^2>.
    pub mean_rho2: f64,
    /// Spectrum-averaged generalized Gouy phase (2n+|l|+1) omega0 tau.
    pub gouy_phase: f64,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub total: StateGrid,
    pub plus: StateGrid,
    pub minus: StateGrid,
    pub zero: StateGrid,
    pub observables: Observables,
    pub envelope_snapshot: EnvelopeSnapshot,
}

/// Partition a spectrum by the sign of l.
pub fn component_split(spec: &ModeSpectrum) -> (ModeSpectrum, ModeSpectrum, ModeSpectrum) {
    let part = |pred: &dyn Fn(i32) -> bool| {
        let entries: BTreeMap<ModeIndex, Complex64> = spec
            .entries
            .iter()
            .filter(|(idx, _)| pred(idx.l))
            .map(|(i, c)| (*i, *c))
            .collect();
        let captured = entries.values().map(|c| c.norm_sqr()).sum();
        ModeSpectrum {
            entries,
            truncation: spec.truncation,
            captured_norm: captured,
            source_norm: captured,
            omega0: spec.omega0,
            warnings: Vec::new(),
        }
    };
    (part(&|l| l > 0), part(&|l| l < 0), part(&|l| l == 0))
}

/// Reference-oscillator evolution of one component at phase advance tau:
/// every coefficient picks up exp[-i omega0 (2n+1) tau] (the |l| share of the
/// eigenvalue lives in the rotation angles).
pub fn reference_evolve(part: &ModeSpectrum, tau: f64, conv: &BasisConvention) -> ModeSpectrum {
    let mut out = part.clone();
    for (idx, c) in out.entries.iter_mut() {
        *c *= Complex64::from_polar(1.0, -conv.omega0 * (2.0 * idx.n as f64 + 1.0) * tau);
    }
    out
}

fn angular_twiddles(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64))
        .collect()
}

/// Evaluate one rotated, Ermakov-mapped component on the grid.
///
/// values(rho, phi) = (1/b) exp(i (b'/b) rho^2/2)
///                    sum_l e^{i l theta} [sum_n c e^{-i(2n+1) w0 tau} R_{n,l}(rho/b)] e^{i l phi}
fn eval_component(
    entries: &BTreeMap<ModeIndex, Complex64>,
    conv: &BasisConvention,
    b: f64,
    b_prime: f64,
    tau: f64,
    theta: f64,
    rho: &[f64],
    phi: &[f64],
) -> Vec<Complex64> {
    let mut by_l: BTreeMap<i32, Vec<(u32, Complex64)>> = BTreeMap::new();
    for (idx, c) in entries {
        if c.norm_sqr() > 0.0 {
            by_l.entry(idx.l).or_default().push((idx.n, *c));
        }
    }
    let ls: Vec<i32> = by_l.keys().copied().collect();
    let m = phi.len();
    let tw = angular_twiddles(m);
    let chirp_rate = 0.5 * b_prime / b;
    let (ls_ref, tw_ref, by_l_ref) = (&ls, &tw, &by_l);

    rho.par_iter()
        .flat_map_iter(|&r| {
            let u = r / b;
            // per-l ring amplitudes, rotation applied as an index-space phase
            let rings: Vec<Complex64> = ls_ref
                .iter()
                .map(|&l| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(n, c) in &by_l_ref[&l] {
                        let phase = -conv.omega0 * (2.0 * n as f64 + 1.0) * tau;
                        acc += c
                            * Complex64::from_polar(1.0, phase)
                            * radial(ModeIndex::new(n, l), conv, u);
                    }
                    acc * Complex64::from_polar(1.0, l as f64 * theta)
                })
                .collect();
            let envelope = Complex64::from_polar(1.0, chirp_rate * r * r) / b;
            (0..m).map(move |k| {
                let mut v = Complex64::new(0.0, 0.0);
                for (j, &l) in ls_ref.iter().enumerate() {
                    let idx = (l as i64 * k as i64).rem_euclid(m as i64) as usize;
                    v += rings[j] * tw_ref[idx];
                }
                v * envelope
            })
        })
        .collect()
}

/// Evaluate one component with explicit envelope data, residual phase
/// advance and rotation angle — the building block of [`synthesize`], exposed
/// for revival/structure diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn component_grid(
    part: &ModeSpectrum,
    conv: &BasisConvention,
    b: f64,
    b_prime: f64,
    tau: f64,
    theta: f64,
    rho: Vec<f64>,
    phi: Vec<f64>,
) -> Result<StateGrid> {
    let values = eval_component(&part.entries, conv, b, b_prime, tau, theta, &rho, &phi);
    StateGrid::new(rho, phi, values, 0.0)
}

/// Synthesize the full propagated state at plane z.
pub fn synthesize(
    spec: &ModeSpectrum,
    conv: &BasisConvention,
    env: &EnvelopeSolution,
    z: f64,
    grid: &GridSpec,
) -> Result<PropagationResult> {
    if spec.entries.is_empty() {
        return Err(Error::Convention("empty spectrum".into()));
    }
    if (spec.omega0 - 1.0).abs() > 1e-12 || (conv.omega0 - 1.0).abs() > 1e-12 {
        return Err(Error::Convention(format!(
            "propagation requires the omega0 = 1 convention (envelope equation is b'' + \
             Omega^2 b = 1/b^3); got spectrum omega0 = {}, basis omega0 = {}",
            spec.omega0, conv.omega0
        )));
    }
    let b = env.b_at(z)?;
    let b_prime = env.b_prime_at(z)?;
    let tau = env.phase_advance_at(z)?;
    let larmor = env.larmor_at(z)?;
    let phi_plus = env.phi_plus_at(z)?;
    let phi_minus = env.phi_minus_at(z)?;

    let (rho, phi) = match &grid.explicit {
        Some((r, p)) => (r.clone(), p.clone()),
        None => {
            let n_rho = if grid.n_rho == 0 { 256 } else { grid.n_rho };
            let n_phi = if grid.n_phi == 0 { 256 } else { grid.n_phi };
            let rmax = grid.rho_max.unwrap_or(6.0 * b);
            let rho = (0..n_rho)
                .map(|i| (i as f64 + 0.5) * rmax / n_rho as f64)
                .collect();
            (rho, StateGrid::uniform_phi(n_phi))
        }
    };
    let l_max = spec.max_abs_l() as usize;
    if phi.len() < 4 * l_max {
        return Err(Error::Nyquist { n_phi: phi.len(), required: 4 * l_max });
    }

    let (sp, sm, s0) = component_split(spec);
    // the l = 0 rotation is a structural no-op (L_z annihilates that content)
    let parts: Vec<Vec<Complex64>> = [(&sp, phi_plus), (&sm, phi_minus), (&s0, larmor)]
        .iter()
        .map(|(s, theta)| eval_component(&s.entries, conv, b, b_prime, tau, *theta, &rho, &phi))
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); rho.len() * phi.len()];
    for part in &parts {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    let mut it = parts.into_iter();
    let plus = StateGrid::new(rho.clone(), phi.clone(), it.next().unwrap(), z)?;
    let minus = StateGrid::new(rho.clone(), phi.clone(), it.next().unwrap(), z)?;
    let zero = StateGrid::new(rho.clone(), phi.clone(), it.next().unwrap(), z)?;
    let total = StateGrid::new(rho, phi, total, z)?;

    let observables = Observables {
        norm: spec.captured_norm,
        grid_norm: total.norm_sqr(),
        mean_lz: spec.mean_lz(),
        mean_rho2: total.mean_rho2(),
        gouy_phase: spec.mean_kappa_index() * conv.omega0 * tau,
    };
    Ok(PropagationResult {
        total,
        plus,
        minus,
        zero,
        observables,
        envelope_snapshot: EnvelopeSnapshot {
            b,
            b_prime,
            phase_advance: tau,
            larmor,
            phi_plus,
            phi_minus,
        },
    })
}

/// Observables of a bare grid, using the spectrum for <L_z> when attached.
pub fn observables(grid: &StateGrid, spectrum: Option<&ModeSpectrum>) -> Result<Observables> {
    grid.resolved(1e-5)?;
    let norm = grid.norm_sqr();
    let mean_lz = match spectrum {
        Some(s) => s.mean_lz(),
        None => grid.mean_lz(),
    };
    Ok(Observables {
        norm,
        grid_norm: norm,
        mean_lz,
        mean_rho2: grid.mean_rho2(),
        gouy_phase: 0.0,
    })
}
