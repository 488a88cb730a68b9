//! Expansion of initial states over the LG eigenbasis: general overlap
//! quadrature plus the fully analytic coefficients for the half-blocked
//! twisted state, including the envelope initial-condition map.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lgbasis::{basis_eval, radial, BasisConvention, ModeIndex};
use crate::quad::{angular_rule, gauss_laguerre_ln, ln_gamma};

/// Truncation window of a mode expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub n_max: u32,
    pub l_min: i32,
    pub l_max: i32,
}

impl Truncation {
    pub fn new(n_max: u32, l_min: i32, l_max: i32) -> Self {
        assert!(l_min <= l_max);
        Self { n_max, l_min, l_max }
    }

    /// Default window centered on the source OAM: n <= 12, l in l_a +- 25.
    pub fn around(l_a: i32) -> Self {
        Self { n_max: 12, l_min: l_a - 25, l_max: l_a + 25 }
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        (0..=self.n_max)
            .flat_map(move |n| (self.l_min..=self.l_max).map(move |l| ModeIndex::new(n, l)))
    }
}

type Sampler = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Analytic descriptor or custom sampler for psi(rho, phi, 0).
#[derive(Clone)]
pub enum StateKind {
    /// Pure LG mode psi_{n,l}.
    Pure { n: u32, l: i32 },
    /// Pure mode multiplied by the angular aperture phi in (0, pi).
    HalfBlocked { n: u32, l: i32 },
    /// Arbitrary sampler; `angular_breaks` lists azimuths where the sampler is
    /// discontinuous (quadrature then integrates panel-by-panel) and
    /// `origin_power` its small-rho power rho^p (steers the radial rule).
    Custom { sampler: Sampler, angular_breaks: Vec<f64>, origin_power: u32 },
}

impl std::fmt::Debug for StateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Pure { n, l } => write!(f, "Pure({n},{l})"),
            Self::HalfBlocked { n, l } => write!(f, "HalfBlocked({n},{l})"),
            Self::Custom { angular_breaks, origin_power, .. } => f
                .debug_struct("Custom")
                .field("angular_breaks", angular_breaks)
                .field("origin_power", origin_power)
                .finish_non_exhaustive(),
        }
    }
}

/// Initial state together with its envelope initial data.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub kind: StateKind,
    pub b0: f64,
    pub b0_prime: f64,
}

impl InitialState {
    pub fn pure(n: u32, l: i32) -> Self {
        Self { kind: StateKind::Pure { n, l }, b0: 1.0, b0_prime: 0.0 }
    }

    pub fn half_blocked(n: u32, l: i32) -> Self {
        Self { kind: StateKind::HalfBlocked { n, l }, b0: 1.0, b0_prime: 0.0 }
    }

    pub fn with_envelope(mut self, b0: f64, b0_prime: f64) -> Self {
        self.b0 = b0;
        self.b0_prime = b0_prime;
        self
    }

    /// Physical initial amplitude psi(rho, phi, 0).
    pub fn sample(&self, conv: &BasisConvention, rho: f64, phi: f64) -> Complex64 {
        match &self.kind {
            StateKind::Pure { n, l } => basis_eval(ModeIndex::new(*n, *l), conv, rho, phi),
            StateKind::HalfBlocked { n, l } => {
                let phi = phi.rem_euclid(2.0 * PI);
                if phi > 0.0 && phi < PI {
                    basis_eval(ModeIndex::new(*n, *l), conv, rho, phi)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            StateKind::Custom { sampler, .. } => sampler(rho, phi),
        }
    }

    /// Azimuths where the state is discontinuous.
    pub fn angular_breaks(&self) -> Vec<f64> {
        match &self.kind {
            StateKind::HalfBlocked { .. } => vec![0.0, PI],
            StateKind::Custom { angular_breaks, .. } => angular_breaks.clone(),
            _ => Vec::new(),
        }
    }

    /// Leading power p of rho^p at the origin.
    pub fn origin_power(&self) -> u32 {
        match &self.kind {
            StateKind::Pure { l, .. } | StateKind::HalfBlocked { l, .. } => l.unsigned_abs(),
            StateKind::Custom { origin_power, .. } => *origin_power,
        }
    }

    /// Norm of the physical state where it is known in closed form.
    pub fn known_source_norm(&self) -> Option<f64> {
        match &self.kind {
            StateKind::Pure { .. } => Some(1.0),
            StateKind::HalfBlocked { .. } => Some(0.5),
            StateKind::Custom { .. } => None,
        }
    }

    fn is_identity_map(&self) -> bool {
        self.b0 == 1.0 && self.b0_prime == 0.0
    }
}

/// Initial-condition map onto the reference-oscillator frame:
/// psi_ho(rho, phi, 0) = b0 psi(b0 rho, phi, 0) exp(-i b0 b0' rho^2 / 2).
pub fn map_initial<'a>(
    state: &'a InitialState,
    conv: &'a BasisConvention,
) -> impl Fn(f64, f64) -> Complex64 + Send + Sync + 'a {
    let b0 = state.b0;
    let chirp = -0.5 * state.b0 * state.b0_prime;
    move |rho, phi| {
        state.sample(conv, b0 * rho, phi) * b0 * Complex64::from_polar(1.0, chirp * rho * rho)
    }
}

/// Generalized binomial coefficient prod_{j=1..k} (x - j + 1)/j.
pub fn generalized_binomial(x: f64, k: u32) -> f64 {
    let mut p = 1.0;
    for j in 1..=k {
        p *= (x - j as f64 + 1.0) / j as f64;
    }
    p
}

/// (ln |C(x,k)|, sign); None when the coefficient is exactly zero.
fn ln_binomial(x: f64, k: u32) -> Option<(f64, f64)> {
    let mut ln = 0.0;
    let mut sign = 1.0;
    for j in 1..=k {
        let f = x - j as f64 + 1.0;
        if f == 0.0 {
            return None;
        }
        ln += f.abs().ln() - (j as f64).ln();
        sign *= f.signum();
    }
    Some((ln, sign))
}

/// Closed-form expansion coefficient of the half-blocked twisted state
/// (radial sum in log space with sign tracking, so large indices survive).
pub fn arc_coefficients(n_a: u32, l_a: i32, n: u32, l: i32) -> Complex64 {
    let al = l.unsigned_abs() as f64;
    let ala = l_a.unsigned_abs() as f64;
    // angular factor selects the OAM coupling of the half-plane aperture
    let angular = if l == l_a {
        Complex64::new(PI, 0.0)
    } else if (l - l_a) % 2 == 0 {
        return Complex64::new(0.0, 0.0);
    } else {
        Complex64::new(0.0, 2.0 / (l_a - l) as f64)
    };

    let nf = n as f64;
    let naf = n_a as f64;
    let ln_pref = -(2.0 * PI).ln()
        + 0.5
            * (ln_gamma(nf + 1.0) + ln_gamma(naf + 1.0)
                - ln_gamma(nf + al + 1.0)
                - ln_gamma(naf + ala + 1.0))
        + ln_gamma(0.5 * (al + ala) + 1.0);

    let half_diff = 0.5 * (al - ala);
    let half_sum = 0.5 * (al + ala);
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(n as usize + 1);
    let mut ln_max = f64::NEG_INFINITY;
    for k in 0..=n {
        let kf = k as f64;
        let b1 = ln_binomial(naf + ala, k);
        let b2 = ln_binomial(kf + half_diff, n_a);
        let b3 = ln_binomial(half_sum + nf - kf - 1.0, n - k);
        if let (Some((l1, s1)), Some((l2, s2)), Some((l3, s3))) = (b1, b2, b3) {
            let ln = l1 + l2 + l3;
            let sign = s1 * s2 * s3 * if (n_a + k) % 2 == 0 { 1.0 } else { -1.0 };
            ln_max = ln_max.max(ln);
            terms.push((ln, sign));
        }
    }
    if terms.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = 0.0;
    for (ln, sign) in terms {
        acc += sign * (ln - ln_max).exp();
    }
    angular * ((ln_pref + ln_max).exp() * acc)
}

/// Quadrature orders for the overlap integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    pub radial_order: usize,
    /// Uniform angular samples for smooth states.
    pub angular_order: usize,
    /// Gauss-Legendre order per smooth panel when breaks are declared.
    pub panel_order: usize,
    /// Warn when captured/source drops below this.
    pub captured_floor: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { radial_order: 200, angular_order: 512, panel_order: 160, captured_floor: 0.99 }
    }
}

impl QuadSpec {
    fn doubled(&self) -> Self {
        Self {
            radial_order: 2 * self.radial_order,
            angular_order: 2 * self.angular_order,
            panel_order: 2 * self.panel_order,
            ..*self
        }
    }
}

/// Radial Gauss-Laguerre rule in t = omega0 rho^2 / 2, with the half-integer
/// weight when |l| + p is odd. Returns (rho nodes, plain dt-weights / omega0):
/// the t^alpha e^{-t} factor is folded back in, so the weights integrate the
/// raw assembled integrand (whose own Gaussian decay keeps everything finite).
fn radial_rule(order: usize, alpha_half: bool, omega0: f64) -> (Vec<f64>, Vec<f64>) {
    let alpha = if alpha_half { 0.5 } else { 0.0 };
    let (t, ln_w) = gauss_laguerre_ln(order, alpha);
    let rho = t.iter().map(|&ti| (2.0 * ti / omega0).sqrt()).collect();
    let w = t
        .iter()
        .zip(&ln_w)
        .map(|(&ti, &lw)| (lw + ti - alpha * ti.ln()).exp() / omega0)
        .collect();
    (rho, w)
}

/// Overlap coefficient c_{n,l} = <psi_{n,l}, psi_ho(.,.,0)> by tensor
/// quadrature, with an error estimate from order doubling.
pub fn overlap_quadrature(
    state: &InitialState,
    idx: ModeIndex,
    conv: &BasisConvention,
    spec: &QuadSpec,
) -> Result<(Complex64, f64)> {
    let trunc = Truncation::new(idx.n, idx.l, idx.l);
    let coarse = overlap_table(state, conv, &trunc, spec)?;
    let fine = overlap_table(state, conv, &trunc, &spec.doubled())?;
    let a = coarse[&idx];
    let b = fine[&idx];
    let delta = (a - b).norm();
    let scale = b.norm().max(1.0);
    if delta > 1e-6 * scale {
        return Err(Error::QuadratureNonConvergence { delta, tol: 1e-6 * scale });
    }
    Ok((b, delta))
}

/// Whole coefficient table for a truncation window (one angular transform per
/// l, shared radial nodes per weight class).
pub fn overlap_table(
    state: &InitialState,
    conv: &BasisConvention,
    trunc: &Truncation,
    spec: &QuadSpec,
) -> Result<BTreeMap<ModeIndex, Complex64>> {
    let mapped = map_initial(state, conv);
    let (phis, wphi) =
        angular_rule(&state.angular_breaks(), spec.angular_order, spec.panel_order);
    let p = state.origin_power();

    let mut out = BTreeMap::new();
    for class in 0..2usize {
        // class 0: |l| + p even -> alpha = 0; class 1: odd -> alpha = 1/2
        let ls: Vec<i32> = (trunc.l_min..=trunc.l_max)
            .filter(|l| ((l.unsigned_abs() + p) % 2) as usize == class)
            .collect();
        if ls.is_empty() {
            continue;
        }
        let (rho, wr) = radial_rule(spec.radial_order, class == 1, conv.omega0);
        // sampled state on the tensor grid
        let samples: Vec<Vec<Complex64>> = rho
            .par_iter()
            .map(|&r| phis.iter().map(|&f| mapped(r, f)).collect())
            .collect();
        let results: Vec<(i32, Vec<Complex64>)> = ls
            .par_iter()
            .map(|&l| {
                // angular transform A_l(rho_i)
                let a_l: Vec<Complex64> = samples
                    .iter()
                    .map(|row| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (v, (&f, &w)) in row.iter().zip(phis.iter().zip(&wphi)) {
                            acc += v * w * Complex64::from_polar(1.0, -(l as f64) * f);
                        }
                        acc
                    })
                    .collect();
                let col: Vec<Complex64> = (0..=trunc.n_max)
                    .map(|n| {
                        let idx = ModeIndex::new(n, l);
                        let mut c = Complex64::new(0.0, 0.0);
                        for ((&r, &w), a) in rho.iter().zip(&wr).zip(&a_l) {
                            c += a * (w * radial(idx, conv, r));
                        }
                        c
                    })
                    .collect();
                (l, col)
            })
            .collect();
        for (l, col) in results {
            for (n, c) in col.into_iter().enumerate() {
                out.insert(ModeIndex::new(n as u32, l), c);
            }
        }
    }
    Ok(out)
}

/// Norm of the mapped state by the same tensor quadrature.
pub fn norm_quadrature(state: &InitialState, conv: &BasisConvention, spec: &QuadSpec) -> f64 {
    let mapped = map_initial(state, conv);
    let (phis, wphi) =
        angular_rule(&state.angular_breaks(), spec.angular_order, spec.panel_order);
    // |psi|^2 carries rho^{2p}: always the integer weight class
    let (rho, wr) = radial_rule(spec.radial_order, false, conv.omega0);
    rho.par_iter()
        .zip(&wr)
        .map(|(&r, &w)| {
            let mut ring = 0.0;
            for (&f, &wf) in phis.iter().zip(&wphi) {
                ring += mapped(r, f).norm_sqr() * wf;
            }
            // strip one e^{-t}: |psi|^2 ~ e^{-2t}, plain weights already raw dt
            ring * w
        })
        .sum()
}

/// Complex coefficients of one expansion, with truncation metadata.
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    pub entries: BTreeMap<ModeIndex, Complex64>,
    pub truncation: Truncation,
    pub captured_norm: f64,
    pub source_norm: f64,
    pub omega0: f64,
    pub warnings: Vec<String>,
}

impl ModeSpectrum {
    pub fn coefficient(&self, idx: ModeIndex) -> Complex64 {
        self.entries.get(&idx).copied().unwrap_or_default()
    }

    /// 1 - captured/source.
    pub fn truncation_deficit(&self) -> f64 {
        if self.source_norm == 0.0 {
            0.0
        } else {
            (1.0 - self.captured_norm / self.source_norm).max(0.0)
        }
    }

    pub fn max_abs_l(&self) -> u32 {
        self.entries
            .iter()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, _)| i.l.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Spectral <L_z>.
    pub fn mean_lz(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (idx, c) in &self.entries {
            let w = c.norm_sqr();
            num += idx.l as f64 * w;
            den += w;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Spectrum-averaged oscillator quantum 2n + |l| + 1.
    pub fn mean_kappa_index(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (idx, c) in &self.entries {
            let w = c.norm_sqr();
            num += (2 * idx.n as i64 + idx.l.unsigned_abs() as i64 + 1) as f64 * w;
            den += w;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// CSV export `n,l,re,im` in deterministic (n, l) order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,l,re,im\n");
        for (idx, c) in &self.entries {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", idx.n, idx.l, c.re, c.im));
        }
        out
    }

    /// Metadata sidecar (truncation, norms, convention).
    pub fn metadata_json(&self) -> String {
        serde_json::json!({
            "n_max": self.truncation.n_max,
            "l_min": self.truncation.l_min,
            "l_max": self.truncation.l_max,
            "captured_norm": self.captured_norm,
            "source_norm": self.source_norm,
            "omega0": self.omega0,
            "warnings": self.warnings,
        })
        .to_string()
    }

    /// Parse the CSV produced by [`Self::to_csv`].
    pub fn from_csv(text: &str, omega0: f64) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut n_max = 0u32;
        let mut l_min = i32::MAX;
        let mut l_max = i32::MIN;
        for (k, line) in text.lines().enumerate() {
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Config(format!("spectrum csv line {k}: need 4 columns")));
            }
            let n: u32 = cols[0].trim().parse().map_err(|e| {
                Error::Config(format!("spectrum csv line {k}: bad n ({e})"))
            })?;
            let l: i32 = cols[1].trim().parse().map_err(|e| {
                Error::Config(format!("spectrum csv line {k}: bad l ({e})"))
            })?;
            let re: f64 = cols[2].trim().parse().map_err(|e| {
                Error::Config(format!("spectrum csv line {k}: bad re ({e})"))
            })?;
            let im: f64 = cols[3].trim().parse().map_err(|e| {
                Error::Config(format!("spectrum csv line {k}: bad im ({e})"))
            })?;
            entries.insert(ModeIndex::new(n, l), Complex64::new(re, im));
            n_max = n_max.max(n);
            l_min = l_min.min(l);
            l_max = l_max.max(l);
        }
        if entries.is_empty() {
            return Err(Error::Config("spectrum csv has no entries".into()));
        }
        let captured: f64 = entries.values().map(|c| c.norm_sqr()).sum();
        Ok(Self {
            entries,
            truncation: Truncation::new(n_max, l_min, l_max),
            captured_norm: captured,
            source_norm: captured,
            omega0,
            warnings: Vec::new(),
        })
    }
}

/// Expand `state` over the basis: closed form where available, quadrature
/// otherwise.
pub fn decompose(
    state: &InitialState,
    conv: &BasisConvention,
    trunc: &Truncation,
    spec: &QuadSpec,
) -> Result<ModeSpectrum> {
    let mut warnings = Vec::new();
    let (entries, source_norm) = match (&state.kind, state.is_identity_map()) {
        (StateKind::Pure { n, l }, true) => {
            let mut m = BTreeMap::new();
            m.insert(ModeIndex::new(*n, *l), Complex64::new(1.0, 0.0));
            (m, 1.0)
        }
        (StateKind::HalfBlocked { n, l }, true) => {
            let (n_a, l_a) = (*n, *l);
            let cols: Vec<(ModeIndex, Complex64)> = trunc
                .modes()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&idx| (idx, arc_coefficients(n_a, l_a, idx.n, idx.l)))
                .collect();
            (cols.into_iter().collect(), 0.5)
        }
        _ => {
            let table = overlap_table(state, conv, trunc, spec)?;
            let source = state
                .known_source_norm()
                .unwrap_or_else(|| norm_quadrature(state, conv, spec));
            (table, source)
        }
    };
    let captured: f64 = entries.values().map(|c| c.norm_sqr()).sum();
    if source_norm > 0.0 && captured / source_norm < spec.captured_floor {
        warnings.push(format!(
            "captured norm {:.6} below floor {:.3} of source {:.6}; widen the truncation window",
            captured, spec.captured_floor, source_norm
        ));
    }
    Ok(ModeSpectrum {
        entries,
        truncation: *trunc,
        captured_norm: captured,
        source_norm,
        omega0: conv.omega0,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(generalized_binomial(5.0, 2), 10.0);
        assert!((generalized_binomial(0.5, 2) - (-0.125)).abs() < 1e-16);
        assert_eq!(generalized_binomial(3.0, 5), 0.0);
        assert_eq!(generalized_binomial(7.3, 0), 1.0);
    }

    #[test]
    fn binomial_pascal_identity() {
        // C(x,k) = C(x-1,k-1) + C(x-1,k) across integer and half-integer x
        for &x in &[0.5, 1.5, -2.5, 4.0, 9.5, 12.0] {
            for k in 1..10u32 {
                let lhs = generalized_binomial(x, k);
                let rhs = generalized_binomial(x - 1.0, k - 1) + generalized_binomial(x - 1.0, k);
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                    "pascal fails at x={x}, k={k}"
                );
            }
        }
    }

    #[test]
    fn arc_anchor_values() {
        let c = arc_coefficients(0, 1, 0, 1);
        assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(arc_coefficients(0, 1, 0, 3), Complex64::new(0.0, 0.0));
        // frozen from independent fine-grid quadrature of Eq-level integrals
        let c = arc_coefficients(0, 1, 2, -2);
        assert!((c - Complex64::new(0.0, 0.015_268_828_496_968_8)).norm() < 1e-12, "{c}");
        let c = arc_coefficients(0, -3, 1, 4);
        assert!((c - Complex64::new(0.0, -0.009_855_986_414_191_3)).norm() < 1e-12, "{c}");
        let c = arc_coefficients(1, 4, 3, 7);
        assert!((c - Complex64::new(0.0, -0.031_933_512_868_383_8)).norm() < 1e-12, "{c}");
        // the unblocked index always keeps exactly half the amplitude
        for &(na, la) in &[(0u32, -3i32), (1, 4), (3, 0)] {
            let c = arc_coefficients(na, la, na, la);
            assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn arc_selection_rule_exact_zeros() {
        for n_a in 0..2u32 {
            for &l_a in &[1i32, -3, 4] {
                for n in 0..6u32 {
                    for l in -9..=9i32 {
                        if l != l_a && (l - l_a) % 2 == 0 {
                            let c = arc_coefficients(n_a, l_a, n, l);
                            assert_eq!(c, Complex64::new(0.0, 0.0), "({n_a},{l_a},{n},{l})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn arc_large_indices_stay_finite() {
        for n in [30u32, 60] {
            for &l in &[45i32, -60] {
                let c = arc_coefficients(0, 1, n, l);
                assert!(c.re.is_finite() && c.im.is_finite());
                assert!(c.norm() < 1.0);
            }
        }
    }

    #[test]
    fn map_initial_identity_and_chirp() {
        let conv = BasisConvention::default();
        let s = InitialState::pure(0, 1);
        let m = map_initial(&s, &conv);
        for &(r, f) in &[(0.5, 0.4), (2.0, 3.0)] {
            assert!((m(r, f) - s.sample(&conv, r, f)).norm() < 1e-16);
        }
        // b0=2 on a Gaussian: 2 e^{-2 rho^2} / sqrt(pi), norm preserved
        let g = InitialState {
            kind: StateKind::Custom {
                sampler: Arc::new(|r, _| {
                    Complex64::new((-0.5 * r * r).exp() / std::f64::consts::PI.sqrt(), 0.0)
                }),
                angular_breaks: vec![],
                origin_power: 0,
            },
            b0: 2.0,
            b0_prime: 0.0,
        };
        let m = map_initial(&g, &conv);
        let expect = |r: f64| 2.0 * (-2.0 * r * r).exp() / std::f64::consts::PI.sqrt();
        for &r in &[0.0, 0.3, 1.1] {
            assert!((m(r, 0.0).re - expect(r)).abs() < 1e-14);
        }
        let norm = norm_quadrature(&g, &conv, &QuadSpec::default());
        assert!((norm - 1.0).abs() < 1e-10, "mapped norm {norm}");
        // pure quadratic chirp leaves |psi| untouched
        let c = InitialState::pure(0, 1).with_envelope(1.0, 1.0);
        let m = map_initial(&c, &conv);
        for &(r, f) in &[(0.7, 0.2), (1.9, 4.4)] {
            assert!((m(r, f).norm() - c.sample(&conv, r, f).norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn overlap_orthonormality() {
        let conv = BasisConvention::default();
        let state = InitialState::pure(3, -2);
        let spec = QuadSpec { radial_order: 60, angular_order: 64, ..Default::default() };
        let (c, err) = overlap_quadrature(&state, ModeIndex::new(3, -2), &conv, &spec).unwrap();
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12, "c = {c}, err {err}");
        for idx in [ModeIndex::new(2, -2), ModeIndex::new(3, 2), ModeIndex::new(0, 0)] {
            let (c, _) = overlap_quadrature(&state, idx, &conv, &spec).unwrap();
            assert!(c.norm() < 1e-12, "{idx:?} -> {c}");
        }
    }

    #[test]
    fn overlap_vs_arc_closed_form() {
        let conv = BasisConvention::default();
        let state = InitialState::half_blocked(0, 1);
        let spec = QuadSpec { radial_order: 100, angular_order: 256, panel_order: 96, ..Default::default() };
        for idx in [
            ModeIndex::new(0, 1),
            ModeIndex::new(0, 2),
            ModeIndex::new(2, -2),
            ModeIndex::new(5, 2),
            ModeIndex::new(1, 0),
        ] {
            let (q, _) = overlap_quadrature(&state, idx, &conv, &spec).unwrap();
            let a = arc_coefficients(0, 1, idx.n, idx.l);
            assert!((q - a).norm() < 1e-10, "{idx:?}: quad {q} vs arc {a}");
        }
    }

    #[test]
    fn arc_invariant_under_basis_rescaling() {
        // the aperture is purely angular, so the coefficients cannot depend on omega0
        let state = InitialState::half_blocked(0, -3);
        let spec = QuadSpec { radial_order: 120, angular_order: 256, panel_order: 96, ..Default::default() };
        for idx in [ModeIndex::new(0, -3), ModeIndex::new(2, -4), ModeIndex::new(4, 0)] {
            let (c1, _) =
                overlap_quadrature(&state, idx, &BasisConvention::new(1.0), &spec).unwrap();
            let (c2, _) =
                overlap_quadrature(&state, idx, &BasisConvention::new(2.0), &spec).unwrap();
            assert!((c1 - c2).norm() < 1e-10, "{idx:?}: {c1} vs {c2}");
            let a = arc_coefficients(0, -3, idx.n, idx.l);
            assert!((c1 - a).norm() < 1e-10, "{idx:?}: {c1} vs arc {a}");
        }
    }

    #[test]
    fn decompose_pure_is_delta() {
        let conv = BasisConvention::default();
        let spec = decompose(
            &InitialState::pure(2, 5),
            &conv,
            &Truncation::around(5),
            &QuadSpec::default(),
        )
        .unwrap();
        assert_eq!(spec.entries.len(), 1);
        assert!((spec.captured_norm - 1.0).abs() < 1e-15);
        assert!((spec.coefficient(ModeIndex::new(2, 5)) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(spec.warnings.is_empty());
    }

    #[test]
    fn decompose_half_blocked_parseval() {
        let conv = BasisConvention::default();
        let spec = decompose(
            &InitialState::half_blocked(0, 1),
            &conv,
            &Truncation::new(12, -25, 25),
            &QuadSpec::default(),
        )
        .unwrap();
        assert!((spec.source_norm - 0.5).abs() < 1e-15);
        // Bessel inequality and the known captured value for this window
        assert!(spec.captured_norm <= 0.5 + 1e-12);
        assert!((spec.captured_norm - 0.488_794).abs() < 5e-5, "{}", spec.captured_norm);
        // aggregate |c|^2 peaks at l = l_a
        let mut per_l = BTreeMap::new();
        for (idx, c) in &spec.entries {
            *per_l.entry(idx.l).or_insert(0.0) += c.norm_sqr();
        }
        let (l_peak, _) =
            per_l.iter().max_by(|a, b| a.1.total_cmp(b.1)).map(|(l, v)| (*l, *v)).unwrap();
        assert_eq!(l_peak, 1);
    }

    #[test]
    fn decompose_mapped_pure_spreads_in_n_only() {
        // pure(0,1) with b0 = 2 is no longer an eigenmode: same l, many n
        let conv = BasisConvention::default();
        let state = InitialState::pure(0, 1).with_envelope(2.0, 0.0);
        let spec = decompose(
            &state,
            &conv,
            &Truncation::new(18, 1, 1),
            &QuadSpec { radial_order: 150, ..Default::default() },
        )
        .unwrap();
        assert!((spec.source_norm - 1.0).abs() < 1e-12);
        assert!(spec.captured_norm > 0.999, "captured {}", spec.captured_norm);
        let c0 = spec.coefficient(ModeIndex::new(0, 1)).norm();
        let c1 = spec.coefficient(ModeIndex::new(1, 1)).norm();
        assert!(c0 > 0.5 && c1 > 0.1, "c0={c0} c1={c1}");
    }

    #[test]
    fn hermiticity_of_decomposition() {
        // conjugation sends c_{n,l} -> conj(c_{n,-l}); conjugation combined
        // with the reflection phi -> -phi sends c_{n,l} -> conj(c_{n,l})
        let conv = BasisConvention::default();
        let base: Sampler = Arc::new(|r: f64, f: f64| {
            Complex64::from_polar((-0.5 * r * r).exp() * (1.0 + 0.3 * r), 0.0)
                * (Complex64::from_polar(0.6, f) + Complex64::from_polar(0.3, -2.0 * f + 0.4))
        });
        let conj_only: Sampler = {
            let base = base.clone();
            Arc::new(move |r: f64, f: f64| base(r, f).conj())
        };
        let conj_refl: Sampler = {
            let base = base.clone();
            Arc::new(move |r: f64, f: f64| base(r, -f).conj())
        };
        let mk = |s: Sampler| InitialState {
            kind: StateKind::Custom { sampler: s, angular_breaks: vec![], origin_power: 0 },
            b0: 1.0,
            b0_prime: 0.0,
        };
        let trunc = Truncation::new(4, -4, 4);
        let spec = QuadSpec { radial_order: 80, angular_order: 128, ..Default::default() };
        let a = decompose(&mk(base), &conv, &trunc, &spec).unwrap();
        let b = decompose(&mk(conj_only), &conv, &trunc, &spec).unwrap();
        let c = decompose(&mk(conj_refl), &conv, &trunc, &spec).unwrap();
        for (idx, coef) in &a.entries {
            let flipped = b.coefficient(ModeIndex::new(idx.n, -idx.l));
            assert!((flipped - coef.conj()).norm() < 1e-10, "conj law at {idx:?}");
            let same = c.coefficient(*idx);
            assert!((same - coef.conj()).norm() < 1e-10, "conj-reflect law at {idx:?}");
        }
    }

    #[test]
    fn spectrum_csv_roundtrip() {
        let conv = BasisConvention::default();
        let spec = decompose(
            &InitialState::half_blocked(0, 1),
            &conv,
            &Truncation::new(3, -4, 4),
            &QuadSpec::default(),
        )
        .unwrap();
        let csv = spec.to_csv();
        let back = ModeSpectrum::from_csv(&csv, spec.omega0).unwrap();
        for (idx, c) in &spec.entries {
            assert!((back.coefficient(*idx) - c).norm() < 1e-15);
        }
        assert!(ModeSpectrum::from_csv("n,l,re,im\n", 1.0).is_err());
    }

    #[test]
    fn truncation_warning_attached() {
        let conv = BasisConvention::default();
        // absurdly tight window on a broad state
        let spec = decompose(
            &InitialState::half_blocked(0, 1),
            &conv,
            &Truncation::new(0, 1, 1),
            &QuadSpec::default(),
        )
        .unwrap();
        assert_eq!(spec.warnings.len(), 1);
    }
}
