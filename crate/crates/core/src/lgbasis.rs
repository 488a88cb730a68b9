//! Orthonormal Laguerre-Gaussian eigenbasis of the reference transverse
//! oscillator, with numerically stable special-function kernels.
//!
//! The basis family is parametrized by a single reference frequency `omega0`;
//! all pieces (Gaussian width, Laguerre argument, eigenvalues, normalization)
//! are kept mutually consistent:
//!
//! ```text
//! psi_{n,l}(rho, phi) = N_{n,l} (sqrt(omega0) rho)^{|l|} L_n^{|l|}(omega0 rho^2)
//!                       exp(-omega0 rho^2 / 2 + i l phi),
//! kappa_{n,l} = omega0 (2n + |l| + 1),    int |psi|^2 rho drho dphi = 1.
//! ```

use num_complex::Complex64;

use crate::quad::ln_gamma;

/// Radial and OAM quantum numbers of one basis mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub n: u32,
    pub l: i32,
}

impl ModeIndex {
    pub fn new(n: u32, l: i32) -> Self {
        Self { n, l }
    }

    /// Oscillator eigenvalue kappa = omega0 (2n + |l| + 1).
    pub fn kappa(&self, conv: &BasisConvention) -> f64 {
        conv.omega0 * (2 * self.n as i64 + self.l.unsigned_abs() as i64 + 1) as f64
    }
}

/// Reference oscillator frequency fixing the basis convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConvention {
    pub omega0: f64,
}

impl Default for BasisConvention {
    fn default() -> Self {
        Self { omega0: 1.0 }
    }
}

impl BasisConvention {
    pub fn new(omega0: f64) -> Self {
        assert!(omega0 > 0.0, "omega0 must be positive");
        Self { omega0 }
    }
}

/// Generalized Laguerre polynomial L_n^alpha(x) by the stable upward
/// three-term recurrence in n.
pub fn laguerre(n: u32, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalization constant N_{n,l} = sqrt(omega0 n! / (pi (n+|l|)!)).
pub fn norm_constant(n: u32, l: i32, conv: &BasisConvention) -> f64 {
    let la = l.unsigned_abs();
    let ln = 0.5
        * (ln_gamma(n as f64 + 1.0) - ln_gamma((n + la) as f64 + 1.0)
            + (conv.omega0 / std::f64::consts::PI).ln());
    ln.exp()
}

/// Real radial factor of the basis mode (everything except e^{i l phi}).
pub fn radial(idx: ModeIndex, conv: &BasisConvention, rho: f64) -> f64 {
    let arg = conv.omega0 * rho * rho;
    // double-precision exponent limit
    if arg > 700.0 {
        return 0.0;
    }
    radial_nogauss(idx, conv, rho) * (-0.5 * arg).exp()
}

/// Radial factor with the Gaussian e^{-omega0 rho^2/2} stripped off.
///
/// Used by the overlap quadrature, where the Gaussian is part of the
/// Gauss-Laguerre weight and must not be evaluated twice.
pub fn radial_nogauss(idx: ModeIndex, conv: &BasisConvention, rho: f64) -> f64 {
    let la = idx.l.unsigned_abs();
    let arg = conv.omega0 * rho * rho;
    let pow = if la == 0 {
        1.0
    } else {
        (conv.omega0.sqrt() * rho).powi(la as i32)
    };
    norm_constant(idx.n, idx.l, conv) * pow * laguerre(idx.n, la as f64, arg)
}

/// Complex basis amplitude psi_{n,l}(rho, phi).
pub fn basis_eval(idx: ModeIndex, conv: &BasisConvention, rho: f64, phi: f64) -> Complex64 {
    radial(idx, conv, rho) * Complex64::from_polar(1.0, idx.l as f64 * phi)
}
