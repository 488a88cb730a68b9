//! Quadrature kernels: Gauss-Legendre, generalized Gauss-Laguerre, and an
//! adaptive Gauss-Kronrod integrator.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; good to machine precision for
/// the orders used here (<= a few thousand).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        // Tricomi-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with an `order`-point Gauss-Legendre rule.
pub fn gl_integrate<T, F>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: Fn(f64) -> T,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = T::default();
    for (&x, &w) in nodes.iter().zip(weights) {
        acc = acc + f(c + h * x) * (w * h);
    }
    acc
}

/// Generalized Gauss-Laguerre rule for the weight x^alpha e^{-x} on [0, inf).
///
/// Needed with alpha = 1/2 when the radial integrand carries a half-integer
/// power of (omega0 rho^2); alpha = 0 otherwise. Weights in the far tail may
/// underflow to zero, which is harmless for the integrands used here (they
/// decay at least as fast as the weight).
pub fn gauss_laguerre(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let (nodes, ln_w) = gauss_laguerre_ln(n, alpha);
    let weights = ln_w.iter().map(|&lw| lw.exp()).collect();
    (nodes, weights)
}

/// Gauss-Laguerre nodes with log-space weights (never under/overflows).
///
/// Node search is the classic Newton iteration with staged initial guesses;
/// the polynomial recurrence tracks an exponent offset so high orders
/// (several hundred points) survive in double precision.
pub fn gauss_laguerre_ln(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && alpha > -1.0);
    let mut nodes = vec![0.0; n];
    let mut ln_weights = vec![0.0; n];
    let nf = n as f64;
    let ln_gamma_ratio = ln_gamma(nf + alpha + 1.0) - ln_gamma(nf + 1.0);
    let mut z = 0.0;
    for i in 0..n {
        if i == 0 {
            z = (1.0 + alpha) * (3.0 + 0.92 * alpha) / (1.0 + 2.4 * nf + 1.8 * alpha);
        } else if i == 1 {
            z += (15.0 + 6.25 * alpha) / (1.0 + 0.9 * alpha + 2.5 * nf);
        } else {
            let ai = (i - 1) as f64;
            z += ((1.0 + 2.55 * ai) / (1.9 * ai) + 1.26 * ai * alpha / (1.0 + 3.5 * ai))
                * (z - nodes[i - 2])
                / (1.0 + 0.3 * alpha);
        }
        for _ in 0..200 {
            let (pn, pnm1, _) = laguerre_scaled_pair(n, alpha, z);
            let pp = (nf * pn - (nf + alpha) * pnm1) / z;
            let dz = pn / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        nodes[i] = z;
        // w = Gamma(n+alpha+1)/n! * x / ((n+1)^2 L_{n+1}(x)^2), in log space
        let (pnp1, _, log_scale) = laguerre_scaled_pair(n + 1, alpha, z);
        let ln_l = pnp1.abs().ln() + log_scale;
        ln_weights[i] = ln_gamma_ratio + z.ln() - 2.0 * ((nf + 1.0).ln() + ln_l);
    }
    (nodes, ln_weights)
}

/// Angular quadrature nodes/weights over one period [0, 2 pi).
///
/// With no declared breaks this is the uniform rule with `uniform_n` points
/// (exact for band-limited integrands); with breaks it places a
/// `panel_order`-point Gauss-Legendre rule on every smooth panel, which is
/// what discontinuous apertures need to converge past O(1/M^2).
pub fn angular_rule(breaks: &[f64], uniform_n: usize, panel_order: usize) -> (Vec<f64>, Vec<f64>) {
    let two_pi = 2.0 * std::f64::consts::PI;
    if breaks.is_empty() {
        let w = two_pi / uniform_n as f64;
        return ((0..uniform_n).map(|k| k as f64 * w).collect(), vec![w; uniform_n]);
    }
    let mut edges: Vec<f64> = breaks.iter().map(|b| b.rem_euclid(two_pi)).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let first = edges[0];
    edges.push(first + two_pi);
    let (gx, gw) = gauss_legendre(panel_order);
    let mut phis = Vec::new();
    let mut ws = Vec::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 1e-14 {
            continue;
        }
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for (&x, &w) in gx.iter().zip(&gw) {
            phis.push(c + h * x);
            ws.push(w * h);
        }
    }
    (phis, ws)
}

/// (L_n^alpha(x), L_{n-1}^alpha(x)) scaled by e^{-log_scale} to dodge overflow.
fn laguerre_scaled_pair(n: usize, alpha: f64, x: f64) -> (f64, f64, f64) {
    let mut log_scale = 0.0;
    let mut pm = 1.0;
    let mut p = 1.0 + alpha - x;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let pnext = ((2.0 * kf + 1.0 + alpha - x) * p - (kf + alpha) * pm) / (kf + 1.0);
        pm = p;
        p = pnext;
        let m = p.abs().max(pm.abs());
        if m > 1e250 {
            p /= 1e250;
            pm /= 1e250;
            log_scale += 1e250_f64.ln();
        }
    }
    (p, pm, log_scale)
}

/// Sign-tracked log-Gamma; returns ln|Gamma(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// ln|Gamma(x)| together with the sign of Gamma(x).
pub fn ln_gamma_sign(x: f64) -> (f64, f64) {
    let (ln, sign) = libm::lgamma_r(x);
    (ln, sign as f64)
}

// Gauss-Kronrod 7-15 pair on [-1, 1]; nodes 1, 3, 5, 7 are the Gauss-7 points.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let fsum = f(c - x) + f(c + x);
        kronrod += GK_WK[j] * fsum;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * fsum;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Returns the value and the accumulated error estimate, or a
/// non-convergence error when subdivision stalls above tolerance.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    const MAX_INTERVALS: usize = 20_000;
    let mut stack = vec![(a, b)];
    let mut total = 0.0f64;
    let mut err_total = 0.0f64;
    let (rough, _) = gk15(f, a, b);
    let scale = rough.abs().max(1e-300);
    let mut used = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        used += 1;
        if used > MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                delta: err_total,
                tol: abs_tol.max(rel_tol * scale),
            });
        }
        let (val, err) = gk15(f, lo, hi);
        let local_tol = (abs_tol + rel_tol * scale.max(total.abs())) * (hi - lo) / (b - a);
        if err <= local_tol || (hi - lo) < 1e-14 * (b - a).abs() {
            total += val;
            err_total += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    Ok((total, err_total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_low_order_exact() {
        let (x, w) = gauss_legendre(5);
        // integrates polynomials up to degree 9 exactly
        let int_x8: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(8)).sum();
        assert!((int_x8 - 2.0 / 9.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_moments_alpha0() {
        let (x, w) = gauss_laguerre(40, 0.0);
        for (k, expect) in [(0u32, 1.0), (1, 1.0), (2, 2.0), (3, 6.0), (7, 5040.0)] {
            let m: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            assert!(
                (m - expect).abs() <= 1e-12 * expect.max(1.0),
                "moment {k}: {m} vs {expect}"
            );
        }
    }

    #[test]
    fn laguerre_moments_alpha_half() {
        let (x, w) = gauss_laguerre(60, 0.5);
        let g = |z: f64| ln_gamma(z).exp();
        for k in 0u32..5 {
            let m: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let expect = g(1.5 + k as f64);
            assert!(
                (m - expect).abs() <= 1e-12 * expect,
                "half-integer moment {k}: {m} vs {expect}"
            );
        }
    }

    #[test]
    fn laguerre_high_order_stays_finite() {
        let (x, w) = gauss_laguerre(400, 0.0);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!(w.iter().all(|v| v.is_finite()));
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-11, "sum of weights {total}");
        // e^{-2x} integrand: super-geometric convergence despite the weight
        // mismatch (roundoff floor grows mildly with order)
        let half: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (-xi).exp()).sum();
        assert!((half - 0.5).abs() < 1e-11, "err {:.3e}", (half - 0.5).abs());
    }

    #[test]
    fn lgamma_accuracy_on_half_integers() {
        // used range for the arc coefficients: (|l|+|l_a|)/2 + 1 up to ~60
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut exact = sqrt_pi; // Gamma(1/2)
        let mut x = 0.5;
        for _ in 0..120 {
            let got = ln_gamma(x).exp();
            assert!(
                (got - exact).abs() <= 1e-13 * exact,
                "Gamma({x}) = {got} vs {exact}"
            );
            exact *= x;
            x += 1.0;
        }
    }

    #[test]
    fn adaptive_gk_smooth_and_peaked() {
        let (v, e) = adaptive_gk(&|x: f64| x.exp(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12, "err est {e}");
        // narrow Lorentzian peak
        let f = |x: f64| 1.0 / (1e-6 + (x - 0.3).powi(2));
        let exact = ((0.7f64 / 1e-3).atan() + (0.3f64 / 1e-3).atan()) / 1e-3;
        let (v, _) = adaptive_gk(&f, 0.0, 1.0, 1e-10, 1e-12).unwrap();
        assert!((v - exact).abs() < 1e-6 * exact);
    }
}
