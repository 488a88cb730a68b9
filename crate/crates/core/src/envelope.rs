//! Ermakov-Pinney envelope solver.
//!
//! Integrates b'' + Omega^2(z) b = 1/b^3 together with the phase advance
//! integral int dz/b^2 and the Larmor integral int Omega dz, all as one
//! augmented ODE system so every quantity lives on the same adaptive mesh
//! with the same dense output.

use crate::error::{Error, Result};

/// Tolerances and guards for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    /// Initial step size; picked automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// b below this aborts with an envelope-collapse diagnostic.
    pub collapse_threshold: f64,
    /// Optional cap on the step size. The dense-output derivative (used by
    /// the EP-residual diagnostic) gains two orders for every factor of ten
    /// here, so residual-critical runs set it explicitly.
    pub max_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            h0: None,
            max_steps: 2_000_000,
            collapse_threshold: 1e-6,
            max_step: None,
        }
    }
}

const DIM: usize = 4; // (b, b', tau, int Omega)

type State = [f64; DIM];

/// One accepted step with its quartic interpolation coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    z0: f64,
    h: f64,
    y0: State,
    delta: State,
    r3: State,
    r4: State,
    r5: State,
}

impl DenseStep {
    fn eval(&self, theta: f64) -> State {
        let mut y = [0.0; DIM];
        let s1 = 1.0 - theta;
        for i in 0..DIM {
            y[i] = self.y0[i]
                + theta * (self.delta[i] + s1 * (self.r3[i] + theta * (self.r4[i] + s1 * self.r5[i])));
        }
        y
    }

    /// d/dz of the interpolant.
    fn eval_deriv(&self, theta: f64) -> State {
        let mut d = [0.0; DIM];
        for i in 0..DIM {
            d[i] = (self.delta[i]
                + (1.0 - 2.0 * theta) * self.r3[i]
                + theta * (2.0 - 3.0 * theta) * self.r4[i]
                + 2.0 * theta * (1.0 - theta) * (1.0 - 2.0 * theta) * self.r5[i])
                / self.h;
        }
        d
    }
}

/// Dense envelope solution: Twiss functions, phase advance, rotation angles.
#[derive(Debug, Clone)]
pub struct EnvelopeSolution {
    steps: Vec<DenseStep>,
    z_end: f64,
    y_end: State,
    pub charge_sign: f64,
}

impl EnvelopeSolution {
    pub fn z_span(&self) -> (f64, f64) {
        (self.steps[0].z0, self.z_end)
    }

    /// Accepted-step boundaries (the adaptive mesh).
    pub fn z_mesh(&self) -> Vec<f64> {
        let mut zs: Vec<f64> = self.steps.iter().map(|s| s.z0).collect();
        zs.push(self.z_end);
        zs
    }

    fn locate(&self, z: f64) -> Result<(&DenseStep, f64)> {
        let (lo, hi) = self.z_span();
        if z < lo - 1e-12 || z > hi + 1e-12 {
            return Err(Error::EnvelopeRange { z, min: lo, max: hi });
        }
        let z = z.clamp(lo, hi);
        let idx = self
            .steps
            .partition_point(|s| s.z0 + s.h <= z)
            .min(self.steps.len() - 1);
        let step = &self.steps[idx];
        Ok((step, ((z - step.z0) / step.h).clamp(0.0, 1.0)))
    }

    fn state_at(&self, z: f64) -> Result<State> {
        let (step, theta) = self.locate(z)?;
        Ok(step.eval(theta))
    }

    pub fn b_at(&self, z: f64) -> Result<f64> {
        Ok(self.state_at(z)?[0])
    }

    pub fn b_prime_at(&self, z: f64) -> Result<f64> {
        Ok(self.state_at(z)?[1])
    }

    /// b'' from the derivative of the b'-interpolant (not from the ODE
    /// right-hand side, so it is usable as an independent residual check).
    pub fn b_second_at(&self, z: f64) -> Result<f64> {
        let (step, theta) = self.locate(z)?;
        Ok(step.eval_deriv(theta)[1])
    }

    /// Phase advance int_0^z dz/b^2.
    pub fn phase_advance_at(&self, z: f64) -> Result<f64> {
        Ok(self.state_at(z)?[2])
    }

    /// Larmor angle sign(q) int_0^z Omega dz.
    pub fn larmor_at(&self, z: f64) -> Result<f64> {
        Ok(self.charge_sign * self.state_at(z)?[3])
    }

    /// Rotation angle of the co-rotating (l > 0) component.
    pub fn phi_plus_at(&self, z: f64) -> Result<f64> {
        let y = self.state_at(z)?;
        Ok(self.charge_sign * y[3] - y[2])
    }

    /// Rotation angle of the counter-rotating (l < 0) component.
    pub fn phi_minus_at(&self, z: f64) -> Result<f64> {
        let y = self.state_at(z)?;
        Ok(self.charge_sign * y[3] + y[2])
    }

    /// Envelope extremes over the solved span (sampled on the dense mesh).
    pub fn b_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for s in &self.steps {
            for k in 0..=8 {
                let b = s.eval(k as f64 / 8.0)[0];
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }

    /// First z with phase_advance(z) = target (phase advance is strictly
    /// increasing, so bisection is exact enough).
    pub fn z_at_phase_advance(&self, target: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.z_span();
        let end = self.phase_advance_at(hi)?;
        if target < 0.0 || target > end {
            return Err(Error::EnvelopeRange { z: target, min: 0.0, max: end });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.phase_advance_at(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// CSV export at the given z samples: `z,b,b_prime,phase_advance,phi_plus,phi_minus`.
    pub fn to_csv(&self, zs: &[f64]) -> Result<String> {
        let mut out = String::from("z,b,b_prime,phase_advance,phi_plus,phi_minus\n");
        for &z in zs {
            let y = self.state_at(z)?;
            let lam = self.charge_sign * y[3];
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                z,
                y[0],
                y[1],
                y[2],
                lam - y[2],
                lam + y[2]
            ));
        }
        Ok(out)
    }
}

/// Rotation angles (phi_plus, phi_minus) sampled on the adaptive mesh.
pub fn rotation_angles(sol: &EnvelopeSolution) -> (Vec<f64>, Vec<f64>) {
    let zs = sol.z_mesh();
    let plus = zs.iter().map(|&z| sol.phi_plus_at(z).unwrap()).collect();
    let minus = zs.iter().map(|&z| sol.phi_minus_at(z).unwrap()).collect();
    (plus, minus)
}

/// Pointwise Ermakov-Pinney residual b'' + Omega^2 b - 1/b^3 sampled inside
/// every accepted step, with b'' taken from the dense-output interpolant.
pub fn ep_invariant<F: Fn(f64) -> f64>(sol: &EnvelopeSolution, omega: F) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for s in &sol.steps {
        for &theta in &[0.25, 0.5, 0.75] {
            let z = s.z0 + theta * s.h;
            let y = s.eval(theta);
            let bpp = s.eval_deriv(theta)[1];
            let w = omega(z);
            out.push((z, bpp + w * w * y[0] - 1.0 / (y[0] * y[0] * y[0])));
        }
    }
    out
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Solve the Ermakov-Pinney initial value problem on `z_span`, accumulating
/// phase advance and Larmor angle on the same mesh.
pub fn solve_ermakov<F: Fn(f64) -> f64>(
    omega: F,
    b0: f64,
    b0_prime: f64,
    z_span: (f64, f64),
    ctrl: StepControl,
    charge_sign: f64,
) -> Result<EnvelopeSolution> {
    if b0 <= 0.0 {
        return Err(Error::Field(format!("b0 must be positive, got {b0}")));
    }
    if z_span.1 <= z_span.0 {
        return Err(Error::Field(format!(
            "z span must be increasing, got [{}, {}]",
            z_span.0, z_span.1
        )));
    }
    assert!(charge_sign == 1.0 || charge_sign == -1.0, "charge sign must be +-1");

    let rhs = |z: f64, y: &State| -> State {
        let b = y[0];
        let w = omega(z);
        [y[1], 1.0 / (b * b * b) - w * w * b, 1.0 / (b * b), w]
    };

    let span = z_span.1 - z_span.0;
    let mut z = z_span.0;
    let mut y: State = [b0, b0_prime, 0.0, 0.0];
    let mut k1 = rhs(z, &y);
    let h_cap = ctrl.max_step.unwrap_or(f64::INFINITY);
    let mut h = ctrl.h0.unwrap_or(1e-4 * span).min(span).min(h_cap);
    let mut steps = Vec::new();

    'stepping: for _ in 0..ctrl.max_steps {
        if z >= z_span.1 {
            break;
        }
        if h < 1e-14 * span {
            return Err(Error::StepUnderflow { z, h });
        }
        h = h.min(z_span.1 - z);

        let mut k = [[0.0; DIM]; 7];
        k[0] = k1;
        for s in 1..6 {
            let mut ys = y;
            for i in 0..DIM {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][j] * kj[i];
                }
                ys[i] += h * acc;
            }
            if ys[0] <= 0.0 {
                // stage ran through the pole of 1/b^3; retry the whole step
                h *= 0.25;
                continue 'stepping;
            }
            k[s] = rhs(z + C[s] * h, &ys);
        }
        // 5th-order solution (row 6 of A) and its FSAL derivative
        let mut y1 = y;
        for i in 0..DIM {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[5][j] * kj[i];
            }
            y1[i] += h * acc;
        }
        if y1[0] <= 0.0 {
            h *= 0.25;
            continue;
        }
        k[6] = rhs(z + h, &y1);

        let mut errsq = 0.0;
        for i in 0..DIM {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y1[i].abs());
            errsq += (e / sc) * (e / sc);
        }
        let err = (errsq / DIM as f64).sqrt();

        if err <= 1.0 {
            // dense coefficients (Hairer contd5 form)
            let mut delta = [0.0; DIM];
            let mut r3 = [0.0; DIM];
            let mut r4 = [0.0; DIM];
            let mut r5 = [0.0; DIM];
            for i in 0..DIM {
                delta[i] = y1[i] - y[i];
                r3[i] = h * k[0][i] - delta[i];
                r4[i] = 2.0 * delta[i] - h * (k[0][i] + k[6][i]);
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += D[j] * kj[i];
                }
                r5[i] = h * acc;
            }
            steps.push(DenseStep { z0: z, h, y0: y, delta, r3, r4, r5 });
            z += h;
            y = y1;
            k1 = k[6];

            if y[0] < ctrl.collapse_threshold {
                return Err(Error::EnvelopeCollapse {
                    z,
                    b: y[0],
                    threshold: ctrl.collapse_threshold,
                });
            }
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h = (h * fac).min(h_cap);
    }

    if z < z_span.1 {
        return Err(Error::StepUnderflow { z, h });
    }
    Ok(EnvelopeSolution { steps, z_end: z_span.1, y_end: y, charge_sign })
}

impl EnvelopeSolution {
    pub fn end_state(&self) -> (f64, f64) {
        (self.y_end[0], self.y_end[1])
    }
}
