//! Axisymmetric magnetic field profiles: analytic Glaser bell, tabulated
//! data, and on-axis fields synthesized from solenoid winding geometry by
//! Biot-Savart quadrature.
//!
//! This module is the normalization boundary: field construction is SI,
//! everything downstream consumes only the dimensionless Omega(z) sampler
//! (Omega = 2 B_z / max|B_z|) and normalized z.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::quad::adaptive_gk;

pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Surface-current model of a stack of coaxial windings: samples of radius
/// R(z0) and surface current density I(z0) on an increasing z0 grid, linearly
/// interpolated in between.
#[derive(Debug, Clone)]
pub struct SolenoidGeometry {
    pub z0: Vec<f64>,
    pub radius: Vec<f64>,
    pub current: Vec<f64>,
    /// Sample count used when the synthesized profile is tabulated.
    pub table_points: usize,
}

impl SolenoidGeometry {
    pub fn new(z0: Vec<f64>, radius: Vec<f64>, current: Vec<f64>) -> Result<Self> {
        if z0.len() < 2 || z0.len() != radius.len() || z0.len() != current.len() {
            return Err(Error::Field(
                "geometry needs >= 2 samples with matching z0/R/I lengths".into(),
            ));
        }
        if z0.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Field("z0 grid must be strictly increasing".into()));
        }
        if radius.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Field("all radii must be strictly positive".into()));
        }
        Ok(Self { z0, radius, current, table_points: 2001 })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.z0[0], *self.z0.last().unwrap())
    }

    fn interp(&self, z0: f64) -> (f64, f64) {
        let n = self.z0.len();
        let j = self.z0.partition_point(|&x| x <= z0).clamp(1, n - 1);
        let t = (z0 - self.z0[j - 1]) / (self.z0[j] - self.z0[j - 1]);
        (
            self.radius[j - 1] + t * (self.radius[j] - self.radius[j - 1]),
            self.current[j - 1] + t * (self.current[j] - self.current[j - 1]),
        )
    }
}

/// Tolerances for the Biot-Savart quadrature and its truncation-tail check.
#[derive(Debug, Clone, Copy)]
pub struct BiotSavartSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Tail bound must stay below max(tail_abs, tail_rel * |value|).
    pub tail_abs: f64,
    pub tail_rel: f64,
}

impl Default for BiotSavartSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, tail_abs: 1e-12, tail_rel: 1e-6 }
    }
}

/// On-axis field of the winding stack:
/// B_z(z) = (mu0/2) int I(z0) R(z0)^2 / ((z-z0)^2 + R(z0)^2)^{3/2} dz0.
///
/// Returns the value and an error estimate (quadrature + truncation tail).
pub fn biot_savart_onaxis(geom: &SolenoidGeometry, z: f64, spec: BiotSavartSpec) -> Result<(f64, f64)> {
    let (lo, hi) = geom.window();
    let f = |z0: f64| {
        let (r, i) = geom.interp(z0);
        let d = z - z0;
        i * r * r / (d * d + r * r).powf(1.5)
    };
    let (val, qerr) = adaptive_gk(&f, lo, hi, spec.abs_tol, spec.rel_tol)?;
    let val = 0.5 * MU_0 * val;
    let qerr = 0.5 * MU_0 * qerr;

    // analytic tail bound with edge R, I frozen beyond the window:
    // int_d^inf ds/(s^2+R^2)^{3/2} = (1 - d/sqrt(d^2+R^2)) / R^2
    let mut tail = 0.0;
    for &(edge, r, i) in &[
        (lo, geom.radius[0], geom.current[0]),
        (hi, *geom.radius.last().unwrap(), *geom.current.last().unwrap()),
    ] {
        let d = (z - edge).abs();
        tail += 0.5 * MU_0 * i.abs() * (1.0 - d / (d * d + r * r).sqrt());
    }
    let allowed = spec.tail_abs.max(spec.tail_rel * val.abs());
    if tail > allowed {
        return Err(Error::TailBound { bound: tail, tol: allowed });
    }
    Ok((val, qerr + tail))
}

/// Glaser bell field B0 a^2 / (a^2 + (z - c)^2).
pub fn glaser_field(b0: f64, a: f64, c: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Field(format!("glaser half-width must be positive, got {a}")));
    }
    let u = z - c;
    Ok(b0 * a * a / (a * a + u * u))
}

/// An axisymmetric on-axis field profile.
#[derive(Debug, Clone)]
pub enum FieldProfile {
    Glaser { b0: f64, a: f64, c: f64 },
    Tabulated { z: Vec<f64>, b: Vec<f64> },
    /// Synthesized from geometry, pre-tabulated over the declared z domain.
    Synthesized { geometry: SolenoidGeometry, z: Vec<f64>, b: Vec<f64> },
    /// Explicit Omega == 0 profile (no reference field scale).
    FreeSpace,
    /// Explicit dimensionless Omega == const profile for matched-channel
    /// studies; carries no physical B_z.
    UniformOmega { omega: f64 },
}

impl FieldProfile {
    pub fn glaser(b0: f64, a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Field(format!("glaser half-width must be positive, got {a}")));
        }
        if b0 == 0.0 {
            return Err(Error::Field("glaser peak field must be nonzero".into()));
        }
        Ok(Self::Glaser { b0, a, c })
    }

    pub fn tabulated(z: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if z.len() < 5 || z.len() != b.len() {
            return Err(Error::Field("table needs >= 5 matching (z, B) samples".into()));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Field("table z grid must be strictly increasing".into()));
        }
        Ok(Self::Tabulated { z, b })
    }

    /// Tabulate the Biot-Savart field of `geometry` over `domain`.
    pub fn synthesized(
        geometry: SolenoidGeometry,
        domain: (f64, f64),
        spec: BiotSavartSpec,
    ) -> Result<Self> {
        if domain.1 <= domain.0 {
            return Err(Error::Field("synthesized z domain must be increasing".into()));
        }
        let n = geometry.table_points.max(101);
        let mut z = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for k in 0..n {
            let zk = domain.0 + (domain.1 - domain.0) * k as f64 / (n - 1) as f64;
            let (bk, _) = biot_savart_onaxis(&geometry, zk, spec)?;
            z.push(zk);
            b.push(bk);
        }
        Ok(Self::Synthesized { geometry, z, b })
    }

    /// Parse the field-profile JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("field json: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("field profile missing string `kind`".into()))?;
        let num = |key: &str| -> Result<f64> {
            v.get("parameters")
                .unwrap_or(v)
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Config(format!("field profile missing number `{key}`")))
        };
        match kind {
            "glaser" => Self::glaser(num("B0")?, num("a")?, num("c")?),
            "free_space" => Ok(Self::FreeSpace),
            "uniform_omega" => Ok(Self::UniformOmega { omega: num("omega")? }),
            "tabulated" => {
                let table = v
                    .get("table")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Config("tabulated profile missing `table`".into()))?;
                let mut z = Vec::new();
                let mut b = Vec::new();
                for row in table {
                    let pair = row.as_array().filter(|r| r.len() == 2);
                    let pair = pair
                        .ok_or_else(|| Error::Config("table rows must be [z, B_z]".into()))?;
                    z.push(pair[0].as_f64().ok_or_else(|| Error::Config("bad z".into()))?);
                    b.push(pair[1].as_f64().ok_or_else(|| Error::Config("bad B_z".into()))?);
                }
                Self::tabulated(z, b)
            }
            "synthesized" => {
                let g = v
                    .get("geometry")
                    .ok_or_else(|| Error::Config("synthesized profile missing `geometry`".into()))?;
                let rows = g
                    .get("windings")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Config("geometry missing `windings`".into()))?;
                let mut z0 = Vec::new();
                let mut r = Vec::new();
                let mut i = Vec::new();
                for row in rows {
                    let t = row.as_array().filter(|t| t.len() == 3).ok_or_else(|| {
                        Error::Config("winding rows must be [z0, R, I]".into())
                    })?;
                    z0.push(t[0].as_f64().ok_or_else(|| Error::Config("bad z0".into()))?);
                    r.push(t[1].as_f64().ok_or_else(|| Error::Config("bad R".into()))?);
                    i.push(t[2].as_f64().ok_or_else(|| Error::Config("bad I".into()))?);
                }
                let mut geom = SolenoidGeometry::new(z0, r, i)?;
                if let Some(n) = g.get("table_points").and_then(Value::as_u64) {
                    geom.table_points = n as usize;
                }
                let window = geom.window();
                let domain = match v.get("domain").and_then(Value::as_array) {
                    Some(d) if d.len() == 2 => (
                        d[0].as_f64().ok_or_else(|| Error::Config("bad domain".into()))?,
                        d[1].as_f64().ok_or_else(|| Error::Config("bad domain".into()))?,
                    ),
                    _ => window,
                };
                Self::synthesized(geom, domain, BiotSavartSpec::default())
            }
            other => Err(Error::Config(format!("unknown field kind `{other}`"))),
        }
    }

    fn table(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Self::Tabulated { z, b } | Self::Synthesized { z, b, .. } => Some((z, b)),
            _ => None,
        }
    }

    /// On-axis longitudinal field B_z(z).
    pub fn b_z(&self, z: f64) -> Result<f64> {
        match self {
            Self::Glaser { b0, a, c } => glaser_field(*b0, *a, *c, z),
            Self::FreeSpace => Ok(0.0),
            Self::UniformOmega { .. } => Err(Error::Field(
                "uniform_omega profile is dimensionless and has no B_z".into(),
            )),
            _ => {
                let (zs, bs) = self.table().unwrap();
                lagrange_value(zs, bs, z, 4)
            }
        }
    }

    /// dB_z/dz: analytic for Glaser, 5-point polynomial differentiation for
    /// tabulated data (one-sided near the edges by construction).
    pub fn dbz_dz(&self, z: f64) -> Result<f64> {
        match self {
            Self::Glaser { b0, a, c } => {
                let u = z - c;
                let d = a * a + u * u;
                Ok(-2.0 * b0 * a * a * u / (d * d))
            }
            Self::FreeSpace => Ok(0.0),
            Self::UniformOmega { .. } => Err(Error::Field(
                "uniform_omega profile is dimensionless and has no B_z".into(),
            )),
            _ => {
                let (zs, bs) = self.table().unwrap();
                lagrange_derivative(zs, bs, z, 5)
            }
        }
    }

    /// Linearized off-axis field (-x/2 dBz, -y/2 dBz, Bz). Diagnostic only;
    /// propagation never consumes the transverse components.
    pub fn transverse_field(&self, x: f64, y: f64, z: f64) -> Result<(f64, f64, f64)> {
        let d = self.dbz_dz(z)?;
        Ok((-0.5 * x * d, -0.5 * y * d, self.b_z(z)?))
    }

    /// max |B_z| over the declared domain (global analytic max for Glaser).
    pub fn b_max(&self) -> Result<f64> {
        match self {
            Self::Glaser { b0, .. } => Ok(b0.abs()),
            Self::FreeSpace | Self::UniformOmega { .. } => Ok(0.0),
            _ => {
                let (zs, bs) = self.table().unwrap();
                let (j, _) = bs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .unwrap();
                // parabolic refinement through the neighbours of the best sample
                if j == 0 || j == zs.len() - 1 {
                    return Ok(bs[j].abs());
                }
                let (x0, x1, x2) = (zs[j - 1], zs[j], zs[j + 1]);
                let (y0, y1, y2) = (bs[j - 1].abs(), bs[j].abs(), bs[j + 1].abs());
                let denom = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
                if denom.abs() < 1e-300 {
                    return Ok(y1);
                }
                let zp = x1
                    - 0.5 * ((x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0))
                        / denom;
                Ok(self.b_z(zp)?.abs().max(y1))
            }
        }
    }

    /// Normalize to the dimensionless Omega(z) = 2 B_z(z)/max|B_z| sampler and
    /// the magnetic length rho_H = 2 sqrt(hbar / (|q| max|B|)).
    ///
    /// Identically-zero tabulated profiles are rejected; true free space is
    /// the explicit `FreeSpace` profile with Omega == 0 and no length scale.
    pub fn normalize(&self, charge_abs: f64) -> Result<NormalizedField> {
        match self {
            Self::FreeSpace => Ok(NormalizedField {
                omega: OmegaProfile::Zero,
                b_max: 0.0,
                rho_h: None,
            }),
            Self::UniformOmega { omega } => Ok(NormalizedField {
                omega: OmegaProfile::Const(*omega),
                b_max: 0.0,
                rho_h: None,
            }),
            Self::Glaser { b0, a, c } => Ok(NormalizedField {
                omega: OmegaProfile::Glaser { sign: b0.signum(), a: *a, c: *c },
                b_max: b0.abs(),
                rho_h: Some(2.0 * (HBAR / (charge_abs * b0.abs())).sqrt()),
            }),
            _ => {
                let b_max = self.b_max()?;
                if b_max == 0.0 {
                    return Err(Error::Field(
                        "identically zero profile; use the explicit free_space kind".into(),
                    ));
                }
                let (zs, bs) = self.table().unwrap();
                let omega = bs.iter().map(|b| 2.0 * b / b_max).collect();
                Ok(NormalizedField {
                    omega: OmegaProfile::Table { z: zs.to_vec(), omega },
                    b_max,
                    rho_h: Some(2.0 * (HBAR / (charge_abs * b_max)).sqrt()),
                })
            }
        }
    }
}

/// Result of the normalization boundary: the Omega sampler plus scales.
#[derive(Debug, Clone)]
pub struct NormalizedField {
    pub omega: OmegaProfile,
    pub b_max: f64,
    /// None for profiles without a field scale (free space / uniform Omega);
    /// the caller must then supply its own reference length.
    pub rho_h: Option<f64>,
}

/// Cheap, clonable Omega(z) sampler consumed by all downstream modules.
#[derive(Debug, Clone)]
pub enum OmegaProfile {
    Zero,
    Const(f64),
    Glaser { sign: f64, a: f64, c: f64 },
    Table { z: Vec<f64>, omega: Vec<f64> },
}

impl OmegaProfile {
    pub fn sample(&self, z: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Const(w) => *w,
            Self::Glaser { sign, a, c } => {
                let u = z - c;
                sign * 2.0 * a * a / (a * a + u * u)
            }
            Self::Table { z: zs, omega } => {
                // clamped cubic Lagrange; the run schedule is validated to sit
                // inside the table, clamping only guards roundoff at the ends
                let zq = z.clamp(zs[0], *zs.last().unwrap());
                lagrange_value(zs, omega, zq, 4).unwrap_or(0.0)
            }
        }
    }
}

/// Value of the degree-(m-1) Lagrange polynomial through the m nearest
/// samples. Errors when z lies outside the table.
fn lagrange_value(xs: &[f64], ys: &[f64], x: f64, m: usize) -> Result<f64> {
    let lo = window_start(xs, x, m)?;
    let mut acc = 0.0;
    for i in lo..lo + m {
        let mut term = ys[i];
        for j in lo..lo + m {
            if j != i {
                term *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += term;
    }
    Ok(acc)
}

/// Derivative of the local Lagrange polynomial at x.
fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64, m: usize) -> Result<f64> {
    let lo = window_start(xs, x, m)?;
    let mut acc = 0.0;
    for i in lo..lo + m {
        let mut dsum = 0.0;
        for k in lo..lo + m {
            if k == i {
                continue;
            }
            let mut prod = 1.0 / (xs[i] - xs[k]);
            for j in lo..lo + m {
                if j != i && j != k {
                    prod *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            dsum += prod;
        }
        acc += ys[i] * dsum;
    }
    Ok(acc)
}

fn window_start(xs: &[f64], x: f64, m: usize) -> Result<usize> {
    let n = xs.len();
    if x < xs[0] - 1e-12 || x > xs[n - 1] + 1e-12 {
        return Err(Error::OutOfRange { z: x, min: xs[0], max: xs[n - 1] });
    }
    let j = xs.partition_point(|&v| v < x);
    Ok(j.saturating_sub(m / 2).min(n - m))
}
