//! Complex wavefunction samples on a polar grid, with norm and observable
//! accessors shared by the analytic synthesis and the PDE oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StateGrid {
    /// Strictly increasing radial samples (> 0).
    pub rho: Vec<f64>,
    /// Uniform angular samples on [0, 2 pi).
    pub phi: Vec<f64>,
    /// Row-major amplitudes: `values[i * phi.len() + k]` at (rho_i, phi_k).
    pub values: Vec<Complex64>,
    pub z: f64,
}

impl StateGrid {
    pub fn new(rho: Vec<f64>, phi: Vec<f64>, values: Vec<Complex64>, z: f64) -> Result<Self> {
        if rho.is_empty() || phi.is_empty() || values.len() != rho.len() * phi.len() {
            return Err(Error::GridMismatch("empty grid or wrong value count".into()));
        }
        if rho[0] <= 0.0 || rho.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("rho grid must be positive and increasing".into()));
        }
        let dphi = 2.0 * std::f64::consts::PI / phi.len() as f64;
        for (k, &p) in phi.iter().enumerate() {
            if (p - k as f64 * dphi).abs() > 1e-9 {
                return Err(Error::GridMismatch("phi grid must be uniform on [0, 2pi)".into()));
            }
        }
        Ok(Self { rho, phi, values, z })
    }

    /// Uniform angular grid with `n` samples.
    pub fn uniform_phi(n: usize) -> Vec<f64> {
        let dphi = 2.0 * std::f64::consts::PI / n as f64;
        (0..n).map(|k| k as f64 * dphi).collect()
    }

    pub fn at(&self, i: usize, k: usize) -> Complex64 {
        self.values[i * self.phi.len() + k]
    }

    /// Radial cell widths (midpoint cells, clipped at the axis).
    pub fn radial_weights(&self) -> Vec<f64> {
        let n = self.rho.len();
        let mut w = vec![0.0; n];
        for i in 0..n {
            let lo = if i == 0 {
                (self.rho[0] - 0.5 * (self.rho[1] - self.rho[0])).max(0.0)
            } else {
                0.5 * (self.rho[i - 1] + self.rho[i])
            };
            let hi = if i == n - 1 {
                self.rho[n - 1] + 0.5 * (self.rho[n - 1] - self.rho[n - 2])
            } else {
                0.5 * (self.rho[i] + self.rho[i + 1])
            };
            w[i] = hi - lo;
        }
        w
    }

    /// int |psi|^2 rho drho dphi by the grid quadrature.
    pub fn norm_sqr(&self) -> f64 {
        let wr = self.radial_weights();
        let dphi = 2.0 * std::f64::consts::PI / self.phi.len() as f64;
        let mut acc = 0.0;
        for (i, (&r, &w)) in self.rho.iter().zip(&wr).enumerate() {
            let mut ring = 0.0;
            for k in 0..self.phi.len() {
                ring += self.at(i, k).norm_sqr();
            }
            acc += ring * r * w;
        }
        acc * dphi
    }

    /// int rho^2 |psi|^2 / norm.
    pub fn mean_rho2(&self) -> f64 {
        let wr = self.radial_weights();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&r, &w)) in self.rho.iter().zip(&wr).enumerate() {
            let mut ring = 0.0;
            for k in 0..self.phi.len() {
                ring += self.at(i, k).norm_sqr();
            }
            num += ring * r * r * r * w;
            den += ring * r * w;
        }
        num / den
    }

    /// Grid-based <L_z> by angular Fourier analysis of every ring.
    pub fn mean_lz(&self) -> f64 {
        let m = self.phi.len();
        let wr = self.radial_weights();
        let tw: Vec<Complex64> = (0..m)
            .map(|j| {
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * j as f64 / m as f64)
            })
            .collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&r, &w)) in self.rho.iter().zip(&wr).enumerate() {
            for fm in 0..m {
                // DFT bin fm maps to OAM fm or fm - m
                let l = if fm <= m / 2 { fm as f64 } else { fm as f64 - m as f64 };
                let mut amp = Complex64::new(0.0, 0.0);
                for k in 0..m {
                    amp += self.at(i, k) * tw[(fm * k) % m];
                }
                let p = amp.norm_sqr() / (m * m) as f64;
                num += l * p * r * w;
                den += p * r * w;
            }
        }
        num / den
    }

    /// Check that halving the resolution moves the norm by < tol (relative).
    pub fn resolved(&self, tol: f64) -> Result<()> {
        if self.rho.len() < 8 || self.phi.len() < 8 {
            return Err(Error::UnresolvedGrid("grid too small to check".into()));
        }
        let coarse_rho: Vec<f64> = self.rho.iter().step_by(2).copied().collect();
        let coarse_phi_n = self.phi.len() / 2;
        let mut vals = Vec::with_capacity(coarse_rho.len() * coarse_phi_n);
        for i in (0..self.rho.len()).step_by(2) {
            for k in 0..coarse_phi_n {
                vals.push(self.at(i, 2 * k));
            }
        }
        let coarse =
            StateGrid::new(coarse_rho, Self::uniform_phi(coarse_phi_n), vals, self.z)?;
        let full = self.norm_sqr();
        let delta = (coarse.norm_sqr() - full).abs();
        if delta > tol * full.max(1e-300) {
            return Err(Error::UnresolvedGrid(format!(
                "norm moved by {delta:.3e} (rel {:.3e}) under coarsening",
                delta / full
            )));
        }
        Ok(())
    }

    /// Polar CSV `rho,phi,re,im`.
    pub fn to_polar_csv(&self) -> String {
        let mut out = String::from("rho,phi,re,im\n");
        for (i, &r) in self.rho.iter().enumerate() {
            for (k, &p) in self.phi.iter().enumerate() {
                let v = self.at(i, k);
                out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", r, p, v.re, v.im));
            }
        }
        out
    }

    /// Cartesian intensity CSV `x,y,intensity` on an n x n grid (bilinear
    /// resample in polar coordinates; zero outside the radial extent).
    pub fn to_cartesian_csv(&self, n: usize) -> String {
        let rmax = *self.rho.last().unwrap();
        let mut out = String::from("x,y,intensity\n");
        let m = self.phi.len();
        let dphi = 2.0 * std::f64::consts::PI / m as f64;
        for iy in 0..n {
            let y = -rmax + 2.0 * rmax * iy as f64 / (n - 1) as f64;
            for ix in 0..n {
                let x = -rmax + 2.0 * rmax * ix as f64 / (n - 1) as f64;
                let r = (x * x + y * y).sqrt();
                let mut val = 0.0;
                if r <= rmax {
                    let p = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
                    let fk = p / dphi;
                    let k0 = (fk.floor() as usize) % m;
                    let k1 = (k0 + 1) % m;
                    let tk = fk - fk.floor();
                    let i1 = self.rho.partition_point(|&rv| rv < r).min(self.rho.len() - 1);
                    let i0 = i1.saturating_sub(1);
                    let tr = if i1 == i0 {
                        0.0
                    } else {
                        ((r - self.rho[i0]) / (self.rho[i1] - self.rho[i0])).clamp(0.0, 1.0)
                    };
                    let interp = self.at(i0, k0) * ((1.0 - tr) * (1.0 - tk))
                        + self.at(i1, k0) * (tr * (1.0 - tk))
                        + self.at(i0, k1) * ((1.0 - tr) * tk)
                        + self.at(i1, k1) * (tr * tk);
                    val = interp.norm_sqr();
                }
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, y, val));
            }
        }
        out
    }

    pub fn same_mesh(&self, other: &Self) -> bool {
        self.rho.len() == other.rho.len()
            && self.phi.len() == other.phi.len()
            && self
                .rho
                .iter()
                .zip(&other.rho)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_grid(n_rho: usize, n_phi: usize) -> StateGrid {
        let rho: Vec<f64> = (0..n_rho).map(|i| (i as f64 + 0.5) * 10.0 / n_rho as f64).collect();
        let phi = StateGrid::uniform_phi(n_phi);
        let mut vals = Vec::with_capacity(n_rho * n_phi);
        for &r in &rho {
            // psi = rho e^{-rho^2/2} e^{i phi} / sqrt(pi): normalized LG(0,1)
            let amp = r * (-0.5 * r * r).exp() / std::f64::consts::PI.sqrt();
            for &p in &phi {
                vals.push(Complex64::from_polar(amp, p));
            }
        }
        StateGrid::new(rho, phi, vals, 0.0).unwrap()
    }

    #[test]
    fn norm_and_moments_of_lg01() {
        let g = gaussian_grid(512, 64);
        assert!((g.norm_sqr() - 1.0).abs() < 1e-6, "norm {}", g.norm_sqr());
        // <rho^2> of LG(0,1) at omega0 = 1 is 2
        assert!((g.mean_rho2() - 2.0).abs() < 1e-5, "mean rho2 {}", g.mean_rho2());
        assert!((g.mean_lz() - 1.0).abs() < 1e-9, "mean lz {}", g.mean_lz());
        g.resolved(1e-4).unwrap();
    }

    #[test]
    fn rejects_bad_grids() {
        let phi = StateGrid::uniform_phi(8);
        assert!(StateGrid::new(vec![0.0, 1.0], phi.clone(), vec![Complex64::default(); 16], 0.0)
            .is_err());
        assert!(StateGrid::new(vec![1.0, 0.5], phi.clone(), vec![Complex64::default(); 16], 0.0)
            .is_err());
        assert!(
            StateGrid::new(vec![0.5, 1.0], phi, vec![Complex64::default(); 3], 0.0).is_err()
        );
    }

    #[test]
    fn cartesian_resample_has_header_and_size() {
        let g = gaussian_grid(64, 32);
        let csv = g.to_cartesian_csv(21);
        assert_eq!(csv.lines().count(), 1 + 21 * 21);
        assert!(csv.starts_with("x,y,intensity\n"));
    }
}
