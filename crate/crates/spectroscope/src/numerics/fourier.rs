//! Discrete Fourier analysis of periodic vector signals on a uniform grid
//! over one drive period.
//!
//! Floquet modes are expanded as `u(t) = sum_k e^{i k w t} u_k`; the discrete
//! transform on an `N`-point grid recovers `u_k = (1/N) sum_j u(t_j)
//! e^{-i k w t_j}`, and Parseval's identity ties `sum_k ||u_k||^2` to the
//! time-averaged squared norm.

use thiserror::Error;

use super::linalg::CVec4;
use super::C64;

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("n_samples must be a power of two >= 4, got {0}")]
    BadGridSize(usize),
    #[error("drive frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error("sample count {got} does not match grid size {expect}")]
    SampleCountMismatch { got: usize, expect: usize },
    #[error("harmonic range [{k_min}, {k_max}] exceeds the grid Nyquist order {nyquist}")]
    BeyondNyquist { k_min: i64, k_max: i64, nyquist: i64 },
    #[error("empty harmonic range [{k_min}, {k_max}]")]
    EmptyRange { k_min: i64, k_max: i64 },
}

/// Uniform sampling of one period `T = 2 pi / omega`.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    omega: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(omega: f64, n_samples: usize) -> Result<Self, FourierError> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(FourierError::BadFrequency(omega));
        }
        if n_samples < 4 || !n_samples.is_power_of_two() {
            return Err(FourierError::BadGridSize(n_samples));
        }
        Ok(TimeGrid { omega, n: n_samples })
    }

    /// Default grid for a harmonic cutoff: power of two with at least four
    /// samples per retained harmonic, never below 1024.
    pub fn for_cutoff(omega: f64, k_max: i64) -> Result<Self, FourierError> {
        let need = (4 * k_max.max(1) as usize).next_power_of_two();
        TimeGrid::new(omega, need.max(1024))
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn time(&self, j: usize) -> f64 {
        self.period() * j as f64 / self.n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    pub fn nyquist(&self) -> i64 {
        (self.n / 2) as i64
    }
}

/// Fourier components over a contiguous harmonic window.
#[derive(Clone, Debug)]
pub struct FourierTable {
    k_min: i64,
    coeffs: Vec<CVec4>,
}

impl FourierTable {
    pub fn from_coeffs(k_min: i64, coeffs: Vec<CVec4>) -> Self {
        FourierTable { k_min, coeffs }
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.coeffs.len() as i64 - 1
    }

    /// Component at harmonic `k`; zero outside the stored window.
    pub fn get(&self, k: i64) -> CVec4 {
        if k < self.k_min || k > self.k_max() {
            CVec4::zeros()
        } else {
            self.coeffs[(k - self.k_min) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &CVec4)> {
        self.coeffs.iter().enumerate().map(move |(j, c)| (self.k_min + j as i64, c))
    }

    /// `sum_k ||u_k||^2` over the stored window.
    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_squared()).sum()
    }

    /// Resynthesize `u(t) = sum_k e^{i k w t} u_k`.
    pub fn synthesize(&self, omega: f64, t: f64) -> CVec4 {
        let mut out = CVec4::zeros();
        for (k, c) in self.iter() {
            let phase = C64::new(0.0, k as f64 * omega * t).exp();
            out += c * phase;
        }
        out
    }
}

/// Forward transform `u_k = (1/N) sum_j u(t_j) e^{-i k w t_j}` for `k` in
/// `[k_min, k_max]`. Windows past the grid Nyquist order are rejected.
pub fn fourier_components(
    samples: &[CVec4],
    grid: &TimeGrid,
    k_min: i64,
    k_max: i64,
) -> Result<FourierTable, FourierError> {
    if samples.len() != grid.n_samples() {
        return Err(FourierError::SampleCountMismatch {
            got: samples.len(),
            expect: grid.n_samples(),
        });
    }
    if k_min > k_max {
        return Err(FourierError::EmptyRange { k_min, k_max });
    }
    let nyq = grid.nyquist();
    if k_min < -nyq || k_max >= nyq {
        return Err(FourierError::BeyondNyquist { k_min, k_max, nyquist: nyq });
    }
    let n = grid.n_samples();
    let base = -2.0 * std::f64::consts::PI / n as f64;
    let mut coeffs = Vec::with_capacity((k_max - k_min + 1) as usize);
    for k in k_min..=k_max {
        let mut acc = CVec4::zeros();
        for (j, s) in samples.iter().enumerate() {
            // e^{-i k w t_j} = e^{-2 pi i k j / N}
            let phase = C64::new(0.0, base * (k * j as i64) as f64).exp();
            acc += s * phase;
        }
        coeffs.push(acc / C64::new(n as f64, 0.0));
    }
    Ok(FourierTable::from_coeffs(k_min, coeffs))
}

/// Time-averaged squared norm `(1/N) sum_j ||u(t_j)||^2`.
pub fn mean_square_norm(samples: &[CVec4]) -> f64 {
    samples.iter().map(|s| s.norm_squared()).sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bessel::bessel_j;
    use crate::numerics::linalg::c64;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_signal_has_only_dc() {
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let v = CVec4::new(c64(0.3, -0.1), c64(0.0, 0.9), c64(1.0, 0.0), c64(-0.2, 0.4));
        let samples = vec![v; 64];
        let table = fourier_components(&samples, &grid, -8, 8).unwrap();
        for (k, c) in table.iter() {
            if k == 0 {
                assert!((c - v).norm() < 1e-13);
            } else {
                assert!(c.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_anger_bessel_weights() {
        // u(t) = e^{i a sin(w t)} e_1 has harmonics J_k(a).
        let omega = 1.0;
        let a = 5.0;
        let grid = TimeGrid::new(omega, 1024).unwrap();
        let samples: Vec<CVec4> = grid
            .times()
            .iter()
            .map(|&t| {
                let mut v = CVec4::zeros();
                v[0] = c64(0.0, a * (omega * t).sin()).exp();
                v
            })
            .collect();
        let table = fourier_components(&samples, &grid, -40, 40).unwrap();
        for k in -40..=40i64 {
            assert_abs_diff_eq!(table.get(k)[0].re, bessel_j(k, a), epsilon = 1e-9);
            assert!(table.get(k)[0].im.abs() < 1e-9);
        }
    }

    #[test]
    fn band_limited_round_trip_and_parseval() {
        let omega = 0.7;
        let grid = TimeGrid::new(omega, 256).unwrap();
        // Deterministic pseudo-random band-limited coefficients.
        let mut s = 42u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let k_band = 20i64;
        let coeffs: Vec<CVec4> = (-k_band..=k_band)
            .map(|_| CVec4::from_fn(|_, _| c64(next(), next())))
            .collect();
        let truth = FourierTable::from_coeffs(-k_band, coeffs);
        let samples: Vec<CVec4> =
            grid.times().iter().map(|&t| truth.synthesize(omega, t)).collect();

        let table = fourier_components(&samples, &grid, -k_band, k_band).unwrap();
        for k in -k_band..=k_band {
            assert!((table.get(k) - truth.get(k)).norm() < 1e-10);
        }
        // Round-trip resynthesis.
        for (j, &t) in grid.times().iter().enumerate().step_by(17) {
            assert!((table.synthesize(omega, t) - samples[j]).norm() < 1e-10);
        }
        // Parseval over the band (signal is exactly band-limited).
        assert_abs_diff_eq!(table.power(), mean_square_norm(&samples), epsilon = 1e-10);
    }

    #[test]
    fn rejects_beyond_nyquist() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let samples = vec![CVec4::zeros(); 64];
        assert!(matches!(
            fourier_components(&samples, &grid, -40, 10),
            Err(FourierError::BeyondNyquist { .. })
        ));
        assert!(matches!(
            fourier_components(&samples, &grid, 0, 32),
            Err(FourierError::BeyondNyquist { .. })
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 96).is_err());
        assert!(TimeGrid::new(0.0, 64).is_err());
        assert!(TimeGrid::new(-1.0, 64).is_err());
        assert!(TimeGrid::for_cutoff(1.0, 35).unwrap().n_samples() >= 1024);
        assert!(TimeGrid::for_cutoff(1.0, 600).unwrap().n_samples() >= 2400);
    }
}
