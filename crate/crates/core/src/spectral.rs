//! Periodic spectral operators on an n×n grid (row index = y, column = x).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// FFT plans and wavenumbers for an n×n periodic grid of side `period`.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    period: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers 2πk/period in FFT order.
    wave: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.n)
            .field("period", &self.period)
            .finish()
    }
}

impl Spectral {
    pub fn new(n: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wave = (0..n)
            .map(|k| {
                let k = if k <= n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                2.0 * PI * k / period
            })
            .collect();
        Spectral {
            n,
            period,
            forward,
            inverse,
            wave,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Largest eigenvalue of the discrete spectral −Δ.
    pub fn max_eigenvalue(&self) -> f64 {
        let k = PI * self.n as f64 / self.period;
        2.0 * k * k
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n * self.n);
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut coeffs, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    /// Apply a real Fourier multiplier `m(kx, ky)` (angular wavenumbers).
    pub fn multiply<M: Fn(f64, f64) -> f64>(&self, values: &[f64], m: M) -> Vec<f64> {
        let n = self.n;
        let mut c = self.forward(values);
        for i in 0..n {
            let ky = self.wave[i];
            for j in 0..n {
                c[i * n + j] *= m(self.wave[j], ky);
            }
        }
        self.inverse_real(c)
    }

    /// Spectral Laplacian Δ.
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.multiply(values, |kx, ky| -(kx * kx + ky * ky))
    }

    /// (−Δ + c)^{-1}; the zero mode is dropped when `c == 0`.
    pub fn solve_shifted(&self, values: &[f64], c: f64) -> Vec<f64> {
        self.multiply(values, |kx, ky| {
            let s = kx * kx + ky * ky + c;
            if s == 0.0 {
                0.0
            } else {
                1.0 / s
            }
        })
    }

    /// Heat semigroup e^{tΔ}.
    pub fn heat(&self, values: &[f64], t: f64) -> Vec<f64> {
        self.multiply(values, |kx, ky| (-(kx * kx + ky * ky) * t).exp())
    }

    /// Samples of the trigonometric interpolant translated by `shift`,
    /// i.e. f(x - shift) at the grid nodes.
    pub fn translate(&self, values: &[f64], shift: (f64, f64)) -> Vec<f64> {
        let n = self.n;
        let mut c = self.forward(values);
        for i in 0..n {
            let ky = self.wave[i];
            for j in 0..n {
                let phase = -(self.wave[j] * shift.0 + ky * shift.1);
                c[i * n + j] *= Complex64::from_polar(1.0, phase);
            }
        }
        self.inverse_real(c)
    }
}
