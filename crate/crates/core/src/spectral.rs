//! Periodic Fourier helpers on uniform samples of `[0, period)`.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT of real samples, normalized so `c[0]` is the mean.
pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Inverse of [`dft`], real part.
pub fn idft(coeffs: &[Complex64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Signed integer wavenumber of DFT slot `k`.
#[inline]
pub fn wavenumber(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// `order`-th derivative of periodic samples with respect to the parameter.
/// The Nyquist mode is dropped for odd orders.
pub fn derivative(values: &[f64], period: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let mut c = dft(values);
    let w = 2.0 * std::f64::consts::PI / period;
    for (k, ck) in c.iter_mut().enumerate() {
        if n % 2 == 0 && 2 * k == n && order % 2 == 1 {
            *ck = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, w * wavenumber(k, n));
        *ck *= ik.powu(order);
    }
    idft(&c)
}

/// Trigonometric interpolant of periodic samples.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    coeffs: Vec<Complex64>,
    omega: f64,
}

impl TrigInterpolant {
    pub fn new(values: &[f64], period: f64) -> Self {
        TrigInterpolant {
            coeffs: dft(values),
            omega: 2.0 * std::f64::consts::PI / period,
        }
    }

    /// Value and first two derivatives at parameter `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let n = self.coeffs.len();
        let mut out = [0.0; 3];
        for (k, c) in self.coeffs.iter().enumerate() {
            let m = wavenumber(k, n);
            // the Nyquist mode is split evenly between ±m so the interpolant is real
            let nyquist = n % 2 == 0 && 2 * k == n;
            let terms = if nyquist { [(m, 0.5), (-m, 0.5)] } else { [(m, 1.0), (0.0, 0.0)] };
            for (m, wgt) in terms {
                if wgt == 0.0 {
                    continue;
                }
                let w = m * self.omega;
                let e = Complex64::from_polar(1.0, w * t) * *c * wgt;
                out[0] += e.re;
                out[1] -= w * e.im;
                out[2] -= w * w * e.re;
            }
        }
        out
    }

    /// Mean value (zeroth coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Antiderivative minus its linear part, evaluated at `t`: the periodic
    /// part of `∫₀ᵗ f`.
    pub fn periodic_integral(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let m = wavenumber(k, n);
            let weight = if n % 2 == 0 && 2 * k == n { 0.0 } else { 1.0 };
            let w = m * self.omega;
            let e = *c * weight / Complex64::new(0.0, w);
            acc += (e * (Complex64::from_polar(1.0, w * t) - 1.0)).re;
        }
        acc
    }
}
