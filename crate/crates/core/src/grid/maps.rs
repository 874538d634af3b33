//! Smooth maps from the reference unit disk onto tilde domains.

use num_complex::Complex64;

use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::spectral;

/// Position, Jacobian `∂x_m/∂X_b` and Hessians `∂²x_m/∂X_b∂X_c` of a map at
/// a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapJet {
    pub pos: [f64; 2],
    pub jac: Mat2,
    pub hess: [Mat2; 2],
}

pub trait DiskMap: std::fmt::Debug + Send + Sync {
    fn jet(&self, reference: [f64; 2]) -> MapJet;
}

fn complex_jet(f: Complex64, df: Complex64, d2f: Complex64) -> MapJet {
    // holomorphic in W = X + iY: ∂_X = d/dW, ∂_Y = i d/dW
    let (fx, fy) = (df, Complex64::i() * df);
    let (fxx, fxy, fyy) = (d2f, Complex64::i() * d2f, -d2f);
    MapJet {
        pos: [f.re, f.im],
        jac: Mat2::new(fx.re, fy.re, fx.im, fy.im),
        hess: [Mat2::new(fxx.re, fxy.re, fxy.re, fyy.re), Mat2::new(fxx.im, fxy.im, fxy.im, fyy.im)],
    }
}

/// `x = center + diag(a, b) X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
}

impl Ellipse {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Ellipse {
            center,
            semi_axes: [radius, radius],
        }
    }
}

impl DiskMap for Ellipse {
    fn jet(&self, r: [f64; 2]) -> MapJet {
        MapJet {
            pos: [self.center[0] + self.semi_axes[0] * r[0], self.center[1] + self.semi_axes[1] * r[1]],
            jac: Mat2::new(self.semi_axes[0], 0.0, 0.0, self.semi_axes[1]),
            hess: [Mat2::ZERO, Mat2::ZERO],
        }
    }
}

/// `z̃ = exp(μ + aX + i bY)`, a bean-shaped domain whose square has two tips
/// on the negative axis, touching when `b = π/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDisk {
    pub mu: f64,
    pub a: f64,
    pub b: f64,
}

impl DiskMap for LogDisk {
    fn jet(&self, r: [f64; 2]) -> MapJet {
        let e = Complex64::new(self.mu + self.a * r[0], self.b * r[1]).exp();
        let pos = [e.re, e.im];
        // ∂_X = a e, ∂_Y = i b e
        let ex = self.a * e;
        let ey = Complex64::i() * self.b * e;
        let exx = self.a * self.a * e;
        let exy = Complex64::i() * self.a * self.b * e;
        let eyy = -self.b * self.b * e;
        MapJet {
            pos,
            jac: Mat2::new(ex.re, ey.re, ex.im, ey.im),
            hess: [Mat2::new(exx.re, exy.re, exy.re, eyy.re), Mat2::new(exx.im, exy.im, exy.im, eyy.im)],
        }
    }
}

/// Harmonic extension of a boundary curve given by its Fourier series:
/// `x(ρ, θ) = Σ c_k ρ^|k| e^{ikθ}` per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicDisk {
    // complex coefficient of W^k (k ≥ 0) and of conj(W)^k (k ≥ 1) for z = x + iy
    holo: Vec<Complex64>,
    anti: Vec<Complex64>,
}

impl HarmonicDisk {
    /// From samples of a counter-clockwise boundary curve, parameter `θ`.
    pub fn from_curve(c: &ClosedCurve) -> Result<Self> {
        if (c.period() - std::f64::consts::TAU).abs() > 1e-12 {
            return Err(Error::InvalidInput("harmonic extension expects period 2π".into()));
        }
        let xs: Vec<f64> = c.points().iter().map(|p| p.x).collect();
        let ys: Vec<f64> = c.points().iter().map(|p| p.y).collect();
        let (cx, cy) = (spectral::dft(&xs), spectral::dft(&ys));
        let n = c.len();
        let kmax = (n - 1) / 2;
        let mut holo = vec![Complex64::new(0.0, 0.0); kmax + 1];
        let mut anti = vec![Complex64::new(0.0, 0.0); kmax + 1];
        // z = Σ_k (cx_k + i cy_k) e^{ikθ}; e^{ikθ} ρ^k = W^k, e^{-ikθ} ρ^k = conj(W)^k
        for k in 0..=kmax {
            holo[k] = cx[k] + Complex64::i() * cy[k];
            if k > 0 {
                anti[k] = cx[n - k] + Complex64::i() * cy[n - k];
            }
        }
        Ok(HarmonicDisk { holo, anti })
    }
}

impl DiskMap for HarmonicDisk {
    fn jet(&self, r: [f64; 2]) -> MapJet {
        let w = Complex64::new(r[0], r[1]);
        let wb = w.conj();
        let zero = Complex64::new(0.0, 0.0);
        let (mut f, mut fw, mut fww) = (zero, zero, zero);
        let (mut g, mut gw, mut gww) = (zero, zero, zero);
        let powers = |base: Complex64, n: usize| {
            let mut p = Vec::with_capacity(n + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=n {
                p.push(acc);
                acc *= base;
            }
            p
        };
        let n = self.holo.len();
        let pw = powers(w, n);
        let pb = powers(wb, n);
        for k in 0..n {
            let kf = k as f64;
            f += self.holo[k] * pw[k];
            g += self.anti[k] * pb[k];
            if k >= 1 {
                fw += self.holo[k] * kf * pw[k - 1];
                gw += self.anti[k] * kf * pb[k - 1];
            }
            if k >= 2 {
                fww += self.holo[k] * kf * (kf - 1.0) * pw[k - 2];
                gww += self.anti[k] * kf * (kf - 1.0) * pb[k - 2];
            }
        }
        // z = f(W) + g(conj W): ∂_X = f' + g', ∂_Y = i f' − i g'
        let i = Complex64::i();
        let zx = fw + gw;
        let zy = i * fw - i * gw;
        let zxx = fww + gww;
        let zxy = i * fww - i * gww;
        let zyy = -fww - gww;
        let z = f + g;
        MapJet {
            pos: [z.re, z.im],
            jac: Mat2::new(zx.re, zy.re, zx.im, zy.im),
            hess: [Mat2::new(zxx.re, zxy.re, zxy.re, zyy.re), Mat2::new(zxx.im, zxy.im, zxy.im, zyy.im)],
        }
    }
}

/// A holomorphic map given by a closure returning `f`, `f'` and `f''`.
pub struct Conformal<F: Fn(Complex64) -> [Complex64; 3] + Send + Sync>(pub F);

impl<F: Fn(Complex64) -> [Complex64; 3] + Send + Sync> std::fmt::Debug for Conformal<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Conformal(..)")
    }
}

impl<F: Fn(Complex64) -> [Complex64; 3] + Send + Sync> DiskMap for Conformal<F> {
    fn jet(&self, r: [f64; 2]) -> MapJet {
        let [v, d, dd] = (self.0)(Complex64::new(r[0], r[1]));
        complex_jet(v, d, dd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::PlanePoint;

    fn check_jet(m: &dyn DiskMap, r: [f64; 2]) {
        let h = 1e-5;
        let j = m.jet(r);
        for b in 0..2 {
            let mut p = r;
            let mut q = r;
            p[b] += h;
            q[b] -= h;
            let (jp, jq) = (m.jet(p), m.jet(q));
            for mm in 0..2 {
                let d = (jp.pos[mm] - jq.pos[mm]) / (2.0 * h);
                assert!((d - j.jac.get(mm, b)).abs() < 1e-8, "jac {mm}{b}");
                for c in 0..2 {
                    let d2 = (jp.jac.get(mm, c) - jq.jac.get(mm, c)) / (2.0 * h);
                    assert!((d2 - j.hess[mm].get(b, c)).abs() < 1e-7, "hess {mm}{b}{c}");
                }
            }
        }
    }

    #[test]
    fn jets_match_differences() {
        check_jet(&Ellipse { center: [2.0, 0.0], semi_axes: [0.3, 0.5] }, [0.2, -0.4]);
        check_jet(&LogDisk { mu: 0.0, a: 0.4, b: 1.2 }, [0.3, 0.6]);
        let c = ClosedCurve::from_fn(32, |t| {
            PlanePoint::new(2.0 + 0.5 * t.cos() + 0.05 * (2.0 * t).cos(), 0.4 * t.sin())
        })
        .unwrap();
        let h = HarmonicDisk::from_curve(&c).unwrap();
        check_jet(&h, [0.3, -0.5]);
        // boundary reproduced
        let j = h.jet([(0.7_f64).cos(), (0.7_f64).sin()]);
        assert!((j.pos[0] - (2.0 + 0.5 * 0.7_f64.cos() + 0.05 * 1.4_f64.cos())).abs() < 1e-13);
        check_jet(&Conformal(|w: Complex64| [w + 0.1 * w * w, 1.0 + 0.2 * w, Complex64::new(0.2, 0.0)]), [0.1, 0.5]);
    }
}
