//! Boundary-fitted polar discretization of tilde domains.
//!
//! Nodes sit on a polar grid of the reference unit disk with rings at
//! `ρ_i = (i + ½)Δρ`, the last ring on `ρ = 1`, mapped onto the domain by a
//! smooth disk map. Nodes are numbered ring by ring from the boundary inward,
//! which keeps the lower bandwidth of assembled systems to one ring.

pub mod banded;
pub mod domain;
pub mod field;
pub mod maps;

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use banded::{CsrBuilder, CsrMatrix};

pub use domain::DiscreteDomain;
pub use field::{ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolarGrid {
    nr: usize,
    nt: usize,
}

/// Reference-disk derivative stencils `∂_X, ∂_Y, ∂_XX, ∂_XY, ∂_YY`.
#[derive(Debug, Clone)]
pub struct ReferenceOps {
    pub d: [CsrMatrix; 2],
    pub dd: [CsrMatrix; 3],
}

impl PolarGrid {
    pub fn new(nr: usize, nt: usize) -> Result<Self> {
        if nr < 5 || nt < 8 || nt % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "polar grid needs nr ≥ 5 and even nt ≥ 8, got {nr}×{nt}"
            )));
        }
        Ok(PolarGrid { nr, nt })
    }

    pub fn rings(&self) -> usize {
        self.nr
    }

    pub fn angles(&self) -> usize {
        self.nt
    }

    pub fn len(&self) -> usize {
        self.nr * self.nt
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn drho(&self) -> f64 {
        1.0 / (self.nr as f64 - 0.5)
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.nt as f64
    }

    pub fn rho(&self, ring: usize) -> f64 {
        if ring == self.nr - 1 {
            1.0
        } else {
            (ring as f64 + 0.5) * self.drho()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.dtheta() * j as f64
    }

    #[inline]
    pub fn index(&self, ring: usize, j: usize) -> usize {
        (self.nr - 1 - ring) * self.nt + j % self.nt
    }

    #[inline]
    pub fn ring_of(&self, idx: usize) -> usize {
        self.nr - 1 - idx / self.nt
    }

    #[inline]
    pub fn angle_of(&self, idx: usize) -> usize {
        idx % self.nt
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        idx < self.nt
    }

    /// Boundary node indices, in increasing angle.
    pub fn boundary(&self) -> std::ops::Range<usize> {
        0..self.nt
    }

    pub fn reference_point(&self, idx: usize) -> [f64; 2] {
        let (r, t) = (self.rho(self.ring_of(idx)), self.theta(self.angle_of(idx)));
        [r * t.cos(), r * t.sin()]
    }

    /// Reference area attached to a node.
    pub fn cell_area(&self, idx: usize) -> f64 {
        let (ring, h) = (self.ring_of(idx), self.drho());
        if ring == self.nr - 1 {
            let inner = 1.0 - 0.5 * h;
            0.5 * (1.0 - inner * inner) * self.dtheta()
        } else {
            self.rho(ring) * h * self.dtheta()
        }
    }

    /// Radial stencil at `ring` as `(ring, half-turn shift, weight)`: the
    /// ring below the first is the first ring seen across the pole, and the
    /// boundary ring uses one-sided second-order closures.
    fn radial(&self, ring: usize, order: u32) -> Vec<(usize, usize, f64)> {
        let h = self.drho();
        let n = self.nr - 1;
        let half = self.nt / 2;
        if order == 1 {
            let s = 0.5 / h;
            if ring == n {
                vec![(n, 0, 3.0 * s), (n - 1, 0, -4.0 * s), (n - 2, 0, s)]
            } else if ring == 0 {
                vec![(1, 0, s), (0, half, -s)]
            } else {
                vec![(ring + 1, 0, s), (ring - 1, 0, -s)]
            }
        } else {
            let s = 1.0 / (h * h);
            if ring == n {
                vec![(n, 0, 2.0 * s), (n - 1, 0, -5.0 * s), (n - 2, 0, 4.0 * s), (n - 3, 0, -s)]
            } else if ring == 0 {
                vec![(1, 0, s), (0, 0, -2.0 * s), (0, half, s)]
            } else {
                vec![(ring + 1, 0, s), (ring, 0, -2.0 * s), (ring - 1, 0, s)]
            }
        }
    }

    fn angular(&self, order: u32) -> Vec<(isize, f64)> {
        let k = self.dtheta();
        if order == 1 {
            vec![(1, 0.5 / k), (-1, -0.5 / k)]
        } else {
            vec![(1, 1.0 / (k * k)), (0, -2.0 / (k * k)), (-1, 1.0 / (k * k))]
        }
    }

    fn shifted(&self, j: usize, by: isize) -> usize {
        (j as isize + by).rem_euclid(self.nt as isize) as usize
    }

    pub fn reference_ops(&self) -> ReferenceOps {
        let n = self.len();
        let mut b: Vec<CsrBuilder> = (0..5).map(|_| CsrBuilder::new(n)).collect();
        let a1 = self.angular(1);
        let a2 = self.angular(2);
        for idx in 0..n {
            let (ring, j) = (self.ring_of(idx), self.angle_of(idx));
            let (rho, th) = (self.rho(ring), self.theta(j));
            let (c, s) = (th.cos(), th.sin());
            let r1 = self.radial(ring, 1);
            let r2 = self.radial(ring, 2);
            // polar derivative rows as (node, weight) lists
            let f_r: Vec<(usize, f64)> = r1.iter().map(|&(i, sh, w)| (self.index(i, j + sh), w)).collect();
            let f_rr: Vec<(usize, f64)> = r2.iter().map(|&(i, sh, w)| (self.index(i, j + sh), w)).collect();
            let f_t: Vec<(usize, f64)> = a1.iter().map(|&(o, w)| (self.index(ring, self.shifted(j, o)), w)).collect();
            let f_tt: Vec<(usize, f64)> = a2.iter().map(|&(o, w)| (self.index(ring, self.shifted(j, o)), w)).collect();
            let mut f_rt = Vec::with_capacity(8);
            for &(i, sh, wr) in &r1 {
                for &(o, wt) in &a1 {
                    f_rt.push((self.index(i, self.shifted(j + sh, o)), wr * wt));
                }
            }
            let (cc, ss, cs, d) = (c * c, s * s, c * s, c * c - s * s);
            let (ir, ir2) = (1.0 / rho, 1.0 / (rho * rho));
            let rows: [Vec<(&[(usize, f64)], f64)>; 5] = [
                vec![(&f_r, c), (&f_t, -s * ir)],
                vec![(&f_r, s), (&f_t, c * ir)],
                vec![(&f_rr, cc), (&f_r, ss * ir), (&f_tt, ss * ir2), (&f_rt, -2.0 * cs * ir), (&f_t, 2.0 * cs * ir2)],
                vec![(&f_rr, cs), (&f_r, -cs * ir), (&f_tt, -cs * ir2), (&f_rt, d * ir), (&f_t, -d * ir2)],
                vec![(&f_rr, ss), (&f_r, cc * ir), (&f_tt, cc * ir2), (&f_rt, 2.0 * cs * ir), (&f_t, -2.0 * cs * ir2)],
            ];
            for (builder, terms) in b.iter_mut().zip(rows.iter()) {
                for &(entries, coef) in terms {
                    for &(col, w) in entries {
                        builder.add(col, coef * w);
                    }
                }
                builder.finish_row();
            }
        }
        let mut it = b.into_iter().map(CsrBuilder::build);
        let mut next = || it.next().expect("five operators");
        let (dx, dy, dxx, dxy, dyy) = (next(), next(), next(), next(), next());
        ReferenceOps {
            d: [dx, dy],
            dd: [dxx, dxy, dyy],
        }
    }
}
