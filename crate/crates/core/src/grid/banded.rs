//! Sparse assembly and a banded LU with partial pivoting.

use crate::error::{Error, Result};

/// Compressed sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; duplicate columns within a row are summed.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    n: usize,
    m: CsrMatrix,
    row: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder {
            n,
            m: CsrMatrix {
                n,
                offsets: vec![0],
                cols: Vec::new(),
                vals: Vec::new(),
            },
            row: Vec::new(),
        }
    }

    /// Adds `val` at `(current row, col)`.
    #[inline]
    pub fn add(&mut self, col: usize, val: f64) {
        debug_assert!(col < self.n);
        self.row.push((col, val));
    }

    pub fn finish_row(&mut self) {
        self.row.sort_unstable_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in &self.row {
            if last == Some(c) {
                *self.m.vals.last_mut().expect("previous entry exists") += v;
            } else {
                self.m.cols.push(c);
                self.m.vals.push(v);
                last = Some(c);
            }
        }
        self.row.clear();
        self.m.offsets.push(self.m.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        assert!(self.row.is_empty(), "unfinished row");
        self.m
    }
}

impl CsrMatrix {
    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn nrows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row_dot(i, x)).collect()
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * x[c]).sum()
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.nrows() {
            for (c, v) in self.row(i) {
                if v == 0.0 {
                    continue;
                }
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a square banded matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    // row i holds columns i - kl ..= i + kl + ku
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::InvalidInput("banded LU needs a square matrix".into()));
        }
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut upper = vec![0.0; n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut scale = 0.0_f64;
        for i in 0..n {
            for (c, v) in a.row(i).filter(|e| e.1 != 0.0) {
                upper[idx(i, c)] += v;
                scale = scale.max(v.abs());
            }
        }
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = upper[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = upper[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::SolverDiverged {
                    what: "banded LU",
                    detail: format!("zero pivot at column {k}"),
                });
            }
            pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    upper.swap(idx(k, c), idx(p, c));
                }
            }
            let piv = upper[idx(k, k)];
            for r in k + 1..=last_row {
                let m = upper[idx(r, k)] / piv;
                lower[k * kl + (r - k - 1)] = m;
                upper[idx(r, k)] = 0.0;
                if m == 0.0 {
                    continue;
                }
                for c in k + 1..=last_col {
                    upper[idx(r, c)] -= m * upper[idx(k, c)];
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            width,
            upper,
            lower,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
                }
            }
        }
        let ku_total = w - kl - 1;
        for k in (0..n).rev() {
            let row = &self.upper[k * w..(k + 1) * w];
            let mut s = b[k];
            for c in k + 1..=(k + ku_total).min(n - 1) {
                s -= row[c + kl - k] * b[c];
            }
            b[k] = s / row[kl];
        }
    }
}

/// A factored sparse system that refines its solutions against the original
/// matrix until the relative residual meets `tolerance`.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    matrix: CsrMatrix,
    lu: BandLu,
    pub tolerance: f64,
    what: &'static str,
    norm: f64,
}

impl DirectSolver {
    pub fn new(matrix: CsrMatrix, what: &'static str) -> Result<Self> {
        let lu = BandLu::factor(&matrix).map_err(|e| match e {
            Error::SolverDiverged { detail, .. } => Error::SolverDiverged { what, detail },
            other => other,
        })?;
        let norm = (0..matrix.nrows())
            .map(|i| matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        Ok(DirectSolver {
            matrix,
            lu,
            tolerance: 1e-10,
            what,
            norm,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bnorm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut x = b.to_vec();
        self.lu.solve_in_place(&mut x);
        if bnorm == 0.0 {
            return Ok(x);
        }
        let (mut rel, mut best) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..6 {
            let ax = self.matrix.apply(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            // normwise backward error
            let xnorm = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            rel = r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (self.norm * xnorm + bnorm);
            if !rel.is_finite() {
                break;
            }
            // refine until the residual reaches rounding or stops shrinking
            if rel < f64::EPSILON || (rel < self.tolerance * 1e-2 && rel > 0.5 * best) {
                return Ok(x);
            }
            best = best.min(rel);
            self.lu.solve_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
        }
        if rel < self.tolerance {
            Ok(x)
        } else {
            Err(Error::SolverDiverged {
                what: self.what,
                detail: format!("relative residual {rel:e} after refinement"),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> (CsrMatrix, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = vec![vec![0.0; n]; n];
        let mut b = CsrBuilder::new(n);
        for (i, row) in dense.iter_mut().enumerate() {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so pivoting matters
                let v = if i == j { 0.1 * rng.random::<f64>() } else { rng.random::<f64>() - 0.5 };
                row[j] = v;
                b.add(j, v);
            }
            b.finish_row();
        }
        (b.build(), dense)
    }

    #[test]
    fn solves_against_dense_product() {
        let (m, dense) = random_banded(60, 4, 7, 3);
        assert_eq!(m.bandwidths(), (4, 7));
        let x: Vec<f64> = (0..60).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = dense.iter().map(|r| r.iter().zip(&x).map(|(a, x)| a * x).sum()).collect();
        let s = DirectSolver::new(m, "test").unwrap();
        let y = s.solve(&b).unwrap();
        let err = x.iter().zip(&y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = CsrBuilder::new(3);
        b.add(0, 1.0);
        b.finish_row();
        b.add(0, 2.0);
        b.finish_row();
        b.add(2, 1.0);
        b.finish_row();
        assert!(matches!(DirectSolver::new(b.build(), "x"), Err(Error::SolverDiverged { .. })));
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let mut b = CsrBuilder::new(2);
        b.add(1, 1.0);
        b.add(0, 2.0);
        b.add(1, 3.0);
        b.finish_row();
        b.add(1, 1.0);
        b.finish_row();
        let m = b.build();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (1, 4.0)]);
    }
}
