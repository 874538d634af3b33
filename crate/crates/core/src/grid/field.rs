//! Nodal scalar and vector fields.

use std::ops::{Deref, DerefMut};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarField(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorField(pub [Vec<f64>; 2]);

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        ScalarField(v)
    }
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField(vec![0.0; n])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField(self.0.iter().map(|v| v * s).collect())
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &ScalarField) -> ScalarField {
        ScalarField(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        VectorField([vec![0.0; n], vec![0.0; n]])
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> [f64; 2]) -> Self {
        let mut v = VectorField::zeros(n);
        for i in 0..n {
            let [a, b] = f(i);
            v.0[0][i] = a;
            v.0[1][i] = b;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.0[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.0[0].is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.0[0][i], self.0[1][i]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: [f64; 2]) {
        self.0[0][i] = v[0];
        self.0[1][i] = v[1];
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.0[c]
    }

    /// Largest pointwise Euclidean length.
    pub fn max_abs(&self) -> f64 {
        (0..self.len()).fold(0.0_f64, |m, i| m.max(self.0[0][i].hypot(self.0[1][i])))
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField([
            self.0[0].iter().map(|v| v * s).collect(),
            self.0[1].iter().map(|v| v * s).collect(),
        ])
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &VectorField) -> VectorField {
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a + s * b).collect();
        VectorField([comb(&self.0[0], &other.0[0]), comb(&self.0[1], &other.0[1])])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Interleaved `[x0, y0, x1, y1, …]`.
    pub fn interleaved(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.at(i)).collect()
    }
}
