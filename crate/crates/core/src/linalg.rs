//! Small dense symmetric matrices used for Hessians and coefficient matrices.
//!
//! Dimensions in this crate are small (1 to 3 in practice), so matrices are
//! stored row-major in a `Vec<f64>`. One- and two-dimensional spectra use
//! closed forms; larger ones go through `nalgebra`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

/// Eigen-decomposition with eigenvalues in ascending order; `vectors[i]` is the
/// unit eigenvector for `values[i]`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Builds from rows and checks symmetry to a relative tolerance of 1e-12.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::Dimension { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        let m = Self { n, data };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Unchecked constructor from row-major storage.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    /// `v ⊗ v`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn check_symmetric(&self) -> Result<()> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if worst > 1e-12 * scale {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `⟨X v, v⟩`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.get(i, j) * v[j];
            }
            s += row * v[i];
        }
        s
    }

    /// `tr(self · other)` for symmetric operands.
    pub fn frob_dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.data[0]],
            2 => {
                let (lo, hi) = eig2_values(self.data[0], self.data[1], self.data[3]);
                vec![lo, hi]
            }
            _ => {
                let mut v = self.to_nalgebra().symmetric_eigenvalues().as_slice().to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            }
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        match self.n {
            0 => Spectrum { values: vec![], vectors: vec![] },
            1 => Spectrum { values: vec![self.data[0]], vectors: vec![vec![1.0]] },
            2 => {
                let (a, b, d) = (self.data[0], self.data[1], self.data[3]);
                let (lo, hi) = eig2_values(a, b, d);
                let theta = 0.5 * (2.0 * b).atan2(a - d);
                let (s, c) = theta.sin_cos();
                Spectrum { values: vec![lo, hi], vectors: vec![vec![-s, c], vec![c, s]] }
            }
            n => {
                let eig = self.to_nalgebra().symmetric_eigen();
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
                Spectrum {
                    values: idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
                    vectors: idx
                        .iter()
                        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
                        .collect(),
                }
            }
        }
    }

    /// `Σ w_i v_i ⊗ v_i` for a spectrum's eigenvectors.
    pub fn from_spectrum(vectors: &[Vec<f64>], weights: &[f64]) -> Self {
        let n = vectors.first().map_or(0, |v| v.len());
        let mut m = Self::zeros(n);
        for (v, w) in vectors.iter().zip(weights) {
            for i in 0..n {
                for j in 0..n {
                    m.data[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        m
    }

    fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

fn eig2_values(a: f64, b: f64, d: f64) -> (f64, f64) {
    let m = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    (m - r, m + r)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_spectrum_reconstructs() {
        let m = SymMat::from_rows(&[vec![2.0, 0.7], vec![0.7, -1.0]]).unwrap();
        let s = m.spectrum();
        let back = SymMat::from_spectrum(&s.vectors, &s.values);
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(s.values[0] <= s.values[1]);
    }

    #[test]
    fn three_by_three_goes_through_nalgebra() {
        let m = SymMat::diag(&[3.0, -1.0, 2.0]);
        assert_eq!(m.eigenvalues(), vec![-1.0, 2.0, 3.0]);
        let s = m.spectrum();
        assert!((s.vectors[0][1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_rows_rejected() {
        assert!(matches!(
            SymMat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]),
            Err(Error::NotSymmetric(_))
        ));
    }
}
