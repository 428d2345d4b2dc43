//! Symmetric tridiagonal factorization.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]` at `(i, i+1)` and `(i+1, i)`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// LDLᵀ factorization. With `require_positive`, any pivot `≤ 0` is reported as
    /// loss of positive definiteness; otherwise only exactly-zero pivots fail.
    pub fn factor(&self, require_positive: bool) -> Result<Ldlt> {
        let n = self.len();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        let mut prev = self.diag[0];
        for i in 0..n {
            if i > 0 {
                let li = self.off[i - 1] / prev;
                l.push(li);
                prev = self.diag[i] - li * self.off[i - 1];
            }
            if require_positive && !(prev > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    node: i,
                    pivot: prev,
                });
            }
            if prev == 0.0 || !prev.is_finite() {
                return Err(Error::Singular(i));
            }
            d.push(prev);
        }
        Ok(Ldlt { d, l })
    }
}

#[derive(Debug, Clone)]
pub struct Ldlt {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl Ldlt {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = rhs.to_vec();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        x
    }

    /// Number of negative pivots, i.e. the inertia index of the matrix.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_random_spd_system() {
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + (i % 3) as f64).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -1.0 - 0.1 * (i % 5) as f64).collect();
        let m = SymTridiag::new(diag, off);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.apply(&x);
        let y = m.factor(true).unwrap().solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn detects_indefinite() {
        let m = SymTridiag::new(vec![1.0, -1.0, 2.0], vec![0.5, 0.5]);
        assert!(matches!(
            m.factor(true),
            Err(Error::NotPositiveDefinite { node: 1, .. })
        ));
        let f = m.factor(false).unwrap();
        assert_eq!(f.negative_pivots(), 1);
    }
}
