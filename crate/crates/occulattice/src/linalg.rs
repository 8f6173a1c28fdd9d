//! Dense symmetric eigensolver (cyclic Jacobi) and matrix-free power iteration.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense symmetric matrix, row-major full storage.
#[derive(Clone, Debug)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn apply(&self, v: &[T], out: &mut [T]) {
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// Eigenpairs of a symmetric matrix, unsorted.
#[derive(Clone, Debug)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    /// `vectors[j]` is the eigenvector for `values[j]`, unit norm.
    pub vectors: Vec<Vec<T>>,
}

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_TOL_FACTOR: f64 = 1e-13;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// 1e-13 times the input norm.
pub fn jacobi_eigen<T: Scalar>(m: &SymMatrix<T>) -> Result<Eigen<T>> {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let tol = T::c(JACOBI_TOL_FACTOR) * m.frobenius_norm();

    let off = |a: &[T]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                let x = a[i * n + j];
                s += x * x;
            }
        }
        (s + s).sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= tol {
            let values = (0..n).map(|i| a[i * n + i]).collect();
            let vectors = (0..n).map(|j| (0..n).map(|i| v[i * n + j]).collect()).collect();
            return Ok(Eigen { values, vectors });
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::c(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let tau = s / (T::one() + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        let new_p = akp - s * (akq + tau * akp);
                        let new_q = akq + s * (akp - tau * akq);
                        a[k * n + p] = new_p;
                        a[p * n + k] = new_p;
                        a[k * n + q] = new_q;
                        a[q * n + k] = new_q;
                    }
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp - s * (vkq + tau * vkp);
                    v[k * n + q] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }
    Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS })
}

/// Anything that can apply itself to a vector; used by the matrix-free path.
pub trait LinearOp<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[T], out: &mut [T]);
}

impl<T: Scalar> LinearOp<T> for SymMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, v: &[T], out: &mut [T]) {
        SymMatrix::apply(self, v, out)
    }
}

#[derive(Clone, Debug)]
pub struct PowerResult<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub iterations: usize,
}

/// Power iteration with Rayleigh-quotient stopping: successive quotients must
/// differ by less than `tol * |value|`.
pub fn power_iteration<T: Scalar>(
    op: &dyn LinearOp<T>,
    tol: T,
    max_iterations: usize,
) -> Result<PowerResult<T>> {
    let n = op.dim();
    let mut v = vec![T::one() / T::c(n as f64).sqrt(); n];
    let mut w = vec![T::zero(); n];
    let mut previous = T::zero();
    for it in 1..=max_iterations {
        op.apply(&v, &mut w);
        let rayleigh: T = v.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        let norm = w.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::PowerIterationStall { iterations: it });
        }
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if it > 1 && (rayleigh - previous).abs() <= tol * rayleigh.abs() {
            return Ok(PowerResult { value: rayleigh, vector: v, iterations: it });
        }
        previous = rayleigh;
    }
    Err(Error::PowerIterationStall { iterations: max_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &Eigen<f64>, n: usize) -> SymMatrix<f64> {
        SymMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum()
        })
    }

    #[test]
    fn jacobi_two_by_two_analytic() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 2.0 } else { 0.5 });
        let e = jacobi_eigen(&m).unwrap();
        let mut vals = e.values.clone();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.5).abs() < 1e-14);
        assert!((vals[1] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn jacobi_reconstruction_and_orthonormality() {
        // deterministic pseudo-random symmetric matrix
        let n = 12;
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = SymMatrix::from_fn(n, |_, _| next());
        let e = jacobi_eigen(&m).unwrap();
        let r = reconstruct(&e, n);
        let lam_max = e.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut max_dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                max_dev = max_dev.max((r.get(i, j) - m.get(i, j)).abs());
            }
        }
        assert!(max_dev <= 1e-10 * lam_max, "reconstruction deviation {max_dev}");
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = e.vectors[a].iter().zip(&e.vectors[b]).map(|(x, y)| x * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_matches_jacobi_on_positive_matrix() {
        let n = 8;
        let m = SymMatrix::from_fn(n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        let e = jacobi_eigen(&m).unwrap();
        let lam1 = e.values.iter().cloned().fold(f64::MIN, f64::max);
        let p = power_iteration(&m, 1e-12, 10_000).unwrap();
        assert!((p.value - lam1).abs() <= 1e-9 * lam1);
    }

    #[test]
    fn power_stall_reported() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(matches!(
            power_iteration(&m, 1e-30, 1),
            Err(Error::PowerIterationStall { .. })
        ));
    }
}
