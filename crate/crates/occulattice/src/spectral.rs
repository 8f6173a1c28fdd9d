//! Green matrices of finite sets, their full symmetric eigendecomposition,
//! the Perron eigenvalue and limit constant, and the closed-form constants
//! for pairs, the unit sphere, and the unit ball under the simple random walk.

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::linalg::{jacobi_eigen, SymMatrix};
use crate::scalar::Scalar;
use crate::sites::SiteSet;
use rustfft::FftNum;

/// |A| x |A| matrix of Green values G(x_i - x_j); symmetric with constant
/// diagonal G(0) and every entry strictly positive.
#[derive(Clone, Debug)]
pub struct GreenMatrix<T: Scalar> {
    pub set: SiteSet,
    pub matrix: SymMatrix<T>,
    pub tol: T,
}

pub fn build_green_matrix<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
    set: &SiteSet,
) -> Result<GreenMatrix<T>> {
    let points = set.points();
    let n = points.len();
    let d = set.dimension();
    let mut diff = vec![0i64; d];
    let mut matrix = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            for a in 0..d {
                diff[a] = points[i][a] - points[j][a];
            }
            let g = evaluator.green(&diff)?;
            matrix.set(i, j, g);
            matrix.set(j, i, g);
        }
    }
    Ok(GreenMatrix { set: set.clone(), matrix, tol: evaluator.tol() })
}

/// Eigenvalues sorted descending, orthonormal eigenvectors with a fixed sign
/// convention, and (when an origin index is designated) the weights
/// h_j = (1, phi_j) phi_j(origin) and ratios f_j = (lambda_j - 1)/lambda_j.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T: Scalar> {
    pub lambdas: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub weights: Option<Vec<T>>,
    pub ratios: Vec<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn lambda_max(&self) -> T {
        self.lambdas[0]
    }

    pub fn size(&self) -> usize {
        self.lambdas.len()
    }
}

pub fn eigendecompose<T: Scalar>(
    m: &GreenMatrix<T>,
    origin_index: Option<usize>,
) -> Result<SpectralDecomposition<T>> {
    let eig = jacobi_eigen(&m.matrix)?;
    let n = m.matrix.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].partial_cmp(&eig.values[a]).unwrap());
    let lambdas: Vec<T> = order.iter().map(|&j| eig.values[j]).collect();
    let mut vectors: Vec<Vec<T>> = order.iter().map(|&j| eig.vectors[j].clone()).collect();

    // Perron vector positive; the rest signed by their first nonzero entry.
    for (j, v) in vectors.iter_mut().enumerate() {
        let pivot = if j == 0 {
            v[0]
        } else {
            *v.iter().find(|c| c.abs() > T::c(1e-12)).unwrap_or(&v[0])
        };
        if pivot < T::zero() {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
    }

    let ratios = lambdas.iter().map(|&l| (l - T::one()) / l).collect();
    let weights = origin_index.map(|o| {
        vectors
            .iter()
            .map(|v| {
                let ones: T = v.iter().cloned().sum();
                ones * v[o]
            })
            .collect()
    });
    Ok(SpectralDecomposition { lambdas, vectors, weights, ratios })
}

/// Largest eigenvalue of the Green matrix of `set`.
pub fn lambda_max<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
    set: &SiteSet,
) -> Result<T> {
    let m = build_green_matrix(evaluator, set)?;
    Ok(eigendecompose(&m, None)?.lambda_max())
}

/// The frequently-visited-set constant of a Perron eigenvalue lambda > 1:
/// theta* = log(lambda/(lambda-1)) and constant = 1/theta*.
#[derive(Clone, Copy, Debug)]
pub struct LimitConstant<T> {
    pub lambda: T,
    pub theta_star: T,
    pub constant: T,
}

pub fn limit_constant<T: Scalar>(lambda: T) -> Result<LimitConstant<T>> {
    if !(lambda > T::one()) {
        return Err(Error::LambdaNotAboveOne(lambda.as_f64()));
    }
    let theta_star = (lambda / (lambda - T::one())).ln();
    Ok(LimitConstant { lambda, theta_star, constant: T::one() / theta_star })
}

/// Closed form for A = {0, y}: lambda = G(0)(1 + t_y).
pub fn two_point_constant<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
    y: &[i64],
) -> Result<LimitConstant<T>> {
    if y.iter().all(|&c| c == 0) {
        return Err(Error::ZeroOffset);
    }
    let zero = vec![0i64; evaluator.walk().dimension()];
    let g0 = evaluator.green(&zero)?;
    let t = evaluator.hit_probability(y)?;
    limit_constant(g0 * (T::one() + t))
}

/// Closed form for the unit sphere under the simple random walk:
/// lambda = 2d(1 - gamma_d)/gamma_d.
pub fn sphere_constant<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
) -> Result<LimitConstant<T>> {
    assert!(
        evaluator.walk().is_simple_random_walk(),
        "sphere closed form holds for the simple random walk"
    );
    let d = T::c(evaluator.walk().dimension() as f64);
    let gamma = evaluator.escape_probability()?;
    limit_constant(T::c(2.0) * d * (T::one() - gamma) / gamma)
}

/// Closed form for the unit ball under the simple random walk, via
/// 1 - 1/lambda = (p + sqrt(p^2 + 2/d))/2 with p = 1 - 1/(2d(1 - gamma_d)).
pub fn ball_constant<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
) -> Result<LimitConstant<T>> {
    assert!(
        evaluator.walk().is_simple_random_walk(),
        "ball closed form holds for the simple random walk"
    );
    let d = T::c(evaluator.walk().dimension() as f64);
    let gamma = evaluator.escape_probability()?;
    let p = T::one() - T::one() / (T::c(2.0) * d * (T::one() - gamma));
    let f1 = (p + (p * p + T::c(2.0) / d).sqrt()) / T::c(2.0);
    limit_constant(T::one() / (T::one() - f1))
}

/// Both eigenvalues of G(0) * L with L = [[1, 2ds], [s, Lam]], s = 1 - gamma,
/// Lam = 2d(1 - gamma): the two-dimensional invariant block of the ball
/// matrix spanned by (delta_0, all-ones-on-the-sphere).
pub fn ball_reduction_eigenvalues<T: Scalar>(g0: T, gamma: T, d: usize) -> (T, T) {
    let two = T::c(2.0);
    let s = T::one() - gamma;
    let lam = two * T::c(d as f64) * s;
    let trace = T::one() + lam;
    let det = lam - two * T::c(d as f64) * s * s;
    let disc = (trace * trace - T::c(4.0) * det).sqrt();
    (g0 * (trace + disc) / two, g0 * (trace - disc) / two)
}

/// One row of the neighbor-bound report: both strict inequalities that make a
/// neighbor of a maximally visited point non-maximal.
#[derive(Clone, Debug)]
pub struct NeighborMargin<T> {
    pub y: Vec<i64>,
    pub t_y: T,
    /// (1 - gamma_d) - t_y^2
    pub margin_hit: T,
    /// -2/log(1 - gamma_d) - two_point_constant(y)
    pub margin_constant: T,
}

#[derive(Clone, Debug)]
pub struct NeighborBoundReport<T> {
    pub bound: T,
    pub rows: Vec<NeighborMargin<T>>,
    pub min_margin_hit: T,
    pub min_margin_constant: T,
}

/// Check t_y^2 < 1 - gamma_d and two-point constant < -2/log(1 - gamma_d)
/// for every 0 < |y| <= K (Euclidean).
pub fn neighbor_bound_check<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
    k: i64,
) -> Result<NeighborBoundReport<T>> {
    assert!(k >= 1);
    let d = evaluator.walk().dimension();
    let gamma = evaluator.escape_probability()?;
    let one_minus = T::one() - gamma;
    let bound = -T::c(2.0) / one_minus.ln();

    let mut rows = Vec::new();
    let mut y = vec![-k; d];
    loop {
        let norm2: i64 = y.iter().map(|c| c * c).sum();
        if norm2 != 0 && norm2 <= k * k {
            let t = evaluator.hit_probability(&y)?;
            let c = two_point_constant(evaluator, &y)?;
            rows.push(NeighborMargin {
                y: y.clone(),
                t_y: t,
                margin_hit: one_minus - t * t,
                margin_constant: bound - c.constant,
            });
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                let min_margin_hit =
                    rows.iter().map(|r| r.margin_hit).fold(T::max_value(), |a, b| a.min(b));
                let min_margin_constant =
                    rows.iter().map(|r| r.margin_constant).fold(T::max_value(), |a, b| a.min(b));
                return Ok(NeighborBoundReport { bound, rows, min_margin_hit, min_margin_constant });
            }
            axis -= 1;
            y[axis] += 1;
            if y[axis] <= k {
                break;
            }
            y[axis] = -k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_constant_arithmetic() {
        let c = limit_constant(2.0f64).unwrap();
        assert!((c.constant - 1.0 / 2.0f64.ln()).abs() < 1e-15);
        assert!((c.theta_star - 2.0f64.ln()).abs() < 1e-15);
        assert!(matches!(limit_constant(1.0f64), Err(Error::LambdaNotAboveOne(_))));
        assert!(matches!(limit_constant(0.5f64), Err(Error::LambdaNotAboveOne(_))));
    }

    #[test]
    fn limit_constant_monotone_to_zero() {
        // constant -> 0+ as lambda -> 1+, monotone increasing in lambda
        let mut prev = 0.0;
        for i in 1..60 {
            let lambda = 1.0 + i as f64 * 0.05;
            let c = limit_constant(lambda).unwrap().constant;
            assert!(c > prev);
            prev = c;
        }
        let tiny = limit_constant(1.0 + 1e-9).unwrap().constant;
        assert!(tiny > 0.0 && tiny < 1e-8);
    }

    #[test]
    fn ball_reduction_against_hand_quadratic() {
        // with gamma = 0.659462670449, d = 3, G0 = 1/gamma
        let gamma = 0.659462670449f64;
        let g0 = 1.0 / gamma;
        let (hi, lo) = ball_reduction_eigenvalues(g0, gamma, 3);
        // the large root must reproduce the (p + sqrt(p^2 + 2/d))/2 form
        let lam = 6.0 * (1.0 - gamma);
        let p = 1.0 - 1.0 / lam;
        let f1 = (p + (p * p + 2.0 / 3.0).sqrt()) / 2.0;
        assert!(((hi - 1.0) / hi - f1).abs() < 1e-12, "hi={hi}");
        assert!(lo > 0.5 && lo < 1.0, "lo={lo}");
    }
}
