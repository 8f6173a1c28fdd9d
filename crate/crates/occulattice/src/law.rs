//! Exact law of the total occupation time of a finite set containing the
//! start point: P(J > u) = sum_j h_j f_j^u and
//! P(J = k) = sum_j h_j (1 - f_j) f_j^{k-1}.

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::scalar::{KahanSum, Scalar};
use crate::sites::SiteSet;
use crate::spectral::{build_green_matrix, eigendecompose, SpectralDecomposition};
use rustfft::FftNum;

/// Survival and pmf of the total occupation time, built from the spectral
/// decomposition of the Green matrix with the origin designated.
#[derive(Clone, Debug)]
pub struct OccupationLaw<T: Scalar> {
    decomposition: SpectralDecomposition<T>,
    weights: Vec<T>,
}

/// Build the law for a walk started at the origin, which must lie in `set`.
/// For a start point a elsewhere in A, translate the set by -a first.
pub fn occupation_law<T: Scalar + FftNum>(
    evaluator: &GreenEvaluator<T>,
    set: &SiteSet,
) -> Result<OccupationLaw<T>> {
    let origin = set.origin_index().ok_or(Error::OriginNotInSet)?;
    let matrix = build_green_matrix(evaluator, set)?;
    let decomposition = eigendecompose(&matrix, Some(origin))?;
    let weights = decomposition.weights.clone().expect("origin designated");
    Ok(OccupationLaw { decomposition, weights })
}

impl<T: Scalar> OccupationLaw<T> {
    pub fn decomposition(&self) -> &SpectralDecomposition<T> {
        &self.decomposition
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Compensated sum of the given per-eigenvalue terms, largest magnitude
    /// first; controls cancellation when weights have mixed signs.
    fn mixture_sum(&self, mut terms: Vec<T>) -> T {
        terms.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        let mut acc = KahanSum::new();
        for t in terms {
            acc.add(t);
        }
        acc.value()
    }

    /// P(J > u) = sum_j h_j f_j^u for integer u >= 0.
    pub fn survival(&self, u: u64) -> T {
        let terms: Vec<T> = self
            .weights
            .iter()
            .zip(&self.decomposition.ratios)
            .map(|(&h, &f)| h * powi(f, u))
            .collect();
        self.mixture_sum(terms)
    }

    /// P(J = k) = sum_j h_j (1 - f_j) f_j^{k-1} for integer k >= 1.
    pub fn pmf(&self, k: u64) -> T {
        assert!(k >= 1, "occupation total is at least 1 when the start is in A");
        let terms: Vec<T> = self
            .weights
            .iter()
            .zip(&self.decomposition.ratios)
            .map(|(&h, &f)| h * (T::one() - f) * powi(f, k - 1))
            .collect();
        self.mixture_sum(terms)
    }

    /// Geometric-tail weight and rate: (h_1, theta* = -log f_1).
    pub fn tail_asymptote(&self) -> (T, T) {
        (self.weights[0], -self.decomposition.ratios[0].ln())
    }
}

fn powi<T: Scalar>(base: T, exp: u64) -> T {
    let mut result = T::one();
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b;
        }
        b = b * b;
        e >>= 1;
    }
    result
}

/// The two surviving weights of the unit-ball law under the simple random
/// walk: (h for the Perron ratio, h for the negative ratio). All other
/// weights vanish.
pub fn ball_weights<T: Scalar + FftNum>(evaluator: &GreenEvaluator<T>) -> Result<(T, T)> {
    assert!(
        evaluator.walk().is_simple_random_walk(),
        "ball weight structure holds for the simple random walk"
    );
    let d = evaluator.walk().dimension();
    let law = occupation_law(evaluator, &SiteSet::ball1(d))?;
    let h1 = law.weights[0];
    let min_ratio_index = law
        .decomposition
        .ratios
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok((h1, law.weights[min_ratio_index]))
}
