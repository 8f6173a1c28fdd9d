//! Step distributions of symmetric transient random walks on Z^d and their
//! standing-assumption checks: d >= 3, unit probability mass, step symmetry,
//! finite support, and full-lattice generation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MASS_TOL: f64 = 1e-12;

/// One entry of a step law, as written in walk files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Step {
    pub offset: Vec<i64>,
    pub prob: f64,
}

/// Raw walk specification: `{"dimension": d, "steps": [{"offset": [..], "prob": r}, ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WalkSpec {
    pub dimension: usize,
    pub steps: Vec<Step>,
}

impl WalkSpec {
    /// Simple random walk: 2d unit steps with probability 1/(2d) each.
    pub fn simple_random_walk(d: usize) -> Result<WalkSpec> {
        if d < 3 {
            return Err(Error::DimensionTooLow(d));
        }
        let mut steps = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for sign in [1i64, -1] {
                let mut offset = vec![0i64; d];
                offset[axis] = sign;
                steps.push(Step { offset, prob: 1.0 / (2 * d) as f64 });
            }
        }
        Ok(WalkSpec { dimension: d, steps })
    }

    /// Parse a walk reference: `srw:d` or a path to a JSON walk file.
    pub fn from_reference(reference: &str) -> Result<WalkSpec> {
        if let Some(d) = reference.strip_prefix("srw:") {
            let d: usize = d
                .parse()
                .map_err(|_| Error::MalformedSpec(format!("bad srw dimension {d:?}")))?;
            return WalkSpec::simple_random_walk(d);
        }
        let text = std::fs::read_to_string(reference)?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedSpec(format!("{reference}: {e}")))
    }
}

/// Covariance of the step law; `isotropic_sigma2` is set when the matrix is
/// sigma^2 * Identity within 1e-12.
#[derive(Clone, Debug)]
pub struct CovarianceSummary<T: Scalar> {
    pub matrix: Vec<T>,
    pub dimension: usize,
    pub isotropic_sigma2: Option<T>,
}

impl<T: Scalar> CovarianceSummary<T> {
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.matrix[i * self.dimension + j]
    }
}

/// A step law with every standing assumption certified.
///
/// Immutable after validation; shared freely across threads.
#[derive(Clone, Debug)]
pub struct ValidatedWalk<T: Scalar> {
    dimension: usize,
    offsets: Vec<Vec<i64>>,
    probs: Vec<T>,
    /// Symmetric pairs {v, -v} listed once with combined weight (2p, or p for v = 0);
    /// this is the cosine expansion of the characteristic function.
    cosine_pairs: Vec<(Vec<i64>, T)>,
    covariance: CovarianceSummary<T>,
    walk_id: String,
    uniform: bool,
    max_offset_inf: i64,
}

impl<T: Scalar> ValidatedWalk<T> {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probs
    }

    pub fn cosine_pairs(&self) -> &[(Vec<i64>, T)] {
        &self.cosine_pairs
    }

    pub fn covariance(&self) -> &CovarianceSummary<T> {
        &self.covariance
    }

    /// Content hash of the canonical step law; keys Green caches.
    pub fn walk_id(&self) -> &str {
        &self.walk_id
    }

    /// True when all step probabilities are equal (enables uniform sampling).
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn max_offset_inf(&self) -> i64 {
        self.max_offset_inf
    }

    /// True for the 2d-unit-step law of `simple_random_walk`.
    pub fn is_simple_random_walk(&self) -> bool {
        self.uniform
            && self.offsets.len() == 2 * self.dimension
            && self.offsets.iter().all(|v| {
                v.iter().map(|c| c.abs()).sum::<i64>() == 1
            })
    }

    /// Characteristic function psi(p) = sum_x prob(x) cos(x.p).
    pub fn characteristic_function(&self, p: &[T]) -> T {
        assert_eq!(p.len(), self.dimension, "momentum dimension mismatch");
        let mut sum = T::zero();
        for (v, c) in &self.cosine_pairs {
            let mut dot = T::zero();
            for (a, &va) in v.iter().enumerate() {
                dot += T::c(va as f64) * p[a];
            }
            sum += *c * dot.cos();
        }
        sum
    }
}

/// Certify the standing assumptions and precompute derived data.
pub fn validate_walk<T: Scalar>(raw: &WalkSpec) -> Result<ValidatedWalk<T>> {
    let d = raw.dimension;
    if d < 3 {
        return Err(Error::DimensionTooLow(d));
    }
    if raw.steps.is_empty() {
        return Err(Error::MalformedSpec("empty step list".into()));
    }
    for s in &raw.steps {
        if s.offset.len() != d {
            return Err(Error::MalformedSpec(format!(
                "offset {:?} has length {}, expected {}",
                s.offset,
                s.offset.len(),
                d
            )));
        }
        if !(s.prob > 0.0 && s.prob <= 1.0) {
            return Err(Error::BadProbabilityMass(format!(
                "probability {} of offset {:?} outside (0, 1]",
                s.prob, s.offset
            )));
        }
    }

    let mut sorted: Vec<&Step> = raw.steps.iter().collect();
    sorted.sort_by(|a, b| a.offset.cmp(&b.offset));
    for w in sorted.windows(2) {
        if w[0].offset == w[1].offset {
            return Err(Error::MalformedSpec(format!("duplicate offset {:?}", w[0].offset)));
        }
    }

    let mass: f64 = raw.steps.iter().map(|s| s.prob).sum();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::BadProbabilityMass(format!(
            "probabilities sum to {mass}, outside 1 +- {MASS_TOL:e}"
        )));
    }

    // Symmetry: the mirror of every offset is present with equal probability.
    for s in &raw.steps {
        let neg: Vec<i64> = s.offset.iter().map(|c| -c).collect();
        match sorted.binary_search_by(|probe| probe.offset.cmp(&neg)) {
            Ok(i) if (sorted[i].prob - s.prob).abs() <= MASS_TOL => {}
            _ => return Err(Error::AsymmetricStep(s.offset.clone())),
        }
    }

    let index = lattice_index(d, raw.steps.iter().map(|s| s.offset.as_slice()))?;
    if index != 1 {
        return Err(Error::DegenerateLattice { index });
    }

    // Renormalize and order canonically.
    let mut steps: Vec<(Vec<i64>, f64)> =
        sorted.iter().map(|s| (s.offset.clone(), s.prob / mass)).collect();
    steps.sort_by(|a, b| a.0.cmp(&b.0));

    let mut hasher = Sha256::new();
    hasher.update((d as u64).to_le_bytes());
    for (v, p) in &steps {
        for c in v {
            hasher.update(c.to_le_bytes());
        }
        hasher.update(p.to_bits().to_le_bytes());
    }
    let walk_id = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect::<String>();

    let offsets: Vec<Vec<i64>> = steps.iter().map(|(v, _)| v.clone()).collect();
    let probs: Vec<T> = steps.iter().map(|(_, p)| T::c(*p)).collect();

    let mut cosine_pairs: Vec<(Vec<i64>, T)> = Vec::new();
    for (v, p) in &steps {
        let neg: Vec<i64> = v.iter().map(|c| -c).collect();
        if *v > neg || v.iter().all(|&c| c == 0) {
            let weight = if v.iter().all(|&c| c == 0) { *p } else { 2.0 * *p };
            cosine_pairs.push((v.clone(), T::c(weight)));
        }
    }

    let mut cov = vec![T::zero(); d * d];
    for (v, p) in &steps {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += T::c(*p * (v[i] * v[j]) as f64);
            }
        }
    }
    let trace: T = (0..d).map(|i| cov[i * d + i]).sum();
    let sigma2 = trace / T::c(d as f64);
    let mut max_dev = T::zero();
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { sigma2 } else { T::zero() };
            max_dev = max_dev.max((cov[i * d + j] - target).abs());
        }
    }
    let isotropic_sigma2 = if max_dev <= T::c(MASS_TOL) { Some(sigma2) } else { None };

    let first = probs[0];
    let uniform = probs.iter().all(|p| (*p - first).abs() <= T::c(MASS_TOL));
    let max_offset_inf =
        offsets.iter().flat_map(|v| v.iter().map(|c| c.abs())).max().unwrap_or(0);

    Ok(ValidatedWalk {
        dimension: d,
        offsets,
        probs,
        cosine_pairs,
        covariance: CovarianceSummary { matrix: cov, dimension: d, isotropic_sigma2 },
        walk_id,
        uniform,
        max_offset_inf,
    })
}

/// Index of the sublattice of Z^d generated by the given integer vectors,
/// via column-style Hermite reduction; `u128::MAX` stands in for a rank
/// deficit (infinite index).
fn lattice_index<'a>(d: usize, vectors: impl Iterator<Item = &'a [i64]>) -> Result<u128> {
    let mut cols: Vec<Vec<i128>> =
        vectors.map(|v| v.iter().map(|&c| c as i128).collect()).collect();
    let mut det: u128 = 1;
    for row in 0..d {
        loop {
            let mut best: Option<usize> = None;
            for (j, col) in cols.iter().enumerate() {
                if col[row] != 0 {
                    best = match best {
                        None => Some(j),
                        Some(b) if col[row].unsigned_abs() < cols[b][row].unsigned_abs() => Some(j),
                        keep => keep,
                    };
                }
            }
            let Some(pivot) = best else {
                return Ok(u128::MAX);
            };
            cols.swap(0, pivot);
            let p = cols[0][row];
            let mut done = true;
            for col in cols.iter_mut().skip(1) {
                if col[row] != 0 {
                    let q = col[row].div_euclid(p);
                    for r in 0..d {
                        let sub = cols[0][r]
                            .checked_mul(q)
                            .and_then(|m| col[r].checked_sub(m))
                            .ok_or_else(|| {
                                Error::MalformedSpec("offset magnitudes overflow lattice reduction".into())
                            })?;
                        col[r] = sub;
                    }
                    if col[row] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        det = det.saturating_mul(cols[0][row].unsigned_abs());
        cols.remove(0);
        if cols.is_empty() && row + 1 < d {
            return Ok(u128::MAX);
        }
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validate(spec: &WalkSpec) -> Result<ValidatedWalk<f64>> {
        validate_walk(spec)
    }

    #[test]
    fn srw_d3_is_valid() {
        let w = validate(&WalkSpec::simple_random_walk(3).unwrap()).unwrap();
        assert_eq!(w.dimension(), 3);
        assert_eq!(w.offsets().len(), 6);
        assert!(w.is_uniform());
        assert!(w.is_simple_random_walk());
        for p in w.probabilities() {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn srw_d4_has_eight_steps() {
        let w = validate(&WalkSpec::simple_random_walk(4).unwrap()).unwrap();
        assert_eq!(w.offsets().len(), 8);
        assert!((w.probabilities()[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn dimension_two_rejected() {
        assert!(matches!(WalkSpec::simple_random_walk(2), Err(Error::DimensionTooLow(2))));
        let spec = WalkSpec {
            dimension: 2,
            steps: vec![
                Step { offset: vec![1, 0], prob: 0.5 },
                Step { offset: vec![-1, 0], prob: 0.5 },
            ],
        };
        assert!(matches!(validate(&spec), Err(Error::DimensionTooLow(2))));
    }

    /// Brute-force membership oracle for small integer lattices: can `target`
    /// be written as an integer combination of `gens` with coefficients in
    /// [-bound, bound]?
    fn reachable(gens: &[Vec<i64>], target: &[i64], bound: i64) -> bool {
        fn rec(gens: &[Vec<i64>], acc: &mut [i64], target: &[i64], bound: i64, k: usize) -> bool {
            if k == gens.len() {
                return acc == target;
            }
            for c in -bound..=bound {
                for (a, g) in acc.iter_mut().zip(&gens[k]) {
                    *a += c * g;
                }
                if rec(gens, acc, target, bound, k + 1) {
                    return true;
                }
                for (a, g) in acc.iter_mut().zip(&gens[k]) {
                    *a -= c * g;
                }
            }
            false
        }
        let mut acc = vec![0i64; target.len()];
        rec(gens, &mut acc, target, bound, 0)
    }

    #[test]
    fn all_diagonal_steps_are_degenerate() {
        // All-+-1 vectors preserve coordinate-sum parity, so e_1 is unreachable.
        let dirs = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];
        let mut steps = Vec::new();
        for v in dirs {
            steps.push(Step { offset: v.to_vec(), prob: 0.125 });
            steps.push(Step { offset: v.iter().map(|c| -c).collect(), prob: 0.125 });
        }
        let spec = WalkSpec { dimension: 3, steps };
        match validate(&spec) {
            Err(Error::DegenerateLattice { index }) => assert_eq!(index, 2),
            other => panic!("expected DegenerateLattice, got {other:?}"),
        }
        let gens: Vec<Vec<i64>> = dirs.iter().map(|v| v.to_vec()).collect();
        assert!(!reachable(&gens, &[1, 0, 0], 3));
        assert!(reachable(&gens, &[2, 0, 0], 3));
    }

    #[test]
    fn hermite_oracle_on_unit_steps() {
        let gens: Vec<Vec<i64>> = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        assert!(reachable(&gens, &[1, 0, 0], 1));
        assert_eq!(lattice_index(3, gens.iter().map(|v| v.as_slice())).unwrap(), 1);
    }

    #[test]
    fn asymmetric_step_rejected() {
        let mut spec = WalkSpec::simple_random_walk(3).unwrap();
        spec.steps[0].prob += 1e-6;
        spec.steps[1].prob -= 1e-6;
        assert!(matches!(validate(&spec), Err(Error::AsymmetricStep(_))));
    }

    #[test]
    fn bad_mass_rejected() {
        let mut spec = WalkSpec::simple_random_walk(3).unwrap();
        for s in &mut spec.steps {
            s.prob *= 0.9;
        }
        assert!(matches!(validate(&spec), Err(Error::BadProbabilityMass(_))));
    }

    #[test]
    fn near_unit_mass_renormalized() {
        let mut spec = WalkSpec::simple_random_walk(3).unwrap();
        for s in &mut spec.steps {
            s.prob *= 1.0 + 1e-13;
        }
        let w = validate(&spec).unwrap();
        let total: f64 = w.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_srw_is_isotropic() {
        for d in 3..=6 {
            let w = validate(&WalkSpec::simple_random_walk(d).unwrap()).unwrap();
            let cov = w.covariance();
            let sigma2 = cov.isotropic_sigma2.expect("SRW covariance is isotropic");
            assert!((sigma2 - 1.0 / d as f64).abs() < 1e-15);
            for i in 0..d {
                assert!((cov.entry(i, i) - sigma2).abs() < 1e-15);
            }
        }
    }

    pub(crate) fn anisotropic_walk() -> WalkSpec {
        WalkSpec {
            dimension: 3,
            steps: vec![
                Step { offset: vec![1, 0, 0], prob: 1.0 / 3.0 },
                Step { offset: vec![-1, 0, 0], prob: 1.0 / 3.0 },
                Step { offset: vec![0, 1, 0], prob: 1.0 / 12.0 },
                Step { offset: vec![0, -1, 0], prob: 1.0 / 12.0 },
                Step { offset: vec![0, 0, 1], prob: 1.0 / 12.0 },
                Step { offset: vec![0, 0, -1], prob: 1.0 / 12.0 },
            ],
        }
    }

    #[test]
    fn anisotropic_walk_has_no_sigma2() {
        let w = validate(&anisotropic_walk()).unwrap();
        assert!(w.covariance().isotropic_sigma2.is_none());
        assert!((w.covariance().entry(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.covariance().entry(1, 1) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn characteristic_function_values() {
        let w = validate(&WalkSpec::simple_random_walk(3).unwrap()).unwrap();
        assert!((w.characteristic_function(&[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        assert!((w.characteristic_function(&[pi, pi, pi]) + 1.0).abs() < 1e-15);
        // closed form (1/d) sum_i cos p_i
        let p = [0.3, -1.1, 2.4];
        let expected = (p[0].cos() + p[1].cos() + p[2].cos()) / 3.0;
        assert!((w.characteristic_function(&p) - expected).abs() < 1e-15);
    }

    #[test]
    fn duplicate_offset_rejected() {
        let mut spec = WalkSpec::simple_random_walk(3).unwrap();
        let dup = spec.steps[0].clone();
        spec.steps.push(dup);
        assert!(matches!(validate(&spec), Err(Error::MalformedSpec(_))));
    }

    #[test]
    fn walk_id_is_order_independent() {
        let mut spec = WalkSpec::simple_random_walk(3).unwrap();
        let a = validate(&spec).unwrap().walk_id().to_string();
        spec.steps.reverse();
        let b = validate(&spec).unwrap().walk_id().to_string();
        assert_eq!(a, b);
    }

    #[test]
    fn walk_file_round_trip() {
        let spec = WalkSpec::simple_random_walk(3).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: WalkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
